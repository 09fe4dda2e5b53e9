import numpy as np
import pytest

from irplab.kernels import BACKEND, conv2d_backward, conv2d_forward, conv_output_size
from irplab.kernels import _reference as ref

try:
    from irplab.kernels import _convkernels
except ImportError:
    _convkernels = None

CONFIGS = [
    # (n, cin, h, w, cout, k, stride, padding, dilation, groups)
    (1, 1, 5, 5, 1, 3, 1, 0, 1, 1),
    (2, 3, 8, 8, 4, 3, 1, 1, 1, 1),
    (1, 4, 9, 7, 6, 3, 2, 1, 1, 1),
    (1, 2, 10, 10, 2, 3, 1, 2, 2, 1),
    (2, 4, 8, 8, 4, 3, 1, 1, 1, 4),
    (1, 6, 7, 7, 6, 1, 1, 0, 1, 2),
    (1, 3, 12, 12, 5, 5, 2, 2, 1, 1),
]


class TestReference:
    def test_output_size(self):
        assert conv_output_size(8, 3, 1, 1, 1) == 8
        assert conv_output_size(8, 3, 2, 1, 1) == 4
        assert conv_output_size(10, 3, 1, 2, 2) == 10
        assert conv_output_size(5, 3, 1, 0, 1) == 3

    def test_identity_kernel(self, rng):
        x = rng.normal(size=(1, 2, 6, 6))
        w = np.zeros((2, 2, 1, 1))
        w[0, 0], w[1, 1] = 1.0, 1.0
        assert np.allclose(ref.conv2d_forward(x, w), x)

    def test_hand_computed_3x3(self):
        x = np.arange(16, dtype=np.float64).reshape(1, 1, 4, 4)
        w = np.ones((1, 1, 3, 3))
        y = ref.conv2d_forward(x, w)
        # top-left window sums 0,1,2,4,5,6,8,9,10
        assert y.shape == (1, 1, 2, 2)
        assert y[0, 0, 0, 0] == 45.0
        assert y[0, 0, 1, 1] == 90.0

    def test_channel_mismatch(self, rng):
        with pytest.raises(ValueError):
            ref.conv2d_forward(rng.normal(size=(1, 3, 4, 4)), rng.normal(size=(2, 2, 3, 3)))

    @pytest.mark.parametrize("cfg", CONFIGS)
    def test_backward_matches_numeric(self, cfg, rng):
        n, cin, h, w_, cout, k, stride, padding, dilation, groups = cfg
        x = rng.normal(size=(n, cin, h, w_))
        w = rng.normal(size=(cout, cin // groups, k, k))
        y = ref.conv2d_forward(x, w, stride, padding, dilation, groups)
        gy = rng.normal(size=y.shape)
        gx, gw = ref.conv2d_backward(x, w, gy, stride, padding, dilation, groups)
        eps = 1e-6
        # spot-check a handful of coordinates against central differences
        flat_idx = rng.choice(x.size, size=5, replace=False)
        for fi in flat_idx:
            idx = np.unravel_index(fi, x.shape)
            xp, xm = x.copy(), x.copy()
            xp[idx] += eps
            xm[idx] -= eps
            num = (
                np.sum(ref.conv2d_forward(xp, w, stride, padding, dilation, groups) * gy)
                - np.sum(ref.conv2d_forward(xm, w, stride, padding, dilation, groups) * gy)
            ) / (2 * eps)
            assert abs(gx[idx] - num) < 1e-4
        flat_idx = rng.choice(w.size, size=5, replace=False)
        for fi in flat_idx:
            idx = np.unravel_index(fi, w.shape)
            wp, wm = w.copy(), w.copy()
            wp[idx] += eps
            wm[idx] -= eps
            num = (
                np.sum(ref.conv2d_forward(x, wp, stride, padding, dilation, groups) * gy)
                - np.sum(ref.conv2d_forward(x, wm, stride, padding, dilation, groups) * gy)
            ) / (2 * eps)
            assert abs(gw[idx] - num) < 1e-4


@pytest.mark.skipif(_convkernels is None, reason="compiled backend not built")
class TestCompiledEquivalence:
    @pytest.mark.parametrize("cfg", CONFIGS)
    def test_forward_matches_reference(self, cfg, rng):
        n, cin, h, w_, cout, k, stride, padding, dilation, groups = cfg
        x = rng.normal(size=(n, cin, h, w_))
        w = rng.normal(size=(cout, cin // groups, k, k))
        a = ref.conv2d_forward(x, w, stride, padding, dilation, groups)
        b = _convkernels.conv2d_forward(x, w, stride, padding, dilation, groups)
        assert np.allclose(a, b, atol=1e-12, rtol=1e-12)

    @pytest.mark.parametrize("cfg", CONFIGS)
    def test_backward_matches_reference(self, cfg, rng):
        n, cin, h, w_, cout, k, stride, padding, dilation, groups = cfg
        x = rng.normal(size=(n, cin, h, w_))
        w = rng.normal(size=(cout, cin // groups, k, k))
        y = ref.conv2d_forward(x, w, stride, padding, dilation, groups)
        gy = rng.normal(size=y.shape)
        gx_a, gw_a = ref.conv2d_backward(x, w, gy, stride, padding, dilation, groups)
        gx_b, gw_b = _convkernels.conv2d_backward(x, w, gy, stride, padding, dilation, groups)
        assert np.allclose(gx_a, gx_b, atol=1e-12, rtol=1e-12)
        assert np.allclose(gw_a, gw_b, atol=1e-12, rtol=1e-12)


class TestBackendSelection:
    def test_backend_reported(self):
        assert BACKEND in ("compiled", "numpy")
        if _convkernels is not None:
            assert BACKEND == "compiled"

    def test_active_backend_functional(self, rng):
        x = rng.normal(size=(1, 2, 6, 6))
        w = rng.normal(size=(3, 2, 3, 3))
        y = conv2d_forward(x, w, 1, 1, 1, 1)
        assert y.shape == (1, 3, 6, 6)
        gx, gw = conv2d_backward(x, w, np.ones_like(y), 1, 1, 1, 1)
        assert gx.shape == x.shape and gw.shape == w.shape

    def test_fallback_env_var(self, tmp_path):
        import subprocess
        import sys

        code = "import irplab.kernels as k; print(k.BACKEND)"
        out = subprocess.run(
            [sys.executable, "-c", code],
            capture_output=True,
            text=True,
            env={"PATH": "/usr/bin:/bin", "IRPLAB_FORCE_FALLBACK": "1"},
        )
        assert out.stdout.strip() == "numpy"
