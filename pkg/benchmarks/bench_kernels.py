"""Compares the compiled convolution backend against the numpy fallback.

Run:  python3 benchmarks/bench_kernels.py
"""

import time

import numpy as np

from irplab.kernels import _reference as ref

try:
    from irplab.kernels import _convkernels
except ImportError:
    _convkernels = None

CASES = [
    # (label, n, cin, h, w, cout, k, stride, padding, dilation, groups)
    ("stem 3->32 s2", 8, 3, 64, 64, 32, 3, 2, 1, 1, 1),
    ("aspp d=1", 8, 32, 16, 16, 32, 3, 1, 1, 1, 1),
    ("aspp d=4", 8, 32, 16, 16, 32, 3, 1, 4, 4, 1),
    ("depthwise", 8, 64, 4, 4, 64, 3, 1, 1, 1, 64),
    ("pointwise 1x1", 8, 64, 4, 4, 32, 1, 1, 0, 1, 1),
    ("reprojection", 8, 32, 16, 16, 32, 3, 1, 1, 1, 1),
]


def time_fn(fn, *args, repeats=5):
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    if _convkernels is None:
        print("compiled backend unavailable; only the numpy fallback is present")
    rng = np.random.default_rng(0)
    print(f"{'case':<16} {'dir':<8} {'numpy ms':>10} {'compiled ms':>12} {'speedup':>8}")
    for label, n, cin, h, w, cout, k, stride, padding, dilation, groups in CASES:
        x = rng.normal(size=(n, cin, h, w))
        wt = rng.normal(size=(cout, cin // groups, k, k))
        args = (stride, padding, dilation, groups)
        y = ref.conv2d_forward(x, wt, *args)
        gy = rng.normal(size=y.shape)

        t_ref_f = time_fn(ref.conv2d_forward, x, wt, *args)
        t_ref_b = time_fn(ref.conv2d_backward, x, wt, gy, *args)
        if _convkernels is not None:
            t_c_f = time_fn(_convkernels.conv2d_forward, x, wt, *args)
            t_c_b = time_fn(_convkernels.conv2d_backward, x, wt, gy, *args)
            err = np.max(np.abs(_convkernels.conv2d_forward(x, wt, *args) - y))
            assert err < 1e-10, f"backend mismatch on {label}: {err}"
            print(f"{label:<16} {'fwd':<8} {t_ref_f * 1e3:>10.3f} {t_c_f * 1e3:>12.3f} {t_ref_f / t_c_f:>7.2f}x")
            print(f"{label:<16} {'bwd':<8} {t_ref_b * 1e3:>10.3f} {t_c_b * 1e3:>12.3f} {t_ref_b / t_c_b:>7.2f}x")
        else:
            print(f"{label:<16} {'fwd':<8} {t_ref_f * 1e3:>10.3f} {'-':>12} {'-':>8}")
            print(f"{label:<16} {'bwd':<8} {t_ref_b * 1e3:>10.3f} {'-':>12} {'-':>8}")


if __name__ == "__main__":
    main()
