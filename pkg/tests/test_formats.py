import numpy as np
import pytest

from irplab.formats import FormatError, read_capture, read_flow, write_capture, write_flow
from irplab.imaging import FlowField, QuantizedImage

from conftest import quant


class TestCaptures:
    def test_png_round_trip(self, tmp_path, rng):
        img = quant(rng.integers(0, 256, (12, 9)))
        path = tmp_path / "cap.png"
        write_capture(path, img)
        back = read_capture(path)
        assert back.m_max == 255
        assert np.array_equal(back.data, img.data)

    def test_png_magic_bytes(self, tmp_path):
        path = tmp_path / "cap.png"
        write_capture(path, quant(np.zeros((4, 4))))
        assert path.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"

    def test_irpq_round_trip(self, tmp_path, rng):
        img = quant(rng.integers(0, 1024, (7, 5)), m_max=1023)
        path = tmp_path / "cap.irpq"
        write_capture(path, img)
        back = read_capture(path, m_max=1023)
        assert back.m_max == 1023
        assert np.array_equal(back.data, img.data)

    def test_irpq_layout(self, tmp_path):
        img = QuantizedImage(np.zeros((2, 3, 3), dtype=np.uint16), m_max=1023)
        path = tmp_path / "cap.irpq"
        write_capture(path, img)
        raw = path.read_bytes()
        assert raw[:4] == b"IRPQ"
        assert raw[4:6] == (3).to_bytes(2, "little")
        assert raw[6:8] == (2).to_bytes(2, "little")
        assert len(raw) == 8 + 2 * 3 * 3 * 2

    def test_irpq_bad_magic(self, tmp_path):
        path = tmp_path / "bad.irpq"
        path.write_bytes(b"NOPE" + bytes(20))
        with pytest.raises(FormatError):
            read_capture(path, m_max=1023)

    def test_irpq_truncated(self, tmp_path):
        img = quant(np.zeros((4, 4)), m_max=1023)
        path = tmp_path / "cap.irpq"
        write_capture(path, img)
        path.write_bytes(path.read_bytes()[:-3])
        with pytest.raises(FormatError):
            read_capture(path, m_max=1023)

    def test_not_a_png(self, tmp_path):
        path = tmp_path / "junk.png"
        path.write_bytes(b"definitely not an image")
        with pytest.raises(FormatError):
            read_capture(path)


class TestFlow:
    def test_round_trip(self, tmp_path, rng):
        flow = FlowField(rng.normal(size=(6, 11)), rng.normal(size=(6, 11)))
        path = tmp_path / "f.flo"
        write_flow(path, flow)
        back = read_flow(path)
        assert np.allclose(back.u, flow.u, atol=1e-6)
        assert np.allclose(back.v, flow.v, atol=1e-6)

    def test_single_pixel_bytes(self, tmp_path):
        # 12-byte header plus one (u, v) float32 pair
        flow = FlowField(np.array([[1.5]]), np.array([[-2.0]]))
        path = tmp_path / "f.flo"
        write_flow(path, flow)
        raw = path.read_bytes()
        assert len(raw) == 20
        assert np.frombuffer(raw[:4], dtype="<f4")[0] == np.float32(202021.25)
        assert int.from_bytes(raw[4:8], "little") == 1
        assert int.from_bytes(raw[8:12], "little") == 1
        assert np.frombuffer(raw[12:], dtype="<f4").tolist() == [1.5, -2.0]

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "f.flo"
        import struct

        path.write_bytes(struct.pack("<fii", 1.0, 1, 1) + bytes(8))
        with pytest.raises(FormatError):
            read_flow(path)

    def test_truncated(self, tmp_path):
        flow = FlowField(np.zeros((3, 3)), np.zeros((3, 3)))
        path = tmp_path / "f.flo"
        write_flow(path, flow)
        path.write_bytes(path.read_bytes()[:-4])
        with pytest.raises(FormatError):
            read_flow(path)
