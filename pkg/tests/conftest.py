import numpy as np
import pytest

from irplab.imaging import ExposureConfig, FlowField, LinearImage, QuantizedImage, RadianceFrame


def quant(arr, m_max=255):
    arr = np.asarray(arr)
    if arr.ndim == 2:
        arr = np.repeat(arr[..., None], 3, axis=2)
    dtype = np.uint8 if m_max <= 255 else np.uint16
    return QuantizedImage(arr.astype(dtype), m_max=m_max)


def const_frame(value, h=16, w=16):
    return RadianceFrame(np.full((h, w, 3), float(value)))


def zero_flow(h=16, w=16):
    return FlowField(np.zeros((h, w)), np.zeros((h, w)))


@pytest.fixture
def rng():
    return np.random.default_rng(0)
