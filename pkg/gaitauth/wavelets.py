"""
Db6 wavelet denoising

Multi-level DWT with every detail band zeroed, reconstructed from the coarse
approximation alone. The 12-tap Daubechies-6 scaling filter is embedded here;
PyWavelets runs the transform in periodization mode, which keeps the
transform orthonormal (perfect reconstruction, energy never increases).
"""

import warnings
from functools import lru_cache
from typing import List

import numpy as np
import pywt

from gaitauth.errors import SignalError

# Daubechies-6 scaling (reconstruction low-pass) coefficients, sum = sqrt(2)
DB6_SCALING = np.array([
    0.11154074335008017,
    0.4946238903983854,
    0.7511339080215775,
    0.3152503517092432,
    -0.22626469396516913,
    -0.12976686756709563,
    0.09750160558707936,
    0.02752286553001629,
    -0.031582039318031156,
    0.0005538422009938016,
    0.004777257511010651,
    -0.00107730108499558,
])

FILTER_LENGTH = len(DB6_SCALING)


@lru_cache(maxsize=1)
def db6_wavelet() -> pywt.Wavelet:
    """Orthogonal filter bank built from the embedded scaling filter."""
    rec_lo = DB6_SCALING
    dec_lo = rec_lo[::-1]
    signs = np.where(np.arange(FILTER_LENGTH) % 2 == 0, 1.0, -1.0)
    rec_hi = signs * rec_lo[::-1]
    dec_hi = rec_hi[::-1]
    wavelet = pywt.Wavelet(
        "db6-embedded",
        filter_bank=(dec_lo.tolist(), dec_hi.tolist(), rec_lo.tolist(), rec_hi.tolist()),
    )
    wavelet.orthogonal = True
    wavelet.biorthogonal = True
    return wavelet


def _check(x: np.ndarray, levels: int) -> None:
    if x.ndim != 1:
        raise SignalError(f"expected a 1-D series, got shape {x.shape}")
    if levels < 1:
        raise SignalError(f"levels must be >= 1, got {levels}")
    if len(x) < FILTER_LENGTH:
        raise SignalError(
            f"series too short for db6 denoising: {len(x)} < {FILTER_LENGTH} samples"
        )


def decompose(x, levels: int = 2) -> List[np.ndarray]:
    """[cA_levels, cD_levels, ..., cD_1] in periodization mode."""
    x = np.asarray(x, dtype=float)
    _check(x, levels)
    with warnings.catch_warnings():
        # short series at high levels: boundary effects are expected under periodization
        warnings.simplefilter("ignore", UserWarning)
        return pywt.wavedec(x, db6_wavelet(), mode="periodization", level=levels)


def reconstruct(coeffs: List[np.ndarray], length: int) -> np.ndarray:
    out = pywt.waverec(coeffs, db6_wavelet(), mode="periodization")
    return np.asarray(out[:length], dtype=float)


def wavelet_denoise(x, levels: int = 2) -> np.ndarray:
    """
    Zero all detail coefficients and rebuild the series.

    Args:
        x: real series, length >= 12
        levels: decomposition depth (2 by default)

    Returns:
        denoised series of the same length as x
    """
    x = np.asarray(x, dtype=float)
    coeffs = decompose(x, levels)
    kept = [coeffs[0]] + [np.zeros_like(d) for d in coeffs[1:]]
    return reconstruct(kept, len(x))
