"""
Earth-frame transformation

Removes gravity from each accelerometer sample, rotates it from the device
frame into the Earth frame with the per-sample orientation matrix and builds
the orientation-independent gait channels:
    Z  - vertical acceleration
    XY - horizontal magnitude sqrt(X^2 + Y^2)
    M  - total magnitude sqrt(X^2 + Y^2 + Z^2)
Vectors are rows; a device sample a maps to the Earth frame as a @ R.
"""

import math
from dataclasses import dataclass
from typing import Optional, Sequence, TextIO

import numpy as np
import pandas as pd

from gaitauth.errors import SignalError
from gaitauth.ingest import AlignedFrames
from gaitauth.wavelets import wavelet_denoise


@dataclass(frozen=True)
class RotationMatrix:
    r: np.ndarray

    def __array__(self, dtype=None, copy=None):
        return self.r if dtype is None else self.r.astype(dtype)


@dataclass
class GaitSignal:
    rate_hz: float
    z: np.ndarray
    xy: np.ndarray
    m: np.ndarray

    def __len__(self) -> int:
        return len(self.z)

    def channels(self):
        return self.z, self.xy, self.m


def remove_gravity(frames: AlignedFrames) -> AlignedFrames:
    """a <- a - g per frame; g is kept for audit."""
    return AlignedFrames(t=frames.t, a=frames.a - frames.g, g=frames.g, o=frames.o, rate_hz=frames.rate_hz)


def rotation_matrices(o_deg: np.ndarray) -> np.ndarray:
    """
    Stack of orientation matrices for angles (alpha, beta, gamma) in degrees.

    alpha rotates about Z, beta about X, gamma about Y.

    Args:
        o_deg: array (n,3) or (3,)

    Returns:
        array (n,3,3)
    """
    o = np.asarray(o_deg, dtype=float).reshape(-1, 3)
    if not np.all(np.isfinite(o)):
        raise SignalError("orientation angles must be finite")
    alpha, beta, gamma = np.radians(o).T
    sa, ca = np.sin(alpha), np.cos(alpha)
    sb, cb = np.sin(beta), np.cos(beta)
    sg, cg = np.sin(gamma), np.cos(gamma)

    r = np.empty((len(o), 3, 3))
    r[:, 0, 0] = ca * cg - sa * sb * sg
    r[:, 0, 1] = sa * cb
    r[:, 0, 2] = ca * sg + sa * sb * cg
    r[:, 1, 0] = -sa * cg - ca * sb * sg
    r[:, 1, 1] = ca * cb
    r[:, 1, 2] = -sa * sg + ca * sb * cg
    r[:, 2, 0] = -cb * sg
    r[:, 2, 1] = -sb
    r[:, 2, 2] = cb * cg
    return r


def rotation_matrix(o: Sequence[float]) -> RotationMatrix:
    if len(o) != 3 or not all(math.isfinite(float(x)) for x in o):
        raise SignalError(f"orientation must be 3 finite angles, got {o}")
    return RotationMatrix(r=rotation_matrices(o)[0])


def to_earth(a: Sequence[float], rotation: RotationMatrix) -> np.ndarray:
    """Row-vector product a @ R."""
    return np.asarray(a, dtype=float) @ np.asarray(rotation)


def transform_frames(frames: AlignedFrames) -> np.ndarray:
    """Gravity removal then per-sample rotation; returns Earth samples (n,3)."""
    linear = remove_gravity(frames).a
    r = rotation_matrices(frames.o)
    return np.einsum("ni,nij->nj", linear, r)


def project_channels(earth_samples, rate_hz: float) -> GaitSignal:
    samples = np.asarray(earth_samples, dtype=float).reshape(-1, 3)
    if len(samples) == 0:
        raise SignalError("no samples to project")
    x, y, z = samples.T
    xy = np.hypot(x, y)
    return GaitSignal(rate_hz=rate_hz, z=z.copy(), xy=xy, m=np.hypot(xy, z))


def denoise_axes(samples: np.ndarray, levels: Optional[int]) -> np.ndarray:
    """Db6 denoising of each axis of an (n,3) batch; levels=None leaves it as is."""
    if not levels:
        return samples
    return np.column_stack([wavelet_denoise(samples[:, j], levels) for j in range(samples.shape[1])])


def earth_channels(frames: AlignedFrames, levels: Optional[int] = None) -> GaitSignal:
    """Orientation-independent channels: transform, denoise each Earth axis, project."""
    return project_channels(denoise_axes(transform_frames(frames), levels), frames.rate_hz)


def device_channels(frames: AlignedFrames, levels: Optional[int] = None) -> GaitSignal:
    """Channels from gravity-free device axes, without any rotation."""
    return project_channels(denoise_axes(remove_gravity(frames).a, levels), frames.rate_hz)


def magnitude_channels(frames: AlignedFrames, levels: Optional[int] = None) -> GaitSignal:
    """
    Magnitude-only signal: Z carries the centered, negated total magnitude so
    that heel-strike impacts show as negative peaks like on the vertical
    channel; XY is empty.

    The magnitude of a rotated vector does not depend on the rotation, so this
    signal needs no orientation data at all.
    """
    m = device_channels(frames, levels).m
    return GaitSignal(rate_hz=frames.rate_hz, z=m.mean() - m, xy=np.zeros_like(m), m=m)


def write_signal_csv(signal: GaitSignal, t_ms: np.ndarray, stream: TextIO) -> None:
    frame = pd.DataFrame({
        "t_ms": np.asarray(t_ms, dtype=float),
        "z": signal.z,
        "xy": signal.xy,
        "m": signal.m,
    })
    frame.to_csv(stream, index=False, lineterminator="\n")
