"""
Gait cycle segmentation

Cycle starts are the deep negative peaks of the vertical (Z) channel that
recur one cycle apart. The cycle length comes from the second maximum of the
smoothed, bias-corrected autocorrelation of Z (the first maximum is a single
step, the second a full two-step cycle). Candidates are filtered on two
criteria:
    magnitude - peak value below delta = mean - tau * std of all peaks
    position  - another peak follows within [delta_len - eps, delta_len + eps]
"""

import logging
from dataclasses import dataclass
from typing import List, Sequence, TextIO, Tuple

import numpy as np
import pandas as pd
from scipy.signal import find_peaks

from gaitauth.earth_transform import GaitSignal
from gaitauth.errors import SignalError

logger = logging.getLogger(__name__)

DEFAULT_SMOOTH_WINDOW = 5
DEFAULT_MIN_LAG_S = 0.25
DEFAULT_MIN_PROMINENCE = 0.05


@dataclass(frozen=True)
class PeakSet:
    indices: Tuple[int, ...]

    def __len__(self) -> int:
        return len(self.indices)


@dataclass(frozen=True)
class CycleStarts:
    indices: Tuple[int, ...]
    cycle_len: int

    def __len__(self) -> int:
        return len(self.indices)


@dataclass
class CycleSegment:
    z: np.ndarray
    xy: np.ndarray
    m: np.ndarray
    start_index: int

    def __len__(self) -> int:
        return len(self.z)


def autocorr(z) -> np.ndarray:
    """
    Bias-corrected autocorrelation coefficients.

    c_t = N/(N-t) * sum_{i} z_i z_{i+t} / sum_i z_i^2, for 0 <= t < N
    """
    z = np.asarray(z, dtype=float)
    n = len(z)
    if n < 2:
        raise SignalError("autocorrelation needs at least 2 samples")
    energy = float(np.dot(z, z))
    if energy == 0.0:
        raise SignalError("no signal energy")
    lagged = np.correlate(z, z, mode="full")[n - 1:]
    return (n / (n - np.arange(n))) * lagged / energy


def moving_average(x: np.ndarray, window: int) -> np.ndarray:
    if window <= 1:
        return np.asarray(x, dtype=float)
    return np.convolve(x, np.ones(window) / window, mode="same")


def estimate_cycle_length(
    c,
    rate_hz: float,
    window: int = DEFAULT_SMOOTH_WINDOW,
    min_lag_s: float = DEFAULT_MIN_LAG_S,
    min_prominence: float = DEFAULT_MIN_PROMINENCE,
) -> int:
    """
    Cycle length in samples: lag of the second smoothed autocorrelation maximum.

    Args:
        c: autocorrelation coefficients from autocorr()
        rate_hz: sampling rate, sets the minimum lag round(min_lag_s * rate_hz)
        window: centered moving-average width
        min_prominence: maxima less prominent than this are ignored

    Returns:
        estimated cycle length (int samples)
    """
    smoothed = moving_average(np.asarray(c, dtype=float), window)
    min_lag = int(round(min_lag_s * rate_hz))
    maxima, _ = find_peaks(smoothed, prominence=min_prominence)
    maxima = maxima[maxima >= min_lag]
    if len(maxima) < 2:
        raise SignalError("aperiodic signal")
    return int(maxima[1])


def find_negative_peaks(z) -> PeakSet:
    """Strict local minima of z, in order."""
    z = np.asarray(z, dtype=float)
    if len(z) < 3:
        raise SignalError("peak search needs at least 3 samples")
    inner = z[1:-1]
    minima = np.flatnonzero((z[:-2] > inner) & (z[2:] > inner)) + 1
    if len(minima) <= 1:
        raise SignalError(f"need more than one negative peak, found {len(minima)}")
    return PeakSet(indices=tuple(int(i) for i in minima))


def magnitude_threshold(z, peaks: PeakSet, tau: float) -> float:
    values = np.asarray(z, dtype=float)[list(peaks.indices)]
    if len(values) < 2:
        raise SignalError("magnitude threshold needs at least 2 peaks")
    return float(values.mean() - tau * values.std(ddof=1))


def _chain(idx: np.ndarray, deep: np.ndarray, qualifying: np.ndarray,
           anchor: int, cycle_len: int, eps: int) -> List[int]:
    chain = [anchor]
    current = anchor
    while True:
        gap = idx - idx[current]
        in_window = (np.arange(len(idx)) > current) & (gap >= cycle_len - eps) & (gap <= cycle_len + eps)
        target = idx[current] + cycle_len

        candidates = np.flatnonzero(in_window & qualifying)
        closing = False
        if len(candidates) == 0:
            candidates = np.flatnonzero(in_window & deep)
            closing = True
        if len(candidates) == 0:
            return chain

        # closest to one cycle ahead; ties go to the earlier peak
        nxt = int(candidates[np.argmin(np.abs(idx[candidates] - target))])
        chain.append(nxt)
        current = nxt
        if closing:
            return chain


def select_cycle_starts(z, peaks: PeakSet, cycle_len: int, tau: float, eps: int) -> CycleStarts:
    """
    Greedy left-to-right selection of cycle starting points.

    The chain is anchored at the deepest qualifying peak less than one cycle
    after the first qualifying peak; each following start is the qualifying
    peak closest to previous + cycle_len, and the chain is closed by a deep
    successor peak that has no successor of its own.
    """
    if cycle_len <= 0 or eps < 0:
        raise SignalError(f"invalid cycle length {cycle_len} / epsilon {eps}")
    z = np.asarray(z, dtype=float)
    idx = np.asarray(peaks.indices, dtype=int)
    delta = magnitude_threshold(z, peaks, tau)

    deep = z[idx] < delta
    gaps = idx[None, :] - idx[:, None]
    has_successor = ((gaps > 0) & (gaps >= cycle_len - eps) & (gaps <= cycle_len + eps)).any(axis=1)
    qualifying = deep & has_successor

    positions = np.flatnonzero(qualifying)
    if len(positions) == 0:
        raise SignalError("no complete cycle")

    first = positions[0]
    opening = positions[idx[positions] - idx[first] < cycle_len - eps]
    if len(opening) == 0:
        opening = positions[:1]
    anchor = int(opening[np.argmin(z[idx[opening]])])

    tried = [anchor] + [int(p) for p in positions if p > anchor]
    for start in tried:
        chain = _chain(idx, deep, qualifying, start, cycle_len, eps)
        if len(chain) >= 2:
            return CycleStarts(indices=tuple(int(idx[j]) for j in chain), cycle_len=int(cycle_len))
    raise SignalError("no complete cycle")


def split_cycles(signal: GaitSignal, starts: CycleStarts) -> List[CycleSegment]:
    """k starts -> k-1 segments, bounds inclusive on both ends."""
    segments = []
    for lo, hi in zip(starts.indices[:-1], starts.indices[1:]):
        segments.append(CycleSegment(
            z=signal.z[lo:hi + 1].copy(),
            xy=signal.xy[lo:hi + 1].copy(),
            m=signal.m[lo:hi + 1].copy(),
            start_index=int(lo),
        ))
    return segments


def segment(
    signal: GaitSignal,
    tau: float = 1.0,
    epsilon_fraction: float = 0.3,
    window: int = DEFAULT_SMOOTH_WINDOW,
    min_lag_s: float = DEFAULT_MIN_LAG_S,
    min_prominence: float = DEFAULT_MIN_PROMINENCE,
) -> Tuple[CycleStarts, List[CycleSegment]]:
    """Autocorrelation -> cycle length -> peak filtering -> one-cycle segments."""
    c = autocorr(signal.z)
    cycle_len = estimate_cycle_length(c, signal.rate_hz, window, min_lag_s, min_prominence)
    eps = max(1, int(round(epsilon_fraction * cycle_len)))
    peaks = find_negative_peaks(signal.z)
    starts = select_cycle_starts(signal.z, peaks, cycle_len, tau, eps)
    segments = split_cycles(signal, starts)
    logger.debug(
        f"cycle length {cycle_len} samples, {len(peaks)} peaks, "
        f"{len(starts)} starts, {len(segments)} cycles"
    )
    return starts, segments


def write_starts_csv(starts: CycleStarts, z: Sequence[float], rate_hz: float,
                     stream: TextIO, t0_ms: float = 0.0) -> None:
    indices = np.asarray(starts.indices, dtype=int)
    frame = pd.DataFrame({
        "index": indices,
        "t_ms": t0_ms + indices * (1000.0 / rate_hz),
        "z_value": np.asarray(z, dtype=float)[indices],
    })
    frame.to_csv(stream, index=False, lineterminator="\n")
