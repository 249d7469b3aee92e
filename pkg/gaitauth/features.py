"""
Gait pattern assembly and feature extraction

A pattern concatenates n_s consecutive one-cycle segments (50% overlap between
neighbouring patterns). Each pattern yields a fixed 289-value vector:

    time block (49)       per channel Z, XY, M:
                            mean of segment maxima, mean of segment minima,
                            average absolute difference, RMS, std,
                            waveform length, 10-bin histogram     (3 x 16)
                          average segment length                 (1)
    frequency block (240) per channel Z, XY, M:
                            |DFT| bins 0..39, DCT-II coefs 0..39  (3 x 80)

Order is channel-major, feature-minor, time block before frequency block.
"""

import logging
from dataclasses import dataclass
from typing import Iterable, List, Sequence, TextIO, Tuple

import numpy as np
import pandas as pd
from scipy.fft import dct

from gaitauth.errors import DataError, SignalError
from gaitauth.segmentation import CycleSegment

logger = logging.getLogger(__name__)

CHANNELS = ("z", "xy", "m")
HIST_BINS = 10
N_COEFS = 40
FFT_LENGTH = 256

TIME_PER_CHANNEL = 6 + HIST_BINS
N_TIME = len(CHANNELS) * TIME_PER_CHANNEL + 1
N_FREQ = len(CHANNELS) * 2 * N_COEFS
N_FEATURES = N_TIME + N_FREQ  # 289


def _feature_names() -> List[str]:
    names = []
    for ch in CHANNELS:
        names += [f"{ch}_mean_max", f"{ch}_mean_min", f"{ch}_aad", f"{ch}_rms",
                  f"{ch}_std", f"{ch}_wl"]
        names += [f"{ch}_hist{b}" for b in range(HIST_BINS)]
    names.append("avg_segment_len")
    for ch in CHANNELS:
        names += [f"{ch}_fft{k}" for k in range(N_COEFS)]
        names += [f"{ch}_dct{k}" for k in range(N_COEFS)]
    return names


FEATURE_NAMES = _feature_names()
VALUE_COLUMNS = [f"f{i}" for i in range(N_FEATURES)]
FEATURE_COLUMNS = ["subject_id", "session_id"] + VALUE_COLUMNS


@dataclass
class GaitPattern:
    z: np.ndarray
    xy: np.ndarray
    m: np.ndarray
    segment_bounds: Tuple[int, ...]

    def channels(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        return self.z, self.xy, self.m

    def segments(self, channel: np.ndarray) -> List[np.ndarray]:
        b = self.segment_bounds
        return [channel[lo:hi] for lo, hi in zip(b[:-1], b[1:])]


@dataclass
class FeatureVector:
    values: np.ndarray
    subject_id: str = ""
    session_id: str = ""


def extract_patterns(segments: Sequence[CycleSegment], n_s: int = 4) -> List[GaitPattern]:
    """Windows of n_s segments with stride n_s/2; too few segments -> []."""
    if n_s < 2 or n_s % 2:
        raise SignalError(f"n_s must be even and >= 2, got {n_s}")
    stride = n_s // 2
    patterns = []
    for offset in range(0, len(segments) - n_s + 1, stride):
        window = segments[offset:offset + n_s]
        lengths = [len(s) for s in window]
        bounds = tuple(int(b) for b in np.concatenate(([0], np.cumsum(lengths))))
        patterns.append(GaitPattern(
            z=np.concatenate([s.z for s in window]),
            xy=np.concatenate([s.xy for s in window]),
            m=np.concatenate([s.m for s in window]),
            segment_bounds=bounds,
        ))
    return patterns


def histogram(x: np.ndarray, bins: int = HIST_BINS) -> np.ndarray:
    """Normalised counts over the series' own [min, max]; flat series -> bin 0."""
    lo, hi = float(x.min()), float(x.max())
    if not (np.isfinite(lo) and np.isfinite(hi)):
        return np.full(bins, np.nan)
    if lo == hi:
        out = np.zeros(bins)
        out[0] = 1.0
        return out
    counts, _ = np.histogram(x, bins=bins, range=(lo, hi))
    return counts / len(x)


def _channel_time_features(p: GaitPattern, x: np.ndarray) -> np.ndarray:
    segs = p.segments(x)
    mean_max = np.mean([s.max() for s in segs])
    mean_min = np.mean([s.min() for s in segs])
    aad = np.mean(np.abs(x - x.mean()))
    rms = np.sqrt(np.mean(x ** 2))
    std = x.std(ddof=1) if len(x) > 1 else 0.0
    wl = np.sum(np.abs(np.diff(x)))
    return np.concatenate(([mean_max, mean_min, aad, rms, std, wl], histogram(x)))


def time_features(p: GaitPattern) -> np.ndarray:
    blocks = [_channel_time_features(p, x) for x in p.channels()]
    avg_len = np.mean(np.diff(p.segment_bounds))
    return np.concatenate(blocks + [[avg_len]])


def _padded(x: np.ndarray) -> np.ndarray:
    if len(x) > FFT_LENGTH:
        logger.warning(f"⚠️ pattern of {len(x)} samples truncated to {FFT_LENGTH} for FFT/DCT")
        x = x[:FFT_LENGTH]
    out = np.zeros(FFT_LENGTH)
    out[:len(x)] = x
    return out


def freq_features(p: GaitPattern, offset: int = 0) -> np.ndarray:
    """
    |DFT| and DCT-II coefficients of each zero-padded channel.

    Args:
        p: gait pattern
        offset: first coefficient kept (0 keeps the DC bin)
    """
    blocks = []
    for x in p.channels():
        padded = _padded(np.asarray(x, dtype=float))
        spectrum = np.abs(np.fft.rfft(padded))[offset:offset + N_COEFS]
        cosine = dct(padded, type=2)[offset:offset + N_COEFS]
        blocks += [spectrum, cosine]
    return np.concatenate(blocks)


def feature_vector(p: GaitPattern, subject_id: str = "", session_id: str = "",
                   fft_offset: int = 0) -> FeatureVector:
    values = np.concatenate((time_features(p), freq_features(p, fft_offset)))
    bad = np.flatnonzero(~np.isfinite(values))
    if len(bad):
        i = int(bad[0])
        raise DataError(f"non-finite feature f{i} ({FEATURE_NAMES[i]})")
    return FeatureVector(values=values, subject_id=subject_id, session_id=session_id)


def write_features_csv(vectors: Iterable[FeatureVector], stream: TextIO) -> None:
    vectors = list(vectors)
    values = np.array([v.values for v in vectors], dtype=float).reshape(-1, N_FEATURES)
    frame = pd.DataFrame(values, columns=VALUE_COLUMNS)
    frame.insert(0, "session_id", [v.session_id for v in vectors])
    frame.insert(0, "subject_id", [v.subject_id for v in vectors])
    # default float formatting is the shortest repr, which reads back exactly
    frame.to_csv(stream, index=False, lineterminator="\n")


def read_features_csv(stream: TextIO) -> List[FeatureVector]:
    """
    Read vectors written by write_features_csv.

    Args:
        stream: text stream with header subject_id,session_id,f0..f288

    Returns:
        FeatureVectors in file order; blank lines are skipped
    """
    try:
        frame = pd.read_csv(stream, dtype=str, keep_default_na=False, skip_blank_lines=False)
    except pd.errors.EmptyDataError:
        raise DataError("features CSV is empty") from None
    except pd.errors.ParserError as e:
        raise DataError(f"malformed features CSV: {str(e).strip()}") from None
    if list(frame.columns) != FEATURE_COLUMNS:
        raise DataError("features CSV header must be subject_id,session_id,f0..f288")

    frame.index = frame.index + 2
    frame = frame.fillna("")
    frame = frame[(frame != "").any(axis=1)]
    text = frame[VALUE_COLUMNS]
    short = (text == "").any(axis=1)
    if short.any():
        raise DataError(f"line {int(short.idxmax())}: expected {len(FEATURE_COLUMNS)} fields")
    numeric = text.apply(pd.to_numeric, errors="coerce").notna().all(axis=1)
    if not numeric.all():
        raise DataError(f"line {int((~numeric).idxmax())}: non-numeric feature")

    values = text.astype(float).to_numpy()
    return [
        FeatureVector(values=row, subject_id=subject_id, session_id=session_id)
        for row, subject_id, session_id in zip(values, frame["subject_id"], frame["session_id"])
    ]
