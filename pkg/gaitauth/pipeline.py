"""
Per-session processing chain

    log -> align -> Earth transform -> db6 denoise -> Z/XY/M channels
        -> cycle segmentation -> gait patterns -> 289-value feature vectors

Variants select how the channels are built:
    earth      full orientation-independent transform
    device     gravity removed, device axes used as-is (no rotation)
    magnitude  total magnitude only
"""

import glob
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

from gaitauth.config import PipelineConfig
from gaitauth.earth_transform import (
    GaitSignal,
    device_channels,
    earth_channels,
    magnitude_channels,
    write_signal_csv,
)
from gaitauth.errors import DataError
from gaitauth.features import FeatureVector, extract_patterns, feature_vector
from gaitauth.ingest import RawSession, align, load_session
from gaitauth.segmentation import CycleStarts, segment, split_cycles, write_starts_csv

logger = logging.getLogger(__name__)

CHANNEL_BUILDERS: Dict[str, Callable] = {
    "earth": earth_channels,
    "device": device_channels,
    "magnitude": magnitude_channels,
}
VARIANTS = tuple(CHANNEL_BUILDERS)

SIGNAL_SUFFIX = ".signal.csv"
STARTS_SUFFIX = ".starts.csv"
# sidecars that sit next to logs but are not logs
SIDECAR_SUFFIXES = (".truth.csv", SIGNAL_SUFFIX, STARTS_SUFFIX)


@dataclass
class SessionResult:
    subject_id: str
    session_id: str
    n_cycles: int = 0
    vectors: List[FeatureVector] = field(default_factory=list)
    starts: Optional[CycleStarts] = None
    signal: Optional[GaitSignal] = field(default=None, repr=False)
    t_ms: Optional[object] = field(default=None, repr=False)


@dataclass
class FileOutcome:
    path: str
    result: Optional[SessionResult] = None
    error: Optional[str] = None

    @property
    def ok(self) -> bool:
        return self.result is not None


def session_signal(session: RawSession, config: PipelineConfig, variant: str = "earth") -> Tuple[GaitSignal, object]:
    if variant not in CHANNEL_BUILDERS:
        raise DataError(f"unknown variant '{variant}' (expected one of {VARIANTS})")
    frames = align(session, config.rate_hz)
    return CHANNEL_BUILDERS[variant](frames, config.wavelet_levels), frames.t


def process_session(session: RawSession, config: PipelineConfig, variant: str = "earth",
                    segment_on: Optional[str] = None) -> SessionResult:
    """
    Run one session through the whole chain.

    A session too short for a single pattern yields zero vectors and a
    warning; every other failure raises a DataError.

    Args:
        variant: channel variant the features are taken from
        segment_on: variant whose Z channel sets the cycle starts; the
            variant's own signal when None
    """
    signal, t_ms = session_signal(session, config, variant)
    reference = signal
    if segment_on is not None and segment_on != variant:
        reference, _ = session_signal(session, config, segment_on)
    starts, segments = segment(
        reference,
        tau=config.tau,
        epsilon_fraction=config.epsilon_fraction,
        window=config.smooth_window,
        min_lag_s=config.min_lag_s,
        min_prominence=config.min_prominence,
    )
    if reference is not signal:
        segments = split_cycles(signal, starts)
    patterns = extract_patterns(segments, config.n_s)
    if not patterns:
        logger.warning(
            f"⚠️ {session.session_id or session.subject_id}: {len(segments)} cycles, "
            f"fewer than n_s={config.n_s}, no patterns"
        )
    vectors = [
        feature_vector(p, session.subject_id, session.session_id, config.fft_offset)
        for p in patterns
    ]
    logger.info(
        f"{session.session_id or session.subject_id}: {len(segments)} cycles, {len(vectors)} patterns"
    )
    return SessionResult(
        subject_id=session.subject_id,
        session_id=session.session_id,
        n_cycles=len(segments),
        vectors=vectors,
        starts=starts,
        signal=signal,
        t_ms=t_ms,
    )


def process_file(path: str, config: PipelineConfig, variant: str = "earth") -> FileOutcome:
    """Load and process one log; data errors are captured, not raised."""
    try:
        return FileOutcome(path=path, result=process_session(load_session(path), config, variant))
    except DataError as e:
        logger.warning(f"⚠️ skipping {path}: {e}")
        return FileOutcome(path=path, error=str(e))


def process_files(paths: Sequence[str], config: PipelineConfig, variant: str = "earth") -> List[FileOutcome]:
    """Process logs with config.jobs workers; outcomes keep the input order."""
    with ThreadPoolExecutor(max_workers=config.jobs) as pool:
        return list(pool.map(lambda p: process_file(p, config, variant), paths))


def process_sessions(sessions: Sequence[RawSession], config: PipelineConfig,
                     variant: str = "earth", segment_on: Optional[str] = None) -> List[FeatureVector]:
    """Feature vectors of in-memory sessions; failing sessions are skipped with a warning."""
    def run(session: RawSession) -> List[FeatureVector]:
        try:
            return process_session(session, config, variant, segment_on).vectors
        except DataError as e:
            logger.warning(f"⚠️ skipping {session.session_id}: {e}")
            return []

    with ThreadPoolExecutor(max_workers=config.jobs) as pool:
        return [v for vectors in pool.map(run, sessions) for v in vectors]


def write_session_dump(result: SessionResult, out_dir: str) -> List[str]:
    """
    Write the denoised channels and cycle starts of one processed session.

    Args:
        result: processed session carrying its signal, time axis and starts
        out_dir: directory for <session>.signal.csv and <session>.starts.csv

    Returns:
        written paths
    """
    stem = result.session_id or result.subject_id
    signal_path = os.path.join(out_dir, f"{stem}{SIGNAL_SUFFIX}")
    starts_path = os.path.join(out_dir, f"{stem}{STARTS_SUFFIX}")
    try:
        os.makedirs(out_dir, exist_ok=True)
        with open(signal_path, "w", encoding="utf-8", newline="") as f:
            write_signal_csv(result.signal, result.t_ms, f)
        with open(starts_path, "w", encoding="utf-8", newline="") as f:
            write_starts_csv(result.starts, result.signal.z, result.signal.rate_hz, f,
                             t0_ms=float(result.t_ms[0]))
    except OSError as e:
        raise DataError(f"cannot write dump for {stem}: {e.strerror}") from None
    return [signal_path, starts_path]


def collect_inputs(paths: Sequence[str]) -> List[str]:
    """Expand directories to their *.csv logs (sidecars excluded), sorted."""
    files: List[str] = []
    for path in paths:
        if os.path.isdir(path):
            found = sorted(glob.glob(os.path.join(path, "*.csv")))
            files += [f for f in found if not f.endswith(SIDECAR_SUFFIXES)]
        elif os.path.exists(path):
            files.append(path)
        else:
            raise DataError(f"input not found: {path}")
    if not files:
        raise DataError("no input files")
    return files
