"""
Synthetic gait cohorts

Generates Earth-frame gait acceleration with known cycle starts and
re-expresses it in an arbitrarily oriented device frame, producing sensor logs
in the same format ingest reads. The device frame is the exact inverse of the
Earth transform: device = earth @ R^T, so the pipeline must recover the
generated Earth samples.

Vertical channel, phase theta = 2 pi (t - t0) / cycle_s with t0 the first strike:
    z(theta) = -(s(theta) + step_asymmetry * s(theta - pi))
    s(theta) = sum_k a_k cos(k theta + phi_k)      (harmonics_z, k = 1..3)
s is the heel-strike profile: its peak at theta = 0 is the same-side heel
strike, the scaled copy half a cycle later the off-side one.

Cohort profiles are shaped so that each denoised cycle holds one deep minimum
plus a flat, shallow off-side stretch. The strike grid is centred in the
recording, away from the edges where periodic wavelet extension wraps around.
"""

import dataclasses
import json
import logging
import math
import os
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from gaitauth.config import PipelineConfig
from gaitauth.earth_transform import rotation_matrices
from gaitauth.errors import DataError
from gaitauth.ingest import ACCEL, GRAVITY, ORIENTATION, SESSION_SEPARATOR, RawSession, SensorRecord, serialize_log

logger = logging.getLogger(__name__)

GRAVITY_EARTH = np.array([0.0, 0.0, 9.81])
N_HARMONICS = 3

# cohort sampling ranges
CYCLE_RANGE = (0.9, 1.4)
ASYMMETRY_RANGE = (0.25, 0.35)
STRIKE_AMPLITUDE_RANGE = (1.0, 2.0)
# second and third strike harmonics relative to the first
STRIKE_SHAPE_RANGES = ((0.49, 0.51), (0.41, 0.43))
STRIKE_PHASE = 0.08
H_AMPLITUDE_RANGES = ((0.5, 1.5), (0.3, 1.0), (0.1, 0.5))
SESSION_CYCLE_JITTER = 0.02
MAX_DRAWS = 10000


@dataclass
class SubjectParams:
    cycle_s: float
    harmonics_z: List[Tuple[float, float]]
    harmonics_h: List[Tuple[float, float]]
    step_asymmetry: float = 0.5
    noise_sigma: float = 0.1
    seed: int = 0
    heading_deg: float = 0.0

    def validate(self) -> "SubjectParams":
        if self.cycle_s <= 0:
            raise DataError(f"cycle_s must be positive, got {self.cycle_s}")
        if any(a < 0 for a, _ in self.harmonics_z + self.harmonics_h):
            raise DataError("harmonic amplitudes must be >= 0")
        if self.noise_sigma < 0:
            raise DataError(f"noise_sigma must be >= 0, got {self.noise_sigma}")
        if not 0 <= self.step_asymmetry <= 1:
            raise DataError(f"step_asymmetry must be in [0,1], got {self.step_asymmetry}")
        return self


@dataclass
class OrientationTrajectory:
    mode: str = "fixed"
    base: Tuple[float, float, float] = (0.0, 0.0, 0.0)
    drift_rate: float = 0.0
    seed: int = 0
    direction: Tuple[float, float, float] = (1.0, 0.0, 0.0)


@dataclass
class SyntheticSession:
    session: RawSession
    truth: List[int]
    params: SubjectParams
    trajectory: OrientationTrajectory
    earth: np.ndarray = field(repr=False)


@dataclass
class Cohort:
    subjects: Dict[str, SubjectParams]
    sessions: List[SyntheticSession]
    seed: int
    rate_hz: float
    duration_s: float = 0.0


def _harmonic_sum(theta: np.ndarray, harmonics: Sequence[Tuple[float, float]]) -> np.ndarray:
    out = np.zeros_like(theta)
    for k, (amplitude, phase) in enumerate(harmonics, start=1):
        out += amplitude * np.cos(k * theta + phase)
    return out


def cycle_count(cycle_s: float, duration_s: float) -> int:
    """Whole gait cycles that fit in the recording."""
    return int(math.floor(duration_s / cycle_s + 1e-9))


def strike_layout(cycle_s: float, duration_s: float, rate_hz: float) -> Tuple[int, int]:
    """
    Sample index of the first same-side heel strike and the number of strikes.

    The strike grid is centred in the recording; every strike, including the
    ones just outside it, stays at least a quarter cycle away from both edges.
    """
    n_cycles = cycle_count(cycle_s, duration_s)
    spare = max(0.0, duration_s - n_cycles * cycle_s)
    if spare < cycle_s / 2:
        n_strikes, gap_s = n_cycles, (cycle_s + spare) / 2
    else:
        n_strikes, gap_s = n_cycles + 1, spare / 2
    return int(math.floor(gap_s * rate_hz + 0.5)), n_strikes


def truth_indices(cycle_s: float, duration_s: float, rate_hz: float) -> List[int]:
    """Every same-side heel strike inside the recording."""
    offset, n_strikes = strike_layout(cycle_s, duration_s, rate_hz)
    return [int(math.floor(offset + k * cycle_s * rate_hz + 0.5)) for k in range(n_strikes)]


def gen_earth_gait(params: SubjectParams, duration_s: float, rate_hz: float) -> Tuple[np.ndarray, List[int]]:
    """
    Earth-frame gait acceleration (gravity excluded).

    Args:
        params: subject parameters (seed drives the noise)
        duration_s: length in seconds, at least two cycles
        rate_hz: sampling rate

    Returns:
        (samples (n,3), same-side heel strike indices)
    """
    params.validate()
    if duration_s < 2 * params.cycle_s:
        raise DataError(f"duration {duration_s}s is shorter than two cycles ({params.cycle_s}s)")

    n = int(math.floor(duration_s * rate_hz + 1e-9))
    offset, _ = strike_layout(params.cycle_s, duration_s, rate_hz)
    theta = 2 * np.pi * ((np.arange(n) - offset) / rate_hz) / params.cycle_s

    z = -(_harmonic_sum(theta, params.harmonics_z)
          + params.step_asymmetry * _harmonic_sum(theta - np.pi, params.harmonics_z))

    h = _harmonic_sum(theta, params.harmonics_h)
    heading = np.radians(params.heading_deg)
    samples = np.column_stack([h * np.cos(heading), h * np.sin(heading), z])

    if params.noise_sigma > 0:
        rng = np.random.default_rng(params.seed)
        samples = samples + rng.normal(0.0, params.noise_sigma, size=samples.shape)

    return samples, truth_indices(params.cycle_s, duration_s, rate_hz)


def angles_at(traj: OrientationTrajectory, t_s: np.ndarray) -> np.ndarray:
    """Orientation (alpha, beta, gamma) in degrees at each time, shape (n,3)."""
    base = np.asarray(traj.base, dtype=float)
    if not np.all(np.isfinite(base)):
        raise DataError("trajectory angles must be finite")
    t_s = np.asarray(t_s, dtype=float)
    angles = np.tile(base, (len(t_s), 1))
    if traj.mode == "drifting":
        angles += traj.drift_rate * t_s[:, None] * np.asarray(traj.direction, dtype=float)
    elif traj.mode not in ("fixed", "per_session_random"):
        raise DataError(f"unknown orientation mode '{traj.mode}'")
    return angles


def to_device_frame(earth_samples, traj: OrientationTrajectory, rate_hz: float,
                    subject_id: str = "", session_id: str = "") -> RawSession:
    """
    Re-express Earth samples in the device frame given by the trajectory.

    Each timestamp yields an accel (linear + gravity), a gravity and an
    orientation record, in that order.
    """
    earth = np.asarray(earth_samples, dtype=float).reshape(-1, 3)
    n = len(earth)
    t_ms = np.arange(n) * (1000.0 / rate_hz)
    angles = angles_at(traj, t_ms / 1000.0)
    r = rotation_matrices(angles)

    # row vector times R^T
    linear = np.einsum("nj,nij->ni", earth, r)
    gravity = np.einsum("j,nij->ni", GRAVITY_EARTH, r)
    accel = linear + gravity
    reported = angles.copy()
    reported[:, 0] = np.mod(reported[:, 0], 360.0)

    records = []
    for i in range(n):
        t = float(t_ms[i])
        records.append(SensorRecord(t, ACCEL, tuple(float(x) for x in accel[i])))
        records.append(SensorRecord(t, GRAVITY, tuple(float(x) for x in gravity[i])))
        records.append(SensorRecord(t, ORIENTATION, tuple(float(x) for x in reported[i])))
    return RawSession(subject_id=subject_id, records=records, session_id=session_id)


def strike_profile(amplitude: float, shape: Sequence[float], phases: Sequence[float]) -> List[Tuple[float, float]]:
    """Heel-strike harmonics: amplitude for k=1, amplitude * shape[k-2] above."""
    amplitudes = [amplitude] + [amplitude * r for r in shape]
    return [(float(a), float(p)) for a, p in zip(amplitudes, phases)]


def _draw_params(rng: np.random.Generator, noise_sigma: float) -> SubjectParams:
    amplitude = float(rng.uniform(*STRIKE_AMPLITUDE_RANGE))
    shape = [float(rng.uniform(lo, hi)) for lo, hi in STRIKE_SHAPE_RANGES]
    strike_phases = rng.uniform(-STRIKE_PHASE, STRIKE_PHASE, size=N_HARMONICS)
    harmonics_h = [(float(rng.uniform(lo, hi)), float(rng.uniform(-np.pi, np.pi))) for lo, hi in H_AMPLITUDE_RANGES]

    return SubjectParams(
        cycle_s=float(rng.uniform(*CYCLE_RANGE)),
        harmonics_z=strike_profile(amplitude, shape, strike_phases),
        harmonics_h=harmonics_h,
        step_asymmetry=float(rng.uniform(*ASYMMETRY_RANGE)),
        noise_sigma=noise_sigma,
        seed=int(rng.integers(0, 2 ** 31 - 1)),
        heading_deg=float(rng.uniform(0.0, 360.0)),
    )


def param_vector(params: SubjectParams) -> np.ndarray:
    """Gait parameters scaled to their sampling ranges (each roughly in [0,1])."""
    def scaled(value, lo, hi):
        return (value - lo) / (hi - lo)

    parts = [scaled(params.cycle_s, *CYCLE_RANGE), scaled(params.step_asymmetry, *ASYMMETRY_RANGE)]
    parts.append(scaled(params.harmonics_z[0][0], *STRIKE_AMPLITUDE_RANGE))
    parts += [scaled(a, *r) for (a, _), r in zip(params.harmonics_h, H_AMPLITUDE_RANGES)]
    return np.array(parts)


def param_distance(a: SubjectParams, b: SubjectParams) -> float:
    return float(np.linalg.norm(param_vector(a) - param_vector(b)))


def draw_subjects(n_subjects: int, rng: np.random.Generator, noise_sigma: float,
                  min_distance: float) -> List[SubjectParams]:
    """Rejection sampling: every pair of subjects is at least min_distance apart."""
    chosen: List[SubjectParams] = []
    draws = 0
    while len(chosen) < n_subjects:
        draws += 1
        if draws > MAX_DRAWS:
            raise DataError(
                f"cannot draw {n_subjects} subjects at parameter distance >= {min_distance}"
            )
        candidate = _draw_params(rng, noise_sigma)
        if all(param_distance(candidate, c) >= min_distance for c in chosen):
            chosen.append(candidate)
    return chosen


def _random_angles(rng: np.random.Generator) -> Tuple[float, float, float]:
    return (float(rng.uniform(0.0, 360.0)), float(rng.uniform(-90.0, 90.0)), float(rng.uniform(-90.0, 90.0)))


def _unit_direction(rng: np.random.Generator) -> Tuple[float, float, float]:
    v = rng.normal(size=3)
    v /= np.linalg.norm(v)
    return tuple(float(x) for x in v)


def session_trajectory(config: PipelineConfig, cohort_base: Tuple[float, float, float],
                       rng: np.random.Generator) -> OrientationTrajectory:
    seed = int(rng.integers(0, 2 ** 31 - 1))
    mode = config.orientation_mode
    if mode == "fixed":
        return OrientationTrajectory(mode=mode, base=cohort_base, seed=seed)
    if mode == "drifting":
        return OrientationTrajectory(mode=mode, base=cohort_base, drift_rate=config.drift_rate,
                                     seed=seed, direction=_unit_direction(rng))
    return OrientationTrajectory(mode=mode, base=_random_angles(rng), seed=seed)


def gen_cohort(n_subjects: int, sessions_per_subject: int, config: PipelineConfig,
               identical_subjects: bool = False) -> Cohort:
    """
    Seeded synthetic cohort: subject S01..SNN, sessions <subject>__s1..sK.

    Args:
        n_subjects: number of subjects (>= 2)
        sessions_per_subject: sessions per subject
        config: rate, duration, noise, orientation mode and master seed
        identical_subjects: every subject reuses the first subject's parameters

    Returns:
        Cohort with device-frame sessions, truth indices and Earth samples
    """
    if n_subjects < 2:
        raise DataError(f"a cohort needs at least 2 subjects, got {n_subjects}")
    rng = np.random.default_rng(config.seed)

    if identical_subjects:
        first = draw_subjects(1, rng, config.noise_sigma, 0.0)[0]
        drawn = [dataclasses.replace(first) for _ in range(n_subjects)]
    else:
        drawn = draw_subjects(n_subjects, rng, config.noise_sigma, config.min_param_distance)
    subjects = {f"S{i + 1:02d}": p for i, p in enumerate(drawn)}
    cohort_base = _random_angles(rng)

    sessions: List[SyntheticSession] = []
    for subject_id, params in subjects.items():
        for j in range(sessions_per_subject):
            session_id = f"{subject_id}{SESSION_SEPARATOR}s{j + 1}"
            jitter = 1.0 + float(rng.uniform(-SESSION_CYCLE_JITTER, SESSION_CYCLE_JITTER))
            session_params = dataclasses.replace(
                params,
                cycle_s=params.cycle_s * jitter,
                seed=int(rng.integers(0, 2 ** 31 - 1)),
            )
            trajectory = session_trajectory(config, cohort_base, rng)
            earth, truth = gen_earth_gait(session_params, config.duration_s, config.rate_hz)
            session = to_device_frame(earth, trajectory, config.rate_hz, subject_id, session_id)
            sessions.append(SyntheticSession(session, truth, session_params, trajectory, earth))

    logger.info(f"synthetic cohort: {n_subjects} subjects x {sessions_per_subject} sessions")
    return Cohort(subjects=subjects, sessions=sessions, seed=config.seed, rate_hz=config.rate_hz,
                  duration_s=config.duration_s)


def manifest(cohort: Cohort, config: Optional[PipelineConfig] = None) -> Dict:
    return {
        "seed": cohort.seed,
        "rate_hz": cohort.rate_hz,
        "config_digest": config.digest() if config else None,
        "subjects": {s: dataclasses.asdict(p) for s, p in cohort.subjects.items()},
        "sessions": [
            {
                "session_id": s.session.session_id,
                "subject_id": s.session.subject_id,
                "seed": s.params.seed,
                "cycle_s": s.params.cycle_s,
                "trajectory": dataclasses.asdict(s.trajectory),
                "cycles": cycle_count(s.params.cycle_s, cohort.duration_s),
                "heel_strikes": len(s.truth),
            }
            for s in cohort.sessions
        ],
    }


def write_cohort(cohort: Cohort, out_dir: str, config: Optional[PipelineConfig] = None) -> List[str]:
    """
    Write <session>.csv logs, <session>.truth.csv sidecars and manifest.json.

    Returns:
        written paths, in write order
    """
    written = []
    try:
        os.makedirs(out_dir, exist_ok=True)
        for s in cohort.sessions:
            log_path = os.path.join(out_dir, f"{s.session.session_id}.csv")
            with open(log_path, "w", encoding="utf-8", newline="") as f:
                serialize_log(s.session, f)
            truth_path = os.path.join(out_dir, f"{s.session.session_id}.truth.csv")
            truth = pd.DataFrame({
                "session_id": [s.session.session_id] * len(s.truth),
                "cycle_start_index": np.asarray(s.truth, dtype=int),
            })
            truth.to_csv(truth_path, index=False, lineterminator="\n")
            written += [log_path, truth_path]

        manifest_path = os.path.join(out_dir, "manifest.json")
        with open(manifest_path, "w", encoding="utf-8") as f:
            json.dump(manifest(cohort, config), f, indent=2, sort_keys=True)
            f.write("\n")
        written.append(manifest_path)
    except OSError as e:
        raise DataError(f"cannot write cohort to {e.filename or out_dir}: {e.strerror}") from None
    return written
