"""
Sensor log ingestion

Parses `t_ms,sensor,x,y,z` logs into a RawSession, resamples streams to a
uniform rate by linear interpolation and aligns accelerometer, gravity and
orientation samples into synchronized triplets on the accelerometer's time
axis.
"""

import logging
import math
import os
from dataclasses import dataclass
from typing import Dict, Iterator, List, Sequence, TextIO, Tuple, Union

import numpy as np
import pandas as pd

from gaitauth.errors import DataError, ParseError, SignalError

logger = logging.getLogger(__name__)

ACCEL = "accel"
GRAVITY = "gravity"
ORIENTATION = "orientation"
KINDS = (ACCEL, GRAVITY, ORIENTATION)

# CSV sensor tag <-> record kind
SENSOR_TAGS = {"acc": ACCEL, "grav": GRAVITY, "orient": ORIENTATION}
KIND_TAGS = {kind: tag for tag, kind in SENSOR_TAGS.items()}

LOG_HEADER = ["t_ms", "sensor", "x", "y", "z"]
NUMERIC_FIELDS = ["t_ms", "x", "y", "z"]
OVERFLOW = "_overflow"
NAN_SPELLINGS = ("nan", "+nan", "-nan")
SESSION_SEPARATOR = "__"

Series = Tuple[np.ndarray, np.ndarray]


@dataclass(frozen=True)
class SensorRecord:
    t: float
    kind: str
    v: Tuple[float, float, float]


@dataclass
class RawSession:
    subject_id: str
    records: List[SensorRecord]
    session_id: str = ""

    def streams(self) -> Dict[str, Series]:
        """Per kind: (t array (n,), v array (n,3)) in record order."""
        out = {}
        for kind in KINDS:
            rows = [r for r in self.records if r.kind == kind]
            t = np.array([r.t for r in rows], dtype=float)
            v = np.array([r.v for r in rows], dtype=float).reshape(-1, 3)
            out[kind] = (t, v)
        return out


@dataclass(frozen=True)
class AlignedFrame:
    t: float
    a: np.ndarray
    g: np.ndarray
    o: np.ndarray


@dataclass
class AlignedFrames:
    """Batch of aligned frames; behaves as a sequence of AlignedFrame."""

    t: np.ndarray
    a: np.ndarray
    g: np.ndarray
    o: np.ndarray
    rate_hz: float = 27.0

    def __len__(self) -> int:
        return len(self.t)

    def __getitem__(self, i: int) -> AlignedFrame:
        return AlignedFrame(t=float(self.t[i]), a=self.a[i], g=self.g[i], o=self.o[i])

    def __iter__(self) -> Iterator[AlignedFrame]:
        for i in range(len(self)):
            yield self[i]

    @classmethod
    def from_frames(cls, frames: Sequence[AlignedFrame], rate_hz: float = 27.0) -> "AlignedFrames":
        return cls(
            t=np.array([f.t for f in frames], dtype=float),
            a=np.array([f.a for f in frames], dtype=float).reshape(-1, 3),
            g=np.array([f.g for f in frames], dtype=float).reshape(-1, 3),
            o=np.array([f.o for f in frames], dtype=float).reshape(-1, 3),
            rate_hz=rate_hz,
        )


def _read_rows(stream: TextIO) -> pd.DataFrame:
    """
    Data rows as stripped strings, indexed by their line in the file.

    Cells missing from short rows read as empty; the overflow column catches
    rows with a field too many.
    """
    header = stream.readline()
    if not header.strip():
        raise ParseError("empty log file")
    names = [h.strip() for h in header.rstrip("\r\n").split(",")]
    if names != LOG_HEADER:
        raise ParseError(f"bad header {names}, expected {','.join(LOG_HEADER)}", 1)
    try:
        frame = pd.read_csv(stream, header=None, names=LOG_HEADER + [OVERFLOW], dtype=str,
                            keep_default_na=False, skip_blank_lines=False)
    except pd.errors.EmptyDataError:
        raise ParseError("empty log file") from None
    except pd.errors.ParserError as e:
        raise ParseError(f"malformed row: {str(e).strip()}") from None
    frame.index = frame.index + 2
    return frame.fillna("").apply(lambda col: col.str.strip())


def _check_rows(frame: pd.DataFrame) -> None:
    """Raise a ParseError for the earliest row that breaks the record format."""
    text = frame[NUMERIC_FIELDS]
    numbers = text.apply(pd.to_numeric, errors="coerce").astype(float)
    spelled_nan = text.apply(lambda col: col.str.lower().isin(NAN_SPELLINGS))

    # per row, the first failing check names the problem
    checks = [
        (frame[OVERFLOW] != "", lambda i: f"more than {len(LOG_HEADER)} fields"),
        ((frame[LOG_HEADER] == "").any(axis=1), lambda i: f"expected {len(LOG_HEADER)} non-empty fields"),
        (~frame["sensor"].isin(list(SENSOR_TAGS)),
         lambda i: f"unknown sensor '{frame.at[i, 'sensor']}' (expected acc, grav or orient)"),
        ((numbers.isna() & ~spelled_nan).any(axis=1), lambda i: "non-numeric field"),
        (~np.isfinite(numbers).all(axis=1), lambda i: "non-finite value"),
        (numbers["t_ms"] < 0, lambda i: f"negative timestamp {numbers.at[i, 't_ms']}"),
    ]
    bad = pd.concat([mask for mask, _ in checks], axis=1).any(axis=1)
    if bad.any():
        line = int(bad.idxmax())
        raise ParseError(next(describe(line) for mask, describe in checks if mask[line]), line)


def parse_log(stream: TextIO, subject_id: str = "", session_id: str = "") -> RawSession:
    """
    Parse a sensor log.

    Args:
        stream: text stream with header `t_ms,sensor,x,y,z`
        subject_id: opaque subject identifier
        session_id: opaque session identifier

    Returns:
        RawSession with records stably sorted by t within each kind
    """
    frame = _read_rows(stream)
    frame = frame[(frame != "").any(axis=1)]
    if frame.empty:
        raise ParseError("empty log file")
    _check_rows(frame)

    # object -> float casts each cell with float(), so values round-trip exactly
    values = frame[NUMERIC_FIELDS].astype(float).to_numpy()
    parsed = [
        SensorRecord(t=float(row[0]), kind=SENSOR_TAGS[tag], v=(float(row[1]), float(row[2]), float(row[3])))
        for row, tag in zip(values, frame["sensor"])
    ]
    by_kind = {kind: [r for r in parsed if r.kind == kind] for kind in KINDS}

    if not parsed:
        raise ParseError("empty log file")

    missing = [kind for kind in KINDS if not by_kind[kind]]
    if missing:
        raise ParseError(f"missing {'/'.join(missing)} streams")
    short = [kind for kind in KINDS if len(by_kind[kind]) < 2]
    if short:
        raise ParseError(f"fewer than 2 records for {'/'.join(short)}")

    # stable: streams stay interleaved, equal timestamps keep file order
    records = sorted(parsed, key=lambda r: r.t)
    return RawSession(subject_id=subject_id, records=records, session_id=session_id)


def serialize_log(session: RawSession, stream: TextIO) -> None:
    """Write a session in the log format; reals keep 17 significant digits."""
    frame = pd.DataFrame(
        [(r.t, KIND_TAGS[r.kind]) + tuple(r.v) for r in session.records],
        columns=LOG_HEADER,
    )
    frame.to_csv(stream, index=False, float_format="%.17g", lineterminator="\n")


def split_stem(path: str) -> Tuple[str, str]:
    """`S03__s2.csv` -> ("S03", "S03__s2"); no separator -> (stem, stem)."""
    stem = os.path.splitext(os.path.basename(path))[0]
    if SESSION_SEPARATOR in stem:
        return stem.split(SESSION_SEPARATOR, 1)[0], stem
    return stem, stem


def load_session(path: str) -> RawSession:
    """Parse the log at path; ids come from the file name, errors name the path."""
    subject_id, session_id = split_stem(path)
    try:
        with open(path, "r", encoding="utf-8", newline="") as f:
            return parse_log(f, subject_id=subject_id, session_id=session_id)
    except ParseError as e:
        raise ParseError(e.reason, e.line, source=path) from None
    except UnicodeDecodeError as e:
        raise ParseError(f"not UTF-8 text (byte {e.start})", source=path) from None
    except OSError as e:
        raise DataError(f"cannot read {path}: {e.strerror}") from None


def _dedupe(t: np.ndarray, v: np.ndarray) -> Series:
    """Drop repeated timestamps, keeping the last record of each."""
    keep = np.ones(len(t), dtype=bool)
    keep[:-1] = t[1:] != t[:-1]
    dropped = int((~keep).sum())
    if dropped:
        logger.warning(f"⚠️ {dropped} duplicate timestamp(s), keeping the last record")
    return t[keep], v[keep]


def uniform_grid(t_first: float, t_last: float, rate_hz: float) -> np.ndarray:
    step = 1000.0 / rate_hz
    count = int(math.floor((t_last - t_first) / step + 1e-9)) + 1
    return t_first + np.arange(count) * step


def interpolate_at(t: np.ndarray, v: np.ndarray, query: np.ndarray) -> np.ndarray:
    """Component-wise linear interpolation of v(t) at query times."""
    v = np.asarray(v, dtype=float).reshape(len(t), -1)
    return np.column_stack([np.interp(query, t, v[:, j]) for j in range(v.shape[1])])


def resample(series: Union[Series, Sequence[Tuple[float, Sequence[float]]]], rate_hz: float) -> Series:
    """
    Resample a time series to a uniform grid.

    Args:
        series: (t, v) arrays, or a sequence of (t, vector) pairs, sorted by t
        rate_hz: target rate; the grid step is 1000/rate_hz ms

    Returns:
        (t_grid, v_grid) covering [t_first, t_last]
    """
    if rate_hz <= 0:
        raise SignalError(f"rate_hz must be positive, got {rate_hz}")
    if isinstance(series, tuple) and len(series) == 2 and isinstance(series[0], np.ndarray):
        t, v = series
    else:
        t = np.array([p[0] for p in series], dtype=float)
        v = np.array([np.atleast_1d(p[1]) for p in series], dtype=float)
    t = np.asarray(t, dtype=float)
    v = np.asarray(v, dtype=float).reshape(len(t), -1)
    if len(t) < 2:
        raise SignalError("resample needs at least 2 samples")

    order = np.argsort(t, kind="stable")
    t, v = _dedupe(t[order], v[order])
    if len(t) < 2:
        raise SignalError("resample needs at least 2 distinct timestamps")

    grid = uniform_grid(t[0], t[-1], rate_hz)
    return grid, interpolate_at(t, v, grid)


def align(session: RawSession, rate_hz: float = 27.0) -> AlignedFrames:
    """
    Synchronize accel/gravity/orientation on the resampled accel time axis.

    Frames outside the overlap of all three streams are dropped. Orientation
    angles are unwrapped (period 360) before interpolation.
    """
    streams = session.streams()
    for kind in KINDS:
        if len(streams[kind][0]) < 2:
            raise SignalError(f"{kind} stream needs at least 2 records")

    t_a, a = resample(streams[ACCEL], rate_hz)

    t_g, g = _dedupe(*streams[GRAVITY])
    t_o, o = _dedupe(*streams[ORIENTATION])
    o = np.unwrap(o, period=360.0, axis=0)

    lo = max(t_a[0], t_g[0], t_o[0])
    hi = min(t_a[-1], t_g[-1], t_o[-1])
    inside = (t_a >= lo) & (t_a <= hi)
    if lo > hi or not inside.any():
        raise SignalError("streams do not overlap in time")

    t = t_a[inside]
    return AlignedFrames(
        t=t,
        a=a[inside],
        g=interpolate_at(t_g, g, t),
        o=interpolate_at(t_o, o, t),
        rate_hz=rate_hz,
    )
