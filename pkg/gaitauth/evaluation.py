"""
Verification and identification evaluation

- stratified train/test split of gait patterns
- ROC, EER and FRR at fixed FAR levels from genuine/impostor score sets
- cross-verification: every subject is the genuine user in turn
- pattern-based and session-based (voting) scenarios
- disorientation study: the same logs with and without the Earth transform
"""

import json
import logging
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, TextIO, Tuple

import numpy as np
import pandas as pd
from sklearn import metrics

from gaitauth.config import PipelineConfig
from gaitauth.errors import DataError, ModelError
from gaitauth.features import FeatureVector
from gaitauth.model import GaitModel, identify_reduced, project, train_gait_model, verify_scores

logger = logging.getLogger(__name__)

FAR_LEVELS = (0.01,)


@dataclass
class ScoreSet:
    genuine: List[float] = field(default_factory=list)
    impostor: List[float] = field(default_factory=list)

    def extend(self, other: "ScoreSet") -> "ScoreSet":
        self.genuine += other.genuine
        self.impostor += other.impostor
        return self


@dataclass
class EvalReport:
    roc: List[Tuple[float, float, float]]
    eer: float
    frr_at_far: Dict[float, float]
    identification_accuracy: float = 0.0
    n_genuine: int = 0
    n_impostor: int = 0
    config_digest: str = ""
    eer_threshold: float = 0.0
    operating_point: Dict[str, float] = field(default_factory=dict)


@dataclass
class IdentificationResult:
    pattern_accuracy: float
    session_accuracy: float
    n_patterns: int
    n_sessions: int


@dataclass
class VerificationResult:
    pattern: EvalReport
    session: EvalReport


def split_train_test(vectors: Sequence[FeatureVector], fraction: float, seed: int,
                     by_session: bool = False) -> Tuple[List[FeatureVector], List[FeatureVector]]:
    """
    Per-subject random split.

    Each subject contributes round(fraction * count) units (at least 1, at
    most count - 1) to train and the rest to test; input order is kept
    within both parts. A unit is a pattern, or a whole session when
    by_session is set, so no session has patterns on both sides.
    """
    if not 0 < fraction < 1:
        raise DataError(f"train fraction must be in (0,1), got {fraction}")
    rng = np.random.default_rng(seed)
    by_subject: Dict[str, List[FeatureVector]] = {}
    for v in vectors:
        by_subject.setdefault(v.subject_id, []).append(v)

    unit_name = "session" if by_session else "pattern"
    train, test = [], []
    for subject_id in sorted(by_subject):
        items = by_subject[subject_id]
        if by_session:
            keys = [v.session_id or v.subject_id for v in items]
            units = list(dict.fromkeys(keys))
        else:
            keys = list(range(len(items)))
            units = keys
        if len(units) < 2:
            logger.warning(f"⚠️ subject '{subject_id}' has {len(units)} {unit_name}(s), excluded")
            continue
        n_train = min(max(1, int(round(fraction * len(units)))), len(units) - 1)
        chosen = {units[i] for i in rng.permutation(len(units))[:n_train].tolist()}
        train += [v for k, v in zip(keys, items) if k in chosen]
        test += [v for k, v in zip(keys, items) if k not in chosen]
    return train, test


def _counts(y_true: np.ndarray, s: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Distinct thresholds ascending with genuine/impostor accept counts (score >= threshold)."""
    fpr, tpr, thresholds = metrics.roc_curve(y_true, s, pos_label=1, drop_intermediate=False)
    n_gen = int((y_true == 1).sum())
    n_imp = len(y_true) - n_gen
    # first point is the "accept nobody" sentinel
    thresholds, fpr, tpr = thresholds[1:][::-1], fpr[1:][::-1], tpr[1:][::-1]
    return thresholds, np.rint(tpr * n_gen), np.rint(fpr * n_imp)


def roc_curve(scores: ScoreSet, far_levels: Sequence[float] = FAR_LEVELS) -> EvalReport:
    """
    ROC over every distinct score, EER and FRR at the requested FAR levels.

    FAR(t) = share of impostor scores >= t, FRR(t) = share of genuine scores < t.
    The EER is interpolated linearly between the two thresholds where FAR - FRR
    changes sign. FRR at level L is read at the lowest threshold whose FAR
    does not exceed L.
    """
    if not scores.genuine or not scores.impostor:
        raise DataError("ROC needs non-empty genuine and impostor score lists")
    genuine = np.asarray(scores.genuine, dtype=float)
    impostor = np.asarray(scores.impostor, dtype=float)
    if not (np.all(np.isfinite(genuine)) and np.all(np.isfinite(impostor))):
        raise DataError("scores must be finite")

    y_true = np.concatenate([np.ones(len(genuine), dtype=int), np.zeros(len(impostor), dtype=int)])
    thresholds, gen_accept, imp_accept = _counts(y_true, np.concatenate([genuine, impostor]))
    far = imp_accept / len(impostor)
    frr = (len(genuine) - gen_accept) / len(genuine)
    roc = [(float(t), float(a), float(r)) for t, a, r in zip(thresholds, far, frr)]

    # above the highest score everybody is rejected
    far_ext = np.append(far, 0.0)
    frr_ext = np.append(frr, 1.0)
    thr_ext = np.append(thresholds, thresholds[-1])

    diff = far_ext - frr_ext
    j = int(np.argmax(diff <= 0))
    if diff[j] == 0 or j == 0:
        eer = float((far_ext[j] + frr_ext[j]) / 2)
        eer_threshold = float(thr_ext[j])
    else:
        i = j - 1
        w = diff[i] / (diff[i] - diff[j])
        eer = float(far_ext[i] + w * (far_ext[j] - far_ext[i]))
        eer_threshold = float(thr_ext[i] + w * (thr_ext[j] - thr_ext[i]))

    # read at the lowest qualifying threshold, not the largest: the largest
    # one always sits above every score and reports FRR = 1
    frr_at_far = {}
    for level in far_levels:
        ok = np.flatnonzero(far_ext <= level + 1e-12)
        frr_at_far[float(level)] = float(frr_ext[ok[0]])

    return EvalReport(
        roc=roc,
        eer=eer,
        frr_at_far=frr_at_far,
        n_genuine=len(genuine),
        n_impostor=len(impostor),
        eer_threshold=eer_threshold,
    )


def verify_session(pattern_decisions: Sequence[bool]) -> bool:
    """Majority vote; an exact tie rejects."""
    if len(pattern_decisions) == 0:
        raise DataError("session has no pattern decisions")
    return sum(bool(d) for d in pattern_decisions) > len(pattern_decisions) / 2


def plurality(predictions: Sequence[str]) -> str:
    """Most frequent prediction; ties go to the one seen first."""
    counts = Counter(predictions)
    best = max(counts.values())
    return next(p for p in predictions if counts[p] == best)


def _sessions(test: Sequence[FeatureVector]) -> Dict[str, List[int]]:
    groups: Dict[str, List[int]] = {}
    for i, v in enumerate(test):
        groups.setdefault(v.session_id or v.subject_id, []).append(i)
    return groups


def _prepare(scheme: str, vectors: Sequence[FeatureVector], config: PipelineConfig,
             model: Optional[GaitModel], by_session: bool = False) -> Tuple[GaitModel, List[FeatureVector], np.ndarray]:
    train, test = split_train_test(vectors, config.train_fraction, config.seed, by_session)
    subjects = sorted({v.subject_id for v in test})
    if len(subjects) < 2:
        raise ModelError(f"evaluation needs at least 2 subjects, got {len(subjects)}")
    if model is None:
        model = train_gait_model(train, scheme, config.pca_variance, config.svm_c, config.seed, config.jobs)
    reduced = project(model.pca, np.vstack([v.values for v in test]))
    return model, test, reduced


def evaluate_verification(scheme: str, vectors: Sequence[FeatureVector], config: PipelineConfig,
                          model: Optional[GaitModel] = None, by_session: bool = False) -> VerificationResult:
    """
    Cross-verification: each subject in turn is the claimed identity; its own
    test patterns are genuine attempts, every other subject's are impostors.

    The session scenario votes per session at the pattern EER threshold
    (operating point) and also sweeps the per-session share of accepted
    patterns (session ROC).
    """
    model, test, reduced = _prepare(scheme, vectors, config, model, by_session)
    labels = np.array([v.subject_id for v in test], dtype=object)
    subjects = sorted(set(labels))

    def round_scores(subject_id: str) -> np.ndarray:
        return verify_scores(model, subject_id, reduced)

    with ThreadPoolExecutor(max_workers=config.jobs) as pool:
        per_subject = dict(zip(subjects, pool.map(round_scores, subjects)))

    scores = ScoreSet()
    for subject_id in subjects:
        s = per_subject[subject_id]
        own = labels == subject_id
        scores.extend(ScoreSet(genuine=s[own].tolist(), impostor=s[~own].tolist()))
    pattern = roc_curve(scores)
    pattern.config_digest = config.digest()

    sessions = _sessions(test)
    vote_scores = ScoreSet()
    accepted = {"genuine": 0, "impostor": 0}
    for subject_id in subjects:
        decisions = per_subject[subject_id] >= pattern.eer_threshold
        for session_id, idx in sessions.items():
            kind = "genuine" if test[idx[0]].subject_id == subject_id else "impostor"
            fraction = float(np.mean(decisions[idx]))
            getattr(vote_scores, kind).append(fraction)
            accepted[kind] += verify_session(decisions[idx].tolist())

    session = roc_curve(vote_scores)
    session.config_digest = pattern.config_digest
    session.operating_point = {
        "threshold": pattern.eer_threshold,
        "far": accepted["impostor"] / len(vote_scores.impostor),
        "frr": 1.0 - accepted["genuine"] / len(vote_scores.genuine),
    }
    logger.info(
        f"{scheme}: pattern EER {pattern.eer:.4f}, session EER {session.eer:.4f} "
        f"({pattern.n_genuine} genuine / {pattern.n_impostor} impostor scores)"
    )
    return VerificationResult(pattern=pattern, session=session)


def evaluate_identification(scheme: str, vectors: Sequence[FeatureVector], config: PipelineConfig,
                            model: Optional[GaitModel] = None) -> IdentificationResult:
    """Pattern accuracy, and session accuracy by plurality vote of pattern predictions."""
    model, test, reduced = _prepare(scheme, vectors, config, model)
    predicted = identify_reduced(model, reduced)
    correct = [p == v.subject_id for p, v in zip(predicted, test)]

    sessions = _sessions(test)
    session_correct = [
        plurality([predicted[i] for i in idx]) == test[idx[0]].subject_id
        for idx in sessions.values()
    ]
    result = IdentificationResult(
        pattern_accuracy=float(np.mean(correct)),
        session_accuracy=float(np.mean(session_correct)),
        n_patterns=len(test),
        n_sessions=len(sessions),
    )
    logger.info(
        f"{scheme}: identification {result.pattern_accuracy:.4f} (patterns), "
        f"{result.session_accuracy:.4f} (sessions)"
    )
    return result


def evaluate(scheme: str, vectors: Sequence[FeatureVector],
             config: PipelineConfig) -> Tuple[VerificationResult, IdentificationResult]:
    """Verification and identification on one split with one trained model."""
    train, _ = split_train_test(vectors, config.train_fraction, config.seed)
    model = train_gait_model(train, scheme, config.pca_variance, config.svm_c, config.seed, config.jobs)
    verification = evaluate_verification(scheme, vectors, config, model)
    identification = evaluate_identification(scheme, vectors, config, model)
    verification.pattern.identification_accuracy = identification.pattern_accuracy
    verification.session.identification_accuracy = identification.session_accuracy
    return verification, identification


def sweep_train_fraction(scheme: str, vectors: Sequence[FeatureVector], fractions: Sequence[float],
                         config: PipelineConfig) -> List[Tuple[float, float]]:
    """Pattern EER for each training fraction."""
    curve = []
    for fraction in fractions:
        result = evaluate_verification(scheme, vectors, config.replace(train_fraction=fraction))
        curve.append((float(fraction), result.pattern.eer))
    return curve


def disorientation_ab(sessions, config: PipelineConfig, scheme: Optional[str] = None,
                      variants: Sequence[str] = ("device", "magnitude", "earth")) -> Dict[str, VerificationResult]:
    """
    Same sessions through each channel variant: device axes without the Earth
    transform, magnitude only, and the full transform.

    Every variant is cut at the cycle starts found on the Earth Z channel, so
    the variants differ only in the channels their features come from.
    Training and test sessions are disjoint, which exposes any drift of the
    device frame between sessions. A variant whose sessions do not yield two
    evaluable subjects is left out with a warning.

    Args:
        sessions: RawSession list (e.g. a synthetic cohort's device-frame logs)
    """
    from gaitauth.pipeline import process_sessions

    scheme = scheme or config.scheme
    results = {}
    for variant in variants:
        vectors = process_sessions(sessions, config, variant, segment_on="earth")
        try:
            results[variant] = evaluate_verification(scheme, vectors, config, by_session=True)
        except DataError as e:
            logger.warning(f"⚠️ disorientation [{variant}]: not evaluated, {e}")
            continue
        logger.info(f"disorientation [{variant}]: EER {results[variant].pattern.eer:.4f}")
    if not results:
        raise DataError("no channel variant could be evaluated")
    return results


# ---------------------------------------------------------------------------
# Report output
# ---------------------------------------------------------------------------

def report_dict(report: EvalReport) -> Dict:
    return {
        "eer": report.eer,
        "eer_threshold": report.eer_threshold,
        "frr_at_far": {f"{level:g}": frr for level, frr in sorted(report.frr_at_far.items())},
        "identification_accuracy": report.identification_accuracy,
        "n_genuine": report.n_genuine,
        "n_impostor": report.n_impostor,
        "config_digest": report.config_digest,
        "operating_point": report.operating_point,
        "roc": [list(point) for point in report.roc],
    }


def verification_dict(result: VerificationResult) -> Dict:
    return {"pattern": report_dict(result.pattern), "session": report_dict(result.session)}


def write_report_json(payload: Dict, stream: TextIO) -> None:
    json.dump(payload, stream, indent=2, sort_keys=True)
    stream.write("\n")


def write_roc_csv(report: EvalReport, stream: TextIO) -> None:
    frame = pd.DataFrame(report.roc, columns=["threshold", "far", "frr"], dtype=float)
    frame.to_csv(stream, index=False, lineterminator="\n")
