"""
Recognition models

- PCA on 289-dim gait feature vectors (population covariance, eigenpairs
  sorted descending, smallest dimension capturing the requested variance)
- per-user linear SVM on the reduced vectors (hinge loss, L2 regularisation)
- the GAITMODEL text file holding a trained PCA + gallery or SVM set
"""

import json
import logging
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, TextIO

import numpy as np
from sklearn.exceptions import ConvergenceWarning
from sklearn.svm import SVC

from gaitauth.errors import ModelError
from gaitauth.matcher import Gallery, build_gallery, knn_identify, knn_verify

logger = logging.getLogger(__name__)

MODEL_MAGIC = "GAITMODEL 1"
SVM_TOL = 1e-6
SVM_MAX_ITER = 1_000_000


@dataclass
class PcaModel:
    mean: np.ndarray
    basis: np.ndarray
    eigenvalues: np.ndarray
    variance_fraction: float
    total_variance: float = 0.0

    @property
    def k(self) -> int:
        return self.basis.shape[1]

    @property
    def dim(self) -> int:
        return self.basis.shape[0]


@dataclass
class SvmModel:
    subject_id: str
    weights: np.ndarray
    bias: float
    c_param: float = 1.0
    seed: int = 0


@dataclass
class GaitModel:
    scheme: str
    pca: PcaModel
    gallery: Optional[Gallery] = None
    svms: Dict[str, SvmModel] = field(default_factory=dict)

    @property
    def subjects(self) -> List[str]:
        if self.scheme == "knn":
            return self.gallery.subjects if self.gallery else []
        return sorted(self.svms)


def fit_pca(features, variance_fraction: float = 0.995) -> PcaModel:
    """
    Fit PCA on a matrix of feature vectors (one per row).

    Args:
        features: array (M, d), M >= 2
        variance_fraction: fraction of total variance to keep, in (0, 1]

    Returns:
        PcaModel with the smallest k reaching the fraction
    """
    f = np.asarray(features, dtype=float)
    if f.ndim != 2 or len(f) < 2:
        raise ModelError("PCA needs at least 2 feature vectors")
    if not 0 < variance_fraction <= 1:
        raise ModelError(f"variance_fraction must be in (0,1], got {variance_fraction}")

    mean = f.mean(axis=0)
    centered = f - mean
    cov = centered.T @ centered / len(f)
    total = float(np.trace(cov))
    if total <= 0.0:
        raise ModelError("zero variance")

    eigenvalues, eigenvectors = np.linalg.eigh(cov)
    order = np.argsort(eigenvalues)[::-1]
    eigenvalues = np.clip(eigenvalues[order], 0.0, None)
    eigenvectors = eigenvectors[:, order]

    captured = np.cumsum(eigenvalues) / eigenvalues.sum()
    k = int(np.argmax(captured >= variance_fraction - 1e-12)) + 1

    basis = eigenvectors[:, :k].copy()
    # largest-magnitude component of each eigenvector is positive
    pivots = np.argmax(np.abs(basis), axis=0)
    signs = np.sign(basis[pivots, np.arange(k)])
    basis *= np.where(signs == 0, 1.0, signs)

    logger.info(f"PCA: {f.shape[1]} -> {k} dims ({captured[k - 1]:.4f} of variance)")
    return PcaModel(mean=mean, basis=basis, eigenvalues=eigenvalues[:k],
                    variance_fraction=variance_fraction, total_variance=total)


def project(model: PcaModel, v) -> np.ndarray:
    """(v - mean) @ U; accepts one vector or a matrix of row vectors."""
    v = np.asarray(v, dtype=float)
    if v.shape[-1] != model.dim:
        raise ModelError(f"expected vectors of length {model.dim}, got {v.shape[-1]}")
    return (v - model.mean) @ model.basis


def reconstruct(model: PcaModel, y) -> np.ndarray:
    return model.mean + np.asarray(y, dtype=float) @ model.basis.T


def _canonical_order(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    keys = np.column_stack([y, x])
    return np.lexsort(keys.T[::-1])


def train_svm(positives, negatives, c_param: float = 1.0, seed: int = 0,
              subject_id: str = "") -> SvmModel:
    """
    Linear SVM separating one user's vectors from impostor vectors.

    Training rows are put in a canonical order first, so the result does not
    depend on how the examples were listed.
    """
    pos = np.atleast_2d(np.asarray(positives, dtype=float))
    neg = np.atleast_2d(np.asarray(negatives, dtype=float))
    if pos.size == 0 or neg.size == 0:
        raise ModelError("SVM needs at least one positive and one negative example")
    if pos.shape[1] != neg.shape[1]:
        raise ModelError("positive and negative vectors differ in length")
    if c_param <= 0:
        raise ModelError(f"C must be positive, got {c_param}")
    if {tuple(r) for r in pos} == {tuple(r) for r in neg}:
        raise ModelError("positive and negative sets are identical")

    x = np.vstack([pos, neg])
    y = np.concatenate([np.ones(len(pos)), -np.ones(len(neg))])
    order = _canonical_order(x, y)

    # libsvm leaves the bias out of the regulariser
    clf = SVC(C=c_param, kernel="linear", tol=SVM_TOL, max_iter=SVM_MAX_ITER)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", ConvergenceWarning)
        clf.fit(x[order], y[order])
    if any(issubclass(w.category, ConvergenceWarning) for w in caught):
        logger.warning(f"⚠️ SVM for '{subject_id}' did not fully converge")

    model = SvmModel(subject_id=subject_id, weights=clf.coef_[0].copy(),
                     bias=float(clf.intercept_[0]), c_param=c_param, seed=seed)
    logger.debug(f"SVM '{subject_id}': objective {hinge_objective(model, x, y):.6f}")
    return model


def svm_score(model: SvmModel, probe) -> float:
    probe = np.asarray(probe, dtype=float)
    if probe.shape[-1] != len(model.weights):
        raise ModelError(f"probe has length {probe.shape[-1]}, model expects {len(model.weights)}")
    return float(probe @ model.weights + model.bias)


def hinge_objective(model: SvmModel, x, y) -> float:
    """1/2 |w|^2 + C * sum(max(0, 1 - y (w.x + b))); the bias is not regularised."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    margins = np.asarray(y, dtype=float) * (x @ model.weights + model.bias)
    regulariser = 0.5 * (model.weights @ model.weights)
    return float(regulariser + model.c_param * np.maximum(0.0, 1.0 - margins).sum())


def svm_identify(models: Dict[str, SvmModel], probe) -> str:
    """Subject whose model gives the largest margin; ties go to the first in sorted order."""
    if not models:
        raise ModelError("no user models")
    subjects = sorted(models)
    scores = [svm_score(models[s], probe) for s in subjects]
    return subjects[int(np.argmax(scores))]


def sample_impostors(reduced: Dict[str, np.ndarray], subject_id: str, k: int,
                     rng: np.random.Generator) -> np.ndarray:
    """k vectors (fewer if unavailable) from every other subject."""
    picks = []
    for other in sorted(reduced):
        if other == subject_id:
            continue
        pool = reduced[other]
        take = min(k, len(pool))
        picks.append(pool[np.sort(rng.choice(len(pool), size=take, replace=False))])
    if not picks:
        raise ModelError(f"no impostor subjects available for '{subject_id}'")
    return np.vstack(picks)


def user_seed(seed: int, subject_id: str) -> int:
    """Per-user training seed derived from the master seed and the subject id."""
    rng = np.random.default_rng([seed] + [ord(ch) for ch in subject_id])
    return int(rng.integers(0, 2 ** 31 - 1))


def train_user_svm(reduced: Dict[str, np.ndarray], subject_id: str,
                   c_param: float = 1.0, seed: int = 0) -> SvmModel:
    """One-vs-impostors model: the user's k vectors against k from each other user."""
    positives = reduced[subject_id]
    s = user_seed(seed, subject_id)
    negatives = sample_impostors(reduced, subject_id, len(positives), np.random.default_rng(s))
    return train_svm(positives, negatives, c_param=c_param, seed=s, subject_id=subject_id)


def group_by_subject(subject_ids: Sequence[str], rows: np.ndarray) -> Dict[str, np.ndarray]:
    labels = np.asarray(subject_ids, dtype=object)
    return {s: rows[labels == s] for s in sorted(set(subject_ids))}


def train_gait_model(vectors, scheme: str = "svm", variance_fraction: float = 0.995,
                     c_param: float = 1.0, seed: int = 0, jobs: int = 1) -> GaitModel:
    """
    Fit PCA jointly on the given feature vectors, then a gallery (knn) or
    per-user SVMs (svm) on the reduced vectors.
    """
    if not vectors:
        raise ModelError("no feature vectors to train on")
    subject_ids = [v.subject_id for v in vectors]
    if len(set(subject_ids)) < 2:
        raise ModelError("training needs at least 2 subjects")

    pca = fit_pca(np.vstack([v.values for v in vectors]), variance_fraction)
    reduced = project(pca, np.vstack([v.values for v in vectors]))

    if scheme == "knn":
        gallery = build_gallery(list(zip(subject_ids, reduced)))
        return GaitModel(scheme=scheme, pca=pca, gallery=gallery)
    if scheme != "svm":
        raise ModelError(f"unknown scheme '{scheme}'")

    by_subject = group_by_subject(subject_ids, reduced)
    subjects = list(by_subject)
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        trained = list(pool.map(lambda s: train_user_svm(by_subject, s, c_param, seed), subjects))
    svms = dict(zip(subjects, trained))
    return GaitModel(scheme=scheme, pca=pca, svms=svms)


def verify_scores(model: GaitModel, subject_id: str, reduced) -> np.ndarray:
    """Genuineness scores of PCA-reduced probes (rows) for a claimed subject."""
    reduced = np.atleast_2d(np.asarray(reduced, dtype=float))
    if model.scheme == "knn":
        return np.array([knn_verify(model.gallery, subject_id, p) for p in reduced])
    if subject_id not in model.svms:
        raise ModelError(f"unknown subject '{subject_id}'")
    svm = model.svms[subject_id]
    return reduced @ svm.weights + svm.bias


def identify_reduced(model: GaitModel, reduced) -> List[str]:
    reduced = np.atleast_2d(np.asarray(reduced, dtype=float))
    if model.scheme == "knn":
        return [knn_identify(model.gallery, p) for p in reduced]
    return [svm_identify(model.svms, p) for p in reduced]


def identify(model: GaitModel, feature_values) -> str:
    """Predicted subject for one raw 289-dim feature vector."""
    return identify_reduced(model, project(model.pca, feature_values))[0]


# ---------------------------------------------------------------------------
# Model file
# ---------------------------------------------------------------------------

def _fmt(values) -> str:
    return " ".join(f"{float(x):.17g}" for x in np.atleast_1d(values))


def save_model(model: GaitModel, stream: TextIO) -> None:
    pca = model.pca
    out = [MODEL_MAGIC, f"SCHEME {model.scheme}",
           f"PCA {pca.dim} {pca.k}",
           f"VARIANCE_FRACTION {pca.variance_fraction:.17g}",
           f"TOTAL_VARIANCE {pca.total_variance:.17g}",
           f"MEAN {_fmt(pca.mean)}",
           f"EIGENVALUES {_fmt(pca.eigenvalues)}",
           "BASIS"]
    out += [_fmt(row) for row in pca.basis]

    for subject_id in sorted(model.svms):
        svm = model.svms[subject_id]
        out += [f"SVM {json.dumps(subject_id)}",
                f"C {svm.c_param:.17g}",
                f"SEED {svm.seed}",
                f"WEIGHTS {_fmt(svm.weights)}",
                f"BIAS {svm.bias:.17g}"]

    if model.gallery is not None:
        for subject_id in model.gallery.subjects:
            rows = [v for s, v in model.gallery.entries if s == subject_id]
            out.append(f"GALLERY {json.dumps(subject_id)} {len(rows)}")
            out += [_fmt(v) for v in rows]

    out.append("END")
    stream.write("\n".join(out) + "\n")


class _Lines:
    def __init__(self, stream: TextIO):
        self.lines = [line.rstrip("\n") for line in stream]
        self.pos = 0

    def next(self) -> str:
        if self.pos >= len(self.lines):
            raise ModelError("model file truncated")
        line = self.lines[self.pos]
        self.pos += 1
        return line

    def keyed(self, key: str) -> str:
        line = self.next()
        head, _, rest = line.partition(" ")
        if head != key:
            raise ModelError(f"model file line {self.pos}: expected {key}, got '{head}'")
        return rest

    def floats(self, text: str) -> np.ndarray:
        try:
            return np.array([float(x) for x in text.split()], dtype=float)
        except ValueError:
            raise ModelError(f"model file line {self.pos}: bad number") from None


def load_model(stream: TextIO) -> GaitModel:
    lines = _Lines(stream)
    if lines.next() != MODEL_MAGIC:
        raise ModelError("not a GAITMODEL 1 file")
    scheme = lines.keyed("SCHEME").strip()
    try:
        dim, k = (int(x) for x in lines.keyed("PCA").split())
    except ValueError:
        raise ModelError("bad PCA header") from None
    variance_fraction = float(lines.keyed("VARIANCE_FRACTION"))
    total_variance = float(lines.keyed("TOTAL_VARIANCE"))
    mean = lines.floats(lines.keyed("MEAN"))
    eigenvalues = lines.floats(lines.keyed("EIGENVALUES"))
    lines.keyed("BASIS")
    basis = np.vstack([lines.floats(lines.next()) for _ in range(dim)])
    if mean.shape != (dim,) or eigenvalues.shape != (k,) or basis.shape != (dim, k):
        raise ModelError("PCA section dimensions are inconsistent")
    pca = PcaModel(mean=mean, basis=basis, eigenvalues=eigenvalues,
                   variance_fraction=variance_fraction, total_variance=total_variance)

    svms: Dict[str, SvmModel] = {}
    gallery: Optional[Gallery] = None
    while True:
        line = lines.next()
        head, _, rest = line.partition(" ")
        if head == "END":
            break
        if head == "SVM":
            subject_id = json.loads(rest)
            c_param = float(lines.keyed("C"))
            seed = int(lines.keyed("SEED"))
            weights = lines.floats(lines.keyed("WEIGHTS"))
            bias = float(lines.keyed("BIAS"))
            if weights.shape != (k,):
                raise ModelError(f"SVM '{subject_id}' has {len(weights)} weights, expected {k}")
            svms[subject_id] = SvmModel(subject_id, weights, bias, c_param, seed)
        elif head == "GALLERY":
            name, _, count = rest.rpartition(" ")
            subject_id = json.loads(name)
            gallery = gallery or Gallery()
            for _ in range(int(count)):
                gallery.add(subject_id, lines.floats(lines.next()))
        else:
            raise ModelError(f"model file line {lines.pos}: unknown section '{head}'")

    return GaitModel(scheme=scheme, pca=pca, gallery=gallery, svms=svms)
