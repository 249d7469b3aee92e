"""
Gallery template matching

Stores PCA-reduced gait vectors per subject and matches probes against them
with the 1-nearest-neighbour rule:
- verification: score = -(distance to the claimed subject's nearest template)
- identification: subject of the globally nearest template
"""

import logging
from dataclasses import dataclass, field
from typing import Iterable, List, Sequence, Tuple

import numpy as np

from gaitauth.errors import ModelError

logger = logging.getLogger(__name__)


@dataclass
class Gallery:
    entries: List[Tuple[str, np.ndarray]] = field(default_factory=list)

    def add(self, subject_id: str, vector) -> None:
        vector = np.asarray(vector, dtype=float)
        if self.entries and len(vector) != self.dim:
            raise ModelError(f"gallery vectors have length {self.dim}, got {len(vector)}")
        self.entries.append((subject_id, vector))

    def extend(self, items: Iterable[Tuple[str, np.ndarray]]) -> "Gallery":
        for subject_id, vector in items:
            self.add(subject_id, vector)
        return self

    @property
    def dim(self) -> int:
        return len(self.entries[0][1]) if self.entries else 0

    @property
    def subjects(self) -> List[str]:
        return sorted({s for s, _ in self.entries})

    def matrix(self) -> np.ndarray:
        return np.vstack([v for _, v in self.entries])

    def labels(self) -> np.ndarray:
        return np.array([s for s, _ in self.entries], dtype=object)

    def __len__(self) -> int:
        return len(self.entries)


def _distances(gallery: Gallery, probe) -> np.ndarray:
    probe = np.asarray(probe, dtype=float)
    if len(gallery) == 0:
        raise ModelError("empty gallery")
    if len(probe) != gallery.dim:
        raise ModelError(f"probe has length {len(probe)}, gallery vectors {gallery.dim}")
    return np.linalg.norm(gallery.matrix() - probe, axis=1)


def knn_verify(gallery: Gallery, subject_id: str, probe) -> float:
    """Genuineness score of probe for the claimed subject (0 is a perfect match)."""
    distances = _distances(gallery, probe)
    own = gallery.labels() == subject_id
    if not own.any():
        raise ModelError(f"unknown subject '{subject_id}'")
    return -float(distances[own].min())


def knn_identify(gallery: Gallery, probe) -> str:
    """Subject of the nearest template; ties go to the earliest entry."""
    distances = _distances(gallery, probe)
    return gallery.entries[int(np.argmin(distances))][0]


def build_gallery(items: Sequence[Tuple[str, np.ndarray]]) -> Gallery:
    gallery = Gallery().extend(items)
    logger.debug(f"gallery: {len(gallery)} templates, {len(gallery.subjects)} subjects")
    return gallery
