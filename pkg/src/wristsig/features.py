"""Min-over-references DTW features."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .dtw import dtw_batch, dtw_distance
from .errors import DimensionMismatch, EmptyReferenceSet, NotEnoughGenuineSamples
from .rng import keyed_rng
from .signal import CompressedSignature, Dimension, Label


@dataclass(frozen=True)
class ReferenceSet:
    user_id: str
    references: tuple[CompressedSignature, ...]

    def __post_init__(self):
        refs = tuple(self.references)
        if not refs:
            raise EmptyReferenceSet(f"reference set for user {self.user_id!r} is empty")
        widths = {r.k for r in refs}
        if len(widths) != 1:
            raise DimensionMismatch(f"references have mixed coefficient widths {sorted(widths)}")
        object.__setattr__(self, "references", refs)

    def __len__(self) -> int:
        return len(self.references)

    @property
    def k(self) -> int:
        return self.references[0].k

    def stacked(self) -> np.ndarray:
        """References as one (R, 9, k) array."""
        return np.stack([r.coefficients for r in self.references])


@dataclass(frozen=True, eq=False)
class FeatureVector:
    values: np.ndarray
    label: Label = Label.UNKNOWN
    user_id: Optional[str] = None
    dimensions: tuple[Dimension, ...] = tuple(Dimension)

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64, copy=True)
        dims = tuple(Dimension(d) for d in self.dimensions)
        if v.shape != (len(dims),):
            raise DimensionMismatch(f"{v.shape[0] if v.ndim else 0} values for {len(dims)} dimensions")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "dimensions", dims)
        object.__setattr__(self, "label", Label(self.label))

    def __eq__(self, other):
        if not isinstance(other, FeatureVector):
            return NotImplemented
        return (
            self.label is other.label
            and self.user_id == other.user_id
            and self.dimensions == other.dimensions
            and np.array_equal(self.values, other.values)
        )


def dissimilarity(questioned: CompressedSignature, reference: CompressedSignature, d) -> float:
    if questioned.k != reference.k:
        raise DimensionMismatch(f"coefficient widths differ ({questioned.k} vs {reference.k})")
    d = Dimension(d)
    return dtw_distance(questioned.coefficients[d], reference.coefficients[d]).distance


def distance_tensor(questioned: np.ndarray, references: np.ndarray) -> np.ndarray:
    """All per-dimension DTW distances between questioned and reference signatures.

    ``questioned`` is (Q, 9, k), ``references`` is (R, 9, k); the result is
    (Q, R, 9).
    """
    q = np.asarray(questioned, dtype=np.float64)
    r = np.asarray(references, dtype=np.float64)
    if q.ndim != 3 or r.ndim != 3 or q.shape[1:] != r.shape[1:]:
        raise DimensionMismatch(f"cannot compare shapes {q.shape} and {r.shape}")
    n_q, n_r, n_d = q.shape[0], r.shape[0], q.shape[1]
    a = np.broadcast_to(q[:, None], (n_q, n_r) + q.shape[1:]).reshape(-1, q.shape[2])
    b = np.broadcast_to(r[None, :], (n_q, n_r) + r.shape[1:]).reshape(-1, r.shape[2])
    return dtw_batch(a, b).reshape(n_q, n_r, n_d)


def extract_features(questioned: CompressedSignature, refs: ReferenceSet) -> FeatureVector:
    """Per dimension, the smallest DTW distance to any reference."""
    if len(refs) == 0:
        raise EmptyReferenceSet("no references")
    if questioned.k != refs.k:
        raise DimensionMismatch(f"coefficient widths differ ({questioned.k} vs {refs.k})")
    dist = distance_tensor(questioned.coefficients[None], refs.stacked())[0]
    return FeatureVector(dist.min(axis=0), label=questioned.label, user_id=questioned.user_id)


def select_references(
    genuine: Sequence[CompressedSignature],
    n_refs: int,
    seed: int,
    user_id: Optional[str] = None,
) -> tuple[ReferenceSet, list[CompressedSignature]]:
    """Randomly split a user's genuine signatures into references and the remainder.

    The draw is keyed on ``(seed, user_id)``; the remainder keeps input order.
    """
    genuine = list(genuine)
    if user_id is None:
        if not genuine:
            raise NotEnoughGenuineSamples("no genuine signatures given", user_id=None)
        user_id = genuine[0].user_id
    if n_refs < 1:
        raise ValueError("n_refs must be >= 1")
    if n_refs > len(genuine):
        raise NotEnoughGenuineSamples(
            f"user {user_id!r} has {len(genuine)} genuine signatures, {n_refs} references requested",
            user_id=user_id,
        )
    rng = keyed_rng(seed, "references", user_id)
    chosen = rng.choice(len(genuine), size=n_refs, replace=False)
    picked = set(int(i) for i in chosen)
    refs = ReferenceSet(user_id, tuple(genuine[int(i)] for i in chosen))
    remainder = [g for i, g in enumerate(genuine) if i not in picked]
    return refs, remainder


class FeatureSubset(str, enum.Enum):
    """The seven named feature groupings used in the ablation."""

    X = "x"
    Y = "y"
    Z = "z"
    ACCEL = "accel"
    GYRO_ACCEL = "gyro_accel"
    GYRO_VEL = "gyro_vel"
    ALL = "all"

    @property
    def dimensions(self) -> tuple[Dimension, ...]:
        if self is FeatureSubset.ALL:
            return tuple(Dimension)
        if self.name in ("X", "Y", "Z"):
            return tuple(d for d in Dimension if d.axis == self.name)
        sensor = {"ACCEL": "ACC", "GYRO_ACCEL": "GACC", "GYRO_VEL": "GVEL"}[self.name]
        return tuple(d for d in Dimension if d.sensor == sensor)


def filter_features(fv: FeatureVector, subset) -> FeatureVector:
    """Project a feature vector onto a named subset, keeping canonical order."""
    subset = FeatureSubset(subset)
    keep = subset.dimensions
    pos = {d: i for i, d in enumerate(fv.dimensions)}
    missing = [d for d in keep if d not in pos]
    if missing:
        raise DimensionMismatch(f"feature vector lacks {', '.join(d.name for d in missing)}")
    return FeatureVector(
        fv.values[[pos[d] for d in keep]], label=fv.label, user_id=fv.user_id, dimensions=keep
    )
