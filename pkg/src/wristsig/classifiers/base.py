"""Training sets, the serializable model container, and scoring."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from ..corpus import SignatureCorpus
from ..errors import FeatureWidthMismatch, NotEnoughGenuineSamples, SingleClassTrainingSet
from ..features import FeatureVector, distance_tensor, select_references
from ..signal import DEFAULT_K, Dimension, Label

DEFAULT_THRESHOLD = 0.5


class ModelKind(str, enum.Enum):
    LOGISTIC = "logistic"
    GAUSSIAN_NB = "gaussian_nb"
    RANDOM_FOREST = "random_forest"


@dataclass(frozen=True, eq=False)
class TrainingSet:
    """Labeled feature matrix; ``y`` is 1 for GENUINE and 0 for FORGED."""

    X: np.ndarray
    y: np.ndarray
    feature_mask: tuple[Dimension, ...] = tuple(Dimension)
    user_ids: Optional[tuple] = None

    def __post_init__(self):
        X = np.asarray(self.X, dtype=np.float64)
        y = np.asarray(self.y, dtype=np.int64)
        mask = tuple(Dimension(d) for d in self.feature_mask)
        if X.ndim != 2 or X.shape[1] != len(mask):
            raise FeatureWidthMismatch(f"feature matrix shape {X.shape} does not match mask width {len(mask)}")
        if y.shape != (X.shape[0],) or not np.isin(y, (0, 1)).all():
            raise ValueError("labels must be a 0/1 vector, one per instance")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "feature_mask", mask)

    @classmethod
    def from_instances(cls, instances: Sequence[FeatureVector], feature_mask=None) -> "TrainingSet":
        instances = list(instances)
        if feature_mask is None:
            feature_mask = instances[0].dimensions if instances else tuple(Dimension)
        mask = tuple(Dimension(d) for d in feature_mask)
        rows, labels, users = [], [], []
        for fv in instances:
            if fv.label is Label.UNKNOWN:
                raise ValueError("training instances must be labeled")
            pos = {d: i for i, d in enumerate(fv.dimensions)}
            try:
                rows.append(fv.values[[pos[d] for d in mask]])
            except KeyError as exc:
                raise FeatureWidthMismatch(f"instance lacks dimension {exc}") from None
            labels.append(1 if fv.label is Label.GENUINE else 0)
            users.append(fv.user_id)
        X = np.array(rows, dtype=np.float64).reshape(len(rows), len(mask))
        return cls(X, np.array(labels, dtype=np.int64), mask, tuple(users))

    @property
    def instances(self) -> list[FeatureVector]:
        users = self.user_ids or (None,) * len(self.y)
        return [
            FeatureVector(x, Label.GENUINE if t else Label.FORGED, uid, self.feature_mask)
            for x, t, uid in zip(self.X, self.y, users)
        ]

    @property
    def counts(self) -> dict[str, int]:
        n_gen = int(self.y.sum())
        return {"genuine": n_gen, "forged": int(self.y.size - n_gen)}

    def require_both_classes(self) -> None:
        c = self.counts
        if c["genuine"] == 0 or c["forged"] == 0:
            raise SingleClassTrainingSet(f"training set needs both classes, got {c}")


@dataclass(frozen=True)
class Score:
    probability_genuine: float

    def decision(self, threshold: float = DEFAULT_THRESHOLD) -> Label:
        return Label.GENUINE if self.probability_genuine >= threshold else Label.FORGED


@dataclass(eq=False)
class VerificationModel:
    """A trained global classifier.

    ``params`` maps names to numpy arrays; their meaning depends on ``kind``.
    Everything needed for prediction lives in ``params`` so that the binary
    container reproduces scores bit for bit.
    """

    kind: ModelKind
    params: dict
    feature_mask: tuple[Dimension, ...] = tuple(Dimension)
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.kind = ModelKind(self.kind)
        self.feature_mask = tuple(Dimension(d) for d in self.feature_mask)

    @property
    def width(self) -> int:
        return len(self.feature_mask)

    def predict_proba(self, X) -> np.ndarray:
        """Probability of GENUINE for each row of an (n, width) matrix."""
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X[None, :]
        if X.shape[1] != self.width:
            raise FeatureWidthMismatch(f"model expects {self.width} features, got {X.shape[1]}")
        from . import forest, logistic, naive_bayes

        impl = {
            ModelKind.LOGISTIC: logistic.predict,
            ModelKind.GAUSSIAN_NB: naive_bayes.predict,
            ModelKind.RANDOM_FOREST: forest.predict,
        }[self.kind]
        return np.clip(impl(self.params, X), 0.0, 1.0)


def _project(model: VerificationModel, fv: FeatureVector) -> np.ndarray:
    if fv.dimensions == model.feature_mask:
        return fv.values
    pos = {d: i for i, d in enumerate(fv.dimensions)}
    if not all(d in pos for d in model.feature_mask):
        raise FeatureWidthMismatch(
            f"model uses {[d.name for d in model.feature_mask]}, "
            f"feature vector has {[d.name for d in fv.dimensions]}"
        )
    return fv.values[[pos[d] for d in model.feature_mask]]


def predict_score(model: VerificationModel, fv: FeatureVector) -> Score:
    """Genuineness score of one feature vector.

    A full nine-dimension vector is projected onto the model's mask; any other
    width must match the mask exactly.
    """
    p = float(model.predict_proba(_project(model, fv))[0])
    return Score(p)


def build_training_set(
    corpus: SignatureCorpus,
    seed: int,
    n_refs: int = 5,
    k: int = DEFAULT_K,
    feature_mask=tuple(Dimension),
) -> TrainingSet:
    """Labeled instances for every user: remaining genuine vs skilled forgeries.

    Each user's references are drawn with :func:`select_references`; the
    references themselves never become instances.
    """
    corpus = corpus.compressed(k)
    mask_idx = [Dimension(d).value for d in feature_mask]
    blocks, labels, users = [], [], []
    for user in corpus:
        if len(user.genuine) < n_refs:
            raise NotEnoughGenuineSamples(
                f"user {user.user_id!r} has {len(user.genuine)} genuine signatures, needs {n_refs}",
                user_id=user.user_id,
            )
        refs, remainder = select_references(user.genuine, n_refs, seed, user.user_id)
        questioned = remainder + list(user.skilled_forgeries)
        if not questioned:
            continue
        q = np.stack([s.coefficients for s in questioned])
        feats = distance_tensor(q, refs.stacked()).min(axis=1)
        blocks.append(feats[:, mask_idx])
        labels.extend([1] * len(remainder) + [0] * len(user.skilled_forgeries))
        users.extend([user.user_id] * len(questioned))
    X = np.concatenate(blocks) if blocks else np.zeros((0, len(mask_idx)))
    return TrainingSet(X, np.array(labels, dtype=np.int64), tuple(feature_mask), tuple(users))
