"""Leave-one-user-out evaluation protocol with seeded repetitions."""

from __future__ import annotations

import concurrent.futures as cf
import enum
import hashlib
import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..classifiers import ModelKind, TrainingSet, dumps_model, train
from ..corpus import SignatureCorpus
from ..errors import CorpusShapeError
from ..features import FeatureSubset, distance_tensor
from ..rng import keyed_rng
from ..signal import DEFAULT_K, Label

log = logging.getLogger(__name__)


class Task(str, enum.Enum):
    SKILLED = "skilled"
    RANDOM = "random"
    ANY = "any"

    @property
    def roles(self) -> tuple[str, ...]:
        return {
            Task.SKILLED: ("genuine", "skilled"),
            Task.RANDOM: ("genuine", "random"),
            Task.ANY: ("genuine", "skilled", "random"),
        }[self]


class Aggregation(str, enum.Enum):
    PER_EXECUTION = "per_execution"
    POOLED = "pooled"


def _as_tuple(values, cast):
    if isinstance(values, (str, int, enum.Enum)):
        values = (values,)
    return tuple(cast(v) for v in values)


@dataclass(frozen=True)
class ExperimentConfig:
    n_repetitions: int = 25
    n_refs: tuple = (5,)
    n_genuine_eval: int = 8
    n_random_forgers: int = 10
    tasks: tuple = (Task.SKILLED, Task.RANDOM, Task.ANY)
    classifiers: tuple = (ModelKind.LOGISTIC,)
    subsets: tuple = (FeatureSubset.ALL,)
    seed: int = 0
    aggregation: Aggregation = Aggregation.PER_EXECUTION
    k: int = DEFAULT_K
    n_trees: int = 100

    def __post_init__(self):
        object.__setattr__(self, "n_refs", tuple(sorted(set(_as_tuple(self.n_refs, int)))))
        object.__setattr__(self, "tasks", _as_tuple(self.tasks, Task))
        object.__setattr__(self, "classifiers", _as_tuple(self.classifiers, ModelKind))
        object.__setattr__(self, "subsets", _as_tuple(self.subsets, FeatureSubset))
        object.__setattr__(self, "aggregation", Aggregation(self.aggregation))
        if self.n_repetitions < 1 or not self.n_refs or min(self.n_refs) < 1:
            raise ValueError("need at least one repetition and positive reference counts")
        if self.n_genuine_eval < 1 or self.n_random_forgers < 0:
            raise ValueError("n_genuine_eval must be positive and n_random_forgers non-negative")

    @property
    def max_refs(self) -> int:
        return max(self.n_refs)

    def check_corpus(self, corpus: SignatureCorpus) -> None:
        if len(corpus) < 2:
            raise CorpusShapeError("leave-one-user-out needs at least two users")
        if self.n_random_forgers >= len(corpus):
            raise CorpusShapeError(
                f"{self.n_random_forgers} random forgers need more than {len(corpus)} users"
            )
        need = self.max_refs + self.n_genuine_eval
        short = [u.user_id for u in corpus if len(u.genuine) < need]
        if short:
            raise CorpusShapeError(f"users with fewer than {need} genuine signatures: {', '.join(short)}")

    def to_dict(self) -> dict:
        return {
            "n_repetitions": self.n_repetitions,
            "n_refs": list(self.n_refs),
            "n_genuine_eval": self.n_genuine_eval,
            "n_random_forgers": self.n_random_forgers,
            "tasks": [t.value for t in self.tasks],
            "classifiers": [c.value for c in self.classifiers],
            "subsets": [s.value for s in self.subsets],
            "seed": self.seed,
            "aggregation": self.aggregation.value,
            "k": self.k,
            "n_trees": self.n_trees,
        }


@dataclass(frozen=True)
class UserSplit:
    """Index-level split of one user's data for one repetition.

    ``ref_pool`` is ordered; the first ``n`` entries form the reference set for
    ``n`` references, so reference sets are nested across a sweep while the
    evaluation samples stay fixed.
    """

    user_id: str
    ref_pool: tuple[int, ...]
    eval_genuine: tuple[int, ...]
    skilled: tuple[int, ...]
    random_forgeries: tuple[tuple[str, int], ...]  # (donor user id, genuine index)
    unused: tuple[int, ...]

    def references(self, n: int) -> tuple[int, ...]:
        if n > len(self.ref_pool):
            raise ValueError(f"split holds {len(self.ref_pool)} references, {n} requested")
        return self.ref_pool[:n]


def make_split(
    corpus: SignatureCorpus, user_id: str, seed: int, config: ExperimentConfig, repetition: int = 0
) -> UserSplit:
    """Draw one user's reference / evaluation / random-forgery split.

    All draws come from a stream keyed on (seed, repetition, user_id); random
    forgery donors are picked without replacement from the other users in
    sorted-id order, one genuine signature each.
    """
    user = corpus.user(user_id)
    n_gen = len(user.genuine)
    if config.max_refs + config.n_genuine_eval > n_gen:
        raise CorpusShapeError(
            f"user {user_id}: {n_gen} genuine signatures cannot supply "
            f"{config.max_refs} references + {config.n_genuine_eval} evaluation samples"
        )
    others = sorted(u for u in corpus.user_ids if u != user_id)
    if config.n_random_forgers > len(others):
        raise CorpusShapeError(f"user {user_id}: only {len(others)} other users for random forgeries")
    if not user.skilled_forgeries:
        raise CorpusShapeError(f"user {user_id}: no skilled forgeries")
    rng = keyed_rng(seed, "split", repetition, user_id)
    perm = [int(i) for i in rng.permutation(n_gen)]
    pool = tuple(perm[: config.max_refs])
    evals = tuple(perm[n_gen - config.n_genuine_eval :])
    unused = tuple(perm[config.max_refs : n_gen - config.n_genuine_eval])
    donors = rng.choice(len(others), size=config.n_random_forgers, replace=False)
    randoms = []
    for d in donors:
        donor = others[int(d)]
        randoms.append((donor, int(rng.integers(len(corpus.user(donor).genuine)))))
    return UserSplit(
        user_id, pool, evals, tuple(range(len(user.skilled_forgeries))), tuple(randoms), unused
    )


@dataclass(frozen=True, eq=False)
class RepetitionFeatures:
    """Min-DTW features of every user's questioned samples for one repetition.

    Rows are stacked over users; ``features[n]`` is the (rows, 9) matrix for
    ``n`` references.
    """

    repetition: int
    owner: np.ndarray  # user id per row
    role: np.ndarray  # "genuine" | "skilled" | "random"
    donor: np.ndarray  # donor user id for random rows, "" otherwise
    features: dict
    splits: dict

    def label(self) -> np.ndarray:
        return (self.role == "genuine").astype(np.int64)


def repetition_features(
    corpus: SignatureCorpus, config: ExperimentConfig, repetition: int
) -> RepetitionFeatures:
    corpus = corpus.compressed(config.k)
    owners, roles, donors = [], [], []
    per_n = {n: [] for n in config.n_refs}
    splits = {}
    for user in corpus:
        split = make_split(corpus, user.user_id, config.seed, config, repetition)
        splits[user.user_id] = split
        q = [user.genuine[i].coefficients for i in split.eval_genuine]
        q += [user.skilled_forgeries[i].coefficients for i in split.skilled]
        q += [corpus.user(d).genuine[i].coefficients for d, i in split.random_forgeries]
        refs = np.stack([user.genuine[i].coefficients for i in split.ref_pool])
        dist = distance_tensor(np.stack(q), refs)
        # running minimum over the nested reference prefixes
        running = np.minimum.accumulate(dist, axis=1)
        for n in config.n_refs:
            per_n[n].append(running[:, n - 1, :])
        owners += [user.user_id] * len(q)
        roles += ["genuine"] * len(split.eval_genuine) + ["skilled"] * len(split.skilled)
        roles += ["random"] * len(split.random_forgeries)
        donors += [""] * (len(split.eval_genuine) + len(split.skilled))
        donors += [d for d, _ in split.random_forgeries]
    return RepetitionFeatures(
        repetition,
        np.array(owners, dtype=object),
        np.array(roles, dtype=object),
        np.array(donors, dtype=object),
        {n: np.concatenate(v) for n, v in per_n.items()},
        splits,
    )


@dataclass(frozen=True)
class ScoredSample:
    score: float
    label: Label
    role: str


@dataclass(frozen=True)
class ExecutionResult:
    repetition: int
    left_out_user: str
    classifier: ModelKind
    subset: FeatureSubset
    n_refs: int
    task: Task
    scores: tuple[ScoredSample, ...] = ()
    model_digest: str = ""
    error: Optional[str] = None

    def by_role(self, role: str) -> list[ScoredSample]:
        return [s for s in self.scores if s.role == role]


def fold_training_set(
    feats: RepetitionFeatures, left_out: str, task: Task, subset: FeatureSubset, n_refs: int
) -> TrainingSet:
    """Training instances for one fold.

    Only other users' rows for the task's roles are used, and random forgeries
    donated by the left-out user are dropped so none of that user's
    recordings reach training.
    """
    rows = (feats.owner != left_out) & (feats.donor != left_out) & np.isin(feats.role, task.roles)
    cols = [d.value for d in subset.dimensions]
    X = feats.features[n_refs][rows][:, cols]
    return TrainingSet(X, feats.label()[rows], subset.dimensions, tuple(feats.owner[rows]))


def train_fold(
    feats: RepetitionFeatures,
    left_out: str,
    kind,
    task: Task,
    subset: FeatureSubset,
    n_refs: int,
    config: ExperimentConfig,
):
    ts = fold_training_set(feats, left_out, Task(task), FeatureSubset(subset), n_refs)
    tree_seed = _fold_seed(config.seed, feats.repetition, left_out)
    return train(kind, ts, seed=tree_seed, n_trees=config.n_trees)


def _fold_seed(seed: int, repetition: int, user_id: str) -> int:
    return int(keyed_rng(seed, "fold", repetition, user_id).integers(2**62))


def _run_repetition(corpus: SignatureCorpus, config: ExperimentConfig, repetition: int) -> list[ExecutionResult]:
    feats = repetition_features(corpus, config, repetition)
    labels = feats.label()
    out = []
    for kind in config.classifiers:
        for subset in config.subsets:
            cols = [d.value for d in subset.dimensions]
            for n in config.n_refs:
                for user_id in corpus.user_ids:
                    for task in config.tasks:
                        try:
                            model = train_fold(feats, user_id, kind, task, subset, n, config)
                            rows = (feats.owner == user_id) & np.isin(feats.role, task.roles)
                            probs = model.predict_proba(feats.features[n][rows][:, cols])
                            scores = tuple(
                                ScoredSample(float(p), Label.GENUINE if y else Label.FORGED, str(r))
                                for p, y, r in zip(probs, labels[rows], feats.role[rows])
                            )
                            digest = hashlib.sha256(dumps_model(model)).hexdigest()
                            out.append(ExecutionResult(repetition, user_id, kind, subset, n, task, scores, digest))
                        except Exception as exc:  # reported per cell, never aborts the run
                            log.warning("rep %d user %s %s/%s/%s/%d failed: %s",
                                        repetition, user_id, kind.value, task.value, subset.value, n, exc)
                            out.append(ExecutionResult(repetition, user_id, kind, subset, n, task,
                                                       error=f"{type(exc).__name__}: {exc}"))
    return out


_WORKER_CORPUS: Optional[SignatureCorpus] = None
_WORKER_CONFIG: Optional[ExperimentConfig] = None


def _init_worker(corpus, config):
    global _WORKER_CORPUS, _WORKER_CONFIG
    _WORKER_CORPUS, _WORKER_CONFIG = corpus, config


def _worker(repetition: int) -> list[ExecutionResult]:
    return _run_repetition(_WORKER_CORPUS, _WORKER_CONFIG, repetition)


def _sort_key(r: ExecutionResult):
    return (r.classifier.value, r.subset.value, r.n_refs, r.task.value, r.repetition, r.left_out_user)


def run_executions(corpus: SignatureCorpus, config: ExperimentConfig, jobs: int = 1) -> list[ExecutionResult]:
    """Every (repetition, left-out user) execution for every requested cell, canonically ordered."""
    config.check_corpus(corpus)
    corpus = corpus.compressed(config.k)
    reps = range(config.n_repetitions)
    results: list[ExecutionResult] = []
    if jobs <= 1:
        for rep in reps:
            results.extend(_run_repetition(corpus, config, rep))
    else:
        with cf.ProcessPoolExecutor(max_workers=jobs, initializer=_init_worker, initargs=(corpus, config)) as pool:
            for chunk in pool.map(_worker, reps):
                results.extend(chunk)
    results.sort(key=_sort_key)
    return results


def leave_one_user_out(
    corpus: SignatureCorpus,
    config: ExperimentConfig,
    classifier_kind=ModelKind.LOGISTIC,
    *,
    jobs: int = 1,
) -> list[ExecutionResult]:
    """Executions for one classifier over every configured task, subset and reference count."""
    cfg = ExperimentConfig(**{**_config_kwargs(config), "classifiers": (ModelKind(classifier_kind),)})
    return run_executions(corpus, cfg, jobs=jobs)


def _config_kwargs(config: ExperimentConfig) -> dict:
    return {name: getattr(config, name) for name in config.__dataclass_fields__}
