"""Per-user genuine / skilled-forgery partitions."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Generic, Iterator, TypeVar

from .errors import CorpusShapeError
from .signal import DEFAULT_K, CompressedSignature, Label, SignatureRecording, preprocess

S = TypeVar("S", SignatureRecording, CompressedSignature)

STANDARD_GENUINE = 15
STANDARD_FORGERS = 5
STANDARD_FORGERIES_PER_FORGER = 3

@dataclass(frozen=True)
class UserRecord(Generic[S]):
    user_id: str
    genuine: tuple
    skilled_forgeries: tuple

    def __post_init__(self):
        object.__setattr__(self, "genuine", tuple(self.genuine))
        object.__setattr__(self, "skilled_forgeries", tuple(self.skilled_forgeries))

@dataclass(frozen=True)
class SignatureCorpus(Generic[S]):
    users: tuple

    def __post_init__(self):
        users = tuple(self.users)
        ids = [u.user_id for u in users]
        if len(set(ids)) != len(ids):
            raise CorpusShapeError("user ids are not unique")
        object.__setattr__(self, "users", users)

    def __len__(self) -> int:
        return len(self.users)

    def __iter__(self) -> Iterator[UserRecord]:
        return iter(self.users)

    @property
    def user_ids(self) -> list[str]:
        return [u.user_id for u in self.users]

    def user(self, user_id: str) -> UserRecord:
        for u in self.users:
            if u.user_id == user_id:
                return u
        raise KeyError(user_id)

    def shape_problems(self, standard_shape: bool = False) -> list[str]:
        """Invariant violations, one message per problem (empty when well-formed)."""
        problems = []
        for u in self.users:
            for i, g in enumerate(u.genuine):
                if g.user_id != u.user_id or g.label is not Label.GENUINE:
                    problems.append(f"user {u.user_id}: genuine[{i}] has user/label {g.user_id}/{g.label.value}")
            forgers: dict[str, int] = {}
            for i, f in enumerate(u.skilled_forgeries):
                if f.label is not Label.FORGED:
                    problems.append(f"user {u.user_id}: forgery[{i}] is not labeled forged")
                if f.forger_id == u.user_id:
                    problems.append(f"user {u.user_id}: forgery[{i}] forger_id equals the user id")
                forgers[f.forger_id] = forgers.get(f.forger_id, 0) + 1
            if standard_shape:
                if len(u.genuine) != STANDARD_GENUINE:
                    problems.append(f"user {u.user_id}: {len(u.genuine)} genuine signatures, expected {STANDARD_GENUINE}")
                counts = sorted(forgers.values())
                if counts != [STANDARD_FORGERIES_PER_FORGER] * STANDARD_FORGERS:
                    problems.append(
                        f"user {u.user_id}: forgeries per forger {counts}, expected "
                        f"{STANDARD_FORGERS} forgers x {STANDARD_FORGERIES_PER_FORGER}"
                    )
        return problems

    def compressed(self, k: int = DEFAULT_K) -> "SignatureCorpus":
        """Preprocess every recording; already-compressed corpora pass through."""
        if all(isinstance(s, CompressedSignature) for u in self.users for s in u.genuine):
            return self
        return SignatureCorpus(
            tuple(
                UserRecord(
                    u.user_id,
                    tuple(preprocess(g, k) for g in u.genuine),
                    tuple(preprocess(f, k) for f in u.skilled_forgeries),
                )
                for u in self.users
            )
        )
