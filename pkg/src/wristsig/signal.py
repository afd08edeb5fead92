"""Motion-signature domain types plus per-signal normalization and DCT compression."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np
from scipy import fft as sfft

from .errors import DimensionMismatch, NonFiniteInput

DEFAULT_K = 20
DEFAULT_SAMPLE_RATE = 62.0
# below this population std a channel is treated as constant
DEGENERATE_STD = 1e-12


class Dimension(enum.IntEnum):
    """The nine sensor channels, in the canonical feature order."""

    ACC_X = 0
    ACC_Y = 1
    ACC_Z = 2
    GACC_X = 3
    GACC_Y = 4
    GACC_Z = 5
    GVEL_X = 6
    GVEL_Y = 7
    GVEL_Z = 8

    @property
    def column(self) -> str:
        return self.name.lower()

    @property
    def sensor(self) -> str:
        return self.name.split("_")[0]

    @property
    def axis(self) -> str:
        return self.name.split("_")[1]


N_DIMS = len(Dimension)
COLUMNS = tuple(d.column for d in Dimension)


class Label(str, enum.Enum):
    GENUINE = "genuine"
    FORGED = "forged"
    UNKNOWN = "unknown"


def _as_finite_array(values, dimension=None) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 1:
        raise DimensionMismatch(f"expected a 1-D sequence, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise NonFiniteInput(dimension=dimension)
    return arr


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, dtype=np.float64, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class MotionSignal:
    samples: np.ndarray
    dimension: Dimension

    def __post_init__(self):
        arr = _as_finite_array(self.samples, self.dimension)
        if arr.size < 1:
            raise DimensionMismatch("a motion signal needs at least one sample")
        object.__setattr__(self, "samples", _frozen(arr))
        object.__setattr__(self, "dimension", Dimension(self.dimension))

    def __len__(self) -> int:
        return self.samples.size


@dataclass(frozen=True, eq=False)
class SignatureRecording:
    """One signing event: a (9, N) array of raw sensor values, row d = Dimension(d)."""

    data: np.ndarray
    user_id: str
    label: Label = Label.UNKNOWN
    forger_id: Optional[str] = None
    sample_rate_hz: float = DEFAULT_SAMPLE_RATE

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[0] != N_DIMS:
            raise DimensionMismatch(f"recording must have shape (9, N), got {arr.shape}")
        if arr.shape[1] < 1:
            raise DimensionMismatch("recording has no samples")
        bad = ~np.all(np.isfinite(arr), axis=1)
        if bad.any():
            raise NonFiniteInput(dimension=Dimension(int(np.argmax(bad))))
        if not self.sample_rate_hz > 0:
            raise DimensionMismatch("sample_rate_hz must be positive")
        label = Label(self.label)
        if (label is Label.FORGED) != (self.forger_id is not None):
            raise DimensionMismatch("forger_id must be present exactly when label is FORGED")
        object.__setattr__(self, "data", _frozen(arr))
        object.__setattr__(self, "label", label)
        object.__setattr__(self, "sample_rate_hz", float(self.sample_rate_hz))

    @classmethod
    def from_signals(cls, signals, **meta) -> "SignatureRecording":
        by_dim = {Dimension(s.dimension): s for s in signals}
        if len(by_dim) != N_DIMS:
            raise DimensionMismatch("need exactly one signal per dimension")
        lengths = {len(s) for s in by_dim.values()}
        if len(lengths) != 1:
            raise DimensionMismatch(f"signals have unequal lengths {sorted(lengths)}")
        return cls(np.stack([by_dim[d].samples for d in Dimension]), **meta)

    @property
    def n_samples(self) -> int:
        return self.data.shape[1]

    @property
    def signals(self) -> tuple[MotionSignal, ...]:
        return tuple(MotionSignal(self.data[d], d) for d in Dimension)

    def __eq__(self, other):
        if not isinstance(other, SignatureRecording):
            return NotImplemented
        return (
            self.user_id == other.user_id
            and self.label is other.label
            and self.forger_id == other.forger_id
            and self.sample_rate_hz == other.sample_rate_hz
            and np.array_equal(self.data, other.data)
        )


@dataclass(frozen=True)
class CoefficientVector:
    coefficients: np.ndarray
    dimension: Dimension

    def __post_init__(self):
        object.__setattr__(self, "coefficients", _frozen(_as_finite_array(self.coefficients)))
        object.__setattr__(self, "dimension", Dimension(self.dimension))


@dataclass(frozen=True, eq=False)
class CompressedSignature:
    """Normalized, DCT-truncated form of a recording: a (9, k) coefficient array."""

    coefficients: np.ndarray
    user_id: str
    label: Label = Label.UNKNOWN
    forger_id: Optional[str] = None
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        arr = np.asarray(self.coefficients, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[0] != N_DIMS:
            raise DimensionMismatch(f"coefficients must have shape (9, k), got {arr.shape}")
        object.__setattr__(self, "coefficients", _frozen(arr))
        object.__setattr__(self, "label", Label(self.label))

    @property
    def k(self) -> int:
        return self.coefficients.shape[1]

    @property
    def vectors(self) -> dict[Dimension, CoefficientVector]:
        return {d: CoefficientVector(self.coefficients[d], d) for d in Dimension}

    def __eq__(self, other):
        if not isinstance(other, CompressedSignature):
            return NotImplemented
        return (
            self.user_id == other.user_id
            and self.label is other.label
            and self.forger_id == other.forger_id
            and np.array_equal(self.coefficients, other.coefficients)
        )


SignalLike = Union[MotionSignal, np.ndarray, list, tuple]


def _samples(signal: SignalLike) -> tuple[np.ndarray, Dimension]:
    if isinstance(signal, MotionSignal):
        return signal.samples, signal.dimension
    arr = _as_finite_array(signal)
    if arr.size < 1:
        raise DimensionMismatch("a motion signal needs at least one sample")
    return arr, Dimension.ACC_X


def _normalize_rows(x: np.ndarray) -> np.ndarray:
    mu = x.mean(axis=-1, keepdims=True)
    centered = x - mu
    sigma = np.sqrt(np.mean(centered * centered, axis=-1, keepdims=True))
    flat = sigma < DEGENERATE_STD
    out = centered / np.where(flat, 1.0, sigma)
    return np.where(flat, 0.0, out)


def _dct_rows(x: np.ndarray, k: int) -> np.ndarray:
    n = x.shape[-1]
    coeffs = sfft.dct(x, type=2, norm="ortho", axis=-1)
    if n >= k:
        return coeffs[..., :k]
    pad = np.zeros(x.shape[:-1] + (k - n,))
    return np.concatenate([coeffs, pad], axis=-1)


def normalize(signal: SignalLike) -> MotionSignal:
    """Z-score a signal with the population standard deviation.

    Constant signals (std below 1e-12) map to all zeros.
    """
    x, dim = _samples(signal)
    return MotionSignal(_normalize_rows(x), dim)


def dct_compress(signal: SignalLike, k: int = DEFAULT_K) -> CoefficientVector:
    """First ``k`` orthonormal DCT-II coefficients, zero-padded when the signal is shorter."""
    if k < 1:
        raise ValueError("k must be >= 1")
    x, dim = _samples(signal)
    return CoefficientVector(_dct_rows(x, k), dim)


def preprocess(recording: SignatureRecording, k: int = DEFAULT_K) -> CompressedSignature:
    """Normalize and DCT-compress each of the nine signals independently."""
    if k < 1:
        raise ValueError("k must be >= 1")
    coeffs = _dct_rows(_normalize_rows(recording.data), k)
    return CompressedSignature(
        coeffs,
        user_id=recording.user_id,
        label=recording.label,
        forger_id=recording.forger_id,
    )
