"""Seeded synthetic signature corpora.

The data are synthetic: each user gets a latent nine-channel template (a sum
of random sinusoids over normalized signing time). Genuine samples replay the
template through a small random monotone time warp plus white sensor noise.
Skilled forgeries replay the same template through a larger warp, stronger
noise and a per-forger style (a tempo factor and a smooth additive distortion
that stay the same over all of that forger's attempts). Z-axis channels carry
attenuated template energy, so at equal absolute noise they are the least
informative.

Forger assignment follows a seeded random cyclic ordering of users: each user
forges the next ``n_forgers_per_user`` users in that ordering.
"""

from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np

from .corpus import SignatureCorpus, UserRecord
from .errors import InvalidParams
from .rng import keyed_rng
from .signal import N_DIMS, Dimension, Label, SignatureRecording

_Z_DIMS = np.array([d.axis == "Z" for d in Dimension])


@dataclass(frozen=True)
class GeneratorParams:
    n_users: int = 66
    n_genuine: int = 15
    n_forgers_per_user: int = 5
    n_forgeries_per_forger: int = 3
    min_duration_s: float = 1.5
    max_duration_s: float = 4.0
    sample_rate_hz: float = 62.0
    genuine_noise: float = 0.35
    forger_noise: float = 0.4
    genuine_warp: float = 0.08
    forger_warp: float = 0.12
    genuine_duration_jitter: float = 0.05
    forger_duration_jitter: float = 0.06
    forger_tempo: float = 0.08
    forger_style: float = 0.15
    z_attenuation: float = 0.4
    seed: int = 0

    def validate(self) -> None:
        for f in fields(self):
            if f.name in ("n_users", "n_genuine", "n_forgers_per_user", "n_forgeries_per_forger"):
                if getattr(self, f.name) < 1:
                    raise InvalidParams(f"{f.name} must be positive")
        if self.n_forgers_per_user >= self.n_users:
            raise InvalidParams("n_forgers_per_user must be smaller than n_users")
        if not 0 < self.min_duration_s <= self.max_duration_s:
            raise InvalidParams("durations must be positive with min <= max")
        if self.sample_rate_hz <= 0:
            raise InvalidParams("sample_rate_hz must be positive")
        if self.genuine_noise < 0 or self.forger_noise < self.genuine_noise:
            raise InvalidParams("need forger_noise >= genuine_noise >= 0")
        for name in ("genuine_warp", "forger_warp", "genuine_duration_jitter",
                     "forger_duration_jitter", "forger_tempo", "forger_style", "z_attenuation"):
            if getattr(self, name) < 0:
                raise InvalidParams(f"{name} must be non-negative")
        if self.seed < 0:
            raise InvalidParams("seed must be non-negative")


@dataclass(frozen=True)
class _Template:
    freqs: np.ndarray  # (9, K) cycles per signature
    phases: np.ndarray
    amps: np.ndarray
    duration_s: float

    def __call__(self, tau: np.ndarray) -> np.ndarray:
        """Template values at normalized times ``tau`` in [0, 1]; shape (9, len(tau))."""
        arg = 2.0 * np.pi * self.freqs[:, :, None] * tau[None, None, :] + self.phases[:, :, None]
        return np.sum(self.amps[:, :, None] * np.sin(arg), axis=1)


def _template(rng: np.random.Generator, params: GeneratorParams) -> _Template:
    n_comp = int(rng.integers(4, 9))
    freqs = rng.uniform(0.5, 5.0, size=(N_DIMS, n_comp))
    phases = rng.uniform(0.0, 2.0 * np.pi, size=(N_DIMS, n_comp))
    amps = rng.uniform(0.5, 1.5, size=(N_DIMS, n_comp)) / np.sqrt(n_comp / 2.0)
    amps[_Z_DIMS] *= params.z_attenuation
    duration = float(rng.uniform(params.min_duration_s, params.max_duration_s))
    return _Template(freqs, phases, amps, duration)


def _smooth_noise(rng: np.random.Generator, n: int) -> np.ndarray:
    """Unit-variance low-frequency noise of length n."""
    width = max(3, n // 8)
    raw = rng.standard_normal(n + width)
    kernel = np.hanning(width + 2)[1:-1]
    smooth = np.convolve(raw, kernel / kernel.sum(), mode="valid")[:n]
    sd = smooth.std()
    return (smooth - smooth.mean()) / (sd if sd > 0 else 1.0)


def monotone_warp(rng: np.random.Generator, n: int, magnitude: float) -> np.ndarray:
    """Increasing map from sample index to normalized time, from 0 to 1.

    Built as the normalized cumulative sum of strictly positive increments.
    """
    if n == 1:
        return np.zeros(1)
    inc = np.exp(magnitude * _smooth_noise(rng, n - 1))
    tau = np.concatenate([[0.0], np.cumsum(inc)])
    return tau / tau[-1]


def _n_samples(duration_s: float, rate: float) -> int:
    return max(2, int(round(duration_s * rate)))


def _render(template, rng, params, *, warp, noise, duration_jitter, tempo=1.0, style=None):
    duration = template.duration_s * tempo * float(np.exp(duration_jitter * rng.standard_normal()))
    n = _n_samples(duration, params.sample_rate_hz)
    tau = monotone_warp(rng, n, warp)
    data = template(tau)
    if style is not None:
        data = data + style(tau)
    data = data + noise * rng.standard_normal(data.shape)
    return data


def forger_assignment(params: GeneratorParams) -> dict[str, list[str]]:
    """Map each target user id to the ids of the users who forge it."""
    ids = user_ids(params)
    order = keyed_rng(params.seed, "forger-order").permutation(params.n_users)
    ring = [ids[i] for i in order]
    n = len(ring)
    targets: dict[str, list[str]] = {u: [] for u in ids}
    for pos, forger in enumerate(ring):
        for step in range(1, params.n_forgers_per_user + 1):
            targets[ring[(pos + step) % n]].append(forger)
    return targets


def user_ids(params: GeneratorParams) -> list[str]:
    width = max(3, len(str(params.n_users - 1)))
    return [f"u{i:0{width}d}" for i in range(params.n_users)]


def generate_corpus(params: GeneratorParams = GeneratorParams()) -> SignatureCorpus:
    params.validate()
    seed = params.seed
    ids = user_ids(params)
    templates = {u: _template(keyed_rng(seed, "template", u), params) for u in ids}
    forgers_of = forger_assignment(params)
    users = []
    for uid in ids:
        tpl = templates[uid]
        genuine = []
        for i in range(params.n_genuine):
            rng = keyed_rng(seed, "genuine", uid, i)
            data = _render(
                tpl, rng, params,
                warp=params.genuine_warp,
                noise=params.genuine_noise,
                duration_jitter=params.genuine_duration_jitter,
            )
            genuine.append(SignatureRecording(data, uid, Label.GENUINE, None, params.sample_rate_hz))
        forgeries = []
        for forger in forgers_of[uid]:
            style_rng = keyed_rng(seed, "style", forger, uid)
            tempo = float(np.exp(params.forger_tempo * style_rng.standard_normal()))
            style_tpl = _template(style_rng, params)
            style_amps = style_tpl.amps * params.forger_style
            style = _Template(style_tpl.freqs, style_tpl.phases, style_amps, 1.0)
            for j in range(params.n_forgeries_per_forger):
                rng = keyed_rng(seed, "forgery", uid, forger, j)
                data = _render(
                    tpl, rng, params,
                    warp=params.forger_warp,
                    noise=params.forger_noise,
                    duration_jitter=params.forger_duration_jitter,
                    tempo=tempo,
                    style=style if params.forger_style > 0 else None,
                )
                forgeries.append(SignatureRecording(data, uid, Label.FORGED, forger, params.sample_rate_hz))
        users.append(UserRecord(uid, tuple(genuine), tuple(forgeries)))
    return SignatureCorpus(tuple(users))


def null_params(**overrides) -> GeneratorParams:
    """Parameters under which skilled forgeries are drawn exactly like genuine samples."""
    base = GeneratorParams(**overrides)
    return GeneratorParams(
        **{
            **{f.name: getattr(base, f.name) for f in fields(base)},
            "forger_noise": base.genuine_noise,
            "forger_warp": base.genuine_warp,
            "forger_duration_jitter": base.genuine_duration_jitter,
            "forger_tempo": 0.0,
            "forger_style": 0.0,
        }
    )
