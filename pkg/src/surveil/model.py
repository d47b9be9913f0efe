"""System parameters, Rayleigh channel draws, SINRs and the success indicator.

Channel conventions
-------------------
``h_sd``  complex scalar, S -> D.
``h_se``  length ``n_r`` column, S -> E.
``h_ed``  length ``n_t`` *row*, E -> D, so the jamming gain is ``h_ed @ w_t``.
``h_ee``  ``n_r x n_t`` loop channel from E's transmit to its receive array.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "SystemParams",
    "ChannelRealization",
    "ChannelBatch",
    "MonitorDesign",
    "SchemeInapplicable",
    "make_rng",
    "sample_channels",
    "sample_channel_batch",
    "sinr_pair",
    "success_indicator",
    "p11_objective",
    "paper_defaults",
]


class SchemeInapplicable(ValueError):
    """A scheme was requested for an antenna configuration it cannot serve."""


@dataclass(frozen=True)
class SystemParams:
    """Everything that fixes the statistics of one surveillance scenario.

    ``lambda1..lambda4`` are the variances of ``h_sd``, ``h_se``, ``h_ed``
    and ``h_ee`` entries; ``rho`` scales the residual loop interference.
    """

    n_t: int = 3
    n_r: int = 3
    lambda1: float = 1.0
    lambda2: float = 0.1
    lambda3: float = 0.1
    lambda4: float = 1.0
    rho: float = 0.5
    n_d: float = 1.0
    n_e: float = 1.0
    p_j_max: float = 10.0
    p_s: float = 1.0

    def __post_init__(self):
        if int(self.n_t) != self.n_t or int(self.n_r) != self.n_r or self.n_t < 1 or self.n_r < 1:
            raise ValueError("antenna counts must be positive integers")
        for name in ("lambda1", "lambda2", "lambda3", "lambda4", "n_d", "n_e", "p_j_max", "p_s"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if not 0.0 <= self.rho <= 1.0:
            raise ValueError("rho must lie in [0, 1]")

    def replace(self, **changes) -> "SystemParams":
        return dataclasses.replace(self, **changes)

    @property
    def emr(self) -> float:
        """Eavesdropper-to-main ratio ``lambda2 / lambda1``."""
        return self.lambda2 / self.lambda1

    def with_pj_db(self, db: float) -> "SystemParams":
        """Set the jamming budget from ``P_J / N_D`` in dB."""
        return self.replace(p_j_max=self.n_d * 10.0 ** (db / 10.0))


def paper_defaults(**changes) -> SystemParams:
    """Simulation setting used throughout the numerical section (P_J/N_D = 10 dB)."""
    return SystemParams(**changes)


@dataclass(frozen=True)
class ChannelRealization:
    h_sd: complex
    h_se: np.ndarray
    h_ed: np.ndarray
    h_ee: np.ndarray

    def __post_init__(self):
        h_se = np.asarray(self.h_se, dtype=complex).reshape(-1)
        h_ed = np.asarray(self.h_ed, dtype=complex).reshape(-1)
        h_ee = np.asarray(self.h_ee, dtype=complex).reshape(h_se.size, h_ed.size)
        object.__setattr__(self, "h_sd", complex(self.h_sd))
        object.__setattr__(self, "h_se", h_se)
        object.__setattr__(self, "h_ed", h_ed)
        object.__setattr__(self, "h_ee", h_ee)

    @property
    def n_t(self) -> int:
        return self.h_ed.size

    @property
    def n_r(self) -> int:
        return self.h_se.size

    def restrict(self, n_t: int, n_r: int) -> "ChannelRealization":
        """Keep only the first ``n_t`` transmit and ``n_r`` receive antennas."""
        if n_t > self.n_t or n_r > self.n_r:
            raise SchemeInapplicable("cannot restrict to a larger array")
        return ChannelRealization(self.h_sd, self.h_se[:n_r], self.h_ed[:n_t], self.h_ee[:n_r, :n_t])


@dataclass(frozen=True)
class ChannelBatch:
    """``trials`` independent realizations stacked along the leading axis."""

    h_sd: np.ndarray  # (T,)
    h_se: np.ndarray  # (T, n_r)
    h_ed: np.ndarray  # (T, n_t)
    h_ee: np.ndarray  # (T, n_r, n_t)

    @property
    def trials(self) -> int:
        return self.h_sd.shape[0]

    def restrict(self, n_t: int, n_r: int) -> "ChannelBatch":
        return ChannelBatch(self.h_sd, self.h_se[:, :n_r], self.h_ed[:, :n_t], self.h_ee[:, :n_r, :n_t])

    def __getitem__(self, i: int) -> ChannelRealization:
        return ChannelRealization(self.h_sd[i], self.h_se[i], self.h_ed[i], self.h_ee[i])

    def take(self, idx) -> "ChannelBatch":
        return ChannelBatch(self.h_sd[idx], self.h_se[idx], self.h_ed[idx], self.h_ee[idx])


@dataclass(frozen=True)
class MonitorDesign:
    """Jamming power plus unit transmit/receive beamformers."""

    p_d: float
    w_t: np.ndarray
    w_r: np.ndarray
    notes: tuple[str, ...] = field(default=())

    def __post_init__(self):
        w_t = np.asarray(self.w_t, dtype=complex).reshape(-1)
        w_r = np.asarray(self.w_r, dtype=complex).reshape(-1)
        if abs(np.linalg.norm(w_t) - 1.0) > 1e-10 or abs(np.linalg.norm(w_r) - 1.0) > 1e-10:
            raise ValueError("beamformers must have unit norm")
        if self.p_d < 0:
            raise ValueError("jamming power must be non-negative")
        object.__setattr__(self, "w_t", w_t)
        object.__setattr__(self, "w_r", w_r)
        object.__setattr__(self, "p_d", float(self.p_d))


def make_rng(seed: int | np.random.SeedSequence) -> np.random.Generator:
    """Counter-based (Philox) generator for a 64-bit seed or a seed sequence."""
    if isinstance(seed, np.random.SeedSequence):
        return np.random.Generator(np.random.Philox(seed))
    return np.random.Generator(np.random.Philox(int(seed) & 0xFFFFFFFFFFFFFFFF))


def _cn(rng: np.random.Generator, var: float, shape) -> np.ndarray:
    # circularly-symmetric: real and imaginary parts each carry var/2
    z = rng.standard_normal(tuple(shape) + (2,))
    return np.sqrt(var / 2.0) * (z[..., 0] + 1j * z[..., 1])


def sample_channel_batch(params: SystemParams, trials: int, rng: np.random.Generator) -> ChannelBatch:
    """Draw ``trials`` i.i.d. Rayleigh realizations."""
    t = int(trials)
    return ChannelBatch(
        h_sd=_cn(rng, params.lambda1, (t,)),
        h_se=_cn(rng, params.lambda2, (t, params.n_r)),
        h_ed=_cn(rng, params.lambda3, (t, params.n_t)),
        h_ee=_cn(rng, params.lambda4, (t, params.n_r, params.n_t)),
    )


def sample_channels(params: SystemParams, rng_seed: int) -> ChannelRealization:
    """One realization, deterministic in ``rng_seed``."""
    return sample_channel_batch(params, 1, make_rng(rng_seed))[0]


def sinr_pair(params: SystemParams, ch: ChannelRealization, design: MonitorDesign) -> tuple[float, float]:
    """SINR at the suspicious receiver and at the monitor after combining."""
    jam_d = abs(ch.h_ed @ design.w_t) ** 2
    sig_e = abs(np.vdot(design.w_r, ch.h_se)) ** 2
    loop = abs(np.vdot(design.w_r, ch.h_ee @ design.w_t)) ** 2
    sinr_d = params.p_s * abs(ch.h_sd) ** 2 / (design.p_d * jam_d + params.n_d)
    sinr_e = params.p_s * sig_e / (params.rho * design.p_d * loop + params.n_e)
    return float(sinr_d), float(sinr_e)


def success_indicator(params: SystemParams, ch: ChannelRealization, design: MonitorDesign) -> int:
    """1 when the monitor's SINR is at least the suspicious receiver's (ties succeed).

    Compared in cross-multiplied form, which never involves ``P_S``.
    """
    jam_d = abs(ch.h_ed @ design.w_t) ** 2
    sig_e = abs(np.vdot(design.w_r, ch.h_se)) ** 2
    loop = abs(np.vdot(design.w_r, ch.h_ee @ design.w_t)) ** 2
    lhs = sig_e * (design.p_d * jam_d + params.n_d)
    rhs = abs(ch.h_sd) ** 2 * (params.rho * design.p_d * loop + params.n_e)
    return int(lhs >= rhs)


def p11_objective(params: SystemParams, ch: ChannelRealization, design: MonitorDesign) -> float:
    """``(SINR_D - SINR_E) / P_S``; the design succeeds iff this is <= 0."""
    sinr_d, sinr_e = sinr_pair(params, ch, design)
    return (sinr_d - sinr_e) / params.p_s
