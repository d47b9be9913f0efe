"""Closed-form optimal jamming power.

The SISO, SIMO and fixed MRT/MRC objectives all have the shape

    f(x) = A / (e x + N_D) - B / (k x + N_E),     0 <= x <= P_J,

with ``sign f'(x) = sign(x * delta1 - delta2)``.  One case split
(:func:`branch_power`) therefore serves all three; the per-configuration
functions only supply the channel-dependent coefficients.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .model import ChannelRealization, SchemeInapplicable, SystemParams

__all__ = [
    "Branch",
    "PowerDecision",
    "PowerCoefficients",
    "branch_power",
    "siso_coefficients",
    "simo_coefficients",
    "mrt_mrc_coefficients",
    "optimal_power_siso",
    "optimal_power_simo",
    "optimal_power_mrt_mrc",
    "grid_power_oracle",
    "grid_power_argmin",
    "power_objective",
    "power_objective_derivative",
]


class Branch(enum.Enum):
    FULL = "Full"
    ZERO = "Zero"
    INTERIOR = "Interior"


@dataclass(frozen=True)
class PowerDecision:
    p_d: float
    branch: Branch
    delta1: float
    delta2: float


@dataclass(frozen=True)
class PowerCoefficients:
    """``u = sqrt(A e)`` and ``v = sqrt(B k)`` are the D-side and E-side
    sensitivities; ``e`` and ``k`` the jamming and loop gains. Arrays broadcast."""

    u: np.ndarray
    v: np.ndarray
    e: np.ndarray
    k: np.ndarray
    a: np.ndarray
    b: np.ndarray


def _zero_tol(*terms):
    return 1e-12 * sum(np.abs(t) for t in terms)


def branch_power(c: PowerCoefficients, n_d: float, n_e: float, p_j: float):
    """Vectorised case table; returns ``(p_d, branch_code, delta1, delta2)``.

    ``branch_code`` is 0 for Zero, 1 for Full, 2 for Interior.  ``delta1`` and
    ``delta2`` are reported in their textbook normalisation (divided by ``v``),
    which is infinite when the E-side term vanishes.
    """
    u, v, e, k = (np.asarray(x, dtype=float) for x in (c.u, c.v, c.e, c.k))
    # scaled deltas: same signs and ratio as the textbook ones, finite at v = 0
    d1 = v * e - u * k
    d2 = u * n_e - v * n_d
    d1 = np.where(np.abs(d1) <= _zero_tol(v * e, u * k), 0.0, d1)
    d2 = np.where(np.abs(d2) <= _zero_tol(u * n_e, v * n_d), 0.0, d2)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(d1 != 0, d2 / np.where(d1 != 0, d1, 1.0), np.inf)
        # f(P_J) <= f(0), written as in the theorem statements
        full_beats_zero = n_d * v**2 * (p_j * e + n_d) <= n_e * u**2 * (p_j * k + n_e)

    pos1, zero1, neg1 = d1 > 0, d1 == 0, d1 < 0
    pos2, neg2 = d2 > 0, d2 < 0

    interior = pos1 & pos2 & (ratio < p_j)
    full = (
        (pos1 & pos2 & (ratio >= p_j))
        | (zero1 & pos2)
        | (neg1 & ~neg2)
        | (neg1 & neg2 & (ratio < p_j) & full_beats_zero)
    )
    code = np.where(interior, 2, np.where(full, 1, 0))
    p = np.where(interior, np.where(interior, ratio, 0.0), np.where(full, p_j, 0.0))

    with np.errstate(divide="ignore", invalid="ignore"):
        delta1 = np.where(v > 0, d1 / np.where(v > 0, v, 1.0), np.where(u * k > 0, -np.inf, e))
        delta2 = np.where(v > 0, d2 / np.where(v > 0, v, 1.0), np.where(u > 0, np.inf, -n_d))
    return p, code, delta1, delta2


def _decision(c: PowerCoefficients, params: SystemParams) -> PowerDecision:
    p, code, d1, d2 = branch_power(c, params.n_d, params.n_e, params.p_j_max)
    branch = {0: Branch.ZERO, 1: Branch.FULL, 2: Branch.INTERIOR}[int(code)]
    return PowerDecision(float(p), branch, float(d1), float(d2))


def siso_coefficients(h_sd, h_se, h_ed, h_ee, rho) -> PowerCoefficients:
    g_sd, g_se, g_ed, g_ee = (np.abs(x) ** 2 for x in (h_sd, h_se, h_ed, h_ee))
    return PowerCoefficients(
        u=np.sqrt(g_sd * g_ed),
        v=np.sqrt(rho * g_ee * g_se),
        e=g_ed,
        k=rho * g_ee,
        a=g_sd,
        b=g_se,
    )


def simo_coefficients(h_sd, h_se, h_ed, h_ee, rho, n_e) -> PowerCoefficients:
    """``h_se`` and ``h_ee`` are length-``n_r`` columns (last axis).

    The SIMO objective is ``N_E`` times the generic one with
    ``A = |h_sd|^2``, ``B = |h_se^H h_ee|^2 / ||h_ee||^2`` after the
    closed-form combiner, up to an additive constant.
    """
    g_sd = np.abs(h_sd) ** 2
    g_ed = np.abs(h_ed) ** 2
    cross = np.abs(np.sum(np.conj(h_se) * h_ee, axis=-1)) ** 2
    loop = np.sum(np.abs(h_ee) ** 2, axis=-1)
    with np.errstate(divide="ignore", invalid="ignore"):
        b = np.where(loop > 0, cross / np.where(loop > 0, loop, 1.0), 0.0)
    return PowerCoefficients(
        u=np.sqrt(g_sd * g_ed),
        v=np.sqrt(rho * cross),
        e=g_ed,
        k=rho * loop,
        a=g_sd,
        b=b,
    )


def mrt_mrc_coefficients(h_sd, h_se, h_ed, h_ee, rho) -> PowerCoefficients:
    """Coefficients for fixed MRT transmit and MRC receive beamformers."""
    g_sd = np.abs(h_sd) ** 2
    s = np.sum(np.abs(h_se) ** 2, axis=-1)
    e = np.sum(np.abs(h_ed) ** 2, axis=-1)
    # h_se^H H_ee h_ed^H
    cross = np.einsum("...r,...rt,...t->...", np.conj(h_se), h_ee, np.conj(h_ed))
    big_g = np.abs(cross) ** 2
    with np.errstate(divide="ignore", invalid="ignore"):
        gamma = np.where(s * e > 0, big_g / np.where(s * e > 0, s * e, 1.0), 0.0)
    return PowerCoefficients(
        u=np.sqrt(g_sd * e),
        v=np.sqrt(rho * gamma * s),
        e=e,
        k=rho * gamma,
        a=g_sd,
        b=s,
    )


def _check_dims(params, ch, n_t=None, n_r=None):
    if n_t is not None and ch.n_t != n_t:
        raise SchemeInapplicable(f"expected {n_t} transmit antennas, got {ch.n_t}")
    if n_r is not None and ch.n_r != n_r:
        raise SchemeInapplicable(f"expected {n_r} receive antennas, got {ch.n_r}")


def optimal_power_siso(params: SystemParams, ch: ChannelRealization) -> PowerDecision:
    """Optimal jamming power for a single-antenna monitor."""
    _check_dims(params, ch, 1, 1)
    c = siso_coefficients(ch.h_sd, ch.h_se[0], ch.h_ed[0], ch.h_ee[0, 0], params.rho)
    return _decision(c, params)


def optimal_power_simo(params: SystemParams, ch: ChannelRealization) -> PowerDecision:
    """Optimal jamming power for one transmit antenna and MMSE combining."""
    _check_dims(params, ch, n_t=1)
    c = simo_coefficients(ch.h_sd, ch.h_se, ch.h_ed[0], ch.h_ee[:, 0], params.rho, params.n_e)
    return _decision(c, params)


def optimal_power_mrt_mrc(params: SystemParams, ch: ChannelRealization) -> PowerDecision:
    """Optimal jamming power once MRT and MRC beamformers are fixed."""
    c = mrt_mrc_coefficients(ch.h_sd, ch.h_se, ch.h_ed, ch.h_ee, params.rho)
    return _decision(c, params)


def power_objective(c: PowerCoefficients, n_d: float, n_e: float) -> Callable:
    """``f(x) = A/(e x + N_D) - B/(k x + N_E)`` for the given coefficients."""

    def f(x):
        x = np.asarray(x, dtype=float)
        return c.a / (c.e * x + n_d) - c.b / (c.k * x + n_e)

    return f


def power_objective_derivative(c: PowerCoefficients, n_d: float, n_e: float) -> Callable:
    def df(x):
        x = np.asarray(x, dtype=float)
        return -c.a * c.e / (c.e * x + n_d) ** 2 + c.b * c.k / (c.k * x + n_e) ** 2

    return df


def grid_power_oracle(objective: Callable, p_j: float, points: int = 10**6) -> float:
    """Brute-force argmin of ``objective`` on a uniform grid over ``[0, p_j]``."""
    if points < 1000:
        raise ValueError("use at least 1000 grid points")
    grid = np.linspace(0.0, p_j, int(points))
    vals = np.asarray(objective(grid), dtype=float)
    return float(grid[int(np.argmin(vals))])


def grid_power_argmin(c: PowerCoefficients, n_d: float, n_e: float, p_j: float, points: int = 10**6) -> np.ndarray:
    """:func:`grid_power_oracle` for many coefficient sets at once.

    Evaluates ``A/(e x + N_D) - B/(k x + N_E)`` on the same uniform grid for
    every realization (in place, one realization at a time) and returns the
    grid argmins.
    """
    if points < 1000:
        raise ValueError("use at least 1000 grid points")
    grid = np.linspace(0.0, p_j, int(points))
    d_side = np.empty_like(grid)
    e_side = np.empty_like(grid)
    coef = np.broadcast_arrays(*(np.atleast_1d(np.asarray(x, dtype=float)) for x in (c.a, c.e, c.b, c.k)))
    out = np.empty(coef[0].shape)
    for i, (a, e, b, k) in enumerate(zip(*coef)):
        np.multiply(grid, e, out=d_side)
        np.add(d_side, n_d, out=d_side)
        np.divide(a, d_side, out=d_side)
        np.multiply(grid, k, out=e_side)
        np.add(e_side, n_e, out=e_side)
        np.divide(b, e_side, out=e_side)
        np.subtract(d_side, e_side, out=d_side)
        out[i] = grid[int(np.argmin(d_side))]
    return out
