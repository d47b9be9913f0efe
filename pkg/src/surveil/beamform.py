"""Transmit/receive beamformer constructions for every monitoring scheme.

Two interfaces are provided.  The ``*_design`` functions take one
:class:`~surveil.model.ChannelRealization` and return a
:class:`~surveil.model.MonitorDesign`; :func:`batch_designs` builds the same
designs for a whole :class:`~surveil.model.ChannelBatch` at once and is what
the Monte Carlo engine uses.  Tests cross-check the two paths.

Two-stage MIMO design
---------------------
With full jamming power and the MMSE combiner, the monitor's figure of merit
for a unit transmit vector ``w`` is

    F(w) = alpha / y(w) + g(w),    y(w) = 1 + P_J |h_ed w|^2 / N_D,
    g(w) = k |h_se^H H_ee w|^2 / (1 + k ||H_ee w||^2),  k = rho P_J / N_E,

with ``alpha = N_E |h_sd|^2 / N_D``; the design succeeds iff
``F(w) <= ||h_se||^2``.  The outer search runs over ``y``; the inner problem
minimises ``g`` on the level set ``y(w) = y``.  The inner problem is solved
either as an SDP (:func:`surveil.sdp.mimo_inner_sdp`) or through its
Lagrangian dual

    max_mu  lambda_min(Q - mu E_y ; D),

a concave scalar maximisation solved by bisection on its supergradient.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .model import ChannelBatch, ChannelRealization, MonitorDesign, SchemeInapplicable, SystemParams
from .numerics import hermitian_eig, min_generalized_eigvec, normalize_phase
from .power import (
    branch_power,
    mrt_mrc_coefficients,
    optimal_power_mrt_mrc,
    optimal_power_simo,
    optimal_power_siso,
    simo_coefficients,
    siso_coefficients,
)
from .sdp import (
    RankContext,
    SolverError,
    charnes_cooper_recover,
    extract_rank_one,
    miso_fractional_sdp,
    mimo_inner_sdp,
    solve_sdp,
)

__all__ = [
    "SchemeId",
    "scheme_array",
    "receive_mmse_vector",
    "siso_optimal_design",
    "simo_optimal_design",
    "miso_optimal_design",
    "miso_sdp_design",
    "miso_fractional_objective",
    "mimo_optimal_design",
    "mimo_inner_solve",
    "InnerSolution",
    "tzf_mrc_design",
    "mrt_rzf_design",
    "mrt_mrc_design",
    "passive_design",
    "constant_full_design",
    "design_scheme",
    "evaluate_scheme",
    "BatchDesign",
    "batch_designs",
    "batch_objective",
    "batch_success",
]


class SchemeId(enum.Enum):
    SISO_OPT = "SISO_OPT"
    SIMO_OPT = "SIMO_OPT"
    MISO_OPT = "MISO_OPT"
    MIMO_OPT = "MIMO_OPT"
    TZF_MRC = "TZF_MRC"
    MRT_RZF = "MRT_RZF"
    MRT_MRC = "MRT_MRC"
    PASSIVE = "PASSIVE"
    CONSTANT_FULL = "CONSTANT_FULL"

    @classmethod
    def parse(cls, name: str) -> "SchemeId":
        try:
            return cls[name.strip().upper()]
        except KeyError:
            raise ValueError(f"unknown scheme {name!r}; choose from {[s.name for s in cls]}") from None


def scheme_array(scheme: SchemeId, params: SystemParams) -> tuple[int, int]:
    """Antennas ``(n_t, n_r)`` a scheme uses out of the monitor's full array.

    Single-antenna schemes use the first transmit and first receive antenna;
    SIMO uses one transmit antenna, MISO one receive antenna.  Schemes are
    thus comparable on common channel draws.
    """
    if scheme in (SchemeId.SISO_OPT, SchemeId.PASSIVE, SchemeId.CONSTANT_FULL):
        return 1, 1
    if scheme is SchemeId.SIMO_OPT:
        return 1, params.n_r
    if scheme is SchemeId.MISO_OPT:
        return params.n_t, 1
    if scheme is SchemeId.TZF_MRC and params.n_t < 2:
        raise SchemeInapplicable("TZF/MRC needs at least two transmit antennas")
    if scheme is SchemeId.MRT_RZF and params.n_r < 2:
        raise SchemeInapplicable("MRT/RZF needs at least two receive antennas")
    return params.n_t, params.n_r


def _unit(v):
    v = np.asarray(v, dtype=complex)
    n = np.linalg.norm(v)
    if n == 0:
        out = np.zeros_like(v)
        out[0] = 1.0
        return out
    return normalize_phase(v / n)


def receive_mmse_vector(params: SystemParams, ch: ChannelRealization, w_t: np.ndarray, p_d: float) -> np.ndarray:
    """Unit combiner maximising the monitor's SINR for a given jamming vector."""
    if p_d < 0:
        raise ValueError("jamming power must be non-negative")
    u = ch.h_ee @ np.asarray(w_t, dtype=complex)
    c = params.rho * p_d / params.n_e
    w = ch.h_se - c * u * np.vdot(u, ch.h_se) / (1.0 + c * np.vdot(u, u).real)
    return _unit(w)


def _check(ch, n_t=None, n_r=None):
    if n_t is not None and ch.n_t != n_t:
        raise SchemeInapplicable(f"expected {n_t} transmit antennas, got {ch.n_t}")
    if n_r is not None and ch.n_r != n_r:
        raise SchemeInapplicable(f"expected {n_r} receive antennas, got {ch.n_r}")


def siso_optimal_design(params: SystemParams, ch: ChannelRealization) -> MonitorDesign:
    dec = optimal_power_siso(params, ch)
    return MonitorDesign(dec.p_d, [1.0], [1.0], notes=(f"branch={dec.branch.value}",))


def passive_design(params: SystemParams, ch: ChannelRealization) -> MonitorDesign:
    _check(ch, 1, 1)
    return MonitorDesign(0.0, [1.0], [1.0])


def constant_full_design(params: SystemParams, ch: ChannelRealization) -> MonitorDesign:
    _check(ch, 1, 1)
    return MonitorDesign(params.p_j_max, [1.0], [1.0])


def simo_optimal_design(params: SystemParams, ch: ChannelRealization) -> MonitorDesign:
    dec = optimal_power_simo(params, ch)
    w_t = np.ones(1, dtype=complex)
    return MonitorDesign(dec.p_d, w_t, receive_mmse_vector(params, ch, w_t, dec.p_d), notes=(f"branch={dec.branch.value}",))


def _miso_pencil(params, ch):
    h_ee = ch.h_ee[0]
    n = ch.n_t
    a = params.rho * params.p_j_max * np.outer(h_ee.conj(), h_ee) + params.n_e * np.eye(n)
    b = params.p_j_max * np.outer(ch.h_ed.conj(), ch.h_ed) + params.n_d * np.eye(n)
    return a, b


def miso_optimal_design(params: SystemParams, ch: ChannelRealization) -> MonitorDesign:
    """Full power and the minimum generalized eigenvector of the loop/jamming pencil."""
    _check(ch, n_r=1)
    _, w_t = min_generalized_eigvec(*_miso_pencil(params, ch))
    return MonitorDesign(params.p_j_max, w_t, [1.0])


def miso_sdp_design(params: SystemParams, ch: ChannelRealization) -> tuple[MonitorDesign, float]:
    """MISO design through the Charnes-Cooper SDP; returns ``(design, eigenvalue ratio)``."""
    _check(ch, n_r=1)
    sol = solve_sdp(miso_fractional_sdp(params, ch))
    res = extract_rank_one(charnes_cooper_recover(sol), RankContext.P9)
    return MonitorDesign(params.p_j_max, res.vector, [1.0], notes=("sdp",)), res.ratio


def miso_fractional_objective(params: SystemParams, ch: ChannelRealization, w_t) -> float:
    """Full-power ratio ``(rho P_J |h_ee w|^2 + N_E) / (P_J |h_ed w|^2 + N_D)`` minimized by the MISO designs."""
    w = np.asarray(w_t, dtype=complex).reshape(-1)
    w = w / np.linalg.norm(w)
    p_j = params.p_j_max
    loop = abs(ch.h_ee[0] @ w) ** 2
    jam = abs(ch.h_ed @ w) ** 2
    return (params.rho * p_j * loop + params.n_e) / (p_j * jam + params.n_d)


def tzf_mrc_design(params: SystemParams, ch: ChannelRealization) -> MonitorDesign:
    """Null the loop interference seen by the MRC combiner, then maximise jamming."""
    if ch.n_t < 2:
        raise SchemeInapplicable("TZF/MRC needs at least two transmit antennas")
    g = ch.h_ee.conj().T @ ch.h_se
    notes = []
    proj = np.eye(ch.n_t, dtype=complex)
    if np.linalg.norm(g) > 0:
        proj -= np.outer(g, g.conj()) / np.vdot(g, g).real
    w = proj @ ch.h_ed.conj()
    if np.linalg.norm(w) <= 1e-14 * max(np.linalg.norm(ch.h_ed), 1e-300):
        _, vecs = hermitian_eig(proj)
        w = vecs[:, -1]
        notes.append("zf-fallback")
    return MonitorDesign(params.p_j_max, _unit(w), _unit(ch.h_se), notes=tuple(notes))


def mrt_rzf_design(params: SystemParams, ch: ChannelRealization) -> MonitorDesign:
    """Maximum-ratio jamming with a receive combiner that nulls the loop."""
    if ch.n_r < 2:
        raise SchemeInapplicable("MRT/RZF needs at least two receive antennas")
    w_t = _unit(ch.h_ed.conj())
    p = ch.h_ee @ ch.h_ed.conj()
    notes = []
    proj = np.eye(ch.n_r, dtype=complex)
    if np.linalg.norm(p) > 0:
        proj -= np.outer(p, p.conj()) / np.vdot(p, p).real
    w = proj @ ch.h_se
    if np.linalg.norm(w) <= 1e-14 * max(np.linalg.norm(ch.h_se), 1e-300):
        _, vecs = hermitian_eig(proj)
        w = vecs[:, -1]
        notes.append("zf-fallback")
    return MonitorDesign(params.p_j_max, w_t, _unit(w), notes=tuple(notes))


def mrt_mrc_design(params: SystemParams, ch: ChannelRealization) -> MonitorDesign:
    dec = optimal_power_mrt_mrc(params, ch)
    return MonitorDesign(dec.p_d, _unit(ch.h_ed.conj()), _unit(ch.h_se), notes=(f"branch={dec.branch.value}",))


# -- MIMO two-stage design ---------------------------------------------------


@dataclass(frozen=True)
class InnerSolution:
    """Inner minimiser at one jamming level ``y``."""

    y: float
    w_t: np.ndarray
    value: float  # g(w_t), an upper bound on the inner optimum
    lower: float  # dual lower bound (equal to ``value`` for the SDP path up to solver tolerance)
    eig_ratio: float
    recovered: bool


def _mimo_matrices(params, h_se, h_ed, h_ee):
    """Q, D, B and the whitening factor for a batch (leading axes broadcast)."""
    kr = params.rho * params.p_j_max / params.n_e
    g = np.einsum("...rt,...r->...t", h_ee.conj(), h_se)  # H_ee^H h_se
    q = kr * g[..., :, None] * g.conj()[..., None, :]
    n = h_ed.shape[-1]
    d = np.eye(n) + kr * np.einsum("...rt,...rs->...ts", h_ee.conj(), h_ee)
    b = (params.p_j_max / params.n_d) * h_ed.conj()[..., :, None] * h_ed[..., None, :]
    lchol = np.linalg.cholesky(d)
    linv = np.linalg.inv(lchol)
    return q, d, b, linv


def _whiten(m, linv):
    return linv @ m @ np.conj(np.swapaxes(linv, -1, -2))


def _dual_inner(qt, bt, dt, y, max_iter=200):
    """Vectorised dual solve of the inner problem in whitened coordinates.

    ``qt``, ``bt``, ``dt`` are ``L^-1 Q L^-H``, ``L^-1 B L^-H`` and
    ``L^-1 L^-H``; ``y`` is broadcast over the leading axes.  Returns the
    whitened primal vector, its value and the dual lower bound.
    """
    et = bt - (y - 1.0)[..., None, None] * dt

    def probe(mu):
        vals, vecs = np.linalg.eigh(qt - mu[..., None, None] * et)
        v = vecs[..., :, 0]
        gq = np.einsum("...i,...ij,...j->...", v.conj(), et, v).real
        return vals[..., 0], v, gq

    scale = np.linalg.norm(qt, axis=(-2, -1)) / np.maximum(np.linalg.norm(et, axis=(-2, -1)), 1e-300) + 1e-300
    lo = -scale.copy()
    hi = scale.copy()
    _, v_lo, g_lo = probe(lo)
    _, v_hi, g_hi = probe(hi)
    for _ in range(max_iter):
        need_lo = g_lo > 0
        need_hi = g_hi < 0
        if not (need_lo.any() or need_hi.any()):
            break
        lo = np.where(need_lo, 4.0 * lo, lo)
        hi = np.where(need_hi, 4.0 * hi, hi)
        _, v2, g2 = probe(lo)
        v_lo = np.where(need_lo[..., None], v2, v_lo)
        g_lo = np.where(need_lo, g2, g_lo)
        _, v2, g2 = probe(hi)
        v_hi = np.where(need_hi[..., None], v2, v_hi)
        g_hi = np.where(need_hi, g2, g_hi)
    for _ in range(max_iter):
        width = hi - lo
        if np.all(width <= 1e-10 * np.maximum(np.abs(lo) + np.abs(hi), scale)):
            break
        mid = 0.5 * (lo + hi)
        _, v2, g2 = probe(mid)
        go_lo = g2 <= 0  # supergradient >= 0: optimum lies to the right
        lo = np.where(go_lo, mid, lo)
        v_lo = np.where(go_lo[..., None], v2, v_lo)
        g_lo = np.where(go_lo, g2, g_lo)
        hi = np.where(go_lo, hi, mid)
        v_hi = np.where(go_lo[..., None], v_hi, v2)
        g_hi = np.where(go_lo, g_hi, g2)
    lower, _, _ = probe(0.5 * (lo + hi))

    # mix the two bracketing eigenvectors so the level-set constraint holds exactly
    cross = np.einsum("...i,...ij,...j->...", v_lo.conj(), et, v_hi)
    mag = np.abs(cross)
    phase = np.where(mag > 0, 1j * np.conj(cross) / np.where(mag > 0, mag, 1.0), 1.0)
    a = np.minimum(g_lo, 0.0)
    b = np.maximum(g_hi, 0.0)
    den = b - a
    safe = den > 0
    c2 = np.where(safe, b / np.where(safe, den, 1.0), 1.0)
    v = np.sqrt(c2)[..., None] * v_lo + (np.sqrt(1.0 - c2) * phase)[..., None] * v_hi
    v = v / np.linalg.norm(v, axis=-1, keepdims=True)
    value = np.einsum("...i,...ij,...j->...", v.conj(), qt, v).real
    return v, value, lower


def _batch_unit(w):
    nrm = np.linalg.norm(w, axis=-1, keepdims=True)
    w = w / np.where(nrm > 0, nrm, 1.0)
    idx = np.argmax(np.abs(w), axis=-1)
    lead = np.take_along_axis(w, idx[..., None], axis=-1)
    mag = np.abs(lead)
    return w * np.where(mag > 0, mag / np.where(mag > 0, lead, 1.0), 1.0)


def batch_mmse(params, h_se, h_ee, w_t, p_d):
    u = np.einsum("...rt,...t->...r", h_ee, w_t)
    c = params.rho * np.asarray(p_d, dtype=float) / params.n_e
    uh = np.einsum("...r,...r->...", u.conj(), h_se)
    uu = np.einsum("...r,...r->...", u.conj(), u).real
    w = h_se - (c * uh / (1.0 + c * uu))[..., None] * u
    return _batch_unit(w)


def batch_objective(params, h_sd, h_se, h_ed, h_ee, p_d, w_t, w_r):
    """``(SINR_D - SINR_E) / P_S`` for stacked designs; success iff <= 0."""
    jam = np.abs(np.einsum("...t,...t->...", h_ed, w_t)) ** 2
    u = np.einsum("...rt,...t->...r", h_ee, w_t)
    sig = np.abs(np.einsum("...r,...r->...", w_r.conj(), h_se)) ** 2
    loop = np.abs(np.einsum("...r,...r->...", w_r.conj(), u)) ** 2
    return np.abs(h_sd) ** 2 / (p_d * jam + params.n_d) - sig / (params.rho * p_d * loop + params.n_e)


def batch_success(params, h_sd, h_se, h_ed, h_ee, p_d, w_t, w_r):
    """Cross-multiplied success test, ties counted as success."""
    jam = np.abs(np.einsum("...t,...t->...", h_ed, w_t)) ** 2
    u = np.einsum("...rt,...t->...r", h_ee, w_t)
    sig = np.abs(np.einsum("...r,...r->...", w_r.conj(), h_se)) ** 2
    loop = np.abs(np.einsum("...r,...r->...", w_r.conj(), u)) ** 2
    return sig * (p_d * jam + params.n_d) >= np.abs(h_sd) ** 2 * (params.rho * p_d * loop + params.n_e)


def _full_power_objective(params, h_sd, h_se, h_ed, h_ee, w_t):
    p = params.p_j_max
    w_r = batch_mmse(params, h_se, h_ee, w_t, p)
    return batch_objective(params, h_sd, h_se, h_ed, h_ee, p, w_t, w_r)


def _batch_tzf(h_se, h_ed, h_ee):
    g = np.einsum("...rt,...r->...t", h_ee.conj(), h_se)
    gg = np.einsum("...t,...t->...", g.conj(), g).real
    hd = h_ed.conj()
    coef = np.einsum("...t,...t->...", g.conj(), hd) / np.where(gg > 0, gg, 1.0)
    w = hd - coef[..., None] * g
    return _batch_unit(w)


def _batch_rzf(h_se, h_ed, h_ee):
    p = np.einsum("...rt,...t->...r", h_ee, h_ed.conj())
    pp = np.einsum("...r,...r->...", p.conj(), p).real
    coef = np.einsum("...r,...r->...", p.conj(), h_se) / np.where(pp > 0, pp, 1.0)
    return _batch_unit(h_se - coef[..., None] * p)


def _batch_min_gen_eigvec(a, b):
    linv = np.linalg.inv(np.linalg.cholesky(b))
    _, vecs = np.linalg.eigh(_whiten(a, linv))
    w = np.einsum("...ji,...j->...i", linv.conj(), vecs[..., :, 0])  # L^-H v
    return _batch_unit(w)


def _null_direction_min(q, d, h_ed):
    """Minimise ``w^H q w / w^H d w`` over ``w`` orthogonal to ``h_ed^H`` (``n_t >= 2``)."""
    n = h_ed.shape[-1]
    hd = h_ed.conj()
    hh = np.einsum("...t,...t->...", h_ed, hd).real
    proj = np.eye(n) - hd[..., :, None] * h_ed[..., None, :] / hh[..., None, None]
    _, vecs = np.linalg.eigh(0.5 * (proj + np.conj(np.swapaxes(proj, -1, -2))))
    u = vecs[..., :, 1:]  # eigenvalue-one block
    uh = np.conj(np.swapaxes(u, -1, -2))
    w_small = _batch_min_gen_eigvec(uh @ q @ u, uh @ d @ u)
    return _batch_unit(np.einsum("...ij,...j->...i", u, w_small))


_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


def _mimo_batch(params, h_sd, h_se, h_ed, h_ee, y_grid=64, rel_width=1e-6, decide_only=False):
    """Vectorised two-stage design (dual inner solver) for ``n_t >= 2``.

    Returns ``(w_t, objective)`` with full jamming power and MMSE combining.
    With ``decide_only`` the search stops, per trial, as soon as the outcome
    is settled: some visited design already succeeds (objective <= 0), or
    ``alpha / y_max > ||h_se||^2`` proves that no design can.
    """
    t = h_sd.shape[0]
    q, d, b, linv = _mimo_matrices(params, h_se, h_ed, h_ee)
    y_max = 1.0 + params.p_j_max / params.n_d * np.sum(np.abs(h_ed) ** 2, axis=-1)

    # candidates that are always available: MRT (y = y_max), the y = 1 subspace optimum, TZF
    cands = [_batch_unit(h_ed.conj()), _null_direction_min(q, d, h_ed), _batch_tzf(h_se, h_ed, h_ee)]
    best_w = cands[0]
    best_f = _full_power_objective(params, h_sd, h_se, h_ed, h_ee, best_w)
    for w in cands[1:]:
        f = _full_power_objective(params, h_sd, h_se, h_ed, h_ee, w)
        better = f < best_f
        best_w = np.where(better[:, None], w, best_w)
        best_f = np.where(better, f, best_f)

    def open_trials():
        if not decide_only:
            return np.arange(t)
        alpha = params.n_e * np.abs(h_sd) ** 2 / params.n_d
        hopeless = alpha / y_max > np.sum(np.abs(h_se) ** 2, axis=-1)
        return np.flatnonzero((best_f > 0) & ~hopeless)

    def offer(idx, f, w):
        better = f < best_f[idx]
        best_f[idx[better]] = f[better]
        best_w[idx[better]] = w[better]

    idx = open_trials()
    if idx.size == 0:
        return best_w, best_f
    qt, bt = _whiten(q[idx], linv[idx]), _whiten(b[idx], linv[idx])
    dt = linv[idx] @ np.conj(np.swapaxes(linv[idx], -1, -2))
    sub = [x[idx] for x in (h_sd, h_se, h_ed, h_ee)]
    li, ym = linv[idx], y_max[idx]
    m = idx.size

    # coarse grid over interior y values, visited coarse-to-fine so that
    # decided trials drop out early; undecided trials see every point
    frac = np.linspace(0.0, 1.0, y_grid)[1:-1]
    ys = 1.0 + (ym - 1.0)[:, None] * frac[None, :]
    n_grid = ys.shape[1]
    fg = np.full((m, n_grid), np.inf)
    seen = np.zeros(n_grid, dtype=bool)
    rows = np.arange(m)
    for stride in (16, 8, 4, 2, 1):
        cols = np.flatnonzero(~seen & (np.arange(n_grid) % stride == 0))
        if cols.size == 0:
            continue
        seen[cols] = True
        if decide_only:
            rows = rows[best_f[idx[rows]] > 0]
            if rows.size == 0:
                break
        r, c_ = rows[:, None], cols[None, :]
        shape = (rows.size, cols.size)
        rep = lambda a: np.broadcast_to(a[rows][:, None], shape + a.shape[1:])  # noqa: E731
        v, _, _ = _dual_inner(rep(qt), rep(bt), rep(dt), ys[r, c_])
        w_blk = _batch_unit(np.einsum("tgji,tgj->tgi", rep(li).conj(), v))
        f_blk = _full_power_objective(params, *(rep(x) for x in sub), w_blk)
        fg[r, c_] = f_blk
        j = np.argmin(f_blk, axis=1)
        offer(idx[rows], f_blk[np.arange(rows.size), j], w_blk[np.arange(rows.size), j])
    k = np.argmin(fg, axis=1)

    keep = best_f[idx] > 0 if decide_only else np.ones(m, dtype=bool)
    if not keep.any():
        return best_w, best_f
    idx, k = idx[keep], k[keep]
    qt, bt, dt, li, ym = qt[keep], bt[keep], dt[keep], li[keep], ym[keep]
    sub = [x[keep] for x in sub]
    full = np.concatenate([np.ones((idx.size, 1)), ys[keep], ym[:, None]], axis=1)
    kk = np.arange(idx.size)
    lo = full[kk, k]  # grid index k in ys is k + 1 in full
    hi = full[kk, k + 2]
    target = rel_width * (ym - 1.0)

    def f_at(y):
        v, _, _ = _dual_inner(qt, bt, dt, y)
        w = _batch_unit(np.einsum("...ji,...j->...i", li.conj(), v))
        return _full_power_objective(params, *sub, w), w

    # golden-section refinement on the bracket around the best grid point
    x1 = hi - _GOLDEN * (hi - lo)
    x2 = lo + _GOLDEN * (hi - lo)
    f1, w1 = f_at(x1)
    f2, w2 = f_at(x2)
    offer(idx, f1, w1)
    offer(idx, f2, w2)
    for _ in range(200):
        if np.all(hi - lo <= target):
            break
        left = f1 <= f2
        hi = np.where(left, x2, hi)
        lo = np.where(left, lo, x1)
        nx = np.where(left, hi - _GOLDEN * (hi - lo), lo + _GOLDEN * (hi - lo))
        fn, wn = f_at(nx)
        offer(idx, fn, wn)
        lc = left[:, None]
        # left move: (x1, x2) <- (new, x1); right move: (x1, x2) <- (x2, new)
        x1, x2 = np.where(left, nx, x2), np.where(left, x1, nx)
        f1, f2 = np.where(left, fn, f2), np.where(left, f1, fn)
        w1, w2 = np.where(lc, wn, w2), np.where(lc, w1, wn)
    return best_w, best_f


def mimo_inner_solve(params: SystemParams, ch: ChannelRealization, y: float, inner: str = "sdp") -> InnerSolution:
    """Minimise the loop-leakage term on the level set ``y(w) = y`` (``1 < y < y_max``)."""
    q, d, b, linv = _mimo_matrices(params, ch.h_se, ch.h_ed, ch.h_ee)
    if inner == "dual":
        dt = linv @ linv.conj().T
        v, value, lower = _dual_inner(_whiten(q, linv), _whiten(b, linv), dt, np.asarray(y, dtype=float))
        w = _unit(linv.conj().T @ v)
        return InnerSolution(float(y), w, float(value), float(lower), 0.0, False)
    if inner != "sdp":
        raise ValueError("inner must be 'sdp' or 'dual'")
    sol = solve_sdp(mimo_inner_sdp(params, ch, y))
    w_mat = charnes_cooper_recover(sol)
    res = extract_rank_one(w_mat / np.trace(w_mat).real, RankContext.P15, h_ed=ch.h_ed)
    w = res.vector
    value = float(np.real(w.conj() @ q @ w) / np.real(w.conj() @ d @ w))
    return InnerSolution(float(y), w, value, float(sol.objective), res.ratio, res.recovered)


def mimo_optimal_design(
    params: SystemParams,
    ch: ChannelRealization,
    y_grid: int = 64,
    inner: str = "sdp",
) -> MonitorDesign:
    """Two-stage MIMO design: grid plus golden-section search over the jamming level.

    ``inner='sdp'`` solves each inner problem as an SDP with rank-one
    extraction; ``inner='dual'`` uses the (much faster) dual bisection.
    The returned design is the best among all inner minimisers visited and
    the TZF, MRT and ``y = 1`` candidates, all at full jamming power.
    """
    if y_grid < 3:
        raise ValueError("y_grid must be at least 3")
    if ch.n_t == 1:
        design = simo_optimal_design(params, ch)
        return MonitorDesign(design.p_d, design.w_t, design.w_r, notes=design.notes + ("single-transmit",))
    args = tuple(x[None] for x in (np.asarray(ch.h_sd), ch.h_se, ch.h_ed, ch.h_ee))
    if inner == "dual":
        w, _ = _mimo_batch(params, *args, y_grid=y_grid)
        w_t = _unit(w[0])
        return MonitorDesign(params.p_j_max, w_t, receive_mmse_vector(params, ch, w_t, params.p_j_max), notes=("dual",))
    if inner != "sdp":
        raise ValueError("inner must be 'sdp' or 'dual'")

    p = params.p_j_max
    q, d, _, _ = _mimo_matrices(params, ch.h_se, ch.h_ed, ch.h_ee)
    notes = ["sdp"]

    def full_obj(w):
        return float(_full_power_objective(params, *args, w[None])[0])

    cands = [_unit(ch.h_ed.conj()), _unit(_null_direction_min(q[None], d[None], ch.h_ed[None])[0]),
             _unit(_batch_tzf(ch.h_se, ch.h_ed, ch.h_ee))]
    best = min(((full_obj(w), i, w) for i, w in enumerate(cands)), key=lambda r: r[:2])
    best_f, best_w = best[0], best[2]
    y_max = 1.0 + p / params.n_d * float(np.sum(np.abs(ch.h_ed) ** 2))
    alpha = params.n_e * abs(ch.h_sd) ** 2 / params.n_d

    def at(y):
        nonlocal best_f, best_w
        try:
            sol = mimo_inner_solve(params, ch, y, "sdp")
        except SolverError as exc:
            notes.append(f"skipped y={y:.6g}: {exc}")
            return np.inf
        if sol.recovered:
            notes.append(f"rank-one recovery at y={y:.6g}")
        f = full_obj(sol.w_t)
        if f < best_f:
            best_f, best_w = f, sol.w_t
        # the outer search ranks y by its own optimum; a recovered vector may sit at another level
        return alpha / y + sol.lower

    grid = 1.0 + (y_max - 1.0) * np.linspace(0.0, 1.0, y_grid)
    vals = np.array([np.inf] + [at(y) for y in grid[1:-1]] + [np.inf])
    k = int(np.argmin(vals))
    if np.isfinite(vals[k]):
        lo, hi = grid[max(k - 1, 0)], grid[min(k + 1, y_grid - 1)]
        target = 1e-6 * (y_max - 1.0)
        x1 = hi - _GOLDEN * (hi - lo)
        x2 = lo + _GOLDEN * (hi - lo)
        f1, f2 = at(x1), at(x2)
        while hi - lo > target:
            if f1 <= f2:
                hi, x2, f2 = x2, x1, f1
                x1 = hi - _GOLDEN * (hi - lo)
                f1 = at(x1)
            else:
                lo, x1, f1 = x1, x2, f2
                x2 = lo + _GOLDEN * (hi - lo)
                f2 = at(x2)
    w_t = _unit(best_w)
    return MonitorDesign(p, w_t, receive_mmse_vector(params, ch, w_t, p), notes=tuple(notes))


# -- dispatch ---------------------------------------------------------------

_SCALAR = {
    SchemeId.SISO_OPT: siso_optimal_design,
    SchemeId.SIMO_OPT: simo_optimal_design,
    SchemeId.MISO_OPT: miso_optimal_design,
    SchemeId.TZF_MRC: tzf_mrc_design,
    SchemeId.MRT_RZF: mrt_rzf_design,
    SchemeId.MRT_MRC: mrt_mrc_design,
    SchemeId.PASSIVE: passive_design,
    SchemeId.CONSTANT_FULL: constant_full_design,
}


def design_scheme(
    scheme: SchemeId, params: SystemParams, ch: ChannelRealization, inner: str = "dual"
) -> tuple[MonitorDesign, ChannelRealization]:
    """Design for ``scheme`` on its sub-array; returns the design and the restricted channel."""
    n_t, n_r = scheme_array(scheme, params)
    sub = ch.restrict(n_t, n_r)
    if scheme is SchemeId.MIMO_OPT:
        return mimo_optimal_design(params, sub, inner=inner), sub
    return _SCALAR[scheme](params, sub), sub


def evaluate_scheme(scheme: SchemeId, params: SystemParams, ch: ChannelRealization, inner: str = "dual"):
    """``(design, objective, success)`` for one realization."""
    from .model import p11_objective, success_indicator

    design, sub = design_scheme(scheme, params, ch, inner=inner)
    return design, p11_objective(params, sub, design), success_indicator(params, sub, design)


# -- batched designs ----------------------------------------------------------


@dataclass(frozen=True)
class BatchDesign:
    p_d: np.ndarray  # (T,)
    w_t: np.ndarray  # (T, n_t)
    w_r: np.ndarray  # (T, n_r)
    h_sd: np.ndarray
    h_se: np.ndarray
    h_ed: np.ndarray
    h_ee: np.ndarray

    def objective(self, params) -> np.ndarray:
        return batch_objective(params, self.h_sd, self.h_se, self.h_ed, self.h_ee, self.p_d, self.w_t, self.w_r)

    def success(self, params) -> np.ndarray:
        return batch_success(params, self.h_sd, self.h_se, self.h_ed, self.h_ee, self.p_d, self.w_t, self.w_r)


def _ones(t, n=1):
    return np.ones((t, n), dtype=complex)


def batch_designs(
    scheme: SchemeId, params: SystemParams, batch: ChannelBatch, y_grid: int = 64, decide_only: bool = False
) -> BatchDesign:
    """Designs for every realization in ``batch`` (restricted to the scheme's sub-array).

    ``decide_only`` affects MIMO_OPT only: the two-stage search stops on a
    trial once its success/outage outcome is settled, so the returned
    design has the optimal design's outcome but not necessarily its
    objective value.
    """
    n_t, n_r = scheme_array(scheme, params)
    sub = batch.restrict(n_t, n_r)
    h_sd, h_se, h_ed, h_ee = sub.h_sd, sub.h_se, sub.h_ed, sub.h_ee
    t = sub.trials
    p_j = params.p_j_max
    full = np.full(t, p_j)

    def make(p, w_t, w_r):
        return BatchDesign(np.asarray(p, dtype=float), w_t, w_r, h_sd, h_se, h_ed, h_ee)

    if scheme is SchemeId.PASSIVE:
        return make(np.zeros(t), _ones(t), _ones(t))
    if scheme is SchemeId.CONSTANT_FULL:
        return make(full, _ones(t), _ones(t))
    if scheme is SchemeId.SISO_OPT:
        c = siso_coefficients(h_sd, h_se[:, 0], h_ed[:, 0], h_ee[:, 0, 0], params.rho)
        p, *_ = branch_power(c, params.n_d, params.n_e, p_j)
        return make(p, _ones(t), _ones(t))
    if scheme is SchemeId.SIMO_OPT:
        c = simo_coefficients(h_sd, h_se, h_ed[:, 0], h_ee[:, :, 0], params.rho, params.n_e)
        p, *_ = branch_power(c, params.n_d, params.n_e, p_j)
        w_t = _ones(t)
        return make(p, w_t, batch_mmse(params, h_se, h_ee, w_t, p))
    if scheme is SchemeId.MISO_OPT:
        he = h_ee[:, 0, :]
        eye = np.eye(n_t)
        a = params.rho * p_j * he.conj()[:, :, None] * he[:, None, :] + params.n_e * eye
        b = p_j * h_ed.conj()[:, :, None] * h_ed[:, None, :] + params.n_d * eye
        return make(full, _batch_min_gen_eigvec(a, b), _ones(t))
    if scheme is SchemeId.TZF_MRC:
        return make(full, _batch_tzf(h_se, h_ed, h_ee), _batch_unit(h_se))
    if scheme is SchemeId.MRT_RZF:
        return make(full, _batch_unit(h_ed.conj()), _batch_rzf(h_se, h_ed, h_ee))
    if scheme is SchemeId.MRT_MRC:
        c = mrt_mrc_coefficients(h_sd, h_se, h_ed, h_ee, params.rho)
        p, *_ = branch_power(c, params.n_d, params.n_e, p_j)
        return make(p, _batch_unit(h_ed.conj()), _batch_unit(h_se))
    if scheme is SchemeId.MIMO_OPT:
        if n_t == 1:
            return batch_designs(SchemeId.SIMO_OPT, params.replace(n_t=1), batch)
        w_t = np.empty((t, n_t), dtype=complex)
        chunk = 512
        for s in range(0, t, chunk):
            sl = slice(s, s + chunk)
            w_t[sl], _ = _mimo_batch(
                params, h_sd[sl], h_se[sl], h_ed[sl], h_ee[sl], y_grid=y_grid, decide_only=decide_only
            )
        return make(full, w_t, batch_mmse(params, h_se, h_ee, w_t, full))
    raise ValueError(f"unhandled scheme {scheme}")
