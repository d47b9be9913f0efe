"""Small dense complex SDP solver and the Charnes-Cooper problems built on it.

Problems have the form

    minimise    tr(C Z) + c_s s
    subject to  tr(A_i Z) + a_i s = b_i,   i = 1..m
                Z >= 0 (Hermitian PSD),  s >= 0

and are solved as a standard-form SDP over the block-diagonal Hermitian
matrix ``X = diag(Z, s)`` with a primal-dual path-following method
(HKM search direction, Mehrotra predictor-corrector).  All data are
block diagonal, so the iterates stay block diagonal.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .model import ChannelRealization, SystemParams
from .numerics import DomainError, hermitian_eig, normalize_phase

__all__ = [
    "SdpProblem",
    "SdpSolution",
    "SolverError",
    "DegenerateScale",
    "TheoremViolation",
    "RankContext",
    "RankOneResult",
    "solve_sdp",
    "charnes_cooper_recover",
    "extract_rank_one",
    "miso_fractional_sdp",
    "mimo_inner_sdp",
    "mimo_y_range",
]


class SolverError(ArithmeticError):
    """The interior-point method failed; ``residuals`` holds the last certificate."""

    def __init__(self, message: str, residuals: dict):
        super().__init__(f"{message}: {residuals}")
        self.residuals = residuals


class DegenerateScale(ArithmeticError):
    pass


class TheoremViolation(AssertionError):
    """A solution that theory says is rank one came back with higher rank."""


@dataclass(frozen=True)
class SdpProblem:
    dim: int
    cost: np.ndarray
    constraints: tuple  # of (A_i, a_i, b_i)
    cost_s: float = 0.0
    scalar_positive: bool = False

    def __post_init__(self):
        if not 1 <= self.dim <= 16:
            raise DomainError("SDP dimension must be between 1 and 16")
        cost = _herm(self.cost, self.dim, "cost")
        cons = []
        for a_mat, a_s, b in self.constraints:
            cons.append((_herm(a_mat, self.dim, "constraint"), float(a_s), float(b)))
        object.__setattr__(self, "cost", cost)
        object.__setattr__(self, "constraints", tuple(cons))
        if not cons:
            raise DomainError("at least one equality constraint is required")
        flat = np.array([np.concatenate([m.real.ravel(), m.imag.ravel(), [a]]) for m, a, _ in cons])
        if np.linalg.matrix_rank(flat) < len(cons):
            raise DomainError("equality constraints are linearly dependent")

    @property
    def has_scalar(self) -> bool:
        return self.cost_s != 0.0 or any(a != 0.0 for _, a, _ in self.constraints)


def _herm(m, n, name):
    m = np.asarray(m, dtype=complex)
    if m.shape != (n, n):
        raise DomainError(f"{name} matrix has shape {m.shape}, expected {(n, n)}")
    if np.abs(m - m.conj().T).max() > 1e-12 * max(1.0, np.abs(m).max()):
        raise DomainError(f"{name} matrix is not Hermitian")
    return 0.5 * (m + m.conj().T)


@dataclass(frozen=True)
class SdpSolution:
    z: np.ndarray
    s: float
    objective: float
    dual_objective: float
    y: np.ndarray
    primal_residual: float
    dual_residual: float
    gap: float
    iterations: int
    eigenvalues: np.ndarray = field(repr=False)

    @property
    def rank_tolerance_report(self) -> np.ndarray:
        """Eigenvalues of ``z``, largest first."""
        return self.eigenvalues[::-1]


def _inner(a, b):
    return float(np.real(np.vdot(a, b)))


def _max_step(x, dx):
    lchol = np.linalg.cholesky(x)
    li = np.linalg.inv(lchol)
    m = li @ dx @ li.conj().T
    lam = np.linalg.eigvalsh(0.5 * (m + m.conj().T))[0]
    return np.inf if lam >= 0 else -1.0 / lam


def _ipm_step(x, s, y, rp, rd, amats, mask, a_op, a_adj, big):
    """One Mehrotra predictor-corrector step along the HKM direction."""
    mu = _inner(x, s) / big
    sinv = np.linalg.inv(s)
    sinv = 0.5 * (sinv + sinv.conj().T)
    ax = np.einsum("kij,jl->kil", amats, x)  # A_k X
    asi = np.einsum("kij,jl->kil", amats, sinv)  # A_l S^-1
    schur = np.real(np.einsum("kij,lji->kl", ax, asi))  # tr(A_k X A_l S^-1)
    chol = np.linalg.cholesky(0.5 * (schur + schur.T))

    def direction(const):
        # const is the part of dX that does not depend on dy
        rhs = rp - a_op(0.5 * (const + const.conj().T))
        dy = np.linalg.solve(chol.T, np.linalg.solve(chol, rhs))
        ds = rd - a_adj(dy)
        dx = const + x @ a_adj(dy) @ sinv
        dx = 0.5 * (dx + dx.conj().T)
        dx[~mask] = 0.0
        ds[~mask] = 0.0
        return dx, dy, ds

    base = -x - x @ rd @ sinv
    dx_a, _, ds_a = direction(base)
    ap = min(1.0, _max_step(x, dx_a))
    ad = min(1.0, _max_step(s, ds_a))
    mu_aff = _inner(x + ap * dx_a, s + ad * ds_a) / big
    sigma = min(1.0, max(0.0, (mu_aff / mu) ** 3))
    const = base + sigma * mu * sinv - dx_a @ ds_a @ sinv
    dx, dy, ds = direction(const)
    ap = min(1.0, 0.98 * _max_step(x, dx))
    ad = min(1.0, 0.98 * _max_step(s, ds))
    x = x + ap * dx
    s = s + ad * ds
    x = 0.5 * (x + x.conj().T)
    s = 0.5 * (s + s.conj().T)
    return x, s, y + ad * dy


def solve_sdp(p: SdpProblem, *, tol: float = 1e-12, accept: float = 1e-8, max_iter: int = 200) -> SdpSolution:
    """Primal-dual interior-point solve of ``p``.

    Iterates until gap and residuals fall below ``tol`` (relative) or progress
    stalls; the result is accepted if every certificate is within ``accept``.
    """
    n = p.dim
    big = n + 1 if p.has_scalar else n
    mask = np.zeros((big, big), dtype=bool)
    mask[:n, :n] = True
    if p.has_scalar:
        mask[n, n] = True

    def embed(zm, sv):
        out = np.zeros((big, big), dtype=complex)
        out[:n, :n] = zm
        if p.has_scalar:
            out[n, n] = sv
        return out

    c = embed(p.cost, p.cost_s)
    amats = np.array([embed(a, s) for a, s, _ in p.constraints])
    b = np.array([bi for _, _, bi in p.constraints])
    m = len(b)

    def a_op(x):
        return np.real(np.einsum("kij,ji->k", amats, x))

    def a_adj(y):
        return np.einsum("k,kij->ij", y, amats)

    norm_b = 1.0 + np.linalg.norm(b)
    norm_c = 1.0 + np.linalg.norm(c)
    scale = max(1.0, np.sqrt(big), np.abs(b).max() * big / (1.0 + min(np.linalg.norm(a) for a in amats)))
    x = scale * np.eye(big, dtype=complex)
    s = max(1.0, np.sqrt(big), np.linalg.norm(c), max(np.linalg.norm(a) for a in amats)) * np.eye(big, dtype=complex)
    y = np.zeros(m)

    best = None
    stall = 0
    for it in range(1, max_iter + 1):
        rp = b - a_op(x)
        rd = c - s - a_adj(y)
        pobj = _inner(c, x)
        dobj = float(b @ y)
        gap = abs(pobj - dobj) / (1.0 + abs(pobj) + abs(dobj))
        pinf = np.linalg.norm(rp) / norm_b
        dinf = np.linalg.norm(rd) / norm_c
        score = max(gap, pinf, dinf)
        if best is None or score < best[0] * 0.999:
            best = (score, x.copy(), s.copy(), y.copy(), it)
            stall = 0
        else:
            stall += 1
        if score < tol or stall >= 8:
            break

        try:
            x, s, y = _ipm_step(x, s, y, rp, rd, amats, mask, a_op, a_adj, big)
        except np.linalg.LinAlgError:
            # iterate numerically on the cone boundary: keep the best certificate
            break
        if not np.all(np.isfinite(x)) or np.abs(x).max() > 1e12:
            break

    _, x, s, y, it_best = best
    rp = b - a_op(x)
    rd = c - s - a_adj(y)
    pobj = _inner(c, x)
    dobj = float(b @ y)
    gap = abs(pobj - dobj) / (1.0 + abs(pobj))
    pres = float(np.linalg.norm(rp))
    dres = float(np.linalg.norm(rd))
    residuals = {"gap": gap, "primal": pres, "dual": dres, "iterations": it}
    if gap > accept or pres > accept or dres > accept * norm_c:
        raise SolverError("interior-point method did not converge (infeasible or unbounded?)", residuals)
    zmat = 0.5 * (x[:n, :n] + x[:n, :n].conj().T)
    sval = float(np.real(x[n, n])) if p.has_scalar else 1.0
    if p.scalar_positive and sval < 1e-10:
        raise SolverError("scale variable collapsed to zero", residuals)
    eig = np.linalg.eigvalsh(zmat)
    return SdpSolution(
        z=zmat,
        s=sval,
        objective=pobj,
        dual_objective=dobj,
        y=y,
        primal_residual=pres,
        dual_residual=dres,
        gap=gap,
        iterations=it_best,
        eigenvalues=eig,
    )


def charnes_cooper_recover(sol: SdpSolution, tol: float = 1e-12) -> np.ndarray:
    """Undo the Charnes-Cooper scaling: ``W = Z / s``."""
    if not sol.s > tol:
        raise DegenerateScale(f"scale variable s = {sol.s} is not positive")
    w = sol.z / sol.s
    return 0.5 * (w + w.conj().T)


class RankContext(enum.Enum):
    P9 = "P9"  # fractional MISO problem: rank one by theory
    P15 = "P15"  # MIMO inner problem: rank one, or recoverable (case 3)


@dataclass(frozen=True)
class RankOneResult:
    vector: np.ndarray
    ratio: float
    recovered: bool


def extract_rank_one(
    w: np.ndarray,
    context: RankContext,
    h_ed: np.ndarray | None = None,
    ratio_tol: float = 1e-6,
) -> RankOneResult:
    """Unit vector ``v`` with ``W ~ v v^H``.

    When ``W`` is numerically rank one the principal eigenvector is returned.
    Otherwise, for the MIMO inner problem, the eigenvector (among those with
    non-negligible eigenvalue) with the largest jamming gain ``|h_ed u|^2``
    is chosen; this is the rank-one recovery for a vanishing inner optimum.
    """
    vals, vecs = hermitian_eig(0.5 * (w + w.conj().T))
    top = max(vals[-1], np.finfo(float).tiny)
    ratio = float(max(vals[-2], 0.0) / top) if vals.size > 1 else 0.0
    if ratio < ratio_tol:
        return RankOneResult(normalize_phase(vecs[:, -1]), ratio, False)
    if context is RankContext.P9:
        raise TheoremViolation(f"fractional MISO SDP returned rank > 1 (eigenvalue ratio {ratio:.3g})")
    if h_ed is None:
        raise ValueError("rank-one recovery needs the jamming channel h_ed")
    keep = vals > ratio_tol * top
    cand = vecs[:, keep]
    gains = np.abs(np.asarray(h_ed) @ cand) ** 2
    v = cand[:, int(np.argmax(gains))]
    return RankOneResult(normalize_phase(v), ratio, True)


# -- problem builders -------------------------------------------------------


def miso_fractional_sdp(params: SystemParams, ch: ChannelRealization) -> SdpProblem:
    """Charnes-Cooper form of the full-power MISO transmit-beamforming problem.

    ``h_ee`` here is the ``1 x n_t`` loop row (``ch.h_ee[0]``).
    """
    h_ee = ch.h_ee[0]
    h_ed = ch.h_ed
    n = ch.n_t
    p_j = params.p_j_max
    cost = params.rho * p_j * np.outer(h_ee.conj(), h_ee)
    cons = (
        (np.eye(n), -1.0, 0.0),  # tr Z = s
        (p_j * np.outer(h_ed.conj(), h_ed), params.n_d, 1.0),
    )
    return SdpProblem(dim=n, cost=cost, constraints=cons, cost_s=params.n_e, scalar_positive=True)


def mimo_y_range(params: SystemParams, ch: ChannelRealization) -> tuple[float, float]:
    return 1.0, 1.0 + params.p_j_max / params.n_d * float(np.sum(np.abs(ch.h_ed) ** 2))


def mimo_inner_sdp(params: SystemParams, ch: ChannelRealization, y: float) -> SdpProblem:
    """Inner SDP of the two-stage MIMO design at a fixed jamming level ``y``."""
    n = ch.n_t
    kr = params.rho * params.p_j_max / params.n_e
    g = ch.h_ee.conj().T @ ch.h_se  # H_ee^H h_se
    cost = kr * np.outer(g, g.conj())
    cons = (
        (np.eye(n), -1.0, 0.0),
        (kr * ch.h_ee.conj().T @ ch.h_ee, 1.0, 1.0),
        (params.p_j_max / params.n_d * np.outer(ch.h_ed.conj(), ch.h_ed), -(y - 1.0), 0.0),
    )
    return SdpProblem(dim=n, cost=cost, constraints=cons, cost_s=0.0, scalar_positive=True)
