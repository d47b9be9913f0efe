from dataclasses import replace

import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import linprog

from surveil.model import SystemParams, sample_channels
from surveil.numerics import DomainError
from surveil.sdp import (
    DegenerateScale,
    RankContext,
    SdpProblem,
    SolverError,
    TheoremViolation,
    charnes_cooper_recover,
    extract_rank_one,
    miso_fractional_sdp,
    mimo_inner_sdp,
    mimo_y_range,
    solve_sdp,
)


def test_trivial_two_by_two():
    sol = solve_sdp(SdpProblem(dim=2, cost=np.diag([1.0, 2.0]), constraints=((np.eye(2), 0.0, 1.0),)))
    assert sol.objective == pytest.approx(1.0, abs=1e-9)
    assert np.allclose(sol.z, np.diag([1.0, 0.0]), atol=1e-8)
    assert sol.s == 1.0


@given(st.integers(0, 2**31), st.integers(1, 6))
@settings(max_examples=30)
def test_trace_constrained_minimum_is_smallest_eigenvalue(seed, n):
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    c = a + a.conj().T
    sol = solve_sdp(SdpProblem(dim=n, cost=c, constraints=((np.eye(n), 0.0, 1.0),)))
    assert sol.objective == pytest.approx(np.linalg.eigvalsh(c)[0], abs=1e-7)
    assert sol.gap <= 1e-8 and sol.primal_residual <= 1e-8


@pytest.mark.parametrize("seed", range(10))
def test_diagonal_problem_matches_linear_program(seed):
    rng = np.random.default_rng(seed)
    c = rng.uniform(-1, 2, 5)
    a2 = rng.uniform(0, 1, 5)
    b2 = 0.5 * (a2.min() + a2.max())
    p = SdpProblem(dim=5, cost=np.diag(c), constraints=((np.eye(5), 0.0, 1.0), (np.diag(a2), 0.0, b2)))
    ref = linprog(c, A_eq=np.vstack([np.ones(5), a2]), b_eq=[1.0, b2])
    assert solve_sdp(p).objective == pytest.approx(ref.fun, abs=1e-8)


def test_infeasible_problem_raises():
    p = SdpProblem(dim=2, cost=np.eye(2), constraints=((np.eye(2), 0.0, -1.0),))
    with pytest.raises(SolverError) as info:
        solve_sdp(p)
    assert "primal" in info.value.residuals


def test_problem_validation():
    with pytest.raises(DomainError):
        SdpProblem(dim=17, cost=np.eye(17), constraints=((np.eye(17), 0.0, 1.0),))
    with pytest.raises(DomainError):
        SdpProblem(dim=2, cost=np.array([[0, 1], [0, 0]]), constraints=((np.eye(2), 0.0, 1.0),))
    with pytest.raises(DomainError):
        SdpProblem(dim=2, cost=np.eye(2), constraints=((np.eye(2), 0.0, 1.0), (2 * np.eye(2), 0.0, 2.0)))
    with pytest.raises(DomainError):
        SdpProblem(dim=2, cost=np.eye(2), constraints=())


def test_charnes_cooper_recover_needs_positive_scale():
    sol = solve_sdp(SdpProblem(dim=2, cost=np.diag([1.0, 2.0]), constraints=((np.eye(2), 0.0, 1.0),)))
    assert np.allclose(charnes_cooper_recover(sol), sol.z)
    with pytest.raises(DegenerateScale):
        charnes_cooper_recover(replace(sol, s=0.0))


def test_extract_rank_one():
    v = np.array([1.0, 1j, -0.5])
    w = np.outer(v, v.conj())
    res = extract_rank_one(w, RankContext.P9)
    assert not res.recovered and res.ratio < 1e-12
    assert abs(abs(np.vdot(res.vector, v)) - np.linalg.norm(v)) < 1e-12
    rank2 = np.diag([1.0, 0.5, 0.0]).astype(complex)
    with pytest.raises(TheoremViolation):
        extract_rank_one(rank2, RankContext.P9)
    with pytest.raises(ValueError):
        extract_rank_one(rank2, RankContext.P15)
    # recovery picks the eigenvector with the largest jamming gain
    res = extract_rank_one(rank2, RankContext.P15, h_ed=np.array([0.1, 2.0, 5.0]))
    assert res.recovered and abs(res.vector[1]) == pytest.approx(1.0)


@pytest.mark.parametrize("seed", range(25))
def test_miso_sdp_value_is_generalized_eigenvalue(seed):
    p = SystemParams(n_t=3, n_r=1)
    ch = sample_channels(p, seed)
    sol = solve_sdp(miso_fractional_sdp(p, ch))
    h_ee, h_ed = ch.h_ee[0], ch.h_ed
    a = p.rho * p.p_j_max * np.outer(h_ee.conj(), h_ee) + p.n_e * np.eye(3)
    b = p.p_j_max * np.outer(h_ed.conj(), h_ed) + p.n_d * np.eye(3)
    ref = scipy.linalg.eigh(a, b, eigvals_only=True)[0]
    assert sol.objective == pytest.approx(ref, rel=1e-9)
    res = extract_rank_one(charnes_cooper_recover(sol), RankContext.P9)
    assert res.ratio < 1e-6


@pytest.mark.parametrize("seed", range(6))
def test_mimo_inner_sdp_brackets(seed):
    p = SystemParams()
    ch = sample_channels(p, seed)
    lo, hi = mimo_y_range(p, ch)
    assert lo == 1.0 and hi > 1.0
    y = lo + 0.5 * (hi - lo)
    sol = solve_sdp(mimo_inner_sdp(p, ch, y))
    w = charnes_cooper_recover(sol)
    w /= np.trace(w).real
    # feasibility of the lifted level-set constraint
    jam = p.p_j_max / p.n_d * np.real(np.trace(np.outer(ch.h_ed.conj(), ch.h_ed) @ w))
    assert 1.0 + jam == pytest.approx(y, rel=1e-7)
    assert sol.objective >= -1e-9
