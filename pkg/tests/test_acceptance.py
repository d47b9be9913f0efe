"""End-to-end acceptance checks; each prints one PASS/FAIL line.

Run alone with ``pytest tests/test_acceptance.py -v -s``.  The whole file
takes tens of minutes on one core.
"""

import itertools
import math

import numpy as np
import pytest

import conftest
from surveil.analytics import AnalyticConfig, estimate_diversity_order, nonoutage_exact, outage_asymptotic, outage_exact
from surveil.beamform import SchemeId, batch_designs, mimo_inner_solve, mimo_optimal_design, miso_fractional_objective, miso_optimal_design, miso_sdp_design, simo_optimal_design
from surveil.model import SystemParams, make_rng, p11_objective, sample_channel_batch, sample_channels
from surveil.montecarlo import run_schemes
from surveil.numerics import exp_scaled_gamma, upper_incomplete_gamma
from surveil.power import branch_power, mrt_mrc_coefficients, optimal_power_simo, optimal_power_siso, simo_coefficients, siso_coefficients
from surveil.sdp import mimo_y_range

pytestmark = pytest.mark.slow

P = SystemParams()  # 3x3, variances 1, 0.1, 0.1, 1, rho 0.5, unit noise
PJ_DB = (0.0, 5.0, 10.0, 15.0, 20.0)


def record(n: int, ok: bool, detail: str):
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}"
    conftest.ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def combined(*se):
    return math.sqrt(sum(s * s for s in se))


# -- 1 ----------------------------------------------------------------------


def test_closed_forms_match_monte_carlo():
    schemes = [SchemeId.SISO_OPT, SchemeId.TZF_MRC, SchemeId.MRT_RZF, SchemeId.MRT_MRC]
    worst, misses = 0.0, []
    for db in PJ_DB:
        p = P.with_pj_db(db)
        mc = run_schemes(p, schemes, 1_000_000, seed=1)
        for s in schemes:
            z = abs(mc[s].estimate - nonoutage_exact(p, s).value) / mc[s].std_error
            worst = max(worst, z)
            if z > 3.0:
                misses.append(f"{s.name}@{db:g}dB z={z:.2f}")
    record(1, not misses, f"20 points, max |z| = {worst:.2f}" + (f"; misses {misses}" if misses else ""))


# -- 2 ----------------------------------------------------------------------


def _grid_check(a, e, b, k, b1, p_closed, code, p_j, n_d, n_e, points=10**6):
    """Grid argmin of ``a/(e x + N_D) + (b1 x - b)/(k x + N_E)`` against closed-form powers.

    Objectives differing by a constant share their argmin, so the constant is omitted.

    Returns (step misses, fallback count, worst interior stationarity residual).
    """
    grid = np.linspace(0.0, p_j, points)
    step = grid[1]
    t1 = np.empty_like(grid)
    t2 = np.empty_like(grid)
    misses = fallback = 0
    worst = 0.0
    for i in range(a.size):
        np.multiply(grid, e[i], out=t1)
        t1 += n_d
        np.divide(a[i], t1, out=t1)
        np.multiply(grid, k[i], out=t2)
        t2 += n_e
        np.divide(b1[i] * grid - b[i], t2, out=t2)
        t1 += t2
        j = int(np.argmin(t1))
        x = p_closed[i]
        if abs(x - grid[j]) > step * (1 + 1e-9):

            def f(y):
                return a[i] / (e[i] * y + n_d) + (b1[i] * y - b[i]) / (k[i] * y + n_e)

            scale = abs(a[i]) / n_d + abs(b[i]) / n_e + abs(b1[i]) * p_j / n_e
            if f(x) <= f(grid[j]) + 1e-12 * scale:
                fallback += 1
            else:
                misses += 1
        if code[i] == 2:
            d_side = a[i] * e[i] / (e[i] * x + n_d) ** 2
            e_side = (b1[i] * n_e + k[i] * b[i]) / (k[i] * x + n_e) ** 2
            worst = max(worst, abs(e_side - d_side) / (d_side + e_side))
    return misses, fallback, worst


def test_power_closed_forms_match_grid_oracle():
    count = 10_000
    p_j = P.p_j_max
    n_d, n_e, rho, p_s = P.n_d, P.n_e, P.rho, P.p_s
    report, bad = [], False
    for family in ("SISO", "SIMO", "MRT_MRC"):
        n_t, n_r = {"SISO": (1, 1), "SIMO": (1, 3), "MRT_MRC": (3, 3)}[family]
        params = P.replace(n_t=n_t, n_r=n_r)
        bt = sample_channel_batch(params, count, make_rng(2024))
        h_sd, h_se, h_ed, h_ee = bt.h_sd, bt.h_se, bt.h_ed, bt.h_ee
        a = p_s * np.abs(h_sd) ** 2
        zero = np.zeros(count)
        # objective rebuilt from the SINR definitions with the scheme's beamformers
        if family == "SISO":
            e, b, k, b1 = np.abs(h_ed[:, 0]) ** 2, p_s * np.abs(h_se[:, 0]) ** 2, rho * np.abs(h_ee[:, 0, 0]) ** 2, zero
            c = siso_coefficients(h_sd, h_se[:, 0], h_ed[:, 0], h_ee[:, 0, 0], rho)
        elif family == "SIMO":
            # h^H (rho x u u^H + N_E I)^-1 h by Sherman-Morrison, u = h_ee
            u = h_ee[:, :, 0]
            hu = np.abs(np.sum(u.conj() * h_se, axis=1)) ** 2
            e, b, k = np.abs(h_ed[:, 0]) ** 2, zero, rho * np.sum(np.abs(u) ** 2, axis=1)
            # SINR_E = (||h||^2 - rho x |u^H h|^2 / (N_E + rho x ||u||^2)) / N_E; ||h||^2 / N_E is constant in x
            b1 = p_s * rho * hu / n_e
            c = simo_coefficients(h_sd, h_se, h_ed[:, 0], u, rho, n_e)
        else:
            w_t = h_ed.conj() / np.linalg.norm(h_ed, axis=1, keepdims=True)
            w_r = h_se / np.linalg.norm(h_se, axis=1, keepdims=True)
            e = np.abs(np.sum(h_ed * w_t, axis=1)) ** 2
            b = p_s * np.abs(np.sum(w_r.conj() * h_se, axis=1)) ** 2
            k = rho * np.abs(np.einsum("kr,krt,kt->k", w_r.conj(), h_ee, w_t)) ** 2
            b1 = zero
            c = mrt_mrc_coefficients(h_sd, h_se, h_ed, h_ee, rho)
        p_closed, code, _, _ = branch_power(c, n_d, n_e, p_j)
        misses, fallback, worst = _grid_check(a, e, b, k, b1, np.asarray(p_closed), np.asarray(code), p_j, n_d, n_e)
        interior = int(np.count_nonzero(np.asarray(code) == 2))
        report.append(f"{family}: {misses} misses, {fallback} value-only, {interior} interior, stationarity {worst:.1e}")
        bad |= misses > 0 or worst > 1e-6
    record(2, not bad, "; ".join(report))


# -- 3 ----------------------------------------------------------------------


def test_beamformers_are_optimal():
    instances = 1000
    # MISO: generalized eigenvector against the fractional SDP
    pm = P.replace(n_r=1)
    gap, rank = 0.0, 0.0
    for seed in range(instances):
        ch = sample_channels(pm, seed)
        eig = miso_fractional_objective(pm, ch, miso_optimal_design(pm, ch).w_t)
        design, ratio = miso_sdp_design(pm, ch)
        gap = max(gap, abs(miso_fractional_objective(pm, ch, design.w_t) - eig) / eig)
        rank = max(rank, ratio)

    # MIMO: two-stage design against random full-power designs with MMSE combining
    batch = sample_channel_batch(P, instances, make_rng(77))
    mimo = batch_designs(SchemeId.MIMO_OPT, P, batch)
    rng = make_rng(78)
    p_j, rho, n_d, n_e = P.p_j_max, P.rho, P.n_d, P.n_e

    def full_power_p11(i, w):
        # w: (m, n_t) unit rows; SINR_E = h^H (rho P u u^H + N_E I)^-1 h
        h = batch.h_se[i]
        u = w @ batch.h_ee[i].T
        jam = np.abs(w @ batch.h_ed[i]) ** 2
        uh = np.abs(u.conj() @ h) ** 2
        sinr_e = (np.vdot(h, h).real - rho * p_j * uh / (n_e + rho * p_j * np.sum(np.abs(u) ** 2, axis=1))) / n_e
        return P.p_s * abs(batch.h_sd[i]) ** 2 / (p_j * jam + n_d) - P.p_s * sinr_e

    beaten, worst = 0, -np.inf
    for i in range(instances):
        w = rng.standard_normal((100_000, P.n_t)) + 1j * rng.standard_normal((100_000, P.n_t))
        w /= np.linalg.norm(w, axis=1, keepdims=True)
        best_random = full_power_p11(i, w).min()
        ours = full_power_p11(i, mimo.w_t[i][None])[0]
        slack = ours - best_random
        worst = max(worst, slack / max(1.0, abs(best_random)))
        beaten += slack > 1e-6 * max(1.0, abs(best_random))

    # MIMO inner SDPs: rank one, or recovered only where the inner optimum vanishes
    sdp_instances, levels = 100, 5
    rank_one = recovered = unexplained = 0
    for seed in range(sdp_instances):
        ch = sample_channels(P, 10_000 + seed)
        lo, hi = mimo_y_range(P, ch)
        for y in lo + (hi - lo) * np.linspace(0.05, 0.95, levels):
            sol = mimo_inner_solve(P, ch, y, "sdp")
            if not sol.recovered:
                rank_one += 1
            elif sol.lower <= 1e-6:
                recovered += 1
            else:
                unexplained += 1
    # the full SDP-based search agrees with the dual path on a subset
    design_gap = 0.0
    for seed in range(20):
        ch = sample_channels(P, 20_000 + seed)
        a = p11_objective(P, ch, mimo_optimal_design(P, ch, inner="sdp"))
        b = p11_objective(P, ch, mimo_optimal_design(P, ch, inner="dual"))
        design_gap = max(design_gap, abs(a - b) / max(1.0, abs(b)))

    ok = gap <= 1e-6 and rank < 1e-6 and beaten == 0 and unexplained == 0 and design_gap <= 1e-6
    record(
        3,
        ok,
        f"MISO eigen/SDP rel gap {gap:.1e}, max eigen ratio {rank:.1e}; "
        f"MIMO beaten by random on {beaten}/{instances} (worst slack {worst:.1e}); "
        f"inner SDPs {rank_one} rank-one, {recovered} recovered, {unexplained} unexplained; "
        f"SDP vs dual design gap {design_gap:.1e}",
    )


# -- 4 ----------------------------------------------------------------------


def test_diversity_orders():
    expected = {SchemeId.SISO_OPT: 1, SchemeId.TZF_MRC: P.n_r, SchemeId.MRT_RZF: P.n_r - 1, SchemeId.MRT_MRC: P.n_r}
    emrs = np.logspace(2, 4, 9)
    parts, ok = [], True
    for scheme, order in expected.items():
        pts = [(x, outage_exact(AnalyticConfig(P, emr=x), scheme)) for x in emrs]
        slope = estimate_diversity_order(pts)
        coef, div = outage_asymptotic(P, scheme)
        ratio = pts[-1][1] / (coef / emrs[-1] ** div)
        ok &= abs(slope - order) <= 0.15 and abs(ratio - 1) <= 0.05
        parts.append(f"{scheme.name} slope {slope:.3f} (want {order}) ratio {ratio:.4f}")
    record(4, ok, "; ".join(parts))


# -- 5 ----------------------------------------------------------------------


def test_scheme_family_ordering():
    schemes = [SchemeId.MIMO_OPT, SchemeId.SIMO_OPT, SchemeId.MISO_OPT, SchemeId.SISO_OPT, SchemeId.PASSIVE, SchemeId.CONSTANT_FULL]
    violations = []
    for db in PJ_DB:
        r = run_schemes(P.with_pj_db(db), schemes, 100_000, seed=5)
        est = {s: r[s].estimate for s in schemes}
        se = {s: r[s].std_error for s in schemes}
        hi = max((SchemeId.SIMO_OPT, SchemeId.MISO_OPT), key=est.get)
        lo = min((SchemeId.SIMO_OPT, SchemeId.MISO_OPT), key=est.get)
        pairs = [(SchemeId.MIMO_OPT, hi), (hi, lo), (lo, SchemeId.SISO_OPT), (SchemeId.SISO_OPT, SchemeId.PASSIVE), (SchemeId.SISO_OPT, SchemeId.CONSTANT_FULL)]
        for better, worse in pairs:
            if est[better] < est[worse] - 3 * combined(se[better], se[worse]):
                violations.append(f"{better.name}<{worse.name}@{db:g}dB")
    record(5, not violations, f"{len(PJ_DB)} points x 5 orderings" + (f"; violations {violations}" if violations else ""))


# -- 6 ----------------------------------------------------------------------


def test_collapse_identities():
    rng_seeds = range(2000)
    p1 = P.replace(n_t=1, n_r=1)
    branch_diff = value_diff = 0.0
    mismatched = 0
    for seed in rng_seeds:
        ch = sample_channels(p1, seed)
        a, b = optimal_power_simo(p1, ch), optimal_power_siso(p1, ch)
        mismatched += a.branch is not b.branch
        value_diff = max(value_diff, abs(a.p_d - b.p_d) / P.p_j_max)
    theorem_gap = max(
        abs(nonoutage_exact(p1.with_pj_db(db), SchemeId.MRT_MRC).value - nonoutage_exact(p1.with_pj_db(db), SchemeId.SISO_OPT).value)
        for db in PJ_DB
    )
    pn = P.replace(n_t=1)
    mimo_gap = 0.0
    for seed in range(200):
        ch = sample_channels(pn, seed)
        a = p11_objective(pn, ch, mimo_optimal_design(pn, ch))
        b = p11_objective(pn, ch, simo_optimal_design(pn, ch))
        mimo_gap = max(mimo_gap, abs(a - b) / max(1.0, abs(b)))
    ok = mismatched == 0 and value_diff <= 1e-12 and theorem_gap <= 1e-6 and mimo_gap <= 1e-5
    record(
        6,
        ok,
        f"SIMO(N_r=1)/SISO branch mismatches {mismatched}, power diff {value_diff:.1e}; "
        f"MRT/MRC 1x1 vs SISO {theorem_gap:.1e}; MIMO(N_t=1) vs SIMO {mimo_gap:.1e}",
    )


# -- 7 ----------------------------------------------------------------------


def test_zero_forcing_ignores_loop_strength():
    rhos = (0.0, 0.25, 0.5, 0.75, 1.0)
    schemes = [SchemeId.TZF_MRC, SchemeId.MRT_RZF, SchemeId.MRT_MRC]
    # independent draws per rho so the comparison is a genuine statistical one
    res = [run_schemes(P.replace(rho=r), schemes, 100_000, seed=100 + i) for i, r in enumerate(rhos)]
    problems = []
    for s in (SchemeId.TZF_MRC, SchemeId.MRT_RZF):
        for i, j in itertools.combinations(range(len(rhos)), 2):
            a, b = res[i][s], res[j][s]
            if abs(a.estimate - b.estimate) > 3 * combined(a.std_error, b.std_error):
                problems.append(f"{s.name} rho {rhos[i]} vs {rhos[j]}")
    for i in range(len(rhos) - 1):
        a, b = res[i][SchemeId.MRT_MRC], res[i + 1][SchemeId.MRT_MRC]
        if b.estimate > a.estimate + 3 * combined(a.std_error, b.std_error):
            problems.append(f"MRT_MRC rises from rho {rhos[i]} to {rhos[i + 1]}")
    mrt = ", ".join(f"{r[SchemeId.MRT_MRC].estimate:.4f}" for r in res)
    record(7, not problems, f"MRT_MRC over rho: {mrt}" + (f"; problems {problems}" if problems else ""))


# -- 8 ----------------------------------------------------------------------


def test_special_function_identities():
    xs = (0.1, 0.5, 1.0, 3.0, 10.0, 50.0)
    worst = 0.0
    for a in range(-5, 5):
        for x in xs:
            lhs = upper_incomplete_gamma(a + 1, x)
            rhs = a * upper_incomplete_gamma(a, x) + x**a * math.exp(-x)
            worst = max(worst, abs(lhs - rhs) / abs(lhs))
    brackets = all(1.0 / (x + 1.0) < exp_scaled_gamma(0, x) < 1.0 / x for x in (0.1, 1.0, 10.0, 100.0, 700.0))
    record(8, worst <= 1e-10 and brackets, f"recursion residual {worst:.1e} over orders -5..5; bracket holds: {brackets}")
