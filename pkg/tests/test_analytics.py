import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from surveil.analytics import (
    ANALYTIC_SCHEMES,
    AnalyticConfig,
    InsufficientData,
    NoAsymptotic,
    estimate_diversity_order,
    nonoutage_exact,
    nonoutage_mrt_mrc_exact,
    nonoutage_passive,
    nonoutage_siso_exact,
    outage_asymptotic,
    outage_exact,
    ratio_cdfs,
)
from surveil.analytics import _gamma_moment, _siso_rescue_quad
from surveil.beamform import SchemeId
from surveil.model import SchemeInapplicable, SystemParams, make_rng, sample_channel_batch
from surveil.montecarlo import run_schemes
from surveil.numerics import DomainError

P = SystemParams()
params = st.builds(
    SystemParams,
    n_t=st.integers(2, 5),
    n_r=st.integers(2, 5),
    lambda1=st.floats(0.2, 5.0),
    lambda2=st.floats(0.01, 5.0),
    lambda3=st.floats(0.01, 5.0),
    lambda4=st.floats(0.1, 5.0),
    rho=st.floats(0.05, 1.0),
    p_j_max=st.floats(0.1, 1000.0),
)


@pytest.mark.parametrize("scheme", ANALYTIC_SCHEMES)
def test_matches_monte_carlo(scheme):
    p = P.with_pj_db(5.0)
    r = run_schemes(p, [scheme], 200_000, 21)[scheme]
    assert abs(r.estimate - nonoutage_exact(p, scheme).value) <= 4 * r.std_error


@given(params)
@settings(max_examples=30)
def test_outage_complements_nonoutage(p):
    for scheme in ANALYTIC_SCHEMES:
        assert outage_exact(p, scheme) + nonoutage_exact(p, scheme).value == pytest.approx(1.0, abs=1e-9)


@given(params, st.floats(1.05, 3.0))
@settings(max_examples=30)
def test_nonoutage_increases_with_eavesdropping_gain(p, factor):
    richer = p.replace(lambda2=p.lambda2 * factor)
    for scheme in ANALYTIC_SCHEMES:
        assert nonoutage_exact(richer, scheme).value >= nonoutage_exact(p, scheme).value - 1e-10


@given(params)
@settings(max_examples=30)
def test_transmit_and_receive_zero_forcing_are_dual(p):
    # TZF on (n_t, n_r) sees the same statistics as RZF on (n_t - 1, n_r + 1)
    a = nonoutage_exact(p, SchemeId.TZF_MRC).value
    b = nonoutage_exact(p.replace(n_t=p.n_t - 1, n_r=p.n_r + 1), SchemeId.MRT_RZF).value
    assert a == pytest.approx(b, rel=1e-12, abs=1e-15)


@given(params, st.floats(0.0, 1.0))
@settings(max_examples=30)
def test_zero_forcing_ignores_loop_strength(p, rho):
    for scheme in (SchemeId.TZF_MRC, SchemeId.MRT_RZF):
        assert nonoutage_exact(p.replace(rho=rho), scheme).value == nonoutage_exact(p, scheme).value


@given(params)
@settings(max_examples=30)
def test_schemes_beat_passive_and_jamming_helps(p):
    passive = nonoutage_passive(p)
    for scheme in (SchemeId.SISO_OPT, SchemeId.MRT_MRC):
        assert nonoutage_exact(p, scheme).value >= passive - 1e-10


@pytest.mark.parametrize("pj_db", [0.0, 10.0, 20.0])
def test_single_antenna_mrt_mrc_is_siso(pj_db):
    p = P.replace(n_t=1, n_r=1).with_pj_db(pj_db)
    assert nonoutage_mrt_mrc_exact(p).value == pytest.approx(nonoutage_siso_exact(p).value, abs=1e-12)


def test_siso_without_loop_uses_quadrature_continuously():
    a = nonoutage_siso_exact(P.replace(rho=0.0))
    assert a.flags == ("quadrature",)
    b = nonoutage_siso_exact(P.replace(rho=1e-9))
    assert b.value == pytest.approx(a.value, abs=1e-7)


def test_siso_singular_set_is_flagged_and_continuous():
    # rho lambda1 lambda4 = lambda2 lambda3
    sing = P.replace(rho=0.01)
    res = nonoutage_siso_exact(sing)
    assert "perturbed" in res.flags and "quadrature" in res.flags
    near = nonoutage_siso_exact(P.replace(rho=0.0100001))
    assert near.flags == ("quadrature",)
    assert res.value == pytest.approx(near.value, abs=1e-6)
    # just outside the quadrature neighbourhood the closed form is still accurate
    edge = P.replace(rho=0.01002)
    closed = nonoutage_siso_exact(edge)
    assert closed.flags == ()
    assert closed.value == pytest.approx(nonoutage_passive(edge) + _siso_rescue_quad(edge), abs=1e-10)
    assert nonoutage_siso_exact(P.replace(rho=0.01001)).flags == ("quadrature",)


def test_siso_closed_form_vs_quadrature_far_from_singularity():
    for p in (P, P.replace(rho=0.9, lambda3=0.5), P.with_pj_db(20.0)):
        closed = nonoutage_siso_exact(p)
        assert closed.flags == ()
        assert closed.value == pytest.approx(nonoutage_passive(p) + _siso_rescue_quad(p), abs=1e-12)


def test_inapplicable_and_missing_expressions():
    with pytest.raises(SchemeInapplicable):
        nonoutage_exact(P.replace(n_t=1), SchemeId.TZF_MRC)
    with pytest.raises(SchemeInapplicable):
        outage_exact(P.replace(n_r=1), SchemeId.MRT_RZF)
    with pytest.raises(NotImplementedError):
        nonoutage_exact(P, SchemeId.MIMO_OPT)
    with pytest.raises(NoAsymptotic):
        outage_asymptotic(P, SchemeId.PASSIVE)


def test_config_emr_override():
    cfg = AnalyticConfig(P, emr=0.5)
    assert cfg.effective.lambda2 == pytest.approx(0.5)
    assert nonoutage_exact(cfg, SchemeId.SISO_OPT).value == nonoutage_exact(P.replace(lambda2=0.5), SchemeId.SISO_OPT).value
    with pytest.raises(DomainError):
        AnalyticConfig(P, emr=0.0)


@pytest.mark.parametrize("scheme,order", [(SchemeId.SISO_OPT, 1), (SchemeId.TZF_MRC, 3), (SchemeId.MRT_RZF, 2), (SchemeId.MRT_MRC, 3)])
def test_asymptote_is_approached(scheme, order):
    coef, div = outage_asymptotic(P, scheme)
    assert div == order and coef > 0
    emr = 1e4
    exact = outage_exact(AnalyticConfig(P, emr=emr), scheme)
    assert exact / (coef / emr**div) == pytest.approx(1.0, abs=0.01)


def test_diversity_order_estimator():
    pts = [(x, 3.0 * x**-2) for x in np.logspace(1, 4, 7)]
    assert estimate_diversity_order(pts) == pytest.approx(2.0)
    with pytest.raises(InsufficientData):
        estimate_diversity_order(pts[:3])
    with pytest.raises(InsufficientData):
        estimate_diversity_order([(x, 1 / x) for x in np.linspace(10, 50, 6)])


@pytest.mark.parametrize("family", ["SISO", "MRT_MRC"])
def test_ratio_cdfs_match_empirical(family):
    p = P
    b = sample_channel_batch(p, 200_000, make_rng(4))
    if family == "SISO":
        a = np.abs(b.h_sd) ** 2 / np.abs(b.h_se[:, 0]) ** 2
        jam = np.abs(b.h_ed[:, 0]) ** 2 / (p.rho * np.abs(b.h_ee[:, 0, 0]) ** 2)
    else:
        s = np.sum(np.abs(b.h_se) ** 2, axis=1)
        e = np.sum(np.abs(b.h_ed) ** 2, axis=1)
        cross = np.abs(np.einsum("kr,krt,kt->k", b.h_se.conj(), b.h_ee, b.h_ed.conj())) ** 2
        a = np.abs(b.h_sd) ** 2 / s
        jam = e / (p.rho * cross / (s * e))
    cdfs = ratio_cdfs(p, family)
    for x in (0.5, 2.0, 10.0, 50.0):
        assert float(cdfs.f_a(x)) == pytest.approx(np.mean(a <= x), abs=4e-3)
        assert float(cdfs.f_b(x)) == pytest.approx(np.mean(jam <= x), abs=4e-3)
    with pytest.raises(ValueError):
        ratio_cdfs(p, "MIMO")


def test_passive_closed_form():
    assert nonoutage_passive(P) == pytest.approx(1 - 1 / (1 + 0.1))
    assert outage_exact(P, SchemeId.PASSIVE) == pytest.approx(1 / 1.1)
    assert math.isclose(nonoutage_exact(P, SchemeId.PASSIVE).value, nonoutage_passive(P))


def test_zero_forcing_cancellation_guard():
    # tiny jamming-to-noise makes the finite sum cancel; the quadrature path takes over
    p = SystemParams(n_t=5, n_r=2, lambda2=0.0117, lambda3=0.0156, rho=1.0, p_j_max=1.0)
    res = nonoutage_exact(p, SchemeId.MRT_RZF)
    assert res.flags == ("quadrature",)
    r = run_schemes(p, [SchemeId.MRT_RZF], 200_000, 3)[SchemeId.MRT_RZF]
    assert abs(r.estimate - res.value) <= 4 * r.std_error
    # where both are usable they agree
    a, b = 1 + P.emr, P.emr * P.lambda3 * P.p_j_max
    assert outage_exact(P, SchemeId.TZF_MRC) == pytest.approx(_gamma_moment(a, b, 2, 3), rel=1e-10)
