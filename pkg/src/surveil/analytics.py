"""Closed-form and quadrature evaluators of the eavesdropping non-outage probability.

Notation shared by the SISO and MRT/MRC evaluators: ``a`` is the ratio of the
suspicious link gain to the monitor's source gain, ``c = N_D / N_E`` and
``kappa = rho lambda4 / lambda3``.  Conditioned on ``a = x > c``, jamming
rescues the monitor with probability ``G(x)``; the non-outage probability is

    P(a <= c) + int_c^inf G(x) f_a(x) dx

and the outage probability is ``int_c^inf (1 - G(x)) f_a(x) dx``, which is
positive term by term and is what the asymptotic routines use.

Every result depends on the source variances only through the ratio
``emr = lambda2 / lambda1``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate

from .beamform import SchemeId
from .model import SchemeInapplicable, SystemParams
from .numerics import DomainError, NumericalError, exp_scaled_e1, exp_scaled_gamma, quad_semi_infinite

__all__ = [
    "AnalyticConfig",
    "AnalyticResult",
    "RatioCdfs",
    "NoAsymptotic",
    "InsufficientData",
    "nonoutage_passive",
    "nonoutage_siso_exact",
    "nonoutage_tzf_mrc_exact",
    "nonoutage_mrt_rzf_exact",
    "nonoutage_mrt_mrc_exact",
    "nonoutage_exact",
    "outage_exact",
    "outage_asymptotic",
    "estimate_diversity_order",
    "ratio_cdfs",
    "ANALYTIC_SCHEMES",
]


class NoAsymptotic(ValueError):
    """No high-EMR approximation exists for the requested scheme."""


class InsufficientData(ValueError):
    pass


@dataclass(frozen=True)
class AnalyticConfig:
    """System parameters plus an optional EMR override (``lambda2 = emr * lambda1``)."""

    params: SystemParams = field(default_factory=SystemParams)
    emr: float | None = None

    def __post_init__(self):
        if self.emr is not None and not self.emr > 0:
            raise DomainError("emr must be positive")

    @property
    def effective(self) -> SystemParams:
        if self.emr is None:
            return self.params
        return self.params.replace(lambda2=self.emr * self.params.lambda1)


@dataclass(frozen=True)
class AnalyticResult:
    value: float
    flags: tuple[str, ...] = ()

    def __float__(self):
        return self.value


def _cfg(cfg) -> SystemParams:
    if isinstance(cfg, SystemParams):
        return cfg
    return cfg.effective


def _clip(p: float) -> float:
    return min(1.0, max(0.0, p))


# -- SISO --------------------------------------------------------------------


def nonoutage_passive(cfg) -> float:
    """Single-antenna monitor that never jams."""
    p = _cfg(cfg)
    return 1.0 - 1.0 / (1.0 + p.emr * p.n_d / p.n_e)


def nonoutage_siso_exact(cfg) -> AnalyticResult:
    """Single-antenna monitor with optimal jamming power, in closed form.

    The closed form has a removable singularity at
    ``rho lambda1 lambda4 = lambda2 lambda3``; on that set ``lambda4`` is
    nudged up by 1e-7 (relative), and in the ill-conditioned neighbourhood
    the defining integral is evaluated by quadrature instead.  Both cases are
    flagged.
    """
    p = _cfg(cfg)
    flags = []
    if p.rho == 0.0:
        flags.append("quadrature")
        return AnalyticResult(_clip(nonoutage_passive(p) + _siso_rescue_quad(p)), tuple(flags))
    l1, l2, l3, l4 = p.lambda1, p.lambda2, p.lambda3, p.lambda4
    den = p.rho * l1 * l4 - l2 * l3
    if abs(den) <= 1e-9 * p.rho * l1 * l4:
        l4 *= 1.0 + 1e-7
        p = p.replace(lambda4=l4)
        den = p.rho * l1 * l4 - l2 * l3
        flags.append("perturbed")
    if abs(den) < 1e-3 * p.rho * l1 * l4:
        # cancellation between 1/den^2 terms would eat the precision
        flags.append("quadrature")
        return AnalyticResult(_clip(nonoutage_passive(p) + _siso_rescue_quad(p)), tuple(flags))
    n_d, n_e, pj, rho = p.n_d, p.n_e, p.p_j_max, p.rho
    z1 = n_d / (l3 * pj) + l1 * n_e / (l2 * l3 * pj)
    z2 = n_d / (l3 * pj) + n_e / (rho * l4 * pj)
    k2 = rho * l1 * l2 * l3 * l4 / den**2
    value = (
        1.0
        + (l1 * n_e / (pj * den) - k2) * exp_scaled_e1(z1)
        - rho * l1**2 * l4 * n_e / (den * (l1 * n_e + l2 * n_d))
        + k2 * exp_scaled_e1(z2)
    )
    return AnalyticResult(_clip(value), tuple(flags))


def _siso_rescue_quad(p: SystemParams) -> float:
    c = p.n_d / p.n_e
    kappa = p.rho * p.lambda4 / p.lambda3
    rate = p.n_e / (p.lambda3 * p.p_j_max)
    return _rescue_integral(p, lambda x: math.exp(-(x - c) * rate) / (1.0 + kappa * x), 1, p.emr)


def _weighted_pieces(p: SystemParams, h: Callable[[float], float], n_r: int, emr: float | None):
    """``int_c^cut h(x) w(x) dx`` with ``w = f_a`` (or ``n_r x^(-n_r-1)`` if ``emr`` is None).

    Returns ``(integral, error estimate, weight beyond cut, rounding floor)``;
    the floor is the absolute error from evaluating ``h`` to machine
    precision, since ``h`` may itself be a difference of nearly equal terms.  The weight is
    peaked on a ``1/emr`` scale at ``c`` while the jamming terms in ``h`` vary
    on a ``lambda3 P_J / N_E`` scale; geometric breakpoints resolve both.
    Beyond ``cut`` the jamming term is below e^-80.
    """
    c = p.n_d / p.n_e
    scale = p.lambda3 * p.p_j_max / p.n_e
    cut = c + 80.0 * scale
    if emr is None:
        def w(x):
            return n_r * x ** (-n_r - 1)
        tail = cut ** (-n_r)
        mass = c ** (-n_r)
        width = c
    else:
        def w(x):
            return n_r * emr / (1.0 + emr * x) ** (n_r + 1)
        tail = (1.0 + emr * cut) ** (-n_r)
        mass = (1.0 + emr * c) ** (-n_r)
        width = 1.0 / emr + c
    step = 1e-3 * min(scale, width)
    edges = [c]
    while c + step < cut:
        edges.append(c + step)
        step *= 2.0
    edges.append(cut)
    total = err_total = 0.0
    with warnings.catch_warnings():
        # callers judge the accumulated error estimate themselves
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        for lo, hi in zip(edges[:-1], edges[1:]):
            val, err = integrate.quad(lambda x: h(x) * w(x), lo, hi, epsabs=0.0, epsrel=1e-12, limit=200)
            total += val
            err_total += err
    return total, err_total, tail, 64 * np.finfo(float).eps * mass


def _rescue_integral(p: SystemParams, rescue: Callable[[float], float], n_r: int, emr: float) -> float:
    total, err, _, floor = _weighted_pieces(p, rescue, n_r, emr)
    if err > 1e-10 * abs(total) + floor:
        raise NumericalError("rescue integral did not converge", total)
    return total


def _outage_integral(p: SystemParams, miss: Callable[[float], float], n_r: int, emr: float | None) -> float:
    """``int_c^inf miss(x) w(x) dx``; ``miss`` tends to 1 at large ``x`` and the weight's tail is exact."""
    total, err, tail, floor = _weighted_pieces(p, miss, n_r, emr)
    total += tail
    # judged on the whole integral: a negligible segment may carry a relatively large error
    if err > 1e-8 * abs(total) + floor:
        raise NumericalError("outage integral did not converge", total)
    return total


def _siso_outage(p: SystemParams) -> float:
    c = p.n_d / p.n_e
    kappa = p.rho * p.lambda4 / p.lambda3
    rate = p.n_e / (p.lambda3 * p.p_j_max)

    def miss(x):
        return 1.0 - math.exp(-(x - c) * rate) / (1.0 + kappa * x)

    return _outage_integral(p, miss, 1, p.emr)


# -- zero-forcing schemes ----------------------------------------------------


_CANCELLATION_LIMIT = 1e6  # tolerated ratio of sum of |terms| to |sum|


def _gamma_moment(a: float, b: float, shape: int, power: int) -> float:
    """``E[(a + b g)^-power]`` for ``g ~ Gamma(shape, 1)``, by quadrature."""
    log_norm = math.lgamma(shape)

    def f(t):
        if t <= 0.0:
            return 0.0 if shape > 1 else (a**-power)
        return math.exp((shape - 1) * math.log(t) - t - log_norm) * (a + b * t) ** (-power)

    return quad_semi_infinite(f, 0.0, 1.0)


def _zf_sum(z: float, shape: int, power: int) -> tuple[float, float]:
    """Finite alternating sum and its cancellation ratio."""
    total = 0.0
    absolute = 0.0
    for k in range(shape):
        term = (-1) ** k / (math.factorial(k) * math.factorial(shape - 1 - k)) * z**k * exp_scaled_gamma(
            shape - power - k, z
        )
        total += term
        absolute += abs(term)
    ratio = absolute / abs(total) if total != 0.0 else math.inf
    return total, ratio


def _zf_outage(p: SystemParams, shape: int, power: int) -> tuple[float, tuple[str, ...]]:
    """``E[(1 + emr (N_D + P_J g) / N_E)^-power]`` with ``g ~ Gamma(shape, lambda3)``.

    The finite sum alternates; when it would lose more than six digits the
    expectation is integrated numerically instead (flag ``quadrature``).
    """
    if power == 0:
        return 1.0, ()
    pj, l3 = p.p_j_max, p.lambda3
    z = p.n_d / (l3 * pj) + p.n_e / (p.emr * l3 * pj)
    total, ratio = _zf_sum(z, shape, power)
    if ratio <= _CANCELLATION_LIMIT:
        return (p.n_e / (p.emr * l3 * pj)) ** power * total, ()
    a = 1.0 + p.emr * p.n_d / p.n_e
    b = p.emr * l3 * pj / p.n_e
    return _gamma_moment(a, b, shape, power), ("quadrature",)


def nonoutage_tzf_mrc_exact(cfg) -> AnalyticResult:
    """Transmit zero-forcing with MRC reception (finite sum, no rho dependence)."""
    p = _cfg(cfg)
    if p.n_t < 2:
        raise SchemeInapplicable("TZF/MRC needs at least two transmit antennas")
    out, flags = _zf_outage(p, p.n_t - 1, p.n_r)
    return AnalyticResult(_clip(1.0 - out), flags)


def nonoutage_mrt_rzf_exact(cfg) -> AnalyticResult:
    """Maximum-ratio jamming with receive zero-forcing (finite sum)."""
    p = _cfg(cfg)
    if p.n_r < 2:
        raise SchemeInapplicable("MRT/RZF needs at least two receive antennas")
    out, flags = _zf_outage(p, p.n_t, p.n_r - 1)
    return AnalyticResult(_clip(1.0 - out), flags)


# -- MRT/MRC -----------------------------------------------------------------


def _mrt_mrc_rescue(p: SystemParams) -> Callable[[float], float]:
    """``G(x)``: probability that optimal jamming rescues the monitor given ``a = x``."""
    c = p.n_d / p.n_e
    kappa = p.rho * p.lambda4 / p.lambda3
    rate = p.n_e / (p.lambda3 * p.p_j_max)
    n_t = p.n_t

    def g(x):
        d = (x - c) * rate  # (x N_E - N_D) / (lambda3 P_J)
        e = math.exp(-d)
        r = kappa * x / (1.0 + kappa * x)
        base = 1.0 / (1.0 + kappa * x)
        total = 0.0
        for k in range(n_t):
            for m in range(k + 1):
                j = k - m
                total += d**j / math.factorial(j) * r**m * base
        return total * e

    return g


def nonoutage_mrt_mrc_exact(cfg) -> AnalyticResult:
    """MRT/MRC with optimal jamming power (one weighted quadrature)."""
    p = _cfg(cfg)
    g = _mrt_mrc_rescue(p)
    n_r, emr = p.n_r, p.emr
    c = p.n_d / p.n_e
    rescue = _rescue_integral(p, g, n_r, emr)
    return AnalyticResult(_clip(1.0 - (1.0 + emr * c) ** (-n_r) + rescue))


def _mrt_mrc_outage(p: SystemParams) -> float:
    g = _mrt_mrc_rescue(p)
    return _outage_integral(p, lambda x: 1.0 - g(x), p.n_r, p.emr)


# -- dispatch ----------------------------------------------------------------

ANALYTIC_SCHEMES = (
    SchemeId.SISO_OPT,
    SchemeId.TZF_MRC,
    SchemeId.MRT_RZF,
    SchemeId.MRT_MRC,
    SchemeId.PASSIVE,
)


def nonoutage_exact(cfg, scheme: SchemeId) -> AnalyticResult:
    """Exact non-outage probability of ``scheme``; raises NoAsymptotic-style errors otherwise."""
    p = _cfg(cfg)
    if scheme is SchemeId.SISO_OPT:
        return nonoutage_siso_exact(p)
    if scheme is SchemeId.TZF_MRC:
        return nonoutage_tzf_mrc_exact(p)
    if scheme is SchemeId.MRT_RZF:
        return nonoutage_mrt_rzf_exact(p)
    if scheme is SchemeId.MRT_MRC:
        return nonoutage_mrt_mrc_exact(p)
    if scheme is SchemeId.PASSIVE:
        return AnalyticResult(nonoutage_passive(p))
    raise NotImplementedError(f"no analytic expression for {scheme.name}")


def outage_exact(cfg, scheme: SchemeId) -> float:
    """Exact outage probability, computed without forming ``1 - non-outage``."""
    p = _cfg(cfg)
    if scheme is SchemeId.SISO_OPT:
        return _siso_outage(p)
    if scheme is SchemeId.TZF_MRC:
        if p.n_t < 2:
            raise SchemeInapplicable("TZF/MRC needs at least two transmit antennas")
        return _zf_outage(p, p.n_t - 1, p.n_r)[0]
    if scheme is SchemeId.MRT_RZF:
        if p.n_r < 2:
            raise SchemeInapplicable("MRT/RZF needs at least two receive antennas")
        return _zf_outage(p, p.n_t, p.n_r - 1)[0]
    if scheme is SchemeId.MRT_MRC:
        return _mrt_mrc_outage(p)
    if scheme is SchemeId.PASSIVE:
        return 1.0 / (1.0 + p.emr * p.n_d / p.n_e)
    raise NotImplementedError(f"no analytic expression for {scheme.name}")


def outage_asymptotic(cfg, scheme: SchemeId) -> tuple[float, int]:
    """High-EMR outage ``coefficient / emr**diversity``; returns ``(coefficient, diversity)``."""
    p = _cfg(cfg)
    w = p.n_d / (p.lambda3 * p.p_j_max)
    if scheme is SchemeId.SISO_OPT:
        kappa = p.rho * p.lambda4 / p.lambda3
        if p.rho == 0.0:
            coef = p.n_e / (p.lambda3 * p.p_j_max) * exp_scaled_e1(w)
        else:
            coef = (kappa + p.n_e / (p.lambda3 * p.p_j_max)) * exp_scaled_e1(w) - kappa * exp_scaled_e1(
                w + p.n_e / (p.rho * p.lambda4 * p.p_j_max)
            )
        return coef, 1
    if scheme in (SchemeId.TZF_MRC, SchemeId.MRT_RZF):
        if scheme is SchemeId.TZF_MRC:
            if p.n_t < 2:
                raise SchemeInapplicable("TZF/MRC needs at least two transmit antennas")
            shape, power = p.n_t - 1, p.n_r
        else:
            if p.n_r < 2:
                raise SchemeInapplicable("MRT/RZF needs at least two receive antennas")
            shape, power = p.n_t, p.n_r - 1
        total, ratio = _zf_sum(w, shape, power)
        if ratio <= _CANCELLATION_LIMIT:
            return total * (p.n_e / (p.lambda3 * p.p_j_max)) ** power, power
        # limit of emr^power * outage: E[((N_D + P_J g) / N_E)^-power]
        return _gamma_moment(p.n_d / p.n_e, p.lambda3 * p.p_j_max / p.n_e, shape, power), power
    if scheme is SchemeId.MRT_MRC:
        g = _mrt_mrc_rescue(p)
        coef = _outage_integral(p, lambda x: 1.0 - g(x), p.n_r, None)
        if not coef > 0:
            raise NumericalError(f"MRT/MRC asymptotic coefficient is not positive ({coef})", coef)
        return coef, p.n_r
    raise NoAsymptotic(f"no high-EMR approximation for {scheme.name}")


def estimate_diversity_order(outage_samples) -> float:
    """Negative least-squares slope of ``log(outage)`` against ``log(emr)``.

    Points with probability 0 or 1 are dropped; at least four points spanning
    two decades must remain.
    """
    pts = [(float(x), float(y)) for x, y in outage_samples if x > 0 and 0.0 < y < 1.0]
    if len(pts) < 4:
        raise InsufficientData("need at least four usable (emr, outage) points")
    xs = np.log10([x for x, _ in pts])
    if xs.max() - xs.min() < 2.0 - 1e-12:
        raise InsufficientData("samples must span at least two decades of emr")
    ys = np.log10([y for _, y in pts])
    slope = np.polyfit(xs, ys, 1)[0]
    return float(-slope)


@dataclass(frozen=True)
class RatioCdfs:
    """CDFs of the link-gain ratio ``a`` and the jamming-to-loop ratio ``b``."""

    f_a: Callable[[np.ndarray], np.ndarray]
    f_b: Callable[[np.ndarray], np.ndarray]


def ratio_cdfs(cfg, family: str) -> RatioCdfs:
    """``family`` is ``'SISO'`` or ``'MRT_MRC'``."""
    p = _cfg(cfg)
    emr = p.emr
    kappa = p.rho * p.lambda4 / p.lambda3
    fam = family.upper()
    if fam == "SISO":
        n_r, n_t = 1, 1
    elif fam == "MRT_MRC":
        n_r, n_t = p.n_r, p.n_t
    else:
        raise ValueError("family must be 'SISO' or 'MRT_MRC'")

    def f_a(x):
        x = np.asarray(x, dtype=float)
        return 1.0 - (1.0 + emr * x) ** (-n_r)

    def f_b(x):
        x = np.asarray(x, dtype=float)
        r = kappa * x
        total = sum(r**k / (1.0 + r) ** (k + 1) for k in range(n_t))
        return 1.0 - total

    return RatioCdfs(f_a, f_b)
