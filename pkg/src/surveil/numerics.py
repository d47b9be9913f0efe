"""Dense complex linear algebra, integer-order incomplete gamma and quadrature.

Everything here is a pure function of its inputs.
"""

from __future__ import annotations

import math
from typing import Callable

import numpy as np
from scipy import integrate

__all__ = [
    "DomainError",
    "NumericalError",
    "hermitian_eig",
    "min_generalized_eigvec",
    "upper_incomplete_gamma",
    "exp_scaled_gamma",
    "exp_scaled_e1",
    "quad_semi_infinite",
    "orthogonal_projector",
    "normalize_phase",
]


class DomainError(ValueError):
    """Input outside the mathematical domain of an operation."""


class NumericalError(ArithmeticError):
    """An iterative method failed to reach its tolerance.

    ``partial`` carries the best value available when the method gave up.
    """

    def __init__(self, message: str, partial: float = float("nan")):
        super().__init__(message)
        self.partial = partial


def _check_hermitian(m: np.ndarray, name: str = "matrix") -> np.ndarray:
    m = np.asarray(m, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DomainError(f"{name} must be square, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise DomainError(f"{name} has non-finite entries")
    scale = max(np.abs(m).max(), np.finfo(float).tiny)
    if np.abs(m - m.conj().T).max() > 1e-12 * scale:
        raise DomainError(f"{name} is not Hermitian")
    return 0.5 * (m + m.conj().T)


def hermitian_eig(m: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigen-decomposition of a Hermitian matrix.

    Returns ``(w, v)`` with eigenvalues ascending and the columns of ``v``
    orthonormal, so that ``m @ v[:, i] == w[i] * v[:, i]``.
    """
    m = _check_hermitian(m)
    if m.shape[0] > 64:
        raise DomainError("hermitian_eig is meant for dimension <= 64")
    return np.linalg.eigh(m)


def min_generalized_eigvec(a: np.ndarray, b: np.ndarray) -> tuple[float, np.ndarray]:
    """Minimise the generalized Rayleigh quotient ``w^H a w / w^H b w``.

    ``b`` is whitened through its Cholesky factor, the reduced Hermitian
    problem is solved with :func:`hermitian_eig` and the eigenvector is
    mapped back and scaled to unit Euclidean norm.
    """
    a = _check_hermitian(a, "a")
    b = _check_hermitian(b, "b")
    if a.shape != b.shape:
        raise DomainError("pencil matrices differ in shape")
    bmin = np.linalg.eigvalsh(b)[0]
    if bmin <= 1e-12 * max(np.abs(b).max(), np.finfo(float).tiny):
        raise DomainError("b must be positive definite")
    chol = np.linalg.cholesky(b)
    linv = np.linalg.inv(chol)
    reduced = linv @ a @ linv.conj().T
    vals, vecs = hermitian_eig(0.5 * (reduced + reduced.conj().T))
    w = linv.conj().T @ vecs[:, 0]
    w = normalize_phase(w / np.linalg.norm(w))
    value = float(np.real(w.conj() @ a @ w) / np.real(w.conj() @ b @ w))
    return value, w


def normalize_phase(v: np.ndarray) -> np.ndarray:
    """Rotate ``v`` so that its largest-magnitude entry is real and positive."""
    v = np.asarray(v, dtype=complex)
    k = int(np.argmax(np.abs(v)))
    if v[k] == 0:
        return v
    return v * (abs(v[k]) / v[k])


def orthogonal_projector(v: np.ndarray) -> np.ndarray:
    """``I - v v^H / ||v||^2``: projector onto the complement of ``v``."""
    v = np.asarray(v, dtype=complex).reshape(-1)
    nrm2 = float(np.real(np.vdot(v, v)))
    if nrm2 <= 0.0:
        raise DomainError("cannot project out a zero vector")
    return np.eye(v.size, dtype=complex) - np.outer(v, v.conj()) / nrm2


# -- incomplete gamma -------------------------------------------------------

_EULER_GAMMA = 0.57721566490153286061


def _e1_series(x: float) -> float:
    # E1(x) = -gamma - ln x - sum_{k>=1} (-x)^k / (k k!)
    total = 0.0
    term = 1.0
    for k in range(1, 200):
        term *= -x / k
        contrib = term / k
        total += contrib
        if abs(contrib) < 1e-17 * abs(total):
            break
    return -_EULER_GAMMA - math.log(x) - total


def _scaled_gamma_cf(a: int, x: float) -> float:
    """e^x Gamma(a, x) from the Legendre continued fraction (modified Lentz).

    Converges quickly for x > 1 whatever the order.
    """
    tiny = 1e-300
    b = x + 1.0 - a
    c = 1.0 / tiny
    d = 1.0 / b
    h = d
    for i in range(1, 500):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < tiny:
            d = tiny
        c = b + an / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < 1e-16:
            return h * x**a
    raise NumericalError(f"continued fraction for Gamma({a}, {x}) did not converge", h * x**a)


def exp_scaled_e1(x: float) -> float:
    """``e^x E_1(x)`` for ``x > 0`` without overflow."""
    if not x > 0:
        raise DomainError("exponential integral needs x > 0")
    if x <= 1.0:
        return math.exp(x) * _e1_series(x)
    return _scaled_gamma_cf(0, x)


def exp_scaled_gamma(a: int, x: float) -> float:
    """``e^x Gamma(a, x)`` for integer ``a`` and ``x > 0``.

    Positive orders use the terminating sum
    ``(a-1)! sum_{k<a} x^k/k!``. Non-positive orders use the continued
    fraction for ``x > 1`` and downward recursion from ``e^x E_1(x)``
    otherwise; the recursion loses accuracy for large ``x`` so it is never
    used there.
    """
    if int(a) != a:
        raise DomainError("only integer orders are supported")
    a = int(a)
    x = float(x)
    if not x > 0:
        raise DomainError("incomplete gamma needs x > 0")
    if a >= 1:
        term = 1.0
        total = 1.0
        for k in range(1, a):
            term *= x / k
            total += term
        return math.factorial(a - 1) * total
    if x > 1.0:
        return _scaled_gamma_cf(a, x)
    g = math.exp(x) * _e1_series(x)
    # G(n) = (G(n+1) - x^n) / n, stepping n = -1, -2, ...
    for n in range(-1, a - 1, -1):
        g = (g - x**n) / n
    return g


def upper_incomplete_gamma(a: int, x: float) -> float:
    """``Gamma(a, x) = int_x^inf t^(a-1) e^-t dt`` for integer ``a``."""
    return math.exp(-x) * exp_scaled_gamma(a, x)


# -- quadrature -------------------------------------------------------------


def quad_semi_infinite(
    f: Callable[[float], float],
    lower: float,
    tail_rate: float,
    *,
    abs_tol: float = 1e-12,
    rel_tol: float = 1e-12,
    max_panels: int = 400,
) -> float:
    """Integrate ``f`` over ``[lower, inf)`` for an exponentially decaying ``f``.

    The half line is cut into panels a few e-folds wide, each integrated
    adaptively. Marching stops once the tail estimate ``|f(T)| / tail_rate``
    (inflated by a safety factor) drops below ``1e-10`` of the running
    integral, or below ``abs_tol``.
    """
    if not tail_rate > 0:
        raise DomainError("tail_rate must be positive")
    width = 4.0 / tail_rate
    total = 0.0
    err_total = 0.0
    left = float(lower)
    for _ in range(max_panels):
        right = left + width
        val, err = integrate.quad(f, left, right, epsabs=abs_tol * 1e-2, epsrel=rel_tol, limit=200)
        total += val
        err_total += err
        ends = max(abs(f(right)), abs(f(right - 0.25 * width)) * math.exp(-0.25 * width * tail_rate))
        tail = 10.0 * ends / tail_rate
        left = right
        # panels widen geometrically once the integrand is in its tail
        width *= 1.5
        if tail < max(1e-10 * abs(total), abs_tol):
            if err_total > max(1e-9, 1e-8 * abs(total)):
                raise NumericalError("quadrature error estimate too large", total)
            return total
    raise NumericalError("tail did not decay within the panel budget", total)
