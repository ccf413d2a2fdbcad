"""Self-contained CDFs and quantile functions for the standard normal,
Student t and chi-square distributions.

Everything here is scalar and pure. CDFs are built on the regularized
incomplete gamma and beta functions (series / continued-fraction
evaluations in the Cephes style, accurate to ~1e-14 relative away from
the extreme tails). Quantiles invert the CDFs with a bracketed,
bisection-safeguarded Newton iteration.

No external statistics package is used; only ``math``.
"""

from __future__ import annotations

import math
from functools import lru_cache

__all__ = [
    "DomainError",
    "std_normal_cdf",
    "std_normal_pdf",
    "std_normal_quantile",
    "student_t_cdf",
    "student_t_quantile",
    "chi_square_cdf",
    "chi_square_quantile",
]

# Absolute tolerance and iteration cap for every quantile solve.
QUANTILE_TOL = 1e-10
MAX_SOLVE_ITER = 200

_EPS = 1e-16
_TINY = 1e-300
_SQRT2 = math.sqrt(2.0)


class DomainError(ValueError):
    """An argument lies outside the mathematical domain of the function."""


def _check_prob(p: float, name: str = "p") -> float:
    p = float(p)
    if not 0.0 < p < 1.0 or math.isnan(p):
        raise DomainError(f"{name} must lie in the open interval (0, 1), got {p!r}")
    return p


def _check_df(df: int) -> int:
    if df != int(df) or int(df) < 1:
        raise DomainError(f"degrees of freedom must be a positive integer, got {df!r}")
    return int(df)


# ---------------------------------------------------------------------------
# Regularized incomplete gamma: P(a, x) and Q(a, x) = 1 - P(a, x)
# ---------------------------------------------------------------------------

def _gamma_p_series(a: float, x: float) -> float:
    # Lower series, reliable for x < a + 1. Term ratio is x / (a + k),
    # so convergence slows near x ~ a at large a; the cap is generous.
    term = 1.0 / a
    total = term
    n = a
    for _ in range(100_000):
        n += 1.0
        term *= x / n
        total += term
        if abs(term) < abs(total) * _EPS:
            break
    return total * math.exp(-x + a * math.log(x) - math.lgamma(a))


def _gamma_q_contfrac(a: float, x: float) -> float:
    # Upper continued fraction (modified Lentz), reliable for x >= a + 1.
    b = x + 1.0 - a
    c = 1.0 / _TINY
    d = 1.0 / b
    h = d
    for i in range(1, 20_000):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < _TINY:
            d = _TINY
        c = b + an / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            break
    return h * math.exp(-x + a * math.log(x) - math.lgamma(a))


def _gamma_p(a: float, x: float) -> float:
    """Regularized lower incomplete gamma function P(a, x)."""
    if x < 0.0 or a <= 0.0:
        raise DomainError(f"incomplete gamma requires a > 0 and x >= 0, got {a}, {x}")
    if x == 0.0:
        return 0.0
    if x < a + 1.0:
        return _gamma_p_series(a, x)
    return 1.0 - _gamma_q_contfrac(a, x)


# ---------------------------------------------------------------------------
# Regularized incomplete beta: I_x(a, b)
# ---------------------------------------------------------------------------

def _beta_contfrac(a: float, b: float, x: float) -> float:
    # Continued fraction for the incomplete beta (modified Lentz).
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _TINY:
        d = _TINY
    d = 1.0 / d
    h = d
    for m in range(1, 20_000):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _TINY:
            d = _TINY
        c = 1.0 + aa / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _TINY:
            d = _TINY
        c = 1.0 + aa / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            break
    return h


def _beta_inc(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta function I_x(a, b)."""
    if a <= 0.0 or b <= 0.0:
        raise DomainError(f"incomplete beta requires a, b > 0, got {a}, {b}")
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    front = math.exp(
        math.lgamma(a + b)
        - math.lgamma(a)
        - math.lgamma(b)
        + a * math.log(x)
        + b * math.log1p(-x)
    )
    # The continued fraction converges quickly only on one side of the
    # crossover; use the symmetry I_x(a,b) = 1 - I_{1-x}(b,a) otherwise.
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _beta_contfrac(a, b, x) / a
    return 1.0 - front * _beta_contfrac(b, a, 1.0 - x) / b


# ---------------------------------------------------------------------------
# CDFs and densities
# ---------------------------------------------------------------------------

def std_normal_pdf(x: float) -> float:
    """Density of the standard normal distribution."""
    return math.exp(-0.5 * x * x) / math.sqrt(2.0 * math.pi)


def std_normal_cdf(x: float) -> float:
    """CDF of the standard normal distribution.

    Uses the complementary error function, so both tails keep full
    relative accuracy.
    """
    x = float(x)
    if math.isnan(x):
        raise DomainError("std_normal_cdf requires a finite argument")
    return 0.5 * math.erfc(-x / _SQRT2)


@lru_cache(maxsize=1024)
def _t_pdf_coeff(df: int) -> float:
    return math.exp(
        math.lgamma((df + 1) / 2.0) - math.lgamma(df / 2.0)
    ) / math.sqrt(df * math.pi)


def _t_pdf(x: float, df: int) -> float:
    return _t_pdf_coeff(df) * (1.0 + x * x / df) ** (-(df + 1) / 2.0)


def student_t_cdf(x: float, df: int) -> float:
    """CDF of Student's t distribution with ``df`` degrees of freedom."""
    df = _check_df(df)
    x = float(x)
    if math.isnan(x):
        raise DomainError("student_t_cdf requires a finite argument")
    if x == 0.0:
        return 0.5
    tail = 0.5 * _beta_inc(df / 2.0, 0.5, df / (df + x * x))
    return tail if x < 0.0 else 1.0 - tail


def _chi2_pdf(x: float, df: int) -> float:
    if x <= 0.0:
        return 0.0
    a = df / 2.0
    return math.exp((a - 1.0) * math.log(x) - x / 2.0 - math.lgamma(a) - a * math.log(2.0))


def chi_square_cdf(x: float, df: int) -> float:
    """CDF of the chi-square distribution with ``df`` degrees of freedom."""
    df = _check_df(df)
    x = float(x)
    if math.isnan(x):
        raise DomainError("chi_square_cdf requires a finite argument")
    if x <= 0.0:
        return 0.0
    return _gamma_p(df / 2.0, x / 2.0)


# ---------------------------------------------------------------------------
# Quantiles: bracketed Newton with bisection safeguard
# ---------------------------------------------------------------------------

def _solve_quantile(cdf, pdf, p, lo, hi, x0, name):
    """Invert ``cdf`` at probability ``p`` inside the bracket [lo, hi].

    Newton steps are taken from ``x0`` whenever they stay inside the
    current bracket; otherwise the step falls back to bisection. The
    bracket shrinks monotonically, so the iteration cannot escape or
    cycle. Terminates when the bracket or the Newton step is below
    ``QUANTILE_TOL`` (absolute).
    """
    flo = cdf(lo) - p
    fhi = cdf(hi) - p
    for _ in range(MAX_SOLVE_ITER):
        if flo <= 0.0 <= fhi:
            break
        width = hi - lo
        if flo > 0.0:
            lo, hi = lo - 2.0 * width, lo
        else:
            lo, hi = hi, hi + 2.0 * width
        flo = cdf(lo) - p
        fhi = cdf(hi) - p
    else:
        raise RuntimeError(f"{name} quantile: failed to bracket p={p}")

    x = min(max(x0, lo), hi)
    for _ in range(MAX_SOLVE_ITER):
        f = cdf(x) - p
        if f == 0.0:
            return x
        if f > 0.0:
            hi, fhi = x, f
        else:
            lo, flo = x, f
        if hi - lo < QUANTILE_TOL:
            return 0.5 * (lo + hi)
        dfdx = pdf(x)
        if dfdx > 0.0:
            step = f / dfdx
            x_new = x - step
            if lo < x_new < hi:
                if abs(step) < QUANTILE_TOL:
                    return x_new
                x = x_new
                continue
        x = 0.5 * (lo + hi)
    raise RuntimeError(
        f"{name} quantile solve did not converge for p={p} "
        f"(internal error, please report)"
    )


@lru_cache(maxsize=None)
def std_normal_quantile(p: float) -> float:
    """Quantile (inverse CDF) of the standard normal distribution."""
    p = _check_prob(p)
    if p == 0.5:
        return 0.0
    # Crude tail-aware start; the solver refines it.
    q = min(p, 1.0 - p)
    x0 = math.copysign(math.sqrt(max(-2.0 * math.log(q) - 1.0, 0.0)), p - 0.5)
    return _solve_quantile(std_normal_cdf, std_normal_pdf, p, -1.0, 1.0, x0, "normal")


def student_t_quantile(p: float, df: int) -> float:
    """Quantile of Student's t distribution with ``df`` degrees of freedom."""
    p = _check_prob(p)
    df = _check_df(df)
    if p == 0.5:
        return 0.0
    x0 = std_normal_quantile(p)
    return _solve_quantile(
        lambda x: student_t_cdf(x, df),
        lambda x: _t_pdf(x, df),
        p,
        -1.0,
        1.0,
        x0,
        "student-t",
    )


def chi_square_quantile(p: float, df: int) -> float:
    """Quantile of the chi-square distribution with ``df`` degrees of freedom.

    Always positive; strictly increasing in both ``p`` and ``df``.
    """
    p = _check_prob(p)
    df = _check_df(df)
    # Wilson-Hilferty starting point.
    z = std_normal_quantile(p)
    h = 2.0 / (9.0 * df)
    x0 = df * (1.0 - h + z * math.sqrt(h)) ** 3
    x0 = max(x0, 1e-8)
    return _solve_quantile(
        lambda x: chi_square_cdf(x, df),
        lambda x: _chi2_pdf(x, df),
        p,
        _TINY,
        max(2.0 * df, 10.0),
        x0,
        "chi-square",
    )
