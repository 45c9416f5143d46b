"""Self-contained special functions: normal/chi-square quantiles, incomplete
gamma and beta, Kolmogorov tail.

Everything here is implemented from series and continued fractions rather than
delegating to platform math libraries, so results are reproducible bit-for-bit
across environments.  Error bounds (checked in the test suite against
independent oracles):

* ``log_gamma``           relative error < 1e-13 (Lanczos, g=7, 9 terms)
* ``gamma_p``/``gamma_q`` absolute error < 1e-12 for a <= 100, < 1e-10 to a ~ 1e4
* ``beta_cdf``            absolute error < 1e-10
* ``normal_quantile``     absolute error < 1e-12 (rational init + Halley step)
* ``chi_square_quantile`` relative error < 1e-9 (Newton on gamma_p)
"""

from __future__ import annotations

import math

_MAX_ITER = 500
_EPS = 1e-15

# Lanczos coefficients, g = 7.
_LANCZOS = (
    0.99999999999980993,
    676.5203681218851,
    -1259.1392167224028,
    771.32342877765313,
    -176.61502916214059,
    12.507343278686905,
    -0.13857109526572012,
    9.9843695780195716e-6,
    1.5056327351493116e-7,
)
_LOG_SQRT_2PI = 0.91893853320467274178
_SQRT2 = math.sqrt(2.0)


def log_gamma(x: float) -> float:
    """Natural log of the gamma function for x > 0."""
    if x <= 0.0:
        raise ValueError(f"log_gamma requires x > 0, got {x}")
    if x < 0.5:
        # reflection: Gamma(x) Gamma(1-x) = pi / sin(pi x)
        return math.log(math.pi / math.sin(math.pi * x)) - log_gamma(1.0 - x)
    x -= 1.0
    a = _LANCZOS[0]
    t = x + 7.5
    for i in range(1, 9):
        a += _LANCZOS[i] / (x + i)
    return _LOG_SQRT_2PI + (x + 0.5) * math.log(t) - t + math.log(a)


# ---------------------------------------------------------------------------
# Regularized incomplete gamma P(a, x), Q(a, x)
# ---------------------------------------------------------------------------

def _gamma_p_series(a: float, x: float) -> float:
    # power series around 0; converges quickly for x < a + 1
    term = 1.0 / a
    total = term
    ap = a
    for _ in range(_MAX_ITER):
        ap += 1.0
        term *= x / ap
        total += term
        if abs(term) < abs(total) * _EPS:
            break
    return total * math.exp(-x + a * math.log(x) - log_gamma(a))


def _gamma_q_contfrac(a: float, x: float) -> float:
    # Lentz's algorithm for the continued fraction; for x >= a + 1
    tiny = 1e-300
    b = x + 1.0 - a
    c = 1.0 / tiny
    d = 1.0 / b
    h = d
    for i in range(1, _MAX_ITER):
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
        if abs(delta - 1.0) < _EPS:
            break
    return h * math.exp(-x + a * math.log(x) - log_gamma(a))


def gamma_p(a: float, x: float) -> float:
    """Regularized lower incomplete gamma P(a, x) for a > 0, x >= 0."""
    if a <= 0.0:
        raise ValueError(f"gamma_p requires a > 0, got {a}")
    if x < 0.0:
        raise ValueError(f"gamma_p requires x >= 0, got {x}")
    if x == 0.0:
        return 0.0
    if x < a + 1.0:
        return _gamma_p_series(a, x)
    return 1.0 - _gamma_q_contfrac(a, x)


def gamma_q(a: float, x: float) -> float:
    """Regularized upper incomplete gamma Q(a, x) = 1 - P(a, x)."""
    if a <= 0.0:
        raise ValueError(f"gamma_q requires a > 0, got {a}")
    if x < 0.0:
        raise ValueError(f"gamma_q requires x >= 0, got {x}")
    if x == 0.0:
        return 1.0
    if x < a + 1.0:
        return 1.0 - _gamma_p_series(a, x)
    return _gamma_q_contfrac(a, x)


# ---------------------------------------------------------------------------
# Regularized incomplete beta I_x(a, b)
# ---------------------------------------------------------------------------

def _beta_contfrac(a: float, b: float, x: float) -> float:
    tiny = 1e-300
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < tiny:
        d = tiny
    d = 1.0 / d
    h = d
    for m in range(1, _MAX_ITER):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            break
    return h


def beta_cdf(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta I_x(a, b): the Beta(a, b) CDF at x."""
    if a <= 0.0 or b <= 0.0:
        raise ValueError(f"beta_cdf requires a, b > 0, got a={a}, b={b}")
    if x <= 0.0:
        if x < 0.0:
            raise ValueError(f"beta_cdf requires x in [0, 1], got {x}")
        return 0.0
    if x >= 1.0:
        if x > 1.0:
            raise ValueError(f"beta_cdf requires x in [0, 1], got {x}")
        return 1.0
    front = math.exp(
        log_gamma(a + b) - log_gamma(a) - log_gamma(b)
        + a * math.log(x) + b * math.log1p(-x)
    )
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _beta_contfrac(a, b, x) / a
    return 1.0 - front * _beta_contfrac(b, a, 1.0 - x) / b


# ---------------------------------------------------------------------------
# Normal distribution
# ---------------------------------------------------------------------------

def _erfc(x: float) -> float:
    # erfc via the incomplete gamma: erfc(x) = Q(1/2, x^2) for x >= 0
    if x < 0.0:
        return 2.0 - _erfc(-x)
    if x == 0.0:
        return 1.0
    if x > 27.0:
        return 0.0  # < 5e-319, underflows
    return gamma_q(0.5, x * x)


def normal_cdf(x: float) -> float:
    """Standard normal CDF."""
    return 0.5 * _erfc(-x / _SQRT2)


def normal_sf(x: float) -> float:
    """Standard normal survival function (upper tail)."""
    return 0.5 * _erfc(x / _SQRT2)


def normal_pdf(x: float) -> float:
    return math.exp(-0.5 * x * x - _LOG_SQRT_2PI)


# Acklam's rational approximation for the initial guess (|err| < 1.2e-9),
# then one Halley step against our own CDF pushes the error to ~1e-15.
_ACKLAM_A = (-3.969683028665376e+01, 2.209460984245205e+02,
             -2.759285104469687e+02, 1.383577518672690e+02,
             -3.066479806614716e+01, 2.506628277459239e+00)
_ACKLAM_B = (-5.447609879822406e+01, 1.615858368580409e+02,
             -1.556989798598866e+02, 6.680131188771972e+01,
             -1.328068155288572e+01)
_ACKLAM_C = (-7.784894002430293e-03, -3.223964580411365e-01,
             -2.400758277161838e+00, -2.549732539343734e+00,
             4.374664141464968e+00, 2.938163982698783e+00)
_ACKLAM_D = (7.784695709041462e-03, 3.224671290700398e-01,
             2.445134137142996e+00, 3.754408661907416e+00)


def normal_quantile(p: float) -> float:
    """Inverse standard normal CDF for p in (0, 1)."""
    if not 0.0 < p < 1.0:
        raise ValueError(f"normal_quantile requires p in (0, 1), got {p}")
    p_low, p_high = 0.02425, 1.0 - 0.02425
    a, b, c, d = _ACKLAM_A, _ACKLAM_B, _ACKLAM_C, _ACKLAM_D
    if p < p_low:
        q = math.sqrt(-2.0 * math.log(p))
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) / \
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0)
    elif p <= p_high:
        q = p - 0.5
        r = q * q
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q / \
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0)
    else:
        q = math.sqrt(-2.0 * math.log1p(-p))
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) / \
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0)
    # Halley refinement on the nearer tail (avoids cancellation in Phi near 1)
    if p > 0.5:
        u = (normal_sf(x) - (1.0 - p)) / normal_pdf(x)
        x += u / (1.0 - 0.5 * x * u)
    else:
        u = (normal_cdf(x) - p) / normal_pdf(x)
        x -= u / (1.0 + 0.5 * x * u)
    return x


# ---------------------------------------------------------------------------
# Chi-square quantile
# ---------------------------------------------------------------------------

def chi_square_cdf(x: float, df: int) -> float:
    """Chi-square CDF with df degrees of freedom."""
    if df < 1:
        raise ValueError(f"chi_square_cdf requires df >= 1, got {df}")
    if x <= 0.0:
        return 0.0
    return gamma_p(0.5 * df, 0.5 * x)


def chi_square_quantile(df: int, p: float) -> float:
    """Chi-square quantile: q with CDF(q; df) = p, df >= 1, p in (0, 1).

    Newton iteration on the regularized incomplete gamma from a
    Wilson-Hilferty start; bisection fallback keeps the bracket valid.
    """
    if df < 1 or df != int(df):
        raise ValueError(f"chi_square_quantile requires integer df >= 1, got {df}")
    if not 0.0 < p < 1.0:
        raise ValueError(f"chi_square_quantile requires p in (0, 1), got {p}")
    df = int(df)
    a = 0.5 * df

    # Wilson-Hilferty initial guess
    z = normal_quantile(p)
    t = 1.0 - 2.0 / (9.0 * df) + z * math.sqrt(2.0 / (9.0 * df))
    x = df * t ** 3 if t > 0 else 1e-8
    if x <= 0.0:
        x = 1e-8

    lo, hi = 0.0, math.inf
    log_norm = log_gamma(a)
    for _ in range(200):
        f = gamma_p(a, 0.5 * x) - p
        if f > 0.0:
            hi = min(hi, x)
        else:
            lo = max(lo, x)
        # gamma pdf of chi-square at x
        logpdf = (a - 1.0) * math.log(0.5 * x) - 0.5 * x - log_norm - math.log(2.0)
        step = f / math.exp(logpdf) if logpdf > -700 else math.copysign(math.inf, f)
        x_new = x - step
        if not (lo < x_new < hi):
            x_new = 0.5 * (lo + hi) if math.isfinite(hi) else 2.0 * x
        if abs(x_new - x) <= 1e-13 * max(x, 1e-300):
            x = x_new
            break
        x = x_new
    return x


# ---------------------------------------------------------------------------
# Kolmogorov-Smirnov tail
# ---------------------------------------------------------------------------

def kolmogorov_sf(lam: float) -> float:
    """Limiting KS tail P[sup|B(t)| > lam]: 2 sum (-1)^{k-1} exp(-2 k^2 lam^2)."""
    if lam <= 0.0:
        return 1.0
    total = 0.0
    for k in range(1, 101):
        term = 2.0 * (-1.0) ** (k - 1) * math.exp(-2.0 * k * k * lam * lam)
        total += term
        if abs(term) < 1e-16:
            break
    return min(max(total, 0.0), 1.0)


def ks_test_pvalue(d: float, n: int) -> float:
    """P-value for a one-sample KS statistic d at sample size n.

    Uses the asymptotic distribution with the Stephens small-sample
    adjustment; accurate to ~1e-3 for n >= 100.
    """
    lam = d * (math.sqrt(n) + 0.12 + 0.11 / math.sqrt(n))
    return kolmogorov_sf(lam)
