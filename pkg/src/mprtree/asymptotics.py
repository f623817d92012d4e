"""Asymptotics of fair-splitting BTA on the K-collision channel.

For ``p = 1/2`` the Poisson transform satisfies
``L(x) - 2 L(x/2) = 1 - 2 P(Poisson(x) <= K)``. Everything here is checked
against the exact values from :mod:`mprtree.exact`; where a printed series
is ambiguous, the candidate forms are evaluated and the one that matches
the exact Poisson mixture is selected and reported.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, NamedTuple

import numpy as np
from scipy import optimize
from scipy.special import gammainc

from .errors import ResolutionError, TailBoundError, VariantResolutionError
from .exact import cri_table
from .model import ChannelConfig
from .stability import poisson_mixture_values

LN2 = math.log(2.0)
DEFAULT_K_MAX = 5
DEFAULT_M_TERMS = 64
DEFAULT_N_RANGE = (2**8, 2**16)

# Lanczos coefficients, g = 7, n = 9.
_LANCZOS_G = 7.0
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
_HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)


def _log_sin_pi(z: complex) -> complex:
    # log(sin(pi z)) without overflow for large |Im z|; branch is irrelevant
    w = math.pi * z
    if abs(w.imag) < 30.0:
        return cmath.log(cmath.sin(w))
    if w.imag > 0:
        return -1j * w + cmath.log(0.5j) + cmath.log(1.0 - cmath.exp(2j * w))
    return 1j * w + cmath.log(-0.5j) + cmath.log(1.0 - cmath.exp(-2j * w))


def _lanczos_log_gamma(z: complex) -> complex:
    # valid for Re z >= 0.5; real and imaginary parts summed with fsum
    z -= 1.0
    acc = _LANCZOS[0]
    for i, c in enumerate(_LANCZOS[1:], start=1):
        acc += c / (z + i)
    t = z + _LANCZOS_G + 0.5
    lt = cmath.log(t)
    la = cmath.log(acc)
    a, b = z.real + 0.5, z.imag
    re = math.fsum((a * lt.real, -b * lt.imag, -t.real, _HALF_LOG_2PI, la.real))
    im = math.fsum((a * lt.imag, b * lt.real, -t.imag, la.imag))
    return complex(re, im)


# B_{2k} / (2k (2k - 1)) for k = 1..12
_STIRLING = (
    1 / 12,
    -1 / 360,
    1 / 1260,
    -1 / 1680,
    1 / 1188,
    -691 / 360360,
    1 / 156,
    -3617 / 122400,
    43867 / 244188,
    -174611 / 125400,
    77683 / 5796,
    -236364091 / 1506960,
)
_STIRLING_MIN_ABS = 8.0


def _stirling_log_gamma(z: complex) -> complex:
    # |z| >= 8 and Re z >= 0.5: truncation error below 1e-17
    lz = cmath.log(z)
    a, b = z.real - 0.5, z.imag
    inv = 1.0 / z
    inv2 = inv * inv
    corr = 0j
    p = inv
    for c in _STIRLING:
        corr += c * p
        p *= inv2
    re = math.fsum((a * lz.real, -b * lz.imag, -z.real, _HALF_LOG_2PI, corr.real))
    im = math.fsum((a * lz.imag, b * lz.real, -z.imag, corr.imag))
    return complex(re, im)


def log_gamma(z: complex) -> complex:
    """Complex log-Gamma (modulo 2 pi i).

    Lanczos (g = 7, n = 9) near the origin, Stirling's series for
    ``|z| >= 8``. Arguments left of ``Re z = 0.5`` are shifted right with
    the recurrence when ``|Im z| >= 1`` and reflected otherwise.
    """
    z = complex(z)
    if z.real >= 0.5:
        if abs(z) >= _STIRLING_MIN_ABS:
            return _stirling_log_gamma(z)
        return _lanczos_log_gamma(z)
    if z.imag == 0.0 and z.real == math.floor(z.real):
        raise ValueError(f"Gamma has a pole at {z.real:g}")
    if abs(z.imag) < 1.0 or z.real < -20.0:
        return math.log(math.pi) - _log_sin_pi(z) - log_gamma(1.0 - z)
    shift = math.ceil(0.5 - z.real)
    denom = 0j
    for k in range(shift):
        denom += cmath.log(z + k)
    return log_gamma(z + shift) - denom


def complex_gamma(z: complex) -> complex:
    return cmath.exp(log_gamma(z))


# -- functional equation ----------------------------------------------------


@dataclass(frozen=True)
class FunctionalEquationSpec:
    """``f(x) - gamma f(lambda_shift + p_scale x) = g(x)``."""

    gamma: float
    lambda_shift: float
    p_scale: float
    g: Callable[[float], float]

    def __post_init__(self):
        if not abs(self.gamma) < 1:
            raise ValueError("|gamma| < 1 is required for a unique solution")
        if not abs(self.p_scale) < 1:
            raise ValueError("|p_scale| < 1 is required for a unique solution")


class SeriesValue(NamedTuple):
    value: float
    tail_bound: float


def solve_functional_equation(
    spec: FunctionalEquationSpec,
    x: float,
    terms: int = DEFAULT_M_TERMS,
    tol: float | None = None,
    g_bound: float | None = None,
) -> SeriesValue:
    """Partial sum of ``sum_m gamma^m g(lambda (1 - p^m)/(1 - p) + p^m x)``.

    The tail is bounded by ``|gamma|^terms sup|g| / (1 - |gamma|)``. Without
    ``g_bound`` the supremum is estimated from the evaluated terms.
    """
    if terms < 1:
        raise ValueError("terms must be >= 1")
    gam, lam, p = spec.gamma, spec.lambda_shift, spec.p_scale
    total = 0.0
    sup_g = 0.0
    gm = 1.0
    pm = 1.0
    for m in range(terms):
        arg = lam * (1.0 - pm) / (1.0 - p) + pm * x
        gv = spec.g(arg)
        total += gm * gv
        sup_g = max(sup_g, abs(gv))
        gm *= gam
        pm *= p
    bound = g_bound if g_bound is not None else sup_g
    tail = abs(gam) ** terms * bound / (1.0 - abs(gam))
    if tol is not None and tail > tol:
        raise TailBoundError(f"tail bound {tail:.3g} exceeds tolerance {tol:.3g}")
    return SeriesValue(total, tail)


def second_derivative_rhs(K: int) -> Callable[[float], float]:
    """Right-hand side ``2 e^{-x} (x^{K-1}/(K-1)! - x^K/K!)`` of the equation for ``L''``."""

    def g(x: float) -> float:
        a = x ** (K - 1) / math.factorial(K - 1)
        return 2.0 * math.exp(-x) * (a - a * x / K)

    return g


def second_derivative_spec(K: int) -> FunctionalEquationSpec:
    return FunctionalEquationSpec(0.5, 0.0, 0.5, second_derivative_rhs(K))


# -- series for L(x) ---------------------------------------------------------


def _poisson_head(y: np.ndarray, K: int, start: int) -> np.ndarray:
    k = np.arange(start, K + 1)
    return (y[..., None] ** k / np.array([math.factorial(int(v)) for v in k])).sum(axis=-1)


def _term_taylor_remainder(y: np.ndarray, K: int) -> np.ndarray:
    # e^{-y} (e^y - sum_{k<=K} y^k/k!) = P(K+1, y)
    return gammainc(K + 1, y)


def _term_head_complement(y: np.ndarray, K: int) -> np.ndarray:
    return np.exp(-y) * (1.0 - _poisson_head(y, K, 0))


def _term_partial_head(y: np.ndarray, K: int) -> np.ndarray:
    return np.exp(-y) * _poisson_head(y, K, 1)


_SERIES_FORMS = {
    "taylor-remainder": _term_taylor_remainder,
    "head-complement": _term_head_complement,
    "partial-head": _term_partial_head,
}


def series_L(x, K: int, form: str, sign: int, m_terms: int = DEFAULT_M_TERMS):
    """``1 + sign * 2 sum_{m<m_terms} 2^m term(x 2^-m)`` for one candidate form."""
    term = _SERIES_FORMS[form]
    x = np.asarray(x, dtype=float)
    m = np.arange(m_terms)
    y = x[..., None] * 2.0 ** (-m)
    s = (2.0**m * term(y, K)).sum(axis=-1)
    out = 1.0 + sign * 2.0 * s
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class VariantChoice:
    K: int
    form: str
    sign: int
    max_rel_error: float
    errors: dict = field(default_factory=dict)


_RESOLUTION_GRID = np.geomspace(1.0, 100.0, 41)


@lru_cache(maxsize=64)
def resolve_series_variant(K: int, m_terms: int = DEFAULT_M_TERMS) -> VariantChoice:
    """Pick the sign and inner-sum form matching the exact ``L(x)`` on [1, 100]."""
    exact = poisson_mixture_values(_RESOLUTION_GRID, ChannelConfig.fair(K))
    errors = {}
    for form in _SERIES_FORMS:
        for sign in (+1, -1):
            with np.errstate(all="ignore"):
                approx = series_L(_RESOLUTION_GRID, K, form, sign, m_terms)
            err = float(np.max(np.abs(approx - exact) / exact))
            errors[(form, sign)] = err if math.isfinite(err) else math.inf
    (form, sign), best = min(errors.items(), key=lambda kv: kv[1])
    if best > 0.01:
        raise VariantResolutionError(
            f"asymptotic_L: no candidate form within 1% of the exact mixture for K={K} "
            f"(best {form}, sign {sign:+d}: {best:.3g})"
        )
    return VariantChoice(K, form, sign, best, errors)


class AsymptoticValue(NamedTuple):
    value: float
    agreement: float
    variant: VariantChoice


def asymptotic_L(x: float, K: int, m_terms: int = DEFAULT_M_TERMS) -> AsymptoticValue:
    """Series value of ``L(x)`` for fair splitting.

    ``agreement`` is the worst relative error of the selected form against
    the exact Poisson mixture over ``x`` in [1, 100].
    """
    if x < 0:
        raise ValueError("x must be nonnegative")
    choice = resolve_series_variant(K, m_terms)
    value = series_L(x, K, choice.form, choice.sign, m_terms)
    return AsymptoticValue(value, choice.max_rel_error, choice)


# -- oscillations --------------------------------------------------------------


@dataclass(frozen=True)
class OscillationSpectrum:
    """Coefficients ``c_k`` of ``n^{1 - 2 pi i k / ln 2}`` in ``L_n``.

    Equivalently, ``(L_n + 1)/n`` oscillates as ``sum_k c_k e^{-2 pi i k log2 n}``
    around its mean level.
    """

    K: int
    coefficients: dict
    fundamental_period: float
    source: str
    form: str = ""
    mean_level: float = math.nan
    mean_T: float = math.nan
    n_range: tuple = ()

    def amplitude(self, k: int = 1) -> float:
        return abs(self.coefficients[k])


_SPECTRUM_FORMS = ("derived", "gamma-poly", "gamma-poly-2pik")


def _analytic_coefficient(K: int, k: int, form: str) -> complex:
    chi = 2j * math.pi * k / LN2
    if form == "derived":
        # residue of -2 Gamma(s+K+1) / (s K! (1 - 2^{s+1})) at s = chi - 1
        return -(2.0 / LN2) * cmath.exp(log_gamma(K + chi) - math.lgamma(K + 1)) / (chi - 1.0)
    base = chi - 1.0 if form == "gamma-poly" else 2j * math.pi * k - 1.0
    poly = sum(base**j / math.factorial(j) for j in range(K + 1))
    return -(2.0 / LN2) * complex_gamma(chi - 1.0) * poly


def oscillation_spectrum(K: int, k_max: int = DEFAULT_K_MAX, form: str = "derived") -> OscillationSpectrum:
    """Analytic oscillation coefficients from the poles at ``2 pi i k / ln 2 - 1``.

    ``form`` selects ``"derived"`` (residue of the Mellin transform of the
    exact Poisson transform), ``"gamma-poly"`` (``Gamma(s) sum_j s^j/j!`` at the
    pole) or ``"gamma-poly-2pik"`` (the same with ``(2 pi i k - 1)^j`` powers).
    """
    if k_max < 1:
        raise ValueError("k_max must be >= 1")
    if form not in _SPECTRUM_FORMS:
        raise ValueError(f"unknown form {form!r}; choose from {_SPECTRUM_FORMS}")
    coeffs = {}
    for k in range(1, k_max + 1):
        coeffs[k] = _analytic_coefficient(K, k, form)
        coeffs[-k] = _analytic_coefficient(K, -k, form)
    # (L_n + 1)/n -> 2/(K ln 2), hence T_n -> ln 2 / 2 for every K
    return OscillationSpectrum(K, coeffs, 1.0, "analytic", form, 2.0 / (K * LN2), LN2 / 2.0)


def _design(t: np.ndarray, n: np.ndarray, freqs) -> np.ndarray:
    cols = [np.ones_like(t), 1.0 / n, 1.0 / n**2]
    for f in freqs:
        cols.append(np.cos(2 * np.pi * f * t))
        cols.append(np.sin(2 * np.pi * f * t))
    return np.column_stack(cols)


def _fit(t, n, y, freqs):
    A = _design(t, n, freqs)
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - A @ coef
    return coef, float(resid @ resid)


def extract_empirical_oscillation(
    K: int, n_range: tuple[int, int] = DEFAULT_N_RANGE, k_max: int = DEFAULT_K_MAX
) -> OscillationSpectrum:
    """Measure the oscillation of ``(L_n + 1)/n`` against ``log2 n``.

    Uses every integer ``n`` in ``n_range``. The fundamental frequency is
    located by minimizing the residual of a one-harmonic least-squares fit
    over frequencies in [0.5, 1.5] cycles per unit of ``log2 n``; the
    coefficients at integer frequencies then come from a least-squares
    projection that also absorbs the mean and ``1/n``, ``1/n^2`` trends.
    """
    lo, hi = int(n_range[0]), int(n_range[1])
    if lo < 1 or hi <= lo:
        raise ValueError("n_range must satisfy 1 <= lo < hi")
    if hi > 100_000:
        raise ValueError("n_range upper end is limited to 1e5")
    span = math.log2(hi) - math.log2(lo)
    if span < 4.0:
        raise ResolutionError(
            f"extract_empirical_oscillation: n_range spans {span:.2f} periods, need >= 4"
        )
    config = ChannelConfig.fair(K)
    L = cri_table(config).values(hi)
    n = np.arange(lo, hi + 1, dtype=float)
    Ln = L[lo : hi + 1]
    t = np.log2(n)
    y = (Ln + 1.0) / n

    freqs = np.linspace(0.5, 1.5, 201)
    rss = np.array([_fit(t, n, y, [f])[1] for f in freqs])
    j = int(np.argmin(rss))
    res = optimize.minimize_scalar(
        lambda f: _fit(t, n, y, [f])[1],
        bounds=(freqs[max(j - 1, 0)], freqs[min(j + 1, len(freqs) - 1)]),
        method="bounded",
        options={"xatol": 1e-7},
    )
    nu = float(res.x) if res.success else float(freqs[j])

    coef, _ = _fit(t, n, y, range(1, k_max + 1))
    coeffs = {}
    for k in range(1, k_max + 1):
        a, b = coef[3 + 2 * (k - 1)], coef[4 + 2 * (k - 1)]
        coeffs[k] = complex(a, b) / 2.0
        coeffs[-k] = coeffs[k].conjugate()
    mean_T = float(np.mean(n / (K * Ln)))
    return OscillationSpectrum(
        K, coeffs, 1.0 / nu, "empirical", "least-squares", float(coef[0]), mean_T, (lo, hi)
    )
