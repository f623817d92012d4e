"""Exact conditional CRI lengths for BTA and MTA on the K-collision channel.

Three independent evaluation routes are provided for BTA:

* the recursion over smaller batch sizes (production path, stable, O(n^1.5)
  with binomial-window truncation),
* the non-recursive alternating sum (closed form),
* the power-series coefficients ``a_j`` of the Poisson transform and the
  reconstruction ``L_n = sum_j n!/(n-j)! a_j``.

The alternating sums lose roughly ``n`` bits to cancellation, so both are
evaluated with mpmath at a working precision proportional to ``n`` whenever
double precision cannot certify six significant digits.
"""

from __future__ import annotations

import enum
import math
import threading
from dataclasses import dataclass
from functools import lru_cache

import mpmath
import numpy as np

from .errors import DegenerateDenominatorError, PrecisionLossError
from .model import ChannelConfig, Variant, throughput

DEFAULT_N_MAX = 10_000
# Binomial rows are trimmed below this fraction of their peak.
_ROW_TRIM = 1e-30
_MIN_DIGITS = 6
# auto mode falls back to mpmath well before the hard guard would trip
_AUTO_DIGITS = 10


class Method(str, enum.Enum):
    RECURSION = "recursion"
    CLOSED_FORM = "closed-form"
    COEFFICIENT_PATH = "coefficient-path"
    SIMULATION = "simulation"

    @classmethod
    def parse(cls, value: "str | Method") -> "Method":
        if isinstance(value, Method):
            return value
        return cls(str(value).lower().replace("_", "-"))


@dataclass(frozen=True)
class LnTable:
    config: ChannelConfig
    values: np.ndarray
    method: Method

    @property
    def n_max(self) -> int:
        return len(self.values) - 1

    def throughput(self) -> np.ndarray:
        n = np.arange(len(self.values))
        return n / (self.config.K * self.values)

    def rows(self):
        for n, L in enumerate(self.values):
            yield n, float(L)


@dataclass(frozen=True)
class SeriesCoefficients:
    """Power-series coefficients of the Poisson transform ``L(x) = sum a_j x^j``.

    Stored as mpmath numbers at ``prec`` bits, because reconstructing ``L_n``
    from them cancels about ``2n`` bits.
    """

    config: ChannelConfig
    a: tuple
    prec: int

    def as_floats(self) -> np.ndarray:
        return np.array([float(v) for v in self.a])


def g_weight(n: int, i: int, p: float) -> float:
    """Split weight ``C(n,i) (p^i (1-p)^(n-i) + p^(n-i) (1-p)^i)``."""
    if not 0 <= i <= n:
        raise ValueError(f"need 0 <= i <= n, got i={i}, n={n}")
    q = 1.0 - p
    logc = math.lgamma(n + 1) - math.lgamma(i + 1) - math.lgamma(n - i + 1)
    a = math.exp(logc + i * math.log(p) + (n - i) * math.log(q))
    b = math.exp(logc + (n - i) * math.log(p) + i * math.log(q))
    return a + b


class CriTable:
    """Memo of ``L_n`` for one configuration, extended on demand.

    The binomial(n, p) row needed at step ``n`` is derived from the row at
    ``n - 1``; only the part above ``_ROW_TRIM`` times its peak is kept.
    Extension and lookup are serialized by a lock.
    """

    def __init__(self, config: ChannelConfig):
        self.config = config
        self._lock = threading.Lock()
        self._L = np.ones(max(config.K + 1, 64))
        self._n = 0
        self._row = np.array([1.0])
        self._lo = 0

    def _grow(self, n_max: int):
        if n_max >= len(self._L):
            cap = max(n_max + 1, 2 * len(self._L))
            L = np.ones(cap)
            L[: self._n + 1] = self._L[: self._n + 1]
            self._L = L
        K = self.config.K
        p = self.config.p
        q = 1.0 - p
        mta = self.config.variant is Variant.MTA
        L = self._L
        row, lo = self._row, self._lo
        for n in range(self._n + 1, n_max + 1):
            new = np.zeros(len(row) + 1)
            new[1:] += p * row
            new[:-1] += q * row
            peak = new.max()
            keep = np.flatnonzero(new >= _ROW_TRIM * peak)
            first, last = keep[0], keep[-1]
            row = new[first : last + 1]
            lo += first
            if n <= K:
                L[n] = 1.0
                continue
            hi = lo + len(row) - 1
            a, b = max(lo, 1), min(hi, n - 1)
            idx = np.arange(a, b + 1)
            w = row[a - lo : b - lo + 1]
            s = float(np.dot(w, L[idx] + L[n - idx]))
            p0 = q**n
            pn = p**n
            denom = 1.0 - p0 - pn
            if denom <= 0.0:
                raise DegenerateDenominatorError(f"1 - g(n,0,p) vanished at n={n}")
            extra = pn if mta else p0 + pn
            L[n] = (1.0 + s + extra) / denom
        self._row, self._lo = row, lo
        self._n = max(self._n, n_max)

    def values(self, n_max: int) -> np.ndarray:
        with self._lock:
            if n_max > self._n:
                self._grow(n_max)
            return self._L[: n_max + 1].copy()

    def __getitem__(self, n: int) -> float:
        if n < 0:
            raise ValueError("n must be nonnegative")
        with self._lock:
            if n > self._n:
                self._grow(max(n, min(2 * self._n, DEFAULT_N_MAX)))
            return float(self._L[n])


_tables: dict = {}
_tables_lock = threading.Lock()


def cri_table(config: ChannelConfig) -> CriTable:
    """Shared memo for ``config``; one table per (K, p, variant)."""
    with _tables_lock:
        table = _tables.get(config)
        if table is None:
            table = _tables[config] = CriTable(config)
        return table


def _require_bta(config: ChannelConfig):
    if config.variant is not Variant.BTA:
        raise ValueError("this evaluation route applies to BTA only")


def expected_cri_recursive(n: int, config: ChannelConfig) -> float:
    _require_bta(config)
    return cri_table(config)[n]


def expected_cri_mta(n: int, config: ChannelConfig) -> float:
    """MTA length from the collided-subtree system.

    ``A_n`` is the CRI length started by a transmission of ``n`` users and
    ``B_n`` the remainder after a collision of ``n``. An idle group-0 slot
    leaves all ``n`` users in group 1, so they re-split at once and the cost
    is ``1 + B_n``; otherwise ``A_i + A_{n-i}``. Hence
    ``B_n (1 - P_0 - P_n) = P_0 + sum_{0<i<n} P_i (A_i + A_{n-i}) + 2 P_n``.
    """
    if config.variant is not Variant.MTA:
        config = config.with_variant(Variant.MTA)
    return cri_table(config)[n]


def expected_cri(n: int, config: ChannelConfig) -> float:
    """Variant-appropriate exact ``L_n`` via the recursion."""
    return cri_table(config)[n]


def conditional_throughput(n: int, config: ChannelConfig) -> float:
    if n < 1:
        raise ValueError("throughput is defined for n >= 1")
    return throughput(n, expected_cri(n, config), config.K)


def _working_prec(n: int) -> int:
    return 2 * n + 128


def _closed_form_terms_float(n: int, K: int, p: float) -> list[float]:
    q = 1.0 - p
    terms = []
    for j in range(1, n - K + 1):
        if p == 0.5:
            d = 1.0 - 2.0 ** (-j - K + 1)
        else:
            d = 1.0 - p ** (j + K) - q ** (j + K)
        c = float(math.comb(n, K) * math.comb(n - K, j))
        terms.append(-2.0 * j * (-1) ** j * c / ((j + K) * d))
    return terms


def _surviving_digits(value: float, terms: list[float]) -> float:
    scale = math.fsum(abs(t) for t in terms)
    if scale == 0.0:
        return float("inf")
    err = scale * np.finfo(float).eps
    if value == 0.0:
        return 0.0
    return -math.log10(err / abs(value))


def _closed_form_mp(n: int, K: int, p: float) -> float:
    with mpmath.workprec(_working_prec(n)):
        pm = mpmath.mpf(p)
        qm = 1 - pm
        total = mpmath.mpf(0)
        cnk = math.comb(n, K)
        c = 1  # C(n - K, j), updated in place
        for j in range(1, n - K + 1):
            c = c * (n - K - j + 1) // j
            if p == 0.5:
                d = 1 - mpmath.ldexp(1, -j - K + 1)
            else:
                d = 1 - pm ** (j + K) - qm ** (j + K)
            num = 2 * j * (-1) ** j * cnk * c
            total += num / ((j + K) * d)
        return float(1 - total)


def expected_cri_closed_form(n: int, config: ChannelConfig, precision: str = "auto") -> float:
    """Non-recursive alternating-sum expression for BTA.

    ``precision`` is ``"double"`` (compensated summation; raises
    :class:`PrecisionLossError` if fewer than six digits survive),
    ``"mp"`` (mpmath at ``2n + 128`` bits) or ``"auto"`` (double when it
    certifies ten digits, mp otherwise).
    """
    _require_bta(config)
    if precision not in ("auto", "double", "mp"):
        raise ValueError(f"unknown precision mode {precision!r}")
    K, p = config.K, config.p
    if n < 0:
        raise ValueError("n must be nonnegative")
    if n <= K:
        return 1.0
    if precision == "mp":
        return _closed_form_mp(n, K, p)
    try:
        terms = _closed_form_terms_float(n, K, p)
    except OverflowError:
        terms = None
    if terms is not None:
        value = 1.0 + math.fsum(terms)
        digits = _surviving_digits(value, terms) if math.isfinite(value) else 0.0
        if digits >= (_MIN_DIGITS if precision == "double" else _AUTO_DIGITS):
            return value
    if precision == "double":
        raise PrecisionLossError(
            f"expected_cri_closed_form: cancellation leaves fewer than {_MIN_DIGITS} "
            f"digits at n={n}, K={K}"
        )
    return _closed_form_mp(n, K, p)


@lru_cache(maxsize=64)
def _series_coefficients_cached(n_max: int, K: int, p: float, prec: int) -> tuple:
    with mpmath.workprec(prec):
        pm = mpmath.mpf(p)
        qm = 1 - pm
        a = [mpmath.mpf(1)] + [mpmath.mpf(0)] * min(K, n_max)
        for n in range(K + 1, n_max + 1):
            s = mpmath.mpf(0)
            for k in range(K + 1):
                s += mpmath.mpf((-1) ** (n - k + 1)) / (
                    mpmath.factorial(k) * mpmath.factorial(n - k)
                )
            a.append(2 * s / (1 - pm**n - qm**n))
        return tuple(a[: n_max + 1])


def series_coefficients(n_max: int, config: ChannelConfig) -> SeriesCoefficients:
    _require_bta(config)
    if n_max < 0:
        raise ValueError("n_max must be nonnegative")
    prec = _working_prec(n_max)
    a = _series_coefficients_cached(n_max, config.K, config.p, prec)
    return SeriesCoefficients(config, a, prec)


def reconstruct_from_series(n: int, coeffs: SeriesCoefficients) -> float:
    """``L_n = sum_{j<=n} n!/(n-j)! a_j``."""
    if n >= len(coeffs.a):
        raise ValueError(f"coefficients only cover n <= {len(coeffs.a) - 1}")
    with mpmath.workprec(coeffs.prec):
        total = mpmath.mpf(0)
        falling = 1
        for j in range(n + 1):
            total += falling * coeffs.a[j]
            falling *= n - j
        return float(total)


def expected_cri_coefficient_path(n: int, config: ChannelConfig) -> float:
    return reconstruct_from_series(n, series_coefficients(max(n, 1), config))


def ln_table(n_max: int, config: ChannelConfig, method: Method | str = Method.RECURSION) -> LnTable:
    method = Method.parse(method)
    if method is Method.RECURSION:
        values = cri_table(config).values(n_max)
    elif method is Method.CLOSED_FORM:
        values = np.array([expected_cri_closed_form(n, config) for n in range(n_max + 1)])
    elif method is Method.COEFFICIENT_PATH:
        coeffs = series_coefficients(max(n_max, 1), config)
        values = np.array([reconstruct_from_series(n, coeffs) for n in range(n_max + 1)])
    else:
        raise ValueError("simulation tables are produced by the simulator module")
    return LnTable(config, values, method)
