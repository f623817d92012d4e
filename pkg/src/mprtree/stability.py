"""Windowed access under Poisson arrivals.

A window of length ``Delta`` slots collects ``Poisson(lambda * Delta)`` users,
resolved in one CRI of mean length ``L(lambda * Delta)``. Stability needs
``L(lambda * Delta) < Delta``. Linear bounds ``alpha n - 1 <= L_n <= beta n - 1``
give a closed bounding function ``f`` and hence the throughput bounds
``lambda_S <= lambda_U``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from functools import lru_cache

import numpy as np
from scipy import optimize, stats
from scipy.special import gammaln

from .errors import NonConvergenceError, OptimizerError
from .exact import cri_table
from .model import ChannelConfig

DEFAULT_M = 50
DEFAULT_N_SCAN_MAX = 200_000
TAIL_RTOL = 1e-12
_SCAN_CHUNK = 20_000
_GRID_POINTS = 4001
_BRACKET_DOUBLINGS = 12


@dataclass(frozen=True)
class PoissonMixture:
    config: ChannelConfig
    x: float
    L_of_x: float
    truncation_n: int
    tail_bound: float


@dataclass(frozen=True)
class LinearBounds:
    m: int
    alpha: float
    beta: float
    n_alpha: int
    n_beta: int
    n_scan_max: int


@dataclass(frozen=True)
class StabilityReport:
    K: int
    m: int
    alpha_m: float
    beta_m: float
    lambda_S: float
    lambda_U: float
    delta_S: float
    load_at_opt: float
    n_scan_max: int = DEFAULT_N_SCAN_MAX

    @property
    def lambda_S_over_K(self) -> float:
        return self.lambda_S / self.K

    @property
    def lambda_U_over_K(self) -> float:
        return self.lambda_U / self.K

    def as_dict(self) -> dict:
        d = asdict(self)
        d["lambda_S_over_K"] = self.lambda_S_over_K
        d["lambda_U_over_K"] = self.lambda_U_over_K
        return d


def truncation_point(x: float) -> int:
    return int(math.ceil(x + 12.0 * math.sqrt(x) + 50.0))


def poisson_mixture_L(x: float, config: ChannelConfig, m: int = DEFAULT_M) -> PoissonMixture:
    """Expected CRI length when the batch size is Poisson with mean ``x``.

    The neglected tail is bounded through ``L_n <= beta_m n - 1``:
    ``sum_{n>N} L_n P(n) <= beta_m x P(N' >= N)``.
    """
    if x < 0:
        raise ValueError("x must be nonnegative")
    N = truncation_point(x)
    L = cri_table(config).values(N)
    n = np.arange(N + 1)
    pmf = stats.poisson.pmf(n, x) if x > 0 else (n == 0).astype(float)
    value = float(np.dot(L, pmf))
    if x == 0:
        tail = 0.0
    else:
        beta = linear_bounds(m, config).beta
        tail = float(max(beta, 0.0) * x * stats.poisson.sf(N - 1, x))
    return PoissonMixture(config, float(x), value, N, tail)


def poisson_mixture_values(xs, config: ChannelConfig) -> np.ndarray:
    """Vectorized ``L(x)`` for many ``x``; no tail bookkeeping."""
    xs = np.asarray(xs, dtype=float)
    N = truncation_point(float(xs.max()))
    L = cri_table(config).values(N)
    n = np.arange(N + 1)
    out = np.empty_like(xs)
    for k, x in np.ndenumerate(xs):
        out[k] = np.dot(L, stats.poisson.pmf(n, x)) if x > 0 else L[0]
    return out


def _ratio_scan(L_head: np.ndarray, m: int, n_lo: int, n_hi: int) -> np.ndarray:
    i = np.arange(m)
    n = np.arange(n_lo, n_hi + 1, dtype=float)[:, None]
    logw = gammaln(n + 1) - gammaln(i + 1) - gammaln(n - i + 1)
    w = np.exp(logw - logw[:, -1:])
    return (w @ (L_head + 1.0)) / (w @ i.astype(float))


@lru_cache(maxsize=256)
def linear_bounds(
    m: int, config: ChannelConfig, n_scan_max: int = DEFAULT_N_SCAN_MAX
) -> LinearBounds:
    """Infimum and supremum over ``n > m`` of
    ``sum_{i<m} C(n,i) (L_i + 1) / sum_{i<m} C(n,i) i``.

    Every ``n`` in ``(m, n_scan_max]`` is evaluated, and the ``n -> inf``
    limit ``(L_{m-1} + 1) / (m - 1)`` joins the candidates. Raises
    :class:`NonConvergenceError` when the last decade of the scan still moves
    an extremum by more than 1e-6 (relative) and the ratio has not yet
    settled on its limit. For ``m = 1`` the denominator vanishes and both
    bounds are infinite.
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    if m == 1:
        return LinearBounds(1, math.inf, math.inf, -1, -1, n_scan_max)
    if n_scan_max <= m + 1:
        raise ValueError("n_scan_max must exceed m + 1")
    L_head = cri_table(config).values(m - 1)
    limit = float((L_head[m - 1] + 1.0) / (m - 1))
    decade = max(m + 1, n_scan_max // 10)
    lo, n_lo = limit, -1
    hi, n_hi = limit, -1
    head = None
    r_last = limit
    start = m + 1
    while start <= n_scan_max:
        stop = min(start + _SCAN_CHUNK - 1, n_scan_max)
        r = _ratio_scan(L_head, m, start, stop)
        if head is None and stop >= decade:
            cut = decade - start + 1
            head = (min(lo, float(r[:cut].min())), max(hi, float(r[:cut].max())))
        k_min, k_max = int(np.argmin(r)), int(np.argmax(r))
        if r[k_min] < lo:
            lo, n_lo = float(r[k_min]), start + k_min
        if r[k_max] > hi:
            hi, n_hi = float(r[k_max]), start + k_max
        r_last = float(r[-1])
        start = stop + 1
    drift = max(abs(lo - head[0]) / abs(lo), abs(hi - head[1]) / abs(hi))
    settled = abs(r_last - limit) <= 1e-6 * abs(limit)
    if drift > 1e-6 and not settled:
        raise NonConvergenceError(
            f"linear_bounds: extrema still drifting at n_scan_max={n_scan_max} "
            f"(alpha {head[0]:.8g} -> {lo:.8g}, beta {head[1]:.8g} -> {hi:.8g})"
        )
    return LinearBounds(m, lo, hi, n_lo, n_hi, n_scan_max)


def bounding_f(x: float, k: int, z, config: ChannelConfig):
    """``x z - 1 + sum_{i<=k} (L_i - x i + 1) z^i/i! e^{-z}``; vectorized in ``z``."""
    z_arr = np.asarray(z, dtype=float)
    if np.any(z_arr < 0):
        raise ValueError("z must be nonnegative")
    L = cri_table(config).values(k)
    i = np.arange(k + 1)
    coef = L - x * i + 1.0
    zz = z_arr[..., None]
    pmf = stats.poisson.pmf(i, zz)
    pmf = np.where(zz == 0, (i == 0).astype(float), pmf)
    out = x * z_arr - 1.0 + (pmf * coef).sum(axis=-1)
    return float(out) if np.ndim(out) == 0 else out


def _maximize_ratio(x: float, m: int, config: ChannelConfig) -> tuple[float, float]:
    """Return ``(z*, z*/f(x, m, z*))``.

    The search starts on ``(0, 4K]`` and widens the bracket while the best
    grid point sits on its upper edge.
    """
    z_hi = 4.0 * config.K
    for _ in range(_BRACKET_DOUBLINGS + 1):
        grid = np.linspace(z_hi / (_GRID_POINTS - 1), z_hi, _GRID_POINTS - 1)
        fv = bounding_f(x, m, grid, config)
        if np.any(fv <= 0):
            raise OptimizerError("stable_throughput_bounds: bounding function is not positive")
        obj = grid / fv
        j = int(np.argmax(obj))
        if j < len(grid) - 1:
            break
        z_hi *= 2.0
    else:
        raise OptimizerError(
            f"stable_throughput_bounds: maximizer still on the bracket edge at z = {z_hi / 2:.3g}"
        )
    a = grid[j - 1] if j > 0 else grid[0] / 2
    b = grid[j + 1]
    res = optimize.minimize_scalar(
        lambda z: -z / bounding_f(x, m, z, config),
        bounds=(a, b),
        method="bounded",
        options={"xatol": 1e-10 * grid[j]},
    )
    if not res.success or -res.fun < obj[j] * (1 - 1e-12):
        return float(grid[j]), float(obj[j])
    return float(res.x), float(-res.fun)


def stable_throughput_bounds(
    m: int = DEFAULT_M, config: ChannelConfig | None = None, n_scan_max: int = DEFAULT_N_SCAN_MAX
) -> StabilityReport:
    """Throughput bounds ``lambda_S <= lambda_U`` (packets/slot) from order-``m`` linear bounds.

    For ``m <= K + 1`` every ``L_i`` entering the bound equals 1 and the
    linear bound does not hold for all ``n > m`` (``L_3 > 3 beta_2 - 1`` at
    ``K = 1``), so nothing is certified: ``lambda_S = lambda_U = 0``.
    """
    config = config or ChannelConfig()
    bounds = linear_bounds(m, config, n_scan_max)
    if m <= config.K + 1:
        return StabilityReport(
            config.K, m, bounds.alpha, bounds.beta, 0.0, 0.0, math.inf, math.nan, n_scan_max
        )
    z_s, lam_s = _maximize_ratio(bounds.beta, m, config)
    _, lam_u = _maximize_ratio(bounds.alpha, m, config)
    delta_s = float(bounding_f(bounds.beta, m, z_s, config))
    return StabilityReport(
        K=config.K,
        m=m,
        alpha_m=bounds.alpha,
        beta_m=bounds.beta,
        lambda_S=lam_s,
        lambda_U=lam_u,
        delta_S=delta_s,
        load_at_opt=z_s,
        n_scan_max=n_scan_max,
    )


def effective_m(m: int, K: int) -> int:
    """Bound order used by the K sweep.

    With ``m <= K + 1`` the bound is vacuous, and just above that it is still
    loose, so the sweep raises ``m`` to at least ``2K``.
    """
    return max(m, 2 * K)


def sweep_lambda_S_over_K(
    K_list, m: int = DEFAULT_M, p: float = 0.5, n_scan_max: int = DEFAULT_N_SCAN_MAX
) -> list[StabilityReport]:
    reports = []
    for K in K_list:
        config = ChannelConfig(K=K, p=p)
        reports.append(stable_throughput_bounds(effective_m(m, K), config, n_scan_max))
    return reports


def stability_certificate(report: StabilityReport, config: ChannelConfig, eps: float = 1e-3):
    """Check ``L(lambda_S Delta (1 - eps)) < Delta`` at ``Delta = Delta_S``.

    Returns ``(holds, L_value, Delta)``.
    """
    delta = report.delta_S
    L_val = poisson_mixture_L(report.lambda_S * delta * (1 - eps), config).L_of_x
    return L_val < delta, L_val, delta
