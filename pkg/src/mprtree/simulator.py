"""Slot-level Monte Carlo of the counter protocol.

Every user keeps a counter ``C``. It transmits when ``C == 0`` and is done
once decoded (``C < 0``). After a collision (feedback ``e``) transmitters
draw ``b`` (``0`` with probability ``p``) and everybody else steps back by
one; after an idle or success slot all waiting users move forward by one.
The CRI ends when no group is left on the stack: starting from one pending
group, every slot consumes one and every collision pushes two.

MTA adds one rule. When the slot right after a split is idle, the second
group is certain to collide, so its users split again at once instead of
wasting a slot on that collision.

Two engines produce CRI lengths:

* ``"counter"`` runs the rule above literally, slot by slot, for many CRIs in
  parallel with numpy;
* ``"tree"`` only tracks group sizes (one binomial draw per split), which is
  much cheaper and has the same slot-count distribution.
"""

from __future__ import annotations

import enum
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .errors import RunawayError
from .model import ChannelConfig, Feedback, Variant, classify_slot

MAX_SLOTS = 10**9
CHUNK_REPS = 1 << 14
_MIN_ARRIVAL_HORIZON = 10**4
_WINDOW_CHUNK = 1 << 18
_BACKLOG_SAMPLES = 4000
_INSTABILITY_BLOCKS = 20
INSTABILITY_PVALUE = 0.01


# -- single CRI, literal ---------------------------------------------------------


@dataclass(frozen=True)
class UserState:
    id: int
    counter: int
    resolved: bool


@dataclass(frozen=True)
class SlotRecord:
    slot: int
    occupancy: int
    feedback: Feedback


@dataclass(frozen=True)
class CriTrace:
    n: int
    config: ChannelConfig
    slots: tuple
    split_decisions: tuple
    decode_slot: tuple
    users: tuple

    @property
    def length(self) -> int:
        return len(self.slots)

    @property
    def feedback(self) -> list[str]:
        return [s.feedback.symbol for s in self.slots]

    def csv_rows(self):
        for s in self.slots:
            yield s.slot, s.occupancy, s.feedback.symbol


class _Splits:
    """Source of split bits ``b``: replayed from a list or drawn from an RNG."""

    def __init__(self, p: float, rng: np.random.Generator | None, replay=None):
        self.p = p
        self.rng = rng
        self.replay = None if replay is None else list(replay)
        self.pos = 0

    def draw(self, k: int) -> list[int]:
        if self.replay is not None:
            if self.pos + k > len(self.replay):
                raise ValueError("replayed split decisions ran out")
            out = [int(b) for b in self.replay[self.pos : self.pos + k]]
            self.pos += k
            if any(b not in (0, 1) for b in out):
                raise ValueError("split decisions must be 0 or 1")
            return out
        return (self.rng.random(k) >= self.p).astype(int).tolist()


def _run_counter_scalar(n: int, config: ChannelConfig, splits: _Splits, record: bool):
    K = config.K
    mta = config.variant is Variant.MTA
    counters = [0] * n
    decode = [-1] * n
    slots, drawn = [], []
    pending, j = 1, 0
    just_split = False
    while pending > 0:
        j += 1
        if j > MAX_SLOTS:
            raise RunawayError(f"CRI exceeded {MAX_SLOTS} slots")
        tx = [u for u, c in enumerate(counters) if c == 0]
        fb = classify_slot(len(tx), K)
        if record:
            slots.append(SlotRecord(j, len(tx), fb))
        if fb is Feedback.ERROR:
            bits = splits.draw(len(tx))
            drawn.extend(bits)
            for u, c in enumerate(counters):
                if c > 0:
                    counters[u] = c + 1
            for u, b in zip(tx, bits):
                counters[u] = b
            pending += 1
            just_split = True
        elif fb is Feedback.IDLE and mta and just_split:
            # the second group would surely collide: it re-splits right away
            group = [u for u, c in enumerate(counters) if c == 1]
            bits = splits.draw(len(group))
            drawn.extend(bits)
            for u, b in zip(group, bits):
                counters[u] = b
        else:
            for u, c in enumerate(counters):
                if c == 0:
                    counters[u] = -1
                    decode[u] = j
                elif c > 0:
                    counters[u] = c - 1
            pending -= 1
            just_split = False
    return j, slots, drawn, decode, counters


def run_cri(
    n: int, config: ChannelConfig | None = None, rng_seed: int = 0, split_decisions=None
) -> CriTrace:
    """Run one CRI for ``n`` users, slot by slot.

    ``split_decisions`` replays recorded ``b`` draws (in user order within
    each collision slot) instead of drawing them from the seeded RNG.
    """
    config = config or ChannelConfig()
    if n < 0:
        raise ValueError("n must be nonnegative")
    rng = None if split_decisions is not None else np.random.default_rng(rng_seed)
    splits = _Splits(config.p, rng, split_decisions)
    _, slots, drawn, decode, counters = _run_counter_scalar(n, config, splits, record=True)
    users = tuple(UserState(u, c, c < 0) for u, c in enumerate(counters))
    return CriTrace(n, config, tuple(slots), tuple(drawn), tuple(decode), users)


# -- many CRIs in parallel ---------------------------------------------------


def counter_engine(batch_sizes, config: ChannelConfig, rng: np.random.Generator):
    """Run one CRI per batch with the literal counter rule, vectorized over batches.

    Returns ``(lengths, user_batch, decode_slot)``: the CRI length of every
    batch and, for every user, its batch index and the 1-based slot of the
    CRI in which it was decoded.
    """
    sizes = np.asarray(batch_sizes, dtype=np.int64)
    n_cri = len(sizes)
    K, p = config.K, config.p
    mta = config.variant is Variant.MTA
    user_batch = np.repeat(np.arange(n_cri), sizes)
    decode = np.zeros(len(user_batch), dtype=np.int64)
    lengths = np.zeros(n_cri, dtype=np.int64)

    # live state, compacted as users and CRIs finish
    uid = np.arange(len(user_batch))
    ub = user_batch.copy()
    C = np.zeros(len(uid), dtype=np.int64)
    live = np.arange(n_cri)
    slot_of = np.zeros(n_cri, dtype=np.int64)
    pending = np.ones(n_cri, dtype=np.int64)
    split_flag = np.zeros(n_cri, dtype=bool)
    # map from batch index to position in ``live``
    pos = np.arange(n_cri)

    while len(live):
        slot_of[live] += 1
        if slot_of[live].max() > MAX_SLOTS:
            raise RunawayError(f"CRI exceeded {MAX_SLOTS} slots")
        tx = C == 0
        local = pos[ub]
        occ = np.bincount(local[tx], minlength=len(live))
        fb = np.where(occ == 0, 0, np.where(occ <= K, 1, 2))
        fu = fb[local]

        err_u = fu == 2
        skip_c = (fb == 0) & split_flag if mta else np.zeros(len(live), dtype=bool)
        skip_u = skip_c[local]

        new_C = C - 1
        coll = err_u & tx
        new_C[err_u & ~tx] = C[err_u & ~tx] + 1
        new_C[coll] = rng.random(int(coll.sum())) >= p
        if mta:
            resplit = skip_u & (C == 1)
            new_C[skip_u] = C[skip_u]
            new_C[resplit] = rng.random(int(resplit.sum())) >= p
        done_u = tx & (fu == 1)
        decode[uid[done_u]] = slot_of[ub[done_u]]

        pending[live] += np.where(fb == 2, 1, np.where(skip_c, 0, -1))
        split_flag = (fb == 2) | skip_c

        keep_u = new_C >= 0
        uid, ub, C = uid[keep_u], ub[keep_u], new_C[keep_u]
        alive = pending[live] > 0
        finished = live[~alive]
        lengths[finished] = slot_of[finished]
        if not alive.all():
            live = live[alive]
            split_flag = split_flag[alive]
            pos[live] = np.arange(len(live))
    return lengths, user_batch, decode


def tree_engine(batch_sizes, config: ChannelConfig, rng: np.random.Generator) -> np.ndarray:
    """CRI lengths from group sizes only, one level of the split tree at a time.

    Every group costs one slot, including empty ones; groups larger than
    ``K`` split binomially. Under MTA a second group whose sibling was empty
    re-splits without being charged.
    """
    sizes = np.asarray(batch_sizes, dtype=np.int64)
    K, p = config.K, config.p
    mta = config.variant is Variant.MTA
    lengths = np.zeros(len(sizes), dtype=np.int64)
    c = sizes
    r = np.arange(len(sizes))
    free = np.zeros(len(sizes), dtype=bool)
    depth = 0
    while len(c):
        depth += 1
        if depth > MAX_SLOTS:
            raise RunawayError(f"split tree deeper than {MAX_SLOTS}")
        lengths += np.bincount(r[~free], minlength=len(sizes))
        big = c > K
        c, r = c[big], r[big]
        g = rng.binomial(c, p)
        skip = (g == 0) if mta else np.zeros(len(c), dtype=bool)
        c = np.concatenate((g, c - g))
        r = np.concatenate((r, r))
        free = np.concatenate((np.zeros(len(g), dtype=bool), skip))
    return lengths


def stack_cri(n: int, config: ChannelConfig, rng: np.random.Generator) -> tuple[int, list]:
    """One CRI from a stack of group sizes, depth first.

    Returns the length and the decode slot of each of the ``n`` users (users
    are exchangeable, so only the multiset of slots matters). The cost is
    proportional to the CRI length rather than to ``n`` times it.
    """
    K, p = config.K, config.p
    mta = config.variant is Variant.MTA
    stack = [n]
    decode = []
    j = 0
    just_split = False
    while stack:
        c = stack.pop()
        j += 1
        if j > MAX_SLOTS:
            raise RunawayError(f"CRI exceeded {MAX_SLOTS} slots")
        if c == 0 and mta and just_split:
            c = stack.pop()
        elif c <= K:
            decode.extend([j] * c)
            just_split = False
            continue
        g = int(rng.binomial(c, p))
        stack += [c - g, g]
        just_split = True
    return j, decode


class Engine(str, enum.Enum):
    TREE = "tree"
    COUNTER = "counter"


# -- reports -----------------------------------------------------------------


@dataclass(frozen=True)
class SimulationReport:
    replications: int
    mean: float
    ci95_halfwidth: float
    seed: int
    variance: float = 0.0
    raw_samples: np.ndarray | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.replications < 2:
            raise ValueError("a report needs at least two replications")

    @classmethod
    def from_samples(cls, samples, seed: int, keep_samples: bool = False) -> "SimulationReport":
        x = np.asarray(samples, dtype=float)
        var = float(x.var(ddof=1))
        half = float(stats.norm.ppf(0.975) * math.sqrt(var / len(x)))
        return cls(len(x), float(x.mean()), half, seed, var, x if keep_samples else None)

    def ci_halfwidth(self, level: float = 0.95) -> float:
        z = stats.norm.ppf(0.5 + level / 2)
        return float(z * math.sqrt(self.variance / self.replications))

    def covers(self, value: float, level: float = 0.95) -> bool:
        return abs(value - self.mean) <= self.ci_halfwidth(level) + 1e-12 * abs(value)

    def as_dict(self, config: ChannelConfig | None = None) -> dict:
        d = {
            "seed": self.seed,
            "reps": self.replications,
            "mean": self.mean,
            "ci95": self.ci95_halfwidth,
            "variance": self.variance,
            "method": "mc",
        }
        if config is not None:
            d = {"config": config.as_dict(), **d}
        return d


def report_json(report: SimulationReport, config: ChannelConfig) -> str:
    return json.dumps(report.as_dict(config), indent=2, sort_keys=True)


def _chunk_lengths(n_values, config, engine, seq):
    rng = np.random.default_rng(seq)
    if engine is Engine.TREE:
        return tree_engine(n_values, config, rng)
    return counter_engine(n_values, config, rng)[0]


def simulate_lengths(
    n: int,
    config: ChannelConfig,
    reps: int,
    seed: int,
    engine: Engine | str = Engine.TREE,
    workers: int = 1,
) -> np.ndarray:
    """``reps`` i.i.d. CRI lengths for a batch of ``n``.

    Replications are cut into fixed chunks, each with its own substream
    spawned from ``seed``; results are concatenated in chunk order, so the
    worker count never changes the output.
    """
    engine = Engine(engine)
    if n < 0:
        raise ValueError("n must be nonnegative")
    n_chunks = -(-reps // CHUNK_REPS)
    seqs = np.random.SeedSequence(seed).spawn(n_chunks)
    sizes = [min(CHUNK_REPS, reps - i * CHUNK_REPS) for i in range(n_chunks)]
    jobs = [(np.full(s, n), config, engine, q) for s, q in zip(sizes, seqs)]
    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            parts = list(ex.map(lambda a: _chunk_lengths(*a), jobs))
    else:
        parts = [_chunk_lengths(*a) for a in jobs]
    return np.concatenate(parts)


def estimate_L_n(
    n: int,
    config: ChannelConfig | None = None,
    reps: int = 10_000,
    seed: int = 0,
    engine: Engine | str = Engine.TREE,
    keep_samples: bool = False,
    workers: int = 1,
) -> SimulationReport:
    """Monte Carlo mean CRI length with a normal-approximation 95% CI."""
    config = config or ChannelConfig()
    if reps < 100:
        raise ValueError("reps must be at least 100")
    x = simulate_lengths(n, config, reps, seed, engine, workers)
    return SimulationReport.from_samples(x, seed, keep_samples)


# -- continuous operation ----------------------------------------------------


class Access(str, enum.Enum):
    GATED = "gated"
    WINDOWED = "windowed"


@dataclass(frozen=True)
class ArrivalProcess:
    """Poisson arrivals at ``rate`` packets/slot over ``horizon`` slots."""

    rate: float
    access: Access = Access.WINDOWED
    delta: float | None = None
    horizon: int = 10**6
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "access", Access(self.access))
        if not self.rate > 0:
            raise ValueError("rate must be positive")
        if self.access is Access.WINDOWED and not (self.delta and self.delta > 0):
            raise ValueError("windowed access needs a window length delta > 0")
        if self.horizon < _MIN_ARRIVAL_HORIZON:
            raise ValueError(f"horizon must be at least {_MIN_ARRIVAL_HORIZON} slots")


@dataclass(frozen=True)
class ArrivalReport:
    delay: SimulationReport
    backlog_t: np.ndarray = field(repr=False)
    backlog: np.ndarray = field(repr=False)
    slope: float
    pvalue: float
    unstable: bool
    batches: int
    slots_used: int

    def as_dict(self, config: ChannelConfig, process: ArrivalProcess) -> dict:
        return {
            "config": config.as_dict(),
            "seed": process.seed,
            "rate": process.rate,
            "access": process.access.value,
            "delta": process.delta,
            "horizon": process.horizon,
            "packets": self.delay.replications,
            "mean_delay_slots": self.delay.mean,
            "ci95": self.delay.ci95_halfwidth,
            "batches": self.batches,
            "backlog_slope": self.slope,
            "backlog_pvalue": self.pvalue,
            "unstable": self.unstable,
            "method": "mc",
        }


def backlog_trend(t: np.ndarray, backlog: np.ndarray) -> tuple[float, float, bool]:
    """Regress block means of the backlog over the last half of the run.

    Block means tame the strong autocorrelation of the raw trajectory.
    Returns ``(slope, pvalue, unstable)``.
    """
    half = t >= t[-1] / 2
    y = backlog[half].astype(float)
    if len(y) < 2 * _INSTABILITY_BLOCKS:
        raise ValueError("too few backlog samples to test for a trend")
    blocks = np.array_split(y, _INSTABILITY_BLOCKS)
    means = np.array([b.mean() for b in blocks])
    if np.ptp(means) == 0:
        return 0.0, 1.0, False
    fit = stats.linregress(np.arange(len(means)), means)
    unstable = bool(fit.slope > 0 and fit.pvalue < INSTABILITY_PVALUE)
    return float(fit.slope), float(fit.pvalue), unstable


def _delay_report(total: float, total_sq: float, count: int, seed: int) -> SimulationReport:
    if count < 2:
        return SimulationReport(2, math.nan, math.nan, seed, math.nan)
    mean = total / count
    var = max(total_sq / count - mean * mean, 0.0) * count / (count - 1)
    half = float(stats.norm.ppf(0.975) * math.sqrt(var / count))
    return SimulationReport(count, mean, half, seed, var)


def _run_windowed(proc: ArrivalProcess, config: ChannelConfig) -> ArrivalReport:
    rng = np.random.default_rng(proc.seed)
    delta = float(proc.delta)
    n_windows = int(proc.horizon // delta)
    if n_windows < 1:
        raise ValueError("horizon shorter than one window")
    ends, finishes = [], []
    t_free = 0
    total = total_sq = 0.0
    count = 0
    for lo in range(0, n_windows, _WINDOW_CHUNK):
        idx = np.arange(lo, min(lo + _WINDOW_CHUNK, n_windows))
        sizes = rng.poisson(proc.rate * delta, len(idx))
        lengths, ub, dslot = counter_engine(sizes, config, rng)
        ready = np.ceil((idx + 1) * delta).astype(np.int64)
        # start_i = max(start_{i-1} + len_{i-1}, ready_i), seeded with t_free
        before = np.concatenate(([0], np.cumsum(lengths)[:-1]))
        lead = np.maximum.accumulate(np.maximum(ready - before, t_free - before[0]))
        start = before + lead
        finish = start + lengths
        t_free = int(finish[-1])
        arrive = (idx[ub] + rng.random(len(ub))) * delta
        d = start[ub] + dslot - arrive
        total += float(d.sum())
        total_sq += float(np.dot(d, d))
        count += len(d)
        ends.append((idx + 1) * delta)
        finishes.append(finish)
    closed = np.concatenate(ends)
    finish = np.concatenate(finishes)
    t = np.linspace(0, proc.horizon, _BACKLOG_SAMPLES + 1)[1:]
    backlog = np.searchsorted(closed, t, side="right") - np.searchsorted(finish, t, side="right")
    slope, pval, unstable = backlog_trend(t, backlog)
    return ArrivalReport(
        _delay_report(total, total_sq, count, proc.seed),
        t, backlog, slope, pval, unstable, n_windows, t_free,
    )


def _run_gated(proc: ArrivalProcess, config: ChannelConfig) -> ArrivalReport:
    rng = np.random.default_rng(proc.seed)
    # the first CRI serves whatever arrives during an initial idle slot
    start, prev_start = 1, 0
    starts, waiting = [], []
    total = total_sq = 0.0
    count = 0
    batches = 0
    while start < proc.horizon:
        span = start - prev_start
        n = int(rng.poisson(proc.rate * span))
        arrive = prev_start + rng.random(n) * span
        length, decode = stack_cri(n, config, rng)
        if n:
            d = start + np.asarray(decode) - arrive
            total += float(d.sum())
            total_sq += float(np.dot(d, d))
            count += n
        starts.append(start)
        waiting.append(n)
        prev_start, start = start, start + length
        batches += 1
    # packets in the system: the batch in service plus the next batch,
    # whose arrivals are spread over the current CRI
    s_arr = np.asarray(starts + [start], dtype=float)
    n_arr = np.asarray(waiting + [0], dtype=float)
    n_arr[-1] = proc.rate * (s_arr[-1] - s_arr[-2])
    t = np.linspace(0, proc.horizon, _BACKLOG_SAMPLES + 1)[1:]
    k = np.clip(np.searchsorted(s_arr, t, side="right") - 1, 0, len(starts) - 1)
    frac = (t - s_arr[k]) / (s_arr[k + 1] - s_arr[k])
    backlog = n_arr[k] + n_arr[k + 1] * np.clip(frac, 0.0, 1.0)
    slope, pval, unstable = backlog_trend(t, backlog)
    return ArrivalReport(
        _delay_report(total, total_sq, count, proc.seed),
        t, backlog, slope, pval, unstable, batches, start,
    )


def run_arrivals(process: ArrivalProcess, config: ChannelConfig | None = None) -> ArrivalReport:
    """Serve Poisson arrivals with gated or windowed access.

    Delays run from the arrival instant to the end of the decoding slot. The
    backlog is counted in windows (windowed) or in waiting packets (gated).
    """
    config = config or ChannelConfig()
    if process.access is Access.WINDOWED:
        return _run_windowed(process, config)
    return _run_gated(process, config)
