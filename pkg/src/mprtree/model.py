"""Shared domain types for binary tree algorithms on the K-collision channel."""

from __future__ import annotations

import enum
from dataclasses import dataclass

MAX_K = 2**16


class Variant(str, enum.Enum):
    """Tree algorithm flavour."""

    BTA = "BTA"
    MTA = "MTA"

    @classmethod
    def parse(cls, value: "str | Variant") -> "Variant":
        if isinstance(value, Variant):
            return value
        try:
            return cls(str(value).upper())
        except ValueError:
            raise ValueError(f"unknown variant {value!r}; expected BTA or MTA") from None


class Feedback(enum.IntEnum):
    """Slot feedback broadcast by the access point.

    Ordered so that ``IDLE < SUCCESS < ERROR``.
    """

    IDLE = 0
    SUCCESS = 1
    ERROR = 2

    @property
    def symbol(self) -> str:
        return ("0", "1", "e")[self.value]


@dataclass(frozen=True)
class ChannelConfig:
    """One experiment family: MPR capability ``K``, split bias ``p`` and variant.

    ``p`` is the probability that a colliding user joins group 0.
    """

    K: int = 1
    p: float = 0.5
    variant: Variant = Variant.BTA

    def __post_init__(self):
        if isinstance(self.K, bool) or int(self.K) != self.K:
            raise ValueError(f"K must be an integer, got {self.K!r}")
        if not 1 <= self.K <= MAX_K:
            raise ValueError(f"K must lie in [1, {MAX_K}], got {self.K}")
        p = float(self.p)
        if not 0.0 < p < 1.0:
            raise ValueError(f"p must lie strictly between 0 and 1, got {self.p!r}")
        object.__setattr__(self, "K", int(self.K))
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "variant", Variant.parse(self.variant))

    @classmethod
    def fair(cls, K: int = 1, variant: Variant | str = Variant.BTA) -> "ChannelConfig":
        return cls(K=K, p=0.5, variant=Variant.parse(variant))

    @property
    def is_fair(self) -> bool:
        return self.p == 0.5

    def with_variant(self, variant: Variant | str) -> "ChannelConfig":
        return ChannelConfig(self.K, self.p, Variant.parse(variant))

    def as_dict(self) -> dict:
        return {"K": self.K, "p": self.p, "variant": self.variant.value}


@dataclass(frozen=True)
class CriStatistic:
    """Expected CRI length and normalized throughput for a batch of ``n`` users."""

    n: int
    L_n: float
    K: int

    @property
    def T_n(self) -> float:
        return throughput(self.n, self.L_n, self.K)


def classify_slot(occupancy: int, K: int) -> Feedback:
    """Map the number of packets in a slot to the channel feedback."""
    if occupancy < 0:
        raise ValueError("occupancy must be nonnegative")
    if occupancy == 0:
        return Feedback.IDLE
    if occupancy <= K:
        return Feedback.SUCCESS
    return Feedback.ERROR


def throughput(n: int, L_n: float, K: int) -> float:
    """Conditional throughput ``n / (K L_n)``, i.e. packets per unit of resource."""
    return n / (K * L_n)
