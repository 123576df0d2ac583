"""Buffered opportunistic scheduling at the relays.

Two threshold families split the link-state range: a link is pretty good
at or above the upper threshold (U for source->relay links, u for
relay->destination links) and rather bad at or below the lower threshold
(D source side, d destination side).  The buffered strategy departs from
the plain hybrid scheme only in two trigger cases:

  front trigger: some source->relay link is pretty good while both
      relay->destination links are rather bad -> the better front link
      fills its relay's buffer; nothing reaches the destination.
  back trigger: some relay->destination link is pretty good while both
      source->relay links are rather bad -> the better back link drains
      its relay's buffer (never below empty; an empty buffer stays silent).

Every other block runs the buffer-free hybrid scheme.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from .channel import BlockRealization, ChannelPartition
from .capacity import CapacityTables, gains_from_levels, hybrid_rate, rates_from_gains

__all__ = [
    "Thresholds",
    "TriggerKind",
    "TriggerCase",
    "RelayBufferState",
    "ThresholdReport",
    "validate_thresholds",
    "detect_trigger",
    "step_block",
    "stability_rates",
    "thr_pair",
]


@dataclass(frozen=True)
class Thresholds:
    """State-level thresholds (upper_sr=U, upper_rd=u, lower_sr=D, lower_rd=d)."""

    upper_sr: int
    upper_rd: int
    lower_sr: int
    lower_rd: int

    def __post_init__(self):
        for name in ("upper_sr", "upper_rd", "lower_sr", "lower_rd"):
            v = getattr(self, name)
            if not isinstance(v, (int, np.integer)) or v < 1:
                raise ValueError(f"{name} must be a positive integer level, got {v!r}")
        if self.lower_sr >= self.upper_sr:
            raise ValueError("need lower_sr < upper_sr")
        if self.lower_rd >= self.upper_rd:
            raise ValueError("need lower_rd < upper_rd")

    def check_range(self, n_states: int) -> None:
        if self.upper_sr > n_states or self.upper_rd > n_states:
            raise ValueError(f"thresholds exceed the partition's {n_states} levels")

    def as_tuple(self) -> tuple[int, int, int, int]:
        return (self.upper_sr, self.upper_rd, self.lower_sr, self.lower_rd)


class TriggerKind(Enum):
    NONE = "none"
    FRONT_GOOD = "front_good"
    BACK_GOOD = "back_good"


@dataclass(frozen=True)
class TriggerCase:
    kind: TriggerKind
    chosen_relay: int | None = None  # 1 or 2 when kind is a trigger

    def __post_init__(self):
        if (self.kind is TriggerKind.NONE) != (self.chosen_relay is None):
            raise ValueError("chosen_relay is defined exactly for trigger blocks")


@dataclass
class RelayBufferState:
    """Fluid buffer contents of the two relays plus delivered total."""

    backlog: np.ndarray = field(default_factory=lambda: np.zeros(2))
    served_total: float = 0.0

    def copy(self) -> "RelayBufferState":
        return RelayBufferState(self.backlog.copy(), self.served_total)


@dataclass(frozen=True)
class ThresholdReport:
    criterion1_ok: bool
    criterion2_ok: bool
    arrival_rate: float
    service_rate: float
    stability_margin: float  # service_rate - arrival_rate

    @property
    def valid(self) -> bool:
        return self.criterion1_ok and self.criterion2_ok

    @property
    def stable(self) -> bool:
        return self.stability_margin > 0


def validate_thresholds(thr: Thresholds, part: ChannelPartition) -> ThresholdReport:
    """Check the two selection criteria and the buffer stability margin.

    Criterion 1 compares the rate at each upper threshold against twice the
    rate at the opposite side's lower threshold (a front trigger stores at
    >= C_U while suppressing links that could carry at most C_d, and the
    stored data later rides a >= C_u link after suppressing <= C_D ones).
    Criterion 2 keeps the arrival side of the buffer no slower than the
    service side: upper_sr >= upper_rd and lower_sr > lower_rd, or
    upper_sr > upper_rd and lower_sr >= lower_rd.
    """
    thr.check_range(part.n_states)
    c = part.state_rate
    u_big, u_small, d_big, d_small = thr.as_tuple()
    crit1 = (c[u_big - 1] > 2.0 * c[d_small - 1]) and (c[u_small - 1] > 2.0 * c[d_big - 1])
    crit2 = (u_big >= u_small and d_big > d_small) or (u_big > u_small and d_big >= d_small)
    lam, mu = stability_rates(thr, part)
    return ThresholdReport(
        criterion1_ok=bool(crit1),
        criterion2_ok=bool(crit2),
        arrival_rate=lam,
        service_rate=mu,
        stability_margin=mu - lam,
    )


def detect_trigger(block: BlockRealization, thr: Thresholds) -> TriggerCase:
    """Classify one block.  Among two qualifying pretty-good links the
    higher level wins; equal levels go to relay 1."""
    s1, s2, d1, d2 = block.as_tuple()
    u_sr, u_rd, lo_sr, lo_rd = thr.as_tuple()

    if (s1 >= u_sr or s2 >= u_sr) and d1 <= lo_rd and d2 <= lo_rd:
        if s1 >= u_sr and (s2 < u_sr or s1 >= s2):
            return TriggerCase(TriggerKind.FRONT_GOOD, 1)
        return TriggerCase(TriggerKind.FRONT_GOOD, 2)
    if (d1 >= u_rd or d2 >= u_rd) and s1 <= lo_sr and s2 <= lo_sr:
        if d1 >= u_rd and (d2 < u_rd or d1 >= d2):
            return TriggerCase(TriggerKind.BACK_GOOD, 1)
        return TriggerCase(TriggerKind.BACK_GOOD, 2)
    return TriggerCase(TriggerKind.NONE, None)


def step_block(
    state: RelayBufferState,
    block: BlockRealization,
    thr: Thresholds,
    part: ChannelPartition,
    block_s: float,
    tables: CapacityTables | None = None,
) -> tuple[RelayBufferState, float]:
    """Advance one block; returns (new state, amount delivered this block).

    block_s is the block duration in seconds; amounts are rate * block_s.
    A precomputed CapacityTables avoids re-solving the hybrid rate.
    """
    trig = detect_trigger(block, thr)
    new = state.copy()
    s1, s2, d1, d2 = block.as_tuple()

    if trig.kind is TriggerKind.FRONT_GOOD:
        level = s1 if trig.chosen_relay == 1 else s2
        new.backlog[trig.chosen_relay - 1] += block_s * part.state_rate[level - 1]
        delivered = 0.0
    elif trig.kind is TriggerKind.BACK_GOOD:
        level = d1 if trig.chosen_relay == 1 else d2
        offer = block_s * part.state_rate[level - 1]
        delivered = min(float(new.backlog[trig.chosen_relay - 1]), offer)
        new.backlog[trig.chosen_relay - 1] -= delivered
    else:
        if tables is not None:
            delivered = block_s * float(tables.hybrid[s1 - 1, s2 - 1, d1 - 1, d2 - 1])
        else:
            gains = gains_from_levels(part, s1, s2, d1, d2)
            delivered = block_s * hybrid_rate(rates_from_gains(gains), gains)
    new.served_total += delivered
    return new, delivered


def stability_rates(thr: Thresholds, part: ChannelPartition) -> tuple[float, float]:
    """Mean arrival and service rates of one relay's buffer.

    Both sides mix the trigger probabilities with the mean rate over the
    qualifying levels:

        arrival = mean(C_U..C_N) * P_x + mean(C_1..C_D) * P_y
        service = mean(C_u..C_N) * P_y + mean(C_1..C_d) * P_x

    Stable iff arrival < service.
    """
    thr.check_range(part.n_states)
    from .queueing import px_py  # local import; queueing depends on this module's types

    c = part.state_rate
    u_sr, u_rd, lo_sr, lo_rd = thr.as_tuple()
    p_x, p_y = px_py(thr, part.n_states)
    c_high_u = float(c[u_sr - 1 :].mean())
    c_high_v = float(c[u_rd - 1 :].mean())
    c_low_big = float(c[:lo_sr].mean())
    c_low_small = float(c[:lo_rd].mean())
    lam = c_high_u * p_x + c_low_big * p_y
    mu = c_high_v * p_y + c_low_small * p_x
    return lam, mu


def thr_pair(
    rates_t1,
    rates_t2,
    gains_t1,
    gains_t2,
    block_s: float,
) -> tuple[float, float]:
    """Two-block throughput of the plain hybrid scheme versus the idealized
    store-then-forward amount.

    THR1 sums the hybrid rate of each block.  THR2 assumes the first
    block's best front link fills a buffer that the second block's best
    back link empties, so only min(front rate, back rate) survives; it is
    an analysis quantity (non-causal), not a control law.
    """
    hyb1 = hybrid_rate(rates_t1, gains_t1)
    hyb2 = hybrid_rate(rates_t2, gains_t2)
    thr1 = block_s * (hyb1 + hyb2)

    front = max(min(rates_t1.c_s1, rates_t2.c_1d), min(rates_t1.c_s2, rates_t2.c_2d))
    thr2 = block_s * front
    return thr1, thr2
