"""Threshold enumeration and ranking for the buffered strategy.

A candidate (U, u, D, d) enters the feasible set when it satisfies both
selection criteria, the buffer is stable, and the predicted mean-delay
bound meets the caller's requirement.  Candidates are ranked by the
score

    psi = p_x * p_y * (THR2 - THR1),

the probability that a fill block and a drain block pair up, times the
two-block throughput gain of buffering over the plain hybrid scheme.
THR2 is the expected min of the chosen fill rate (level uniform on
[U, N]) and the chosen drain rate (uniform on [u, N]); THR1 is the
baseline two-block hybrid amount, by default the conservative cap
2 * C(lower-threshold column) per block.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import product

import numpy as np

from .channel import ChannelPartition
from .buffering import Thresholds, validate_thresholds
from .queueing import delay_upper_bound, px_py

__all__ = [
    "PlanEntry",
    "enumerate_feasible",
    "psi_improvement",
    "select_best",
    "two_block_buffered_amount",
    "default_thr1_per_block",
    "star_level",
    "asterisk_level",
]


@dataclass(frozen=True)
class PlanEntry:
    thresholds: Thresholds
    psi: float
    predicted_delay_s: float
    predicted_delay_blocks: float
    stable: bool
    rho: float


def star_level(n_states: int) -> int:
    """Lowest level admitted for the upper thresholds (rank 14 of 16, scaled)."""
    return max(2, math.ceil(14 * n_states / 16))


def asterisk_level(n_states: int) -> int:
    """Highest level admitted for the lower thresholds (rank 3 of 16, scaled)."""
    return max(1, math.floor(3 * n_states / 16))


def default_thr1_per_block(part: ChannelPartition) -> float:
    """Analytic baseline for the per-block hybrid amount inside trigger
    windows: twice the rate of the lower-threshold column's top level.
    Conservative (an upper cap on what buffering displaces)."""
    return 2.0 * float(part.state_rate[asterisk_level(part.n_states) - 1])


def two_block_buffered_amount(thr: Thresholds, part: ChannelPartition, block_s: float) -> float:
    """Expected buffered throughput of a fill/drain block pair:

        E[min(C_F, C_B)],  F uniform on [U, N], B uniform on [u, N],

    evaluated through the closed form

        sum_{k=u}^{U-1} C_k/(N-u+1)
          + (sum_{k=U}^{N-1} (2N-2k+1) C_k + C_N) / ((N-U+1)(N-u+1)).
    """
    n = part.n_states
    c = part.state_rate
    u_big, u_small = thr.upper_sr, thr.upper_rd
    if u_small > u_big:
        raise ValueError("requires upper_rd <= upper_sr")
    first = float(c[u_small - 1 : u_big - 1].sum()) / (n - u_small + 1)
    ks = np.arange(u_big, n)
    second = float(((2 * n - 2 * ks + 1) * c[u_big - 1 : n - 1]).sum()) + float(c[n - 1])
    second /= (n - u_big + 1) * (n - u_small + 1)
    return (first + second) * block_s


def psi_improvement(
    thr: Thresholds,
    part: ChannelPartition,
    thr1_per_block: float | None,
    block_s: float,
) -> float:
    """Ranking score p_x * p_y * (THR2 - THR1).

    thr1_per_block is the baseline hybrid rate per block (units/s); pass a
    measured value when available, None for the analytic default.
    """
    if thr1_per_block is None:
        thr1_per_block = default_thr1_per_block(part)
    p_x, p_y = px_py(thr, part.n_states)
    thr2 = two_block_buffered_amount(thr, part, block_s)
    thr1 = 2.0 * thr1_per_block * block_s
    return p_x * p_y * (thr2 - thr1)


def enumerate_feasible(
    part: ChannelPartition,
    delay_requirement_blocks: float,
    block_s: float,
    thr1_per_block: float | None = None,
    restrict_columns: bool = True,
) -> list[PlanEntry]:
    """All threshold tuples meeting the criteria, stability, and the delay
    requirement (quoted delay block units; see queueing.delay_unit_blocks).

    By default the upper thresholds range over the top column band and the
    lower ones over the bottom band, mirroring the rate-table layout the
    selection procedure reads from; restrict_columns=False opens the full
    [1, N]^4 lattice.
    """
    n = part.n_states
    u_lo = star_level(n) if restrict_columns else 1
    d_hi = asterisk_level(n) if restrict_columns else n

    entries = []
    for u_big, u_small, d_big, d_small in product(
        range(u_lo, n + 1), range(u_lo, n + 1), range(1, d_hi + 1), range(1, d_hi + 1)
    ):
        if d_big >= u_big or d_small >= u_small:
            continue
        thr = Thresholds(u_big, u_small, d_big, d_small)
        rep = validate_thresholds(thr, part)
        if not (rep.valid and rep.stable):
            continue
        try:
            bound = delay_upper_bound(thr, part, block_s)
        except ValueError:
            continue
        if bound["blocks"] > delay_requirement_blocks:
            continue
        entries.append(
            PlanEntry(
                thresholds=thr,
                psi=psi_improvement(thr, part, thr1_per_block, block_s),
                predicted_delay_s=bound["seconds"],
                predicted_delay_blocks=bound["blocks"],
                stable=True,
                rho=bound["moments"].rho,
            )
        )
    return entries


def select_best(gamma: list[PlanEntry]) -> PlanEntry:
    """Highest psi; ties by lower predicted delay, then by the smallest
    (U, -u, D, -d) tuple.  Deterministic and order-independent."""
    if not gamma:
        raise ValueError("empty feasible set")

    def key(e: PlanEntry):
        t = e.thresholds
        return (
            -e.psi,
            e.predicted_delay_blocks,
            (t.upper_sr, -t.upper_rd, t.lower_sr, -t.lower_rd),
        )

    return min(gamma, key=key)
