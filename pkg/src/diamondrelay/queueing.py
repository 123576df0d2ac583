"""Closed-form G/G/1 moments for the relay buffer and the mean-wait bound.

The buffer of one relay sees three kinds of inter-event intervals, with
joint (branch, level) weights

    1/C_i   weight p_x/(N-U+1)        i in [U, N]   (fast fill)
    1/C_j   weight p_y/D              j in [1, D]   (slow trickle)
    n*T     weight (1-p)^n * p        n >= 1        (idle run of n blocks)

and symmetrically for service with (u, d) and the roles of p_x, p_y
swapped.  The weights total p_x + p_y + (1-p) = 1 with p = p_x + p_y.
Means and variances of these mixed laws feed the G/G/1 mean-wait bound

    E[W] <= lam * (var_a + var_b) / (2 * (1 - rho)),   lam = 1/E[a],

which for rho = E[b]/E[a] reduces to (var_a + var_b) / (2*(E[a] - E[b])).

Delay unit note: delay figures quoted alongside this model are labeled as
block counts but are numerically consistent only as multiples of 1000*T
(plain seconds at the default T = 1 ms).  The toolkit therefore reports
waits in seconds as the primary unit and defines one "delay block unit" as
1000*T: `blocks = seconds / (1000 * block_s)`.  See DELAY_UNIT_BLOCKS.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .channel import ChannelPartition
from .buffering import Thresholds

__all__ = [
    "IntervalMoments",
    "DelayBound",
    "px_py",
    "interval_moments",
    "marshall_wait",
    "delay_upper_bound",
    "idle_run_variance_term",
    "delay_unit_blocks",
    "DELAY_UNIT_BLOCKS",
]

# One quoted "delay block" spans this many physical blocks; at the default
# 1 ms block it makes the quoted counts coincide with seconds.
DELAY_UNIT_BLOCKS = 1000.0


def delay_unit_blocks(seconds: float, block_s: float) -> float:
    """Convert a wait in seconds to the quoted block-count convention."""
    return seconds / (DELAY_UNIT_BLOCKS * block_s)


@dataclass(frozen=True)
class IntervalMoments:
    mean_arrival: float  # E[a], seconds
    mean_service: float  # E[b], seconds
    var_arrival: float  # seconds^2
    var_service: float  # seconds^2
    rho: float
    p_x: float
    p_y: float
    p: float

    @property
    def stable(self) -> bool:
        return self.rho < 1.0


@dataclass(frozen=True)
class DelayBound:
    mean_wait_upper: float  # seconds
    exact_marshall: float | None = None  # seconds, when idle moments known


def px_py(thr: Thresholds, n_states: int) -> tuple[float, float]:
    """Per-relay trigger probabilities for one block.

    p_x covers "this relay's front link is pretty good and beats the other
    front link (ties split evenly) while both back links are rather bad";
    p_y is the mirror image for the back side:

        p_x = (N^2 - (U-1)^2) / (2 N^2) * (d/N)^2
        p_y = (N^2 - (u-1)^2) / (2 N^2) * (D/N)^2
    """
    thr.check_range(n_states)
    n2 = float(n_states) ** 2
    u_sr, u_rd, lo_sr, lo_rd = thr.as_tuple()
    p_x = (n2 - (u_sr - 1) ** 2) / (2.0 * n2) * (lo_rd / n_states) ** 2
    p_y = (n2 - (u_rd - 1) ** 2) / (2.0 * n2) * (lo_sr / n_states) ** 2
    return p_x, p_y


def idle_run_variance_term(mean: float, p: float, block_s: float) -> float:
    """Second central moment (about `mean`) of the idle-run branch:

        sum_{n>=1} (n*T - mean)^2 (1-p)^n p
          = (1-p)*mean^2 - 2*T*mean*(1-p)/p + (1-p)(2-p)/p^2 * T^2.

    The middle term is negative (cross term of the square); direct
    summation of the series confirms the sign.
    """
    q = 1.0 - p
    t = block_s
    return q * mean**2 - 2.0 * t * mean * q / p + q * (2.0 - p) / p**2 * t**2


def _branch_term(inv_c: np.ndarray, weight_total: float, mean: float) -> tuple[float, float]:
    """(mean contribution, second-central-moment contribution) of a level
    branch whose values 1/C are uniform over `inv_c` with total weight."""
    e1 = float(inv_c.mean())
    e2 = float((inv_c**2).mean())
    return weight_total * e1, weight_total * (e2 + mean**2 - 2.0 * mean * e1)


def interval_moments(thr: Thresholds, part: ChannelPartition, block_s: float) -> IntervalMoments:
    """Arrival/service interval means and variances for one relay's buffer."""
    thr.check_range(part.n_states)
    p_x, p_y = px_py(thr, part.n_states)
    p = p_x + p_y
    if p <= 0:
        raise ValueError("thresholds admit no trigger blocks; idle term diverges")

    c = part.state_rate
    u_sr, u_rd, lo_sr, lo_rd = thr.as_tuple()
    inv_up_sr = 1.0 / c[u_sr - 1 :]
    inv_up_rd = 1.0 / c[u_rd - 1 :]
    inv_lo_sr = 1.0 / c[:lo_sr]
    inv_lo_rd = 1.0 / c[:lo_rd]

    idle_mean = (1.0 - p) / p * block_s
    mean_a = float(inv_up_sr.mean()) * p_x + float(inv_lo_sr.mean()) * p_y + idle_mean
    mean_b = float(inv_up_rd.mean()) * p_y + float(inv_lo_rd.mean()) * p_x + idle_mean

    var_a = (
        _branch_term(inv_up_sr, p_x, mean_a)[1]
        + _branch_term(inv_lo_sr, p_y, mean_a)[1]
        + idle_run_variance_term(mean_a, p, block_s)
    )
    var_b = (
        _branch_term(inv_up_rd, p_y, mean_b)[1]
        + _branch_term(inv_lo_rd, p_x, mean_b)[1]
        + idle_run_variance_term(mean_b, p, block_s)
    )
    return IntervalMoments(
        mean_arrival=mean_a,
        mean_service=mean_b,
        var_arrival=var_a,
        var_service=var_b,
        rho=mean_b / mean_a,
        p_x=p_x,
        p_y=p_y,
        p=p,
    )


def marshall_wait(
    lambda_rate: float,
    sigma_a2: float,
    sigma_b2: float,
    rho: float,
    idle_first_moment: float | None = None,
    idle_second_moment: float | None = None,
) -> DelayBound:
    """Mean-wait upper bound lam*(var_a+var_b)/(2(1-rho)) for a G/G/1 queue.

    When the first two moments of the server idle period are supplied, the
    exact mean wait

        E[W] = [lam^2 (var_a+var_b) + (1-rho)^2] / (2 lam (1-rho))
               - idle2 / (2 idle1)

    is returned alongside.  Requires rho < 1.
    """
    if rho >= 1.0:
        raise ValueError(f"unstable queue (rho={rho} >= 1): no finite mean wait")
    if sigma_a2 < 0 or sigma_b2 < 0:
        raise ValueError("variances must be non-negative")
    if lambda_rate <= 0:
        raise ValueError("arrival rate must be positive")

    bound = lambda_rate * (sigma_a2 + sigma_b2) / (2.0 * (1.0 - rho))
    exact = None
    if idle_first_moment is not None and idle_second_moment is not None:
        if idle_first_moment <= 0:
            raise ValueError("idle period first moment must be positive")
        exact = (
            (lambda_rate**2 * (sigma_a2 + sigma_b2) + (1.0 - rho) ** 2)
            / (2.0 * lambda_rate * (1.0 - rho))
            - idle_second_moment / (2.0 * idle_first_moment)
        )
    return DelayBound(mean_wait_upper=bound, exact_marshall=exact)


def delay_upper_bound(thr: Thresholds, part: ChannelPartition, block_s: float) -> dict:
    """Mean queuing-delay upper bound for one relay's buffer.

    Returns {"seconds", "blocks", "moments"}; "blocks" follows the quoted
    convention (see delay_unit_blocks).  Raises for unstable thresholds
    (mean service interval not smaller than mean arrival interval).
    """
    m = interval_moments(thr, part, block_s)
    gap = m.mean_arrival - m.mean_service
    if gap <= 0:
        raise ValueError(
            f"unstable thresholds: E[a]={m.mean_arrival:.6g} <= E[b]={m.mean_service:.6g}"
        )
    w = (m.var_arrival + m.var_service) / (2.0 * gap)
    return {"seconds": w, "blocks": delay_unit_blocks(w, block_s), "moments": m}
