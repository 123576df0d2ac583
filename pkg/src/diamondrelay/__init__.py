"""Diamond relay network toolkit.

Models the four-node half-duplex diamond relay network under block
Rayleigh fading: finite-state channel partition, per-block capacities of
the decode-and-forward (SRP) and amplify-and-forward (AFP) cooperative
modes, the buffered opportunistic strategy with threshold planning, and
G/G/1 queueing-delay bounds, all cross-checked by Monte Carlo simulation.
"""

__version__ = "0.1.0"

from .channel import BlockRealization, ChannelPartition, build_partition, rate_of, sample_block
from .capacity import (
    AfpResult,
    LinkGains,
    LinkRates,
    SrpResult,
    afp_capacity_coherent,
    afp_capacity_general,
    classify_subspace,
    hybrid_rate,
    srp_capacity,
)
from .buffering import (
    RelayBufferState,
    Thresholds,
    TriggerCase,
    TriggerKind,
    detect_trigger,
    stability_rates,
    step_block,
    thr_pair,
    validate_thresholds,
)
from .queueing import (
    DelayBound,
    IntervalMoments,
    delay_upper_bound,
    interval_moments,
    marshall_wait,
    px_py,
)
from .planner import PlanEntry, enumerate_feasible, psi_improvement, select_best
from .sim import SimConfig, SimReport, gg1_oracle, run, sweep
