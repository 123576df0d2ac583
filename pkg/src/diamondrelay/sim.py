"""Monte Carlo block-fading engine for the four transmission strategies.

The block process draws i.i.d. uniform link states; per-block rates of the
buffer-free strategies come from precomputed lattice tables, so a run is a
gather plus reductions.  The buffered strategy adds two-relay buffer
dynamics; its queueing delay is simulated as the G/G/1 system whose
inter-arrival and service laws are the three-branch interval mixture of the
analysis (the block process itself validates that law's components, see
`measure_interval_moments`).

Throughput is reported in information units per second (delivered amount
over M*T).  Delay carries explicit units: seconds and blocks (= seconds/T).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .channel import ChannelPartition, build_partition, sample_level_blocks
from .capacity import CapacityTables
from .buffering import Thresholds
from .queueing import IntervalMoments, delay_unit_blocks, interval_moments, px_py

__all__ = [
    "SimConfig",
    "SimReport",
    "run",
    "sweep",
    "gg1_oracle",
    "lindley_waits",
    "trigger_masks",
    "measure_interval_moments",
    "EmpiricalMoments",
]

STRATEGIES = ("srp", "afp", "hybrid", "buffered")


@dataclass(frozen=True)
class SimConfig:
    snr_db: float
    n_states: int = 16
    n_blocks: int = 100_000
    block_ms: float = 1.0
    strategy: str = "hybrid"
    thresholds: Thresholds | None = None
    seed: int = 0
    replications: int = 1
    pc_over_sigma2: float = 1.0
    warmup_frac: float = 0.05
    delay_customers: int | None = None  # defaults to n_blocks
    backlog_trace_points: int = 0

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ValueError(f"strategy must be one of {STRATEGIES}, got {self.strategy!r}")
        if self.n_blocks < 1:
            raise ValueError("n_blocks must be >= 1")
        if self.replications < 1:
            raise ValueError("replications must be >= 1")
        if self.strategy == "buffered" and self.thresholds is None:
            raise ValueError("buffered strategy requires thresholds")
        if self.block_ms <= 0:
            raise ValueError("block_ms must be positive")

    @property
    def block_s(self) -> float:
        return self.block_ms / 1000.0


@dataclass(frozen=True)
class SimReport:
    config: SimConfig
    mean_throughput: float  # units/s
    stderr_throughput: float
    throughput_reps: tuple[float, ...]
    r_suc: float  # delivered units, last replication
    mean_delay_s: float | None = None
    stderr_delay_s: float | None = None
    mean_delay_blocks: float | None = None  # quoted convention: s/(1000*T)
    rho_measured: float | None = None
    rho_analytic: float | None = None
    fluid_sojourn_blocks: float | None = None  # physical block-timeline count
    packet_sojourn_blocks: float | None = None
    backlog_slope_rate: float | None = None  # end backlog / (M*T), units/s
    backlog_trace: np.ndarray | None = field(default=None, repr=False)
    divergence_flag: bool = False


# ---------------------------------------------------------------------------
# queue primitives
# ---------------------------------------------------------------------------

def lindley_waits(arrivals: np.ndarray, services: np.ndarray) -> np.ndarray:
    """Waiting times W_{k+1} = max(0, W_k + b_k - a_{k+1}), W_1 = 0.

    Evaluated in closed form as a reflected random walk: with
    S_k = sum_{j<=k} (b_j - a_{j+1}),  W_{k+1} = S_k - min(0, min_{j<=k} S_j).
    """
    n = min(len(arrivals), len(services))
    if n < 2:
        return np.zeros(max(n, 1))
    c = services[: n - 1] - arrivals[1:n]
    s = np.cumsum(c)
    floor = np.minimum.accumulate(np.minimum(s, 0.0))
    return np.concatenate(([0.0], s - floor))


def gg1_oracle(
    arrival_sampler: Callable[[np.random.Generator, int], np.ndarray],
    service_sampler: Callable[[np.random.Generator, int], np.ndarray],
    n_customers: int,
    seed: int = 0,
    warmup_frac: float = 0.10,
) -> float:
    """Empirical mean wait of a G/G/1 queue fed by the samplers.

    The first `warmup_frac` of customers is discarded to damp the
    empty-start bias.
    """
    rng = np.random.default_rng(seed)
    a = np.asarray(arrival_sampler(rng, n_customers), dtype=float)
    b = np.asarray(service_sampler(rng, n_customers), dtype=float)
    if np.any(a <= 0) or np.any(b <= 0):
        raise ValueError("samplers must produce positive intervals")
    w = lindley_waits(a, b)
    k = int(len(w) * warmup_frac)
    return float(w[k:].mean())


def _interval_sampler(part: ChannelPartition, lo: int, hi_from: int, w_hi: float, w_lo: float, p: float, block_s: float):
    """Sampler for the three-branch mixture: 1/C over [hi_from, N] w.p. w_hi,
    1/C over [1, lo] w.p. w_lo, geometric idle runs n*T with the rest."""
    inv_hi = 1.0 / part.state_rate[hi_from - 1 :]
    inv_lo = 1.0 / part.state_rate[:lo]

    def sample(rng: np.random.Generator, n: int) -> np.ndarray:
        u = rng.random(n)
        out = np.empty(n)
        hi = u < w_hi
        lo_m = (u >= w_hi) & (u < w_hi + w_lo)
        idle = ~(hi | lo_m)
        out[hi] = rng.choice(inv_hi, size=int(hi.sum()))
        out[lo_m] = rng.choice(inv_lo, size=int(lo_m.sum()))
        out[idle] = rng.geometric(p, size=int(idle.sum())) * block_s
        return out

    return sample


def buffer_interval_samplers(thr: Thresholds, part: ChannelPartition, block_s: float):
    """(arrival_sampler, service_sampler) of one relay's buffer."""
    p_x, p_y = px_py(thr, part.n_states)
    p = p_x + p_y
    arr = _interval_sampler(part, thr.lower_sr, thr.upper_sr, p_x, p_y, p, block_s)
    svc = _interval_sampler(part, thr.lower_rd, thr.upper_rd, p_y, p_x, p, block_s)
    return arr, svc


# ---------------------------------------------------------------------------
# trigger classification and empirical moment measurement
# ---------------------------------------------------------------------------

def trigger_masks(levels: np.ndarray, thr: Thresholds):
    """Vectorized block classification.

    levels: (4, M) 1-indexed states.  Returns dict of boolean masks:
    chosen front/back activity per relay (higher level wins, ties to
    relay 1) and the non-trigger mask.
    """
    s1, s2, d1, d2 = levels
    u_sr, u_rd, lo_sr, lo_rd = thr.as_tuple()

    fg1 = s1 >= u_sr
    fg2 = s2 >= u_sr
    case1 = (fg1 | fg2) & (d1 <= lo_rd) & (d2 <= lo_rd)
    front1 = case1 & fg1 & (~fg2 | (s1 >= s2))
    front2 = case1 & ~front1

    bg1 = d1 >= u_rd
    bg2 = d2 >= u_rd
    case2 = (bg1 | bg2) & (s1 <= lo_sr) & (s2 <= lo_sr)
    back1 = case2 & bg1 & (~bg2 | (d1 >= d2))
    back2 = case2 & ~back1

    return {
        "case1": case1,
        "case2": case2,
        "front": (front1, front2),
        "back": (back1, back2),
        "none": ~(case1 | case2),
    }


@dataclass(frozen=True)
class EmpiricalMoments:
    mean_arrival: float
    mean_service: float
    var_arrival: float
    var_service: float
    rho: float
    p_x: float
    p_y: float
    p: float


def _gap_stats(active: np.ndarray, center: float, block_s: float) -> tuple[float, float, int]:
    """Mean gap and second central moment (about `center`) of idle runs
    preceding each active block, normalized per active block."""
    idx = np.flatnonzero(active)
    k = len(idx)
    if k < 2:
        return 0.0, 0.0, max(k, 1)
    gaps = np.diff(idx) - 1  # idle blocks before each active block (first skipped)
    gt = gaps * block_s
    mean_term = float(gt.sum()) / k
    nz = gt[gaps > 0]
    var_term = float(((nz - center) ** 2).sum()) / k
    return mean_term, var_term, k


def measure_interval_moments(
    levels: np.ndarray, thr: Thresholds, part: ChannelPartition, block_s: float
) -> EmpiricalMoments:
    """Empirical counterparts of the analytic interval moments, pooled over
    the two relays.

    Each component uses the analysis weighting: level branches are averaged
    per block over the full horizon, idle-run terms per active block.
    Pooling removes the small asymmetry of the deterministic tie-break.
    """
    m = levels.shape[1]
    masks = trigger_masks(levels, thr)
    c = part.state_rate
    s_lv = (levels[0], levels[1])
    d_lv = (levels[2], levels[3])

    arr_samples = []  # (1/C, is_fast) per active block, both relays
    svc_samples = []
    actives = []
    for r in range(2):
        act = masks["front"][r] | masks["back"][r]
        actives.append(act)
        inv_front = 1.0 / c[s_lv[r][act] - 1]
        inv_back = 1.0 / c[d_lv[r][act] - 1]
        arr_samples.append(inv_front)
        svc_samples.append(inv_back)

    denom = 2 * m
    arr_all = np.concatenate(arr_samples)
    svc_all = np.concatenate(svc_samples)
    k_act = sum(int(a.sum()) for a in actives)
    p_hat = k_act / denom

    # means: level terms per block, idle term per active block
    idle_means = [_gap_stats(a, 0.0, block_s)[0] for a in actives]
    k_each = [max(int(a.sum()), 1) for a in actives]
    idle_mean = sum(im * k for im, k in zip(idle_means, k_each)) / max(k_act, 1)
    mean_a = float(arr_all.sum()) / denom + idle_mean
    mean_b = float(svc_all.sum()) / denom + idle_mean

    var_a = float(((arr_all - mean_a) ** 2).sum()) / denom
    var_b = float(((svc_all - mean_b) ** 2).sum()) / denom
    for r, a in enumerate(actives):
        _, va, k = _gap_stats(a, mean_a, block_s)
        _, vb, _ = _gap_stats(a, mean_b, block_s)
        var_a += va * k / max(k_act, 1)
        var_b += vb * k / max(k_act, 1)

    k1 = sum(int(masks["front"][r].sum()) for r in range(2))
    k2 = sum(int(masks["back"][r].sum()) for r in range(2))
    return EmpiricalMoments(
        mean_arrival=mean_a,
        mean_service=mean_b,
        var_arrival=var_a,
        var_service=var_b,
        rho=mean_b / mean_a if mean_a > 0 else float("nan"),
        p_x=k1 / denom,
        p_y=k2 / denom,
        p=p_hat,
    )


# ---------------------------------------------------------------------------
# single run and sweep
# ---------------------------------------------------------------------------

def _reflected_trajectory(increments: np.ndarray) -> np.ndarray:
    """Backlog after each block for b_t = max(0, b_{t-1} + x_t), b_0 = 0."""
    s = np.cumsum(increments)
    floor = np.minimum.accumulate(np.minimum(s, 0.0))
    return s - floor


def _run_one_replication(
    cfg: SimConfig,
    part: ChannelPartition,
    tables: CapacityTables,
    rng: np.random.Generator,
    delay_seed: int,
):
    m = cfg.n_blocks
    t_s = cfg.block_s
    levels = sample_level_blocks(part, rng, m).astype(np.int64)

    if cfg.strategy in ("srp", "afp", "hybrid"):
        table = {"srp": tables.srp, "afp": tables.afp, "hybrid": tables.hybrid}[cfg.strategy]
        rates = tables.gather(table, levels)
        r_suc = float(rates.sum()) * t_s
        return {"r_suc": r_suc, "throughput": r_suc / (m * t_s)}

    thr = cfg.thresholds
    masks = trigger_masks(levels, thr)
    c = part.state_rate

    hybrid_rates = tables.gather(tables.hybrid, levels)
    hyb_delivered = float(hybrid_rates[masks["none"]].sum()) * t_s

    enq_total = 0.0
    final_backlog = 0.0
    slope_rates = []
    traces = []
    fluid_backlog_sum = 0.0
    packet_delays = []
    for r in range(2):
        enq = np.where(masks["front"][r], c[levels[r] - 1] * t_s, 0.0)
        offer = np.where(masks["back"][r], c[levels[2 + r] - 1] * t_s, 0.0)
        traj = _reflected_trajectory(enq - offer)
        enq_total += float(enq.sum())
        final_backlog += float(traj[-1])
        slope_rates.append(float(traj[-1]) / (m * t_s))
        fluid_backlog_sum += float(traj.mean())
        if cfg.backlog_trace_points:
            step = max(1, m // cfg.backlog_trace_points)
            traces.append(traj[::step].copy())
        # unit packets carved from the fluid: k-th packet enqueues when the
        # cumulative inflow crosses k, departs when cumulative outflow does
        delivered = enq - np.diff(np.concatenate(([0.0], traj)))
        e_curve = np.cumsum(enq)
        v_curve = np.cumsum(delivered)
        n_pkt = int(np.floor(v_curve[-1]))
        if n_pkt >= 1:
            ks = np.arange(1, n_pkt + 1, dtype=float)
            enq_blk = np.searchsorted(e_curve, ks)
            deq_blk = np.searchsorted(v_curve, ks)
            keep = enq_blk >= int(cfg.warmup_frac * m)
            if keep.any():
                packet_delays.append((deq_blk - enq_blk)[keep])

    buffered_delivered = enq_total - final_backlog
    r_suc = hyb_delivered + buffered_delivered
    throughput = r_suc / (m * t_s)

    emp = measure_interval_moments(levels, thr, part, t_s)
    lam_fluid = buffered_delivered / (m * t_s)
    fluid_delay_blocks = (
        (fluid_backlog_sum / lam_fluid) / t_s if lam_fluid > 0 else float("nan")
    )
    pkt_delay = (
        float(np.concatenate(packet_delays).mean()) if packet_delays else float("nan")
    )

    n_cust = cfg.delay_customers or cfg.n_blocks
    arr_s, svc_s = buffer_interval_samplers(thr, part, t_s)
    delay_s = gg1_oracle(arr_s, svc_s, n_cust, seed=delay_seed, warmup_frac=0.10)

    return {
        "r_suc": r_suc,
        "throughput": throughput,
        "delay_s": delay_s,
        "rho_measured": emp.rho,
        "fluid_delay_blocks": fluid_delay_blocks,
        "packet_delay_blocks": pkt_delay,
        "slope_rate": max(slope_rates),
        "trace": np.sum(traces, axis=0) if traces else None,
        "empirical_moments": emp,
    }


def run(cfg: SimConfig) -> SimReport:
    """Run all replications of one configuration (deterministic per seed)."""
    part = build_partition(cfg.snr_db, cfg.n_states)
    if cfg.thresholds is not None:
        cfg.thresholds.check_range(cfg.n_states)
    tables = CapacityTables(part, cfg.pc_over_sigma2)
    seeds = np.random.SeedSequence(cfg.seed).spawn(cfg.replications)

    reps = []
    for i, ss in enumerate(seeds):
        rng = np.random.default_rng(ss)
        reps.append(_run_one_replication(cfg, part, tables, rng, delay_seed=cfg.seed * 7919 + i))

    thr_vals = np.array([r["throughput"] for r in reps])
    stderr = float(thr_vals.std(ddof=1) / np.sqrt(len(reps))) if len(reps) > 1 else 0.0
    report = SimReport(
        config=cfg,
        mean_throughput=float(thr_vals.mean()),
        stderr_throughput=stderr,
        throughput_reps=tuple(float(v) for v in thr_vals),
        r_suc=reps[-1]["r_suc"],
    )
    if cfg.strategy != "buffered":
        return report

    delay_vals = np.array([r["delay_s"] for r in reps])
    rho_vals = np.array([r["rho_measured"] for r in reps])
    slope = max(r["slope_rate"] for r in reps)
    moments = interval_moments(cfg.thresholds, part, cfg.block_s)
    d_stderr = float(delay_vals.std(ddof=1) / np.sqrt(len(reps))) if len(reps) > 1 else 0.0
    pkt_vals = [r["packet_delay_blocks"] for r in reps if not np.isnan(r["packet_delay_blocks"])]
    return replace(
        report,
        mean_delay_s=float(delay_vals.mean()),
        stderr_delay_s=d_stderr,
        mean_delay_blocks=delay_unit_blocks(float(delay_vals.mean()), cfg.block_s),
        rho_measured=float(rho_vals.mean()),
        rho_analytic=moments.rho,
        fluid_sojourn_blocks=float(np.nanmean([r["fluid_delay_blocks"] for r in reps])),
        packet_sojourn_blocks=float(np.mean(pkt_vals)) if pkt_vals else None,
        backlog_slope_rate=slope,
        backlog_trace=reps[-1]["trace"],
        divergence_flag=slope >= 1e-4,
    )


def sweep(configs: list[SimConfig], workers: int = 0) -> list[SimReport]:
    """Run every configuration; failures propagate per entry, not globally.

    Entries whose run raises are reported as None placeholders with the
    error re-raised at the end only if all entries failed.
    """
    reports: list[SimReport | None] = [None] * len(configs)
    errors: list[tuple[int, Exception]] = []

    if workers and workers > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = {i: pool.submit(run, cfg) for i, cfg in enumerate(configs)}
            for i, fut in futures.items():
                try:
                    reports[i] = fut.result()
                except Exception as exc:  # noqa: BLE001 - sweep isolates failures
                    errors.append((i, exc))
    else:
        for i, cfg in enumerate(configs):
            try:
                reports[i] = run(cfg)
            except Exception as exc:  # noqa: BLE001
                errors.append((i, exc))

    if errors and all(r is None for r in reports):
        raise errors[0][1]
    return reports
