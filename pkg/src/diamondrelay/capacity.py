"""Per-block capacities of the two cooperative modes and the hybrid scheme.

Conventions
-----------
Link rates are C_ij = 0.5*log2(1 + G_ij) with G_ij = pc_over_sigma2 * |g_ij|^2.
The decode-and-forward mode (SRP, spatial reuse) has a closed-form maximum
over its two candidate time shares; the sign quantities

    x = C_1d*C_2d - C_s1*C_s2,    y = C_s2*C_1d - C_s1*C_2d

select one of four explicit expressions.  The amplify-and-forward mode (AFP)
maximizes (A*x + B*y)^2 / (x^2 + y^2 + 1) over amplification factors boxed by
the relay power constraints; the maximizer sits on the box boundary (the two
partial derivatives cannot vanish simultaneously), so three candidate points
suffice.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .channel import ChannelPartition

__all__ = [
    "LinkGains",
    "LinkRates",
    "SrpResult",
    "AfpResult",
    "srp_capacity",
    "srp_rate_array",
    "afp_capacity_coherent",
    "afp_capacity_general",
    "afp_rate_array",
    "classify_subspace",
    "hybrid_rate",
    "gains_from_levels",
    "rates_from_gains",
    "CapacityTables",
]

_SUBSET_BY_BRANCH = {1: "abcd", 2: "efgh"}


@dataclass(frozen=True)
class LinkGains:
    """Amplitude gain magnitudes of the four links plus the common power
    budget over noise, P_c/sigma^2 (the tables normalize it to 1)."""

    g_s1: float
    g_s2: float
    g_1d: float
    g_2d: float
    pc_over_sigma2: float = 1.0

    def __post_init__(self):
        if min(self.g_s1, self.g_s2, self.g_1d, self.g_2d) < 0:
            raise ValueError("gain magnitudes must be non-negative")
        if self.pc_over_sigma2 <= 0:
            raise ValueError("pc_over_sigma2 must be positive")

    @property
    def snrs(self) -> tuple[float, float, float, float]:
        """Per-link received SNR G_ij = pc_over_sigma2 * |g_ij|^2."""
        c = self.pc_over_sigma2
        return (c * self.g_s1**2, c * self.g_s2**2, c * self.g_1d**2, c * self.g_2d**2)


@dataclass(frozen=True)
class LinkRates:
    c_s1: float
    c_s2: float
    c_1d: float
    c_2d: float

    def __post_init__(self):
        if min(self.c_s1, self.c_s2, self.c_1d, self.c_2d) < 0:
            raise ValueError("link rates must be non-negative")


@dataclass(frozen=True)
class SrpResult:
    rate: float
    lambda1: float
    lambda2: float
    subcase: int  # 1..4, the mode-selection condition that fired; 0 degenerate


@dataclass(frozen=True)
class AfpResult:
    rate: float
    alpha: float
    beta: float
    branch: str  # "ridge_x", "ridge_y", "corner", or a degenerate label


def rates_from_gains(gains: LinkGains) -> LinkRates:
    g1, g2, g3, g4 = gains.snrs
    return LinkRates(*(0.5 * math.log2(1.0 + s) for s in (g1, g2, g3, g4)))


def gains_from_levels(
    part: ChannelPartition,
    s1: int,
    s2: int,
    d1: int,
    d2: int,
    pc_over_sigma2: float = 1.0,
) -> LinkGains:
    """Map quantized link states to gains: G_ij is the state's conditional
    mean SNR, |g_ij| = sqrt(G_ij / pc_over_sigma2)."""
    snr = part.state_mean_snr
    mags = [math.sqrt(snr[lv - 1] / pc_over_sigma2) for lv in (s1, s2, d1, d2)]
    return LinkGains(*mags, pc_over_sigma2=pc_over_sigma2)


# ---------------------------------------------------------------------------
# SRP (decode-and-forward with spatial reuse)
# ---------------------------------------------------------------------------

def srp_capacity(rates: LinkRates) -> SrpResult:
    """Closed-form SRP rate with the condition that fired.

    Boundary ties (x = 0, y = 0, or equality in the inner comparison)
    resolve by first match in the listed condition order; the adjacent
    expressions agree there, so the tie-break never changes the value.
    """
    cs1, cs2, c1d, c2d = rates.c_s1, rates.c_s2, rates.c_1d, rates.c_2d
    if cs1 == cs2 == c1d == c2d == 0.0:
        return SrpResult(0.0, 0.0, 0.0, 0)

    lam1 = c1d / (cs1 + c1d) if cs1 + c1d > 0 else 0.0
    lam2 = cs2 / (cs2 + c2d) if cs2 + c2d > 0 else 0.0

    x = c1d * c2d - cs1 * cs2
    y = cs2 * c1d - cs1 * c2d

    def safe(num: float, den: float) -> float:
        return num / den if den > 0 else 0.0

    form1 = safe(cs1 * (c1d + cs2), c1d + cs1)
    form2 = safe(c2d * (cs1 + cs2), c2d + cs2)
    form3 = safe(c1d * (cs1 + c2d), c1d + cs1)
    form4 = safe(cs2 * (c1d + c2d), c2d + cs2)

    if (x >= 0 and y >= 0 and y * cs1 >= x * cs2) or (x >= 0 and y < 0 and -y * c1d >= x * cs2):
        return SrpResult(form1, lam1, lam2, 1)
    if (y >= 0 and x >= 0 and x * cs2 > y * cs1) or (y >= 0 and x < 0 and -x * c2d > y * cs1):
        return SrpResult(form2, lam1, lam2, 2)
    if (x < 0 and y >= 0 and -x * c2d <= y * cs1) or (x < 0 and y < 0 and -y * c1d >= -x * c2d):
        return SrpResult(form3, lam1, lam2, 3)
    if (y < 0 and x >= 0 and -y * c1d < x * cs2) or (y < 0 and x < 0 and -y * c1d < -x * c2d):
        return SrpResult(form4, lam1, lam2, 4)
    raise AssertionError("SRP conditions are exhaustive")  # pragma: no cover


def srp_rate_array(cs1, cs2, c1d, c2d):
    """Vectorized SRP rate (no subcase bookkeeping)."""
    cs1, cs2, c1d, c2d = np.broadcast_arrays(
        *(np.asarray(a, dtype=float) for a in (cs1, cs2, c1d, c2d))
    )
    x = c1d * c2d - cs1 * cs2
    y = cs2 * c1d - cs1 * c2d

    with np.errstate(divide="ignore", invalid="ignore"):
        form1 = np.where(c1d + cs1 > 0, cs1 * (c1d + cs2) / (c1d + cs1), 0.0)
        form2 = np.where(c2d + cs2 > 0, c2d * (cs1 + cs2) / (c2d + cs2), 0.0)
        form3 = np.where(c1d + cs1 > 0, c1d * (cs1 + c2d) / (c1d + cs1), 0.0)
        form4 = np.where(c2d + cs2 > 0, cs2 * (c1d + c2d) / (c2d + cs2), 0.0)

    cond1 = ((x >= 0) & (y >= 0) & (y * cs1 >= x * cs2)) | ((x >= 0) & (y < 0) & (-y * c1d >= x * cs2))
    cond2 = ((y >= 0) & (x >= 0) & (x * cs2 > y * cs1)) | ((y >= 0) & (x < 0) & (-x * c2d > y * cs1))
    cond3 = ((x < 0) & (y >= 0) & (-x * c2d <= y * cs1)) | ((x < 0) & (y < 0) & (-y * c1d >= -x * c2d))

    out = form4.copy()
    out[cond3] = form3[cond3]
    out[cond2] = form2[cond2]
    out[cond1] = form1[cond1]
    return out


# ---------------------------------------------------------------------------
# AFP (amplify-and-forward, coherent combining at the destination)
# ---------------------------------------------------------------------------

def afp_capacity_coherent(gains: LinkGains) -> AfpResult:
    """AFP rate under the amplitude-matched constraint alpha/beta = |g_s1|/|g_s2|.

    The objective grows with alpha^2 + beta^2, so the optimum saturates the
    binding relay power constraint:

        alpha^2 + beta^2 = min( G_2d(G_s1+G_s2)/(G_s2(G_s2+1)),
                                G_1d(G_s1+G_s2)/(G_s1(G_s1+1)) ).
    """
    gs1, gs2, g1d, g2d = gains.snrs
    gamma = gains.pc_over_sigma2
    if gs1 == 0.0 and gs2 == 0.0:
        return AfpResult(0.0, 0.0, 0.0, "no_signal")
    total = gs1 + gs2

    # bound from each relay; infinite when that relay carries no signal
    bound1 = g1d * total / (gs1 * (gs1 + 1.0)) if gs1 > 0 else math.inf
    bound2 = g2d * total / (gs2 * (gs2 + 1.0)) if gs2 > 0 else math.inf
    if bound2 >= bound1:
        s_opt, branch = bound1, "relay1_limited"
    else:
        s_opt, branch = bound2, "relay2_limited"

    # a zero power box forces both factors to zero under the matched ratio
    if s_opt <= 0.0:
        return AfpResult(0.0, 0.0, 0.0, branch)

    alpha = math.sqrt(s_opt * gs1 / total)
    beta = math.sqrt(s_opt * gs2 / total)
    inner = total / (1.0 + 1.0 / s_opt)
    rate = 0.25 * math.log2(1.0 + inner)
    # `inner` already carries gamma through the G_ij; nothing more to scale
    del gamma
    return AfpResult(rate, alpha, beta, branch)


def _afp_candidates(a: float, b: float, cbox: float, dbox: float):
    """Boundary candidates for max of (a*x + b*y)^2 / (x^2 + y^2 + 1) on
    (0, cbox] x (0, dbox].  With dF/dx = 0 and dF/dy = 0 mutually exclusive,
    the maximum lies where one ridge meets an edge, or at the far corner."""
    cands = []
    if dbox > 0:
        x_star = (a / b) * (1.0 + dbox**2) / dbox if b > 0 else math.inf
        cands.append((min(x_star, cbox), dbox))
    if cbox > 0:
        y_star = (b / a) * (1.0 + cbox**2) / cbox if a > 0 else math.inf
        cands.append((cbox, min(y_star, dbox)))
    cands.append((cbox, dbox))
    return cands


def afp_capacity_general(gains: LinkGains) -> AfpResult:
    """AFP rate without the amplitude-matched restriction.

    Power constraints box the amplification factors:
        alpha <= sqrt(G_1d / (1 + G_s1)),  beta <= sqrt(G_2d / (1 + G_s2)).
    A zero box side silences that relay and the other is optimized alone.
    """
    gs1, gs2, g1d, g2d = gains.snrs
    gamma = gains.pc_over_sigma2
    a, b = gains.g_s1, gains.g_s2
    cbox = math.sqrt(g1d / (1.0 + gs1))
    dbox = math.sqrt(g2d / (1.0 + gs2))

    if a == 0.0 and b == 0.0:
        return AfpResult(0.0, 0.0, 0.0, "no_signal")
    if a == 0.0 or cbox == 0.0:
        # relay 1 contributes nothing; single-relay form, increasing in y
        f = (b * dbox) ** 2 / (dbox**2 + 1.0)
        return AfpResult(0.25 * math.log2(1.0 + gamma * f), 0.0, dbox, "relay2_only")
    if b == 0.0 or dbox == 0.0:
        f = (a * cbox) ** 2 / (cbox**2 + 1.0)
        return AfpResult(0.25 * math.log2(1.0 + gamma * f), cbox, 0.0, "relay1_only")

    labels = ("ridge_x", "ridge_y", "corner")
    best_f, best_xy, best_label = -1.0, (cbox, dbox), "corner"
    for (x, y), label in zip(_afp_candidates(a, b, cbox, dbox), labels):
        f = (a * x + b * y) ** 2 / (x**2 + y**2 + 1.0)
        if f > best_f:
            best_f, best_xy, best_label = f, (x, y), label
    rate = 0.25 * math.log2(1.0 + gamma * best_f)
    return AfpResult(rate, best_xy[0], best_xy[1], best_label)


def afp_rate_array(gs1, gs2, g1d, g2d, pc_over_sigma2: float = 1.0):
    """Vectorized general AFP rate from per-link SNRs G_ij (not amplitudes)."""
    gs1, gs2, g1d, g2d = np.broadcast_arrays(
        *(np.asarray(v, dtype=float) for v in (gs1, gs2, g1d, g2d))
    )
    gamma = pc_over_sigma2
    a = np.sqrt(gs1 / gamma)
    b = np.sqrt(gs2 / gamma)
    cbox = np.sqrt(g1d / (1.0 + gs1))
    dbox = np.sqrt(g2d / (1.0 + gs2))

    with np.errstate(divide="ignore", invalid="ignore"):
        x1 = np.minimum(np.where(b > 0, (a / b) * (1.0 + dbox**2) / np.where(dbox > 0, dbox, 1.0), np.inf), cbox)
        y2 = np.minimum(np.where(a > 0, (b / a) * (1.0 + cbox**2) / np.where(cbox > 0, cbox, 1.0), np.inf), dbox)

    def f_of(x, y):
        return (a * x + b * y) ** 2 / (x**2 + y**2 + 1.0)

    f = np.maximum(f_of(x1, dbox), f_of(cbox, y2))
    f = np.maximum(f, f_of(cbox, dbox))
    # zero-signal and silent-relay degenerations
    f = np.where((a == 0) | (cbox == 0), (b * dbox) ** 2 / (dbox**2 + 1.0), f)
    f = np.where((b == 0) | (dbox == 0), (a * cbox) ** 2 / (cbox**2 + 1.0), f)
    f = np.where(((a == 0) | (cbox == 0)) & ((b == 0) | (dbox == 0)), 0.0, f)
    return 0.25 * np.log2(1.0 + gamma * f)


# ---------------------------------------------------------------------------
# Hybrid scheme and subspace labels
# ---------------------------------------------------------------------------

def hybrid_rate(rates: LinkRates, gains: LinkGains) -> float:
    """Opportunistic per-block rate: better of the two cooperative modes."""
    return max(srp_capacity(rates).rate, afp_capacity_general(gains).rate)


def classify_subspace(rates: LinkRates, gains: LinkGains) -> str:
    """Label a..h: SRP condition index crossed with the matched-AFP branch.

    Branch 1 applies when G_2d/(G_s2(G_s2+1)) >= G_1d/(G_s1(G_s1+1)) (ties
    included), branch 2 otherwise.
    """
    sub = srp_capacity(rates).subcase
    if sub == 0:
        sub = 1  # degenerate all-zero input sits on every boundary
    gs1, gs2, g1d, g2d = gains.snrs
    lhs = g2d * gs1 * (gs1 + 1.0)
    rhs = g1d * gs2 * (gs2 + 1.0)
    branch = 1 if lhs >= rhs else 2
    return _SUBSET_BY_BRANCH[branch][sub - 1]


class CapacityTables:
    """Precomputed per-block rates for every joint link-state tuple.

    For an N-level partition the (s1, s2, d1, d2) lattice has N^4 nodes;
    tables make the Monte Carlo engine a pure gather.  Entries are indexed
    with 0-based level indices.
    """

    def __init__(self, part: ChannelPartition, pc_over_sigma2: float = 1.0):
        self.part = part
        self.pc_over_sigma2 = pc_over_sigma2
        n = part.n_states
        snr = part.state_mean_snr * 1.0
        c = 0.5 * np.log2(1.0 + snr)
        s1, s2, d1, d2 = np.meshgrid(*(np.arange(n),) * 4, indexing="ij")
        self.srp = srp_rate_array(c[s1], c[s2], c[d1], c[d2])
        self.afp = afp_rate_array(snr[s1], snr[s2], snr[d1], snr[d2], pc_over_sigma2)
        self.hybrid = np.maximum(self.srp, self.afp)
        self.link_rate = c

    def gather(self, table: np.ndarray, levels: np.ndarray) -> np.ndarray:
        """levels: shape (4, M) of 1-indexed states."""
        z = levels - 1
        return table[z[0], z[1], z[2], z[3]]
