from itertools import product

import numpy as np
import pytest

from diamondrelay.buffering import Thresholds, validate_thresholds
from diamondrelay.channel import build_partition
from diamondrelay.planner import (
    PlanEntry,
    asterisk_level,
    default_thr1_per_block,
    enumerate_feasible,
    psi_improvement,
    select_best,
    star_level,
    two_block_buffered_amount,
)
from diamondrelay.queueing import delay_upper_bound
from conftest import QUOTED_PLAN_ROWS, QUOTED_UNSTABLE_ROW


def min_rate_expectation(part, u_big, u_small):
    """Enumeration oracle: E[min(C_F, C_B)] with F uniform on [U, N] and
    B uniform on [u, N]."""
    c = part.state_rate
    n = part.n_states
    tot = sum(
        min(c[f - 1], c[b - 1])
        for f in range(u_big, n + 1)
        for b in range(u_small, n + 1)
    )
    return tot / ((n - u_big + 1) * (n - u_small + 1))


def quoted_gamma(part, block_s=0.001):
    entries = []
    for cfg in QUOTED_PLAN_ROWS:
        thr = Thresholds(*cfg)
        bound = delay_upper_bound(thr, part, block_s)
        entries.append(
            PlanEntry(
                thresholds=thr,
                psi=psi_improvement(thr, part, None, block_s),
                predicted_delay_s=bound["seconds"],
                predicted_delay_blocks=bound["blocks"],
                stable=True,
                rho=bound["moments"].rho,
            )
        )
    return entries


# ---------------------------------------------------------------------------
# two-block amount + psi
# ---------------------------------------------------------------------------

def test_two_block_amount_matches_enumeration(part6):
    for u_big, u_small in [(16, 16), (16, 15), (16, 14), (15, 15), (15, 14), (14, 14)]:
        thr = Thresholds(u_big, u_small, 2, 1)
        closed = two_block_buffered_amount(thr, part6, 1.0)
        assert closed == pytest.approx(min_rate_expectation(part6, u_big, u_small), rel=1e-12)


def test_two_block_amount_matches_enumeration_other_depths():
    for n in (8, 32):
        part = build_partition(6.0, n)
        for u_big in range(n - 2, n + 1):
            for u_small in range(n - 2, u_big + 1):
                thr = Thresholds(u_big, u_small, 2, 1)
                closed = two_block_buffered_amount(thr, part, 1.0)
                assert closed == pytest.approx(min_rate_expectation(part, u_big, u_small), rel=1e-12)


def test_two_block_amount_single_level(part6):
    thr = Thresholds(16, 16, 3, 2)
    assert two_block_buffered_amount(thr, part6, 1.0) == pytest.approx(part6.state_rate[15])


def test_psi_decreases_in_upper_sr(parts_by_snr):
    # lowering the fill threshold (more fill opportunities) always raises
    # the score when the other thresholds stay put
    for part in parts_by_snr.values():
        star = star_level(16)
        for u_small in range(star, 17):
            vals = [
                psi_improvement(Thresholds(u_big, u_small, 3, 2), part, None, 0.001)
                for u_big in range(u_small, 17)
            ]
            assert all(a > b for a, b in zip(vals, vals[1:]))


def test_psi_positive_for_quoted_rows(part6):
    for cfg in QUOTED_PLAN_ROWS:
        assert psi_improvement(Thresholds(*cfg), part6, None, 0.001) > 0


def test_default_thr1_is_twice_the_band_top(part6):
    assert default_thr1_per_block(part6) == pytest.approx(2 * part6.state_rate[2])


# ---------------------------------------------------------------------------
# selection
# ---------------------------------------------------------------------------

def test_select_best_quoted_rows_requirement_30(part6):
    gamma = [e for e in quoted_gamma(part6) if e.predicted_delay_blocks <= 30]
    assert select_best(gamma).thresholds.as_tuple() == (15, 15, 3, 2)


def test_select_best_quoted_rows_requirement_20(part6):
    gamma = [e for e in quoted_gamma(part6) if e.predicted_delay_blocks <= 20]
    assert select_best(gamma).thresholds.as_tuple() == (16, 15, 3, 2)


def test_select_best_singleton(part6):
    gamma = quoted_gamma(part6)[:1]
    assert select_best(gamma) is gamma[0]


def test_select_best_empty_raises():
    with pytest.raises(ValueError):
        select_best([])


def test_select_best_permutation_invariant(part6, rng):
    gamma = quoted_gamma(part6)
    picked = select_best(gamma).thresholds.as_tuple()
    for _ in range(5):
        shuffled = list(gamma)
        rng.shuffle(shuffled)
        assert select_best(shuffled).thresholds.as_tuple() == picked


# ---------------------------------------------------------------------------
# enumeration
# ---------------------------------------------------------------------------

def test_enumerate_contains_and_excludes(part6):
    gamma = enumerate_feasible(part6, 20.0, 0.001)
    tuples = {e.thresholds.as_tuple() for e in gamma}
    assert (16, 15, 3, 2) in tuples
    assert QUOTED_UNSTABLE_ROW not in tuples


def test_enumerate_zero_requirement_empty(part6):
    assert enumerate_feasible(part6, 0.0, 0.001) == []


def test_enumerate_entries_revalidate(part6):
    gamma = enumerate_feasible(part6, 25.0, 0.001)
    assert gamma
    for e in gamma:
        rep = validate_thresholds(e.thresholds, part6)
        assert rep.valid and rep.stable
        assert e.predicted_delay_blocks <= 25.0
        assert e.rho < 1


def test_enumerate_full_lattice_is_superset(part6):
    banded = {e.thresholds.as_tuple() for e in enumerate_feasible(part6, 15.0, 0.001)}
    full = {e.thresholds.as_tuple() for e in enumerate_feasible(part6, 15.0, 0.001, restrict_columns=False)}
    assert banded <= full
    assert len(full) > len(banded)


def test_column_band_levels():
    assert star_level(16) == 14 and asterisk_level(16) == 3
    assert star_level(8) == 7 and asterisk_level(8) == 1
    assert star_level(32) == 28 and asterisk_level(32) == 6


def test_tradeoff_direction_within_fixed_drain_threshold(part6):
    # families differing only in the fill threshold: the higher-score entry
    # always predicts the longer delay (the score/delay tradeoff)
    for u_small, d_big, d_small in [(15, 3, 2), (14, 3, 1), (15, 3, 1)]:
        entries = []
        for u_big in range(u_small, 17):
            thr = Thresholds(u_big, u_small, d_big, d_small)
            if not validate_thresholds(thr, part6).valid:
                continue
            bound = delay_upper_bound(thr, part6, 0.001)
            entries.append((psi_improvement(thr, part6, None, 0.001), bound["blocks"]))
        by_psi = sorted(entries, key=lambda t: -t[0])
        delays = [d for _, d in by_psi]
        assert delays == sorted(delays, reverse=True)
