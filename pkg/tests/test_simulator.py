import itertools
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from _instances import random_tree_instance
from laca.allocator import (BACKUP, PRIMARY, AllocParams, Entry, InsufficientSlots, Schedule,
                            allocate_laca, allocate_urgent_first)
from laca.linkquality import QualityMap
from laca.model import validate_instance
from laca.oracle import exhaustive_feasible
from laca.simulator import (GeneratorConfig, SimParams, generate_instance, insufficient_slot_rate,
                            parse_generator, report_to_csv, resource_utilization, run_seeds, simulate)


def one_hop(W=4, C=1, dl=3):
    return validate_instance(dict(nodes={"a", "s"}, links=[("a-s", "a", "s")],
                                  paths=[dict(id="p", source="a", links=["a-s"], gen_slot=0, deadline=dl)],
                                  sink="s", duty_cycle=W, channels=C))


def test_lossless_run(counterexample):
    inst = counterexample.instance
    q = QualityMap.for_instance(inst, 1.0)
    sched = allocate_laca(inst, q)
    assert sched.n_backups > 0
    rep = simulate(inst, sched, q, SimParams(trials=500, master_seed=3))
    for p in inst.paths:
        st_ = rep.path(p.id)
        assert st_.pdr == 1.0 and st_.retransmissions == 0
        assert st_.mean_tx == p.length
    assert rep.total_tx == 500 * sum(p.length for p in inst.paths)


def _coin_schedule():
    inst = one_hop()
    q = QualityMap.for_instance(inst, 0.5)
    sched = Schedule((Entry("a-s", 0, 0, PRIMARY, "p", 0), Entry("a-s", 2, 0, BACKUP, "p", 0)))
    return inst, q, sched


def test_primary_plus_backup_converges_to_three_quarters():
    inst, q, sched = _coin_schedule()
    # four outcome vectors of the two attempts: only (fail, fail) misses
    exact = sum(0.25 for a, b in itertools.product((0, 1), repeat=2) if a or b)
    assert exact == 0.75
    rep = simulate(inst, sched, q, SimParams(trials=100_000, master_seed=1))
    assert abs(rep.path("p").pdr - exact) <= 0.01
    # every second attempt is a retransmission
    assert rep.path("p").mean_retx == pytest.approx(0.5, abs=0.01)


def test_dead_cell_never_delivers():
    inst = one_hop()
    q = QualityMap.for_instance(inst, 0.0)
    rep = simulate(inst, Schedule((Entry("a-s", 1, 0, PRIMARY, "p", 0),)), q, SimParams(trials=1000))
    assert rep.path("p").pdr == 0.0
    assert rep.path("p").miss_frac == 1.0


def test_no_drop_mode_keeps_trying_across_cycles():
    inst = one_hop(W=4, dl=1)
    q = QualityMap.for_instance(inst, 0.5)
    sched = Schedule((Entry("a-s", 0, 0, PRIMARY, "p", 0),))
    drop = simulate(inst, sched, q, SimParams(trials=20_000, master_seed=2))
    keep = simulate(inst, sched, q, SimParams(trials=20_000, master_seed=2, drop_at_deadline=False))
    # a late delivery is not on time, so PDR is unchanged but more attempts are spent
    assert drop.path("p").pdr == keep.path("p").pdr
    assert keep.total_tx > drop.total_tx
    assert drop.path("p").mean_tx == 1.0


def test_unverifiable_schedule_rejected():
    inst = one_hop()
    with pytest.raises(ValueError):
        simulate(inst, Schedule(()), QualityMap.for_instance(inst), SimParams(trials=10))


@pytest.mark.parametrize("n, W, C, expected", [(3, 5, 3, 0.2), (0, 5, 3, 0.0), (15, 5, 3, 1.0)])
def test_resource_utilization(n, W, C, expected):
    inst = validate_instance(dict(nodes={"a", "s"}, links=[("a-s", "a", "s")],
                                  paths=[dict(id="p", source="a", links=["a-s"], gen_slot=0, deadline=1)],
                                  sink="s", duty_cycle=W, channels=C))
    cells = list(itertools.product(range(W), range(C)))[:n]
    sched = Schedule(tuple(Entry("a-s", s, c, BACKUP, "p", 0) for s, c in cells))
    assert resource_utilization(sched, inst) == expected


def test_generator_ten_by_five_grid():
    inst, q = generate_instance(GeneratorConfig(rows=10, cols=5, sink=(0, 0), duty_cycle=20))
    assert len(inst.paths) == 49
    assert max(p.length for p in inst.paths) == 13
    assert q.values.shape == (49, 4, 20)
    assert all(p.deadline < 20 for p in inst.paths)
    # most cells drawn from the high range
    assert (q.values >= 0.61).mean() == pytest.approx(0.8, abs=0.03)


def test_generator_minimal_and_deterministic():
    inst, q = generate_instance(GeneratorConfig(rows=1, cols=2, sink=(0, 1), duty_cycle=4, seed=9))
    assert len(inst.paths) == 1 and inst.paths[0].length == 1
    cfg = GeneratorConfig(rows=3, cols=4, duty_cycle=8, seed=123)
    a, b = generate_instance(cfg), generate_instance(cfg)
    assert a[0] == b[0] and a[1] == b[1]


def test_generator_shares_draws_across_channel_counts():
    cfg = GeneratorConfig(rows=3, cols=3, duty_cycle=8, seed=7, channels=2)
    i2, q2 = generate_instance(cfg)
    i4, q4 = generate_instance(replace(cfg, channels=4))
    assert i2.paths == i4.paths
    assert np.array_equal(q2.values, q4.values[:, :2, :])


def test_loose_deadlines_never_run_short():
    cfg = GeneratorConfig(rows=1, cols=3, sink=(0, 0), duty_cycle=5, channels=3, slack=(10, 10))
    for s in run_seeds(4, 10):
        inst, q = generate_instance(replace(cfg, seed=s))
        assert exhaustive_feasible(inst)[0]
    assert insufficient_slot_rate(cfg, "laca", 10, 4) == 0.0
    assert insufficient_slot_rate(cfg, "urgent", 10, 4) == 0.0


def test_structurally_infeasible_rate():
    # two one-hop paths into the sink plus a two-hop path whose deadline is capped below its length
    cfg = GeneratorConfig(rows=2, cols=2, sink=(0, 0), duty_cycle=2, channels=1, slack=(0, 0))
    assert insufficient_slot_rate(cfg, "laca", 5, 1) == 1.0
    assert insufficient_slot_rate(cfg, "urgent", 5, 1) == 1.0


def test_rate_is_deterministic():
    cfg = GeneratorConfig(rows=3, cols=3, duty_cycle=6, channels=2, slack=(0, 2))
    assert insufficient_slot_rate(cfg, "laca", 20, 8) == insufficient_slot_rate(cfg, "laca", 20, 8)


def test_generator_file():
    cfg = parse_generator("grid 3 4\nsink 0 0  # corner\nslack 0 2\nduty_cycle 7\nchannels 2\n"
                          "p_high 0.7\nquality_high 0.6 0.95\nquality_low 0.1 0.6\nseed 5\n")
    assert (cfg.rows, cfg.cols, cfg.slack, cfg.duty_cycle, cfg.p_high, cfg.high) == (3, 4, (0, 2), 7, 0.7, (0.6, 0.95))
    with pytest.raises(ValueError, match="line 1"):
        parse_generator("grid 3\n")


def test_report_csv_layout(counterexample):
    sched = allocate_laca(counterexample.instance, counterexample.quality)
    rep = simulate(counterexample.instance, sched, counterexample.quality, SimParams(trials=100))
    lines = report_to_csv(rep).splitlines()
    assert lines[0] == "path,pdr,mean_tx,mean_retx,miss_frac"
    assert [l.split(",")[0] for l in lines[1:-1]] == ["p1", "p2", "p3", "p4", "p5", "p6"]
    assert lines[-1].startswith("TOTAL,") and lines[-1].endswith(",100")
    assert all(len(f.split(".")[1]) == 6 for f in lines[1].split(",")[1:])


seeds = st.integers(0, 10**9)


def _laca(inst, q, **kw):
    try:
        return allocate_laca(inst, q, AllocParams(**kw))
    except InsufficientSlots:
        return None


@settings(max_examples=25)
@given(seeds, st.integers(0, 2**64 - 1))
def test_reproducible_under_fixed_seed(seed, master):
    inst, q = random_tree_instance(seed, max_nodes=5)
    sched = _laca(inst, q)
    if sched is None:
        return
    sim = SimParams(trials=5000, master_seed=master)
    a = simulate(inst, sched, q, sim)
    assert a == simulate(inst, sched, q, sim)


def test_parallel_trials_match_serial(counterexample):
    inst, q = counterexample.instance, counterexample.quality
    sched = allocate_laca(inst, q)
    sim = SimParams(trials=3 * 4096 + 11, master_seed=2**63 + 5)
    assert simulate(inst, sched, q, sim, workers=3) == simulate(inst, sched, q, sim, workers=1)


@settings(max_examples=25)
@given(seeds)
def test_counting_invariants(seed):
    inst, q = random_tree_instance(seed, max_nodes=5)
    sched = _laca(inst, q, max_backups_per_link=2)
    if sched is None:
        return
    rep = simulate(inst, sched, q, SimParams(trials=2000, master_seed=seed))
    for p in inst.paths:
        s = rep.path(p.id)
        assert 0.0 <= s.pdr <= 1.0
        assert s.retransmissions <= s.transmissions
        assert s.transmissions >= p.length * s.delivered
    assert 0.0 <= rep.utilization <= 1.0


@settings(max_examples=25)
@given(seeds)
def test_lossless_conservation(seed):
    inst, _ = random_tree_instance(seed, max_nodes=5)
    q = QualityMap.for_instance(inst, 1.0)
    sched = _laca(inst, q, max_backups_per_link=2)
    if sched is None:
        return
    rep = simulate(inst, sched, q, SimParams(trials=50, master_seed=seed))
    assert rep.total_retx == 0
    assert rep.total_tx == 50 * sum(p.length for p in inst.paths)


@given(seeds)
def test_each_backup_adds_one_cell(seed):
    inst, q = random_tree_instance(seed, max_nodes=5)
    sched = _laca(inst, q, max_backups_per_link=2)
    if sched is None:
        return
    step = 1 / (inst.duty_cycle * inst.channels)
    entries = [e for e in sched.entries if e.kind == PRIMARY]
    prev = resource_utilization(Schedule(tuple(entries)), inst)
    for b in (e for e in sched.entries if e.kind == BACKUP):
        entries.append(b)
        cur = resource_utilization(Schedule(tuple(entries)), inst)
        assert cur == pytest.approx(prev + step, abs=1e-12)
        prev = cur
