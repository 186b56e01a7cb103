"""Counter dynamics: frozen-table reproduction, reference oracle, invariants."""

import numpy as np
import pytest
from fractions import Fraction

from roadphases.dynamics import (
    CONTINUOUS,
    DISCRETE,
    CounterState,
    Simulation,
    check_occupancy,
    counter_lines,
    density,
    init_occupancy,
    occupancy_at,
    occupancy_line,
    simulate,
    step,
)
from roadphases.topology import build_figure_eight, build_torus_city, build_two_junction

from fig8_reference import as_list, reference_occupancy, reference_trajectory

A55 = [0, 1, 0, 1, 0, 1, 0, 0, 1, 0]

# Continuous counters of the 10-slot instance, k = 0..5 (frozen).
TABLE_CONTINUOUS = [
    [0, 0, 0, 0, 0, 0, 0, 0, 0, 0],
    [0, 0, 1, 0, 0, 0, 1, 0, 0, 1],
    [0.5, 0, 1, 0, 0, 0.5, 1, 1, 0, 1],
    [0.5, 0.5, 1, 0, 1, 0.5, 1.5, 1, 1, 1],
    [1, 0.5, 1, 1, 1, 1, 1.5, 1.5, 1, 1],
    [1, 1, 1.5, 1, 1, 1, 2, 1.5, 1, 2],
]

# Discrete counters of the same instance (frozen).
TABLE_DISCRETE = [
    [0, 0, 0, 0, 0, 0, 0, 0, 0, 0],
    [0, 0, 1, 0, 0, 0, 1, 0, 0, 1],
    [1, 0, 1, 0, 0, 0, 1, 1, 0, 1],
    [1, 1, 1, 0, 1, 0, 1, 1, 1, 1],
    [1, 1, 1, 1, 1, 1, 1, 1, 1, 1],
    [1, 1, 2, 1, 1, 1, 2, 1, 1, 2],
]

# Car positions reconstructed from the discrete run, k = 0..5 (frozen).
# Columns follow slot order y_1..y_10 (y_5 = west sub-cell, y_10 = south).
TABLE_POSITIONS = [
    [0, 1, 0, 1, 0, 1, 0, 0, 1, 0],
    [0, 0, 1, 1, 0, 0, 1, 0, 0, 1],
    [1, 0, 1, 1, 0, 0, 0, 1, 0, 0],
    [0, 1, 1, 0, 1, 0, 0, 0, 1, 0],
    [0, 1, 0, 1, 0, 1, 0, 0, 1, 0],
    [0, 0, 1, 1, 0, 0, 1, 0, 0, 1],
]


@pytest.fixture(scope="module")
def fig8_55():
    return build_figure_eight(5, 5)


class TestTableReproduction:
    def test_continuous_counters(self, fig8_55):
        states = simulate(fig8_55, A55, CONTINUOUS, horizon=5)
        got = [s.x.tolist() for s in states]
        assert got == TABLE_CONTINUOUS

    def test_discrete_counters(self, fig8_55):
        states = simulate(fig8_55, A55, DISCRETE, horizon=5)
        got = [s.x.tolist() for s in states]
        assert got == TABLE_DISCRETE

    def test_positions(self, fig8_55):
        states = simulate(fig8_55, A55, DISCRETE, horizon=5)
        for state, expected in zip(states, TABLE_POSITIONS):
            y = occupancy_at(state, A55, fig8_55)
            assert y.tolist() == expected

    def test_single_steps_match_table(self, fig8_55):
        s0 = CounterState(0, np.zeros(10), CONTINUOUS)
        s1 = step(s0, A55, fig8_55)
        assert s1.x.tolist() == TABLE_CONTINUOUS[1]
        s2 = step(s1, A55, fig8_55)
        assert s2.x.tolist() == TABLE_CONTINUOUS[2]
        d1 = CounterState(1, np.array(TABLE_DISCRETE[1]), DISCRETE)
        d2 = step(d1, A55, fig8_55)
        assert d2.x.tolist() == TABLE_DISCRETE[2]


class TestAgainstReference:
    """The vectorized engine against the naive Fraction transcription."""

    @pytest.mark.parametrize("n,m,seed", [
        (5, 5, 0), (2, 2, 1), (2, 7, 2), (7, 2, 3), (12, 5, 4),
        (9, 14, 5), (3, 3, 6), (20, 7, 7),
    ])
    @pytest.mark.parametrize("discrete", [False, True])
    def test_random_instances(self, n, m, seed, discrete):
        t = build_figure_eight(n, m)
        rng = np.random.default_rng(seed)
        count = int(rng.integers(0, t.counting_size + 1))
        a = init_occupancy(t, count=count, seed=seed)
        horizon = 4 * (n + m)
        ref = reference_trajectory(a.tolist(), n, m, horizon,
                                   discrete=discrete)
        mode = DISCRETE if discrete else CONTINUOUS
        states = simulate(t, a, mode, horizon=horizon)
        for k, state in enumerate(states):
            expect = [float(v) for v in as_list(ref[k], n + m)]
            assert state.x.tolist() == expect, f"k={k}"

    @pytest.mark.parametrize("capacity", [1, 2])
    def test_capacity_two_against_reference(self, capacity):
        n, m = 6, 4
        t = build_figure_eight(n, m, capacity=capacity)
        a = init_occupancy(t, count=5, seed=11)
        ref = reference_trajectory(a.tolist(), n, m, 40, discrete=True,
                                   capacity=capacity)
        states = simulate(t, a, DISCRETE, horizon=40)
        for k, state in enumerate(states):
            assert state.x.tolist() == as_list(ref[k], n + m), f"k={k}"

    def test_occupancy_against_reference(self):
        n, m = 7, 5
        t = build_figure_eight(n, m)
        a = init_occupancy(t, count=6, seed=3)
        states = simulate(t, a, DISCRETE, horizon=30)
        x_ref = reference_trajectory(a.tolist(), n, m, 30, discrete=True)
        a_ref = {i + 1: int(v) for i, v in enumerate(a.tolist())}
        for k, state in enumerate(states):
            y = occupancy_at(state, a, t)
            y_ref = reference_occupancy(x_ref[k], a_ref, n, m)
            assert y.tolist() == as_list(y_ref, n + m), f"k={k}"


class TestTrivialCases:
    def test_empty_network_never_moves(self, fig8_55):
        a = np.zeros(10, dtype=int)
        states = simulate(fig8_55, a, CONTINUOUS, horizon=8)
        assert all(not s.x.any() for s in states)

    def test_full_network_freezes(self):
        t = build_figure_eight(6, 4)
        a = np.ones(t.n_slots, dtype=int)
        a[t.junctions[0].slot_b] = 0  # junction holds one car (capacity 1)
        assert density(a, t) == 1.0
        states = simulate(t, a, DISCRETE, horizon=30)
        assert not states[-1].x.any()

    def test_occupancy_at_time_zero_is_a(self, fig8_55):
        state = CounterState(0, np.zeros(10, dtype=np.int64), DISCRETE)
        assert occupancy_at(state, A55, fig8_55).tolist() == A55

    def test_continuous_occupancy_rejected_without_diagnostic(self, fig8_55):
        states = simulate(fig8_55, A55, CONTINUOUS, horizon=3)
        with pytest.raises(ValueError):
            occupancy_at(states[-1], A55, fig8_55)
        y = occupancy_at(states[-1], A55, fig8_55, diagnostic=True)
        assert y.sum() == pytest.approx(sum(A55))


class TestInitOccupancy:
    def test_explicit_density(self, fig8_55):
        a = init_occupancy(fig8_55, values=A55)
        assert density(a, fig8_55) == pytest.approx(4 / 9)

    def test_zero_count(self, fig8_55):
        a = init_occupancy(fig8_55, count=0, seed=1)
        assert not a.any()
        assert density(a, fig8_55) == 0.0

    def test_seeded_count_placement(self):
        t = build_figure_eight(40, 20)
        a = init_occupancy(t, count=12, seed=7)
        assert a.sum() == 12
        assert density(a, t) == pytest.approx(12 / 59)
        check_occupancy(t, a)
        again = init_occupancy(t, count=12, seed=7)
        assert np.array_equal(a, again)

    def test_density_spec_rounds_count(self):
        t = build_figure_eight(40, 20)
        a = init_occupancy(t, density=0.5, seed=0)
        assert a.sum() == round(0.5 * 59)

    def test_junction_capacity_respected(self):
        t = build_torus_city(2, 2, 1)
        for seed in range(20):
            a = init_occupancy(t, count=t.counting_size, seed=seed)
            check_occupancy(t, a)

    def test_rejects_overfull(self, fig8_55):
        with pytest.raises(ValueError):
            init_occupancy(fig8_55, count=10)  # only 9 counting positions
        bad = list(A55)
        bad[4] = bad[9] = 1  # two cars in a capacity-1 junction
        with pytest.raises(ValueError):
            init_occupancy(fig8_55, values=bad)
        with pytest.raises(ValueError):
            init_occupancy(fig8_55, values=[2] + A55[1:])


class TestInvariants:
    @pytest.mark.parametrize("seed", range(6))
    def test_monotone_and_bounded_increments(self, seed):
        rng = np.random.default_rng(seed)
        n, m = int(rng.integers(2, 25)), int(rng.integers(2, 25))
        t = build_figure_eight(n, m)
        a = init_occupancy(t, count=int(rng.integers(0, t.counting_size + 1)),
                           seed=seed)
        sim = Simulation(t, a, DISCRETE)
        prev = sim.x.copy()
        for _ in range(12 * t.counting_size):
            sim.advance()
            delta = sim.x - prev
            assert np.all(delta >= 0)
            assert np.all(delta <= 1)
            prev = sim.x.copy()

    @pytest.mark.parametrize("builder,args", [
        (build_figure_eight, (6, 9)),
        (build_two_junction, (5, 4, 4, 5)),
        (build_torus_city, (2, 2, 3)),
    ])
    def test_car_conservation(self, builder, args):
        t = builder(*args)
        a = init_occupancy(t, count=t.counting_size // 2, seed=2)
        sim = Simulation(t, a, DISCRETE)
        total = a.sum()
        for _ in range(6 * t.counting_size):
            sim.advance()
            y = sim.occupancy()
            assert y.sum() == total
            assert np.all(y >= 0) and np.all(y <= 1)

    def test_additive_homogeneity_exact(self):
        t = build_two_junction(4, 3, 5, 4)
        a = init_occupancy(t, count=7, seed=5)
        rng = np.random.default_rng(9)
        for _ in range(50):
            x = rng.integers(0, 60, size=t.n_slots) / 8.0
            alpha = float(rng.integers(-40, 40)) / 8.0
            base = step(CounterState(0, x, CONTINUOUS), a, t)
            shifted = step(CounterState(0, x + alpha, CONTINUOUS), a, t)
            assert np.array_equal(shifted.x, base.x + alpha)

    def test_bounded_spread(self):
        t = build_figure_eight(11, 7)
        a = init_occupancy(t, count=8, seed=0)
        sim = Simulation(t, a, DISCRETE)
        sim.advance(10 * t.counting_size)
        spread_early = int(sim.x.max() - sim.x.min())
        sim.advance(90 * t.counting_size)
        spread_late = int(sim.x.max() - sim.x.min())
        assert spread_late <= spread_early + 1

    @pytest.mark.parametrize("builder,args,d", [
        (build_two_junction, (8, 6, 6, 8), 0.4),
        (build_torus_city, (2, 2, 4), 0.35),
    ])
    def test_flow_cap_on_multijunction_networks(self, builder, args, d):
        t = builder(*args)
        a = init_occupancy(t, count=round(d * t.counting_size), seed=1)
        sim = Simulation(t, a, DISCRETE)
        K = 40 * t.counting_size
        sim.advance(K // 2)
        x_half = sim.x.copy()
        sim.advance(K - K // 2)
        per_slot = np.max(sim.x - x_half) / (K - K // 2)
        assert per_slot <= 0.25 + 2 / K

    def test_discrete_vs_continuous_within_one(self, fig8_55):
        cont = simulate(fig8_55, A55, CONTINUOUS, horizon=60)
        disc = simulate(fig8_55, A55, DISCRETE, horizon=60)
        for c, d in zip(cont, disc):
            assert np.max(np.abs(d.x - c.x)) <= 1.0


class TestStepValidation:
    def test_dimension_mismatch(self, fig8_55):
        with pytest.raises(ValueError):
            step(CounterState(0, np.zeros(7), CONTINUOUS), A55, fig8_55)
        with pytest.raises(ValueError):
            step(CounterState(0, np.zeros(10), CONTINUOUS), [0, 1], fig8_55)

    def test_gate_shape_checked(self, fig8_55):
        state = CounterState(0, np.zeros(10, dtype=np.int64), DISCRETE)
        with pytest.raises(ValueError):
            step(state, A55, fig8_55, gate=np.array([True, False]))

    def test_gate_caps_entries(self, fig8_55):
        # all-red would be invalid policy-wise, but the cap must still bind
        state = CounterState(0, np.zeros(10, dtype=np.int64), DISCRETE)
        green_pr = step(state, A55, fig8_55, gate=np.array([True]))
        j = fig8_55.junctions[0]
        assert green_pr.x[j.slot_a] == 0  # red for the non-priority approach
        assert green_pr.x[j.slot_b] == 1

    def test_discrete_mode_requires_integers(self, fig8_55):
        state = CounterState(0, np.full(10, 0.5), DISCRETE)
        with pytest.raises(ValueError):
            step(state, A55, fig8_55)


class TestDumps:
    def test_counter_lines_format(self, fig8_55):
        states = simulate(fig8_55, A55, CONTINUOUS, horizon=2)
        lines = counter_lines(states).splitlines()
        assert lines[0] == "\t".join(["0"] * 10)
        assert lines[2].split("\t")[0] == "0.5"

    def test_occupancy_line_junction_chars(self, fig8_55):
        states = simulate(fig8_55, A55, DISCRETE, horizon=2)
        y1 = occupancy_at(states[1], A55, fig8_55)
        line = occupancy_line(fig8_55, y1)
        assert len(line) == fig8_55.counting_size
        assert line == "0011S0100"[:len(line)]
