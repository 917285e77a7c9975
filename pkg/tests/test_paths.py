import io
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from levyito.measure import AtomicMeasure
from levyito.paths import (CadlagPath, compensated_count, constant_path, count_measure, detect_jumps,
                           interval_oscillation, jump_class, jump_numbering, left_limit, oscillation_partition,
                           read_paths_csv, value_at, write_paths_csv)
from levyito.space import BanachDisk, SpaceModel

GRID = np.linspace(0.0, 1.0, 5)
K1 = BanachDisk([1.0])


def staircase(times, deltas, grid=GRID, drift=0.0):
    """Drift plus jumps, grid values computed directly."""
    times = np.asarray(times, float)
    deltas = np.asarray(deltas, float).reshape(len(times), -1) if len(times) else np.zeros((0, 1))
    d = deltas.shape[1]
    vals = np.array([drift * t + deltas[times <= t].sum(axis=0) for t in grid]).reshape(len(grid), d)
    return CadlagPath(grid, vals, times, deltas)


def test_value_at_examples():
    p = staircase([0.3], [[2.0]])
    assert value_at(p, 0.0)[0] == 0.0
    assert value_at(p, 0.3)[0] == 2.0
    assert value_at(p, 0.2999)[0] == 0.0
    c = constant_path(GRID, [1.5, -2.0])
    for t in (0.0, 0.1, 0.77, 1.0):
        assert np.array_equal(value_at(c, t), [1.5, -2.0])
    with pytest.raises(ValueError):
        value_at(p, 1.5)


def test_left_limit_examples():
    p = staircase([0.3, 0.6], [[2.0], [-0.5]], drift=1.0)
    assert left_limit(p, 0.3) == pytest.approx(value_at(p, 0.3) - 2.0)
    assert np.array_equal(left_limit(p, 0.45), value_at(p, 0.45))
    with pytest.raises(ValueError):
        left_limit(p, 0.0)


def test_off_grid_interpolation_with_jumps():
    p = staircase([0.3, 0.35], [[1.0], [0.25]], drift=2.0)
    for t in np.linspace(0, 1, 101):
        want = 2.0 * t + (t >= 0.3) * 1.0 + (t >= 0.35) * 0.25
        assert value_at(p, t)[0] == pytest.approx(want, abs=1e-14)


@settings(max_examples=50)
@given(st.lists(st.tuples(st.integers(1, 1000), st.floats(-3, 3).filter(lambda x: x != 0)), min_size=1, max_size=8))
def test_jump_identity_and_right_continuity(jumps):
    # lattice times keep distinct jumps at least 1e-3 apart
    jumps = sorted((k / 1000, x) for k, x in jumps)
    p = staircase([t for t, _ in jumps], [[x] for _, x in jumps], drift=0.7)
    for t in np.unique([t for t, _ in jumps]):
        assert np.allclose(value_at(p, t) - left_limit(p, t), p.jump_at(t), rtol=0, atol=1e-12)
        stored = sum(x for s, x in jumps if s == t)
        assert p.jump_at(t)[0] == pytest.approx(stored, abs=1e-12)
        if t < 1.0:
            right = [value_at(p, min(1.0, t + 2.0 ** -k))[0] for k in range(20, 40)]
            assert abs(right[-1] - value_at(p, t)[0]) < 1e-9


def test_path_validation():
    with pytest.raises(ValueError):
        CadlagPath([0.1, 1.0], np.zeros((2, 1)))
    with pytest.raises(ValueError):
        CadlagPath([0.0, 0.5, 0.5], np.zeros((3, 1)))
    with pytest.raises(ValueError):
        CadlagPath(GRID, np.zeros((5, 1)), [0.0], [[1.0]])
    with pytest.raises(ValueError):
        CadlagPath(GRID, np.zeros((5, 1)), [0.5], [[0.0]])


def test_count_measure_examples():
    p = staircase([0.2, 0.4, 0.7], [[0.6], [3.0], [0.3]])
    assert count_measure(p, (0.5, 0.5), [1], K1) == 0
    assert count_measure(p, (0.0, 1.0), [1], K1) == 1
    assert count_measure(p, (0.0, 1.0), [0, 1, 3], K1) == 3
    assert count_measure(p, (0.2, 0.7), [0, 1, 3], K1) == 2


def test_compensated_count_examples():
    times = [0.1, 0.2, 0.3, 0.4, 0.5]
    p = staircase(times, [[0.6]] * 5)
    nu = AtomicMeasure([[0.6]], [6.0])
    assert compensated_count(p, (0.0, 1.0), [1], nu, K1) == -1.0
    assert compensated_count(p, (0.0, 1.0), [], nu, K1) == 0.0


def test_compensated_count_rejects_infinite_intensity():
    from levyito.measure import RadialShellMeasure
    p = staircase([0.1], [[0.6]])

    class Infinite(RadialShellMeasure):
        def shell_mass(self, K, n):
            return math.inf

    with pytest.raises(ValueError):
        compensated_count(p, (0.0, 1.0), [1], Infinite(K1), K1)


def test_jump_class_convention():
    assert jump_class(1.5) == 1
    assert jump_class(0.7) == 1
    assert jump_class(0.5) == 2
    assert jump_class(0.4) == 2
    assert jump_class(1 / 3) == 3
    assert jump_class(0.26) == 3


def test_jump_numbering_examples():
    m = SpaceModel(1, [1.0])
    p = staircase([0.2, 0.5, 0.8], [[0.7], [0.4], [5.0]])
    num = jump_numbering(p, m)
    # size 5.0 is capped at 1 by the metric; both it and 0.7 land in class 1
    assert num.classes[1] == (0.2, 0.8)
    assert num.classes[2] == (0.5,)
    assert num.time(1, 1) == 0.2 and num.time(1, 2) == 0.8
    assert num.time(1, 3) == math.inf
    assert num.time(7, 1) == math.inf
    assert num.total() == 3


@settings(max_examples=50)
@given(st.lists(st.tuples(st.floats(0.001, 1.0), st.floats(-3, 3).filter(lambda x: abs(x) > 1e-9)),
                min_size=0, max_size=10, unique_by=lambda x: x[0]))
def test_numbering_partitions_the_jumps(jumps):
    jumps = sorted(jumps)
    p = staircase([t for t, _ in jumps], [[x] for _, x in jumps])
    m = SpaceModel(1, [1.0])
    num = jump_numbering(p, m)
    assert num.total() == len(jumps)
    for n, times in num.classes.items():
        assert all(a < b for a, b in zip(times, times[1:]))
        for t in times:
            size = min(1.0, abs(p.jump_at(t)[0]))
            if n == 1:
                assert size > 0.5
            else:
                assert 1 / (n + 1) < size <= 1 / n


def test_oscillation_partition_examples():
    assert oscillation_partition(constant_path(GRID, [1.0]), 0.1, K1) == [0.0, 1.0]
    p = staircase([0.35], [[2.0]])
    assert oscillation_partition(p, 0.5, K1) == [0.0, 0.35, 1.0]
    p = staircase([0.2, 0.5, 0.8], [[1.0], [1.0], [1.0]])
    assert oscillation_partition(p, 0.5, K1) == [0.0, 0.2, 0.5, 0.8, 1.0]


@settings(max_examples=40, deadline=None)
@given(st.lists(st.tuples(st.floats(0.01, 1.0), st.floats(-2, 2).filter(lambda x: abs(x) > 1e-6)),
                max_size=6, unique_by=lambda x: x[0]),
       st.floats(-3, 3), st.sampled_from([0.05, 0.2, 0.7]))
def test_oscillation_partition_is_valid(jumps, drift, eps):
    jumps = sorted(jumps)
    grid = np.linspace(0, 1, 9)
    p = staircase([t for t, _ in jumps], [[x] for _, x in jumps], grid=grid, drift=drift)
    bps = oscillation_partition(p, eps, K1)
    assert bps[0] == 0.0 and bps[-1] == 1.0
    assert all(a < b for a, b in zip(bps, bps[1:]))
    for a, b in zip(bps, bps[1:]):
        assert interval_oscillation(p, a, b, K1) < eps


def test_oscillation_partition_weak_metric():
    m = SpaceModel(2)
    p = staircase([0.5], [[3.0, 0.0]], drift=0.0)
    assert oscillation_partition(p, 0.1, m) == [0.0, 0.5, 1.0]


def test_detect_jumps_recovers_large_steps():
    grid = np.linspace(0, 1, 101)
    vals = (0.01 * grid + (grid >= 0.5) * 1.0)[:, None]
    p = detect_jumps(grid, vals, 0.2, K1)
    assert p.n_jumps == 1 and p.jump_times[0] == grid[50]
    assert value_at(p, 0.7)[0] == pytest.approx(vals[70, 0])


def test_csv_round_trip_is_exact():
    rng = np.random.default_rng(0)
    paths = []
    for r in range(3):
        t = np.sort(rng.random(4))
        paths.append(staircase(t, rng.standard_normal((4, 2)), drift=rng.standard_normal()))
    buf = io.StringIO()
    write_paths_csv(buf, paths)
    text = buf.getvalue()
    assert text.splitlines()[0] == "replica,t,kind,value_0,value_1,delta_0,delta_1"
    back = read_paths_csv(text)
    assert sorted(back) == [0, 1, 2]
    for r, p in enumerate(paths):
        q = back[r]
        assert np.array_equal(q.grid, p.grid) and np.array_equal(q.values, p.values)
        assert np.array_equal(q.jump_times, p.jump_times) and np.array_equal(q.jump_deltas, p.jump_deltas)
