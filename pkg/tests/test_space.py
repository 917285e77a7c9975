import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from levyito.space import (BanachDisk, DimensionError, SpaceModel, gauge_norm, shell_bounds, shell_index,
                           shell_indices, shell_of_gauge, weak_distance)

K3 = BanachDisk([1.0, 0.5, 1 / 3])
finite = st.floats(-1e3, 1e3, allow_nan=False)
vec3 = arrays(float, 3, elements=finite)


def test_gauge_examples():
    assert gauge_norm([1, 0, 0], K3) == 1.0
    assert gauge_norm([0, 1, 0], K3) == 2.0
    assert gauge_norm([0, 0, 0], K3) == 0.0


def test_gauge_dimension_mismatch():
    with pytest.raises(DimensionError):
        gauge_norm([1.0, 2.0], K3)


def test_disk_rejects_nonpositive_radius():
    with pytest.raises(ValueError):
        BanachDisk([1.0, 0.0])


@given(vec3, vec3, st.floats(-100, 100, allow_nan=False))
def test_gauge_is_a_norm(x, y, alpha):
    gx, gy = gauge_norm(x, K3), gauge_norm(y, K3)
    assert gauge_norm(x + y, K3) <= gx + gy + 1e-12 * (1 + gx + gy)
    assert gauge_norm(alpha * x, K3) == pytest.approx(abs(alpha) * gx, rel=1e-12, abs=1e-300)
    assert gauge_norm(-x, K3) == gx


def test_weak_distance_examples():
    m1 = SpaceModel(1, [1.0])
    assert weak_distance([3.0], [0.0], m1) == 1.0
    m = SpaceModel(3)
    assert weak_distance([1, 2, 3], [1, 2, 3], m) == 0.0


def test_default_weights_geometric_and_normalized():
    w = SpaceModel(4).weights
    assert w.sum() == pytest.approx(1.0)
    assert np.allclose(w[1:] / w[:-1], 0.5)


def test_weights_rescaled_only_when_sum_exceeds_one():
    assert np.allclose(SpaceModel(2, [0.2, 0.3]).weights, [0.2, 0.3])
    assert SpaceModel(2, [2.0, 2.0]).weights.sum() == pytest.approx(1.0)
    with pytest.raises(ValueError):
        SpaceModel(2, [1.0, -1.0])
    with pytest.raises(ValueError):
        SpaceModel(0)


@given(vec3, vec3, vec3)
def test_weak_distance_is_a_bounded_metric(x, y, z):
    m = SpaceModel(3)
    dxy = weak_distance(x, y, m)
    assert dxy == pytest.approx(weak_distance(y, x, m))
    assert 0 <= dxy <= m.weights.sum() + 1e-15
    assert dxy <= weak_distance(x, z, m) + weak_distance(z, y, m) + 1e-12


def test_weak_distance_follows_gauge_convergence():
    m = SpaceModel(3)
    x = np.array([0.3, -1.0, 2.0])
    direction = np.array([1.0, -2.0, 0.5])
    prev = np.inf
    for k in range(1, 40):
        xk = x + direction / 2 ** k
        d = weak_distance(xk, x, m)
        assert d <= prev
        prev = d
    assert prev < 1e-10


def test_shell_examples():
    K = BanachDisk([1.0])
    assert shell_index([0.6], K) == 1
    assert shell_index([2.0], K) == 0
    assert shell_index([0.3], K) == 3
    assert shell_index([-0.3], K) == 3


def test_shell_origin_rejected():
    with pytest.raises(ValueError):
        shell_index([0.0, 0.0, 0.0], K3)


def test_shell_boundaries_are_right_closed():
    for n in range(1, 200):
        assert shell_of_gauge(1.0 / n) == n
        assert shell_of_gauge(np.nextafter(1.0 / n, 2.0)) == n - 1
    assert shell_of_gauge(1.0) == 1
    assert shell_of_gauge(np.nextafter(1.0, 2.0)) == 0


@settings(max_examples=300)
@given(st.floats(1e-6, 1e6, allow_nan=False))
def test_shell_partition_exact(g):
    n = int(shell_of_gauge(g))
    if n == 0:
        assert g > 1
    else:
        lo, hi = shell_bounds(n)
        assert lo < g <= hi


def test_shell_indices_vectorized_matches_scalar():
    rng = np.random.default_rng(3)
    xs = rng.standard_normal((500, 3)) * rng.exponential(1.0, (500, 1))
    assert list(shell_indices(xs, K3)) == [shell_index(x, K3) for x in xs]
