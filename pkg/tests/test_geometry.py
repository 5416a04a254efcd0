import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bergman_lab.geometry import (
    MetricBall,
    as_point,
    bergman_distance,
    distance_from_origin,
    inner,
    invariant_ball_sample,
    moebius,
    moebius_many,
    one_minus_phi_sq,
    pseudo_distance,
    radius_at_distance,
)


def ball_points(n, r_max=0.95):
    coord = st.floats(-1, 1, allow_nan=False)

    def build(parts):
        re, im, r = np.array(parts[0]), np.array(parts[1]), parts[2]
        z = re + 1j * im
        size = np.linalg.norm(z)
        return np.zeros(n, complex) if size == 0 else z / size * r

    return st.tuples(
        st.lists(coord, min_size=n, max_size=n),
        st.lists(coord, min_size=n, max_size=n),
        st.floats(0, r_max),
    ).map(build)


points = st.sampled_from([1, 2, 3]).flatmap(lambda n: st.tuples(ball_points(n), ball_points(n)))


def test_inner_examples():
    assert inner([1, 0], [0, 1]) == 0
    assert inner([0.5], [0.5]) == pytest.approx(0.25)
    assert inner([0.3j], [0.2]) == pytest.approx(0.06j)
    with pytest.raises(ValueError):
        inner([1, 0], [1])


def test_moebius_examples():
    w = np.array([0.3 + 0.1j, -0.2j])
    assert np.allclose(moebius(w, np.zeros(2)), w)
    assert np.allclose(moebius(w, w), 0, atol=1e-15)
    assert moebius([0.5], [0.25])[0] == pytest.approx(0.25 / 0.875, rel=1e-14)
    assert np.array_equal(moebius([0.0, 0.0], [0.1, 0.2]), np.array([0.1, 0.2], complex))


def test_non_interior_rejected():
    with pytest.raises(ValueError):
        as_point([0.8, 0.7])
    with pytest.raises(ValueError):
        moebius([0.5], [1.0])


@settings(max_examples=200, deadline=None)
@given(points)
def test_involution(pair):
    z, w = pair
    assert np.allclose(moebius(w, moebius(w, z)), z, atol=1e-10)


@settings(max_examples=200, deadline=None)
@given(points)
def test_phi_identity(pair):
    z, w = pair
    lhs = 1 - np.sum(np.abs(moebius(w, z)) ** 2)
    assert lhs == pytest.approx(one_minus_phi_sq(z, w), abs=1e-10)


def test_sqrt_one_minus_z_variant_is_not_an_involution():
    # the alternative placement of the square root breaks phi_w o phi_w = id in C^2
    w = np.array([0.5, 0.0], complex)
    z = np.array([0.1, 0.6], complex)

    def phi_alt(w, z):
        ww = np.vdot(w, w).real
        zw = inner(z, w)
        pz = zw / ww * w
        return (w - pz - np.sqrt(1 - np.vdot(z, z).real) * (z - pz)) / (1 - zw)

    assert np.linalg.norm(phi_alt(w, phi_alt(w, z)) - z) > 1e-3
    assert np.linalg.norm(moebius(w, moebius(w, z)) - z) < 1e-14


def test_distance_examples():
    z = np.array([0.3 + 0.4j])
    assert bergman_distance(z, z) == 0
    assert bergman_distance([0.0], [0.5]) == pytest.approx(0.5 * math.log(3), rel=1e-14)
    rng = np.random.default_rng(0)
    Z = invariant_ball_sample(2, 0.99, 1000, rng)
    W = invariant_ball_sample(2, 0.99, 1000, rng)
    assert np.max(np.abs(bergman_distance(Z, W) - bergman_distance(W, Z))) <= 1e-12


@settings(max_examples=100, deadline=None)
@given(points, ball_points(3, 0.9))
def test_distance_is_moebius_invariant(pair, a):
    z, w = pair
    a = a[: len(z)]
    # compared through 1 - |phi|^2: the distance itself loses half the
    # digits near the diagonal through the square root
    s0 = one_minus_phi_sq(z, w)
    s1 = one_minus_phi_sq(moebius(a, z), moebius(a, w))
    assert s1 == pytest.approx(s0, rel=1e-9)


def test_distance_near_diagonal():
    # infinitesimally d(z, z + h) = |h| / (1 - |z|^2) for n = 1
    for z in (0.0, 0.5j, 0.99):
        h = 1e-9 * (1 + 1j)
        d = bergman_distance([z], [z + h])
        assert d == pytest.approx(abs(h) / (1 - abs(z) ** 2), rel=1e-6)
    w = np.array([0.3 - 0.2j, 0.6])
    assert bergman_distance(w, w.copy()) == 0
    assert pseudo_distance(w, w) == 0


def test_distance_from_origin_increasing():
    r = np.linspace(0, 0.999, 500)
    d = np.array([bergman_distance([0.0], [x]) for x in r])
    assert np.all(np.diff(d) > 0)
    assert np.allclose(d, distance_from_origin(r), atol=1e-12)
    assert np.allclose(radius_at_distance(distance_from_origin(r)), r)


def test_metric_ball_sample_inside():
    ball = MetricBall(np.array([0.7, 0.2j]), 0.5)
    pts = ball.sample(2000, np.random.default_rng(1))
    assert np.all(ball.contains(pts))
    with pytest.raises(ValueError):
        MetricBall(np.array([0.1]), 0.0)


def test_moebius_many_matches_moebius():
    rng = np.random.default_rng(2)
    w = np.array([0.2, -0.5j])
    Z = 0.5 * (rng.standard_normal((20, 2)) + 1j * rng.standard_normal((20, 2))) / 3
    got = moebius_many(w, Z)
    assert np.allclose(got, [moebius(w, z) for z in Z], atol=1e-14)


def test_kernel_envelope_on_metric_balls():
    # |1 - <z, zj>| / (1 - |zj|^2) stays within fixed constants on D(zj, 2 eta)
    rng = np.random.default_rng(3)
    ratios = []
    for r in (0.5, 0.9, 0.99, 0.999):
        c = np.array([r * np.exp(0.3j)])
        pts = MetricBall(c, 1.0).sample(500, rng)
        ratios.append(np.abs(1 - pts @ np.conj(c)) / (1 - r * r))
    ratios = np.concatenate(ratios)
    assert 0.1 < ratios.min() and ratios.max() < 10
