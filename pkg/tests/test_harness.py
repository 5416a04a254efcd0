import json
import math

import numpy as np
import pytest

from bergman_lab.harness import (
    BOUNDED,
    COMPACT,
    UNBOUNDED,
    Thresholds,
    classify,
    compactness_probe,
    consistency_report,
    empirical_lower_bound,
    is_decaying,
    kernel_norm_asymptotic,
    pmap,
    pointwise_exponent,
    pointwise_lower_bound_check,
    target_norm,
    w_schedule,
    worker_count,
)
from bergman_lab.holo import LogKernel, Polynomial, PowerKernel, apply_tg, cesaro_symbol
from bergman_lab.quadrature import PairParams, QuadratureSpec, SpaceParams, bergman_norm

Z = Polynomial.variable(1, 0)
CONST = Polynomial.constant(1, 2.5)
CES = LogKernel([1.0])
POLE = PowerKernel([1.0], 1.0)
BLOCH = PairParams.of(1, 2, 2, 0, 0)
P_GT_Q = PairParams.of(1, 2, 1, 0, 0)
GAMMA_NEG = PairParams.of(1, 1, 2, 1, 0)
RAY = [np.array([1 - s]) for s in (1e-1, 1e-2, 1e-3)]


# ------------------------------------------------------------ classify


def test_classify_examples():
    v = classify(Z, BLOCH)
    assert v.classification == COMPACT and v.bounded and not v.constancy_flag
    c = classify(CONST, BLOCH)
    assert c.classification == COMPACT and c.criterion_value == 0
    neg = classify(Z, GAMMA_NEG)
    assert neg.classification == UNBOUNDED and neg.constancy_flag
    assert not classify(CONST, GAMMA_NEG).constancy_flag


def test_classify_bloch_and_little_bloch():
    assert classify(CES, BLOCH).classification == BOUNDED
    assert classify(POLE, BLOCH).classification == UNBOUNDED
    assert classify(CES, P_GT_Q).classification == COMPACT
    assert classify(POLE, P_GT_Q).classification == UNBOUNDED


@pytest.mark.parametrize("g", [CES, Z, PowerKernel([1.0], 0.5)])
@pytest.mark.parametrize("pair", [BLOCH, P_GT_Q])
def test_classify_invariances(g, pair):
    base = classify(g, pair)
    shifted = classify(g + 7.0, pair)
    assert shifted.classification == base.classification
    assert shifted.criterion_value == pytest.approx(base.criterion_value, rel=1e-9)
    lam = 3.0 - 4.0j
    scaled = classify(g.scale(lam), pair)
    power = pair.p * pair.q / (pair.p - pair.q) if pair.p > pair.q else 1.0
    assert scaled.bounded == base.bounded
    assert scaled.criterion_value == pytest.approx(abs(lam) ** power * base.criterion_value, rel=1e-6)


def test_classify_dimension_mismatch():
    with pytest.raises(ValueError):
        classify(cesaro_symbol(2), BLOCH)


def test_is_decaying():
    t = Thresholds()
    assert is_decaying([1.0, 0.5, 0.005], t)
    assert is_decaying([1.0, 0.5, 0.2], t)
    assert not is_decaying([1.0, 0.9, 0.8], t)
    assert not is_decaying([1.0, 1.1, 1.2], t)


# ------------------------------------------------------------ probes


def test_lower_bound_examples():
    assert [b for _, b in empirical_lower_bound(CONST, BLOCH, RAY)] == [0, 0, 0]
    ces = [b for _, b in empirical_lower_bound(CES, BLOCH, RAY)]
    assert ces[-1] < 1.5 * ces[0]
    pole = [b for _, b in empirical_lower_bound(POLE, BLOCH, RAY)]
    assert pole[-1] > 10 * pole[0]
    assert all(b >= a for a, b in zip(pole, pole[1:]))
    with pytest.raises(ValueError):
        empirical_lower_bound(CES, BLOCH, [np.array([1.0])])


def test_target_norm_direct_mode():
    f = Polynomial.from_dense([1.0, -0.5, 0.25])
    g = Polynomial.from_dense([0, 1.0, 0, 2.0])
    spec = QuadratureSpec()
    w = np.array([0.0])
    direct = target_norm(f, g, SpaceParams(1, 2, 0), w, spec, mode="direct", cut=0.0)
    exact = bergman_norm(apply_tg(f, g), SpaceParams(1, 2, 0), spec)
    assert direct == pytest.approx(exact, rel=1e-10)
    with pytest.raises(ValueError):
        target_norm(f, g, SpaceParams(1, 2, 0), w, spec, mode="bogus")


def test_compactness_probe_examples():
    assert compactness_probe(CONST, BLOCH, RAY)["values"] == [0, 0, 0]
    poly = compactness_probe(Z, BLOCH, RAY)
    assert poly["values"][-1] < 1e-2 and poly["below_threshold"] and poly["decaying"]
    ces = compactness_probe(CES, BLOCH, RAY)
    assert ces["values"][-1] >= 0.5 * ces["values"][0]
    assert not ces["decaying"]


def test_w_schedule_adds_diagonal_for_cesaro():
    rays = w_schedule(cesaro_symbol(2) + Polynomial(2, {(3, 0): 5000.0}))
    assert len(rays) == 2
    assert np.allclose(rays[1][0], 0.9 * np.full(2, 2**-0.5))
    assert len(w_schedule(Z)) == 1


@pytest.mark.parametrize("p,expected", [(2, -1.0), (4, -1.5), (1.5, -2 / 3)])
def test_kernel_slopes_case1(p, expected):
    fit = kernel_norm_asymptotic(SpaceParams(1, p, 0), RAY)
    assert fit.expected == pytest.approx(expected)
    assert fit.slope == pytest.approx(expected, rel=0.05)


def test_kernel_slope_kp():
    fit = kernel_norm_asymptotic(SpaceParams(1, 1, 0), RAY, m=3)
    assert fit.kernel == "Kp" and fit.slope == pytest.approx(-1, rel=0.05)


def test_kernel_slope_p1_borderline():
    # the A^1 norm of K grows like log(1/(1-|w|)): slope tends to 0 slowly
    deep = [np.array([1 - s]) for s in (1e-4, 1e-5, 1e-6, 1e-7)]
    fit = kernel_norm_asymptotic(SpaceParams(1, 1, 0), deep, kernel="K")
    assert fit.expected == 0
    assert abs(fit.slope) <= 0.1


def test_kernel_slope_needs_three_points():
    with pytest.raises(ValueError):
        kernel_norm_asymptotic(SpaceParams(1, 2, 0), RAY[:2])


def test_pointwise_check():
    assert pointwise_exponent(BLOCH) == 0
    empty = pointwise_lower_bound_check(CONST, BLOCH, RAY)
    assert empty.empty and len(empty.skipped) == 3
    grid = [np.array([r]) for r in (0.5, 0.7, 0.9)]
    res = pointwise_lower_bound_check(Z, BLOCH, grid)
    assert res.min_ratio > 0 and res.violation is None
    # normalization-invariant: scaling g scales both sides by |lambda|^q
    scaled = pointwise_lower_bound_check(Z.scale(-5j), BLOCH, grid)
    assert scaled.ratios == pytest.approx(res.ratios, rel=1e-10)
    # and skips zeros of Rg
    mixed = pointwise_lower_bound_check(Z, BLOCH, [np.array([0.0])] + grid)
    assert len(mixed.skipped) == 1 and mixed.ratios == pytest.approx(res.ratios)


# ------------------------------------------------------------ consistency


@pytest.mark.parametrize("g,pair,label", [(Z, BLOCH, COMPACT), (Z, GAMMA_NEG, UNBOUNDED),
                                          (CONST, BLOCH, COMPACT), (CES, BLOCH, BOUNDED)])
def test_consistency_report(g, pair, label):
    report, runtime = consistency_report(g, pair, symbol_descriptor="g")
    assert report["classification"]["label"] == label
    assert report["consistency"]["status"] == "CONSISTENT"
    assert runtime > 0 and report["runtime_ms"] is None
    keys = {"symbol_descriptor", "pair", "branch", "criterion_schedule", "seminorm", "decay_profile",
            "lower_bounds", "probe_profile", "classification", "consistency", "seed", "runtime_ms"}
    assert keys <= set(report)
    json.dumps(report)


def test_report_deterministic_across_thread_counts():
    a, _ = consistency_report(CES, P_GT_Q, threads=1)
    b, _ = consistency_report(CES, P_GT_Q, threads=4)
    assert json.dumps(a, sort_keys=True) == json.dumps(b, sort_keys=True)


def test_pmap_and_workers(monkeypatch):
    assert pmap(lambda x: x * x, range(20), threads=4) == [x * x for x in range(20)]
    monkeypatch.setenv("BERGMAN_LAB_THREADS", "3")
    assert worker_count() == 3
    assert worker_count(1) == 1
    assert math.isfinite(worker_count())
