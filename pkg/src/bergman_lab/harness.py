"""Boundedness/compactness classifier for T_g and the kernel-probe cross-checks.

Two independent routes are compared:

* the criteria: an integral of |Rg| when p > q, a Bloch-type seminorm and its
  boundary decay when p <= q, both evaluated on truncated balls along an
  r_max schedule;
* operator probes: ||T_g k(w, .)|| for normalized reproducing-kernel test
  functions k as w runs toward the sphere, which bound the operator norm
  from below.

Target norms of T_g f are computed in derivative form,
(int |f Rg|^q (1-|z|^2)^{q+beta} dv)^{1/q}, which is equivalent to the
A^q_beta norm because T_g f(0) = 0 and R(T_g f) = f Rg.  The target integral
is truncated at 1 - (1-|w|)/10: a truncated norm over the full kernel norm is
still a lower bound, and it stays finite when T_g k is not in A^q_beta.
"""

import logging
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .geometry import diagonal_direction, norm
from .holo import (
    KernelTerm,
    LogKernel,
    Sum,
    TgFunction,
    default_m,
    is_constant,
    kernel_K,
    kernel_Kp,
)
from .quadrature import (
    SCHEDULE,
    Integrand,
    QuadratureSpec,
    _directions,
    _json_float,
    bergman_norm,
    bloch_schedule,
    constancy_regime,
    criterion_integral,
    decay_profile,
    diagnose,
    gamma_exponent,
    integrate_weighted,
)

log = logging.getLogger(__name__)

SCHEMA_VERSION = "1.0"
W_GAPS = (1e-1, 1e-2, 1e-3)
DECAY_SHELLS = (0.5, 0.9, 0.99, 0.999, 0.9999)
P_GT_Q, P_LE_Q = "P_GT_Q", "P_LE_Q"
BOUNDED, COMPACT, UNBOUNDED, INCONCLUSIVE = "BOUNDED", "COMPACT", "UNBOUNDED", "INCONCLUSIVE"


@dataclass(frozen=True)
class Thresholds:
    """Numerical stand-ins for the limits in the criteria."""

    schedule: tuple = SCHEDULE
    w_gaps: tuple = W_GAPS
    shells: tuple = DECAY_SHELLS
    growth: float = 10.0
    compact: float = 1e-2
    decay_ratio: float = 0.25
    target_cut: float = 0.1

    def as_dict(self):
        return {k: list(v) if isinstance(v, tuple) else v for k, v in asdict(self).items()}


DEFAULT = Thresholds()


def worker_count(threads=None):
    if threads is None:
        threads = int(os.environ.get("BERGMAN_LAB_THREADS", "0") or 0)
    return max(1, threads or min(8, os.cpu_count() or 1))


def pmap(fn, items, threads=None):
    """Ordered parallel map; results follow the input order."""
    items = list(items)
    k = worker_count(threads)
    if k == 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=k) as ex:
        return list(ex.map(fn, items))


# ---------------------------------------------------------------- verdicts


@dataclass
class Verdict:
    branch: str
    criterion_value: object
    classification: str
    evidence: dict = field(default_factory=dict)
    constancy_flag: bool = False

    @property
    def bounded(self):
        return self.classification in (BOUNDED, COMPACT)

    def as_dict(self):
        d = asdict(self)
        d["criterion_value"] = _value_json(self.criterion_value)
        return d


def _value_json(v):
    if isinstance(v, str):
        return v
    return "divergent" if v is None or not math.isfinite(v) else float(v)


def is_decaying(values, thresholds=DEFAULT):
    """Below the compactness threshold at the last point, or strictly
    decreasing with an overall drop by at least ``decay_ratio``."""
    v = list(values)
    if v[-1] < thresholds.compact:
        return True
    falling = all(b < a for a, b in zip(v, v[1:]))
    return bool(falling and v[-1] <= thresholds.decay_ratio * v[0])


def _verdict_to_class(verdict):
    return {"FINITE": BOUNDED, "DIVERGENT": UNBOUNDED}.get(verdict, INCONCLUSIVE)


def classify(g, pair, spec=QuadratureSpec(), thresholds=DEFAULT, threads=None):
    """Evaluate the boundedness/compactness criteria for T_g: A^p_alpha -> A^q_beta.

    p > q: bounded and compact coincide; the criterion integral is run along
    the r_max schedule.  p <= q: the weighted seminorm decides boundedness,
    and COMPACT additionally needs the shell suprema near the sphere and the
    normalized-kernel probe both below ``thresholds.compact``.
    """
    if g.n != pair.n:
        raise ValueError(f"symbol lives in C^{g.n} but the pair has n={pair.n}")
    rules = {"growth": thresholds.growth}
    nonconstant = not is_constant(g)
    flag = bool(constancy_regime(pair) and nonconstant)
    evidence = {}
    if pair.p > pair.q:
        res = criterion_integral(g, pair, spec, thresholds.schedule)
        res.verdict, res.limit = diagnose(res.values, **rules)
        evidence["criterion_schedule"] = res.as_dict()
        cls = _verdict_to_class(res.verdict)
        if cls == BOUNDED:
            cls = COMPACT
        value = res.limit
        return Verdict(P_GT_Q, value, cls, evidence, flag)

    gamma = gamma_exponent(pair)
    res = bloch_schedule(g, gamma, thresholds.schedule, seed=spec.seed)
    res.verdict, res.limit = diagnose(res.values, **rules)
    evidence["gamma"] = gamma
    evidence["seminorm"] = res.as_dict()
    cls = _verdict_to_class(res.verdict)
    if cls == BOUNDED:
        prof = decay_profile(g, gamma, thresholds.shells, seed=spec.seed)
        evidence["decay_profile"] = prof.as_dict()
        tail = prof.values[-1]
        if tail < thresholds.compact:
            probe = compactness_probe(g, pair, None, spec, thresholds, threads)
            evidence["probe_profile"] = probe
            if probe["values"][-1] < thresholds.compact:
                cls = COMPACT
    return Verdict(P_LE_Q, res.limit, cls, evidence, flag)


# ---------------------------------------------------------------- probes


def _is_cesaro(g):
    terms = g.terms if isinstance(g, Sum) else [g]
    return any(isinstance(t, LogKernel) for t in terms)


def worst_direction(g, count=512, r=0.999, seed=0):
    """Unit direction maximizing |Rg| on a sphere grid at radius ``r``."""
    n = g.n
    rng = np.random.default_rng(seed)
    dirs = _directions(g, n, count, rng)
    vals = np.abs(g.radial_derivative().evaluate(r * dirs))
    if not np.any(vals > 0):
        return np.eye(n, dtype=complex)[0]
    return dirs[int(np.argmax(vals))]


def w_schedule(g, gaps=W_GAPS, seed=0):
    """Rays toward the worst direction (and the diagonal for Cesaro symbols).

    Returns a list of rays, each a list of points with 1 - |w| = gap.
    """
    rays = [worst_direction(g, seed=seed)]
    diag = diagonal_direction(g.n)
    if _is_cesaro(g) and abs(abs(np.vdot(rays[0], diag)) - 1.0) > 1e-9:
        rays.append(diag)
    return [[(1.0 - s) * d for s in gaps] for d in rays]


def probe_kernels(w, space, m=None, critical=False):
    """Reproducing-kernel test functions at w (unnormalized).

    K(w, .) for p > 1 and K_p(w, .) for p <= 1.  With ``critical`` the
    kernel (1 - <z, w>)^{-(n+1+alpha)/p} is added: its norm grows only
    logarithmically, which is what detects logarithmic divergence in the
    p > q branch.
    """
    w = np.asarray(w, dtype=complex).reshape(space.n)
    if space.p > 1:
        fams = {"K": kernel_K(w, space)}
    else:
        fams = {"Kp": kernel_Kp(w, space, m)}
    if critical:
        fams["critical"] = KernelTerm(w, (space.n + 1 + space.alpha) / space.p)
    return fams


def kernel_norm(f, space, spec=QuadratureSpec()):
    return bergman_norm(f, space, spec.with_rmax(1.0))


def target_norm(f, g, target, w, spec=QuadratureSpec(), mode="derivative", cut=0.1):
    """||T_g f||_{A^q_beta} over |z| <= 1 - cut*(1-|w|).

    ``mode="derivative"``: (int |f Rg|^q (1-|z|^2)^{q+beta} dv)^{1/q};
    ``mode="direct"``: the norm of T_g f itself, evaluated by t-quadrature.
    """
    r_max = 1.0 - cut * (1.0 - float(norm(np.asarray(w))))
    sub = spec.with_rmax(r_max)
    q, beta = target.p, target.alpha
    if mode == "direct":
        return bergman_norm(TgFunction(f, g), target, sub)
    if mode != "derivative":
        raise ValueError(f"unknown target-norm mode {mode!r}")
    rg = g.radial_derivative()
    F = Integrand(f.n, lambda Z: np.abs(f.evaluate(Z) * rg.evaluate(Z)) ** q)
    focus = list(f.singular_points()) + list(rg.singular_points())
    val = integrate_weighted(F, q + beta, sub, focus)
    return val ** (1.0 / q)


def _probe_one(g, pair, w, spec, m, critical, mode, cut):
    if is_constant(g):
        return {k: 0.0 for k in probe_kernels(w, pair.source, m, critical)}
    out = {}
    for name, K in probe_kernels(w, pair.source, m, critical).items():
        kn = kernel_norm(K, pair.source, spec)
        out[name] = target_norm(K, g, pair.target, w, spec, mode, cut) / kn
    return out


def probe_values(g, pair, points, spec=QuadratureSpec(), m=None, critical=False,
                 mode="derivative", cut=0.1, threads=None):
    """Per-point dict of normalized probe values ||T_g k(w, .)||."""
    return pmap(lambda w: _probe_one(g, pair, w, spec, m, critical, mode, cut), points, threads)


def empirical_lower_bound(g, pair, w_grid, spec=QuadratureSpec(), m=None, mode="derivative",
                          cut=0.1, threads=None):
    """List of (w, running max of ||T_g k(w, .)||) lower bounds for ||T_g||.

    The p > q branch also uses the critical-exponent kernel.
    """
    if any(norm(np.asarray(w)) >= 1 for w in w_grid):
        raise ValueError("w_grid must be interior")
    vals = probe_values(g, pair, w_grid, spec, m, pair.p > pair.q, mode, cut, threads)
    best, out = 0.0, []
    for w, v in zip(w_grid, vals):
        best = max(best, max(v.values()))
        out.append((np.asarray(w), best))
    return out


def compactness_probe(g, pair, w_schedule_pts=None, spec=QuadratureSpec(), thresholds=DEFAULT,
                      threads=None, m=None):
    """||T_g k_p(w, .)||_{A^q_beta} along a ray toward the sphere."""
    if w_schedule_pts is None:
        w_schedule_pts = w_schedule(g, thresholds.w_gaps, spec.seed)[0]
    vals = probe_values(g, pair, w_schedule_pts, spec, m, False, "derivative",
                        thresholds.target_cut, threads)
    values = [max(v.values()) for v in vals]
    return {
        "w": [_point_json(w) for w in w_schedule_pts],
        "values": values,
        "below_threshold": bool(values[-1] < thresholds.compact),
        "decaying": is_decaying(values, thresholds),
    }


@dataclass
class AsymptoticFit:
    slope: float
    expected: float
    gaps: list
    norms: list
    kernel: str

    def as_dict(self):
        return asdict(self)


def kernel_norm_asymptotic(space, w_schedule_pts, m=None, kernel=None, spec=QuadratureSpec()):
    """Least-squares slope of log||K(w, .)|| against log(1-|w|^2).

    ``kernel`` is "K" or "Kp"; by default K for p > 1 and K_p for p <= 1.
    """
    pts = [np.asarray(w, dtype=complex).reshape(space.n) for w in w_schedule_pts]
    if len(pts) < 3:
        raise ValueError("kernel_norm_asymptotic needs at least 3 schedule points")
    kernel = kernel or ("K" if space.p > 1 else "Kp")
    n, p, a = space.n, space.p, space.alpha
    if kernel == "K":
        expected = -(n + 1 + a) * (p - 1) / p
        make = lambda w: kernel_K(w, space)  # noqa: E731
    elif kernel == "Kp":
        m = default_m(space) if m is None else m
        expected = (n + 1 + a - m) / p
        make = lambda w: kernel_Kp(w, space, m)  # noqa: E731
    else:
        raise ValueError(f"unknown kernel {kernel!r}")
    norms = [kernel_norm(make(w), space, spec) for w in pts]
    x = np.log(1.0 - np.array([float(norm(w)) ** 2 for w in pts]))
    slope = float(np.polyfit(x, np.log(norms), 1)[0])
    gaps = [1.0 - float(norm(w)) for w in pts]
    return AsymptoticFit(slope, expected, gaps, norms, kernel)


@dataclass
class PointwiseCheck:
    min_ratio: float
    ratios: list
    skipped: list
    exponent: float
    envelope: float
    violation: object = None
    empty: bool = False

    def as_dict(self):
        d = asdict(self)
        d["min_ratio"] = _json_float(self.min_ratio)
        d["envelope"] = _json_float(self.envelope)
        return d


def pointwise_exponent(pair, m=None):
    n, p, q, a, b = pair.n, pair.p, pair.q, pair.alpha, pair.beta
    if p > 1:
        return q + (1 - q) * (n + 1 + a) + b - a
    m = default_m(pair.source) if m is None else m
    return q + n + 1 + b - m * q / p


def pointwise_lower_bound_check(g, pair, w_grid, spec=QuadratureSpec(), m=None, cut=0.1,
                                threads=None, floor=1e-12):
    """min over w of ||T_g K(w,.)||^q / ((1-|w|^2)^E |Rg(w)|^q) and its spread.

    K is the unnormalized kernel (K_p when p <= 1).  Points where Rg
    vanishes are skipped; an all-skipped grid is flagged ``empty``.
    """
    rg = g.radial_derivative()
    E = pointwise_exponent(pair, m)
    keep, skipped = [], []
    for w in w_grid:
        w = np.asarray(w, dtype=complex).reshape(pair.n)
        (keep if abs(rg(w)) > 1e-14 else skipped).append(w)
    if not keep:
        return PointwiseCheck(math.nan, [], [_point_json(w) for w in skipped], E, math.nan, empty=True)

    def ratio(w):
        K = probe_kernels(w, pair.source, m)
        K = next(iter(K.values()))
        lhs = target_norm(K, g, pair.target, w, spec, cut=cut) ** pair.q
        ww = float(norm(w)) ** 2
        return lhs / ((1.0 - ww) ** E * abs(rg(w)) ** pair.q)

    ratios = pmap(ratio, keep, threads)
    lo = min(ratios)
    violation = None
    if lo < floor:
        violation = _point_json(keep[int(np.argmin(ratios))])
    return PointwiseCheck(float(lo), [float(r) for r in ratios], [_point_json(w) for w in skipped],
                          E, float(max(ratios) / lo) if lo > 0 else math.inf, violation)


# ---------------------------------------------------------------- report


def _point_json(w):
    w = np.atleast_1d(np.asarray(w, dtype=complex))
    return [[float(c.real), float(c.imag)] for c in w]


def consistency_report(g, pair, spec=QuadratureSpec(), symbol_descriptor=None, thresholds=DEFAULT,
                       threads=None, mode="derivative"):
    """Join :func:`classify` with the kernel probes and flag disagreement.

    Boundedness agrees when the criterion schedule and the lower-bound
    sequence receive the same diagnostic verdict.  Compactness agrees when
    "criterion vanishes" (p <= q: last shell supremum below the threshold;
    p > q: criterion finite) matches "probe decays" (see :func:`is_decaying`).
    """
    t0 = time.perf_counter()
    verdict = classify(g, pair, spec, thresholds, threads)
    rays = w_schedule(g, thresholds.w_gaps, spec.seed)
    crit = pair.p > pair.q
    lower = []
    per_ray = []
    for ray in rays:
        vals = probe_values(g, pair, ray, spec, None, crit, mode, thresholds.target_cut, threads)
        per_ray.append(vals)
    # the lower bound at each gap is the best over rays and kernel families
    lb_values = [max(max(v.values()) for v in col) for col in zip(*per_ray)]
    running = list(np.maximum.accumulate(lb_values))
    for k, gap in enumerate(thresholds.w_gaps):
        lower.append({
            "gap": gap,
            "value": lb_values[k],
            "bound": float(running[k]),
            "families": [{name: float(x) for name, x in ray[k].items()} for ray in per_ray],
        })
    lb_verdict, _ = diagnose(lb_values, growth=thresholds.growth)
    growth = (running[-1] / running[0]) if running[0] > 0 else (math.inf if running[-1] > 0 else 1.0)

    # normalized-kernel profile (standard family only) along the first ray
    fam = "K" if pair.p > 1 else "Kp"
    probe_vals = [v[fam] for v in per_ray[0]]
    probe = {
        "w": [_point_json(w) for w in rays[0]],
        "values": probe_vals,
        "decaying": is_decaying(probe_vals, thresholds),
    }

    if crit:
        sched = verdict.evidence["criterion_schedule"]
        crit_vanishing = sched["verdict"] == "FINITE"
    else:
        sched = verdict.evidence["seminorm"]
        dp = verdict.evidence.get("decay_profile")
        crit_vanishing = bool(dp is not None and dp["values"][-1] < thresholds.compact)
    bounded_agree = sched["verdict"] == lb_verdict
    compact_agree = crit_vanishing == probe["decaying"]
    status = "CONSISTENT" if bounded_agree and compact_agree else "INCONSISTENT"

    report = {
        "schema_version": SCHEMA_VERSION,
        "symbol_descriptor": symbol_descriptor if symbol_descriptor is not None else g.to_json(),
        "pair": pair.as_dict(),
        "branch": verdict.branch,
        "criterion_schedule": verdict.evidence.get("criterion_schedule"),
        "seminorm": verdict.evidence.get("seminorm"),
        "decay_profile": verdict.evidence.get("decay_profile"),
        "lower_bounds": {"verdict": lb_verdict, "growth": _json_float(growth), "points": lower},
        "probe_profile": probe,
        "classification": {
            "label": verdict.classification,
            "criterion_value": _value_json(verdict.criterion_value),
            "constancy_flag": verdict.constancy_flag,
            "gamma": verdict.evidence.get("gamma"),
        },
        "consistency": {
            "status": status,
            "boundedness_agrees": bounded_agree,
            "compactness_agrees": compact_agree,
            "criterion_verdict": sched["verdict"],
            "lower_bound_verdict": lb_verdict,
            "criterion_vanishing": crit_vanishing,
            "probe_decaying": probe["decaying"],
        },
        "thresholds": thresholds.as_dict(),
        "seed": spec.seed,
        "runtime_ms": None,
    }
    runtime = (time.perf_counter() - t0) * 1000.0
    return report, runtime


__all__ = [
    "Verdict",
    "Thresholds",
    "classify",
    "empirical_lower_bound",
    "compactness_probe",
    "kernel_norm_asymptotic",
    "pointwise_lower_bound_check",
    "consistency_report",
    "w_schedule",
    "worst_direction",
    "probe_values",
    "target_norm",
    "pmap",
]
