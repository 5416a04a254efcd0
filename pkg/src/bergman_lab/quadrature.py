"""Weighted volume integrals, Bergman norms and the boundedness functionals.

All integrals use unnormalized Lebesgue volume on B_n (the unit disc has
area pi; B_n has volume pi^n/n!).  Points are written z = r*zeta with
dv = r^{2n-1} dr dsigma(zeta), and the radial variable is integrated with
composite Gauss rules on panels graded geometrically toward the outer
radius.  For n = 1 the circle is integrated with the trapezoid rule, whose
node count grows near the boundary when the integrand has a kernel
singularity close to the sphere.  For n >= 2 each radial node gets its own
batch of uniform sphere samples (stratified Monte Carlo), and the standard
error is tracked.
"""

import math
from dataclasses import asdict, dataclass, replace

import numpy as np
from numpy.polynomial import legendre
from scipy import optimize, special

from .geometry import diagonal_direction, moebius_many, norm, sphere_sample

SCHEDULE = (0.9, 0.99, 0.999)


@dataclass(frozen=True)
class SpaceParams:
    """Parameters (n, p, alpha) of A^p_alpha."""

    n: int
    p: float
    alpha: float

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise ValueError(f"n must be a positive integer, got {self.n}")
        if not self.p > 0:
            raise ValueError(f"p must be > 0, got {self.p}")
        if not self.alpha > -1:
            raise ValueError(f"alpha must be > -1, got {self.alpha}")


@dataclass(frozen=True)
class PairParams:
    """Source A^p_alpha and target A^q_beta of T_g."""

    source: SpaceParams
    target: SpaceParams

    def __post_init__(self):
        if self.source.n != self.target.n:
            raise ValueError("source and target must share the dimension n")

    @classmethod
    def of(cls, n, p, q, alpha, beta):
        return cls(SpaceParams(n, p, alpha), SpaceParams(n, q, beta))

    n = property(lambda self: self.source.n)
    p = property(lambda self: self.source.p)
    q = property(lambda self: self.target.p)
    alpha = property(lambda self: self.source.alpha)
    beta = property(lambda self: self.target.alpha)

    def as_dict(self):
        return {"n": self.n, "p": self.p, "q": self.q, "alpha": self.alpha, "beta": self.beta}


@dataclass(frozen=True)
class QuadratureSpec:
    """Resolution knobs.

    ``r_max`` truncates the ball; ``r_max = 1`` integrates the full open
    ball (the last radial panel then carries the (1-r)^alpha weight in a
    Gauss-Jacobi rule).  ``radial_nodes`` is per panel, ``angular_nodes``
    the minimum ring size for n = 1, ``mc_samples`` the sphere batch per
    radial node for n >= 2.
    """

    r_max: float = 1.0
    radial_nodes: int = 16
    angular_nodes: int = 256
    mc_samples: int = 2048
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.r_max <= 1:
            raise ValueError(f"r_max must lie in (0, 1], got {self.r_max}")
        if min(self.radial_nodes, self.angular_nodes, self.mc_samples) < 8:
            raise ValueError("node counts must be >= 8")

    def refined(self, factor=2):
        return replace(
            self,
            radial_nodes=self.radial_nodes * factor,
            angular_nodes=self.angular_nodes * factor,
            mc_samples=self.mc_samples * factor,
        )

    def with_rmax(self, r_max):
        return replace(self, r_max=r_max)

    def as_dict(self):
        return asdict(self)


@dataclass
class QuadResult:
    value: float
    stderr: float = 0.0
    points: int = 0


def sphere_area(n):
    """Surface measure of the unit sphere in C^n = R^{2n}."""
    return 2 * math.pi**n / math.factorial(n - 1)


def ball_volume(n):
    return math.pi**n / math.factorial(n)


def _focus_radius(focus):
    return max((float(norm(np.asarray(p))) for p in focus), default=0.0)


def _radial_edges(r_max, rho):
    if r_max >= 1.0:
        s_stop = 0.1 * (1.0 - rho) if rho < 1.0 else 1e-8
        s_stop = max(min(s_stop, 0.1), 1e-12)
    else:
        s_stop = 1.0 - r_max
    edges = [0.0]
    s = 0.5
    while s > s_stop * 1.5:
        edges.append(1.0 - s)
        s *= 0.5
    edges.append(min(r_max, 1.0))
    return np.array(edges)


def radial_panels(n, alpha, spec, rho=0.0):
    """Yield (r_nodes, r_weights, r_hi) per radial panel.

    Weights include r^{2n-1} and (1-r^2)^alpha, so sum w * mean_sphere(F)
    times the sphere area is the weighted integral.
    """
    edges = _radial_edges(spec.r_max, rho)
    q = spec.radial_nodes
    x, wx = legendre.leggauss(q)
    for k in range(len(edges) - 1):
        a, b = edges[k], edges[k + 1]
        if spec.r_max >= 1.0 and k == len(edges) - 2:
            s = 1.0 - a
            xj, wj = special.roots_jacobi(q, alpha, 0.0)
            r = 1.0 - s * (1.0 - xj) / 2.0
            w = wj * (s / 2.0) ** (alpha + 1.0) * (1.0 + r) ** alpha * r ** (2 * n - 1)
        else:
            r = 0.5 * (b - a) * (x + 1.0) + a
            w = 0.5 * (b - a) * wx * (1.0 - r * r) ** alpha * r ** (2 * n - 1)
        yield r, w, b


def circle_rule(m0, r_hi, focus):
    """Nodes and weights (summing to 1) for the mean over the unit circle.

    Uniform trapezoid when every focus point is far from the ring of radius
    ``r_hi``; otherwise Gauss-Legendre panels graded geometrically toward the
    angle of each focus point whose gap 1 - r_hi*|p| is small.
    """
    close = []
    for p in focus:
        p = complex(np.asarray(p).ravel()[0])
        gap = 1.0 - r_hi * abs(p)
        if abs(p) > 0 and gap < 0.25:
            close.append((float(np.angle(p)), max(gap, 1e-13)))
    if not close:
        theta = 2 * np.pi * np.arange(m0) / m0
        return np.exp(1j * theta), np.full(m0, 1.0 / m0)
    base = close[0][0]
    cuts = set(np.linspace(0.0, 2 * np.pi, 17)[:-1])
    for ang, gap in close:
        off = (ang - base) % (2 * np.pi)
        width = np.pi
        while width > gap / 4:
            width /= 2
            cuts.add((off + width) % (2 * np.pi))
            cuts.add((off - width) % (2 * np.pi))
        cuts.add(off)
    cuts = np.array(sorted(cuts))
    cuts = np.concatenate([cuts, [cuts[0] + 2 * np.pi]])
    q = max(8, m0 // 16)
    x, wx = legendre.leggauss(q)
    a, b = cuts[:-1], cuts[1:]
    theta = (0.5 * (b - a)[:, None] * (x[None, :] + 1) + a[:, None]).ravel() + base
    wt = (0.5 * (b - a)[:, None] * wx[None, :]).ravel() / (2 * np.pi)
    return np.exp(1j * theta), wt


def weighted_integral(F, alpha, spec, focus=()):
    """int_{|z| <= r_max} F(z) (1-|z|^2)^alpha dv(z) with error estimate.

    ``F`` maps an (N, n) complex array to N real values.  ``focus`` lists the
    singular points of the integrand (kernel base points, possibly on the
    sphere); grids are refined toward them.
    """
    n = _dimension_of(F)
    focus = [np.asarray(p, dtype=complex) for p in focus]
    rho = _focus_radius(focus)
    rng = np.random.default_rng(spec.seed)
    total = 0.0
    var = 0.0
    points = 0
    area = sphere_area(n)
    for r, w, r_hi in radial_panels(n, alpha, spec, rho):
        if n == 1:
            ring, wr = circle_rule(spec.angular_nodes, r_hi, focus)
            Z = (r[:, None] * ring[None, :]).reshape(-1, 1)
            vals = np.asarray(F(Z), dtype=float).reshape(len(r), ring.size)
            _check_finite(vals)
            total += area * np.dot(w, vals @ wr)
        else:
            m = spec.mc_samples
            zeta = sphere_sample(n, len(r) * m, rng).reshape(len(r), m, n)
            Z = (r[:, None, None] * zeta).reshape(-1, n)
            vals = np.asarray(F(Z), dtype=float).reshape(len(r), m)
            _check_finite(vals)
            total += area * np.dot(w, vals.mean(axis=1))
            var += np.sum((area * w) ** 2 * vals.var(axis=1, ddof=1) / m)
        points += vals.size
    return QuadResult(float(total), float(math.sqrt(var)), points)


def integrate_weighted(F, alpha, spec, focus=()):
    """Value of :func:`weighted_integral`."""
    return weighted_integral(F, alpha, spec, focus).value


def _dimension_of(F):
    n = getattr(F, "n", None)
    if n is None:
        raise ValueError("integrand must carry its dimension as attribute .n")
    return n


def _check_finite(vals):
    if not np.all(np.isfinite(vals)):
        raise ValueError("integrand produced non-finite samples")


class Integrand:
    """Callable wrapper carrying the dimension; F(Z) = fn(Z)."""

    def __init__(self, n, fn):
        self.n = n
        self.fn = fn

    def __call__(self, Z):
        return self.fn(Z)


def abs_power(h, p):
    return Integrand(h.n, lambda Z: np.abs(h.evaluate(Z)) ** p)


# ---------------------------------------------------------------- schedules


@dataclass
class ScheduleResult:
    """Values of a truncated quantity along an r_max (or w) schedule."""

    schedule: list
    values: list
    verdict: str
    limit: float

    def as_dict(self):
        return {
            "schedule": list(self.schedule),
            "values": [_json_float(v) for v in self.values],
            "verdict": self.verdict,
            "limit": _json_float(self.limit),
        }


def _json_float(v):
    if v is None:
        return None
    v = float(v)
    return v if math.isfinite(v) else ("inf" if v > 0 else "nan")


def diagnose(values, growth=10.0, finite_ratio=0.3, divergent_ratio=0.6, rel_flat=1e-9):
    """Classify a nondecreasing sequence of truncated values.

    DIVERGENT when the last value exceeds ``growth`` times the first, or when
    the last increment is at least ``divergent_ratio`` times the previous one
    (slow, e.g. logarithmic, growth).  FINITE when the increments shrink by
    ``finite_ratio`` or better (geometric convergence), with the limit
    extrapolated by the geometric tail.  Otherwise INCONCLUSIVE.
    """
    v = np.maximum.accumulate(np.asarray(values, dtype=float))
    if not np.all(np.isfinite(v)):
        return "DIVERGENT", math.inf
    top = v[-1]
    if top <= 0:
        return "FINITE", 0.0
    if v[0] > 0 and top > growth * v[0]:
        return "DIVERGENT", math.inf
    if len(v) < 3:
        return "INCONCLUSIVE", top
    d1, d2 = v[-2] - v[-3], v[-1] - v[-2]
    if d2 <= rel_flat * top:
        return "FINITE", top
    if d1 <= 0:
        return "INCONCLUSIVE", top
    ratio = d2 / d1
    if ratio <= finite_ratio:
        return "FINITE", top + d2 * ratio / (1.0 - ratio)
    if ratio >= divergent_ratio:
        return "DIVERGENT", math.inf
    return "INCONCLUSIVE", top


def run_schedule(fn, schedule=SCHEDULE, **rules):
    values = [fn(r) for r in schedule]
    verdict, limit = diagnose(values, **rules)
    return ScheduleResult(list(schedule), values, verdict, limit)


# ---------------------------------------------------------------- norms


def bergman_norm(f, space, spec=QuadratureSpec(), extrapolate=False, schedule=SCHEDULE):
    """(int |f|^p (1-|z|^2)^alpha dv)^{1/p} over the ball truncated at spec.r_max.

    With ``extrapolate=True`` the integral is evaluated along ``schedule``
    and the geometric-tail limit is returned (``inf`` when divergent).
    """
    _check_space(f, space)
    if extrapolate:
        res = bergman_norm_schedule(f, space, spec, schedule)
        return res.limit ** (1.0 / space.p) if math.isfinite(res.limit) else math.inf
    val = integrate_weighted(abs_power(f, space.p), space.alpha, spec, f.singular_points())
    return val ** (1.0 / space.p)


def bergman_norm_schedule(f, space, spec=QuadratureSpec(), schedule=SCHEDULE):
    """p-th powers of the truncated norm along ``schedule``, diagnosed."""
    F = abs_power(f, space.p)
    return run_schedule(
        lambda r: integrate_weighted(F, space.alpha, spec.with_rmax(r), f.singular_points()),
        schedule,
    )


def equivalent_norm(f, space, spec=QuadratureSpec()):
    """|f(0)| + (int |Rf|^p (1-|z|^2)^{p+alpha} dv)^{1/p}."""
    _check_space(f, space)
    rf = f.radial_derivative()
    val = integrate_weighted(abs_power(rf, space.p), space.p + space.alpha, spec, rf.singular_points())
    return abs(f.value_at_zero()) + val ** (1.0 / space.p)


def _check_space(f, space):
    if f.n != space.n:
        raise ValueError(f"function lives in C^{f.n} but space has n={space.n}")


def monomial_norm_sq(k, alpha):
    """Closed form of ||z^k||^2 in A^2_alpha on the unit disc."""
    return math.pi * math.exp(
        math.lgamma(k + 1) + math.lgamma(alpha + 1) - math.lgamma(k + alpha + 2)
    )


# ---------------------------------------------------------------- criteria


def gamma_exponent(pair):
    """1 - (n+1+alpha)/p + (n+1+beta)/q."""
    n = pair.n
    return 1.0 - (n + 1 + pair.alpha) / pair.p + (n + 1 + pair.beta) / pair.q


def constancy_regime(pair):
    """Exponent regimes in which only constant symbols satisfy the criteria."""
    n, p, q, a, b = pair.n, pair.p, pair.q, pair.alpha, pair.beta
    if p > q:
        return (1 + a) / p - (1 + b) / q >= 1
    return (n + 1 + a) / p - (n + 1 + b) / q > 1


def _radial_grid(r_max, count, r_min=0.0):
    """Radii in [r_min, r_max]: half linear, half log-spaced in 1 - r."""
    lin = np.linspace(r_min, r_max, count // 2)
    s_hi = max(1.0 - r_min, 1e-15)
    s_lo = max(1.0 - r_max, 1e-15)
    logs = 1.0 - np.geomspace(s_hi, s_lo, count - count // 2)
    return np.unique(np.clip(np.concatenate([lin, logs, [r_max]]), r_min, r_max))


def _directions(g, n, count, rng):
    """Unit directions to scan: a uniform set plus the symbol's singular directions."""
    extra = [p / norm(p) for p in g.singular_points() if norm(p) > 0]
    extra.append(diagonal_direction(n))
    if n == 1:
        theta = 2 * np.pi * np.arange(count) / count
        base = np.exp(1j * theta)[:, None]
    else:
        base = sphere_sample(n, count, rng)
    if extra:
        base = np.vstack([base, np.array(extra, dtype=complex).reshape(-1, n)])
    return base


@dataclass
class SupResult:
    value: float
    argmax: np.ndarray


def weighted_sup(h, gamma, r_max, r_min=0.0, radial=512, angular=512, seed=0, refine=True):
    """sup of |h(z)| (1-|z|^2)^gamma over r_min <= |z| <= r_max."""
    n = h.n
    rng = np.random.default_rng(seed)
    if n > 1:
        radial = min(radial, 64)
        angular = max(angular, 4096)
    radii = _radial_grid(r_max, radial, r_min)
    dirs = _directions(h, n, angular, rng)
    best, arg = -1.0, None
    for r in radii:
        Z = r * dirs
        vals = np.abs(h.evaluate(Z)) * (1.0 - r * r) ** gamma
        i = int(np.argmax(vals))
        if vals[i] > best:
            best, arg = float(vals[i]), Z[i].copy()
    if refine and n == 1 and best > 0:
        best, arg = _refine_disc(h, gamma, arg, best, r_min, r_max)
    return SupResult(best, arg)


def _refine_disc(h, gamma, z0, best, r_min, r_max):
    def neg(x):
        r = float(np.clip(x[0], r_min, r_max))
        z = r * np.exp(1j * x[1])
        return -abs(h.evaluate(np.array([[z]]))[0]) * (1.0 - r * r) ** gamma

    x0 = [abs(z0[0]), float(np.angle(z0[0]))]
    res = optimize.minimize(neg, x0, method="Nelder-Mead", options={"xatol": 1e-12, "fatol": 1e-14})
    if -res.fun > best:
        r = float(np.clip(res.x[0], r_min, r_max))
        return float(-res.fun), np.array([r * np.exp(1j * res.x[1])])
    return best, z0


def bloch_seminorm(g, gamma, r_max=0.999, **grid):
    """sup_{|z| <= r_max} |Rg(z)| (1-|z|^2)^gamma and its argmax."""
    rg = g.radial_derivative()
    return weighted_sup(rg, gamma, r_max, **grid)


def bloch_schedule(g, gamma, schedule=SCHEDULE, **grid):
    return run_schedule(lambda r: bloch_seminorm(g, gamma, r, **grid).value, schedule)


@dataclass
class DecayProfile:
    radii: list
    values: list
    slope: float

    def as_dict(self):
        return {"radii": list(self.radii), "values": list(self.values), "slope": self.slope}


def decay_profile(g, gamma, shells, radial=64, angular=512, seed=0):
    """Shell suprema of |Rg|(1-|z|^2)^gamma over [r_k, r_{k+1}].

    ``slope`` is the least-squares slope of log(sup) against
    -log(1 - r_k): negative when the profile decays toward the sphere.
    """
    shells = list(shells)
    if any(b <= a for a, b in zip(shells, shells[1:])) or shells[0] <= 0 or shells[-1] >= 1:
        raise ValueError("shells must increase inside (0, 1)")
    rg = g.radial_derivative()
    vals = [
        weighted_sup(rg, gamma, b, r_min=a, radial=radial, angular=angular, seed=seed).value
        for a, b in zip(shells, shells[1:])
    ]
    x = -np.log(1.0 - np.array(shells[:-1]))
    pos = np.array(vals) > 0
    slope = float(np.polyfit(x[pos], np.log(np.array(vals)[pos]), 1)[0]) if pos.sum() >= 2 else 0.0
    return DecayProfile(shells[:-1], vals, slope)


def criterion_exponents(pair):
    """(power, weight exponent) of |Rg|^power (1-|z|^2)^weight in the p > q integral."""
    p, q = pair.p, pair.q
    e = p * q / (p - q)
    c = 1.0 - pair.alpha / p + pair.beta / q
    return e, c * e


def criterion_integral(g, pair, spec=QuadratureSpec(), schedule=SCHEDULE):
    """int (|Rg|(1-|z|^2)^{1-alpha/p+beta/q})^{pq/(p-q)} dv along an r_max schedule."""
    if not pair.p > pair.q:
        raise ValueError("criterion_integral is the p > q branch; got p <= q")
    rg = g.radial_derivative()
    e, weight = criterion_exponents(pair)
    F = abs_power(rg, e)
    focus = rg.singular_points()
    return run_schedule(
        lambda r: integrate_weighted(F, weight, spec.with_rmax(r), focus), schedule
    )


# ---------------------------------------------------------------- growth estimate


def metric_ball_integral(F, center, radius, alpha, spec=QuadratureSpec()):
    """int_{D(center, radius)} F(w) (1-|w|^2)^alpha dv(w).

    Pulled back by w = phi_a(u) to the Euclidean ball |u| < tanh(radius),
    with real Jacobian ((1-|a|^2)/|1-<u,a>|^2)^{n+1}.
    """
    a = np.asarray(center, dtype=complex)
    n = a.shape[0]
    aa = float(np.sum(np.abs(a) ** 2))

    def pulled(U):
        W = moebius_many(a, U)
        jac = ((1.0 - aa) / np.abs(1.0 - U @ np.conj(a)) ** 2) ** (n + 1)
        ww = np.sum(np.abs(W) ** 2, axis=1)
        return F(W) * jac * (1.0 - ww) ** alpha

    inner_spec = spec.with_rmax(float(np.tanh(radius)))
    return integrate_weighted(Integrand(n, pulled), 0.0, inner_spec)


def growth_check(f, space, r, sample, spec=QuadratureSpec(radial_nodes=24, angular_nodes=128)):
    """max over the sample of |f(z)|(1-|z|^2)^{(n+1+alpha)/p} / (int_{D(z,r)} |f|^p dv_alpha)^{1/p}."""
    if not r > 0:
        raise ValueError("metric radius must be positive")
    F = abs_power(f, space.p)
    worst = 0.0
    for z in sample:
        z = np.asarray(z, dtype=complex).reshape(space.n)
        local = metric_ball_integral(F, z, r, space.alpha, spec)
        if local <= 0:
            raise ValueError(f"empty metric-ball integral at {z}")
        zz = float(np.sum(np.abs(z) ** 2))
        lhs = abs(f(z)) * (1.0 - zz) ** ((space.n + 1 + space.alpha) / space.p)
        worst = max(worst, lhs / local ** (1.0 / space.p))
    return worst


def report_fragment(quantity, params, result, seed=None):
    """JSON-ready {quantity, params, r_max schedule, values, verdict, seed}."""
    frag = {"quantity": quantity, "params": params}
    if isinstance(result, ScheduleResult):
        d = result.as_dict()
        frag.update(
            {"r_max schedule": d["schedule"], "values": d["values"], "verdict": d["verdict"]}
        )
    else:
        frag.update({"r_max schedule": None, "values": [_json_float(result)], "verdict": None})
    frag["seed"] = seed
    return frag


__all__ = [
    "SpaceParams",
    "PairParams",
    "QuadratureSpec",
    "QuadResult",
    "ScheduleResult",
    "DecayProfile",
    "SupResult",
    "integrate_weighted",
    "weighted_integral",
    "bergman_norm",
    "bergman_norm_schedule",
    "equivalent_norm",
    "gamma_exponent",
    "constancy_regime",
    "bloch_seminorm",
    "bloch_schedule",
    "weighted_sup",
    "decay_profile",
    "criterion_integral",
    "criterion_exponents",
    "metric_ball_integral",
    "growth_check",
    "diagnose",
    "run_schedule",
    "monomial_norm_sq",
    "sphere_area",
    "ball_volume",
    "report_fragment",
]
