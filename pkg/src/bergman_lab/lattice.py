"""Bergman-metric lattices, atoms, and the Rademacher/Khinchine machinery."""

import bisect
import logging
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .geometry import bergman_distance, invariant_ball_sample, norm, one_minus_phi_sq
from .holo import HoloFunction, KernelTerm, Polynomial, _rows

log = logging.getLogger(__name__)


@dataclass
class Certificate:
    covering_ok: bool = False
    separation_ok: bool = False
    overlap_max: int = -1
    probes: int = 0
    seed: int = 0
    min_separation: float = float("nan")
    witness: list = None

    def as_dict(self):
        return asdict(self)


@dataclass
class Lattice:
    """Nodes z_j of a truncated ball with metric radius ``eta``."""

    eta: float
    r_max: float
    n: int
    nodes: np.ndarray
    density: int = 8
    cert: Certificate = field(default_factory=Certificate)

    def __len__(self):
        return self.nodes.shape[0]

    def to_json(self):
        return {
            "eta": self.eta,
            "r_max": self.r_max,
            "n": self.n,
            "density": self.density,
            "nodes": [[[float(c.real), float(c.imag)] for c in z] for z in self.nodes],
            "cert": self.cert.as_dict(),
        }

    @classmethod
    def from_json(cls, obj):
        nodes = np.array([[complex(a, b) for a, b in z] for z in obj["nodes"]], dtype=complex)
        cert = Certificate(**obj.get("cert", {}))
        return cls(obj["eta"], obj["r_max"], obj["n"], nodes, obj.get("density", 8), cert)


def hyperbolic_area(r_max):
    """Invariant area int_{|z|<r_max} (1-|z|^2)^{-2} dA of a disc."""
    return math.pi * r_max**2 / (1.0 - r_max**2)


def metric_disc_area(radius):
    """Invariant area of D(0, radius) in the disc: pi sinh^2(radius)."""
    return math.pi * math.sinh(radius) ** 2


def predicted_node_count(eta, r_max):
    """Hexagonal-packing estimate of a maximal eta/2-separated set in the disc.

    Small metric balls are nearly Euclidean in the metric |dz|/(1-|z|^2),
    where a hexagonal packing at spacing d has 2/(sqrt(3) d^2) points per
    unit area.
    """
    d = eta / 2.0
    return hyperbolic_area(r_max) * 2.0 / (math.sqrt(3.0) * d * d)


def _disc_candidates(eta, r_max, density):
    h = eta / density
    rho_max = math.atanh(r_max)
    steps = max(1, int(math.ceil(rho_max / h)))
    pts = [0j]
    for k in range(1, steps + 1):
        r = math.tanh(rho_max * k / steps)
        count = max(1, int(math.ceil(2 * math.pi * r / (1 - r * r) / h)))
        theta = 2 * math.pi * (np.arange(count) + 0.5 * (k % 2)) / count
        pts.extend(r * np.exp(1j * theta))
    return np.array(pts, dtype=complex)[:, None]


def _angle_window(r, t):
    """Half-width of the polar angle spanned by D(w, atanh t) for |w| >= r.

    D(w, atanh t) is the Euclidean disc with centre w(1-t^2)/(1-t^2|w|^2)
    and radius t(1-|w|^2)/(1-t^2|w|^2); the ratio radius/|centre| is
    largest at the smallest admissible |w|.
    """
    if r <= 0:
        return math.pi
    x = t * (1 - r * r) / (r * (1 - t * t))
    return math.pi if x >= 1 else math.asin(x)


class _DiscBuckets:
    """Kept nodes of the disc hashed by (hyperbolic-radius band, angle bucket)."""

    def __init__(self, sep):
        self.sep = sep
        self.t = math.tanh(sep)
        self.limit = 1.0 / math.cosh(sep) ** 2  # d < sep  <=>  1-|phi|^2 > limit
        self.cells = {}
        self.widths = {}

    def _width(self, band):
        if band not in self.widths:
            r = math.tanh(band * self.sep)
            win = _angle_window(r, self.t)
            self.widths[band] = (2 * math.pi) / max(1, int(2 * math.pi / win)) if win < math.pi else 2 * math.pi
        return self.widths[band]

    def _key(self, band, theta):
        width = self._width(band)
        count = max(1, int(round(2 * math.pi / width)))
        return int(theta / width) % count, count

    def add(self, z, rho):
        band = int(rho / self.sep)
        j, _ = self._key(band, math.atan2(z.imag, z.real) % (2 * math.pi))
        self.cells.setdefault((band, j), []).append(z)

    def blocked(self, z, rho):
        theta = math.atan2(z.imag, z.real) % (2 * math.pi)
        zz = 1.0 - abs(z) ** 2
        base = int(rho / self.sep)
        for band in (base - 1, base, base + 1):
            if band < 0:
                continue
            j, count = self._key(band, theta)
            for dj in {-1, 0, 1} if count > 2 else range(count):
                for w in self.cells.get((band, (j + dj) % count), ()):
                    s = zz * (1.0 - abs(w) ** 2) / abs(1.0 - z * w.conjugate()) ** 2
                    if s > self.limit:
                        return True
        return False


def build_lattice(eta=0.5, r_max=0.99, n=1, candidate_density=8, seed=0):
    """Greedy maximal eta/2-separated subset of a dense candidate set.

    Candidates sit on rings equispaced in hyperbolic radius (n = 1) or are
    drawn from the invariant measure (n >= 2).  The origin is taken first,
    then candidates are scanned from the boundary inward; each is kept when
    it is at least eta/2 from every kept node.  Every candidate therefore
    ends within eta/2 of a node.
    """
    if not 0 < eta <= 1:
        raise ValueError(f"eta must lie in (0, 1], got {eta}")
    if not 0 < r_max < 1:
        raise ValueError(f"r_max must lie in (0, 1), got {r_max}")
    if n == 1:
        cand = _disc_candidates(eta, r_max, candidate_density)
    else:
        rng = np.random.default_rng(seed)
        count = int(candidate_density * 2000)
        cand = np.vstack([np.zeros((1, n), complex), invariant_ball_sample(n, r_max, count, rng)])
    rho = np.arctanh(np.minimum(norm(cand), 1 - 1e-16))
    order = np.concatenate([[0], 1 + np.argsort(-rho[1:], kind="stable")])
    sep = eta / 2.0
    nodes = _greedy_disc(cand, rho, order, sep) if n == 1 else _greedy_ball(cand, rho, order, sep)
    if len(cand) < 4 * len(nodes):
        log.warning("candidate set is sparse (%d candidates for %d nodes)", len(cand), len(nodes))
    return Lattice(eta, r_max, n, nodes, candidate_density)


def _greedy_disc(cand, rho, order, sep):
    buckets = _DiscBuckets(sep)
    kept = []
    zs = cand[:, 0].tolist()
    rs = rho.tolist()
    for idx in order:
        z, r = zs[idx], rs[idx]
        if kept and buckets.blocked(z, r):
            continue
        kept.append(z)
        buckets.add(z, r)
    return np.array(kept, dtype=complex)[:, None]


def _greedy_ball(cand, rho, order, sep):
    n = cand.shape[1]
    kept = np.empty((len(cand), n), dtype=complex)
    kept_rho = []  # negated, nondecreasing, for bisect
    count = 0
    for idx in order:
        z, r = cand[idx], rho[idx]
        if count == 0:
            kept[0] = z
            count = 1
            continue
        if bergman_distance(kept[0], z) < sep:
            continue
        # nodes after the first were accepted in nonincreasing rho
        lo = bisect.bisect_left(kept_rho, -(r + sep))
        block = kept[1 + lo : count]
        if block.size and np.min(bergman_distance(block, z)) < sep:
            continue
        kept[count] = z
        kept_rho.append(-r)
        count += 1
    return kept[:count].copy()


def _banded_distances(points, nodes, rho_p, rho_n, band, reducer, chunk=1024, metric=None, fill=np.inf):
    """Apply ``reducer(matrix)`` per chunk of points, only against nodes whose
    hyperbolic radius is within ``band`` of the chunk's range.  The matrix
    holds ``metric(point, node)`` (Bergman distance by default), or
    ``fill`` when no node is in range."""
    metric = metric or bergman_distance
    order = np.argsort(rho_n)
    nodes_sorted = nodes[order]
    rho_sorted = rho_n[order]
    porder = np.argsort(rho_p)
    out = [None] * len(points)
    for start in range(0, len(points), chunk):
        idx = porder[start : start + chunk]
        lo = np.searchsorted(rho_sorted, rho_p[idx].min() - band, "left")
        hi = np.searchsorted(rho_sorted, rho_p[idx].max() + band, "right")
        block = nodes_sorted[lo:hi]
        if block.shape[0] == 0:
            d = np.full((len(idx), 1), fill)
        else:
            d = metric(points[idx][:, None, :], block[None, :, :])
        for i, v in zip(idx, reducer(d)):
            out[i] = v
    return out


def verify_lattice(lat, probe_count=100_000, seed=0):
    """Probabilistic certificate for covering, disjointness and overlap.

    Probes are drawn from the invariant measure on |z| <= r_max.  Covering:
    each probe is within eta of a node.  Separation: node pairs are at least
    eta/2 apart (checked exhaustively) and no probe is within eta/4 of two
    nodes.  overlap_max: the largest number of 2*eta balls holding a probe.
    """
    eta = lat.eta
    rng = np.random.default_rng(seed)
    probes = invariant_ball_sample(lat.n, lat.r_max, probe_count, rng)
    rho_p = np.arctanh(norm(probes))
    rho_n = np.arctanh(np.minimum(norm(lat.nodes), 1 - 1e-16))

    # d(z, w) < r  <=>  1 - |phi_w(z)|^2 > sech(r)^2, which avoids logarithms
    def sech2(r):
        return 1.0 / math.cosh(r) ** 2

    def stats(s):
        return np.stack(
            [s.max(axis=1), (s > sech2(eta / 4)).sum(axis=1), (s > sech2(2 * eta)).sum(axis=1)],
            axis=1,
        )

    rows = np.array(
        _banded_distances(probes, lat.nodes, rho_p, rho_n, 2 * eta, stats, metric=one_minus_phi_sq, fill=0.0)
    )
    nearest = np.arccosh(1.0 / np.sqrt(np.maximum(rows[:, 0], 1e-300)))
    quarter, overlap = rows[:, 1], rows[:, 2]
    cover_ok = bool(np.all(nearest < eta))
    witness = None
    if not cover_ok:
        w = probes[int(np.argmax(nearest))]
        witness = [[float(c.real), float(c.imag)] for c in w]

    min_sep = node_min_separation(lat)
    sep_ok = bool(min_sep >= eta / 2) and bool(np.all(quarter <= 1))
    lat.cert = Certificate(
        covering_ok=cover_ok,
        separation_ok=sep_ok,
        overlap_max=int(overlap.max()),
        probes=int(probe_count),
        seed=int(seed),
        min_separation=float(min_sep),
        witness=witness,
    )
    return lat.cert


def node_min_separation(lat, chunk=2048):
    """Smallest pairwise Bergman distance between distinct nodes (exhaustive,
    pruned by hyperbolic radius)."""
    nodes = lat.nodes
    if len(nodes) < 2:
        return math.inf
    rho = np.arctanh(np.minimum(norm(nodes), 1 - 1e-16))
    order = np.argsort(rho)
    nodes, rho = nodes[order], rho[order]
    best = math.inf
    band = lat.eta
    for start in range(0, len(nodes), chunk):
        stop = min(start + chunk, len(nodes))
        hi = np.searchsorted(rho, rho[stop - 1] + band, "right")
        d = bergman_distance(nodes[start:stop][:, None, :], nodes[start:hi][None, :, :])
        # keep pairs (i, j) with j > i only; this also drops the diagonal
        i = np.arange(start, stop)[:, None]
        j = np.arange(start, hi)[None, :]
        d = np.where(j > i, d, np.inf)
        best = min(best, float(d.min()))
    return best


# ---------------------------------------------------------------- atoms


def atom_exponent_bound(space):
    """n max{1, 1/p} + (1+alpha)/p; admissible b must exceed it."""
    return space.n * max(1.0, 1.0 / space.p) + (1.0 + space.alpha) / space.p


def default_b(space):
    return math.ceil(atom_exponent_bound(space)) + 1


def _check_b(b, space):
    bound = atom_exponent_bound(space)
    if not b > bound:
        raise ValueError(f"atom exponent b={b} must exceed {bound}")


def atom(zj, b, space):
    """(1-|z_j|^2)^{(pb-n-1-alpha)/p} (1 - <z, z_j>)^{-b}."""
    _check_b(b, space)
    zj = np.asarray(zj, dtype=complex).reshape(space.n)
    scale = (1.0 - float(np.sum(np.abs(zj) ** 2))) ** (
        (space.p * b - space.n - 1 - space.alpha) / space.p
    )
    return KernelTerm(zj, b, 0, scale)


class AtomSum(HoloFunction):
    """sum_j c_j atom(z_j), evaluated as one matrix product."""

    def __init__(self, coeffs, nodes, b, space):
        _check_b(b, space)
        self.n = space.n
        self.space = space
        self.b = float(b)
        self.nodes = np.asarray(nodes, dtype=complex).reshape(-1, space.n)
        self.c = np.asarray(coeffs, dtype=complex).ravel()
        if self.c.size != self.nodes.shape[0]:
            raise ValueError(f"{self.c.size} coefficients for {self.nodes.shape[0]} nodes")
        nn = np.sum(np.abs(self.nodes) ** 2, axis=1)
        expo = (space.p * b - space.n - 1 - space.alpha) / space.p
        self.weights = self.c * (1.0 - nn) ** expo

    def evaluate(self, Z, chunk=4096):
        Z = _rows(Z, self.n)
        out = np.empty(Z.shape[0], dtype=complex)
        conj = np.conj(self.nodes).T
        for s in range(0, Z.shape[0], chunk):
            u = Z[s : s + chunk] @ conj
            out[s : s + chunk] = ((1.0 - u) ** (-self.b)) @ self.weights
        return out

    def terms(self):
        return [atom(z, self.b, self.space).scale(c) for z, c in zip(self.nodes, self.c)]

    def radial_derivative(self):
        out = None
        for t in self.terms():
            rt = t.radial_derivative()
            out = rt if out is None else out + rt
        return out if out is not None else Polynomial(self.n)

    def scale(self, c):
        return AtomSum(self.c * c, self.nodes, self.b, self.space)

    def singular_points(self):
        return [z for z, c in zip(self.nodes, self.c) if c != 0 and np.any(z)]

    def to_polynomial(self, degree):
        out = Polynomial(self.n)
        for t in self.terms():
            out = out + t.to_polynomial(degree)
        return out

    def to_json(self):
        return {"type": "sum", "terms": [t.to_json() for t in self.terms()]}


def synthesize(coeffs, lat, b, space):
    """f = sum_j c_j atom(z_j, b) over the lattice nodes."""
    if space.n != lat.n:
        raise ValueError("lattice and space dimensions differ")
    return AtomSum(coeffs, lat.nodes, b, space)


def lp_norm(c, p):
    c = np.abs(np.asarray(c, dtype=complex))
    return float(np.sum(c**p) ** (1.0 / p))


# ---------------------------------------------------------------- Rademacher


def rademacher(j, t):
    """r_j(t) = r_0(2^j t), r_0 = +1 on [0, 1/2) and -1 on [1/2, 1) (period 1)."""
    if j < 0:
        raise ValueError("j must be nonnegative")
    frac = (math.ldexp(t, j)) % 1.0
    return 1 if frac < 0.5 else -1


def rademacher_matrix(m, t):
    """Array r[j-1, i] = r_j(t_i) for j = 1..m."""
    t = np.asarray(t, dtype=float)
    j = np.arange(1, m + 1)[:, None]
    frac = np.mod(np.ldexp(t[None, :], j), 1.0)
    return np.where(frac < 0.5, 1, -1)


@dataclass
class KhinchineResult:
    value: float
    stderr: float
    exact: bool


def khinchine_estimate(c, p, max_exact=24, mc_samples=200_000, seed=0):
    """int_0^1 |sum_{j=1}^m c_j r_j(t)|^p dt.

    On each dyadic interval of length 2^{-(m+1)} the vector (r_1, ..., r_m)
    is constant and every sign pattern occurs on the same total length, so
    the integral is the mean of |sum eps_j c_j|^p over all 2^m sign vectors.
    Beyond ``max_exact`` terms a Monte Carlo mean over random signs is used.
    """
    c = np.asarray(c, dtype=complex).ravel()
    m = c.size
    if m == 0:
        return KhinchineResult(0.0, 0.0, True)
    if m > max_exact:
        rng = np.random.default_rng(seed)
        eps = rng.choice([-1.0, 1.0], size=(mc_samples, m))
        vals = np.abs(eps @ c) ** p
        return KhinchineResult(float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(mc_samples)), False)
    # |S| is invariant under a global sign flip, so eps_1 = +1 suffices
    inner_m = min(m - 1, 16)
    inner = np.array([c[0]], dtype=complex)
    for cj in c[1 : 1 + inner_m]:
        inner = np.concatenate([inner + cj, inner - cj])
    outer = c[1 + inner_m :]
    total = 0.0
    for k in range(2 ** outer.size):
        shift = sum((cj if (k >> i) & 1 == 0 else -cj) for i, cj in enumerate(outer))
        total += float(np.sum(np.abs(inner + shift) ** p))
    return KhinchineResult(total / 2 ** (m - 1), 0.0, True)


def khinchine_integral(c, p, **kw):
    res = khinchine_estimate(c, p, **kw)
    if not res.exact:
        log.info("Khinchine integral by Monte Carlo: %.6g +- %.2g", res.value, res.stderr)
    return res.value


def khinchine_ratio(c, p):
    """(int |sum c_j r_j|^p)^{1/p} / ||c||_2."""
    l2 = float(np.sqrt(np.sum(np.abs(np.asarray(c)) ** 2)))
    return khinchine_integral(c, p) ** (1.0 / p) / l2
