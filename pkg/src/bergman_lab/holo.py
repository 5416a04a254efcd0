"""Holomorphic functions on B_n with exact radial derivatives.

Every class here is closed under the radial derivative
``R h(z) = sum_j z_j dh/dz_j``:

* :class:`Polynomial` -- sparse map multi-index -> coefficient; R multiplies
  each monomial by its total degree.
* :class:`KernelTerm` -- ``c <z,w>^j (1 - <z,w>)^{-s}``.  With ``j = 0``
  this is the power kernel; R maps it into a sum of two kernel terms.
* :class:`LogKernel` -- ``-c log(1 - <z,b>)``, with R giving the kernel
  term ``c <z,b> (1 - <z,b>)^{-1}``.  ``b`` may lie on the sphere.
* :class:`Sum`, :class:`Product` -- finite combinations.
* :class:`TgFunction` -- ``T_g f`` evaluated by quadrature in t.
"""

import math
import numpy as np
from numpy.polynomial import legendre

from .geometry import as_direction, as_point, norm


def _rows(Z, n):
    Z = np.asarray(Z, dtype=complex)
    if Z.ndim == 1:
        Z = Z[None, :]
    if Z.shape[-1] != n:
        raise ValueError(f"expected points in C^{n}, got last axis {Z.shape[-1]}")
    return Z


class HoloFunction:
    """Base class; subclasses implement ``evaluate`` and ``radial_derivative``."""

    n = 1

    def evaluate(self, Z):
        raise NotImplementedError

    def radial_derivative(self):
        raise NotImplementedError

    def scale(self, c):
        raise NotImplementedError

    def singular_points(self):
        """Base points of kernel factors; used to focus quadrature grids."""
        return []

    def to_polynomial(self, degree):
        """Taylor polynomial of total degree <= ``degree``."""
        raise NotImplementedError

    def to_json(self):
        raise NotImplementedError

    def __call__(self, Z):
        Z = np.asarray(Z, dtype=complex)
        out = self.evaluate(_rows(Z, self.n))
        return out[0] if Z.ndim == 1 else out

    def value_at_zero(self):
        return complex(self.evaluate(np.zeros((1, self.n), dtype=complex))[0])

    def focus_radius(self):
        pts = self.singular_points()
        return max((float(norm(p)) for p in pts), default=0.0)

    def __add__(self, other):
        if isinstance(other, (int, float, complex)):
            other = Polynomial.constant(self.n, other)
        return Sum([self, other])

    __radd__ = __add__

    def __neg__(self):
        return self.scale(-1.0)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, (int, float, complex)):
            return self.scale(other)
        return Product([self, other])

    __rmul__ = __mul__


class Polynomial(HoloFunction):
    """Sparse polynomial in z_1, ..., z_n.

    >>> p = Polynomial(2, {(2, 1): 1.0})
    >>> p.radial_derivative().coeffs
    {(2, 1): 3.0}
    """

    def __init__(self, n, coeffs=None):
        self.n = int(n)
        self.coeffs = {}
        for k, c in (coeffs or {}).items():
            k = tuple(int(e) for e in k)
            if len(k) != self.n or min(k) < 0:
                raise ValueError(f"bad multi-index {k} for n={self.n}")
            if c != 0:
                self.coeffs[k] = self.coeffs.get(k, 0) + c
        self.coeffs = {k: c for k, c in self.coeffs.items() if c != 0}

    @classmethod
    def constant(cls, n, c):
        return cls(n, {(0,) * n: c})

    @classmethod
    def variable(cls, n, i):
        e = [0] * n
        e[i] = 1
        return cls(n, {tuple(e): 1.0})

    @classmethod
    def from_dense(cls, coeffs):
        """One-variable polynomial from a coefficient list a_0, a_1, ..."""
        return cls(1, {(k,): c for k, c in enumerate(coeffs)})

    @property
    def degree(self):
        return max((sum(k) for k in self.coeffs), default=0)

    def coefficient(self, exponents):
        return self.coeffs.get(tuple(exponents), 0.0)

    def dense(self, length=None):
        """Coefficient vector for n = 1."""
        if self.n != 1:
            raise ValueError("dense coefficients only for n = 1")
        length = self.degree + 1 if length is None else length
        out = np.zeros(length, dtype=complex)
        for (k,), c in self.coeffs.items():
            if k < length:
                out[k] = c
        return out

    def homogeneous_part(self, k):
        return Polynomial(self.n, {e: c for e, c in self.coeffs.items() if sum(e) == k})

    def truncate(self, degree):
        return Polynomial(self.n, {e: c for e, c in self.coeffs.items() if sum(e) <= degree})

    def is_constant(self):
        return all(sum(e) == 0 for e in self.coeffs)

    def evaluate(self, Z):
        Z = _rows(Z, self.n)
        if not self.coeffs:
            return np.zeros(Z.shape[0], dtype=complex)
        if self.n == 1:
            return horner(self.dense(), Z[:, 0])
        maxdeg = [max(e[i] for e in self.coeffs) for i in range(self.n)]
        powers = []
        for i in range(self.n):
            table = np.ones((maxdeg[i] + 1, Z.shape[0]), dtype=complex)
            for e in range(1, maxdeg[i] + 1):
                table[e] = table[e - 1] * Z[:, i]
            powers.append(table)
        out = np.zeros(Z.shape[0], dtype=complex)
        for e, c in self.coeffs.items():
            term = np.full(Z.shape[0], c, dtype=complex)
            for i, ei in enumerate(e):
                if ei:
                    term = term * powers[i][ei]
            out += term
        return out

    def radial_derivative(self):
        return Polynomial(self.n, {e: sum(e) * c for e, c in self.coeffs.items() if sum(e)})

    def scale(self, c):
        return Polynomial(self.n, {e: c * v for e, v in self.coeffs.items()})

    def to_polynomial(self, degree):
        return self.truncate(degree)

    def __add__(self, other):
        if isinstance(other, (int, float, complex)):
            other = Polynomial.constant(self.n, other)
        if isinstance(other, Polynomial):
            _same_dim(self, other)
            out = dict(self.coeffs)
            for e, c in other.coeffs.items():
                out[e] = out.get(e, 0) + c
            return Polynomial(self.n, out)
        return Sum([self, other])

    __radd__ = __add__

    def __mul__(self, other):
        if isinstance(other, (int, float, complex)):
            return self.scale(other)
        if isinstance(other, Polynomial):
            _same_dim(self, other)
            acc = {}
            for a, ca in self.coeffs.items():
                for b, cb in other.coeffs.items():
                    m = tuple(x + y for x, y in zip(a, b))
                    acc.setdefault(m, []).append(ca * cb)
            return Polynomial(self.n, _exact_sums(acc))
        return Product([self, other])

    __rmul__ = __mul__

    def max_coefficient_difference(self, other):
        keys = set(self.coeffs) | set(other.coeffs)
        return max((abs(self.coefficient(k) - other.coefficient(k)) for k in keys), default=0.0)

    def to_json(self):
        return {"type": "polynomial", "n": self.n, "terms": polynomial_terms_json(self)}

    def __repr__(self):
        terms = " + ".join(f"({c})*z^{list(e)}" for e, c in sorted(self.coeffs.items()))
        return f"Polynomial(n={self.n}: {terms or '0'})"


def _exact_sums(acc):
    """Correctly rounded sums of the complex term lists in ``acc``."""
    out = {}
    for m, terms in acc.items():
        if len(terms) == 1:
            out[m] = terms[0]
        else:
            out[m] = complex(math.fsum(t.real for t in terms), math.fsum(t.imag for t in terms))
    return out


def horner(coeffs, z):
    """Horner evaluation of sum_k coeffs[k] z^k."""
    out = np.zeros_like(z, dtype=complex)
    for c in coeffs[::-1]:
        out = out * z + c
    return out


def polynomial_terms_json(p):
    return [
        {"exponents": list(e), "re": float(np.real(c)), "im": float(np.imag(c))}
        for e, c in sorted(p.coeffs.items())
    ]


def _same_dim(a, b):
    if a.n != b.n:
        raise ValueError(f"dimension mismatch: {a.n} vs {b.n}")


def _inner_power_expansion(w, m):
    """Coefficients of <z,w>^m = (sum_i z_i conj(w_i))^m as {multi-index: coeff}."""
    n = len(w)
    wc = np.conj(w)
    out = {}
    for e in _compositions(m, n):
        c = math.factorial(m)
        val = 1.0 + 0j
        for i, ei in enumerate(e):
            c //= math.factorial(ei)
            val *= wc[i] ** ei
        if val != 0:
            out[e] = c * val
    return out


def _compositions(m, n):
    if n == 1:
        yield (m,)
        return
    for first in range(m, -1, -1):
        for rest in _compositions(m - first, n - 1):
            yield (first,) + rest


class KernelTerm(HoloFunction):
    """``coef * <z,w>^j * (1 - <z,w>)^{-s}`` (principal branch)."""

    def __init__(self, w, s, j=0, coef=1.0):
        self.w = as_direction(w)
        self.n = self.w.shape[0]
        if s < 0:
            raise ValueError("kernel exponent s must be nonnegative")
        self.s = float(s)
        self.j = int(j)
        self.coef = complex(coef)

    def evaluate(self, Z):
        Z = _rows(Z, self.n)
        u = Z @ np.conj(self.w)
        out = self.coef * (1.0 - u) ** (-self.s)
        if self.j:
            out = out * u**self.j
        return out

    def radial_derivative(self):
        terms = []
        if self.j:
            terms.append(KernelTerm(self.w, self.s, self.j, self.coef * self.j))
        if self.s:
            terms.append(KernelTerm(self.w, self.s + 1, self.j + 1, self.coef * self.s))
        if not terms or not np.any(self.w):
            return Polynomial(self.n)
        return terms[0] if len(terms) == 1 else Sum(terms)

    def scale(self, c):
        return KernelTerm(self.w, self.s, self.j, self.coef * c)

    def singular_points(self):
        return [self.w] if np.any(self.w) and self.s > 0 else []

    def to_polynomial(self, degree):
        out = {}
        ck = 1.0
        for k in range(0, degree - self.j + 1):
            for e, c in _inner_power_expansion(self.w, self.j + k).items():
                out[e] = out.get(e, 0) + self.coef * ck * c
            ck *= (self.s + k) / (k + 1)
        return Polynomial(self.n, out)

    def to_json(self):
        return {
            "type": "power",
            "w": _vec_json(self.w),
            "s": self.s,
            "j": self.j,
            "coef": [self.coef.real, self.coef.imag],
        }

    def __repr__(self):
        return f"KernelTerm(w={self.w}, s={self.s}, j={self.j}, coef={self.coef})"


def PowerKernel(w, s, coef=1.0):
    """(1 - <z,w>)^{-s} times ``coef``."""
    if s <= 0:
        raise ValueError("power kernel needs s > 0")
    return KernelTerm(w, s, 0, coef)


class LogKernel(HoloFunction):
    """``-coef * log(1 - <z,b>)`` with |b| <= 1 (see :func:`cesaro_symbol`)."""

    def __init__(self, b, coef=1.0):
        b = as_direction(b)
        self.b = b
        self.n = b.shape[0]
        self.coef = complex(coef)

    def evaluate(self, Z):
        Z = _rows(Z, self.n)
        u = Z @ np.conj(self.b)
        if np.any(np.abs(1.0 - u) == 0):
            raise ValueError("log kernel evaluated at its singular point")
        return -self.coef * np.log(1.0 - u)

    def radial_derivative(self):
        if not np.any(self.b):
            return Polynomial(self.n)
        return KernelTerm(self.b, 1.0, 1, self.coef)

    def scale(self, c):
        return LogKernel(self.b, self.coef * c)

    def singular_points(self):
        return [self.b] if np.any(self.b) else []

    def focus_radius(self):
        return min(1.0, float(norm(self.b))) if np.any(self.b) else 0.0

    def to_polynomial(self, degree):
        out = {}
        for k in range(1, degree + 1):
            for e, c in _inner_power_expansion(self.b, k).items():
                out[e] = out.get(e, 0) + self.coef * c / k
        return Polynomial(self.n, out)

    def to_json(self):
        return {"type": "log", "b": _vec_json(self.b), "coef": [self.coef.real, self.coef.imag]}

    def __repr__(self):
        return f"LogKernel(b={self.b}, coef={self.coef})"


def cesaro_symbol(n):
    """g(z) = -log(1 - <z, b>) with b = (1, ..., 1)/sqrt(n).

    For n = 1 this is -log(1 - z).  For n > 1 the unnormalized vector
    (1, ..., 1) would put the singular set {<z, 1> = 1} inside the ball
    (it contains (1/n, ..., 1/n)), so the unit vector in that direction is
    used instead.
    """
    return LogKernel(np.full(n, 1.0 / math.sqrt(n), dtype=complex))


class Sum(HoloFunction):
    def __init__(self, terms):
        flat = []
        for t in terms:
            flat.extend(t.terms if isinstance(t, Sum) else [t])
        if not flat:
            raise ValueError("empty sum")
        dims = {t.n for t in flat}
        if len(dims) != 1:
            raise ValueError(f"dimension mismatch in sum: {sorted(dims)}")
        self.n = flat[0].n
        polys = [t for t in flat if isinstance(t, Polynomial)]
        rest = [t for t in flat if not isinstance(t, Polynomial)]
        if len(polys) > 1:
            merged = polys[0]
            for p in polys[1:]:
                merged = merged + p
            polys = [merged]
        self.terms = polys + rest

    def evaluate(self, Z):
        Z = _rows(Z, self.n)
        out = np.zeros(Z.shape[0], dtype=complex)
        for t in self.terms:
            out += t.evaluate(Z)
        return out

    def radial_derivative(self):
        return _simplify_sum(self.n, [t.radial_derivative() for t in self.terms])

    def scale(self, c):
        return Sum([t.scale(c) for t in self.terms])

    def singular_points(self):
        return [p for t in self.terms for p in t.singular_points()]

    def focus_radius(self):
        return max(t.focus_radius() for t in self.terms)

    def to_polynomial(self, degree):
        out = Polynomial(self.n)
        for t in self.terms:
            out = out + t.to_polynomial(degree)
        return out

    def to_json(self):
        return {"type": "sum", "terms": [t.to_json() for t in self.terms]}


def _simplify_sum(n, terms):
    terms = [t for t in terms if not (isinstance(t, Polynomial) and not t.coeffs)]
    if not terms:
        return Polynomial(n)
    return terms[0] if len(terms) == 1 else Sum(terms)


class Product(HoloFunction):
    def __init__(self, factors):
        if len(factors) < 2:
            raise ValueError("a product needs at least two factors")
        dims = {f.n for f in factors}
        if len(dims) != 1:
            raise ValueError(f"dimension mismatch in product: {sorted(dims)}")
        self.n = factors[0].n
        self.factors = list(factors)

    def evaluate(self, Z):
        Z = _rows(Z, self.n)
        out = self.factors[0].evaluate(Z)
        for f in self.factors[1:]:
            out = out * f.evaluate(Z)
        return out

    def radial_derivative(self):
        terms = []
        for i, f in enumerate(self.factors):
            rf = f.radial_derivative()
            if isinstance(rf, Polynomial) and not rf.coeffs:
                continue
            others = self.factors[:i] + self.factors[i + 1 :]
            terms.append(Product([rf] + others))
        if not terms:
            return Polynomial(self.n)
        return terms[0] if len(terms) == 1 else Sum(terms)

    def scale(self, c):
        return Product([self.factors[0].scale(c)] + self.factors[1:])

    def singular_points(self):
        return [p for f in self.factors for p in f.singular_points()]

    def focus_radius(self):
        return max(f.focus_radius() for f in self.factors)

    def to_polynomial(self, degree):
        out = self.factors[0].to_polynomial(degree)
        for f in self.factors[1:]:
            out = (out * f.to_polynomial(degree)).truncate(degree)
        return out

    def to_json(self):
        return {"type": "product", "factors": [f.to_json() for f in self.factors]}


def radial_derivative(h):
    """R h = sum_j z_j dh/dz_j, in closed form."""
    return h.radial_derivative()


def is_constant(h, rng=None, samples=64):
    """Whether R h vanishes identically.

    Exact for polynomials; otherwise R h is sampled on random interior points.
    """
    rh = h.radial_derivative()
    if isinstance(rh, Polynomial):
        return not rh.coeffs
    rng = np.random.default_rng(12345) if rng is None else rng
    g = rng.standard_normal((samples, h.n)) + 1j * rng.standard_normal((samples, h.n))
    Z = 0.5 * rng.random((samples, 1)) * g / norm(g)[:, None]
    return bool(np.max(np.abs(rh.evaluate(Z))) < 1e-13)


# ---------------------------------------------------------------- T_g


def apply_tg(f, g, mode="exact", degree=None, **quad_opts):
    """The Riemann-Stieltjes operator T_g f(z) = int_0^1 f(tz) Rg(tz) dt/t.

    ``mode="exact"`` works on polynomials and returns a :class:`Polynomial`.
    A homogeneous piece of degree k of f*Rg integrates to itself over k, so
    the coefficient of z^m is sum_{a+b=m} f_a g_b |b|/|m|.  Closed-form inputs
    are first expanded to Taylor polynomials of total degree ``degree``; the
    result is then truncated to that degree, where it is exact.

    ``mode="quadrature"`` returns a :class:`TgFunction` evaluated pointwise
    by Gauss-Legendre in t.
    """
    if f.n != g.n:
        raise ValueError(f"dimension mismatch: {f.n} vs {g.n}")
    if mode == "quadrature":
        return TgFunction(f, g, **quad_opts)
    if mode != "exact":
        raise ValueError(f"unknown mode {mode!r}")
    truncated = False
    if not isinstance(f, Polynomial):
        if degree is None:
            raise TypeError("exact T_g needs polynomial f (or a truncation degree)")
        f, truncated = f.to_polynomial(degree), True
    if not isinstance(g, Polynomial):
        if degree is None:
            raise TypeError("exact T_g needs polynomial g (or a truncation degree)")
        g, truncated = g.to_polynomial(degree), True
    acc = {}
    for b, cb in g.coeffs.items():
        kb = sum(b)
        if kb == 0:
            continue
        for a, ca in f.coeffs.items():
            m = tuple(x + y for x, y in zip(a, b))
            acc.setdefault(m, []).append(ca * cb * (kb / (kb + sum(a))))
    result = Polynomial(f.n, _exact_sums(acc))
    return result.truncate(degree) if truncated else result


class TgFunction(HoloFunction):
    """T_g f evaluated by composite Gauss-Legendre quadrature in t.

    Panels are graded geometrically toward t = 1, finer when f or g has a
    kernel singularity near the evaluation ray; the per-panel node count is
    doubled until two successive answers differ by less than ``tol``.
    """

    def __init__(self, f, g, nodes=64, tol=1e-10, max_nodes=1024, chunk=2048):
        if f.n != g.n:
            raise ValueError("dimension mismatch")
        self.n = f.n
        self.f = f
        self.g = g
        self.rg = g.radial_derivative()
        self.nodes = int(nodes)
        self.tol = tol
        self.max_nodes = max_nodes
        self.chunk = chunk
        self.last_nodes_used = None

    def _panels(self, rmax):
        rho = self.f.focus_radius()
        rho = max(rho, self.g.focus_radius())
        gap = max(1.0 - rho * rmax, 1e-14)
        depth = int(np.clip(np.ceil(np.log2(10.0 / gap)), 1, 48))
        edges = [0.0] + [1.0 - 2.0**-k for k in range(1, depth + 1)] + [1.0]
        return np.array(edges)

    def _integrate(self, Z, edges, q):
        x, wq = legendre.leggauss(q)
        a, b = edges[:-1], edges[1:]
        t = (0.5 * (b - a)[:, None] * (x[None, :] + 1) + a[:, None]).ravel()
        wt = (0.5 * (b - a)[:, None] * wq[None, :]).ravel()
        pts = (t[:, None, None] * Z[None, :, :]).reshape(-1, self.n)
        vals = (self.f.evaluate(pts) * self.rg.evaluate(pts)).reshape(t.size, Z.shape[0])
        return (wt / t) @ vals

    def evaluate(self, Z):
        Z = _rows(Z, self.n)
        out = np.empty(Z.shape[0], dtype=complex)
        used = self.nodes
        for start in range(0, Z.shape[0], self.chunk):
            block = Z[start : start + self.chunk]
            edges = self._panels(float(np.max(norm(block))) if block.size else 0.0)
            q = max(4, self.nodes // 4)
            prev = self._integrate(block, edges, q)
            while True:
                q *= 2
                cur = self._integrate(block, edges, q)
                done = np.max(np.abs(cur - prev)) < self.tol * (1 + np.max(np.abs(cur)))
                prev = cur
                if done or q >= self.max_nodes:
                    break
            used = max(used, q)
            out[start : start + block.shape[0]] = cur
        self.last_nodes_used = used
        return out

    def value_at_zero(self):
        return 0j

    def radial_derivative(self):
        if is_constant(self.g):
            return Polynomial(self.n)
        return Product([self.f, self.rg])

    def scale(self, c):
        return TgFunction(self.f.scale(c), self.g, self.nodes, self.tol, self.max_nodes, self.chunk)

    def singular_points(self):
        return self.f.singular_points() + self.g.singular_points()

    def focus_radius(self):
        return max(self.f.focus_radius(), self.g.focus_radius())

    def to_polynomial(self, degree):
        return apply_tg(self.f, self.g, "exact", degree=degree)

    def to_json(self):
        return {"type": "tg", "f": self.f.to_json(), "g": self.g.to_json()}


# ---------------------------------------------------------------- kernels


def kernel_K(w, space):
    """K(w, z) = (1 - <z,w>)^{-(n+1+alpha)}."""
    w = as_point(w, space.n)
    return KernelTerm(w, space.n + 1 + space.alpha)


def default_m(space):
    """Least integer > n+1+alpha, plus one."""
    return math.floor(space.n + 1 + space.alpha) + 2


def kernel_Kp(w, space, m=None):
    """K_p(w, z) = (1 - <z,w>)^{-m/p} with an integer m > n+1+alpha."""
    m = default_m(space) if m is None else m
    if int(m) != m or m <= space.n + 1 + space.alpha:
        raise ValueError(f"m must be an integer > n+1+alpha = {space.n + 1 + space.alpha}, got {m}")
    w = as_point(w, space.n)
    return KernelTerm(w, m / space.p)


# ---------------------------------------------------------------- JSON


def _vec_json(v):
    return [[float(c.real), float(c.imag)] for c in np.atleast_1d(v)]


def _vec_from_json(v):
    return np.array([complex(a, b) for a, b in v], dtype=complex)


def from_json(obj):
    """Inverse of ``to_json`` for every serializable variant."""
    if isinstance(obj, list):
        n = len(obj[0]["exponents"]) if obj else 1
        return Polynomial(n, {tuple(t["exponents"]): complex(t["re"], t["im"]) for t in obj})
    kind = obj["type"]
    if kind == "polynomial":
        p = from_json(obj["terms"])
        return Polynomial(obj["n"], p.coeffs)
    if kind == "power":
        return KernelTerm(_vec_from_json(obj["w"]), obj["s"], obj["j"], complex(*obj["coef"]))
    if kind == "log":
        return LogKernel(_vec_from_json(obj["b"]), complex(*obj["coef"]))
    if kind == "sum":
        return Sum([from_json(t) for t in obj["terms"]])
    if kind == "product":
        return Product([from_json(t) for t in obj["factors"]])
    if kind == "tg":
        return TgFunction(from_json(obj["f"]), from_json(obj["g"]))
    raise ValueError(f"unknown function type {kind!r}")


def random_polynomial(n, degree, rng, terms=None, scale=1.0):
    """Random complex polynomial of total degree <= ``degree``.

    ``terms=None`` gives a dense polynomial; otherwise ``terms`` distinct
    multi-indices are drawn.
    """
    indices = [e for k in range(degree + 1) for e in _compositions(k, n)]
    if terms is not None and terms < len(indices):
        pick = rng.choice(len(indices), size=terms, replace=False)
        indices = [indices[i] for i in sorted(pick)]
    coeffs = {
        e: scale * complex(rng.standard_normal(), rng.standard_normal()) for e in indices
    }
    return Polynomial(n, coeffs)


__all__ = [
    "HoloFunction",
    "Polynomial",
    "KernelTerm",
    "PowerKernel",
    "LogKernel",
    "Sum",
    "Product",
    "TgFunction",
    "apply_tg",
    "radial_derivative",
    "is_constant",
    "kernel_K",
    "kernel_Kp",
    "default_m",
    "cesaro_symbol",
    "from_json",
    "random_polynomial",
]
