"""Geometry of the unit ball B_n in C^n.

Points are plain complex numpy arrays of shape ``(n,)``; the ``*_many``
variants accept stacks of shape ``(N, n)`` and broadcast.
"""

from dataclasses import dataclass

import numpy as np

INTERIOR_TOL = 1e-12


def as_point(z, n=None):
    """Coerce ``z`` to a complex vector and check it lies in the open ball."""
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    if z.ndim != 1:
        raise ValueError(f"a point must be a 1-d vector, got shape {z.shape}")
    if n is not None and z.shape[0] != n:
        raise ValueError(f"expected a point in C^{n}, got C^{z.shape[0]}")
    if not np.all(np.isfinite(z)):
        raise ValueError("point has non-finite coordinates")
    if norm(z) > 1.0 - INTERIOR_TOL:
        raise ValueError(f"point {z} is not interior (|z| = {norm(z):.15g})")
    return z


def as_direction(b, n=None):
    """Coerce ``b`` to a vector with |b| <= 1 (boundary directions allowed)."""
    b = np.atleast_1d(np.asarray(b, dtype=complex))
    if n is not None and b.shape[0] != n:
        raise ValueError(f"expected a vector in C^{n}, got C^{b.shape[0]}")
    if norm(b) > 1.0 + 1e-12:
        raise ValueError(f"|b| = {norm(b):.15g} exceeds 1")
    return b


def diagonal_direction(n):
    """The unit vector (1, ..., 1)/sqrt(n)."""
    return np.full(n, 1.0 / np.sqrt(n), dtype=complex)


def inner(z, w):
    """Hermitian inner product sum_k z_k conj(w_k)."""
    z = np.asarray(z, dtype=complex)
    w = np.asarray(w, dtype=complex)
    if z.shape[-1] != w.shape[-1]:
        raise ValueError(f"dimension mismatch: {z.shape[-1]} vs {w.shape[-1]}")
    return np.sum(z * np.conj(w), axis=-1)


def norm(z):
    z = np.asarray(z, dtype=complex)
    return np.sqrt(np.sum(z.real**2 + z.imag**2, axis=-1))


def moebius(w, z):
    """The involutive automorphism phi_w of B_n exchanging 0 and w.

    Uses ``sqrt(1 - |w|^2)`` in front of the orthogonal component; with
    ``sqrt(1 - |z|^2)`` there the map is not an involution once n >= 2.
    """
    w = as_point(w)
    z = as_point(z, w.shape[0])
    size = norm(w)
    if size == 0.0:
        return z.copy()
    u = w / size
    pz = inner(z, u) * u
    qz = z - pz
    return (w - pz - np.sqrt(1.0 - size * size) * qz) / (1.0 - inner(z, w))


def one_minus_phi_sq(z, w):
    """1 - |phi_w(z)|^2 via (1-|w|^2)(1-|z|^2)/|1-<z,w>|^2, broadcasting."""
    z = np.asarray(z, dtype=complex)
    w = np.asarray(w, dtype=complex)
    zz = np.sum(np.abs(z) ** 2, axis=-1)
    ww = np.sum(np.abs(w) ** 2, axis=-1)
    zw = np.sum(z * np.conj(w), axis=-1)
    return (1.0 - ww) * (1.0 - zz) / np.abs(1.0 - zw) ** 2


def pseudo_distance(z, w):
    """|phi_w(z)|, broadcasting over leading axes."""
    return np.sqrt(np.clip(phi_sq(z, w), 0.0, 1.0))


def phi_sq(z, w):
    """|phi_w(z)|^2 as (|z-w|^2 - sum_{i<j} |z_i w_j - z_j w_i|^2) / |1-<z,w>|^2.

    The numerator is |z-w|^2 + |<z,w>|^2 - |z|^2 |w|^2 with the last two
    terms written by Lagrange's identity, so nothing cancels when z is close
    to w (where 1 - one_minus_phi_sq would).
    """
    z = np.asarray(z, dtype=complex)
    w = np.asarray(w, dtype=complex)
    z, w = np.broadcast_arrays(z, w)
    n = z.shape[-1]
    num = np.sum(np.abs(z - w) ** 2, axis=-1)
    for i in range(n):
        for j in range(i + 1, n):
            num = num - np.abs(z[..., i] * w[..., j] - z[..., j] * w[..., i]) ** 2
    zw = np.sum(z * np.conj(w), axis=-1)
    return np.maximum(num, 0.0) / np.abs(1.0 - zw) ** 2


def bergman_distance(z, w):
    """Invariant distance 1/2 log((1+|phi_w(z)|)/(1-|phi_w(z)|)).

    Broadcasts.  Near the diagonal |phi|^2 is computed directly; far from it
    1-|phi|^2 is, so both close and near-boundary pairs keep precision.
    """
    x = np.sqrt(np.clip(phi_sq(z, w), 0.0, 1.0))
    s = np.clip(one_minus_phi_sq(z, w), 0.0, 1.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        far = np.log1p(x) - 0.5 * np.log(s)
        near = np.arctanh(np.minimum(x, 0.5))
    d = np.where(x < 0.5, near, far)
    return d if np.ndim(d) else float(d)


def distance_from_origin(r):
    """Bergman distance from 0 to a point of Euclidean norm r."""
    return np.arctanh(r)


def radius_at_distance(d):
    """Inverse of :func:`distance_from_origin`."""
    return np.tanh(d)


@dataclass(frozen=True)
class MetricBall:
    """Bergman metric ball D(center, radius)."""

    center: np.ndarray
    radius: float

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError("radius must be positive")
        object.__setattr__(self, "center", as_point(self.center))

    def contains(self, z):
        return bergman_distance(z, self.center) < self.radius

    def sample(self, count, rng):
        """Points uniform in D(center, radius) w.r.t. the invariant measure.

        Drawn as phi_a(u) with u uniform-invariant in D(0, radius), which
        is the Euclidean ball of radius tanh(radius).
        """
        n = self.center.shape[0]
        t = np.tanh(self.radius)
        u = invariant_ball_sample(n, t, count, rng)
        return moebius_many(self.center, u)


def moebius_many(w, Z):
    """phi_w applied to each row of Z."""
    w = np.asarray(w, dtype=complex)
    Z = np.asarray(Z, dtype=complex)
    size = float(norm(w))
    if size == 0.0:
        return Z.copy()
    u = w / size
    pz = (Z @ np.conj(u))[:, None] * u[None, :]
    qz = Z - pz
    return (w[None, :] - pz - np.sqrt(1.0 - size * size) * qz) / (1.0 - Z @ np.conj(w))[:, None]


def sphere_sample(n, count, rng):
    """Uniform points on the unit sphere of C^n = R^{2n}."""
    g = rng.standard_normal((count, n)) + 1j * rng.standard_normal((count, n))
    return g / norm(g)[:, None]


def invariant_ball_sample(n, r_max, count, rng):
    """Points of |z| <= r_max distributed by the invariant measure (1-|z|^2)^{-n-1} dv.

    The radial CDF is inverted numerically on a grid uniform in hyperbolic
    radius, where the density is smooth.
    """
    rho = np.linspace(0.0, np.arctanh(r_max), 20001)
    r = np.tanh(rho)
    # dv_inv = r^{2n-1} (1-r^2)^{-n-1} dr and dr = (1-r^2) drho
    dens = r ** (2 * n - 1) * (1.0 - r**2) ** (-n)
    cdf = np.concatenate([[0.0], np.cumsum(0.5 * (dens[1:] + dens[:-1]) * np.diff(rho))])
    cdf /= cdf[-1]
    radii = np.tanh(np.interp(rng.random(count), cdf, rho))
    return radii[:, None] * sphere_sample(n, count, rng)
