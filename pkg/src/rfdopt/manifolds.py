"""Riemannian submanifolds of Euclidean space.

Points and tangent vectors are plain 1-D float64 arrays of length
``ambient_dim``.  Matrix manifolds store their points flattened in
column-major (Fortran) order, so ``x.reshape((m, p), order="F")``
recovers the matrix.  All operations are pure; randomness enters only
through explicit seeds.
"""
from __future__ import annotations

import numpy as np

#: Feasibility tolerance for points, tangent vectors and bases.
TOL_FEAS = 1e-10

#: A Gram-Schmidt candidate whose residual norm falls below this is redrawn.
TOL_DEGENERATE = 1e-8

#: Number of redraws allowed before tangent_basis gives up.
MAX_REDRAWS = 50


class ManifoldError(ValueError):
    """Dimension mismatch, infeasible point, or degenerate basis."""


def _check_vector(v, n, what="vector"):
    v = np.asarray(v, dtype=float).reshape(-1)
    if v.shape[0] != n:
        raise ManifoldError(f"{what} has length {v.shape[0]}, expected {n}")
    if not np.all(np.isfinite(v)):
        raise ManifoldError(f"{what} contains non-finite entries")
    return v


def _qr_positive(a):
    """Thin QR with the R-factor sign-corrected to a positive diagonal."""
    q, r = np.linalg.qr(a)
    s = np.sign(np.diag(r))
    s[s == 0] = 1.0
    return q * s, r * s[:, None]


class Manifold:
    """Base class for d-dimensional submanifolds of R^n (induced metric)."""

    dim: int
    ambient_dim: int

    # -- geometry ---------------------------------------------------------

    def retract(self, x, eta):
        raise NotImplementedError

    def project(self, x, v):
        raise NotImplementedError

    def feasibility_error(self, x) -> float:
        """Scalar residual of the manifold's defining constraints at x."""
        raise NotImplementedError

    def random_point(self, rng):
        raise NotImplementedError

    def check_point(self, x, tol=1e-8):
        x = _check_vector(x, self.ambient_dim, "point")
        err = self.feasibility_error(x)
        if err > tol:
            raise ManifoldError(
                f"point violates {type(self).__name__} constraints "
                f"(residual {err:.3e} > {tol:.0e})")
        return x

    # -- metric -----------------------------------------------------------

    def inner(self, x, u, v):
        u = _check_vector(u, self.ambient_dim, "tangent vector")
        v = _check_vector(v, self.ambient_dim, "tangent vector")
        return float(np.dot(u, v))

    def norm(self, x, v):
        return float(np.linalg.norm(v))

    # -- tangent basis ----------------------------------------------------

    def tangent_basis(self, x, seed):
        """Random orthonormal basis of the tangent space at x.

        Projects standard-normal ambient vectors onto the tangent space
        and orthonormalizes them by Gram-Schmidt (two passes).  A
        candidate whose residual drops below TOL_DEGENERATE is redrawn;
        more than MAX_REDRAWS redraws signals a broken projection.
        Deterministic given the seed.  Returns an array of shape
        ``(dim, ambient_dim)`` whose rows are the basis vectors.
        """
        x = _check_vector(x, self.ambient_dim, "point")
        rng = np.random.default_rng(seed)
        basis = np.empty((self.dim, self.ambient_dim))
        count = 0
        redraws = 0
        while count < self.dim:
            cand = self.project(x, rng.standard_normal(self.ambient_dim))
            for _ in range(2):
                for i in range(count):
                    cand = cand - np.dot(basis[i], cand) * basis[i]
            nrm = np.linalg.norm(cand)
            if nrm < TOL_DEGENERATE:
                redraws += 1
                if redraws > MAX_REDRAWS:
                    raise ManifoldError(
                        f"tangent_basis failed: {redraws} degenerate "
                        f"candidates on {type(self).__name__}")
                continue
            basis[count] = cand / nrm
            count += 1
        return basis


class Euclidean(Manifold):
    """Flat space R^n: retraction is addition, projection is the identity."""

    def __init__(self, n):
        if n < 1:
            raise ManifoldError("Euclidean dimension must be positive")
        self.dim = n
        self.ambient_dim = n

    def retract(self, x, eta):
        x = _check_vector(x, self.ambient_dim, "point")
        eta = _check_vector(eta, self.ambient_dim, "tangent vector")
        return x + eta

    def project(self, x, v):
        return _check_vector(v, self.ambient_dim, "vector").copy()

    def feasibility_error(self, x):
        return 0.0

    def random_point(self, rng):
        return rng.standard_normal(self.ambient_dim)


class Stiefel(Manifold):
    """Matrices X in R^{m x p} with orthonormal columns (X^T X = I).

    Retraction: QR factorization of X + V with the R-factor sign fixed
    to a positive diagonal, which is defined for every tangent V.
    """

    def __init__(self, m, p):
        if not 1 <= p <= m:
            raise ManifoldError(f"Stiefel({m},{p}) requires 1 <= p <= m")
        self.m, self.p = m, p
        self.ambient_dim = m * p
        self.dim = m * p - p * (p + 1) // 2

    def _mat(self, v):
        return v.reshape((self.m, self.p), order="F")

    def retract(self, x, eta):
        x = _check_vector(x, self.ambient_dim, "point")
        eta = _check_vector(eta, self.ambient_dim, "tangent vector")
        q, _ = _qr_positive(self._mat(x) + self._mat(eta))
        return q.reshape(-1, order="F")

    def project(self, x, v):
        x = _check_vector(x, self.ambient_dim, "point")
        v = _check_vector(v, self.ambient_dim, "vector")
        X, V = self._mat(x), self._mat(v)
        xtv = X.T @ V
        out = V - X @ ((xtv + xtv.T) / 2.0)
        return out.reshape(-1, order="F")

    def feasibility_error(self, x):
        X = self._mat(np.asarray(x, float).reshape(-1))
        return float(np.linalg.norm(X.T @ X - np.eye(self.p)))

    def random_point(self, rng):
        q, _ = _qr_positive(rng.standard_normal((self.m, self.p)))
        return q.reshape(-1, order="F")


class SpecialOrthogonal(Manifold):
    """Rotation group SO(m): X^T X = I and det(X) = +1.

    Uses the sign-fixed QR retraction.  For tangent V = X Omega with
    Omega skew, det(X + V) = det(I + Omega) > 0, so the sign-fixed Q
    keeps det = +1 for every tangent step.
    """

    def __init__(self, m):
        if m < 1:
            raise ManifoldError("SO(m) requires m >= 1")
        self.m = m
        self.ambient_dim = m * m
        self.dim = m * (m - 1) // 2

    def _mat(self, v):
        return v.reshape((self.m, self.m), order="F")

    def retract(self, x, eta):
        x = _check_vector(x, self.ambient_dim, "point")
        eta = _check_vector(eta, self.ambient_dim, "tangent vector")
        q, _ = _qr_positive(self._mat(x) + self._mat(eta))
        return q.reshape(-1, order="F")

    def project(self, x, v):
        x = _check_vector(x, self.ambient_dim, "point")
        v = _check_vector(v, self.ambient_dim, "vector")
        X, V = self._mat(x), self._mat(v)
        xtv = X.T @ V
        out = X @ ((xtv - xtv.T) / 2.0)
        return out.reshape(-1, order="F")

    def feasibility_error(self, x):
        X = self._mat(np.asarray(x, float).reshape(-1))
        orth = np.linalg.norm(X.T @ X - np.eye(self.m))
        return float(orth + abs(np.linalg.det(X) - 1.0))

    def random_point(self, rng):
        q, _ = _qr_positive(rng.standard_normal((self.m, self.m)))
        if np.linalg.det(q) < 0:
            q = q.copy()
            q[:, 0] = -q[:, 0]
        return q.reshape(-1, order="F")


class Oblique(Manifold):
    """Matrices in R^{m x p} with unit-norm columns (product of spheres).

    Retraction: column-wise normalization of x + eta, which never
    degenerates for tangent eta since ||x_i + eta_i||^2 = 1 + ||eta_i||^2.
    """

    def __init__(self, m, p):
        if m < 2 or p < 1:
            raise ManifoldError(f"Oblique({m},{p}) requires m >= 2, p >= 1")
        self.m, self.p = m, p
        self.ambient_dim = m * p
        self.dim = (m - 1) * p

    def _mat(self, v):
        return v.reshape((self.m, self.p), order="F")

    def retract(self, x, eta):
        x = _check_vector(x, self.ambient_dim, "point")
        eta = _check_vector(eta, self.ambient_dim, "tangent vector")
        Z = self._mat(x) + self._mat(eta)
        norms = np.linalg.norm(Z, axis=0)
        if np.any(norms == 0):
            raise ManifoldError("retraction hit a zero column")
        return (Z / norms).reshape(-1, order="F")

    def project(self, x, v):
        x = _check_vector(x, self.ambient_dim, "point")
        v = _check_vector(v, self.ambient_dim, "vector")
        X, V = self._mat(x), self._mat(v)
        out = V - X * np.sum(X * V, axis=0)
        return out.reshape(-1, order="F")

    def feasibility_error(self, x):
        X = self._mat(np.asarray(x, float).reshape(-1))
        return float(np.max(np.abs(np.linalg.norm(X, axis=0) - 1.0)))

    def random_point(self, rng):
        Z = rng.standard_normal((self.m, self.p))
        return (Z / np.linalg.norm(Z, axis=0)).reshape(-1, order="F")


class Product(Manifold):
    """Cartesian product of manifolds, stored as concatenated coordinates."""

    def __init__(self, parts):
        parts = list(parts)
        if not parts:
            raise ManifoldError("Product of zero manifolds")
        self.parts = parts
        self.dim = sum(p.dim for p in parts)
        self.ambient_dim = sum(p.ambient_dim for p in parts)
        self._slices = []
        lo = 0
        for p in parts:
            self._slices.append((lo, lo + p.ambient_dim))
            lo += p.ambient_dim

    def split(self, v):
        """Component views of a concatenated ambient vector."""
        v = np.asarray(v, float).reshape(-1)
        return [v[lo:hi] for lo, hi in self._slices]

    def retract(self, x, eta):
        x = _check_vector(x, self.ambient_dim, "point")
        eta = _check_vector(eta, self.ambient_dim, "tangent vector")
        return np.concatenate([
            p.retract(x[lo:hi], eta[lo:hi])
            for p, (lo, hi) in zip(self.parts, self._slices)])

    def project(self, x, v):
        x = _check_vector(x, self.ambient_dim, "point")
        v = _check_vector(v, self.ambient_dim, "vector")
        return np.concatenate([
            p.project(x[lo:hi], v[lo:hi])
            for p, (lo, hi) in zip(self.parts, self._slices)])

    def feasibility_error(self, x):
        x = np.asarray(x, float).reshape(-1)
        return float(max(p.feasibility_error(x[lo:hi])
                         for p, (lo, hi) in zip(self.parts, self._slices)))

    def random_point(self, rng):
        return np.concatenate([p.random_point(rng) for p in self.parts])

    def tangent_basis(self, x, seed):
        # concatenation of component bases, each seeded independently
        x = _check_vector(x, self.ambient_dim, "point")
        ss = np.random.SeedSequence(seed)
        children = ss.spawn(len(self.parts))
        basis = np.zeros((self.dim, self.ambient_dim))
        row = 0
        for p, (lo, hi), child in zip(self.parts, self._slices, children):
            sub = p.tangent_basis(x[lo:hi], int(child.generate_state(1)[0]))
            basis[row:row + p.dim, lo:hi] = sub
            row += p.dim
        return basis
