"""Seeded test-problem generators.

Three Riemannian families (leading singular vectors on a Stiefel
product, dictionary learning on oblique x Euclidean, rotation
synchronization on a power of SO(m)) over the standard instance grid,
plus a small built-in suite of classical smooth Euclidean functions.
All generators are deterministic given their seed; data models (the
Gaussian matrix, the planted dictionary, the rotation noise) are fixed
here so results are reproducible.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional

import numpy as np

from .fdgrad import Objective
from .manifolds import (Euclidean, Manifold, Oblique, Product,
                        SpecialOrthogonal, Stiefel)
from .solver import _write_csv_atomic


@dataclass
class ProblemInstance:
    name: str
    manifold: Manifold
    objective: Objective
    seed: int
    dims: Dict[str, Optional[int]]   # m1, m2, m3, n, d
    optimum: Optional[float] = None
    info: dict = field(default_factory=dict)

    def initial_point(self, seed=0):
        """Seeded start: a random feasible point pushed along a random
        tangent direction."""
        rng = np.random.default_rng([977, self.seed & 0xFFFFFFFF, seed])
        m = self.manifold
        p = m.random_point(rng)
        eta = m.project(p, rng.standard_normal(m.ambient_dim))
        return m.retract(p, eta)


@dataclass
class ProblemSuite:
    instances: List[ProblemInstance]
    seed: int

    def __post_init__(self):
        names = [inst.name for inst in self.instances]
        if len(set(names)) != len(names):
            raise ValueError("duplicate instance names in suite")

    def __iter__(self):
        return iter(self.instances)

    def __len__(self):
        return len(self.instances)

    def get(self, name):
        for inst in self.instances:
            if inst.name == name:
                return inst
        raise KeyError(name)


def _matF(v, m, p):
    return np.asarray(v, float).reshape((m, p), order="F")


def _flatF(M):
    return np.asarray(M, float).reshape(-1, order="F")


# ---------------------------------------------------------------------------
# Problem I: leading singular vectors
# ---------------------------------------------------------------------------

def top_singular_vectors(m1, m2, m3, seed=0):
    """max trace(X^T A Y) over Stiefel(m1,m3) x Stiefel(m2,m3), as a
    minimization of the negated trace.  The optimum is minus the sum of
    the m3 largest singular values of the Gaussian matrix A."""
    if m3 < 1 or m3 > min(m1, m2):
        raise ValueError(f"need 1 <= m3 <= min(m1, m2), got ({m1},{m2},{m3})")
    rng = np.random.default_rng([101, seed & 0xFFFFFFFF, m1, m2, m3])
    A = rng.standard_normal((m1, m2))
    svals = np.linalg.svd(A, compute_uv=False)
    optimum = -float(svals[:m3].sum())
    manifold = Product([Stiefel(m1, m3), Stiefel(m2, m3)])
    nx = m1 * m3

    def fn(v):
        X = _matF(v[:nx], m1, m3)
        Y = _matF(v[nx:], m2, m3)
        return -float(np.trace(X.T @ A @ Y))

    def grad(v):
        X = _matF(v[:nx], m1, m3)
        Y = _matF(v[nx:], m2, m3)
        return np.concatenate([_flatF(-A @ Y), _flatF(-A.T @ X)])

    obj = Objective(fn, extrinsic_evaluable=True, euclidean_gradient=grad,
                    lipschitz_euclidean=float(svals[0]), f_low=optimum)
    return ProblemInstance(
        name=f"tsv-{m1}-{m2}-{m3}", manifold=manifold, objective=obj,
        seed=seed, optimum=optimum,
        dims={"m1": m1, "m2": m2, "m3": m3,
              "n": manifold.ambient_dim, "d": manifold.dim},
        info={"singular_values": svals})


# ---------------------------------------------------------------------------
# Problem II: dictionary learning
# ---------------------------------------------------------------------------

def dictionary_learning(m1, m2, m3, seed=0, lam=0.01, delta=0.001):
    """||Y - D C||_F^2 + lam * sum sqrt(C_ij^2 + delta^2) over
    Oblique(m1,m3) x R^{m3 x m2}.

    Y is planted: a random unit-column dictionary times a sparse
    coefficient matrix (30% support), plus 1% Gaussian noise."""
    if m1 < 2 or m2 < 1 or m3 < 1:
        raise ValueError(f"invalid dictionary dims ({m1},{m2},{m3})")
    rng = np.random.default_rng([202, seed & 0xFFFFFFFF, m1, m2, m3])
    ob = Oblique(m1, m3)
    D_true = _matF(ob.random_point(rng), m1, m3)
    C_true = rng.standard_normal((m3, m2)) * (rng.random((m3, m2)) < 0.3)
    Y = D_true @ C_true + 0.01 * rng.standard_normal((m1, m2))
    manifold = Product([Oblique(m1, m3), Euclidean(m3 * m2)])
    nd = m1 * m3

    def fn(v):
        D = _matF(v[:nd], m1, m3)
        C = _matF(v[nd:], m3, m2)
        resid = Y - D @ C
        return float(np.sum(resid * resid)
                     + lam * np.sum(np.sqrt(C * C + delta * delta)))

    def grad(v):
        D = _matF(v[:nd], m1, m3)
        C = _matF(v[nd:], m3, m2)
        resid = Y - D @ C
        gD = -2.0 * resid @ C.T
        gC = -2.0 * D.T @ resid + lam * C / np.sqrt(C * C + delta * delta)
        return np.concatenate([_flatF(gD), _flatF(gC)])

    obj = Objective(fn, extrinsic_evaluable=True, euclidean_gradient=grad,
                    f_low=0.0)
    return ProblemInstance(
        name=f"dict-{m1}-{m2}-{m3}", manifold=manifold, objective=obj,
        seed=seed,
        dims={"m1": m1, "m2": m2, "m3": m3,
              "n": manifold.ambient_dim, "d": manifold.dim},
        info={"lam": lam, "delta": delta, "Y": Y})


# ---------------------------------------------------------------------------
# Problem III: rotation synchronization
# ---------------------------------------------------------------------------

def rotation_synchronization(m1, m2, noise_level=0.1, seed=0):
    """sum_{i>j} ||R_i - H_ij R_j||_F^2 over SO(m1)^{m2}.

    Measurements H_ij are ground-truth relative rotations pushed along a
    random tangent perturbation of size ``noise_level`` (so each H_ij is
    itself a rotation).  With zero noise the ground truth attains f = 0."""
    if m1 < 2 or m2 < 2:
        raise ValueError(f"rotation synchronization needs m1,m2 >= 2, "
                         f"got ({m1},{m2})")
    rng = np.random.default_rng([303, seed & 0xFFFFFFFF, m1, m2])
    so = SpecialOrthogonal(m1)
    truth = [_matF(so.random_point(rng), m1, m1) for _ in range(m2)]
    H = {}
    for i in range(m2):
        for j in range(i):
            base = _flatF(truth[i] @ truth[j].T)
            eta = so.project(base,
                             noise_level * rng.standard_normal(m1 * m1))
            H[(i, j)] = _matF(so.retract(base, eta), m1, m1)
    manifold = Product([SpecialOrthogonal(m1) for _ in range(m2)])
    nm = m1 * m1

    def _blocks(v):
        v = np.asarray(v, float).reshape(-1)
        return [_matF(v[i * nm:(i + 1) * nm], m1, m1) for i in range(m2)]

    def fn(v):
        R = _blocks(v)
        total = 0.0
        for (i, j), Hij in H.items():
            diff = R[i] - Hij @ R[j]
            total += float(np.sum(diff * diff))
        return total

    def grad(v):
        R = _blocks(v)
        G = [np.zeros((m1, m1)) for _ in range(m2)]
        for (i, j), Hij in H.items():
            diff = R[i] - Hij @ R[j]
            G[i] += 2.0 * diff
            G[j] -= 2.0 * Hij.T @ diff
        return np.concatenate([_flatF(g) for g in G])

    # each R_i enters m2-1 pair terms; with orthogonal H_ij the Hessian
    # blocks give a Gershgorin bound of 4*(m2-1)
    obj = Objective(fn, extrinsic_evaluable=True, euclidean_gradient=grad,
                    lipschitz_euclidean=4.0 * (m2 - 1), f_low=0.0)
    return ProblemInstance(
        name=f"rotsync-{m1}-{m2}", manifold=manifold, objective=obj,
        seed=seed, optimum=0.0 if noise_level == 0 else None,
        dims={"m1": m1, "m2": m2, "m3": None,
              "n": manifold.ambient_dim, "d": manifold.dim},
        info={"ground_truth": np.concatenate([_flatF(r) for r in truth]),
              "noise_level": noise_level})


# ---------------------------------------------------------------------------
# Euclidean suite
# ---------------------------------------------------------------------------

def _quadratic_instance(name, diag, seed):
    q = np.asarray(diag, float)
    n = q.shape[0]
    L = float(q.max())

    def fn(v):
        return 0.5 * float(v @ (q * v))

    obj = Objective(fn, extrinsic_evaluable=True,
                    euclidean_gradient=lambda v: q * v,
                    lipschitz_euclidean=L, lipschitz_riemannian=L, f_low=0.0)
    return ProblemInstance(
        name=name, manifold=Euclidean(n), objective=obj, seed=seed,
        optimum=0.0, dims={"m1": None, "m2": None, "m3": None, "n": n, "d": n})


def _rosenbrock_instance(n, seed):
    if n % 2:
        raise ValueError("extended Rosenbrock needs even n")

    def fn(v):
        odd = v[0::2]
        even = v[1::2]
        return float(np.sum(100.0 * (even - odd ** 2) ** 2 + (1.0 - odd) ** 2))

    def grad(v):
        g = np.zeros_like(v)
        odd = v[0::2]
        even = v[1::2]
        g[0::2] = -400.0 * odd * (even - odd ** 2) - 2.0 * (1.0 - odd)
        g[1::2] = 200.0 * (even - odd ** 2)
        return g

    obj = Objective(fn, extrinsic_evaluable=True, euclidean_gradient=grad,
                    f_low=0.0)
    return ProblemInstance(
        name=f"rosen-n{n}", manifold=Euclidean(n), objective=obj, seed=seed,
        optimum=0.0, dims={"m1": None, "m2": None, "m3": None, "n": n, "d": n})


def _trigonometric_instance(n, seed):
    idx = np.arange(1, n + 1, dtype=float)

    def _residuals(v):
        return n - np.sum(np.cos(v)) + idx * (1.0 - np.cos(v)) - np.sin(v)

    def fn(v):
        r = _residuals(v)
        return float(r @ r)

    def grad(v):
        r = _residuals(v)
        # dr_i/dx_j = sin x_j + delta_ij * (i * sin x_i - cos x_i)
        g = 2.0 * np.sin(v) * np.sum(r)
        g += 2.0 * r * (idx * np.sin(v) - np.cos(v))
        return g

    obj = Objective(fn, extrinsic_evaluable=True, euclidean_gradient=grad,
                    f_low=0.0)
    return ProblemInstance(
        name=f"trig-n{n}", manifold=Euclidean(n), objective=obj, seed=seed,
        dims={"m1": None, "m2": None, "m3": None, "n": n, "d": n})


def euclidean_suite(seed=0):
    """Built-in smooth unconstrained suite (13 instances over n in
    {2, 10, 50})."""
    instances = []
    for n in (2, 10, 50):
        instances.append(_quadratic_instance(
            f"quad-n{n}", np.arange(1, n + 1, dtype=float), seed))
        instances.append(_quadratic_instance(
            f"illquad-n{n}", np.geomspace(1.0, 100.0, n), seed))
        instances.append(_quadratic_instance(
            f"sumsq-n{n}", np.full(n, 2.0), seed))
    instances.append(_rosenbrock_instance(2, seed))
    instances.append(_rosenbrock_instance(10, seed))
    instances.append(_trigonometric_instance(2, seed))
    instances.append(_trigonometric_instance(10, seed))
    return ProblemSuite(instances, seed)


# ---------------------------------------------------------------------------
# Instance grid and lookup
# ---------------------------------------------------------------------------

TSV_GRID = [(2, 2, 1), (3, 3, 2), (5, 5, 2), (10, 10, 2), (15, 15, 2),
            (20, 20, 2), (30, 30, 2), (5, 5, 4), (10, 10, 4), (20, 20, 4),
            (30, 30, 4), (30, 10, 6), (30, 15, 6), (30, 10, 8), (30, 15, 8)]

DICT_GRID = [(2, 3, 1), (3, 5, 2), (4, 6, 3), (5, 7, 4), (6, 8, 5),
             (8, 10, 6), (10, 12, 7), (12, 14, 8), (14, 16, 10), (5, 20, 3),
             (7, 20, 5), (12, 20, 3), (3, 20, 5), (5, 20, 7), (3, 20, 12)]

ROTSYNC_GRID = [(2, 2), (2, 4), (2, 6), (4, 2), (4, 4), (4, 6),
                (6, 2), (6, 4), (6, 6), (8, 2), (8, 4), (8, 6),
                (10, 2), (10, 4), (10, 6)]


def _stiefel_dim(m, p):
    return m * p - p * (p + 1) // 2


def table1_metadata():
    """The 45-instance grid with (n, d) computed from the manifold
    dimension formulas (one published d value disagrees with the
    formula; the formula wins, see README)."""
    rows = []
    for (m1, m2, m3) in TSV_GRID:
        rows.append({"name": f"tsv-{m1}-{m2}-{m3}", "family": "tsv",
                     "m1": m1, "m2": m2, "m3": m3,
                     "n": m3 * (m1 + m2),
                     "d": _stiefel_dim(m1, m3) + _stiefel_dim(m2, m3)})
    for (m1, m2, m3) in DICT_GRID:
        rows.append({"name": f"dict-{m1}-{m2}-{m3}", "family": "dict",
                     "m1": m1, "m2": m2, "m3": m3,
                     "n": m1 * m3 + m3 * m2,
                     "d": (m1 - 1) * m3 + m3 * m2})
    for (m1, m2) in ROTSYNC_GRID:
        rows.append({"name": f"rotsync-{m1}-{m2}", "family": "rotsync",
                     "m1": m1, "m2": m2, "m3": None,
                     "n": m2 * m1 * m1,
                     "d": m2 * (m1 * (m1 - 1) // 2)})
    return rows


def riemannian_suite(seed=0):
    """All 45 grid instances (15 per problem family)."""
    instances = []
    for (m1, m2, m3) in TSV_GRID:
        instances.append(top_singular_vectors(m1, m2, m3, seed))
    for (m1, m2, m3) in DICT_GRID:
        instances.append(dictionary_learning(m1, m2, m3, seed))
    for (m1, m2) in ROTSYNC_GRID:
        instances.append(rotation_synchronization(m1, m2, seed=seed))
    return ProblemSuite(instances, seed)


#: Extra problems registered at runtime (tests, extensions).
EXTRA_PROBLEMS: Dict[str, Callable[[int], ProblemInstance]] = {}


def get_problem(name, seed=0):
    """Build a single named instance (grid names or Euclidean suite)."""
    if name in EXTRA_PROBLEMS:
        return EXTRA_PROBLEMS[name](seed)
    parts = name.split("-")
    try:
        if parts[0] == "tsv" and len(parts) == 4:
            return top_singular_vectors(*map(int, parts[1:]), seed=seed)
        if parts[0] == "dict" and len(parts) == 4:
            return dictionary_learning(*map(int, parts[1:]), seed=seed)
        if parts[0] == "rotsync" and len(parts) == 3:
            return rotation_synchronization(*map(int, parts[1:]), seed=seed)
    except ValueError as exc:
        raise KeyError(f"unknown problem {name!r}: {exc}") from exc
    for inst in euclidean_suite(seed):
        if inst.name == name:
            return inst
    raise KeyError(f"unknown problem {name!r}")


def suite_metadata_csv(path, seed=0):
    """Export the instance grid as CSV (name,m1,m2,m3,n,d,seed)."""
    header = ["name", "m1", "m2", "m3", "n", "d", "seed"]
    rows = [[r["name"], r["m1"], r["m2"],
             "" if r["m3"] is None else r["m3"], r["n"], r["d"], seed]
            for r in table1_metadata()]
    _write_csv_atomic(path, header, rows)
