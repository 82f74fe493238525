import re

import numpy as np
import pytest

import rfdopt as r


def pytest_terminal_summary(terminalreporter):
    """One PASS/FAIL line per acceptance criterion."""
    results = {}
    for outcome in ("passed", "failed", "error"):
        for rep in terminalreporter.stats.get(outcome, []):
            nodeid = str(getattr(rep, "nodeid", ""))
            if "test_acceptance.py" not in nodeid:
                continue
            m = re.search(r"test_c(\d+)_(\w+)", nodeid)
            if m:
                results[int(m.group(1))] = (outcome, m.group(2))
    if not results:
        return
    terminalreporter.write_line("")
    terminalreporter.write_line("acceptance criteria:")
    for num in sorted(results):
        outcome, slug = results[num]
        status = "PASS" if outcome == "passed" else "FAIL"
        terminalreporter.write_line(
            f"  criterion {num:2d} [{status}] {slug.replace('_', ' ')}")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def all_test_manifolds():
    return [
        r.Euclidean(7),
        r.Stiefel(5, 2),
        r.Stiefel(3, 3),
        r.Oblique(4, 3),
        r.SpecialOrthogonal(3),
        r.Product([r.Stiefel(3, 2), r.Oblique(3, 2)]),
    ]


def ambient_quadratic(manifold, seed, scale=3.0):
    """Random symmetric quadratic on the ambient space, scaled so the
    extreme Hessian eigenvalue has magnitude ``scale``."""
    gen = np.random.default_rng(seed)
    n = manifold.ambient_dim
    w = gen.standard_normal((n, n))
    Q = (w + w.T) / 2.0
    Q *= scale / np.abs(np.linalg.eigvalsh(Q)).max()
    b = gen.standard_normal(n)
    # points of these manifolds have constant ambient norm, which gives
    # a crude but valid lower bound on f over the manifold
    radius = float(np.linalg.norm(manifold.random_point(gen)))
    f_low = -0.5 * scale * radius ** 2 - float(np.linalg.norm(b)) * radius
    return r.Objective(
        lambda v: 0.5 * float(v @ Q @ v) + float(b @ v),
        extrinsic_evaluable=True,
        euclidean_gradient=lambda v: Q @ v + b,
        lipschitz_euclidean=float(np.abs(np.linalg.eigvalsh(Q)).max()),
        f_low=f_low)


def euclidean_quadratic(diag):
    q = np.asarray(diag, float)
    L = float(q.max())
    return r.Objective(
        lambda v: 0.5 * float(v @ (q * v)),
        extrinsic_evaluable=True,
        euclidean_gradient=lambda v: q * v,
        lipschitz_riemannian=L, lipschitz_euclidean=L, f_low=0.0)


def measured_riemannian_lipschitz(obj, manifold, n_points=40, seed=0):
    """Upper bound on the retraction-smoothness constant by dense
    sampling of the second-order deviation along retracted rays."""
    gen = np.random.default_rng(seed)
    best = 0.0
    for _ in range(n_points):
        x = manifold.random_point(gen)
        g = obj.riemannian_gradient(manifold, x)
        basis = manifold.tangent_basis(x, int(gen.integers(2 ** 31)))
        f_x = obj(x)
        for t in (1e-2, 1e-3):
            for _ in range(5):
                coef = gen.standard_normal(manifold.dim)
                eta = (coef / np.linalg.norm(coef)) @ basis
                dev = abs(obj(manifold.retract(x, t * eta)) - f_x
                          - t * float(g @ eta))
                best = max(best, 2.0 * dev / t ** 2)
    return best
