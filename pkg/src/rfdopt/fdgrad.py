"""Finite-difference approximations of the Riemannian gradient.

Two forward-difference schemes are provided: an intrinsic one whose
probe points are retracted onto the manifold (d function evaluations
and d retractions per estimate), and an extrinsic one that probes
directly in the ambient space (d function evaluations, no retractions)
for objectives defined off the manifold.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np


class EvaluationError(RuntimeError):
    """The objective returned a non-finite value."""


@dataclass
class EvalCounter:
    """Running totals of function evaluations and retractions."""
    fe: int = 0
    re: int = 0


@dataclass
class Objective:
    """Callable objective with optional oracles used for verification.

    ``fn`` maps a flat ambient vector to a real.  When
    ``extrinsic_evaluable`` is true the objective is defined on the
    whole ambient space, which the extrinsic scheme requires.  The
    gradient oracle and Lipschitz constants are never used by the
    solvers themselves, only by tests and certificates.
    """
    fn: Callable[[np.ndarray], float]
    extrinsic_evaluable: bool = False
    euclidean_gradient: Optional[Callable[[np.ndarray], np.ndarray]] = None
    lipschitz_riemannian: Optional[float] = None
    lipschitz_euclidean: Optional[float] = None
    f_low: Optional[float] = None

    def __call__(self, v):
        return float(self.fn(np.asarray(v, dtype=float)))

    def riemannian_gradient(self, manifold, x):
        """Projected gradient oracle; requires euclidean_gradient."""
        if self.euclidean_gradient is None:
            raise ValueError("objective has no gradient oracle")
        return manifold.project(x, np.asarray(self.euclidean_gradient(x), float))


@dataclass
class GradientEstimate:
    """A finite-difference gradient with its accuracy and cost receipt."""
    g: np.ndarray
    h: float
    basis_seed: int
    fe_cost: int
    re_cost: int
    norm: float = field(init=False)

    def __post_init__(self):
        self.norm = float(np.linalg.norm(self.g))


def fd_error_bound(L, d, h):
    """Worst-case estimate error L * sqrt(d) * h / 2 for either scheme."""
    if L <= 0 or d <= 0 or h <= 0:
        raise ValueError("fd_error_bound needs positive arguments")
    return 0.5 * L * math.sqrt(d) * h


def _probe_values(f, probes, f_x, h, kind):
    coeffs = np.empty(len(probes))
    for l, p in enumerate(probes):
        val = f(p)
        if not math.isfinite(val):
            raise EvaluationError(
                f"non-finite value at {kind} probe {l} (h={h:g})")
        coeffs[l] = (val - f_x) / h
    return coeffs


def intrinsic_fd_gradient(f, manifold, x, f_x, h, basis, counter,
                          basis_seed=-1):
    """Forward differences along retracted tangent probes R_x(h e_l).

    ``f_x`` is the already-known value at the base point and is not
    recounted.  Adds d function evaluations and d retractions to the
    counter.
    """
    if h <= 0:
        raise ValueError("accuracy parameter h must be positive")
    d = basis.shape[0]
    probes = [manifold.retract(x, h * basis[l]) for l in range(d)]
    coeffs = _probe_values(f, probes, f_x, h, "retracted")
    counter.fe += d
    counter.re += d
    return GradientEstimate(g=coeffs @ basis, h=h, basis_seed=basis_seed,
                            fe_cost=d, re_cost=d)


def extrinsic_fd_gradient(f, manifold, x, f_x, h, basis, counter,
                          basis_seed=-1):
    """Forward differences along ambient probes x + h e_l (no retraction).

    Requires an objective defined off the manifold.  Adds d function
    evaluations and zero retractions to the counter.
    """
    if not f.extrinsic_evaluable:
        raise ValueError(
            "extrinsic finite differences need an objective evaluable "
            "off the manifold (extrinsic_evaluable=False)")
    if h <= 0:
        raise ValueError("accuracy parameter h must be positive")
    d = basis.shape[0]
    probes = [x + h * basis[l] for l in range(d)]
    coeffs = _probe_values(f, probes, f_x, h, "ambient")
    counter.fe += d
    return GradientEstimate(g=coeffs @ basis, h=h, basis_seed=basis_seed,
                            fe_cost=d, re_cost=0)
