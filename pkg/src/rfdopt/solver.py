"""Derivative-free Riemannian solvers with two-estimate adaptation.

``int-rfd`` and ``ext-rfd`` maintain two running estimates of the
gradient-Lipschitz constant: an optimistic one (sigma, setting the
stepsize 1/sigma) and a conservative one (tau, setting the
finite-difference accuracy h = 2*eps / (5*sqrt(d)*tau)).  ``dfqrm`` is
the single-estimate baseline obtained by coupling sigma = tau.

Each iteration is classified into one of four branches:

* U1 - the estimated gradient norm is below 4*eps/5; tau doubles.
* S  - the trial step achieves sufficient decrease; sigma halves.
* U2 - the decrease test fails and the doubled sigma exceeds tau;
       tau doubles and the gradient is recomputed at smaller h.
* U3 - the decrease test fails but the doubled sigma stays <= tau;
       the cached gradient is reused, so the next iteration costs
       exactly one function evaluation and one retraction.
"""
from __future__ import annotations

import csv
import math
import os
import tempfile
import time
from dataclasses import dataclass, replace
from typing import List, Optional

import numpy as np

from .fdgrad import (EvalCounter, GradientEstimate, extrinsic_fd_gradient,
                     intrinsic_fd_gradient)

INT_RFD = "int-rfd"
EXT_RFD = "ext-rfd"
DFQRM = "dfqrm"
SCHEMES = (INT_RFD, EXT_RFD, DFQRM)

BRANCH_S = "S"
BRANCH_U1 = "U1"
BRANCH_U2 = "U2"
BRANCH_U3 = "U3"

STOP_EPSILON = "epsilon_stop"
STOP_BUDGET = "budget"
STOP_STALL = "stall"


class ConfigError(ValueError):
    """Invalid solver configuration."""


class SolverAbort(RuntimeError):
    """A run hit a non-finite objective value and cannot continue."""


@dataclass(frozen=True)
class SolverConfig:
    scheme: str = INT_RFD
    sigma0: float = 1.0
    tau0: float = 100.0
    epsilon: float = 1e-5
    budget_fe: Optional[int] = None   # default 100*(d+1), fixed at run time
    seed: int = 0
    lipschitz_ref: Optional[float] = None  # enables the epsilon_stop certificate
    stall_limit: int = 30

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ConfigError(f"unknown scheme {self.scheme!r}; "
                              f"expected one of {SCHEMES}")
        if self.sigma0 <= 0:
            raise ConfigError("sigma0 must be positive")
        if self.tau0 < self.sigma0:
            raise ConfigError(
                f"tau0 ({self.tau0:g}) must be >= sigma0 ({self.sigma0:g})")
        if self.epsilon <= 0:
            raise ConfigError("epsilon must be positive")
        if self.budget_fe is not None and self.budget_fe <= 0:
            raise ConfigError("budget_fe must be positive")
        if self.stall_limit <= 0:
            raise ConfigError("stall_limit must be positive")


@dataclass
class SolverState:
    k: int
    x: np.ndarray
    f_x: float
    sigma: float
    tau: float
    counter: EvalCounter
    cached: Optional[GradientEstimate] = None
    n_gradients: int = 0
    best_f: float = math.inf
    best_x: Optional[np.ndarray] = None


@dataclass
class IterationRecord:
    k: int
    branch: str
    f: float          # objective at the iterate after this iteration
    sigma: float      # sigma at the start of the iteration
    tau: float        # tau at the start of the iteration
    h: float
    gnorm: float
    fe: int           # cumulative function evaluations after the iteration
    re: int           # cumulative retractions after the iteration
    wall: float = 0.0
    exact_gnorm: Optional[float] = None


@dataclass
class RunTrace:
    config: SolverConfig
    problem: str
    dim: int
    f0: float
    records: List[IterationRecord]
    termination_reason: str
    x_final: np.ndarray
    f_final: float
    fe_total: int
    re_total: int
    sigma_final: float
    tau_final: float
    budget_fe: int

    def to_csv(self, path):
        """Write the per-iteration records (atomic write-then-rename)."""
        with_exact = any(r.exact_gnorm is not None for r in self.records)
        header = ["k", "branch", "f", "sigma", "tau", "h", "gnorm", "fe", "re"]
        if with_exact:
            header.append("exact_gnorm")
        rows = []
        for r in self.records:
            row = [r.k, r.branch, repr(r.f), repr(r.sigma), repr(r.tau),
                   repr(r.h), repr(r.gnorm), r.fe, r.re]
            if with_exact:
                row.append("" if r.exact_gnorm is None else repr(r.exact_gnorm))
            rows.append(row)
        _write_csv_atomic(path, header, rows)


def _write_csv_atomic(path, header, rows):
    path = os.fspath(path)
    directory = os.path.dirname(path) or "."
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            writer.writerows(rows)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def read_trace_csv(path):
    """Read back a trace CSV as a list of IterationRecord."""
    records = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        for line, row in enumerate(reader, start=2):
            try:
                exact = row.get("exact_gnorm")
                records.append(IterationRecord(
                    k=int(row["k"]), branch=row["branch"], f=float(row["f"]),
                    sigma=float(row["sigma"]), tau=float(row["tau"]),
                    h=float(row["h"]), gnorm=float(row["gnorm"]),
                    fe=int(row["fe"]), re=int(row["re"]),
                    exact_gnorm=float(exact) if exact else None))
            except (KeyError, TypeError, ValueError) as exc:
                raise ValueError(f"{path}:{line}: malformed trace row "
                                 f"({exc})") from exc
    return records


def _basis_seed(run_seed, gradient_index):
    ss = np.random.SeedSequence((run_seed & 0xFFFFFFFF, gradient_index))
    return int(ss.generate_state(1)[0])


def _fd_gradient(cfg, obj, manifold, state):
    h = 2.0 * cfg.epsilon / (5.0 * math.sqrt(manifold.dim) * state.tau)
    seed = _basis_seed(cfg.seed, state.n_gradients)
    basis = manifold.tangent_basis(state.x, seed)
    fd = extrinsic_fd_gradient if cfg.scheme == EXT_RFD else intrinsic_fd_gradient
    est = fd(obj, manifold, state.x, state.f_x, h, basis, state.counter,
             basis_seed=seed)
    state.n_gradients += 1
    return est


def step(state, obj, manifold, cfg):
    """Advance the solver by one iteration; returns (state, record).

    The state is updated in place.  sigma/tau/h logged in the record
    are the values at the start of the iteration; fe/re are cumulative
    totals after it.
    """
    sigma_in, tau_in = state.sigma, state.tau
    eps = cfg.epsilon

    if state.cached is None:
        est = _fd_gradient(cfg, obj, manifold, state)
        if est.norm < 0.8 * eps:          # strict, per the update rule
            state.tau *= 2.0
            if cfg.scheme == DFQRM:
                state.sigma = state.tau
            state.cached = None
            return _finish(state, obj, manifold, cfg, BRANCH_U1,
                           sigma_in, tau_in, est)
    else:
        est = state.cached

    # sufficient-decrease test at stepsize 1/sigma
    trial = manifold.retract(state.x, (-1.0 / state.sigma) * est.g)
    state.counter.re += 1
    f_trial = obj(trial)
    state.counter.fe += 1
    if not math.isfinite(f_trial):
        raise SolverAbort(
            f"non-finite objective at trial point (iteration {state.k}, "
            f"sigma={state.sigma:g})")

    if state.f_x - f_trial >= est.norm ** 2 / (4.0 * state.sigma):
        branch = BRANCH_S
        state.x = trial
        state.f_x = f_trial
        state.sigma /= 2.0
        if cfg.scheme == DFQRM:
            state.tau = state.sigma
        state.cached = None
        if f_trial < state.best_f:
            state.best_f = f_trial
            state.best_x = trial
    else:
        state.sigma *= 2.0
        if state.sigma > state.tau:
            branch = BRANCH_U2
            state.tau *= 2.0
            state.cached = None
        else:
            branch = BRANCH_U3
            state.cached = est
    return _finish(state, obj, manifold, cfg, branch, sigma_in, tau_in, est)


def _finish(state, obj, manifold, cfg, branch, sigma_in, tau_in, est):
    exact = None
    if obj.euclidean_gradient is not None:
        exact = float(np.linalg.norm(obj.riemannian_gradient(manifold, state.x)))
    rec = IterationRecord(
        k=state.k, branch=branch, f=state.f_x, sigma=sigma_in, tau=tau_in,
        h=est.h, gnorm=est.norm, fe=state.counter.fe, re=state.counter.re,
        exact_gnorm=exact)
    state.k += 1
    return state, rec


def run(obj, manifold, x0, cfg, problem=""):
    """Run the configured solver from x0 until a stopping rule fires.

    Stopping rules: the function-evaluation budget is exhausted; a U1
    iteration fires with h small enough that, given the supplied
    Lipschitz reference, the exact gradient norm is certified <= eps;
    or ``stall_limit`` consecutive U1 iterations occur.
    """
    x0 = manifold.check_point(x0)
    if cfg.scheme == EXT_RFD and not obj.extrinsic_evaluable:
        raise ConfigError(
            "ext-rfd requires an objective evaluable off the manifold")

    d = manifold.dim
    budget = cfg.budget_fe if cfg.budget_fe is not None else 100 * (d + 1)
    counter = EvalCounter()
    f0 = obj(x0)
    counter.fe += 1
    if not math.isfinite(f0):
        raise SolverAbort("non-finite objective at the initial point")

    sigma0 = cfg.sigma0
    tau0 = cfg.sigma0 if cfg.scheme == DFQRM else cfg.tau0
    state = SolverState(k=0, x=x0, f_x=f0, sigma=sigma0, tau=tau0,
                        counter=counter, best_f=f0, best_x=x0)
    records: List[IterationRecord] = []
    reason = STOP_BUDGET
    consecutive_u1 = 0
    t_start = time.perf_counter()

    while True:
        if counter.fe >= budget:
            reason = STOP_BUDGET
            break
        state, rec = step(state, obj, manifold, cfg)
        rec.wall = time.perf_counter() - t_start
        records.append(rec)
        if rec.branch == BRANCH_U1:
            consecutive_u1 += 1
            if cfg.lipschitz_ref is not None:
                c_stop = 0.5 * math.sqrt(d) * cfg.lipschitz_ref
                if rec.h <= cfg.epsilon / (5.0 * c_stop):
                    reason = STOP_EPSILON
                    break
            if consecutive_u1 >= cfg.stall_limit:
                reason = STOP_STALL
                break
        else:
            consecutive_u1 = 0

    return RunTrace(
        config=cfg, problem=problem, dim=d, f0=f0, records=records,
        termination_reason=reason, x_final=state.x, f_final=state.f_x,
        fe_total=counter.fe, re_total=counter.re,
        sigma_final=state.sigma, tau_final=state.tau, budget_fe=budget)


def classify_trace(trace):
    """Branch counts {S, U1, U2, U3} of a completed trace."""
    counts = {BRANCH_S: 0, BRANCH_U1: 0, BRANCH_U2: 0, BRANCH_U3: 0}
    for rec in trace.records:
        counts[rec.branch] += 1
    return counts


def theorem1_bound(tau_max, tau0, f0, f_low, epsilon, d, scheme=INT_RFD):
    """Worst-case (fe, re) bounds given a cap on the conservative estimate.

    The iteration bound is 2*log2(tau_max/tau0) + 12.5*tau_max*(f0-f_low)
    / eps^2; per iteration the intrinsic scheme spends at most d+2
    function evaluations and d+1 retractions, the extrinsic one d+2 and 1.
    """
    if tau_max < tau0 or tau0 <= 0:
        raise ValueError("need tau_max >= tau0 > 0")
    if f0 < f_low:
        raise ValueError("need f0 >= f_low")
    if epsilon <= 0 or d < 1:
        raise ValueError("need epsilon > 0 and d >= 1")
    iters = (2.0 * math.log2(tau_max / tau0)
             + 12.5 * tau_max * (f0 - f_low) / epsilon ** 2)
    fe_bound = (d + 2) * iters
    re_bound = iters if scheme == EXT_RFD else (d + 1) * iters
    return fe_bound, re_bound


def with_budget(cfg, budget):
    """Copy of cfg with the evaluation budget pinned."""
    return replace(cfg, budget_fe=budget)
