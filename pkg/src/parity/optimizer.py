"""
Equal-risk-contribution weights over the long-only simplex.

The objective sum_ij (TRC_i - TRC_j)^2 is minimized by projected gradient
descent with Barzilai-Borwein trial steps and Armijo backtracking, started
from equal weights and from Dirichlet(1) draws.
"""

from __future__ import annotations

import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .comoments import CoMomentSet
from .riskmeasures import Measure, parametric_report

log = logging.getLogger(__name__)

__all__ = [
    "RiskParityProblem",
    "Solution",
    "objective",
    "project_simplex",
    "gini",
    "solve",
]

FD_STEP = 1e-6
KKT_TOL = 1e-6


@dataclass(frozen=True)
class RiskParityProblem:
    com: CoMomentSet
    measure: Measure = Measure.VOLATILITY
    level: float | None = 0.05
    tolerance: float = 1e-10  # relative to total risk squared
    max_restarts: int = 5
    max_iter: int = 5000

    def __post_init__(self):
        object.__setattr__(self, "measure", Measure(self.measure))
        if self.measure not in (Measure.VOLATILITY, Measure.MVAR, Measure.MES):
            raise ValueError(f"{self.measure.value} cannot be optimized parametrically")
        if self.n < 2:
            raise ValueError("need at least two factors")
        if self.measure is not Measure.VOLATILITY and not (self.level and 0 < self.level < 0.5):
            raise ValueError("alpha level must be in (0, 0.5)")
        if self.max_restarts < 1:
            raise ValueError("max_restarts must be at least 1")

    @property
    def n(self) -> int:
        return self.com.n

    def report(self, beta):
        return parametric_report(self.com, beta, self.measure, self.level)

    def trc(self, beta) -> np.ndarray:
        return self.report(beta).trc


@dataclass(frozen=True)
class Solution:
    beta: np.ndarray
    objective: float
    trc_dispersion: float
    restarts_used: int
    converged: bool
    total: float = float("nan")
    trc: np.ndarray | None = None
    kkt: float = float("nan")
    excluded: tuple[int, ...] = ()
    history: tuple[float, ...] = field(default=(), compare=False, repr=False)

    def to_dict(self) -> dict:
        return {
            "beta": self.beta.tolist(),
            "objective": self.objective,
            "trc_dispersion": self.trc_dispersion,
            "restarts_used": self.restarts_used,
            "converged": self.converged,
            "total": self.total,
            "trc": None if self.trc is None else self.trc.tolist(),
            "kkt": self.kkt,
            "excluded": list(self.excluded),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def project_simplex(v) -> np.ndarray:
    """Euclidean projection onto {x >= 0, sum x = 1}."""
    v = np.asarray(v, dtype=float)
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    k = np.arange(1, v.size + 1)
    rho = np.flatnonzero(u - css / k > 0)[-1]
    x = np.maximum(v - css[rho] / (rho + 1), 0.0)
    return x / x.sum()


def gini(weights) -> float:
    """Gini concentration of nonnegative weights: 0 equal, 1 single asset."""
    w = np.asarray(weights, dtype=float)
    if np.any(w < 0):
        raise ValueError("weights must be nonnegative")
    total = w.sum()
    if not total > 0:
        raise ValueError("weights must not all be zero")
    n = w.size
    if n < 2:
        raise ValueError("Gini needs at least two weights")
    # mean-difference form of (n + 1 - 2 sum (n + 1 - i) y_(i) / sum y) / (n - 1);
    # exact at both endpoints since equal weights give zero differences
    return float(np.abs(w[:, None] - w[None, :]).sum() / (2.0 * (n - 1) * total))


def _objective_value(trc: np.ndarray) -> float:
    # sum_ij (t_i - t_j)^2 = 2N sum t_i^2 - 2 (sum t_i)^2, evaluated centred
    n = trc.size
    d = trc - trc.mean()
    return float(2.0 * n * (d @ d))


def objective(problem: RiskParityProblem, beta, h: float = FD_STEP) -> tuple[float, np.ndarray]:
    """Objective and its gradient; the TRC Jacobian is a central difference."""
    b = np.asarray(beta, dtype=float)
    trc = problem.trc(b)
    n = b.size
    jac = np.empty((n, n))
    for k in range(n):
        e = np.zeros(n)
        e[k] = h
        jac[:, k] = (problem.trc(b + e) - problem.trc(b - e)) / (2.0 * h)
    d = trc - trc.mean()
    return _objective_value(trc), 4.0 * n * (jac.T @ d)


def _kkt(beta: np.ndarray, grad: np.ndarray) -> float:
    return float(np.max(np.abs(beta - project_simplex(beta - grad))))


def _descend(problem, beta0, scale, debug=False):
    """Projected gradient from one start; returns (beta, f, grad, history)."""
    b = project_simplex(beta0)
    f, g = objective(problem, b)
    f, g = f / scale, g / scale
    hist = [f]
    step = 1.0
    b_prev = g_prev = None
    for _ in range(problem.max_iter):
        if b_prev is not None:
            s, y = b - b_prev, g - g_prev
            sy = float(s @ y)
            step = float(s @ s) / sy if sy > 0 else min(step * 2.0, 1e6)
        step = min(max(step, 1e-12), 1e8)
        for _ls in range(60):
            cand = project_simplex(b - step * g)
            if debug:
                assert np.all(cand >= 0) and abs(cand.sum() - 1.0) < 1e-10, cand
            try:
                fc, gc = objective(problem, cand)
            except ArithmeticError:
                step *= 0.5
                continue
            fc, gc = fc / scale, gc / scale
            if fc <= f + 1e-4 * float(g @ (cand - b)):
                break
            step *= 0.5
        else:
            break
        moved = float(np.max(np.abs(cand - b)))
        b_prev, g_prev = b, g
        b, f, g = cand, fc, gc
        hist.append(f)
        if f < 1e-28 or moved < 1e-15:
            break
    return b, f, g, hist


def solve(
    problem: RiskParityProblem,
    seed: int = 42,
    *,
    debug: bool = False,
    workers: int = 1,
) -> Solution:
    """Multi-start projected-gradient ERC solve.

    Factors with zero variance are excluded (weight 0) and the problem is
    solved on the remaining simplex.  Among converged restarts the lowest
    objective wins; near-ties (within 1e-12 of the normalized objective) go
    to the lowest Gini index, then the lowest restart index.
    """
    com = problem.com
    var = np.diag(com.sigma)
    keep = np.flatnonzero(var > 1e-14 * var.max())
    excluded = tuple(int(i) for i in np.setdiff1d(np.arange(problem.n), keep))
    if excluded:
        log.warning("excluding zero-variance factors %s", excluded)
        if keep.size < 2:
            raise ValueError("fewer than two factors with nonzero variance")
        sub = RiskParityProblem(
            com.subset(keep), problem.measure, problem.level, problem.tolerance,
            problem.max_restarts, problem.max_iter,
        )
    else:
        sub = problem
    n = sub.n
    rng = np.random.default_rng(seed)
    starts = [np.full(n, 1.0 / n)] + [rng.dirichlet(np.ones(n)) for _ in range(sub.max_restarts - 1)]
    scale = sub.report(starts[0]).total ** 2

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            runs = list(pool.map(lambda s: _descend(sub, s, scale, debug), starts))
    else:
        runs = [_descend(sub, s, scale, debug) for s in starts]

    cands = []
    for idx, (b, f, g, hist) in enumerate(runs):
        rep = sub.report(b)
        fn = _objective_value(rep.trc) / rep.total**2
        kkt = _kkt(b, g)
        ok = fn < sub.tolerance and kkt < KKT_TOL
        cands.append((not ok, fn, idx, b, rep, kkt, hist))
    any_ok = min(c[0] for c in cands)
    best_f = min(c[1] for c in cands if c[0] == any_ok)
    pool = [c for c in cands if c[0] == any_ok and c[1] <= best_f + 1e-12]
    pool.sort(key=lambda c: (gini(c[3]), c[2]))
    failed, fn, idx, b, rep, kkt, hist = pool[0]

    beta = np.zeros(problem.n)
    beta[keep] = b
    trc = np.zeros(problem.n)
    trc[keep] = rep.trc
    disp = float((rep.trc.max() - rep.trc.min()) / rep.total)
    return Solution(
        beta=beta,
        objective=_objective_value(rep.trc),
        trc_dispersion=disp,
        restarts_used=len(starts),
        converged=not failed,
        total=rep.total,
        trc=trc,
        kkt=kkt,
        excluded=excluded,
        history=tuple(hist),
    )
