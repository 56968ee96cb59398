"""
Rolling-window out-of-sample evaluation of ERC and benchmark portfolios.

Each window runs ICA on the in-sample block, fits a MixedTS law to every
source, assembles co-moments and solves the ERC problem per measure.  The
weights are then held as a constant mix over the following out-of-sample
block, so the daily portfolio return is beta' F_t.
"""

from __future__ import annotations

import csv
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .comoments import Mode, build_comoments
from .data import DataMatrix
from .distributions import central_moments, fit
from .ica import fastica
from .optimizer import RiskParityProblem, gini, solve

log = logging.getLogger(__name__)

__all__ = ["WindowSpec", "WindowResult", "BacktestResult", "STRATEGIES", "run_backtest", "gini"]

ERC_STRATEGIES = ("volatility", "mVaR", "mES")
STRATEGIES = ("equal_weight", "benchmark") + ERC_STRATEGIES


@dataclass(frozen=True)
class WindowSpec:
    in_sample: int = 250
    out_sample: int = 50
    step: int | None = None

    def __post_init__(self):
        if self.in_sample < 100:
            raise ValueError("in_sample must be at least 100 observations")
        if self.out_sample < 1:
            raise ValueError("out_sample must be at least 1")
        if self.step is None:
            object.__setattr__(self, "step", self.out_sample)
        if self.step < 1:
            raise ValueError("step must be at least 1")

    def count(self, t: int) -> int:
        return max((t - self.in_sample) // self.step, 0)

    def bounds(self, k: int, t: int) -> tuple[int, int, int]:
        """(in-sample start, out-of-sample start, out-of-sample stop) of window k."""
        start = k * self.step
        split = start + self.in_sample
        return start, split, min(split + self.out_sample, t)


@dataclass(frozen=True)
class WindowResult:
    index: int
    start: int
    split: int
    stop: int
    weights: dict = field(default_factory=dict)
    oos_returns: dict = field(default_factory=dict)
    flags: tuple[str, ...] = ()
    ok: bool = True

    @property
    def oos_mean(self) -> dict:
        return {k: float(v.mean()) for k, v in self.oos_returns.items()}

    @property
    def gini(self) -> dict:
        return {k: gini(w) for k, w in self.weights.items()}


@dataclass(frozen=True)
class BacktestResult:
    windows: tuple[WindowResult, ...]
    strategies: tuple[str, ...]
    labels: tuple[str, ...]
    dates: tuple[str, ...] | None = None

    @property
    def completed(self) -> tuple[WindowResult, ...]:
        return tuple(w for w in self.windows if w.ok)

    def concatenated(self, strategy: str) -> np.ndarray:
        parts = [w.oos_returns[strategy] for w in self.completed]
        return np.concatenate(parts) if parts else np.empty(0)

    def global_stats(self) -> dict:
        """Mean and standard deviation of concatenated out-of-sample returns."""
        out = {}
        for s in self.strategies:
            r = self.concatenated(s)
            out[s] = {"mean": float(r.mean()), "std": float(r.std(ddof=1))} if r.size > 1 else {"mean": np.nan, "std": np.nan}
        return out

    @property
    def flags(self) -> list[str]:
        return [f"window {w.index}: {f}" for w in self.windows for f in w.flags]

    def to_csv(self, out_dir: str | Path) -> list[Path]:
        """Write windows.csv, gini.csv, weights.csv, cumulative.csv, summary.csv."""
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        paths = []

        def write(name, header, rows):
            p = out / name
            with open(p, "w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(header)
                w.writerows(rows)
            paths.append(p)

        done = self.completed
        write(
            "windows.csv",
            ["window", "start", "split", "stop"] + [f"mean_{s}" for s in self.strategies],
            [[w.index, w.start, w.split, w.stop] + [f"{w.oos_mean[s]:.10g}" for s in self.strategies] for w in done],
        )
        write(
            "gini.csv",
            ["window"] + [f"gini_{s}" for s in self.strategies],
            [[w.index] + [f"{w.gini[s]:.10g}" for s in self.strategies] for w in done],
        )
        write(
            "weights.csv",
            ["window", "strategy"] + list(self.labels),
            [[w.index, s] + [f"{x:.10g}" for x in w.weights[s]] for w in done for s in self.strategies],
        )
        rows = []
        cum = {s: 0.0 for s in self.strategies}
        for w in done:
            for i, t in enumerate(range(w.split, w.stop)):
                for s in self.strategies:
                    cum[s] += w.oos_returns[s][i]
                date = self.dates[t] if self.dates is not None else t
                rows.append([date] + [f"{cum[s]:.10g}" for s in self.strategies])
        write("cumulative.csv", ["date"] + [f"cumlog_{s}" for s in self.strategies], rows)
        stats_ = self.global_stats()
        write(
            "summary.csv",
            ["strategy", "mean", "std"],
            [[s, f"{stats_[s]['mean']:.10g}", f"{stats_[s]['std']:.10g}"] for s in self.strategies],
        )
        write("flags.csv", ["window", "flag"], [[w.index, f] for w in self.windows for f in w.flags])
        return paths


@dataclass(frozen=True)
class _Job:
    k: int
    values: np.ndarray
    labels: tuple[str, ...]
    bounds: tuple[int, int, int]
    strategies: tuple[str, ...]
    benchmark: np.ndarray | None
    level: float
    mode: str
    seed: int
    fit_max_evals: int
    n_grid: int
    max_restarts: int


def _run_window(job: _Job) -> WindowResult:
    start, split, stop = job.bounds
    x_in = DataMatrix(job.values[:, start:split], job.labels)
    x_out = job.values[:, split:stop]
    n = x_in.n
    flags = []
    weights = {}
    try:
        needs_model = any(s in ERC_STRATEGIES for s in job.strategies)
        if needs_model:
            model = fastica(x_in, seed=job.seed)
            if not model.all_converged:
                flags.append("ica: some components did not converge")
            moments = []
            for j, src in enumerate(model.sources):
                res = fit(src, n_grid=job.n_grid, max_evals=job.fit_max_evals)
                if not res.converged:
                    flags.append(f"fit: source {j + 1} hit the evaluation limit")
                moments.append(central_moments(res.params))
            com = build_comoments(model, moments, job.mode)
        for s in job.strategies:
            if s == "equal_weight":
                weights[s] = np.full(n, 1.0 / n)
            elif s == "benchmark":
                if job.benchmark is None:
                    raise ValueError("benchmark strategy needs benchmark weights")
                weights[s] = job.benchmark
            elif s in ERC_STRATEGIES:
                sol = solve(RiskParityProblem(com, s, job.level, max_restarts=job.max_restarts), seed=job.seed)
                if not sol.converged:
                    flags.append(f"optimize: {s} did not converge")
                weights[s] = sol.beta
            else:
                raise ValueError(f"unknown strategy {s!r}")
    except Exception as exc:  # skip-and-flag
        log.warning("window %d failed: %s", job.k, exc)
        return WindowResult(job.k, start, split, stop, flags=tuple(flags) + (f"failed: {exc}",), ok=False)
    oos = {s: w @ x_out for s, w in weights.items()}
    return WindowResult(job.k, start, split, stop, weights, oos, tuple(flags), True)


def run_backtest(
    data: DataMatrix,
    spec: WindowSpec,
    strategies=STRATEGIES,
    *,
    benchmark_weights=None,
    level: float = 0.05,
    mode: Mode | str = Mode.EXACT_INDEPENDENT,
    seed: int = 42,
    fit_max_evals: int = 2000,
    n_grid: int = 2**13,
    max_restarts: int = 3,
    workers: int = 1,
) -> BacktestResult:
    """Rolling backtest over floor((T - in_sample) / step) windows.

    ``data`` holds returns; convert prices with ``log_returns`` first.
    Failed windows are skipped and flagged rather than aborting the run.
    """
    strategies = tuple(strategies)
    for s in strategies:
        if s not in STRATEGIES:
            raise ValueError(f"unknown strategy {s!r}; choose from {STRATEGIES}")
    bench = None
    if benchmark_weights is not None:
        bench = np.asarray(benchmark_weights, dtype=float)
        if bench.shape != (data.n,) or np.any(bench < 0) or not bench.sum() > 0:
            raise ValueError("benchmark weights must be N nonnegative numbers")
        bench = bench / bench.sum()
    count = spec.count(data.t)
    if count < 1:
        raise ValueError(f"T={data.t} is too short for one window of {spec.in_sample}+{spec.step}")
    jobs = [
        _Job(k, data.values, data.labels, spec.bounds(k, data.t), strategies, bench, level,
             Mode(mode).value, seed, fit_max_evals, n_grid, max_restarts)
        for k in range(count)
    ]
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            windows = tuple(pool.map(_run_window, jobs))
    else:
        windows = []
        for job in jobs:
            log.info("window %d/%d", job.k + 1, count)
            windows.append(_run_window(job))
        windows = tuple(windows)
    return BacktestResult(windows, strategies, data.labels, data.dates)
