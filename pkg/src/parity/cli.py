"""
Command-line front end: ``parity <command> [options]``.

Commands: fit, ica, decompose, optimize, backtest, risk-curve.  Settings come
from an optional JSON config file (``--config``); command-line flags
override file values.  Outputs are written under ``--out``.

Exit codes: 0 success, 1 usage or configuration error, 2 data error,
3 numerical non-convergence (outputs are still written).
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import warnings
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from .backtest import STRATEGIES, WindowSpec, run_backtest
from .comoments import Mode, build_comoments
from .data import DataError, DataMatrix, ingest_csv
from .distributions import FitResult, MixedTSParams, central_moments, es_alpha, fit, var_alpha
from .ica import fastica
from .optimizer import RiskParityProblem, gini, solve
from .riskmeasures import (
    EdgeworthWarning,
    Measure,
    empirical_robust_es,
    historical_decomposition,
    historical_es,
    historical_var,
    parametric_report,
)

log = logging.getLogger("parity")

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NONCONVERGED = 0, 1, 2, 3
PARAMETRIC = ("volatility", "mVaR", "mES")


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    input: str | None = None
    date_column: str | None = None
    columns: list[str] | None = None
    prices: bool = False
    min_rows: int = 100
    levels: list[float] = field(default_factory=lambda: [0.05])
    measures: list[str] = field(default_factory=lambda: list(PARAMETRIC))
    in_sample: int = 250
    out_sample: int = 50
    step: int | None = None
    mode: str = Mode.EXACT_INDEPENDENT.value
    seed: int = 42
    out: str = "out"
    weights: list[float] | None = None
    strategies: list[str] = field(default_factory=lambda: list(STRATEGIES))
    benchmark_weights: list[float] | None = None
    n_grid: int = 2**14
    max_evals: int = 3000
    max_restarts: int = 5
    robust_alpha1_ratio: float = 0.2
    robust_alpha2: float | None = None
    params: str | None = None

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        d = dict(d)
        window = d.pop("window", None)
        unknown = sorted(set(d) - {f.name for f in fields(cls)})
        if unknown:
            raise ConfigError(f"unknown config keys: {unknown}")
        cfg = cls(**d)
        if window:
            cfg.in_sample = window.get("in_sample", cfg.in_sample)
            cfg.out_sample = window.get("out_sample", cfg.out_sample)
            cfg.step = window.get("step", cfg.step)
        return cfg

    def validate(self) -> "RunConfig":
        if not self.levels or any(not 0 < a < 0.5 for a in self.levels):
            raise ConfigError(f"alpha levels must lie in (0, 0.5): {self.levels}")
        for m in self.measures:
            if m not in PARAMETRIC:
                raise ConfigError(f"unknown measure {m!r}; choose from {PARAMETRIC}")
        for s in self.strategies:
            if s not in STRATEGIES:
                raise ConfigError(f"unknown strategy {s!r}; choose from {STRATEGIES}")
        try:
            Mode(self.mode)
        except ValueError:
            raise ConfigError(f"unknown mode {self.mode!r}") from None
        if not 0 < self.robust_alpha1_ratio < 1:
            raise ConfigError("robust_alpha1_ratio must lie in (0, 1)")
        if self.robust_alpha2 is not None and not max(self.levels) < self.robust_alpha2 < 1:
            raise ConfigError("robust_alpha2 must exceed every alpha level and be < 1")
        try:
            WindowSpec(self.in_sample, self.out_sample, self.step)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        return self


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise ConfigError(message)


def _levels(text: str) -> list[float]:
    """'0.01,0.05' or a grid 'start:stop:step' (inclusive)."""
    try:
        if ":" in text:
            a, b, s = (float(x) for x in text.split(":"))
            n = int(round((b - a) / s)) + 1
            return [round(a + i * s, 12) for i in range(n)]
        return [float(x) for x in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad alpha list {text!r}") from None


def _floats(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad number list {text!r}") from None


def _names(text: str) -> list[str]:
    return [x.strip() for x in text.split(",") if x.strip()]


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file; flags override its values")
    common.add_argument("--input", help="CSV with ISO-8601 dates first and one column per series")
    common.add_argument("--date-column")
    common.add_argument("--columns", type=_names, help="comma-separated subset of series")
    common.add_argument("--prices", action="store_true", default=None, help="input holds prices; use log returns")
    common.add_argument("--min-rows", type=int)
    common.add_argument("--seed", type=int)
    common.add_argument("--out", help="output directory")
    common.add_argument("--mode", choices=[m.value for m in Mode])
    common.add_argument("--n-grid", type=int, help="FFT grid size for likelihood evaluation")
    common.add_argument("--max-evals", type=int, help="likelihood evaluations per fit")
    common.add_argument("-v", "--verbose", action="store_true")

    p = _Parser(prog="parity", description="Risk parity with ICA factors and MixedTS marginals.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sub.add_parser("fit", parents=[common], help="fit a MixedTS law to each series")
    sub.add_parser("ica", parents=[common], help="independent components of the factor returns")

    dec = sub.add_parser("decompose", parents=[common], help="risk contributions of a given portfolio")
    dec.add_argument("--weights", type=_floats, help="portfolio weights (default: equal)")
    dec.add_argument("--levels", type=_levels)
    dec.add_argument("--measures", type=_names)

    opt = sub.add_parser("optimize", parents=[common], help="equal-risk-contribution weights")
    opt.add_argument("--levels", type=_levels)
    opt.add_argument("--measures", type=_names)
    opt.add_argument("--max-restarts", type=int)

    bt = sub.add_parser("backtest", parents=[common], help="rolling out-of-sample backtest")
    bt.add_argument("--in-sample", type=int)
    bt.add_argument("--out-sample", type=int)
    bt.add_argument("--step", type=int)
    bt.add_argument("--levels", type=_levels)
    bt.add_argument("--strategies", type=_names)
    bt.add_argument("--benchmark-weights", type=_floats)
    bt.add_argument("--max-restarts", type=int)

    rc = sub.add_parser("risk-curve", parents=[common], help="VaR/ES against alpha, historical and MixedTS")
    rc.add_argument("--levels", type=_levels, help="alpha grid, e.g. 0.01:0.1:0.01")
    rc.add_argument("--params", help="MixedTS parameter JSON (skips fitting)")
    rc.add_argument("--robust-alpha1-ratio", type=float, help="trim point of the robust ES as a fraction of alpha")
    rc.add_argument("--robust-alpha2", type=float, help="average VaR over (alpha, this level) instead")
    return p


def load_config(args: argparse.Namespace) -> RunConfig:
    base = {}
    if args.config:
        try:
            base = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
        if not isinstance(base, dict):
            raise ConfigError("config file must hold a JSON object")
    cfg = RunConfig.from_dict(dict(base))
    for f in fields(RunConfig):
        v = getattr(args, f.name, None)
        if v is not None:
            setattr(cfg, f.name, v)
    if args.command == "risk-curve" and getattr(args, "levels", None) is None and "levels" not in base:
        cfg.levels = _levels("0.01:0.1:0.01")
    cfg.validate()
    if cfg.input is None and not (args.command == "risk-curve" and cfg.params):
        raise ConfigError("no input file given (--input or config 'input')")
    return cfg


def _load_data(cfg: RunConfig) -> DataMatrix:
    data = ingest_csv(cfg.input, date_column=cfg.date_column, columns=cfg.columns, prices=cfg.prices, min_rows=cfg.min_rows)
    if data.dropped_rows:
        log.info("dropped %d rows with missing values", data.dropped_rows)
    return data


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, default=float) + "\n")


def _fit_sources(sources, cfg: RunConfig) -> list[FitResult]:
    return [fit(s, n_grid=cfg.n_grid, max_evals=cfg.max_evals) for s in sources]


def _model(data: DataMatrix, cfg: RunConfig, out: Path):
    model = fastica(data, seed=cfg.seed)
    fits = _fit_sources(model.sources, cfg)
    com = build_comoments(model, [central_moments(f.params) for f in fits], cfg.mode)
    model.mixing_to_csv(out / "mixing.csv")
    com.to_json(out / "comoments.json")
    _write_json(out / "source_fits.json", [_fit_record(f"S{j + 1}", f) for j, f in enumerate(fits)])
    ok = model.all_converged and all(f.converged for f in fits)
    return model, fits, com, ok


def _fit_record(name: str, res: FitResult) -> dict:
    m = central_moments(res.params)
    return {
        "series": name,
        "params": res.params.to_dict(),
        "log_likelihood": res.log_likelihood,
        "converged": res.converged,
        "iterations": res.iterations,
        "moments": {"mean": m.mean, "variance": m.variance, "skew": m.skew, "kurt": m.kurt},
    }


# --- commands --------------------------------------------------------------------


def cmd_fit(cfg: RunConfig, out: Path) -> int:
    data = _load_data(cfg)
    records, ok = [], True
    for name, row in zip(data.labels, data.values):
        res = fit(row, n_grid=cfg.n_grid, max_evals=cfg.max_evals)
        ok &= res.converged
        records.append(_fit_record(name, res))
        print(f"{name:<12} LL={res.log_likelihood:12.4f}  alpha={res.params.alpha:.4f}  converged={res.converged}")
    _write_json(out / "fit.json", records)
    return EXIT_OK if ok else EXIT_NONCONVERGED


def cmd_ica(cfg: RunConfig, out: Path) -> int:
    data = _load_data(cfg)
    model = fastica(data, seed=cfg.seed)
    model.mixing_to_csv(out / "mixing.csv")
    with open(out / "sources.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["date"] + [f"S{j + 1}" for j in range(model.n)])
        dates = data.dates or tuple(range(data.t))
        for t, d in enumerate(dates):
            w.writerow([d] + [f"{v:.10g}" for v in model.sources[:, t]])
    _write_json(
        out / "ica.json",
        {
            "iterations": list(model.iterations),
            "converged": list(model.converged),
            "gaussian_like": list(model.gaussian_like),
            "unmixing": model.unmixing.tolist(),
        },
    )
    print(f"{model.n} components, converged: {model.all_converged}")
    for j, g in enumerate(model.gaussian_like):
        if g:
            print(f"  S{j + 1} looks Gaussian (not identifiable)")
    return EXIT_OK if model.all_converged else EXIT_NONCONVERGED


def cmd_decompose(cfg: RunConfig, out: Path) -> int:
    data = _load_data(cfg)
    beta = np.full(data.n, 1.0 / data.n) if cfg.weights is None else np.asarray(cfg.weights, dtype=float)
    if beta.shape != (data.n,):
        raise ConfigError(f"{beta.size} weights for {data.n} series")
    _, _, com, ok = _model(data, cfg, out)
    reports = []
    port = np.column_stack([data.values.T @ beta, data.values.T])
    for m in cfg.measures:
        levels = [None] if m == "volatility" else cfg.levels
        for a in levels:
            reports.append(parametric_report(com, beta, m, a))
    for a in cfg.levels:
        for m in (Measure.HISTVAR, Measure.HISTES):
            try:
                reports.append(historical_decomposition(port, beta, a, m))
            except ValueError as exc:
                log.warning("%s at %g skipped: %s", m.value, a, exc)
    for r in reports:
        print(r.table(data.labels))
        print()
    _write_json(out / "decompose.json", {"weights": beta.tolist(), "labels": list(data.labels), "reports": [r.to_dict() for r in reports]})
    return EXIT_OK if ok else EXIT_NONCONVERGED


def cmd_optimize(cfg: RunConfig, out: Path) -> int:
    data = _load_data(cfg)
    _, _, com, ok = _model(data, cfg, out)
    results = []
    rows = []
    for m in cfg.measures:
        levels = [None] if m == "volatility" else cfg.levels
        for a in levels:
            sol = solve(RiskParityProblem(com, m, a if a is not None else 0.05, max_restarts=cfg.max_restarts), seed=cfg.seed)
            ok &= sol.converged
            tag = m if a is None else f"{m}@{a:g}"
            results.append({"measure": m, "level": a, "gini": gini(sol.beta), **sol.to_dict()})
            rows.append([tag] + [f"{100 * b:.4f}" for b in sol.beta])
            print(f"{tag:<14}" + " ".join(f"{n}={100 * b:6.2f}%" for n, b in zip(data.labels, sol.beta)))
    with open(out / "weights.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["portfolio"] + list(data.labels))
        w.writerows(rows)
    _write_json(out / "optimize.json", {"labels": list(data.labels), "solutions": results})
    return EXIT_OK if ok else EXIT_NONCONVERGED


def cmd_backtest(cfg: RunConfig, out: Path) -> int:
    data = _load_data(cfg)
    res = run_backtest(
        data,
        WindowSpec(cfg.in_sample, cfg.out_sample, cfg.step),
        cfg.strategies,
        benchmark_weights=cfg.benchmark_weights,
        level=cfg.levels[0],
        mode=cfg.mode,
        seed=cfg.seed,
        fit_max_evals=cfg.max_evals,
        n_grid=cfg.n_grid,
        max_restarts=cfg.max_restarts,
    )
    res.to_csv(out)
    stats = res.global_stats()
    print(f"{len(res.completed)}/{len(res.windows)} windows completed")
    for s, v in stats.items():
        print(f"{s:<14} mean={v['mean']:.6e}  std={v['std']:.6e}")
    for f in res.flags:
        print("flag:", f)
    bad = len(res.completed) < len(res.windows) or any("optimize" in f for f in res.flags)
    return EXIT_NONCONVERGED if bad else EXIT_OK


def risk_curve(sample, params: MixedTSParams, levels, alpha1_ratio: float = 0.2, alpha2: float | None = None) -> list[dict]:
    """Rows of alpha, historical/MixedTS VaR and ES, and the trimmed ES.

    By default the trimmed ES averages VaR_u over u in
    (alpha1_ratio * alpha, alpha), leaving out observations beyond the lower
    quantile.  With ``alpha2`` set it averages over (alpha, alpha2) instead.
    """
    rows = []
    for a in levels:
        lo, hi = (a, alpha2) if alpha2 is not None else (alpha1_ratio * a, a)
        rows.append(
            {
                "alpha": a,
                "hist_var": historical_var(sample, a),
                "mixedts_var": var_alpha(a, params),
                "hist_es": historical_es(sample, a),
                "mixedts_es": es_alpha(a, params),
                "robust_es": empirical_robust_es(sample, lo, hi),
            }
        )
    return rows


def cmd_risk_curve(cfg: RunConfig, out: Path) -> int:
    data = _load_data(cfg)
    if data.n != 1:
        raise ConfigError("risk-curve needs a single series (use --columns)")
    x = data.values[0]
    ok = True
    if cfg.params:
        params = MixedTSParams.from_json(Path(cfg.params).read_text())
    else:
        res = fit(x, n_grid=cfg.n_grid, max_evals=cfg.max_evals)
        params, ok = res.params, res.converged
        _write_json(out / "fit.json", [_fit_record(data.labels[0], res)])
    rows = risk_curve(x, params, cfg.levels, cfg.robust_alpha1_ratio, cfg.robust_alpha2)
    keys = list(rows[0])
    with open(out / "risk_curve.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(keys)
        for r in rows:
            w.writerow([f"{r[k]:.10g}" for k in keys])
    print(" ".join(f"{k:>12}" for k in keys))
    for r in rows:
        print(" ".join(f"{r[k]:12.6g}" for k in keys))
    return EXIT_OK if ok else EXIT_NONCONVERGED


COMMANDS = {
    "fit": cmd_fit,
    "ica": cmd_ica,
    "decompose": cmd_decompose,
    "optimize": cmd_optimize,
    "backtest": cmd_backtest,
    "risk-curve": cmd_risk_curve,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
        cfg = load_config(args)
        out = Path(cfg.out)
        out.mkdir(parents=True, exist_ok=True)
        _write_json(out / "config.json", asdict(cfg))
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", EdgeworthWarning)
            return COMMANDS[args.command](cfg, out)
    except ConfigError as exc:
        print(f"parity: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"parity: data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
