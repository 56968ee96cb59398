"""Acceptance suite: one check per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v -s`` (or plain ``pytest``; the
lines are written straight to the terminal either way).
"""

import math
import time
import warnings

import numpy as np
import pytest
from scipy import integrate, stats

from parity.backtest import ERC_STRATEGIES, WindowSpec, run_backtest
from parity.comoments import build_comoments, cross_term_tensor
from parity.distributions import (
    MixedTSParams,
    MomentSet,
    central_moments,
    cumulant_oracle,
    mixedts_log_charfn,
    variance_gamma_charfn,
)
from parity.optimizer import RiskParityProblem, gini, solve
from parity.riskmeasures import (
    EdgeworthWarning,
    edgeworth_tail_integrals,
    empirical_robust_es,
    historical_es,
    modified_es,
    modified_var,
    trc_volatility,
)
from parity.synthetic import make_market, vg_source
from tests.reference import SOURCE_FITS, mc_comoments, source_fit
from tests.test_comoments import hand_cross_terms_n2


@pytest.fixture
def verdict(capsys):
    def report(name, ok, detail):
        with capsys.disabled():
            print(f"\n{'PASS' if ok else 'FAIL'} criterion {name}: {detail}")
        assert ok, detail

    return report


def parametric(com, level):
    return {
        "volatility": lambda b: trc_volatility(com, b),
        "mVaR": lambda b: modified_var(com, b, level),
        "mES": lambda b: modified_es(com, b, level),
    }


def fitted_market(n=10, seed=0):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(n, n)) * 0.01
    return build_comoments(a, [central_moments(source_fit(j)) for j in range(n)])


def test_c01_moment_identities(verdict):
    t0 = time.perf_counter()
    worst = 0.0
    for j in range(len(SOURCE_FITS["mu0"])):
        p = source_fit(j)
        m = central_moments(p)
        k = [cumulant_oracle(p, r) for r in (1, 2, 3, 4)]
        ref = [k[0], k[1], k[2], k[3] + 3 * k[1] ** 2]
        got = [m.mean, m.variance, m.m3, m.m4]
        worst = max(worst, max(abs(g - r) / abs(r) for g, r in zip(got, ref)))
    dt = time.perf_counter() - t0
    verdict("1", worst < 1e-6 and dt < 5, f"max rel err {worst:.2e} over 10 columns x orders 1-4, {dt:.2f} s")


def test_c02_special_cases(verdict):
    u = np.linspace(-50, 50, 1001)
    worst = 0.0
    for mu0, mu, sigma, a in [(0.1, -0.2, 0.7, 2.0), (0.0, 0.3, 0.4, 6.0), (-0.5, 0.0, 1.1, 0.8)]:
        p = MixedTSParams(mu0, mu, sigma, a, 2.0, 1.3, 2.1)
        mts = np.exp(mixedts_log_charfn(u, p))
        vg = variance_gamma_charfn(u, mu0, mu, sigma, a)
        worst = max(worst, float(np.max(np.abs(mts - vg))))
    a = 1e6
    var = central_moments(MixedTSParams(0.0, 0.0, 1 / math.sqrt(a), a, 1.5, 1.0, 2.0)).variance
    ok = worst < 1e-10 and abs(var - 1) < 1e-3
    verdict("2", ok, f"max |CF diff| {worst:.2e} on 1001 points; large-a variance {var:.8f}")


def test_c03_comoment_oracle(verdict):
    t0 = time.perf_counter()
    rng = np.random.default_rng(42)
    n = 5
    params = [vg_source(a, mu) for a, mu in zip([0.8, 1.0, 1.5, 2.0, 3.0], [-0.5, -0.3, 0.2, -0.1, 0.4])]
    a = rng.normal(size=(n, n))
    ms = [central_moments(p) for p in params]
    exact = build_comoments(a, ms, "exact_independent")
    diag = build_comoments(a, ms, "paper_diagonal")
    mc = mc_comoments(a, params, 10_000_000, seed=42)
    tensors = {2: exact.sigma, 3: exact.m3_tensor(), 4: exact.m4_tensor()}
    z = {key: abs(est - tensors[len(key)][key]) / se for key, (est, se) in mc.items()}
    worst_key = max(z, key=z.get)
    misses = [k for k, v in z.items() if v >= 3]
    v = np.array([m.variance for m in ms])
    cross_gap = float(np.max(np.abs(exact.m4_tensor() - diag.m4_tensor() - cross_term_tensor(a, v))))
    a2 = rng.normal(size=(2, 2))
    ms2 = ms[:2]
    d2 = build_comoments(a2, ms2, "exact_independent").m4_tensor() - build_comoments(a2, ms2, "paper_diagonal").m4_tensor()
    hand_gap = float(np.max(np.abs(d2 - hand_cross_terms_n2(a2, v[:2]))))
    dt = time.perf_counter() - t0
    ok = not misses and cross_gap < 1e-10 and hand_gap < 1e-10 and dt < 60
    verdict(
        "3",
        ok,
        f"{len(z)} MC entries, {len(misses)} beyond 3 SE (worst {z[worst_key]:.2f} SE at {worst_key}); "
        f"diagonal gap vs cross-term tensor {cross_gap:.1e}, vs hand expansion (N=2) {hand_gap:.1e}; {dt:.1f} s",
    )


def test_c04_gradients(verdict):
    com = fitted_market()
    rng = np.random.default_rng(4)
    worst = {m: 0.0 for m in ("volatility", "mVaR", "mES")}
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", EdgeworthWarning)
        for _ in range(100):
            b = rng.dirichlet(np.ones(com.n))
            h = 1e-5 * np.linalg.norm(b)
            for name, f in parametric(com, 0.05).items():
                mrc = f(b).mrc
                fd = np.array([(f(b + h * e).total - f(b - h * e).total) / (2 * h) for e in np.eye(com.n)])
                worst[name] = max(worst[name], np.linalg.norm(fd - mrc) / np.linalg.norm(mrc))
    ok = all(v < 1e-6 for v in worst.values())
    verdict("4", ok, "max rel FD gap " + ", ".join(f"{k} {v:.1e}" for k, v in worst.items()) + " over 100 points")


def test_c05_euler(verdict):
    com = fitted_market(seed=5)
    rng = np.random.default_rng(5)
    worst = 0.0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", EdgeworthWarning)
        for _ in range(100):
            b = rng.dirichlet(np.ones(com.n))
            for f in parametric(com, 0.05).values():
                r = f(b)
                worst = max(worst, abs(r.total - r.trc.sum()) / abs(r.total))
    verdict("5", worst < 1e-8, f"max |total - sum TRC| / |total| = {worst:.1e} over 100 weights x 3 measures")


def test_c06_two_asset_erc(verdict):
    rng = np.random.default_rng(6)
    worst = 0.0
    for _ in range(20):
        s1, s2 = rng.uniform(0.05, 5.0, size=2)
        com = build_comoments(np.eye(2), [MomentSet(0, s1**2, 0, 3 * s1**4), MomentSet(0, s2**2, 0, 3 * s2**4)])
        beta = solve(RiskParityProblem(com)).beta
        worst = max(worst, float(np.max(np.abs(beta - [s2 / (s1 + s2), s1 / (s1 + s2)]))))
    verdict("6", worst < 1e-8, f"max |beta - closed form| = {worst:.1e} over 20 pairs")


def test_c07_gini_endpoints(verdict):
    vals = [gini(np.full(n, 1 / n)) for n in (2, 5, 10, 50)]
    ones = [gini(np.eye(n)[k]) for n, k in ((2, 0), (5, 3), (10, 9), (50, 17))]
    ok = all(v == 0.0 for v in vals) and all(v == 1.0 for v in ones)
    verdict("7", ok, f"equal weights {vals}, one-hot {ones}")


def test_c08_tail_integrals(verdict):
    worst = 0.0
    for g in (-3.0, -1.645, -1.0, 0.0):
        for q in range(7):
            ref = integrate.quad(lambda z: z**q * stats.norm.pdf(z), -np.inf, g, epsabs=1e-14, epsrel=1e-13)[0]
            worst = max(worst, abs(edgeworth_tail_integrals(g, q) - ref))
    verdict("8", worst < 1e-10, f"max abs gap vs quadrature {worst:.1e} for q 0..6, 4 cut points")


def test_c09_gaussian_collapse(verdict):
    rng = np.random.default_rng(9)
    a = rng.normal(size=(4, 4))
    ms = [MomentSet(0.0, v, 0.0, 3 * v * v) for v in (1.0, 2.0, 0.5, 1.5)]
    com = build_comoments(a, ms, data_mean=np.array([0.01, 0.0, -0.02, 0.03]))
    worst = 0.0
    for _ in range(10):
        b = rng.dirichlet(np.ones(4))
        mu, sd = com.mean @ b, math.sqrt(b @ com.sigma @ b)
        for level in (0.01, 0.05, 0.1):
            z = stats.norm.ppf(level)
            worst = max(
                worst,
                abs(modified_var(com, b, level).total - (-mu - sd * z)),
                abs(modified_es(com, b, level).total - (-mu + sd * stats.norm.pdf(z) / level)),
            )
    verdict("9", worst < 1e-10, f"max gap to Gaussian VaR/ES {worst:.1e}")


@pytest.fixture(scope="module")
def backtest_run():
    market = make_market(10, 750, seed=42)
    cap = 1 / np.arange(1, 11) ** 0.65
    t0 = time.perf_counter()
    res = run_backtest(market.data, WindowSpec(250, 50), benchmark_weights=cap)
    return market, res, time.perf_counter() - t0


def test_c10a_erc_weights_close(verdict, backtest_run):
    _, res, dt = backtest_run
    gaps = []
    for w in res.completed:
        ws = [w.weights[s] for s in ERC_STRATEGIES]
        gaps.append(max(float(np.max(np.abs(x - y))) for i, x in enumerate(ws) for y in ws[i + 1 :]))
    ok = len(res.completed) == 10 and max(gaps) < 0.05 and dt < 600
    verdict("10a", ok, f"{len(res.completed)}/10 windows, max elementwise ERC gap {max(gaps):.4f}; backtest {dt:.0f} s")


def test_c10b_erc_less_concentrated(verdict, backtest_run):
    _, res, _ = backtest_run
    wins = {s: sum(w.gini[s] < w.gini["benchmark"] for w in res.completed) for s in ERC_STRATEGIES}
    cap_gini = res.completed[0].gini["benchmark"]
    ok = all(v >= 8 for v in wins.values())
    verdict("10b", ok, f"windows with ERC Gini < cap proxy Gini {cap_gini:.3f}: {wins}")


def test_c10c_historical_es_above_robust(verdict, backtest_run):
    market, res, _ = backtest_run
    samples = list(market.data.values) + [res.concatenated(s) for s in res.strategies]
    levels = np.linspace(0.01, 0.1, 10)
    checks = [historical_es(x, a) >= empirical_robust_es(x, 0.2 * a, a) for x in samples for a in levels]
    kurt = [stats.kurtosis(x) for x in market.data.values]
    verdict("10c", all(checks), f"{sum(checks)}/{len(checks)} (sample, alpha) pairs; factor excess kurtosis {min(kurt):.1f}..{max(kurt):.1f}")
