"""Seeded synthetic factor markets with Variance Gamma sources."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import pandas as pd

from .data import DataMatrix
from .distributions import MixedTSParams, sample_variance_gamma


@dataclass(frozen=True)
class SyntheticMarket:
    data: DataMatrix
    mixing: np.ndarray
    source_params: tuple[MixedTSParams, ...]
    sources: np.ndarray


def vg_source(a: float, mu: float) -> MixedTSParams:
    """Zero-mean Variance Gamma law with Gamma shape ``a`` and unit variance."""
    # var = a s^2 + mu^2 a s^4 = 1
    s2 = 1.0 / a if mu == 0 else (-a + np.sqrt(a * a + 4 * mu * mu * a)) / (2 * mu * mu * a)
    return MixedTSParams(
        mu0=-mu * a * s2, mu=mu, sigma=float(np.sqrt(s2)), a=a, alpha=2.0, lambda_plus=1.0, lambda_minus=1.0
    )


def random_mixing(n: int, rng: np.random.Generator, spread: tuple[float, float] = (0.5, 1.5)) -> np.ndarray:
    """Well-conditioned mixing: orthogonal x diag(U(spread)) x orthogonal."""
    q1, _ = np.linalg.qr(rng.standard_normal((n, n)))
    q2, _ = np.linalg.qr(rng.standard_normal((n, n)))
    return q1 @ np.diag(rng.uniform(*spread, size=n)) @ q2


def market_mixing(n: int, rng: np.random.Generator, daily_vol: float = 0.01) -> np.ndarray:
    """One common source loading on every factor plus one own source each.

    Factor 0 carries the common source only; the others mix common and own
    risk, giving correlated factors with unequal volatilities.
    """
    a = np.zeros((n, n))
    a[:, 0] = rng.uniform(0.6, 1.2, size=n)
    idx = np.arange(1, n)
    a[idx, idx] = rng.uniform(0.4, 1.6, size=n - 1)
    return a * daily_vol


def make_market(
    n: int = 10,
    t: int = 750,
    seed: int = 42,
    *,
    shape: float = 0.5,
    mu: float = -0.3,
    mixing: str = "market",
    drift: float = 2e-4,
) -> SyntheticMarket:
    """Factor returns F = A S + drift from independent unit-variance VG sources."""
    rng = np.random.default_rng(seed)
    params = tuple(vg_source(shape, mu) for _ in range(n))
    s = np.vstack([sample_variance_gamma(p, t, rng) for p in params])
    if mixing == "market":
        a = market_mixing(n, rng)
    elif mixing == "random":
        a = random_mixing(n, rng)
    else:
        raise ValueError(f"unknown mixing {mixing!r}")
    f = a @ s + drift
    labels = tuple(f"F{i + 1}" for i in range(n))
    dates = tuple(pd.bdate_range("2011-01-03", periods=t).strftime("%Y-%m-%d"))
    return SyntheticMarket(DataMatrix(f, labels, dates), a, params, s)
