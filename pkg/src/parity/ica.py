"""
Independent component analysis of factor returns, F = A S.

Deflation FastICA with the log-cosh contrast on symmetrically whitened data.
Sign and order of the recovered sources are fixed so results are
reproducible: each source gets nonpositive sample skewness and sources are
sorted by decreasing excess kurtosis.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import stats

from .data import DataError, DataMatrix

__all__ = ["Whitener", "ICAModel", "center_whiten", "fastica", "amari_error"]


@dataclass(frozen=True)
class Whitener:
    mean: np.ndarray
    matrix: np.ndarray  # Sigma^{-1/2}
    inverse: np.ndarray  # Sigma^{1/2}

    def apply(self, x: np.ndarray) -> np.ndarray:
        return self.matrix @ (x - self.mean[:, None])

    def undo(self, z: np.ndarray) -> np.ndarray:
        return self.inverse @ z + self.mean[:, None]


@dataclass(frozen=True)
class ICAModel:
    mixing: np.ndarray
    unmixing: np.ndarray
    sources: np.ndarray
    whitener: Whitener
    iterations: tuple[int, ...]
    converged: tuple[bool, ...]
    gaussian_like: tuple[bool, ...]
    labels: tuple[str, ...]

    @property
    def n(self) -> int:
        return self.mixing.shape[0]

    @property
    def mean(self) -> np.ndarray:
        return self.whitener.mean

    @property
    def all_converged(self) -> bool:
        return all(self.converged)

    def reconstruct(self) -> np.ndarray:
        """Centered data rebuilt from mixing and sources."""
        return self.mixing @ self.sources

    def mixing_to_csv(self, path: str | Path) -> None:
        """Mixing matrix, one row per series, 10 significant digits."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["series"] + [f"S{j + 1}" for j in range(self.n)])
            for name, row in zip(self.labels, self.mixing):
                w.writerow([name] + [f"{v:.10g}" for v in row])


def center_whiten(data: DataMatrix) -> tuple[np.ndarray, Whitener]:
    """Center rows and apply Sigma^{-1/2}; the output has identity covariance."""
    data.validate()
    x = data.values
    mean = x.mean(axis=1)
    cov = np.cov(x)
    evals, evecs = np.linalg.eigh(cov)
    if evals[0] <= 1e-12 * evals[-1]:
        v = np.abs(evecs[:, 0])
        names = [data.labels[i] for i in np.flatnonzero(v > 0.1 * v.max())]
        raise DataError(f"rank-deficient covariance; collinear series: {names}")
    k = (evecs / np.sqrt(evals)) @ evecs.T
    k_inv = (evecs * np.sqrt(evals)) @ evecs.T
    white = Whitener(mean=mean, matrix=k, inverse=k_inv)
    return white.apply(x), white


def _sym_orthonormalize(w: np.ndarray) -> np.ndarray:
    evals, evecs = np.linalg.eigh(w @ w.T)
    return (evecs / np.sqrt(evals)) @ evecs.T @ w


def fastica(
    data: DataMatrix,
    seed: int = 42,
    *,
    max_iter: int = 500,
    tol: float = 1e-9,
    gaussian_pvalue: float = 0.01,
) -> ICAModel:
    """Deflation FastICA with g(y) = tanh(y).

    A component converges when |<w_new, w_old>| > 1 - tol.  Components that
    hit ``max_iter`` are flagged in ``converged``; components whose
    Jarque-Bera p-value exceeds ``gaussian_pvalue`` are flagged in
    ``gaussian_like`` (ICA cannot identify Gaussian directions).
    """
    z, white = center_whiten(data)
    n, t = z.shape
    rng = np.random.default_rng(seed)
    w_all = np.zeros((n, n))
    iters, conv = [], []
    for p in range(n):
        w = rng.standard_normal(n)
        w -= w_all[:p].T @ (w_all[:p] @ w)
        w /= np.linalg.norm(w)
        done = False
        for it in range(1, max_iter + 1):
            y = w @ z
            g = np.tanh(y)
            w_new = (z * g).mean(axis=1) - (1.0 - g * g).mean() * w
            w_new -= w_all[:p].T @ (w_all[:p] @ w_new)
            w_new /= np.linalg.norm(w_new)
            done = abs(w_new @ w) > 1.0 - tol
            w = w_new
            if done:
                break
        w_all[p] = w
        iters.append(it)
        conv.append(done)

    w_all = _sym_orthonormalize(w_all)
    s = w_all @ z
    mixing = white.inverse @ w_all.T

    # sign: nonpositive skewness; exact ties resolved by the largest loading
    skew = stats.skew(s, axis=1)
    for j in range(n):
        flip = skew[j] > 0
        if abs(skew[j]) < 1e-12:
            col = mixing[:, j]
            flip = col[np.argmax(np.abs(col))] < 0
        if flip:
            s[j] *= -1.0
            w_all[j] *= -1.0
            mixing[:, j] *= -1.0

    order = np.argsort(-stats.kurtosis(s, axis=1), kind="stable")
    s, w_all, mixing = s[order], w_all[order], mixing[:, order]
    iters = tuple(iters[i] for i in order)
    conv = tuple(conv[i] for i in order)
    gauss = tuple(bool(stats.jarque_bera(row).pvalue > gaussian_pvalue) for row in s)

    return ICAModel(
        mixing=mixing,
        unmixing=w_all @ white.matrix,
        sources=s,
        whitener=white,
        iterations=iters,
        converged=conv,
        gaussian_like=gauss,
        labels=data.labels,
    )


def amari_error(a_true: np.ndarray, a_est: np.ndarray) -> float:
    """Normalized Amari distance in [0, 1] between two mixing matrices."""
    p = np.abs(np.linalg.solve(a_est, a_true))
    n = p.shape[0]
    rows = (p.sum(axis=1) / p.max(axis=1) - 1.0).sum()
    cols = (p.sum(axis=0) / p.max(axis=0) - 1.0).sum()
    return float((rows + cols) / (2.0 * n * (n - 1)))
