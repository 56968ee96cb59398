"""
Factor co-moments from independent sources, and portfolio moments.

With F = A S + m and independent sources S_j of variance v_j, third central
moment k3_j and fourth central moment k4_j:

    Sigma[i,k]      = sum_j a_ij a_kj v_j
    M3[i,k,l]       = sum_j a_ij a_kj a_lj k3_j
    M4[i,k,l,m]     = sum_j a_ij a_kj a_lj a_mj k4_j                 (paper_diagonal)
                    + sum_{j != j'} (a_ij a_kj a_lj' a_mj' + a_ij a_lj a_kj' a_mj'
                                     + a_ij a_mj a_kj' a_lj') v_j v_j'   (exact_independent)

M3 and M4 are stored flattened in Kronecker layout (N x N^2, N x N^3).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Sequence

import numpy as np

from .distributions import MomentSet
from .ica import ICAModel

__all__ = [
    "Mode",
    "CoMomentSet",
    "PortfolioMoments",
    "ZeroVarianceError",
    "build_comoments",
    "cross_term_tensor",
    "portfolio_moments",
]


class Mode(str, Enum):
    PAPER_DIAGONAL = "paper_diagonal"
    EXACT_INDEPENDENT = "exact_independent"


class ZeroVarianceError(ArithmeticError):
    """Portfolio variance is zero; risk contributions are undefined."""


@dataclass(frozen=True)
class CoMomentSet:
    mean: np.ndarray
    sigma: np.ndarray
    m3: np.ndarray  # N x N^2
    m4: np.ndarray  # N x N^3
    mode: Mode

    @property
    def n(self) -> int:
        return self.sigma.shape[0]

    def m3_tensor(self) -> np.ndarray:
        n = self.n
        return self.m3.reshape(n, n, n)

    def m4_tensor(self) -> np.ndarray:
        n = self.n
        return self.m4.reshape(n, n, n, n)

    def scaled(self, c: float) -> "CoMomentSet":
        """Co-moments of c * F."""
        return CoMomentSet(self.mean * c, self.sigma * c**2, self.m3 * c**3, self.m4 * c**4, self.mode)

    def subset(self, idx: Sequence[int]) -> "CoMomentSet":
        idx = np.asarray(idx)
        n, k = self.n, len(idx)
        m3 = self.m3_tensor()[np.ix_(idx, idx, idx)].reshape(k, k * k)
        m4 = self.m4_tensor()[np.ix_(idx, idx, idx, idx)].reshape(k, k**3)
        return CoMomentSet(self.mean[idx], self.sigma[np.ix_(idx, idx)], m3, m4, self.mode)

    def to_dict(self) -> dict:
        return {
            "mode": self.mode.value,
            "n": self.n,
            "mean": {"shape": [self.n], "data": self.mean.tolist()},
            "sigma": {"shape": list(self.sigma.shape), "data": self.sigma.ravel().tolist()},
            "m3": {"shape": list(self.m3.shape), "data": self.m3.ravel().tolist()},
            "m4": {"shape": list(self.m4.shape), "data": self.m4.ravel().tolist()},
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CoMomentSet":
        def arr(key):
            return np.asarray(d[key]["data"], dtype=float).reshape(d[key]["shape"])

        return cls(arr("mean"), arr("sigma"), arr("m3"), arr("m4"), Mode(d["mode"]))

    def to_json(self, path: str | Path | None = None) -> str:
        text = json.dumps(self.to_dict())
        if path is not None:
            Path(path).write_text(text)
        return text


@dataclass(frozen=True)
class PortfolioMoments:
    m2: float
    m3: float
    m4: float
    grad_m2: np.ndarray
    grad_m3: np.ndarray
    grad_m4: np.ndarray

    @property
    def skew(self) -> float:
        return self.m3 / self.m2**1.5

    @property
    def kurt(self) -> float:
        return self.m4 / self.m2**2 - 3.0

    @property
    def grad_skew(self) -> np.ndarray:
        return self.grad_m3 / self.m2**1.5 - 1.5 * self.m3 / self.m2**2.5 * self.grad_m2

    @property
    def grad_kurt(self) -> np.ndarray:
        return self.grad_m4 / self.m2**2 - 2.0 * self.m4 / self.m2**3 * self.grad_m2


def cross_term_tensor(mixing: np.ndarray, variances: np.ndarray) -> np.ndarray:
    """Pairwise-variance terms of M4 (j != j') as an N x N x N x N tensor.

    Equal to the Isserlis (Gaussian) fourth moment of Sigma minus its
    j == j' diagonal 3 sum_j a^4 v_j^2.
    """
    a = np.asarray(mixing, dtype=float)
    v = np.asarray(variances, dtype=float)
    sig = (a * v) @ a.T
    iss = (
        np.einsum("ik,lm->iklm", sig, sig)
        + np.einsum("il,km->iklm", sig, sig)
        + np.einsum("im,kl->iklm", sig, sig)
    )
    diag = 3.0 * np.einsum("ij,kj,lj,mj,j->iklm", a, a, a, a, v * v)
    return iss - diag


def build_comoments(
    model: ICAModel | np.ndarray,
    source_moments: Sequence[MomentSet],
    mode: Mode | str = Mode.EXACT_INDEPENDENT,
    data_mean: np.ndarray | None = None,
) -> CoMomentSet:
    """Assemble mean, Sigma, M3, M4 of F = A S (+ data mean).

    ``model`` is an ICAModel or a bare mixing matrix; with a bare matrix the
    data mean defaults to zero.  Source moments are used as given: variance,
    third and fourth central moments (not standardized skew/kurtosis).
    """
    mode = Mode(mode)
    if isinstance(model, ICAModel):
        a = model.mixing
        base = model.mean if data_mean is None else np.asarray(data_mean, dtype=float)
    else:
        a = np.asarray(model, dtype=float)
        base = np.zeros(a.shape[0]) if data_mean is None else np.asarray(data_mean, dtype=float)
    n = a.shape[0]
    if a.shape != (n, n):
        raise ValueError(f"mixing matrix must be square, got {a.shape}")
    if len(source_moments) != n:
        raise ValueError(f"{len(source_moments)} source moment sets for {n} sources")
    if base.shape != (n,):
        raise ValueError("data mean has the wrong length")

    mu = np.array([m.mean for m in source_moments])
    v = np.array([m.variance for m in source_moments])
    k3 = np.array([m.m3 for m in source_moments])
    k4 = np.array([m.m4 for m in source_moments])

    sigma = (a * v) @ a.T
    m3 = np.einsum("ij,kj,lj,j->ikl", a, a, a, k3)
    m4 = np.einsum("ij,kj,lj,mj,j->iklm", a, a, a, a, k4)
    if mode is Mode.EXACT_INDEPENDENT:
        m4 = m4 + cross_term_tensor(a, v)
    return CoMomentSet(
        mean=a @ mu + base,
        sigma=0.5 * (sigma + sigma.T),
        m3=m3.reshape(n, n * n),
        m4=m4.reshape(n, n**3),
        mode=mode,
    )


def portfolio_moments(com: CoMomentSet, beta) -> PortfolioMoments:
    """Central moments m2, m3, m4 of r = beta' F and their beta-gradients."""
    b = np.asarray(beta, dtype=float)
    if b.shape != (com.n,) or not np.all(np.isfinite(b)):
        raise ValueError("beta must be a finite vector of length N")
    sb = com.sigma @ b
    m2 = float(b @ sb)
    if not m2 > 0:
        raise ZeroVarianceError("portfolio variance is zero")
    bb = np.kron(b, b)
    m3b = com.m3 @ bb
    m4b = com.m4 @ np.kron(bb, b)
    return PortfolioMoments(
        m2=m2,
        m3=float(b @ m3b),
        m4=float(b @ m4b),
        grad_m2=2.0 * sb,
        grad_m3=3.0 * m3b,
        grad_m4=4.0 * m4b,
    )
