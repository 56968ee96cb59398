"""
Risk measures with Euler decompositions.

Parametric measures (volatility, modified VaR, modified ES) are positively
homogeneous of degree one in the weights, so total risk equals the sum of
the total risk contributions TRC_i = beta_i * dR/dbeta_i.  All totals are
reported as positive losses.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy import special

from .comoments import CoMomentSet, PortfolioMoments, portfolio_moments

__all__ = [
    "Measure",
    "RiskReport",
    "EdgeworthWarning",
    "trc_volatility",
    "cornish_fisher_correction",
    "modified_var",
    "edgeworth_tail_integrals",
    "modified_es",
    "parametric_report",
    "historical_decomposition",
    "historical_var",
    "historical_es",
    "empirical_robust_es",
]

# Edgeworth expansion is unreliable outside this region
SKEW_LIMIT = 2.0
KURT_LIMIT = 8.0
HIST_VAR_WINDOW = 5


class Measure(str, Enum):
    VOLATILITY = "volatility"
    MVAR = "mVaR"
    MES = "mES"
    HISTVAR = "histVaR"
    HISTES = "histES"


class EdgeworthWarning(UserWarning):
    """Skewness/kurtosis outside the region where the expansion is reliable."""


@dataclass(frozen=True)
class RiskReport:
    measure: Measure
    level: float | None
    total: float
    trc: np.ndarray
    mrc: np.ndarray
    euler_residual: float
    notes: tuple[str, ...] = field(default=(), compare=False)

    @property
    def trc_share(self) -> np.ndarray:
        return self.trc / self.total

    def to_dict(self) -> dict:
        return {
            "measure": self.measure.value,
            "level": self.level,
            "total": self.total,
            "trc": self.trc.tolist(),
            "mrc": self.mrc.tolist(),
            "euler_residual": self.euler_residual,
            "notes": list(self.notes),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    def table(self, labels=None) -> str:
        """Aligned text table of contributions with percentage shares."""
        n = len(self.trc)
        labels = list(labels) if labels is not None else [f"F{i + 1}" for i in range(n)]
        w = max(8, max(len(s) for s in labels))
        lines = [f"{self.measure.value}" + (f" at alpha={self.level:g}" if self.level else "")]
        lines.append(f"{'factor':<{w}} {'MRC':>14} {'TRC':>14} {'share %':>9}")
        for name, m, t in zip(labels, self.mrc, self.trc):
            lines.append(f"{name:<{w}} {m:>14.6e} {t:>14.6e} {100 * t / self.total:>9.3f}")
        lines.append(f"{'total':<{w}} {'':>14} {self.total:>14.6e} {100.0:>9.3f}")
        return "\n".join(lines)


def _report(measure, level, total, beta, mrc, notes=()) -> RiskReport:
    trc = beta * mrc
    return RiskReport(
        measure=Measure(measure),
        level=level,
        total=float(total),
        trc=trc,
        mrc=mrc,
        euler_residual=float(abs(total - trc.sum())),
        notes=tuple(notes),
    )


def _check_level(alpha_level: float) -> None:
    if not 0.0 < alpha_level < 0.5:
        raise ValueError(f"alpha level must be in (0, 0.5), got {alpha_level}")


def trc_volatility(com: CoMomentSet, beta) -> RiskReport:
    b = np.asarray(beta, dtype=float)
    pm = portfolio_moments(com, b)
    vol = math.sqrt(pm.m2)
    return _report(Measure.VOLATILITY, None, vol, b, 0.5 * pm.grad_m2 / vol)


def cornish_fisher_correction(z_alpha, skew, kurt):
    """C such that the Cornish-Fisher quantile is z_alpha - C.

    ``kurt`` is excess kurtosis.
    """
    z = z_alpha
    return (
        -(z * z - 1.0) * skew / 6.0
        - (z**3 - 3.0 * z) * kurt / 24.0
        + (2.0 * z**3 - 5.0 * z) * skew * skew / 36.0
    )


def _cf_quantile(z, skew, kurt):
    """Cornish-Fisher quantile g and its partials in skew and kurt."""
    g = z - cornish_fisher_correction(z, skew, kurt)
    g_s = (z * z - 1.0) / 6.0 - (2.0 * z**3 - 5.0 * z) * skew / 18.0
    g_k = (z**3 - 3.0 * z) / 24.0
    return g, g_s, g_k


def _npdf(x):
    return math.exp(-0.5 * x * x) / math.sqrt(2.0 * math.pi) if np.isfinite(x) else 0.0


def _validity_notes(pm: PortfolioMoments) -> list[str]:
    notes = []
    if abs(pm.skew) > SKEW_LIMIT or pm.kurt > KURT_LIMIT:
        msg = f"Edgeworth expansion outside validity region (skew={pm.skew:.3g}, kurt={pm.kurt:.3g})"
        warnings.warn(msg, EdgeworthWarning, stacklevel=3)
        notes.append(msg)
    return notes


def modified_var(com: CoMomentSet, beta, alpha_level: float) -> RiskReport:
    """Cornish-Fisher VaR, -beta'mu - sqrt(m2) (z - C), with exact gradient."""
    _check_level(alpha_level)
    b = np.asarray(beta, dtype=float)
    pm = portfolio_moments(com, b)
    notes = _validity_notes(pm)
    z = special.ndtri(alpha_level)
    g, g_s, g_k = _cf_quantile(z, pm.skew, pm.kurt)
    sd = math.sqrt(pm.m2)
    total = -float(com.mean @ b) - sd * g
    mrc = -com.mean - g * pm.grad_m2 / (2.0 * sd) - sd * (g_s * pm.grad_skew + g_k * pm.grad_kurt)
    return _report(Measure.MVAR, alpha_level, total, b, mrc, notes)


def edgeworth_tail_integrals(g: float, q: int) -> float:
    """Lower-tail normal moment, the integral of z^q phi(z) over (-inf, g]."""
    if q < 0 or int(q) != q:
        raise ValueError("q must be a nonnegative integer")
    return float(_tail_moments(g, int(q))[int(q)])


def _tail_moments(g: float, qmax: int) -> np.ndarray:
    out = np.empty(qmax + 1)
    phi = _npdf(g)
    out[0] = special.ndtr(g)
    if qmax >= 1:
        out[1] = -phi
    for q in range(2, qmax + 1):
        gp = g ** (q - 1) if np.isfinite(g) else 0.0
        out[q] = -gp * phi + (q - 1) * out[q - 2]
    return out


def _edgeworth_tail_mean(g, alpha_level, skew, kurt):
    """alpha^{-1} times the integral of z times the Edgeworth density up to g.

    Returns the value and its partials in g, skew and kurt.
    """
    j = _tail_moments(g, 7)
    h3 = j[4] - 3 * j[2]
    h4 = j[5] - 6 * j[3] + 3 * j[1]
    h6 = j[7] - 15 * j[5] + 45 * j[3] - 15 * j[1]
    val = (j[1] + skew / 6 * h3 + kurt / 24 * h4 + skew * skew / 72 * h6) / alpha_level
    # d/dg of the integral is the integrand at g
    he3 = g**3 - 3 * g
    he4 = g**4 - 6 * g**2 + 3
    he6 = g**6 - 15 * g**4 + 45 * g**2 - 15
    d_g = g * _npdf(g) * (1 + skew / 6 * he3 + kurt / 24 * he4 + skew * skew / 72 * he6) / alpha_level
    d_s = (h3 / 6 + skew / 36 * h6) / alpha_level
    d_k = h4 / 24 / alpha_level
    return val, d_g, d_s, d_k


def modified_es(com: CoMomentSet, beta, alpha_level: float) -> RiskReport:
    """Modified ES from the second-order Edgeworth density below the
    Cornish-Fisher quantile, with exact gradient."""
    _check_level(alpha_level)
    b = np.asarray(beta, dtype=float)
    pm = portfolio_moments(com, b)
    notes = _validity_notes(pm)
    z = special.ndtri(alpha_level)
    s, k = pm.skew, pm.kurt
    g, g_s, g_k = _cf_quantile(z, s, k)
    e, e_g, e_s, e_k = _edgeworth_tail_mean(g, alpha_level, s, k)
    sd = math.sqrt(pm.m2)
    mu_p = float(com.mean @ b)
    total = -mu_p - sd * e
    de_ds = e_s + e_g * g_s
    de_dk = e_k + e_g * g_k
    mrc = -com.mean - e * pm.grad_m2 / (2.0 * sd) - sd * (de_ds * pm.grad_skew + de_dk * pm.grad_kurt)
    var_total = -mu_p - sd * g
    if total < var_total:
        msg = f"modified ES {total:.6g} below modified VaR {var_total:.6g}"
        warnings.warn(msg, EdgeworthWarning, stacklevel=2)
        notes.append(msg)
    return _report(Measure.MES, alpha_level, total, b, mrc, notes)


def parametric_report(com: CoMomentSet, beta, measure: Measure | str, alpha_level: float | None = None) -> RiskReport:
    measure = Measure(measure)
    if measure is Measure.VOLATILITY:
        return trc_volatility(com, beta)
    if measure is Measure.MVAR:
        return modified_var(com, beta, alpha_level)
    if measure is Measure.MES:
        return modified_es(com, beta, alpha_level)
    raise ValueError(f"{measure.value} is not a parametric measure")


# ---------------------------------------------------------------------------
# historical measures
# ---------------------------------------------------------------------------


def _quantile_index(alpha_level: float, t: int) -> int:
    return max(math.ceil(alpha_level * t) - 1, 0)


def historical_var(sample, alpha_level: float) -> float:
    """Empirical VaR: minus the ceil(alpha T)-th smallest observation."""
    x = np.sort(np.asarray(sample, dtype=float))
    return float(-x[_quantile_index(alpha_level, x.size)])


def historical_es(sample, alpha_level: float) -> float:
    """Empirical ES: minus the mean of the ceil(alpha T) smallest observations."""
    x = np.sort(np.asarray(sample, dtype=float))
    return float(-x[: _quantile_index(alpha_level, x.size) + 1].mean())


def historical_decomposition(returns_matrix, beta, alpha_level: float, measure: Measure | str) -> RiskReport:
    """Historical VaR/ES and their contributions from the sorted return matrix.

    ``returns_matrix`` is T x (N + 1): portfolio returns in column 0, factor
    returns after.  Rows are ordered by the portfolio column.  VaR uses the
    mean over a 5-row window centred on the alpha-quantile row; ES uses all
    rows at or below the alpha-quantile.
    """
    measure = Measure(measure)
    if measure not in (Measure.HISTVAR, Measure.HISTES):
        raise ValueError(f"{measure.value} is not a historical measure")
    r = np.asarray(returns_matrix, dtype=float)
    b = np.asarray(beta, dtype=float)
    if r.ndim != 2 or r.shape[1] != b.size + 1:
        raise ValueError("returns matrix must be T x (N + 1) with the portfolio first")
    t = r.shape[0]
    if not 0 < alpha_level < 1 or t * alpha_level < 1:
        raise ValueError(f"need T >= 1/alpha observations (T={t}, alpha={alpha_level})")
    srt = r[np.argsort(r[:, 0], kind="stable")]
    k = _quantile_index(alpha_level, t)
    if measure is Measure.HISTVAR:
        half = HIST_VAR_WINDOW // 2
        lo = min(max(k - half, 0), t - HIST_VAR_WINDOW)
        rows = srt[lo : lo + HIST_VAR_WINDOW]
    else:
        rows = srt[srt[:, 0] <= srt[k, 0]]
        if rows.shape[0] < 5:
            raise ValueError(f"only {rows.shape[0]} tail observations; need at least 5")
    total = -float(rows[:, 0].mean())
    mrc = -rows[:, 1:].mean(axis=0)
    return _report(measure, alpha_level, total, b, mrc)


def empirical_robust_es(sample, alpha1: float, alpha2: float) -> float:
    """Trimmed ES: average of VaR_u for u in (alpha1, alpha2).

    Computed as minus the mean of the order statistics with ranks between
    floor(alpha1 T) and ceil(alpha2 T).
    """
    if not 0.0 < alpha1 < alpha2 < 1.0:
        raise ValueError("need 0 < alpha1 < alpha2 < 1")
    x = np.sort(np.asarray(sample, dtype=float))
    lo = math.floor(alpha1 * x.size)
    hi = math.ceil(alpha2 * x.size)
    if hi <= lo:
        raise ValueError("trim window contains no observations")
    return float(-x[lo:hi].mean())
