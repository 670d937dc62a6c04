"""Simplex-constrained mean-variance optimization and the rolling backtest.

The optimizer maximizes ``w' mu - (gamma / 2) w' Sigma w`` over the unit
simplex (fully invested, no short selling) by projected gradient ascent
with a fixed step from the Lipschitz bound; the projection is the exact
sort-based Euclidean projection, so iterates always satisfy the
constraints and the objective never decreases.

The backtest estimates the covariance and mean on period k, optimizes
weights, and evaluates them on period k + 1: return and risk columns are
period-scaled percentages (sum of per-row returns; per-row SD times the
square root of the row count), and the Sharpe column is the per-row Sharpe
ratio scaled to the same horizon, which makes it the ratio of the return
column to the risk column when the risk-free rate is zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import matstat
from .attribution import PortfolioWeights
from .errors import (
    DimensionMismatch,
    EmptyPeriod,
    InsufficientPeriods,
    NoConvergence,
    TooFewObservations,
    ZeroDispersion,
)
from .ingest import PeriodScheme, ReturnPanel, slice_periods
from .posterior import PriorSpec
from .shrinkage import estimate_by_name


@dataclass(frozen=True)
class OptimizerConfig:
    risk_aversion: float = 1.0
    tol: float = 1e-8
    max_iter: int = 10000
    zero_weight_threshold: float = 1e-6

    def __post_init__(self) -> None:
        if self.risk_aversion <= 0:
            raise ValueError(f"risk aversion must be > 0, got {self.risk_aversion}")
        if self.tol <= 0:
            raise ValueError(f"tolerance must be > 0, got {self.tol}")
        if self.max_iter < 1:
            raise ValueError(f"max_iter must be >= 1, got {self.max_iter}")


@dataclass(frozen=True)
class BacktestReport:
    """One out-sample period of the rolling backtest.

    ``portfolio_return`` and ``portfolio_risk`` are realized out-sample
    values in percent at the period horizon; ``anticipated_risk`` is the
    plug-in volatility of the optimized weights under the estimation-period
    covariance, scaled to the same horizon.
    """

    period_label: str
    portfolio_return: float
    portfolio_risk: float
    sharpe: float
    portfolio_size: int
    market_size: int
    anticipated_risk: float


def project_to_simplex(v) -> np.ndarray:
    """Euclidean projection onto {w : w >= 0, sum w = 1} (sort-based)."""
    x = np.asarray(v, dtype=float).ravel()
    descending = np.sort(x)[::-1]
    cumulative = np.cumsum(descending)
    counts = np.arange(1, x.size + 1)
    support = np.nonzero(descending * counts > cumulative - 1.0)[0]
    k = support[-1]
    threshold = (cumulative[k] - 1.0) / (k + 1)
    return np.maximum(x - threshold, 0.0)


def _projected_gradient(mu, sigma, gamma, tol, max_iter):
    """Core ascent loop; returns (weights, objective history, converged)."""
    top_eigenvalue = float(np.linalg.eigvalsh(sigma)[-1])
    step = 1.0 / (gamma * top_eigenvalue)
    p = mu.size
    w = np.full(p, 1.0 / p)
    objective = lambda x: float(x @ mu - 0.5 * gamma * (x @ sigma @ x))  # noqa: E731
    history = [objective(w)]
    for _ in range(max_iter):
        gradient = mu - gamma * (sigma @ w)
        w_next = project_to_simplex(w + step * gradient)
        residual = float(np.max(np.abs(w_next - w))) / step
        w = w_next
        history.append(objective(w))
        if residual <= tol:
            return w, history, True
    return w, history, False


def optimize_weights(mu_hat, sigma_hat, cfg: OptimizerConfig = OptimizerConfig()) -> PortfolioWeights:
    """Maximize w' mu - (gamma / 2) w' Sigma w over the unit simplex.

    Deterministic given its inputs. Raises :class:`NoConvergence` (carrying
    the final iterate) when the KKT residual stays above ``cfg.tol`` for
    ``cfg.max_iter`` iterations.
    """
    mu = np.asarray(mu_hat, dtype=float).ravel()
    sigma = matstat.as_symmetric(sigma_hat)
    if sigma.shape[0] != mu.size:
        raise DimensionMismatch(f"mean has {mu.size} entries, covariance is {sigma.shape[0]}x{sigma.shape[0]}")
    matstat.cholesky(sigma)  # NotPositiveDefinite for degenerate input
    w, _, converged = _projected_gradient(mu, sigma, cfg.risk_aversion, cfg.tol, cfg.max_iter)
    if not converged:
        raise NoConvergence(
            f"projected gradient did not reach tol={cfg.tol} in {cfg.max_iter} iterations",
            weights=PortfolioWeights(w),
        )
    return PortfolioWeights(w)


def sharpe_ratio(period_returns, risk_free: float = 0.0) -> float:
    """(mean - risk_free) / sample SD of the given per-period returns."""
    returns = np.asarray(period_returns, dtype=float).ravel()
    if returns.size < 2:
        raise ZeroDispersion(f"need at least 2 observations, got {returns.size}")
    sd = float(returns.std(ddof=1))
    if sd == 0.0:
        raise ZeroDispersion("returns have zero dispersion; Sharpe ratio undefined")
    return (float(returns.mean()) - risk_free) / sd


def _span_label(panel: ReturnPanel) -> str:
    return f"{panel.dates[0].isoformat()}..{panel.dates[-1].isoformat()}"


def backtest_panels(
    panels: Sequence[ReturnPanel],
    estimator: str,
    prior: PriorSpec,
    cfg: OptimizerConfig = OptimizerConfig(),
    risk_free: float = 0.0,
) -> list[BacktestReport]:
    """Rolling out-sample evaluation over consecutive pre-sliced periods.

    For each adjacent pair of periods, weights are fit on the first and
    held through the second; only sources present in both periods are
    investable for that transition.
    """
    if len(panels) < 2:
        raise InsufficientPeriods(f"backtest needs at least 2 periods, got {len(panels)}")
    reports = []
    for fit_panel, eval_panel in zip(panels[:-1], panels[1:]):
        eval_sources = set(eval_panel.sources)
        common = [s for s in fit_panel.sources if s in eval_sources]
        if not common:
            raise EmptyPeriod(
                f"no sources common to {_span_label(fit_panel)} and {_span_label(eval_panel)}"
            )
        fit = fit_panel.select_sources(common)
        held = eval_panel.select_sources(common)
        if held.n < 2:
            raise TooFewObservations(
                f"evaluation period {_span_label(held)} has {held.n} row(s); "
                "realized risk needs at least 2"
            )

        scatter = matstat.sample_covariance(fit.values)
        mean_vec = fit.values.mean(axis=0)
        n0 = prior.df(fit.n, fit.p)
        estimate = estimate_by_name(estimator, scatter, fit.n, n0)
        weights = optimize_weights(mean_vec, estimate.matrix, cfg)

        realized = held.values @ weights.omega
        horizon = math.sqrt(realized.size)
        risk = float(realized.std(ddof=1)) * horizon * 100.0
        anticipated = (
            math.sqrt(float(weights.omega @ estimate.matrix @ weights.omega)) * horizon * 100.0
        )
        reports.append(
            BacktestReport(
                period_label=_span_label(held),
                portfolio_return=float(realized.sum()) * 100.0,
                portfolio_risk=risk,
                sharpe=sharpe_ratio(realized, risk_free) * horizon,
                portfolio_size=int(np.sum(weights.omega > cfg.zero_weight_threshold)),
                market_size=len(common),
                anticipated_risk=anticipated,
            )
        )
    return reports


def backtest(
    panel: ReturnPanel,
    scheme: PeriodScheme,
    estimator: str,
    prior: PriorSpec,
    cfg: OptimizerConfig = OptimizerConfig(),
    risk_free: float = 0.0,
    ranges=None,
) -> list[BacktestReport]:
    """Slice a panel into calendar periods and run the rolling backtest."""
    panels = slice_periods(panel, scheme, ranges=ranges)
    return backtest_panels(panels, estimator, prior, cfg, risk_free=risk_free)
