"""Monte Carlo engine for posterior risk attribution.

Each replication draws one covariance matrix from the inverse-Wishart
posterior and decomposes the implied portfolio volatility into per-source
marginal (MCTR) and conditional (CCTR) contributions; the CCTRs of a
replication sum exactly to its total volatility. Replication ``i`` consumes
variates only from the counter-based stream ``(seed, i)``, so results are
bitwise independent of thread count and scheduling.

Replications are processed in blocks whose layout depends only on the
problem size, never on the worker count: the per-replication random
variates are drawn stream by stream, and the surrounding linear algebra
runs batched over the block (the batched routines apply per slice, so
results match an unbatched evaluation bit for bit). A replication never
materializes its covariance draw: with W = A A' the Wishart draw for the
precision, the covariance is A^-T A^-1, and both the volatility and
Sigma @ omega come out of triangular solves against A.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import matstat
from .errors import (
    DimensionMismatch,
    InvalidWeights,
    NotPositiveDefinite,
    TooFewDraws,
    ZeroSims,
)
from .matstat import StreamFactory
from .posterior import PosteriorParams

SIMPLEX_TOL = 1e-10

# cap on doubles held by one block's Bartlett stack (~32 MiB)
_BLOCK_ELEMENTS = 4_194_304

# below this dimension a replication is dominated by GIL-bound variate
# generation, so extra workers only contend; batched LAPACK work grows like
# p^3 and starts paying for threads around here
_PARALLEL_MIN_DIM = 32


@dataclass(frozen=True)
class PortfolioWeights:
    """Long-only weights on the unit simplex: omega_j >= 0, sum = 1."""

    omega: np.ndarray

    def __post_init__(self) -> None:
        omega = np.asarray(self.omega, dtype=float)
        if omega.ndim != 1 or omega.size < 1:
            raise InvalidWeights(f"weights must be a nonempty vector, got shape {omega.shape}")
        if np.any(omega < 0):
            raise InvalidWeights(f"negative weight {omega.min():.3e} violates no-short-selling")
        total = float(omega.sum())
        if abs(total - 1.0) > SIMPLEX_TOL:
            raise InvalidWeights(f"weights sum to {total!r}, expected 1 within {SIMPLEX_TOL}")
        object.__setattr__(self, "omega", omega)

    @property
    def size(self) -> int:
        return self.omega.size


@dataclass(frozen=True)
class AttributionSamples:
    """Posterior draws of total volatility and per-source MCTR/CCTR."""

    n_sims: int
    sigma_p: np.ndarray  # (N,)
    mctr: np.ndarray  # (N, p)
    cctr: np.ndarray  # (N, p)
    seed: int


@dataclass(frozen=True)
class PosteriorSummary:
    """Mean, sample SD, and central 95% percentile interval of draws."""

    mean: float
    sd: float
    ci_lo: float
    ci_hi: float


@dataclass(frozen=True)
class TailRisk:
    """VaR and expected shortfall at one confidence level, as positive losses."""

    level: float
    var: float
    esf: float


def portfolio_volatility(sigma, w: PortfolioWeights) -> float:
    """Total portfolio volatility sqrt(omega' Sigma omega)."""
    a = matstat.as_symmetric(sigma)
    if a.shape[0] != w.size:
        raise DimensionMismatch(f"covariance is {a.shape[0]}x{a.shape[0]}, weights have {w.size}")
    variance = float(w.omega @ a @ w.omega)
    if variance <= 0.0:
        raise NotPositiveDefinite(f"portfolio variance {variance:.3e} is not positive")
    return math.sqrt(variance)


def risk_decomposition(sigma, w: PortfolioWeights) -> tuple[np.ndarray, np.ndarray]:
    """Per-source MCTR and CCTR vectors.

    MCTR is the gradient of volatility in the weights, Sigma omega / sigma_p;
    CCTR is its weight-scaled version omega_j * MCTR_j, which sums exactly to
    the total volatility.
    """
    a = matstat.as_symmetric(sigma)
    if a.shape[0] != w.size:
        raise DimensionMismatch(f"covariance is {a.shape[0]}x{a.shape[0]}, weights have {w.size}")
    total = portfolio_volatility(a, w)
    mctr = (a @ w.omega) / total
    cctr = w.omega * mctr
    return mctr, cctr


def _resolve_threads(threads: int | None) -> int:
    # results never depend on the worker count, so the requested value is
    # only an upper bound; oversubscribing cores just adds GIL contention
    cores = os.cpu_count() or 1
    if threads is None:
        return cores
    return max(1, min(int(threads), cores))


def _block_spans(n_sims: int, p: int) -> list[tuple[int, int]]:
    size = max(1, min(512, _BLOCK_ELEMENTS // max(1, p * p)))
    return [(lo, min(lo + size, n_sims)) for lo in range(0, n_sims, size)]


def _run_blocks(n_sims: int, p: int, threads: int | None, block_fn) -> None:
    """Run ``block_fn(factory, lo, hi)`` over a fixed block layout.

    Workers each own a private stream factory and pick up whole blocks, so
    outputs (written to disjoint slices) do not depend on the worker count.
    """
    blocks = _block_spans(n_sims, p)
    workers = min(_resolve_threads(threads), len(blocks))
    if p < _PARALLEL_MIN_DIM:
        workers = 1
    if workers <= 1:
        factory = StreamFactory()
        for lo, hi in blocks:
            block_fn(factory, lo, hi)
        return

    def run_worker(worker: int) -> None:
        factory = StreamFactory()
        for b in range(worker, len(blocks), workers):
            block_fn(factory, *blocks[b])

    with ThreadPoolExecutor(max_workers=workers) as pool:
        for future in [pool.submit(run_worker, w) for w in range(workers)]:
            future.result()


class _BartlettDrawer:
    """Per-replication Bartlett variates for one posterior, drawn blockwise.

    Index arrays are precomputed once; the variate order per stream matches
    :func:`riskattrib.matstat.bartlett_factor` (diagonal gammas first, then
    the strict lower triangle).
    """

    def __init__(self, nu: float, p: int, seed: int):
        self.p = p
        self.seed = seed
        self.half_dfs = (nu - np.arange(p)) / 2.0
        self.diag = np.arange(p)
        self.low_rows, self.low_cols = np.tril_indices(p, -1)

    def stack(self, factory: StreamFactory, lo: int, hi: int, extra_normals: int = 0):
        m = hi - lo
        p = self.p
        tstack = np.zeros((m, p, p))
        extra = np.empty((m, extra_normals)) if extra_normals else None
        for k in range(m):
            gen = factory.stream(self.seed, lo + k)
            tstack[k, self.diag, self.diag] = np.sqrt(gen.gamma(self.half_dfs, 2.0))
            if self.low_rows.size:
                tstack[k, self.low_rows, self.low_cols] = gen.standard_normal(self.low_rows.size)
            if extra_normals:
                extra[k] = gen.standard_normal(extra_normals)
        return tstack, extra


def _posterior_precision_factor(post: PosteriorParams) -> np.ndarray:
    """Cholesky factor of the posterior scale's inverse.

    A Wishart draw W = A A' against this factor has inverse A^-T A^-1, which
    is exactly one covariance draw from the posterior.
    """
    return matstat.cholesky(matstat.pd_inverse(post.scale)).lower


def run_mc(
    post: PosteriorParams,
    w: PortfolioWeights,
    n_sims: int,
    seed: int,
    threads: int | None = None,
) -> AttributionSamples:
    """Posterior sampling of volatility, MCTR, and CCTR.

    Replication ``i`` draws its covariance from the inverse-Wishart
    posterior using stream ``(seed, i)`` and decomposes the risk under the
    fixed weights ``w``.
    """
    if n_sims < 1:
        raise ZeroSims(f"simulation size must be >= 1, got {n_sims}")
    if post.p != w.size:
        raise DimensionMismatch(f"posterior dimension {post.p}, weights have {w.size}")
    precision_factor = _posterior_precision_factor(post)
    drawer = _BartlettDrawer(post.nu, post.p, seed)
    omega = w.omega

    sigma_p = np.empty(n_sims)
    mctr = np.empty((n_sims, post.p))
    cctr = np.empty((n_sims, post.p))

    def block_fn(factory: StreamFactory, lo: int, hi: int) -> None:
        tstack, _ = drawer.stack(factory, lo, hi)
        amats = precision_factor @ tstack
        bw = np.linalg.solve(amats, omega)  # A^-1 omega per replication
        total = np.sqrt(np.einsum("ij,ij->i", bw, bw))  # sqrt(omega' Sigma omega)
        cov_w = np.linalg.solve(np.swapaxes(amats, 1, 2), bw[:, :, None])[:, :, 0]
        rows = cov_w / total[:, None]
        sigma_p[lo:hi] = total
        mctr[lo:hi] = rows
        cctr[lo:hi] = omega * rows

    _run_blocks(n_sims, post.p, threads, block_fn)
    return AttributionSamples(n_sims=n_sims, sigma_p=sigma_p, mctr=mctr, cctr=cctr, seed=seed)


def prob_positive_cctr(samples: AttributionSamples) -> np.ndarray:
    """Per-source Monte Carlo estimate of P(CCTR > 0).

    Strict inequality: a structurally zero contribution (for instance a
    zero-weight source) counts as not positive.
    """
    return (samples.cctr > 0).mean(axis=0)


def prob_positive_mctr(samples: AttributionSamples) -> np.ndarray:
    """Per-source Monte Carlo estimate of P(MCTR > 0)."""
    return (samples.mctr > 0).mean(axis=0)


def summarize(draws) -> PosteriorSummary:
    """Mean, sample SD (n - 1 denominator), and 2.5%/97.5% percentile CI."""
    values = np.asarray(draws, dtype=float).ravel()
    if values.size < 2:
        raise TooFewDraws(f"need at least 2 draws to summarize, got {values.size}")
    lo, hi = np.percentile(values, [2.5, 97.5])
    return PosteriorSummary(
        mean=float(values.mean()),
        sd=float(values.std(ddof=1)),
        ci_lo=float(lo),
        ci_hi=float(hi),
    )


def tail_risk(
    post: PosteriorParams,
    w: PortfolioWeights,
    mu_hat,
    n_sims: int,
    level: float,
    seed: int,
    threads: int | None = None,
) -> TailRisk:
    """Posterior-predictive VaR and expected shortfall.

    Each replication draws a covariance from the posterior, then one return
    vector from a normal with that covariance (jointly a multivariate-t
    predictive), and records the portfolio return. Losses are positive
    numbers; VaR is the empirical level-quantile of the losses and ESF the
    mean loss from VaR outward.
    """
    if not 0.5 < level < 1.0:
        raise ValueError(f"confidence level must be in (0.5, 1), got {level}")
    if n_sims < 1:
        raise ZeroSims(f"simulation size must be >= 1, got {n_sims}")
    mean_vec = np.asarray(mu_hat, dtype=float)
    if mean_vec.shape != (post.p,):
        raise DimensionMismatch(f"mean vector has shape {mean_vec.shape}, expected ({post.p},)")
    if post.p != w.size:
        raise DimensionMismatch(f"posterior dimension {post.p}, weights have {w.size}")
    precision_factor = _posterior_precision_factor(post)
    drawer = _BartlettDrawer(post.nu, post.p, seed)
    omega = w.omega

    returns = np.empty(n_sims)

    def block_fn(factory: StreamFactory, lo: int, hi: int) -> None:
        tstack, z = drawer.stack(factory, lo, hi, extra_normals=post.p)
        amats = precision_factor @ tstack
        # A^-T z has covariance A^-T A^-1, the posterior covariance draw
        shocks = np.linalg.solve(np.swapaxes(amats, 1, 2), z[:, :, None])[:, :, 0]
        returns[lo:hi] = (mean_vec + shocks) @ omega

    _run_blocks(n_sims, post.p, threads, block_fn)

    losses = -returns
    var = float(np.percentile(losses, 100.0 * level))
    tail = losses[losses >= var]
    esf = float(tail.mean()) if tail.size else var
    return TailRisk(level=level, var=var, esf=esf)
