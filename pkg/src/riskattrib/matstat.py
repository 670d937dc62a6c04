"""Dense symmetric-matrix kernels and Wishart-family samplers.

Conventions used throughout the package:

* the sample scatter matrix ``S`` is the *unnormalized* centered
  cross-product, so that ``S`` follows a Wishart law with ``n - 1`` degrees
  of freedom; estimators divide by ``n - 1`` explicitly where needed;
* the squared Frobenius norm carries a ``1/p`` factor (``tr(M M') / p``);
* every sampler consumes variates from an :class:`RngStream` identified by
  ``(seed, stream_id)``, and identical stream identity yields a bitwise
  identical variate sequence regardless of host threading.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DegenerateDf,
    DimensionMismatch,
    NotPositiveDefinite,
    TooFewObservations,
)

_MASK64 = 0xFFFFFFFFFFFFFFFF


def as_symmetric(m) -> np.ndarray:
    """Validate and return ``m`` as a float64 symmetric square matrix.

    Symmetry must hold exactly (entrywise equality), matching how every
    producer in this package emits matrices.
    """
    a = np.asarray(m, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got shape {a.shape}")
    if a.shape[0] < 1:
        raise DimensionMismatch("matrix dimension must be at least 1")
    if not np.array_equal(a, a.T):
        raise DimensionMismatch("matrix is not exactly symmetric")
    return a


def symmetrize(m: np.ndarray) -> np.ndarray:
    """Make a nearly-symmetric matrix exactly symmetric: (M + M') / 2."""
    return (m + m.T) / 2.0


@dataclass(frozen=True)
class CholeskyFactor:
    """Lower-triangular factor L with L L' reproducing the source matrix."""

    lower: np.ndarray

    @property
    def dim(self) -> int:
        return self.lower.shape[0]

    def recompose(self) -> np.ndarray:
        return symmetrize(self.lower @ self.lower.T)


@dataclass
class RngStream:
    """One counter-based random stream, keyed by ``(seed, stream_id)``.

    Each Monte Carlo replication owns its own stream, which makes results
    independent of thread count and execution order. The underlying
    generator is Philox (counter-based), created lazily and then advanced
    by successive sampling calls.
    """

    seed: int
    stream_id: int = 0
    _generator: np.random.Generator | None = field(
        default=None, init=False, repr=False, compare=False
    )

    @property
    def generator(self) -> np.random.Generator:
        if self._generator is None:
            key = np.array(
                [self.seed & _MASK64, self.stream_id & _MASK64], dtype=np.uint64
            )
            self._generator = np.random.Generator(np.random.Philox(key=key))
        return self._generator


class StreamFactory:
    """Cheap per-thread producer of the same streams as :class:`RngStream`.

    Re-keys a single Philox instance instead of constructing a fresh one per
    replication; the resulting sequences are bitwise identical to
    ``RngStream(seed, stream_id).generator`` output. Not thread-safe: use
    one factory per worker.
    """

    def __init__(self) -> None:
        self._bitgen = np.random.Philox(key=np.zeros(2, dtype=np.uint64))
        self._generator = np.random.Generator(self._bitgen)

    def stream(self, seed: int, stream_id: int) -> np.random.Generator:
        state = self._bitgen.state
        state["state"]["counter"][:] = 0
        state["state"]["key"][0] = seed & _MASK64
        state["state"]["key"][1] = stream_id & _MASK64
        state["buffer_pos"] = 4
        state["has_uint32"] = 0
        state["uinteger"] = 0
        self._bitgen.state = state
        return self._generator


def _generator_of(rng) -> np.random.Generator:
    if isinstance(rng, RngStream):
        return rng.generator
    if isinstance(rng, np.random.Generator):
        return rng
    raise TypeError(f"expected RngStream or numpy Generator, got {type(rng)!r}")


def cholesky(m) -> CholeskyFactor:
    """Lower Cholesky factor of a symmetric positive-definite matrix.

    Raises :class:`NotPositiveDefinite` when the factorization fails or any
    pivot falls at or below ``p * eps * max|diag|``.
    """
    a = as_symmetric(m)
    p = a.shape[0]
    try:
        lower = np.linalg.cholesky(a)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite(f"Cholesky factorization failed: {exc}") from exc
    pivots = np.diag(lower) ** 2
    threshold = p * np.finfo(float).eps * float(np.max(np.abs(np.diag(a))))
    if np.any(pivots <= threshold):
        raise NotPositiveDefinite(
            f"Cholesky pivot {pivots.min():.3e} at or below threshold {threshold:.3e}"
        )
    return CholeskyFactor(lower)


def is_positive_definite(m) -> bool:
    """True when :func:`cholesky` accepts ``m``."""
    try:
        cholesky(m)
    except NotPositiveDefinite:
        return False
    return True


def pd_inverse(m) -> np.ndarray:
    """Inverse of a positive-definite matrix via its Cholesky factor.

    The result is exactly symmetric.
    """
    lower = cholesky(m).lower
    linv = np.linalg.inv(lower)
    return symmetrize(linv.T @ linv)


def bartlett_factor(df: float, p: int, gen: np.random.Generator) -> np.ndarray:
    """Lower-triangular Bartlett matrix T for a Wishart(df, I_p) draw.

    Diagonal entries are square roots of chi-square variates with
    ``df, df-1, ..., df-p+1`` degrees of freedom (drawn as gamma variates,
    which admits fractional degrees of freedom); the strict lower triangle
    is standard normal.
    """
    t = np.zeros((p, p))
    dfs = df - np.arange(p)
    t[np.diag_indices(p)] = np.sqrt(gen.gamma(shape=dfs / 2.0, scale=2.0))
    rows, cols = np.tril_indices(p, -1)
    if rows.size:
        t[rows, cols] = gen.standard_normal(rows.size)
    return t


def wishart_from_factor(df: float, scale_lower: np.ndarray, gen: np.random.Generator) -> np.ndarray:
    """One Wishart draw given a precomputed Cholesky factor of the scale."""
    p = scale_lower.shape[0]
    a = scale_lower @ bartlett_factor(df, p, gen)
    return symmetrize(a @ a.T)


def sample_wishart(df: float, scale, rng) -> np.ndarray:
    """One draw from Wishart(df, scale) via the Bartlett decomposition.

    Requires ``df > p - 1`` (non-integer values allowed) and a positive
    definite scale.
    """
    a = as_symmetric(scale)
    p = a.shape[0]
    if df <= p - 1:
        raise DegenerateDf(f"Wishart df {df} is degenerate for dimension {p} (need df > {p - 1})")
    lower = cholesky(a).lower
    return wishart_from_factor(df, lower, _generator_of(rng))


def sample_inverse_wishart(df: float, scale, rng) -> np.ndarray:
    """One draw from the inverse Wishart: invert a Wishart(df, scale^-1) draw."""
    a = as_symmetric(scale)
    p = a.shape[0]
    if df <= p - 1:
        raise DegenerateDf(f"inverse-Wishart df {df} is degenerate for dimension {p}")
    w = sample_wishart(df, pd_inverse(a), rng)
    return pd_inverse(w)


def sample_mvn(mean, cov, rng) -> np.ndarray:
    """One multivariate-normal draw with the given mean and PD covariance."""
    mu = np.asarray(mean, dtype=float)
    lower = cholesky(cov).lower
    if mu.shape != (lower.shape[0],):
        raise DimensionMismatch(
            f"mean has shape {mu.shape}, covariance dimension is {lower.shape[0]}"
        )
    z = _generator_of(rng).standard_normal(mu.shape[0])
    return mu + lower @ z


def scaled_frobenius_sq(m) -> float:
    """Squared Frobenius norm with the 1/p normalization: tr(M M') / p."""
    a = np.asarray(m, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got shape {a.shape}")
    return float(np.sum(a * a) / a.shape[0])


def sample_covariance(returns) -> np.ndarray:
    """Unnormalized scatter matrix S = sum_t (r_t - rbar)(r_t - rbar)'.

    Deliberately *not* divided by ``n - 1``: S then follows a Wishart law
    with ``n - 1`` degrees of freedom, the convention every estimator in
    this package builds on. Accepts an (n, p) array or any object exposing
    one through a ``values`` attribute.
    """
    values = np.asarray(getattr(returns, "values", returns), dtype=float)
    if values.ndim != 2:
        raise DimensionMismatch(f"expected an (n, p) return array, got shape {values.shape}")
    n = values.shape[0]
    if n < 2:
        raise TooFewObservations(f"need at least 2 observations, got {n}")
    centered = values - values.mean(axis=0)
    return symmetrize(centered.T @ centered)
