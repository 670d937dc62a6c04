"""Prior construction and the inverse-Wishart posterior for the covariance.

The sampling model is S ~ Wishart(n - 1, Sigma) on the unnormalized scatter
matrix. With an inverse-Wishart prior W^-1(n0, Psi) the posterior is
W^-1(n0 + n - 1, Psi + S); it is proper whenever the posterior degrees of
freedom exceed p - 1, which the prior-df rule below guarantees for any
positive slack c even in the ill-posed n <= p regime.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from . import matstat
from .errors import DimensionMismatch, ImproperPosterior, InvalidSlack, ZeroVariance


class PriorTarget(str, enum.Enum):
    """Shape of the prior scale matrix Psi."""

    IDENTITY_SCALED = "identity"
    SAMPLE_VARIANCE_DIAG = "diag"


@dataclass(frozen=True)
class PriorSpec:
    """Prior configuration: slack ``c`` and the shape of the scale target.

    The prior degrees of freedom depend on panel size, so they are derived
    per dataset through :meth:`df` rather than stored.
    """

    c: float = 1.5
    target_kind: PriorTarget = PriorTarget.SAMPLE_VARIANCE_DIAG

    def __post_init__(self) -> None:
        if self.c <= 0:
            raise InvalidSlack(f"prior slack c must be > 0, got {self.c}")

    def df(self, n: int, p: int) -> float:
        return select_prior_df(n, p, self.c)


@dataclass(frozen=True)
class PosteriorParams:
    """Inverse-Wishart posterior: degrees of freedom ``nu``, scale Psi + S."""

    nu: float
    scale: np.ndarray
    n: int
    p: int


def select_prior_df(n: int, p: int, c: float) -> float:
    """Prior degrees of freedom: (p - n) + c when n <= p, else just c.

    The (p - n) offset is exactly what makes the posterior proper in the
    ill-posed regime; when n > p the posterior is already proper, so the
    prior carries only the slack.
    """
    if c <= 0:
        raise InvalidSlack(f"prior slack c must be > 0, got {c}")
    if n <= p:
        return float(p - n) + c
    return float(c)


def build_prior_scale(s, kind: PriorTarget) -> np.ndarray:
    """Prior scale matrix Psi from the scatter matrix ``s``.

    ``SAMPLE_VARIANCE_DIAG`` keeps the diagonal of ``s`` (requires strictly
    positive entries); ``IDENTITY_SCALED`` returns the identity.
    """
    a = matstat.as_symmetric(s)
    if kind is PriorTarget.SAMPLE_VARIANCE_DIAG:
        diag = np.diag(a).copy()
        if np.any(diag <= 0):
            bad = int(np.argmin(diag))
            raise ZeroVariance(
                f"sample variance {diag[bad]:.3e} at source index {bad} is not positive"
            )
        return np.diag(diag)
    if kind is PriorTarget.IDENTITY_SCALED:
        return np.eye(a.shape[0])
    raise ValueError(f"unknown prior target kind: {kind!r}")


def posterior_params(s, psi, n: int, n0: float) -> PosteriorParams:
    """Posterior parameters: nu = n0 + n - 1, scale = Psi + S.

    Validates properness (nu > p - 1) and positive definiteness of the
    scale; a PD Psi plus a PSD scatter is always PD.
    """
    a = matstat.as_symmetric(s)
    b = matstat.as_symmetric(psi)
    if a.shape != b.shape:
        raise DimensionMismatch(f"scatter {a.shape} and prior scale {b.shape} differ")
    p = a.shape[0]
    nu = n0 + n - 1
    if nu <= p - 1:
        raise ImproperPosterior(
            f"posterior df {nu} does not exceed p - 1 = {p - 1}; increase the prior df"
        )
    matstat.cholesky(b)  # prior scale must be PD
    scale = a + b
    matstat.cholesky(scale)
    return PosteriorParams(nu=float(nu), scale=scale, n=int(n), p=p)
