"""Shared helpers for the test suite: seeded random matrix generators."""

import numpy as np
import pytest


def make_generator(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=np.array([seed, 0], dtype=np.uint64)))


def random_pd(gen: np.random.Generator, p: int, extra: int = 3) -> np.ndarray:
    """Random positive-definite matrix via a Gram construction."""
    basis = gen.standard_normal((p, p + extra))
    gram = basis @ basis.T / (p + extra)
    return (gram + gram.T) / 2.0


def random_correlation(gen: np.random.Generator, p: int, extra: int = 5) -> np.ndarray:
    gram = random_pd(gen, p, extra)
    d = 1.0 / np.sqrt(np.diag(gram))
    corr = gram * np.outer(d, d)
    np.fill_diagonal(corr, 1.0)
    return (corr + corr.T) / 2.0


def random_simplex(gen: np.random.Generator, p: int) -> np.ndarray:
    return gen.dirichlet(np.ones(p))


@pytest.fixture
def gen() -> np.random.Generator:
    return make_generator(20240811)
