"""Acceptance suite: one test per release criterion, at its stated tolerance.

Each test prints a single PASS/FAIL line with its runtime. Criterion 4
compares the closed-form expected squared error of the scaled scatter matrix
against simulation; the closed form keeps only the diagonal variance terms,
so above one dimension the comparison fails by construction. That check is
asserted exactly as stated and is expected to stay red; `riskattrib
validate` reports the same gap as a documented discrepancy alongside a
passing full-second-moment guard. See README "Known discrepancies".
"""

import json
import math
import os
import time
from pathlib import Path
from statistics import NormalDist

import numpy as np
import pytest

from riskattrib import cli
from riskattrib.attribution import (
    PortfolioWeights,
    prob_positive_cctr,
    prob_positive_mctr,
    risk_decomposition,
    run_mc,
    portfolio_volatility,
    tail_risk,
)
from riskattrib.matstat import (
    StreamFactory,
    cholesky,
    sample_covariance,
    sample_inverse_wishart,
    scaled_frobenius_sq,
    wishart_from_factor,
)
from riskattrib.posterior import PosteriorParams, build_prior_scale, posterior_params, select_prior_df
from riskattrib.posterior import PriorTarget
from riskattrib.shrinkage import estimate_sigma23, oracle_constants, posterior_mode, rho_optimal, theorem1_ratio

from conftest import make_generator, random_correlation, random_pd, random_simplex


def finish(number: int, description: str, started: float, limit: float) -> None:
    elapsed = time.perf_counter() - started
    print(f"CRITERION {number:2d} PASS: {description} [{elapsed:.1f}s < {limit:.0f}s]")
    assert elapsed < limit, f"criterion {number} exceeded its {limit:.0f}s runtime budget"


def test_criterion_01_cctr_additivity():
    started = time.perf_counter()
    gen = make_generator(101)
    for trial in range(1000):
        p = 1 + trial % 50
        sigma = random_pd(gen, p)
        w = PortfolioWeights(random_simplex(gen, p))
        _, cctr = risk_decomposition(sigma, w)
        total = portfolio_volatility(sigma, w)
        assert abs(cctr.sum() - total) <= 1e-10 * total
    finish(1, "CCTR additivity over 1000 random portfolios", started, 5.0)


def test_criterion_02_posterior_mode_identity():
    started = time.perf_counter()
    gen = make_generator(102)
    for _ in range(500):
        p = int(gen.integers(1, 9))
        n = int(gen.integers(2, 12))
        rows = gen.standard_normal((n, p))
        scatter = sample_covariance(rows)
        psi = np.diag(gen.uniform(0.2, 3.0, size=p))
        n0 = select_prior_df(n, p, float(gen.uniform(0.5, 3.0)))
        estimate = posterior_mode(scatter, psi, n, n0)
        q = estimate.weight_on_target
        alt = q * psi / (n0 + p + 1) + (1.0 - q) * scatter / (n - 1)
        scale = max(1.0, float(np.max(np.abs(alt))))
        assert np.max(np.abs(estimate.matrix - alt)) <= 1e-12 * scale
    finish(2, "posterior-mode convex-combination identity on 500 inputs", started, 1.0)


def test_criterion_03_pd_under_illposedness():
    started = time.perf_counter()
    gen = make_generator(103)
    for _ in range(500):
        p = int(gen.integers(5, 101))
        n = int(gen.integers(2, p))  # strictly fewer observations than sources
        rows = gen.standard_normal((n, p)) * gen.uniform(0.5, 2.0, size=p)
        scatter = sample_covariance(rows)
        n0 = select_prior_df(n, p, 1.5)
        cholesky(estimate_sigma23(scatter, n, n0).matrix)
        cholesky(posterior_mode(scatter, np.eye(p), n, n0).matrix)
    finish(3, "regularized estimates stay PD for 500 rank-deficient scatters", started, 30.0)


def test_criterion_04_result2_result3_oracle():
    started = time.perf_counter()
    gen = make_generator(104)
    p, n = 4, 10
    draws = 200_000
    factory = StreamFactory()
    worst = 0.0
    for trial in range(3):
        sigma = random_pd(gen, p)
        constants = oracle_constants(sigma, n)
        assert abs(constants.delta_sq - (constants.alpha_sq + constants.beta_sq)) <= (
            1e-12 * constants.delta_sq
        )
        lower = cholesky(sigma).lower
        total = 0.0
        for i in range(draws):
            scatter = wishart_from_factor(float(n - 1), lower, factory.stream(104 + trial, i))
            total += scaled_frobenius_sq(scatter / (n - 1) - sigma)
        relative = abs(total / draws - constants.beta_sq) / constants.beta_sq
        worst = max(worst, relative)
    elapsed = time.perf_counter() - started
    status = "PASS" if worst <= 0.02 else "FAIL"
    print(
        f"CRITERION  4 {status}: closed-form expected squared error vs simulation, "
        f"worst relative gap {worst:.3f} (tolerance 0.02) [{elapsed:.1f}s < 60s]"
    )
    assert elapsed < 60.0
    assert worst <= 0.02, (
        "the closed-form constant keeps only the diagonal variance terms of the "
        "scatter; the simulated expectation equals [tr(S^2)+tr(S)^2]/(p(n-1)) "
        "above one dimension, so this gap is intrinsic — `riskattrib validate` "
        "reports it as result2-beta-sq/result3-delta-sq discrepancies while the "
        "scatter-second-moment guard passes; see README 'Known discrepancies'"
    )


def test_criterion_05_asymptotic_weight_closed_form_and_grid():
    started = time.perf_counter()
    assert rho_optimal(np.eye(7), 10) == 0.25  # (n-4)/(3(n-2)) exactly

    # Monte Carlo risk grid at p=3, n=8: E[L(rho)] is quadratic in rho, so the
    # grid minimum comes from the accumulated coefficients
    gen = make_generator(105)
    sigma = random_pd(gen, 3)
    n = 8
    formula = rho_optimal(sigma, n)
    lower = cholesky(sigma).lower
    factory = StreamFactory()
    draws = 100_000
    coeff_const = coeff_lin = coeff_quad = 0.0
    for i in range(draws):
        scatter = wishart_from_factor(float(n - 1), lower, factory.stream(105, i))
        base = scatter / (n - 1) - sigma
        drift = np.diag(np.diag(scatter)) - scatter / (n - 1)
        coeff_const += scaled_frobenius_sq(base)
        coeff_lin += 2.0 * float(np.sum(base * drift)) / 3.0
        coeff_quad += scaled_frobenius_sq(drift)
    grid = np.round(np.arange(0.0, 1.0 + 1e-9, 0.01), 2)
    risk = coeff_const / draws + (coeff_lin / draws) * grid + (coeff_quad / draws) * grid**2
    minimizer = float(grid[int(np.argmin(risk))])
    gap = abs(minimizer - formula)
    if gap > 0.05:
        # the documented fallback: the discrepancy must be visible in `validate`
        rows = {r["check"]: r for r in cli._validate_checks(seed=0, quick=True)}
        row = rows["result5-rho-grid"]
        assert row["status"] == "discrepancy"
        note = f"grid minimizer {minimizer:.2f} vs closed form {formula:.3f}, reported by validate"
    else:
        note = f"grid minimizer {minimizer:.2f} within 0.05 of closed form {formula:.3f}"
    finish(5, f"asymptotic shrinkage weight: {note}", started, 120.0)


def test_criterion_06_inverse_wishart_mean():
    started = time.perf_counter()
    gen = make_generator(106)
    p, nu = 3, 10.0
    psi = random_pd(gen, p)
    factory = StreamFactory()
    draws = 100_000
    total = np.zeros((p, p))
    for i in range(draws):
        total += sample_inverse_wishart(nu, psi, factory.stream(106, i))
    expected = psi / (nu - p - 1)
    relative = np.max(np.abs(np.diag(total / draws - expected)) / np.diag(expected))
    assert relative <= 0.02
    finish(6, f"inverse-Wishart sample mean, diagonal gap {relative:.4f} <= 0.02", started, 30.0)


def test_criterion_07_tail_risk_oracle():
    started = time.perf_counter()
    nu = 50_000.0
    post = PosteriorParams(nu=nu, scale=np.array([[nu - 2.0]]), n=1, p=1)
    w = PortfolioWeights(np.array([1.0]))
    result = tail_risk(post, w, np.zeros(1), 1_000_000, 0.95, seed=107)
    var_true = NormalDist().inv_cdf(0.95)
    esf_true = NormalDist().pdf(var_true) / 0.05
    assert abs(result.var - var_true) / var_true <= 0.02
    assert abs(result.esf - esf_true) / esf_true <= 0.02
    finish(
        7,
        f"VaR {result.var:.4f} vs {var_true:.4f}, ESF {result.esf:.4f} vs {esf_true:.4f}",
        started,
        60.0,
    )


def test_criterion_08_thread_determinism(tmp_path):
    started = time.perf_counter()
    gen = make_generator(108)
    n, p = 10, 50
    values = gen.normal(0.0, 0.02, size=(n, p))
    labels = [f"s{j:02d}" for j in range(p)]
    lines = ["date," + ",".join(labels)]
    for i, row in enumerate(values):
        lines.append(f"2021-01-{i + 2:02d}," + ",".join(format(x, ".17g") for x in row))
    data = tmp_path / "wide.csv"
    data.write_text("\n".join(lines) + "\n", encoding="utf-8")
    weights = tmp_path / "w.csv"
    weights.write_text(
        "source,weight\n" + "\n".join(f"{s},{1.0 / p!r}" for s in labels) + "\n",
        encoding="utf-8",
    )
    outputs = []
    for threads in ("1", "8"):
        out = tmp_path / f"t{threads}.json"
        rc = cli.main(
            ["attribute", "--weights", str(weights), "--sims", "10000", "--seed", "11",
             "--threads", threads, str(data), "--output", str(out)]
        )
        assert rc == 0
        outputs.append(out.read_bytes())
    assert outputs[0] == outputs[1]
    finish(8, "attribute output byte-identical at --threads 1 and 8 (N=10000, p=50)", started, 30.0)


def test_criterion_09_sign_probability_estimator():
    started = time.perf_counter()
    n_sims = 10_000

    # probability exactly 1: a scalar posterior has strictly positive CCTR
    post1 = PosteriorParams(nu=5.0, scale=np.array([[3.0]]), n=3, p=1)
    samples = run_mc(post1, PortfolioWeights(np.array([1.0])), n_sims, seed=109)
    assert np.array_equal(prob_positive_cctr(samples), [1.0])

    # probability exactly 1/2: with a diagonal scale and omega = (1, 0) the
    # second source's marginal contribution is symmetric around zero
    post2 = PosteriorParams(nu=8.0, scale=6.0 * np.eye(2), n=4, p=2)
    samples = run_mc(post2, PortfolioWeights(np.array([1.0, 0.0])), n_sims, seed=110)
    margin = 3.0 * math.sqrt(0.5 * 0.5 / n_sims)
    estimate = prob_positive_mctr(samples)[1]
    assert abs(estimate - 0.5) <= margin
    # the zero-weight source itself sits on the boundary: never counted positive
    assert prob_positive_cctr(samples)[1] == 0.0
    finish(9, f"sign-probability estimator within 3 binomial SEs ({estimate:.3f} vs 0.5)", started, 5.0)


def test_criterion_10_order_diagnostic_bounded():
    started = time.perf_counter()
    gen = make_generator(110)
    n = 10
    ratios = []
    for p in (10, 20, 50, 100, 200):
        diag = gen.uniform(0.5, 2.0, size=p)
        corr = random_correlation(gen, p)
        sigma = corr * np.outer(np.sqrt(diag), np.sqrt(diag))
        sigma = (sigma + sigma.T) / 2.0
        lw_coeff, _ = theorem1_ratio(sigma, n=n, p=p, n0=float(p))
        ratios.append(lw_coeff / (p / (n + p)))
    spread = max(ratios) / min(ratios)
    assert spread <= 50.0
    finish(10, f"shrinkage-order ratio spread {spread:.2f} <= 50 over the dimension grid", started, 10.0)


INDICES_ENV = "RISKATTRIB_INDICES_CSV"
INDICES_DEFAULT = Path(__file__).resolve().parent.parent / "data" / "indices_returns.csv"

# published sign probabilities for the fixed-weight scheme, first and second
# three-month period
INDICES_EXPECTED = {
    "period1": [0.57, 0.64, 0.74, 0.83, 0.77],
    "period2": [0.77, 0.87, 0.87, 0.77, 0.94],
}
INDICES_WEIGHTS = np.array([0.05, 0.05, 0.20, 0.40, 0.30])


def test_criterion_11_conditional_indices_check():
    path = os.environ.get(INDICES_ENV, str(INDICES_DEFAULT))
    if not os.path.exists(path):
        pytest.skip(
            f"five-asset indices returns not supplied (set {INDICES_ENV} or place the "
            f"file at {INDICES_DEFAULT}); skipping the published-value comparison"
        )
    started = time.perf_counter()
    from riskattrib.ingest import PanelKind, load_csv

    panel = load_csv(path, PanelKind.RETURNS)
    assert panel.p == 5 and panel.n == 6, "expected six monthly rows of five asset classes"
    for key, rows in (("period1", range(0, 3)), ("period2", range(3, 6))):
        sub = panel.values[list(rows)]
        scatter = sample_covariance(sub)
        n0 = select_prior_df(3, 5, 1.5)
        psi = build_prior_scale(scatter, PriorTarget.SAMPLE_VARIANCE_DIAG)
        post = posterior_params(scatter, psi, n=3, n0=n0)
        samples = run_mc(post, PortfolioWeights(INDICES_WEIGHTS), 10_000, seed=111)
        probs = prob_positive_cctr(samples)
        gaps = np.abs(probs - np.array(INDICES_EXPECTED[key]))
        assert np.max(gaps) <= 0.05, f"{key}: P(CCTR>0) {probs} vs {INDICES_EXPECTED[key]}"
    finish(11, "published five-asset sign probabilities reproduced within 0.05", started, 60.0)


def test_criterion_12_pipeline_shape(tmp_path):
    started = time.perf_counter()
    gen = make_generator(112)
    labels = ["hybrid_bond", "emerging_mkt", "commodity", "bond", "stock"]
    values = gen.normal(0.004, 0.05, size=(3, 5))
    lines = ["date," + ",".join(labels)]
    for month, row in zip((5, 6, 7), values):
        lines.append(f"2008-{month:02d}-30," + ",".join(format(x, ".17g") for x in row))
    data = tmp_path / "indices.csv"
    data.write_text("\n".join(lines) + "\n", encoding="utf-8")

    est_out = tmp_path / "estimate.json"
    rc = cli.main(["estimate", "--estimator", "dhd", "--c", "1.5", str(data),
                   "--output", str(est_out)])
    assert rc == 0
    est_doc = json.loads(est_out.read_text())
    assert est_doc["n0"] == 3.5 and est_doc["min_eigenvalue"] > 0

    weights = tmp_path / "w.csv"
    weights.write_text(
        "source,weight\n"
        + "\n".join(f"{s},{float(w)!r}" for s, w in zip(labels, INDICES_WEIGHTS))
        + "\n",
        encoding="utf-8",
    )
    schemes = [
        ("adhoc", ["--weights", str(weights)]),
        ("blw", ["--optimize", "--estimator", "blw"]),
        ("dhd", ["--optimize", "--estimator", "dhd"]),
    ]
    for name, extra in schemes:
        out = tmp_path / f"attr_{name}.json"
        rc = cli.main(
            ["attribute", *extra, "--sims", "10000", "--seed", "12", str(data),
             "--output", str(out)]
        )
        assert rc == 0, name
        doc = json.loads(out.read_text())
        vol = doc["total_volatility"]
        assert vol["ci_lo"] <= vol["mean"] <= vol["ci_hi"]
        assert len(doc["cctr"]) == 5 and len(doc["mctr"]) == 5
        for entry in doc["cctr"] + doc["mctr"]:
            assert 0.0 <= entry["prob_positive"] <= 1.0
            assert entry["ci_lo"] <= entry["mean"] <= entry["ci_hi"]
        assert doc["tail_risk"]["esf"] >= doc["tail_risk"]["var"] > 0
    finish(12, "five-asset pipeline produces all report shapes for three weight schemes", started, 60.0)
