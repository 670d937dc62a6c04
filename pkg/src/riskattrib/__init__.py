"""Bayesian covariance regularization and Monte Carlo portfolio risk attribution.

The package regularizes ill-posed (n < p) covariance estimation through an
inverse-Wishart posterior, decomposes portfolio volatility into per-source
marginal and conditional contributions with posterior uncertainty, and adds
value-at-risk / expected-shortfall estimates, a long-only mean-variance
optimizer, and a rolling out-sample backtest.
"""

from .attribution import (
    AttributionSamples,
    PortfolioWeights,
    PosteriorSummary,
    TailRisk,
    portfolio_volatility,
    prob_positive_cctr,
    prob_positive_mctr,
    risk_decomposition,
    run_mc,
    summarize,
    tail_risk,
)
from .ingest import (
    PanelKind,
    PeriodScheme,
    PricePanel,
    ReturnPanel,
    load_csv,
    log_returns,
    slice_periods,
    write_csv,
)
from .matstat import (
    CholeskyFactor,
    RngStream,
    cholesky,
    pd_inverse,
    sample_covariance,
    sample_inverse_wishart,
    sample_mvn,
    sample_wishart,
    scaled_frobenius_sq,
)
from .portfolio import (
    BacktestReport,
    OptimizerConfig,
    backtest,
    backtest_panels,
    optimize_weights,
    sharpe_ratio,
)
from .posterior import (
    PosteriorParams,
    PriorSpec,
    PriorTarget,
    build_prior_scale,
    posterior_params,
    select_prior_df,
)
from .shrinkage import (
    CovarianceEstimate,
    EstimatorKind,
    ShrinkageConstants,
    estimate_by_name,
    estimate_sample,
    estimate_sigma13,
    estimate_sigma23,
    oracle_constants,
    posterior_mode,
    rho_optimal,
    theorem1_ratio,
)

__version__ = "0.1.0"
