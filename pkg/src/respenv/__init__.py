"""Response-envelope multivariate regression with spectral regularization.

For the model y = B x + e, e ~ N(0, Sigma), the response space splits into a
u-dimensional material subspace carrying all of the x-dependence and an
immaterial complement carrying none. This package estimates that subspace by
minimizing a two-factor log-determinant score over orthonormal bases, with a
ridge shift S_X + lam*I that keeps everything well posed when p is large
(including p > n, where the ridgeless limit lam = 1e-8 defines the estimator).
It also ships exact finite-sample and proportional-limit prediction-risk
formulas, k-fold and nested leave-one-out tuning, a Monte Carlo experiment
harness, and a CLI (`respenv`).

Numerical hot loops compile with numba when available; set RESPENV_NUMBA=0
to force the pure-numpy fallback.
"""

__version__ = "0.1.0"

from .backend import NUMBA_ENABLED, backend_name
from .data import (
    DataSet,
    RegularizedStats,
    SufficientStats,
    compute_sufficient_stats,
    dataset_from_arrays,
    load_matrix_csv,
    prepare_dataset,
    regularize_stats,
    standardize_columns,
    symmetrize,
)
from .errors import EnvelopeError, NumericalError, ValidationError
from .estimators import (
    RIDGELESS_LAMBDA,
    EnvelopeDesign,
    EnvelopeFit,
    as_design,
    fit_envelope,
    fit_envelope_ridgeless,
    fit_ols,
    fit_ridge,
    load_model,
    predict,
    save_model,
)
from .grassmann import (
    ObjectiveSpec,
    SubspaceResult,
    envelope_objective,
    envelope_objective_gradient,
    optimize_envelope_subspace,
    orthonormal_complement,
)
from .risk import (
    AsymptoticRegime,
    RiskInputs,
    enhanced_prediction_risk,
    envelope_prediction_risk,
    lambda_improvement_bound,
    limiting_risk_enhanced,
    limiting_risk_envelope,
    risk_curve_rows,
    stieltjes_mp,
    write_risk_curve,
)
from .selection import (
    CVResult,
    default_lambda_grid,
    fold_indices,
    kfold_cv,
    nested_loocv,
    scaled_lambda_grid,
    write_cv_table,
)
from .simulate import (
    RiskRow,
    RiskTable,
    TrueModel,
    ar1_covariance,
    generate_data,
    generate_model,
    prediction_risk,
    run_double_descent_sweep,
    run_risk_table,
)

__all__ = [
    "__version__",
    "NUMBA_ENABLED",
    "backend_name",
    "DataSet",
    "SufficientStats",
    "RegularizedStats",
    "standardize_columns",
    "symmetrize",
    "prepare_dataset",
    "dataset_from_arrays",
    "compute_sufficient_stats",
    "regularize_stats",
    "load_matrix_csv",
    "EnvelopeError",
    "ValidationError",
    "NumericalError",
    "ObjectiveSpec",
    "SubspaceResult",
    "envelope_objective",
    "envelope_objective_gradient",
    "optimize_envelope_subspace",
    "orthonormal_complement",
    "RIDGELESS_LAMBDA",
    "EnvelopeDesign",
    "EnvelopeFit",
    "as_design",
    "fit_envelope",
    "fit_envelope_ridgeless",
    "fit_ols",
    "fit_ridge",
    "predict",
    "save_model",
    "load_model",
    "CVResult",
    "default_lambda_grid",
    "scaled_lambda_grid",
    "fold_indices",
    "kfold_cv",
    "nested_loocv",
    "write_cv_table",
    "RiskInputs",
    "AsymptoticRegime",
    "envelope_prediction_risk",
    "enhanced_prediction_risk",
    "lambda_improvement_bound",
    "stieltjes_mp",
    "limiting_risk_envelope",
    "limiting_risk_enhanced",
    "risk_curve_rows",
    "write_risk_curve",
    "TrueModel",
    "RiskRow",
    "RiskTable",
    "ar1_covariance",
    "generate_model",
    "generate_data",
    "prediction_risk",
    "run_risk_table",
    "run_double_descent_sweep",
]
