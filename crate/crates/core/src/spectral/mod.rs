//! Nystrom matrices, Perron pairs, the principal eigenvalue and the regime
//! of the principal eigen-object.

mod classify;
mod operator;
mod perron;

pub use classify::{
    classify_regime, convergence_summary, estimate_lambda_p, level_lambda_p, ConvergenceSummary, Eigenobject,
    EigenobjectKind, LambdaPEstimate, LevelDiagnostic, Regime, SpectralReport,
};
pub(crate) use operator::assemble_ktilde_at_level;
pub use operator::{assemble_full, assemble_ktilde, OperatorKind, OperatorMatrix};
pub use perron::{perron, perron_dense, perron_with, PerronMethod, PerronPair};
