//! Kernel, coefficient and the assembled problem, with the sampled checks
//! of hypotheses (H1)-(H3).

pub mod coefficient;
pub mod kernel;
pub mod problem;

pub use coefficient::{
    check_recip_integrability, detect_argmax_set, recip_profile, CoefficientFamily, CoefficientField, MaxComponent,
    MaxSet, RecipIntegrability, RecipProfile,
};
pub use kernel::{DispersalKernel, H2Witness, Kernel, KernelFamily, Profile, ScaleField};
pub use problem::{Problem, ProblemSpec, Tolerances};
