//! The unit-ball and unit-cylinder examples with a constant kernel.

use crate::error::Result;
use crate::geometry::{Domain, GradeSpec, GridSpec};
use crate::model::{CoefficientField, Kernel, ProblemSpec};

/// `a = 1 - |x|^2` on the unit ball of R^3, `K = rho`.
pub fn ball(rho: f64) -> Result<ProblemSpec> {
    Ok(ProblemSpec::new(
        Domain::ball(vec![0.0; 3], 1.0)?,
        Kernel::constant(rho)?,
        CoefficientField::radial_power(vec![0.0; 3], 1.0, 1.0, 2.0)?,
        ball_grid(),
    ))
}

pub fn ball_grid() -> GridSpec {
    GridSpec::new(4).angular(4).graded(GradeSpec::with_depth(8))
}

/// `a = 1 - sqrt(x1^2 + x2^2)` on the unit cylinder of height 1, `K = rho`.
pub fn cylinder(rho: f64) -> Result<ProblemSpec> {
    Ok(ProblemSpec::new(
        Domain::cylinder(1.0, 1.0)?,
        Kernel::constant(rho)?,
        CoefficientField::axial_power(1.0, 1.0, 1.0)?,
        cylinder_grid(),
    ))
}

pub fn cylinder_grid() -> GridSpec {
    GridSpec::new(2).angular(4).axial(2).graded(GradeSpec::with_depth(10))
}
