use std::sync::Arc;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::Grid;
use crate::model::Problem;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OperatorKind {
    /// `K(x_i, x_j) w_j + a(x_i) delta_ij`
    Full,
    /// `K(x_i, x_j) w_j / (a0 - a(x_j))`
    Ktilde { x0: Vec<f64>, a0: f64 },
}

/// Dense Nystrom matrix on a grid.
#[derive(Debug, Clone)]
pub struct OperatorMatrix {
    pub entries: DMatrix<f64>,
    pub kind: OperatorKind,
    pub grid: Arc<Grid>,
    /// `entries + shift * I` is entrywise nonnegative.
    pub shift: f64,
}

impl OperatorMatrix {
    pub fn len(&self) -> usize {
        self.entries.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.nrows() == 0
    }
}

fn kernel_matrix(problem: &Problem, column_scale: impl Fn(usize) -> f64) -> DMatrix<f64> {
    let grid = problem.grid();
    let kernel = problem.kernel();
    let n = grid.len();
    let scale: Vec<f64> = (0..n).map(|j| grid.weights()[j] * column_scale(j)).collect();
    if let Some(rho) = kernel.constant_value() {
        return DMatrix::from_fn(n, n, |_, j| rho * scale[j]);
    }
    DMatrix::from_fn(n, n, |i, j| kernel.eval(grid.node(i), grid.node(j)) * scale[j])
}

/// The discretized full operator. The recorded shift is `-min_i a(x_i)`.
pub fn assemble_full(problem: &Problem) -> OperatorMatrix {
    let mut entries = kernel_matrix(problem, |_| 1.0);
    let a = problem.a_values();
    for (i, ai) in a.iter().enumerate() {
        entries[(i, i)] += ai;
    }
    let min_a = a.iter().cloned().fold(f64::INFINITY, f64::min);
    OperatorMatrix {
        entries,
        kind: OperatorKind::Full,
        grid: problem.grid().clone(),
        shift: -min_a,
    }
}

/// The weighted operator with denominator `a(x0) - a(y)`.
pub fn assemble_ktilde(problem: &Problem, x0: &[f64]) -> Result<OperatorMatrix> {
    problem.check_in_max_set(x0)?;
    let a0 = problem.coeff().eval(x0);
    assemble_ktilde_at_level(problem, x0, a0)
}

pub(crate) fn assemble_ktilde_at_level(problem: &Problem, x0: &[f64], a0: f64) -> Result<OperatorMatrix> {
    let a = problem.a_values();
    if let Some(index) = a.iter().position(|&v| v >= a0) {
        return Err(Error::SingularNode {
            index,
            value: a[index],
            peak: a0,
        });
    }
    let entries = kernel_matrix(problem, |j| 1.0 / (a0 - a[j]));
    if entries.iter().any(|v| !v.is_finite()) {
        return Err(Error::LinearSolve("non-finite entry in K~".into()));
    }
    Ok(OperatorMatrix {
        entries,
        kind: OperatorKind::Ktilde { x0: x0.to_vec(), a0 },
        grid: problem.grid().clone(),
        shift: 0.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Domain, GridSpec};
    use crate::model::{CoefficientField, Kernel, ProblemSpec};

    fn unit_interval(kernel: Kernel, coeff: CoefficientField, n: usize) -> Problem {
        ProblemSpec::new(Domain::interval(0.0, 1.0).unwrap(), kernel, coeff, GridSpec::new(n))
            .build(0)
            .unwrap()
    }

    #[test]
    fn two_node_constant() {
        let p = unit_interval(Kernel::constant(1.0).unwrap(), CoefficientField::constant(0.0), 2);
        let m = assemble_full(&p);
        assert_eq!(m.entries, DMatrix::from_row_slice(2, 2, &[0.5, 0.5, 0.5, 0.5]));
    }

    #[test]
    fn two_node_linear_coefficient() {
        let a = CoefficientField::custom("x", |x| x[0]);
        let p = unit_interval(Kernel::constant(1.0).unwrap(), a, 2);
        let m = assemble_full(&p);
        let expected = DMatrix::from_row_slice(2, 2, &[0.75, 0.5, 0.5, 1.25]);
        assert!((m.entries - expected).abs().max() < 1e-15);
        assert_eq!(m.shift, -0.25);
    }

    #[test]
    fn rows_integrate_the_kernel() {
        let k = Kernel::custom("exp", |x, y| (-(x[0] - y[0]).powi(2)).exp());
        let p = unit_interval(k.clone(), CoefficientField::custom("sin", |x| x[0].sin()), 200);
        let m = assemble_full(&p);
        let g = p.grid();
        for i in [0, 57, 199] {
            let x = g.node(i)[0];
            let row: f64 = m.entries.row(i).iter().sum::<f64>() - x.sin();
            // int_0^1 exp(-(x-y)^2) dy by a fine midpoint rule
            let fine: f64 = (0..20000)
                .map(|k| (-(x - (k as f64 + 0.5) / 20000.0).powi(2)).exp() / 20000.0)
                .sum();
            assert!((row - fine).abs() < 1e-5, "{row} {fine}");
        }
    }

    #[test]
    fn ktilde_three_nodes_by_hand() {
        // nodes 1/6, 1/2, 5/6; a(x) = -x^2 peaks at x = 0 on the boundary
        let a = CoefficientField::custom("-x^2", |x| -x[0] * x[0]);
        let k = Kernel::custom("1+xy", |x, y| 1.0 + x[0] * y[0]);
        let p = unit_interval(k, a, 3);
        let m = assemble_ktilde(&p, &[0.0]).unwrap();
        let x = [1.0 / 6.0, 0.5, 5.0 / 6.0];
        for i in 0..3 {
            for j in 0..3 {
                let expected = (1.0 + x[i] * x[j]) * (1.0 / 3.0) / (x[j] * x[j]);
                assert!((m.entries[(i, j)] - expected).abs() < 1e-12 * expected);
            }
        }
    }

    #[test]
    fn ktilde_constant_columns() {
        let a = CoefficientField::custom("-x", |x| -x[0]);
        let p = unit_interval(Kernel::constant(0.3).unwrap(), a, 7);
        let m = assemble_ktilde(&p, &[0.0]).unwrap();
        for j in 0..7 {
            let col = m.entries.column(j);
            assert!(col.iter().all(|v| *v == col[0]));
        }
        assert!(matches!(assemble_ktilde(&p, &[0.5]), Err(Error::NotInMaxSet { .. })));
    }

    #[test]
    fn ktilde_detects_nodes_on_the_argmax_set() {
        let a = CoefficientField::custom("tent", |x| -(x[0] - 0.5).abs());
        let p = unit_interval(Kernel::constant(0.3).unwrap(), a, 3);
        assert!(matches!(
            assemble_ktilde(&p, &[0.5]),
            Err(Error::SingularNode { index: 1, .. })
        ));
    }
}
