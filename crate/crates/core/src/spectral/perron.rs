use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::operator::OperatorMatrix;

/// Perron root and positive eigenvector, normalized to max 1.
#[derive(Debug, Clone)]
pub struct PerronPair {
    pub value: f64,
    pub vector: DVector<f64>,
    pub iterations: usize,
    /// `||M v - value v||_inf / ||v||_inf`
    pub residual: f64,
    /// Collatz-Wielandt bounds `(min, max)` of `(M v)_i / v_i` at every step.
    pub cw_trace: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerronMethod {
    /// Power iteration on `M + shift I`.
    Power,
    /// Power iteration on `(sigma I - M)^-1` with `sigma` above the root.
    ShiftInvert,
    /// Power iteration, then shift-invert if the gap is too small.
    #[default]
    Auto,
}

const AUTO_POWER_STEPS: usize = 2000;
const RATE_WINDOW: usize = 25;
const MAX_REFACTOR: usize = 6;
const REFACTOR_AFTER: usize = 8;

/// Power iteration from the all-ones vector.
pub fn perron(matrix: &OperatorMatrix, tol_power: f64, max_iter: usize) -> Result<PerronPair> {
    perron_dense(&matrix.entries, matrix.shift, tol_power, max_iter, PerronMethod::Power)
}

pub fn perron_with(
    matrix: &OperatorMatrix,
    tol_power: f64,
    max_iter: usize,
    method: PerronMethod,
) -> Result<PerronPair> {
    perron_dense(&matrix.entries, matrix.shift, tol_power, max_iter, method)
}

/// Perron pair of `m`, where `m + shift I` is entrywise nonnegative.
pub fn perron_dense(
    m: &DMatrix<f64>,
    shift: f64,
    tol_power: f64,
    max_iter: usize,
    method: PerronMethod,
) -> Result<PerronPair> {
    let n = m.nrows();
    if n == 0 || m.ncols() != n {
        return Err(Error::config(format!(
            "Perron iteration needs a nonempty square matrix, got {}x{}",
            n,
            m.ncols()
        )));
    }
    if !(tol_power > 0.0) || max_iter == 0 {
        return Err(Error::config("tol_power must be positive and max_iter nonzero"));
    }
    let mut state = State::new(m, shift);
    let done = match method {
        PerronMethod::Power => state.power(tol_power, max_iter)?,
        PerronMethod::ShiftInvert => state.shift_invert(tol_power, max_iter)?,
        PerronMethod::Auto => {
            state.power_while_fast(tol_power, AUTO_POWER_STEPS.min(max_iter))?
                || (state.iterations < max_iter && state.shift_invert(tol_power, max_iter)?)
        }
    };
    if !done {
        return Err(Error::IterationLimit {
            iterations: state.iterations,
            residual: state.residual,
        });
    }
    state.finish()
}

struct State<'a> {
    m: &'a DMatrix<f64>,
    shift: f64,
    v: DVector<f64>,
    mv: DVector<f64>,
    value: f64,
    residual: f64,
    iterations: usize,
    trace: Vec<(f64, f64)>,
    residuals: Vec<f64>,
}

impl<'a> State<'a> {
    fn new(m: &'a DMatrix<f64>, shift: f64) -> Self {
        let n = m.nrows();
        State {
            m,
            shift,
            v: DVector::from_element(n, 1.0),
            mv: DVector::zeros(n),
            value: f64::NAN,
            residual: f64::INFINITY,
            iterations: 0,
            trace: Vec::new(),
            residuals: Vec::new(),
        }
    }

    /// Applies `m` to the current vector, records the bounds and the residual.
    fn measure(&mut self, tol: f64) -> Result<bool> {
        self.m.mul_to(&self.v, &mut self.mv);
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for (w, v) in self.mv.iter().zip(self.v.iter()) {
            if !w.is_finite() {
                return Err(Error::LinearSolve("non-finite value in Perron iteration".into()));
            }
            if *v > 0.0 {
                let r = w / v;
                lo = lo.min(r);
                hi = hi.max(r);
            }
        }
        self.trace.push((lo, hi));
        self.value = self.mv.dot(&self.v) / self.v.dot(&self.v);
        let scale = self.v.amax();
        self.residual = (&self.mv - self.value * &self.v).amax() / scale;
        self.residuals.push(self.residual);
        Ok(self.residual <= tol)
    }

    fn normalize(v: &mut DVector<f64>) -> Result<()> {
        let top = v.max();
        if !(top > 0.0 && top.is_finite()) {
            return Err(Error::InvalidEigenpair("iterate lost positivity".into()));
        }
        *v /= top;
        Ok(())
    }

    fn power(&mut self, tol: f64, limit: usize) -> Result<bool> {
        while self.iterations < limit {
            self.iterations += 1;
            if self.measure(tol)? {
                return Ok(true);
            }
            let mut next = &self.mv + self.shift * &self.v;
            Self::normalize(&mut next)?;
            self.v = next;
        }
        Ok(false)
    }

    /// Power steps while the observed contraction predicts convergence
    /// cheaper than a factorization.
    fn power_while_fast(&mut self, tol: f64, limit: usize) -> Result<bool> {
        let n = self.m.nrows() as f64;
        while self.iterations < limit {
            if self.power(tol, (self.iterations + RATE_WINDOW).min(limit))? {
                return Ok(true);
            }
            let k = self.residuals.len();
            if k > RATE_WINDOW {
                let rate = (self.residuals[k - 1] / self.residuals[k - 1 - RATE_WINDOW]).powf(1.0 / RATE_WINDOW as f64);
                let predicted = (tol / self.residual).ln() / rate.ln();
                if !(rate < 1.0 && predicted <= n / 3.0 + 50.0) {
                    return Ok(false);
                }
            }
        }
        Ok(false)
    }

    fn shift_invert(&mut self, tol: f64, limit: usize) -> Result<bool> {
        let n = self.m.nrows();
        let mut refactors = 0;
        let mut lu = None;
        let mut factored_spread = f64::INFINITY;
        let mut since = 0;
        while self.iterations < limit {
            self.iterations += 1;
            if self.measure(tol)? {
                return Ok(true);
            }
            // hi bounds the root from above; the Rayleigh value approaches it
            // much faster than lo when the Perron vector has tiny entries
            let hi = self.trace.last().expect("measured").1;
            let spread = (hi - self.value).max(1e-14 * hi.abs().max(1.0));
            let stalled = since >= REFACTOR_AFTER && spread < 1e-2 * factored_spread && refactors < MAX_REFACTOR;
            if lu.is_none() || stalled {
                factored_spread = spread;
                since = 0;
                let sigma = hi + spread;
                let mut s = -self.m.clone();
                for i in 0..n {
                    s[(i, i)] += sigma;
                }
                lu = Some(s.lu());
                refactors += 1;
            }
            since += 1;
            let mut next = lu
                .as_ref()
                .expect("factored")
                .solve(&self.v)
                .ok_or_else(|| Error::LinearSolve("shifted matrix is singular".into()))?;
            Self::normalize(&mut next)?;
            self.v = next;
        }
        Ok(false)
    }

    fn finish(self) -> Result<PerronPair> {
        if let Some(i) = self.v.iter().position(|v| !(*v > 0.0)) {
            return Err(Error::InvalidEigenpair(format!(
                "Perron vector has nonpositive entry {} at {i}; matrix may be reducible",
                self.v[i]
            )));
        }
        Ok(PerronPair {
            value: self.value,
            vector: self.v,
            iterations: self.iterations,
            residual: self.residual,
            cw_trace: self.trace,
        })
    }
}
