//! Central finite-difference gradient verification (64-bit only).

use crate::error::{Result, TensorError};
use crate::graph::{Graph, Var};
use crate::params::ParamSet;
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GradCheckOptions {
    /// Finite-difference step.
    pub h: f64,
    /// Maximum tolerated relative error.
    pub tol: f64,
    /// Coordinates whose one-sided slopes disagree by more than this
    /// (relative) straddle a kink such as ReLU at zero and are skipped.
    pub kink_tol: f64,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        Self { h: 1e-5, tol: 1e-4, kink_tol: 1e-2 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// `(input, flat index)` of the worst coordinate.
    pub worst: Option<(usize, usize)>,
    pub checked: usize,
    pub skipped_kinks: usize,
}

/// `|a - n| / max(|a|, |n|, 1e-8)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8)
}

/// Checks the gradient of the scalar produced by `f` with respect to every
/// coordinate of every tensor in `inputs`.
///
/// `f` receives the graph and one leaf per input and must return a
/// one-element value. It is called once with differentiable leaves and
/// twice per coordinate with perturbed constant leaves.
pub fn grad_check<F>(f: F, inputs: &[Tensor<f64>], opts: GradCheckOptions) -> Result<GradCheckReport>
where
    F: Fn(&mut Graph<f64>, &[Var]) -> Result<Var>,
{
    let eval = |inputs: &[Tensor<f64>]| -> Result<f64> {
        let mut g = Graph::new();
        let vars = inputs.iter().map(|t| g.constant(t)).collect::<Result<Vec<_>>>()?;
        let out = f(&mut g, &vars)?;
        g.scalar(out)
    };

    let mut g = Graph::new();
    let vars = inputs.iter().map(|t| g.input(&t.clone().with_grad())).collect::<Result<Vec<_>>>()?;
    let out = f(&mut g, &vars)?;
    let base = g.scalar(out)?;
    let mut scratch = ParamSet::new();
    let grads = g.backward(out, &mut scratch)?;

    let mut report = GradCheckReport { max_rel_error: 0.0, worst: None, checked: 0, skipped_kinks: 0 };
    let mut failure = None;
    let mut work: Vec<Tensor<f64>> = inputs.to_vec();
    for (i, var) in vars.iter().enumerate() {
        let analytic = grads.get(*var).map(<[f64]>::to_vec).unwrap_or_else(|| vec![0.0; inputs[i].numel()]);
        for j in 0..inputs[i].numel() {
            let x0 = inputs[i].data()[j];
            work[i].data_mut()[j] = x0 + opts.h;
            let plus = eval(&work)?;
            work[i].data_mut()[j] = x0 - opts.h;
            let minus = eval(&work)?;
            work[i].data_mut()[j] = x0;

            let right = (plus - base) / opts.h;
            let left = (base - minus) / opts.h;
            let scale = right.abs().max(left.abs()).max(1.0);
            if (right - left).abs() > opts.kink_tol * scale {
                report.skipped_kinks += 1;
                continue;
            }
            let numeric = (plus - minus) / (2.0 * opts.h);
            let rel = relative_error(analytic[j], numeric);
            report.checked += 1;
            if rel > report.max_rel_error {
                report.max_rel_error = rel;
                report.worst = Some((i, j));
            }
            if rel > opts.tol && failure.is_none() {
                failure = Some(TensorError::GradCheck {
                    input: i,
                    index: j,
                    analytic: analytic[j],
                    numeric,
                    rel_error: rel,
                    tol: opts.tol,
                });
            }
        }
    }
    match failure {
        Some(e) => Err(e),
        None => Ok(report),
    }
}
