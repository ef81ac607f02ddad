//! Central-difference verification of analytic gradients.

use super::{Graph, Tensor, Var};
use crate::error::{Error, Result};
use crate::rng::SplitMix64;

pub const DEFAULT_STEP: f64 = 1e-5;

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    /// `max |analytic - numeric| / max(1, |analytic|, |numeric|)`.
    pub max_rel_error: f64,
    /// `(input index, flat coordinate)` of the worst coordinate.
    pub worst: Option<(usize, usize)>,
    pub coords_checked: usize,
}

impl GradCheckReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.max_rel_error < tol
    }
}

fn eval<F>(f: &F, inputs: &[Tensor]) -> Result<f64>
where
    F: for<'g> Fn(&'g Graph, &[Var<'g>]) -> Result<Var<'g>>,
{
    let g = Graph::new();
    let vars: Vec<_> = inputs.iter().map(|t| g.constant(t.clone())).collect();
    f(&g, &vars)?.item()
}

/// Checks the gradient of a scalar function of one tensor.
pub fn grad_check<F>(f: F, x: &Tensor, h: f64) -> Result<GradCheckReport>
where
    F: for<'g> Fn(&'g Graph, Var<'g>) -> Result<Var<'g>>,
{
    grad_check_many(|g, v| f(g, v[0]), std::slice::from_ref(x), h)
}

/// Checks the gradients of a scalar function of several tensors at every
/// coordinate.
pub fn grad_check_many<F>(f: F, inputs: &[Tensor], h: f64) -> Result<GradCheckReport>
where
    F: for<'g> Fn(&'g Graph, &[Var<'g>]) -> Result<Var<'g>>,
{
    let coords: Vec<Vec<usize>> = inputs.iter().map(|t| (0..t.len()).collect()).collect();
    check(&f, inputs, h, &coords)
}

/// Like [`grad_check_many`] but probes at most `per_input` randomly chosen
/// coordinates of each input.
pub fn grad_check_sampled<F>(
    f: F,
    inputs: &[Tensor],
    h: f64,
    per_input: usize,
    rng: &mut SplitMix64,
) -> Result<GradCheckReport>
where
    F: for<'g> Fn(&'g Graph, &[Var<'g>]) -> Result<Var<'g>>,
{
    let coords: Vec<Vec<usize>> = inputs
        .iter()
        .map(|t| {
            let mut all: Vec<usize> = (0..t.len()).collect();
            if all.len() > per_input {
                rng.shuffle(&mut all);
                all.truncate(per_input);
                all.sort_unstable();
            }
            all
        })
        .collect();
    check(&f, inputs, h, &coords)
}

fn check<F>(f: &F, inputs: &[Tensor], h: f64, coords: &[Vec<usize>]) -> Result<GradCheckReport>
where
    F: for<'g> Fn(&'g Graph, &[Var<'g>]) -> Result<Var<'g>>,
{
    if h <= 0.0 {
        return Err(Error::InvalidArgument("grad_check step must be positive".into()));
    }
    let analytic: Vec<Tensor> = {
        let g = Graph::new();
        let vars: Vec<_> = inputs.iter().map(|t| g.leaf(t.clone())).collect();
        let out = f(&g, &vars)?;
        g.backward(out)?;
        vars.iter()
            .zip(inputs)
            .map(|(v, t)| v.grad().unwrap_or_else(|| Tensor::zeros_like(t)))
            .collect()
    };
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst: None,
        coords_checked: 0,
    };
    let mut probe = inputs.to_vec();
    for (i, idxs) in coords.iter().enumerate() {
        for &c in idxs {
            let orig = probe[i].data()[c];
            probe[i].data_mut()[c] = orig + h;
            let plus = eval(f, &probe)?;
            probe[i].data_mut()[c] = orig - h;
            let minus = eval(f, &probe)?;
            probe[i].data_mut()[c] = orig;

            let numeric = (plus - minus) / (2.0 * h);
            let a = analytic[i].data()[c];
            let err = (a - numeric).abs() / 1f64.max(a.abs()).max(numeric.abs());
            report.coords_checked += 1;
            if err > report.max_rel_error || report.worst.is_none() {
                report.max_rel_error = report.max_rel_error.max(err);
                report.worst = Some((i, c));
            }
        }
    }
    Ok(report)
}
