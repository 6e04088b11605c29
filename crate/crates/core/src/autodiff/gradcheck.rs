use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::tape::{Tape, Var};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Settings for [`finite_difference_check`].
#[derive(Debug, Clone)]
pub struct GradCheck {
    /// Central-difference step, must lie in `[1e-6, 1e-4]`.
    pub h: f64,
    /// Upper bound on checked coordinates; sampled uniformly beyond it.
    pub max_coords: usize,
    pub seed: u64,
}

impl Default for GradCheck {
    fn default() -> Self {
        Self {
            h: 1e-5,
            max_coords: 200,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub coords_checked: usize,
    /// `(param index, flat coordinate)` of the worst coordinate.
    pub worst: Option<(usize, usize)>,
}

fn eval<F>(f: &F, params: &[Tensor]) -> Result<f64>
where
    F: for<'t> Fn(&'t Tape, &[Var<'t>]) -> Result<Var<'t>>,
{
    let tape = Tape::new();
    let vars: Vec<_> = params.iter().map(|p| tape.param(p.clone())).collect();
    let out = f(&tape, &vars)?;
    let v = out.item();
    if !v.is_finite() {
        return Err(Error::Numeric(format!("function value is {v}")));
    }
    Ok(v)
}

/// Compares tape gradients of the scalar `f` against central differences
/// `(f(x+h) - f(x-h)) / 2h`. The relative error of a coordinate is
/// `|a - n| / max(|a|, |n|, 1e-8)`; coordinates for which `exclude`
/// returns true (kinks) are skipped.
pub fn finite_difference_check<F>(
    f: F,
    params: &[Tensor],
    opts: &GradCheck,
    exclude: impl Fn(usize, usize) -> bool,
) -> Result<GradCheckReport>
where
    F: for<'t> Fn(&'t Tape, &[Var<'t>]) -> Result<Var<'t>>,
{
    if !(1e-6..=1e-4).contains(&opts.h) {
        return Err(Error::Contract(format!(
            "finite-difference step {} outside [1e-6, 1e-4]",
            opts.h
        )));
    }

    let tape = Tape::new();
    let vars: Vec<_> = params.iter().map(|p| tape.param(p.clone())).collect();
    let out = f(&tape, &vars)?;
    if !out.item().is_finite() {
        return Err(Error::Numeric(format!("function value is {}", out.item())));
    }
    let grads = tape.backward(out)?;
    let analytic: Vec<Tensor> = vars.iter().map(|v| grads.get_or_zeros(*v)).collect();

    let coords: Vec<(usize, usize)> = params
        .iter()
        .enumerate()
        .flat_map(|(p, t)| (0..t.len()).map(move |c| (p, c)))
        .filter(|&(p, c)| !exclude(p, c))
        .collect();
    let picked: Vec<(usize, usize)> = if coords.len() <= opts.max_coords {
        coords
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        let mut idx = index::sample(&mut rng, coords.len(), opts.max_coords).into_vec();
        idx.sort_unstable();
        idx.into_iter().map(|i| coords[i]).collect()
    };

    let mut work = params.to_vec();
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        coords_checked: picked.len(),
        worst: None,
    };
    for (p, c) in picked {
        let orig = work[p].data()[c];
        work[p].data_mut()[c] = orig + opts.h;
        let plus = eval(&f, &work)?;
        work[p].data_mut()[c] = orig - opts.h;
        let minus = eval(&f, &work)?;
        work[p].data_mut()[c] = orig;

        let numeric = (plus - minus) / (2.0 * opts.h);
        let a = analytic[p].data()[c];
        let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-8);
        if rel > report.max_rel_error || report.worst.is_none() {
            report.max_rel_error = report.max_rel_error.max(rel);
            report.worst = Some((p, c));
        }
    }
    Ok(report)
}
