//! Central finite-difference verification of tape gradients (double
//! precision).

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Result, TensorError};
use crate::{Tape, Tensor, Var};

#[derive(Clone, Debug)]
pub struct GradCheck {
    /// Finite-difference step.
    pub eps: f64,
    /// Largest acceptable relative error.
    pub tol: f64,
    /// Denominator floor: relative error is
    /// `|a - n| / max(|a|, |n|, floor, r / tol)` where `r` is the round-off
    /// resolution of the difference quotient, `10 ε_mach max(|f|, 1) / eps`.
    pub floor: f64,
    /// Coordinates checked per input; larger inputs are subsampled.
    pub max_coords: usize,
    pub seed: u64,
    /// Times the step is divided by 10 at a coordinate whose one-sided
    /// differences disagree (a ReLU-style kink inside the stencil).
    pub kink_retries: usize,
}

impl Default for GradCheck {
    fn default() -> Self {
        GradCheck {
            eps: 1e-5,
            tol: 1e-4,
            floor: 1e-6,
            max_coords: 64,
            seed: 0,
            kink_retries: 2,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct InputCheck {
    pub checked: usize,
    pub max_rel_err: f64,
    pub max_abs_err: f64,
    /// Flat index of the worst coordinate.
    pub worst: usize,
    /// Coordinates re-measured with a smaller step after a kink was seen.
    pub kinks: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    pub tol: f64,
    pub inputs: Vec<InputCheck>,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.inputs.iter().all(|i| i.max_rel_err <= self.tol)
    }

    pub fn max_rel_err(&self) -> f64 {
        self.inputs.iter().map(|i| i.max_rel_err).fold(0.0, f64::max)
    }

    /// Indices of inputs whose error exceeds the tolerance.
    pub fn failures(&self) -> Vec<usize> {
        (0..self.inputs.len())
            .filter(|&i| self.inputs[i].max_rel_err > self.tol)
            .collect()
    }
}

fn evaluate<F>(f: &F, inputs: &[Tensor<f64>]) -> Result<f64>
where
    F: for<'t> Fn(&[Var<'t, f64>]) -> Result<Var<'t, f64>>,
{
    let tape = Tape::new();
    let vars: Vec<_> = inputs.iter().map(|t| tape.param(t.clone())).collect();
    let out = f(&vars)?;
    if out.shape().numel() != 1 {
        return Err(TensorError::NotScalar(out.shape()));
    }
    Ok(out.item())
}

/// Compares tape gradients of the scalar function `f` against
/// `(f(x + eps) - f(x - eps)) / 2 eps` for every input.
pub fn grad_check<F>(f: F, inputs: &[Tensor<f64>], cfg: &GradCheck) -> Result<GradCheckReport>
where
    F: for<'t> Fn(&[Var<'t, f64>]) -> Result<Var<'t, f64>>,
{
    let analytic = {
        let tape = Tape::new();
        let vars: Vec<_> = inputs.iter().map(|t| tape.param(t.clone())).collect();
        let out = f(&vars)?;
        if out.shape().numel() != 1 {
            return Err(TensorError::NotScalar(out.shape()));
        }
        tape.gradients(out, &vars)?
    };

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut work: Vec<Tensor<f64>> = inputs.to_vec();
    let mut report = Vec::with_capacity(inputs.len());
    for (i, input) in inputs.iter().enumerate() {
        let n = input.numel();
        let coords: Vec<usize> = if n <= cfg.max_coords {
            (0..n).collect()
        } else {
            let mut c = sample(&mut rng, n, cfg.max_coords).into_vec();
            c.sort_unstable();
            c
        };
        let mut check = InputCheck {
            checked: coords.len(),
            max_rel_err: 0.0,
            max_abs_err: 0.0,
            worst: 0,
            kinks: 0,
        };
        let centre = evaluate(&f, &work)?;
        for &j in &coords {
            let a = analytic[i].data()[j];
            let mut eps = cfg.eps;
            let mut attempt = 0;
            let (abs_err, rel) = loop {
                let orig = input.data()[j];
                work[i].data_mut()[j] = orig + eps;
                let plus = evaluate(&f, &work)?;
                work[i].data_mut()[j] = orig - eps;
                let minus = evaluate(&f, &work)?;
                work[i].data_mut()[j] = orig;
                let numeric = (plus - minus) / (2.0 * eps);
                let abs_err = (a - numeric).abs();
                // Below the difference quotient's round-off resolution a
                // relative error is meaningless; such coordinates are judged
                // on absolute error against that resolution.
                let resolution = 10.0 * f64::EPSILON * centre.abs().max(1.0) / eps;
                let rel = abs_err / a.abs().max(numeric.abs()).max(cfg.floor).max(resolution / cfg.tol);
                let (fwd, bwd) = ((plus - centre) / eps, (centre - minus) / eps);
                // Smooth functions give |fwd - bwd| ~ eps |f''|, far below a
                // genuine gradient error; a kink gives about twice abs_err.
                let kinked = (fwd - bwd).abs() > abs_err;
                if rel <= cfg.tol || !kinked || attempt == cfg.kink_retries {
                    break (abs_err, rel);
                }
                if attempt == 0 {
                    check.kinks += 1;
                }
                attempt += 1;
                eps /= 10.0;
            };
            if rel > check.max_rel_err || rel.is_nan() {
                check.max_rel_err = if rel.is_nan() { f64::INFINITY } else { rel };
                check.worst = j;
            }
            check.max_abs_err = check.max_abs_err.max(abs_err);
        }
        report.push(check);
    }
    Ok(GradCheckReport {
        tol: cfg.tol,
        inputs: report,
    })
}
