//! Central finite-difference verification of tape gradients (double precision).

use super::{ParamId, ParamStore, Result, Tape, Tensor, TensorError, Var};

#[derive(Clone, Debug, PartialEq)]
pub struct GradcheckReport {
    /// Largest `|analytic - numeric| / max(|analytic|, |numeric|, 1e-3)`.
    pub max_rel_error: f64,
    pub max_abs_error: f64,
    /// `(input index, coordinate)` where the largest relative error occurred.
    pub worst: Option<(usize, usize)>,
    pub checked: usize,
    /// Coordinates left out: explicitly excluded or detected as kinks.
    pub skipped: usize,
    pub passed: bool,
}

type Exclusion<'a> = &'a dyn Fn(usize, usize) -> bool;

/// Settings for [`GradcheckOptions::run`].
#[derive(Clone, Copy)]
pub struct GradcheckOptions<'a> {
    pub epsilon: f64,
    pub tol: f64,
    /// Skip a coordinate when its forward and backward one-sided differences
    /// disagree by more than this, i.e. a kink lies within `epsilon`.
    pub kink_threshold: Option<f64>,
    /// Check every `stride`-th coordinate of each input.
    pub stride: usize,
    pub exclude: Option<Exclusion<'a>>,
}

impl<'a> GradcheckOptions<'a> {
    pub fn new(epsilon: f64, tol: f64) -> Self {
        GradcheckOptions { epsilon, tol, kink_threshold: None, stride: 1, exclude: None }
    }

    pub fn kink_threshold(mut self, threshold: f64) -> Self {
        self.kink_threshold = Some(threshold);
        self
    }

    pub fn stride(mut self, stride: usize) -> Self {
        self.stride = stride.max(1);
        self
    }

    pub fn exclude(mut self, f: Exclusion<'a>) -> Self {
        self.exclude = Some(f);
        self
    }

    pub fn run<F>(&self, f: F, inputs: &[Tensor<f64>]) -> Result<GradcheckReport>
    where
        F: Fn(&Tape<f64>, &[Var<f64>]) -> Result<Var<f64>>,
    {
        let tape = Tape::new();
        let vars: Vec<_> = inputs.iter().map(|t| tape.leaf(t.clone())).collect();
        let out = f(&tape, &vars)?;
        let base = finite(out.value().item())?;
        let grads = tape.backward(&out)?;
        let analytic: Vec<Vec<f64>> =
            vars.iter().map(|v| grads.get(v).map_or_else(|| vec![0.0; v.value().numel()], |g| g.to_vec())).collect();
        drop(grads);
        drop(tape);

        let eval = |which: usize, coord: usize, delta: f64| -> Result<f64> {
            let tape = Tape::inference();
            let vars: Vec<_> = inputs
                .iter()
                .enumerate()
                .map(|(i, t)| {
                    if i == which {
                        let mut data = t.to_vec();
                        data[coord] += delta;
                        Var::constant(Tensor::from_parts(t.shape().to_vec(), data))
                    } else {
                        Var::constant(t.clone())
                    }
                })
                .collect();
            finite(f(&tape, &vars)?.value().item())
        };

        let sizes: Vec<usize> = inputs.iter().map(|t| t.numel()).collect();
        self.compare(&sizes, &analytic, base, eval)
    }

    /// Checks gradients with respect to every parameter of `store`; `f` builds
    /// the scalar loss from parameters fetched with [`Tape::param`].
    pub fn run_params<F>(&self, f: F, store: &ParamStore<f64>) -> Result<GradcheckReport>
    where
        F: Fn(&Tape<f64>, &ParamStore<f64>) -> Result<Var<f64>>,
    {
        let mut work = store.clone();
        work.zero_grad();
        let tape = Tape::new();
        let out = f(&tape, &work)?;
        let base = finite(out.value().item())?;
        tape.backward(&out)?.accumulate_into(&mut work);
        drop(tape);
        let analytic: Vec<Vec<f64>> = work.iter().map(|(_, p)| p.grad().to_vec()).collect();
        let sizes: Vec<usize> = work.iter().map(|(_, p)| p.value().numel()).collect();
        let ids: Vec<ParamId> = work.iter().map(|(id, _)| id).collect();

        let eval = |which: usize, coord: usize, delta: f64| -> Result<f64> {
            let mut perturbed = store.clone();
            let id = ids[which];
            let mut value = perturbed.value(id).clone();
            value.data_mut()[coord] += delta;
            perturbed.set_value(id, value)?;
            finite(f(&Tape::inference(), &perturbed)?.value().item())
        };
        self.compare(&sizes, &analytic, base, eval)
    }

    fn compare(
        &self,
        sizes: &[usize],
        analytic: &[Vec<f64>],
        base: f64,
        eval: impl Fn(usize, usize, f64) -> Result<f64>,
    ) -> Result<GradcheckReport> {
        let mut report = GradcheckReport {
            max_rel_error: 0.0,
            max_abs_error: 0.0,
            worst: None,
            checked: 0,
            skipped: 0,
            passed: true,
        };
        let eps = self.epsilon;
        for (i, &size) in sizes.iter().enumerate() {
            for coord in (0..size).step_by(self.stride) {
                if self.exclude.is_some_and(|ex| ex(i, coord)) {
                    report.skipped += 1;
                    continue;
                }
                let plus = eval(i, coord, eps)?;
                let minus = eval(i, coord, -eps)?;
                if let Some(threshold) = self.kink_threshold {
                    let forward = (plus - base) / eps;
                    let backward = (base - minus) / eps;
                    if (forward - backward).abs() > threshold {
                        report.skipped += 1;
                        continue;
                    }
                }
                let numeric = (plus - minus) / (2.0 * eps);
                let a = analytic[i][coord];
                let abs = (a - numeric).abs();
                let rel = abs / a.abs().max(numeric.abs()).max(1e-3);
                report.checked += 1;
                report.max_abs_error = report.max_abs_error.max(abs);
                if rel > report.max_rel_error || report.worst.is_none() {
                    report.max_rel_error = rel.max(report.max_rel_error);
                    report.worst = Some((i, coord));
                }
            }
        }
        report.passed = report.max_rel_error < self.tol;
        Ok(report)
    }
}

fn finite(v: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(TensorError::NonFinite(v))
    }
}

/// Compares tape gradients of the scalar function `f` against central differences.
pub fn gradcheck<F>(f: F, inputs: &[Tensor<f64>], epsilon: f64, tol: f64) -> Result<GradcheckReport>
where
    F: Fn(&Tape<f64>, &[Var<f64>]) -> Result<Var<f64>>,
{
    GradcheckOptions::new(epsilon, tol).run(f, inputs)
}
