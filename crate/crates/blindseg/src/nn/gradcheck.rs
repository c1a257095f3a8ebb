//! Central finite-difference gradient checking (64-bit).

use crate::tensor::Tensor;

#[derive(Debug)]
pub struct GradCheckEntry {
    pub name: String,
    pub max_rel_err: f64,
    /// Flat index of the worst coordinate, with its two gradient values.
    pub worst_index: usize,
    pub worst_analytic: f64,
    pub worst_numeric: f64,
}

/// Per-parameter report of `max |analytic − numeric| / max(|analytic|, |numeric|)`.
#[derive(Debug)]
pub struct GradCheckReport {
    pub tol: f64,
    pub entries: Vec<GradCheckEntry>,
}

impl GradCheckReport {
    pub fn max_rel_err(&self) -> f64 {
        self.entries
            .iter()
            .map(|e| e.max_rel_err)
            .fold(0.0, f64::max)
    }

    pub fn passed(&self) -> bool {
        self.max_rel_err() < self.tol
    }
}

impl std::fmt::Display for GradCheckReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for e in &self.entries {
            writeln!(
                f,
                "{}\tmax_rel_err={:.3e}\t{}\t(worst idx {}: analytic {:.6e} vs numeric {:.6e})",
                e.name,
                e.max_rel_err,
                if e.max_rel_err < self.tol { "ok" } else { "FAIL" },
                e.worst_index,
                e.worst_analytic,
                e.worst_numeric,
            )?;
        }
        write!(f, "overall\tmax_rel_err={:.3e}", self.max_rel_err())
    }
}

/// Compare `analytic` (the caller's backward pass evaluated at `theta`)
/// against `(f(θ+h·e_i) − f(θ−h·e_i)) / 2h` for every coordinate of every
/// parameter. Report-only: nothing fails here, the caller asserts on the
/// result.
pub fn grad_check<F>(
    names: &[String],
    theta: &[Tensor<f64>],
    analytic: &[Tensor<f64>],
    loss: F,
    h: f64,
    tol: f64,
) -> GradCheckReport
where
    F: Fn(&[Tensor<f64>]) -> f64,
{
    assert_eq!(names.len(), theta.len());
    assert_eq!(theta.len(), analytic.len());
    let mut entries = Vec::with_capacity(theta.len());
    let mut work: Vec<Tensor<f64>> = theta.to_vec();
    for (pi, name) in names.iter().enumerate() {
        let mut worst = 0.0f64;
        let mut worst_index = 0usize;
        let mut worst_pair = (0.0, 0.0);
        for idx in 0..theta[pi].numel() {
            let orig = work[pi].data()[idx];
            work[pi].data_mut()[idx] = orig + h;
            let fp = loss(&work);
            work[pi].data_mut()[idx] = orig - h;
            let fm = loss(&work);
            work[pi].data_mut()[idx] = orig;
            let numeric = (fp - fm) / (2.0 * h);
            let ana = analytic[pi].data()[idx];
            let rel = (ana - numeric).abs() / ana.abs().max(numeric.abs()).max(1e-12);
            if rel > worst {
                worst = rel;
                worst_index = idx;
                worst_pair = (ana, numeric);
            }
        }
        entries.push(GradCheckEntry {
            name: name.clone(),
            max_rel_err: worst,
            worst_index,
            worst_analytic: worst_pair.0,
            worst_numeric: worst_pair.1,
        });
    }
    GradCheckReport { tol, entries }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_gradient_is_exact() {
        let theta = vec![Tensor::from_vec(vec![0.3, -1.2, 2.5])];
        let analytic = theta.clone(); // d(½‖θ‖²)/dθ = θ
        let loss = |t: &[Tensor<f64>]| 0.5 * t[0].data().iter().map(|x| x * x).sum::<f64>();
        let report = grad_check(&["theta".into()], &theta, &analytic, loss, 1e-3, 1e-8);
        assert!(report.passed(), "{report}");
    }

    #[test]
    fn doubled_gradient_reports_half_relative_error() {
        let theta = vec![Tensor::from_vec(vec![0.7, -0.4])];
        let wrong: Vec<Tensor<f64>> = theta
            .iter()
            .map(|t| {
                let mut w = t.clone();
                for v in w.data_mut() {
                    *v *= 2.0;
                }
                w
            })
            .collect();
        let loss = |t: &[Tensor<f64>]| 0.5 * t[0].data().iter().map(|x| x * x).sum::<f64>();
        let report = grad_check(&["theta".into()], &theta, &wrong, loss, 1e-3, 1e-8);
        assert!(
            (report.max_rel_err() - 0.5).abs() < 1e-5,
            "expected ≈0.5, got {}",
            report.max_rel_err()
        );
    }
}
