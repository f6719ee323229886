//! Least-squares fits of coherence times.
//!
//! All models are linear in their coefficients after taking `ln τ`:
//!
//! | model       | basis            | coefficients |
//! |-------------|------------------|--------------|
//! | `arrhenius` | `β, 1`           | `ε, c`       |
//! | `super_exp` | `β², β, 1`       | `a, b, c`    |
//! | `power_law` | `ln L, 1`        | `G, c`       |
//!
//! The system is solved by Householder QR, which keeps the quadratic fit
//! accurate to near machine precision for `β` up to a few tens.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::real::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Model {
    Arrhenius,
    SuperExp,
    PowerLaw,
}

impl Model {
    pub fn name(self) -> &'static str {
        match self {
            Model::Arrhenius => "arrhenius",
            Model::SuperExp => "super_exp",
            Model::PowerLaw => "power_law",
        }
    }

    pub fn coefficient_names(self) -> &'static [&'static str] {
        match self {
            Model::Arrhenius => &["epsilon", "c"],
            Model::SuperExp => &["a", "b", "c"],
            Model::PowerLaw => &["G", "c"],
        }
    }

    fn basis<T: Real>(self, x: T) -> Vec<T> {
        match self {
            Model::Arrhenius => vec![x, T::one()],
            Model::SuperExp => vec![x * x, x, T::one()],
            Model::PowerLaw => vec![x.ln(), T::one()],
        }
    }

    /// Model prediction of `ln τ` at abscissa `x` (β, or L for the power law).
    pub fn predict_ln<T: Real>(self, coefficients: &[T], x: T) -> T {
        self.basis(x)
            .into_iter()
            .zip(coefficients)
            .map(|(b, &c)| b * c)
            .sum()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitReport<T> {
    pub model: Model,
    pub coefficient_names: Vec<String>,
    pub coefficients: Vec<T>,
    /// Abscissae: β for the exponential models, L for the power law.
    pub x: Vec<T>,
    pub ln_tau: Vec<T>,
    /// `ln τ − prediction` at each abscissa.
    pub residuals: Vec<T>,
    pub rms: T,
    /// Inverse temperature of a power-law fit at fixed β.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<T>,
}

impl<T: Real> FitReport<T> {
    pub fn coefficient(&self, name: &str) -> Option<T> {
        self.coefficient_names
            .iter()
            .position(|n| n == name)
            .map(|i| self.coefficients[i])
    }
}

/// Least-squares solution of `A c ≈ y` for a tall `A` given by rows.
pub fn least_squares<T: Real>(rows: &[Vec<T>], y: &[T], label: &'static str) -> Result<Vec<T>> {
    let m = rows.len();
    let n = rows.first().map_or(0, Vec::len);
    if m < n || n == 0 {
        return Err(Error::TooFewPoints { need: n.max(1), got: m });
    }
    // column-major copy
    let mut a: Vec<Vec<T>> = (0..n).map(|j| rows.iter().map(|r| r[j]).collect()).collect();
    let mut b = y.to_vec();
    let scale = a
        .iter()
        .map(|col| col.iter().map(|v| *v * *v).sum::<T>().sqrt())
        .fold(T::zero(), T::max);
    let tol = T::of(m.max(n) as f64) * T::epsilon() * scale * T::of(16.0);

    for k in 0..n {
        let norm = a[k][k..].iter().map(|v| *v * *v).sum::<T>().sqrt();
        if norm <= tol {
            return Err(Error::RankDeficient(label));
        }
        let alpha = if a[k][k] > T::zero() { -norm } else { norm };
        let mut v: Vec<T> = a[k][k..].to_vec();
        v[0] = v[0] - alpha;
        let vnorm2: T = v.iter().map(|x| *x * *x).sum();
        if vnorm2 > T::zero() {
            for col in a.iter_mut().skip(k) {
                let dot: T = v.iter().zip(&col[k..]).map(|(p, q)| *p * *q).sum();
                let f = (dot + dot) / vnorm2;
                for (c, vi) in col[k..].iter_mut().zip(&v) {
                    *c = *c - f * *vi;
                }
            }
            let dot: T = v.iter().zip(&b[k..]).map(|(p, q)| *p * *q).sum();
            let f = (dot + dot) / vnorm2;
            for (c, vi) in b[k..].iter_mut().zip(&v) {
                *c = *c - f * *vi;
            }
        }
        if a[k][k].abs() <= tol {
            return Err(Error::RankDeficient(label));
        }
    }
    let mut coef = vec![T::zero(); n];
    for k in (0..n).rev() {
        let mut s = b[k];
        for j in k + 1..n {
            s = s - a[j][k] * coef[j];
        }
        coef[k] = s / a[k][k];
    }
    Ok(coef)
}

/// Fit `model` to coherence times `tau` at abscissae `x`.
pub fn fit<T: Real>(model: Model, x: &[T], tau: &[T]) -> Result<FitReport<T>> {
    if x.len() != tau.len() {
        return Err(Error::SizeMismatch {
            expected: x.len(),
            got: tau.len(),
        });
    }
    let k = model.coefficient_names().len();
    if x.len() < k + 1 {
        return Err(Error::TooFewPoints {
            need: k + 1,
            got: x.len(),
        });
    }
    if let Some(bad) = tau.iter().chain(x.iter()).find(|v| !(**v > T::zero()) || !v.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "fit inputs must be positive and finite, got {bad}"
        )));
    }
    let ln_tau: Vec<T> = tau.iter().map(|t| t.ln()).collect();
    let rows: Vec<Vec<T>> = x.iter().map(|&xi| model.basis(xi)).collect();
    let coefficients = least_squares(&rows, &ln_tau, model.name())?;
    let residuals: Vec<T> = x
        .iter()
        .zip(&ln_tau)
        .map(|(&xi, &yi)| yi - model.predict_ln(&coefficients, xi))
        .collect();
    let rms = (residuals.iter().map(|r| *r * *r).sum::<T>() / T::of(residuals.len() as f64)).sqrt();
    Ok(FitReport {
        model,
        coefficient_names: model.coefficient_names().iter().map(|s| s.to_string()).collect(),
        coefficients,
        x: x.to_vec(),
        ln_tau,
        residuals,
        rms,
        beta: None,
    })
}

/// Power-law gradient `G` as a linear function of β.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradientReport<T> {
    pub points: Vec<(T, T)>,
    pub slope: T,
    pub intercept: T,
    pub residuals: Vec<T>,
}

/// Linear fit of `G(β)` across power-law reports (each tagged with its β).
pub fn gradient_vs_beta<T: Real>(reports: &[FitReport<T>]) -> Result<GradientReport<T>> {
    let points: Vec<(T, T)> = reports
        .iter()
        .filter(|r| r.model == Model::PowerLaw)
        .map(|r| {
            r.beta
                .map(|b| (b, r.coefficients[0]))
                .ok_or_else(|| Error::InvalidParameter("power-law report lacks its beta".into()))
        })
        .collect::<Result<_>>()?;
    gradient_line(&points)
}

/// Linear fit of raw `(β, G)` pairs; at least three are required.
pub fn gradient_line<T: Real>(points: &[(T, T)]) -> Result<GradientReport<T>> {
    if points.len() < 3 {
        return Err(Error::TooFewPoints {
            need: 3,
            got: points.len(),
        });
    }
    let rows: Vec<Vec<T>> = points.iter().map(|&(b, _)| vec![b, T::one()]).collect();
    let g: Vec<T> = points.iter().map(|&(_, g)| g).collect();
    let c = least_squares(&rows, &g, "gradient")?;
    let residuals = points.iter().map(|&(b, g)| g - (c[0] * b + c[1])).collect();
    Ok(GradientReport {
        points: points.to_vec(),
        slope: c[0],
        intercept: c[1],
        residuals,
    })
}

/// Translate fitted scaling coefficients into an energy scale `Δ` and an
/// entropic constant `κ`, assuming `ln τ ≈ κΔ²β²/d` and `G(β) ≈ κΔβ`:
/// `Δ = d·a / s` and `κ = s / Δ`, where `a` is the quadratic coefficient,
/// `s` the slope of `G(β)` and `d` the spatial dimension.
pub fn entropic_parameters<T: Real>(quadratic: T, gradient_slope: T, dimension: T) -> (T, T) {
    let delta = dimension * quadratic / gradient_slope;
    (delta, gradient_slope / delta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn recovers_exact_quadratic() {
        let betas: Vec<f64> = (0..7).map(|i| 6.0 + 0.5 * i as f64).collect();
        let tau: Vec<f64> = betas
            .iter()
            .map(|b| (0.028 * b * b + 0.54 * b - 2.5f64).exp())
            .collect();
        let r = fit(Model::SuperExp, &betas, &tau).unwrap();
        assert_abs_diff_eq!(r.coefficients[0], 0.028, epsilon = 1e-10);
        assert_abs_diff_eq!(r.coefficients[1], 0.54, epsilon = 1e-10);
        assert_abs_diff_eq!(r.coefficients[2], -2.5, epsilon = 1e-10);
        assert!(r.rms < 1e-10);
    }

    #[test]
    fn nested_model_gives_zero_curvature() {
        let betas: Vec<f64> = (0..8).map(|i| 5.0 + i as f64).collect();
        let tau: Vec<f64> = betas.iter().map(|b| (0.96 * b - 4.0f64).exp()).collect();
        let r = fit(Model::SuperExp, &betas, &tau).unwrap();
        assert_abs_diff_eq!(r.coefficients[0], 0.0, epsilon = 1e-10);
        let lin = fit(Model::Arrhenius, &betas, &tau).unwrap();
        assert_abs_diff_eq!(lin.coefficient("epsilon").unwrap(), 0.96, epsilon = 1e-10);
    }

    #[test]
    fn power_law_gradient_at_beta_nine() {
        let sizes = [8.0, 12.0, 16.0, 24.0, 32.0];
        let g = 0.11 * 9.0 - 0.15;
        let tau: Vec<f64> = sizes.iter().map(|l: &f64| l.powf(g)).collect();
        let r = fit(Model::PowerLaw, &sizes, &tau).unwrap();
        assert_abs_diff_eq!(r.coefficients[0], 0.84, epsilon = 1e-10);
    }

    #[test]
    fn gradient_line_examples() {
        let pts: Vec<(f64, f64)> = [7.6, 7.8, 8.0, 8.2].iter().map(|&b| (b, 0.11 * b - 0.15)).collect();
        let g = gradient_line(&pts).unwrap();
        assert_abs_diff_eq!(g.slope, 0.11, epsilon = 1e-10);
        assert_abs_diff_eq!(g.intercept, -0.15, epsilon = 1e-10);
        let flat = gradient_line(&[(1.0, 0.5), (2.0, 0.5), (3.0, 0.5)]).unwrap();
        assert_abs_diff_eq!(flat.slope, 0.0, epsilon = 1e-12);
        assert!(matches!(
            gradient_line(&[(1.0, 0.5), (2.0, 0.5)]),
            Err(Error::TooFewPoints { need: 3, got: 2 })
        ));
    }

    #[test]
    fn rank_deficiency_is_reported() {
        let x = [2.0, 2.0, 2.0, 2.0];
        let tau = [1.0, 2.0, 3.0, 4.0];
        assert!(matches!(fit(Model::Arrhenius, &x, &tau), Err(Error::RankDeficient(_))));
    }

    #[test]
    fn too_few_points() {
        assert!(matches!(
            fit(Model::SuperExp, &[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]),
            Err(Error::TooFewPoints { need: 4, got: 3 })
        ));
    }

    #[test]
    fn entropic_translation() {
        let (delta, kappa) = entropic_parameters(0.028f64, 0.11, 2.0);
        assert!((delta - 0.509).abs() < 1e-3);
        assert!((kappa - 0.216).abs() < 1e-3);
    }

    #[test]
    fn single_precision_fit() {
        let betas: Vec<f32> = (0..6).map(|i| 6.0 + i as f32).collect();
        let tau: Vec<f32> = betas.iter().map(|b| (0.5 * b - 1.0f32).exp()).collect();
        let r = fit(Model::Arrhenius, &betas, &tau).unwrap();
        assert!((r.coefficients[0] - 0.5).abs() < 1e-4);
    }
}
