//! ε-regularized continuity path
//! `f_ref + ψ'' = e^{ψ + Ψ + ψ_{+,ε} - ψ_{-,ε}} f̃` with `ψ' = 0` at both ends.
//!
//! Pole terms `c log(e^{±s} + ε²)` regularize `c log|z|^2` at `z = 0` (`+`)
//! and `c log|w|^2`, `w = 1/z`, at `∞` (`-`). The exponent carries `+ψ`, so
//! the linearization `δ'' - e^{...} f̃ δ` is invertible for every ε.

use serde::{Deserialize, Serialize};

use super::banded::Banded;
use super::newton::{damped_newton, KeOptions};
use super::{left_slope, right_slope, sup_distance, RadialProfile, SLOPE_STENCIL};
use crate::error::{LabError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PoleLocation {
    Zero,
    Infinity,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoleTerm {
    pub coefficient: f64,
    pub location: PoleLocation,
}

impl PoleTerm {
    /// `c log(e^{±s} + ε²)`.
    pub fn value(&self, s: f64, eps: f64) -> f64 {
        let x = match self.location {
            PoleLocation::Zero => s,
            PoleLocation::Infinity => -s,
        };
        let y = 2.0 * eps.ln();
        let m = x.max(y);
        self.coefficient * (m + (-(x - y).abs()).exp().ln_1p())
    }
}

pub fn default_schedule() -> Vec<f64> {
    (1..=6).map(|k| 10f64.powi(-k)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuityPath {
    #[serde(default = "default_schedule")]
    pub epsilon_schedule: Vec<f64>,
    #[serde(default)]
    pub psi_plus: Vec<PoleTerm>,
    #[serde(default)]
    pub psi_minus: Vec<PoleTerm>,
    /// Constant density offset `Ψ`.
    #[serde(default)]
    pub psi_offset: f64,
}

impl ContinuityPath {
    pub fn validate(&self) -> Result<()> {
        let e = &self.epsilon_schedule;
        if e.is_empty() {
            return Err(LabError::Invalid("empty ε schedule".into()));
        }
        if e.iter().any(|x| !(*x > 0.0 && x.is_finite())) || e.windows(2).any(|w| w[1] >= w[0]) {
            return Err(LabError::Invalid("ε schedule must be positive and strictly decreasing".into()));
        }
        for p in &self.psi_plus {
            if !(p.coefficient > 0.0 && p.coefficient.is_finite()) {
                return Err(LabError::Invalid(format!("ψ₊ coefficient {} must be positive", p.coefficient)));
            }
        }
        for p in &self.psi_minus {
            if !(p.coefficient > 0.0 && p.coefficient < 1.0) {
                return Err(LabError::Invalid(format!(
                    "ψ₋ coefficient {} violates the klt bound 0 < b < 1",
                    p.coefficient
                )));
            }
        }
        if !self.psi_offset.is_finite() {
            return Err(LabError::Invalid("offset must be finite".into()));
        }
        Ok(())
    }

    fn log_weight(&self, s: f64, eps: f64) -> f64 {
        self.psi_offset + self.psi_plus.iter().map(|p| p.value(s, eps)).sum::<f64>()
            - self.psi_minus.iter().map(|p| p.value(s, eps)).sum::<f64>()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepReport {
    pub epsilon: f64,
    pub iterations: usize,
    pub residual: f64,
    /// Empirical C⁰ bound `sup |ψ_ε|`.
    pub c0_bound: f64,
    /// Relative mismatch of the solved area against the reference area.
    pub area_error: f64,
    pub sup_distance_to_previous: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathFailureInfo {
    pub index: usize,
    pub epsilon: f64,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuityReport {
    pub steps: Vec<StepReport>,
    /// Last converged profile.
    pub profile: Option<RadialProfile>,
    pub failure: Option<PathFailureInfo>,
    /// Successive sup distances strictly decrease.
    pub cauchy: bool,
    pub tolerance: f64,
}

impl ContinuityReport {
    pub fn into_result(self) -> Result<RadialProfile> {
        match (self.failure, self.profile) {
            (Some(f), _) => Err(LabError::PathFailure { index: f.index, reason: f.reason }),
            (None, Some(p)) => Ok(p),
            (None, None) => Err(LabError::Internal("empty continuity path".into())),
        }
    }
}

struct Step<'a> {
    h: f64,
    f_ref: &'a [f64],
    log_w: Vec<f64>,
}

impl Step<'_> {
    fn residual(&self, psi: &[f64]) -> Vec<f64> {
        let n = psi.len();
        let g: Vec<f64> = (0..n).map(|i| (psi[i] + self.log_w[i]).exp() - self.f_ref[i]).collect();
        let h2 = self.h * self.h;
        let mut r = Vec::with_capacity(n);
        r.push(left_slope(psi, self.h));
        for i in 1..n - 1 {
            r.push((psi[i + 1] - 2.0 * psi[i] + psi[i - 1]) / h2 - (g[i + 1] + 10.0 * g[i] + g[i - 1]) / 12.0);
        }
        r.push(right_slope(psi, self.h));
        r
    }

    fn step(&self, psi: &[f64], r: &[f64]) -> Result<Vec<f64>> {
        let n = psi.len();
        let h = self.h;
        let e: Vec<f64> = (0..n).map(|i| (psi[i] + self.log_w[i]).exp()).collect();
        let mut j = Banded::zeros(n, 4, 4);
        for (m, c) in SLOPE_STENCIL.iter().enumerate() {
            j.add(0, m, -c / (12.0 * h));
            j.add(n - 1, n - 1 - m, c / (12.0 * h));
        }
        for i in 1..n - 1 {
            j.add(i, i - 1, 1.0 / (h * h) - e[i - 1] / 12.0);
            j.add(i, i, -2.0 / (h * h) - 10.0 * e[i] / 12.0);
            j.add(i, i + 1, 1.0 / (h * h) - e[i + 1] / 12.0);
        }
        let neg: Vec<f64> = r.iter().map(|v| -v).collect();
        Ok(j.factor()?.solve(&neg))
    }
}

/// Run the path from the reference profile `initial` (which serves as both
/// `f_ref` and `f̃`), warm-starting each ε from the previous solution.
pub fn continuity_path_run(path: &ContinuityPath, initial: &RadialProfile, opts: &KeOptions) -> Result<ContinuityReport> {
    path.validate()?;
    initial.validate()?;
    let s = initial.grid();
    let h = initial.h();
    let area = initial.total_area;
    let log_f: Vec<f64> = initial.density.iter().map(|f| f.ln()).collect();
    let mut psi = vec![0.0; initial.n()];
    let mut steps: Vec<StepReport> = Vec::new();
    let mut last: Option<RadialProfile> = None;
    let mut failure = None;
    for (index, &eps) in path.epsilon_schedule.iter().enumerate() {
        let log_w: Vec<f64> = s.iter().zip(&log_f).map(|(&s, lf)| lf + path.log_weight(s, eps)).collect();
        let step = Step { h, f_ref: &initial.density, log_w };
        let solved = damped_newton(&psi, |x| step.residual(x), |x, r| step.step(x, r), opts);
        let (x, iterations, _, residual) = match solved {
            Ok(v) => v,
            Err(e) => {
                failure = Some(PathFailureInfo { index, epsilon: eps, reason: e.to_string() });
                break;
            }
        };
        psi = x;
        let density: Vec<f64> = psi.iter().zip(&step.log_w).map(|(p, l)| (p + l).exp()).collect();
        let profile = match RadialProfile::from_density(initial.s_max, density, initial.cone) {
            Ok(p) => p,
            Err(e) => {
                failure = Some(PathFailureInfo { index, epsilon: eps, reason: e.to_string() });
                break;
            }
        };
        let dist = match &last {
            Some(prev) => Some(sup_distance(prev, &profile)?),
            None => None,
        };
        steps.push(StepReport {
            epsilon: eps,
            iterations,
            residual,
            c0_bound: psi.iter().fold(0.0, |m, v| m.max(v.abs())),
            area_error: ((profile.total_area - area) / area).abs(),
            sup_distance_to_previous: dist,
        });
        last = Some(profile);
    }
    let dists: Vec<f64> = steps.iter().filter_map(|s| s.sup_distance_to_previous).collect();
    let cauchy = failure.is_none() && dists.windows(2).all(|w| w[1] < w[0]);
    Ok(ContinuityReport { steps, profile: last, failure, cauchy, tolerance: opts.tol })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reference() -> RadialProfile {
        RadialProfile::round(48.0, 2048).unwrap()
    }

    #[test]
    fn trivial_density_is_a_fixed_point() {
        let path = ContinuityPath {
            epsilon_schedule: default_schedule(),
            psi_plus: vec![],
            psi_minus: vec![],
            psi_offset: 0.0,
        };
        let init = reference();
        let r = continuity_path_run(&path, &init, &KeOptions::default()).unwrap();
        assert!(r.steps.iter().all(|s| s.iterations == 0 && s.c0_bound == 0.0));
        assert_eq!(r.into_result().unwrap().density, init.density);
    }

    #[test]
    fn klt_pole_path_converges() {
        let path = ContinuityPath {
            epsilon_schedule: default_schedule(),
            psi_plus: vec![],
            psi_minus: vec![PoleTerm { coefficient: 0.5, location: PoleLocation::Zero }],
            psi_offset: 0.0,
        };
        let r = continuity_path_run(&path, &reference(), &KeOptions::default()).unwrap();
        assert!(r.failure.is_none(), "{:?}", r.failure);
        assert_eq!(r.steps.len(), 6);
        for s in &r.steps {
            assert!(s.residual <= 1e-8);
            assert!(s.area_error <= 1e-6, "{s:?}");
        }
        assert!(r.cauchy, "{:?}", r.steps);
    }

    #[test]
    fn non_klt_pole_rejected() {
        let path = ContinuityPath {
            epsilon_schedule: default_schedule(),
            psi_plus: vec![],
            psi_minus: vec![PoleTerm { coefficient: 1.0, location: PoleLocation::Zero }],
            psi_offset: 0.0,
        };
        let e = continuity_path_run(&path, &reference(), &KeOptions::default()).unwrap_err();
        assert_eq!(e.kind(), "invalid-input");
        let bad = ContinuityPath { epsilon_schedule: vec![0.1, 0.1], ..path };
        assert!(bad.validate().is_err());
    }
}
