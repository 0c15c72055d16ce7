//! Rotationally reduced Monge–Ampère solvers on the Riemann sphere.
//!
//! With `s = log|z|^2` and `ω = √-1 ∂∂̄φ(s)`, the metric is `ω = f(s) ds∧dθ`
//! with `f = φ''`, total area `2π ∫ f ds`, Ricci density `ρ = -(log f)''`
//! and `Scal = ρ / f`. A cone angle `2πβ` at `z = 0` (resp. `∞`) means
//! `f ~ e^{βs}` as `s → -∞` (resp. `f ~ e^{-βs}` as `s → +∞`).

mod banded;
pub mod continuity;
pub mod flow;
pub mod newton;

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::quad::simpson;

pub use banded::{solve_bordered, Banded, BandedLu};
pub use continuity::{continuity_path_run, ContinuityPath, ContinuityReport, PoleLocation, PoleTerm};
pub use flow::{kr_flow_run, perturbed, recompute_residual, stability_bound, FlowOptions, FlowState};
pub use newton::{ke_solve_radial, soliton_solve_radial, KeOptions, SolitonData, SolveReport};

pub const DEFAULT_NODES: usize = 2048;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialProfile {
    /// Grid is `n` uniform nodes on `[-s_max, s_max]`.
    pub s_max: f64,
    pub density: Vec<f64>,
    /// `(β_0, β_∞)`.
    pub cone: (f64, f64),
    /// Quadrature of `2π f ds` including exponential tail corrections.
    pub total_area: f64,
}

pub fn grid(s_max: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| -s_max + 2.0 * s_max * i as f64 / (n - 1) as f64).collect()
}

pub fn validate_cone(cone: (f64, f64)) -> Result<()> {
    for b in [cone.0, cone.1] {
        if !(b > 0.0 && b <= 1.0) {
            return Err(LabError::Invalid(format!("cone parameter {b} outside (0, 1]")));
        }
    }
    Ok(())
}

/// `2π (β_0 + β_∞) / A`: the Einstein constant forced by Gauss–Bonnet.
pub fn kappa_for(cone: (f64, f64), area: f64) -> f64 {
    2.0 * PI * (cone.0 + cone.1) / area
}

/// `log` of the constant-curvature profile `(2β²/κ) e^{βs} / (1 + e^{βs})^2`.
pub fn closed_form_log_density(beta: f64, kappa: f64, s: f64) -> f64 {
    let x = beta * s;
    (2.0 * beta * beta / kappa).ln() - x.abs() - 2.0 * (-x.abs()).exp().ln_1p()
}

pub fn closed_form_density(beta: f64, kappa: f64, s: f64) -> f64 {
    closed_form_log_density(beta, kappa, s).exp()
}

impl RadialProfile {
    pub fn from_density(s_max: f64, density: Vec<f64>, cone: (f64, f64)) -> Result<Self> {
        if density.len() < 8 {
            return Err(LabError::Invalid("profile needs at least 8 nodes".into()));
        }
        if !(s_max > 0.0 && s_max.is_finite()) {
            return Err(LabError::Invalid("s_max must be positive".into()));
        }
        validate_cone(cone)?;
        if let Some(i) = density.iter().position(|&f| !(f > 0.0) || !f.is_finite()) {
            return Err(LabError::NotPositive(format!("density not positive at node {i}")));
        }
        let mut p = Self { s_max, density, cone, total_area: 0.0 };
        p.total_area = p.area_quadrature();
        Ok(p)
    }

    /// Equal-angle constant-curvature profile of the given area.
    pub fn closed_form(beta: f64, area: f64, s_max: f64, n: usize) -> Result<Self> {
        let kappa = kappa_for((beta, beta), area);
        let f = grid(s_max, n).iter().map(|&s| closed_form_density(beta, kappa, s)).collect();
        Self::from_density(s_max, f, (beta, beta))
    }

    /// Fubini–Study reduction `2 e^s / (1 + e^s)^2`, area `4π`.
    pub fn round(s_max: f64, n: usize) -> Result<Self> {
        Self::closed_form(1.0, 4.0 * PI, s_max, n)
    }

    pub fn n(&self) -> usize {
        self.density.len()
    }

    pub fn h(&self) -> f64 {
        2.0 * self.s_max / (self.n() - 1) as f64
    }

    pub fn grid(&self) -> Vec<f64> {
        grid(self.s_max, self.n())
    }

    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::from_density(self.s_max, self.density.iter().map(|f| f * c).collect(), self.cone)
    }

    /// `∫ g ds` by Simpson plus tails `g_0/β_0 + g_{n-1}/β_∞`.
    fn integrate_with_tails(&self, g: &[f64]) -> f64 {
        simpson(g, self.h()) + g[0] / self.cone.0 + g[g.len() - 1] / self.cone.1
    }

    pub fn area_quadrature(&self) -> f64 {
        2.0 * PI * self.integrate_with_tails(&self.density)
    }

    /// Solver-output invariants: positivity, cone asymptotics within 5% on
    /// the outer three nodes and area consistency within `1e-8`.
    pub fn validate(&self) -> Result<()> {
        if self.density.iter().any(|&f| !(f > 0.0)) {
            return Err(LabError::NotPositive("density not positive".into()));
        }
        let s = self.grid();
        let n = self.n();
        let spread = |v: &[f64]| {
            let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            (hi - lo) / lo
        };
        let left: Vec<f64> = (0..3).map(|i| self.density[i] * (-self.cone.0 * s[i]).exp()).collect();
        let right: Vec<f64> = (n - 3..n).map(|i| self.density[i] * (self.cone.1 * s[i]).exp()).collect();
        if spread(&left) > 0.05 || spread(&right) > 0.05 {
            return Err(LabError::Invalid("boundary asymptotics do not match the cone data".into()));
        }
        let q = self.area_quadrature();
        if ((q - self.total_area) / self.total_area).abs() > 1e-8 {
            return Err(LabError::Internal("declared area disagrees with quadrature".into()));
        }
        Ok(())
    }
}

/// Fourth-order first and second derivatives of uniform samples, central in
/// the interior and one-sided on the two outermost nodes of each side.
pub fn derivatives(g: &[f64], h: f64) -> (Vec<f64>, Vec<f64>) {
    let n = g.len();
    assert!(n >= 6);
    let mut d1 = vec![0.0; n];
    let mut d2 = vec![0.0; n];
    for i in 2..n - 2 {
        d1[i] = (-g[i + 2] + 8.0 * g[i + 1] - 8.0 * g[i - 1] + g[i - 2]) / (12.0 * h);
        d2[i] = (-g[i + 2] + 16.0 * g[i + 1] - 30.0 * g[i] + 16.0 * g[i - 1] - g[i - 2]) / (12.0 * h * h);
    }
    let one_sided = |v: &[f64; 6], sign: f64| -> (f64, f64, f64, f64) {
        let a0 = sign * (-25.0 * v[0] + 48.0 * v[1] - 36.0 * v[2] + 16.0 * v[3] - 3.0 * v[4]) / (12.0 * h);
        let a1 = sign * (-3.0 * v[0] - 10.0 * v[1] + 18.0 * v[2] - 6.0 * v[3] + v[4]) / (12.0 * h);
        let b0 = (45.0 * v[0] - 154.0 * v[1] + 214.0 * v[2] - 156.0 * v[3] + 61.0 * v[4] - 10.0 * v[5])
            / (12.0 * h * h);
        let b1 = (10.0 * v[0] - 15.0 * v[1] - 4.0 * v[2] + 14.0 * v[3] - 6.0 * v[4] + v[5]) / (12.0 * h * h);
        (a0, a1, b0, b1)
    };
    let l = [g[0], g[1], g[2], g[3], g[4], g[5]];
    let (a0, a1, b0, b1) = one_sided(&l, 1.0);
    (d1[0], d1[1], d2[0], d2[1]) = (a0, a1, b0, b1);
    let r = [g[n - 1], g[n - 2], g[n - 3], g[n - 4], g[n - 5], g[n - 6]];
    let (a0, a1, b0, b1) = one_sided(&r, -1.0);
    (d1[n - 1], d1[n - 2], d2[n - 1], d2[n - 2]) = (a0, a1, b0, b1);
    (d1, d2)
}

/// One-sided fourth-order derivative at the left end.
pub(crate) fn left_slope(u: &[f64], h: f64) -> f64 {
    (-25.0 * u[0] + 48.0 * u[1] - 36.0 * u[2] + 16.0 * u[3] - 3.0 * u[4]) / (12.0 * h)
}

/// One-sided fourth-order derivative at the right end.
pub(crate) fn right_slope(u: &[f64], h: f64) -> f64 {
    let n = u.len();
    (25.0 * u[n - 1] - 48.0 * u[n - 2] + 36.0 * u[n - 3] - 16.0 * u[n - 4] + 3.0 * u[n - 5]) / (12.0 * h)
}

pub(crate) const SLOPE_STENCIL: [f64; 5] = [25.0, -48.0, 36.0, -16.0, 3.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Curvature {
    pub ricci_density: Vec<f64>,
    pub scal: Vec<f64>,
}

/// `ρ = -(log f)''` by fourth-order differences, `Scal = ρ / f`.
pub fn ricci_and_scal(p: &RadialProfile) -> Result<Curvature> {
    if let Some(i) = p.density.iter().position(|&f| !(f > 0.0)) {
        return Err(LabError::NotPositive(format!("density not positive at node {i}")));
    }
    // Differentiating log f keeps relative precision where f is tiny: its
    // higher derivatives decay like f itself near the cone points.
    let u: Vec<f64> = p.density.iter().map(|f| f.ln()).collect();
    let (_, d2) = derivatives(&u, p.h());
    let ricci_density: Vec<f64> = d2.iter().map(|v| -v).collect();
    let scal = ricci_density.iter().zip(&p.density).map(|(r, f)| r / f).collect();
    Ok(Curvature { ricci_density, scal })
}

/// `∫ K dA = 2π ∫ ρ ds`.
pub fn gauss_bonnet(p: &RadialProfile) -> Result<f64> {
    let c = ricci_and_scal(p)?;
    Ok(2.0 * PI * p.integrate_with_tails(&c.ricci_density))
}

pub fn sup_distance(a: &RadialProfile, b: &RadialProfile) -> Result<f64> {
    if a.n() != b.n() || a.s_max != b.s_max {
        return Err(LabError::Invalid("profiles live on different grids".into()));
    }
    Ok(a.density.iter().zip(&b.density).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max))
}

/// CSV with columns `s,f,ricci,scal`.
pub fn profile_csv(p: &RadialProfile) -> Result<String> {
    let c = ricci_and_scal(p)?;
    let mut out = String::from("s,f,ricci,scal\n");
    for (i, s) in p.grid().iter().enumerate() {
        out.push_str(&format!("{:e},{:e},{:e},{:e}\n", s, p.density[i], c.ricci_density[i], c.scal[i]));
    }
    Ok(out)
}
