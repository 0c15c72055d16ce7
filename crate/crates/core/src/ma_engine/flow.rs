//! Normalized Kähler–Ricci flow `∂f/∂t = u'' + (Φ - λ) f + (a + μ) f'`,
//! `u = log f`, stepped by explicit Euler on the interior nodes.
//!
//! `u''` comes from the compact fourth-order relation
//! `(d_{i-1} + 10 d_i + d_{i+1}) / 12 = δ²u_i / h²` with end values
//! `d = -κ f`, so stationary states are exactly the Numerov Einstein
//! profiles. Both end nodes follow the exact cone Robin conditions.
//!
//! `λ(t)` keeps the area fixed. The flow is neutral along the dilations
//! `z ↦ cz`, which act as `f ↦ f(· + log|c|²)`; the gauge drift `μ(t) f'`
//! keeps the moment `∫ s f ds` fixed so the limit is not a translate. Both
//! constraints are imposed on the full quadrature, tails and Robin end
//! responses included, so they hold to `O(dt²)` per step.

use serde::{Deserialize, Serialize};

use super::{kappa_for, RadialProfile, SLOPE_STENCIL};
use crate::error::{LabError, Result};

/// Explicit stability constant: `dt <= STABILITY * h² * min f`.
pub const STABILITY: f64 = 0.3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowOptions {
    pub phi: f64,
    pub t_end: f64,
    pub dt: f64,
    /// Coefficient of the soliton term `L_X ω`, `X = a z ∂_z`.
    #[serde(default)]
    pub soliton_a: f64,
    /// Number of recorded states besides the initial one.
    #[serde(default = "default_records")]
    pub records: usize,
}

fn default_records() -> usize {
    200
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowState {
    pub time: f64,
    pub profile: RadialProfile,
    /// Sup over interior nodes of `|u'' + (Φ - λ) f + (a + μ) f'|`.
    pub residual_norm: f64,
    pub lambda: f64,
    pub gauge_drift: f64,
    /// Einstein constant fixed by the initial area and cone data.
    pub kappa: f64,
}

/// Simpson weights (without `h`), trapezoid on a trailing odd interval.
fn simpson_weights(n: usize) -> Vec<f64> {
    let mut w = vec![0.0; n];
    let m = if (n - 1) % 2 == 0 { n } else { n - 1 };
    for (i, wi) in w.iter_mut().enumerate().take(m) {
        *wi = if i == 0 || i == m - 1 {
            1.0 / 3.0
        } else if i % 2 == 1 {
            4.0 / 3.0
        } else {
            2.0 / 3.0
        };
    }
    if m < n {
        w[n - 2] += 0.5;
        w[n - 1] += 0.5;
    }
    w
}

/// Robin end closure on a view ordered from the end inwards:
/// `(25 u_e - 48 u_1 + 36 u_2 - 16 u_3 + 3 u_4) / 12h + sqrt(β² - 2κ e^{u_e}) = 0`.
/// Returns the end value and `∂f_e/∂f_m` for `m = 1..4`.
fn robin_end(inner: [f64; 4], guess: f64, h: f64, kappa: f64, beta: f64) -> (f64, [f64; 4]) {
    let known: f64 = (0..4).map(|m| SLOPE_STENCIL[m + 1] * inner[m].ln()).sum();
    let mut ue = guess.ln();
    let slope = |ue: f64| {
        let e = ue.exp();
        let root = (beta * beta - 2.0 * kappa * e).max(1e-300).sqrt();
        (root, 25.0 / (12.0 * h) - kappa * e / root)
    };
    for _ in 0..6 {
        let (root, dg) = slope(ue);
        ue -= ((25.0 * ue + known) / (12.0 * h) + root) / dg;
    }
    let fe = ue.exp();
    let (_, dg) = slope(ue);
    let mut sens = [0.0; 4];
    for m in 0..4 {
        sens[m] = -(SLOPE_STENCIL[m + 1] / (12.0 * h)) / dg * fe / inner[m];
    }
    (fe, sens)
}

struct Frame {
    h: f64,
    kappa: f64,
    cone: (f64, f64),
    s: Vec<f64>,
    w: Vec<f64>,
}

struct Velocity {
    v: Vec<f64>,
    lambda: f64,
    mu: f64,
    residual: f64,
}

impl Frame {
    fn new(p: &RadialProfile, kappa: f64) -> Self {
        Self { h: p.h(), kappa, cone: p.cone, s: p.grid(), w: simpson_weights(p.n()) }
    }

    fn ends(&self, f: &[f64]) -> ((f64, [f64; 4]), (f64, [f64; 4])) {
        let n = f.len();
        let left = robin_end([f[1], f[2], f[3], f[4]], f[0], self.h, self.kappa, self.cone.0);
        let right = robin_end([f[n - 2], f[n - 3], f[n - 4], f[n - 5]], f[n - 1], self.h, self.kappa, self.cone.1);
        (left, right)
    }

    /// Interior velocity with `λ, μ` chosen so the linearized area and
    /// moment, Robin end responses included, are stationary.
    fn velocity(&self, f: &[f64], phi: f64, a: f64) -> Velocity {
        let n = f.len();
        let h = self.h;
        let u: Vec<f64> = f.iter().map(|v| v.ln()).collect();
        let m = n - 2;
        let mut rhs: Vec<f64> = (1..n - 1).map(|i| (u[i + 1] - 2.0 * u[i] + u[i - 1]) / (h * h)).collect();
        rhs[0] += self.kappa * f[0] / 12.0;
        rhs[m - 1] += self.kappa * f[n - 1] / 12.0;
        // Thomas algorithm for the (1, 10, 1)/12 system.
        let (sub, diag) = (1.0 / 12.0, 10.0 / 12.0);
        let mut c = vec![0.0; m];
        let mut d = vec![0.0; m];
        c[0] = sub / diag;
        d[0] = rhs[0] / diag;
        for i in 1..m {
            let den = diag - sub * c[i - 1];
            c[i] = sub / den;
            d[i] = (rhs[i] - sub * d[i - 1]) / den;
        }
        for i in (0..m - 1).rev() {
            d[i] -= c[i] * d[i + 1];
        }
        let fp: Vec<f64> = (1..n - 1).map(|i| (f[i + 1] - f[i - 1]) / (2.0 * h)).collect();
        let base: Vec<f64> = (0..m).map(|k| d[k] + phi * f[k + 1] + a * fp[k]).collect();

        // Effective weights of the area and moment functionals.
        let ((_, sl), (_, sr)) = self.ends(f);
        let mut wa: Vec<f64> = (1..n - 1).map(|i| h * self.w[i]).collect();
        let mut wm: Vec<f64> = (1..n - 1).map(|i| h * self.w[i] * self.s[i]).collect();
        let (ea0, ea1) = (h * self.w[0] + 1.0 / self.cone.0, h * self.w[n - 1] + 1.0 / self.cone.1);
        let (em0, em1) = (h * self.w[0] * self.s[0], h * self.w[n - 1] * self.s[n - 1]);
        for k in 0..4 {
            wa[k] += ea0 * sl[k];
            wm[k] += em0 * sl[k];
            wa[m - 1 - k] += ea1 * sr[k];
            wm[m - 1 - k] += em1 * sr[k];
        }
        let dot = |w: &[f64], x: &[f64]| w.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
        let fi = &f[1..n - 1];
        // Solve [wa·f  -wa·f'; wm·f  -wm·f'] [λ; μ] = [wa·base; wm·base].
        let (a11, a12, b1) = (dot(&wa, fi), -dot(&wa, &fp), dot(&wa, &base));
        let (a21, a22, b2) = (dot(&wm, fi), -dot(&wm, &fp), dot(&wm, &base));
        let det = a11 * a22 - a12 * a21;
        let lambda = (b1 * a22 - a12 * b2) / det;
        let mu = (a11 * b2 - a21 * b1) / det;
        let v: Vec<f64> = (0..m).map(|k| base[k] - lambda * fi[k] + mu * fp[k]).collect();
        let residual = v.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()));
        Velocity { v, lambda, mu, residual }
    }

    fn state(&self, time: f64, f: &[f64], p: &RadialProfile, opts: &FlowOptions) -> Result<FlowState> {
        let profile = RadialProfile::from_density(p.s_max, f.to_vec(), p.cone)?;
        let vel = self.velocity(f, opts.phi, opts.soliton_a);
        Ok(FlowState {
            time,
            profile,
            residual_norm: vel.residual,
            lambda: vel.lambda,
            gauge_drift: vel.mu,
            kappa: self.kappa,
        })
    }
}

/// `p · (1 + amplitude · q)` with `q = e^{-s²/2}(s² - c)`, where `c` makes
/// the interior quadrature of `p q` vanish so the area is unchanged to
/// `O(e^{-S²/2})`.
pub fn perturbed(p: &RadialProfile, amplitude: f64) -> Result<RadialProfile> {
    if !(amplitude.abs() < 1.0) {
        return Err(LabError::Invalid("perturbation amplitude must be below 1".into()));
    }
    let s = p.grid();
    let w = simpson_weights(p.n());
    let g: Vec<f64> = s.iter().map(|x| (-x * x / 2.0).exp()).collect();
    let num: f64 = (0..p.n()).map(|k| w[k] * p.density[k] * g[k] * s[k] * s[k]).sum();
    let den: f64 = (0..p.n()).map(|k| w[k] * p.density[k] * g[k]).sum();
    let c = num / den;
    let f = (0..p.n()).map(|k| p.density[k] * (1.0 + amplitude * g[k] * (s[k] * s[k] - c))).collect();
    RadialProfile::from_density(p.s_max, f, p.cone)
}

/// Recompute `(residual_norm, λ)` of a state from its profile alone.
pub fn recompute_residual(state: &FlowState, opts: &FlowOptions) -> (f64, f64) {
    let vel = Frame::new(&state.profile, state.kappa).velocity(&state.profile.density, opts.phi, opts.soliton_a);
    (vel.residual, vel.lambda)
}

pub fn stability_bound(f: &[f64], h: f64) -> f64 {
    let fmin = f.iter().cloned().fold(f64::INFINITY, f64::min);
    STABILITY * h * h * fmin
}

/// Runs the flow to `t_end`, recording about `opts.records` states.
pub fn kr_flow_run(initial: &RadialProfile, opts: &FlowOptions) -> Result<Vec<FlowState>> {
    if !(opts.dt > 0.0 && opts.t_end >= 0.0 && opts.t_end.is_finite()) {
        return Err(LabError::Invalid("need dt > 0 and finite t_end >= 0".into()));
    }
    if !opts.phi.is_finite() || !opts.soliton_a.is_finite() {
        return Err(LabError::Invalid("Φ and soliton coefficient must be finite".into()));
    }
    if opts.records == 0 {
        return Err(LabError::Invalid("need at least one recorded state".into()));
    }
    if initial.n() < 12 {
        return Err(LabError::Invalid("flow needs at least 12 nodes".into()));
    }
    if let Some(i) = initial.density.iter().position(|&f| !(f > 0.0)) {
        return Err(LabError::NotPositive(format!("initial density not positive at node {i}")));
    }
    let h = initial.h();
    let kappa = kappa_for(initial.cone, initial.total_area);
    let frame = Frame::new(initial, kappa);
    let mut f = initial.density.clone();
    let n = f.len();
    let bound = stability_bound(&f, h);
    if opts.dt > bound {
        return Err(LabError::Instability { dt: opts.dt, bound });
    }
    let steps = (opts.t_end / opts.dt).round() as usize;
    let every = (steps / opts.records).max(1);
    let mut out = vec![frame.state(0.0, &f, initial, opts)?];
    for k in 1..=steps {
        let vel = frame.velocity(&f, opts.phi, opts.soliton_a);
        for (i, vi) in vel.v.iter().enumerate() {
            f[i + 1] += opts.dt * vi;
        }
        let t = k as f64 * opts.dt;
        if let Some(i) = f.iter().position(|x| !(*x > 0.0)) {
            return Err(LabError::FlowSingularity { time: t, reason: format!("density reached {:e} at node {i}", f[i]) });
        }
        let ((f0, _), (f1, _)) = frame.ends(&f);
        f[0] = f0;
        f[n - 1] = f1;
        if !(f0 > 0.0 && f1 > 0.0 && f0.is_finite() && f1.is_finite()) {
            return Err(LabError::FlowSingularity { time: t, reason: "cone end lost positivity".into() });
        }
        let bound = stability_bound(&f, h);
        if opts.dt > bound {
            return Err(LabError::Instability { dt: opts.dt, bound });
        }
        if k % every == 0 || k == steps {
            out.push(frame.state(t, &f, initial, opts)?);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::super::newton::{ke_solve_radial, KeOptions};
    use super::super::sup_distance;
    use super::*;
    use std::f64::consts::PI;

    fn small() -> KeOptions {
        KeOptions { nodes: 121, s_max: Some(6.0), ..KeOptions::default() }
    }

    #[test]
    fn fixed_point_stays_put() {
        let (ke, _) = ke_solve_radial((1.0, 1.0), 4.0 * PI, &small()).unwrap();
        let dt = 0.5 * stability_bound(&ke.density, ke.h());
        let opts = FlowOptions { phi: 1.0, t_end: 2000.0 * dt, dt, soliton_a: 0.0, records: 10 };
        let traj = kr_flow_run(&ke, &opts).unwrap();
        for s in &traj {
            assert!(s.residual_norm <= 1e-7, "{}", s.residual_norm);
            assert_eq!(recompute_residual(s, &opts).0.to_bits(), s.residual_norm.to_bits());
        }
        assert!(sup_distance(&traj.last().unwrap().profile, &ke).unwrap() <= 1e-8);
    }

    #[test]
    fn perturbed_round_flows_back() {
        let (ke, _) = ke_solve_radial((1.0, 1.0), 4.0 * PI, &small()).unwrap();
        let init = perturbed(&ke, 0.1).unwrap();
        let dt = 0.5 * stability_bound(&init.density, init.h());
        let opts = FlowOptions { phi: 1.0, t_end: 8.0, dt, soliton_a: 0.0, records: 80 };
        let traj = kr_flow_run(&init, &opts).unwrap();
        let last = traj.last().unwrap();
        let d = sup_distance(&last.profile, &ke).unwrap();
        assert!(d <= 1e-5, "distance {d}, residual {}", last.residual_norm);
        let drift = (last.profile.total_area - init.total_area).abs() / opts.t_end;
        assert!(drift <= 1e-6, "area drift {drift}");
    }

    #[test]
    fn large_step_rejected() {
        let p = RadialProfile::round(6.0, 121).unwrap();
        let opts = FlowOptions { phi: 1.0, t_end: 1.0, dt: 0.1, soliton_a: 0.0, records: 10 };
        assert!(matches!(kr_flow_run(&p, &opts), Err(LabError::Instability { .. })));
    }
}
