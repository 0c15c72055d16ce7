//! Damped Newton solvers for the reduced Kähler–Einstein and soliton
//! equations `u'' + κ e^u + a (e^u)' = 0`, `u = log f`.
//!
//! The interior is discretized by Numerov's scheme (exact fourth order for
//! `a = 0`). The gauge is fixed by the Dirichlet value of the centred
//! constant-curvature profile at `-S`; the `+S` end carries the Robin
//! condition obtained from the first integral.

use serde::{Deserialize, Serialize};

use super::banded::{solve_bordered, Banded};
use super::{closed_form_log_density, kappa_for, left_slope, right_slope, validate_cone, RadialProfile};
use super::{DEFAULT_NODES, SLOPE_STENCIL};
use crate::error::{LabError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KeOptions {
    pub nodes: usize,
    /// Half-width of the grid; `24 / min β` when absent.
    pub s_max: Option<f64>,
    pub tol: f64,
    pub max_iter: usize,
    pub restarts: usize,
    /// Largest admissible mismatch of the unused end condition.
    pub obstruction_tol: f64,
}

impl Default for KeOptions {
    fn default() -> Self {
        Self { nodes: DEFAULT_NODES, s_max: None, tol: 1e-8, max_iter: 60, restarts: 5, obstruction_tol: 1e-4 }
    }
}

impl KeOptions {
    fn resolve(&self, cone: (f64, f64)) -> Result<(usize, f64)> {
        if self.nodes < 16 {
            return Err(LabError::Invalid("need at least 16 grid nodes".into()));
        }
        let s = self.s_max.unwrap_or(24.0 / cone.0.min(cone.1));
        if !(s > 0.0 && s.is_finite()) {
            return Err(LabError::Invalid("s_max must be positive".into()));
        }
        if !(self.tol > 0.0) {
            return Err(LabError::Invalid("tolerance must be positive".into()));
        }
        Ok((self.nodes, s))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub iterations: usize,
    pub restarts: usize,
    /// Sup-norm of the scaled discrete residual at exit.
    pub residual: f64,
    pub tolerance: f64,
    pub kappa: f64,
    pub area_target: f64,
    pub area_error: f64,
    /// Mismatch of the end condition not imposed by the solve.
    pub end_mismatch: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolitonData {
    /// `X = a z ∂_z`.
    pub vector_field_coefficient: f64,
    /// `θ_X = a ∫_{-S}^s f`, the potential with `i_X ω = √-1 ∂̄ θ_X`.
    pub theta_potential: Vec<f64>,
    /// Sup of `|θ_X' - a f|` on the grid.
    pub contraction_residual: f64,
}

fn sup(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Armijo-damped Newton on the sup-norm with restarts at halved step caps.
pub(crate) fn damped_newton<R, S>(x0: &[f64], residual: R, step: S, opts: &KeOptions) -> Result<(Vec<f64>, usize, usize, f64)>
where
    R: Fn(&[f64]) -> Vec<f64>,
    S: Fn(&[f64], &[f64]) -> Result<Vec<f64>>,
{
    let mut cap = 4.0;
    let mut total = 0;
    let mut last = f64::INFINITY;
    for restart in 0..=opts.restarts {
        let mut x = x0.to_vec();
        let mut r = residual(&x);
        let mut norm = sup(&r);
        let mut ok = true;
        for _ in 0..opts.max_iter {
            if norm <= opts.tol {
                return Ok((x, total, restart, norm));
            }
            total += 1;
            let mut dx = match step(&x, &r) {
                Ok(d) => d,
                Err(_) => {
                    ok = false;
                    break;
                }
            };
            let big = sup(&dx);
            if big > cap {
                dx.iter_mut().for_each(|d| *d *= cap / big);
            }
            let mut lambda = 1.0;
            let mut accepted = false;
            while lambda >= 1.0 / 4096.0 {
                let trial: Vec<f64> = x.iter().zip(&dx).map(|(a, b)| a + lambda * b).collect();
                let rt = residual(&trial);
                let nt = sup(&rt);
                if nt.is_finite() && nt <= (1.0 - 1e-4 * lambda) * norm {
                    x = trial;
                    r = rt;
                    norm = nt;
                    accepted = true;
                    break;
                }
                lambda *= 0.5;
            }
            if !accepted {
                ok = norm <= opts.tol;
                break;
            }
        }
        if ok && norm <= opts.tol {
            return Ok((x, total, restart, norm));
        }
        last = last.min(norm);
        cap *= 0.5;
    }
    Err(LabError::ObstructionSuspected(format!(
        "damped Newton did not reach {:.1e} after {} restarts (best residual {last:.3e})",
        opts.tol, opts.restarts
    )))
}

/// Discrete reduced equation on a grid with `u_0` held fixed.
struct Problem {
    n: usize,
    h: f64,
    kappa: f64,
    cone: (f64, f64),
    u0: f64,
    /// Source added to every row (left end, interior, right end).
    source: Option<Vec<f64>>,
}

impl Problem {
    fn full(&self, x: &[f64]) -> Vec<f64> {
        let mut u = Vec::with_capacity(self.n);
        u.push(self.u0);
        u.extend_from_slice(&x[..self.n - 1]);
        u
    }

    fn src(&self, row: usize) -> f64 {
        self.source.as_ref().map_or(0.0, |s| s[row])
    }

    /// Interior rows `1..n-1` of `u'' + κ e^u + a (e^u)'`.
    fn interior(&self, u: &[f64], f: &[f64], a: f64, out: &mut Vec<f64>) {
        let (h, k) = (self.h, self.kappa);
        for i in 1..self.n - 1 {
            let r = (u[i + 1] - 2.0 * u[i] + u[i - 1]) / (h * h)
                + k / 12.0 * (f[i + 1] + 10.0 * f[i] + f[i - 1])
                + a * (f[i + 1] - f[i - 1]) / (2.0 * h);
            out.push(r - self.src(i));
        }
    }

    /// Exact Robin end `u'(S) = -sqrt(β_∞² - 2κ f)` (Einstein case).
    fn ke_right(&self, u: &[f64], f: &[f64]) -> (f64, f64) {
        let arg = (self.cone.1 * self.cone.1 - 2.0 * self.kappa * f[self.n - 1]).max(1e-300);
        let root = arg.sqrt();
        (right_slope(u, self.h) + root, -self.kappa * f[self.n - 1] / root)
    }

    fn ke_left_mismatch(&self, u: &[f64]) -> f64 {
        let arg = (self.cone.0 * self.cone.0 - 2.0 * self.kappa * u[0].exp()).max(0.0);
        (left_slope(u, self.h) - arg.sqrt()).abs()
    }

    fn ke_residual(&self, x: &[f64]) -> Vec<f64> {
        let u = self.full(x);
        let f: Vec<f64> = u.iter().map(|v| v.exp()).collect();
        let mut r = Vec::with_capacity(self.n - 1);
        self.interior(&u, &f, 0.0, &mut r);
        r.push(self.ke_right(&u, &f).0);
        r
    }

    /// Rows of the Einstein/soliton interior Jacobian plus a right-end row.
    fn jacobian(&self, u: &[f64], f: &[f64], a: f64, right_diag: f64) -> Banded {
        let (n, h, k) = (self.n, self.h, self.kappa);
        let mut j = Banded::zeros(n - 1, 4, 1);
        for i in 1..n - 1 {
            let row = i - 1;
            if i >= 2 {
                j.add(row, i - 2, 1.0 / (h * h) + k / 12.0 * f[i - 1] - a * f[i - 1] / (2.0 * h));
            }
            j.add(row, i - 1, -2.0 / (h * h) + 10.0 * k / 12.0 * f[i]);
            j.add(row, i, 1.0 / (h * h) + k / 12.0 * f[i + 1] + a * f[i + 1] / (2.0 * h));
        }
        let row = n - 2;
        for (m, c) in SLOPE_STENCIL.iter().enumerate() {
            j.add(row, n - 2 - m, c / (12.0 * h));
        }
        j.add(row, n - 2, right_diag);
        let _ = u;
        j
    }

    fn ke_step(&self, x: &[f64], r: &[f64]) -> Result<Vec<f64>> {
        let u = self.full(x);
        let f: Vec<f64> = u.iter().map(|v| v.exp()).collect();
        let diag = self.ke_right(&u, &f).1;
        let lu = self.jacobian(&u, &f, 0.0, diag).factor()?;
        let neg: Vec<f64> = r.iter().map(|v| -v).collect();
        Ok(lu.solve(&neg))
    }

    /// Soliton residual, unknowns `x = (u_1..u_{n-1}, a)`. Row order: interior,
    /// right end, left end.
    fn soliton_residual(&self, x: &[f64]) -> Vec<f64> {
        let a = x[self.n - 1];
        let u = self.full(x);
        let f: Vec<f64> = u.iter().map(|v| v.exp()).collect();
        let (b0, b1, k) = (self.cone.0, self.cone.1, self.kappa);
        let mut r = Vec::with_capacity(self.n);
        self.interior(&u, &f, a, &mut r);
        let nl = self.n - 1;
        r.push(right_slope(&u, self.h) - (-b1 + (k / b1 - a) * f[nl]) - self.src(nl));
        r.push(left_slope(&u, self.h) - (b0 - (k / b0 + a) * f[0]) - self.src(0));
        r
    }

    fn soliton_step(&self, x: &[f64], r: &[f64]) -> Result<Vec<f64>> {
        let n = self.n;
        let a = x[n - 1];
        let u = self.full(x);
        let f: Vec<f64> = u.iter().map(|v| v.exp()).collect();
        let h = self.h;
        let diag = -(self.kappa / self.cone.1 - a) * f[n - 1];
        let lu = self.jacobian(&u, &f, a, diag).factor()?;
        let mut b = vec![0.0; n - 1];
        for i in 1..n - 1 {
            b[i - 1] = (f[i + 1] - f[i - 1]) / (2.0 * h);
        }
        b[n - 2] = f[n - 1];
        let mut c = vec![0.0; n - 1];
        for (m, coef) in [48.0, -36.0, 16.0, -3.0].iter().enumerate() {
            c[m] = coef / (12.0 * h);
        }
        let d = f[0];
        let rhs: Vec<f64> = r[..n - 1].iter().map(|v| -v).collect();
        let (mut dx, da) = solve_bordered(&lu, &b, &c, d, &rhs, -r[n - 1])?;
        dx.push(da);
        Ok(dx)
    }
}

fn setup(cone: (f64, f64), area: f64, opts: &KeOptions) -> Result<(Problem, f64, Vec<f64>)> {
    validate_cone(cone)?;
    if !(area > 0.0 && area.is_finite()) {
        return Err(LabError::Invalid("total area must be positive".into()));
    }
    let (n, s_max) = opts.resolve(cone)?;
    let kappa = kappa_for(cone, area);
    let h = 2.0 * s_max / (n - 1) as f64;
    let u0 = closed_form_log_density(cone.0, kappa, -s_max);
    // Generic guess with the right end slopes; not a solution.
    let c = (2.0 * cone.0 * cone.0 / kappa).ln();
    let guess: Vec<f64> = (1..n)
        .map(|i| {
            let s = -s_max + h * i as f64;
            let (x, y) = (-cone.0 * s, cone.1 * s);
            let m = x.max(y);
            c - m - ((x - m).exp() + (y - m).exp()).ln()
        })
        .collect();
    Ok((Problem { n, h, kappa, cone, u0, source: None }, s_max, guess))
}

fn finish(p: &Problem, s_max: f64, u: &[f64], area: f64) -> Result<(RadialProfile, f64)> {
    let f: Vec<f64> = u.iter().map(|v| v.exp()).collect();
    let profile = RadialProfile::from_density(s_max, f, p.cone)?;
    let err = (profile.total_area - area).abs() / area;
    Ok((profile, err))
}

/// Solve `Ric(ω) = κ ω` with cone data `(β_0, β_∞)` and total area `A`,
/// `κ = 2π(β_0 + β_∞)/A`.
pub fn ke_solve_radial(cone: (f64, f64), area: f64, opts: &KeOptions) -> Result<(RadialProfile, SolveReport)> {
    let (p, s_max, guess) = setup(cone, area, opts)?;
    let (x, iterations, restarts, residual) =
        damped_newton(&guess, |x| p.ke_residual(x), |x, r| p.ke_step(x, r), opts)?;
    let u = p.full(&x);
    let mismatch = p.ke_left_mismatch(&u);
    if !(mismatch <= opts.obstruction_tol) {
        return Err(LabError::ObstructionSuspected(format!(
            "the far end cannot close: slope mismatch {mismatch:.3e} at the cone point z = 0 \
             (unequal cone angles admit no constant-curvature profile)"
        )));
    }
    let (profile, area_error) = finish(&p, s_max, &u, area)?;
    Ok((
        profile,
        SolveReport {
            iterations,
            restarts,
            residual,
            tolerance: opts.tol,
            kappa: p.kappa,
            area_target: area,
            area_error,
            end_mismatch: mismatch,
        },
    ))
}

/// Cumulative trapezoid integral times `a`, and its contraction residual.
fn theta(p: &RadialProfile, a: f64) -> SolitonData {
    let h = p.h();
    let f = &p.density;
    let mut th = Vec::with_capacity(f.len());
    let mut acc = 0.0;
    th.push(0.0);
    for i in 1..f.len() {
        acc += 0.5 * h * (f[i - 1] + f[i]);
        th.push(a * acc);
    }
    let (d1, _) = super::derivatives(&th, h);
    let contraction_residual = d1.iter().zip(f).map(|(d, f)| (d - a * f).abs()).fold(0.0, f64::max);
    SolitonData { vector_field_coefficient: a, theta_potential: th, contraction_residual }
}

/// Reduced soliton `Ric(ω) - κω = L_X ω`, `X = a z ∂_z`. With `search` the
/// coefficient `a` is an unknown closed by the second end condition;
/// otherwise `a = 0` and the solve is the Einstein one.
pub fn soliton_solve_radial(
    cone: (f64, f64),
    area: f64,
    search: bool,
    opts: &KeOptions,
) -> Result<(RadialProfile, SolitonData, SolveReport)> {
    if !search {
        let (profile, report) = ke_solve_radial(cone, area, opts)?;
        let data = theta(&profile, 0.0);
        return Ok((profile, data, report));
    }
    let (p, s_max, mut guess) = setup(cone, area, opts)?;
    guess.push(0.0);
    soliton_core(p, s_max, guess, area, opts)
}

fn soliton_core(
    p: Problem,
    s_max: f64,
    guess: Vec<f64>,
    area: f64,
    opts: &KeOptions,
) -> Result<(RadialProfile, SolitonData, SolveReport)> {
    let (x, iterations, restarts, residual) =
        damped_newton(&guess, |x| p.soliton_residual(x), |x, r| p.soliton_step(x, r), opts)?;
    let a = x[p.n - 1];
    let u = p.full(&x);
    let (profile, area_error) = finish(&p, s_max, &u, area)?;
    let data = theta(&profile, a);
    let report = SolveReport {
        iterations,
        restarts,
        residual,
        tolerance: opts.tol,
        kappa: p.kappa,
        area_target: area,
        area_error,
        end_mismatch: 0.0,
    };
    Ok((profile, data, report))
}

/// Residual rows (left end, interior, right end) of the soliton system at a
/// given `u = log f` and `a`, for manufactured-solution checks.
pub fn soliton_operator(u: &[f64], a: f64, kappa: f64, cone: (f64, f64), h: f64) -> Vec<f64> {
    let n = u.len();
    let p = Problem { n, h, kappa, cone, u0: u[0], source: None };
    let mut x = u[1..].to_vec();
    x.push(a);
    let r = p.soliton_residual(&x);
    let mut out = Vec::with_capacity(n);
    out.push(r[n - 1]);
    out.extend_from_slice(&r[..n - 1]);
    out
}

/// Solve the soliton system with a prescribed source (rows ordered as in
/// [`soliton_operator`]) and Dirichlet value `u0`.
pub fn soliton_solve_with_source(
    cone: (f64, f64),
    area: f64,
    u0: f64,
    source: Vec<f64>,
    opts: &KeOptions,
) -> Result<(RadialProfile, SolitonData, SolveReport)> {
    let (mut p, s_max, mut guess) = setup(cone, area, opts)?;
    if source.len() != p.n {
        return Err(LabError::Invalid("source length must equal the node count".into()));
    }
    p.u0 = u0;
    p.source = Some(source);
    guess.push(0.0);
    soliton_core(p, s_max, guess, area, opts)
}
