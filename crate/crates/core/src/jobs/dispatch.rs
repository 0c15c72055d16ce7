//! Per-command input schemas and dispatch to the owning modules.

use num_complex::Complex64;
use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::{json, Value};
use std::f64::consts::PI;

use super::{Command, JobConfig, Output};
use crate::error::{LabError, Result};
use crate::exec::Exec;
use crate::fibration::{self, BaseGrid, FamilyDescriptor, Patch, PoleAtom, Regime, RelativeModel};
use crate::kstability::{self, PushforwardData, TestConfigurationSpec, ToricTestConfiguration};
use crate::ma_engine::{self, ContinuityPath, FlowOptions, KeOptions, RadialProfile};
use crate::metric_models::{self, MetricSample, ModelMetric, Region};
use crate::polytope::{LatticePolytope, PolytopeSpec};
use crate::psh::{self, Domain, FamilyMode, PshWeight, ReferenceVolume};
use crate::rational;

fn inputs<T: DeserializeOwned>(cfg: &JobConfig) -> Result<T> {
    serde_json::from_value(cfg.inputs.clone())
        .map_err(|e| LabError::Invalid(format!("inputs for {}: {e}", cfg.command.name())))
}

fn to_json<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("report types serialize")
}

fn num(x: f64) -> String {
    format!("{x:e}")
}

fn ke_options(cfg: &JobConfig, mut o: KeOptions) -> Result<KeOptions> {
    for (k, v) in &cfg.tolerances {
        if !(*v > 0.0 && v.is_finite()) {
            return Err(LabError::Invalid(format!("tolerance {k} must be positive")));
        }
        match k.as_str() {
            "newton" => o.tol = *v,
            "obstruction" => o.obstruction_tol = *v,
            _ => return Err(LabError::Invalid(format!("unknown tolerance key {k}"))),
        }
    }
    Ok(o)
}

fn no_tolerances(cfg: &JobConfig) -> Result<()> {
    match cfg.tolerances.keys().next() {
        Some(k) => Err(LabError::Invalid(format!("command {} takes no tolerance override ({k})", cfg.command.name()))),
        None => Ok(()),
    }
}

pub(crate) fn dispatch(cfg: &JobConfig, exec: Exec) -> Result<Output> {
    match cfg.command {
        Command::Ke | Command::Soliton | Command::Continuity | Command::Flow => {}
        _ => no_tolerances(cfg)?,
    }
    match cfg.command {
        Command::Futaki => futaki(cfg, exec),
        Command::Ehrhart => ehrhart(cfg, exec),
        Command::Cm => cm(cfg),
        Command::Lelong => lelong(cfg, exec),
        Command::Threshold => threshold(cfg, exec),
        Command::Alpha => alpha(cfg, exec),
        Command::Model => model(cfg, exec),
        Command::Ke => ke(cfg),
        Command::Soliton => soliton(cfg),
        Command::Continuity => continuity(cfg),
        Command::Flow => flow(cfg),
        Command::Wp => wp(cfg, exec),
        Command::Foliation => foliation(cfg, exec),
        Command::Residual => residual(cfg, exec),
    }
}

fn futaki(cfg: &JobConfig, exec: Exec) -> Result<Output> {
    let spec: TestConfigurationSpec = inputs(cfg)?;
    let tc = ToricTestConfiguration::from_spec(&spec)?;
    let rep = kstability::donaldson_futaki_with(&tc, exec)?;
    let n = tc.polytope().dim() as i64;
    let mut csv = String::from("k,lattice_points,weight_trace\n");
    for k in 1..=n + 3 {
        let count = tc.polytope().lattice_point_count_with(k, exec)?;
        let w = kstability::weight_trace_with(&tc, k, exec)?;
        csv.push_str(&format!("{k},{count},{}\n", rational::to_string(&w)));
    }
    let mut results = to_json(&rep);
    results["tolerance"] = json!("exact");
    Ok(Output { results, csv: vec![("weight_trace.csv".into(), csv)] })
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct EhrhartInput {
    polytope: PolytopeSpec,
    #[serde(default = "default_k_max")]
    k_max: i64,
}

fn default_k_max() -> i64 {
    8
}

fn ehrhart(cfg: &JobConfig, exec: Exec) -> Result<Output> {
    let inp: EhrhartInput = inputs(cfg)?;
    if !(1..=64).contains(&inp.k_max) {
        return Err(LabError::Invalid("k_max must lie in 1..=64".into()));
    }
    let p = LatticePolytope::from_spec(&inp.polytope)?;
    let e = p.ehrhart()?;
    let mut csv = String::from("k,brute_force,fitted\n");
    for k in 1..=inp.k_max {
        let count = p.lattice_point_count_with(k, exec)?;
        let fitted = e.eval(k);
        if fitted != rational::int(count as i64) {
            return Err(LabError::FitInconsistent(format!("fitted polynomial misses the count at k = {k}")));
        }
        csv.push_str(&format!("{k},{count},{}\n", rational::to_string(&fitted)));
    }
    let results = json!({
        "ehrhart": to_json(&e),
        "degrees": to_json(&p.toric_degrees()),
        "volume": rational::to_string(&p.volume()),
        "verified_up_to": inp.k_max,
        "tolerance": "exact",
    });
    Ok(Output { results, csv: vec![("counts.csv".into(), csv)] })
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields, rename_all = "snake_case")]
enum CmPreset {
    P1xp1TrivialFamily,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CmInput {
    #[serde(default)]
    preset: Option<CmPreset>,
    #[serde(default)]
    data: Option<PushforwardData>,
}

fn cm(cfg: &JobConfig) -> Result<Output> {
    let inp: CmInput = inputs(cfg)?;
    let data = match (inp.preset, inp.data) {
        (Some(CmPreset::P1xp1TrivialFamily), None) => kstability::p1xp1_trivial_family(),
        (None, Some(d)) => d,
        _ => return Err(LabError::Invalid("give exactly one of preset and data".into())),
    };
    let cm = kstability::cm_degree(&data);
    let results = json!({ "cm_degree": rational::to_string(&cm), "data": to_json(&data), "tolerance": "exact" });
    Ok(Output { results, csv: vec![] })
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct LelongInput {
    weight: PshWeight,
    domain: Domain,
    point: Vec<f64>,
}

fn lelong(cfg: &JobConfig, exec: Exec) -> Result<Output> {
    let inp: LelongInput = inputs(cfg)?;
    let est = psh::lelong_number_with(&inp.weight, &inp.domain, &inp.point, exec)?;
    let mut csv = String::from("r,mass_ratio\n");
    for (r, m) in est.r_schedule.iter().zip(&est.mass_ratios) {
        csv.push_str(&format!("{},{}\n", num(*r), num(*m)));
    }
    Ok(Output { results: to_json(&est), csv: vec![("mass_ratios.csv".into(), csv)] })
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ThresholdInput {
    weight: PshWeight,
    domain: Domain,
    #[serde(default)]
    reference: ReferenceVolume,
}

fn threshold(cfg: &JobConfig, exec: Exec) -> Result<Output> {
    let inp: ThresholdInput = inputs(cfg)?;
    let est = psh::integrability_threshold_with(&inp.weight, &inp.domain, &inp.reference, exec)?;
    Ok(Output { results: to_json(&est), csv: vec![] })
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct AlphaInput {
    weights: Vec<PshWeight>,
    domain: Domain,
    #[serde(default)]
    reference: ReferenceVolume,
    #[serde(default = "absolute")]
    mode: FamilyMode,
}

fn absolute() -> FamilyMode {
    FamilyMode::Absolute
}

fn alpha(cfg: &JobConfig, exec: Exec) -> Result<Output> {
    let inp: AlphaInput = inputs(cfg)?;
    let fam = psh::alpha_over_family(&inp.weights, &inp.domain, &inp.reference, inp.mode, exec)?;
    let mut csv = String::from("index,threshold,bracket_low,bracket_high,open\n");
    for (i, t) in fam.per_weight.iter().enumerate() {
        csv.push_str(&format!("{i},{},{},{},{}\n", num(t.threshold), num(t.bracket.0), num(t.bracket.1), t.open));
    }
    let mut results = to_json(&fam);
    results["tolerance"] = json!(fam.estimate.tolerance);
    Ok(Output { results, csv: vec![("per_weight.csv".into(), csv)] })
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelInput {
    model: ModelMetric,
    candidate: ModelMetric,
    #[serde(default = "one")]
    candidate_scale: f64,
    region: Region,
}

fn one() -> f64 {
    1.0
}

fn model(cfg: &JobConfig, exec: Exec) -> Result<Output> {
    let inp: ModelInput = inputs(cfg)?;
    if inp.model.dim() != inp.candidate.dim() {
        return Err(LabError::Invalid("model and candidate dimensions differ".into()));
    }
    if !(inp.candidate_scale > 0.0 && inp.candidate_scale.is_finite()) {
        return Err(LabError::Invalid("candidate_scale must be positive".into()));
    }
    let (cand, scale) = (inp.candidate, Complex64::new(inp.candidate_scale, 0.0));
    let sampler = move |z: &[Complex64]| Ok(cand.eval(z)? * scale);
    let q = metric_models::quasi_isometry_constants(&inp.model, &sampler, &inp.region, exec)?;
    let n = inp.model.dim();
    let mut csv = metric_models::csv_header(n) + "\n";
    for z in inp.region.grid(n, 4) {
        let sample = MetricSample { matrix: inp.model.eval(&z)?, point: z };
        csv.push_str(&sample.csv_row());
        csv.push('\n');
    }
    let mut results = to_json(&q);
    results["tolerance"] = json!(0.01);
    Ok(Output { results, csv: vec![("model_samples.csv".into(), csv)] })
}

fn four_pi() -> f64 {
    4.0 * PI
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct KeInput {
    beta0: f64,
    beta_inf: f64,
    #[serde(default = "four_pi")]
    area: f64,
    #[serde(default)]
    options: KeOptions,
}

fn profile_summary(p: &RadialProfile) -> Value {
    json!({ "s_max": p.s_max, "nodes": p.n(), "cone": [p.cone.0, p.cone.1], "total_area": p.total_area })
}

fn ke(cfg: &JobConfig) -> Result<Output> {
    let inp: KeInput = inputs(cfg)?;
    let opts = ke_options(cfg, inp.options)?;
    let cone = (inp.beta0, inp.beta_inf);
    let (p, rep) = ma_engine::ke_solve_radial(cone, inp.area, &opts)?;
    let gb = ma_engine::gauss_bonnet(&p)?;
    let results = json!({
        "report": to_json(&rep),
        "profile": profile_summary(&p),
        "gauss_bonnet": gb,
        "gauss_bonnet_target": 2.0 * PI * (cone.0 + cone.1),
        "tolerance": rep.tolerance,
    });
    Ok(Output { results, csv: vec![("profile.csv".into(), ma_engine::profile_csv(&p)?)] })
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SolitonInput {
    beta0: f64,
    beta_inf: f64,
    #[serde(default = "four_pi")]
    area: f64,
    #[serde(default = "yes")]
    search: bool,
    #[serde(default)]
    options: KeOptions,
}

fn yes() -> bool {
    true
}

fn soliton(cfg: &JobConfig) -> Result<Output> {
    let inp: SolitonInput = inputs(cfg)?;
    let opts = ke_options(cfg, inp.options)?;
    let (p, data, rep) = ma_engine::soliton_solve_radial((inp.beta0, inp.beta_inf), inp.area, inp.search, &opts)?;
    let mut theta = String::from("s,theta\n");
    for (s, t) in p.grid().iter().zip(&data.theta_potential) {
        theta.push_str(&format!("{},{}\n", num(*s), num(*t)));
    }
    let results = json!({
        "vector_field_coefficient": data.vector_field_coefficient,
        "contraction_residual": data.contraction_residual,
        "report": to_json(&rep),
        "profile": profile_summary(&p),
        "tolerance": rep.tolerance,
    });
    Ok(Output { results, csv: vec![("profile.csv".into(), ma_engine::profile_csv(&p)?), ("theta.csv".into(), theta)] })
}

fn s48() -> f64 {
    48.0
}

fn n2048() -> usize {
    ma_engine::DEFAULT_NODES
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ContinuityInput {
    path: ContinuityPath,
    #[serde(default = "s48")]
    s_max: f64,
    #[serde(default = "n2048")]
    nodes: usize,
    #[serde(default)]
    options: KeOptions,
}

fn continuity(cfg: &JobConfig) -> Result<Output> {
    let inp: ContinuityInput = inputs(cfg)?;
    let opts = ke_options(cfg, inp.options)?;
    let init = RadialProfile::round(inp.s_max, inp.nodes)?;
    let rep = ma_engine::continuity_path_run(&inp.path, &init, &opts)?;
    let steps = to_json(&rep.steps);
    let (cauchy, tolerance) = (rep.cauchy, rep.tolerance);
    let p = rep.into_result()?;
    let results = json!({
        "steps": steps,
        "cauchy": cauchy,
        "profile": profile_summary(&p),
        "tolerance": tolerance,
    });
    Ok(Output { results, csv: vec![("profile.csv".into(), ma_engine::profile_csv(&p)?)] })
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct FlowInput {
    #[serde(default = "one")]
    beta: f64,
    #[serde(default = "four_pi")]
    area: f64,
    #[serde(default)]
    s_max: Option<f64>,
    #[serde(default = "n121")]
    nodes: usize,
    #[serde(default = "tenth")]
    perturbation: f64,
    #[serde(default = "one")]
    phi: f64,
    t_end: f64,
    /// Half the stability bound of the initial profile when absent.
    #[serde(default)]
    dt: Option<f64>,
    #[serde(default)]
    soliton_a: f64,
    #[serde(default = "n200")]
    records: usize,
}

fn n121() -> usize {
    121
}

fn n200() -> usize {
    200
}

fn tenth() -> f64 {
    0.1
}

/// Start index after which recorded residuals never increase.
pub(crate) fn monotone_from(res: &[f64]) -> usize {
    let mut k = res.len().saturating_sub(1);
    while k > 0 && res[k - 1] >= res[k] {
        k -= 1;
    }
    k
}

fn flow(cfg: &JobConfig) -> Result<Output> {
    let inp: FlowInput = inputs(cfg)?;
    let opts = ke_options(cfg, KeOptions::default())?;
    if !(inp.beta > 0.0 && inp.beta <= 1.0) {
        return Err(LabError::Invalid("beta must lie in (0, 1]".into()));
    }
    let s_max = inp.s_max.unwrap_or(6.0 / inp.beta);
    let ke_opts = KeOptions { nodes: inp.nodes, s_max: Some(s_max), ..opts };
    let (ke, _) = ma_engine::ke_solve_radial((inp.beta, inp.beta), inp.area, &ke_opts)?;
    let init = ma_engine::perturbed(&ke, inp.perturbation)?;
    let dt = inp.dt.unwrap_or(0.5 * ma_engine::stability_bound(&init.density, init.h()));
    let fo = FlowOptions { phi: inp.phi, t_end: inp.t_end, dt, soliton_a: inp.soliton_a, records: inp.records };
    let traj = ma_engine::kr_flow_run(&init, &fo)?;
    let last = traj.last().expect("initial state is recorded");
    let res: Vec<f64> = traj.iter().map(|s| s.residual_norm).collect();
    let drift = if inp.t_end > 0.0 { (last.profile.total_area - init.total_area).abs() / inp.t_end } else { 0.0 };
    let grid = init.grid();
    let mut long = String::from("time,s,f\n");
    let mut summary = String::from("time,residual_norm,lambda,gauge_drift,total_area\n");
    for st in &traj {
        for (s, f) in grid.iter().zip(&st.profile.density) {
            long.push_str(&format!("{},{},{}\n", num(st.time), num(*s), num(*f)));
        }
        summary.push_str(&format!(
            "{},{},{},{},{}\n",
            num(st.time),
            num(st.residual_norm),
            num(st.lambda),
            num(st.gauge_drift),
            num(st.profile.total_area)
        ));
    }
    let results = json!({
        "dt": dt,
        "stability_bound": ma_engine::stability_bound(&init.density, init.h()),
        "states": traj.len(),
        "final_time": last.time,
        "final_residual": last.residual_norm,
        "distance_to_newton": ma_engine::sup_distance(&last.profile, &ke)?,
        "monotone_from_record": monotone_from(&res),
        "area_drift_per_unit_time": drift,
        "kappa": last.kappa,
        "tolerance": { "distance": 1e-5, "area_drift": 1e-6 },
    });
    Ok(Output { results, csv: vec![("trajectory.csv".into(), long), ("residuals.csv".into(), summary)] })
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct FamilyInput {
    family: FamilyDescriptor,
}

fn wp(cfg: &JobConfig, exec: Exec) -> Result<Output> {
    let inp: FamilyInput = inputs(cfg)?;
    let field = fibration::wp_field(&inp.family, exec)?;
    let mut csv = String::from("s_re,s_im,wp_ks_norm,wp_fiber_integral\n");
    let mut worst = 0.0_f64;
    let mut min_density = f64::INFINITY;
    let mut samples = Vec::with_capacity(field.len());
    for (a, b) in &field {
        let ks = a.as_ref().map(|a| a.wp_density);
        csv.push_str(&format!(
            "{},{},{},{}\n",
            num(b.base_point[0]),
            num(b.base_point[1]),
            ks.map(num).unwrap_or_default(),
            num(b.wp_density)
        ));
        if let Some(k) = ks.filter(|k| *k > 1e-12) {
            worst = worst.max((k - b.wp_density).abs() / k);
        }
        min_density = min_density.min(ks.unwrap_or(f64::INFINITY).min(b.wp_density));
        samples.push(json!({ "base_point": b.base_point, "ks_norm": ks, "fiber_integral": b.wp_density }));
    }
    let results = json!({
        "samples": samples,
        "max_relative_discrepancy": worst,
        "min_density": min_density,
        "tolerance": { "estimator_agreement": 0.05, "nonnegativity": 1e-10 },
    });
    Ok(Output { results, csv: vec![("wp.csv".into(), csv)] })
}

fn foliation(cfg: &JobConfig, exec: Exec) -> Result<Output> {
    let inp: FamilyInput = inputs(cfg)?;
    let rep = fibration::foliation_report(&inp.family, exec)?;
    let mut csv = String::from("s_re,s_im,rank,horizontal_sup\n");
    for e in &rep.entries {
        csv.push_str(&format!("{},{},{},{}\n", num(e.base_point[0]), num(e.base_point[1]), e.rank, num(e.horizontal_sup)));
    }
    let mut results = to_json(&rep);
    results["tolerance"] = json!(fibration::NULL_TOL);
    Ok(Output { results, csv: vec![("foliation.csv".into(), csv)] })
}

#[derive(Deserialize, Default, Clone, Copy)]
#[serde(rename_all = "snake_case")]
enum WpSource {
    #[default]
    FiberIntegral,
    KsNorm,
}

fn n8() -> usize {
    8
}

#[derive(Deserialize)]
#[serde(tag = "identity", rename_all = "snake_case", deny_unknown_fields)]
enum ResidualInput {
    RelativeKe {
        model: RelativeModel,
        patch: Patch,
        #[serde(default)]
        regime: Regime,
        #[serde(default)]
        poles: Vec<PoleAtom>,
        /// Base grid for the Weil–Petersson field; centred on the patch
        /// with spacing `patch.step` when absent.
        #[serde(default)]
        base_grid: Option<BaseGrid>,
        #[serde(default = "n8")]
        fiber_resolution: usize,
        #[serde(default)]
        wp_source: WpSource,
    },
    Horizontal {
        family: FamilyDescriptor,
        #[serde(default)]
        base_point: Option<[f64; 2]>,
    },
}

fn residual(cfg: &JobConfig, exec: Exec) -> Result<Output> {
    match inputs::<ResidualInput>(cfg)? {
        ResidualInput::RelativeKe { model, patch, regime, poles, base_grid, fiber_resolution, wp_source } => {
            let grid = base_grid.unwrap_or(BaseGrid {
                center: patch.s_center,
                spacing: patch.step,
                half_count: ((patch.half_width / patch.step).ceil() as usize) + 2,
            });
            let fam = model.family(grid, fiber_resolution);
            fam.validate()?;
            let (total, base) = (model.total()?, model.base());
            let wp = |s: Complex64| -> Result<f64> {
                Ok(match wp_source {
                    WpSource::FiberIntegral => fibration::wp_fiber_integral(&fam, s)?.wp_density,
                    WpSource::KsNorm => fibration::wp_via_ks_norm(&fam, s)?.wp_density,
                })
            };
            let rep = fibration::relative_ke_residual(&*total, &*base, &wp, &poles, &patch, regime, exec)?;
            let mut results = to_json(&rep);
            results["regime"] = to_json(&regime);
            results["tolerance"] = json!({ "product": 1e-6, "torus": 5e-3 });
            Ok(Output { results, csv: vec![] })
        }
        ResidualInput::Horizontal { family, base_point } => {
            let s = base_point.unwrap_or(family.base_grid.center);
            let rep = fibration::horizontal_c_residual(&family, Complex64::new(s[0], s[1]))?;
            let mut results = to_json(&rep);
            results["tolerance"] = json!(0.05);
            Ok(Output { results, csv: vec![] })
        }
    }
}
