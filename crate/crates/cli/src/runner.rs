//! Executes a validated experiment and writes its artefacts plus
//! `manifest.json` into the output directory.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use shubin_core::bernstein::{
    bernstein_check, default_probe, smoothing_check, sup_norm_check, SupNormOptions,
};
use shubin_core::control::{
    cost_blowup_study, lr_synthesize, random_probes, resimulate, ControlSchedule, ControlSystem, ControlProblem,
};
use shubin_core::geometry::{
    example_region, liminf_density, thickness_profile, Centers, Region, ThicknessDensity,
};
use shubin_core::operator::{EigenBasis, ModeRequest, ShubinParams};
use shubin_core::spectral::{constant_sweep, fit_exponent, theoretical_exponent, SweepOptions};
use shubin_core::stats::Verdict;
use shubin_core::Error;

use crate::config::{ExperimentConfig, ExperimentKind, GridSpec};

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug)]
pub enum RunError {
    /// A setting that only turns out invalid once the operator is known.
    Config { field: String, message: String },
    Numerical { module: &'static str, source: Error },
    Io { path: PathBuf, source: std::io::Error },
}

impl fmt::Display for RunError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RunError::Config { field, message } => write!(f, "{field}: {message}"),
            RunError::Numerical { module, source } => write!(f, "{module}: {source}"),
            RunError::Io { path, source } => write!(f, "{}: {source}", path.display()),
        }
    }
}

impl std::error::Error for RunError {}

fn num(module: &'static str) -> impl Fn(Error) -> RunError {
    move |source| RunError::Numerical { module, source }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub out_dir: PathBuf,
    pub verdicts: BTreeMap<String, Verdict>,
    pub files: Vec<String>,
    pub manifest: Value,
}

impl RunOutcome {
    pub fn failed(&self) -> bool {
        self.verdicts.values().any(|v| *v == Verdict::Fail)
    }
}

/// What an experiment produced before the manifest is assembled.
#[derive(Default)]
struct Artefacts {
    files: Vec<(String, String)>,
    verdicts: BTreeMap<String, Verdict>,
    summary: BTreeMap<String, Value>,
    truncation: Option<usize>,
    reliability_index: Option<usize>,
}

impl Artefacts {
    fn file(&mut self, name: &str, contents: String) {
        self.files.push((name.to_string(), contents));
    }

    fn note(&mut self, key: &str, value: impl serde::Serialize) {
        self.summary
            .insert(key.to_string(), serde_json::to_value(value).unwrap_or(Value::Null));
    }

    fn basis(&mut self, cfg: &ExperimentConfig, params: ShubinParams) -> Result<EigenBasis, RunError> {
        let modes = cfg.modes.unwrap_or(cfg.n / 2);
        let basis = EigenBasis::compute(params, cfg.n, ModeRequest::Count(modes)).map_err(num("operator"))?;
        self.truncation = Some(cfg.n);
        self.reliability_index = basis.reliability_index().map_err(num("operator"))?;
        Ok(basis)
    }
}

fn params(cfg: &ExperimentConfig) -> ShubinParams {
    cfg.params.expect("validated config carries operator parameters")
}

fn region(cfg: &ExperimentConfig) -> Result<Region, RunError> {
    let spec = cfg.region.as_ref().expect("validated config carries a region");
    let r = example_region(&spec.example, spec.window).map_err(num("geometry"))?;
    Ok(match spec.samples {
        Some(n) => r.with_sampling(n, cfg.seed),
        None => r,
    })
}

fn reliable_range(basis: &EigenBasis) -> Result<(f64, f64), RunError> {
    let rel = basis.reliable_len().map_err(num("operator"))?;
    if rel == 0 {
        return Err(RunError::Config {
            field: "operator.n".into(),
            message: "no reliable eigenvalues at this truncation".into(),
        });
    }
    Ok((basis.eigenvalue(0), basis.eigenvalue(rel - 1)))
}

fn resolve(grid: &GridSpec, field: &str, range: Option<(f64, f64)>) -> Result<Vec<f64>, RunError> {
    let mut v = grid.resolve(range).map_err(|message| RunError::Config {
        field: field.into(),
        message,
    })?;
    v.sort_by(f64::total_cmp);
    v.dedup();
    Ok(v)
}

fn spectrum(cfg: &ExperimentConfig, a: &mut Artefacts) -> Result<(), RunError> {
    let basis = a.basis(cfg, params(cfg))?;
    let rel = basis.reliable_len().map_err(num("operator"))?;
    let mut csv = String::from("n,lambda,reliable\n");
    for (i, l) in basis.eigenvalues().iter().enumerate() {
        csv.push_str(&format!("{i},{l:.17e},{}\n", i < rel));
    }
    a.file("spectrum.csv", csv);
    a.note("modes", basis.len());
    a.note("reliable_modes", rel);
    a.verdicts.insert("reliability".into(), Verdict::from_bool(rel > 0));
    Ok(())
}

fn sweep(cfg: &ExperimentConfig, a: &mut Artefacts) -> Result<(), RunError> {
    let p = params(cfg);
    let basis = a.basis(cfg, p)?;
    let region = region(cfg)?;
    let grid = resolve(&cfg.lambda_grid, "grid.lambda", Some(reliable_range(&basis)?))?;
    let opts = SweepOptions {
        quadrature: cfg.quadrature,
        stop_on_ill_conditioned: true,
        require_reliable: true,
    };
    let series = constant_sweep(&basis, &region, &grid, &opts).map_err(num("spectral-constant"))?;
    let (natural, bounded) = cfg.region.as_ref().map_or((0.0, false), |r| r.natural_delta());
    let delta = cfg.fit_delta.unwrap_or(natural);
    let log_divisor = cfg.log_divisor.unwrap_or(bounded);
    let fit = fit_exponent(&series.pairs(), theoretical_exponent(p.k, p.m, delta), log_divisor);
    a.file("constants.csv", series.to_csv());
    let fit_json = json!({ "fit": fit, "series": series.manifest(), "delta": delta });
    a.file("fit.json", pretty(&fit_json));
    a.note("e_fit", fit.e_fit);
    a.note("e_theory", fit.e_theory);
    a.note("truncated_at", series.truncated_at);
    a.verdicts.insert("exponent_bound".into(), fit.verdict);
    Ok(())
}

fn thickness(cfg: &ExperimentConfig, a: &mut Artefacts) -> Result<(), RunError> {
    let spec = cfg.region.as_ref().expect("validated config carries a region");
    let region = region(cfg)?;
    let th = &cfg.thickness;
    let centers = if spec.is_planar() {
        Centers::uniform_planar(th.center_lo, th.center_hi, th.spacing)
    } else {
        Centers::uniform(th.center_lo, th.center_hi, th.spacing)
    };
    let density = ThicknessDensity::new(th.scale, th.delta).map_err(num("set-geometry"))?;
    let rep = thickness_profile(&region, &density, &centers).map_err(num("set-geometry"))?;
    let mut csv = String::from(if spec.is_planar() { "x,y,radius,ratio\n" } else { "x,radius,ratio\n" });
    let points: Vec<Vec<f64>> = match &centers {
        Centers::Line(v) => v.iter().map(|x| vec![*x]).collect(),
        Centers::Planar(v) => v.iter().map(|p| p.to_vec()).collect(),
    };
    for (c, ratio) in points.iter().zip(&rep.ratios) {
        for x in c {
            csv.push_str(&format!("{x:e},"));
        }
        csv.push_str(&format!("{:e},{ratio:e}\n", density.radius(c)));
    }
    a.file("thickness.csv", csv);

    let radii_spec = cfg.radii.clone().unwrap_or(GridSpec::Log {
        lo: 1.0,
        hi: 0.5 * spec.window,
        n: 24,
    });
    let radii = resolve(&radii_spec, "grid.radii", None)?;
    let lim = liminf_density(&region, &radii, th.threshold).map_err(num("set-geometry"))?;
    let mut csv = String::from("R,ratio\n");
    for (r, q) in lim.radii.iter().zip(&lim.ratios) {
        csv.push_str(&format!("{r:e},{q:e}\n"));
    }
    a.file("liminf.csv", csv);
    a.note("gamma", rep.gamma);
    a.note("worst_center", &rep.worst_center);
    a.note("clipped", rep.clipped);
    a.note("liminf_tail_min", lim.tail_min);
    a.note("liminf_consistent", lim.consistent);
    a.verdicts.insert(
        "thickness".into(),
        if rep.clipped > 0 {
            Verdict::Inconclusive
        } else {
            Verdict::from_bool(rep.gamma > 0.0)
        },
    );
    Ok(())
}

fn bernstein(cfg: &ExperimentConfig, a: &mut Artefacts) -> Result<(), RunError> {
    let basis = a.basis(cfg, params(cfg))?;
    let grid = resolve(&cfg.lambda_grid, "grid.lambda", Some(reliable_range(&basis)?))?;
    let rep = bernstein_check(&basis, &grid, cfg.p_max, cfg.beta_max).map_err(num("bernstein-lab"))?;
    let sup = sup_norm_check(&basis, &grid, cfg.beta_max, &SupNormOptions::default()).map_err(num("bernstein-lab"))?;
    a.file("bernstein.csv", rep.to_csv());
    let mut csv = String::from("beta,lambda,n_modes,value,argmax\n");
    for e in &sup.entries {
        csv.push_str(&format!("{},{:e},{},{:e},{:e}\n", e.beta, e.lambda, e.n_modes, e.value, e.argmax));
    }
    a.file("sup_norm.csv", csv);
    a.note("fit", rep.fit);
    a.note("sup_norm", json!({ "c": sup.c, "eta": sup.eta, "drift": sup.drift }));
    a.verdicts.insert("bernstein".into(), rep.verdict);
    a.verdicts.insert("sup_norm".into(), sup.verdict);
    Ok(())
}

fn smoothing(cfg: &ExperimentConfig, a: &mut Artefacts) -> Result<(), RunError> {
    let basis = a.basis(cfg, params(cfg))?;
    let times = resolve(&cfg.t_grid, "grid.t", None)?;
    let probe = default_probe(cfg.probe_modes.min(basis.len()));
    let rep = smoothing_check(&basis, &times, cfg.alpha_max, cfg.beta_max, &probe).map_err(num("bernstein-lab"))?;
    let mut csv = String::from("alpha,beta,t,norm,ratio\n");
    for e in &rep.entries {
        csv.push_str(&format!("{},{},{:e},{:e},{:e}\n", e.alpha, e.beta, e.t, e.norm, e.ratio));
    }
    a.file("smoothing.csv", csv);
    a.note("exponents", rep.exponents);
    a.note("constants", &rep.constants);
    a.verdicts.insert("smoothing".into(), rep.verdict);
    Ok(())
}

fn system(cfg: &ExperimentConfig, a: &mut Artefacts, modes: Option<usize>) -> Result<ControlSystem, RunError> {
    let basis = a.basis(cfg, params(cfg))?;
    let region = region(cfg)?;
    let modes = match modes {
        Some(m) => m,
        None => basis.reliable_len().map_err(num("operator"))?,
    };
    ControlSystem::new(&basis, &region, &cfg.quadrature, Some(modes)).map_err(num("control-synth"))
}

fn control(cfg: &ExperimentConfig, a: &mut Artefacts) -> Result<(), RunError> {
    let c = &cfg.control;
    let sys = system(cfg, a, c.modes.or(cfg.modes))?;
    let horizon = c.horizon.expect("validated horizon");
    let f0 = random_probes(sys.len(), 1, cfg.seed).remove(0);
    let schedule = if c.hum {
        let n_c = c.n_c.expect("validated n_c");
        let sol = ControlProblem::new(horizon, n_c, f0.clone())
            .and_then(|p| p.hum(&sys))
            .map_err(num("control-synth"))?;
        a.note("hum_condition", sol.condition);
        a.note("residual_truncated", sol.residual_truncated);
        a.verdicts
            .insert("null_control".into(), Verdict::from_bool(sol.residual_truncated <= c.lr.tol));
        ControlSchedule::from_hum(&sol)
    } else {
        let sched = lr_synthesize(&sys, &f0, horizon, &c.lr).map_err(num("control-synth"))?;
        let end = resimulate(&sys, &f0, &sched).map_err(num("control-synth"))?;
        let resim = end.iter().map(|x| x * x).sum::<f64>().sqrt();
        a.note("resimulated_residual", resim);
        a.verdicts.insert(
            "null_control".into(),
            Verdict::from_bool(sched.final_residual <= c.lr.tol && resim <= c.lr.tol),
        );
        sched
    };
    a.file("schedule.json", schedule.to_json());
    a.file("trajectory.csv", schedule.trajectory_csv(&sys.rates));
    a.note("modes", sys.len());
    a.note("total_cost", schedule.total_cost);
    a.note("final_residual", schedule.final_residual);
    a.note("active_phases", schedule.active_phases());
    Ok(())
}

fn cost_blowup(cfg: &ExperimentConfig, a: &mut Artefacts) -> Result<(), RunError> {
    let c = &cfg.control;
    let n_c = c.n_c.expect("validated n_c");
    let sys = system(cfg, a, Some(n_c))?;
    let grid = cfg.horizon_grid.as_ref().expect("validated T grid");
    let times = resolve(grid, "grid.T", None)?;
    let exponent = params(cfg).critical_power() + c.epsilon;
    let study = cost_blowup_study(&sys, n_c, &times, exponent).map_err(num("control-synth"))?;
    let mut csv = String::from("T,C_obs,log_C_obs\n");
    for (t, c_obs) in &study.points {
        csv.push_str(&format!("{t:e},{c_obs:e},{:e}\n", c_obs.ln()));
    }
    a.file("cost.csv", csv);
    a.note("a", study.a);
    a.note("power", study.power);
    a.note("fit", study.fit);
    a.note("tail", study.tail);
    a.verdicts.insert("cost_blowup".into(), study.verdict);
    Ok(())
}

fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("json values serialize");
    s.push('\n');
    s
}

fn write(path: &Path, contents: &[u8]) -> Result<(), RunError> {
    fs::write(path, contents).map_err(|source| RunError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Runs `cfg`, writing into `out_dir` (created if needed).
pub fn run(cfg: &ExperimentConfig, out_dir: &Path) -> Result<RunOutcome, RunError> {
    let start = Instant::now();
    let mut a = Artefacts::default();
    match cfg.kind {
        ExperimentKind::Spectrum => spectrum(cfg, &mut a)?,
        ExperimentKind::ConstantSweep => sweep(cfg, &mut a)?,
        ExperimentKind::Thickness => thickness(cfg, &mut a)?,
        ExperimentKind::Bernstein => bernstein(cfg, &mut a)?,
        ExperimentKind::Smoothing => smoothing(cfg, &mut a)?,
        ExperimentKind::Control => control(cfg, &mut a)?,
        ExperimentKind::CostBlowup => cost_blowup(cfg, &mut a)?,
    }
    fs::create_dir_all(out_dir).map_err(|source| RunError::Io {
        path: out_dir.to_path_buf(),
        source,
    })?;
    let mut files = BTreeMap::new();
    for (name, contents) in &a.files {
        write(&out_dir.join(name), contents.as_bytes())?;
        files.insert(
            name.clone(),
            json!({
                "bytes": contents.len(),
                "sha256": hex::encode(Sha256::digest(contents.as_bytes())),
            }),
        );
    }
    let manifest = json!({
        "tool": env!("CARGO_PKG_NAME"),
        "version": env!("CARGO_PKG_VERSION"),
        "kind": cfg.kind,
        "seed": cfg.seed,
        "config": cfg.echo,
        "resolved": cfg,
        "truncation": a.truncation,
        "reliability_index": a.reliability_index,
        "wall_time_s": start.elapsed().as_secs_f64(),
        "verdicts": a.verdicts,
        "summary": a.summary,
        "files": files,
    });
    write(&out_dir.join(MANIFEST), pretty(&manifest).as_bytes())?;
    Ok(RunOutcome {
        out_dir: out_dir.to_path_buf(),
        verdicts: a.verdicts,
        files: a.files.into_iter().map(|f| f.0).collect(),
        manifest,
    })
}
