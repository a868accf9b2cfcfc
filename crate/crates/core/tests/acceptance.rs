mod common;

use common::{geomspace, linspace, optimized_constant, random_balls, vitali_postconditions, OmegaMass};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use shubin_core::bernstein::{bernstein_check, weighted_sup_norm, weighted_sup_norm_quadrature};
use shubin_core::control::*;
use shubin_core::geometry::*;
use shubin_core::operator::{EigenBasis, ModeRequest, ShubinParams};
use shubin_core::quadrature::QuadratureSpec;
use shubin_core::spectral::*;
use shubin_core::stats::Verdict;
use std::f64::consts::PI;
use std::time::Instant;

type Outcome = Result<String, String>;

fn basis(k: u32, m: u32, s: f64, n: usize) -> EigenBasis {
    EigenBasis::compute(ShubinParams::new(k, m, s).unwrap(), n, ModeRequest::Count(n / 2)).unwrap()
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn harmonic_oracle() -> Outcome {
    let start = Instant::now();
    let b = basis(1, 1, 1.0, 128);
    let elapsed = start.elapsed().as_secs_f64();
    let worst = (0..=40)
        .map(|n| (b.eigenvalue(n) - (2 * n + 1) as f64).abs())
        .fold(0.0, f64::max);
    ensure(worst <= 1e-9, || format!("max error {worst:e}"))?;
    ensure(elapsed < 5.0, || format!("took {elapsed:.2}s"))?;
    Ok(format!("max error {worst:.1e}, {elapsed:.3}s"))
}

fn constant_exactness() -> Outcome {
    let cases = [
        (1, 1, ExampleRegion::OmegaZero),
        (2, 1, ExampleRegion::OmegaDelta { delta: 1.0 / 3.0 }),
        (2, 2, ExampleRegion::HalfLine),
        (1, 2, ExampleRegion::Interval { a: 0.0, b: 1.0 }),
        (3, 1, ExampleRegion::Interval { a: -0.5, b: 2.0 }),
    ];
    let mut worst: f64 = 0.0;
    for (i, (k, m, ex)) in cases.iter().enumerate() {
        let b = basis(*k, *m, 1.0, 64);
        let r = example_region(ex, 24.0).unwrap();
        let sub = SpectralSubspace::first(&b, 3).unwrap();
        let g = gram_on_region(&b, &sub, &r, &QuadratureSpec::default()).map_err(|e| e.to_string())?;
        let c = spectral_constant(&g.matrix).map_err(|e| e.to_string())?.c;
        let oracle = OmegaMass::new(&b, &r, 3, 2e-3);
        let direct = optimized_constant(&oracle, 3, 4000, 100 + i as u64);
        let rel = ((c - direct) / direct).abs();
        ensure(rel <= 1e-6, || format!("k={k} m={m} {}: {c} vs {direct}", ex.id()))?;
        worst = worst.max(rel);
    }
    Ok(format!("5 cases, worst relative gap {worst:.1e}"))
}

/// Log-spaced `λ` grid from `λ_0` to the last reliable eigenvalue.
fn reliable_grid(b: &EigenBasis, points: usize) -> Vec<f64> {
    let rel = b.reliable_len().unwrap();
    geomspace(b.eigenvalue(0), b.eigenvalue(rel - 1), points)
}

fn sweep_verdict(b: &EigenBasis, ex: &ExampleRegion, e: f64, log_divisor: bool) -> Result<ExponentFit, String> {
    let r = example_region(ex, 64.0).unwrap();
    let opts = SweepOptions {
        stop_on_ill_conditioned: true,
        ..SweepOptions::default()
    };
    let series = constant_sweep(b, &r, &reliable_grid(b, 48), &opts).map_err(|e| e.to_string())?;
    Ok(fit_exponent(&series.pairs(), e, log_divisor))
}

fn exponent_bound() -> Outcome {
    let start = Instant::now();
    let mut fits = Vec::new();
    for (k, m) in [(1, 1), (2, 1), (2, 2)] {
        let b = basis(k, m, 1.0, 256);
        for (ex, delta) in [
            (ExampleRegion::OmegaZero, 0.0),
            (ExampleRegion::OmegaDelta { delta: 1.0 / 3.0 }, 1.0 / 3.0),
            (ExampleRegion::HalfLine, 1.0),
        ] {
            let fit = sweep_verdict(&b, &ex, theoretical_exponent(k, m, delta), false)?;
            ensure(fit.verdict == Verdict::Pass, || {
                format!("k={k} m={m} {}: {} ({:?})", ex.id(), fit.verdict, fit.tail)
            })?;
            fits.push(format!("{:.2}", fit.e_fit));
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    ensure(elapsed < 600.0, || format!("took {elapsed:.0}s"))?;
    Ok(format!("9 sweeps bounded, e_fit [{}], {elapsed:.1}s", fits.join(" ")))
}

fn log_factor_bound() -> Outcome {
    let b = basis(2, 2, 1.0, 256);
    let fit = sweep_verdict(&b, &ExampleRegion::Interval { a: 0.0, b: 1.0 }, theoretical_exponent(2, 2, 1.0), true)?;
    ensure(fit.verdict == Verdict::Pass, || format!("{} ({:?})", fit.verdict, fit.tail))?;
    let t = fit.tail.unwrap();
    Ok(format!("{} points, tail max {:.3} vs median {:.3}", fit.used_points, t.tail_max, t.median))
}

fn bernstein_suite() -> Outcome {
    let mut notes = Vec::new();
    let mut worst_gap: f64 = 0.0;
    for (k, m, s) in [(1, 1, 1.0), (2, 1, 0.75), (2, 2, 0.5)] {
        let b = basis(k, m, s, 160);
        let rel = b.reliable_len().unwrap();
        let grid = linspace(b.eigenvalue(0), b.eigenvalue(rel - 1) / 2.0, 8);
        let rep = bernstein_check(&b, &grid, 8, 8).map_err(|e| e.to_string())?;
        ensure(rep.verdict == Verdict::Pass && rep.fit.drift <= 0.2, || {
            format!("k={k} m={m} s={s}: {} drift {:.3}", rep.verdict, rep.fit.drift)
        })?;
        notes.push(format!("{:.3}", rep.fit.drift));
        let quad = QuadratureSpec::default();
        for &lam in &[grid[0], grid[3], grid[7]] {
            let sub = SpectralSubspace::new(&b, lam).unwrap();
            for p in 0..=8 {
                for beta in 0..=8 {
                    let exact = weighted_sup_norm(&b, &sub, p, beta).map_err(|e| e.to_string())?;
                    let q = weighted_sup_norm_quadrature(&b, &sub, p as f64, beta, &quad).map_err(|e| e.to_string())?;
                    let gap = ((exact - q) / exact).abs();
                    ensure(gap <= 1e-8, || format!("k={k} m={m} p={p} beta={beta} lambda={lam}: gap {gap:e}"))?;
                    worst_gap = worst_gap.max(gap);
                }
            }
        }
    }
    Ok(format!("drifts [{}], quadrature gap {worst_gap:.1e}", notes.join(" ")))
}

fn dissipation() -> Outcome {
    let b = basis(2, 1, 0.75, 80);
    let probes = random_probes(b.len(), 100, 2024);
    let pairs: Vec<(f64, f64)> = (0..10).map(|i| (b.eigenvalue(2 * i + 1), 0.02 * 1.6f64.powi(i as i32))).collect();
    let rep = dissipation_check(&b, &pairs, &probes).map_err(|e| e.to_string())?;
    ensure(rep.checked == 1000 && rep.violations == 0, || format!("{rep:?}"))?;
    Ok(format!("{} checks, max excess {:.2e}", rep.checked, rep.max_excess))
}

fn null_control() -> Outcome {
    let b = basis(2, 2, 1.0, 256);
    let rel = b.reliable_len().unwrap();
    let r = example_region(&ExampleRegion::OmegaZero, 64.0).unwrap();
    let sys = ControlSystem::new(&b, &r, &QuadratureSpec::default(), Some(rel)).map_err(|e| e.to_string())?;
    let probes = random_probes(rel, 10, 77);
    let mut worst_lr: f64 = 0.0;
    let mut worst_hum: f64 = 0.0;
    for t in [0.1, 1.0] {
        for (i, f0) in probes.iter().enumerate() {
            let sched = lr_synthesize(&sys, f0, t, &LrParams::default()).map_err(|e| format!("T={t} f{i}: {e}"))?;
            let again = resimulate(&sys, f0, &sched).map_err(|e| e.to_string())?;
            let resim = again.iter().map(|x| x * x).sum::<f64>().sqrt();
            ensure(sched.final_residual <= 1e-6 && resim <= 1e-6, || {
                format!("T={t} f{i}: residual {:e}, re-simulated {resim:e}", sched.final_residual)
            })?;
            worst_lr = worst_lr.max(sched.final_residual).max(resim);
            let hum = hum_control(&sys, f0, 20, t).map_err(|e| e.to_string())?;
            ensure(hum.residual_truncated <= 1e-8, || format!("HUM T={t} f{i}: {:e}", hum.residual_truncated))?;
            worst_hum = worst_hum.max(hum.residual_truncated);
        }
    }
    Ok(format!("{rel} modes, LR residual <= {worst_lr:.1e}, HUM truncated residual <= {worst_hum:.1e}"))
}

fn cost_blowup() -> Outcome {
    let b = basis(1, 1, 2.0, 128);
    let r = example_region(&ExampleRegion::HalfLine, 64.0).unwrap();
    let n_c = 16;
    let sys = ControlSystem::new(&b, &r, &QuadratureSpec::default(), Some(n_c)).map_err(|e| e.to_string())?;
    let eps = 0.01;
    let a = b.params.critical_power() + eps;
    let ts = geomspace(0.05, 2.0, 12);
    let study = cost_blowup_study(&sys, n_c, &ts, a).map_err(|e| e.to_string())?;
    let fit = study.fit.ok_or("no fit")?;
    ensure(fit.slope > 0.0 && fit.r_squared >= 0.9, || format!("slope {} R2 {}", fit.slope, fit.r_squared))?;
    Ok(format!("R2 {:.3}, slope {:.3}, verdict {}", fit.r_squared, fit.slope, study.verdict))
}

fn geometry_suite() -> Outcome {
    let line = [
        (ExampleRegion::OmegaZero, 0.0, 2.0, 0.25),
        (ExampleRegion::OmegaDelta { delta: 1.0 / 3.0 }, 1.0 / 3.0, 2.0, 0.6),
        (ExampleRegion::OmegaDelta { delta: 0.5 }, 0.5, 2.0, 0.8),
        (ExampleRegion::HalfLine, 1.0, 1.5, 1.0),
    ];
    let mut checked = 0;
    for (ex, delta, scale, delta2) in line {
        let r = example_region(&ex, 400.0).unwrap();
        let centers = Centers::uniform(-20.0, 20.0, 0.25);
        let base = thickness_profile(&r, &ThicknessDensity::new(scale, delta).unwrap(), &centers).map_err(|e| e.to_string())?;
        let wide = thickness_profile(&r, &ThicknessDensity::new(6.0 * scale, delta2).unwrap(), &centers).map_err(|e| e.to_string())?;
        ensure(base.gamma > 0.0 && wide.clipped == 0 && wide.gamma >= base.gamma / 6.0, || {
            format!("{}: {} vs {}", ex.id(), wide.gamma, base.gamma)
        })?;
        checked += 1;
    }
    let planar = [
        (ExampleRegion::OmegaPlanar { delta: 0.5, radius: 1.0 }, 0.5, 2.0, 0.75),
        (ExampleRegion::Cone { theta: PI / 6.0 }, 1.0, 1.5, 1.0),
    ];
    for (ex, delta, scale, delta2) in planar {
        let r = example_region(&ex, 400.0).unwrap().with_sampling(20_000, 5);
        let centers = Centers::uniform_planar(-10.0, 10.0, 2.5);
        let base = thickness_profile(&r, &ThicknessDensity::new(scale, delta).unwrap(), &centers).map_err(|e| e.to_string())?;
        let wide = thickness_profile(&r, &ThicknessDensity::new(6.0 * scale, delta2).unwrap(), &centers).map_err(|e| e.to_string())?;
        ensure(base.gamma > 0.0 && wide.clipped == 0 && wide.gamma >= base.gamma / 6.0, || {
            format!("{}: {} vs {}", ex.id(), wide.gamma, base.gamma)
        })?;
        checked += 1;
    }

    let radii = geomspace(5.0, 500.0, 12);
    let half = liminf_density(&example_region(&ExampleRegion::HalfLine, 1000.0).unwrap(), &radii, 0.25).map_err(|e| e.to_string())?;
    let cone_region = example_region(&ExampleRegion::Cone { theta: PI / 6.0 }, 1000.0).unwrap().with_sampling(200_000, 3);
    let cone = liminf_density(&cone_region, &radii, 0.25).map_err(|e| e.to_string())?;
    let bounded = liminf_density(&example_region(&ExampleRegion::Interval { a: 0.0, b: 1.0 }, 1000.0).unwrap(), &radii, 0.01).map_err(|e| e.to_string())?;
    ensure(half.consistent && cone.consistent && !bounded.consistent, || {
        format!("half {} cone {} bounded {}", half.tail_min, cone.tail_min, bounded.tail_min)
    })?;
    ensure((cone.tail_min - 1.0 / 3.0).abs() < 0.01, || format!("cone density {}", cone.tail_min))?;

    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for i in 0..1000 {
        let count = 1 + i % 40;
        let res = if i % 2 == 0 {
            let balls = random_balls::<1>(&mut rng, count);
            vitali_postconditions(&balls, &vitali_select(&balls).map_err(|e| e.to_string())?)
        } else {
            let balls = random_balls::<2>(&mut rng, count);
            vitali_postconditions(&balls, &vitali_select(&balls).map_err(|e| e.to_string())?)
        };
        res.map_err(|e| format!("configuration {i}: {e}"))?;
    }
    Ok(format!("{checked} dilation checks, cone density {:.3}, 1000 Vitali configurations", cone.tail_min))
}

fn duality() -> Outcome {
    let cases: [(u32, u32, f64, ExampleRegion, usize, f64); 5] = [
        (1, 1, 2.0, ExampleRegion::HalfLine, 6, 0.5),
        (2, 2, 1.0, ExampleRegion::OmegaZero, 8, 0.1),
        (2, 1, 1.0, ExampleRegion::OmegaDelta { delta: 1.0 / 3.0 }, 6, 1.0),
        (1, 2, 1.5, ExampleRegion::Interval { a: 0.0, b: 1.0 }, 5, 0.3),
        (1, 1, 2.0, ExampleRegion::HalfLine, 12, 0.05),
    ];
    let mut worst: f64 = 0.0;
    for (k, m, s, ex, n_c, t) in cases {
        let b = basis(k, m, s, 96);
        let r = example_region(&ex, 40.0).unwrap();
        let sys = ControlSystem::new(&b, &r, &QuadratureSpec::default(), Some(n_c)).map_err(|e| e.to_string())?;
        let obs = observability_constant(&sys, n_c, t).map_err(|e| e.to_string())?.c_obs;
        let cost = worst_case_hum_cost(&sys, n_c, t).map_err(|e| e.to_string())?;
        let rel = ((obs - cost) / obs).abs();
        ensure(rel <= 1e-6, || format!("k={k} m={m} {}: {obs} vs {cost}", ex.id()))?;
        worst = worst.max(rel);
    }
    Ok(format!("5 problems, worst relative gap {worst:.1e}"))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("harmonic oracle", harmonic_oracle),
        ("spectral constant exactness", constant_exactness),
        ("exponent upper bound", exponent_bound),
        ("log-factor variant", log_factor_bound),
        ("bernstein suite", bernstein_suite),
        ("dissipation", dissipation),
        ("null-control", null_control),
        ("cost blow-up shape", cost_blowup),
        ("geometry suite", geometry_suite),
        ("duality", duality),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = run();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {} PASS {name}: {detail} [{secs:.1}s]", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {} FAIL {name}: {detail} [{secs:.1}s]", i + 1);
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
