//! The fractional semigroup `e^{−tH^s}` in the eigenbasis, dissipation,
//! observability, and null-controls by HUM and by a dyadic Lebeau–Robbiano
//! schedule.
//!
//! All dynamics are diagonal in the eigenbasis with rates `r_n = λ_n^s`; the
//! control region couples modes only through `G_ij = ∫_ω ψ_i ψ_j`.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Region;
use crate::linalg::{max_generalized_eigen, spd_solve, sym_eigen_sorted, symmetrize};
use crate::operator::{EigenBasis, ShubinParams};
use crate::quadrature::{GaussLegendre, QuadratureSpec};
use crate::spectral::modal_gram;
use crate::stats::{linear_fit, tail_bounded, LinearFit, TailTest, Verdict};

/// Largest Gramian condition number accepted by the HUM solve.
pub const MAX_CONDITION: f64 = 1e12;

/// Trajectory samples per phase in the CSV export.
pub const SAMPLES_PER_PHASE: usize = 512;

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Eigen-coefficients of `g(t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SemigroupState {
    pub coeffs: Vec<f64>,
    pub t: f64,
    pub params: ShubinParams,
}

impl SemigroupState {
    pub fn new(params: ShubinParams, coeffs: Vec<f64>) -> Self {
        Self {
            coeffs,
            t: 0.0,
            params,
        }
    }

    pub fn norm(&self) -> f64 {
        norm(&self.coeffs)
    }
}

/// Free evolution by `dt`: coefficient `n` is multiplied by `e^{−dt λ_n^s}`.
pub fn propagate(basis: &EigenBasis, state: &SemigroupState, dt: f64) -> Result<SemigroupState> {
    if !(dt >= 0.0) {
        return Err(Error::InvalidParameter {
            name: "dt",
            reason: format!("must be >= 0, got {dt}"),
        });
    }
    if state.coeffs.len() > basis.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} coefficients for a basis of {} modes",
            state.coeffs.len(),
            basis.len()
        )));
    }
    let s = state.params.s;
    let coeffs = state
        .coeffs
        .iter()
        .enumerate()
        .map(|(i, c)| c * (-dt * basis.eigenvalue(i).powf(s)).exp())
        .collect();
    Ok(SemigroupState {
        coeffs,
        t: state.t + dt,
        params: state.params,
    })
}

/// Unit probes with i.i.d. Gaussian coefficients.
pub fn random_probes(dim: usize, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
            let n = norm(&v);
            v.into_iter().map(|x| x / n).collect()
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DissipationReport {
    pub checked: usize,
    pub violations: usize,
    /// Largest `lhs − rhs`.
    pub max_excess: f64,
    pub verdict: Verdict,
}

/// Checks `‖(1−π_λ) e^{−tH^s} g‖ ≤ e^{−tλ^s} ‖g‖` for every `(λ, t)` pair and
/// probe, with `1e-12` slack.
pub fn dissipation_check(basis: &EigenBasis, pairs: &[(f64, f64)], probes: &[Vec<f64>]) -> Result<DissipationReport> {
    let s = basis.params.s;
    let mut checked = 0;
    let mut violations = 0;
    let mut max_excess = f64::NEG_INFINITY;
    for probe in probes {
        if probe.len() > basis.len() {
            return Err(Error::DimensionMismatch(format!(
                "probe of {} coefficients for a basis of {} modes",
                probe.len(),
                basis.len()
            )));
        }
        let g = norm(probe);
        for &(lambda, t) in pairs {
            let tail: f64 = probe
                .iter()
                .enumerate()
                .filter(|(i, _)| basis.eigenvalue(*i) > lambda)
                .map(|(i, c)| (c * (-t * basis.eigenvalue(i).powf(s)).exp()).powi(2))
                .sum::<f64>()
                .sqrt();
            let rhs = (-t * lambda.powf(s)).exp() * g;
            let excess = tail - rhs;
            max_excess = max_excess.max(excess);
            if excess > 1e-12 {
                violations += 1;
            }
            checked += 1;
        }
    }
    Ok(DissipationReport {
        checked,
        violations,
        max_excess,
        verdict: Verdict::from_bool(violations == 0),
    })
}

/// Rates and region coupling of the controlled system on `M` modes.
#[derive(Debug, Clone)]
pub struct ControlSystem {
    pub params: ShubinParams,
    pub eigenvalues: Vec<f64>,
    /// `r_n = λ_n^s`.
    pub rates: Vec<f64>,
    /// `G_ij = ∫_ω ψ_i ψ_j`, `M × M`.
    pub gram: DMatrix<f64>,
    pub region_id: String,
}

impl ControlSystem {
    /// Uses the first `modes` eigenmodes (all stored modes when `None`).
    pub fn new(basis: &EigenBasis, region: &Region, quad: &QuadratureSpec, modes: Option<usize>) -> Result<Self> {
        let m = modes.unwrap_or(basis.len());
        if m == 0 || m > basis.len() {
            return Err(Error::Truncation {
                requested: m,
                available: basis.len(),
                n: basis.n,
            });
        }
        let g = modal_gram(basis, region, quad)?;
        Self::from_parts(
            basis.params,
            basis.eigenvalues()[..m].to_vec(),
            g.matrix.view((0, 0), (m, m)).into_owned(),
            region.name(),
        )
    }

    pub fn from_parts(params: ShubinParams, eigenvalues: Vec<f64>, gram: DMatrix<f64>, region_id: &str) -> Result<Self> {
        let m = eigenvalues.len();
        if gram.nrows() != m || gram.ncols() != m {
            return Err(Error::DimensionMismatch(format!(
                "{} eigenvalues but a {}x{} Gram matrix",
                m,
                gram.nrows(),
                gram.ncols()
            )));
        }
        Ok(Self {
            params,
            rates: eigenvalues.iter().map(|l| l.powf(params.s)).collect(),
            eigenvalues,
            gram,
            region_id: region_id.to_string(),
        })
    }

    pub fn len(&self) -> usize {
        self.rates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rates.is_empty()
    }

    /// Number of modes with `λ_n ≤ λ`.
    pub fn count_below(&self, lambda: f64) -> usize {
        self.eigenvalues.iter().take_while(|&&l| l <= lambda).count()
    }

    fn check_nc(&self, n_c: usize) -> Result<()> {
        if n_c == 0 || n_c > self.len() {
            return Err(Error::Truncation {
                requested: n_c,
                available: self.len(),
                n: self.len(),
            });
        }
        Ok(())
    }

    /// `Λ_ij = G_ij (1 − e^{−(r_i+r_j)T}) / (r_i + r_j)` for `i < rows`, `j < cols`.
    fn gramian_block(&self, rows: usize, cols: usize, horizon: f64) -> DMatrix<f64> {
        DMatrix::from_fn(rows, cols, |i, j| {
            let r = self.rates[i] + self.rates[j];
            self.gram[(i, j)] * (-(-r * horizon).exp_m1()) / r
        })
    }

    fn free(&self, state: &[f64], dt: f64) -> Vec<f64> {
        state
            .iter()
            .zip(&self.rates)
            .map(|(c, r)| c * (-r * dt).exp())
            .collect()
    }
}

fn check_horizon(horizon: f64) -> Result<()> {
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "T",
            reason: format!("horizon must be positive, got {horizon}"),
        });
    }
    Ok(())
}

/// Controllability Gramian on the first `n_c` modes over `[0, T]`.
pub fn hum_gramian(system: &ControlSystem, n_c: usize, horizon: f64) -> Result<DMatrix<f64>> {
    system.check_nc(n_c)?;
    check_horizon(horizon)?;
    let mut l = system.gramian_block(n_c, n_c, horizon);
    symmetrize(&mut l);
    let (vals, _) = sym_eigen_sorted(&l);
    if vals[0] < -1e-10 * vals[n_c - 1].abs() {
        return Err(Error::Indefinite(vals[0]));
    }
    Ok(l)
}

/// Minimum-energy control of the first `n_c` modes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HumSolution {
    pub n_c: usize,
    pub horizon: f64,
    /// Control coefficients: `u(t) = 1_ω Σ_j φ_j e^{−r_j(T−t)} ψ_j`.
    pub phi: Vec<f64>,
    pub cost: f64,
    pub condition: f64,
    /// Final state on all `M` modes.
    pub final_state: Vec<f64>,
    /// `‖f(T)‖` on the first `n_c` modes, relative to `‖f₀‖`.
    pub residual_truncated: f64,
    /// `‖f(T)‖` on all modes, relative to `‖f₀‖`.
    pub residual_full: f64,
}

/// Solves `Λφ = −e^{−TA} f₀` on the first `n_c` modes; `f₀` may carry up
/// to `M` coefficients and is evolved on all of them.
pub fn hum_control(system: &ControlSystem, f0: &[f64], n_c: usize, horizon: f64) -> Result<HumSolution> {
    if f0.len() > system.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} initial coefficients for {} modes",
            f0.len(),
            system.len()
        )));
    }
    let lam = hum_gramian(system, n_c, horizon)?;
    let mut full = vec![0.0; system.len()];
    full[..f0.len()].copy_from_slice(f0);
    let free = system.free(&full, horizon);
    let f0_norm = norm(f0);
    let rhs = DVector::from_iterator(n_c, free[..n_c].iter().map(|v| -v));
    let solve = spd_solve(&lam, &rhs);
    if !(solve.condition <= MAX_CONDITION) {
        return Err(Error::IllConditioned(format!(
            "HUM Gramian condition number {:e} on {n_c} modes at T = {horizon}; lower N_c or enlarge the control region",
            solve.condition
        )));
    }
    let phi = if f0_norm == 0.0 {
        vec![0.0; n_c]
    } else {
        solve.x.iter().copied().collect::<Vec<f64>>()
    };
    let phi_v = DVector::from_column_slice(&phi);
    let cost = phi_v.dot(&(&lam * &phi_v)).max(0.0);
    let push = system.gramian_block(system.len(), n_c, horizon) * &phi_v;
    let final_state: Vec<f64> = free.iter().zip(push.iter()).map(|(a, b)| a + b).collect();
    let scale = if f0_norm > 0.0 { f0_norm } else { 1.0 };
    Ok(HumSolution {
        n_c,
        horizon,
        residual_truncated: norm(&final_state[..n_c]) / scale,
        residual_full: norm(&final_state) / scale,
        phi,
        cost,
        condition: solve.condition,
        final_state,
    })
}

/// Horizon, truncation and initial datum of a null-control problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlProblem {
    pub horizon: f64,
    pub n_c: usize,
    pub f0: Vec<f64>,
}

impl ControlProblem {
    pub fn new(horizon: f64, n_c: usize, f0: Vec<f64>) -> Result<Self> {
        check_horizon(horizon)?;
        if f0.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "f0",
                reason: "non-finite coefficient".into(),
            });
        }
        Ok(Self { horizon, n_c, f0 })
    }

    pub fn hum(&self, system: &ControlSystem) -> Result<HumSolution> {
        hum_control(system, &self.f0, self.n_c, self.horizon)
    }

    pub fn lr(&self, system: &ControlSystem, lr: &LrParams) -> Result<ControlSchedule> {
        lr_synthesize(system, &self.f0, self.horizon, lr)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PhaseKind {
    Active { cutoff: f64, n_modes: usize },
    Passive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Phase {
    pub t_start: f64,
    pub t_end: f64,
    #[serde(flatten)]
    pub kind: PhaseKind,
    /// Control coefficients of the active phase (empty when passive).
    pub phi: Vec<f64>,
    pub cost: f64,
    /// Relative full-basis residual at `t_end`.
    pub residual: f64,
}

/// A partition of `[0, T]` into active and passive phases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlSchedule {
    pub horizon: f64,
    pub modes: usize,
    pub phases: Vec<Phase>,
    pub total_cost: f64,
    pub residual_trace: Vec<f64>,
    pub final_residual: f64,
    pub final_state: Vec<f64>,
}

impl ControlSchedule {
    pub fn from_hum(sol: &HumSolution) -> Self {
        let phase = Phase {
            t_start: 0.0,
            t_end: sol.horizon,
            kind: PhaseKind::Active {
                cutoff: f64::NAN,
                n_modes: sol.n_c,
            },
            phi: sol.phi.clone(),
            cost: sol.cost,
            residual: sol.residual_full,
        };
        ControlSchedule {
            horizon: sol.horizon,
            modes: sol.final_state.len(),
            phases: vec![phase],
            total_cost: sol.cost,
            residual_trace: vec![sol.residual_full],
            final_residual: sol.residual_full,
            final_state: sol.final_state.clone(),
        }
    }

    pub fn to_json(&self) -> String {
        let v = serde_json::to_value(self).expect("schedule serializes");
        serde_json::to_string_pretty(&v).expect("json")
    }

    /// `t,mode,control_coefficient` rows; each active phase is sampled at
    /// [`SAMPLES_PER_PHASE`] uniform times, passive phases carry no control.
    pub fn trajectory_csv(&self, rates: &[f64]) -> String {
        let mut out = String::from("t,mode,control_coefficient\n");
        for ph in &self.phases {
            if ph.phi.is_empty() {
                continue;
            }
            let dt = (ph.t_end - ph.t_start) / (SAMPLES_PER_PHASE - 1) as f64;
            for k in 0..SAMPLES_PER_PHASE {
                let t = ph.t_start + k as f64 * dt;
                for (j, phi) in ph.phi.iter().enumerate() {
                    let c = phi * (-rates[j] * (ph.t_end - t)).exp();
                    out.push_str(&format!("{t:e},{j},{c:e}\n"));
                }
            }
        }
        out
    }

    pub fn active_phases(&self) -> usize {
        self.phases
            .iter()
            .filter(|p| matches!(p.kind, PhaseKind::Active { .. }))
            .count()
    }
}

/// Dyadic Lebeau–Robbiano schedule parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LrParams {
    /// Base cutoff `μ`; `None` uses `λ_4`.
    pub mu: Option<f64>,
    pub growth: f64,
    /// Active fraction of each phase budget.
    pub split: f64,
    /// Relative residual target.
    pub tol: f64,
    pub j_max: usize,
}

impl Default for LrParams {
    fn default() -> Self {
        Self {
            mu: None,
            growth: 2.0,
            split: 0.5,
            tol: 1e-6,
            j_max: 20,
        }
    }
}

/// Phase `j` has budget `τ_j = T 2^{−(j+1)}`: an active part of length
/// `split·τ_j` steers the modes below `λ_j = μ·growth^j` to zero by HUM,
/// the rest decays freely. Stops once the full-basis residual reaches
/// `tol·‖f₀‖`; a final passive phase fills the remaining time.
pub fn lr_synthesize(system: &ControlSystem, f0: &[f64], horizon: f64, lr: &LrParams) -> Result<ControlSchedule> {
    check_horizon(horizon)?;
    if f0.len() > system.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} initial coefficients for {} modes",
            f0.len(),
            system.len()
        )));
    }
    if !(lr.split > 0.0 && lr.split <= 1.0) || !(lr.growth > 1.0) || !(lr.tol > 0.0) {
        return Err(Error::InvalidParameter {
            name: "lr",
            reason: "need 0 < split <= 1, growth > 1, tol > 0".into(),
        });
    }
    let mu = match lr.mu {
        Some(mu) => mu,
        None => *system.eigenvalues.get(4).ok_or_else(|| Error::Truncation {
            requested: 5,
            available: system.len(),
            n: system.len(),
        })?,
    };
    let f0_norm = norm(f0);
    let mut state = vec![0.0; system.len()];
    state[..f0.len()].copy_from_slice(f0);
    let mut phases = Vec::new();
    let mut trace = Vec::new();
    let mut t = 0.0;
    let mut total_cost = 0.0;
    let rel = |s: &[f64]| if f0_norm > 0.0 { norm(s) / f0_norm } else { 0.0 };
    let mut residual = rel(&state);
    let mut j = 0;
    while residual > lr.tol {
        if j >= lr.j_max {
            return Err(Error::NonConvergence {
                phases: j,
                residual,
                trace,
            });
        }
        let budget = horizon * 0.5f64.powi(j as i32 + 1);
        let active = lr.split * budget;
        let cutoff = mu * lr.growth.powi(j as i32);
        let n_j = system.count_below(cutoff).max(1);
        let sol = hum_control(system, &state, n_j, active)?;
        state = sol.final_state;
        phases.push(Phase {
            t_start: t,
            t_end: t + active,
            kind: PhaseKind::Active { cutoff, n_modes: n_j },
            phi: sol.phi,
            cost: sol.cost,
            residual: rel(&state),
        });
        total_cost += sol.cost;
        t += active;
        if budget > active {
            state = system.free(&state, budget - active);
            phases.push(Phase {
                t_start: t,
                t_end: t + budget - active,
                kind: PhaseKind::Passive,
                phi: Vec::new(),
                cost: 0.0,
                residual: rel(&state),
            });
            t += budget - active;
        }
        residual = rel(&state);
        trace.push(residual);
        j += 1;
    }
    if t < horizon {
        state = system.free(&state, horizon - t);
        residual = rel(&state);
        phases.push(Phase {
            t_start: t,
            t_end: horizon,
            kind: PhaseKind::Passive,
            phi: Vec::new(),
            cost: 0.0,
            residual,
        });
    }
    Ok(ControlSchedule {
        horizon,
        modes: system.len(),
        phases,
        total_cost,
        residual_trace: trace,
        final_residual: residual,
        final_state: state,
    })
}

/// Re-runs a schedule with a fine-step exponential integrator: on each
/// substep the free part is exact and the forcing integral uses Gauss–Legendre
/// nodes, so nothing is shared with the closed-form phase updates.
pub fn resimulate(system: &ControlSystem, f0: &[f64], schedule: &ControlSchedule) -> Result<Vec<f64>> {
    let m = system.len();
    let mut state = vec![0.0; m];
    state[..f0.len()].copy_from_slice(f0);
    let gl = GaussLegendre::new(16);
    let r_max = system.rates.iter().copied().fold(0.0, f64::max);
    for ph in &schedule.phases {
        let dur = ph.t_end - ph.t_start;
        if ph.phi.is_empty() {
            state = system.free(&state, dur);
            continue;
        }
        let n_j = ph.phi.len();
        let g = system.gram.columns(0, n_j);
        let steps = ((2.0 * r_max * dur / 4.0).ceil() as usize).max(16);
        let h = dur / steps as f64;
        for step in 0..steps {
            let a = ph.t_start + step as f64 * h;
            let b = a + h;
            let mut next = system.free(&state, h);
            for (x, w) in gl.nodes.iter().zip(&gl.weights) {
                let sigma = 0.5 * (a + b) + 0.5 * h * x;
                let c = DVector::from_iterator(
                    n_j,
                    ph.phi.iter().enumerate().map(|(j, p)| p * (-system.rates[j] * (ph.t_end - sigma)).exp()),
                );
                let force = &g * c;
                for i in 0..m {
                    next[i] += 0.5 * h * w * (-system.rates[i] * (b - sigma)).exp() * force[i];
                }
            }
            state = next;
        }
    }
    Ok(state)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observability {
    pub c_obs: f64,
    pub horizon: f64,
    pub n_c: usize,
    /// Maximizing initial datum, normalized in the time-integrated ω-norm.
    pub extremal: Vec<f64>,
}

/// `C_obs = max_g ‖e^{−TA} g‖² / ∫_0^T ‖e^{−tA} g‖²_{L²(ω)} dt` on `n_c` modes.
pub fn observability_constant(system: &ControlSystem, n_c: usize, horizon: f64) -> Result<Observability> {
    let b = hum_gramian(system, n_c, horizon)?;
    let d = DMatrix::from_diagonal(&DVector::from_iterator(
        n_c,
        system.rates[..n_c].iter().map(|r| (-2.0 * r * horizon).exp()),
    ));
    let (c_obs, v) = max_generalized_eigen(&d, &b);
    Ok(Observability {
        c_obs,
        horizon,
        n_c,
        extremal: v.iter().copied().collect(),
    })
}

/// Largest eigenvalue of the HUM cost form `f₀ ↦ cost(f₀)`, assembled from
/// one HUM solve per unit initial datum.
pub fn worst_case_hum_cost(system: &ControlSystem, n_c: usize, horizon: f64) -> Result<f64> {
    let mut k = DMatrix::<f64>::zeros(n_c, n_c);
    for i in 0..n_c {
        let mut e = vec![0.0; n_c];
        e[i] = 1.0;
        let sol = hum_control(system, &e, n_c, horizon)?;
        for (r, phi) in sol.phi.iter().enumerate() {
            k[(r, i)] = -(-system.rates[r] * horizon).exp() * phi;
        }
    }
    symmetrize(&mut k);
    let (vals, _) = sym_eigen_sorted(&k);
    Ok(vals[n_c - 1])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostBlowup {
    /// `(T, C_obs)`.
    pub points: Vec<(f64, f64)>,
    /// Spectral exponent `a` in play.
    pub a: f64,
    /// `a / (s − a)`.
    pub power: f64,
    /// `log C_obs` against `T^{−power}`.
    pub fit: Option<LinearFit>,
    pub tail: Option<TailTest>,
    pub verdict: Verdict,
}

/// Fits `log C_obs ≈ K T^{−a/(s−a)} + b` and checks that
/// `log C_obs / T^{−a/(s−a)}` stays bounded as `T` decreases.
pub fn cost_blowup_study(system: &ControlSystem, n_c: usize, t_grid: &[f64], a: f64) -> Result<CostBlowup> {
    let s = system.params.s;
    if !(a > 0.0 && s > a) {
        return Err(Error::Domain(format!("need 0 < a < s, got a = {a}, s = {s}")));
    }
    let power = a / (s - a);
    let mut ts = t_grid.to_vec();
    ts.sort_by(|x, y| y.total_cmp(x));
    let points: Vec<(f64, f64)> = ts
        .iter()
        .map(|&t| Ok((t, observability_constant(system, n_c, t)?.c_obs)))
        .collect::<Result<_>>()?;
    let span = ts.first().zip(ts.last()).map_or(0.0, |(hi, lo)| (hi / lo).log10());
    if ts.len() < 3 || span < 1.5 {
        return Ok(CostBlowup {
            points,
            a,
            power,
            fit: None,
            tail: None,
            verdict: Verdict::Inconclusive,
        });
    }
    let x: Vec<f64> = points.iter().map(|p| p.0.powf(-power)).collect();
    let y: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let fit = linear_fit(&x, &y);
    let ratios: Vec<f64> = x.iter().zip(&y).map(|(x, y)| y / x).collect();
    let tail = tail_bounded(&ratios, 2.0);
    let ok = fit.is_some_and(|f| f.slope > 0.0) && tail.bounded;
    Ok(CostBlowup {
        points,
        a,
        power,
        fit,
        tail: Some(tail),
        verdict: Verdict::from_bool(ok),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::ModeRequest;

    fn harmonic(n: usize) -> EigenBasis {
        EigenBasis::compute(ShubinParams::new(1, 1, 1.0).unwrap(), n, ModeRequest::Count(n / 2)).unwrap()
    }

    fn full_window_system(m: usize, s: f64) -> ControlSystem {
        let p = ShubinParams::new(1, 1, s).unwrap();
        let eig: Vec<f64> = (0..m).map(|n| 2.0 * n as f64 + 1.0).collect();
        ControlSystem::from_parts(p, eig, DMatrix::identity(m, m), "window").unwrap()
    }

    #[test]
    fn propagation_examples() {
        let b = harmonic(20);
        let g = SemigroupState::new(b.params, vec![1.0, 1.0]);
        let same = propagate(&b, &g, 0.0).unwrap();
        assert_eq!(same.coeffs, g.coeffs);
        let one = propagate(&b, &g, 1.0).unwrap();
        assert!((one.coeffs[0] - (-1f64).exp()).abs() < 1e-15);
        assert!((one.coeffs[1] - (-3f64).exp()).abs() < 1e-15);
        let two = propagate(&b, &propagate(&b, &g, 0.3).unwrap(), 0.4).unwrap();
        let direct = propagate(&b, &g, 0.7).unwrap();
        for (a, c) in two.coeffs.iter().zip(&direct.coeffs) {
            assert!((a - c).abs() < 1e-13);
        }
        assert!(propagate(&b, &g, -1.0).is_err());
    }

    #[test]
    fn dissipation_simple_cases() {
        let b = harmonic(40);
        let mut high = vec![0.0; 10];
        high[6] = 1.0;
        let low = vec![0.5, 0.5, 0.5, 0.5];
        let rep = dissipation_check(&b, &[(5.0, 0.2), (8.0, 1.0)], &[high, low]).unwrap();
        assert_eq!(rep.violations, 0);
        assert_eq!(rep.checked, 4);
    }

    #[test]
    fn gramian_full_window() {
        let sys = full_window_system(4, 1.0);
        let l = hum_gramian(&sys, 4, 0.7).unwrap();
        for n in 0..4 {
            let r = 2.0 * n as f64 + 1.0;
            assert!((l[(n, n)] - (1.0 - (-2.0 * r * 0.7f64).exp()) / (2.0 * r)).abs() < 1e-15);
        }
        assert_eq!(l[(0, 1)], 0.0);
        let big = hum_gramian(&sys, 4, 100.0).unwrap();
        assert!((big[(2, 2)] - 0.1).abs() < 1e-15);
    }

    #[test]
    fn hum_scalar_and_zero() {
        let sys = full_window_system(1, 1.0);
        let t = 0.5f64;
        let sol = hum_control(&sys, &[2.0], 1, t).unwrap();
        let expected = 2.0 * (-2.0 * t).exp() / (1.0 - (-2.0 * t).exp()) * 4.0;
        assert!((sol.cost - expected).abs() < 1e-12 * expected);
        assert!(sol.residual_truncated < 1e-14);
        let zero = hum_control(&sys, &[0.0], 1, t).unwrap();
        assert_eq!(zero.cost, 0.0);
        assert!(zero.phi.iter().all(|p| *p == 0.0));
        let obs = observability_constant(&sys, 1, t).unwrap();
        let c = 2.0 * (-2.0 * t).exp() / (1.0 - (-2.0 * t).exp());
        assert!((obs.c_obs - c).abs() < 1e-12 * c);
    }

    #[test]
    fn hum_cost_decreases_in_horizon() {
        let b = harmonic(60);
        let r = crate::geometry::example_region(&crate::geometry::ExampleRegion::HalfLine, 40.0).unwrap();
        let sys = ControlSystem::new(&b, &r, &QuadratureSpec::default(), Some(12)).unwrap();
        let f0 = random_probes(6, 1, 3).remove(0);
        let costs: Vec<f64> = [0.5, 1.0, 2.0, 4.0]
            .iter()
            .map(|&t| hum_control(&sys, &f0, 6, t).unwrap().cost)
            .collect();
        assert!(costs.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn synthetic_blowup_fit() {
        let x: Vec<f64> = (0..12).map(|i| 0.05 * 40f64.powf(i as f64 / 11.0)).collect();
        let y: Vec<f64> = x.iter().map(|t| 5.0 / t).collect();
        let inv: Vec<f64> = x.iter().map(|t| 1.0 / t).collect();
        let f = linear_fit(&inv, &y).unwrap();
        assert!((f.slope - 5.0).abs() < 0.1);
    }

    #[test]
    fn observability_monotone_cases() {
        let sys = full_window_system(5, 1.0);
        let c: Vec<f64> = [0.1, 0.5, 1.0, 3.0]
            .iter()
            .map(|&t| observability_constant(&sys, 5, t).unwrap().c_obs)
            .collect();
        assert!(c.windows(2).all(|w| w[1] < w[0]));

        let b = harmonic(80);
        let q = QuadratureSpec::default();
        let wide = crate::geometry::example_region(&crate::geometry::ExampleRegion::OmegaZero, 30.0).unwrap();
        let sparse: Vec<(f64, f64)> = (-8..8).map(|n| (4.0 * n as f64, 4.0 * n as f64 + 1.0)).collect();
        let narrow = Region::line("sparse", sparse.iter().map(|&(a, b)| crate::geometry::Interval::new(a, b)).collect(), 30.0).unwrap();
        let a = ControlSystem::new(&b, &wide, &q, Some(8)).unwrap();
        let n = ControlSystem::new(&b, &narrow, &q, Some(8)).unwrap();
        for t in [0.2, 1.0, 2.0] {
            let cw = observability_constant(&a, 8, t).unwrap().c_obs;
            let cn = observability_constant(&n, 8, t).unwrap().c_obs;
            assert!(cn >= cw * (1.0 - 1e-12));
        }
    }

    #[test]
    fn problem_and_schedule_export() {
        assert!(ControlProblem::new(0.0, 1, vec![1.0]).is_err());
        let sys = full_window_system(10, 1.0);
        let prob = ControlProblem::new(1.0, 3, vec![1.0, 0.5]).unwrap();
        let sched = ControlSchedule::from_hum(&prob.hum(&sys).unwrap());
        let csv = sched.trajectory_csv(&sys.rates);
        assert_eq!(csv.lines().count(), 1 + SAMPLES_PER_PHASE * 3);
        let v: serde_json::Value = serde_json::from_str(&sched.to_json()).unwrap();
        assert_eq!(v["phases"][0]["kind"], "active");
    }

    #[test]
    fn lr_single_phase_for_low_modes() {
        let sys = full_window_system(30, 1.0);
        let f0 = vec![0.6, 0.0, 0.8];
        let lr = LrParams {
            mu: Some(5.0),
            ..LrParams::default()
        };
        let sched = lr_synthesize(&sys, &f0, 1.0, &lr).unwrap();
        assert_eq!(sched.active_phases(), 1);
        assert!(sched.final_residual <= 1e-6);
        let end = sched.phases.last().unwrap().t_end;
        assert!((end - 1.0).abs() < 1e-15);
        let again = resimulate(&sys, &f0, &sched).unwrap();
        assert!(norm(&again) <= 1e-6);
    }
}
