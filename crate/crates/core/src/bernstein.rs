//! Weighted Bernstein-type norms over spectral subspaces, smoothing of the
//! fractional semigroup, the Gelfand–Shilov norm lemmas and the coefficient
//! characterization.
//!
//! Suprema over the unit ball of `E_λ` are largest eigenvalues of weighted
//! Gram matrices. Integer polynomial weights are applied exactly with the
//! Hermite ladder algebra; everything else goes through quadrature.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hermite;
use crate::linalg::{max_eigenvalue, symmetrize};
use crate::operator::{EigenBasis, ShubinParams};
use crate::quadrature::{CompositeRule, GaussLegendre, QuadratureSpec};
use crate::spectral::SpectralSubspace;
use crate::stats::{linear_fit, Verdict};

/// Largest `p + β` accepted by the exact path.
pub const MAX_ORDER: usize = 64;

/// Relative growth of the fitted constant tolerated when the grid doubles.
pub const STABILITY_TOL: f64 = 0.2;

const ETA_FLOOR: f64 = 1e-6;

pub fn ln_factorial(n: usize) -> f64 {
    (2..=n).map(|i| (i as f64).ln()).sum()
}

fn check_subcritical(params: &ShubinParams) -> Result<()> {
    let crit = params.critical_power();
    if params.s > crit * (1.0 + 1e-12) {
        return Err(Error::Domain(format!(
            "Bernstein estimates need s <= s* = {crit}, got s = {}",
            params.s
        )));
    }
    Ok(())
}

fn check_count(basis: &EigenBasis, count: usize) -> Result<()> {
    if count == 0 || count > basis.len() {
        return Err(Error::Truncation {
            requested: count,
            available: basis.len(),
            n: basis.n,
        });
    }
    Ok(())
}

fn derived_modes(basis: &EigenBasis, count: usize, beta: usize) -> Vec<Vec<f64>> {
    (0..count)
        .map(|i| hermite::derivative_n(&basis.mode(i)[..basis.n], beta))
        .collect()
}

/// `M_ij = ⟨∂^β ψ_i, (1+x²)^p ∂^β ψ_j⟩` for the first `count` modes, exact.
pub fn weighted_gram(basis: &EigenBasis, count: usize, p: usize, beta: usize) -> Result<DMatrix<f64>> {
    check_count(basis, count)?;
    if p + beta > MAX_ORDER {
        return Err(Error::Sizing(format!(
            "p + beta = {} exceeds the supported order {MAX_ORDER}",
            p + beta
        )));
    }
    let lo: Vec<Vec<f64>> = derived_modes(basis, count, beta)
        .iter()
        .map(|d| hermite::mul_bracket_pow(d, p / 2))
        .collect();
    let hi: Vec<Vec<f64>> = if p % 2 == 0 {
        lo.clone()
    } else {
        lo.iter().map(|v| hermite::mul_bracket_sq(v)).collect()
    };
    let mut m = DMatrix::from_fn(count, count, |i, j| hermite::dot(&lo[i], &hi[j]));
    symmetrize(&mut m);
    Ok(m)
}

/// `sup_{f ∈ E_λ, ‖f‖=1} ‖⟨x⟩^p ∂^β f‖`.
pub fn weighted_sup_norm(basis: &EigenBasis, subspace: &SpectralSubspace, p: usize, beta: usize) -> Result<f64> {
    let m = weighted_gram(basis, subspace.count, p, beta)?;
    Ok(max_eigenvalue(&m).max(0.0).sqrt())
}

/// `∫ w(x) ∂^βψ_i ∂^βψ_j` over `[-L, L]`, with `ln w` supplied so that the
/// weight may exceed the floating-point range.
fn quadrature_gram<F>(basis: &EigenBasis, count: usize, beta: usize, window: f64, quad: &QuadratureSpec, log_weight: F) -> DMatrix<f64>
where
    F: Fn(f64) -> f64 + Sync,
{
    let len = basis.n + beta;
    let derivs = derived_modes(basis, count, beta);
    let d = DMatrix::from_fn(len, count, |r, c| derivs[c].get(r).copied().unwrap_or(0.0));
    let width = quad.resolved_panel_width(len);
    let rule = CompositeRule::over_intervals(&[(-window, window)], &GaussLegendre::new(quad.order), width);
    let q = rule.nodes.len();
    let mut phi = DMatrix::<f64>::zeros(len, q);
    phi.as_mut_slice()
        .par_chunks_mut(len)
        .zip(rule.nodes.par_iter().zip(&rule.weights))
        .for_each(|(col, (&x, &w))| {
            // √(w·weight) folded into the recurrence scale
            hermite::hermite_functions_weighted(x, 0.5 * (w.ln() + log_weight(x)), col);
        });
    let b = d.transpose() * phi;
    let mut m = &b * b.transpose();
    symmetrize(&mut m);
    m
}

/// Quadrature route to `sup ‖⟨x⟩^{r} ∂^β f‖` for real `r ≥ 0`.
pub fn weighted_sup_norm_quadrature(
    basis: &EigenBasis,
    subspace: &SpectralSubspace,
    power: f64,
    beta: usize,
    quad: &QuadratureSpec,
) -> Result<f64> {
    check_count(basis, subspace.count)?;
    if !(power >= 0.0) {
        return Err(Error::InvalidParameter {
            name: "power",
            reason: format!("weight power must be >= 0, got {power}"),
        });
    }
    let window = quad.resolved_window(basis.n + beta);
    let m = quadrature_gram(basis, subspace.count, beta, window, quad, |x| power * (1.0 + x * x).ln());
    Ok(max_eigenvalue(&m).max(0.0).sqrt())
}

/// `sup ‖e^{η⟨x⟩^{2sk}} ∂^β f‖`, checked for stability under window doubling.
pub fn exp_weight_norm(
    basis: &EigenBasis,
    subspace: &SpectralSubspace,
    eta: f64,
    beta: usize,
    quad: &QuadratureSpec,
) -> Result<f64> {
    check_count(basis, subspace.count)?;
    if !(eta >= 0.0 && eta.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "eta",
            reason: format!("must be finite and >= 0, got {eta}"),
        });
    }
    let sk = basis.params.s * basis.params.k as f64;
    let log_weight = |x: f64| 2.0 * eta * (1.0 + x * x).powf(sk);
    let window = quad.resolved_window(basis.n + beta);
    let narrow = max_eigenvalue(&quadrature_gram(basis, subspace.count, beta, window, quad, log_weight));
    let wide = max_eigenvalue(&quadrature_gram(basis, subspace.count, beta, 2.0 * window, quad, log_weight));
    if !(narrow.is_finite() && wide.is_finite()) || (wide - narrow).abs() > 1e-8 * narrow.abs() {
        return Err(Error::EtaTooLarge {
            eta,
            narrow: narrow.sqrt(),
            wide: wide.sqrt(),
        });
    }
    Ok(narrow.max(0.0).sqrt())
}

/// `η = 1/(4C′²)`.
pub fn proof_eta(c_prime: f64) -> f64 {
    0.25 / (c_prime * c_prime)
}

/// Partial sums of `Σ_p (2η)^p ‖⟨x⟩^{qp} f‖² / p!`, which expand
/// `‖e^{η⟨x⟩^{2q}} f‖²` for integer `q = sk`.
pub fn exp_weight_series(coeffs: &[f64], eta: f64, q: usize, terms: usize) -> Vec<f64> {
    let mut sums = Vec::with_capacity(terms);
    let mut acc = 0.0;
    for p in 0..terms {
        let log_term = p as f64 * (2.0 * eta).ln() - ln_factorial(p);
        let term = if p == 0 {
            hermite::dot(coeffs, coeffs)
        } else {
            log_term.exp() * hermite::bracket_norm_sq(coeffs, q * p)
        };
        acc += term;
        sums.push(acc);
    }
    sums
}

/// One entry of a weighted-norm table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormEntry {
    pub p: usize,
    pub beta: usize,
    pub lambda: f64,
    pub n_modes: usize,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedNormTable {
    pub params: ShubinParams,
    pub entries: Vec<NormEntry>,
}

fn subspaces(basis: &EigenBasis, lambda_grid: &[f64]) -> Result<Vec<SpectralSubspace>> {
    if lambda_grid.is_empty() {
        return Err(Error::InvalidParameter {
            name: "lambda_grid",
            reason: "empty grid".into(),
        });
    }
    lambda_grid
        .iter()
        .map(|&l| {
            let s = SpectralSubspace::new(basis, l)?;
            if s.is_empty() {
                return Err(Error::Domain(format!("lambda = {l} below the ground-state energy")));
            }
            Ok(s)
        })
        .collect()
}

/// `sup ‖⟨x⟩^p ∂^β f‖` for all `p ≤ p_max`, `β ≤ β_max` and `λ` in the grid.
pub fn weighted_norm_table(basis: &EigenBasis, lambda_grid: &[f64], p_max: usize, beta_max: usize) -> Result<WeightedNormTable> {
    let subs = subspaces(basis, lambda_grid)?;
    let top = subs.iter().map(|s| s.count).max().unwrap_or(0);
    let pairs: Vec<(usize, usize)> = (0..=p_max).flat_map(|p| (0..=beta_max).map(move |b| (p, b))).collect();
    let blocks: Vec<Vec<NormEntry>> = pairs
        .par_iter()
        .map(|&(p, beta)| {
            let m = weighted_gram(basis, top, p, beta)?;
            Ok(subs
                .iter()
                .map(|s| {
                    let block = m.view((0, 0), (s.count, s.count)).into_owned();
                    NormEntry {
                        p,
                        beta,
                        lambda: s.lambda,
                        n_modes: s.count,
                        value: max_eigenvalue(&block).max(0.0).sqrt(),
                    }
                })
                .collect())
        })
        .collect::<Result<_>>()?;
    Ok(WeightedNormTable {
        params: basis.params,
        entries: blocks.into_iter().flatten().collect(),
    })
}

/// A point entering a factorial-growth fit: `y = ln value − ln(factorials)`.
#[derive(Debug, Clone, Copy)]
struct FitPoint {
    key: (usize, usize),
    degree: usize,
    lambda: f64,
    y: f64,
    base: bool,
}

/// Fits `y ≤ (1 + degree)·ln C + η λ^s`: `η` is the steepest least-squares
/// slope of `y` against `λ^s` over the groups, `C` the smallest constant
/// that then covers the base points; `C_ext` covers every point.
fn fit_factorial(points: &[FitPoint], s: f64) -> (f64, f64, f64) {
    let mut keys: Vec<(usize, usize)> = points.iter().map(|p| p.key).collect();
    keys.sort_unstable();
    keys.dedup();
    let mut eta = ETA_FLOOR;
    for key in keys {
        let (x, y): (Vec<f64>, Vec<f64>) = points
            .iter()
            .filter(|p| p.base && p.key == key)
            .map(|p| (p.lambda.powf(s), p.y))
            .unzip();
        if let Some(f) = linear_fit(&x, &y) {
            eta = eta.max(f.slope);
        }
    }
    let c_of = |base_only: bool| {
        points
            .iter()
            .filter(|p| p.base || !base_only)
            .map(|p| ((p.y - eta * p.lambda.powf(s)) / (1 + p.degree) as f64).exp())
            .fold(1.0, f64::max)
    };
    (eta, c_of(true), c_of(false))
}

fn doubled_grid(grid: &[f64]) -> (Vec<f64>, usize) {
    let mut all: Vec<f64> = grid.iter().copied().chain(grid.iter().map(|l| 2.0 * l)).collect();
    all.sort_by(f64::total_cmp);
    all.dedup();
    (all, grid.len())
}

/// Fitted constants `C`, `η′` of the Bernstein estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BernsteinFit {
    pub c: f64,
    pub eta_prime: f64,
    /// Constant needed once the grid is extended to `2λ`.
    pub c_extended: f64,
    /// `c_extended / c − 1`.
    pub drift: f64,
    /// Largest `value / bound` on the fitting grid (≤ 1 by construction).
    pub max_ratio: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BernsteinRow {
    pub p: usize,
    pub beta: usize,
    pub lambda: f64,
    pub value: f64,
    pub bound: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BernsteinReport {
    pub params: ShubinParams,
    pub fit: BernsteinFit,
    pub rows: Vec<BernsteinRow>,
    pub verdict: Verdict,
}

impl BernsteinReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("p,beta,lambda,value,bound,ratio\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{:e},{:e},{:e},{:e}\n",
                r.p, r.beta, r.lambda, r.value, r.bound, r.ratio
            ));
        }
        out
    }
}

/// Fits `C`, `η′` in
/// `sup ‖⟨x⟩^p ∂^β f‖ ≤ C^{1+p+β} (p!)^{1/2sk} (β!)^{1/2sm} e^{η′λ^s}` on the
/// grid, then re-derives `C` with `η′` fixed on the grid extended by `2λ`.
/// The basis must hold the modes up to twice the largest grid value.
pub fn bernstein_check(basis: &EigenBasis, lambda_grid: &[f64], p_max: usize, beta_max: usize) -> Result<BernsteinReport> {
    let params = basis.params;
    check_subcritical(&params)?;
    let (s, k, m) = (params.s, params.k as f64, params.m as f64);
    let (grid, _) = doubled_grid(lambda_grid);
    let table = weighted_norm_table(basis, &grid, p_max, beta_max)?;
    let base: Vec<bool> = table
        .entries
        .iter()
        .map(|e| lambda_grid.iter().any(|&l| l == e.lambda))
        .collect();
    let log_fact = |p: usize, b: usize| ln_factorial(p) / (2.0 * s * k) + ln_factorial(b) / (2.0 * s * m);
    let points: Vec<FitPoint> = table
        .entries
        .iter()
        .zip(&base)
        .map(|(e, &base)| FitPoint {
            key: (e.p, e.beta),
            degree: e.p + e.beta,
            lambda: e.lambda,
            y: e.value.ln() - log_fact(e.p, e.beta),
            base,
        })
        .collect();
    let (eta, c, c_ext) = fit_factorial(&points, s);
    let rows: Vec<BernsteinRow> = table
        .entries
        .iter()
        .map(|e| {
            let bound = ((1 + e.p + e.beta) as f64 * c.ln() + log_fact(e.p, e.beta) + eta * e.lambda.powf(s)).exp();
            BernsteinRow {
                p: e.p,
                beta: e.beta,
                lambda: e.lambda,
                value: e.value,
                bound,
                ratio: e.value / bound,
            }
        })
        .collect();
    let max_ratio = rows
        .iter()
        .zip(&base)
        .filter(|(_, &b)| b)
        .map(|(r, _)| r.ratio)
        .fold(0.0, f64::max);
    let drift = c_ext / c - 1.0;
    Ok(BernsteinReport {
        params,
        fit: BernsteinFit {
            c,
            eta_prime: eta,
            c_extended: c_ext,
            drift,
            max_ratio,
        },
        rows,
        verdict: Verdict::from_bool(max_ratio <= 1.0 + 1e-12 && drift <= STABILITY_TOL),
    })
}

/// Grid for the sup-norm scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SupNormOptions {
    /// Spacing of the evaluation grid.
    pub spacing: f64,
    /// Half-width of the scan; `None` uses `1.5 λ_top^{1/2k} + 3`.
    pub window: Option<f64>,
}

impl Default for SupNormOptions {
    fn default() -> Self {
        Self {
            spacing: 1e-3,
            window: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SupEntry {
    pub beta: usize,
    pub lambda: f64,
    pub n_modes: usize,
    pub value: f64,
    pub argmax: f64,
}

/// `sup_{unit f ∈ E_λ} max_x |∂^β f(x)|`. At fixed `x` the supremum over the
/// unit ball is the Euclidean norm of `(∂^β ψ_i(x))_i`.
pub fn sup_norm_table(basis: &EigenBasis, lambda_grid: &[f64], beta_max: usize, opts: &SupNormOptions) -> Result<Vec<SupEntry>> {
    let subs = subspaces(basis, lambda_grid)?;
    let top = subs.iter().map(|s| s.count).max().unwrap_or(0);
    if !(opts.spacing > 0.0) {
        return Err(Error::InvalidParameter {
            name: "spacing",
            reason: "grid spacing must be positive".into(),
        });
    }
    let lambda_top = basis.eigenvalue(top - 1);
    let window = opts
        .window
        .unwrap_or(1.5 * lambda_top.powf(0.5 / basis.params.k as f64) + 3.0);
    let len = basis.n + beta_max;
    let mats: Vec<DMatrix<f64>> = (0..=beta_max)
        .map(|b| {
            let d = derived_modes(basis, top, b);
            DMatrix::from_fn(top, len, |c, r| d[c].get(r).copied().unwrap_or(0.0))
        })
        .collect();
    // every |∂^β ψ_i| is even, so x ≥ 0 suffices
    let steps = (window / opts.spacing).ceil() as usize;
    let h = window / steps as f64;
    let nlam = subs.len();
    let empty = || vec![(0.0f64, 0.0f64); (beta_max + 1) * nlam];
    let best = (0..=steps)
        .into_par_iter()
        .fold(
            || (empty(), vec![0.0; len]),
            |(mut acc, mut buf), i| {
                let x = i as f64 * h;
                hermite::hermite_functions(x, &mut buf);
                let phi = nalgebra::DVector::from_column_slice(&buf);
                for (b, mat) in mats.iter().enumerate() {
                    let v = mat * &phi;
                    let mut cum = 0.0;
                    let mut next = 0;
                    for (j, s) in subs.iter().enumerate() {
                        while next < s.count {
                            cum += v[next] * v[next];
                            next += 1;
                        }
                        let slot = &mut acc[b * nlam + j];
                        if cum > slot.0 {
                            *slot = (cum, x);
                        }
                    }
                }
                (acc, buf)
            },
        )
        .map(|(acc, _)| acc)
        .reduce(empty, |a, b| {
            a.into_iter()
                .zip(b)
                .map(|(u, v)| if v.0 > u.0 || (v.0 == u.0 && v.1 < u.1) { v } else { u })
                .collect()
        });
    let mut out = Vec::with_capacity(best.len());
    for b in 0..=beta_max {
        for (j, s) in subs.iter().enumerate() {
            let (sq, x) = best[b * nlam + j];
            out.push(SupEntry {
                beta: b,
                lambda: s.lambda,
                n_modes: s.count,
                value: sq.sqrt(),
                argmax: x,
            });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupNormReport {
    pub params: ShubinParams,
    pub c: f64,
    pub eta: f64,
    pub c_extended: f64,
    pub drift: f64,
    pub entries: Vec<SupEntry>,
    pub verdict: Verdict,
}

/// Fits `sup |∂^β f| ≤ C″^{1+β} (β!)^{1/2sm} e^{η″λ^s}` with the same
/// protocol as [`bernstein_check`].
pub fn sup_norm_check(basis: &EigenBasis, lambda_grid: &[f64], beta_max: usize, opts: &SupNormOptions) -> Result<SupNormReport> {
    let params = basis.params;
    check_subcritical(&params)?;
    let (grid, _) = doubled_grid(lambda_grid);
    let entries = sup_norm_table(basis, &grid, beta_max, opts)?;
    let sm = params.s * params.m as f64;
    let points: Vec<FitPoint> = entries
        .iter()
        .map(|e| FitPoint {
            key: (0, e.beta),
            degree: e.beta,
            lambda: e.lambda,
            y: e.value.ln() - ln_factorial(e.beta) / (2.0 * sm),
            base: lambda_grid.iter().any(|&l| l == e.lambda),
        })
        .collect();
    let (eta, c, c_ext) = fit_factorial(&points, params.s);
    let drift = c_ext / c - 1.0;
    Ok(SupNormReport {
        params,
        c,
        eta,
        c_extended: c_ext,
        drift,
        entries,
        verdict: Verdict::from_bool(drift <= STABILITY_TOL),
    })
}

/// Which case of the smoothing estimate applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SmoothingRegime {
    /// `s ≤ s*`
    Subcritical,
    /// `s > s*`
    Supercritical,
}

/// `t` and factorial exponents of the smoothing estimate (`d = 1`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoothingExponents {
    pub regime: SmoothingRegime,
    /// Time exponent per unit of `α`.
    pub alpha_time: f64,
    pub beta_time: f64,
    /// `(s*/s)·d`.
    pub base_time: f64,
    pub alpha_factorial: f64,
    pub beta_factorial: f64,
}

pub fn smoothing_exponents(params: &ShubinParams) -> SmoothingExponents {
    let (k, m, s) = (params.k as f64, params.m as f64, params.s);
    let crit = params.critical_power();
    if s <= crit {
        SmoothingExponents {
            regime: SmoothingRegime::Subcritical,
            alpha_time: 1.0 / (2.0 * s * k),
            beta_time: 1.0 / (2.0 * s * m),
            base_time: crit / s,
            alpha_factorial: 1.0 / (2.0 * s * k),
            beta_factorial: 1.0 / (2.0 * s * m),
        }
    } else {
        SmoothingExponents {
            regime: SmoothingRegime::Supercritical,
            alpha_time: m / (k + m),
            beta_time: k / (k + m),
            base_time: crit / s,
            alpha_factorial: m / (k + m),
            beta_factorial: k / (k + m),
        }
    }
}

/// Normalized all-ones vector over the first `len` modes.
pub fn default_probe(len: usize) -> Vec<f64> {
    vec![1.0 / (len as f64).sqrt(); len]
}

/// `‖x^α ∂^β e^{−tH^s} g‖` for eigen-coefficients `g`.
pub fn smoothed_norm(basis: &EigenBasis, probe: &[f64], t: f64, alpha: usize, beta: usize) -> Result<f64> {
    if probe.len() > basis.len() {
        return Err(Error::DimensionMismatch(format!(
            "probe has {} coefficients, basis {} modes",
            probe.len(),
            basis.len()
        )));
    }
    let rates = basis.powered_eigenvalues(basis.params.s);
    let evolved: Vec<f64> = probe.iter().zip(&rates).map(|(g, r)| g * (-t * r).exp()).collect();
    let herm = basis.vectors().rows(0, basis.n).columns(0, probe.len()) * nalgebra::DVector::from_vec(evolved);
    let v = hermite::mul_x_pow(&hermite::derivative_n(herm.as_slice(), beta), alpha);
    Ok(hermite::dot(&v, &v).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoothingEntry {
    pub alpha: usize,
    pub beta: usize,
    pub t: f64,
    pub norm: f64,
    /// `norm · t^{time exponent} / factorials`.
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmoothingReport {
    pub params: ShubinParams,
    pub exponents: SmoothingExponents,
    pub entries: Vec<SmoothingEntry>,
    /// `(t, C_s(t))` with `C_s(t) = max(1, max ratio^{1/(1+α+β)})`.
    pub constants: Vec<(f64, f64)>,
    pub verdict: Verdict,
}

/// Tabulates the smoothing ratios and checks that the constant they require
/// does not grow as `t` decreases: the largest constant over the smallest
/// third of the times stays within 20% of the largest over the rest.
pub fn smoothing_check(
    basis: &EigenBasis,
    t_grid: &[f64],
    alpha_max: usize,
    beta_max: usize,
    probe: &[f64],
) -> Result<SmoothingReport> {
    if let Some(t) = t_grid.iter().find(|t| !(**t > 0.0 && **t <= 1.0)) {
        return Err(Error::InvalidParameter {
            name: "t_grid",
            reason: format!("times must lie in (0, 1], got {t}"),
        });
    }
    let norm = hermite::dot(probe, probe).sqrt();
    if !(norm > 0.0) {
        return Err(Error::InvalidParameter {
            name: "probe",
            reason: "probe must be nonzero".into(),
        });
    }
    let unit: Vec<f64> = probe.iter().map(|v| v / norm).collect();
    let ex = smoothing_exponents(&basis.params);
    let mut times = t_grid.to_vec();
    times.sort_by(|a, b| b.total_cmp(a));
    let mut entries = Vec::new();
    let mut constants = Vec::new();
    for &t in &times {
        let mut c_t: f64 = 1.0;
        for alpha in 0..=alpha_max {
            for beta in 0..=beta_max {
                let value = smoothed_norm(basis, &unit, t, alpha, beta)?;
                let time_exp = ex.alpha_time * alpha as f64 + ex.beta_time * beta as f64 + ex.base_time;
                let log_fact = ex.alpha_factorial * ln_factorial(alpha) + ex.beta_factorial * ln_factorial(beta);
                let ratio = (value.ln() + time_exp * t.ln() - log_fact).exp();
                c_t = c_t.max(ratio.powf(1.0 / (1 + alpha + beta) as f64));
                entries.push(SmoothingEntry {
                    alpha,
                    beta,
                    t,
                    norm: value,
                    ratio,
                });
            }
        }
        constants.push((t, c_t));
    }
    let verdict = if constants.len() < 3 {
        Verdict::Inconclusive
    } else {
        let split = constants.len() - constants.len().div_ceil(3);
        let head = constants[..split].iter().map(|c| c.1).fold(1.0, f64::max);
        let tail = constants[split..].iter().map(|c| c.1).fold(1.0, f64::max);
        Verdict::from_bool(tail <= (1.0 + STABILITY_TOL) * head)
    };
    Ok(SmoothingReport {
        params: basis.params,
        exponents: ex,
        entries,
        constants,
        verdict,
    })
}

/// `‖x^α ∂^β f‖` for `α ≤ a_max`, `β ≤ b_max`; rows indexed by `α`.
pub fn monomial_table(coeffs: &[f64], a_max: usize, b_max: usize) -> Vec<Vec<f64>> {
    (0..=a_max)
        .map(|a| {
            (0..=b_max)
                .map(|b| hermite::monomial_norm_sq(&hermite::derivative_n(coeffs, b), a).sqrt())
                .collect()
        })
        .collect()
}

/// `‖⟨x⟩^p ∂^β f‖` for integer `p`, exact.
pub fn bracket_table(coeffs: &[f64], p_max: usize, b_max: usize) -> Vec<Vec<f64>> {
    (0..=p_max)
        .map(|p| {
            (0..=b_max)
                .map(|b| hermite::bracket_norm_sq(&hermite::derivative_n(coeffs, b), p).sqrt())
                .collect()
        })
        .collect()
}

/// `‖⟨x⟩^{δp} ∂^β f‖` by quadrature.
pub fn fractional_bracket_table(coeffs: &[f64], delta: f64, p_max: usize, b_max: usize, quad: &QuadratureSpec) -> Vec<Vec<f64>> {
    let len = coeffs.len() + b_max;
    let window = quad.resolved_window(len) + 4.0 * (p_max as f64).sqrt();
    let rule = CompositeRule::over_intervals(&[(-window, window)], &GaussLegendre::new(quad.order), quad.resolved_panel_width(len));
    let derivs: Vec<Vec<f64>> = (0..=b_max).map(|b| hermite::derivative_n(coeffs, b)).collect();
    let values: Vec<Vec<f64>> = derivs
        .iter()
        .map(|d| crate::operator::evaluate_hermite(d, &rule.nodes))
        .collect();
    (0..=p_max)
        .map(|p| {
            (0..=b_max)
                .map(|b| {
                    rule.nodes
                        .iter()
                        .zip(&rule.weights)
                        .zip(&values[b])
                        .map(|((x, w), v)| w * (1.0 + x * x).powf(delta * p as f64) * v * v)
                        .sum::<f64>()
                        .sqrt()
                })
                .collect()
        })
        .collect()
}

/// Which norm lemma is being checked.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "lemma", rename_all = "snake_case")]
pub enum LemmaKind {
    /// Monomial bounds imply `⟨x⟩^p` bounds with an extra `(d+1)^{p/2}`.
    Bracket,
    /// `⟨x⟩^p` bounds imply `⟨x⟩^{δp}` bounds.
    Interpolation { delta: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LemmaCase {
    pub c: f64,
    pub a: f64,
    pub premise_holds: bool,
    /// Largest conclusion-table entry over its bound.
    pub max_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LemmaReport {
    pub kind: LemmaKind,
    pub nu: f64,
    pub mu: f64,
    pub cases: Vec<LemmaCase>,
    /// Some supplied premise constants are violated by the table.
    pub premise_violation: bool,
    pub verdict: Verdict,
}

/// Default `A` values at which the premise constant is fitted.
pub const LEMMA_A_GRID: [f64; 7] = [1.0, 1.5, 2.0, 3.0, 4.0, 6.0, 8.0];

/// Checks a norm lemma on measured tables (rows: weight index, columns: `β`,
/// `d = 1`). With `constants = None` the premise constant `C` is fitted at
/// each `A` of [`LEMMA_A_GRID`]. The verdict fails only when a premise holds
/// and its conclusion does not.
pub fn lemma_implication_check(
    kind: LemmaKind,
    premise: &[Vec<f64>],
    conclusion: &[Vec<f64>],
    nu: f64,
    mu: f64,
    constants: Option<(f64, f64)>,
) -> LemmaReport {
    let ln_shape = |i: usize, b: usize, a: f64, pow_nu: f64| {
        (i + b) as f64 * a.ln() + pow_nu * ln_factorial(i) + mu * ln_factorial(b)
    };
    let fit_c = |a: f64| {
        premise
            .iter()
            .enumerate()
            .flat_map(|(i, row)| row.iter().enumerate().map(move |(b, v)| (i, b, *v)))
            .map(|(i, b, v)| (v.ln() - ln_shape(i, b, a, nu)).exp())
            .fold(0.0, f64::max)
    };
    let candidates: Vec<(f64, f64)> = match constants {
        Some(ca) => vec![ca],
        None => LEMMA_A_GRID.iter().map(|&a| (fit_c(a), a)).collect(),
    };
    let mut cases = Vec::with_capacity(candidates.len());
    for (c, a) in candidates {
        let premise_holds = premise.iter().enumerate().all(|(i, row)| {
            row.iter()
                .enumerate()
                .all(|(b, v)| v.ln() <= c.ln() + ln_shape(i, b, a, nu) + 1e-12)
        });
        let mut max_ratio: f64 = 0.0;
        for (p, row) in conclusion.iter().enumerate() {
            for (b, v) in row.iter().enumerate() {
                let ln_bound = match kind {
                    LemmaKind::Bracket => c.ln() + 0.5 * p as f64 * 2f64.ln() + ln_shape(p, b, a, nu),
                    LemmaKind::Interpolation { delta } => {
                        let a_eff = 8f64.powf(nu) * nu.exp() * a;
                        c.ln() + ln_shape(p, b, a_eff, delta * nu)
                    }
                };
                max_ratio = max_ratio.max((v.ln() - ln_bound).exp());
            }
        }
        cases.push(LemmaCase {
            c,
            a,
            premise_holds,
            max_ratio,
        });
    }
    let premise_violation = cases.iter().any(|c| !c.premise_holds);
    let ok = cases
        .iter()
        .filter(|c| c.premise_holds)
        .all(|c| c.max_ratio <= 1.0 + 1e-12);
    let verdict = if cases.iter().all(|c| !c.premise_holds) {
        Verdict::Inconclusive
    } else {
        Verdict::from_bool(ok)
    };
    LemmaReport {
        kind,
        nu,
        mu,
        cases,
        premise_violation,
        verdict,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GsSeries {
    pub eps: f64,
    pub partial_sums: Vec<f64>,
    /// The last 20% of the modes change the sum by less than `1e-8` relative.
    pub saturated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GsProfile {
    pub t: f64,
    /// `(k+m)/(2kmt)`.
    pub exponent: f64,
    pub series: Vec<GsSeries>,
}

/// Partial sums of `Σ_n |⟨f, ψ_n⟩|² e^{ε λ_n^{(k+m)/(2kmt)}}` for eigen-coefficients `f`.
pub fn gs_coefficient_profile(basis: &EigenBasis, coeffs: &[f64], t: f64, eps_grid: &[f64]) -> Result<GsProfile> {
    if !(t >= 1.0) {
        return Err(Error::InvalidParameter {
            name: "t",
            reason: format!("must be >= 1, got {t}"),
        });
    }
    if coeffs.is_empty() || coeffs.len() > basis.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} coefficients for a basis of {} modes",
            coeffs.len(),
            basis.len()
        )));
    }
    let (k, m) = (basis.params.k as f64, basis.params.m as f64);
    let exponent = (k + m) / (2.0 * k * m * t);
    let n = coeffs.len();
    let n0 = ((n as f64 / 1.2).floor() as usize).clamp(1, n);
    let series = eps_grid
        .iter()
        .map(|&eps| {
            let mut acc = 0.0;
            let partial_sums: Vec<f64> = coeffs
                .iter()
                .enumerate()
                .map(|(i, c)| {
                    acc += c * c * (eps * basis.eigenvalue(i).powf(exponent)).exp();
                    acc
                })
                .collect();
            let total = partial_sums[n - 1];
            let saturated = total.is_finite() && total - partial_sums[n0 - 1] <= 1e-8 * total;
            GsSeries {
                eps,
                partial_sums,
                saturated,
            }
        })
        .collect();
    Ok(GsProfile { t, exponent, series })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::ModeRequest;
    use std::f64::consts::PI;

    fn basis(k: u32, m: u32, s: f64, n: usize) -> EigenBasis {
        EigenBasis::compute(ShubinParams::new(k, m, s).unwrap(), n, ModeRequest::Count(n / 2)).unwrap()
    }

    #[test]
    fn trivial_weights() {
        let b = basis(2, 1, 0.75, 60);
        let sub = SpectralSubspace::first(&b, 8).unwrap();
        assert!((weighted_sup_norm(&b, &sub, 0, 0).unwrap() - 1.0).abs() < 1e-12);
        let h = basis(1, 1, 1.0, 40);
        let one = SpectralSubspace::new(&h, 1.0).unwrap();
        assert!((weighted_sup_norm(&h, &one, 1, 0).unwrap() - 1.5f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn exact_against_quadrature() {
        let b = basis(2, 1, 0.75, 80);
        let sub = SpectralSubspace::first(&b, 6).unwrap();
        let exact = weighted_sup_norm(&b, &sub, 3, 2).unwrap();
        let quad = QuadratureSpec {
            order: 32,
            window: Some(16.0),
            panel_width: Some(0.25),
        };
        let q = weighted_sup_norm_quadrature(&b, &sub, 3.0, 2, &quad).unwrap();
        assert!(((exact - q) / exact).abs() < 1e-8, "{exact} vs {q}");
    }

    #[test]
    fn exp_weight_ground_state() {
        let h = basis(1, 1, 1.0, 40);
        let one = SpectralSubspace::first(&h, 1).unwrap();
        let v = exp_weight_norm(&h, &one, 0.125, 0, &QuadratureSpec::default()).unwrap();
        let exact = (0.25f64.exp() * 2.0 / 3f64.sqrt()).sqrt();
        assert!((v - exact).abs() < 1e-12);
        let unit = exp_weight_norm(&h, &one, 0.0, 0, &QuadratureSpec::default()).unwrap();
        assert!((unit - 1.0).abs() < 1e-12);
        assert!(matches!(
            exp_weight_norm(&h, &one, 0.6, 0, &QuadratureSpec::default()),
            Err(Error::EtaTooLarge { .. })
        ));
        let sums = exp_weight_series(&[1.0], 0.125, 1, 60);
        assert!((sums[59] - exact * exact).abs() < 1e-12);
    }

    #[test]
    fn domain_error_above_critical() {
        let b = basis(1, 1, 1.5, 40);
        assert!(matches!(bernstein_check(&b, &[3.0, 5.0], 1, 1), Err(Error::Domain(_))));
    }

    #[test]
    fn bernstein_harmonic() {
        let b = basis(1, 1, 1.0, 120);
        let grid: Vec<f64> = (0..10).map(|i| 1.0 + 4.0 * i as f64).collect();
        let rep = bernstein_check(&b, &grid, 3, 3).unwrap();
        assert!(rep.fit.c >= 1.0 && rep.fit.eta_prime > 0.0);
        assert!(rep.rows.iter().filter(|r| r.p == 0 && r.beta == 0).all(|r| (r.value - 1.0).abs() < 1e-12));
        assert!(rep.to_csv().starts_with("p,beta,lambda,value,bound,ratio\n"));
    }

    #[test]
    fn sup_norm_ground_state_and_parity() {
        let h = basis(1, 1, 1.0, 40);
        let e = sup_norm_table(&h, &[1.0], 0, &SupNormOptions::default()).unwrap();
        assert!((e[0].value - PI.powf(-0.25)).abs() < 1e-12);
        assert_eq!(e[0].argmax, 0.0);
        // Φ_1 alone: odd, vanishes at 0, maximum at x = 1
        let v: Vec<f64> = (0..2000).map(|i| hermite::hermite_function(1, i as f64 * 1e-3).abs()).collect();
        let (imax, _) = v.iter().enumerate().fold((0, 0.0), |a, (i, &x)| if x > a.1 { (i, x) } else { a });
        assert_eq!(v[0], 0.0);
        assert!((imax as f64 * 1e-3 - 1.0).abs() < 2e-3);
    }

    #[test]
    fn semigroup_decay_at_order_zero() {
        let b = basis(2, 1, 0.5, 80);
        for n in [0, 3, 7] {
            let mut g = vec![0.0; 10];
            g[n] = 1.0;
            let v = smoothed_norm(&b, &g, 0.3, 0, 0).unwrap();
            let exact = (-0.3 * b.eigenvalue(n).powf(0.5)).exp();
            assert!((v - exact).abs() < 1e-12);
        }
    }

    #[test]
    fn smoothing_exponent_cases() {
        let ex = smoothing_exponents(&ShubinParams::new(1, 1, 1.0).unwrap());
        assert_eq!(ex.regime, SmoothingRegime::Subcritical);
        assert_eq!((ex.alpha_time, ex.beta_time, ex.base_time), (0.5, 0.5, 1.0));
        let ex = smoothing_exponents(&ShubinParams::new(2, 1, 1.0).unwrap());
        assert_eq!(ex.regime, SmoothingRegime::Supercritical);
        assert!((ex.alpha_time - 1.0 / 3.0).abs() < 1e-15 && (ex.beta_time - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn gs_profile_cases() {
        let h = basis(1, 1, 1.0, 120);
        let single = gs_coefficient_profile(&h, &[1.0], 1.0, &[0.5]).unwrap();
        assert!((single.series[0].partial_sums[0] - 0.5f64.exp()).abs() < 1e-14);
        let decaying: Vec<f64> = (0..60).map(|i| (-h.eigenvalue(i)).exp()).collect();
        let p = gs_coefficient_profile(&h, &decaying, 1.0, &[0.1, 0.5]).unwrap();
        assert!(p.series.iter().all(|s| s.saturated));
        let harmonic: Vec<f64> = (0..60).map(|i| 1.0 / (i + 1) as f64).collect();
        let p = gs_coefficient_profile(&h, &harmonic, 1.0, &[0.01, 0.5]).unwrap();
        assert!(p.series.iter().all(|s| !s.saturated));
    }
}
