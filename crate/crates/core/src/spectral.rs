//! The spectral-inequality constant `C_λ(ω) = sup_{f ∈ E_λ} ‖f‖ / ‖f‖_ω`.
//!
//! On `E_λ = span{ψ_0, …, ψ_{n-1}}` the ratio is a Rayleigh quotient of the
//! Gram matrix `G_ij = ∫_ω ψ_i ψ_j`, so `C_λ = λ_min(G)^{-1/2}`. The Gram
//! matrix of the full basis is assembled once; each `λ` uses a leading block.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Region;
use crate::hermite;
use crate::linalg::{sym_eigen_sorted, symmetrize};
use crate::operator::{EigenBasis, ShubinParams};
use crate::quadrature::{CompositeRule, GaussLegendre, QuadratureSpec};
use crate::stats::{linear_fit, tail_bounded, TailTest, Verdict};

/// Tolerance on `0 ⪯ G ⪯ I`.
pub const GRAM_TOL: f64 = 1e-8;

/// `E_λ`: the leading modes with `λ_n ≤ λ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralSubspace {
    pub lambda: f64,
    pub count: usize,
}

impl SpectralSubspace {
    /// Errors when the threshold reaches past the last stored eigenvalue.
    pub fn new(basis: &EigenBasis, lambda: f64) -> Result<Self> {
        let count = basis.count_below(lambda);
        if count == basis.len() && lambda > basis.eigenvalue(count - 1) {
            return Err(Error::Truncation {
                requested: count + 1,
                available: basis.len(),
                n: basis.n,
            });
        }
        Ok(Self { lambda, count })
    }

    /// The first `count` modes, labelled by the last eigenvalue.
    pub fn first(basis: &EigenBasis, count: usize) -> Result<Self> {
        if count == 0 || count > basis.len() {
            return Err(Error::Truncation {
                requested: count,
                available: basis.len(),
                n: basis.n,
            });
        }
        Ok(Self {
            lambda: basis.eigenvalue(count - 1),
            count,
        })
    }

    pub fn indices(&self) -> std::ops::Range<usize> {
        0..self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }
}

/// `∫_ω Φ_a Φ_b` for Hermite indices `a, b < n`.
#[derive(Debug, Clone)]
pub struct HermiteGram {
    pub matrix: DMatrix<f64>,
    /// Quadrature with the window and panel width filled in.
    pub quadrature: QuadratureSpec,
    pub panels: usize,
    /// The region's clip window is narrower than the quadrature window.
    pub region_window_short: bool,
}

/// Assembles the Hermite-basis Gram matrix of a line region.
pub fn hermite_gram(region: &Region, n: usize, quad: &QuadratureSpec) -> Result<HermiteGram> {
    let window = quad.resolved_window(n);
    let width = quad.resolved_panel_width(n);
    let pieces = region.intervals_within(-window, window).map_err(|_| {
        Error::DimensionMismatch("the operator is one-dimensional; planar regions are geometry only".into())
    })?;
    let rule = CompositeRule::over_intervals(&pieces, &GaussLegendre::new(quad.order), width);
    if rule.is_empty() {
        return Err(Error::Singular);
    }
    let q = rule.nodes.len();
    let mut b = DMatrix::<f64>::zeros(n, q);
    b.as_mut_slice()
        .par_chunks_mut(n)
        .zip(rule.nodes.par_iter().zip(&rule.weights))
        .for_each(|(col, (&x, &w))| {
            hermite::hermite_functions(x, col);
            let sw = w.sqrt();
            col.iter_mut().for_each(|v| *v *= sw);
        });
    let mut matrix = &b * b.transpose();
    symmetrize(&mut matrix);
    Ok(HermiteGram {
        matrix,
        quadrature: QuadratureSpec {
            order: quad.order,
            window: Some(window),
            panel_width: Some(width),
        },
        panels: rule.panels,
        region_window_short: region.window() < window,
    })
}

/// Gram matrix of every stored eigenmode over a region.
#[derive(Debug, Clone)]
pub struct ModalGram {
    pub matrix: DMatrix<f64>,
    pub quadrature: QuadratureSpec,
    pub region_id: String,
    pub panels: usize,
    pub region_window_short: bool,
}

/// `G = Vᵀ H V` with `H` the Hermite Gram and `V` the eigenvector matrix.
pub fn modal_gram(basis: &EigenBasis, region: &Region, quad: &QuadratureSpec) -> Result<ModalGram> {
    let hg = hermite_gram(region, basis.n, quad)?;
    let v = basis.vectors().rows(0, basis.n);
    let mut matrix = v.transpose() * &hg.matrix * v;
    symmetrize(&mut matrix);
    Ok(ModalGram {
        matrix,
        quadrature: hg.quadrature,
        region_id: region.name().to_string(),
        panels: hg.panels,
        region_window_short: hg.region_window_short,
    })
}

impl ModalGram {
    /// Leading block for a subspace.
    pub fn restrict(&self, subspace: &SpectralSubspace) -> Result<GramOnRegion> {
        if subspace.count > self.matrix.nrows() {
            return Err(Error::Truncation {
                requested: subspace.count,
                available: self.matrix.nrows(),
                n: self.matrix.nrows(),
            });
        }
        Ok(GramOnRegion {
            matrix: self.matrix.view((0, 0), (subspace.count, subspace.count)).into_owned(),
            subspace: *subspace,
            quadrature: self.quadrature,
            region_id: self.region_id.clone(),
        })
    }

    /// Largest entry change when the window is doubled and the order doubled.
    pub fn doubling_drift(&self, basis: &EigenBasis, region: &Region) -> Result<f64> {
        let window = self.quadrature.window.unwrap_or(1.0);
        let wide = QuadratureSpec {
            order: 2 * self.quadrature.order,
            window: Some(2.0 * window),
            panel_width: self.quadrature.panel_width,
        };
        let other = modal_gram(basis, region, &wide)?;
        Ok((&other.matrix - &self.matrix).amax())
    }
}

/// `G_ij = ∫_ω ψ_i ψ_j` on a spectral subspace.
#[derive(Debug, Clone)]
pub struct GramOnRegion {
    pub matrix: DMatrix<f64>,
    pub subspace: SpectralSubspace,
    pub quadrature: QuadratureSpec,
    pub region_id: String,
}

pub fn gram_on_region(
    basis: &EigenBasis,
    subspace: &SpectralSubspace,
    region: &Region,
    quad: &QuadratureSpec,
) -> Result<GramOnRegion> {
    modal_gram(basis, region, quad)?.restrict(subspace)
}

/// `C = λ_min(G)^{-1/2}` and the function realizing it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralConstant {
    pub c: f64,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub condition: f64,
    /// Eigen-coefficients of the extremal `f`: unit norm, smallest ω-mass.
    pub extremal: Vec<f64>,
}

pub fn spectral_constant(g: &DMatrix<f64>) -> Result<SpectralConstant> {
    let dim = g.nrows();
    if dim == 0 || g.ncols() != dim {
        return Err(Error::DimensionMismatch(format!(
            "Gram matrix must be square and nonempty, got {}x{}",
            g.nrows(),
            g.ncols()
        )));
    }
    let mut sym = g.clone();
    symmetrize(&mut sym);
    let (vals, vecs) = sym_eigen_sorted(&sym);
    let lambda_min = vals[0];
    let lambda_max = vals[dim - 1];
    if lambda_max > 1.0 + GRAM_TOL {
        return Err(Error::Domain(format!(
            "Gram matrix exceeds the identity (largest eigenvalue {lambda_max}); quadrature or truncation fault"
        )));
    }
    if lambda_min < -GRAM_TOL {
        return Err(Error::Indefinite(lambda_min));
    }
    if lambda_min <= 1e3 * f64::EPSILON * dim as f64 {
        return Err(Error::IllConditioned(format!(
            "smallest Gram eigenvalue {lambda_min:e} on {dim} modes"
        )));
    }
    Ok(SpectralConstant {
        c: lambda_min.powf(-0.5),
        lambda_min,
        lambda_max,
        condition: lambda_max / lambda_min,
        extremal: vecs.column(0).iter().copied().collect(),
    })
}

/// One row of a constant sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstantPoint {
    pub lambda: f64,
    pub c: f64,
    pub n_modes: usize,
    pub cond_g: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepOptions {
    pub quadrature: QuadratureSpec,
    /// End the series at the first ill-conditioned Gram instead of failing.
    pub stop_on_ill_conditioned: bool,
    /// Refuse `λ` beyond the basis reliability index.
    pub require_reliable: bool,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            quadrature: QuadratureSpec::default(),
            stop_on_ill_conditioned: false,
            require_reliable: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstantSeries {
    pub params: ShubinParams,
    pub region_id: String,
    pub truncation: usize,
    pub reliability_index: Option<usize>,
    pub quadrature: QuadratureSpec,
    pub points: Vec<ConstantPoint>,
    /// First `λ` dropped because its Gram matrix was numerically singular.
    pub truncated_at: Option<f64>,
}

/// `C_λ(ω)` over an ascending grid of thresholds.
pub fn constant_sweep(
    basis: &EigenBasis,
    region: &Region,
    lambda_grid: &[f64],
    opts: &SweepOptions,
) -> Result<ConstantSeries> {
    if lambda_grid.is_empty() {
        return Err(Error::InvalidParameter {
            name: "lambda_grid",
            reason: "empty grid".into(),
        });
    }
    if lambda_grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidParameter {
            name: "lambda_grid",
            reason: "grid must be ascending".into(),
        });
    }
    let reliability_index = if opts.require_reliable {
        basis.reliability_index()?
    } else {
        None
    };
    let limit = match (opts.require_reliable, reliability_index) {
        (true, Some(r)) => r + 1,
        (true, None) => 0,
        (false, _) => basis.len(),
    };
    let mut subspaces = Vec::with_capacity(lambda_grid.len());
    for &lambda in lambda_grid {
        let sub = SpectralSubspace::new(basis, lambda)?;
        if sub.is_empty() {
            return Err(Error::Domain(format!(
                "lambda = {lambda} lies below the ground-state energy {}",
                basis.eigenvalue(0)
            )));
        }
        if sub.count > limit {
            return Err(Error::Truncation {
                requested: sub.count,
                available: limit,
                n: basis.n,
            });
        }
        subspaces.push(sub);
    }
    let gram = modal_gram(basis, region, &opts.quadrature)?;
    let results: Vec<Result<SpectralConstant>> = subspaces
        .par_iter()
        .map(|sub| spectral_constant(&gram.restrict(sub)?.matrix))
        .collect();

    let mut points = Vec::with_capacity(results.len());
    let mut truncated_at = None;
    for ((sub, res), &lambda) in subspaces.iter().zip(results).zip(lambda_grid) {
        match res {
            Ok(sc) => points.push(ConstantPoint {
                lambda,
                c: sc.c,
                n_modes: sub.count,
                cond_g: sc.condition,
            }),
            Err(Error::IllConditioned(_)) if opts.stop_on_ill_conditioned => {
                truncated_at = Some(lambda);
                break;
            }
            Err(e) => return Err(e),
        }
    }
    // nested leading blocks: λ_min can only drop, up to eigensolver roundoff
    for w in points.windows(2) {
        let slack = 1e3 * f64::EPSILON * w[1].n_modes as f64;
        if w[1].c.powi(-2) > w[0].c.powi(-2) + slack {
            return Err(Error::NonMonotone {
                lambda: w[1].lambda,
                previous: w[0].c,
                current: w[1].c,
            });
        }
    }
    Ok(ConstantSeries {
        params: basis.params,
        region_id: region.name().to_string(),
        truncation: basis.n,
        reliability_index,
        quadrature: gram.quadrature,
        points,
        truncated_at,
    })
}

impl ConstantSeries {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("lambda,C,log_C,n_modes,cond_G\n");
        for p in &self.points {
            out.push_str(&format!(
                "{:e},{:e},{:e},{},{:e}\n",
                p.lambda,
                p.c,
                p.c.ln(),
                p.n_modes,
                p.cond_g
            ));
        }
        out
    }

    /// JSON description of how the series was produced.
    pub fn manifest(&self) -> serde_json::Value {
        serde_json::json!({
            "params": self.params,
            "region": self.region_id,
            "truncation": self.truncation,
            "reliability_index": self.reliability_index,
            "quadrature": self.quadrature,
            "points": self.points.len(),
            "truncated_at": self.truncated_at,
        })
    }

    pub fn pairs(&self) -> Vec<(f64, f64)> {
        self.points.iter().map(|p| (p.lambda, p.c)).collect()
    }
}

/// `½(δ/k + 1/m)`.
pub fn theoretical_exponent(k: u32, m: u32, delta: f64) -> f64 {
    0.5 * (delta / k as f64 + 1.0 / m as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExponentFit {
    /// Slope of `log log C` against `log λ`.
    pub e_fit: f64,
    /// `C ≈ exp(K λ^{e_fit})`.
    pub k_fit: f64,
    pub residual: f64,
    pub e_theory: f64,
    pub log_divisor: bool,
    pub used_points: usize,
    pub tail: Option<TailTest>,
    pub verdict: Verdict,
}

/// Minimum number of points with `C ≥ 2` for a fit.
pub const MIN_FIT_POINTS: usize = 8;

/// Fits the growth exponent and runs the upper-bound tail test on
/// `log C / λ^e` (divided further by `|log λ|` when `log_divisor`).
pub fn fit_exponent(series: &[(f64, f64)], e_theory: f64, log_divisor: bool) -> ExponentFit {
    let used: Vec<(f64, f64)> = series.iter().copied().filter(|&(_, c)| c >= 2.0).collect();
    let mut fit = ExponentFit {
        e_fit: f64::NAN,
        k_fit: f64::NAN,
        residual: f64::NAN,
        e_theory,
        log_divisor,
        used_points: used.len(),
        tail: None,
        verdict: Verdict::Inconclusive,
    };
    if used.len() < MIN_FIT_POINTS {
        return fit;
    }
    let x: Vec<f64> = used.iter().map(|p| p.0.ln()).collect();
    let y: Vec<f64> = used.iter().map(|p| p.1.ln().ln()).collect();
    let Some(lf) = linear_fit(&x, &y) else {
        return fit;
    };
    fit.e_fit = lf.slope;
    fit.k_fit = lf.intercept.exp();
    fit.residual = lf.residual;
    let ratios: Vec<f64> = used
        .iter()
        .map(|&(l, c)| {
            let d = if log_divisor { l.ln().abs() } else { 1.0 };
            c.ln() / (l.powf(e_theory) * d)
        })
        .collect();
    let tail = tail_bounded(&ratios, 2.0);
    fit.verdict = Verdict::from_bool(tail.bounded);
    fit.tail = Some(tail);
    fit
}
