//! Control regions, thickness with respect to a density, density at infinity,
//! Vitali ball selection and the standard example sets.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default Monte Carlo sample count for planar regions.
pub const DEFAULT_PLANAR_SAMPLES: usize = 1_000_000;

/// Closed interval `[a, b]`, serialized as a two-element array.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Interval {
    pub a: f64,
    pub b: f64,
}

impl From<[f64; 2]> for Interval {
    fn from(v: [f64; 2]) -> Self {
        Interval { a: v[0], b: v[1] }
    }
}

impl From<Interval> for [f64; 2] {
    fn from(i: Interval) -> Self {
        [i.a, i.b]
    }
}

impl Interval {
    pub fn new(a: f64, b: f64) -> Self {
        Self { a, b }
    }

    pub fn len(&self) -> f64 {
        self.b - self.a
    }

    pub fn overlap(&self, lo: f64, hi: f64) -> f64 {
        (self.b.min(hi) - self.a.max(lo)).max(0.0)
    }
}

/// Analytically defined planar sets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum PlanarFamily {
    /// `{(x, y) : |y| > R⟨x⟩^δ}`.
    OmegaDeltaR { delta: f64, radius: f64 },
    /// `{(r cos t, r sin t) : r > 0, |t| ≤ π/2 − θ}`.
    Cone { theta: f64 },
}

impl PlanarFamily {
    pub fn contains(&self, x: f64, y: f64) -> bool {
        match *self {
            PlanarFamily::OmegaDeltaR { delta, radius } => {
                y.abs() > radius * (1.0 + x * x).powf(0.5 * delta)
            }
            PlanarFamily::Cone { theta } => {
                (x != 0.0 || y != 0.0) && y.atan2(x).abs() <= 0.5 * PI - theta
            }
        }
    }
}

/// A measurable subset of the line or the plane, restricted to a clip window
/// `[-L, L]` (or `[-L, L]²`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Region {
    Line {
        name: String,
        intervals: Vec<Interval>,
        window: f64,
    },
    Planar {
        name: String,
        family: PlanarFamily,
        window: f64,
        samples: usize,
        seed: u64,
    },
}

impl Region {
    /// Builds a line region: intervals are clipped to the window, sorted and
    /// merged where they touch.
    pub fn line(name: impl Into<String>, intervals: Vec<Interval>, window: f64) -> Result<Self> {
        if !(window > 0.0 && window.is_finite()) {
            return Err(Error::InvalidRegion(format!("window must be positive, got {window}")));
        }
        let mut clipped: Vec<Interval> = Vec::with_capacity(intervals.len());
        for iv in intervals {
            if !(iv.a.is_finite() && iv.b.is_finite()) || iv.b < iv.a {
                return Err(Error::InvalidRegion(format!("bad interval [{}, {}]", iv.a, iv.b)));
            }
            let a = iv.a.max(-window);
            let b = iv.b.min(window);
            if b > a {
                clipped.push(Interval::new(a, b));
            }
        }
        clipped.sort_by(|x, y| x.a.total_cmp(&y.a));
        let mut merged: Vec<Interval> = Vec::with_capacity(clipped.len());
        for iv in clipped {
            match merged.last_mut() {
                Some(last) if iv.a <= last.b => last.b = last.b.max(iv.b),
                _ => merged.push(iv),
            }
        }
        Ok(Region::Line {
            name: name.into(),
            intervals: merged,
            window,
        })
    }

    pub fn planar(name: impl Into<String>, family: PlanarFamily, window: f64) -> Result<Self> {
        if !(window > 0.0 && window.is_finite()) {
            return Err(Error::InvalidRegion(format!("window must be positive, got {window}")));
        }
        Ok(Region::Planar {
            name: name.into(),
            family,
            window,
            samples: DEFAULT_PLANAR_SAMPLES,
            seed: 0x5eed,
        })
    }

    /// Overrides the Monte Carlo budget of a planar region.
    pub fn with_sampling(self, samples: usize, seed: u64) -> Self {
        match self {
            Region::Planar {
                name,
                family,
                window,
                ..
            } => Region::Planar {
                name,
                family,
                window,
                samples,
                seed,
            },
            other => other,
        }
    }

    pub fn name(&self) -> &str {
        match self {
            Region::Line { name, .. } | Region::Planar { name, .. } => name,
        }
    }

    pub fn window(&self) -> f64 {
        match self {
            Region::Line { window, .. } | Region::Planar { window, .. } => *window,
        }
    }

    pub fn dimension(&self) -> usize {
        match self {
            Region::Line { .. } => 1,
            Region::Planar { .. } => 2,
        }
    }

    pub fn intervals(&self) -> Option<&[Interval]> {
        match self {
            Region::Line { intervals, .. } => Some(intervals),
            Region::Planar { .. } => None,
        }
    }

    /// Line-region pieces inside `[lo, hi]`.
    pub fn intervals_within(&self, lo: f64, hi: f64) -> Result<Vec<(f64, f64)>> {
        let ivs = self
            .intervals()
            .ok_or_else(|| Error::InvalidRegion("planar region has no interval structure".into()))?;
        Ok(ivs
            .iter()
            .filter_map(|iv| {
                let a = iv.a.max(lo);
                let b = iv.b.min(hi);
                (b > a).then_some((a, b))
            })
            .collect())
    }

    /// Total measure inside the window (line regions only).
    pub fn measure(&self) -> Option<f64> {
        self.intervals().map(|ivs| ivs.iter().map(Interval::len).sum())
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        match self {
            Region::Line {
                intervals, window, ..
            } => {
                let x = p[0];
                if x.abs() > *window {
                    return false;
                }
                let i = intervals.partition_point(|iv| iv.b < x);
                i < intervals.len() && intervals[i].a <= x
            }
            Region::Planar { family, window, .. } => {
                p[0].abs() <= *window && p[1].abs() <= *window && family.contains(p[0], p[1])
            }
        }
    }

    /// Serializes to JSON.
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("region serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let r: Region = serde_json::from_str(s).map_err(|e| Error::InvalidRegion(e.to_string()))?;
        // re-normalize line intervals
        match r {
            Region::Line {
                name,
                intervals,
                window,
            } => Region::line(name, intervals, window),
            planar => Ok(planar),
        }
    }
}

/// Result of a (possibly Monte Carlo) ball intersection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BallMeasure {
    pub measure: f64,
    /// Standard error of the Monte Carlo estimate (planar regions).
    pub std_error: Option<f64>,
    /// The ball leaves the clip window; the region is unknown out there.
    pub clipped: bool,
}

/// Lebesgue measure of a ball of radius `r` in dimension `d ∈ {1, 2}`.
pub fn ball_volume(dim: usize, radius: f64) -> f64 {
    match dim {
        1 => 2.0 * radius,
        2 => PI * radius * radius,
        _ => unreachable!("only 1-D and 2-D balls are supported"),
    }
}

fn mix_seed(seed: u64, center: &[f64], radius: f64) -> u64 {
    let mut h = seed ^ 0x9e37_79b9_7f4a_7c15;
    for v in center.iter().chain(std::iter::once(&radius)) {
        h ^= v.to_bits();
        h = h.wrapping_mul(0x100_0000_01b3).rotate_left(29);
    }
    h
}

/// `|ω ∩ B(center, radius)|`.
pub fn ball_intersection_measure(region: &Region, center: &[f64], radius: f64) -> Result<BallMeasure> {
    if !(radius > 0.0) {
        return Err(Error::InvalidParameter {
            name: "radius",
            reason: format!("must be positive, got {radius}"),
        });
    }
    if center.len() != region.dimension() {
        return Err(Error::DimensionMismatch(format!(
            "center of dimension {} for a {}-D region",
            center.len(),
            region.dimension()
        )));
    }
    let window = region.window();
    let clipped = center.iter().any(|c| c - radius < -window || c + radius > window);
    match region {
        Region::Line { intervals, .. } => {
            let lo = center[0] - radius;
            let hi = center[0] + radius;
            let start = intervals.partition_point(|iv| iv.b <= lo);
            let measure = intervals[start..]
                .iter()
                .take_while(|iv| iv.a < hi)
                .map(|iv| iv.overlap(lo, hi))
                .sum();
            Ok(BallMeasure {
                measure,
                std_error: None,
                clipped,
            })
        }
        Region::Planar { samples, seed, .. } => {
            let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(*seed, center, radius));
            let n = (*samples).max(1);
            let mut hits = 0usize;
            for _ in 0..n {
                let r = radius * rng.random::<f64>().sqrt();
                let t = 2.0 * PI * rng.random::<f64>();
                if region.contains(&[center[0] + r * t.cos(), center[1] + r * t.sin()]) {
                    hits += 1;
                }
            }
            let area = ball_volume(2, radius);
            let p = hits as f64 / n as f64;
            Ok(BallMeasure {
                measure: area * p,
                std_error: Some(area * (p * (1.0 - p) / n as f64).sqrt()),
                clipped,
            })
        }
    }
}

/// `ρ(x) = R⟨x⟩^δ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThicknessDensity {
    pub scale: f64,
    pub delta: f64,
}

impl ThicknessDensity {
    pub fn new(scale: f64, delta: f64) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "scale",
                reason: format!("R must be positive, got {scale}"),
            });
        }
        if !(0.0..=1.0).contains(&delta) {
            return Err(Error::InvalidParameter {
                name: "delta",
                reason: format!("must lie in [0, 1], got {delta}"),
            });
        }
        Ok(Self { scale, delta })
    }

    pub fn radius(&self, x: &[f64]) -> f64 {
        let r2: f64 = x.iter().map(|v| v * v).sum();
        self.scale * (1.0 + r2).powf(0.5 * self.delta)
    }
}

/// Finite set of ball centers.
#[derive(Debug, Clone, PartialEq)]
pub enum Centers {
    Line(Vec<f64>),
    Planar(Vec<[f64; 2]>),
}

impl Centers {
    /// Uniform 1-D grid on `[lo, hi]` with at most the given spacing.
    pub fn uniform(lo: f64, hi: f64, spacing: f64) -> Self {
        let n = ((hi - lo) / spacing).ceil().max(1.0) as usize;
        let h = (hi - lo) / n as f64;
        Centers::Line((0..=n).map(|i| lo + i as f64 * h).collect())
    }

    /// Uniform square grid on `[lo, hi]²`.
    pub fn uniform_planar(lo: f64, hi: f64, spacing: f64) -> Self {
        let Centers::Line(axis) = Centers::uniform(lo, hi, spacing) else {
            unreachable!()
        };
        Centers::Planar(
            axis.iter()
                .flat_map(|&x| axis.iter().map(move |&y| [x, y]))
                .collect(),
        )
    }

    pub fn len(&self) -> usize {
        match self {
            Centers::Line(v) => v.len(),
            Centers::Planar(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn point(&self, i: usize) -> Vec<f64> {
        match self {
            Centers::Line(v) => vec![v[i]],
            Centers::Planar(v) => v[i].to_vec(),
        }
    }

    fn dimension(&self) -> usize {
        match self {
            Centers::Line(_) => 1,
            Centers::Planar(_) => 2,
        }
    }
}

/// Summary of a center grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CenterGridSpec {
    pub count: usize,
    pub dimension: usize,
    pub min_norm: f64,
    pub max_norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThicknessReport {
    /// `γ̂`: smallest measure ratio over the centers.
    pub gamma: f64,
    pub worst_center: Vec<f64>,
    pub grid: CenterGridSpec,
    pub density: ThicknessDensity,
    pub empty_region: bool,
    /// Number of balls that left the clip window.
    pub clipped: usize,
    #[serde(skip)]
    pub ratios: Vec<f64>,
}

/// Certifies γ-thickness with respect to `density` on a finite center grid.
pub fn thickness_profile(
    region: &Region,
    density: &ThicknessDensity,
    centers: &Centers,
) -> Result<ThicknessReport> {
    if centers.is_empty() {
        return Err(Error::InvalidParameter {
            name: "centers",
            reason: "empty center grid".into(),
        });
    }
    if centers.dimension() != region.dimension() {
        return Err(Error::DimensionMismatch(format!(
            "{}-D centers for a {}-D region",
            centers.dimension(),
            region.dimension()
        )));
    }
    let norms: Vec<f64> = (0..centers.len())
        .map(|i| centers.point(i).iter().map(|v| v * v).sum::<f64>().sqrt())
        .collect();
    let grid = CenterGridSpec {
        count: centers.len(),
        dimension: centers.dimension(),
        min_norm: norms.iter().copied().fold(f64::INFINITY, f64::min),
        max_norm: norms.iter().copied().fold(0.0, f64::max),
    };
    let empty = region.measure().is_some_and(|m| m == 0.0);
    if empty {
        return Ok(ThicknessReport {
            gamma: 0.0,
            worst_center: centers.point(0),
            grid,
            density: *density,
            empty_region: true,
            clipped: 0,
            ratios: vec![0.0; centers.len()],
        });
    }
    let results: Vec<(f64, bool)> = (0..centers.len())
        .into_par_iter()
        .map(|i| {
            let c = centers.point(i);
            let r = density.radius(&c);
            let bm = ball_intersection_measure(region, &c, r)?;
            let ratio = (bm.measure / ball_volume(region.dimension(), r)).clamp(0.0, 1.0);
            Ok((ratio, bm.clipped))
        })
        .collect::<Result<_>>()?;
    let (worst, gamma) = results
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (i, (r, _))| if *r < acc.1 { (i, *r) } else { acc });
    Ok(ThicknessReport {
        gamma,
        worst_center: centers.point(worst),
        grid,
        density: *density,
        empty_region: false,
        clipped: results.iter().filter(|r| r.1).count(),
        ratios: results.into_iter().map(|r| r.0).collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LiminfReport {
    pub radii: Vec<f64>,
    pub ratios: Vec<f64>,
    /// Minimum over the last third of the radii.
    pub tail_min: f64,
    pub threshold: f64,
    /// Tail minimum exceeds the threshold, as a 1-weakly-thick set must.
    pub consistent: bool,
    pub clipped: bool,
}

/// `|ω ∩ B(0, R)| / |B(0, R)|` along ascending radii.
pub fn liminf_density(region: &Region, radii: &[f64], threshold: f64) -> Result<LiminfReport> {
    if radii.is_empty() || radii.iter().any(|r| !(*r > 0.0)) {
        return Err(Error::InvalidParameter {
            name: "radii",
            reason: "radii must be positive and nonempty".into(),
        });
    }
    if radii.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter {
            name: "radii",
            reason: "radii must be strictly ascending".into(),
        });
    }
    let origin = vec![0.0; region.dimension()];
    let mut ratios = Vec::with_capacity(radii.len());
    let mut clipped = false;
    for &r in radii {
        let bm = ball_intersection_measure(region, &origin, r)?;
        clipped |= bm.clipped;
        ratios.push(bm.measure / ball_volume(region.dimension(), r));
    }
    let tail_start = radii.len() - radii.len().div_ceil(3);
    let tail_min = ratios[tail_start..].iter().copied().fold(f64::INFINITY, f64::min);
    Ok(LiminfReport {
        radii: radii.to_vec(),
        ratios,
        tail_min,
        threshold,
        consistent: tail_min > threshold,
        clipped,
    })
}

/// A ball in `ℝ^D`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ball<const D: usize> {
    #[serde(with = "serde_arrays")]
    pub center: [f64; D],
    pub radius: f64,
}

mod serde_arrays {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer, const D: usize>(v: &[f64; D], s: S) -> Result<S::Ok, S::Error> {
        v.as_slice().serialize(s)
    }

    pub fn deserialize<'de, De: Deserializer<'de>, const D: usize>(d: De) -> Result<[f64; D], De::Error> {
        let v = Vec::<f64>::deserialize(d)?;
        v.try_into()
            .map_err(|_| serde::de::Error::custom(format!("expected {D} coordinates")))
    }
}

impl<const D: usize> Ball<D> {
    pub fn new(center: [f64; D], radius: f64) -> Self {
        Self { center, radius }
    }

    pub fn distance(&self, other: &Self) -> f64 {
        self.center
            .iter()
            .zip(&other.center)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    /// Open balls: tangency counts as disjoint.
    pub fn intersects(&self, other: &Self) -> bool {
        self.distance(other) < self.radius + other.radius
    }

    /// `self ⊂ B(other.center, factor · other.radius)`.
    pub fn inside_dilation(&self, other: &Self, factor: f64) -> bool {
        self.distance(other) + self.radius <= factor * other.radius * (1.0 + 1e-12)
    }
}

/// Greedy Vitali selection: scan balls by decreasing radius (ties by input
/// index) and keep a ball iff it misses every ball kept so far. Returns the
/// kept indices in ascending order.
///
/// The kept balls are pairwise disjoint and every input ball lies in the
/// threefold dilation of some kept ball.
pub fn vitali_select<const D: usize>(balls: &[Ball<D>]) -> Result<Vec<usize>> {
    if let Some(b) = balls.iter().find(|b| !(b.radius > 0.0)) {
        return Err(Error::InvalidParameter {
            name: "radius",
            reason: format!("ball radii must be positive, got {}", b.radius),
        });
    }
    let mut order: Vec<usize> = (0..balls.len()).collect();
    order.sort_by(|&i, &j| balls[j].radius.total_cmp(&balls[i].radius).then(i.cmp(&j)));
    let mut kept: Vec<usize> = Vec::new();
    for i in order {
        if kept.iter().all(|&j| !balls[i].intersects(&balls[j])) {
            kept.push(i);
        }
    }
    kept.sort_unstable();
    Ok(kept)
}

/// The named example sets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum ExampleRegion {
    /// `⋃_n [n^q, (n^q + (n+1)^q)/2]` and mirror, `q = 1/(1−δ)`.
    OmegaDelta { delta: f64 },
    /// `⋃_{n∈ℤ} [2n, 2n+1]`: half density, period 2.
    OmegaZero,
    /// `{|y| > R⟨x⟩^δ}`.
    OmegaPlanar { delta: f64, radius: f64 },
    /// Cone of half-opening `π/2 − θ` around the positive x-axis.
    Cone { theta: f64 },
    /// `[0, ∞)`.
    HalfLine,
    /// A single interval.
    Interval { a: f64, b: f64 },
    /// The whole clip window.
    Window,
}

impl ExampleRegion {
    pub fn id(&self) -> String {
        match self {
            ExampleRegion::OmegaDelta { delta } => format!("omega_delta({delta})"),
            ExampleRegion::OmegaZero => "omega_zero".into(),
            ExampleRegion::OmegaPlanar { delta, radius } => format!("omega_planar({delta},{radius})"),
            ExampleRegion::Cone { theta } => format!("cone({theta})"),
            ExampleRegion::HalfLine => "half_line".into(),
            ExampleRegion::Interval { a, b } => format!("interval({a},{b})"),
            ExampleRegion::Window => "window".into(),
        }
    }
}

/// Builds an example set clipped to the window `[-L, L]` (or `[-L, L]²`).
pub fn example_region(example: &ExampleRegion, window: f64) -> Result<Region> {
    let id = example.id();
    match *example {
        ExampleRegion::OmegaDelta { delta } => {
            if !(0.0..1.0).contains(&delta) {
                return Err(Error::Domain(format!(
                    "omega_delta requires 0 <= delta < 1, got {delta}"
                )));
            }
            let q = 1.0 / (1.0 - delta);
            let mut intervals = Vec::new();
            let mut n = 0u64;
            loop {
                let left = (n as f64).powf(q);
                if left > window {
                    break;
                }
                let right = 0.5 * (left + ((n + 1) as f64).powf(q));
                intervals.push(Interval::new(left, right));
                intervals.push(Interval::new(-right, -left));
                n += 1;
            }
            Region::line(id, intervals, window)
        }
        ExampleRegion::OmegaZero => {
            let top = (window / 2.0).ceil() as i64 + 1;
            let intervals = (-top..=top)
                .map(|n| Interval::new(2.0 * n as f64, 2.0 * n as f64 + 1.0))
                .collect();
            Region::line(id, intervals, window)
        }
        ExampleRegion::OmegaPlanar { delta, radius } => {
            ThicknessDensity::new(radius, delta)?;
            Region::planar(id, PlanarFamily::OmegaDeltaR { delta, radius }, window)
        }
        ExampleRegion::Cone { theta } => {
            if !(0.0..0.5 * PI).contains(&theta) {
                return Err(Error::Domain(format!("cone requires 0 <= theta < pi/2, got {theta}")));
            }
            Region::planar(id, PlanarFamily::Cone { theta }, window)
        }
        ExampleRegion::HalfLine => Region::line(id, vec![Interval::new(0.0, window)], window),
        ExampleRegion::Interval { a, b } => Region::line(id, vec![Interval::new(a, b)], window),
        ExampleRegion::Window => Region::line(id, vec![Interval::new(-window, window)], window),
    }
}
