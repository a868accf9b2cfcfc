//! Line-oriented `key = value` experiment files with `[section]` headers.
//!
//! ```text
//! kind = constant_sweep
//! seed = 7
//!
//! [operator]
//! k = 2
//! m = 2
//! n = 256
//!
//! [region]
//! name = omega_zero
//!
//! [grid]
//! lambda = reliable log 48
//! ```
//!
//! `#` starts a comment. Grids are a comma list, `lin lo hi n`, `log lo hi n`,
//! or `reliable lin|log n [fraction]` (spread over the reliable eigenvalues).

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;

use serde::Serialize;
use shubin_core::control::LrParams;
use shubin_core::geometry::ExampleRegion;
use shubin_core::operator::ShubinParams;
use shubin_core::quadrature::QuadratureSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Spectrum,
    ConstantSweep,
    Thickness,
    Bernstein,
    Smoothing,
    Control,
    CostBlowup,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 7] = [
        ExperimentKind::Spectrum,
        ExperimentKind::ConstantSweep,
        ExperimentKind::Thickness,
        ExperimentKind::Bernstein,
        ExperimentKind::Smoothing,
        ExperimentKind::Control,
        ExperimentKind::CostBlowup,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ExperimentKind::Spectrum => "spectrum",
            ExperimentKind::ConstantSweep => "constant_sweep",
            ExperimentKind::Thickness => "thickness",
            ExperimentKind::Bernstein => "bernstein",
            ExperimentKind::Smoothing => "smoothing",
            ExperimentKind::Control => "control",
            ExperimentKind::CostBlowup => "cost_blowup",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.as_str() == s)
    }

    pub fn description(&self) -> &'static str {
        match self {
            ExperimentKind::Spectrum => "eigenvalues of H = (-d^2/dx^2)^m + x^2k with the reliability index",
            ExperimentKind::ConstantSweep => "spectral constant C_lambda(omega) along a lambda grid, with exponent fit",
            ExperimentKind::Thickness => "thickness ratio over a center grid and the liminf density of a region",
            ExperimentKind::Bernstein => "weighted derivative norms on spectral subspaces with fitted constants",
            ExperimentKind::Smoothing => "smoothing ratios of the fractional semigroup as t decreases",
            ExperimentKind::Control => "null-control by HUM or a dyadic Lebeau-Robbiano schedule",
            ExperimentKind::CostBlowup => "observability constant against the horizon T",
        }
    }

    fn sections(&self) -> &'static [&'static str] {
        match self {
            ExperimentKind::Spectrum => &["operator"],
            ExperimentKind::ConstantSweep => &["operator", "region", "grid", "quadrature", "fit"],
            ExperimentKind::Thickness => &["region", "grid", "thickness"],
            ExperimentKind::Bernstein => &["operator", "grid", "bernstein"],
            ExperimentKind::Smoothing => &["operator", "grid", "smoothing"],
            ExperimentKind::Control => &["operator", "region", "quadrature", "control"],
            ExperimentKind::CostBlowup => &["operator", "region", "grid", "quadrature", "control"],
        }
    }

    fn required(&self) -> &'static [&'static str] {
        match self {
            ExperimentKind::Spectrum => &["operator.k", "operator.m"],
            ExperimentKind::ConstantSweep => &["operator.k", "operator.m", "region.name"],
            ExperimentKind::Thickness => &["region.name"],
            ExperimentKind::Bernstein => &["operator.k", "operator.m"],
            ExperimentKind::Smoothing => &["operator.k", "operator.m"],
            ExperimentKind::Control => &["operator.k", "operator.m", "region.name", "control.horizon"],
            ExperimentKind::CostBlowup => &["operator.k", "operator.m", "region.name", "grid.T", "control.n_c"],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorKind {
    Syntax,
    UnknownKey,
    UnusedSection,
    Duplicate,
    TypeMismatch,
    Range,
    Missing,
}

/// One validation problem, naming the offending field.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub field: String,
    pub kind: ErrorKind,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: {}: {}", self.field, self.message),
            None => write!(f, "{}: {}", self.field, self.message),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum GridSpec {
    List { values: Vec<f64> },
    Lin { lo: f64, hi: f64, n: usize },
    Log { lo: f64, hi: f64, n: usize },
    /// Spread from `λ_0` to `fraction` times the last reliable eigenvalue.
    Reliable { log: bool, n: usize, fraction: f64 },
}

impl GridSpec {
    fn parse(s: &str) -> Result<GridSpec, String> {
        let words: Vec<&str> = s.split_whitespace().collect();
        let num = |w: &str| w.parse::<f64>().map_err(|_| format!("'{w}' is not a number"));
        let count = |w: &str| w.parse::<usize>().map_err(|_| format!("'{w}' is not a point count"));
        match words.first().copied() {
            Some(shape @ ("lin" | "log")) => {
                if words.len() != 4 {
                    return Err(format!("expected '{shape} lo hi n'"));
                }
                let (lo, hi, n) = (num(words[1])?, num(words[2])?, count(words[3])?);
                Ok(if shape == "lin" {
                    GridSpec::Lin { lo, hi, n }
                } else {
                    GridSpec::Log { lo, hi, n }
                })
            }
            Some("reliable") => {
                if !(words.len() == 3 || words.len() == 4) || !matches!(words[1], "lin" | "log") {
                    return Err("expected 'reliable lin|log n [fraction]'".into());
                }
                Ok(GridSpec::Reliable {
                    log: words[1] == "log",
                    n: count(words[2])?,
                    fraction: words.get(3).map_or(Ok(1.0), |w| num(w))?,
                })
            }
            _ => {
                let values = s
                    .split(',')
                    .map(|w| num(w.trim()))
                    .collect::<Result<Vec<f64>, String>>()?;
                Ok(GridSpec::List { values })
            }
        }
    }

    fn check(&self, positive: bool) -> Result<(), String> {
        let ok_value = |v: f64| v.is_finite() && (!positive || v > 0.0);
        match self {
            GridSpec::List { values } => {
                if values.is_empty() {
                    return Err("grid is empty".into());
                }
                if !values.iter().all(|&v| ok_value(v)) {
                    return Err("grid values must be finite and positive".into());
                }
            }
            GridSpec::Lin { lo, hi, n } | GridSpec::Log { lo, hi, n } => {
                if *n < 2 {
                    return Err("need at least 2 points".into());
                }
                if !(ok_value(*lo) && ok_value(*hi) && lo < hi) {
                    return Err("need finite positive lo < hi".into());
                }
            }
            GridSpec::Reliable { n, fraction, .. } => {
                if *n < 2 {
                    return Err("need at least 2 points".into());
                }
                if !(*fraction > 0.0 && *fraction <= 1.0) {
                    return Err("fraction must lie in (0, 1]".into());
                }
            }
        }
        Ok(())
    }

    /// Resolves against the eigenvalues `λ_0` and the last reliable one.
    pub fn resolve(&self, spectral_range: Option<(f64, f64)>) -> Result<Vec<f64>, String> {
        let spread = |lo: f64, hi: f64, n: usize, log: bool| -> Vec<f64> {
            (0..n)
                .map(|i| {
                    let f = i as f64 / (n - 1) as f64;
                    let v = if log { lo * (hi / lo).powf(f) } else { lo + (hi - lo) * f };
                    v.min(hi)
                })
                .collect()
        };
        Ok(match self {
            GridSpec::List { values } => values.clone(),
            GridSpec::Lin { lo, hi, n } => spread(*lo, *hi, *n, false),
            GridSpec::Log { lo, hi, n } => spread(*lo, *hi, *n, true),
            GridSpec::Reliable { log, n, fraction } => {
                let (lo, hi) = spectral_range.ok_or("a 'reliable' grid needs an operator")?;
                let hi = hi * fraction;
                if hi <= lo {
                    return Err("reliable range is empty at this fraction".into());
                }
                spread(lo, hi, *n, *log)
            }
        })
    }
}

#[derive(Debug, Clone, Copy)]
enum Ty {
    UInt { min: u64, max: u64 },
    /// `(min, min_inclusive, max, max_inclusive)`
    Float(f64, bool, f64, bool),
    Choice(&'static [&'static str]),
    Bool,
    Grid { positive: bool },
    Text,
}

const REGION_NAMES: &[&str] = &[
    "omega_delta",
    "omega_zero",
    "omega_planar",
    "cone",
    "half_line",
    "interval",
    "window",
];

const INF: f64 = f64::INFINITY;

const SCHEMA: &[(&str, Ty)] = &[
    ("kind", Ty::Choice(&["spectrum", "constant_sweep", "thickness", "bernstein", "smoothing", "control", "cost_blowup"])),
    ("seed", Ty::UInt { min: 0, max: u64::MAX }),
    ("out", Ty::Text),
    ("operator.k", Ty::UInt { min: 1, max: 8 }),
    ("operator.m", Ty::UInt { min: 1, max: 8 }),
    ("operator.s", Ty::Float(0.0, false, 8.0, true)),
    ("operator.n", Ty::UInt { min: 4, max: 4096 }),
    ("operator.modes", Ty::UInt { min: 1, max: 2048 }),
    ("region.name", Ty::Choice(REGION_NAMES)),
    ("region.delta", Ty::Float(0.0, true, 1.0, true)),
    ("region.radius", Ty::Float(0.0, false, INF, false)),
    ("region.theta", Ty::Float(0.0, true, std::f64::consts::FRAC_PI_2, false)),
    ("region.a", Ty::Float(-INF, false, INF, false)),
    ("region.b", Ty::Float(-INF, false, INF, false)),
    ("region.window", Ty::Float(0.0, false, INF, false)),
    ("region.samples", Ty::UInt { min: 1, max: 1 << 32 }),
    ("grid.lambda", Ty::Grid { positive: true }),
    ("grid.t", Ty::Grid { positive: true }),
    ("grid.T", Ty::Grid { positive: true }),
    ("grid.radii", Ty::Grid { positive: true }),
    ("quadrature.order", Ty::UInt { min: 2, max: 128 }),
    ("quadrature.window", Ty::Float(0.0, false, INF, false)),
    ("quadrature.panel_width", Ty::Float(0.0, false, INF, false)),
    ("fit.delta", Ty::Float(0.0, true, 1.0, true)),
    ("fit.log_divisor", Ty::Bool),
    ("bernstein.p_max", Ty::UInt { min: 0, max: 32 }),
    ("bernstein.beta_max", Ty::UInt { min: 0, max: 32 }),
    ("smoothing.alpha_max", Ty::UInt { min: 0, max: 32 }),
    ("smoothing.beta_max", Ty::UInt { min: 0, max: 32 }),
    ("smoothing.probe_modes", Ty::UInt { min: 1, max: 2048 }),
    ("thickness.scale", Ty::Float(0.0, false, INF, false)),
    ("thickness.delta", Ty::Float(0.0, true, 1.0, true)),
    ("thickness.center_lo", Ty::Float(-INF, false, INF, false)),
    ("thickness.center_hi", Ty::Float(-INF, false, INF, false)),
    ("thickness.spacing", Ty::Float(0.0, false, INF, false)),
    ("thickness.threshold", Ty::Float(0.0, true, 1.0, true)),
    ("control.horizon", Ty::Float(0.0, false, INF, false)),
    ("control.n_c", Ty::UInt { min: 1, max: 2048 }),
    ("control.method", Ty::Choice(&["lr", "hum"])),
    ("control.modes", Ty::UInt { min: 1, max: 2048 }),
    ("control.tol", Ty::Float(0.0, false, 1.0, false)),
    ("control.split", Ty::Float(0.0, false, 1.0, true)),
    ("control.growth", Ty::Float(1.0, false, INF, false)),
    ("control.mu", Ty::Float(0.0, false, INF, false)),
    ("control.j_max", Ty::UInt { min: 1, max: 64 }),
    ("control.epsilon", Ty::Float(0.0, false, INF, false)),
];

#[derive(Debug, Clone, PartialEq)]
enum Value {
    UInt(u64),
    Float(f64),
    Text(String),
    Bool(bool),
    Grid(GridSpec),
}

fn parse_value(ty: Ty, raw: &str) -> Result<Value, (ErrorKind, String)> {
    let mismatch = |what: &str| (ErrorKind::TypeMismatch, format!("expected {what}, got '{raw}'"));
    match ty {
        Ty::UInt { min, max } => {
            let v: u64 = raw.parse().map_err(|_| mismatch("a non-negative integer"))?;
            if v < min || v > max {
                return Err((ErrorKind::Range, format!("{v} outside [{min}, {max}]")));
            }
            Ok(Value::UInt(v))
        }
        Ty::Float(lo, lo_in, hi, hi_in) => {
            let v: f64 = raw.parse().map_err(|_| mismatch("a number"))?;
            let above = if lo_in { v >= lo } else { v > lo };
            let below = if hi_in { v <= hi } else { v < hi };
            if !(v.is_finite() && above && below) {
                let (l, r) = (if lo_in { '[' } else { '(' }, if hi_in { ']' } else { ')' });
                return Err((ErrorKind::Range, format!("{v} outside {l}{lo}, {hi}{r}")));
            }
            Ok(Value::Float(v))
        }
        Ty::Choice(options) => {
            if options.contains(&raw) {
                Ok(Value::Text(raw.to_string()))
            } else {
                Err((ErrorKind::Range, format!("'{raw}' is not one of {}", options.join(", "))))
            }
        }
        Ty::Bool => match raw {
            "true" => Ok(Value::Bool(true)),
            "false" => Ok(Value::Bool(false)),
            _ => Err(mismatch("true or false")),
        },
        Ty::Grid { positive } => {
            let g = GridSpec::parse(raw).map_err(|e| (ErrorKind::TypeMismatch, e))?;
            g.check(positive).map_err(|e| (ErrorKind::Range, e))?;
            Ok(Value::Grid(g))
        }
        Ty::Text => {
            if raw.is_empty() {
                Err(mismatch("a non-empty string"))
            } else {
                Ok(Value::Text(raw.to_string()))
            }
        }
    }
}

/// Raw `(field, value, line)` triples in file order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RawConfig {
    pub entries: Vec<(String, String, usize)>,
}

pub fn parse(text: &str) -> (RawConfig, Vec<ConfigError>) {
    let mut raw = RawConfig::default();
    let mut errors = Vec::new();
    let mut section = String::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let content = line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(rest) = content.strip_prefix('[') {
            match rest.strip_suffix(']') {
                Some(name) if !name.trim().is_empty() => section = name.trim().to_string(),
                _ => errors.push(ConfigError {
                    line: Some(line_no),
                    field: content.to_string(),
                    kind: ErrorKind::Syntax,
                    message: "malformed section header".into(),
                }),
            }
            continue;
        }
        match content.split_once('=') {
            Some((k, v)) if !k.trim().is_empty() => {
                let key = k.trim();
                let field = if section.is_empty() {
                    key.to_string()
                } else {
                    format!("{section}.{key}")
                };
                raw.entries.push((field, v.trim().to_string(), line_no));
            }
            _ => errors.push(ConfigError {
                line: Some(line_no),
                field: content.to_string(),
                kind: ErrorKind::Syntax,
                message: "expected 'key = value'".into(),
            }),
        }
    }
    (raw, errors)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegionSpec {
    pub example: ExampleRegion,
    pub window: f64,
    pub samples: Option<usize>,
}

impl RegionSpec {
    pub fn is_planar(&self) -> bool {
        matches!(self.example, ExampleRegion::OmegaPlanar { .. } | ExampleRegion::Cone { .. })
    }

    /// Thickness exponent the region is built for; bounded sets fall under
    /// the positive-measure case.
    pub fn natural_delta(&self) -> (f64, bool) {
        match self.example {
            ExampleRegion::OmegaDelta { delta } | ExampleRegion::OmegaPlanar { delta, .. } => (delta, false),
            ExampleRegion::OmegaZero | ExampleRegion::Window => (0.0, false),
            ExampleRegion::Cone { .. } | ExampleRegion::HalfLine => (1.0, false),
            ExampleRegion::Interval { .. } => (1.0, true),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThicknessSpec {
    pub scale: f64,
    pub delta: f64,
    pub center_lo: f64,
    pub center_hi: f64,
    pub spacing: f64,
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ControlSpec {
    pub horizon: Option<f64>,
    pub n_c: Option<usize>,
    pub hum: bool,
    pub modes: Option<usize>,
    pub lr: LrParams,
    pub epsilon: f64,
}

/// A validated experiment with defaults filled in.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub params: Option<ShubinParams>,
    pub n: usize,
    pub modes: Option<usize>,
    pub region: Option<RegionSpec>,
    pub lambda_grid: GridSpec,
    pub t_grid: GridSpec,
    pub horizon_grid: Option<GridSpec>,
    pub radii: Option<GridSpec>,
    pub quadrature: QuadratureSpec,
    pub fit_delta: Option<f64>,
    pub log_divisor: Option<bool>,
    pub p_max: usize,
    pub beta_max: usize,
    pub alpha_max: usize,
    pub probe_modes: usize,
    pub thickness: ThicknessSpec,
    pub control: ControlSpec,
    /// The fields as written, for the manifest.
    pub echo: BTreeMap<String, String>,
}

impl ExperimentConfig {
    pub fn from_text(text: &str) -> Result<Self, Vec<ConfigError>> {
        let (raw, mut errors) = parse(text);
        match validate(&raw) {
            Ok(cfg) if errors.is_empty() => Ok(cfg),
            Ok(_) => Err(errors),
            Err(mut more) => {
                errors.append(&mut more);
                Err(errors)
            }
        }
    }
}

struct Fields {
    values: BTreeMap<String, (Value, usize)>,
}

impl Fields {
    fn uint(&self, f: &str) -> Option<u64> {
        match self.values.get(f) {
            Some((Value::UInt(v), _)) => Some(*v),
            _ => None,
        }
    }
    fn float(&self, f: &str) -> Option<f64> {
        match self.values.get(f) {
            Some((Value::Float(v), _)) => Some(*v),
            _ => None,
        }
    }
    fn text(&self, f: &str) -> Option<&str> {
        match self.values.get(f) {
            Some((Value::Text(v), _)) => Some(v),
            _ => None,
        }
    }
    fn boolean(&self, f: &str) -> Option<bool> {
        match self.values.get(f) {
            Some((Value::Bool(v), _)) => Some(*v),
            _ => None,
        }
    }
    fn grid(&self, f: &str) -> Option<GridSpec> {
        match self.values.get(f) {
            Some((Value::Grid(v), _)) => Some(v.clone()),
            _ => None,
        }
    }
    fn line(&self, f: &str) -> Option<usize> {
        self.values.get(f).map(|v| v.1)
    }
}

/// Checks every field and reports all problems at once.
pub fn validate(raw: &RawConfig) -> Result<ExperimentConfig, Vec<ConfigError>> {
    let mut errors = Vec::new();
    let mut fields = Fields { values: BTreeMap::new() };
    let mut echo = BTreeMap::new();
    let kind = raw
        .entries
        .iter()
        .find(|(f, _, _)| f == "kind")
        .and_then(|(_, v, _)| ExperimentKind::parse(v));
    let mut err = |line: Option<usize>, field: &str, kind: ErrorKind, message: String| {
        errors.push(ConfigError {
            line,
            field: field.to_string(),
            kind,
            message,
        })
    };

    for (field, value, line) in &raw.entries {
        let Some(&(_, ty)) = SCHEMA.iter().find(|(name, _)| name == field) else {
            err(Some(*line), field, ErrorKind::UnknownKey, "unknown key".into());
            continue;
        };
        if let (Some(k), Some((section, _))) = (kind, field.split_once('.')) {
            if !k.sections().contains(&section) {
                err(
                    Some(*line),
                    field,
                    ErrorKind::UnusedSection,
                    format!("section [{section}] is not used by kind {}", k.as_str()),
                );
                continue;
            }
        }
        if fields.values.contains_key(field) {
            err(Some(*line), field, ErrorKind::Duplicate, "given more than once".into());
            continue;
        }
        match parse_value(ty, value) {
            Ok(v) => {
                fields.values.insert(field.clone(), (v, *line));
                echo.insert(field.clone(), value.clone());
            }
            Err((kind, message)) => err(Some(*line), field, kind, message),
        }
    }

    if !raw.entries.iter().any(|(f, _, _)| f == "kind") {
        err(None, "kind", ErrorKind::Missing, "required field is missing".into());
    }
    if let Some(k) = kind {
        for req in k.required() {
            let given = raw.entries.iter().any(|(f, _, _)| f == req);
            if !given {
                err(None, req, ErrorKind::Missing, format!("required for kind {}", k.as_str()));
            }
        }
    }

    // operator
    let k = fields.uint("operator.k").unwrap_or(1) as u32;
    let m = fields.uint("operator.m").unwrap_or(1) as u32;
    let s_default = if kind == Some(ExperimentKind::Bernstein) {
        0.5 * (1.0 / k as f64 + 1.0 / m as f64)
    } else {
        1.0
    };
    let s = fields.float("operator.s").unwrap_or(s_default);
    let params = ShubinParams::new(k, m, s).ok();
    let n = fields.uint("operator.n").unwrap_or(128) as usize;
    if let Some(p) = params {
        if n < p.min_truncation() {
            err(
                fields.line("operator.n"),
                "operator.n",
                ErrorKind::Range,
                format!("N = {n} is below 4(k+m) = {}", p.min_truncation()),
            );
        }
        if kind == Some(ExperimentKind::Bernstein) && s > p.critical_power() + 1e-12 {
            err(
                fields.line("operator.s"),
                "operator.s",
                ErrorKind::Range,
                format!("bernstein needs s <= s* = {}", p.critical_power()),
            );
        }
    }
    let modes = fields.uint("operator.modes").map(|v| v as usize);
    if let Some(md) = modes {
        if md > n / 2 {
            err(fields.line("operator.modes"), "operator.modes", ErrorKind::Range, format!("at most N/2 = {} modes", n / 2));
        }
    }

    // region
    let window = fields.float("region.window").unwrap_or(64.0);
    let need = |name: &str, errs: &mut Vec<ConfigError>| -> f64 {
        let f = format!("region.{name}");
        match fields.float(&f) {
            Some(v) => v,
            None => {
                if !raw.entries.iter().any(|(x, _, _)| *x == f) {
                    errs.push(ConfigError {
                        line: fields.line("region.name"),
                        field: f,
                        kind: ErrorKind::Missing,
                        message: format!("required by region {}", fields.text("region.name").unwrap_or("")),
                    });
                }
                f64::NAN
            }
        }
    };
    let region = match fields.text("region.name") {
        None => None,
        Some(name) => {
            let example = match name {
                "omega_delta" => {
                    let delta = need("delta", &mut errors);
                    if delta >= 1.0 {
                        errors.push(ConfigError {
                            line: fields.line("region.delta"),
                            field: "region.delta".into(),
                            kind: ErrorKind::Range,
                            message: "omega_delta needs delta < 1".into(),
                        });
                    }
                    ExampleRegion::OmegaDelta { delta }
                }
                "omega_zero" => ExampleRegion::OmegaZero,
                "omega_planar" => ExampleRegion::OmegaPlanar {
                    delta: need("delta", &mut errors),
                    radius: need("radius", &mut errors),
                },
                "cone" => ExampleRegion::Cone { theta: need("theta", &mut errors) },
                "half_line" => ExampleRegion::HalfLine,
                "interval" => {
                    let (a, b) = (need("a", &mut errors), need("b", &mut errors));
                    if a >= b {
                        errors.push(ConfigError {
                            line: fields.line("region.b"),
                            field: "region.b".into(),
                            kind: ErrorKind::Range,
                            message: format!("need a < b, got a = {a}, b = {b}"),
                        });
                    }
                    ExampleRegion::Interval { a, b }
                }
                _ => ExampleRegion::Window,
            };
            let spec = RegionSpec {
                example,
                window,
                samples: fields.uint("region.samples").map(|v| v as usize),
            };
            if spec.is_planar() && kind.is_some_and(|k| k != ExperimentKind::Thickness) {
                errors.push(ConfigError {
                    line: fields.line("region.name"),
                    field: "region.name".into(),
                    kind: ErrorKind::Range,
                    message: "planar regions are only supported by the thickness experiment".into(),
                });
            }
            Some(spec)
        }
    };

    let thickness = ThicknessSpec {
        scale: fields.float("thickness.scale").unwrap_or(1.0),
        delta: fields.float("thickness.delta").unwrap_or(0.0),
        center_lo: fields.float("thickness.center_lo").unwrap_or(-20.0),
        center_hi: fields.float("thickness.center_hi").unwrap_or(20.0),
        spacing: fields.float("thickness.spacing").unwrap_or(0.25),
        threshold: fields.float("thickness.threshold").unwrap_or(0.1),
    };
    if thickness.center_lo >= thickness.center_hi {
        errors.push(ConfigError {
            line: fields.line("thickness.center_hi"),
            field: "thickness.center_hi".into(),
            kind: ErrorKind::Range,
            message: "need center_lo < center_hi".into(),
        });
    }

    let control = ControlSpec {
        horizon: fields.float("control.horizon"),
        n_c: fields.uint("control.n_c").map(|v| v as usize),
        hum: fields.text("control.method") == Some("hum"),
        modes: fields.uint("control.modes").map(|v| v as usize),
        lr: LrParams {
            mu: fields.float("control.mu"),
            growth: fields.float("control.growth").unwrap_or(2.0),
            split: fields.float("control.split").unwrap_or(0.5),
            tol: fields.float("control.tol").unwrap_or(1e-6),
            j_max: fields.uint("control.j_max").unwrap_or(20) as usize,
        },
        epsilon: fields.float("control.epsilon").unwrap_or(0.01),
    };
    if kind == Some(ExperimentKind::Control) && control.hum && control.n_c.is_none() {
        errors.push(ConfigError {
            line: fields.line("control.method"),
            field: "control.n_c".into(),
            kind: ErrorKind::Missing,
            message: "required by method hum".into(),
        });
    }
    if kind == Some(ExperimentKind::CostBlowup) {
        if let Some(p) = params {
            if p.critical_power() + control.epsilon >= p.s {
                errors.push(ConfigError {
                    line: fields.line("operator.s"),
                    field: "operator.s".into(),
                    kind: ErrorKind::Range,
                    message: format!("need s > s* + epsilon = {}", p.critical_power() + control.epsilon),
                });
            }
        }
    }
    if let Some(GridSpec::List { values }) = fields.grid("grid.t") {
        if values.iter().any(|&t| t > 1.0) {
            errors.push(ConfigError {
                line: fields.line("grid.t"),
                field: "grid.t".into(),
                kind: ErrorKind::Range,
                message: "times must lie in (0, 1]".into(),
            });
        }
    }

    let quad_default = QuadratureSpec::default();
    let quadrature = QuadratureSpec {
        order: fields.uint("quadrature.order").map_or(quad_default.order, |v| v as usize),
        window: fields.float("quadrature.window").or(quad_default.window),
        panel_width: fields.float("quadrature.panel_width").or(quad_default.panel_width),
    };

    if !errors.is_empty() {
        return Err(errors);
    }
    let kind = kind.expect("kind validated");
    Ok(ExperimentConfig {
        kind,
        seed: fields.uint("seed").unwrap_or(0),
        out: fields.text("out").map(PathBuf::from),
        params: if kind == ExperimentKind::Thickness { None } else { params },
        n,
        modes,
        region,
        lambda_grid: fields.grid("grid.lambda").unwrap_or(match kind {
            ExperimentKind::Bernstein => GridSpec::Reliable {
                log: false,
                n: 8,
                fraction: 0.5,
            },
            _ => GridSpec::Reliable {
                log: true,
                n: 48,
                fraction: 1.0,
            },
        }),
        t_grid: fields.grid("grid.t").unwrap_or(GridSpec::Log { lo: 1e-3, hi: 1.0, n: 12 }),
        horizon_grid: fields.grid("grid.T"),
        radii: fields.grid("grid.radii"),
        quadrature,
        fit_delta: fields.float("fit.delta"),
        log_divisor: fields.boolean("fit.log_divisor"),
        p_max: fields.uint("bernstein.p_max").unwrap_or(8) as usize,
        beta_max: fields
            .uint("bernstein.beta_max")
            .or(fields.uint("smoothing.beta_max"))
            .unwrap_or(if kind == ExperimentKind::Smoothing { 4 } else { 8 }) as usize,
        alpha_max: fields.uint("smoothing.alpha_max").unwrap_or(4) as usize,
        probe_modes: fields.uint("smoothing.probe_modes").unwrap_or(40) as usize,
        thickness,
        control,
        echo,
    })
}
