//! Run configuration: a plain sectioned key = value file.
//!
//! Sections: [grid], [circuit], [laws], [thermal], [scheme], [output].
//! Parsing collects every violation (syntax, missing keys, type errors and
//! module preconditions such as τ < τ*, dt | τ, θ* > 0, positive bounds),
//! not just the first. A parsed configuration serializes back to an
//! identical configuration (floats carry 17 significant digits).
//!
//! ```text
//! [grid]
//! nx = 16
//! ny = 16
//! nz = 16
//! lx = 1.0
//! ly = 1.0
//! ell = 1.0
//!
//! [circuit]
//! lambda1 = 1.0
//! lambda2 = 1.0
//! lambda3 = 1.0
//! v0 = 1.0
//! v0_prime = 0.0
//! f = zero                    # zero | constant c | sine amp omega | steps t:v,t:v
//!
//! [laws]
//! sigma = constant 1.0        # constant c | affine offset slope lo hi | sigmoid lo hi center width
//! k = constant 1.0
//! h = linear 1.0              # zero | linear slope | clamped slope lo hi | power coeff exponent
//!
//! [thermal]
//! theta0 = constant 2.0       # constant c | layers lo hi zsplit | hotspot base amp cx cy cz width
//! theta_gamma = constant 2.0  # constant c | sine base amp omega
//! theta_star = 1.0
//!
//! [scheme]
//! tau = 0.016
//! dt = 0.001
//! t_final = 1.0
//! # optional: tol_lin = 1e-10, tol_fp = 1e-8, tol_newton = 1e-10,
//! #           alpha = 0.8333…, max_fp_iter, max_newton, max_halvings
//!
//! [output]
//! # optional: dir = path, snapshots = t1,t2, checks = on|off
//! ```

use crate::circuit::{CircuitParams, SourceTerm};
use crate::grid::{Field, Grid, LateralTrace};
use crate::laws::{ExchangeLaw, LawFamily, MaterialLaws};
use crate::scheme::SchemeConfig;
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use thiserror::Error;

/// Every violation found while parsing and validating a configuration.
#[derive(Debug, Error, PartialEq)]
#[error("invalid configuration:\n{}", .violations.join("\n"))]
pub struct ConfigError {
    pub violations: Vec<String>,
}

/// Initial-temperature presets.
#[derive(Debug, Clone, PartialEq)]
pub enum FieldPreset {
    Constant(f64),
    /// lo below z_split, hi above.
    Layers {
        lo: f64,
        hi: f64,
        z_split: f64,
    },
    /// base + amplitude · exp(-|x - c|²/width²).
    Hotspot {
        base: f64,
        amplitude: f64,
        cx: f64,
        cy: f64,
        cz: f64,
        width: f64,
    },
}

impl FieldPreset {
    pub fn build(&self, g: &Grid) -> Field {
        match *self {
            FieldPreset::Constant(c) => Field::constant(g, c),
            FieldPreset::Layers { lo, hi, z_split } => {
                Field::from_fn(g, |_, _, z| if z < z_split { lo } else { hi })
            }
            FieldPreset::Hotspot {
                base,
                amplitude,
                cx,
                cy,
                cz,
                width,
            } => Field::from_fn(g, |x, y, z| {
                let d2 = (x - cx).powi(2) + (y - cy).powi(2) + (z - cz).powi(2);
                base + amplitude * (-d2 / (width * width)).exp()
            }),
        }
    }

    fn min_value(&self) -> f64 {
        match *self {
            FieldPreset::Constant(c) => c,
            FieldPreset::Layers { lo, hi, .. } => lo.min(hi),
            FieldPreset::Hotspot {
                base, amplitude, ..
            } => base + amplitude.min(0.0),
        }
    }
}

/// Boundary-temperature presets (uniform over the lateral surface).
#[derive(Debug, Clone, PartialEq)]
pub enum TracePreset {
    Constant(f64),
    /// base + amplitude · sin(omega t).
    TimeSine {
        base: f64,
        amplitude: f64,
        omega: f64,
    },
}

impl TracePreset {
    pub fn trace(&self, g: &Grid, t: f64) -> LateralTrace {
        let v = match *self {
            TracePreset::Constant(c) => c,
            TracePreset::TimeSine {
                base,
                amplitude,
                omega,
            } => base + amplitude * (omega * t).sin(),
        };
        LateralTrace::constant(g, v)
    }

    fn min_value(&self) -> f64 {
        match *self {
            TracePreset::Constant(c) => c,
            TracePreset::TimeSine {
                base, amplitude, ..
            } => base - amplitude.abs(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridBlock {
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
    pub lx: f64,
    pub ly: f64,
    pub ell: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThermalBlock {
    pub theta0: FieldPreset,
    pub theta_gamma: TracePreset,
    pub theta_star: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputBlock {
    pub dir: Option<String>,
    pub snapshots: Vec<f64>,
    pub checks: bool,
}

impl Default for OutputBlock {
    fn default() -> Self {
        OutputBlock {
            dir: None,
            snapshots: Vec::new(),
            checks: true,
        }
    }
}

/// A fully parsed and validated run configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub grid: GridBlock,
    pub circuit: CircuitParams,
    pub sigma: LawFamily,
    pub k: LawFamily,
    pub h: ExchangeLaw,
    pub thermal: ThermalBlock,
    pub scheme: SchemeConfig,
    pub output: OutputBlock,
}

impl RunConfig {
    pub fn build_grid(&self) -> Grid {
        Grid::new(
            self.grid.nx,
            self.grid.ny,
            self.grid.nz,
            self.grid.lx,
            self.grid.ly,
            self.grid.ell,
        )
        .expect("validated at parse time")
    }

    pub fn build_laws(&self) -> MaterialLaws {
        MaterialLaws::new(self.sigma.clone(), self.k.clone(), self.h.clone())
            .expect("validated at parse time")
    }

    /// θ₀ >= θ* and inf_t θ_Γ >= θ*: whether the minimum-principle
    /// hypothesis holds for this data (runs with violating data are allowed;
    /// the check then reports the violation).
    pub fn data_satisfies_lower_bound(&self) -> bool {
        self.thermal.theta0.min_value() >= self.thermal.theta_star
            && self.thermal.theta_gamma.min_value() >= self.thermal.theta_star
    }

    /// Execute the configured run.
    pub fn execute(
        &self,
        options: &crate::scheme::RunOptions,
    ) -> Result<crate::scheme::RunState, crate::scheme::SchemeError> {
        let g = self.build_grid();
        let laws = self.build_laws();
        let preset = self.thermal.theta_gamma.clone();
        let theta_gamma = move |g: &Grid, t: f64| preset.trace(g, t);
        let data = crate::scheme::ThermalData {
            theta0: self.thermal.theta0.build(&g),
            theta_gamma: &theta_gamma,
            theta_star: self.thermal.theta_star,
        };
        crate::scheme::run(&self.scheme, &self.circuit, &laws, &g, &data, options)
    }

    /// Execute the τ-refinement study for this configuration.
    pub fn execute_refinement(
        &self,
        options: &crate::scheme::RunOptions,
    ) -> Result<crate::scheme::RefinementReport, crate::scheme::SchemeError> {
        let g = self.build_grid();
        let laws = self.build_laws();
        let preset = self.thermal.theta_gamma.clone();
        let theta_gamma = move |g: &Grid, t: f64| preset.trace(g, t);
        let data = crate::scheme::ThermalData {
            theta0: self.thermal.theta0.build(&g),
            theta_gamma: &theta_gamma,
            theta_star: self.thermal.theta_star,
        };
        crate::scheme::tau_refinement_study(&self.scheme, &self.circuit, &laws, &g, &data, options)
    }

    /// Deterministic round-trip serialization.
    pub fn serialize(&self) -> String {
        let mut s = String::new();
        let f = fmt_f64;
        writeln!(s, "[grid]").unwrap();
        writeln!(s, "nx = {}", self.grid.nx).unwrap();
        writeln!(s, "ny = {}", self.grid.ny).unwrap();
        writeln!(s, "nz = {}", self.grid.nz).unwrap();
        writeln!(s, "lx = {}", f(self.grid.lx)).unwrap();
        writeln!(s, "ly = {}", f(self.grid.ly)).unwrap();
        writeln!(s, "ell = {}", f(self.grid.ell)).unwrap();
        writeln!(s).unwrap();
        writeln!(s, "[circuit]").unwrap();
        writeln!(s, "lambda1 = {}", f(self.circuit.lambda1)).unwrap();
        writeln!(s, "lambda2 = {}", f(self.circuit.lambda2)).unwrap();
        writeln!(s, "lambda3 = {}", f(self.circuit.lambda3)).unwrap();
        writeln!(s, "v0 = {}", f(self.circuit.v0)).unwrap();
        writeln!(s, "v0_prime = {}", f(self.circuit.v0_prime)).unwrap();
        let src = match &self.circuit.source {
            SourceTerm::Zero => "zero".to_string(),
            SourceTerm::Constant(c) => format!("constant {}", f(*c)),
            SourceTerm::Sine { amplitude, omega } => {
                format!("sine {} {}", f(*amplitude), f(*omega))
            }
            SourceTerm::Steps(segs) => {
                let parts: Vec<String> = segs
                    .iter()
                    .map(|(t, v)| format!("{}:{}", f(*t), f(*v)))
                    .collect();
                format!("steps {}", parts.join(","))
            }
        };
        writeln!(s, "f = {src}").unwrap();
        writeln!(s).unwrap();
        writeln!(s, "[laws]").unwrap();
        writeln!(s, "sigma = {}", family_str(&self.sigma)).unwrap();
        writeln!(s, "k = {}", family_str(&self.k)).unwrap();
        let h = match &self.h {
            ExchangeLaw::Zero => "zero".to_string(),
            ExchangeLaw::Linear { slope } => format!("linear {}", f(*slope)),
            ExchangeLaw::ClampedLinear { slope, lo, hi } => {
                format!("clamped {} {} {}", f(*slope), f(*lo), f(*hi))
            }
            ExchangeLaw::Power { coeff, exponent } => {
                format!("power {} {}", f(*coeff), f(*exponent))
            }
        };
        writeln!(s, "h = {h}").unwrap();
        writeln!(s).unwrap();
        writeln!(s, "[thermal]").unwrap();
        let th0 = match &self.thermal.theta0 {
            FieldPreset::Constant(c) => format!("constant {}", f(*c)),
            FieldPreset::Layers { lo, hi, z_split } => {
                format!("layers {} {} {}", f(*lo), f(*hi), f(*z_split))
            }
            FieldPreset::Hotspot {
                base,
                amplitude,
                cx,
                cy,
                cz,
                width,
            } => format!(
                "hotspot {} {} {} {} {} {}",
                f(*base),
                f(*amplitude),
                f(*cx),
                f(*cy),
                f(*cz),
                f(*width)
            ),
        };
        writeln!(s, "theta0 = {th0}").unwrap();
        let tg = match &self.thermal.theta_gamma {
            TracePreset::Constant(c) => format!("constant {}", f(*c)),
            TracePreset::TimeSine {
                base,
                amplitude,
                omega,
            } => {
                format!("sine {} {} {}", f(*base), f(*amplitude), f(*omega))
            }
        };
        writeln!(s, "theta_gamma = {tg}").unwrap();
        writeln!(s, "theta_star = {}", f(self.thermal.theta_star)).unwrap();
        writeln!(s).unwrap();
        writeln!(s, "[scheme]").unwrap();
        writeln!(s, "tau = {}", f(self.scheme.tau)).unwrap();
        writeln!(s, "dt = {}", f(self.scheme.dt)).unwrap();
        writeln!(s, "t_final = {}", f(self.scheme.t_final)).unwrap();
        writeln!(s, "tol_fp = {}", f(self.scheme.tol_fp)).unwrap();
        writeln!(s, "tol_lin = {}", f(self.scheme.tol_lin)).unwrap();
        writeln!(s, "tol_newton = {}", f(self.scheme.tol_newton)).unwrap();
        writeln!(s, "alpha = {}", f(self.scheme.alpha)).unwrap();
        writeln!(s, "max_fp_iter = {}", self.scheme.max_fp_iter).unwrap();
        writeln!(s, "max_newton = {}", self.scheme.max_newton).unwrap();
        writeln!(s, "max_halvings = {}", self.scheme.max_halvings).unwrap();
        writeln!(s).unwrap();
        writeln!(s, "[output]").unwrap();
        if let Some(dir) = &self.output.dir {
            writeln!(s, "dir = {dir}").unwrap();
        }
        if !self.output.snapshots.is_empty() {
            let parts: Vec<String> = self.output.snapshots.iter().map(|t| f(*t)).collect();
            writeln!(s, "snapshots = {}", parts.join(",")).unwrap();
        }
        writeln!(
            s,
            "checks = {}",
            if self.output.checks { "on" } else { "off" }
        )
        .unwrap();
        s
    }
}

/// 17 significant digits: round-trips every f64 exactly.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn family_str(fam: &LawFamily) -> String {
    let f = fmt_f64;
    match fam {
        LawFamily::Constant { value } => format!("constant {}", f(*value)),
        LawFamily::ClampedAffine {
            offset,
            slope,
            lo,
            hi,
        } => {
            format!("affine {} {} {} {}", f(*offset), f(*slope), f(*lo), f(*hi))
        }
        LawFamily::Sigmoid {
            lo,
            hi,
            center,
            width,
        } => {
            format!("sigmoid {} {} {} {}", f(*lo), f(*hi), f(*center), f(*width))
        }
    }
}

/// Raw sections: section -> key -> value string.
type Sections = BTreeMap<String, BTreeMap<String, String>>;

fn split_sections(text: &str, errors: &mut Vec<String>) -> Sections {
    let mut sections: Sections = BTreeMap::new();
    let mut current: Option<String> = None;
    for (lineno, raw) in text.lines().enumerate() {
        let line = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            current = Some(name.trim().to_string());
            sections.entry(name.trim().to_string()).or_default();
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            errors.push(format!(
                "line {}: expected `key = value`, got `{line}`",
                lineno + 1
            ));
            continue;
        };
        let Some(section) = &current else {
            errors.push(format!(
                "line {}: `{}` appears before any [section]",
                lineno + 1,
                key.trim()
            ));
            continue;
        };
        sections
            .get_mut(section)
            .unwrap()
            .insert(key.trim().to_string(), value.trim().to_string());
    }
    sections
}

struct SectionReader<'a> {
    name: &'a str,
    map: BTreeMap<String, String>,
    errors: &'a mut Vec<String>,
}

impl SectionReader<'_> {
    fn take(&mut self, key: &str) -> Option<String> {
        self.map.remove(key)
    }

    fn required(&mut self, key: &str) -> Option<String> {
        let v = self.map.remove(key);
        if v.is_none() {
            self.errors
                .push(format!("{}.{key}: missing required key", self.name));
        }
        v
    }

    fn f64_required(&mut self, key: &str) -> f64 {
        match self.required(key) {
            Some(v) => self.parse_f64(key, &v),
            None => f64::NAN,
        }
    }

    fn parse_f64(&mut self, key: &str, v: &str) -> f64 {
        match v.parse::<f64>() {
            Ok(x) => x,
            Err(_) => {
                self.errors
                    .push(format!("{}.{key}: expected a number, got `{v}`", self.name));
                f64::NAN
            }
        }
    }

    fn f64_optional(&mut self, key: &str, default: f64) -> f64 {
        match self.take(key) {
            Some(v) => self.parse_f64(key, &v),
            None => default,
        }
    }

    fn usize_required(&mut self, key: &str) -> usize {
        match self.required(key) {
            Some(v) => match v.parse::<usize>() {
                Ok(x) => x,
                Err(_) => {
                    self.errors.push(format!(
                        "{}.{key}: expected a non-negative integer, got `{v}`",
                        self.name
                    ));
                    0
                }
            },
            None => 0,
        }
    }

    fn usize_optional(&mut self, key: &str, default: usize) -> usize {
        match self.take(key) {
            Some(v) => match v.parse::<usize>() {
                Ok(x) => x,
                Err(_) => {
                    self.errors.push(format!(
                        "{}.{key}: expected a non-negative integer, got `{v}`",
                        self.name
                    ));
                    default
                }
            },
            None => default,
        }
    }

    fn finish(self) {
        for key in self.map.keys() {
            self.errors
                .push(format!("{}.{key}: unknown key", self.name));
        }
    }
}

fn parse_args(
    name: &str,
    key: &str,
    args: &[&str],
    want: usize,
    errors: &mut Vec<String>,
) -> Vec<f64> {
    if args.len() != want {
        errors.push(format!(
            "{name}.{key}: expected {want} numeric arguments, got {}",
            args.len()
        ));
        return vec![f64::NAN; want];
    }
    args.iter()
        .map(|a| {
            a.parse::<f64>().unwrap_or_else(|_| {
                errors.push(format!("{name}.{key}: `{a}` is not a number"));
                f64::NAN
            })
        })
        .collect()
}

fn parse_family(section: &str, key: &str, v: &str, errors: &mut Vec<String>) -> LawFamily {
    let mut it = v.split_whitespace();
    let kind = it.next().unwrap_or("");
    let args: Vec<&str> = it.collect();
    match kind {
        "constant" => {
            let a = parse_args(section, key, &args, 1, errors);
            LawFamily::Constant { value: a[0] }
        }
        "affine" => {
            let a = parse_args(section, key, &args, 4, errors);
            LawFamily::ClampedAffine {
                offset: a[0],
                slope: a[1],
                lo: a[2],
                hi: a[3],
            }
        }
        "sigmoid" => {
            let a = parse_args(section, key, &args, 4, errors);
            LawFamily::Sigmoid {
                lo: a[0],
                hi: a[1],
                center: a[2],
                width: a[3],
            }
        }
        other => {
            errors.push(format!(
                "{section}.{key}: unknown family `{other}` (expected constant | affine | sigmoid)"
            ));
            LawFamily::Constant { value: 1.0 }
        }
    }
}

fn parse_exchange(section: &str, v: &str, errors: &mut Vec<String>) -> ExchangeLaw {
    let mut it = v.split_whitespace();
    let kind = it.next().unwrap_or("");
    let args: Vec<&str> = it.collect();
    match kind {
        "zero" => ExchangeLaw::Zero,
        "linear" => {
            let a = parse_args(section, "h", &args, 1, errors);
            ExchangeLaw::Linear { slope: a[0] }
        }
        "clamped" => {
            let a = parse_args(section, "h", &args, 3, errors);
            ExchangeLaw::ClampedLinear {
                slope: a[0],
                lo: a[1],
                hi: a[2],
            }
        }
        "power" => {
            let a = parse_args(section, "h", &args, 2, errors);
            ExchangeLaw::Power {
                coeff: a[0],
                exponent: a[1],
            }
        }
        other => {
            errors.push(format!(
                "{section}.h: unknown exchange law `{other}` (expected zero | linear | clamped | power)"
            ));
            ExchangeLaw::Zero
        }
    }
}

fn parse_source(v: &str, errors: &mut Vec<String>) -> SourceTerm {
    let mut it = v.split_whitespace();
    let kind = it.next().unwrap_or("");
    let args: Vec<&str> = it.collect();
    match kind {
        "zero" | "" => SourceTerm::Zero,
        "constant" => {
            let a = parse_args("circuit", "f", &args, 1, errors);
            SourceTerm::Constant(a[0])
        }
        "sine" => {
            let a = parse_args("circuit", "f", &args, 2, errors);
            SourceTerm::Sine {
                amplitude: a[0],
                omega: a[1],
            }
        }
        "steps" => {
            let mut segs = Vec::new();
            let joined = args.join("");
            for part in joined.split(',') {
                if part.is_empty() {
                    continue;
                }
                let Some((t, val)) = part.split_once(':') else {
                    errors.push(format!("circuit.f: step `{part}` must look like t:value"));
                    continue;
                };
                match (t.parse::<f64>(), val.parse::<f64>()) {
                    (Ok(t), Ok(val)) => segs.push((t, val)),
                    _ => errors.push(format!("circuit.f: step `{part}` has non-numeric fields")),
                }
            }
            if segs.first().map(|s| s.0) != Some(0.0) {
                errors.push("circuit.f: steps must start at t = 0".to_string());
            }
            if segs.windows(2).any(|w| w[1].0 <= w[0].0) {
                errors.push("circuit.f: step times must be strictly increasing".to_string());
            }
            SourceTerm::Steps(segs)
        }
        other => {
            errors.push(format!(
                "circuit.f: unknown source `{other}` (expected zero | constant | sine | steps)"
            ));
            SourceTerm::Zero
        }
    }
}

fn parse_field_preset(v: &str, errors: &mut Vec<String>) -> FieldPreset {
    let mut it = v.split_whitespace();
    let kind = it.next().unwrap_or("");
    let args: Vec<&str> = it.collect();
    match kind {
        "constant" => {
            let a = parse_args("thermal", "theta0", &args, 1, errors);
            FieldPreset::Constant(a[0])
        }
        "layers" => {
            let a = parse_args("thermal", "theta0", &args, 3, errors);
            FieldPreset::Layers {
                lo: a[0],
                hi: a[1],
                z_split: a[2],
            }
        }
        "hotspot" => {
            let a = parse_args("thermal", "theta0", &args, 6, errors);
            FieldPreset::Hotspot {
                base: a[0],
                amplitude: a[1],
                cx: a[2],
                cy: a[3],
                cz: a[4],
                width: a[5],
            }
        }
        other => {
            errors.push(format!(
                "thermal.theta0: unknown preset `{other}` (expected constant | layers | hotspot)"
            ));
            FieldPreset::Constant(1.0)
        }
    }
}

fn parse_trace_preset(v: &str, errors: &mut Vec<String>) -> TracePreset {
    let mut it = v.split_whitespace();
    let kind = it.next().unwrap_or("");
    let args: Vec<&str> = it.collect();
    match kind {
        "constant" => {
            let a = parse_args("thermal", "theta_gamma", &args, 1, errors);
            TracePreset::Constant(a[0])
        }
        "sine" => {
            let a = parse_args("thermal", "theta_gamma", &args, 3, errors);
            TracePreset::TimeSine {
                base: a[0],
                amplitude: a[1],
                omega: a[2],
            }
        }
        other => {
            errors.push(format!(
                "thermal.theta_gamma: unknown preset `{other}` (expected constant | sine)"
            ));
            TracePreset::Constant(1.0)
        }
    }
}

/// Parse and validate a configuration from text.
pub fn parse_config_str(text: &str) -> Result<RunConfig, ConfigError> {
    let mut errors = Vec::new();
    let mut sections = split_sections(text, &mut errors);
    let known = ["grid", "circuit", "laws", "thermal", "scheme", "output"];
    for name in sections.keys() {
        if !known.contains(&name.as_str()) {
            errors.push(format!("[{name}]: unknown section"));
        }
    }
    fn take_section<'e>(
        sections: &mut Sections,
        name: &'static str,
        errors: &'e mut Vec<String>,
        required: bool,
    ) -> SectionReader<'e> {
        let map = match sections.remove(name) {
            Some(m) => m,
            None => {
                if required {
                    errors.push(format!("[{name}]: missing section"));
                }
                BTreeMap::new()
            }
        };
        SectionReader { name, map, errors }
    }
    let has_output = sections.contains_key("output");

    let mut grid_errors = Vec::new();
    let mut r = take_section(&mut sections, "grid", &mut grid_errors, true);
    let grid = GridBlock {
        nx: r.usize_required("nx"),
        ny: r.usize_required("ny"),
        nz: r.usize_required("nz"),
        lx: r.f64_required("lx"),
        ly: r.f64_required("ly"),
        ell: r.f64_required("ell"),
    };
    r.finish();
    errors.append(&mut grid_errors);

    let mut sec_errors = Vec::new();
    let mut r = take_section(&mut sections, "circuit", &mut sec_errors, true);
    let source = match r.take("f") {
        Some(v) => parse_source(&v, r.errors),
        None => SourceTerm::Zero,
    };
    let circuit = CircuitParams {
        lambda1: r.f64_required("lambda1"),
        lambda2: r.f64_required("lambda2"),
        lambda3: r.f64_required("lambda3"),
        v0: r.f64_required("v0"),
        v0_prime: r.f64_required("v0_prime"),
        source,
    };
    r.finish();
    errors.append(&mut sec_errors);

    let mut sec_errors = Vec::new();
    let mut r = take_section(&mut sections, "laws", &mut sec_errors, true);
    let sigma = match r.required("sigma") {
        Some(v) => parse_family("laws", "sigma", &v, r.errors),
        None => LawFamily::Constant { value: 1.0 },
    };
    let k = match r.required("k") {
        Some(v) => parse_family("laws", "k", &v, r.errors),
        None => LawFamily::Constant { value: 1.0 },
    };
    let h = match r.required("h") {
        Some(v) => parse_exchange("laws", &v, r.errors),
        None => ExchangeLaw::Zero,
    };
    r.finish();
    errors.append(&mut sec_errors);

    let mut sec_errors = Vec::new();
    let mut r = take_section(&mut sections, "thermal", &mut sec_errors, true);
    let theta0 = match r.required("theta0") {
        Some(v) => parse_field_preset(&v, r.errors),
        None => FieldPreset::Constant(1.0),
    };
    let theta_gamma = match r.required("theta_gamma") {
        Some(v) => parse_trace_preset(&v, r.errors),
        None => TracePreset::Constant(1.0),
    };
    let theta_star = r.f64_required("theta_star");
    r.finish();
    errors.append(&mut sec_errors);
    let thermal = ThermalBlock {
        theta0,
        theta_gamma,
        theta_star,
    };

    let mut sec_errors = Vec::new();
    let mut r = take_section(&mut sections, "scheme", &mut sec_errors, true);
    let defaults = SchemeConfig::default();
    let scheme = SchemeConfig {
        tau: r.f64_required("tau"),
        dt: r.f64_required("dt"),
        t_final: r.f64_required("t_final"),
        tol_fp: r.f64_optional("tol_fp", defaults.tol_fp),
        tol_lin: r.f64_optional("tol_lin", defaults.tol_lin),
        tol_newton: r.f64_optional("tol_newton", defaults.tol_newton),
        alpha: r.f64_optional("alpha", defaults.alpha),
        max_fp_iter: r.usize_optional("max_fp_iter", defaults.max_fp_iter),
        max_newton: r.usize_optional("max_newton", defaults.max_newton),
        max_halvings: r.usize_optional("max_halvings", defaults.max_halvings),
    };
    r.finish();
    errors.append(&mut sec_errors);

    let mut sec_errors = Vec::new();
    let mut output = OutputBlock::default();
    if has_output {
        let mut r = take_section(&mut sections, "output", &mut sec_errors, false);
        output.dir = r.take("dir");
        if let Some(v) = r.take("snapshots") {
            for part in v.split(',') {
                let part = part.trim();
                if part.is_empty() {
                    continue;
                }
                match part.parse::<f64>() {
                    Ok(t) => output.snapshots.push(t),
                    Err(_) => r
                        .errors
                        .push(format!("output.snapshots: `{part}` is not a number")),
                }
            }
        }
        if let Some(v) = r.take("checks") {
            match v.as_str() {
                "on" => output.checks = true,
                "off" => output.checks = false,
                other => r
                    .errors
                    .push(format!("output.checks: expected on|off, got `{other}`")),
            }
        }
        r.finish();
    }
    errors.append(&mut sec_errors);

    // Module preconditions: grid and law construction always, the
    // cross-module scheme constraints only once everything else parsed.
    let parse_clean = errors.is_empty();
    if thermal.theta_star.is_finite() && !(thermal.theta_star > 0.0) {
        errors.push(format!(
            "thermal.theta_star must be positive, got {}",
            thermal.theta_star
        ));
    }
    let grid_built = Grid::new(grid.nx, grid.ny, grid.nz, grid.lx, grid.ly, grid.ell);
    let laws_built = MaterialLaws::new(sigma.clone(), k.clone(), h.clone());
    if let Err(e) = &grid_built {
        errors.push(format!("grid: {e}"));
    }
    if let Err(e) = &laws_built {
        errors.push(format!("laws: {e}"));
    }
    if parse_clean {
        if let (Ok(g), Ok(l)) = (&grid_built, &laws_built) {
            errors.extend(scheme.violations(&circuit, l, g));
        } else {
            errors.extend(scheme.violations_basic(&circuit));
        }
    }

    if errors.is_empty() {
        Ok(RunConfig {
            grid,
            circuit,
            sigma,
            k,
            h,
            thermal,
            scheme,
            output,
        })
    } else {
        Err(ConfigError { violations: errors })
    }
}

/// Parse a configuration file.
pub fn parse_config(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError {
        violations: vec![format!("{}: {e}", path.display())],
    })?;
    parse_config_str(&text)
}
