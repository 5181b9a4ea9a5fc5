//! Plain-text experiment configuration.
//!
//! The format is line oriented:
//!
//! ```text
//! # comment
//! [section]
//! key = value   # trailing comment
//! ```
//!
//! Unknown sections, unknown keys and repeated keys are hard errors that name
//! the offending line. Every key has a default, and [`ExperimentSpec::render`]
//! echoes the full effective configuration in a form that parses back to the
//! same spec.

use std::fmt::Write as _;
use std::path::Path;

use crate::analysis::Refinement;
use crate::error::{Error, Result};
use crate::forcing::FieldProfile;
use crate::snapshot::SnapshotFormat;
use crate::steady::SteadyMethod;

/// Which experiment a spec describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ExperimentKind {
    #[default]
    KernelCheck,
    RunTransient,
    SolveSteady,
    DecayStudy,
    ConvergenceStudy,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 5] = [
        ExperimentKind::KernelCheck,
        ExperimentKind::RunTransient,
        ExperimentKind::SolveSteady,
        ExperimentKind::DecayStudy,
        ExperimentKind::ConvergenceStudy,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::KernelCheck => "kernel-check",
            ExperimentKind::RunTransient => "run-transient",
            ExperimentKind::SolveSteady => "solve-steady",
            ExperimentKind::DecayStudy => "decay-study",
            ExperimentKind::ConvergenceStudy => "convergence-study",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum HistoryKind {
    #[default]
    Direct,
    Soe,
}

impl HistoryKind {
    pub fn name(self) -> &'static str {
        match self {
            HistoryKind::Direct => "direct",
            HistoryKind::Soe => "soe",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "direct" => Some(HistoryKind::Direct),
            "soe" => Some(HistoryKind::Soe),
            _ => None,
        }
    }
}

/// Initial velocity of a transient run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InitialKind {
    #[default]
    Zero,
    /// Seeded smooth random field, Leray projected.
    RandomSmooth,
    /// The manufactured solution at t = 0.
    Manufactured,
    /// The discrete steady state of the configured f̄.
    Steady,
}

impl InitialKind {
    pub fn name(self) -> &'static str {
        match self {
            InitialKind::Zero => "zero",
            InitialKind::RandomSmooth => "random_smooth",
            InitialKind::Manufactured => "manufactured",
            InitialKind::Steady => "steady",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "zero" => Some(InitialKind::Zero),
            "random_smooth" => Some(InitialKind::RandomSmooth),
            "manufactured" => Some(InitialKind::Manufactured),
            "steady" => Some(InitialKind::Steady),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ForcingKind {
    Zero,
    Steady,
    #[default]
    Decaying,
    Manufactured,
}

impl ForcingKind {
    pub fn name(self) -> &'static str {
        match self {
            ForcingKind::Zero => "zero",
            ForcingKind::Steady => "steady",
            ForcingKind::Decaying => "decaying",
            ForcingKind::Manufactured => "manufactured",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "zero" => Some(ForcingKind::Zero),
            "steady" => Some(ForcingKind::Steady),
            "decaying" => Some(ForcingKind::Decaying),
            "manufactured" => Some(ForcingKind::Manufactured),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KernelSection {
    pub beta: f64,
    pub delta: f64,
    pub rho: f64,
    /// Step of the weight table checked by `kernel-check`.
    pub dt: f64,
    /// Number of weights checked by `kernel-check`.
    pub n: usize,
    /// Random trials of the positivity certificate.
    pub trials: usize,
    /// Target relative error of the sum-of-exponentials fit.
    pub soe_tol: f64,
}

impl Default for KernelSection {
    fn default() -> Self {
        Self {
            beta: 0.5,
            delta: 1.0,
            rho: 0.5,
            dt: 0.01,
            n: 200,
            trials: 1000,
            soe_tol: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSection {
    pub lx: f64,
    pub ly: f64,
    pub nx: usize,
    pub ny: usize,
}

impl Default for GridSection {
    fn default() -> Self {
        Self {
            lx: 1.0,
            ly: 1.0,
            nx: 32,
            ny: 32,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FluidSection {
    pub mu: f64,
    pub dt: f64,
    pub t_end: f64,
    pub history: HistoryKind,
    pub soe_tol: f64,
    pub advection: bool,
    pub initial: InitialKind,
    pub initial_amplitude: f64,
    /// Diagnostics are recorded every `cadence` steps.
    pub cadence: usize,
}

impl Default for FluidSection {
    fn default() -> Self {
        Self {
            mu: 1.0,
            dt: 0.01,
            t_end: 1.0,
            history: HistoryKind::Direct,
            soe_tol: 1e-10,
            advection: true,
            initial: InitialKind::Zero,
            initial_amplitude: 1.0,
            cadence: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForcingSection {
    pub kind: ForcingKind,
    pub fbar_profile: FieldProfile,
    pub fbar_amplitude: f64,
    pub perturbation_profile: FieldProfile,
    pub perturbation_amplitude: f64,
    /// Decay rate α₀ of the perturbation.
    pub rate: f64,
    /// Time decay rate of the manufactured solution.
    pub manufactured_alpha: f64,
}

impl Default for ForcingSection {
    fn default() -> Self {
        Self {
            kind: ForcingKind::Decaying,
            fbar_profile: FieldProfile::Mixed,
            fbar_amplitude: 1.0,
            perturbation_profile: FieldProfile::Shear,
            perturbation_amplitude: 1.0,
            rate: 0.6,
            manufactured_alpha: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SteadySection {
    pub method: SteadyMethod,
    pub tol: f64,
    pub max_iters: usize,
    pub mu0_trials: usize,
    pub sup_samples: usize,
}

impl Default for SteadySection {
    fn default() -> Self {
        Self {
            method: SteadyMethod::Newton,
            tol: 1e-10,
            max_iters: 200,
            mu0_trials: 4,
            sup_samples: 64,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisSection {
    /// Safety margin m in α_expect = (1 − m) min(α₀, α_max).
    pub margin: f64,
    pub refine: Refinement,
    pub levels: usize,
    pub base_n: usize,
    pub base_dt: f64,
    /// Expected observed order; 0 selects 2 for space and 1 for time. The
    /// finest observed order must lie within `order_tolerance` of it.
    pub expected_order: f64,
    pub order_tolerance: f64,
}

impl Default for AnalysisSection {
    fn default() -> Self {
        Self {
            margin: 0.1,
            refine: Refinement::SteadySpace,
            levels: 3,
            base_n: 16,
            base_dt: 0.005,
            expected_order: 0.0,
            order_tolerance: 0.25,
        }
    }
}

impl AnalysisSection {
    pub fn effective_expected_order(&self) -> f64 {
        if self.expected_order > 0.0 {
            self.expected_order
        } else {
            match self.refine {
                Refinement::TransientTime => 1.0,
                _ => 2.0,
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputSection {
    pub snapshots: bool,
    pub snapshot_format: SnapshotFormat,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            snapshots: true,
            snapshot_format: SnapshotFormat::Csv,
        }
    }
}

/// Everything needed to reproduce one experiment.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ExperimentSpec {
    pub kind: ExperimentKind,
    pub seed: u64,
    pub kernel: KernelSection,
    pub grid: GridSection,
    pub fluid: FluidSection,
    pub forcing: ForcingSection,
    pub steady: SteadySection,
    pub analysis: AnalysisSection,
    pub output: OutputSection,
}

const SECTIONS: [&str; 9] = [
    "experiment",
    "kernel",
    "grid",
    "fluid",
    "forcing",
    "steady",
    "analysis",
    "output",
    "",
];

fn parse_err<T>(line: usize, msg: impl Into<String>) -> Result<T> {
    Err(Error::Parse {
        line,
        msg: msg.into(),
    })
}

fn invalid<T>(key: &str, msg: impl Into<String>) -> Result<T> {
    Err(Error::Validation {
        key: key.to_string(),
        msg: msg.into(),
    })
}

/// A raw value with enough context to report a typed parse failure.
struct Raw<'a> {
    key: &'a str,
    text: &'a str,
    line: usize,
}

impl Raw<'_> {
    fn float(&self) -> Result<f64> {
        match self.text.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            _ => parse_err(
                self.line,
                format!(
                    "`{}` expects a finite number, got `{}`",
                    self.key, self.text
                ),
            ),
        }
    }

    fn count(&self) -> Result<usize> {
        self.text.parse::<usize>().or_else(|_| {
            parse_err(
                self.line,
                format!(
                    "`{}` expects a nonnegative integer, got `{}`",
                    self.key, self.text
                ),
            )
        })
    }

    fn uint(&self) -> Result<u64> {
        self.text.parse::<u64>().or_else(|_| {
            parse_err(
                self.line,
                format!(
                    "`{}` expects a nonnegative integer, got `{}`",
                    self.key, self.text
                ),
            )
        })
    }

    fn flag(&self) -> Result<bool> {
        match self.text {
            "true" => Ok(true),
            "false" => Ok(false),
            _ => parse_err(
                self.line,
                format!("`{}` expects true or false, got `{}`", self.key, self.text),
            ),
        }
    }

    fn choice<T>(&self, parse: impl Fn(&str) -> Option<T>, allowed: &str) -> Result<T> {
        parse(self.text).map_or_else(
            || {
                parse_err(
                    self.line,
                    format!(
                        "`{}` must be one of {allowed}, got `{}`",
                        self.key, self.text
                    ),
                )
            },
            Ok,
        )
    }
}

impl ExperimentSpec {
    /// Defaults for a given experiment kind.
    pub fn for_kind(kind: ExperimentKind) -> Self {
        Self {
            kind,
            ..Self::default()
        }
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Parse and validate.
    pub fn parse(text: &str) -> Result<Self> {
        let spec = Self::parse_unvalidated(text)?;
        spec.validate()?;
        Ok(spec)
    }

    /// Parse without the semantic checks of [`ExperimentSpec::validate`].
    pub fn parse_unvalidated(text: &str) -> Result<Self> {
        let mut spec = Self::default();
        let mut section = String::new();
        let mut seen: Vec<(String, usize)> = Vec::new();
        let mut seen_sections: Vec<(String, usize)> = Vec::new();
        for (idx, raw_line) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw_line.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            if let Some(rest) = content.strip_prefix('[') {
                let Some(name) = rest.strip_suffix(']') else {
                    return parse_err(line, format!("malformed section header `{content}`"));
                };
                let name = name.trim();
                if name.is_empty() || !SECTIONS.contains(&name) {
                    return parse_err(line, format!("unknown section [{name}]"));
                }
                if let Some((_, first)) = seen_sections.iter().find(|(s, _)| s == name) {
                    return parse_err(
                        line,
                        format!("section [{name}] repeated (first opened at line {first})"),
                    );
                }
                seen_sections.push((name.to_string(), line));
                section = name.to_string();
                continue;
            }
            let Some((key, value)) = content.split_once('=') else {
                return parse_err(line, format!("expected `key = value`, got `{content}`"));
            };
            let (key, value) = (key.trim(), value.trim());
            if key.is_empty() {
                return parse_err(line, "missing key before `=`");
            }
            if section.is_empty() {
                return parse_err(line, format!("key `{key}` appears before any [section]"));
            }
            let full = format!("{section}.{key}");
            if let Some((_, first)) = seen.iter().find(|(k, _)| *k == full) {
                return parse_err(
                    line,
                    format!("duplicate key `{full}` (first set at line {first})"),
                );
            }
            seen.push((full.clone(), line));
            let raw = Raw {
                key: &full,
                text: value,
                line,
            };
            if !spec.apply(&section, key, &raw)? {
                return parse_err(line, format!("unknown key `{key}` in [{section}]"));
            }
        }
        Ok(spec)
    }

    /// Set one key; returns false if the key is not recognised.
    fn apply(&mut self, section: &str, key: &str, raw: &Raw) -> Result<bool> {
        match (section, key) {
            ("experiment", "kind") => {
                self.kind = raw.choice(
                    ExperimentKind::parse,
                    "kernel-check, run-transient, solve-steady, decay-study, convergence-study",
                )?
            }
            ("experiment", "seed") => self.seed = raw.uint()?,

            ("kernel", "beta") => self.kernel.beta = raw.float()?,
            ("kernel", "delta") => self.kernel.delta = raw.float()?,
            ("kernel", "rho") => self.kernel.rho = raw.float()?,
            ("kernel", "dt") => self.kernel.dt = raw.float()?,
            ("kernel", "n") => self.kernel.n = raw.count()?,
            ("kernel", "trials") => self.kernel.trials = raw.count()?,
            ("kernel", "soe_tol") => self.kernel.soe_tol = raw.float()?,

            ("grid", "lx") => self.grid.lx = raw.float()?,
            ("grid", "ly") => self.grid.ly = raw.float()?,
            ("grid", "nx") => self.grid.nx = raw.count()?,
            ("grid", "ny") => self.grid.ny = raw.count()?,

            ("fluid", "mu") => self.fluid.mu = raw.float()?,
            ("fluid", "dt") => self.fluid.dt = raw.float()?,
            ("fluid", "t_end") => self.fluid.t_end = raw.float()?,
            ("fluid", "history") => {
                self.fluid.history = raw.choice(HistoryKind::parse, "direct, soe")?
            }
            ("fluid", "soe_tol") => self.fluid.soe_tol = raw.float()?,
            ("fluid", "advection") => self.fluid.advection = raw.flag()?,
            ("fluid", "initial") => {
                self.fluid.initial = raw.choice(
                    InitialKind::parse,
                    "zero, random_smooth, manufactured, steady",
                )?
            }
            ("fluid", "initial_amplitude") => self.fluid.initial_amplitude = raw.float()?,
            ("fluid", "cadence") => self.fluid.cadence = raw.count()?,

            ("forcing", "kind") => {
                self.forcing.kind =
                    raw.choice(ForcingKind::parse, "zero, steady, decaying, manufactured")?
            }
            ("forcing", "fbar_profile") => {
                self.forcing.fbar_profile =
                    raw.choice(FieldProfile::parse, "mixed, shear, random_smooth")?
            }
            ("forcing", "fbar_amplitude") => self.forcing.fbar_amplitude = raw.float()?,
            ("forcing", "perturbation_profile") => {
                self.forcing.perturbation_profile =
                    raw.choice(FieldProfile::parse, "mixed, shear, random_smooth")?
            }
            ("forcing", "perturbation_amplitude") => {
                self.forcing.perturbation_amplitude = raw.float()?
            }
            ("forcing", "rate") => self.forcing.rate = raw.float()?,
            ("forcing", "manufactured_alpha") => self.forcing.manufactured_alpha = raw.float()?,

            ("steady", "method") => {
                self.steady.method = raw.choice(SteadyMethod::parse, "stokes_iteration, newton")?
            }
            ("steady", "tol") => self.steady.tol = raw.float()?,
            ("steady", "max_iters") => self.steady.max_iters = raw.count()?,
            ("steady", "mu0_trials") => self.steady.mu0_trials = raw.count()?,
            ("steady", "sup_samples") => self.steady.sup_samples = raw.count()?,

            ("analysis", "margin") => self.analysis.margin = raw.float()?,
            ("analysis", "refine") => {
                self.analysis.refine = raw.choice(
                    Refinement::parse,
                    "steady_space, transient_space, transient_time",
                )?
            }
            ("analysis", "levels") => self.analysis.levels = raw.count()?,
            ("analysis", "base_n") => self.analysis.base_n = raw.count()?,
            ("analysis", "base_dt") => self.analysis.base_dt = raw.float()?,
            ("analysis", "expected_order") => self.analysis.expected_order = raw.float()?,
            ("analysis", "order_tolerance") => self.analysis.order_tolerance = raw.float()?,

            ("output", "snapshots") => self.output.snapshots = raw.flag()?,
            ("output", "snapshot_format") => {
                self.output.snapshot_format = raw.choice(SnapshotFormat::parse, "csv, binary")?
            }
            _ => return Ok(false),
        }
        Ok(true)
    }

    /// Semantic checks. Errors name the offending key.
    pub fn validate(&self) -> Result<()> {
        let k = &self.kernel;
        if !(0.0..1.0).contains(&k.beta) {
            return invalid(
                "kernel.beta",
                format!("beta must lie in [0,1), got {}", k.beta),
            );
        }
        if !(k.delta > 0.0) {
            return invalid(
                "kernel.delta",
                format!("delta must be positive, got {}", k.delta),
            );
        }
        if !(k.rho >= 0.0) {
            return invalid(
                "kernel.rho",
                format!("rho must be nonnegative, got {}", k.rho),
            );
        }
        if !(k.dt > 0.0) {
            return invalid("kernel.dt", format!("dt must be positive, got {}", k.dt));
        }
        if k.n == 0 {
            return invalid("kernel.n", "at least one weight is required");
        }
        if k.trials == 0 {
            return invalid("kernel.trials", "at least one trial is required");
        }
        check_soe_tol("kernel.soe_tol", k.soe_tol)?;

        let g = &self.grid;
        if !(g.lx > 0.0) {
            return invalid("grid.lx", format!("lx must be positive, got {}", g.lx));
        }
        if !(g.ly > 0.0) {
            return invalid("grid.ly", format!("ly must be positive, got {}", g.ly));
        }
        if g.nx < 4 {
            return invalid("grid.nx", format!("nx must be at least 4, got {}", g.nx));
        }
        if g.ny < 4 {
            return invalid("grid.ny", format!("ny must be at least 4, got {}", g.ny));
        }

        let f = &self.fluid;
        if !(f.mu > 0.0) {
            return invalid("fluid.mu", format!("mu must be positive, got {}", f.mu));
        }
        if !(f.dt > 0.0) {
            return invalid("fluid.dt", format!("dt must be positive, got {}", f.dt));
        }
        if !(f.t_end >= f.dt) {
            return invalid(
                "fluid.t_end",
                format!(
                    "t_end must be at least one step ({}), got {}",
                    f.dt, f.t_end
                ),
            );
        }
        check_soe_tol("fluid.soe_tol", f.soe_tol)?;
        if f.cadence == 0 {
            return invalid("fluid.cadence", "cadence must be at least 1");
        }

        let unit_square = g.lx == 1.0 && g.ly == 1.0;
        let fo = &self.forcing;
        if fo.kind == ForcingKind::Decaying && !(fo.rate > 0.0) {
            return invalid(
                "forcing.rate",
                format!("rate must be positive, got {}", fo.rate),
            );
        }
        let manufactured = fo.kind == ForcingKind::Manufactured
            || f.initial == InitialKind::Manufactured
            || self.kind == ExperimentKind::ConvergenceStudy;
        if manufactured {
            if !(fo.manufactured_alpha >= 0.0) {
                return invalid(
                    "forcing.manufactured_alpha",
                    format!(
                        "manufactured_alpha must be nonnegative, got {}",
                        fo.manufactured_alpha
                    ),
                );
            }
            if k.rho != 0.0 && fo.manufactured_alpha >= k.delta {
                return invalid(
                    "forcing.manufactured_alpha",
                    format!(
                        "manufactured_alpha must be below delta = {} when rho > 0, got {}",
                        k.delta, fo.manufactured_alpha
                    ),
                );
            }
            if !unit_square && self.kind != ExperimentKind::ConvergenceStudy {
                return invalid(
                    "grid.lx",
                    "the manufactured solution requires the unit square",
                );
            }
        }

        let s = &self.steady;
        if !(s.tol > 0.0 && s.tol < 1.0) {
            return invalid(
                "steady.tol",
                format!("tol must lie in (0,1), got {}", s.tol),
            );
        }
        if s.max_iters == 0 {
            return invalid("steady.max_iters", "max_iters must be at least 1");
        }
        if s.mu0_trials == 0 {
            return invalid("steady.mu0_trials", "mu0_trials must be at least 1");
        }
        if s.sup_samples == 0 {
            return invalid("steady.sup_samples", "sup_samples must be at least 1");
        }

        let a = &self.analysis;
        if !(0.0..1.0).contains(&a.margin) {
            return invalid(
                "analysis.margin",
                format!("margin must lie in [0,1), got {}", a.margin),
            );
        }
        if a.levels < 3 {
            return invalid(
                "analysis.levels",
                format!(
                    "at least 3 levels are needed for two observed orders, got {}",
                    a.levels
                ),
            );
        }
        if a.base_n < 4 {
            return invalid(
                "analysis.base_n",
                format!("base_n must be at least 4, got {}", a.base_n),
            );
        }
        if !(a.base_dt > 0.0) {
            return invalid(
                "analysis.base_dt",
                format!("base_dt must be positive, got {}", a.base_dt),
            );
        }
        if !(a.expected_order >= 0.0) {
            return invalid(
                "analysis.expected_order",
                format!(
                    "expected_order must be nonnegative, got {}",
                    a.expected_order
                ),
            );
        }
        if !(a.order_tolerance > 0.0) {
            return invalid(
                "analysis.order_tolerance",
                format!(
                    "order_tolerance must be positive, got {}",
                    a.order_tolerance
                ),
            );
        }

        if self.kind == ExperimentKind::DecayStudy
            && !matches!(fo.kind, ForcingKind::Decaying | ForcingKind::Steady)
        {
            return invalid(
                "forcing.kind",
                "decay-study needs forcing of kind `decaying` or `steady`",
            );
        }
        Ok(())
    }

    /// Full effective configuration, defaults included.
    pub fn render(&self) -> String {
        let mut s = String::new();
        let mut put = |section: &str, entries: &[(&str, String)]| {
            let _ = writeln!(s, "[{section}]");
            for (k, v) in entries {
                let _ = writeln!(s, "{k} = {v}");
            }
            s.push('\n');
        };
        put(
            "experiment",
            &[
                ("kind", self.kind.name().into()),
                ("seed", self.seed.to_string()),
            ],
        );
        let k = &self.kernel;
        put(
            "kernel",
            &[
                ("beta", num(k.beta)),
                ("delta", num(k.delta)),
                ("rho", num(k.rho)),
                ("dt", num(k.dt)),
                ("n", k.n.to_string()),
                ("trials", k.trials.to_string()),
                ("soe_tol", num(k.soe_tol)),
            ],
        );
        let g = &self.grid;
        put(
            "grid",
            &[
                ("lx", num(g.lx)),
                ("ly", num(g.ly)),
                ("nx", g.nx.to_string()),
                ("ny", g.ny.to_string()),
            ],
        );
        let f = &self.fluid;
        put(
            "fluid",
            &[
                ("mu", num(f.mu)),
                ("dt", num(f.dt)),
                ("t_end", num(f.t_end)),
                ("history", f.history.name().into()),
                ("soe_tol", num(f.soe_tol)),
                ("advection", f.advection.to_string()),
                ("initial", f.initial.name().into()),
                ("initial_amplitude", num(f.initial_amplitude)),
                ("cadence", f.cadence.to_string()),
            ],
        );
        let fo = &self.forcing;
        put(
            "forcing",
            &[
                ("kind", fo.kind.name().into()),
                ("fbar_profile", fo.fbar_profile.name().into()),
                ("fbar_amplitude", num(fo.fbar_amplitude)),
                (
                    "perturbation_profile",
                    fo.perturbation_profile.name().into(),
                ),
                ("perturbation_amplitude", num(fo.perturbation_amplitude)),
                ("rate", num(fo.rate)),
                ("manufactured_alpha", num(fo.manufactured_alpha)),
            ],
        );
        let st = &self.steady;
        put(
            "steady",
            &[
                ("method", st.method.name().into()),
                ("tol", num(st.tol)),
                ("max_iters", st.max_iters.to_string()),
                ("mu0_trials", st.mu0_trials.to_string()),
                ("sup_samples", st.sup_samples.to_string()),
            ],
        );
        let a = &self.analysis;
        put(
            "analysis",
            &[
                ("margin", num(a.margin)),
                ("refine", a.refine.name().into()),
                ("levels", a.levels.to_string()),
                ("base_n", a.base_n.to_string()),
                ("base_dt", num(a.base_dt)),
                ("expected_order", num(a.expected_order)),
                ("order_tolerance", num(a.order_tolerance)),
            ],
        );
        let o = &self.output;
        put(
            "output",
            &[
                ("snapshots", o.snapshots.to_string()),
                ("snapshot_format", o.snapshot_format.name().into()),
            ],
        );
        s.truncate(s.trim_end().len());
        s.push('\n');
        s
    }
}

fn check_soe_tol(key: &str, tol: f64) -> Result<()> {
    if !(tol > 1e-14 && tol < 1e-2) {
        return invalid(key, format!("soe_tol must lie in (1e-14, 1e-2), got {tol}"));
    }
    Ok(())
}

/// Shortest representation that parses back to the same f64.
fn num(x: f64) -> String {
    format!("{x:?}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate_and_round_trip() {
        for kind in ExperimentKind::ALL {
            let spec = ExperimentSpec::for_kind(kind);
            spec.validate().unwrap();
            let back = ExperimentSpec::parse(&spec.render()).unwrap();
            assert_eq!(back, spec);
        }
    }

    #[test]
    fn empty_text_is_all_defaults() {
        assert_eq!(
            ExperimentSpec::parse("").unwrap(),
            ExperimentSpec::default()
        );
    }

    #[test]
    fn comments_and_whitespace_are_ignored() {
        let text = "# header\n\n[kernel]\n  beta = 0.25   # trailing\n";
        let spec = ExperimentSpec::parse(text).unwrap();
        assert_eq!(spec.kernel.beta, 0.25);
    }

    #[test]
    fn unknown_key_reports_line() {
        let err = ExperimentSpec::parse("[kernel]\nbeta = 0.5\ngamma = 1\n").unwrap_err();
        assert_eq!(
            err,
            Error::Parse {
                line: 3,
                msg: "unknown key `gamma` in [kernel]".into()
            }
        );
    }

    #[test]
    fn duplicate_key_reports_both_lines() {
        let err = ExperimentSpec::parse("[grid]\nnx = 8\nny = 8\nnx = 16\n").unwrap_err();
        match err {
            Error::Parse { line, msg } => {
                assert_eq!(line, 4);
                assert!(msg.contains("line 2"), "{msg}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_section_and_orphan_key_are_rejected() {
        assert!(matches!(
            ExperimentSpec::parse("[solver]\n"),
            Err(Error::Parse { line: 1, .. })
        ));
        assert!(matches!(
            ExperimentSpec::parse("beta = 0.5\n"),
            Err(Error::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn validation_names_the_key() {
        let err = ExperimentSpec::parse("[kernel]\nbeta = 1.0\n").unwrap_err();
        match err {
            Error::Validation { key, msg } => {
                assert_eq!(key, "kernel.beta");
                assert!(msg.contains("beta must lie in [0,1)"), "{msg}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn typed_values_are_checked() {
        assert!(matches!(
            ExperimentSpec::parse("[grid]\nnx = -3\n"),
            Err(Error::Parse { line: 2, .. })
        ));
        assert!(matches!(
            ExperimentSpec::parse("[fluid]\nadvection = yes\n"),
            Err(Error::Parse { line: 2, .. })
        ));
        assert!(matches!(
            ExperimentSpec::parse("[fluid]\nmu = nan\n"),
            Err(Error::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn manufactured_rate_must_stay_below_delta() {
        let text = "[forcing]\nkind = manufactured\nmanufactured_alpha = 1.5\n";
        assert!(matches!(
            ExperimentSpec::parse(text),
            Err(Error::Validation { ref key, .. }) if key == "forcing.manufactured_alpha"
        ));
    }
}
