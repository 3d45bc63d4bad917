//! RIS size sweeps over both engines with optional termination optimization,
//! cross-engine validation gates and CSV output.
//!
//! Every output except `runtime_ms` (left empty unless timings are requested)
//! is a pure function of the `ExperimentSpec`, so reruns are byte-identical.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Deserialize;

use crate::analytical::{assemble_zsys_analytical, QuadratureSpec};
use crate::channel::{ChannelFactors, ChannelOptions, ZtgForm};
use crate::em::{build_reference_scenario, BlockImpedanceMatrix, Engine, Role, Scenario, ScenarioFile};
use crate::error::{Error, Result};
use crate::linalg::{frobenius, max_abs, CMat};
use crate::optimizer::{optimize_ris, Constraint, CoordinateOrder, OptimizerConfig};
use crate::peec::{extract_zsys_peec, scenario_refinement_check, segment_count, PeecConfig, RefinementReport};

/// Largest accepted `|gain_analytical - gain_peec|`.
pub const GAIN_GATE_DB: f64 = 3.0;
/// Largest accepted feed-impedance change between the coarse and fine mesh.
pub const REFINEMENT_GATE: f64 = 0.02;
pub const DEFAULT_SIZES: [usize; 3] = [4, 16, 64];
pub const X_AXIS_NOTE: &str = "x axis: number of RIS elements (channel gain vs RIS size)";

#[derive(Debug, Clone)]
pub enum ScenarioSource {
    /// The built-in deployment, rebuilt for every requested RIS size.
    Reference,
    File(PathBuf),
    Inline(Box<Scenario>),
}

/// Where the optimized PEEC row takes its terminations from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OptimizedTerminations {
    /// Each engine runs the optimizer on its own impedance matrix.
    #[default]
    PerEngine,
    /// Both engines use the terminations optimized on the analytical matrix.
    Analytical,
}

impl OptimizedTerminations {
    pub fn name(self) -> &'static str {
        match self {
            OptimizedTerminations::PerEngine => "per_engine",
            OptimizedTerminations::Analytical => "analytical",
        }
    }
}

impl FromStr for OptimizedTerminations {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "per_engine" => Ok(OptimizedTerminations::PerEngine),
            "analytical" => Ok(OptimizedTerminations::Analytical),
            other => Err(Error::Configuration(format!(
                "unknown optimized_terminations '{other}' (expected per_engine or analytical)"
            ))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentSpec {
    pub scenario: ScenarioSource,
    pub engines: Vec<Engine>,
    /// Add optimized rows next to the unoptimized ones.
    pub optimize: bool,
    /// Ignored for file and inline scenarios, whose RIS is fixed.
    pub ris_sizes: Vec<usize>,
    pub out_dir: Option<PathBuf>,
    pub quadrature: QuadratureSpec,
    pub peec: PeecConfig,
    pub optimizer: OptimizerConfig,
    /// Seed of the random coordinate order (unused for sequential sweeps).
    pub seed: u64,
    pub channel: ChannelOptions,
    pub optimized_terminations: OptimizedTerminations,
    /// Fill the `runtime_ms` column. Off by default to keep outputs reproducible.
    pub timings: bool,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self {
            scenario: ScenarioSource::Reference,
            engines: vec![Engine::Analytical, Engine::Peec],
            optimize: false,
            ris_sizes: DEFAULT_SIZES.to_vec(),
            out_dir: None,
            quadrature: QuadratureSpec::default(),
            peec: PeecConfig::default(),
            optimizer: OptimizerConfig::default(),
            seed: 0,
            channel: ChannelOptions::default(),
            optimized_terminations: OptimizedTerminations::default(),
            timings: false,
        }
    }
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        if self.engines.is_empty() {
            return Err(Error::Configuration("select at least one engine".into()));
        }
        if matches!(self.scenario, ScenarioSource::Reference) {
            if self.ris_sizes.is_empty() {
                return Err(Error::Configuration("the list of RIS sizes is empty".into()));
            }
            if self.ris_sizes.contains(&0) {
                return Err(Error::Configuration("RIS sizes must be at least 1".into()));
            }
        }
        self.quadrature.validate()?;
        segment_count(1.0, 2.0, self.peec.segments_per_halfwave)?;
        self.optimizer.validate()
    }

    /// Optimizer settings with the experiment seed applied.
    pub fn optimizer_config(&self) -> OptimizerConfig {
        let mut c = self.optimizer;
        if let CoordinateOrder::RandomPermutation { .. } = c.coordinate_order {
            c.coordinate_order = CoordinateOrder::RandomPermutation { seed: self.seed };
        }
        c
    }

    fn sorted_engines(&self) -> Vec<Engine> {
        let mut e = self.engines.clone();
        e.sort();
        e.dedup();
        e
    }

    /// The scenarios to run, one per RIS size.
    pub fn scenarios(&self) -> Result<Vec<Scenario>> {
        match &self.scenario {
            ScenarioSource::Reference => self
                .ris_sizes
                .iter()
                .map(|&n| build_reference_scenario(n, self.optimizer.initial_termination))
                .collect(),
            ScenarioSource::File(path) => Ok(vec![Scenario::from_toml_file(path)?]),
            ScenarioSource::Inline(s) => Ok(vec![(**s).clone()]),
        }
    }

    pub fn from_toml_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text, &path.display().to_string(), path.parent())
    }

    /// Parses an experiment config. Relative `scenario_file` paths are taken
    /// from `base_dir`.
    pub fn from_toml_str(text: &str, source_name: &str, base_dir: Option<&Path>) -> Result<Self> {
        let file: ConfigFile =
            toml::from_str(text).map_err(|e| Error::Parse { source_name: source_name.into(), message: e.to_string() })?;
        let diag = Diagnostics { text, source_name };
        let mut spec = ExperimentSpec::default();

        if let Some(sizes) = file.sizes {
            if sizes.is_empty() || sizes.contains(&0) {
                return Err(diag.at("sizes", "expected a nonempty list of positive RIS sizes"));
            }
            spec.ris_sizes = sizes;
        }
        if let Some(engines) = file.engines {
            let parsed: Result<Vec<Engine>> = engines.iter().map(|e| e.parse()).collect();
            spec.engines = parsed.map_err(|e| diag.at("engines", &e.to_string()))?;
            if spec.engines.is_empty() {
                return Err(diag.at("engines", "select at least one engine"));
            }
        }
        if let Some(v) = file.optimize {
            spec.optimize = v;
        }
        if let Some(dir) = file.out_dir {
            spec.out_dir = Some(resolve(base_dir, dir));
        }
        if let Some(order) = file.quad_order {
            spec.quadrature.order = order;
            spec.quadrature.validate().map_err(|e| diag.at("quad_order", &e.to_string()))?;
        }
        if let Some(panels) = file.quad_panels {
            spec.quadrature.panels = panels;
            spec.quadrature.validate().map_err(|e| diag.at("quad_panels", &e.to_string()))?;
        }
        if let Some(spw) = file.segments_per_halfwave {
            segment_count(1.0, 2.0, spw).map_err(|e| diag.at("segments_per_halfwave", &e.to_string()))?;
            spec.peec.segments_per_halfwave = spw;
        }
        if let Some(v) = file.refinement_check {
            spec.peec.refinement_check = v;
        }
        if let Some(c) = file.constraint {
            spec.optimizer.constraint = c.parse().map_err(|e: Error| diag.at("constraint", &e.to_string()))?;
        }
        if let Some(v) = file.max_sweeps {
            spec.optimizer.max_sweeps = v;
        }
        if let Some(t) = file.tolerance {
            if !(t > 0.0 && t.is_finite()) {
                return Err(diag.at("tolerance", &format!("must be positive, got {t}")));
            }
            spec.optimizer.tolerance = t;
        }
        if let Some(z) = file.initial_termination_ohm {
            let z = z.value();
            if !(z.re.is_finite() && z.im.is_finite()) {
                return Err(diag.at("initial_termination_ohm", "must be finite"));
            }
            spec.optimizer.initial_termination = z;
        }
        if let Some(seed) = file.seed {
            spec.seed = seed;
        }
        if let Some(order) = file.coordinate_order {
            spec.optimizer.coordinate_order = match order.to_ascii_lowercase().replace('-', "_").as_str() {
                "sequential" => CoordinateOrder::Sequential,
                "random" | "random_permutation" => CoordinateOrder::RandomPermutation { seed: spec.seed },
                other => {
                    return Err(diag.at(
                        "coordinate_order",
                        &format!("unknown order '{other}' (expected sequential or random_permutation)"),
                    ))
                }
            };
        }
        if let Some(form) = file.ztg_form {
            spec.channel.ztg_form = form.parse().map_err(|e: Error| diag.at("ztg_form", &e.to_string()))?;
        }
        if let Some(printed) = file.ztg_as_printed {
            if printed {
                if file_has_key(text, "ztg_form") && spec.channel.ztg_form != ZtgForm::AsPrinted {
                    return Err(diag.at("ztg_as_printed", "conflicts with ztg_form"));
                }
                spec.channel.ztg_form = ZtgForm::AsPrinted;
            }
        }
        if let Some(source) = file.optimized_terminations {
            spec.optimized_terminations =
                source.parse().map_err(|e: Error| diag.at("optimized_terminations", &e.to_string()))?;
        }
        if let Some(v) = file.timings {
            spec.timings = v;
        }
        match (file.scenario_file, file.scenario) {
            (Some(_), Some(_)) => return Err(diag.at("scenario_file", "give either scenario_file or a [scenario] table")),
            (Some(path), None) => spec.scenario = ScenarioSource::File(resolve(base_dir, path)),
            (None, Some(inline)) => {
                let s = inline.into_scenario().map_err(|e| diag.at("scenario", &e.to_string()))?;
                spec.scenario = ScenarioSource::Inline(Box::new(s));
            }
            (None, None) => {}
        }
        Ok(spec)
    }
}

fn resolve(base: Option<&Path>, p: PathBuf) -> PathBuf {
    match base {
        Some(b) if p.is_relative() => b.join(p),
        _ => p,
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    sizes: Option<Vec<usize>>,
    engines: Option<Vec<String>>,
    optimize: Option<bool>,
    out_dir: Option<PathBuf>,
    quad_order: Option<usize>,
    quad_panels: Option<usize>,
    segments_per_halfwave: Option<usize>,
    refinement_check: Option<bool>,
    constraint: Option<String>,
    max_sweeps: Option<usize>,
    tolerance: Option<f64>,
    initial_termination_ohm: Option<ComplexOhm>,
    coordinate_order: Option<String>,
    seed: Option<u64>,
    ztg_form: Option<String>,
    ztg_as_printed: Option<bool>,
    optimized_terminations: Option<String>,
    timings: Option<bool>,
    scenario_file: Option<PathBuf>,
    scenario: Option<ScenarioFile>,
}

/// A real value or an `[re, im]` pair.
#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum ComplexOhm {
    Real(f64),
    Pair([f64; 2]),
}

impl ComplexOhm {
    fn value(&self) -> Complex64 {
        match *self {
            ComplexOhm::Real(r) => Complex64::new(r, 0.0),
            ComplexOhm::Pair([re, im]) => Complex64::new(re, im),
        }
    }
}

struct Diagnostics<'a> {
    text: &'a str,
    source_name: &'a str,
}

impl Diagnostics<'_> {
    fn at(&self, key: &str, message: &str) -> Error {
        let message = match key_line(self.text, key) {
            Some(line) => format!("line {line}, key `{key}`: {message}"),
            None => format!("key `{key}`: {message}"),
        };
        Error::Parse { source_name: self.source_name.into(), message }
    }
}

/// One-based line of the top-level assignment to `key`, or of the `[key]` table.
fn key_line(text: &str, key: &str) -> Option<usize> {
    text.lines().position(|l| {
        let l = l.trim_start();
        let assigned = l.strip_prefix(key).is_some_and(|rest| rest.trim_start().starts_with('='));
        assigned || l.trim_end() == format!("[{key}]")
    })
    .map(|i| i + 1)
}

fn file_has_key(text: &str, key: &str) -> bool {
    key_line(text, key).is_some()
}

// ---------------------------------------------------------------------------
// Report

#[derive(Debug, Clone, PartialEq)]
pub struct GainEntry {
    pub ris_size: usize,
    pub engine: Engine,
    pub optimized: bool,
    pub gain_db: Option<f64>,
    pub runtime_ms: Option<f64>,
    pub terminations: Vec<Complex64>,
    pub sweeps: Option<usize>,
    pub error: Option<String>,
}

impl GainEntry {
    /// Path of the terminations file relative to the output directory.
    pub fn terminations_file(&self) -> Option<String> {
        if self.error.is_some() {
            return None;
        }
        let kind = if self.optimized { "optimized" } else { "unoptimized" };
        Some(format!("terminations/ris{}_{}_{kind}.csv", self.ris_size, self.engine))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EngineDelta {
    pub ris_size: usize,
    pub optimized: bool,
    pub analytical_db: f64,
    pub peec_db: f64,
    /// The analytical optimum's terminations evaluated by PEEC (optimized rows).
    pub peec_with_analytical_terminations_db: Option<f64>,
}

impl EngineDelta {
    pub fn delta_db(&self) -> f64 {
        (self.analytical_db - self.peec_db).abs()
    }

    pub fn passed(&self) -> bool {
        self.delta_db() <= GAIN_GATE_DB
    }
}

/// Sizes ordered by increasing gain under each engine.
#[derive(Debug, Clone, PartialEq)]
pub struct TrendCheck {
    pub optimized: bool,
    pub analytical_order: Vec<usize>,
    pub peec_order: Vec<usize>,
}

impl TrendCheck {
    pub fn passed(&self) -> bool {
        self.analytical_order == self.peec_order
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImprovementCheck {
    pub ris_size: usize,
    pub engine: Engine,
    pub unoptimized_db: f64,
    pub optimized_db: f64,
}

impl ImprovementCheck {
    pub fn passed(&self) -> bool {
        self.optimized_db >= self.unoptimized_db
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockDiscrepancy {
    pub ris_size: usize,
    pub rows: Role,
    pub cols: Role,
    pub max_abs_ohm: f64,
    /// `||Z_peec - Z_analytical||_F / ||Z_analytical||_F` (zero for two zero blocks).
    pub relative_frobenius: f64,
}

#[derive(Debug, Clone)]
pub struct ValidationReport {
    pub entries: Vec<GainEntry>,
    pub deltas: Vec<EngineDelta>,
    pub trends: Vec<TrendCheck>,
    pub improvements: Vec<ImprovementCheck>,
    pub blocks: Vec<BlockDiscrepancy>,
    pub refinement: Option<std::result::Result<RefinementReport, String>>,
    pub ztg_form: ZtgForm,
    pub constraint: Constraint,
    pub optimized_terminations: OptimizedTerminations,
    pub timings: bool,
}

impl ValidationReport {
    pub fn all_succeeded(&self) -> bool {
        self.entries.iter().all(|e| e.error.is_none()) && !matches!(self.refinement, Some(Err(_)))
    }

    pub fn gates_passed(&self) -> bool {
        self.deltas.iter().all(EngineDelta::passed)
            && self.trends.iter().all(TrendCheck::passed)
            && self.improvements.iter().all(ImprovementCheck::passed)
            && match &self.refinement {
                Some(Ok(r)) => r.relative_change() < REFINEMENT_GATE,
                _ => true,
            }
    }

    pub fn success(&self) -> bool {
        self.all_succeeded() && self.gates_passed()
    }

    pub fn gain(&self, ris_size: usize, engine: Engine, optimized: bool) -> Option<f64> {
        self.entries
            .iter()
            .find(|e| e.ris_size == ris_size && e.engine == engine && e.optimized == optimized)
            .and_then(|e| e.gain_db)
    }

    /// RIS sizes in run order.
    pub fn sizes(&self) -> Vec<usize> {
        let mut out: Vec<usize> = Vec::new();
        for e in &self.entries {
            if !out.contains(&e.ris_size) {
                out.push(e.ris_size);
            }
        }
        out
    }
}

fn pass(ok: bool) -> &'static str {
    if ok {
        "PASS"
    } else {
        "FAIL"
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "RIS channel experiment report")?;
        writeln!(f, "{X_AXIS_NOTE}")?;
        writeln!(f, "gain: 10 log10 ||H||_F^2, Z_TG form: {}", self.ztg_form)?;
        writeln!(f, "constraint: {}, optimized terminations: {}", self.constraint, self.optimized_terminations.name())?;
        writeln!(f)?;
        writeln!(f, "gains (dB)")?;
        for e in &self.entries {
            let kind = if e.optimized { "optimized" } else { "unoptimized" };
            match (&e.gain_db, &e.error) {
                (Some(g), _) => writeln!(f, "  {:>4} {:<10} {:<11} {g:.3}", e.ris_size, e.engine.name(), kind)?,
                (None, Some(err)) => writeln!(f, "  {:>4} {:<10} {:<11} ERROR {err}", e.ris_size, e.engine.name(), kind)?,
                (None, None) => writeln!(f, "  {:>4} {:<10} {:<11} -", e.ris_size, e.engine.name(), kind)?,
            }
        }
        if !self.deltas.is_empty() {
            writeln!(f)?;
            writeln!(f, "cross-engine gate (|delta| <= {GAIN_GATE_DB} dB)")?;
            for d in &self.deltas {
                let kind = if d.optimized { "optimized" } else { "unoptimized" };
                write!(f, "  {:>4} {:<11} delta {:.3} dB {}", d.ris_size, kind, d.delta_db(), pass(d.passed()))?;
                if let Some(t) = d.peec_with_analytical_terminations_db {
                    write!(f, " (analytical terminations under PEEC: {t:.3} dB)")?;
                }
                writeln!(f)?;
            }
        }
        if !self.trends.is_empty() {
            writeln!(f)?;
            writeln!(f, "trend gate (sizes by increasing gain)")?;
            for t in &self.trends {
                let kind = if t.optimized { "optimized" } else { "unoptimized" };
                writeln!(f, "  {kind:<11} analytical {:?} peec {:?} {}", t.analytical_order, t.peec_order, pass(t.passed()))?;
            }
        }
        if !self.improvements.is_empty() {
            writeln!(f)?;
            writeln!(f, "optimization gate (optimized >= unoptimized)")?;
            for i in &self.improvements {
                writeln!(
                    f,
                    "  {:>4} {:<10} {:.3} -> {:.3} dB {}",
                    i.ris_size,
                    i.engine.name(),
                    i.unoptimized_db,
                    i.optimized_db,
                    pass(i.passed())
                )?;
            }
        }
        match &self.refinement {
            Some(Ok(r)) => {
                writeln!(f)?;
                writeln!(
                    f,
                    "mesh refinement {} -> {} segments: relative change {:.3e} {}",
                    r.coarse_segments,
                    r.fine_segments,
                    r.relative_change(),
                    pass(r.relative_change() < REFINEMENT_GATE)
                )?;
            }
            Some(Err(e)) => writeln!(f, "\nmesh refinement check failed: {e}")?,
            None => {}
        }
        if !self.blocks.is_empty() {
            writeln!(f)?;
            writeln!(f, "impedance block discrepancy (PEEC vs analytical)")?;
            for b in &self.blocks {
                writeln!(
                    f,
                    "  {:>4} Z_{}{} max {:.4e} ohm, relative {:.4e}",
                    b.ris_size, b.rows, b.cols, b.max_abs_ohm, b.relative_frobenius
                )?;
            }
        }
        writeln!(f)?;
        writeln!(
            f,
            "overall: {} (combinations {}, gates {})",
            pass(self.success()),
            if self.all_succeeded() { "ok" } else { "with errors" },
            pass(self.gates_passed())
        )
    }
}

// ---------------------------------------------------------------------------
// Running

struct EngineRun {
    zsys: BlockImpedanceMatrix,
    factors: ChannelFactors,
    setup_ms: f64,
}

fn elapsed_ms(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

fn engine_run(spec: &ExperimentSpec, scenario: &Scenario, engine: Engine) -> Result<EngineRun> {
    let t = Instant::now();
    let zsys = match engine {
        Engine::Analytical => assemble_zsys_analytical(scenario, &spec.quadrature)?,
        Engine::Peec => extract_zsys_peec(scenario, &spec.peec)?,
    };
    let factors = ChannelFactors::new(&zsys, scenario.z_generator(), scenario.z_load(), &spec.channel)?;
    Ok(EngineRun { zsys, factors, setup_ms: elapsed_ms(t) })
}

struct SizeOutcome {
    entries: Vec<GainEntry>,
    transferred: Option<f64>,
    blocks: Vec<BlockDiscrepancy>,
}

fn error_entry(n: usize, engine: Engine, optimized: bool, err: &str) -> GainEntry {
    GainEntry { ris_size: n, engine, optimized, gain_db: None, runtime_ms: None, terminations: Vec::new(), sweeps: None, error: Some(err.into()) }
}

/// Terminations, sweeps and gain of one optimizer run, or its error message.
type OptimizedRun = std::result::Result<(Vec<Complex64>, usize, f64), String>;

fn run_size(spec: &ExperimentSpec, scenario: &Scenario) -> SizeOutcome {
    let n = scenario.layout().ris;
    let engines = spec.sorted_engines();
    let opt_config = spec.optimizer_config();
    let need_analytical = engines.contains(&Engine::Analytical)
        || (spec.optimize && spec.optimized_terminations == OptimizedTerminations::Analytical);
    let mut runs: Vec<(Engine, std::result::Result<EngineRun, String>)> = Vec::new();
    for e in [Engine::Analytical, Engine::Peec] {
        if engines.contains(&e) || (e == Engine::Analytical && need_analytical) {
            let r = engine_run(spec, scenario, e).map_err(|err| err.to_string());
            if let Err(err) = &r {
                log::error!("RIS size {n}, {e} engine failed: {err}");
            }
            runs.push((e, r));
        }
    }
    let run_of = |e: Engine| runs.iter().find(|(x, _)| *x == e).map(|(_, r)| r);

    // optimization, once per engine that needs it
    let mut optimized: Vec<(Engine, OptimizedRun)> = Vec::new();
    if spec.optimize {
        for (e, run) in &runs {
            let wanted = match spec.optimized_terminations {
                OptimizedTerminations::PerEngine => engines.contains(e),
                OptimizedTerminations::Analytical => *e == Engine::Analytical,
            };
            if !wanted {
                continue;
            }
            let r = match run {
                Ok(run) => {
                    let t = Instant::now();
                    optimize_ris(&run.factors, &opt_config)
                        .map(|res| (res.terminations, res.sweeps, elapsed_ms(t) + run.setup_ms))
                        .map_err(|err| err.to_string())
                }
                Err(err) => Err(err.clone()),
            };
            optimized.push((*e, r));
        }
    }
    let optimized_of = |e: Engine| optimized.iter().find(|(x, _)| *x == e).map(|(_, r)| r);

    let mut entries = Vec::new();
    for &e in &engines {
        let run = run_of(e).expect("every selected engine was run");
        entries.push(match run {
            Ok(run) => {
                let t = Instant::now();
                match run.factors.channel(scenario.ris_terminations()) {
                    Ok(ch) => GainEntry {
                        ris_size: n,
                        engine: e,
                        optimized: false,
                        gain_db: Some(ch.gain_db),
                        runtime_ms: Some(run.setup_ms + elapsed_ms(t)),
                        terminations: scenario.ris_terminations().to_vec(),
                        sweeps: None,
                        error: None,
                    },
                    Err(err) => error_entry(n, e, false, &err.to_string()),
                }
            }
            Err(err) => error_entry(n, e, false, err),
        });
        if !spec.optimize {
            continue;
        }
        let source = match spec.optimized_terminations {
            OptimizedTerminations::PerEngine => e,
            OptimizedTerminations::Analytical => Engine::Analytical,
        };
        let entry = match (run, optimized_of(source).expect("optimizer ran for the source engine")) {
            (Err(err), _) | (_, Err(err)) => error_entry(n, e, true, err),
            (Ok(run), Ok((terms, sweeps, ms))) => {
                let t = Instant::now();
                match run.factors.channel(terms) {
                    Ok(ch) => GainEntry {
                        ris_size: n,
                        engine: e,
                        optimized: true,
                        gain_db: Some(ch.gain_db),
                        runtime_ms: Some(ms + elapsed_ms(t)),
                        terminations: terms.clone(),
                        sweeps: Some(*sweeps),
                        error: None,
                    },
                    Err(err) => error_entry(n, e, true, &err.to_string()),
                }
            }
        };
        entries.push(entry);
    }

    let mut transferred = None;
    let mut blocks = Vec::new();
    if let (Some(Ok(a)), Some(Ok(p))) = (run_of(Engine::Analytical), run_of(Engine::Peec)) {
        if let Some(Ok((terms, _, _))) = optimized_of(Engine::Analytical) {
            transferred = p.factors.channel(terms).ok().map(|c| c.gain_db);
        }
        let layout = scenario.layout();
        // Z_sys is symmetric, so the upper block triangle covers everything
        for (i, rows) in Role::ALL.into_iter().enumerate() {
            for cols in Role::ALL.into_iter().skip(i) {
                if layout.count(rows) == 0 || layout.count(cols) == 0 {
                    continue;
                }
                blocks.push(block_discrepancy(n, &a.zsys.block(rows, cols), &p.zsys.block(rows, cols), rows, cols));
            }
        }
    }
    SizeOutcome { entries, transferred, blocks }
}

fn block_discrepancy(n: usize, a: &CMat, p: &CMat, rows: Role, cols: Role) -> BlockDiscrepancy {
    let diff = CMat::from_fn(a.nrows(), a.ncols(), |i, j| p[(i, j)] - a[(i, j)]);
    let (d, r) = (frobenius(&diff), frobenius(a));
    BlockDiscrepancy {
        ris_size: n,
        rows,
        cols,
        max_abs_ohm: max_abs(&diff),
        relative_frobenius: if d == 0.0 { 0.0 } else { d / r.max(f64::MIN_POSITIVE) },
    }
}

fn gain_order(sizes: &[usize], gain: impl Fn(usize) -> f64) -> Vec<usize> {
    let mut s = sizes.to_vec();
    s.sort_by(|a, b| gain(*a).total_cmp(&gain(*b)));
    s
}

/// Runs every requested combination and evaluates the validation gates
/// without writing anything. Engine failures are recorded per combination.
pub fn evaluate(spec: &ExperimentSpec) -> Result<ValidationReport> {
    spec.validate()?;
    let scenarios = spec.scenarios()?;
    log::info!("Z_TG form: {}; {X_AXIS_NOTE}", spec.channel.ztg_form);
    let outcomes: Vec<SizeOutcome> = scenarios.par_iter().map(|s| run_size(spec, s)).collect();

    let refinement = (spec.peec.refinement_check && spec.engines.contains(&Engine::Peec))
        .then(|| scenario_refinement_check(&scenarios[0], &spec.peec).map_err(|e| e.to_string()));

    let mut report = ValidationReport {
        entries: Vec::new(),
        deltas: Vec::new(),
        trends: Vec::new(),
        improvements: Vec::new(),
        blocks: Vec::new(),
        refinement,
        ztg_form: spec.channel.ztg_form,
        constraint: spec.optimizer.constraint,
        optimized_terminations: spec.optimized_terminations,
        timings: spec.timings,
    };
    let mut transferred = Vec::new();
    for o in outcomes {
        if let (Some(t), Some(e)) = (o.transferred, o.entries.first()) {
            transferred.push((e.ris_size, t));
        }
        report.entries.extend(o.entries);
        report.blocks.extend(o.blocks);
    }

    let sizes = report.sizes();
    let flags: &[bool] = if spec.optimize { &[false, true] } else { &[false] };
    for &optimized in flags {
        let mut both = Vec::new();
        for &n in &sizes {
            if let (Some(a), Some(p)) = (report.gain(n, Engine::Analytical, optimized), report.gain(n, Engine::Peec, optimized)) {
                let t = if optimized { transferred.iter().find(|(m, _)| *m == n).map(|(_, t)| *t) } else { None };
                report.deltas.push(EngineDelta { ris_size: n, optimized, analytical_db: a, peec_db: p, peec_with_analytical_terminations_db: t });
                both.push(n);
            }
        }
        if both.len() >= 2 {
            let r = &report;
            report.trends.push(TrendCheck {
                optimized,
                analytical_order: gain_order(&both, |n| r.gain(n, Engine::Analytical, optimized).unwrap_or(f64::NAN)),
                peec_order: gain_order(&both, |n| r.gain(n, Engine::Peec, optimized).unwrap_or(f64::NAN)),
            });
        }
    }
    if spec.optimize {
        for &n in &sizes {
            for e in spec.sorted_engines() {
                if let (Some(u), Some(o)) = (report.gain(n, e, false), report.gain(n, e, true)) {
                    report.improvements.push(ImprovementCheck { ris_size: n, engine: e, unoptimized_db: u, optimized_db: o });
                }
            }
        }
    }
    Ok(report)
}

/// [`evaluate`] followed by [`write_outputs`] when an output directory is set.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ValidationReport> {
    let report = evaluate(spec)?;
    if let Some(dir) = &spec.out_dir {
        write_outputs(&report, dir)?;
    }
    Ok(report)
}

// ---------------------------------------------------------------------------
// Output

fn fmt_db(v: Option<f64>) -> String {
    v.map(|g| format!("{g:.6}")).unwrap_or_default()
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    csv::Writer::from_path(path).map_err(|e| csv_error(path, e))
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    Error::io(path, std::io::Error::other(e.to_string()))
}

fn write_rows(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(header).map_err(|e| csv_error(path, e))?;
    for r in rows {
        w.write_record(&r).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Gain-vs-size series: `gain_unoptimized.csv` and `gain_optimized.csv`, one
/// column per engine, empty cells where an engine has no result.
pub fn emit_plot_data(report: &ValidationReport, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut out = Vec::new();
    for (optimized, name) in [(false, "gain_unoptimized.csv"), (true, "gain_optimized.csv")] {
        let path = dir.join(name);
        let rows = report.sizes().into_iter().map(|n| {
            vec![
                n.to_string(),
                fmt_db(report.gain(n, Engine::Analytical, optimized)),
                fmt_db(report.gain(n, Engine::Peec, optimized)),
            ]
        });
        write_rows(&path, &["ris_size", "analytical_gain_db", "peec_gain_db"], rows)?;
        out.push(path);
    }
    Ok(out)
}

/// Validation tables and the text report.
pub fn write_validation(report: &ValidationReport, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_rows(
        &dir.join("validation.csv"),
        &[
            "ris_size",
            "optimized",
            "analytical_gain_db",
            "peec_gain_db",
            "delta_db",
            "gate_db",
            "passed",
            "peec_gain_db_analytical_terminations",
        ],
        report.deltas.iter().map(|d| {
            vec![
                d.ris_size.to_string(),
                d.optimized.to_string(),
                fmt_db(Some(d.analytical_db)),
                fmt_db(Some(d.peec_db)),
                fmt_db(Some(d.delta_db())),
                GAIN_GATE_DB.to_string(),
                d.passed().to_string(),
                fmt_db(d.peec_with_analytical_terminations_db),
            ]
        }),
    )?;
    write_rows(
        &dir.join("block_discrepancy.csv"),
        &["ris_size", "block", "max_abs_ohm", "relative_frobenius"],
        report.blocks.iter().map(|b| {
            vec![
                b.ris_size.to_string(),
                format!("Z_{}{}", b.rows, b.cols),
                format!("{:.9e}", b.max_abs_ohm),
                format!("{:.9e}", b.relative_frobenius),
            ]
        }),
    )?;
    let path = dir.join("report.txt");
    fs::write(&path, report.to_string()).map_err(|e| Error::io(&path, e))
}

/// Writes every artifact of a report into `dir`.
pub fn write_outputs(report: &ValidationReport, dir: &Path) -> Result<()> {
    let tdir = dir.join("terminations");
    fs::create_dir_all(&tdir).map_err(|e| Error::io(&tdir, e))?;
    for e in &report.entries {
        if let Some(file) = e.terminations_file() {
            write_rows(&dir.join(file), &["re", "im"], e.terminations.iter().map(|z| vec![z.re.to_string(), z.im.to_string()]))?;
        }
    }
    write_rows(
        &dir.join("gains.csv"),
        &["ris_size", "engine", "optimized", "gain_db", "runtime_ms", "terminations_file"],
        report.entries.iter().map(|e| {
            let runtime = if report.timings { e.runtime_ms.map(|t| format!("{t:.3}")).unwrap_or_default() } else { String::new() };
            vec![
                e.ris_size.to_string(),
                e.engine.to_string(),
                e.optimized.to_string(),
                fmt_db(e.gain_db),
                runtime,
                e.terminations_file().unwrap_or_default(),
            ]
        }),
    )?;
    write_rows(
        &dir.join("errors.csv"),
        &["ris_size", "engine", "optimized", "error"],
        report.entries.iter().filter_map(|e| {
            e.error.as_ref().map(|err| vec![e.ris_size.to_string(), e.engine.to_string(), e.optimized.to_string(), err.clone()])
        }),
    )?;
    emit_plot_data(report, dir)?;
    write_validation(report, dir)?;
    Ok(())
}
