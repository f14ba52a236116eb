//! Batch entry point: parse a run configuration (key=value file plus
//! command-line overrides), dispatch to the evaluators and suites, and emit
//! machine-readable reports under a strict exit-code contract:
//! 0 = all verdicts pass, 1 = a numerical verdict failed, 2 = a geometric
//! precondition failed, 3 = configuration error.

use std::fmt;

use thiserror::Error;

use crate::lkmeasures::{
    euler_intersection_m11, gauss_bonnet_hypersurface, tube_target, tube_volume_formula,
    tube_volume_oracle, LkError,
};
use crate::pseudogeom::{
    curve_target, egregium_sweep, lc_regular_check, lc_transversal_check, metric_target,
    surface_target, AmbientSpace, PseudoGeomError,
};
use crate::pushforward::GridConfig;
use crate::verifysuite::{cases_to_csv, cases_to_json, run_j_suite, run_table_suite,
    run_weyl_suite, IdentityCase};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_NUMERICAL: i32 = 1;
pub const EXIT_PRECONDITION: i32 = 2;
pub const EXIT_CONFIG: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("parse error at line {line}, column {col}: {msg}")]
    Parse { line: usize, col: usize, msg: String },
    #[error("invalid value for `{key}`: {msg}")]
    Validation { key: String, msg: String },
    #[error("unknown key `{key}` at line {line}, column {col}")]
    UnknownKey { key: String, line: usize, col: usize },
    #[error("missing required key `{0}`")]
    Missing(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Gb,
    Tube,
    Egregium,
    LcCheck,
    DistSuite,
    JSuite,
    WeylSuite,
    M11,
}

impl Command {
    pub fn parse(s: &str) -> Option<Command> {
        Some(match s {
            "gb" => Command::Gb,
            "tube" => Command::Tube,
            "egregium" => Command::Egregium,
            "lc-check" => Command::LcCheck,
            "dist-suite" => Command::DistSuite,
            "j-suite" => Command::JSuite,
            "weyl-suite" => Command::WeylSuite,
            "m11" => Command::M11,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Command::Gb => "gb",
            Command::Tube => "tube",
            Command::Egregium => "egregium",
            Command::LcCheck => "lc-check",
            Command::DistSuite => "dist-suite",
            Command::JSuite => "j-suite",
            Command::WeylSuite => "weyl-suite",
            Command::M11 => "m11",
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Json,
    Csv,
}

/// Fully resolved run configuration. Every field is validated before
/// dispatch; unknown keys are rejected at parse time.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub command: Command,
    pub ambient: (usize, usize),
    pub target: Option<String>,
    /// Contour resolution (2D cells per chart side / 1D sample count).
    pub grid: usize,
    /// Base t-grid size of the pushforward profile.
    pub tsamples: usize,
    /// Verdict tolerance; defaults depend on the command.
    pub tol: Option<f64>,
    /// Tube radius.
    pub r: f64,
    /// Monte-Carlo / sweep sample count (0 = command default).
    pub samples: usize,
    pub seed: u64,
    pub out: Option<String>,
    pub format: OutputFormat,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            command: Command::Gb,
            ambient: (2, 1),
            target: None,
            grid: 512,
            tsamples: 256,
            tol: None,
            r: 0.1,
            samples: 0,
            seed: 7,
            out: None,
            format: OutputFormat::Json,
        }
    }
}

impl RunConfig {
    fn verdict_tol(&self) -> f64 {
        self.tol.unwrap_or(match self.command {
            Command::Gb | Command::M11 => 5e-3,
            Command::Egregium => 1e-6,
            _ => 1e-6,
        })
    }

    fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "command": self.command.name(),
            "ambient": [self.ambient.0, self.ambient.1],
            "target": self.target,
            "grid": self.grid,
            "tsamples": self.tsamples,
            "tol": self.verdict_tol(),
            "r": self.r,
            "samples": self.samples,
            "seed": self.seed,
            "format": match self.format { OutputFormat::Json => "json", OutputFormat::Csv => "csv" },
        })
    }
}

fn set_key(
    cfg: &mut RunConfig,
    key: &str,
    value: &str,
    line: usize,
    col: usize,
    command_seen: &mut bool,
) -> Result<(), CliError> {
    let bad = |msg: &str| CliError::Validation {
        key: key.to_string(),
        msg: msg.to_string(),
    };
    match key {
        "command" => {
            cfg.command =
                Command::parse(value).ok_or_else(|| bad("expected one of gb, tube, egregium, lc-check, dist-suite, j-suite, weyl-suite, m11"))?;
            *command_seen = true;
        }
        "ambient" => {
            let (p, q) = value
                .split_once(',')
                .ok_or_else(|| bad("expected P,Q"))?;
            let p: usize = p.trim().parse().map_err(|_| bad("P must be a nonnegative integer"))?;
            let q: usize = q.trim().parse().map_err(|_| bad("Q must be a nonnegative integer"))?;
            if p + q == 0 {
                return Err(bad("ambient dimension must be positive"));
            }
            cfg.ambient = (p, q);
        }
        "target" => cfg.target = Some(value.to_string()),
        "grid" => {
            cfg.grid = value.parse().map_err(|_| bad("expected a positive integer"))?;
            if cfg.grid == 0 {
                return Err(bad("grid must be positive"));
            }
        }
        "tsamples" => {
            cfg.tsamples = value.parse().map_err(|_| bad("expected a positive integer"))?;
            if cfg.tsamples == 0 {
                return Err(bad("tsamples must be positive"));
            }
        }
        "tol" => {
            let t: f64 = value.parse().map_err(|_| bad("expected a positive number"))?;
            if !(t > 0.0) {
                return Err(bad("tol must be positive"));
            }
            cfg.tol = Some(t);
        }
        "r" => {
            let r: f64 = value.parse().map_err(|_| bad("expected a positive number"))?;
            if !(r > 0.0) {
                return Err(bad("r must be positive"));
            }
            cfg.r = r;
        }
        "samples" => {
            cfg.samples = value.parse().map_err(|_| bad("expected a nonnegative integer"))?;
        }
        "seed" => {
            cfg.seed = value.parse().map_err(|_| bad("expected a nonnegative integer"))?;
        }
        "out" => cfg.out = Some(value.to_string()),
        "format" => {
            cfg.format = match value {
                "json" => OutputFormat::Json,
                "csv" => OutputFormat::Csv,
                _ => return Err(bad("expected json or csv")),
            };
        }
        _ => {
            return Err(CliError::UnknownKey {
                key: key.to_string(),
                line,
                col,
            })
        }
    }
    Ok(())
}

/// Parse a plain-text key=value document (with `#` comments) followed by
/// command-line overrides given as alternating `--key value` tokens; a bare
/// leading token names the command. Overrides win over file values.
pub fn parse_config(text: &str, overrides: &[String]) -> Result<RunConfig, CliError> {
    let mut cfg = RunConfig::default();
    let mut command_seen = false;
    for (ln, raw) in text.lines().enumerate() {
        let line_no = ln + 1;
        let stripped = match raw.find('#') {
            Some(k) => &raw[..k],
            None => raw,
        };
        if stripped.trim().is_empty() {
            continue;
        }
        for (start, tok) in token_spans(stripped) {
            let col = start + 1;
            let (key, value) = tok.split_once('=').ok_or_else(|| CliError::Parse {
                line: line_no,
                col,
                msg: format!("expected key=value, found `{tok}`"),
            })?;
            set_key(&mut cfg, key.trim(), value.trim(), line_no, col, &mut command_seen)?;
        }
    }
    let mut it = overrides.iter().peekable();
    if let Some(first) = it.peek() {
        if !first.starts_with("--") {
            let name = it.next().expect("peeked");
            cfg.command = Command::parse(name).ok_or_else(|| CliError::Validation {
                key: "command".into(),
                msg: format!("unknown command `{name}`"),
            })?;
            command_seen = true;
        }
    }
    while let Some(flag) = it.next() {
        let key = flag.strip_prefix("--").ok_or_else(|| CliError::Parse {
            line: 0,
            col: 0,
            msg: format!("expected --key, found `{flag}`"),
        })?;
        let value = it.next().ok_or_else(|| CliError::Validation {
            key: key.to_string(),
            msg: "missing value".into(),
        })?;
        set_key(&mut cfg, key, value, 0, 0, &mut command_seen)?;
    }
    if !command_seen {
        return Err(CliError::Missing("command".into()));
    }
    Ok(cfg)
}

fn token_spans(line: &str) -> Vec<(usize, &str)> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, ch) in line.char_indices() {
        if ch.is_whitespace() {
            if let Some(s) = start.take() {
                out.push((s, &line[s..i]));
            }
        } else if start.is_none() {
            start = Some(i);
        }
    }
    if let Some(s) = start {
        out.push((s, &line[s..]));
    }
    out
}

// ---------------------------------------------------------------------------
// Dispatch
// ---------------------------------------------------------------------------

/// Result of a dispatched run: the exit code and the report document.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub exit_code: i32,
    pub report: serde_json::Value,
    /// CSV body when format=csv was requested and the command has a tabular
    /// report (the suites); JSON output otherwise.
    pub rendered: String,
}

fn classify_lk(err: &LkError) -> i32 {
    match err {
        LkError::Transversality { .. } | LkError::NonSimpleZero { .. } => EXIT_PRECONDITION,
        LkError::Geometry(g) => classify_geom(g),
        LkError::UnboundedTube { .. } | LkError::BadTarget(_) | LkError::NoMembershipTest(_) => {
            EXIT_CONFIG
        }
        _ => EXIT_NUMERICAL,
    }
}

fn classify_geom(err: &PseudoGeomError) -> i32 {
    match err {
        PseudoGeomError::BadTarget(_) | PseudoGeomError::AmbientMismatch { .. } => EXIT_CONFIG,
        PseudoGeomError::RankDeficient { .. } | PseudoGeomError::DegeneratePoint { .. } => {
            EXIT_PRECONDITION
        }
    }
}

fn fail_report(cfg: &RunConfig, code: i32, message: String) -> RunOutcome {
    let report = serde_json::json!({
        "version": env!("CARGO_PKG_VERSION"),
        "config": cfg.to_json(),
        "error": message,
        "verdict": "error",
    });
    let rendered = render(cfg, &report, None);
    RunOutcome {
        exit_code: code,
        report,
        rendered,
    }
}

fn render(cfg: &RunConfig, report: &serde_json::Value, cases: Option<&[IdentityCase]>) -> String {
    match (cfg.format, cases) {
        (OutputFormat::Csv, Some(cases)) => cases_to_csv(cases),
        _ => serde_json::to_string_pretty(report).expect("report serializes") + "\n",
    }
}

fn require_target(cfg: &RunConfig) -> Result<&str, RunOutcome> {
    match &cfg.target {
        Some(t) => Ok(t),
        None => Err(fail_report(
            cfg,
            EXIT_CONFIG,
            format!("command {} requires target=...", cfg.command),
        )),
    }
}

fn ambient(cfg: &RunConfig) -> AmbientSpace {
    AmbientSpace {
        p: cfg.ambient.0,
        q: cfg.ambient.1,
    }
}

/// Dispatch a validated configuration. Never panics on geometry errors; the
/// report always carries the resolved config.
pub fn run(cfg: &RunConfig) -> RunOutcome {
    match cfg.command {
        Command::Gb => run_gb(cfg),
        Command::Tube => run_tube(cfg),
        Command::Egregium => run_egregium(cfg),
        Command::LcCheck => run_lc_check(cfg),
        Command::M11 => run_m11(cfg),
        Command::DistSuite | Command::JSuite | Command::WeylSuite => run_suite(cfg),
    }
}

fn run_gb(cfg: &RunConfig) -> RunOutcome {
    let target = match require_target(cfg) {
        Ok(t) => t,
        Err(out) => return out,
    };
    let surface = match surface_target(target, ambient(cfg)) {
        Ok(s) => s,
        Err(e) => return fail_report(cfg, classify_geom(&e), e.to_string()),
    };
    let grid = GridConfig {
        cells: cfg.grid,
        t_samples: cfg.tsamples,
        ..GridConfig::default()
    };
    let outcome = match gauss_bonnet_hypersurface(&surface, &grid) {
        Ok(o) => o,
        Err(e) => return fail_report(cfg, classify_lk(&e), e.to_string()),
    };
    let tol = cfg.verdict_tol();
    let chi_round = outcome.chi.re.round();
    let pass = (outcome.chi.re - chi_round).abs() <= tol && outcome.chi.im.abs() <= tol;
    let report = serde_json::json!({
        "version": env!("CARGO_PKG_VERSION"),
        "config": cfg.to_json(),
        "chi_re": outcome.chi.re,
        "chi_im": outcome.chi.im,
        "chi_rounded": chi_round,
        "error_est": outcome.error_est,
        "margin": outcome.margin.is_finite().then_some(outcome.margin),
        "threshold": outcome.threshold,
        "mass_defect": outcome.mass_defect,
        "classical": outcome.classical,
        "verdict": if pass { "pass" } else { "fail" },
    });
    let rendered = render(cfg, &report, None);
    RunOutcome {
        exit_code: if pass { EXIT_PASS } else { EXIT_NUMERICAL },
        report,
        rendered,
    }
}

fn run_tube(cfg: &RunConfig) -> RunOutcome {
    let target = match require_target(cfg) {
        Ok(t) => t,
        Err(out) => return out,
    };
    let spec = match tube_target(target, ambient(cfg), cfg.r) {
        Ok(s) => s,
        Err(e) => return fail_report(cfg, classify_lk(&e), e.to_string()),
    };
    let formula = match tube_volume_formula(&spec) {
        Ok(f) => f,
        Err(e) => return fail_report(cfg, classify_lk(&e), e.to_string()),
    };
    let samples = if cfg.samples == 0 { 10_000_000 } else { cfg.samples };
    let (mc, stderr) = match tube_volume_oracle(&spec, samples, cfg.seed) {
        Ok(v) => v,
        Err(e) => return fail_report(cfg, classify_lk(&e), e.to_string()),
    };
    let disc = (formula.volume - mc).abs();
    let pass = disc < 3.0 * stderr && formula.im_residual < 1e-10;
    let report = serde_json::json!({
        "version": env!("CARGO_PKG_VERSION"),
        "config": cfg.to_json(),
        "closed_form": formula.volume,
        "im_residual": formula.im_residual,
        "monte_carlo": mc,
        "stderr": stderr,
        "discrepancy": disc,
        "samples": samples,
        "verdict": if pass { "pass" } else { "fail" },
    });
    let rendered = render(cfg, &report, None);
    RunOutcome {
        exit_code: if pass { EXIT_PASS } else { EXIT_NUMERICAL },
        report,
        rendered,
    }
}

fn run_egregium(cfg: &RunConfig) -> RunOutcome {
    let target = match require_target(cfg) {
        Ok(t) => t,
        Err(out) => return out,
    };
    let surface = match surface_target(target, ambient(cfg)) {
        Ok(s) => s,
        Err(e) => return fail_report(cfg, classify_geom(&e), e.to_string()),
    };
    let count = if cfg.samples == 0 { 200 } else { cfg.samples };
    let disc = match egregium_sweep(&surface, count, cfg.seed) {
        Ok(d) => d,
        Err(e) => return fail_report(cfg, classify_geom(&e), e.to_string()),
    };
    let tol = cfg.verdict_tol();
    let pass = disc < tol;
    let report = serde_json::json!({
        "version": env!("CARGO_PKG_VERSION"),
        "config": cfg.to_json(),
        "max_discrepancy": disc,
        "points": count,
        "verdict": if pass { "pass" } else { "fail" },
    });
    let rendered = render(cfg, &report, None);
    RunOutcome {
        exit_code: if pass { EXIT_PASS } else { EXIT_NUMERICAL },
        report,
        rendered,
    }
}

fn run_lc_check(cfg: &RunConfig) -> RunOutcome {
    let target = match require_target(cfg) {
        Ok(t) => t.to_string(),
        Err(out) => return out,
    };
    if target.starts_with("metric:") {
        let field = match metric_target(&target) {
            Ok(f) => f,
            Err(e) => return fail_report(cfg, classify_geom(&e), e.to_string()),
        };
        let verdict = lc_regular_check(&field, cfg.grid);
        // Reports stay readable: the count is exact, the list is a sample.
        let violations: Vec<serde_json::Value> = verdict
            .violations
            .iter()
            .take(16)
            .map(|v| serde_json::json!({ "u": v.u, "v": v.v, "margin": v.margin }))
            .collect();
        let report = serde_json::json!({
            "version": env!("CARGO_PKG_VERSION"),
            "config": cfg.to_json(),
            "regular": verdict.regular,
            "min_margin": verdict.min_margin.is_finite().then_some(verdict.min_margin),
            "threshold": verdict.threshold,
            "degenerate_points": verdict.degenerate_points,
            "violation_count": verdict.violations.len(),
            "violations": violations,
            "verdict": if verdict.regular { "pass" } else { "fail" },
        });
        let rendered = render(cfg, &report, None);
        return RunOutcome {
            exit_code: if verdict.regular { EXIT_PASS } else { EXIT_NUMERICAL },
            report,
            rendered,
        };
    }
    let surface = match surface_target(&target, ambient(cfg)) {
        Ok(s) => s,
        Err(e) => return fail_report(cfg, classify_geom(&e), e.to_string()),
    };
    let verdict = match lc_transversal_check(&surface, cfg.grid) {
        Ok(v) => v,
        Err(e) => return fail_report(cfg, classify_geom(&e), e.to_string()),
    };
    let report = serde_json::json!({
        "version": env!("CARGO_PKG_VERSION"),
        "config": cfg.to_json(),
        "transversal": verdict.transversal,
        "margin": verdict.margin.is_finite().then_some(verdict.margin),
        "threshold": verdict.threshold,
        "zero_samples": verdict.zero_samples,
        "verdict": if verdict.transversal { "pass" } else { "fail" },
    });
    let rendered = render(cfg, &report, None);
    RunOutcome {
        exit_code: if verdict.transversal { EXIT_PASS } else { EXIT_NUMERICAL },
        report,
        rendered,
    }
}

fn run_m11(cfg: &RunConfig) -> RunOutcome {
    let target = match require_target(cfg) {
        Ok(t) => t,
        Err(out) => return out,
    };
    let curve = match curve_target(target) {
        Ok(c) => c,
        Err(e) => return fail_report(cfg, classify_geom(&e), e.to_string()),
    };
    let samples = if cfg.samples == 0 { 4096 } else { cfg.samples };
    let outcome = match euler_intersection_m11(&curve, samples) {
        Ok(o) => o,
        Err(e) => return fail_report(cfg, classify_lk(&e), e.to_string()),
    };
    let tol = cfg.verdict_tol();
    let pass = (outcome.chi - outcome.chi.round()).abs() <= tol;
    let crossings: Vec<serde_json::Value> = outcome
        .crossings
        .iter()
        .map(|c| {
            serde_json::json!({
                "component": c.component,
                "s": c.s,
                "sign": c.sign,
                "dsigma": c.dsigma,
                "point": c.point,
            })
        })
        .collect();
    let report = serde_json::json!({
        "version": env!("CARGO_PKG_VERSION"),
        "config": cfg.to_json(),
        "chi": outcome.chi,
        "signed_count": outcome.signed_count,
        "crossings": crossings,
        "margin": outcome.margin.is_finite().then_some(outcome.margin),
        "verdict": if pass { "pass" } else { "fail" },
    });
    let rendered = render(cfg, &report, None);
    RunOutcome {
        exit_code: if pass { EXIT_PASS } else { EXIT_NUMERICAL },
        report,
        rendered,
    }
}

fn run_suite(cfg: &RunConfig) -> RunOutcome {
    let cases = match cfg.command {
        Command::DistSuite => Ok(run_table_suite()),
        Command::JSuite => run_j_suite(8),
        Command::WeylSuite => run_weyl_suite(),
        _ => unreachable!("suite dispatch"),
    };
    let cases = match cases {
        Ok(c) => c,
        Err(e) => return fail_report(cfg, EXIT_PRECONDITION, e.to_string()),
    };
    let failures = cases.iter().filter(|c| !c.pass()).count();
    let report = serde_json::json!({
        "version": env!("CARGO_PKG_VERSION"),
        "config": cfg.to_json(),
        "cases": cases_to_json(&cases),
        "total": cases.len(),
        "failures": failures,
        "verdict": if failures == 0 { "pass" } else { "fail" },
    });
    let rendered = render(cfg, &report, Some(&cases));
    RunOutcome {
        exit_code: if failures == 0 { EXIT_PASS } else { EXIT_NUMERICAL },
        report,
        rendered,
    }
}

/// Full entry point used by the binary: args are everything after argv[0].
/// Reads `--config FILE` when present; writes the rendered report to the
/// `out` path or stdout; returns the process exit code.
pub fn main_with_args(args: &[String]) -> i32 {
    let mut rest: Vec<String> = Vec::new();
    let mut file_text = String::new();
    let mut it = args.iter().peekable();
    while let Some(a) = it.next() {
        if a == "--config" {
            let path = match it.next() {
                Some(p) => p,
                None => {
                    eprintln!("error: --config requires a path");
                    return EXIT_CONFIG;
                }
            };
            file_text = match std::fs::read_to_string(path) {
                Ok(t) => t,
                Err(e) => {
                    eprintln!("error: cannot read {path}: {e}");
                    return EXIT_CONFIG;
                }
            };
        } else if a == "--help" || a == "-h" {
            println!("{HELP}");
            return EXIT_PASS;
        } else {
            rest.push(a.clone());
        }
    }
    let cfg = match parse_config(&file_text, &rest) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
    };
    let outcome = run(&cfg);
    match &cfg.out {
        Some(path) => {
            if let Err(e) = std::fs::write(path, &outcome.rendered) {
                eprintln!("error: cannot write {path}: {e}");
                return EXIT_CONFIG;
            }
        }
        None => print!("{}", outcome.rendered),
    }
    outcome.exit_code
}

const HELP: &str = "\
weylscope <command> [--config FILE] [--key value ...]

Commands:
  gb          Euler characteristic of a closed surface by the singular
              Gauss-Bonnet pairing (target=sphere:1 | ellipsoid:a,b,c | torus:R,r)
  tube        Tube volume: closed form vs Monte-Carlo oracle
              (target=segment:timelike,L | segment:spacelike,L | circle:R; r=radius)
  egregium    Intrinsic vs extrinsic Gauss curvature sweep (target=surface)
  lc-check    Light-cone regularity (target=metric:...) or hypersurface
              transversality (target=surface)
  m11         R^{1,1} Euler characteristic by light-cone crossing count
              (target=disc:R | annulus:R,r | ellipse:a,b | wobble:R,amp,mode)
  dist-suite  Residue / Fourier-duality / point-evaluation tables
  j-suite     Two-variable J-integral product-identity lattice
  weyl-suite  Indefinite-signature Weyl-lemma lattice

Keys (file `key=value` lines, `#` comments; flags override the file):
  --ambient P,Q    ambient signature            (default 2,1)
  --target NAME    catalog target (see above)
  --grid N         contour resolution           (default 512)
  --tsamples N     profile t-samples            (default 256)
  --tol X          verdict tolerance            (command-specific default)
  --r X            tube radius                  (default 0.1)
  --samples N      MC / sweep samples           (command-specific default)
  --seed N         RNG seed                     (default 7)
  --out PATH       write report to PATH instead of stdout
  --format F       json | csv                   (default json)

Exit codes: 0 pass, 1 numerical verdict failure, 2 precondition failure,
3 configuration error. WEYLSCOPE_THREADS caps worker parallelism.";

// ---------------------------------------------------------------------------
