//! Subcommands and their dispatch.

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use gaussblab::bineq::{
    deficit, log_measure_derivatives, midpoint_gap_identity, poincare_gap, strong_deficit, PoincareMode,
};
use gaussblab::corpus::{standard_corpus, STANDARD_CORPUS_ID};
use gaussblab::gauss::{measure, moments, Engine};
use gaussblab::mgm::{mgm_solve, uniqueness_experiment, MgmOptions};
use gaussblab::stability::{
    audit_corpus, bound_audit, calibrate_constants, dichotomy_quantity, poincare_stability_witness,
    quad_boundary_check, strip_sharpness, trace_check, AuditKind, AuditSubject, ConstantsRecord,
};
use gaussblab::SampleConfig;
use serde_json::json;

use crate::input::{parse_grid, parse_list, read_body, read_function, read_matrix};
use crate::output::{emit, Format, Report};
use crate::verify::{self, VerifyOptions};

pub const DEFAULT_SEED: u64 = 1;
pub const DEFAULT_SAMPLES: usize = 200_000;

#[derive(Debug, Parser)]
#[command(name = "gaussblab", version, about = "Gaussian measures of symmetric convex bodies")]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Global {
    /// Master seed.
    #[arg(long, global = true, env = "GAUSSBLAB_SEED", default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Monte Carlo sample count.
    #[arg(long, global = true, default_value_t = DEFAULT_SAMPLES)]
    pub samples: usize,
    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Constants record (JSON); built-in defaults when absent.
    #[arg(long, global = true)]
    pub constants: Option<PathBuf>,
    /// Fixed number of sample partitions; results do not depend on thread count.
    #[arg(long, global = true, default_value_t = 1)]
    pub partition_count: usize,
}

impl Global {
    pub fn config(&self) -> SampleConfig {
        SampleConfig::new(self.seed, self.samples).with_partitions(self.partition_count)
    }

    pub fn constants(&self) -> Result<ConstantsRecord> {
        match &self.constants {
            None => Ok(ConstantsRecord::default()),
            Some(p) => load_constants(p),
        }
    }
}

pub fn load_constants(path: &std::path::Path) -> Result<ConstantsRecord> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let c: ConstantsRecord =
        serde_json::from_str(&text).with_context(|| format!("{} is not a constants record", path.display()))?;
    c.validate()?;
    Ok(c)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EngineArg {
    Auto,
    ClosedForm,
    MonteCarlo,
}

#[derive(Debug, Clone, Args)]
pub struct EngineOpt {
    #[arg(long, value_enum, default_value_t = EngineArg::Auto)]
    pub engine: EngineArg,
}

impl EngineOpt {
    fn engine(&self, config: SampleConfig) -> Engine {
        match self.engine {
            EngineArg::Auto => Engine::Auto(config),
            EngineArg::ClosedForm => Engine::ClosedForm,
            EngineArg::MonteCarlo => Engine::MonteCarlo(config),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AuditArg {
    IsoBig,
    IsoSmall,
    BallMass,
    BallMoment,
    Komatsu,
    StripPerimeter,
}

impl From<AuditArg> for AuditKind {
    fn from(a: AuditArg) -> Self {
        match a {
            AuditArg::IsoBig => Self::IsoBig,
            AuditArg::IsoSmall => Self::IsoSmall,
            AuditArg::BallMass => Self::BallMass,
            AuditArg::BallMoment => Self::BallMoment,
            AuditArg::Komatsu => Self::Komatsu,
            AuditArg::StripPerimeter => Self::StripPerimeter,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    General,
    EvenHalf,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Gaussian measure γ(K).
    Measure {
        /// Body JSON, as a file path or inline.
        #[arg(long)]
        body: String,
        #[command(flatten)]
        engine: EngineOpt,
    },
    /// Restricted second and fourth moments.
    Moments {
        #[arg(long)]
        body: String,
        #[command(flatten)]
        engine: EngineOpt,
    },
    /// Deficit of the dilates aK, bK and √(ab)K.
    Deficit {
        #[arg(long)]
        body: String,
        #[arg(long)]
        a: f64,
        #[arg(long)]
        b: f64,
        #[command(flatten)]
        engine: EngineOpt,
    },
    /// Deficit of the coordinate scalings e^x K, e^y K.
    StrongDeficit {
        #[arg(long)]
        body: String,
        /// Comma-separated.
        #[arg(long, allow_hyphen_values = true)]
        x: String,
        #[arg(long, allow_hyphen_values = true)]
        y: String,
        #[command(flatten)]
        engine: EngineOpt,
    },
    /// First and second derivatives of t ↦ log γ(e^{td} K).
    Hessian {
        #[arg(long)]
        body: String,
        #[arg(long, allow_hyphen_values = true)]
        d: String,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        t: f64,
        #[command(flatten)]
        engine: EngineOpt,
    },
    /// Midpoint identity along the segment from x to y.
    MidpointGap {
        #[arg(long)]
        body: String,
        #[arg(long, allow_hyphen_values = true)]
        x: String,
        #[arg(long, allow_hyphen_values = true)]
        y: String,
        #[arg(long, default_value_t = 64)]
        nodes: usize,
        #[command(flatten)]
        engine: EngineOpt,
    },
    /// Dichotomy quantity Q and its verdict.
    Dichotomy {
        #[arg(long)]
        body: String,
    },
    /// One inequality family on a body, dimension or radius; the whole
    /// standard corpus when no subject is given.
    Audit {
        #[arg(long, value_enum)]
        kind: Option<AuditArg>,
        #[arg(long)]
        body: Option<String>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        r: Option<f64>,
    },
    /// Strip deficits and implied constants over a radius grid.
    StripSharpness {
        #[arg(long)]
        a: f64,
        #[arg(long)]
        b: f64,
        /// start:stop:step
        #[arg(long, default_value = "1:5:0.5")]
        r_grid: String,
    },
    /// Trace inequality for a function on a polytopal body.
    TraceCheck {
        #[arg(long)]
        body: String,
        /// Function JSON, as a file path or inline.
        #[arg(long)]
        function: String,
    },
    /// Poincaré stability witness.
    PoincareWitness {
        #[arg(long)]
        body: String,
        #[arg(long)]
        function: String,
        /// Also report the plain Poincaré gap in this mode.
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,
    },
    /// Boundary bound for the quadratic form of T.
    QuadCheck {
        #[arg(long)]
        body: String,
        /// JSON rows of a symmetric positive definite matrix.
        #[arg(long)]
        matrix: String,
    },
    /// Fits the constants on the standard corpus.
    Calibrate,
    /// Ascent to the maximal Gaussian measure position.
    Mgm {
        #[arg(long)]
        body: String,
        #[arg(long, default_value_t = 1e-3)]
        tol: f64,
        #[arg(long, default_value_t = 200)]
        max_iter: usize,
        #[arg(long, default_value_t = 0.5)]
        step0: f64,
    },
    /// Ascent from several random starts, compared modulo rotations.
    MgmUniqueness {
        #[arg(long)]
        body: String,
        #[arg(long, default_value_t = 5)]
        starts: usize,
        #[arg(long, default_value_t = 1e-7)]
        tol: f64,
        #[arg(long, default_value_t = 200)]
        max_iter: usize,
    },
    /// Every acceptance criterion; exits nonzero on any failure.
    VerifyAll {
        /// Run only these criteria (comma-separated ids).
        #[arg(long)]
        only: Option<String>,
    },
}

/// Runs the command, writes its report and returns whether every asserted
/// invariant held.
pub fn run(cli: &Cli) -> Result<bool> {
    let g = &cli.global;
    let config = g.config();
    let (report, ok) = match &cli.command {
        Command::Measure { body, engine } => {
            let b = read_body(body)?;
            (Report::new(&measure(&b, engine.engine(config))?)?, true)
        }
        Command::Moments { body, engine } => {
            let b = read_body(body)?;
            (Report::new(&moments(&b, engine.engine(config))?)?, true)
        }
        Command::Deficit { body, a, b, engine } => {
            let k = read_body(body)?;
            let d = deficit(&k, *a, *b, engine.engine(config))?;
            let ok = d.epsilon >= -3.0 * d.epsilon_error;
            (Report::new(&d)?, ok)
        }
        Command::StrongDeficit { body, x, y, engine } => {
            let k = read_body(body)?;
            let d = strong_deficit(&k, &parse_list(x)?, &parse_list(y)?, engine.engine(config))?;
            let ok = d.epsilon >= -3.0 * d.epsilon_error;
            (Report::new(&d)?, ok)
        }
        Command::Hessian { body, d, t, engine } => {
            let k = read_body(body)?;
            let h = log_measure_derivatives(&k, &parse_list(d)?, *t, engine.engine(config))?;
            let ok = h.second.value <= 3.0 * h.second.std_error;
            (Report::new(&h)?, ok)
        }
        Command::MidpointGap {
            body,
            x,
            y,
            nodes,
            engine,
        } => {
            let k = read_body(body)?;
            let m = midpoint_gap_identity(&k, &parse_list(x)?, &parse_list(y)?, *nodes, engine.engine(config))?;
            let ok = m.residual <= m.error_budget.max(1e-3);
            (Report::new(&m)?, ok)
        }
        Command::Dichotomy { body } => {
            let k = read_body(body)?;
            let d = dichotomy_quantity(&k, config, &g.constants()?)?;
            let ok = d.verdict.branch != gaussblab::stability::Branch::Violated;
            (Report::new(&d)?, ok)
        }
        Command::Audit { kind, body, n, r } => audit(g, config, *kind, body.as_deref(), *n, *r)?,
        Command::StripSharpness { a, b, r_grid } => {
            let rows = strip_sharpness(*a, *b, &parse_grid(r_grid)?)?;
            (Report::new(&rows)?.with_rows(&rows)?, true)
        }
        Command::TraceCheck { body, function } => {
            let k = read_body(body)?;
            let t = trace_check(&k, &read_function(function)?, config)?;
            (Report::new(&t)?, t.holds())
        }
        Command::PoincareWitness { body, function, mode } => {
            let k = read_body(body)?;
            let f = read_function(function)?;
            let w = poincare_stability_witness(&k, &f, config)?;
            let gap = match mode {
                None => None,
                Some(m) => {
                    let mode = match m {
                        ModeArg::General => PoincareMode::General,
                        ModeArg::EvenHalf => PoincareMode::EvenHalf,
                    };
                    Some(poincare_gap(&k, &f, mode, Engine::Auto(config))?)
                }
            };
            let ok = w.w12_holds;
            (Report::new(&json!({"witness": w, "gap": gap}))?, ok)
        }
        Command::QuadCheck { body, matrix } => {
            let k = read_body(body)?;
            let q = quad_boundary_check(&k, &read_matrix(matrix)?, config, &g.constants()?)?;
            let ok = q.rows.iter().all(|r| r.slack >= -3.0 * r.boundary_error);
            (Report::new(&q)?.with_rows(&q.rows)?, ok)
        }
        Command::Calibrate => {
            let cal = calibrate_constants(&standard_corpus(), STANDARD_CORPUS_ID, config)?;
            let ok = cal.rows.iter().all(|r| r.holds());
            (Report::new(&cal.constants)?.with_rows(&cal.rows)?, ok)
        }
        Command::Mgm {
            body,
            tol,
            max_iter,
            step0,
        } => {
            let k = read_body(body)?;
            let opts = MgmOptions {
                tol: *tol,
                max_iter: *max_iter,
                step0: *step0,
                config,
            };
            let run = mgm_solve(&k, &opts)?;
            let ok = run.converged;
            (Report::new(&run)?.with_rows(&run.trajectory)?, ok)
        }
        Command::MgmUniqueness {
            body,
            starts,
            tol,
            max_iter,
        } => {
            let k = read_body(body)?;
            let opts = MgmOptions {
                tol: *tol,
                max_iter: *max_iter,
                ..MgmOptions::new(config)
            };
            let rep = uniqueness_experiment(&k, *starts, g.seed, &opts)?;
            let ok = rep.gamma_consistent;
            let rows: Vec<_> = rep
                .starts
                .iter()
                .map(|s| json!({"start": s.start, "gamma": s.gamma, "gamma_error": s.gamma_error,
                                "iterations": s.iterations, "residual": s.residual, "converged": s.converged}))
                .collect();
            (Report::new(&rep)?.with_rows(&rows)?, ok)
        }
        Command::VerifyAll { only } => {
            let opts = VerifyOptions {
                seed: g.seed,
                partitions: g.partition_count,
                constants: g.constants()?,
            };
            let ids: Vec<u8> = match only {
                None => verify::CRITERIA.iter().map(|(i, _)| *i).collect(),
                Some(s) => s
                    .split(',')
                    .map(|t| t.trim().parse::<u8>().with_context(|| format!("bad criterion id {t:?}")))
                    .collect::<Result<_>>()?,
            };
            let mut results = Vec::new();
            for id in ids {
                let r = verify::run_criterion(id, &opts);
                eprintln!("{}", r.line());
                results.push(r);
            }
            let ok = results.iter().all(|r| r.passed);
            let rows: Vec<_> = results
                .iter()
                .map(|r| json!({"id": r.id, "name": r.name, "passed": r.passed, "summary": r.summary, "seconds": r.seconds}))
                .collect();
            (Report::new(&json!({"passed": ok, "criteria": results}))?.with_rows(&rows)?, ok)
        }
    };
    emit(&report, g.format, g.output.as_deref())?;
    Ok(ok)
}

fn audit(
    g: &Global,
    config: SampleConfig,
    kind: Option<AuditArg>,
    body: Option<&str>,
    n: Option<usize>,
    r: Option<f64>,
) -> Result<(Report, bool)> {
    let constants = g.constants()?;
    let Some(kind) = kind else {
        if body.is_some() || n.is_some() || r.is_some() {
            bail!("--kind is required when a subject is given");
        }
        let audit = audit_corpus(&standard_corpus(), &constants, config)?;
        let ok = audit.rows.iter().all(|r| r.holds());
        return Ok((Report::new(&audit)?.with_rows(&audit.rows)?, ok));
    };
    let k: AuditKind = kind.into();
    let loaded;
    let subject = match (body, n, r) {
        (Some(b), None, None) => {
            loaded = read_body(b)?;
            AuditSubject::Body {
                label: b,
                body: &loaded,
            }
        }
        (None, Some(n), Some(r)) => AuditSubject::Ball { n, r },
        (None, Some(n), None) => AuditSubject::Dim { n },
        (None, None, Some(r)) => AuditSubject::Radius { r },
        _ => bail!("give --body, --n, --r, or --n with --r"),
    };
    let rows = bound_audit(k, &subject, &constants, config)?;
    let ok = rows.iter().all(|r| r.holds());
    Ok((Report::new(&rows)?.with_rows(&rows)?, ok))
}
