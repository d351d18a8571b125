//! Command-line front end.
//!
//! Exit status: 0 for a positive verdict, 2 for a negative verdict, 1 for
//! any error. Reports are canonical JSON on stdout or in `--out`.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use serde_json::{json, Value};

use crate::cayley;
use crate::error::{Error, Result};
use crate::feedback;
use crate::io::{self, InputDocument};
use crate::linalg::{self, c64, CMat, CVec};
use crate::node::StateSpaceNode;
use crate::passivity::{self, PassivityKind, PSD_TOL};
use crate::second_order::{self, BeamModel, BeamParameters, BeamSensor, SecondOrderPlant};
use crate::sim::{self, SampledSignal};
use crate::stability;

/// Overrides the default PSD slack.
pub const TOL_ENV: &str = "PASSIVE_NODE_TOL";

/// Shift used by `minimal-e` to probe minimality.
const PROBE_EPS: f64 = 1e-3;

#[derive(Debug, Parser)]
#[command(name = "passnode", version, about = "Passivity analysis of finite-dimensional system nodes")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum KindArg {
    Impedance,
    Scattering,
}

impl From<KindArg> for PassivityKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::Impedance => PassivityKind::Impedance,
            KindArg::Scattering => PassivityKind::Scattering,
        }
    }
}

#[derive(Debug, clap::Args)]
pub struct Common {
    /// Node, plant or beam-preset JSON.
    pub input: Option<PathBuf>,
    /// Report destination; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Feedthrough shift `E` (bare matrix JSON).
    #[arg(long = "e-matrix")]
    pub e_matrix: Option<PathBuf>,
}

#[derive(Debug, clap::Args)]
pub struct BeamArgs {
    /// Modes including the two rigid ones [default: 12]
    #[arg(long = "n-modes")]
    pub n_modes: Option<usize>,
    /// Mass per unit length [default: 1]
    #[arg(long = "rho-a")]
    pub rho_a: Option<f64>,
    /// Bending stiffness [default: 1]
    #[arg(long)]
    pub ei: Option<f64>,
    /// Kelvin–Voigt damping coefficient [default: 0.01]
    #[arg(long = "ebar-i")]
    pub ebar_i: Option<f64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Passivity certificate.
    Check {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "impedance")]
        kind: KindArg,
        /// Use the reciprocal-system form at `iω` instead.
        #[arg(long)]
        omega: Option<f64>,
        /// Also scan `G(s)+G(s)^H` on this many right-half-plane points.
        #[arg(long)]
        grid: Option<usize>,
    },
    /// Smallest feedthrough shift making the node impedance passive.
    MinimalE {
        #[command(flatten)]
        common: Common,
        /// Frequency for the colocated formula.
        #[arg(long, default_value_t = 0.0)]
        omega: f64,
    },
    /// Internal Cayley transform and discrete passivity verdict.
    Cayley {
        #[command(flatten)]
        common: Common,
        /// `re` or `re,im`.
        #[arg(long, default_value = "1")]
        alpha: String,
        #[arg(long, value_enum, default_value = "impedance")]
        kind: KindArg,
    },
    /// Stabilizing output feedback, or the diagonal transform with `--k`.
    Feedback {
        #[command(flatten)]
        common: Common,
        /// Gain in `u = −κy + v`; requires `0 < κ < κ₀`
        #[arg(long, conflicts_with = "k")]
        kappa: Option<f64>,
        /// Diagonal-transform parameter `k > 0`
        #[arg(long)]
        k: Option<f64>,
    },
    /// Stability verdict of the closed loop `u = −κy + v`.
    Stability {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 1.0)]
        kappa: f64,
    },
    /// Trajectory simulation with an energy audit.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "impedance")]
        kind: KindArg,
        #[arg(long = "t-final", default_value_t = 10.0)]
        t_final: f64,
        /// Defaults to 2000 per unit time.
        #[arg(long)]
        steps: Option<usize>,
        /// Initial state as inline JSON array or a file path.
        #[arg(long)]
        z0: Option<String>,
        /// Sampled input signal `{"dt", "samples"}`; zero input when absent.
        #[arg(long = "input")]
        signal: Option<PathBuf>,
        /// Trajectory CSV destination.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Free–free beam example: modal model and rate-feedback stability.
    Beam {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        beam: BeamArgs,
        #[arg(long, default_value_t = 1.0)]
        kappa: f64,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Check { .. } => "check",
            Command::MinimalE { .. } => "minimal-e",
            Command::Cayley { .. } => "cayley",
            Command::Feedback { .. } => "feedback",
            Command::Stability { .. } => "stability",
            Command::Simulate { .. } => "simulate",
            Command::Beam { .. } => "beam",
        }
    }

    fn common(&self) -> &Common {
        match self {
            Command::Check { common, .. }
            | Command::MinimalE { common, .. }
            | Command::Cayley { common, .. }
            | Command::Feedback { common, .. }
            | Command::Stability { common, .. }
            | Command::Simulate { common, .. }
            | Command::Beam { common, .. } => common,
        }
    }
}

/// Outcome of a verb: report plus whether the verdict was positive.
pub struct Outcome {
    pub report: Value,
    pub positive: bool,
    pub summary: String,
}

/// Parses arguments, runs the verb and returns the exit status.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let verb = cli.command.name();
    match run(&cli.command) {
        Ok(outcome) => {
            eprintln!("{verb}: {}", outcome.summary);
            if outcome.positive {
                0
            } else {
                2
            }
        }
        Err(e) => {
            eprintln!("error: {verb}: {e}");
            1
        }
    }
}

/// Runs one verb and writes its report.
pub fn run(command: &Command) -> Result<Outcome> {
    let tol = tolerance_from_env()?;
    let outcome = match command {
        Command::Check {
            common,
            kind,
            omega,
            grid,
        } => run_check(common, (*kind).into(), *omega, *grid, tol)?,
        Command::MinimalE { common, omega } => run_minimal_e(common, *omega, tol)?,
        Command::Cayley {
            common,
            alpha,
            kind,
        } => run_cayley(common, parse_complex(alpha)?, (*kind).into(), tol)?,
        Command::Feedback { common, kappa, k } => run_feedback(common, *kappa, *k, tol)?,
        Command::Stability { common, kappa } => run_stability(common, *kappa, tol)?,
        Command::Simulate {
            common,
            kind,
            t_final,
            steps,
            z0,
            signal,
            csv,
        } => run_simulate(
            common,
            (*kind).into(),
            *t_final,
            *steps,
            z0.as_deref(),
            signal.as_deref(),
            csv.as_deref(),
        )?,
        Command::Beam {
            common,
            beam,
            kappa,
        } => run_beam(common, beam, *kappa, tol)?,
    };
    let text = io::canonical_string(&outcome.report);
    match &command.common().out {
        Some(path) => io::write_text(path, &text)?,
        None => print!("{text}"),
    }
    Ok(outcome)
}

pub fn tolerance_from_env() -> Result<f64> {
    match std::env::var(TOL_ENV) {
        Ok(s) => match s.trim().parse::<f64>() {
            Ok(t) if t.is_finite() && t > 0.0 => Ok(t),
            _ => Err(Error::InvalidArgument(format!("{TOL_ENV} must be a positive number, got {s:?}"))),
        },
        Err(_) => Ok(PSD_TOL),
    }
}

/// `"1.5"` or `"1.5,0.7"`.
pub fn parse_complex(s: &str) -> Result<Complex64> {
    let bad = || Error::InvalidArgument(format!("expected `re` or `re,im`, got {s:?}"));
    let mut parts = s.split(',').map(|p| p.trim().parse::<f64>());
    let re = parts.next().ok_or_else(bad)?.map_err(|_| bad())?;
    let im = match parts.next() {
        Some(p) => p.map_err(|_| bad())?,
        None => 0.0,
    };
    if parts.next().is_some() {
        return Err(bad());
    }
    Ok(c64(re, im))
}

/// A node together with the shift its source prescribes, if any.
struct Model {
    node: StateSpaceNode,
    /// Closed-form minimal shift for plant inputs.
    formula_e: Option<(CMat, &'static str)>,
    beam: Option<BeamModel>,
}

fn beam_parameters(file: Option<&io::BeamFile>, args: Option<&BeamArgs>) -> BeamParameters {
    let mut p = BeamParameters::default();
    if let Some(f) = file {
        p.rho_a = f.rho_a.unwrap_or(p.rho_a);
        p.ei = f.ei.unwrap_or(p.ei);
        p.ebar_i = f.ebar_i.unwrap_or(p.ebar_i);
        p.n_modes = f.n_modes.unwrap_or(p.n_modes);
    }
    if let Some(a) = args {
        p.rho_a = a.rho_a.unwrap_or(p.rho_a);
        p.ei = a.ei.unwrap_or(p.ei);
        p.ebar_i = a.ebar_i.unwrap_or(p.ebar_i);
        p.n_modes = a.n_modes.unwrap_or(p.n_modes);
    }
    p
}

fn model_from_document(doc: InputDocument, beam_args: Option<&BeamArgs>) -> Result<Model> {
    match doc {
        InputDocument::Node(node) => Ok(Model {
            node: *node,
            formula_e: None,
            beam: None,
        }),
        InputDocument::Plant(file) => {
            let plant = SecondOrderPlant::from_file(&file)?;
            let (node, e, method) = if plant.c1.is_some() {
                let (node, e) = second_order::build_two_channel(&plant)?;
                (node, e, "two-channel plant formula")
            } else if plant.b0.is_some() {
                let (node, e) = second_order::build_noncolocated(&plant)?;
                (node, e, "non-colocated plant formula")
            } else {
                let node = second_order::build_colocated(&plant)?;
                let m = node.inputs();
                (node, linalg::zeros(m, m), "colocated plant")
            };
            Ok(Model {
                node,
                formula_e: Some((e, method)),
                beam: None,
            })
        }
        InputDocument::Beam(file) => beam_document(Some(&file), beam_args),
    }
}

fn beam_document(file: Option<&io::BeamFile>, args: Option<&BeamArgs>) -> Result<Model> {
    let beam = second_order::beam_model(beam_parameters(file, args), BeamSensor::default())?;
    let m = beam.node.inputs();
    Ok(Model {
        node: beam.node.clone(),
        formula_e: Some((linalg::zeros(m, m), "colocated plant")),
        beam: Some(beam),
    })
}

fn load_model(common: &Common) -> Result<Model> {
    let path = common
        .input
        .as_deref()
        .ok_or_else(|| Error::InvalidArgument("missing input file".into()))?;
    model_from_document(io::load_document(path)?, None)
}

fn load_e(common: &Common, m: usize) -> Result<Option<CMat>> {
    let Some(path) = &common.e_matrix else {
        return Ok(None);
    };
    let e = io::load_matrix(path)?;
    if e.shape() != (m, m) {
        return Err(Error::DimensionMismatch(format!(
            "E is {}x{}, node has {m} inputs",
            e.nrows(),
            e.ncols()
        )));
    }
    Ok(Some(e))
}

/// Closed-form minimal shift: plant formula, else ESAD, self-adjoint, then
/// colocated at `iω`.
fn auto_minimal_e(model: &Model, omega: f64) -> Result<(CMat, &'static str)> {
    if let Some((e, method)) = &model.formula_e {
        return Ok((e.clone(), method));
    }
    let node = &model.node;
    if let Ok(e) = passivity::minimal_e_esad(node) {
        return Ok((e, "essentially skew-adjoint dissipative"));
    }
    if let Ok(e) = passivity::minimal_e_selfadjoint(node) {
        return Ok((e, "self-adjoint dissipative"));
    }
    passivity::minimal_e_colocated_at(node, omega).map(|e| (e, "colocated at i*omega"))
}

fn shift_or_auto(model: &Model, common: &Common) -> Result<CMat> {
    match load_e(common, model.node.inputs())? {
        Some(e) => Ok(e),
        None => auto_minimal_e(model, 0.0).map(|(e, _)| e),
    }
}

fn verdict_word(passive: bool) -> &'static str {
    if passive {
        "passive"
    } else {
        "not passive"
    }
}

fn run_check(
    common: &Common,
    kind: PassivityKind,
    omega: Option<f64>,
    grid: Option<usize>,
    tol: f64,
) -> Result<Outcome> {
    let model = load_model(common)?;
    let e = load_e(common, model.node.inputs())?;
    let cert = match omega {
        Some(w) => {
            if kind != PassivityKind::Impedance {
                return Err(Error::InvalidArgument("--omega applies to impedance checks only".into()));
            }
            let m = model.node.inputs();
            let e = e.clone().unwrap_or_else(|| linalg::zeros(m, m));
            passivity::check_impedance_reciprocal_with(&model.node, &e, w, tol)?
        }
        None => {
            let node = match &e {
                Some(e) => model.node.shift_feedthrough(e)?,
                None => model.node.clone(),
            };
            passivity::check(&node, kind, tol)?
        }
    };
    let mut report = json!({ "certificate": cert.to_value() });
    if let Some(count) = grid {
        let node = match &e {
            Some(e) => model.node.shift_feedthrough(e)?,
            None => model.node.clone(),
        };
        let scan = passivity::positive_real_scan(&node, &passivity::right_half_plane_grid(count))?;
        report["positive_real_scan"] = json!({
            "points": count,
            "min_eigenvalue": scan.min_eigenvalue,
            "argmin": io::complex_to_value(scan.argmin),
        });
    }
    let positive = cert.is_passive();
    Ok(Outcome {
        report,
        positive,
        summary: format!("{} (min eigenvalue {:.3e})", verdict_word(positive), cert.min_eigenvalue),
    })
}

fn run_minimal_e(common: &Common, omega: f64, tol: f64) -> Result<Outcome> {
    let model = load_model(common)?;
    let (e, method) = auto_minimal_e(&model, omega)?;
    let m = model.node.inputs();
    let shifted = model.node.shift_feedthrough(&e)?;
    let cert = passivity::check(&shifted, PassivityKind::Impedance, tol)?;
    let probe = model
        .node
        .shift_feedthrough(&(&e - linalg::identity(m) * c64(PROBE_EPS, 0.0)))?;
    let probe_cert = passivity::check(&probe, PassivityKind::Impedance, tol)?;
    let mut report = passivity::shift_report(&e)?;
    report["method"] = json!(method);
    report["shifted_certificate"] = cert.to_value();
    report["probe_epsilon"] = json!(PROBE_EPS);
    report["probe_passive"] = json!(probe_cert.is_passive());
    let positive = cert.is_passive();
    Ok(Outcome {
        report,
        positive,
        summary: format!("{method}; shifted node {}", verdict_word(positive)),
    })
}

fn run_cayley(common: &Common, alpha: Complex64, kind: PassivityKind, tol: f64) -> Result<Outcome> {
    let model = load_model(common)?;
    let node = match load_e(common, model.node.inputs())? {
        Some(e) => model.node.shift_feedthrough(&e)?,
        None => model.node.clone(),
    };
    let disc = cayley::internal_cayley(&node, alpha)?;
    let discrete = cayley::check_discrete_passivity_with(&disc, kind, tol)?;
    let continuous = passivity::check(&node, kind, tol)?;
    let report = json!({
        "discrete_system": disc.to_value(),
        "discrete_certificate": discrete.to_value(),
        "continuous_certificate": continuous.to_value(),
        "verdicts_agree": discrete.verdict == continuous.verdict,
    });
    let positive = discrete.is_passive();
    Ok(Outcome {
        report,
        positive,
        summary: format!("discrete system {}", verdict_word(positive)),
    })
}

fn run_feedback(common: &Common, kappa: Option<f64>, k: Option<f64>, tol: f64) -> Result<Outcome> {
    let model = load_model(common)?;
    if let Some(k) = k {
        if kappa.is_some() {
            return Err(Error::InvalidArgument("--k and --kappa are exclusive".into()));
        }
        let node = match load_e(common, model.node.inputs())? {
            Some(e) => model.node.shift_feedthrough(&e)?,
            None => model.node.clone(),
        };
        let s = feedback::diagonal_transform_with(&node, k, tol)?;
        let cert = passivity::check(&s, PassivityKind::Scattering, tol)?;
        let positive = cert.is_passive();
        return Ok(Outcome {
            report: json!({
                "k": k,
                "node": io::node_to_value(&s),
                "certificate": cert.to_value(),
            }),
            positive,
            summary: format!("diagonal transform scattering {}", verdict_word(positive)),
        });
    }
    let kappa = kappa.ok_or_else(|| Error::InvalidArgument("feedback needs --kappa or --k".into()))?;
    let e = shift_or_auto(&model, common)?;
    let synthesis = feedback::stabilizing_feedback_with(&model.node, &e, kappa, tol)?;
    let contraction = synthesis.closed_loop.is_contraction(tol);
    let mut report = synthesis.to_value();
    report["closed_loop_contraction"] = json!(contraction);
    Ok(Outcome {
        report,
        positive: contraction,
        summary: format!(
            "closed loop at kappa={kappa} {}",
            if contraction { "dissipative" } else { "not dissipative" }
        ),
    })
}

fn run_stability(common: &Common, kappa: f64, tol: f64) -> Result<Outcome> {
    let model = load_model(common)?;
    let e = shift_or_auto(&model, common)?;
    let report = stability::stability_verdict_with(&model.node, &e, kappa, tol)?;
    Ok(Outcome {
        positive: report.is_stable(),
        summary: format!("{:?}", report.verdict),
        report: report.to_value(),
    })
}

fn parse_z0(spec: &str, n: usize) -> Result<CVec> {
    let text = if spec.trim_start().starts_with('[') {
        spec.to_string()
    } else {
        io::read_text(Path::new(spec))?
    };
    let v = io::parse_value(&text)?;
    let items = v
        .as_array()
        .ok_or_else(|| Error::Schema("z0 must be an array".into()))?;
    if items.len() != n {
        return Err(Error::DimensionMismatch(format!("z0 has {} entries, node has {n} states", items.len())));
    }
    let entries = items
        .iter()
        .map(|x| io::complex_from_value("z0", x))
        .collect::<Result<Vec<_>>>()?;
    Ok(CVec::from_vec(entries))
}

fn run_simulate(
    common: &Common,
    kind: PassivityKind,
    t_final: f64,
    steps: Option<usize>,
    z0: Option<&str>,
    signal: Option<&Path>,
    csv: Option<&Path>,
) -> Result<Outcome> {
    let model = load_model(common)?;
    let node = &model.node;
    let e = load_e(common, node.inputs())?;
    let steps = steps.unwrap_or_else(|| (2000.0 * t_final).ceil().max(2.0) as usize);
    let z0 = match z0 {
        Some(s) => parse_z0(s, node.states())?,
        None => CVec::zeros(node.states()),
    };
    let signal = match signal {
        Some(path) => {
            let s = SampledSignal::from_value(&io::parse_value(&io::read_text(path)?)?)?;
            if s.dim() != node.inputs() {
                return Err(Error::DimensionMismatch(format!(
                    "input signal has {} channels, node has {}",
                    s.dim(),
                    node.inputs()
                )));
            }
            Some(s)
        }
        None => None,
    };
    let m = node.inputs();
    let traj = sim::simulate(
        node,
        &z0,
        |t| match &signal {
            Some(s) => s.eval(t),
            None => CVec::zeros(m),
        },
        t_final,
        steps,
    )?;
    let audit = match kind {
        PassivityKind::Impedance => sim::energy_audit(&traj, node.weight(), e.as_ref()),
        PassivityKind::Scattering => sim::scattering_audit(&traj, node.weight()),
    };
    if let Some(path) = csv {
        io::write_text(path, &sim::trajectory_csv(&traj, Some(&audit.defect)))?;
    }
    let final_state: Vec<Value> = traj.final_state().iter().map(|&z| io::complex_to_value(z)).collect();
    let report = json!({
        "kind": kind,
        "t_final": t_final,
        "steps": steps,
        "audit": audit.to_value(),
        "final_state": final_state,
        "final_energy": node.energy(traj.final_state()),
    });
    let positive = audit.passed();
    Ok(Outcome {
        report,
        positive,
        summary: format!(
            "audit {} (min defect {:.3e})",
            if positive { "passed" } else { "failed" },
            audit.min_defect
        ),
    })
}

fn run_beam(common: &Common, args: &BeamArgs, kappa: f64, tol: f64) -> Result<Outcome> {
    let model = match &common.input {
        Some(path) => match io::load_document(path)? {
            InputDocument::Beam(file) => beam_document(Some(&file), Some(args))?,
            _ => return Err(Error::Schema("beam input must be a beam preset".into())),
        },
        None => beam_document(None, Some(args))?,
    };
    let beam = model.beam.as_ref().expect("beam document");
    let e = match load_e(common, model.node.inputs())? {
        Some(e) => e,
        None => linalg::zeros(model.node.inputs(), model.node.inputs()),
    };
    let open_loop = passivity::check(&model.node, PassivityKind::Impedance, tol)?;
    let report = stability::stability_verdict_with(&model.node, &e, kappa, tol)?;
    let root_residual = beam
        .modes
        .iter()
        .filter(|m| m.beta > 0.0)
        .map(|m| ((2.0 * m.beta).cos() - 1.0 / (2.0 * m.beta).cosh()).abs())
        .fold(0.0, f64::max);
    let mut out = beam.to_value();
    out["open_loop_certificate"] = open_loop.to_value();
    out["characteristic_residual"] = json!(root_residual);
    out["stability"] = report.to_value();
    Ok(Outcome {
        positive: report.is_stable(),
        summary: format!("{:?} at kappa={kappa}", report.verdict),
        report: out,
    })
}
