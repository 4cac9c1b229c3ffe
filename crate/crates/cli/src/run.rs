use std::fs;
use std::io::Write;
use std::path::Path;

use crn_core::audit::{self, AuditReport, AuditThresholds, NewtonStats};
use crn_core::baselines;
use crn_core::io::{self, Layout, Table};
use crn_core::parser::{self, LoadError};
use crn_core::scheme::Record;
use crn_core::{simulate, EquilibriumState, ReactionNetwork, SolverOptions, StepReport};
use serde_json::json;

use crate::{write_all, CliError, Format, RunArgs, Scheme, SimulateArgs, Style, EXIT_AUDIT, EXIT_INVALID, EXIT_SOLVER, EXIT_USAGE};

pub struct Loaded {
    pub network: ReactionNetwork,
    pub c0: Option<Vec<f64>>,
}

/// Reads and parses a network file. Parse errors are reported as
/// `path:line:column: message`.
pub fn load_network(path: &Path, default_rates: Option<(f64, f64)>) -> Result<Loaded, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::new(EXIT_USAGE, format!("cannot read {}: {e}", path.display())))?;
    match parser::load(&text, default_rates) {
        Ok((network, c0)) => Ok(Loaded { network, c0 }),
        Err(LoadError::Parse(e)) => Err(CliError::new(EXIT_INVALID, format!("{}:{e}", path.display()))),
        Err(LoadError::Model(e)) => Err(CliError::new(EXIT_INVALID, format!("{}: {e}", path.display()))),
    }
}

/// A validated network, initial state and equilibrium.
pub(crate) struct Prepared {
    pub network: ReactionNetwork,
    pub c0: Vec<f64>,
    pub eq: EquilibriumState,
    pub opts: SolverOptions,
}

pub(crate) fn prepare(args: &RunArgs) -> Result<Prepared, CliError> {
    let invalid = |msg: String| CliError::new(EXIT_INVALID, msg);
    if !(args.dt > 0.0 && args.dt.is_finite()) {
        return Err(invalid(format!("--dt must be positive and finite, got {}", args.dt)));
    }
    if !(args.t_end >= 0.0 && args.t_end.is_finite()) {
        return Err(invalid(format!("--t-end must be nonnegative and finite, got {}", args.t_end)));
    }
    if let Some(tol) = args.tol {
        if !(tol > 0.0 && tol.is_finite()) {
            return Err(invalid(format!("--tol must be positive, got {tol}")));
        }
    }
    let loaded = load_network(&args.network, args.default_rates)?;
    let network = loaded.network;
    let c0 = loaded.c0.ok_or_else(|| {
        invalid(format!("{}: no `init` lines, so there is no initial state", args.network.display()))
    })?;
    let eq = match &args.c_inf {
        Some(crate::Values(v)) => {
            if v.len() != network.n_species() {
                return Err(invalid(format!(
                    "--c-inf has {} values but the network has {} species",
                    v.len(),
                    network.n_species()
                )));
            }
            EquilibriumState::new(&network, v.clone()).map_err(|e| invalid(format!("--c-inf: {e}")))?
        }
        None => network.solve_equilibrium().map_err(|e| invalid(format!("equilibrium: {e}")))?,
    };
    let opts = SolverOptions {
        tol: args.tol,
        max_newton: args.max_newton,
        predictor: args.predictor,
    };
    Ok(Prepared { network, c0, eq, opts })
}

/// A finished or interrupted run of one scheme.
pub struct RunOutput {
    pub scheme: Scheme,
    pub dt: f64,
    pub records: Vec<Record>,
    /// Newton reports, trajectory scheme only.
    pub steps: Vec<StepReport>,
    pub failure: Option<String>,
}

impl RunOutput {
    pub fn layout(&self, network: &ReactionNetwork) -> Layout {
        Layout {
            species: network.species().to_vec(),
            reaction_ids: if self.scheme == Scheme::Trajectory {
                network.reaction_ids().to_vec()
            } else {
                Vec::new()
            },
            n_conservation: network.conservation_basis().dim(),
        }
    }
}

pub(crate) fn run_scheme(p: &Prepared, scheme: Scheme, dt: f64, t_end: f64) -> RunOutput {
    let (records, steps, failure) = match scheme {
        Scheme::Trajectory => match simulate(&p.network, &p.c0, &p.eq, dt, t_end, &p.opts) {
            Ok(r) => (r.records, r.steps, None),
            Err(f) => {
                let msg = format!("step {}: {}", f.step, f.source);
                (f.partial.records, f.partial.steps, Some(msg))
            }
        },
        Scheme::ExplicitEuler | Scheme::ImplicitEuler => {
            let run = if scheme == Scheme::ExplicitEuler {
                baselines::explicit_euler(&p.network, &p.c0, &p.eq, dt, t_end)
            } else {
                baselines::implicit_euler(&p.network, &p.c0, &p.eq, dt, t_end)
            };
            match run {
                Ok(r) => (r.records, Vec::new(), None),
                Err(f) => (f.partial.records, Vec::new(), Some(f.source.to_string())),
            }
        }
    };
    RunOutput {
        scheme,
        dt,
        records,
        steps,
        failure,
    }
}

pub(crate) fn audit_run(p: &Prepared, run: &RunOutput, thresholds: AuditThresholds) -> AuditReport {
    let basis = p.network.conservation_basis();
    let trajectory = audit::audit_trajectory(&p.network, &p.eq, &basis, &run.records);
    let newton = (run.scheme == Scheme::Trajectory).then(|| NewtonStats::from_reports(&run.steps));
    audit::evaluate(trajectory, newton, thresholds, p.network.species())
}

/// Runs one scheme, writes the trajectory and checks the audit.
pub fn cmd_simulate(
    args: &SimulateArgs,
    out: &mut dyn Write,
    err: &mut dyn Write,
    style: Style,
) -> Result<(), CliError> {
    for (flag, v) in [
        ("--max-energy-increase", args.max_energy_increase),
        ("--max-conservation", args.max_conservation),
    ] {
        if !(v >= 0.0) {
            return Err(CliError::new(EXIT_INVALID, format!("{flag} must be nonnegative, got {v}")));
        }
    }
    let p = prepare(&args.run)?;
    let run = run_scheme(&p, args.scheme, args.run.dt, args.run.t_end);
    let thresholds = AuditThresholds {
        max_energy_increase: args.max_energy_increase,
        max_conservation: args.max_conservation,
    };
    let report = audit_run(&p, &run, thresholds);
    let table = Table {
        layout: run.layout(&p.network),
        records: run.records.clone(),
        truncated: run.failure.is_some(),
    };
    let text = match args.format {
        Format::Csv => io::write_csv(&table),
        Format::Json => {
            let meta = json!({
                "network": args.run.network.display().to_string(),
                "scheme": args.scheme.name(),
                "dt": args.run.dt,
                "t_end": args.run.t_end,
                "tol": args.run.tol,
                "species": p.network.species(),
                "reaction_ids": p.network.reaction_ids(),
                "c0": p.c0,
                "c_inf": p.eq.c_inf(),
                "conservation_basis": p.network.conservation_basis().vectors,
                "failure": run.failure,
            });
            io::write_json(&meta, &table, &run.steps, &report)
        }
    };
    match &args.out {
        Some(path) => fs::write(path, &text)
            .map_err(|e| CliError::new(EXIT_USAGE, format!("cannot write {}: {e}", path.display())))?,
        None => write_all(out, text.as_bytes())?,
    }

    if !args.quiet {
        let t = &report.trajectory;
        let max_cons = t.conservation.iter().cloned().fold(0.0, f64::max);
        let _ = writeln!(
            err,
            "{}: {} rows, max energy increase {:.3e}, min concentration {:.3e}, max conservation drift {:.3e}",
            style.heading("audit"),
            t.rows,
            t.max_energy_increase,
            t.min_concentration,
            max_cons
        );
        if let Some(n) = &report.newton {
            let _ = writeln!(
                err,
                "newton: {} steps, {} iterations (max {} per step), {} backtracks",
                n.steps, n.total_iters, n.max_iters, n.total_backtracks
            );
        }
        for f in &report.failures {
            let _ = writeln!(err, "{}: {f}", style.warn("audit failure"));
        }
        if report.passed() && run.failure.is_none() {
            let _ = writeln!(err, "{}", style.ok("audit passed"));
        }
    }

    if let Some(msg) = run.failure {
        return Err(CliError::new(
            EXIT_SOLVER,
            format!("{} solver failed at {msg}; output truncated", args.scheme),
        ));
    }
    if !report.passed() {
        return Err(CliError::new(
            EXIT_AUDIT,
            format!("audit failed: {}", report.failures.join("; ")),
        ));
    }
    Ok(())
}
