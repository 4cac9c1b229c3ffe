use std::fmt::Write;
use std::time::Instant;

use crn_core::audit::AuditThresholds;
use crn_core::io::format_value;

use crate::run::{audit_run, prepare, run_scheme, RunOutput};
use crate::{CliError, CompareArgs, Scheme, Style, EXIT_INVALID, EXIT_SOLVER};

/// One line of the comparison table.
#[derive(Debug, Clone, PartialEq)]
pub struct CompareRow {
    pub scheme: Scheme,
    pub dt: f64,
    pub completed: bool,
    /// `|c(T) - c_ref(T)|_inf`; NaN if the run stopped early.
    pub final_error: f64,
    pub min_concentration: f64,
    pub max_energy_increase: f64,
    pub positive: bool,
    /// `log2(e(2 dt) / e(dt))` against the previous row of the same scheme.
    pub observed_order: Option<f64>,
    pub wall_seconds: f64,
}

/// Runs every requested scheme (and optional dt-halving levels) in
/// parallel against a trajectory-scheme reference at the finest dt / 100.
pub fn compare_rows(args: &CompareArgs) -> Result<Vec<CompareRow>, CliError> {
    if args.schemes.len() < 2 {
        return Err(CliError::new(EXIT_INVALID, "--schemes needs at least two entries"));
    }
    if args.halvings > 20 {
        return Err(CliError::new(EXIT_INVALID, "--halvings is limited to 20"));
    }
    let p = prepare(&args.run)?;
    let dts: Vec<f64> = (0..=args.halvings).map(|k| args.run.dt / f64::from(1u32 << k)).collect();
    let dt_ref = dts[dts.len() - 1] / 100.0;
    let t_end = args.run.t_end;

    let jobs: Vec<(Scheme, f64)> = args
        .schemes
        .iter()
        .flat_map(|&s| dts.iter().map(move |&dt| (s, dt)))
        .collect();
    let timed = |scheme: Scheme, dt: f64| {
        let start = Instant::now();
        let out = run_scheme(&p, scheme, dt, t_end);
        (out, start.elapsed().as_secs_f64())
    };
    let (reference, results) = std::thread::scope(|scope| {
        let reference = scope.spawn(|| timed(Scheme::Trajectory, dt_ref));
        let handles: Vec<_> = jobs
            .iter()
            .map(|&(s, dt)| scope.spawn(move || timed(s, dt)))
            .collect();
        let results: Vec<(RunOutput, f64)> = handles.into_iter().map(|h| h.join().expect("worker panicked")).collect();
        (reference.join().expect("worker panicked").0, results)
    });
    if let Some(msg) = &reference.failure {
        return Err(CliError::new(
            EXIT_SOLVER,
            format!("reference run (trajectory, dt = {dt_ref}) failed at {msg}"),
        ));
    }
    let ref_last = reference.records.last().expect("reference has a row");

    let mut rows: Vec<CompareRow> = Vec::with_capacity(results.len());
    for (run, secs) in results {
        let report = audit_run(&p, &run, AuditThresholds::default());
        let last = run.records.last();
        let same_time = last.is_some_and(|r| (r.t - ref_last.t).abs() <= 1e-9 * ref_last.t.abs().max(1.0));
        let final_error = match last {
            Some(r) if run.failure.is_none() && same_time => {
                r.c.iter().zip(&ref_last.c).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
            }
            _ => f64::NAN,
        };
        let observed_order = rows
            .last()
            .filter(|prev| prev.scheme == run.scheme && prev.dt == 2.0 * run.dt)
            .map(|prev| (prev.final_error / final_error).log2())
            .filter(|p| p.is_finite());
        rows.push(CompareRow {
            scheme: run.scheme,
            dt: run.dt,
            completed: run.failure.is_none(),
            final_error,
            min_concentration: report.trajectory.min_concentration,
            max_energy_increase: report.trajectory.max_energy_increase,
            positive: report.trajectory.first_nonpositive.is_none(),
            observed_order,
            wall_seconds: secs,
        });
    }
    Ok(rows)
}

const HEADER: [&str; 9] = [
    "scheme",
    "dt",
    "completed",
    "final_error",
    "min_c",
    "max_dF",
    "positive",
    "order",
    "wall_ms",
];

fn cells(row: &CompareRow, exact: bool, timing: bool) -> Vec<String> {
    let num = |v: f64| if exact { format_value(v) } else { format!("{v:.4e}") };
    let yes_no = |b: bool| if b { "yes" } else { "no" }.to_string();
    let mut v = vec![
        row.scheme.name().to_string(),
        num(row.dt),
        yes_no(row.completed),
        num(row.final_error),
        num(row.min_concentration),
        num(row.max_energy_increase),
        yes_no(row.positive),
        row.observed_order.map_or("-".into(), |p| format!("{p:.3}")),
    ];
    if timing {
        v.push(format!("{:.1}", row.wall_seconds * 1e3));
    }
    v
}

pub fn cmd_compare(args: &CompareArgs, style: Style) -> Result<String, CliError> {
    let rows = compare_rows(args)?;
    let timing = !args.no_timing;
    let header: Vec<&str> = HEADER[..if timing { 9 } else { 8 }].to_vec();
    let body: Vec<Vec<String>> = rows.iter().map(|r| cells(r, args.csv, timing)).collect();
    let mut s = String::new();
    if args.csv {
        let _ = writeln!(s, "{}", header.join(","));
        for r in &body {
            let _ = writeln!(s, "{}", r.join(","));
        }
        return Ok(s);
    }
    let widths: Vec<usize> = (0..header.len())
        .map(|k| body.iter().map(|r| r[k].len()).chain([header[k].len()]).max().unwrap_or(0))
        .collect();
    let line: Vec<String> = header.iter().zip(&widths).map(|(h, w)| format!("{h:>w$}")).collect();
    let _ = writeln!(s, "{}", style.heading(&line.join("  ")));
    for (row, cols) in rows.iter().zip(&body) {
        let mut parts: Vec<String> = cols.iter().zip(&widths).map(|(c, w)| format!("{c:>w$}")).collect();
        if !row.positive {
            parts[6] = style.warn(&parts[6]);
        }
        let _ = writeln!(s, "{}", parts.join("  "));
    }
    Ok(s)
}
