use std::fmt::Write;
use std::path::Path;

use crn_core::io::format_value;

use crate::run::load_network;
use crate::{CliError, Style, EXIT_INVALID};

/// Text report on a network file: sizes, `S`, rank, conservation basis and
/// the computed equilibrium with its detailed-balance residual.
pub fn cmd_check(path: &Path, default_rates: Option<(f64, f64)>, style: Style) -> Result<String, CliError> {
    let loaded = load_network(path, default_rates)?;
    let net = &loaded.network;
    let eq = net
        .solve_equilibrium()
        .map_err(|e| CliError::new(EXIT_INVALID, format!("{}: {e}", path.display())))?;
    let basis = net.conservation_basis();
    let species = net.species();
    let ids = net.reaction_ids();

    let mut s = String::new();
    let _ = writeln!(s, "{} {}", style.heading("network"), path.display());
    let _ = writeln!(s, "N = {} species: {}", net.n_species(), species.join(", "));
    let _ = writeln!(s, "M = {} reactions: {}", net.n_reactions(), ids.join(", "));

    let _ = writeln!(s, "{}", style.heading("stoichiometric matrix S (rows: species, columns: reactions)"));
    let name_w = species.iter().map(String::len).max().unwrap_or(0);
    let col_w = ids
        .iter()
        .map(String::len)
        .chain(net.stoich().iter().flatten().map(|v| v.to_string().len()))
        .max()
        .unwrap_or(1);
    let _ = write!(s, "  {:name_w$}", "");
    for id in ids {
        let _ = write!(s, " {id:>col_w$}");
    }
    s.push('\n');
    for (name, row) in species.iter().zip(net.stoich()) {
        let _ = write!(s, "  {name:name_w$}");
        for v in row {
            let _ = write!(s, " {v:>col_w$}");
        }
        s.push('\n');
    }
    let _ = writeln!(s, "rank = {}", net.rank());

    let _ = writeln!(s, "{} (dimension {})", style.heading("conservation basis"), basis.dim());
    for (k, g) in basis.vectors.iter().enumerate() {
        let entries: Vec<String> = g.iter().map(i64::to_string).collect();
        let _ = writeln!(s, "  gamma_{} = ({})", k + 1, entries.join(", "));
    }

    let _ = writeln!(s, "{}", style.heading("equilibrium c_inf"));
    for (name, v) in species.iter().zip(eq.c_inf()) {
        let _ = writeln!(s, "  {name:name_w$} = {}", format_value(*v));
    }
    let (l, residual) = net.detailed_balance_residual(eq.c_inf());
    let _ = writeln!(
        s,
        "detailed-balance residual: {residual:.3e} (largest at reaction {})",
        ids[l]
    );

    if let Some(c0) = &loaded.c0 {
        let totals: Vec<String> = basis.totals(c0).iter().map(|v| format_value(*v)).collect();
        let _ = writeln!(s, "conserved totals at c0: ({})", totals.join(", "));
    }
    Ok(s)
}
