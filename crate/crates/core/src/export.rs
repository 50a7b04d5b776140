//! Solution CSV: a `# masses=` comment with the W diagonal, a header row with
//! the μ nodes (or `v1 … vn` for models without a grid), then one row per
//! sample `x, ψ_1(x), …, ψ_n(x)`. Numbers use the shortest round-trip form.

use std::fmt::Write as _;

use nalgebra::DVector;

use crate::discretize::DiscreteModel;

pub fn solution_csv(m: &DiscreteModel, xs: &[f64], rows: &[DVector<f64>]) -> String {
    let mut out = String::from("# masses=");
    for (i, w) in m.weights().iter().enumerate() {
        if i > 0 {
            out.push(';');
        }
        let _ = write!(out, "{w:e}");
    }
    out.push_str("\nx");
    match m.grid() {
        Some(g) => {
            for mu in g.nodes() {
                let _ = write!(out, ",{mu:e}");
            }
        }
        None => {
            for i in 0..m.dim() {
                let _ = write!(out, ",v{}", i + 1);
            }
        }
    }
    out.push('\n');
    for (x, row) in xs.iter().zip(rows) {
        let _ = write!(out, "{x:e}");
        for v in row.iter() {
            let _ = write!(out, ",{v:e}");
        }
        out.push('\n');
    }
    out
}

/// `(masses, xs, rows)`.
pub type ParsedSolution = (Vec<f64>, Vec<f64>, Vec<DVector<f64>>);

/// Parses a solution CSV back into its parts.
pub fn parse_solution_csv(text: &str) -> Result<ParsedSolution, String> {
    let mut masses = Vec::new();
    let mut xs = Vec::new();
    let mut rows = Vec::new();
    let mut header = false;
    for line in text.lines() {
        if let Some(rest) = line.strip_prefix("# masses=") {
            masses = rest
                .split(';')
                .map(|s| s.parse::<f64>().map_err(|e| e.to_string()))
                .collect::<Result<_, _>>()?;
            continue;
        }
        if line.starts_with('#') || line.trim().is_empty() {
            continue;
        }
        if !header {
            header = true;
            continue;
        }
        let vals: Vec<f64> = line
            .split(',')
            .map(|s| s.parse::<f64>().map_err(|e| e.to_string()))
            .collect::<Result<_, _>>()?;
        xs.push(vals[0]);
        rows.push(DVector::from_column_slice(&vals[1..]));
    }
    Ok((masses, xs, rows))
}
