//! Result files: pretty JSON documents and trajectory CSV.

use std::io::Write;
use std::path::Path;

use resonant_core::dynamics::{StateVector, Trajectory};
use resonant_core::jc::DressedLabel;
use serde::Serialize;

use crate::error::{CliError, CliResult};

/// Writes `value` as pretty JSON with a trailing newline, to stdout when
/// `path` is absent.
pub fn write_json<T: Serialize>(path: Option<&Path>, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Config(format!("cannot serialize result: {e}")))?;
    text.push('\n');
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| CliError::io(p, e)),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| CliError::io("<stdout>", e)),
    }
}

/// Amplitudes as `[re, im]` pairs.
pub fn state_pairs(state: &StateVector) -> Vec<[f64; 2]> {
    state.amplitudes.iter().map(|z| [z.re, z.im]).collect()
}

/// Column order: `first` labels in the given order, then the rest of the
/// basis.
fn column_order(labels: &[DressedLabel], first: &[DressedLabel]) -> Vec<usize> {
    let mut order: Vec<usize> = first
        .iter()
        .filter_map(|l| labels.iter().position(|x| x == l))
        .collect();
    for i in 0..labels.len() {
        if !order.contains(&i) {
            order.push(i);
        }
    }
    order
}

/// Writes `t_ns,p_<label>,…` rows.
pub fn write_trajectory_csv(
    path: &Path,
    trajectory: &Trajectory,
    first: &[DressedLabel],
) -> CliResult<()> {
    let order = column_order(&trajectory.labels, first);
    let io = |e: csv::Error| match e.into_kind() {
        csv::ErrorKind::Io(err) => CliError::io(path, err),
        other => CliError::Config(format!("CSV error: {other:?}")),
    };
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)
        .map_err(io)?;
    let mut header = vec!["t_ns".to_string()];
    header.extend(order.iter().map(|&i| format!("p_{}", trajectory.labels[i])));
    w.write_record(&header).map_err(io)?;
    for (t, pops) in trajectory.times.iter().zip(&trajectory.populations) {
        let mut row = vec![t.to_string()];
        row.extend(order.iter().map(|&i| pops[i].to_string()));
        w.write_record(&row).map_err(io)?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use DressedLabel::{Ground, Minus, Plus};

    #[test]
    fn ladder_columns_first() {
        let labels = DressedLabel::all(2);
        let order = column_order(&labels, &[Ground, Minus(1), Plus(2)]);
        assert_eq!(order, vec![0, 1, 4, 2, 3]);
    }
}
