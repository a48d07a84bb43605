//! Trajectory CSV persistence. Numbers are written with Rust's shortest
//! round-trip formatting, so re-reading a file reproduces the exact `f64`
//! values and a re-fit of the rate is bit-identical.

use std::path::Path;

use iqcert::algorithms::Trajectory;

use crate::CliError;

pub const CSV_HEADER: &str = "k,err_y,lyap,ratio";

/// Writes a trajectory as `k,err_y,lyap,ratio`; the `lyap` and `ratio`
/// columns stay empty when no certificate was attached, and `ratio` for row
/// `k` is the transformed-norm ratio of step `k−1 → k` (empty below the
/// recording floor).
pub fn write_trajectory(path: &Path, traj: &Trajectory<f64>, header_only: bool) -> Result<(), CliError> {
    let mut out = String::with_capacity(32 * traj.y_errors.len() + 16);
    out.push_str(CSV_HEADER);
    out.push('\n');
    if !header_only {
        const RATIO_FLOOR: f64 = 1e-10;
        for (k, err) in traj.y_errors.iter().enumerate() {
            out.push_str(&format!("{k},{err}"));
            match traj.lyap_values.get(k) {
                Some(v) => out.push_str(&format!(",{v}")),
                None => out.push(','),
            }
            let ratio = if k == 0 {
                None
            } else {
                match (traj.lyap_values.get(k - 1), traj.lyap_values.get(k)) {
                    (Some(&prev), Some(&cur)) if prev.sqrt() > RATIO_FLOOR => {
                        Some(cur.sqrt() / prev.sqrt())
                    }
                    _ => None,
                }
            };
            match ratio {
                Some(r) => out.push_str(&format!(",{r}\n")),
                None => out.push_str(",\n"),
            }
        }
    }
    std::fs::write(path, out)
        .map_err(|e| CliError::Config(format!("cannot write {}: {e}", path.display())))
}
