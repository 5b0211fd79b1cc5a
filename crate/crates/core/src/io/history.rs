//! Loss-history CSV files: `iteration,loss,best_loss,wall_ms` with a
//! header row, one row per optimizer iteration.

use crate::error::{Error, Result};
use crate::optimize::LossRow;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

const HEADER: &str = "iteration,loss,best_loss,wall_ms";

pub fn save_history(history: &[LossRow], path: &Path) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "{HEADER}")?;
    for row in history {
        writeln!(
            out,
            "{},{:.17e},{:.17e},{}",
            row.iteration, row.loss, row.best_loss, row.wall_ms
        )?;
    }
    out.flush()?;
    Ok(())
}

pub fn load_history(path: &Path) -> Result<Vec<LossRow>> {
    let reader = BufReader::new(File::open(path)?);
    let mut lines = reader.lines();
    let header = lines.next().transpose()?.unwrap_or_default();
    if header.trim() != HEADER {
        return Err(Error::invalid("missing loss-history header row"));
    }
    let mut rows = Vec::new();
    for (ln, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(Error::invalid(format!("malformed history row {}", ln + 2)));
        }
        let parse_err = |e| Error::invalid(format!("history row {}: {e}", ln + 2));
        rows.push(LossRow {
            iteration: fields[0].trim().parse().map_err(|e| parse_err(format!("{e}")))?,
            loss: fields[1].trim().parse().map_err(|e| parse_err(format!("{e}")))?,
            best_loss: fields[2].trim().parse().map_err(|e| parse_err(format!("{e}")))?,
            wall_ms: fields[3].trim().parse().map_err(|e| parse_err(format!("{e}")))?,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::TempDir;

    #[test]
    fn history_round_trips_exactly() {
        let rows = vec![
            LossRow { iteration: 0, loss: 0.123456789012345678, best_loss: 0.12, wall_ms: 5 },
            LossRow { iteration: 1, loss: 1.5e-7, best_loss: 1.5e-7, wall_ms: 11 },
        ];
        let dir = TempDir::new().unwrap();
        let path = dir.path().join("history.csv");
        save_history(&rows, &path).unwrap();
        let back = load_history(&path).unwrap();
        assert_eq!(back.len(), 2);
        for (a, b) in rows.iter().zip(&back) {
            assert_eq!(a.iteration, b.iteration);
            assert_eq!(a.loss.to_bits(), b.loss.to_bits());
            assert_eq!(a.best_loss.to_bits(), b.best_loss.to_bits());
            assert_eq!(a.wall_ms, b.wall_ms);
        }
    }

    #[test]
    fn headerless_files_are_rejected() {
        let dir = TempDir::new().unwrap();
        let path = dir.path().join("history.csv");
        std::fs::write(&path, "0,1.0,1.0,5\n").unwrap();
        assert!(load_history(&path).is_err());
    }
}
