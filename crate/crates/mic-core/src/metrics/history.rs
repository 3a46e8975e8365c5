//! Training history CSV persistence.
//!
//! Format: the exact header `epoch,lr,train_loss,train_acc,val_loss,val_acc`
//! followed by one newline-terminated row per epoch with 6-decimal
//! fixed-point floats.

use std::path::Path;

use crate::error::{Error, Result};
use crate::optim::{EpochRecord, TrainingHistory};

pub const HISTORY_CSV_HEADER: &str = "epoch,lr,train_loss,train_acc,val_loss,val_acc";

pub fn history_to_csv(history: &TrainingHistory) -> String {
    let mut out = String::with_capacity(64 * (history.len() + 1));
    out.push_str(HISTORY_CSV_HEADER);
    out.push('\n');
    for r in &history.epochs {
        out.push_str(&format!(
            "{},{:.6},{:.6},{:.6},{:.6},{:.6}\n",
            r.epoch, r.lr, r.train_loss, r.train_acc, r.val_loss, r.val_acc
        ));
    }
    out
}

pub fn write_history_csv(history: &TrainingHistory, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, history_to_csv(history))?;
    Ok(())
}

pub fn read_history_csv(path: impl AsRef<Path>) -> Result<TrainingHistory> {
    let text = std::fs::read_to_string(path)?;
    parse_history_csv(&text)
}

pub fn parse_history_csv(text: &str) -> Result<TrainingHistory> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header == HISTORY_CSV_HEADER => {}
        Some((_, other)) => {
            return Err(Error::Csv {
                line: 1,
                msg: format!("bad header `{other}`"),
            })
        }
        None => {
            return Err(Error::Csv {
                line: 1,
                msg: "empty file".into(),
            })
        }
    }

    let mut history = TrainingHistory::default();
    for (idx, line) in lines {
        let line_no = idx + 1;
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 6 {
            return Err(Error::Csv {
                line: line_no,
                msg: format!("expected 6 fields, got {}", fields.len()),
            });
        }
        let epoch: u32 = fields[0].parse().map_err(|e| Error::Csv {
            line: line_no,
            msg: format!("epoch: {e}"),
        })?;
        let mut nums = [0.0f64; 5];
        for (slot, raw) in nums.iter_mut().zip(&fields[1..]) {
            *slot = raw.parse().map_err(|e| Error::Csv {
                line: line_no,
                msg: format!("`{raw}`: {e}"),
            })?;
        }
        history.epochs.push(EpochRecord {
            epoch,
            lr: nums[0],
            train_loss: nums[1],
            train_acc: nums[2],
            val_loss: nums[3],
            val_acc: nums[4],
        });
    }
    history.validate()?;
    Ok(history)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(epoch: u32, scale: f64) -> EpochRecord {
        EpochRecord {
            epoch,
            lr: 0.001 * scale,
            train_loss: 1.5 / scale,
            train_acc: 0.5 + 0.01 * scale,
            val_loss: 1.7 / scale,
            val_acc: 0.4 + 0.01 * scale,
        }
    }

    #[test]
    fn single_row_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("history.csv");
        let history = TrainingHistory {
            epochs: vec![row(1, 1.0)],
        };
        write_history_csv(&history, &path).unwrap();
        let back = read_history_csv(&path).unwrap();
        assert_eq!(back.len(), 1);
        assert!((back.epochs[0].lr - 0.001).abs() < 1e-9);
    }

    #[test]
    fn header_is_byte_exact() {
        let history = TrainingHistory {
            epochs: vec![row(1, 1.0)],
        };
        let text = history_to_csv(&history);
        assert!(text.starts_with("epoch,lr,train_loss,train_acc,val_loss,val_acc\n"));
        assert!(text.ends_with('\n'));
        // lr renders in fixed-point, not scientific.
        assert!(text.contains(",0.001000,"), "{text}");
    }

    #[test]
    fn twenty_four_rows_round_trip_at_six_decimals() {
        let history = TrainingHistory {
            epochs: (1..=24).map(|e| row(e, e as f64)).collect(),
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("h.csv");
        write_history_csv(&history, &path).unwrap();
        let back = read_history_csv(&path).unwrap();
        assert_eq!(back.len(), 24);
        for (a, b) in history.epochs.iter().zip(&back.epochs) {
            assert_eq!(a.epoch, b.epoch);
            for (x, y) in [
                (a.lr, b.lr),
                (a.train_loss, b.train_loss),
                (a.train_acc, b.train_acc),
                (a.val_loss, b.val_loss),
                (a.val_acc, b.val_acc),
            ] {
                assert!((x - y).abs() <= 5e-7, "{x} vs {y}");
            }
        }
        // Writing the parsed history again is byte-stable.
        let again = history_to_csv(&back);
        assert_eq!(std::fs::read_to_string(&path).unwrap(), again);
    }

    #[test]
    fn malformed_rows_name_the_line() {
        let text = "epoch,lr,train_loss,train_acc,val_loss,val_acc\n1,0.001,1.0,0.5,1.1,0.4\n2,oops,1.0,0.5,1.1,0.4\n";
        match parse_history_csv(text) {
            Err(Error::Csv { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected Csv error, got {other:?}"),
        }
        let text = "epoch,lr\n";
        assert!(matches!(
            parse_history_csv(text),
            Err(Error::Csv { line: 1, .. })
        ));
        let text = "epoch,lr,train_loss,train_acc,val_loss,val_acc\n1,0.001,1.0\n";
        assert!(matches!(
            parse_history_csv(text),
            Err(Error::Csv { line: 2, .. })
        ));
    }

    #[test]
    fn non_consecutive_epochs_rejected() {
        let text = "epoch,lr,train_loss,train_acc,val_loss,val_acc\n2,0.001,1.0,0.5,1.1,0.4\n";
        assert!(parse_history_csv(text).is_err());
    }
}
