//! Plot-ready text emission: evaluation reports, training history, and
//! letter overlays. Columns are tab-separated with a header line.

use csipos_core::evalkit::EvalReport;
use csipos_core::trainer::EpochStats;
use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

/// Writes the three report files into `dir`:
/// `errors.tsv` (per-sample errors), `cdf.tsv` (error_mm, fraction), and
/// `summary.tsv` (one line: me_mm, me_lambda, n_antennas, fingerprint).
pub fn write_eval_report(report: &EvalReport, dir: &Path) -> io::Result<()> {
    let mut errors = String::from("error_mm\n");
    for e in &report.per_sample_error_mm {
        let _ = writeln!(errors, "{e:.6}");
    }
    fs::write(dir.join("errors.tsv"), errors)?;

    let mut cdf = String::from("error_mm\tfraction\n");
    for p in &report.cdf {
        let _ = writeln!(cdf, "{:.6}\t{:.9}", p.error_mm, p.fraction);
    }
    fs::write(dir.join("cdf.tsv"), cdf)?;

    let mut summary =
        String::from("me_mm\tme_lambda\tn_antennas\tconfig_fingerprint\ttrainable_params\n");
    let params = report
        .param_count
        .map_or("-".to_string(), |p| p.trainable.to_string());
    let _ = writeln!(
        summary,
        "{:.6}\t{:.6}\t{}\t{:016x}\t{}",
        report.me_mm, report.me_lambda, report.n_antennas, report.config_fingerprint, params
    );
    fs::write(dir.join("summary.tsv"), summary)?;
    Ok(())
}

/// Training history table: epoch, train_loss, val_loss, val_me_mm.
pub fn write_history(history: &[EpochStats], path: &Path) -> io::Result<()> {
    let mut out = String::from("epoch\ttrain_loss\tval_loss\tval_me_mm\n");
    for h in history {
        let _ = writeln!(
            out,
            "{}\t{:.9e}\t{:.9e}\t{:.6}",
            h.epoch, h.train_loss, h.val_loss, h.val_me_mm
        );
    }
    fs::write(path, out)
}

/// Letter waypoints, optionally with per-point predictions.
pub fn write_letter_overlay(
    waypoints: &[[f64; 2]],
    overlay: Option<&[LetterOverlayRow]>,
    dir: &Path,
) -> io::Result<()> {
    let mut wp = String::from("x_mm\ty_mm\n");
    for p in waypoints {
        let _ = writeln!(wp, "{:.3}\t{:.3}", p[0], p[1]);
    }
    fs::write(dir.join("letters.tsv"), wp)?;

    if let Some(rows) = overlay {
        let mut out = String::from(
            "waypoint_x\twaypoint_y\tsample_x\tsample_y\tpred_x\tpred_y\terror_mm\n",
        );
        for r in rows {
            let _ = writeln!(
                out,
                "{:.3}\t{:.3}\t{:.3}\t{:.3}\t{:.3}\t{:.3}\t{:.6}",
                r.waypoint[0],
                r.waypoint[1],
                r.sample[0],
                r.sample[1],
                r.prediction[0],
                r.prediction[1],
                r.error_mm
            );
        }
        fs::write(dir.join("letters_overlay.tsv"), out)?;
    }
    Ok(())
}

/// One waypoint of the letter demonstration: the nearest dataset sample and
/// the model's prediction for it.
#[derive(Debug, Clone, Copy)]
pub struct LetterOverlayRow {
    pub waypoint: [f64; 2],
    pub sample: [f64; 2],
    pub prediction: [f64; 2],
    pub error_mm: f64,
}
