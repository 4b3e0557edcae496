//! Report export: tab-separated tables plus a plain-text summary.
//!
//! Every table file starts with a `# config_sha256=<hex>` line followed by
//! the column header. Wall-clock times are never written, so identical inputs
//! give identical bytes.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use ms3l_core::eval::{
    ablation_table, comparison_table, counts_table, entropy, histogram_table, losses_table, AblationRow,
    ComparisonRow,
};
use ms3l_core::trainer::IterationReport;

use crate::Error;

pub struct ReportInputs<'a> {
    pub digest: &'a str,
    pub ms3l: &'a [IterationReport],
    pub dagger: Option<&'a [IterationReport]>,
    pub comparison: &'a [ComparisonRow],
    /// Named 20-bin angular-label histograms.
    pub histograms: &'a [(&'a str, Vec<u64>)],
    pub ablation: Option<&'a [AblationRow]>,
}

fn summary(r: &ReportInputs<'_>) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "config_sha256 {}", r.digest);
    let total = |reports: &[IterationReport]| -> (usize, usize) {
        (reports.iter().map(|x| x.recorded).sum(), reports.iter().map(|x| x.encountered).sum())
    };
    let (rec, enc) = total(r.ms3l);
    let _ = writeln!(s, "MS3L: {} iterations, {rec} of {enc} frames recorded", r.ms3l.len());
    for it in r.ms3l {
        let _ = writeln!(
            s,
            "  iteration {}: recorded {} / {}, aggregate {}, nav val {:.6}, collisions {}{}",
            it.iteration,
            it.recorded,
            it.encountered,
            it.aggregate,
            it.nav_val_loss,
            it.collisions,
            if it.iteration > 0 && it.recorded == 0 { " (nothing kept)" } else { "" }
        );
    }
    if let Some(d) = r.dagger {
        let (drec, _) = total(d);
        let ratio = if drec > 0 { rec as f64 / drec as f64 } else { f64::NAN };
        let _ = writeln!(s, "DAgger: {drec} frames recorded; MS3L / DAgger = {ratio:.4}");
    }
    for row in r.comparison {
        let _ = writeln!(
            s,
            "{} on {}: distance {:.3} m, time to collision {:.3} s",
            row.policy, row.task, row.mean_distance, row.mean_time
        );
    }
    for (name, h) in r.histograms {
        if h.iter().sum::<u64>() == 0 {
            let _ = writeln!(s, "angular entropy {name}: no samples");
        } else {
            let _ = writeln!(s, "angular entropy {name}: {:.6} nats", entropy(h));
        }
    }
    if let Some(rows) = r.ablation {
        for row in rows {
            let _ = writeln!(
                s,
                "beta {}: recorded {}, distance {:.3} m, time {:.3} s",
                row.beta, row.recorded, row.mean_distance, row.mean_time
            );
        }
    }
    s
}

/// Writes the report files into `dir` (created if missing) and returns their paths.
pub fn export_report(dir: &Path, r: &ReportInputs<'_>) -> Result<Vec<PathBuf>, Error> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let head = format!("# config_sha256={}\n", r.digest);
    let mut runs: Vec<(&str, &[IterationReport])> = vec![("MS3L", r.ms3l)];
    if let Some(d) = r.dagger {
        runs.push(("DAgger", d));
    }
    let hist: Vec<(&str, &[u64])> = r.histograms.iter().map(|(n, h)| (*n, h.as_slice())).collect();
    let mut files = vec![
        ("losses.tsv", head.clone() + &losses_table(r.ms3l)),
        ("counts.tsv", head.clone() + &counts_table(&runs)),
        ("comparison.tsv", head.clone() + &comparison_table(r.comparison)),
        ("histograms.tsv", head.clone() + &histogram_table(&hist)),
    ];
    if let Some(rows) = r.ablation {
        files.push(("ablation.tsv", head.clone() + &ablation_table(rows)));
    }
    files.push(("summary.txt", summary(r)));
    let mut out = Vec::with_capacity(files.len());
    for (name, body) in files {
        let path = dir.join(name);
        std::fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
        out.push(path);
    }
    Ok(out)
}
