use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::{ExperimentError, OutcomeCategory, SweepReport, SweepRow};

pub const PER_IMAGE_FILE: &str = "per_image.csv";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const TRACE_FILE: &str = "trace.csv";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ReportOptions {
    /// When false every millisecond column is written as 0, making reruns
    /// byte-identical.
    pub timing: bool,
}

impl Default for ReportOptions {
    fn default() -> Self {
        Self { timing: true }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReportFiles {
    pub per_image: PathBuf,
    pub summary: PathBuf,
    pub trace: PathBuf,
}

/// Category counts for one `t`.
#[derive(Clone, Debug, PartialEq)]
pub struct CellSummary {
    pub t: u64,
    pub q: u64,
    pub counts: [usize; 5],
    pub mean_ms_enc: f64,
    pub min_nb: f64,
}

impl CellSummary {
    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    pub fn count(&self, c: OutcomeCategory) -> usize {
        self.counts[c.index()]
    }

    /// Percentage of the cell's images in category `c`.
    pub fn percent(&self, c: OutcomeCategory) -> f64 {
        percent(self.count(c), self.total())
    }
}

pub fn percent(count: usize, total: usize) -> f64 {
    if total == 0 {
        0.0
    } else {
        100.0 * count as f64 / total as f64
    }
}

pub(crate) fn summarize_cell(t: u64, q: u64, rows: &[SweepRow]) -> CellSummary {
    let mut counts = [0usize; 5];
    for r in rows {
        counts[r.record.category.index()] += 1;
    }
    CellSummary {
        t,
        q,
        counts,
        mean_ms_enc: rows.iter().map(|r| r.ms_enc).sum::<f64>() / rows.len().max(1) as f64,
        min_nb: rows.iter().map(|r| r.min_nb).fold(f64::INFINITY, f64::min),
    }
}

/// One summary per `t`, in sweep order.
pub fn summarize(report: &SweepReport) -> Vec<CellSummary> {
    report
        .moduli
        .iter()
        .map(|&(t, q)| {
            let rows: Vec<SweepRow> = report.rows.iter().filter(|r| r.t == t).cloned().collect();
            summarize_cell(t, q, &rows)
        })
        .collect()
}

fn ms(v: f64, opts: ReportOptions) -> String {
    if opts.timing {
        format!("{v:.3}")
    } else {
        "0".into()
    }
}

fn per_image_csv(report: &SweepReport, opts: ReportOptions) -> String {
    let mut out = String::from("image_id,t,true,std_pred,enc_pred,category,min_nb,ms_std,ms_enc\n");
    for r in &report.rows {
        let rec = &r.record;
        writeln!(
            out,
            "{},{},{},{},{},{},{:.4},{},{}",
            rec.image_id,
            r.t,
            rec.true_label,
            rec.standard_pred,
            rec.encrypted_pred,
            rec.category,
            r.min_nb,
            ms(r.ms_std, opts),
            ms(r.ms_enc, opts)
        )
        .expect("write to string");
    }
    out
}

/// Header of the summary file; percentages follow the counts.
pub fn summary_header() -> String {
    let mut cols = vec!["t".to_string(), "q".into(), "images".into()];
    cols.extend(OutcomeCategory::ALL.iter().map(|c| c.as_str().to_string()));
    cols.extend(OutcomeCategory::ALL.iter().map(|c| format!("pct_{c}")));
    cols.join(",")
}

/// Percentages are printed with four decimals.
pub fn format_percent(v: f64) -> String {
    format!("{v:.4}")
}

fn summary_csv(report: &SweepReport) -> String {
    let mut out = summary_header();
    out.push('\n');
    for cell in summarize(report) {
        let mut fields = vec![cell.t.to_string(), cell.q.to_string(), cell.total().to_string()];
        fields.extend(cell.counts.iter().map(usize::to_string));
        fields.extend(OutcomeCategory::ALL.iter().map(|&c| format_percent(cell.percent(c))));
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

fn trace_csv(report: &SweepReport, opts: ReportOptions) -> String {
    let run_id = format!("{}-s{}", report.model, report.seed);
    let mut out = String::from("run_id,image_id,t,layer,step,nb_bits,ms\n");
    for r in &report.rows {
        for rec in &r.trace {
            writeln!(
                out,
                "{run_id},{},{},{},{},{:.4},{}",
                r.record.image_id,
                r.t,
                rec.layer,
                rec.step,
                rec.nb_bits,
                ms(rec.ms, opts)
            )
            .expect("write to string");
        }
    }
    out
}

fn write(path: &Path, contents: &str) -> Result<(), ExperimentError> {
    fs::write(path, contents).map_err(|source| ExperimentError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Writes `per_image.csv`, `summary.csv` and `trace.csv` into `dir`,
/// creating it if needed.
pub fn emit_report(
    report: &SweepReport,
    dir: impl AsRef<Path>,
    opts: ReportOptions,
) -> Result<ReportFiles, ExperimentError> {
    if report.rows.is_empty() {
        return Err(ExperimentError::EmptyReport);
    }
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|source| ExperimentError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let files = ReportFiles {
        per_image: dir.join(PER_IMAGE_FILE),
        summary: dir.join(SUMMARY_FILE),
        trace: dir.join(TRACE_FILE),
    };
    write(&files.per_image, &per_image_csv(report, opts))?;
    write(&files.summary, &summary_csv(report))?;
    write(&files.trace, &trace_csv(report, opts))?;
    Ok(files)
}
