use std::io::Write;

use crate::error::Result;
use crate::stepper::SchemeState;

use super::study::{ConvergenceRow, StudyFailure};
use super::verify::VerifyReport;

/// The `#` comment line that opens every CSV file.
#[derive(Debug, Clone, PartialEq)]
pub struct Header {
    pub seed: u64,
    pub config: Vec<(String, String)>,
}

impl Header {
    pub fn new(seed: u64, config: Vec<(String, String)>) -> Self {
        Header { seed, config }
    }

    pub fn line(&self) -> String {
        let cfg: Vec<String> = self
            .config
            .iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect();
        format!(
            "# fracscheme {} seed={:#x} config={}",
            env!("CARGO_PKG_VERSION"),
            self.seed,
            cfg.join(";")
        )
    }
}

fn fmt_f64(v: f64) -> String {
    format!("{v:e}")
}

fn writer<W: Write>(mut out: W, header: &Header) -> Result<csv::Writer<W>> {
    writeln!(out, "{}", header.line())?;
    Ok(csv::Writer::from_writer(out))
}

/// `level, t, node_index, x, value` for every stored level. In 2D the `x`
/// column holds both coordinates separated by a space.
pub fn write_run_csv<W: Write>(out: W, header: &Header, state: &SchemeState) -> Result<()> {
    let mut w = writer(out, header)?;
    w.write_record(["level", "t", "node_index", "x", "value"])?;
    let grid = state.grid();
    let h = state.params().h();
    for (m, field) in state.history().iter().enumerate() {
        let t = fmt_f64(m as f64 * h);
        for (i, v) in field.values().iter().enumerate() {
            let x = grid.coords(i);
            let xs = x[..grid.dim()]
                .iter()
                .map(|c| fmt_f64(*c))
                .collect::<Vec<_>>()
                .join(" ");
            w.write_record([m.to_string(), t.clone(), i.to_string(), xs, fmt_f64(*v)])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Study rows; a failed study ends with a `# FAILED` comment line.
pub fn write_convergence_csv<W: Write>(
    out: W,
    header: &Header,
    rows: &[ConvergenceRow],
    failure: Option<&StudyFailure>,
) -> Result<()> {
    let mut w = writer(out, header)?;
    w.write_record([
        "alpha",
        "h",
        "sup_error",
        "l2_error",
        "observed_order",
        "spatial_floor_flag",
    ])?;
    for r in rows {
        w.write_record([
            r.alpha.to_string(),
            fmt_f64(r.h),
            fmt_f64(r.sup_error),
            fmt_f64(r.l2_error),
            r.observed_order
                .map(|q| format!("{q:.6}"))
                .unwrap_or_default(),
            u8::from(r.spatial_floor).to_string(),
        ])?;
    }
    w.flush()?;
    let mut inner = w.into_inner().map_err(|e| e.into_error())?;
    if let Some(f) = failure {
        writeln!(
            inner,
            "# FAILED alpha={} h={}: {}",
            f.alpha,
            fmt_f64(f.h),
            f.message.replace('\n', " ")
        )?;
    }
    inner.flush()?;
    Ok(())
}

pub fn write_verify_csv<W: Write>(out: W, header: &Header, report: &VerifyReport) -> Result<()> {
    let mut w = writer(out, header)?;
    w.write_record(["check_name", "paper_ref", "margin", "pass"])?;
    for c in &report.checks {
        w.write_record([
            c.name.clone(),
            c.statement.to_string(),
            fmt_f64(c.margin),
            c.pass.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
