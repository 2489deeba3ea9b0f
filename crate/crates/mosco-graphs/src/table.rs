//! `convergence.csv`.

use std::io::Write;

use anyhow::Result;
use mosco_graphs_core::ConvergenceRecord;

pub const HEADER: [&str; 10] = [
    "n",
    "m",
    "l",
    "k",
    "lambda",
    "test_vector",
    "resolvent_error",
    "form_value",
    "exact_form",
    "wall_ms",
];

/// 17 significant digits.
pub fn float(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "nan".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

pub fn write_records<W: Write>(out: W, records: &[ConvergenceRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(HEADER)?;
    for r in records {
        w.write_record([
            r.index.n.to_string(),
            opt(r.index.m),
            opt(r.index.l),
            opt(r.index.k),
            float(r.lambda),
            r.test_vector.clone(),
            float(r.resolvent_error),
            float(r.form_value),
            float(r.exact_form),
            float(r.wall_ms),
        ])?;
    }
    w.flush()?;
    Ok(())
}
