//! Aligned text tables for the terminal and CSV files for plotting.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DVector;

use super::archive::SeriesBands;
use crate::error::Result;

/// Right-aligned columns under a header, numbers with six decimals.
pub fn table(header: &[String], rows: &[Vec<String>]) -> String {
    let widths: Vec<usize> = (0..header.len())
        .map(|j| rows.iter().map(|r| r[j].len()).chain([header[j].len()]).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    let line = |cells: &[String], out: &mut String| {
        let parts: Vec<String> = cells.iter().zip(&widths).map(|(c, w)| format!("{c:>w$}")).collect();
        let _ = writeln!(out, "{}", parts.join("  "));
    };
    line(header, &mut out);
    for r in rows {
        line(r, &mut out);
    }
    out
}

pub fn num(v: f64) -> String {
    format!("{v:.6}")
}

pub fn irf_table(names: &[String], psi: &[DVector<f64>]) -> String {
    let header: Vec<String> = std::iter::once("h".to_string()).chain(names.iter().cloned()).collect();
    let rows: Vec<Vec<String>> = psi
        .iter()
        .enumerate()
        .map(|(h, p)| std::iter::once(h.to_string()).chain(p.iter().map(|v| num(*v))).collect())
        .collect();
    table(&header, &rows)
}

pub fn band_table(sb: &SeriesBands, level: usize) -> String {
    let t = &sb.levels[level];
    let header: Vec<String> = ["h", "estimate", "pw_lo", "pw_hi", "supt_lo", "supt_hi", "bonf_lo", "bonf_hi"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let rows: Vec<Vec<String>> = (0..t.pointwise.center.len())
        .map(|j| {
            vec![
                t.pointwise.coords[j].horizon.to_string(),
                num(t.pointwise.center[j]),
                num(t.pointwise.lower(j)),
                num(t.pointwise.upper(j)),
                num(t.supt.lower(j)),
                num(t.supt.upper(j)),
                num(t.bonferroni.lower(j)),
                num(t.bonferroni.upper(j)),
            ]
        })
        .collect();
    format!(
        "{} response of {} (alpha {}, sup-t cv {:.4}, Bonferroni cv {:.4})\n{}",
        sb.functional,
        sb.series,
        t.supt.alpha,
        t.supt.critical_value,
        t.bonferroni.critical_value,
        table(&header, &rows)
    )
}

/// One row per (functional, series, horizon, alpha) with the three bands.
pub fn write_bands_csv(path: &Path, bands: &[SeriesBands]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "functional",
        "series",
        "horizon",
        "alpha",
        "center",
        "pointwise_lower",
        "pointwise_upper",
        "supt_lower",
        "supt_upper",
        "bonferroni_lower",
        "bonferroni_upper",
    ])?;
    for sb in bands {
        for t in &sb.levels {
            for j in 0..t.pointwise.center.len() {
                w.write_record([
                    sb.functional.clone(),
                    sb.series.clone(),
                    t.pointwise.coords[j].horizon.to_string(),
                    t.pointwise.alpha.to_string(),
                    t.pointwise.center[j].to_string(),
                    t.pointwise.lower(j).to_string(),
                    t.pointwise.upper(j).to_string(),
                    t.supt.lower(j).to_string(),
                    t.supt.upper(j).to_string(),
                    t.bonferroni.lower(j).to_string(),
                    t.bonferroni.upper(j).to_string(),
                ])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}
