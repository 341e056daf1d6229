use std::fmt::Write as _;

use serde::Serialize;

use super::complexity::{mac_count, param_count, StageCounts};
use super::geometry::{final_geometry, rf_ratio, Percent};
use super::spec::FullModelSpec;
use super::AnalysisError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AnalysisReport {
    pub name: String,
    pub input_size: (usize, usize),
    pub params: u64,
    pub macs: u64,
    pub flops: u64,
    pub n_conv: usize,
    /// Shared kernel size of the counted convolutions, if there is exactly one.
    pub kernel: Option<usize>,
    pub rf: usize,
    pub rf_ratio: Percent,
    pub seq_len: usize,
    pub params_by_stage: StageCounts,
    pub macs_by_stage: StageCounts,
}

pub fn report(spec: &FullModelSpec) -> Result<AnalysisReport, AnalysisError> {
    spec.validate()?;
    let g = final_geometry(&spec.encoder)?;
    let params = param_count(spec);
    let macs = mac_count(spec)?;
    let mut kernels = Vec::new();
    for l in &spec.encoder.layers {
        l.spatial_kernels(&mut kernels);
    }
    kernels.sort_unstable();
    kernels.dedup();
    Ok(AnalysisReport {
        name: spec.name().to_string(),
        input_size: spec.encoder.input_size,
        params: params.total,
        macs: macs.total,
        flops: 2 * macs.total,
        n_conv: spec.encoder.layers.iter().map(|l| l.conv_count()).sum(),
        kernel: (kernels.len() == 1).then(|| kernels[0]),
        rf: g.rf,
        rf_ratio: rf_ratio(&spec.encoder)?,
        seq_len: g.out_size.0 * g.out_size.1,
        params_by_stage: params,
        macs_by_stage: macs,
    })
}

fn millions(n: u64) -> String {
    format!("{:.2}M", n as f64 / 1e6)
}

fn giga(n: u64) -> String {
    format!("{:.2}G", n as f64 / 1e9)
}

/// Aligned text table, one row per report.
pub fn render_table(reports: &[AnalysisReport]) -> String {
    let header = [
        "Model",
        "#Param.",
        "MAC",
        "#Conv.",
        "Kernel",
        "RF",
        "RF ratio (%)",
        "N",
    ];
    let rows: Vec<[String; 8]> = reports
        .iter()
        .map(|r| {
            [
                r.name.clone(),
                millions(r.params),
                giga(r.macs),
                r.n_conv.to_string(),
                r.kernel.map_or_else(|| "-".to_string(), |k| k.to_string()),
                r.rf.to_string(),
                r.rf_ratio.to_string(),
                r.seq_len.to_string(),
            ]
        })
        .collect();
    let mut widths = header.map(str::len);
    for row in &rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.len());
        }
    }
    let mut out = String::new();
    let mut line = |cells: &[&str]| {
        for (i, (c, w)) in cells.iter().zip(widths).enumerate() {
            if i == 0 {
                let _ = write!(out, "{c:<w$}");
            } else {
                let _ = write!(out, "  {c:>w$}");
            }
        }
        out.push('\n');
    };
    line(&header);
    for row in &rows {
        line(&row.each_ref().map(String::as_str));
    }
    out
}
