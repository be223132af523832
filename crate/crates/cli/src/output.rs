//! CSV tables with `#` metadata lines.
//!
//! Numbers use Rust's shortest round-trip formatting, which is
//! locale-independent and parses back to the same `f64`.

use std::io::Write;

use crate::sweep::SweepRow;
use anyhow::Result;
use ghostsnr::simulator::{GhostImage, SnrReport};

pub const TOOL: &str = concat!("ghostsnr ", env!("CARGO_PKG_VERSION"));

pub const SWEEP_HEADER: &str =
    "series,source,axis,value,protocol,mu,modes_per_pixel,eta1,eta2,resolution_cells,frames,\
pump_mu_variance,illumination,analytic_snr_per_sqrt_frame,mc_snr_per_sqrt_frame,mc_stderr,mc_replicas";

pub const IMAGE_HEADER: &str = "protocol,cell,x,y,value,flagged";

pub const REPORT_HEADER: &str =
    "protocol,mean_in,mean_out,var_in,var_out,contrast,noise,snr,degenerate,cells_in,cells_out,frames_used";

/// Writes `# tool=`, `# seed=` and one `# key=<json>` line per entry.
pub fn write_metadata<W: Write>(out: &mut W, seed: u64, entries: &[(&str, serde_json::Value)]) -> Result<()> {
    writeln!(out, "# tool={TOOL}")?;
    writeln!(out, "# seed={seed}")?;
    for (key, value) in entries {
        writeln!(out, "# {key}={value}")?;
    }
    Ok(())
}

fn opt(v: Option<impl std::fmt::Display>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

/// Series names are quoted when they contain a separator or a quote.
fn field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn write_sweep<W: Write>(out: &mut W, rows: &[SweepRow]) -> Result<()> {
    writeln!(out, "{SWEEP_HEADER}")?;
    for r in rows {
        let p = &r.params;
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            field(&r.series),
            p.source,
            r.axis.label(),
            r.value,
            r.protocol.label(),
            p.mu,
            p.modes_per_pixel,
            p.eta1,
            p.eta2,
            p.resolution_cells,
            p.frames,
            p.pump_mu_variance,
            p.illumination(),
            opt(r.analytic),
            opt(r.mc.map(|m| m.snr_per_sqrt_frame)),
            opt(r.mc.map(|m| m.stderr)),
            opt(r.mc.map(|m| m.replicas)),
        )?;
    }
    Ok(())
}

pub fn write_image_header<W: Write>(out: &mut W) -> Result<()> {
    writeln!(out, "{IMAGE_HEADER}")?;
    Ok(())
}

pub fn write_image_rows<W: Write>(out: &mut W, image: &GhostImage) -> Result<()> {
    for (cell, (&v, &flag)) in image.values.iter().zip(&image.flagged).enumerate() {
        let (x, y) = (cell % image.width, cell / image.width);
        writeln!(out, "{},{cell},{x},{y},{v},{}", image.kind.label(), u8::from(flag))?;
    }
    Ok(())
}

pub fn write_reports<W: Write>(out: &mut W, reports: &[SnrReport]) -> Result<()> {
    writeln!(out, "{REPORT_HEADER}")?;
    for r in reports {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            r.kind.label(),
            r.mean_in,
            r.mean_out,
            r.var_in,
            r.var_out,
            r.contrast,
            r.noise,
            r.snr,
            u8::from(r.degenerate),
            r.cells_in,
            r.cells_out,
            r.frames_used
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sweep::{run_sweep, Axis, RunMode, SweepSpec};
    use ghostsnr::protocols::ProtocolKind;
    use ghostsnr::{ExperimentParams, SourceKind};

    #[test]
    fn sweep_csv_round_trips_numbers() {
        let spec = SweepSpec {
            series: "a,b".into(),
            axis: Axis::Illumination,
            values: vec![0.1, 1.0 / 3.0],
            fixed: ExperimentParams::new(SourceKind::Thermal, 1.0, 3, 0.7, 10, 100).unwrap(),
            protocols: vec![ProtocolKind::Covariance],
            sources: vec![SourceKind::Thermal],
            mode: RunMode::Analytic,
            replicas: 1,
            seed: 0,
        };
        let rows = run_sweep(&spec).unwrap();
        let mut buf = Vec::new();
        write_metadata(&mut buf, 5, &[("spec", serde_json::to_value(&spec).unwrap())]).unwrap();
        write_sweep(&mut buf, &rows).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
        assert_eq!(lines[0], SWEEP_HEADER);
        let ncol = SWEEP_HEADER.split(',').count();
        let last = lines[2];
        assert!(last.starts_with("\"a,b\",thermal,illumination,"));
        let cols: Vec<&str> = last.rsplitn(ncol - 1, ',').collect();
        let analytic: f64 = cols[3].parse().unwrap();
        assert_eq!(analytic, rows[1].analytic.unwrap());
        assert!(text.contains("# seed=5"));
        assert!(text.contains(&format!("# tool={TOOL}")));
    }
}
