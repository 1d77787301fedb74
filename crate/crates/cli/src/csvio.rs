//! Fixed-schema CSV reading and writing.

use std::fs::File;
use std::io::{self, BufWriter, Read, Write};
use std::path::Path;
use std::str::FromStr;

use spatial_hom::units::{density_per_m_to_per_um, per_m_to_per_um, per_um_to_per_m};
use spatial_hom::{EventRecord, InterferencePattern, Outcome};

use crate::CliError;

pub const FISHER_HEADER: [&str; 2] = ["delta_theta_mrad", "fisher_rad2"];
pub const PATTERN_HEADER: [&str; 4] = ["delta_k_per_um", "counts", "exposure", "model_density"];
pub const EVENTS_HEADER: [&str; 3] = ["event_index", "delta_k_per_um", "outcome"];
pub const SURFACE_HEADER: [&str; 3] = ["sigma_k_per_um", "d_mm", "fisher_rad2"];
pub const STUDY_HEADER: [&str; 2] = ["trial", "estimate_mrad"];

fn open_output(path: Option<&Path>) -> Result<Box<dyn Write>, CliError> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).map_err(|e| CliError::Config(format!("cannot create {}: {e}", p.display())))?,
        )),
        None => Box::new(io::stdout().lock()),
    })
}

/// Writes a header and rows with `,` separators and LF line endings.
pub fn write_csv<I>(path: Option<&Path>, header: &[&str], rows: I) -> Result<(), CliError>
where
    I: IntoIterator<Item = Vec<String>>,
{
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(open_output(path)?);
    let io_err = |e: csv::Error| CliError::Config(format!("write failed: {e}"));
    w.write_record(header).map_err(io_err)?;
    for row in rows {
        w.write_record(&row).map_err(io_err)?;
    }
    w.flush().map_err(|e| CliError::Config(format!("write failed: {e}")))
}

pub fn pattern_rows(p: &InterferencePattern) -> impl Iterator<Item = Vec<String>> + '_ {
    (0..p.bin_centers.len()).map(move |i| {
        let density = p.model_overlay.as_ref().map(|o| density_per_m_to_per_um(o[i]).to_string()).unwrap_or_default();
        vec![per_m_to_per_um(p.bin_centers[i]).to_string(), p.counts[i].to_string(), p.exposure[i].to_string(), density]
    })
}

pub fn event_rows(events: &[EventRecord]) -> impl Iterator<Item = Vec<String>> + '_ {
    events.iter().enumerate().map(|(i, e)| {
        vec![i.to_string(), per_m_to_per_um(e.delta_k).to_string(), e.outcome.detectors().to_string()]
    })
}

/// Contents of a CSV file recognized by its header.
pub enum Table {
    Events(Vec<EventRecord>),
    /// Centers (m⁻¹), counts, exposure and the optional model density (m).
    Pattern { centers: Vec<f64>, counts: Vec<u64>, exposure: Vec<u64>, density: Option<Vec<f64>> },
}

fn field<T: FromStr>(rec: &csv::StringRecord, i: usize, name: &str, origin: &str) -> Result<T, CliError> {
    let line = rec.position().map_or(0, |p| p.line());
    let raw = rec.get(i).unwrap_or("");
    raw.trim()
        .parse()
        .map_err(|_| CliError::Config(format!("{origin}:{line}: column '{name}': invalid value '{raw}'")))
}

pub fn read_table<R: Read>(reader: R, origin: &str) -> Result<Table, CliError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let malformed = |e: csv::Error| {
        let line = e.position().map_or(0, |p| p.line());
        CliError::Config(format!("{origin}:{line}: malformed CSV: {e}"))
    };
    let header: Vec<String> = rdr.headers().map_err(malformed)?.iter().map(|h| h.trim().to_string()).collect();
    let is = |schema: &[&str]| header.len() == schema.len() && header.iter().zip(schema).all(|(a, b)| a == b);
    if is(&EVENTS_HEADER) {
        let mut events = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(malformed)?;
            let dk: f64 = field(&rec, 1, "delta_k_per_um", origin)?;
            let code: u8 = field(&rec, 2, "outcome", origin)?;
            let outcome = Outcome::from_detectors(code).ok_or_else(|| {
                let line = rec.position().map_or(0, |p| p.line());
                CliError::Config(format!("{origin}:{line}: column 'outcome': expected 0, 1 or 2, got {code}"))
            })?;
            if !dk.is_finite() {
                let line = rec.position().map_or(0, |p| p.line());
                return Err(CliError::Config(format!("{origin}:{line}: column 'delta_k_per_um': not finite")));
            }
            events.push(EventRecord { delta_k: per_um_to_per_m(dk), outcome });
        }
        return Ok(Table::Events(events));
    }
    if is(&PATTERN_HEADER) {
        let (mut centers, mut counts, mut exposure, mut density) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
        let mut has_density = true;
        for rec in rdr.records() {
            let rec = rec.map_err(malformed)?;
            centers.push(per_um_to_per_m(field(&rec, 0, "delta_k_per_um", origin)?));
            counts.push(field(&rec, 1, "counts", origin)?);
            exposure.push(field(&rec, 2, "exposure", origin)?);
            if rec.get(3).map_or(true, |s| s.trim().is_empty()) {
                has_density = false;
            } else {
                density.push(field::<f64>(&rec, 3, "model_density", origin)? / density_per_m_to_per_um(1.0));
            }
        }
        return Ok(Table::Pattern { centers, counts, exposure, density: has_density.then_some(density) });
    }
    Err(CliError::Config(format!(
        "{origin}:1: unrecognized header '{}'; expected '{}' or '{}'",
        header.join(","),
        EVENTS_HEADER.join(","),
        PATTERN_HEADER.join(",")
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reads_events() {
        let t = read_table("event_index,delta_k_per_um,outcome\n0,0.01,2\n1,-0.02,0\n".as_bytes(), "x").unwrap();
        let Table::Events(ev) = t else { panic!() };
        assert_eq!(ev.len(), 2);
        assert_eq!(ev[0].outcome, Outcome::TwoDetectors);
        assert!((ev[1].delta_k + 2e4).abs() < 1e-9);
    }

    #[test]
    fn reports_line_numbers() {
        let err = read_table("event_index,delta_k_per_um,outcome\n0,0.01,2\n1,abc,0\n".as_bytes(), "ev.csv");
        match err {
            Err(CliError::Config(m)) => assert!(m.starts_with("ev.csv:3:"), "{m}"),
            _ => panic!(),
        }
        let err = read_table("event_index,delta_k_per_um,outcome\n0,0.01,7\n".as_bytes(), "ev.csv");
        assert!(matches!(err, Err(CliError::Config(m)) if m.starts_with("ev.csv:2:")));
        assert!(read_table("a,b\n1,2\n".as_bytes(), "x").is_err());
    }

    #[test]
    fn pattern_without_density() {
        let t = read_table("delta_k_per_um,counts,exposure,model_density\n0.0,1,10,\n0.1,2,10,\n".as_bytes(), "p").unwrap();
        let Table::Pattern { density, counts, .. } = t else { panic!() };
        assert!(density.is_none());
        assert_eq!(counts, vec![1, 2]);
    }
}
