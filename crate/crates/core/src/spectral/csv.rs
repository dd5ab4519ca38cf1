//! `frequency_THz,transmission` files, one channel per file.

use std::io::{Read, Write};

use thiserror::Error;

use super::TabulatedCurve;

pub const SPECTRUM_HEADER: [&str; 2] = ["frequency_THz", "transmission"];

/// Parse failure with the 1-based line of the offending record.
#[derive(Debug, Error)]
pub enum SpectrumCsvError {
    #[error("line {line}: {message}")]
    Line { line: u64, message: String },
    #[error("{0}")]
    Format(String),
}

fn line_error(line: u64, message: impl Into<String>) -> SpectrumCsvError {
    SpectrumCsvError::Line {
        line,
        message: message.into(),
    }
}

pub fn parse_spectrum_csv<R: Read>(reader: R) -> Result<TabulatedCurve, SpectrumCsvError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);

    let headers = rdr
        .headers()
        .map_err(|e| line_error(1, e.to_string()))?
        .clone();
    if headers.iter().collect::<Vec<_>>() != SPECTRUM_HEADER {
        return Err(line_error(
            1,
            format!("expected header `{}`", SPECTRUM_HEADER.join(",")),
        ));
    }

    let mut freqs: Vec<f64> = Vec::new();
    let mut trans = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            line_error(line, e.to_string())
        })?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        if record.len() != 2 {
            return Err(line_error(line, format!("expected 2 fields, found {}", record.len())));
        }
        let parse = |k: usize, what: &str| -> Result<f64, SpectrumCsvError> {
            record[k]
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| line_error(line, format!("{what} `{}` is not a number", &record[k])))
        };
        let nu = parse(0, "frequency")?;
        let t = parse(1, "transmission")?;
        if !(0.0..=1.0).contains(&t) {
            return Err(line_error(line, "transmission out of range"));
        }
        if let Some(&prev) = freqs.last() {
            if nu <= prev {
                return Err(line_error(line, "frequency not strictly increasing"));
            }
        }
        freqs.push(nu);
        trans.push(t);
    }
    TabulatedCurve::new(freqs, trans).map_err(|e| SpectrumCsvError::Format(e.to_string()))
}

pub fn write_spectrum_csv<W: Write>(curve: &TabulatedCurve, writer: W) -> csv::Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(SPECTRUM_HEADER)?;
    for (nu, t) in curve.frequencies_thz().iter().zip(curve.transmission()) {
        wtr.write_record([nu.to_string(), t.to_string()])?;
    }
    wtr.flush()?;
    Ok(())
}
