//! Touchstone v1 (`.sNp`) import and export.
//!
//! Files are written with the option line `# GHZ S RI R 50`. Two-ports use
//! the conventional `S11 S21 S12 S22` ordering on one line; larger networks
//! write one matrix row per line group, at most four pairs per line.
//! The reader also accepts `HZ/KHZ/MHZ` units and `MA`/`DB` formats.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use num_complex::Complex64;
use thiserror::Error;

use super::{default_labels, NetworkError, SMatrix};
use crate::grid::FrequencyGrid;

pub const OPTION_LINE: &str = "# GHZ S RI R 50";

#[derive(Debug, Error)]
pub enum TouchstoneError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("cannot infer port count from file name {0:?} (expected .sNp)")]
    UnknownExtension(String),
    #[error("data holds {values} numbers, not a whole number of {n_ports}-port records")]
    PortCount { n_ports: usize, values: usize },
    #[error("line {line}: frequency {frequency} Hz does not exceed the previous point")]
    NotAscending { line: usize, frequency: f64 },
    #[error(transparent)]
    Network(#[from] NetworkError),
}

#[derive(Clone, Copy)]
enum Format {
    RealImag,
    MagAngle,
    DbAngle,
}

/// Render a network as Touchstone text. `comments` become `!` lines.
pub fn to_touchstone_string(s: &SMatrix, comments: &[&str]) -> String {
    let n = s.n_ports();
    let mut out = String::new();
    for c in comments {
        let _ = writeln!(out, "! {c}");
    }
    let _ = writeln!(out, "! ports: {}", s.port_labels().join(", "));
    let _ = writeln!(out, "{OPTION_LINE}");
    let pair = |out: &mut String, z: Complex64| {
        let _ = write!(out, " {:e} {:e}", z.re, z.im);
    };
    for (k, f) in s.grid().iter().enumerate() {
        let m = s.at(k);
        let _ = write!(out, "{:e}", f / 1e9);
        if n == 2 {
            for (i, j) in [(0, 0), (1, 0), (0, 1), (1, 1)] {
                pair(&mut out, m[(i, j)]);
            }
            out.push('\n');
            continue;
        }
        for i in 0..n {
            if i > 0 {
                out.push_str("   ");
            }
            for j in 0..n {
                if j > 0 && j % 4 == 0 {
                    out.push_str("\n   ");
                }
                pair(&mut out, m[(i, j)]);
            }
            out.push('\n');
        }
    }
    out
}

pub fn write_touchstone(s: &SMatrix, path: &Path, comments: &[&str]) -> Result<(), TouchstoneError> {
    fs::write(path, to_touchstone_string(s, comments))?;
    Ok(())
}

/// Conventional extension for an `n`-port file, e.g. `s3p`.
pub fn extension(n_ports: usize) -> String {
    format!("s{n_ports}p")
}

/// Read a file, taking the port count from its `.sNp` extension.
pub fn read_touchstone(path: &Path) -> Result<SMatrix, TouchstoneError> {
    let ext = path.extension().and_then(|e| e.to_str()).unwrap_or_default().to_ascii_lowercase();
    let n_ports = ext
        .strip_prefix('s')
        .and_then(|rest| rest.strip_suffix('p'))
        .and_then(|digits| digits.parse::<usize>().ok())
        .filter(|&n| n > 0)
        .ok_or_else(|| TouchstoneError::UnknownExtension(path.display().to_string()))?;
    parse_touchstone(&fs::read_to_string(path)?, n_ports)
}

pub fn parse_touchstone(text: &str, n_ports: usize) -> Result<SMatrix, TouchstoneError> {
    let mut scale = 1e9;
    let mut format = Format::MagAngle;
    let mut seen_option = false;
    // (line number, value)
    let mut values: Vec<(usize, f64)> = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('!').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(options) = line.strip_prefix('#') {
            if seen_option {
                continue;
            }
            seen_option = true;
            let mut tokens = options.split_whitespace().map(str::to_ascii_uppercase);
            while let Some(tok) = tokens.next() {
                match tok.as_str() {
                    "HZ" => scale = 1.0,
                    "KHZ" => scale = 1e3,
                    "MHZ" => scale = 1e6,
                    "GHZ" => scale = 1e9,
                    "S" => {}
                    "Y" | "Z" | "H" | "G" => {
                        return Err(TouchstoneError::Malformed {
                            line: line_no,
                            message: format!("only S-parameters are supported, found {tok}"),
                        })
                    }
                    "RI" => format = Format::RealImag,
                    "MA" => format = Format::MagAngle,
                    "DB" => format = Format::DbAngle,
                    "R" => {
                        tokens.next();
                    }
                    other => {
                        return Err(TouchstoneError::Malformed {
                            line: line_no,
                            message: format!("unrecognised option {other:?}"),
                        })
                    }
                }
            }
            continue;
        }
        for tok in line.split_whitespace() {
            let v: f64 = tok
                .parse()
                .map_err(|_| TouchstoneError::Malformed { line: line_no, message: format!("not a number: {tok:?}") })?;
            values.push((line_no, v));
        }
    }

    let record = 1 + 2 * n_ports * n_ports;
    if values.is_empty() || !values.len().is_multiple_of(record) {
        return Err(TouchstoneError::PortCount { n_ports, values: values.len() });
    }

    let mut freqs = Vec::with_capacity(values.len() / record);
    let mut data = Vec::with_capacity(values.len() / record);
    for chunk in values.chunks(record) {
        let (line, f) = (chunk[0].0, chunk[0].1 * scale);
        if let Some(&prev) = freqs.last() {
            if !(f > prev) {
                return Err(TouchstoneError::NotAscending { line, frequency: f });
            }
        }
        freqs.push(f);
        let mut m = DMatrix::from_element(n_ports, n_ports, Complex64::new(0.0, 0.0));
        for (idx, pair) in chunk[1..].chunks(2).enumerate() {
            let z = decode(format, pair[0].1, pair[1].1);
            let (i, j) =
                if n_ports == 2 { [(0, 0), (1, 0), (0, 1), (1, 1)][idx] } else { (idx / n_ports, idx % n_ports) };
            m[(i, j)] = z;
        }
        data.push(m);
    }
    let grid = FrequencyGrid::new(freqs)
        .map_err(|e| TouchstoneError::Malformed { line: values[0].0, message: e.to_string() })?;
    Ok(SMatrix::new(grid, data, default_labels(n_ports))?)
}

fn decode(format: Format, x: f64, y: f64) -> Complex64 {
    match format {
        Format::RealImag => Complex64::new(x, y),
        Format::MagAngle => Complex64::from_polar(x, y.to_radians()),
        Format::DbAngle => Complex64::from_polar(10f64.powf(x / 20.0), y.to_radians()),
    }
}
