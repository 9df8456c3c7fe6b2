//! File formats: binary PGM images, the raw `F64F` float container, and
//! CSV convergence reports. Every writer is byte-deterministic.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{FringeError, Result};
use crate::field::{ScalarField, VectorField};
use crate::report::{IterationRecord, RunReport};

const FIELD_MAGIC: &str = "F64F";

pub const REPORT_HEADER: &str =
    "iter,rel_phi,rel_b,rel_a,energy,res_q_phi,res_q_b,res_q_a,q_err,wall_ms";

/// Reads a P5 PGM with maxval 255 or 65535, mapping samples to `[0, 1]`.
pub fn read_pgm(path: impl AsRef<Path>) -> Result<ScalarField> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| FringeError::io(path, e))?;
    parse_pgm(&bytes).map_err(|m| FringeError::format(path, m))
}

fn parse_pgm(bytes: &[u8]) -> std::result::Result<ScalarField, String> {
    let mut pos = 0;
    let mut tokens = Vec::with_capacity(4);
    while tokens.len() < 4 {
        // Whitespace and comments between header tokens.
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|&b| b != b'\n') {
                        pos += 1;
                    }
                }
                Some(_) => break,
                None => return Err("truncated PGM header".into()),
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(|b| !b.is_ascii_whitespace()) {
            pos += 1;
        }
        tokens.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
    }
    if tokens[0] != "P5" {
        return Err(format!("not a binary PGM (magic {:?})", tokens[0]));
    }
    let number = |s: &str, what: &str| {
        s.parse::<usize>()
            .map_err(|_| format!("bad {what} {s:?} in PGM header"))
    };
    let width = number(&tokens[1], "width")?;
    let height = number(&tokens[2], "height")?;
    let maxval = number(&tokens[3], "maxval")?;
    if width == 0 || height == 0 {
        return Err(format!("invalid PGM size {width}x{height}"));
    }
    let sample_bytes = match maxval {
        255 => 1,
        65535 => 2,
        _ => return Err(format!("unsupported maxval {maxval}")),
    };
    // Exactly one whitespace byte separates the header from the raster.
    if !bytes.get(pos).is_some_and(|b| b.is_ascii_whitespace()) {
        return Err("truncated PGM header".into());
    }
    pos += 1;
    let n = width * height;
    let raster = &bytes[pos..];
    if raster.len() < n * sample_bytes {
        return Err(format!(
            "truncated PGM payload: expected {} bytes, got {}",
            n * sample_bytes,
            raster.len()
        ));
    }
    let scale = maxval as f64;
    let values = if sample_bytes == 1 {
        raster[..n].iter().map(|&v| v as f64 / scale).collect()
    } else {
        raster[..2 * n]
            .chunks_exact(2)
            .map(|c| u16::from_be_bytes([c[0], c[1]]) as f64 / scale)
            .collect()
    };
    ScalarField::from_vec(width, height, values).map_err(|e| e.to_string())
}

/// Writes an 8-bit P5 PGM: `round_half_up(clamp(v, 0, 1) * 255)`.
pub fn write_pgm(field: &ScalarField, path: impl AsRef<Path>) -> Result<()> {
    write_pgm_with_maxval(field, path, 255)
}

/// Writes a P5 PGM with maxval 255 or 65535.
pub fn write_pgm_with_maxval(field: &ScalarField, path: impl AsRef<Path>, maxval: u16) -> Result<()> {
    let path = path.as_ref();
    if maxval != 255 && maxval != 65535 {
        return Err(FringeError::format(path, format!("unsupported maxval {maxval}")));
    }
    let scale = maxval as f64;
    let quantize = |v: f64| {
        // NaN clamps to 0.
        let x = (v.clamp(0.0, 1.0) * scale + 0.5).floor();
        if x.is_nan() { 0 } else { x as u16 }
    };
    let mut out = format!("P5\n{} {}\n{}\n", field.width(), field.height(), maxval).into_bytes();
    if maxval == 255 {
        out.extend(field.values().iter().map(|&v| quantize(v) as u8));
    } else {
        for &v in field.values() {
            out.extend_from_slice(&quantize(v).to_be_bytes());
        }
    }
    fs::write(path, out).map_err(|e| FringeError::io(path, e))
}

fn field_bytes(width: usize, height: usize, planes: &[&[f64]]) -> Vec<u8> {
    let header = format!("{FIELD_MAGIC} {width} {height}\n");
    let mut out = Vec::with_capacity(header.len() + 8 * width * height * planes.len());
    out.extend_from_slice(header.as_bytes());
    for plane in planes {
        for v in plane.iter() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

/// Splits an `F64F` file into its dimensions and `planes` raw planes.
fn parse_field(bytes: &[u8], planes: usize) -> std::result::Result<(usize, usize, Vec<f64>), String> {
    let newline = bytes
        .iter()
        .take(64)
        .position(|&b| b == b'\n')
        .ok_or("missing F64F header line")?;
    let header = std::str::from_utf8(&bytes[..newline]).map_err(|_| "malformed F64F header")?;
    let mut parts = header.split(' ');
    if parts.next() != Some(FIELD_MAGIC) {
        return Err("magic mismatch: not an F64F file".into());
    }
    let mut dim = || {
        parts
            .next()
            .and_then(|s| s.parse::<usize>().ok())
            .ok_or_else(|| format!("malformed F64F header {header:?}"))
    };
    let (width, height) = (dim()?, dim()?);
    if parts.next().is_some() {
        return Err(format!("malformed F64F header {header:?}"));
    }
    let payload = &bytes[newline + 1..];
    let expected = 8 * width * height * planes;
    if payload.len() != expected {
        return Err(format!(
            "size mismatch: header {width}x{height} needs {expected} payload bytes, found {}",
            payload.len()
        ));
    }
    let values = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    Ok((width, height, values))
}

/// Writes `F64F <w> <h>\n` followed by the row-major little-endian payload.
pub fn write_field(field: &ScalarField, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = field_bytes(field.width(), field.height(), &[field.values()]);
    fs::write(path, bytes).map_err(|e| FringeError::io(path, e))
}

pub fn read_field(path: impl AsRef<Path>) -> Result<ScalarField> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| FringeError::io(path, e))?;
    let (w, h, values) = parse_field(&bytes, 1).map_err(|m| FringeError::format(path, m))?;
    ScalarField::from_vec(w, h, values)
}

/// Same header as [`write_field`]; the `x` plane is followed by the `y` plane.
pub fn write_vector_field(field: &VectorField, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = field_bytes(field.width(), field.height(), &[field.xs(), field.ys()]);
    fs::write(path, bytes).map_err(|e| FringeError::io(path, e))
}

pub fn read_vector_field(path: impl AsRef<Path>) -> Result<VectorField> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| FringeError::io(path, e))?;
    let (w, h, mut values) = parse_field(&bytes, 2).map_err(|m| FringeError::format(path, m))?;
    let ys = values.split_off(w * h);
    VectorField::from_planes(w, h, values, ys)
}

/// Formats like C's `%.9g`: nine significant digits, trailing zeros dropped,
/// exponent form outside `[1e-4, 1e9)`.
pub fn format_sig9(v: f64) -> String {
    const DIGITS: i32 = 9;
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf" } else { "-inf" }.into();
    }
    if v == 0.0 {
        return if v.is_sign_negative() { "-0" } else { "0" }.into();
    }
    // The exponent after rounding to nine digits.
    let sci = format!("{:.*e}", (DIGITS - 1) as usize, v);
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..DIGITS).contains(&exp) {
        let mantissa = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mantissa}e{sign}{:02}", exp.abs())
    } else {
        trim_zeros(&format!("{:.*}", (DIGITS - 1 - exp) as usize, v)).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn cell(v: Option<f64>) -> String {
    match v {
        Some(x) if !x.is_nan() => format_sig9(x),
        _ => String::new(),
    }
}

fn record_cells(r: &IterationRecord) -> String {
    let res = r.constraint_residual.map_or([None; 3], |v| v.map(Some));
    let cells = [
        r.rel_change[0],
        r.rel_change[1],
        r.rel_change[2],
        Some(r.energy),
        res[0],
        res[1],
        res[2],
        r.q_err,
        Some(r.wall_ms),
    ]
    .map(cell);
    format!("{},{}", r.iter, cells.join(","))
}

/// Renders a report as CSV: the header, one row per outer iteration, and a
/// closing `#final,` row that repeats the last iteration. Missing values and
/// NaN placeholders (including cleared wall times) are written as empty
/// cells.
pub fn report_csv(report: &RunReport) -> String {
    let mut out = String::from(REPORT_HEADER);
    out.push('\n');
    for r in &report.records {
        out.push_str(&record_cells(r));
        out.push('\n');
    }
    if let Some(last) = report.last() {
        out.push_str("#final,");
        out.push_str(&record_cells(last));
        out.push('\n');
    }
    out
}

pub fn write_report(report: &RunReport, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut file = fs::File::create(path).map_err(|e| FringeError::io(path, e))?;
    file.write_all(report_csv(report).as_bytes())
        .map_err(|e| FringeError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::report::Method;

    #[test]
    fn pgm_bytes_map_linearly() {
        let mut bytes = b"P5\n2 2\n255\n".to_vec();
        bytes.extend([0u8, 255, 128, 64]);
        let f = parse_pgm(&bytes).unwrap();
        assert_eq!(f.values(), &[0.0, 1.0, 128.0 / 255.0, 64.0 / 255.0]);
    }

    #[test]
    fn pgm_header_comments_and_16_bit() {
        let mut bytes = b"P5 # comment\n# another\n1 2 65535\n".to_vec();
        bytes.extend([0xff, 0xff, 0x80, 0x00]);
        let f = parse_pgm(&bytes).unwrap();
        assert_eq!(f.values(), &[1.0, 32768.0 / 65535.0]);
    }

    #[test]
    fn pgm_rejects_bad_input() {
        assert!(parse_pgm(b"P2\n1 1\n255\n0").is_err());
        assert!(parse_pgm(b"P5\n1 1\n100\n\x00").is_err());
        assert!(parse_pgm(b"P5\n2 2\n255\n\x00\x00").is_err());
        assert!(parse_pgm(b"P5\n2").is_err());
        assert!(parse_pgm(b"P5\n0 2\n255\n").is_err());
    }

    #[test]
    fn field_parse_rejects_bad_input() {
        assert!(parse_field(b"F32F 1 1\n00000000", 1).unwrap_err().contains("magic"));
        assert!(parse_field(b"F64F 1 1\n0000", 1).unwrap_err().contains("size"));
        assert!(parse_field(b"F64F 1\n", 1).is_err());
        assert!(parse_field(b"F64F 1 1", 1).is_err());
    }

    #[test]
    fn sig9_matches_printf() {
        let cases = [
            (1.0, "1"),
            (0.1, "0.1"),
            (1.0 / 3.0, "0.333333333"),
            (123456789.0, "123456789"),
            (1234567890.0, "1.23456789e+09"),
            (9.999999999e8, "1e+09"),
            (1e-5, "1e-05"),
            (0.0001, "0.0001"),
            (-2.5e-7, "-2.5e-07"),
            (893.963812345, "893.963812"),
            (f64::INFINITY, "inf"),
            (0.0, "0"),
        ];
        for (v, s) in cases {
            assert_eq!(format_sig9(v), s, "{v}");
        }
    }

    #[test]
    fn empty_report_is_header_only() {
        let csv = report_csv(&RunReport::new(Method::Alm));
        assert_eq!(csv, format!("{REPORT_HEADER}\n"));
    }

    #[test]
    fn report_rows_and_final_line() {
        let mut report = RunReport::new(Method::FixedPoint);
        for iter in 1..=2 {
            report.records.push(IterationRecord {
                iter,
                rel_change: [Some(f64::INFINITY), Some(0.5), Some(1e-6)],
                energy: 12.0,
                constraint_residual: None,
                multiplier_norm: None,
                q_err: None,
                wall_ms: f64::NAN,
            });
        }
        let csv = report_csv(&report);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 4);
        assert_eq!(lines[1], "1,inf,0.5,1e-06,12,,,,,");
        assert_eq!(lines[3], "#final,2,inf,0.5,1e-06,12,,,,,");
        assert!(lines.iter().all(|l| l.trim_start_matches("#final,").split(',').count() == 10));
    }
}
