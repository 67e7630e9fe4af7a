//! Text and binary artifact helpers shared by the CSV/JSON writers.

use std::io::Write;

use crate::error::Result;

/// Formats a float with 17 significant digits, enough to round-trip any f64.
pub fn fmt_f64(value: f64) -> String {
    if value == 0.0 {
        // keep the sign of -0.0 out of artifacts
        return "0.0000000000000000e0".to_string();
    }
    format!("{value:.16e}")
}

/// Writes a CSV table with a mandatory header, `,` separators and `\n` endings.
pub fn write_csv<W: Write>(out: W, header: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    write_table(out, header, rows, &[])
}

/// As [`write_csv`], printing the columns listed in `integer_columns` as
/// integers.
pub fn write_table<W: Write>(out: W, header: &[&str], rows: &[Vec<f64>], integer_columns: &[usize]) -> Result<()> {
    let mut writer = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    writer
        .write_record(header)
        .map_err(|e| crate::FieldError::Io(e.to_string()))?;
    for row in rows {
        writer
            .write_record(row.iter().enumerate().map(|(i, v)| {
                if integer_columns.contains(&i) {
                    format!("{}", *v as i64)
                } else {
                    fmt_f64(*v)
                }
            }))
            .map_err(|e| crate::FieldError::Io(e.to_string()))?;
    }
    writer
        .flush()
        .map_err(|e| crate::FieldError::Io(e.to_string()))?;
    Ok(())
}

/// Little-endian f64 array.
pub fn write_f64_le<W: Write>(mut out: W, values: &[f64]) -> Result<()> {
    for v in values {
        out.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

/// Little-endian i32 array.
pub fn write_i32_le<W: Write>(mut out: W, values: &[i32]) -> Result<()> {
    for v in values {
        out.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_f64_le(bytes: &[u8]) -> Vec<f64> {
    bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect()
}

pub fn read_i32_le(bytes: &[u8]) -> Vec<i32> {
    bytes
        .chunks_exact(4)
        .map(|c| i32::from_le_bytes(c.try_into().expect("chunk of 4")))
        .collect()
}
