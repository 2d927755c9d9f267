//! Deterministic text output: full-precision scientific notation and value
//! checksums.

use std::io::Write;

use crate::error::Result;
use crate::scalar::Real;

/// 17 significant digits, locale independent (`1.2345678901234567e-3`).
pub fn fmt_sci(x: f64) -> String {
    format!("{x:.16e}")
}

/// FNV-1a over the IEEE bit patterns of `values` (as `f64`), hex encoded.
pub fn checksum_values<T: Real>(values: &[T]) -> String {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    let mut hash = OFFSET;
    for v in values {
        for byte in v.as_f64().to_bits().to_le_bytes() {
            hash ^= u64::from(byte);
            hash = hash.wrapping_mul(PRIME);
        }
    }
    format!("{hash:016x}")
}

/// Writes a numeric table with a header row.
pub fn write_table<W: Write>(mut out: W, header: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    writeln!(out, "{}", header.join(","))?;
    for row in rows {
        let cells: Vec<String> = row.iter().map(|&v| fmt_sci(v)).collect();
        writeln!(out, "{}", cells.join(","))?;
    }
    Ok(())
}
