//! Plain-text output helpers shared by the CSV writers.

/// Seventeen significant digits, enough to round-trip an `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Write a header and rows of floats as comma-separated text.
pub fn write_table<W: std::io::Write>(mut w: W, header: &[String], rows: impl IntoIterator<Item = Vec<f64>>) -> std::io::Result<()> {
    writeln!(w, "{}", header.join(","))?;
    for row in rows {
        let cells: Vec<String> = row.into_iter().map(fmt_f64).collect();
        writeln!(w, "{}", cells.join(","))?;
    }
    Ok(())
}
