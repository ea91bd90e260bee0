//! Number rendering shared by every CSV and manifest writer.

/// Render a double with 17 significant digits, enough to round-trip exactly.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}
