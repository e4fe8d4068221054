//! CSV formatting shared by every writer in the crate.

/// Fixed-width scientific notation with 17 significant digits, so values
/// round-trip exactly and reruns are byte-identical.
pub fn fmt_f64(value: f64) -> String {
    format!("{value:.16e}")
}
