//! Number formatting for the CSV exports.

/// 17 significant digits in scientific notation; enough to reproduce any
/// f64 exactly on re-parse.
pub(crate) fn sig17(x: f64) -> String {
    format!("{x:.16e}")
}
