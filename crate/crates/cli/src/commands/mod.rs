pub mod build;
pub mod eval;
pub mod query;
pub mod simulate;
pub mod stats;

use std::path::Path;

use wavelet_map::obslog::ObservationLog;
use wavelet_map::tree::WaveletOctree;
use wavelet_map::units::{parse_scalar, Dimension, Length};

use crate::error::{read_file, CliError, CliResult};

pub fn load_map(path: &Path) -> CliResult<WaveletOctree> {
    WaveletOctree::deserialize(&read_file(path)?).map_err(|e| CliError::file(path, e))
}

pub fn load_log(path: &Path) -> CliResult<ObservationLog> {
    ObservationLog::decode(&read_file(path)?).map_err(|e| CliError::file(path, e))
}

/// Clap parser for quantities such as `5cm` or `"0.05 m"`.
pub fn parse_length(text: &str) -> Result<Length, String> {
    parse_scalar(&split_unit(text), Dimension::Length)
        .map(Length)
        .map_err(|e| e.to_string())
}

/// Inserts the space the unit grammar expects between a number and its unit
/// when the user left it out.
fn split_unit(text: &str) -> String {
    let text = text.trim();
    if text.contains(char::is_whitespace) {
        return text.to_string();
    }
    match text.find(|c: char| c.is_ascii_alphabetic() && c != 'e' && c != 'E') {
        Some(at) if at > 0 => format!("{} {}", &text[..at], &text[at..]),
        _ => text.to_string(),
    }
}
