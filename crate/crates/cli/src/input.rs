//! Input resolution shared by the subcommands.

use std::path::Path;

use transflow::data::{load_csv, load_idx};
use transflow::flow::checkpoint;
use transflow::{Dataset, FlowModel};

use crate::{CliError, CliResult};

/// Missing inputs are usage errors rather than I/O failures.
pub fn require_file(path: &Path) -> CliResult {
    if path.is_file() {
        Ok(())
    } else {
        Err(CliError::Usage(format!(
            "input file not found: {}",
            path.display()
        )))
    }
}

pub fn is_csv(path: &Path) -> bool {
    path.extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("csv"))
}

pub fn is_pgm(path: &Path) -> bool {
    path.extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("pgm"))
}

/// CSV when the extension says so, IDX (optionally gzipped) otherwise.
pub fn load_dataset(path: &Path, labels: Option<&Path>, csv_labeled: bool) -> CliResult<Dataset> {
    require_file(path)?;
    if let Some(l) = labels {
        require_file(l)?;
    }
    if is_csv(path) {
        if labels.is_some() {
            return Err(CliError::Usage(format!(
                "{}: label files apply to IDX input; CSV labels go in the last column",
                path.display()
            )));
        }
        Ok(load_csv(path, csv_labeled)?)
    } else {
        Ok(load_idx(path, labels)?)
    }
}

pub fn load_model(path: &Path) -> CliResult<(FlowModel, String)> {
    require_file(path)?;
    Ok(checkpoint::load(path)?)
}

pub fn create_dir(path: &Path) -> CliResult {
    std::fs::create_dir_all(path).map_err(|e| transflow::Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    Ok(())
}

pub fn write_text(path: &Path, text: &str) -> CliResult {
    std::fs::write(path, text).map_err(|e| transflow::Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    Ok(())
}
