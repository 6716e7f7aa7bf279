//! Resolves a `--data` argument to a loaded bundle.
//!
//! Accepted forms: a canonical benchmark name (`nltcs`, `plants`, ...) or any
//! name with `<name>.{train,valid,test}.data` files under the data
//! directory; a mixed CSV path (`foo.csv`, sidecar `foo.schema` next to it);
//! or the sidecar path itself.

use std::path::{Path, PathBuf};

use softspn::data::{discrete_available, load_discrete, load_mixed_csv, manifest_entry, DatasetBundle, MixedSpec};

use crate::error::CliError;

/// Environment variable overriding the default data directory.
pub const DATA_DIR_ENV: &str = "SOFTSPN_DATA_DIR";

pub fn default_data_dir() -> PathBuf {
    std::env::var_os(DATA_DIR_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("data"))
}

pub fn load_dataset(name: &str, data_dir: &Path, alpha: f64) -> Result<DatasetBundle, CliError> {
    let as_path = Path::new(name);
    let ext = as_path.extension().and_then(|e| e.to_str());
    if matches!(ext, Some("csv") | Some("schema")) {
        let (csv, sidecar) = if ext == Some("csv") {
            (as_path.to_path_buf(), as_path.with_extension("schema"))
        } else {
            (as_path.with_extension("csv"), as_path.to_path_buf())
        };
        let spec = MixedSpec::from_file(&sidecar)?;
        return Ok(load_mixed_csv(&csv, &spec, alpha)?);
    }
    let canonical = manifest_entry(name).map(|e| e.name);
    let file_name = canonical.clone().unwrap_or_else(|| name.to_string());
    if discrete_available(&file_name, data_dir) {
        return Ok(load_discrete(&file_name, data_dir)?);
    }
    if canonical.is_some() {
        Err(CliError::Data(format!(
            "dataset {file_name} not found under {} (expected {file_name}.train.data, .valid.data, .test.data)",
            data_dir.display()
        )))
    } else {
        Err(CliError::Usage(format!("unknown dataset {name:?}")))
    }
}
