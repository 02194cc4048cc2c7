//! File reading and writing with path-bearing diagnostics.

use std::fs;
use std::path::Path;
use std::sync::Arc;

use anyhow::{Context, Result};
use sha2::{Digest, Sha256};
use tanwb_core::{parse_dataset, Dataset, Schema};

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).with_context(|| format!("cannot read {}", path.display()))
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("cannot create directory {}", dir.display()))?;
    }
    fs::write(path, bytes).with_context(|| format!("cannot write {}", path.display()))
}

pub fn load_schema_file(path: &Path) -> Result<Arc<Schema>> {
    let text = read_text(path)?;
    let schema = Schema::from_json(&text).with_context(|| format!("invalid schema {}", path.display()))?;
    Ok(Arc::new(schema))
}

/// Parse a case CSV; returns the dataset and the hex SHA-256 of the file.
pub fn load_data(path: &Path, schema_path: &Path, schema: Arc<Schema>) -> Result<(Dataset, String)> {
    let bytes = read_file(path)?;
    let dataset = parse_dataset(bytes.as_slice(), schema)
        .with_context(|| format!("data {} does not match schema {}", path.display(), schema_path.display()))?;
    Ok((dataset, sha256_hex(&bytes)))
}
