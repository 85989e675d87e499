//! Raw little-endian `f64` arrays with a JSON sidecar header.
//!
//! `name.f64` holds the payload and `name.f64.json` the header
//! `{"dims": [..], "dtype": "f64", "endianness": "little", "layout": "row-major"}`.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldHeader {
    pub dims: Vec<usize>,
    pub dtype: String,
    pub endianness: String,
    pub layout: String,
}

impl FieldHeader {
    pub fn new(dims: Vec<usize>) -> Self {
        Self {
            dims,
            dtype: "f64".into(),
            endianness: "little".into(),
            layout: "row-major".into(),
        }
    }

    pub fn n_values(&self) -> usize {
        self.dims.iter().product()
    }

    fn check(&self) -> CliResult<()> {
        if self.dtype != "f64" || self.endianness != "little" || self.layout != "row-major" {
            return Err(CliError::data(format!(
                "unsupported field encoding {}/{}/{}; expected f64/little/row-major",
                self.dtype, self.endianness, self.layout
            )));
        }
        if self.dims.is_empty() || self.dims.contains(&0) {
            return Err(CliError::data(format!("field dims must be positive, got {:?}", self.dims)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FieldFile {
    pub header: FieldHeader,
    pub values: Vec<f64>,
}

/// Sidecar path `payload.json`.
pub fn header_path(payload: &Path) -> PathBuf {
    let mut s = payload.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

impl FieldFile {
    pub fn new(dims: Vec<usize>, values: Vec<f64>) -> CliResult<Self> {
        let header = FieldHeader::new(dims);
        header.check()?;
        if header.n_values() != values.len() {
            return Err(CliError::data(format!(
                "field dims {:?} need {} values, got {}",
                header.dims,
                header.n_values(),
                values.len()
            )));
        }
        Ok(Self { header, values })
    }

    pub fn dims(&self) -> &[usize] {
        &self.header.dims
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        self.values.iter().flat_map(|v| v.to_le_bytes()).collect()
    }

    pub fn from_bytes(header: FieldHeader, bytes: &[u8]) -> CliResult<Self> {
        header.check()?;
        let expect = 8 * header.n_values();
        if bytes.len() != expect {
            return Err(CliError::data(format!(
                "payload has {} bytes; dims {:?} need exactly {expect}",
                bytes.len(),
                header.dims
            )));
        }
        let values = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("chunks of 8")))
            .collect();
        Ok(Self { header, values })
    }

    pub fn write(&self, payload: &Path) -> CliResult<()> {
        fs::write(payload, self.to_bytes())?;
        let mut head = serde_json::to_string_pretty(&self.header)?;
        head.push('\n');
        fs::write(header_path(payload), head)?;
        Ok(())
    }

    pub fn read(payload: &Path) -> CliResult<Self> {
        let hp = header_path(payload);
        let head = fs::read_to_string(&hp)
            .map_err(|e| CliError::data(format!("cannot read field header {}: {e}", hp.display())))?;
        let header: FieldHeader = serde_json::from_str(&head)
            .map_err(|e| CliError::data(format!("bad field header {}: {e}", hp.display())))?;
        let bytes =
            fs::read(payload).map_err(|e| CliError::data(format!("cannot read {}: {e}", payload.display())))?;
        Self::from_bytes(header, &bytes)
    }
}
