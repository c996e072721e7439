//! On-disk formats. All multi-byte values are little-endian regardless of
//! host; files round-trip bit-exactly.

mod config;
mod dataset_file;
mod import;
mod model_file;

pub use config::{ParsedValue, RunConfig};
pub use dataset_file::{dataset_body_size, read_dataset, write_dataset, DATASET_MAGIC};
pub use import::import_raw;
pub use model_file::{load_model, load_model_expecting, save_model, SavedModel, MODEL_MAGIC};

use std::io;

/// Errors from reading or writing the binary containers and the config.
#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("bad magic: expected {expected:?}, found {found:?}")]
    BadMagic { expected: [u8; 4], found: [u8; 4] },
    #[error("unsupported format version {found} (expected {expected})")]
    VersionMismatch { expected: u16, found: u16 },
    #[error("file is truncated: needed {needed} more bytes for {context}")]
    Truncated { context: &'static str, needed: usize },
    #[error("checksum mismatch: stored {stored:#018x}, computed {computed:#018x}")]
    ChecksumMismatch { stored: u64, computed: u64 },
    #[error("model file does not match the requested architecture: {0}")]
    ArchMismatch(String),
    #[error("config error at line {line}: {message}")]
    Config { line: usize, message: String },
    #[error("invalid field: {0}")]
    Invalid(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

// ---- little-endian primitives shared by the container formats ----

pub(crate) struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub(crate) fn new(buf: &'a [u8]) -> Self {
        Reader { buf, pos: 0 }
    }

    pub(crate) fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }

    pub(crate) fn take(
        &mut self,
        n: usize,
        context: &'static str,
    ) -> Result<&'a [u8], StoreError> {
        if self.remaining() < n {
            return Err(StoreError::Truncated {
                context,
                needed: n - self.remaining(),
            });
        }
        let out = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    pub(crate) fn u16(&mut self, context: &'static str) -> Result<u16, StoreError> {
        Ok(u16::from_le_bytes(self.take(2, context)?.try_into().unwrap()))
    }

    pub(crate) fn u64(&mut self, context: &'static str) -> Result<u64, StoreError> {
        Ok(u64::from_le_bytes(self.take(8, context)?.try_into().unwrap()))
    }

    pub(crate) fn f64(&mut self, context: &'static str) -> Result<f64, StoreError> {
        Ok(f64::from_le_bytes(self.take(8, context)?.try_into().unwrap()))
    }

    pub(crate) fn string(&mut self, context: &'static str) -> Result<String, StoreError> {
        let len = self.u16(context)? as usize;
        let bytes = self.take(len, context)?;
        String::from_utf8(bytes.to_vec())
            .map_err(|_| StoreError::Invalid(format!("{context}: invalid UTF-8")))
    }
}

pub(crate) fn put_u16(buf: &mut Vec<u8>, v: u16) {
    buf.extend_from_slice(&v.to_le_bytes());
}

pub(crate) fn put_u64(buf: &mut Vec<u8>, v: u64) {
    buf.extend_from_slice(&v.to_le_bytes());
}

pub(crate) fn put_f64(buf: &mut Vec<u8>, v: f64) {
    buf.extend_from_slice(&v.to_le_bytes());
}

pub(crate) fn put_string(buf: &mut Vec<u8>, s: &str) -> Result<(), StoreError> {
    let bytes = s.as_bytes();
    if bytes.len() > u16::MAX as usize {
        return Err(StoreError::Invalid(format!(
            "string too long for header field ({} bytes)",
            bytes.len()
        )));
    }
    put_u16(buf, bytes.len() as u16);
    buf.extend_from_slice(bytes);
    Ok(())
}
