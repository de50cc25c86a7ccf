//! Run manifests: everything that determines a command's outputs.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs::File;
use std::io::{self, Read};
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::error::Result;

pub const ARTIFACT_VERSION: &str = concat!("pdh ", env!("CARGO_PKG_VERSION"));

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunManifest {
    pub command: String,
    pub flags: BTreeMap<String, String>,
    pub seed: Option<u64>,
    pub inputs: BTreeMap<String, String>,
    pub version: String,
}

impl RunManifest {
    pub fn new(command: &str) -> Self {
        Self {
            command: command.to_owned(),
            flags: BTreeMap::new(),
            seed: None,
            inputs: BTreeMap::new(),
            version: ARTIFACT_VERSION.to_owned(),
        }
    }

    pub fn flag(mut self, name: &str, value: impl ToString) -> Self {
        self.flags.insert(name.to_owned(), value.to_string());
        self
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    /// Records the SHA-256 of an input file.
    pub fn input(mut self, path: &Path) -> Result<Self> {
        self.inputs.insert(path.display().to_string(), file_digest(path)?);
        Ok(self)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        writeln!(s, "version={}", self.version).unwrap();
        writeln!(s, "command={}", self.command).unwrap();
        if let Some(seed) = self.seed {
            writeln!(s, "seed={seed}").unwrap();
        }
        for (k, v) in &self.flags {
            writeln!(s, "flag.{k}={v}").unwrap();
        }
        for (k, v) in &self.inputs {
            writeln!(s, "input.{k}=sha256:{v}").unwrap();
        }
        s
    }

    /// Writes `<output>.manifest` next to `output`.
    pub fn write_beside(&self, output: &Path) -> Result<PathBuf> {
        let path = sidecar(output, "manifest");
        std::fs::write(&path, self.to_text())?;
        Ok(path)
    }
}

/// `<path>.<ext>` (appended, not replacing an existing extension).
pub fn sidecar(path: &Path, ext: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".");
    s.push(ext);
    PathBuf::from(s)
}

pub fn file_digest(path: &Path) -> Result<String> {
    let mut hasher = Sha256::new();
    let mut file = File::open(path)?;
    let mut buf = [0u8; 1 << 16];
    loop {
        match file.read(&mut buf) {
            Ok(0) => break,
            Ok(n) => hasher.update(&buf[..n]),
            Err(e) if e.kind() == io::ErrorKind::Interrupted => continue,
            Err(e) => return Err(e.into()),
        }
    }
    Ok(hex::encode(hasher.finalize()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_is_sorted_and_stable() {
        let m = RunManifest::new("train").flag("lr", 0.05).flag("bits", 12).seed(7);
        assert_eq!(
            m.to_text(),
            format!("version={ARTIFACT_VERSION}\ncommand=train\nseed=7\nflag.bits=12\nflag.lr=0.05\n")
        );
        assert_eq!(sidecar(Path::new("out/model.pdhm"), "manifest"), PathBuf::from("out/model.pdhm.manifest"));
    }

    #[test]
    fn digest_of_known_content() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("abc");
        std::fs::write(&path, b"abc").unwrap();
        assert_eq!(
            file_digest(&path).unwrap(),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
