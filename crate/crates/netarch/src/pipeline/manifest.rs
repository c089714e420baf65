//! Run manifest: digests of inputs and outputs plus per-stage timings.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StageTiming {
    pub stage: String,
    pub millis: u64,
}

/// Everything needed to audit a run: configuration digest, input digests,
/// stage timings, and the digest of every output file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub config_sha256: String,
    pub inputs: Vec<FileDigest>,
    pub stages: Vec<StageTiming>,
    pub outputs: Vec<FileDigest>,
}

pub fn sha256_bytes(data: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(data);
    let digest = hasher.finalize();
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let data = fs::read(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    Ok(sha256_bytes(&data))
}

/// All regular files below `dir`, sorted by path for reproducible listings.
pub fn collect_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        if !d.exists() {
            continue;
        }
        let entries = fs::read_dir(&d).map_err(|source| Error::Io {
            path: d.display().to_string(),
            source,
        })?;
        for entry in entries {
            let entry = entry.map_err(|source| Error::Io {
                path: d.display().to_string(),
                source,
            })?;
            let path = entry.path();
            if path.is_dir() {
                stack.push(path);
            } else {
                out.push(path);
            }
        }
    }
    out.sort();
    Ok(out)
}

/// Digests every file below `dir`, with paths made relative to it.
pub fn digest_tree(dir: &Path, skip: &[&str]) -> Result<Vec<FileDigest>> {
    let mut out = Vec::new();
    for path in collect_files(dir)? {
        let rel = path
            .strip_prefix(dir)
            .unwrap_or(&path)
            .to_string_lossy()
            .replace('\\', "/");
        if skip.iter().any(|s| rel == *s) {
            continue;
        }
        out.push(FileDigest {
            path: rel,
            sha256: sha256_file(&path)?,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sha256_known_vector() {
        assert_eq!(
            sha256_bytes(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn digest_tree_sorted_and_relative() {
        let dir = std::env::temp_dir().join("netarch_manifest_test");
        let _ = fs::remove_dir_all(&dir);
        fs::create_dir_all(dir.join("b")).unwrap();
        fs::write(dir.join("b/two.txt"), "2").unwrap();
        fs::write(dir.join("one.txt"), "1").unwrap();
        let digests = digest_tree(&dir, &[]).unwrap();
        let paths: Vec<&str> = digests.iter().map(|d| d.path.as_str()).collect();
        assert_eq!(paths, vec!["b/two.txt", "one.txt"]);
        let skipped = digest_tree(&dir, &["one.txt"]).unwrap();
        assert_eq!(skipped.len(), 1);
    }
}
