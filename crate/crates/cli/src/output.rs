use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};
use tempfile::NamedTempFile;

use crate::error::CliError;

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn read_input(path: &Path) -> Result<Vec<u8>, CliError> {
    fs::read(path).map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))
}

/// Output files held in memory until the run has succeeded.
#[derive(Debug, Default)]
pub struct Artifacts {
    files: BTreeMap<String, Vec<u8>>,
}

impl Artifacts {
    pub fn add(&mut self, name: impl Into<String>, bytes: Vec<u8>) {
        self.files.insert(name.into(), bytes);
    }

    /// Renders a file with a writer callback.
    pub fn render(
        &mut self,
        name: impl Into<String>,
        f: impl FnOnce(&mut Vec<u8>) -> fbdeconv::Result<()>,
    ) -> Result<(), CliError> {
        let mut buf = Vec::new();
        f(&mut buf)?;
        self.add(name, buf);
        Ok(())
    }

    pub fn digests(&self) -> BTreeMap<String, String> {
        self.files.iter().map(|(k, v)| (k.clone(), sha256_hex(v))).collect()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.files.keys().map(String::as_str)
    }

    /// Writes every file into `dir`, each through a temporary file renamed into place.
    pub fn commit(&self, dir: &Path) -> Result<Vec<PathBuf>, CliError> {
        let io = |e: std::io::Error, what: &Path| CliError::Data(format!("cannot write {}: {e}", what.display()));
        fs::create_dir_all(dir).map_err(|e| io(e, dir))?;
        let mut staged = Vec::with_capacity(self.files.len());
        for (name, bytes) in &self.files {
            let mut tmp = NamedTempFile::new_in(dir).map_err(|e| io(e, dir))?;
            tmp.write_all(bytes).map_err(|e| io(e, tmp.path()))?;
            tmp.as_file().sync_all().map_err(|e| io(e, tmp.path()))?;
            staged.push((tmp, dir.join(name)));
        }
        let mut written = Vec::with_capacity(staged.len());
        for (tmp, target) in staged {
            tmp.persist(&target).map_err(|e| io(e.error, &target))?;
            written.push(target);
        }
        Ok(written)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn commit_writes_every_file_and_no_temporaries() {
        let dir = tempfile::tempdir().unwrap();
        let mut a = Artifacts::default();
        a.add("a.csv", b"x\n".to_vec());
        a.add("b.toml", b"y = 1\n".to_vec());
        a.commit(dir.path()).unwrap();
        let mut names: Vec<String> = fs::read_dir(dir.path())
            .unwrap()
            .map(|e| e.unwrap().file_name().into_string().unwrap())
            .collect();
        names.sort();
        assert_eq!(names, ["a.csv", "b.toml"]);
        assert_eq!(fs::read(dir.path().join("a.csv")).unwrap(), b"x\n");
    }

    #[test]
    fn digest_of_empty_input() {
        assert_eq!(
            sha256_hex(b""),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
    }
}
