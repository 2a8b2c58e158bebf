//! Output directory with atomic writes, and the exit-code error type.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("oracle error: {0}")]
    Oracle(String),
    #[error("numerical error: {0}")]
    Numerics(String),
    #[error("{0}")]
    Other(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Other(_) => 1,
            CliError::Config(_) => 2,
            CliError::Oracle(_) => 3,
            CliError::Numerics(_) => 4,
        }
    }
}

impl From<histvar::Error> for CliError {
    fn from(e: histvar::Error) -> Self {
        use histvar::Error as E;
        match e {
            E::Oracle { .. } => CliError::Oracle(e.to_string()),
            E::Singular(_) | E::Bracketing { .. } | E::Rank { .. } => CliError::Numerics(e.to_string()),
            E::Dimension { .. } | E::BasisIndex { .. } | E::InvalidParameter { .. } | E::Inadmissible(_) | E::Format(_) => {
                CliError::Config(e.to_string())
            }
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

pub struct OutputDir {
    dir: PathBuf,
    written: Vec<String>,
}

impl OutputDir {
    pub fn create(dir: &Path) -> CliResult<Self> {
        fs::create_dir_all(dir).map_err(|e| CliError::Other(format!("cannot create {}: {e}", dir.display())))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            written: Vec::new(),
        })
    }

    pub fn path(&self) -> &Path {
        &self.dir
    }

    /// Names written so far, in order.
    pub fn written(&self) -> &[String] {
        &self.written
    }

    pub fn write(&mut self, name: &str, content: &str) -> CliResult<()> {
        write_atomic(&self.dir.join(name), content)?;
        self.written.push(name.to_string());
        Ok(())
    }
}

/// Write to a sibling temporary file, then rename over the target.
pub fn write_atomic(path: &Path, content: &str) -> CliResult<()> {
    let io = |e: std::io::Error| CliError::Other(format!("cannot write {}: {e}", path.display()));
    let parent = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(parent).map_err(io)?;
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = parent.join(format!(".{name}.tmp{}", std::process::id()));
    let mut f = fs::File::create(&tmp).map_err(io)?;
    f.write_all(content.as_bytes()).map_err(io)?;
    f.sync_all().map_err(io)?;
    drop(f);
    fs::rename(&tmp, path).map_err(io)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn atomic_write_replaces_content() {
        let dir = tempfile::tempdir().unwrap();
        let mut out = OutputDir::create(&dir.path().join("a/b")).unwrap();
        out.write("x.csv", "1\n").unwrap();
        out.write("x.csv", "2\n").unwrap();
        assert_eq!(fs::read_to_string(out.path().join("x.csv")).unwrap(), "2\n");
        let names: Vec<_> = fs::read_dir(out.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
        assert_eq!(names.len(), 1);
    }

    #[test]
    fn exit_codes_are_distinct() {
        let codes = [
            CliError::Other(String::new()).exit_code(),
            CliError::Config(String::new()).exit_code(),
            CliError::Oracle(String::new()).exit_code(),
            CliError::Numerics(String::new()).exit_code(),
        ];
        assert_eq!(codes, [1, 2, 3, 4]);
        let e: CliError = histvar::Error::Singular("x".into()).into();
        assert_eq!(e.exit_code(), 4);
    }
}
