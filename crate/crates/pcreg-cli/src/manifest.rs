//! Run manifests: a plain key=value sidecar written next to every output
//! file. The `argv` line holds the canonical post-merge flags (without
//! `--out`, `--jobs`, or `--config`), so rerunning the command with those
//! flags and any output path reproduces the CSV byte for byte.

use std::ffi::OsString;
use std::io;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

pub struct Manifest {
    command: &'static str,
    argv: String,
    seed: Option<u64>,
    out: PathBuf,
    started_ms: u128,
    extras: Vec<(String, String)>,
}

fn now_ms() -> u128 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis())
        .unwrap_or(0)
}

impl Manifest {
    pub fn start(command: &'static str, argv: String, seed: Option<u64>, out: &Path) -> Self {
        Manifest {
            command,
            argv,
            seed,
            out: out.to_owned(),
            started_ms: now_ms(),
            extras: Vec::new(),
        }
    }

    pub fn push(&mut self, key: &str, value: impl Into<String>) {
        self.extras.push((key.to_owned(), value.into()));
    }

    /// Writes `<out>.manifest` and returns its path.
    pub fn finish(self) -> io::Result<PathBuf> {
        let mut text = String::new();
        text.push_str(&format!("command={}\n", self.command));
        text.push_str(&format!("version={}\n", env!("CARGO_PKG_VERSION")));
        text.push_str(&format!("argv={}\n", self.argv));
        match self.seed {
            Some(seed) => text.push_str(&format!("seed={seed}\n")),
            None => text.push_str("seed=none\n"),
        }
        text.push_str(&format!("out={}\n", self.out.display()));
        text.push_str(&format!("started_unix_ms={}\n", self.started_ms));
        text.push_str(&format!("finished_unix_ms={}\n", now_ms()));
        for (key, value) in &self.extras {
            text.push_str(&format!("{key}={value}\n"));
        }
        let path = sidecar_path(&self.out);
        std::fs::write(&path, text)?;
        Ok(path)
    }
}

pub fn sidecar_path(out: &Path) -> PathBuf {
    let mut os: OsString = out.as_os_str().to_owned();
    os.push(".manifest");
    PathBuf::from(os)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sidecar_keeps_the_csv_name_visible() {
        assert_eq!(
            sidecar_path(Path::new("runs/samples.csv")),
            Path::new("runs/samples.csv.manifest")
        );
    }
}
