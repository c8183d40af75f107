//! The `encore-bench` harness: corpus generation, partitioning, training,
//! evaluation, report emission and ablations, all driven by [`RunConfig`].
//!
//! Every command is deterministic for a fixed configuration. On failure
//! the files a command already wrote are removed.

mod commands;
pub mod config;

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

pub use commands::{model_config, train_config, AblationResult, SampleMetricsFile};
pub use config::RunConfig;

use crate::error::{Error, Result};

/// Environment variable capping the worker thread count.
pub const THREADS_ENV: &str = "ENCORE_BENCH_THREADS";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Generate,
    Partition,
    Train,
    Eval,
    Report,
    Ablate,
}

impl Command {
    pub const ALL: [Command; 6] = [
        Command::Generate,
        Command::Partition,
        Command::Train,
        Command::Eval,
        Command::Report,
        Command::Ablate,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::Generate => "generate",
            Command::Partition => "partition",
            Command::Train => "train",
            Command::Eval => "eval",
            Command::Report => "report",
            Command::Ablate => "ablate",
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Command {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Command::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown command `{s}`")))
    }
}

/// Runs one command and returns the files it wrote, in write order.
pub fn run(command: Command, cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let mut out = Outputs::default();
    match command {
        Command::Generate => commands::generate(cfg, &mut out)?,
        Command::Partition => commands::partition(cfg, &mut out)?,
        Command::Train => commands::train(cfg, &mut out)?,
        Command::Eval => commands::eval(cfg, &mut out)?,
        Command::Report => commands::report(cfg, &mut out)?,
        Command::Ablate => commands::ablate(cfg, &mut out)?,
    }
    Ok(out.commit())
}

/// The single line printed on failure: `error: kind=<Kind> message="..."`.
pub fn error_line(e: &Error) -> String {
    format!("error: kind={} message={:?}", e.kind(), e.to_string())
}

/// Sizes the global worker pool from [`THREADS_ENV`] when it is set.
pub fn configure_threads() -> Result<()> {
    let Ok(v) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::Config(format!("{THREADS_ENV} must be a positive integer, got `{v}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))
}

/// Files and directories created by a command. Unless committed, they
/// are deleted on drop.
#[derive(Debug, Default)]
pub(crate) struct Outputs {
    files: Vec<PathBuf>,
    dirs: Vec<PathBuf>,
    committed: bool,
}

impl Outputs {
    pub(crate) fn dir(&mut self, path: &Path) -> Result<()> {
        let mut missing = Vec::new();
        let mut cur = Some(path);
        while let Some(p) = cur.filter(|p| !p.as_os_str().is_empty() && !p.exists()) {
            missing.push(p.to_path_buf());
            cur = p.parent();
        }
        for p in missing.into_iter().rev() {
            fs::create_dir(&p).map_err(|e| Error::io(&p, e))?;
            self.dirs.push(p);
        }
        Ok(())
    }

    /// Registers `path` before anything is written to it.
    pub(crate) fn file(&mut self, path: PathBuf) -> Result<PathBuf> {
        if let Some(parent) = path.parent() {
            self.dir(parent)?;
        }
        self.files.push(path.clone());
        Ok(path)
    }

    pub(crate) fn write(&mut self, path: PathBuf, text: &str) -> Result<PathBuf> {
        let path = self.file(path)?;
        fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }

    fn commit(mut self) -> Vec<PathBuf> {
        self.committed = true;
        std::mem::take(&mut self.files)
    }
}

impl Drop for Outputs {
    fn drop(&mut self) {
        if self.committed {
            return;
        }
        for f in &self.files {
            let _ = fs::remove_file(f);
        }
        for d in self.dirs.iter().rev() {
            let _ = fs::remove_dir(d);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uncommitted_outputs_are_removed() {
        let tmp = tempfile::tempdir().unwrap();
        let nested = tmp.path().join("a/b");
        {
            let mut out = Outputs::default();
            out.write(nested.join("x.txt"), "partial").unwrap();
            assert!(nested.join("x.txt").exists());
        }
        assert!(!tmp.path().join("a").exists());

        let mut out = Outputs::default();
        out.write(nested.join("y.txt"), "kept").unwrap();
        assert_eq!(out.commit(), vec![nested.join("y.txt")]);
        assert!(nested.join("y.txt").exists());
    }

    #[test]
    fn error_line_is_one_quoted_line() {
        let e = Error::Config("bad \"value\"\nsecond line".into());
        let line = error_line(&e);
        assert!(line.starts_with("error: kind=ConfigError message=\""));
        assert!(!line.contains('\n'));
    }

    #[test]
    fn command_names_parse() {
        for c in Command::ALL {
            assert_eq!(c.name().parse::<Command>().unwrap(), c);
        }
        assert!("plot".parse::<Command>().is_err());
    }
}
