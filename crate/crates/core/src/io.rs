//! Output files: snapshot and energy CSVs, `summary.json`, gnuplot scripts,
//! and the per-directory run lock.

use std::fmt::Write as _;
use std::fs::{self, File, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

use crate::energy::EnergyRecord;
use crate::grid::Grid1D;
use crate::propagation::FieldState;

/// Environment variable that overrides the output directory of a config.
pub const OUTPUT_DIR_ENV: &str = "KGWALL_OUTPUT_DIR";
pub const DEFAULT_OUTPUT_DIR: &str = "kgwall-out";
pub const LOCK_FILE: &str = ".kgwall.lock";

pub const SNAPSHOT_HEADER: &str = "x,u,v";
pub const ENERGY_HEADER: &str = "t,kinetic,elastic,potential,total";

#[derive(Debug, Error)]
pub enum OutputError {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("{}: directory is locked by another run (remove {} if stale)", dir.display(), LOCK_FILE)]
    Locked { dir: PathBuf },
    #[error("{}: {source}", path.display())]
    Json {
        path: PathBuf,
        source: serde_json::Error,
    },
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> OutputError + '_ {
    move |source| OutputError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Resolution order: explicit flag, then the environment, then the config
/// value, then [`DEFAULT_OUTPUT_DIR`].
pub fn resolve_output_dir(flag: Option<&Path>, config: Option<&str>) -> PathBuf {
    if let Some(p) = flag {
        return p.to_path_buf();
    }
    if let Some(p) = std::env::var_os(OUTPUT_DIR_ENV).filter(|v| !v.is_empty()) {
        return PathBuf::from(p);
    }
    PathBuf::from(config.unwrap_or(DEFAULT_OUTPUT_DIR))
}

/// Exclusive handle on an output directory. The lock file is removed on drop.
#[derive(Debug)]
pub struct RunDir {
    path: PathBuf,
    lock: PathBuf,
}

impl RunDir {
    pub fn acquire(path: impl Into<PathBuf>) -> Result<Self, OutputError> {
        let path = path.into();
        fs::create_dir_all(&path).map_err(io_err(&path))?;
        let lock = path.join(LOCK_FILE);
        let mut f = match OpenOptions::new().write(true).create_new(true).open(&lock) {
            Ok(f) => f,
            Err(e) if e.kind() == io::ErrorKind::AlreadyExists => {
                return Err(OutputError::Locked { dir: path })
            }
            Err(e) => return Err(io_err(&lock)(e)),
        };
        writeln!(f, "{}", std::process::id()).map_err(io_err(&lock))?;
        Ok(Self { path, lock })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn join(&self, name: impl AsRef<Path>) -> PathBuf {
        self.path.join(name)
    }

    /// Creates a subdirectory, e.g. one per case.
    pub fn subdir(&self, name: &str) -> Result<PathBuf, OutputError> {
        let p = self.path.join(name);
        fs::create_dir_all(&p).map_err(io_err(&p))?;
        Ok(p)
    }
}

impl Drop for RunDir {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.lock);
    }
}

/// 17 significant digits: round-trips every `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn snapshot_file_name(t: f64) -> String {
    format!("snapshot_t{t:07.3}.csv")
}

fn write_file(path: &Path, contents: &str) -> Result<(), OutputError> {
    let mut f = File::create(path).map_err(io_err(path))?;
    f.write_all(contents.as_bytes()).map_err(io_err(path))
}

pub fn snapshot_csv(state: &FieldState, grid: &Grid1D, config_hash: &str) -> String {
    let mut s = String::with_capacity(64 * state.u.len());
    let _ = writeln!(s, "# config_hash: {config_hash}");
    let _ = writeln!(s, "# t: {}", fmt_f64(state.t));
    s.push_str(SNAPSHOT_HEADER);
    s.push('\n');
    for (j, (u, v)) in state.u.iter().zip(&state.v).enumerate() {
        let _ = writeln!(s, "{},{},{}", fmt_f64(grid.x(j)), fmt_f64(*u), fmt_f64(*v));
    }
    s
}

pub fn write_snapshot_csv(
    path: &Path,
    state: &FieldState,
    grid: &Grid1D,
    config_hash: &str,
) -> Result<(), OutputError> {
    write_file(path, &snapshot_csv(state, grid, config_hash))
}

pub fn energy_csv(records: &[EnergyRecord], config_hash: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# config_hash: {config_hash}");
    s.push_str(ENERGY_HEADER);
    s.push('\n');
    for r in records {
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            fmt_f64(r.t),
            fmt_f64(r.kinetic),
            fmt_f64(r.elastic),
            fmt_f64(r.potential),
            fmt_f64(r.total)
        );
    }
    s
}

pub fn write_energy_csv(
    path: &Path,
    records: &[EnergyRecord],
    config_hash: &str,
) -> Result<(), OutputError> {
    write_file(path, &energy_csv(records, config_hash))
}

/// Writes a generic numeric table with a hash comment line.
pub fn write_table_csv(
    path: &Path,
    header: &[&str],
    rows: &[Vec<Option<f64>>],
    config_hash: &str,
) -> Result<(), OutputError> {
    let mut s = String::new();
    let _ = writeln!(s, "# config_hash: {config_hash}");
    s.push_str(&header.join(","));
    s.push('\n');
    for row in rows {
        let cells: Vec<String> = row
            .iter()
            .map(|c| c.map(fmt_f64).unwrap_or_default())
            .collect();
        s.push_str(&cells.join(","));
        s.push('\n');
    }
    write_file(path, &s)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), OutputError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|source| OutputError::Json {
        path: path.to_path_buf(),
        source,
    })?;
    text.push('\n');
    write_file(path, &text)
}

/// Gnuplot script drawing `u` of each snapshot file in its own panel.
pub fn snapshot_plot_script(title: &str, files: &[(f64, String)], config_hash: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# config_hash: {config_hash}");
    let _ = writeln!(s, "set datafile separator ','");
    let _ = writeln!(s, "set datafile commentschars '#'");
    let _ = writeln!(s, "set key off");
    let _ = writeln!(s, "set xlabel 'x'");
    let _ = writeln!(s, "set ylabel 'u'");
    let _ = writeln!(
        s,
        "set multiplot layout {},1 title '{title}'",
        files.len().max(1)
    );
    for (t, f) in files {
        let _ = writeln!(s, "set title 't = {t}'");
        let _ = writeln!(s, "plot '{f}' every ::1 using 1:2 with lines");
    }
    let _ = writeln!(s, "unset multiplot");
    s
}

/// Log-log gnuplot script for an eps-net table with columns `eps,norm,difference`.
pub fn net_plot_script(title: &str, file: &str, config_hash: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# config_hash: {config_hash}");
    let _ = writeln!(s, "set datafile separator ','");
    let _ = writeln!(s, "set datafile commentschars '#'");
    let _ = writeln!(s, "set logscale xy");
    let _ = writeln!(s, "set xlabel 'eps'");
    let _ = writeln!(s, "set title '{title}'");
    let _ = writeln!(
        s,
        "plot '{file}' every ::1 using 1:2 with linespoints title 'norm', \\\n     '{file}' every ::1 using 1:3 with linespoints title 'difference'"
    );
    s
}

pub fn write_text(path: &Path, text: &str) -> Result<(), OutputError> {
    write_file(path, text)
}
