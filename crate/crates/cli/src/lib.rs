//! Config-driven runner behind the `qdyn` binary.
//!
//! A run is described by a TOML file (see `docs/config.md`), validated into
//! a [`config::Prepared`] in atomic units, dispatched by [`run::execute`] and
//! written as a CSV [`output::Series`].

pub mod compare;
pub mod config;
pub mod output;
pub mod run;

use std::path::{Path, PathBuf};

use anyhow::Result;

use crate::config::Prepared;
use crate::output::Series;

/// Loads a config, applies a seed override and runs it.
pub fn run_config(path: &Path, seed: Option<u64>) -> Result<(Prepared, Series)> {
    let mut p = config::load(path)?;
    if let Some(s) = seed {
        p.args.seed = Some(s);
    }
    let t = run::execute(&p)?;
    let series = Series::from_trajectory(&t, p.units.time);
    Ok((p, series))
}

/// A series from either a CSV file or a config to run.
pub fn load_series(path: &Path, seed: Option<u64>) -> Result<Series> {
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
        Series::read_csv(path)
    } else {
        run_config(path, seed).map(|(_, s)| s)
    }
}

/// `out.csv` in the working directory for `dir/out.toml`.
pub fn default_output(config: &Path) -> PathBuf {
    let stem = config.file_stem().map_or_else(|| "out".into(), |s| s.to_string_lossy().into_owned());
    PathBuf::from(format!("{stem}.csv"))
}

pub fn time_label(p: &Prepared) -> &'static str {
    if p.units == config::Units::AU {
        "au"
    } else {
        "fs"
    }
}
