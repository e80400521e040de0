//! Run descriptions: TOML parsing, validation and conversion to atomic units.

use std::fmt;
use std::path::{Path, PathBuf};

use qdyn::bath::{read_tabulated, TableMode};
use qdyn::units::{kelvin_to_beta, AU2FS, INVCM2AU};
use qdyn::{
    create_nn_hamiltonian, create_tls_hamiltonian, CMatrix, Complex64, DensityMatrix, DrudeLorentzSD,
    ExponentialCutoffSD, Operator, SpectralDensity, TabulatedSD,
};
use serde::Deserialize;

/// A configuration problem, located at a line of the source file.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub line: usize,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub system: SystemConfig,
    #[serde(default)]
    pub baths: Vec<BathConfig>,
    pub initial_state: InitialStateConfig,
    pub method: MethodConfig,
    pub simulation: SimulationConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    #[serde(default = "default_units")]
    pub units: String,
    pub hamiltonian: Option<Vec<Vec<f64>>>,
    pub hamiltonian_imag: Option<Vec<Vec<f64>>>,
    pub tls: Option<TlsConfig>,
    pub chain: Option<ChainConfig>,
}

fn default_units() -> String {
    "au".into()
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TlsConfig {
    pub epsilon: f64,
    pub omega: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainConfig {
    pub site_energies: Vec<f64>,
    pub coupling: f64,
    #[serde(default)]
    pub periodic: bool,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BathConfig {
    #[serde(rename = "type")]
    pub kind: String,
    pub xi: Option<f64>,
    pub omega_c: Option<f64>,
    pub n: Option<f64>,
    pub lambda: Option<f64>,
    pub gamma: Option<f64>,
    /// Alternative to `gamma`: the bath relaxation time `1/γ`.
    pub cutoff_time: Option<f64>,
    pub delta_s: Option<f64>,
    pub path: Option<String>,
    pub svec: Option<Vec<f64>>,
    pub coupling: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialStateConfig {
    pub pure: Option<usize>,
    pub matrix: Option<Vec<Vec<f64>>>,
    pub matrix_imag: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JumpConfig {
    pub matrix: Vec<Vec<f64>>,
    pub matrix_imag: Option<Vec<Vec<f64>>>,
    #[serde(default = "one")]
    pub rate: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodConfig {
    pub name: String,
    #[serde(alias = "L")]
    pub memory: Option<usize>,
    pub filter_cutoff: Option<f64>,
    pub max_elements: Option<u64>,
    pub lmax: Option<usize>,
    pub num_modes: Option<usize>,
    pub scaled: Option<bool>,
    pub rmax: Option<usize>,
    pub backend: Option<String>,
    pub kmax: Option<usize>,
    pub n_points: Option<usize>,
    pub seed: Option<u64>,
    pub bath_modes: Option<usize>,
    pub classical_dt: Option<f64>,
    pub sampling: Option<String>,
    pub s_init: Option<f64>,
    #[serde(default)]
    pub jumps: Vec<JumpConfig>,
    pub rtol: Option<f64>,
    pub atol: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    pub dt: f64,
    pub ntimes: usize,
    pub beta: Option<f64>,
    pub temperature: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub csv: Option<String>,
    #[serde(default)]
    pub plot: bool,
    /// Diagonal elements to plot; all of them when absent.
    pub observables: Option<Vec<usize>>,
}

/// Energy and time conversion factors into atomic units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Units {
    pub energy: f64,
    pub time: f64,
}

impl Units {
    pub const AU: Units = Units { energy: 1.0, time: 1.0 };

    fn parse(tag: &str) -> Option<Self> {
        match tag.replace(' ', "").as_str() {
            "au" => Some(Self::AU),
            "cm^-1,fs" => Some(Units {
                energy: INVCM2AU,
                time: 1.0 / AU2FS,
            }),
            _ => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PreparedBath {
    pub sd: SpectralDensity,
    pub coupling: Operator,
    /// Diagonal of `coupling` when it is diagonal.
    pub svec: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MethodKind {
    Bare,
    Lindblad,
    Brme,
    Heom,
    Quapi,
    Ttm,
    Eacp,
    Qcpi,
}

impl MethodKind {
    fn parse(name: &str) -> Option<Self> {
        Some(match name.to_ascii_lowercase().as_str() {
            "bare" => Self::Bare,
            "lindblad" => Self::Lindblad,
            "brme" => Self::Brme,
            "heom" => Self::Heom,
            "quapi" => Self::Quapi,
            "ttm" => Self::Ttm,
            "eacp" => Self::Eacp,
            "qcpi" => Self::Qcpi,
            _ => return None,
        })
    }

    fn needs_beta(self) -> bool {
        !matches!(self, Self::Bare | Self::Lindblad)
    }
}

/// A validated run, entirely in atomic units.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub units: Units,
    pub hamiltonian: Operator,
    pub rho0: DensityMatrix,
    pub baths: Vec<PreparedBath>,
    pub jumps: Vec<Operator>,
    pub dt: f64,
    pub ntimes: usize,
    pub beta: Option<f64>,
    pub method: MethodKind,
    /// Method arguments as written; time-valued ones converted.
    pub args: MethodConfig,
    pub classical_dt: Option<f64>,
    pub output: OutputConfig,
}

/// Source text plus the section layout, for pointing diagnostics at lines.
struct Locator<'a> {
    lines: Vec<&'a str>,
}

impl<'a> Locator<'a> {
    fn new(src: &'a str) -> Self {
        Self { lines: src.lines().collect() }
    }

    fn line_of_offset(&self, offset: usize, src: &str) -> usize {
        src[..offset.min(src.len())].matches('\n').count() + 1
    }

    /// Line of `key` inside the `index`-th occurrence of `section`, or of
    /// the section header when the key is absent.
    fn find(&self, section: &str, index: usize, key: Option<&str>) -> usize {
        let mut seen = 0usize;
        let mut header = None;
        for (i, raw) in self.lines.iter().enumerate() {
            let line = raw.trim();
            let name = line.trim_matches(|c| c == '[' || c == ']').trim();
            // array rows also start with '[', headers start with a bare key
            if line.starts_with('[') && name.starts_with(|c: char| c.is_ascii_alphabetic() || c == '_') {
                if header.is_some() && !name.starts_with(&format!("{section}.")) {
                    break;
                }
                if name == section {
                    if seen == index {
                        header = Some(i);
                    }
                    seen += 1;
                }
                continue;
            }
            if let (Some(_), Some(k)) = (header, key) {
                let lhs = line.split('=').next().unwrap_or("").trim();
                if line.contains('=') && lhs == k {
                    return i + 1;
                }
            }
        }
        header.map_or(1, |h| h + 1)
    }
}

struct Ctx<'a> {
    loc: Locator<'a>,
}

impl Ctx<'_> {
    fn err(&self, section: &str, index: usize, key: Option<&str>, message: impl Into<String>) -> ConfigError {
        ConfigError {
            line: self.loc.find(section, index, key),
            message: message.into(),
        }
    }
}

pub fn parse_config(src: &str) -> Result<RunConfig, ConfigError> {
    toml::from_str(src).map_err(|e| {
        let loc = Locator::new(src);
        ConfigError {
            line: e.span().map_or(1, |s| loc.line_of_offset(s.start, src)),
            message: e.message().trim().to_string(),
        }
    })
}

/// Reads, parses and validates a configuration file. Relative paths inside
/// it (tabulated spectral densities) resolve against its directory.
pub fn load(path: &Path) -> anyhow::Result<Prepared> {
    let src = std::fs::read_to_string(path)
        .map_err(|e| anyhow::anyhow!("cannot read {}: {e}", path.display()))?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    prepare(&src, &base).map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))
}

pub fn prepare(src: &str, base_dir: &Path) -> Result<Prepared, ConfigError> {
    let cfg = parse_config(src)?;
    let ctx = Ctx { loc: Locator::new(src) };

    let units = Units::parse(&cfg.system.units).ok_or_else(|| {
        ctx.err(
            "system",
            0,
            Some("units"),
            format!("unknown units `{}` (expected \"au\" or \"cm^-1,fs\")", cfg.system.units),
        )
    })?;
    let method = MethodKind::parse(&cfg.method.name).ok_or_else(|| {
        ctx.err(
            "method",
            0,
            Some("name"),
            format!(
                "unknown method `{}` (expected bare, lindblad, brme, heom, quapi, ttm, eacp or qcpi)",
                cfg.method.name
            ),
        )
    })?;

    let hamiltonian = system_hamiltonian(&cfg.system, units, &ctx)?;
    let d = hamiltonian.dim();
    let rho0 = initial_state(&cfg.initial_state, d, &ctx)?;

    let sim = &cfg.simulation;
    if !(sim.dt > 0.0 && sim.dt.is_finite()) {
        return Err(ctx.err("simulation", 0, Some("dt"), "dt must be positive"));
    }
    if sim.ntimes == 0 {
        return Err(ctx.err("simulation", 0, Some("ntimes"), "ntimes must be at least 1"));
    }
    let beta = match (sim.beta, sim.temperature) {
        (Some(_), Some(_)) => {
            return Err(ctx.err("simulation", 0, Some("temperature"), "give either beta or temperature, not both"))
        }
        (Some(b), None) if b > 0.0 && b.is_finite() => Some(b / units.energy),
        (None, Some(t)) if t > 0.0 && t.is_finite() => Some(kelvin_to_beta(t)),
        (Some(_), None) => return Err(ctx.err("simulation", 0, Some("beta"), "beta must be positive")),
        (None, Some(_)) => {
            return Err(ctx.err("simulation", 0, Some("temperature"), "temperature must be positive"))
        }
        (None, None) => None,
    };
    if method.needs_beta() && beta.is_none() {
        return Err(ctx.err(
            "simulation",
            0,
            None,
            format!("method `{}` needs `beta` or `temperature`", cfg.method.name),
        ));
    }

    let baths = cfg
        .baths
        .iter()
        .enumerate()
        .map(|(i, b)| prepare_bath(b, i, d, units, base_dir, &ctx))
        .collect::<Result<Vec<_>, _>>()?;

    let jumps = cfg
        .method
        .jumps
        .iter()
        .map(|j| {
            let m = complex_matrix(&j.matrix, j.matrix_imag.as_deref(), d)
                .map_err(|m| ctx.err("method", 0, Some("jumps"), format!("jump operator: {m}")))?;
            if !(j.rate >= 0.0 && j.rate.is_finite()) {
                return Err(ctx.err("method", 0, Some("jumps"), "jump rate must be non-negative"));
            }
            let scale = Complex64::new((j.rate * units.energy).sqrt(), 0.0);
            Operator::new(m * scale).map_err(|e| ctx.err("method", 0, Some("jumps"), e.to_string()))
        })
        .collect::<Result<Vec<_>, _>>()?;

    let dt = sim.dt * units.time;
    let classical_dt = cfg.method.classical_dt.map(|c| c * units.time);
    check_method(method, &cfg.method, &baths, &ctx)?;

    Ok(Prepared {
        units,
        hamiltonian,
        rho0,
        baths,
        jumps,
        dt,
        ntimes: sim.ntimes,
        beta,
        method,
        args: cfg.method,
        classical_dt,
        output: cfg.output,
    })
}

fn complex_matrix(re: &[Vec<f64>], im: Option<&[Vec<f64>]>, d: usize) -> Result<CMatrix, String> {
    let square = |m: &[Vec<f64>]| m.len() == d && m.iter().all(|r| r.len() == d);
    if !square(re) {
        return Err(format!("expected a {d}x{d} matrix"));
    }
    if let Some(im) = im {
        if !square(im) {
            return Err(format!("expected a {d}x{d} imaginary part"));
        }
    }
    Ok(CMatrix::from_fn(d, d, |i, j| {
        Complex64::new(re[i][j], im.map_or(0.0, |m| m[i][j]))
    }))
}

fn system_hamiltonian(sys: &SystemConfig, units: Units, ctx: &Ctx) -> Result<Operator, ConfigError> {
    let given = [sys.hamiltonian.is_some(), sys.tls.is_some(), sys.chain.is_some()];
    if given.iter().filter(|&&g| g).count() != 1 {
        return Err(ctx.err(
            "system",
            0,
            None,
            "give exactly one of `hamiltonian`, `tls` or `chain`",
        ));
    }
    let e = units.energy;
    let h = if let Some(rows) = &sys.hamiltonian {
        let d = rows.len();
        let m = complex_matrix(rows, sys.hamiltonian_imag.as_deref(), d)
            .map_err(|m| ctx.err("system", 0, Some("hamiltonian"), m))?;
        Operator::new(m * Complex64::new(e, 0.0))
            .map_err(|err| ctx.err("system", 0, Some("hamiltonian"), err.to_string()))?
    } else if let Some(t) = &sys.tls {
        create_tls_hamiltonian(t.epsilon * e, t.omega * e)
    } else {
        let c = sys.chain.as_ref().unwrap();
        let sites: Vec<f64> = c.site_energies.iter().map(|x| x * e).collect();
        create_nn_hamiltonian(&sites, c.coupling * e, c.periodic)
            .map_err(|err| ctx.err("system", 0, Some("chain"), err.to_string()))?
    };
    if !h.is_hermitian() {
        return Err(ctx.err("system", 0, Some("hamiltonian"), "Hamiltonian must be Hermitian"));
    }
    Ok(h)
}

fn initial_state(cfg: &InitialStateConfig, d: usize, ctx: &Ctx) -> Result<DensityMatrix, ConfigError> {
    match (cfg.pure, &cfg.matrix) {
        (Some(i), None) if i < d => Ok(DensityMatrix::pure_state(d, i)),
        (Some(i), None) => Err(ctx.err(
            "initial_state",
            0,
            Some("pure"),
            format!("state index {i} out of range for dimension {d}"),
        )),
        (None, Some(m)) => {
            let m = complex_matrix(m, cfg.matrix_imag.as_deref(), d)
                .map_err(|msg| ctx.err("initial_state", 0, Some("matrix"), msg))?;
            DensityMatrix::new(m).map_err(|e| ctx.err("initial_state", 0, Some("matrix"), e.to_string()))
        }
        _ => Err(ctx.err("initial_state", 0, None, "give exactly one of `pure` or `matrix`")),
    }
}

fn prepare_bath(
    b: &BathConfig,
    index: usize,
    d: usize,
    units: Units,
    base_dir: &Path,
    ctx: &Ctx,
) -> Result<PreparedBath, ConfigError> {
    let err = |key: Option<&str>, msg: String| ctx.err("baths", index, key, msg);
    let need = |v: Option<f64>, key: &str| {
        v.ok_or_else(|| err(None, format!("bath of type `{}` needs `{key}`", b.kind)))
    };
    let e = units.energy;
    let delta_s = b.delta_s.unwrap_or(2.0);
    let sd: SpectralDensity = match b.kind.as_str() {
        "exponential_cutoff" | "ohmic" => ExponentialCutoffSD {
            xi: need(b.xi, "xi")?,
            omega_c: need(b.omega_c, "omega_c")? * e,
            n: b.n.unwrap_or(1.0),
            delta_s,
        }
        .into(),
        "drude_lorentz" => {
            let gamma = match (b.gamma, b.cutoff_time) {
                (Some(g), None) => g * e,
                (None, Some(t)) => 1.0 / (t * units.time),
                _ => return Err(err(None, "drude_lorentz bath needs exactly one of `gamma` or `cutoff_time`".into())),
            };
            DrudeLorentzSD::new(need(b.lambda, "lambda")? * e, gamma, delta_s).into()
        }
        "tabulated" => {
            let p = b.path.as_ref().ok_or_else(|| err(None, "tabulated bath needs `path`".into()))?;
            let full: PathBuf = base_dir.join(p);
            let t = read_tabulated(&full).map_err(|x| err(Some("path"), format!("{}: {x}", full.display())))?;
            let grid: Vec<f64> = t.omega_grid().iter().map(|w| w * e).collect();
            let j: Vec<f64> = t.j_on_grid().iter().map(|v| v * e).collect();
            TabulatedSD::new(grid, j, TableMode::J)
                .map_err(|x| err(Some("path"), x.to_string()))?
                .into()
        }
        other => {
            return Err(err(
                Some("type"),
                format!("unknown bath type `{other}` (expected exponential_cutoff, drude_lorentz or tabulated)"),
            ))
        }
    };
    sd.validate().map_err(|x| err(None, x.to_string()))?;

    let (coupling, svec) = match (&b.svec, &b.coupling) {
        (Some(s), None) => {
            if s.len() != d {
                return Err(err(Some("svec"), format!("svec has {} entries, system dimension is {d}", s.len())));
            }
            let m = CMatrix::from_fn(d, d, |i, j| Complex64::new(if i == j { s[i] } else { 0.0 }, 0.0));
            (Operator::new(m).unwrap(), Some(s.clone()))
        }
        (None, Some(rows)) => {
            let m = complex_matrix(rows, None, d).map_err(|m| err(Some("coupling"), m))?;
            let op = Operator::new(m).map_err(|x| err(Some("coupling"), x.to_string()))?;
            if !op.is_hermitian() {
                return Err(err(Some("coupling"), "coupling operator must be Hermitian".into()));
            }
            let diag = op.diagonal_values().map(|v| v.iter().map(|z| z.re).collect());
            (op, diag)
        }
        _ => return Err(err(None, "bath needs exactly one of `svec` or `coupling`".into())),
    };
    Ok(PreparedBath { sd, coupling, svec })
}

fn check_method(m: MethodKind, a: &MethodConfig, baths: &[PreparedBath], ctx: &Ctx) -> Result<(), ConfigError> {
    let missing = |key: &str| ctx.err("method", 0, None, format!("method `{}` needs `{key}`", a.name));
    let positive = |v: Option<usize>, key: &str| match v {
        Some(0) => Err(ctx.err("method", 0, Some(key), format!("`{key}` must be at least 1"))),
        Some(_) => Ok(()),
        None => Err(missing(key)),
    };
    let need_baths = |ok: bool| {
        if baths.is_empty() {
            Err(ctx.err("method", 0, Some("name"), format!("method `{}` needs at least one [[baths]] entry", a.name)))
        } else if !ok {
            Err(ctx.err("method", 0, Some("name"), format!("method `{}` needs diagonal bath couplings", a.name)))
        } else {
            Ok(())
        }
    };
    let diagonal = baths.iter().all(|b| b.svec.is_some());
    match m {
        MethodKind::Bare => {}
        MethodKind::Lindblad => {
            if a.jumps.is_empty() {
                return Err(missing("jumps"));
            }
        }
        MethodKind::Brme => need_baths(true)?,
        MethodKind::Heom => {
            need_baths(true)?;
            positive(a.lmax, "lmax")?;
            if a.num_modes.is_none() {
                return Err(missing("num_modes"));
            }
            check_drude(baths, ctx)?;
        }
        MethodKind::Quapi => {
            need_baths(diagonal)?;
            positive(a.memory, "memory")?;
        }
        MethodKind::Ttm => {
            positive(a.rmax, "rmax")?;
            match a.backend.as_deref().unwrap_or("quapi") {
                "quapi" | "blip" => need_baths(diagonal)?,
                "heom" => {
                    need_baths(true)?;
                    positive(a.lmax, "lmax")?;
                    if a.num_modes.is_none() {
                        return Err(missing("num_modes"));
                    }
                    check_drude(baths, ctx)?;
                }
                other => {
                    return Err(ctx.err(
                        "method",
                        0,
                        Some("backend"),
                        format!("unknown TTM backend `{other}` (expected quapi, blip or heom)"),
                    ))
                }
            }
        }
        MethodKind::Eacp | MethodKind::Qcpi => {
            need_baths(diagonal)?;
            if baths.len() != 1 {
                return Err(ctx.err("baths", 1, None, "classical-path methods take a single bath"));
            }
            positive(a.n_points, "n_points")?;
            if m == MethodKind::Qcpi {
                positive(a.kmax, "kmax")?;
            }
            if let Some(s) = a.sampling.as_deref() {
                if !matches!(s, "boltzmann" | "wigner") {
                    return Err(ctx.err(
                        "method",
                        0,
                        Some("sampling"),
                        format!("unknown sampling `{s}` (expected boltzmann or wigner)"),
                    ));
                }
            }
        }
    }
    Ok(())
}

fn check_drude(baths: &[PreparedBath], ctx: &Ctx) -> Result<(), ConfigError> {
    for (i, b) in baths.iter().enumerate() {
        if !matches!(b.sd, SpectralDensity::DrudeLorentz(_)) {
            return Err(ctx.err("baths", i, Some("type"), "HEOM needs drude_lorentz baths"));
        }
    }
    Ok(())
}
