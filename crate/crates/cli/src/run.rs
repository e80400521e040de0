//! Method dispatch for a prepared run.

use anyhow::{anyhow, bail, Context, Result};
use qdyn::bath::discretize;
use qdyn::empirical::{propagate_bare, BarePropagateRequest, JumpOperator};
use qdyn::heom::{propagate_heom, HeomBathBinding, HeomRequest};
use qdyn::pathint::{calculate_bare_propagators, check_budget, propagate_quapi, AugmentedMethod, PathBath, QuapiArgs};
use qdyn::qcpi::{propagate_eacp, propagate_qcpi, HarmonicBathSolvent, ThermalSampling};
use qdyn::redfield::propagate_brme;
use qdyn::ttm::{propagate_ttm, TtmBackend};
use qdyn::{apply_propagator, IntegratorConfig, SpectralDensity, Trajectory};

use crate::config::{MethodKind, Prepared};

/// Classical substeps per path-integral step when `classical_dt` is absent.
pub const DEFAULT_CLASSICAL_SUBSTEPS: f64 = 20.0;
pub const DEFAULT_BATH_MODES: usize = 100;

fn quapi_args(p: &Prepared) -> QuapiArgs {
    let mut args = QuapiArgs::default();
    if let Some(f) = p.args.filter_cutoff {
        args.filter_cutoff = f;
    }
    if let Some(m) = p.args.max_elements {
        args.max_elements = m as u128;
    }
    args
}

fn integrator(p: &Prepared) -> IntegratorConfig {
    let mut cfg = IntegratorConfig::default();
    if let Some(r) = p.args.rtol {
        cfg.rtol = r;
    }
    if let Some(a) = p.args.atol {
        cfg.atol = a;
    }
    cfg
}

fn path_baths(p: &Prepared) -> Vec<PathBath> {
    p.baths
        .iter()
        .map(|b| PathBath::new(b.sd.clone(), b.svec.clone().expect("validated diagonal coupling")))
        .collect()
}

fn heom_request(p: &Prepared, beta: f64) -> Result<HeomRequest> {
    let num_modes = p.args.num_modes.unwrap_or(0);
    let baths = p
        .baths
        .iter()
        .map(|b| match &b.sd {
            SpectralDensity::DrudeLorentz(sd) => Ok(HeomBathBinding::new(*sd, b.coupling.clone(), beta, num_modes)?),
            _ => Err(anyhow!("HEOM needs drude_lorentz baths")),
        })
        .collect::<Result<Vec<_>>>()?;
    let mut req = HeomRequest::new(p.hamiltonian.clone(), baths, p.dt, p.ntimes, p.args.lmax.unwrap_or(1));
    req.scaled = p.args.scaled.unwrap_or(true);
    req.integrator = integrator(p);
    Ok(req)
}

fn solvent(p: &Prepared, beta: f64) -> Result<HarmonicBathSolvent> {
    let bath = &p.baths[0];
    let modes = discretize(&bath.sd, p.args.bath_modes.unwrap_or(DEFAULT_BATH_MODES))?;
    let svec = bath.svec.clone().expect("validated diagonal coupling");
    let mut s = HarmonicBathSolvent::new(beta, modes, svec, p.args.n_points.unwrap_or(1), p.args.seed.unwrap_or(0))?;
    if let Some(s0) = p.args.s_init {
        s = s.with_s_init(s0);
    }
    if p.args.sampling.as_deref() == Some("wigner") {
        s = s.with_sampling(ThermalSampling::Wigner);
    }
    Ok(s)
}

/// Fails early when a path tensor would not fit the element budget.
pub fn precheck(p: &Prepared) -> Result<()> {
    let d2 = p.hamiltonian.dim().pow(2);
    let budget = quapi_args(p).max_elements;
    let points = match p.method {
        MethodKind::Quapi => p.args.memory,
        MethodKind::Ttm if p.args.backend.as_deref().unwrap_or("quapi") == "quapi" => p.args.rmax,
        MethodKind::Qcpi => p.args.kmax,
        _ => None,
    };
    if let Some(points) = points {
        check_budget(d2, points, budget).context("refusing to start")?;
    }
    Ok(())
}

pub fn execute(p: &Prepared) -> Result<Trajectory> {
    precheck(p)?;
    let beta = || p.beta.ok_or_else(|| anyhow!("missing beta"));
    let t = match p.method {
        MethodKind::Bare => {
            let fbu = calculate_bare_propagators(&p.hamiltonian, p.dt, p.ntimes, &[])?;
            apply_propagator(&fbu.cumulative(), &p.rho0, p.dt, p.ntimes)?
        }
        MethodKind::Lindblad => {
            let jumps = p.jumps.iter().cloned().map(JumpOperator::new).collect();
            let mut req = BarePropagateRequest::new(p.hamiltonian.clone(), p.rho0.clone(), p.dt, p.ntimes).with_jumps(jumps);
            req.integrator = integrator(p);
            propagate_bare(&req)?
        }
        MethodKind::Brme => {
            let baths: Vec<_> = p.baths.iter().map(|b| (b.sd.clone(), b.coupling.clone())).collect();
            propagate_brme(&p.hamiltonian, &baths, beta()?, &p.rho0, p.dt, p.ntimes)?
        }
        MethodKind::Heom => propagate_heom(&heom_request(p, beta()?)?, &p.rho0)?,
        MethodKind::Quapi => {
            let fbu = calculate_bare_propagators(&p.hamiltonian, p.dt, p.ntimes, &[])?;
            let memory = p.args.memory.unwrap_or(1);
            propagate_quapi(&fbu, &path_baths(p), beta()?, &p.rho0, p.ntimes, memory, &quapi_args(p))?
        }
        MethodKind::Ttm => {
            let rmax = p.args.rmax.unwrap_or(1);
            match p.args.backend.as_deref().unwrap_or("quapi") {
                "heom" => {
                    let req = heom_request(p, beta()?)?;
                    propagate_ttm(&TtmBackend::Heom(&req), &p.rho0, p.ntimes, rmax)?
                }
                name => {
                    let method = if name == "blip" { AugmentedMethod::Blip } else { AugmentedMethod::Quapi };
                    let fbu = calculate_bare_propagators(&p.hamiltonian, p.dt, rmax, &[])?;
                    let baths = path_baths(p);
                    let backend = TtmBackend::Pathint {
                        fbu: &fbu,
                        baths: &baths,
                        beta: beta()?,
                        method,
                        args: quapi_args(p),
                    };
                    propagate_ttm(&backend, &p.rho0, p.ntimes, rmax)?
                }
            }
        }
        MethodKind::Eacp | MethodKind::Qcpi => {
            let s = solvent(p, beta()?)?;
            let cdt = p.classical_dt.unwrap_or(p.dt / DEFAULT_CLASSICAL_SUBSTEPS);
            if p.method == MethodKind::Eacp {
                propagate_eacp(&p.hamiltonian, &s, &p.rho0, cdt, p.dt, p.ntimes)?
            } else {
                let kmax = p.args.kmax.unwrap_or(1);
                propagate_qcpi(&p.hamiltonian, &p.baths[0].sd, &s, &p.rho0, cdt, p.dt, p.ntimes, kmax, &quapi_args(p))?
            }
        }
    };
    if t.len() != p.ntimes + 1 {
        bail!("method returned {} states for {} steps", t.len(), p.ntimes);
    }
    Ok(t)
}
