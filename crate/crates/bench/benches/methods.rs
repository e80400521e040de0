use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use qdyn::bath::compute_eta;
use qdyn::heom::{propagate_heom, HeomBathBinding, HeomRequest};
use qdyn::pathint::{calculate_bare_propagators, propagate_quapi, PathBath, QuapiArgs};
use qdyn::qcpi::propagate_eacp;
use qdyn::{DensityMatrix, Operator};
use qdyn_bench::{drude, solvent, spin_boson};

fn eta(c: &mut Criterion) {
    let (_, sd) = spin_boson();
    c.bench_function("eta/ohmic_n20", |b| b.iter(|| compute_eta(&sd, 5.0, 0.25, 20).unwrap()));
}

fn quapi(c: &mut Criterion) {
    let (h, sd) = spin_boson();
    let fbu = calculate_bare_propagators(&h, 0.25, 100, &[]).unwrap();
    let baths = [PathBath::spin_boson(sd)];
    let rho0 = DensityMatrix::pure_state(2, 0);
    let mut g = c.benchmark_group("quapi");
    g.sample_size(10);
    for memory in [4, 6, 8] {
        g.bench_with_input(BenchmarkId::from_parameter(memory), &memory, |b, &l| {
            b.iter(|| propagate_quapi(&fbu, &baths, 5.0, &rho0, 100, l, &QuapiArgs::default()).unwrap())
        });
    }
    g.finish();
}

fn heom(c: &mut Criterion) {
    let (h, _) = spin_boson();
    let bath = HeomBathBinding::new(drude(), Operator::sigma_z(), 0.5, 2).unwrap();
    let rho0 = DensityMatrix::pure_state(2, 0);
    let mut g = c.benchmark_group("heom");
    g.sample_size(10);
    for lmax in [4, 8] {
        let req = HeomRequest::new(h.clone(), vec![bath.clone()], 0.125, 100, lmax);
        g.bench_with_input(BenchmarkId::from_parameter(lmax), &req, |b, r| {
            b.iter(|| propagate_heom(r, &rho0).unwrap())
        });
    }
    g.finish();
}

fn eacp(c: &mut Criterion) {
    let (h, _) = spin_boson();
    let s = solvent(100, 64);
    let rho0 = DensityMatrix::pure_state(2, 0);
    let mut g = c.benchmark_group("eacp");
    g.sample_size(10);
    g.bench_function("100_modes_64_samples", |b| {
        b.iter(|| propagate_eacp(&h, &s, &rho0, 0.25 / 20.0, 0.25, 60).unwrap())
    });
    g.finish();
}

criterion_group!(benches, eta, quapi, heom, eacp);
criterion_main!(benches);
