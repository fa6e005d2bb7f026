use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use gqfn::dpa::{self, DpaParams};
use gqfn::generators::{self, LindbladForm};
use gqfn::operator::{annihilator, number, qubit};
use gqfn::random::{self, ModelShape};
use gqfn::{par, GaussianNoiseSpec, HilbertSpec, Operator, Parallelism, SlhModel};

const MODES: [(&str, Parallelism); 2] = [("parallel", Parallelism::Parallel), ("sequential", Parallelism::Sequential)];

fn superoperator_columns(c: &mut Criterion) {
    let mut group = c.benchmark_group("superoperator_build");
    for dim in [12, 24] {
        let sp = HilbertSpec::new(vec![dim]).unwrap();
        let a = annihilator(&sp, 0).unwrap();
        let h = number(&sp, 0).unwrap() * 0.4;
        let noise = GaussianNoiseSpec::single(0.5, gqfn::C64::new(0.2, 0.1));
        let form = LindbladForm::gaussian(&[a], &h, &noise).unwrap();
        for (name, mode) in MODES {
            group.bench_with_input(BenchmarkId::new(name, dim), &form, |b, f| {
                b.iter(|| black_box(f.superoperator(mode)))
            });
        }
    }
    group.finish();
}

fn k_sweep(c: &mut Criterion) {
    let sp = HilbertSpec::new(vec![2]).unwrap();
    let sm = qubit::sigma_minus(&sp, 0).unwrap();
    let system = SlhModel::from_coupling(vec![sm], Operator::zero(&sp)).unwrap();
    let params = DpaParams::new(3.0, 1.0, 1.0, 3).unwrap();
    let ks: Vec<f64> = (1..=8).map(|i| 5.0 * i as f64).collect();
    let mut group = c.benchmark_group("k_sweep");
    group.sample_size(10);
    for (name, mode) in MODES {
        group.bench_function(name, |b| {
            b.iter(|| {
                par::map(mode, &ks, |&k| {
                    let p = params.with_k(k).unwrap();
                    let cascade = dpa::cascade(&system, &p).unwrap();
                    generators::vacuum_lindblad(&cascade, Parallelism::Sequential).norm()
                })
            })
        });
    }
    group.finish();
}

fn random_draws(c: &mut Criterion) {
    let sp = HilbertSpec::new(vec![2, 3]).unwrap();
    let mut group = c.benchmark_group("random_draws");
    for (name, mode) in MODES {
        group.bench_function(name, |b| {
            b.iter(|| {
                par::map_range(mode, 256, |i| {
                    let mut rng = ChaCha8Rng::seed_from_u64(i as u64);
                    let g = random::slh_model(&mut rng, &sp, ModelShape::channels(2).with_static_s());
                    let noise = random::noise(&mut rng, 2, 0.8);
                    generators::gaussian_lindblad_model(&g, &noise, Parallelism::Sequential).unwrap().norm()
                })
            })
        });
    }
    group.finish();
}

criterion_group!(benches, superoperator_columns, k_sweep, random_draws);
criterion_main!(benches);
