use canon_bench::{bump_hamiltonian, bump_weight, step_weight, z_line};
use canon_core::spectral::weyl_function_with;
use canon_core::{
    a2_classical, f_mu_apply, factor_via_transform, inverse_spectral, spectral_density,
    transfer_matrix, Grid, HalfLineFunction, TimeFunction, WeylOptions,
};
use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};

fn forward(c: &mut Criterion) {
    let h = bump_hamiltonian(20.0, 512);
    let zs = z_line(16, 0.5);
    c.bench_function("transfer_matrix/512", |b| {
        b.iter(|| {
            zs.iter()
                .map(|&z| transfer_matrix(&h, h.end(), z).unwrap().m[(0, 0)])
                .sum::<canon_core::C64>()
        })
    });
    let opts = WeylOptions::with_tol(1e-9).held();
    c.bench_function("weyl/512", |b| {
        b.iter(|| weyl_function_with(&h, black_box(zs[5]), &opts).unwrap())
    });
    c.bench_function("density/512", |b| {
        b.iter(|| spectral_density(&h, black_box(0.7), 0.05).unwrap())
    });
}

fn inverse(c: &mut Criterion) {
    let mut g = c.benchmark_group("inverse_spectral");
    g.sample_size(10);
    for n in [128usize, 256, 512] {
        g.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, &n| {
            b.iter(|| inverse_spectral(&step_weight(), 20.0, n).unwrap())
        });
    }
    g.finish();
}

fn transform(c: &mut Criterion) {
    let h = bump_hamiltonian(2.0, 64);
    let f = TimeFunction::piecewise(
        Grid::uniform(4.0, 8).unwrap(),
        vec![1.0, -0.5, 0.25, 0.0, 2.0, 1.0, -1.0, 0.5],
    )
    .unwrap();
    let zs = z_line(256, 0.0);
    c.bench_function("f_mu_apply/256", |b| {
        b.iter(|| f_mu_apply(&h, &f, &zs).unwrap())
    });
}

fn factorize(c: &mut Criterion) {
    let mut g = c.benchmark_group("factor_via_transform");
    g.sample_size(10);
    for n in [64usize, 128] {
        g.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, &n| {
            b.iter(|| factor_via_transform(&bump_weight(), 4.0, n).unwrap())
        });
    }
    g.finish();
}

fn weights(c: &mut Criterion) {
    let n = 1024;
    let grid = Grid::uniform(64.0, n).unwrap();
    let values = (0..n)
        .map(|k| 1.0 + 0.5 * (k as f64 * 0.37).sin())
        .collect();
    let f = HalfLineFunction::new(grid, values, Some(1.0)).unwrap();
    c.bench_function("a2_classical/1024", |b| {
        b.iter(|| a2_classical(&f, 2).unwrap())
    });
}

criterion_group!(benches, forward, inverse, transform, factorize, weights);
criterion_main!(benches);
