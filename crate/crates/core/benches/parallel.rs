use std::f64::consts::E;
use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use modulus_core::mappings::{DilatationField, Domain};
use modulus_core::modulus::ConstraintMatrix;
use modulus_core::vaisala::pushforward_density;
use modulus_core::*;

const MODES: [Execution; 2] = [Execution::Sequential, Execution::Parallel];

fn label(exec: Execution) -> &'static str {
    match exec {
        Execution::Sequential => "sequential",
        Execution::Parallel => "parallel",
    }
}

fn annulus_grid(res: usize) -> Grid {
    Grid::cube(2, -1.02 * E, 1.02 * E, res).unwrap()
}

fn assemble(c: &mut Criterion) {
    let fam = CurveFamily::annulus_connecting(1.0, E, 720, 2000).unwrap();
    let grid = annulus_grid(256);
    let mut g = c.benchmark_group("assemble_constraints");
    for exec in MODES {
        g.bench_with_input(
            BenchmarkId::from_parameter(label(exec)),
            &exec,
            |b, &exec| b.iter(|| ConstraintMatrix::assemble(black_box(&fam), &grid, exec).unwrap()),
        );
    }
    g.finish();
}

fn solve(c: &mut Criterion) {
    let fam = CurveFamily::annulus_separating(1.0, E, 200, 800).unwrap();
    let grid = annulus_grid(128);
    let mut g = c.benchmark_group("p_modulus");
    g.sample_size(10);
    for exec in MODES {
        let opts = SolverOptions {
            execution: exec,
            ..SolverOptions::default()
        };
        g.bench_with_input(
            BenchmarkId::from_parameter(label(exec)),
            &opts,
            |b, opts| b.iter(|| p_modulus(black_box(&fam), 2.0, &grid, opts).unwrap()),
        );
    }
    g.finish();
}

fn dilatation(c: &mut Criterion) {
    let f = MappingSpec::power(3).unwrap();
    let grid = annulus_grid(512);
    let mut g = c.benchmark_group("dilatation_field");
    for exec in MODES {
        g.bench_with_input(
            BenchmarkId::from_parameter(label(exec)),
            &exec,
            |b, &exec| b.iter(|| DilatationField::compute(black_box(&f), 2.0, &grid, exec)),
        );
    }
    g.finish();
}

fn pushforward(c: &mut Criterion) {
    let grid = annulus_grid(256);
    let rho = DensityField::from_fn(grid.clone(), Execution::Parallel, |x| {
        1.0 / (1.0 + x[0].hypot(x[1]))
    })
    .unwrap();
    let f = MappingSpec::power(2).unwrap().with_domain(Domain::Annulus {
        inner: 1.0,
        outer: E,
    });
    let image = f.image_grid(&grid, vec![256, 256]).unwrap();
    let mut g = c.benchmark_group("pushforward_density");
    for exec in MODES {
        g.bench_with_input(
            BenchmarkId::from_parameter(label(exec)),
            &exec,
            |b, &exec| {
                b.iter(|| pushforward_density(black_box(&rho), &f, 2, &image, exec).unwrap())
            },
        );
    }
    g.finish();
}

criterion_group!(benches, assemble, solve, dilatation, pushforward);
criterion_main!(benches);
