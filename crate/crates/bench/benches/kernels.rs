//! Criterion benchmarks for the numerical kernels that dominate experiment
//! runtime: the tensor Gauss-Hermite semigroup quadrature, the killed
//! eigensystem build, second-order jet evaluation, explicit heat stepping,
//! and a batch of coupled trajectory trials.

use criterion::{criterion_group, criterion_main, Criterion};
use harnack_lab::coupling::{simulate_coordinate_pair, Driver};
use harnack_lab::field::{CubicPoly, ExpField, ExprField, ScalarField, VectorFieldSet};
use harnack_lab::gamma::gamma2;
use harnack_lab::heat::{solve_heat_grid, GridConfig};
use harnack_lab::killed::KilledCoordinate;
use harnack_lab::spectral::SpectralModel;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::hint::black_box;
use std::sync::Arc;

fn semigroup_quadrature(c: &mut Criterion) {
    let model = SpectralModel::new(vec![1.0, 3.0]).unwrap();
    let f = |z: &[f64]| (z[0] + 0.7 * z[1]).sin();
    c.bench_function("semigroup_gradient_bound_d2_order24", |b| {
        b.iter(|| {
            model
                .gradient_bound_check(
                    black_box(0.5),
                    &[0.3, -0.2],
                    &[1.0, -1.0],
                    24,
                    f,
                )
                .unwrap()
        })
    });
}

fn killed_eigensystem(c: &mut Criterion) {
    c.bench_function("killed_eigensystem_n1000_modes20", |b| {
        b.iter(|| {
            KilledCoordinate::new(black_box(1.0), 6.0, 1000, 20)
                .unwrap()
                .beta1()
        })
    });
}

fn second_order_jets(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let d = 3;
    let comps: Vec<Arc<dyn ScalarField>> = (0..d)
        .map(|_| Arc::new(ExpField(CubicPoly::random(d, 0.4, &mut rng))) as Arc<dyn ScalarField>)
        .collect();
    let fields = VectorFieldSet::from_fields(d, comps).unwrap();
    let f = CubicPoly::random(d, 1.0, &mut rng);
    let x = [0.2, -0.4, 0.1];
    c.bench_function("gamma2_dual_route_d3_one_field", |b| {
        b.iter(|| gamma2(&f, &fields, black_box(&x)).unwrap())
    });
}

fn heat_grid_steps(c: &mut Criterion) {
    let datum = ExprField::new("exp(-x*x/2)", 1).unwrap();
    let field: Arc<dyn ScalarField> = Arc::new(ExprField::new("2 + sin(x)", 1).unwrap());
    let fields = VectorFieldSet::from_fields(1, vec![field]).unwrap();
    let grid = GridConfig::line(-10.0, 10.0, 401);
    c.bench_function("heat_grid_401_nodes_to_t0.1", |b| {
        b.iter(|| solve_heat_grid(&fields, &datum, black_box(&[0.1]), &grid).unwrap())
    });
}

fn coupling_trial_batch(c: &mut Criterion) {
    c.bench_function("coupling_20_trials_dt1e-3", |b| {
        b.iter(|| {
            let mut meets = 0usize;
            for trial in 0..20u64 {
                let mut rng = ChaCha8Rng::seed_from_u64(9);
                rng.set_stream(trial);
                let pair = simulate_coordinate_pair(
                    black_box(1.0),
                    0.5,
                    -0.5,
                    1e-3,
                    1.0,
                    Driver::Independent,
                    &mut rng,
                )
                .unwrap();
                meets += usize::from(pair.meet_time.is_some());
            }
            meets
        })
    });
}

criterion_group!(
    benches,
    semigroup_quadrature,
    killed_eigensystem,
    second_order_jets,
    heat_grid_steps,
    coupling_trial_batch
);
criterion_main!(benches);
