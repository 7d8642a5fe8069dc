//! Lattice evolution and Brillouin-zone kernels.
//!
//! With the default `parallel` feature each kernel runs on a one-thread rayon
//! pool and on the default pool. `cargo bench --no-default-features` measures
//! the plain sequential build under the id `sequential`.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use qw5::reconstruction::diamond;
use qw5::{
    evolve, initial_state, BandSelection, Chirality, MomentumProfile, QuadratureGrid,
    SpectralTable, Spinor,
};

/// Runs `f` once per available execution mode under `name/<mode>`.
fn modes<F: Fn() + Sync>(c: &mut Criterion, name: &str, f: F) {
    let mut group = c.benchmark_group(name);
    group.sample_size(10);
    #[cfg(feature = "parallel")]
    {
        let threads = [1, rayon::current_num_threads()];
        for n in threads
            .iter()
            .copied()
            .collect::<std::collections::BTreeSet<_>>()
        {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .unwrap();
            group.bench_function(criterion::BenchmarkId::new("rayon-threads", n), |b| {
                b.iter(|| pool.install(&f))
            });
        }
    }
    #[cfg(not(feature = "parallel"))]
    group.bench_function("sequential", |b| b.iter(&f));
    group.finish();
}

fn lattice(c: &mut Criterion) {
    let start = initial_state(Spinor::basis(Chirality::L)).unwrap();
    modes(c, "evolve_300_steps", || {
        black_box(evolve(start.clone(), 300));
    });
}

fn quadrature(c: &mut Criterion) {
    let grid = QuadratureGrid::new(128).unwrap();
    modes(c, "spectral_table_128", || {
        black_box(SpectralTable::build(&grid).unwrap());
    });

    let table = SpectralTable::build(&grid).unwrap();
    let profile = MomentumProfile::Localized(Spinor::basis(Chirality::L));
    let sites = diamond(8);
    modes(c, "wavefunctions_diamond8_128", || {
        black_box(table.wavefunctions(BandSelection::all(), &profile, &sites, 8));
    });
    modes(c, "flat_kernel_radius10_128", || {
        black_box(table.flat_band_kernel(&diamond(10)));
    });
}

criterion_group!(benches, lattice, quadrature);
criterion_main!(benches);
