use proptest::prelude::*;

use rmflab::current::current_field;
use rmflab::ensemble::{mirrored, wegner_experiment, ExperimentConfig};
use rmflab::gauge::{FluxField, Gauge, GaugeFunction, VectorPotential};
use rmflab::lattice::BoxRegion;
use rmflab::operator::{max_spectral_deviation, HamiltonianMatrix};
use rmflab::randomfield::{sample, DensityMode, Disorder, FluxDensity};

fn flux_field(half_width: u32, seed: u64, b: f64) -> FluxField {
    let region = BoxRegion::centered(half_width).unwrap();
    let density = FluxDensity::bump(b, DensityMode::Symmetric).unwrap();
    sample(&density, &region, seed, 0).flux_field
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn spectrum_is_gauge_invariant(seed in any::<u64>(), b in 0.2f64..1.4, lambda_seed in any::<u64>()) {
        let flux = flux_field(2, seed, b);
        let reference = HamiltonianMatrix::from_flux(&flux, Gauge::Right).unwrap().eigenvalues().unwrap();
        for gauge in Gauge::ALL {
            let other = HamiltonianMatrix::from_flux(&flux, gauge).unwrap().eigenvalues().unwrap();
            prop_assert!(max_spectral_deviation(&reference, &other) < 1e-9);
        }
        let potential = VectorPotential::from_flux(&flux, Gauge::Above);
        let region = *potential.region();
        let mut state = lambda_seed;
        let lambda = GaugeFunction::from_fn(region, |_| {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64 * 10.0
        });
        let moved = potential.gauge_transform(&lambda).unwrap();
        let transformed = HamiltonianMatrix::assemble(&region, &moved).unwrap().eigenvalues().unwrap();
        prop_assert!(max_spectral_deviation(&reference, &transformed) < 1e-9);
    }

    #[test]
    fn spectrum_has_particle_hole_symmetry(seed in any::<u64>(), b in 0.2f64..1.4) {
        let ev = HamiltonianMatrix::from_flux(&flux_field(2, seed, b), Gauge::default())
            .unwrap()
            .eigenvalues()
            .unwrap();
        let n = ev.len();
        for k in 0..n {
            prop_assert!((ev[k] + ev[n - 1 - k] - 8.0).abs() < 1e-9);
            prop_assert!(ev[k] >= -1e-12 && ev[k] <= 8.0 + 1e-12);
        }
    }

    #[test]
    fn eigenfunction_currents_are_divergence_free(seed in any::<u64>(), k in 0usize..25) {
        let flux = flux_field(2, seed, 0.8);
        let potential = VectorPotential::from_flux(&flux, Gauge::default());
        let spectrum = HamiltonianMatrix::assemble(potential.region(), &potential)
            .unwrap()
            .eigendecompose()
            .unwrap();
        let current = current_field(spectrum.eigenvector(k).unwrap(), &potential).unwrap();
        prop_assert!(current.max_abs_divergence() < 1e-10);
    }

    #[test]
    fn sampling_is_a_function_of_seed_and_index(seed in any::<u64>(), index in 0u64..1000) {
        let region = BoxRegion::centered(3).unwrap();
        let disorder = Disorder::bump(0.7).unwrap();
        prop_assert_eq!(
            disorder.sample(&region, seed, index).flux_field,
            disorder.sample(&region, seed, index).flux_field
        );
    }
}

fn small_ensemble() -> ExperimentConfig {
    ExperimentConfig {
        half_widths: vec![3],
        energies: vec![0.8],
        eta_grid: vec![0.0, 0.1, 0.2, 0.4],
        samples: 40,
        master_seed: 11,
        worker_count: 2,
        ..ExperimentConfig::default()
    }
}

#[test]
fn wegner_counts_grow_with_eta() {
    let table = wegner_experiment(&small_ensemble()).unwrap();
    let means: Vec<f64> = table.rows.iter().map(|r| r.mean_count).collect();
    assert!(means.windows(2).all(|w| w[0] <= w[1]), "{means:?}");
    assert!(*means.last().unwrap() > 0.0);
}

#[test]
fn mirrored_windows_have_equal_means() {
    // same disorder samples; λ ↦ 8 − λ maps each window onto its mirror
    let config = small_ensemble();
    let lower = wegner_experiment(&config).unwrap();
    let upper = wegner_experiment(&mirrored(&config)).unwrap();
    for (a, b) in lower.rows.iter().zip(&upper.rows) {
        assert_eq!(a.eta, b.eta);
        assert!((a.mean_count - b.mean_count).abs() <= 3.0 * a.stderr.max(b.stderr).max(1e-12));
    }
}
