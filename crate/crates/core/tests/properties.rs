use std::sync::Arc;

use proptest::prelude::*;
use proptest::test_runner::RngSeed;
use slepian_core::oracle::bisection_roots;
use slepian_core::reconstruct::{admm_lasso, uniform_grid, Peak};
use slepian_core::sampling::{prolate_nodes, series_roots};
use slepian_core::spectrum::kernel_value;
use slepian_core::*;

fn config(cases: u32) -> ProptestConfig {
    ProptestConfig {
        cases,
        rng_seed: RngSeed::Fixed(0x5eed),
        failure_persistence: None,
        ..ProptestConfig::default()
    }
}

fn series() -> impl Strategy<Value = Vec<f64>> {
    (1usize..=25).prop_flat_map(|deg| {
        (
            prop::collection::vec(-1.0f64..1.0, deg),
            prop_oneof![0.1f64..1.0, -1.0f64..-0.1],
        )
            .prop_map(|(mut d, lead)| {
                d.push(lead);
                d
            })
    })
}

fn peaks() -> impl Strategy<Value = Vec<Peak>> {
    prop::collection::vec(
        (-0.8f64..0.8, 0.02f64..0.3, 0.1f64..2.0).prop_map(|(center, width, amplitude)| Peak {
            center,
            width,
            amplitude,
        }),
        1..5,
    )
}

proptest! {
    #![proptest_config(config(50))]

    #[test]
    fn colleague_roots_match_bisection(d in series()) {
        let s = LegendreSeries::new(d);
        let reference = bisection_roots(|x| s.eval_unchecked(x), 100_000);
        // Clustered or tangential roots are ill-conditioned for any method.
        let ds = s.derivative();
        let scale = s.max_abs();
        prop_assume!(reference.windows(2).all(|w| w[1] - w[0] > 1e-3));
        prop_assume!(reference.iter().all(|&r| ds.eval_unchecked(r).abs() > 1e-2 * scale));
        let found = series_roots(&s).unwrap().roots;
        prop_assert_eq!(found.len(), reference.len());
        for r in &reference {
            prop_assert!(found.iter().any(|f| (f - r).abs() < 1e-10), "bisection root {} missed", r);
        }
        for f in &found {
            prop_assert!(reference.iter().any(|r| (f - r).abs() < 1e-10), "spurious root {}", f);
        }
    }

    #[test]
    fn forward_is_linear(a in peaks(), b in peaks(), alpha in 0.1f64..10.0, c in 1.0f64..30.0) {
        let spec = KernelSpec::from_c(Statistics::Fermion, c, 2.0).unwrap();
        let ma = SpectralModel::new(a.clone(), false).unwrap();
        let mb = SpectralModel::new(b.clone(), false).unwrap();
        let mut combined: Vec<Peak> = a.iter().map(|p| Peak { amplitude: alpha * p.amplitude, ..*p }).collect();
        combined.extend(b.iter().copied());
        let mc = SpectralModel::new(combined, false).unwrap();
        let xs = uniform_grid(21);
        let ga = forward(&spec, &ma, &xs).unwrap();
        let gb = forward(&spec, &mb, &xs).unwrap();
        let gc = forward(&spec, &mc, &xs).unwrap();
        for i in 0..xs.len() {
            let lin = alpha * ga.values[i] + gb.values[i];
            prop_assert!((gc.values[i] - lin).abs() <= 1e-12 * lin.abs());
        }
    }

    #[test]
    fn admm_reaches_optimality(
        logs in prop::collection::vec(-3.0f64..6.0, 1..30),
        seed_g in prop::collection::vec(-1.0f64..1.0, 30),
        log_lambda in -4.0f64..4.0,
    ) {
        let s: Vec<f64> = logs.iter().map(|l| 10f64.powf(*l)).collect();
        let g: Vec<f64> = s.iter().zip(&seed_g).map(|(sn, r)| r * sn.sqrt()).collect();
        let lambda = 10f64.powf(log_lambda);
        let r = admm_lasso(&s, &g, lambda, &AdmmOptions::default()).unwrap();
        prop_assert!(r.converged);
        prop_assert!(r.kkt_residual < 1e-6, "kkt {}", r.kkt_residual);
        for (n, &rho) in r.rho.iter().enumerate() {
            // diagonal LASSO: soft threshold of S g, divided by S²
            let sg = s[n] * g[n];
            let exact = sg.signum() * (sg.abs() - lambda).max(0.0) / (s[n] * s[n]);
            prop_assert!((rho - exact).abs() <= 1e-6 * exact.abs().max(lambda / (s[n] * s[n])).max(1e-300),
                "mode {}: {} vs {}", n, rho, exact);
        }
    }
}

proptest! {
    #![proptest_config(config(16))]

    #[test]
    fn nodes_are_symmetric_and_interlace(c in 1.0f64..40.0) {
        let spec = KernelSpec::from_c(Statistics::Fermion, c, 1.0).unwrap();
        let n = truncation_order(&spec);
        let basis = build_basis(c, n + 6, Variant::Laplace).unwrap();
        let lo = prolate_nodes(&basis, n).unwrap();
        let hi = prolate_nodes(&basis, n + 1).unwrap();
        prop_assert_eq!(lo.len(), n);
        prop_assert_eq!(hi.len(), n + 1);
        for i in 0..n {
            prop_assert!((lo[i] + lo[n - 1 - i]).abs() < 1e-12);
            prop_assert!(hi[i] < lo[i] && lo[i] < hi[i + 1]);
        }
    }

    #[test]
    fn singular_triples_rebuild_the_kernel(c in 1.0f64..20.0, x in -1.0f64..1.0, y in -1.0f64..1.0, boson in any::<bool>()) {
        let st = if boson { Statistics::Boson } else { Statistics::Fermion };
        let spec = KernelSpec::from_c(st, c, 1.5).unwrap();
        let basis = build_basis(c, 40, Variant::Laplace).unwrap();
        let cs = Arc::new(channel_eigenvalues(&basis).unwrap());
        let g = gsvd(&spec, &cs).unwrap();
        let k = kernel_value(&spec, x, y).unwrap();
        let top = kernel_value(&spec, -1.0, 1.0).unwrap().max(kernel_value(&spec, 0.0, 0.0).unwrap());
        prop_assert!((g.reconstruct(x, y, 40).unwrap() - k).abs() < 1e-10 * top);
    }

    #[test]
    fn eigenvalue_tail_is_strictly_decreasing(c in 1.0f64..30.0) {
        let cs = slepian_core::validation::spectrum_to_floor(c).unwrap();
        prop_assert!(slepian_core::validation::cliff_ratio(&cs) < 1.0);
    }

    #[test]
    fn coordinate_maps_round_trip(beta in 0.1f64..100.0, omega in 0.1f64..50.0, x in -1.0f64..1.0) {
        let spec = KernelSpec::new(Statistics::Boson, beta, omega).unwrap();
        prop_assert!((spec.tau_to_x(spec.x_to_tau(x)) - x).abs() < 1e-14);
        prop_assert!((spec.omega_to_y(spec.y_to_omega(x)) - x).abs() < 1e-15);
        prop_assert!((spec.shannon - beta * omega / std::f64::consts::PI).abs() < 1e-12 * spec.shannon);
    }
}
