use approx::assert_abs_diff_eq;
use proptest::prelude::*;

use resonant_core::dynamics::{
    convergence_check, decoherence_fidelity, Propagator, SimulationConfig, StateVector,
};
use resonant_core::jc::{
    build_static_hamiltonian, dressed_eigensystem, transition_frequencies, DressedBasis,
    DressedLabel, DriveOperatorKind, SystemParams,
};
use resonant_core::linalg::inner;
use resonant_core::pulses::{
    cook_shore_amplitudes, ladder_basis, rotation_time, rwa_hamiltonian, rwa_transfer_fidelity,
    zigzag_frequencies, Pulse, Tone,
};
use resonant_core::C64;

fn params() -> impl Strategy<Value = SystemParams> {
    (4000.0..8000.0f64, -600.0..600.0f64, 20.0..300.0f64, 1usize..7)
        .prop_map(|(w, d, g, n)| SystemParams::new(w, d, g, n).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn eigenvectors_solve_the_hamiltonian(p in params()) {
        let h = build_static_hamiltonian(&p).unwrap();
        let ground = dressed_eigensystem(&p).unwrap();
        // Energies are quoted from the ground state.
        let offset = {
            let v = &ground[0].amplitudes;
            inner(v, &h.mul_vec(v)).re
        };
        for state in &ground {
            let hv = h.mul_vec(&state.amplitudes);
            for (a, b) in hv.iter().zip(&state.amplitudes) {
                let r = a - b * (state.energy + offset);
                prop_assert!(r.norm() < 1e-8 * p.omega_r * p.n_max as f64, "{state:?}");
            }
        }
    }

    #[test]
    fn transition_pairs_are_symmetric(p in params()) {
        for n in 0..p.n_max {
            let t = transition_frequencies(&p, n).unwrap();
            prop_assert!((t.w_up + t.w_down - 2.0 * p.omega_r).abs() < 1e-9);
            prop_assert!((t.w_plus + t.w_minus - 2.0 * p.omega_r).abs() < 1e-9);
        }
    }

    #[test]
    fn numeric_energies_match_closed_form(p in params()) {
        let basis = DressedBasis::new(&p).unwrap();
        for label in DressedLabel::all(p.n_max) {
            let e = basis.energy(label).unwrap();
            prop_assert!((e - label.closed_form_energy(&p)).abs() < 1e-7 * p.omega_r, "{label}");
        }
    }

    #[test]
    fn resonant_doublets_split_by_two_g_root_n(w in 4000.0..8000.0f64, g in 20.0..300.0f64, n_max in 1usize..7) {
        let p = SystemParams::new(w, 0.0, g, n_max).unwrap();
        let basis = DressedBasis::new(&p).unwrap();
        for n in 1..=n_max {
            let root = (n as f64).sqrt();
            assert_abs_diff_eq!(basis.energy(DressedLabel::Minus(n)).unwrap(), n as f64 * w - g * root, epsilon = 1e-7 * w);
            assert_abs_diff_eq!(basis.energy(DressedLabel::Plus(n)).unwrap(), n as f64 * w + g * root, epsilon = 1e-7 * w);
        }
    }

    #[test]
    fn resonant_carrier_offsets_scale_with_g(w in 4000.0..8000.0f64, g in 20.0..300.0f64, c in 0.2..3.0f64, n in 2usize..6) {
        let a = zigzag_frequencies(&SystemParams::new(w, 0.0, g, n + 1).unwrap(), n).unwrap();
        let b = zigzag_frequencies(&SystemParams::new(w, 0.0, c * g, n + 1).unwrap(), n).unwrap();
        for (x, y) in a.iter().zip(&b) {
            prop_assert!(((y - w) - c * (x - w)).abs() < 1e-6 * w);
        }
    }

    #[test]
    fn spin_rotation_law(n in 1usize..10, omega0 in 0.1..20.0f64, frac in 0.0..1.0f64) {
        let amps = cook_shore_amplitudes(n, omega0).unwrap();
        let t_pi = rotation_time(omega0);
        let f = rwa_transfer_fidelity(&amps, n, frac * t_pi).unwrap();
        let expected = (0.5 * std::f64::consts::PI * frac).sin().powi(2 * n as i32);
        prop_assert!((f - expected).abs() < 1e-9, "{f} vs {expected}");
        let full = rwa_transfer_fidelity(&amps, n, t_pi).unwrap();
        prop_assert!((full - 1.0).abs() < 1e-10);
    }

    #[test]
    fn rwa_matrix_is_omega0_jx(n in 1usize..9, omega0 in 0.1..20.0f64) {
        let h = rwa_hamiltonian(&cook_shore_amplitudes(n, omega0).unwrap(), n).unwrap();
        for k in 0..n {
            let kf = (k + 1) as f64;
            let jx = 0.5 * (kf * (n as f64 + 1.0 - kf)).sqrt();
            prop_assert!((h[(k, k + 1)] - C64::new(omega0 * jx, 0.0)).norm() < 1e-12);
            prop_assert!((h[(k + 1, k)] - h[(k, k + 1)]).norm() == 0.0);
        }
    }

    #[test]
    fn zigzag_ladder_alternates(n in 1usize..12) {
        let ladder = ladder_basis(n);
        prop_assert_eq!(ladder.labels.len(), n + 1);
        prop_assert_eq!(ladder.labels[0], DressedLabel::Ground);
        prop_assert_eq!(*ladder.labels.last().unwrap(), DressedLabel::Minus(n));
        for (m, w) in ladder.labels.windows(2).enumerate() {
            prop_assert_eq!(w[1].manifold(), m + 1);
            if m > 0 {
                let flipped = matches!(
                    (w[0], w[1]),
                    (DressedLabel::Minus(_), DressedLabel::Plus(_)) | (DressedLabel::Plus(_), DressedLabel::Minus(_))
                );
                prop_assert!(flipped, "{:?}", w);
            }
        }
    }

    #[test]
    fn decoherence_is_monotone(t in 1.0..500.0f64, n in 1usize..10, tq in 50.0..5000.0f64, tr in 50.0..5000.0f64) {
        let f = decoherence_fidelity(t, n, tq, tr).unwrap();
        prop_assert!(f > 0.0 && f <= 1.0);
        prop_assert!(decoherence_fidelity(1.5 * t, n, tq, tr).unwrap() < f);
        prop_assert!(decoherence_fidelity(t, n + 1, tq, tr).unwrap() < f);
        prop_assert!(decoherence_fidelity(t, n, 2.0 * tq, tr).unwrap() > f);
        prop_assert!(decoherence_fidelity(t, n, tq, 2.0 * tr).unwrap() > f);
    }
}

fn random_pulse() -> impl Strategy<Value = Pulse> {
    (
        prop::collection::vec((5500.0..6500.0f64, -40.0..40.0f64, -40.0..40.0f64), 1..3),
        2.0..6.0f64,
    )
        .prop_map(|(tones, t)| {
            Pulse::fourier(
                DriveOperatorKind::QubitTransverse,
                tones.into_iter().map(|(c, a, b)| Tone::new(c, vec![a], vec![b])).collect(),
                t,
            )
            .unwrap()
        })
}

fn random_state(dim: usize) -> impl Strategy<Value = StateVector> {
    prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), dim).prop_map(|v| {
        let amps: Vec<C64> = v.into_iter().map(|(re, im)| C64::new(re, im)).collect();
        let norm = amps.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt().max(1e-3);
        StateVector::new(amps.into_iter().map(|z| z / norm).collect())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn propagation_is_linear_and_unitary(
        pulse in random_pulse(),
        a in random_state(5),
        b in random_state(5),
        alpha in (-1.0..1.0f64, -1.0..1.0f64),
    ) {
        let p = SystemParams::default().with_n_max(2);
        let prop = Propagator::new(&p).unwrap();
        let config = SimulationConfig::default();
        let run = |s: &StateVector| prop.final_state(std::slice::from_ref(&pulse), s, pulse.duration, &config).unwrap();
        let alpha = C64::new(alpha.0, alpha.1);
        let mix = StateVector::new(a.amplitudes.iter().zip(&b.amplitudes).map(|(x, y)| alpha * x + y).collect());
        let (ua, ub, um) = (run(&a), run(&b), run(&mix));
        for i in 0..5 {
            prop_assert!((um.amplitudes[i] - (alpha * ua.amplitudes[i] + ub.amplitudes[i])).norm() < 1e-10);
        }
        prop_assert!((ua.norm() - a.norm()).abs() < 1e-9);
        let before = inner(&a.amplitudes, &b.amplitudes);
        let after = inner(&ua.amplitudes, &ub.amplitudes);
        prop_assert!((before - after).norm() < 1e-9);
    }
}

#[test]
fn convergence_check_detects_truncation() {
    let config = SimulationConfig::default();
    // A weak slow pulse never reaches the added levels.
    let weak = Pulse::constant(DriveOperatorKind::QubitTransverse, &[5820.0], &[2.0], 20.0).unwrap();
    let p = SystemParams::default().with_n_max(2);
    let psi0 = StateVector::dressed(2, DressedLabel::Ground).unwrap();
    let c = convergence_check(&p, &[weak], &psi0, DressedLabel::Minus(1), 20.0, &config).unwrap();
    assert!(c.converged(), "{c:?}");

    // A strong short pulse pushes population across the truncation edge.
    let strong = Pulse::fourier(
        DriveOperatorKind::QubitTransverse,
        vec![Tone::new(5950.0, vec![600.0], vec![300.0]), Tone::new(5700.0, vec![600.0], vec![0.0])],
        10.0,
    )
    .unwrap();
    let c = convergence_check(&p, &[strong], &psi0, DressedLabel::Minus(2), 10.0, &config).unwrap();
    assert!(!c.converged(), "{c:?}");
    assert_abs_diff_eq!(c.delta, (c.fidelity - c.fidelity_extended).abs());
}
