//! Library results compared against routes that share no code with them.

use lorenz_stab::cusp::SyntheticCusp;
use lorenz_stab::dynamics::{flow, rk4_integrate};
use lorenz_stab::section::{attractor_point, next_crossing, return_map, sample_chain};
use lorenz_stab::transfer::{birkhoff_histogram, build_ulam, l1_distance, stationary_density};
use lorenz_stab::{casimir, casimir_derivatives, FieldSpec, Frame, NoiseLaw, NoiseSequence, PhaseState, SectionSpec, VectorField};

#[test]
fn dop853_matches_fine_rk4() {
    let field = FieldSpec::classical(Frame::YFrame).with_eta(0.3);
    let y0 = PhaseState::new(1.0, -2.0, -20.0);
    let a = flow(&field, y0, 2.0, 1e-13).unwrap();
    let b = rk4_integrate(&field, y0, 2.0, 200_000);
    assert!(a.max_abs_diff(&b) < 1e-8, "{a:?} vs {b:?}");
}

#[test]
fn casimir_derivatives_match_finite_differences() {
    let field = FieldSpec::classical(Frame::YFrame);
    let y = attractor_point(&field, 5.0).unwrap();
    let h = 1e-3;
    let c = |t: f64| casimir(&flow(&field, y, t, 1e-13).unwrap());
    let (c0, c1, c2, c3, c4) = (c(0.0), c(h), c(2.0 * h), c(3.0 * h), c(4.0 * h));
    // fourth-order one-sided stencils
    let d1 = (-25.0 * c0 + 48.0 * c1 - 36.0 * c2 + 16.0 * c3 - 3.0 * c4) / (12.0 * h);
    let d2 = (35.0 * c0 - 104.0 * c1 + 114.0 * c2 - 56.0 * c3 + 11.0 * c4) / (12.0 * h * h);
    let (e1, e2) = casimir_derivatives(&field, &y);
    assert!((d1 - e1).abs() <= 1e-5 * (1.0 + e1.abs()), "{d1} vs {e1}");
    assert!((d2 - e2).abs() <= 1e-3 * (1.0 + e2.abs()), "{d2} vs {e2}");
}

#[test]
fn jacobian_matches_finite_differences() {
    let field = FieldSpec::classical(Frame::XFrame).with_eta(-0.4);
    let y = PhaseState::new(3.0, -7.0, 21.0);
    let j = field.jacobian(&y);
    let h = 1e-6;
    for k in 0..3 {
        let (mut p, mut m) = (y, y);
        p.0[k] += h;
        m.0[k] -= h;
        let (vp, vm) = (field.velocity(&p), field.velocity(&m));
        for i in 0..3 {
            let fd = (vp.0[i] - vm.0[i]) / (2.0 * h);
            assert!((fd - j[i][k]).abs() < 1e-6, "J[{i}][{k}] = {} vs {fd}", j[i][k]);
        }
    }
}

#[test]
fn ulam_density_matches_orbit_histogram() {
    let t = SyntheticCusp::default();
    let n = 128;
    let ulam = stationary_density(&build_ulam(&t, n).unwrap(), 1e-12).unwrap();
    let hist = birkhoff_histogram(&t, 0.123_456_789, 1000, 2_000_000, n).unwrap();
    let d = l1_distance(&ulam, &hist).unwrap();
    assert!(d < 0.05, "L1 {d}");
}

#[test]
fn unperturbed_chain_is_the_iterated_return_map() {
    let field = FieldSpec::classical(Frame::YFrame);
    let section = SectionSpec::new(&field, 30.0);
    let x0 = next_crossing(&field, &section, attractor_point(&field, 20.0).unwrap()).unwrap();
    let trace = sample_chain(&field, &NoiseLaw::DeltaZero, &section, x0, 40, 9).unwrap();
    let mut x = x0;
    for e in &trace.entries {
        assert_eq!(e.x.y, x.y);
        assert_eq!(e.eta, 0.0);
        let r = return_map(&field, &section, &x).unwrap();
        assert!((r.tau - e.tau).abs() < 1e-12);
        x = r.x_next;
    }
}

#[test]
fn uniform_noise_moments() {
    let eps = 0.05;
    let omega = NoiseSequence::new(NoiseLaw::uniform(eps), 11);
    let n = 200_000;
    let v: Vec<f64> = (0..n).map(|k| omega.get(k)).collect();
    let mean = v.iter().sum::<f64>() / n as f64;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
    let exact_var = eps * eps / 3.0;
    assert!(mean.abs() < 4.0 * (exact_var / n as f64).sqrt());
    assert!((var - exact_var).abs() < 0.01 * exact_var);
}
