use lienard::floquet::{
    criterion_example, criterion_generalized, criterion_polynomial, fundamental_matrix, jacobian_j, monodromy,
    rho2_via_integral, rho2_via_liouville, stability_report, StabilityReport,
};
use lienard::integrate::Trajectory;
use lienard::orbit::{find_periodic_orbit, OrbitSearch, PeriodicOrbit};
use lienard::{example_equation, example_system, GeneralizedLienard, Matrix2, State, StepperConfig};
use rand::{Rng, SeedableRng};

// Independent DOP853 run (rtol = atol = 1e-13) of the augmented system on the
// orbit, and adaptive quadrature of the damping integrand on its dense output.
const RHO2_ORACLE: f64 = 0.009_311_163_378_50;
const CRITERION_ORACLE: f64 = 4.676_541_235_40;
const PHI12_ORACLE: f64 = 0.164_253_702;

fn example_orbit(step: f64) -> PeriodicOrbit {
    find_periodic_orbit(&example_system(), -0.5, OrbitSearch::default(), StepperConfig::rk4(step)).unwrap()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs())
}

#[test]
fn example_multipliers() {
    let sys = example_system();
    let orbit = example_orbit(1e-4);
    let mono = monodromy(&sys, &orbit, StepperConfig::default()).unwrap();
    assert!(mono.unit_residual <= 1e-4, "rho1 = {}", mono.rho1);
    assert!(mono.rho2 > 0.0 && mono.rho2 < 1.0);
    assert!(!mono.complex);
    assert!(rel(mono.rho1 * mono.rho2, mono.det()) < 1e-10);
    assert!(rel(mono.det(), RHO2_ORACLE) < 1e-6, "det = {}", mono.det());
    assert!((mono.phi_tau0.m12 - PHI12_ORACLE).abs() < 1e-6);

    // the flow direction at the anchor is a fixed column
    let col = mono.phi_tau0.mul_vec(State::new(1.0, 0.0));
    assert!((col.x1 - 1.0).abs() <= 1e-4 && col.x2.abs() <= 1e-4, "{col}");

    let jj = jacobian_j(&mono, sys.psi(orbit.a));
    assert!(jj.nondegenerate);
}

#[test]
fn three_routes_agree() {
    let sys = example_system();
    let orbit = example_orbit(1e-4);
    let r = stability_report(&sys, &orbit, StepperConfig::default()).unwrap();
    assert!(r.route_spread() <= 1e-5, "{}", r.to_text());
    assert!(rel(r.rho2_liouville, r.rho2_integral) <= 1e-6);
    assert!(rel(rho2_via_liouville(&sys, &orbit).unwrap(), rho2_via_integral(&sys, &orbit)) <= 1e-6);
    assert!(r.stable && r.consistent());
    assert!((r.criterion_value - CRITERION_ORACLE).abs() < 1e-6, "Q = {}", r.criterion_value);
    assert!((r.criterion_value + r.rho2_det.ln()).abs() < 1e-5);
}

#[test]
fn criterion_forms_coincide() {
    let sys = example_system();
    let orbit = example_orbit(1e-4);
    let g = criterion_generalized(&sys, &orbit);
    let p = criterion_polynomial(&example_equation(), &orbit);
    let e = criterion_example(&orbit);
    assert!(g > 0.0);
    assert!((g - p).abs() <= 1e-10 && (p - e).abs() <= 1e-10, "{g} {p} {e}");
    // pointwise
    for x in orbit.trajectory.states.iter().step_by(50) {
        let (u, v) = (x.x2, x.x1);
        let a = sys.damping_integrand(u, v);
        let b = 2.0 * u * u + 4.0 * u * v + 3.0 * v * v - 1.0;
        assert!((a - b).abs() <= 1e-12);
        // trace of the Jacobian is minus the integrand; the (2,2) entry is 0
        let j = sys.jacobian(*x).unwrap();
        assert_eq!(j.m22, 0.0);
        assert!((j.trace() + a).abs() <= 1e-12);
    }
}

#[test]
fn quadratures_converge_under_step_halving() {
    let sys = example_system();
    let coarse = example_orbit(1e-4);
    let fine = example_orbit(5e-5);
    for f in [
        |s: &GeneralizedLienard, o: &PeriodicOrbit| criterion_generalized(s, o),
        |_: &GeneralizedLienard, o: &PeriodicOrbit| criterion_example(o),
        |s: &GeneralizedLienard, o: &PeriodicOrbit| rho2_via_liouville(s, o).unwrap(),
    ] {
        assert!(rel(f(&sys, &coarse), f(&sys, &fine)) <= 1e-6);
    }
}

#[test]
fn coarse_step_criterion_close_to_fine() {
    let sys = example_system();
    let coarse = criterion_generalized(&sys, &example_orbit(1e-3));
    let fine = criterion_generalized(&sys, &example_orbit(1e-4));
    assert!((coarse - fine).abs() <= 1e-4);
}

#[test]
fn adaptive_monodromy_cross_check() {
    let sys = example_system();
    let orbit = example_orbit(1e-4);
    let fixed = monodromy(&sys, &orbit, StepperConfig::rk4(1e-4)).unwrap();
    let adaptive = monodromy(&sys, &orbit, StepperConfig::adaptive(1e-12, 1e-14)).unwrap();
    assert!(fixed.phi_tau0.max_abs_diff(&adaptive.phi_tau0) < 1e-8);
}

#[test]
fn harmonic_monodromy_is_identity() {
    let sys = GeneralizedLienard::harmonic();
    let orbit = find_periodic_orbit(&sys, -1.0, OrbitSearch::default(), StepperConfig::default()).unwrap();
    let mono = monodromy(&sys, &orbit, StepperConfig::default()).unwrap();
    assert!(mono.phi_tau0.max_abs_diff(&Matrix2::IDENTITY) <= 1e-8, "{}", mono.phi_tau0);
    let r = stability_report(&sys, &orbit, StepperConfig::default()).unwrap();
    assert!((r.rho2_det - 1.0).abs() < 1e-8);
    assert!(!r.nondegenerate);
    assert!(r.det_j.abs() <= 1e-8);
    assert!(!r.stable);
}

#[test]
fn liouville_identity_for_random_constant_systems() {
    let mut rng = rand::rngs::StdRng::seed_from_u64(2024);
    for _ in 0..20 {
        let a = Matrix2::new(
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        );
        let t1 = rng.gen_range(0.5..3.0);
        let (_, phi) =
            fundamental_matrix(|_, _| Ok((State::default(), a)), State::default(), 0.0, t1, StepperConfig::rk4(1e-3)).unwrap();
        let expected = (a.trace() * t1).exp();
        assert!(rel(phi.det(), expected) <= 1e-8, "{} vs {expected}", phi.det());
    }
}

#[test]
fn report_serialization() {
    let sys = example_system();
    let orbit = example_orbit(1e-4);
    let r = stability_report(&sys, &orbit, StepperConfig::default()).unwrap();
    let text = r.to_text();
    assert!(text.lines().all(|l| l.contains(": ")));
    assert!(text.contains("stable: true"));
    assert!(text.contains("tau0: 5.429545"));
    let row = r.to_csv_row();
    assert_eq!(row.split(',').count(), StabilityReport::CSV_HEADER.split(',').count());
}

#[test]
fn criterion_on_injected_samples() {
    // phi = 1 integrates to the span
    let times: Vec<f64> = (0..=1000).map(|k| k as f64 * 5e-3).collect();
    let states = vec![State::new(0.4, -0.2); times.len()];
    let orbit = PeriodicOrbit { a: -0.2, tau0: 5.0, trajectory: Trajectory { times, states }, residual: 0.0, iterations: 0 };
    let one = GeneralizedLienard::new("one", |_, _| 1.0, |u| u);
    assert!((criterion_generalized(&one, &orbit) - 5.0).abs() < 1e-12);
}
