use super::*;
use crate::linalg::conjugate_gradient;
use crate::mesh::box_mode;
use approx::assert_relative_eq;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn unit(n: usize) -> Grid<f64> {
    Grid::new([1.0; 3], [n; 3]).unwrap()
}

fn params(eps: f64) -> LameParams<f64> {
    LameParams::from_eps(1.0, eps, 2.0, 1.0).unwrap()
}

fn linear(grid: &Grid<f64>, eps: f64) -> Problem<f64> {
    Problem::unforced(params(eps), NonlinearitySpec::zero(), grid)
}

fn solve_linear(problem: &Problem<f64>) -> VectorField<f64> {
    let op = problem.operator();
    let mut x = VectorField::zeros(problem.grid());
    conjugate_gradient(|a, b| op.apply_into(a, b), problem.load().as_slice(), x.as_mut_slice(), 1e-14, 10_000).unwrap();
    x
}

fn random_state(grid: &Grid<f64>, seed: u64, amp: f64) -> State<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let u = VectorField::random(grid, amp, &mut rng);
    let v = VectorField::random(grid, amp, &mut rng);
    State::new(u, v, 0.0).unwrap()
}

fn smooth_state(grid: &Grid<f64>) -> State<f64> {
    let u = box_mode(grid, [1, 1, 1], [1.0, 0.0, 0.0], 1.0).unwrap();
    let v = box_mode(grid, [1, 2, 1], [0.0, 0.6, 0.8], 2.0).unwrap();
    State::new(u, v, 0.0).unwrap()
}

#[test]
fn zero_state_is_fixed_point() {
    let g = unit(3);
    let s = State::zeros(&g);
    let z = VectorField::zeros(&g);
    for scheme in [Scheme::LinearlyImplicitMidpoint, Scheme::Leapfrog] {
        let next = step(&s, &params(1.0), &NonlinearitySpec::zero(), &z, 0.01, scheme).unwrap();
        assert_eq!(next.u.max_abs(), 0.0);
        assert_eq!(next.v.max_abs(), 0.0);
        assert_eq!(next.t, 0.01);
    }
}

#[test]
fn energy_examples() {
    let g = unit(3);
    let p = linear(&g, 1.0);
    assert_eq!(energy(&State::zeros(&g), &p).unwrap().total, 0.0);
    let mut s = random_state(&g, 1, 1.0);
    s.u = VectorField::zeros(&g);
    let e = energy(&s, &p).unwrap();
    assert_relative_eq!(e.total, 0.5 * l2_sq(&s.v), max_relative = 1e-15);
    let s = random_state(&g, 2, 1.0);
    let cubic = Problem::new(params(0.5), NonlinearitySpec::cubic(1.0).unwrap(), VectorField::random(&g, 1.0, &mut ChaCha8Rng::seed_from_u64(3))).unwrap();
    let e = energy(&s, &cubic).unwrap();
    assert_relative_eq!(e.total, e.kinetic + e.elastic + e.potential + e.work, max_relative = 1e-13);
    assert_relative_eq!(e.h_norm_sq, s.h_norm_sq(cubic.params()), max_relative = 1e-15);
}

#[test]
fn state_rejects_mismatched_grids() {
    assert!(State::new(VectorField::zeros(&unit(3)), VectorField::zeros(&unit(4)), 0.0).is_err());
}

#[test]
fn linear_equilibrium_is_preserved() {
    let g = unit(4);
    let b = box_mode(&g, [1, 1, 1], [0.0, 0.0, 1.0], 5.0).unwrap();
    let p = Problem::new(params(1.0), NonlinearitySpec::zero(), b).unwrap();
    let ustar = solve_linear(&p);
    let mut s = State::at_rest(ustar.clone());
    let mut integ = Integrator::new(&p, 0.02, Scheme::LinearlyImplicitMidpoint).unwrap();
    for _ in 0..10 {
        let before = s.clone();
        integ.advance(&mut s).unwrap();
        assert!(s.h_dist_sq(&before, p.params()).unwrap().sqrt() <= 1e-10);
    }
}

#[test]
fn unforced_linear_energy_decreases_strictly_to_zero() {
    let g = unit(3);
    let p = linear(&g, 0.5);
    let traj = simulate(&random_state(&g, 4, 1.0), &p, 25.0, 0.05, &SimOptions::default()).unwrap();
    let totals = traj.totals();
    for w in totals.windows(2) {
        if w[0] < 1e-12 {
            break;
        }
        assert!(w[1] < w[0]);
    }
    assert!(*totals.last().unwrap() < 1e-12);
    assert!(traj.max_cg_iterations > 0);
}

#[test]
fn forced_linear_run_converges_to_static_solution() {
    let g = unit(4);
    let b = box_mode(&g, [1, 1, 1], [1.0, 0.0, 0.0], 10.0).unwrap();
    let p = Problem::new(params(1.0), NonlinearitySpec::zero(), b).unwrap();
    let ustar = solve_linear(&p);
    let traj = simulate(&State::zeros(&g), &p, 30.0, 0.05, &SimOptions { stride: 10, ..Default::default() }).unwrap();
    let end = &traj.final_state;
    let err = end.u.sub(&ustar).unwrap().max_abs();
    assert!(err < 1e-8 * ustar.max_abs().max(1.0), "err {err}");
    assert!(end.v.max_abs() < 1e-8);
}

#[test]
fn midpoint_scheme_is_second_order() {
    let g = unit(3);
    let b = box_mode(&g, [1, 1, 1], [1.0, 0.0, 0.0], 3.0).unwrap();
    let p = Problem::new(params(0.5), NonlinearitySpec::cubic(1.0).unwrap(), b).unwrap();
    let z0 = smooth_state(&g);
    let run = |dt: f64| simulate(&z0, &p, 1.0, dt, &SimOptions { stride: 1000, ..Default::default() }).unwrap().final_state;
    let reference = run(0.1 / 16.0);
    let errs: Vec<f64> = [0.1, 0.05, 0.025]
        .iter()
        .map(|&dt| run(dt).h_dist_sq(&reference, p.params()).unwrap().sqrt())
        .collect();
    for w in errs.windows(2) {
        let ratio = w[0] / w[1];
        assert!((3.3..=4.7).contains(&ratio), "ratio {ratio}, errors {errs:?}");
    }
}

#[test]
fn dissipation_residual_is_second_order() {
    let g = unit(4);
    let p = linear(&g, 1.0);
    let z0 = smooth_state(&g);
    let res = |dt: f64| {
        let traj = simulate(&z0, &p, 2.0, dt, &SimOptions::default()).unwrap();
        dissipation_residual(&traj, p.params()).unwrap().max_abs
    };
    let r1 = res(0.02);
    let r2 = res(0.01);
    assert!((3.5..=4.5).contains(&(r1 / r2)), "{r1} {r2}");
}

#[test]
fn dissipation_residual_requires_unit_stride() {
    let g = unit(3);
    let p = linear(&g, 1.0);
    let traj = simulate(&smooth_state(&g), &p, 0.1, 0.01, &SimOptions { stride: 2, ..Default::default() }).unwrap();
    assert!(dissipation_residual(&traj, p.params()).is_err());
}

#[test]
fn dissipation_residual_vanishes_at_equilibrium() {
    let g = unit(3);
    let b = box_mode(&g, [1, 1, 1], [0.0, 1.0, 0.0], 2.0).unwrap();
    let p = Problem::new(params(1.0), NonlinearitySpec::zero(), b).unwrap();
    let traj = simulate(&State::at_rest(solve_linear(&p)), &p, 0.5, 0.01, &SimOptions::default()).unwrap();
    assert!(dissipation_residual(&traj, p.params()).unwrap().max_abs <= 1e-10);
}

#[test]
fn leapfrog_respects_stability_limit() {
    let g = unit(7);
    let p = linear(&g, 1.0);
    let limit = Integrator::cfl_limit(p.params(), &g);
    assert!(Integrator::new(&p, limit * 1.01, Scheme::Leapfrog).is_err());
    assert!(Integrator::new(&p, limit, Scheme::Leapfrog).is_ok());
    // the midpoint scheme has no such limit
    assert!(Integrator::new(&p, 10.0 * limit, Scheme::LinearlyImplicitMidpoint).is_ok());
}

#[test]
fn leapfrog_and_midpoint_agree() {
    let g = unit(3);
    let p = Problem::new(params(0.5), NonlinearitySpec::cubic(1.0).unwrap(), VectorField::zeros(&g)).unwrap();
    let z0 = smooth_state(&g);
    let dt = 0.002;
    let opts = |scheme| SimOptions { stride: 100, scheme, ..Default::default() };
    let a = simulate(&z0, &p, 0.5, dt, &opts(Scheme::LinearlyImplicitMidpoint)).unwrap().final_state;
    let b = simulate(&z0, &p, 0.5, dt, &opts(Scheme::Leapfrog)).unwrap().final_state;
    let scale = z0.h_norm_sq(p.params()).sqrt();
    assert!(a.h_dist_sq(&b, p.params()).unwrap().sqrt() < 1e-3 * scale);
}

#[test]
fn energy_growth_aborts_with_partial_trajectory() {
    let g = unit(3);
    let p = linear(&g, 1.0);
    // a negative tolerance turns every sample into a violation
    let opts = SimOptions { energy_tol: -10.0, ..Default::default() };
    let err = simulate(&smooth_state(&g), &p, 1.0, 0.01, &opts).unwrap_err();
    assert!(matches!(err.error, Error::IntegrationFailure { .. }));
    assert_eq!(err.partial.len(), 2);
    let as_error: Error = err.into();
    assert!(as_error.to_string().contains("energy"));
}

#[test]
fn simulate_rejects_bad_arguments() {
    let g = unit(3);
    let p = linear(&g, 1.0);
    let z = State::zeros(&g);
    assert!(simulate(&z, &p, 1.0, 0.0, &SimOptions::default()).is_err());
    assert!(simulate(&z, &p, 1.0, 0.1, &SimOptions { stride: 0, ..Default::default() }).is_err());
}

#[test]
fn trajectory_csv_has_ledger_columns() {
    let g = unit(3);
    let p = linear(&g, 1.0);
    let traj = simulate(&smooth_state(&g), &p, 0.05, 0.01, &SimOptions::default()).unwrap();
    let mut buf = Vec::new();
    traj.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "t,kinetic,elastic,potential,work,total,dissipation,h_norm_sq");
    assert_eq!(lines.count(), 6);
    assert!(text.contains("e-2") || text.contains("e-1"));
}

#[test]
fn bound_constants_without_forcing_or_load() {
    let g = unit(4);
    let k = bound_constants(&params(1.0), &NonlinearitySpec::zero(), &VectorField::zeros(&g), &g).unwrap();
    assert_eq!(k.k2, 0.5);
    assert_eq!(k.k3_lower, 0.0);
    assert!(k.eps_hat.is_none());
    let s = random_state(&g, 5, 3.0);
    let e = energy(&s, &linear(&g, 1.0)).unwrap();
    assert_relative_eq!(e.total, 0.5 * e.h_norm_sq, max_relative = 1e-14);
    assert!(k.lower_margin(&e) >= -1e-12 * e.total);
}

#[test]
fn bound_constants_with_load_use_young_parameter() {
    let g = unit(4);
    let b = box_mode(&g, [1, 1, 1], [1.0, 0.0, 0.0], 2.0).unwrap();
    let p = params(0.5);
    let k = bound_constants(&p, &NonlinearitySpec::cubic(1.0).unwrap(), &b, &g).unwrap();
    assert_relative_eq!(k.k2, 0.25, max_relative = 1e-14);
    let eh = k.eps_hat.unwrap();
    assert_relative_eq!(eh, 4.0 / (p.mu() * k.lambda1), max_relative = 1e-14);
    let sine = NonlinearitySpec::bounded_sine(2.0).unwrap();
    let k = bound_constants(&p, &sine, &b, &g).unwrap();
    let a = 2.0 * 1.0 / k.lambda1;
    assert_relative_eq!(k.k2, (1.0 - a) / 4.0, max_relative = 1e-14);
}

#[test]
fn bound_constants_reject_large_m() {
    let g = unit(3);
    let lam1 = crate::operators::first_eigenvalue(&g).discrete;
    let sine = NonlinearitySpec::bounded_sine(lam1).unwrap();
    assert!(bound_constants(&params(1.0), &sine, &VectorField::zeros(&g), &g).is_err());
}

#[test]
fn energy_sandwich_holds_on_random_states() {
    let g = unit(4);
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let b = VectorField::random(&g, 3.0, &mut rng);
    let specs = [
        NonlinearitySpec::zero(),
        NonlinearitySpec::cubic(1.0).unwrap(),
        NonlinearitySpec::coupled_power(1.0, 2.5, 0.2).unwrap(),
        NonlinearitySpec::coupled_power_plus_cubic(0.5, 1.5, 0.0).unwrap(),
        NonlinearitySpec::bounded_sine(3.0).unwrap(),
    ];
    for spec in specs {
        for eps in [0.0, 1.0] {
            let prob = Problem::new(params(eps), spec, b.clone()).unwrap();
            let k = bound_constants(prob.params(), &spec, &b, &g).unwrap();
            for seed in 0..100u64 {
                let mut s = random_state(&g, 100 + seed, 1.0);
                // rescale to 𝓗-norm in (0, 10]
                let target = 10.0 * ((seed % 10) as f64 + 1.0) / 10.0;
                let scale = target / s.h_norm_sq(prob.params()).sqrt();
                s.u = s.u.scaled(scale);
                s.v = s.v.scaled(scale);
                let e = energy(&s, &prob).unwrap();
                assert!(k.lower_margin(&e) >= 0.0, "{} lower {:?}", spec.name(), e);
                assert!(k.upper_margin(&e) >= 0.0, "{} upper {:?}", spec.name(), e);
            }
        }
    }
}

#[test]
fn continuous_dependence_examples() {
    let g = unit(3);
    let p = linear(&g, 1.0);
    let z = smooth_state(&g);
    assert_eq!(continuous_dependence_probe(&z, &z, &p, 1.0, 0.01).unwrap(), 0.0);
    let z2 = random_state(&g, 7, 0.1);
    let ratio = continuous_dependence_probe(&z, &z2, &p, 1.0, 0.01).unwrap();
    // the unforced damped linear flow does not expand the 𝓗-norm
    assert!(ratio <= 1.0 + 1e-9, "{ratio}");
    assert!(ratio >= 1.0 - 1e-12);
}

#[test]
fn difference_energy_of_identical_runs_vanishes() {
    let g = unit(3);
    let p = linear(&g, 1.0);
    let opts = SimOptions { keep_states: true, ..Default::default() };
    let t = simulate(&smooth_state(&g), &p, 0.2, 0.01, &opts).unwrap();
    let d = difference_energy(&t, &t, p.params(), 1.0).unwrap();
    assert!(d.xi.iter().all(|&x| x == 0.0));
    assert_eq!(d.p0, 4.0);
    assert_eq!(stabilizability_exponent(2.5), 4.0);
    assert_relative_eq!(stabilizability_exponent(2.9), 6.0 / 1.1);
}

#[test]
fn linear_difference_energy_decays_exponentially() {
    let g = unit(3);
    let p = linear(&g, 1.0);
    let opts = SimOptions { keep_states: true, ..Default::default() };
    let a = simulate(&smooth_state(&g), &p, 6.0, 0.02, &opts).unwrap();
    let b = simulate(&random_state(&g, 8, 0.2), &p, 6.0, 0.02, &opts).unwrap();
    let d = difference_energy(&a, &b, p.params(), 1.0).unwrap();
    let env = fit_exponential_envelope(&d.times, &d.xi).unwrap();
    assert!(env.c > 0.5, "{env:?}");
    assert!(env.a >= 1.0 && env.a < 10.0, "{env:?}");
    assert!(difference_energy(&a, &simulate(&smooth_state(&g), &p, 1.0, 0.02, &opts).unwrap(), p.params(), 1.0).is_err());
}
