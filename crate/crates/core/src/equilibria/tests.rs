use super::*;
use crate::dynamics::{simulate, SimOptions};
use crate::forcing::NonlinearitySpec;
use crate::mesh::{box_mode, Grid};
use crate::operators::LameParams;
use approx::assert_relative_eq;

fn unit(n: usize) -> Grid<f64> {
    Grid::new([1.0; 3], [n; 3]).unwrap()
}

fn params(eps: f64) -> LameParams<f64> {
    LameParams::from_eps(1.0, eps, 2.0, 1.0).unwrap()
}

#[test]
fn zero_load_gives_zero_solution() {
    let g = unit(4);
    for spec in [
        NonlinearitySpec::zero(),
        NonlinearitySpec::cubic(1.0).unwrap(),
        NonlinearitySpec::coupled_power(1.0, 2.0, 0.1).unwrap(),
        NonlinearitySpec::bounded_sine(2.0).unwrap(),
    ] {
        let p = Problem::unforced(params(1.0), spec, &g);
        let eq = solve_stationary(&p, &VectorField::zeros(&g), &NewtonOptions::default()).unwrap();
        assert_eq!(eq.u.max_abs(), 0.0);
        assert_eq!(eq.iterations, 0);
        let check = bound_check(&eq, &p).unwrap();
        assert!(check.pass);
        if spec.constants().m_f == 0.0 {
            assert_eq!(check.margin, 0.0);
        }
    }
}

#[test]
fn linear_solve_matches_krylov_oracle() {
    let g = Grid::new([1.0, 1.3, 0.8], [5, 4, 6]).unwrap();
    let b = box_mode(&g, [1, 2, 1], [0.6, 0.0, 0.8], 7.0).unwrap();
    let p = Problem::new(params(0.5), NonlinearitySpec::zero(), b.clone()).unwrap();
    let eq = solve_stationary(&p, &VectorField::zeros(&g), &NewtonOptions::default()).unwrap();
    let eu = p.operator().apply(&eq.u).unwrap();
    assert!(eu.sub(&b).unwrap().max_abs() < 1e-9);
    assert!(eq.residual_norm <= 1e-10);
}

#[test]
fn cubic_newton_converges_quadratically() {
    let g = unit(5);
    let b = box_mode(&g, [1, 1, 1], [1.0, 0.0, 0.0], 60.0).unwrap();
    let p = Problem::new(params(1.0), NonlinearitySpec::cubic(1.0).unwrap(), b).unwrap();
    let eq = solve_stationary(&p, &VectorField::zeros(&g), &NewtonOptions::default()).unwrap();
    assert!(eq.residual_norm <= 1e-10);
    let h = &eq.residual_history;
    assert!(h.len() >= 3, "{h:?}");
    // the last ratios r_{k+1}/r_k² stay bounded once in the quadratic regime
    let k = h.len();
    for i in k - 3..k - 1 {
        if h[i] < 1e-2 {
            assert!(h[i + 1] / (h[i] * h[i]) < 1e3, "{h:?}");
        }
    }
}

#[test]
fn newton_failure_carries_last_iterate() {
    let g = unit(3);
    let b = box_mode(&g, [1, 1, 1], [1.0, 0.0, 0.0], 1e3).unwrap();
    let p = Problem::new(params(1.0), NonlinearitySpec::cubic(1.0).unwrap(), b).unwrap();
    let opts = NewtonOptions { max_iter: 1, ..Default::default() };
    let err = solve_stationary(&p, &VectorField::zeros(&g), &opts).unwrap_err();
    assert!(matches!(err.error, Error::NoConvergence { iterations: 1, .. }));
    assert!(err.last.max_abs() > 0.0);
    assert_eq!(err.residual_history.len(), 2);
}

#[test]
fn indefinite_jacobian_uses_dense_fallback() {
    // one node, ε = 0: each component solves μλ₁ʰ u + κ sin u = 0, which for
    // κ = 10 μλ₁ʰ has a root near 3.5 where the Jacobian μλ₁ʰ + κ cos u < 0
    let g = unit(1);
    let lam1 = first_eigenvalue(&g).discrete;
    let spec = NonlinearitySpec::bounded_sine(10.0 * lam1).unwrap();
    let p = Problem::unforced(params(0.0), spec, &g);
    let guess = VectorField::from_fn(&g, |_| [3.4, -3.6, 3.5]);
    let eq = solve_stationary(&p, &guess, &NewtonOptions::default()).unwrap();
    assert!(eq.dense_steps > 0);
    assert!(eq.residual_norm <= 1e-10);
    let u = eq.u.at(0);
    assert!((lam1 * u[0] + 10.0 * lam1 * u[0].sin()).abs() < 1e-9 * lam1);
    assert!(u[0] > 3.0 && u[1] < -3.0);
}

#[test]
fn stationary_bound_examples() {
    let g = unit(4);
    let p = Problem::unforced(params(1.0), NonlinearitySpec::zero(), &g);
    let sb = stationary_bound(&p).unwrap();
    assert_eq!(sb.coefficient, 1.0);
    assert_eq!(sb.rhs, 0.0);
    let b = box_mode(&g, [1, 1, 1], [1.0, 0.0, 0.0], 2.0).unwrap();
    let p = Problem::new(params(1.0), NonlinearitySpec::cubic(1.0).unwrap(), b).unwrap();
    let sb = stationary_bound(&p).unwrap();
    assert_relative_eq!(sb.coefficient, 15.0 / 16.0, max_relative = 1e-15);
}

#[test]
fn linear_multistart_finds_one_member() {
    let g = unit(3);
    let b = box_mode(&g, [1, 1, 1], [0.0, 1.0, 0.0], 3.0).unwrap();
    let p = Problem::new(params(1.0), NonlinearitySpec::zero(), b).unwrap();
    let set = multistart_stationary(&p, &MultistartOptions { n_starts: 6, ..Default::default() }).unwrap();
    assert_eq!(set.len(), 1);
    assert_eq!(set.starts, 7);
    assert_eq!(set.failures, 0);
    assert!(set.all_bounded());
}

#[test]
fn sine_multistart_contains_zero() {
    let g = unit(3);
    let p = Problem::unforced(params(1.0), NonlinearitySpec::bounded_sine(20.0).unwrap(), &g);
    let set = multistart_stationary(&p, &MultistartOptions { n_starts: 8, seed: 3, ..Default::default() }).unwrap();
    assert!(!set.is_empty());
    assert_eq!(set.members[0].u.max_abs(), 0.0);
    assert!(set.all_bounded());
}

#[test]
fn cubic_members_are_dynamic_fixed_points() {
    let g = unit(4);
    let b = box_mode(&g, [1, 1, 1], [1.0, 0.0, 0.0], 40.0).unwrap();
    let p = Problem::new(params(0.25), NonlinearitySpec::cubic(1.0).unwrap(), b).unwrap();
    let set = multistart_stationary(&p, &MultistartOptions { n_starts: 4, ..Default::default() }).unwrap();
    assert_eq!(set.len(), 1);
    let eq = &set.members[0];
    let start = State::at_rest(eq.u.clone());
    let traj = simulate(&start, &p, 1.0, 0.02, &SimOptions { keep_states: true, ..Default::default() }).unwrap();
    for s in &traj.states {
        assert!(s.h_dist_sq(&start, p.params()).unwrap().sqrt() <= 1e-8);
    }
    // Ψ is constant along the rest trajectory
    let psi: Vec<f64> = traj.energies.iter().map(|e| e.total).collect();
    for x in &psi {
        assert!((x - eq.lyapunov_value).abs() <= 1e-10 * (1.0 + eq.lyapunov_value.abs()));
    }
    let (idx, d) = set.nearest(&eq.u, &p).unwrap().unwrap();
    assert_eq!((idx, d), (0, 0.0));
}

#[test]
fn multistart_is_deterministic() {
    let g = unit(3);
    let p = Problem::unforced(params(1.0), NonlinearitySpec::bounded_sine(15.0).unwrap(), &g);
    let opts = MultistartOptions { n_starts: 6, seed: 11, ..Default::default() };
    let a = multistart_stationary(&p, &opts).unwrap();
    let b = multistart_stationary(&p, &opts).unwrap();
    assert_eq!(a.len(), b.len());
    for (x, y) in a.members.iter().zip(&b.members) {
        assert_eq!(x.u, y.u);
    }
}
