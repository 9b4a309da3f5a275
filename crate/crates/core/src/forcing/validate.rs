use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::NonlinearitySpec;
use crate::error::{Error, Result};
use crate::mesh::Grid;
use crate::num::{dot3, Real};
use crate::operators::{first_eigenvalue, LameParams};

/// Slack below zero tolerated on sampled margins.
pub const MARGIN_SLACK: f64 = -1e-9;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConditionCheck {
    pub id: &'static str,
    pub description: &'static str,
    pub samples: usize,
    pub worst_margin: f64,
    /// Point at which the worst margin occurred (empty for scalar conditions).
    pub worst_point: Vec<f64>,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ValidationReport {
    pub spec: String,
    pub radius: f64,
    pub checks: Vec<ConditionCheck>,
}

impl ValidationReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn check(&self, id: &str) -> Option<&ConditionCheck> {
        self.checks.iter().find(|c| c.id == id)
    }
}

struct Worst {
    margin: f64,
    point: [f64; 3],
}

impl Worst {
    fn new() -> Self {
        Self { margin: f64::INFINITY, point: [0.0; 3] }
    }

    fn update(&mut self, margin: f64, u: [f64; 3]) {
        // NaN margins count as failures
        if margin.is_nan() || margin < self.margin {
            self.margin = if margin.is_nan() { f64::NEG_INFINITY } else { margin };
            self.point = u;
        }
    }
}

/// Deterministic probe points: origin, axis points, cube-diagonal corners and
/// edge midpoints of the cube inscribed in the sphere of radius `radius`.
fn structured_points(radius: f64) -> Vec<[f64; 3]> {
    let mut pts = vec![[0.0; 3]];
    for r in [radius, radius / 2.0, 1.0f64.min(radius), 1e-3 * radius] {
        for a in 0..3 {
            for s in [-1.0, 1.0] {
                let mut p = [0.0; 3];
                p[a] = s * r;
                pts.push(p);
            }
        }
        let c = r / 3f64.sqrt();
        for mask in 0..8 {
            pts.push([0, 1, 2].map(|a| if mask >> a & 1 == 1 { c } else { -c }));
        }
        let e = r / 2f64.sqrt();
        for a in 0..3 {
            for (sa, sb) in [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)] {
                let mut p = [0.0; 3];
                p[a] = sa * e;
                p[(a + 1) % 3] = sb * e;
                pts.push(p);
            }
        }
    }
    pts
}

/// Samples the structural conditions on `n_samples` uniform points of the ball
/// `|u| ≤ radius` plus deterministic structured points. The strict upper bound
/// on `M` uses the discrete first eigenvalue of `grid`.
pub fn validate_assumptions<T: Real>(
    spec: &NonlinearitySpec<T>,
    params: &LameParams<T>,
    grid: &Grid<T>,
    n_samples: usize,
    radius: T,
    seed: u64,
) -> Result<ValidationReport> {
    if !(radius > T::zero()) {
        return Err(Error::invalid(format!("sampling radius must be positive, got {radius}")));
    }
    let r = radius.as_f64();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = structured_points(r);
    while points.len() < n_samples + structured_points(r).len() {
        let p = [0; 3].map(|_| rng.gen_range(-r..=r));
        if p.iter().map(|x| x * x).sum::<f64>() <= r * r {
            points.push(p);
        }
    }

    let k = spec.constants();
    let (m, m_f, m_g, c_h, p) = (k.m, k.m_f, k.m_g, k.c_h, k.p);
    let mut w91 = Worst::new();
    let mut w41 = Worst::new();
    let mut w43 = Worst::new();
    let mut waa = Worst::new();
    let mut wzero = Worst::new();
    for pt in &points {
        let u = pt.map(T::lit);
        let u2 = dot3(u, u);
        let f = spec.f(u);
        let hsum: T = u.iter().map(|&x| spec.big_h(x)).sum();
        let gval = spec.big_g(u);
        w91.update((dot3(f, u) - gval - hsum + m * u2 + m_f).as_f64(), *pt);
        w41.update((gval + hsum + m * u2 + m_f).as_f64(), *pt);

        let jg = spec.jacobian_g(u);
        let growth = T::one() + u.iter().map(|&x| x.abs().powf(p - T::one())).sum::<T>();
        for row in jg {
            let nrm = dot3(row, row).sqrt();
            w43.update((m_g * growth - nrm).as_f64(), *pt);
        }
        for &x in &u {
            waa.update((c_h * (T::one() + x * x) - spec.h_prime(x).abs()).as_f64(), *pt);
        }
    }
    let origin = spec.f([T::zero(); 3]);
    wzero.update(-origin.iter().map(|x| x.abs().as_f64()).fold(0.0, f64::max), [0.0; 3]);

    let lambda1 = first_eigenvalue(grid).discrete;
    let limit = params.mu() * lambda1 / T::lit(2.0);
    let coercivity_gap = (limit - m).as_f64();

    let n = points.len();
    let sampled = |id, description, w: Worst| {
        let pass = w.margin >= MARGIN_SLACK;
        ConditionCheck { id, description, samples: n, worst_margin: w.margin, worst_point: w.point.to_vec(), pass }
    };
    let checks = vec![
        sampled("dissipation_lower", "f(u)·u − G(u) − Σ Hᵢ(uᵢ) ≥ −M|u|² − m_f", w91),
        sampled("potential_lower", "G(u) + Σ Hᵢ(uᵢ) ≥ −M|u|² − m_f", w41),
        ConditionCheck {
            id: "linear_coercivity",
            description: "0 ≤ M < μ λ₁ʰ / 2",
            samples: 1,
            worst_margin: coercivity_gap.min(m.as_f64()),
            worst_point: vec![],
            // strict inequality on the upper side
            pass: coercivity_gap > 0.0 && m >= T::zero(),
        },
        sampled("coupled_growth", "|∇gᵢ(u)| ≤ M_g (1 + Σ |u_j|^{p−1}), 1 ≤ p < 3", {
            let mut w = w43;
            if !(p >= T::one() && p < T::lit(3.0)) {
                w.margin = f64::NEG_INFINITY;
            }
            w
        }),
        sampled("scalar_growth", "|hᵢ'(s)| ≤ c_h (1 + s²)", waa),
        ConditionCheck {
            id: "origin",
            description: "f(0) = 0",
            samples: 1,
            worst_margin: wzero.margin,
            worst_point: vec![0.0; 3],
            pass: wzero.margin >= 0.0,
        },
    ];
    Ok(ValidationReport { spec: spec.name().to_string(), radius: r, checks })
}
