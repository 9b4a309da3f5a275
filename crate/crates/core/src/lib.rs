//! Finite-difference laboratory for the damped semilinear Lamé system
//!
//! ```text
//! ∂ₜ²u − μΔu − (λ+μ)∇div u + α∂ₜu + f(u) = b   in Ω = (0,L₁)×(0,L₂)×(0,L₃),  u = 0 on ∂Ω
//! ```
//!
//! The core is generic over the scalar type (`f32` or `f64`) through
//! [`Real`]; the `*64` aliases below fix it to `f64`.

pub mod attractor;
pub mod dynamics;
pub mod equilibria;
pub mod error;
pub mod forcing;
pub mod linalg;
pub mod mesh;
pub mod num;
pub mod operators;

pub use error::{Error, Result};
pub use num::Real;

pub type Grid64 = mesh::Grid<f64>;
pub type VectorField64 = mesh::VectorField<f64>;
pub type ScalarField64 = mesh::ScalarField<f64>;
pub type LameParams64 = operators::LameParams<f64>;
pub type Problem64 = dynamics::Problem<f64>;
pub type State64 = dynamics::State<f64>;
pub type NonlinearitySpec64 = forcing::NonlinearitySpec<f64>;
pub type AttractorCloud64 = attractor::AttractorCloud<f64>;
