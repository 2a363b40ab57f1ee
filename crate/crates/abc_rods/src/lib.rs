//! Slender-rod contact dynamics.
//!
//! Torsion-free Kirchhoff beam finite elements with a C1-continuous Hermite
//! centerline, combined with beam-to-beam contact: discrete point contact at
//! the bilateral closest point for large contact angles, Gauss-point-to-segment
//! line contact for small contact angles, and a smooth all-angle transition
//! between the two. Includes a two-stage broadphase search, a Newton solver
//! with displacement step size control, quasi-static and generalized-alpha
//! time stepping, and conservation diagnostics.

pub mod contact;
pub mod closest_point;
pub mod diagnostics;
pub mod element;
pub mod error;
pub mod geometry;
pub mod output;
pub mod penalty;
pub mod quadrature;
pub mod scenario;
pub mod search;
pub mod solver;

pub use error::Error;

/// 12 scalar dofs per element: (d1, t1, d2, t2).
pub type ElemVector = nalgebra::SVector<f64, 12>;
pub type ElemMatrix = nalgebra::SMatrix<f64, 12, 12>;
/// Stacked dofs of a contacting element pair.
pub type PairVector = nalgebra::SVector<f64, 24>;
pub type PairMatrix = nalgebra::SMatrix<f64, 24, 24>;
pub type PairRow = nalgebra::RowSVector<f64, 24>;
pub type Vec3 = nalgebra::Vector3<f64>;

/// Worker thread cap. ABC_RODS_THREADS overrides the detected parallelism;
/// results are merged in a fixed order and stay deterministic either way.
pub fn worker_count() -> usize {
    std::env::var("ABC_RODS_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&n| n >= 1)
        .unwrap_or_else(|| {
            std::thread::available_parallelism()
                .map(|n| n.get())
                .unwrap_or(1)
        })
}
