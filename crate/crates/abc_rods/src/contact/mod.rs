//! Beam-to-beam contact formulations: point contact at the bilateral closest
//! point (with endpoint variants), Gauss-point-to-segment line contact, and
//! the all-angle transition combining both.
//!
//! Shared convention: pair vectors/matrices stack element 1 (slave) dofs
//! before element 2 (master) dofs. Contact residuals are gradients of the
//! contact potential, so the slave block of an active pair is -f * N1^T n
//! with f >= 0 and n pointing from beam 2 toward beam 1; assembled with a
//! plus sign into the global force balance this pushes the beams apart.

pub mod abc;
pub mod line;
pub mod point;

use crate::closest_point::ClosestPointSolution;
use crate::error::Result;
use crate::geometry::{shape_row, ElementDofVector};
use crate::penalty::PenaltyLaw;
use crate::{PairMatrix, PairRow, PairVector, Vec3};
use nalgebra::SMatrix;

type Mat3 = nalgebra::Matrix3<f64>;
type Mat3x24 = SMatrix<f64, 3, 24>;

fn block_matrix(w: &[f64; 4], second: bool) -> Mat3x24 {
    let mut m = Mat3x24::zeros();
    let off = if second { 12 } else { 0 };
    for (b, &wb) in w.iter().enumerate() {
        for k in 0..3 {
            m[(k, off + 3 * b + k)] = wb;
        }
    }
    m
}

/// Geometry operators of one contact evaluation point shared by all
/// formulations: interpolation matrices, tangents, normal and gap.
pub(crate) struct ContactPointOps {
    /// [N1 | 0] - [0 | N2], so that d(r1 - r2) = d_mat * dd.
    d_mat: Mat3x24,
    n1xi: Mat3x24,
    n2eta: Mat3x24,
    pub r1p: Vec3,
    pub r2p: Vec3,
    pub normal: Vec3,
    pub dist: f64,
    pub gap: f64,
}

pub(crate) fn contact_point_ops(
    e1: &ElementDofVector,
    e2: &ElementDofVector,
    sol: &ClosestPointSolution,
) -> Result<ContactPointOps> {
    let na = block_matrix(&shape_row(sol.xi, 0, e1.l0)?, false);
    let nb = block_matrix(&shape_row(sol.eta, 0, e2.l0)?, true);
    let n1xi = block_matrix(&shape_row(sol.xi, 1, e1.l0)?, false);
    let n2eta = block_matrix(&shape_row(sol.eta, 1, e2.l0)?, true);
    let r1p = crate::geometry::interpolate(e1, sol.xi, 1)?;
    let r2p = crate::geometry::interpolate(e2, sol.eta, 1)?;
    Ok(ContactPointOps {
        d_mat: na - nb,
        n1xi,
        n2eta,
        r1p,
        r2p,
        normal: sol.normal,
        dist: sol.distance,
        gap: sol.gap,
    })
}

impl ContactPointOps {
    /// dg/dd partial (total at any converged projection, since the parameter
    /// partials of the gap vanish by orthogonality for the free coordinates
    /// and the pinned ones do not move).
    pub fn gap_row(&self) -> PairRow {
        self.normal.transpose() * self.d_mat
    }

    /// Unit "point-type" residual b = -f * (dg/dd)^T; scale by the desired
    /// weight (transition factor, quadrature weight, Jacobian).
    pub fn base_residual(&self, law: &PenaltyLaw) -> PairVector {
        -law.force(self.gap) * self.gap_row().transpose()
    }

    /// Full consistent linearization of `base_residual` given the total
    /// coordinate sensitivities dxi/dd and deta/dd.
    pub fn base_stiffness(
        &self,
        law: &PenaltyLaw,
        dxi: &PairRow,
        deta: &PairRow,
    ) -> PairMatrix {
        let n = self.normal;
        let q = -law.force(self.gap);
        let qp = -law.stiffness(self.gap);
        let proj = (Mat3::identity() - n * n.transpose()) / self.dist;
        let g_d = self.gap_row();

        // Partial with respect to the dofs at frozen coordinates.
        let gmat = n * (qp * g_d) + q * (proj * self.d_mat);
        let mut k = self.d_mat.transpose() * gmat;

        // Chain terms through the projection coordinates.
        let dtn = self.d_mat.transpose() * n;
        let g_xi = n.dot(&self.r1p);
        let n_xi = proj * self.r1p;
        let r_xi = (qp * g_xi) * dtn + q * (self.n1xi.transpose() * n)
            + q * (self.d_mat.transpose() * n_xi);
        k += r_xi * dxi;

        let g_eta = -n.dot(&self.r2p);
        let n_eta = -(proj * self.r2p);
        let r_eta = (qp * g_eta) * dtn - q * (self.n2eta.transpose() * n)
            + q * (self.d_mat.transpose() * n_eta);
        k += r_eta * deta;
        k
    }

    /// Parameter partial of the gap in the slave coordinate (nonzero at
    /// unilateral solutions; needed for segmentation chain terms).
    pub fn gap_xi_partial(&self) -> f64 {
        self.normal.dot(&self.r1p)
    }
}
