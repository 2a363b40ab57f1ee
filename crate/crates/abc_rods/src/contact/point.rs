//! Discrete point contact at the bilateral closest point, including the
//! endpoint variants where one or both projection coordinates are pinned to
//! an element boundary.

use crate::closest_point::{cpp_sensitivities, ClosestPointSolution, ProjectionKind};
use crate::contact::contact_point_ops;
use crate::error::{Error, Result};
use crate::geometry::ElementDofVector;
use crate::penalty::PenaltyLaw;
use crate::{ElemVector, PairMatrix, PairVector};

/// Bookkeeping for one evaluated point contact.
#[derive(Debug, Clone, Copy)]
pub struct PointContactState {
    pub solution: ClosestPointSolution,
    pub active: bool,
    /// Scaled force magnitude f(g) (before the transition weight).
    pub force: f64,
    pub weight: f64,
}

pub fn point_state(sol: &ClosestPointSolution, law: &PenaltyLaw, weight: f64) -> PointContactState {
    PointContactState {
        solution: *sol,
        active: sol.gap < law.support_gap(),
        force: law.force(sol.gap),
        weight,
    }
}

fn check_converged(sol: &ClosestPointSolution) -> Result<()> {
    if !sol.converged {
        return Err(Error::ProjectionDiverged {
            iterations: sol.iterations,
            residual: f64::NAN,
        });
    }
    Ok(())
}

/// Residual contributions (slave block, master block). Zero when the gap is
/// outside the law's support.
pub fn point_residual(
    e1: &ElementDofVector,
    e2: &ElementDofVector,
    sol: &ClosestPointSolution,
    law: &PenaltyLaw,
    weight: f64,
) -> Result<(ElemVector, ElemVector)> {
    check_converged(sol)?;
    if sol.gap >= law.support_gap() || weight == 0.0 {
        return Ok((ElemVector::zeros(), ElemVector::zeros()));
    }
    let ops = contact_point_ops(e1, e2, sol)?;
    let b = weight * ops.base_residual(law);
    Ok((b.fixed_rows::<12>(0).into(), b.fixed_rows::<12>(12).into()))
}

/// Pair residual as one 24-vector (slave block first).
pub fn point_pair_residual(
    e1: &ElementDofVector,
    e2: &ElementDofVector,
    sol: &ClosestPointSolution,
    law: &PenaltyLaw,
    weight: f64,
) -> Result<PairVector> {
    let (a, b) = point_residual(e1, e2, sol, law, weight)?;
    let mut out = PairVector::zeros();
    out.fixed_rows_mut::<12>(0).copy_from(&a);
    out.fixed_rows_mut::<12>(12).copy_from(&b);
    Ok(out)
}

/// Consistent tangent of the point contact residual. The projection-kind
/// specific coordinate sensitivities (zero rows for pinned coordinates) come
/// from the closest-point module.
pub fn point_stiffness(
    e1: &ElementDofVector,
    e2: &ElementDofVector,
    sol: &ClosestPointSolution,
    law: &PenaltyLaw,
    weight: f64,
) -> Result<PairMatrix> {
    check_converged(sol)?;
    if sol.gap >= law.support_gap() || weight == 0.0 {
        return Ok(PairMatrix::zeros());
    }
    let (dxi, deta) = cpp_sensitivities(sol, e1, e2)?;
    let ops = contact_point_ops(e1, e2, sol)?;
    Ok(weight * ops.base_stiffness(law, &dxi, &deta))
}

/// Endpoint variant: identical force expression with the pinned-coordinate
/// sensitivities. Provided as an explicit entry point; it validates the kind.
pub fn endpoint_residual_stiffness(
    e1: &ElementDofVector,
    e2: &ElementDofVector,
    sol: &ClosestPointSolution,
    law: &PenaltyLaw,
    weight: f64,
) -> Result<(PairVector, PairMatrix)> {
    match sol.kind {
        ProjectionKind::EndpointSlave
        | ProjectionKind::EndpointMaster
        | ProjectionKind::EndpointBoth => {}
        other => {
            return Err(Error::InvalidContactConfig(format!(
                "endpoint evaluation called with {other:?} solution"
            )))
        }
    }
    let r = point_pair_residual(e1, e2, sol, law, weight)?;
    let k = point_stiffness(e1, e2, sol, law, weight)?;
    Ok((r, k))
}
