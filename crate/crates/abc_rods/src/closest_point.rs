//! Bilateral and unilateral closest-point projections between two element
//! centerlines, master-endpoint boundary projections, the contact angle, and
//! the sensitivities of all projection coordinates with respect to the 24
//! stacked pair dofs (element 1 first, element 2 second).
//!
//! All parameter derivatives here are xi-derivatives (tangent factors l0/2
//! included); the orthogonality conditions and their linearizations are
//! homogeneous in the Jacobians, so no arc-length conversion is needed.

use crate::error::{Error, Result};
use crate::geometry::{shape_row, ElementDofVector};
use crate::{PairRow, Vec3};
use nalgebra::{Matrix2, RowSVector, Vector2};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProjectionKind {
    Bilateral,
    Unilateral,
    EndpointSlave,
    EndpointMaster,
    EndpointBoth,
}

#[derive(Debug, Clone, Copy)]
pub struct ClosestPointSolution {
    pub xi: f64,
    pub eta: f64,
    /// Center distance minus both radii; negative means penetration.
    pub gap: f64,
    /// Centerline distance at the solution.
    pub distance: f64,
    /// Unit normal pointing from beam 2 toward beam 1.
    pub normal: Vec3,
    /// |cos| of the contact angle.
    pub z: f64,
    /// Contact angle in radians, in [0, pi/2].
    pub alpha: f64,
    pub kind: ProjectionKind,
    pub converged: bool,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct ProjectionParams {
    pub radius1: f64,
    pub radius2: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl ProjectionParams {
    pub fn new(radius1: f64, radius2: f64) -> Self {
        Self {
            radius1,
            radius2,
            tol: 1e-10,
            max_iter: 50,
        }
    }
}

/// Values and derivatives of both centerlines at a coordinate pair, plus the
/// orthogonality residuals and all their partial derivatives.
pub(crate) struct PairKinematics {
    pub r1p: Vec3,
    pub r1pp: Vec3,
    pub r2p: Vec3,
    pub r2pp: Vec3,
    pub delta: Vec3,
    pub dist: f64,
    pub p1: f64,
    pub p2: f64,
    pub p1_xi: f64,
    pub p1_eta: f64,
    pub p2_xi: f64,
    pub p2_eta: f64,
    w1_0: [f64; 4],
    w1_1: [f64; 4],
    w2_0: [f64; 4],
    w2_1: [f64; 4],
}

fn clamp_unit(x: f64) -> f64 {
    x.clamp(-1.0, 1.0)
}

pub(crate) fn pair_kinematics(
    e1: &ElementDofVector,
    xi: f64,
    e2: &ElementDofVector,
    eta: f64,
) -> Result<PairKinematics> {
    let w1_0 = shape_row(xi, 0, e1.l0)?;
    let w1_1 = shape_row(xi, 1, e1.l0)?;
    let w1_2 = shape_row(xi, 2, e1.l0)?;
    let w2_0 = shape_row(eta, 0, e2.l0)?;
    let w2_1 = shape_row(eta, 1, e2.l0)?;
    let w2_2 = shape_row(eta, 2, e2.l0)?;
    let r1 = crate::geometry::apply_row(&w1_0, &e1.dofs);
    let r1p = crate::geometry::apply_row(&w1_1, &e1.dofs);
    let r1pp = crate::geometry::apply_row(&w1_2, &e1.dofs);
    let r2 = crate::geometry::apply_row(&w2_0, &e2.dofs);
    let r2p = crate::geometry::apply_row(&w2_1, &e2.dofs);
    let r2pp = crate::geometry::apply_row(&w2_2, &e2.dofs);
    let delta = r1 - r2;
    Ok(PairKinematics {
        r1p,
        r1pp,
        r2p,
        r2pp,
        delta,
        dist: delta.norm(),
        p1: r1p.dot(&delta),
        p2: r2p.dot(&delta),
        p1_xi: r1p.dot(&r1p) + delta.dot(&r1pp),
        p1_eta: -r1p.dot(&r2p),
        p2_xi: r1p.dot(&r2p),
        p2_eta: -r2p.dot(&r2p) + delta.dot(&r2pp),
        w1_0,
        w1_1,
        w2_0,
        w2_1,
    })
}

fn vt_row(v: &Vec3, w: &[f64; 4]) -> RowSVector<f64, 12> {
    let mut out = RowSVector::<f64, 12>::zeros();
    for (b, &wb) in w.iter().enumerate() {
        out.fixed_columns_mut::<3>(3 * b)
            .copy_from(&(wb * v.transpose()));
    }
    out
}

pub(crate) fn stack_rows(a: &RowSVector<f64, 12>, b: &RowSVector<f64, 12>) -> PairRow {
    let mut out = PairRow::zeros();
    out.fixed_columns_mut::<12>(0).copy_from(a);
    out.fixed_columns_mut::<12>(12).copy_from(b);
    out
}

impl PairKinematics {
    /// d p1 / d(pair dofs), a 1x24 row.
    pub fn p1_d(&self) -> PairRow {
        let a = vt_row(&self.delta, &self.w1_1) + vt_row(&self.r1p, &self.w1_0);
        let b = -vt_row(&self.r1p, &self.w2_0);
        stack_rows(&a, &b)
    }

    /// d p2 / d(pair dofs).
    pub fn p2_d(&self) -> PairRow {
        let a = vt_row(&self.r2p, &self.w1_0);
        let b = vt_row(&self.delta, &self.w2_1) - vt_row(&self.r2p, &self.w2_0);
        stack_rows(&a, &b)
    }

    fn scale1(&self, rmax: f64) -> f64 {
        self.r1p.norm() * self.dist.max(rmax)
    }

    fn scale2(&self, rmax: f64) -> f64 {
        self.r2p.norm() * self.dist.max(rmax)
    }
}

/// z = |cos| of the angle between the two tangents, and the angle itself.
pub fn contact_angle(r1_prime: &Vec3, r2_prime: &Vec3) -> Result<(f64, f64)> {
    let n1 = r1_prime.norm();
    let n2 = r2_prime.norm();
    if n1 < 1e-12 || n2 < 1e-12 {
        return Err(Error::DegenerateElement(
            "zero tangent in contact angle".to_string(),
        ));
    }
    let z = (r1_prime.dot(r2_prime).abs() / (n1 * n2)).min(1.0);
    Ok((z, z.acos()))
}

fn make_solution(
    k: &PairKinematics,
    xi: f64,
    eta: f64,
    params: &ProjectionParams,
    kind: ProjectionKind,
    converged: bool,
    iterations: usize,
) -> Result<ClosestPointSolution> {
    let dist = k.dist;
    if dist < 1e-14 {
        return Err(Error::DegenerateElement(
            "coincident centerline points in projection".to_string(),
        ));
    }
    let (z, alpha) = contact_angle(&k.r1p, &k.r2p)?;
    Ok(ClosestPointSolution {
        xi,
        eta,
        gap: dist - params.radius1 - params.radius2,
        distance: dist,
        normal: k.delta / dist,
        z,
        alpha,
        kind,
        converged,
        iterations,
    })
}

#[derive(Debug)]
pub enum BilateralOutcome {
    Converged(ClosestPointSolution),
    /// The iteration left [-1,1]^2 (final clamped coordinates reported);
    /// the pair should be re-handled as an endpoint candidate.
    OutOfDomain { xi: f64, eta: f64 },
    Unconverged { iterations: usize, residual: f64 },
}

/// Newton iteration on both orthogonality conditions. Iterates are pulled
/// back onto [-1,1]^2; an iteration that stalls on the boundary is reported
/// as out-of-domain.
pub fn bilateral_cpp(
    e1: &ElementDofVector,
    e2: &ElementDofVector,
    start: (f64, f64),
    params: &ProjectionParams,
) -> Result<BilateralOutcome> {
    let rmax = params.radius1.max(params.radius2);
    let (mut xi, mut eta) = (clamp_unit(start.0), clamp_unit(start.1));
    let mut last_res = f64::INFINITY;
    for it in 0..params.max_iter {
        let k = pair_kinematics(e1, xi, e2, eta)?;
        let s1 = k.scale1(rmax);
        let s2 = k.scale2(rmax);
        let r1 = k.p1.abs() / s1;
        let r2 = k.p2.abs() / s2;
        last_res = r1.max(r2);
        if last_res < params.tol {
            return Ok(BilateralOutcome::Converged(make_solution(
                &k,
                xi,
                eta,
                params,
                ProjectionKind::Bilateral,
                true,
                it,
            )?));
        }
        let a = Matrix2::new(k.p1_xi, k.p1_eta, k.p2_xi, k.p2_eta);
        let det = a.determinant();
        let det_scale = k.p1_xi.abs().max(k.p1_eta.abs()) * k.p2_xi.abs().max(k.p2_eta.abs());
        if det.abs() < 1e-12 * det_scale.max(1e-300) {
            return Err(Error::ProjectionNotUnique { det });
        }
        let rhs = Vector2::new(-k.p1, -k.p2);
        let d = a.lu().solve(&rhs).ok_or(Error::ProjectionNotUnique { det })?;
        let new_xi = clamp_unit(xi + d[0]);
        let new_eta = clamp_unit(eta + d[1]);
        if (new_xi - xi).abs() < 1e-16 && (new_eta - eta).abs() < 1e-16 {
            // Stalled on the boundary: the unconstrained root lies outside.
            return Ok(BilateralOutcome::OutOfDomain { xi: new_xi, eta: new_eta });
        }
        xi = new_xi;
        eta = new_eta;
    }
    // A clamped iterate can oscillate at machine precision instead of
    // stalling exactly; a boundary-pinned iterate is still an out-of-domain
    // verdict, not a failure.
    if xi.abs() >= 1.0 - 1e-12 || eta.abs() >= 1.0 - 1e-12 {
        return Ok(BilateralOutcome::OutOfDomain { xi, eta });
    }
    Ok(BilateralOutcome::Unconverged {
        iterations: params.max_iter,
        residual: last_res,
    })
}

#[derive(Debug)]
pub enum UnilateralOutcome {
    Converged(ClosestPointSolution),
    /// The master coordinate left [-1, 1]; caller deactivates the Gauss
    /// point or triggers endpoint segmentation.
    OutOfDomain { eta: f64 },
    Unconverged { iterations: usize, residual: f64 },
}

/// Newton iteration on the single master-side orthogonality condition with
/// the slave coordinate held fixed.
pub fn unilateral_cpp(
    e1: &ElementDofVector,
    xi: f64,
    e2: &ElementDofVector,
    eta_start: f64,
    params: &ProjectionParams,
) -> Result<UnilateralOutcome> {
    let rmax = params.radius1.max(params.radius2);
    let mut eta = clamp_unit(eta_start);
    let mut last_res = f64::INFINITY;
    for it in 0..params.max_iter {
        let k = pair_kinematics(e1, xi, e2, eta)?;
        last_res = k.p2.abs() / k.scale2(rmax);
        if last_res < params.tol {
            return Ok(UnilateralOutcome::Converged(make_solution(
                &k,
                xi,
                eta,
                params,
                ProjectionKind::Unilateral,
                true,
                it,
            )?));
        }
        if k.p2_eta.abs() < 1e-14 * k.r2p.norm_squared().max(1e-300) {
            return Ok(UnilateralOutcome::Unconverged {
                iterations: it,
                residual: last_res,
            });
        }
        let step = -k.p2 / k.p2_eta;
        let new_eta = clamp_unit(eta + step);
        if (new_eta - eta).abs() < 1e-16 {
            return Ok(UnilateralOutcome::OutOfDomain { eta: new_eta });
        }
        eta = new_eta;
    }
    if eta.abs() >= 1.0 - 1e-12 {
        return Ok(UnilateralOutcome::OutOfDomain { eta });
    }
    Ok(UnilateralOutcome::Unconverged {
        iterations: params.max_iter,
        residual: last_res,
    })
}

/// Fixed-eta sub-projection used by endpoint handling: solves the slave-side
/// orthogonality condition p1(xi, eta) = 0 in xi.
fn slave_line_projection(
    e1: &ElementDofVector,
    e2: &ElementDofVector,
    eta: f64,
    xi_start: f64,
    params: &ProjectionParams,
) -> Result<Option<f64>> {
    let mut xi = clamp_unit(xi_start);
    let rmax = params.radius1.max(params.radius2);
    for _ in 0..params.max_iter {
        let k = pair_kinematics(e1, xi, e2, eta)?;
        if k.p1.abs() / k.scale1(rmax) < params.tol {
            return Ok(Some(xi));
        }
        if k.p1_xi.abs() < 1e-14 * k.r1p.norm_squared().max(1e-300) {
            return Ok(None);
        }
        let new_xi = clamp_unit(xi - k.p1 / k.p1_xi);
        if (new_xi - xi).abs() < 1e-16 {
            return Ok(None);
        }
        xi = new_xi;
    }
    Ok(None)
}

/// Point-candidate projection cascade: bilateral projection first, with
/// endpoint fallbacks when the minimum sits on the parameter boundary. The
/// result kind records which coordinates are pinned to an element end.
pub fn resolve_point_projection(
    e1: &ElementDofVector,
    e2: &ElementDofVector,
    start: (f64, f64),
    params: &ProjectionParams,
) -> Result<Option<ClosestPointSolution>> {
    let (bxi, beta) = match bilateral_cpp(e1, e2, start, params)? {
        BilateralOutcome::Converged(sol) => return Ok(Some(sol)),
        BilateralOutcome::OutOfDomain { xi, eta } => (xi, eta),
        BilateralOutcome::Unconverged { .. } => return Ok(None),
    };
    let xi_pinned = bxi.abs() >= 1.0 - 1e-12;
    let eta_pinned = beta.abs() >= 1.0 - 1e-12;

    if xi_pinned && !eta_pinned {
        let xi = bxi.signum();
        match unilateral_cpp(e1, xi, e2, beta, params)? {
            UnilateralOutcome::Converged(mut sol) => {
                sol.kind = ProjectionKind::EndpointSlave;
                return Ok(Some(sol));
            }
            UnilateralOutcome::OutOfDomain { eta } => {
                return endpoint_both(e1, xi, e2, eta.signum(), params).map(Some);
            }
            UnilateralOutcome::Unconverged { .. } => return Ok(None),
        }
    }
    if eta_pinned && !xi_pinned {
        let eta = beta.signum();
        match slave_line_projection(e1, e2, eta, bxi, params)? {
            Some(xi) if xi.abs() < 1.0 - 1e-12 => {
                let k = pair_kinematics(e1, xi, e2, eta)?;
                let mut sol =
                    make_solution(&k, xi, eta, params, ProjectionKind::EndpointMaster, true, 0)?;
                sol.kind = ProjectionKind::EndpointMaster;
                return Ok(Some(sol));
            }
            Some(xi) => return endpoint_both(e1, xi.signum(), e2, eta, params).map(Some),
            None => return Ok(None),
        }
    }
    endpoint_both(e1, bxi.signum(), e2, beta.signum(), params).map(Some)
}

fn endpoint_both(
    e1: &ElementDofVector,
    xi: f64,
    e2: &ElementDofVector,
    eta: f64,
    params: &ProjectionParams,
) -> Result<ClosestPointSolution> {
    let k = pair_kinematics(e1, xi, e2, eta)?;
    make_solution(&k, xi, eta, params, ProjectionKind::EndpointBoth, true, 0)
}

/// Projection of a master endpoint onto the slave curve: solves the master
/// orthogonality condition p2(xi, eta_ep) = 0 for the slave coordinate.
/// Returns the boundary coordinate and its dof sensitivity, or None when the
/// endpoint has no orthogonal foot inside the slave element.
pub fn master_endpoint_projection(
    e1: &ElementDofVector,
    e2: &ElementDofVector,
    eta_ep: f64,
    xi_start: f64,
    params: &ProjectionParams,
) -> Result<Option<(f64, PairRow)>> {
    debug_assert!(eta_ep == 1.0 || eta_ep == -1.0);
    let rmax = params.radius1.max(params.radius2);
    let mut xi = clamp_unit(xi_start);
    for _ in 0..params.max_iter {
        let k = pair_kinematics(e1, xi, e2, eta_ep)?;
        if k.p2.abs() / k.scale2(rmax) < params.tol {
            if xi.abs() >= 1.0 - 1e-12 {
                return Ok(None);
            }
            let row = -k.p2_d() / k.p2_xi;
            return Ok(Some((xi, row)));
        }
        if k.p2_xi.abs() < 1e-14 * (k.r1p.norm() * k.r2p.norm()).max(1e-300) {
            return Ok(None);
        }
        let new_xi = clamp_unit(xi - k.p2 / k.p2_xi);
        if (new_xi - xi).abs() < 1e-16 {
            return Ok(None);
        }
        xi = new_xi;
    }
    Ok(None)
}

/// Coordinate sensitivities (d xi_c / dd, d eta_c / dd) of a converged
/// projection with respect to the 24 pair dofs. For unilateral solutions the
/// returned xi row is zero (the slave coordinate is externally prescribed);
/// the chain term d eta / d xi is available from [`unilateral_eta_xi_partial`].
pub fn cpp_sensitivities(
    sol: &ClosestPointSolution,
    e1: &ElementDofVector,
    e2: &ElementDofVector,
) -> Result<(PairRow, PairRow)> {
    let k = pair_kinematics(e1, sol.xi, e2, sol.eta)?;
    match sol.kind {
        ProjectionKind::Bilateral => {
            let a = Matrix2::new(k.p1_xi, k.p1_eta, k.p2_xi, k.p2_eta);
            let det = a.determinant();
            let lu = a.lu();
            let p1d = k.p1_d();
            let p2d = k.p2_d();
            let mut dxi = PairRow::zeros();
            let mut deta = PairRow::zeros();
            for c in 0..24 {
                let rhs = Vector2::new(-p1d[c], -p2d[c]);
                let s = lu.solve(&rhs).ok_or(Error::ProjectionNotUnique { det })?;
                dxi[c] = s[0];
                deta[c] = s[1];
            }
            Ok((dxi, deta))
        }
        ProjectionKind::Unilateral | ProjectionKind::EndpointSlave => {
            let deta = -k.p2_d() / k.p2_eta;
            Ok((PairRow::zeros(), deta))
        }
        ProjectionKind::EndpointMaster => {
            let dxi = -k.p1_d() / k.p1_xi;
            Ok((dxi, PairRow::zeros()))
        }
        ProjectionKind::EndpointBoth => Ok((PairRow::zeros(), PairRow::zeros())),
    }
}

/// The partial d eta_c / d xi of a unilateral projection, used when the slave
/// coordinate itself depends on the dofs (boundary-projected interval bounds).
pub fn unilateral_eta_xi_partial(
    e1: &ElementDofVector,
    e2: &ElementDofVector,
    xi: f64,
    eta: f64,
) -> Result<f64> {
    let k = pair_kinematics(e1, xi, e2, eta)?;
    Ok(-k.p2_xi / k.p2_eta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::NodalDof;
    use approx::assert_relative_eq;

    const R: f64 = 0.01;

    fn params() -> ProjectionParams {
        ProjectionParams::new(R, R)
    }

    fn straight(p0: Vec3, p1: Vec3) -> ElementDofVector {
        let l0 = (p1 - p0).norm();
        let t = (p1 - p0) / l0;
        let n1 = NodalDof::new(p0, t).unwrap();
        let n2 = NodalDof::new(p1, t).unwrap();
        ElementDofVector::from_nodes(&n1, &n2, l0, 0.0).unwrap()
    }

    fn perpendicular_pair(d: f64) -> (ElementDofVector, ElementDofVector) {
        let e1 = straight(Vec3::new(-1.0, 0.0, 0.0), Vec3::new(1.0, 0.0, 0.0));
        let e2 = straight(Vec3::new(0.0, -1.0, d), Vec3::new(0.0, 1.0, d));
        (e1, e2)
    }

    #[test]
    fn perpendicular_crossing() {
        let d = 0.015;
        let (e1, e2) = perpendicular_pair(d);
        let out = bilateral_cpp(&e1, &e2, (0.3, -0.2), &params()).unwrap();
        let sol = match out {
            BilateralOutcome::Converged(s) => s,
            other => panic!("expected convergence, got {other:?}"),
        };
        assert_relative_eq!(sol.xi, 0.0, epsilon = 1e-9);
        assert_relative_eq!(sol.eta, 0.0, epsilon = 1e-9);
        assert_relative_eq!(sol.gap, d - 2.0 * R, epsilon = 1e-12);
        assert_relative_eq!(sol.normal, Vec3::new(0.0, 0.0, -1.0), epsilon = 1e-9);
        assert_relative_eq!(sol.alpha.to_degrees(), 90.0, epsilon = 1e-9);
    }

    #[test]
    fn parallel_singular() {
        let e1 = straight(Vec3::new(-1.0, 0.0, 0.0), Vec3::new(1.0, 0.0, 0.0));
        let e2 = straight(Vec3::new(-1.0, 0.0, 0.1), Vec3::new(1.0, 0.0, 0.1));
        assert!(matches!(
            bilateral_cpp(&e1, &e2, (0.1, 0.2), &params()),
            Err(Error::ProjectionNotUnique { .. })
        ));
    }

    #[test]
    fn skew_lines_match_closed_form() {
        let p1 = Vec3::new(-0.9, 0.1, 0.0);
        let q1 = Vec3::new(1.1, -0.2, 0.15);
        let p2 = Vec3::new(0.2, -0.8, 0.3);
        let q2 = Vec3::new(-0.1, 0.9, 0.18);
        let e1 = straight(p1, q1);
        let e2 = straight(p2, q2);
        let out = bilateral_cpp(&e1, &e2, (0.0, 0.0), &params()).unwrap();
        let sol = match out {
            BilateralOutcome::Converged(s) => s,
            other => panic!("{other:?}"),
        };
        let u = q1 - p1;
        let v = q2 - p2;
        let n = u.cross(&v);
        let d_exact = ((p2 - p1).dot(&n) / n.norm()).abs();
        assert_relative_eq!(sol.distance, d_exact, epsilon = 1e-10);
        assert_relative_eq!(sol.gap + 2.0 * R, d_exact, epsilon = 1e-10);
    }

    #[test]
    fn unilateral_straight_master_fast() {
        let (e1, e2) = perpendicular_pair(0.02);
        let out = unilateral_cpp(&e1, 0.4, &e2, 0.9, &params()).unwrap();
        let sol = match out {
            UnilateralOutcome::Converged(s) => s,
            other => panic!("{other:?}"),
        };
        // p2 is affine in eta on a straight master: one Newton step suffices.
        assert!(sol.iterations <= 2, "iterations = {}", sol.iterations);
        assert_relative_eq!(sol.eta, 0.0, epsilon = 1e-10);
        // Normal perpendicular to the master tangent only.
        let r2p = crate::geometry::interpolate(&e2, sol.eta, 1).unwrap();
        assert!(sol.normal.dot(&r2p).abs() < 1e-10 * r2p.norm());
    }

    #[test]
    fn unilateral_on_common_normal_equals_bilateral() {
        let p1 = Vec3::new(-0.9, 0.1, 0.0);
        let q1 = Vec3::new(1.1, -0.2, 0.15);
        let p2 = Vec3::new(0.2, -0.8, 0.3);
        let q2 = Vec3::new(-0.1, 0.9, 0.18);
        let e1 = straight(p1, q1);
        let e2 = straight(p2, q2);
        let bl = match bilateral_cpp(&e1, &e2, (0.0, 0.0), &params()).unwrap() {
            BilateralOutcome::Converged(s) => s,
            other => panic!("{other:?}"),
        };
        let ul = match unilateral_cpp(&e1, bl.xi, &e2, 0.5, &params()).unwrap() {
            UnilateralOutcome::Converged(s) => s,
            other => panic!("{other:?}"),
        };
        assert_relative_eq!(ul.distance, bl.distance, epsilon = 1e-10);
        assert_relative_eq!(ul.eta, bl.eta, epsilon = 1e-8);
    }

    #[test]
    fn unilateral_out_of_domain_reported() {
        // The slave point's orthogonal foot lies beyond the master span.
        let e1 = straight(Vec3::new(-1.0, 0.0, 0.0), Vec3::new(1.0, 0.0, 0.0));
        let e2 = straight(Vec3::new(-0.2, 1.0, 0.02), Vec3::new(-0.2, 3.0, 0.02));
        let out = unilateral_cpp(&e1, 0.0, &e2, 0.0, &params()).unwrap();
        assert!(matches!(out, UnilateralOutcome::OutOfDomain { eta } if eta == -1.0));
    }

    #[test]
    fn master_endpoint_no_overlap() {
        let (e1, e2) = perpendicular_pair(0.02);
        // Master endpoint at (0, 1, d): its orthogonal foot on the slave
        // (x-axis) in the master-tangent direction does not exist since the
        // master tangent is perpendicular to the slave — p2(xi) = const != 0.
        let res = master_endpoint_projection(&e1, &e2, 1.0, 0.0, &params()).unwrap();
        assert!(res.is_none());
    }

    #[test]
    fn master_endpoint_mid_slave() {
        // Slave along x, master along x shifted so its end at x = 0.3 lies
        // above the slave interior.
        let e1 = straight(Vec3::new(-1.0, 0.0, 0.0), Vec3::new(1.0, 0.0, 0.0));
        let e2 = straight(Vec3::new(-1.7, 0.0, 0.02), Vec3::new(0.3, 0.0, 0.02));
        let (xi_b, row) = master_endpoint_projection(&e1, &e2, 1.0, 0.0, &params())
            .unwrap()
            .expect("endpoint foot inside slave");
        assert_relative_eq!(xi_b, 0.3, epsilon = 1e-9);

        // Oracle: bracketing bisection on p2(xi, 1).
        let f = |xi: f64| pair_kinematics(&e1, xi, &e2, 1.0).unwrap().p2;
        let (mut lo, mut hi) = (-1.0, 1.0);
        assert!(f(lo) * f(hi) < 0.0);
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if f(lo) * f(mid) <= 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        assert_relative_eq!(xi_b, 0.5 * (lo + hi), epsilon = 1e-9);

        // Translation test vector contracts the sensitivity to zero.
        let mut u = PairVectorExt::translation(Vec3::new(0.3, -0.7, 0.4));
        assert!(row.dot(&u.transpose()).abs() < 1e-12);
        u = PairVectorExt::translation(Vec3::z());
        assert!(row.dot(&u.transpose()).abs() < 1e-12);
    }

    /// Helpers constructing rigid test vectors over the 24 pair dofs.
    pub(crate) struct PairVectorExt;
    impl PairVectorExt {
        pub fn translation(dir: Vec3) -> crate::PairVector {
            let mut u = crate::PairVector::zeros();
            for b in [0, 2, 4, 6] {
                u.fixed_rows_mut::<3>(3 * b).copy_from(&dir);
            }
            u
        }
        pub fn rotation(omega: Vec3, e1: &ElementDofVector, e2: &ElementDofVector) -> crate::PairVector {
            let mut u = crate::PairVector::zeros();
            for b in 0..4 {
                let v = Vec3::from(e1.dofs.fixed_rows::<3>(3 * b));
                u.fixed_rows_mut::<3>(3 * b).copy_from(&omega.cross(&v));
            }
            for b in 0..4 {
                let v = Vec3::from(e2.dofs.fixed_rows::<3>(3 * b));
                u.fixed_rows_mut::<3>(12 + 3 * b).copy_from(&omega.cross(&v));
            }
            u
        }
    }

    fn curved_pair() -> (ElementDofVector, ElementDofVector) {
        // Mildly curved elements in general position.
        let n1 = NodalDof::new(Vec3::new(-0.9, 0.05, 0.0), Vec3::new(1.0, 0.15, -0.1)).unwrap();
        let n2 = NodalDof::new(Vec3::new(0.95, -0.1, 0.1), Vec3::new(0.95, -0.2, 0.2)).unwrap();
        let e1 = ElementDofVector::from_nodes(&n1, &n2, 1.9, 0.0).unwrap();
        let m1 = NodalDof::new(Vec3::new(0.1, -0.8, 0.13), Vec3::new(-0.1, 1.0, 0.05)).unwrap();
        let m2 = NodalDof::new(Vec3::new(0.0, 0.9, 0.2), Vec3::new(-0.15, 0.95, 0.1)).unwrap();
        let e2 = ElementDofVector::from_nodes(&m1, &m2, 1.75, 0.0).unwrap();
        (e1, e2)
    }

    #[test]
    fn sensitivities_rigid_contractions() {
        let (e1, e2) = curved_pair();
        let sol = match bilateral_cpp(&e1, &e2, (0.0, 0.0), &params()).unwrap() {
            BilateralOutcome::Converged(s) => s,
            other => panic!("{other:?}"),
        };
        let (dxi, deta) = cpp_sensitivities(&sol, &e1, &e2).unwrap();
        for dir in [Vec3::x(), Vec3::y(), Vec3::z()] {
            let u = PairVectorExt::translation(dir);
            assert!((dxi * u)[0].abs() < 1e-9, "translation xi");
            assert!((deta * u)[0].abs() < 1e-9, "translation eta");
        }
        for omega in [Vec3::x(), Vec3::y(), Vec3::z()] {
            let u = PairVectorExt::rotation(omega, &e1, &e2);
            assert!((dxi * u)[0].abs() < 1e-9, "rotation xi");
            assert!((deta * u)[0].abs() < 1e-9, "rotation eta");
        }
    }

    #[test]
    fn sensitivities_match_fd_reprojection() {
        let (e1, e2) = curved_pair();
        let sol = match bilateral_cpp(&e1, &e2, (0.0, 0.0), &params()).unwrap() {
            BilateralOutcome::Converged(s) => s,
            other => panic!("{other:?}"),
        };
        let (dxi, deta) = cpp_sensitivities(&sol, &e1, &e2).unwrap();
        let h = 1e-7;
        for c in 0..24 {
            let perturb = |sign: f64| -> (f64, f64) {
                let mut a = e1;
                let mut b = e2;
                if c < 12 {
                    a.dofs[c] += sign * h;
                } else {
                    b.dofs[c - 12] += sign * h;
                }
                match bilateral_cpp(&a, &b, (sol.xi, sol.eta), &params()).unwrap() {
                    BilateralOutcome::Converged(s) => (s.xi, s.eta),
                    other => panic!("{other:?}"),
                }
            };
            let (xp, ep) = perturb(1.0);
            let (xm, em) = perturb(-1.0);
            let fd_xi = (xp - xm) / (2.0 * h);
            let fd_eta = (ep - em) / (2.0 * h);
            let sx = dxi.amax().max(1e-6);
            let se = deta.amax().max(1e-6);
            assert!(
                (dxi[c] - fd_xi).abs() / sx < 1e-5,
                "dof {c}: dxi {} vs fd {}",
                dxi[c],
                fd_xi
            );
            assert!(
                (deta[c] - fd_eta).abs() / se < 1e-5,
                "dof {c}: deta {} vs fd {}",
                deta[c],
                fd_eta
            );
        }
    }

    #[test]
    fn unilateral_sensitivity_matches_fd() {
        let (e1, e2) = curved_pair();
        let xi = 0.27;
        let sol = match unilateral_cpp(&e1, xi, &e2, 0.0, &params()).unwrap() {
            UnilateralOutcome::Converged(s) => s,
            other => panic!("{other:?}"),
        };
        let (_, deta) = cpp_sensitivities(&sol, &e1, &e2).unwrap();
        let h = 1e-7;
        for c in 0..24 {
            let reproj = |sign: f64| -> f64 {
                let mut a = e1;
                let mut b = e2;
                if c < 12 {
                    a.dofs[c] += sign * h;
                } else {
                    b.dofs[c - 12] += sign * h;
                }
                match unilateral_cpp(&a, xi, &b, sol.eta, &params()).unwrap() {
                    UnilateralOutcome::Converged(s) => s.eta,
                    other => panic!("{other:?}"),
                }
            };
            let fd = (reproj(1.0) - reproj(-1.0)) / (2.0 * h);
            let scale = deta.amax().max(1e-6);
            assert!(
                (deta[c] - fd).abs() / scale < 1e-5,
                "dof {c}: {} vs {}",
                deta[c],
                fd
            );
        }
    }

    #[test]
    fn contact_angle_examples() {
        let (z, a) = contact_angle(&Vec3::x(), &Vec3::y()).unwrap();
        assert_relative_eq!(z, 0.0);
        assert_relative_eq!(a.to_degrees(), 90.0);
        let (z, a) = contact_angle(&Vec3::x(), &(-Vec3::x())).unwrap();
        assert_relative_eq!(z, 1.0);
        assert_relative_eq!(a.to_degrees(), 0.0);
        let (z, a) = contact_angle(&Vec3::x(), &Vec3::new(1.0, 1.0, 0.0)).unwrap();
        assert_relative_eq!(z, std::f64::consts::FRAC_1_SQRT_2, epsilon = 1e-14);
        assert_relative_eq!(a.to_degrees(), 45.0, epsilon = 1e-12);
    }

    #[test]
    fn coordinates_rigid_invariant() {
        let (e1, e2) = curved_pair();
        let sol = match bilateral_cpp(&e1, &e2, (0.0, 0.0), &params()).unwrap() {
            BilateralOutcome::Converged(s) => s,
            other => panic!("{other:?}"),
        };
        let q = nalgebra::Rotation3::from_euler_angles(0.7, -0.2, 1.1);
        let shift = Vec3::new(0.4, -1.2, 0.9);
        let rot = |e: &ElementDofVector| {
            let mut out = *e;
            for b in 0..4 {
                let v = Vec3::from(e.dofs.fixed_rows::<3>(3 * b));
                let w = if b % 2 == 0 { q * v + shift } else { q * v };
                out.dofs.fixed_rows_mut::<3>(3 * b).copy_from(&w);
            }
            out
        };
        let sol2 = match bilateral_cpp(&rot(&e1), &rot(&e2), (0.0, 0.0), &params()).unwrap() {
            BilateralOutcome::Converged(s) => s,
            other => panic!("{other:?}"),
        };
        assert_relative_eq!(sol.xi, sol2.xi, epsilon = 1e-10);
        assert_relative_eq!(sol.eta, sol2.eta, epsilon = 1e-10);
        assert_relative_eq!(sol.gap, sol2.gap, epsilon = 1e-10);
        assert_relative_eq!(sol.alpha, sol2.alpha, epsilon = 1e-10);
    }

    #[test]
    fn endpoint_cascade() {
        // Slave along x from -1 to 1; master along y far to the right so the
        // slave endpoint xi = +1 is the minimizer.
        let e1 = straight(Vec3::new(-1.0, 0.0, 0.0), Vec3::new(1.0, 0.0, 0.0));
        let e2 = straight(Vec3::new(1.5, -1.0, 0.0), Vec3::new(1.5, 1.0, 0.0));
        let sol = resolve_point_projection(&e1, &e2, (0.0, 0.0), &params())
            .unwrap()
            .expect("endpoint solution");
        assert_eq!(sol.kind, ProjectionKind::EndpointSlave);
        assert_relative_eq!(sol.xi, 1.0);
        assert_relative_eq!(sol.eta, 0.0, epsilon = 1e-9);
        assert_relative_eq!(sol.distance, 0.5, epsilon = 1e-10);

        // Both ends: master shifted along y too.
        let e3 = straight(Vec3::new(1.5, 0.7, 0.0), Vec3::new(1.5, 2.0, 0.0));
        let sol = resolve_point_projection(&e1, &e3, (0.0, 0.0), &params())
            .unwrap()
            .expect("corner solution");
        assert_eq!(sol.kind, ProjectionKind::EndpointBoth);
        assert_relative_eq!(sol.xi, 1.0);
        assert_relative_eq!(sol.eta, -1.0);
        let d_exact = (Vec3::new(1.5, 0.7, 0.0) - Vec3::new(1.0, 0.0, 0.0)).norm();
        assert_relative_eq!(sol.distance, d_exact, epsilon = 1e-12);
    }
}
