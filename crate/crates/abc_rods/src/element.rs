//! Element residual and tangent stiffness of the torsion-free Kirchhoff beam:
//! internal (axial + bending), kinetic, and external load terms, plus the
//! interpolated-axial-strain (MCS) variant that relieves membrane locking.
//!
//! All derivatives written r', r'' are arc-length derivatives; with the
//! constant element Jacobian J = l0/2 they are parameter derivatives divided
//! by J and J^2.

use crate::error::{Error, Result};
use crate::geometry::{shape_row, BeamSection, ElementDofVector};
use crate::quadrature::gauss_legendre;
use crate::{ElemMatrix, ElemVector, Vec3};
use nalgebra::SMatrix;

type Mat3 = nalgebra::Matrix3<f64>;
type ShapeMat = SMatrix<f64, 3, 12>;

/// Distributed load field over the element parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LoadField {
    Constant(Vec3),
    /// value(xi) = coefficient * xi
    LinearInXi(Vec3),
}

impl LoadField {
    pub fn value(&self, xi: f64) -> Vec3 {
        match self {
            LoadField::Constant(v) => *v,
            LoadField::LinearInXi(v) => *v * xi,
        }
    }
}

/// External loads on one element: distributed force per length, distributed
/// perpendicular moment per length, and point force/moment at the two
/// boundary nodes (xi = -1, +1). Moments must be perpendicular to the
/// centerline tangent wherever they act.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ElementLoad {
    pub force: Option<LoadField>,
    pub moment: Option<LoadField>,
    pub point_force: [Option<Vec3>; 2],
    pub point_moment: [Option<Vec3>; 2],
}

impl ElementLoad {
    pub fn is_zero(&self) -> bool {
        self.force.is_none()
            && self.moment.is_none()
            && self.point_force.iter().all(Option::is_none)
            && self.point_moment.iter().all(Option::is_none)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        let sf = |f: &Option<LoadField>| {
            f.map(|lf| match lf {
                LoadField::Constant(v) => LoadField::Constant(v * factor),
                LoadField::LinearInXi(v) => LoadField::LinearInXi(v * factor),
            })
        };
        Self {
            force: sf(&self.force),
            moment: sf(&self.moment),
            point_force: self.point_force.map(|p| p.map(|v| v * factor)),
            point_moment: self.point_moment.map(|p| p.map(|v| v * factor)),
        }
    }
}

/// Arc-length derivative data at one evaluation point.
struct PointKinematics {
    /// 1x4 block weights of N' (arc-length), tangent factor included.
    wp: [f64; 4],
    /// block weights of N''.
    wpp: [f64; 4],
    rp: Vec3,
    rpp: Vec3,
    s: f64,
}

fn kinematics(dofs: &ElementDofVector, xi: f64) -> Result<PointKinematics> {
    let j = dofs.jacobian();
    let mut wp = shape_row(xi, 1, dofs.l0)?;
    let mut wpp = shape_row(xi, 2, dofs.l0)?;
    for v in wp.iter_mut() {
        *v /= j;
    }
    let jj = j * j;
    for v in wpp.iter_mut() {
        *v /= jj;
    }
    let rp = crate::geometry::apply_row(&wp, &dofs.dofs);
    let rpp = crate::geometry::apply_row(&wpp, &dofs.dofs);
    let s = rp.norm();
    if s < 1e-12 {
        return Err(Error::DegenerateElement(format!(
            "vanishing tangent norm at Gauss point xi = {xi}"
        )));
    }
    Ok(PointKinematics { wp, wpp, rp, rpp, s })
}

fn shape_mat(w: &[f64; 4]) -> ShapeMat {
    let mut n = ShapeMat::zeros();
    for (b, &wb) in w.iter().enumerate() {
        for k in 0..3 {
            n[(k, 3 * b + k)] = wb;
        }
    }
    n
}

fn add_row_t(out: &mut ElemVector, w: &[f64; 4], v: &Vec3, scale: f64) {
    for (b, &wb) in w.iter().enumerate() {
        let mut blk = out.fixed_rows_mut::<3>(3 * b);
        blk += (scale * wb) * v;
    }
}

/// Axial force direction term t1 = r'(|r'| - 1)/|r'|.
fn t1(k: &PointKinematics) -> Vec3 {
    k.rp * ((k.s - 1.0) / k.s)
}

/// Bending terms conjugate to r' and r''.
fn t2_t3(k: &PointKinematics) -> (Vec3, Vec3) {
    let s2 = k.s * k.s;
    let s4 = s2 * s2;
    let s6 = s4 * s2;
    let c = k.rp.dot(&k.rpp);
    let bb = k.rpp.dot(&k.rpp);
    let t2 = k.rp * (2.0 * c * c / s6) - (k.rpp * c + k.rp * bb) / s4;
    let t3 = k.rpp / s2 - k.rp * (c / s4);
    (t2, t3)
}

/// Internal force residual: quadrature of N'^T (EA t1 + EI t2) + N''^T EI t3.
pub fn internal_residual(
    dofs: &ElementDofVector,
    section: &BeamSection,
    n_gauss: usize,
) -> Result<ElemVector> {
    let j = dofs.jacobian();
    let mut res = ElemVector::zeros();
    for &(xi, w) in gauss_legendre(n_gauss) {
        let k = kinematics(dofs, xi)?;
        let (t2, t3) = t2_t3(&k);
        let fa = section.ea() * t1(&k) + section.ei() * t2;
        add_row_t(&mut res, &k.wp, &fa, w * j);
        add_row_t(&mut res, &k.wpp, &(section.ei() * t3), w * j);
    }
    Ok(res)
}

/// 3x3 bracket matrices of the analytic linearizations d t_i = B_p N' + B_pp N''.
struct Brackets {
    t1_p: Mat3,
    t2_p: Mat3,
    t2_pp: Mat3,
    t3_p: Mat3,
    t3_pp: Mat3,
}

fn brackets(k: &PointKinematics) -> Brackets {
    let s = k.s;
    let s2 = s * s;
    let s3 = s2 * s;
    let s4 = s2 * s2;
    let s6 = s4 * s2;
    let s8 = s4 * s4;
    let c = k.rp.dot(&k.rpp);
    let bb = k.rpp.dot(&k.rpp);
    let id = Mat3::identity();
    let aa = k.rp * k.rp.transpose();
    let ab = k.rp * k.rpp.transpose();
    let ba = k.rpp * k.rp.transpose();
    let bbm = k.rpp * k.rpp.transpose();

    let t1_p = id * ((s - 1.0) / s) + aa / s3;
    let t2_p = id * (2.0 * c * c / s6 - bb / s4)
        + aa * (4.0 * bb / s6 - 12.0 * c * c / s8)
        + (ab + ba) * (4.0 * c / s6)
        - bbm / s4;
    let t2_pp = id * (-c / s4) + aa * (4.0 * c / s6) - ab * (2.0 / s4) - ba / s4;
    let t3_p = id * (-c / s4) + aa * (4.0 * c / s6) - ba * (2.0 / s4) - ab / s4;
    let t3_pp = id / s2 - aa / s4;
    Brackets { t1_p, t2_p, t2_pp, t3_p, t3_pp }
}

/// Analytic tangent of `internal_residual`.
pub fn internal_stiffness(
    dofs: &ElementDofVector,
    section: &BeamSection,
    n_gauss: usize,
) -> Result<ElemMatrix> {
    let j = dofs.jacobian();
    let mut kmat = ElemMatrix::zeros();
    for &(xi, w) in gauss_legendre(n_gauss) {
        let k = kinematics(dofs, xi)?;
        let b = brackets(&k);
        let np = shape_mat(&k.wp);
        let npp = shape_mat(&k.wpp);
        let da = (section.ea() * b.t1_p + section.ei() * b.t2_p) * np
            + section.ei() * b.t2_pp * npp;
        let db = section.ei() * (b.t3_p * np + b.t3_pp * npp);
        kmat += (w * j) * (np.transpose() * da + npp.transpose() * db);
    }
    Ok(kmat)
}

/// Mass matrix of the quadratic strain-node coupling for the MCS variant:
/// Mtilde_ij = integral of L_i L_j over [-1, 1] for quadratic Lagrange
/// polynomials at xi in {-1, 0, 1}.
const MCS_COUPLING: [[f64; 3]; 3] = [
    [4.0 / 15.0, 2.0 / 15.0, -1.0 / 15.0],
    [2.0 / 15.0, 16.0 / 15.0, 2.0 / 15.0],
    [-1.0 / 15.0, 2.0 / 15.0, 4.0 / 15.0],
];

const MCS_NODES: [f64; 3] = [-1.0, 0.0, 1.0];

/// Internal residual and stiffness with the axial term replaced by the
/// interpolated-strain (MCS) form; bending terms identical to the standard
/// element.
pub fn mcs_internal_residual_stiffness(
    dofs: &ElementDofVector,
    section: &BeamSection,
    n_gauss: usize,
) -> Result<(ElemVector, ElemMatrix)> {
    let j = dofs.jacobian();
    let mut res = ElemVector::zeros();
    let mut kmat = ElemMatrix::zeros();

    // Bending part: the EI terms of the standard element.
    for &(xi, w) in gauss_legendre(n_gauss) {
        let k = kinematics(dofs, xi)?;
        let (t2, t3) = t2_t3(&k);
        add_row_t(&mut res, &k.wp, &(section.ei() * t2), w * j);
        add_row_t(&mut res, &k.wpp, &(section.ei() * t3), w * j);
        let b = brackets(&k);
        let np = shape_mat(&k.wp);
        let npp = shape_mat(&k.wpp);
        let da = section.ei() * (b.t2_p * np + b.t2_pp * npp);
        let db = section.ei() * (b.t3_p * np + b.t3_pp * npp);
        kmat += (w * j) * (np.transpose() * da + npp.transpose() * db);
    }

    // Axial part: strain interpolated from the three strain nodes.
    let mut eps = [0.0; 3];
    let mut deps = [ElemVector::zeros(); 3];
    let mut d2eps = [ElemMatrix::zeros(); 3];
    for (i, &xi) in MCS_NODES.iter().enumerate() {
        let k = kinematics(dofs, xi)?;
        eps[i] = k.s - 1.0;
        let np = shape_mat(&k.wp);
        deps[i] = np.transpose() * (k.rp / k.s);
        let rbar = k.rp / k.s;
        let proj = (Mat3::identity() - rbar * rbar.transpose()) / k.s;
        d2eps[i] = np.transpose() * proj * np;
    }
    let ea = section.ea();
    for i in 0..3 {
        for jn in 0..3 {
            let m = MCS_COUPLING[i][jn] * j;
            res += (ea * m * eps[jn]) * deps[i];
            kmat += (ea * m) * (d2eps[i] * eps[jn] + deps[i] * deps[jn].transpose());
        }
    }
    Ok((res, kmat))
}

/// Constant consistent mass matrix M = integral of N^T rho A N over the
/// reference length.
pub fn mass_matrix(dofs0: &ElementDofVector, section: &BeamSection) -> ElemMatrix {
    let j = dofs0.jacobian();
    let rho_a = section.density * section.area;
    let mut m = ElemMatrix::zeros();
    // N^T N has polynomial degree 6; a 4-point rule is exact.
    for &(xi, w) in gauss_legendre(4) {
        let n = shape_mat(&shape_row(xi, 0, dofs0.l0).expect("gauss point in domain"));
        m += (w * j * rho_a) * (n.transpose() * n);
    }
    m
}

pub fn kinetic_residual(mass: &ElemMatrix, accel: &ElemVector) -> ElemVector {
    mass * accel
}

fn check_moment_perpendicular(m: &Vec3, rp: &Vec3) -> Result<()> {
    let dot = m.dot(rp).abs();
    if dot > 1e-10 * m.norm() * rp.norm().max(1.0) {
        return Err(Error::MomentNotPerpendicular { dot });
    }
    Ok(())
}

/// External load residual and its stiffness. The residual carries the sign
/// with which it is added directly into the global force balance, i.e. a
/// positive distributed force in +x produces a residual pulling the balance
/// toward -x.
pub fn external_residual_stiffness(
    dofs: &ElementDofVector,
    load: &ElementLoad,
    n_gauss: usize,
) -> Result<(ElemVector, ElemMatrix)> {
    let mut res = ElemVector::zeros();
    let mut kmat = ElemMatrix::zeros();
    if load.is_zero() {
        return Ok((res, kmat));
    }
    let j = dofs.jacobian();

    for &(xi, w) in gauss_legendre(n_gauss) {
        if let Some(f) = &load.force {
            let w0 = shape_row(xi, 0, dofs.l0)?;
            add_row_t(&mut res, &w0, &f.value(xi), -w * j);
        }
        if let Some(mo) = &load.moment {
            let m = mo.value(xi);
            let k = kinematics(dofs, xi)?;
            check_moment_perpendicular(&m, &k.rp)?;
            let s2 = k.s * k.s;
            let t4 = k.rp / s2;
            add_row_t(&mut res, &k.wp, &m.cross(&t4), -w * j);
            let np = shape_mat(&k.wp);
            let dt4 = (Mat3::identity() / s2
                - (k.rp * k.rp.transpose()) * (2.0 / (s2 * s2)))
                * np;
            kmat -= (w * j) * (np.transpose() * skew(&m) * dt4);
        }
    }

    for (node, &xi) in [-1.0f64, 1.0].iter().enumerate().map(|(i, x)| (i, x)) {
        if let Some(f) = &load.point_force[node] {
            let w0 = shape_row(xi, 0, dofs.l0)?;
            add_row_t(&mut res, &w0, f, -1.0);
        }
        if let Some(m) = &load.point_moment[node] {
            let k = kinematics(dofs, xi)?;
            check_moment_perpendicular(m, &k.rp)?;
            let s2 = k.s * k.s;
            let t4 = k.rp / s2;
            add_row_t(&mut res, &k.wp, &m.cross(&t4), -1.0);
            let np = shape_mat(&k.wp);
            let dt4 = (Mat3::identity() / s2
                - (k.rp * k.rp.transpose()) * (2.0 / (s2 * s2)))
                * np;
            kmat -= np.transpose() * skew(m) * dt4;
        }
    }
    Ok((res, kmat))
}

fn skew(v: &Vec3) -> Mat3 {
    Mat3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Discrete internal energy, evaluated with the same quadrature (and, for
/// MCS, the same strain interpolation) as the residual so that the residual
/// is its exact gradient. The mechanical curvature here is |r' x r''|/|r'|^2,
/// which coincides with the geometric curvature in unstretched states.
pub fn internal_energy(
    dofs: &ElementDofVector,
    section: &BeamSection,
    n_gauss: usize,
    mcs: bool,
) -> Result<f64> {
    let j = dofs.jacobian();
    let mut e = 0.0;
    for &(xi, w) in gauss_legendre(n_gauss) {
        let k = kinematics(dofs, xi)?;
        let s2 = k.s * k.s;
        let kappa2 = k.rp.cross(&k.rpp).norm_squared() / (s2 * s2);
        e += 0.5 * section.ei() * kappa2 * w * j;
        if !mcs {
            let eps = k.s - 1.0;
            e += 0.5 * section.ea() * eps * eps * w * j;
        }
    }
    if mcs {
        let mut eps = [0.0; 3];
        for (i, &xi) in MCS_NODES.iter().enumerate() {
            eps[i] = kinematics(dofs, xi)?.s - 1.0;
        }
        for i in 0..3 {
            for jn in 0..3 {
                e += 0.5 * section.ea() * MCS_COUPLING[i][jn] * j * eps[i] * eps[jn];
            }
        }
    }
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::NodalDof;
    use approx::assert_relative_eq;
    use nalgebra::Rotation3;

    const NG: usize = 4;

    fn section() -> BeamSection {
        BeamSection::circular(0.01, 1e7, 1.0).unwrap()
    }

    fn straight(l0: f64) -> ElementDofVector {
        let n1 = NodalDof::new(Vec3::zeros(), Vec3::x()).unwrap();
        let n2 = NodalDof::new(Vec3::new(l0, 0.0, 0.0), Vec3::x()).unwrap();
        ElementDofVector::from_nodes(&n1, &n2, l0, 0.0).unwrap()
    }

    fn perturbed(l0: f64) -> ElementDofVector {
        // Mild random-looking deformation on top of a straight element.
        let mut e = straight(l0);
        let d = [
            0.013, -0.021, 0.008, 0.05, 0.11, -0.07, -0.017, 0.026, 0.031, -0.06, 0.09, 0.04,
        ];
        for (i, v) in d.iter().enumerate() {
            e.dofs[i] += 0.3 * v;
        }
        e
    }

    fn fd_stiffness<F>(e: &ElementDofVector, f: F, h: f64) -> ElemMatrix
    where
        F: Fn(&ElementDofVector) -> ElemVector,
    {
        let mut k = ElemMatrix::zeros();
        for col in 0..12 {
            let mut ep = *e;
            let mut em = *e;
            ep.dofs[col] += h;
            em.dofs[col] -= h;
            let d = (f(&ep) - f(&em)) / (2.0 * h);
            k.set_column(col, &d);
        }
        k
    }

    #[test]
    fn undeformed_zero_residual() {
        let e = straight(1.7);
        let r = internal_residual(&e, &section(), NG).unwrap();
        assert!(r.norm() < 1e-12 * section().ea());
    }

    #[test]
    fn rotated_undeformed_zero_residual() {
        let q = Rotation3::from_euler_angles(0.3, -1.1, 0.7);
        let l0 = 1.7;
        let n1 = NodalDof::new(q * Vec3::zeros(), q * Vec3::x()).unwrap();
        let n2 = NodalDof::new(q * Vec3::new(l0, 0.0, 0.0), q * Vec3::x()).unwrap();
        let e = ElementDofVector::from_nodes(&n1, &n2, l0, 0.0).unwrap();
        let r = internal_residual(&e, &section(), NG).unwrap();
        assert!(r.norm() < 1e-9);
    }

    #[test]
    fn uniform_stretch_axial_force() {
        let l0 = 2.0;
        let lambda = 1.03;
        let n1 = NodalDof::new(Vec3::zeros(), lambda * Vec3::x()).unwrap();
        let n2 = NodalDof::new(Vec3::new(lambda * l0, 0.0, 0.0), lambda * Vec3::x()).unwrap();
        let e = ElementDofVector::from_nodes(&n1, &n2, l0, 0.0).unwrap();
        let r = internal_residual(&e, &section(), NG).unwrap();
        let expected = section().ea() * (lambda - 1.0);
        assert_relative_eq!(r[0], -expected, max_relative = 1e-10);
        assert_relative_eq!(r[6], expected, max_relative = 1e-10);
        // Tangent blocks carry no net axial force for uniform stretch.
        assert!(r.fixed_rows::<3>(3).norm() < 1e-10 * expected);
        assert!(r.fixed_rows::<3>(9).norm() < 1e-10 * expected);
    }

    #[test]
    fn stiffness_matches_fd() {
        let e = perturbed(1.3);
        let sec = section();
        let k = internal_stiffness(&e, &sec, NG).unwrap();
        let fd = fd_stiffness(&e, |d| internal_residual(d, &sec, NG).unwrap(), 1e-7);
        let rel = (k - fd).norm() / fd.norm();
        assert!(rel < 1e-6, "relative FD error {rel:.3e}");
    }

    #[test]
    fn stiffness_symmetric() {
        let e = perturbed(1.3);
        let k = internal_stiffness(&e, &section(), NG).unwrap();
        let asym = (k - k.transpose()).norm() / k.norm();
        assert!(asym < 1e-10, "asymmetry {asym:.3e}");
    }

    #[test]
    fn undeformed_stiffness_semidefinite_with_rigid_modes() {
        let e = straight(1.0);
        let k = internal_stiffness(&e, &section(), NG).unwrap();
        let sym = 0.5 * (k + k.transpose());
        let eig = sym.symmetric_eigenvalues();
        let mut vals: Vec<f64> = eig.iter().copied().collect();
        vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let scale = vals.last().unwrap().abs();
        // No negative eigenvalues beyond roundoff.
        assert!(vals[0] > -1e-10 * scale, "min eigenvalue {}", vals[0]);
        // A straight torsion-free element has 5 rigid modes: 3 translations
        // and 2 rotations (rotation about its own axis is not represented).
        let near_zero = vals.iter().filter(|v| v.abs() < 1e-8 * scale).count();
        assert!(near_zero >= 5, "only {near_zero} near-zero modes");
        // The rigid test vectors lie in the (numerical) nullspace.
        for dir in [Vec3::x(), Vec3::y(), Vec3::z()] {
            let mut u = ElemVector::zeros();
            u.fixed_rows_mut::<3>(0).copy_from(&dir);
            u.fixed_rows_mut::<3>(6).copy_from(&dir);
            assert!((k * u).norm() < 1e-8 * scale);
        }
        for omega in [Vec3::y(), Vec3::z()] {
            let mut u = ElemVector::zeros();
            for b in 0..4 {
                let v = Vec3::from(e.dofs.fixed_rows::<3>(3 * b));
                u.fixed_rows_mut::<3>(3 * b).copy_from(&omega.cross(&v));
            }
            assert!((k * u).norm() < 1e-8 * scale * u.norm().max(1.0));
        }
    }

    #[test]
    fn rigid_test_vector_contractions() {
        let e = perturbed(1.3);
        let r = internal_residual(&e, &section(), NG).unwrap();
        let scale = r.norm();
        // Translation: positions move, tangents fixed.
        for dir in [Vec3::x(), Vec3::y(), Vec3::z()] {
            let mut u = ElemVector::zeros();
            u.fixed_rows_mut::<3>(0).copy_from(&dir);
            u.fixed_rows_mut::<3>(6).copy_from(&dir);
            assert!(u.dot(&r).abs() < 1e-12 * scale.max(1.0));
        }
        // Rotation: all blocks rotate with omega.
        for omega in [Vec3::x(), Vec3::y(), Vec3::z()] {
            let mut u = ElemVector::zeros();
            for b in 0..4 {
                let v = Vec3::from(e.dofs.fixed_rows::<3>(3 * b));
                u.fixed_rows_mut::<3>(3 * b).copy_from(&omega.cross(&v));
            }
            assert!(u.dot(&r).abs() < 1e-11 * scale.max(1.0));
        }
    }

    #[test]
    fn energy_conjugacy() {
        let e = perturbed(1.1);
        let sec = section();
        for mcs in [false, true] {
            let r = if mcs {
                mcs_internal_residual_stiffness(&e, &sec, NG).unwrap().0
            } else {
                internal_residual(&e, &sec, NG).unwrap()
            };
            let h = 1e-7;
            let mut grad = ElemVector::zeros();
            for i in 0..12 {
                let mut ep = e;
                let mut em = e;
                ep.dofs[i] += h;
                em.dofs[i] -= h;
                grad[i] = (internal_energy(&ep, &sec, NG, mcs).unwrap()
                    - internal_energy(&em, &sec, NG, mcs).unwrap())
                    / (2.0 * h);
            }
            let rel = (grad - r).norm() / r.norm();
            assert!(rel < 1e-6, "mcs={mcs}: energy gradient mismatch {rel:.3e}");
        }
    }

    #[test]
    fn mcs_uniform_stretch_matches_standard() {
        let l0 = 2.0;
        let lambda = 1.02;
        let n1 = NodalDof::new(Vec3::zeros(), lambda * Vec3::x()).unwrap();
        let n2 = NodalDof::new(Vec3::new(lambda * l0, 0.0, 0.0), lambda * Vec3::x()).unwrap();
        let e = ElementDofVector::from_nodes(&n1, &n2, l0, 0.0).unwrap();
        let sec = section();
        let r_std = internal_residual(&e, &sec, NG).unwrap();
        let (r_mcs, _) = mcs_internal_residual_stiffness(&e, &sec, NG).unwrap();
        assert!((r_std - r_mcs).norm() < 1e-9 * r_std.norm().max(1.0));
    }

    #[test]
    fn mcs_stiffness_matches_fd() {
        let e = perturbed(1.3);
        let sec = section();
        let (_, k) = mcs_internal_residual_stiffness(&e, &sec, NG).unwrap();
        let fd = fd_stiffness(
            &e,
            |d| mcs_internal_residual_stiffness(d, &sec, NG).unwrap().0,
            1e-7,
        );
        let rel = (k - fd).norm() / fd.norm();
        assert!(rel < 1e-6, "relative FD error {rel:.3e}");
    }

    #[test]
    fn mass_total_and_spd() {
        let l0 = 1.4;
        let e = straight(l0);
        let sec = section();
        let m = mass_matrix(&e, &sec);
        let total = sec.density * sec.area * l0;
        for dir in [Vec3::x(), Vec3::y(), Vec3::z()] {
            let mut u = ElemVector::zeros();
            u.fixed_rows_mut::<3>(0).copy_from(&dir);
            u.fixed_rows_mut::<3>(6).copy_from(&dir);
            assert_relative_eq!(u.dot(&(m * u)), total, max_relative = 1e-12);
        }
        let eig = m.symmetric_eigenvalues();
        assert!(eig.iter().all(|&v| v > 0.0));
        assert!((m - m.transpose()).norm() < 1e-14 * m.norm());
        assert!(kinetic_residual(&m, &ElemVector::zeros()).norm() == 0.0);
    }

    #[test]
    fn external_constant_force() {
        let l0 = 1.6;
        let e = straight(l0);
        let f = Vec3::new(0.0, 2.5, 0.0);
        let load = ElementLoad {
            force: Some(LoadField::Constant(f)),
            ..Default::default()
        };
        let (r, k) = external_residual_stiffness(&e, &load, NG).unwrap();
        // Rigid-translation contraction gives minus (force magnitude times length).
        let mut u = ElemVector::zeros();
        u.fixed_rows_mut::<3>(0).copy_from(&Vec3::y());
        u.fixed_rows_mut::<3>(6).copy_from(&Vec3::y());
        assert_relative_eq!(u.dot(&r), -f.norm() * l0, max_relative = 1e-12);
        // Force-only loads have zero stiffness.
        assert!(k.norm() == 0.0);
    }

    #[test]
    fn external_zero_load() {
        let e = straight(1.0);
        let (r, k) = external_residual_stiffness(&e, &ElementLoad::default(), NG).unwrap();
        assert!(r.norm() == 0.0 && k.norm() == 0.0);
    }

    #[test]
    fn external_moment_stiffness_matches_fd() {
        // A constant moment cannot stay perpendicular to a curved tangent,
        // so test with a straight element and a transverse constant moment.
        let es = straight(1.2);
        let load = ElementLoad {
            moment: Some(LoadField::Constant(Vec3::new(0.0, 0.3, 0.4))),
            ..Default::default()
        };
        let (_, k) = external_residual_stiffness(&es, &load, NG).unwrap();
        // FD perturbations break perpendicularity, so difference the
        // unchecked residual evaluation.
        let h = 1e-9;
        let mut fd = ElemMatrix::zeros();
        for col in 0..12 {
            let mut ep = es;
            let mut em = es;
            ep.dofs[col] += h;
            em.dofs[col] -= h;
            let rp = external_residual_raw(&ep, &load);
            let rm = external_residual_raw(&em, &load);
            fd.set_column(col, &((rp - rm) / (2.0 * h)));
        }
        let rel = (k - fd).norm() / fd.norm().max(1e-30);
        assert!(rel < 1e-5, "relative FD error {rel:.3e}");
    }

    // Residual evaluation without the perpendicularity check, for FD oracles.
    fn external_residual_raw(dofs: &ElementDofVector, load: &ElementLoad) -> ElemVector {
        let j = dofs.jacobian();
        let mut res = ElemVector::zeros();
        for &(xi, w) in gauss_legendre(NG) {
            if let Some(f) = &load.force {
                let w0 = shape_row(xi, 0, dofs.l0).unwrap();
                add_row_t(&mut res, &w0, &f.value(xi), -w * j);
            }
            if let Some(mo) = &load.moment {
                let m = mo.value(xi);
                let k = kinematics(dofs, xi).unwrap();
                let t4 = k.rp / (k.s * k.s);
                add_row_t(&mut res, &k.wp, &m.cross(&t4), -w * j);
            }
        }
        res
    }

    #[test]
    fn moment_perpendicularity_enforced() {
        let e = straight(1.0);
        let load = ElementLoad {
            moment: Some(LoadField::Constant(Vec3::new(1.0, 0.0, 0.0))),
            ..Default::default()
        };
        assert!(matches!(
            external_residual_stiffness(&e, &load, NG),
            Err(Error::MomentNotPerpendicular { .. })
        ));
    }
}
