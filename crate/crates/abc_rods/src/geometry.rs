//! Hermite centerline of a two-noded, initially straight beam element.
//!
//! Dof layout of an element vector is fixed as (d1, t1, d2, t2): nodal
//! position 1, nodal tangent 1, nodal position 2, nodal tangent 2. All
//! residual and stiffness indexing in the crate relies on this order.
//! The element Jacobian is constant, J_ele = l0/2, so arc-length derivatives
//! are parameter derivatives divided by J_ele.

use crate::error::{Error, Result};
use crate::{ElemVector, Vec3};
use nalgebra::SMatrix;

/// Position and centerline tangent at a node. The tangent is the derivative
/// of the centerline with respect to arc-length, so it has unit norm in any
/// unstretched configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodalDof {
    pub position: Vec3,
    pub tangent: Vec3,
}

impl NodalDof {
    pub fn new(position: Vec3, tangent: Vec3) -> Result<Self> {
        if tangent.norm() <= 0.0 {
            return Err(Error::DegenerateElement(
                "zero nodal tangent".to_string(),
            ));
        }
        Ok(Self { position, tangent })
    }
}

/// The 12 element dofs together with the reference length l0 and the
/// arc-length offset s0 of the first node in its fiber.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElementDofVector {
    pub dofs: ElemVector,
    pub l0: f64,
    pub s0: f64,
}

impl ElementDofVector {
    pub fn new(dofs: ElemVector, l0: f64, s0: f64) -> Result<Self> {
        if !(l0 > 0.0) {
            return Err(Error::DegenerateElement(format!(
                "reference length l0 = {l0} must be positive"
            )));
        }
        Ok(Self { dofs, l0, s0 })
    }

    pub fn from_nodes(n1: &NodalDof, n2: &NodalDof, l0: f64, s0: f64) -> Result<Self> {
        let mut dofs = ElemVector::zeros();
        dofs.fixed_rows_mut::<3>(0).copy_from(&n1.position);
        dofs.fixed_rows_mut::<3>(3).copy_from(&n1.tangent);
        dofs.fixed_rows_mut::<3>(6).copy_from(&n2.position);
        dofs.fixed_rows_mut::<3>(9).copy_from(&n2.tangent);
        Self::new(dofs, l0, s0)
    }

    pub fn position1(&self) -> Vec3 {
        self.dofs.fixed_rows::<3>(0).into()
    }
    pub fn tangent1(&self) -> Vec3 {
        self.dofs.fixed_rows::<3>(3).into()
    }
    pub fn position2(&self) -> Vec3 {
        self.dofs.fixed_rows::<3>(6).into()
    }
    pub fn tangent2(&self) -> Vec3 {
        self.dofs.fixed_rows::<3>(9).into()
    }

    /// Constant element Jacobian l0/2.
    pub fn jacobian(&self) -> f64 {
        0.5 * self.l0
    }
}

/// Circular cross section and material data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeamSection {
    pub radius: f64,
    pub youngs_modulus: f64,
    pub area: f64,
    pub moment_of_inertia: f64,
    pub density: f64,
}

impl BeamSection {
    pub fn new(
        radius: f64,
        youngs_modulus: f64,
        area: f64,
        moment_of_inertia: f64,
        density: f64,
    ) -> Result<Self> {
        for (name, v) in [
            ("radius", radius),
            ("youngs_modulus", youngs_modulus),
            ("area", area),
            ("moment_of_inertia", moment_of_inertia),
            ("density", density),
        ] {
            if !(v > 0.0) {
                return Err(Error::InvalidSection(format!("{name} = {v} must be positive")));
            }
        }
        Ok(Self {
            radius,
            youngs_modulus,
            area,
            moment_of_inertia,
            density,
        })
    }

    /// Circular section with full area pi R^2 and moment pi R^4 / 4.
    pub fn circular(radius: f64, youngs_modulus: f64, density: f64) -> Result<Self> {
        let area = std::f64::consts::PI * radius * radius;
        let moment = 0.25 * std::f64::consts::PI * radius.powi(4);
        Self::new(radius, youngs_modulus, area, moment, density)
    }

    pub fn ea(&self) -> f64 {
        self.youngs_modulus * self.area
    }
    pub fn ei(&self) -> f64 {
        self.youngs_modulus * self.moment_of_inertia
    }
}

fn check_domain(xi: f64) -> Result<()> {
    if !(-1.0..=1.0).contains(&xi) {
        return Err(Error::OutOfDomain { value: xi });
    }
    Ok(())
}

/// Third-order Hermite shape functions (N1_d, N2_d, N1_t, N2_t) or their
/// first/second parameter derivatives. The tangent functions do NOT include
/// the l0/2 factor; see [`shape_row`].
pub fn shape_values(xi: f64, derivative_order: u8) -> Result<[f64; 4]> {
    check_domain(xi)?;
    Ok(match derivative_order {
        0 => [
            0.25 * (2.0 + xi) * (1.0 - xi) * (1.0 - xi),
            0.25 * (2.0 - xi) * (1.0 + xi) * (1.0 + xi),
            0.25 * (1.0 + xi) * (1.0 - xi) * (1.0 - xi),
            -0.25 * (1.0 - xi) * (1.0 + xi) * (1.0 + xi),
        ],
        1 => [
            -0.75 * (1.0 - xi * xi),
            0.75 * (1.0 - xi * xi),
            0.25 * (3.0 * xi * xi - 2.0 * xi - 1.0),
            0.25 * (3.0 * xi * xi + 2.0 * xi - 1.0),
        ],
        2 => [
            1.5 * xi,
            -1.5 * xi,
            0.5 * (3.0 * xi - 1.0),
            0.5 * (3.0 * xi + 1.0),
        ],
        _ => panic!("derivative order {derivative_order} not supported (max 2)"),
    })
}

/// Per-block interpolation weights (w1, w2, w3, w4) for the dof blocks
/// (d1, t1, d2, t2), including the l0/2 factor on the tangent blocks, so that
/// the interpolated value (or its xi-derivative) is sum_b w_b * dof_block_b.
pub fn shape_row(xi: f64, derivative_order: u8, l0: f64) -> Result<[f64; 4]> {
    let [nd1, nd2, nt1, nt2] = shape_values(xi, derivative_order)?;
    let h = 0.5 * l0;
    Ok([nd1, h * nt1, nd2, h * nt2])
}

/// Centerline value (order 0) or its first/second xi-derivative.
pub fn interpolate(dofs: &ElementDofVector, xi: f64, order: u8) -> Result<Vec3> {
    let w = shape_row(xi, order, dofs.l0)?;
    Ok(apply_row(&w, &dofs.dofs))
}

/// sum_b w_b * dof_block_b.
pub fn apply_row(w: &[f64; 4], dofs: &ElemVector) -> Vec3 {
    let mut out = Vec3::zeros();
    for (b, &wb) in w.iter().enumerate() {
        out += wb * Vec3::from(dofs.fixed_rows::<3>(3 * b));
    }
    out
}

/// The 3x12 interpolation matrix N (or its xi-derivative) with the l0/2
/// factors included, i.e. r (or r^| etc.) = N * dofs.
pub fn shape_matrix(xi: f64, derivative_order: u8, l0: f64) -> Result<SMatrix<f64, 3, 12>> {
    let w = shape_row(xi, derivative_order, l0)?;
    let mut n = SMatrix::<f64, 3, 12>::zeros();
    for (b, &wb) in w.iter().enumerate() {
        for k in 0..3 {
            n[(k, 3 * b + k)] = wb;
        }
    }
    Ok(n)
}

/// N^T v as a 12-vector without building the 3x12 matrix.
pub fn row_transpose_times(w: &[f64; 4], v: &Vec3) -> ElemVector {
    let mut out = ElemVector::zeros();
    for (b, &wb) in w.iter().enumerate() {
        out.fixed_rows_mut::<3>(3 * b).copy_from(&(wb * v));
    }
    out
}

/// Geometric curvature |r' x r''| / |r'|^3 with arc-length derivatives.
/// The element Jacobian cancels, so parameter derivatives can be used directly.
pub fn scaled_curvature(dofs: &ElementDofVector, xi: f64) -> Result<f64> {
    let rp = interpolate(dofs, xi, 1)?;
    let rpp = interpolate(dofs, xi, 2)?;
    let nrp = rp.norm();
    if nrp < 1e-12 {
        return Err(Error::DegenerateElement(format!(
            "vanishing centerline tangent at xi = {xi}"
        )));
    }
    Ok(rp.cross(&rpp).norm() / (nrp * nrp * nrp))
}
