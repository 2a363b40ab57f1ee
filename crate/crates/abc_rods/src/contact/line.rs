//! Gauss-point-to-segment line contact. The slave element is partitioned
//! into integration intervals; where a master element endpoint projects into
//! the slave domain the nearest interval bound is replaced by the projected
//! coordinate and carries its dof sensitivity, so the integration domain
//! follows the contacting overlap consistently.

use crate::closest_point::{
    cpp_sensitivities, master_endpoint_projection, unilateral_cpp, ClosestPointSolution,
    ProjectionParams, UnilateralOutcome,
};
use crate::contact::contact_point_ops;
use crate::error::{Error, Result};
use crate::geometry::ElementDofVector;
use crate::penalty::PenaltyLaw;
use crate::quadrature::gauss_legendre;
use crate::{ElemVector, PairMatrix, PairRow, PairVector};

/// One interval bound in the slave parameter domain.
#[derive(Debug, Clone)]
pub struct Bound {
    pub value: f64,
    /// Sensitivity d(bound)/d(pair dofs); None for fixed bounds, which
    /// contribute exactly zero chain terms.
    pub sensitivity: Option<PairRow>,
}

#[derive(Debug, Clone)]
pub struct IntegrationScheme {
    pub bounds: Vec<Bound>,
    pub n_gauss: usize,
}

impl IntegrationScheme {
    pub fn n_intervals(&self) -> usize {
        self.bounds.len() - 1
    }
}

/// Equidistant interval bounds over [-1, 1], with master-endpoint
/// projections replacing their nearest bound.
pub fn build_scheme(
    e1: &ElementDofVector,
    e2: &ElementDofVector,
    n_ii: usize,
    n_gr: usize,
    params: &ProjectionParams,
) -> Result<IntegrationScheme> {
    assert!(n_ii >= 1 && n_gr >= 1);
    let mut bounds: Vec<Bound> = (0..=n_ii)
        .map(|i| Bound {
            value: -1.0 + 2.0 * i as f64 / n_ii as f64,
            sensitivity: None,
        })
        .collect();

    for eta_ep in [-1.0, 1.0] {
        if let Some((xi_b, row)) = master_endpoint_projection(e1, e2, eta_ep, 0.0, params)? {
            let nearest = bounds
                .iter()
                .enumerate()
                .min_by(|(_, a), (_, b)| {
                    (a.value - xi_b)
                        .abs()
                        .partial_cmp(&(b.value - xi_b).abs())
                        .unwrap()
                })
                .map(|(i, _)| i)
                .unwrap();
            bounds[nearest] = Bound {
                value: xi_b,
                sensitivity: Some(row),
            };
        }
    }

    // Restore strict ordering if a projected bound crossed a neighbor:
    // sort and merge (near-)duplicates, preferring the projected bound.
    bounds.sort_by(|a, b| a.value.partial_cmp(&b.value).unwrap());
    let mut merged: Vec<Bound> = Vec::with_capacity(bounds.len());
    for b in bounds {
        match merged.last_mut() {
            Some(last) if (b.value - last.value).abs() < 1e-12 => {
                if b.sensitivity.is_some() {
                    *last = b;
                }
            }
            _ => merged.push(b),
        }
    }
    if merged.len() < 2 {
        return Err(Error::InvalidContactConfig(
            "integration scheme degenerated to a single bound".to_string(),
        ));
    }
    Ok(IntegrationScheme {
        bounds: merged,
        n_gauss: n_gr,
    })
}

/// J = J_ele * (interval width)/2 mapping Gauss coordinates to arc length.
pub fn total_jacobian(scheme: &IntegrationScheme, interval: usize, l0_slave: f64) -> f64 {
    let lo = scheme.bounds[interval].value;
    let hi = scheme.bounds[interval + 1].value;
    0.5 * l0_slave * 0.5 * (hi - lo)
}

/// One slave Gauss point with its unilateral projection and the data needed
/// for the segmentation chain terms.
pub struct LineGaussPoint {
    pub interval: usize,
    pub xi: f64,
    /// Gauss weight.
    pub w: f64,
    /// Total Jacobian of the interval.
    pub jac: f64,
    /// Interpolation factors of the interval bounds: xi = c_lo*lo + c_hi*hi.
    pub c_lo: f64,
    pub c_hi: f64,
    /// None when the master projection left its domain (point deactivated).
    pub solution: Option<ClosestPointSolution>,
}

impl LineGaussPoint {
    /// Total d xi_ij / dd from the bound sensitivities.
    pub fn dxi_row(&self, scheme: &IntegrationScheme) -> PairRow {
        let mut row = PairRow::zeros();
        if let Some(s) = &scheme.bounds[self.interval].sensitivity {
            row += self.c_lo * s;
        }
        if let Some(s) = &scheme.bounds[self.interval + 1].sensitivity {
            row += self.c_hi * s;
        }
        row
    }

    /// Total dJ/dd of the interval Jacobian.
    pub fn djac_row(&self, scheme: &IntegrationScheme, l0_slave: f64) -> PairRow {
        let j_ele = 0.5 * l0_slave;
        let mut row = PairRow::zeros();
        if let Some(s) = &scheme.bounds[self.interval].sensitivity {
            row += (-0.5 * j_ele) * s;
        }
        if let Some(s) = &scheme.bounds[self.interval + 1].sensitivity {
            row += (0.5 * j_ele) * s;
        }
        row
    }
}

/// Run the unilateral projections for every Gauss point of the scheme.
/// `warm` supplies per-point starting master coordinates from a previous
/// evaluation. Unconverged projections are escalated as errors.
pub fn project_gauss_points(
    e1: &ElementDofVector,
    e2: &ElementDofVector,
    scheme: &IntegrationScheme,
    params: &ProjectionParams,
    warm: Option<&[f64]>,
) -> Result<Vec<LineGaussPoint>> {
    let rule = gauss_legendre(scheme.n_gauss);
    let mut out = Vec::with_capacity(scheme.n_intervals() * scheme.n_gauss);
    let mut idx = 0;
    for i in 0..scheme.n_intervals() {
        let lo = scheme.bounds[i].value;
        let hi = scheme.bounds[i + 1].value;
        let jac = total_jacobian(scheme, i, e1.l0);
        for &(xb, w) in rule {
            let c_lo = 0.5 * (1.0 - xb);
            let c_hi = 0.5 * (1.0 + xb);
            let xi = c_lo * lo + c_hi * hi;
            let eta0 = warm.and_then(|v| v.get(idx).copied()).unwrap_or(0.0);
            let solution = match unilateral_cpp(e1, xi, e2, eta0, params)? {
                UnilateralOutcome::Converged(s) => Some(s),
                UnilateralOutcome::OutOfDomain { .. } => None,
                UnilateralOutcome::Unconverged { iterations, residual } => {
                    return Err(Error::ProjectionDiverged { iterations, residual })
                }
            };
            out.push(LineGaussPoint {
                interval: i,
                xi,
                w,
                jac,
                c_lo,
                c_hi,
                solution,
            });
            idx += 1;
        }
    }
    Ok(out)
}

/// Line contact residual: per-Gauss-point penalty forces weighted by the
/// quadrature weight, total Jacobian, and the supplied transition factors
/// (all 1.0 for pure line contact).
pub fn line_residual(
    e1: &ElementDofVector,
    e2: &ElementDofVector,
    gps: &[LineGaussPoint],
    law: &PenaltyLaw,
    k_weights: &[f64],
) -> Result<(ElemVector, ElemVector)> {
    let mut r = PairVector::zeros();
    for (gp, &kw) in gps.iter().zip(k_weights) {
        let Some(sol) = &gp.solution else { continue };
        if sol.gap >= law.support_gap() || kw == 0.0 {
            continue;
        }
        let ops = contact_point_ops(e1, e2, sol)?;
        r += (gp.w * gp.jac * kw) * ops.base_residual(law);
    }
    Ok((r.fixed_rows::<12>(0).into(), r.fixed_rows::<12>(12).into()))
}

/// Full consistent tangent of `line_residual`, including the chain terms of
/// boundary-projected interval bounds (slave coordinate, master projection,
/// and Jacobian derivatives).
pub fn line_stiffness(
    e1: &ElementDofVector,
    e2: &ElementDofVector,
    scheme: &IntegrationScheme,
    gps: &[LineGaussPoint],
    law: &PenaltyLaw,
    k_weights: &[f64],
) -> Result<PairMatrix> {
    let mut k = PairMatrix::zeros();
    for (gp, &kw) in gps.iter().zip(k_weights) {
        let Some(sol) = &gp.solution else { continue };
        if sol.gap >= law.support_gap() || kw == 0.0 {
            continue;
        }
        let ops = contact_point_ops(e1, e2, sol)?;
        let dxi = gp.dxi_row(scheme);
        let (_, deta_partial) = cpp_sensitivities(sol, e1, e2)?;
        let deta = if dxi.norm_squared() > 0.0 {
            let chain =
                crate::closest_point::unilateral_eta_xi_partial(e1, e2, sol.xi, sol.eta)?;
            deta_partial + chain * dxi
        } else {
            deta_partial
        };
        k += (gp.w * gp.jac * kw) * ops.base_stiffness(law, &dxi, &deta);
        // Jacobian chain for projected bounds.
        let djac = gp.djac_row(scheme, e1.l0);
        if djac.norm_squared() > 0.0 {
            let b = ops.base_residual(law);
            k += (gp.w * kw) * (b * djac);
        }
    }
    Ok(k)
}
