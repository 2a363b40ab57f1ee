//! All-angle combination of point and line contact: the C1 transition factor
//! over the contact angle, force-based and potential-based blends, the
//! angle-sensitivity row, and the companion parameter formulas (shifting
//! angle choice, Gauss density bound, penalty ratio adjustment).

use crate::closest_point::{
    cpp_sensitivities, resolve_point_projection, unilateral_eta_xi_partial, ClosestPointSolution,
    ProjectionKind, ProjectionParams,
};
use crate::contact::line::{build_scheme, project_gauss_points, IntegrationScheme, LineGaussPoint};
use crate::contact::contact_point_ops;
use crate::error::{Error, Result};
use crate::geometry::{shape_row, ElementDofVector};
use crate::penalty::PenaltyLaw;
use crate::{PairMatrix, PairRow, PairVector, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransitionVariant {
    ForceBased,
    PotentialBased,
}

/// Shifting angles and paired penalty parameters of the all-angle blend.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransitionConfig {
    /// Lower shifting angle in radians; below it contact is pure line.
    pub alpha1: f64,
    /// Upper shifting angle in radians; above it contact is pure point.
    pub alpha2: f64,
    pub variant: TransitionVariant,
    pub k_alpha1: f64,
    pub mu_max: f64,
}

impl TransitionConfig {
    pub fn from_degrees(
        alpha1_deg: f64,
        alpha2_deg: f64,
        variant: TransitionVariant,
    ) -> Result<Self> {
        if !(alpha1_deg > 0.0 && alpha1_deg < alpha2_deg && alpha2_deg <= 90.0) {
            return Err(Error::InvalidContactConfig(format!(
                "shifting angles must satisfy 0 < alpha1 < alpha2 <= 90, got ({alpha1_deg}, {alpha2_deg})"
            )));
        }
        Ok(Self {
            alpha1: alpha1_deg.to_radians(),
            alpha2: alpha2_deg.to_radians(),
            variant,
            k_alpha1: 1.2,
            mu_max: 0.0,
        })
    }

    pub fn z1(&self) -> f64 {
        self.alpha1.cos()
    }
    pub fn z2(&self) -> f64 {
        self.alpha2.cos()
    }
}

/// C1 cosine blend: 1 for alpha <= alpha1 (z >= z1), 0 for alpha >= alpha2.
pub fn transition_factor(z: f64, cfg: &TransitionConfig) -> f64 {
    let (z1, z2) = (cfg.z1(), cfg.z2());
    if z >= z1 {
        1.0
    } else if z <= z2 {
        0.0
    } else {
        0.5 * (1.0 - (std::f64::consts::PI * (z - z2) / (z1 - z2)).cos())
    }
}

/// dk/dz; zero outside the band, zero at both band edges.
pub fn transition_factor_dz(z: f64, cfg: &TransitionConfig) -> f64 {
    let (z1, z2) = (cfg.z1(), cfg.z2());
    if z >= z1 || z <= z2 {
        0.0
    } else {
        let t = std::f64::consts::PI * (z - z2) / (z1 - z2);
        0.5 * std::f64::consts::PI / (z1 - z2) * t.sin()
    }
}

/// Total sensitivity of z = |cos(angle between tangents)| with respect to
/// the pair dofs, given the total coordinate sensitivity rows.
pub fn delta_z_row(
    e1: &ElementDofVector,
    e2: &ElementDofVector,
    xi: f64,
    eta: f64,
    dxi: &PairRow,
    deta: &PairRow,
) -> Result<PairRow> {
    let kin = crate::closest_point::pair_kinematics(e1, xi, e2, eta)?;
    let n1 = kin.r1p.norm();
    let n2 = kin.r2p.norm();
    let u1 = kin.r1p / n1;
    let u2 = kin.r2p / n2;
    let dot = u1.dot(&u2);
    let s = if dot >= 0.0 { 1.0 } else { -1.0 };
    let v1 = (u2 - u1 * dot) / n1;
    let v2 = (u1 - u2 * dot) / n2;

    let mut row = PairRow::zeros();
    // v1^T N1^| on the slave half, v2^T N2^| on the master half.
    let w1p = shape_row(xi, 1, e1.l0)?;
    for (b, &wb) in w1p.iter().enumerate() {
        row.fixed_columns_mut::<3>(3 * b)
            .copy_from(&(wb * v1.transpose()));
    }
    let w2p = shape_row(eta, 1, e2.l0)?;
    for (b, &wb) in w2p.iter().enumerate() {
        let mut c = row.fixed_columns_mut::<3>(12 + 3 * b);
        c += wb * v2.transpose();
    }
    row += v1.dot(&kin.r1pp) * dxi + v2.dot(&kin.r2pp) * deta;
    Ok(s * row)
}

/// Sensitivity row for a converged point-candidate solution.
pub fn delta_z_for_solution(
    e1: &ElementDofVector,
    e2: &ElementDofVector,
    sol: &ClosestPointSolution,
) -> Result<PairRow> {
    let (dxi, deta) = cpp_sensitivities(sol, e1, e2)?;
    delta_z_row(e1, e2, sol.xi, sol.eta, &dxi, &deta)
}

/// alpha1 = k * arccos(1 - 2 mu_max), in degrees.
pub fn choose_alpha1(mu_max: f64, k_alpha1: f64) -> Result<f64> {
    if !(mu_max > 0.0 && mu_max < 0.5) {
        return Err(Error::InvalidContactConfig(format!(
            "mu_max = {mu_max} must lie in (0, 0.5)"
        )));
    }
    Ok(k_alpha1 * (1.0 - 2.0 * mu_max).acos().to_degrees())
}

/// Minimal evenly distributed Gauss point count resolving a line contact
/// with normalized minimal gap g_n_min (gap / radius, in (-2, 0]) at contact
/// angles up to alpha_max on a slave of slenderness rho.
pub fn min_gauss_points(
    g_n_min: f64,
    alpha_max_deg: f64,
    rho_slave: f64,
    k_gp: f64,
) -> Result<usize> {
    if g_n_min <= -2.0 {
        return Err(Error::InvalidContactConfig(format!(
            "g_n_min = {g_n_min} at or below the centerline crossing bound -2"
        )));
    }
    let t = 1.0 - (0.5 * g_n_min + 1.0).powi(2);
    let n = k_gp * t.powf(-0.5) * alpha_max_deg.to_radians().sin() / 4.0 * rho_slave;
    Ok(n.ceil().max(0.0) as usize)
}

/// Analytic penalty ratio eps_perp/eps_par = 4R/(3 sin alpha).
pub fn penalty_ratio_analytic(radius: f64, alpha_bar_deg: f64) -> Result<f64> {
    let s = alpha_bar_deg.to_radians().sin();
    if s <= 0.0 {
        return Err(Error::InvalidContactConfig(
            "penalty ratio undefined at zero crossing angle".to_string(),
        ));
    }
    Ok(4.0 * radius / (3.0 * s))
}

/// Numeric penalty ratio: normalized line potential of two straight beams
/// crossing at alpha with closest gap g_min, divided by the normalized point
/// potential at g_min. The gap profile along the slave is
/// g(u) = sqrt(d^2 + (u sin alpha)^2) - 2R with d = g_min + 2R.
pub fn penalty_ratio_numeric(
    law_par: &PenaltyLaw,
    g_min: f64,
    alpha_bar_deg: f64,
    radius: f64,
) -> Result<f64> {
    let s = alpha_bar_deg.to_radians().sin();
    if s <= 0.0 {
        return Err(Error::InvalidContactConfig(
            "penalty ratio undefined at zero crossing angle".to_string(),
        ));
    }
    if !(g_min > -2.0 * radius && g_min < law_par.support_gap()) {
        return Err(Error::InvalidContactConfig(format!(
            "g_min = {g_min} outside (-2R, support gap)"
        )));
    }
    let d = g_min + 2.0 * radius;
    let reach = 2.0 * radius + law_par.support_gap();
    // Half-width of the support of g(u) < g_bar.
    let u_max = ((reach * reach - d * d).max(0.0)).sqrt() / s;
    let n = 20_000;
    let h = u_max / n as f64;
    let mut line = 0.0;
    for i in 0..n {
        let u = (i as f64 + 0.5) * h;
        let g = (d * d + (u * s) * (u * s)).sqrt() - 2.0 * radius;
        line += law_par.normalized_potential(g) * h;
    }
    line *= 2.0; // symmetric in u
    let point = law_par.normalized_potential(g_min);
    Ok(line / point)
}

/// Which contact terms a pair evaluation assembles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Formulation {
    PointOnly,
    LineOnly,
    AllAngle,
}

#[derive(Debug, Clone)]
pub struct PairConfig {
    pub law_perp: PenaltyLaw,
    pub law_par: PenaltyLaw,
    pub transition: TransitionConfig,
    pub formulation: Formulation,
    pub n_ii: usize,
    pub n_gr: usize,
}

/// Warm-start data carried between evaluations of the same pair.
#[derive(Debug, Clone, Default)]
pub struct PairWarmStart {
    pub point: Option<(f64, f64)>,
    pub etas: Vec<f64>,
}

/// One contact force sample for export: position on the slave, force acting
/// on the slave, and the contribution kind.
#[derive(Debug, Clone, Copy)]
pub struct ContactForceSample {
    pub position: Vec3,
    pub force: Vec3,
    pub kind: ForceKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ForceKind {
    Point,
    LineGauss,
    Endpoint,
}

#[derive(Debug, Clone)]
pub struct PairEvaluation {
    pub residual: PairVector,
    pub stiffness: PairMatrix,
    /// Contact potential of the pair (exact for the potential-based blend).
    pub potential: f64,
    pub n_point: usize,
    pub n_line_gp: usize,
    pub n_endpoint: usize,
    /// Contact angle extrema over active contributions, radians.
    pub alpha_min: f64,
    pub alpha_max: f64,
    pub min_gap: f64,
    pub forces: Vec<ContactForceSample>,
    pub warm: PairWarmStart,
}

impl PairEvaluation {
    fn empty() -> Self {
        Self {
            residual: PairVector::zeros(),
            stiffness: PairMatrix::zeros(),
            potential: 0.0,
            n_point: 0,
            n_line_gp: 0,
            n_endpoint: 0,
            alpha_min: f64::INFINITY,
            alpha_max: f64::NEG_INFINITY,
            min_gap: f64::INFINITY,
            forces: Vec::new(),
            warm: PairWarmStart::default(),
        }
    }
}

struct LineState {
    scheme: IntegrationScheme,
    gps: Vec<LineGaussPoint>,
}

fn line_state(
    e1: &ElementDofVector,
    e2: &ElementDofVector,
    cfg: &PairConfig,
    params: &ProjectionParams,
    warm: Option<&PairWarmStart>,
) -> Result<LineState> {
    let scheme = build_scheme(e1, e2, cfg.n_ii, cfg.n_gr, params)?;
    let warm_etas = warm.and_then(|w| {
        (w.etas.len() == scheme.n_intervals() * scheme.n_gauss).then_some(w.etas.as_slice())
    });
    let gps = project_gauss_points(e1, e2, &scheme, params, warm_etas)?;
    Ok(LineState { scheme, gps })
}

fn point_solution(
    e1: &ElementDofVector,
    e2: &ElementDofVector,
    params: &ProjectionParams,
    warm: Option<&PairWarmStart>,
) -> Result<Option<ClosestPointSolution>> {
    let start = warm.and_then(|w| w.point).unwrap_or((0.0, 0.0));
    match resolve_point_projection(e1, e2, start, params) {
        Ok(s) => Ok(s),
        // Near-parallel curves have no unique bilateral minimum; they are
        // line-contact territory where the point weight vanishes anyway.
        Err(Error::ProjectionNotUnique { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Total (dxi, deta) sensitivity rows of a line Gauss point, including the
/// boundary-projection chain.
fn gp_sensitivities(
    e1: &ElementDofVector,
    e2: &ElementDofVector,
    scheme: &IntegrationScheme,
    gp: &LineGaussPoint,
    sol: &ClosestPointSolution,
) -> Result<(PairRow, PairRow)> {
    let dxi = gp.dxi_row(scheme);
    let (_, deta_partial) = cpp_sensitivities(sol, e1, e2)?;
    let deta = if dxi.norm_squared() > 0.0 {
        deta_partial + unilateral_eta_xi_partial(e1, e2, sol.xi, sol.eta)? * dxi
    } else {
        deta_partial
    };
    Ok((dxi, deta))
}

/// The moment/segmentation part of the potential-based residual: the terms
/// produced by the dof dependence of the transition factor, the integration
/// bounds and the interval Jacobians. Linearized by finite differences.
fn potential_moment_residual(
    e1: &ElementDofVector,
    e2: &ElementDofVector,
    cfg: &PairConfig,
    params: &ProjectionParams,
    warm: Option<&PairWarmStart>,
) -> Result<PairVector> {
    let mut r = PairVector::zeros();
    let ls = line_state(e1, e2, cfg, params, warm)?;
    if let Some(sol) = point_solution(e1, e2, params, warm)? {
        if sol.gap < cfg.law_perp.support_gap() {
            let kc = transition_factor(sol.z, &cfg.transition);
            let kcp = transition_factor_dz(sol.z, &cfg.transition);
            if kc * kcp != 0.0 {
                let dz = delta_z_for_solution(e1, e2, &sol)?;
                r += (-2.0 * kc * kcp * cfg.law_perp.potential(sol.gap)) * dz.transpose();
            }
        }
    }
    for gp in &ls.gps {
        let Some(sol) = &gp.solution else { continue };
        if sol.gap >= cfg.law_par.support_gap() {
            continue;
        }
        let k = transition_factor(sol.z, &cfg.transition);
        let kp = transition_factor_dz(sol.z, &cfg.transition);
        let pot = cfg.law_par.potential(sol.gap);
        let (dxi, deta) = gp_sensitivities(e1, e2, &ls.scheme, gp, sol)?;
        if k * kp != 0.0 {
            let dz = delta_z_row(e1, e2, sol.xi, sol.eta, &dxi, &deta)?;
            r += (2.0 * gp.w * gp.jac * k * kp * pot) * dz.transpose();
        }
        if dxi.norm_squared() > 0.0 || gp.djac_row(&ls.scheme, e1.l0).norm_squared() > 0.0 {
            let ops = contact_point_ops(e1, e2, sol)?;
            let g_xi = ops.gap_xi_partial();
            let f = cfg.law_par.force(sol.gap);
            r += (gp.w * gp.jac * k * k * (-f) * g_xi) * dxi.transpose();
            r += (gp.w * k * k * pot) * gp.djac_row(&ls.scheme, e1.l0).transpose();
        }
    }
    Ok(r)
}

/// Evaluate the combined contact contribution of one slave/master pair.
/// `enable_point` / `enable_line` reflect the broadphase classification;
/// disabled terms are skipped entirely.
pub fn evaluate_pair(
    e1: &ElementDofVector,
    e2: &ElementDofVector,
    cfg: &PairConfig,
    params: &ProjectionParams,
    warm: Option<&PairWarmStart>,
    enable_point: bool,
    enable_line: bool,
) -> Result<PairEvaluation> {
    let mut ev = PairEvaluation::empty();
    let potential_based = cfg.transition.variant == TransitionVariant::PotentialBased;

    let want_line = enable_line && cfg.formulation != Formulation::PointOnly;
    let want_point = enable_point && cfg.formulation != Formulation::LineOnly;

    let ls = if want_line {
        Some(line_state(e1, e2, cfg, params, warm)?)
    } else {
        None
    };
    let psol = if want_point {
        point_solution(e1, e2, params, warm)?
    } else {
        None
    };

    // Point term.
    if let Some(sol) = &psol {
        ev.warm.point = Some((sol.xi, sol.eta));
        let kc = if cfg.formulation == Formulation::PointOnly {
            0.0
        } else {
            transition_factor(sol.z, &cfg.transition)
        };
        let weight = if potential_based { 1.0 - kc * kc } else { 1.0 - kc };
        if sol.gap < cfg.law_perp.support_gap() && weight > 0.0 {
            let ops = contact_point_ops(e1, e2, sol)?;
            let b = ops.base_residual(&cfg.law_perp);
            ev.residual += weight * b;
            let (dxi, deta) = cpp_sensitivities(sol, e1, e2)?;
            ev.stiffness += weight * ops.base_stiffness(&cfg.law_perp, &dxi, &deta);
            // Transition-factor chain.
            let kcp = transition_factor_dz(sol.z, &cfg.transition);
            if kcp != 0.0 {
                let dz = delta_z_row(e1, e2, sol.xi, sol.eta, &dxi, &deta)?;
                let dw = if potential_based { -2.0 * kc * kcp } else { -kcp };
                ev.stiffness += b * (dw * dz);
            }
            ev.potential += weight * cfg.law_perp.potential(sol.gap);
            let f = cfg.law_perp.force(sol.gap);
            let pos = crate::geometry::interpolate(e1, sol.xi, 0)?;
            let (kind, is_endpoint) = match sol.kind {
                ProjectionKind::Bilateral => (ForceKind::Point, false),
                _ => (ForceKind::Endpoint, true),
            };
            ev.forces.push(ContactForceSample {
                position: pos,
                force: weight * f * sol.normal,
                kind,
            });
            if is_endpoint {
                ev.n_endpoint += 1;
            } else {
                ev.n_point += 1;
            }
            ev.alpha_min = ev.alpha_min.min(sol.alpha);
            ev.alpha_max = ev.alpha_max.max(sol.alpha);
        }
        ev.min_gap = ev.min_gap.min(sol.gap);
    }

    // Line term.
    if let Some(ls) = &ls {
        ev.warm.etas = ls
            .gps
            .iter()
            .map(|gp| gp.solution.as_ref().map_or(0.0, |s| s.eta))
            .collect();
        for gp in &ls.gps {
            let Some(sol) = &gp.solution else { continue };
            ev.min_gap = ev.min_gap.min(sol.gap);
            if sol.gap >= cfg.law_par.support_gap() {
                continue;
            }
            let k = if cfg.formulation == Formulation::LineOnly {
                1.0
            } else {
                transition_factor(sol.z, &cfg.transition)
            };
            let weight = if potential_based { k * k } else { k };
            if weight == 0.0 {
                continue;
            }
            let ops = contact_point_ops(e1, e2, sol)?;
            let b = ops.base_residual(&cfg.law_par);
            let scale = gp.w * gp.jac * weight;
            ev.residual += scale * b;
            let (dxi, deta) = gp_sensitivities(e1, e2, &ls.scheme, gp, sol)?;
            ev.stiffness += scale * ops.base_stiffness(&cfg.law_par, &dxi, &deta);
            // Jacobian chain of boundary-projected bounds.
            let djac = gp.djac_row(&ls.scheme, e1.l0);
            if djac.norm_squared() > 0.0 {
                ev.stiffness += (gp.w * weight) * (b * djac);
            }
            // Transition-factor chain.
            if cfg.formulation == Formulation::AllAngle {
                let kp = transition_factor_dz(sol.z, &cfg.transition);
                if kp != 0.0 {
                    let dz = delta_z_row(e1, e2, sol.xi, sol.eta, &dxi, &deta)?;
                    let dw = if potential_based { 2.0 * k * kp } else { kp };
                    ev.stiffness += (gp.w * gp.jac) * (b * (dw * dz));
                }
            }
            ev.potential += scale * cfg.law_par.potential(sol.gap);
            let f = cfg.law_par.force(sol.gap);
            let pos = crate::geometry::interpolate(e1, sol.xi, 0)?;
            ev.forces.push(ContactForceSample {
                position: pos,
                force: scale * f * sol.normal,
                kind: ForceKind::LineGauss,
            });
            ev.n_line_gp += 1;
            ev.alpha_min = ev.alpha_min.min(sol.alpha);
            ev.alpha_max = ev.alpha_max.max(sol.alpha);
        }
    }

    // Potential-based blend: the residual is the exact gradient of the
    // potential, which adds moment terms (transition factor) and the
    // segmentation terms (moving bounds, Jacobians). Their own linearization
    // uses central finite differences with full re-projection.
    if potential_based && cfg.formulation == Formulation::AllAngle && want_line {
        let r_m = potential_moment_residual(e1, e2, cfg, params, warm)?;
        ev.residual += r_m;
        let h = 1e-7;
        for c in 0..24 {
            let (mut ap, mut bp) = (*e1, *e2);
            let (mut am, mut bm) = (*e1, *e2);
            if c < 12 {
                ap.dofs[c] += h;
                am.dofs[c] -= h;
            } else {
                bp.dofs[c - 12] += h;
                bm.dofs[c - 12] -= h;
            }
            let rp = potential_moment_residual(&ap, &bp, cfg, params, warm)?;
            let rm = potential_moment_residual(&am, &bm, cfg, params, warm)?;
            ev.stiffness.set_column(c, &(ev.stiffness.column(c) + (rp - rm) / (2.0 * h)));
        }
    } else if potential_based && cfg.formulation == Formulation::LineOnly {
        // Pure line contact with moving bounds: add the segmentation terms of
        // the potential gradient so conservativity holds there too.
        if let Some(ls) = &ls {
            let has_projected = ls.scheme.bounds.iter().any(|b| b.sensitivity.is_some());
            if has_projected {
                let r_m = line_segmentation_residual(e1, e2, cfg, ls)?;
                ev.residual += r_m;
                let h = 1e-7;
                for c in 0..24 {
                    let (mut ap, mut bp) = (*e1, *e2);
                    let (mut am, mut bm) = (*e1, *e2);
                    if c < 12 {
                        ap.dofs[c] += h;
                        am.dofs[c] -= h;
                    } else {
                        bp.dofs[c - 12] += h;
                        bm.dofs[c - 12] -= h;
                    }
                    let lp = line_state(&ap, &bp, cfg, params, warm)?;
                    let lm = line_state(&am, &bm, cfg, params, warm)?;
                    let rp = line_segmentation_residual(&ap, &bp, cfg, &lp)?;
                    let rm = line_segmentation_residual(&am, &bm, cfg, &lm)?;
                    ev.stiffness
                        .set_column(c, &(ev.stiffness.column(c) + (rp - rm) / (2.0 * h)));
                }
            }
        }
    }

    Ok(ev)
}

/// Segmentation terms of the pure-line potential gradient (moving bounds and
/// Jacobians), with unit transition weight.
fn line_segmentation_residual(
    e1: &ElementDofVector,
    e2: &ElementDofVector,
    cfg: &PairConfig,
    ls: &LineState,
) -> Result<PairVector> {
    let mut r = PairVector::zeros();
    for gp in &ls.gps {
        let Some(sol) = &gp.solution else { continue };
        if sol.gap >= cfg.law_par.support_gap() {
            continue;
        }
        let dxi = gp.dxi_row(&ls.scheme);
        let djac = gp.djac_row(&ls.scheme, e1.l0);
        if dxi.norm_squared() == 0.0 && djac.norm_squared() == 0.0 {
            continue;
        }
        let ops = contact_point_ops(e1, e2, sol)?;
        let f = cfg.law_par.force(sol.gap);
        r += (gp.w * gp.jac * (-f) * ops.gap_xi_partial()) * dxi.transpose();
        r += (gp.w * cfg.law_par.potential(sol.gap)) * djac.transpose();
    }
    Ok(r)
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
        ElementDofVector::from_nodes(
            &NodalDof::new(p0, t).unwrap(),
            &NodalDof::new(p1, t).unwrap(),
            l0,
            0.0,
        )
        .unwrap()
    }

    /// Crossing at the given angle (degrees) with the given gap.
    fn crossing(angle_deg: f64, gap: f64) -> (ElementDofVector, ElementDofVector) {
        let e1 = straight(Vec3::new(-1.0, 0.0, 0.0), Vec3::new(1.0, 0.0, 0.0));
        let a = angle_deg.to_radians();
        let dir = Vec3::new(a.cos(), a.sin(), 0.0);
        let d = 2.0 * R + gap;
        let e2 = straight(
            Vec3::new(0.0, 0.0, d) - dir,
            Vec3::new(0.0, 0.0, d) + dir,
        );
        (e1, e2)
    }

    fn cfg(variant: TransitionVariant, formulation: Formulation) -> PairConfig {
        PairConfig {
            law_perp: PenaltyLaw::linear(1e4).unwrap(),
            // Positive support gap so several Gauss points are active at
            // mid-band crossings of slender elements.
            law_par: PenaltyLaw::quad_regularized(4e4, 0.05).unwrap(),
            transition: TransitionConfig::from_degrees(30.0, 50.0, variant).unwrap(),
            formulation,
            n_ii: 2,
            n_gr: 4,
        }
    }

    #[test]
    fn transition_factor_values() {
        let t = TransitionConfig::from_degrees(30.0, 50.0, TransitionVariant::ForceBased).unwrap();
        assert_relative_eq!(transition_factor(t.z1(), &t), 1.0);
        assert_relative_eq!(transition_factor(t.z2(), &t), 0.0);
        assert_relative_eq!(transition_factor(0.5 * (t.z1() + t.z2()), &t), 0.5);
        assert_relative_eq!(transition_factor(1.0, &t), 1.0);
        assert_relative_eq!(transition_factor(0.0, &t), 0.0);
        // C1: derivative vanishes at both edges.
        assert_relative_eq!(transition_factor_dz(t.z1() - 1e-12, &t), 0.0, epsilon = 1e-9);
        assert_relative_eq!(transition_factor_dz(t.z2() + 1e-12, &t), 0.0, epsilon = 1e-9);
        assert!(transition_factor_dz(0.5 * (t.z1() + t.z2()), &t) > 0.0);
        // FD check of dk/dz inside the band.
        let z = 0.3 * t.z1() + 0.7 * t.z2();
        let h = 1e-8;
        let fd = (transition_factor(z + h, &t) - transition_factor(z - h, &t)) / (2.0 * h);
        assert_relative_eq!(transition_factor_dz(z, &t), fd, max_relative = 1e-6);
    }

    #[test]
    fn delta_z_rigid_contractions_vanish() {
        let n1 = NodalDof::new(Vec3::new(-0.9, 0.05, 0.0), Vec3::new(1.0, 0.15, -0.05)).unwrap();
        let n2 = NodalDof::new(Vec3::new(0.95, -0.1, 0.01), Vec3::new(0.95, -0.2, 0.1)).unwrap();
        let e1 = ElementDofVector::from_nodes(&n1, &n2, 1.9, 0.0).unwrap();
        let m1 = NodalDof::new(Vec3::new(0.1, -0.8, 0.021), Vec3::new(0.6, 1.0, 0.05)).unwrap();
        let m2 = NodalDof::new(Vec3::new(0.9, 0.6, 0.015), Vec3::new(0.7, 0.95, 0.02)).unwrap();
        let e2 = ElementDofVector::from_nodes(&m1, &m2, 1.6, 0.0).unwrap();
        let sol = resolve_point_projection(&e1, &e2, (0.0, 0.0), &params())
            .unwrap()
            .unwrap();
        let dz = delta_z_for_solution(&e1, &e2, &sol).unwrap();
        for dir in [Vec3::x(), Vec3::y(), Vec3::z()] {
            let mut u = PairVector::zeros();
            for b in [0, 2, 4, 6] {
                u.fixed_rows_mut::<3>(3 * b).copy_from(&dir);
            }
            assert!((dz * u)[0].abs() < 1e-10, "translation");
        }
        for omega in [Vec3::x(), Vec3::y(), Vec3::z()] {
            let mut u = PairVector::zeros();
            for b in 0..4 {
                let v = Vec3::from(e1.dofs.fixed_rows::<3>(3 * b));
                u.fixed_rows_mut::<3>(3 * b).copy_from(&omega.cross(&v));
                let w = Vec3::from(e2.dofs.fixed_rows::<3>(3 * b));
                u.fixed_rows_mut::<3>(12 + 3 * b).copy_from(&omega.cross(&w));
            }
            assert!((dz * u)[0].abs() < 1e-10, "rotation");
        }
    }

    #[test]
    fn delta_z_matches_fd_reprojection() {
        let (e1, e2) = crossing(40.0, -1e-3);
        let sol = resolve_point_projection(&e1, &e2, (0.0, 0.0), &params())
            .unwrap()
            .unwrap();
        let dz = delta_z_for_solution(&e1, &e2, &sol).unwrap();
        let h = 1e-7;
        for c in 0..24 {
            let z_of = |sign: f64| -> f64 {
                let (mut a, mut b) = (e1, e2);
                if c < 12 {
                    a.dofs[c] += sign * h;
                } else {
                    b.dofs[c - 12] += sign * h;
                }
                resolve_point_projection(&a, &b, (sol.xi, sol.eta), &params())
                    .unwrap()
                    .unwrap()
                    .z
            };
            let fd = (z_of(1.0) - z_of(-1.0)) / (2.0 * h);
            let scale = dz.amax().max(1e-8);
            assert!(
                (dz[c] - fd).abs() / scale < 1e-5,
                "dof {c}: {} vs {}",
                dz[c],
                fd
            );
        }
    }

    fn evaluate(
        e1: &ElementDofVector,
        e2: &ElementDofVector,
        c: &PairConfig,
    ) -> PairEvaluation {
        evaluate_pair(e1, e2, c, &params(), None, true, true).unwrap()
    }

    #[test]
    fn above_band_reduces_to_point() {
        let (e1, e2) = crossing(80.0, -1e-3);
        for variant in [TransitionVariant::ForceBased, TransitionVariant::PotentialBased] {
            let abc = evaluate(&e1, &e2, &cfg(variant, Formulation::AllAngle));
            let pt = evaluate(&e1, &e2, &cfg(variant, Formulation::PointOnly));
            assert!(abc.n_line_gp == 0);
            assert_relative_eq!(
                (abc.residual - pt.residual).norm(),
                0.0,
                epsilon = 1e-14 * pt.residual.norm().max(1.0)
            );
            assert!((abc.stiffness - pt.stiffness).norm() < 1e-12 * pt.stiffness.norm());
        }
    }

    #[test]
    fn below_band_reduces_to_line() {
        let (e1, e2) = crossing(10.0, -1e-3);
        for variant in [TransitionVariant::ForceBased, TransitionVariant::PotentialBased] {
            let abc = evaluate(&e1, &e2, &cfg(variant, Formulation::AllAngle));
            let ln = evaluate(&e1, &e2, &cfg(variant, Formulation::LineOnly));
            assert!(abc.n_point == 0 && abc.n_endpoint == 0);
            assert!((abc.residual - ln.residual).norm() <= 1e-12 * ln.residual.norm());
            assert!((abc.stiffness - ln.stiffness).norm() <= 1e-10 * ln.stiffness.norm());
        }
    }

    fn fd_stiffness_of_pair(
        e1: &ElementDofVector,
        e2: &ElementDofVector,
        c: &PairConfig,
        h: f64,
    ) -> PairMatrix {
        let mut k = PairMatrix::zeros();
        for col in 0..24 {
            let (mut ap, mut bp) = (*e1, *e2);
            let (mut am, mut bm) = (*e1, *e2);
            if col < 12 {
                ap.dofs[col] += h;
                am.dofs[col] -= h;
            } else {
                bp.dofs[col - 12] += h;
                bm.dofs[col - 12] -= h;
            }
            let rp = evaluate(&ap, &bp, c).residual;
            let rm = evaluate(&am, &bm, c).residual;
            k.set_column(col, &((rp - rm) / (2.0 * h)));
        }
        k
    }

    #[test]
    fn force_based_mid_band_stiffness_matches_fd() {
        let (e1, e2) = crossing(40.0, -1e-3);
        let c = cfg(TransitionVariant::ForceBased, Formulation::AllAngle);
        let ev = evaluate(&e1, &e2, &c);
        assert!(ev.n_point == 1 && ev.n_line_gp > 0, "mid-band has both terms");
        let fd = fd_stiffness_of_pair(&e1, &e2, &c, 1e-6);
        let rel = (ev.stiffness - fd).norm() / fd.norm();
        assert!(rel < 1e-5, "relative FD error {rel:.3e}");
    }

    #[test]
    fn potential_based_mid_band_stiffness_matches_fd() {
        let (e1, e2) = crossing(40.0, -1e-3);
        let c = cfg(TransitionVariant::PotentialBased, Formulation::AllAngle);
        let ev = evaluate(&e1, &e2, &c);
        let fd = fd_stiffness_of_pair(&e1, &e2, &c, 1e-6);
        let rel = (ev.stiffness - fd).norm() / fd.norm();
        assert!(rel < 1e-4, "relative FD error {rel:.3e}");
    }

    #[test]
    fn potential_based_residual_is_potential_gradient() {
        let (e1, e2) = crossing(40.0, -1e-3);
        let c = cfg(TransitionVariant::PotentialBased, Formulation::AllAngle);
        let ev = evaluate(&e1, &e2, &c);
        let h = 1e-7;
        for col in 0..24 {
            let pot = |sign: f64| -> f64 {
                let (mut a, mut b) = (e1, e2);
                if col < 12 {
                    a.dofs[col] += sign * h;
                } else {
                    b.dofs[col - 12] += sign * h;
                }
                evaluate(&a, &b, &c).potential
            };
            let fd = (pot(1.0) - pot(-1.0)) / (2.0 * h);
            let scale = ev.residual.amax().max(1e-8);
            assert!(
                (ev.residual[col] - fd).abs() / scale < 1e-5,
                "dof {col}: {} vs {}",
                ev.residual[col],
                fd
            );
        }
    }

    #[test]
    fn force_based_not_conservative_in_band() {
        let (e1, e2) = crossing(40.0, -1e-3);
        let c = cfg(TransitionVariant::ForceBased, Formulation::AllAngle);
        let ev = evaluate(&e1, &e2, &c);
        let h = 1e-7;
        let mut max_rel = 0.0f64;
        for col in 0..24 {
            let pot = |sign: f64| -> f64 {
                let (mut a, mut b) = (e1, e2);
                if col < 12 {
                    a.dofs[col] += sign * h;
                } else {
                    b.dofs[col - 12] += sign * h;
                }
                evaluate(&a, &b, &c).potential
            };
            let fd = (pot(1.0) - pot(-1.0)) / (2.0 * h);
            let scale = ev.residual.amax().max(1e-8);
            max_rel = max_rel.max((ev.residual[col] - fd).abs() / scale);
        }
        assert!(
            max_rel > 1e-3,
            "force-based residual unexpectedly conservative, max rel dev {max_rel:.3e}"
        );
    }

    #[test]
    fn choose_alpha1_examples() {
        assert_relative_eq!(choose_alpha1(0.01, 1.0).unwrap(), 11.478, epsilon = 1e-3);
        assert!(choose_alpha1(0.6, 1.0).is_err());
        assert_relative_eq!(
            choose_alpha1(0.01, 1.2).unwrap(),
            1.2 * choose_alpha1(0.01, 1.0).unwrap(),
            epsilon = 1e-12
        );
        assert!(choose_alpha1(1e-6, 1.0).unwrap() < 0.2);
    }

    #[test]
    fn min_gauss_points_examples() {
        assert_eq!(min_gauss_points(-0.1, 11.0, 51.0, 1.0).unwrap(), 8);
        assert!(min_gauss_points(-2.0, 45.0, 100.0, 1.0).is_err());
        assert_eq!(min_gauss_points(-0.5, 1e-9, 100.0, 1.0).unwrap(), 1);
        // At the centerline-crossing bound the count approaches sin(a)/4*rho.
        assert_eq!(min_gauss_points(-2.0 + 1e-9, 90.0, 100.0, 1.0).unwrap(), 25);
        // A vanishing penetration leaves the contact length unresolvable:
        // the required count blows up.
        let n = min_gauss_points(-1e-6, 90.0, 100.0, 1.0).unwrap();
        assert!(n > 25 * 20, "grazing-gap count {n} should blow up");
    }

    #[test]
    fn penalty_ratio_values() {
        assert_relative_eq!(
            penalty_ratio_analytic(0.01, 20.0).unwrap(),
            0.0390,
            epsilon = 1e-4
        );
        assert_relative_eq!(
            penalty_ratio_analytic(0.01, 90.0).unwrap(),
            4.0 * 0.01 / 3.0,
            epsilon = 1e-15
        );
        // Numeric variant with linear law and g_min = -2R has an exactly
        // piecewise-linear gap profile and recovers the analytic expression.
        let law = PenaltyLaw::linear(1.0).unwrap();
        for alpha in [15.0, 40.0, 90.0] {
            let num = penalty_ratio_numeric(&law, -2.0 * R + 1e-12, alpha, R).unwrap();
            let ana = penalty_ratio_analytic(R, alpha).unwrap();
            assert_relative_eq!(num, ana, max_relative = 1e-3);
        }
    }
}
