//! Scenario configuration: TOML parsing with overrides, built-in scenarios,
//! mesh construction, Dirichlet trajectories, load schedules, and the run
//! driver that wires the solver to diagnostics and file export.

use crate::contact::abc::{Formulation, PairConfig, TransitionConfig, TransitionVariant};
use crate::diagnostics::{Recorder, StepReport};
use crate::element::{ElementLoad, LoadField};
use crate::error::{Error, Result};
use crate::output::{write_vtk_forces, write_vtk_polylines, CsvWriter};
use crate::penalty::PenaltyLaw;
use crate::search::SearchConfig;
use crate::solver::{
    run_dynamic, run_static, Constraint, ContactSettings, DynamicState, GenAlpha, Mesh,
    MeshElement, SolverConfig, StepOutput, DOFS_PER_NODE,
};
use crate::geometry::BeamSection;
use crate::Vec3;
use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use std::path::Path;

fn default_one() -> f64 {
    1.0
}
fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeshKind {
    /// Flexible beam lowered onto a rigid arc, then swept in-plane so the
    /// contact angle runs from perpendicular to parallel.
    ArcSweep,
    /// Two free-free parallel beams; pulse loads rotate one and fire the
    /// other at it.
    ParallelImpact,
    /// Perpendicular crossing with a coarsely driven approach that relies on
    /// the displacement step size control.
    CrossingGuard,
    /// Small deterministic two-layer fiber grid under compression.
    FiberSmoke,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshConfig {
    pub kind: MeshKind,
    pub elements_per_fiber: usize,
    /// Fiber half-span or beam length, kind-dependent (documented per kind).
    #[serde(default = "default_one")]
    pub length: f64,
    /// ArcSweep: initial clearance above the arc apex. ParallelImpact /
    /// CrossingGuard / FiberSmoke: initial centerline separation.
    #[serde(default)]
    pub clearance: f64,
    /// ArcSweep: prescribed vertical approach. CrossingGuard / FiberSmoke:
    /// total prescribed drive distance.
    #[serde(default)]
    pub drive: f64,
    /// ArcSweep: fraction of the load path spent on the descent phase.
    #[serde(default)]
    pub descent_fraction: f64,
    /// ArcSweep: total in-plane sweep angle, degrees.
    #[serde(default)]
    pub sweep_deg: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SectionConfig {
    pub radius: f64,
    pub youngs_modulus: f64,
    #[serde(default = "default_one")]
    pub density: f64,
    /// Cross-section area; defaults to the full circular area.
    #[serde(default)]
    pub area: Option<f64>,
    /// Second section (ParallelImpact master); fields default to the first.
    #[serde(default)]
    pub density2: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContactConfig {
    pub eps_perp: f64,
    pub eps_par: f64,
    /// Regularization support gap; 0 selects the plain linear law.
    #[serde(default)]
    pub support_gap: f64,
    pub alpha1_deg: f64,
    pub alpha2_deg: f64,
    /// "force_based" or "potential_based".
    pub variant: String,
    /// "all_angle", "point_only" or "line_only".
    pub formulation: String,
    pub n_ii: usize,
    pub n_gr: usize,
    #[serde(default)]
    pub cutoff_gap: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    /// "static" or "dynamic".
    pub mode: String,
    #[serde(default)]
    pub n_steps: usize,
    #[serde(default)]
    pub dt: f64,
    #[serde(default)]
    pub t_end: f64,
    #[serde(default = "default_one")]
    pub rho_inf: f64,
    #[serde(default = "SolverSection::default_tol")]
    pub tol_r: f64,
    #[serde(default = "SolverSection::default_tol")]
    pub tol_d: f64,
    #[serde(default = "SolverSection::default_max_newton")]
    pub max_newton: usize,
    #[serde(default = "SolverSection::default_k_pen")]
    pub k_pen: f64,
    #[serde(default)]
    pub use_mcs: bool,
    #[serde(default = "SolverSection::default_n_gauss")]
    pub n_gauss: usize,
    #[serde(default = "default_true")]
    pub step_size_control: bool,
}

impl SolverSection {
    fn default_tol() -> f64 {
        1e-7
    }
    fn default_max_newton() -> usize {
        50
    }
    fn default_k_pen() -> f64 {
        0.5
    }
    fn default_n_gauss() -> usize {
        4
    }
}

/// Triangle pulse: 0 at `start`, 1 at `peak`, 0 at `stop` and outside.
#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Pulse {
    #[serde(default)]
    pub amplitude: f64,
    #[serde(default)]
    pub start: f64,
    #[serde(default)]
    pub peak: f64,
    #[serde(default)]
    pub stop: f64,
}

impl Pulse {
    pub fn value(&self, t: f64) -> f64 {
        if t <= self.start || t >= self.stop {
            0.0
        } else if t <= self.peak {
            self.amplitude * (t - self.start) / (self.peak - self.start)
        } else {
            self.amplitude * (self.stop - t) / (self.stop - self.peak)
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoadsConfig {
    /// ParallelImpact: downward line load on the flying beam.
    #[serde(default)]
    pub master_pulse: Pulse,
    /// ParallelImpact: antisymmetric in-plane line load spinning the target.
    #[serde(default)]
    pub slave_pulse: Pulse,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_true")]
    pub csv: bool,
    /// Write VTK geometry every n-th step; 0 disables.
    #[serde(default)]
    pub vtk_every: usize,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            csv: true,
            vtk_every: 0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub mesh: MeshConfig,
    pub section: SectionConfig,
    pub contact: ContactConfig,
    pub solver: SolverSection,
    #[serde(default)]
    pub loads: LoadsConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

impl Scenario {
    pub fn parse(text: &str) -> Result<Self> {
        let s: Scenario = toml::from_str(text)
            .map_err(|e| Error::Scenario(format!("parse error: {e}")))?;
        s.validate()?;
        Ok(s)
    }

    /// Parse with `key=value` overrides applied on dotted TOML paths before
    /// deserialization, e.g. `contact.eps_perp=2e4`.
    pub fn parse_with_overrides(text: &str, overrides: &[(String, String)]) -> Result<Self> {
        let mut doc: toml::Value = toml::from_str(text)
            .map_err(|e| Error::Scenario(format!("parse error: {e}")))?;
        for (key, value) in overrides {
            apply_override(&mut doc, key, value)?;
        }
        let s: Scenario = doc
            .try_into()
            .map_err(|e| Error::Scenario(format!("parse error: {e}")))?;
        s.validate()?;
        Ok(s)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let err = |msg: String| Err(Error::Scenario(msg));
        if self.contact.alpha2_deg <= self.contact.alpha1_deg {
            return err(format!(
                "contact.alpha2_deg ({}) must exceed contact.alpha1_deg ({})",
                self.contact.alpha2_deg, self.contact.alpha1_deg
            ));
        }
        if !(self.contact.alpha1_deg > 0.0 && self.contact.alpha2_deg <= 90.0) {
            return err("contact.alpha1_deg/alpha2_deg must lie in (0, 90]".into());
        }
        if self.section.radius <= 0.0 {
            return err("section.radius must be positive".into());
        }
        if self.mesh.elements_per_fiber == 0 {
            return err("mesh.elements_per_fiber must be positive".into());
        }
        match self.solver.mode.as_str() {
            "static" => {
                if self.solver.n_steps == 0 {
                    return err("solver.n_steps must be positive in static mode".into());
                }
            }
            "dynamic" => {
                if !(self.solver.dt > 0.0 && self.solver.t_end > 0.0) {
                    return err("solver.dt and solver.t_end must be positive".into());
                }
            }
            m => return err(format!("solver.mode must be static or dynamic, got {m}")),
        }
        self.transition_variant()?;
        self.formulation()?;
        Ok(())
    }

    pub fn transition_variant(&self) -> Result<TransitionVariant> {
        match self.contact.variant.as_str() {
            "force_based" => Ok(TransitionVariant::ForceBased),
            "potential_based" => Ok(TransitionVariant::PotentialBased),
            v => Err(Error::Scenario(format!(
                "contact.variant must be force_based or potential_based, got {v}"
            ))),
        }
    }

    pub fn formulation(&self) -> Result<Formulation> {
        match self.contact.formulation.as_str() {
            "all_angle" => Ok(Formulation::AllAngle),
            "point_only" => Ok(Formulation::PointOnly),
            "line_only" => Ok(Formulation::LineOnly),
            v => Err(Error::Scenario(format!(
                "contact.formulation must be all_angle, point_only or line_only, got {v}"
            ))),
        }
    }
}

fn apply_override(doc: &mut toml::Value, key: &str, value: &str) -> Result<()> {
    let mut node = doc;
    let mut parts = key.split('.').peekable();
    while let Some(part) = parts.next() {
        let table = node
            .as_table_mut()
            .ok_or_else(|| Error::Scenario(format!("override path {key}: not a table")))?;
        if parts.peek().is_some() {
            node = table
                .get_mut(part)
                .ok_or_else(|| Error::Scenario(format!("override path {key}: unknown section {part}")))?;
        } else {
            let parsed: toml::Value = if let Ok(b) = value.parse::<bool>() {
                toml::Value::Boolean(b)
            } else if let Ok(i) = value.parse::<i64>() {
                toml::Value::Integer(i)
            } else if let Ok(f) = value.parse::<f64>() {
                toml::Value::Float(f)
            } else {
                toml::Value::String(value.to_string())
            };
            table.insert(part.to_string(), parsed);
            return Ok(());
        }
    }
    Err(Error::Scenario(format!("override path {key} is empty")))
}

/// Built-in scenario parameter sets by name.
pub fn builtin(name: &str) -> Result<Scenario> {
    match name {
        "example1_arc" => Ok(example1_arc()),
        "example2_impact" => Ok(example2_impact()),
        "crossing_guard" => Ok(crossing_guard()),
        "fiber_smoke" => Ok(fiber_smoke()),
        _ => Err(Error::Scenario(format!(
            "unknown scenario {name}; built-ins: example1_arc, example2_impact, crossing_guard, fiber_smoke"
        ))),
    }
}

/// Resolve a name or a TOML file path, then apply overrides.
pub fn load(name_or_path: &str, overrides: &[(String, String)]) -> Result<Scenario> {
    let text = if Path::new(name_or_path).is_file() {
        std::fs::read_to_string(name_or_path)?
    } else {
        builtin(name_or_path)?.to_toml()
    };
    Scenario::parse_with_overrides(&text, overrides)
}

fn example1_arc() -> Scenario {
    let r = 0.01;
    Scenario {
        mesh: MeshConfig {
            kind: MeshKind::ArcSweep,
            elements_per_fiber: 3,
            length: 2.0,
            clearance: 0.06 + 2.0 * r,
            drive: 0.3,
            descent_fraction: 0.2,
            sweep_deg: 90.0,
        },
        section: SectionConfig {
            radius: r,
            youngs_modulus: 1e9,
            density: 1.0,
            area: Some(0.01 * std::f64::consts::PI * r * r),
            density2: None,
        },
        contact: ContactConfig {
            eps_perp: 2e4,
            eps_par: 5e5,
            support_gap: 1e-3,
            alpha1_deg: 10.0,
            alpha2_deg: 30.0,
            variant: "force_based".into(),
            formulation: "all_angle".into(),
            n_ii: 20,
            n_gr: 5,
            cutoff_gap: 2e-3,
        },
        solver: SolverSection {
            mode: "static".into(),
            n_steps: 500,
            dt: 0.0,
            t_end: 0.0,
            rho_inf: 1.0,
            tol_r: 1e-7,
            tol_d: 1e-7,
            max_newton: 50,
            k_pen: 0.5,
            use_mcs: false,
            n_gauss: 4,
            step_size_control: true,
        },
        loads: LoadsConfig::default(),
        output: OutputConfig::default(),
    }
}

fn example2_impact() -> Scenario {
    let r = 0.01;
    Scenario {
        mesh: MeshConfig {
            kind: MeshKind::ParallelImpact,
            elements_per_fiber: 1,
            length: 2.0,
            clearance: 10.0 * r,
            drive: 0.0,
            descent_fraction: 0.0,
            sweep_deg: 0.0,
        },
        section: SectionConfig {
            radius: r,
            youngs_modulus: 1e-6,
            density: 0.1,
            area: Some(0.01 * std::f64::consts::PI * r * r),
            density2: Some(0.05),
        },
        contact: ContactConfig {
            eps_perp: 3.1e-4,
            eps_par: 3e-3,
            support_gap: 1e-3,
            // Band centered on the ~7.4 deg impact angle so both the point
            // and the line term carry weight during the contact event.
            alpha1_deg: 5.0,
            alpha2_deg: 10.0,
            variant: "potential_based".into(),
            formulation: "all_angle".into(),
            n_ii: 10,
            n_gr: 4,
            cutoff_gap: 2e-3,
        },
        solver: SolverSection {
            mode: "dynamic".into(),
            n_steps: 0,
            dt: 1e-3,
            t_end: 2.0,
            rho_inf: 1.0,
            tol_r: 1e-10,
            tol_d: 1e-10,
            max_newton: 50,
            k_pen: 0.5,
            use_mcs: false,
            n_gauss: 4,
            step_size_control: true,
        },
        loads: LoadsConfig {
            master_pulse: Pulse {
                amplitude: 5e-7,
                start: 0.0,
                peak: 0.03,
                stop: 0.06,
            },
            slave_pulse: Pulse {
                amplitude: 2.5e-6,
                start: 0.0,
                peak: 0.02,
                stop: 0.04,
            },
        },
        output: OutputConfig::default(),
    }
}

fn crossing_guard() -> Scenario {
    let r = 0.01;
    Scenario {
        mesh: MeshConfig {
            kind: MeshKind::CrossingGuard,
            elements_per_fiber: 2,
            length: 1.0,
            clearance: 2.0 * r + 0.002,
            drive: 8.0 * r,
            descent_fraction: 0.0,
            sweep_deg: 0.0,
        },
        section: SectionConfig {
            radius: r,
            youngs_modulus: 1e7,
            density: 1.0,
            area: Some(0.01 * std::f64::consts::PI * r * r),
            density2: None,
        },
        contact: ContactConfig {
            eps_perp: 1e3,
            eps_par: 2.5e4,
            support_gap: 1e-3,
            alpha1_deg: 10.0,
            alpha2_deg: 30.0,
            variant: "force_based".into(),
            formulation: "all_angle".into(),
            n_ii: 5,
            n_gr: 3,
            cutoff_gap: 2e-3,
        },
        solver: SolverSection {
            mode: "static".into(),
            n_steps: 2,
            dt: 0.0,
            t_end: 0.0,
            rho_inf: 1.0,
            tol_r: 1e-7,
            tol_d: 1e-7,
            max_newton: 50,
            k_pen: 0.5,
            use_mcs: false,
            n_gauss: 4,
            step_size_control: true,
        },
        loads: LoadsConfig::default(),
        output: OutputConfig::default(),
    }
}

fn fiber_smoke() -> Scenario {
    let r = 0.01;
    Scenario {
        mesh: MeshConfig {
            kind: MeshKind::FiberSmoke,
            elements_per_fiber: 1,
            length: 0.6,
            clearance: 2.0 * r + 0.001,
            drive: 0.008,
            descent_fraction: 0.0,
            sweep_deg: 0.0,
        },
        section: SectionConfig {
            radius: r,
            youngs_modulus: 1e7,
            density: 1.0,
            area: Some(0.01 * std::f64::consts::PI * r * r),
            density2: None,
        },
        contact: ContactConfig {
            eps_perp: 1e3,
            eps_par: 2.5e4,
            support_gap: 1e-3,
            alpha1_deg: 10.0,
            alpha2_deg: 30.0,
            variant: "force_based".into(),
            formulation: "all_angle".into(),
            n_ii: 5,
            n_gr: 3,
            cutoff_gap: 2e-3,
        },
        solver: SolverSection {
            mode: "static".into(),
            n_steps: 4,
            dt: 0.0,
            t_end: 0.0,
            rho_inf: 1.0,
            tol_r: 1e-7,
            tol_d: 1e-7,
            max_newton: 50,
            k_pen: 0.5,
            use_mcs: false,
            n_gauss: 4,
            step_size_control: true,
        },
        loads: LoadsConfig::default(),
        output: OutputConfig::default(),
    }
}

/// Fiber bookkeeping for trajectory and load dispatch.
#[derive(Debug, Clone)]
struct Fiber {
    nodes: Vec<usize>,
    elements: Vec<usize>,
}

/// A scenario turned into solver inputs.
pub struct Built {
    pub scenario: Scenario,
    pub mesh: Mesh,
    pub settings: ContactSettings,
    pub solver_cfg: SolverConfig,
    fibers: Vec<Fiber>,
}

impl Built {
    pub fn fiber_nodes(&self, fiber: usize) -> &[usize] {
        &self.fibers[fiber].nodes
    }
    pub fn fiber_elements(&self, fiber: usize) -> &[usize] {
        &self.fibers[fiber].elements
    }
}

struct MeshBuilder {
    nodes: Vec<(Vec3, Vec3)>,
    elements: Vec<MeshElement>,
    fibers: Vec<Fiber>,
}

impl MeshBuilder {
    fn new() -> Self {
        Self {
            nodes: Vec::new(),
            elements: Vec::new(),
            fibers: Vec::new(),
        }
    }

    fn straight_fiber(&mut self, p0: Vec3, p1: Vec3, n_el: usize, section: usize) -> usize {
        let dir = (p1 - p0).normalize();
        let l_el = (p1 - p0).norm() / n_el as f64;
        let base = self.nodes.len();
        for i in 0..=n_el {
            let s = i as f64 / n_el as f64;
            self.nodes.push((p0 + s * (p1 - p0), dir));
        }
        self.finish_fiber(base, n_el, section, l_el)
    }

    /// Half-circle arc of radius `radius` in the x-z plane as one element:
    /// endpoints on the x axis, tangents vertical, apex at z = radius * pi/4.
    fn arc_fiber(&mut self, radius: f64, section: usize) -> usize {
        let base = self.nodes.len();
        self.nodes.push((
            Vec3::new(-radius, 0.0, 0.0),
            Vec3::new(0.0, 0.0, 1.0),
        ));
        self.nodes.push((
            Vec3::new(radius, 0.0, 0.0),
            Vec3::new(0.0, 0.0, -1.0),
        ));
        self.finish_fiber(base, 1, section, std::f64::consts::PI * radius)
    }

    fn finish_fiber(&mut self, base: usize, n_el: usize, section: usize, l_el: f64) -> usize {
        let fiber = self.fibers.len();
        let el_base = self.elements.len();
        for i in 0..n_el {
            self.elements.push(MeshElement {
                nodes: [base + i, base + i + 1],
                fiber,
                section,
                l0: l_el,
            });
        }
        self.fibers.push(Fiber {
            nodes: (base..=base + n_el).collect(),
            elements: (el_base..el_base + n_el).collect(),
        });
        fiber
    }

    fn build(self, sections: Vec<BeamSection>) -> (Mesh, Vec<Fiber>) {
        let mut initial = DVector::zeros(DOFS_PER_NODE * self.nodes.len());
        for (i, (p, t)) in self.nodes.iter().enumerate() {
            for c in 0..3 {
                initial[DOFS_PER_NODE * i + c] = p[c];
                initial[DOFS_PER_NODE * i + 3 + c] = t[c];
            }
        }
        (
            Mesh {
                n_nodes: self.nodes.len(),
                elements: self.elements,
                sections,
                initial,
            },
            self.fibers,
        )
    }
}

pub fn build(scenario: &Scenario) -> Result<Built> {
    scenario.validate()?;
    let s = &scenario.section;
    let full_area = std::f64::consts::PI * s.radius * s.radius;
    let moment = 0.25 * std::f64::consts::PI * s.radius.powi(4);
    let area = s.area.unwrap_or(full_area);
    let section0 = BeamSection::new(s.radius, s.youngs_modulus, area, moment, s.density)?;
    let mut sections = vec![section0.clone()];
    if let Some(rho2) = s.density2 {
        sections.push(BeamSection::new(
            s.radius,
            s.youngs_modulus,
            area,
            moment,
            rho2,
        )?);
    }

    let m = &scenario.mesh;
    let mut b = MeshBuilder::new();
    match m.kind {
        MeshKind::ArcSweep => {
            // Slave fiber first so the flexible beam carries the Gauss points.
            // Clearance is measured from the arc apex at z = pi/4.
            let half = 0.5 * m.length;
            let z0 = std::f64::consts::FRAC_PI_4 + m.clearance;
            b.straight_fiber(
                Vec3::new(0.0, -half, z0),
                Vec3::new(0.0, half, z0),
                m.elements_per_fiber,
                0,
            );
            b.arc_fiber(1.0, 0);
        }
        MeshKind::ParallelImpact => {
            let half = 0.5 * m.length;
            // Target beam in the z = 0 plane; flyer above it.
            b.straight_fiber(
                Vec3::new(-half, 0.0, 0.0),
                Vec3::new(half, 0.0, 0.0),
                m.elements_per_fiber,
                0,
            );
            b.straight_fiber(
                Vec3::new(-half, 0.0, m.clearance),
                Vec3::new(half, 0.0, m.clearance),
                m.elements_per_fiber,
                sections.len() - 1,
            );
        }
        MeshKind::CrossingGuard => {
            let half = 0.5 * m.length;
            b.straight_fiber(
                Vec3::new(-half, 0.0, 0.0),
                Vec3::new(half, 0.0, 0.0),
                m.elements_per_fiber,
                0,
            );
            // Shifted span keeps the crossing inside element interiors.
            b.straight_fiber(
                Vec3::new(-0.07, -half - 0.07, m.clearance),
                Vec3::new(-0.07, half - 0.07, m.clearance),
                m.elements_per_fiber,
                0,
            );
        }
        MeshKind::FiberSmoke => {
            let half = 0.5 * m.length;
            // Two fibers per layer, crossings away from shared nodes.
            for &x in &[-0.13, 0.11] {
                b.straight_fiber(
                    Vec3::new(x, -half, m.clearance),
                    Vec3::new(x, half, m.clearance),
                    m.elements_per_fiber,
                    0,
                );
            }
            for &y in &[-0.12, 0.14] {
                b.straight_fiber(
                    Vec3::new(-half, y, 0.0),
                    Vec3::new(half, y, 0.0),
                    m.elements_per_fiber,
                    0,
                );
            }
        }
    }
    let (mesh, fibers) = b.build(sections);

    let c = &scenario.contact;
    let make_law = |eps: f64| {
        if c.support_gap > 0.0 {
            PenaltyLaw::quad_regularized(eps, c.support_gap)
        } else {
            PenaltyLaw::linear(eps)
        }
    };
    let transition = TransitionConfig::from_degrees(
        c.alpha1_deg,
        c.alpha2_deg,
        scenario.transition_variant()?,
    )?;
    let settings = ContactSettings {
        pair: PairConfig {
            law_perp: make_law(c.eps_perp)?,
            law_par: make_law(c.eps_par)?,
            transition,
            formulation: scenario.formulation()?,
            n_ii: c.n_ii,
            n_gr: c.n_gr,
        },
        search: {
            let mut sc = SearchConfig::new(
                c.alpha1_deg.to_radians(),
                c.alpha2_deg.to_radians(),
                c.cutoff_gap.max(c.support_gap),
            );
            // A single strongly curved element (the rigid arc) subdivides far
            // beyond the default cap meant for near-straight elements.
            sc.max_segments = 512;
            sc
        },
    };

    let sv = &scenario.solver;
    let solver_cfg = SolverConfig {
        tol_r: sv.tol_r,
        tol_d: sv.tol_d,
        max_newton: sv.max_newton,
        r_cap: mesh.min_radius(),
        k_pen: sv.k_pen,
        use_mcs: sv.use_mcs,
        n_gauss: sv.n_gauss,
        step_size_control: sv.step_size_control,
    };

    Ok(Built {
        scenario: scenario.clone(),
        mesh,
        settings,
        solver_cfg,
        fibers,
    })
}

fn fix_node(mesh: &Mesh, node: usize, out: &mut Vec<Constraint>) {
    for c in 0..DOFS_PER_NODE {
        out.push(Constraint {
            dof: DOFS_PER_NODE * node + c,
            value: mesh.initial[DOFS_PER_NODE * node + c],
        });
    }
}

fn drive_position(mesh: &Mesh, node: usize, delta: Vec3, out: &mut Vec<Constraint>) {
    for c in 0..3 {
        out.push(Constraint {
            dof: DOFS_PER_NODE * node + c,
            value: mesh.initial[DOFS_PER_NODE * node + c] + delta[c],
        });
    }
}

impl Built {
    /// Dirichlet trajectory at path parameter (static) or time (dynamic).
    pub fn constraints(&self, s: f64) -> Vec<Constraint> {
        let m = &self.scenario.mesh;
        let mut out = Vec::new();
        match m.kind {
            MeshKind::ArcSweep => {
                // Rigid arc: both nodes fully prescribed.
                for &n in self.fibers[1].nodes.iter() {
                    fix_node(&self.mesh, n, &mut out);
                }
                // Beam end positions: vertical descent, then in-plane sweep.
                let sd = m.descent_fraction;
                let (descent, theta) = if s <= sd {
                    (m.drive * s / sd, 0.0)
                } else {
                    (m.drive, m.sweep_deg.to_radians() * (s - sd) / (1.0 - sd))
                };
                let half = 0.5 * m.length;
                let down = Vec3::new(0.0, 0.0, -descent);
                let left = Vec3::new(half * theta.sin(), half * (1.0 - theta.cos()), 0.0);
                let ends = [
                    *self.fibers[0].nodes.first().unwrap(),
                    *self.fibers[0].nodes.last().unwrap(),
                ];
                drive_position(&self.mesh, ends[0], down + left, &mut out);
                drive_position(&self.mesh, ends[1], down - left, &mut out);
            }
            MeshKind::ParallelImpact => {
                // Free flight: no constraints.
            }
            MeshKind::CrossingGuard | MeshKind::FiberSmoke => {
                // Lower layer fully clamped at the ends; upper layer ends
                // driven straight down.
                let upper: Vec<usize> = match m.kind {
                    MeshKind::CrossingGuard => vec![1],
                    _ => vec![0, 1],
                };
                for (f, fiber) in self.fibers.iter().enumerate() {
                    let ends = [*fiber.nodes.first().unwrap(), *fiber.nodes.last().unwrap()];
                    if upper.contains(&f) {
                        let down = Vec3::new(0.0, 0.0, -m.drive * s);
                        for &n in &ends {
                            drive_position(&self.mesh, n, down, &mut out);
                        }
                    } else {
                        for &n in &ends {
                            fix_node(&self.mesh, n, &mut out);
                        }
                    }
                }
            }
        }
        out
    }

    /// Element load schedule at path parameter or time.
    pub fn loads(&self, t: f64) -> Vec<(usize, ElementLoad)> {
        match self.scenario.mesh.kind {
            MeshKind::ParallelImpact => {
                let mut out = Vec::new();
                let l = &self.scenario.loads;
                let fz = l.master_pulse.value(t);
                if fz != 0.0 {
                    for &e in &self.fibers[1].elements {
                        out.push((
                            e,
                            ElementLoad {
                                force: Some(LoadField::Constant(Vec3::new(0.0, 0.0, -fz))),
                                ..Default::default()
                            },
                        ));
                    }
                }
                let fy = l.slave_pulse.value(t);
                if fy != 0.0 {
                    // Antisymmetric spin-up load; single-element fiber so the
                    // element coordinate is the fiber coordinate.
                    for &e in &self.fibers[0].elements {
                        out.push((
                            e,
                            ElementLoad {
                                force: Some(LoadField::LinearInXi(Vec3::new(0.0, fy, 0.0))),
                                ..Default::default()
                            },
                        ));
                    }
                }
                out
            }
            _ => Vec::new(),
        }
    }

    /// Run the scenario; reports are handed to the observer and optionally
    /// exported to `out_dir`.
    pub fn run(
        &self,
        out_dir: Option<&Path>,
        on_report: &mut dyn FnMut(&StepReport),
    ) -> Result<()> {
        if let Some(dir) = out_dir {
            std::fs::create_dir_all(dir)?;
        }
        let mut csv = match (out_dir, self.scenario.output.csv) {
            (Some(dir), true) => Some(CsvWriter::create(&dir.join("diagnostics.csv"))?),
            _ => None,
        };
        let vtk_every = self.scenario.output.vtk_every;
        let mut recorder = Recorder::default();
        let n_gauss = self.solver_cfg.n_gauss;
        let mcs = self.solver_cfg.use_mcs;
        let mut observe = |out: StepOutput<'_>| -> Result<()> {
            let report = recorder.report(&self.mesh, &out, n_gauss, mcs)?;
            if let Some(w) = csv.as_mut() {
                w.write(&report)?;
            }
            if let Some(dir) = out_dir {
                if vtk_every > 0 && out.step % vtk_every == 0 {
                    write_vtk_polylines(
                        &dir.join(format!("geometry_{:05}.vtk", out.step)),
                        &self.mesh,
                        out.d,
                        9,
                    )?;
                    write_vtk_forces(
                        &dir.join(format!("forces_{:05}.vtk", out.step)),
                        &out.report.contact.forces,
                    )?;
                }
            }
            on_report(&report);
            Ok(())
        };
        let sv = &self.scenario.solver;
        match sv.mode.as_str() {
            "static" => {
                run_static(
                    &self.mesh,
                    &|s| self.constraints(s),
                    &|s| self.loads(s),
                    sv.n_steps,
                    &self.settings,
                    &self.solver_cfg,
                    &mut observe,
                )?;
            }
            _ => {
                let mut state = DynamicState::at_rest(&self.mesh);
                let ga = GenAlpha::from_spectral_radius(sv.rho_inf);
                run_dynamic(
                    &self.mesh,
                    &mut state,
                    sv.dt,
                    sv.t_end,
                    &ga,
                    &|t| self.constraints(t),
                    &|t| self.loads(t),
                    &self.settings,
                    &self.solver_cfg,
                    &mut observe,
                )?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn builtins_parse_and_round_trip() {
        for name in ["example1_arc", "example2_impact", "crossing_guard", "fiber_smoke"] {
            let s = builtin(name).unwrap();
            let text = s.to_toml();
            let reparsed = Scenario::parse(&text).unwrap();
            // Idempotence on the canonical form.
            assert_eq!(reparsed.to_toml(), text, "{name}");
        }
    }

    #[test]
    fn band_order_rejected_with_named_field() {
        let mut s = builtin("fiber_smoke").unwrap();
        s.contact.alpha1_deg = 40.0;
        s.contact.alpha2_deg = 30.0;
        let err = s.validate().unwrap_err().to_string();
        assert!(err.contains("alpha2_deg"), "{err}");
        assert!(err.contains("alpha1_deg"), "{err}");
    }

    #[test]
    fn unknown_key_rejected() {
        let mut text = builtin("fiber_smoke").unwrap().to_toml();
        text.push_str("\n[contact2]\nfoo = 1\n");
        assert!(Scenario::parse(&text).is_err());
        let bad_field = text.replace("eps_perp", "eps_prep");
        assert!(Scenario::parse(&bad_field).is_err());
    }

    #[test]
    fn overrides_apply_on_dotted_paths() {
        let text = builtin("fiber_smoke").unwrap().to_toml();
        let s = Scenario::parse_with_overrides(
            &text,
            &[
                ("contact.eps_perp".into(), "123.5".into()),
                ("solver.n_steps".into(), "7".into()),
                ("solver.use_mcs".into(), "true".into()),
            ],
        )
        .unwrap();
        assert_relative_eq!(s.contact.eps_perp, 123.5);
        assert_eq!(s.solver.n_steps, 7);
        assert!(s.solver.use_mcs);
        let err = Scenario::parse_with_overrides(
            &text,
            &[("nope.value".into(), "1".into())],
        );
        assert!(err.is_err());
    }

    #[test]
    fn example2_parameters_match_documented_block() {
        let s = builtin("example2_impact").unwrap();
        assert_relative_eq!(s.section.radius, 0.01);
        assert_relative_eq!(s.mesh.length, 2.0);
        assert_relative_eq!(s.section.youngs_modulus, 1e-6);
        assert_relative_eq!(s.section.density, 0.1);
        assert_relative_eq!(s.section.density2.unwrap(), 0.05);
        assert_relative_eq!(s.mesh.clearance, 0.1);
        assert_relative_eq!(s.contact.eps_par, 3e-3);
        assert_relative_eq!(s.contact.eps_perp, 3.1e-4);
        assert_relative_eq!(s.solver.dt, 1e-3);
        assert_relative_eq!(s.solver.t_end, 2.0);
        assert_relative_eq!(s.loads.master_pulse.amplitude, 5e-7);
        assert_relative_eq!(s.loads.slave_pulse.amplitude, 2.5e-6);
    }

    #[test]
    fn arc_apex_height() {
        // Unit-radius Hermite arc overshoots the circle: apex at pi/4.
        let built = build(&builtin("example1_arc").unwrap()).unwrap();
        let arc_el = built.fiber_elements(1)[0];
        let dofs = built.mesh.element_dofs(&built.mesh.initial, arc_el).unwrap();
        let apex = crate::geometry::interpolate(&dofs, 0.0, 0).unwrap();
        assert_relative_eq!(apex.z, std::f64::consts::FRAC_PI_4, epsilon = 1e-14);
        assert_relative_eq!(apex.x, 0.0);
        // Beam floats at the configured clearance (2R + 0.06) above the apex.
        let mid = built.mesh.element_dofs(&built.mesh.initial, 1).unwrap();
        let beam_mid = crate::geometry::interpolate(&mid, 0.0, 0).unwrap();
        assert_relative_eq!(
            beam_mid.z,
            apex.z + built.scenario.mesh.clearance,
            epsilon = 1e-14
        );
    }

    #[test]
    fn arc_sweep_trajectory_endpoints() {
        let built = build(&builtin("example1_arc").unwrap()).unwrap();
        let m = &built.scenario.mesh;
        // End of descent: ends lowered by the full drive, no sweep yet.
        let cs = built.constraints(m.descent_fraction);
        let ends = [
            *built.fiber_nodes(0).first().unwrap(),
            *built.fiber_nodes(0).last().unwrap(),
        ];
        let z_left = cs
            .iter()
            .find(|c| c.dof == DOFS_PER_NODE * ends[0] + 2)
            .unwrap()
            .value;
        assert_relative_eq!(
            z_left,
            std::f64::consts::FRAC_PI_4 + m.clearance - m.drive,
            epsilon = 1e-14
        );
        // Full sweep: left end rotated 90 degrees about the beam center.
        let cs = built.constraints(1.0);
        let x = cs
            .iter()
            .find(|c| c.dof == DOFS_PER_NODE * ends[0])
            .unwrap()
            .value;
        let y = cs
            .iter()
            .find(|c| c.dof == DOFS_PER_NODE * ends[0] + 1)
            .unwrap()
            .value;
        assert_relative_eq!(x, 0.5 * m.length, epsilon = 1e-12);
        assert_relative_eq!(y, -1.0 + 0.5 * m.length, epsilon = 1e-12);
    }

    #[test]
    fn pulse_shape() {
        let p = Pulse {
            amplitude: 2.0,
            start: 0.0,
            peak: 0.5,
            stop: 1.5,
        };
        assert_eq!(p.value(-0.1), 0.0);
        assert_relative_eq!(p.value(0.25), 1.0);
        assert_relative_eq!(p.value(0.5), 2.0);
        assert_relative_eq!(p.value(1.0), 1.0);
        assert_eq!(p.value(1.5), 0.0);
        assert_eq!(p.value(2.0), 0.0);
    }

    #[test]
    fn fiber_smoke_runs_to_completion() {
        let mut s = builtin("fiber_smoke").unwrap();
        s.solver.n_steps = 2;
        s.mesh.drive = 0.004;
        let built = build(&s).unwrap();
        let mut reports = Vec::new();
        built
            .run(None, &mut |r| reports.push(r.clone()))
            .unwrap();
        assert!(reports.len() >= 2);
        // Compression engages contact on at least one crossing.
        assert!(reports.last().unwrap().n_point + reports.last().unwrap().n_line_gp > 0);
    }
}
