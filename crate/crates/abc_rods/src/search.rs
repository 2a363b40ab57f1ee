//! Two-stage broadphase: an octree over spherical element bounds, then
//! dynamically subdivided straight search segments with enwrapping cylinders.
//! Segment axis angles classify each surviving pair into potential point
//! and/or line contact candidates.

use crate::error::{Error, Result};
use crate::geometry::ElementDofVector;
use crate::Vec3;
use std::collections::HashSet;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchConfig {
    /// Safety margin on the stage-1 sphere radius.
    pub k_rs: f64,
    /// Safety margin on the stage-2 cylinder radius.
    pub k_cyl: f64,
    /// Maximal admissible chord-tangent angle per segment, radians.
    pub beta_max: f64,
    /// Subdivision cap; exceeding it signals pathological deformation.
    pub max_segments: usize,
    /// Extra proximity cutoff beyond the radii sum (penalty support gap).
    pub cutoff_gap: f64,
    /// Shifting angles for classification, radians.
    pub alpha1: f64,
    pub alpha2: f64,
}

impl SearchConfig {
    pub fn new(alpha1: f64, alpha2: f64, cutoff_gap: f64) -> Self {
        Self {
            k_rs: 0.1,
            k_cyl: 1.1,
            beta_max: 1.0f64.to_radians(),
            max_segments: 64,
            cutoff_gap,
            alpha1,
            alpha2,
        }
    }
}

/// Stage-1 bound: sphere at the nodal-position midpoint with a margin on the
/// half chord. Valid while element deformation stays below a half circle.
pub fn element_sphere(e: &ElementDofVector, k_rs: f64) -> (Vec3, f64) {
    let p1 = e.position1();
    let p2 = e.position2();
    (0.5 * (p1 + p2), (1.0 + k_rs) * 0.5 * (p2 - p1).norm())
}

const LEAF_CAPACITY: usize = 8;
const MAX_DEPTH: usize = 12;

struct OctreeNode {
    min: Vec3,
    max: Vec3,
    entries: Vec<usize>,
    children: Option<Box<[OctreeNode; 8]>>,
}

impl OctreeNode {
    fn overlaps(&self, center: &Vec3, radius: f64) -> bool {
        let mut d2 = 0.0;
        for k in 0..3 {
            let v = center[k].clamp(self.min[k], self.max[k]) - center[k];
            d2 += v * v;
        }
        d2 <= radius * radius
    }

    fn insert(&mut self, id: usize, spheres: &[(Vec3, f64)], depth: usize) {
        if let Some(children) = &mut self.children {
            let (c, r) = spheres[id];
            for child in children.iter_mut() {
                if child.overlaps(&c, r) {
                    child.insert(id, spheres, depth + 1);
                }
            }
            return;
        }
        self.entries.push(id);
        if self.entries.len() > LEAF_CAPACITY && depth < MAX_DEPTH {
            let mid = 0.5 * (self.min + self.max);
            let mut children: Vec<OctreeNode> = Vec::with_capacity(8);
            for oct in 0..8 {
                let mut lo = self.min;
                let mut hi = mid;
                for k in 0..3 {
                    if oct & (1 << k) != 0 {
                        lo[k] = mid[k];
                        hi[k] = self.max[k];
                    }
                }
                children.push(OctreeNode {
                    min: lo,
                    max: hi,
                    entries: Vec::new(),
                    children: None,
                });
            }
            let children: Box<[OctreeNode; 8]> =
                Box::new(children.try_into().map_err(|_| ()).unwrap());
            let entries = std::mem::take(&mut self.entries);
            self.children = Some(children);
            for e in entries {
                self.insert(e, spheres, depth);
            }
        }
    }

    fn collect_pairs(&self, out: &mut HashSet<(usize, usize)>) {
        if let Some(children) = &self.children {
            for child in children.iter() {
                child.collect_pairs(out);
            }
            return;
        }
        for (a, &i) in self.entries.iter().enumerate() {
            for &j in &self.entries[a + 1..] {
                out.insert((i.min(j), i.max(j)));
            }
        }
    }
}

/// Octree stage: all element pairs with intersecting bounding spheres,
/// excluding pairs flagged adjacent (sharing a node).
pub fn stage1_pairs(
    elements: &[ElementDofVector],
    k_rs: f64,
    adjacent: &dyn Fn(usize, usize) -> bool,
) -> Vec<(usize, usize)> {
    if elements.len() < 2 {
        return Vec::new();
    }
    let spheres: Vec<(Vec3, f64)> = elements.iter().map(|e| element_sphere(e, k_rs)).collect();
    let mut min = Vec3::repeat(f64::INFINITY);
    let mut max = Vec3::repeat(f64::NEG_INFINITY);
    for (c, r) in &spheres {
        for k in 0..3 {
            min[k] = min[k].min(c[k] - r);
            max[k] = max[k].max(c[k] + r);
        }
    }
    let mut root = OctreeNode {
        min,
        max,
        entries: Vec::new(),
        children: None,
    };
    for id in 0..spheres.len() {
        root.insert(id, &spheres, 0);
    }
    let mut raw = HashSet::new();
    root.collect_pairs(&mut raw);
    let mut pairs: Vec<(usize, usize)> = raw
        .into_iter()
        .filter(|&(i, j)| {
            let (ci, ri) = spheres[i];
            let (cj, rj) = spheres[j];
            (ci - cj).norm() <= ri + rj && !adjacent(i, j)
        })
        .collect();
    pairs.sort_unstable();
    pairs
}

/// One straight search segment on an element centerline.
#[derive(Debug, Clone)]
pub struct SearchSegment {
    pub element: usize,
    pub index: usize,
    pub n_seg: usize,
    pub p0: Vec3,
    pub p1: Vec3,
    /// Unit chord axis.
    pub axis: Vec3,
    pub half_len: f64,
    pub r_cyl: f64,
    /// Element coordinates of the segment ends.
    pub xi0: f64,
    pub xi1: f64,
}

fn chord_tangent_angle(chord: &Vec3, tangent: &Vec3) -> f64 {
    let c = chord.dot(tangent) / (chord.norm() * tangent.norm());
    c.clamp(-1.0, 1.0).acos()
}

/// Subdivide an element into straight segments, doubling the count until the
/// chord-tangent angle at every segment end is below `beta_max`.
pub fn build_segments(
    element: usize,
    e: &ElementDofVector,
    cfg: &SearchConfig,
) -> Result<Vec<SearchSegment>> {
    let mut n_seg = 1usize;
    loop {
        let mut worst = 0.0f64;
        let mut segments = Vec::with_capacity(n_seg);
        for i in 0..n_seg {
            let xi0 = -1.0 + 2.0 * i as f64 / n_seg as f64;
            let xi1 = -1.0 + 2.0 * (i + 1) as f64 / n_seg as f64;
            let p0 = crate::geometry::interpolate(e, xi0, 0)?;
            let p1 = crate::geometry::interpolate(e, xi1, 0)?;
            let chord = p1 - p0;
            let len = chord.norm();
            if len == 0.0 {
                return Err(Error::DegenerateElement(format!(
                    "zero-length search segment on element {element}"
                )));
            }
            let t0 = crate::geometry::interpolate(e, xi0, 1)?;
            let t1 = crate::geometry::interpolate(e, xi1, 1)?;
            worst = worst
                .max(chord_tangent_angle(&chord, &t0))
                .max(chord_tangent_angle(&chord, &t1));
            segments.push(SearchSegment {
                element,
                index: i,
                n_seg,
                p0,
                p1,
                axis: chord / len,
                half_len: 0.5 * len,
                r_cyl: cfg.k_cyl * cfg.beta_max.tan() * 0.5 * len,
                xi0,
                xi1,
            });
        }
        if worst < cfg.beta_max {
            return Ok(segments);
        }
        n_seg *= 2;
        if n_seg > cfg.max_segments {
            return Err(Error::DegenerateElement(format!(
                "element {element} needs more than {} search segments (end angle {:.2} deg)",
                cfg.max_segments,
                worst.to_degrees()
            )));
        }
    }
}

/// Closest points of two segments p0+s(p1-p0), q0+t(q1-q0), s,t in [0,1].
fn segment_segment(p0: &Vec3, p1: &Vec3, q0: &Vec3, q1: &Vec3) -> (f64, f64, f64) {
    let d1 = p1 - p0;
    let d2 = q1 - q0;
    let r = p0 - q0;
    let a = d1.dot(&d1);
    let e = d2.dot(&d2);
    let f = d2.dot(&r);
    let c = d1.dot(&r);
    let b = d1.dot(&d2);
    let denom = a * e - b * b;
    let mut s = if denom > 1e-14 * a * e {
        ((b * f - c * e) / denom).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let mut t = if e > 0.0 { (b * s + f) / e } else { 0.0 };
    if t < 0.0 {
        t = 0.0;
        s = if a > 0.0 { (-c / a).clamp(0.0, 1.0) } else { 0.0 };
    } else if t > 1.0 {
        t = 1.0;
        s = if a > 0.0 { ((b - c) / a).clamp(0.0, 1.0) } else { 0.0 };
    }
    let dist = ((p0 + s * d1) - (q0 + t * d2)).norm();
    (s, t, dist)
}

/// Aggregated stage-2 result for one element pair.
#[derive(Debug, Clone)]
pub struct ContactCandidate {
    pub elem1: usize,
    pub elem2: usize,
    /// Intersection angle of the closest segment pair, radians.
    pub gamma: f64,
    pub point: bool,
    pub line: bool,
    /// Element-coordinate warm start at the closest segment pair.
    pub warm_xi: f64,
    pub warm_eta: f64,
}

/// Cylinder-proximity test and angle classification on prebuilt segments.
pub fn stage2_candidates(
    elem1: usize,
    elem2: usize,
    segs1: &[SearchSegment],
    segs2: &[SearchSegment],
    radius1: f64,
    radius2: f64,
    cfg: &SearchConfig,
) -> Option<ContactCandidate> {
    let mut best: Option<(f64, f64, f64, f64)> = None; // dist, gamma, xi, eta
    let mut point = false;
    let mut line = false;
    for s1 in segs1 {
        for s2 in segs2 {
            let cutoff = radius1 + radius2 + cfg.cutoff_gap + s1.r_cyl + s2.r_cyl;
            let (u, v, dist) = segment_segment(&s1.p0, &s1.p1, &s2.p0, &s2.p1);
            if dist > cutoff {
                continue;
            }
            let gamma = s1.axis.dot(&s2.axis).abs().clamp(0.0, 1.0).acos();
            point |= gamma > cfg.alpha1 - 2.0 * cfg.beta_max;
            line |= gamma < cfg.alpha2 + 2.0 * cfg.beta_max;
            let xi = s1.xi0 + u * (s1.xi1 - s1.xi0);
            let eta = s2.xi0 + v * (s2.xi1 - s2.xi0);
            if best.map_or(true, |(d, ..)| dist < d) {
                best = Some((dist, gamma, xi, eta));
            }
        }
    }
    best.map(|(_, gamma, xi, eta)| ContactCandidate {
        elem1,
        elem2,
        gamma,
        point,
        line,
        warm_xi: xi,
        warm_eta: eta,
    })
}

/// Full two-stage search over a scene.
pub fn find_candidates(
    elements: &[ElementDofVector],
    radii: &[f64],
    cfg: &SearchConfig,
    adjacent: &dyn Fn(usize, usize) -> bool,
) -> Result<Vec<ContactCandidate>> {
    let pairs = stage1_pairs(elements, cfg.k_rs, adjacent);
    let mut segments: Vec<Option<Vec<SearchSegment>>> = vec![None; elements.len()];
    let mut out = Vec::new();
    for (i, j) in pairs {
        if segments[i].is_none() {
            segments[i] = Some(build_segments(i, &elements[i], cfg)?);
        }
        if segments[j].is_none() {
            segments[j] = Some(build_segments(j, &elements[j], cfg)?);
        }
        if let Some(c) = stage2_candidates(
            i,
            j,
            segments[i].as_ref().unwrap(),
            segments[j].as_ref().unwrap(),
            radii[i],
            radii[j],
            cfg,
        ) {
            out.push(c);
        }
    }
    Ok(out)
}
