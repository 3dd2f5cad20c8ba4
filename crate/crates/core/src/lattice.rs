//! Parametric lattice worm: vertical structural rods on a circle, diagonal
//! muscle rods between neighbouring columns, and the target prism.
//!
//! Layout conventions:
//! - structural rod `j` stands at angle `2 pi j / n_columns`, base clamped at z = 0;
//! - muscle `(column c, level k)` runs from column `c` at level `k` to column
//!   `(c + 1) mod n_columns` at level `k + 1`, and has id `k * n_columns + c`;
//! - level `k` sits on structural node `round(k * structural_elements / n_levels)`;
//! - the terminus is the centroid of the structural rods' top nodes.

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{Error, Result};
use crate::rod::{Boundary, Connection, MaterialParams, NodeRef, RodState, RodSystem, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatticeSpec {
    pub height: f64,
    pub diameter: f64,
    pub n_columns: usize,
    pub n_levels: usize,
    pub structural_elements: usize,
    pub muscle_elements: usize,
    pub structural_radius: f64,
    pub muscle_radius: f64,
    pub structural_material: MaterialParams,
    pub muscle_material: MaterialParams,
    pub connection_stiffness: f64,
    pub connection_damping: f64,
}

impl Default for LatticeSpec {
    fn default() -> Self {
        Self {
            height: 0.100,
            diameter: 0.075,
            n_columns: 6,
            n_levels: 7,
            structural_elements: 40,
            muscle_elements: 2,
            structural_radius: 0.010,
            muscle_radius: 0.005,
            structural_material: MaterialParams::structure(),
            muscle_material: MaterialParams::muscle(),
            connection_stiffness: 100.0,
            connection_damping: 0.0,
        }
    }
}

impl LatticeSpec {
    pub fn n_muscles(&self) -> usize {
        self.n_columns * self.n_levels
    }

    pub fn n_connections(&self) -> usize {
        2 * self.n_muscles()
    }

    pub fn n_nodes(&self) -> usize {
        self.n_columns * (self.structural_elements + 1) + self.n_muscles() * (self.muscle_elements + 1)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("height", self.height),
            ("diameter", self.diameter),
            ("structural_radius", self.structural_radius),
            ("muscle_radius", self.muscle_radius),
            ("connection_stiffness", self.connection_stiffness),
        ] {
            if !(v > 0.0) {
                return Err(Error::invalid(format!("{name} must be > 0")));
            }
        }
        if !(self.connection_damping >= 0.0) {
            return Err(Error::invalid("connection_damping must be >= 0"));
        }
        if self.n_columns == 0 || self.n_levels == 0 {
            return Err(Error::invalid("n_columns and n_levels must be >= 1"));
        }
        if self.structural_elements == 0 || self.muscle_elements == 0 {
            return Err(Error::invalid("element counts must be >= 1"));
        }
        self.structural_material.validate()?;
        self.muscle_material.validate()
    }

    /// Structural node index that hosts level `k` (0..=n_levels).
    pub fn level_node(&self, level: usize) -> usize {
        ((level * self.structural_elements) as f64 / self.n_levels as f64).round() as usize
    }

    fn column_angle(&self, column: usize) -> f64 {
        std::f64::consts::TAU * column as f64 / self.n_columns as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MuscleLayout {
    pub muscle_id: usize,
    pub column: usize,
    pub level: usize,
    /// Index of the muscle rod in the rod system.
    pub rod: usize,
    /// Structural node joined to the muscle's first node.
    pub attach_a: NodeRef,
    /// Structural node joined to the muscle's last node.
    pub attach_b: NodeRef,
    pub unwrapped_2d: [[f64; 2]; 2],
}

#[derive(Debug, Clone)]
pub struct LatticeSystem {
    pub spec: LatticeSpec,
    pub system: RodSystem,
    pub structural_rods: Vec<usize>,
    pub muscles: Vec<MuscleLayout>,
}

impl LatticeSystem {
    pub fn terminus(&self) -> Vec3 {
        terminus_of(&self.system, &self.structural_rods)
    }

    /// Both end nodes of every muscle rod, muscle-id order.
    pub fn muscle_end_nodes(&self) -> Vec<NodeRef> {
        self.muscles
            .iter()
            .flat_map(|m| {
                let last = self.system.rod(m.rod).n_nodes() - 1;
                [NodeRef { rod: m.rod, node: 0 }, NodeRef { rod: m.rod, node: last }]
            })
            .collect()
    }

    pub fn all_nodes(&self) -> Vec<NodeRef> {
        self.system
            .rods()
            .iter()
            .enumerate()
            .flat_map(|(r, rod)| (0..rod.n_nodes()).map(move |n| NodeRef { rod: r, node: n }))
            .collect()
    }

    /// Axial strain of each muscle rod in muscle-id order.
    pub fn muscle_strains(&self) -> Vec<f64> {
        self.muscles.iter().map(|m| self.system.rod(m.rod).axial_strain()).collect()
    }
}

pub fn terminus_of(system: &RodSystem, structural_rods: &[usize]) -> Vec3 {
    let sum: Vec3 = structural_rods.iter().map(|&r| system.rod(r).last_node()).sum();
    sum / structural_rods.len() as f64
}

pub fn build_lattice(spec: &LatticeSpec) -> Result<LatticeSystem> {
    spec.validate()?;
    if spec.n_columns < 2 {
        return Err(Error::Construction {
            muscle: 0,
            reason: "a muscle cannot span a single column to itself".into(),
        });
    }
    let radius = 0.5 * spec.diameter;
    let mut rods = Vec::with_capacity(spec.n_columns + spec.n_muscles());
    for j in 0..spec.n_columns {
        let theta = spec.column_angle(j);
        let radial = Vec3::new(theta.cos(), theta.sin(), 0.0);
        let rod = RodState::straight(
            radial * radius,
            Vec3::z(),
            spec.height,
            spec.structural_elements,
            spec.structural_radius,
            spec.structural_material,
            radial,
        )?
        .with_boundary(Boundary::ClampedBase);
        rods.push(rod);
    }
    let structural_rods: Vec<usize> = (0..spec.n_columns).collect();

    let mut muscles = Vec::with_capacity(spec.n_muscles());
    let mut connections = Vec::with_capacity(spec.n_connections());
    for level in 0..spec.n_levels {
        for column in 0..spec.n_columns {
            let muscle_id = level * spec.n_columns + column;
            let next_column = (column + 1) % spec.n_columns;
            let attach_a = NodeRef { rod: column, node: spec.level_node(level) };
            let attach_b = NodeRef { rod: next_column, node: spec.level_node(level + 1) };
            if attach_a.node == attach_b.node {
                return Err(Error::Construction {
                    muscle: muscle_id,
                    reason: format!(
                        "levels {level} and {} share structural node {}",
                        level + 1,
                        attach_a.node
                    ),
                });
            }
            let pa = rods[attach_a.rod].node_positions[attach_a.node];
            let pb = rods[attach_b.rod].node_positions[attach_b.node];
            let span = pb - pa;
            if span.norm() < 1e-12 {
                return Err(Error::Construction {
                    muscle: muscle_id,
                    reason: "coincident attachment nodes".into(),
                });
            }
            let mid = 0.5 * (pa + pb);
            let outward = Vec3::new(mid.x, mid.y, 0.0);
            let straight = RodState::straight(
                pa,
                span,
                span.norm(),
                spec.muscle_elements,
                spec.muscle_radius,
                spec.muscle_material,
                outward,
            )?;
            let mut ends = straight.node_positions;
            ends[0] = pa;
            ends[spec.muscle_elements] = pb;
            let muscle = RodState::from_nodes(ends, straight.directors, spec.muscle_radius, spec.muscle_material)?;
            let rod_index = rods.len();
            rods.push(muscle);
            let last = spec.muscle_elements;
            for (muscle_node, structure) in [(0, attach_a), (last, attach_b)] {
                connections.push(Connection {
                    a: NodeRef { rod: rod_index, node: muscle_node },
                    b: structure,
                    stiffness: spec.connection_stiffness,
                    damping: spec.connection_damping,
                });
            }
            let x = column as f64;
            let y = level as f64;
            muscles.push(MuscleLayout {
                muscle_id,
                column,
                level,
                rod: rod_index,
                attach_a,
                attach_b,
                unwrapped_2d: [[x, y], [x + 1.0, y + 1.0]],
            });
        }
    }
    let system = RodSystem::new(rods, connections)?;
    Ok(LatticeSystem { spec: *spec, system, structural_rods, muscles })
}

/// Axis-aligned prism whose corners are the reaching targets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetPrism {
    pub center: Vec3,
    pub half_extents: Vec3,
}

impl TargetPrism {
    /// Centered on the undeformed terminus with half-extents (30, 30, 20) mm.
    pub fn default_for(spec: &LatticeSpec) -> Self {
        Self { center: Vec3::new(0.0, 0.0, spec.height), half_extents: Vec3::new(0.03, 0.03, 0.02) }
    }

    pub fn validate(&self) -> Result<()> {
        if self.half_extents.iter().any(|h| !(*h > 0.0)) {
            return Err(Error::invalid("target half_extents must be componentwise > 0"));
        }
        Ok(())
    }

    /// Position of corner `index` (1..=8).
    pub fn corner(&self, index: usize) -> Result<Vec3> {
        self.validate()?;
        if !(1..=8).contains(&index) {
            return Err(Error::invalid(format!("corner index {index} outside 1..=8")));
        }
        // 1-4: +z (far) face, 5-8: -z (near) face; each face counter-clockwise from (+x, +y)
        const SIGNS: [(f64, f64); 4] = [(1.0, 1.0), (-1.0, 1.0), (-1.0, -1.0), (1.0, -1.0)];
        let (sx, sy) = SIGNS[(index - 1) % 4];
        let sz = if index <= 4 { 1.0 } else { -1.0 };
        let h = self.half_extents;
        Ok(self.center + Vec3::new(sx * h.x, sy * h.y, sz * h.z))
    }
}

/// One corner of a prism, as selected for a run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetSpec {
    pub center: Vec3,
    pub half_extents: Vec3,
    pub corner_index: usize,
}

impl TargetSpec {
    pub fn position(&self) -> Result<Vec3> {
        TargetPrism { center: self.center, half_extents: self.half_extents }.corner(self.corner_index)
    }
}

/// All eight corners, index 1 first.
pub fn target_positions(prism: &TargetPrism) -> Result<[Vec3; 8]> {
    let mut out = [Vec3::zeros(); 8];
    for (i, slot) in out.iter_mut().enumerate() {
        *slot = prism.corner(i + 1)?;
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanarMuscle {
    pub muscle_id: usize,
    pub column: usize,
    pub level: usize,
    pub from: [f64; 2],
    pub to: [f64; 2],
}

/// The lattice cut along the seam next to column 0 and laid flat.
///
/// Structural columns become vertical lines at `x = 0..=n_columns`, where the
/// last line is column 0's image across the seam.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanarLattice {
    pub n_columns: usize,
    pub n_levels: usize,
    pub structure_lines: Vec<[[f64; 2]; 2]>,
    pub muscles: Vec<PlanarMuscle>,
}

pub fn unwrap_2d(layout: &[MuscleLayout]) -> PlanarLattice {
    let n_columns = layout.iter().map(|m| m.column + 1).max().unwrap_or(0);
    let n_levels = layout.iter().map(|m| m.level + 1).max().unwrap_or(0);
    let top = n_levels as f64;
    let structure_lines = (0..=n_columns).map(|c| [[c as f64, 0.0], [c as f64, top]]).collect();
    let mut muscles: Vec<PlanarMuscle> = layout
        .iter()
        .map(|m| {
            let x = m.column as f64;
            let y = m.level as f64;
            PlanarMuscle {
                muscle_id: m.muscle_id,
                column: m.column,
                level: m.level,
                from: [x, y],
                to: [x + 1.0, y + 1.0],
            }
        })
        .collect();
    muscles.sort_by_key(|m| m.muscle_id);
    PlanarLattice { n_columns, n_levels, structure_lines, muscles }
}

fn v3(v: &Vec3) -> [f64; 3] {
    [v.x, v.y, v.z]
}

/// Structured dump of the built topology and target set.
pub fn describe(lattice: &LatticeSystem, prism: &TargetPrism) -> Result<serde_json::Value> {
    let targets = target_positions(prism)?;
    let rods: Vec<_> = lattice
        .system
        .rods()
        .iter()
        .enumerate()
        .map(|(i, r)| {
            json!({
                "id": i,
                "kind": if lattice.structural_rods.contains(&i) { "structural" } else { "muscle" },
                "n_elements": r.n_elements(),
                "radius_m": r.radius,
                "rest_length_m": r.rest_length(),
                "start_m": v3(&r.first_node()),
                "end_m": v3(&r.last_node()),
                "clamped_base": r.boundary == Boundary::ClampedBase,
            })
        })
        .collect();
    Ok(json!({
        "format": "latticeworm-topology v1",
        "spec": lattice.spec,
        "counts": {
            "structural_rods": lattice.structural_rods.len(),
            "muscle_rods": lattice.muscles.len(),
            "connections": lattice.system.connections().len(),
            "nodes": lattice.system.rods().iter().map(RodState::n_nodes).sum::<usize>(),
        },
        "rods": rods,
        "connections": lattice.system.connections(),
        "muscles": lattice.muscles,
        "terminus_m": v3(&lattice.terminus()),
        "stable_dt_estimate_s": lattice.system.stable_dt_estimate(),
        "targets": targets
            .iter()
            .enumerate()
            .map(|(i, t)| json!({ "corner": i + 1, "position_m": v3(t) }))
            .collect::<Vec<_>>(),
        "unwrapped": unwrap_2d(&lattice.muscles),
    }))
}
