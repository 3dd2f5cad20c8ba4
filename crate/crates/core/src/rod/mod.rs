//! Discrete Cosserat rods and assemblies of them.
//!
//! Each rod carries `n + 1` nodes and `n` elements. Elements own an orthonormal
//! director frame (rows `d1, d2, d3`) and a material-frame angular velocity.
//! Internal loads are the exact gradient of the discrete elastic energy
//!
//! ```text
//! U = sum_e  l0/2 (sigma - sigma0)^T S (sigma - sigma0)
//!   + sum_k  D0/2 (kappa - kappa0)^T B (kappa - kappa0)
//! sigma_e = Q_e (x_{e+1} - x_e) / l0_e - e3
//! kappa_k = log(Q_{k-1} Q_k^T) / D0_k
//! ```
//!
//! with `S = diag(4GA/3, 4GA/3, EA)` and `B = diag(EI1, EI2, GI3)` for a
//! circular cross-section. Using the exact gradient makes the energy audit in
//! [`RodSystem::energy`] consistent with the forces the integrator applies.

mod integrate;
mod loads;
pub mod so3;

use std::io::Write;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use loads::{apply_muscle_contraction, compute_internal_loads, connection_force};

pub type Vec3 = Vector3<f64>;
pub type Frame = Matrix3<f64>;

/// Shear correction factor for a circular cross-section.
const SHEAR_FACTOR: f64 = 4.0 / 3.0;
const STABLE_DT_SAFETY: f64 = 0.1;
pub const STANDARD_GRAVITY: f64 = 9.80665;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaterialParams {
    pub youngs_modulus: f64,
    pub poisson_ratio: f64,
    pub density: f64,
}

impl MaterialParams {
    pub fn new(youngs_modulus: f64, poisson_ratio: f64, density: f64) -> Result<Self> {
        let params = Self { youngs_modulus, poisson_ratio, density };
        params.validate()?;
        Ok(params)
    }

    /// Structural rods: 70 kPa, nu = 0.5, 1070 kg/m^3.
    pub fn structure() -> Self {
        Self { youngs_modulus: 70e3, poisson_ratio: 0.5, density: 1070.0 }
    }

    /// Muscle rods: 25 kPa, nu = 0.5, 1060 kg/m^3.
    pub fn muscle() -> Self {
        Self { youngs_modulus: 25e3, poisson_ratio: 0.5, density: 1060.0 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.youngs_modulus > 0.0) {
            return Err(Error::invalid("youngs_modulus must be > 0"));
        }
        if !(self.density > 0.0) {
            return Err(Error::invalid("density must be > 0"));
        }
        if !(0.0..=0.5).contains(&self.poisson_ratio) {
            return Err(Error::invalid("poisson_ratio must lie in [0, 0.5]"));
        }
        Ok(())
    }

    pub fn shear_modulus(&self) -> f64 {
        self.youngs_modulus / (2.0 * (1.0 + self.poisson_ratio))
    }

    pub fn wave_speed(&self) -> f64 {
        (self.youngs_modulus / self.density).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Boundary {
    Free,
    /// First node and first element frame held fixed.
    ClampedBase,
}

#[derive(Debug, Clone)]
pub struct RodState {
    pub node_positions: Vec<Vec3>,
    pub node_velocities: Vec<Vec3>,
    pub directors: Vec<Frame>,
    pub angular_velocities: Vec<Vec3>,
    pub rest_lengths: Vec<f64>,
    pub rest_directors: Vec<Frame>,
    pub radius: f64,
    pub material: MaterialParams,
    pub boundary: Boundary,
    rest_shear: Vec<Vec3>,
    rest_curvature: Vec<Vec3>,
    rest_voronoi: Vec<f64>,
}

impl RodState {
    /// Builds a rod whose current configuration is its rest configuration.
    pub fn from_nodes(
        positions: Vec<Vec3>,
        directors: Vec<Frame>,
        radius: f64,
        material: MaterialParams,
    ) -> Result<Self> {
        material.validate()?;
        if positions.len() < 2 {
            return Err(Error::invalid("a rod needs at least two nodes"));
        }
        if directors.len() + 1 != positions.len() {
            return Err(Error::invalid("director count must equal element count"));
        }
        if !(radius > 0.0) {
            return Err(Error::invalid("rod radius must be > 0"));
        }
        let rest_lengths: Vec<f64> = positions.windows(2).map(|w| (w[1] - w[0]).norm()).collect();
        if rest_lengths.iter().any(|&l| !(l > 0.0)) {
            return Err(Error::invalid("rest lengths must be > 0"));
        }
        for q in &directors {
            if so3::orthonormality_error(q) > 1e-9 {
                return Err(Error::invalid("director frames must be orthonormal"));
            }
        }
        let e3 = Vec3::z();
        let rest_shear = directors
            .iter()
            .zip(positions.windows(2))
            .zip(&rest_lengths)
            .map(|((q, w), l0)| q * (w[1] - w[0]) / *l0 - e3)
            .collect();
        let rest_voronoi: Vec<f64> = rest_lengths.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
        let rest_curvature = directors
            .windows(2)
            .zip(&rest_voronoi)
            .map(|(q, d0)| so3::log(&(q[0] * q[1].transpose())) / *d0)
            .collect();
        let n = directors.len();
        Ok(Self {
            node_velocities: vec![Vec3::zeros(); n + 1],
            angular_velocities: vec![Vec3::zeros(); n],
            rest_directors: directors.clone(),
            node_positions: positions,
            directors,
            rest_lengths,
            radius,
            material,
            boundary: Boundary::Free,
            rest_shear,
            rest_curvature,
            rest_voronoi,
        })
    }

    /// A straight rod from `start` along `direction`; `normal_hint` fixes `d1`.
    pub fn straight(
        start: Vec3,
        direction: Vec3,
        length: f64,
        n_elements: usize,
        radius: f64,
        material: MaterialParams,
        normal_hint: Vec3,
    ) -> Result<Self> {
        if n_elements == 0 {
            return Err(Error::invalid("a rod needs at least one element"));
        }
        if !(length > 0.0) || !(direction.norm() > 0.0) {
            return Err(Error::invalid("rod length and direction must be non-degenerate"));
        }
        let d3 = direction.normalize();
        let frame = frame_from_tangent(&d3, &normal_hint);
        let step = d3 * (length / n_elements as f64);
        let positions = (0..=n_elements).map(|i| start + step * i as f64).collect();
        Self::from_nodes(positions, vec![frame; n_elements], radius, material)
    }

    pub fn with_boundary(mut self, boundary: Boundary) -> Self {
        self.boundary = boundary;
        self
    }

    pub fn n_elements(&self) -> usize {
        self.directors.len()
    }

    pub fn n_nodes(&self) -> usize {
        self.node_positions.len()
    }

    pub fn area(&self) -> f64 {
        std::f64::consts::PI * self.radius * self.radius
    }

    /// `(I1, I2, I3)` of the circular cross-section.
    pub fn second_moments(&self) -> Vec3 {
        let i = std::f64::consts::PI * self.radius.powi(4) / 4.0;
        Vec3::new(i, i, 2.0 * i)
    }

    pub fn shear_stretch_rigidity(&self) -> Vec3 {
        let a = self.area();
        let g = self.material.shear_modulus();
        Vec3::new(SHEAR_FACTOR * g * a, SHEAR_FACTOR * g * a, self.material.youngs_modulus * a)
    }

    pub fn bend_twist_rigidity(&self) -> Vec3 {
        let i = self.second_moments();
        let e = self.material.youngs_modulus;
        Vec3::new(e * i.x, e * i.y, self.material.shear_modulus() * i.z)
    }

    pub fn rest_length(&self) -> f64 {
        self.rest_lengths.iter().sum()
    }

    pub fn total_mass(&self) -> f64 {
        self.material.density * self.area() * self.rest_length()
    }

    /// Lumped node masses from half of each adjacent element.
    pub fn node_masses(&self) -> Vec<f64> {
        let rho_a = self.material.density * self.area();
        let mut m = vec![0.0; self.n_nodes()];
        for (e, l0) in self.rest_lengths.iter().enumerate() {
            m[e] += 0.5 * rho_a * l0;
            m[e + 1] += 0.5 * rho_a * l0;
        }
        m
    }

    /// Diagonal of the element rotational inertia in the material frame.
    pub fn element_inertia(&self, e: usize) -> Vec3 {
        self.second_moments() * (self.material.density * self.rest_lengths[e])
    }

    pub fn current_length(&self) -> f64 {
        self.node_positions.windows(2).map(|w| (w[1] - w[0]).norm()).sum()
    }

    /// Axial strain of the centerline, `(L - L0) / L0`.
    pub fn axial_strain(&self) -> f64 {
        let l0 = self.rest_length();
        (self.current_length() - l0) / l0
    }

    pub fn first_node(&self) -> Vec3 {
        self.node_positions[0]
    }

    pub fn last_node(&self) -> Vec3 {
        self.node_positions[self.n_nodes() - 1]
    }

    pub fn is_finite(&self) -> bool {
        self.node_positions.iter().all(|v| v.iter().all(|c| c.is_finite()))
            && self.node_velocities.iter().all(|v| v.iter().all(|c| c.is_finite()))
            && self.directors.iter().all(|q| q.iter().all(|c| c.is_finite()))
            && self.angular_velocities.iter().all(|v| v.iter().all(|c| c.is_finite()))
    }

    pub fn max_frame_error(&self) -> f64 {
        self.directors.iter().map(so3::orthonormality_error).fold(0.0, f64::max)
    }

    pub fn linear_momentum(&self) -> Vec3 {
        self.node_masses()
            .iter()
            .zip(&self.node_velocities)
            .fold(Vec3::zeros(), |acc, (m, v)| acc + v * *m)
    }

    /// Material-frame shear/stretch strain of element `e` relative to rest.
    pub fn shear_strain(&self, e: usize) -> Vec3 {
        let t = (self.node_positions[e + 1] - self.node_positions[e]) / self.rest_lengths[e];
        self.directors[e] * t - Vec3::z() - self.rest_shear[e]
    }

    /// Bend/twist curvature at internal node `k` (1..n) relative to rest.
    pub fn curvature(&self, k: usize) -> Vec3 {
        let phi = so3::log(&(self.directors[k - 1] * self.directors[k].transpose()));
        phi / self.rest_voronoi[k - 1] - self.rest_curvature[k - 1]
    }

    /// Internal bending/twisting couple at internal node `k`, material frame.
    pub fn internal_couple(&self, k: usize) -> Vec3 {
        self.bend_twist_rigidity().component_mul(&self.curvature(k))
    }

    pub fn elastic_energy(&self) -> f64 {
        let s = self.shear_stretch_rigidity();
        let b = self.bend_twist_rigidity();
        let stretch: f64 = (0..self.n_elements())
            .map(|e| {
                let sigma = self.shear_strain(e);
                0.5 * self.rest_lengths[e] * sigma.dot(&s.component_mul(&sigma))
            })
            .sum();
        let bend: f64 = (1..self.n_elements())
            .map(|k| {
                let kappa = self.curvature(k);
                0.5 * self.rest_voronoi[k - 1] * kappa.dot(&b.component_mul(&kappa))
            })
            .sum();
        stretch + bend
    }

    pub fn kinetic_energy(&self) -> f64 {
        let translational: f64 = self
            .node_masses()
            .iter()
            .zip(&self.node_velocities)
            .map(|(m, v)| 0.5 * m * v.norm_squared())
            .sum();
        let rotational: f64 = self
            .angular_velocities
            .iter()
            .enumerate()
            .map(|(e, w)| 0.5 * w.dot(&self.element_inertia(e).component_mul(w)))
            .sum();
        translational + rotational
    }
}

/// Orthonormal frame with `d3 = tangent` and `d1` as close to `hint` as possible.
pub fn frame_from_tangent(tangent: &Vec3, hint: &Vec3) -> Frame {
    let d3 = tangent.normalize();
    let mut d1 = hint - d3 * d3.dot(hint);
    if d1.norm() < 1e-8 {
        let fallback = if d3.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
        d1 = fallback - d3 * d3.dot(&fallback);
    }
    let d1 = d1.normalize();
    let d2 = d3.cross(&d1);
    Frame::from_rows(&[d1.transpose(), d2.transpose(), d3.transpose()])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NodeRef {
    pub rod: usize,
    pub node: usize,
}

/// Zero-rest-length spring-damper between two nodes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Connection {
    pub a: NodeRef,
    pub b: NodeRef,
    pub stiffness: f64,
    pub damping: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub dt: f64,
    /// Translational damping per rod, N s/m, spread over nodes by rest-length fraction.
    pub damping_coefficient: f64,
    pub substeps_per_control: usize,
    pub gravity: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self { dt: 1e-5, damping_coefficient: 0.035, substeps_per_control: 10_000, gravity: false }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) {
            return Err(Error::invalid("dt must be > 0"));
        }
        if self.substeps_per_control == 0 {
            return Err(Error::invalid("substeps_per_control must be >= 1"));
        }
        if !(self.damping_coefficient >= 0.0) {
            return Err(Error::invalid("damping_coefficient must be >= 0"));
        }
        Ok(())
    }
}

/// A contractile force pair applied to the end nodes of a rod.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Actuation {
    pub rod: usize,
    pub force: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct EnergyBreakdown {
    pub kinetic: f64,
    pub elastic: f64,
    pub connections: f64,
    pub gravity: f64,
}

impl EnergyBreakdown {
    pub fn total(&self) -> f64 {
        self.kinetic + self.elastic + self.connections + self.gravity
    }
}

/// Per-rod force and torque accumulators.
#[derive(Debug, Clone, Default)]
pub(crate) struct Loads {
    pub forces: Vec<Vec<Vec3>>,
    pub torques: Vec<Vec<Vec3>>,
}

impl Loads {
    fn for_rods(rods: &[RodState]) -> Self {
        Self {
            forces: rods.iter().map(|r| vec![Vec3::zeros(); r.n_nodes()]).collect(),
            torques: rods.iter().map(|r| vec![Vec3::zeros(); r.n_elements()]).collect(),
        }
    }

    fn clear(&mut self) {
        self.forces.iter_mut().flatten().for_each(|f| *f = Vec3::zeros());
        self.torques.iter_mut().flatten().for_each(|t| *t = Vec3::zeros());
    }
}

/// A collection of rods joined by connections, advanced as one system.
#[derive(Debug, Clone)]
pub struct RodSystem {
    rods: Vec<RodState>,
    connections: Vec<Connection>,
    masses: Vec<Vec<f64>>,
    time: f64,
    unstable: bool,
    loads: Loads,
    loads_valid: bool,
}

impl RodSystem {
    pub fn new(rods: Vec<RodState>, connections: Vec<Connection>) -> Result<Self> {
        for (i, c) in connections.iter().enumerate() {
            for end in [c.a, c.b] {
                let ok = rods.get(end.rod).is_some_and(|r| end.node < r.n_nodes());
                if !ok {
                    return Err(Error::invalid(format!("connection {i} references a missing node")));
                }
            }
            if !(c.stiffness > 0.0) || !(c.damping >= 0.0) {
                return Err(Error::invalid(format!(
                    "connection {i} needs stiffness > 0 and damping >= 0"
                )));
            }
        }
        let masses = rods.iter().map(RodState::node_masses).collect();
        let loads = Loads::for_rods(&rods);
        Ok(Self { rods, connections, masses, time: 0.0, unstable: false, loads, loads_valid: false })
    }

    pub fn rods(&self) -> &[RodState] {
        &self.rods
    }

    pub fn rod(&self, i: usize) -> &RodState {
        &self.rods[i]
    }

    /// Mutable access; invalidates cached loads.
    pub fn rods_mut(&mut self) -> &mut [RodState] {
        self.loads_valid = false;
        &mut self.rods
    }

    pub fn connections(&self) -> &[Connection] {
        &self.connections
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn position(&self, node: NodeRef) -> Vec3 {
        self.rods[node.rod].node_positions[node.node]
    }

    pub fn velocity(&self, node: NodeRef) -> Vec3 {
        self.rods[node.rod].node_velocities[node.node]
    }

    /// True iff any state entry is non-finite (or a previous step flagged it).
    pub fn detect_instability(&self) -> bool {
        self.unstable || self.rods.iter().any(|r| !r.is_finite())
    }

    /// Conservative explicit timestep: `min(l0 / sqrt(E / rho)) * 0.1`.
    pub fn stable_dt_estimate(&self) -> f64 {
        self.rods
            .iter()
            .flat_map(|r| {
                let c = r.material.wave_speed();
                r.rest_lengths.iter().map(move |l| l / c)
            })
            .fold(f64::INFINITY, f64::min)
            * STABLE_DT_SAFETY
    }

    pub fn energy(&self, config: &SimConfig) -> EnergyBreakdown {
        let kinetic = self.rods.iter().map(RodState::kinetic_energy).sum();
        let elastic = self.rods.iter().map(RodState::elastic_energy).sum();
        let connections = self
            .connections
            .iter()
            .map(|c| 0.5 * c.stiffness * (self.position(c.b) - self.position(c.a)).norm_squared())
            .sum();
        let gravity = if config.gravity {
            self.rods
                .iter()
                .zip(&self.masses)
                .map(|(r, m)| {
                    r.node_positions.iter().zip(m).map(|(x, m)| m * STANDARD_GRAVITY * x.z).sum::<f64>()
                })
                .sum()
        } else {
            0.0
        };
        EnergyBreakdown { kinetic, elastic, connections, gravity }
    }

    pub fn max_node_speed(&self) -> f64 {
        self.rods
            .iter()
            .flat_map(|r| r.node_velocities.iter().map(|v| v.norm()))
            .fold(0.0, f64::max)
    }

    pub fn max_frame_error(&self) -> f64 {
        self.rods.iter().map(RodState::max_frame_error).fold(0.0, f64::max)
    }

    /// Writes `rod,node,x,y,z,vx,vy,vz` rows after a versioned comment line.
    pub fn write_snapshot_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "# latticeworm-state v1 time={}", self.time)?;
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["rod", "node", "x", "y", "z", "vx", "vy", "vz"])?;
        for (r, rod) in self.rods.iter().enumerate() {
            for (n, (x, v)) in rod.node_positions.iter().zip(&rod.node_velocities).enumerate() {
                w.serialize((r, n, x.x, x.y, x.z, v.x, v.y, v.z))?;
            }
        }
        w.flush()?;
        Ok(())
    }
}
