use super::so3;
use super::{Actuation, Connection, Loads, RodState, RodSystem, SimConfig, Vec3, STANDARD_GRAVITY};
use crate::error::{Error, Result};

/// Elastic node forces and element torques (material frame) of a single rod.
pub fn compute_internal_loads(rod: &RodState) -> Result<(Vec<Vec3>, Vec<Vec3>)> {
    if !rod.is_finite() {
        return Err(Error::Instability("non-finite rod state".into()));
    }
    let mut forces = vec![Vec3::zeros(); rod.n_nodes()];
    let mut torques = vec![Vec3::zeros(); rod.n_elements()];
    accumulate_internal(rod, &mut forces, &mut torques);
    Ok((forces, torques))
}

pub(crate) fn accumulate_internal(rod: &RodState, forces: &mut [Vec3], torques: &mut [Vec3]) {
    let s = rod.shear_stretch_rigidity();
    let b = rod.bend_twist_rigidity();
    let e3 = Vec3::z();
    for e in 0..rod.n_elements() {
        let l0 = rod.rest_lengths[e];
        let q = &rod.directors[e];
        let qt = q * ((rod.node_positions[e + 1] - rod.node_positions[e]) / l0);
        let stress = s.component_mul(&(qt - e3 - rod.rest_shear[e]));
        let f = q.transpose() * stress;
        forces[e] += f;
        forces[e + 1] -= f;
        torques[e] += qt.cross(&stress) * l0;
    }
    for k in 1..rod.n_elements() {
        let phi = so3::log(&(rod.directors[k - 1] * rod.directors[k].transpose()));
        let kappa = phi / rod.rest_voronoi[k - 1] - rod.rest_curvature[k - 1];
        let couple = b.component_mul(&kappa);
        torques[k] -= so3::left_jacobian_inv(&phi) * couple;
        torques[k - 1] += so3::right_jacobian_inv(&phi) * couple;
    }
}

/// Spring-damper force on endpoint `a`; endpoint `b` receives the negation.
pub fn connection_force(connection: &Connection, rods: &[RodState]) -> Vec3 {
    let (a, b) = (connection.a, connection.b);
    let ra = &rods[a.rod];
    let rb = &rods[b.rod];
    let dx = rb.node_positions[b.node] - ra.node_positions[a.node];
    let dv = rb.node_velocities[b.node] - ra.node_velocities[a.node];
    dx * connection.stiffness + dv * connection.damping
}

/// Contractile pair on the end nodes, each pointing toward the rod center.
///
/// Returns `None` when the ends (nearly) coincide and no direction exists.
pub fn apply_muscle_contraction(muscle: &RodState, force_magnitude: f64) -> Option<(Vec3, Vec3)> {
    let span = muscle.last_node() - muscle.first_node();
    let len = span.norm();
    if !(len >= 1e-9) {
        log::warn!("skipping actuation of a degenerate muscle rod (end distance {len:e} m)");
        return None;
    }
    let dir = span / len;
    Some((dir * force_magnitude, -dir * force_magnitude))
}

impl RodSystem {
    pub(super) fn compute_passive_loads(&mut self, config: &SimConfig) {
        self.loads.clear();
        let Loads { forces, torques } = &mut self.loads;
        for (r, rod) in self.rods.iter().enumerate() {
            accumulate_internal(rod, &mut forces[r], &mut torques[r]);
        }
        for c in &self.connections {
            let f = connection_force(c, &self.rods);
            forces[c.a.rod][c.a.node] += f;
            forces[c.b.rod][c.b.node] -= f;
        }
        if config.gravity {
            for (r, m) in self.masses.iter().enumerate() {
                for (n, m) in m.iter().enumerate() {
                    forces[r][n].z -= m * STANDARD_GRAVITY;
                }
            }
        }
        self.loads_valid = true;
    }

    /// Net force per node from all connections, in system rod/node layout.
    pub fn apply_connection_loads(&self) -> Vec<Vec<Vec3>> {
        let mut out: Vec<Vec<Vec3>> =
            self.rods.iter().map(|r| vec![Vec3::zeros(); r.n_nodes()]).collect();
        for c in &self.connections {
            let f = connection_force(c, &self.rods);
            out[c.a.rod][c.a.node] += f;
            out[c.b.rod][c.b.node] -= f;
        }
        out
    }

    pub(super) fn actuation_forces(&self, actuation: &[Actuation]) -> Vec<(usize, Vec3, Vec3)> {
        actuation
            .iter()
            .filter(|a| a.force > 0.0)
            .filter_map(|a| {
                apply_muscle_contraction(&self.rods[a.rod], a.force).map(|(f0, f1)| (a.rod, f0, f1))
            })
            .collect()
    }
}
