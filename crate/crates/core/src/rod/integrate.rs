use super::so3;
use super::{Actuation, Boundary, RodSystem, SimConfig};

impl RodSystem {
    /// Advances the system by one `dt`.
    ///
    /// Scheme: exact linear-damping decay for `dt/2`, velocity-Verlet half kick,
    /// drift (frames rotated through the exponential map), load recompute, half
    /// kick, damping decay for `dt/2`. Actuation forces are re-evaluated from the
    /// current geometry at each kick. Non-finite results raise the instability
    /// flag; an unstable system is not advanced further.
    pub fn step(&mut self, config: &SimConfig, actuation: &[Actuation]) {
        if self.unstable {
            return;
        }
        let h = config.dt;
        if !self.loads_valid {
            self.compute_passive_loads(config);
        }
        self.damp(config, 0.5 * h);
        self.kick(0.5 * h, actuation);
        self.drift(h);
        self.compute_passive_loads(config);
        self.kick(0.5 * h, actuation);
        self.damp(config, 0.5 * h);
        self.time += h;
        if self.rods.iter().any(|r| !r.is_finite()) {
            self.unstable = true;
        }
    }

    pub fn step_n(&mut self, config: &SimConfig, actuation: &[Actuation], n: usize) {
        for _ in 0..n {
            self.step(config, actuation);
            if self.unstable {
                break;
            }
        }
    }

    fn damp(&mut self, config: &SimConfig, h: f64) {
        if config.damping_coefficient == 0.0 {
            return;
        }
        for rod in &mut self.rods {
            // per-node c_i / m_i is uniform: c / (rho A L)
            let decay = (-config.damping_coefficient / rod.total_mass() * h).exp();
            rod.node_velocities.iter_mut().for_each(|v| *v *= decay);
            rod.angular_velocities.iter_mut().for_each(|w| *w *= decay);
        }
    }

    fn kick(&mut self, h: f64, actuation: &[Actuation]) {
        let mut end_forces = vec![None; self.rods.len()];
        for (rod_id, f0, f1) in self.actuation_forces(actuation) {
            end_forces[rod_id] = Some((f0, f1));
        }
        for (r, rod) in self.rods.iter_mut().enumerate() {
            let forces = &self.loads.forces[r];
            let torques = &self.loads.torques[r];
            let masses = &self.masses[r];
            let start = usize::from(rod.boundary == Boundary::ClampedBase);
            for n in start..rod.n_nodes() {
                rod.node_velocities[n] += forces[n] * (h / masses[n]);
            }
            if let Some((f0, f1)) = end_forces[r] {
                let last = rod.n_nodes() - 1;
                if start == 0 {
                    rod.node_velocities[0] += f0 * (h / masses[0]);
                }
                rod.node_velocities[last] += f1 * (h / masses[last]);
            }
            for e in start..rod.n_elements() {
                let inertia = rod.element_inertia(e);
                let w = rod.angular_velocities[e];
                let gyro = w.cross(&inertia.component_mul(&w));
                rod.angular_velocities[e] += (torques[e] - gyro).component_div(&inertia) * h;
            }
        }
    }

    fn drift(&mut self, h: f64) {
        for rod in &mut self.rods {
            let start = usize::from(rod.boundary == Boundary::ClampedBase);
            for n in start..rod.n_nodes() {
                let v = rod.node_velocities[n];
                rod.node_positions[n] += v * h;
            }
            for e in start..rod.n_elements() {
                let w = rod.angular_velocities[e];
                let q = so3::exp(&(-w * h)) * rod.directors[e];
                rod.directors[e] = q;
                so3::orthonormalize(&mut rod.directors[e]);
            }
        }
    }
}
