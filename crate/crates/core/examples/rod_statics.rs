//! A clamped rod stretched by 1% and released: internal force at the free
//! end against EA times strain, then the energy decay under damping.

use latticeworm::rod::{compute_internal_loads, Boundary, MaterialParams, RodState, RodSystem, SimConfig, Vec3};

fn main() -> latticeworm::Result<()> {
    let material = MaterialParams::structure();
    let mut rod = RodState::straight(Vec3::zeros(), Vec3::z(), 0.1, 40, 0.01, material, Vec3::x())?
        .with_boundary(Boundary::ClampedBase);
    let strain = 0.01;
    for x in rod.node_positions.iter_mut() {
        *x *= 1.0 + strain;
    }
    let (forces, _) = compute_internal_loads(&rod)?;
    let ea = material.youngs_modulus * rod.area();
    println!("end force {:.6} N, EA * strain {:.6} N", forces[40].norm(), ea * strain);

    let mut system = RodSystem::new(vec![rod], vec![])?;
    let config = SimConfig { dt: 1e-5, ..SimConfig::default() };
    for k in 0..=5 {
        let e = system.energy(&config);
        println!("t {:.3} s  kinetic {:.3e} J  elastic {:.3e} J", system.time(), e.kinetic, e.elastic);
        if k < 5 {
            system.step_n(&config, &[], 2000);
        }
    }
    system.write_snapshot_csv(std::io::stdout().lock())
}
