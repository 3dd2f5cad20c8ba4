//! Builds the default lattice and prints its layout as JSON.

use latticeworm::lattice::{build_lattice, describe, LatticeSpec, TargetPrism};

fn main() -> latticeworm::Result<()> {
    let spec = LatticeSpec::default();
    let lattice = build_lattice(&spec)?;
    let prism = TargetPrism::default_for(&spec);
    println!("{}", serde_json::to_string_pretty(&describe(&lattice, &prism)?)?);
    Ok(())
}
