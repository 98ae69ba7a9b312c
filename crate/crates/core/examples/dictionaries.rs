//! The feature dictionaries of the benchmark examples.

use caslr::features::{build_dictionary, FeatureDescriptor};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let trig: Vec<FeatureDescriptor> = ["sin(u)", "cos(u)", "sin(u_x)", "cos(u_x)"].iter().map(|s| s.parse()).collect::<Result<_, _>>()?;
    let scalar = build_dictionary(&["u"], 1, 4, 3, &trig)?;
    let system = build_dictionary(&["u", "v"], 1, 3, 2, &[])?;
    let planar = build_dictionary(&["u"], 2, 2, 2, &[])?;

    for (what, d) in [("1D, order 4, triple products, trig", &scalar), ("two fields, order 3, pairs", &system), ("2D, order 2, pairs", &planar)] {
        println!("{what}: K = {}", d.len());
    }
    println!("2D entries: {}", planar.names().join(", "));
    Ok(())
}
