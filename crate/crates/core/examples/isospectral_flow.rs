//! Integrates the physical flow and the F_3 flow from a random point and
//! reports how well the integrals and both spectra are conserved.
//!
//! cargo run --example isospectral_flow

use toda_lax::dynamics::{integrate_flow, spectral_drift, uniform_times, FlowOptions, Integrator};
use toda_lax::sampling::random_points;

fn main() -> toda_lax::Result<()> {
    let z0 = random_points(3, 3, 1, 1.0).remove(0);
    let times = uniform_times(50.0, 500);

    for (name, c) in [("F_2", [0.0, 1.0, 0.0]), ("F_3", [0.0, 0.0, 1.0])] {
        let tr = integrate_flow(&z0, &c, &times, &FlowOptions::with_rtol(1e-10))?;
        println!(
            "{name}: {} steps, integral drift {:.2e}, spectral drift {:.2e}",
            tr.stats.accepted,
            tr.max_integral_drift,
            spectral_drift(&tr)?
        );
    }

    let mut opts = FlowOptions::default();
    opts.integrator = Integrator::StormerVerlet { h: 1e-3 };
    let tr = integrate_flow(&z0, &[0.0, 1.0, 0.0], &times, &opts)?;
    println!("F_2 with Stormer-Verlet: integral drift {:.2e}", tr.max_integral_drift);

    let path = std::env::temp_dir().join("toda_flow.csv");
    tr.write_csv(std::fs::File::create(&path)?)?;
    println!("trajectory written to {}", path.display());
    Ok(())
}
