//! Spectra of L and Lbar at a random point, the interlacing chain, and the
//! closed-form spectra at a relative equilibrium.
//!
//! cargo run --example spectral_interlacing -- 5

use toda_lax::sampling::random_points;
use toda_lax::singularity::omega_point;
use toda_lax::spectral::interlacing_check;

fn main() -> toda_lax::Result<()> {
    let n: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(4);
    let z = random_points(7, n, 1, 1.0).remove(0);

    let r = interlacing_check(&z, 0.0)?;
    println!("lambda    = {:.6?}", r.lambda);
    println!("lambdabar = {:.6?}", r.lambda_bar);
    let chain: Vec<String> = r.chain.iter().map(|(l, v)| format!("{l}={v:.4}")).collect();
    println!("chain: {}", chain.join(" >= "));
    println!("interlacing holds: {} (smallest strict gap {:.3e})", r.passed, r.min_strict_gap);

    let om = omega_point(n, 0.0, 0.5)?;
    println!("\nrelative equilibrium with p0 = 0.5:");
    println!("lambda    = {:.6?}", om.lambda);
    println!("lambdabar = {:.6?}", om.lambda_bar);
    println!("closed-form error {:.2e}", om.spectrum_error()?);
    Ok(())
}
