//! Lax matrices of both sign classes at one point, their integrals, and the
//! identities linking L to its antiperiodic partner.
//!
//! cargo run --example lax_structure

use toda_lax::lax::{char_poly_offset, integrals, off_band_check, trace_relation_check};
use toda_lax::{LaxClass, LaxMatrix, PhasePoint};

fn main() -> toda_lax::Result<()> {
    let z = PhasePoint::new(vec![2.0, 0.0, 0.0], vec![1.0, 2.0, 3.0])?;
    for class in [LaxClass::Even, LaxClass::Odd] {
        println!("{} class:\n{:.6}", class.label(), LaxMatrix::of_class(&z, class).entries());
    }

    for (j, f) in integrals(&z).iter().enumerate() {
        println!("F_{} = {f:.12}", j + 1);
    }

    for j in 1..=z.n() {
        let r = off_band_check(&z, j, 1e-10)?;
        println!("j = {j}: off-band residual {:.2e}", r.zero_pattern_residual.max(r.first_diagonal_residual));
    }
    let t = trace_relation_check(&z, 1e-9);
    println!("Tr L^j - Tr Lbar^j: {:?}", t.differences);

    let grid: Vec<f64> = (-4..=4).map(f64::from).collect();
    let c = char_poly_offset(&z, &grid, 1e-8);
    println!("det(xI - L) - det(xI - Lbar) = {:.12} (spread {:.1e})", c.constant, c.max_deviation);
    Ok(())
}
