//! Locates one singular point per eigenvalue pair and prints the corank of
//! dF, the transverse frequency and the bracket normalisations there.
//!
//! cargo run --example singular_points -- 4

use toda_lax::singularity::{
    bracket_relations_check, corank, find_singular, hessian_structure_check, stratum_seed, FindOptions,
    DEFAULT_RANK_TOL,
};
use toda_lax::spectral::DEFAULT_DEGENERACY_TOL;
use toda_lax::PairId;

fn main() -> toda_lax::Result<()> {
    let n: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(3).max(3);
    for pair in PairId::all(n) {
        let seed = stratum_seed(n, &[pair], 1e-2)?;
        let sp = find_singular(&seed, &[pair], &FindOptions::default())?;
        let c = corank(&sp.z, DEFAULT_RANK_TOL, DEFAULT_DEGENERACY_TOL)?;
        let h = hessian_structure_check(&sp, pair, 1e-6)?;
        let b = bracket_relations_check(&sp, 1e-7)?;
        println!(
            "{pair}: gap {:.1e} after {} steps, corank {} (nu {}, nubar {}), omega {:.6} vs linearized {:.6}, brackets ok {}",
            sp.residual_gaps[0], sp.iterations, c.corank, c.nu, c.nubar, h.omega_formula, h.omega_linearized, b.passed
        );
    }
    Ok(())
}
