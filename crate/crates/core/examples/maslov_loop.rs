//! Maslov index and eigenvector holonomy for a small loop around a singular
//! point, and the count of singular points enclosed by a disk.
//!
//! cargo run --example maslov_loop

use toda_lax::maslov::{check_holonomy_theorem, enclosure_count_check, ClosedCurve, DiskPatch};
use toda_lax::singularity::{find_singular, stratum_seed, FindOptions};
use toda_lax::PairId;

fn main() -> toda_lax::Result<()> {
    let pair = PairId::odd(0);
    let sp = find_singular(&stratum_seed(3, &[pair], 1e-2)?, &[pair], &FindOptions::default())?;

    let loop_ = ClosedCurve::circle(&sp, pair, 1e-3, 128)?;
    let rep = check_holonomy_theorem(&loop_)?;
    println!("mu = {}, winding {:.6}", rep.maslov.mu, rep.maslov.winding);
    println!("gamma = {:?}, gammabar = {:?}", rep.holonomy.gamma, rep.holonomy.gammabar);
    println!("(-1)^(mu/2) = {}, holonomy product = {}", rep.maslov.half_parity(), rep.lhs);

    let reversed = check_holonomy_theorem(&loop_.reversed())?;
    println!("reversed loop: mu = {}", reversed.maslov.mu);

    let disk = DiskPatch::two_point(&sp, pair, 1e-3, 0.5, 1e-3)?;
    let enc = enclosure_count_check(&disk, 128)?;
    for p in &enc.points {
        println!("enclosed {} at {:.3?}, sigma {:+}", p.pair, p.parameter, p.sigma);
    }
    println!("boundary mu = {}, predicted -2 * sum(sigma) = {}", enc.mu, enc.predicted);
    Ok(())
}
