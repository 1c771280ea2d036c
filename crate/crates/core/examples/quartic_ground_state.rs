//! Ground state of the quartic oscillator `p^2 + x^2 + lambda x^4` from the
//! root equation, checked against dense diagonalization.
//!
//! cargo run --release --example quartic_ground_state

use kernel_eig::eigensolve::nearest;
use kernel_eig::{diagonalize_oracle, solve_root, SolveOptions, SpectrumSplit};

fn main() -> kernel_eig::Result<()> {
    let basis = 300;
    println!("{:>8} {:>22} {:>22} {:>10} {:>5}", "lambda", "E (root)", "E (oracle)", "diff", "iter");
    for lambda in [0.0, 0.1, 1.0, 10.0, 100.0] {
        let split = SpectrumSplit::anharmonic(lambda, 2, basis)?;
        let root = solve_root(&split, 0, &SolveOptions::default())?;
        let oracle = nearest(&diagonalize_oracle(&split), root.e_total).unwrap();
        println!(
            "{lambda:>8} {:>22.15} {:>22.15} {:>10.1e} {:>5}",
            root.e_total,
            oracle,
            root.e_total - oracle,
            root.iterations
        );
    }

    // excited levels come from the same equation with gamma > 0
    let split = SpectrumSplit::anharmonic(1.0, 2, basis)?;
    for gamma in 1..4 {
        let r = solve_root(&split, gamma, &SolveOptions::default())?;
        println!("lambda=1 level {gamma}: {:.15}", r.e_total);
    }
    Ok(())
}
