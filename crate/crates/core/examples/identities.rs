//! Identity checks on the Taylor coefficients of powers of `R`.
//!
//! cargo run --release --example identities

use kernel_eig::verify::{check_derivative_identity, check_power_relation};
use kernel_eig::SpectrumSplit;

fn main() -> kernel_eig::Result<()> {
    let quartic = SpectrumSplit::anharmonic(0.1, 2, 40)?;
    let random = SpectrumSplit::random(7, 8, 0.2)?;

    for (name, split) in [("quartic", &quartic), ("random 8x8", &random)] {
        for n in 2..=4 {
            let r = check_power_relation(split, 0, n, 40)?;
            println!("{name:>10}  C_{n} vs C_1^{n}: residual {:.2e} ({})", r.residual, verdict(r.passed));
        }
    }

    let mut worst: f64 = 0.0;
    for k in 0..8 {
        for n in 1..=8 - k {
            let r = check_derivative_identity(&random, 0, k, n, 12)?;
            worst = worst.max(r.residual);
        }
    }
    println!("derivative identity, k + n <= 8: worst residual {worst:.2e}");
    Ok(())
}

fn verdict(ok: bool) -> &'static str {
    if ok {
        "pass"
    } else {
        "FAIL"
    }
}
