//! Small-coupling fit of the quartic ground state against first- and
//! second-order perturbation theory.
//!
//! cargo run --release --example rs_consistency

use kernel_eig::verify::{default_rs_grid, rs_consistency, DEFAULT_RS_DEGREE};

fn main() -> kernel_eig::Result<()> {
    let fit = rs_consistency(&default_rs_grid(), 60, DEFAULT_RS_DEGREE)?;
    println!("grid {:?}", fit.lambdas);
    println!("c1 fitted {:.12}  expected {:.12}", fit.coefficients[0], fit.first_order);
    println!("c2 fitted {:.12}  expected {:.12}", fit.coefficients[1], fit.second_order);
    println!(
        "linear residual {:.1e} ({}), quadratic residual {:.1e} ({})",
        fit.report.residual,
        fit.report.passed,
        fit.quadratic_residual,
        fit.quadratic_passed
    );
    Ok(())
}
