//! Splits `R_0(0)` into contributions by the highest basis state a path
//! visits, under each counting convention.
//!
//! cargo run --release --example cut_series

use kernel_eig::kernel::{cut_series, Convention, KernelContext};
use kernel_eig::{EvalMode, SpectrumSplit};

fn main() -> kernel_eig::Result<()> {
    let split = SpectrumSplit::anharmonic(1.0, 2, 120)?;
    let full = KernelContext::new(&split, 0)?.eval(0.0, EvalMode::Resolvent)?;
    println!("R_0(0) on 120 states = {full:.15e}");

    // only even states couple to the ground state, so odd raw labels carry nothing
    for convention in [Convention::Ordinal, Convention::RawIndex, Convention::CoupledSubspace] {
        let report = cut_series(&split, 0, 0.0, 40, convention)?;
        println!("\n{} convention", convention.label());
        for n in [3, 5, 11, 21] {
            println!("  n={n:<3} R_c={:>22.14e}  running={:>22.14e}", report.values[&n], report.cumulative[&n]);
        }
    }

    // the ordinal table as CSV
    print!("\n{}", cut_series(&split, 0, 0.0, 8, Convention::Ordinal)?.to_csv());
    Ok(())
}
