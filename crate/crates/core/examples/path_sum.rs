//! `R(z)` as a sum over paths agrees with the resolvent while the path series
//! converges (spectral radius of `G D(z)^-1` below one) and is reported as
//! divergent otherwise.
//!
//! cargo run --release --example path_sum

use kernel_eig::{Error, KernelContext, SpectrumSplit};

fn main() -> kernel_eig::Result<()> {
    let split = SpectrumSplit::random(3, 12, 0.1)?;
    let ctx = KernelContext::new(&split, 0)?;
    let poles = ctx.poles();
    println!("poles of R closest to 0: {:?}", &poles[poles.len() - 3..]);

    // -0.999 sits next to the zero of E_0 - E_1 - z, where one hop costs ~100x
    for z in [0.0, -1.5, -0.999] {
        let exact = ctx.resolvent(z)?;
        match ctx.path_sum(z, 400) {
            Ok(p) => println!(
                "z={z:>5}: resolvent {exact:.15e}  paths {:.15e}  ({} orders)",
                p.value,
                p.terms.len()
            ),
            Err(Error::PathSumDivergence { order }) => {
                println!("z={z:>5}: resolvent {exact:.15e}  paths diverge by order {order}")
            }
            Err(e) => return Err(e),
        }
    }

    // strong coupling: the path expansion fails even at z = 0
    let strong = SpectrumSplit::anharmonic(10.0, 2, 60)?;
    let ctx = KernelContext::new(&strong, 0)?;
    println!("\nquartic lambda=10: resolvent R(0) = {:.6e}", ctx.resolvent(0.0)?);
    println!("path sum: {:?}", ctx.path_sum(0.0, 200).map(|p| p.value));
    Ok(())
}
