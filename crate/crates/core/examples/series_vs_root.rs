//! The shift three ways: root of `R(-dE) = dE`, the truncated series in powers
//! of `R`, and the `z^0` Laurent coefficient (jet formula and contour
//! quadrature).
//!
//! cargo run --release --example series_vs_root

use kernel_eig::eigensolve::eval_series;
use kernel_eig::verify::equivalence;
use kernel_eig::SpectrumSplit;
use nalgebra::DMatrix;

fn main() -> kernel_eig::Result<()> {
    let split = SpectrumSplit::anharmonic(0.1, 2, 200)?;
    let eq = equivalence(&split, 0, 25)?;
    println!("quartic lambda=0.1, 200 states, order 25");
    println!("  root     {:.16e}", eq.root);
    println!("  series   {:.16e}", eq.series);
    println!("  laurent  {:.16e}", eq.laurent);
    if let Some(c) = eq.contour {
        println!("  contour  {c:.16e}");
    }
    println!("  spread {:.1e}, last term {:.1e}", eq.spread(), eq.last_term);

    // [[0,1],[1,2]]: terms are signed Catalan numbers over 2^(2m+1), so the
    // series converges only like m^(-3/2)
    let two = SpectrumSplit::from_matrix(&DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 2.0]))?;
    let exact = 1.0 - 2f64.sqrt();
    println!("\n2x2 exact shift {exact:.16}");
    for order in [10, 40, 160, 640] {
        let s = eval_series(&two, 0, order)?;
        println!("  order {order:>4}: error {:.2e}", s.result.delta_e - exact);
    }
    Ok(())
}
