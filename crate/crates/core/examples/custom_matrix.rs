//! Any real symmetric matrix with a non-degenerate diagonal can be split and
//! solved level by level. Reads `{"matrix": [[...]]}` from the first argument,
//! or uses a small built-in matrix.
//!
//! cargo run --release --example custom_matrix -- path/to/matrix.json

use kernel_eig::{diagonalize_oracle, solve_root, SolveOptions, SpectrumSplit};

const BUILTIN: &str = r#"{"matrix": [
    [0.0, 0.3, 0.0, 0.1],
    [0.3, 1.0, 0.2, 0.0],
    [0.0, 0.2, 2.5, 0.4],
    [0.1, 0.0, 0.4, 3.0]
]}"#;

fn main() -> kernel_eig::Result<()> {
    let split = match std::env::args().nth(1) {
        Some(path) => SpectrumSplit::from_json_file(path.as_ref())?,
        None => SpectrumSplit::from_json_str(BUILTIN)?,
    };
    let oracle = diagonalize_oracle(&split);
    let mut levels = Vec::new();
    for gamma in 0..split.dim() {
        let r = solve_root(&split, gamma, &SolveOptions::default())?;
        println!(
            "gamma={gamma}  E_gamma={:>8.4}  shift={:>12.3e}  E={:.15}",
            r.e0, r.delta_e, r.e_total
        );
        levels.push(r.e_total);
    }
    levels.sort_by(f64::total_cmp);
    let worst = levels
        .iter()
        .zip(&oracle)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    println!("largest gap to the diagonalized spectrum: {worst:.1e}");
    Ok(())
}
