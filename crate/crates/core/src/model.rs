//! Diagonal / off-diagonal split of a truncated Hamiltonian.
//!
//! Oscillator models use `H0 = p^2 + x^2` with `E_n = 2n + 1` and
//! `x = (a + a^dagger) / sqrt(2)`.

use std::path::Path;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Minimum allowed spacing between any two diagonal energies.
pub const DEFAULT_DEGENERACY_GAP: f64 = 1e-10;

/// Relative tolerance for accepting a matrix as symmetric.
pub const SYMMETRY_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelMeta {
    Anharmonic { lambda: f64, power: u32 },
    Custom { name: String },
}

impl ModelMeta {
    pub fn lambda(&self) -> Option<f64> {
        match self {
            ModelMeta::Anharmonic { lambda, .. } => Some(*lambda),
            ModelMeta::Custom { .. } => None,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SplitOptions {
    pub degeneracy_gap: f64,
    /// Extra oscillator levels used when raising `x` to a power. Defaults to
    /// the exponent, which is the smallest pad that leaves the kept block exact.
    pub pad: Option<usize>,
}

impl Default for SplitOptions {
    fn default() -> Self {
        Self {
            degeneracy_gap: DEFAULT_DEGENERACY_GAP,
            pad: None,
        }
    }
}

/// A Hamiltonian written as `diag(energies) + coupling`, with `coupling`
/// symmetric and zero on the diagonal. Immutable once built.
#[derive(Debug, Clone)]
pub struct SpectrumSplit {
    energies: Vec<f64>,
    coupling: DMatrix<f64>,
    meta: ModelMeta,
}

#[derive(Debug, Deserialize)]
struct MatrixFile {
    matrix: Vec<Vec<f64>>,
}

impl SpectrumSplit {
    /// `H = p^2 + x^2 + lambda x^{2m}` on the lowest `dim` oscillator states.
    pub fn anharmonic(lambda: f64, power: u32, dim: usize) -> Result<Self> {
        Self::anharmonic_with(lambda, power, dim, &SplitOptions::default())
    }

    pub fn anharmonic_with(
        lambda: f64,
        power: u32,
        dim: usize,
        options: &SplitOptions,
    ) -> Result<Self> {
        if power < 2 {
            return Err(Error::InvalidPower(power));
        }
        let exponent = 2 * power as usize;
        if dim < exponent + 1 {
            return Err(Error::BasisTooSmall {
                dim,
                min: exponent + 1,
            });
        }
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return Err(Error::NegativeCoupling(lambda));
        }
        let pad = options.pad.unwrap_or(exponent);
        let xp = position_power_matrix(dim, exponent, pad);

        let energies: Vec<f64> = (0..dim)
            .map(|n| (2 * n + 1) as f64 + lambda * xp[(n, n)])
            .collect();
        let mut coupling = xp * lambda;
        coupling.fill_diagonal(0.0);

        let split = Self {
            energies,
            coupling,
            meta: ModelMeta::Anharmonic { lambda, power },
        };
        split.check_degeneracy(options.degeneracy_gap)?;
        Ok(split)
    }

    /// Splits a dense symmetric matrix into its diagonal and off-diagonal parts.
    pub fn from_matrix(h: &DMatrix<f64>) -> Result<Self> {
        Self::from_matrix_with(h, &SplitOptions::default(), "custom")
    }

    pub fn from_matrix_with(h: &DMatrix<f64>, options: &SplitOptions, name: &str) -> Result<Self> {
        let dim = h.nrows();
        if h.ncols() != dim {
            return Err(Error::NotSquare {
                field: "matrix".into(),
                found: h.ncols(),
                expected: dim,
            });
        }
        if dim < 2 {
            return Err(Error::BasisTooSmall { dim, min: 2 });
        }
        if let Some((row, col)) = h.iter().position(|v| !v.is_finite()).map(|p| (p % dim, p / dim)) {
            return Err(Error::NonFinite {
                field: format!("matrix[{row}][{col}]"),
            });
        }
        let scale = h.amax();
        for i in 0..dim {
            for j in (i + 1)..dim {
                let (upper, lower) = (h[(i, j)], h[(j, i)]);
                if (upper - lower).abs() > SYMMETRY_TOLERANCE * scale {
                    return Err(Error::NotSymmetric {
                        row: i,
                        col: j,
                        upper,
                        lower,
                    });
                }
            }
        }

        let energies: Vec<f64> = h.diagonal().iter().copied().collect();
        let mut coupling = h.clone();
        coupling.fill_diagonal(0.0);
        // exact for symmetric input; averages away sub-tolerance asymmetry otherwise
        for i in 0..dim {
            for j in (i + 1)..dim {
                if coupling[(i, j)] != coupling[(j, i)] {
                    let avg = 0.5 * (coupling[(i, j)] + coupling[(j, i)]);
                    coupling[(i, j)] = avg;
                    coupling[(j, i)] = avg;
                }
            }
        }

        let split = Self {
            energies,
            coupling,
            meta: ModelMeta::Custom { name: name.into() },
        };
        split.check_degeneracy(options.degeneracy_gap)?;
        Ok(split)
    }

    /// Parses `{"matrix": [[...], ...]}`.
    pub fn from_json_str(text: &str) -> Result<Self> {
        let file: MatrixFile = serde_json::from_str(text)?;
        let dim = file.matrix.len();
        for (row, entries) in file.matrix.iter().enumerate() {
            if entries.len() != dim {
                return Err(Error::NotSquare {
                    field: format!("matrix[{row}]"),
                    found: entries.len(),
                    expected: dim,
                });
            }
        }
        let h = DMatrix::from_fn(dim, dim, |i, j| file.matrix[i][j]);
        Self::from_matrix(&h)
    }

    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut split = Self::from_json_str(&text)?;
        split.meta = ModelMeta::Custom {
            name: path.display().to_string(),
        };
        Ok(split)
    }

    /// Symmetric split with diagonal `1, 2, ..., dim` and off-diagonal entries
    /// uniform in `[-coupling, coupling]`, from a ChaCha8 stream seeded by `seed`.
    pub fn random(seed: u64, dim: usize, coupling: f64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut h = DMatrix::zeros(dim, dim);
        for i in 0..dim {
            h[(i, i)] = (i + 1) as f64;
            for j in (i + 1)..dim {
                let g = rng.random_range(-coupling..=coupling);
                h[(i, j)] = g;
                h[(j, i)] = g;
            }
        }
        Self::from_matrix_with(&h, &SplitOptions::default(), &format!("random(seed={seed})"))
    }

    /// Keeps only the listed basis states, in the given order.
    pub fn restrict(&self, indices: &[usize]) -> Result<Self> {
        if let Some(&index) = indices.iter().find(|&&i| i >= self.dim()) {
            return Err(Error::StateOutOfRange {
                index,
                dim: self.dim(),
            });
        }
        Ok(Self {
            energies: indices.iter().map(|&i| self.energies[i]).collect(),
            coupling: self.coupling.select_rows(indices).select_columns(indices),
            meta: self.meta.clone(),
        })
    }

    /// The lowest `dim` basis states.
    pub fn truncated(&self, dim: usize) -> Result<Self> {
        let indices: Vec<usize> = (0..dim).collect();
        self.restrict(&indices)
    }

    pub fn dim(&self) -> usize {
        self.energies.len()
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    pub fn coupling(&self) -> &DMatrix<f64> {
        &self.coupling
    }

    pub fn meta(&self) -> &ModelMeta {
        &self.meta
    }

    /// `diag(energies) + coupling`.
    pub fn reassemble(&self) -> DMatrix<f64> {
        let mut h = self.coupling.clone();
        for (i, e) in self.energies.iter().enumerate() {
            h[(i, i)] = *e;
        }
        h
    }

    /// States reachable from `gamma` through nonzero couplings, `gamma` included,
    /// in ascending order.
    pub fn connected_component(&self, gamma: usize) -> Vec<usize> {
        let dim = self.dim();
        let mut seen = vec![false; dim];
        let mut stack = vec![gamma];
        seen[gamma] = true;
        while let Some(i) = stack.pop() {
            for j in 0..dim {
                if !seen[j] && self.coupling[(i, j)] != 0.0 {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        (0..dim).filter(|&i| seen[i]).collect()
    }

    fn check_degeneracy(&self, threshold: f64) -> Result<()> {
        let mut order: Vec<usize> = (0..self.dim()).collect();
        order.sort_by(|&a, &b| self.energies[a].total_cmp(&self.energies[b]));
        for pair in order.windows(2) {
            let gap = self.energies[pair[1]] - self.energies[pair[0]];
            if gap < threshold {
                let (first, second) = (pair[0].min(pair[1]), pair[0].max(pair[1]));
                return Err(Error::Degenerate {
                    first,
                    second,
                    gap,
                    threshold,
                });
            }
        }
        Ok(())
    }
}

/// `<n| x^exponent |n'>` for `n, n' < dim`, computed by multiplying the
/// tridiagonal position matrix on `dim + pad` levels and cropping.
///
/// Entries of the cropped block are exact (up to rounding) once `pad >= exponent / 2`;
/// the default pad is the full exponent.
pub fn position_power_matrix(dim: usize, exponent: usize, pad: usize) -> DMatrix<f64> {
    let size = dim + pad;
    // <n|x|n+1> = sqrt((n+1)/2)
    let offdiag: Vec<f64> = (0..size.saturating_sub(1))
        .map(|n| ((n + 1) as f64 / 2.0).sqrt())
        .collect();

    let mut acc = DMatrix::<f64>::identity(size, size);
    for _ in 0..exponent {
        let mut next = DMatrix::<f64>::zeros(size, size);
        for j in 0..size {
            for i in 0..size {
                let mut sum = 0.0;
                if j > 0 {
                    sum += acc[(i, j - 1)] * offdiag[j - 1];
                }
                if j + 1 < size {
                    sum += acc[(i, j + 1)] * offdiag[j];
                }
                next[(i, j)] = sum;
            }
        }
        acc = next;
    }
    acc.view((0, 0), (dim, dim)).into_owned()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unperturbed_oscillator() {
        let split = SpectrumSplit::anharmonic(0.0, 2, 10).unwrap();
        assert!(split.coupling().iter().all(|&g| g == 0.0));
        let expected: Vec<f64> = (0..10).map(|n| (2 * n + 1) as f64).collect();
        assert_eq!(split.energies(), expected.as_slice());
    }

    #[test]
    fn quartic_matrix_elements() {
        let split = SpectrumSplit::anharmonic(1.0, 2, 12).unwrap();
        assert!((split.energies()[0] - 1.75).abs() < 1e-15);
        let g = split.coupling();
        assert!((g[(0, 2)] - 3.0 * 2f64.sqrt() / 2.0).abs() < 1e-14);
        assert!((g[(0, 4)] - 24f64.sqrt() / 4.0).abs() < 1e-14);
        // closed form <n|x^4|n> = 3(2n^2+2n+1)/4
        for n in 0..12 {
            let nf = n as f64;
            let diag = 3.0 * (2.0 * nf * nf + 2.0 * nf + 1.0) / 4.0;
            assert!((split.energies()[n] - (2.0 * nf + 1.0) - diag).abs() < 1e-12);
        }
    }

    #[test]
    fn sextic_pad_independence() {
        let a = position_power_matrix(15, 6, 6);
        let b = position_power_matrix(15, 6, 12);
        assert_eq!(a, b);
        let c = position_power_matrix(15, 6, 0);
        assert_ne!(a[(14, 14)], c[(14, 14)]);
    }

    #[test]
    fn parity_and_band_structure() {
        let split = SpectrumSplit::anharmonic(0.7, 3, 20).unwrap();
        let g = split.coupling();
        for i in 0..20usize {
            for j in 0..20usize {
                let d = i.abs_diff(j);
                if d % 2 == 1 || d > 6 || d == 0 {
                    assert_eq!(g[(i, j)], 0.0, "({i},{j})");
                } else {
                    assert!(g[(i, j)] > 0.0);
                }
            }
        }
    }

    #[test]
    fn rejects_bad_oscillator_inputs() {
        assert!(matches!(
            SpectrumSplit::anharmonic(1.0, 2, 4),
            Err(Error::BasisTooSmall { min: 5, .. })
        ));
        assert!(matches!(
            SpectrumSplit::anharmonic(-0.1, 2, 10),
            Err(Error::NegativeCoupling(_))
        ));
        assert!(matches!(
            SpectrumSplit::anharmonic(1.0, 1, 10),
            Err(Error::InvalidPower(1))
        ));
    }

    #[test]
    fn identity_is_degenerate() {
        let err = SpectrumSplit::from_matrix(&DMatrix::identity(4, 4)).unwrap_err();
        assert!(matches!(err, Error::Degenerate { .. }));
        assert!(err.to_string().contains("degenerate case unsupported"));
    }

    #[test]
    fn direct_splits() {
        let h = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 2.0]);
        let split = SpectrumSplit::from_matrix(&h).unwrap();
        assert_eq!(split.energies(), &[0.0, 2.0]);
        assert_eq!(split.coupling()[(0, 1)], 1.0);
        assert_eq!(split.reassemble(), h);

        let h = DMatrix::from_row_slice(3, 3, &[1.0, 0.1, 0.0, 0.1, 2.0, 0.1, 0.0, 0.1, 4.0]);
        let split = SpectrumSplit::from_matrix(&h).unwrap();
        assert_eq!(split.energies(), &[1.0, 2.0, 4.0]);
        assert_eq!(split.coupling()[(1, 2)], 0.1);
        assert_eq!(split.coupling()[(0, 2)], 0.0);
        assert_eq!(split.reassemble(), h);
    }

    #[test]
    fn rejects_asymmetric_matrix() {
        let h = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.1, 2.0]);
        assert!(matches!(
            SpectrumSplit::from_matrix(&h),
            Err(Error::NotSymmetric { row: 0, col: 1, .. })
        ));
    }

    #[test]
    fn json_diagnostics() {
        let ok = SpectrumSplit::from_json_str(r#"{"matrix": [[0, 1], [1, 2]]}"#).unwrap();
        assert_eq!(ok.dim(), 2);

        let ragged = SpectrumSplit::from_json_str(r#"{"matrix": [[0, 1], [1, 2, 3]]}"#).unwrap_err();
        assert!(ragged.to_string().contains("matrix[1]"), "{ragged}");

        let syntax = SpectrumSplit::from_json_str("{\"matrix\": [[0, 1],\n [1, oops]]}").unwrap_err();
        assert!(syntax.to_string().contains("line 2"), "{syntax}");

        let missing = SpectrumSplit::from_json_str(r#"{"rows": []}"#).unwrap_err();
        assert!(missing.to_string().contains("matrix"), "{missing}");
    }

    #[test]
    fn connected_component_follows_parity() {
        let split = SpectrumSplit::anharmonic(0.1, 2, 10).unwrap();
        assert_eq!(split.connected_component(0), vec![0, 2, 4, 6, 8]);
        assert_eq!(split.connected_component(3), vec![1, 3, 5, 7, 9]);
    }

    #[test]
    fn random_split_is_seeded() {
        let a = SpectrumSplit::random(7, 8, 0.2).unwrap();
        let b = SpectrumSplit::random(7, 8, 0.2).unwrap();
        assert_eq!(a.coupling(), b.coupling());
        assert!(a.coupling().iter().all(|g| g.abs() <= 0.2));
        assert_eq!(a.energies()[7], 8.0);
    }
}
