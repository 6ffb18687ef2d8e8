//! Dictionaries (N×L matrices with unit-norm columns), the three test
//! families used in the experiments, and coherence-based features.

mod io;

pub use io::{load_dictionary, save_dictionary, LoadWarning, LoadedDictionary};

use nalgebra::{DMatrix, DVector};
use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{CapsetError, Result};

/// Column norms of generated dictionaries are 1 to within this tolerance.
pub const UNIT_NORM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct Dictionary {
    matrix: DMatrix<f64>,
    label: String,
    seed: Option<u64>,
}

impl Dictionary {
    /// Wraps a matrix as-is. Entries must be finite; column norms are not
    /// enforced (see [`Dictionary::max_norm_deviation`]).
    pub fn new(matrix: DMatrix<f64>, label: impl Into<String>, seed: Option<u64>) -> Result<Self> {
        if matrix.nrows() == 0 || matrix.ncols() == 0 {
            return Err(CapsetError::InvalidShape("empty dictionary".into()));
        }
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(CapsetError::InvalidShape("non-finite dictionary entry".into()));
        }
        Ok(Dictionary {
            matrix,
            label: label.into(),
            seed,
        })
    }

    /// Like [`Dictionary::new`] but rescales every column to unit ℓ2 norm.
    pub fn normalized(
        mut matrix: DMatrix<f64>,
        label: impl Into<String>,
        seed: Option<u64>,
    ) -> Result<Self> {
        for mut column in matrix.column_iter_mut() {
            let norm = column.norm();
            if norm == 0.0 {
                return Err(CapsetError::InvalidShape("zero column".into()));
            }
            column /= norm;
        }
        Self::new(matrix, label, seed)
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.matrix
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    /// Signal dimension N.
    pub fn rows(&self) -> usize {
        self.matrix.nrows()
    }

    /// Number of atoms L.
    pub fn cols(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn is_overcomplete(&self) -> bool {
        self.cols() > self.rows()
    }

    /// Largest `| ||d_k||_2 - 1 |` over all columns.
    pub fn max_norm_deviation(&self) -> f64 {
        self.matrix
            .column_iter()
            .map(|c| (c.norm() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// Returns a copy with columns reordered so that new column `j` is old
    /// column `perm[j]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        let l = self.cols();
        let mut seen = vec![false; l];
        if perm.len() != l || perm.iter().any(|&p| p >= l || std::mem::replace(&mut seen[p], true)) {
            return Err(CapsetError::InvalidParam("not a permutation of the columns".into()));
        }
        let matrix = DMatrix::from_fn(self.rows(), l, |i, j| self.matrix[(i, perm[j])]);
        Ok(Dictionary {
            matrix,
            label: format!("{} permuted", self.label),
            seed: self.seed,
        })
    }
}

fn check_overcomplete(n: usize, l: usize) -> Result<()> {
    if n < 1 || l <= n {
        return Err(CapsetError::InvalidShape(format!(
            "need L > N >= 1, got N={n}, L={l}"
        )));
    }
    Ok(())
}

fn random_unit_columns(n: usize, l: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let mut matrix = DMatrix::zeros(n, l);
    for mut column in matrix.column_iter_mut() {
        loop {
            for v in column.iter_mut() {
                *v = StandardNormal.sample(rng);
            }
            let norm = column.norm();
            if norm > 0.0 {
                column /= norm;
                break;
            }
        }
    }
    matrix
}

/// Columns drawn i.i.d. from the standard normal distribution and scaled
/// to unit length. Deterministic per seed.
pub fn gen_random(n: usize, l: usize, seed: u64) -> Result<Dictionary> {
    check_overcomplete(n, l)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let matrix = random_unit_columns(n, l, &mut rng);
    Dictionary::new(matrix, format!("random N={n} L={l} seed={seed}"), Some(seed))
}

/// Starts from [`gen_random`] with the same seed, then replaces
/// `n_spoiled` columns by Gaussian-weighted combinations of `n_combined`
/// other columns (renormalized). Target and source indices are drawn
/// without replacement from the same seeded stream and recorded in the
/// label.
pub fn gen_spoiled(
    n: usize,
    l: usize,
    seed: u64,
    n_spoiled: usize,
    n_combined: usize,
) -> Result<Dictionary> {
    check_overcomplete(n, l)?;
    if n_spoiled + n_combined > l {
        return Err(CapsetError::InvalidShape(format!(
            "{n_spoiled} spoiled + {n_combined} source columns exceed L={l}"
        )));
    }
    if n_spoiled > 0 && n_combined == 0 {
        return Err(CapsetError::InvalidParam(
            "spoiled columns need at least one source column".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut matrix = random_unit_columns(n, l, &mut rng);
    if n_spoiled == 0 {
        return Dictionary::new(matrix, format!("random N={n} L={l} seed={seed}"), Some(seed));
    }

    let picked = index::sample(&mut rng, l, n_spoiled + n_combined).into_vec();
    let (targets, sources) = picked.split_at(n_spoiled);
    for &target in targets {
        loop {
            let mut combined = DVector::zeros(n);
            for &source in sources {
                let w: f64 = StandardNormal.sample(&mut rng);
                combined.axpy(w, &matrix.column(source), 1.0);
            }
            let norm = combined.norm();
            if norm > 0.0 {
                matrix.set_column(target, &(combined / norm));
                break;
            }
        }
    }
    let label = format!(
        "spoiled N={n} L={l} seed={seed} targets={targets:?} sources={sources:?}"
    );
    Dictionary::new(matrix, label, Some(seed))
}

/// Orthonormal DCT-II matrix with basis vectors as rows:
/// `C[k][i] = s_k cos(pi (2i + 1) k / 2n)`, `s_0 = sqrt(1/n)`, `s_k = sqrt(2/n)`.
pub fn dct_matrix(n: usize) -> DMatrix<f64> {
    let nf = n as f64;
    DMatrix::from_fn(n, n, |k, i| {
        let scale = if k == 0 { (1.0 / nf).sqrt() } else { (2.0 / nf).sqrt() };
        scale * (std::f64::consts::PI * (2 * i + 1) as f64 * k as f64 / (2.0 * nf)).cos()
    })
}

/// The orthonormal pair `[I, C^T]` of size N×2N.
pub fn gen_dct_pair(n: usize) -> Result<Dictionary> {
    if n < 2 {
        return Err(CapsetError::InvalidShape(format!("DCT pair needs N >= 2, got {n}")));
    }
    let c_t = dct_matrix(n).transpose();
    let mut matrix = DMatrix::zeros(n, 2 * n);
    matrix.view_mut((0, 0), (n, n)).fill_with_identity();
    matrix.view_mut((0, n), (n, n)).copy_from(&c_t);
    // Renormalize away the last-bit drift of the cosine sums.
    Dictionary::normalized(matrix, format!("dct N={n} L={}", 2 * n), None)
}

/// Ideal (Welch-bound) coherence of an N×L frame.
pub fn grassmanian_mu(n: usize, l: usize) -> Result<f64> {
    check_overcomplete(n, l)?;
    let (n, l) = (n as f64, l as f64);
    Ok(((l - n) / (n * (l - 1.0))).sqrt())
}

/// Gram-matrix features of a dictionary.
#[derive(Debug, Clone)]
pub struct CoherenceProfile {
    /// Mutual coherence: max off-diagonal `|G_ij|`.
    pub mu: f64,
    /// Per-column coherence `mu_k = max_{i != k} |G_ik|`.
    pub mu_k: Vec<f64>,
    /// Babel function indexed by `m`, with `babel[0] = 0`.
    pub babel: Vec<f64>,
    pub gram: DMatrix<f64>,
}

impl CoherenceProfile {
    /// Largest `m` with `mu_1(m-1) + mu_1(m) < 1`, or 0 if even `m = 1`
    /// fails. Limited to the computed range of the Babel function.
    pub fn babel_threshold(&self) -> usize {
        (1..self.babel.len())
            .take_while(|&m| self.babel[m - 1] + self.babel[m] < 1.0)
            .last()
            .unwrap_or(0)
    }
}

/// Computes the Gram matrix, per-column coherences and the Babel function
/// `mu_1(m)` for `m = 0..=max_babel_m`.
///
/// The inner maximum of the Babel function decouples per outside atom `eta`,
/// so `mu_1(m)` is the largest sum of the `m` biggest `|G_{i,eta}|`, `i != eta`.
pub fn coherence_profile(dict: &Dictionary, max_babel_m: usize) -> Result<CoherenceProfile> {
    let l = dict.cols();
    if max_babel_m >= l {
        return Err(CapsetError::InvalidParam(format!(
            "max_babel_m must be < L={l}, got {max_babel_m}"
        )));
    }
    let d = dict.matrix();
    let gram = d.transpose() * d;

    let per_column: Vec<(f64, Vec<f64>)> = (0..l)
        .into_par_iter()
        .map(|k| {
            let mut off: Vec<f64> = (0..l)
                .filter(|&i| i != k)
                .map(|i| gram[(i, k)].abs())
                .collect();
            off.sort_unstable_by(|a, b| b.total_cmp(a));
            let mu_k = off.first().copied().unwrap_or(0.0);
            let mut prefix = Vec::with_capacity(max_babel_m + 1);
            let mut acc = 0.0;
            prefix.push(0.0);
            for v in off.iter().take(max_babel_m) {
                acc += v;
                prefix.push(acc);
            }
            (mu_k, prefix)
        })
        .collect();

    let mu_k: Vec<f64> = per_column.iter().map(|(m, _)| *m).collect();
    let mu = mu_k.iter().copied().fold(0.0, f64::max);
    let babel = (0..=max_babel_m)
        .map(|m| per_column.iter().map(|(_, p)| p[m]).fold(0.0, f64::max))
        .collect();
    Ok(CoherenceProfile {
        mu,
        mu_k,
        babel,
        gram,
    })
}
