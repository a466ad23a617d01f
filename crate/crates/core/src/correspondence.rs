//! Correspondence analysis of a contingency table: the standardized matrix,
//! the SVD-based component scores used as responsiveness coordinates, and the
//! inertia bookkeeping that ties the decomposition back to chi-square.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use thiserror::Error;

use crate::crosstab::CrossTab;

/// Relative threshold under which a singular value is treated as a zero axis.
/// Axes below `ZERO_AXIS_RTOL * sigma_1` carry only numerical noise; their
/// scores are pinned to exactly zero so outputs are stable across platforms.
const ZERO_AXIS_RTOL: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum CaError {
    #[error("requested {requested} dimensions but the table supports at most {max}")]
    DimensionTooLarge { requested: usize, max: usize },
    #[error("embedding dimension must be at least 1")]
    ZeroDimensions,
}

/// How many component axes to retain in [`ca_embed`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dims {
    /// All nontrivial axes: `min(m, n) - 1`.
    All,
    /// Exactly `k` axes; must not exceed `min(m, n) - 1`.
    K(usize),
}

/// Singular values and K-dimensional component scores for every row and
/// column category.
///
/// Row scores are principal coordinates `z_ik = u_ik * sigma_k / sqrt(p_i+)`,
/// column scores `z_jk = v_jk * sigma_k / sqrt(p_+j)`, from the SVD of the
/// standardized residual matrix. Axes are ordered by descending singular
/// value, and each singular-vector pair is oriented so the row-vector entry
/// of largest magnitude is positive, which makes the embedding deterministic.
#[derive(Debug, Clone, Serialize)]
pub struct CaEmbedding {
    pub row_labels: Vec<String>,
    pub col_labels: Vec<String>,
    /// Non-increasing, each in [0, 1] up to roundoff.
    pub singular_values: Vec<f64>,
    /// m×K principal coordinates of the row categories.
    pub row_scores: Vec<Vec<f64>>,
    /// n×K principal coordinates of the column categories.
    pub col_scores: Vec<Vec<f64>>,
    /// Chi-square of the table divided by the grand total; equals the sum of
    /// squared singular values over all axes, retained or not.
    pub total_inertia: f64,
}

impl CaEmbedding {
    pub fn n_axes(&self) -> usize {
        self.singular_values.len()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("embedding serialization cannot fail")
    }
}

/// The row-standardized matrix: entry `(i, j)` is
/// `p_ij / (p_i+ * sqrt(p_+j)) - sqrt(p_+j)`.
///
/// Under row/column independence every entry vanishes.
pub fn standardized_matrix(ct: &CrossTab) -> Vec<Vec<f64>> {
    let (m, n) = (ct.n_rows(), ct.n_cols());
    (0..m)
        .map(|i| {
            (0..n)
                .map(|j| {
                    let sqrt_cj = ct.col_mass(j).sqrt();
                    ct.probability(i, j) / (ct.row_mass(i) * sqrt_cj) - sqrt_cj
                })
                .collect()
        })
        .collect()
}

/// The column-side analogue of [`standardized_matrix`]: entry `(i, j)` is
/// `p_ij / (p_+j * sqrt(p_i+)) - sqrt(p_i+)`.
pub fn standardized_matrix_cols(ct: &CrossTab) -> Vec<Vec<f64>> {
    let (m, n) = (ct.n_rows(), ct.n_cols());
    (0..m)
        .map(|i| {
            (0..n)
                .map(|j| {
                    let sqrt_ri = ct.row_mass(i).sqrt();
                    ct.probability(i, j) / (ct.col_mass(j) * sqrt_ri) - sqrt_ri
                })
                .collect()
        })
        .collect()
}

/// The standardized residual matrix
/// `S_ij = (p_ij - p_i+ * p_+j) / sqrt(p_i+ * p_+j)`, the SVD substrate.
///
/// It relates to the row-standardized matrix entrywise by
/// `X_ij = S_ij / sqrt(p_i+)`.
pub fn residual_matrix(ct: &CrossTab) -> Vec<Vec<f64>> {
    let (m, n) = (ct.n_rows(), ct.n_cols());
    (0..m)
        .map(|i| {
            (0..n)
                .map(|j| {
                    let (ri, cj) = (ct.row_mass(i), ct.col_mass(j));
                    (ct.probability(i, j) - ri * cj) / (ri * cj).sqrt()
                })
                .collect()
        })
        .collect()
}

/// Total inertia: `sum_ij (p_ij - p_i+ p_+j)^2 / (p_i+ p_+j)`, the table's
/// chi-square statistic divided by the grand total. Computed by direct
/// summation, independently of any decomposition, so it doubles as a check
/// on the sum of squared singular values.
pub fn total_inertia(ct: &CrossTab) -> f64 {
    let (m, n) = (ct.n_rows(), ct.n_cols());
    let mut acc = 0.0;
    for i in 0..m {
        for j in 0..n {
            let expected = ct.row_mass(i) * ct.col_mass(j);
            let dev = ct.probability(i, j) - expected;
            acc += dev * dev / expected;
        }
    }
    acc
}

/// Computes the correspondence-analysis embedding of a contingency table.
///
/// The residual matrix is decomposed by SVD; the trivial dimension is absent
/// from it by construction, so at most `min(m, n) - 1` informative axes
/// exist. Axes whose singular value falls below `1e-10 * sigma_1` are kept in
/// place but zeroed, scores included.
pub fn ca_embed(ct: &CrossTab, dims: Dims) -> Result<CaEmbedding, CaError> {
    let (m, n) = (ct.n_rows(), ct.n_cols());
    let max_axes = m.min(n) - 1;
    let k = match dims {
        Dims::All => max_axes,
        Dims::K(0) => return Err(CaError::ZeroDimensions),
        Dims::K(k) if k > max_axes => {
            return Err(CaError::DimensionTooLarge {
                requested: k,
                max: max_axes,
            })
        }
        Dims::K(k) => k,
    };

    let s = DMatrix::from_fn(m, n, |i, j| {
        let (ri, cj) = (ct.row_mass(i), ct.col_mass(j));
        (ct.probability(i, j) - ri * cj) / (ri * cj).sqrt()
    });

    // The residual matrix is always rank-deficient: the square roots of the
    // column masses span an exact null direction. A general-purpose two-sided
    // SVD can lose several digits on such inputs, so decompose through the
    // smaller side's Gram matrix instead — a symmetric eigenproblem is stable
    // here — and derive the other side's vectors as S v / sigma (resp.
    // S^T u / sigma), which also keeps identical profiles exactly co-located.
    let cols_side = n <= m;
    let gram = if cols_side {
        s.transpose() * &s
    } else {
        &s * s.transpose()
    };
    let eig = gram.symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .total_cmp(&eig.eigenvalues[a])
            .then(a.cmp(&b))
    });
    let sigma: Vec<f64> = order
        .iter()
        .map(|&ax| eig.eigenvalues[ax].max(0.0).sqrt())
        .collect();

    let sigma_max = sigma.first().copied().unwrap_or(0.0);
    let tol = ZERO_AXIS_RTOL * sigma_max;

    let mut singular_values = Vec::with_capacity(k);
    let mut row_scores = vec![Vec::with_capacity(k); m];
    let mut col_scores = vec![Vec::with_capacity(k); n];
    for rank in 0..k {
        let sv = sigma[rank];
        if sv <= tol || sv <= 0.0 {
            singular_values.push(0.0);
            for scores in row_scores.iter_mut() {
                scores.push(0.0);
            }
            for scores in col_scores.iter_mut() {
                scores.push(0.0);
            }
            continue;
        }
        singular_values.push(sv);
        let w = eig.eigenvectors.column(order[rank]).clone_owned();
        let (mut u, mut v): (DVector<f64>, DVector<f64>) = if cols_side {
            let u = (&s * &w) / sv;
            (u, w)
        } else {
            let v = (s.transpose() * &w) / sv;
            (w, v)
        };

        // Orient the axis so the largest-magnitude row-vector entry is
        // positive; u and v flip together to preserve the decomposition.
        let mut pivot = 0;
        for i in 1..m {
            if u[i].abs() > u[pivot].abs() {
                pivot = i;
            }
        }
        if u[pivot] < 0.0 {
            u.neg_mut();
            v.neg_mut();
        }

        for (i, scores) in row_scores.iter_mut().enumerate() {
            scores.push(u[i] * sv / ct.row_mass(i).sqrt());
        }
        for (j, scores) in col_scores.iter_mut().enumerate() {
            scores.push(v[j] * sv / ct.col_mass(j).sqrt());
        }
    }

    Ok(CaEmbedding {
        row_labels: ct.row_labels().to_vec(),
        col_labels: ct.col_labels().to_vec(),
        singular_values,
        row_scores,
        col_scores,
        total_inertia: total_inertia(ct),
    })
}

/// Closed-form first singular value of a 2×2 table: the absolute phi
/// coefficient `|p11 p22 - p12 p21| / sqrt(p1+ p2+ p+1 p+2)`.
pub fn phi_2x2(ct: &CrossTab) -> Option<f64> {
    if ct.n_rows() != 2 || ct.n_cols() != 2 {
        return None;
    }
    let p = |i, j| ct.probability(i, j);
    let num = (p(0, 0) * p(1, 1) - p(0, 1) * p(1, 0)).abs();
    let den = (ct.row_mass(0) * ct.row_mass(1) * ct.col_mass(0) * ct.col_mass(1)).sqrt();
    Some(num / den)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn table(counts: &[&[u64]]) -> CrossTab {
        let m = counts.len();
        let n = counts[0].len();
        let rows: Vec<String> = (0..m).map(|i| format!("r{i}")).collect();
        let cols: Vec<String> = (0..n).map(|j| format!("c{j}")).collect();
        CrossTab::from_counts(
            rows,
            cols,
            counts.iter().map(|r| r.to_vec()).collect(),
        )
        .unwrap()
    }

    fn random_table(rng: &mut ChaCha8Rng, m: usize, n: usize) -> CrossTab {
        loop {
            let counts: Vec<Vec<u64>> = (0..m)
                .map(|_| (0..n).map(|_| rng.random_range(0..6)).collect())
                .collect();
            let rows: Vec<String> = (0..m).map(|i| format!("r{i}")).collect();
            let cols: Vec<String> = (0..n).map(|j| format!("c{j}")).collect();
            if let Ok(ct) = CrossTab::from_counts(rows, cols, counts) {
                return ct;
            }
        }
    }

    #[test]
    fn independence_table_standardizes_to_zero() {
        // counts[i][j] = a_i * b_j makes p_ij = p_i+ * p_+j exactly.
        let ct = table(&[&[1, 2, 3], &[2, 4, 6], &[3, 6, 9]]);
        for row in standardized_matrix(&ct) {
            for x in row {
                assert!(x.abs() < 1e-12);
            }
        }
        assert!(total_inertia(&ct) < 1e-12);
        let emb = ca_embed(&ct, Dims::All).unwrap();
        for &sv in &emb.singular_values {
            assert!(sv.abs() < 1e-10);
        }
        for row in emb.row_scores.iter().chain(emb.col_scores.iter()) {
            for &z in row {
                assert!(z.abs() < 1e-10);
            }
        }
    }

    #[test]
    fn diagonal_2x2_standardized_entries() {
        let ct = table(&[&[2, 0], &[0, 2]]);
        let x = standardized_matrix(&ct);
        let s = std::f64::consts::FRAC_1_SQRT_2; // evaluated from the formula
        assert_abs_diff_eq!(x[0][0], s, epsilon = 1e-15);
        assert_abs_diff_eq!(x[0][1], -s, epsilon = 1e-15);
        assert_abs_diff_eq!(x[1][0], -s, epsilon = 1e-15);
        assert_abs_diff_eq!(x[1][1], s, epsilon = 1e-15);
    }

    #[test]
    fn single_cell_standardizes_to_zero() {
        let ct = table(&[&[5]]);
        assert_abs_diff_eq!(standardized_matrix(&ct)[0][0], 0.0, epsilon = 1e-15);
        let emb = ca_embed(&ct, Dims::All).unwrap();
        assert!(emb.singular_values.is_empty());
        assert_eq!(emb.row_scores, vec![Vec::<f64>::new()]);
    }

    #[test]
    fn first_singular_value_matches_phi_on_2x2() {
        let cases: [&[&[u64]]; 3] = [
            &[&[2, 0], &[0, 2]],
            &[&[3, 1], &[1, 3]],
            &[&[5, 2], &[1, 4]],
        ];
        for counts in cases {
            let ct = table(counts);
            let emb = ca_embed(&ct, Dims::All).unwrap();
            let phi = phi_2x2(&ct).unwrap();
            assert_abs_diff_eq!(emb.singular_values[0], phi, epsilon = 1e-12);
        }
        // The perfectly associated diagonal table has phi exactly 1.
        let ct = table(&[&[2, 0], &[0, 2]]);
        assert_abs_diff_eq!(phi_2x2(&ct).unwrap(), 1.0, epsilon = 1e-15);
        let balanced = table(&[&[3, 1], &[1, 3]]);
        assert_abs_diff_eq!(phi_2x2(&balanced).unwrap(), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn block_diagonal_table_has_unit_first_axis_with_block_signs() {
        let ct = table(&[
            &[1, 1, 0, 0],
            &[1, 1, 0, 0],
            &[0, 0, 1, 1],
            &[0, 0, 1, 1],
        ]);
        let emb = ca_embed(&ct, Dims::All).unwrap();
        assert_abs_diff_eq!(emb.singular_values[0], 1.0, epsilon = 1e-12);
        // Rows and columns of the same block share the axis-1 sign.
        let sign = |v: f64| v.signum();
        assert_eq!(sign(emb.row_scores[0][0]), sign(emb.row_scores[1][0]));
        assert_eq!(sign(emb.row_scores[2][0]), sign(emb.row_scores[3][0]));
        assert_ne!(sign(emb.row_scores[0][0]), sign(emb.row_scores[2][0]));
        assert_eq!(sign(emb.row_scores[0][0]), sign(emb.col_scores[0][0]));
        assert_eq!(sign(emb.row_scores[0][0]), sign(emb.col_scores[1][0]));
        assert_eq!(sign(emb.row_scores[2][0]), sign(emb.col_scores[2][0]));
        assert_eq!(sign(emb.row_scores[2][0]), sign(emb.col_scores[3][0]));
    }

    #[test]
    fn x_equals_s_over_sqrt_row_mass() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let ct = random_table(&mut rng, 4, 5);
            let x = standardized_matrix(&ct);
            let s = residual_matrix(&ct);
            for i in 0..4 {
                for j in 0..5 {
                    let lhs = x[i][j];
                    let rhs = s[i][j] / ct.row_mass(i).sqrt();
                    assert!((lhs - rhs).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn scores_are_mass_centered() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..20 {
            let ct = random_table(&mut rng, 5, 4);
            let emb = ca_embed(&ct, Dims::All).unwrap();
            for k in 0..emb.n_axes() {
                let row_mean: f64 = (0..ct.n_rows())
                    .map(|i| ct.row_mass(i) * emb.row_scores[i][k])
                    .sum();
                let col_mean: f64 = (0..ct.n_cols())
                    .map(|j| ct.col_mass(j) * emb.col_scores[j][k])
                    .sum();
                assert!(row_mean.abs() < 1e-9);
                assert!(col_mean.abs() < 1e-9);
            }
        }
    }

    #[test]
    fn reconstitution_recovers_probabilities() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..20 {
            let ct = random_table(&mut rng, 4, 4);
            let emb = ca_embed(&ct, Dims::All).unwrap();
            for i in 0..ct.n_rows() {
                for j in 0..ct.n_cols() {
                    let mut inner = 0.0;
                    for k in 0..emb.n_axes() {
                        if emb.singular_values[k] > 0.0 {
                            inner += emb.row_scores[i][k] * emb.col_scores[j][k]
                                / emb.singular_values[k];
                        }
                    }
                    let rebuilt = ct.row_mass(i) * ct.col_mass(j) * (1.0 + inner);
                    assert!((rebuilt - ct.probability(i, j)).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn inertia_identity_holds() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        for _ in 0..20 {
            let ct = random_table(&mut rng, 5, 4);
            let emb = ca_embed(&ct, Dims::All).unwrap();
            let sum_sq: f64 = emb.singular_values.iter().map(|s| s * s).sum();
            assert!((sum_sq - total_inertia(&ct)).abs() < 1e-9);
        }
    }

    #[test]
    fn row_permutation_permutes_scores() {
        let ct = table(&[&[3, 1, 0], &[1, 2, 2], &[0, 1, 4]]);
        let permuted = table(&[&[0, 1, 4], &[3, 1, 0], &[1, 2, 2]]);
        let a = ca_embed(&ct, Dims::All).unwrap();
        let b = ca_embed(&permuted, Dims::All).unwrap();
        for (sa, sb) in a.singular_values.iter().zip(&b.singular_values) {
            assert!((sa - sb).abs() < 1e-12);
        }
        // Row 0 of the original is row 1 of the permuted table; score rows
        // must agree up to the (deterministic, magnitude-based) axis signs.
        for k in 0..a.n_axes() {
            assert!((a.row_scores[0][k].abs() - b.row_scores[1][k].abs()).abs() < 1e-9);
            assert!((a.row_scores[1][k].abs() - b.row_scores[2][k].abs()).abs() < 1e-9);
            assert!((a.row_scores[2][k].abs() - b.row_scores[0][k].abs()).abs() < 1e-9);
        }
    }

    #[test]
    fn dims_validation() {
        let ct = table(&[&[1, 2, 3], &[3, 1, 2], &[2, 3, 1]]);
        assert!(matches!(
            ca_embed(&ct, Dims::K(3)),
            Err(CaError::DimensionTooLarge { requested: 3, max: 2 })
        ));
        assert!(matches!(ca_embed(&ct, Dims::K(0)), Err(CaError::ZeroDimensions)));
        let emb = ca_embed(&ct, Dims::K(1)).unwrap();
        assert_eq!(emb.n_axes(), 1);
        assert_eq!(emb.row_scores[0].len(), 1);
    }

    #[test]
    fn purchase_city_table_axes_are_all_unit() {
        let ct = CrossTab::from_pairs(&crate::testdata::purchase_city_rows()).unwrap();
        let emb = ca_embed(&ct, Dims::All).unwrap();
        // Every city occurs exactly once, so each nontrivial axis separates
        // perfectly associated categories: all five singular values are 1.
        assert_eq!(emb.n_axes(), 5);
        for &sv in &emb.singular_values {
            assert_abs_diff_eq!(sv, 1.0, epsilon = 1e-9);
        }
    }
}
