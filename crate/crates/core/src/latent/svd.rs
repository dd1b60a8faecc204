//! Principal axes of a data matrix via the eigendecomposition of the smaller
//! Gram matrix.
//!
//! With N rows of length T and N ≤ T the right singular vectors are recovered
//! from the N×N matrix XXᵀ as v = Xᵀu/s, which avoids the T×T covariance for
//! long signatures. The recovered rows are re-orthonormalized and completed
//! to a full basis when the data has fewer non-zero directions than requested.

use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::{Array1, Array2, ArrayView2, Axis};

use super::ComponentSelection;
use crate::error::{Error, Result};

pub(crate) struct PrincipalAxes {
    pub mean: Array1<f64>,
    /// k×T, orthonormal rows, sorted by decreasing variance.
    pub components: Array2<f64>,
    pub explained_variance_ratio: Array1<f64>,
}

/// Eigenvalues below this fraction of the largest one are treated as zero.
const RANK_TOL: f64 = 1e-12;

fn to_nalgebra(a: &Array2<f64>) -> DMatrix<f64> {
    let (r, c) = a.dim();
    DMatrix::from_fn(r, c, |i, j| a[[i, j]])
}

/// Eigenpairs sorted by decreasing eigenvalue; ties keep solver order.
fn sorted_eigen(sym: &Array2<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let eig = SymmetricEigen::new(to_nalgebra(sym));
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .expect("finite eigenvalues")
    });
    let values = order.iter().map(|&i| eig.eigenvalues[i].max(0.0)).collect();
    let vectors = DMatrix::from_fn(eig.eigenvectors.nrows(), order.len(), |r, c| {
        eig.eigenvectors[(r, order[c])]
    });
    (values, vectors)
}

fn select_count(values: &[f64], selection: ComponentSelection, max: usize) -> Result<usize> {
    match selection {
        ComponentSelection::Count(l) => {
            if l == 0 || l > max {
                return Err(Error::Dimension(format!(
                    "requested {l} components, at most {max} are available"
                )));
            }
            Ok(l)
        }
        ComponentSelection::VarianceThreshold(threshold) => {
            if !(threshold > 0.0 && threshold <= 1.0) {
                return Err(Error::Config(format!(
                    "variance threshold must lie in (0, 1], got {threshold}"
                )));
            }
            let total: f64 = values.iter().sum();
            if total <= 0.0 {
                return Ok(1);
            }
            let mut cum = 0.0;
            for (i, v) in values.iter().enumerate().take(max) {
                cum += v / total;
                if cum >= threshold - 1e-12 {
                    return Ok(i + 1);
                }
            }
            Ok(max)
        }
    }
}

/// Modified Gram-Schmidt, applied twice for numerical orthogonality. Rows
/// that collapse are replaced by the first standard basis vector that is not
/// already spanned.
fn orthonormalize(rows: &mut Array2<f64>, valid: usize) {
    let (k, t) = rows.dim();
    let mut next_basis = 0usize;
    for i in 0..k {
        let mut accepted = false;
        if i < valid {
            accepted = orthogonalize_row(rows, i);
        }
        while !accepted {
            assert!(next_basis < t, "cannot complete basis beyond dimension");
            rows.row_mut(i).fill(0.0);
            rows[[i, next_basis]] = 1.0;
            next_basis += 1;
            accepted = orthogonalize_row(rows, i);
        }
    }
}

fn orthogonalize_row(rows: &mut Array2<f64>, i: usize) -> bool {
    let before = rows.row(i).dot(&rows.row(i)).sqrt();
    if before == 0.0 {
        return false;
    }
    for _ in 0..2 {
        for j in 0..i {
            let proj = rows.row(i).dot(&rows.row(j));
            let prev = rows.row(j).to_owned();
            rows.row_mut(i).scaled_add(-proj, &prev);
        }
    }
    let after = rows.row(i).dot(&rows.row(i)).sqrt();
    if after < 0.5 * before || after == 0.0 {
        return false;
    }
    rows.row_mut(i).mapv_inplace(|v| v / after);
    true
}

/// Flips each row so that its largest-magnitude entry is positive.
fn fix_signs(rows: &mut Array2<f64>) {
    for mut row in rows.rows_mut() {
        let mut best = 0usize;
        for (j, v) in row.iter().enumerate() {
            if v.abs() > row[best].abs() {
                best = j;
            }
        }
        if row[best] < 0.0 {
            row.mapv_inplace(|v| -v);
        }
    }
}

pub(crate) fn principal_axes(
    x: ArrayView2<'_, f64>,
    selection: ComponentSelection,
) -> Result<PrincipalAxes> {
    let (n, t) = x.dim();
    axes_impl(x, selection, n.min(t))
}

/// A complete T×T rotation: principal axes first, then an orthonormal
/// completion for directions the data does not span.
pub(crate) fn full_rotation(x: ArrayView2<'_, f64>) -> Result<PrincipalAxes> {
    let t = x.ncols();
    axes_impl(x, ComponentSelection::Count(t), t)
}

fn axes_impl(
    x: ArrayView2<'_, f64>,
    selection: ComponentSelection,
    max: usize,
) -> Result<PrincipalAxes> {
    let (n, t) = x.dim();
    if n == 0 || t == 0 {
        return Err(Error::Validation("PCA input is empty".into()));
    }
    let mean = x.mean_axis(Axis(0)).expect("non-empty");
    let centered = &x - &mean;

    let (values, mut components, valid) = if n <= t {
        let gram = centered.dot(&centered.t());
        let (values, u) = sorted_eigen(&gram);
        let k = select_count(&values, selection, max)?;
        let top = values[0];
        let mut comps = Array2::<f64>::zeros((k, t));
        let mut valid = 0;
        for c in 0..k.min(n) {
            if values[c] <= RANK_TOL * top || top == 0.0 {
                break;
            }
            let s = values[c].sqrt();
            let u_col = Array1::from_iter(u.column(c).iter().copied());
            let v = centered.t().dot(&u_col) / s;
            comps.row_mut(c).assign(&v);
            valid += 1;
        }
        (values, comps, valid)
    } else {
        let cov = centered.t().dot(&centered);
        let (values, v) = sorted_eigen(&cov);
        let k = select_count(&values, selection, max)?;
        let comps = Array2::from_shape_fn((k, t), |(c, j)| v[(j, c)]);
        (values, comps, k)
    };

    orthonormalize(&mut components, valid);
    fix_signs(&mut components);

    let total: f64 = values.iter().sum();
    let k = components.nrows();
    let explained_variance_ratio = if total > 0.0 {
        Array1::from_iter((0..k).map(|i| values.get(i).copied().unwrap_or(0.0) / total))
    } else {
        Array1::zeros(k)
    };
    Ok(PrincipalAxes {
        mean,
        components,
        explained_variance_ratio,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn gram_path_matches_covariance_eigenvectors() {
        // Gram-path components must match the covariance eigenvectors.
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let x = Array2::from_shape_fn((6, 9), |_| rng.random_range(-1.0..1.0));
        let axes = principal_axes(x.view(), ComponentSelection::Count(4)).unwrap();
        let centered = &x - &axes.mean;
        let cov = centered.t().dot(&centered);
        let (values, v) = sorted_eigen(&cov);
        for c in 0..4 {
            let col = Array1::from_iter(v.column(c).iter().copied());
            let dot = axes.components.row(c).dot(&col).abs();
            assert!((dot - 1.0).abs() < 1e-9, "component {c}: |cos| = {dot}");
            let total: f64 = values.iter().sum();
            assert!((axes.explained_variance_ratio[c] - values[c] / total).abs() < 1e-12);
        }
    }

    #[test]
    fn tall_path_orthonormal() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let x = Array2::from_shape_fn((30, 5), |_| rng.random_range(-1.0..1.0));
        let axes = principal_axes(x.view(), ComponentSelection::Count(5)).unwrap();
        let g = axes.components.dot(&axes.components.t());
        assert!((g - Array2::<f64>::eye(5)).iter().all(|v| v.abs() < 1e-10));
        assert!((axes.explained_variance_ratio.sum() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rank_deficient_basis_is_completed() {
        let x = ndarray::array![[1.0, 0.0, 0.0], [-1.0, 0.0, 0.0], [3.0, 0.0, 0.0]];
        let axes = principal_axes(x.view(), ComponentSelection::Count(3)).unwrap();
        let g = axes.components.dot(&axes.components.t());
        assert!((g - Array2::<f64>::eye(3)).iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn sign_convention_is_largest_entry_positive() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let x = Array2::from_shape_fn((8, 12), |_| rng.random_range(-1.0..1.0));
        let axes = principal_axes(x.view(), ComponentSelection::Count(5)).unwrap();
        for row in axes.components.rows() {
            let max = row.iter().copied().fold(0.0f64, |a, b| if b.abs() > a.abs() { b } else { a });
            assert!(max > 0.0);
        }
    }
}
