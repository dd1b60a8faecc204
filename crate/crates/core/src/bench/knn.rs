use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};

use crate::error::{Error, Result};

pub const DEFAULT_KNN_K: usize = 5;

/// K-nearest-neighbour regressor on standardized features.
#[derive(Debug, Clone, PartialEq)]
pub struct KnnModel {
    mean: Array1<f64>,
    scale: Array1<f64>,
    x: Array2<f64>,
    y: Array2<f64>,
    k: usize,
}

fn standardize_into(row: ArrayView1<'_, f64>, mean: &Array1<f64>, scale: &Array1<f64>, out: &mut [f64]) {
    for (j, o) in out.iter_mut().enumerate() {
        *o = (row[j] - mean[j]) / scale[j];
    }
}

/// Column statistics come from the training rows; zero-variance columns
/// keep unit scale.
pub fn knn_fit(features: ArrayView2<'_, f64>, targets: ArrayView2<'_, f64>, k: usize) -> Result<KnnModel> {
    let n = features.nrows();
    if n == 0 {
        return Err(Error::Empty("KNN training set is empty".into()));
    }
    if targets.nrows() != n {
        return Err(Error::Dimension(format!(
            "{n} feature rows but {} target rows",
            targets.nrows()
        )));
    }
    if k == 0 || k > n {
        return Err(Error::Config(format!("knn k must lie in 1..={n}, got {k}")));
    }
    let mean = features.mean_axis(Axis(0)).expect("non-empty");
    let scale = features.std_axis(Axis(0), 0.0).mapv(|s| if s > 0.0 { s } else { 1.0 });
    let mut x = Array2::zeros(features.dim());
    for (i, row) in features.rows().into_iter().enumerate() {
        let mut out = x.row_mut(i);
        standardize_into(row, &mean, &scale, out.as_slice_mut().expect("owned row"));
    }
    Ok(KnnModel {
        mean,
        scale,
        x,
        y: targets.to_owned(),
        k,
    })
}

/// Unweighted mean of the k nearest training targets. Equal distances are
/// resolved in favour of the lower training row.
pub fn knn_predict(model: &KnnModel, query: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    if query.ncols() != model.x.ncols() {
        return Err(Error::Dimension(format!(
            "query has {} features, model {}",
            query.ncols(),
            model.x.ncols()
        )));
    }
    let n = model.x.nrows();
    let mut out = Array2::zeros((query.nrows(), model.y.ncols()));
    let mut q = vec![0.0; model.x.ncols()];
    let mut dists: Vec<(f64, usize)> = Vec::with_capacity(n);
    for (i, row) in query.rows().into_iter().enumerate() {
        standardize_into(row, &model.mean, &model.scale, &mut q);
        dists.clear();
        for (j, train) in model.x.rows().into_iter().enumerate() {
            let d: f64 = train.iter().zip(&q).map(|(a, b)| (a - b) * (a - b)).sum();
            dists.push((d, j));
        }
        let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if model.k < n {
            dists.select_nth_unstable_by(model.k - 1, cmp);
        }
        let mut acc = out.row_mut(i);
        for &(_, j) in &dists[..model.k] {
            acc += &model.y.row(j);
        }
        acc /= model.k as f64;
    }
    Ok(out)
}
