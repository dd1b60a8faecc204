//! Phase mirroring, scenario activation, aggregation, power shares and
//! train/test splits.

mod pipeline;
mod split;

pub use pipeline::{make_datasets, AggregationConfig, DatasetConfig, ModelSource};
pub use split::{split_dataset, SplitMode, SplitPair};

use ndarray::{Array2, ArrayView1, ArrayView2};
use rand::seq::index;
use rand::Rng;

use crate::error::{Error, Noted, Result};
use crate::signalio::{SignatureMatrix, VoltageReference};

/// Pearson correlation. When exactly one input is constant the correlation
/// is reported as 0.
pub fn pearson(x: &[f64], v: &[f64]) -> Result<f64> {
    if x.len() != v.len() || x.len() < 2 {
        return Err(Error::Dimension(format!(
            "pearson needs equal lengths ≥ 2, got {} and {}",
            x.len(),
            v.len()
        )));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let mv = v.iter().sum::<f64>() / n;
    let (mut sxv, mut sxx, mut svv) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(v) {
        let (da, db) = (a - mx, b - mv);
        sxv += da * db;
        sxx += da * da;
        svv += db * db;
    }
    match (sxx > 0.0, svv > 0.0) {
        (false, false) => Err(Error::UndefinedCorrelation),
        (true, true) => Ok((sxv / (sxx.sqrt() * svv.sqrt())).clamp(-1.0, 1.0)),
        _ => Ok(0.0),
    }
}

/// Negates, in place, every row that correlates negatively with `v`.
/// Returns notes for constant rows, which are left untouched.
pub(crate) fn mirror_rows(x: &mut Array2<f64>, v: &[f64]) -> Result<Vec<String>> {
    if x.ncols() != v.len() {
        return Err(Error::Dimension(format!(
            "signatures have {} samples, voltage reference has {}",
            x.ncols(),
            v.len()
        )));
    }
    let mut notes = Vec::new();
    for (i, mut row) in x.rows_mut().into_iter().enumerate() {
        let first = row[0];
        if row.iter().all(|s| *s == first) {
            notes.push(format!("cond_mirror: row {i} is constant; left untouched"));
            continue;
        }
        let r = pearson(row.as_slice().expect("standard layout"), v)?;
        if r < 0.0 {
            row.mapv_inplace(|s| -s);
        }
    }
    Ok(notes)
}

/// Flips rows whose Pearson correlation with the voltage is negative so that
/// every signature is in phase with the grid.
pub fn cond_mirror(x_g: &SignatureMatrix, v: &VoltageReference) -> Result<Noted<SignatureMatrix>> {
    let mut data = x_g.data().as_standard_layout().into_owned();
    let notes = mirror_rows(&mut data, v.samples())?;
    Ok(Noted {
        value: SignatureMatrix::from_parts_unchecked(data, x_g.sample_rate_hz(), x_g.samples_per_cycle()),
        notes,
    })
}

/// Binary scenario-by-appliance matrix, stored as the sorted active
/// appliance indices of each scenario.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActivationMatrix {
    active: Vec<Vec<usize>>,
    n_appliances: usize,
    k_bounds: (usize, usize),
}

impl ActivationMatrix {
    pub fn from_rows(active: Vec<Vec<usize>>, n_appliances: usize, k_bounds: (usize, usize)) -> Result<Self> {
        let (k_min, k_max) = k_bounds;
        for (i, row) in active.iter().enumerate() {
            if row.len() < k_min || row.len() > k_max {
                return Err(Error::Validation(format!(
                    "scenario {i} activates {} appliances, bounds are [{k_min}, {k_max}]",
                    row.len()
                )));
            }
            if row.windows(2).any(|w| w[0] >= w[1]) || row.iter().any(|&j| j >= n_appliances) {
                return Err(Error::Validation(format!(
                    "scenario {i} has unsorted, repeated or out-of-range appliance indices"
                )));
            }
        }
        Ok(Self {
            active,
            n_appliances,
            k_bounds,
        })
    }

    /// Scenario count A.
    pub fn rows(&self) -> usize {
        self.active.len()
    }

    /// Appliance count N.
    pub fn cols(&self) -> usize {
        self.n_appliances
    }

    pub fn k_bounds(&self) -> (usize, usize) {
        self.k_bounds
    }

    pub fn active(&self, scenario: usize) -> &[usize] {
        &self.active[scenario]
    }

    pub fn row_sum(&self, scenario: usize) -> usize {
        self.active[scenario].len()
    }

    pub fn to_dense(&self) -> Array2<f64> {
        let mut a = Array2::zeros((self.rows(), self.n_appliances));
        for (i, row) in self.active.iter().enumerate() {
            for &j in row {
                a[[i, j]] = 1.0;
            }
        }
        a
    }

    pub(crate) fn select(&self, rows: &[usize]) -> Self {
        Self {
            active: rows.iter().map(|&i| self.active[i].clone()).collect(),
            n_appliances: self.n_appliances,
            k_bounds: self.k_bounds,
        }
    }
}

pub fn build_activation_matrix<R: Rng + ?Sized>(
    a_rows: usize,
    n: usize,
    k_min: usize,
    k_max: usize,
    rng: &mut R,
) -> Result<ActivationMatrix> {
    if k_min == 0 || k_min > k_max || k_max > n {
        return Err(Error::Config(format!(
            "activation bounds must satisfy 1 ≤ k_min ≤ k_max ≤ N, got k_min={k_min}, k_max={k_max}, N={n}"
        )));
    }
    let active = (0..a_rows)
        .map(|_| {
            let k = rng.random_range(k_min..=k_max);
            let mut idx = index::sample(rng, n, k).into_vec();
            idx.sort_unstable();
            idx
        })
        .collect();
    Ok(ActivationMatrix {
        active,
        n_appliances: n,
        k_bounds: (k_min, k_max),
    })
}

fn sum_active(active: &[usize], x_g: ArrayView2<'_, f64>, mut out: ndarray::ArrayViewMut1<'_, f64>) {
    out.fill(0.0);
    for &j in active {
        out += &x_g.row(j);
    }
}

/// Aggregates the listed scenarios only, in the given order.
pub(crate) fn aggregate_rows(
    activation: &ActivationMatrix,
    scenarios: &[usize],
    x_g: ArrayView2<'_, f64>,
) -> Array2<f64> {
    let mut out = Array2::zeros((scenarios.len(), x_g.ncols()));
    for (row, &i) in out.rows_mut().into_iter().zip(scenarios) {
        sum_active(activation.active(i), x_g, row);
    }
    out
}

/// x_a = activation·x_g, each row summed over its active appliances in
/// increasing index order.
pub fn aggregate_signatures(activation: &ActivationMatrix, x_g: &SignatureMatrix) -> Result<SignatureMatrix> {
    if activation.cols() != x_g.rows() {
        return Err(Error::Dimension(format!(
            "activation has {} appliance columns, x_g has {} rows",
            activation.cols(),
            x_g.rows()
        )));
    }
    let all: Vec<usize> = (0..activation.rows()).collect();
    let data = aggregate_rows(activation, &all, x_g.data().view());
    Ok(SignatureMatrix::from_parts_unchecked(data, x_g.sample_rate_hz(), x_g.samples_per_cycle()))
}

/// Mean of x_j ⊙ v for every appliance row.
pub(crate) fn appliance_power(x_g: ArrayView2<'_, f64>, v: &[f64]) -> Vec<f64> {
    let v = ArrayView1::from(v);
    let t = v.len() as f64;
    x_g.rows().into_iter().map(|row| row.dot(&v) / t).collect()
}

pub(crate) fn shares_from_power(
    activation: &ActivationMatrix,
    power: &[f64],
    y_class: &[usize],
    n_classes: usize,
    normalize: bool,
) -> Noted<Array2<f64>> {
    let mut p = Array2::zeros((activation.rows(), n_classes));
    let mut notes = Vec::new();
    for i in 0..activation.rows() {
        let mut row = p.row_mut(i);
        for &j in activation.active(i) {
            row[y_class[j]] += power[j];
        }
        for d in 0..n_classes {
            if row[d] < 0.0 {
                notes.push(format!(
                    "power shares: scenario {i} class {d} has negative active power {:.6e} W; clamped to 0",
                    row[d]
                ));
                row[d] = 0.0;
            }
        }
        if normalize {
            let total = row.sum();
            if total > 0.0 {
                row /= total;
            }
        }
    }
    Noted { value: p, notes }
}

/// Per-scenario active power of each class; with `normalize` the rows are
/// scaled to sum to one. Negative class power is clamped to zero and noted.
pub fn compute_power_shares(
    activation: &ActivationMatrix,
    x_g: &SignatureMatrix,
    v: &VoltageReference,
    y_class: &[usize],
    n_classes: usize,
    normalize: bool,
) -> Result<Noted<Array2<f64>>> {
    if y_class.len() != x_g.rows() || activation.cols() != x_g.rows() {
        return Err(Error::Dimension(format!(
            "x_g has {} rows, labels {} entries, activation {} columns",
            x_g.rows(),
            y_class.len(),
            activation.cols()
        )));
    }
    if v.len() != x_g.cols() {
        return Err(Error::Dimension(format!(
            "voltage reference has {} samples, signatures have {}",
            v.len(),
            x_g.cols()
        )));
    }
    if let Some(&bad) = y_class.iter().find(|&&c| c >= n_classes) {
        return Err(Error::Validation(format!("class label {bad} outside 0..{n_classes}")));
    }
    let power = appliance_power(x_g.data().view(), v.samples());
    Ok(shares_from_power(activation, &power, y_class, n_classes, normalize))
}

/// Indicator of every global brand id (class·B + brand) present in each
/// scenario.
pub(crate) fn brand_indicators(
    activation: &ActivationMatrix,
    global_brand: &[usize],
    n_brands_total: usize,
) -> Array2<u8> {
    let mut y = Array2::zeros((activation.rows(), n_brands_total));
    for i in 0..activation.rows() {
        for &j in activation.active(i) {
            y[[i, global_brand[j]]] = 1;
        }
    }
    y
}

/// A fully labeled set of aggregate scenarios.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub x_a: SignatureMatrix,
    /// A×D, 1 where the class has positive power share.
    pub y_class_ind: Array2<u8>,
    /// A×(D·B) over global brand ids class·B + brand.
    pub y_brand_ind: Array2<u8>,
    pub p_a: Array2<f64>,
    pub activation: ActivationMatrix,
    pub n_classes: usize,
    pub brands_per_class: usize,
    /// Ordered key/value echo of the run that produced the data, followed by
    /// any notes recorded along the way.
    pub provenance: Vec<(String, String)>,
}

impl LabeledDataset {
    pub fn rows(&self) -> usize {
        self.x_a.rows()
    }

    pub(crate) fn select(&self, rows: &[usize]) -> Self {
        let data = self.x_a.data().select(ndarray::Axis(0), rows);
        Self {
            x_a: SignatureMatrix::from_parts_unchecked(
                data,
                self.x_a.sample_rate_hz(),
                self.x_a.samples_per_cycle(),
            ),
            y_class_ind: self.y_class_ind.select(ndarray::Axis(0), rows),
            y_brand_ind: self.y_brand_ind.select(ndarray::Axis(0), rows),
            p_a: self.p_a.select(ndarray::Axis(0), rows),
            activation: self.activation.select(rows),
            n_classes: self.n_classes,
            brands_per_class: self.brands_per_class,
            provenance: self.provenance.clone(),
        }
    }
}

pub(crate) fn support(p: &Array2<f64>) -> Array2<u8> {
    p.mapv(|v| u8::from(v > 0.0))
}
