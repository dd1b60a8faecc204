use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use rand::seq::{index, SliceRandom};
use rand::Rng;

use super::LabeledDataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitMode {
    Uniform,
    Brand,
}

impl fmt::Display for SplitMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SplitMode::Uniform => "uniform",
            SplitMode::Brand => "brand",
        })
    }
}

impl FromStr for SplitMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(SplitMode::Uniform),
            "brand" => Ok(SplitMode::Brand),
            other => Err(Error::Config(format!(
                "split mode must be `uniform` or `brand`, got `{other}`"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitPair {
    pub train: LabeledDataset,
    pub test: LabeledDataset,
    pub mode: SplitMode,
    pub tau: f64,
    /// Global brand ids reserved for training; empty in uniform mode.
    pub train_brands: Vec<usize>,
    pub test_brands: Vec<usize>,
}

pub(crate) struct SplitIndices {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
    pub train_brands: Vec<usize>,
    pub test_brands: Vec<usize>,
}

/// Train/test row indices, both sorted ascending.
pub(crate) fn split_indices<R: Rng + ?Sized>(
    y_brand_ind: &Array2<u8>,
    n_classes: usize,
    brands_per_class: usize,
    mode: SplitMode,
    tau: f64,
    rng: &mut R,
) -> Result<SplitIndices> {
    if !(tau > 0.0 && tau < 1.0) {
        return Err(Error::Config(format!("tau must lie in (0, 1), got {tau}")));
    }
    let a = y_brand_ind.nrows();
    let out = match mode {
        SplitMode::Uniform => {
            let n_train = (tau * a as f64).floor() as usize;
            let mut perm = index::sample(rng, a, a).into_vec();
            let mut test = perm.split_off(n_train);
            perm.sort_unstable();
            test.sort_unstable();
            SplitIndices {
                train: perm,
                test,
                train_brands: Vec::new(),
                test_brands: Vec::new(),
            }
        }
        SplitMode::Brand => {
            let b = brands_per_class;
            if b < 2 {
                return Err(Error::Config(format!(
                    "brand split needs at least 2 brands per class, got {b}"
                )));
            }
            let per_class = ((tau * b as f64).ceil() as usize).clamp(1, b - 1);
            let mut is_train = vec![false; n_classes * b];
            for d in 0..n_classes {
                let mut brands: Vec<usize> = (0..b).collect();
                brands.shuffle(rng);
                for &k in &brands[..per_class] {
                    is_train[d * b + k] = true;
                }
            }
            let (mut train, mut test) = (Vec::new(), Vec::new());
            for (i, row) in y_brand_ind.rows().into_iter().enumerate() {
                let all_train = row.iter().zip(&is_train).all(|(y, t)| *y == 0 || *t);
                if all_train {
                    train.push(i);
                } else {
                    test.push(i);
                }
            }
            let (train_brands, test_brands) = (0..is_train.len()).partition(|&g| is_train[g]);
            SplitIndices {
                train,
                test,
                train_brands,
                test_brands,
            }
        }
    };
    if out.train.is_empty() || out.test.is_empty() {
        return Err(Error::Empty(format!(
            "{mode} split with tau={tau} leaves {} train and {} test scenarios",
            out.train.len(),
            out.test.len()
        )));
    }
    Ok(out)
}

/// Uniform mode: random partition with ⌊τ·A⌋ training rows. Brand mode: per
/// class ⌈τ·B⌉ brands (at least one, at most B − 1) are reserved for
/// training; a scenario is a training scenario only if every brand it
/// contains is reserved, otherwise it goes to test.
pub fn split_dataset<R: Rng + ?Sized>(
    d: &LabeledDataset,
    mode: SplitMode,
    tau: f64,
    rng: &mut R,
) -> Result<SplitPair> {
    let idx = split_indices(&d.y_brand_ind, d.n_classes, d.brands_per_class, mode, tau, rng)?;
    Ok(SplitPair {
        train: d.select(&idx.train),
        test: d.select(&idx.test),
        mode,
        tau,
        train_brands: idx.train_brands,
        test_brands: idx.test_brands,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aggregator::ActivationMatrix;
    use crate::signalio::SignatureMatrix;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn dataset(a: usize, brand_rows: Vec<Vec<usize>>, d: usize, b: usize) -> LabeledDataset {
        let mut y_brand = Array2::zeros((a, d * b));
        for (i, row) in brand_rows.iter().enumerate() {
            for &g in row {
                y_brand[[i, g]] = 1;
            }
        }
        LabeledDataset {
            x_a: SignatureMatrix::new(Array2::from_shape_fn((a, 2), |(i, j)| (i * 2 + j) as f64), 1.0, 1).unwrap(),
            y_class_ind: Array2::zeros((a, d)),
            y_brand_ind: y_brand,
            p_a: Array2::zeros((a, d)),
            activation: ActivationMatrix::from_rows(vec![vec![]; a], 1, (0, 0)).unwrap(),
            n_classes: d,
            brands_per_class: b,
            provenance: Vec::new(),
        }
    }

    #[test]
    fn uniform_half_split() {
        let d = dataset(10, vec![vec![0]; 10], 1, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let s = split_dataset(&d, SplitMode::Uniform, 0.5, &mut rng).unwrap();
        assert_eq!(s.train.rows(), 5);
        assert_eq!(s.test.rows(), 5);
        let mut firsts: Vec<f64> = s.train.x_a.data().column(0).to_vec();
        firsts.extend(s.test.x_a.data().column(0).iter());
        firsts.sort_by(f64::total_cmp);
        assert_eq!(firsts, (0..10).map(|i| (i * 2) as f64).collect::<Vec<_>>());
    }

    #[test]
    fn uniform_split_is_seed_deterministic() {
        let d = dataset(40, vec![vec![0]; 40], 1, 1);
        let a = split_dataset(&d, SplitMode::Uniform, 0.3, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        let b = split_dataset(&d, SplitMode::Uniform, 0.3, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.train.rows(), 12);
    }

    #[test]
    fn brand_split_sets_are_disjoint() {
        // Two classes with two brands each; scenarios cover every brand pair.
        let mut rows = Vec::new();
        for x in 0..2 {
            for y in 2..4 {
                rows.push(vec![x, y]);
                rows.push(vec![x]);
                rows.push(vec![y]);
            }
        }
        let d = dataset(rows.len(), rows.clone(), 2, 2);
        for seed in 0..10 {
            let s = split_dataset(&d, SplitMode::Brand, 0.5, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
            assert_eq!(s.train_brands.len(), 2);
            assert!(s.train_brands.iter().all(|g| !s.test_brands.contains(g)));
            for class in 0..2 {
                assert_eq!(s.train_brands.iter().filter(|g| *g / 2 == class).count(), 1);
            }
            for row in s.train.y_brand_ind.rows() {
                for (g, y) in row.iter().enumerate() {
                    if *y == 1 {
                        assert!(s.train_brands.contains(&g));
                    }
                }
            }
            for row in s.test.y_brand_ind.rows() {
                assert!(row.iter().enumerate().any(|(g, y)| *y == 1 && s.test_brands.contains(&g)));
            }
        }
    }

    #[test]
    fn single_brand_rejected() {
        let d = dataset(4, vec![vec![0]; 4], 1, 1);
        let err = split_dataset(&d, SplitMode::Brand, 0.5, &mut ChaCha8Rng::seed_from_u64(0)).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn bad_tau_rejected() {
        let d = dataset(4, vec![vec![0]; 4], 1, 1);
        for tau in [0.0, 1.0, -0.2, f64::NAN] {
            assert!(split_dataset(&d, SplitMode::Uniform, tau, &mut ChaCha8Rng::seed_from_u64(0)).is_err());
        }
    }
}
