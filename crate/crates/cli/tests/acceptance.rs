//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line;
//! the process exits nonzero if any of them fails.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use ndarray::Array2;
use sha2::{Digest, Sha256};

use hfsg_core::aggregator::{
    cond_mirror, make_datasets, pearson, AggregationConfig, DatasetConfig, ModelSource,
};
use hfsg_core::bench::{inversions, run_experiment, BenchSettings, Experiment, ModelKind};
use hfsg_core::corpus::{pseudo_real_corpus, CorpusConfig};
use hfsg_core::features::{form_factor, phase_shift, temporal_centroid, wavelet_energy, wavelet_prefix_len, PeriodWeight};
use hfsg_core::genmodel::{make_submetered, GenerationConfig};
use hfsg_core::latent::{fit_pca, project, reconstruct, reconstruction_mae, write_model, ComponentSelection};
use hfsg_core::metrics3d::{
    alpha_precision_curve, authenticity, beta_recall_curve, evaluate, uniform_grid, EmbeddedCloud, DEFAULT_KNN_K,
};
use hfsg_core::signalio::generate_voltage_reference;
use hfsg_core::{ReconstructionModel, SignatureMatrix};

type Outcome = Result<String, String>;

const SEEDS: [u64; 5] = [0, 1, 2, 3, 4];

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn e<E: std::fmt::Display>(err: E) -> String {
    err.to_string()
}

fn peak(x: &SignatureMatrix) -> f64 {
    x.data().iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

/// Deterministic values in [-0.5, 0.5).
fn hash_noise(i: usize, salt: f64) -> f64 {
    let h = (i as f64 * 12.9898 + salt * 78.233).sin() * 43_758.545_3;
    h - h.floor() - 0.5
}

fn pca_fidelity() -> (Outcome, Option<ReconstructionModel>) {
    let run = || -> Result<(String, bool, ReconstructionModel), String> {
        let x = pseudo_real_corpus(&CorpusConfig::default()).map_err(e)?;
        let start = Instant::now();
        let model = fit_pca(&x, ComponentSelection::VarianceThreshold(0.99)).map_err(e)?;
        let took = start.elapsed();
        let back = reconstruct(&model, &project(&model, &x).map_err(e)?).map_err(e)?;
        let mae = reconstruction_mae(&x, &back).map_err(e)?;
        let ratio = mae / peak(&x);
        let ok = ratio <= 0.01 && took <= Duration::from_secs(60);
        let detail = format!(
            "L={}, MAE {mae:.4} = {:.3}% of peak, fit {:.2?}",
            model.components(),
            100.0 * ratio,
            took
        );
        Ok((detail, ok, model))
    };
    match run() {
        Ok((d, ok, m)) => (check(ok, d), Some(m)),
        Err(d) => (Err(d), None),
    }
}

fn throughput(model: &ReconstructionModel) -> Outcome {
    // Ten batches of 1,000 keeps peak memory near 0.5 GB.
    let start = Instant::now();
    let mut rows = 0;
    for batch in 0..10u64 {
        let cfg = DatasetConfig {
            generation: GenerationConfig {
                seed: batch,
                ..GenerationConfig::default()
            },
            aggregation: AggregationConfig {
                scenarios: 1000,
                ..AggregationConfig::default()
            },
        };
        let pair = make_datasets(&cfg, ModelSource::Pretrained(model)).map_err(e)?;
        rows += pair.train.rows() + pair.test.rows();
        if pair.train.x_a.cols() != 30_000 {
            return Err(format!("signature length {}", pair.train.x_a.cols()));
        }
    }
    let took = start.elapsed();
    check(
        rows == 10_000 && took <= Duration::from_secs(600),
        format!("{rows} aggregates of 30000 samples in {took:.2?}"),
    )
}

/// Submetered signatures as the pipeline builds them, recomputed from the
/// public stages.
fn submetered(cfg: &DatasetConfig, model: &ReconstructionModel) -> Result<(SignatureMatrix, SignatureMatrix), String> {
    let latent = make_submetered(&cfg.generation, model).map_err(e)?.value;
    let raw = reconstruct(model, &latent).map_err(e)?;
    let v = generate_voltage_reference(60.0, raw.sample_rate_hz(), raw.cols(), 1.0).map_err(e)?;
    let mirrored = cond_mirror(&raw, &v).map_err(e)?.value;
    Ok((raw, mirrored))
}

fn kirchhoff(model: &ReconstructionModel) -> Outcome {
    let cfg = DatasetConfig::default();
    let pair = make_datasets(&cfg, ModelSource::Pretrained(model)).map_err(e)?;
    let (_, x_g) = submetered(&cfg, model)?;
    let (k_min, k_max) = (cfg.aggregation.k_min, cfg.aggregation.k_max);
    let mut worst = 0.0f64;
    let mut worst_share = 0.0f64;
    let mut scenarios = 0;
    for d in [&pair.train, &pair.test] {
        for s in 0..d.rows() {
            scenarios += 1;
            let active = d.activation.active(s);
            if !(k_min..=k_max).contains(&active.len()) {
                return Err(format!("scenario with {} active appliances", active.len()));
            }
            for t in 0..x_g.cols() {
                let mut sum = 0.0;
                let mut scale = 0.0;
                for &a in active {
                    sum += x_g.data()[[a, t]];
                    scale += x_g.data()[[a, t]].abs();
                }
                let diff = (d.x_a.data()[[s, t]] - sum).abs();
                if diff > 0.0 {
                    worst = worst.max(diff / scale);
                }
            }
            worst_share = worst_share.max((d.p_a.row(s).sum() - 1.0).abs());
        }
    }
    check(
        scenarios == 1000 && worst <= 1e-12 && worst_share <= 1e-9,
        format!("{scenarios} scenarios, worst relative error {worst:.1e}, worst share-sum error {worst_share:.1e}"),
    )
}

fn mirror(model: &ReconstructionModel) -> Outcome {
    let cfg = DatasetConfig::default();
    let (raw, once) = submetered(&cfg, model)?;
    let v = generate_voltage_reference(60.0, raw.sample_rate_hz(), raw.cols(), 1.0).map_err(e)?;
    let before = (0..raw.rows())
        .filter(|&i| pearson(raw.row(i).as_slice().unwrap(), v.samples()).is_ok_and(|r| r < 0.0))
        .count();
    let after = (0..once.rows())
        .filter(|&i| pearson(once.row(i).as_slice().unwrap(), v.samples()).is_ok_and(|r| r < 0.0))
        .count();
    let twice = cond_mirror(&once, &v).map_err(e)?.value;
    let idempotent = twice == once;
    check(
        after == 0 && idempotent,
        format!("{before} of {} rows flipped, {after} negative after, idempotent {idempotent}", raw.rows()),
    )
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

fn d3(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Straight O(N²) evaluation of the three metrics.
fn oracle(real: &[Vec<f64>], synth: &[Vec<f64>], grid: &[f64], k: usize) -> (Vec<f64>, Vec<f64>, f64) {
    let center = |pts: &[Vec<f64>]| -> Vec<f64> {
        let c = EmbeddedCloud::new(Array2::from_shape_fn((pts.len(), 3), |(i, j)| pts[i][j])).unwrap();
        c.center().to_vec()
    };
    let cr = center(real);
    let cs = center(synth);
    let mut rr: Vec<f64> = real.iter().map(|p| d3(p, &cr)).collect();
    rr.sort_by(f64::total_cmp);
    let p_alpha = grid
        .iter()
        .map(|&a| {
            let r = quantile(&rr, a);
            synth.iter().filter(|s| d3(s, &cr) <= r).count() as f64 / synth.len() as f64
        })
        .collect();

    let mut sr: Vec<f64> = synth.iter().map(|p| d3(p, &cs)).collect();
    sr.sort_by(f64::total_cmp);
    let balls: Vec<f64> = (0..real.len())
        .map(|i| {
            let mut d: Vec<f64> = (0..real.len()).filter(|&j| j != i).map(|j| d3(&real[i], &real[j])).collect();
            d.sort_by(f64::total_cmp);
            d[k - 1]
        })
        .collect();
    let r_beta = grid
        .iter()
        .map(|&b| {
            if b == 0.0 {
                return 0.0;
            }
            let q = quantile(&sr, b);
            let support: Vec<&Vec<f64>> = synth.iter().filter(|s| d3(s, &cs) <= q).collect();
            let covered = (0..real.len())
                .filter(|&i| support.iter().any(|s| d3(&real[i], s) <= balls[i]))
                .count();
            covered as f64 / real.len() as f64
        })
        .collect();

    let authentic = (0..real.len())
        .filter(|&i| {
            let dr = (0..real.len())
                .filter(|&j| j != i)
                .map(|j| d3(&real[i], &real[j]))
                .fold(f64::INFINITY, f64::min);
            let ds = synth.iter().map(|s| d3(&real[i], s)).fold(f64::INFINITY, f64::min);
            dr < ds
        })
        .count();
    (p_alpha, r_beta, authentic as f64 / real.len() as f64)
}

fn metric_self_tests(model: &ReconstructionModel) -> Outcome {
    let x = pseudo_real_corpus(&CorpusConfig {
        signatures: 500,
        seed: 11,
        ..CorpusConfig::default()
    })
    .map_err(e)?;
    let same = evaluate(&x, &x, model, DEFAULT_KNN_K).map_err(e)?;
    let a_ok = same.ip_alpha >= 0.95 && same.authenticity <= 0.05;

    let spc = x.samples_per_cycle();
    let offset = 1e3 * peak(&x);
    let shifted = SignatureMatrix::new(
        Array2::from_shape_fn(x.data().dim(), |(i, t)| {
            x.data()[[i, t]] + offset * (2.0 * PI * (t % spc) as f64 / spc as f64).sin()
        }),
        x.sample_rate_hz(),
        spc,
    )
    .map_err(e)?;
    let far = evaluate(&x, &shifted, model, DEFAULT_KNN_K).map_err(e)?;
    let max_p = far.p_alpha_curve.iter().fold(0.0f64, |m, &v| m.max(v));
    let b_ok = max_p == 0.0 && far.authenticity >= 0.99;

    let pts = |n: usize, salt: f64, shift: f64| -> Vec<Vec<f64>> {
        (0..n)
            .map(|i| (0..3).map(|j| hash_noise(3 * i + j, salt) + shift).collect())
            .collect()
    };
    let real = pts(50, 1.0, 0.0);
    let synth = pts(50, 2.0, 0.15);
    let cloud = |p: &[Vec<f64>]| EmbeddedCloud::new(Array2::from_shape_fn((p.len(), 3), |(i, j)| p[i][j])).unwrap();
    let (rc, sc) = (cloud(&real), cloud(&synth));
    let grid = uniform_grid(100);
    let p = alpha_precision_curve(&rc, &sc, &grid).map_err(e)?;
    let r = beta_recall_curve(&rc, &sc, &grid, DEFAULT_KNN_K).map_err(e)?;
    let a = authenticity(&rc, &sc).map_err(e)?;
    let (op, or, oa) = oracle(&real, &synth, &grid, DEFAULT_KNN_K);
    let c_ok = p == op && r == or && a == oa;

    check(
        a_ok && b_ok && c_ok,
        format!(
            "(a) IP {:.3} auth {:.3}; (b) max P {max_p} auth {:.3}; (c) oracle match {c_ok}",
            same.ip_alpha, same.authenticity, far.authenticity
        ),
    )
}

fn feature_identities() -> Outcome {
    let spc = 500;
    let t = 60 * spc;
    let v = generate_voltage_reference(60.0, 30_000.0, t, 1.0).map_err(e)?;
    let sine = v.samples().to_vec();
    let ff = form_factor(&sine).map_err(e)?;
    let ff_err = (ff - PI / (2.0 * 2f64.sqrt())).abs();
    let theta0 = phase_shift(&sine, &v).map_err(e)?.theta;
    let quad: Vec<f64> = (0..t).map(|i| (2.0 * PI * (i % spc) as f64 / spc as f64).cos()).collect();
    let theta90 = phase_shift(&quad, &v).map_err(e)?.theta;

    let noisy: Vec<f64> = (0..t).map(|i| sine[i] + hash_noise(i, 3.0)).collect();
    let bands = wavelet_energy(&noisy, 8).map_err(e)?;
    let n = wavelet_prefix_len(t);
    let norm: f64 = noisy[..n].iter().map(|x| x * x).sum();
    let parseval = (bands.iter().sum::<f64>() - norm).abs() / norm;

    let periods = (t / spc) as f64;
    let mut tc_bad = 0;
    let mut row = vec![0.0; t];
    for r in 0..1000 {
        let scale = 1.0 + 10.0 * (hash_noise(r, 9.0) + 0.5);
        for (i, x) in row.iter_mut().enumerate() {
            *x = scale * hash_noise(i + r * 7, 5.0 + r as f64);
        }
        let tc = temporal_centroid(&row, spc, PeriodWeight::Energy).map_err(e)?;
        if !(1.0..=periods).contains(&tc) {
            tc_bad += 1;
        }
    }
    check(
        ff_err <= 1e-4 && theta0.abs() <= 1e-9 && (theta90 - PI / 2.0).abs() <= 1e-6 && parseval <= 1e-9 && tc_bad == 0,
        format!(
            "FF error {ff_err:.1e}, theta {theta0:.1e} / {:.1e} from pi/2, Parseval {parseval:.1e}, {tc_bad} TC out of [1, {periods}]",
            (theta90 - PI / 2.0).abs()
        ),
    )
}

fn trend_base(brands: usize, k_max: usize) -> DatasetConfig {
    DatasetConfig {
        generation: GenerationConfig {
            n_samples: 300,
            n_classes: 5,
            modes_per_class: 2,
            brands_per_class: brands,
            ..GenerationConfig::default()
        },
        aggregation: AggregationConfig {
            scenarios: 400,
            k_min: 1,
            k_max,
            ..AggregationConfig::default()
        },
    }
}

fn fmt(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.3}")).collect::<Vec<_>>().join(" ")
}

fn separability_trend(model: &ReconstructionModel) -> Outcome {
    let settings = BenchSettings::new(trend_base(3, 4), model);
    let r = run_experiment(&settings, Experiment::Separability, &[0.0, 0.5, 1.0, 2.0], &SEEDS).map_err(e)?;
    let knn = r.medians(ModelKind::Knn);
    let inv = inversions(&knn);
    let gain = knn[3] - knn[0];
    check(
        inv <= 1 && gain >= 0.2,
        format!("knn medians [{}], {inv} inversions, gain {gain:.3}", fmt(&knn)),
    )
}

fn concurrency_trend(model: &ReconstructionModel) -> Outcome {
    let settings = BenchSettings::new(trend_base(3, 4), model);
    let r = run_experiment(&settings, Experiment::Concurrency, &[2.0, 4.0, 6.0, 8.0, 10.0], &SEEDS).map_err(e)?;
    let mut detail = Vec::new();
    let mut ok = true;
    for kind in [ModelKind::Knn, ModelKind::Tree] {
        let mut m = r.medians(kind);
        let shown = fmt(&m);
        m.reverse();
        let inv = inversions(&m);
        ok &= inv <= 1;
        detail.push(format!("{kind} [{shown}] {inv} rises"));
    }
    check(ok, detail.join("; "))
}

fn brand_trend(model: &ReconstructionModel) -> Outcome {
    let settings = BenchSettings::new(trend_base(10, 2), model);
    let r = run_experiment(&settings, Experiment::Brand, &[0.9, 0.3], &SEEDS).map_err(e)?;
    let mut detail = Vec::new();
    let mut ok = true;
    for kind in [ModelKind::Knn, ModelKind::Tree] {
        let m = r.medians(kind);
        ok &= m[0] > m[1];
        detail.push(format!("{kind} tau 0.9: {:.3}, tau 0.3: {:.3}", m[0], m[1]));
    }
    check(ok, detail.join("; "))
}

fn hashes(dir: &Path) -> Result<Vec<(String, String)>, String> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).map_err(e)? {
        let path = entry.map_err(e)?.path();
        let bytes = fs::read(&path).map_err(e)?;
        let digest: String = Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect();
        out.push((path.file_name().unwrap().to_string_lossy().into_owned(), digest));
    }
    out.sort();
    Ok(out)
}

fn determinism(model: &ReconstructionModel) -> Outcome {
    let tmp = tempfile::tempdir().map_err(e)?;
    let model_path = tmp.path().join("model.pcamod");
    write_model(model, &model_path).map_err(e)?;
    let cfg_path = tmp.path().join("run.cfg");
    fs::write(&cfg_path, "seed=42\naggregates=500\nsamples=500\nsplit_mode=brand\ntau=0.7\n").map_err(e)?;
    // Identical configuration includes the output directory, so both runs
    // write to the same place and the first result is moved aside.
    let dir = tmp.path().join("out");
    let mut runs = Vec::new();
    for name in ["first", "second"] {
        let status = Command::new(env!("CARGO_BIN_EXE_hfsg"))
            .arg("synth")
            .arg("--model")
            .arg(&model_path)
            .arg("--config")
            .arg(&cfg_path)
            .arg("--out-dir")
            .arg(&dir)
            .status()
            .map_err(e)?;
        if !status.success() {
            return Err(format!("{name} synth run exited with {status}"));
        }
        runs.push(hashes(&dir)?);
        fs::rename(&dir, tmp.path().join(name)).map_err(e)?;
    }
    check(
        runs[0] == runs[1] && runs[0].len() == 11,
        format!("{} files, identical hashes {}", runs[0].len(), runs[0] == runs[1]),
    )
}

fn main() {
    let mut results: Vec<(u32, &str, Outcome)> = Vec::new();
    let (c1, model) = pca_fidelity();
    let Some(model) = model else {
        println!("FAIL criterion  1 PCA fidelity: {}", c1.unwrap_err());
        for n in 2..=10 {
            println!("FAIL criterion {n:>2}: not run, no fitted model");
        }
        std::process::exit(1);
    };
    results.push((1, "PCA fidelity", c1));
    results.push((2, "generation throughput", throughput(&model)));
    results.push((3, "Kirchhoff exactness", kirchhoff(&model)));
    results.push((4, "mirror correctness", mirror(&model)));
    results.push((5, "metric self-tests", metric_self_tests(&model)));
    results.push((6, "feature identities", feature_identities()));
    results.push((7, "separability trend", separability_trend(&model)));
    results.push((8, "concurrency trend", concurrency_trend(&model)));
    results.push((9, "brand-split trend", brand_trend(&model)));
    results.push((10, "determinism", determinism(&model)));

    let mut failed = Vec::new();
    for (n, name, r) in &results {
        match r {
            Ok(d) => println!("PASS criterion {n:>2} {name}: {d}"),
            Err(d) => {
                println!("FAIL criterion {n:>2} {name}: {d}");
                failed.push(*n);
            }
        }
    }
    if !failed.is_empty() {
        eprintln!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
