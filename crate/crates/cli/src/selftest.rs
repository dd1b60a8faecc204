use std::f64::consts::PI;
use std::path::Path;

use ndarray::Array2;

use hfsg_core::aggregator::{aggregate_signatures, build_activation_matrix, cond_mirror, pearson};
use hfsg_core::corpus::{pseudo_real_corpus, CorpusConfig};
use hfsg_core::features::{form_factor, phase_shift, temporal_centroid, wavelet_energy, wavelet_prefix_len, PeriodWeight};
use hfsg_core::latent::{fit_pca, read_model, ComponentSelection};
use hfsg_core::metrics3d::{embed, evaluate_clouds, DEFAULT_GRID_STEPS, DEFAULT_KNN_K};
use hfsg_core::rng::Streams;
use hfsg_core::signalio::generate_voltage_reference;
use hfsg_core::{ReconstructionModel, SignatureMatrix};

type Check = Result<String, String>;

fn ensure(ok: bool, detail: String) -> Check {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn corpus() -> Result<SignatureMatrix, String> {
    pseudo_real_corpus(&CorpusConfig {
        signatures: 40,
        cycles: 4,
        seed: 7,
        ..CorpusConfig::default()
    })
    .map_err(|e| e.to_string())
}

fn orthonormal_round_trip(model: &ReconstructionModel) -> Check {
    let l = model.components();
    let z = Array2::from_shape_fn((4, l), |(i, j)| ((i * l + j) as f64 * 0.37).sin() * model.sigma_r()[j]);
    let x = model.reconstruct_rows(z.view()).map_err(|e| e.to_string())?;
    let back = model.project_rows(x.view()).map_err(|e| e.to_string())?;
    let err = (&back - &z).iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let scale = z.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    ensure(err / scale < 1e-9, format!("L={l}, max |z - P(R(z))| = {err:.2e}"))
}

fn pca_round_trip() -> Check {
    // Generic rows so that no direction falls below the rank cut-off.
    let data = Array2::from_shape_fn((40, 2000), |(i, t)| {
        let h = ((i * 2000 + t) as f64 * 12.9898).sin() * 43_758.545_3;
        h - h.floor() - 0.5
    });
    let x = SignatureMatrix::new(data, 30_000.0, 500).map_err(|e| e.to_string())?;
    let model = fit_pca(&x, ComponentSelection::Count(x.rows())).map_err(|e| e.to_string())?;
    let z = model.project_rows(x.data().view()).map_err(|e| e.to_string())?;
    let back = model.reconstruct_rows(z.view()).map_err(|e| e.to_string())?;
    let err = (&back - x.data()).iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let detail = format!("max reconstruction error {err:.2e}");
    ensure(err <= 1e-9, detail.clone())?;
    orthonormal_round_trip(&model).map(|d| format!("{detail}, {d}"))
}

fn kirchhoff() -> Check {
    let x = corpus()?;
    let mut rng = Streams::new(3).get(hfsg_core::rng::ids::ACTIVATION);
    let act = build_activation_matrix(200, x.rows(), 1, 4, &mut rng).map_err(|e| e.to_string())?;
    let agg = aggregate_signatures(&act, &x).map_err(|e| e.to_string())?;
    let mut worst = 0.0f64;
    for s in 0..act.rows() {
        let k = act.row_sum(s);
        if !(1..=4).contains(&k) {
            return Err(format!("scenario {s} has {k} active appliances"));
        }
        for t in 0..x.cols() {
            let sum: f64 = act.active(s).iter().map(|&a| x.data()[[a, t]]).sum();
            let scale = act.active(s).iter().map(|&a| x.data()[[a, t]].abs()).sum::<f64>().max(1e-300);
            worst = worst.max((agg.data()[[s, t]] - sum).abs() / scale);
        }
    }
    ensure(worst <= 1e-12, format!("200 scenarios, worst relative error {worst:.2e}"))
}

fn mirror() -> Check {
    let x = corpus()?;
    let v = generate_voltage_reference(60.0, x.sample_rate_hz(), x.cols(), 1.0).map_err(|e| e.to_string())?;
    let flipped = SignatureMatrix::new(
        Array2::from_shape_fn(x.data().dim(), |(i, t)| if i % 2 == 0 { -x.data()[[i, t]] } else { x.data()[[i, t]] }),
        x.sample_rate_hz(),
        x.samples_per_cycle(),
    )
    .map_err(|e| e.to_string())?;
    let once = cond_mirror(&flipped, &v).map_err(|e| e.to_string())?.value;
    let negative = (0..once.rows())
        .filter(|&i| pearson(once.row(i).as_slice().unwrap(), v.samples()).map(|r| r < 0.0).unwrap_or(false))
        .count();
    let twice = cond_mirror(&once, &v).map_err(|e| e.to_string())?.value;
    ensure(
        negative == 0 && twice == once,
        format!("{negative} negatively correlated rows, idempotent: {}", twice == once),
    )
}

fn metrics() -> Check {
    let x = corpus()?;
    let model = fit_pca(&x, ComponentSelection::Count(8)).map_err(|e| e.to_string())?;
    let (real, same) = embed(&x, &x, &model).map_err(|e| e.to_string())?;
    let r = evaluate_clouds(&real, &same, DEFAULT_GRID_STEPS, DEFAULT_KNN_K).map_err(|e| e.to_string())?;
    if r.ip_alpha < 0.95 || r.authenticity > 0.05 {
        return Err(format!("identical sets: IP {:.3}, authenticity {:.3}", r.ip_alpha, r.authenticity));
    }
    let peak = x.data().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let spc = x.samples_per_cycle();
    let shifted = SignatureMatrix::new(
        Array2::from_shape_fn(x.data().dim(), |(i, t)| {
            x.data()[[i, t]] + 1e3 * peak * (2.0 * PI * (t % spc) as f64 / spc as f64).sin()
        }),
        x.sample_rate_hz(),
        spc,
    )
    .map_err(|e| e.to_string())?;
    let (real, far) = embed(&x, &shifted, &model).map_err(|e| e.to_string())?;
    let f = evaluate_clouds(&real, &far, DEFAULT_GRID_STEPS, DEFAULT_KNN_K).map_err(|e| e.to_string())?;
    let pmax = f.p_alpha_curve.iter().fold(0.0f64, |m, &v| m.max(v));
    ensure(
        pmax == 0.0 && f.authenticity >= 0.99,
        format!(
            "IP {:.3} / auth {:.3} on copies, max P {pmax} / auth {:.3} when offset",
            r.ip_alpha, r.authenticity, f.authenticity
        ),
    )
}

fn features() -> Check {
    let spc = 500;
    let v = generate_voltage_reference(60.0, 30_000.0, 4 * spc, 1.0).map_err(|e| e.to_string())?;
    let sine = v.samples().to_vec();
    let ff = form_factor(&sine).map_err(|e| e.to_string())?;
    if (ff - PI / (2.0 * 2f64.sqrt())).abs() > 1e-4 {
        return Err(format!("form factor of a sine {ff}"));
    }
    let same = phase_shift(&sine, &v).map_err(|e| e.to_string())?.theta;
    let quad: Vec<f64> = (0..sine.len())
        .map(|t| (2.0 * PI * (t % spc) as f64 / spc as f64).cos())
        .collect();
    let q = phase_shift(&quad, &v).map_err(|e| e.to_string())?.theta;
    if same.abs() > 1e-9 || (q - PI / 2.0).abs() > 1e-6 {
        return Err(format!("theta(v, v) = {same:.3e}, theta(quadrature) = {q:.9}"));
    }
    let wave: Vec<f64> = (0..sine.len()).map(|t| sine[t] + 0.2 * quad[(3 * t) % sine.len()]).collect();
    let bands = wavelet_energy(&wave, 6).map_err(|e| e.to_string())?;
    let n = wavelet_prefix_len(wave.len());
    let norm: f64 = wave[..n].iter().map(|x| x * x).sum();
    let rel = (bands.iter().sum::<f64>() - norm).abs() / norm;
    if rel > 1e-9 {
        return Err(format!("wavelet energy off by {rel:.2e}"));
    }
    let tc = temporal_centroid(&wave, spc, PeriodWeight::Energy).map_err(|e| e.to_string())?;
    ensure((1.0..=4.0).contains(&tc), format!("FF {ff:.6}, theta {q:.6}, Parseval {rel:.1e}, TC {tc:.3}"))
}

/// Prints one line per check. Returns whether every check passed.
pub fn run(model: Option<&Path>) -> bool {
    let mut checks: Vec<(&str, Check)> = Vec::new();
    if let Some(p) = model {
        let loaded = read_model(p).map_err(|e| format!("load: {e}"));
        checks.push(("model", loaded.and_then(|m| orthonormal_round_trip(&m))));
    }
    checks.push(("pca round trip", pca_round_trip()));
    checks.push(("kirchhoff", kirchhoff()));
    checks.push(("mirror", mirror()));
    checks.push(("metrics", metrics()));
    checks.push(("features", features()));

    println!("{:<16} {:<6} detail", "check", "status");
    let mut ok = true;
    for (name, c) in &checks {
        let (status, detail) = match c {
            Ok(d) => ("PASS", d),
            Err(d) => {
                ok = false;
                ("FAIL", d)
            }
        };
        println!("{name:<16} {status:<6} {detail}");
    }
    ok
}
