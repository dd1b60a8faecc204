use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use ndarray::Array2;
use sha2::{Digest, Sha256};

use hfsg_core::aggregator::{make_datasets, ModelSource};
use hfsg_core::bench::{run_experiment, Experiment, ModelKind};
use hfsg_core::config::KEYS;
use hfsg_core::corpus::pseudo_real_corpus;
use hfsg_core::features::{feature_matrix, FeatureLayout};
use hfsg_core::genmodel::make_submetered;
use hfsg_core::latent::{fit_pca, read_model, write_model};
use hfsg_core::metrics3d::evaluate;
use hfsg_core::signalio::{
    align_cycles, generate_voltage_reference, read_csv_matrix, read_signature_matrix, samples_per_cycle,
    window_signatures, write_csv_matrix, write_signature_matrix, DEFAULT_WINDOW_LEN,
};
use hfsg_core::{LabeledDataset, ReconstructionModel, RunConfig, SignatureMatrix, Waveform};

mod selftest;

#[derive(Parser)]
#[command(name = "hfsg", version, about = "Synthetic high-frequency appliance signatures")]
#[command(after_long_help = keys_help())]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Flat key=value run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override one configuration key; repeatable. Applied after --config.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE", value_parser = parse_pair)]
    set: Vec<(String, String)>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Write the built-in pseudo-real corpus.
    Corpus {
        #[arg(long)]
        out: PathBuf,
    },
    /// Align a current/voltage capture to whole mains cycles and cut it into
    /// fixed-length signatures.
    Ingest {
        /// Current samples, one or more numbers per line.
        #[arg(long)]
        current: PathBuf,
        #[arg(long)]
        voltage: PathBuf,
        #[arg(long, default_value_t = DEFAULT_WINDOW_LEN)]
        window: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit the reconstruction model.
    Train {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        components: Option<usize>,
        #[arg(long)]
        variance_threshold: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Sample labelled submetered latent codes.
    Generate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        classes: Option<usize>,
        #[arg(long)]
        modes: Option<usize>,
        #[arg(long)]
        brands: Option<usize>,
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        sep: Option<f64>,
    },
    /// Build labelled aggregate train and test sets.
    Synth {
        #[arg(long)]
        model: PathBuf,
    },
    /// Fidelity, coverage and authenticity of synthetic against real signatures.
    Evaluate {
        #[arg(long)]
        real: PathBuf,
        #[arg(long)]
        synthetic: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        knn_k: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Per-row feature vectors as CSV.
    Features {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        voltage_amplitude: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Sweep one generation parameter and score the baselines.
    Bench {
        #[arg(long)]
        experiment: Experiment,
        /// Fitted on the built-in corpus when omitted.
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long, value_delimiter = ',', default_value = "knn,tree")]
        models: Vec<ModelKind>,
        /// Number of seeds, counted up from the configured seed.
        #[arg(long, default_value_t = 5)]
        seeds: u64,
        /// Sweep values; the experiment's defaults when omitted.
        #[arg(long, value_delimiter = ',')]
        values: Vec<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the built-in invariant checks.
    Selftest {
        /// Also check a saved model.
        #[arg(long)]
        model: Option<PathBuf>,
    },
}

fn parse_pair(s: &str) -> std::result::Result<(String, String), String> {
    s.split_once('=')
        .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
        .ok_or_else(|| format!("expected KEY=VALUE, got `{s}`"))
}

fn keys_help() -> String {
    let width = KEYS.iter().map(|(k, _, _)| k.len()).max().unwrap_or(0);
    let mut s = String::from("Configuration keys (--config file or --set KEY=VALUE):\n");
    for (k, d, h) in KEYS {
        let d = if d.is_empty() { "\"\"" } else { d };
        s.push_str(&format!("  {k:<width$}  {h} [default: {d}]\n"));
    }
    s
}

impl Common {
    fn load(&self, mut extra: Vec<(String, String)>) -> Result<RunConfig> {
        let mut overrides = self.set.clone();
        if let Some(s) = self.seed {
            overrides.push(("seed".into(), s.to_string()));
        }
        if let Some(d) = &self.out_dir {
            overrides.push(("out_dir".into(), d.display().to_string()));
        }
        overrides.append(&mut extra);
        Ok(RunConfig::load(self.config.as_deref(), &overrides)?)
    }
}

fn opt<T: ToString>(key: &str, v: &Option<T>) -> Option<(String, String)> {
    v.as_ref().map(|v| (key.to_string(), v.to_string()))
}

fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect())
}

fn load_model(path: &Path) -> Result<ReconstructionModel> {
    read_model(path).with_context(|| format!("loading model {}", path.display()))
}

fn out_dir(cfg: &RunConfig) -> Result<PathBuf> {
    let dir = PathBuf::from(&cfg.out_dir);
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(dir)
}

fn write_manifest(path: &Path, cfg: &RunConfig, extra: &[(String, String)]) -> Result<()> {
    let mut text = cfg.to_text();
    for (k, v) in extra {
        text.push_str(&format!("{k}={v}\n"));
    }
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn u8_to_f64(a: &Array2<u8>) -> Array2<f64> {
    a.mapv(f64::from)
}

fn write_split(dir: &Path, name: &str, d: &LabeledDataset) -> Result<()> {
    write_signature_matrix(&d.x_a, dir.join(format!("x_{name}.sigmat")))?;
    write_csv_matrix(&d.p_a, None, dir.join(format!("p_{name}.csv")))?;
    write_csv_matrix(&u8_to_f64(&d.y_class_ind), None, dir.join(format!("yclass_{name}.csv")))?;
    write_csv_matrix(&u8_to_f64(&d.y_brand_ind), None, dir.join(format!("ybrand_{name}.csv")))?;
    write_csv_matrix(&d.activation.to_dense(), None, dir.join(format!("activation_{name}.csv")))?;
    Ok(())
}

fn read_series(path: &Path) -> Result<Vec<f64>> {
    let m = read_csv_matrix(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(m.iter().copied().collect())
}

fn run(cli: Cli) -> Result<bool> {
    let common = &cli.common;
    match &cli.command {
        Command::Corpus { out } => {
            let cfg = common.load(vec![])?;
            let x = pseudo_real_corpus(&cfg.corpus()?)?;
            write_signature_matrix(&x, out)?;
            eprintln!("{} x {} corpus written to {}", x.rows(), x.cols(), out.display());
        }
        Command::Ingest {
            current,
            voltage,
            window,
            out,
        } => {
            let cfg = common.load(vec![])?;
            let spc = samples_per_cycle(cfg.mains_hz, cfg.sample_rate_hz)?;
            let i = Waveform::new(read_series(current)?, cfg.sample_rate_hz)?;
            let v = Waveform::new(read_series(voltage)?, cfg.sample_rate_hz)?;
            let aligned = align_cycles(&i, &v, spc)?;
            let x = window_signatures(&aligned, *window, spc)?;
            write_signature_matrix(&x, out)?;
            eprintln!("{} signatures of {} samples written to {}", x.rows(), x.cols(), out.display());
        }
        Command::Train {
            input,
            components,
            variance_threshold,
            out,
        } => {
            let extra = [opt("components", components), opt("variance_threshold", variance_threshold)];
            let cfg = common.load(extra.into_iter().flatten().collect())?;
            let x = read_signature_matrix(input).with_context(|| format!("reading {}", input.display()))?;
            let model = fit_pca(&x, cfg.component_selection())?;
            write_model(&model, out)?;
            let kept: f64 = model.explained_variance_ratio().sum();
            eprintln!(
                "L = {} components, {:.4} of variance, written to {}",
                model.components(),
                kept,
                out.display()
            );
        }
        Command::Generate {
            model,
            classes,
            modes,
            brands,
            samples,
            sep,
        } => {
            let extra = [
                opt("classes", classes),
                opt("modes_per_class", modes),
                opt("brands_per_class", brands),
                opt("samples", samples),
                opt("separability", sep),
            ];
            let cfg = common.load(extra.into_iter().flatten().collect())?;
            let m = load_model(model)?;
            let gen = make_submetered(&cfg.generation(), &m)?;
            let z = &gen.value;
            let dir = out_dir(&cfg)?;
            let latent = SignatureMatrix::new(z.z().clone(), m.sample_rate_hz(), 1)?;
            write_signature_matrix(&latent, dir.join("z.sigmat"))?;
            let (yg, yc, yb) = (
                z.clusters().context("latents carry no cluster labels")?,
                z.classes().context("latents carry no class labels")?,
                z.brands().context("latents carry no brand labels")?,
            );
            let mut labels = String::from("row,y_g,y_class,y_brand\n");
            for i in 0..z.rows() {
                labels.push_str(&format!("{i},{},{},{}\n", yg[i], yc[i], yb[i]));
            }
            fs::write(dir.join("labels.csv"), labels)?;
            let mut extra = vec![
                ("command".to_string(), "generate".to_string()),
                ("model_sha256".to_string(), sha256_file(model)?),
            ];
            extra.extend(gen.notes.iter().map(|n| ("note".to_string(), n.clone())));
            write_manifest(&dir.join("manifest.cfg"), &cfg, &extra)?;
            eprintln!("{} latent rows written to {}", z.rows(), dir.display());
        }
        Command::Synth { model } => {
            let cfg = common.load(vec![])?;
            let m = load_model(model)?;
            let pair = make_datasets(&cfg.dataset(), ModelSource::Pretrained(&m))?;
            let dir = out_dir(&cfg)?;
            write_split(&dir, "train", &pair.train)?;
            write_split(&dir, "test", &pair.test)?;
            let mut extra = vec![
                ("command".to_string(), "synth".to_string()),
                ("model_sha256".to_string(), sha256_file(model)?),
                ("train_rows".to_string(), pair.train.rows().to_string()),
                ("test_rows".to_string(), pair.test.rows().to_string()),
            ];
            extra.extend(
                pair.train
                    .provenance
                    .iter()
                    .filter(|(k, _)| k == "note")
                    .cloned(),
            );
            write_manifest(&dir.join("manifest.cfg"), &cfg, &extra)?;
            eprintln!(
                "{} train and {} test aggregates written to {}",
                pair.train.rows(),
                pair.test.rows(),
                dir.display()
            );
        }
        Command::Evaluate {
            real,
            synthetic,
            model,
            knn_k,
            out,
        } => {
            let cfg = common.load(opt("metric_knn_k", knn_k).into_iter().collect())?;
            let m = load_model(model)?;
            let xr = read_signature_matrix(real).with_context(|| format!("reading {}", real.display()))?;
            let xg = read_signature_matrix(synthetic).with_context(|| format!("reading {}", synthetic.display()))?;
            let r = evaluate(&xr, &xg, &m, cfg.metric_knn_k)?;
            let mut text = String::from("alpha,p_alpha,r_beta,ip_alpha,ir_beta,authenticity,knn_k\n");
            for i in 0..r.alphas.len() {
                text.push_str(&format!(
                    "{},{},{},{},{},{},{}\n",
                    r.alphas[i], r.p_alpha_curve[i], r.r_beta_curve[i], r.ip_alpha, r.ir_beta, r.authenticity, r.knn_k
                ));
            }
            fs::write(out, text)?;
            println!(
                "IP_alpha={:.4} IR_beta={:.4} authenticity={:.4}",
                r.ip_alpha, r.ir_beta, r.authenticity
            );
        }
        Command::Features {
            input,
            voltage_amplitude,
            out,
        } => {
            let cfg = common.load(opt("voltage_amplitude", voltage_amplitude).into_iter().collect())?;
            let x = read_signature_matrix(input).with_context(|| format!("reading {}", input.display()))?;
            let v = generate_voltage_reference(cfg.mains_hz, x.sample_rate_hz(), x.cols(), cfg.voltage_amplitude)?;
            if v.samples_per_cycle() != x.samples_per_cycle() {
                bail!(
                    "mains_hz {} gives {} samples per cycle, {} was recorded with {}",
                    cfg.mains_hz,
                    v.samples_per_cycle(),
                    input.display(),
                    x.samples_per_cycle()
                );
            }
            let layout = FeatureLayout::for_signatures(&x, cfg.wavelet_levels, cfg.vi_points);
            let f = feature_matrix(&x, &v, &layout)?;
            write_csv_matrix(&f, Some(&layout.column_names()), out)?;
            eprintln!("{} x {} features written to {}", f.nrows(), f.ncols(), out.display());
        }
        Command::Bench {
            experiment,
            model,
            models,
            seeds,
            values,
            out,
        } => {
            let cfg = common.load(vec![])?;
            let m = match model {
                Some(p) => load_model(p)?,
                None => fit_pca(&pseudo_real_corpus(&cfg.corpus()?)?, cfg.component_selection())?,
            };
            let mut settings = cfg.bench_settings(&m);
            settings.models = models.clone();
            let values = if values.is_empty() {
                experiment.default_values()
            } else {
                values.clone()
            };
            let seeds: Vec<u64> = (0..*seeds).map(|i| cfg.seed + i).collect();
            let r = run_experiment(&settings, *experiment, &values, &seeds)?;
            let mut text = String::from("sweep_value,model,seed,r2\n");
            for row in &r.rows {
                text.push_str(&format!("{},{},{},{}\n", row.sweep_value, row.model, row.seed, row.r2));
            }
            fs::write(out, text)?;
            for kind in models {
                let med: Vec<String> = r.medians(*kind).iter().map(|v| format!("{v:.3}")).collect();
                println!("{} median r2 over {}: {}", kind, experiment.parameter(), med.join(" "));
            }
        }
        Command::Selftest { model } => {
            return Ok(selftest::run(model.as_deref()));
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
