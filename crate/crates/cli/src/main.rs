use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use hqfl_core::aggregation::compute_weights;
use hqfl_core::federation::metrics::{emit_metrics, he_security, write_manifest, RunManifest, METRICS_FILE};
use hqfl_core::federation::{class_entropy, histogram, load_dataset, Federation, FederationConfig};
use hqfl_core::rng::{stream, Purpose};
use hqfl_core::{gradcheck, Error};
use rand::Rng;

#[derive(Parser)]
#[command(name = "hqfl", version, about = "Federated training of hybrid CNN + quantum-circuit classifiers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a federation and write metrics.csv, summary.toml and manifest.toml.
    Run {
        #[command(flatten)]
        common: Common,
        /// Output directory.
        #[arg(long, default_value = "runs/latest")]
        out: PathBuf,
    },
    /// Print per-client class histograms of the configured partition.
    PartitionStats {
        #[command(flatten)]
        common: Common,
    },
    /// Time encryption, secure weighted sum and decryption, and report the error.
    HeBench {
        #[command(flatten)]
        common: Common,
        /// Length of each encrypted vector.
        #[arg(long, default_value_t = 34)]
        values: usize,
    },
    /// Compare backprop against central finite differences on a small model.
    GradCheck {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Coordinates sampled per parameter group.
        #[arg(long, default_value_t = 20)]
        per_group: usize,
    },
}

#[derive(Args)]
struct Common {
    /// TOML config; omitted sections take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    clients: Option<usize>,
    #[arg(long)]
    rounds: Option<u32>,
}

impl Common {
    fn resolve(&self) -> Result<FederationConfig, Error> {
        let mut cfg = match &self.config {
            Some(p) => FederationConfig::from_path(p)?,
            None => FederationConfig::default(),
        };
        if let Some(s) = self.seed {
            cfg.federation.seed = s;
        }
        if let Some(n) = self.clients {
            cfg.federation.n_clients = n;
        }
        if let Some(t) = self.rounds {
            cfg.federation.rounds = t;
        }
        cfg.validate()
            .map_err(|(s, k, m)| Error::Config(format!("[{s}] {k}: {m}")))?;
        Ok(cfg)
    }
}

fn run(common: &Common, out: &Path) -> Result<(), Error> {
    let cfg = common.resolve()?;
    println!("HE parameters: N = {}, {}", cfg.he.ring_degree, he_security(&cfg));
    let mut fed = Federation::new(cfg.clone())?;
    write_manifest(out, &RunManifest::new(&cfg, fed.dataset_checksum()))?;
    let series = fed.run_with(|m| {
        println!(
            "round {:>3}  loss {:.4}  acc {:.4}  sent {:>8} params {:>9} bytes  eps {:.3}  frozen [{}]  {:.0} ms",
            m.round,
            m.test_loss,
            m.test_accuracy,
            m.transmitted_params,
            m.transmitted_bytes,
            m.epsilon_total,
            m.frozen_layers.join(","),
            m.duration_ms
        );
    })?;
    emit_metrics(&series, &cfg, out)?;
    println!("wrote {}", out.join(METRICS_FILE).display());
    Ok(())
}

fn partition_stats(common: &Common) -> Result<(), Error> {
    let cfg = common.resolve()?;
    let split = load_dataset(&cfg)?;
    let n_classes = split.train.n_classes();
    let labels = split.train.labels().to_vec();
    let fed = Federation::with_data(cfg, split)?;
    println!("client  samples  entropy  histogram");
    for (i, idx) in fed.partition().iter().enumerate() {
        let h = histogram(&labels, idx, n_classes);
        println!("{i:>6}  {:>7}  {:>7.4}  {h:?}", idx.len(), class_entropy(&h));
    }
    println!("IID entropy: {:.4}", (n_classes as f64).ln());
    Ok(())
}

fn he_bench(common: &Common, len: usize) -> Result<(), Error> {
    let cfg = common.resolve()?;
    let ctx = hqfl_ckks::CkksContext::new(cfg.he.params())?;
    println!("HE parameters: N = {}, chain {:?}, scale 2^{}, {}", cfg.he.ring_degree, cfg.he.moduli_bits, cfg.he.scale_bits, he_security(&cfg));
    let seed = cfg.federation.seed;
    let n = cfg.federation.n_clients;
    let t = Instant::now();
    let keys = ctx.keygen(&mut stream(seed, Purpose::Keygen, 0, 0));
    println!("keygen           {:>9.1} ms", t.elapsed().as_secs_f64() * 1e3);

    let mut rng = stream(seed, Purpose::Data, 0, 0);
    let updates: Vec<Vec<f64>> = (0..n).map(|_| (0..len).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
    let accs: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
    let weights = compute_weights(&accs, cfg.aggregation.tau)?.weights;

    let t = Instant::now();
    let cts = updates
        .iter()
        .enumerate()
        .map(|(i, u)| ctx.encrypt_values(u, &keys.public, &mut stream(seed, Purpose::Encryption, i as u64, 0)))
        .collect::<Result<Vec<_>, _>>()?;
    println!("encrypt ×{n:<3}     {:>9.1} ms", t.elapsed().as_secs_f64() * 1e3);
    let bytes: usize = cts.iter().map(|c| c.to_bytes(&ctx).len()).sum();
    let t = Instant::now();
    let sum = ctx.secure_weighted_sum(&cts, &weights)?;
    println!("weighted sum     {:>9.1} ms", t.elapsed().as_secs_f64() * 1e3);
    let t = Instant::now();
    let got = ctx.decrypt_values(&sum, &keys.secret, len)?;
    println!("decrypt          {:>9.1} ms", t.elapsed().as_secs_f64() * 1e3);

    let max_err = (0..len)
        .map(|j| {
            let want: f64 = updates.iter().zip(&weights).map(|(u, w)| w * u[j]).sum();
            (got[j] - want).abs()
        })
        .fold(0.0, f64::max);
    println!("ciphertext bytes {bytes:>9} total");
    println!("max abs error    {max_err:>9.3e}");
    Ok(())
}

fn grad_check(seed: u64, per_group: usize) -> Result<bool, Error> {
    let t = Instant::now();
    let report = gradcheck::run(seed, per_group)?;
    println!(
        "checked {} coordinates in {:.1} s",
        report.coordinates.len(),
        t.elapsed().as_secs_f64()
    );
    if let Some(w) = report.worst() {
        println!("worst: {w:?}");
    }
    println!(
        "max relative error {:.3e} (tolerance {:.0e})",
        report.max_relative_error(),
        gradcheck::TOLERANCE
    );
    Ok(report.passed())
}

fn exit_for(e: &Error) -> ExitCode {
    eprintln!("error: {e}");
    match e {
        Error::Config(_) => ExitCode::from(2),
        _ => ExitCode::from(3),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run { common, out } => run(common, out),
        Command::PartitionStats { common } => partition_stats(common),
        Command::HeBench { common, values } => he_bench(common, *values),
        Command::GradCheck { seed, per_group } => match grad_check(*seed, *per_group) {
            Ok(true) => Ok(()),
            Ok(false) => {
                eprintln!("gradient check failed");
                return ExitCode::from(3);
            }
            Err(e) => Err(e),
        },
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => exit_for(&e),
    }
}
