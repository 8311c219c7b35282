use std::fmt::Write as _;
use std::path::PathBuf;

use anyhow::Context;
use clap::Args;
use omniact::io::{load_dataset, save_model};
use omniact::miml::{train, EpochMetrics};

use crate::config::{parse_size, Config, HyperFlags};

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Training manifest.
    #[arg(long)]
    pub manifest: PathBuf,
    /// Output directory; receives `head.json`, `head.otsr` and `metrics.csv`.
    #[arg(long)]
    pub out: PathBuf,
    /// Box resolution for manifest entries that do not state one.
    #[arg(long, value_parser = parse_size)]
    pub frame_size: Option<[usize; 2]>,
    #[command(flatten)]
    pub hyper: HyperFlags,
}

pub const METRICS_HEADER: &str = "epoch,lr,loss_bce,loss_reg,train_map";

pub fn metrics_csv(metrics: &[EpochMetrics]) -> String {
    let mut out = format!("{METRICS_HEADER}\n");
    for m in metrics {
        writeln!(out, "{},{},{},{},{}", m.epoch, m.lr, m.loss_bce, m.loss_reg, m.train_map).expect("writing to a String");
    }
    out
}

pub fn run(cfg: &Config, a: TrainArgs) -> anyhow::Result<()> {
    let mut hp = cfg.hyperparams;
    a.hyper.apply(&mut hp)?;
    let samples = load_dataset::<f64>(&a.manifest, a.frame_size.or(cfg.frame_size))
        .with_context(|| format!("loading {}", a.manifest.display()))?;
    let outcome = train(&samples, &hp, cfg.seed)?;
    std::fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    save_model(a.out.join("head"), &outcome.head, &hp, cfg.seed)?;
    let metrics = a.out.join("metrics.csv");
    std::fs::write(&metrics, metrics_csv(&outcome.metrics)).with_context(|| format!("writing {}", metrics.display()))?;
    if let Some(last) = outcome.metrics.last() {
        println!(
            "epoch {}: loss_bce {:.6} loss_reg {:.6} train mAP {:.4}",
            last.epoch, last.loss_bce, last.loss_reg, last.train_map
        );
    }
    println!("wrote {}", a.out.join("head.json").display());
    Ok(())
}
