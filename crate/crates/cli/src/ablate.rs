use std::fmt::Write as _;
use std::path::PathBuf;

use anyhow::Context;
use clap::Args;
use omniact::eval::dataset_map;
use omniact::io::load_dataset;
use omniact::miml::{train, Aggregator, Hyperparams, TrainSample};
use omniact::synth::gen_miml_dataset;
use rayon::prelude::*;

use crate::config::{bad_config, parse_size, Config, HyperFlags};

#[derive(Debug, Args)]
pub struct AblateArgs {
    /// Summary CSV to write.
    #[arg(long)]
    pub out: PathBuf,
    /// Seeds to run every preset with (overrides the config).
    #[arg(long, value_delimiter = ',')]
    pub seeds: Option<Vec<u64>>,
    /// Training manifest; without it each seed generates its own synthetic dataset.
    #[arg(long, requires = "test")]
    pub train: Option<PathBuf>,
    #[arg(long)]
    pub test: Option<PathBuf>,
    /// Synthetic training clips per seed.
    #[arg(long)]
    pub n_samples: Option<usize>,
    #[arg(long)]
    pub n_test: Option<usize>,
    #[arg(long, value_parser = parse_size)]
    pub frame_size: Option<[usize; 2]>,
    /// Base settings; each preset then overrides the fields it varies.
    #[command(flatten)]
    pub hyper: HyperFlags,
}

/// One ablation setting.
#[derive(Debug, Clone, PartialEq)]
pub struct Preset {
    pub group: &'static str,
    pub name: String,
    pub hp: Hyperparams<f64>,
}

pub const K_SWEEP: [usize; 4] = [2, 4, 8, 16];
pub const R_SWEEP: [f64; 5] = [0.2, 0.4, 0.8, 1.6, 3.2];
pub const ALPHAS: [f64; 2] = [0.0, 0.001];

/// The aggregator × mask × α grid, then the `k` and `r` sweeps around the
/// base setting. Sweeps repeat the base point so each is complete on its own.
pub fn presets(base: &Hyperparams<f64>) -> Vec<Preset> {
    let mut out = Vec::new();
    for aggregator in Aggregator::ALL {
        for use_mask in [true, false] {
            for reg_weight in ALPHAS {
                let hp = Hyperparams { aggregator, use_mask, reg_weight, ..*base };
                let mask = if use_mask { "mask" } else { "nomask" };
                out.push(Preset { group: "grid", name: format!("{}/{mask}/alpha={reg_weight}", aggregator.name()), hp });
            }
        }
    }
    let anchor = Hyperparams { aggregator: Aggregator::Lse, use_mask: true, ..*base };
    for k in K_SWEEP {
        out.push(Preset { group: "k", name: format!("k={k}"), hp: Hyperparams { k, ..anchor } });
    }
    for lse_sharpness in R_SWEEP {
        out.push(Preset { group: "r", name: format!("r={lse_sharpness}"), hp: Hyperparams { lse_sharpness, ..anchor } });
    }
    out
}

pub const SUMMARY_HEADER: &str = "group,preset,seed,aggregator,use_mask,reg_weight,k,lse_sharpness,test_map";

struct Split {
    train: Vec<TrainSample<f64>>,
    test: Vec<TrainSample<f64>>,
}

pub fn run(cfg: &Config, a: AblateArgs) -> anyhow::Result<()> {
    let mut base = cfg.hyperparams;
    a.hyper.apply(&mut base)?;
    let seeds = a.seeds.clone().unwrap_or_else(|| cfg.ablation.seeds.clone());
    if seeds.is_empty() {
        return Err(bad_config("ablation needs at least one seed"));
    }
    let frame = a.frame_size.or(cfg.frame_size);
    let load = |p: &PathBuf| load_dataset::<f64>(p, frame).with_context(|| format!("loading {}", p.display()));
    let data: Vec<Split> = match (&a.train, &a.test) {
        (Some(tr), Some(te)) => {
            let split = Split { train: load(tr)?, test: load(te)? };
            vec![split]
        }
        _ => seeds
            .iter()
            .map(|&seed| {
                let mut spec = cfg.synth.clone();
                spec.seed = seed;
                spec.n_samples = a.n_samples.unwrap_or(spec.n_samples);
                spec.n_test = a.n_test.unwrap_or(spec.n_test);
                spec.validate().map_err(|e| bad_config(e.to_string()))?;
                let d = gen_miml_dataset(&spec)?;
                Ok(Split { train: d.train.samples, test: d.test.samples })
            })
            .collect::<anyhow::Result<_>>()?,
    };
    let presets = presets(&base);
    let jobs: Vec<(usize, usize)> = (0..presets.len()).flat_map(|p| (0..seeds.len()).map(move |s| (p, s))).collect();
    let maps: Vec<f64> = jobs
        .par_iter()
        .map(|&(p, s)| {
            let split = &data[s.min(data.len() - 1)];
            let hp = &presets[p].hp;
            let outcome = train(&split.train, hp, seeds[s])?;
            Ok(dataset_map(&split.test, &outcome.head, hp)?)
        })
        .collect::<anyhow::Result<_>>()?;

    let mut csv = format!("{SUMMARY_HEADER}\n");
    for (&(p, s), map) in jobs.iter().zip(&maps) {
        let Preset { group, name, hp } = &presets[p];
        writeln!(
            csv,
            "{group},{name},{},{},{},{},{},{},{map:.6}",
            seeds[s],
            hp.aggregator.name(),
            hp.use_mask,
            hp.reg_weight,
            hp.k,
            hp.lse_sharpness
        )
        .expect("writing to a String");
        println!("{group:<5} {name:<28} seed {:<4} test mAP {map:.4}", seeds[s]);
    }
    if let Some(dir) = a.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    std::fs::write(&a.out, csv).with_context(|| format!("writing {}", a.out.display()))?;
    println!("{} presets x {} seeds -> {}", presets.len(), seeds.len(), a.out.display());
    Ok(())
}
