use std::path::PathBuf;

use anyhow::Context;
use clap::Args;
use omniact::io::{save_dataset, write_json, RawTensor};
use omniact::synth::gen_miml_dataset;

use crate::config::{bad_config, Config};

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Output directory; receives `train/`, `test/`, `signatures.otsr` and `synth.json`.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub n_samples: Option<usize>,
    #[arg(long)]
    pub n_test: Option<usize>,
    #[arg(long)]
    pub noise_sigma: Option<f64>,
    /// Strength of unlabeled clutter outside the person mask.
    #[arg(long)]
    pub clutter_ratio: Option<f64>,
}

pub fn run(cfg: &Config, a: SynthArgs) -> anyhow::Result<()> {
    let mut spec = cfg.synth.clone();
    spec.seed = cfg.seed;
    spec.n_samples = a.n_samples.unwrap_or(spec.n_samples);
    spec.n_test = a.n_test.unwrap_or(spec.n_test);
    spec.noise_sigma = a.noise_sigma.unwrap_or(spec.noise_sigma);
    spec.clutter_ratio = a.clutter_ratio.unwrap_or(spec.clutter_ratio);
    spec.validate().map_err(|e| bad_config(e.to_string()))?;
    let data = gen_miml_dataset(&spec)?;
    let frame = Some(spec.frame_size());
    for (name, split) in [("train", &data.train), ("test", &data.test)] {
        let dir = a.out.join(name);
        let manifest = save_dataset(&dir, &split.samples, Some(&split.boxes), frame, Some(&split.truth))
            .with_context(|| format!("writing {}", dir.display()))?;
        println!("{name}: {} clips -> {}", split.samples.len(), manifest.display());
    }
    let sig = &data.signatures;
    RawTensor::new(vec![sig.rows(), sig.cols()], sig.data().iter().map(|&v| v as f32).collect())?
        .save(a.out.join("signatures.otsr"))?;
    write_json(a.out.join("synth.json"), &spec)?;
    Ok(())
}
