use std::io::BufReader;
use std::path::PathBuf;

use anyhow::Context;
use clap::Args;
use omniact::eval::{
    ap_from_predictions, bag_probabilities, read_predictions, write_ap_table, write_predictions,
    PredictionRecord,
};
use omniact::io::{load_dataset, load_model};
use omniact::miml::MimlHead;

use crate::config::{bad_config, parse_size, Config};

pub const LONG_ABOUT: &str = "\
Score a dataset with a trained head, or score an existing prediction CSV.

Average precision is the information-retrieval definition: samples are
ranked by descending score (ties keep their input order) and AP is the mean
of precision@k over the ranks k that hold a positive. It is not the
11-point interpolated variant. mAP is the mean AP over classes that have at
least one positive; classes without positives are left blank in the table.

Outputs: <out>/predictions.csv (sample_id,class,score,label) when a model is
given, and <out>/ap.csv with one class,ap row per class plus a final mAP row.";

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Model card written by `train` (`head.json`).
    #[arg(long, requires = "manifest", conflicts_with = "predictions")]
    pub model: Option<PathBuf>,
    /// Manifest of the clips to score.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Existing prediction CSV to score instead of running a model.
    #[arg(long)]
    pub predictions: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Comma-separated class names for the AP table.
    #[arg(long, value_delimiter = ',')]
    pub class_names: Option<Vec<String>>,
    #[arg(long, value_parser = parse_size)]
    pub frame_size: Option<[usize; 2]>,
}

fn model_records(cfg: &Config, a: &EvalArgs) -> anyhow::Result<Vec<PredictionRecord>> {
    let (model, manifest) = (a.model.as_ref().expect("checked"), a.manifest.as_ref().expect("checked"));
    let (card, head): (_, MimlHead<f64>) = load_model(model).with_context(|| format!("loading {}", model.display()))?;
    let samples = load_dataset::<f64>(manifest, a.frame_size.or(cfg.frame_size))
        .with_context(|| format!("loading {}", manifest.display()))?;
    let probs = bag_probabilities(&samples, &head, &card.hyperparams)?;
    Ok(samples
        .iter()
        .zip(&probs)
        .enumerate()
        .flat_map(|(i, (s, p))| {
            p.iter().zip(&s.label.0).enumerate().map(move |(class, (&score, &label))| PredictionRecord {
                sample_id: i,
                class,
                score,
                label,
            })
        })
        .collect())
}

pub fn run(cfg: &Config, a: EvalArgs) -> anyhow::Result<()> {
    let records = match (&a.model, &a.predictions) {
        (Some(_), _) => model_records(cfg, &a)?,
        (None, Some(p)) => {
            let f = std::fs::File::open(p).with_context(|| format!("reading {}", p.display()))?;
            read_predictions(BufReader::new(f)).with_context(|| format!("reading {}", p.display()))?
        }
        (None, None) => return Err(bad_config("eval needs --model with --manifest, or --predictions")),
    };
    let per_class = ap_from_predictions(&records)?;
    let table = write_ap_table(&per_class, a.class_names.as_deref())?;
    std::fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    if a.model.is_some() {
        std::fs::write(a.out.join("predictions.csv"), write_predictions(&records))?;
    }
    std::fs::write(a.out.join("ap.csv"), &table)?;
    print!("{table}");
    Ok(())
}
