use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::Args;
use omniact::eval::{localization_hit_rate, ClassHeatmap};
use omniact::image::Image;
use omniact::io::{load_dataset, load_model, read_json, ManifestEntry, SampleTruth, TRUTH_FILE};
use omniact::localize::{class_heatmaps, overlay, upsample_heatmap, Heatmap};
use omniact::miml::{predict, MimlHead};

use crate::config::{bad_config, parse_size, Config};

#[derive(Debug, Args)]
pub struct LocalizeArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub manifest: PathBuf,
    /// Output directory for `<clip>_<class>.pgm` and `<clip>_<class>_overlay.ppm`.
    #[arg(long)]
    pub out: PathBuf,
    /// Clip indices to render (default: every clip).
    #[arg(long, value_delimiter = ',')]
    pub samples: Option<Vec<usize>>,
    /// Render every class instead of only the predicted ones.
    #[arg(long)]
    pub all_classes: bool,
    /// Directory holding `<clip>.ppm` (or `.pgm`) panoramas to overlay on.
    #[arg(long)]
    pub panoramas: Option<PathBuf>,
    /// Resize heatmaps to `WxH` (overlays always use the panorama size).
    #[arg(long, value_parser = parse_size)]
    pub size: Option<[usize; 2]>,
    #[arg(long, value_parser = parse_size)]
    pub frame_size: Option<[usize; 2]>,
}

fn find_panorama(dir: &Path, clip: &str) -> Option<PathBuf> {
    ["ppm", "pgm"].iter().map(|ext| dir.join(format!("{clip}.{ext}"))).find(|p| p.exists())
}

fn resized(h: &Heatmap<f64>, size: Option<[usize; 2]>) -> anyhow::Result<Heatmap<f64>> {
    Ok(match size {
        Some([w, hh]) if (w, hh) != (h.width(), h.height()) => upsample_heatmap(h, w, hh)?,
        _ => h.clone(),
    })
}

pub fn run(cfg: &Config, a: LocalizeArgs) -> anyhow::Result<()> {
    let (card, head): (_, MimlHead<f64>) = load_model(&a.model).with_context(|| format!("loading {}", a.model.display()))?;
    let hp = card.hyperparams;
    let entries: Vec<ManifestEntry> = read_json(&a.manifest).with_context(|| format!("reading {}", a.manifest.display()))?;
    let samples = load_dataset::<f64>(&a.manifest, a.frame_size.or(cfg.frame_size))
        .with_context(|| format!("loading {}", a.manifest.display()))?;
    let picked = a.samples.clone().unwrap_or_else(|| (0..samples.len()).collect());
    if let Some(&bad) = picked.iter().find(|&&i| i >= samples.len()) {
        return Err(bad_config(format!("sample {bad} out of range for {} clips", samples.len())));
    }
    std::fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;

    let mut rendered = Vec::new();
    for &i in &picked {
        let sample = &samples[i];
        let clip = Path::new(&entries[i].features).file_stem().and_then(|s| s.to_str()).unwrap_or("clip").to_string();
        let classes: Vec<usize> = if a.all_classes {
            (0..head.n_classes()).collect()
        } else {
            predict(sample, &head, &hp)?.predicted
        };
        let maps = class_heatmaps(sample, &head, &hp, &classes)?;
        let base = match &a.panoramas {
            Some(dir) => match find_panorama(dir, &clip) {
                Some(p) => Some(Image::load(&p).with_context(|| format!("reading {}", p.display()))?),
                None => {
                    eprintln!("warning: no panorama for {clip} in {}", dir.display());
                    None
                }
            },
            None => None,
        };
        for (&class, map) in classes.iter().zip(maps) {
            let path = a.out.join(format!("{clip}_{class}.pgm"));
            resized(&map, a.size)?.to_image().save(&path).with_context(|| format!("writing {}", path.display()))?;
            if let Some(img) = &base {
                let big = resized(&map, Some([img.width(), img.height()]))?;
                let path = a.out.join(format!("{clip}_{class}_overlay.ppm"));
                overlay(&big, img)?.save(&path).with_context(|| format!("writing {}", path.display()))?;
            }
            rendered.push(ClassHeatmap { sample: i, class, heatmap: map });
        }
    }
    println!("wrote {} heatmaps to {}", rendered.len(), a.out.display());

    let truth_path = a.manifest.parent().unwrap_or(Path::new(".")).join(TRUTH_FILE);
    if truth_path.exists() {
        let truth: Vec<SampleTruth> = read_json(&truth_path)?;
        match localization_hit_rate(&rendered, &truth) {
            Ok(rate) => println!("localization hit rate: {rate:.4}"),
            Err(e) => println!("localization hit rate: n/a ({e})"),
        }
    }
    Ok(())
}
