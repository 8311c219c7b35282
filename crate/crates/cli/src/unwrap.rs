use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use clap::Args;
use omniact::geometry::{
    averaged_center, build_mapping, estimate_center, fisheye_radius, panorama_dims, remap, CameraFov, FisheyeCenter,
    FrameDims, Interpolation, MappingParams, MappingTable, PanoramaSpec, SpineLine,
};
use omniact::image::Image;
use omniact::io::{read_json, read_keypoints_file, write_json};
use serde::{Deserialize, Serialize};

use crate::config::{bad_config, parse_point, Config};

#[derive(Debug, Args)]
pub struct UnwrapArgs {
    /// Fisheye frames (binary PGM or PPM), all the same size.
    #[arg(long, num_args = 1.., required = true)]
    pub input: Vec<PathBuf>,
    /// JSON list of {frame, mid_shoulder, mid_hip} records.
    #[arg(long)]
    pub keypoints: Option<PathBuf>,
    /// Use this center instead of estimating one.
    #[arg(long, value_parser = parse_point)]
    pub center: Option<(f64, f64)>,
    /// Panorama height in pixels.
    #[arg(long)]
    pub height: Option<usize>,
    /// Horizontal field of view, degrees.
    #[arg(long)]
    pub hfov: Option<f64>,
    /// Vertical field of view, degrees.
    #[arg(long)]
    pub vfov: Option<f64>,
    /// Fisheye angle that becomes panorama column 0, degrees.
    #[arg(long)]
    pub phi: Option<f64>,
    /// nearest | bilinear
    #[arg(long)]
    pub interp: Option<Interpolation>,
    #[arg(long)]
    pub out: PathBuf,
    /// Mapping table cache (default: `<out>/mapping.omap`).
    #[arg(long)]
    pub table: Option<PathBuf>,
}

/// Parameters a cached table was built with, stored beside it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TableKey {
    params: MappingParams<f64>,
    panorama: [usize; 2],
    fisheye: [usize; 2],
}

fn estimate_from_keypoints(path: &Path) -> anyhow::Result<FisheyeCenter<f64>> {
    let records = read_keypoints_file(path).with_context(|| format!("reading keypoints {}", path.display()))?;
    let mut by_frame: BTreeMap<i64, Vec<SpineLine<f64>>> = BTreeMap::new();
    for r in &records {
        let line = SpineLine::from_keypoints((r.mid_shoulder[0], r.mid_shoulder[1]), (r.mid_hip[0], r.mid_hip[1]))
            .with_context(|| format!("frame {} in {}", r.frame, path.display()))?;
        by_frame.entry(r.frame).or_default().push(line);
    }
    let mut centers = Vec::new();
    let mut last_err = None;
    for (frame, lines) in &by_frame {
        match estimate_center(lines) {
            Ok(c) => centers.push(c),
            Err(e) => {
                eprintln!("warning: frame {frame} skipped: {e}");
                last_err = Some(e);
            }
        }
    }
    if centers.is_empty() {
        return Err(match last_err {
            Some(e) => anyhow::Error::new(e).context(format!("no frame of {} determines a center", path.display())),
            None => anyhow::Error::new(omniact::Error::Underdetermined(format!("{} holds no keypoints", path.display()))),
        });
    }
    Ok(averaged_center(&centers)?)
}

fn load_or_build_table(path: &Path, key: TableKey, spec: PanoramaSpec, frame: FrameDims) -> anyhow::Result<(MappingTable, bool)> {
    let key_path = path.with_extension("json");
    if path.exists() && key_path.exists() {
        if let Ok(cached) = read_json::<TableKey>(&key_path) {
            if cached == key {
                let table = MappingTable::load(path, frame).with_context(|| format!("reading table {}", path.display()))?;
                return Ok((table, true));
            }
        }
    }
    let table = build_mapping(spec, &key.params, frame);
    table.save(path).with_context(|| format!("writing table {}", path.display()))?;
    write_json(&key_path, &key)?;
    Ok((table, false))
}

pub fn run(cfg: &Config, a: UnwrapArgs) -> anyhow::Result<()> {
    let mut geo = cfg.geometry;
    geo.height_px = a.height.unwrap_or(geo.height_px);
    geo.hfov_deg = a.hfov.unwrap_or(geo.hfov_deg);
    geo.vfov_deg = a.vfov.unwrap_or(geo.vfov_deg);
    geo.phi_deg = a.phi.unwrap_or(geo.phi_deg);
    geo.interpolation = a.interp.unwrap_or(geo.interpolation);
    let fov = CameraFov::new(geo.hfov_deg, geo.vfov_deg).map_err(|e| bad_config(e.to_string()))?;
    let spec = panorama_dims(fov, geo.height_px).map_err(|e| bad_config(e.to_string()))?;

    let frames: Vec<Image> = a
        .input
        .iter()
        .map(|p| Image::load(p).with_context(|| format!("reading frame {}", p.display())))
        .collect::<anyhow::Result<_>>()?;
    let (fw, fh) = (frames[0].width(), frames[0].height());
    if let Some((p, f)) = a.input.iter().zip(&frames).find(|(_, f)| (f.width(), f.height()) != (fw, fh)) {
        return Err(bad_config(format!("{} is {}x{}, expected {fw}x{fh}", p.display(), f.width(), f.height())));
    }

    let center = match (a.center, &a.keypoints) {
        (Some((x, y)), _) => FisheyeCenter::new(x, y),
        (None, Some(kp)) => estimate_from_keypoints(kp)?,
        (None, None) => return Err(bad_config("unwrap needs --keypoints or --center")),
    };
    let radius = fisheye_radius(center, fw, fh);
    let params = MappingParams::new(center, radius, geo.phi_deg).map_err(|e| bad_config(e.to_string()))?;

    std::fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    let table_path = a.table.clone().unwrap_or_else(|| a.out.join("mapping.omap"));
    let key = TableKey { params, panorama: [spec.width_px, spec.height_px], fisheye: [fw, fh] };
    let (table, cached) = load_or_build_table(&table_path, key, spec, FrameDims::new(fw, fh))?;

    println!("center: {:.4},{:.4}", center.x, center.y);
    println!("radius: {radius:.4}");
    println!("panorama: {}x{}", spec.width_px, spec.height_px);
    println!("table: {} ({})", table_path.display(), if cached { "cached" } else { "built" });
    for (path, frame) in a.input.iter().zip(&frames) {
        let pano = remap(frame, &table, geo.interpolation)?;
        let stem = path.file_stem().and_then(|s| s.to_str()).ok_or_else(|| anyhow!("bad file name {}", path.display()))?;
        let ext = if pano.channels() == 1 { "pgm" } else { "ppm" };
        let out = a.out.join(format!("{stem}_pano.{ext}"));
        pano.save(&out).with_context(|| format!("writing {}", out.display()))?;
        println!("wrote {}", out.display());
    }
    Ok(())
}
