//! Grad-CAM heatmaps through the MIML head.
//!
//! For class `a`, `∂p^a/∂A` is averaged over the `Z = H·W` cells of each
//! channel into `α_k`. The heatmap is `ReLU(Σ_k α_k A^k)` over the masked
//! feature map `A`.

use rayon::prelude::*;

use crate::error::{domain, mismatch, Result};
use crate::image::Image;
use crate::miml::{backward, forward, Hyperparams, MimlHead, TrainSample};
use crate::tensor::FeatureMap;
use crate::Real;

/// Row-major `height × width` map of non-negative values.
#[derive(Debug, Clone, PartialEq)]
pub struct Heatmap<T> {
    height: usize,
    width: usize,
    values: Vec<T>,
}

impl<T: Real> Heatmap<T> {
    pub fn from_vec(height: usize, width: usize, values: Vec<T>) -> Result<Self> {
        if values.len() != height * width {
            return Err(mismatch(format!("{} values for a {height}x{width} heatmap", values.len())));
        }
        if values.iter().any(|v| !(v.is_finite() && *v >= T::zero())) {
            return Err(domain("heatmap values must be finite and non-negative"));
        }
        Ok(Self { height, width, values })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn get(&self, row: usize, col: usize) -> T {
        self.values[row * self.width + col]
    }

    pub fn max(&self) -> T {
        self.values.iter().copied().fold(T::zero(), T::max)
    }

    /// `(row, col)` of the first maximum in row-major order.
    pub fn argmax(&self) -> (usize, usize) {
        let mut best = 0;
        for (i, v) in self.values.iter().enumerate() {
            if *v > self.values[best] {
                best = i;
            }
        }
        (best / self.width.max(1), best % self.width.max(1))
    }

    /// Grayscale rendering scaled so the maximum maps to 255; an all-zero
    /// map renders black.
    pub fn to_image(&self) -> Image {
        let m = self.max().to_f64_lossy();
        let px = self
            .values
            .iter()
            .map(|v| if m > 0.0 { (255.0 * v.to_f64_lossy() / m).round().clamp(0.0, 255.0) as u8 } else { 0 })
            .collect();
        Image::from_pixels(self.width, self.height, 1, px).expect("sized buffer")
    }
}

/// Per-channel Grad-CAM weights. `pool_size` is the `Z` they were averaged over.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelWeights<T> {
    pub weights: Vec<T>,
    pub pool_size: usize,
}

/// `∂p^a/∂A` for the raw feature map; zero wherever the mask is off.
pub fn feature_gradients<T: Real>(
    sample: &TrainSample<T>,
    head: &MimlHead<T>,
    hp: &Hyperparams<T>,
    class: usize,
) -> Result<FeatureMap<T>> {
    if class >= head.n_classes() {
        return Err(domain(format!("class {class} out of range for {} classes", head.n_classes())));
    }
    let fwd = forward(sample, head, hp)?;
    let p = fwd.scores.bag_probs[class];
    let mut d_bag = vec![T::zero(); head.n_classes()];
    d_bag[class] = p * (T::one() - p);
    let (_, dx) = backward(&fwd, head, &d_bag, None);
    Ok(crate::miml::input_gradient(&fwd, &dx, sample, hp))
}

pub fn channel_weights<T: Real>(grads: &FeatureMap<T>) -> ChannelWeights<T> {
    let z = grads.height() * grads.width();
    let denom = T::from_usize_lossy(z.max(1));
    let weights = (0..grads.channels()).map(|c| grads.plane(c).iter().copied().sum::<T>() / denom).collect();
    ChannelWeights { weights, pool_size: z }
}

pub fn gradcam<T: Real>(feature: &FeatureMap<T>, weights: &ChannelWeights<T>) -> Result<Heatmap<T>> {
    if weights.weights.len() != feature.channels() {
        return Err(mismatch(format!(
            "{} channel weights for {} channels",
            weights.weights.len(),
            feature.channels()
        )));
    }
    let plane = feature.height() * feature.width();
    let mut acc = vec![T::zero(); plane];
    for (c, &w) in weights.weights.iter().enumerate() {
        for (a, &v) in acc.iter_mut().zip(feature.plane(c)) {
            *a += w * v;
        }
    }
    for a in &mut acc {
        *a = a.max(T::zero());
    }
    Heatmap::from_vec(feature.height(), feature.width(), acc)
}

/// Full Grad-CAM for one class of one sample, over the map the head sees.
pub fn class_heatmap<T: Real>(
    sample: &TrainSample<T>,
    head: &MimlHead<T>,
    hp: &Hyperparams<T>,
    class: usize,
) -> Result<Heatmap<T>> {
    let grads = feature_gradients(sample, head, hp, class)?;
    gradcam(&sample.input(hp.use_mask)?, &channel_weights(&grads))
}

/// [`class_heatmap`] for several classes, computed in parallel, returned in
/// the order of `classes`.
pub fn class_heatmaps<T: Real>(
    sample: &TrainSample<T>,
    head: &MimlHead<T>,
    hp: &Hyperparams<T>,
    classes: &[usize],
) -> Result<Vec<Heatmap<T>>> {
    classes.par_iter().map(|&a| class_heatmap(sample, head, hp, a)).collect()
}

/// Bilinear resize with pixel centers aligned (`align_corners = false`),
/// clamping at the border.
pub fn upsample_heatmap<T: Real>(h: &Heatmap<T>, frame_w: usize, frame_h: usize) -> Result<Heatmap<T>> {
    if frame_w < h.width || frame_h < h.height || h.width == 0 || h.height == 0 {
        return Err(domain(format!(
            "cannot upsample {}x{} to {frame_w}x{frame_h}",
            h.width, h.height
        )));
    }
    let axis = |dst: usize, src: usize| -> Vec<(usize, usize, T)> {
        let scale = src as f64 / dst as f64;
        (0..dst)
            .map(|t| {
                let x = ((t as f64 + 0.5) * scale - 0.5).clamp(0.0, (src - 1) as f64);
                let lo = x.floor() as usize;
                let hi = (lo + 1).min(src - 1);
                (lo, hi, T::lit(x - lo as f64))
            })
            .collect()
    };
    let xs = axis(frame_w, h.width);
    let ys = axis(frame_h, h.height);
    let mut out = Vec::with_capacity(frame_w * frame_h);
    for &(y0, y1, fy) in &ys {
        for &(x0, x1, fx) in &xs {
            let top = h.get(y0, x0) * (T::one() - fx) + h.get(y0, x1) * fx;
            let bot = h.get(y1, x0) * (T::one() - fx) + h.get(y1, x1) * fx;
            out.push((top * (T::one() - fy) + bot * fy).max(T::zero()));
        }
    }
    Heatmap::from_vec(frame_h, frame_w, out)
}

/// 50% blend of the heatmap rendering over an image of the same size.
pub fn overlay<T: Real>(h: &Heatmap<T>, base: &Image) -> Result<Image> {
    if base.width() != h.width || base.height() != h.height {
        return Err(mismatch(format!(
            "heatmap {}x{} does not match image {}x{}",
            h.width,
            h.height,
            base.width(),
            base.height()
        )));
    }
    let heat = h.to_image();
    let rgb = base.to_rgb();
    let px = rgb
        .pixels()
        .iter()
        .enumerate()
        .map(|(i, &b)| (b as u16 + heat.pixels()[i / 3] as u16).div_ceil(2) as u8)
        .collect();
    Image::from_pixels(h.width, h.height, 3, px)
}
