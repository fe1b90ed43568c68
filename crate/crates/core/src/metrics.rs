//! Rendering-quality metrics, dataset splitting, and the splat-sampling
//! reconstruction-error protocol against analytic reference surfaces.

use crate::error::{Error, Result};
use crate::image::ImageRgb;
use crate::model::GaussianMap;
use crate::scalar::Real;
use crate::synth::Surface;
use nalgebra::Vector3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Peak signal-to-noise ratio in dB; identical images report +infinity.
pub fn psnr<T: Real>(a: &ImageRgb<T>, b: &ImageRgb<T>, peak: T) -> Result<T> {
    if !a.same_dims(b) {
        return Err(Error::InvalidInput("psnr: image dimensions differ".into()));
    }
    if !(peak > T::zero()) {
        return Err(Error::InvalidInput("psnr: peak must be positive".into()));
    }
    let mut mse = T::zero();
    for (x, y) in a.pixels().iter().zip(b.pixels().iter()) {
        let d = x - y;
        mse += d.dot(&d);
    }
    mse /= T::from_count(3 * a.width() * a.height());
    if mse == T::zero() {
        return Ok(T::c(f64::INFINITY));
    }
    Ok(T::c(10.0) * (peak * peak / mse).log10())
}

const SSIM_WINDOW: usize = 11;
const SSIM_SIGMA: f64 = 1.5;
const SSIM_K1: f64 = 0.01;
const SSIM_K2: f64 = 0.03;

fn gaussian_kernel<T: Real>() -> [T; SSIM_WINDOW] {
    let mut k = [0.0_f64; SSIM_WINDOW];
    let mut sum = 0.0;
    for (i, v) in k.iter_mut().enumerate() {
        let x = i as f64 - (SSIM_WINDOW as f64 - 1.0) / 2.0;
        *v = (-x * x / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
        sum += *v;
    }
    let mut out = [T::zero(); SSIM_WINDOW];
    for i in 0..SSIM_WINDOW {
        out[i] = T::c(k[i] / sum);
    }
    out
}

/// Separable Gaussian convolution, valid region only. Output is indexed by
/// window position `(wx, wy)` with dimensions `(w-10) x (h-10)`.
fn convolve_valid<T: Real>(plane: &[T], w: usize, h: usize, kernel: &[T; SSIM_WINDOW]) -> Vec<T> {
    let vw = w - SSIM_WINDOW + 1;
    let vh = h - SSIM_WINDOW + 1;
    // Horizontal pass.
    let mut tmp = vec![T::zero(); vw * h];
    for y in 0..h {
        for x in 0..vw {
            let mut acc = T::zero();
            for (k, kv) in kernel.iter().enumerate() {
                acc += plane[y * w + x + k] * *kv;
            }
            tmp[y * vw + x] = acc;
        }
    }
    // Vertical pass.
    let mut out = vec![T::zero(); vw * vh];
    for y in 0..vh {
        for x in 0..vw {
            let mut acc = T::zero();
            for (k, kv) in kernel.iter().enumerate() {
                acc += tmp[(y + k) * vw + x] * *kv;
            }
            out[y * vw + x] = acc;
        }
    }
    out
}

fn channel_planes<T: Real>(img: &ImageRgb<T>) -> [Vec<T>; 3] {
    let mut planes = [
        Vec::with_capacity(img.pixels().len()),
        Vec::with_capacity(img.pixels().len()),
        Vec::with_capacity(img.pixels().len()),
    ];
    for p in img.pixels() {
        for ch in 0..3 {
            planes[ch].push(p[ch]);
        }
    }
    planes
}

/// Mean structural similarity over valid 11x11 window positions, channels
/// averaged. Peak fixed at 1 (linear images).
pub fn ssim<T: Real>(a: &ImageRgb<T>, b: &ImageRgb<T>) -> Result<T> {
    if !a.same_dims(b) {
        return Err(Error::InvalidInput("ssim: image dimensions differ".into()));
    }
    let (w, h) = (a.width(), a.height());
    if w < SSIM_WINDOW || h < SSIM_WINDOW {
        return Err(Error::InvalidInput(format!(
            "ssim: images must be at least {SSIM_WINDOW}x{SSIM_WINDOW}"
        )));
    }
    let kernel = gaussian_kernel::<T>();
    let c1 = T::c(SSIM_K1 * SSIM_K1);
    let c2 = T::c(SSIM_K2 * SSIM_K2);
    let pa = channel_planes(a);
    let pb = channel_planes(b);
    let mut total = T::zero();
    let vw = w - SSIM_WINDOW + 1;
    let vh = h - SSIM_WINDOW + 1;
    for ch in 0..3 {
        let xx: Vec<T> = pa[ch].iter().map(|&v| v * v).collect();
        let yy: Vec<T> = pb[ch].iter().map(|&v| v * v).collect();
        let xy: Vec<T> = pa[ch].iter().zip(pb[ch].iter()).map(|(&x, &y)| x * y).collect();
        let mu_x = convolve_valid(&pa[ch], w, h, &kernel);
        let mu_y = convolve_valid(&pb[ch], w, h, &kernel);
        let e_xx = convolve_valid(&xx, w, h, &kernel);
        let e_yy = convolve_valid(&yy, w, h, &kernel);
        let e_xy = convolve_valid(&xy, w, h, &kernel);
        for i in 0..vw * vh {
            let (mx, my) = (mu_x[i], mu_y[i]);
            let sx = e_xx[i] - mx * mx;
            let sy = e_yy[i] - my * my;
            let sxy = e_xy[i] - mx * my;
            let num = (T::c(2.0) * mx * my + c1) * (T::c(2.0) * sxy + c2);
            let den = (mx * mx + my * my + c1) * (sx + sy + c2);
            total += num / den;
        }
    }
    Ok(total / T::from_count(3 * vw * vh))
}

/// SSIM plus the gradient of the mean SSIM with respect to image `a`.
pub fn ssim_with_grad<T: Real>(a: &ImageRgb<T>, b: &ImageRgb<T>) -> Result<(T, ImageRgb<T>)> {
    let value = ssim(a, b)?;
    let (w, h) = (a.width(), a.height());
    let kernel = gaussian_kernel::<T>();
    let c1 = T::c(SSIM_K1 * SSIM_K1);
    let c2 = T::c(SSIM_K2 * SSIM_K2);
    let vw = w - SSIM_WINDOW + 1;
    let vh = h - SSIM_WINDOW + 1;
    let norm = T::one() / T::from_count(3 * vw * vh);
    let mut grad = ImageRgb::zeros(w, h);
    let pa = channel_planes(a);
    let pb = channel_planes(b);
    for ch in 0..3 {
        let xx: Vec<T> = pa[ch].iter().map(|&v| v * v).collect();
        let yy: Vec<T> = pb[ch].iter().map(|&v| v * v).collect();
        let xy: Vec<T> = pa[ch].iter().zip(pb[ch].iter()).map(|(&x, &y)| x * y).collect();
        let mu_x = convolve_valid(&pa[ch], w, h, &kernel);
        let mu_y = convolve_valid(&pb[ch], w, h, &kernel);
        let e_xx = convolve_valid(&xx, w, h, &kernel);
        let e_yy = convolve_valid(&yy, w, h, &kernel);
        let e_xy = convolve_valid(&xy, w, h, &kernel);
        for wy in 0..vh {
            for wx in 0..vw {
                let i = wy * vw + wx;
                let (mx, my) = (mu_x[i], mu_y[i]);
                let sx = e_xx[i] - mx * mx;
                let sy = e_yy[i] - my * my;
                let sxy = e_xy[i] - mx * my;
                let a1 = T::c(2.0) * mx * my + c1;
                let a2 = T::c(2.0) * sxy + c2;
                let b1 = mx * mx + my * my + c1;
                let b2 = sx + sy + c2;
                let s = (a1 * a2) / (b1 * b2);
                // Partials with respect to the window statistics.
                let ds_dmx = T::c(2.0) * my * a2 / (b1 * b2) - s * T::c(2.0) * mx / b1;
                let ds_dsx = -s / b2;
                let ds_dsxy = T::c(2.0) * a1 / (b1 * b2);
                // Raw-stat chain: sx = Exx - mx^2, sxy = Exy - mx my.
                let d_sx_part = ds_dmx - ds_dsx * T::c(2.0) * mx - ds_dsxy * my;
                for ky in 0..SSIM_WINDOW {
                    for kx in 0..SSIM_WINDOW {
                        let px = wx + kx;
                        let py = wy + ky;
                        let wgt = kernel[kx] * kernel[ky];
                        let xi = pa[ch][py * w + px];
                        let yi = pb[ch][py * w + px];
                        let d = wgt
                            * (d_sx_part + ds_dsx * T::c(2.0) * xi + ds_dsxy * yi)
                            * norm;
                        grad.get_mut(px, py)[ch] += d;
                    }
                }
            }
        }
    }
    Ok((value, grad))
}

/// Supported training fractions of the non-eval pool.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TrainFraction {
    F100,
    F50,
    F25,
    F16_6,
    F12_5,
    F10,
}

impl TrainFraction {
    /// Index stride into the pool.
    pub fn stride(self) -> usize {
        match self {
            TrainFraction::F100 => 1,
            TrainFraction::F50 => 2,
            TrainFraction::F25 => 4,
            TrainFraction::F16_6 => 6,
            TrainFraction::F12_5 => 8,
            TrainFraction::F10 => 10,
        }
    }
}

impl std::str::FromStr for TrainFraction {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "100" => Ok(TrainFraction::F100),
            "50" => Ok(TrainFraction::F50),
            "25" => Ok(TrainFraction::F25),
            "16.6" => Ok(TrainFraction::F16_6),
            "12.5" => Ok(TrainFraction::F12_5),
            "10" => Ok(TrainFraction::F10),
            other => Err(Error::Config(format!(
                "unsupported train fraction '{other}' (use 100, 50, 25, 16.6, 12.5 or 10)"
            ))),
        }
    }
}

/// Splits view indices: every fifth view (0, 5, 10, ...) is evaluation; the
/// training set subsamples the remainder at the requested fraction, uniformly
/// by index. Returns `(train, eval)`.
pub fn split_dataset(n_views: usize, fraction: TrainFraction) -> Result<(Vec<usize>, Vec<usize>)> {
    if n_views < 5 {
        return Err(Error::InvalidInput("split_dataset needs at least 5 views".into()));
    }
    let eval: Vec<usize> = (0..n_views).step_by(5).collect();
    let pool: Vec<usize> = (0..n_views).filter(|i| i % 5 != 0).collect();
    let train: Vec<usize> =
        pool.iter().step_by(fraction.stride()).copied().collect();
    Ok((train, eval))
}

/// Mean and population standard deviation of sample-to-surface distances:
/// three seeded draws from each splat's Gaussian against the nearest surface.
pub fn reconstruction_error<T: Real>(
    map: &GaussianMap<T>,
    surfaces: &[Surface<T>],
    seed: u64,
) -> Result<(T, T, usize)> {
    if surfaces.is_empty() {
        return Err(Error::InvalidInput("reconstruction_error: no reference surfaces".into()));
    }
    if map.is_empty() {
        return Err(Error::InvalidInput("reconstruction_error: empty map".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut distances: Vec<T> = Vec::with_capacity(map.len() * 3);
    for splat in &map.splats {
        let rot = splat.rotation_matrix();
        let scales = splat.scales();
        for _ in 0..3 {
            let z = Vector3::new(
                T::c(<StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng)),
                T::c(<StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng)),
                T::c(<StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng)),
            );
            let sample = splat.position + rot * scales.component_mul(&z);
            let mut best = T::c(f64::INFINITY);
            for s in surfaces {
                best = best.min(s.distance(&sample));
            }
            distances.push(best);
        }
    }
    let n = T::from_count(distances.len());
    let mean = distances.iter().fold(T::zero(), |acc, &d| acc + d) / n;
    let var = distances.iter().fold(T::zero(), |acc, &d| acc + (d - mean) * (d - mean)) / n;
    Ok((mean, var.sqrt(), distances.len()))
}
