//! Gradient-driven map growth.
//!
//! Thin splats grow inside their tangent plane: clones land at the projection
//! of the accumulated positional step onto the plane, and splits sample the
//! tangential 2D Gaussian, so descendants stay co-planar with the parent and
//! inherit its normal verbatim. Free splats follow the conventional
//! clone/split rule. Growth is triggered by the per-view mean positional
//! gradient accumulated since the last pass.

use crate::error::{Error, Result};
use crate::math::sigmoid;
use crate::model::{GaussianMap, GaussianSplat, SplatKind};
use crate::optim::SlotOrigin;
use crate::raster::MapGradients;
use crate::scalar::Real;
use nalgebra::Vector3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Child tangent scales shrink by this factor on a split.
pub const SPLIT_SCALE_FACTOR: f64 = 1.6;

/// Running positional-gradient statistics between densify passes.
#[derive(Clone, Debug)]
pub struct GrowthStats<T: Real> {
    /// Sum of positional gradient norms per splat.
    pub accum_grad: Vec<T>,
    /// Sum of positional gradient vectors per splat (direction signal).
    pub accum_vec: Vec<Vector3<T>>,
    /// Number of views the splat contributed to since the last pass.
    pub accum_count: Vec<u32>,
}

impl<T: Real> GrowthStats<T> {
    pub fn new(n: usize) -> Self {
        Self {
            accum_grad: vec![T::zero(); n],
            accum_vec: vec![Vector3::zeros(); n],
            accum_count: vec![0; n],
        }
    }

    /// Adds one view's gradients; only visible splats count.
    pub fn accumulate(&mut self, grads: &MapGradients<T>) {
        for i in 0..grads.len() {
            if grads.visible[i] {
                self.accum_grad[i] += grads.position_norm[i];
                self.accum_vec[i] += grads.position[i];
                self.accum_count[i] += 1;
            }
        }
    }

    pub fn reset(&mut self) {
        for v in &mut self.accum_grad {
            *v = T::zero();
        }
        for v in &mut self.accum_vec {
            *v = Vector3::zeros();
        }
        for c in &mut self.accum_count {
            *c = 0;
        }
    }

    /// Rebuilds the stats for a reindexed map (all counters cleared).
    pub fn remap(&mut self, origins: &[SlotOrigin]) {
        *self = Self::new(origins.len());
    }

    pub fn len(&self) -> usize {
        self.accum_grad.len()
    }

    pub fn is_empty(&self) -> bool {
        self.accum_grad.is_empty()
    }
}

/// Clone of a thin splat at the tangent-plane projection of the accumulated
/// step: `mu' = mu + d - n (n . d)`. Everything else is copied verbatim.
pub fn tangent_clone<T: Real>(
    splat: &GaussianSplat<T>,
    accumulated_dir: &Vector3<T>,
) -> Result<GaussianSplat<T>> {
    if splat.kind != SplatKind::Thin {
        return Err(Error::ContractViolation("tangent_clone requires a thin splat"));
    }
    let normal: Vector3<T> = splat.rotation_matrix().column(2).into_owned();
    let projected = accumulated_dir - normal * normal.dot(accumulated_dir);
    let mut child = splat.clone();
    child.position += projected;
    Ok(child)
}

/// Splits a thin splat into two children sampled from its tangential 2D
/// Gaussian; both keep the parent's plane (`n . mu` unchanged), rotation, and
/// thickness, with tangent scales divided by [`SPLIT_SCALE_FACTOR`].
pub fn coplanar_split<T: Real>(
    splat: &GaussianSplat<T>,
    rng_seed: u64,
) -> Result<(GaussianSplat<T>, GaussianSplat<T>)> {
    if splat.kind != SplatKind::Thin {
        return Err(Error::ContractViolation("coplanar_split requires a thin splat"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let rot = splat.rotation_matrix();
    let b1: Vector3<T> = rot.column(0).into_owned();
    let b2: Vector3<T> = rot.column(1).into_owned();
    let scales = splat.scales();
    let shrink = T::c(SPLIT_SCALE_FACTOR.ln());
    let mut child = || {
        let u = T::c(<StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng))
            * scales[0];
        let v = T::c(<StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng))
            * scales[1];
        let mut c = splat.clone();
        c.position = splat.position + b1 * u + b2 * v;
        c.log_scales[0] -= shrink;
        c.log_scales[1] -= shrink;
        c
    };
    let a = child();
    let b = child();
    Ok((a, b))
}

/// Outcome of conventional densification for a free splat.
pub enum FreeGrowth<T: Real> {
    /// Map keeps the original and gains this clone.
    Clone(GaussianSplat<T>),
    /// Map replaces the original with these two children.
    Split(GaussianSplat<T>, GaussianSplat<T>),
}

/// Conventional clone/split: oversized splats split into two children sampled
/// from the full 3D Gaussian (scales shrunk), small ones clone along the
/// unprojected accumulated step.
pub fn free_split_clone<T: Real>(
    splat: &GaussianSplat<T>,
    accumulated_dir: &Vector3<T>,
    size_threshold: T,
    rng_seed: u64,
) -> Result<FreeGrowth<T>> {
    if splat.kind != SplatKind::Free {
        return Err(Error::ContractViolation("free_split_clone requires a free splat"));
    }
    let scales = splat.scales();
    let max_scale = scales[0].max(scales[1]).max(scales[2]);
    if max_scale > size_threshold {
        let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
        let rot = splat.rotation_matrix();
        let shrink = T::c(SPLIT_SCALE_FACTOR.ln());
        let mut child = || {
            let z = Vector3::new(
                T::c(<StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng)),
                T::c(<StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng)),
                T::c(<StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng)),
            );
            let mut c = splat.clone();
            c.position = splat.position + rot * scales.component_mul(&z);
            c.log_scales -= Vector3::from_element(shrink);
            c
        };
        let a = child();
        let b = child();
        Ok(FreeGrowth::Split(a, b))
    } else {
        let mut c = splat.clone();
        c.position += accumulated_dir;
        Ok(FreeGrowth::Clone(c))
    }
}

/// Counts from one densify (and prune) pass, formatted for the diagnostics
/// stream as
/// `iter=<n> cloned_thin=<a> split_thin=<b> cloned_free=<c> split_free=<d> pruned=<e> total=<f>`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct GrowthReport {
    pub iter: usize,
    pub cloned_thin: usize,
    pub split_thin: usize,
    pub cloned_free: usize,
    pub split_free: usize,
    pub pruned: usize,
    pub total: usize,
}

impl std::fmt::Display for GrowthReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "iter={} cloned_thin={} split_thin={} cloned_free={} split_free={} pruned={} total={}",
            self.iter,
            self.cloned_thin,
            self.split_thin,
            self.cloned_free,
            self.split_free,
            self.pruned,
            self.total
        )
    }
}

/// Result of a structural pass: the report and, per new-map slot, where it
/// came from (for optimizer-state and stats remapping).
pub struct PassOutcome {
    pub report: GrowthReport,
    pub origins: Vec<SlotOrigin>,
}

/// One densification pass. Splats whose mean per-view gradient exceeds
/// `grad_threshold` grow: thin splats tangent-clone while their tangent
/// footprint is small and co-planar-split otherwise; free splats follow the
/// conventional rule. `step_scale` converts the mean gradient into the
/// descent step for clone placement. Children split in place; clones append
/// in parent order. Stats are reset by the caller via `remap`.
pub fn densify_pass<T: Real>(
    map: &mut GaussianMap<T>,
    stats: &GrowthStats<T>,
    grad_threshold: T,
    size_threshold: T,
    step_scale: T,
    seed: u64,
) -> Result<PassOutcome> {
    if stats.len() != map.len() {
        return Err(Error::InvalidInput(format!(
            "densify_pass: {} stats slots vs {} splats",
            stats.len(),
            map.len()
        )));
    }
    let mut report = GrowthReport::default();
    let mut new_splats: Vec<GaussianSplat<T>> = Vec::with_capacity(map.len());
    let mut origins: Vec<SlotOrigin> = Vec::with_capacity(map.len());
    let mut clones: Vec<(GaussianSplat<T>, usize)> = Vec::new();
    let mut old_to_new: Vec<Option<usize>> = vec![None; map.len()];

    for (i, splat) in map.splats.iter().enumerate() {
        let count = stats.accum_count[i];
        let selected = count > 0
            && stats.accum_grad[i] / T::from_count(count as usize) > grad_threshold;
        if !selected {
            old_to_new[i] = Some(new_splats.len());
            origins.push(SlotOrigin::Carried(i));
            new_splats.push(splat.clone());
            continue;
        }
        let mean_grad = stats.accum_vec[i] / T::from_count(count as usize);
        let step = -mean_grad * step_scale;
        let splat_seed = seed ^ (i as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15);
        match splat.kind {
            SplatKind::Thin => {
                let tangent_max = splat.scales()[0].max(splat.scales()[1]);
                if tangent_max <= size_threshold {
                    old_to_new[i] = Some(new_splats.len());
                    origins.push(SlotOrigin::Carried(i));
                    new_splats.push(splat.clone());
                    clones.push((tangent_clone(splat, &step)?, i));
                    report.cloned_thin += 1;
                } else {
                    let (a, b) = coplanar_split(splat, splat_seed)?;
                    origins.push(SlotOrigin::Fresh);
                    new_splats.push(a);
                    origins.push(SlotOrigin::Fresh);
                    new_splats.push(b);
                    report.split_thin += 1;
                }
            }
            SplatKind::Free => match free_split_clone(splat, &step, size_threshold, splat_seed)? {
                FreeGrowth::Clone(c) => {
                    old_to_new[i] = Some(new_splats.len());
                    origins.push(SlotOrigin::Carried(i));
                    new_splats.push(splat.clone());
                    clones.push((c, i));
                    report.cloned_free += 1;
                }
                FreeGrowth::Split(a, b) => {
                    origins.push(SlotOrigin::Fresh);
                    new_splats.push(a);
                    origins.push(SlotOrigin::Fresh);
                    new_splats.push(b);
                    report.split_free += 1;
                }
            },
        }
    }
    for (clone, parent) in clones {
        origins.push(SlotOrigin::Cloned(parent));
        new_splats.push(clone);
    }

    let new_len = new_splats.len();
    map.splats = new_splats;
    map.remap_neighbors(&old_to_new, new_len);
    report.total = new_len;
    Ok(PassOutcome { report, origins })
}

/// Removes splats with activated opacity strictly below `floor`.
pub fn prune<T: Real>(map: &mut GaussianMap<T>, opacity_floor: T) -> PassOutcome {
    let mut origins = Vec::new();
    let mut old_to_new: Vec<Option<usize>> = vec![None; map.len()];
    let mut kept: Vec<GaussianSplat<T>> = Vec::with_capacity(map.len());
    let mut removed = 0usize;
    for (i, splat) in map.splats.iter().enumerate() {
        if sigmoid(splat.opacity_logit) < opacity_floor {
            removed += 1;
        } else {
            old_to_new[i] = Some(kept.len());
            origins.push(SlotOrigin::Carried(i));
            kept.push(splat.clone());
        }
    }
    let new_len = kept.len();
    map.splats = kept;
    map.remap_neighbors(&old_to_new, new_len);
    PassOutcome {
        report: GrowthReport { pruned: removed, total: new_len, ..Default::default() },
        origins,
    }
}
