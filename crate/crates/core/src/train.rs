//! The training loop: renders one view per iteration, combines photometric
//! and geometric gradients, steps Adam, and runs the densify/prune and
//! neighbor-refresh schedules.

use crate::densify::{densify_pass, prune, GrowthReport, GrowthStats};
use crate::error::{Error, Result};
use crate::loss::{geometric_loss, photometric_loss, refresh_neighbors, select_view_thin};
use crate::model::{CameraView, GaussianMap};
use crate::optim::{optimizer_step, AdamParams, AdamState, SlotOrigin};
use crate::raster::{render, render_backward, RenderSettings};
use crate::scalar::Real;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::io::Write;
use std::path::PathBuf;

/// Every hyperparameter and schedule constant of a training run.
#[derive(Clone, Copy, Debug)]
pub struct TrainConfig<T: Real> {
    /// Position learning rate (the other groups have their own).
    pub learning_rate: T,
    pub lr_log_scales: T,
    pub lr_rotation: T,
    pub lr_sh: T,
    pub lr_opacity: T,
    /// Photometric weight (lambda_1).
    pub lambda_pho: T,
    /// Geometric weight (lambda_2).
    pub lambda_geo: T,
    pub total_iters: usize,
    /// Photometric-only iterations at the start.
    pub warmup_iters: usize,
    pub densify_until: usize,
    pub densify_interval: usize,
    pub knn_refresh_early: usize,
    pub knn_refresh_late: usize,
    pub knn_refresh_switch: usize,
    pub opacity_floor: T,
    pub neighbors_m: usize,
    pub neighbor_angle_filter: T,
    /// Mean per-view positional gradient that triggers densification.
    pub grad_threshold: T,
    /// Size threshold as a fraction of the scene extent.
    pub percent_dense: T,
    pub checkpoint_interval: usize,
    /// Optional D-SSIM mix into the photometric objective (0 = plain L1).
    pub dssim_weight: T,
    pub seed: u64,
}

impl<T: Real> Default for TrainConfig<T> {
    fn default() -> Self {
        Self {
            learning_rate: T::c(0.0002),
            lr_log_scales: T::c(0.005),
            lr_rotation: T::c(0.001),
            lr_sh: T::c(0.0025),
            lr_opacity: T::c(0.05),
            lambda_pho: T::c(0.8),
            lambda_geo: T::c(0.3),
            total_iters: 30_000,
            warmup_iters: 2_000,
            densify_until: 10_000,
            densify_interval: 10,
            knn_refresh_early: 100,
            knn_refresh_late: 1_000,
            knn_refresh_switch: 20_000,
            opacity_floor: T::c(0.05),
            neighbors_m: 8,
            neighbor_angle_filter: T::c(30.0_f64.to_radians()),
            grad_threshold: T::c(0.0002),
            percent_dense: T::c(0.01),
            checkpoint_interval: 5_000,
            dssim_weight: T::zero(),
            seed: 0,
        }
    }
}

impl<T: Real> TrainConfig<T> {
    /// Schedule ordering and weight sanity. `total_iters` is not checked
    /// against the switch point so that short and zero-iteration runs stay
    /// valid.
    pub fn validate(&self) -> Result<()> {
        if !(self.warmup_iters < self.densify_until
            && self.densify_until < self.knn_refresh_switch)
        {
            return Err(Error::Config(
                "schedule must satisfy warmup < densify_until < knn_refresh_switch".into(),
            ));
        }
        for (name, v) in [
            ("lambda_pho", self.lambda_pho),
            ("lambda_geo", self.lambda_geo),
            ("learning_rate", self.learning_rate),
            ("dssim_weight", self.dssim_weight),
        ] {
            if v < T::zero() {
                return Err(Error::Config(format!("{name} must be non-negative")));
            }
        }
        if self.densify_interval == 0 || self.knn_refresh_early == 0 || self.knn_refresh_late == 0
        {
            return Err(Error::Config("schedule intervals must be positive".into()));
        }
        Ok(())
    }

    pub fn adam_params(&self) -> AdamParams<T> {
        AdamParams {
            lr_position: self.learning_rate,
            lr_log_scales: self.lr_log_scales,
            lr_rotation: self.lr_rotation,
            lr_sh: self.lr_sh,
            lr_opacity: self.lr_opacity,
            ..AdamParams::default()
        }
    }
}

/// One row of the metrics log.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IterationRecord {
    pub iter: usize,
    pub pho_loss: f64,
    pub geo_loss: f64,
    pub total_loss: f64,
    pub n_splats: usize,
}

impl IterationRecord {
    pub const CSV_HEADER: &'static str = "iter,pho_loss,geo_loss,total_loss,n_splats";

    pub fn to_csv_line(&self) -> String {
        format!(
            "{},{},{},{},{}",
            self.iter, self.pho_loss, self.geo_loss, self.total_loss, self.n_splats
        )
    }
}

/// Per-iteration observer payload (schedule instrumentation).
pub struct IterationTrace<'a> {
    pub iter: usize,
    /// Norm of the geometric gradient as applied (zero before warmup).
    pub geo_grad_norm: f64,
    pub densify_report: Option<&'a GrowthReport>,
    pub refreshed: bool,
    pub n_splats: usize,
}

/// Output sinks and hooks for a run.
#[derive(Default)]
pub struct TrainOptions<'a> {
    /// Directory for periodic checkpoints (every `checkpoint_interval` and at
    /// exit; also on abort).
    pub checkpoint_dir: Option<PathBuf>,
    /// Growth-report lines, one per densify pass.
    pub diagnostics: Option<&'a mut dyn Write>,
    /// Called once per iteration after all scheduled work.
    pub trace: Option<&'a mut dyn FnMut(&IterationTrace<'_>)>,
}

fn scene_extent<T: Real>(map: &GaussianMap<T>) -> T {
    if map.is_empty() {
        return T::one();
    }
    let mut lo = map.splats[0].position;
    let mut hi = lo;
    for s in &map.splats {
        for axis in 0..3 {
            lo[axis] = lo[axis].min(s.position[axis]);
            hi[axis] = hi[axis].max(s.position[axis]);
        }
    }
    let d = (hi - lo).norm();
    if d > T::zero() {
        d
    } else {
        T::one()
    }
}

fn write_checkpoint<T: Real>(map: &GaussianMap<T>, dir: &PathBuf, tag: &str) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    crate::io::ply::write_ply(map, dir.join(format!("checkpoint_{tag}.ply")))
}

/// Trains the map in place and returns the per-iteration metrics log.
pub fn train<T: Real>(
    map: &mut GaussianMap<T>,
    cameras: &[CameraView<T>],
    cfg: &TrainConfig<T>,
    opts: &mut TrainOptions<'_>,
) -> Result<Vec<IterationRecord>> {
    cfg.validate()?;
    if cameras.is_empty() {
        return Err(Error::InvalidInput("train: need at least one camera".into()));
    }
    for (i, cam) in cameras.iter().enumerate() {
        if cam.reference.is_none() {
            return Err(Error::InvalidInput(format!("train: camera {i} has no reference image")));
        }
    }
    let settings = RenderSettings::<T>::default();
    let adam = cfg.adam_params();
    let mut state = AdamState::new(map);
    let mut stats = GrowthStats::new(map.len());
    let size_threshold = cfg.percent_dense * scene_extent(map);
    let mut records = Vec::with_capacity(cfg.total_iters);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = Vec::new();

    let mut run = |map: &mut GaussianMap<T>,
                   state: &mut AdamState<T>,
                   stats: &mut GrowthStats<T>,
                   records: &mut Vec<IterationRecord>,
                   opts: &mut TrainOptions<'_>|
     -> Result<()> {
        for iter in 0..cfg.total_iters {
            // Neighbor refresh cadence: early before the switch, late after.
            let cadence = if iter < cfg.knn_refresh_switch {
                cfg.knn_refresh_early
            } else {
                cfg.knn_refresh_late
            };
            let refreshed = iter % cadence == 0;
            if refreshed {
                refresh_neighbors(map, cfg.neighbors_m, cfg.neighbor_angle_filter);
            }

            // Seeded per-epoch camera shuffle.
            if order.is_empty() {
                order = (0..cameras.len()).collect();
                order.shuffle(&mut rng);
            }
            let camera = &cameras[order.pop().expect("refilled above")];
            let reference = camera.reference.as_ref().expect("validated above");

            let rendered = render(map, camera, &settings);
            let (l1, l1_grad) = photometric_loss(&rendered.image, reference)?;
            let w_dssim = cfg.dssim_weight;
            let (pho, mut upstream) = if w_dssim > T::zero() {
                let (s, s_grad) = crate::metrics::ssim_with_grad(&rendered.image, reference)?;
                let pho = (T::one() - w_dssim) * l1
                    + w_dssim * (T::one() - s) / T::c(2.0);
                let mut up = l1_grad;
                for (u, g) in up.pixels_mut().iter_mut().zip(s_grad.pixels().iter()) {
                    *u = *u * (T::one() - w_dssim) - *g * (w_dssim / T::c(2.0));
                }
                (pho, up)
            } else {
                (l1, l1_grad)
            };
            for u in upstream.pixels_mut() {
                *u *= cfg.lambda_pho;
            }
            let mut grads = render_backward(map, camera, &upstream, &settings)?;

            // Geometric term: skipped entirely during warmup.
            let mut geo = T::zero();
            let mut geo_grad_norm = T::zero();
            if iter >= cfg.warmup_iters && cfg.lambda_geo > T::zero() {
                let view_set = select_view_thin(map, camera, &settings);
                let (value, geo_grads) = geometric_loss(map, &view_set);
                geo = value;
                if !geo_grads.all_finite() {
                    log::warn!("iteration {iter}: non-finite geometric gradient, step skipped");
                    records.push(IterationRecord {
                        iter,
                        pho_loss: pho.as_f64(),
                        geo_loss: geo.as_f64(),
                        total_loss: f64::NAN,
                        n_splats: map.len(),
                    });
                    continue;
                }
                for i in 0..map.len() {
                    let gp = geo_grads.position[i] * cfg.lambda_geo;
                    let gr = geo_grads.rotation[i] * cfg.lambda_geo;
                    grads.position[i] += gp;
                    grads.rotation[i] += gr;
                    geo_grad_norm += gp.norm() + gr.norm();
                }
                // Growth signal tracks the total positional gradient.
                for i in 0..map.len() {
                    grads.position_norm[i] = grads.position[i].norm();
                }
            }
            let total = crate::loss::combined_loss(pho, geo, cfg, iter);

            stats.accumulate(&grads);
            match optimizer_step(map, &grads, state, &adam, iter) {
                Ok(()) => {}
                Err(Error::NonFiniteGradient { .. }) => {
                    log::warn!("iteration {iter}: non-finite gradient, step skipped");
                }
                Err(other) => return Err(other),
            }

            // Densify + prune cadence.
            let mut pass_report: Option<GrowthReport> = None;
            if iter < cfg.densify_until && (iter + 1) % cfg.densify_interval == 0 {
                if log::log_enabled!(log::Level::Debug) {
                    let mut means: Vec<f64> = (0..map.len())
                        .filter(|&i| stats.accum_count[i] > 0)
                        .map(|i| {
                            (stats.accum_grad[i] / T::from_count(stats.accum_count[i] as usize))
                                .as_f64()
                        })
                        .collect();
                    means.sort_by(f64::total_cmp);
                    if !means.is_empty() {
                        log::debug!(
                            "iter {iter}: mean-grad quantiles p10={:.3e} p50={:.3e} p90={:.3e} p99={:.3e}",
                            means[means.len() / 10],
                            means[means.len() / 2],
                            means[means.len() * 9 / 10],
                            means[(means.len() * 99 / 100).min(means.len() - 1)]
                        );
                    }
                }
                let outcome = densify_pass(
                    map,
                    stats,
                    cfg.grad_threshold,
                    size_threshold,
                    cfg.learning_rate,
                    cfg.seed ^ (iter as u64),
                )?;
                let prune_outcome = prune(map, cfg.opacity_floor);
                // Compose slot origins across the two structural passes.
                let origins: Vec<SlotOrigin> = prune_outcome
                    .origins
                    .iter()
                    .map(|o| match o {
                        SlotOrigin::Carried(j) => outcome.origins[*j],
                        other => *other,
                    })
                    .collect();
                state.remap(&origins);
                stats.remap(&origins);
                let mut report = outcome.report;
                report.iter = iter;
                report.pruned = prune_outcome.report.pruned;
                report.total = map.len();
                if let Some(diag) = opts.diagnostics.as_mut() {
                    writeln!(diag, "{report}")?;
                }
                pass_report = Some(report);
            }

            if cfg.checkpoint_interval > 0
                && (iter + 1) % cfg.checkpoint_interval == 0
                && !map.is_empty()
            {
                if let Some(dir) = &opts.checkpoint_dir {
                    write_checkpoint(map, dir, &format!("{:06}", iter + 1))?;
                }
            }

            records.push(IterationRecord {
                iter,
                pho_loss: pho.as_f64(),
                geo_loss: geo.as_f64(),
                total_loss: total.as_f64(),
                n_splats: map.len(),
            });
            if let Some(trace) = opts.trace.as_mut() {
                trace(&IterationTrace {
                    iter,
                    geo_grad_norm: geo_grad_norm.as_f64(),
                    densify_report: pass_report.as_ref(),
                    refreshed,
                    n_splats: map.len(),
                });
            }
        }
        Ok(())
    };

    match run(map, &mut state, &mut stats, &mut records, opts) {
        Ok(()) => {
            if let Some(dir) = &opts.checkpoint_dir {
                if !map.is_empty() {
                    write_checkpoint(map, dir, "final")?;
                }
            }
            Ok(records)
        }
        Err(err) => {
            // Preserve progress before surfacing the failure.
            if let Some(dir) = &opts.checkpoint_dir {
                if !map.is_empty() {
                    let _ = write_checkpoint(map, dir, "abort");
                }
            }
            Err(err)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::init::{init_map, InitConfig};
    use crate::synth::{make_box_room, make_trajectory, sample_cloud, Texture, TrajectoryPattern};
    use nalgebra::Vector3;

    fn tiny_scene() -> (GaussianMap<f64>, Vec<CameraView<f64>>) {
        let mut scene =
            make_box_room(Vector3::from_element(1.0), Texture::Checker, 36, 17).unwrap();
        make_trajectory(&mut scene, 5, TrajectoryPattern::Orbit, (24, 24), &RenderSettings::default())
            .unwrap();
        let cloud = sample_cloud(&scene, 300, 0.002, 18);
        let positions: Vec<_> = cloud.iter().map(|p| p.position).collect();
        let colors: Vec<_> = cloud.iter().map(|p| p.color).collect();
        let normals = crate::geometry::estimate_normals(&positions, 10, None).unwrap();
        let classified = crate::geometry::classify_points(
            &positions,
            &colors,
            &normals,
            3.0,
            20.0_f64.to_radians(),
        )
        .unwrap();
        let map = init_map(&classified, &InitConfig::default()).unwrap();
        (map, scene.cameras)
    }

    fn small_cfg() -> TrainConfig<f64> {
        TrainConfig {
            total_iters: 60,
            warmup_iters: 20,
            densify_until: 40,
            densify_interval: 10,
            knn_refresh_early: 10,
            knn_refresh_late: 25,
            knn_refresh_switch: 50,
            checkpoint_interval: 0,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn zero_iterations_returns_map_unchanged() {
        let (mut map, cameras) = tiny_scene();
        let before = map.splats.clone();
        let cfg = TrainConfig { total_iters: 0, ..small_cfg() };
        let records = train(&mut map, &cameras, &cfg, &mut TrainOptions::default()).unwrap();
        assert!(records.is_empty());
        assert_eq!(map.splats, before);
    }

    #[test]
    fn config_validation_rejects_bad_schedule() {
        let cfg =
            TrainConfig::<f64> { warmup_iters: 50, densify_until: 40, ..TrainConfig::default() };
        assert!(cfg.validate().is_err());
        let cfg2 = TrainConfig::<f64> { lambda_geo: -1.0, ..TrainConfig::default() };
        assert!(cfg2.validate().is_err());
    }

    #[test]
    fn train_requires_reference_images() {
        let (mut map, mut cameras) = tiny_scene();
        cameras[0].reference = None;
        let cfg = small_cfg();
        assert!(train(&mut map, &cameras, &cfg, &mut TrainOptions::default()).is_err());
    }

    #[test]
    fn warmup_gates_geo_and_densify_respects_schedule() {
        let (mut map, cameras) = tiny_scene();
        let cfg = small_cfg();
        let mut geo_before_warmup = 0.0;
        let mut geo_after_warmup = 0.0;
        let mut densify_iters = Vec::new();
        let mut refresh_iters = Vec::new();
        let mut trace = |t: &IterationTrace<'_>| {
            if t.iter < cfg.warmup_iters {
                geo_before_warmup += t.geo_grad_norm;
            } else {
                geo_after_warmup += t.geo_grad_norm;
            }
            if t.densify_report.is_some() {
                densify_iters.push(t.iter);
            }
            if t.refreshed {
                refresh_iters.push(t.iter);
            }
        };
        let mut opts = TrainOptions { trace: Some(&mut trace), ..Default::default() };
        train(&mut map, &cameras, &cfg, &mut opts).unwrap();
        assert_eq!(geo_before_warmup, 0.0);
        assert!(geo_after_warmup > 0.0);
        assert_eq!(densify_iters, vec![9, 19, 29, 39]);
        assert_eq!(refresh_iters, vec![0, 10, 20, 30, 40, 50]);
    }

    #[test]
    fn training_reduces_photometric_loss() {
        let (mut map, cameras) = tiny_scene();
        let cfg = TrainConfig { total_iters: 80, ..small_cfg() };
        let records = train(&mut map, &cameras, &cfg, &mut TrainOptions::default()).unwrap();
        let first: f64 = records[..10].iter().map(|r| r.pho_loss).sum::<f64>() / 10.0;
        let last: f64 = records[70..].iter().map(|r| r.pho_loss).sum::<f64>() / 10.0;
        assert!(last < first, "photometric loss did not drop: {first} -> {last}");
    }

    #[test]
    fn training_is_seed_reproducible() {
        let (mut m1, cams) = tiny_scene();
        let (mut m2, _) = tiny_scene();
        let cfg = small_cfg();
        let r1 = train(&mut m1, &cams, &cfg, &mut TrainOptions::default()).unwrap();
        let r2 = train(&mut m2, &cams, &cfg, &mut TrainOptions::default()).unwrap();
        assert_eq!(r1.len(), r2.len());
        for (a, b) in r1.iter().zip(r2.iter()) {
            assert_eq!(a.pho_loss.to_bits(), b.pho_loss.to_bits());
            assert_eq!(a.n_splats, b.n_splats);
        }
        assert_eq!(m1.splats.len(), m2.splats.len());
        for (a, b) in m1.splats.iter().zip(m2.splats.iter()) {
            assert_eq!(a.position, b.position);
            assert_eq!(a.rotation, b.rotation);
        }
    }

    #[test]
    fn thin_thickness_survives_training() {
        let (mut map, cameras) = tiny_scene();
        let cfg = small_cfg();
        train(&mut map, &cameras, &cfg, &mut TrainOptions::default()).unwrap();
        for s in &map.splats {
            if s.kind == crate::model::SplatKind::Thin {
                assert_eq!(s.scales()[2], crate::model::THIN_THICKNESS);
            }
        }
    }
}
