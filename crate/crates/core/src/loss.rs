//! Photometric and geometric objectives plus the view-dependent bookkeeping
//! (thin-splat selection and neighbor-list maintenance) they rely on.

use crate::error::{Error, Result};
use crate::geometry::KnnIndex;
use crate::image::ImageRgb;
use crate::math::quat_to_matrix_with_grad;
use crate::model::{CameraView, GaussianMap, SplatKind};
use crate::raster::{footprint_covers_pixel_center, project, RenderSettings};
use crate::scalar::Real;
use crate::train::TrainConfig;
use nalgebra::{Vector3, Vector4};

/// Mean per-pixel L1 over all channels, with its gradient image:
/// `(1/(3HW)) * sum |c - c_ref|`, gradient `sign(c - c_ref) / (3HW)`.
pub fn photometric_loss<T: Real>(
    rendered: &ImageRgb<T>,
    reference: &ImageRgb<T>,
) -> Result<(T, ImageRgb<T>)> {
    if !rendered.same_dims(reference) {
        return Err(Error::InvalidInput(format!(
            "photometric_loss: {}x{} vs {}x{}",
            rendered.width(),
            rendered.height(),
            reference.width(),
            reference.height()
        )));
    }
    let denom = T::from_count(3 * rendered.width() * rendered.height());
    let mut total = T::zero();
    let mut grad = ImageRgb::zeros(rendered.width(), rendered.height());
    for (i, (c, r)) in rendered.pixels().iter().zip(reference.pixels().iter()).enumerate() {
        let mut g = Vector3::zeros();
        for ch in 0..3 {
            let d = c[ch] - r[ch];
            total += d.abs();
            g[ch] = if d > T::zero() {
                T::one()
            } else if d < T::zero() {
                -T::one()
            } else {
                T::zero()
            } / denom;
        }
        grad.pixels_mut()[i] = g;
    }
    Ok((total / denom, grad))
}

/// Thin splats measured by this view: frustum survivors whose projected
/// 2-sigma footprint covers at least one pixel center.
pub fn select_view_thin<T: Real>(
    map: &GaussianMap<T>,
    camera: &CameraView<T>,
    settings: &RenderSettings<T>,
) -> Vec<usize> {
    let (w, h) = (camera.intrinsics.width, camera.intrinsics.height);
    let mut out = Vec::new();
    for (i, splat) in map.splats.iter().enumerate() {
        if splat.kind != SplatKind::Thin {
            continue;
        }
        let Some(proj) = project(splat, camera, settings, i) else { continue };
        if footprint_covers_pixel_center(&proj, w, h) {
            out.push(i);
        }
    }
    out
}

/// Rebuilds each thin splat's neighbor list: the `m` nearest thin splats,
/// minus those whose normal disagrees by more than `angle_filter`.
pub fn refresh_neighbors<T: Real>(map: &mut GaussianMap<T>, m: usize, angle_filter: T) {
    let (thin_ids, thin_pos) = map.thin_positions();
    let mut lists = vec![Vec::new(); map.len()];
    if thin_ids.len() >= 2 {
        let index = KnnIndex::build(&thin_pos);
        let normals: Vec<Vector3<T>> = thin_ids
            .iter()
            .map(|&i| map.splats[i].rotation_matrix().column(2).into_owned())
            .collect();
        let cos_thresh = angle_filter.cos();
        let k = m.min(thin_ids.len() - 1);
        for (local, &global) in thin_ids.iter().enumerate() {
            let neigh = index
                .knn_excluding(&thin_pos[local], k, local)
                .expect("k bounded by population");
            let list: Vec<usize> = neigh
                .into_iter()
                .filter(|&(j, _)| normals[local].dot(&normals[j]) >= cos_thresh)
                .map(|(j, _)| thin_ids[j])
                .collect();
            lists[global] = list;
        }
    }
    map.neighbor_lists = lists;
    map.needs_neighbor_refresh = false;
}

/// Gradients of the geometric loss, dense over the map.
#[derive(Clone, Debug)]
pub struct GeoGradients<T: Real> {
    pub position: Vec<Vector3<T>>,
    pub rotation: Vec<Vector4<T>>,
}

impl<T: Real> GeoGradients<T> {
    fn zeros(n: usize) -> Self {
        Self { position: vec![Vector3::zeros(); n], rotation: vec![Vector4::zeros(); n] }
    }

    pub fn all_finite(&self) -> bool {
        self.position.iter().all(|v| v.iter().all(|x| x.is_finite_scalar()))
            && self.rotation.iter().all(|v| v.iter().all(|x| x.is_finite_scalar()))
    }
}

/// Co-planar smoothness over the view set.
///
/// Per splat `i` with `m >= 1` retained neighbors:
/// `E_plane = | n_i . mu_i - mean_j (n_j . mu_j) |` (origin-plane distances)
/// and `E_normal = mean_j |n_j - n_i|`; the loss averages `E_plane + E_normal`
/// over the whole view set. Gradients flow into the center and the neighbors.
pub fn geometric_loss<T: Real>(map: &GaussianMap<T>, view_set: &[usize]) -> (T, GeoGradients<T>) {
    let n = map.len();
    let mut grads = GeoGradients::zeros(n);
    if view_set.is_empty() {
        return (T::zero(), grads);
    }

    // Cache R3 and its quaternion jacobian for every participating splat.
    let mut r3: Vec<Option<(Vector3<T>, [Vector3<T>; 4])>> = vec![None; n];
    fn ensure<T: Real>(
        map: &GaussianMap<T>,
        idx: usize,
        cache: &mut [Option<(Vector3<T>, [Vector3<T>; 4])>],
    ) {
        if cache[idx].is_none() {
            let (rot, d_rot) = quat_to_matrix_with_grad(&map.splats[idx].rotation);
            let col: Vector3<T> = rot.column(2).into_owned();
            let d_col = [
                d_rot[0].column(2).into_owned(),
                d_rot[1].column(2).into_owned(),
                d_rot[2].column(2).into_owned(),
                d_rot[3].column(2).into_owned(),
            ];
            cache[idx] = Some((col, d_col));
        }
    }

    let inv_set = T::one() / T::from_count(view_set.len());
    let mut total = T::zero();
    // TEMP bisect
    let skip_plane = std::env::var("THINSPLAT_SKIP_PLANE").is_ok();
    let skip_normal = std::env::var("THINSPLAT_SKIP_NORMAL").is_ok();
    for &i in view_set {
        let neighbors = &map.neighbor_lists[i];
        if neighbors.is_empty() {
            continue;
        }
        let m = T::from_count(neighbors.len());
        ensure(map, i, &mut r3);
        for &j in neighbors {
            ensure(map, j, &mut r3);
        }
        let (n_i, dn_i) = r3[i].clone().unwrap();
        let mu_i = map.splats[i].position;

        // Plane term.
        let h_i = n_i.dot(&mu_i);
        let mut mean_h = T::zero();
        for &j in neighbors {
            let (n_j, _) = r3[j].as_ref().unwrap();
            mean_h += n_j.dot(&map.splats[j].position);
        }
        mean_h /= m;
        let diff = if skip_plane { T::zero() } else { h_i - mean_h };
        let e_plane = diff.abs();
        let sign = if diff > T::zero() {
            T::one()
        } else if diff < T::zero() {
            -T::one()
        } else {
            T::zero()
        };

        // d h_i / d mu_i = n_i; d h_i / d q_i = d n_i . mu_i.
        let w = sign * inv_set;
        grads.position[i] += n_i * w;
        for k in 0..4 {
            grads.rotation[i][k] += dn_i[k].dot(&mu_i) * w;
        }
        for &j in neighbors {
            let (n_j, dn_j) = r3[j].as_ref().unwrap();
            let mu_j = map.splats[j].position;
            let wj = -w / m;
            grads.position[j] += n_j * wj;
            for k in 0..4 {
                grads.rotation[j][k] += dn_j[k].dot(&mu_j) * wj;
            }
        }

        // Normal term: mean_j |n_j - n_i|.
        let mut e_normal = T::zero();
        for &j in neighbors.iter().filter(|_| !skip_normal) {
            let (n_j, dn_j) = r3[j].as_ref().unwrap();
            let d = n_j - n_i;
            let norm = d.norm();
            e_normal += norm;
            if norm > T::zero() {
                let u = d / norm;
                let wn = inv_set / m;
                for k in 0..4 {
                    grads.rotation[j][k] += dn_j[k].dot(&u) * wn;
                    grads.rotation[i][k] -= dn_i[k].dot(&u) * wn;
                }
            }
        }
        e_normal /= m;

        total += (e_plane + e_normal) * inv_set;
    }
    (total, grads)
}

/// Warmup gate of the combined objective: photometric-only before
/// `warmup_iters`, weighted sum afterwards.
pub fn combined_loss<T: Real>(pho: T, geo: T, cfg: &TrainConfig<T>, iter: usize) -> T {
    if iter < cfg.warmup_iters {
        cfg.lambda_pho * pho
    } else {
        cfg.lambda_pho * pho + cfg.lambda_geo * geo
    }
}
