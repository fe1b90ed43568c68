//! Differentiable tile-based CPU rasterizer.
//!
//! Forward: project every splat to the image plane, sort contributors
//! globally by depth (ties by id), and alpha-blend front to back per pixel.
//! Tiles only cull contributors; the blend order and arithmetic are identical
//! to a per-pixel brute-force blender, bit for bit.
//!
//! Backward: exact analytic gradients of `sum(upstream ⊙ image)` with respect
//! to every splat parameter. Contributions are recomputed per pixel (no
//! persistent per-pixel lists); the suffix-color recurrence avoids dividing
//! by `1 - alpha`.

use crate::error::{Error, Result};
use crate::image::{Field, ImageRgb};
use crate::math::{quat_to_matrix_with_grad, sh_basis_with_grad, sigmoid};
use crate::model::{CameraView, GaussianMap, GaussianSplat, SplatKind};
use crate::scalar::Real;
use nalgebra::{Matrix2, Matrix2x3, Matrix3, Vector2, Vector3, Vector4};

#[derive(Clone, Copy, Debug)]
pub struct RenderSettings<T: Real> {
    /// Splats with camera-space depth at or below this are culled.
    pub near_plane: T,
    /// Frustum cull margin: 1.3 keeps means within 1.3x the image extent.
    pub frustum_margin: T,
    /// Added to both diagonal entries of the 2D covariance (px^2).
    pub dilation: T,
    /// Contributors with effective alpha below this are skipped.
    pub alpha_cutoff: T,
    /// Blending stops once transmittance falls below this.
    pub transmittance_floor: T,
    pub tile_size: usize,
    pub background: Vector3<T>,
}

impl<T: Real> Default for RenderSettings<T> {
    fn default() -> Self {
        Self {
            near_plane: T::c(0.01),
            frustum_margin: T::c(1.3),
            dilation: T::c(0.3),
            alpha_cutoff: T::c(1.0 / 255.0),
            transmittance_floor: T::c(1e-4),
            tile_size: 16,
            background: Vector3::zeros(),
        }
    }
}

impl<T: Real> RenderSettings<T> {
    /// Settings with the discontinuous gates disabled, for derivative checks
    /// against finite differences.
    pub fn smooth() -> Self {
        Self { alpha_cutoff: T::zero(), transmittance_floor: T::zero(), ..Self::default() }
    }
}

/// A splat after projection to the image plane.
#[derive(Clone, Debug)]
pub struct ProjectedSplat<T: Real> {
    pub mean2d: Vector2<T>,
    /// Dilated 2x2 covariance in px^2.
    pub cov2d: Matrix2<T>,
    /// Camera-space z, the sort key.
    pub depth: T,
    /// SH color at the camera-to-splat direction.
    pub color: Vector3<T>,
    /// Activated opacity.
    pub alpha: T,
    pub source_id: usize,
}

/// Perspective Jacobian at a camera-space point (2x3).
fn projection_jacobian<T: Real>(cam: &CameraView<T>, p: &Vector3<T>) -> Matrix2x3<T> {
    let (fx, fy) = (cam.intrinsics.fx, cam.intrinsics.fy);
    let z = p[2];
    let z2 = z * z;
    Matrix2x3::new(fx / z, T::zero(), -fx * p[0] / z2, T::zero(), fy / z, -fy * p[1] / z2)
}

/// Projects one splat; `None` means culled (behind the near plane or outside
/// the frustum margin).
pub fn project<T: Real>(
    splat: &GaussianSplat<T>,
    camera: &CameraView<T>,
    settings: &RenderSettings<T>,
    source_id: usize,
) -> Option<ProjectedSplat<T>> {
    let mean_cam = camera.pose_cw.transform(&splat.position);
    let z = mean_cam[2];
    if z <= settings.near_plane {
        return None;
    }
    let intr = &camera.intrinsics;
    let mean2d = Vector2::new(
        intr.fx * mean_cam[0] / z + intr.cx,
        intr.fy * mean_cam[1] / z + intr.cy,
    );
    let (w, h) = (T::from_count(intr.width), T::from_count(intr.height));
    let extra = (settings.frustum_margin - T::one()) / T::c(2.0);
    if mean2d[0] < -extra * w
        || mean2d[0] > (T::one() + extra) * w
        || mean2d[1] < -extra * h
        || mean2d[1] > (T::one() + extra) * h
    {
        return None;
    }

    let rot_w = camera.pose_cw.rotation;
    let cov_cam = rot_w * splat.covariance() * rot_w.transpose();
    let jac = projection_jacobian(camera, &mean_cam);
    let mut cov2d = jac * cov_cam * jac.transpose();
    cov2d[(0, 0)] += settings.dilation;
    cov2d[(1, 1)] += settings.dilation;

    let view_dir = (splat.position - camera.pose_cw.center()).normalize();
    let color = crate::model::eval_sh_color(&splat.sh_coeffs, &view_dir)
        .expect("map enforces a valid SH layout");

    Some(ProjectedSplat {
        mean2d,
        cov2d,
        depth: z,
        color,
        alpha: sigmoid(splat.opacity_logit),
        source_id,
    })
}

/// Projected splat with blending precomputations.
struct Prepared<T: Real> {
    mean2d: Vector2<T>,
    /// Inverse covariance entries [a, b; b, c].
    inv: (T, T, T),
    depth: T,
    color: Vector3<T>,
    alpha: T,
    source_id: usize,
    /// Conservative cull radius in pixels; outside it alpha_eff < cutoff.
    radius: T,
}

struct Frame<T: Real> {
    splats: Vec<Prepared<T>>,
    /// Per tile: indices into `splats`, in global depth order.
    tiles: Vec<Vec<u32>>,
    tiles_x: usize,
    tiles_y: usize,
    skipped_singular: usize,
}

fn prepare<T: Real>(
    map: &GaussianMap<T>,
    camera: &CameraView<T>,
    settings: &RenderSettings<T>,
) -> Frame<T> {
    let (w, h) = (camera.intrinsics.width, camera.intrinsics.height);
    let ts = settings.tile_size.max(1);
    let tiles_x = w.div_ceil(ts);
    let tiles_y = h.div_ceil(ts);

    let mut splats: Vec<Prepared<T>> = Vec::new();
    let mut skipped_singular = 0usize;
    for (i, splat) in map.splats.iter().enumerate() {
        let Some(p) = project(splat, camera, settings, i) else { continue };
        let (a, b, c) = (p.cov2d[(0, 0)], p.cov2d[(0, 1)], p.cov2d[(1, 1)]);
        let det = a * c - b * b;
        if !(det > T::zero()) || !det.is_finite_scalar() {
            skipped_singular += 1;
            continue;
        }
        let inv = (c / det, -b / det, a / det);
        let cutoff = settings.alpha_cutoff;
        let radius = if cutoff <= T::zero() {
            T::c(f64::INFINITY)
        } else if p.alpha < cutoff {
            // Never reaches the cutoff anywhere: drop.
            continue;
        } else {
            // alpha * exp(-q/2) < cutoff whenever q > 2 ln(alpha/cutoff), and
            // q >= |d|^2 / lambda_max bounds the falloff.
            let half = (a + c) / T::c(2.0);
            let lam_max = half + ((a - c) * (a - c) / T::c(4.0) + b * b).sqrt();
            (T::c(2.0) * (p.alpha / cutoff).ln() * lam_max * T::c(1.0 + 1e-9)).sqrt() + T::c(1e-9)
        };
        splats.push(Prepared {
            mean2d: p.mean2d,
            inv,
            depth: p.depth,
            color: p.color,
            alpha: p.alpha,
            source_id: i,
            radius,
        });
    }

    // Global depth order, ties by source id: blending is bit-reproducible.
    splats.sort_by(|x, y| {
        x.depth.partial_cmp(&y.depth).unwrap().then(x.source_id.cmp(&y.source_id))
    });

    let mut tiles = vec![Vec::new(); tiles_x * tiles_y];
    for (idx, p) in splats.iter().enumerate() {
        let (tx0, tx1, ty0, ty1) = if p.radius.as_f64().is_infinite() {
            (0, tiles_x.saturating_sub(1), 0, tiles_y.saturating_sub(1))
        } else {
            // Pixel centers live at +0.5; clamp the disc bbox to the grid.
            let x0 = (p.mean2d[0] - p.radius).as_f64() - 0.5;
            let x1 = (p.mean2d[0] + p.radius).as_f64() - 0.5;
            let y0 = (p.mean2d[1] - p.radius).as_f64() - 0.5;
            let y1 = (p.mean2d[1] + p.radius).as_f64() - 0.5;
            if x1 < 0.0 || y1 < 0.0 || x0 > (w - 1) as f64 || y0 > (h - 1) as f64 {
                continue;
            }
            let px0 = x0.max(0.0) as usize;
            let px1 = (x1.ceil().max(0.0) as usize).min(w - 1);
            let py0 = y0.max(0.0) as usize;
            let py1 = (y1.ceil().max(0.0) as usize).min(h - 1);
            (px0 / ts, px1 / ts, py0 / ts, py1 / ts)
        };
        for ty in ty0..=ty1 {
            for tx in tx0..=tx1 {
                tiles[ty * tiles_x + tx].push(idx as u32);
            }
        }
    }

    Frame { splats, tiles, tiles_x, tiles_y, skipped_singular }
}

#[derive(Clone, Debug)]
pub struct RenderOutput<T: Real> {
    pub image: ImageRgb<T>,
    /// Residual transmittance per pixel; 1 means background only.
    pub transmittance: Field<T>,
    /// Accepted contributors per pixel.
    pub contributor_counts: Field<u32>,
    /// Splats dropped for a singular 2D covariance.
    pub skipped_singular: usize,
}

/// Forward render. An empty map yields the background and transmittance 1.
pub fn render<T: Real>(
    map: &GaussianMap<T>,
    camera: &CameraView<T>,
    settings: &RenderSettings<T>,
) -> RenderOutput<T> {
    let (w, h) = (camera.intrinsics.width, camera.intrinsics.height);
    let frame = prepare(map, camera, settings);
    let mut image = ImageRgb::zeros(w, h);
    let mut transmittance = Field::filled(w, h, T::one());
    let mut counts = Field::filled(w, h, 0u32);
    let ts = settings.tile_size.max(1);

    for ty in 0..frame.tiles_y {
        for tx in 0..frame.tiles_x {
            let list = &frame.tiles[ty * frame.tiles_x + tx];
            let x_end = ((tx + 1) * ts).min(w);
            let y_end = ((ty + 1) * ts).min(h);
            for py in ty * ts..y_end {
                for px in tx * ts..x_end {
                    let cx = T::from_count(px) + T::c(0.5);
                    let cy = T::from_count(py) + T::c(0.5);
                    let mut color = Vector3::zeros();
                    let mut trans = T::one();
                    let mut count = 0u32;
                    for &idx in list.iter() {
                        let p = &frame.splats[idx as usize];
                        let dx = cx - p.mean2d[0];
                        let dy = cy - p.mean2d[1];
                        let (ia, ib, ic) = p.inv;
                        let q = dx * (ia * dx + ib * dy) + dy * (ib * dx + ic * dy);
                        let g = (-q / T::c(2.0)).exp();
                        let alpha_eff = p.alpha * g;
                        if alpha_eff < settings.alpha_cutoff {
                            continue;
                        }
                        color += p.color * (alpha_eff * trans);
                        trans *= T::one() - alpha_eff;
                        count += 1;
                        if trans < settings.transmittance_floor {
                            break;
                        }
                    }
                    color += settings.background * trans;
                    image.set(px, py, color);
                    transmittance.set(px, py, trans);
                    counts.set(px, py, count);
                }
            }
        }
    }

    RenderOutput {
        image,
        transmittance,
        contributor_counts: counts,
        skipped_singular: frame.skipped_singular,
    }
}

/// Per-splat parameter gradients from one backward pass.
#[derive(Clone, Debug)]
pub struct MapGradients<T: Real> {
    pub position: Vec<Vector3<T>>,
    pub log_scales: Vec<Vector3<T>>,
    pub rotation: Vec<Vector4<T>>,
    pub sh: Vec<Vec<Vector3<T>>>,
    pub opacity_logit: Vec<T>,
    /// Norm of the 3D positional gradient, the densifier's growth signal.
    pub position_norm: Vec<T>,
    /// True when the splat was projected (not culled) in this view.
    pub visible: Vec<bool>,
}

impl<T: Real> MapGradients<T> {
    pub fn zeros(map: &GaussianMap<T>) -> Self {
        let n = map.len();
        let coeffs = crate::math::sh_coeff_count(map.sh_degree());
        Self {
            position: vec![Vector3::zeros(); n],
            log_scales: vec![Vector3::zeros(); n],
            rotation: vec![Vector4::zeros(); n],
            sh: vec![vec![Vector3::zeros(); coeffs]; n],
            opacity_logit: vec![T::zero(); n],
            position_norm: vec![T::zero(); n],
            visible: vec![false; n],
        }
    }

    pub fn len(&self) -> usize {
        self.position.len()
    }

    pub fn is_empty(&self) -> bool {
        self.position.is_empty()
    }

    pub fn all_finite(&self) -> bool {
        let v3 = |v: &Vector3<T>| v.iter().all(|x| x.is_finite_scalar());
        self.position.iter().all(v3)
            && self.log_scales.iter().all(v3)
            && self.rotation.iter().all(|v| v.iter().all(|x| x.is_finite_scalar()))
            && self.sh.iter().all(|rows| rows.iter().all(v3))
            && self.opacity_logit.iter().all(|x| x.is_finite_scalar())
    }

    /// Scales every gradient slot by a constant (loss weighting).
    pub fn scale(&mut self, factor: T) {
        for v in &mut self.position {
            *v *= factor;
        }
        for v in &mut self.log_scales {
            *v *= factor;
        }
        for v in &mut self.rotation {
            *v *= factor;
        }
        for rows in &mut self.sh {
            for v in rows {
                *v *= factor;
            }
        }
        for v in &mut self.opacity_logit {
            *v *= factor;
        }
        for v in &mut self.position_norm {
            *v *= factor;
        }
    }
}

/// Analytic gradients of `sum(upstream ⊙ rendered_image)`.
pub fn render_backward<T: Real>(
    map: &GaussianMap<T>,
    camera: &CameraView<T>,
    upstream: &ImageRgb<T>,
    settings: &RenderSettings<T>,
) -> Result<MapGradients<T>> {
    let (w, h) = (camera.intrinsics.width, camera.intrinsics.height);
    if upstream.width() != w || upstream.height() != h {
        return Err(Error::InvalidInput(format!(
            "upstream gradient is {}x{}, camera expects {}x{}",
            upstream.width(),
            upstream.height(),
            w,
            h
        )));
    }
    let frame = prepare(map, camera, settings);
    let mut grads = MapGradients::zeros(map);
    for p in &frame.splats {
        grads.visible[p.source_id] = true;
    }

    // Image-plane accumulators per prepared splat.
    let n = frame.splats.len();
    let mut d_mean2d = vec![Vector2::<T>::zeros(); n];
    let mut d_minv = vec![Matrix2::<T>::zeros(); n];
    let mut d_color = vec![Vector3::<T>::zeros(); n];
    let mut d_alpha = vec![T::zero(); n];

    let ts = settings.tile_size.max(1);
    let mut scratch: Vec<(u32, T, T, T)> = Vec::new(); // (idx, alpha_eff, g, t_before)
    for ty in 0..frame.tiles_y {
        for tx in 0..frame.tiles_x {
            let list = &frame.tiles[ty * frame.tiles_x + tx];
            if list.is_empty() {
                continue;
            }
            let x_end = ((tx + 1) * ts).min(w);
            let y_end = ((ty + 1) * ts).min(h);
            for py in ty * ts..y_end {
                for px in tx * ts..x_end {
                    let u = upstream.get(px, py);
                    if u == Vector3::zeros() {
                        continue;
                    }
                    let cx = T::from_count(px) + T::c(0.5);
                    let cy = T::from_count(py) + T::c(0.5);
                    // Forward replay with the exact gating of `render`.
                    scratch.clear();
                    let mut trans = T::one();
                    for &idx in list.iter() {
                        let p = &frame.splats[idx as usize];
                        let dx = cx - p.mean2d[0];
                        let dy = cy - p.mean2d[1];
                        let (ia, ib, ic) = p.inv;
                        let q = dx * (ia * dx + ib * dy) + dy * (ib * dx + ic * dy);
                        let g = (-q / T::c(2.0)).exp();
                        let alpha_eff = p.alpha * g;
                        if alpha_eff < settings.alpha_cutoff {
                            continue;
                        }
                        scratch.push((idx, alpha_eff, g, trans));
                        trans *= T::one() - alpha_eff;
                        if trans < settings.transmittance_floor {
                            break;
                        }
                    }
                    // Reverse sweep; the suffix color starts at the background
                    // (a virtual final contributor with alpha 1).
                    let mut suffix = settings.background;
                    for &(idx, alpha_eff, g, t_before) in scratch.iter().rev() {
                        let p = &frame.splats[idx as usize];
                        let i = idx as usize;
                        let diff = p.color - suffix;
                        let d_aeff = t_before * u.dot(&diff);
                        d_color[i] += u * (t_before * alpha_eff);
                        d_alpha[i] += d_aeff * g;
                        let dq = d_aeff * p.alpha * (-g / T::c(2.0));
                        let dx = cx - p.mean2d[0];
                        let dy = cy - p.mean2d[1];
                        let (ia, ib, ic) = p.inv;
                        let mdx = ia * dx + ib * dy;
                        let mdy = ib * dx + ic * dy;
                        // q = d^T M d with d = pixel - mean.
                        d_mean2d[i] +=
                            Vector2::new(-(dq * T::c(2.0) * mdx), -(dq * T::c(2.0) * mdy));
                        d_minv[i] += Matrix2::new(dx * dx, dx * dy, dy * dx, dy * dy) * dq;
                        suffix = p.color * alpha_eff + suffix * (T::one() - alpha_eff);
                    }
                }
            }
        }
    }

    // Chain from image-plane quantities to splat parameters.
    for (i, p) in frame.splats.iter().enumerate() {
        backprop_splat(map, camera, p, &d_mean2d[i], &d_minv[i], &d_color[i], d_alpha[i], &mut grads);
    }
    for i in 0..grads.len() {
        grads.position_norm[i] = grads.position[i].norm();
    }
    Ok(grads)
}

#[allow(clippy::too_many_arguments)]
fn backprop_splat<T: Real>(
    map: &GaussianMap<T>,
    camera: &CameraView<T>,
    p: &Prepared<T>,
    d_mean2d: &Vector2<T>,
    d_minv: &Matrix2<T>,
    d_color_in: &Vector3<T>,
    d_alpha: T,
    grads: &mut MapGradients<T>,
) {
    let splat = &map.splats[p.source_id];
    let id = p.source_id;
    let intr = &camera.intrinsics;
    let rot_cw = camera.pose_cw.rotation;

    // Recompute forward intermediates.
    let mean_cam = camera.pose_cw.transform(&splat.position);
    let (x, y, z) = (mean_cam[0], mean_cam[1], mean_cam[2]);
    let (rot, d_rot) = quat_to_matrix_with_grad(&splat.rotation);
    let scales = splat.scales();
    let diag = Matrix3::from_diagonal(&scales.component_mul(&scales));
    let cov_w = rot * diag * rot.transpose();
    let cov_cam = rot_cw * cov_w * rot_cw.transpose();
    let jac = projection_jacobian(camera, &mean_cam);

    // M = (Sigma_I)^-1: dL/dSigma = -M G M.
    let minv = Matrix2::new(p.inv.0, p.inv.1, p.inv.1, p.inv.2);
    let d_sigma_i = -(minv * d_minv * minv);

    // Sigma_I = J Sigma_cam J^T (+ constant dilation).
    let d_sigma_cam = jac.transpose() * d_sigma_i * jac;
    let d_jac = (d_sigma_i + d_sigma_i.transpose()) * jac * cov_cam;

    // Sigma_cam = W Sigma_w W^T.
    let d_sigma_w = rot_cw.transpose() * d_sigma_cam * rot_cw;

    // Sigma_w = R D R^T.
    let d_r = (d_sigma_w + d_sigma_w.transpose()) * rot * diag;
    let mut d_quat = Vector4::zeros();
    for k in 0..4 {
        d_quat[k] = d_r.component_mul(&d_rot[k]).sum();
    }
    let d_diag = rot.transpose() * d_sigma_w * rot;
    let mut d_log_scales = Vector3::new(
        d_diag[(0, 0)] * T::c(2.0) * diag[(0, 0)],
        d_diag[(1, 1)] * T::c(2.0) * diag[(1, 1)],
        d_diag[(2, 2)] * T::c(2.0) * diag[(2, 2)],
    );
    if splat.kind == SplatKind::Thin {
        // Forward uses the frozen thickness; the stored log-scale is unused.
        d_log_scales[2] = T::zero();
    }

    // mean2d = (fx x / z + cx, fy y / z + cy).
    let mut d_mean_cam = Vector3::new(
        d_mean2d[0] * intr.fx / z,
        d_mean2d[1] * intr.fy / z,
        -(d_mean2d[0] * intr.fx * x + d_mean2d[1] * intr.fy * y) / (z * z),
    );
    // J depends on mean_cam as well.
    let z2 = z * z;
    let z3 = z2 * z;
    d_mean_cam[0] += d_jac[(0, 2)] * (-intr.fx / z2);
    d_mean_cam[1] += d_jac[(1, 2)] * (-intr.fy / z2);
    d_mean_cam[2] += d_jac[(0, 0)] * (-intr.fx / z2)
        + d_jac[(1, 1)] * (-intr.fy / z2)
        + d_jac[(0, 2)] * (T::c(2.0) * intr.fx * x / z3)
        + d_jac[(1, 2)] * (T::c(2.0) * intr.fy * y / z3);

    let mut d_position = rot_cw.transpose() * d_mean_cam;

    // Color chain: c = max(0, sum C_k basis_k + 0.5); direction from position.
    let cam_center = camera.pose_cw.center();
    let v = splat.position - cam_center;
    let v_norm = v.norm();
    let dir = v / v_norm;
    let degree = map.sh_degree();
    let mut basis = [T::zero(); 16];
    let mut basis_grad = [Vector3::zeros(); 16];
    sh_basis_with_grad(degree, &dir, &mut basis, &mut basis_grad);
    let mut pre = Vector3::from_element(T::c(0.5));
    for (coeff, b) in splat.sh_coeffs.iter().zip(basis.iter()) {
        pre += coeff * *b;
    }
    let gated = Vector3::new(
        if pre[0] > T::zero() { d_color_in[0] } else { T::zero() },
        if pre[1] > T::zero() { d_color_in[1] } else { T::zero() },
        if pre[2] > T::zero() { d_color_in[2] } else { T::zero() },
    );
    let mut d_dir = Vector3::zeros();
    for (k, coeff) in splat.sh_coeffs.iter().enumerate() {
        grads.sh[id][k] += gated * basis[k];
        d_dir += basis_grad[k] * gated.dot(coeff);
    }
    // dir = v / |v|: tangent projector over the norm.
    d_position += (d_dir - dir * dir.dot(&d_dir)) / v_norm;

    // Opacity: alpha = sigmoid(logit).
    let d_logit = d_alpha * p.alpha * (T::one() - p.alpha);

    grads.position[id] += d_position;
    grads.log_scales[id] += d_log_scales;
    grads.rotation[id] += d_quat;
    grads.opacity_logit[id] += d_logit;
}

/// True when the projected 2-sigma footprint covers at least one pixel center.
pub fn footprint_covers_pixel_center<T: Real>(
    proj: &ProjectedSplat<T>,
    width: usize,
    height: usize,
) -> bool {
    let (a, b, c) = (proj.cov2d[(0, 0)], proj.cov2d[(0, 1)], proj.cov2d[(1, 1)]);
    let det = a * c - b * b;
    if !(det > T::zero()) || !det.is_finite_scalar() {
        return false;
    }
    let (ia, ib, ic) = (c / det, -b / det, a / det);
    let half = (a + c) / T::c(2.0);
    let lam_max = half + ((a - c) * (a - c) / T::c(4.0) + b * b).sqrt();
    let r = (T::c(2.0) * lam_max.sqrt()).as_f64();
    let mx = proj.mean2d[0].as_f64();
    let my = proj.mean2d[1].as_f64();
    if mx + r < 0.5 || my + r < 0.5 || mx - r > width as f64 - 0.5 || my - r > height as f64 - 0.5
    {
        return false;
    }
    let x0 = ((mx - r - 0.5).floor().max(0.0)) as usize;
    let x1 = (((mx + r - 0.5).ceil()).max(0.0) as usize).min(width.saturating_sub(1));
    let y0 = ((my - r - 0.5).floor().max(0.0)) as usize;
    let y1 = (((my + r - 0.5).ceil()).max(0.0) as usize).min(height.saturating_sub(1));
    for py in y0..=y1 {
        for px in x0..=x1 {
            let dx = T::from_count(px) + T::c(0.5) - proj.mean2d[0];
            let dy = T::from_count(py) + T::c(0.5) - proj.mean2d[1];
            let q = dx * (ia * dx + ib * dy) + dy * (ib * dx + ic * dy);
            if q <= T::c(4.0) {
                return true;
            }
        }
    }
    false
}
