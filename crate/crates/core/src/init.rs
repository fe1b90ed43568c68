//! Builds the initial splat map from a classified cloud: isotropic free
//! splats for individual points, surface-aligned thin splats for smooth ones.

use crate::error::{Error, Result};
use crate::geometry::{nearest_neighbor_distances, ClassifiedCloud, KnnIndex};
use crate::math::{matrix_to_quat, QUAT_IDENTITY};
use crate::model::{splat_at, GaussianMap, GaussianSplat, SplatKind, THIN_THICKNESS};
use crate::scalar::Real;
use nalgebra::{Matrix3, Vector3, Vector4};

#[derive(Clone, Copy, Debug)]
pub struct InitConfig<T: Real> {
    /// Initial activated opacity for every splat.
    pub opacity: T,
    /// SH degree of the map; only the DC band is set from point colors.
    pub sh_degree: usize,
    /// Fallback scale when a point has no neighbor (singleton cloud).
    pub singleton_scale: T,
}

impl<T: Real> Default for InitConfig<T> {
    fn default() -> Self {
        Self { opacity: T::c(0.1), sh_degree: 2, singleton_scale: T::c(0.01) }
    }
}

/// Deterministic right-handed tangent frame `{b1, b2, normal}`.
///
/// Picks the coordinate axis of smallest normal component, projects it onto
/// the tangent plane for `b1`, and completes with `b2 = n × b1`.
pub fn tangent_basis<T: Real>(normal: &Vector3<T>) -> Result<(Vector3<T>, Vector3<T>)> {
    let n = normal.norm();
    if n < T::c(1e-12) {
        return Err(Error::InvalidInput("tangent_basis: zero normal".into()));
    }
    if (n - T::one()).abs() > T::c(1e-9) {
        return Err(Error::InvalidInput("tangent_basis: normal must be unit length".into()));
    }
    let mut axis = 0;
    for i in 1..3 {
        if normal[i].abs() < normal[axis].abs() {
            axis = i;
        }
    }
    let mut e = Vector3::zeros();
    e[axis] = T::one();
    let mut b1 = e - normal * normal.dot(&e);
    b1 /= b1.norm();
    let b2 = normal.cross(&b1);
    Ok((b1, b2))
}

fn guarded_scale<T: Real>(d: T, cfg: &InitConfig<T>, what: &str) -> T {
    if d <= T::c(1e-12) {
        log::warn!("{what}: no usable neighbor distance, falling back to {}", cfg.singleton_scale.as_f64());
        cfg.singleton_scale
    } else {
        d
    }
}

/// Initial map from a classified cloud. Thin splats take rotation
/// `[b1 b2 n]` from the estimated normal and tangent scales equal to the
/// nearest-neighbor distance; free splats are isotropic spheres.
pub fn init_map<T: Real>(cloud: &ClassifiedCloud<T>, cfg: &InitConfig<T>) -> Result<GaussianMap<T>> {
    if cloud.is_empty() {
        return Err(Error::InvalidInput("init_map: empty cloud".into()));
    }
    let positions = cloud.all_positions();
    let nn = if positions.len() == 1 {
        vec![T::zero()]
    } else {
        let index = KnnIndex::build(&positions);
        nearest_neighbor_distances(&index, &positions)
    };

    let mut splats: Vec<GaussianSplat<T>> = Vec::with_capacity(positions.len());
    for (i, p) in cloud.co_points.iter().enumerate() {
        let d = guarded_scale(nn[i], cfg, "thin splat");
        let (b1, b2) = tangent_basis(&p.normal)?;
        let rot = Matrix3::from_columns(&[b1, b2, p.normal]);
        let quat = matrix_to_quat(&rot);
        let log_scales = Vector3::new(d.ln(), d.ln(), T::c(THIN_THICKNESS).ln());
        splats.push(splat_at(
            p.position,
            log_scales,
            quat,
            p.color,
            cfg.opacity,
            SplatKind::Thin,
            cfg.sh_degree,
        ));
    }
    let n_co = cloud.co_points.len();
    for (i, p) in cloud.ind_points.iter().enumerate() {
        let d = guarded_scale(nn[n_co + i], cfg, "free splat");
        let quat = Vector4::from_column_slice(&QUAT_IDENTITY.map(T::c));
        splats.push(splat_at(
            p.position,
            Vector3::from_element(d.ln()),
            quat,
            p.color,
            cfg.opacity,
            SplatKind::Free,
            cfg.sh_degree,
        ));
    }
    GaussianMap::new(splats, cfg.sh_degree)
}
