//! Adam over splat parameters, with per-group learning rates.

use crate::error::{Error, Result};
use crate::math::sh_coeff_count;
use crate::model::{GaussianMap, SplatKind};
use crate::raster::MapGradients;
use crate::scalar::Real;
use nalgebra::{Vector3, Vector4};

#[derive(Clone, Copy, Debug)]
pub struct AdamParams<T: Real> {
    pub beta1: T,
    pub beta2: T,
    pub eps: T,
    pub lr_position: T,
    pub lr_log_scales: T,
    pub lr_rotation: T,
    pub lr_sh: T,
    pub lr_opacity: T,
}

impl<T: Real> Default for AdamParams<T> {
    fn default() -> Self {
        Self {
            beta1: T::c(0.9),
            beta2: T::c(0.999),
            eps: T::c(1e-15),
            lr_position: T::c(0.0002),
            lr_log_scales: T::c(0.005),
            lr_rotation: T::c(0.001),
            lr_sh: T::c(0.0025),
            lr_opacity: T::c(0.05),
        }
    }
}

/// First/second moments for one splat's parameters.
#[derive(Clone, Debug, Default)]
struct Moments<T: Real> {
    m_pos: Vector3<T>,
    v_pos: Vector3<T>,
    m_ls: Vector3<T>,
    v_ls: Vector3<T>,
    m_rot: Vector4<T>,
    v_rot: Vector4<T>,
    m_sh: Vec<Vector3<T>>,
    v_sh: Vec<Vector3<T>>,
    m_op: T,
    v_op: T,
}

impl<T: Real> Moments<T> {
    fn zeros(coeffs: usize) -> Self {
        Self {
            m_sh: vec![Vector3::zeros(); coeffs],
            v_sh: vec![Vector3::zeros(); coeffs],
            ..Default::default()
        }
    }
}

/// Optimizer state aligned with the map's splat order. Survives map growth
/// through [`AdamState::remap`]: kept and cloned splats carry their moments,
/// split children start fresh.
#[derive(Clone, Debug)]
pub struct AdamState<T: Real> {
    slots: Vec<Moments<T>>,
    step: usize,
    coeffs: usize,
}

/// How a splat in the new map relates to the old map after densify/prune.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SlotOrigin {
    /// Same splat, possibly at a new index.
    Carried(usize),
    /// Clone of an old splat: moments are copied.
    Cloned(usize),
    /// Fresh splat (split child): moments reset.
    Fresh,
}

impl<T: Real> AdamState<T> {
    pub fn new(map: &GaussianMap<T>) -> Self {
        let coeffs = sh_coeff_count(map.sh_degree());
        Self { slots: (0..map.len()).map(|_| Moments::zeros(coeffs)).collect(), step: 0, coeffs }
    }

    pub fn step_count(&self) -> usize {
        self.step
    }

    /// Rebuilds the state for a reindexed map.
    pub fn remap(&mut self, origins: &[SlotOrigin]) {
        let slots = origins
            .iter()
            .map(|o| match o {
                SlotOrigin::Carried(old) | SlotOrigin::Cloned(old) => self.slots[*old].clone(),
                SlotOrigin::Fresh => Moments::zeros(self.coeffs),
            })
            .collect();
        self.slots = slots;
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }
}

#[inline]
fn adam_update<T: Real>(m: &mut T, v: &mut T, g: T, p: &AdamParams<T>, bc1: T, bc2: T, lr: T) -> T {
    *m = p.beta1 * *m + (T::one() - p.beta1) * g;
    *v = p.beta2 * *v + (T::one() - p.beta2) * g * g;
    let m_hat = *m / bc1;
    let v_hat = *v / bc2;
    -lr * m_hat / (v_hat.sqrt() + p.eps)
}

/// One Adam step over every splat parameter.
///
/// The frozen thin-splat thickness never receives an update, quaternions of
/// touched splats are renormalized afterwards, and a non-finite gradient
/// aborts the whole step leaving the map untouched.
pub fn optimizer_step<T: Real>(
    map: &mut GaussianMap<T>,
    grads: &MapGradients<T>,
    state: &mut AdamState<T>,
    params: &AdamParams<T>,
    iter: usize,
) -> Result<()> {
    if grads.len() != map.len() || state.len() != map.len() {
        return Err(Error::InvalidInput(format!(
            "optimizer_step: {} splats vs {} gradient slots vs {} state slots",
            map.len(),
            grads.len(),
            state.len()
        )));
    }
    if !grads.all_finite() {
        return Err(Error::NonFiniteGradient { iter });
    }
    state.step += 1;
    let t = state.step as i32;
    let bc1 = T::one() - params.beta1.powi(t);
    let bc2 = T::one() - params.beta2.powi(t);

    for (i, splat) in map.splats.iter_mut().enumerate() {
        let slot = &mut state.slots[i];
        for axis in 0..3 {
            splat.position[axis] += adam_update(
                &mut slot.m_pos[axis],
                &mut slot.v_pos[axis],
                grads.position[i][axis],
                params,
                bc1,
                bc2,
                params.lr_position,
            );
        }
        let frozen = if splat.kind == SplatKind::Thin { 2 } else { 3 };
        for axis in 0..3 {
            let g = if axis == frozen { T::zero() } else { grads.log_scales[i][axis] };
            let delta = adam_update(
                &mut slot.m_ls[axis],
                &mut slot.v_ls[axis],
                g,
                params,
                bc1,
                bc2,
                params.lr_log_scales,
            );
            if axis != frozen {
                splat.log_scales[axis] += delta;
            }
        }
        let mut rot_touched = false;
        for k in 0..4 {
            let delta = adam_update(
                &mut slot.m_rot[k],
                &mut slot.v_rot[k],
                grads.rotation[i][k],
                params,
                bc1,
                bc2,
                params.lr_rotation,
            );
            if delta != T::zero() {
                rot_touched = true;
            }
            splat.rotation[k] += delta;
        }
        if rot_touched {
            // Renormalize only when moved: a zero-gradient step must leave
            // the stored quaternion bit-identical.
            splat.rotation /= splat.rotation.norm();
        }
        for c in 0..splat.sh_coeffs.len() {
            for ch in 0..3 {
                splat.sh_coeffs[c][ch] += adam_update(
                    &mut slot.m_sh[c][ch],
                    &mut slot.v_sh[c][ch],
                    grads.sh[i][c][ch],
                    params,
                    bc1,
                    bc2,
                    params.lr_sh,
                );
            }
        }
        splat.opacity_logit += adam_update(
            &mut slot.m_op,
            &mut slot.v_op,
            grads.opacity_logit[i],
            params,
            bc1,
            bc2,
            params.lr_opacity,
        );
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{splat_at, THIN_THICKNESS};
    use approx::assert_relative_eq;
    use nalgebra::Vector4;
    use rand::rngs::StdRng;
    use rand::SeedableRng;

    fn one_splat_map(kind: SplatKind) -> GaussianMap<f64> {
        let s = splat_at(
            Vector3::new(0.1, 0.2, 1.5),
            Vector3::new(0.1_f64.ln(), 0.1_f64.ln(), THIN_THICKNESS.ln()),
            Vector4::new(1.0, 0.0, 0.0, 0.0),
            Vector3::from_element(0.6),
            0.4,
            kind,
            0,
        );
        GaussianMap::new(vec![s], 0).unwrap()
    }

    #[test]
    fn zero_gradients_leave_map_bitwise_unchanged() {
        let mut map = one_splat_map(SplatKind::Thin);
        let before = map.splats[0].clone();
        let grads = MapGradients::zeros(&map);
        let mut state = AdamState::new(&map);
        optimizer_step(&mut map, &grads, &mut state, &AdamParams::default(), 0).unwrap();
        assert_eq!(map.splats[0], before);
    }

    #[test]
    fn first_step_is_signed_learning_rate() {
        // Adam at t=1: delta = -lr * g / (|g| + eps).
        let mut map = one_splat_map(SplatKind::Free);
        let p0 = map.splats[0].position;
        let mut grads = MapGradients::zeros(&map);
        grads.position[0] = Vector3::new(3.0, -0.5, 0.0);
        let mut state = AdamState::new(&map);
        let params = AdamParams::default();
        optimizer_step(&mut map, &grads, &mut state, &params, 0).unwrap();
        let delta = map.splats[0].position - p0;
        assert_relative_eq!(delta[0], -params.lr_position, epsilon = 1e-12);
        assert_relative_eq!(delta[1], params.lr_position, epsilon = 1e-12);
        assert_eq!(delta[2], 0.0);
    }

    #[test]
    fn thin_thickness_never_moves() {
        let mut map = one_splat_map(SplatKind::Thin);
        let mut grads = MapGradients::zeros(&map);
        grads.log_scales[0] = Vector3::new(1.0, 1.0, 1.0); // s3 slot should be ignored
        let mut state = AdamState::new(&map);
        for it in 0..50 {
            optimizer_step(&mut map, &grads, &mut state, &AdamParams::default(), it).unwrap();
        }
        assert_eq!(map.splats[0].scales()[2], THIN_THICKNESS);
        assert_eq!(map.splats[0].log_scales[2], THIN_THICKNESS.ln());
        assert!(map.splats[0].log_scales[0] < 0.1_f64.ln());
    }

    #[test]
    fn quaternion_stays_unit_after_steps() {
        let mut map = one_splat_map(SplatKind::Thin);
        let mut grads = MapGradients::zeros(&map);
        grads.rotation[0] = Vector4::new(0.3, -0.2, 0.5, 0.1);
        let mut state = AdamState::new(&map);
        for it in 0..100 {
            optimizer_step(&mut map, &grads, &mut state, &AdamParams::default(), it).unwrap();
            assert!((map.splats[0].rotation.norm() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn non_finite_gradient_aborts_without_mutation() {
        let mut map = one_splat_map(SplatKind::Free);
        let before = map.splats[0].clone();
        let mut grads = MapGradients::zeros(&map);
        grads.position[0][0] = f64::NAN;
        let mut state = AdamState::new(&map);
        let err = optimizer_step(&mut map, &grads, &mut state, &AdamParams::default(), 7);
        assert!(matches!(err, Err(Error::NonFiniteGradient { iter: 7 })));
        assert_eq!(map.splats[0], before);
        assert_eq!(state.step_count(), 0);
    }

    #[test]
    fn quadratic_toy_objective_converges() {
        // Minimize |mu - target|^2 through the position group only.
        let mut map = one_splat_map(SplatKind::Free);
        let target = Vector3::new(0.13, 0.27, 1.44);
        let mut state = AdamState::new(&map);
        let params = AdamParams::default();
        let mut _rng = StdRng::seed_from_u64(0);
        for it in 0..2000 {
            let mut grads = MapGradients::zeros(&map);
            grads.position[0] = (map.splats[0].position - target) * 2.0;
            optimizer_step(&mut map, &grads, &mut state, &params, it).unwrap();
        }
        assert!((map.splats[0].position - target).norm() < 1e-4);
    }

    #[test]
    fn remap_carries_and_resets_moments() {
        let mut map = one_splat_map(SplatKind::Free);
        let mut grads = MapGradients::zeros(&map);
        grads.position[0] = Vector3::new(1.0, 0.0, 0.0);
        let mut state = AdamState::new(&map);
        optimizer_step(&mut map, &grads, &mut state, &AdamParams::default(), 0).unwrap();
        let m_before = state.slots[0].m_pos[0];
        assert!(m_before != 0.0);
        state.remap(&[SlotOrigin::Carried(0), SlotOrigin::Cloned(0), SlotOrigin::Fresh]);
        assert_eq!(state.len(), 3);
        assert_eq!(state.slots[0].m_pos[0], m_before);
        assert_eq!(state.slots[1].m_pos[0], m_before);
        assert_eq!(state.slots[2].m_pos[0], 0.0);
    }
}
