//! Flat `key=value` run configuration mirroring the trainer's field names.
//! Unknown keys are errors so typos cannot silently fall back to defaults.

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::train::TrainConfig;
use std::path::Path;

pub fn parse_config<T: Real>(text: &str) -> Result<TrainConfig<T>> {
    let mut cfg = TrainConfig::<T>::default();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::Config(format!("config line {}: expected key=value", lineno + 1))
        })?;
        let key = key.trim();
        let value = value.trim();
        let scalar = |v: &str| -> Result<T> {
            v.parse::<f64>().map(T::c).map_err(|_| {
                Error::Config(format!("config line {}: bad number '{v}'", lineno + 1))
            })
        };
        let count = |v: &str| -> Result<usize> {
            v.parse::<usize>().map_err(|_| {
                Error::Config(format!("config line {}: bad count '{v}'", lineno + 1))
            })
        };
        match key {
            "learning_rate" => cfg.learning_rate = scalar(value)?,
            "lr_log_scales" => cfg.lr_log_scales = scalar(value)?,
            "lr_rotation" => cfg.lr_rotation = scalar(value)?,
            "lr_sh" => cfg.lr_sh = scalar(value)?,
            "lr_opacity" => cfg.lr_opacity = scalar(value)?,
            "lambda_pho" => cfg.lambda_pho = scalar(value)?,
            "lambda_geo" => cfg.lambda_geo = scalar(value)?,
            "total_iters" => cfg.total_iters = count(value)?,
            "warmup_iters" => cfg.warmup_iters = count(value)?,
            "densify_until" => cfg.densify_until = count(value)?,
            "densify_interval" => cfg.densify_interval = count(value)?,
            "knn_refresh_early" => cfg.knn_refresh_early = count(value)?,
            "knn_refresh_late" => cfg.knn_refresh_late = count(value)?,
            "knn_refresh_switch" => cfg.knn_refresh_switch = count(value)?,
            "opacity_floor" => cfg.opacity_floor = scalar(value)?,
            "neighbors_m" => cfg.neighbors_m = count(value)?,
            "neighbor_angle_filter" => cfg.neighbor_angle_filter = scalar(value)?,
            "grad_threshold" => cfg.grad_threshold = scalar(value)?,
            "percent_dense" => cfg.percent_dense = scalar(value)?,
            "checkpoint_interval" => cfg.checkpoint_interval = count(value)?,
            "dssim_weight" => cfg.dssim_weight = scalar(value)?,
            "seed" => {
                cfg.seed = value.parse::<u64>().map_err(|_| {
                    Error::Config(format!("config line {}: bad seed '{value}'", lineno + 1))
                })?
            }
            other => {
                return Err(Error::Config(format!(
                    "config line {}: unknown key '{other}'",
                    lineno + 1
                )))
            }
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn read_config<T: Real>(path: impl AsRef<Path>) -> Result<TrainConfig<T>> {
    parse_config(&std::fs::read_to_string(path)?)
}

pub fn config_to_text<T: Real>(cfg: &TrainConfig<T>) -> String {
    format!(
        "learning_rate={}\nlr_log_scales={}\nlr_rotation={}\nlr_sh={}\nlr_opacity={}\n\
         lambda_pho={}\nlambda_geo={}\ntotal_iters={}\nwarmup_iters={}\ndensify_until={}\n\
         densify_interval={}\nknn_refresh_early={}\nknn_refresh_late={}\nknn_refresh_switch={}\n\
         opacity_floor={}\nneighbors_m={}\nneighbor_angle_filter={}\ngrad_threshold={}\n\
         percent_dense={}\ncheckpoint_interval={}\ndssim_weight={}\nseed={}\n",
        cfg.learning_rate.as_f64(),
        cfg.lr_log_scales.as_f64(),
        cfg.lr_rotation.as_f64(),
        cfg.lr_sh.as_f64(),
        cfg.lr_opacity.as_f64(),
        cfg.lambda_pho.as_f64(),
        cfg.lambda_geo.as_f64(),
        cfg.total_iters,
        cfg.warmup_iters,
        cfg.densify_until,
        cfg.densify_interval,
        cfg.knn_refresh_early,
        cfg.knn_refresh_late,
        cfg.knn_refresh_switch,
        cfg.opacity_floor.as_f64(),
        cfg.neighbors_m,
        cfg.neighbor_angle_filter.as_f64(),
        cfg.grad_threshold.as_f64(),
        cfg.percent_dense.as_f64(),
        cfg.checkpoint_interval,
        cfg.dssim_weight.as_f64(),
        cfg.seed
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn defaults_match_schedule_constants() {
        let cfg = TrainConfig::<f64>::default();
        assert_relative_eq!(cfg.learning_rate, 0.0002);
        assert_relative_eq!(cfg.lambda_pho, 0.8);
        assert_relative_eq!(cfg.lambda_geo, 0.3);
        assert_eq!(cfg.total_iters, 30_000);
        assert_eq!(cfg.warmup_iters, 2_000);
        assert_eq!(cfg.densify_until, 10_000);
        assert_eq!(cfg.densify_interval, 10);
        assert_eq!(cfg.knn_refresh_early, 100);
        assert_eq!(cfg.knn_refresh_late, 1_000);
        assert_eq!(cfg.knn_refresh_switch, 20_000);
        assert_relative_eq!(cfg.opacity_floor, 0.05);
        assert_eq!(cfg.neighbors_m, 8);
    }

    #[test]
    fn parse_overrides_and_comments() {
        let cfg: TrainConfig<f64> = parse_config(
            "# scaled run\ntotal_iters=2000\nwarmup_iters=200\ndensify_until=1000\n\
             knn_refresh_switch=1500\nseed=42\nlambda_geo = 0.25\n",
        )
        .unwrap();
        assert_eq!(cfg.total_iters, 2000);
        assert_eq!(cfg.warmup_iters, 200);
        assert_eq!(cfg.seed, 42);
        assert_relative_eq!(cfg.lambda_geo, 0.25);
    }

    #[test]
    fn unknown_key_is_an_error() {
        let err = parse_config::<f64>("warmup_itres=100\n");
        assert!(matches!(err, Err(Error::Config(msg)) if msg.contains("warmup_itres")));
    }

    #[test]
    fn text_roundtrip_preserves_values() {
        let mut cfg = TrainConfig::<f64>::default();
        cfg.total_iters = 123;
        cfg.warmup_iters = 10;
        cfg.densify_until = 20;
        cfg.knn_refresh_switch = 50;
        cfg.lambda_geo = 0.125;
        let text = config_to_text(&cfg);
        let back: TrainConfig<f64> = parse_config(&text).unwrap();
        assert_eq!(back.total_iters, 123);
        assert_eq!(back.lambda_geo, 0.125);
    }
}
