//! Text format for analytic reference surfaces:
//! `box cx cy cz hx hy hz` or `plane px py pz nx ny nz [hu hv]`, one per
//! line, `#` comments allowed.

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::synth::Surface;
use nalgebra::Vector3;
use std::io::Write;
use std::path::Path;

pub fn write_surfaces<T: Real>(surfaces: &[Surface<T>], path: impl AsRef<Path>) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "# reference surfaces")?;
    for s in surfaces {
        match s {
            Surface::Box { center, half } => writeln!(
                out,
                "box {} {} {} {} {} {}",
                center[0].as_f64(),
                center[1].as_f64(),
                center[2].as_f64(),
                half[0].as_f64(),
                half[1].as_f64(),
                half[2].as_f64()
            )?,
            Surface::Plane { point, normal, half_extent } => {
                write!(
                    out,
                    "plane {} {} {} {} {} {}",
                    point[0].as_f64(),
                    point[1].as_f64(),
                    point[2].as_f64(),
                    normal[0].as_f64(),
                    normal[1].as_f64(),
                    normal[2].as_f64()
                )?;
                if let Some((hu, hv)) = half_extent {
                    write!(out, " {} {}", hu.as_f64(), hv.as_f64())?;
                }
                writeln!(out)?;
            }
        }
    }
    out.flush()?;
    Ok(())
}

pub fn read_surfaces<T: Real>(path: impl AsRef<Path>) -> Result<Vec<Surface<T>>> {
    let content = std::fs::read_to_string(&path)?;
    let mut surfaces = Vec::new();
    for (lineno, raw) in content.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        let parse = |s: &str| -> Result<T> {
            s.parse::<f64>()
                .map(T::c)
                .map_err(|_| Error::Config(format!("scene file line {}: bad number '{s}'", lineno + 1)))
        };
        match fields.first().copied() {
            Some("box") if fields.len() == 7 => {
                surfaces.push(Surface::Box {
                    center: Vector3::new(parse(fields[1])?, parse(fields[2])?, parse(fields[3])?),
                    half: Vector3::new(parse(fields[4])?, parse(fields[5])?, parse(fields[6])?),
                });
            }
            Some("plane") if fields.len() == 7 || fields.len() == 9 => {
                let normal =
                    Vector3::new(parse(fields[4])?, parse(fields[5])?, parse(fields[6])?);
                let half_extent = if fields.len() == 9 {
                    Some((parse(fields[7])?, parse(fields[8])?))
                } else {
                    None
                };
                surfaces.push(Surface::Plane {
                    point: Vector3::new(parse(fields[1])?, parse(fields[2])?, parse(fields[3])?),
                    normal: normal.normalize(),
                    half_extent,
                });
            }
            _ => {
                return Err(Error::Config(format!(
                    "scene file line {}: unrecognized surface '{line}'",
                    lineno + 1
                )))
            }
        }
    }
    if surfaces.is_empty() {
        return Err(Error::Config("scene file declares no surfaces".into()));
    }
    Ok(surfaces)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn surfaces_roundtrip() {
        let surfaces = vec![
            Surface::Box {
                center: Vector3::new(0.0, 0.5, -1.0),
                half: Vector3::new(0.5, 0.5, 0.5),
            },
            Surface::Plane {
                point: Vector3::zeros(),
                normal: Vector3::new(0.0, 0.0, 1.0),
                half_extent: Some((1.0, 2.0)),
            },
            Surface::Plane {
                point: Vector3::new(1.0, 2.0, 3.0),
                normal: Vector3::new(1.0, 0.0, 0.0),
                half_extent: None,
            },
        ];
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("scene.txt");
        write_surfaces(&surfaces, &path).unwrap();
        let back = read_surfaces::<f64>(&path).unwrap();
        assert_eq!(surfaces, back);
    }

    #[test]
    fn bad_lines_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("scene.txt");
        std::fs::write(&path, "sphere 0 0 0 1\n").unwrap();
        assert!(read_surfaces::<f64>(&path).is_err());
        std::fs::write(&path, "# only comments\n").unwrap();
        assert!(read_surfaces::<f64>(&path).is_err());
    }
}
