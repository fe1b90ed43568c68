//! Dataset directories: `points.ply` (xyz + rgb cloud), `cameras.txt`
//! (shared intrinsics plus one world-to-camera pose per view), and
//! `images/<id>.png` (8-bit sRGB references).

use crate::error::{Error, Result};
use crate::image::{linear_to_srgb_u8, srgb_u8_to_linear, ImageRgb};
use crate::math::{matrix_to_quat, quat_to_matrix};
use crate::model::{CameraView, Intrinsics, Pose};
use crate::scalar::Real;
use crate::synth::{CloudPoint, SyntheticScene};
use nalgebra::{Vector3, Vector4};
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

/// Writes the observation cloud as a plain xyz+rgb binary PLY.
pub fn write_points_ply<T: Real>(points: &[CloudPoint<T>], path: impl AsRef<Path>) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    write!(
        out,
        "ply\nformat binary_little_endian 1.0\nelement vertex {}\nproperty float x\nproperty float y\nproperty float z\nproperty uchar red\nproperty uchar green\nproperty uchar blue\nend_header\n",
        points.len()
    )?;
    for p in points {
        for axis in 0..3 {
            out.write_all(&(p.position[axis].as_f64() as f32).to_le_bytes())?;
        }
        for ch in 0..3 {
            out.write_all(&[linear_to_srgb_u8(p.color[ch])])?;
        }
    }
    out.flush()?;
    Ok(())
}

fn expect_line(reader: &mut impl BufRead, want: &str) -> Result<()> {
    let mut line = String::new();
    reader.read_line(&mut line)?;
    if line.trim_end() != want {
        return Err(Error::DatasetLoad(format!(
            "points.ply: expected '{want}', found '{}'",
            line.trim_end()
        )));
    }
    Ok(())
}

/// Reads a plain xyz+rgb binary PLY cloud.
pub fn read_points_ply<T: Real>(path: impl AsRef<Path>) -> Result<Vec<CloudPoint<T>>> {
    let mut reader = BufReader::new(std::fs::File::open(&path)?);
    expect_line(&mut reader, "ply")?;
    expect_line(&mut reader, "format binary_little_endian 1.0")?;
    let mut count_line = String::new();
    reader.read_line(&mut count_line)?;
    let count: usize = count_line
        .trim_end()
        .strip_prefix("element vertex ")
        .and_then(|c| c.parse().ok())
        .ok_or_else(|| Error::DatasetLoad("points.ply: bad vertex element".into()))?;
    for want in [
        "property float x",
        "property float y",
        "property float z",
        "property uchar red",
        "property uchar green",
        "property uchar blue",
        "end_header",
    ] {
        expect_line(&mut reader, want)?;
    }
    let mut body = Vec::new();
    reader.read_to_end(&mut body)?;
    if body.len() != count * 15 {
        return Err(Error::DatasetLoad(format!(
            "points.ply: body is {} bytes, expected {}",
            body.len(),
            count * 15
        )));
    }
    let mut points = Vec::with_capacity(count);
    for v in 0..count {
        let base = v * 15;
        let f = |i: usize| {
            f32::from_le_bytes(body[base + i * 4..base + i * 4 + 4].try_into().unwrap())
        };
        points.push(CloudPoint {
            position: Vector3::new(T::c(f(0) as f64), T::c(f(1) as f64), T::c(f(2) as f64)),
            color: Vector3::new(
                srgb_u8_to_linear(body[base + 12]),
                srgb_u8_to_linear(body[base + 13]),
                srgb_u8_to_linear(body[base + 14]),
            ),
        });
    }
    Ok(points)
}

/// Writes `cameras.txt`: `W H fx fy cx cy`, then `id tx ty tz qw qx qy qz`
/// per view (world-to-camera).
pub fn write_cameras_txt<T: Real>(
    cameras: &[CameraView<T>],
    path: impl AsRef<Path>,
) -> Result<()> {
    if cameras.is_empty() {
        return Err(Error::InvalidInput("write_cameras_txt: no cameras".into()));
    }
    let intr = &cameras[0].intrinsics;
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(
        out,
        "{} {} {} {} {} {}",
        intr.width,
        intr.height,
        intr.fx.as_f64(),
        intr.fy.as_f64(),
        intr.cx.as_f64(),
        intr.cy.as_f64()
    )?;
    for (id, cam) in cameras.iter().enumerate() {
        let q = matrix_to_quat(&cam.pose_cw.rotation);
        let t = cam.pose_cw.translation;
        writeln!(
            out,
            "{id} {} {} {} {} {} {} {}",
            t[0].as_f64(),
            t[1].as_f64(),
            t[2].as_f64(),
            q[0].as_f64(),
            q[1].as_f64(),
            q[2].as_f64(),
            q[3].as_f64()
        )?;
    }
    out.flush()?;
    Ok(())
}

/// Reads `cameras.txt` into cameras without reference images.
pub fn read_cameras_txt<T: Real>(path: impl AsRef<Path>) -> Result<Vec<(usize, CameraView<T>)>> {
    let content = std::fs::read_to_string(&path)?;
    let mut lines = content.lines();
    let first = lines
        .next()
        .ok_or_else(|| Error::DatasetLoad("cameras.txt: empty file".into()))?;
    let head: Vec<f64> = first
        .split_whitespace()
        .map(|t| t.parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::DatasetLoad("cameras.txt: bad intrinsics line".into()))?;
    if head.len() != 6 {
        return Err(Error::DatasetLoad("cameras.txt: intrinsics line needs 6 fields".into()));
    }
    let intr = Intrinsics {
        width: head[0] as usize,
        height: head[1] as usize,
        fx: T::c(head[2]),
        fy: T::c(head[3]),
        cx: T::c(head[4]),
        cy: T::c(head[5]),
    };
    intr.validate().map_err(|e| Error::DatasetLoad(format!("cameras.txt: {e}")))?;
    let mut cameras = Vec::new();
    for line in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 8 {
            return Err(Error::DatasetLoad(format!(
                "cameras.txt: view line needs 8 fields, found {}",
                fields.len()
            )));
        }
        let id: usize = fields[0]
            .parse()
            .map_err(|_| Error::DatasetLoad(format!("cameras.txt: bad view id '{}'", fields[0])))?;
        let vals: Vec<f64> = fields[1..]
            .iter()
            .map(|t| t.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| {
                Error::DatasetLoad(format!("cameras.txt: bad number in view {id}"))
            })?;
        let quat = Vector4::new(T::c(vals[3]), T::c(vals[4]), T::c(vals[5]), T::c(vals[6]));
        if (quat.norm() - T::one()).abs() > T::c(1e-3) {
            return Err(Error::DatasetLoad(format!(
                "cameras.txt: view {id} quaternion norm {} is not unit",
                quat.norm().as_f64()
            )));
        }
        let pose = Pose {
            rotation: quat_to_matrix(&quat),
            translation: Vector3::new(T::c(vals[0]), T::c(vals[1]), T::c(vals[2])),
        };
        let cam = CameraView::new(intr, pose)
            .map_err(|e| Error::DatasetLoad(format!("cameras.txt: view {id}: {e}")))?;
        cameras.push((id, cam));
    }
    Ok(cameras)
}

pub fn write_image_png<T: Real>(image: &ImageRgb<T>, path: impl AsRef<Path>) -> Result<()> {
    let mut buf = image::RgbImage::new(image.width() as u32, image.height() as u32);
    for y in 0..image.height() {
        for x in 0..image.width() {
            let p = image.get(x, y);
            buf.put_pixel(
                x as u32,
                y as u32,
                image::Rgb([
                    linear_to_srgb_u8(p[0]),
                    linear_to_srgb_u8(p[1]),
                    linear_to_srgb_u8(p[2]),
                ]),
            );
        }
    }
    buf.save(path.as_ref())?;
    Ok(())
}

pub fn read_image_png<T: Real>(path: impl AsRef<Path>) -> Result<ImageRgb<T>> {
    let img = image::open(path.as_ref())?.to_rgb8();
    let (w, h) = (img.width() as usize, img.height() as usize);
    let mut out = ImageRgb::zeros(w, h);
    for y in 0..h {
        for x in 0..w {
            let p = img.get_pixel(x as u32, y as u32);
            out.set(
                x,
                y,
                Vector3::new(
                    srgb_u8_to_linear(p.0[0]),
                    srgb_u8_to_linear(p.0[1]),
                    srgb_u8_to_linear(p.0[2]),
                ),
            );
        }
    }
    Ok(out)
}

/// Exports a synthetic scene as a dataset directory (plus `scene.txt` with
/// the analytic surfaces for reconstruction evaluation).
pub fn write_dataset<T: Real>(scene: &SyntheticScene<T>, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir.join("images"))?;
    write_points_ply(&scene.point_cloud, dir.join("points.ply"))?;
    write_cameras_txt(&scene.cameras, dir.join("cameras.txt"))?;
    for (id, cam) in scene.cameras.iter().enumerate() {
        let reference = cam
            .reference
            .as_ref()
            .ok_or_else(|| Error::InvalidInput(format!("camera {id} has no reference")))?;
        write_image_png(reference, dir.join("images").join(format!("{id}.png")))?;
    }
    super::scene_file::write_surfaces(&scene.surfaces, dir.join("scene.txt"))?;
    Ok(())
}

/// Loads a dataset directory; every view must validate (pose, quaternion,
/// image presence and size) or nothing is returned.
pub fn load_dataset<T: Real>(
    dir: impl AsRef<Path>,
) -> Result<(Vec<CloudPoint<T>>, Vec<CameraView<T>>)> {
    let dir = dir.as_ref();
    let points_path = dir.join("points.ply");
    let cameras_path = dir.join("cameras.txt");
    if !points_path.is_file() {
        return Err(Error::DatasetLoad(format!("missing {}", points_path.display())));
    }
    if !cameras_path.is_file() {
        return Err(Error::DatasetLoad(format!("missing {}", cameras_path.display())));
    }
    let points = read_points_ply(&points_path)?;
    let mut cameras = Vec::new();
    for (id, cam) in read_cameras_txt::<T>(&cameras_path)? {
        let image_path = dir.join("images").join(format!("{id}.png"));
        if !image_path.is_file() {
            return Err(Error::DatasetLoad(format!("missing image {}", image_path.display())));
        }
        let image = read_image_png(&image_path)?;
        if image.width() != cam.intrinsics.width || image.height() != cam.intrinsics.height {
            return Err(Error::DatasetLoad(format!(
                "image {} is {}x{}, cameras.txt declares {}x{}",
                image_path.display(),
                image.width(),
                image.height(),
                cam.intrinsics.width,
                cam.intrinsics.height
            )));
        }
        cameras.push(cam.with_reference(image)?);
    }
    if cameras.is_empty() {
        return Err(Error::DatasetLoad("cameras.txt lists no views".into()));
    }
    Ok((points, cameras))
}
