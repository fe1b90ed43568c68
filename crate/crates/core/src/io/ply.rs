//! Binary little-endian PLY models, compatible with the common splat layout:
//! `x y z nx ny nz f_dc_0..2 f_rest_* opacity scale_0..2 rot_0..3`, extended
//! by a trailing `uchar kind` property (0 = free, 1 = thin) announced by a
//! `comment geo_kind_bitmap` header line. Files without the extension load
//! with every splat marked free.

use crate::error::{Error, Result};
use crate::math::{quat_to_matrix, sh_coeff_count, sh_degree_from_count};
use crate::model::{GaussianMap, GaussianSplat, SplatKind};
use crate::scalar::Real;
use nalgebra::{Vector3, Vector4};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

fn base_property_names(rest: usize) -> Vec<String> {
    let mut names = vec!["x", "y", "z", "nx", "ny", "nz", "f_dc_0", "f_dc_1", "f_dc_2"]
        .into_iter()
        .map(String::from)
        .collect::<Vec<_>>();
    for i in 0..rest {
        names.push(format!("f_rest_{i}"));
    }
    for n in ["opacity", "scale_0", "scale_1", "scale_2", "rot_0", "rot_1", "rot_2", "rot_3"] {
        names.push(n.to_string());
    }
    names
}

/// Writes the map as binary PLY. Quantization is float32; a write → read →
/// write round trip is byte-identical.
pub fn write_ply<T: Real>(map: &GaussianMap<T>, path: impl AsRef<Path>) -> Result<()> {
    let file = std::fs::File::create(path)?;
    let mut out = std::io::BufWriter::new(file);
    write_ply_to(map, &mut out)
}

pub fn write_ply_to<T: Real>(map: &GaussianMap<T>, out: &mut impl Write) -> Result<()> {
    if map.is_empty() {
        return Err(Error::InvalidInput("write_ply: empty map".into()));
    }
    let coeffs = sh_coeff_count(map.sh_degree());
    let rest = 3 * (coeffs - 1);

    let mut header = String::new();
    header.push_str("ply\nformat binary_little_endian 1.0\n");
    header.push_str(&format!("element vertex {}\n", map.len()));
    for name in base_property_names(rest) {
        header.push_str(&format!("property float {name}\n"));
    }
    header.push_str("comment geo_kind_bitmap\nproperty uchar kind\nend_header\n");
    out.write_all(header.as_bytes())?;

    let put = |v: f32, out: &mut dyn Write| -> Result<()> {
        out.write_all(&v.to_le_bytes())?;
        Ok(())
    };
    for splat in &map.splats {
        for axis in 0..3 {
            put(splat.position[axis].as_f64() as f32, out)?;
        }
        // The stored normal is derived from the quantized rotation so that a
        // round trip re-derives identical bytes.
        let normal: Vector3<f32> = match splat.kind {
            SplatKind::Thin => {
                let q32 = Vector4::new(
                    splat.rotation[0].as_f64() as f32,
                    splat.rotation[1].as_f64() as f32,
                    splat.rotation[2].as_f64() as f32,
                    splat.rotation[3].as_f64() as f32,
                );
                let q64 = q32.map(|v| v as f64);
                let n = quat_to_matrix(&q64).column(2).into_owned();
                Vector3::new(n[0] as f32, n[1] as f32, n[2] as f32)
            }
            SplatKind::Free => Vector3::zeros(),
        };
        for axis in 0..3 {
            put(normal[axis], out)?;
        }
        for ch in 0..3 {
            put(splat.sh_coeffs[0][ch].as_f64() as f32, out)?;
        }
        for ch in 0..3 {
            for c in 1..coeffs {
                put(splat.sh_coeffs[c][ch].as_f64() as f32, out)?;
            }
        }
        put(splat.opacity_logit.as_f64() as f32, out)?;
        for axis in 0..3 {
            put(splat.log_scales[axis].as_f64() as f32, out)?;
        }
        for k in 0..4 {
            put(splat.rotation[k].as_f64() as f32, out)?;
        }
        out.write_all(&[match splat.kind {
            SplatKind::Free => 0u8,
            SplatKind::Thin => 1u8,
        }])?;
    }
    out.flush()?;
    Ok(())
}

struct HeaderInfo {
    vertex_count: usize,
    rest: usize,
    has_kind: bool,
    header_len: u64,
}

fn parse_header(reader: &mut impl BufRead) -> Result<HeaderInfo> {
    let mut offset: u64 = 0;
    let mut read_line = |reader: &mut dyn BufRead| -> Result<(String, u64)> {
        let mut line = String::new();
        let n = reader.read_line(&mut line)?;
        if n == 0 {
            return Err(Error::PlyParse {
                offset,
                message: "unexpected end of header".into(),
            });
        }
        let line_start = offset;
        offset += n as u64;
        Ok((line.trim_end().to_string(), line_start))
    };

    let (magic, at) = read_line(reader)?;
    if magic != "ply" {
        return Err(Error::PlyParse { offset: at, message: "missing 'ply' magic".into() });
    }
    let (format, at) = read_line(reader)?;
    if format != "format binary_little_endian 1.0" {
        return Err(Error::PlyParse {
            offset: at,
            message: format!(
                "unsupported format '{format}'; only binary_little_endian 1.0 is accepted"
            ),
        });
    }

    let mut vertex_count: Option<usize> = None;
    let mut float_props: Vec<String> = Vec::new();
    let mut has_kind = false;
    loop {
        let (line, at) = read_line(reader)?;
        if line == "end_header" {
            break;
        }
        if line.starts_with("comment") {
            continue;
        }
        if let Some(rest) = line.strip_prefix("element ") {
            let mut parts = rest.split_whitespace();
            let name = parts.next().unwrap_or("");
            if name != "vertex" || vertex_count.is_some() {
                return Err(Error::PlyParse {
                    offset: at,
                    message: format!("unsupported element '{name}'"),
                });
            }
            let count = parts
                .next()
                .and_then(|c| c.parse::<usize>().ok())
                .ok_or_else(|| Error::PlyParse {
                    offset: at,
                    message: "bad vertex count".into(),
                })?;
            vertex_count = Some(count);
            continue;
        }
        if let Some(rest) = line.strip_prefix("property ") {
            if has_kind {
                return Err(Error::PlyParse {
                    offset: at,
                    message: "properties after 'kind' are not supported".into(),
                });
            }
            let mut parts = rest.split_whitespace();
            let ty = parts.next().unwrap_or("");
            let name = parts.next().unwrap_or("");
            match (ty, name) {
                ("float", n) => float_props.push(n.to_string()),
                ("uchar", "kind") => has_kind = true,
                _ => {
                    return Err(Error::PlyParse {
                        offset: at,
                        message: format!("unsupported property '{line}'"),
                    })
                }
            }
            continue;
        }
        return Err(Error::PlyParse { offset: at, message: format!("unrecognized line '{line}'") });
    }

    let vertex_count = vertex_count
        .ok_or_else(|| Error::PlyParse { offset, message: "missing vertex element".into() })?;
    if float_props.len() < 17 {
        return Err(Error::PlyParse {
            offset,
            message: format!("unknown property layout ({} float properties)", float_props.len()),
        });
    }
    let rest = float_props.len() - 17;
    if float_props != base_property_names(rest) {
        return Err(Error::PlyParse { offset, message: "unknown property layout".into() });
    }
    let coeffs = rest / 3 + 1;
    if rest % 3 != 0 || sh_degree_from_count(coeffs).is_none() {
        return Err(Error::PlyParse {
            offset,
            message: format!("unsupported SH band layout ({rest} rest properties)"),
        });
    }
    Ok(HeaderInfo { vertex_count, rest, has_kind, header_len: offset })
}

/// Inverse of [`write_ply`]. Files without the `kind` extension load with
/// every splat marked free.
pub fn read_ply<T: Real>(path: impl AsRef<Path>) -> Result<GaussianMap<T>> {
    let file = std::fs::File::open(path)?;
    read_ply_from(&mut BufReader::new(file))
}

pub fn read_ply_from<T: Real>(reader: &mut impl BufRead) -> Result<GaussianMap<T>> {
    let info = parse_header(reader)?;
    let coeffs = info.rest / 3 + 1;
    let degree = sh_degree_from_count(coeffs).expect("validated by header parse");
    let stride = (17 + info.rest) * 4 + usize::from(info.has_kind);
    let mut body = Vec::new();
    reader.read_to_end(&mut body)?;
    if body.len() != info.vertex_count * stride {
        let offset = info.header_len + body.len() as u64;
        return Err(Error::PlyParse {
            offset,
            message: format!(
                "body is {} bytes, expected {} ({} vertices of {} bytes)",
                body.len(),
                info.vertex_count * stride,
                info.vertex_count,
                stride
            ),
        });
    }

    let mut splats = Vec::with_capacity(info.vertex_count);
    for v in 0..info.vertex_count {
        let base = v * stride;
        let f = |i: usize| -> f32 {
            let at = base + i * 4;
            f32::from_le_bytes(body[at..at + 4].try_into().unwrap())
        };
        let position = Vector3::new(T::c(f(0) as f64), T::c(f(1) as f64), T::c(f(2) as f64));
        // nx ny nz at 3..6 are derived data; skipped.
        let mut sh_coeffs = vec![Vector3::zeros(); coeffs];
        sh_coeffs[0] =
            Vector3::new(T::c(f(6) as f64), T::c(f(7) as f64), T::c(f(8) as f64));
        let rest_per_channel = coeffs - 1;
        for ch in 0..3 {
            for c in 1..coeffs {
                let idx = 9 + ch * rest_per_channel + (c - 1);
                sh_coeffs[c][ch] = T::c(f(idx) as f64);
            }
        }
        let after_rest = 9 + info.rest;
        let opacity_logit = T::c(f(after_rest) as f64);
        let log_scales = Vector3::new(
            T::c(f(after_rest + 1) as f64),
            T::c(f(after_rest + 2) as f64),
            T::c(f(after_rest + 3) as f64),
        );
        let rotation = Vector4::new(
            T::c(f(after_rest + 4) as f64),
            T::c(f(after_rest + 5) as f64),
            T::c(f(after_rest + 6) as f64),
            T::c(f(after_rest + 7) as f64),
        );
        let kind = if info.has_kind {
            match body[base + stride - 1] {
                0 => SplatKind::Free,
                1 => SplatKind::Thin,
                other => {
                    return Err(Error::PlyParse {
                        offset: info.header_len + (base + stride - 1) as u64,
                        message: format!("invalid kind byte {other}"),
                    })
                }
            }
        } else {
            SplatKind::Free
        };
        splats.push(GaussianSplat { position, log_scales, rotation, sh_coeffs, opacity_logit, kind });
    }
    GaussianMap::new(splats, degree)
}
