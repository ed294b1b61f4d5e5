//! ASCII OFF / PLY meshes, XYZ / PLY clouds and provenance sidecars.
//!
//! Writers print coordinates with Rust's shortest round-trip float format, so
//! a load → save → load cycle reproduces positions exactly.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{Mesh, PointCloud, PointSet};
use crate::{Error, Result, Vec3};

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn extension(path: &Path) -> String {
    path.extension()
        .and_then(|e| e.to_str())
        .map(|e| e.to_ascii_lowercase())
        .unwrap_or_default()
}

/// Loads an OFF or ASCII PLY triangle mesh. Polygons are fan-triangulated.
pub fn load_mesh(path: impl AsRef<Path>) -> Result<Mesh> {
    let path = path.as_ref();
    let text = read_text(path)?;
    let (verts, faces) = match extension(path).as_str() {
        "off" => parse_off(&text)?,
        "ply" => parse_ply(&text)?,
        other => {
            return Err(Error::Parse(format!(
                "unsupported mesh extension '{other}' (expected .off or .ply)"
            )))
        }
    };
    if verts.is_empty() || faces.is_empty() {
        return Err(Error::EmptyMesh);
    }
    Mesh::new(verts, faces)
}

/// Loads an XYZ, PLY or OFF file as a point cloud (faces are ignored). If a
/// sibling `<path>.prov` sidecar exists it is read as provenance.
pub fn load_cloud(path: impl AsRef<Path>) -> Result<PointCloud> {
    let path = path.as_ref();
    let text = read_text(path)?;
    let points = match extension(path).as_str() {
        "xyz" | "txt" => parse_xyz(&text)?,
        "ply" => parse_ply(&text)?.0,
        "off" => parse_off_vertices(&text)?,
        other => {
            return Err(Error::Parse(format!(
                "unsupported cloud extension '{other}' (expected .xyz, .ply or .off)"
            )))
        }
    };
    let side = provenance_path(path);
    if side.exists() {
        let prov = load_provenance(&side)?;
        let parent = prov.iter().copied().max().map_or(0, |m| m + 1);
        PointCloud::with_provenance(points, prov, parent)
    } else {
        PointCloud::new(points)
    }
}

pub fn save_mesh(mesh: &Mesh, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let text = match extension(path).as_str() {
        "off" => format_off(mesh.vertices(), mesh.faces()),
        "ply" => format_ply(mesh.vertices(), mesh.faces()),
        other => {
            return Err(Error::Parse(format!(
                "unsupported mesh extension '{other}'"
            )))
        }
    };
    write_text(path, &text)
}

/// Writes a cloud as XYZ or vertex-only PLY, plus a `.prov` sidecar when the
/// cloud carries provenance.
pub fn save_cloud(cloud: &PointCloud, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let text = match extension(path).as_str() {
        "xyz" | "txt" => format_xyz(cloud.points()),
        "ply" => format_ply(cloud.points(), &[]),
        other => {
            return Err(Error::Parse(format!(
                "unsupported cloud extension '{other}'"
            )))
        }
    };
    write_text(path, &text)?;
    if let Some(p) = cloud.provenance() {
        save_provenance(p, provenance_path(path))?;
    }
    Ok(())
}

/// `<cloud path>.prov`
pub fn provenance_path(cloud_path: &Path) -> std::path::PathBuf {
    let mut s = cloud_path.as_os_str().to_owned();
    s.push(".prov");
    s.into()
}

pub fn load_provenance(path: impl AsRef<Path>) -> Result<Vec<usize>> {
    load_index_list(path)
}

pub fn save_provenance(indices: &[usize], path: impl AsRef<Path>) -> Result<()> {
    save_index_list(indices, path)
}

/// One non-negative integer per line; blank lines and `#` comments skipped.
pub fn load_index_list(path: impl AsRef<Path>) -> Result<Vec<usize>> {
    let path = path.as_ref();
    let text = read_text(path)?;
    let mut out = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let t = strip_comment(line);
        if t.is_empty() {
            continue;
        }
        out.push(t.parse::<usize>().map_err(|_| {
            Error::Parse(format!("{}:{}: bad index '{t}'", path.display(), ln + 1))
        })?);
    }
    Ok(out)
}

pub fn save_index_list(indices: &[usize], path: impl AsRef<Path>) -> Result<()> {
    let mut s = String::with_capacity(indices.len() * 6);
    for i in indices {
        writeln!(s, "{i}").unwrap();
    }
    write_text(path.as_ref(), &s)
}

fn strip_comment(line: &str) -> &str {
    line.split('#').next().unwrap_or("").trim()
}

fn parse_f64(tok: &str) -> Result<f64> {
    tok.parse::<f64>()
        .map_err(|_| Error::Parse(format!("bad number '{tok}'")))
}

fn parse_usize(tok: &str) -> Result<usize> {
    tok.parse::<usize>()
        .map_err(|_| Error::Parse(format!("bad index '{tok}'")))
}

/// Splits an n-gon into a triangle fan.
fn push_polygon(poly: &[usize], faces: &mut Vec<[usize; 3]>) -> Result<()> {
    if poly.len() < 3 {
        return Err(Error::Parse(format!(
            "face with {} vertices",
            poly.len()
        )));
    }
    for k in 1..poly.len() - 1 {
        faces.push([poly[0], poly[k], poly[k + 1]]);
    }
    Ok(())
}

/// OFF body split into non-empty, comment-free lines, positioned after the
/// counts line.
struct OffBody<'a> {
    lines: Vec<&'a str>,
    nv: usize,
    nf: usize,
    first_vertex_line: usize,
}

fn off_body(text: &str) -> Result<OffBody<'_>> {
    let lines: Vec<&str> = text
        .lines()
        .map(strip_comment)
        .filter(|l| !l.is_empty())
        .collect();
    let first = lines.first().ok_or_else(|| Error::Parse("empty file".into()))?;
    let rest = first
        .strip_prefix("OFF")
        .ok_or_else(|| Error::Parse("missing OFF header".into()))?
        .trim();
    // Counts either follow the keyword on the same line or sit on the next one.
    let (counts, next) = if rest.is_empty() {
        (
            *lines
                .get(1)
                .ok_or_else(|| Error::Parse("truncated OFF header".into()))?,
            2,
        )
    } else {
        (rest, 1)
    };
    let c: Vec<&str> = counts.split_whitespace().collect();
    if c.len() < 2 {
        return Err(Error::Parse(format!("bad OFF counts line '{counts}'")));
    }
    Ok(OffBody {
        nv: parse_usize(c[0])?,
        nf: parse_usize(c[1])?,
        lines,
        first_vertex_line: next,
    })
}

fn read_off_vertices(b: &OffBody<'_>) -> Result<Vec<Vec3>> {
    (0..b.nv)
        .map(|i| {
            let line = b
                .lines
                .get(b.first_vertex_line + i)
                .ok_or_else(|| Error::Parse("truncated OFF vertex block".into()))?;
            let t: Vec<&str> = line.split_whitespace().collect();
            if t.len() < 3 {
                return Err(Error::Parse(format!("vertex {i}: expected 'x y z'")));
            }
            Ok(Vec3::new(parse_f64(t[0])?, parse_f64(t[1])?, parse_f64(t[2])?))
        })
        .collect()
}

fn parse_off_vertices(text: &str) -> Result<Vec<Vec3>> {
    read_off_vertices(&off_body(text)?)
}

fn parse_off(text: &str) -> Result<(Vec<Vec3>, Vec<[usize; 3]>)> {
    let b = off_body(text)?;
    let verts = read_off_vertices(&b)?;
    let first_face = b.first_vertex_line + b.nv;
    let mut faces = Vec::with_capacity(b.nf);
    for fi in 0..b.nf {
        let line = b
            .lines
            .get(first_face + fi)
            .ok_or_else(|| Error::Parse(format!("missing face {fi}")))?;
        let toks: Vec<&str> = line.split_whitespace().collect();
        let k = parse_usize(toks[0])?;
        if toks.len() < k + 1 {
            return Err(Error::Parse(format!("face {fi} is truncated")));
        }
        // Trailing tokens (per-face colour) are ignored.
        let poly = toks[1..=k]
            .iter()
            .map(|t| parse_usize(t))
            .collect::<Result<Vec<_>>>()?;
        if let Some(&bad) = poly.iter().find(|&&i| i >= b.nv) {
            return Err(Error::Parse(format!(
                "face {fi} references vertex {bad} but only {} exist",
                b.nv
            )));
        }
        push_polygon(&poly, &mut faces)?;
    }
    Ok((verts, faces))
}

struct PlyElement {
    name: String,
    count: usize,
    /// (property name, is list)
    props: Vec<(String, bool)>,
}

fn parse_ply(text: &str) -> Result<(Vec<Vec3>, Vec<[usize; 3]>)> {
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some("ply") {
        return Err(Error::Parse("missing 'ply' magic".into()));
    }
    let mut elements: Vec<PlyElement> = Vec::new();
    let mut ascii = false;
    loop {
        let line = lines
            .next()
            .ok_or_else(|| Error::Parse("PLY header not terminated".into()))?
            .trim();
        let toks: Vec<&str> = line.split_whitespace().collect();
        match toks.first().copied() {
            Some("format") => {
                ascii = toks.get(1) == Some(&"ascii");
                if !ascii {
                    return Err(Error::Parse("only ascii PLY is supported".into()));
                }
            }
            Some("element") => {
                if toks.len() < 3 {
                    return Err(Error::Parse(format!("bad element line '{line}'")));
                }
                elements.push(PlyElement {
                    name: toks[1].to_string(),
                    count: parse_usize(toks[2])?,
                    props: Vec::new(),
                });
            }
            Some("property") => {
                let el = elements
                    .last_mut()
                    .ok_or_else(|| Error::Parse("property before element".into()))?;
                let is_list = toks.get(1) == Some(&"list");
                let name = toks
                    .last()
                    .ok_or_else(|| Error::Parse("empty property".into()))?;
                el.props.push((name.to_string(), is_list));
            }
            Some("end_header") => break,
            _ => {}
        }
    }
    if !ascii {
        return Err(Error::Parse("PLY format line missing".into()));
    }
    let mut verts = Vec::new();
    let mut faces = Vec::new();
    let mut body = lines.map(str::trim).filter(|l| !l.is_empty());
    for el in &elements {
        let xyz = if el.name == "vertex" {
            let find = |n: &str| el.props.iter().position(|(p, _)| p == n);
            match (find("x"), find("y"), find("z")) {
                (Some(x), Some(y), Some(z)) => Some([x, y, z]),
                _ => return Err(Error::Parse("vertex element lacks x/y/z".into())),
            }
        } else {
            None
        };
        for r in 0..el.count {
            let line = body
                .next()
                .ok_or_else(|| Error::Parse(format!("missing {} row {r}", el.name)))?;
            let toks: Vec<&str> = line.split_whitespace().collect();
            if let Some([x, y, z]) = xyz {
                if toks.len() < el.props.len() {
                    return Err(Error::Parse(format!("short vertex row {r}")));
                }
                verts.push(Vec3::new(
                    parse_f64(toks[x])?,
                    parse_f64(toks[y])?,
                    parse_f64(toks[z])?,
                ));
            } else if el.name == "face" {
                // First list property holds the indices.
                let k = parse_usize(toks.first().copied().unwrap_or(""))?;
                if toks.len() < k + 1 {
                    return Err(Error::Parse(format!("short face row {r}")));
                }
                let poly = toks[1..=k]
                    .iter()
                    .map(|t| parse_usize(t))
                    .collect::<Result<Vec<_>>>()?;
                push_polygon(&poly, &mut faces)?;
            }
        }
    }
    let nv = verts.len();
    if let Some(f) = faces.iter().find(|f| f.iter().any(|&i| i >= nv)) {
        return Err(Error::Parse(format!(
            "face {f:?} references vertex out of range [0, {nv})"
        )));
    }
    Ok((verts, faces))
}

fn parse_xyz(text: &str) -> Result<Vec<Vec3>> {
    let mut pts = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let t = strip_comment(line);
        if t.is_empty() {
            continue;
        }
        let toks: Vec<&str> = t.split_whitespace().collect();
        if toks.len() < 3 {
            return Err(Error::Parse(format!("line {}: expected 'x y z'", ln + 1)));
        }
        pts.push(Vec3::new(
            parse_f64(toks[0])?,
            parse_f64(toks[1])?,
            parse_f64(toks[2])?,
        ));
    }
    if pts.is_empty() {
        return Err(Error::Parse("no points".into()));
    }
    Ok(pts)
}

fn format_off(verts: &[Vec3], faces: &[[usize; 3]]) -> String {
    let mut s = String::new();
    writeln!(s, "OFF\n{} {} 0", verts.len(), faces.len()).unwrap();
    for v in verts {
        writeln!(s, "{} {} {}", v.x, v.y, v.z).unwrap();
    }
    for f in faces {
        writeln!(s, "3 {} {} {}", f[0], f[1], f[2]).unwrap();
    }
    s
}

fn format_ply(verts: &[Vec3], faces: &[[usize; 3]]) -> String {
    let mut s = String::new();
    s.push_str("ply\nformat ascii 1.0\n");
    writeln!(s, "element vertex {}", verts.len()).unwrap();
    s.push_str("property double x\nproperty double y\nproperty double z\n");
    if !faces.is_empty() {
        writeln!(s, "element face {}", faces.len()).unwrap();
        s.push_str("property list uchar int vertex_indices\n");
    }
    s.push_str("end_header\n");
    for v in verts {
        writeln!(s, "{} {} {}", v.x, v.y, v.z).unwrap();
    }
    for f in faces {
        writeln!(s, "3 {} {} {}", f[0], f[1], f[2]).unwrap();
    }
    s
}

fn format_xyz(pts: &[Vec3]) -> String {
    let mut s = String::new();
    for p in pts {
        writeln!(s, "{} {} {}", p.x, p.y, p.z).unwrap();
    }
    s
}
