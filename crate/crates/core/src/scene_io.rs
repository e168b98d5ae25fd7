//! Scene archive: a directory holding
//!
//! * `header.txt`  - format version, class table, default grid
//! * `points.bin`  - u64 count, then per point 3 x f64 position, u16 label, i32 instance (-1 = none)
//! * `graph.txt`   - `node id x y z` and `edge id id` records
//! * `cameras.bin` - u32 viewpoint count; per viewpoint u32 id, u32 view count;
//!   per view 9 x f64 intrinsics, 12 x f64 extrinsics (rotation rows, translation), u32 H, u32 W
//! * `truth.txt`   - optional generator ground truth
//!
//! Floats are written at full precision so save/load is bit-exact.

use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::Matrix3;

use crate::binio::{read_file, read_text, write_file, ByteReader, ByteWriter, Fields};
use crate::camera::Camera;
use crate::error::{Error, Result};
use crate::grid::{GridSpec, Vec3};
use crate::scene::{ClassEntry, ClassTable, Scene, SceneGraph, SceneHeader, SemanticPointCloud};
use crate::synth::SceneTruth;

pub const FORMAT_VERSION: u32 = 1;

pub fn save_scene(scene: &Scene, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_file(&dir.join("header.txt"), header_text(&scene.header).as_bytes())?;
    write_file(&dir.join("points.bin"), &points_bytes(&scene.cloud))?;
    write_file(&dir.join("graph.txt"), graph_text(&scene.graph).as_bytes())?;
    write_file(&dir.join("cameras.bin"), &cameras_bytes(&scene.cameras))?;
    let truth_path = dir.join("truth.txt");
    match &scene.truth {
        Some(t) => write_file(&truth_path, t.to_text().as_bytes())?,
        None => {
            if truth_path.exists() {
                std::fs::remove_file(&truth_path).map_err(|e| Error::io(&truth_path, e))?;
            }
        }
    }
    Ok(())
}

pub fn load_scene(dir: &Path) -> Result<Scene> {
    let header = parse_header(&read_text(&dir.join("header.txt"))?)?;
    let cloud = parse_points(&read_file(&dir.join("points.bin"))?)?;
    let graph = parse_graph(&read_text(&dir.join("graph.txt"))?)?;
    let cameras = parse_cameras(&read_file(&dir.join("cameras.bin"))?)?;
    let truth_path = dir.join("truth.txt");
    let truth = if truth_path.exists() {
        Some(SceneTruth::from_text(&read_text(&truth_path)?)?)
    } else {
        None
    };
    let scene = Scene {
        header,
        cloud,
        graph,
        cameras,
        truth,
    };
    scene.validate()?;
    Ok(scene)
}

pub(crate) fn header_text(h: &SceneHeader) -> String {
    let g = &h.grid;
    let mut s = format!("ver-scene {}\n", h.version);
    s += &format!(
        "grid {} {} {} {} {} {} {}\n",
        g.range(0).0,
        g.range(0).1,
        g.range(1).0,
        g.range(1).1,
        g.range(2).0,
        g.range(2).1,
        g.resolution()
    );
    for (i, e) in h.classes.entries.iter().enumerate() {
        s += &format!("class {i} {} {}\n", e.name, if e.stuff { "stuff" } else { "object" });
    }
    s
}

pub(crate) fn parse_header(text: &str) -> Result<SceneHeader> {
    let mut version = None;
    let mut grid = None;
    let mut entries = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut f = Fields::new(line, format!("header.txt line {}", n + 1));
        match f.word("record")? {
            "ver-scene" => {
                let v: u32 = f.parse("version")?;
                if v != FORMAT_VERSION {
                    return Err(Error::parse("header.txt", format!("unsupported version {v}")));
                }
                version = Some(v);
            }
            "grid" => {
                let mut v = [0.0; 7];
                for (i, slot) in v.iter_mut().enumerate() {
                    *slot = f.parse(["x_min", "x_max", "y_min", "y_max", "z_min", "z_max", "resolution"][i])?;
                }
                grid = Some(GridSpec::new((v[0], v[1]), (v[2], v[3]), (v[4], v[5]), v[6])?);
            }
            "class" => {
                let id: usize = f.parse("class id")?;
                if id != entries.len() {
                    return Err(Error::parse(
                        format!("header.txt line {}", n + 1),
                        format!("class ids must be dense, expected {}", entries.len()),
                    ));
                }
                let name = f.word("class name")?.to_string();
                let stuff = match f.word("class kind")? {
                    "stuff" => true,
                    "object" => false,
                    k => return Err(Error::parse("header.txt", format!("unknown class kind '{k}'"))),
                };
                entries.push(ClassEntry { name, stuff });
            }
            other => return Err(Error::parse("header.txt", format!("unknown record '{other}'"))),
        }
        f.end()?;
    }
    let version = version.ok_or_else(|| Error::invalid("header.version", "missing"))?;
    let grid = grid.ok_or_else(|| Error::invalid("header.grid", "missing"))?;
    if entries.is_empty() {
        return Err(Error::invalid("header.classes", "empty class table"));
    }
    Ok(SceneHeader {
        version,
        classes: ClassTable { entries },
        grid,
    })
}

pub(crate) fn points_bytes(cloud: &SemanticPointCloud) -> Vec<u8> {
    let mut w = ByteWriter::new();
    w.u64(cloud.len() as u64);
    for i in 0..cloud.len() {
        let p = cloud.points[i];
        w.f64(p.x);
        w.f64(p.y);
        w.f64(p.z);
        w.u16(cloud.labels[i]);
        w.i32(cloud.instances[i].map_or(-1, |v| v as i32));
    }
    w.buf
}

pub(crate) fn parse_points(data: &[u8]) -> Result<SemanticPointCloud> {
    let mut r = ByteReader::new(data, "points.bin");
    let n = r.u64("count")? as usize;
    if n.checked_mul(30).is_none_or(|b| b + 8 != data.len()) {
        return Err(Error::parse("points.bin", format!("count {n} does not match file size")));
    }
    let mut cloud = SemanticPointCloud::default();
    for _ in 0..n {
        let p = Vec3::new(r.f64("x")?, r.f64("y")?, r.f64("z")?);
        let label = r.u16("label")?;
        let inst = r.i32("instance")?;
        let inst = match inst {
            -1 => None,
            v if v >= 0 => Some(v as u32),
            v => return Err(Error::invalid("points.instance", format!("{v} is negative"))),
        };
        cloud.push(p, label, inst);
    }
    r.finish()?;
    Ok(cloud)
}

pub(crate) fn graph_text(g: &SceneGraph) -> String {
    let mut s = String::new();
    for (id, p) in g.nodes() {
        s += &format!("node {id} {} {} {}\n", p.x, p.y, p.z);
    }
    for (a, b) in g.edges() {
        s += &format!("edge {a} {b}\n");
    }
    s
}

pub(crate) fn parse_graph(text: &str) -> Result<SceneGraph> {
    let mut g = SceneGraph::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut f = Fields::new(line, format!("graph.txt line {}", n + 1));
        match f.word("record")? {
            "node" => {
                let id = f.parse("node id")?;
                let p = Vec3::new(f.parse("x")?, f.parse("y")?, f.parse("z")?);
                g.add_node(id, p);
            }
            "edge" => {
                let a = f.parse("edge endpoint")?;
                let b = f.parse("edge endpoint")?;
                g.add_edge(a, b);
            }
            other => return Err(Error::parse("graph.txt", format!("unknown record '{other}'"))),
        }
        f.end()?;
    }
    Ok(g)
}

pub(crate) fn cameras_bytes(cams: &BTreeMap<u32, Vec<Camera>>) -> Vec<u8> {
    let mut w = ByteWriter::new();
    w.u32(cams.len() as u32);
    for (id, rig) in cams {
        w.u32(*id);
        w.u32(rig.len() as u32);
        for cam in rig {
            let k = cam.intrinsics();
            let r = cam.rotation();
            for i in 0..3 {
                for j in 0..3 {
                    w.f64(k[(i, j)]);
                }
            }
            for i in 0..3 {
                for j in 0..3 {
                    w.f64(r[(i, j)]);
                }
            }
            for v in cam.translation().iter() {
                w.f64(*v);
            }
            w.u32(cam.height());
            w.u32(cam.width());
        }
    }
    w.buf
}

pub(crate) fn parse_cameras(data: &[u8]) -> Result<BTreeMap<u32, Vec<Camera>>> {
    let mut r = ByteReader::new(data, "cameras.bin");
    let n = r.u32("viewpoint count")?;
    let mut out = BTreeMap::new();
    for _ in 0..n {
        let id = r.u32("viewpoint id")?;
        let views = r.u32("view count")?;
        let mut rig = Vec::with_capacity(views as usize);
        for _ in 0..views {
            let mut k = Matrix3::zeros();
            let mut rot = Matrix3::zeros();
            for i in 0..3 {
                for j in 0..3 {
                    k[(i, j)] = r.f64("intrinsics")?;
                }
            }
            for i in 0..3 {
                for j in 0..3 {
                    rot[(i, j)] = r.f64("rotation")?;
                }
            }
            let t = Vec3::new(r.f64("translation")?, r.f64("translation")?, r.f64("translation")?);
            let h = r.u32("height")?;
            let wd = r.u32("width")?;
            rig.push(Camera::new(k, rot, t, h, wd).map_err(|e| match e {
                Error::Validation { field, message } => Error::Validation {
                    field: format!("cameras[{id}].{field}"),
                    message,
                },
                other => other,
            })?);
        }
        out.insert(id, rig);
    }
    r.finish()?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::camera::Camera;

    fn minimal() -> Scene {
        let mut cloud = SemanticPointCloud::default();
        cloud.push(Vec3::new(0.1, 0.2, 0.3), crate::scene::FLOOR, None);
        let mut graph = SceneGraph::new();
        graph.add_node(0, Vec3::new(0.0, 0.0, 1.5));
        let cams = BTreeMap::from([(0, vec![Camera::looking(Vec3::new(0.0, 0.0, 1.5), 0.0, 0.0, 1.0, 8, 8)])]);
        Scene {
            header: SceneHeader::default(),
            cloud,
            graph,
            cameras: cams,
            truth: None,
        }
    }

    #[test]
    fn minimal_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let s = minimal();
        save_scene(&s, dir.path()).unwrap();
        assert_eq!(load_scene(dir.path()).unwrap(), s);
    }

    #[test]
    fn missing_edge_endpoint_is_named() {
        let dir = tempfile::tempdir().unwrap();
        let mut s = minimal();
        s.graph.add_edge(0, 7);
        save_scene(&s, dir.path()).unwrap();
        let err = load_scene(dir.path()).unwrap_err().to_string();
        assert!(err.contains("edge(0,7)"), "{err}");
    }

    #[test]
    fn malformed_points_rejected() {
        let err = parse_points(&[1, 0, 0, 0, 0, 0, 0, 0, 9]).unwrap_err();
        assert!(matches!(err, Error::Parse { .. }));
        let err = parse_graph("node 1 0.0 zero 1").unwrap_err().to_string();
        assert!(err.contains("line 1"), "{err}");
    }
}
