//! Seeded synthetic indoor scenes: a row of axis-aligned cuboid rooms joined
//! by door passages, box-shaped furniture, surface-sampled labeled points, a
//! viewpoint graph with panoramic camera rigs, and the analytic ground truth
//! the annotation pipeline is checked against.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_2, PI};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::annotation::{VoxelGrid, FREE, UNKNOWN};
use crate::binio::Fields;
use crate::camera::{panorama_rig, Camera};
use crate::error::{Error, Result};
use crate::grid::{GridSpec, Vec3};
use crate::scene::{
    ClassId, NodeId, Scene, SceneGraph, SceneHeader, SemanticPointCloud, CEILING, FLOOR,
    FOREGROUND_CLASSES, WALL,
};
use crate::shapes::{clip_convex, polygon_area, OrientedBox, RoomLayout};

/// Height of every viewpoint (camera center) above the floor.
pub const CAMERA_HEIGHT: f64 = 1.5;
const ROOM_GAP: f64 = 0.3;
const DOOR_WIDTH: f64 = 1.0;
const DOOR_HEIGHT: f64 = 2.1;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthParams {
    pub seed: u64,
    pub n_rooms: usize,
    pub n_objects: usize,
    /// Surface sampling density, points per square meter.
    pub density: f64,
    pub viewpoints_per_room: usize,
    /// Panorama: headings per elevation ring.
    pub headings: usize,
    /// Panorama elevation angles, radians.
    pub pitches: Vec<f64>,
    pub fov: f64,
    pub image_size: (u32, u32),
}

impl SynthParams {
    pub fn new(seed: u64, n_rooms: usize, n_objects: usize) -> Self {
        Self {
            seed,
            n_rooms,
            n_objects,
            density: 400.0,
            viewpoints_per_room: 2,
            headings: 12,
            pitches: vec![-PI / 6.0, 0.0, PI / 6.0],
            fov: PI / 3.0,
            image_size: (48, 48),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruthRoom {
    /// Interior box; the floor is at `min.z`.
    pub min: Vec3,
    pub max: Vec3,
}

impl TruthRoom {
    pub fn layout(&self) -> RoomLayout {
        let c = 0.5 * (self.min + self.max);
        let e = self.max - self.min;
        RoomLayout {
            center: c,
            width: e.x,
            length: e.y,
            height: e.z,
            rotation: 0.0,
        }
    }

    pub fn contains(&self, p: &Vec3) -> bool {
        (0..3).all(|a| p[a] > self.min[a] && p[a] < self.max[a])
    }
}

/// Opening through the two facing walls of neighboring rooms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruthDoor {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
    pub top: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruthObject {
    pub instance: u32,
    pub class: ClassId,
    pub center: Vec3,
    pub half_extents: Vec3,
    pub yaw: f64,
    pub room: usize,
}

impl TruthObject {
    pub fn as_box(&self) -> OrientedBox {
        OrientedBox {
            center: self.center,
            half_extents: self.half_extents,
            yaw: self.yaw,
            class: self.class,
            instance: Some(self.instance),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SceneTruth {
    pub rooms: Vec<TruthRoom>,
    pub doors: Vec<TruthDoor>,
    pub objects: Vec<TruthObject>,
    pub viewpoint_room: BTreeMap<NodeId, usize>,
}

/// Axis-aligned rectangle on a plane of constant coordinate, used for the
/// analytic surface rasterization.
#[derive(Debug, Clone, Copy)]
struct PlaneRect {
    axis: usize,
    at: f64,
    lo: Vec3,
    hi: Vec3,
    label: ClassId,
    hole: Option<(Vec3, Vec3)>,
}

impl SceneTruth {
    pub fn room_of(&self, p: &Vec3) -> Option<usize> {
        self.rooms.iter().position(|r| r.contains(p))
    }

    fn in_passage(&self, p: &Vec3) -> bool {
        self.doors.iter().any(|d| {
            p.x >= d.x0 && p.x <= d.x1 && p.y > d.y0 && p.y < d.y1 && p.z > 0.0 && p.z < d.top
        })
    }

    fn planes(&self) -> Vec<PlaneRect> {
        let mut out = Vec::new();
        for r in &self.rooms {
            let (a, b) = (r.min, r.max);
            out.push(PlaneRect { axis: 2, at: a.z, lo: a, hi: Vec3::new(b.x, b.y, a.z), label: FLOOR, hole: None });
            out.push(PlaneRect { axis: 2, at: b.z, lo: Vec3::new(a.x, a.y, b.z), hi: b, label: CEILING, hole: None });
            for (x, is_max) in [(a.x, false), (b.x, true)] {
                let hole = self
                    .doors
                    .iter()
                    .find(|d| if is_max { (d.x0 - x).abs() < 1e-9 } else { (d.x1 - x).abs() < 1e-9 })
                    .map(|d| (Vec3::new(x, d.y0, a.z), Vec3::new(x, d.y1, d.top)));
                out.push(PlaneRect {
                    axis: 0,
                    at: x,
                    lo: Vec3::new(x, a.y, a.z),
                    hi: Vec3::new(x, b.y, b.z),
                    label: WALL,
                    hole,
                });
            }
            for y in [a.y, b.y] {
                out.push(PlaneRect {
                    axis: 1,
                    at: y,
                    lo: Vec3::new(a.x, y, a.z),
                    hi: Vec3::new(b.x, y, b.z),
                    label: WALL,
                    hole: None,
                });
            }
        }
        for d in &self.doors {
            out.push(PlaneRect {
                axis: 2,
                at: 0.0,
                lo: Vec3::new(d.x0, d.y0, 0.0),
                hi: Vec3::new(d.x1, d.y1, 0.0),
                label: FLOOR,
                hole: None,
            });
            out.push(PlaneRect {
                axis: 2,
                at: d.top,
                lo: Vec3::new(d.x0, d.y0, d.top),
                hi: Vec3::new(d.x1, d.y1, d.top),
                label: WALL,
                hole: None,
            });
            for y in [d.y0, d.y1] {
                out.push(PlaneRect {
                    axis: 1,
                    at: y,
                    lo: Vec3::new(d.x0, y, 0.0),
                    hi: Vec3::new(d.x1, y, d.top),
                    label: WALL,
                    hole: None,
                });
            }
        }
        out
    }

    /// Analytic occupancy on `spec` (world frame).
    ///
    /// A cell whose center lies inside an object takes its class (smallest
    /// object first). Otherwise the cell takes the label with the largest
    /// exact surface area inside it, counting room planes (minus door
    /// openings and the floor under objects) and object faces, provided that
    /// area reaches `min_area`. Remaining cells are free inside rooms and
    /// door passages and unknown elsewhere.
    pub fn oracle_occupancy(&self, spec: &GridSpec, min_area: f64) -> VoxelGrid {
        let boxes: Vec<OrientedBox> = self.objects.iter().map(|o| o.as_box()).collect();
        let planes = self.planes();
        let mut grid = VoxelGrid::filled(*spec, UNKNOWN);
        let mut areas: Vec<(ClassId, f64)> = Vec::new();
        for idx in 0..spec.len() {
            let cell = spec.cell_of(idx);
            let center = spec.cell_center(cell);
            let inside = boxes
                .iter()
                .filter(|b| b.contains(&center, 0.0))
                .min_by(|a, b| a.volume().total_cmp(&b.volume()));
            if let Some(b) = inside {
                grid.labels[idx] = b.class;
                continue;
            }
            areas.clear();
            let (lo, hi) = spec.cell_bounds(cell);
            for pl in &planes {
                let a = plane_area(pl, spec, cell, &lo, &hi, &boxes);
                if a > 0.0 {
                    add_area(&mut areas, pl.label, a);
                }
            }
            for b in &boxes {
                let a = box_surface_area(b, spec, cell, &lo, &hi);
                if a > 0.0 {
                    add_area(&mut areas, b.class, a);
                }
            }
            let best = areas
                .iter()
                .copied()
                .max_by(|x, y| x.1.total_cmp(&y.1).then(y.0.cmp(&x.0)))
                .filter(|&(_, a)| a >= min_area);
            grid.labels[idx] = match best {
                Some((label, _)) => label,
                None if self.room_of(&center).is_some() || self.in_passage(&center) => FREE,
                None => UNKNOWN,
            };
        }
        grid
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for r in &self.rooms {
            s += &format!("room {} {} {} {} {} {}\n", r.min.x, r.min.y, r.min.z, r.max.x, r.max.y, r.max.z);
        }
        for d in &self.doors {
            s += &format!("door {} {} {} {} {}\n", d.x0, d.x1, d.y0, d.y1, d.top);
        }
        for o in &self.objects {
            s += &format!(
                "object {} {} {} {} {} {} {} {} {} {}\n",
                o.instance,
                o.class,
                o.center.x,
                o.center.y,
                o.center.z,
                o.half_extents.x,
                o.half_extents.y,
                o.half_extents.z,
                o.yaw,
                o.room
            );
        }
        for (v, r) in &self.viewpoint_room {
            s += &format!("viewpoint {v} {r}\n");
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut t = SceneTruth::default();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut f = Fields::new(line, format!("truth.txt line {}", n + 1));
            let v3 = |f: &mut Fields, what: &str| -> Result<Vec3> {
                Ok(Vec3::new(f.parse(what)?, f.parse(what)?, f.parse(what)?))
            };
            match f.word("record")? {
                "room" => {
                    let min = v3(&mut f, "room min")?;
                    let max = v3(&mut f, "room max")?;
                    t.rooms.push(TruthRoom { min, max });
                }
                "door" => t.doors.push(TruthDoor {
                    x0: f.parse("door x0")?,
                    x1: f.parse("door x1")?,
                    y0: f.parse("door y0")?,
                    y1: f.parse("door y1")?,
                    top: f.parse("door top")?,
                }),
                "object" => {
                    let instance = f.parse("instance")?;
                    let class = f.parse("class")?;
                    let center = v3(&mut f, "center")?;
                    let half_extents = v3(&mut f, "half extents")?;
                    let yaw = f.parse("yaw")?;
                    let room = f.parse("room")?;
                    t.objects.push(TruthObject { instance, class, center, half_extents, yaw, room });
                }
                "viewpoint" => {
                    let id = f.parse("viewpoint id")?;
                    let room = f.parse("room")?;
                    t.viewpoint_room.insert(id, room);
                }
                other => return Err(Error::parse("truth.txt", format!("unknown record '{other}'"))),
            }
            f.end()?;
        }
        Ok(t)
    }
}

fn add_area(areas: &mut Vec<(ClassId, f64)>, label: ClassId, a: f64) {
    match areas.iter_mut().find(|e| e.0 == label) {
        Some(e) => e.1 += a,
        None => areas.push((label, a)),
    }
}

fn overlap(a0: f64, a1: f64, b0: f64, b1: f64) -> f64 {
    (a1.min(b1) - a0.max(b0)).max(0.0)
}

fn square(lo: &Vec3, hi: &Vec3) -> [[f64; 2]; 4] {
    [[lo.x, lo.y], [hi.x, lo.y], [hi.x, hi.y], [lo.x, hi.y]]
}

/// Area of a room plane inside the cell, less door openings and, for
/// floors, the footprints of objects standing on them.
fn plane_area(pl: &PlaneRect, spec: &GridSpec, cell: [usize; 3], lo: &Vec3, hi: &Vec3, boxes: &[OrientedBox]) -> f64 {
    // the plane must quantize into this cell along its normal axis
    if spec.axis_cell(pl.axis, pl.at) != Some(cell[pl.axis]) {
        return 0.0;
    }
    let (a1, a2) = match pl.axis {
        0 => (1, 2),
        1 => (0, 2),
        _ => (0, 1),
    };
    let (r1, r2) = ((lo[a1].max(pl.lo[a1]), hi[a1].min(pl.hi[a1])), (lo[a2].max(pl.lo[a2]), hi[a2].min(pl.hi[a2])));
    if r1.1 <= r1.0 || r2.1 <= r2.0 {
        return 0.0;
    }
    let mut area = (r1.1 - r1.0) * (r2.1 - r2.0);
    if let Some((h0, h1)) = pl.hole {
        area -= overlap(r1.0, r1.1, h0[a1], h1[a1]) * overlap(r2.0, r2.1, h0[a2], h1[a2]);
    }
    if pl.label == FLOOR && pl.axis == 2 {
        let rect = [[r1.0, r2.0], [r1.1, r2.0], [r1.1, r2.1], [r1.0, r2.1]];
        for b in boxes {
            if (b.z_range().0 - pl.at).abs() < 1e-9 {
                area -= polygon_area(&clip_convex(&b.footprint(), &rect));
            }
        }
    }
    area.max(0.0)
}

/// Area of an object's sampled faces (top and sides) inside the cell.
fn box_surface_area(b: &OrientedBox, spec: &GridSpec, cell: [usize; 3], lo: &Vec3, hi: &Vec3) -> f64 {
    let (z0, z1) = b.z_range();
    let zov = overlap(z0, z1, lo.z, hi.z);
    let fp = b.footprint();
    let mut area = 0.0;
    if zov > 0.0 {
        for i in 0..4 {
            area += segment_in_rect(fp[i], fp[(i + 1) % 4], lo, hi) * zov;
        }
    }
    if spec.axis_cell(2, z1) == Some(cell[2]) {
        area += polygon_area(&clip_convex(&fp, &square(lo, hi)));
    }
    area
}

/// Length of the segment `p -> q` inside the horizontal rectangle.
fn segment_in_rect(p: [f64; 2], q: [f64; 2], lo: &Vec3, hi: &Vec3) -> f64 {
    let d = [q[0] - p[0], q[1] - p[1]];
    let (mut t0, mut t1) = (0.0f64, 1.0f64);
    for a in 0..2 {
        if d[a].abs() < 1e-15 {
            if p[a] < lo[a] || p[a] > hi[a] {
                return 0.0;
            }
            continue;
        }
        let (mut ta, mut tb) = ((lo[a] - p[a]) / d[a], (hi[a] - p[a]) / d[a]);
        if ta > tb {
            std::mem::swap(&mut ta, &mut tb);
        }
        t0 = t0.max(ta);
        t1 = t1.min(tb);
    }
    if t1 <= t0 {
        0.0
    } else {
        (t1 - t0) * (d[0] * d[0] + d[1] * d[1]).sqrt()
    }
}

/// Deterministic given `params`; the scene carries its [`SceneTruth`].
pub fn generate_synthetic_scene(params: &SynthParams) -> Result<Scene> {
    if params.n_rooms == 0 {
        return Err(Error::invalid("n_rooms", "at least one room is required"));
    }
    if params.viewpoints_per_room == 0 {
        return Err(Error::invalid("viewpoints_per_room", "at least one viewpoint per room"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut truth = SceneTruth::default();

    let mut x = 0.0;
    for _ in 0..params.n_rooms {
        let w: f64 = rng.random_range(4.0..6.5);
        let mut l: f64 = rng.random_range(3.5..6.0);
        if (w - l).abs() < 0.6 {
            l = if l > 4.7 { w - 0.6 } else { w + 0.6 };
            l = l.clamp(3.2, 6.6);
        }
        let h: f64 = rng.random_range(2.6..3.1);
        let oy: f64 = rng.random_range(-0.4..0.4);
        truth.rooms.push(TruthRoom {
            min: Vec3::new(x, oy - 0.5 * l, 0.0),
            max: Vec3::new(x + w, oy + 0.5 * l, h),
        });
        x += w + ROOM_GAP;
    }
    for pair in truth.rooms.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        let lo = a.min.y.max(b.min.y) + 0.4;
        let hi = a.max.y.min(b.max.y) - 0.4 - DOOR_WIDTH;
        let y0 = if hi > lo { rng.random_range(lo..hi) } else { 0.5 * (lo + hi) };
        truth.doors.push(TruthDoor {
            x0: a.max.x,
            x1: b.min.x,
            y0,
            y1: y0 + DOOR_WIDTH,
            top: DOOR_HEIGHT,
        });
    }

    let mut graph = SceneGraph::new();
    let mut next_id: NodeId = 0;
    let mut room_nodes: Vec<Vec<NodeId>> = Vec::new();
    for (ri, r) in truth.rooms.iter().enumerate() {
        let k = params.viewpoints_per_room;
        let w = r.max.x - r.min.x;
        let cy = 0.5 * (r.min.y + r.max.y);
        let ly = r.max.y - r.min.y;
        let mut ids = Vec::new();
        for i in 0..k {
            let px = r.min.x + w * (i as f64 + 0.5) / k as f64;
            let py = cy + rng.random_range(-0.15..0.15) * ly;
            graph.add_node(next_id, Vec3::new(px, py, r.min.z + CAMERA_HEIGHT));
            truth.viewpoint_room.insert(next_id, ri);
            ids.push(next_id);
            next_id += 1;
        }
        for i in 0..ids.len() {
            for j in i + 1..ids.len() {
                graph.add_edge(ids[i], ids[j]);
            }
        }
        room_nodes.push(ids);
    }
    for r in 1..room_nodes.len() {
        graph.add_edge(*room_nodes[r - 1].last().unwrap(), room_nodes[r][0]);
    }

    for i in 0..params.n_objects {
        let room = i % params.n_rooms;
        if let Some(obj) = place_object(&mut rng, &truth, &graph, room, i as u32) {
            truth.objects.push(obj);
        }
    }

    let cloud = sample_surfaces(&mut rng, &truth, params.density);
    let mut cameras: BTreeMap<NodeId, Vec<Camera>> = BTreeMap::new();
    for (&id, &pos) in graph.nodes() {
        cameras.insert(id, panorama_rig(pos, params.headings, &params.pitches, params.fov, params.image_size));
    }
    let scene = Scene {
        header: SceneHeader::default(),
        cloud,
        graph,
        cameras,
        truth: Some(truth),
    };
    scene.validate()?;
    Ok(scene)
}

fn place_object(rng: &mut ChaCha8Rng, truth: &SceneTruth, graph: &SceneGraph, room: usize, instance: u32) -> Option<TruthObject> {
    let r = truth.rooms[room];
    let class = rng.random_range(0..FOREGROUND_CLASSES) as ClassId;
    let a: f64 = rng.random_range(0.25..0.5);
    let b = (a * rng.random_range(1.35..1.9)).min(0.85);
    let (ex, ey) = if rng.random_bool(0.5) { (a, b) } else { (b, a) };
    let ez: f64 = rng.random_range(0.2..0.6);
    let yaw = rng.random_range(-FRAC_PI_2..FRAC_PI_2);
    let radius = (ex * ex + ey * ey).sqrt();
    for _ in 0..400 {
        let lo = Vec3::new(r.min.x + radius + 0.05, r.min.y + radius + 0.05, 0.0);
        let hi = Vec3::new(r.max.x - radius - 0.05, r.max.y - radius - 0.05, 0.0);
        if hi.x <= lo.x || hi.y <= lo.y {
            return None;
        }
        let cx = rng.random_range(lo.x..hi.x);
        let cy = rng.random_range(lo.y..hi.y);
        let clear_of_viewpoints = graph
            .nodes()
            .values()
            .all(|p| ((p.x - cx).powi(2) + (p.y - cy).powi(2)).sqrt() > radius + 0.6);
        let clear_of_objects = truth.objects.iter().all(|o| {
            let ro = (o.half_extents.x.powi(2) + o.half_extents.y.powi(2)).sqrt();
            ((o.center.x - cx).powi(2) + (o.center.y - cy).powi(2)).sqrt() > radius + ro + 0.1
        });
        let clear_of_doors = truth.doors.iter().all(|d| {
            let dx = if cx < d.x0 { d.x0 - cx } else { cx - d.x1 };
            let dy = (cy - 0.5 * (d.y0 + d.y1)).abs() - 0.5 * DOOR_WIDTH;
            dx > radius + 0.8 || dy > radius + 0.3
        });
        if clear_of_viewpoints && clear_of_objects && clear_of_doors {
            return Some(TruthObject {
                instance,
                class,
                center: Vec3::new(cx, cy, r.min.z + ez),
                half_extents: Vec3::new(ex, ey, ez),
                yaw,
                room,
            });
        }
    }
    None
}

/// Jittered stratified samples over the parallelogram `origin + s*e1 + t*e2`.
#[allow(clippy::too_many_arguments)]
fn sample_rect(
    rng: &mut ChaCha8Rng,
    cloud: &mut SemanticPointCloud,
    origin: Vec3,
    e1: Vec3,
    e2: Vec3,
    density: f64,
    label: ClassId,
    instance: Option<u32>,
    keep: &dyn Fn(&Vec3) -> bool,
) {
    let step = density.sqrt();
    let n1 = ((e1.norm() * step).ceil() as usize).max(1);
    let n2 = ((e2.norm() * step).ceil() as usize).max(1);
    for i in 0..n1 {
        for j in 0..n2 {
            let s = (i as f64 + rng.random::<f64>()) / n1 as f64;
            let t = (j as f64 + rng.random::<f64>()) / n2 as f64;
            let p = origin + e1 * s + e2 * t;
            if keep(&p) {
                cloud.push(p, label, instance);
            }
        }
    }
}

fn sample_surfaces(rng: &mut ChaCha8Rng, truth: &SceneTruth, density: f64) -> SemanticPointCloud {
    let mut cloud = SemanticPointCloud::default();
    let boxes: Vec<OrientedBox> = truth.objects.iter().map(|o| o.as_box()).collect();
    let outside_objects = |p: &Vec3| {
        !boxes.iter().any(|b| {
            let l = b.to_local(&Vec3::new(p.x, p.y, b.center.z));
            l.x.abs() < b.half_extents.x && l.y.abs() < b.half_extents.y
        })
    };
    let all = |_: &Vec3| true;
    for r in &truth.rooms {
        let (a, b) = (r.min, r.max);
        let e = b - a;
        let ex = Vec3::new(e.x, 0.0, 0.0);
        let ey = Vec3::new(0.0, e.y, 0.0);
        let ez = Vec3::new(0.0, 0.0, e.z);
        sample_rect(rng, &mut cloud, a, ex, ey, density, FLOOR, None, &outside_objects);
        sample_rect(rng, &mut cloud, Vec3::new(a.x, a.y, b.z), ex, ey, density, CEILING, None, &all);
        for xw in [a.x, b.x] {
            let not_door = |p: &Vec3| {
                !truth.doors.iter().any(|d| {
                    ((d.x0 - xw).abs() < 1e-9 || (d.x1 - xw).abs() < 1e-9)
                        && p.y > d.y0
                        && p.y < d.y1
                        && p.z < d.top
                })
            };
            sample_rect(rng, &mut cloud, Vec3::new(xw, a.y, a.z), ey, ez, density, WALL, None, &not_door);
        }
        for yw in [a.y, b.y] {
            sample_rect(rng, &mut cloud, Vec3::new(a.x, yw, a.z), ex, ez, density, WALL, None, &all);
        }
    }
    for d in &truth.doors {
        let gx = Vec3::new(d.x1 - d.x0, 0.0, 0.0);
        let wy = Vec3::new(0.0, d.y1 - d.y0, 0.0);
        let hz = Vec3::new(0.0, 0.0, d.top);
        sample_rect(rng, &mut cloud, Vec3::new(d.x0, d.y0, 0.0), gx, wy, density, FLOOR, None, &all);
        sample_rect(rng, &mut cloud, Vec3::new(d.x0, d.y0, d.top), gx, wy, density, WALL, None, &all);
        for y in [d.y0, d.y1] {
            sample_rect(rng, &mut cloud, Vec3::new(d.x0, y, 0.0), gx, hz, density, WALL, None, &all);
        }
    }
    for o in &truth.objects {
        let b = o.as_box();
        let (u, v) = b.axes();
        let u = Vec3::new(u[0], u[1], 0.0);
        let v = Vec3::new(v[0], v[1], 0.0);
        let h = o.half_extents;
        let base = o.center - Vec3::new(0.0, 0.0, h.z);
        let top = o.center + Vec3::new(0.0, 0.0, h.z);
        let inst = Some(o.instance);
        sample_rect(rng, &mut cloud, top - u * h.x - v * h.y, u * (2.0 * h.x), v * (2.0 * h.y), density, o.class, inst, &all);
        let up = Vec3::new(0.0, 0.0, 2.0 * h.z);
        for (sign, axis, half, other, ohalf) in [
            (1.0, u, h.x, v, h.y),
            (-1.0, u, h.x, v, h.y),
            (1.0, v, h.y, u, h.x),
            (-1.0, v, h.y, u, h.x),
        ] {
            let origin = base + axis * (sign * half) - other * ohalf;
            sample_rect(rng, &mut cloud, origin, other * (2.0 * ohalf), up, density, o.class, inst, &all);
        }
    }
    cloud
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene_io::{load_scene, save_scene};

    #[test]
    fn deterministic() {
        let p = SynthParams::new(1, 2, 4);
        let a = generate_synthetic_scene(&p).unwrap();
        let b = generate_synthetic_scene(&p).unwrap();
        assert_eq!(a, b);
        let da = tempfile::tempdir().unwrap();
        let db = tempfile::tempdir().unwrap();
        save_scene(&a, da.path()).unwrap();
        save_scene(&b, db.path()).unwrap();
        for f in ["header.txt", "points.bin", "graph.txt", "cameras.bin", "truth.txt"] {
            assert_eq!(std::fs::read(da.path().join(f)).unwrap(), std::fs::read(db.path().join(f)).unwrap());
        }
    }

    #[test]
    fn no_objects_means_stuff_only() {
        let mut p = SynthParams::new(5, 1, 0);
        p.density = 50.0;
        let s = generate_synthetic_scene(&p).unwrap();
        assert!(s.cloud.labels.iter().all(|&l| s.header.classes.is_stuff(l)));
        assert!(s.cloud.instances.iter().all(|i| i.is_none()));
    }

    #[test]
    fn save_load_identity() {
        let mut p = SynthParams::new(9, 3, 6);
        p.density = 60.0;
        let s = generate_synthetic_scene(&p).unwrap();
        let dir = tempfile::tempdir().unwrap();
        save_scene(&s, dir.path()).unwrap();
        assert_eq!(load_scene(dir.path()).unwrap(), s);
    }

    #[test]
    fn graph_connected_and_short_edges() {
        let s = generate_synthetic_scene(&SynthParams::new(3, 4, 8)).unwrap();
        assert!(s.graph.is_connected());
        for (a, b) in s.graph.edges() {
            let d = (s.graph.position(a).unwrap() - s.graph.position(b).unwrap()).norm();
            assert!(d < 4.6, "edge {a}-{b} is {d} m");
        }
        assert_eq!(s.cameras.values().next().unwrap().len(), 36);
    }

    #[test]
    fn objects_inside_their_rooms() {
        let s = generate_synthetic_scene(&SynthParams::new(11, 2, 10)).unwrap();
        let t = s.truth.unwrap();
        for o in &t.objects {
            let r = t.rooms[o.room];
            for c in o.as_box().footprint() {
                assert!(c[0] > r.min.x && c[0] < r.max.x && c[1] > r.min.y && c[1] < r.max.y);
            }
        }
    }
}
