//! Binary annotation records: per viewpoint, three run-length-encoded label
//! grids, the box list and an optional layout. Little-endian throughout.

use crate::annotation::{AnnotationSet, VoxelGrid};
use crate::binio::{ByteReader, ByteWriter};
use crate::error::{Error, Result};
use crate::grid::{GridSpec, Vec3};
use crate::shapes::{OrientedBox, RoomLayout};

const MAGIC: &[u8; 8] = b"VERANN01";

fn put_grid(w: &mut ByteWriter, g: &VoxelGrid) {
    for a in 0..3 {
        let (lo, hi) = g.spec.range(a);
        w.f64(lo);
        w.f64(hi);
        w.u32(g.spec.dims()[a] as u32);
    }
    let mut runs: Vec<(u16, u32)> = Vec::new();
    for &l in &g.labels {
        match runs.last_mut() {
            Some((v, n)) if *v == l => *n += 1,
            _ => runs.push((l, 1)),
        }
    }
    w.u32(runs.len() as u32);
    for (v, n) in runs {
        w.u16(v);
        w.u32(n);
    }
}

fn get_grid(r: &mut ByteReader) -> Result<VoxelGrid> {
    let mut ranges = [(0.0, 0.0); 3];
    let mut dims = [0usize; 3];
    for a in 0..3 {
        ranges[a] = (r.f64("grid range")?, r.f64("grid range")?);
        dims[a] = r.u32("grid dims")? as usize;
    }
    let spec = GridSpec::from_dims(ranges[0], ranges[1], ranges[2], dims)?;
    let runs = r.u32("run count")?;
    let mut labels = Vec::with_capacity(spec.len());
    for _ in 0..runs {
        let v = r.u16("run label")?;
        let n = r.u32("run length")? as usize;
        if labels.len() + n > spec.len() {
            return Err(Error::parse("annotation", "runs exceed grid size"));
        }
        labels.extend(std::iter::repeat_n(v, n));
    }
    if labels.len() != spec.len() {
        return Err(Error::parse("annotation", format!("runs cover {} of {} cells", labels.len(), spec.len())));
    }
    Ok(VoxelGrid { spec, labels })
}

pub fn write_annotations(sets: &[AnnotationSet]) -> Vec<u8> {
    let mut w = ByteWriter::new();
    w.bytes(MAGIC);
    w.u32(sets.len() as u32);
    for s in sets {
        w.u32(s.viewpoint);
        for g in &s.grids {
            put_grid(&mut w, g);
        }
        w.u32(s.boxes.len() as u32);
        for b in &s.boxes {
            for v in [b.center.x, b.center.y, b.center.z, b.half_extents.x, b.half_extents.y, b.half_extents.z, b.yaw] {
                w.f64(v);
            }
            w.u16(b.class);
            w.i32(b.instance.map_or(-1, |i| i as i32));
        }
        match &s.layout {
            Some(l) => {
                w.u8(1);
                for v in [l.center.x, l.center.y, l.center.z, l.width, l.length, l.height, l.rotation] {
                    w.f64(v);
                }
            }
            None => w.u8(0),
        }
    }
    w.buf
}

pub fn read_annotations(data: &[u8]) -> Result<Vec<AnnotationSet>> {
    let mut r = ByteReader::new(data, "annotation");
    r.magic(MAGIC)?;
    let n = r.u32("record count")?;
    let mut out = Vec::new();
    for _ in 0..n {
        let viewpoint = r.u32("viewpoint")?;
        let grids = [get_grid(&mut r)?, get_grid(&mut r)?, get_grid(&mut r)?];
        let nb = r.u32("box count")?;
        let mut boxes = Vec::new();
        for _ in 0..nb {
            let mut v = [0.0; 7];
            for x in v.iter_mut() {
                *x = r.f64("box")?;
            }
            let class = r.u16("box class")?;
            let inst = r.i32("box instance")?;
            boxes.push(OrientedBox {
                center: Vec3::new(v[0], v[1], v[2]),
                half_extents: Vec3::new(v[3], v[4], v[5]),
                yaw: v[6],
                class,
                instance: u32::try_from(inst).ok(),
            });
        }
        let layout = match r.u8("layout flag")? {
            0 => None,
            1 => {
                let mut v = [0.0; 7];
                for x in v.iter_mut() {
                    *x = r.f64("layout")?;
                }
                Some(RoomLayout {
                    center: Vec3::new(v[0], v[1], v[2]),
                    width: v[3],
                    length: v[4],
                    height: v[5],
                    rotation: v[6],
                })
            }
            f => return Err(Error::parse("annotation", format!("bad layout flag {f}"))),
        };
        out.push(AnnotationSet { viewpoint, grids, boxes, layout });
    }
    r.finish()?;
    Ok(out)
}
