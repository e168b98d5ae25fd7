//! Forward computation of the volumetric encoder: volume queries attend to
//! multi-view feature maps through camera-projected reference points, then
//! a cascade of resolution-doubling upsampling steps, each refined by one
//! more cross-view pass.

mod attention;
mod heads;
mod sampling;
mod upsample;

pub use attention::{cross_view_aggregate, CvaLayer, DeformableAttention, FeedForward, SamplePlan};
pub use heads::{
    focal_loss_binary, focal_loss_multiclass, multiscale_heads, HeadReport, Heads, LevelScore, FOCAL_ALPHA, FOCAL_GAMMA,
    TASK_WEIGHTS,
};
pub use sampling::{bilinear_accumulate, bilinear_sample, reference_points, ReferencePoints};
pub use upsample::{trilinear_upsample, Deconv};

use crate::binio::{ByteReader, ByteWriter};
use crate::camera::Camera;
use crate::error::{Error, Result};
use crate::grid::{Cell, GridSpec, Vec3, FINE_RESOLUTION, PERCEPTION_XY, PERCEPTION_Z};
use crate::params::{Init, TensorStore};

/// D-channel features over an X x Y x Z cell grid, stored cell-major (all
/// channels of a cell are contiguous) in the grid's linear cell order.
#[derive(Debug, Clone, PartialEq)]
pub struct VolumeFeature {
    pub dims: [usize; 3],
    pub channels: usize,
    pub level: usize,
    pub data: Vec<f64>,
}

impl VolumeFeature {
    pub fn zeros(dims: [usize; 3], channels: usize, level: usize) -> Self {
        Self { dims, channels, level, data: vec![0.0; dims.iter().product::<usize>() * channels] }
    }

    pub fn cells(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn index(&self, c: Cell) -> usize {
        (c[0] * self.dims[1] + c[1]) * self.dims[2] + c[2]
    }

    pub fn cell(&self, c: Cell) -> &[f64] {
        let i = self.index(c) * self.channels;
        &self.data[i..i + self.channels]
    }

    pub fn cell_mut(&mut self, c: Cell) -> &mut [f64] {
        let i = self.index(c) * self.channels;
        &mut self.data[i..i + self.channels]
    }

    pub fn at(&self, index: usize) -> &[f64] {
        &self.data[index * self.channels..(index + 1) * self.channels]
    }

    pub fn validate(&self) -> Result<()> {
        if self.data.len() != self.cells() * self.channels {
            return Err(Error::Shape(format!(
                "feature has {} values for {:?} cells x {} channels",
                self.data.len(),
                self.dims,
                self.channels
            )));
        }
        if self.data.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("feature", "non-finite value"));
        }
        Ok(())
    }
}

/// A view's feature map: `height x width` cells of `channels` values, each
/// covering `scale x scale` image pixels.
#[derive(Debug, Clone, PartialEq)]
pub struct ViewFeature {
    pub camera: Camera,
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub scale: f64,
    /// Row-major, channels innermost.
    pub data: Vec<f64>,
}

impl ViewFeature {
    pub fn new(camera: Camera, channels: usize, height: usize, width: usize, scale: f64, data: Vec<f64>) -> Result<Self> {
        if !(scale > 0.0) {
            return Err(Error::invalid("scale", "must be positive"));
        }
        if height == 0 || width == 0 || channels == 0 {
            return Err(Error::invalid("view feature", "empty map"));
        }
        if data.len() != height * width * channels {
            return Err(Error::Shape(format!("view map needs {} values, got {}", height * width * channels, data.len())));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("view feature", "non-finite value"));
        }
        Ok(Self { camera, channels, height, width, scale, data })
    }

    pub fn pixel(&self, row: usize, col: usize) -> &[f64] {
        let i = (row * self.width + col) * self.channels;
        &self.data[i..i + self.channels]
    }

    /// Pixel coordinates to feature-grid coordinates (cell centers at
    /// integers).
    pub fn feature_coords(&self, u: f64, v: f64) -> (f64, f64) {
        (u / self.scale - 0.5, v / self.scale - 0.5)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Upsampling {
    Deconvolution,
    Trilinear,
}

/// Height range of the encoded volume: 32 fine cells up from the floor of
/// the perception range, the lattice of the cropped supervision labels.
pub const ENCODER_Z: (f64, f64) = (PERCEPTION_Z.0, PERCEPTION_Z.0 + 32.0 * FINE_RESOLUTION);

#[derive(Debug, Clone, PartialEq)]
pub struct EncoderConfig {
    pub channels: usize,
    pub heads: usize,
    pub samples: usize,
    pub cva_layers: usize,
    /// Number of upsampling steps after the query level.
    pub levels: usize,
    pub query_dims: [usize; 3],
    /// Egocentric perception range per axis, meters relative to the agent.
    pub range: [(f64, f64); 3],
    pub upsampling: Upsampling,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        Self {
            channels: 768,
            heads: 8,
            samples: 6,
            cva_layers: 6,
            levels: 3,
            query_dims: [15, 15, 4],
            range: [PERCEPTION_XY, PERCEPTION_XY, ENCODER_Z],
            upsampling: Upsampling::Deconvolution,
        }
    }
}

impl EncoderConfig {
    /// Small configuration for CPU runs: 16 channels, 2 heads, 4 samples,
    /// 2 CVA layers and one upsampling step (finest level 30 x 30 x 8).
    pub fn desk() -> Self {
        Self { channels: 16, heads: 2, samples: 4, cva_layers: 2, levels: 1, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.channels == 0 || self.heads == 0 || self.channels % self.heads != 0 {
            return Err(Error::invalid("channels", format!("{} channels do not split into {} heads", self.channels, self.heads)));
        }
        if self.samples == 0 || self.query_dims.contains(&0) {
            return Err(Error::invalid("encoder", "samples and query dims must be positive"));
        }
        Ok(())
    }

    pub fn level_dims(&self, level: usize) -> [usize; 3] {
        self.query_dims.map(|d| d << level)
    }

    /// World-frame grid of pyramid level `level` around `origin`.
    pub fn level_spec(&self, origin: Vec3, level: usize) -> Result<GridSpec> {
        let r = |a: usize| (self.range[a].0 + origin[a], self.range[a].1 + origin[a]);
        GridSpec::from_dims(r(0), r(1), r(2), self.level_dims(level))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncoderParams {
    pub config: EncoderConfig,
    pub queries: VolumeFeature,
    pub layers: Vec<CvaLayer>,
    pub upsample: Vec<Deconv>,
    pub refine: Vec<CvaLayer>,
}

impl EncoderParams {
    pub fn seeded(config: &EncoderConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut init = Init::new(seed);
        let d = config.channels;
        let mut queries = VolumeFeature::zeros(config.query_dims, d, 0);
        queries.data = init.uniform(&[queries.data.len()], 1.0).data;
        let (k, s) = (config.heads, config.samples);
        let layers = (0..config.cva_layers).map(|_| CvaLayer::seeded(&mut init, d, k, s)).collect();
        let upsample = (0..config.levels).map(|_| Deconv::seeded(&mut init, d, d)).collect();
        let refine = (0..config.levels).map(|_| CvaLayer::seeded(&mut init, d, k, s)).collect();
        Ok(Self { config: config.clone(), queries, layers, upsample, refine })
    }

    pub fn to_store(&self) -> TensorStore {
        let mut store = TensorStore::default();
        let [x, y, z] = self.config.query_dims;
        store.insert(
            "encoder.queries",
            crate::params::Tensor { dims: vec![x, y, z, self.config.channels], data: self.queries.data.clone() },
        );
        for (i, l) in self.layers.iter().enumerate() {
            l.store(&mut store, &format!("encoder.cva{i}"));
        }
        for (i, u) in self.upsample.iter().enumerate() {
            u.store(&mut store, &format!("encoder.up{i}"));
        }
        for (i, l) in self.refine.iter().enumerate() {
            l.store(&mut store, &format!("encoder.refine{i}"));
        }
        store
    }

    pub fn from_store(config: &EncoderConfig, store: &TensorStore) -> Result<Self> {
        config.validate()?;
        let (d, k, s) = (config.channels, config.heads, config.samples);
        let [x, y, z] = config.query_dims;
        let mut queries = VolumeFeature::zeros(config.query_dims, d, 0);
        queries.data = store.get("encoder.queries", &[x, y, z, d])?.data.clone();
        let layers = (0..config.cva_layers)
            .map(|i| CvaLayer::load(store, &format!("encoder.cva{i}"), d, k, s))
            .collect::<Result<_>>()?;
        let upsample = (0..config.levels)
            .map(|i| Deconv::load(store, &format!("encoder.up{i}"), d, d))
            .collect::<Result<_>>()?;
        let refine = (0..config.levels)
            .map(|i| CvaLayer::load(store, &format!("encoder.refine{i}"), d, k, s))
            .collect::<Result<_>>()?;
        Ok(Self { config: config.clone(), queries, layers, upsample, refine })
    }
}

/// Feature pyramid, coarse to fine, with each level's world grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Pyramid {
    pub levels: Vec<VolumeFeature>,
    pub specs: Vec<GridSpec>,
}

impl Pyramid {
    pub fn finest(&self) -> (&VolumeFeature, &GridSpec) {
        (self.levels.last().expect("pyramid is never empty"), self.specs.last().expect("pyramid is never empty"))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = ByteWriter::new();
        w.bytes(b"VERPYR01");
        w.u32(self.levels.len() as u32);
        for (f, s) in self.levels.iter().zip(&self.specs) {
            for a in 0..3 {
                let (lo, hi) = s.range(a);
                w.f64(lo);
                w.f64(hi);
                w.u32(f.dims[a] as u32);
            }
            w.u32(f.channels as u32);
            for &v in &f.data {
                w.f32(v as f32);
            }
        }
        w.buf
    }

    pub fn from_bytes(data: &[u8]) -> Result<Self> {
        let mut r = ByteReader::new(data, "feature pyramid");
        r.magic(b"VERPYR01")?;
        let n = r.u32("level count")? as usize;
        let (mut levels, mut specs) = (Vec::new(), Vec::new());
        for level in 0..n {
            let mut ranges = [(0.0, 0.0); 3];
            let mut dims = [0usize; 3];
            for a in 0..3 {
                ranges[a] = (r.f64("range")?, r.f64("range")?);
                dims[a] = r.u32("dims")? as usize;
            }
            let channels = r.u32("channels")? as usize;
            let mut f = VolumeFeature::zeros(dims, channels, level);
            for v in f.data.iter_mut() {
                *v = r.f32("feature")? as f64;
            }
            f.validate()?;
            specs.push(GridSpec::from_dims(ranges[0], ranges[1], ranges[2], dims)?);
            levels.push(f);
        }
        r.finish()?;
        if levels.is_empty() {
            return Err(Error::parse("feature pyramid", "no levels"));
        }
        Ok(Self { levels, specs })
    }
}

/// Encode the views observed at `origin` into a feature pyramid.
pub fn encode_ver(views: &[ViewFeature], origin: Vec3, params: &EncoderParams) -> Result<Pyramid> {
    let cfg = &params.config;
    let cameras: Vec<Camera> = views.iter().map(|v| v.camera.clone()).collect();
    let spec0 = cfg.level_spec(origin, 0)?;
    let refs = reference_points(&spec0, &cameras);
    let mut x = cross_view_aggregate(&params.queries, views, &refs, &params.layers)?;
    let mut levels = vec![x.clone()];
    let mut specs = vec![spec0];
    for m in 0..cfg.levels {
        let up = match cfg.upsampling {
            Upsampling::Deconvolution => params.upsample[m].forward(&x)?,
            Upsampling::Trilinear => trilinear_upsample(&x),
        };
        let spec = cfg.level_spec(origin, m + 1)?;
        let refs = reference_points(&spec, &cameras);
        x = params.refine[m].forward(&up, &refs, views)?;
        x.validate()?;
        levels.push(x.clone());
        specs.push(spec);
    }
    Ok(Pyramid { levels, specs })
}
