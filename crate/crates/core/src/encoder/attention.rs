//! Deformable attention from a volume query into one view, and the
//! cross-view aggregation layer built on it.

use crate::encoder::sampling::{bilinear_accumulate, ReferencePoints};
use crate::encoder::{VolumeFeature, ViewFeature};
use crate::error::{Error, Result};
use crate::params::{relu, softmax_in_place, Init, Linear, TensorStore};

/// One deformable-attention block: `heads` heads with `samples` sampling
/// points each.
///
/// `offset` maps the query to `heads * samples` (dx, dy) pairs in
/// feature-grid units, `weight` to `heads * samples` attention logits that
/// are normalized per head. `value` projects sampled features for all heads
/// at once (rows `k*D/K..(k+1)*D/K` belong to head `k`) and `output` maps
/// the concatenated head results back to `D` channels.
#[derive(Debug, Clone, PartialEq)]
pub struct DeformableAttention {
    pub channels: usize,
    pub heads: usize,
    pub samples: usize,
    pub offset: Linear,
    pub weight: Linear,
    pub value: Linear,
    pub output: Linear,
}

/// Per-query sampling pattern: normalized weights and offsets.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplePlan {
    /// `[head][sample]`, each head sums to 1.
    pub weights: Vec<f64>,
    /// `[head][sample] -> (dx, dy)`.
    pub offsets: Vec<(f64, f64)>,
}

impl DeformableAttention {
    pub fn head_dim(&self) -> usize {
        self.channels / self.heads
    }

    pub fn seeded(init: &mut Init, channels: usize, heads: usize, samples: usize) -> Self {
        let ks = heads * samples;
        let mut offset = Linear::seeded(init, channels, 2 * ks);
        // small data-dependent part around a ring of fixed directions
        offset.weight.iter_mut().for_each(|w| *w *= 0.1);
        for k in 0..heads {
            let angle = std::f64::consts::TAU * k as f64 / heads as f64;
            for s in 0..samples {
                let r = (s + 1) as f64;
                offset.bias[2 * (k * samples + s)] = r * angle.cos();
                offset.bias[2 * (k * samples + s) + 1] = r * angle.sin();
            }
        }
        Self {
            channels,
            heads,
            samples,
            offset,
            weight: Linear::seeded(init, channels, ks),
            value: Linear::seeded(init, channels, channels),
            output: Linear::seeded(init, channels, channels),
        }
    }

    /// Lookup configuration: a single sample per head at the reference
    /// point, uniform weights and identity projections.
    pub fn identity(channels: usize, heads: usize, samples: usize) -> Self {
        Self {
            channels,
            heads,
            samples,
            offset: Linear::zeros(channels, 2 * heads * samples),
            weight: Linear::zeros(channels, heads * samples),
            value: Linear::identity(channels, channels),
            output: Linear::identity(channels, channels),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.heads == 0 || self.samples == 0 || self.channels % self.heads != 0 {
            return Err(Error::invalid(
                "attention",
                format!("{} channels cannot split into {} heads", self.channels, self.heads),
            ));
        }
        let ks = self.heads * self.samples;
        let shapes = [
            (&self.offset, 2 * ks),
            (&self.weight, ks),
            (&self.value, self.channels),
            (&self.output, self.channels),
        ];
        for (l, out) in shapes {
            if l.input != self.channels || l.output != out {
                return Err(Error::Shape(format!("attention projection {}x{} expected {out}x{}", l.output, l.input, self.channels)));
            }
        }
        Ok(())
    }

    pub fn plan(&self, query: &[f64]) -> SamplePlan {
        let mut weights = self.weight.forward(query);
        for head in weights.chunks_mut(self.samples) {
            softmax_in_place(head);
        }
        let raw = self.offset.forward(query);
        let offsets = raw.chunks(2).map(|p| (p[0], p[1])).collect();
        SamplePlan { weights, offsets }
    }

    /// `raw[k]` += sum over samples of the head-k weighted bilinear features
    /// (full `D` channels, before any projection).
    fn accumulate_raw(&self, plan: &SamplePlan, map: &ViewFeature, fx: f64, fy: f64, scale: f64, raw: &mut [f64]) {
        let d = self.channels;
        for k in 0..self.heads {
            let out = &mut raw[k * d..(k + 1) * d];
            for s in 0..self.samples {
                let i = k * self.samples + s;
                let (dx, dy) = plan.offsets[i];
                bilinear_accumulate(map, fx + dx, fy + dy, plan.weights[i] * scale, out);
            }
        }
    }

    /// Project per-head raw samples through the value and output maps.
    fn project(&self, raw: &[f64]) -> Vec<f64> {
        let (d, dh) = (self.channels, self.head_dim());
        let mut heads = vec![0.0; d];
        for k in 0..self.heads {
            let x = &raw[k * d..(k + 1) * d];
            for r in k * dh..(k + 1) * dh {
                let row = &self.value.weight[r * d..(r + 1) * d];
                heads[r] = self.value.bias[r] + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
            }
        }
        let mut y = vec![0.0; d];
        for (o, out) in y.iter_mut().enumerate() {
            let row = &self.output.weight[o * d..(o + 1) * d];
            *out = row.iter().zip(&heads).map(|(w, v)| w * v).sum::<f64>();
        }
        y
    }

    /// `sum_k W_k sum_s A_ks W_s F(p + dp_ks)` for a reference point in
    /// pixels.
    pub fn forward(&self, query: &[f64], u: f64, v: f64, map: &ViewFeature) -> Vec<f64> {
        let plan = self.plan(query);
        let (fx, fy) = map.feature_coords(u, v);
        let mut raw = vec![0.0; self.heads * self.channels];
        self.accumulate_raw(&plan, map, fx, fy, 1.0, &mut raw);
        self.project(&raw)
    }

    /// Mean of `forward` over several (reference point, view) pairs.
    /// Projections are linear, so raw samples are averaged first.
    pub fn forward_mean(&self, query: &[f64], refs: &[(f64, f64, &ViewFeature)]) -> Vec<f64> {
        let plan = self.plan(query);
        let mut raw = vec![0.0; self.heads * self.channels];
        let scale = 1.0 / refs.len() as f64;
        for &(u, v, map) in refs {
            let (fx, fy) = map.feature_coords(u, v);
            self.accumulate_raw(&plan, map, fx, fy, scale, &mut raw);
        }
        self.project(&raw)
    }

    pub fn store(&self, store: &mut TensorStore, name: &str) {
        self.offset.store(store, &format!("{name}.offset"));
        self.weight.store(store, &format!("{name}.attn"));
        self.value.store(store, &format!("{name}.value"));
        self.output.store(store, &format!("{name}.output"));
    }

    pub fn load(store: &TensorStore, name: &str, channels: usize, heads: usize, samples: usize) -> Result<Self> {
        let ks = heads * samples;
        let a = Self {
            channels,
            heads,
            samples,
            offset: Linear::load(store, &format!("{name}.offset"), channels, 2 * ks)?,
            weight: Linear::load(store, &format!("{name}.attn"), channels, ks)?,
            value: Linear::load(store, &format!("{name}.value"), channels, channels)?,
            output: Linear::load(store, &format!("{name}.output"), channels, channels)?,
        };
        a.validate()?;
        Ok(a)
    }
}

/// Two-layer feed-forward block with a ReLU, hidden width `2D`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeedForward {
    pub up: Linear,
    pub down: Linear,
}

impl FeedForward {
    pub fn seeded(init: &mut Init, channels: usize) -> Self {
        Self { up: Linear::seeded(init, channels, 2 * channels), down: Linear::seeded(init, 2 * channels, channels) }
    }

    pub fn zeros(channels: usize) -> Self {
        Self { up: Linear::zeros(channels, 2 * channels), down: Linear::zeros(2 * channels, channels) }
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        let mut h = self.up.forward(x);
        relu(&mut h);
        self.down.forward(&h)
    }

    pub fn store(&self, store: &mut TensorStore, name: &str) {
        self.up.store(store, &format!("{name}.ffn_up"));
        self.down.store(store, &format!("{name}.ffn_down"));
    }

    pub fn load(store: &TensorStore, name: &str, channels: usize) -> Result<Self> {
        Ok(Self {
            up: Linear::load(store, &format!("{name}.ffn_up"), channels, 2 * channels)?,
            down: Linear::load(store, &format!("{name}.ffn_down"), 2 * channels, channels)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvaLayer {
    pub attention: DeformableAttention,
    pub ffn: FeedForward,
}

impl CvaLayer {
    pub fn seeded(init: &mut Init, channels: usize, heads: usize, samples: usize) -> Self {
        Self {
            attention: DeformableAttention::seeded(init, channels, heads, samples),
            ffn: FeedForward::seeded(init, channels),
        }
    }

    pub fn store(&self, store: &mut TensorStore, name: &str) {
        self.attention.store(store, name);
        self.ffn.store(store, name);
    }

    pub fn load(store: &TensorStore, name: &str, channels: usize, heads: usize, samples: usize) -> Result<Self> {
        Ok(Self {
            attention: DeformableAttention::load(store, name, channels, heads, samples)?,
            ffn: FeedForward::load(store, name, channels)?,
        })
    }

    /// Update one cell: mean attention over its visible views plus residual,
    /// then the feed-forward residual. Cells seen by no view pass through.
    fn update_cell(&self, query: &[f64], cell: usize, refs: &ReferencePoints, views: &[ViewFeature], out: &mut [f64]) {
        let seen: Vec<(f64, f64, &ViewFeature)> = refs
            .visible_views(cell)
            .map(|v| {
                let p = refs.at(cell, v);
                (p.u, p.v, &views[v])
            })
            .collect();
        if seen.is_empty() {
            out.copy_from_slice(query);
            return;
        }
        let a = self.attention.forward_mean(query, &seen);
        let x: Vec<f64> = query.iter().zip(&a).map(|(q, a)| q + a).collect();
        let f = self.ffn.forward(&x);
        for ((o, x), f) in out.iter_mut().zip(&x).zip(&f) {
            *o = x + f;
        }
    }

    pub fn forward(&self, input: &VolumeFeature, refs: &ReferencePoints, views: &[ViewFeature]) -> Result<VolumeFeature> {
        if views.is_empty() {
            return Err(Error::invalid("views", "cross-view aggregation needs at least one view"));
        }
        if refs.views != views.len() || refs.points.len() != input.cells() * views.len() {
            return Err(Error::Shape("reference points do not match volume and views".into()));
        }
        if views.iter().any(|v| v.channels != input.channels) || input.channels != self.attention.channels {
            return Err(Error::Shape("channel count mismatch between volume, views and parameters".into()));
        }
        let d = input.channels;
        let mut out = input.clone();
        let job = |(cell, slot): (usize, &mut [f64])| {
            self.update_cell(&input.data[cell * d..(cell + 1) * d], cell, refs, views, slot);
        };
        #[cfg(feature = "parallel")]
        {
            use rayon::prelude::*;
            out.data.par_chunks_mut(d).enumerate().for_each(job);
        }
        #[cfg(not(feature = "parallel"))]
        out.data.chunks_mut(d).enumerate().for_each(job);
        Ok(out)
    }
}

/// Cross-view aggregation: `layers` applied in order.
pub fn cross_view_aggregate(
    queries: &VolumeFeature,
    views: &[ViewFeature],
    refs: &ReferencePoints,
    layers: &[CvaLayer],
) -> Result<VolumeFeature> {
    if views.is_empty() {
        return Err(Error::invalid("views", "cross-view aggregation needs at least one view"));
    }
    let mut x = queries.clone();
    for layer in layers {
        x = layer.forward(&x, refs, views)?;
    }
    Ok(x)
}
