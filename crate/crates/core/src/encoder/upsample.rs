use crate::encoder::VolumeFeature;
use crate::error::{Error, Result};
use crate::params::{Init, Tensor, TensorStore};

/// Transposed 3D convolution with kernel 2 and stride 2. Output cell
/// `(2i+a, 2j+b, 2k+c)` receives `W[.., .., a, b, c] x(i, j, k) + bias`;
/// the kernel footprints do not overlap.
#[derive(Debug, Clone, PartialEq)]
pub struct Deconv {
    pub channels_in: usize,
    pub channels_out: usize,
    /// `[in][out][a][b][c]`.
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Deconv {
    pub fn seeded(init: &mut Init, cin: usize, cout: usize) -> Self {
        // every output cell sees one input cell, so fan-in is `cin`
        let bound = 1.0 / (cin as f64).sqrt();
        Self {
            channels_in: cin,
            channels_out: cout,
            weight: init.uniform(&[cin, cout, 2, 2, 2], bound).data,
            bias: init.uniform(&[cout], bound).data,
        }
    }

    /// All-ones spatial kernel with identity channels: plain nearest-neighbor
    /// upsampling.
    pub fn nearest(channels: usize) -> Self {
        let mut weight = vec![0.0; channels * channels * 8];
        for c in 0..channels {
            for t in 0..8 {
                weight[(c * channels + c) * 8 + t] = 1.0;
            }
        }
        Self { channels_in: channels, channels_out: channels, weight, bias: vec![0.0; channels] }
    }

    pub fn store(&self, store: &mut TensorStore, name: &str) {
        store.insert(
            format!("{name}.weight"),
            Tensor { dims: vec![self.channels_in, self.channels_out, 2, 2, 2], data: self.weight.clone() },
        );
        store.insert(format!("{name}.bias"), Tensor { dims: vec![self.channels_out], data: self.bias.clone() });
    }

    pub fn load(store: &TensorStore, name: &str, cin: usize, cout: usize) -> Result<Self> {
        Ok(Self {
            channels_in: cin,
            channels_out: cout,
            weight: store.get(&format!("{name}.weight"), &[cin, cout, 2, 2, 2])?.data.clone(),
            bias: store.get(&format!("{name}.bias"), &[cout])?.data.clone(),
        })
    }

    pub fn forward(&self, f: &VolumeFeature) -> Result<VolumeFeature> {
        if f.channels != self.channels_in {
            return Err(Error::Shape(format!("deconv expects {} channels, got {}", self.channels_in, f.channels)));
        }
        let [x, y, z] = f.dims;
        let mut out = VolumeFeature::zeros([2 * x, 2 * y, 2 * z], self.channels_out, f.level + 1);
        let (cin, cout) = (self.channels_in, self.channels_out);
        for i in 0..x {
            for j in 0..y {
                for k in 0..z {
                    let src = f.cell([i, j, k]);
                    for t in 0..8 {
                        let (a, b, c) = (t >> 2, (t >> 1) & 1, t & 1);
                        let dst = out.cell_mut([2 * i + a, 2 * j + b, 2 * k + c]);
                        dst.copy_from_slice(&self.bias);
                        for (ci, &v) in src.iter().enumerate() {
                            if v == 0.0 {
                                continue;
                            }
                            let base = ci * cout * 8 + t;
                            for (co, d) in dst.iter_mut().enumerate() {
                                *d += self.weight[base + co * 8] * v;
                            }
                        }
                    }
                }
            }
        }
        let _ = cin;
        Ok(out)
    }
}

/// Factor-2 trilinear upsampling with half-pixel centers: output cell `i`
/// samples input coordinate `(i + 0.5) / 2 - 0.5`, clamped at the borders.
pub fn trilinear_upsample(f: &VolumeFeature) -> VolumeFeature {
    let [x, y, z] = f.dims;
    let d = f.channels;
    let mut out = VolumeFeature::zeros([2 * x, 2 * y, 2 * z], d, f.level + 1);
    let taps = |i: usize, n: usize| -> [(usize, f64); 2] {
        let s = ((i as f64 + 0.5) / 2.0 - 0.5).clamp(0.0, (n - 1) as f64);
        let i0 = s.floor() as usize;
        let i1 = (i0 + 1).min(n - 1);
        let w = s - i0 as f64;
        [(i0, 1.0 - w), (i1, w)]
    };
    for i in 0..2 * x {
        let tx = taps(i, x);
        for j in 0..2 * y {
            let ty = taps(j, y);
            for k in 0..2 * z {
                let tz = taps(k, z);
                let mut acc = vec![0.0; d];
                for &(a, wa) in &tx {
                    for &(b, wb) in &ty {
                        for &(c, wc) in &tz {
                            let w = wa * wb * wc;
                            if w == 0.0 {
                                continue;
                            }
                            for (o, v) in acc.iter_mut().zip(f.cell([a, b, c])) {
                                *o += w * v;
                            }
                        }
                    }
                }
                out.cell_mut([i, j, k]).copy_from_slice(&acc);
            }
        }
    }
    out
}
