//! Named-tensor parameter files and the dense layers built from them.
//!
//! File layout (little-endian): magic `VERTENS1`, tensor count (u32), then
//! per tensor: name (u32 length + UTF-8), rank (u32), dims (u32 each) and
//! float32 data in row-major order.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::binio::{ByteReader, ByteWriter};
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"VERTENS1";

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub dims: Vec<usize>,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(dims: &[usize]) -> Self {
        Self { dims: dims.to_vec(), data: vec![0.0; dims.iter().product()] }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TensorStore {
    pub tensors: BTreeMap<String, Tensor>,
}

impl TensorStore {
    pub fn insert(&mut self, name: impl Into<String>, t: Tensor) {
        self.tensors.insert(name.into(), t);
    }

    /// Tensor `name`, checked against the expected dims.
    pub fn get(&self, name: &str, dims: &[usize]) -> Result<&Tensor> {
        let t = self
            .tensors
            .get(name)
            .ok_or_else(|| Error::invalid(name, "missing tensor"))?;
        if t.dims != dims {
            return Err(Error::Shape(format!("tensor {name}: expected dims {dims:?}, found {:?}", t.dims)));
        }
        Ok(t)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = ByteWriter::new();
        w.bytes(MAGIC);
        w.u32(self.tensors.len() as u32);
        for (name, t) in &self.tensors {
            w.str(name);
            w.u32(t.dims.len() as u32);
            for &d in &t.dims {
                w.u32(d as u32);
            }
            for &v in &t.data {
                w.f32(v as f32);
            }
        }
        w.buf
    }

    pub fn from_bytes(data: &[u8]) -> Result<Self> {
        let mut r = ByteReader::new(data, "parameter file");
        r.magic(MAGIC)?;
        let n = r.u32("tensor count")?;
        let mut out = TensorStore::default();
        for _ in 0..n {
            let name = r.str("tensor name")?;
            let rank = r.u32("tensor rank")? as usize;
            let mut dims = Vec::with_capacity(rank);
            for _ in 0..rank {
                dims.push(r.u32("tensor dims")? as usize);
            }
            let len: usize = dims.iter().product();
            let mut values = Vec::with_capacity(len);
            for _ in 0..len {
                let v = r.f32("tensor data")?;
                if !v.is_finite() {
                    return Err(Error::parse("parameter file", format!("non-finite value in {name}")));
                }
                values.push(v as f64);
            }
            out.insert(name, Tensor { dims, data: values });
        }
        r.finish()?;
        Ok(out)
    }
}

/// Seeded uniform initializer. Values are drawn in single precision so a
/// save/load cycle through the float32 file format is exact.
pub struct Init {
    rng: ChaCha8Rng,
}

impl Init {
    pub fn new(seed: u64) -> Self {
        Self { rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    pub fn uniform(&mut self, dims: &[usize], bound: f64) -> Tensor {
        let b = bound as f32;
        let data = (0..dims.iter().product::<usize>())
            .map(|_| if b > 0.0 { self.rng.random_range(-b..b) as f64 } else { 0.0 })
            .collect();
        Tensor { dims: dims.to_vec(), data }
    }

    pub fn unit(&mut self) -> f64 {
        self.rng.random::<f32>() as f64
    }
}

/// Dense affine map `y = W x + b` with `W` stored row-major (out x in).
#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    pub input: usize,
    pub output: usize,
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Linear {
    pub fn zeros(input: usize, output: usize) -> Self {
        Self { input, output, weight: vec![0.0; input * output], bias: vec![0.0; output] }
    }

    /// Identity when square, otherwise the leading rectangular identity.
    pub fn identity(input: usize, output: usize) -> Self {
        let mut l = Self::zeros(input, output);
        for i in 0..input.min(output) {
            l.weight[i * input + i] = 1.0;
        }
        l
    }

    pub fn seeded(init: &mut Init, input: usize, output: usize) -> Self {
        let bound = 1.0 / (input as f64).sqrt();
        Self {
            input,
            output,
            weight: init.uniform(&[output, input], bound).data,
            bias: init.uniform(&[output], bound).data,
        }
    }

    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.input);
        debug_assert_eq!(y.len(), self.output);
        for (o, out) in y.iter_mut().enumerate() {
            let row = &self.weight[o * self.input..(o + 1) * self.input];
            *out = self.bias[o] + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
        }
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.output];
        self.apply(x, &mut y);
        y
    }

    pub fn store(&self, store: &mut TensorStore, name: &str) {
        store.insert(format!("{name}.weight"), Tensor { dims: vec![self.output, self.input], data: self.weight.clone() });
        store.insert(format!("{name}.bias"), Tensor { dims: vec![self.output], data: self.bias.clone() });
    }

    pub fn load(store: &TensorStore, name: &str, input: usize, output: usize) -> Result<Self> {
        Ok(Self {
            input,
            output,
            weight: store.get(&format!("{name}.weight"), &[output, input])?.data.clone(),
            bias: store.get(&format!("{name}.bias"), &[output])?.data.clone(),
        })
    }
}

/// Numerically stable in-place softmax.
pub fn softmax_in_place(v: &mut [f64]) {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for x in v.iter_mut() {
        *x = (*x - max).exp();
        sum += *x;
    }
    for x in v.iter_mut() {
        *x /= sum;
    }
}

pub fn relu(v: &mut [f64]) {
    for x in v {
        *x = x.max(0.0);
    }
}
