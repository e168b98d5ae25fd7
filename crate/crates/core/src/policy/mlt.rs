//! Stacked post-norm self-attention blocks without positional encodings.

use crate::error::Result;
use crate::params::{relu, softmax_in_place, Init, Linear, Tensor, TensorStore};

const LN_EPS: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq)]
pub struct LayerNorm {
    pub gain: Vec<f64>,
    pub bias: Vec<f64>,
}

impl LayerNorm {
    pub fn unit(channels: usize) -> Self {
        Self { gain: vec![1.0; channels], bias: vec![0.0; channels] }
    }

    pub fn apply(&self, x: &mut [f64]) {
        let n = x.len() as f64;
        let mean = x.iter().sum::<f64>() / n;
        let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        let inv = 1.0 / (var + LN_EPS).sqrt();
        for (i, v) in x.iter_mut().enumerate() {
            *v = (*v - mean) * inv * self.gain[i] + self.bias[i];
        }
    }

    fn store(&self, store: &mut TensorStore, name: &str) {
        let d = self.gain.len();
        store.insert(format!("{name}.gain"), Tensor { dims: vec![d], data: self.gain.clone() });
        store.insert(format!("{name}.shift"), Tensor { dims: vec![d], data: self.bias.clone() });
    }

    fn load(store: &TensorStore, name: &str, d: usize) -> Result<Self> {
        Ok(Self {
            gain: store.get(&format!("{name}.gain"), &[d])?.data.clone(),
            bias: store.get(&format!("{name}.shift"), &[d])?.data.clone(),
        })
    }
}

/// Single-head self-attention, residual + norm, then a ReLU feed-forward of
/// width 2D, residual + norm.
#[derive(Debug, Clone, PartialEq)]
pub struct MltBlock {
    pub query: Linear,
    pub key: Linear,
    pub value: Linear,
    pub output: Linear,
    pub norm1: LayerNorm,
    pub up: Linear,
    pub down: Linear,
    pub norm2: LayerNorm,
}

impl MltBlock {
    pub fn seeded(init: &mut Init, d: usize) -> Self {
        Self {
            query: Linear::seeded(init, d, d),
            key: Linear::seeded(init, d, d),
            value: Linear::seeded(init, d, d),
            output: Linear::seeded(init, d, d),
            norm1: LayerNorm::unit(d),
            up: Linear::seeded(init, d, 2 * d),
            down: Linear::seeded(init, 2 * d, d),
            norm2: LayerNorm::unit(d),
        }
    }

    pub fn channels(&self) -> usize {
        self.query.input
    }

    /// Row-stochastic attention matrix over the tokens.
    pub fn attention(&self, tokens: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let q: Vec<Vec<f64>> = tokens.iter().map(|t| self.query.forward(t)).collect();
        let k: Vec<Vec<f64>> = tokens.iter().map(|t| self.key.forward(t)).collect();
        let scale = 1.0 / (self.channels() as f64).sqrt();
        q.iter()
            .map(|qi| {
                let mut row: Vec<f64> = k.iter().map(|kj| scale * dot(qi, kj)).collect();
                softmax_in_place(&mut row);
                row
            })
            .collect()
    }

    pub fn forward(&self, tokens: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let d = self.channels();
        let att = self.attention(tokens);
        let v: Vec<Vec<f64>> = tokens.iter().map(|t| self.value.forward(t)).collect();
        tokens
            .iter()
            .zip(&att)
            .map(|(x, row)| {
                let mut mixed = vec![0.0; d];
                for (a, vj) in row.iter().zip(&v) {
                    for (m, val) in mixed.iter_mut().zip(vj) {
                        *m += a * val;
                    }
                }
                let mut h: Vec<f64> = self.output.forward(&mixed).iter().zip(x).map(|(a, b)| a + b).collect();
                self.norm1.apply(&mut h);
                let mut hidden = self.up.forward(&h);
                relu(&mut hidden);
                let mut out: Vec<f64> = self.down.forward(&hidden).iter().zip(&h).map(|(a, b)| a + b).collect();
                self.norm2.apply(&mut out);
                out
            })
            .collect()
    }

    pub fn store(&self, store: &mut TensorStore, name: &str) {
        self.query.store(store, &format!("{name}.q"));
        self.key.store(store, &format!("{name}.k"));
        self.value.store(store, &format!("{name}.v"));
        self.output.store(store, &format!("{name}.o"));
        self.norm1.store(store, &format!("{name}.norm1"));
        self.up.store(store, &format!("{name}.ffn_up"));
        self.down.store(store, &format!("{name}.ffn_down"));
        self.norm2.store(store, &format!("{name}.norm2"));
    }

    pub fn load(store: &TensorStore, name: &str, d: usize) -> Result<Self> {
        Ok(Self {
            query: Linear::load(store, &format!("{name}.q"), d, d)?,
            key: Linear::load(store, &format!("{name}.k"), d, d)?,
            value: Linear::load(store, &format!("{name}.v"), d, d)?,
            output: Linear::load(store, &format!("{name}.o"), d, d)?,
            norm1: LayerNorm::load(store, &format!("{name}.norm1"), d)?,
            up: Linear::load(store, &format!("{name}.ffn_up"), d, 2 * d)?,
            down: Linear::load(store, &format!("{name}.ffn_down"), 2 * d, d)?,
            norm2: LayerNorm::load(store, &format!("{name}.norm2"), d)?,
        })
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Applies the blocks in order.
pub fn mlt_forward(tokens: &[Vec<f64>], blocks: &[MltBlock]) -> Vec<Vec<f64>> {
    let mut x = tokens.to_vec();
    for b in blocks {
        x = b.forward(&x);
    }
    x
}

/// Scoring head `D -> D -> 1` with a ReLU in between.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMlp {
    pub hidden: Linear,
    pub out: Linear,
}

impl ScoreMlp {
    pub fn seeded(init: &mut Init, d: usize) -> Self {
        Self { hidden: Linear::seeded(init, d, d), out: Linear::seeded(init, d, 1) }
    }

    pub fn zeros(d: usize) -> Self {
        Self { hidden: Linear::zeros(d, d), out: Linear::zeros(d, 1) }
    }

    pub fn score(&self, x: &[f64]) -> f64 {
        let mut h = self.hidden.forward(x);
        relu(&mut h);
        self.out.forward(&h)[0]
    }

    pub fn store(&self, store: &mut TensorStore, name: &str) {
        self.hidden.store(store, &format!("{name}.hidden"));
        self.out.store(store, &format!("{name}.out"));
    }

    pub fn load(store: &TensorStore, name: &str, d: usize) -> Result<Self> {
        Ok(Self {
            hidden: Linear::load(store, &format!("{name}.hidden"), d, d)?,
            out: Linear::load(store, &format!("{name}.out"), d, 1)?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tokens(init: &mut Init, n: usize, d: usize) -> Vec<Vec<f64>> {
        (0..n).map(|_| init.uniform(&[d], 1.0).data).collect()
    }

    #[test]
    fn single_token_attends_to_itself() {
        let mut init = Init::new(1);
        let b = MltBlock::seeded(&mut init, 6);
        let t = tokens(&mut init, 1, 6);
        assert_eq!(b.attention(&t), vec![vec![1.0]]);
        assert_eq!(b.forward(&t), b.forward(&t));
    }

    #[test]
    fn rows_sum_to_one_and_permutation_equivariant() {
        let mut init = Init::new(2);
        let blocks: Vec<MltBlock> = (0..3).map(|_| MltBlock::seeded(&mut init, 5)).collect();
        let t = tokens(&mut init, 7, 5);
        for row in blocks[0].attention(&t) {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        let perm = [3, 0, 6, 1, 5, 2, 4];
        let permuted: Vec<Vec<f64>> = perm.iter().map(|&i| t[i].clone()).collect();
        let a = mlt_forward(&t, &blocks);
        let b = mlt_forward(&permuted, &blocks);
        for (j, &i) in perm.iter().enumerate() {
            for (x, y) in a[i].iter().zip(&b[j]) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn layer_norm_output_is_standardized() {
        let mut x = vec![1.0, 2.0, 3.0, 10.0];
        LayerNorm::unit(4).apply(&mut x);
        let mean = x.iter().sum::<f64>() / 4.0;
        let var = x.iter().map(|v| v * v).sum::<f64>() / 4.0;
        assert!(mean.abs() < 1e-12);
        assert!((var - 1.0).abs() < 1e-4);
    }
}
