use ver_core::encoder::VolumeFeature;
use ver_core::grid::{GridSpec, Vec3};
use ver_core::params::{Init, Linear};
use ver_core::policy::*;
use ver_core::scene::{Instruction, NodeId};

// ---- independent scalar re-computation of the attention stack ----

fn lin(l: &Linear, x: &[f64]) -> Vec<f64> {
    (0..l.output)
        .map(|o| {
            let mut s = l.bias[o];
            for i in 0..l.input {
                s += l.weight[o * l.input + i] * x[i];
            }
            s
        })
        .collect()
}

fn norm(x: &[f64], n: &LayerNorm) -> Vec<f64> {
    let m = x.iter().sum::<f64>() / x.len() as f64;
    let var = x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / x.len() as f64;
    x.iter().enumerate().map(|(i, v)| (v - m) / (var + 1e-5).sqrt() * n.gain[i] + n.bias[i]).collect()
}

fn block(b: &MltBlock, xs: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let d = xs[0].len();
    let mut out = Vec::new();
    for xi in xs {
        let qi = lin(&b.query, xi);
        let scores: Vec<f64> = xs
            .iter()
            .map(|xj| {
                let kj = lin(&b.key, xj);
                (0..d).map(|c| qi[c] * kj[c]).sum::<f64>() / (d as f64).sqrt()
            })
            .collect();
        let mx = scores.iter().cloned().fold(f64::MIN, f64::max);
        let z: f64 = scores.iter().map(|s| (s - mx).exp()).sum();
        let mut mix = vec![0.0; d];
        for (j, xj) in xs.iter().enumerate() {
            let vj = lin(&b.value, xj);
            for c in 0..d {
                mix[c] += (scores[j] - mx).exp() / z * vj[c];
            }
        }
        let o = lin(&b.output, &mix);
        let h = norm(&(0..d).map(|c| o[c] + xi[c]).collect::<Vec<_>>(), &b.norm1);
        let up: Vec<f64> = lin(&b.up, &h).into_iter().map(|v| v.max(0.0)).collect();
        let dn = lin(&b.down, &up);
        out.push(norm(&(0..d).map(|c| dn[c] + h[c]).collect::<Vec<_>>(), &b.norm2));
    }
    out
}

fn score(m: &ScoreMlp, x: &[f64]) -> f64 {
    let h: Vec<f64> = lin(&m.hidden, x).into_iter().map(|v| v.max(0.0)).collect();
    lin(&m.out, &h)[0]
}

fn volume(dims: [usize; 3], d: usize, seed: u64) -> VolumeFeature {
    let mut f = VolumeFeature::zeros(dims, d, 0);
    f.data = Init::new(seed).uniform(&[f.data.len()], 1.0).data;
    f
}

fn params(d: usize, seed: u64) -> PolicyParams {
    PolicyParams::seeded(&PolicyConfig { channels: d, w_g: 0.5, ..PolicyConfig::default() }, seed).unwrap()
}

#[test]
fn state_estimate_matches_scalar_pipeline() {
    let (d, dims) = (6, [4, 4, 2]);
    let p = params(d, 11);
    assert_eq!(p.state_blocks.len(), 4);
    let instr = Instruction::seeded(3, 5, d);
    let f = volume(dims, d, 4);
    let got = estimate_state(&instr, &f, &p.state_blocks, &p.state_head).unwrap();
    let mut logits = vec![0.0; 32];
    for z in 0..2 {
        let mut tokens: Vec<Vec<f64>> = instr.tokens().to_vec();
        for x in 0..4 {
            for y in 0..4 {
                tokens.push(f.cell([x, y, z]).to_vec());
            }
        }
        for b in &p.state_blocks {
            tokens = block(b, &tokens);
        }
        for x in 0..4 {
            for y in 0..4 {
                let t = &tokens[5 + x * 4 + y];
                for (a, b) in t.iter().zip(got.updated.cell([x, y, z])) {
                    assert!((a - b).abs() < 1e-10);
                }
                logits[(x * 4 + y) * 2 + z] = score(&p.state_head, t);
            }
        }
    }
    let z: f64 = logits.iter().map(|l| l.exp()).sum();
    for (i, l) in logits.iter().enumerate() {
        assert!((l.exp() / z - got.dist.probs[i]).abs() < 1e-12);
    }
}

#[test]
fn state_argmax_ignores_logit_shift() {
    let d = 4;
    let mut p = params(d, 2);
    let instr = Instruction::seeded(1, 2, d);
    let f = volume([3, 3, 2], d, 8);
    let a = estimate_state(&instr, &f, &p.state_blocks, &p.state_head).unwrap();
    p.state_head.out.bias[0] += 17.0;
    let b = estimate_state(&instr, &f, &p.state_blocks, &p.state_head).unwrap();
    assert_eq!(a.dist.argmax(), b.dist.argmax());
    for (x, y) in a.dist.probs.iter().zip(&b.dist.probs) {
        assert!((x - y).abs() < 1e-12);
    }
}

#[test]
fn global_action_matches_scalar_pipeline() {
    let d = 5;
    let p = params(d, 21);
    let instr = Instruction::seeded(9, 3, d);
    let mut init = Init::new(6);
    let mut g = EpisodicGraph::new();
    let obs: Vec<(NodeId, Vec3)> = (10..15).map(|i| (i, Vec3::zeros())).collect();
    let emb: Vec<Vec<f64>> = (0..5).map(|_| init.uniform(&[d], 1.0).data).collect();
    g.observe(&obs, &emb).unwrap();
    let got = global_action(&instr, &g, &p.graph_blocks, &p.graph_head).unwrap();
    let mut tokens: Vec<Vec<f64>> = instr.tokens().to_vec();
    tokens.extend(emb);
    for b in &p.graph_blocks {
        tokens = block(b, &tokens);
    }
    let logits: Vec<f64> = tokens[3..].iter().map(|t| score(&p.graph_head, t)).collect();
    let z: f64 = logits.iter().map(|l| l.exp()).sum();
    assert_eq!(got.ids, vec![10, 11, 12, 13, 14]);
    for (l, q) in logits.iter().zip(&got.probs) {
        assert!((l.exp() / z - q).abs() < 1e-12);
    }
}

fn spec() -> GridSpec {
    GridSpec::from_dims((-3.0, 3.0), (-3.0, 3.0), (0.0, 1.0), [6, 6, 3]).unwrap()
}

#[test]
fn local_action_matches_brute_force_and_is_scale_invariant() {
    let mut init = Init::new(5);
    let s = spec();
    for _ in 0..50 {
        let raw: Vec<f64> = (0..108).map(|_| init.unit()).collect();
        let total: f64 = raw.iter().sum();
        let d = VolumeStateDist { dims: [6, 6, 3], probs: raw.iter().map(|r| r / total).collect() };
        let cands: Vec<(NodeId, Vec3)> = (0..3)
            .map(|i| (i, Vec3::new(-1.5 + init.unit() * 3.0, -1.5 + init.unit() * 3.0, 0.5)))
            .collect();
        let got = map_state_to_action(&d, &cands, &s).unwrap();
        let mut mass = vec![0.0; 3];
        for (k, (_, p)) in cands.iter().enumerate() {
            let cx = ((p.x + 3.0) / 1.0).floor() as i64;
            let cy = ((p.y + 3.0) / 1.0).floor() as i64;
            for x in 0..6i64 {
                for y in 0..6i64 {
                    if (x - cx).abs() <= 1 && (y - cy).abs() <= 1 {
                        mass[k] += (0..3).map(|z| d.probs[((x * 6 + y) * 3 + z) as usize]).sum::<f64>() / 3.0;
                    }
                }
            }
        }
        let t: f64 = mass.iter().sum();
        for (m, q) in mass.iter().zip(&got.probs) {
            assert!((m / t - q).abs() < 1e-12);
        }
        let doubled = VolumeStateDist { dims: d.dims, probs: d.probs.iter().map(|p| 2.0 * p).collect() };
        let again = map_state_to_action(&doubled, &cands, &s).unwrap();
        for (a, b) in again.probs.iter().zip(&got.probs) {
            assert!((a - b).abs() < 1e-15);
        }
    }
}

#[test]
fn pillar_matches_brute_force_mean_and_counts_cells() {
    let s = GridSpec::from_dims((-6.0, 6.0), (-6.0, 6.0), (-1.5, 2.0), [12, 12, 32]).unwrap();
    let f = volume([12, 12, 32], 3, 3);
    let p = Vec3::new(0.2, -2.7, 0.0);
    let got = extract_pillar(&f, &p, &s).unwrap();
    let (cx, cy) = (6, 3);
    let mut acc = vec![0.0; 3];
    let mut n = 0;
    for x in cx - 1..=cx + 1 {
        for y in cy - 1..=cy + 1 {
            for z in 0..32 {
                for c in 0..3 {
                    acc[c] += f.cell([x, y, z])[c];
                }
                n += 1;
            }
        }
    }
    assert_eq!(n, 288);
    for c in 0..3 {
        assert!((acc[c] / n as f64 - got[c]).abs() < 1e-12);
    }
    // permuting cells inside the pillar leaves the embedding unchanged
    let mut g = f.clone();
    let a = g.cell([cx - 1, cy, 0]).to_vec();
    let b = g.cell([cx + 1, cy + 1, 31]).to_vec();
    g.cell_mut([cx - 1, cy, 0]).copy_from_slice(&b);
    g.cell_mut([cx + 1, cy + 1, 31]).copy_from_slice(&a);
    for (x, y) in extract_pillar(&g, &p, &s).unwrap().iter().zip(&got) {
        assert!((x - y).abs() < 1e-12);
    }
}

#[test]
fn running_mean_matches_history() {
    let mut init = Init::new(12);
    let mut g = EpisodicGraph::new();
    let mut history: Vec<Vec<f64>> = Vec::new();
    for k in 1..=10 {
        let e = init.uniform(&[4], 3.0).data;
        history.push(e.clone());
        let other = init.uniform(&[4], 1.0).data;
        g = update_memory(&g, &[(1, Vec3::zeros()), (100 + k, Vec3::zeros())], &[e, other]).unwrap();
        let node = g.node(1).unwrap();
        assert_eq!(node.visits, k);
        for c in 0..4 {
            let batch = history.iter().map(|h| h[c]).sum::<f64>() / k as f64;
            assert!((node.embedding[c] - batch).abs() < 1e-12);
        }
    }
    assert_eq!(g.len(), 11);
}

#[test]
fn fusion_hand_case_with_two_past_nodes() {
    // graph order: past 1, past 2, current 3, candidates 4 and 5
    let local = ActionDist::new(vec![3, 4, 5], vec![0.2, 0.5, 0.3]).unwrap();
    let global = ActionDist::new(vec![1, 2, 3, 4, 5], vec![0.1, 0.2, 0.3, 0.25, 0.15]).unwrap();
    let fused = fuse_actions(&local, &global, &[1, 2, 3, 4, 5], 0.5).unwrap();
    let lifted = [0.2 / 1.4, 0.2 / 1.4, 0.2 / 1.4, 0.5 / 1.4, 0.3 / 1.4];
    for i in 0..5 {
        let want = 0.5 * global.probs[i] + 0.5 * lifted[i];
        assert!((fused.probs[i] - want).abs() < 1e-15);
        let (lo, hi) = (global.probs[i].min(lifted[i]), global.probs[i].max(lifted[i]));
        assert!(fused.probs[i] >= lo - 1e-15 && fused.probs[i] <= hi + 1e-15);
    }
    assert!((fused.total() - 1.0).abs() < 1e-12);
}

#[test]
fn full_step_produces_distributions() {
    let d = 4;
    let p = PolicyParams::seeded(
        &PolicyConfig { channels: d, state_layers: 1, graph_layers: 1, w_g: 0.3, object_head: true },
        1,
    )
    .unwrap();
    let s = spec();
    let f = volume([6, 6, 3], d, 2);
    let mut g = EpisodicGraph::new();
    let cands = [(0, Vec3::new(0.5, 0.5, 0.5)), (1, Vec3::new(-1.5, 1.5, 0.5)), (2, Vec3::new(1.5, -1.5, 0.5))];
    let instr = Instruction::seeded(2, 3, d);
    let out = policy_step(&instr, &f, &s, &cands, &[(7, Vec3::new(2.5, 2.5, 0.0))], &mut g, &p).unwrap();
    for dist in [&out.local, &out.global, &out.fused, out.object.as_ref().unwrap()] {
        assert!((dist.total() - 1.0).abs() < 1e-12);
    }
    assert!((out.state.probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    assert_eq!(out.fused.ids, vec![0, 1, 2]);
    assert_eq!(g.current, Some(0));
}
