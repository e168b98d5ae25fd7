use ver_core::camera::{panorama_rig, Camera};
use ver_core::encoder::*;
use ver_core::grid::{GridSpec, Vec3};
use ver_core::params::{Init, Linear};

fn map(channels: usize, h: usize, w: usize, seed: u64) -> ViewFeature {
    let mut init = Init::new(seed);
    let cam = Camera::looking(Vec3::zeros(), 0.0, 0.0, 1.2, h as u32, w as u32);
    ViewFeature::new(cam, channels, h, w, 1.0, init.uniform(&[h * w * channels], 1.0).data).unwrap()
}

/// Scalar re-computation of the deformable-attention double sum on a map
/// of any size, reading parameters element by element.
fn oracle(da: &DeformableAttention, q: &[f64], u: f64, v: f64, m: &ViewFeature) -> Vec<f64> {
    let (d, k_heads, s_n) = (da.channels, da.heads, da.samples);
    let dh = d / k_heads;
    let lin = |l: &Linear, row: usize| -> f64 {
        let mut acc = l.bias[row];
        for c in 0..l.input {
            acc += l.weight[row * l.input + c] * q[c];
        }
        acc
    };
    let sample = |x: f64, y: f64, ch: usize| -> f64 {
        let x = x.max(0.0).min((m.width - 1) as f64);
        let y = y.max(0.0).min((m.height - 1) as f64);
        let (x0, y0) = (x.floor(), y.floor());
        let (x1, y1) = ((x0 + 1.0).min((m.width - 1) as f64), (y0 + 1.0).min((m.height - 1) as f64));
        let f = |xx: f64, yy: f64| m.data[((yy as usize) * m.width + xx as usize) * m.channels + ch];
        let (ax, ay) = (x - x0, y - y0);
        f(x0, y0) * (1.0 - ax) * (1.0 - ay) + f(x1, y0) * ax * (1.0 - ay) + f(x0, y1) * (1.0 - ax) * ay + f(x1, y1) * ax * ay
    };
    let (fx, fy) = (u / m.scale - 0.5, v / m.scale - 0.5);
    let mut out = vec![0.0; d];
    for k in 0..k_heads {
        let logits: Vec<f64> = (0..s_n).map(|s| lin(&da.weight, k * s_n + s)).collect();
        let z: f64 = logits.iter().map(|l| l.exp()).sum();
        // head k: W_k sum_s A_ks W_s F(p + dp)
        let mut head = vec![0.0; dh];
        for s in 0..s_n {
            let a = logits[s].exp() / z;
            let dx = lin(&da.offset, 2 * (k * s_n + s));
            let dy = lin(&da.offset, 2 * (k * s_n + s) + 1);
            for r in 0..dh {
                let row = k * dh + r;
                let mut proj = 0.0;
                for c in 0..d {
                    proj += da.value.weight[row * d + c] * sample(fx + dx, fy + dy, c);
                }
                // the value bias is applied once per head after weighting; weights sum to 1
                head[r] += a * proj;
            }
        }
        for r in 0..dh {
            head[r] += da.value.bias[k * dh + r];
        }
        for o in 0..d {
            for r in 0..dh {
                out[o] += da.output.weight[o * d + k * dh + r] * head[r];
            }
        }
    }
    out
}

#[test]
fn deformable_attention_matches_scalar_oracle() {
    let m = map(4, 2, 2, 5);
    let mut init = Init::new(17);
    for _ in 0..20 {
        let da = DeformableAttention::seeded(&mut init, 4, 2, 3);
        let q = init.uniform(&[4], 1.0).data;
        let (u, v) = (init.unit() * 2.0, init.unit() * 2.0);
        let got = da.forward(&q, u, v, &m);
        let want = oracle(&da, &q, u, v, &m);
        for (a, b) in got.iter().zip(&want) {
            assert!((a - b).abs() < 1e-10, "{a} vs {b}");
        }
        let plan = da.plan(&q);
        for head in plan.weights.chunks(3) {
            assert!((head.iter().sum::<f64>() - 1.0).abs() < 1e-6);
            assert!(head.iter().all(|&w| w >= 0.0));
        }
    }
}

#[test]
fn degenerate_attention_is_a_lookup() {
    let m = map(4, 3, 3, 2);
    let da = DeformableAttention::identity(4, 1, 1);
    let got = da.forward(&[0.3; 4], 1.5, 2.5, &m);
    assert_eq!(got, m.pixel(2, 1).to_vec());
    // uniform weights over fixed points: mean of the samples
    let mut da = DeformableAttention::identity(4, 1, 2);
    da.offset.bias = vec![-1.0, 0.0, 1.0, 0.0];
    let got = da.forward(&[0.0; 4], 1.5, 1.5, &m);
    for c in 0..4 {
        let want = 0.5 * (m.pixel(1, 0)[c] + m.pixel(1, 2)[c]);
        assert!((got[c] - want).abs() < 1e-15);
    }
}

#[test]
fn attention_is_linear_in_the_map() {
    let m = map(8, 4, 5, 9);
    let mut scaled = m.clone();
    scaled.data.iter_mut().for_each(|v| *v *= -2.5);
    let mut init = Init::new(3);
    let mut da = DeformableAttention::seeded(&mut init, 8, 2, 4);
    da.value.bias.iter_mut().for_each(|b| *b = 0.0);
    let q = init.uniform(&[8], 1.0).data;
    let a = da.forward(&q, 2.2, 1.7, &m);
    let b = da.forward(&q, 2.2, 1.7, &scaled);
    for (x, y) in a.iter().zip(&b) {
        assert!((y + 2.5 * x).abs() < 1e-12);
    }
}

fn one_cell_setup() -> (VolumeFeature, ViewFeature, ReferencePoints) {
    let view = map(3, 4, 4, 11);
    let spec = GridSpec::from_dims((1.0, 3.0), (-1.0, 1.0), (-1.0, 1.0), [1, 1, 1]).unwrap();
    let refs = reference_points(&spec, std::slice::from_ref(&view.camera));
    let mut q = VolumeFeature::zeros([1, 1, 1], 3, 0);
    q.data = vec![0.5, -1.0, 2.0];
    (q, view, refs)
}

#[test]
fn single_visible_cell_gets_feature_plus_residual() {
    let (q, view, refs) = one_cell_setup();
    assert!(refs.any_visible(0));
    let layer = CvaLayer { attention: DeformableAttention::identity(3, 1, 1), ffn: FeedForward::zeros(3) };
    let out = cross_view_aggregate(&q, std::slice::from_ref(&view), &refs, &[layer]).unwrap();
    let p = refs.at(0, 0);
    let mut f = vec![0.0; 3];
    let (fx, fy) = view.feature_coords(p.u, p.v);
    bilinear_sample(&view, fx, fy, &mut f);
    for c in 0..3 {
        assert!((out.data[c] - (q.data[c] + f[c])).abs() < 1e-15);
    }
}

#[test]
fn invisible_volume_passes_through_and_zero_views_error() {
    let view = map(3, 4, 4, 1);
    let spec = GridSpec::from_dims((-3.0, -1.0), (-1.0, 1.0), (-1.0, 1.0), [2, 2, 2]).unwrap();
    let refs = reference_points(&spec, std::slice::from_ref(&view.camera));
    let mut init = Init::new(4);
    let mut q = VolumeFeature::zeros([2, 2, 2], 3, 0);
    q.data = init.uniform(&[24], 1.0).data;
    let layers: Vec<CvaLayer> = (0..3).map(|_| CvaLayer::seeded(&mut init, 3, 1, 2)).collect();
    let out = cross_view_aggregate(&q, std::slice::from_ref(&view), &refs, &layers).unwrap();
    assert_eq!(out, q);
    assert!(cross_view_aggregate(&q, &[], &refs, &layers).is_err());
}

#[test]
fn zero_offsets_uniform_weights_average_visible_views() {
    let spec = GridSpec::from_dims((-2.0, 2.0), (-2.0, 2.0), (-1.0, 1.0), [4, 4, 2]).unwrap();
    let mut init = Init::new(8);
    let rig = panorama_rig(Vec3::zeros(), 6, &[0.0], 1.6, (6, 6));
    let views: Vec<ViewFeature> = rig
        .iter()
        .map(|c| ViewFeature::new(c.clone(), 2, 6, 6, 1.0, init.uniform(&[72], 1.0).data).unwrap())
        .collect();
    let refs = reference_points(&spec, &rig);
    let mut q = VolumeFeature::zeros(spec.dims(), 2, 0);
    q.data = init.uniform(&[q.data.len()], 1.0).data;
    let layer = CvaLayer { attention: DeformableAttention::identity(2, 2, 3), ffn: FeedForward::zeros(2) };
    let out = layer.forward(&q, &refs, &views).unwrap();
    for cell in 0..spec.len() {
        let vis: Vec<usize> = refs.visible_views(cell).collect();
        for c in 0..2 {
            let mut want = q.at(cell)[c];
            if !vis.is_empty() {
                let mut acc = 0.0;
                for &v in &vis {
                    let p = refs.at(cell, v);
                    let (fx, fy) = views[v].feature_coords(p.u, p.v);
                    let mut f = [0.0; 2];
                    bilinear_sample(&views[v], fx, fy, &mut f);
                    acc += f[c];
                }
                want += acc / vis.len() as f64;
            }
            assert!((out.at(cell)[c] - want).abs() < 1e-12);
        }
    }
}

fn small_config(upsampling: Upsampling) -> EncoderConfig {
    EncoderConfig { channels: 4, heads: 2, samples: 2, cva_layers: 1, upsampling, ..EncoderConfig::default() }
}

fn rig_views(channels: usize, seed: u64) -> Vec<ViewFeature> {
    let mut init = Init::new(seed);
    panorama_rig(Vec3::new(0.0, 0.0, 1.5), 4, &[0.0], 1.7, (12, 12))
        .into_iter()
        .map(|c| ViewFeature::new(c, channels, 6, 6, 2.0, init.uniform(&[36 * channels], 1.0).data).unwrap())
        .collect()
}

#[test]
fn pyramid_shapes_determinism_and_trilinear_variant() {
    let origin = Vec3::new(0.0, 0.0, 1.5);
    let views = rig_views(4, 2);
    let deconv = EncoderParams::seeded(&small_config(Upsampling::Deconvolution), 7).unwrap();
    let a = encode_ver(&views, origin, &deconv).unwrap();
    let b = encode_ver(&views, origin, &deconv).unwrap();
    assert_eq!(a, b);
    let dims: Vec<[usize; 3]> = a.levels.iter().map(|l| l.dims).collect();
    assert_eq!(dims, vec![[15, 15, 4], [30, 30, 8], [60, 60, 16], [120, 120, 32]]);
    let tri = EncoderParams { config: small_config(Upsampling::Trilinear), ..deconv.clone() };
    let t = encode_ver(&views, origin, &tri).unwrap();
    assert_eq!(t.levels.iter().map(|l| l.dims).collect::<Vec<_>>(), dims);
    assert_ne!(t.levels[3].data, a.levels[3].data);
    for l in a.levels.iter().chain(&t.levels) {
        l.validate().unwrap();
    }
}

#[test]
fn params_round_trip_through_store() {
    let cfg = small_config(Upsampling::Deconvolution);
    let p = EncoderParams::seeded(&cfg, 3).unwrap();
    let bytes = p.to_store().to_bytes();
    let back = EncoderParams::from_store(&cfg, &ver_core::params::TensorStore::from_bytes(&bytes).unwrap()).unwrap();
    // stored as f32: one pass quantizes, a second pass is exact
    let again = EncoderParams::from_store(&cfg, &back.to_store()).unwrap();
    assert_eq!(back, again);
    for (a, b) in p.queries.data.iter().zip(&back.queries.data) {
        assert!((a - b).abs() <= 1e-6);
    }
    let wrong = EncoderConfig { channels: 8, ..cfg };
    assert!(EncoderParams::from_store(&wrong, &p.to_store()).is_err());
}

#[test]
fn default_feature_dimension_at_query_level() {
    let cfg = EncoderConfig { cva_layers: 1, levels: 0, ..EncoderConfig::default() };
    let p = EncoderParams::seeded(&cfg, 1).unwrap();
    let views = rig_views(768, 3);
    let out = encode_ver(&views, Vec3::new(0.0, 0.0, 1.5), &p).unwrap();
    assert_eq!(out.levels.len(), 1);
    assert_eq!((out.levels[0].channels, out.levels[0].dims), (768, [15, 15, 4]));
}

#[test]
fn pyramid_file_round_trip() {
    let cfg = EncoderConfig { levels: 1, ..small_config(Upsampling::Deconvolution) };
    let p = EncoderParams::seeded(&cfg, 5).unwrap();
    let pyr = encode_ver(&rig_views(4, 1), Vec3::zeros(), &p).unwrap();
    let back = Pyramid::from_bytes(&pyr.to_bytes()).unwrap();
    assert_eq!(back.levels.len(), 2);
    for (a, b) in pyr.levels.iter().zip(&back.levels) {
        assert_eq!(a.dims, b.dims);
        for (x, y) in a.data.iter().zip(&b.data) {
            assert!((x - y).abs() <= 1e-6 * x.abs().max(1.0));
        }
    }
}
