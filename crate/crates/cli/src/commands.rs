use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use ver_core::annotation::{generate_annotations, read_annotations, write_annotations, AnnotationSet};
use ver_core::binio::{read_file, read_text, write_file};
use ver_core::encoder::{encode_ver, multiscale_heads, EncoderParams, Heads, Pyramid};
use ver_core::metrics::{
    detection_metrics, evaluate_episode, layout_iou, occupancy_metrics, Detection, DetectionScores, OccupancyScores,
    Report,
};
use ver_core::params::{Init, TensorStore};
use ver_core::policy::{policy_step, read_instruction, write_action_dist, GraphFile, PolicyParams};
use ver_core::scene::{Instruction, NodeId, Scene};
use ver_core::scene_io::{load_scene, save_scene};
use ver_core::sim::{
    generate_episodes, read_episodes, read_trajectories, simulate, viewpoint_cameras, write_episodes,
    write_trajectories, Mode,
};
use ver_core::synth::generate_synthetic_scene;
use ver_core::{selfcheck, views::Renderer};

use crate::config::{self, Config};
use crate::{Command, Failure, Global};

type Res<T = ()> = std::result::Result<T, Failure>;

pub fn run(global: &Global, command: Command) -> Res {
    let mut cfg = config::load(global.config.as_deref(), &global.sets).map_err(Failure::Usage)?;
    if let Some(s) = global.seed {
        cfg.seed = s;
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(global.jobs as usize)
        .build_global()
        .map_err(|e| Failure::Runtime(format!("thread pool: {e}")))?;
    match command {
        Command::GenScene { out, episodes } => gen_scene(&cfg, &out, episodes.as_deref()),
        Command::Annotate { scene, viewpoint, out } => annotate(&cfg, &scene, &viewpoint, out),
        Command::Encode { scene, viewpoint, params, out, params_out } => {
            encode(&cfg, &scene, viewpoint, &params, &out, params_out.as_deref())
        }
        Command::PolicyStep { ver, instr, graph, params, out, graph_out, params_out } => policy(
            &cfg,
            &ver,
            &instr,
            &graph,
            &params,
            out.as_deref(),
            graph_out.as_deref(),
            params_out.as_deref(),
        ),
        Command::Simulate { scene, episodes, encoder_params, policy_params, mode, out } => {
            run_simulation(&cfg, &scene, &episodes, &encoder_params, &policy_params, &mode, &out)
        }
        Command::Evaluate { trajectories, episodes, scene, perception, out, json } => evaluate(
            &cfg,
            trajectories.zip(episodes).zip(scene).map(|((t, e), s)| (t, e, s)),
            perception.as_deref(),
            out.as_deref(),
            json.as_deref(),
        ),
        Command::Selfcheck { only } => run_selfcheck(&only),
    }
}

/// `seed:N` or a file path.
enum Source {
    Seed(u64),
    File(PathBuf),
}

fn source(flag: &str, v: &str) -> Res<Source> {
    match v.strip_prefix("seed:") {
        Some(n) => n.parse().map(Source::Seed).map_err(|_| Failure::Usage(format!("{flag}: bad seed in {v:?}"))),
        None => Ok(Source::File(PathBuf::from(v))),
    }
}

fn store_from(path: &Path) -> Res<TensorStore> {
    Ok(TensorStore::from_bytes(&read_file(path)?)?)
}

fn write_text(path: &Path, text: &str) -> Res {
    Ok(write_file(path, text.as_bytes())?)
}

fn gen_scene(cfg: &Config, out: &Path, episodes: Option<&Path>) -> Res {
    let scene = generate_synthetic_scene(&cfg.synth_params())?;
    save_scene(&scene, out)?;
    let mut msg = format!(
        "scene: {} points, {} viewpoints, {} edges",
        scene.cloud.len(),
        scene.graph.nodes().len(),
        scene.graph.edge_count()
    );
    if let Some(path) = episodes {
        let eps = generate_episodes(&scene, &format!("seed{}", cfg.seed), cfg.episodes, cfg.seed, cfg.max_steps)?;
        write_text(path, &write_episodes(&eps))?;
        let _ = write!(msg, ", {} episodes", eps.len());
    }
    println!("{msg}");
    Ok(())
}

fn viewpoints(scene: &Scene, arg: &str) -> Res<Vec<NodeId>> {
    if arg == "all" {
        return Ok(scene.graph.nodes().keys().copied().collect());
    }
    let id: NodeId = arg.parse().map_err(|_| Failure::Usage(format!("--viewpoint expects a node id or all, got {arg:?}")))?;
    scene.viewpoint(id)?;
    Ok(vec![id])
}

fn annotate(cfg: &Config, scene_dir: &Path, vp: &str, out: Option<PathBuf>) -> Res {
    let scene = load_scene(scene_dir)?;
    let opts = cfg.annotate_options().map_err(Failure::Usage)?;
    let sets = viewpoints(&scene, vp)?
        .par_iter()
        .map(|&v| generate_annotations(&scene, v, &opts))
        .collect::<ver_core::Result<Vec<AnnotationSet>>>()?;
    let out = out.unwrap_or_else(|| scene_dir.join("annotations.bin"));
    write_file(&out, &write_annotations(&sets))?;
    for s in &sets {
        println!(
            "viewpoint {}: {} occupied voxels, {} boxes, layout {}",
            s.viewpoint,
            s.fine().occupied_count(),
            s.boxes.len(),
            if s.layout.is_some() { "yes" } else { "no" }
        );
    }
    Ok(())
}

fn encoder_params(cfg: &Config, src: &Source, classes: usize) -> Res<(EncoderParams, Heads)> {
    let levels = cfg.encoder.levels + 1;
    match src {
        Source::Seed(n) => Ok((
            EncoderParams::seeded(&cfg.encoder, *n)?,
            Heads::seeded(&mut Init::new(n.wrapping_add(1)), cfg.encoder.channels, levels, classes),
        )),
        Source::File(p) => {
            let store = store_from(p)?;
            Ok((EncoderParams::from_store(&cfg.encoder, &store)?, Heads::load(&store, cfg.encoder.channels, levels, classes)?))
        }
    }
}

fn renderer(cfg: &Config, scene: &Scene) -> Res<Renderer> {
    Ok(Renderer::new(&scene.cloud, scene.header.classes.len(), cfg.encoder.channels, cfg.view_scale, cfg.seed)?)
}

fn encode(cfg: &Config, scene_dir: &Path, vp: NodeId, params: &str, out: &Path, params_out: Option<&Path>) -> Res {
    let scene = load_scene(scene_dir)?;
    let classes = scene.header.classes.len();
    let (enc, heads) = encoder_params(cfg, &source("--params", params)?, classes)?;
    if let Some(p) = params_out {
        let mut store = enc.to_store();
        heads.store(&mut store);
        write_file(p, &store.to_bytes())?;
    }
    let origin = scene.viewpoint(vp)?;
    let views = renderer(cfg, &scene)?.render_all(&viewpoint_cameras(&scene, vp, origin))?;
    let pyramid = encode_ver(&views, origin, &enc)?;
    write_file(out, &pyramid.to_bytes())?;
    let labels = generate_annotations(&scene, vp, &cfg.annotate_options().map_err(Failure::Usage)?)?;
    // the finest encoder level after three doublings sits on the fine label lattice
    let grids = labels.supervision(cfg.encoder.query_dims[2] << 3)?;
    let report = multiscale_heads(&pyramid, &grids, labels.layout.as_ref(), origin, &heads)?;
    for l in &report.levels {
        let d = pyramid.levels[l.level].dims;
        println!(
            "level {} {}x{}x{} occupancy_loss {} objectness_loss {} supervised {}",
            l.level, d[0], d[1], d[2], l.occupancy_loss, l.objectness_loss, l.supervised
        );
    }
    println!("occupancy_loss {}", report.occupancy_loss);
    println!("box_loss {}", report.box_loss);
    if let Some(l) = report.layout_loss {
        println!("layout_loss {l}");
    }
    println!("total {}", report.total);
    Ok(())
}

fn policy_params(cfg: &Config, src: &Source) -> Res<PolicyParams> {
    Ok(match src {
        Source::Seed(n) => PolicyParams::seeded(&cfg.policy, *n)?,
        Source::File(p) => PolicyParams::from_store(&cfg.policy, &store_from(p)?)?,
    })
}

#[allow(clippy::too_many_arguments)]
fn policy(
    cfg: &Config,
    ver: &Path,
    instr: &str,
    graph: &Path,
    params: &str,
    out: Option<&Path>,
    graph_out: Option<&Path>,
    params_out: Option<&Path>,
) -> Res {
    let pyramid = Pyramid::from_bytes(&read_file(ver)?)?;
    let (feature, spec) = pyramid.finest();
    let mut pcfg = cfg.policy.clone();
    pcfg.channels = feature.channels;
    let cfg = Config { policy: pcfg, ..cfg.clone() };
    let params = policy_params(&cfg, &source("--params", params)?)?;
    if let Some(p) = params_out {
        write_file(p, &params.to_store().to_bytes())?;
    }
    let instruction = match source("--instr", instr)? {
        Source::Seed(n) => Instruction::seeded(n, 8, feature.channels),
        Source::File(p) => read_instruction(&read_text(&p)?)?,
    };
    let mut file = GraphFile::from_text(&read_text(graph)?)?;
    if file.candidates.is_empty() {
        return Err(Failure::Runtime("graph file has no candidate records".into()));
    }
    let step = policy_step(&instruction, feature, spec, &file.candidates, &[], &mut file.graph, &params)?;
    let text = write_action_dist(&step.fused);
    match out {
        Some(p) => write_text(p, &text)?,
        None => print!("{text}"),
    }
    if let Some(p) = graph_out {
        write_text(p, &file.to_text())?;
    }
    Ok(())
}

fn run_simulation(cfg: &Config, scene_dir: &Path, episodes: &Path, enc: &str, pol: &str, mode: &str, out: &Path) -> Res {
    let mode = match mode {
        "argmax" => Mode::Argmax,
        "sample" => Mode::Sample(cfg.seed),
        _ => return Err(Failure::Usage(format!("--mode expects argmax or sample, got {mode:?}"))),
    };
    let scene = load_scene(scene_dir)?;
    let eps = read_episodes(&read_text(episodes)?)?;
    let (enc, _) = encoder_params(cfg, &source("--encoder-params", enc)?, scene.header.classes.len())?;
    let pol = policy_params(cfg, &source("--policy-params", pol)?)?;
    let trajs = simulate(&scene, &eps, &renderer(cfg, &scene)?, &enc, &pol, mode)?;
    write_text(out, &write_trajectories(&trajs))?;
    let stops = trajs.iter().filter(|t| t.reason == ver_core::sim::Termination::Stop).count();
    println!("{} trajectories, {} stopped, {} hit the step limit", trajs.len(), stops, trajs.len() - stops);
    Ok(())
}

/// Per-viewpoint perception scores averaged over viewpoints present in both files.
fn perception_scores(pred: &[AnnotationSet], gt: &[AnnotationSet], report: &mut Report) -> Res {
    let (mut occ, mut det, mut lay) = (Vec::<OccupancyScores>::new(), Vec::<DetectionScores>::new(), Vec::new());
    for g in gt {
        let Some(p) = pred.iter().find(|p| p.viewpoint == g.viewpoint) else { continue };
        occ.push(occupancy_metrics(p.fine(), g.fine())?);
        let dets: Vec<Detection> = p.boxes.iter().map(|b| Detection { bbox: *b, score: 1.0 }).collect();
        det.push(detection_metrics(&dets, &g.boxes));
        if let (Some(a), Some(b)) = (&p.layout, &g.layout) {
            lay.push(layout_iou(a, b));
        }
    }
    if occ.is_empty() {
        return Err(Failure::Runtime("no viewpoint appears in both perception files".into()));
    }
    let n = occ.len() as f64;
    report.add_occupancy(&OccupancyScores {
        iou: occ.iter().map(|s| s.iou).sum::<f64>() / n,
        miou: occ.iter().map(|s| s.miou).sum::<f64>() / n,
        miou_inclusive: occ.iter().map(|s| s.miou_inclusive).sum::<f64>() / n,
        per_class: Default::default(),
    });
    report.add_detection(&DetectionScores {
        map: det.iter().map(|s| s.map).sum::<f64>() / n,
        mar: det.iter().map(|s| s.mar).sum::<f64>() / n,
        per_class: Default::default(),
    });
    if !lay.is_empty() {
        report.add_layout(lay.iter().sum::<f64>() / lay.len() as f64);
    }
    Ok(())
}

fn evaluate(
    cfg: &Config,
    nav: Option<(PathBuf, PathBuf, PathBuf)>,
    perception: Option<&str>,
    out: Option<&Path>,
    json: Option<&Path>,
) -> Res {
    if nav.is_none() && perception.is_none() {
        return Err(Failure::Usage("evaluate needs --trajectories/--episodes/--scene or --perception".into()));
    }
    let mut report = Report::default();
    if let Some((t, e, s)) = nav {
        let scene = load_scene(&s)?;
        let trajs = read_trajectories(&read_text(&t)?)?;
        let eps = read_episodes(&read_text(&e)?)?;
        let per = trajs
            .iter()
            .map(|tr| {
                let ep = eps
                    .iter()
                    .find(|e| e.id == tr.episode)
                    .ok_or_else(|| Failure::Runtime(format!("trajectory for unknown episode {}", tr.episode)))?;
                Ok(evaluate_episode(&scene, ep, tr, cfg.success_radius)?)
            })
            .collect::<Res<Vec<_>>>()?;
        report = Report::from_episodes(per);
    }
    if let Some(spec) = perception {
        let (p, g) = spec.split_once(',').ok_or_else(|| Failure::Usage("--perception expects PRED,GT".into()))?;
        let pred = read_annotations(&read_file(Path::new(p))?)?;
        let gt = read_annotations(&read_file(Path::new(g))?)?;
        perception_scores(&pred, &gt, &mut report)?;
    }
    match out {
        Some(p) => write_text(p, &report.to_text())?,
        None => print!("{}", report.to_text()),
    }
    if let Some(p) = json {
        write_text(p, &report.to_json())?;
    }
    Ok(())
}

fn run_selfcheck(only: &[u8]) -> Res {
    let ids: Vec<u8> = if only.is_empty() { selfcheck::CRITERIA.iter().map(|c| c.0).collect() } else { only.to_vec() };
    let t = Instant::now();
    let mut failed = 0;
    for id in &ids {
        let o = selfcheck::run(*id);
        println!("{}", o.line());
        failed += usize::from(!o.passed);
    }
    println!("{}/{} criteria passed in {:.1}s", ids.len() - failed, ids.len(), t.elapsed().as_secs_f64());
    if failed > 0 {
        return Err(Failure::Runtime(format!("{failed} criteria failed")));
    }
    Ok(())
}
