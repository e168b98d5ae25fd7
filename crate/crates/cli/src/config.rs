//! Flat `key = value` configuration. A `preset` key picks the base values
//! (`desk` or `full`); every other key overrides one field. Later entries
//! win, so `--set` flags override the file.

use std::path::Path;
use std::str::FromStr;

use ver_core::annotation::AnnotateOptions;
use ver_core::encoder::{EncoderConfig, Upsampling};
use ver_core::grid::{GridSpec, FINE_RESOLUTION, PERCEPTION_XY, PERCEPTION_Z};
use ver_core::metrics::SUCCESS_RADIUS;
use ver_core::policy::PolicyConfig;
use ver_core::sim::DEFAULT_MAX_STEPS;
use ver_core::synth::SynthParams;

pub const CONFIG_ENV: &str = "VER_CONFIG";

pub const KEYS: &[&str] = &[
    "preset",
    "seed",
    "scene.rooms",
    "scene.objects",
    "scene.density",
    "scene.viewpoints_per_room",
    "annotate.resolution",
    "annotate.carve_all_viewpoints",
    "encoder.channels",
    "encoder.heads",
    "encoder.samples",
    "encoder.layers",
    "encoder.levels",
    "encoder.query_dims",
    "encoder.upsampling",
    "policy.state_layers",
    "policy.graph_layers",
    "policy.w_g",
    "policy.object_head",
    "views.scale",
    "sim.episodes",
    "sim.max_steps",
    "metrics.success_radius",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    Desk,
    Full,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub preset: Preset,
    pub seed: u64,
    pub rooms: usize,
    pub objects: usize,
    pub density: f64,
    pub viewpoints_per_room: usize,
    pub resolution: f64,
    pub carve_all_viewpoints: bool,
    pub encoder: EncoderConfig,
    pub policy: PolicyConfig,
    /// Pixels per view-feature cell.
    pub view_scale: usize,
    pub episodes: usize,
    pub max_steps: usize,
    pub success_radius: f64,
}

impl Config {
    pub fn preset(p: Preset) -> Self {
        let (encoder, policy) = match p {
            Preset::Desk => (EncoderConfig::desk(), PolicyConfig::desk()),
            Preset::Full => (EncoderConfig::default(), PolicyConfig::default()),
        };
        Self {
            preset: p,
            seed: 1,
            rooms: 2,
            objects: 6,
            density: 400.0,
            viewpoints_per_room: 2,
            resolution: FINE_RESOLUTION,
            carve_all_viewpoints: true,
            encoder,
            policy,
            view_scale: 4,
            episodes: 4,
            max_steps: DEFAULT_MAX_STEPS,
            success_radius: SUCCESS_RADIUS,
        }
    }

    /// Builds a config from ordered `(key, value)` entries.
    pub fn from_entries(entries: &[(String, String)]) -> Result<Self, String> {
        for (k, _) in entries {
            if !KEYS.contains(&k.as_str()) {
                return Err(format!("unknown config key {k:?}"));
            }
        }
        let preset = match entries.iter().rev().find(|(k, _)| k == "preset").map(|(_, v)| v.as_str()) {
            None | Some("desk") => Preset::Desk,
            Some("full") => Preset::Full,
            Some(v) => return Err(format!("preset must be desk or full, got {v:?}")),
        };
        let mut c = Self::preset(preset);
        for (k, v) in entries {
            c.set(k, v)?;
        }
        c.validate()?;
        Ok(c)
    }

    fn set(&mut self, key: &str, v: &str) -> Result<(), String> {
        match key {
            "preset" => {}
            "seed" => self.seed = parse(key, v)?,
            "scene.rooms" => self.rooms = parse(key, v)?,
            "scene.objects" => self.objects = parse(key, v)?,
            "scene.density" => self.density = parse(key, v)?,
            "scene.viewpoints_per_room" => self.viewpoints_per_room = parse(key, v)?,
            "annotate.resolution" => self.resolution = parse(key, v)?,
            "annotate.carve_all_viewpoints" => self.carve_all_viewpoints = parse(key, v)?,
            "encoder.channels" => self.encoder.channels = parse(key, v)?,
            "encoder.heads" => self.encoder.heads = parse(key, v)?,
            "encoder.samples" => self.encoder.samples = parse(key, v)?,
            "encoder.layers" => self.encoder.cva_layers = parse(key, v)?,
            "encoder.levels" => self.encoder.levels = parse(key, v)?,
            "encoder.query_dims" => {
                let d: Vec<usize> = v.split('x').map(|p| parse(key, p)).collect::<Result<_, _>>()?;
                self.encoder.query_dims = d.try_into().map_err(|_| format!("{key}: expected XxYxZ, got {v:?}"))?;
            }
            "encoder.upsampling" => {
                self.encoder.upsampling = match v {
                    "deconvolution" => Upsampling::Deconvolution,
                    "trilinear" => Upsampling::Trilinear,
                    _ => return Err(format!("{key}: expected deconvolution or trilinear, got {v:?}")),
                }
            }
            "policy.state_layers" => self.policy.state_layers = parse(key, v)?,
            "policy.graph_layers" => self.policy.graph_layers = parse(key, v)?,
            "policy.w_g" => self.policy.w_g = parse(key, v)?,
            "policy.object_head" => self.policy.object_head = parse(key, v)?,
            "views.scale" => self.view_scale = parse(key, v)?,
            "sim.episodes" => self.episodes = parse(key, v)?,
            "sim.max_steps" => self.max_steps = parse(key, v)?,
            "metrics.success_radius" => self.success_radius = parse(key, v)?,
            _ => return Err(format!("unknown config key {key:?}")),
        }
        Ok(())
    }

    fn validate(&mut self) -> Result<(), String> {
        self.policy.channels = self.encoder.channels;
        self.encoder.validate().map_err(|e| e.to_string())?;
        self.policy.validate().map_err(|e| e.to_string())?;
        if !(self.density > 0.0 && self.density.is_finite()) {
            return Err("scene.density must be positive".into());
        }
        if self.rooms == 0 || self.viewpoints_per_room == 0 {
            return Err("scene.rooms and scene.viewpoints_per_room must be positive".into());
        }
        if !(self.resolution > 0.0) {
            return Err("annotate.resolution must be positive".into());
        }
        self.annotate_options()?;
        if self.view_scale == 0 || self.max_steps == 0 {
            return Err("views.scale and sim.max_steps must be positive".into());
        }
        if !(self.success_radius > 0.0) {
            return Err("metrics.success_radius must be positive".into());
        }
        Ok(())
    }

    pub fn synth_params(&self) -> SynthParams {
        let mut p = SynthParams::new(self.seed, self.rooms, self.objects);
        p.density = self.density;
        p.viewpoints_per_room = self.viewpoints_per_room;
        p
    }

    pub fn annotate_options(&self) -> Result<AnnotateOptions, String> {
        let grid = GridSpec::new(PERCEPTION_XY, PERCEPTION_XY, PERCEPTION_Z, self.resolution)
            .map_err(|e| format!("annotate.resolution: {e}"))?;
        Ok(AnnotateOptions { grid, carve_all_viewpoints: self.carve_all_viewpoints, ..AnnotateOptions::default() })
    }
}

fn parse<T: FromStr>(key: &str, v: &str) -> Result<T, String> {
    v.trim().parse().map_err(|_| format!("{key}: cannot parse {v:?}"))
}

/// Parses `key = value` lines; `#` starts a comment.
pub fn parse_entries(text: &str, origin: &str) -> Result<Vec<(String, String)>, String> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| format!("{origin}:{}: expected key = value", i + 1))?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

/// Config file (explicit path, else `VER_CONFIG`) followed by `--set` pairs.
pub fn load(path: Option<&Path>, sets: &[String]) -> Result<Config, String> {
    let env = std::env::var_os(CONFIG_ENV).map(std::path::PathBuf::from);
    let mut entries = match path.map(Path::to_path_buf).or(env) {
        Some(p) => {
            let text = std::fs::read_to_string(&p).map_err(|e| format!("reading config {}: {e}", p.display()))?;
            parse_entries(&text, &p.display().to_string())?
        }
        None => Vec::new(),
    };
    for s in sets {
        let (k, v) = s.split_once('=').ok_or_else(|| format!("--set expects key=value, got {s:?}"))?;
        entries.push((k.trim().to_string(), v.trim().to_string()));
    }
    Config::from_entries(&entries)
}
