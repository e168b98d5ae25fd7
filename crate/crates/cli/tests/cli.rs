use std::path::Path;
use std::process::{Command, Output};

fn ver_env(args: &[&str], config: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_ver"));
    cmd.args(args).env_remove("VER_CONFIG");
    if let Some(c) = config {
        cmd.env("VER_CONFIG", c);
    }
    cmd.output().expect("ver binary runs")
}

fn ver(args: &[&str]) -> Output {
    ver_env(args, None)
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn s(p: &Path) -> String {
    p.to_string_lossy().into_owned()
}

const SMALL: [&str; 2] = ["--set", "scene.density=60"];

#[test]
fn usage_errors_exit_2() {
    assert_eq!(code(&ver(&["frobnicate"])), 2);
    assert_eq!(code(&ver(&["gen-scene", "--out", "x", "--frobnicate"])), 2);
    assert_eq!(code(&ver(&["selfcheck", "--set", "encoder.width=4"])), 2);
    assert_eq!(code(&ver(&["selfcheck", "--only", "10"])), 2);
    assert_eq!(code(&ver(&["--jobs", "0", "selfcheck"])), 2);
    let err = ver(&["selfcheck", "--set", "policy.w_g=3"]);
    assert_eq!(code(&err), 2);
    assert_eq!(String::from_utf8_lossy(&err.stderr).trim().lines().count(), 1);
}

#[test]
fn runtime_errors_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let missing = s(&dir.path().join("missing"));
    let o = ver(&["annotate", "--scene", &missing]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).starts_with("error: "));
}

#[test]
fn gen_scene_then_annotate_all() {
    let dir = tempfile::tempdir().unwrap();
    let scene = s(&dir.path().join("s"));
    let mut args = vec!["gen-scene", "--seed", "1", "--out", &scene];
    args.extend(SMALL);
    assert_eq!(code(&ver(&args)), 0);
    let mut args = vec!["annotate", "--scene", &scene, "--viewpoint", "all", "--jobs", "2"];
    args.extend(SMALL);
    let o = ver(&args);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(dir.path().join("s/annotations.bin").exists());
    let report = s(&dir.path().join("r.txt"));
    let perception = format!("{0},{0}", s(&dir.path().join("s/annotations.bin")));
    assert_eq!(code(&ver(&["evaluate", "--perception", &perception, "--out", &report])), 0);
    let text = std::fs::read_to_string(&report).unwrap();
    assert!(text.lines().any(|l| l == "occupancy_miou 1"), "{text}");
}

#[test]
fn generation_is_byte_identical_for_a_seed() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str, seed: &str| {
        let out = dir.path().join(name);
        let eps = dir.path().join(format!("{name}.eps"));
        let (out_s, eps_s) = (s(&out), s(&eps));
        let mut args = vec!["gen-scene", "--seed", seed, "--out", &out_s, "--episodes", &eps_s];
        args.extend(SMALL);
        assert_eq!(code(&ver(&args)), 0);
        (std::fs::read(out.join("points.bin")).unwrap(), std::fs::read(eps).unwrap())
    };
    let a = run("a", "3");
    assert_eq!(a, run("b", "3"));
    assert_ne!(a.0, run("c", "4").0);
}

#[test]
fn config_file_from_environment_and_set_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("ver.conf");
    std::fs::write(&cfg, "# small scene\nscene.density = 60\nscene.rooms = 1\nbogus.key = 1\n").unwrap();
    let scene = s(&dir.path().join("s"));
    assert_eq!(code(&ver_env(&["gen-scene", "--out", &scene], Some(&cfg))), 2);
    std::fs::write(&cfg, "scene.density = 60\nscene.rooms = 1\n").unwrap();
    let o = ver_env(&["gen-scene", "--out", &scene, "--set", "scene.rooms=2"], Some(&cfg));
    assert_eq!(code(&o), 0);
    let graph = std::fs::read_to_string(dir.path().join("s/graph.txt")).unwrap();
    // two viewpoints per room
    assert_eq!(graph.lines().filter(|l| l.starts_with("node")).count(), 4);
}

#[test]
fn encode_then_policy_step_gives_a_distribution() {
    let dir = tempfile::tempdir().unwrap();
    let p = |n: &str| s(&dir.path().join(n));
    let (scene, pyr, graph) = (p("s"), p("pyr.bin"), p("g.txt"));
    let mut args = vec!["gen-scene", "--out", &scene];
    args.extend(SMALL);
    assert_eq!(code(&ver(&args)), 0);
    let mut args = vec!["encode", "--scene", &scene, "--viewpoint", "0", "--out", &pyr];
    args.extend(SMALL);
    let o = ver(&args);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stdout).contains("level 1 30x30x8"));

    let nodes = std::fs::read_to_string(dir.path().join("s/graph.txt")).unwrap();
    let pos = |id: &str| {
        nodes.lines().find(|l| l.starts_with(&format!("node {id} "))).unwrap().splitn(3, ' ').nth(2).unwrap().to_string()
    };
    std::fs::write(&graph, format!("candidate 0 {}\ncandidate 1 {}\n", pos("0"), pos("1"))).unwrap();
    let next = p("g2.txt");
    let o = ver(&["policy-step", "--ver", &pyr, "--instr", "seed:2", "--graph", &graph, "--graph-out", &next]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let total: f64 = String::from_utf8_lossy(&o.stdout)
        .lines()
        .map(|l| l.split_whitespace().nth(1).unwrap().parse::<f64>().unwrap())
        .sum();
    assert!((total - 1.0).abs() < 1e-9);
    assert!(std::fs::read_to_string(&next).unwrap().contains("edge 0 1"));
}
