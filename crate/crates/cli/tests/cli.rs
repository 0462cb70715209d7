use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;
use turbssm::harness::tensor_file::write_array;
use turbssm::FrameSequence;

fn small_config(d_over_r0: f64, extra: &str) -> String {
    format!(
        "seed = 11\n\
         [turbulence]\nd_over_r0 = {d_over_r0}\nchannels = 15\nkernel_size = 9\ncorrelation_length = 4.0\nzernike_grid = 32\n\
         [basis]\nk = 8\nsamples = 300\nsample_size = 16\nstrength_scales = [0.5, 1.0, 2.0]\n{extra}"
    )
}

struct Workspace {
    dir: TempDir,
}

impl Workspace {
    fn new() -> Self {
        Self { dir: tempfile::tempdir().unwrap() }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn write(&self, name: &str, text: &str) -> PathBuf {
        let p = self.path(name);
        fs::write(&p, text).unwrap();
        p
    }

    fn input(&self) -> PathBuf {
        let p = self.path("scene.tsm");
        let seq = FrameSequence::from_fn((2, 24, 24, 1), |(t, y, x, _)| {
            0.5 + 0.4 * ((0.8 * x as f64 + t as f64).sin() * (0.6 * y as f64).cos())
        });
        write_array(&p, &seq.data().clone().into_dyn()).unwrap();
        p
    }

    fn run(&self, args: &[&str]) -> Output {
        Command::new(env!("CARGO_BIN_EXE_turbssm"))
            .args(args)
            .env("TURBSSM_THREADS", "2")
            .current_dir(self.dir.path())
            .output()
            .unwrap()
    }
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn psnr_from(out: &Output) -> f64 {
    let text = String::from_utf8_lossy(&out.stdout);
    let row = text.lines().nth(1).expect("metrics row");
    row.split(',').nth(1).unwrap().parse().unwrap()
}

#[test]
fn simulate_is_byte_identical_across_runs() {
    let ws = Workspace::new();
    let cfg = ws.write("run.toml", &small_config(1.0, ""));
    let input = ws.input();
    for out in ["a", "b"] {
        let o = ws.run(&["simulate", "--config", s(&cfg), "--input", s(&input), "--out-dir", out]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    for file in ["degraded.tsm", "field.tsm", "metrics.csv", "meta.json"] {
        let a = fs::read(ws.path("a").join(file)).unwrap();
        let b = fs::read(ws.path("b").join(file)).unwrap();
        assert!(a == b, "{file} differs between runs");
    }
}

#[test]
fn stronger_turbulence_scores_lower() {
    let ws = Workspace::new();
    let input = ws.input();
    let mut scores = Vec::new();
    for (name, d) in [("weak", 0.3), ("strong", 2.5)] {
        let cfg = ws.write(&format!("{name}.toml"), &small_config(d, ""));
        let o = ws.run(&["simulate", "--config", s(&cfg), "--input", s(&input), "--out-dir", name]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        scores.push(psnr_from(&o));
    }
    assert!(scores[1] < scores[0], "weak {} strong {}", scores[0], scores[1]);
}

#[test]
fn missing_input_exits_with_two() {
    let ws = Workspace::new();
    let cfg = ws.write("run.toml", &small_config(1.0, ""));
    let o = ws.run(&["simulate", "--config", s(&cfg), "--input", "nowhere.tsm"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn bad_configs_exit_with_three() {
    let ws = Workspace::new();
    let unknown = ws.write("unknown.toml", "[turbulence]\nwobble = 1\n");
    let o = ws.run(&["check", "kl", "--config", s(&unknown)]);
    assert_eq!(o.status.code(), Some(3));
    let invalid = ws.write("invalid.toml", "[scan]\nblock = 6\n");
    let o = ws.run(&["check", "kl", "--config", s(&invalid)]);
    assert_eq!(o.status.code(), Some(3));
    let o = ws.run(&["check", "--config", "absent.toml", "kl"]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn empty_or_unknown_suites_exit_with_three() {
    let ws = Workspace::new();
    assert_eq!(ws.run(&["check"]).status.code(), Some(3));
    assert_eq!(ws.run(&["check", "no-such-suite"]).status.code(), Some(3));
    assert_eq!(ws.run(&["check", "kl", "--mutate", "bogus"]).status.code(), Some(3));
}

#[test]
fn checks_pass_and_mutations_fail() {
    let ws = Workspace::new();
    let ok = ws.run(&["check", "scan-oracle", "kl", "tensor-file"]);
    assert_eq!(ok.status.code(), Some(0), "{}", String::from_utf8_lossy(&ok.stdout));
    let text = String::from_utf8_lossy(&ok.stdout);
    assert_eq!(text.lines().count(), 4, "{text}");
    let bad = ws.run(&["check", "scan-oracle", "--mutate", "scan"]);
    assert_eq!(bad.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&bad.stdout).contains("fail"));
}

#[test]
fn runaway_inversion_exits_with_four() {
    let ws = Workspace::new();
    let extra = "[invert]\nsteps = 3\nstep_size = 1e300\nmin_step = 1e300\nsize = 8\nframes = 1\n";
    let cfg = ws.write("run.toml", &small_config(1.0, extra));
    let o = ws.run(&["invert", "--synthetic", "--config", s(&cfg), "--out-dir", "inv"]);
    assert_eq!(o.status.code(), Some(4), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn scan_order_dump_lists_every_token_once() {
    let ws = Workspace::new();
    let o = ws.run(&["scan-order", "dump", "--order", "local-hilbert", "--frames", "2", "--height", "8", "--width", "8", "--block", "4"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = String::from_utf8_lossy(&o.stdout);
    let mut seen: Vec<(usize, usize, usize)> = text
        .lines()
        .skip(1)
        .map(|l| {
            let v: Vec<usize> = l.split(',').map(|x| x.parse().unwrap()).collect();
            (v[1], v[2], v[3])
        })
        .collect();
    assert_eq!(seen.len(), 128);
    seen.sort_unstable();
    seen.dedup();
    assert_eq!(seen.len(), 128);
    let bad = ws.run(&["scan-order", "dump", "--height", "8", "--width", "8", "--block", "3"]);
    assert_eq!(bad.status.code(), Some(3));
}

#[test]
fn gen_weights_writes_a_loadable_stem() {
    let ws = Workspace::new();
    let o = ws.run(&["gen-weights", "--name", "net", "--out-dir", "w"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(ws.path("w").join("net.tsm").exists());
    assert!(ws.path("w").join("net.json").exists());
}
