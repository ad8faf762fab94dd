use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use mixedit::dataset::{read_wav, write_wav, WavFormat};
use mixedit::dsp::Clip;
use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_mixedit"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn mixedit")
}

fn json(args: &[&str]) -> Value {
    let mut all = vec!["--json"];
    all.extend_from_slice(args);
    let out = run(&all);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("JSON on stdout")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn shipped_catalog() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/synthetic_catalog")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn tone(f: f64, amp: f64, n: usize) -> Clip {
    Clip::new((0..n).map(|i| amp * (2.0 * std::f64::consts::PI * f * i as f64 / 16_000.0).sin()).collect(), 16_000)
        .unwrap()
}

fn tree(root: &Path) -> BTreeMap<String, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<String, Vec<u8>>) {
        for e in std::fs::read_dir(dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                walk(root, &p, out);
            } else {
                out.insert(p.strip_prefix(root).unwrap().to_string_lossy().into(), std::fs::read(&p).unwrap());
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(root, root, &mut out);
    out
}

#[test]
fn tasks_tables() {
    let v = json(&["tasks", "--composition", "2,2", "--table"]);
    let rows = v["tasks"].as_array().unwrap();
    assert_eq!(rows.len(), 16);
    assert_eq!(v["total"], 254);
    let counts: BTreeMap<&str, u64> =
        rows.iter().map(|r| (r["code"].as_str().unwrap(), r["count"].as_u64().unwrap())).collect();
    let expected = [
        ("TSE", 2), ("TSR", 2), ("TS↑", 2), ("TS↓", 2), ("SE", 1), ("SR", 1), ("S↑", 3), ("S↓", 3),
        ("TAE", 2), ("TAR", 2), ("TA↑", 2), ("TA↓", 2), ("ME", 4), ("MVC", 64), ("MEVC", 160), ("OVC", 2),
    ];
    assert_eq!(counts, expected.into_iter().collect());
    assert!(rows.iter().all(|r| r.get("edits").is_none()));

    let v = json(&["tasks", "--composition", "2,0"]);
    for r in v["tasks"].as_array().unwrap() {
        let code = r["code"].as_str().unwrap();
        if code.starts_with("TA") || ["SE", "SR", "S↑", "S↓"].contains(&code) {
            assert!(r["count"].is_null(), "{code} should be n/a");
        } else if !r["count"].is_null() {
            assert_eq!(r["edits"].as_array().unwrap().len() as u64, r["count"].as_u64().unwrap());
        }
    }
    assert_eq!(json(&["tasks", "--composition", "1,1"])["total"], 14);

    let human = run(&["tasks", "--composition", "2,0", "--table"]);
    let text = String::from_utf8(human.stdout).unwrap();
    assert!(text.lines().any(|l| l.starts_with("TAE") && l.trim_end().ends_with("n/a")));
    assert!(text.starts_with("config: "));
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(code(&run(&["tasks", "--composition", "two"])), 2);
    assert_eq!(code(&run(&["no-such-command"])), 2);
    assert_eq!(code(&run(&["generate", "--out", "/nonexistent"])), 2);
    assert_eq!(code(&run(&["edit", "--sources", "a.wav"])), 2);
    assert_eq!(code(&run(&["--version"])), 0);

    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "[tasks]\ncompositon = \"2,2\"\n").unwrap();
    assert_eq!(code(&run(&["--config", s(&cfg), "tasks"])), 2);
}

#[test]
fn edit_with_actions_and_prompts() {
    let dir = tempfile::tempdir().unwrap();
    let n = 8000;
    let srcs = [tone(220.0, 0.3, n), tone(500.0, 0.2, n), tone(3000.0, 0.1, n), tone(5000.0, 0.1, n)];
    let paths: Vec<PathBuf> = (0..4).map(|i| dir.path().join(format!("s{i}.wav"))).collect();
    for (c, p) in srcs.iter().zip(&paths) {
        write_wav(p, c, WavFormat::Float32).unwrap();
    }
    let mut base: Vec<&str> = vec!["edit", "--sources"];
    base.extend(paths.iter().map(|p| s(p)));

    // extraction of source 1: output is source 1, SNR clamped at +300
    let out = dir.path().join("y.wav");
    let mut a = base.clone();
    a.extend(["--actions", "1,0,0,0", "--out", s(&out)]);
    let v = json(&a);
    assert_eq!(v["metrics"]["snr"]["value"], 300.0);
    assert_eq!(v["metrics"]["snr"]["finite"], false);
    let y = read_wav(&out).unwrap();
    let s1 = read_wav(&paths[0]).unwrap();
    assert_eq!(y.samples(), s1.samples());

    // ASCII aliases and symbols give the same edit
    let (o1, o2) = (dir.path().join("a.wav"), dir.path().join("b.wav"));
    let mut a = base.clone();
    a.extend(["--actions", "0,d,u,1", "--out", s(&o1)]);
    let va = json(&a);
    let mut b = base.clone();
    b.extend(["--actions", "0,↓,↑,1", "--out", s(&o2)]);
    json(&b);
    assert_eq!(va["actions"], "[0, ↓, ↑, 1]");
    assert_eq!(std::fs::read(&o1).unwrap(), std::fs::read(&o2).unwrap());

    // ideal PSM mask on frequency-disjoint tones, with a mel dump
    let prefix = dir.path().join("mask/m");
    let mut p = base.clone();
    p.extend(["--actions", "0,d,u,1", "--editor", "psm", "--dump-mask", s(&prefix)]);
    let v = json(&p);
    assert!(v["metrics"]["snr"]["value"].as_f64().unwrap() > 20.0);
    assert!(v["metrics"]["snri"]["value"].as_f64().unwrap() > 0.0);
    let pgm = std::fs::read(prefix.with_extension("pgm")).unwrap();
    assert!(pgm.starts_with(b"P5\n"));
    let csv = std::fs::read_to_string(prefix.with_extension("csv")).unwrap();
    assert_eq!(csv.lines().count(), 64);

    // a prompt resolved through signatures
    let mut q = base.clone();
    q.extend([
        "--signature", "speech:male,low,normal,normal,neutral",
        "--signature", "speech:female,high,normal,normal,happy",
        "--signature", "audio:siren",
        "--signature", "audio:rain",
        "--prompt", "Please remove the female speaker and turn up the rain sound.",
    ]);
    let v = json(&q);
    assert_eq!(v["actions"], "[1, 0, 1, ↑]");
    assert_eq!(v["metrics"]["snr"]["value"], 300.0);

    // an unknown verb is a usage error with the span underlined
    let mut bad = base.clone();
    bad.extend(["--prompt", "Please vaporize the rain sound.", "--labels", "rain"]);
    let o = run(&bad);
    assert_eq!(code(&o), 2);
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("unknown verb") && err.contains("^^^^^^^^"), "{err}");
}

#[test]
fn generate_is_deterministic_and_honours_config_precedence() {
    let cat = shipped_catalog();
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "seed = 4\n[generate]\ntrain = 3\ntest = 2\nworkers = 2\n").unwrap();

    let a = dir.path().join("a");
    let v = json(&["--config", s(&cfg), "generate", "--catalog", s(&cat), "--out", s(&a), "--count", "6"]);
    assert_eq!(v["config"]["train"], 6, "flag beats file");
    assert_eq!(v["config"]["test"], 2, "file beats default");
    assert_eq!(v["config"]["seed"], 4);
    assert_eq!(v["config"]["workers"], 2);
    assert_eq!(v["summary"]["written"], 8);
    let per_task: u64 = v["summary"]["per_task"].as_object().unwrap().values().map(|n| n.as_u64().unwrap()).sum();
    assert_eq!(per_task, 8);

    let b = dir.path().join("b");
    json(&["--seed", "4", "generate", "--catalog", s(&cat), "--out", s(&b), "--count", "6", "--test-count", "2", "--workers", "8"]);
    assert!(tree(&a) == tree(&b), "same seed must give the same tree");

    let c = dir.path().join("c");
    json(&["--seed", "5", "generate", "--catalog", s(&cat), "--out", s(&c), "--count", "6", "--test-count", "2"]);
    assert_ne!(std::fs::read(a.join("manifest.jsonl")).unwrap(), std::fs::read(c.join("manifest.jsonl")).unwrap());

    // a missing catalog is a runtime failure
    let o = run(&["generate", "--catalog", s(&dir.path().join("nope")), "--out", s(&dir.path().join("d"))]);
    assert_eq!(code(&o), 1);
}

#[test]
fn eval_reports_quartiles_and_improvement() {
    let cat = shipped_catalog();
    let dir = tempfile::tempdir().unwrap();
    let g = dir.path().join("g");
    json(&["--seed", "9", "generate", "--catalog", s(&cat), "--out", s(&g), "--count", "10"]);
    let (input, target) = (g.join("input"), g.join("target"));

    // est = ref: every SNRi is 300 minus the unprocessed SNR, flagged as clamped
    let v = json(&["eval", "--est", s(&target), "--ref", s(&target), "--input", s(&input)]);
    for f in v["files"].as_array().unwrap() {
        assert_eq!(f["clamped"], true);
        let expect = 300.0 - f["input_snr"].as_f64().unwrap();
        assert!((f["snri"].as_f64().unwrap() - expect).abs() < 1e-9);
    }
    // est = input: SNRi is 0 everywhere and nothing improved
    let v = json(&["eval", "--est", s(&input), "--ref", s(&target), "--input", s(&input)]);
    assert_eq!(v["overall"]["improved"], 0.0);
    assert!(v["files"].as_array().unwrap().iter().all(|f| f["snri"] == 0.0));

    // a blend of input and target; quartiles against a sort-based recomputation
    let est = dir.path().join("est");
    std::fs::create_dir_all(&est).unwrap();
    for (k, e) in std::fs::read_dir(&target).unwrap().enumerate() {
        let name = e.unwrap().file_name();
        let (x, y) = (read_wav(&input.join(&name)).unwrap(), read_wav(&target.join(&name)).unwrap());
        let w = 0.1 * k as f64;
        let blend: Vec<f64> = x.samples().iter().zip(y.samples()).map(|(a, b)| w * a + (1.0 - w) * b).collect();
        write_wav(&est.join(&name), &Clip::new(blend, 16_000).unwrap(), WavFormat::Float32).unwrap();
    }
    let manifest = g.join("manifest.jsonl");
    let v = json(&["eval", "--est", s(&est), "--ref", s(&target), "--input", s(&input), "--per-task", s(&manifest)]);
    let mut vals: Vec<f64> = v["files"].as_array().unwrap().iter().map(|f| f["snri"].as_f64().unwrap()).collect();
    vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let q = |p: f64| {
        // position p·(n−1), interpolated between its neighbours
        let h = p * (vals.len() as f64 - 1.0);
        let below = vals[h as usize];
        let above = vals[(h as usize + 1).min(vals.len() - 1)];
        below + (h - h.trunc()) * (above - below)
    };
    for (key, p) in [("q25", 0.25), ("median", 0.5), ("q75", 0.75)] {
        assert!((v["overall"][key].as_f64().unwrap() - q(p)).abs() < 1e-9, "{key}");
    }
    let improved = vals.iter().filter(|x| **x > 0.0).count() as f64 / vals.len() as f64;
    assert_eq!(v["overall"]["improved"].as_f64().unwrap(), improved);
    let grouped: u64 = v["per_task"].as_object().unwrap().values().map(|g| g["count"].as_u64().unwrap()).sum();
    assert_eq!(grouped, 10);

    // a missing counterpart is a runtime failure
    std::fs::remove_file(std::fs::read_dir(&est).unwrap().next().unwrap().unwrap().path()).unwrap();
    let o = run(&["eval", "--est", s(&est), "--ref", s(&target), "--input", s(&input)]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("missing pair"));
}

#[test]
fn train_toy_checkpoint_feeds_the_film_editor() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let v = json(&["--seed", "3", "train-toy", "--out", s(&a), "--steps", "15"]);
    json(&["--seed", "3", "train-toy", "--out", s(&b), "--steps", "15"]);
    assert_eq!(v["steps"], 15);
    assert!(v["final_loss"].as_f64().unwrap() < v["initial_loss"].as_f64().unwrap());
    assert_eq!(std::fs::read(a.join("film.ckpt")).unwrap(), std::fs::read(b.join("film.ckpt")).unwrap());
    let csv = std::fs::read_to_string(a.join("loss.csv")).unwrap();
    assert_eq!(csv.lines().count(), 16);
    assert!(csv.starts_with("step,loss_db\n"));

    let (s1, s2) = (dir.path().join("s1.wav"), dir.path().join("s2.wav"));
    write_wav(&s1, &tone(200.0, 0.3, 3200), WavFormat::Float32).unwrap();
    write_wav(&s2, &tone(3000.0, 0.2, 3201), WavFormat::Float32).unwrap();
    let out = dir.path().join("y.wav");
    let ckpt = a.join("film.ckpt");
    let v = json(&[
        "edit", "--sources", s(&s1), s(&s2), "--signature", "speech:male,low,normal,normal,neutral",
        "--signature", "audio:beep", "--actions", "1,0", "--editor", "film", "--checkpoint", s(&ckpt), "--out", s(&out),
    ]);
    assert_eq!(v["task"], "SE");
    assert!(v["metrics"]["snr"]["value"].as_f64().unwrap().is_finite());
    assert_eq!(read_wav(&out).unwrap().len(), 3201);

    let o = run(&["train-toy", "--out", s(&dir.path().join("c")), "--lr", "1e300", "--steps", "30"]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("diverged"));
}

#[test]
fn synth_catalog_and_parse() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    std::fs::write(&cfg, "[synth_catalog]\nspeakers = 4\nclips_per_label = 1\nmin_seconds = 0.5\nmax_seconds = 1.0\n").unwrap();
    let cat = dir.path().join("cat");
    let v = json(&["--config", s(&cfg), "synth-catalog", "--out", s(&cat)]);
    assert_eq!(v["entries"], 14);
    assert_eq!(std::fs::read_to_string(cat.join("metadata.csv")).unwrap().lines().count(), 15);

    let v = json(&["parse", "Can you remove the clock ticking sound?", "--catalog", s(&cat)]);
    assert_eq!(v["instruction"]["edits"][0]["action"], "remove");
    assert_eq!(v["instruction"]["edits"][0]["target"]["label"], "clock ticking");
    assert_eq!(code(&run(&["parse", "Can you defenestrate the clock ticking sound?"])), 2);
}
