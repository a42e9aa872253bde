use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use cropshift::TrainedClassifier;
use tempfile::TempDir;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cropshift")).args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// Small synthetic world on disk.
fn world(dir: &Path) -> PathBuf {
    let spec = dir.join("spec.toml");
    let default = run(&["synth", "--dump-spec"]);
    assert_eq!(code(&default), 0);
    let text = String::from_utf8(default.stdout).unwrap();
    let text = text.replace("samples_per_region = [2000, 2000, 2000]", "samples_per_region = [300, 300, 300]");
    assert!(text.contains("[300, 300, 300]"), "{text}");
    fs::write(&spec, text).unwrap();
    let out = dir.join("world");
    assert_eq!(code(&run(&["synth", "--spec", p(&spec), "--out", p(&out)])), 0);
    out
}

fn experiment_args(world: &Path, out: &Path, method: &str) -> Vec<String> {
    let mut v: Vec<String> = ["experiment", "--method", method, "--train-region", "r1", "--out", p(out)]
        .map(String::from)
        .to_vec();
    for r in ["r1", "r2", "r3"] {
        v.push("--features".into());
        v.push(p(&world.join(format!("{r}.csv"))).into());
    }
    v.push("--priors".into());
    v.push(p(&world.join("priors.csv")).into());
    v
}

fn run_owned(args: &[String]) -> Output {
    run(&args.iter().map(String::as_str).collect::<Vec<_>>())
}

fn tree(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let path = e.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                out.push((path.strip_prefix(dir).unwrap().to_path_buf(), fs::read(&path).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn synth_writes_regions_and_priors_reproducibly() {
    let tmp = TempDir::new().unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    assert_eq!(code(&run(&["synth", "--out", p(&a)])), 0);
    assert_eq!(code(&run(&["synth", "--out", p(&b)])), 0);
    let names: Vec<_> = tree(&a).into_iter().map(|(n, _)| n).collect();
    assert_eq!(names, ["priors.csv", "r1.csv", "r2.csv", "r3.csv", "spec.toml"].map(PathBuf::from));
    assert_eq!(tree(&a), tree(&b));
}

#[test]
fn synth_rejects_priors_not_summing_to_one() {
    let tmp = TempDir::new().unwrap();
    let text = String::from_utf8(run(&["synth", "--dump-spec"]).stdout).unwrap();
    let tampered = text.replacen("0.65", "0.75", 1);
    assert_ne!(tampered, text);
    let spec = tmp.path().join("bad.toml");
    fs::write(&spec, tampered).unwrap();
    assert_eq!(code(&run(&["synth", "--spec", p(&spec), "--out", p(&tmp.path().join("o"))])), 2);
}

#[test]
fn experiment_is_byte_identical_across_runs_and_workers() {
    let tmp = TempDir::new().unwrap();
    let w = world(tmp.path());
    let out = tmp.path().join("run");
    let mut snapshots = Vec::new();
    for workers in ["1", "1", "4"] {
        let mut args = experiment_args(&w, &out, "all");
        args.extend(["--classifier", "rf", "--n-trees", "20", "--seed", "42", "--workers", workers].map(String::from));
        let o = run_owned(&args);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        snapshots.push((tree(&out), o.stdout));
        fs::remove_dir_all(&out).unwrap();
    }
    assert_eq!(snapshots[0], snapshots[1]);
    assert_eq!(snapshots[0], snapshots[2]);
}

#[test]
fn sweeping_all_methods_writes_eight_directories() {
    let tmp = TempDir::new().unwrap();
    let w = world(tmp.path());
    let out = tmp.path().join("all");
    let mut args = experiment_args(&w, &out, "all");
    args.extend(["--seed".into(), "1".into()]);
    let o = run_owned(&args);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let mut dirs: Vec<String> = fs::read_dir(&out)
        .unwrap()
        .map(|e| e.unwrap())
        .filter(|e| e.path().is_dir())
        .map(|e| e.file_name().into_string().unwrap())
        .collect();
    dirs.sort();
    assert_eq!(dirs, ["fpsa", "fsa", "gmc", "psa", "smote-psa", "uat", "zt-fpsa", "zt-smote-fpsa"]);
    assert!(out.join("fpsa/shifts.csv").exists());
    assert_eq!(String::from_utf8(o.stdout).unwrap().lines().count(), 8);
}

#[test]
fn gmc_accuracy_is_the_majority_frequency() {
    let tmp = TempDir::new().unwrap();
    let w = world(tmp.path());
    let out = tmp.path().join("gmc");
    assert_eq!(code(&run_owned(&experiment_args(&w, &out, "gmc"))), 0);
    let metrics: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("gmc/metrics.json")).unwrap()).unwrap();
    let mut majority = 0;
    let mut total = 0;
    for r in ["r2", "r3"] {
        let text = fs::read_to_string(w.join(format!("{r}.csv"))).unwrap();
        let mut counts = std::collections::BTreeMap::new();
        for line in text.lines().skip(1) {
            *counts.entry(line.split(',').nth(2).unwrap().to_string()).or_insert(0) += 1;
            total += 1;
        }
        majority += counts.values().max().unwrap();
    }
    assert_eq!(metrics["aggregate"]["overall_accuracy"].as_f64().unwrap(), majority as f64 / total as f64);
}

#[test]
fn exit_codes() {
    let tmp = TempDir::new().unwrap();
    let w = world(tmp.path());

    // priors missing a test region
    let priors = fs::read_to_string(w.join("priors.csv")).unwrap();
    let no_r3: String = priors.lines().filter(|l| !l.starts_with("r3,")).map(|l| format!("{l}\n")).collect();
    let partial = tmp.path().join("partial.csv");
    fs::write(&partial, no_r3).unwrap();
    let mut args = experiment_args(&w, &tmp.path().join("o1"), "fpsa");
    *args.last_mut().unwrap() = p(&partial).into();
    assert_eq!(code(&run_owned(&args)), 4);

    // a class with priors but no training samples
    let extra = tmp.path().join("extra.csv");
    fs::write(&extra, format!("{priors}r2,rye,0\n")).unwrap();
    let mut args = experiment_args(&w, &tmp.path().join("o2"), "fpsa");
    *args.last_mut().unwrap() = p(&extra).into();
    assert_eq!(code(&run_owned(&args)), 3);

    // malformed feature value
    let r2 = fs::read_to_string(w.join("r2.csv")).unwrap();
    let broken = tmp.path().join("r2.csv");
    let mut lines: Vec<&str> = r2.lines().collect();
    let bad_row = lines[3].replacen("e0,", "x0,", 1);
    lines[3] = &bad_row;
    fs::write(&broken, lines.join("\n")).unwrap();
    let mut args = experiment_args(&w, &tmp.path().join("o3"), "uat");
    let idx = args.iter().position(|a| a.ends_with("r2.csv")).unwrap();
    args[idx] = p(&broken).into();
    let o = run_owned(&args);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 4"), "{}", String::from_utf8_lossy(&o.stderr));

    // stochastic method without a seed
    assert_eq!(code(&run_owned(&experiment_args(&w, &tmp.path().join("o4"), "smote-psa"))), 4);
    // unknown method
    assert_eq!(code(&run_owned(&experiment_args(&w, &tmp.path().join("o5"), "bogus"))), 4);
}

#[test]
fn config_file_supplies_settings() {
    let tmp = TempDir::new().unwrap();
    world(tmp.path());
    let cfg = tmp.path().join("run.toml");
    fs::write(
        &cfg,
        "schema_version = 1\nmethod = \"psa\"\nclassifier = \"rf\"\nn_trees = 20\nseed = 3\ntrain_region = \"r1\"\n\
         features = [\"world/r1.csv\", \"world/r2.csv\", \"world/r3.csv\"]\npriors = \"world/priors.csv\"\nout_dir = \"cfg_out\"\n",
    )
    .unwrap();
    let o = run(&["experiment", "--config", p(&cfg)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let echoed = fs::read_to_string(tmp.path().join("cfg_out/config.toml")).unwrap();
    assert!(echoed.contains("n_trees = 20") && echoed.contains("seed = 3"), "{echoed}");

    let o = run(&["experiment", "--config", p(&cfg), "--method", "uat", "--out", p(&tmp.path().join("flag_out"))]);
    assert_eq!(code(&o), 0);
    assert!(tmp.path().join("flag_out/uat/metrics.json").exists());

    fs::write(&cfg, "method = \"psa\"\n").unwrap();
    assert_eq!(code(&run(&["experiment", "--config", p(&cfg)])), 4);
}

fn timeseries(bands: &[&str], pixels: &[(&str, usize)]) -> String {
    let mut s = String::from("pixel_id,region_id,label,band,time_years,value,clear\n");
    for &(pid, clear_days) in pixels {
        for i in 0..10 {
            let t = i as f64 / 10.0;
            for (b, band) in bands.iter().enumerate() {
                let v = 0.1 + 0.05 * b as f64 + 0.02 * (std::f64::consts::TAU * t).cos();
                s += &format!("{pid},r,wheat,{band},{t},{v},{}\n", (i < clear_days) as u8);
            }
        }
    }
    s
}

#[test]
fn features_command() {
    let tmp = TempDir::new().unwrap();
    let bands: Vec<String> = (1..=13).map(|i| format!("B{i}")).collect();
    let band_refs: Vec<&str> = bands.iter().map(String::as_str).collect();
    let input = tmp.path().join("ts.csv");
    fs::write(&input, timeseries(&band_refs, &[("good", 10), ("cloudy", 4)])).unwrap();
    let out = tmp.path().join("features.csv");
    let manifest = format!("{},GCVI", bands.join(","));
    let o = run(&["features", "--input", p(&input), "--bands", &manifest, "--gcvi", "B8,B3", "--out", p(&out)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));

    let text = fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[0].split(',').count(), 3 + 70);
    assert!(lines[1].starts_with("good,"));
    let dropped = fs::read_to_string(tmp.path().join("features.dropped.csv")).unwrap();
    assert!(dropped.lines().nth(1).unwrap().starts_with("cloudy,r,"), "{dropped}");
    assert_eq!(fs::read_to_string(tmp.path().join("features.bands")).unwrap().lines().count(), 14);

    let empty = tmp.path().join("empty.csv");
    fs::write(&empty, "").unwrap();
    let o = run(&["features", "--input", p(&empty), "--bands", "B1,B2", "--out", p(&tmp.path().join("e.csv"))]);
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stderr).contains("warning"));
    assert_eq!(fs::read_to_string(tmp.path().join("e.csv")).unwrap().lines().count(), 1);

    let bad = tmp.path().join("bad.csv");
    fs::write(&bad, "pixel_id,region_id,label,band,time_years,value,clear\np,r,,B1,0.1,0.2,yes\n").unwrap();
    let o = run(&["features", "--input", p(&bad), "--bands", "B1", "--out", p(&tmp.path().join("b.csv"))]);
    assert_eq!(code(&o), 2);
}

#[test]
fn entropy_command() {
    let tmp = TempDir::new().unwrap();
    let priors = tmp.path().join("p.csv");
    let mut text = String::from("region_id,class,proportion\nz,only,1\n");
    for c in 0..6 {
        text += &format!("a,c{c},{}\n", 1.0 / 6.0);
    }
    fs::write(&priors, text).unwrap();
    let o = run(&["entropy", "--priors", p(&priors)]);
    assert_eq!(code(&o), 0);
    let out = String::from_utf8(o.stdout).unwrap();
    let rows: Vec<(&str, f64)> = out
        .lines()
        .skip(1)
        .map(|l| {
            let (r, v) = l.split_once(',').unwrap();
            (r, v.parse().unwrap())
        })
        .collect();
    assert_eq!(rows[0].0, "a");
    assert!((rows[0].1 - 6f64.ln()).abs() < 1e-9);
    assert_eq!(rows[1], ("z", 0.0));
}

#[test]
fn priors_from_areas_command() {
    let tmp = TempDir::new().unwrap();
    let areas = tmp.path().join("areas.csv");
    fs::write(&areas, "region_id,class,area,mean_field_area\nr,a,100,10\nr,b,300,30\n").unwrap();
    let o = run(&["priors-from-areas", "--input", p(&areas)]);
    assert_eq!(code(&o), 0);
    assert_eq!(
        String::from_utf8(o.stdout).unwrap(),
        "region_id,class,proportion\nr,a,5.0000000000000000e-1\nr,b,5.0000000000000000e-1\n"
    );
    fs::write(&areas, "region_id,class,area,mean_field_area\nr,a,100,0\n").unwrap();
    assert_eq!(code(&run(&["priors-from-areas", "--input", p(&areas)])), 2);
}

#[test]
fn train_writes_a_loadable_model() {
    let tmp = TempDir::new().unwrap();
    let w = world(tmp.path());
    let model = tmp.path().join("model.json");
    let o = run(&[
        "train", "--features", p(&w.join("r1.csv")), "--region", "r1", "--classifier", "rf", "--n-trees", "5",
        "--seed", "2", "--out", p(&model),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let m = TrainedClassifier::from_json(&fs::read_to_string(&model).unwrap()).unwrap();
    assert_eq!(m.class_list().len(), 4);
    assert_eq!(code(&run(&["train", "--features", p(&w.join("r1.csv")), "--region", "r1", "--classifier", "rf", "--out", p(&model)])), 4);
}
