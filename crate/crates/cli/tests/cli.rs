use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn jgmc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_jgmc")).args(args).output().expect("spawn jgmc")
}

fn ok(out: &Output) {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
}

fn p(path: &Path) -> &str {
    path.to_str().expect("utf-8 path")
}

const TINY: &str = r#"{"name": "tiny", "primitives": ["prism6", "pyramid5"], "seed": 3}"#;

fn tiny_instance(dir: &Path) -> std::path::PathBuf {
    let scen = dir.join("tiny.json");
    std::fs::write(&scen, TINY).unwrap();
    let data = dir.join("data");
    ok(&jgmc(&["generate", "--scenario", p(&scen), "--out", p(&data)]));
    data.join("tiny_sigma0_seed3").join("instance.json")
}

#[test]
fn generate_writes_pairs_and_manifest_deterministically() {
    let tmp = TempDir::new().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for out in [&a, &b] {
        ok(&jgmc(&["generate", "--preset", "nodes11", "--seed", "4", "--sigma", "0,2", "--out", p(out)]));
    }
    let manifest: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(a.join("manifest.json")).unwrap()).unwrap();
    let listed = manifest["instances"].as_array().unwrap();
    assert_eq!(listed.len(), 2);
    for entry in listed {
        let inst = Path::new(entry.as_str().unwrap());
        let dir = inst.parent().unwrap();
        for f in ["g1.json", "g2.json", "instance.json"] {
            let x = std::fs::read(a.join(dir).join(f)).unwrap();
            let y = std::fs::read(b.join(dir).join(f)).unwrap();
            assert_eq!(x, y, "{f} differs between runs");
        }
    }
}

#[test]
fn solve_then_eval_recovers_noiseless_pair() {
    let tmp = TempDir::new().unwrap();
    let inst = tiny_instance(tmp.path());
    let res = tmp.path().join("res.json");
    ok(&jgmc(&["solve", "--instance", p(&inst), "--k", "2", "--dim", "3", "--out", p(&res)]));
    let csv = tmp.path().join("scores.csv");
    ok(&jgmc(&["eval", "--result", p(&res), "--out", p(&csv)]));
    let text = std::fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "scenario,sigma,method,m_acc,f1,f2,c_acc,mc_acc,secs");
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(&row[..3], &["tiny", "0.0", "coupled"]);
    for v in &row[3..8] {
        assert_eq!(v.parse::<f64>().unwrap(), 1.0, "row {row:?}");
    }
}

#[test]
fn matching_only_run_is_accepted() {
    let tmp = TempDir::new().unwrap();
    let inst = tiny_instance(tmp.path());
    let res = tmp.path().join("res.json");
    ok(&jgmc(&["solve", "--instance", p(&inst), "--k", "1", "--dim", "2", "--lambda-c", "0", "--out", p(&res)]));
    let r: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&res).unwrap()).unwrap();
    assert_eq!(r["lambda_c"].as_f64(), Some(0.0));
    assert_eq!(r["perm"].as_array().unwrap().len(), 11);
}

#[test]
fn malformed_input_exits_with_code_two() {
    let tmp = TempDir::new().unwrap();
    let bad = tmp.path().join("bad.json");
    std::fs::write(&bad, "{not json").unwrap();
    let out = jgmc(&["solve", "--pair", p(&bad), p(&bad), "--out", p(&tmp.path().join("r.json"))]);
    assert_eq!(out.status.code(), Some(2));
    let out = jgmc(&["solve", "--pair", p(&bad), p(&bad), "--dim", "many", "--out", p(&tmp.path().join("r.json"))]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn eval_without_ground_truth_fails() {
    let tmp = TempDir::new().unwrap();
    let inst = tiny_instance(tmp.path());
    let dir = inst.parent().unwrap();
    let res = tmp.path().join("res.json");
    ok(&jgmc(&["solve", "--pair", p(&dir.join("g1.json")), p(&dir.join("g2.json")), "--k", "1", "--dim", "2", "--out", p(&res)]));
    let out = jgmc(&["eval", "--result", p(&res), "--out", p(&tmp.path().join("s.csv"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--gt"));
    ok(&jgmc(&["eval", "--result", p(&res), "--gt", p(&inst), "--out", p(&tmp.path().join("s.csv"))]));
}

const HEADER: &str = "scenario,sigma,method,m_acc,f1,f2,c_acc,mc_acc,secs\n";

#[test]
fn plot_draws_one_polyline_per_method() {
    let tmp = TempDir::new().unwrap();
    let csv = tmp.path().join("s.csv");
    std::fs::write(
        &csv,
        format!("{HEADER}x,0,coupled,1,1,1,1,1,1\nx,2,coupled,1,1,1,1,0.8,1\nx,0,uncoupled,1,1,1,1,0.9,1\nx,2,uncoupled,1,1,1,1,0.5,1\n"),
    )
    .unwrap();
    let svg = tmp.path().join("p.svg");
    ok(&jgmc(&["plot", "--csv", p(&csv), "--out", p(&svg)]));
    let text = std::fs::read_to_string(&svg).unwrap();
    assert_eq!(text.matches("<polyline").count(), 2);
    assert!(text.contains(">coupled<") && text.contains(">uncoupled<"));
}

#[test]
fn plot_of_single_point_has_a_marker() {
    let tmp = TempDir::new().unwrap();
    let csv = tmp.path().join("s.csv");
    std::fs::write(&csv, format!("{HEADER}x,0,coupled,1,1,1,1,1,1\n")).unwrap();
    let svg = tmp.path().join("p.svg");
    ok(&jgmc(&["plot", "--csv", p(&csv), "--metric", "m_acc", "--out", p(&svg)]));
    let text = std::fs::read_to_string(&svg).unwrap();
    assert_eq!(text.matches("<circle").count(), 1);
    assert_eq!(text.matches("<polyline").count(), 0);
}

#[test]
fn plot_rejects_empty_csv() {
    let tmp = TempDir::new().unwrap();
    let csv = tmp.path().join("s.csv");
    std::fs::write(&csv, HEADER).unwrap();
    let out = jgmc(&["plot", "--csv", p(&csv), "--out", p(&tmp.path().join("p.svg"))]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn sweep_directory_gives_one_row_per_instance() {
    let tmp = TempDir::new().unwrap();
    let scen = tmp.path().join("tiny.json");
    std::fs::write(&scen, TINY).unwrap();
    let data = tmp.path().join("data");
    ok(&jgmc(&["generate", "--scenario", p(&scen), "--sigma", "0,1", "--out", p(&data)]));
    let results = tmp.path().join("results");
    for id in ["tiny_sigma0_seed3", "tiny_sigma1_seed3"] {
        let inst = data.join(id).join("instance.json");
        let out = results.join(format!("{id}.json"));
        ok(&jgmc(&["solve", "--instance", p(&inst), "--k", "1", "--dim", "2", "--out", p(&out)]));
    }
    let csv = tmp.path().join("s.csv");
    ok(&jgmc(&["eval", "--result", p(&results), "--out", p(&csv)]));
    let text = std::fs::read_to_string(&csv).unwrap();
    let sigmas: Vec<&str> = text.lines().skip(1).map(|l| l.split(',').nth(1).unwrap()).collect();
    assert_eq!(sigmas, ["0.0", "1.0"]);
}

#[test]
fn solve_is_reproducible_up_to_timings() {
    let tmp = TempDir::new().unwrap();
    let inst = tiny_instance(tmp.path());
    let mut runs = Vec::new();
    for name in ["a.json", "b.json"] {
        let res = tmp.path().join(name);
        ok(&jgmc(&["solve", "--instance", p(&inst), "--k", "1", "--dim", "2", "--out", p(&res)]));
        let mut v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&res).unwrap()).unwrap();
        v.as_object_mut().unwrap().remove("timings");
        let report = v["report"].as_object_mut().unwrap();
        report.remove("solve_seconds");
        report.remove("setup_seconds");
        runs.push(v);
    }
    assert_eq!(runs[0], runs[1]);
}
