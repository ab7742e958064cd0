use serde_json::{json, Value};
use spatspec::io::{read_field, read_points, read_tapers, write_field, write_points, write_tapers};
use spatspec_core::fourier::{GriddedField, PointPattern};
use spatspec_core::geometry::{BBox, Region, SamplingScheme};
use spatspec_core::linalg::Selection;
use spatspec_core::tapers::{compute_tapers, GridNodes, TaperOptions};
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn spatspec(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spatspec"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("spawn spatspec")
}

fn ok(dir: &Path, args: &[&str]) {
    let out = spatspec(dir, args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
}

fn write(path: &Path, v: &Value) {
    fs::write(path, serde_json::to_string_pretty(v).unwrap()).unwrap();
}

fn rect_region(dir: &Path) {
    write(&dir.join("region.json"), &json!({"dim": 2, "bbox": {"lo": [0, 0], "hi": [60, 40]}, "delta_ref": [2, 2]}));
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    let mut rdr = csv::Reader::from_path(path).unwrap();
    rdr.records().map(|r| r.unwrap().iter().map(String::from).collect()).collect()
}

#[test]
fn tapers_are_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    rect_region(d);
    ok(d, &["tapers", "--region", "region.json", "--bandwidth", "0.1", "--count", "4", "--out", "a"]);
    ok(d, &["--threads", "1", "tapers", "--region", "region.json", "--bandwidth", "0.1", "--count", "4", "--out", "b"]);
    for f in ["metadata.json", "taper_000.csv", "taper_003.csv"] {
        assert_eq!(fs::read(d.join("a").join(f)).unwrap(), fs::read(d.join("b").join(f)).unwrap(), "{f}");
    }
    let meta: Value = serde_json::from_str(&fs::read_to_string(d.join("a/metadata.json")).unwrap()).unwrap();
    assert_eq!(meta["count"], 4);
}

#[test]
fn masked_tapers_vanish_outside_the_mask() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let (n0, n1) = (30, 20);
    let inside = |i: usize, j: usize| {
        let x = (i as f64 + 0.5) / n0 as f64 - 0.5;
        let y = (j as f64 + 0.5) / n1 as f64 - 0.5;
        x * x + y * y < 0.2
    };
    let mask: String = (0..n0)
        .map(|i| (0..n1).map(|j| if inside(i, j) { "1" } else { "0" }).collect::<Vec<_>>().join(",") + "\n")
        .collect();
    fs::write(d.join("mask.csv"), mask).unwrap();
    write(
        &d.join("region.json"),
        &json!({"dim": 2, "bbox": {"lo": [0, 0], "hi": [60, 40]}, "delta_ref": [2, 2], "mask": "mask.csv"}),
    );
    ok(d, &["tapers", "--region", "region.json", "--bandwidth", "0.1", "--threshold", "0.9", "--out", "t"]);
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).from_path(d.join("t/taper_000.csv")).unwrap();
    let rows: Vec<Vec<f64>> = rdr.records().map(|r| r.unwrap().iter().map(|v| v.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), n0);
    let mut energy = 0.0;
    for (i, row) in rows.iter().enumerate() {
        assert_eq!(row.len(), n1);
        for (j, &v) in row.iter().enumerate() {
            if !inside(i, j) {
                assert_eq!(v, 0.0, "cell ({i},{j})");
            }
            energy += v * v;
        }
    }
    assert!((energy - 1.0).abs() < 1e-9, "energy {energy}");
}

#[test]
fn simulate_writes_data_and_truth() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    rect_region(d);
    write(
        &d.join("model.json"),
        &json!({"region": "region.json", "lambda": 0.05, "tau": [3, 4], "kgrid": {"step": [0.02, 0.02], "len": [3, 3]}}),
    );
    ok(d, &["simulate", "--model", "shifted-pair", "--config", "model.json", "--seed", "7", "--out", "sim", "--truth"]);
    let sim: Value = serde_json::from_str(&fs::read_to_string(d.join("sim/simulation.json")).unwrap()).unwrap();
    assert_eq!(sim["labels"].as_array().unwrap().len(), 2);
    let truth = csv_rows(&d.join("sim/truth.csv"));
    assert_eq!(truth.len(), 9 * 4);
    for row in &truth {
        if row[2] == row[3] {
            assert!((row[4].parse::<f64>().unwrap() - 0.05).abs() < 1e-12);
        }
    }
    let wrong = spatspec(d, &["simulate", "--model", "poisson", "--config", "nope.json", "--out", "x"]);
    assert_eq!(wrong.status.code(), Some(2));
}

#[test]
fn estimate_flat_poisson_spectrum() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    rect_region(d);
    write(
        &d.join("run.json"),
        &json!({
            "region": "region.json",
            "model": {"type": "poisson", "lambda": 0.1},
            "taper": {"bandwidth": 0.1, "count": 6},
            "kgrid": {"step": [0.05, 0.05], "len": [9, 9]},
            "seed": 5,
            "output": "est"
        }),
    );
    ok(d, &["estimate", "--config", "run.json"]);
    let rows = csv_rows(&d.join("est/spectrum.csv"));
    assert_eq!(rows.len(), 81);
    let vals: Vec<f64> = rows.iter().map(|r| r[4].parse().unwrap()).collect();
    assert!(vals.iter().all(|v| v.is_finite() && *v > 0.0));
    assert!(rows.iter().all(|r| r[5].parse::<f64>().unwrap() == 0.0));
    let mean = vals.iter().sum::<f64>() / vals.len() as f64;
    assert!((mean / 0.1 - 1.0).abs() < 0.5, "mean {mean}");
    let meta: Value = serde_json::from_str(&fs::read_to_string(d.join("est/metadata.json")).unwrap()).unwrap();
    assert_eq!(meta["M"], 6);
}

fn mixed_setup(d: &Path) {
    rect_region(d);
    write(
        &d.join("lgcp.json"),
        &json!({
            "region": "region.json", "lambda": 0.05, "refine": 4,
            "matern": {"sigma": 1, "ell": 8, "nu": 2.5}, "grid": {"spacing": [2, 2], "offset": [1, 1]}
        }),
    );
    write(&d.join("marked.json"), &json!({"region": "region.json", "lambda": 0.05, "mark_mean": 2, "mark_sd": 0.5}));
    ok(d, &["simulate", "--model", "lgcp", "--config", "lgcp.json", "--seed", "1", "--out", "lg"]);
    ok(d, &["simulate", "--model", "marked-poisson", "--config", "marked.json", "--seed", "2", "--out", "mk"]);
}

fn mixed_run(d: &Path, name: &str, extra: Value) {
    let mut cfg = json!({
        "region": "lg/region.json",
        "processes": [
            {"type": "field", "label": "field", "path": "lg/field.csv"},
            {"type": "points", "label": "points", "path": "lg/points.csv"},
            {"type": "points", "label": "marked", "path": "mk/points.csv"}
        ],
        "taper": {"bandwidth": 0.1, "count": 4},
        "kgrid": {"step": [0.02, 0.02], "len": [5, 5]},
        "output": format!("out_{name}")
    });
    for (k, v) in extra.as_object().unwrap() {
        cfg[k] = v.clone();
    }
    write(&d.join(format!("{name}.json")), &cfg);
}

#[test]
fn estimate_mixed_three_process_dataset() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    mixed_setup(d);
    mixed_run(d, "mixed", json!({}));
    ok(d, &["estimate", "--config", "mixed.json"]);
    let spec = csv_rows(&d.join("out_mixed/spectrum.csv"));
    assert_eq!(spec.len(), 25 * 9);
    let coh = csv_rows(&d.join("out_mixed/coherence.csv"));
    assert!(!coh.is_empty());
    for row in &coh {
        let r: f64 = row[row.len() - 2].parse().unwrap();
        assert!((0.0..=1.0 + 1e-12).contains(&r), "coherence {r}");
    }
    let gd = csv_rows(&d.join("out_mixed/group_delay.csv"));
    assert_eq!(gd.len(), 3);
    let prov: Value = serde_json::from_str(&fs::read_to_string(d.join("out_mixed/provenance.json")).unwrap()).unwrap();
    assert!(prov["inputs"].as_array().unwrap().len() >= 4);

    // Re-running, with any thread count, reproduces every output byte.
    ok(d, &["--threads", "1", "estimate", "--config", "mixed.json", "--out", "again"]);
    for f in ["spectrum.csv", "coherence.csv", "group_delay.csv", "metadata.json"] {
        assert_eq!(fs::read(d.join("out_mixed").join(f)).unwrap(), fs::read(d.join("again").join(f)).unwrap(), "{f}");
    }
}

fn cross_magnitude(path: &Path, p: &str, q: &str) -> f64 {
    csv_rows(path)
        .iter()
        .filter(|r| r[2] == p && r[3] == q)
        .map(|r| r[4].parse::<f64>().unwrap().hypot(r[5].parse().unwrap()))
        .sum()
}

#[test]
fn mixed_tapers_need_the_flag_and_attenuate_the_cross_spectrum() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    mixed_setup(d);
    mixed_run(d, "matched", json!({}));
    mixed_run(d, "rot", json!({"taper_offsets": [1, 0, 0]}));
    let out = spatspec(d, &["estimate", "--config", "rot.json"]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
    ok(d, &["estimate", "--config", "matched.json"]);
    ok(d, &["estimate", "--config", "rot.json", "--allow-mixed-tapers"]);
    let matched = cross_magnitude(&d.join("out_matched/spectrum.csv"), "field", "points");
    let mixed = cross_magnitude(&d.join("out_rot/spectrum.csv"), "field", "points");
    eprintln!("matched {matched:e} mixed {mixed:e}");
    assert!(mixed < 0.5 * matched, "matched {matched:e}, mixed {mixed:e}");
}

#[test]
fn wavenumbers_stay_inside_the_nyquist_box_unless_full_k() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    mixed_setup(d);
    let grid = json!({"step": [0.1, 0.1], "len": [9, 9]});
    mixed_run(d, "cut", json!({"kgrid": grid}));
    mixed_run(d, "full", json!({"kgrid": grid, "flags": {"full_k": true}}));
    ok(d, &["estimate", "--config", "cut.json"]);
    ok(d, &["estimate", "--config", "full.json"]);
    let cut = csv_rows(&d.join("out_cut/spectrum.csv"));
    assert_eq!(cut.len(), 25 * 9);
    for row in &cut {
        for c in &row[..2] {
            assert!(c.parse::<f64>().unwrap().abs() <= 0.25);
        }
    }
    assert_eq!(csv_rows(&d.join("out_full/spectrum.csv")).len(), 81 * 9);
    ok(d, &["estimate", "--config", "cut.json", "--full-k", "--out", "flag"]);
    assert_eq!(fs::read(d.join("flag/spectrum.csv")).unwrap(), fs::read(d.join("out_full/spectrum.csv")).unwrap());
}

#[test]
fn taper_directory_must_match_the_region() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    rect_region(d);
    write(&d.join("other.json"), &json!({"dim": 2, "bbox": {"lo": [0, 0], "hi": [40, 40]}, "delta_ref": [2, 2]}));
    ok(d, &["tapers", "--region", "other.json", "--bandwidth", "0.1", "--count", "3", "--out", "t"]);
    write(
        &d.join("run.json"),
        &json!({
            "region": "region.json",
            "model": {"type": "poisson", "lambda": 0.1},
            "taper": {"bandwidth": 0.1, "dir": "t"},
            "kgrid": {"step": [0.05, 0.05], "len": [3, 3]},
            "output": "est"
        }),
    );
    let out = spatspec(d, &["estimate", "--config", "run.json"]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn validate_reports_and_rejects_unknown_suites() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let out = spatspec(d, &["validate", "no-such-suite"]);
    assert_eq!(out.status.code(), Some(2));
    ok(d, &["validate", "nudft", "--out", "report.json"]);
    let report: Value = serde_json::from_str(&fs::read_to_string(d.join("report.json")).unwrap()).unwrap();
    assert_eq!(report[0]["checks"][0]["id"], "AC10");
    assert_eq!(report[0]["checks"][0]["passed"], true);
}

#[test]
fn io_roundtrip() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let region = Region::rectangle(BBox::new(2, [0.0, 0.0], [20.0, 10.0]).unwrap(), [1.0, 1.0]).unwrap();

    let pts = PointPattern::new(vec![[0.1, 0.2], [3.0 + 1e-13, 9.5], [19.9, 0.0]], Some(vec![1.5, -2.0, 1e-300])).unwrap();
    write_points(&d.join("p.csv"), &pts, 2).unwrap();
    let back = read_points(&d.join("p.csv"), 2).unwrap();
    assert_eq!(back, pts);

    let scheme = SamplingScheme::grid(2, [2.0, 2.0], [1.0, 1.0]).unwrap();
    let n = GridNodes::new(&scheme, &region).unwrap().len();
    let values: Vec<f64> = (0..n).map(|i| (i as f64).sin() / 3.0).collect();
    let field = GriddedField::new(&scheme, &region, values).unwrap();
    write_field(&d.join("f.csv"), &field, 2).unwrap();
    let back = read_field(&d.join("f.csv"), &scheme, &region).unwrap();
    assert_eq!(back.values, field.values);

    let fam = compute_tapers(&region, 0.3, TaperOptions { selection: Selection::Count(3), ..Default::default() }).unwrap();
    write_tapers(&d.join("t"), &fam).unwrap();
    let back = read_tapers(&d.join("t")).unwrap();
    assert_eq!(back.len(), 3);
    for m in 0..3 {
        assert_eq!(back.values(m), fam.values(m));
    }
    assert_eq!(back.concentrations(), fam.concentrations());
}
