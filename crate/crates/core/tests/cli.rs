use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn multimap(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_multimap")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> Output {
    let out = multimap(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn dir_bytes(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect()
}

#[test]
fn simulate_estimate_compare() {
    let tmp = tempfile::tempdir().unwrap();
    let p = |name: &str| tmp.path().join(name).to_str().unwrap().to_string();
    fs::write(
        p("cfg.json"),
        r#"{"phantom": {"kind": "bottles", "width": 32, "height": 32},
            "scan": {"noise_sigma": 1e-4, "seed": 5}}"#,
    )
    .unwrap();
    ok(&["simulate", "--config", &p("cfg.json"), "--out", &p("img")]);
    // same seed, same bytes
    ok(&["simulate", "--config", &p("cfg.json"), "--out", &p("img2")]);
    assert_eq!(dir_bytes(&tmp.path().join("img")), dir_bytes(&tmp.path().join("img2")));

    ok(&["mask", "--images", &p("img"), "--out", &p("mask.pbm")]);
    ok(&["lut", "--config", &p("cfg.json"), "--out", &p("lut.json")]);
    ok(&[
        "--threads", "1", "estimate", "--images", &p("img"), "--mask", &p("mask.pbm"), "--lut", &p("lut.json"), "--out",
        &p("maps1"),
    ]);
    ok(&[
        "--threads", "3", "estimate", "--images", &p("img"), "--mask", &p("mask.pbm"), "--out", &p("maps3"), "--pgm",
    ]);
    let a = dir_bytes(&tmp.path().join("maps1"));
    let mut b = dir_bytes(&tmp.path().join("maps3"));
    b.retain(|k, _| !k.ends_with(".pgm"));
    assert_eq!(a, b, "maps differ between thread counts or with the precomputed table");
    assert!(tmp.path().join("maps3/t1.pgm").exists());

    let out = ok(&["compare", "--maps", &p("maps1"), "--phantom", &p("img/phantom.json"), "--json"]);
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let maps = report["maps"].as_array().unwrap();
    assert_eq!(maps.len(), 10);
    let table = ok(&["compare", "--maps", &p("maps1"), "--phantom", &p("img/phantom.json")]);
    assert!(String::from_utf8_lossy(&table.stdout).contains("fat_fraction"));
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let p = |name: &str| tmp.path().join(name).to_str().unwrap().to_string();
    let missing = multimap(&["estimate", "--images", &p("none"), "--out", &p("maps")]);
    assert_eq!(missing.status.code(), Some(2));

    fs::write(p("bad.json"), r#"{"scan": {"noise_sigma": -1}}"#).unwrap();
    let bad = multimap(&["simulate", "--config", &p("bad.json"), "--out", &p("img")]);
    assert_eq!(bad.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("noise_sigma"));

    // a table built for hard pulses is refused for the default sinc pulses
    fs::write(p("hard.json"), r#"{"rf": {"kind": "hard"}}"#).unwrap();
    ok(&["lut", "--config", &p("hard.json"), "--out", &p("lut.json")]);
    fs::write(
        p("small.json"),
        r#"{"phantom": {"kind": "uniform", "width": 8, "height": 8,
            "params": {"water_amp": 1, "fat_amp": 0, "t1": 0.8, "t2": 0.07,
                       "t2s_water": 0.035, "t2s_fat": 0.025, "d_omega0": 0, "b1_scale": 1}}}"#,
    )
    .unwrap();
    ok(&["simulate", "--config", &p("small.json"), "--out", &p("img")]);
    let wrong = multimap(&["estimate", "--images", &p("img"), "--lut", &p("lut.json"), "--out", &p("maps")]);
    assert_eq!(wrong.status.code(), Some(1));
}
