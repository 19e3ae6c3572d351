mod common;

use std::path::Path;

use common::{demo_dir, demo_scripts, run, stderr, stdout};
use tablescope::session::{SessionEngine, SessionStart, WorkshopData};
use tablescope::synth::DEMO_FUNNEL;

fn files_under(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(dir).unwrap().display().to_string();
                out.push((rel, std::fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn gen_city_same_seed_same_files() {
    let t = tempfile::tempdir().unwrap();
    let (a, b) = (t.path().join("a"), t.path().join("b"));
    for out in [&a, &b] {
        let o = run(&["gen-city", "--seed", "42", "--parcels", "10", "--out", s(out)]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let (fa, fb) = (files_under(&a), files_under(&b));
    assert!(fa.iter().any(|(n, _)| n == "ledger.json"));
    assert_eq!(fa, fb);
    let o = run(&["gen-city", "--seed", "43", "--parcels", "10", "--out", s(&t.path().join("c"))]);
    assert!(o.status.success());
    assert_ne!(files_under(&t.path().join("c")), fa);
}

#[test]
fn thousand_parcel_city_ingests_cleanly() {
    let t = tempfile::tempdir().unwrap();
    let o = run(&["gen-city", "--seed", "42", "--parcels", "1000", "--out", s(t.path())]);
    assert!(o.status.success(), "{}", stderr(&o));
    let o = run(&["ingest", s(t.path())]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("1000 parcels accepted"), "{text}");
    assert_eq!(text.matches("\nlayer ").count(), 4, "{text}");
}

#[test]
fn ingest_reports_bad_features_as_domain_failure() {
    let t = tempfile::tempdir().unwrap();
    let path = t.path().join("parcels.geojson");
    std::fs::write(
        &path,
        r#"{"type":"FeatureCollection","features":[
        {"type":"Feature","properties":{"id":"ok"},"geometry":{"type":"Polygon","coordinates":[[[0,0],[10,0],[10,10],[0,10],[0,0]]]}},
        {"type":"Feature","properties":{"id":"bow"},"geometry":{"type":"Polygon","coordinates":[[[0,0],[10,10],[10,0],[0,10],[0,0]]]}}
        ]}"#,
    )
    .unwrap();
    let o = run(&["ingest", s(&path)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("bow"), "{}", stderr(&o));
}

#[test]
fn classify_writes_csv_and_geojson() {
    let t = tempfile::tempdir().unwrap();
    let csv = t.path().join("classes.csv");
    let gj = t.path().join("classes.geojson");
    let o = run(&["--data", s(&demo_dir()), "classify", "--out", s(&csv), "--geojson", s(&gj)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).starts_with("504 parcels:"), "{}", stdout(&o));
    assert_eq!(std::fs::read_to_string(&csv).unwrap().lines().count(), 505);
    let doc: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&gj).unwrap()).unwrap();
    let f = &doc["features"][0]["properties"];
    assert!(f["suitability"].is_string() && f["capacity"].is_u64(), "{f}");
}

const HEADER: &str = r#"{"session_id":"t-ws","district_id":"d1","target_total":20000,"campaign_prior":0}"#;
const FOCUS: &str = r#"{"cmd":"select_focus","extent":{"min":[0.0,0.0],"max":[400.0,400.0],"scale_denominator":500.0}}"#;

fn script(dir: &Path, name: &str, lines: &[&str]) -> std::path::PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, lines.join("\n") + "\n").unwrap();
    p
}

fn demo_data() -> std::sync::Arc<WorkshopData> {
    std::sync::Arc::new(WorkshopData::load(demo_dir(), Default::default(), Default::default()).unwrap())
}

#[test]
fn empty_script_keeps_initial_state() {
    let t = tempfile::tempdir().unwrap();
    let p = script(t.path(), "empty.ndjson", &[HEADER]);
    let out = t.path().join("out");
    let o = run(&["--data", s(&demo_dir()), "replay", s(&p), "--out", s(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let initial = SessionEngine::start(demo_data(), SessionStart::new("t-ws", "d1")).unwrap().state_hash();
    assert_eq!(std::fs::read_to_string(out.join("state_hash.txt")).unwrap().trim(), initial);
    assert_eq!(std::fs::read_to_string(out.join("export.ndjson")).unwrap(), "");
}

#[test]
fn placed_then_removed_leaves_nothing() {
    let t = tempfile::tempdir().unwrap();
    let p = script(
        t.path(),
        "undo.ndjson",
        &[
            HEADER,
            r#"{"cmd":"advance"}"#,
            FOCUS,
            r#"{"cmd":"brick","action":"placed","brick":{"kind":"housing","capacity":500},"at":[11,0],"scan_seq":1}"#,
            r#"{"cmd":"brick","action":"removed","brick":{"kind":"housing","capacity":500},"at":[11,0],"scan_seq":2}"#,
        ],
    );
    let out = t.path().join("out");
    let o = run(&["--data", s(&demo_dir()), "replay", s(&p), "--out", s(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(std::fs::read_to_string(out.join("export.ndjson")).unwrap(), "");
    let stats: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("stats.json")).unwrap()).unwrap();
    assert_eq!(stats["remaining"], 20000);
    assert_eq!(stats["proposed"], 0);
}

#[test]
fn refused_command_exits_one_and_names_it() {
    let t = tempfile::tempdir().unwrap();
    let p = script(
        t.path(),
        "bad.ndjson",
        &[
            HEADER,
            r#"{"cmd":"advance"}"#,
            FOCUS,
            r#"{"cmd":"brick","action":"removed","brick":{"kind":"housing","capacity":500},"at":[11,0],"scan_seq":1}"#,
        ],
    );
    let o = run(&["--data", s(&demo_dir()), "replay", s(&p), "--out", s(&t.path().join("out"))]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("command 3"), "{}", stderr(&o));
}

#[test]
fn config_and_io_problems_exit_two() {
    let t = tempfile::tempdir().unwrap();
    let p = script(t.path(), "empty.ndjson", &[HEADER]);
    let missing = t.path().join("nope.toml");
    let o = run(&["--config", s(&missing), "replay", s(&p)]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));

    let bad = t.path().join("bad.toml");
    std::fs::write(&bad, "data_dir = \"x\"\nno_such_key = 1\n").unwrap();
    let o = run(&["--config", s(&bad), "replay", s(&p)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("no_such_key"), "{}", stderr(&o));

    let o = run(&["--data", s(&t.path().join("nowhere")), "replay", s(&p)]);
    assert_eq!(o.status.code(), Some(2));

    let o = run(&["gen-city", "--layers", "park:sometimes", "--out", s(&t.path().join("g"))]);
    assert_eq!(o.status.code(), Some(2));

    let o = run(&["serve"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn data_dir_precedence() {
    let t = tempfile::tempdir().unwrap();
    let p = script(t.path(), "empty.ndjson", &[HEADER]);
    let cfg = t.path().join("cfg.toml");
    std::fs::write(&cfg, "data_dir = \"missing\"\n").unwrap();
    let out = t.path().join("out");
    // config alone points nowhere
    let o = run(&["--config", s(&cfg), "replay", s(&p), "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(2));
    // the environment wins over the file
    let o = std::process::Command::new(env!("CARGO_BIN_EXE_tablescope"))
        .args(["--config", s(&cfg), "replay", s(&p), "--out", s(&out)])
        .env("TABLESCOPE_DATA_DIR", demo_dir())
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    // and the flag over the environment
    let o = std::process::Command::new(env!("CARGO_BIN_EXE_tablescope"))
        .args(["--config", s(&cfg), "--data", s(&demo_dir()), "replay", s(&p), "--out", s(&out)])
        .env("TABLESCOPE_DATA_DIR", t.path().join("nowhere"))
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
}

#[test]
fn demo_replay_screen_report() {
    let t = tempfile::tempdir().unwrap();
    let out = t.path().join("replay");
    let mut args = vec!["--data".to_string(), demo_dir().display().to_string(), "replay".into()];
    args.extend(demo_scripts().iter().map(|p| p.display().to_string()));
    args.extend(["--out".into(), out.display().to_string()]);
    let o = run(&args.iter().map(String::as_str).collect::<Vec<_>>());
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("161 suggestions, 24050 proposed, remaining -4050 (target exceeded)"), "{}", stdout(&o));

    let sc = t.path().join("screening");
    let rules = demo_dir().join("rules.json");
    let o = run(&["screen", s(&out.join("export.ndjson")), "--rules", s(&rules), "--out", s(&sc)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let report: tablescope::screening::ScreeningReport =
        serde_json::from_str(&std::fs::read_to_string(sc.join("report.json")).unwrap()).unwrap();
    assert_eq!(report.funnel, DEMO_FUNNEL);

    let o = run(&["report", s(&sc.join("report.json"))]);
    assert!(o.status.success());
    assert_eq!(stdout(&o).trim_end(), std::fs::read_to_string(sc.join("report.md")).unwrap().trim_end());
}
