//! The JSON Schema files under `schemas/` against the Rust record types.
//! Every engine payload from the demo campaign must pass both, and every
//! single-field mutation of one must get the same verdict from both.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde_json::{json, Value};
use tablescope::session::{Script, SessionEngine, WorkshopData};
use tablescope::topics::{validate_payload, ClientFrame, Envelope, ReplyFrame, Topic};

fn root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn schema(rel: &str) -> jsonschema::Validator {
    let text = std::fs::read_to_string(root().join("schemas").join(rel)).unwrap();
    jsonschema::validator_for(&serde_json::from_str(&text).unwrap()).unwrap()
}

fn demo_payloads() -> Vec<(Topic, Value)> {
    let demo = root().join("data/demo");
    let data = Arc::new(WorkshopData::load(&demo, Default::default(), Default::default()).unwrap());
    let mut scripts: Vec<PathBuf> =
        std::fs::read_dir(demo.join("scripts")).unwrap().map(|e| e.unwrap().path()).collect();
    scripts.sort();
    let mut out = Vec::new();
    for p in scripts {
        let s = Script::read(&p).unwrap();
        let mut e = SessionEngine::start(data.clone(), s.header.start()).unwrap();
        out.extend(e.snapshot().into_iter().map(|d| (d.topic(), d.payload())));
        for c in &s.commands {
            out.extend(e.apply(c).unwrap().into_iter().map(|d| (d.topic(), d.payload())));
        }
    }
    out
}

/// Copies of `v` with one node removed or replaced, to depth 4.
fn mutations(v: &Value) -> Vec<Value> {
    fn walk(root: &Value, path: &mut Vec<Value>, node: &Value, depth: usize, out: &mut Vec<Value>) {
        if depth == 0 {
            return;
        }
        let children: Vec<(Value, &Value)> = match node {
            Value::Object(m) => m.iter().map(|(k, v)| (json!(k), v)).collect(),
            Value::Array(a) => a.iter().take(2).enumerate().map(|(i, v)| (json!(i), v)).collect(),
            _ => return,
        };
        for (key, child) in children {
            path.push(key);
            for repl in [None, Some(json!("x")), Some(json!(42)), Some(json!(-1.5)), Some(Value::Null), Some(json!(true))] {
                let mut copy = root.clone();
                set(&mut copy, path, repl);
                out.push(copy);
            }
            walk(root, path, child, depth - 1, out);
            path.pop();
        }
    }
    fn set(v: &mut Value, path: &[Value], repl: Option<Value>) {
        let (last, head) = path.split_last().unwrap();
        let mut cur = v;
        for k in head {
            cur = match k {
                Value::String(s) => &mut cur[s.as_str()],
                k => &mut cur[k.as_u64().unwrap() as usize],
            };
        }
        match (cur, last, repl) {
            (Value::Object(m), Value::String(k), None) => {
                m.remove(k);
            }
            (Value::Array(a), k, None) => {
                a.remove(k.as_u64().unwrap() as usize);
            }
            (Value::Object(m), Value::String(k), Some(r)) => {
                m.insert(k.clone(), r);
            }
            (Value::Array(a), k, Some(r)) => a[k.as_u64().unwrap() as usize] = r,
            _ => unreachable!(),
        }
    }
    let mut out = Vec::new();
    walk(v, &mut Vec::new(), v, 4, &mut out);
    out
}

/// A box the schema cannot rule out: min not below max.
fn inverted_extent(v: &Value) -> bool {
    let e = &v["extent"];
    let (min, max) = (&e["min"], &e["max"]);
    (0..2).any(|i| match (min[i].as_f64(), max[i].as_f64()) {
        (Some(a), Some(b)) => a >= b,
        _ => false,
    }) || e["scale_denominator"].as_f64().is_some_and(|s| s <= 0.0)
}

#[test]
fn engine_payloads_pass_both() {
    let validators: Vec<_> = Topic::ALL.iter().map(|t| schema(&format!("topics/{}.schema.json", t.name()))).collect();
    let envelope = schema("envelope.schema.json");
    let payloads = demo_payloads();
    let mut seen = [0usize; 5];
    for (i, (t, p)) in payloads.iter().enumerate() {
        seen[t.index()] += 1;
        validate_payload(*t, p).unwrap();
        let errs: Vec<String> = validators[t.index()].iter_errors(p).map(|e| e.to_string()).collect();
        assert!(errs.is_empty(), "{t} {p}: {errs:?}");
        let env = Envelope { topic: *t, seq: i as u64 + 1, ts: 1_700_000_000_000, payload: p.clone() };
        assert!(envelope.is_valid(&serde_json::to_value(&env).unwrap()));
    }
    assert!(seen.iter().all(|&n| n > 0), "{seen:?}");
}

#[test]
fn mutated_payloads_get_the_same_verdict() {
    let validators: Vec<_> = Topic::ALL.iter().map(|t| schema(&format!("topics/{}.schema.json", t.name()))).collect();
    let mut per_topic = [0usize; 5];
    let (mut checked, mut rejected) = (0, 0);
    for (t, p) in demo_payloads() {
        // a few distinct samples per topic keep the run short
        if per_topic[t.index()] >= 12 {
            continue;
        }
        per_topic[t.index()] += 1;
        for m in mutations(&p) {
            let by_schema = validators[t.index()].is_valid(&m);
            let by_type = validate_payload(t, &m).is_ok();
            if by_schema && !by_type && t == Topic::MapExtents && inverted_extent(&m) {
                continue;
            }
            assert_eq!(by_schema, by_type, "{t}: schema says {by_schema}, record type says {by_type} for {m}");
            checked += 1;
            rejected += !by_type as usize;
        }
    }
    assert!(checked > 1000 && rejected > 300, "{checked} checked, {rejected} rejected");
}

#[test]
fn client_and_reply_frames() {
    let client = schema("client_frame.schema.json");
    let reply = schema("reply.schema.json");
    let frames = [
        json!({"op": "subscribe", "topic": "proposals"}),
        json!({"op": "unsubscribe", "topic": "proposals"}),
        json!({"op": "publish", "topic": "global_stats", "payload": {"remaining": 1, "proposed": 2}, "token": "t"}),
        json!({"op": "publish", "topic": "global_stats", "payload": {}}),
        json!({"op": "command", "command": {"cmd": "advance"}, "token": "t"}),
    ];
    for f in &frames {
        assert!(client.is_valid(f), "{f}");
        let back: ClientFrame = serde_json::from_value(f.clone()).unwrap();
        assert!(client.is_valid(&serde_json::to_value(back).unwrap()));
        for m in mutations(f) {
            assert_eq!(
                client.is_valid(&m),
                serde_json::from_value::<ClientFrame>(m.clone()).is_ok(),
                "{m}"
            );
        }
    }
    for r in [ReplyFrame::Ack { ack: "command".into(), seq: 3 }, ReplyFrame::Error { error: "no".into() }] {
        let v = serde_json::to_value(&r).unwrap();
        assert!(reply.is_valid(&v), "{v}");
        for m in mutations(&v) {
            assert_eq!(reply.is_valid(&m), serde_json::from_value::<ReplyFrame>(m.clone()).is_ok(), "{m}");
        }
    }
}
