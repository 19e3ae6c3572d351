mod common;

use common::{payload, Ws};
use futures_util::SinkExt;
use serde_json::json;
use tablescope::topics::Topic;
use tablescope_hub::{serve, CommandRequest, Hub, HubConfig, HubError};

fn hub() -> Hub {
    Hub::new(HubConfig { token: Some("secret".into()), ..Default::default() })
}

#[tokio::test]
async fn subscribe_publish_round_trip() {
    let h = hub();
    let server = serve("127.0.0.1:0", h.clone(), None).await.unwrap();
    let mut sub = Ws::connect(server.local_addr()).await;
    let mut publ = Ws::connect(server.local_addr()).await;
    sub.send(json!({"op": "subscribe", "topic": "global_stats"})).await;
    assert!(sub.quiet(100).await);
    publ.send(json!({"op": "publish", "topic": "global_stats", "payload": {"remaining": 19500, "proposed": 500}, "token": "secret"}))
        .await;
    assert_eq!(publ.next().await.unwrap(), json!({"ack": "global_stats", "seq": 1}));
    let env = sub.next().await.unwrap();
    assert_eq!((env["topic"].as_str(), env["seq"].as_u64()), (Some("global_stats"), Some(1)));
    assert_eq!(env["payload"], json!({"remaining": 19500, "proposed": 500}));
    server.shutdown().await;
}

#[tokio::test]
async fn protocol_errors_keep_the_connection() {
    let h = hub();
    let server = serve("127.0.0.1:0", h.clone(), None).await.unwrap();
    let mut c = Ws::connect(server.local_addr()).await;

    c.send(json!({"op": "subscribe", "topic": "weather"})).await;
    assert_eq!(c.next().await.unwrap(), json!({"error": "unknown topic \"weather\""}));
    c.send(json!({"op": "dance"})).await;
    assert!(c.next().await.unwrap()["error"].as_str().unwrap().starts_with("malformed frame"));
    c.0.send(tokio_tungstenite::tungstenite::Message::Text("{not json".into())).await.unwrap();
    assert!(c.next().await.unwrap()["error"].is_string());

    let p = payload(Topic::GlobalStats, 1);
    c.send(json!({"op": "publish", "topic": "global_stats", "payload": p})).await;
    assert_eq!(c.next().await.unwrap(), json!({"error": "publish not authorized"}));
    c.send(json!({"op": "publish", "topic": "global_stats", "payload": p, "token": "wrong"})).await;
    assert_eq!(c.next().await.unwrap(), json!({"error": "publish not authorized"}));
    c.send(json!({"op": "publish", "topic": "global_stats", "payload": {"remaining": 1}, "token": "secret"})).await;
    assert!(c.next().await.unwrap()["error"].as_str().unwrap().contains("global_stats schema"));
    assert_eq!(h.stats().seq, [0; 5]);

    c.send(json!({"op": "command", "command": {"cmd": "advance"}, "token": "secret"})).await;
    assert_eq!(c.next().await.unwrap(), json!({"error": "no session engine behind this hub"}));

    // still usable
    c.send(json!({"op": "subscribe", "topic": "proposals"})).await;
    h.publish(Topic::Proposals, payload(Topic::Proposals, 0)).unwrap();
    assert_eq!(c.next().await.unwrap()["seq"], 1);
    c.send(json!({"op": "unsubscribe", "topic": "proposals"})).await;
    tokio::time::sleep(std::time::Duration::from_millis(50)).await;
    h.publish(Topic::Proposals, payload(Topic::Proposals, 0)).unwrap();
    assert!(c.quiet(100).await);
    server.shutdown().await;
}

#[tokio::test]
async fn commands_are_forwarded_to_the_engine() {
    let (tx, mut rx) = tokio::sync::mpsc::channel::<CommandRequest>(8);
    tokio::spawn(async move {
        let mut seq = 0;
        while let Some(req) = rx.recv().await {
            if req.command["cmd"] == "advance" {
                seq += 1;
                let _ = req.reply.send(Ok(seq));
            } else {
                let _ = req.reply.send(Err("cannot do that".into()));
            }
        }
    });
    let server = serve("127.0.0.1:0", hub(), Some(tx)).await.unwrap();
    let mut c = Ws::connect(server.local_addr()).await;
    c.send(json!({"op": "command", "command": {"cmd": "advance"}})).await;
    assert_eq!(c.next().await.unwrap(), json!({"error": "command not authorized"}));
    c.send(json!({"op": "command", "command": {"cmd": "advance"}, "token": "secret"})).await;
    assert_eq!(c.next().await.unwrap(), json!({"ack": "command", "seq": 1}));
    c.send(json!({"op": "command", "command": {"cmd": "fly"}, "token": "secret"})).await;
    assert_eq!(c.next().await.unwrap(), json!({"error": "cannot do that"}));
    server.shutdown().await;
}

#[tokio::test]
async fn disconnect_prunes_only_that_client() {
    let h = hub();
    let server = serve("127.0.0.1:0", h.clone(), None).await.unwrap();
    let mut a = Ws::connect(server.local_addr()).await;
    let mut b = Ws::connect(server.local_addr()).await;
    for c in [&mut a, &mut b] {
        c.send(json!({"op": "subscribe", "topic": "district_state"})).await;
    }
    let wait_for = |n: usize| {
        let h = h.clone();
        async move {
            for _ in 0..200 {
                if h.stats().subscribers[Topic::DistrictState.index()] == n {
                    return true;
                }
                tokio::time::sleep(std::time::Duration::from_millis(10)).await;
            }
            false
        }
    };
    assert!(wait_for(2).await);
    a.0.close(None).await.unwrap();
    drop(a);
    assert!(wait_for(1).await);
    assert_eq!(h.stats().clients, 1);
    h.publish(Topic::DistrictState, payload(Topic::DistrictState, 3)).unwrap();
    assert_eq!(b.next().await.unwrap()["seq"], 1);
    server.shutdown().await;
    assert_eq!(h.stats().clients, 0);
}

#[tokio::test]
async fn late_joiner_over_the_wire() {
    let h = hub();
    for n in 1..=5 {
        h.publish(Topic::GlobalStats, payload(Topic::GlobalStats, n)).unwrap();
    }
    let server = serve("127.0.0.1:0", h.clone(), None).await.unwrap();
    let mut c = Ws::connect(server.local_addr()).await;
    c.send(json!({"op": "subscribe", "topic": "global_stats"})).await;
    let first = c.next().await.unwrap();
    let snap: serde_json::Value = serde_json::from_str(&h.snapshot(Topic::GlobalStats).unwrap()).unwrap();
    assert_eq!(first, snap);
    assert_eq!(first["seq"], 5);
    server.shutdown().await;
}

#[tokio::test]
async fn bind_failure_is_reported() {
    let server = serve("127.0.0.1:0", hub(), None).await.unwrap();
    let taken = server.local_addr().to_string();
    match serve(&taken, hub(), None).await {
        Err(HubError::Bind(addr, _)) => assert_eq!(addr, taken),
        _ => panic!("second bind should fail"),
    }
    server.shutdown().await;
}
