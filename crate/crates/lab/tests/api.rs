//! The HTTP API exercised over a real socket.

use std::time::Duration;

use cellulat_core::{ca2plus_scenario, Lesion, SimState, WriteEvent};
use cellulat_lab::{router, AppState, Config};
use reqwest::{Client, StatusCode};
use serde_json::{json, Value};

struct Server {
    base: String,
    http: Client,
}

async fn start(config: Config) -> Server {
    let state = AppState::new(&config).unwrap();
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(async move { axum::serve(listener, router(state)).await.unwrap() });
    Server {
        base: format!("http://{addr}"),
        http: Client::new(),
    }
}

async fn default_server() -> Server {
    start(Config::default()).await
}

impl Server {
    async fn post(&self, path: &str, body: Value) -> (StatusCode, Value) {
        let r = self.http.post(format!("{}{path}", self.base)).json(&body).send().await.unwrap();
        let status = r.status();
        (status, r.json().await.unwrap_or(Value::Null))
    }

    async fn post_text(&self, path: &str, body: &str) -> (StatusCode, Value) {
        let r = self
            .http
            .post(format!("{}{path}", self.base))
            .body(body.to_string())
            .send()
            .await
            .unwrap();
        let status = r.status();
        (status, r.json().await.unwrap())
    }

    async fn get(&self, path: &str) -> (StatusCode, Value) {
        let r = self.http.get(format!("{}{path}", self.base)).send().await.unwrap();
        let status = r.status();
        (status, r.json().await.unwrap_or(Value::Null))
    }

    async fn session(&self, seed: u64) -> String {
        let (status, body) = self.post("/sessions", json!({ "model_id": "ca2plus", "seed": seed })).await;
        assert_eq!(status, StatusCode::CREATED, "{body}");
        body["session_id"].as_str().unwrap().to_string()
    }

    async fn step(&self, id: &str, ticks: u64) -> Value {
        let (status, body) = self.post(&format!("/sessions/{id}/step"), json!({ "ticks": ticks })).await;
        assert_eq!(status, StatusCode::OK, "{body}");
        body
    }

    async fn state(&self, id: &str) -> Value {
        let (status, body) = self.get(&format!("/sessions/{id}/state")).await;
        assert_eq!(status, StatusCode::OK);
        body
    }
}

/// Signals, tick and lesions: the part of `/state` fixed by the simulation.
fn sim_view(state: &Value) -> Value {
    json!({ "tick": state["tick"], "signals": state["signals"], "lesions": state["lesions"] })
}

/// Reads server-sent events until the stream closes or `stop` says so.
async fn read_events(resp: reqwest::Response, stop: impl Fn(&str) -> bool) -> Vec<(String, Value)> {
    let mut resp = resp;
    let mut buf = String::new();
    let mut out = Vec::new();
    while let Some(chunk) = tokio::time::timeout(Duration::from_secs(10), resp.chunk())
        .await
        .expect("event stream stalled")
        .unwrap()
    {
        buf.push_str(std::str::from_utf8(&chunk).unwrap());
        while let Some(end) = buf.find("\n\n") {
            let block: String = buf.drain(..end + 2).collect();
            let mut name = String::from("message");
            let mut data = String::new();
            for line in block.lines() {
                if let Some(v) = line.strip_prefix("event:") {
                    name = v.trim().to_string();
                } else if let Some(v) = line.strip_prefix("data:") {
                    data.push_str(v.trim_start());
                }
            }
            if data.is_empty() {
                continue;
            }
            let done = stop(&name);
            out.push((name, serde_json::from_str(&data).unwrap()));
            if done {
                return out;
            }
        }
    }
    out
}

#[tokio::test]
async fn health_and_model_upload() {
    let s = default_server().await;
    assert_eq!(s.get("/health").await.0, StatusCode::OK);

    let (status, body) = s.post_text("/models", &ca2plus_scenario().text).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["diagnostics"], json!([]));
    let id = body["model_id"].as_str().unwrap().to_string();
    assert!(id.starts_with("m-") && id.len() == 14);
    // Same text, same id.
    assert_eq!(s.post_text("/models", &ca2plus_scenario().text).await.1["model_id"], id);

    let (status, model) = s.get(&format!("/models/{id}")).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(model["name"], "ca2plus");
    assert_eq!(model["columns"][0]["region"], "gpcr_patch");
    assert_eq!(model["level_occupancy"].as_object().unwrap().len(), 4);
    assert_eq!(model["agents"].as_array().unwrap().len(), 6);
    assert_eq!(s.get("/models/ca2plus").await.1["model_id"], id);
}

#[tokio::test]
async fn invalid_model_is_422_with_located_diagnostics() {
    let s = default_server().await;
    let (status, body) = s
        .post_text("/models", "model bad\nlevel c kind cytosol rank 0\nagent X\n  when Q at c >= 1\nend\n")
        .await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(body["error"], "unprocessable");
    let d = &body["diagnostics"][0];
    assert_eq!(d["code"], "unknown_species");
    assert_eq!(d["location"]["line"], 4);
}

#[tokio::test]
async fn unknown_ids_are_404() {
    let s = default_server().await;
    assert_eq!(s.get("/models/m-000000000000").await.0, StatusCode::NOT_FOUND);
    assert_eq!(s.post("/sessions", json!({ "model_id": "nope" })).await.0, StatusCode::NOT_FOUND);
    for (path, body) in [
        ("step", json!({ "ticks": 1 })),
        ("stimuli", json!({ "ligand": "L1", "amount": 1.0, "from_tick": 5, "to_tick": 6 })),
        ("lesions", json!({ "spec": "knockout:PKC@5" })),
        ("fork", json!(null)),
        ("end", json!(null)),
    ] {
        let (status, body) = s.post(&format!("/sessions/s-999/{path}"), body).await;
        assert_eq!(status, StatusCode::NOT_FOUND, "{path}: {body}");
    }
    for path in ["state", "trace", "events"] {
        assert_eq!(s.get(&format!("/sessions/s-999/{path}")).await.0, StatusCode::NOT_FOUND, "{path}");
    }
}

#[tokio::test]
async fn invalid_bodies_are_422() {
    let s = default_server().await;
    let id = s.session(1).await;
    for body in [json!({}), json!({ "ticks": "five" }), json!({ "ticks": -1 }), json!({ "ticks": 1, "extra": 2 })] {
        let (status, resp) = s.post(&format!("/sessions/{id}/step"), body.clone()).await;
        assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY, "{body}: {resp}");
        assert_eq!(resp["error"], "unprocessable");
    }
    let (status, _) = s.post_text(&format!("/sessions/{id}/step"), "not json").await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    let (status, _) = s.post(&format!("/sessions/{id}/step"), json!({ "ticks": 10_000_000 })).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    let (status, _) = s.post("/sessions", json!({ "seed": 3 })).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
}

#[tokio::test]
async fn stepping_matches_the_engine() {
    let s = default_server().await;
    let id = s.session(7).await;
    let steps = s.step(&id, 6).await;
    let ticks: Vec<u64> = steps.as_array().unwrap().iter().map(|t| t["tick"].as_u64().unwrap()).collect();
    assert_eq!(ticks, [0, 1, 2, 3, 4, 5]);
    // Agents in the order they first fired.
    let mut first: Vec<&str> = Vec::new();
    for t in steps.as_array().unwrap() {
        for f in t["firings"].as_array().unwrap() {
            let agent = f["agent"].as_str().unwrap();
            if !first.contains(&agent) {
                first.push(agent);
            }
        }
    }
    assert_eq!(first, ["GPCR", "Gprotein", "PLCbeta", "ERchannel", "PKC", "Secretor"]);

    let state = s.state(&id).await;
    let mut sim = SimState::new(ca2plus_scenario().model(), 7).unwrap();
    sim.run(6);
    assert_eq!(state["tick"], 6);
    assert_eq!(state["signals"], serde_json::to_value(sim.board().entries()).unwrap());
    assert_eq!(state["status"], "idle");
    assert_eq!(state["emissions"], 1);
}

#[tokio::test]
async fn fork_is_deterministic_and_independent() {
    let s = default_server().await;
    let parent = s.session(11).await;
    s.step(&parent, 5).await;
    let (status, body) = s.post(&format!("/sessions/{parent}/fork"), json!(null)).await;
    assert_eq!(status, StatusCode::CREATED);
    let child = body["session_id"].as_str().unwrap().to_string();
    assert_ne!(child, parent);
    assert_eq!(s.state(&child).await["parent"], parent);

    s.step(&parent, 5).await;
    s.step(&child, 5).await;
    assert_eq!(sim_view(&s.state(&parent).await), sim_view(&s.state(&child).await));

    // A lesion on the child leaves the parent untouched.
    let (status, _) = s
        .post(&format!("/sessions/{child}/lesions"), json!({ "spec": "knockout:PLCbeta@10" }))
        .await;
    assert_eq!(status, StatusCode::OK);
    s.step(&parent, 5).await;
    s.step(&child, 5).await;
    let (_, pt) = s.get(&format!("/sessions/{parent}/trace")).await;
    let (_, ct) = s.get(&format!("/sessions/{child}/trace")).await;
    let upto = |t: &Value, max: u64| -> Vec<Value> {
        t.as_array().unwrap().iter().filter(|r| r["tick"].as_u64().unwrap() <= max).cloned().collect()
    };
    assert_eq!(upto(&pt, 10), upto(&ct, 10));
    assert_ne!(pt, ct);
    assert!(s.state(&parent).await["lesions"].as_array().unwrap().is_empty());
}

#[tokio::test]
async fn knockout_mid_run_flattens_ip3_from_next_tick() {
    let s = default_server().await;
    let id = s.session(7).await;
    s.step(&id, 10).await;
    let (status, ack) = s
        .post(
            &format!("/sessions/{id}/lesions"),
            json!({ "kind": "knockout", "agent": "PLCbeta", "at_tick": 10 }),
        )
        .await;
    assert_eq!(status, StatusCode::OK, "{ack}");
    assert_eq!(ack["id"], "l-1");
    s.step(&id, 10).await;
    let (_, trace) = s.get(&format!("/sessions/{id}/trace?from=8")).await;
    let ip3: Vec<(u64, f64)> = trace
        .as_array()
        .unwrap()
        .iter()
        .filter(|r| r["species"] == "IP3")
        .map(|r| (r["tick"].as_u64().unwrap(), r["quantity"].as_f64().unwrap()))
        .collect();
    assert_eq!(ip3.first().unwrap().0, 8);
    let at = |t: u64| ip3.iter().find(|(k, _)| *k == t).unwrap().1;
    assert!(at(9) < at(10));
    for t in 11..=20 {
        assert_eq!(at(t), at(10), "tick {t}");
    }
}

#[tokio::test]
async fn stimuli_and_lesions_are_validated() {
    let s = default_server().await;
    let id = s.session(7).await;
    s.step(&id, 3).await;
    let path = format!("/sessions/{id}/stimuli");
    let ok = s.post(&path, json!({ "ligand": "L1", "amount": 2.0, "from_tick": 3, "to_tick": 8 })).await;
    assert_eq!(ok.0, StatusCode::OK);
    assert_eq!(ok.1["from_tick"], 3);
    for bad in [
        json!({ "ligand": "L1", "amount": 2.0, "from_tick": 1, "to_tick": 8 }),
        json!({ "ligand": "L9", "amount": 2.0, "from_tick": 5, "to_tick": 8 }),
        json!({ "ligand": "L1", "amount": -1.0, "from_tick": 5, "to_tick": 8 }),
        json!({ "ligand": "L1", "amount": 1.0, "from_tick": 9, "to_tick": 8 }),
    ] {
        assert_eq!(s.post(&path, bad.clone()).await.0, StatusCode::UNPROCESSABLE_ENTITY, "{bad}");
    }

    let path = format!("/sessions/{id}/lesions");
    for bad in [
        json!({ "spec": "knockout:PLCbeta@1" }),
        json!({ "spec": "knockout:Nobody@5" }),
        json!({ "spec": "zap:PLCbeta@5" }),
        json!({ "spec": "block:PLCbeta@5" }),
        json!({ "kind": "attenuate", "agent": "PLCbeta", "factor": 1.5, "at_tick": 5 }),
        json!({ "kind": "clamp", "species": "PKC_active", "locus": { "level": "membrane", "region": "gpcr_patch" }, "value": 0.5, "at_tick": 5 }),
    ] {
        assert_eq!(s.post(&path, bad.clone()).await.0, StatusCode::UNPROCESSABLE_ENTITY, "{bad}");
    }
    let (status, ack) = s.post(&path, json!({ "spec": "clamp:Ca2plus:cytosol/gpcr_patch:0@4..30", "id": "cl" })).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(ack, json!({ "id": "cl", "at_tick": 4, "until_tick": 30 }));
    assert_eq!(s.post(&path, json!({ "spec": "knockout:PKC@5", "id": "cl" })).await.0, StatusCode::UNPROCESSABLE_ENTITY);
    let state = s.state(&id).await;
    assert_eq!(state["lesions"][0]["kind"], "clamp");
    assert_eq!(state["stimuli"].as_array().unwrap().len(), 2);
}

#[tokio::test]
async fn ended_sessions_reject_commands() {
    let s = default_server().await;
    let id = s.session(7).await;
    s.step(&id, 2).await;
    assert_eq!(s.post(&format!("/sessions/{id}/end"), json!(null)).await.0, StatusCode::OK);
    for (path, body) in [
        ("step", json!({ "ticks": 1 })),
        ("stimuli", json!({ "ligand": "L1", "amount": 1.0, "from_tick": 5, "to_tick": 6 })),
        ("lesions", json!({ "spec": "knockout:PKC@5" })),
        ("fork", json!(null)),
        ("end", json!(null)),
    ] {
        let (status, resp) = s.post(&format!("/sessions/{id}/{path}"), body).await;
        assert_eq!(status, StatusCode::CONFLICT, "{path}");
        assert_eq!(resp["error"], "conflict");
    }
    let state = s.state(&id).await;
    assert_eq!(state["status"], "ended");
    assert_eq!(state["tick"], 2);
}

#[tokio::test]
async fn trace_from_filters_rows() {
    let s = default_server().await;
    let id = s.session(7).await;
    s.step(&id, 8).await;
    let (_, all) = s.get(&format!("/sessions/{id}/trace")).await;
    let (_, tail) = s.get(&format!("/sessions/{id}/trace?from=5")).await;
    let all = all.as_array().unwrap();
    let tail = tail.as_array().unwrap();
    assert_eq!(all.first().unwrap()["tick"], 0);
    assert_eq!(all.last().unwrap()["tick"], 8);
    assert!(tail.iter().all(|r| r["tick"].as_u64().unwrap() >= 5));
    assert_eq!(&all[all.len() - tail.len()..], tail.as_slice());
    assert_eq!(s.get(&format!("/sessions/{id}/trace?from=x")).await.0, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn event_stream_delivers_every_write_once_in_order() {
    let s = default_server().await;
    let id = s.session(7).await;
    let resp = s.http.get(format!("{}/sessions/{id}/events", s.base)).send().await.unwrap();
    assert_eq!(resp.status(), StatusCode::OK);
    let reader = tokio::spawn(read_events(resp, |name| name == "end"));
    // Give the subscription a moment to register before the first step.
    tokio::time::sleep(Duration::from_millis(50)).await;
    s.step(&id, 20).await;
    s.post(&format!("/sessions/{id}/lesions"), json!({ "spec": "knockout:PKC@22" })).await;
    s.step(&id, 10).await;
    s.post(&format!("/sessions/{id}/end"), json!(null)).await;
    let events = reader.await.unwrap();

    let writes: Vec<WriteEvent> = events
        .iter()
        .filter(|(n, _)| n == "write")
        .map(|(_, v)| serde_json::from_value(v.clone()).unwrap())
        .collect();
    let mut sim = SimState::new(ca2plus_scenario().model(), 7).unwrap();
    sim.run(20);
    sim.apply_lesion(Lesion::parse_spec("knockout:PKC@22", "l-1").unwrap()).unwrap();
    sim.run(10);
    assert_eq!(writes, sim.board().log());
    let tick_ends = events.iter().filter(|(n, _)| n == "tick_end").count();
    assert_eq!(tick_ends, 30);
    assert_eq!(events.last().unwrap().0, "end");
    assert!(events.iter().any(|(n, v)| n == "emission" && v["ligand"] == "L2"));
}

#[tokio::test]
async fn slow_subscriber_is_disconnected_with_close_code() {
    let s = start(Config {
        event_buffer: 2,
        ..Config::default()
    })
    .await;
    let id = s.session(7).await;
    let resp = s.http.get(format!("{}/sessions/{id}/events", s.base)).send().await.unwrap();
    tokio::time::sleep(Duration::from_millis(50)).await;
    s.step(&id, 300).await;
    let events = read_events(resp, |name| name == "close").await;
    let (name, data) = events.last().unwrap();
    assert_eq!(name, "close");
    assert_eq!(data["code"], "slow_subscriber");
    assert!(data["missed"].as_u64().unwrap() > 0);
    // The simulation itself was not held back.
    assert_eq!(s.state(&id).await["tick"], 300);
}

#[tokio::test]
async fn session_limit_evicts_oldest_idle() {
    let s = start(Config {
        gc: cellulat_lab::sessions::GcPolicy {
            max_idle: None,
            max_sessions: Some(2),
        },
        ..Config::default()
    })
    .await;
    let a = s.session(1).await;
    tokio::time::sleep(Duration::from_millis(5)).await;
    let b = s.session(2).await;
    tokio::time::sleep(Duration::from_millis(5)).await;
    s.step(&a, 1).await;
    let c = s.session(3).await;
    assert_eq!(s.get(&format!("/sessions/{b}/state")).await.0, StatusCode::NOT_FOUND);
    assert_eq!(s.get(&format!("/sessions/{a}/state")).await.0, StatusCode::OK);
    assert_eq!(s.get(&format!("/sessions/{c}/state")).await.0, StatusCode::OK);
    assert_eq!(s.get("/sessions").await.1["sessions"].as_array().unwrap().len(), 2);
}

#[tokio::test]
async fn traces_persist_and_model_dir_loads() {
    let traces = tempfile::tempdir().unwrap();
    let models = tempfile::tempdir().unwrap();
    std::fs::write(
        models.path().join("tiny.cellulat"),
        "model tiny\nlevel c kind cytosol rank 0\nsignal A kind messenger\ninit A at c amount 2\n",
    )
    .unwrap();
    let s = start(Config {
        trace_dir: Some(traces.path().to_path_buf()),
        model_dir: Some(models.path().to_path_buf()),
        ..Config::default()
    })
    .await;
    assert_eq!(s.get("/models/tiny").await.0, StatusCode::OK);
    let (status, body) = s.post("/sessions", json!({ "model_id": "tiny" })).await;
    assert_eq!(status, StatusCode::CREATED);
    let id = body["session_id"].as_str().unwrap().to_string();
    s.step(&id, 2).await;
    s.step(&id, 3).await;
    let text = std::fs::read_to_string(traces.path().join(&id).join("trace.jsonl")).unwrap();
    let ticks: Vec<u64> = text
        .lines()
        .map(|l| serde_json::from_str::<Value>(l).unwrap()["tick"].as_u64().unwrap())
        .collect();
    assert_eq!(ticks, [0, 1, 2, 3, 4, 5]);
}

#[tokio::test]
async fn identical_scripts_give_identical_states() {
    let s = default_server().await;
    let mut runs = Vec::new();
    for _ in 0..2 {
        let id = s.session(5).await;
        let mut states = Vec::new();
        s.post(&format!("/sessions/{id}/stimuli"), json!({ "ligand": "L1", "amount": 3.0, "from_tick": 20, "to_tick": 25 })).await;
        for k in 0..6 {
            s.step(&id, 5).await;
            if k == 2 {
                s.post(&format!("/sessions/{id}/lesions"), json!({ "spec": "attenuate:ERchannel:0.5@16..22" })).await;
            }
            states.push(sim_view(&s.state(&id).await));
        }
        runs.push(states);
    }
    assert_eq!(runs[0], runs[1]);
}
