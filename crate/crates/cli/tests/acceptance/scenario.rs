use std::process::Command;
use std::sync::Arc;
use std::time::{Duration, Instant};

use hyvid_server::{run, AppState};
use hyvid_store::{Role, Store, User};
use serde_json::{json, Value};

use crate::Outcome;

struct Client {
    agent: ureq::Agent,
    base: String,
}

struct Reply {
    status: u16,
    bytes: Vec<u8>,
}

impl Reply {
    fn json(&self) -> Result<Value, String> {
        serde_json::from_slice(&self.bytes)
            .map_err(|e| format!("{e}: {}", String::from_utf8_lossy(&self.bytes)))
    }

    fn expect(self, status: u16, what: &str) -> Result<Self, String> {
        if self.status == status {
            Ok(self)
        } else {
            Err(format!(
                "{what}: HTTP {} (wanted {status}): {}",
                self.status,
                String::from_utf8_lossy(&self.bytes)
            ))
        }
    }
}

impl Client {
    fn send(
        &self,
        method: &str,
        path: &str,
        token: Option<&str>,
        body: Option<Value>,
    ) -> Result<Reply, String> {
        let url = format!("{}{path}", self.base);
        let auth = token.map(|t| format!("Bearer {t}"));
        let result = match (method, body) {
            ("GET", _) => {
                let mut req = self.agent.get(&url);
                if let Some(a) = &auth {
                    req = req.header("Authorization", a);
                }
                req.call()
            }
            ("POST", Some(b)) => {
                let mut req = self.agent.post(&url);
                if let Some(a) = &auth {
                    req = req.header("Authorization", a);
                }
                req.send_json(&b)
            }
            _ => return Err(format!("unsupported request {method} {path}")),
        };
        let mut resp = result.map_err(|e| format!("{method} {path}: {e}"))?;
        let status = resp.status().as_u16();
        let bytes = resp
            .body_mut()
            .read_to_vec()
            .map_err(|e| format!("{method} {path}: {e}"))?;
        Ok(Reply { status, bytes })
    }

    fn post(&self, path: &str, token: &str, body: Value) -> Result<Reply, String> {
        self.send("POST", path, Some(token), Some(body))
    }

    fn get(&self, path: &str, token: Option<&str>) -> Result<Reply, String> {
        self.send("GET", path, token, None)
    }
}

/// Checks the WebVTT header and that every cue ends after it starts.
fn check_webvtt(text: &str) -> Result<usize, String> {
    if !text.starts_with("WEBVTT\n") {
        return Err("missing WEBVTT header".into());
    }
    let parse = |t: &str| -> Result<i64, String> {
        let (hms, ms) = t.split_once('.').ok_or(format!("bad cue time {t:?}"))?;
        let parts: Vec<i64> = hms
            .split(':')
            .map(|p| p.parse().map_err(|_| format!("bad cue time {t:?}")))
            .collect::<Result<_, _>>()?;
        let [h, m, s] = parts[..] else {
            return Err(format!("bad cue time {t:?}"));
        };
        let ms: i64 = ms.parse().map_err(|_| format!("bad cue time {t:?}"))?;
        Ok(((h * 60 + m) * 60 + s) * 1000 + ms)
    };
    let mut cues = 0;
    for line in text.lines().filter(|l| l.contains(" --> ")) {
        let (start, end) = line.split_once(" --> ").unwrap();
        if parse(end)? <= parse(start)? {
            return Err(format!("cue {line:?} does not end after it starts"));
        }
        cues += 1;
    }
    Ok(cues)
}

type Link = (&'static str, i64, i64);

fn flow(client: &Client) -> Result<String, String> {
    let video = json!({"id":"lecture","uri":"https://example.org/lecture.mp4","duration_ms":600000,"title":"Lecture 1"});
    client
        .post("/api/videos", "t-teacher", video)?
        .expect(201, "create video")?;
    for (rid, kind) in [("r1", "image"), ("r2", "text"), ("r3", "web")] {
        let r = json!({"id":rid,"title":format!("Resource {rid}"),"kind":kind,"url":format!("https://example.org/{rid}")});
        client
            .post("/api/videos/lecture/resources", "t-teacher", r)?
            .expect(201, "create resource")?;
    }

    let mut sets = Vec::new();
    let plans: [(&str, &[Link]); 2] = [
        ("t-alice", &[("r1", 10_000, 20_000), ("r2", 30_000, 40_000)]),
        (
            "t-bob",
            &[
                ("r1", 12_000, 22_000),
                ("r2", 50_000, 60_000),
                ("r3", 70_000, 70_000),
            ],
        ),
    ];
    for (token, links) in plans {
        let doc = client
            .post("/api/videos/lecture/sets", token, json!({}))?
            .expect(201, "create set")?
            .json()?;
        let sid = doc["id"].as_str().ok_or("set id missing")?.to_owned();
        let path = format!("/api/sets/{sid}/annotations");
        for (rid, b, e) in links {
            let body = json!({"fragment":{"begin_ms":b,"end_ms":e},"body":{"kind":"resource_link","resource_id":rid}});
            client
                .post(&path, token, body)?
                .expect(201, "link resource")?;
        }
        let body = json!({"fragment":{"begin_ms":5000,"end_ms":9000},"body":{"kind":"comment","text":"key idea here"}});
        client
            .post(&path, token, body)?
            .expect(201, "add comment")?;
        sets.push(sid);
    }

    let diff = client
        .post(
            "/api/diff",
            "t-teacher",
            json!({"set_a":sets[0],"set_b":sets[1],"tolerance_ms":2000}),
        )?
        .expect(200, "diff")?
        .json()?;
    let count = |k: &str| diff[k].as_array().map_or(0, Vec::len);
    let split = (
        count("agreements"),
        count("disagreements"),
        count("unique_a"),
        count("unique_b"),
    );
    if split != (1, 1, 1, 2) {
        return Err(format!(
            "diff split (agree, disagree, only a, only b) = {split:?}, wanted (1, 1, 1, 2)"
        ));
    }
    if diff["agreements"][0]["resource_id"] != "r1"
        || diff["disagreements"][0]["delta_begin_ms"] != 20_000
    {
        return Err(format!("unexpected diff content: {diff}"));
    }

    let merge = json!({"set_ids":sets,"policy":{"kind":"majority","quorum":2},"save_as_owner":"teacher","save_as_id":"group-main"});
    let result = client
        .post("/api/videos/lecture/merge", "t-teacher", merge)?
        .expect(201, "merge")?
        .json()?;
    let fragments: Vec<(Value, Value)> = result["merged"]
        .as_array()
        .ok_or("merged missing")?
        .iter()
        .map(|a| (a["body"]["resource_id"].clone(), a["fragment"].clone()))
        .collect();
    let want = vec![
        (json!("r1"), json!({"begin_ms":11000,"end_ms":21000})),
        (json!("r2"), json!({"begin_ms":40000,"end_ms":50000})),
    ];
    if fragments != want {
        return Err(format!("majority merge gave {fragments:?}"));
    }
    let saved = client
        .get("/api/sets/group-main", Some("t-alice"))?
        .expect(200, "read merged set")?
        .json()?;
    if saved["annotations"].as_array().map(Vec::len) != Some(2) || saved["provenance"].is_null() {
        return Err(format!("persisted consolidated set is wrong: {saved}"));
    }

    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut cues = 0;
    for sid in [sets[0].as_str(), sets[1].as_str(), "group-main"] {
        let vtt = client
            .get(&format!("/api/sets/{sid}/export?format=webvtt"), None)?
            .expect(200, "export webvtt")?
            .bytes;
        cues += check_webvtt(std::str::from_utf8(&vtt).map_err(|e| e.to_string())?)?;
        let doc = client
            .get(&format!("/api/sets/{sid}/export?format=json"), None)?
            .expect(200, "export json")?
            .bytes;
        let file = dir.path().join(format!("{sid}.json"));
        std::fs::write(&file, doc).map_err(|e| e.to_string())?;
        let out = Command::new(env!("CARGO_BIN_EXE_hyvid"))
            .args(["export", file.to_str().unwrap(), "--format", "webvtt"])
            .output()
            .map_err(|e| e.to_string())?;
        if !out.status.success() {
            return Err(format!(
                "cli export failed: {}",
                String::from_utf8_lossy(&out.stderr)
            ));
        }
        if out.stdout != vtt {
            return Err(format!("{sid}: HTTP WebVTT differs from the CLI export"));
        }
    }
    Ok(format!("diff split 1/1/1/2, Majority{{2}} persisted r1@[11000,21000] r2@[40000,50000], {cues} WebVTT cues valid and identical to CLI"))
}

pub fn a7_end_to_end() -> Outcome {
    let start = Instant::now();
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let store = Store::open(dir.path()).map_err(|e| e.to_string())?;
    for (id, role) in [
        ("teacher", Role::Teacher),
        ("alice", Role::Learner),
        ("bob", Role::Learner),
    ] {
        let user = User {
            id: id.into(),
            display_name: id.into(),
            role,
            token: format!("t-{id}"),
        };
        store.put_user(user).map_err(|e| e.to_string())?;
    }
    let runtime = tokio::runtime::Runtime::new().map_err(|e| e.to_string())?;
    let listener = runtime
        .block_on(tokio::net::TcpListener::bind("127.0.0.1:0"))
        .map_err(|e| e.to_string())?;
    let addr = listener.local_addr().map_err(|e| e.to_string())?;
    runtime.spawn(run(listener, AppState::new(Arc::new(store), false), None));

    let agent: ureq::Agent = ureq::Agent::config_builder()
        .http_status_as_error(false)
        .timeout_global(Some(Duration::from_secs(10)))
        .build()
        .into();
    let client = Client {
        agent,
        base: format!("http://{addr}"),
    };
    let summary = flow(&client)?;
    runtime.shutdown_background();
    let elapsed = start.elapsed();
    if elapsed >= Duration::from_secs(30) {
        return Err(format!(
            "scenario took {:.2} s (limit 30 s)",
            elapsed.as_secs_f64()
        ));
    }
    Ok(format!(
        "{summary}; {:.2} s (limit 30 s)",
        elapsed.as_secs_f64()
    ))
}
