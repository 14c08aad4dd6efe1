use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Write};
use std::net::TcpListener;

use serde_json::{json, Map, Value};

use super::AnalyticsError;
use crate::episode::{Environment, Episode, EpisodeError, Observations, CHANNELS};

pub const PROTOCOL_VERSION: u64 = 1;

/// One client's environment instance. Messages are JSON objects with a
/// `v` version field and a `cmd` of `spec`, `reset`, `step`, `record` or
/// `close`; unknown fields are ignored.
pub struct Session {
    env: Environment,
    episode: Option<Episode>,
    closed: bool,
}

fn error(code: &str, message: impl Into<String>) -> Value {
    json!({ "v": PROTOCOL_VERSION, "error": { "code": code, "message": message.into() } })
}

fn obs_json(obs: &Observations) -> Value {
    let mut out = Map::new();
    for (d, o) in &obs.devices {
        let mut ch = Map::new();
        for (k, name) in CHANNELS.iter().enumerate() {
            let series: Vec<Value> = o.window.iter().map(|s| json!(s.values()[k])).collect();
            ch.insert(name.to_string(), Value::Array(series));
        }
        out.insert(d.clone(), Value::Object(ch));
    }
    Value::Object(out)
}

fn parse_actions(v: Option<&Value>) -> Result<BTreeMap<String, bool>, String> {
    let Some(v) = v else {
        return Ok(BTreeMap::new());
    };
    let obj = v.as_object().ok_or("'actions' must be an object of device -> 0/1")?;
    obj.iter()
        .map(|(d, a)| {
            let bit = match a {
                Value::Bool(b) => *b,
                Value::Number(n) if n.as_u64() == Some(0) => false,
                Value::Number(n) if n.as_u64() == Some(1) => true,
                other => return Err(format!("action for '{d}' must be 0 or 1, got {other}")),
            };
            Ok((d.clone(), bit))
        })
        .collect()
}

impl Session {
    pub fn new(env: Environment) -> Session {
        Session { env, episode: None, closed: false }
    }

    pub fn is_closed(&self) -> bool {
        self.closed
    }

    fn spec(&self) -> Value {
        let cfg = self.env.config();
        json!({
            "v": PROTOCOL_VERSION,
            "spec": {
                "channels": CHANNELS,
                "window": cfg.history,
                "devices": self.env.network().device_ids(),
                "action": "binary",
                "step_seconds": cfg.step_seconds,
                "steps_per_episode": cfg.steps_per_episode,
            }
        })
    }

    fn reset(&mut self, msg: &Value) -> Value {
        let seed = match msg.get("seed") {
            None => self.env.seed(),
            Some(s) => match s.as_u64() {
                Some(s) => s,
                None => return error("bad_request", "'seed' must be a non-negative integer"),
            },
        };
        let index = match msg.get("episode") {
            None => 0,
            Some(e) => match e.as_u64() {
                Some(e) => e,
                None => return error("bad_request", "'episode' must be a non-negative integer"),
            },
        };
        let devices: Vec<String> = match msg.get("devices") {
            None => self.env.network().device_ids(),
            Some(Value::Array(a)) if a.iter().all(Value::is_string) => {
                a.iter().filter_map(|x| x.as_str().map(String::from)).collect()
            }
            Some(_) => return error("bad_request", "'devices' must be an array of device ids"),
        };
        match self.env.reset_seeded(seed, index, &devices) {
            Ok((ep, obs)) => {
                self.episode = Some(ep);
                json!({ "v": PROTOCOL_VERSION, "obs": obs_json(&obs), "info": { "step": 0, "seed": seed, "episode": index } })
            }
            Err(EpisodeError::UnknownDevice(d)) => error("unknown_device", format!("unknown device '{d}'")),
            Err(e) => error("runtime", e.to_string()),
        }
    }

    fn step(&mut self, msg: &Value) -> Value {
        let Some(ep) = self.episode.as_mut() else {
            return error("no_episode", "send 'reset' before 'step'");
        };
        let actions = match parse_actions(msg.get("actions")) {
            Ok(a) => a,
            Err(e) => return error("bad_request", e),
        };
        match ep.step(&actions) {
            Ok(r) => {
                let mut info = serde_json::to_value(&r.info).expect("step info serializes");
                if let Some(o) = info.get_mut("outcome") {
                    if o.is_null() {
                        info.as_object_mut().expect("object").remove("outcome");
                    }
                }
                json!({
                    "v": PROTOCOL_VERSION,
                    "obs": obs_json(&r.observations),
                    "reward": r.rewards,
                    "done": r.done,
                    "info": info,
                })
            }
            Err(EpisodeError::Done) => error("episode_done", "episode is done; send 'reset'"),
            Err(EpisodeError::UnknownDevice(d)) => error("unknown_device", format!("unknown device '{d}'")),
            Err(e) => error("runtime", e.to_string()),
        }
    }

    /// Handles one message line and returns the reply.
    pub fn handle(&mut self, line: &str) -> Value {
        let msg: Value = match serde_json::from_str(line) {
            Ok(v @ Value::Object(_)) => v,
            Ok(_) => return error("bad_request", "message must be a JSON object"),
            Err(e) => return error("parse_error", e.to_string()),
        };
        match msg.get("v").and_then(Value::as_u64) {
            Some(PROTOCOL_VERSION) => {}
            Some(v) => return error("unsupported_version", format!("protocol version {v} is not supported")),
            None => return error("unsupported_version", "missing protocol version field 'v'"),
        }
        match msg.get("cmd").and_then(Value::as_str) {
            Some("spec") => self.spec(),
            Some("reset") => self.reset(&msg),
            Some("step") => self.step(&msg),
            Some("record") => match &self.episode {
                Some(ep) => json!({ "v": PROTOCOL_VERSION, "record": ep.record() }),
                None => error("no_episode", "no episode has been started"),
            },
            Some("close") => {
                self.closed = true;
                json!({ "v": PROTOCOL_VERSION, "closed": true })
            }
            Some(other) => error("unknown_command", format!("unknown command '{other}'")),
            None => error("bad_request", "missing 'cmd'"),
        }
    }
}

/// Serves one session over a line stream until `close` or end of input.
pub fn serve_stream<R: BufRead, W: Write>(env: &Environment, input: R, mut output: W) -> Result<(), AnalyticsError> {
    let mut session = Session::new(env.clone());
    for line in input.lines() {
        let line = line.map_err(|e| AnalyticsError::Protocol(format!("read: {e}")))?;
        if line.trim().is_empty() {
            continue;
        }
        let reply = session.handle(&line);
        writeln!(output, "{reply}").and_then(|_| output.flush()).map_err(|e| AnalyticsError::Protocol(format!("write: {e}")))?;
        if session.is_closed() {
            break;
        }
    }
    Ok(())
}

/// Accepts connections on `listener`, one independent session per
/// connection on its own thread. Stops after `max_connections` when given.
pub fn serve_tcp(env: &Environment, listener: TcpListener, max_connections: Option<usize>) -> Result<(), AnalyticsError> {
    let mut handles = Vec::new();
    for (k, stream) in listener.incoming().enumerate() {
        let stream = stream.map_err(|e| AnalyticsError::Protocol(format!("accept: {e}")))?;
        let env = env.clone();
        handles.push(std::thread::spawn(move || {
            let peer = stream.peer_addr().map(|a| a.to_string()).unwrap_or_default();
            let reader = match stream.try_clone() {
                Ok(s) => BufReader::new(s),
                Err(e) => return log::warn!("session {peer}: {e}"),
            };
            if let Err(e) = serve_stream(&env, reader, stream) {
                log::warn!("session {peer}: {e}");
            }
        }));
        if max_connections.is_some_and(|m| k + 1 >= m) {
            break;
        }
    }
    for h in handles {
        let _ = h.join();
    }
    Ok(())
}
