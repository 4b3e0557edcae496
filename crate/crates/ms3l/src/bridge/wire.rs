//! JSON messages exchanged over `/ws`. Every frame is one object with a
//! `kind` and a per-direction `seq`.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControlOp {
    Start,
    Stop,
    RecordStart,
    RecordStop,
    Reset,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoseMsg {
    pub x: f64,
    pub y: f64,
    pub th: f64,
}

/// Row-major RGB, 8 bits per channel, base64.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageMsg {
    pub w: usize,
    pub h: usize,
    pub b64: String,
}

/// Sub-image means are `null` when every pixel of that third was rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DepthMsg {
    pub left: Option<f64>,
    pub mid: Option<f64>,
    pub right: Option<f64>,
    pub trusted: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UltrasonicMsg {
    pub l: f64,
    pub r: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountsMsg {
    pub iter: u32,
    pub kept: usize,
    pub total: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateMsg {
    pub t: f64,
    pub pose: PoseMsg,
    pub image: ImageMsg,
    pub depth: DepthMsg,
    pub us: UltrasonicMsg,
    pub p_r: Option<f64>,
    pub recording: bool,
    pub counts: CountsMsg,
    pub collided: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatusMsg {
    pub iteration: u32,
    pub frames_kept: usize,
    pub nav_loss: Option<f64>,
    pub rec_loss: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorMsg {
    pub ref_seq: Option<u64>,
    pub message: String,
}

/// Server to client, before the connection's `seq` is attached.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ServerMessage {
    State(StateMsg),
    Status(StatusMsg),
    Error(ErrorMsg),
}

#[derive(Debug, Serialize)]
pub struct Envelope<'a> {
    pub seq: u64,
    #[serde(flatten)]
    pub msg: &'a ServerMessage,
}

/// Server message with its `seq`, as a client decodes it.
#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct Received {
    pub seq: u64,
    #[serde(flatten)]
    pub msg: ServerMessage,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ClientMessage {
    Command { seq: u64, v: f64, w: f64 },
    Control { seq: u64, op: ControlOp },
}

impl ClientMessage {
    pub fn seq(&self) -> u64 {
        match self {
            Self::Command { seq, .. } | Self::Control { seq, .. } => *seq,
        }
    }
}

/// Parses one client frame. On failure returns the `seq` (when readable) and
/// a description for the error reply.
pub fn parse_client(text: &str) -> Result<ClientMessage, (Option<u64>, String)> {
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| (None, format!("malformed JSON: {e}")))?;
    let seq = value.get("seq").and_then(serde_json::Value::as_u64);
    let kind = match value.get("kind") {
        Some(serde_json::Value::String(k)) => k.clone(),
        Some(_) => return Err((seq, "`kind` must be a string".into())),
        None => return Err((seq, "missing `kind`".into())),
    };
    match kind.as_str() {
        "command" | "control" => {}
        "state" | "status" | "error" => return Err((seq, format!("kind `{kind}` is only sent by the server"))),
        other => return Err((seq, format!("unknown kind `{other}`"))),
    }
    let msg: ClientMessage = serde_json::from_value(value).map_err(|e| (seq, format!("invalid {kind}: {e}")))?;
    if let ClientMessage::Command { v, w, .. } = msg {
        if !((-1.0..=1.0).contains(&v) && (-1.0..=1.0).contains(&w)) {
            return Err((seq, format!("command ({v}, {w}) outside [-1, 1]")));
        }
    }
    Ok(msg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn client_messages_parse() {
        assert_eq!(
            parse_client(r#"{"kind":"command","seq":3,"v":0.6,"w":-0.25}"#).unwrap(),
            ClientMessage::Command { seq: 3, v: 0.6, w: -0.25 }
        );
        assert_eq!(
            parse_client(r#"{"kind":"control","seq":4,"op":"record_start"}"#).unwrap(),
            ClientMessage::Control { seq: 4, op: ControlOp::RecordStart }
        );
    }

    #[test]
    fn bad_client_messages_are_described() {
        let cases = [
            (r#"{"kind":"warp","seq":1}"#, Some(1), "unknown kind `warp`"),
            (r#"{"kind":"state","seq":2}"#, Some(2), "only sent by the server"),
            (r#"{"seq":5}"#, Some(5), "missing `kind`"),
            (r#"{"kind":"command","seq":6,"v":2.0,"w":0.0}"#, Some(6), "outside [-1, 1]"),
            (r#"{"kind":"control","seq":7,"op":"jump"}"#, Some(7), "invalid control"),
            (r#"{"kind":"command","v":0.1,"w":0.0}"#, None, "invalid command"),
            ("{not json", None, "malformed JSON"),
        ];
        for (text, seq, needle) in cases {
            let (s, m) = parse_client(text).unwrap_err();
            assert_eq!(s, seq, "{text}");
            assert!(m.contains(needle), "{text}: {m}");
        }
    }

    #[test]
    fn envelope_carries_kind_and_seq() {
        let msg = ServerMessage::Error(ErrorMsg { ref_seq: Some(4), message: "x".into() });
        let text = serde_json::to_string(&Envelope { seq: 9, msg: &msg }).unwrap();
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["kind"], "error");
        assert_eq!(v["seq"], 9);
        assert_eq!(v["ref_seq"], 4);
        let back: Received = serde_json::from_str(&text).unwrap();
        assert_eq!(back, Received { seq: 9, msg });
    }
}
