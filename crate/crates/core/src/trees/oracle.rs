//! Client for an external reaction oracle speaking line-delimited JSON.
//!
//! One request per line, one response per line:
//!
//! ```text
//! -> {"op":"apply","template":"3","reactants":["CCO","CC(=O)Cl"]}
//! <- {"ok":true,"product":"CCOC(C)=O"}
//! <- {"ok":false,"reason":"no match"}
//! ```
//!
//! A `false` response is a chemical failure and surfaces exactly like the
//! toy backend's precondition failure; transport problems are errors.

use std::io::{BufRead, BufReader, Write};
use std::net::{TcpStream, ToSocketAddrs};
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::registry::{ApplyError, TemplateBackend, TemplateEntry};
use super::TreeError;

pub const DEFAULT_ORACLE_TIMEOUT: Duration = Duration::from_secs(10);

#[derive(Serialize)]
struct OracleRequest<'a> {
    op: &'static str,
    template: &'a str,
    reactants: &'a [String],
}

#[derive(Deserialize)]
struct OracleResponse {
    ok: bool,
    #[serde(default)]
    product: Option<String>,
    #[serde(default)]
    reason: Option<String>,
}

/// A connected oracle. Requests are serialized per connection.
pub struct OracleClient {
    stream: Mutex<BufReader<TcpStream>>,
    endpoint: String,
}

impl OracleClient {
    /// Connects to `host:port` with `timeout` applied to the connection
    /// attempt and to each request/response round trip.
    pub fn connect(endpoint: &str, timeout: Duration) -> Result<Self, TreeError> {
        let transport = |detail: String| TreeError::Oracle { endpoint: endpoint.to_string(), detail };
        let addrs: Vec<_> = endpoint
            .to_socket_addrs()
            .map_err(|e| transport(format!("bad endpoint: {e}")))?
            .collect();
        let addr = addrs.first().ok_or_else(|| transport("endpoint resolves to no address".into()))?;
        let stream = TcpStream::connect_timeout(addr, timeout).map_err(|e| transport(format!("connect: {e}")))?;
        stream.set_read_timeout(Some(timeout)).map_err(|e| transport(format!("timeout: {e}")))?;
        stream.set_write_timeout(Some(timeout)).map_err(|e| transport(format!("timeout: {e}")))?;
        Ok(Self { stream: Mutex::new(BufReader::new(stream)), endpoint: endpoint.to_string() })
    }

    pub fn endpoint(&self) -> &str {
        &self.endpoint
    }
}

/// Sends one apply request over the client's connection.
pub fn oracle_apply(
    client: &OracleClient,
    template_ref: &str,
    reactants: &[String],
) -> Result<String, ApplyError> {
    let transport = |detail: String| ApplyError::Transport(detail);
    let mut line = serde_json::to_string(&OracleRequest { op: "apply", template: template_ref, reactants })
        .map_err(|e| transport(format!("encode: {e}")))?;
    line.push('\n');

    let mut guard = client.stream.lock().expect("oracle connection poisoned");
    guard
        .get_mut()
        .write_all(line.as_bytes())
        .map_err(|e| transport(format!("send: {e}")))?;
    let mut response = String::new();
    let n = guard.read_line(&mut response).map_err(|e| transport(format!("recv: {e}")))?;
    drop(guard);
    if n == 0 {
        return Err(transport("oracle closed the connection".into()));
    }
    let parsed: OracleResponse =
        serde_json::from_str(response.trim_end()).map_err(|e| transport(format!("malformed response: {e}")))?;
    if parsed.ok {
        parsed.product.ok_or_else(|| transport("ok response missing product".into()))
    } else {
        Err(ApplyError::PreconditionFailed {
            reactant: None,
            reason: parsed.reason.unwrap_or_else(|| "oracle rejected the reaction".into()),
        })
    }
}

/// Template backend that delegates every application to the oracle,
/// sending the template id as the wire reference.
pub struct OracleBackend {
    pub client: OracleClient,
}

impl TemplateBackend for OracleBackend {
    fn apply(&self, template: &TemplateEntry, reactants: &[String]) -> Result<String, ApplyError> {
        oracle_apply(&self.client, &template.id.to_string(), reactants)
    }
}
