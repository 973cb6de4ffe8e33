#![allow(dead_code)]

use std::path::PathBuf;
use std::time::Duration;

use promptseg::client::{ClientSession, ConfigStore};
use promptseg::server::{ServerConfig, ServerHandle};
use promptseg_core::{Dims, Radius, Spacing, Volume3D, VoxelData};

/// The four-voxel step image [0, 0, 100, 0].
pub fn step_image() -> Volume3D {
    Volume3D::new(Dims::new(4, 1, 1), Spacing::UNIT, VoxelData::U8(vec![0, 0, 100, 0])).unwrap()
}

/// Server with τ = 0 and no radius limit.
pub fn exact_server() -> ServerHandle {
    ServerHandle::spawn(ServerConfig::ephemeral().with_params(0.0, Radius::Unbounded)).unwrap()
}

pub fn server_with(f: impl FnOnce(&mut ServerConfig)) -> ServerHandle {
    let mut c = ServerConfig::ephemeral();
    f(&mut c);
    ServerHandle::spawn(c).unwrap()
}

pub fn connect(server: &ServerHandle) -> ClientSession {
    ClientSession::connect_with(&server.url(), &ConfigStore::disabled()).unwrap()
}

pub fn scripts_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("scripts")
}

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests").join("fixtures").join(name)
}

pub const SHORT_TTL: Duration = Duration::from_millis(150);

/// Raw HTTP access, for requests the SDK would never send.
pub struct Http {
    agent: ureq::Agent,
    base: String,
}

pub struct Reply {
    pub status: u16,
    pub headers: ureq::http::HeaderMap,
    pub body: Vec<u8>,
}

impl Reply {
    pub fn json(&self) -> serde_json::Value {
        serde_json::from_slice(&self.body).unwrap_or_else(|e| panic!("not JSON ({e}): {:?}", String::from_utf8_lossy(&self.body)))
    }

    /// `error` field of a JSON error body.
    pub fn error(&self) -> String {
        self.json()["error"].as_str().unwrap_or_default().to_string()
    }

    pub fn header(&self, name: &str) -> Option<&str> {
        self.headers.get(name).and_then(|v| v.to_str().ok())
    }
}

impl Http {
    pub fn new(server: &ServerHandle) -> Self {
        let agent = ureq::Agent::config_builder().http_status_as_error(false).build().new_agent();
        Http { agent, base: server.url() }
    }

    pub fn send(&self, method: &str, path: &str, body: Option<&[u8]>) -> Reply {
        let url = format!("{}{path}", self.base);
        let r = match (method, body) {
            ("GET", _) => self.agent.get(&url).call(),
            ("POST", None) => self.agent.post(&url).send_empty(),
            ("POST", Some(b)) => self.agent.post(&url).header("content-type", "application/json").send(b),
            ("PUT", Some(b)) => self.agent.put(&url).header("content-type", "application/octet-stream").send(b),
            ("PUT", None) => self.agent.put(&url).send_empty(),
            _ => panic!("unsupported {method}"),
        };
        let mut resp = r.expect("transport error");
        let status = resp.status().as_u16();
        let headers = resp.headers().clone();
        let body = resp.body_mut().with_config().limit(1 << 30).read_to_vec().unwrap();
        Reply { status, headers, body }
    }

    pub fn new_session(&self) -> String {
        let r = self.send("POST", "/v1/session", None);
        assert_eq!(r.status, 201);
        r.json()["token"].as_str().unwrap().to_string()
    }

    pub fn status(&self, token: &str) -> serde_json::Value {
        let r = self.send("GET", &format!("/v1/session/{token}"), None);
        assert_eq!(r.status, 200);
        r.json()
    }
}
