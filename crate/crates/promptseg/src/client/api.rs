//! Thin blocking wrapper over the REST surface.

use std::time::Duration;

use promptseg_core::{Digest, RleMask};
use serde::de::DeserializeOwned;
use ureq::http::Response;
use ureq::Body;
use url::Url;

use super::ClientError;
use crate::wire::{
    ErrorBody, Health, PromptRequest, ResetAck, SessionCreated, SessionStatus, UploadAck, HEADER_CHANGED_VOXELS,
    HEADER_MASK_DIGEST, HEADER_REVISION, OCTET_STREAM,
};

const MAX_BODY: u64 = 4 << 30;

/// A mask body plus the metadata the server sent with it.
#[derive(Debug, Clone)]
pub struct MaskReply {
    pub rle: RleMask,
    pub digest: Digest,
    pub revision: u64,
    pub changed_voxels: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct ApiClient {
    base: Url,
    agent: ureq::Agent,
}

impl ApiClient {
    pub fn new(server_url: &str) -> Result<Self, ClientError> {
        let mut base = Url::parse(server_url).map_err(|e| ClientError::BadUrl(format!("{server_url}: {e}")))?;
        if !matches!(base.scheme(), "http" | "https") || base.cannot_be_a_base() {
            return Err(ClientError::BadUrl(format!("{server_url}: expected an http(s) URL")));
        }
        if !base.path().ends_with('/') {
            let p = format!("{}/", base.path());
            base.set_path(&p);
        }
        let agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_connect(Some(Duration::from_secs(5)))
            .build()
            .new_agent();
        Ok(ApiClient { base, agent })
    }

    pub fn base_url(&self) -> &Url {
        &self.base
    }

    fn url(&self, path: &str) -> String {
        self.base.join(path).expect("relative API path").to_string()
    }

    fn session_url(&self, token: &str, tail: &str) -> String {
        self.url(&format!("v1/session/{token}{tail}"))
    }

    pub fn health(&self) -> Result<Health, ClientError> {
        json(self.agent.get(self.url("v1/health")).call())
    }

    pub fn create_session(&self) -> Result<String, ClientError> {
        let r: SessionCreated = json(self.agent.post(self.url("v1/session")).send_empty())?;
        Ok(r.token)
    }

    pub fn status(&self, token: &str) -> Result<SessionStatus, ClientError> {
        json(self.agent.get(self.session_url(token, "")).call())
    }

    pub fn put_image(&self, token: &str, svol: &[u8]) -> Result<UploadAck, ClientError> {
        json(self.agent.put(self.session_url(token, "/image")).header("content-type", OCTET_STREAM).send(svol))
    }

    pub fn put_mask(&self, token: &str, rle: &[u8]) -> Result<UploadAck, ClientError> {
        json(self.agent.put(self.session_url(token, "/mask")).header("content-type", OCTET_STREAM).send(rle))
    }

    pub fn get_mask(&self, token: &str) -> Result<MaskReply, ClientError> {
        mask(self.agent.get(self.session_url(token, "/mask")).call())
    }

    pub fn prompt(&self, token: &str, req: &PromptRequest) -> Result<MaskReply, ClientError> {
        let body = serde_json::to_vec(req).map_err(|e| ClientError::Protocol(e.to_string()))?;
        mask(self.agent.post(self.session_url(token, "/prompt")).header("content-type", "application/json").send(&body[..]))
    }

    pub fn reset(&self, token: &str) -> Result<ResetAck, ClientError> {
        json(self.agent.post(self.session_url(token, "/reset")).send_empty())
    }
}

fn transport(e: ureq::Error) -> ClientError {
    match e {
        ureq::Error::Io(_)
        | ureq::Error::ConnectionFailed
        | ureq::Error::HostNotFound
        | ureq::Error::Timeout(_) => ClientError::Unreachable(e.to_string()),
        other => ClientError::Protocol(other.to_string()),
    }
}

fn read_body(resp: &mut Response<Body>) -> Result<Vec<u8>, ClientError> {
    resp.body_mut().with_config().limit(MAX_BODY).read_to_vec().map_err(transport)
}

/// Turns non-2xx responses into errors, keeping the server's error name.
fn check(r: Result<Response<Body>, ureq::Error>) -> Result<Response<Body>, ClientError> {
    let mut resp = r.map_err(transport)?;
    let status = resp.status().as_u16();
    if (200..300).contains(&status) {
        return Ok(resp);
    }
    let bytes = read_body(&mut resp)?;
    let body: ErrorBody = serde_json::from_slice(&bytes).unwrap_or_else(|_| ErrorBody {
        error: format!("Http{status}"),
        message: String::from_utf8_lossy(&bytes).into_owned(),
    });
    if status == 404 && body.error == "UnknownSession" {
        return Err(ClientError::SessionLost);
    }
    Err(ClientError::Server { status, error: body.error, message: body.message })
}

fn json<T: DeserializeOwned>(r: Result<Response<Body>, ureq::Error>) -> Result<T, ClientError> {
    let mut resp = check(r)?;
    let bytes = read_body(&mut resp)?;
    serde_json::from_slice(&bytes).map_err(|e| ClientError::Protocol(format!("bad JSON reply: {e}")))
}

fn header<'a>(resp: &'a Response<Body>, name: &str) -> Result<&'a str, ClientError> {
    resp.headers()
        .get(name)
        .and_then(|v| v.to_str().ok())
        .ok_or_else(|| ClientError::Protocol(format!("missing {name} header")))
}

fn mask(r: Result<Response<Body>, ureq::Error>) -> Result<MaskReply, ClientError> {
    let mut resp = check(r)?;
    let digest: Digest = header(&resp, HEADER_MASK_DIGEST)?
        .parse()
        .map_err(|_| ClientError::Protocol("malformed mask digest header".into()))?;
    let revision = header(&resp, HEADER_REVISION)?
        .parse()
        .map_err(|_| ClientError::Protocol("malformed revision header".into()))?;
    let changed_voxels = match resp.headers().get(HEADER_CHANGED_VOXELS) {
        None => None,
        Some(v) => Some(
            v.to_str()
                .ok()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| ClientError::Protocol("malformed changed-voxels header".into()))?,
        ),
    };
    let bytes = read_body(&mut resp)?;
    let rle = RleMask::parse(&bytes).map_err(|e| ClientError::Protocol(format!("mask body: {e}")))?;
    if Digest::of_bytes(&bytes) != digest {
        return Err(ClientError::Protocol("mask body does not match its digest header".into()));
    }
    Ok(MaskReply { rle, digest, revision, changed_voxels })
}
