//! Client SDK: keeps a local image and a list of segments in step with a
//! server session, uploading only what the server does not already hold.

mod api;
mod config;
mod state;

pub use api::{ApiClient, MaskReply};
pub use config::{ClientConfig, ConfigStore, CONFIG_ENV};

use promptseg_core::{
    digest_mask, encode_svol, rle_encode, Digest, Dims, Mask3D, Prompt, RleMask, Volume3D,
};

use crate::wire::{PromptRequest, SessionStatus};

#[derive(Debug, thiserror::Error)]
pub enum ClientError {
    #[error("Unreachable: {0}")]
    Unreachable(String),
    #[error("BadUrl: {0}")]
    BadUrl(String),
    #[error("SessionLost: the server no longer knows this session")]
    SessionLost,
    #[error("ServerError {status} {error}: {message}")]
    Server { status: u16, error: String, message: String },
    #[error("InvalidPrompt {error}: {message}")]
    InvalidPrompt { error: String, message: String },
    #[error("SyncLoop: server reported stale state again after a resync ({0})")]
    SyncLoop(String),
    #[error("NoImage: no image loaded")]
    NoImage,
    #[error("NoActiveSegment: there is no segment yet")]
    NoActiveSegment,
    #[error("IndexOutOfRange: segment {index} requested, {len} exist")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("DimsMismatch: mask dims {mask:?} differ from image dims {image:?}")]
    DimsMismatch { mask: [u32; 3], image: [u32; 3] },
    #[error("RecoveryMismatch: replay produced {actual}, local mask is {expected}")]
    RecoveryMismatch { expected: Digest, actual: Digest },
    #[error("Protocol: {0}")]
    Protocol(String),
    #[error("Config: {0}")]
    Config(#[from] std::io::Error),
    #[error("State: {0}")]
    State(String),
}

impl ClientError {
    pub fn status(&self) -> Option<u16> {
        match self {
            ClientError::Server { status, .. } => Some(*status),
            ClientError::SessionLost => Some(404),
            ClientError::InvalidPrompt { .. } => Some(422),
            _ => None,
        }
    }
}

/// What one `ensure_synced` call transferred.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SyncReport {
    pub image_uploaded: bool,
    pub mask_uploaded: bool,
}

/// Cumulative transfer counters for a session.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct TransferStats {
    pub image_uploads: u64,
    pub mask_uploads: u64,
    pub prompts_sent: u64,
    pub stale_responses: u64,
    pub bytes_up: u64,
    pub bytes_down: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StaleRetry {
    /// `StaleImage` or `StaleMask`.
    pub reason: String,
    pub resync: SyncReport,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptOutcome {
    pub changed_voxels: usize,
    pub revision: u64,
    pub mask_digest: Digest,
    /// Sync done before the first attempt; default when skipped.
    pub sync: SyncReport,
    pub retry: Option<StaleRetry>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SyncPolicy {
    /// Upload whatever the server lacks, then prompt.
    Eager,
    /// Prompt with the local digests straight away and resync only on 428.
    Optimistic,
}

#[derive(Debug, Clone)]
pub struct Segment {
    name: String,
    mask: Mask3D,
    digest: Digest,
    /// Mask the prompt log starts from.
    baseline: Mask3D,
    log: Vec<Prompt>,
}

impl Segment {
    fn empty(name: String, dims: Dims) -> Self {
        let mask = Mask3D::zeros(dims).expect("dims of a loaded image");
        Segment { name, digest: digest_mask(&mask), baseline: mask.clone(), mask, log: Vec::new() }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn mask(&self) -> &Mask3D {
        &self.mask
    }

    pub fn digest(&self) -> Digest {
        self.digest
    }

    pub fn baseline(&self) -> &Mask3D {
        &self.baseline
    }

    /// Prompts applied since the baseline.
    pub fn log(&self) -> &[Prompt] {
        &self.log
    }
}

#[derive(Debug, Clone)]
struct LocalImage {
    volume: Volume3D,
    svol: Vec<u8>,
    digest: Digest,
}

impl LocalImage {
    fn new(volume: Volume3D) -> Self {
        let svol = encode_svol(&volume);
        let digest = Digest::of_bytes(&svol);
        LocalImage { volume, svol, digest }
    }
}

#[derive(Debug)]
pub struct ClientSession {
    api: ApiClient,
    server_url: String,
    token: String,
    image: Option<LocalImage>,
    segments: Vec<Segment>,
    active: Option<usize>,
    acked_image: Option<Digest>,
    acked_mask: Option<Digest>,
    stats: TransferStats,
}

impl ClientSession {
    /// Opens a session and remembers the URL in the user config file.
    pub fn connect(server_url: &str) -> Result<Self, ClientError> {
        Self::connect_with(server_url, &ConfigStore::user_default())
    }

    pub fn connect_with(server_url: &str, store: &ConfigStore) -> Result<Self, ClientError> {
        let api = ApiClient::new(server_url)?;
        let token = api.create_session()?;
        store.remember_server(server_url)?;
        Ok(ClientSession {
            api,
            server_url: server_url.to_string(),
            token,
            image: None,
            segments: Vec::new(),
            active: None,
            acked_image: None,
            acked_mask: None,
            stats: TransferStats::default(),
        })
    }

    pub fn server_url(&self) -> &str {
        &self.server_url
    }

    pub fn token(&self) -> &str {
        &self.token
    }

    pub fn api(&self) -> &ApiClient {
        &self.api
    }

    pub fn stats(&self) -> TransferStats {
        self.stats
    }

    pub fn image(&self) -> Option<&Volume3D> {
        self.image.as_ref().map(|i| &i.volume)
    }

    pub fn image_digest(&self) -> Option<Digest> {
        self.image.as_ref().map(|i| i.digest)
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn active_index(&self) -> Option<usize> {
        self.active
    }

    pub fn active_segment(&self) -> Option<&Segment> {
        self.active.map(|i| &self.segments[i])
    }

    pub fn acked_image_digest(&self) -> Option<Digest> {
        self.acked_image
    }

    pub fn acked_mask_digest(&self) -> Option<Digest> {
        self.acked_mask
    }

    pub fn remote_status(&self) -> Result<SessionStatus, ClientError> {
        self.api.status(&self.token)
    }

    pub fn fetch_mask(&mut self) -> Result<MaskReply, ClientError> {
        let reply = self.api.get_mask(&self.token)?;
        self.stats.bytes_down += reply.rle.to_bytes().len() as u64;
        Ok(reply)
    }

    fn dims(&self) -> Result<Dims, ClientError> {
        self.image.as_ref().map(|i| i.volume.dims()).ok_or(ClientError::NoImage)
    }

    /// Sets the local image. A different image discards all segments.
    pub fn load_image(&mut self, volume: Volume3D) {
        let img = LocalImage::new(volume);
        if self.image_digest() == Some(img.digest) {
            return;
        }
        self.image = Some(img);
        self.segments.clear();
        self.active = None;
    }

    fn sync_image(&mut self) -> Result<bool, ClientError> {
        let img = self.image.as_ref().ok_or(ClientError::NoImage)?;
        if self.acked_image == Some(img.digest) {
            return Ok(false);
        }
        let ack = self.api.put_image(&self.token, &img.svol)?;
        self.stats.image_uploads += 1;
        self.stats.bytes_up += img.svol.len() as u64;
        if ack.digest != img.digest {
            return Err(ClientError::Protocol(format!("server digested image as {}, expected {}", ack.digest, img.digest)));
        }
        self.acked_image = Some(ack.digest);
        // the server's mask after an upload (all-zero unless the image was already there)
        self.acked_mask = Some(ack.mask_digest);
        Ok(true)
    }

    fn sync_mask(&mut self) -> Result<bool, ClientError> {
        let Some(i) = self.active else { return Ok(false) };
        let seg = &self.segments[i];
        if self.acked_mask == Some(seg.digest) {
            return Ok(false);
        }
        let rle = rle_encode(&seg.mask);
        let ack = self.api.put_mask(&self.token, &rle)?;
        self.stats.mask_uploads += 1;
        self.stats.bytes_up += rle.len() as u64;
        if ack.digest != seg.digest {
            return Err(ClientError::Protocol(format!("server digested mask as {}, expected {}", ack.digest, seg.digest)));
        }
        self.acked_mask = Some(ack.mask_digest);
        Ok(true)
    }

    /// Uploads the image and then the active mask, each only if the server
    /// has not acknowledged the current local version.
    pub fn ensure_synced(&mut self) -> Result<SyncReport, ClientError> {
        let image_uploaded = self.sync_image()?;
        let mask_uploaded = self.sync_mask()?;
        Ok(SyncReport { image_uploaded, mask_uploaded })
    }

    fn push_segment(&mut self) -> Result<usize, ClientError> {
        let dims = self.dims()?;
        let name = format!("Segment {}", self.segments.len() + 1);
        self.segments.push(Segment::empty(name, dims));
        let i = self.segments.len() - 1;
        self.active = Some(i);
        Ok(i)
    }

    pub fn prompt(&mut self, prompt: Prompt) -> Result<PromptOutcome, ClientError> {
        self.prompt_with(prompt, SyncPolicy::Eager)
    }

    pub fn prompt_with(&mut self, prompt: Prompt, policy: SyncPolicy) -> Result<PromptOutcome, ClientError> {
        self.dims()?;
        if self.active.is_none() {
            self.push_segment()?;
        }
        let sync = match policy {
            SyncPolicy::Eager => self.ensure_synced()?,
            SyncPolicy::Optimistic => SyncReport::default(),
        };
        let (reply, retry) = match self.send_prompt(&prompt) {
            Err(ClientError::Server { status: 428, error, .. }) => {
                self.stats.stale_responses += 1;
                match error.as_str() {
                    "StaleImage" => self.acked_image = None,
                    _ => self.acked_mask = None,
                }
                let resync = self.ensure_synced()?;
                match self.send_prompt(&prompt) {
                    Err(ClientError::Server { status: 428, error, .. }) => {
                        self.stats.stale_responses += 1;
                        return Err(ClientError::SyncLoop(error));
                    }
                    r => (r?, Some(StaleRetry { reason: error, resync })),
                }
            }
            r => (r?, None),
        };
        let mask = reply.rle.to_mask().map_err(|e| ClientError::Protocol(e.to_string()))?;
        let dims = self.dims()?;
        if mask.dims() != dims {
            return Err(ClientError::Protocol("server mask has the wrong dims".into()));
        }
        if digest_mask(&mask) != reply.digest {
            return Err(ClientError::Protocol("server mask does not match its digest".into()));
        }
        let i = self.active.expect("created above");
        let seg = &mut self.segments[i];
        seg.mask = mask;
        seg.digest = reply.digest;
        seg.log.push(prompt);
        self.acked_mask = Some(reply.digest);
        Ok(PromptOutcome {
            changed_voxels: reply
                .changed_voxels
                .ok_or_else(|| ClientError::Protocol("prompt reply without changed-voxel count".into()))?,
            revision: reply.revision,
            mask_digest: reply.digest,
            sync,
            retry,
        })
    }

    fn send_prompt(&mut self, prompt: &Prompt) -> Result<MaskReply, ClientError> {
        let img = self.image.as_ref().ok_or(ClientError::NoImage)?;
        let seg = &self.segments[self.active.ok_or(ClientError::NoActiveSegment)?];
        let req = PromptRequest {
            prompt: prompt.clone(),
            expected_image_digest: img.digest,
            expected_mask_digest: Some(seg.digest),
        };
        self.stats.prompts_sent += 1;
        match self.api.prompt(&self.token, &req) {
            Err(ClientError::Server { status: 422, error, message }) => Err(ClientError::InvalidPrompt { error, message }),
            Ok(reply) => {
                self.stats.bytes_down += reply.rle.to_bytes().len() as u64;
                Ok(reply)
            }
            r => r,
        }
    }

    /// Clears the active segment here and on the server.
    pub fn reset_segment(&mut self) -> Result<(), ClientError> {
        let i = self.active.ok_or(ClientError::NoActiveSegment)?;
        self.sync_image()?;
        let ack = self.api.reset(&self.token)?;
        let zero = Mask3D::zeros(self.dims()?).expect("dims of a loaded image");
        let zero_digest = digest_mask(&zero);
        if ack.mask_digest != zero_digest {
            return Err(ClientError::Protocol("server mask is not empty after reset".into()));
        }
        let seg = &mut self.segments[i];
        seg.mask = zero.clone();
        seg.baseline = zero;
        seg.digest = zero_digest;
        seg.log.clear();
        self.acked_mask = Some(ack.mask_digest);
        Ok(())
    }

    /// Appends an empty segment, activates it and makes it the server's input mask.
    pub fn next_segment(&mut self) -> Result<usize, ClientError> {
        self.dims()?;
        let i = self.push_segment()?;
        self.acked_mask = None;
        self.ensure_synced()?;
        Ok(i)
    }

    /// Activates segment `index`; its mask is uploaded on the next sync.
    pub fn switch_segment(&mut self, index: usize) -> Result<(), ClientError> {
        if index >= self.segments.len() {
            return Err(ClientError::IndexOutOfRange { index, len: self.segments.len() });
        }
        if self.active == Some(index) {
            return Ok(());
        }
        self.active = Some(index);
        self.acked_mask = None;
        Ok(())
    }

    /// Replaces the active segment's mask with a local edit, which becomes the
    /// segment's new baseline. Creates a segment if there is none.
    pub fn set_active_mask(&mut self, mask: Mask3D) -> Result<(), ClientError> {
        let dims = self.dims()?;
        if mask.dims() != dims {
            return Err(ClientError::DimsMismatch { mask: mask.dims().as_array(), image: dims.as_array() });
        }
        let i = match self.active {
            Some(i) => i,
            None => self.push_segment()?,
        };
        let seg = &mut self.segments[i];
        seg.digest = digest_mask(&mask);
        seg.baseline = mask.clone();
        seg.mask = mask;
        seg.log.clear();
        Ok(())
    }

    /// After `SessionLost`: opens a new session, re-uploads the image and the
    /// active segment's baseline, and replays its prompt log. Fails if the
    /// replayed mask differs from the local one. Returns the prompts replayed.
    pub fn recover(&mut self) -> Result<usize, ClientError> {
        self.token = self.api.create_session()?;
        self.acked_image = None;
        self.acked_mask = None;
        if self.image.is_none() {
            return Ok(0);
        }
        self.sync_image()?;
        let Some(i) = self.active else { return Ok(0) };
        let image_digest = self.image_digest().expect("checked above");
        let baseline_rle = rle_encode(&self.segments[i].baseline);
        let mut digest = Digest::of_bytes(&baseline_rle);
        if self.acked_mask != Some(digest) {
            let ack = self.api.put_mask(&self.token, &baseline_rle)?;
            self.stats.mask_uploads += 1;
            self.stats.bytes_up += baseline_rle.len() as u64;
            digest = ack.mask_digest;
        }
        let log = self.segments[i].log.clone();
        for p in &log {
            let req = PromptRequest {
                prompt: p.clone(),
                expected_image_digest: image_digest,
                expected_mask_digest: Some(digest),
            };
            self.stats.prompts_sent += 1;
            digest = self.api.prompt(&self.token, &req)?.digest;
        }
        self.acked_mask = Some(digest);
        let expected = self.segments[i].digest;
        if digest != expected {
            return Err(ClientError::RecoveryMismatch { expected, actual: digest });
        }
        Ok(log.len())
    }
}

/// Decodes a mask reply for callers outside the session (CLI `fetch`).
pub fn decode_reply(reply: &MaskReply) -> Result<Mask3D, ClientError> {
    reply.rle.to_mask().map_err(|e| ClientError::Protocol(e.to_string()))
}

/// All-zero digest for `dims`.
pub fn empty_mask_digest(dims: Dims) -> Digest {
    Digest::of_bytes(&RleMask::from_mask(&Mask3D::zeros(dims).expect("valid dims")).to_bytes())
}
