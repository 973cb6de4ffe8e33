//! Session table and the per-session state machine.
//!
//! Every operation here is synchronous and assumes the caller holds the
//! session lock; the HTTP layer only maps results to status codes.

use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use promptseg_core::rle::RleMask;
use promptseg_core::svol::decode_svol_header;
use promptseg_core::{
    decode_svol, digest_mask, digest_volume, Digest, Mask3D, Prompt, RleError, SegmentError,
    SegmenterBackend, SvolError, Volume3D,
};

use crate::wire::SessionStatus;

/// 128-bit random session identifier, rendered as 32 lowercase hex chars.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Token(u128);

impl Token {
    pub fn random() -> Self {
        Token(rand::random())
    }

    pub fn parse(s: &str) -> Option<Self> {
        if s.len() != 32 || !s.bytes().all(|c| c.is_ascii_digit() || (b'a'..=b'f').contains(&c)) {
            return None;
        }
        u128::from_str_radix(s, 16).ok().map(Token)
    }
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:032x}", self.0)
    }
}

impl fmt::Debug for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Token({self})")
    }
}

/// Failures of state-changing operations. None of them alter the session.
#[derive(Debug, thiserror::Error)]
pub enum SessionError {
    #[error("NoImage: session has no image")]
    NoImage,
    #[error("{0}")]
    Svol(#[from] SvolError),
    #[error("{0}")]
    Rle(#[from] RleError),
    #[error("TooLarge: volume has {voxels} voxels, limit is {limit}")]
    TooLarge { voxels: u128, limit: u64 },
    #[error("DimsMismatch: mask dims {mask:?} differ from image dims {image:?}")]
    DimsMismatch { mask: [u32; 3], image: [u32; 3] },
    #[error("StaleImage: expected image {expected}, server has {actual}")]
    StaleImage { expected: Digest, actual: Digest },
    #[error("StaleMask: expected mask {expected}, server has {actual}")]
    StaleMask { expected: Digest, actual: Digest },
    #[error("{0}")]
    Prompt(#[from] SegmentError),
}

#[derive(Debug, Clone)]
struct Loaded {
    image: Volume3D,
    image_digest: Digest,
    mask: Mask3D,
    mask_digest: Digest,
}

/// Outcome of a successful prompt.
#[derive(Debug, Clone)]
pub struct PromptApplied {
    pub rle: Vec<u8>,
    pub mask_digest: Digest,
    pub revision: u64,
    pub changed_voxels: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Upload {
    pub digest: Digest,
    pub mask_digest: Digest,
    pub revision: u64,
}

#[derive(Debug, Default)]
pub struct SessionState {
    loaded: Option<Loaded>,
    prompt_log: Vec<(Prompt, u64)>,
    revision: u64,
}

impl SessionState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn revision(&self) -> u64 {
        self.revision
    }

    pub fn prompt_log(&self) -> &[(Prompt, u64)] {
        &self.prompt_log
    }

    pub fn status(&self) -> SessionStatus {
        SessionStatus {
            has_image: self.loaded.is_some(),
            image_digest: self.loaded.as_ref().map(|l| l.image_digest),
            mask_digest: self.loaded.as_ref().map(|l| l.mask_digest),
            revision: self.revision,
            prompt_count: self.prompt_log.len(),
        }
    }

    fn loaded(&self) -> Result<&Loaded, SessionError> {
        self.loaded.as_ref().ok_or(SessionError::NoImage)
    }

    fn bump(&mut self) -> u64 {
        self.revision += 1;
        self.revision
    }

    /// Replaces the image unless it is byte-identical to the current one.
    pub fn put_image(&mut self, body: &[u8], max_voxels: u64) -> Result<Upload, SessionError> {
        let header = decode_svol_header(body)?;
        let voxels = header.dims.voxel_count_u128();
        if voxels > max_voxels as u128 {
            return Err(SessionError::TooLarge { voxels, limit: max_voxels });
        }
        let image = decode_svol(body)?;
        let image_digest = digest_volume(&image);
        if let Some(l) = &self.loaded {
            if l.image_digest == image_digest {
                return Ok(Upload { digest: image_digest, mask_digest: l.mask_digest, revision: self.revision });
            }
        }
        let mask = Mask3D::zeros(image.dims()).map_err(|_| SvolError::DimsOverflow)?;
        let mask_digest = digest_mask(&mask);
        self.loaded = Some(Loaded { image, image_digest, mask, mask_digest });
        self.prompt_log.clear();
        let revision = self.bump();
        Ok(Upload { digest: image_digest, mask_digest, revision })
    }

    /// Replaces the input mask unless it equals the current one.
    pub fn put_mask(&mut self, body: &[u8]) -> Result<Upload, SessionError> {
        let image_dims = self.loaded()?.image.dims();
        let rle = RleMask::parse(body)?;
        if rle.dims() != image_dims {
            return Err(SessionError::DimsMismatch { mask: rle.dims().as_array(), image: image_dims.as_array() });
        }
        let mask_digest = Digest::of_bytes(&rle.to_bytes());
        let revision = self.revision;
        let loaded = self.loaded.as_mut().expect("checked above");
        if loaded.mask_digest == mask_digest {
            return Ok(Upload { digest: mask_digest, mask_digest, revision });
        }
        loaded.mask = rle.to_mask()?;
        loaded.mask_digest = mask_digest;
        self.prompt_log.clear();
        let revision = self.bump();
        Ok(Upload { digest: mask_digest, mask_digest, revision })
    }

    /// Checks digest preconditions, then runs the backend.
    pub fn apply_prompt(
        &mut self,
        backend: &dyn SegmenterBackend,
        prompt: Prompt,
        expected_image: Digest,
        expected_mask: Option<Digest>,
    ) -> Result<PromptApplied, SessionError> {
        let loaded = self.loaded()?;
        if expected_image != loaded.image_digest {
            return Err(SessionError::StaleImage { expected: expected_image, actual: loaded.image_digest });
        }
        if let Some(expected) = expected_mask {
            if expected != loaded.mask_digest {
                return Err(SessionError::StaleMask { expected, actual: loaded.mask_digest });
            }
        }
        let next = backend.apply(&loaded.image, &loaded.mask, &prompt)?;
        assert_eq!(next.dims(), loaded.image.dims(), "backend returned a mask of the wrong dims");
        let changed_voxels = next.hamming_distance(&loaded.mask);
        let rle = promptseg_core::rle_encode(&next);
        let mask_digest = Digest::of_bytes(&rle);

        let loaded = self.loaded.as_mut().expect("checked above");
        loaded.mask = next;
        loaded.mask_digest = mask_digest;
        let revision = self.bump();
        self.prompt_log.push((prompt, revision));
        Ok(PromptApplied { rle, mask_digest, revision, changed_voxels })
    }

    /// Zeroes the mask and clears the log, unconditionally.
    pub fn reset(&mut self) -> Result<(u64, Digest), SessionError> {
        let dims = self.loaded()?.image.dims();
        let mask = Mask3D::zeros(dims).expect("dims of a valid image");
        let mask_digest = digest_mask(&mask);
        let loaded = self.loaded.as_mut().expect("checked above");
        loaded.mask = mask;
        loaded.mask_digest = mask_digest;
        self.prompt_log.clear();
        Ok((self.bump(), mask_digest))
    }

    pub fn mask_rle(&self) -> Result<(Vec<u8>, Digest, u64), SessionError> {
        let l = self.loaded()?;
        Ok((promptseg_core::rle_encode(&l.mask), l.mask_digest, self.revision))
    }
}

#[derive(Debug)]
pub struct SessionEntry {
    pub state: tokio::sync::Mutex<SessionState>,
    last_touch: Mutex<Instant>,
}

impl SessionEntry {
    fn new(now: Instant) -> Self {
        SessionEntry { state: tokio::sync::Mutex::new(SessionState::new()), last_touch: Mutex::new(now) }
    }

    pub fn touch(&self, now: Instant) {
        *self.last_touch.lock().unwrap() = now;
    }

    pub fn last_touch(&self) -> Instant {
        *self.last_touch.lock().unwrap()
    }
}

#[derive(Debug, thiserror::Error)]
#[error("SessionTableFull: {0} sessions open")]
pub struct TableFull(pub usize);

/// Concurrent map from token to session.
#[derive(Debug)]
pub struct SessionTable {
    sessions: Mutex<HashMap<Token, Arc<SessionEntry>>>,
    capacity: usize,
    ttl: Duration,
}

impl SessionTable {
    pub fn new(capacity: usize, ttl: Duration) -> Self {
        SessionTable { sessions: Mutex::new(HashMap::new()), capacity, ttl }
    }

    pub fn ttl(&self) -> Duration {
        self.ttl
    }

    pub fn len(&self) -> usize {
        self.sessions.lock().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn create(&self, now: Instant) -> Result<Token, TableFull> {
        let mut map = self.sessions.lock().unwrap();
        if map.len() >= self.capacity {
            return Err(TableFull(map.len()));
        }
        loop {
            let token = Token::random();
            if let std::collections::hash_map::Entry::Vacant(v) = map.entry(token) {
                v.insert(Arc::new(SessionEntry::new(now)));
                return Ok(token);
            }
        }
    }

    /// Looks a session up and refreshes its idle timer.
    pub fn get(&self, token: &Token, now: Instant) -> Option<Arc<SessionEntry>> {
        let entry = self.sessions.lock().unwrap().get(token).cloned()?;
        entry.touch(now);
        Some(entry)
    }

    /// Drops sessions idle for longer than the TTL; returns how many.
    pub fn expire_sessions(&self, now: Instant) -> usize {
        let mut map = self.sessions.lock().unwrap();
        let before = map.len();
        let ttl = self.ttl;
        map.retain(|_, e| now.saturating_duration_since(e.last_touch()) <= ttl);
        before - map.len()
    }
}
