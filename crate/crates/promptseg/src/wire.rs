//! JSON control-plane messages and header names shared by server and client.
//!
//! Bulk payloads travel as raw `application/octet-stream` bodies: SVOL1 for
//! images, RLE for masks. Mask responses carry their metadata in headers.

use promptseg_core::{Digest, Prompt};
use serde::{Deserialize, Serialize};

pub const OCTET_STREAM: &str = "application/octet-stream";

pub const HEADER_MASK_DIGEST: &str = "x-mask-digest";
pub const HEADER_REVISION: &str = "x-revision";
pub const HEADER_CHANGED_VOXELS: &str = "x-changed-voxels";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionCreated {
    pub token: String,
}

/// Reply to image and mask uploads.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UploadAck {
    /// Server-computed digest of the uploaded resource.
    pub digest: Digest,
    /// Server mask digest after the upload.
    pub mask_digest: Digest,
    pub revision: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResetAck {
    pub revision: u64,
    pub mask_digest: Digest,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionStatus {
    pub has_image: bool,
    pub image_digest: Option<Digest>,
    pub mask_digest: Option<Digest>,
    pub revision: u64,
    pub prompt_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptRequest {
    pub prompt: Prompt,
    pub expected_image_digest: Digest,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expected_mask_digest: Option<Digest>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Health {
    pub status: String,
}
