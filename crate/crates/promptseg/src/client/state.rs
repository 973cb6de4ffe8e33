//! On-disk snapshot of a [`ClientSession`], so that each CLI invocation can
//! pick up where the previous one stopped.
//!
//! Layout: `session.json` plus `image.svol` and one `segment-N.rle` /
//! `segment-N.base.rle` pair per segment.

use std::path::Path;

use promptseg_core::{decode_svol, digest_mask, rle_decode, rle_encode, Digest, Prompt};
use serde::{Deserialize, Serialize};

use super::{ApiClient, ClientError, ClientSession, LocalImage, Segment, TransferStats};

const MANIFEST: &str = "session.json";
const IMAGE: &str = "image.svol";

#[derive(Serialize, Deserialize)]
struct Manifest {
    server_url: String,
    token: String,
    image_digest: Option<Digest>,
    active: Option<usize>,
    acked_image: Option<Digest>,
    acked_mask: Option<Digest>,
    segments: Vec<SegmentEntry>,
}

#[derive(Serialize, Deserialize)]
struct SegmentEntry {
    name: String,
    digest: Digest,
    log: Vec<Prompt>,
}

fn bad(msg: impl Into<String>) -> ClientError {
    ClientError::State(msg.into())
}

impl ClientSession {
    pub fn save_state(&self, dir: &Path) -> Result<(), ClientError> {
        std::fs::create_dir_all(dir)?;
        if let Some(img) = &self.image {
            std::fs::write(dir.join(IMAGE), &img.svol)?;
        }
        for (i, s) in self.segments.iter().enumerate() {
            std::fs::write(dir.join(format!("segment-{i}.rle")), rle_encode(&s.mask))?;
            std::fs::write(dir.join(format!("segment-{i}.base.rle")), rle_encode(&s.baseline))?;
        }
        let manifest = Manifest {
            server_url: self.server_url.clone(),
            token: self.token.clone(),
            image_digest: self.image_digest(),
            active: self.active,
            acked_image: self.acked_image,
            acked_mask: self.acked_mask,
            segments: self
                .segments
                .iter()
                .map(|s| SegmentEntry { name: s.name.clone(), digest: s.digest, log: s.log.clone() })
                .collect(),
        };
        let json = serde_json::to_vec_pretty(&manifest).map_err(|e| bad(e.to_string()))?;
        // manifest last, so a half-written snapshot never looks complete
        std::fs::write(dir.join(MANIFEST), json)?;
        Ok(())
    }

    pub fn load_state(dir: &Path) -> Result<Self, ClientError> {
        let text = std::fs::read(dir.join(MANIFEST))
            .map_err(|e| bad(format!("no saved session in {} ({e}); run `connect` first", dir.display())))?;
        let m: Manifest = serde_json::from_slice(&text).map_err(|e| bad(format!("{MANIFEST}: {e}")))?;
        let api = ApiClient::new(&m.server_url)?;

        let image = match m.image_digest {
            None => None,
            Some(d) => {
                let bytes = std::fs::read(dir.join(IMAGE))?;
                let img = LocalImage::new(decode_svol(&bytes).map_err(|e| bad(format!("{IMAGE}: {e}")))?);
                if img.digest != d {
                    return Err(bad(format!("{IMAGE} does not match its recorded digest")));
                }
                Some(img)
            }
        };

        let mut segments = Vec::with_capacity(m.segments.len());
        for (i, e) in m.segments.into_iter().enumerate() {
            let read = |name: String| -> Result<_, ClientError> {
                let bytes = std::fs::read(dir.join(&name))?;
                rle_decode(&bytes).map_err(|err| bad(format!("{name}: {err}")))
            };
            let mask = read(format!("segment-{i}.rle"))?;
            let baseline = read(format!("segment-{i}.base.rle"))?;
            let dims = image.as_ref().map(|im| im.volume.dims()).ok_or_else(|| bad("segments without an image"))?;
            if mask.dims() != dims || baseline.dims() != dims || digest_mask(&mask) != e.digest {
                return Err(bad(format!("segment {i} is inconsistent with the saved image")));
            }
            segments.push(Segment { name: e.name, mask, digest: e.digest, baseline, log: e.log });
        }
        if m.active.is_some_and(|a| a >= segments.len()) || (m.active.is_none() && !segments.is_empty()) {
            return Err(bad("active segment index is invalid"));
        }

        Ok(ClientSession {
            api,
            server_url: m.server_url,
            token: m.token,
            image,
            segments,
            active: m.active,
            acked_image: m.acked_image,
            acked_mask: m.acked_mask,
            stats: TransferStats::default(),
        })
    }
}
