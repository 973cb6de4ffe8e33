//! Data model, wire codecs, content digests and the reference segmenter for
//! an interactive 3D segmentation service.
//!
//! Everything here is a pure function over in-memory values; IO, HTTP and
//! file formats other than the two wire codecs live in the `promptseg`
//! crate. The crate is `no_std` and needs only `alloc`.
#![no_std]

extern crate alloc;

pub mod digest;
pub mod rle;
pub mod segmenter;
pub mod svol;
pub mod volume;

pub use digest::{digest_mask, digest_volume, Digest, ParseDigestError};
pub use rle::{rle_decode, rle_encode, RleError, RleMask};
pub use segmenter::{
    apply_prompt, Axis, Polarity, Prompt, PromptKind, Radius, ReferenceSegmenter, SegmentError,
    SegmenterBackend, SegmenterParams,
};
pub use svol::{decode_svol, encode_svol, SvolError};
pub use volume::{Dims, Dtype, Mask3D, Spacing, Volume3D, VolumeError, VoxelCoord, VoxelData};
