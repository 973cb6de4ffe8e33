//! Reading and writing volumes by file extension.

use std::path::Path;

use promptseg_core::{decode_svol, encode_svol, Mask3D, Volume3D, VoxelData};

use crate::nifti::parse_nifti;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VolumeFormat {
    Svol,
    Nifti,
}

impl VolumeFormat {
    pub fn of_path(p: &Path) -> Option<Self> {
        let name = p.file_name()?.to_str()?.to_ascii_lowercase();
        if name.ends_with(".svol") {
            Some(VolumeFormat::Svol)
        } else if name.ends_with(".nii") || name.ends_with(".nii.gz") {
            Some(VolumeFormat::Nifti)
        } else {
            None
        }
    }
}

/// Loads `.svol`, `.nii` or `.nii.gz`. NIfTI intensity scaling is not applied.
pub fn load_volume(path: &Path) -> Result<Volume3D, String> {
    let format = VolumeFormat::of_path(path)
        .ok_or_else(|| format!("{}: unknown extension (expected .svol, .nii or .nii.gz)", path.display()))?;
    let bytes = std::fs::read(path).map_err(|e| format!("{}: {e}", path.display()))?;
    match format {
        VolumeFormat::Svol => decode_svol(&bytes).map_err(|e| format!("{}: {e}", path.display())),
        VolumeFormat::Nifti => parse_nifti(&bytes).map_err(|e| format!("{}: {e}", path.display())),
    }
}

/// The mask as a 0/1 U8 volume with the image's spacing, SVOL1-encoded.
pub fn mask_to_svol(mask: &Mask3D, like: &Volume3D) -> Vec<u8> {
    let data = VoxelData::U8(mask.bits().iter().map(|&b| b as u8).collect());
    encode_svol(&Volume3D::new(mask.dims(), like.spacing(), data).expect("mask and image agree"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn format_by_extension() {
        assert_eq!(VolumeFormat::of_path(Path::new("a/b.SVOL")), Some(VolumeFormat::Svol));
        assert_eq!(VolumeFormat::of_path(Path::new("b.nii.gz")), Some(VolumeFormat::Nifti));
        assert_eq!(VolumeFormat::of_path(Path::new("b.nii")), Some(VolumeFormat::Nifti));
        assert_eq!(VolumeFormat::of_path(Path::new("b.gz")), None);
    }
}
