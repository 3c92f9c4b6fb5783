//! Depth map files: 8-byte magic `DEPTHF32`, width and height as
//! little-endian u32, then row-major little-endian f32 depths. Invalid
//! pixels carry the in-memory invalid value (0.0).

use std::fs;
use std::path::Path;

use dexfit_core::camera::DepthMap;

use super::{invalid, FormatError};
use crate::manifest::write_atomic;

const MAGIC: &[u8; 8] = b"DEPTHF32";

pub fn depth_to_bytes(map: &DepthMap) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + 4 * map.data().len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&map.width().to_le_bytes());
    out.extend_from_slice(&map.height().to_le_bytes());
    for &d in map.data() {
        out.extend_from_slice(&(d as f32).to_le_bytes());
    }
    out
}

pub fn save_depth(path: &Path, map: &DepthMap) -> Result<(), FormatError> {
    write_atomic(path, &depth_to_bytes(map))?;
    Ok(())
}

pub fn depth_from_bytes(bytes: &[u8]) -> Result<DepthMap, FormatError> {
    if bytes.len() < 16 || &bytes[..8] != MAGIC {
        return Err(invalid("not a depth file"));
    }
    let width = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
    let height = u32::from_le_bytes(bytes[12..16].try_into().unwrap());
    let count = width as usize * height as usize;
    if bytes.len() != 16 + 4 * count {
        return Err(invalid("depth payload does not match its dimensions"));
    }
    let data = bytes[16..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
        .collect();
    DepthMap::from_data(width, height, data).ok_or_else(|| invalid("bad depth values"))
}

pub fn load_depth(path: &Path) -> Result<DepthMap, FormatError> {
    depth_from_bytes(&fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn depth_maps_round_trip_at_f32_precision() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.bin");
        let mut map = DepthMap::new(5, 3);
        map.set(0, 0, 0.75);
        map.set(2, 4, 0.0009765625);
        map.set(1, 2, 2.0);
        save_depth(&path, &map).unwrap();
        let back = load_depth(&path).unwrap();
        assert_eq!(back.width(), 5);
        assert_eq!(back.height(), 3);
        // The chosen values are exact in f32, so the trip is lossless.
        assert_eq!(back.data(), map.data());
    }

    #[test]
    fn corrupt_files_are_rejected() {
        assert!(depth_from_bytes(b"DEPTHF32").is_err());
        assert!(depth_from_bytes(b"NOTDEPTH\0\0\0\0\0\0\0\0").is_err());
        let mut ok = depth_to_bytes(&DepthMap::new(2, 2));
        ok.pop();
        assert!(depth_from_bytes(&ok).is_err());
    }
}
