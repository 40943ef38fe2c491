//! `SPHFLD01` field files.
//!
//! ```text
//! offset  size  content
//! 0       8     b"SPHFLD01"
//! 8       1     geometry: 0 = equirect, 1 = healpix
//! 9       4     n_lat_pts | n_side         u32 LE
//! 13      4     n_lon_pts | 0              u32 LE
//! 17      4     channels                   u32 LE
//! 21      4     snapshots (>= 1)           u32 LE
//! 25      ...   f32 LE values, snapshot-major, then point, then channel
//! ```

use std::fs;
use std::path::Path;

use crate::healpix;
use crate::tasks::{FieldDataset, Geometry};
use crate::{Error, Result};

pub const FIELD_MAGIC: &[u8; 8] = b"SPHFLD01";
pub const FIELD_HEADER_LEN: usize = 25;

pub fn encode_field(ds: &FieldDataset) -> Vec<u8> {
    let mut out = Vec::with_capacity(FIELD_HEADER_LEN + ds.values().len() * 4);
    out.extend_from_slice(FIELD_MAGIC);
    let (tag, a, b) = match ds.geometry() {
        Geometry::Equirect { n_lat_pts, n_lon_pts } => (0u8, n_lat_pts, n_lon_pts),
        Geometry::Healpix { n_side } => (1u8, n_side, 0),
    };
    out.push(tag);
    for v in [a, b, ds.channels(), ds.snapshots()] {
        out.extend_from_slice(&(v as u32).to_le_bytes());
    }
    for v in ds.values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

fn read_u32(bytes: &[u8], offset: usize) -> u32 {
    u32::from_le_bytes(bytes[offset..offset + 4].try_into().expect("4-byte slice"))
}

pub fn decode_field(bytes: &[u8]) -> Result<FieldDataset> {
    if bytes.len() < FIELD_HEADER_LEN {
        return Err(Error::format(
            bytes.len() as u64,
            format!("header needs {FIELD_HEADER_LEN} bytes, file has {}", bytes.len()),
        ));
    }
    if &bytes[..8] != FIELD_MAGIC {
        return Err(Error::format(0, "bad magic, expected SPHFLD01"));
    }
    let (a, b) = (read_u32(bytes, 9) as usize, read_u32(bytes, 13) as usize);
    let geometry = match bytes[8] {
        0 => {
            if a == 0 || b == 0 {
                return Err(Error::format(9, format!("empty equirect grid {a}x{b}")));
            }
            Geometry::Equirect {
                n_lat_pts: a,
                n_lon_pts: b,
            }
        }
        1 => {
            if healpix::check_n_side(a).is_err() {
                return Err(Error::format(9, format!("n_side {a} is not a power of two")));
            }
            if b != 0 {
                return Err(Error::format(13, "second dimension of a healpix field must be 0"));
            }
            Geometry::Healpix { n_side: a }
        }
        t => return Err(Error::format(8, format!("unknown geometry tag {t}"))),
    };
    let channels = read_u32(bytes, 17) as usize;
    if channels == 0 {
        return Err(Error::format(17, "channel count must be positive"));
    }
    let snapshots = read_u32(bytes, 21) as usize;
    if snapshots == 0 {
        return Err(Error::format(21, "snapshot count must be positive"));
    }
    let expected = (geometry.n_points() as u64) * channels as u64 * snapshots as u64 * 4;
    let actual = (bytes.len() - FIELD_HEADER_LEN) as u64;
    if actual != expected {
        return Err(Error::format(
            bytes.len() as u64,
            format!("payload should be {expected} bytes, found {actual}"),
        ));
    }
    let values = bytes[FIELD_HEADER_LEN..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4-byte chunk")))
        .collect();
    FieldDataset::new(geometry, channels, snapshots, values)
}

pub fn save_field(ds: &FieldDataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_field(ds)).map_err(|e| Error::io(path, e))
}

pub fn load_field(path: impl AsRef<Path>) -> Result<FieldDataset> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_field(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn healpix_payload_size() {
        let ds = FieldDataset::new(Geometry::Healpix { n_side: 1 }, 1, 1, vec![0.5; 12]).unwrap();
        let bytes = encode_field(&ds);
        assert_eq!(bytes.len() - FIELD_HEADER_LEN, 12 * 4);
        assert_eq!(decode_field(&bytes).unwrap(), ds);
    }

    #[test]
    fn header_errors_carry_offsets() {
        let ds = FieldDataset::new(
            Geometry::Equirect {
                n_lat_pts: 3,
                n_lon_pts: 4,
            },
            1,
            1,
            (0..12).map(|v| v as f32).collect(),
        )
        .unwrap();
        let good = encode_field(&ds);
        let mut bad = good.clone();
        bad[0] = b'X';
        assert!(matches!(decode_field(&bad), Err(Error::Format { offset: 0, .. })));
        let err = decode_field(&good[..good.len() - 3]).unwrap_err();
        assert!(err.to_string().contains("should be 48 bytes, found 45"), "{err}");
        let mut hp = good.clone();
        hp[8] = 1;
        hp[9] = 3;
        assert!(matches!(decode_field(&hp), Err(Error::Format { offset: 9, .. })));
        assert!(decode_field(&good[..10]).is_err());
    }
}
