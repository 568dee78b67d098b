//! Raw tensor archive.
//!
//! Each image is stored as the magic `LPT1`, the rank as a little-endian
//! `u32`, the dimensions as `u32`, then the values as little-endian `f32`.
//! A sibling index file `<archive>.idx` maps `image_id` to the byte offset
//! of its record.

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::image::ImageTensor;

use super::{write_atomic, Dataset};

const MAGIC: &[u8; 4] = b"LPT1";
const INDEX_HEADER: &str = "image_id,offset";

pub fn index_path(archive: &Path) -> PathBuf {
    let mut s = archive.as_os_str().to_owned();
    s.push(".idx");
    PathBuf::from(s)
}

/// Serializes a dataset into archive bytes and index text.
pub fn encode_archive(dataset: &Dataset) -> (Vec<u8>, String) {
    let mut bytes = Vec::new();
    let mut index = format!("{INDEX_HEADER}\n");
    for (id, img) in dataset.iter() {
        index.push_str(&format!("{id},{}\n", bytes.len()));
        bytes.extend_from_slice(MAGIC);
        bytes.extend_from_slice(&3u32.to_le_bytes());
        for dim in img.shape() {
            bytes.extend_from_slice(&(dim as u32).to_le_bytes());
        }
        for v in img.data() {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
    }
    (bytes, index)
}

fn read_u32(bytes: &[u8], at: &mut usize) -> Result<u32> {
    let end = *at + 4;
    let chunk = bytes
        .get(*at..end)
        .ok_or_else(|| Error::Format(format!("archive truncated at byte {at}")))?;
    *at = end;
    Ok(u32::from_le_bytes(chunk.try_into().expect("4 bytes")))
}

fn decode_record(bytes: &[u8], offset: usize) -> Result<ImageTensor> {
    if bytes.get(offset..offset + 4) != Some(MAGIC.as_slice()) {
        return Err(Error::Format(format!("no LPT1 record at byte {offset}")));
    }
    let mut at = offset + 4;
    let rank = read_u32(bytes, &mut at)?;
    if rank != 3 {
        return Err(Error::Format(format!(
            "record at byte {offset} has rank {rank}; images need rank 3"
        )));
    }
    let mut shape = [0usize; 3];
    for s in &mut shape {
        *s = read_u32(bytes, &mut at)? as usize;
    }
    let len = shape.iter().product::<usize>();
    let raw = bytes
        .get(at..at + 4 * len)
        .ok_or_else(|| Error::Format(format!("record at byte {offset} is truncated")))?;
    let data = raw
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
        .collect();
    ImageTensor::new(shape, data)
}

pub fn decode_archive(bytes: &[u8], index: &str) -> Result<Dataset> {
    let mut lines = index.lines();
    if lines.next() != Some(INDEX_HEADER) {
        return Err(Error::Format(format!("index must start with `{INDEX_HEADER}`")));
    }
    let mut ids = Vec::new();
    let mut images = Vec::new();
    for line in lines.filter(|l| !l.is_empty()) {
        let (id, offset) = line
            .rsplit_once(',')
            .ok_or_else(|| Error::Format(format!("malformed index line `{line}`")))?;
        let offset: usize = offset
            .parse()
            .map_err(|_| Error::Format(format!("bad offset in index line `{line}`")))?;
        ids.push(id.to_string());
        images.push(decode_record(bytes, offset)?);
    }
    Dataset::new(ids, images)
}

pub fn write_archive(path: &Path, dataset: &Dataset) -> Result<()> {
    let (bytes, index) = encode_archive(dataset);
    write_atomic(path, &bytes)?;
    write_atomic(&index_path(path), index.as_bytes())
}

pub fn read_archive(path: &Path) -> Result<Dataset> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let idx = index_path(path);
    let index = std::fs::read_to_string(&idx).map_err(|e| Error::io(&idx, e))?;
    decode_archive(&bytes, &index)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_bytes() {
        let a = ImageTensor::new([1, 2, 2], vec![0.0, 0.25, 0.5, 1.0]).unwrap();
        let b = ImageTensor::new([3, 1, 1], vec![0.1, 0.2, 0.3]).unwrap();
        let ds = Dataset::new(vec!["x".into(), "y".into()], vec![a, b]);
        // Mixed shapes are rejected by the dataset, not the archive format.
        assert!(ds.is_err());
        let a = ImageTensor::new([1, 2, 2], vec![0.0, 0.25, 0.5, 1.0]).unwrap();
        let b = ImageTensor::new([1, 2, 2], vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let ds = Dataset::new(vec!["x".into(), "y".into()], vec![a, b]).unwrap();
        let (bytes, index) = encode_archive(&ds);
        assert_eq!(&bytes[..4], b"LPT1");
        assert_eq!(u32::from_le_bytes(bytes[4..8].try_into().unwrap()), 3);
        assert_eq!(bytes.len(), 2 * (4 + 16 + 16));
        assert_eq!(index, "image_id,offset\nx,0\ny,36\n");
        assert_eq!(decode_archive(&bytes, &index).unwrap(), ds);
    }

    #[test]
    fn truncated_archive() {
        let ds = Dataset::new(vec!["x".into()], vec![ImageTensor::filled([1, 1, 2], 0.5)]).unwrap();
        let (bytes, index) = encode_archive(&ds);
        assert!(decode_archive(&bytes[..bytes.len() - 1], &index).is_err());
    }

    #[test]
    fn files_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("data.lpt");
        let ds = Dataset::new(vec!["0".into()], vec![ImageTensor::filled([3, 2, 2], 0.75)]).unwrap();
        write_archive(&path, &ds).unwrap();
        assert!(index_path(&path).ends_with("data.lpt.idx"));
        assert_eq!(read_archive(&path).unwrap(), ds);
    }
}
