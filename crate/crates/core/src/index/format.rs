//! Little-endian single-file index format.
//!
//! ```text
//! "ARPX" | version u32 | fingerprint [u8; 32] | record count u32
//! per record:
//!   id length u32 | id UTF-8 | label ordinal u8 | keypoint count u32
//!   keypoints  count * (x, y, scale, orientation, response) f32
//!   descriptors count * 128 f32
//! trailer:
//!   has_matrix u8
//!   if 1: ratio_threshold f32 | require_mutual u8 | dim u32 | dim * dim f64
//! ```
//!
//! Anything after the trailer is treated as corruption.

use std::io::Write;
use std::path::Path;

use tempfile::NamedTempFile;

use super::{CachedScores, ImageIndex, IndexError, IndexRecord, ScoreMatrix};
use crate::features::{Descriptor, FeatureSet, Keypoint, DESCRIPTOR_LEN};
use crate::label::PatternLabel;
use crate::matching::MatchConfig;
use crate::pipeline::Fingerprint;

pub const MAGIC: [u8; 4] = *b"ARPX";
pub const FORMAT_VERSION: u32 = 1;

const KEYPOINT_BYTES: usize = 5 * 4;
const DESCRIPTOR_BYTES: usize = DESCRIPTOR_LEN * 4;

pub(crate) fn encode(index: &ImageIndex) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&index.fingerprint().0);
    out.extend_from_slice(&(index.len() as u32).to_le_bytes());
    for r in index.records() {
        out.extend_from_slice(&(r.image_id.len() as u32).to_le_bytes());
        out.extend_from_slice(r.image_id.as_bytes());
        out.push(r.label.ordinal());
        out.extend_from_slice(&(r.features.len() as u32).to_le_bytes());
        for k in r.features.keypoints() {
            for v in [k.x, k.y, k.scale, k.orientation, k.response] {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        for d in r.features.descriptors() {
            for v in d.0 {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
    }
    match index.scores() {
        None => out.push(0),
        Some(c) => {
            out.push(1);
            out.extend_from_slice(&c.matching.ratio_threshold.to_le_bytes());
            out.push(c.matching.require_mutual as u8);
            out.extend_from_slice(&(c.matrix.dim() as u32).to_le_bytes());
            for v in c.matrix.values() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8], IndexError> {
        if self.buf.len() - self.pos < n {
            return Err(IndexError::Corrupt(format!(
                "truncated while reading {what} at byte {}",
                self.pos
            )));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }

    fn u8(&mut self, what: &str) -> Result<u8, IndexError> {
        Ok(self.take(1, what)?[0])
    }

    fn u32(&mut self, what: &str) -> Result<u32, IndexError> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn f32(&mut self, what: &str) -> Result<f32, IndexError> {
        Ok(f32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    /// Rejects counts that cannot fit in what is left, before allocating.
    fn check_fits(&self, count: usize, unit: usize, what: &str) -> Result<(), IndexError> {
        match count.checked_mul(unit) {
            Some(bytes) if bytes <= self.remaining() => Ok(()),
            _ => Err(IndexError::Corrupt(format!(
                "{what} count {count} exceeds the remaining {} bytes",
                self.remaining()
            ))),
        }
    }
}

pub(crate) fn decode(buf: &[u8]) -> Result<ImageIndex, IndexError> {
    let mut r = Reader { buf, pos: 0 };
    if r.take(4, "magic")? != MAGIC {
        return Err(IndexError::Corrupt("bad magic, not an index file".into()));
    }
    let version = r.u32("version")?;
    if version != FORMAT_VERSION {
        return Err(IndexError::Incompatible {
            found: version,
            expected: FORMAT_VERSION,
        });
    }
    let fingerprint = Fingerprint(r.take(32, "fingerprint")?.try_into().unwrap());
    let count = r.u32("record count")? as usize;
    // Smallest possible record: empty id, label, zero keypoints.
    r.check_fits(count, 4 + 1 + 4, "record")?;

    let mut records = Vec::with_capacity(count);
    for _ in 0..count {
        let id_len = r.u32("id length")? as usize;
        let id = std::str::from_utf8(r.take(id_len, "image id")?)
            .map_err(|_| IndexError::Corrupt("image id is not UTF-8".into()))?
            .to_owned();
        let ordinal = r.u8("label")?;
        let label = PatternLabel::from_ordinal(ordinal).ok_or_else(|| {
            IndexError::Corrupt(format!("label ordinal {ordinal} out of range for `{id}`"))
        })?;
        let n = r.u32("keypoint count")? as usize;
        r.check_fits(n, KEYPOINT_BYTES + DESCRIPTOR_BYTES, "keypoint")?;
        let mut kps = Vec::with_capacity(n);
        for _ in 0..n {
            kps.push(Keypoint {
                x: r.f32("keypoint")?,
                y: r.f32("keypoint")?,
                scale: r.f32("keypoint")?,
                orientation: r.f32("keypoint")?,
                response: r.f32("keypoint")?,
            });
        }
        let mut descs = Vec::with_capacity(n);
        for _ in 0..n {
            let raw = r.take(DESCRIPTOR_BYTES, "descriptor")?;
            let mut d = [0f32; DESCRIPTOR_LEN];
            for (v, b) in d.iter_mut().zip(raw.chunks_exact(4)) {
                *v = f32::from_le_bytes(b.try_into().unwrap());
            }
            descs.push(Descriptor(d));
        }
        let fs = FeatureSet::new(id.clone(), Some(label), kps, descs);
        records.push(IndexRecord::new(id, label, fs));
    }

    let scores = match r.u8("trailer")? {
        0 => None,
        1 => {
            let ratio_threshold = r.f32("matrix ratio")?;
            let require_mutual = match r.u8("matrix mutual flag")? {
                0 => false,
                1 => true,
                v => return Err(IndexError::Corrupt(format!("bad mutual flag {v}"))),
            };
            let dim = r.u32("matrix dimension")? as usize;
            let cells = dim
                .checked_mul(dim)
                .ok_or_else(|| IndexError::Corrupt("matrix dimension overflows".into()))?;
            r.check_fits(cells, 8, "matrix cell")?;
            let values = r
                .take(cells * 8, "matrix")?
                .chunks_exact(8)
                .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
                .collect();
            Some(CachedScores {
                matching: MatchConfig {
                    ratio_threshold,
                    require_mutual,
                },
                matrix: ScoreMatrix::from_vec(dim, values).unwrap(),
            })
        }
        v => return Err(IndexError::Corrupt(format!("bad trailer flag {v}"))),
    };
    if r.remaining() != 0 {
        return Err(IndexError::Corrupt(format!(
            "{} trailing bytes",
            r.remaining()
        )));
    }

    let index = ImageIndex::new(fingerprint, records).map_err(|e| match e {
        IndexError::DuplicateId(id) => IndexError::Corrupt(format!("duplicate image id `{id}`")),
        other => other,
    })?;
    match scores {
        None => Ok(index),
        Some(s) => index
            .with_scores(s)
            .map_err(|e| IndexError::Corrupt(e.to_string())),
    }
}

/// Writes via a temporary file in the target directory and renames it into
/// place, so a failed save never leaves a partial file behind.
pub fn save_index(index: &ImageIndex, path: &Path) -> Result<(), IndexError> {
    let bytes = encode(index);
    let io = |source| IndexError::Io {
        path: path.to_path_buf(),
        cause: source,
    };
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(&bytes).map_err(io)?;
    tmp.as_file().sync_all().map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}

pub fn load_index(path: &Path) -> Result<ImageIndex, IndexError> {
    let bytes = std::fs::read(path).map_err(|source| IndexError::Io {
        path: path.to_path_buf(),
        cause: source,
    })?;
    decode(&bytes)
}
