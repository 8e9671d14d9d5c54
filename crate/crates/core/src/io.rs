//! File formats: F32R rasters, binary PGM masks and weight-bundle directories.
//!
//! F32R is an ASCII header line `F32R <W> <H> <C>\n` followed by exactly
//! `W*H*C` little-endian `f32` values, row-major with channels interleaved.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use crate::camera::IntrinsicsFile;
use crate::error::{Error, Result};
use crate::mask::{BinaryMask, SAFE, UNSAFE};
use crate::raster::Raster;

pub const RASTER_MAGIC: &str = "F32R";
pub const RASTER_EXTENSION: &str = "f32r";
const MASK_MAGIC: &str = "P5";
const MASK_MAXVAL: usize = 255;
/// Mask bytes at or above this value decode as unsafe.
pub const MASK_THRESHOLD: u8 = 128;
/// Longest accepted F32R header line.
const MAX_HEADER_LEN: usize = 128;

/// Serialises a raster into F32R bytes.
pub fn encode_raster(raster: &Raster) -> Vec<u8> {
    let header = format!(
        "{RASTER_MAGIC} {} {} {}\n",
        raster.width(),
        raster.height(),
        raster.channels()
    );
    let mut out = Vec::with_capacity(header.len() + raster.len() * 4);
    out.extend_from_slice(header.as_bytes());
    for v in raster.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

fn parse_dim(field: Option<&str>, what: &str) -> Result<usize> {
    let s = field.ok_or_else(|| Error::BadHeader(format!("missing {what}")))?;
    if s.is_empty() || !s.bytes().all(|b| b.is_ascii_digit()) {
        return Err(Error::BadHeader(format!("{what} is not a decimal: {s:?}")));
    }
    s.parse()
        .map_err(|_| Error::BadHeader(format!("{what} out of range: {s}")))
}

/// Parses F32R bytes. Bytes past the declared payload are ignored with a
/// warning.
pub fn decode_raster(bytes: &[u8]) -> Result<Raster> {
    let head = &bytes[..bytes.len().min(MAX_HEADER_LEN)];
    if !head.starts_with(RASTER_MAGIC.as_bytes()) {
        let found =
            String::from_utf8_lossy(&head[..head.len().min(RASTER_MAGIC.len())]).into_owned();
        return Err(Error::BadMagic {
            expected: RASTER_MAGIC,
            found,
        });
    }
    let nl = head
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| Error::BadHeader("no newline after header".into()))?;
    let line = std::str::from_utf8(&head[..nl])
        .map_err(|_| Error::BadHeader("header is not ASCII".into()))?;
    let mut fields = line.split(' ');
    if fields.next() != Some(RASTER_MAGIC) {
        return Err(Error::BadHeader(format!(
            "expected `{RASTER_MAGIC} W H C`, found {line:?}"
        )));
    }
    let width = parse_dim(fields.next(), "width")?;
    let height = parse_dim(fields.next(), "height")?;
    let channels = parse_dim(fields.next(), "channels")?;
    if fields.next().is_some() {
        return Err(Error::BadHeader(format!("extra fields in {line:?}")));
    }
    let expected = width
        .checked_mul(height)
        .and_then(|n| n.checked_mul(channels))
        .and_then(|n| n.checked_mul(4))
        .ok_or(Error::DimensionOverflow {
            width,
            height,
            channels,
        })?;
    let payload = &bytes[nl + 1..];
    if payload.len() < expected {
        return Err(Error::Truncated {
            expected,
            found: payload.len(),
        });
    }
    if payload.len() > expected {
        log::warn!(
            "ignoring {} trailing bytes after raster payload",
            payload.len() - expected
        );
    }
    let data = payload[..expected]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    Raster::from_vec(width, height, channels, data)
}

pub fn read_raster(path: impl AsRef<Path>) -> Result<Raster> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::file(path, e))?;
    decode_raster(&bytes)
}

pub fn write_raster(raster: &Raster, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_raster(raster)).map_err(|e| Error::file(path, e))
}

/// Serialises a mask as binary PGM: safe is 0, unsafe is 255.
pub fn encode_mask(mask: &BinaryMask) -> Vec<u8> {
    let mut out = format!(
        "{MASK_MAGIC}\n{} {}\n{MASK_MAXVAL}\n",
        mask.width(),
        mask.height()
    )
    .into_bytes();
    out.extend(
        mask.labels()
            .iter()
            .map(|&l| if l == SAFE { 0u8 } else { 255 }),
    );
    out
}

/// Cursor over the whitespace-separated PGM header tokens.
struct PgmHeader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> PgmHeader<'a> {
    fn token(&mut self) -> Result<&'a str> {
        loop {
            match self.bytes.get(self.pos) {
                Some(b'#') => {
                    while self.bytes.get(self.pos).is_some_and(|&b| b != b'\n') {
                        self.pos += 1;
                    }
                }
                Some(b) if b.is_ascii_whitespace() => self.pos += 1,
                Some(_) => break,
                None => return Err(Error::BadHeader("PGM header ends early".into())),
            }
        }
        let start = self.pos;
        while self
            .bytes
            .get(self.pos)
            .is_some_and(|b| !b.is_ascii_whitespace() && *b != b'#')
        {
            self.pos += 1;
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .map_err(|_| Error::BadHeader("PGM header is not ASCII".into()))
    }

    fn number(&mut self, what: &str) -> Result<usize> {
        let t = self.token()?;
        t.parse()
            .map_err(|_| Error::BadHeader(format!("PGM {what} is not a number: {t:?}")))
    }
}

/// Parses a binary PGM with maxval 255.
pub fn decode_mask(bytes: &[u8]) -> Result<BinaryMask> {
    if !bytes.starts_with(MASK_MAGIC.as_bytes()) {
        let found = String::from_utf8_lossy(&bytes[..bytes.len().min(2)]).into_owned();
        return Err(Error::BadMagic {
            expected: MASK_MAGIC,
            found,
        });
    }
    let mut header = PgmHeader { bytes, pos: 2 };
    if !bytes.get(2).is_some_and(|b| b.is_ascii_whitespace()) {
        return Err(Error::BadHeader("no whitespace after PGM magic".into()));
    }
    let width = header.number("width")?;
    let height = header.number("height")?;
    let maxval = header.number("maxval")?;
    if maxval != MASK_MAXVAL {
        return Err(Error::BadHeader(format!(
            "PGM maxval must be {MASK_MAXVAL}, found {maxval}"
        )));
    }
    // exactly one whitespace byte separates the header from the raster
    let start = header.pos + 1;
    if !bytes
        .get(header.pos)
        .is_some_and(|b| b.is_ascii_whitespace())
    {
        return Err(Error::BadHeader("PGM header ends early".into()));
    }
    let expected = width.checked_mul(height).ok_or(Error::DimensionOverflow {
        width,
        height,
        channels: 1,
    })?;
    let payload = &bytes[start..];
    if payload.len() < expected {
        return Err(Error::Truncated {
            expected,
            found: payload.len(),
        });
    }
    if payload.len() > expected {
        log::warn!(
            "ignoring {} trailing bytes after mask payload",
            payload.len() - expected
        );
    }
    let labels = payload[..expected]
        .iter()
        .map(|&v| if v < MASK_THRESHOLD { SAFE } else { UNSAFE })
        .collect();
    BinaryMask::from_labels(width, height, labels)
}

pub fn read_mask(path: impl AsRef<Path>) -> Result<BinaryMask> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::file(path, e))?;
    decode_mask(&bytes)
}

pub fn write_mask(mask: &BinaryMask, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_mask(mask)).map_err(|e| Error::file(path, e))
}

fn check_entry_name(name: &str) -> Result<()> {
    let ok = !name.is_empty()
        && !name.starts_with('.')
        && name
            .bytes()
            .all(|b| b.is_ascii_alphanumeric() || matches!(b, b'.' | b'_' | b'-'));
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!(
            "invalid bundle entry name {name:?}"
        )))
    }
}

/// Reads every `<name>.f32r` file of a directory. Other files are ignored.
pub fn read_weight_bundle(dir: impl AsRef<Path>) -> Result<BTreeMap<String, Raster>> {
    let dir = dir.as_ref();
    let mut out = BTreeMap::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::file(dir, e))? {
        let path = entry.map_err(|e| Error::file(dir, e))?.path();
        if path.extension().and_then(|e| e.to_str()) != Some(RASTER_EXTENSION) {
            continue;
        }
        let Some(name) = path.file_stem().and_then(|s| s.to_str()) else {
            continue;
        };
        let raster =
            read_raster(&path).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
        out.insert(name.to_string(), raster);
    }
    Ok(out)
}

/// Writes each entry as `<dir>/<name>.f32r`, creating `dir` if needed.
pub fn write_weight_bundle(bundle: &BTreeMap<String, Raster>, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::file(dir, e))?;
    for (name, raster) in bundle {
        check_entry_name(name)?;
        write_raster(raster, dir.join(format!("{name}.{RASTER_EXTENSION}")))?;
    }
    Ok(())
}

pub fn read_intrinsics(path: impl AsRef<Path>) -> Result<IntrinsicsFile> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
    text.parse()
}

/// Writes text, creating parent directories.
pub fn write_text(path: impl AsRef<Path>, text: &str) -> Result<()> {
    let path = path.as_ref();
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::file(parent, e))?;
    }
    let mut f = fs::File::create(path).map_err(|e| Error::file(path, e))?;
    f.write_all(text.as_bytes())
        .map_err(|e| Error::file(path, e))
}
