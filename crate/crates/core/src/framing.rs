//! Shared container layout: magic, `u32` LE header length, JSON header,
//! little-endian `f32` payload.

use crate::error::{Error, Result};

pub(crate) const PREFIX_LEN: usize = 4;

pub(crate) fn write_header(magic: &[u8], json: &[u8], payload_len: usize) -> Result<Vec<u8>> {
    let len = u32::try_from(json.len()).map_err(|_| Error::Usage("header exceeds 4 GiB".into()))?;
    let mut out = Vec::with_capacity(magic.len() + PREFIX_LEN + json.len() + payload_len);
    out.extend_from_slice(magic);
    out.extend_from_slice(&len.to_le_bytes());
    out.extend_from_slice(json);
    Ok(out)
}

/// Returns the header JSON and the offset at which the payload starts.
pub(crate) fn read_header<'a>(bytes: &'a [u8], magic: &[u8]) -> Result<(&'a [u8], usize)> {
    if bytes.len() < magic.len() || &bytes[..magic.len()] != magic {
        return Err(Error::format(0, format!("missing {} magic", String::from_utf8_lossy(magic))));
    }
    let at = magic.len();
    let len_bytes: [u8; PREFIX_LEN] = bytes
        .get(at..at + PREFIX_LEN)
        .and_then(|s| s.try_into().ok())
        .ok_or_else(|| Error::format(at as u64, "truncated header length"))?;
    let at = at + PREFIX_LEN;
    let header_len = u32::from_le_bytes(len_bytes) as usize;
    let json = bytes
        .get(at..at + header_len)
        .ok_or_else(|| Error::format(at as u64, format!("header of {header_len} bytes is truncated")))?;
    Ok((json, at + header_len))
}

pub(crate) fn parse_header<T: serde::de::DeserializeOwned>(json: &[u8], offset: usize) -> Result<T> {
    serde_json::from_slice(json).map_err(|e| Error::format(offset as u64, format!("invalid header JSON: {e}")))
}

pub(crate) fn push_f32s(out: &mut Vec<u8>, data: &[f32]) {
    for v in data {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

/// Reads `count` floats at `at`, naming `what` if the buffer is short.
pub(crate) fn read_f32s(bytes: &[u8], at: usize, count: usize, what: &str) -> Result<Vec<f32>> {
    let buf = bytes
        .get(at..at + 4 * count)
        .ok_or_else(|| Error::format(at as u64, format!("buffer of {what} ({} bytes) is truncated", 4 * count)))?;
    Ok(buf.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().expect("chunk of 4"))).collect())
}

pub(crate) fn expect_end(bytes: &[u8], at: usize) -> Result<()> {
    if at != bytes.len() {
        return Err(Error::format(at as u64, format!("{} trailing bytes", bytes.len() - at)));
    }
    Ok(())
}
