use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub(crate) fn encode_f64s<'a>(values: impl IntoIterator<Item = &'a f64>, out: &mut Vec<u8>) {
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

pub(crate) fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// `magic\n<len>\n<header>\n<payload>`
pub(crate) fn assemble(magic: &str, header: &str, payload: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(magic.len() + header.len() + payload.len() + 32);
    out.extend_from_slice(magic.as_bytes());
    out.push(b'\n');
    out.extend_from_slice(header.len().to_string().as_bytes());
    out.push(b'\n');
    out.extend_from_slice(header.as_bytes());
    out.push(b'\n');
    out.extend_from_slice(payload);
    out
}

fn take_line<'a>(bytes: &'a [u8], what: &str) -> Result<(&'a [u8], &'a [u8])> {
    let end = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| Error::Format(format!("missing {what} line")))?;
    Ok((&bytes[..end], &bytes[end + 1..]))
}

/// Splits a container into its header text and payload.
pub(crate) fn disassemble<'a>(magic: &str, bytes: &'a [u8]) -> Result<(&'a str, &'a [u8])> {
    let (first, rest) = take_line(bytes, "magic")?;
    if first != magic.as_bytes() {
        return Err(Error::Format(format!(
            "expected `{magic}`, found `{}`",
            String::from_utf8_lossy(&first[..first.len().min(64)])
        )));
    }
    let (len, rest) = take_line(rest, "header length")?;
    let len: usize = std::str::from_utf8(len)
        .ok()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::Format("bad header length".into()))?;
    if rest.len() < len + 1 || rest[len] != b'\n' {
        return Err(Error::Format("truncated header".into()));
    }
    let header = std::str::from_utf8(&rest[..len]).map_err(|e| Error::Format(e.to_string()))?;
    Ok((header, &rest[len + 1..]))
}

/// Reads `count` little-endian doubles from the front of `bytes`.
pub(crate) struct F64Reader<'a> {
    bytes: &'a [u8],
}

impl<'a> F64Reader<'a> {
    pub fn new(bytes: &'a [u8]) -> Self {
        Self { bytes }
    }

    pub fn take(&mut self, count: usize) -> Result<Vec<f64>> {
        let need = count * 8;
        if self.bytes.len() < need {
            return Err(Error::Format(format!(
                "payload ends early: need {need} more bytes, have {}",
                self.bytes.len()
            )));
        }
        let (head, tail) = self.bytes.split_at(need);
        self.bytes = tail;
        Ok(head
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect())
    }

    pub fn finish(self) -> Result<()> {
        if self.bytes.is_empty() {
            Ok(())
        } else {
            Err(Error::Format(format!("{} trailing payload bytes", self.bytes.len())))
        }
    }
}

pub(crate) fn verify_checksum(expected: &str, payload: &[u8]) -> Result<()> {
    let actual = sha256_hex(payload);
    if actual != expected {
        return Err(Error::Checksum {
            expected: expected.to_string(),
            actual,
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn assemble_and_split() {
        let mut payload = Vec::new();
        encode_f64s(&[1.5, -0.0, f64::MIN_POSITIVE], &mut payload);
        let bytes = assemble("magic v1", "{\"a\": 1}", &payload);
        let (header, body) = disassemble("magic v1", &bytes).unwrap();
        assert_eq!(header, "{\"a\": 1}");
        let mut r = F64Reader::new(body);
        let v = r.take(3).unwrap();
        assert_eq!(v[0], 1.5);
        assert!(v[1] == 0.0 && v[1].is_sign_negative());
        assert_eq!(v[2], f64::MIN_POSITIVE);
        r.finish().unwrap();
    }

    #[test]
    fn rejects_damage() {
        let bytes = assemble("magic v1", "{}", &[0u8; 8]);
        assert!(disassemble("other v1", &bytes).is_err());
        assert!(disassemble("magic v1", &bytes[..12]).is_err());
        let (_, body) = disassemble("magic v1", &bytes).unwrap();
        assert!(F64Reader::new(body).take(2).is_err());
        assert!(verify_checksum("00", body).is_err());
    }
}
