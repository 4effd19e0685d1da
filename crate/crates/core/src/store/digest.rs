use std::fmt;
use std::str::FromStr;

use md5::{Digest, Md5};

use super::StoreError;

/// 128-bit MD5 fingerprint of a series file, rendered as 32 lowercase hex chars.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Md5Digest(pub [u8; 16]);

impl Md5Digest {
    pub fn of(bytes: &[u8]) -> Self {
        Md5Digest(Md5::digest(bytes).into())
    }

    pub fn to_hex(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for Md5Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in self.0 {
            write!(f, "{b:02x}")?;
        }
        Ok(())
    }
}

impl FromStr for Md5Digest {
    type Err = StoreError;

    /// Accepts exactly 32 lowercase hex characters.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let malformed = || StoreError::MalformedDigest(s.to_owned());
        if s.len() != 32 || !s.bytes().all(|b| matches!(b, b'0'..=b'9' | b'a'..=b'f')) {
            return Err(malformed());
        }
        let mut out = [0u8; 16];
        for (i, byte) in out.iter_mut().enumerate() {
            *byte = u8::from_str_radix(&s[2 * i..2 * i + 2], 16).map_err(|_| malformed())?;
        }
        Ok(Md5Digest(out))
    }
}

/// Incremental MD5 used while streaming a file to disk.
#[derive(Default)]
pub(crate) struct Md5Writer(Md5);

impl Md5Writer {
    pub fn update(&mut self, bytes: &[u8]) {
        self.0.update(bytes);
    }

    pub fn finish(self) -> Md5Digest {
        Md5Digest(self.0.finalize().into())
    }
}
