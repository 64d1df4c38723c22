//! Little-endian binary IO helpers shared by the index and signature file
//! formats.
//!
//! Truncated input surfaces as [`FileError::CorruptFile`] rather than a
//! raw IO error so callers can distinguish damaged files from filesystem
//! failures.

use std::io::{self, Read, Write};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum FileError {
    // Display omits the source; callers that report errors walk the chain.
    #[error("io error")]
    Io(#[from] io::Error),
    #[error("corrupt file: {0}")]
    CorruptFile(String),
    #[error("unsupported file version {found} (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },
}

pub(crate) fn corrupt(context: impl Into<String>) -> FileError {
    FileError::CorruptFile(context.into())
}

fn read_exact(r: &mut impl Read, buf: &mut [u8], what: &str) -> Result<(), FileError> {
    r.read_exact(buf).map_err(|e| {
        if e.kind() == io::ErrorKind::UnexpectedEof {
            corrupt(format!("unexpected end of file reading {what}"))
        } else {
            FileError::Io(e)
        }
    })
}

pub(crate) fn write_u32(w: &mut impl Write, v: u32) -> Result<(), FileError> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

pub(crate) fn write_u64(w: &mut impl Write, v: u64) -> Result<(), FileError> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

pub(crate) fn write_f64(w: &mut impl Write, v: f64) -> Result<(), FileError> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

pub(crate) fn read_u32(r: &mut impl Read, what: &str) -> Result<u32, FileError> {
    let mut buf = [0u8; 4];
    read_exact(r, &mut buf, what)?;
    Ok(u32::from_le_bytes(buf))
}

pub(crate) fn read_u64(r: &mut impl Read, what: &str) -> Result<u64, FileError> {
    let mut buf = [0u8; 8];
    read_exact(r, &mut buf, what)?;
    Ok(u64::from_le_bytes(buf))
}

pub(crate) fn read_f64(r: &mut impl Read, what: &str) -> Result<f64, FileError> {
    let mut buf = [0u8; 8];
    read_exact(r, &mut buf, what)?;
    Ok(f64::from_le_bytes(buf))
}

/// Verifies a four-byte magic tag and a version field.
pub(crate) fn read_header(
    r: &mut impl Read,
    magic: &[u8; 4],
    version: u32,
) -> Result<(), FileError> {
    let mut found = [0u8; 4];
    read_exact(r, &mut found, "magic")?;
    if &found != magic {
        return Err(corrupt(format!(
            "bad magic {:?} (expected {:?})",
            String::from_utf8_lossy(&found),
            String::from_utf8_lossy(magic)
        )));
    }
    let found_version = read_u32(r, "version")?;
    if found_version != version {
        return Err(FileError::VersionMismatch {
            found: found_version,
            expected: version,
        });
    }
    Ok(())
}

pub(crate) fn write_header(
    w: &mut impl Write,
    magic: &[u8; 4],
    version: u32,
) -> Result<(), FileError> {
    w.write_all(magic)?;
    write_u32(w, version)
}

/// LEB128 unsigned varint.
pub(crate) fn write_varint(w: &mut impl Write, mut v: u64) -> Result<(), FileError> {
    loop {
        let byte = (v & 0x7f) as u8;
        v >>= 7;
        if v == 0 {
            w.write_all(&[byte])?;
            return Ok(());
        }
        w.write_all(&[byte | 0x80])?;
    }
}

pub(crate) fn read_varint(r: &mut impl Read, what: &str) -> Result<u64, FileError> {
    let mut value = 0u64;
    let mut shift = 0u32;
    loop {
        let mut byte = [0u8; 1];
        read_exact(r, &mut byte, what)?;
        let low = (byte[0] & 0x7f) as u64;
        if shift >= 64 || (shift == 63 && low > 1) {
            return Err(corrupt(format!("varint overflow reading {what}")));
        }
        value |= low << shift;
        if byte[0] & 0x80 == 0 {
            return Ok(value);
        }
        shift += 7;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    #[test]
    fn scalar_round_trips() {
        let mut buf = Vec::new();
        write_u32(&mut buf, 0xDEAD_BEEF).unwrap();
        write_u64(&mut buf, u64::MAX - 1).unwrap();
        write_f64(&mut buf, -0.125).unwrap();
        let mut r = Cursor::new(buf);
        assert_eq!(read_u32(&mut r, "a").unwrap(), 0xDEAD_BEEF);
        assert_eq!(read_u64(&mut r, "b").unwrap(), u64::MAX - 1);
        assert_eq!(read_f64(&mut r, "c").unwrap(), -0.125);
    }

    #[test]
    fn varint_round_trips() {
        let cases = [0u64, 1, 127, 128, 300, 16_383, 16_384, u64::MAX];
        let mut buf = Vec::new();
        for &v in &cases {
            write_varint(&mut buf, v).unwrap();
        }
        let mut r = Cursor::new(buf);
        for &v in &cases {
            assert_eq!(read_varint(&mut r, "v").unwrap(), v);
        }
    }

    #[test]
    fn truncation_reports_corrupt_file() {
        let mut buf = Vec::new();
        write_u64(&mut buf, 99).unwrap();
        buf.truncate(5);
        let mut r = Cursor::new(buf);
        assert!(matches!(
            read_u64(&mut r, "field"),
            Err(FileError::CorruptFile(_))
        ));
    }

    #[test]
    fn bad_magic_and_version_are_distinguished() {
        let mut buf = Vec::new();
        write_header(&mut buf, b"GOOD", 1).unwrap();
        let mut r = Cursor::new(buf.clone());
        assert!(read_header(&mut r, b"GOOD", 1).is_ok());

        let mut r = Cursor::new(buf.clone());
        assert!(matches!(
            read_header(&mut r, b"ELSE", 1),
            Err(FileError::CorruptFile(_))
        ));

        let mut r = Cursor::new(buf);
        assert!(matches!(
            read_header(&mut r, b"GOOD", 2),
            Err(FileError::VersionMismatch {
                found: 1,
                expected: 2
            })
        ));
    }

    #[test]
    fn varint_overflow_is_corrupt() {
        let buf = vec![0xffu8; 11];
        let mut r = Cursor::new(buf);
        assert!(matches!(
            read_varint(&mut r, "v"),
            Err(FileError::CorruptFile(_))
        ));
    }
}
