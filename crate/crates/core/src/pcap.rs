//! Classic pcap container format: byte-level reader and writer.
//!
//! Handles all four magic numbers (little/big endian, microsecond and
//! nanosecond timestamps), the 24-byte global header and 16-byte per-record
//! headers. Works on byte slices; file IO belongs to the caller.

use alloc::vec::Vec;
use core::fmt;

/// Little-endian file, microsecond timestamps.
pub const MAGIC_LE_MICROS: u32 = 0xA1B2_C3D4;
/// Big-endian file, microsecond timestamps.
pub const MAGIC_BE_MICROS: u32 = 0xD4C3_B2A1;
/// Little-endian file, nanosecond timestamps.
pub const MAGIC_LE_NANOS: u32 = 0xA1B2_3C4D;
/// Big-endian file, nanosecond timestamps.
pub const MAGIC_BE_NANOS: u32 = 0x4D3C_B2A1;

pub const LINKTYPE_ETHERNET: u32 = 1;
pub const LINKTYPE_LINUX_SLL: u32 = 113;

const GLOBAL_HEADER_LEN: usize = 24;
const RECORD_HEADER_LEN: usize = 16;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PcapError {
    /// Shorter than a global header.
    TooShort,
    /// First four bytes are not a known pcap magic number.
    UnknownMagic(u32),
    /// A record header declares more bytes than remain in the buffer.
    TruncatedRecord,
}

impl fmt::Display for PcapError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PcapError::TooShort => write!(f, "capture shorter than a pcap global header"),
            PcapError::UnknownMagic(m) => write!(f, "unknown capture magic number {m:#010x}"),
            PcapError::TruncatedRecord => write!(f, "capture ends inside a record"),
        }
    }
}

impl core::error::Error for PcapError {}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PcapHeader {
    pub big_endian: bool,
    pub nanos: bool,
    pub version_major: u16,
    pub version_minor: u16,
    pub snaplen: u32,
    pub link_type: u32,
}

/// One captured frame, borrowed from the underlying buffer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RawFrame<'a> {
    /// Timestamp in microseconds since the epoch (nanosecond captures are
    /// rounded down to microsecond resolution).
    pub ts_micros: u64,
    /// Captured bytes, starting at the link layer.
    pub data: &'a [u8],
    /// Original on-the-wire length; larger than `data.len()` when the
    /// capture was truncated by a snap length.
    pub orig_len: u32,
}

#[inline]
fn read_u32(bytes: &[u8], off: usize, big_endian: bool) -> u32 {
    let b: [u8; 4] = bytes[off..off + 4].try_into().unwrap();
    if big_endian {
        u32::from_be_bytes(b)
    } else {
        u32::from_le_bytes(b)
    }
}

#[inline]
fn read_u16(bytes: &[u8], off: usize, big_endian: bool) -> u16 {
    let b: [u8; 2] = bytes[off..off + 2].try_into().unwrap();
    if big_endian {
        u16::from_be_bytes(b)
    } else {
        u16::from_le_bytes(b)
    }
}

pub fn parse_header(bytes: &[u8]) -> Result<PcapHeader, PcapError> {
    if bytes.len() < GLOBAL_HEADER_LEN {
        return Err(PcapError::TooShort);
    }
    let magic = u32::from_le_bytes(bytes[0..4].try_into().unwrap());
    let (big_endian, nanos) = match magic {
        MAGIC_LE_MICROS => (false, false),
        MAGIC_LE_NANOS => (false, true),
        MAGIC_BE_MICROS => (true, false),
        MAGIC_BE_NANOS => (true, true),
        other => return Err(PcapError::UnknownMagic(other)),
    };
    Ok(PcapHeader {
        big_endian,
        nanos,
        version_major: read_u16(bytes, 4, big_endian),
        version_minor: read_u16(bytes, 6, big_endian),
        snaplen: read_u32(bytes, 16, big_endian),
        link_type: read_u32(bytes, 20, big_endian),
    })
}

/// Streaming reader over a capture held in memory.
pub struct PcapReader<'a> {
    header: PcapHeader,
    data: &'a [u8],
    pos: usize,
    failed: bool,
}

impl<'a> PcapReader<'a> {
    pub fn new(data: &'a [u8]) -> Result<Self, PcapError> {
        let header = parse_header(data)?;
        Ok(PcapReader { header, data, pos: GLOBAL_HEADER_LEN, failed: false })
    }

    pub fn header(&self) -> &PcapHeader {
        &self.header
    }

    /// Next frame. `Ok(None)` at a clean end of file; `TruncatedRecord` if
    /// the buffer ends mid-record (prior frames have already been yielded).
    pub fn next_frame(&mut self) -> Result<Option<RawFrame<'a>>, PcapError> {
        if self.failed || self.pos == self.data.len() {
            return Ok(None);
        }
        let rest = self.data.len() - self.pos;
        if rest < RECORD_HEADER_LEN {
            self.failed = true;
            return Err(PcapError::TruncatedRecord);
        }
        let be = self.header.big_endian;
        let ts_sec = read_u32(self.data, self.pos, be) as u64;
        let ts_sub = read_u32(self.data, self.pos + 4, be) as u64;
        let incl_len = read_u32(self.data, self.pos + 8, be) as usize;
        let orig_len = read_u32(self.data, self.pos + 12, be);
        if rest - RECORD_HEADER_LEN < incl_len {
            self.failed = true;
            return Err(PcapError::TruncatedRecord);
        }
        let start = self.pos + RECORD_HEADER_LEN;
        self.pos = start + incl_len;
        let micros = if self.header.nanos { ts_sub / 1000 } else { ts_sub };
        Ok(Some(RawFrame {
            ts_micros: ts_sec * 1_000_000 + micros,
            data: &self.data[start..start + incl_len],
            orig_len,
        }))
    }
}

/// Serializes frames into a little-endian, microsecond classic pcap image.
pub struct PcapWriter {
    buf: Vec<u8>,
}

impl PcapWriter {
    pub fn new(link_type: u32) -> Self {
        let mut buf = Vec::with_capacity(4096);
        buf.extend_from_slice(&MAGIC_LE_MICROS.to_le_bytes());
        buf.extend_from_slice(&2u16.to_le_bytes()); // version 2.4
        buf.extend_from_slice(&4u16.to_le_bytes());
        buf.extend_from_slice(&0i32.to_le_bytes()); // thiszone
        buf.extend_from_slice(&0u32.to_le_bytes()); // sigfigs
        buf.extend_from_slice(&65_535u32.to_le_bytes()); // snaplen
        buf.extend_from_slice(&link_type.to_le_bytes());
        PcapWriter { buf }
    }

    pub fn push_frame(&mut self, ts_micros: u64, frame: &[u8]) {
        let sec = (ts_micros / 1_000_000) as u32;
        let usec = (ts_micros % 1_000_000) as u32;
        let len = frame.len() as u32;
        self.buf.extend_from_slice(&sec.to_le_bytes());
        self.buf.extend_from_slice(&usec.to_le_bytes());
        self.buf.extend_from_slice(&len.to_le_bytes());
        self.buf.extend_from_slice(&len.to_le_bytes());
        self.buf.extend_from_slice(frame);
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.buf
    }
}
