//! Capture ingest: decode captured frames down to the transport payload.
//!
//! The raw representations must not see link-, network- or transport-layer
//! header bytes, so the decoder strips Ethernet/SLL framing (including VLAN
//! tags), walks IPv4/IPv6 headers and returns only the bytes after the
//! transport header. Addresses and ports are kept as metadata for flow
//! keying and the expert-feature baseline; MAC addresses are discarded
//! outright.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use crate::pcap::{PcapError, PcapReader, LINKTYPE_ETHERNET, LINKTYPE_LINUX_SLL};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Transport {
    Tcp,
    Udp,
    Other,
}

impl fmt::Display for Transport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Transport::Tcp => write!(f, "tcp"),
            Transport::Udp => write!(f, "udp"),
            Transport::Other => write!(f, "other"),
        }
    }
}

/// Network-layer address. Opaque to every consumer except flow keying and
/// the coarse reuse statistics of the expert features.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Addr {
    V4([u8; 4]),
    V6([u8; 16]),
}

impl fmt::Display for Addr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Addr::V4(b) => write!(f, "{}.{}.{}.{}", b[0], b[1], b[2], b[3]),
            Addr::V6(b) => {
                for (i, pair) in b.chunks_exact(2).enumerate() {
                    if i > 0 {
                        write!(f, ":")?;
                    }
                    write!(f, "{:x}", u16::from_be_bytes([pair[0], pair[1]]))?;
                }
                Ok(())
            }
        }
    }
}

/// Class label assigned from the capture's provenance.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Label {
    Normal,
    Malware(String),
}

impl Label {
    /// Canonical class name: `normal` or the malware class name.
    pub fn class_name(&self) -> &str {
        match self {
            Label::Normal => "normal",
            Label::Malware(name) => name,
        }
    }

    /// Parse a manifest label; `normal` (case-insensitive) is the benign
    /// class, anything else names a malware class.
    pub fn parse(s: &str) -> Label {
        if s.eq_ignore_ascii_case("normal") {
            Label::Normal
        } else {
            Label::Malware(s.to_string())
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.class_name())
    }
}

/// One captured packet: metadata plus the extracted transport payload.
///
/// `payload` never contains link-, network- or transport-layer header
/// bytes. Ports are zero when the transport is `Other`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PacketRecord {
    /// Microseconds since the epoch.
    pub ts_micros: u64,
    pub src_addr: Addr,
    pub dst_addr: Addr,
    pub src_port: u16,
    pub dst_port: u16,
    pub transport: Transport,
    /// TCP flag byte (CWR..FIN); zero for non-TCP packets. Metadata for the
    /// expert-feature extractor only, never part of any raw representation.
    pub tcp_flags: u8,
    /// Original on-the-wire frame length.
    pub wire_len: u32,
    pub payload: Vec<u8>,
    pub label: Label,
}

/// Fields extracted from one frame, borrowed from the frame buffer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExtractedPacket<'a> {
    pub src_addr: Addr,
    pub dst_addr: Addr,
    pub src_port: u16,
    pub dst_port: u16,
    pub transport: Transport,
    pub tcp_flags: u8,
    pub payload: &'a [u8],
}

/// Why a frame was skipped rather than yielded.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FrameError {
    /// Frame shorter than its declared headers.
    Malformed,
    /// Link type this decoder does not understand.
    UnsupportedLinkType(u32),
    /// Network protocol (ethertype) this decoder does not understand.
    UnsupportedNetwork(u16),
}

impl fmt::Display for FrameError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FrameError::Malformed => write!(f, "frame shorter than declared headers"),
            FrameError::UnsupportedLinkType(lt) => write!(f, "unsupported link type {lt}"),
            FrameError::UnsupportedNetwork(et) => {
                write!(f, "unsupported network protocol {et:#06x}")
            }
        }
    }
}

impl core::error::Error for FrameError {}

const ETHERTYPE_IPV4: u16 = 0x0800;
const ETHERTYPE_IPV6: u16 = 0x86DD;
const ETHERTYPE_VLAN: u16 = 0x8100;
const ETHERTYPE_QINQ: u16 = 0x88A8;

const IPPROTO_TCP: u8 = 6;
const IPPROTO_UDP: u8 = 17;

fn be16(bytes: &[u8], off: usize) -> u16 {
    u16::from_be_bytes([bytes[off], bytes[off + 1]])
}

/// Decode one captured frame down to its transport payload.
///
/// Returns the addresses, ports, transport and the payload slice; MAC
/// addresses are consumed here and never surface. For transports other
/// than TCP/UDP the payload is everything after the network-layer header
/// and the ports are zero.
pub fn extract_payload(frame: &[u8], link_type: u32) -> Result<ExtractedPacket<'_>, FrameError> {
    let (ethertype, network) = match link_type {
        LINKTYPE_ETHERNET => strip_ethernet(frame)?,
        LINKTYPE_LINUX_SLL => strip_sll(frame)?,
        other => return Err(FrameError::UnsupportedLinkType(other)),
    };
    match ethertype {
        ETHERTYPE_IPV4 => decode_ipv4(network),
        ETHERTYPE_IPV6 => decode_ipv6(network),
        other => Err(FrameError::UnsupportedNetwork(other)),
    }
}

/// Ethernet II framing; single and double VLAN tags are unwrapped.
fn strip_ethernet(frame: &[u8]) -> Result<(u16, &[u8]), FrameError> {
    if frame.len() < 14 {
        return Err(FrameError::Malformed);
    }
    let mut ethertype = be16(frame, 12);
    let mut off = 14;
    for _ in 0..2 {
        if ethertype == ETHERTYPE_VLAN || ethertype == ETHERTYPE_QINQ {
            if frame.len() < off + 4 {
                return Err(FrameError::Malformed);
            }
            ethertype = be16(frame, off + 2);
            off += 4;
        }
    }
    Ok((ethertype, &frame[off..]))
}

/// Linux cooked capture (SLL v1): 16-byte header, protocol in the last two.
fn strip_sll(frame: &[u8]) -> Result<(u16, &[u8]), FrameError> {
    if frame.len() < 16 {
        return Err(FrameError::Malformed);
    }
    Ok((be16(frame, 14), &frame[16..]))
}

fn decode_ipv4(network: &[u8]) -> Result<ExtractedPacket<'_>, FrameError> {
    if network.len() < 20 || network[0] >> 4 != 4 {
        return Err(FrameError::Malformed);
    }
    let ihl = usize::from(network[0] & 0x0F) * 4;
    if ihl < 20 || network.len() < ihl {
        return Err(FrameError::Malformed);
    }
    // Ethernet pads short frames; the IP total length bounds the real bytes.
    let total_len = usize::from(be16(network, 2));
    if total_len < ihl {
        return Err(FrameError::Malformed);
    }
    let end = total_len.min(network.len());
    let src_addr = Addr::V4(network[12..16].try_into().unwrap());
    let dst_addr = Addr::V4(network[16..20].try_into().unwrap());
    let protocol = network[9];
    let frag_offset = be16(network, 6) & 0x1FFF;
    let body = &network[ihl..end];
    if frag_offset > 0 {
        // Non-first fragment: no transport header present.
        return Ok(other_transport(src_addr, dst_addr, body));
    }
    decode_transport(protocol, src_addr, dst_addr, body)
}

fn decode_ipv6(network: &[u8]) -> Result<ExtractedPacket<'_>, FrameError> {
    if network.len() < 40 || network[0] >> 4 != 6 {
        return Err(FrameError::Malformed);
    }
    let payload_len = usize::from(be16(network, 4));
    let end = (40 + payload_len).min(network.len());
    let src_addr = Addr::V6(network[8..24].try_into().unwrap());
    let dst_addr = Addr::V6(network[24..40].try_into().unwrap());
    let mut next_header = network[6];
    let mut off = 40;
    // Walk extension headers until a transport header or an unknown type.
    loop {
        match next_header {
            IPPROTO_TCP | IPPROTO_UDP => {
                return decode_transport(next_header, src_addr, dst_addr, &network[off..end]);
            }
            // hop-by-hop, routing, destination options, mobility
            0 | 43 | 60 | 135 => {
                if end < off + 8 {
                    return Err(FrameError::Malformed);
                }
                let ext_len = 8 + usize::from(network[off + 1]) * 8;
                if end < off + ext_len {
                    return Err(FrameError::Malformed);
                }
                next_header = network[off];
                off += ext_len;
            }
            // authentication header: length unit is 4 bytes
            51 => {
                if end < off + 8 {
                    return Err(FrameError::Malformed);
                }
                let ext_len = (usize::from(network[off + 1]) + 2) * 4;
                if end < off + ext_len {
                    return Err(FrameError::Malformed);
                }
                next_header = network[off];
                off += ext_len;
            }
            // fragment header
            44 => {
                if end < off + 8 {
                    return Err(FrameError::Malformed);
                }
                let frag_offset = be16(network, off + 2) >> 3;
                next_header = network[off];
                off += 8;
                if frag_offset > 0 {
                    return Ok(other_transport(src_addr, dst_addr, &network[off..end]));
                }
            }
            // no next header, or anything we do not understand
            _ => return Ok(other_transport(src_addr, dst_addr, &network[off..end])),
        }
    }
}

fn decode_transport<'a>(
    protocol: u8,
    src_addr: Addr,
    dst_addr: Addr,
    body: &'a [u8],
) -> Result<ExtractedPacket<'a>, FrameError> {
    match protocol {
        IPPROTO_TCP => {
            if body.len() < 20 {
                return Err(FrameError::Malformed);
            }
            let data_offset = usize::from(body[12] >> 4) * 4;
            if data_offset < 20 || body.len() < data_offset {
                return Err(FrameError::Malformed);
            }
            Ok(ExtractedPacket {
                src_addr,
                dst_addr,
                src_port: be16(body, 0),
                dst_port: be16(body, 2),
                transport: Transport::Tcp,
                tcp_flags: body[13],
                payload: &body[data_offset..],
            })
        }
        IPPROTO_UDP => {
            if body.len() < 8 {
                return Err(FrameError::Malformed);
            }
            let udp_len = usize::from(be16(body, 4));
            if udp_len < 8 {
                return Err(FrameError::Malformed);
            }
            let end = udp_len.min(body.len());
            Ok(ExtractedPacket {
                src_addr,
                dst_addr,
                src_port: be16(body, 0),
                dst_port: be16(body, 2),
                transport: Transport::Udp,
                tcp_flags: 0,
                payload: &body[8..end],
            })
        }
        _ => Ok(other_transport(src_addr, dst_addr, body)),
    }
}

fn other_transport<'a>(src_addr: Addr, dst_addr: Addr, body: &'a [u8]) -> ExtractedPacket<'a> {
    ExtractedPacket {
        src_addr,
        dst_addr,
        src_port: 0,
        dst_port: 0,
        transport: Transport::Other,
        tcp_flags: 0,
        payload: body,
    }
}

/// Skip counters and flags accumulated while parsing one capture.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct IngestStats {
    /// Records yielded as `PacketRecord`s.
    pub packets: usize,
    /// Frames skipped for an unsupported link type.
    pub skipped_link: usize,
    /// Frames skipped for an unsupported network protocol.
    pub skipped_network: usize,
    /// Frames skipped as shorter than their declared headers.
    pub skipped_malformed: usize,
    /// The capture ended inside a record; prior packets were kept.
    pub truncated_tail: bool,
}

impl IngestStats {
    pub fn skipped_total(&self) -> usize {
        self.skipped_link + self.skipped_network + self.skipped_malformed
    }
}

/// Parse a whole capture image into labeled packet records.
///
/// Unrecognized frames are skipped and counted; a truncated final record
/// sets a flag and ends the stream cleanly. `cap` limits the number of
/// yielded packets when set.
pub fn parse_capture_bytes(
    bytes: &[u8],
    label: &Label,
    cap: Option<usize>,
) -> Result<(Vec<PacketRecord>, IngestStats), PcapError> {
    let mut reader = PcapReader::new(bytes)?;
    let link_type = reader.header().link_type;
    let mut records = Vec::new();
    let mut stats = IngestStats::default();
    loop {
        if let Some(limit) = cap {
            if records.len() >= limit {
                break;
            }
        }
        let frame = match reader.next_frame() {
            Ok(Some(frame)) => frame,
            Ok(None) => break,
            Err(PcapError::TruncatedRecord) => {
                stats.truncated_tail = true;
                break;
            }
            Err(fatal) => return Err(fatal),
        };
        match extract_payload(frame.data, link_type) {
            Ok(extracted) => {
                records.push(PacketRecord {
                    ts_micros: frame.ts_micros,
                    src_addr: extracted.src_addr,
                    dst_addr: extracted.dst_addr,
                    src_port: extracted.src_port,
                    dst_port: extracted.dst_port,
                    transport: extracted.transport,
                    tcp_flags: extracted.tcp_flags,
                    wire_len: frame.orig_len,
                    payload: extracted.payload.to_vec(),
                    label: label.clone(),
                });
                stats.packets += 1;
            }
            Err(FrameError::UnsupportedLinkType(_)) => stats.skipped_link += 1,
            Err(FrameError::UnsupportedNetwork(_)) => stats.skipped_network += 1,
            Err(FrameError::Malformed) => stats.skipped_malformed += 1,
        }
    }
    Ok((records, stats))
}

/// A labeled list of capture files plus an optional per-file packet cap.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CaptureManifest {
    pub entries: Vec<ManifestEntry>,
    pub packet_cap: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub path: String,
    pub label: Label,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ManifestError {
    /// A line is not `<path>\t<label>`.
    BadLine(usize),
    /// The same path appears twice.
    DuplicatePath(String),
    Empty,
}

impl fmt::Display for ManifestError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ManifestError::BadLine(n) => write!(f, "manifest line {n}: expected <path>\\t<label>"),
            ManifestError::DuplicatePath(p) => write!(f, "manifest lists {p} twice"),
            ManifestError::Empty => write!(f, "manifest has no entries"),
        }
    }
}

impl core::error::Error for ManifestError {}

impl CaptureManifest {
    /// Parse the plain-text table: one `<path>\t<label>` line per capture.
    /// Blank lines and lines starting with `#` are ignored.
    pub fn parse(text: &str) -> Result<CaptureManifest, ManifestError> {
        let mut entries = Vec::new();
        for (idx, line) in text.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (path, label) = line.split_once('\t').ok_or(ManifestError::BadLine(idx + 1))?;
            if path.is_empty() || label.is_empty() {
                return Err(ManifestError::BadLine(idx + 1));
            }
            if entries.iter().any(|e: &ManifestEntry| e.path == path) {
                return Err(ManifestError::DuplicatePath(path.to_string()));
            }
            entries.push(ManifestEntry { path: path.to_string(), label: Label::parse(label) });
        }
        if entries.is_empty() {
            return Err(ManifestError::Empty);
        }
        Ok(CaptureManifest { entries, packet_cap: None })
    }

    /// Render back to the manifest text format.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            out.push_str(&e.path);
            out.push('\t');
            out.push_str(e.label.class_name());
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    /// Minimal Ethernet+IPv4+TCP frame with the given payload.
    fn eth_ipv4_tcp(payload: &[u8], tcp_header_len: usize) -> Vec<u8> {
        assert!(tcp_header_len >= 20);
        let mut f = Vec::new();
        f.extend_from_slice(&[0x02, 0, 0, 0, 0, 1]); // dst MAC
        f.extend_from_slice(&[0x02, 0, 0, 0, 0, 2]); // src MAC
        f.extend_from_slice(&ETHERTYPE_IPV4.to_be_bytes());
        let total_len = 20 + tcp_header_len + payload.len();
        f.push(0x45); // version 4, IHL 5
        f.push(0);
        f.extend_from_slice(&(total_len as u16).to_be_bytes());
        f.extend_from_slice(&[0, 0, 0x40, 0]); // id, flags DF, frag 0
        f.push(64); // TTL
        f.push(IPPROTO_TCP);
        f.extend_from_slice(&[0, 0]); // checksum (unverified)
        f.extend_from_slice(&[10, 0, 0, 1]);
        f.extend_from_slice(&[10, 0, 0, 2]);
        f.extend_from_slice(&1234u16.to_be_bytes());
        f.extend_from_slice(&80u16.to_be_bytes());
        f.extend_from_slice(&[0, 0, 0, 1]); // seq
        f.extend_from_slice(&[0, 0, 0, 0]); // ack
        f.push(((tcp_header_len / 4) as u8) << 4);
        f.push(0x18); // PSH|ACK
        f.extend_from_slice(&[0xFF, 0xFF, 0, 0, 0, 0]); // window, cksum, urg
        f.extend_from_slice(&vec![0u8; tcp_header_len - 20]); // options
        f.extend_from_slice(payload);
        f
    }

    #[test]
    fn minimal_tcp_frame_yields_payload_after_headers() {
        let frame = eth_ipv4_tcp(&[0xDE, 0xAD, 0xBE, 0xEF], 20);
        let p = extract_payload(&frame, LINKTYPE_ETHERNET).unwrap();
        assert_eq!(p.payload, &[0xDE, 0xAD, 0xBE, 0xEF]);
        assert_eq!(p.transport, Transport::Tcp);
        assert_eq!(p.src_port, 1234);
        assert_eq!(p.dst_port, 80);
        assert_eq!(p.src_addr, Addr::V4([10, 0, 0, 1]));
        assert_eq!(p.tcp_flags, 0x18);
    }

    #[test]
    fn tcp_options_shift_payload_start() {
        // Data offset 8 means 12 option bytes: payload starts 32 bytes into
        // the IP payload. Verified against the hand count 20 + 12 = 32.
        let frame = eth_ipv4_tcp(&[7, 7, 7], 32);
        let ip_payload_start = 14 + 20;
        assert_eq!(frame[ip_payload_start + 12] >> 4, 8);
        let p = extract_payload(&frame, LINKTYPE_ETHERNET).unwrap();
        assert_eq!(p.payload, &frame[ip_payload_start + 32..]);
        assert_eq!(p.payload, &[7, 7, 7]);
    }

    #[test]
    fn headers_then_payload_reconstruct_network_bytes() {
        let frame = eth_ipv4_tcp(&[1, 2, 3, 4, 5], 20);
        let p = extract_payload(&frame, LINKTYPE_ETHERNET).unwrap();
        let network = &frame[14..];
        let headers = &network[..network.len() - p.payload.len()];
        let mut rebuilt = headers.to_vec();
        rebuilt.extend_from_slice(p.payload);
        assert_eq!(rebuilt, network);
    }

    #[test]
    fn udp_length_eight_yields_empty_payload() {
        let mut f = Vec::new();
        f.extend_from_slice(&[0; 12]);
        f.extend_from_slice(&ETHERTYPE_IPV4.to_be_bytes());
        f.push(0x45);
        f.push(0);
        f.extend_from_slice(&28u16.to_be_bytes()); // 20 IP + 8 UDP
        f.extend_from_slice(&[0, 0, 0, 0]);
        f.push(64);
        f.push(IPPROTO_UDP);
        f.extend_from_slice(&[0, 0]);
        f.extend_from_slice(&[192, 168, 0, 1]);
        f.extend_from_slice(&[192, 168, 0, 2]);
        f.extend_from_slice(&53u16.to_be_bytes());
        f.extend_from_slice(&5353u16.to_be_bytes());
        f.extend_from_slice(&8u16.to_be_bytes()); // UDP length 8
        f.extend_from_slice(&[0, 0]);
        let p = extract_payload(&f, LINKTYPE_ETHERNET).unwrap();
        assert_eq!(p.transport, Transport::Udp);
        assert!(p.payload.is_empty());
        assert_eq!(p.src_port, 53);
    }

    #[test]
    fn ethernet_padding_is_not_payload() {
        // 2-byte payload plus 10 bytes of link padding beyond total_len.
        let mut frame = eth_ipv4_tcp(&[0xAB, 0xCD], 20);
        frame.extend_from_slice(&[0u8; 10]);
        let p = extract_payload(&frame, LINKTYPE_ETHERNET).unwrap();
        assert_eq!(p.payload, &[0xAB, 0xCD]);
    }

    #[test]
    fn vlan_tags_unwrap() {
        let inner = eth_ipv4_tcp(&[9], 20);
        // Splice one VLAN tag between the MACs and the ethertype.
        let mut single = inner[..12].to_vec();
        single.extend_from_slice(&ETHERTYPE_VLAN.to_be_bytes());
        single.extend_from_slice(&[0x00, 0x64]); // VID 100
        single.extend_from_slice(&inner[12..]);
        let p = extract_payload(&single, LINKTYPE_ETHERNET).unwrap();
        assert_eq!(p.payload, &[9]);

        // Double tag (QinQ outer).
        let mut double = inner[..12].to_vec();
        double.extend_from_slice(&ETHERTYPE_QINQ.to_be_bytes());
        double.extend_from_slice(&[0x00, 0x01]);
        double.extend_from_slice(&ETHERTYPE_VLAN.to_be_bytes());
        double.extend_from_slice(&[0x00, 0x64]);
        double.extend_from_slice(&inner[12..]);
        let p = extract_payload(&double, LINKTYPE_ETHERNET).unwrap();
        assert_eq!(p.payload, &[9]);
    }

    #[test]
    fn sll_frames_decode() {
        let eth = eth_ipv4_tcp(&[5, 6], 20);
        let mut sll = Vec::new();
        sll.extend_from_slice(&0u16.to_be_bytes()); // packet type: to us
        sll.extend_from_slice(&1u16.to_be_bytes()); // ARPHRD_ETHER
        sll.extend_from_slice(&6u16.to_be_bytes()); // address length
        sll.extend_from_slice(&[0; 8]); // address
        sll.extend_from_slice(&ETHERTYPE_IPV4.to_be_bytes());
        sll.extend_from_slice(&eth[14..]);
        let p = extract_payload(&sll, LINKTYPE_LINUX_SLL).unwrap();
        assert_eq!(p.payload, &[5, 6]);
    }

    #[test]
    fn ipv6_with_extension_headers() {
        let payload = [0x11u8, 0x22];
        let mut f = Vec::new();
        f.extend_from_slice(&[0; 12]);
        f.extend_from_slice(&ETHERTYPE_IPV6.to_be_bytes());
        let inner = {
            let mut tcp = Vec::new();
            tcp.extend_from_slice(&443u16.to_be_bytes());
            tcp.extend_from_slice(&9000u16.to_be_bytes());
            tcp.extend_from_slice(&[0; 8]);
            tcp.push(5 << 4);
            tcp.push(0x10);
            tcp.extend_from_slice(&[0; 6]);
            tcp.extend_from_slice(&payload);
            tcp
        };
        // hop-by-hop extension (8 bytes) before TCP
        let ext_len = 8;
        f.push(0x60); // version 6
        f.extend_from_slice(&[0, 0, 0]);
        f.extend_from_slice(&((ext_len + inner.len()) as u16).to_be_bytes());
        f.push(0); // next header: hop-by-hop
        f.push(64);
        f.extend_from_slice(&[1u8; 16]);
        f.extend_from_slice(&[2u8; 16]);
        f.push(IPPROTO_TCP); // ext: next header
        f.push(0); // ext: length (8 bytes total)
        f.extend_from_slice(&[0; 6]);
        f.extend_from_slice(&inner);
        let p = extract_payload(&f, LINKTYPE_ETHERNET).unwrap();
        assert_eq!(p.transport, Transport::Tcp);
        assert_eq!(p.payload, &payload);
        assert_eq!(p.src_port, 443);
        assert!(matches!(p.src_addr, Addr::V6(_)));
    }

    #[test]
    fn non_first_fragment_is_other_with_network_payload() {
        let mut f = Vec::new();
        f.extend_from_slice(&[0; 12]);
        f.extend_from_slice(&ETHERTYPE_IPV4.to_be_bytes());
        f.push(0x45);
        f.push(0);
        f.extend_from_slice(&24u16.to_be_bytes());
        f.extend_from_slice(&[0, 1]);
        f.extend_from_slice(&(0x2000u16 | 10).to_be_bytes()); // MF + offset 10
        f.push(64);
        f.push(IPPROTO_TCP);
        f.extend_from_slice(&[0, 0]);
        f.extend_from_slice(&[10, 0, 0, 1]);
        f.extend_from_slice(&[10, 0, 0, 2]);
        f.extend_from_slice(&[0xCA, 0xFE, 0xBA, 0xBE]);
        let p = extract_payload(&f, LINKTYPE_ETHERNET).unwrap();
        assert_eq!(p.transport, Transport::Other);
        assert_eq!(p.src_port, 0);
        assert_eq!(p.dst_port, 0);
        assert_eq!(p.payload, &[0xCA, 0xFE, 0xBA, 0xBE]);
    }

    #[test]
    fn icmp_is_other_transport() {
        let mut f = Vec::new();
        f.extend_from_slice(&[0; 12]);
        f.extend_from_slice(&ETHERTYPE_IPV4.to_be_bytes());
        f.push(0x45);
        f.push(0);
        f.extend_from_slice(&24u16.to_be_bytes());
        f.extend_from_slice(&[0, 0, 0, 0]);
        f.push(64);
        f.push(1); // ICMP
        f.extend_from_slice(&[0, 0]);
        f.extend_from_slice(&[10, 0, 0, 1]);
        f.extend_from_slice(&[10, 0, 0, 2]);
        f.extend_from_slice(&[8, 0, 0, 0]); // echo request
        let p = extract_payload(&f, LINKTYPE_ETHERNET).unwrap();
        assert_eq!(p.transport, Transport::Other);
        assert_eq!(p.payload, &[8, 0, 0, 0]);
    }

    #[test]
    fn short_frames_are_malformed() {
        assert_eq!(extract_payload(&[0; 10], LINKTYPE_ETHERNET), Err(FrameError::Malformed));
        let mut truncated = eth_ipv4_tcp(&[1, 2, 3], 20);
        truncated.truncate(14 + 20 + 10); // cuts inside the TCP header
        assert_eq!(extract_payload(&truncated, LINKTYPE_ETHERNET), Err(FrameError::Malformed));
    }

    #[test]
    fn arp_frames_are_unsupported_network() {
        let mut f = vec![0u8; 14];
        f[12] = 0x08;
        f[13] = 0x06; // ARP
        assert_eq!(
            extract_payload(&f, LINKTYPE_ETHERNET),
            Err(FrameError::UnsupportedNetwork(0x0806))
        );
    }

    #[test]
    fn capture_parse_counts_and_labels() {
        let mut w = crate::pcap::PcapWriter::new(LINKTYPE_ETHERNET);
        w.push_frame(1_000, &eth_ipv4_tcp(&[1; 10], 20));
        let mut arp = vec![0u8; 40];
        arp[12] = 0x08;
        arp[13] = 0x06;
        w.push_frame(2_000, &arp);
        w.push_frame(3_000, &eth_ipv4_tcp(&[2; 3], 20));
        let bytes = w.into_bytes();

        let label = Label::Malware("neris".into());
        let (records, stats) = parse_capture_bytes(&bytes, &label, None).unwrap();
        assert_eq!(records.len(), 2);
        assert_eq!(stats.packets, 2);
        assert_eq!(stats.skipped_network, 1);
        assert!(!stats.truncated_tail);
        assert_eq!(records[0].payload.len(), 10);
        assert!(records.iter().all(|r| r.label == label));
        // Parsing is deterministic.
        let (again, _) = parse_capture_bytes(&bytes, &label, None).unwrap();
        assert_eq!(records, again);
    }

    #[test]
    fn packet_cap_limits_yield() {
        let mut w = crate::pcap::PcapWriter::new(LINKTYPE_ETHERNET);
        for i in 0..5 {
            w.push_frame(i * 1_000, &eth_ipv4_tcp(&[i as u8], 20));
        }
        let bytes = w.into_bytes();
        let (records, stats) = parse_capture_bytes(&bytes, &Label::Normal, Some(3)).unwrap();
        assert_eq!(records.len(), 3);
        assert_eq!(stats.packets, 3);
    }

    #[test]
    fn truncated_capture_keeps_prior_packets() {
        let mut w = crate::pcap::PcapWriter::new(LINKTYPE_ETHERNET);
        w.push_frame(0, &eth_ipv4_tcp(&[1], 20));
        let mut bytes = w.into_bytes();
        bytes.extend_from_slice(&[0u8; 20]); // half a record header + junk
        bytes.truncate(bytes.len() - 10);
        let (records, stats) = parse_capture_bytes(&bytes, &Label::Normal, None).unwrap();
        assert_eq!(records.len(), 1);
        assert!(stats.truncated_tail);
    }

    #[test]
    fn manifest_parses_and_rejects_duplicates() {
        let m = CaptureManifest::parse("a.pcap\tnormal\n# comment\nb.pcap\tneris\n").unwrap();
        assert_eq!(m.entries.len(), 2);
        assert_eq!(m.entries[0].label, Label::Normal);
        assert_eq!(m.entries[1].label, Label::Malware("neris".into()));
        assert!(matches!(
            CaptureManifest::parse("a.pcap\tnormal\na.pcap\tneris\n"),
            Err(ManifestError::DuplicatePath(_))
        ));
        assert!(matches!(CaptureManifest::parse("bad line\n"), Err(ManifestError::BadLine(1))));
        assert_eq!(m.to_text(), "a.pcap\tnormal\nb.pcap\tneris\n");
    }
}
