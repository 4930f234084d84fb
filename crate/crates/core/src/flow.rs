//! Flow assembly: group packets by canonical 5-tuple into timed-out flows.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;
use core::fmt;

use crate::ingest::{Addr, Label, PacketRecord, Transport};

/// Canonical bidirectional 5-tuple: the lexicographically smaller
/// (address, port) endpoint comes first, so both directions of a
/// conversation map to one key.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FlowKey {
    pub endpoint_a: (Addr, u16),
    pub endpoint_b: (Addr, u16),
    pub transport: Transport,
}

impl FlowKey {
    pub fn from_packet(p: &PacketRecord) -> FlowKey {
        let src = (p.src_addr, p.src_port);
        let dst = (p.dst_addr, p.dst_port);
        let (endpoint_a, endpoint_b) = if src <= dst { (src, dst) } else { (dst, src) };
        FlowKey { endpoint_a, endpoint_b, transport: p.transport }
    }
}

impl fmt::Display for FlowKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}:{}<->{}:{}/{}",
            self.endpoint_a.0, self.endpoint_a.1, self.endpoint_b.0, self.endpoint_b.1, self.transport
        )
    }
}

/// Packets sharing a canonical key within one idle-timeout window.
///
/// `packets` holds at most the truncation limit passed to
/// [`assemble_flows`], in arrival order; `arrivals` counts every packet
/// that belonged to the flow before truncation.
#[derive(Debug, Clone)]
pub struct FlowRecord {
    pub key: FlowKey,
    pub packets: Vec<PacketRecord>,
    pub label: Label,
    pub first_seen: u64,
    pub last_seen: u64,
    pub arrivals: usize,
    /// Endpoint that sent the first packet; defines the forward direction.
    pub initiator: (Addr, u16),
}

impl FlowRecord {
    /// Forward means "sent by the flow initiator".
    pub fn is_forward(&self, p: &PacketRecord) -> bool {
        (p.src_addr, p.src_port) == self.initiator
    }
}

/// Group packets into flows by canonical 5-tuple, starting a new flow
/// instance whenever the gap between consecutive packets of one key
/// exceeds `idle_timeout_micros`, and keeping only the earliest
/// `max_packets` packets of each instance.
///
/// Packets are processed in timestamp order (ties broken by input order),
/// so the result is independent of interleaving across keys. Flows are
/// emitted in order of first appearance.
pub fn assemble_flows(
    packets: &[PacketRecord],
    idle_timeout_micros: u64,
    max_packets: usize,
) -> Vec<FlowRecord> {
    assert!(max_packets >= 1, "flow truncation limit must be at least 1");
    assert!(idle_timeout_micros > 0, "idle timeout must be positive");

    let mut order: Vec<usize> = (0..packets.len()).collect();
    order.sort_by_key(|&i| (packets[i].ts_micros, i));

    let mut flows: Vec<FlowRecord> = Vec::new();
    let mut open: BTreeMap<FlowKey, usize> = BTreeMap::new();
    for &i in &order {
        let p = &packets[i];
        let key = FlowKey::from_packet(p);
        let slot = open.get(&key).copied().filter(|&fi| {
            p.ts_micros.saturating_sub(flows[fi].last_seen) <= idle_timeout_micros
        });
        match slot {
            Some(fi) => {
                let flow = &mut flows[fi];
                debug_assert_eq!(flow.label, p.label, "flow packets must share one label");
                flow.last_seen = p.ts_micros;
                flow.arrivals += 1;
                if flow.packets.len() < max_packets {
                    flow.packets.push(p.clone());
                }
            }
            None => {
                let fi = flows.len();
                flows.push(FlowRecord {
                    key,
                    packets: alloc::vec![p.clone()],
                    label: p.label.clone(),
                    first_seen: p.ts_micros,
                    last_seen: p.ts_micros,
                    arrivals: 1,
                    initiator: (p.src_addr, p.src_port),
                });
                open.insert(key, fi);
            }
        }
    }
    flows
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::Transport;
    use alloc::vec;

    fn packet(ts: u64, src: u8, sport: u16, dst: u8, dport: u16, body: &[u8]) -> PacketRecord {
        PacketRecord {
            ts_micros: ts,
            src_addr: Addr::V4([10, 0, 0, src]),
            dst_addr: Addr::V4([10, 0, 0, dst]),
            src_port: sport,
            dst_port: dport,
            transport: Transport::Tcp,
            tcp_flags: 0x10,
            wire_len: 54 + body.len() as u32,
            payload: body.to_vec(),
            label: Label::Normal,
        }
    }

    #[test]
    fn key_is_direction_invariant() {
        let a = packet(0, 1, 1000, 2, 80, &[]);
        let b = packet(1, 2, 80, 1, 1000, &[]);
        assert_eq!(FlowKey::from_packet(&a), FlowKey::from_packet(&b));
    }

    #[test]
    fn first_m_packets_kept() {
        let pkts: Vec<_> = (0..5).map(|i| packet(i * 10, 1, 1000, 2, 80, &[i as u8])).collect();
        let flows = assemble_flows(&pkts, 1_000_000, 2);
        assert_eq!(flows.len(), 1);
        assert_eq!(flows[0].packets.len(), 2);
        assert_eq!(flows[0].arrivals, 5);
        assert_eq!(flows[0].packets[0].payload, &[0]);
        assert_eq!(flows[0].packets[1].payload, &[1]);
        assert_eq!(flows[0].last_seen, 40);
    }

    #[test]
    fn idle_timeout_starts_new_instance() {
        let pkts = vec![packet(0, 1, 1000, 2, 80, &[1]), packet(2_000_001, 1, 1000, 2, 80, &[2])];
        let flows = assemble_flows(&pkts, 2_000_000, 10);
        assert_eq!(flows.len(), 2);
        assert_eq!(flows[0].packets.len(), 1);
        assert_eq!(flows[1].packets.len(), 1);

        // At exactly the timeout the packet still belongs to the flow.
        let pkts = vec![packet(0, 1, 1000, 2, 80, &[1]), packet(2_000_000, 1, 1000, 2, 80, &[2])];
        assert_eq!(assemble_flows(&pkts, 2_000_000, 10).len(), 1);
    }

    #[test]
    fn interleaved_keys_assemble_independently() {
        let pkts = vec![
            packet(0, 1, 1000, 2, 80, &[10]),
            packet(1, 3, 2000, 4, 443, &[20]),
            packet(2, 1, 1000, 2, 80, &[11]),
            packet(3, 3, 2000, 4, 443, &[21]),
            packet(4, 1, 1000, 2, 80, &[12]),
        ];
        let flows = assemble_flows(&pkts, 1_000_000, 2);
        assert_eq!(flows.len(), 2);
        assert_eq!(flows[0].packets.len(), 2);
        assert_eq!(flows[0].packets[0].payload, &[10]);
        assert_eq!(flows[0].packets[1].payload, &[11]);
        assert_eq!(flows[1].packets[0].payload, &[20]);
        assert_eq!(flows[1].packets[1].payload, &[21]);
        assert_eq!(flows[0].arrivals, 3);
    }

    #[test]
    fn partition_preserves_packet_count() {
        let pkts: Vec<_> = (0..40)
            .map(|i| packet(i * 700_000, (i % 3) as u8 + 1, 1000, 9, 80, &[i as u8]))
            .collect();
        let flows = assemble_flows(&pkts, 1_500_000, 4);
        let total: usize = flows.iter().map(|f| f.arrivals).sum();
        assert_eq!(total, pkts.len());
    }

    #[test]
    fn reversed_directions_give_identical_partition() {
        let pkts = vec![
            packet(0, 1, 1000, 2, 80, &[1]),
            packet(5, 2, 80, 1, 1000, &[2]),
            packet(10, 1, 1000, 2, 80, &[3]),
        ];
        let flows = assemble_flows(&pkts, 1_000_000, 10);
        assert_eq!(flows.len(), 1);
        assert_eq!(flows[0].packets.len(), 3);

        let reversed: Vec<_> = pkts
            .iter()
            .map(|p| {
                let mut q = p.clone();
                core::mem::swap(&mut q.src_addr, &mut q.dst_addr);
                core::mem::swap(&mut q.src_port, &mut q.dst_port);
                q
            })
            .collect();
        let rflows = assemble_flows(&reversed, 1_000_000, 10);
        assert_eq!(rflows.len(), 1);
        assert_eq!(rflows[0].key, flows[0].key);
        assert_eq!(rflows[0].arrivals, flows[0].arrivals);
    }

    #[test]
    fn unsorted_input_is_ordered_by_timestamp() {
        let pkts = vec![
            packet(30, 1, 1000, 2, 80, &[3]),
            packet(10, 1, 1000, 2, 80, &[1]),
            packet(20, 1, 1000, 2, 80, &[2]),
        ];
        let flows = assemble_flows(&pkts, 1_000_000, 10);
        let order: Vec<u8> = flows[0].packets.iter().map(|p| p.payload[0]).collect();
        assert_eq!(order, vec![1, 2, 3]);
    }

    #[test]
    fn forward_direction_follows_initiator() {
        let pkts = vec![packet(0, 2, 80, 1, 1000, &[1]), packet(1, 1, 1000, 2, 80, &[2])];
        let flows = assemble_flows(&pkts, 1_000_000, 10);
        assert!(flows[0].is_forward(&flows[0].packets[0]));
        assert!(!flows[0].is_forward(&flows[0].packets[1]));
    }

    #[test]
    fn empty_input_yields_empty_output() {
        assert!(assemble_flows(&[], 1_000_000, 2).is_empty());
    }
}
