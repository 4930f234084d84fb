//! Raw input representations: per-packet byte vectors and per-flow slabs,
//! trimmed/zero-padded to fixed extents and normalized to [0, 1], plus the
//! stratified train/validation/test split.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use crate::flow::FlowRecord;
use crate::ingest::{Label, PacketRecord};
use crate::rng::Rng;
use crate::tensor::Tensor;

/// Ordered, finite set of class names; index is the class id everywhere.
/// `normal` sorts first when present.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ClassSet {
    names: Vec<String>,
}

impl ClassSet {
    pub fn new(names: Vec<String>) -> ClassSet {
        ClassSet { names }
    }

    /// Collect the distinct classes of a label stream: `normal` first, then
    /// malware classes in order of first appearance.
    pub fn from_labels<'a>(labels: impl Iterator<Item = &'a Label>) -> ClassSet {
        let mut names: Vec<String> = Vec::new();
        let mut saw_normal = false;
        for label in labels {
            match label {
                Label::Normal => saw_normal = true,
                Label::Malware(name) => {
                    if !names.iter().any(|n| n == name) {
                        names.push(name.clone());
                    }
                }
            }
        }
        if saw_normal {
            names.insert(0, "normal".to_string());
        }
        ClassSet { names }
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn index_of(&self, label: &Label) -> Option<u16> {
        let name = label.class_name();
        self.names.iter().position(|n| n == name).map(|i| i as u16)
    }

    pub fn name_of(&self, class: u16) -> &str {
        &self.names[class as usize]
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ReprError {
    /// A packet or flow carries a label outside the declared class set.
    UnknownClass(String),
    /// A declared class has no samples.
    EmptyClass(String),
    /// No rows survive filtering.
    EmptyDataset,
    BadParams(&'static str),
}

impl fmt::Display for ReprError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ReprError::UnknownClass(c) => write!(f, "label {c} is not in the declared class set"),
            ReprError::EmptyClass(c) => write!(f, "declared class {c} has no samples"),
            ReprError::EmptyDataset => write!(f, "no samples left to build a dataset from"),
            ReprError::BadParams(msg) => write!(f, "bad representation parameters: {msg}"),
        }
    }
}

impl core::error::Error for ReprError {}

/// Trim or zero-pad a payload to `n` bytes and scale each byte to [0, 1].
pub fn normalize_packet(payload: &[u8], n: usize) -> Vec<f32> {
    assert!(n >= 1, "representation width must be at least 1");
    let mut row = Vec::with_capacity(n);
    let keep = payload.len().min(n);
    row.extend(payload[..keep].iter().map(|&b| f32::from(b) / 255.0));
    row.resize(n, 0.0);
    row
}

/// Whether and how to equalize per-class sample counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Balance {
    /// Keep every sample.
    Keep,
    /// Uniform random downsampling of each class to the minority count.
    Downsample { seed: u64 },
}

/// Per-packet raw-byte dataset: rows are `(n)` normalized byte vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct RawPacketDataset {
    /// Shape `(N, n)`, values in [0, 1].
    pub inputs: Tensor<f32>,
    pub labels: Vec<u16>,
    pub classes: ClassSet,
}

/// Per-flow raw-byte dataset: each flow contributes an `(m, n)` slab.
#[derive(Debug, Clone, PartialEq)]
pub struct RawFlowDataset {
    /// Shape `(N, m, n)`, values in [0, 1]; missing packets pad with
    /// all-zero rows at the end.
    pub inputs: Tensor<f32>,
    pub labels: Vec<u16>,
    pub classes: ClassSet,
}

/// Map samples to class ids, validate the class set, and pick the kept
/// row indices (balanced or not) in input order.
fn select_rows(
    sample_labels: &[&Label],
    classes: &ClassSet,
    balance: Balance,
) -> Result<(Vec<usize>, Vec<u16>), ReprError> {
    let mut ids = Vec::with_capacity(sample_labels.len());
    let mut per_class: Vec<Vec<usize>> = alloc::vec![Vec::new(); classes.len()];
    for (i, label) in sample_labels.iter().enumerate() {
        let id = classes
            .index_of(label)
            .ok_or_else(|| ReprError::UnknownClass(label.class_name().to_string()))?;
        per_class[id as usize].push(i);
        ids.push(id);
    }
    for (c, members) in per_class.iter().enumerate() {
        if members.is_empty() {
            return Err(ReprError::EmptyClass(classes.name_of(c as u16).to_string()));
        }
    }
    let kept: Vec<usize> = match balance {
        Balance::Keep => (0..sample_labels.len()).collect(),
        Balance::Downsample { seed } => {
            let target = per_class.iter().map(Vec::len).min().unwrap();
            let mut kept = Vec::with_capacity(target * classes.len());
            for (c, members) in per_class.iter().enumerate() {
                let mut rng = Rng::labeled(seed, &crate::rng::stream_label("balance", classes.name_of(c as u16)));
                let pick = rng.sample_indices(members.len(), target);
                kept.extend(pick.into_iter().map(|j| members[j]));
            }
            kept.sort_unstable();
            kept
        }
    };
    if kept.is_empty() {
        return Err(ReprError::EmptyDataset);
    }
    let labels = kept.iter().map(|&i| ids[i]).collect();
    Ok((kept, labels))
}

/// Build the per-packet dataset. Packets with empty payloads are dropped
/// here: their rows would be all zeros regardless of class.
pub fn build_packet_dataset(
    packets: &[PacketRecord],
    classes: &ClassSet,
    n: usize,
    balance: Balance,
) -> Result<RawPacketDataset, ReprError> {
    if n == 0 {
        return Err(ReprError::BadParams("n must be at least 1"));
    }
    let usable: Vec<&PacketRecord> = packets.iter().filter(|p| !p.payload.is_empty()).collect();
    let labels: Vec<&Label> = usable.iter().map(|p| &p.label).collect();
    let (kept, label_ids) = select_rows(&labels, classes, balance)?;
    let mut data = Vec::with_capacity(kept.len() * n);
    for &i in &kept {
        data.extend_from_slice(&normalize_packet(&usable[i].payload, n));
    }
    Ok(RawPacketDataset {
        inputs: Tensor::from_vec(&[kept.len(), n], data),
        labels: label_ids,
        classes: classes.clone(),
    })
}

/// Build the per-flow dataset. A flow whose first `m` packets all have
/// empty payloads is dropped: its slab would be all zeros.
pub fn build_flow_dataset(
    flows: &[FlowRecord],
    classes: &ClassSet,
    m: usize,
    n: usize,
    balance: Balance,
) -> Result<RawFlowDataset, ReprError> {
    if n == 0 || m == 0 {
        return Err(ReprError::BadParams("m and n must be at least 1"));
    }
    let usable: Vec<&FlowRecord> = flows
        .iter()
        .filter(|f| f.packets.iter().take(m).any(|p| !p.payload.is_empty()))
        .collect();
    let labels: Vec<&Label> = usable.iter().map(|f| &f.label).collect();
    let (kept, label_ids) = select_rows(&labels, classes, balance)?;
    let mut data = Vec::with_capacity(kept.len() * m * n);
    for &i in &kept {
        let flow = usable[i];
        for slot in 0..m {
            match flow.packets.get(slot) {
                Some(p) => data.extend_from_slice(&normalize_packet(&p.payload, n)),
                None => data.extend(core::iter::repeat(0.0f32).take(n)),
            }
        }
    }
    Ok(RawFlowDataset {
        inputs: Tensor::from_vec(&[kept.len(), m, n], data),
        labels: label_ids,
        classes: classes.clone(),
    })
}

/// Train/validation/test fractions plus the shuffle seed.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SplitSpec {
    pub train: f64,
    pub validation: f64,
    pub test: f64,
    pub seed: u64,
}

impl SplitSpec {
    pub fn new(train: f64, validation: f64, test: f64, seed: u64) -> Result<SplitSpec, SplitError> {
        let spec = SplitSpec { train, validation, test, seed };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), SplitError> {
        let sum = self.train + self.validation + self.test;
        if !(self.train > 0.0 && self.validation > 0.0 && self.test > 0.0) {
            return Err(SplitError::BadFractions);
        }
        if (sum - 1.0).abs() > 1e-9 {
            return Err(SplitError::BadFractions);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SplitError {
    /// Fractions must be positive and sum to 1.
    BadFractions,
    /// A subset came out empty after rounding.
    EmptySubset(&'static str),
}

impl fmt::Display for SplitError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SplitError::BadFractions => write!(f, "split fractions must be positive and sum to 1"),
            SplitError::EmptySubset(which) => write!(f, "the {which} subset is empty after rounding"),
        }
    }
}

impl core::error::Error for SplitError {}

/// Disjoint row-index subsets covering the whole dataset.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    pub test: Vec<usize>,
}

impl SplitIndices {
    pub fn subset(&self, which: SplitSubset) -> &[usize] {
        match which {
            SplitSubset::Train => &self.train,
            SplitSubset::Validation => &self.validation,
            SplitSubset::Test => &self.test,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum SplitSubset {
    Train,
    Validation,
    Test,
}

impl fmt::Display for SplitSubset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SplitSubset::Train => write!(f, "train"),
            SplitSubset::Validation => write!(f, "validation"),
            SplitSubset::Test => write!(f, "test"),
        }
    }
}

fn round_nearest(x: f64) -> usize {
    num_traits::Float::round(x) as usize
}

/// Stratified split over class labels: within every class, validation and
/// test sizes round to the nearest sample and the remainder goes to
/// training, so class proportions are preserved within one sample.
/// Shuffling is seed-deterministic; outputs are sorted index sets.
pub fn split_indices(labels: &[u16], spec: &SplitSpec) -> Result<SplitIndices, SplitError> {
    spec.validate()?;
    if labels.is_empty() {
        return Err(SplitError::EmptySubset("train"));
    }
    let class_count = labels.iter().map(|&c| c as usize).max().unwrap() + 1;
    let mut per_class: Vec<Vec<usize>> = alloc::vec![Vec::new(); class_count];
    for (i, &c) in labels.iter().enumerate() {
        per_class[c as usize].push(i);
    }
    let mut rng = Rng::labeled(spec.seed, "split");
    let mut out = SplitIndices { train: Vec::new(), validation: Vec::new(), test: Vec::new() };
    for members in per_class.iter_mut() {
        if members.is_empty() {
            continue;
        }
        rng.shuffle(members);
        let n = members.len();
        let n_val = round_nearest(spec.validation * n as f64).min(n);
        let n_test = round_nearest(spec.test * n as f64).min(n - n_val);
        let n_train = n - n_val - n_test;
        out.train.extend_from_slice(&members[..n_train]);
        out.validation.extend_from_slice(&members[n_train..n_train + n_val]);
        out.test.extend_from_slice(&members[n_train + n_val..]);
    }
    out.train.sort_unstable();
    out.validation.sort_unstable();
    out.test.sort_unstable();
    if out.train.is_empty() {
        return Err(SplitError::EmptySubset("train"));
    }
    if out.validation.is_empty() {
        return Err(SplitError::EmptySubset("validation"));
    }
    if out.test.is_empty() {
        return Err(SplitError::EmptySubset("test"));
    }
    Ok(SplitIndices { train: out.train, validation: out.validation, test: out.test })
}

/// Copy the given rows of a sample-major tensor into a new `(k, d)` matrix,
/// flattening any per-sample structure.
pub fn gather_rows(inputs: &Tensor<f32>, indices: &[usize]) -> Tensor<f32> {
    let row_len: usize = inputs.shape()[1..].iter().product();
    let mut data = Vec::with_capacity(indices.len() * row_len);
    for &i in indices {
        data.extend_from_slice(&inputs.data()[i * row_len..(i + 1) * row_len]);
    }
    Tensor::from_vec(&[indices.len(), row_len], data)
}

pub fn gather_labels(labels: &[u16], indices: &[usize]) -> Vec<u16> {
    indices.iter().map(|&i| labels[i]).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{Addr, Transport};
    use alloc::vec;

    #[test]
    fn normalize_endpoints_and_padding() {
        let row = normalize_packet(&[0, 255, 128], 4);
        assert_eq!(row, vec![0.0, 1.0, 128.0 / 255.0, 0.0]);
    }

    #[test]
    fn normalize_trims_long_payloads() {
        let payload: Vec<u8> = (0..2000).map(|i| (i % 251) as u8) .collect();
        let row = normalize_packet(&payload, 1024);
        assert_eq!(row.len(), 1024);
        assert_eq!(row[1023], f32::from(payload[1023]) / 255.0);
    }

    #[test]
    fn normalize_empty_payload_is_all_zeros() {
        let row = normalize_packet(&[], 100);
        assert_eq!(row.len(), 100);
        assert!(row.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn unity_occurs_only_for_byte_255() {
        let row = normalize_packet(&[254, 255, 1], 3);
        assert!(row[0] < 1.0);
        assert_eq!(row[1], 1.0);
        assert!(row.iter().all(|&v| (0.0..=1.0).contains(&v)));
    }

    fn packet(label: Label, body: &[u8]) -> PacketRecord {
        PacketRecord {
            ts_micros: 0,
            src_addr: Addr::V4([10, 0, 0, 1]),
            dst_addr: Addr::V4([10, 0, 0, 2]),
            src_port: 1000,
            dst_port: 80,
            transport: Transport::Tcp,
            tcp_flags: 0,
            wire_len: 60,
            payload: body.to_vec(),
            label,
        }
    }

    fn two_class() -> ClassSet {
        ClassSet::new(vec!["normal".into(), "malware".into()])
    }

    #[test]
    fn balancing_downsamples_to_minority() {
        let mut pkts = Vec::new();
        for i in 0..300 {
            pkts.push(packet(Label::Normal, &[i as u8, 1]));
        }
        for i in 0..100 {
            pkts.push(packet(Label::Malware("malware".into()), &[i as u8, 2]));
        }
        let ds =
            build_packet_dataset(&pkts, &two_class(), 4, Balance::Downsample { seed: 7 }).unwrap();
        assert_eq!(ds.inputs.shape(), &[200, 4]);
        assert_eq!(ds.labels.iter().filter(|&&c| c == 0).count(), 100);
        assert_eq!(ds.labels.iter().filter(|&&c| c == 1).count(), 100);
        // Deterministic under the same seed.
        let again =
            build_packet_dataset(&pkts, &two_class(), 4, Balance::Downsample { seed: 7 }).unwrap();
        assert_eq!(ds, again);
    }

    #[test]
    fn unbalanced_keeps_every_row() {
        let pkts = vec![
            packet(Label::Normal, &[1]),
            packet(Label::Normal, &[2]),
            packet(Label::Malware("malware".into()), &[3]),
        ];
        let ds = build_packet_dataset(&pkts, &two_class(), 2, Balance::Keep).unwrap();
        assert_eq!(ds.inputs.shape(), &[3, 2]);
    }

    #[test]
    fn empty_class_is_an_error() {
        let pkts = vec![packet(Label::Normal, &[1])];
        assert_eq!(
            build_packet_dataset(&pkts, &two_class(), 2, Balance::Keep),
            Err(ReprError::EmptyClass("malware".into()))
        );
    }

    #[test]
    fn empty_payload_packets_are_filtered() {
        let pkts = vec![
            packet(Label::Normal, &[]),
            packet(Label::Normal, &[1]),
            packet(Label::Malware("malware".into()), &[2]),
        ];
        let ds = build_packet_dataset(&pkts, &two_class(), 2, Balance::Keep).unwrap();
        assert_eq!(ds.inputs.shape(), &[2, 2]);
    }

    fn flow_of(label: Label, payloads: &[&[u8]]) -> FlowRecord {
        let packets: Vec<PacketRecord> = payloads.iter().map(|p| packet(label.clone(), p)).collect();
        FlowRecord {
            key: crate::flow::FlowKey::from_packet(&packets[0]),
            label,
            first_seen: 0,
            last_seen: 0,
            arrivals: packets.len(),
            initiator: (packets[0].src_addr, packets[0].src_port),
            packets,
        }
    }

    #[test]
    fn short_flows_pad_with_zero_rows() {
        let flows = vec![
            flow_of(Label::Normal, &[&[10, 20]]),
            flow_of(Label::Malware("malware".into()), &[&[1], &[2], &[3]]),
        ];
        let ds = build_flow_dataset(&flows, &two_class(), 2, 3, Balance::Keep).unwrap();
        assert_eq!(ds.inputs.shape(), &[2, 2, 3]);
        let row = ds.inputs.data();
        // First flow: one real packet then an all-zero packet row.
        assert_eq!(&row[0..3], &[10.0 / 255.0, 20.0 / 255.0, 0.0]);
        assert_eq!(&row[3..6], &[0.0, 0.0, 0.0]);
        // Second flow: first two packets only.
        assert_eq!(&row[6..9], &[1.0 / 255.0, 0.0, 0.0]);
        assert_eq!(&row[9..12], &[2.0 / 255.0, 0.0, 0.0]);
    }

    #[test]
    fn all_empty_flows_are_dropped() {
        let flows = vec![
            flow_of(Label::Normal, &[&[], &[]]),
            flow_of(Label::Normal, &[&[5]]),
            flow_of(Label::Malware("malware".into()), &[&[6]]),
        ];
        let ds = build_flow_dataset(&flows, &two_class(), 2, 2, Balance::Keep).unwrap();
        assert_eq!(ds.inputs.shape(), &[2, 2, 2]);
    }

    #[test]
    fn empty_beyond_window_does_not_save_a_flow() {
        // First m=1 packets empty, later packet non-empty: still dropped.
        let flows = vec![
            flow_of(Label::Normal, &[&[], &[9]]),
            flow_of(Label::Malware("malware".into()), &[&[6]]),
        ];
        assert_eq!(
            build_flow_dataset(&flows, &two_class(), 1, 2, Balance::Keep),
            Err(ReprError::EmptyClass("normal".into()))
        );
    }

    #[test]
    fn split_80_10_10_on_100_rows() {
        let labels = vec![0u16; 100];
        let spec = SplitSpec::new(0.8, 0.1, 0.1, 3).unwrap();
        let s = split_indices(&labels, &spec).unwrap();
        assert_eq!(s.train.len(), 80);
        assert_eq!(s.validation.len(), 10);
        assert_eq!(s.test.len(), 10);
    }

    #[test]
    fn split_is_seed_deterministic_and_partitions() {
        let labels: Vec<u16> = (0..257).map(|i| (i % 3) as u16).collect();
        let spec = SplitSpec::new(0.7, 0.15, 0.15, 11).unwrap();
        let a = split_indices(&labels, &spec).unwrap();
        let b = split_indices(&labels, &spec).unwrap();
        assert_eq!(a, b);
        let mut all: Vec<usize> = Vec::new();
        all.extend(&a.train);
        all.extend(&a.validation);
        all.extend(&a.test);
        all.sort_unstable();
        assert_eq!(all, (0..257).collect::<Vec<_>>());
    }

    #[test]
    fn split_is_stratified_within_one_sample() {
        let labels: Vec<u16> = (0..160_000).map(|i| (i % 4) as u16).collect();
        let spec = SplitSpec::new(0.8, 0.1, 0.1, 5).unwrap();
        let s = split_indices(&labels, &spec).unwrap();
        for subset in [&s.train, &s.validation, &s.test] {
            let mut counts = [0usize; 4];
            for &i in subset.iter() {
                counts[labels[i] as usize] += 1;
            }
            let expect = subset.len() / 4;
            for &c in &counts {
                assert!((c as i64 - expect as i64).abs() <= 1, "count {c} expected ~{expect}");
            }
        }
    }

    #[test]
    fn bad_fractions_rejected() {
        assert!(SplitSpec::new(0.8, 0.1, 0.2, 0).is_err());
        assert!(SplitSpec::new(1.0, 0.0, 0.0, 0).is_err());
    }

    #[test]
    fn tiny_dataset_split_errors() {
        let labels = vec![0u16, 0];
        let spec = SplitSpec::new(0.8, 0.1, 0.1, 0).unwrap();
        assert!(matches!(split_indices(&labels, &spec), Err(SplitError::EmptySubset(_))));
    }

    #[test]
    fn gather_rows_flattens_slabs() {
        let t = Tensor::from_vec(&[2, 2, 3], (0..12).map(|v| v as f32).collect());
        let picked = gather_rows(&t, &[1]);
        assert_eq!(picked.shape(), &[1, 6]);
        assert_eq!(picked.data(), &[6.0, 7.0, 8.0, 9.0, 10.0, 11.0]);
    }
}
