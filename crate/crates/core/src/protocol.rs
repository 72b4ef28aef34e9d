//! Close-World, Open-World and Complete partitions, and all-against-all
//! genuine/impostor pair enumeration.
//!
//! Pairs are canonical: the sample-id table is sorted lexicographically and a
//! pair `(i, j)` always has `i < j` in that table. Genuine and impostor lists
//! are each in ascending `(i, j)` order.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::corpus::{Identity, SampleRecord};

#[derive(Debug, thiserror::Error)]
pub enum ProtocolError {
    #[error("rule infeasible: {0}")]
    Infeasible(String),
    #[error("sample `{0}` not found in the manifest")]
    UnknownSample(String),
    #[error("malformed pair file {path}: {message}")]
    Malformed { path: String, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, ProtocolError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Protocol {
    #[serde(rename = "CW")]
    ClosedWorld,
    #[serde(rename = "OW")]
    OpenWorld,
    Complete,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
    Complete,
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Protocol::ClosedWorld => "CW",
            Protocol::OpenWorld => "OW",
            Protocol::Complete => "Complete",
        })
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Test => "test",
            Split::Complete => "complete",
        })
    }
}

/// How a corpus is divided.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "protocol", rename_all = "snake_case")]
pub enum SplitRule {
    /// Every sample in one split.
    Complete,
    /// The last `test_per_identity` samples of each identity (manifest order)
    /// go to test, the rest to train.
    ClosedWorld { test_per_identity: usize },
    /// The first `train_identities` identities (manifest order) go to train,
    /// the rest to test. With `keep_subjects_together`, both eyes of a subject
    /// must land in the same half.
    OpenWorld {
        train_identities: usize,
        #[serde(default = "yes")]
        keep_subjects_together: bool,
    },
}

fn yes() -> bool {
    true
}

impl SplitRule {
    pub fn protocol(&self) -> Protocol {
        match self {
            SplitRule::Complete => Protocol::Complete,
            SplitRule::ClosedWorld { .. } => Protocol::ClosedWorld,
            SplitRule::OpenWorld { .. } => Protocol::OpenWorld,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Member {
    pub sample_id: String,
    pub identity: Identity,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartitionSpec {
    pub protocol: Protocol,
    pub split: Split,
    /// Members in manifest order.
    pub members: Vec<Member>,
    pub identity_count: usize,
}

/// On-disk partition: `{protocol, split, sample_ids}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartitionFile {
    pub protocol: Protocol,
    pub split: Split,
    pub sample_ids: Vec<String>,
}

impl PartitionSpec {
    fn new(protocol: Protocol, split: Split, members: Vec<Member>) -> Self {
        let identity_count = members.iter().map(|m| &m.identity).collect::<BTreeSet<_>>().len();
        Self {
            protocol,
            split,
            members,
            identity_count,
        }
    }

    /// Short label such as `CW-train`.
    pub fn id(&self) -> String {
        format!("{}-{}", self.protocol, self.split)
    }

    pub fn sample_ids(&self) -> impl Iterator<Item = &str> {
        self.members.iter().map(|m| m.sample_id.as_str())
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn to_file(&self) -> PartitionFile {
        PartitionFile {
            protocol: self.protocol,
            split: self.split,
            sample_ids: self.sample_ids().map(str::to_string).collect(),
        }
    }

    /// Re-attaches identity labels from the manifest records.
    pub fn from_file(file: &PartitionFile, records: &[SampleRecord]) -> Result<Self> {
        let by_id: HashMap<&str, &SampleRecord> = records.iter().map(|r| (r.sample_id.as_str(), r)).collect();
        let members = file
            .sample_ids
            .iter()
            .map(|id| {
                by_id
                    .get(id.as_str())
                    .map(|r| Member {
                        sample_id: id.clone(),
                        identity: r.identity(),
                    })
                    .ok_or_else(|| ProtocolError::UnknownSample(id.clone()))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::new(file.protocol, file.split, members))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        serde_json::to_writer_pretty(&mut w, &self.to_file())?;
        w.write_all(b"\n")?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>, records: &[SampleRecord]) -> Result<Self> {
        let file: PartitionFile = serde_json::from_reader(BufReader::new(File::open(path)?))?;
        Self::from_file(&file, records)
    }
}

fn member(r: &SampleRecord) -> Member {
    Member {
        sample_id: r.sample_id.clone(),
        identity: r.identity(),
    }
}

/// Identities in order of first appearance, each with its records in
/// manifest order.
fn group_by_identity(records: &[SampleRecord]) -> Vec<(Identity, Vec<&SampleRecord>)> {
    let mut order: Vec<(Identity, Vec<&SampleRecord>)> = Vec::new();
    let mut index: HashMap<Identity, usize> = HashMap::new();
    for r in records {
        let id = r.identity();
        match index.get(&id) {
            Some(&i) => order[i].1.push(r),
            None => {
                index.insert(id.clone(), order.len());
                order.push((id, vec![r]));
            }
        }
    }
    order
}

/// Builds the partition(s) for a rule: one split for Complete, train and
/// test for CW/OW.
pub fn make_partition(records: &[SampleRecord], rule: &SplitRule) -> Result<Vec<PartitionSpec>> {
    match *rule {
        SplitRule::Complete => Ok(vec![PartitionSpec::new(
            Protocol::Complete,
            Split::Complete,
            records.iter().map(member).collect(),
        )]),
        SplitRule::ClosedWorld { test_per_identity } => {
            let groups = group_by_identity(records);
            let mut test_ids = BTreeSet::new();
            for (identity, samples) in &groups {
                if samples.len() <= test_per_identity {
                    return Err(ProtocolError::Infeasible(format!(
                        "identity {identity} has {} samples, needs more than {test_per_identity}",
                        samples.len()
                    )));
                }
                let cut = samples.len() - test_per_identity;
                test_ids.extend(samples[cut..].iter().map(|r| r.sample_id.as_str()));
            }
            let (test, train): (Vec<_>, Vec<_>) = records
                .iter()
                .map(member)
                .partition(|m| test_ids.contains(m.sample_id.as_str()));
            Ok(vec![
                PartitionSpec::new(Protocol::ClosedWorld, Split::Train, train),
                PartitionSpec::new(Protocol::ClosedWorld, Split::Test, test),
            ])
        }
        SplitRule::OpenWorld {
            train_identities,
            keep_subjects_together,
        } => {
            let groups = group_by_identity(records);
            if train_identities == 0 || train_identities >= groups.len() {
                return Err(ProtocolError::Infeasible(format!(
                    "cannot put {train_identities} of {} identities in train",
                    groups.len()
                )));
            }
            let train: BTreeSet<&Identity> = groups[..train_identities].iter().map(|(id, _)| id).collect();
            if keep_subjects_together {
                let train_subjects: BTreeSet<&str> = train.iter().map(|id| id.subject_id.as_str()).collect();
                if let Some((split_id, _)) = groups[train_identities..]
                    .iter()
                    .find(|(id, _)| train_subjects.contains(id.subject_id.as_str()))
                {
                    return Err(ProtocolError::Infeasible(format!(
                        "subject `{}` would be split across train and test",
                        split_id.subject_id
                    )));
                }
            }
            let (train_members, test_members): (Vec<_>, Vec<_>) =
                records.iter().map(member).partition(|m| train.contains(&m.identity));
            Ok(vec![
                PartitionSpec::new(Protocol::OpenWorld, Split::Train, train_members),
                PartitionSpec::new(Protocol::OpenWorld, Split::Test, test_members),
            ])
        }
    }
}

/// Canonical genuine/impostor pairs over a sorted sample-id table.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PairList {
    pub sample_ids: Vec<String>,
    pub genuine: Vec<(u32, u32)>,
    pub impostor: Vec<(u32, u32)>,
}

impl PairList {
    pub fn counts(&self) -> (usize, usize) {
        (self.genuine.len(), self.impostor.len())
    }

    pub fn total(&self) -> usize {
        self.genuine.len() + self.impostor.len()
    }

    pub fn pair_ids(&self, pair: (u32, u32)) -> (&str, &str) {
        (&self.sample_ids[pair.0 as usize], &self.sample_ids[pair.1 as usize])
    }
}

/// Closed-form pair counts: `G = sum C(n_id, 2)`, `I = C(n, 2) - G`.
pub fn expected_counts(samples_per_identity: impl IntoIterator<Item = usize>) -> (u64, u64) {
    let choose2 = |n: u64| n * n.saturating_sub(1) / 2;
    let (mut n, mut g) = (0u64, 0u64);
    for k in samples_per_identity {
        n += k as u64;
        g += choose2(k as u64);
    }
    (g, choose2(n) - g)
}

pub fn enumerate_pairs(split: &PartitionSpec) -> PairList {
    let mut labeled: Vec<(&str, &Identity)> = split
        .members
        .iter()
        .map(|m| (m.sample_id.as_str(), &m.identity))
        .collect();
    labeled.sort_unstable_by(|a, b| a.0.cmp(b.0));
    let mut class_of: BTreeMap<&Identity, u32> = BTreeMap::new();
    let classes: Vec<u32> = labeled
        .iter()
        .map(|(_, id)| {
            let next = class_of.len() as u32;
            *class_of.entry(id).or_insert(next)
        })
        .collect();
    let n = labeled.len();
    let mut sizes = vec![0usize; class_of.len()];
    for &c in &classes {
        sizes[c as usize] += 1;
    }
    let (g, i) = expected_counts(sizes);
    let mut genuine = Vec::with_capacity(g as usize);
    let mut impostor = Vec::with_capacity(i as usize);
    for a in 0..n {
        let ca = classes[a];
        for (b, &cb) in classes.iter().enumerate().skip(a + 1) {
            if ca == cb {
                genuine.push((a as u32, b as u32));
            } else {
                impostor.push((a as u32, b as u32));
            }
        }
    }
    PairList {
        sample_ids: labeled.into_iter().map(|(s, _)| s.to_string()).collect(),
        genuine,
        impostor,
    }
}

const GENUINE: u8 = 1;
const IMPOSTOR: u8 = 0;

/// JSON sidecar of a pair file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairSidecar {
    pub partition: String,
    pub genuine_count: u64,
    pub impostor_count: u64,
    pub sample_ids: Vec<String>,
}

/// Path of the JSON sidecar belonging to a pair file (`x.pairs` -> `x.pairs.json`).
pub fn sidecar_path(pairs_path: &Path) -> PathBuf {
    let mut s = pairs_path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

/// Writes the pair stream (9-byte records: `u32` LE index, `u32` LE index,
/// `u8` label, in merged ascending `(i, j)` order) and its JSON sidecar.
pub fn write_pairs(path: impl AsRef<Path>, pairs: &PairList, partition: &str) -> Result<()> {
    let path = path.as_ref();
    let mut w = BufWriter::new(File::create(path)?);
    let (mut g, mut i) = (pairs.genuine.iter().peekable(), pairs.impostor.iter().peekable());
    loop {
        let (pair, label) = match (g.peek(), i.peek()) {
            (Some(a), Some(b)) if a < b => (g.next().unwrap(), GENUINE),
            (Some(_), Some(_)) | (None, Some(_)) => (i.next().unwrap(), IMPOSTOR),
            (Some(_), None) => (g.next().unwrap(), GENUINE),
            (None, None) => break,
        };
        w.write_all(&pair.0.to_le_bytes())?;
        w.write_all(&pair.1.to_le_bytes())?;
        w.write_all(&[label])?;
    }
    w.flush()?;
    let sidecar = PairSidecar {
        partition: partition.to_string(),
        genuine_count: pairs.genuine.len() as u64,
        impostor_count: pairs.impostor.len() as u64,
        sample_ids: pairs.sample_ids.clone(),
    };
    let mut s = BufWriter::new(File::create(sidecar_path(path))?);
    serde_json::to_writer_pretty(&mut s, &sidecar)?;
    s.write_all(b"\n")?;
    Ok(())
}

pub fn read_pairs(path: impl AsRef<Path>) -> Result<(PairList, PairSidecar)> {
    let path = path.as_ref();
    let malformed = |message: String| ProtocolError::Malformed {
        path: path.display().to_string(),
        message,
    };
    let sidecar: PairSidecar = serde_json::from_reader(BufReader::new(File::open(sidecar_path(path))?))?;
    let mut bytes = Vec::new();
    BufReader::new(File::open(path)?).read_to_end(&mut bytes)?;
    if bytes.len() % 9 != 0 {
        return Err(malformed(format!("length {} is not a multiple of 9", bytes.len())));
    }
    let n = sidecar.sample_ids.len() as u32;
    let mut pairs = PairList {
        sample_ids: sidecar.sample_ids.clone(),
        ..Default::default()
    };
    for rec in bytes.chunks_exact(9) {
        let a = u32::from_le_bytes(rec[0..4].try_into().unwrap());
        let b = u32::from_le_bytes(rec[4..8].try_into().unwrap());
        if a >= b || b >= n {
            return Err(malformed(format!("pair ({a}, {b}) invalid for {n} samples")));
        }
        match rec[8] {
            GENUINE => pairs.genuine.push((a, b)),
            IMPOSTOR => pairs.impostor.push((a, b)),
            other => return Err(malformed(format!("unknown label {other}"))),
        }
    }
    if pairs.genuine.len() as u64 != sidecar.genuine_count || pairs.impostor.len() as u64 != sidecar.impostor_count {
        return Err(malformed("counts disagree with sidecar".into()));
    }
    Ok((pairs, sidecar))
}
