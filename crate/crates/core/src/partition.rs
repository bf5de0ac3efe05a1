//! Ordered partitions of subsystem labels and the coarser-than relation.
//!
//! A partition `X1|X2|...|Xk` lists blocks of subsystem positions. Labels
//! increase within a block and every label of an earlier block precedes every
//! label of a later one, so `AB|C|DE` and `A|CD` are valid but `AC|B` is not.
//!
//! Coarsening moves:
//! - discard a whole block,
//! - merge a run of adjacent blocks into one,
//! - drop one label from the last block when it holds at least two.

use std::collections::{BTreeSet, HashMap, VecDeque};
use std::fmt;
use std::ops::BitOr;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{invalid_arg, Error, Result};
use crate::qstate::default_name;

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Partition {
    blocks: Vec<Vec<usize>>,
}

impl Partition {
    pub fn new(blocks: Vec<Vec<usize>>) -> Result<Self> {
        if blocks.is_empty() {
            return Err(invalid_arg("a partition needs at least one block"));
        }
        let mut last: Option<usize> = None;
        for block in &blocks {
            if block.is_empty() {
                return Err(invalid_arg("empty block in partition"));
            }
            for &label in block {
                if last.is_some_and(|l| label <= l) {
                    return Err(invalid_arg(format!(
                        "labels must increase within and across blocks: {}",
                        fmt_blocks(&blocks)
                    )));
                }
                last = Some(label);
            }
        }
        Ok(Self { blocks })
    }

    /// `A|B|...` over the first `n` labels.
    pub fn singletons(n: usize) -> Self {
        Self {
            blocks: (0..n).map(|i| vec![i]).collect(),
        }
    }

    /// Parses the text syntax with single-letter labels `A`..`Z` mapped to 0..25.
    pub fn parse(text: &str) -> Result<Self> {
        let blocks = split_blocks(text)?
            .into_iter()
            .map(|b| {
                b.chars()
                    .map(|c| {
                        if c.is_ascii_uppercase() {
                            Ok(c as usize - 'A' as usize)
                        } else {
                            Err(Error::Parse(format!("bad label {c:?} in {text:?}")))
                        }
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(blocks).map_err(|e| Error::Parse(format!("{text:?}: {e}")))
    }

    /// Parses against explicit label names (positions are indices into `names`).
    /// Multi-character names are matched greedily, longest first.
    pub fn parse_with(text: &str, names: &[&str]) -> Result<Self> {
        let mut order: Vec<usize> = (0..names.len()).collect();
        order.sort_by_key(|&i| std::cmp::Reverse(names[i].len()));
        let blocks = split_blocks(text)?
            .into_iter()
            .map(|mut rest| {
                let mut block = Vec::new();
                while !rest.is_empty() {
                    let hit = order
                        .iter()
                        .find(|&&i| !names[i].is_empty() && rest.starts_with(names[i]))
                        .ok_or_else(|| Error::Parse(format!("unknown label at {rest:?} in {text:?}")))?;
                    block.push(*hit);
                    rest = &rest[names[*hit].len()..];
                }
                Ok(block)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(blocks).map_err(|e| Error::Parse(format!("{text:?}: {e}")))
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    pub fn n_blocks(&self) -> usize {
        self.blocks.len()
    }

    /// All labels in order.
    pub fn labels(&self) -> Vec<usize> {
        self.blocks.iter().flatten().copied().collect()
    }

    pub fn contains_label(&self, label: usize) -> bool {
        self.blocks.iter().any(|b| b.contains(&label))
    }

    pub fn display_with(&self, names: &[&str]) -> String {
        self.blocks
            .iter()
            .map(|b| b.iter().map(|&i| names.get(i).copied().unwrap_or("?")).collect::<String>())
            .collect::<Vec<_>>()
            .join("|")
    }

    /// Same partition with labels renumbered `0..n` in order, for use on the
    /// reduced state over exactly these labels.
    pub fn compacted(&self) -> Self {
        let mut next = 0;
        let blocks = self
            .blocks
            .iter()
            .map(|b| {
                b.iter()
                    .map(|_| {
                        next += 1;
                        next - 1
                    })
                    .collect()
            })
            .collect();
        Self { blocks }
    }
}

fn split_blocks(text: &str) -> Result<Vec<&str>> {
    let text = text.trim();
    if text.is_empty() {
        return Err(Error::Parse("empty partition".into()));
    }
    text.split('|')
        .map(|b| {
            let b = b.trim();
            if b.is_empty() {
                Err(Error::Parse(format!("empty block in {text:?}")))
            } else {
                Ok(b)
            }
        })
        .collect()
}

fn fmt_blocks(blocks: &[Vec<usize>]) -> String {
    blocks
        .iter()
        .map(|b| b.iter().map(|&i| label_char(i)).collect::<String>())
        .collect::<Vec<_>>()
        .join("|")
}

fn label_char(i: usize) -> String {
    if i < 26 {
        default_name(i)
    } else {
        format!("[{i}]")
    }
}

impl fmt::Display for Partition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&fmt_blocks(&self.blocks))
    }
}

impl FromStr for Partition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::parse(s)
    }
}

impl Serialize for Partition {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Partition {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Self::parse(&s).map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MoveKind {
    /// Drop a whole block.
    DiscardBlock,
    /// Merge a run of adjacent blocks.
    MergeBlocks,
    /// Drop one label from the last block.
    TrimLastBlock,
}

/// A set of allowed move kinds.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct MoveSet(u8);

impl MoveSet {
    pub const NONE: MoveSet = MoveSet(0);
    pub const DISCARD: MoveSet = MoveSet(1);
    pub const MERGE: MoveSet = MoveSet(2);
    pub const TRIM: MoveSet = MoveSet(4);
    pub const ALL: MoveSet = MoveSet(7);

    pub fn contains(self, kind: MoveKind) -> bool {
        let bit = match kind {
            MoveKind::DiscardBlock => 1,
            MoveKind::MergeBlocks => 2,
            MoveKind::TrimLastBlock => 4,
        };
        self.0 & bit != 0
    }

    pub fn is_subset_of(self, other: MoveSet) -> bool {
        self.0 & !other.0 == 0
    }
}

impl BitOr for MoveSet {
    type Output = MoveSet;

    fn bitor(self, rhs: MoveSet) -> MoveSet {
        MoveSet(self.0 | rhs.0)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CoarseningMove {
    /// Drop block `block` (0-based).
    DiscardBlock { block: usize },
    /// Merge blocks `first..=last` (0-based, adjacent run, `first < last`).
    MergeBlocks { first: usize, last: usize },
    /// Remove `label` from the last block.
    TrimLastBlock { label: usize },
}

impl CoarseningMove {
    pub fn kind(&self) -> MoveKind {
        match self {
            CoarseningMove::DiscardBlock { .. } => MoveKind::DiscardBlock,
            CoarseningMove::MergeBlocks { .. } => MoveKind::MergeBlocks,
            CoarseningMove::TrimLastBlock { .. } => MoveKind::TrimLastBlock,
        }
    }
}

pub fn apply_move(p: &Partition, m: &CoarseningMove) -> Result<Partition> {
    let k = p.blocks.len();
    let mut blocks = p.blocks.clone();
    match *m {
        CoarseningMove::DiscardBlock { block } => {
            if block >= k {
                return Err(invalid_arg(format!("no block {block} in {p}")));
            }
            if k == 1 {
                return Err(invalid_arg("cannot discard the only block"));
            }
            blocks.remove(block);
        }
        CoarseningMove::MergeBlocks { first, last } => {
            if first >= last || last >= k {
                return Err(invalid_arg(format!("cannot merge blocks {first}..={last} of {p}")));
            }
            let merged: Vec<usize> = blocks[first..=last].iter().flatten().copied().collect();
            blocks.splice(first..=last, [merged]);
        }
        CoarseningMove::TrimLastBlock { label } => {
            let tail = blocks.last_mut().expect("nonempty");
            if tail.len() < 2 {
                return Err(invalid_arg(format!("last block of {p} has a single label")));
            }
            let pos = tail
                .iter()
                .position(|&l| l == label)
                .ok_or_else(|| invalid_arg(format!("label {} is not in the last block of {p}", label_char(label))))?;
            tail.remove(pos);
        }
    }
    Partition::new(blocks)
}

/// Every single move available from `p` under `allowed`.
pub fn available_moves(p: &Partition, allowed: MoveSet) -> Vec<CoarseningMove> {
    let k = p.blocks.len();
    let mut out = Vec::new();
    if allowed.contains(MoveKind::DiscardBlock) && k > 1 {
        out.extend((0..k).map(|block| CoarseningMove::DiscardBlock { block }));
    }
    if allowed.contains(MoveKind::MergeBlocks) {
        for first in 0..k {
            for last in first + 1..k {
                out.push(CoarseningMove::MergeBlocks { first, last });
            }
        }
    }
    if allowed.contains(MoveKind::TrimLastBlock) {
        let tail = &p.blocks[k - 1];
        if tail.len() >= 2 {
            out.extend(tail.iter().map(|&label| CoarseningMove::TrimLastBlock { label }));
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoarseningChain {
    pub source: Partition,
    pub target: Partition,
    pub moves: Vec<CoarseningMove>,
}

impl CoarseningChain {
    /// Replays the moves; `Ok(true)` when they lead from source to target.
    pub fn verify(&self) -> Result<bool> {
        let mut cur = self.source.clone();
        for m in &self.moves {
            cur = apply_move(&cur, m)?;
        }
        Ok(cur == self.target)
    }
}

/// Breadth-first search for a chain of `allowed` moves turning `p` into `q`.
/// `p` is trivially coarser than itself (empty chain).
pub fn is_coarser(p: &Partition, q: &Partition, allowed: MoveSet) -> Option<CoarseningChain> {
    let q_labels: BTreeSet<usize> = q.labels().into_iter().collect();
    if !q_labels.iter().all(|&l| p.contains_label(l)) {
        return None;
    }
    let mut parent: HashMap<Partition, (Partition, CoarseningMove)> = HashMap::new();
    let mut queue = VecDeque::from([p.clone()]);
    let mut found = p == q;
    while let Some(cur) = queue.pop_front() {
        if found {
            break;
        }
        for m in available_moves(&cur, allowed) {
            let next = apply_move(&cur, &m).expect("available moves apply");
            // a label of q, once lost, never comes back
            if next == *p || parent.contains_key(&next) || !q_labels.iter().all(|&l| next.contains_label(l)) {
                continue;
            }
            parent.insert(next.clone(), (cur.clone(), m));
            if next == *q {
                found = true;
                break;
            }
            queue.push_back(next);
        }
    }
    if !found {
        return None;
    }
    let mut moves = Vec::new();
    let mut cur = q.clone();
    while cur != *p {
        let (prev, m) = parent.remove(&cur).expect("chain back to the source");
        moves.push(m);
        cur = prev;
    }
    moves.reverse();
    Some(CoarseningChain {
        source: p.clone(),
        target: q.clone(),
        moves,
    })
}

/// All partitions with at least two blocks that are strictly coarser than `p`
/// under `allowed`, in canonical order.
pub fn coarser_set(p: &Partition, allowed: MoveSet) -> Vec<Partition> {
    closure(p, allowed)
        .into_iter()
        .filter(|g| g.n_blocks() >= 2 && g != p)
        .collect()
}

fn closure(p: &Partition, allowed: MoveSet) -> BTreeSet<Partition> {
    let mut seen = BTreeSet::new();
    let mut queue = VecDeque::from([p.clone()]);
    while let Some(cur) = queue.pop_front() {
        for m in available_moves(&cur, allowed) {
            let next = apply_move(&cur, &m).expect("available moves apply");
            if next != *p && seen.insert(next.clone()) {
                queue.push_back(next);
            }
        }
    }
    seen
}

/// `Xi(p - q)` under all moves.
pub fn xi_set(p: &Partition, q: &Partition) -> Result<Vec<Partition>> {
    xi_set_with(p, q, MoveSet::ALL)
}

/// Partitions coarser than `p` (under `allowed`) that do not contain every
/// label of `q`.
pub fn xi_set_with(p: &Partition, q: &Partition, allowed: MoveSet) -> Result<Vec<Partition>> {
    if is_coarser(p, q, allowed).is_none() {
        return Err(invalid_arg(format!("{q} is not coarser than {p}")));
    }
    let q_labels = q.labels();
    Ok(coarser_set(p, allowed)
        .into_iter()
        .filter(|g| !q_labels.iter().all(|&l| g.contains_label(l)))
        .collect())
}
