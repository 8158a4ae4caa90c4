//! Symmetric labeling, permutable index groups and the normal form of a system.
//!
//! A group is addressed by `(level, context, tag)`: the places whose label has
//! `tag` at `level` (counted from the root) below the pairs `context`. Two
//! indices of a group are interchangeable when swapping them everywhere in the
//! net is an automorphism.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::{Arc, OnceLock};

use dashmap::DashMap;
use thiserror::Error;

use crate::net::{Net, NetError, Pair, Place, System, Transition};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SymmetryError {
    #[error("net labeling is not symmetric")]
    NotSymmetric,
    #[error("systems are built on different nets")]
    NetMismatch,
    #[error(transparent)]
    Net(#[from] NetError),
}

/// Address of a sibling family in the label hierarchy.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GroupKey {
    pub level: usize,
    pub context: Vec<Pair>,
    pub tag: Arc<str>,
}

impl GroupKey {
    fn holds(&self, p: &Place) -> Option<u32> {
        match p.at_level(self.level) {
            Some(pair) if pair.tag == self.tag && p.context(self.level) == self.context.as_slice() => {
                Some(pair.index)
            }
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PermutableGroup {
    pub key: GroupKey,
    pub members: BTreeSet<u32>,
}

impl PermutableGroup {
    pub fn level(&self) -> usize {
        self.key.level
    }
}

/// Per-group index maps, applied simultaneously to every place label.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct IndexPermutation {
    maps: HashMap<GroupKey, BTreeMap<u32, u32>>,
}

impl IndexPermutation {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn swap(key: GroupKey, i: u32, j: u32) -> Self {
        let mut p = Self::new();
        p.set(key, [(i, j), (j, i)].into());
        p
    }

    /// Registers `old -> new` for one group. Unmapped indices stay put.
    pub fn set(&mut self, key: GroupKey, map: BTreeMap<u32, u32>) {
        self.maps.insert(key, map);
    }

    pub fn is_identity(&self) -> bool {
        self.maps.values().all(|m| m.iter().all(|(a, b)| a == b))
    }

    pub fn apply_place(&self, p: &Place) -> Place {
        let mut out: Option<Vec<Pair>> = None;
        for level in 0..p.depth() {
            let pair = p.at_level(level).unwrap();
            let key = GroupKey { level, context: p.context(level).to_vec(), tag: pair.tag.clone() };
            if let Some(&to) = self.maps.get(&key).and_then(|m| m.get(&pair.index)) {
                if to != pair.index {
                    let v = out.get_or_insert_with(|| p.pairs().to_vec());
                    let n = v.len();
                    v[n - 1 - level].index = to;
                }
            }
        }
        match out {
            Some(v) => Place::new(v).expect("relabeling keeps tags"),
            None => p.clone(),
        }
    }

    pub fn apply_net(&self, n: &Net) -> Result<Net, NetError> {
        n.relabel(|p| self.apply_place(p))
    }

    pub fn apply(&self, s: &System) -> Result<System, NetError> {
        if self.is_identity() {
            return Ok(s.clone());
        }
        let net = Arc::new(self.apply_net(&s.net)?);
        let marking = s.marking.map(|p| self.apply_place(p))?;
        Ok(System::new_unchecked(net, marking))
    }
}

/// Sibling families present in a set of places, with the indices that occur.
pub fn hierarchy<'a>(places: impl IntoIterator<Item = &'a Place>) -> BTreeMap<GroupKey, BTreeSet<u32>> {
    let mut out: BTreeMap<GroupKey, BTreeSet<u32>> = BTreeMap::new();
    for p in places {
        for level in 0..p.depth() {
            let pair = p.at_level(level).unwrap();
            let key = GroupKey { level, context: p.context(level).to_vec(), tag: pair.tag.clone() };
            out.entry(key).or_default().insert(pair.index);
        }
    }
    out
}

#[derive(Debug)]
struct Analysis {
    symmetric: bool,
    groups: Vec<PermutableGroup>,
}

fn memo() -> &'static DashMap<Arc<str>, Arc<Analysis>> {
    static MEMO: OnceLock<DashMap<Arc<str>, Arc<Analysis>>> = OnceLock::new();
    MEMO.get_or_init(DashMap::new)
}

fn analysis(n: &Net) -> Arc<Analysis> {
    let key = n.canonical_text().clone();
    if let Some(a) = memo().get(&key) {
        return a.clone();
    }
    let a = Arc::new(analyze(n));
    memo().insert(key, a.clone());
    a
}

/// Multiset of leaf-side tag sequences under one sibling: the "textual component".
fn textual_shape(places: &BTreeSet<Place>, key: &GroupKey, index: u32) -> Vec<Vec<Arc<str>>> {
    let mut shape: Vec<Vec<Arc<str>>> = places
        .iter()
        .filter(|p| key.holds(p) == Some(index))
        .map(|p| p.prefix(key.level).iter().map(|q| q.tag.clone()).collect())
        .collect();
    shape.sort();
    shape
}

fn swap_is_automorphism(n: &Net, key: &GroupKey, i: u32, j: u32) -> bool {
    match IndexPermutation::swap(key.clone(), i, j).apply_net(n) {
        Ok(m) => m == *n,
        Err(_) => false,
    }
}

fn analyze(n: &Net) -> Analysis {
    let places = n.places();
    let mut symmetric = true;
    let mut groups = Vec::new();
    for (key, members) in hierarchy(&places) {
        // split into textually consistent classes, then check swaps against a representative;
        // swap-equivalence is transitive so one representative per class suffices
        let mut classes: BTreeMap<Vec<Vec<Arc<str>>>, Vec<u32>> = BTreeMap::new();
        for &i in &members {
            classes.entry(textual_shape(&places, &key, i)).or_default().push(i);
        }
        for class in classes.into_values() {
            let rep = class[0];
            if class[1..].iter().any(|&j| !swap_is_automorphism(n, &key, rep, j)) {
                symmetric = false;
            }
            groups.push(PermutableGroup { key: key.clone(), members: class.into_iter().collect() });
        }
    }
    groups.sort();
    Analysis { symmetric, groups }
}

pub fn check_symmetric_labeling(n: &Net) -> bool {
    analysis(n).symmetric
}

pub fn permutable_groups(n: &Net) -> Result<Vec<PermutableGroup>, SymmetryError> {
    let a = analysis(n);
    if !a.symmetric {
        return Err(SymmetryError::NotSymmetric);
    }
    Ok(a.groups.clone())
}

const OWN: u32 = u32::MAX;
const SIBLING: u32 = u32::MAX - 1;

/// Sort key of one sibling: its arcs with indices abstracted, then its marking block.
struct Signature {
    arcs: Vec<(Transition, u64)>,
    block: Vec<(Place, u64)>,
}

impl Signature {
    fn of(s: &System, key: &GroupKey, index: u32) -> Signature {
        let abstracted = |p: &Place| match key.holds(p) {
            Some(i) if i == index => p.with_index_at(key.level, OWN),
            Some(_) => p.with_index_at(key.level, SIBLING),
            None => p.clone(),
        };
        let mine = |p: &Place| key.holds(p) == Some(index);
        let mut arcs: Vec<(Transition, u64)> = s
            .net
            .transitions()
            .iter()
            .filter(|t| t.places().any(mine))
            .map(|t| (t.relabel(abstracted).expect("abstraction keeps arcs apart"), t.rate.to_bits()))
            .collect();
        arcs.sort();
        let block = s.marking.iter().filter(|(p, _)| mine(p)).map(|(p, k)| (abstracted(p), k)).collect();
        Signature { arcs, block }
    }

    // A block that ends early ranks after a longer one: in the full marking the
    // next entry would belong to a later sibling, which sorts above every entry here.
    fn cmp(&self, other: &Signature) -> Ordering {
        self.arcs.cmp(&other.arcs).then_with(|| {
            for (a, b) in self.block.iter().zip(&other.block) {
                match a.cmp(b) {
                    Ordering::Equal => {}
                    o => return o,
                }
            }
            other.block.len().cmp(&self.block.len())
        })
    }
}

/// Sibling families of a net in bottom-up processing order.
pub fn normalization_order(n: &Net) -> Vec<GroupKey> {
    let mut keys: Vec<GroupKey> = hierarchy(&n.places()).into_keys().collect();
    keys.sort_by(|a, b| b.level.cmp(&a.level).then_with(|| a.cmp(b)));
    keys
}

/// Sorts the siblings of one family by signature and reindexes them 0..k−1.
fn sort_family(s: &System, key: &GroupKey) -> Result<Option<System>, SymmetryError> {
    let mut members: BTreeSet<u32> = BTreeSet::new();
    for p in s.net.places() {
        if let Some(i) = key.holds(&p) {
            members.insert(i);
        }
    }
    if members.is_empty() {
        return Ok(None);
    }
    let mut order: Vec<u32> = members.iter().copied().collect();
    if order.len() > 1 {
        let sigs: HashMap<u32, Signature> = order.iter().map(|&i| (i, Signature::of(s, key, i))).collect();
        order.sort_by(|a, b| sigs[a].cmp(&sigs[b]).then(a.cmp(b)));
    }
    let map: BTreeMap<u32, u32> = order.iter().enumerate().map(|(rank, &i)| (i, rank as u32)).collect();
    if map.iter().all(|(a, b)| a == b) {
        return Ok(None);
    }
    let mut perm = IndexPermutation::new();
    perm.set(key.clone(), map);
    Ok(Some(perm.apply(s)?))
}

/// Normal form with the families processed in `order`. Every family must come
/// after the families nested inside it.
pub fn normalize_in_order(s: &System, order: &[GroupKey]) -> Result<System, SymmetryError> {
    if !check_symmetric_labeling(&s.net) {
        return Err(SymmetryError::NotSymmetric);
    }
    let mut cur = s.clone();
    for key in order {
        if let Some(next) = sort_family(&cur, key)? {
            cur = next;
        }
    }
    Ok(cur)
}

pub fn normalize(s: &System) -> Result<System, SymmetryError> {
    normalize_in_order(s, &normalization_order(&s.net))
}

pub fn automorphic_equivalent(s1: &System, s2: &System) -> Result<bool, SymmetryError> {
    if s1.net != s2.net {
        return Err(SymmetryError::NetMismatch);
    }
    Ok(normalize(s1)? == normalize(s2)?)
}

/// Structured order used for "lexicographically minimal": the net's canonical
/// text, then the marking as a sequence of (place, multiplicity).
pub fn system_order(a: &System, b: &System) -> Ordering {
    a.net.canonical_text().cmp(b.net.canonical_text()).then_with(|| a.marking.iter().cmp(b.marking.iter()))
}
