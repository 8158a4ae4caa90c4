//! Places with composite labels, transitions, nets and systems.

use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::sync::{Arc, OnceLock};

use thiserror::Error;

use crate::multiset::{Bag, BagError};
use crate::netio;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NetError {
    #[error("place label must be a nonempty sequence of pairs with nonempty tags")]
    BadLabel,
    #[error("rate must be positive and finite, got {0}")]
    BadRate(f64),
    #[error("duplicate transition {0}")]
    DuplicateTransition(String),
    #[error("transition does not belong to the net: {0}")]
    UnknownTransition(String),
    #[error("transition not enabled: {0}")]
    NotEnabled(String),
    #[error("marked place {0} does not occur in the net")]
    StrayPlace(String),
    #[error(transparent)]
    Bag(#[from] BagError),
}

/// One `<tag; index>` component of a label.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Pair {
    pub tag: Arc<str>,
    pub index: u32,
}

impl Pair {
    pub fn new(tag: impl Into<Arc<str>>, index: u32) -> Self {
        Pair { tag: tag.into(), index }
    }
}

/// A place, identified by its label. The last pair is the hierarchy root.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Place(Arc<[Pair]>);

impl Place {
    pub fn new(pairs: Vec<Pair>) -> Result<Place, NetError> {
        if pairs.is_empty() || pairs.iter().any(|p| p.tag.is_empty()) {
            return Err(NetError::BadLabel);
        }
        Ok(Place(pairs.into()))
    }

    /// Single-pair place; panics on an empty tag.
    pub fn leaf(tag: &str, index: u32) -> Place {
        Place::new(vec![Pair::new(tag, index)]).expect("nonempty tag")
    }

    /// Builds a place from `(tag, index)` pairs given leaf first; panics on bad input.
    pub fn of(pairs: &[(&str, u32)]) -> Place {
        Place::new(pairs.iter().map(|&(t, i)| Pair::new(t, i)).collect()).expect("valid label")
    }

    pub fn pairs(&self) -> &[Pair] {
        &self.0
    }

    pub fn depth(&self) -> usize {
        self.0.len()
    }

    /// Appends a pair at the root end.
    pub fn with_root(&self, tag: &Arc<str>, index: u32) -> Place {
        let mut v = self.0.to_vec();
        v.push(Pair { tag: tag.clone(), index });
        Place(v.into())
    }

    /// The pair at `level`, counted from the root (level 0 is the last pair).
    pub fn at_level(&self, level: usize) -> Option<&Pair> {
        let n = self.0.len();
        (level < n).then(|| &self.0[n - 1 - level])
    }

    /// The `level` pairs on the root side of position `level`.
    pub fn context(&self, level: usize) -> &[Pair] {
        let n = self.0.len();
        &self.0[n - level.min(n)..]
    }

    /// Pairs on the leaf side of position `level`.
    pub fn prefix(&self, level: usize) -> &[Pair] {
        let n = self.0.len();
        &self.0[..n.saturating_sub(level + 1)]
    }

    /// Copy with the index at `level` replaced.
    pub fn with_index_at(&self, level: usize, index: u32) -> Place {
        let n = self.0.len();
        let mut v = self.0.to_vec();
        v[n - 1 - level].index = index;
        Place(v.into())
    }

    /// True when the place sits under `context` with `tag` at `level`.
    pub fn is_under(&self, level: usize, context: &[Pair], tag: &str) -> bool {
        match self.at_level(level) {
            Some(p) => &*p.tag == tag && self.context(level) == context,
            None => false,
        }
    }
}

impl Ord for Place {
    // Right to left: the root pair decides first.
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.iter().rev().cmp(other.0.iter().rev())
    }
}

impl PartialOrd for Place {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Place {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("p(")?;
        for (i, p) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "< {} ; {} >", netio::quote(&p.tag), p.index)?;
        }
        f.write_str(")")
    }
}

impl fmt::Debug for Place {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// `[I, O, H] |-> << tag, rate >>`. Identity ignores the rate.
#[derive(Clone)]
pub struct Transition {
    pub input: Bag<Place>,
    pub output: Bag<Place>,
    pub inhibitor: Bag<Place>,
    pub tag: Arc<str>,
    pub rate: f64,
}

impl Transition {
    pub fn new(
        input: Bag<Place>,
        output: Bag<Place>,
        inhibitor: Bag<Place>,
        tag: impl Into<Arc<str>>,
        rate: f64,
    ) -> Result<Transition, NetError> {
        if !(rate > 0.0 && rate.is_finite()) {
            return Err(NetError::BadRate(rate));
        }
        Ok(Transition { input, output, inhibitor, tag: tag.into(), rate })
    }

    pub fn places(&self) -> impl Iterator<Item = &Place> + '_ {
        self.input.elements().chain(self.output.elements()).chain(self.inhibitor.elements())
    }

    pub fn touches(&self, p: &Place) -> bool {
        self.input.contains(p) || self.output.contains(p) || self.inhibitor.contains(p)
    }

    /// Enabling test against a bare marking.
    pub fn enabled_in(&self, m: &Bag<Place>) -> bool {
        self.input.leq(m) && self.inhibitor.iter().all(|(p, h)| m.multiplicity(p) < h)
    }

    /// Relabels every arc; arcs that collide are summed.
    pub fn relabel(&self, mut f: impl FnMut(&Place) -> Place) -> Result<Transition, NetError> {
        Ok(Transition {
            input: self.input.map(&mut f)?,
            output: self.output.map(&mut f)?,
            inhibitor: self.inhibitor.map(&mut f)?,
            tag: self.tag.clone(),
            rate: self.rate,
        })
    }

    fn identity(&self) -> (&Bag<Place>, &Bag<Place>, &Bag<Place>, &str) {
        (&self.input, &self.output, &self.inhibitor, &self.tag)
    }
}

impl PartialEq for Transition {
    fn eq(&self, other: &Self) -> bool {
        self.identity() == other.identity()
    }
}

impl Eq for Transition {}

impl Hash for Transition {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.identity().hash(state)
    }
}

impl Ord for Transition {
    fn cmp(&self, other: &Self) -> Ordering {
        (&*self.tag, &self.input, &self.output, &self.inhibitor).cmp(&(
            &*other.tag,
            &other.input,
            &other.output,
            &other.inhibitor,
        ))
    }
}

impl PartialOrd for Transition {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Transition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "[{}, {}, {}] |-> << {}, {} >>",
            self.input,
            self.output,
            self.inhibitor,
            netio::quote(&self.tag),
            netio::format_rate(self.rate)
        )
    }
}

impl fmt::Debug for Transition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// A net: a sequence of transitions. Equality and hashing ignore transition order
/// but include rates.
#[derive(Default)]
pub struct Net {
    transitions: Vec<Transition>,
    canon: OnceLock<Arc<str>>,
}

impl Clone for Net {
    fn clone(&self) -> Self {
        Net { transitions: self.transitions.clone(), canon: self.canon.clone() }
    }
}

impl Net {
    pub fn new(transitions: Vec<Transition>) -> Result<Net, NetError> {
        let mut seen = std::collections::HashSet::with_capacity(transitions.len());
        for t in &transitions {
            if !seen.insert(t) {
                return Err(NetError::DuplicateTransition(t.to_string()));
            }
        }
        Ok(Net { transitions, canon: OnceLock::new() })
    }

    pub fn empty() -> Net {
        Net::default()
    }

    pub fn transitions(&self) -> &[Transition] {
        &self.transitions
    }

    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }

    pub fn places(&self) -> BTreeSet<Place> {
        self.transitions.iter().flat_map(|t| t.places().cloned()).collect()
    }

    pub fn contains(&self, t: &Transition) -> bool {
        self.transitions.iter().any(|u| u == t)
    }

    /// Order-insensitive text of the transitions (sorted by tag, then arc text).
    pub fn canonical_text(&self) -> &Arc<str> {
        self.canon.get_or_init(|| netio::serialize_transitions_sorted(&self.transitions).into())
    }

    /// Applies a place bijection (or merge) to every arc.
    pub fn relabel(&self, mut f: impl FnMut(&Place) -> Place) -> Result<Net, NetError> {
        let ts = self
            .transitions
            .iter()
            .map(|t| t.relabel(&mut f))
            .collect::<Result<Vec<_>, _>>()?;
        Net::new(ts)
    }
}

impl PartialEq for Net {
    fn eq(&self, other: &Self) -> bool {
        self.transitions.len() == other.transitions.len()
            && self.canonical_text() == other.canonical_text()
    }
}

impl Eq for Net {}

impl Hash for Net {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.canonical_text().hash(state)
    }
}

impl fmt::Debug for Net {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(&self.transitions).finish()
    }
}

/// A net paired with a marking.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct System {
    pub net: Arc<Net>,
    pub marking: Bag<Place>,
}

impl System {
    /// Checks that every marked place occurs in the net.
    pub fn new(net: Arc<Net>, marking: Bag<Place>) -> Result<System, NetError> {
        if !marking.is_empty() {
            let places = net.places();
            if let Some(p) = marking.elements().find(|p| !places.contains(*p)) {
                return Err(NetError::StrayPlace(p.to_string()));
            }
        }
        Ok(System { net, marking })
    }

    /// Skips the marking check; callers guarantee the invariant.
    pub(crate) fn new_unchecked(net: Arc<Net>, marking: Bag<Place>) -> System {
        System { net, marking }
    }

    pub fn with_marking(&self, marking: Bag<Place>) -> System {
        System { net: self.net.clone(), marking }
    }
}

impl fmt::Debug for System {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&netio::serialize_system(self))
    }
}

pub fn places(n: &Net) -> BTreeSet<Place> {
    n.places()
}

pub fn enabled(t: &Transition, s: &System) -> Result<bool, NetError> {
    if !s.net.contains(t) {
        return Err(NetError::UnknownTransition(t.to_string()));
    }
    Ok(t.enabled_in(&s.marking))
}

pub fn fire(t: &Transition, s: &System) -> Result<System, NetError> {
    if !enabled(t, s)? {
        return Err(NetError::NotEnabled(t.to_string()));
    }
    Ok(s.with_marking(fire_unchecked(t, &s.marking)?))
}

/// m − I + O without the membership and enabling checks.
pub fn fire_unchecked(t: &Transition, m: &Bag<Place>) -> Result<Bag<Place>, NetError> {
    Ok(m.subtract(&t.input)?.add(&t.output)?)
}

pub fn enabled_transitions(s: &System) -> Vec<&Transition> {
    s.net.transitions().iter().filter(|t| t.enabled_in(&s.marking)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(tag: &str, i: u32) -> Place {
        Place::leaf(tag, i)
    }

    fn bag(items: &[(Place, u64)]) -> Bag<Place> {
        Bag::from_pairs(items.iter().cloned()).unwrap()
    }

    fn ld() -> Transition {
        Transition::new(
            bag(&[(p("s", 0), 2)]),
            bag(&[(p("w", 0), 1), (p("w", 1), 1)]),
            Bag::new(),
            "ld",
            0.5,
        )
        .unwrap()
    }

    fn ln() -> Transition {
        Transition::new(bag(&[(p("w", 0), 1)]), bag(&[(p("a", 0), 1)]), bag(&[(p("f", 0), 1)]), "ln", 0.1)
            .unwrap()
    }

    fn listing() -> Arc<Net> {
        Arc::new(Net::new(vec![ld(), ln()]).unwrap())
    }

    #[test]
    fn place_order_is_root_first() {
        let a = Place::of(&[("z", 0), ("L", 0)]);
        let b = Place::of(&[("a", 0), ("L", 1)]);
        assert!(a < b);
        assert!(p("a", 0) < p("a", 1));
        assert!(p("a", 3) < p("b", 0));
        assert!(p("L", 0) < Place::of(&[("a", 0), ("L", 0)]));
    }

    #[test]
    fn places_of_ld() {
        let n = Net::new(vec![ld()]).unwrap();
        let ps: Vec<_> = n.places().into_iter().collect();
        assert_eq!(ps, vec![p("s", 0), p("w", 0), p("w", 1)]);
        let empty = Net::new(vec![Transition::new(Bag::new(), Bag::new(), Bag::new(), "t", 1.0).unwrap()]).unwrap();
        assert!(empty.places().is_empty());
        assert_eq!(listing().places().len(), 5);
    }

    #[test]
    fn enabling_and_firing_follow_the_listing() {
        let net = listing();
        let s = System::new(net.clone(), bag(&[(p("s", 0), 2)])).unwrap();
        assert!(enabled(&ld(), &s).unwrap());
        let s1 = fire(&ld(), &s).unwrap();
        assert_eq!(s1.marking, bag(&[(p("w", 0), 1), (p("w", 1), 1)]));

        let inhibited = System::new(net.clone(), bag(&[(p("w", 0), 1), (p("f", 0), 1)])).unwrap();
        assert!(!enabled(&ln(), &inhibited).unwrap());
        let short = System::new(net.clone(), bag(&[(p("s", 0), 1)])).unwrap();
        assert!(!enabled(&ld(), &short).unwrap());
        assert!(matches!(fire(&ld(), &short), Err(NetError::NotEnabled(_))));

        let w = System::new(net.clone(), bag(&[(p("w", 0), 1)])).unwrap();
        assert_eq!(fire(&ln(), &w).unwrap().marking, bag(&[(p("a", 0), 1)]));
        assert_eq!(enabled_transitions(&w), vec![&ln()]);
        assert_eq!(enabled_transitions(&s), vec![&ld()]);
    }

    #[test]
    fn self_loop_keeps_marking() {
        let t = Transition::new(bag(&[(p("x", 0), 1)]), bag(&[(p("x", 0), 1)]), Bag::new(), "loop", 2.0).unwrap();
        let s = System::new(Arc::new(Net::new(vec![t.clone()]).unwrap()), bag(&[(p("x", 0), 3)])).unwrap();
        assert_eq!(fire(&t, &s).unwrap(), s);
    }

    #[test]
    fn unknown_transition_is_rejected() {
        let s = System::new(Arc::new(Net::new(vec![ld()]).unwrap()), Bag::new()).unwrap();
        assert!(matches!(enabled(&ln(), &s), Err(NetError::UnknownTransition(_))));
    }

    #[test]
    fn net_invariants() {
        assert!(matches!(Net::new(vec![ld(), ld()]), Err(NetError::DuplicateTransition(_))));
        let mut faster = ld();
        faster.rate = 0.7;
        assert!(Net::new(vec![ld(), faster]).is_err());
        assert!(Transition::new(Bag::new(), Bag::new(), Bag::new(), "t", 0.0).is_err());
        assert!(Transition::new(Bag::new(), Bag::new(), Bag::new(), "t", f64::NAN).is_err());
        assert_eq!(Net::new(vec![ld(), ln()]).unwrap(), Net::new(vec![ln(), ld()]).unwrap());
        assert!(Place::new(vec![]).is_err());
        assert!(System::new(listing(), bag(&[(p("q", 0), 1)])).is_err());
    }
}
