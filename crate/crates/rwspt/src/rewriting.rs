//! Rewrite rules over systems and the aggregated successor relation.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::multiset::{Bag, BagError};
use crate::net::{self, NetError, Place, System, Transition};
use crate::symmetry::{normalize, SymmetryError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RewriteError {
    #[error("rule {rule}: match {witness} is not applicable")]
    StaleMatch { rule: String, witness: String },
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Bag(#[from] BagError),
    #[error(transparent)]
    Symmetry(#[from] SymmetryError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RuleRate {
    Fixed(f64),
    /// Each match is a transition and fires at that transition's rate.
    PerTransition,
}

/// Witness of one ground instance of a rule.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Match {
    Transition(Transition),
    /// Anchor places chosen by a structural rule, e.g. the place a fault marks.
    Places(Vec<Place>),
}

impl Match {
    pub fn relabel(&self, f: impl FnMut(&Place) -> Place) -> Result<Match, NetError> {
        Ok(match self {
            Match::Transition(t) => Match::Transition(t.relabel(f)?),
            Match::Places(ps) => Match::Places(ps.iter().map(f).collect()),
        })
    }
}

impl fmt::Display for Match {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Match::Transition(t) => write!(f, "{t}"),
            Match::Places(ps) => {
                f.write_str("[")?;
                for (i, p) in ps.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{p}")?;
                }
                f.write_str("]")
            }
        }
    }
}

impl fmt::Debug for Match {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

pub type Matcher = dyn Fn(&System) -> Vec<Match> + Send + Sync;
pub type Transformer = dyn Fn(&System, &Match) -> Result<System, RewriteError> + Send + Sync;

#[derive(Clone)]
pub struct Rule {
    name: Arc<str>,
    rate: RuleRate,
    matcher: Arc<Matcher>,
    transformer: Arc<Transformer>,
}

impl fmt::Debug for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Rule").field("name", &self.name).field("rate", &self.rate).finish()
    }
}

impl Rule {
    pub fn new(
        name: &str,
        rate: RuleRate,
        matcher: impl Fn(&System) -> Vec<Match> + Send + Sync + 'static,
        transformer: impl Fn(&System, &Match) -> Result<System, RewriteError> + Send + Sync + 'static,
    ) -> Rule {
        Rule { name: name.into(), rate, matcher: Arc::new(matcher), transformer: Arc::new(transformer) }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn rate(&self) -> RuleRate {
        self.rate
    }

    pub fn match_rate(&self, m: &Match) -> f64 {
        match (self.rate, m) {
            (RuleRate::Fixed(r), _) => r,
            (RuleRate::PerTransition, Match::Transition(t)) => t.rate,
            (RuleRate::PerTransition, Match::Places(_)) => 0.0,
        }
    }

    /// Edge label: the transition tag for firings, the rule name otherwise.
    pub fn label(&self, m: &Match) -> Arc<str> {
        match (self.rate, m) {
            (RuleRate::PerTransition, Match::Transition(t)) => t.tag.clone(),
            _ => self.name.clone(),
        }
    }
}

/// One match per enabled transition; the transformer fires it.
pub fn firing_rule() -> Rule {
    Rule::new(
        "firing",
        RuleRate::PerTransition,
        |s| net::enabled_transitions(s).into_iter().cloned().map(Match::Transition).collect(),
        |s, m| match m {
            Match::Transition(t) => Ok(net::fire(t, s)?),
            other => Err(RewriteError::StaleMatch { rule: "firing".into(), witness: other.to_string() }),
        },
    )
}

pub fn matches(r: &Rule, s: &System) -> Vec<Match> {
    (r.matcher)(s)
}

pub fn apply(r: &Rule, s: &System, m: &Match) -> Result<System, RewriteError> {
    if !matches(r, s).contains(m) {
        return Err(RewriteError::StaleMatch { rule: r.name.to_string(), witness: m.to_string() });
    }
    (r.transformer)(s, m)
}

/// Applies without re-checking that `m` is current. For engine use on fresh matches.
pub(crate) fn apply_fresh(r: &Rule, s: &System, m: &Match) -> Result<System, RewriteError> {
    (r.transformer)(s, m)
}

/// One rewrite step: which rule, which match, where it leads, how fast.
#[derive(Clone, Debug)]
pub struct Step {
    pub rule: usize,
    pub label: Arc<str>,
    pub rate: f64,
    pub target: System,
}

/// Every (rule, match) instance from `s`, un-normalized, in rule then match order.
pub fn steps(s: &System, rules: &[Rule]) -> Result<Vec<Step>, RewriteError> {
    let mut out = Vec::new();
    for (ri, r) in rules.iter().enumerate() {
        for m in matches(r, s) {
            let target = apply_fresh(r, s, &m)?;
            out.push(Step { rule: ri, label: r.label(&m), rate: r.match_rate(&m), target });
        }
    }
    Ok(out)
}

/// Cumulative rates into one normalized successor.
#[derive(Clone, Debug)]
pub struct Successor {
    pub system: System,
    /// Per edge label, summed in match order.
    pub rates: BTreeMap<Arc<str>, f64>,
    pub total: f64,
}

/// Groups steps by the normal form of their target and sums rates per label.
pub fn successor_distribution(s: &System, rules: &[Rule]) -> Result<Vec<Successor>, RewriteError> {
    let mut out: Vec<Successor> = Vec::new();
    let mut index: HashMap<(Arc<str>, Bag<Place>), usize> = HashMap::new();
    for step in steps(s, rules)? {
        let t = normalize(&step.target)?;
        let key = (t.net.canonical_text().clone(), t.marking.clone());
        let slot = *index.entry(key).or_insert_with(|| {
            out.push(Successor { system: t, rates: BTreeMap::new(), total: 0.0 });
            out.len() - 1
        });
        let succ = &mut out[slot];
        *succ.rates.entry(step.label).or_insert(0.0) += step.rate;
        succ.total += step.rate;
    }
    Ok(out)
}
