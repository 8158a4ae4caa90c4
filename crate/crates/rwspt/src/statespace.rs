//! Ordinary and quotient reachability graphs, the lumped generator, and the
//! strong-lumpability cross-check.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::io;
use std::sync::Arc;

use rayon::prelude::*;
use thiserror::Error;

use crate::multiset::Bag;
use crate::net::{Net, Place, System};
use crate::netio;
use crate::rewriting::{steps, successor_distribution, RewriteError, Rule};
use crate::symmetry::{normalize, SymmetryError};

pub const DEFAULT_LIMIT: usize = 5_000_000;

#[derive(Debug, Error)]
pub enum StatespaceError {
    #[error("state limit {limit} exceeded after {} states", partial.states.len())]
    LimitExceeded { limit: usize, partial: Box<TransitionSystem> },
    #[error("state {0} of the ordinary graph has no class in the quotient")]
    PartitionMismatch(usize),
    #[error(transparent)]
    Rewrite(#[from] RewriteError),
    #[error(transparent)]
    Symmetry(#[from] SymmetryError),
    #[error("could not build thread pool: {0}")]
    Threads(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub source: usize,
    pub target: usize,
    pub label: Arc<str>,
    pub rate: f64,
}

#[derive(Debug, Clone)]
pub struct TransitionSystem {
    pub states: Vec<System>,
    pub initial: usize,
    pub edges: Vec<Edge>,
    pub finals: Vec<usize>,
}

impl TransitionSystem {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// `states: 295 (final: 2)`
    pub fn summary(&self) -> String {
        format!("states: {} (final: {})", self.states.len(), self.finals.len())
    }

    fn close(mut self) -> Self {
        let mut out = vec![0usize; self.states.len()];
        for e in &self.edges {
            out[e.source] += 1;
        }
        self.finals = (0..self.states.len()).filter(|&i| out[i] == 0).collect();
        self
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ExploreOptions {
    pub limit: usize,
    /// Worker threads for frontier expansion; `None` uses the global pool.
    pub threads: Option<usize>,
}

impl Default for ExploreOptions {
    fn default() -> Self {
        ExploreOptions { limit: DEFAULT_LIMIT, threads: None }
    }
}

type StateKey = (Arc<str>, Bag<Place>);

fn key_of(s: &System) -> StateKey {
    (s.net.canonical_text().clone(), s.marking.clone())
}

type Expansion = Vec<(System, Arc<str>, f64)>;

/// Level-synchronous BFS. Frontier states expand in parallel; results merge in
/// frontier order, so numbering is the sequential BFS discovery order.
fn explore<F>(s0: System, opts: ExploreOptions, expand: F) -> Result<TransitionSystem, StatespaceError>
where
    F: Fn(&System) -> Result<Expansion, StatespaceError> + Sync,
{
    let pool = match opts.threads {
        Some(n) => Some(
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| StatespaceError::Threads(e.to_string()))?,
        ),
        None => None,
    };
    let mut nets: HashMap<Arc<str>, Arc<Net>> = HashMap::new();
    let mut index: HashMap<StateKey, usize> = HashMap::new();
    let mut ts = TransitionSystem { states: Vec::new(), initial: 0, edges: Vec::new(), finals: Vec::new() };

    let mut intern = |s: System, ts: &mut TransitionSystem, fresh: &mut Vec<usize>| -> Option<usize> {
        let key = key_of(&s);
        if let Some(&i) = index.get(&key) {
            return Some(i);
        }
        if ts.states.len() >= opts.limit {
            return None;
        }
        let net = nets.entry(key.0.clone()).or_insert_with(|| s.net.clone()).clone();
        let i = ts.states.len();
        ts.states.push(System::new_unchecked(net, s.marking));
        index.insert(key, i);
        fresh.push(i);
        Some(i)
    };

    let mut frontier = Vec::new();
    if intern(s0, &mut ts, &mut frontier).is_none() {
        return Err(StatespaceError::LimitExceeded { limit: opts.limit, partial: Box::new(ts.close()) });
    }
    while !frontier.is_empty() {
        let work = || -> Vec<Result<Expansion, StatespaceError>> {
            frontier.par_iter().map(|&i| expand(&ts.states[i])).collect()
        };
        let results = match &pool {
            Some(p) => p.install(work),
            None => work(),
        };
        let mut next = Vec::new();
        for (&src, res) in frontier.iter().zip(results) {
            for (t, label, rate) in res? {
                let Some(dst) = intern(t, &mut ts, &mut next) else {
                    return Err(StatespaceError::LimitExceeded { limit: opts.limit, partial: Box::new(ts.close()) });
                };
                ts.edges.push(Edge { source: src, target: dst, label, rate });
            }
        }
        frontier = next;
    }
    Ok(ts.close())
}

/// Every (rule, match) is its own edge; states are not normalized.
pub fn build_ordinary(s0: &System, rules: &[Rule], opts: ExploreOptions) -> Result<TransitionSystem, StatespaceError> {
    explore(s0.clone(), opts, |s| {
        Ok(steps(s, rules)?.into_iter().map(|st| (st.target, st.label, st.rate)).collect())
    })
}

/// BFS over normal forms; one edge per (successor class, label) with the summed rate.
pub fn build_quotient(
    s0: &System,
    rules: &[Rule],
    opts: ExploreOptions,
) -> Result<(TransitionSystem, LumpedCtmc), StatespaceError> {
    let start = normalize(s0)?;
    let ts = explore(start, opts, |s| {
        let mut out = Vec::new();
        for succ in successor_distribution(s, rules)? {
            for (label, rate) in succ.rates {
                out.push((succ.system.clone(), label, rate));
            }
        }
        Ok(out)
    })?;
    let ctmc = LumpedCtmc::from_transition_system(&ts);
    Ok((ts, ctmc))
}

/// Generator of the lumped chain. Self-loops are dropped.
#[derive(Debug, Clone)]
pub struct LumpedCtmc {
    pub states: Vec<System>,
    /// Labeled off-diagonal edges, kept for throughput measures.
    pub edges: Vec<Edge>,
    rows: Vec<Vec<(usize, f64)>>,
    diag: Vec<f64>,
    pub initial: Vec<f64>,
}

impl LumpedCtmc {
    pub fn from_transition_system(ts: &TransitionSystem) -> LumpedCtmc {
        let mut init = vec![0.0; ts.states.len()];
        if !init.is_empty() {
            init[ts.initial] = 1.0;
        }
        let mut c = LumpedCtmc::from_edges(ts.states.len(), ts.edges.clone(), init);
        c.states = ts.states.clone();
        c
    }

    /// A chain over `n` anonymous states.
    pub fn from_edges(n: usize, edges: Vec<Edge>, initial: Vec<f64>) -> LumpedCtmc {
        let edges: Vec<Edge> = edges.into_iter().filter(|e| e.source != e.target).collect();
        let mut acc: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); n];
        for e in &edges {
            *acc[e.source].entry(e.target).or_insert(0.0) += e.rate;
        }
        let rows: Vec<Vec<(usize, f64)>> = acc.into_iter().map(|m| m.into_iter().collect()).collect();
        let diag = rows.iter().map(|r| -r.iter().map(|(_, q)| q).sum::<f64>()).collect();
        LumpedCtmc { states: Vec::new(), edges, rows, diag, initial }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Off-diagonal entries of row `i`, ascending by column.
    pub fn row(&self, i: usize) -> &[(usize, f64)] {
        &self.rows[i]
    }

    pub fn diagonal(&self, i: usize) -> f64 {
        self.diag[i]
    }

    pub fn q(&self, i: usize, j: usize) -> f64 {
        if i == j {
            return self.diag[i];
        }
        self.rows[i].iter().find(|(c, _)| *c == j).map_or(0.0, |(_, q)| *q)
    }

    pub fn is_absorbing(&self, i: usize) -> bool {
        self.rows[i].is_empty()
    }

    pub fn absorbing_states(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.is_absorbing(i)).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub state: usize,
    pub class: usize,
    pub target_class: usize,
    pub ordinary_rate: f64,
    pub quotient_rate: f64,
}

#[derive(Debug, Clone, Default)]
pub struct LumpingReport {
    pub states: usize,
    pub classes: usize,
    pub violations: Vec<Violation>,
}

impl LumpingReport {
    pub fn is_verified(&self) -> bool {
        self.violations.is_empty()
    }
}

pub const LUMPING_RTOL: f64 = 1e-9;

fn close_enough(a: f64, b: f64) -> bool {
    (a - b).abs() <= LUMPING_RTOL * a.abs().max(b.abs())
}

/// Checks that every ordinary state's cumulative rate into each other class
/// equals the quotient rate of its own class.
pub fn verify_lumping(ordinary: &TransitionSystem, quotient: &LumpedCtmc) -> Result<LumpingReport, StatespaceError> {
    let lookup: HashMap<StateKey, usize> =
        quotient.states.iter().enumerate().map(|(i, s)| (key_of(s), i)).collect();
    let class: Vec<Option<usize>> = ordinary
        .states
        .par_iter()
        .map(|s| normalize(s).map(|n| lookup.get(&key_of(&n)).copied()))
        .collect::<Result<_, _>>()?;
    let class: Vec<usize> = class
        .into_iter()
        .enumerate()
        .map(|(i, c)| c.ok_or(StatespaceError::PartitionMismatch(i)))
        .collect::<Result<_, _>>()?;

    let mut out: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); ordinary.states.len()];
    for e in &ordinary.edges {
        let (c, d) = (class[e.source], class[e.target]);
        if c != d {
            *out[e.source].entry(d).or_insert(0.0) += e.rate;
        }
    }
    let mut report = LumpingReport { states: ordinary.states.len(), classes: quotient.len(), violations: Vec::new() };
    for (i, rates) in out.iter().enumerate() {
        let c = class[i];
        let mut targets: Vec<usize> = rates.keys().copied().collect();
        targets.extend(quotient.row(c).iter().map(|(j, _)| *j));
        targets.sort_unstable();
        targets.dedup();
        for d in targets {
            let o = rates.get(&d).copied().unwrap_or(0.0);
            let q = quotient.q(c, d);
            if !close_enough(o, q) {
                report.violations.push(Violation {
                    state: i,
                    class: c,
                    target_class: d,
                    ordinary_rate: o,
                    quotient_rate: q,
                });
            }
        }
    }
    Ok(report)
}

fn token_summary(m: &Bag<Place>) -> String {
    if m.is_empty() {
        return "empty".into();
    }
    let mut s = String::new();
    for (i, (p, k)) in m.iter().enumerate() {
        if i > 0 {
            s.push(' ');
        }
        let _ = write!(s, "{k}·");
        for (j, pair) in p.pairs().iter().enumerate() {
            if j > 0 {
                s.push('.');
            }
            let _ = write!(s, "{}{}", pair.tag, pair.index);
        }
    }
    s
}

fn dot_escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

pub fn export_dot(ts: &TransitionSystem) -> String {
    let mut out = String::from("digraph ts {\n  node [shape=box];\n");
    for (i, s) in ts.states.iter().enumerate() {
        let shape = if ts.finals.binary_search(&i).is_ok() { ", peripheries=2" } else { "" };
        let _ = writeln!(out, "  s{i} [label=\"{i}\\n{}\"{shape}];", dot_escape(&token_summary(&s.marking)));
    }
    for e in &ts.edges {
        let _ = writeln!(
            out,
            "  s{} -> s{} [label=\"{}/{}\"];",
            e.source,
            e.target,
            dot_escape(&e.label),
            netio::format_rate(e.rate)
        );
    }
    out.push_str("}\n");
    out
}

/// `index,state,is_final` with the serialized system on one line.
pub fn write_states_csv<W: io::Write>(ts: &TransitionSystem, w: W) -> csv::Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["index", "state", "is_final"])?;
    for (i, s) in ts.states.iter().enumerate() {
        let line = netio::serialize_system(s).split_whitespace().collect::<Vec<_>>().join(" ");
        let fin = ts.finals.binary_search(&i).is_ok();
        wr.write_record([i.to_string(), line, fin.to_string()])?;
    }
    wr.flush()?;
    Ok(())
}

pub fn write_edges_csv<W: io::Write>(ts: &TransitionSystem, w: W) -> csv::Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["source", "target", "label", "rate"])?;
    for e in &ts.edges {
        wr.write_record([e.source.to_string(), e.target.to_string(), e.label.to_string(), netio::format_rate(e.rate)])?;
    }
    wr.flush()?;
    Ok(())
}

/// Nonzero generator entries, diagonal included.
pub fn write_generator_csv<W: io::Write>(c: &LumpedCtmc, w: W) -> csv::Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["source", "target", "rate"])?;
    for i in 0..c.len() {
        let mut row: Vec<(usize, f64)> = c.row(i).to_vec();
        if c.diagonal(i) != 0.0 {
            row.push((i, c.diagonal(i)));
            row.sort_by_key(|(j, _)| *j);
        }
        for (j, q) in row {
            wr.write_record([i.to_string(), j.to_string(), netio::format_rate(q)])?;
        }
    }
    wr.flush()?;
    Ok(())
}
