//! The gracefully degrading production line NPLsys(N, K, M).
//!
//! Places: the shared warehouse `p(<"W";0>)`, and per robot `r` of line `l`
//! the places `p(<x;0><"R";r><"L";l>)` for x = `w` (loaded), `a` (processed),
//! `f` (fault flag). Per line, `ld` moves K items from the warehouse to the
//! robots, each robot's `ln` processes one item unless its fault flag is set,
//! and `asm` returns K processed items to the warehouse.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use thiserror::Error;

use crate::algebra::{juxtapose, replicate, AlgebraError};
use crate::multiset::Bag;
use crate::net::{Net, NetError, Place, System, Transition};
use crate::rewriting::{firing_rule, Match, RewriteError, Rule, RuleRate};
use crate::symmetry::{check_symmetric_labeling, GroupKey, IndexPermutation};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Algebra(#[from] AlgebraError),
    #[error(transparent)]
    Net(#[from] NetError),
    #[error("constructed net is not symmetrically labeled")]
    NotSymmetric,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rates {
    pub load: f64,
    pub process: f64,
    pub assemble: f64,
    pub fault: f64,
    pub reconfigure: f64,
    pub disconnect: f64,
}

impl Default for Rates {
    fn default() -> Self {
        Rates { load: 0.5, process: 0.1, assemble: 0.2, fault: 0.001, reconfigure: 0.01, disconnect: 0.01 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlConfig {
    pub n: u32,
    pub k: u32,
    pub m: u32,
    pub rates: Rates,
}

impl Default for PlConfig {
    fn default() -> Self {
        PlConfig { n: 1, k: 2, m: 2, rates: Rates::default() }
    }
}

impl PlConfig {
    pub fn new(n: u32, k: u32, m: u32) -> PlConfig {
        PlConfig { n, k, m, rates: Rates::default() }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        for (name, v) in [("N", self.n), ("K", self.k), ("M", self.m)] {
            if v == 0 {
                return Err(ModelError::Config(format!("{name} must be at least 1")));
            }
        }
        let r = &self.rates;
        for (name, v) in [
            ("load", r.load),
            ("process", r.process),
            ("assemble", r.assemble),
            ("fault", r.fault),
            ("reconfigure", r.reconfigure),
            ("disconnect", r.disconnect),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(ModelError::Config(format!("rate {name} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    /// Sets one parameter by name: N, K, M or a rate name.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ModelError> {
        let bad = || ModelError::Config(format!("bad value {value:?} for {key}"));
        let int = || value.trim().parse::<u32>().map_err(|_| bad());
        let real = || value.trim().parse::<f64>().map_err(|_| bad());
        match key.trim() {
            "N" => self.n = int()?,
            "K" => self.k = int()?,
            "M" => self.m = int()?,
            "load" => self.rates.load = real()?,
            "process" => self.rates.process = real()?,
            "assemble" => self.rates.assemble = real()?,
            "fault" => self.rates.fault = real()?,
            "reconfigure" => self.rates.reconfigure = real()?,
            "disconnect" => self.rates.disconnect = real()?,
            other => return Err(ModelError::Config(format!("unknown parameter {other:?}"))),
        }
        Ok(())
    }

    /// `N=2,K=2,M=2,fault=0.002`
    pub fn apply_params(&mut self, params: &str) -> Result<(), ModelError> {
        for item in params.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let (k, v) = item
                .split_once('=')
                .ok_or_else(|| ModelError::Config(format!("expected key=value, got {item:?}")))?;
            self.set(k, v)?;
        }
        Ok(())
    }

    /// `key = value` lines; `#` starts a comment.
    pub fn apply_config_text(&mut self, text: &str) -> Result<(), ModelError> {
        for line in text.lines() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| ModelError::Config(format!("expected key = value, got {line:?}")))?;
            self.set(k, v)?;
        }
        Ok(())
    }
}

pub const WAREHOUSE: &str = "W";

pub fn warehouse() -> Place {
    Place::leaf(WAREHOUSE, 0)
}

pub fn robot_place(kind: &str, robot: u32, line: u32) -> Place {
    Place::of(&[(kind, 0), ("R", robot), ("L", line)])
}

fn arc(pairs: impl IntoIterator<Item = (Place, u64)>) -> Bag<Place> {
    Bag::from_pairs(pairs).expect("small multiplicities")
}

/// One robot: `[1·w, 1·a, 1·f] |-> << "ln", process >>`.
pub fn robot_net(cfg: &PlConfig) -> Result<Net, ModelError> {
    let ln = Transition::new(
        arc([(Place::leaf("w", 0), 1)]),
        arc([(Place::leaf("a", 0), 1)]),
        arc([(Place::leaf("f", 0), 1)]),
        "ln",
        cfg.rates.process,
    )?;
    Ok(Net::new(vec![ln])?)
}

/// K robots plus the line's `ld` and `asm`, before line prefixing.
pub fn line_net(cfg: &PlConfig) -> Result<Net, ModelError> {
    let robots = replicate(&robot_net(cfg)?, "R", cfg.k, &BTreeSet::new())?;
    let k = cfg.k as u64;
    let each = |kind: &str| arc((0..cfg.k).map(|r| (Place::of(&[(kind, 0), ("R", r)]), 1)));
    let ld = Transition::new(arc([(warehouse(), k)]), each("w"), Bag::new(), "ld", cfg.rates.load)?;
    let asm = Transition::new(each("a"), arc([(warehouse(), k)]), Bag::new(), "asm", cfg.rates.assemble)?;
    Ok(juxtapose(&robots, &Net::new(vec![ld, asm])?)?)
}

pub fn build_nplsys(cfg: &PlConfig) -> Result<System, ModelError> {
    cfg.validate()?;
    let shared: BTreeSet<Place> = [warehouse()].into();
    let net = replicate(&line_net(cfg)?, "L", cfg.n, &shared)?;
    if !check_symmetric_labeling(&net) {
        return Err(ModelError::NotSymmetric);
    }
    let items = cfg.k as u64 * cfg.m as u64;
    Ok(System::new(Arc::new(net), arc([(warehouse(), items)]))?)
}

#[derive(Debug, Clone)]
pub struct RobotView {
    pub index: u32,
    pub faulted: bool,
}

#[derive(Debug, Clone)]
pub struct LineView {
    pub index: u32,
    pub robots: Vec<RobotView>,
}

impl LineView {
    pub fn faulted(&self) -> impl Iterator<Item = &RobotView> + '_ {
        self.robots.iter().filter(|r| r.faulted)
    }

    pub fn healthy(&self) -> impl Iterator<Item = &RobotView> + '_ {
        self.robots.iter().filter(|r| !r.faulted)
    }
}

fn robot_coords(p: &Place) -> Option<(u32, u32)> {
    match p.pairs() {
        [_, r, l] if &*r.tag == "R" && &*l.tag == "L" => Some((r.index, l.index)),
        _ => None,
    }
}

/// Lines and robots present in the net, ascending by index.
pub fn lines(s: &System) -> Vec<LineView> {
    let mut by_line: BTreeMap<u32, BTreeSet<u32>> = BTreeMap::new();
    for p in s.net.places() {
        if let Some((r, l)) = robot_coords(&p) {
            by_line.entry(l).or_default().insert(r);
        }
    }
    by_line
        .into_iter()
        .map(|(l, rs)| LineView {
            index: l,
            robots: rs
                .into_iter()
                .map(|r| RobotView { index: r, faulted: s.marking.multiplicity(&robot_place("f", r, l)) > 0 })
                .collect(),
        })
        .collect()
}

fn stale(rule: &str, m: &Match) -> RewriteError {
    RewriteError::StaleMatch { rule: rule.into(), witness: m.to_string() }
}

fn anchors(rule: &str, m: &Match, n: usize) -> Result<Vec<(u32, u32)>, RewriteError> {
    match m {
        Match::Places(ps) if ps.len() == n => {
            ps.iter().map(|p| robot_coords(p).ok_or_else(|| stale(rule, m))).collect()
        }
        _ => Err(stale(rule, m)),
    }
}

fn line_key() -> GroupKey {
    GroupKey { level: 0, context: vec![], tag: "L".into() }
}

fn robot_key(line: u32) -> GroupKey {
    GroupKey { level: 1, context: Place::leaf("L", line).pairs().to_vec(), tag: "R".into() }
}

/// A healthy robot becomes faulted, in lines with no pending fault.
pub fn fault_rule(cfg: &PlConfig) -> Rule {
    Rule::new(
        "fault",
        RuleRate::Fixed(cfg.rates.fault),
        |s| {
            let mut out = Vec::new();
            for line in lines(s) {
                if line.faulted().next().is_none() {
                    for r in &line.robots {
                        out.push(Match::Places(vec![robot_place("f", r.index, line.index)]));
                    }
                }
            }
            out
        },
        |s, m| {
            let (r, l) = anchors("fault", m, 1)?[0];
            let mut marking = s.marking.clone();
            marking.insert(robot_place("f", r, l), 1)?;
            Ok(s.with_marking(marking))
        },
    )
}

/// In an intact line, drops the faulted robot and hands its arcs and items to a
/// survivor; survivors are renumbered from 0 and degraded lines are kept at the
/// lowest line indices.
pub fn reconfigure_rule(cfg: &PlConfig) -> Rule {
    let k = cfg.k as usize;
    Rule::new(
        "reconfigure",
        RuleRate::Fixed(cfg.rates.reconfigure),
        move |s| {
            let mut out = Vec::new();
            for line in lines(s) {
                if line.robots.len() != k {
                    continue;
                }
                for bad in line.faulted() {
                    for good in line.healthy() {
                        out.push(Match::Places(vec![
                            robot_place("f", bad.index, line.index),
                            robot_place("w", good.index, line.index),
                        ]));
                    }
                }
            }
            out
        },
        move |s, m| {
            let a = anchors("reconfigure", m, 2)?;
            let ((bad, l), (good, l2)) = (a[0], a[1]);
            if l != l2 || bad == good {
                return Err(stale("reconfigure", m));
            }
            let of_bad = |p: &Place| robot_coords(p) == Some((bad, l));
            let to_good = |p: &Place| {
                if of_bad(p) {
                    robot_place(&p.pairs()[0].tag, good, l)
                } else {
                    p.clone()
                }
            };
            let mut ts = Vec::new();
            for t in s.net.transitions() {
                if t.places().all(of_bad) {
                    continue;
                }
                ts.push(t.relabel(to_good)?);
            }
            let mut marking = Bag::new();
            for (p, n) in s.marking.iter() {
                if of_bad(p) && &*p.pairs()[0].tag == "f" {
                    continue;
                }
                marking.insert(to_good(p), n)?;
            }
            let mut next = System::new_unchecked(Arc::new(Net::new(ts)?), marking);

            let survivors: Vec<u32> =
                lines(&next).into_iter().find(|x| x.index == l).map(|x| x.robots.iter().map(|r| r.index).collect()).unwrap_or_default();
            let renumber: BTreeMap<u32, u32> = survivors.iter().enumerate().map(|(i, &r)| (r, i as u32)).collect();
            let mut perm = IndexPermutation::new();
            perm.set(robot_key(l), renumber);
            next = perm.apply(&next)?;

            let below = lines(&next).into_iter().find(|x| x.index < l && x.robots.len() == k).map(|x| x.index);
            if let Some(j) = below {
                next = IndexPermutation::swap(line_key(), j, l).apply(&next)?;
            }
            Ok(next)
        },
    )
}

/// Removes a line whose fault cannot be absorbed by reconfiguration. Its items
/// go back to the warehouse. The last remaining line is never removed.
pub fn disconnect_rule(cfg: &PlConfig) -> Rule {
    let k = cfg.k as usize;
    Rule::new(
        "disconnect",
        RuleRate::Fixed(cfg.rates.disconnect),
        move |s| {
            let ls = lines(s);
            if ls.len() < 2 {
                return Vec::new();
            }
            let mut out = Vec::new();
            for line in &ls {
                let Some(bad) = line.faulted().next() else { continue };
                if line.robots.len() < k || line.healthy().next().is_none() {
                    out.push(Match::Places(vec![robot_place("f", bad.index, line.index)]));
                }
            }
            out
        },
        |s, m| {
            let (_, l) = anchors("disconnect", m, 1)?[0];
            let in_line = |p: &Place| robot_coords(p).is_some_and(|(_, x)| x == l);
            let ts: Vec<Transition> =
                s.net.transitions().iter().filter(|t| !t.places().any(in_line)).cloned().collect();
            let mut marking = Bag::new();
            let mut returned = 0;
            for (p, n) in s.marking.iter() {
                if !in_line(p) {
                    marking.insert(p.clone(), n)?;
                } else if &*p.pairs()[0].tag != "f" {
                    returned += n;
                }
            }
            marking.insert(warehouse(), returned)?;
            Ok(System::new(Arc::new(Net::new(ts)?), marking)?)
        },
    )
}

/// Firing plus fault, reconfigure and disconnect.
pub fn degradation_rules(cfg: &PlConfig) -> Vec<Rule> {
    vec![firing_rule(), fault_rule(cfg), reconfigure_rule(cfg), disconnect_rule(cfg)]
}

/// Items in the warehouse and in every robot's w and a places.
pub fn item_count(s: &System) -> u64 {
    s.marking
        .iter()
        .filter(|(p, _)| *p == &warehouse() || robot_coords(p).is_some_and(|_| &*p.pairs()[0].tag != "f"))
        .map(|(_, n)| n)
        .sum()
}
