//! Random instance generators shared by the integration tests.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rwspt::algebra::{juxtapose, replicate};
use rwspt::models::{build_nplsys, degradation_rules, PlConfig};
use rwspt::statespace::{build_quotient, ExploreOptions};
use rwspt::symmetry::{permutable_groups, GroupKey, IndexPermutation};
use rwspt::{Bag, Net, Place, System, Transition};

pub mod checks;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

const RATES: [f64; 4] = [0.1, 0.2, 0.5, 1.0];

fn random_bag(rng: &mut impl Rng, pool: &[Place], p: f64, max: u64) -> Bag<Place> {
    let mut b = Bag::new();
    for q in pool {
        if rng.gen_bool(p) {
            b.insert(q.clone(), rng.gen_range(1..=max)).unwrap();
        }
    }
    b
}

/// A net over `pool` with up to `max_t` distinct transitions (at least one).
pub fn random_net(rng: &mut impl Rng, pool: &[Place], max_t: usize, tags: &[&str]) -> Net {
    let want = rng.gen_range(1..=max_t);
    let mut seen = HashSet::new();
    let mut ts = Vec::new();
    for _ in 0..want * 4 {
        if ts.len() == want {
            break;
        }
        let i = random_bag(rng, pool, 0.4, 2);
        let o = random_bag(rng, pool, 0.4, 2);
        let h = random_bag(rng, pool, 0.15, 3);
        let tag = tags[rng.gen_range(0..tags.len())];
        let t = Transition::new(i, o, h, tag, RATES[rng.gen_range(0..RATES.len())]).unwrap();
        if seen.insert(t.clone()) {
            ts.push(t);
        }
    }
    Net::new(ts).unwrap()
}

pub fn random_marking(rng: &mut impl Rng, net: &Net, p: f64, max: u64) -> Bag<Place> {
    let places: Vec<Place> = net.places().into_iter().collect();
    random_bag(rng, &places, p, max)
}

/// Shape of a hierarchical instance: `robots` copies under tag "R", optionally
/// `lines` copies of that under tag "L", with a shared hub place "S".
#[derive(Debug, Clone, Copy)]
pub struct Shape {
    pub robots: u32,
    pub lines: Option<u32>,
    pub hub: bool,
}

pub fn random_shape(rng: &mut impl Rng, small_orbit: bool) -> Shape {
    loop {
        let robots = rng.gen_range(1..=4);
        let lines = rng.gen_bool(0.6).then(|| rng.gen_range(1..=4));
        let s = Shape { robots, lines, hub: rng.gen_bool(0.6) };
        if !small_orbit || orbit_bound(&s) <= 2000 {
            return s;
        }
    }
}

fn factorial(n: u32) -> u64 {
    (1..=n as u64).product()
}

pub fn orbit_bound(s: &Shape) -> u64 {
    let r = factorial(s.robots);
    match s.lines {
        Some(l) => factorial(l) * r.pow(l),
        None => r,
    }
}

/// Symmetric by construction: replicated copies plus hub transitions that treat
/// every copy alike.
pub fn symmetric_net(rng: &mut impl Rng, shape: &Shape) -> Net {
    let leaf: Vec<Place> = ["w", "a", "f"].iter().map(|t| Place::leaf(t, 0)).collect();
    let hub = Place::leaf("S", 0);
    let mut pool = leaf.clone();
    if shape.hub && rng.gen_bool(0.5) {
        pool.push(hub.clone());
    }
    // every unit transition must touch a private place, or its copies coincide
    let unit = loop {
        let n = random_net(rng, &pool, 3, &["t", "u"]);
        if n.transitions().iter().all(|t| t.places().any(|p| *p != hub)) {
            break n;
        }
    };
    let shared: BTreeSet<Place> = unit.places().into_iter().filter(|p| *p == hub).collect();
    let mut net = replicate(&unit, "R", shape.robots, &shared).unwrap();
    if shape.hub {
        net = juxtapose(&net, &Net::new(hub_transitions(shape.robots, "R", &hub, rng)).unwrap())
            .unwrap_or(net);
    }
    if let Some(lines) = shape.lines {
        let shared: BTreeSet<Place> = net.places().into_iter().filter(|p| *p == hub).collect();
        net = replicate(&net, "L", lines, &shared).unwrap();
    }
    net
}

fn hub_transitions(k: u32, tag: &str, hub: &Place, rng: &mut impl Rng) -> Vec<Transition> {
    let each = |x: &str| {
        Bag::from_pairs((0..k).map(|r| (Place::of(&[(x, 0), (tag, r)]), 1))).unwrap()
    };
    let rate = RATES[rng.gen_range(0..RATES.len())];
    vec![
        Transition::new(Bag::singleton(hub.clone(), k as u64), each("w"), Bag::new(), "ld", rate).unwrap(),
        Transition::new(each("a"), Bag::singleton(hub.clone(), k as u64), Bag::new(), "asm", rate).unwrap(),
    ]
}

pub fn symmetric_system(rng: &mut impl Rng, shape: &Shape) -> System {
    let net = symmetric_net(rng, shape);
    let m = random_marking(rng, &net, 0.35, 3);
    System::new(Arc::new(net), m).unwrap()
}

/// Removes robot `r` of line `l`: its private transitions go, and shared
/// transitions lose its places.
pub fn drop_robot(s: &System, r: u32, l: u32) -> Option<System> {
    let mine = |p: &Place| {
        let ps = p.pairs();
        ps.len() == 3 && ps[1].index == r && ps[2].index == l
    };
    let mut ts = Vec::new();
    for t in s.net.transitions() {
        if !t.places().any(mine) {
            ts.push(t.clone());
            continue;
        }
        let keep = |b: &Bag<Place>| b.filter(|p| !mine(p));
        let (i, o, h) = (keep(&t.input), keep(&t.output), keep(&t.inhibitor));
        let others = i.elements().chain(o.elements()).chain(h.elements()).any(|p| p.depth() == 3);
        if others {
            ts.push(Transition::new(i, o, h, t.tag.clone(), t.rate).ok()?);
        }
    }
    let net = Net::new(ts).ok()?;
    let places = net.places();
    let m = s.marking.filter(|p| places.contains(p));
    System::new(Arc::new(net), m).ok()
}

/// A three-level instance with some robots removed, so sibling lines differ.
pub fn degraded_system(rng: &mut impl Rng) -> Option<System> {
    let shape = Shape { robots: rng.gen_range(2..=3), lines: Some(rng.gen_range(2..=3)), hub: true };
    let mut s = symmetric_system(rng, &shape);
    for _ in 0..rng.gen_range(1..=2) {
        let r = rng.gen_range(0..shape.robots);
        let l = rng.gen_range(0..shape.lines.unwrap());
        s = drop_robot(&s, r, l)?;
    }
    Some(s)
}

/// Uniformly random bijection inside every permutable group, merged per key.
pub fn random_group_permutation(rng: &mut impl Rng, net: &Net) -> IndexPermutation {
    let mut maps: BTreeMap<GroupKey, BTreeMap<u32, u32>> = BTreeMap::new();
    for g in permutable_groups(net).unwrap() {
        let from: Vec<u32> = g.members.iter().copied().collect();
        let mut to = from.clone();
        to.shuffle(rng);
        maps.entry(g.key.clone()).or_default().extend(from.into_iter().zip(to));
    }
    let mut sigma = IndexPermutation::new();
    for (k, m) in maps {
        sigma.set(k, m);
    }
    sigma
}

/// Arbitrary bijection of each sibling family's indices, automorphism or not.
pub fn random_relabeling(rng: &mut impl Rng, net: &Net) -> IndexPermutation {
    let mut sigma = IndexPermutation::new();
    for (key, members) in rwspt::symmetry::hierarchy(&net.places()) {
        let from: Vec<u32> = members.into_iter().collect();
        let mut to = from.clone();
        to.shuffle(rng);
        sigma.set(key, from.into_iter().zip(to).collect());
    }
    sigma
}

/// States of the NPLsys quotient graph.
pub fn nplsys_states(n: u32) -> (PlConfig, Vec<System>) {
    let cfg = PlConfig::new(n, 2, 2);
    let s0 = build_nplsys(&cfg).unwrap();
    let (ts, _) = build_quotient(&s0, &degradation_rules(&cfg), ExploreOptions::default()).unwrap();
    (cfg, ts.states)
}
