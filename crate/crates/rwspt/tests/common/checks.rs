//! Oracles returning `Err(description)` on disagreement.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet, VecDeque};

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::Rng;

use rwspt::ctmc::transient;
use rwspt::net::{enabled, fire};
use rwspt::statespace::{Edge, LumpedCtmc};
use rwspt::symmetry::{
    normalization_order, normalize, normalize_in_order, permutable_groups, GroupKey, IndexPermutation,
};
use rwspt::{Bag, Place, System, Transition};

use super::{random_group_permutation, random_net};

pub fn idempotent(s: &System) -> Result<(), String> {
    let n = normalize(s).map_err(|e| e.to_string())?;
    let nn = normalize(&n).map_err(|e| e.to_string())?;
    if n != nn {
        return Err(format!("normalize not idempotent on\n{s:?}"));
    }
    Ok(())
}

pub fn permutation_invariant(s: &System, rng: &mut impl Rng, rounds: usize) -> Result<(), String> {
    let n = normalize(s).map_err(|e| e.to_string())?;
    for _ in 0..rounds {
        let sigma = random_group_permutation(rng, &s.net);
        let t = sigma.apply(s).map_err(|e| e.to_string())?;
        if t.net != s.net {
            return Err(format!("group permutation {sigma:?} is not an automorphism of\n{s:?}"));
        }
        if normalize(&t).map_err(|e| e.to_string())? != n {
            return Err(format!("normal form changed under {sigma:?} on\n{s:?}"));
        }
    }
    Ok(())
}

/// True when `g` sits inside the subtree addressed by `f`.
fn encloses(f: &GroupKey, g: &GroupKey) -> bool {
    g.level > f.level
        && g.context[g.level - f.level..] == f.context[..]
        && g.context[g.level - f.level - 1].tag == f.tag
}

/// A random processing order in which every family comes after the families nested in it.
pub fn random_valid_order(rng: &mut impl Rng, keys: &[GroupKey]) -> Vec<GroupKey> {
    let mut left: Vec<GroupKey> = keys.to_vec();
    let mut out = Vec::with_capacity(left.len());
    while !left.is_empty() {
        let ready: Vec<usize> =
            (0..left.len()).filter(|&i| !left.iter().any(|g| encloses(&left[i], g))).collect();
        let pick = *ready.choose(rng).expect("nesting is acyclic");
        out.push(left.swap_remove(pick));
    }
    out
}

pub fn confluent(s: &System, rng: &mut impl Rng, rounds: usize) -> Result<(), String> {
    let n = normalize(s).map_err(|e| e.to_string())?;
    let keys = normalization_order(&s.net);
    for _ in 0..rounds {
        let order = random_valid_order(rng, &keys);
        if normalize_in_order(s, &order).map_err(|e| e.to_string())? != n {
            return Err(format!("order {order:?} gives a different normal form for\n{s:?}"));
        }
    }
    Ok(())
}

fn cmp_marking(a: &Bag<Place>, b: &Bag<Place>) -> Ordering {
    a.iter().cmp(b.iter())
}

/// Every marking reachable from `s` by group swaps. The net is fixed throughout.
pub fn orbit(s: &System) -> Result<Vec<Bag<Place>>, String> {
    let mut gens = Vec::new();
    for g in permutable_groups(&s.net).map_err(|e| e.to_string())? {
        let m: Vec<u32> = g.members.iter().copied().collect();
        for w in m.windows(2) {
            gens.push(IndexPermutation::swap(g.key.clone(), w[0], w[1]));
        }
    }
    let mut seen: HashSet<Bag<Place>> = HashSet::new();
    let mut queue = VecDeque::from([s.marking.clone()]);
    seen.insert(s.marking.clone());
    while let Some(m) = queue.pop_front() {
        for g in &gens {
            let next = m.map(|p| g.apply_place(p)).map_err(|e| e.to_string())?;
            if seen.insert(next.clone()) {
                queue.push_back(next);
            }
        }
    }
    Ok(seen.into_iter().collect())
}

/// The normal form is the least marking of the orbit, on the unchanged net.
pub fn minimal(s: &System) -> Result<usize, String> {
    let n = normalize(s).map_err(|e| e.to_string())?;
    let all = orbit(s)?;
    let min = all.iter().min_by(|a, b| cmp_marking(a, b)).unwrap();
    if n.net != s.net {
        return Err(format!("normal form changed a net with contiguous indices:\n{s:?}\n=>\n{n:?}"));
    }
    if &n.marking != min {
        return Err(format!("normal form {} is not the orbit minimum {min} of\n{s:?}", n.marking));
    }
    Ok(all.len())
}

/// Relabeling any family's indices, automorphism or not, keeps the normal form.
pub fn relabel_invariant(s: &System, rng: &mut impl Rng, rounds: usize) -> Result<(), String> {
    let n = normalize(s).map_err(|e| e.to_string())?;
    for _ in 0..rounds {
        let sigma = super::random_relabeling(rng, &s.net);
        let t = sigma.apply(s).map_err(|e| e.to_string())?;
        if normalize(&t).map_err(|e| e.to_string())? != n {
            return Err(format!("normal form changed under relabeling {sigma:?} of\n{s:?}"));
        }
    }
    Ok(())
}

/// Direct evaluation of the enabling condition and firing equation, place by place.
pub fn firing_agrees(s: &System, t: &Transition) -> Result<(), String> {
    let m = |p: &Place| s.marking.multiplicity(p);
    let mut places: BTreeSet<Place> = s.marking.elements().cloned().collect();
    places.extend(t.places().cloned());
    let expect = places.iter().all(|p| {
        let h = t.inhibitor.multiplicity(p);
        m(p) >= t.input.multiplicity(p) && (h == 0 || m(p) < h)
    });
    let got = enabled(t, s).map_err(|e| e.to_string())?;
    if got != expect {
        return Err(format!("enabled = {got}, oracle = {expect} for {t} at {}", s.marking));
    }
    match fire(t, s) {
        Ok(next) if expect => {
            for p in &places {
                let want = m(p) as i128 - t.input.multiplicity(p) as i128 + t.output.multiplicity(p) as i128;
                if next.marking.multiplicity(p) as i128 != want {
                    return Err(format!("fire gives {} at {p}, oracle {want}", next.marking.multiplicity(p)));
                }
            }
            if next.marking.elements().any(|p| !places.contains(p)) {
                return Err("fire marked a place outside the marking and transition".into());
            }
            Ok(())
        }
        Err(_) if !expect => Ok(()),
        Ok(_) => Err(format!("fire succeeded on a disabled transition {t}")),
        Err(e) => Err(format!("fire failed on an enabled transition {t}: {e}")),
    }
}

/// A random (system, transition) pair over a small place pool.
pub fn random_firing_case(rng: &mut impl Rng) -> (System, Transition) {
    let pool: Vec<Place> = (0..rng.gen_range(1..=5))
        .map(|i| if i % 2 == 0 { Place::leaf("p", i) } else { Place::of(&[("q", 0), ("L", i)]) })
        .collect();
    let net = random_net(rng, &pool, 4, &["t", "u", "v"]);
    let places: Vec<Place> = net.places().into_iter().collect();
    let mut m = Bag::new();
    for p in &places {
        let k = rng.gen_range(0..=3);
        if k > 0 {
            m.insert(p.clone(), k).unwrap();
        }
    }
    let t = net.transitions()[rng.gen_range(0..net.len())].clone();
    (System::new(std::sync::Arc::new(net), m).unwrap(), t)
}

/// Random chain with `n` states; roughly a third of the states absorb.
pub fn random_chain(rng: &mut impl Rng, n: usize) -> LumpedCtmc {
    let mut edges = Vec::new();
    for i in 0..n {
        if n > 1 && rng.gen_bool(0.7) {
            for _ in 0..rng.gen_range(1..=3) {
                let j = rng.gen_range(0..n);
                if j != i {
                    edges.push(Edge { source: i, target: j, label: "e".into(), rate: rng.gen_range(0.01..5.0) });
                }
            }
        }
    }
    let mut init: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
    let total: f64 = init.iter().sum();
    init.iter_mut().for_each(|x| *x /= total);
    LumpedCtmc::from_edges(n, edges, init)
}

pub fn dense_generator(c: &LumpedCtmc) -> DMatrix<f64> {
    DMatrix::from_fn(c.len(), c.len(), |i, j| c.q(i, j))
}

/// Largest absolute difference from π0·exp(Qt) over the given times.
pub fn transient_error(c: &LumpedCtmc, times: &[f64], eps: f64) -> Result<f64, String> {
    let q = dense_generator(c);
    let p0 = DMatrix::from_row_slice(1, c.len(), &c.initial);
    let r = transient(c, times, eps).map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    for (t, pi) in times.iter().zip(&r.distributions) {
        let exact = &p0 * (&q * *t).exp();
        for (j, x) in pi.iter().enumerate() {
            worst = worst.max((x - exact[(0, j)]).abs());
        }
    }
    Ok(worst)
}

/// Quotient edge rates keyed by (source, target) after dropping self-loops.
pub fn rate_table(edges: &[Edge]) -> HashMap<(usize, usize), f64> {
    let mut out = HashMap::new();
    for e in edges.iter().filter(|e| e.source != e.target) {
        *out.entry((e.source, e.target)).or_insert(0.0) += e.rate;
    }
    out
}

pub fn label_rates(edges: &[Edge], source: usize) -> BTreeMap<String, f64> {
    let mut out = BTreeMap::new();
    for e in edges.iter().filter(|e| e.source == source) {
        *out.entry(e.label.to_string()).or_insert(0.0) += e.rate;
    }
    out
}
