//! Net composition: juxtaposition, label prefixing, replication with shared places.

use std::collections::BTreeSet;
use std::sync::Arc;

use thiserror::Error;

use crate::net::{Net, NetError, Place};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AlgebraError {
    #[error("juxtaposed nets share transition {0}")]
    DuplicateTransition(String),
    #[error("shared place {0} does not occur in the net")]
    UnknownSharedPlace(String),
    #[error("replication count must be at least 1")]
    ZeroCopies,
    #[error(transparent)]
    Net(#[from] NetError),
}

/// `a ; b`. Places with equal labels are the same place.
pub fn juxtapose(a: &Net, b: &Net) -> Result<Net, AlgebraError> {
    let mut ts = a.transitions().to_vec();
    ts.extend(b.transitions().iter().cloned());
    Net::new(ts).map_err(|e| match e {
        NetError::DuplicateTransition(t) => AlgebraError::DuplicateTransition(t),
        e => e.into(),
    })
}

pub fn prefix_label(n: &Net, tag: &str, index: u32) -> Net {
    let tag: Arc<str> = tag.into();
    n.relabel(|p| p.with_root(&tag, index)).expect("prefixing is injective")
}

/// `k` copies of `n`, copy `i` prefixed with `<tag; i>` except on `shared` places.
pub fn replicate(n: &Net, tag: &str, k: u32, shared: &BTreeSet<Place>) -> Result<Net, AlgebraError> {
    if k == 0 {
        return Err(AlgebraError::ZeroCopies);
    }
    let places = n.places();
    if let Some(p) = shared.iter().find(|p| !places.contains(*p)) {
        return Err(AlgebraError::UnknownSharedPlace(p.to_string()));
    }
    let tag: Arc<str> = tag.into();
    let mut out = Net::empty();
    for i in 0..k {
        let copy = n.relabel(|p| if shared.contains(p) { p.clone() } else { p.with_root(&tag, i) })?;
        out = juxtapose(&out, &copy)?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::multiset::Bag;
    use crate::net::Transition;

    fn t(i: &[(Place, u64)], o: &[(Place, u64)], h: &[(Place, u64)], tag: &str, rate: f64) -> Transition {
        let b = |v: &[(Place, u64)]| Bag::from_pairs(v.iter().cloned()).unwrap();
        Transition::new(b(i), b(o), b(h), tag, rate).unwrap()
    }

    fn robot() -> Net {
        let (w, a, f) = (Place::leaf("w", 0), Place::leaf("a", 0), Place::leaf("f", 0));
        Net::new(vec![t(&[(w, 1)], &[(a, 1)], &[(f, 1)], "ln", 0.1)]).unwrap()
    }

    #[test]
    fn juxtapose_builds_the_listing() {
        let ld = Net::new(vec![t(
            &[(Place::leaf("s", 0), 2)],
            &[(Place::leaf("w", 0), 1), (Place::leaf("w", 1), 1)],
            &[],
            "ld",
            0.5,
        )])
        .unwrap();
        let both = juxtapose(&ld, &robot()).unwrap();
        assert_eq!(both.len(), 2);
        assert_eq!(both.places().len(), 5);
        assert_eq!(juxtapose(&ld, &Net::empty()).unwrap(), ld);
        assert!(matches!(juxtapose(&ld, &ld), Err(AlgebraError::DuplicateTransition(_))));
        let c = robot();
        assert_eq!(
            juxtapose(&juxtapose(&ld, &robot()).unwrap(), &Net::empty()).unwrap(),
            juxtapose(&ld, &juxtapose(&c, &Net::empty()).unwrap()).unwrap()
        );
    }

    #[test]
    fn prefix_appends_at_the_root() {
        let n = Net::new(vec![t(&[(Place::leaf("a", 0), 1)], &[], &[], "x", 1.0)]).unwrap();
        let p = prefix_label(&n, "L", 1);
        assert!(p.places().contains(&Place::of(&[("a", 0), ("L", 1)])));
        let pp = prefix_label(&p, "S", 0);
        assert!(pp.places().contains(&Place::of(&[("a", 0), ("L", 1), ("S", 0)])));
        assert_eq!(pp.places().len(), n.places().len());
    }

    #[test]
    fn replicate_matches_hand_built_net() {
        let r = replicate(&robot(), "R", 2, &BTreeSet::new()).unwrap();
        let hand = Net::new(
            (0..2)
                .map(|i| {
                    t(
                        &[(Place::of(&[("w", 0), ("R", i)]), 1)],
                        &[(Place::of(&[("a", 0), ("R", i)]), 1)],
                        &[(Place::of(&[("f", 0), ("R", i)]), 1)],
                        "ln",
                        0.1,
                    )
                })
                .collect(),
        )
        .unwrap();
        assert_eq!(r, hand);
        assert_eq!(replicate(&robot(), "R", 1, &BTreeSet::new()).unwrap(), prefix_label(&robot(), "R", 0));
    }

    #[test]
    fn fully_shared_replication_fails_on_identical_copies() {
        let n = robot();
        let all = n.places();
        // every copy is the same transition, which the net invariant forbids
        assert!(matches!(replicate(&n, "R", 2, &all), Err(AlgebraError::DuplicateTransition(_))));
        assert_eq!(replicate(&n, "R", 1, &all).unwrap(), n);
    }

    #[test]
    fn replicate_rejects_unknown_shared_places() {
        let shared: BTreeSet<_> = [Place::leaf("zz", 0)].into();
        assert!(matches!(replicate(&robot(), "R", 2, &shared), Err(AlgebraError::UnknownSharedPlace(_))));
        assert_eq!(replicate(&robot(), "R", 0, &BTreeSet::new()), Err(AlgebraError::ZeroCopies));
    }
}
