//! Prints quotient and ordinary state counts of NPLsys for a range of N.
//!
//! cargo run --release -p rwspt --example counts -- 4 3

use std::time::Instant;

use rwspt::models::{build_nplsys, degradation_rules, PlConfig};
use rwspt::statespace::{build_ordinary, build_quotient, ExploreOptions};

fn main() {
    let args: Vec<usize> = std::env::args().skip(1).map(|a| a.parse().expect("integer")).collect();
    let max_q = args.first().copied().unwrap_or(4);
    let max_o = args.get(1).copied().unwrap_or(2);
    for n in 1..=max_q.max(max_o) {
        let cfg = PlConfig::new(n as u32, 2, 2);
        let s0 = build_nplsys(&cfg).unwrap();
        let rules = degradation_rules(&cfg);
        if n <= max_q {
            let t = Instant::now();
            let (q, _) = build_quotient(&s0, &rules, ExploreOptions::default()).unwrap();
            println!("N={n} quotient {} edges {} ({:.2?})", q.summary(), q.edges.len(), t.elapsed());
        }
        if n <= max_o {
            let t = Instant::now();
            let o = build_ordinary(&s0, &rules, ExploreOptions::default()).unwrap();
            println!("N={n} ordinary {} ({:.2?})", o.summary(), t.elapsed());
        }
    }
}
