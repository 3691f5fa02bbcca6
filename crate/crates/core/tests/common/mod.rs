#![allow(dead_code)]

use crn_core::open::{self, ExtendedNetwork};
use crn_core::{parse_network, Model, ReactionNetwork};

pub const EXAMPLE_OPEN: &str = "0 -> X1 ; k=4\nX1 <-> X2 + 2 X3 ; kf=2, kr=1\nX2 + 2 X3 -> 0 ; k=2\n";

/// Triangle `C1 ⇄ C2 ⇄ C3 ⇄ C1` over single-species complexes with rates
/// `k1: 1→2, k2: 2→1, k3: 2→3, k4: 3→2, k5: 3→1, k6: 1→3`.
pub fn cycle(k: [f64; 6]) -> ReactionNetwork {
    ReactionNetwork::single_species(
        3,
        &[
            (0, 1, k[0]),
            (1, 0, k[1]),
            (1, 2, k[2]),
            (2, 1, k[3]),
            (2, 0, k[4]),
            (0, 2, k[5]),
        ],
    )
    .unwrap()
}

pub fn model(text: &str) -> Model {
    parse_network(text).unwrap()
}

/// Closed networks that are complex-balanced for every positive rate choice
/// (weakly reversible, deficiency zero).
pub fn balanced_closed() -> Vec<(&'static str, ReactionNetwork)> {
    let texts = [
        ("pair", "A <-> B ; kf=2, kr=0.5\n"),
        ("dimer", "2 A <-> B ; kf=1.5, kr=0.7\n"),
        ("binding", "A + B <-> C ; kf=1, kr=2\nC <-> 2 D ; kf=0.5, kr=1.2\n"),
        ("triangle", "2 A -> B ; k=1\nB -> A + C ; k=2\nA + C -> 2 A ; k=3\n"),
        (
            "two-classes",
            "A <-> B ; kf=1, kr=3\nC + D -> E ; k=2\nE -> 2 F ; k=1\n2 F -> C + D ; k=0.8\n",
        ),
    ];
    let mut out: Vec<(&'static str, ReactionNetwork)> =
        texts.iter().map(|(name, t)| (*name, model(t).network)).collect();
    out.push(("cycle", cycle([1.0, 2.0, 3.0, 4.0, 5.0, 6.0])));
    out
}

/// Open networks whose extended graph is complex-balanced.
pub fn balanced_open() -> Vec<(&'static str, ExtendedNetwork)> {
    let texts = [
        ("example", EXAMPLE_OPEN),
        ("feed", "0 <-> A ; kf=5, kr=2\n"),
        ("chain", "0 -> A ; k=1\nA <-> B ; kf=2, kr=1\nB -> 0 ; k=3\n"),
        ("feed-dimer", "0 -> 2 A ; k=2\n2 A <-> B ; kf=1, kr=1\nB -> 0 ; k=0.5\n"),
    ];
    texts
        .iter()
        .map(|(name, t)| {
            let m = model(t);
            (*name, open::extend(&m.network, m.open.as_ref().unwrap()).unwrap())
        })
        .collect()
}
