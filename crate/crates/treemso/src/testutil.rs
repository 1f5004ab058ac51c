//! Random-instance generators shared by the unit tests.

use crate::automata::{Apt, Conj, Dnf};
use crate::hf::{ordinal, HfSet};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;

/// Random valid automaton over the one-letter alphabet: 1..=max_states
/// states, colors drawn from 0..=max_color, one or two conjunctions per
/// transition with at least one literal each.
pub(crate) fn random_alpha1(
    rng: &mut ChaCha8Rng,
    max_states: usize,
    max_color: usize,
    arity: usize,
) -> Apt {
    let n = rng.gen_range(1..=max_states);
    let states: Vec<HfSet> = (0..n).map(ordinal).collect();
    let letter = ordinal(0);
    let mut delta = BTreeMap::new();
    for q in &states {
        let n_conj = rng.gen_range(1..=2usize);
        let mut dnf = Dnf::new();
        for _ in 0..n_conj {
            let mut conj = Conj::new();
            conj.insert((rng.gen_range(0..arity), states[rng.gen_range(0..n)].clone()));
            for d in 0..arity {
                if rng.gen_bool(0.5) {
                    conj.insert((d, states[rng.gen_range(0..n)].clone()));
                }
            }
            dnf.insert(conj);
        }
        delta.insert((q.clone(), letter.clone()), dnf);
    }
    Apt {
        arity,
        alphabet: [letter].into_iter().collect(),
        states: states.iter().cloned().collect(),
        initial: states[0].clone(),
        delta,
        color: states
            .iter()
            .map(|q| (q.clone(), rng.gen_range(0..=max_color)))
            .collect(),
        max_color,
    }
}
