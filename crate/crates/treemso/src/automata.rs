//! Alternating parity tree automata over hereditarily-finite alphabets.
//!
//! An automaton runs on `Σ`-labeled `D`-ary trees. Its transition function
//! maps a state and a letter to a nonempty set of nonempty *conjunctions*
//! `C ⊆ Dir × Q`, read as a disjunctive normal form: the automaton player
//! picks a conjunction, the opponent picks one `(d, q′)` pair from it, and
//! the run continues in state `q′` at the `d`-th child. Acceptance is
//! min-parity: the least color occurring infinitely often must be even.
//!
//! The closed constructions here — substitution, disjunction,
//! complementation, projection, the two atomic automata, and the
//! nondeterminism test — are the complete toolkit the compiler in
//! [`crate::pipeline`] uses to turn individual-free formulae into automata.
//! [`Apt::complement`] is deliberately unminimized (the De Morgan dual in
//! set-builder form); [`dual_minimized`] computes the equivalent antichain
//! of minimal hitting sets directly and is what the compiler calls, since
//! the unminimized dual is exponentially larger.

use crate::hf::{self, ordinal, HfError, HfSet};
use std::collections::{BTreeMap, BTreeSet, VecDeque};
use thiserror::Error;

/// A conjunction: a nonempty subset of `Dir × Q`.
pub type Conj = BTreeSet<(usize, HfSet)>;

/// Transition target: a nonempty set of conjunctions (a DNF).
pub type Dnf = BTreeSet<Conj>;

#[derive(Debug, Error)]
pub enum AptError {
    #[error("not a function: {0}")]
    NotAFunction(String),
    #[error("empty alphabet")]
    EmptyAlphabet,
    #[error("operands have different alphabets")]
    AlphabetMismatch,
    #[error("operands have different arities")]
    ArityMismatch,
    #[error("alphabet is not a product with the given factor: {0}")]
    AlphabetNotProduct(String),
    #[error("dualization over |Dir × Q| = {dir_states} exceeds the {cap_bits}-bit enumeration cap")]
    TooLarge { dir_states: usize, cap_bits: u32 },
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Hf(#[from] HfError),
}

/// Subset enumeration bound for [`Apt::complement`]: `|Dir × Q|` may not
/// exceed this many bits.
pub const DUAL_CAP_BITS: u32 = 20;

/// An alternating parity tree automaton. All member values are canonical
/// HF-sets; two automata compare equal exactly when they are the same
/// canonical value.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Apt {
    pub arity: usize,
    pub alphabet: BTreeSet<HfSet>,
    pub states: BTreeSet<HfSet>,
    pub initial: HfSet,
    /// Total on `states × alphabet`; sparseness here is a validation error,
    /// never an implicit default.
    pub delta: BTreeMap<(HfSet, HfSet), Dnf>,
    pub color: BTreeMap<HfSet, usize>,
    pub max_color: usize,
}

impl Apt {
    /// Check every structural invariant, reporting each violation.
    /// An empty list means the automaton is valid.
    pub fn validate(&self) -> Vec<String> {
        let mut v = Vec::new();
        if self.arity == 0 {
            v.push("arity must be at least 1".to_string());
        }
        if self.alphabet.is_empty() {
            v.push("alphabet is empty".to_string());
        }
        if self.states.is_empty() {
            v.push("state set is empty".to_string());
        }
        if !self.states.contains(&self.initial) {
            v.push(format!("initial state {} is not a state", self.initial));
        }
        for q in &self.states {
            match self.color.get(q) {
                None => v.push(format!("state {q} has no color")),
                Some(&c) if c > self.max_color => {
                    v.push(format!("color {c} of state {q} exceeds max_color {}", self.max_color))
                }
                _ => {}
            }
            for a in &self.alphabet {
                match self.delta.get(&(q.clone(), a.clone())) {
                    None => v.push(format!("missing transition for ({q}, {a})")),
                    Some(dnf) => {
                        if dnf.is_empty() {
                            v.push(format!("empty transition set at ({q}, {a})"));
                        }
                        for conj in dnf {
                            if conj.is_empty() {
                                v.push(format!("empty conjunction at ({q}, {a})"));
                            }
                            for (d, q2) in conj {
                                if *d >= self.arity {
                                    v.push(format!(
                                        "direction {d} out of range at ({q}, {a})"
                                    ));
                                }
                                if !self.states.contains(q2) {
                                    v.push(format!(
                                        "conjunction at ({q}, {a}) mentions unknown state {q2}"
                                    ));
                                }
                            }
                        }
                    }
                }
            }
        }
        for (q, _) in self.color.iter() {
            if !self.states.contains(q) {
                v.push(format!("color entry for unknown state {q}"));
            }
        }
        for ((q, a), _) in self.delta.iter() {
            if !self.states.contains(q) {
                v.push(format!("transition entry for unknown state {q}"));
            }
            if !self.alphabet.contains(a) {
                v.push(format!("transition entry for unknown letter {a}"));
            }
        }
        v
    }

    /// Reindex the alphabet through an HF-function `f : Γ → Σ`: the result
    /// reads letter `b` exactly as this automaton reads `f(b)`. States,
    /// initial state and coloring are unchanged.
    pub fn substitute(&self, f: &HfSet) -> Result<Apt, AptError> {
        let mut map: BTreeMap<HfSet, HfSet> = BTreeMap::new();
        for e in f.elems() {
            let (b, a) = hf::unpair(e)
                .map_err(|_| AptError::NotAFunction(format!("element {e} is not a pair")))?;
            if map.insert(b.clone(), a.clone()).is_some() {
                return Err(AptError::NotAFunction(format!("duplicate argument {b}")));
            }
            if !self.alphabet.contains(&a) {
                return Err(AptError::NotAFunction(format!(
                    "value {a} is outside the alphabet"
                )));
            }
        }
        if map.is_empty() {
            return Err(AptError::EmptyAlphabet);
        }
        let mut delta = BTreeMap::new();
        for q in &self.states {
            for (b, a) in &map {
                let dnf = self.delta.get(&(q.clone(), a.clone())).cloned().unwrap_or_default();
                delta.insert((q.clone(), b.clone()), dnf);
            }
        }
        Ok(Apt {
            arity: self.arity,
            alphabet: map.keys().cloned().collect(),
            states: self.states.clone(),
            initial: self.initial.clone(),
            delta,
            color: self.color.clone(),
            max_color: self.max_color,
        })
    }

    /// Disjoint union with a fresh initial state: the new automaton accepts
    /// exactly when either operand does. States of the operands are tagged
    /// through the injections `q ↦ (0,q)` and `q ↦ (1,q)`; the fresh initial
    /// is `(2, |Q₀| + |Q₁|)` and carries the maximal color
    /// `n = max(n₀, n₁)`.
    pub fn disjoin(&self, other: &Apt) -> Result<Apt, AptError> {
        if self.alphabet != other.alphabet {
            return Err(AptError::AlphabetMismatch);
        }
        if self.arity != other.arity {
            return Err(AptError::ArityMismatch);
        }
        let inj0 = |q: &HfSet| hf::inl(q);
        let inj1 = |q: &HfSet| hf::inr(q);
        let qdot = hf::pair(&ordinal(2), &ordinal(self.states.len() + other.states.len()));
        let n = self.max_color.max(other.max_color);

        let mut states: BTreeSet<HfSet> = self.states.iter().map(&inj0).collect();
        states.extend(other.states.iter().map(&inj1));
        states.insert(qdot.clone());

        let mut color: BTreeMap<HfSet, usize> = BTreeMap::new();
        for (q, &c) in &self.color {
            color.insert(inj0(q), c);
        }
        for (q, &c) in &other.color {
            color.insert(inj1(q), c);
        }
        color.insert(qdot.clone(), n);

        let rename = |dnf: &Dnf, inj: &dyn Fn(&HfSet) -> HfSet| -> Dnf {
            dnf.iter()
                .map(|conj| conj.iter().map(|(d, q)| (*d, inj(q))).collect())
                .collect()
        };

        let mut delta = BTreeMap::new();
        for ((q, a), dnf) in &self.delta {
            delta.insert((inj0(q), a.clone()), rename(dnf, &inj0));
        }
        for ((q, a), dnf) in &other.delta {
            delta.insert((inj1(q), a.clone()), rename(dnf, &inj1));
        }
        for a in &self.alphabet {
            let mut dnf = rename(
                self.delta.get(&(self.initial.clone(), a.clone())).unwrap_or(&Dnf::new()),
                &inj0,
            );
            dnf.extend(rename(
                other.delta.get(&(other.initial.clone(), a.clone())).unwrap_or(&Dnf::new()),
                &inj1,
            ));
            delta.insert((qdot.clone(), a.clone()), dnf);
        }

        Ok(Apt {
            arity: self.arity,
            alphabet: self.alphabet.clone(),
            states,
            initial: qdot,
            delta,
            color,
            max_color: n,
        })
    }

    /// The complement automaton: same states and initial state, transitions
    /// replaced by their De Morgan duals
    /// `{ C̄ ∈ P⁺(Dir × Q) | ∀C ∈ δ(q,a). C̄ ∩ C ≠ ∅ }`, every color shifted
    /// up by one. The dual is kept in unminimized set-builder form; see
    /// [`dual_minimized`] for the antichain variant used by the compiler.
    pub fn complement(&self) -> Result<Apt, AptError> {
        let ground: Vec<(usize, HfSet)> = {
            let mut g = Vec::new();
            for d in 0..self.arity {
                for q in &self.states {
                    g.push((d, q.clone()));
                }
            }
            g
        };
        if ground.len() > DUAL_CAP_BITS as usize {
            return Err(AptError::TooLarge { dir_states: ground.len(), cap_bits: DUAL_CAP_BITS });
        }
        let index: BTreeMap<&(usize, HfSet), u32> =
            ground.iter().enumerate().map(|(i, p)| (p, i as u32)).collect();

        let mut delta = BTreeMap::new();
        for ((q, a), dnf) in &self.delta {
            let edges: Vec<u64> = dnf
                .iter()
                .map(|conj| conj.iter().map(|p| 1u64 << index[p]).sum())
                .collect();
            let mut dual = Dnf::new();
            for mask in 1u64..(1u64 << ground.len()) {
                if edges.iter().all(|e| e & mask != 0) {
                    dual.insert(
                        ground
                            .iter()
                            .enumerate()
                            .filter(|(i, _)| mask >> i & 1 == 1)
                            .map(|(_, p)| p.clone())
                            .collect(),
                    );
                }
            }
            delta.insert((q.clone(), a.clone()), dual);
        }

        Ok(Apt {
            arity: self.arity,
            alphabet: self.alphabet.clone(),
            states: self.states.clone(),
            initial: self.initial.clone(),
            delta,
            color: self.color.iter().map(|(q, c)| (q.clone(), c + 1)).collect(),
            max_color: self.max_color + 1,
        })
    }

    /// Existential projection: the alphabet must be the product `Σ × Γ`;
    /// the result reads `a` with `δ′(q,a) = ⋃_{b ∈ Γ} δ(q,(a,b))`. Correctly
    /// projects the language only for nondeterministic automata.
    pub fn project(&self, gamma: &HfSet) -> Result<Apt, AptError> {
        if gamma.is_empty() {
            return Err(AptError::EmptyAlphabet);
        }
        let mut sigma: BTreeSet<HfSet> = BTreeSet::new();
        for letter in &self.alphabet {
            let (a, b) = hf::unpair(letter).map_err(|_| {
                AptError::AlphabetNotProduct(format!("letter {letter} is not a pair"))
            })?;
            if !gamma.contains(&b) {
                return Err(AptError::AlphabetNotProduct(format!(
                    "letter {letter} has second component outside the factor"
                )));
            }
            sigma.insert(a);
        }
        // Exactness: the alphabet must be all of Σ × Γ, not merely a subset.
        if self.alphabet.len() != sigma.len() * gamma.card() {
            return Err(AptError::AlphabetNotProduct(
                "alphabet is a proper subset of the product".to_string(),
            ));
        }
        let mut delta = BTreeMap::new();
        for q in &self.states {
            for a in &sigma {
                let mut dnf = Dnf::new();
                for b in gamma.elems() {
                    let letter = hf::pair(a, b);
                    if let Some(d) = self.delta.get(&(q.clone(), letter)) {
                        dnf.extend(d.iter().cloned());
                    }
                }
                delta.insert((q.clone(), a.clone()), dnf);
            }
        }
        Ok(Apt {
            arity: self.arity,
            alphabet: sigma,
            states: self.states.clone(),
            initial: self.initial.clone(),
            delta,
            color: self.color.clone(),
            max_color: self.max_color,
        })
    }

    /// Whether every conjunction sends each direction to at most one state,
    /// so the opponent only ever chooses directions, never states.
    pub fn is_nondeterministic(&self) -> bool {
        self.delta.values().all(|dnf| {
            dnf.iter().all(|conj| {
                let mut dirs = BTreeSet::new();
                conj.iter().all(|(d, _)| dirs.insert(*d))
            })
        })
    }

    /// Conjunction as the derived operator `¬(¬A₀ ⊕ ¬A₁)`.
    pub fn conjoin(&self, other: &Apt) -> Result<Apt, AptError> {
        self.complement()?.disjoin(&other.complement()?)?.complement()
    }

    /// Restrict to the states reachable from the initial state through any
    /// letter and any conjunction. The language is unchanged.
    pub fn reachable_trim(&self) -> Apt {
        let mut seen: BTreeSet<HfSet> = BTreeSet::new();
        let mut queue: VecDeque<HfSet> = VecDeque::new();
        seen.insert(self.initial.clone());
        queue.push_back(self.initial.clone());
        while let Some(q) = queue.pop_front() {
            for a in &self.alphabet {
                if let Some(dnf) = self.delta.get(&(q.clone(), a.clone())) {
                    for conj in dnf {
                        for (_, q2) in conj {
                            if seen.insert(q2.clone()) {
                                queue.push_back(q2.clone());
                            }
                        }
                    }
                }
            }
        }
        Apt {
            arity: self.arity,
            alphabet: self.alphabet.clone(),
            states: seen.iter().cloned().collect(),
            initial: self.initial.clone(),
            delta: self
                .delta
                .iter()
                .filter(|((q, _), _)| seen.contains(q))
                .map(|(k, v)| (k.clone(), v.clone()))
                .collect(),
            color: self
                .color
                .iter()
                .filter(|(q, _)| seen.contains(q))
                .map(|(q, c)| (q.clone(), *c))
                .collect(),
            max_color: self.max_color,
        }
    }
}

/// The boolean letter `(i, j)` of the `2 × 2` alphabet.
pub fn letter2(i: usize, j: usize) -> HfSet {
    hf::pair(&ordinal(i), &ordinal(j))
}

fn alphabet_2x2() -> BTreeSet<HfSet> {
    let mut s = BTreeSet::new();
    for i in 0..2 {
        for j in 0..2 {
            s.insert(letter2(i, j));
        }
    }
    s
}

/// The automaton for `X₁ ⊆ X₂` over `2 × 2`: states are the booleans with
/// `true` (= `1`) initial. Reading a node labeled `(1,0)` — in `X₁` but not
/// `X₂` — falls into the rejecting sink `false`, which has odd color.
pub fn atomic_subset(arity: usize) -> Apt {
    let t = ordinal(1);
    let f = ordinal(0);
    let all = |q: &HfSet| -> Dnf {
        let conj: Conj = (0..arity).map(|d| (d, q.clone())).collect();
        [conj].into_iter().collect()
    };
    let mut delta = BTreeMap::new();
    for i in 0..2 {
        for j in 0..2 {
            let target = if i == 1 && j == 0 { all(&f) } else { all(&t) };
            delta.insert((t.clone(), letter2(i, j)), target);
            delta.insert((f.clone(), letter2(i, j)), all(&f));
        }
    }
    Apt {
        arity,
        alphabet: alphabet_2x2(),
        states: [f.clone(), t.clone()].into_iter().collect(),
        initial: t.clone(),
        delta,
        color: [(t, 0), (f, 1)].into_iter().collect(),
        max_color: 1,
    }
}

/// The automaton for `Succ_d(X₁, X₂)` over `2 × 2`: it searches for some
/// node in `X₁` whose `d`-th child is in `X₂`. States are `B + {w}` with
/// `false` initial; `w` is the one-step witness obligation.
///
/// The table is implemented exactly as specified, including `col(w) = 0`;
/// see the regression test `succ_coloring_accepts_f_w_cycles` for the
/// consequence on non-singleton arguments, which the singleton guards of the
/// individual-free translation make unobservable in the pipeline.
pub fn atomic_succ(arity: usize, d: usize) -> Apt {
    assert!(d < arity, "direction {d} out of range for arity {arity}");
    let f = hf::inl(&ordinal(0));
    let t = hf::inl(&ordinal(1));
    let w = hf::inr(&ordinal(0));
    // {{(d′, q)} | d′ ∈ Dir}: a choice of one direction to continue in.
    let one_of = |q: &HfSet| -> Dnf {
        (0..arity)
            .map(|d2| [(d2, q.clone())].into_iter().collect::<Conj>())
            .collect()
    };
    // {{(d′, q) | d′ ∈ Dir}}: all directions at once.
    let all = |q: &HfSet| -> Dnf {
        let conj: Conj = (0..arity).map(|d2| (d2, q.clone())).collect();
        [conj].into_iter().collect()
    };
    let mut delta = BTreeMap::new();
    for i in 0..2 {
        for j in 0..2 {
            let a = letter2(i, j);
            let from_f = if i == 0 {
                one_of(&f)
            } else {
                [
                    [(d, w.clone())].into_iter().collect::<Conj>(),
                ]
                .into_iter()
                .collect()
            };
            let from_w = if j == 1 { all(&t) } else { one_of(&f) };
            delta.insert((f.clone(), a.clone()), from_f);
            delta.insert((w.clone(), a.clone()), from_w);
            delta.insert((t.clone(), a), all(&t));
        }
    }
    Apt {
        arity,
        alphabet: alphabet_2x2(),
        states: [f.clone(), t.clone(), w.clone()].into_iter().collect(),
        initial: f.clone(),
        delta,
        color: [(t, 0), (f, 1), (w, 0)].into_iter().collect(),
        max_color: 1,
    }
}

/// The automaton for `Sing(X)` — `X` is a singleton — over the one-variable
/// alphabet `2`. State `o` (initial) owes exactly one occurrence to its
/// subtree: on `1` it discharges the debt into `n` everywhere, on `0` it
/// passes the debt to one child. `n` owes none and falls into the rejecting
/// sink `r` on any further occurrence. `col(o) = 1`, so a run that defers the
/// debt forever rejects.
pub fn atomic_sing(arity: usize) -> Apt {
    let n = ordinal(0);
    let o = ordinal(1);
    let r = ordinal(2);
    let all = |q: &HfSet| -> Dnf {
        let conj: Conj = (0..arity).map(|d| (d, q.clone())).collect();
        [conj].into_iter().collect()
    };
    // {{(d, o)} ∪ {(d′, n) | d′ ≠ d} | d ∈ Dir}: one child inherits the debt.
    let pass: Dnf = (0..arity)
        .map(|d| {
            (0..arity)
                .map(|d2| (d2, if d2 == d { o.clone() } else { n.clone() }))
                .collect::<Conj>()
        })
        .collect();
    let mut delta = BTreeMap::new();
    for bit in 0..2 {
        let a = ordinal(bit);
        delta.insert((o.clone(), a.clone()), if bit == 1 { all(&n) } else { pass.clone() });
        delta.insert((n.clone(), a.clone()), if bit == 1 { all(&r) } else { all(&n) });
        delta.insert((r.clone(), a), all(&r));
    }
    Apt {
        arity,
        alphabet: [ordinal(0), ordinal(1)].into_iter().collect(),
        states: [n.clone(), o.clone(), r.clone()].into_iter().collect(),
        initial: o.clone(),
        delta,
        color: [(n, 0), (o, 1), (r, 1)].into_iter().collect(),
        max_color: 1,
    }
}

/// The automaton for `X₁ < X₂` — every `X₂`-node lies strictly below some
/// `X₁`-node — over `2 × 2`. A deterministic safety check: state `a` (initial)
/// means no proper ancestor was in `X₁`, so an `X₂`-bit rejects; reading an
/// `X₁`-bit sends all children to the indifferent state `b`. On singletons
/// this is exactly the strict tree order.
pub fn atomic_lt(arity: usize) -> Apt {
    let a0 = ordinal(0);
    let b = ordinal(1);
    let r = ordinal(2);
    let all = |q: &HfSet| -> Dnf {
        let conj: Conj = (0..arity).map(|d| (d, q.clone())).collect();
        [conj].into_iter().collect()
    };
    let mut delta = BTreeMap::new();
    for i in 0..2 {
        for j in 0..2 {
            let l = letter2(i, j);
            let from_a = if j == 1 {
                all(&r)
            } else if i == 1 {
                all(&b)
            } else {
                all(&a0)
            };
            delta.insert((a0.clone(), l.clone()), from_a);
            delta.insert((b.clone(), l.clone()), all(&b));
            delta.insert((r.clone(), l), all(&r));
        }
    }
    Apt {
        arity,
        alphabet: alphabet_2x2(),
        states: [a0.clone(), b.clone(), r.clone()].into_iter().collect(),
        initial: a0.clone(),
        delta,
        color: [(a0, 0), (b, 0), (r, 1)].into_iter().collect(),
        max_color: 1,
    }
}

/// Drop every conjunction that strictly contains another one in the same
/// transition: the smaller conjunction imposes fewer obligations, so by DNF
/// absorption the language is unchanged. Must not be applied inside
/// [`Apt::complement`], whose unminimized form is part of its contract.
pub fn minimize_transitions(a: &Apt) -> Apt {
    let mut delta = BTreeMap::new();
    for (k, dnf) in &a.delta {
        let min: Dnf = dnf
            .iter()
            .filter(|c| !dnf.iter().any(|c2| c2 != *c && c2.is_subset(c)))
            .cloned()
            .collect();
        delta.insert(k.clone(), min);
    }
    Apt { delta, ..a.clone() }
}

/// The minimized De Morgan dual, computed directly as the antichain of
/// minimal hitting sets of each transition's conjunctions (incremental
/// transversal construction, one conjunction at a time). Equal to
/// `minimize_transitions(complement(a))` but without materializing the
/// exponential unminimized dual. Colors shift by one, as in complementation.
pub fn dual_minimized(a: &Apt) -> Result<Apt, AptError> {
    const TRANSVERSAL_CAP: usize = 1 << 20;
    let mut delta = BTreeMap::new();
    for (k, dnf) in &a.delta {
        let mut trans: Vec<Conj> = vec![Conj::new()];
        for edge in dnf {
            let mut next: Vec<Conj> = Vec::new();
            for t in &trans {
                if t.iter().any(|p| edge.contains(p)) {
                    next.push(t.clone());
                } else {
                    for p in edge {
                        let mut t2 = t.clone();
                        t2.insert(p.clone());
                        next.push(t2);
                    }
                }
            }
            // Keep only inclusion-minimal candidates.
            next.sort_by_key(|t| t.len());
            let mut min: Vec<Conj> = Vec::new();
            for t in next {
                if !min.iter().any(|m| m.is_subset(&t)) {
                    min.push(t);
                }
            }
            if min.len() > TRANSVERSAL_CAP {
                return Err(AptError::TooLarge {
                    dir_states: a.arity * a.states.len(),
                    cap_bits: DUAL_CAP_BITS,
                });
            }
            trans = min;
        }
        delta.insert(k.clone(), trans.into_iter().collect::<Dnf>());
    }
    Ok(Apt {
        arity: a.arity,
        alphabet: a.alphabet.clone(),
        states: a.states.clone(),
        initial: a.initial.clone(),
        delta,
        color: a.color.iter().map(|(q, c)| (q.clone(), c + 1)).collect(),
        max_color: a.max_color + 1,
    })
}

/// Compress the coloring onto the smallest parity-faithful range: adjacent
/// used colors of the same parity collapse, and the whole range shifts
/// down to start at 0 or 1. Only the relative order and the parities of
/// colors matter to min-parity acceptance, and the map preserves both, so
/// the language is unchanged. Long complementation chains — each of which
/// shifts every color up by one — stay flat under this pass.
pub fn compress_colors(a: &Apt) -> Apt {
    let used: BTreeSet<usize> = a.color.values().copied().collect();
    let map = parity_compression(&used);
    Apt {
        color: a.color.iter().map(|(q, c)| (q.clone(), map[c])).collect(),
        max_color: map.values().copied().max().unwrap_or(0),
        ..a.clone()
    }
}

/// The order- and parity-preserving map from a set of used colors onto the
/// smallest such range: same-parity neighbors collapse, and the image
/// starts at 0 or 1.
pub(crate) fn parity_compression(used: &BTreeSet<usize>) -> BTreeMap<usize, usize> {
    let mut map = BTreeMap::new();
    let mut next = 0usize;
    let mut prev: Option<usize> = None;
    for &c in used {
        next = match prev {
            None => c % 2,
            Some(p) if p % 2 == c % 2 => next,
            Some(_) => next + 1,
        };
        map.insert(c, next);
        prev = Some(c);
    }
    map
}

/// Quotient by the coarsest exact bisimulation: states are merged when they
/// have the same color and, recursively, identical transition structure.
/// Each class is represented by its canonically least member. Preserves the
/// language — merged states have literally interchangeable behavior.
pub fn quotient_bisim(a: &Apt) -> Apt {
    let states: Vec<HfSet> = a.states.iter().cloned().collect();
    let index: BTreeMap<&HfSet, usize> =
        states.iter().enumerate().map(|(i, q)| (q, i)).collect();
    // Start from color classes and refine by transition signatures until
    // stable.
    let mut class: Vec<usize> = states.iter().map(|q| a.color[q]).collect();
    // Normalize class ids to 0..k.
    loop {
        let mut remap: BTreeMap<Vec<usize>, usize> = BTreeMap::new();
        let mut next: Vec<usize> = Vec::with_capacity(states.len());
        for q in &states {
            // Signature: current class, then per letter the set of
            // conjunctions with states replaced by their classes.
            let mut sig: Vec<usize> = vec![class[index[q]]];
            for letter in &a.alphabet {
                let dnf = &a.delta[&(q.clone(), letter.clone())];
                let mut rows: BTreeSet<Vec<(usize, usize)>> = BTreeSet::new();
                for conj in dnf {
                    rows.insert(conj.iter().map(|(d, q2)| (*d, class[index[q2]])).collect());
                }
                // Fold the row set into the signature via a stable encoding.
                sig.push(rows.len());
                for row in rows {
                    sig.push(row.len());
                    for (d, c) in row {
                        sig.push(d);
                        sig.push(c);
                    }
                }
            }
            let fresh = remap.len();
            next.push(*remap.entry(sig).or_insert(fresh));
        }
        if next == class {
            break;
        }
        class = next;
    }
    // Representative of each class: the canonically least member.
    let mut rep: BTreeMap<usize, HfSet> = BTreeMap::new();
    for (i, q) in states.iter().enumerate() {
        rep.entry(class[i]).or_insert_with(|| q.clone());
    }
    let to_rep = |q: &HfSet| rep[&class[index[q]]].clone();

    let mut delta = BTreeMap::new();
    let mut color = BTreeMap::new();
    for (i, q) in states.iter().enumerate() {
        let r = rep[&class[i]].clone();
        if r != *q {
            continue;
        }
        color.insert(r.clone(), a.color[q]);
        for letter in &a.alphabet {
            let dnf = &a.delta[&(q.clone(), letter.clone())];
            let mapped: Dnf = dnf
                .iter()
                .map(|conj| conj.iter().map(|(d, q2)| (*d, to_rep(q2))).collect())
                .collect();
            delta.insert((r.clone(), letter.clone()), mapped);
        }
    }
    Apt {
        arity: a.arity,
        alphabet: a.alphabet.clone(),
        states: rep.values().cloned().collect(),
        initial: to_rep(&a.initial),
        delta,
        color,
        max_color: a.max_color,
    }
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

fn conj_to_string(c: &Conj) -> String {
    let parts: Vec<String> = c.iter().map(|(d, q)| format!("({d},{q})")).collect();
    format!("{{{}}}", parts.join(","))
}

impl Apt {
    /// Canonical text form; [`Apt::from_text`] inverts it bit-exactly.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("apt arity={} max_color={}\n", self.arity, self.max_color));
        let alpha: Vec<String> = self.alphabet.iter().map(|a| a.to_string()).collect();
        out.push_str(&format!("alphabet: {}\n", alpha.join(" ")));
        let states: Vec<String> = self.states.iter().map(|q| q.to_string()).collect();
        out.push_str(&format!("states: {}\n", states.join(" ")));
        out.push_str(&format!("initial: {}\n", self.initial));
        for ((q, a), dnf) in &self.delta {
            let conjs: Vec<String> = dnf.iter().map(conj_to_string).collect();
            out.push_str(&format!("({q},{a}) -> [{}]\n", conjs.join(",")));
        }
        for (q, c) in &self.color {
            out.push_str(&format!("color: {q} -> {c}\n"));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Apt, AptError> {
        let err = |line: usize, msg: &str| AptError::Parse { line: line + 1, msg: msg.into() };
        let mut lines = text.lines().enumerate();
        let (n0, header) = lines.next().ok_or_else(|| err(0, "empty input"))?;
        let header = header
            .strip_prefix("apt ")
            .ok_or_else(|| err(n0, "expected `apt` header"))?;
        let mut arity = None;
        let mut max_color = None;
        for field in header.split_whitespace() {
            if let Some(v) = field.strip_prefix("arity=") {
                arity = v.parse::<usize>().ok();
            } else if let Some(v) = field.strip_prefix("max_color=") {
                max_color = v.parse::<usize>().ok();
            }
        }
        let arity = arity.ok_or_else(|| err(n0, "missing arity"))?;
        let max_color = max_color.ok_or_else(|| err(n0, "missing max_color"))?;

        let mut alphabet = BTreeSet::new();
        let mut states = BTreeSet::new();
        let mut initial = None;
        let mut delta = BTreeMap::new();
        let mut color = BTreeMap::new();
        for (n, line) in lines {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix("alphabet:") {
                for tok in rest.split_whitespace() {
                    alphabet.insert(HfSet::parse(tok).map_err(|e| err(n, &e.to_string()))?);
                }
            } else if let Some(rest) = line.strip_prefix("states:") {
                for tok in rest.split_whitespace() {
                    states.insert(HfSet::parse(tok).map_err(|e| err(n, &e.to_string()))?);
                }
            } else if let Some(rest) = line.strip_prefix("initial:") {
                initial =
                    Some(HfSet::parse(rest.trim()).map_err(|e| err(n, &e.to_string()))?);
            } else if let Some(rest) = line.strip_prefix("color:") {
                let (q, c) = rest
                    .split_once("->")
                    .ok_or_else(|| err(n, "expected `state -> color`"))?;
                let q = HfSet::parse(q.trim()).map_err(|e| err(n, &e.to_string()))?;
                let c = c.trim().parse::<usize>().map_err(|_| err(n, "bad color"))?;
                color.insert(q, c);
            } else if line.starts_with('(') {
                let (key, dnf_text) = line
                    .split_once("->")
                    .ok_or_else(|| err(n, "expected `(state,letter) -> [dnf]`"))?;
                let key = key.trim();
                let key = key
                    .strip_prefix('(')
                    .and_then(|k| k.strip_suffix(')'))
                    .ok_or_else(|| err(n, "malformed transition key"))?;
                let parts = split_top(key, ',');
                if parts.len() != 2 {
                    return Err(err(n, "transition key must be (state,letter)"));
                }
                let q = HfSet::parse(parts[0]).map_err(|e| err(n, &e.to_string()))?;
                let a = HfSet::parse(parts[1]).map_err(|e| err(n, &e.to_string()))?;
                let dnf_text = dnf_text.trim();
                let dnf_text = dnf_text
                    .strip_prefix('[')
                    .and_then(|t| t.strip_suffix(']'))
                    .ok_or_else(|| err(n, "malformed transition body"))?;
                let mut dnf = Dnf::new();
                for conj_text in split_top(dnf_text, ',') {
                    if conj_text.is_empty() {
                        continue;
                    }
                    let inner = conj_text
                        .strip_prefix('{')
                        .and_then(|t| t.strip_suffix('}'))
                        .ok_or_else(|| err(n, "malformed conjunction"))?;
                    let mut conj = Conj::new();
                    for pair_text in split_top(inner, ',') {
                        let p = pair_text
                            .strip_prefix('(')
                            .and_then(|t| t.strip_suffix(')'))
                            .ok_or_else(|| err(n, "malformed (direction,state) pair"))?;
                        let pp = split_top(p, ',');
                        if pp.len() != 2 {
                            return Err(err(n, "pair must be (direction,state)"));
                        }
                        let d = pp[0].parse::<usize>().map_err(|_| err(n, "bad direction"))?;
                        let q2 = HfSet::parse(pp[1]).map_err(|e| err(n, &e.to_string()))?;
                        conj.insert((d, q2));
                    }
                    dnf.insert(conj);
                }
                delta.insert((q, a), dnf);
            } else {
                return Err(err(n, "unrecognized line"));
            }
        }
        Ok(Apt {
            arity,
            alphabet,
            states,
            initial: initial.ok_or_else(|| err(0, "missing initial state"))?,
            delta,
            color,
            max_color,
        })
    }
}

/// Split on `sep` at brace/paren nesting depth zero.
pub(crate) fn split_top(s: &str, sep: char) -> Vec<&str> {
    let mut parts = Vec::new();
    let mut depth = 0i32;
    let mut start = 0;
    for (i, c) in s.char_indices() {
        match c {
            '{' | '(' | '[' => depth += 1,
            '}' | ')' | ']' => depth -= 1,
            c if c == sep && depth == 0 => {
                parts.push(s[start..i].trim());
                start = i + 1;
            }
            _ => {}
        }
    }
    let last = s[start..].trim();
    if !(last.is_empty() && parts.is_empty()) {
        parts.push(last);
    }
    parts
}

#[cfg(test)]
mod tests {
    use super::*;

    /// A one-state automaton over the one-letter alphabet `1 = {0}` with a
    /// single self-loop conjunction and the given color.
    fn loop_automaton(color_q: usize, arity: usize) -> Apt {
        let q = ordinal(0);
        let a = ordinal(0);
        let conj: Conj = (0..arity).map(|d| (d, q.clone())).collect();
        Apt {
            arity,
            alphabet: [a.clone()].into_iter().collect(),
            states: [q.clone()].into_iter().collect(),
            initial: q.clone(),
            delta: [((q.clone(), a), [conj].into_iter().collect::<Dnf>())]
                .into_iter()
                .collect(),
            color: [(q, color_q)].into_iter().collect(),
            max_color: color_q,
        }
    }

    #[test]
    fn validate_examples() {
        assert!(atomic_subset(2).validate().is_empty());
        assert!(atomic_succ(2, 0).validate().is_empty());
        assert!(atomic_succ(2, 1).validate().is_empty());

        let mut bad = loop_automaton(0, 1);
        let key = (ordinal(0), ordinal(0));
        bad.delta.insert(key, Dnf::new());
        assert!(bad.validate().iter().any(|v| v.contains("empty transition set")));

        let mut bad = loop_automaton(0, 1);
        bad.initial = ordinal(7);
        assert!(bad.validate().iter().any(|v| v.contains("not a state")));
    }

    fn hf_function(pairs: &[(HfSet, HfSet)]) -> HfSet {
        HfSet::from_vec(pairs.iter().map(|(b, a)| hf::pair(b, a)).collect())
    }

    #[test]
    fn substitute_identity_and_constant() {
        let a = atomic_subset(2);
        let id = hf_function(
            &a.alphabet.iter().map(|x| (x.clone(), x.clone())).collect::<Vec<_>>(),
        );
        assert_eq!(a.substitute(&id).unwrap(), a);

        // Constant substitution: all letters behave like (1,0).
        let c = hf_function(
            &a.alphabet.iter().map(|x| (x.clone(), letter2(1, 0))).collect::<Vec<_>>(),
        );
        let sub = a.substitute(&c).unwrap();
        for letter in &sub.alphabet {
            assert_eq!(
                sub.delta[&(ordinal(1), letter.clone())],
                a.delta[&(ordinal(1), letter2(1, 0))],
            );
        }
    }

    #[test]
    fn substitute_first_projection() {
        // Γ = Σ × Σ with f the first projection: δ′(q,(a,b)) = δ(q,a).
        let a = loop_automaton(0, 1);
        let sigma: Vec<HfSet> = vec![ordinal(0)];
        let mut pairs = Vec::new();
        for x in &sigma {
            for y in &sigma {
                pairs.push((hf::pair(x, y), x.clone()));
            }
        }
        let f = hf_function(&pairs);
        let sub = a.substitute(&f).unwrap();
        for x in &sigma {
            for y in &sigma {
                assert_eq!(
                    sub.delta[&(ordinal(0), hf::pair(x, y))],
                    a.delta[&(ordinal(0), x.clone())],
                );
            }
        }
        // Functoriality: substituting identity then f equals substituting f.
        let id = hf_function(
            &a.alphabet.iter().map(|x| (x.clone(), x.clone())).collect::<Vec<_>>(),
        );
        assert_eq!(a.substitute(&id).unwrap().substitute(&f).unwrap(), sub);
    }

    #[test]
    fn substitute_rejects_non_functions() {
        let a = atomic_subset(2);
        let dup = HfSet::from_vec(vec![
            hf::pair(&ordinal(0), &letter2(0, 0)),
            hf::pair(&ordinal(0), &letter2(0, 1)),
        ]);
        assert!(matches!(a.substitute(&dup), Err(AptError::NotAFunction(_))));
        assert!(matches!(
            a.substitute(&HfSet::empty()),
            Err(AptError::EmptyAlphabet)
        ));
    }

    #[test]
    fn disjoin_state_count_and_colors() {
        let a = atomic_subset(2);
        let b = atomic_subset(2);
        let d = a.disjoin(&b).unwrap();
        assert_eq!(d.states.len(), 5);
        assert!(d.validate().is_empty());
        assert_eq!(d.color[&d.initial], 1);
        assert_eq!(d.max_color, 1);
        // The fresh initial combines both operands' initial moves.
        let moves = &d.delta[&(d.initial.clone(), letter2(1, 0))];
        assert_eq!(moves.len(), 2);
    }

    #[test]
    fn disjoin_rejects_mismatches() {
        let a = atomic_subset(2);
        let b = loop_automaton(0, 2);
        assert!(matches!(a.disjoin(&b), Err(AptError::AlphabetMismatch)));
        let c = atomic_subset(3);
        assert!(matches!(a.disjoin(&c), Err(AptError::ArityMismatch)));
    }

    #[test]
    fn complement_examples() {
        // Single state, one direction: the only nonempty subset of
        // {(0,q)} is {(0,q)} itself, and it meets the lone conjunction.
        let a = loop_automaton(0, 1);
        let c = a.complement().unwrap();
        let q = ordinal(0);
        let conj: Conj = [(0usize, q.clone())].into_iter().collect();
        assert_eq!(
            c.delta[&(q.clone(), ordinal(0))],
            [conj].into_iter().collect::<Dnf>()
        );
        assert_eq!(c.color[&q], 1);
        assert_eq!(c.max_color, 1);

        // Dir × Q = {x, y} with δ = {{x},{y}}: only {x,y} meets both.
        let x = ordinal(0);
        let y = ordinal(1);
        let a2 = Apt {
            arity: 1,
            alphabet: [ordinal(0)].into_iter().collect(),
            states: [x.clone(), y.clone()].into_iter().collect(),
            initial: x.clone(),
            delta: {
                let cx: Conj = [(0usize, x.clone())].into_iter().collect();
                let cy: Conj = [(0usize, y.clone())].into_iter().collect();
                let dnf: Dnf = [cx, cy].into_iter().collect();
                [
                    ((x.clone(), ordinal(0)), dnf.clone()),
                    ((y.clone(), ordinal(0)), dnf),
                ]
                .into_iter()
                .collect()
            },
            color: [(x.clone(), 0), (y.clone(), 0)].into_iter().collect(),
            max_color: 0,
        };
        let c2 = a2.complement().unwrap();
        let full: Conj = [(0usize, x.clone()), (0usize, y.clone())].into_iter().collect();
        assert_eq!(
            c2.delta[&(x.clone(), ordinal(0))],
            [full].into_iter().collect::<Dnf>()
        );
    }

    /// Independent oracle: the De Morgan dual computed by explicit subset
    /// recursion over the ground set (no bitmasks).
    fn dual_oracle(ground: &[(usize, HfSet)], dnf: &Dnf) -> Dnf {
        fn subsets(items: &[(usize, HfSet)]) -> Vec<Conj> {
            match items.split_first() {
                None => vec![Conj::new()],
                Some((head, rest)) => {
                    let tail = subsets(rest);
                    let mut all = tail.clone();
                    for mut s in tail {
                        s.insert(head.clone());
                        all.push(s);
                    }
                    all
                }
            }
        }
        subsets(ground)
            .into_iter()
            .filter(|s| !s.is_empty())
            .filter(|s| dnf.iter().all(|c| c.intersection(s).next().is_some()))
            .collect()
    }

    #[test]
    fn complement_matches_oracle_on_small_ground_sets() {
        // Exhaust all DNFs over tiny ground sets: |Dir × Q| = 2 here; the
        // acceptance suite extends this to 4 with random sampling.
        let q = ordinal(0);
        let ground: Vec<(usize, HfSet)> = vec![(0, q.clone()), (1, q.clone())];
        let conjs = [
            [(0usize, q.clone())].into_iter().collect::<Conj>(),
            [(1usize, q.clone())].into_iter().collect::<Conj>(),
            [(0usize, q.clone()), (1usize, q.clone())].into_iter().collect::<Conj>(),
        ];
        for mask in 1usize..8 {
            let dnf: Dnf = conjs
                .iter()
                .enumerate()
                .filter(|(i, _)| mask >> i & 1 == 1)
                .map(|(_, c)| c.clone())
                .collect();
            let a = Apt {
                arity: 2,
                alphabet: [ordinal(0)].into_iter().collect(),
                states: [q.clone()].into_iter().collect(),
                initial: q.clone(),
                delta: [((q.clone(), ordinal(0)), dnf.clone())].into_iter().collect(),
                color: [(q.clone(), 0)].into_iter().collect(),
                max_color: 0,
            };
            let c = a.complement().unwrap();
            assert_eq!(
                c.delta[&(q.clone(), ordinal(0))],
                dual_oracle(&ground, &dnf),
                "dual mismatch for dnf mask {mask}"
            );
        }
    }

    #[test]
    fn dual_minimized_equals_minimized_complement() {
        for a in [atomic_subset(2), atomic_succ(2, 0), atomic_succ(2, 1)] {
            let direct = dual_minimized(&a).unwrap();
            let via = minimize_transitions(&a.complement().unwrap());
            assert_eq!(direct, via);
        }
    }

    #[test]
    fn project_examples() {
        // Substitute an automaton over Σ to Σ × Γ via first projection,
        // then project back: transitions collapse to the originals.
        let a = atomic_subset(2);
        let two: Vec<HfSet> = vec![ordinal(0), ordinal(1)];
        let mut pairs = Vec::new();
        for x in &a.alphabet {
            for b in &two {
                pairs.push((hf::pair(x, b), x.clone()));
            }
        }
        let widened = a.substitute(&hf_function(&pairs)).unwrap();
        let back = widened.project(&ordinal(2)).unwrap();
        assert_eq!(back, a);
        assert_eq!(back.states.len(), a.states.len());

        // Singleton factor: projection just strips the second component.
        let mut pairs1 = Vec::new();
        for x in &a.alphabet {
            pairs1.push((hf::pair(x, &ordinal(0)), x.clone()));
        }
        let w1 = a.substitute(&hf_function(&pairs1)).unwrap();
        assert_eq!(w1.project(&ordinal(1)).unwrap(), a);
    }

    #[test]
    fn project_rejects_non_products() {
        let a = atomic_subset(2);
        assert!(matches!(
            a.project(&ordinal(3)),
            Err(AptError::AlphabetNotProduct(_))
        ));
        let b = loop_automaton(0, 1);
        assert!(matches!(
            b.project(&ordinal(1)),
            Err(AptError::AlphabetNotProduct(_))
        ));
    }

    #[test]
    fn nondeterminism_check() {
        assert!(atomic_subset(2).is_nondeterministic());
        assert!(atomic_succ(2, 0).is_nondeterministic());
        let q = ordinal(0);
        let q2 = ordinal(1);
        let conj: Conj = [(0usize, q.clone()), (0usize, q2.clone())].into_iter().collect();
        let a = Apt {
            arity: 1,
            alphabet: [ordinal(0)].into_iter().collect(),
            states: [q.clone(), q2.clone()].into_iter().collect(),
            initial: q.clone(),
            delta: [
                ((q.clone(), ordinal(0)), [conj].into_iter().collect::<Dnf>()),
                (
                    (q2.clone(), ordinal(0)),
                    [[(0usize, q2.clone())].into_iter().collect::<Conj>()]
                        .into_iter()
                        .collect::<Dnf>(),
                ),
            ]
            .into_iter()
            .collect(),
            color: [(q, 0), (q2, 0)].into_iter().collect(),
            max_color: 0,
        };
        assert!(!a.is_nondeterministic());
    }

    #[test]
    fn atomic_tables() {
        let sub = atomic_subset(2);
        let t = ordinal(1);
        let f = ordinal(0);
        let all_f: Conj = [(0usize, f.clone()), (1usize, f.clone())].into_iter().collect();
        let all_t: Conj = [(0usize, t.clone()), (1usize, t.clone())].into_iter().collect();
        assert_eq!(
            sub.delta[&(t.clone(), letter2(1, 0))],
            [all_f.clone()].into_iter().collect::<Dnf>()
        );
        for (i, j) in [(0, 0), (0, 1), (1, 1)] {
            assert_eq!(
                sub.delta[&(t.clone(), letter2(i, j))],
                [all_t.clone()].into_iter().collect::<Dnf>()
            );
        }
        for i in 0..2 {
            for j in 0..2 {
                assert_eq!(
                    sub.delta[&(f.clone(), letter2(i, j))],
                    [all_f.clone()].into_iter().collect::<Dnf>()
                );
            }
        }

        let succ = atomic_succ(2, 0);
        let fs = hf::inl(&ordinal(0));
        let ws = hf::inr(&ordinal(0));
        for j in 0..2 {
            assert_eq!(
                succ.delta[&(fs.clone(), letter2(1, j))],
                [[(0usize, ws.clone())].into_iter().collect::<Conj>()]
                    .into_iter()
                    .collect::<Dnf>()
            );
            let expect: Dnf = (0..2)
                .map(|d| [(d, fs.clone())].into_iter().collect::<Conj>())
                .collect();
            assert_eq!(succ.delta[&(fs.clone(), letter2(0, j))], expect);
        }
        assert_eq!(succ.color[&ws], 0);
        assert_eq!(succ.color[&fs], 1);
    }

    #[test]
    fn conjoin_state_count() {
        let a = atomic_subset(2);
        let c = a.conjoin(&a).unwrap();
        assert_eq!(c.states.len(), a.states.len() * 2 + 1);
        assert!(c.validate().is_empty());
    }

    #[test]
    fn reachable_trim_examples() {
        let a = atomic_subset(2);
        assert_eq!(a.reachable_trim(), a);

        let mut padded = a.clone();
        let extra = ordinal(7);
        padded.states.insert(extra.clone());
        padded.color.insert(extra.clone(), 0);
        for letter in padded.alphabet.clone() {
            let conj: Conj = (0..2).map(|d| (d, extra.clone())).collect();
            padded
                .delta
                .insert((extra.clone(), letter), [conj].into_iter().collect());
        }
        assert!(padded.validate().is_empty());
        assert_eq!(padded.reachable_trim(), a);
    }

    #[test]
    fn quotient_bisim_merges_copies() {
        // Disjoining an automaton with itself creates mergeable twins.
        let a = atomic_subset(2);
        let d = a.disjoin(&a).unwrap();
        let q = quotient_bisim(&d.reachable_trim());
        assert!(q.validate().is_empty());
        assert!(q.states.len() < d.reachable_trim().states.len());
        // Quotient is idempotent.
        assert_eq!(quotient_bisim(&q), q);
    }

    #[test]
    fn compress_colors_is_parity_faithful() {
        // Colors {1, 3} are both odd: they collapse to a single 1.
        let base = atomic_subset(2);
        let mut a = base.clone();
        a.color = [(ordinal(0), 3), (ordinal(1), 1)].into_iter().collect();
        a.max_color = 3;
        let c = compress_colors(&a);
        assert!(c.color.values().all(|&v| v == 1));
        assert_eq!(c.max_color, 1);

        // {2, 3} shifts down to {0, 1}, order preserved.
        a.color = [(ordinal(0), 2), (ordinal(1), 3)].into_iter().collect();
        let c = compress_colors(&a);
        assert_eq!(c.color[&ordinal(0)], 0);
        assert_eq!(c.color[&ordinal(1)], 1);

        // Already-compact colorings are untouched.
        assert_eq!(compress_colors(&base), base);
    }

    #[test]
    fn minimize_transitions_keeps_antichain() {
        let q = ordinal(0);
        let small: Conj = [(0usize, q.clone())].into_iter().collect();
        let big: Conj = [(0usize, q.clone()), (1usize, q.clone())].into_iter().collect();
        let a = Apt {
            arity: 2,
            alphabet: [ordinal(0)].into_iter().collect(),
            states: [q.clone()].into_iter().collect(),
            initial: q.clone(),
            delta: [(
                (q.clone(), ordinal(0)),
                [small.clone(), big].into_iter().collect::<Dnf>(),
            )]
            .into_iter()
            .collect(),
            color: [(q.clone(), 0)].into_iter().collect(),
            max_color: 0,
        };
        let m = minimize_transitions(&a);
        assert_eq!(
            m.delta[&(q.clone(), ordinal(0))],
            [small].into_iter().collect::<Dnf>()
        );
    }

    #[test]
    fn text_round_trip() {
        for a in [
            atomic_subset(2),
            atomic_succ(2, 1),
            atomic_subset(2).disjoin(&atomic_succ(2, 0)).unwrap(),
            atomic_subset(2).complement().unwrap(),
        ] {
            let text = a.to_text();
            let back = Apt::from_text(&text).unwrap();
            assert_eq!(back, a);
            assert_eq!(back.to_text(), text);
        }
    }
}
