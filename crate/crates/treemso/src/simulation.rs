//! The simulation pipeline: from an alternating parity tree automaton to an
//! equivalent nondeterministic one.
//!
//! The route has four stages. [`bang`] runs the subset-of-pairs
//! construction: states of `!A` are nonempty relations over `Q_A`, and a
//! transition chooses, via a choice function, one conjunction of `A` per
//! state in the relation's range. A branch of a run of `!A` spells an
//! ω-word of relations; a *trace* through that word is a sequence of
//! `A`-states threaded by consecutive relations, and the branch is good
//! when every trace satisfies the min-parity condition. [`nbw_bad_trace`]
//! builds a nondeterministic Büchi word automaton accepting exactly the
//! words with a *bad* trace; [`determinize`] turns it into a deterministic
//! parity word automaton (a Safra-tree construction with compact renaming),
//! which [`complement_dpw`] dualizes by shifting colors. Finally [`nd`]
//! takes the product of `!A` with that deterministic monitor, yielding a
//! nondeterministic parity automaton with the same language as `A`.
//!
//! Every stage has an executable oracle: [`nbw_lasso_accepts`] decides
//! Büchi membership of ultimately periodic words by product-graph cycle
//! search, and [`all_traces_accepting_lasso`] decides the trace condition
//! itself by cycle analysis of the finite trace graph. The determinization
//! is validated against these on all small lassos.

use crate::automata::{split_top, Apt, Conj, Dnf};
use crate::games::scc;
use crate::hf::{self, ordinal, HfSet};
use std::collections::{BTreeMap, BTreeSet, VecDeque};
use thiserror::Error;

/// Default bound on constructed state spaces (`!A` states, Safra trees,
/// product states).
pub const DEFAULT_STATE_CAP: usize = 50_000;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("{stage} exceeded the state cap: {size} > {cap}")]
    TooLarge { stage: String, size: usize, cap: usize },
    #[error("letter {0} is not in the automaton's alphabet")]
    UnknownLetter(String),
}

// ---------------------------------------------------------------------------
// The !A subset-of-pairs construction
// ---------------------------------------------------------------------------

/// The subset construction over `A`: an Apt-shaped transition structure
/// whose states are nonempty relations on `Q_A` (reachable part only),
/// starting from the singleton relation `{(q̇, q̇)}`. It carries `A`'s
/// coloring for the trace condition instead of a coloring of its own.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BangAutomaton {
    pub arity: usize,
    pub alphabet: BTreeSet<HfSet>,
    /// Each state is an HF-set of Kuratowski pairs over `Q_A`.
    pub states: BTreeSet<HfSet>,
    pub initial: HfSet,
    pub delta: BTreeMap<(HfSet, HfSet), Dnf>,
    /// The source automaton's coloring, for evaluating traces.
    pub source_color: BTreeMap<HfSet, usize>,
    pub source_max_color: usize,
}

impl BangAutomaton {
    /// Same check as for plain automata: every conjunction names each
    /// direction at most once. Holds by construction — a conjunction has
    /// exactly one entry per nonempty successor relation.
    pub fn is_nondeterministic(&self) -> bool {
        self.delta.values().all(|dnf| {
            dnf.iter().all(|conj| {
                let mut dirs = BTreeSet::new();
                conj.iter().all(|(d, _)| dirs.insert(*d))
            })
        })
    }
}

/// Decode a relation state into its list of pairs.
fn decode_rel(s: &HfSet) -> Vec<(HfSet, HfSet)> {
    s.elems()
        .iter()
        .map(|e| hf::unpair(e).expect("relation letters must contain only pairs"))
        .collect()
}

/// The range `π₂(S)` of a relation state.
fn rel_range(s: &HfSet) -> BTreeSet<HfSet> {
    decode_rel(s).into_iter().map(|(_, q2)| q2).collect()
}

/// The subset-of-pairs construction. For a state `S` and letter `a`, every
/// choice function `f` picking one conjunction `f(q) ∈ δ_A(q, a)` per
/// `q ∈ π₂(S)` contributes the conjunction
/// `!C = {(d, S′_d) | d ∈ Dir, S′_d ≠ ∅}` where
/// `S′_d = {(q, q′) | q ∈ π₂(S), (d, q′) ∈ f(q)}`. Distinct choice
/// functions yielding the same `!C` are deduplicated, and only states
/// reachable from `{(q̇, q̇)}` are kept.
pub fn bang(a: &Apt, cap: usize) -> Result<BangAutomaton, SimError> {
    let initial = HfSet::singleton(hf::pair(&a.initial, &a.initial));
    let mut states: BTreeSet<HfSet> = [initial.clone()].into_iter().collect();
    let mut delta: BTreeMap<(HfSet, HfSet), Dnf> = BTreeMap::new();
    let mut queue: VecDeque<HfSet> = [initial.clone()].into();

    while let Some(s) = queue.pop_front() {
        let range: Vec<HfSet> = rel_range(&s).into_iter().collect();
        for letter in &a.alphabet {
            // The conjunction menu per range state.
            let menus: Vec<Vec<&Conj>> = range
                .iter()
                .map(|q| a.delta[&(q.clone(), letter.clone())].iter().collect())
                .collect();
            let mut dnf = Dnf::new();
            // Odometer over all choice functions.
            let mut pick = vec![0usize; menus.len()];
            loop {
                let mut succ_rel: BTreeMap<usize, BTreeSet<HfSet>> = BTreeMap::new();
                for (i, q) in range.iter().enumerate() {
                    for (d, q2) in menus[i][pick[i]] {
                        succ_rel
                            .entry(*d)
                            .or_default()
                            .insert(hf::pair(q, q2));
                    }
                }
                let conj: Conj = succ_rel
                    .into_iter()
                    .map(|(d, rel)| (d, HfSet::from_vec(rel.into_iter().collect())))
                    .collect();
                dnf.insert(conj);

                // Advance the odometer.
                let mut i = 0;
                loop {
                    if i == pick.len() {
                        break;
                    }
                    pick[i] += 1;
                    if pick[i] < menus[i].len() {
                        break;
                    }
                    pick[i] = 0;
                    i += 1;
                }
                if i == pick.len() {
                    break;
                }
            }
            for conj in &dnf {
                for (_, s2) in conj {
                    if states.insert(s2.clone()) {
                        if states.len() > cap {
                            return Err(SimError::TooLarge {
                                stage: "subset construction".to_string(),
                                size: states.len(),
                                cap,
                            });
                        }
                        queue.push_back(s2.clone());
                    }
                }
            }
            delta.insert((s.clone(), letter.clone()), dnf);
        }
    }

    Ok(BangAutomaton {
        arity: a.arity,
        alphabet: a.alphabet.clone(),
        states,
        initial,
        delta,
        source_color: a.color.clone(),
        source_max_color: a.max_color,
    })
}

// ---------------------------------------------------------------------------
// Büchi word automata
// ---------------------------------------------------------------------------

/// A nondeterministic Büchi word automaton. The transition relation may
/// have dead ends; a run that cannot continue rejects.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Nbw {
    pub alphabet: BTreeSet<HfSet>,
    pub states: BTreeSet<HfSet>,
    pub initial: BTreeSet<HfSet>,
    pub trans: BTreeMap<(HfSet, HfSet), BTreeSet<HfSet>>,
    pub accepting: BTreeSet<HfSet>,
}

fn nbw_init() -> HfSet {
    hf::pair(&ordinal(0), &ordinal(0))
}
fn nbw_track(q: &HfSet) -> HfSet {
    hf::pair(&ordinal(1), q)
}
fn nbw_commit(q: &HfSet, m: usize, saw: bool) -> HfSet {
    hf::pair(
        &ordinal(2),
        &hf::pair(q, &hf::pair(&ordinal(m), &ordinal(saw as usize))),
    )
}

/// The bad-trace recognizer over relation letters: it accepts an ω-word
/// `S₀ S₁ …` exactly when some trace `q₀, q₁, …` — with `q₀ = q̇_A`,
/// `q₀ ∈ π₂(S₀)` and `(q_i, q_{i+1}) ∈ S_{i+1}` — has an odd minimal
/// infinitely-occurring color under `col_A`.
///
/// States: a pre-guess phase following the trace, then a committed phase
/// `(q, m, saw)` for a guessed odd pivot `m`, entered only while colors
/// stay `≥ m`; the flag records whether the current color equals `m`, and
/// the Büchi set is the flagged states. A run is accepting exactly when
/// the trace's minimal recurring color is the odd `m`.
pub fn nbw_bad_trace(a: &Apt, letters: &BTreeSet<HfSet>) -> Nbw {
    let pivots: Vec<usize> = (0..=a.max_color).filter(|m| m % 2 == 1).collect();
    let init = nbw_init();
    let mut nbw = Nbw {
        alphabet: letters.clone(),
        states: [init.clone()].into_iter().collect(),
        initial: [init.clone()].into_iter().collect(),
        trans: BTreeMap::new(),
        accepting: BTreeSet::new(),
    };

    // Successors of an A-state `q` through a relation letter.
    let rel_succ = |q: &HfSet, letter: &HfSet| -> Vec<HfSet> {
        decode_rel(letter)
            .into_iter()
            .filter(|(q1, _)| q1 == q)
            .map(|(_, q2)| q2)
            .collect()
    };

    let mut queue: VecDeque<HfSet> = [init.clone()].into();
    while let Some(s) = queue.pop_front() {
        for letter in letters {
            let mut targets: BTreeSet<HfSet> = BTreeSet::new();
            if s == init {
                // Start the trace at q̇_A, provided the first relation's
                // range contains it.
                if rel_range(letter).contains(&a.initial) {
                    targets.insert(nbw_track(&a.initial));
                }
            } else {
                let (tag, payload) = hf::unpair(&s).expect("tagged NBW state");
                let tag = tag.as_ordinal().expect("tagged NBW state");
                let (q, committed) = if tag == 1 {
                    (payload.clone(), None)
                } else {
                    let (q, rest) = hf::unpair(&payload).expect("commit payload");
                    let (m, _) = hf::unpair(&rest).expect("commit payload");
                    (q, Some(m.as_ordinal().expect("pivot ordinal")))
                };
                for q2 in rel_succ(&q, letter) {
                    let c2 = a.color[&q2];
                    match committed {
                        None => {
                            targets.insert(nbw_track(&q2));
                            for &m in &pivots {
                                if c2 >= m {
                                    targets.insert(nbw_commit(&q2, m, c2 == m));
                                }
                            }
                        }
                        Some(m) => {
                            if c2 >= m {
                                targets.insert(nbw_commit(&q2, m, c2 == m));
                            }
                        }
                    }
                }
            }
            for t in &targets {
                if nbw.states.insert(t.clone()) {
                    queue.push_back(t.clone());
                }
            }
            nbw.trans.insert((s.clone(), letter.clone()), targets);
        }
    }

    for s in &nbw.states {
        if let Ok((tag, payload)) = hf::unpair(s) {
            if tag.as_ordinal().ok() == Some(2) {
                let (_, rest) = hf::unpair(&payload).expect("commit payload");
                let (_, saw) = hf::unpair(&rest).expect("commit payload");
                if saw.as_ordinal().ok() == Some(1) {
                    nbw.accepting.insert(s.clone());
                }
            }
        }
    }
    nbw
}

/// Büchi membership of the ultimately periodic word `u · v^ω`, decided by
/// cycle search in the product of the automaton with the lasso positions.
/// This is the independent oracle for [`determinize`].
pub fn nbw_lasso_accepts(n: &Nbw, u: &[HfSet], v: &[HfSet]) -> bool {
    assert!(!v.is_empty(), "lasso period must be nonempty");
    let states: Vec<HfSet> = n.states.iter().cloned().collect();
    let index: BTreeMap<&HfSet, usize> =
        states.iter().enumerate().map(|(i, s)| (s, i)).collect();
    let period = u.len() + v.len();
    let letter_at = |pos: usize| -> &HfSet {
        if pos < u.len() {
            &u[pos]
        } else {
            &v[pos - u.len()]
        }
    };
    let wrap = |pos: usize| -> usize {
        if pos + 1 < period {
            pos + 1
        } else {
            u.len()
        }
    };
    // Product nodes: state index * period + position.
    let node = |s: usize, p: usize| s * period + p;
    let total = states.len() * period;
    let mut edges: Vec<Vec<usize>> = vec![Vec::new(); total];
    let mut keep = vec![false; total];
    let mut stack: Vec<usize> = Vec::new();
    for s0 in &n.initial {
        let v0 = node(index[s0], 0);
        if !keep[v0] {
            keep[v0] = true;
            stack.push(v0);
        }
    }
    while let Some(x) = stack.pop() {
        let (s, p) = (x / period, x % period);
        if let Some(ts) = n.trans.get(&(states[s].clone(), letter_at(p).clone())) {
            for t in ts {
                let y = node(index[t], wrap(p));
                edges[x].push(y);
                if !keep[y] {
                    keep[y] = true;
                    stack.push(y);
                }
            }
        }
    }
    let comp = scc(&edges, &keep);
    let mut size: BTreeMap<usize, usize> = BTreeMap::new();
    for x in 0..total {
        if keep[x] {
            *size.entry(comp[x]).or_insert(0) += 1;
        }
    }
    // An accepting run exists iff a reachable cyclic component contains an
    // accepting state.
    for x in 0..total {
        if !keep[x] {
            continue;
        }
        let s = x / period;
        if !n.accepting.contains(&states[s]) {
            continue;
        }
        let cyclic = size[&comp[x]] > 1 || edges[x].contains(&x);
        if cyclic {
            return true;
        }
    }
    false
}

// ---------------------------------------------------------------------------
// Determinization to parity
// ---------------------------------------------------------------------------

/// A deterministic parity word automaton with min-parity acceptance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dpw {
    pub alphabet: BTreeSet<HfSet>,
    pub states: BTreeSet<HfSet>,
    pub initial: HfSet,
    pub trans: BTreeMap<(HfSet, HfSet), HfSet>,
    pub color: BTreeMap<HfSet, usize>,
    pub max_color: usize,
}

/// A Safra tree node: a name, a set of NBW states (as indices into the
/// sorted state list), and an age-ordered list of children (oldest first).
/// Invariants between transitions: sibling labels are disjoint, the union
/// of children's labels is a proper subset of the parent's, all labels are
/// nonempty, and names are exactly `{1, …, #nodes}`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
struct SNode {
    name: usize,
    label: BTreeSet<usize>,
    children: Vec<SNode>,
}

type STree = Option<SNode>;

struct Determinizer {
    letters: Vec<HfSet>,
    /// delta[state][letter] = successor indices.
    delta: Vec<Vec<BTreeSet<usize>>>,
    accepting: BTreeSet<usize>,
    initial: BTreeSet<usize>,
    /// Number of NBW states; trees never have more nodes than this.
    n: usize,
}

impl Determinizer {
    fn new(nbw: &Nbw) -> Determinizer {
        let states: Vec<HfSet> = nbw.states.iter().cloned().collect();
        let index: BTreeMap<&HfSet, usize> =
            states.iter().enumerate().map(|(i, s)| (s, i)).collect();
        let letters: Vec<HfSet> = nbw.alphabet.iter().cloned().collect();
        let mut delta = vec![vec![BTreeSet::new(); letters.len()]; states.len()];
        for ((s, a), ts) in &nbw.trans {
            let ai = letters.iter().position(|l| l == a).unwrap();
            delta[index[s]][ai] = ts.iter().map(|t| index[t]).collect();
        }
        Determinizer {
            letters,
            delta,
            accepting: nbw.accepting.iter().map(|s| index[s]).collect(),
            initial: nbw.initial.iter().map(|s| index[s]).collect(),
            n: states.len(),
        }
    }

    /// The color emitted when nothing happens; odd, and larger than every
    /// meaningful color. Names in flight are bounded by `2n` (at most `n`
    /// surviving nodes, each spawning at most one child).
    fn neutral(&self) -> usize {
        4 * self.n.max(1) + 1
    }

    /// One deterministic step: the Safra-tree transition together with the
    /// emitted color `min(2e − 1, 2f)`, where `e` is the least name deleted
    /// and `f` the least name marked by a vertical merge (pre-renaming).
    fn step(&self, tree: &STree, letter: usize) -> (STree, usize) {
        let mut root = match tree {
            // The empty tree is the rejecting sink: color 1 forever.
            None => return (None, 1),
            Some(r) => r.clone(),
        };
        let mut deleted: Vec<usize> = Vec::new();
        let mut marked: Vec<usize> = Vec::new();

        // 1. Powerset step on every label.
        fn powerset(det: &Determinizer, v: &mut SNode, letter: usize) {
            let mut next = BTreeSet::new();
            for &q in &v.label {
                next.extend(det.delta[q][letter].iter().copied());
            }
            v.label = next;
            for c in &mut v.children {
                powerset(det, c, letter);
            }
        }
        powerset(self, &mut root, letter);

        // 2. Spawn a youngest child with the accepting part of each label,
        //    naming new nodes in preorder past the largest existing name.
        fn max_name(v: &SNode) -> usize {
            v.children.iter().map(max_name).fold(v.name, usize::max)
        }
        let mut fresh = max_name(&root) + 1;
        fn spawn(det: &Determinizer, v: &mut SNode, fresh: &mut usize) {
            for c in &mut v.children {
                spawn(det, c, fresh);
            }
            let acc: BTreeSet<usize> =
                v.label.intersection(&det.accepting).copied().collect();
            if !acc.is_empty() {
                v.children.push(SNode { name: *fresh, label: acc, children: Vec::new() });
                *fresh += 1;
            }
        }
        spawn(self, &mut root, &mut fresh);

        // 3. Horizontal merge: each state stays only in the oldest child
        //    containing it; restrictions propagate down the subtree.
        fn restrict(v: &mut SNode, allowed: &BTreeSet<usize>) {
            v.label = v.label.intersection(allowed).copied().collect();
            let lbl = v.label.clone();
            for c in &mut v.children {
                restrict(c, &lbl);
            }
        }
        fn hmerge(v: &mut SNode) {
            let mut seen: BTreeSet<usize> = BTreeSet::new();
            for c in &mut v.children {
                let allowed: BTreeSet<usize> =
                    c.label.difference(&seen).copied().collect();
                restrict(c, &allowed);
                seen.extend(c.label.iter().copied());
            }
            for c in &mut v.children {
                hmerge(c);
            }
        }
        hmerge(&mut root);

        // 4. Delete empty nodes (their whole subtrees are empty).
        fn names(v: &SNode, out: &mut Vec<usize>) {
            out.push(v.name);
            for c in &v.children {
                names(c, out);
            }
        }
        fn prune(v: &mut SNode, deleted: &mut Vec<usize>) {
            v.children.retain_mut(|c| {
                if c.label.is_empty() {
                    names(c, deleted);
                    false
                } else {
                    prune(c, deleted);
                    true
                }
            });
        }
        if root.label.is_empty() {
            names(&root, &mut deleted);
            let e = deleted.iter().min().copied().unwrap();
            return (None, 2 * e - 1);
        }
        prune(&mut root, &mut deleted);

        // 5. Vertical merge: a node whose children exactly cover it drops
        //    its subtree and is marked.
        fn vmerge(v: &mut SNode, deleted: &mut Vec<usize>, marked: &mut Vec<usize>) {
            let union: BTreeSet<usize> = v
                .children
                .iter()
                .flat_map(|c| c.label.iter().copied())
                .collect();
            if !v.children.is_empty() && union == v.label {
                for c in &v.children {
                    names(c, deleted);
                }
                v.children.clear();
                marked.push(v.name);
            } else {
                for c in &mut v.children {
                    vmerge(c, deleted, marked);
                }
            }
        }
        vmerge(&mut root, &mut deleted, &mut marked);

        // 6. Compact renaming: surviving names collapse order-preservingly
        //    onto {1, …, m}.
        let mut survivors = Vec::new();
        names(&root, &mut survivors);
        survivors.sort_unstable();
        let rank: BTreeMap<usize, usize> =
            survivors.iter().enumerate().map(|(i, &n)| (n, i + 1)).collect();
        fn rename(v: &mut SNode, rank: &BTreeMap<usize, usize>) {
            v.name = rank[&v.name];
            for c in &mut v.children {
                rename(c, rank);
            }
        }
        rename(&mut root, &rank);

        let e = deleted.iter().min().map(|&e| 2 * e - 1);
        let f = marked.iter().min().map(|&f| 2 * f);
        let color = e.unwrap_or(usize::MAX).min(f.unwrap_or(usize::MAX));
        let color = if color == usize::MAX { self.neutral() } else { color };
        (Some(root), color)
    }

    fn initial_tree(&self) -> STree {
        if self.initial.is_empty() {
            None
        } else {
            Some(SNode { name: 1, label: self.initial.clone(), children: Vec::new() })
        }
    }
}

/// Canonical HF-set encoding of a Safra tree (node = (name, (label,
/// children)), child lists as position-indexed sets), paired with the
/// entry color.
fn tree_to_hf(t: &STree) -> HfSet {
    fn node_to_hf(v: &SNode) -> HfSet {
        let label = HfSet::from_vec(v.label.iter().map(|&q| ordinal(q)).collect());
        let children = HfSet::from_vec(
            v.children
                .iter()
                .enumerate()
                .map(|(i, c)| hf::pair(&ordinal(i), &node_to_hf(c)))
                .collect(),
        );
        hf::pair(&ordinal(v.name), &hf::pair(&label, &children))
    }
    match t {
        None => HfSet::empty(),
        Some(root) => HfSet::singleton(node_to_hf(root)),
    }
}

/// Remove states that cannot take part in any accepting run: those not
/// reachable from an initial state, or from which no accepting state on a
/// cycle is reachable (in the transition graph over all letters). The
/// language is unchanged, and the Safra base set shrinks accordingly.
fn trim_nbw(n: &Nbw) -> Nbw {
    let states: Vec<HfSet> = n.states.iter().cloned().collect();
    let index: BTreeMap<&HfSet, usize> =
        states.iter().enumerate().map(|(i, s)| (s, i)).collect();
    let mut edges: Vec<Vec<usize>> = vec![Vec::new(); states.len()];
    for ((s, _), ts) in &n.trans {
        for t in ts {
            edges[index[s]].push(index[t]);
        }
    }
    // Forward reachability from the initial states.
    let mut fwd = vec![false; states.len()];
    let mut stack: Vec<usize> = n.initial.iter().map(|s| index[s]).collect();
    for &x in &stack {
        fwd[x] = true;
    }
    while let Some(x) = stack.pop() {
        for &y in &edges[x] {
            if !fwd[y] {
                fwd[y] = true;
                stack.push(y);
            }
        }
    }
    // Accepting states on cycles, then backward reachability to them.
    let all = vec![true; states.len()];
    let comp = scc(&edges, &all);
    let mut size: BTreeMap<usize, usize> = BTreeMap::new();
    for x in 0..states.len() {
        *size.entry(comp[x]).or_insert(0) += 1;
    }
    let mut live = vec![false; states.len()];
    let mut stack = Vec::new();
    for x in 0..states.len() {
        if n.accepting.contains(&states[x])
            && (size[&comp[x]] > 1 || edges[x].contains(&x))
        {
            live[x] = true;
            stack.push(x);
        }
    }
    let mut back: Vec<Vec<usize>> = vec![Vec::new(); states.len()];
    for x in 0..states.len() {
        for &y in &edges[x] {
            back[y].push(x);
        }
    }
    while let Some(x) = stack.pop() {
        for &y in &back[x] {
            if !live[y] {
                live[y] = true;
                stack.push(y);
            }
        }
    }
    let useful = |s: &HfSet| fwd[index[s]] && live[index[s]];
    Nbw {
        alphabet: n.alphabet.clone(),
        states: n.states.iter().filter(|s| useful(s)).cloned().collect(),
        initial: n.initial.iter().filter(|s| useful(s)).cloned().collect(),
        trans: n
            .trans
            .iter()
            .filter(|((s, _), _)| useful(s))
            .map(|((s, a), ts)| {
                let kept = ts.iter().filter(|t| useful(t)).cloned().collect();
                ((s.clone(), a.clone()), kept)
            })
            .collect(),
        accepting: n.accepting.iter().filter(|s| useful(s)).cloned().collect(),
    }
}

/// Determinize a Büchi automaton into a parity automaton on the same
/// alphabet, recognizing the same language. States are Safra trees tagged
/// with the color of the transition that entered them. The input is
/// trimmed to its useful states first.
///
/// Two size reductions keep the construction at desk scale, neither
/// affecting the language: letters with identical transition columns
/// (frequent when the alphabet is a set of relations) are stepped once and
/// shared, and the tree automaton is explored with colors on transitions
/// first, so that the state space only pairs trees with the
/// parity-compression of the colors that actually occur.
pub fn determinize(nbw: &Nbw, cap: usize) -> Result<Dpw, SimError> {
    let nbw = trim_nbw(nbw);
    let det = Determinizer::new(&nbw);
    let neutral = det.neutral();

    // Representatives of behaviorally equal letters.
    let mut by_column: BTreeMap<Vec<&BTreeSet<usize>>, Vec<usize>> = BTreeMap::new();
    for li in 0..det.letters.len() {
        let column: Vec<&BTreeSet<usize>> = (0..det.n).map(|s| &det.delta[s][li]).collect();
        by_column.entry(column).or_default().push(li);
    }
    let groups: Vec<Vec<usize>> = by_column.into_values().collect();

    // Phase 1: explore the tree graph alone, colors kept on transitions.
    let start = det.initial_tree();
    let mut ids: BTreeMap<STree, usize> = [(start.clone(), 0)].into_iter().collect();
    let mut trees: Vec<STree> = vec![start];
    let mut steps: Vec<Vec<(usize, usize)>> = Vec::new();
    let mut frontier = 0usize;
    while frontier < trees.len() {
        let tree = trees[frontier].clone();
        let mut row = Vec::with_capacity(groups.len());
        for group in &groups {
            let (t2, c2) = det.step(&tree, group[0]);
            let id = match ids.get(&t2) {
                Some(&id) => id,
                None => {
                    let id = trees.len();
                    if id + 1 > cap {
                        return Err(SimError::TooLarge {
                            stage: "determinization".to_string(),
                            size: id + 1,
                            cap,
                        });
                    }
                    ids.insert(t2.clone(), id);
                    trees.push(t2);
                    id
                }
            };
            row.push((id, c2));
        }
        steps.push(row);
        frontier += 1;
    }

    // Phase 2: compress the observed transition colors parity-faithfully.
    let mut used: BTreeSet<usize> = steps.iter().flatten().map(|&(_, c)| c).collect();
    used.insert(neutral);
    let comp = crate::automata::parity_compression(&used);

    // Phase 3: pair trees with compressed entry colors.
    let enc = |t: usize, c: usize| hf::pair(&tree_to_hf(&trees[t]), &ordinal(c));
    let initial = enc(0, comp[&neutral]);
    let mut dpw = Dpw {
        alphabet: nbw.alphabet.clone(),
        states: [initial.clone()].into_iter().collect(),
        initial,
        trans: BTreeMap::new(),
        color: BTreeMap::new(),
        max_color: comp.values().copied().max().unwrap_or(0),
    };
    let mut queue: VecDeque<(usize, usize)> = [(0, comp[&neutral])].into();
    let mut seen: BTreeSet<(usize, usize)> = queue.iter().copied().collect();
    while let Some((t, c)) = queue.pop_front() {
        let s = enc(t, c);
        dpw.color.insert(s.clone(), c);
        for (gi, group) in groups.iter().enumerate() {
            let (t2, raw) = steps[t][gi];
            let c2 = comp[&raw];
            let s2 = enc(t2, c2);
            if dpw.states.insert(s2.clone()) {
                if dpw.states.len() > cap {
                    return Err(SimError::TooLarge {
                        stage: "determinization".to_string(),
                        size: dpw.states.len(),
                        cap,
                    });
                }
            }
            if seen.insert((t2, c2)) {
                queue.push_back((t2, c2));
            }
            for &li in group {
                dpw.trans.insert((s.clone(), det.letters[li].clone()), s2.clone());
            }
        }
    }
    Ok(dpw)
}

/// Quotient a deterministic parity automaton by the coarsest
/// color-respecting bisimulation (partition refinement on colors, then on
/// per-letter successor classes). Merged states carry identical colors and
/// behave identically on every word, so the language is unchanged.
pub fn quotient_dpw(d: &Dpw) -> Dpw {
    let states: Vec<HfSet> = d.states.iter().cloned().collect();
    let index: BTreeMap<&HfSet, usize> =
        states.iter().enumerate().map(|(i, s)| (s, i)).collect();
    let letters: Vec<HfSet> = d.alphabet.iter().cloned().collect();
    let succ: Vec<Vec<usize>> = states
        .iter()
        .map(|s| {
            letters
                .iter()
                .map(|l| index[&d.trans[&(s.clone(), l.clone())]])
                .collect()
        })
        .collect();

    let mut class: Vec<usize> = {
        let colors: BTreeSet<usize> = d.color.values().copied().collect();
        let rank: BTreeMap<usize, usize> =
            colors.iter().enumerate().map(|(i, &c)| (c, i)).collect();
        states.iter().map(|s| rank[&d.color[s]]).collect()
    };
    loop {
        let mut sig_ids: BTreeMap<(usize, Vec<usize>), usize> = BTreeMap::new();
        let mut next: Vec<usize> = Vec::with_capacity(states.len());
        for i in 0..states.len() {
            let sig = (class[i], succ[i].iter().map(|&j| class[j]).collect::<Vec<_>>());
            let id = sig_ids.len();
            next.push(*sig_ids.entry(sig).or_insert(id));
        }
        if next == class {
            break;
        }
        class = next;
    }

    // Canonically least representative per class.
    let mut rep: BTreeMap<usize, usize> = BTreeMap::new();
    for i in 0..states.len() {
        rep.entry(class[i]).or_insert(i);
    }
    let rep_of = |i: usize| states[rep[&class[i]]].clone();
    let keep: BTreeSet<usize> = rep.values().copied().collect();
    let mut trans = BTreeMap::new();
    for &i in &keep {
        for (li, l) in letters.iter().enumerate() {
            trans.insert((states[i].clone(), l.clone()), rep_of(succ[i][li]));
        }
    }
    Dpw {
        alphabet: d.alphabet.clone(),
        states: keep.iter().map(|&i| states[i].clone()).collect(),
        initial: rep_of(index[&d.initial]),
        trans,
        color: keep.iter().map(|&i| (states[i].clone(), d.color[&states[i]])).collect(),
        max_color: d.max_color,
    }
}

/// Complement a deterministic parity automaton by shifting every color up
/// by one: the minimal infinitely-occurring color flips parity on every
/// word.
pub fn complement_dpw(d: &Dpw) -> Dpw {
    Dpw {
        alphabet: d.alphabet.clone(),
        states: d.states.clone(),
        initial: d.initial.clone(),
        trans: d.trans.clone(),
        color: d.color.iter().map(|(s, c)| (s.clone(), c + 1)).collect(),
        max_color: d.max_color + 1,
    }
}

/// Membership of the ultimately periodic word `u · v^ω`: run `u`, then
/// iterate `v` until a (state, position) pair repeats; the minimal color
/// on the loop decides.
pub fn lasso_accepts(d: &Dpw, u: &[HfSet], v: &[HfSet]) -> Result<bool, SimError> {
    assert!(!v.is_empty(), "lasso period must be nonempty");
    for letter in u.iter().chain(v.iter()) {
        if !d.alphabet.contains(letter) {
            return Err(SimError::UnknownLetter(letter.to_string()));
        }
    }
    let mut state = d.initial.clone();
    for letter in u {
        state = d.trans[&(state, letter.clone())].clone();
    }
    // Iterate the period, recording states at each position of v.
    let mut seen: BTreeMap<(HfSet, usize), usize> = BTreeMap::new();
    let mut path: Vec<HfSet> = Vec::new();
    let mut pos = 0usize;
    loop {
        if let Some(&i) = seen.get(&(state.clone(), pos)) {
            let min = path[i..].iter().map(|s| d.color[s]).min().unwrap();
            return Ok(min % 2 == 0);
        }
        seen.insert((state.clone(), pos), path.len());
        path.push(state.clone());
        state = d.trans[&(state, v[pos].clone())].clone();
        pos = (pos + 1) % v.len();
    }
}

/// The trace-condition oracle: over the lasso word `u · v^ω` of relation
/// letters, check that every trace from `init` satisfies min-parity under
/// `col`. Decided on the finite trace graph over (state, position): the
/// condition fails exactly when a cycle with odd minimal color is
/// reachable from the trace start.
pub fn all_traces_accepting_lasso(
    col: &BTreeMap<HfSet, usize>,
    init: &HfSet,
    u: &[HfSet],
    v: &[HfSet],
) -> bool {
    assert!(!v.is_empty(), "lasso period must be nonempty");
    let period = u.len() + v.len();
    let letter_at = |pos: usize| -> &HfSet {
        if pos < u.len() {
            &u[pos]
        } else {
            &v[pos - u.len()]
        }
    };
    let wrap = |pos: usize| -> usize {
        if pos + 1 < period {
            pos + 1
        } else {
            u.len()
        }
    };
    // Collect the A-states mentioned anywhere (trace nodes).
    let mut qs: BTreeSet<HfSet> = BTreeSet::new();
    for letter in u.iter().chain(v.iter()) {
        for (q1, q2) in decode_rel(letter) {
            qs.insert(q1);
            qs.insert(q2);
        }
    }
    qs.insert(init.clone());
    let qs: Vec<HfSet> = qs.into_iter().collect();
    let qindex: BTreeMap<&HfSet, usize> =
        qs.iter().enumerate().map(|(i, q)| (q, i)).collect();

    let node = |q: usize, p: usize| q * period + p;
    let total = qs.len() * period;
    let mut edges: Vec<Vec<usize>> = vec![Vec::new(); total];
    let mut reach = vec![false; total];
    let mut stack = Vec::new();
    if rel_range(letter_at(0)).contains(init) {
        let start = node(qindex[init], 0);
        reach[start] = true;
        stack.push(start);
    }
    while let Some(x) = stack.pop() {
        let (qi, p) = (x / period, x % period);
        let p2 = wrap(p);
        for (q1, q2) in decode_rel(letter_at(p2)) {
            if q1 != qs[qi] {
                continue;
            }
            let y = node(qindex[&q2], p2);
            edges[x].push(y);
            if !reach[y] {
                reach[y] = true;
                stack.push(y);
            }
        }
    }
    // A bad trace exists iff a reachable cycle has odd minimal color:
    // threshold SCC analysis, as in certificate checking.
    let max_color = col.values().copied().max().unwrap_or(0);
    for c in (1..=max_color).step_by(2) {
        let keep: Vec<bool> = (0..total)
            .map(|x| reach[x] && col[&qs[x / period]] >= c)
            .collect();
        let comp = scc(&edges, &keep);
        let mut size: BTreeMap<usize, usize> = BTreeMap::new();
        for x in 0..total {
            if keep[x] {
                *size.entry(comp[x]).or_insert(0) += 1;
            }
        }
        for x in 0..total {
            if !keep[x] || col[&qs[x / period]] != c {
                continue;
            }
            let cyclic =
                size[&comp[x]] > 1 || edges[x].iter().any(|&y| y == x && keep[y]);
            if cyclic {
                return false;
            }
        }
    }
    true
}

// ---------------------------------------------------------------------------
// The simulation product
// ---------------------------------------------------------------------------

/// Keep only the pointwise-minimal choices of the subset construction, and
/// the relations still reachable through them. If every direction's
/// relation under one choice is contained in its relation under another
/// (a missing direction counting as the empty relation), the smaller
/// choice admits fewer traces along every future branch, so whatever the
/// larger choice accepts the smaller accepts too, and the larger is
/// redundant. The simulation language is unchanged, and both the relation
/// alphabet and the product branching shrink.
fn minimal_choices(b: &BangAutomaton) -> BangAutomaton {
    let below = |c1: &Conj, c2: &Conj| -> bool {
        c1.iter().all(|(d, s1)| c2.iter().any(|(d2, s2)| d == d2 && s1.is_subset(s2)))
    };
    let mut delta: BTreeMap<(HfSet, HfSet), Dnf> = BTreeMap::new();
    for (k, dnf) in &b.delta {
        let row: Vec<&Conj> = dnf.iter().collect();
        let min: Dnf = row
            .iter()
            .filter(|c| !row.iter().any(|c2| below(c2, c) && !below(c, c2)))
            .map(|c| (*c).clone())
            .collect();
        delta.insert(k.clone(), min);
    }

    // Reachability over the pruned rows.
    let mut states: BTreeSet<HfSet> = [b.initial.clone()].into_iter().collect();
    let mut queue: VecDeque<HfSet> = [b.initial.clone()].into();
    while let Some(s) = queue.pop_front() {
        for letter in &b.alphabet {
            for conj in &delta[&(s.clone(), letter.clone())] {
                for (_, s2) in conj {
                    if states.insert(s2.clone()) {
                        queue.push_back(s2.clone());
                    }
                }
            }
        }
    }
    delta.retain(|(s, _), _| states.contains(s));
    BangAutomaton {
        arity: b.arity,
        alphabet: b.alphabet.clone(),
        states,
        initial: b.initial.clone(),
        delta,
        source_color: b.source_color.clone(),
        source_max_color: b.source_max_color,
    }
}

/// The simulation construction: a nondeterministic parity automaton with
/// the same language as `A`. It pairs the subset construction `!A` with
/// the deterministic trace monitor (the complemented determinization of
/// the bad-trace recognizer over `!A`'s reachable states): a transition
/// advances the monitor by the relation just visited, and colors come from
/// the monitor alone.
///
/// The monitor is never built in full. From a product node `(S, t)` it
/// only ever reads the letter `S`, so its Safra trees are stepped lazily,
/// exactly along the relation sequences the subset construction can emit —
/// the full determinization would pay for arbitrary relation sequences
/// that no branch realizes.
pub fn nd(a: &Apt, cap: usize) -> Result<Apt, SimError> {
    let trace = std::env::var_os("TREEMSO_TRACE").is_some();
    let bang_a = bang(a, cap)?;
    if trace {
        eprintln!(
            "[nd] source {} states (max color {}), subset construction {} states",
            a.states.len(),
            a.max_color,
            bang_a.states.len()
        );
    }
    let before: usize = bang_a.delta.values().map(|d| d.len()).sum();
    let bang_a = minimal_choices(&bang_a);
    if trace {
        let after: usize = bang_a.delta.values().map(|d| d.len()).sum();
        eprintln!(
            "[nd] minimal choices leave {} relations ({} of {} conjunctions)",
            bang_a.states.len(),
            after,
            before
        );
    }
    let nbw = nbw_bad_trace(a, &bang_a.states);
    if trace {
        eprintln!("[nd] bad-trace NBW {} states", nbw.states.len());
    }
    let nbw = trim_nbw(&nbw);
    let det = Determinizer::new(&nbw);
    let neutral = det.neutral();
    let bang_states: Vec<HfSet> = bang_a.states.iter().cloned().collect();
    let sid: BTreeMap<&HfSet, usize> =
        det.letters.iter().enumerate().map(|(i, l)| (l, i)).collect();

    // Phase 1: explore (relation, tree, entry color) triples. The entry
    // color rides along only for the eventual state identity — successors
    // depend on the pair alone, so steps are cached per (tree, relation).
    let s0 = sid[&bang_a.initial];
    let mut trees: Vec<STree> = vec![det.initial_tree()];
    let mut tids: BTreeMap<STree, usize> =
        [(trees[0].clone(), 0usize)].into_iter().collect();
    let mut step_cache: BTreeMap<(usize, usize), (usize, usize)> = BTreeMap::new();
    let start = (s0, 0usize, neutral);
    let mut seen: BTreeSet<(usize, usize, usize)> = [start].into_iter().collect();
    let mut queue: VecDeque<(usize, usize, usize)> = [start].into();
    let mut used_raw: BTreeSet<usize> = [neutral].into_iter().collect();
    while let Some((si, ti, _)) = queue.pop_front() {
        let (t2, raw2) = match step_cache.get(&(ti, si)) {
            Some(&x) => x,
            None => {
                let (tree2, raw2) = det.step(&trees[ti], si);
                let t2 = *tids.entry(tree2.clone()).or_insert_with(|| {
                    trees.push(tree2);
                    trees.len() - 1
                });
                step_cache.insert((ti, si), (t2, raw2));
                (t2, raw2)
            }
        };
        used_raw.insert(raw2);
        for letter in &bang_a.alphabet {
            for conj in &bang_a.delta[&(bang_states[si].clone(), letter.clone())] {
                for (_, s2) in conj {
                    let node = (sid[s2], t2, raw2);
                    if seen.insert(node) {
                        if seen.len() > cap {
                            return Err(SimError::TooLarge {
                                stage: "simulation product".to_string(),
                                size: seen.len(),
                                cap,
                            });
                        }
                        queue.push_back(node);
                    }
                }
            }
        }
    }

    // Phase 2: compress the observed transition colors parity-faithfully;
    // the complementation of the monitor is the final `+ 1`.
    let comp = crate::automata::parity_compression(&used_raw);
    if trace {
        eprintln!(
            "[nd] lazy monitor: {} trees, {} product nodes, {} colors",
            trees.len(),
            seen.len(),
            used_raw.len()
        );
    }

    // Phase 3: assemble the product automaton. State encodings are shared
    // across the many conjunction atoms that mention them.
    let tree_hfs: Vec<HfSet> = trees.iter().map(tree_to_hf).collect();
    let encs: BTreeMap<(usize, usize, usize), HfSet> = seen
        .iter()
        .map(|&(si, ti, raw)| {
            let monitor = hf::pair(&tree_hfs[ti], &ordinal(comp[&raw]));
            ((si, ti, raw), hf::pair(&bang_states[si], &monitor))
        })
        .collect();
    let mut states: BTreeSet<HfSet> = BTreeSet::new();
    let mut delta: BTreeMap<(HfSet, HfSet), Dnf> = BTreeMap::new();
    let mut color: BTreeMap<HfSet, usize> = BTreeMap::new();
    for &(si, ti, raw) in &seen {
        let here = encs[&(si, ti, raw)].clone();
        states.insert(here.clone());
        color.insert(here.clone(), comp[&raw] + 1);
        let (t2, raw2) = step_cache[&(ti, si)];
        for letter in &bang_a.alphabet {
            let mut dnf = Dnf::new();
            for conj in &bang_a.delta[&(bang_states[si].clone(), letter.clone())] {
                let mapped: Conj = conj
                    .iter()
                    .map(|(dir, s2)| (*dir, encs[&(sid[s2], t2, raw2)].clone()))
                    .collect();
                dnf.insert(mapped);
            }
            delta.insert((here.clone(), letter.clone()), dnf);
        }
    }
    let max_color = used_raw.iter().map(|r| comp[r] + 1).max().unwrap();

    Ok(Apt {
        arity: a.arity,
        alphabet: a.alphabet.clone(),
        states,
        initial: encs[&(s0, 0, neutral)].clone(),
        delta,
        color,
        max_color,
    })
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

impl Nbw {
    /// Canonical text form; [`Nbw::from_text`] inverts it bit-exactly.
    pub fn to_text(&self) -> String {
        let mut out = String::from("nbw\n");
        let join = |s: &BTreeSet<HfSet>| {
            s.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ")
        };
        out.push_str(&format!("alphabet: {}\n", join(&self.alphabet)));
        out.push_str(&format!("states: {}\n", join(&self.states)));
        out.push_str(&format!("initial: {}\n", join(&self.initial)));
        out.push_str(&format!("accepting: {}\n", join(&self.accepting)));
        for ((s, a), ts) in &self.trans {
            let t: Vec<String> = ts.iter().map(|x| x.to_string()).collect();
            out.push_str(&format!("({s},{a}) -> [{}]\n", t.join(",")));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Nbw, SimError> {
        let parse_err = |msg: &str| SimError::UnknownLetter(msg.to_string());
        let mut nbw = Nbw {
            alphabet: BTreeSet::new(),
            states: BTreeSet::new(),
            initial: BTreeSet::new(),
            trans: BTreeMap::new(),
            accepting: BTreeSet::new(),
        };
        let mut lines = text.lines();
        if lines.next().map(str::trim) != Some("nbw") {
            return Err(parse_err("expected `nbw` header"));
        }
        for line in lines {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let set_line = |rest: &str| -> Result<BTreeSet<HfSet>, SimError> {
                rest.split_whitespace()
                    .map(|t| HfSet::parse(t).map_err(|e| parse_err(&e.to_string())))
                    .collect()
            };
            if let Some(rest) = line.strip_prefix("alphabet:") {
                nbw.alphabet = set_line(rest)?;
            } else if let Some(rest) = line.strip_prefix("states:") {
                nbw.states = set_line(rest)?;
            } else if let Some(rest) = line.strip_prefix("initial:") {
                nbw.initial = set_line(rest)?;
            } else if let Some(rest) = line.strip_prefix("accepting:") {
                nbw.accepting = set_line(rest)?;
            } else if line.starts_with('(') {
                let (key, body) = line
                    .split_once("->")
                    .ok_or_else(|| parse_err("expected `(state,letter) -> [targets]`"))?;
                let key = key
                    .trim()
                    .strip_prefix('(')
                    .and_then(|k| k.strip_suffix(')'))
                    .ok_or_else(|| parse_err("malformed transition key"))?;
                let parts = split_top(key, ',');
                if parts.len() != 2 {
                    return Err(parse_err("transition key must be (state,letter)"));
                }
                let s = HfSet::parse(parts[0]).map_err(|e| parse_err(&e.to_string()))?;
                let a = HfSet::parse(parts[1]).map_err(|e| parse_err(&e.to_string()))?;
                let body = body
                    .trim()
                    .strip_prefix('[')
                    .and_then(|b| b.strip_suffix(']'))
                    .ok_or_else(|| parse_err("malformed target list"))?;
                let mut ts = BTreeSet::new();
                for tok in split_top(body, ',') {
                    if tok.is_empty() {
                        continue;
                    }
                    ts.insert(HfSet::parse(tok).map_err(|e| parse_err(&e.to_string()))?);
                }
                nbw.trans.insert((s, a), ts);
            } else {
                return Err(parse_err("unrecognized line"));
            }
        }
        Ok(nbw)
    }
}

impl Dpw {
    /// Canonical text form; [`Dpw::from_text`] inverts it bit-exactly.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("dpw max_color={}\n", self.max_color));
        let join = |s: &BTreeSet<HfSet>| {
            s.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ")
        };
        out.push_str(&format!("alphabet: {}\n", join(&self.alphabet)));
        out.push_str(&format!("states: {}\n", join(&self.states)));
        out.push_str(&format!("initial: {}\n", self.initial));
        for ((s, a), t) in &self.trans {
            out.push_str(&format!("({s},{a}) -> {t}\n"));
        }
        for (s, c) in &self.color {
            out.push_str(&format!("color: {s} -> {c}\n"));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Dpw, SimError> {
        let parse_err = |msg: &str| SimError::UnknownLetter(msg.to_string());
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| parse_err("empty input"))?;
        let header = header
            .strip_prefix("dpw ")
            .ok_or_else(|| parse_err("expected `dpw` header"))?;
        let mut max_color = None;
        for field in header.split_whitespace() {
            if let Some(v) = field.strip_prefix("max_color=") {
                max_color = v.parse::<usize>().ok();
            }
        }
        let mut dpw = Dpw {
            alphabet: BTreeSet::new(),
            states: BTreeSet::new(),
            initial: HfSet::empty(),
            trans: BTreeMap::new(),
            color: BTreeMap::new(),
            max_color: max_color.ok_or_else(|| parse_err("missing max_color"))?,
        };
        for line in lines {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix("alphabet:") {
                for tok in rest.split_whitespace() {
                    dpw.alphabet
                        .insert(HfSet::parse(tok).map_err(|e| parse_err(&e.to_string()))?);
                }
            } else if let Some(rest) = line.strip_prefix("states:") {
                for tok in rest.split_whitespace() {
                    dpw.states
                        .insert(HfSet::parse(tok).map_err(|e| parse_err(&e.to_string()))?);
                }
            } else if let Some(rest) = line.strip_prefix("initial:") {
                dpw.initial =
                    HfSet::parse(rest.trim()).map_err(|e| parse_err(&e.to_string()))?;
            } else if let Some(rest) = line.strip_prefix("color:") {
                let (s, c) = rest
                    .split_once("->")
                    .ok_or_else(|| parse_err("expected `state -> color`"))?;
                let s = HfSet::parse(s.trim()).map_err(|e| parse_err(&e.to_string()))?;
                let c = c.trim().parse::<usize>().map_err(|_| parse_err("bad color"))?;
                dpw.color.insert(s, c);
            } else if line.starts_with('(') {
                let (key, t) = line
                    .split_once("->")
                    .ok_or_else(|| parse_err("expected `(state,letter) -> target`"))?;
                let key = key
                    .trim()
                    .strip_prefix('(')
                    .and_then(|k| k.strip_suffix(')'))
                    .ok_or_else(|| parse_err("malformed transition key"))?;
                let parts = split_top(key, ',');
                if parts.len() != 2 {
                    return Err(parse_err("transition key must be (state,letter)"));
                }
                let s = HfSet::parse(parts[0]).map_err(|e| parse_err(&e.to_string()))?;
                let a = HfSet::parse(parts[1]).map_err(|e| parse_err(&e.to_string()))?;
                let t = HfSet::parse(t.trim()).map_err(|e| parse_err(&e.to_string()))?;
                dpw.trans.insert((s, a), t);
            } else {
                return Err(parse_err("unrecognized line"));
            }
        }
        Ok(dpw)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::automata::atomic_subset;
    use crate::games::{acceptance_game_alpha1, solve, Player};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// One-state automaton over the one-letter alphabet with the given
    /// color, looping through all directions.
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
    fn bang_examples() {
        // |Q_A| = 1: the only reachable relation is {(q,q)}.
        let a = loop_automaton(0, 2);
        let b = bang(&a, 100).unwrap();
        assert_eq!(b.states.len(), 1);
        assert_eq!(b.initial, HfSet::singleton(hf::pair(&ordinal(0), &ordinal(0))));
        // One conjunction per (state, letter): a single choice function.
        for dnf in b.delta.values() {
            assert_eq!(dnf.len(), 1);
        }
        assert!(b.is_nondeterministic());

        let sub = bang(&atomic_subset(2), 1000).unwrap();
        assert!(sub.is_nondeterministic());
        // State bound: reachable |Q_!A| ≤ 2^(|Q_A|²) − 1.
        assert!(sub.states.len() <= (1 << 4) - 1);

        assert!(matches!(
            bang(&atomic_subset(2), 1),
            Err(SimError::TooLarge { .. })
        ));
    }

    #[test]
    fn bad_trace_constant_colors() {
        // Single state, color 1: the unique trace has odd minimal color.
        let a = loop_automaton(1, 1);
        let b = bang(&a, 100).unwrap();
        let nbw = nbw_bad_trace(&a, &b.states);
        let s = b.initial.clone();
        assert!(nbw_lasso_accepts(&nbw, &[], &[s.clone()]));

        // Color 0: the trace is even, no bad trace exists.
        let a0 = loop_automaton(0, 1);
        let b0 = bang(&a0, 100).unwrap();
        let nbw0 = nbw_bad_trace(&a0, &b0.states);
        assert!(!nbw_lasso_accepts(&nbw0, &[], &[b0.initial.clone()]));

        // Color 2: minimal cycle color even — rejected, and the trace
        // oracle agrees.
        let a2 = loop_automaton(2, 1);
        let b2 = bang(&a2, 100).unwrap();
        let nbw2 = nbw_bad_trace(&a2, &b2.states);
        assert!(!nbw_lasso_accepts(&nbw2, &[], &[b2.initial.clone()]));
        assert!(all_traces_accepting_lasso(
            &a2.color,
            &a2.initial,
            &[],
            &[b2.initial.clone()]
        ));
    }

    /// All words over `letters` with lengths in `lens`.
    fn words(letters: &[HfSet], lens: std::ops::RangeInclusive<usize>) -> Vec<Vec<HfSet>> {
        let mut out = Vec::new();
        for len in lens {
            let mut acc: Vec<Vec<HfSet>> = vec![Vec::new()];
            for _ in 0..len {
                let mut next = Vec::new();
                for w in &acc {
                    for l in letters {
                        let mut w2 = w.clone();
                        w2.push(l.clone());
                        next.push(w2);
                    }
                }
                acc = next;
            }
            out.extend(acc);
        }
        out
    }

    #[test]
    fn determinize_trivial_languages() {
        let letters: Vec<HfSet> = vec![ordinal(0), ordinal(1)];
        let q = ordinal(0);
        // Accept-everything NBW: one accepting state, total self-loops.
        let all = Nbw {
            alphabet: letters.iter().cloned().collect(),
            states: [q.clone()].into_iter().collect(),
            initial: [q.clone()].into_iter().collect(),
            trans: letters
                .iter()
                .map(|l| ((q.clone(), l.clone()), [q.clone()].into_iter().collect()))
                .collect(),
            accepting: [q.clone()].into_iter().collect(),
        };
        let d = determinize(&all, 1000).unwrap();
        for u in words(&letters, 0..=2) {
            for v in words(&letters, 1..=2) {
                assert!(lasso_accepts(&d, &u, &v).unwrap());
                assert!(!lasso_accepts(&complement_dpw(&d), &u, &v).unwrap());
            }
        }

        // Accept-nothing NBW: same structure, empty Büchi set.
        let none = Nbw { accepting: BTreeSet::new(), ..all.clone() };
        let d0 = determinize(&none, 1000).unwrap();
        for u in words(&letters, 0..=2) {
            for v in words(&letters, 1..=2) {
                assert!(!lasso_accepts(&d0, &u, &v).unwrap());
            }
        }

        // Complementation shifts colors by exactly one.
        let dc = complement_dpw(&d);
        assert_eq!(dc.max_color, d.max_color + 1);
        for (s, c) in &d.color {
            assert_eq!(dc.color[s], c + 1);
        }
    }

    #[test]
    fn determinize_agrees_with_nbw_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5af7a);
        for round in 0..12 {
            let n_states = rng.gen_range(1..=4usize);
            let n_letters = rng.gen_range(1..=3usize);
            let letters: Vec<HfSet> = (0..n_letters).map(ordinal).collect();
            let states: Vec<HfSet> = (0..n_states).map(ordinal).collect();
            let mut nbw = Nbw {
                alphabet: letters.iter().cloned().collect(),
                states: states.iter().cloned().collect(),
                initial: [states[0].clone()].into_iter().collect(),
                trans: BTreeMap::new(),
                accepting: states
                    .iter()
                    .filter(|_| rng.gen_bool(0.4))
                    .cloned()
                    .collect(),
            };
            for s in &states {
                for l in &letters {
                    let ts: BTreeSet<HfSet> = states
                        .iter()
                        .filter(|_| rng.gen_bool(0.4))
                        .cloned()
                        .collect();
                    nbw.trans.insert((s.clone(), l.clone()), ts);
                }
            }
            let d = determinize(&nbw, 10_000).unwrap();
            let q = quotient_dpw(&d);
            assert!(q.states.len() <= d.states.len());
            for u in words(&letters, 0..=3) {
                for v in words(&letters, 1..=3) {
                    assert_eq!(
                        lasso_accepts(&d, &u, &v).unwrap(),
                        nbw_lasso_accepts(&nbw, &u, &v),
                        "round {round}: lasso u={u:?} v={v:?}"
                    );
                    // The quotient and the double complement preserve every
                    // lasso.
                    assert_eq!(
                        lasso_accepts(&q, &u, &v).unwrap(),
                        lasso_accepts(&d, &u, &v).unwrap(),
                        "round {round}: quotient broke u={u:?} v={v:?}"
                    );
                    let dcc = complement_dpw(&complement_dpw(&d));
                    assert_eq!(
                        lasso_accepts(&dcc, &u, &v).unwrap(),
                        lasso_accepts(&d, &u, &v).unwrap()
                    );
                }
            }
        }
    }

    #[test]
    fn lasso_examples() {
        // Hand-built two-state DPW cycling through colors {1,2} or {2,3}.
        let s0 = ordinal(0);
        let s1 = ordinal(1);
        let l = ordinal(0);
        let make = |c0: usize, c1: usize| Dpw {
            alphabet: [l.clone()].into_iter().collect(),
            states: [s0.clone(), s1.clone()].into_iter().collect(),
            initial: s0.clone(),
            trans: [
                ((s0.clone(), l.clone()), s1.clone()),
                ((s1.clone(), l.clone()), s0.clone()),
            ]
            .into_iter()
            .collect(),
            color: [(s0.clone(), c0), (s1.clone(), c1)].into_iter().collect(),
            max_color: c0.max(c1),
        };
        assert!(lasso_accepts(&make(0, 0), &[], &[l.clone()]).unwrap());
        assert!(!lasso_accepts(&make(1, 2), &[], &[l.clone()]).unwrap());
        assert!(lasso_accepts(&make(2, 3), &[], &[l.clone()]).unwrap());
        assert!(matches!(
            lasso_accepts(&make(0, 0), &[ordinal(7)], &[l.clone()]),
            Err(SimError::UnknownLetter(_))
        ));
    }

    #[test]
    fn trace_oracle_examples() {
        let q = ordinal(0);
        let rel = HfSet::singleton(hf::pair(&q, &q));
        let col0: BTreeMap<HfSet, usize> = [(q.clone(), 0)].into_iter().collect();
        let col1: BTreeMap<HfSet, usize> = [(q.clone(), 1)].into_iter().collect();
        assert!(all_traces_accepting_lasso(&col0, &q, &[], &[rel.clone()]));
        assert!(!all_traces_accepting_lasso(&col1, &q, &[], &[rel.clone()]));
        // A letter whose range misses the start: no trace exists at all.
        let q2 = ordinal(1);
        let other = HfSet::singleton(hf::pair(&q2, &q2));
        let col: BTreeMap<HfSet, usize> =
            [(q.clone(), 1), (q2.clone(), 1)].into_iter().collect();
        assert!(all_traces_accepting_lasso(&col, &q, &[], &[other]));
    }

    /// Decide an alphabet-1 automaton via its acceptance game.
    fn decide_alpha1(a: &Apt) -> bool {
        let g = acceptance_game_alpha1(a).unwrap();
        solve(&g, &a.reachable_trim().initial).winner == Player::Prop
    }

    #[test]
    fn nd_preserves_alphabet1_verdicts() {
        // A trivially accepting one-state color-0 automaton stays nonempty.
        let a = loop_automaton(0, 2);
        let sim = nd(&a, 10_000).unwrap();
        assert!(sim.validate().is_empty());
        assert!(sim.is_nondeterministic());
        assert!(decide_alpha1(&sim));
        assert!(decide_alpha1(&a));

        // A rejecting one: color 1.
        let r = loop_automaton(1, 2);
        let simr = nd(&r, 10_000).unwrap();
        assert!(simr.validate().is_empty());
        assert!(!decide_alpha1(&simr));

        // Random alphabet-1 automata, |Q| ≤ 2, colors ≤ 1: verdicts agree.
        let mut rng = ChaCha8Rng::seed_from_u64(0xabcd);
        for round in 0..15 {
            let a = crate::testutil::random_alpha1(&mut rng, 2, 1, 2);
            let sim = nd(&a, 50_000).unwrap();
            assert!(sim.is_nondeterministic(), "round {round}");
            assert!(sim.validate().is_empty(), "round {round}");
            assert_eq!(decide_alpha1(&a), decide_alpha1(&sim), "round {round}");
        }
    }

    #[test]
    fn serialization_round_trips() {
        let a = loop_automaton(1, 1);
        let b = bang(&a, 100).unwrap();
        let nbw = nbw_bad_trace(&a, &b.states);
        let text = nbw.to_text();
        let back = Nbw::from_text(&text).unwrap();
        assert_eq!(back, nbw);
        assert_eq!(back.to_text(), text);

        let d = complement_dpw(&determinize(&nbw, 1000).unwrap());
        let text = d.to_text();
        let back = Dpw::from_text(&text).unwrap();
        assert_eq!(back, d);
        assert_eq!(back.to_text(), text);
    }
}
