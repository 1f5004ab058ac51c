//! Finite bipartite min-parity games.
//!
//! A *reduced game* has proponent vertices, opponent vertices, total edge
//! maps into nonempty successor sets (so there are no dead ends), and a
//! coloring into `[0, n]`. A play is an infinite alternating walk; the
//! proponent wins when the least color visited infinitely often is even.
//!
//! Over a one-letter alphabet the acceptance game of an automaton does not
//! depend on the tree node, so it collapses to the finite reduced game
//! built by [`acceptance_game_alpha1`]: proponent vertices are the states,
//! opponent vertices are the pairs `(q, C)` of a state and a chosen
//! conjunction. Deciding a closed sentence reduces to solving this game,
//! which [`solve`] does with a recursive attractor decomposition on the
//! minimal color, returning positional strategies that
//! [`check_certificate`] can re-verify independently and that
//! [`brute_force_solve`] cross-checks by exhaustive enumeration.

use crate::automata::{split_top, Apt, Conj};
use crate::hf::{self, ordinal, HfSet};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Player {
    Prop,
    Opp,
}

impl Player {
    pub fn opponent(self) -> Player {
        match self {
            Player::Prop => Player::Opp,
            Player::Opp => Player::Prop,
        }
    }
}

impl fmt::Display for Player {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Player::Prop => write!(f, "prop"),
            Player::Opp => write!(f, "opp"),
        }
    }
}

#[derive(Debug, Error)]
pub enum GameError {
    #[error("automaton alphabet is not a singleton")]
    AlphabetNotSingleton,
    #[error("strategy-pair space of size {strategy_pairs} exceeds the brute-force cap")]
    TooLarge { strategy_pairs: u128 },
    #[error("strategy undefined at reached vertex {0}")]
    IncompleteStrategy(String),
    #[error("strategy choice at {0} is not an edge of the game")]
    IllegalMove(String),
    #[error("unknown vertex {0}")]
    UnknownVertex(String),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

/// A finite bipartite min-parity game. Vertices are canonical HF-sets;
/// proponent moves pick an opponent vertex, opponent moves pick a direction
/// and a proponent vertex.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParityGame {
    pub prop: BTreeSet<HfSet>,
    pub opp: BTreeSet<HfSet>,
    pub e_p: BTreeMap<HfSet, BTreeSet<HfSet>>,
    pub e_o: BTreeMap<HfSet, BTreeSet<(usize, HfSet)>>,
    pub color: BTreeMap<HfSet, usize>,
    pub max_color: usize,
}

/// A positional strategy for one player: a choice of edge at each of the
/// owner's vertices it is defined on.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Choice {
    ToOpp(HfSet),
    ToProp(usize, HfSet),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Strategy {
    pub owner: Player,
    pub choice: BTreeMap<HfSet, Choice>,
}

/// Full solution: the two winning regions partition the vertices, and each
/// player's strategy is total on — and stays inside — its own region.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SolveResult {
    pub prop_region: BTreeSet<HfSet>,
    pub opp_region: BTreeSet<HfSet>,
    pub prop_strategy: Strategy,
    pub opp_strategy: Strategy,
}

/// The view of a solution from one start vertex.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Solution {
    pub winner: Player,
    pub strategy: Strategy,
}

impl ParityGame {
    /// Check every structural invariant, reporting each violation.
    pub fn validate(&self) -> Vec<String> {
        let mut v = Vec::new();
        if self.prop.is_empty() {
            v.push("no proponent vertices".to_string());
        }
        if self.opp.is_empty() {
            v.push("no opponent vertices".to_string());
        }
        for x in self.prop.intersection(&self.opp) {
            v.push(format!("vertex {x} is both proponent and opponent"));
        }
        for x in &self.prop {
            match self.e_p.get(x) {
                None => v.push(format!("missing edges at proponent vertex {x}")),
                Some(s) if s.is_empty() => v.push(format!("dead end at proponent vertex {x}")),
                Some(s) => {
                    for y in s {
                        if !self.opp.contains(y) {
                            v.push(format!("edge {x} -> {y} leaves the opponent vertices"));
                        }
                    }
                }
            }
        }
        for x in &self.opp {
            match self.e_o.get(x) {
                None => v.push(format!("missing edges at opponent vertex {x}")),
                Some(s) if s.is_empty() => v.push(format!("dead end at opponent vertex {x}")),
                Some(s) => {
                    for (_, y) in s {
                        if !self.prop.contains(y) {
                            v.push(format!("edge {x} -> {y} leaves the proponent vertices"));
                        }
                    }
                }
            }
        }
        for x in self.prop.iter().chain(self.opp.iter()) {
            match self.color.get(x) {
                None => v.push(format!("vertex {x} has no color")),
                Some(&c) if c > self.max_color => v.push(format!(
                    "color {c} of vertex {x} exceeds max_color {}",
                    self.max_color
                )),
                _ => {}
            }
        }
        v
    }

    pub fn contains_vertex(&self, x: &HfSet) -> bool {
        self.prop.contains(x) || self.opp.contains(x)
    }
}

/// Encode a conjunction as a single HF-set of `(direction, state)` pairs.
pub fn conj_to_hf(c: &Conj) -> HfSet {
    HfSet::from_vec(c.iter().map(|(d, q)| hf::pair(&ordinal(*d), q)).collect())
}

/// The acceptance game of an automaton over a one-letter alphabet. Since
/// every tree node carries the same letter, positions do not depend on the
/// node: proponent vertices are the (reachable) states, opponent vertices
/// the pairs `(q, C)` with `C ∈ δ(q, a)`. Proponent vertices keep their
/// state's color; opponent vertices carry the maximal color, which never
/// decides a play because each play also visits proponent vertices.
pub fn acceptance_game_alpha1(a: &Apt) -> Result<ParityGame, GameError> {
    if a.alphabet.len() != 1 {
        return Err(GameError::AlphabetNotSingleton);
    }
    let letter = a.alphabet.iter().next().unwrap().clone();
    let trimmed = a.reachable_trim();
    let n = trimmed.max_color;

    let mut game = ParityGame {
        prop: trimmed.states.iter().cloned().collect(),
        opp: BTreeSet::new(),
        e_p: BTreeMap::new(),
        e_o: BTreeMap::new(),
        color: BTreeMap::new(),
        max_color: n,
    };
    for q in &trimmed.states {
        game.color.insert(q.clone(), trimmed.color[q]);
        let dnf = &trimmed.delta[&(q.clone(), letter.clone())];
        let mut succs = BTreeSet::new();
        for conj in dnf {
            let v = hf::pair(q, &conj_to_hf(conj));
            game.opp.insert(v.clone());
            game.color.insert(v.clone(), n);
            game.e_o.insert(v.clone(), conj.iter().cloned().collect());
            succs.insert(v);
        }
        game.e_p.insert(q.clone(), succs);
    }
    Ok(game)
}

// ---------------------------------------------------------------------------
// Solver
// ---------------------------------------------------------------------------

/// Indexed view of a game for the solver: vertices in canonical order
/// (proponent block first), successor lists sorted by (target, direction)
/// so that "first" always means "canonically least".
struct Arena {
    verts: Vec<HfSet>,
    is_prop: Vec<bool>,
    color: Vec<usize>,
    succ: Vec<Vec<(usize, Option<usize>)>>,
}

impl Arena {
    fn build(g: &ParityGame) -> Arena {
        let mut verts: Vec<HfSet> = g.prop.iter().cloned().collect();
        verts.extend(g.opp.iter().cloned());
        let index: BTreeMap<&HfSet, usize> =
            verts.iter().enumerate().map(|(i, v)| (v, i)).collect();
        let mut is_prop = vec![false; verts.len()];
        let mut color = vec![0usize; verts.len()];
        let mut succ: Vec<Vec<(usize, Option<usize>)>> = vec![Vec::new(); verts.len()];
        for (i, v) in verts.iter().enumerate() {
            is_prop[i] = g.prop.contains(v);
            color[i] = g.color[v];
            let mut out: Vec<(usize, Option<usize>)> = if is_prop[i] {
                g.e_p[v].iter().map(|w| (index[w], None)).collect()
            } else {
                g.e_o[v].iter().map(|(d, w)| (index[w], Some(*d))).collect()
            };
            out.sort_by(|(t1, d1), (t2, d2)| verts[*t1].cmp(&verts[*t2]).then(d1.cmp(d2)));
            succ[i] = out;
        }
        Arena { verts, is_prop, color, succ }
    }
}

type Strat = Vec<Option<(usize, Option<usize>)>>;

/// Attractor of `target` for the given player within `alive`, with the
/// attracting strategy: each attracted vertex of the player moves to its
/// canonically least successor strictly closer to the target.
fn attract(
    arena: &Arena,
    alive: &[bool],
    target: &[bool],
    for_prop: bool,
) -> (Vec<bool>, Strat) {
    let n = arena.verts.len();
    let mut attr = target.to_vec();
    let mut level = vec![usize::MAX; n];
    for (v, t) in target.iter().enumerate() {
        if *t {
            level[v] = 0;
        }
    }
    let mut round = 0usize;
    loop {
        let mut next = Vec::new();
        for v in 0..n {
            if !alive[v] || attr[v] {
                continue;
            }
            let mut any = false;
            let mut all = true;
            for &(t, _) in &arena.succ[v] {
                if !alive[t] {
                    continue;
                }
                if attr[t] {
                    any = true;
                } else {
                    all = false;
                }
            }
            let attracted = if arena.is_prop[v] == for_prop { any } else { all };
            if attracted {
                next.push(v);
            }
        }
        if next.is_empty() {
            break;
        }
        round += 1;
        for v in next {
            attr[v] = true;
            level[v] = round;
        }
    }
    let mut strat: Strat = vec![None; n];
    for v in 0..n {
        if attr[v] && !target[v] && arena.is_prop[v] == for_prop {
            strat[v] = arena.succ[v]
                .iter()
                .find(|(t, _)| alive[*t] && attr[*t] && level[*t] < level[v])
                .copied();
        }
    }
    (attr, strat)
}

/// Recursive attractor decomposition on the minimal color (min-parity
/// native). Returns the proponent's winning region and a merged strategy
/// array holding each vertex owner's choice inside its own winning region.
fn zielonka(arena: &Arena, alive: &[bool]) -> (Vec<bool>, Strat) {
    let n = arena.verts.len();
    let mut win_prop = vec![false; n];
    let mut strat: Strat = vec![None; n];
    let m = match (0..n).filter(|&v| alive[v]).map(|v| arena.color[v]).min() {
        None => return (win_prop, strat),
        Some(m) => m,
    };
    let p_prop = m % 2 == 0;

    let mut target = vec![false; n];
    for v in 0..n {
        if alive[v] && arena.color[v] == m {
            target[v] = true;
        }
    }
    let (attr, attr_strat) = attract(arena, alive, &target, p_prop);
    let alive1: Vec<bool> = (0..n).map(|v| alive[v] && !attr[v]).collect();
    let (w1_prop, s1) = zielonka(arena, &alive1);

    let loser_won: Vec<bool> = (0..n)
        .map(|v| alive1[v] && (w1_prop[v] != p_prop))
        .collect();

    if loser_won.iter().all(|b| !b) {
        // The minimal color's owner wins everywhere in `alive`: recursion
        // strategy off the attractor, attracting strategy toward the
        // minimal-color vertices, any move that stays alive on them.
        for v in 0..n {
            if !alive[v] {
                continue;
            }
            win_prop[v] = p_prop;
            if arena.is_prop[v] != p_prop {
                continue;
            }
            strat[v] = if alive1[v] {
                s1[v]
            } else if target[v] {
                arena.succ[v].iter().find(|(t, _)| alive[*t]).copied()
            } else {
                attr_strat[v]
            };
        }
        return (win_prop, strat);
    }

    let (b, b_strat) = attract(arena, alive, &loser_won, !p_prop);
    let alive2: Vec<bool> = (0..n).map(|v| alive[v] && !b[v]).collect();
    let (w2_prop, s2) = zielonka(arena, &alive2);

    for v in 0..n {
        if !alive[v] {
            continue;
        }
        if b[v] {
            // The opponent of the minimal color's owner wins all of B.
            win_prop[v] = !p_prop;
            if arena.is_prop[v] == !p_prop {
                strat[v] = if loser_won[v] { s1[v] } else { b_strat[v] };
            }
        } else {
            win_prop[v] = w2_prop[v];
            if arena.is_prop[v] == w2_prop[v] {
                strat[v] = s2[v];
            }
        }
    }
    (win_prop, strat)
}

/// Solve the whole game: winning regions for both players and a positional
/// strategy for each on its own region. Deterministic — ties are broken
/// toward the canonically least successor.
pub fn solve_full(g: &ParityGame) -> SolveResult {
    let arena = Arena::build(g);
    let alive = vec![true; arena.verts.len()];
    let (win_prop, strat) = zielonka(&arena, &alive);

    let mut result = SolveResult {
        prop_region: BTreeSet::new(),
        opp_region: BTreeSet::new(),
        prop_strategy: Strategy { owner: Player::Prop, choice: BTreeMap::new() },
        opp_strategy: Strategy { owner: Player::Opp, choice: BTreeMap::new() },
    };
    for (v, vert) in arena.verts.iter().enumerate() {
        if win_prop[v] {
            result.prop_region.insert(vert.clone());
        } else {
            result.opp_region.insert(vert.clone());
        }
        if arena.is_prop[v] == win_prop[v] {
            let (t, d) = strat[v].expect("winner strategy defined on its region");
            let choice = match d {
                None => Choice::ToOpp(arena.verts[t].clone()),
                Some(d) => Choice::ToProp(d, arena.verts[t].clone()),
            };
            if arena.is_prop[v] {
                result.prop_strategy.choice.insert(vert.clone(), choice);
            } else {
                result.opp_strategy.choice.insert(vert.clone(), choice);
            }
        }
    }
    result
}

/// The solution as seen from `start`: who wins there, with the winner's
/// positional strategy.
///
/// `start` must be a vertex of the game.
pub fn solve(g: &ParityGame, start: &HfSet) -> Solution {
    assert!(g.contains_vertex(start), "start vertex not in game");
    let full = solve_full(g);
    if full.prop_region.contains(start) {
        Solution { winner: Player::Prop, strategy: full.prop_strategy }
    } else {
        Solution { winner: Player::Opp, strategy: full.opp_strategy }
    }
}

// ---------------------------------------------------------------------------
// Brute-force oracle
// ---------------------------------------------------------------------------

/// Decide the winner from `start` by enumerating all positional strategy
/// pairs. For each fixed pair the play from `start` is eventually periodic
/// and its loop's minimal color decides. The player that possesses a
/// strategy beating every counter-strategy wins; positional determinacy
/// guarantees exactly one player does (checked, as a self-test).
pub fn brute_force_solve(g: &ParityGame, start: &HfSet) -> Result<Player, GameError> {
    let arena = Arena::build(g);
    let start_idx = arena
        .verts
        .iter()
        .position(|v| v == start)
        .ok_or_else(|| GameError::UnknownVertex(start.to_string()))?;

    let prop_vs: Vec<usize> = (0..arena.verts.len()).filter(|&v| arena.is_prop[v]).collect();
    let opp_vs: Vec<usize> = (0..arena.verts.len()).filter(|&v| !arena.is_prop[v]).collect();
    let mut pairs: u128 = 1;
    for &v in prop_vs.iter().chain(opp_vs.iter()) {
        pairs = pairs.saturating_mul(arena.succ[v].len() as u128);
    }
    if pairs > 1_000_000 {
        return Err(GameError::TooLarge { strategy_pairs: pairs });
    }

    // A strategy is an odometer over the listed vertices' successor lists.
    fn assignments(arena: &Arena, vs: &[usize]) -> Vec<BTreeMap<usize, usize>> {
        let mut all = vec![BTreeMap::new()];
        for &v in vs {
            let mut next = Vec::new();
            for a in &all {
                for (t, _) in &arena.succ[v] {
                    let mut a2 = a.clone();
                    a2.insert(v, *t);
                    next.push(a2);
                }
            }
            all = next;
        }
        all
    }
    let prop_strats = assignments(&arena, &prop_vs);
    let opp_strats = assignments(&arena, &opp_vs);

    let play_even = |sp: &BTreeMap<usize, usize>, so: &BTreeMap<usize, usize>| -> bool {
        let mut seen: BTreeMap<usize, usize> = BTreeMap::new();
        let mut path = Vec::new();
        let mut v = start_idx;
        loop {
            if let Some(&i) = seen.get(&v) {
                let min = path[i..].iter().map(|&u| arena.color[u]).min().unwrap();
                return min % 2 == 0;
            }
            seen.insert(v, path.len());
            path.push(v);
            v = if arena.is_prop[v] { sp[&v] } else { so[&v] };
        }
    };

    let prop_wins = prop_strats
        .iter()
        .any(|sp| opp_strats.iter().all(|so| play_even(sp, so)));
    let opp_wins = opp_strats
        .iter()
        .any(|so| prop_strats.iter().all(|sp| !play_even(sp, so)));
    assert!(
        prop_wins != opp_wins,
        "positional determinacy violated — solver bug"
    );
    Ok(if prop_wins { Player::Prop } else { Player::Opp })
}

// ---------------------------------------------------------------------------
// Certificate checking
// ---------------------------------------------------------------------------

/// Verify a winning certificate: restrict the game to the winner's strategy
/// choices (the loser keeps all moves), and check that every cycle
/// reachable from `start` has minimal color of the winner's parity. The
/// check runs one strongly-connected-component pass per losing color.
pub fn check_certificate(
    g: &ParityGame,
    winner: Player,
    sigma: &Strategy,
    start: &HfSet,
) -> Result<bool, GameError> {
    let arena = Arena::build(g);
    let start_idx = arena
        .verts
        .iter()
        .position(|v| v == start)
        .ok_or_else(|| GameError::UnknownVertex(start.to_string()))?;
    let index: BTreeMap<&HfSet, usize> =
        arena.verts.iter().enumerate().map(|(i, v)| (v, i)).collect();
    let winner_is_prop = winner == Player::Prop;

    // Successors in the restriction, resolving strategy choices lazily so
    // that only vertices actually reached need a defined choice.
    let restricted = |v: usize| -> Result<Vec<usize>, GameError> {
        if arena.is_prop[v] == winner_is_prop {
            let vert = &arena.verts[v];
            let choice = sigma
                .choice
                .get(vert)
                .ok_or_else(|| GameError::IncompleteStrategy(vert.to_string()))?;
            let (target, dir) = match choice {
                Choice::ToOpp(w) => (w, None),
                Choice::ToProp(d, w) => (w, Some(*d)),
            };
            let t = *index
                .get(target)
                .ok_or_else(|| GameError::IllegalMove(vert.to_string()))?;
            if !arena.succ[v].contains(&(t, dir)) {
                return Err(GameError::IllegalMove(vert.to_string()));
            }
            Ok(vec![t])
        } else {
            Ok(arena.succ[v].iter().map(|(t, _)| *t).collect())
        }
    };

    // Reach everything from start in the restriction.
    let mut reach = vec![false; arena.verts.len()];
    let mut stack = vec![start_idx];
    reach[start_idx] = true;
    let mut edges: Vec<Vec<usize>> = vec![Vec::new(); arena.verts.len()];
    while let Some(v) = stack.pop() {
        let succ = restricted(v)?;
        for &t in &succ {
            if !reach[t] {
                reach[t] = true;
                stack.push(t);
            }
        }
        edges[v] = succ;
    }

    // A bad cycle has minimal color c of the losing parity; it lives in the
    // subgraph of colors ≥ c and passes through a color-c vertex, which is
    // exactly a color-c vertex inside a cyclic strongly-connected component
    // of that subgraph.
    let max_reach_color = (0..arena.verts.len())
        .filter(|&v| reach[v])
        .map(|v| arena.color[v])
        .max()
        .unwrap_or(0);
    let losing_parity = if winner_is_prop { 1 } else { 0 };
    for c in (losing_parity..=max_reach_color).step_by(2) {
        let keep: Vec<bool> = (0..arena.verts.len())
            .map(|v| reach[v] && arena.color[v] >= c)
            .collect();
        let comp = scc(&edges, &keep);
        // Component ids, sizes, and self-loop detection.
        let mut size: BTreeMap<usize, usize> = BTreeMap::new();
        for v in 0..arena.verts.len() {
            if keep[v] {
                *size.entry(comp[v]).or_insert(0) += 1;
            }
        }
        for v in 0..arena.verts.len() {
            if !keep[v] || arena.color[v] != c {
                continue;
            }
            let cyclic = size[&comp[v]] > 1
                || edges[v].iter().any(|&t| t == v && keep[t]);
            if cyclic {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Strongly connected components (iterative Tarjan) of the subgraph
/// induced by `keep`; returns a component id per kept vertex.
pub(crate) fn scc(edges: &[Vec<usize>], keep: &[bool]) -> Vec<usize> {
    let n = edges.len();
    let mut comp = vec![usize::MAX; n];
    let mut index = vec![usize::MAX; n];
    let mut low = vec![0usize; n];
    let mut on_stack = vec![false; n];
    let mut stack: Vec<usize> = Vec::new();
    let mut next_index = 0usize;
    let mut next_comp = 0usize;

    for root in 0..n {
        if !keep[root] || index[root] != usize::MAX {
            continue;
        }
        // Explicit DFS stack: (vertex, next successor position).
        let mut call: Vec<(usize, usize)> = vec![(root, 0)];
        index[root] = next_index;
        low[root] = next_index;
        next_index += 1;
        stack.push(root);
        on_stack[root] = true;
        while let Some(&mut (v, ref mut pos)) = call.last_mut() {
            if *pos < edges[v].len() {
                let t = edges[v][*pos];
                *pos += 1;
                if !keep[t] {
                    continue;
                }
                if index[t] == usize::MAX {
                    index[t] = next_index;
                    low[t] = next_index;
                    next_index += 1;
                    stack.push(t);
                    on_stack[t] = true;
                    call.push((t, 0));
                } else if on_stack[t] {
                    low[v] = low[v].min(index[t]);
                }
            } else {
                call.pop();
                if let Some(&(u, _)) = call.last() {
                    low[u] = low[u].min(low[v]);
                }
                if low[v] == index[v] {
                    loop {
                        let w = stack.pop().unwrap();
                        on_stack[w] = false;
                        comp[w] = next_comp;
                        if w == v {
                            break;
                        }
                    }
                    next_comp += 1;
                }
            }
        }
    }
    comp
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

impl ParityGame {
    /// Canonical text form; [`ParityGame::from_text`] inverts it bit-exactly.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("game max_color={}\n", self.max_color));
        let prop: Vec<String> = self.prop.iter().map(|v| v.to_string()).collect();
        out.push_str(&format!("prop: {}\n", prop.join(" ")));
        let opp: Vec<String> = self.opp.iter().map(|v| v.to_string()).collect();
        out.push_str(&format!("opp: {}\n", opp.join(" ")));
        for (v, succs) in &self.e_p {
            let s: Vec<String> = succs.iter().map(|w| w.to_string()).collect();
            out.push_str(&format!("P({v}) -> [{}]\n", s.join(",")));
        }
        for (v, succs) in &self.e_o {
            let s: Vec<String> = succs.iter().map(|(d, w)| format!("({d},{w})")).collect();
            out.push_str(&format!("O({v}) -> [{}]\n", s.join(",")));
        }
        for (v, c) in &self.color {
            out.push_str(&format!("color: {v} -> {c}\n"));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<ParityGame, GameError> {
        let err = |line: usize, msg: &str| GameError::Parse { line: line + 1, msg: msg.into() };
        let mut lines = text.lines().enumerate();
        let (n0, header) = lines.next().ok_or_else(|| err(0, "empty input"))?;
        let header = header
            .strip_prefix("game ")
            .ok_or_else(|| err(n0, "expected `game` header"))?;
        let mut max_color = None;
        for field in header.split_whitespace() {
            if let Some(v) = field.strip_prefix("max_color=") {
                max_color = v.parse::<usize>().ok();
            }
        }
        let max_color = max_color.ok_or_else(|| err(n0, "missing max_color"))?;

        let mut g = ParityGame {
            prop: BTreeSet::new(),
            opp: BTreeSet::new(),
            e_p: BTreeMap::new(),
            e_o: BTreeMap::new(),
            color: BTreeMap::new(),
            max_color,
        };
        for (n, line) in lines {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix("prop:") {
                for tok in rest.split_whitespace() {
                    g.prop.insert(HfSet::parse(tok).map_err(|e| err(n, &e.to_string()))?);
                }
            } else if let Some(rest) = line.strip_prefix("opp:") {
                for tok in rest.split_whitespace() {
                    g.opp.insert(HfSet::parse(tok).map_err(|e| err(n, &e.to_string()))?);
                }
            } else if let Some(rest) = line.strip_prefix("color:") {
                let (v, c) = rest
                    .split_once("->")
                    .ok_or_else(|| err(n, "expected `vertex -> color`"))?;
                let v = HfSet::parse(v.trim()).map_err(|e| err(n, &e.to_string()))?;
                let c = c.trim().parse::<usize>().map_err(|_| err(n, "bad color"))?;
                g.color.insert(v, c);
            } else if let Some(rest) = line.strip_prefix("P(") {
                let (v, body) = parse_edge_line(rest, n, err)?;
                let mut succs = BTreeSet::new();
                for tok in split_top(&body, ',') {
                    if tok.is_empty() {
                        continue;
                    }
                    succs.insert(HfSet::parse(tok).map_err(|e| err(n, &e.to_string()))?);
                }
                g.e_p.insert(v, succs);
            } else if let Some(rest) = line.strip_prefix("O(") {
                let (v, body) = parse_edge_line(rest, n, err)?;
                let mut succs = BTreeSet::new();
                for tok in split_top(&body, ',') {
                    if tok.is_empty() {
                        continue;
                    }
                    let p = tok
                        .strip_prefix('(')
                        .and_then(|t| t.strip_suffix(')'))
                        .ok_or_else(|| err(n, "malformed (direction,vertex) pair"))?;
                    let pp = split_top(p, ',');
                    if pp.len() != 2 {
                        return Err(err(n, "pair must be (direction,vertex)"));
                    }
                    let d = pp[0].parse::<usize>().map_err(|_| err(n, "bad direction"))?;
                    let w = HfSet::parse(pp[1]).map_err(|e| err(n, &e.to_string()))?;
                    succs.insert((d, w));
                }
                g.e_o.insert(v, succs);
            } else {
                return Err(err(n, "unrecognized line"));
            }
        }
        Ok(g)
    }
}

fn parse_edge_line(
    rest: &str,
    n: usize,
    err: impl Fn(usize, &str) -> GameError,
) -> Result<(HfSet, String), GameError> {
    // rest is `<vertex>) -> [<body>]`.
    let (v, body) = rest
        .split_once("->")
        .ok_or_else(|| err(n, "expected `-> [edges]`"))?;
    let v = v
        .trim()
        .strip_suffix(')')
        .ok_or_else(|| err(n, "malformed vertex"))?;
    let v = HfSet::parse(v.trim()).map_err(|e| err(n, &e.to_string()))?;
    let body = body
        .trim()
        .strip_prefix('[')
        .and_then(|t| t.strip_suffix(']'))
        .ok_or_else(|| err(n, "malformed edge list"))?;
    Ok((v, body.to_string()))
}

impl Strategy {
    /// Canonical text form; [`Strategy::from_text`] inverts it bit-exactly.
    pub fn to_text(&self) -> String {
        let mut out = format!("strategy owner={}\n", self.owner);
        for (v, c) in &self.choice {
            match c {
                Choice::ToOpp(w) => out.push_str(&format!("{v} -> {w}\n")),
                Choice::ToProp(d, w) => out.push_str(&format!("{v} -> ({d},{w})\n")),
            }
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Strategy, GameError> {
        let err = |line: usize, msg: &str| GameError::Parse { line: line + 1, msg: msg.into() };
        let mut lines = text.lines().enumerate();
        let (n0, header) = lines.next().ok_or_else(|| err(0, "empty input"))?;
        let owner = match header.trim() {
            "strategy owner=prop" => Player::Prop,
            "strategy owner=opp" => Player::Opp,
            _ => return Err(err(n0, "expected `strategy owner=prop|opp` header")),
        };
        let mut choice = BTreeMap::new();
        for (n, line) in lines {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let (v, c) = line
                .split_once("->")
                .ok_or_else(|| err(n, "expected `vertex -> choice`"))?;
            let v = HfSet::parse(v.trim()).map_err(|e| err(n, &e.to_string()))?;
            let c = c.trim();
            let parsed = match owner {
                Player::Prop => {
                    Choice::ToOpp(HfSet::parse(c).map_err(|e| err(n, &e.to_string()))?)
                }
                Player::Opp => {
                    let p = c
                        .strip_prefix('(')
                        .and_then(|t| t.strip_suffix(')'))
                        .ok_or_else(|| err(n, "opponent choice must be (direction,vertex)"))?;
                    let pp = split_top(p, ',');
                    if pp.len() != 2 {
                        return Err(err(n, "opponent choice must be (direction,vertex)"));
                    }
                    let d = pp[0].parse::<usize>().map_err(|_| err(n, "bad direction"))?;
                    let w = HfSet::parse(pp[1]).map_err(|e| err(n, &e.to_string()))?;
                    Choice::ToProp(d, w)
                }
            };
            choice.insert(v, parsed);
        }
        Ok(Strategy { owner, choice })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::automata::atomic_subset;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// A two-vertex forced cycle: one proponent vertex with the given
    /// color, one opponent vertex with color `opp_color`.
    fn two_cycle(prop_color: usize, opp_color: usize) -> (ParityGame, HfSet) {
        let p = hf::inl(&ordinal(0));
        let o = hf::inr(&ordinal(0));
        let g = ParityGame {
            prop: [p.clone()].into_iter().collect(),
            opp: [o.clone()].into_iter().collect(),
            e_p: [(p.clone(), [o.clone()].into_iter().collect())].into_iter().collect(),
            e_o: [(o.clone(), [(0usize, p.clone())].into_iter().collect())]
                .into_iter()
                .collect(),
            color: [(p.clone(), prop_color), (o.clone(), opp_color)].into_iter().collect(),
            max_color: prop_color.max(opp_color),
        };
        (g, p)
    }

    #[test]
    fn acceptance_game_examples() {
        // One-state automaton with a single looping conjunction.
        let q = ordinal(0);
        let a = ordinal(0);
        let conj: Conj = [(0usize, q.clone())].into_iter().collect();
        let apt = Apt {
            arity: 1,
            alphabet: [a.clone()].into_iter().collect(),
            states: [q.clone()].into_iter().collect(),
            initial: q.clone(),
            delta: [((q.clone(), a), [conj.clone()].into_iter().collect())]
                .into_iter()
                .collect(),
            color: [(q.clone(), 0)].into_iter().collect(),
            max_color: 0,
        };
        let g = acceptance_game_alpha1(&apt).unwrap();
        assert!(g.validate().is_empty());
        assert_eq!(g.prop.len(), 1);
        assert_eq!(g.opp.len(), 1);
        let ov = g.opp.iter().next().unwrap();
        assert_eq!(g.e_p[&q], [ov.clone()].into_iter().collect());
        assert_eq!(g.e_o[ov], [(0usize, q.clone())].into_iter().collect());

        // |opp| counts the conjunctions of the reachable states, and every
        // opponent vertex carries the automaton's maximal color.
        let sub = atomic_subset(2);
        let one_letter = sub
            .substitute(&HfSet::from_vec(vec![hf::pair(
                &ordinal(0),
                &crate::automata::letter2(0, 0),
            )]))
            .unwrap();
        let g2 = acceptance_game_alpha1(&one_letter).unwrap();
        let expected: usize = g2
            .prop
            .iter()
            .map(|q| {
                let letter = one_letter.alphabet.iter().next().unwrap().clone();
                one_letter.delta[&(q.clone(), letter)].len()
            })
            .sum();
        assert_eq!(g2.opp.len(), expected);
        for v in &g2.opp {
            assert_eq!(g2.color[v], one_letter.max_color);
        }

        assert!(matches!(
            acceptance_game_alpha1(&sub),
            Err(GameError::AlphabetNotSingleton)
        ));
    }

    #[test]
    fn solve_trivial_cycles() {
        let (g, p) = two_cycle(0, 3);
        let sol = solve(&g, &p);
        assert_eq!(sol.winner, Player::Prop);
        assert_eq!(brute_force_solve(&g, &p).unwrap(), Player::Prop);
        assert!(check_certificate(&g, sol.winner, &sol.strategy, &p).unwrap());

        let (g, p) = two_cycle(1, 1);
        let sol = solve(&g, &p);
        assert_eq!(sol.winner, Player::Opp);
        assert_eq!(brute_force_solve(&g, &p).unwrap(), Player::Opp);
        assert!(check_certificate(&g, sol.winner, &sol.strategy, &p).unwrap());
    }

    #[test]
    fn brute_force_prefers_even_loop() {
        // One proponent vertex choosing between two opponent loops, one
        // leading back through color 0, the other through color 1.
        let p = hf::inl(&ordinal(0));
        let good = hf::inr(&ordinal(0));
        let bad = hf::inr(&ordinal(1));
        let g = ParityGame {
            prop: [p.clone()].into_iter().collect(),
            opp: [good.clone(), bad.clone()].into_iter().collect(),
            e_p: [(p.clone(), [good.clone(), bad.clone()].into_iter().collect())]
                .into_iter()
                .collect(),
            e_o: [
                (good.clone(), [(0usize, p.clone())].into_iter().collect()),
                (bad.clone(), [(0usize, p.clone())].into_iter().collect()),
            ]
            .into_iter()
            .collect(),
            color: [(p.clone(), 2), (good.clone(), 0), (bad.clone(), 1)]
                .into_iter()
                .collect(),
            max_color: 2,
        };
        assert_eq!(brute_force_solve(&g, &p).unwrap(), Player::Prop);
        let sol = solve(&g, &p);
        assert_eq!(sol.winner, Player::Prop);
        assert_eq!(sol.strategy.choice[&p], Choice::ToOpp(good));
    }

    #[test]
    fn certificate_rejects_bad_strategy() {
        // Same game as above; steering into the odd loop must fail.
        let p = hf::inl(&ordinal(0));
        let good = hf::inr(&ordinal(0));
        let bad = hf::inr(&ordinal(1));
        let g = ParityGame {
            prop: [p.clone()].into_iter().collect(),
            opp: [good.clone(), bad.clone()].into_iter().collect(),
            e_p: [(p.clone(), [good.clone(), bad.clone()].into_iter().collect())]
                .into_iter()
                .collect(),
            e_o: [
                (good.clone(), [(0usize, p.clone())].into_iter().collect()),
                (bad.clone(), [(0usize, p.clone())].into_iter().collect()),
            ]
            .into_iter()
            .collect(),
            color: [(p.clone(), 2), (good.clone(), 0), (bad.clone(), 1)]
                .into_iter()
                .collect(),
            max_color: 2,
        };
        let steer_bad = Strategy {
            owner: Player::Prop,
            choice: [(p.clone(), Choice::ToOpp(bad.clone()))].into_iter().collect(),
        };
        assert!(!check_certificate(&g, Player::Prop, &steer_bad, &p).unwrap());

        let illegal = Strategy {
            owner: Player::Prop,
            choice: [(p.clone(), Choice::ToOpp(p.clone()))].into_iter().collect(),
        };
        assert!(matches!(
            check_certificate(&g, Player::Prop, &illegal, &p),
            Err(GameError::IllegalMove(_))
        ));

        let empty = Strategy { owner: Player::Prop, choice: BTreeMap::new() };
        assert!(matches!(
            check_certificate(&g, Player::Prop, &empty, &p),
            Err(GameError::IncompleteStrategy(_))
        ));
    }

    /// Seeded random games: vertices `(0,i)` proponent and `(1,j)` opponent,
    /// arbitrary nonempty edge sets, colors up to 3.
    fn random_game(rng: &mut ChaCha8Rng, max_side: usize, max_color: usize) -> ParityGame {
        let np = rng.gen_range(1..=max_side);
        let no = rng.gen_range(1..=max_side);
        let props: Vec<HfSet> = (0..np).map(|i| hf::inl(&ordinal(i))).collect();
        let opps: Vec<HfSet> = (0..no).map(|j| hf::inr(&ordinal(j))).collect();
        let mut g = ParityGame {
            prop: props.iter().cloned().collect(),
            opp: opps.iter().cloned().collect(),
            e_p: BTreeMap::new(),
            e_o: BTreeMap::new(),
            color: BTreeMap::new(),
            max_color,
        };
        for p in &props {
            let mut succs = BTreeSet::new();
            succs.insert(opps[rng.gen_range(0..no)].clone());
            for o in &opps {
                if rng.gen_bool(0.4) {
                    succs.insert(o.clone());
                }
            }
            g.e_p.insert(p.clone(), succs);
            g.color.insert(p.clone(), rng.gen_range(0..=max_color));
        }
        for o in &opps {
            let mut succs = BTreeSet::new();
            succs.insert((rng.gen_range(0..2), props[rng.gen_range(0..np)].clone()));
            for p in &props {
                if rng.gen_bool(0.4) {
                    succs.insert((rng.gen_range(0..2), p.clone()));
                }
            }
            g.e_o.insert(o.clone(), succs);
            g.color.insert(o.clone(), rng.gen_range(0..=max_color));
        }
        g
    }

    /// Swap roles and shift all colors by one: the winner from any vertex
    /// flips. Opponent edge directions are collapsed to 0 — directions
    /// never influence the winner.
    fn dualize(g: &ParityGame) -> ParityGame {
        ParityGame {
            prop: g.opp.clone(),
            opp: g.prop.clone(),
            e_p: g
                .e_o
                .iter()
                .map(|(v, s)| (v.clone(), s.iter().map(|(_, w)| w.clone()).collect()))
                .collect(),
            e_o: g
                .e_p
                .iter()
                .map(|(v, s)| (v.clone(), s.iter().map(|w| (0usize, w.clone())).collect()))
                .collect(),
            color: g.color.iter().map(|(v, c)| (v.clone(), c + 1)).collect(),
            max_color: g.max_color + 1,
        }
    }

    #[test]
    fn random_games_agree_with_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(0x9a3e);
        for round in 0..120 {
            let g = random_game(&mut rng, 3, 3);
            assert!(g.validate().is_empty());
            let start = g.prop.iter().next().unwrap().clone();
            let sol = solve(&g, &start);
            let oracle = brute_force_solve(&g, &start).unwrap();
            assert_eq!(sol.winner, oracle, "winner mismatch in round {round}");
            assert!(
                check_certificate(&g, sol.winner, &sol.strategy, &start).unwrap(),
                "certificate rejected in round {round}"
            );

            // Even color shift: same winner, same strategy.
            let mut shifted = g.clone();
            shifted.color = g.color.iter().map(|(v, c)| (v.clone(), c + 2)).collect();
            shifted.max_color = g.max_color + 2;
            let sol2 = solve(&shifted, &start);
            assert_eq!(sol2.winner, sol.winner);
            assert_eq!(sol2.strategy, sol.strategy);

            // Dualization flips the winner.
            let dual = dualize(&g);
            let flipped = solve(&dual, &start);
            assert_eq!(flipped.winner, sol.winner.opponent());

            // Determinism.
            assert_eq!(solve(&g, &start), sol);
        }
    }

    #[test]
    fn strategies_stay_in_their_region() {
        let mut rng = ChaCha8Rng::seed_from_u64(0x77);
        for _ in 0..60 {
            let g = random_game(&mut rng, 3, 3);
            let full = solve_full(&g);
            let whole: BTreeSet<HfSet> =
                g.prop.iter().chain(g.opp.iter()).cloned().collect();
            let union: BTreeSet<HfSet> = full
                .prop_region
                .union(&full.opp_region)
                .cloned()
                .collect();
            assert_eq!(union, whole);
            assert!(full.prop_region.is_disjoint(&full.opp_region));
            for (v, c) in &full.prop_strategy.choice {
                assert!(full.prop_region.contains(v));
                match c {
                    Choice::ToOpp(w) => assert!(full.prop_region.contains(w)),
                    _ => panic!("proponent strategy must pick opponent vertices"),
                }
            }
            for (v, c) in &full.opp_strategy.choice {
                assert!(full.opp_region.contains(v));
                match c {
                    Choice::ToProp(_, w) => assert!(full.opp_region.contains(w)),
                    _ => panic!("opponent strategy must pick proponent vertices"),
                }
            }
        }
    }

    #[test]
    fn brute_force_too_large() {
        // 8 proponent vertices with 8 successors each blow the cap.
        let props: Vec<HfSet> = (0..8).map(|i| hf::inl(&ordinal(i))).collect();
        let opps: Vec<HfSet> = (0..8).map(|j| hf::inr(&ordinal(j))).collect();
        let mut g = ParityGame {
            prop: props.iter().cloned().collect(),
            opp: opps.iter().cloned().collect(),
            e_p: BTreeMap::new(),
            e_o: BTreeMap::new(),
            color: BTreeMap::new(),
            max_color: 1,
        };
        for p in &props {
            g.e_p.insert(p.clone(), opps.iter().cloned().collect());
            g.color.insert(p.clone(), 0);
        }
        for o in &opps {
            g.e_o.insert(o.clone(), props.iter().map(|p| (0usize, p.clone())).collect());
            g.color.insert(o.clone(), 1);
        }
        assert!(matches!(
            brute_force_solve(&g, &props[0]),
            Err(GameError::TooLarge { .. })
        ));
    }

    #[test]
    fn text_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(0xc0de);
        for _ in 0..20 {
            let g = random_game(&mut rng, 3, 3);
            let text = g.to_text();
            let back = ParityGame::from_text(&text).unwrap();
            assert_eq!(back, g);
            assert_eq!(back.to_text(), text);

            let full = solve_full(&g);
            for s in [full.prop_strategy, full.opp_strategy] {
                let text = s.to_text();
                let back = Strategy::from_text(&text).unwrap();
                assert_eq!(back, s);
                assert_eq!(back.to_text(), text);
            }
        }
    }
}
