//! Decide closed monadic second-order (MSO) sentences over the full D-ary
//! infinite tree.
//!
//! The toolkit follows the classical automata-theoretic route, formulated
//! entirely over hereditarily finite sets so every object in sight is a
//! concrete, serializable value:
//!
//! * [`hf`] — hereditarily finite sets (V_ω): ordinals, Kuratowski pairs,
//!   powersets, function spaces, disjoint unions. All state spaces and
//!   alphabets in the toolkit are HF-sets.
//! * [`logic`] — ASTs and a parser for MSO over the D-ary tree, a small
//!   HF-closed FSO dialect, and the syntactic translations between them:
//!   relational form, individual-free form, MSO→FSO and FSO→MSO.
//! * [`automata`] — alternating parity tree automata over HF alphabets with
//!   the closed constructions: substitution, disjunction, complementation
//!   (De Morgan dual), projection, the two atomic automata, and the
//!   non-determinism check.
//! * [`simulation`] — the simulation theorem pipeline turning an alternating
//!   automaton into an equivalent non-deterministic one: the `!A` subset
//!   construction over state pairs, a Büchi automaton for bad traces, Safra
//!   determinization to a deterministic parity word automaton, and the final
//!   product `nd(A)`.
//! * [`games`] — finite bipartite min-parity games, the acceptance game of an
//!   alphabet-1 automaton, a Zielonka-style solver with positional strategy
//!   certificates, a brute-force oracle, and a certificate checker.
//! * [`pipeline`] — the end-to-end compiler and decision procedure plus
//!   serialization entry points.
//! * [`cli`] — the command-line surface (`decide`, `compile`,
//!   `decide-automaton`, `simulate`, `lasso`, `solve-game`,
//!   `check-certificate`, `stats`).
//!
//! Truth of a closed sentence reduces to winning a finite parity game: the
//! sentence is translated to an individual-free core, compiled to an
//! alternating parity tree automaton over a singleton alphabet, and the
//! automaton's acceptance game is solved positionally. The verdict ships with
//! a strategy certificate that is re-checked before being returned.
//!
//! Everything is deliberately desk-scale: each set quantifier in a sentence
//! costs a subset construction plus a determinization, and the tool reports
//! an explicit resource-cap error instead of attempting sizes it cannot
//! finish.

pub mod automata;
pub mod cli;
pub mod games;
pub mod hf;
pub mod logic;
pub mod pipeline;
pub mod simulation;
#[cfg(test)]
pub(crate) mod testutil;

pub use hf::HfSet;
