//! Hereditarily finite sets (V_ω) with a canonical total order.
//!
//! Every object the toolkit manipulates — alphabets, automaton states, game
//! vertices, colors — is an [`HfSet`]. The representation is canonical:
//! elements are stored sorted under [`canonical_order`] and deduplicated, so
//! extensional equality coincides with structural equality and serialized
//! forms are bit-stable across runs.

use std::cmp::Ordering;
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

/// Default cap on the cardinality of computed sets (powersets, products,
/// function spaces). Operations that would exceed it return
/// [`HfError::TooLarge`] instead of attempting the blowup.
pub const DEFAULT_CAP: u64 = 1 << 20;

/// Cap on decimal ordinal literals accepted by the parser. Von Neumann
/// ordinals are quadratic-size objects; nothing in the toolkit needs large
/// ones.
pub const MAX_PARSED_ORDINAL: u64 = 65_536;

#[derive(Error, Debug, PartialEq, Eq)]
pub enum HfError {
    #[error("not a von Neumann ordinal: {0}")]
    NotOrdinal(String),
    #[error("not a Kuratowski pair: {0}")]
    NotPair(String),
    #[error("result would have {size} elements, exceeding the cap of {cap}")]
    TooLarge { size: u64, cap: u64 },
    #[error("not a functional set of pairs: {0}")]
    NotFunctional(String),
    #[error("argument {arg} is not in the domain of {func}")]
    NotInDomain { func: String, arg: String },
    #[error("parse error at byte {at}: {msg}")]
    Parse { at: usize, msg: String },
}

/// A hereditarily finite set.
///
/// Invariants (enforced by every constructor):
/// * elements are sorted by [`canonical_order`] and contain no duplicates;
/// * the structure is well-founded by construction (values are built from
///   existing values; the parser builds bottom-up).
///
/// `Ord` *is* the canonical order, so `BTreeSet<HfSet>`/`BTreeMap<HfSet, _>`
/// iterate canonically for free. Sharing via `Arc` makes clones cheap; it is
/// observationally invisible.
#[derive(Clone)]
pub struct HfSet {
    elems: Arc<Vec<HfSet>>,
}

impl PartialEq for HfSet {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.elems, &other.elems) || *self.elems == *other.elems
    }
}

impl Eq for HfSet {}

impl PartialOrd for HfSet {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for HfSet {
    fn cmp(&self, other: &Self) -> Ordering {
        canonical_order(self, other)
    }
}

impl std::hash::Hash for HfSet {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.elems.len().hash(state);
        for e in self.elems.iter() {
            e.hash(state);
        }
    }
}

/// Total order on HF-sets: compare cardinalities first, then the canonically
/// sorted element lists lexicographically by this same order.
pub fn canonical_order(a: &HfSet, b: &HfSet) -> Ordering {
    if Arc::ptr_eq(&a.elems, &b.elems) {
        return Ordering::Equal;
    }
    match a.elems.len().cmp(&b.elems.len()) {
        Ordering::Equal => {}
        ord => return ord,
    }
    for (x, y) in a.elems.iter().zip(b.elems.iter()) {
        match canonical_order(x, y) {
            Ordering::Equal => continue,
            ord => return ord,
        }
    }
    Ordering::Equal
}

impl HfSet {
    /// The empty set.
    pub fn empty() -> HfSet {
        HfSet { elems: Arc::new(Vec::new()) }
    }

    /// `{x}`.
    pub fn singleton(x: HfSet) -> HfSet {
        HfSet { elems: Arc::new(vec![x]) }
    }

    /// Build a set from arbitrary elements; sorts and deduplicates, so any
    /// permutation or duplication of the same elements yields an identical
    /// representation (extensionality).
    pub fn from_vec(mut elems: Vec<HfSet>) -> HfSet {
        elems.sort();
        elems.dedup();
        HfSet { elems: Arc::new(elems) }
    }

    pub fn elems(&self) -> &[HfSet] {
        &self.elems
    }

    pub fn card(&self) -> usize {
        self.elems.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elems.is_empty()
    }

    /// Membership test (binary search over the sorted elements).
    pub fn contains(&self, x: &HfSet) -> bool {
        self.elems.binary_search(x).is_ok()
    }

    pub fn is_subset(&self, other: &HfSet) -> bool {
        self.elems.iter().all(|e| other.contains(e))
    }

    pub fn union(&self, other: &HfSet) -> HfSet {
        let mut v: Vec<HfSet> = self.elems.to_vec();
        v.extend(other.elems.iter().cloned());
        HfSet::from_vec(v)
    }

    pub fn intersection(&self, other: &HfSet) -> HfSet {
        let v: Vec<HfSet> =
            self.elems.iter().filter(|e| other.contains(e)).cloned().collect();
        HfSet::from_vec(v)
    }

    pub fn difference(&self, other: &HfSet) -> HfSet {
        let v: Vec<HfSet> =
            self.elems.iter().filter(|e| !other.contains(e)).cloned().collect();
        HfSet::from_vec(v)
    }

    /// Decode a von Neumann ordinal back to a natural number.
    pub fn as_ordinal(&self) -> Result<usize, HfError> {
        self.ordinal_value()
            .ok_or_else(|| HfError::NotOrdinal(self.render(false)))
    }

    /// An HF-set is the ordinal `n` iff element `i` equals the set of the
    /// `i` elements before it (elements are canonically sorted, so ordinal
    /// elements appear in increasing order).
    fn ordinal_value(&self) -> Option<usize> {
        for (i, e) in self.elems.iter().enumerate() {
            if e.elems.len() != i || e.elems[..] != self.elems[..i] {
                return None;
            }
        }
        Some(self.elems.len())
    }

    /// Render with `∅` as `{}` and sets as `{e1,e2,…}` in canonical order.
    /// With `decimal`, subterms that are von Neumann ordinals render as
    /// decimal digits instead.
    pub fn render(&self, decimal: bool) -> String {
        let mut out = String::new();
        self.render_into(&mut out, decimal);
        out
    }

    fn render_into(&self, out: &mut String, decimal: bool) {
        if decimal {
            if let Some(n) = self.ordinal_value() {
                out.push_str(&n.to_string());
                return;
            }
        }
        out.push('{');
        for (i, e) in self.elems.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            e.render_into(out, decimal);
        }
        out.push('}');
    }

    /// Parse the textual rendering; accepts both the pure-braces form and
    /// decimal ordinal digits, in any mixture. Inverse of [`HfSet::render`]
    /// for both flag values.
    pub fn parse(text: &str) -> Result<HfSet, HfError> {
        let bytes = text.as_bytes();
        let mut pos = 0;
        let v = parse_set(bytes, &mut pos)?;
        skip_ws(bytes, &mut pos);
        if pos != bytes.len() {
            return Err(HfError::Parse { at: pos, msg: "trailing input".into() });
        }
        Ok(v)
    }
}

impl fmt::Display for HfSet {
    /// Displays with ordinals as decimal digits (the compact form used in all
    /// serialized files).
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render(true))
    }
}

impl fmt::Debug for HfSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render(true))
    }
}

fn skip_ws(bytes: &[u8], pos: &mut usize) {
    while *pos < bytes.len() && (bytes[*pos] as char).is_whitespace() {
        *pos += 1;
    }
}

fn parse_set(bytes: &[u8], pos: &mut usize) -> Result<HfSet, HfError> {
    skip_ws(bytes, pos);
    match bytes.get(*pos) {
        Some(b'{') => {
            *pos += 1;
            let mut elems = Vec::new();
            skip_ws(bytes, pos);
            if bytes.get(*pos) == Some(&b'}') {
                *pos += 1;
                return Ok(HfSet::empty());
            }
            loop {
                elems.push(parse_set(bytes, pos)?);
                skip_ws(bytes, pos);
                match bytes.get(*pos) {
                    Some(b',') => {
                        *pos += 1;
                    }
                    Some(b'}') => {
                        *pos += 1;
                        return Ok(HfSet::from_vec(elems));
                    }
                    _ => {
                        return Err(HfError::Parse {
                            at: *pos,
                            msg: "expected ',' or '}'".into(),
                        })
                    }
                }
            }
        }
        Some(c) if c.is_ascii_digit() => {
            let start = *pos;
            while *pos < bytes.len() && bytes[*pos].is_ascii_digit() {
                *pos += 1;
            }
            let digits = std::str::from_utf8(&bytes[start..*pos]).unwrap();
            let n: u64 = digits.parse().map_err(|_| HfError::Parse {
                at: start,
                msg: "ordinal literal out of range".into(),
            })?;
            if n > MAX_PARSED_ORDINAL {
                return Err(HfError::TooLarge { size: n, cap: MAX_PARSED_ORDINAL });
            }
            Ok(ordinal(n as usize))
        }
        _ => Err(HfError::Parse { at: *pos, msg: "expected '{' or digit".into() }),
    }
}

/// The von Neumann ordinal `n`: `0 = ∅`, `n+1 = n ∪ {n}`.
/// Ordinals up to this value are interned per thread. Interning makes equal
/// ordinals pointer-identical, so comparing them is O(1) instead of a
/// structural descent (two independently built copies of the ordinal `n`
/// share no pointers and would otherwise cost time exponential in `n`).
const ORDINAL_INTERN_LIMIT: usize = 1024;

pub fn ordinal(n: usize) -> HfSet {
    thread_local! {
        static INTERNED: std::cell::RefCell<Vec<HfSet>> =
            const { std::cell::RefCell::new(Vec::new()) };
    }
    INTERNED.with(|cache| {
        let mut cache = cache.borrow_mut();
        // Elements 0..k of the ordinal k are exactly the smaller ordinals,
        // already in canonical order (cardinality increases with the value).
        while cache.len() <= n.min(ORDINAL_INTERN_LIMIT) {
            let next = HfSet { elems: Arc::new(cache.clone()) };
            cache.push(next);
        }
        if n <= ORDINAL_INTERN_LIMIT {
            return cache[n].clone();
        }
        // Past the intern limit, build the tail fresh; elements up to the
        // limit still share pointers, which keeps comparisons polynomial.
        let mut elems: Vec<HfSet> = cache.clone();
        while elems.len() < n {
            let next = HfSet { elems: Arc::new(elems.clone()) };
            elems.push(next);
        }
        HfSet { elems: Arc::new(elems) }
    })
}

/// `[0,n] = {0,…,n}` as a set of ordinals.
pub fn interval(n: usize) -> HfSet {
    ordinal(n + 1)
}

/// The even members of `[0,n]`.
pub fn even_set(n: usize) -> HfSet {
    HfSet::from_vec((0..=n).step_by(2).map(ordinal).collect())
}

/// Kuratowski pair `(a,b) = {{a},{a,b}}`.
pub fn pair(a: &HfSet, b: &HfSet) -> HfSet {
    let fst = HfSet::singleton(a.clone());
    let both = HfSet::from_vec(vec![a.clone(), b.clone()]);
    HfSet::from_vec(vec![fst, both])
}

/// Left inverse of [`pair`].
pub fn unpair(p: &HfSet) -> Result<(HfSet, HfSet), HfError> {
    let bad = || HfError::NotPair(p.to_string());
    match p.elems() {
        // {{a}} encodes (a,a).
        [s] if s.card() == 1 => Ok((s.elems()[0].clone(), s.elems()[0].clone())),
        // Canonical order puts the singleton {a} before the doubleton {a,b}.
        [s, d] if s.card() == 1 && d.card() == 2 => {
            let a = &s.elems()[0];
            let (x, y) = (&d.elems()[0], &d.elems()[1]);
            if a == x {
                Ok((a.clone(), y.clone()))
            } else if a == y {
                Ok((a.clone(), x.clone()))
            } else {
                Err(bad())
            }
        }
        _ => Err(bad()),
    }
}

/// All subsets of `k`, canonically ordered. Fails with
/// [`HfError::TooLarge`] when `2^|k|` exceeds [`DEFAULT_CAP`].
pub fn powerset(k: &HfSet) -> Result<HfSet, HfError> {
    let n = k.card();
    if n >= 64 || (1u64 << n) > DEFAULT_CAP {
        return Err(HfError::TooLarge { size: u64::MAX, cap: DEFAULT_CAP });
    }
    let mut subsets = Vec::with_capacity(1 << n);
    for mask in 0u64..(1 << n) {
        let elems: Vec<HfSet> = (0..n)
            .filter(|i| mask & (1 << i) != 0)
            .map(|i| k.elems()[i].clone())
            .collect();
        subsets.push(HfSet::from_vec(elems));
    }
    Ok(HfSet::from_vec(subsets))
}

/// All nonempty subsets of `k`: exactly `powerset(k)` minus `{∅}`.
pub fn powerset_nonempty(k: &HfSet) -> Result<HfSet, HfError> {
    let p = powerset(k)?;
    Ok(p.difference(&HfSet::singleton(HfSet::empty())))
}

/// `k × l` as a set of Kuratowski pairs.
pub fn product(k: &HfSet, l: &HfSet) -> Result<HfSet, HfError> {
    let size = (k.card() as u64) * (l.card() as u64);
    if size > DEFAULT_CAP {
        return Err(HfError::TooLarge { size, cap: DEFAULT_CAP });
    }
    let mut pairs = Vec::with_capacity(size as usize);
    for a in k.elems() {
        for b in l.elems() {
            pairs.push(pair(a, b));
        }
    }
    Ok(HfSet::from_vec(pairs))
}

/// The function space `l^k`: all total functional subsets of `k × l`,
/// i.e. every `f` with exactly one pair `(a, f(a))` per `a ∈ k`.
pub fn function_space(k: &HfSet, l: &HfSet) -> Result<HfSet, HfError> {
    let (nk, nl) = (k.card() as u32, l.card() as u64);
    // |l|^|k| functions; the empty function when k = ∅.
    let size = nl.checked_pow(nk).unwrap_or(u64::MAX);
    if nk > 0 && nl == 0 {
        return Ok(HfSet::empty());
    }
    if size > DEFAULT_CAP {
        return Err(HfError::TooLarge { size, cap: DEFAULT_CAP });
    }
    let mut funcs = Vec::with_capacity(size as usize);
    let mut choice = vec![0usize; nk as usize];
    loop {
        let graph: Vec<HfSet> = k
            .elems()
            .iter()
            .enumerate()
            .map(|(i, a)| pair(a, &l.elems()[choice[i]]))
            .collect();
        funcs.push(HfSet::from_vec(graph));
        // Advance the odometer over codomain choices.
        let mut i = 0;
        loop {
            if i == choice.len() {
                return Ok(HfSet::from_vec(funcs));
            }
            choice[i] += 1;
            if choice[i] < nl as usize {
                break;
            }
            choice[i] = 0;
            i += 1;
        }
    }
}

/// Function application: the unique `b` with `(a,b) ∈ f`.
pub fn apply(f: &HfSet, a: &HfSet) -> Result<HfSet, HfError> {
    let mut image: Option<HfSet> = None;
    for e in f.elems() {
        let (x, y) =
            unpair(e).map_err(|_| HfError::NotFunctional(f.to_string()))?;
        if &x == a {
            match &image {
                Some(prev) if *prev != y => {
                    return Err(HfError::NotFunctional(f.to_string()))
                }
                _ => image = Some(y),
            }
        }
    }
    image.ok_or_else(|| HfError::NotInDomain {
        func: f.to_string(),
        arg: a.to_string(),
    })
}

/// Disjoint union `k + l = ({0} × k) ∪ ({1} × l)`.
pub fn disjoint_union(k: &HfSet, l: &HfSet) -> HfSet {
    let mut elems: Vec<HfSet> = k.elems().iter().map(inl).collect();
    elems.extend(l.elems().iter().map(inr));
    HfSet::from_vec(elems)
}

/// Left injection `(0, a)`.
pub fn inl(a: &HfSet) -> HfSet {
    pair(&ordinal(0), a)
}

/// Right injection `(1, b)`.
pub fn inr(b: &HfSet) -> HfSet {
    pair(&ordinal(1), b)
}
