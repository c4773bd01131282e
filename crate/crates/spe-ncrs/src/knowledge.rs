//! Eliminating imperfect information: the nondeterministic Streett
//! observation automaton, its complementation/determinization into a
//! deterministic parity automaton, and the perfect-information knowledge
//! parity game built from belief sets.
//!
//! The Prover of the merged game acts on observation sequences only.  The
//! Streett automaton reads those sequences and accepts exactly the ones
//! compatible with some play the Provers *lose*; its complement therefore
//! accepts the observation sequences all of whose compatible plays the
//! Provers win.  Pairing belief sets (all states compatible with the
//! observations so far) with the complement automaton's state yields an
//! ordinary two-player zero-sum parity game: the Prover has a winning
//! strategy there iff it has an observation-based winning strategy in the
//! merged game.
//!
//! Automaton letters are *step* observations `(source, action, target)`
//! rather than the `(source, action)` pairs the players see: a function
//! action takes different values across equally-observed states, so the
//! observed landing after it is genuine information and must cross the
//! letter boundary, or a run could drift onto a state sequence no play
//! visits.  A play's step word is still determined by what the Prover
//! sees — each target observation is the next letter's source — so the
//! knowledge game feeds the automaton the current `(source, action)`
//! letter together with the following source observation, holding the
//! deterministic automaton one letter behind the belief (which shifts
//! its priority sequence by one position and changes no limit).
//!
//! Determinization route: Streett pairs are degeneralized into a
//! nondeterministic Büchi automaton (a waiting copy guesses the moment
//! from which a chosen set of pairs' F-parts is avoided forever; a
//! committed copy cycles an index through the remaining pairs' E-parts),
//! which is then determinized with compact Safra trees; complementing a
//! parity automaton only shifts its priorities by one.  Each stage is
//! validated against [`lasso_membership_nsw`], an exact decision procedure
//! for ultimately periodic words.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fmt::Write as _;
use std::sync::Mutex;

use thiserror::Error;

use crate::arena::{ActionId, PlayerId};
use crate::observer::{Mem, RabinPair};
use crate::one_prover::{PcAction, PcGame, PcLetter, PcOwner};
use crate::parity_solver::{sccs, ParityArena, Side};
use crate::pcp::{Gain, PcpObs, PcpState};

/// What the Prover sees of one move: the source state's observation
/// paired with the action's observation.  The knowledge game and the
/// extracted strategies speak this alphabet.
pub type KLetter = (PcpObs, PcLetter);

/// An automaton letter: one full observed step, the move plus the
/// observation of where it lands.  The target component matters exactly
/// when the action's observation hides its value — then equally-observed
/// sources may land apart, and only the letter can carry which way the
/// step went.
pub type StepLetter = (PcpObs, PcLetter, PcpObs);

fn fmt_obs(o: PcpObs) -> String {
    match o {
        PcpObs::Init => "init".to_string(),
        PcpObs::At(v) => format!("@{}", v.0),
    }
}

/// Renders a letter for the debugging transition lists.
fn fmt_letter(l: &StepLetter) -> String {
    let a = match l.1 {
        PcLetter::Sharp => "#".to_string(),
        PcLetter::Visible(a) => format!("a{}", a.0),
        PcLetter::Fun(i) => format!("f{i}"),
    };
    format!("{}.{a}>{}", fmt_obs(l.0), fmt_obs(l.2))
}

/// The view of a game arena the knowledge construction needs: owners,
/// observations, steps, and Rabin pairs over its states.  Implemented by
/// [`PcGame`] and by [`RawArena`] for directly encoded
/// imperfect-information games.
pub trait ObservedArena {
    fn n(&self) -> usize;
    fn initial(&self) -> usize;
    fn owner(&self, s: usize) -> PcOwner;
    fn obs(&self, s: usize) -> PcpObs;
    fn steps(&self, s: usize) -> &[(PcAction, usize)];
    fn rabin_pairs(&self) -> &[RabinPair];
}

impl ObservedArena for PcGame {
    fn n(&self) -> usize {
        self.n()
    }

    fn initial(&self) -> usize {
        self.initial()
    }

    fn owner(&self, s: usize) -> PcOwner {
        self.owner_of(s)
    }

    fn obs(&self, s: usize) -> PcpObs {
        self.obs_state(s)
    }

    fn steps(&self, s: usize) -> &[(PcAction, usize)] {
        &self.succ[s]
    }

    fn rabin_pairs(&self) -> &[RabinPair] {
        self.pairs()
    }
}

/// A hand-built observed arena: a two-player game with an observation
/// function, Prover objective given as Rabin pairs over its states.
///
/// # Invariants
///
/// - every state has at least one step;
/// - pair masks have the arena's length (checked by [`RawArena::check`]).
#[derive(Debug, Clone)]
pub struct RawArena {
    pub initial: usize,
    pub owner: Vec<PcOwner>,
    pub obs: Vec<PcpObs>,
    pub succ: Vec<Vec<(PcAction, usize)>>,
    pub pairs: Vec<RabinPair>,
}

impl RawArena {
    pub fn check(&self) {
        let n = self.owner.len();
        assert_eq!(self.obs.len(), n);
        assert_eq!(self.succ.len(), n);
        assert!(self.initial < n);
        for (s, row) in self.succ.iter().enumerate() {
            assert!(!row.is_empty(), "state {s} has no step");
            assert!(row.iter().all(|&(_, t)| t < n));
        }
        for p in &self.pairs {
            assert_eq!(p.e.len(), n);
            assert_eq!(p.f.len(), n);
        }
    }
}

impl ObservedArena for RawArena {
    fn n(&self) -> usize {
        self.owner.len()
    }

    fn initial(&self) -> usize {
        self.initial
    }

    fn owner(&self, s: usize) -> PcOwner {
        self.owner[s]
    }

    fn obs(&self, s: usize) -> PcpObs {
        self.obs[s]
    }

    fn steps(&self, s: usize) -> &[(PcAction, usize)] {
        &self.succ[s]
    }

    fn rabin_pairs(&self) -> &[RabinPair] {
        &self.pairs
    }
}

/// The nondeterministic Streett automaton over observation letters.
///
/// A run is accepting iff for every pair `(E, F)` it visits `E` infinitely
/// often or `F` only finitely often — the exact negation of the Rabin
/// condition the Provers play for.  The automaton thus accepts an
/// observation word iff some compatible play is losing for the Provers.
///
/// # Invariants
///
/// - `succ` rows are sorted and duplicate-free;
/// - `letters` and `letter_index` are mutually inverse;
/// - pair masks have the automaton's length.
#[derive(Debug, Clone)]
pub struct NondetStreettAutomaton {
    pub letters: Vec<StepLetter>,
    pub letter_index: HashMap<StepLetter, usize>,
    pub initial: usize,
    /// Per state, the sorted `(letter, target)` edges.
    pub succ: Vec<Vec<(usize, usize)>>,
    /// Streett pairs `(E, F)` as state masks.
    pub pairs: Vec<(Vec<bool>, Vec<bool>)>,
}

impl NondetStreettAutomaton {
    pub fn n(&self) -> usize {
        self.succ.len()
    }

    /// Debug rendering: one `state letter state` line per edge, then the
    /// pair masks.  Not a stable interface.
    pub fn to_transition_list(&self) -> String {
        let mut out = String::new();
        for (s, row) in self.succ.iter().enumerate() {
            for (l, t) in row {
                let _ = writeln!(out, "{s} {} {t}", fmt_letter(&self.letters[*l]));
            }
        }
        for (j, (e, f)) in self.pairs.iter().enumerate() {
            let list = |m: &Vec<bool>| {
                m.iter()
                    .enumerate()
                    .filter(|(_, &b)| b)
                    .map(|(i, _)| i.to_string())
                    .collect::<Vec<_>>()
                    .join(",")
            };
            let _ = writeln!(out, "pair {j}: E={{{}}} F={{{}}}", list(e), list(f));
        }
        out
    }
}

/// Interns letters in first-seen order over ascending states.
struct LetterTable<L> {
    letters: Vec<L>,
    index: HashMap<L, usize>,
}

impl<L: Copy + Eq + std::hash::Hash> LetterTable<L> {
    fn new() -> LetterTable<L> {
        LetterTable {
            letters: Vec::new(),
            index: HashMap::new(),
        }
    }

    fn intern(&mut self, l: L) -> usize {
        if let Some(&id) = self.index.get(&l) {
            return id;
        }
        let id = self.letters.len();
        self.letters.push(l);
        self.index.insert(l, id);
        id
    }
}

/// Builds the observation automaton with one Streett state per arena
/// state: edges are the arena's steps labeled by what the Prover observes
/// of them, and the pairs are the arena's Rabin pairs read as Streett
/// pairs (i.e. negated).
pub fn build_streett_aut<A: ObservedArena>(arena: &A) -> NondetStreettAutomaton {
    let n = arena.n();
    let mut table = LetterTable::new();
    let mut succ: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
    for s in 0..n {
        let o = arena.obs(s);
        for &(a, t) in arena.steps(s) {
            let id = table.intern((o, a.observe(), arena.obs(t)));
            succ[s].push((id, t));
        }
        succ[s].sort_unstable();
        succ[s].dedup();
    }
    let pairs = arena
        .rabin_pairs()
        .iter()
        .map(|p| (p.e.clone(), p.f.clone()))
        .collect();
    NondetStreettAutomaton {
        letters: table.letters,
        letter_index: table.index,
        initial: arena.initial(),
        succ,
        pairs,
    }
}

/// The non-simulated component of a Checker–Prover state: everything but
/// the underlying game state.  For a fixed set of players and actions the
/// number of such components is a constant, independent of the base game's
/// state count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Nu {
    Init,
    G { g: Gain },
    Action { a: ActionId, g: Gain },
    Player { dev: Option<PlayerId>, g: Gain },
}

/// Builds the reachability fast-path automaton: states are the observer
/// components `(ν, memory)` — the Checker–Prover state minus the simulated
/// game state, plus the target/deviation memory — so the automaton's size
/// does not grow with the base game.  Edges and letters come from the same
/// merged-game steps as in [`build_streett_aut`]; pair membership factors
/// through the collapsed states, which is re-checked during construction.
///
/// The collapse loses nothing on the words plays produce: a component
/// together with a letter's source observation decodes back to the one
/// merged-game state carrying both, the letter's target observation pins
/// the step's landing even when the action's value is hidden, and on a
/// play word each landing is the next letter's source — so every run
/// re-chains into an actual play with the same component sequence.
pub fn build_streett_aut_reach(pc: &PcGame) -> NondetStreettAutomaton {
    let n = pc.n();
    let nu_of = |s: usize| -> Nu {
        match pc.prod.pcp.states[pc.prod.pcp_state(s)] {
            PcpState::Initial => Nu::Init,
            PcpState::G { g, .. } => Nu::G { g },
            PcpState::Action { a, g, .. } => Nu::Action { a, g },
            PcpState::Player { dev, g, .. } => Nu::Player { dev, g },
        }
    };

    let mut key_index: HashMap<(Nu, Mem), usize> = HashMap::new();
    let mut key_of: Vec<usize> = Vec::with_capacity(n);
    for s in 0..n {
        let key = (nu_of(s), pc.prod.states[s].1);
        let next = key_index.len();
        key_of.push(*key_index.entry(key).or_insert(next));
    }
    let m = key_index.len();

    let src_pairs = pc.pairs();
    let mut pairs: Vec<(Vec<bool>, Vec<bool>)> =
        src_pairs.iter().map(|_| (vec![false; m], vec![false; m])).collect();
    let mut seen = vec![false; m];
    for s in 0..n {
        let k = key_of[s];
        if seen[k] {
            for (j, p) in src_pairs.iter().enumerate() {
                debug_assert_eq!(pairs[j].0[k], p.e[s], "pair {j} E-membership must factor");
                debug_assert_eq!(pairs[j].1[k], p.f[s], "pair {j} F-membership must factor");
            }
        } else {
            seen[k] = true;
            for (j, p) in src_pairs.iter().enumerate() {
                pairs[j].0[k] = p.e[s];
                pairs[j].1[k] = p.f[s];
            }
        }
    }

    let mut table = LetterTable::new();
    let mut succ: Vec<Vec<(usize, usize)>> = vec![Vec::new(); m];
    for s in 0..n {
        let o = pc.obs_state(s);
        for &(a, t) in &pc.succ[s] {
            let id = table.intern((o, a.observe(), pc.obs_state(t)));
            succ[key_of[s]].push((id, key_of[t]));
        }
    }
    for row in &mut succ {
        row.sort_unstable();
        row.dedup();
    }
    NondetStreettAutomaton {
        letters: table.letters,
        letter_index: table.index,
        initial: key_of[pc.initial()],
        succ,
        pairs,
    }
}

/// An ultimately periodic word `prefix · cycleʷ` over an automaton's letter
/// alphabet, as indices into its letter table.
///
/// # Invariants
///
/// - `cycle` is nonempty.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LassoWord {
    pub prefix: Vec<usize>,
    pub cycle: Vec<usize>,
}

/// Decides exactly whether some run of the Streett automaton over the
/// lasso word satisfies the Streett condition: builds the product of the
/// automaton with the lasso, then searches the cycle part's strongly
/// connected structure with the standard Streett emptiness recursion
/// (a component with an unsatisfiable pair retries with that pair's
/// F-states removed).
pub fn lasso_membership_nsw(a: &NondetStreettAutomaton, w: &LassoWord) -> bool {
    assert!(!w.cycle.is_empty(), "lasso cycle must be nonempty");
    let p = w.prefix.len();
    let total = p + w.cycle.len();
    let letter_at = |k: usize| if k < p { w.prefix[k] } else { w.cycle[k - p] };
    debug_assert!((0..total).all(|k| letter_at(k) < a.letters.len()));

    let nn = a.n() * total;
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); nn];
    let mut seen = vec![false; nn];
    let start = a.initial * total;
    seen[start] = true;
    let mut queue = VecDeque::from([(a.initial, 0usize)]);
    while let Some((q, pos)) = queue.pop_front() {
        let l = letter_at(pos);
        let npos = if pos + 1 < total { pos + 1 } else { p };
        for &(lid, t) in &a.succ[q] {
            if lid != l {
                continue;
            }
            adj[q * total + pos].push(t * total + npos);
            if !seen[t * total + npos] {
                seen[t * total + npos] = true;
                queue.push_back((t, npos));
            }
        }
    }
    // Positions inside the prefix advance strictly, so cycles live entirely
    // in the cycle part of the product.
    let alive: Vec<bool> = (0..nn).map(|x| seen[x] && x % total >= p).collect();
    sccs(&adj, &alive)
        .into_iter()
        .any(|comp| streett_feasible(a, &adj, total, comp))
}

/// The emptiness recursion: does the strongly connected `comp` contain a
/// cycle satisfying every Streett pair?
fn streett_feasible(
    a: &NondetStreettAutomaton,
    adj: &[Vec<usize>],
    total: usize,
    comp: Vec<usize>,
) -> bool {
    let bad: Vec<usize> = (0..a.pairs.len())
        .filter(|&j| {
            let (e, f) = &a.pairs[j];
            comp.iter().any(|&x| f[x / total]) && !comp.iter().any(|&x| e[x / total])
        })
        .collect();
    if bad.is_empty() {
        // The whole component doubles as a single cycle.
        return comp.len() > 1 || adj[comp[0]].contains(&comp[0]);
    }
    let mut alive = vec![false; adj.len()];
    for &x in &comp {
        alive[x] = !bad.iter().any(|&j| a.pairs[j].1[x / total]);
    }
    sccs(adj, &alive)
        .into_iter()
        .any(|c| streett_feasible(a, adj, total, c))
}

/// A stage of the automaton pipeline outgrew its configured cap.
#[derive(Debug, Clone, Error)]
#[error("{stage} exceeded its size cap ({cap})")]
pub struct SizeBlowup {
    pub stage: &'static str,
    pub cap: usize,
}

/// Default cap on lazily built deterministic-automaton and knowledge-game
/// states; generous for desk-scale instances while keeping runaway
/// determinizations diagnosable.
pub const DEFAULT_STATE_CAP: usize = 200_000;

/// The Büchi degeneralization of a Streett automaton.
///
/// States are either `Waiting(q)` — mirroring the Streett automaton until
/// the run commits — or `Committed(q, S, k)`: the run promises to avoid
/// the F-part of every pair in `S` forever, while `k` walks round-robin
/// through the remaining pairs awaiting a visit to each E-part; `k` equal
/// to the number of remaining pairs marks a completed round and is the
/// Büchi acceptance mark.
#[derive(Debug)]
struct Nba {
    initial: usize,
    /// Per state, sorted `(letter, target)` rows.
    succ: Vec<Vec<(u32, u32)>>,
    accepting: Vec<bool>,
}

impl Nba {
    /// Targets of `state` under `letter`, via binary search in the row.
    fn targets(&self, state: usize, letter: usize) -> &[(u32, u32)] {
        let row = &self.succ[state];
        let lo = row.partition_point(|&(l, _)| (l as usize) < letter);
        let hi = row.partition_point(|&(l, _)| (l as usize) <= letter);
        &row[lo..hi]
    }
}

/// Streett pairs that cannot influence acceptance: an empty F-part makes
/// the pair's clause vacuously true; duplicates add nothing.
fn essential_pairs(a: &NondetStreettAutomaton) -> Vec<(Vec<bool>, Vec<bool>)> {
    let mut out: Vec<(Vec<bool>, Vec<bool>)> = Vec::new();
    for p in &a.pairs {
        if p.1.iter().any(|&b| b) && !out.contains(p) {
            out.push(p.clone());
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum NbaKey {
    Waiting(usize),
    Committed { q: usize, forbid: u32, k: u8 },
}

/// Builds the reachable part of the degeneralization.  The pair count is
/// capped because committed states range over subsets of pairs.
fn degeneralize(a: &NondetStreettAutomaton, cap: usize) -> Result<Nba, SizeBlowup> {
    let pairs = essential_pairs(a);
    let jn = pairs.len();
    if jn > 12 {
        return Err(SizeBlowup {
            stage: "the pair degeneralization",
            cap: 12,
        });
    }
    let e_mask: Vec<u32> = (0..a.n())
        .map(|s| (0..jn).filter(|&j| pairs[j].0[s]).fold(0, |m, j| m | 1 << j))
        .collect();
    let f_mask: Vec<u32> = (0..a.n())
        .map(|s| (0..jn).filter(|&j| pairs[j].1[s]).fold(0, |m, j| m | 1 << j))
        .collect();
    let full: u32 = if jn == 32 { u32::MAX } else { (1 << jn) - 1 };

    // The pair awaited at index `k` among those outside `forbid`.
    let pair_at = |forbid: u32, k: usize| -> u32 {
        (0..jn as u32)
            .filter(|&j| forbid & (1 << j) == 0)
            .nth(k)
            .expect("index within the remaining pairs")
    };
    let advance = |forbid: u32, k: u8, target: usize| -> u8 {
        let len = (jn as u32 - forbid.count_ones()) as u8;
        if len == 0 {
            return 0;
        }
        let base = if k == len { 0 } else { k };
        if e_mask[target] & (1 << pair_at(forbid, base as usize)) != 0 {
            base + 1
        } else {
            base
        }
    };
    let accepting = |key: &NbaKey| -> bool {
        match *key {
            NbaKey::Waiting(_) => false,
            NbaKey::Committed { forbid, k, .. } => {
                k as u32 == jn as u32 - forbid.count_ones()
            }
        }
    };

    let mut index: HashMap<NbaKey, usize> = HashMap::new();
    let mut keys: Vec<NbaKey> = Vec::new();
    let intern = |key: NbaKey, index: &mut HashMap<NbaKey, usize>, keys: &mut Vec<NbaKey>| {
        *index.entry(key).or_insert_with(|| {
            keys.push(key);
            keys.len() - 1
        })
    };

    let initial = intern(NbaKey::Waiting(a.initial), &mut index, &mut keys);
    let mut succ: Vec<Vec<(u32, u32)>> = Vec::new();
    let mut done = 0usize;
    while done < keys.len() {
        if keys.len() > cap {
            return Err(SizeBlowup {
                stage: "the degeneralized automaton",
                cap,
            });
        }
        let key = keys[done];
        let mut row: Vec<(u32, u32)> = Vec::new();
        match key {
            NbaKey::Waiting(q) => {
                for &(l, t) in &a.succ[q] {
                    let w = intern(NbaKey::Waiting(t), &mut index, &mut keys);
                    row.push((l as u32, w as u32));
                    // Commit on this transition to any pair set whose
                    // F-parts the target already avoids.
                    for forbid in 0..=full {
                        if f_mask[t] & forbid != 0 {
                            continue;
                        }
                        let c = intern(
                            NbaKey::Committed { q: t, forbid, k: 0 },
                            &mut index,
                            &mut keys,
                        );
                        row.push((l as u32, c as u32));
                    }
                }
            }
            NbaKey::Committed { q, forbid, k } => {
                for &(l, t) in &a.succ[q] {
                    if f_mask[t] & forbid != 0 {
                        continue;
                    }
                    let c = intern(
                        NbaKey::Committed {
                            q: t,
                            forbid,
                            k: advance(forbid, k, t),
                        },
                        &mut index,
                        &mut keys,
                    );
                    row.push((l as u32, c as u32));
                }
            }
        }
        row.sort_unstable();
        row.dedup();
        succ.push(row);
        done += 1;
    }
    let accepting = keys.iter().map(accepting).collect();
    Ok(Nba {
        initial,
        succ,
        accepting,
    })
}

/// A node of a compact Safra tree: a persistent name, a set of Büchi
/// states, and ordered children (older, i.e. smaller-named, first).
///
/// # Invariants
///
/// - every child's label is a subset of its parent's;
/// - sibling labels are pairwise disjoint and sibling names increase left
///   to right; every child's name exceeds its parent's.
#[derive(Debug, Clone)]
struct TNode {
    name: usize,
    label: BTreeSet<usize>,
    children: Vec<TNode>,
}

fn tree_ok(node: &TNode) -> bool {
    let mut taken: BTreeSet<usize> = BTreeSet::new();
    let mut prev_name = node.name;
    for (i, c) in node.children.iter().enumerate() {
        if c.name <= prev_name || !c.label.is_subset(&node.label) || c.label.is_empty() {
            return false;
        }
        if i > 0 && c.label.intersection(&taken).next().is_some() {
            return false;
        }
        taken.extend(c.label.iter().copied());
        prev_name = c.name;
        if !tree_ok(c) {
            return false;
        }
    }
    true
}

fn max_name(node: &TNode) -> usize {
    node.children.iter().map(max_name).max().unwrap_or(0).max(node.name)
}

/// Spawns, for every current node with accepting states in its label, a
/// youngest child holding exactly those states (preorder processing; fresh
/// names exceed all existing ones).
fn spawn(node: &mut TNode, nba: &Nba, fresh: &mut usize) {
    for c in &mut node.children {
        spawn(c, nba, fresh);
    }
    let acc: BTreeSet<usize> = node
        .label
        .iter()
        .copied()
        .filter(|&q| nba.accepting[q])
        .collect();
    if !acc.is_empty() {
        node.children.push(TNode {
            name: *fresh,
            label: acc,
            children: Vec::new(),
        });
        *fresh += 1;
    }
}

/// Subset-updates every label under the letter.
fn delta(node: &mut TNode, nba: &Nba, letter: usize) {
    let mut next: BTreeSet<usize> = BTreeSet::new();
    for &q in &node.label {
        next.extend(nba.targets(q, letter).iter().map(|&(_, t)| t as usize));
    }
    node.label = next;
    for c in &mut node.children {
        delta(c, nba, letter);
    }
}

fn subtree_remove(node: &mut TNode, bad: &BTreeSet<usize>) {
    node.label.retain(|q| !bad.contains(q));
    for c in &mut node.children {
        subtree_remove(c, bad);
    }
}

/// Horizontal merge: a state owned by an older sibling is removed from the
/// younger sibling's whole subtree.
fn horizontal(node: &mut TNode) {
    let mut taken: BTreeSet<usize> = BTreeSet::new();
    for c in &mut node.children {
        subtree_remove(c, &taken);
        taken.extend(c.label.iter().copied());
        horizontal(c);
    }
}

fn assert_subtree_empty(node: &TNode) -> bool {
    node.label.is_empty() && node.children.iter().all(assert_subtree_empty)
}

/// Deletes empty nodes, recording the smallest deleted name.  Subtrees of
/// empty nodes are empty by the subset invariant.
fn prune_empty(node: &mut TNode, deleted: &mut Option<usize>) {
    node.children.retain(|c| {
        if c.label.is_empty() {
            debug_assert!(assert_subtree_empty(c));
            *deleted = Some(deleted.map_or(c.name, |d| d.min(c.name)));
            false
        } else {
            true
        }
    });
    for c in &mut node.children {
        prune_empty(c, deleted);
    }
}

/// Green merge: a node whose children jointly carry its whole label sheds
/// all descendants; the smallest such name is the step's good event.
fn green_merge(node: &mut TNode, green: &mut Option<usize>) {
    if node.children.is_empty() {
        return;
    }
    let covered: usize = node.children.iter().map(|c| c.label.len()).sum();
    debug_assert!(covered <= node.label.len(), "children disjoint and within the parent");
    if covered == node.label.len() {
        *green = Some(green.map_or(node.name, |g| g.min(node.name)));
        node.children.clear();
        return;
    }
    for c in &mut node.children {
        green_merge(c, green);
    }
}

fn collect_names(node: &TNode, out: &mut Vec<usize>) {
    out.push(node.name);
    for c in &node.children {
        collect_names(c, out);
    }
}

fn apply_rename(node: &mut TNode, map: &HashMap<usize, usize>) {
    node.name = map[&node.name];
    for c in &mut node.children {
        apply_rename(c, map);
    }
}

/// Order-preserving compaction of node names to `1..=count`.
fn rename(node: &mut TNode) {
    let mut names = Vec::new();
    collect_names(node, &mut names);
    names.sort_unstable();
    let map: HashMap<usize, usize> = names.iter().enumerate().map(|(i, &n)| (n, i + 1)).collect();
    apply_rename(node, &map);
}

/// Canonical encoding of a tree (preorder; `None` encodes as empty).
fn encode(tree: &Option<TNode>) -> Vec<u64> {
    fn enc(node: &TNode, out: &mut Vec<u64>) {
        out.push(node.name as u64);
        out.push(node.label.len() as u64);
        out.extend(node.label.iter().map(|&q| q as u64));
        out.push(node.children.len() as u64);
        for c in &node.children {
            enc(c, out);
        }
    }
    let mut out = Vec::new();
    if let Some(t) = tree {
        debug_assert!(tree_ok(t));
        enc(t, &mut out);
    }
    out
}

/// One deterministic step of the Safra-tree automaton: returns the
/// successor tree and the priority of the transition event, in the
/// *same-language* reading (even = progress towards Büchi acceptance).
fn tree_step(nba: &Nba, tree: &Option<TNode>, letter: usize, neutral: u32) -> (Option<TNode>, u32) {
    let Some(root) = tree else {
        return (None, neutral);
    };
    let mut t = root.clone();
    let mut fresh = max_name(&t) + 1;
    spawn(&mut t, nba, &mut fresh);
    delta(&mut t, nba, letter);
    horizontal(&mut t);
    if t.label.is_empty() {
        // The root dies: no runs remain, and none ever will.
        debug_assert!(assert_subtree_empty(&t));
        return (None, 2 * t.name as u32 - 1);
    }
    let mut deleted = None;
    prune_empty(&mut t, &mut deleted);
    let mut green = None;
    green_merge(&mut t, &mut green);
    let prio = match (deleted, green) {
        (None, None) => neutral,
        (Some(e), None) => 2 * e as u32 - 1,
        (None, Some(f)) => 2 * f as u32,
        (Some(e), Some(f)) => {
            if f < e {
                2 * f as u32
            } else {
                2 * e as u32 - 1
            }
        }
    };
    rename(&mut t);
    (Some(t), prio)
}

/// Lazily built tables of the deterministic parity automaton.
struct DpaTables {
    index: HashMap<(Vec<u64>, u32), usize>,
    trees: Vec<Option<TNode>>,
    priority: Vec<u32>,
    trans: Vec<Vec<Option<usize>>>,
}

/// The deterministic parity automaton complementing the Streett
/// automaton: it accepts an observation word iff the Streett automaton
/// has **no** accepting run over it — i.e. iff every compatible play of
/// the merged game is winning for the Provers.
///
/// States are pairs of a compact Safra tree and the priority of the
/// event that entered them (so priorities live on states, as the
/// knowledge game requires); acceptance is min-parity over the states
/// visited infinitely often.  States and transitions are built on demand
/// behind an internally synchronized memo table, guarded by a state cap.
pub struct DetParityAutomaton {
    nba: Nba,
    pub letters: Vec<StepLetter>,
    pub letter_index: HashMap<StepLetter, usize>,
    neutral: u32,
    cap: usize,
    tables: Mutex<DpaTables>,
}

/// Determinizes the complement of the Streett automaton.
///
/// Route: degeneralize the Streett pairs into a nondeterministic Büchi
/// automaton, determinize it with compact Safra trees into a parity
/// automaton of the same language, then complement by shifting every
/// priority up by one.  `cap` bounds both intermediate and lazily built
/// state counts.
pub fn determinize_complement(
    a: &NondetStreettAutomaton,
    cap: usize,
) -> Result<DetParityAutomaton, SizeBlowup> {
    let nba = degeneralize(a, cap)?;
    // Transient Safra names stay below twice the Büchi state count, so
    // this odd value exceeds every event priority.
    let neutral = 4 * nba.succ.len() as u32 + 5;
    let root = TNode {
        name: 1,
        label: BTreeSet::from([nba.initial]),
        children: Vec::new(),
    };
    let initial_priority = neutral + 1;
    let mut tables = DpaTables {
        index: HashMap::new(),
        trees: Vec::new(),
        priority: Vec::new(),
        trans: Vec::new(),
    };
    let n_letters = a.letters.len();
    tables
        .index
        .insert((encode(&Some(root.clone())), initial_priority), 0);
    tables.trees.push(Some(root));
    tables.priority.push(initial_priority);
    tables.trans.push(vec![None; n_letters]);
    Ok(DetParityAutomaton {
        nba,
        letters: a.letters.clone(),
        letter_index: a.letter_index.clone(),
        neutral,
        cap,
        tables: Mutex::new(tables),
    })
}

impl DetParityAutomaton {
    pub fn initial(&self) -> usize {
        0
    }

    pub fn n_letters(&self) -> usize {
        self.letters.len()
    }

    /// States materialized so far.
    pub fn n_built(&self) -> usize {
        self.tables.lock().unwrap().trees.len()
    }

    /// The state's priority: the complemented event priority of the
    /// transition that created it (min-parity, even = accepting).
    pub fn priority(&self, s: usize) -> u32 {
        self.tables.lock().unwrap().priority[s]
    }

    /// The deterministic transition, computing and memoizing it on first
    /// use.  Fails only by outgrowing the state cap.
    pub fn step(&self, s: usize, letter: usize) -> Result<usize, SizeBlowup> {
        assert!(letter < self.letters.len(), "letter out of range");
        let mut tables = self.tables.lock().unwrap();
        if let Some(t) = tables.trans[s][letter] {
            return Ok(t);
        }
        let (tree, raw) = tree_step(&self.nba, &tables.trees[s], letter, self.neutral);
        let prio = raw + 1; // complementation is a priority shift
        let key = (encode(&tree), prio);
        let id = match tables.index.get(&key) {
            Some(&id) => id,
            None => {
                if tables.trees.len() >= self.cap {
                    return Err(SizeBlowup {
                        stage: "the determinized automaton",
                        cap: self.cap,
                    });
                }
                let id = tables.trees.len();
                tables.index.insert(key, id);
                tables.trees.push(tree);
                tables.priority.push(prio);
                let width = self.letters.len();
                tables.trans.push(vec![None; width]);
                id
            }
        };
        tables.trans[s][letter] = Some(id);
        Ok(id)
    }

    /// Runs the automaton over an ultimately periodic word and decides
    /// acceptance: the minimum priority among states entered in the
    /// eventually repeating loop must be even.
    pub fn accepts_lasso(&self, w: &LassoWord) -> Result<bool, SizeBlowup> {
        assert!(!w.cycle.is_empty());
        let mut s = self.initial();
        for &l in &w.prefix {
            s = self.step(s, l)?;
        }
        let mut seen_at: HashMap<usize, usize> = HashMap::from([(s, 0)]);
        let mut mins: Vec<u32> = Vec::new();
        loop {
            let mut m = u32::MAX;
            for &l in &w.cycle {
                s = self.step(s, l)?;
                m = m.min(self.priority(s));
            }
            mins.push(m);
            if let Some(&i) = seen_at.get(&s) {
                let inf = *mins[i..].iter().min().expect("at least one iteration");
                return Ok(inf % 2 == 0);
            }
            seen_at.insert(s, mins.len());
        }
    }

    /// Debug rendering of the built part: `state letter state priority`
    /// lines, the priority being the target's.  Not a stable interface.
    pub fn to_transition_list(&self) -> String {
        let tables = self.tables.lock().unwrap();
        let mut out = String::new();
        for (s, row) in tables.trans.iter().enumerate() {
            for (l, t) in row.iter().enumerate() {
                if let Some(t) = t {
                    let _ = writeln!(
                        out,
                        "{s} {} {t} {}",
                        fmt_letter(&self.letters[l]),
                        tables.priority[*t]
                    );
                }
            }
        }
        out
    }
}

/// A state of the knowledge game: the belief `U` (every merged-game state
/// compatible with the observations so far), the deterministic automaton's
/// state, and the move observation whose step letter the automaton has not
/// yet consumed.
///
/// # Invariants
///
/// - `belief` is nonempty, sorted, duplicate-free;
/// - all belief members share one owner; Prover-owned beliefs also share
///   one observation (Checker-owned beliefs may mix observations
///   transiently, right after a function action whose values differ across
///   the belief);
/// - `pending` is the knowledge-game letter that entered this state
///   (`None` only initially): its full step observation — and so the
///   automaton's move over it — waits for the next letter to name the
///   landing, leaving `q` one move behind the belief.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KnowledgeState {
    pub belief: Vec<usize>,
    pub q: usize,
    pub pending: Option<usize>,
}

/// The perfect-information parity game over knowledge states.
///
/// The Prover picks letters with visible action components, the Checker
/// letters with hidden ones; a play is won by the Prover iff the minimum
/// priority visited infinitely often is even.
///
/// # Invariants
///
/// - state 0 is the initial state `({initial}, q₀, no pending letter)`;
/// - `succ` rows are nonempty and sorted by letter; targets of a row are
///   the letter-respecting belief updates (empty updates are pruned);
/// - `priority` is dense: it uses an unbroken low range of values per
///   parity.
#[derive(Debug)]
pub struct KnowledgeParityGame {
    pub states: Vec<KnowledgeState>,
    pub index: HashMap<(Vec<usize>, usize, Option<usize>), usize>,
    pub owner: Vec<PcOwner>,
    pub priority: Vec<u32>,
    /// Per state, sorted `(letter, target)` rows.
    pub succ: Vec<Vec<(usize, usize)>>,
    pub letters: Vec<KLetter>,
}

impl KnowledgeParityGame {
    pub fn n(&self) -> usize {
        self.states.len()
    }

    pub fn initial(&self) -> usize {
        0
    }

    /// The unique move on `letter`, if the belief update is nonempty.
    pub fn step(&self, s: usize, letter: usize) -> Option<usize> {
        self.succ[s]
            .binary_search_by_key(&letter, |&(l, _)| l)
            .ok()
            .map(|i| self.succ[s][i].1)
    }

    /// The plain parity arena (Prover = Even), edge order matching the
    /// letter order of `succ`.
    pub fn parity_arena(&self) -> ParityArena {
        ParityArena {
            owner: self
                .owner
                .iter()
                .map(|&o| if o == PcOwner::Prover { Side::Even } else { Side::Odd })
                .collect(),
            succ: self
                .succ
                .iter()
                .map(|row| row.iter().map(|&(_, t)| t).collect())
                .collect(),
            priority: self.priority.clone(),
        }
    }
}

/// Compresses priorities to a dense low range, preserving order and
/// parity (hence winners of every play).
fn normalize_priorities(priority: &mut [u32]) {
    let mut distinct: Vec<u32> = priority.to_vec();
    distinct.sort_unstable();
    distinct.dedup();
    let mut map: HashMap<u32, u32> = HashMap::new();
    let mut next = 0u32;
    for &d in &distinct {
        if next % 2 != d % 2 {
            next += 1;
        }
        map.insert(d, next);
        next += 1;
    }
    for p in priority.iter_mut() {
        *p = map[p];
    }
}

/// Builds the knowledge parity game: belief sets paired with automaton
/// states, explored from `({initial}, q₀)`.
///
/// A letter applies to the belief members whose observation matches its
/// state component (the update keeps only their matching steps' targets);
/// updates with an empty result are undefined rather than materialized.
/// The automaton consumes the *previous* letter's step observation once
/// the current letter names where that step landed, so `q` trails the
/// belief by one move throughout.  Owner homogeneity of every reachable
/// belief is asserted; Prover-owned beliefs are additionally
/// observation-uniform.
pub fn build_knowledge_game<A: ObservedArena>(
    arena: &A,
    dpa: &DetParityAutomaton,
    cap: usize,
) -> Result<KnowledgeParityGame, SizeBlowup> {
    let mut table: LetterTable<KLetter> = LetterTable::new();
    let mut states = vec![KnowledgeState {
        belief: vec![arena.initial()],
        q: dpa.initial(),
        pending: None,
    }];
    let mut index: HashMap<(Vec<usize>, usize, Option<usize>), usize> = HashMap::new();
    index.insert((states[0].belief.clone(), states[0].q, None), 0);
    let mut owner: Vec<PcOwner> = Vec::new();
    let mut succ: Vec<Vec<(usize, usize)>> = Vec::new();

    let mut done = 0usize;
    while done < states.len() {
        let KnowledgeState { belief, q, pending } = states[done].clone();
        let who = arena.owner(belief[0]);
        assert!(
            belief.iter().all(|&s| arena.owner(s) == who),
            "belief mixes owners"
        );
        if who == PcOwner::Prover {
            debug_assert!(
                belief.iter().all(|&s| arena.obs(s) == arena.obs(belief[0])),
                "a Prover-owned belief mixes observations"
            );
        }
        owner.push(who);

        let mut updates: BTreeMap<usize, BTreeSet<usize>> = BTreeMap::new();
        for &s in &belief {
            let o = arena.obs(s);
            for &(a, t) in arena.steps(s) {
                debug_assert!(
                    dpa.letter_index.contains_key(&(o, a.observe(), arena.obs(t))),
                    "arena steps map into the automaton alphabet"
                );
                updates.entry(table.intern((o, a.observe()))).or_default().insert(t);
            }
        }
        let mut row = Vec::with_capacity(updates.len());
        for (l, targets) in updates {
            let q2 = match pending {
                None => q,
                Some(p) => {
                    let (po, pa) = table.letters[p];
                    let sl = *dpa
                        .letter_index
                        .get(&(po, pa, table.letters[l].0))
                        .expect("the buffered step's landing is an interned letter");
                    dpa.step(q, sl)?
                }
            };
            let key = (targets.into_iter().collect::<Vec<_>>(), q2, Some(l));
            let id = match index.get(&key) {
                Some(&id) => id,
                None => {
                    if states.len() >= cap {
                        return Err(SizeBlowup {
                            stage: "the knowledge game",
                            cap,
                        });
                    }
                    let id = states.len();
                    states.push(KnowledgeState {
                        belief: key.0.clone(),
                        q: key.1,
                        pending: key.2,
                    });
                    index.insert(key, id);
                    id
                }
            };
            row.push((l, id));
        }
        debug_assert!(!row.is_empty(), "knowledge states never deadlock");
        succ.push(row);
        done += 1;
    }

    let mut priority: Vec<u32> = states.iter().map(|ks| dpa.priority(ks.q)).collect();
    normalize_priorities(&mut priority);
    Ok(KnowledgeParityGame {
        states,
        index,
        owner,
        priority,
        succ,
        letters: table.letters,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arena::{parse_game, StateId};
    use crate::observer::{build_parity_observer, build_reach_observer, firing_pairs, PairKind};
    use crate::one_prover::{
        corresp_lasso, merge_provers, random_pc_lasso, FunctionMode, DEFAULT_FUNCTION_CAP,
    };
    use crate::parity_solver::solve;
    use crate::pcp::{build_pcp, PcpAction};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const FIG2: &str = "\
players 2
state v0 owner 1
state v1 owner 0
state v2 owner 0
state v3 owner 0
state v4 owner 0
state v5 owner 0
state v6 owner 0
init v0
edge v0 l v1
edge v0 r v2
edge v1 lp v3
edge v1 rp v4
edge v2 lp v5
edge v2 rp v6
edge v3 lp v3
edge v4 lp v4
edge v5 lp v5
edge v6 lp v6
objective 0 reach v3
objective 1 reach v3
";

    const FIG2_PARITY: &str = "\
players 2
state v0 owner 1
state v1 owner 0
state v2 owner 0
state v3 owner 0
state v4 owner 0
state v5 owner 0
state v6 owner 0
init v0
edge v0 l v1
edge v0 r v2
edge v1 lp v3
edge v1 rp v4
edge v2 lp v5
edge v2 rp v6
edge v3 lp v3
edge v4 lp v4
edge v5 lp v5
edge v6 lp v6
objective 0 parity v0:1 v1:1 v2:1 v3:0 v4:1 v5:1 v6:1
objective 1 parity v0:1 v1:1 v2:1 v3:0 v4:1 v5:1 v6:1
";

    fn reach_pc(text: &str) -> PcGame {
        let game = parse_game(text).unwrap();
        let prod = build_reach_observer(&game, build_pcp(&game));
        merge_provers(prod, FunctionMode::Quotiented, DEFAULT_FUNCTION_CAP).unwrap()
    }

    fn parity_pc(text: &str) -> PcGame {
        let game = parse_game(text).unwrap();
        let prod = build_parity_observer(&game, build_pcp(&game));
        merge_provers(prod, FunctionMode::Quotiented, DEFAULT_FUNCTION_CAP).unwrap()
    }

    /// Builds an automaton literal from letters, edges, and pairs.
    fn nsa(
        letters: Vec<StepLetter>,
        initial: usize,
        n: usize,
        edges: &[(usize, usize, usize)],
        pairs: &[(&[usize], &[usize])],
    ) -> NondetStreettAutomaton {
        let letter_index = letters.iter().enumerate().map(|(i, &l)| (l, i)).collect();
        let mut succ = vec![Vec::new(); n];
        for &(s, l, t) in edges {
            succ[s].push((l, t));
        }
        for row in &mut succ {
            row.sort_unstable();
            row.dedup();
        }
        let mask = |xs: &[usize]| {
            let mut m = vec![false; n];
            for &x in xs {
                m[x] = true;
            }
            m
        };
        NondetStreettAutomaton {
            letters,
            letter_index,
            initial,
            succ,
            pairs: pairs.iter().map(|&(e, f)| (mask(e), mask(f))).collect(),
        }
    }

    fn two_letters() -> Vec<StepLetter> {
        vec![
            (PcpObs::Init, PcLetter::Visible(ActionId(0)), PcpObs::Init),
            (PcpObs::Init, PcLetter::Visible(ActionId(1)), PcpObs::Init),
        ]
    }

    /// Three states; accepts exactly the words some run of which visits
    /// state 1 infinitely often.
    fn handcrafted_a() -> NondetStreettAutomaton {
        nsa(
            two_letters(),
            0,
            3,
            &[(0, 0, 0), (0, 0, 1), (0, 1, 2), (1, 0, 1), (1, 1, 0), (2, 1, 2)],
            &[(&[1], &[0, 2])],
        )
    }

    /// Two states; accepts exactly the words some run of which eventually
    /// avoids state 1 forever.
    fn handcrafted_b() -> NondetStreettAutomaton {
        nsa(
            two_letters(),
            0,
            2,
            &[(0, 0, 1), (1, 0, 0), (0, 1, 0)],
            &[(&[], &[1])],
        )
    }

    fn lasso(prefix: &[usize], cycle: &[usize]) -> LassoWord {
        LassoWord {
            prefix: prefix.to_vec(),
            cycle: cycle.to_vec(),
        }
    }

    fn random_lasso<R: Rng>(rng: &mut R, n_letters: usize) -> LassoWord {
        let p = rng.gen_range(0..4);
        let c = rng.gen_range(1..5);
        LassoWord {
            prefix: (0..p).map(|_| rng.gen_range(0..n_letters)).collect(),
            cycle: (0..c).map(|_| rng.gen_range(0..n_letters)).collect(),
        }
    }

    /// The letters of a merged-game lasso, as a word over an automaton's
    /// alphabet of step observations.
    fn lasso_word_of(
        pc: &PcGame,
        table: &HashMap<StepLetter, usize>,
        l: &crate::one_prover::PcLasso,
    ) -> LassoWord {
        let conv = |steps: &[(usize, PcAction)]| {
            steps
                .iter()
                .map(|&(s, a)| {
                    let t = pc.succ[s]
                        .iter()
                        .find(|&&(b, _)| b == a)
                        .map(|&(_, t)| t)
                        .expect("lasso steps are game steps");
                    table[&(pc.obs_state(s), a.observe(), pc.obs_state(t))]
                })
                .collect()
        };
        LassoWord {
            prefix: conv(&l.prefix),
            cycle: conv(&l.cycle),
        }
    }

    /// The imperfect-information reachability example: a square owner
    /// state whose two hidden moves lead to indistinguishable circle
    /// states, from which the same visible action wins in one branch and
    /// loses in the other.  Targets are absorbing, so reaching the target
    /// equals the Rabin pair (∅, {target}).
    fn imperfect_info_arena() -> RawArena {
        let p1 = |a: u32| PcAction::Base(PcpAction::P1(ActionId(a)));
        let hidden = |a: u32| PcAction::Base(PcpAction::Propose(ActionId(a), 1));
        let at = |v: u32| PcpObs::At(StateId(v));
        let arena = RawArena {
            initial: 0,
            owner: vec![
                PcOwner::Checker,
                PcOwner::Prover,
                PcOwner::Prover,
                PcOwner::Prover,
                PcOwner::Prover,
                PcOwner::Prover,
                PcOwner::Prover,
            ],
            obs: vec![at(0), at(1), at(1), at(3), at(4), at(3), at(4)],
            succ: vec![
                vec![(hidden(0), 1), (hidden(1), 2)],
                vec![(p1(0), 3), (p1(1), 4)],
                vec![(p1(0), 5), (p1(1), 6)],
                vec![(p1(0), 3)],
                vec![(p1(0), 4)],
                vec![(p1(0), 5)],
                vec![(p1(0), 6)],
            ],
            pairs: vec![RabinPair {
                kind: PairKind::AcceptedReach,
                e: vec![false; 7],
                f: vec![false, false, false, true, false, false, false],
            }],
        };
        arena.check();
        arena
    }

    #[test]
    fn full_path_automaton_mirrors_the_arena() {
        let pc = reach_pc(FIG2);
        let a = build_streett_aut(&pc);
        assert_eq!(a.n(), pc.n());
        assert_eq!(a.initial, pc.initial());
        assert_eq!(a.pairs.len(), pc.pairs().len());
        let total_edges: usize = a.succ.iter().map(|r| r.len()).sum();
        let total_steps: usize = (0..pc.n()).map(|s| pc.succ[s].len()).sum();
        assert!(total_edges <= total_steps);
        assert!(a.letters.len() <= total_steps);
        // Checker states with several hidden moves make the automaton
        // genuinely nondeterministic.
        let nondet = a.succ.iter().any(|row| {
            row.windows(2)
                .any(|w| w[0].0 == w[1].0 && w[0].1 != w[1].1)
        });
        assert!(nondet, "annotation choices must collapse to one letter");
    }

    #[test]
    fn distinct_observations_make_the_automaton_deterministic() {
        let p1 = |a: u32| PcAction::Base(PcpAction::P1(ActionId(a)));
        let hidden = PcAction::Base(PcpAction::Annotate(Gain(0)));
        let arena = RawArena {
            initial: 0,
            owner: vec![PcOwner::Checker, PcOwner::Prover],
            obs: vec![PcpObs::At(StateId(0)), PcpObs::At(StateId(1))],
            succ: vec![vec![(hidden, 1)], vec![(p1(0), 0), (p1(1), 1)]],
            pairs: vec![],
        };
        arena.check();
        let a = build_streett_aut(&arena);
        for row in &a.succ {
            for w in row.windows(2) {
                assert_ne!(w[0].0, w[1].0, "one target per letter");
            }
        }
    }

    #[test]
    fn reach_automaton_size_is_independent_of_the_chain_length() {
        let chain = |len: usize| {
            let mut t = String::from("players 2\n");
            for i in 0..len {
                t.push_str(&format!("state s{i} owner {}\n", i % 2));
            }
            t.push_str("init s0\n");
            for i in 0..len {
                let target = if i + 1 < len { i + 1 } else { i };
                t.push_str(&format!("edge s{i} m{} s{target}\n", i % 2));
            }
            t.push_str(&format!("objective 0 reach s{}\n", len - 1));
            t.push_str(&format!("objective 1 reach s{}\n", len - 1));
            t
        };
        // Short chains may not yet realize every component; from length 5
        // on, the reachable component set saturates.
        let sizes: Vec<(usize, usize, usize)> = [5usize, 7, 9]
            .iter()
            .map(|&len| {
                let a = build_streett_aut_reach(&reach_pc(&chain(len)));
                (a.n(), a.pairs.len(), a.letters.len())
            })
            .collect();
        assert_eq!(sizes[0].0, sizes[1].0, "state count must not grow");
        assert_eq!(sizes[1].0, sizes[2].0, "state count must not grow");
        assert_eq!(sizes[0].1, sizes[1].1);
        assert_eq!(sizes[1].1, sizes[2].1);
        // The alphabet does grow: letters mention observed positions.
        assert!(sizes[0].2 < sizes[2].2);
    }

    #[test]
    fn membership_matches_the_hand_computed_table() {
        let a = handcrafted_a();
        let x = 0;
        let y = 1;
        let table: Vec<(LassoWord, bool)> = vec![
            (lasso(&[], &[x]), true),
            (lasso(&[], &[y]), false),
            (lasso(&[], &[x, y]), true),
            (lasso(&[y], &[x]), false),
            (lasso(&[x], &[y]), false),
            (lasso(&[], &[x, x, y]), true),
            (lasso(&[], &[x, y, y]), false),
            (lasso(&[x, x], &[x, y]), true),
            (lasso(&[], &[y, x]), false),
            (lasso(&[x, y], &[x]), true),
        ];
        for (i, (w, want)) in table.iter().enumerate() {
            assert_eq!(lasso_membership_nsw(&a, w), *want, "lasso {i}");
        }
    }

    #[test]
    fn membership_corner_cases() {
        // No pairs: accepted iff any run survives the word.
        let free = nsa(two_letters(), 0, 1, &[(0, 0, 0)], &[]);
        assert!(lasso_membership_nsw(&free, &lasso(&[], &[0])));
        assert!(!lasso_membership_nsw(&free, &lasso(&[1], &[0])));
        assert!(!lasso_membership_nsw(&free, &lasso(&[], &[0, 1])));
        // A pair with E = Q and F = ∅ is vacuously satisfied either way.
        let vac = nsa(two_letters(), 0, 1, &[(0, 0, 0)], &[(&[0], &[])]);
        assert!(lasso_membership_nsw(&vac, &lasso(&[], &[0])));
        assert!(!lasso_membership_nsw(&vac, &lasso(&[1], &[0])));
    }

    #[test]
    fn membership_agrees_with_product_pair_evaluation() {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5ee7);
        for text in [FIG2, FIG2_PARITY] {
            let pc = if text == FIG2 { reach_pc(text) } else { parity_pc(text) };
            let full = build_streett_aut(&pc);
            let autos = if text == FIG2 {
                vec![full, build_streett_aut_reach(&pc)]
            } else {
                vec![full]
            };
            for a in &autos {
                for _ in 0..120 {
                    let l = random_pc_lasso(&pc, &mut rng);
                    let w = lasso_word_of(&pc, &a.letter_index, &l);
                    let fired = firing_pairs(&pc.prod, &corresp_lasso(&pc, &l));
                    let member = lasso_membership_nsw(a, &w);
                    if fired.is_empty() {
                        assert!(member, "a losing play witnesses membership");
                    }
                    if !member {
                        assert!(!fired.is_empty(), "rejection forces this play to win");
                    }
                }
            }
        }
    }

    #[test]
    fn determinization_complements_the_membership_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(0xd7a1);
        let autos = vec![
            handcrafted_a(),
            handcrafted_b(),
            build_streett_aut_reach(&reach_pc(FIG2)),
            build_streett_aut(&parity_pc(FIG2_PARITY)),
        ];
        for (k, a) in autos.iter().enumerate() {
            let dpa = determinize_complement(a, DEFAULT_STATE_CAP).unwrap();
            for round in 0..150 {
                let w = random_lasso(&mut rng, a.letters.len());
                let member = lasso_membership_nsw(a, &w);
                let accepted = dpa.accepts_lasso(&w).unwrap();
                assert_eq!(accepted, !member, "automaton {k}, round {round}: {w:?}");
            }
        }
    }

    #[test]
    fn determinization_of_real_play_words() {
        let mut rng = ChaCha8Rng::seed_from_u64(0xbea7);
        let pc = reach_pc(FIG2);
        let a = build_streett_aut_reach(&pc);
        let dpa = determinize_complement(&a, DEFAULT_STATE_CAP).unwrap();
        for _ in 0..120 {
            let l = random_pc_lasso(&pc, &mut rng);
            let w = lasso_word_of(&pc, &a.letter_index, &l);
            assert_eq!(
                dpa.accepts_lasso(&w).unwrap(),
                !lasso_membership_nsw(&a, &w)
            );
        }
    }

    #[test]
    fn all_accepting_automaton_determinizes_to_all_rejecting() {
        let a = nsa(two_letters(), 0, 1, &[(0, 0, 0), (0, 1, 0)], &[]);
        let dpa = determinize_complement(&a, DEFAULT_STATE_CAP).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0x0f42);
        for _ in 0..50 {
            let w = random_lasso(&mut rng, 2);
            assert!(!dpa.accepts_lasso(&w).unwrap());
        }
    }

    #[test]
    fn dead_words_are_exactly_the_accepted_ones_without_pairs() {
        // Letter 1 has no transition: words using it kill every run.
        let a = nsa(two_letters(), 0, 1, &[(0, 0, 0)], &[]);
        let dpa = determinize_complement(&a, DEFAULT_STATE_CAP).unwrap();
        assert!(!dpa.accepts_lasso(&lasso(&[], &[0])).unwrap());
        assert!(dpa.accepts_lasso(&lasso(&[1], &[0])).unwrap());
        assert!(dpa.accepts_lasso(&lasso(&[], &[0, 1])).unwrap());
        assert!(dpa.accepts_lasso(&lasso(&[0, 0], &[1])).unwrap());
    }

    #[test]
    fn the_imperfect_information_example_has_no_winning_prover() {
        let arena = imperfect_info_arena();
        let a = build_streett_aut(&arena);
        let dpa = determinize_complement(&a, DEFAULT_STATE_CAP).unwrap();
        let kg = build_knowledge_game(&arena, &dpa, DEFAULT_STATE_CAP).unwrap();
        // The belief after the hidden move covers both middle states.
        assert!(kg
            .states
            .iter()
            .any(|ks| ks.belief == vec![1, 2]));
        let result = solve(&kg.parity_arena());
        assert_eq!(
            result.region[kg.initial()],
            Side::Odd,
            "no observation-based strategy reaches the target"
        );
        // Control: spread the targets so each branch has a winning action
        // (left branch wants action 0, right branch action 1).  The
        // information deficit alone still defeats the Prover …
        let mut split = arena.clone();
        split.pairs[0].f = vec![false, false, false, true, false, false, true];
        let a2 = build_streett_aut(&split);
        let dpa2 = determinize_complement(&a2, DEFAULT_STATE_CAP).unwrap();
        let kg2 = build_knowledge_game(&split, &dpa2, DEFAULT_STATE_CAP).unwrap();
        assert_eq!(
            solve(&kg2.parity_arena()).region[kg2.initial()],
            Side::Odd,
            "spread targets alone do not repair the information deficit"
        );
        // … while distinguishing the middle states (and observing the
        // moves reaching them) makes the same objective winnable.
        let mut seeing = split.clone();
        seeing.obs[2] = PcpObs::At(StateId(2));
        let p1 = |a: u32| PcAction::Base(PcpAction::P1(ActionId(a)));
        seeing.succ[0] = vec![(p1(7), 1), (p1(8), 2)];
        let a3 = build_streett_aut(&seeing);
        let dpa3 = determinize_complement(&a3, DEFAULT_STATE_CAP).unwrap();
        let kg3 = build_knowledge_game(&seeing, &dpa3, DEFAULT_STATE_CAP).unwrap();
        assert_eq!(
            solve(&kg3.parity_arena()).region[kg3.initial()],
            Side::Even,
            "perfect information makes the spread objective winnable"
        );
    }

    #[test]
    fn knowledge_states_are_coherent_on_the_running_example() {
        let pc = reach_pc(FIG2);
        let a = build_streett_aut_reach(&pc);
        let dpa = determinize_complement(&a, DEFAULT_STATE_CAP).unwrap();
        let kg = build_knowledge_game(&pc, &dpa, DEFAULT_STATE_CAP).unwrap();
        assert_eq!(kg.states[0].belief, vec![pc.initial()]);
        let kind = |s: usize| -> u8 {
            match pc.prod.pcp.states[pc.prod.pcp_state(s)] {
                PcpState::Initial => 0,
                PcpState::G { .. } => 1,
                PcpState::Action { .. } => 2,
                PcpState::Player { .. } => 3,
            }
        };
        for (i, ks) in kg.states.iter().enumerate() {
            assert!(!ks.belief.is_empty());
            let k0 = kind(ks.belief[0]);
            assert!(
                ks.belief.iter().all(|&s| kind(s) == k0),
                "state {i} mixes state kinds"
            );
            assert!(ks.belief.windows(2).all(|w| w[0] < w[1]), "belief sorted");
            if kg.owner[i] == PcOwner::Prover {
                let o = pc.obs_state(ks.belief[0]);
                assert!(ks.belief.iter().all(|&s| pc.obs_state(s) == o));
            }
            assert!(!kg.succ[i].is_empty());
        }
    }

    #[test]
    fn histories_replay_to_a_unique_image_containing_their_end() {
        let mut rng = ChaCha8Rng::seed_from_u64(0x4157);
        let pc = reach_pc(FIG2);
        for a in [build_streett_aut_reach(&pc), build_streett_aut(&pc)] {
            let dpa = determinize_complement(&a, DEFAULT_STATE_CAP).unwrap();
            let kg = build_knowledge_game(&pc, &dpa, DEFAULT_STATE_CAP).unwrap();
            for _ in 0..200 {
                let mut s = pc.initial();
                let mut at = kg.initial();
                for _ in 0..rng.gen_range(0..30) {
                    let row = &pc.succ[s];
                    let (act, t) = row[rng.gen_range(0..row.len())];
                    let l = kg.letters.iter().position(|&kl| {
                        kl == (pc.obs_state(s), act.observe())
                    });
                    let l = l.expect("letter interned");
                    at = kg.step(at, l).expect("image exists for every history");
                    s = t;
                    assert!(
                        kg.states[at].belief.contains(&s),
                        "the image's belief tracks the history's end"
                    );
                }
            }
        }
    }

    #[test]
    fn knowledge_plays_mirror_the_automaton_on_lassos() {
        let mut rng = ChaCha8Rng::seed_from_u64(0x1a55);
        let pc = reach_pc(FIG2);
        let a = build_streett_aut_reach(&pc);
        let dpa = determinize_complement(&a, DEFAULT_STATE_CAP).unwrap();
        let kg = build_knowledge_game(&pc, &dpa, DEFAULT_STATE_CAP).unwrap();
        let kg_letter: HashMap<KLetter, usize> =
            kg.letters.iter().enumerate().map(|(i, &l)| (l, i)).collect();
        for _ in 0..120 {
            let l = random_pc_lasso(&pc, &mut rng);
            let w = lasso_word_of(&pc, &a.letter_index, &l);
            // Replay the players' view of the same word through the
            // knowledge game (whose letters do not carry the landing).
            let conv = |steps: &[(usize, PcAction)]| -> Vec<usize> {
                steps
                    .iter()
                    .map(|&(s, a)| kg_letter[&(pc.obs_state(s), a.observe())])
                    .collect()
            };
            let (kp, kc) = (conv(&l.prefix), conv(&l.cycle));
            let mut s = kg.initial();
            for &x in &kp {
                s = kg.step(s, x).expect("real plays never leave the game");
            }
            let mut seen_at = HashMap::from([(s, 0usize)]);
            let mut mins: Vec<u32> = Vec::new();
            let win = loop {
                let mut m = u32::MAX;
                for &x in &kc {
                    s = kg.step(s, x).expect("real plays never leave the game");
                    m = m.min(kg.priority[s]);
                }
                mins.push(m);
                if let Some(&i) = seen_at.get(&s) {
                    break mins[i..].iter().min().unwrap() % 2 == 0;
                }
                seen_at.insert(s, mins.len());
            };
            assert_eq!(win, dpa.accepts_lasso(&w).unwrap());
        }
    }

    #[test]
    fn priorities_normalize_densely() {
        let mut p = vec![7, 4, 4, 9, 12];
        normalize_priorities(&mut p);
        assert_eq!(p, vec![1, 0, 0, 3, 4]);
        let mut q = vec![3, 3];
        normalize_priorities(&mut q);
        assert_eq!(q, vec![1, 1]);
    }

    #[test]
    fn transition_lists_render() {
        let a = handcrafted_a();
        let text = a.to_transition_list();
        assert!(text.contains("pair 0"));
        assert!(text.contains("init.a0>init"));
        let dpa = determinize_complement(&a, DEFAULT_STATE_CAP).unwrap();
        dpa.accepts_lasso(&lasso(&[], &[0])).unwrap();
        assert!(!dpa.to_transition_list().is_empty());
    }
}
