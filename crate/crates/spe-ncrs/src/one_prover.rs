//! Merging the two Provers into a single Prover with function actions.
//!
//! In the observer product, Prover 1 (playing player 0's own moves) and
//! Prover 2 (resolving the Checker's proposals) win and lose together.
//! This module fuses them into a single Prover of a two-player zero-sum
//! Rabin game: states, Checker moves, and Prover-1 moves are kept
//! verbatim, while every Prover-2 state trades its plain actions for
//! *function actions* — maps that assign one plain action to each
//! equally-observed Prover-2 state. Playing a function action at `s`
//! follows the plain transition of its value at `s`. Function actions are
//! fully visible to the Prover, so an observation-based strategy commits
//! to one resolution per observation without knowing which equally-observed
//! state is the actual position.
//!
//! Enumerating all partial maps over the Prover-2 states is exponential in
//! the arena, but only a map's values on states consistent with the
//! observed history can ever be exercised. [`FunctionMode::Quotiented`]
//! therefore identifies maps that agree on an observation class and
//! enumerates each class as a domain of its own, bounding the action count
//! by `|plain actions| ^ |class|` per class. The unrestricted semantics is
//! kept as [`FunctionMode::Unquotiented`] for differential testing on tiny
//! arenas.

use std::collections::BTreeMap;

use rand::Rng;
use thiserror::Error;

use crate::arena::{ActionId, StateId};
use crate::observer::{ObserverProduct, ProductLasso, RabinPair};
use crate::pcp::{PcpAction, PcpLetter, PcpObs, Who};

/// How Prover-2 function actions are enumerated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FunctionMode {
    /// One action per total map from an observation class of Prover-2
    /// states to their plain actions; maps agreeing on the class are
    /// identified. The default.
    Quotiented,
    /// Every nonempty partial map over all Prover-2 states. Exponential;
    /// only for differential testing against the quotient.
    Unquotiented,
}

/// A function action: finitely many `(state, plain action)` assignments.
///
/// # Invariants
///
/// - `entries` is nonempty and strictly sorted by state;
/// - every key is a Prover-2 state of the product and every assigned
///   action is one of its plain moves.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FunctionAction {
    pub entries: Vec<(usize, ActionId)>,
}

impl FunctionAction {
    /// The assigned plain action at `s`, if `s` is in the domain.
    pub fn value_at(&self, s: usize) -> Option<ActionId> {
        self.entries
            .binary_search_by_key(&s, |&(k, _)| k)
            .ok()
            .map(|i| self.entries[i].1)
    }
}

/// Owner of a merged-game state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PcOwner {
    Prover,
    Checker,
}

/// An action of the merged game: a product action carried over, or a
/// function action given as an index into [`PcGame::fun_actions`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PcAction {
    Base(PcpAction),
    Fun(usize),
}

/// What the merged Prover observes of an action: Checker moves collapse to
/// the hidden letter, Prover-1 moves show their plain action, and function
/// actions are visible as themselves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PcLetter {
    Sharp,
    Visible(ActionId),
    Fun(usize),
}

impl PcAction {
    pub fn observe(self) -> PcLetter {
        match self {
            PcAction::Base(a) => match a.observe() {
                PcpLetter::Sharp => PcLetter::Sharp,
                PcpLetter::Visible(x) => PcLetter::Visible(x),
            },
            PcAction::Fun(i) => PcLetter::Fun(i),
        }
    }
}

/// Size-guard failure: the requested mode would enumerate more function
/// actions than the cap allows.
#[derive(Debug, Error)]
#[error(
    "enumerating function actions would exceed the cap of {cap} \
     (a domain of {domain} states with up to {actions} plain actions each)"
)]
pub struct FunctionBlowup {
    pub cap: usize,
    pub domain: usize,
    pub actions: usize,
}

/// Default bound on the total number of enumerated function actions.
/// Observation classes grow with the annotation and observer-memory
/// variety of an arena, and the map count is exponential in the class
/// size, so callers solving larger instances must raise the cap
/// deliberately rather than silently paying for it.
pub const DEFAULT_FUNCTION_CAP: usize = 1 << 16;

/// The merged two-player game: one Prover against the Checker.
///
/// # Invariants
///
/// - states are exactly the product's states; Prover-1 and Checker
///   successor lists are the product's, wrapped in [`PcAction::Base`];
/// - a Prover-2 state has one successor per function action whose domain
///   contains it, sorted by function index, each following the plain
///   transition of the action's value at that state;
/// - the Rabin pairs are shared with the product, untouched;
/// - `classes` partitions the Prover-2 states by state observation, each
///   class sorted ascending; `class_of[s]` is `Some` exactly on Prover-2
///   states.
#[derive(Debug, Clone)]
pub struct PcGame {
    pub prod: ObserverProduct,
    pub mode: FunctionMode,
    pub classes: Vec<Vec<usize>>,
    pub class_of: Vec<Option<usize>>,
    pub fun_actions: Vec<FunctionAction>,
    pub succ: Vec<Vec<(PcAction, usize)>>,
}

impl PcGame {
    pub fn n(&self) -> usize {
        self.prod.n()
    }

    pub fn initial(&self) -> usize {
        self.prod.initial()
    }

    pub fn owner_of(&self, s: usize) -> PcOwner {
        match self.prod.owner_of(s) {
            Who::Prover1 | Who::Prover2 => PcOwner::Prover,
            Who::Checker => PcOwner::Checker,
        }
    }

    pub fn obs_state(&self, s: usize) -> PcpObs {
        self.prod.obs_state(s)
    }

    /// The Rabin pairs, shared with the product unchanged.
    pub fn pairs(&self) -> &[RabinPair] {
        &self.prod.pairs
    }
}

/// The plain Prover-2 moves available at product state `s`.
fn p2_actions(prod: &ObserverProduct, s: usize) -> Vec<ActionId> {
    prod.succ[s]
        .iter()
        .map(|&(a, _)| match a {
            PcpAction::P2(b) => b,
            other => unreachable!("Prover-2 state with action {other:?}"),
        })
        .collect()
}

/// All total maps `members -> acts`, in little-endian counter order over
/// the action list. `members` must be sorted; the result has exactly
/// `|acts| ^ |members|` pairwise distinct maps.
fn total_maps(members: &[usize], acts: &[ActionId]) -> Vec<FunctionAction> {
    let mut out = Vec::new();
    let mut digits = vec![0usize; members.len()];
    loop {
        out.push(FunctionAction {
            entries: members
                .iter()
                .zip(&digits)
                .map(|(&s, &d)| (s, acts[d]))
                .collect(),
        });
        let mut i = 0;
        while i < digits.len() {
            digits[i] += 1;
            if digits[i] < acts.len() {
                break;
            }
            digits[i] = 0;
            i += 1;
        }
        if i == digits.len() {
            return out;
        }
    }
}

/// All nonempty partial maps over `keys`, where position `k` may be absent
/// or take any action from `acts_per_key[k]`.
fn partial_maps(keys: &[usize], acts_per_key: &[&[ActionId]]) -> Vec<FunctionAction> {
    let mut out = Vec::new();
    let mut digits = vec![0usize; keys.len()];
    loop {
        // Advance first: the all-absent assignment is skipped.
        let mut i = 0;
        while i < digits.len() {
            digits[i] += 1;
            if digits[i] <= acts_per_key[i].len() {
                break;
            }
            digits[i] = 0;
            i += 1;
        }
        if i == digits.len() {
            return out;
        }
        out.push(FunctionAction {
            entries: digits
                .iter()
                .enumerate()
                .filter(|&(_, &d)| d > 0)
                .map(|(k, &d)| (keys[k], acts_per_key[k][d - 1]))
                .collect(),
        });
    }
}

/// Merges the two Provers of an observer product into one.
///
/// Prover-1 and Checker states keep their successors; every Prover-2
/// state's moves are replaced by the applicable function actions of the
/// chosen [`FunctionMode`]. Errors if more than `cap` function actions
/// would be enumerated.
pub fn merge_provers(
    prod: ObserverProduct,
    mode: FunctionMode,
    cap: usize,
) -> Result<PcGame, FunctionBlowup> {
    let n = prod.n();
    let mut class_of: Vec<Option<usize>> = vec![None; n];
    let mut by_obs: BTreeMap<StateId, Vec<usize>> = BTreeMap::new();
    for s in 0..n {
        if prod.owner_of(s) == Who::Prover2 {
            match prod.obs_state(s) {
                PcpObs::At(v) => by_obs.entry(v).or_default().push(s),
                PcpObs::Init => unreachable!("Prover-2 state observed as initial"),
            }
        }
    }
    let classes: Vec<Vec<usize>> = by_obs.into_values().collect();
    for (c, members) in classes.iter().enumerate() {
        for &s in members {
            class_of[s] = Some(c);
        }
    }

    let mut class_actions: Vec<Vec<ActionId>> = Vec::with_capacity(classes.len());
    for members in &classes {
        let acts = p2_actions(&prod, members[0]);
        for &s in &members[1..] {
            debug_assert_eq!(
                p2_actions(&prod, s),
                acts,
                "equally-observed Prover-2 states share their plain actions"
            );
        }
        class_actions.push(acts);
    }

    // Per-state plain-action target lookup, shared by both modes.
    let target_of = |s: usize, b: ActionId| -> usize {
        prod.succ[s]
            .iter()
            .find(|&&(a, _)| a == PcpAction::P2(b))
            .expect("assigned action defined at its state")
            .1
    };

    let mut fun_actions: Vec<FunctionAction> = Vec::new();
    let mut fun_rows: Vec<Vec<(PcAction, usize)>> = vec![Vec::new(); n];
    match mode {
        FunctionMode::Quotiented => {
            let mut total: u128 = 0;
            for (members, acts) in classes.iter().zip(&class_actions) {
                let blow = || FunctionBlowup {
                    cap,
                    domain: members.len(),
                    actions: acts.len(),
                };
                let exp = u32::try_from(members.len()).map_err(|_| blow())?;
                let count = (acts.len() as u128).checked_pow(exp).ok_or_else(blow)?;
                total = total.checked_add(count).ok_or_else(blow)?;
                if total > cap as u128 {
                    return Err(blow());
                }
            }
            for (members, acts) in classes.iter().zip(&class_actions) {
                let start = fun_actions.len();
                let maps = total_maps(members, acts);
                for (off, f) in maps.iter().enumerate() {
                    for &(s, b) in &f.entries {
                        fun_rows[s].push((PcAction::Fun(start + off), target_of(s, b)));
                    }
                }
                fun_actions.extend(maps);
            }
        }
        FunctionMode::Unquotiented => {
            let mut keys: Vec<usize> = classes.iter().flatten().copied().collect();
            keys.sort_unstable();
            let acts_per_key: Vec<&[ActionId]> = keys
                .iter()
                .map(|&s| class_actions[class_of[s].unwrap()].as_slice())
                .collect();
            let mut total: u128 = 1;
            for a in &acts_per_key {
                let blow = || FunctionBlowup {
                    cap,
                    domain: keys.len(),
                    actions: a.len(),
                };
                total = total.checked_mul(1 + a.len() as u128).ok_or_else(blow)?;
                if total - 1 > cap as u128 {
                    return Err(blow());
                }
            }
            if !keys.is_empty() {
                fun_actions = partial_maps(&keys, &acts_per_key);
                for (i, f) in fun_actions.iter().enumerate() {
                    for &(s, b) in &f.entries {
                        fun_rows[s].push((PcAction::Fun(i), target_of(s, b)));
                    }
                }
            }
        }
    }

    let mut succ: Vec<Vec<(PcAction, usize)>> = Vec::with_capacity(n);
    for (s, row) in fun_rows.into_iter().enumerate() {
        if prod.owner_of(s) == Who::Prover2 {
            debug_assert!(!row.is_empty(), "Prover-2 state left without moves");
            debug_assert!(row.windows(2).all(|w| w[0].0 < w[1].0));
            succ.push(row);
        } else {
            debug_assert!(row.is_empty());
            succ.push(
                prod.succ[s]
                    .iter()
                    .map(|&(a, t)| (PcAction::Base(a), t))
                    .collect(),
            );
        }
    }

    Ok(PcGame {
        prod,
        mode,
        classes,
        class_of,
        fun_actions,
        succ,
    })
}

/// Rewrites merged-game steps into the corresponding product steps: base
/// actions are kept and a function action is replaced by its value at the
/// state where it was played.
pub fn corresp(pc: &PcGame, steps: &[(usize, PcAction)]) -> Vec<(usize, PcpAction)> {
    steps
        .iter()
        .map(|&(s, a)| {
            let b = match a {
                PcAction::Base(b) => b,
                PcAction::Fun(i) => PcpAction::P2(
                    pc.fun_actions[i]
                        .value_at(s)
                        .expect("function action applied outside its domain"),
                ),
            };
            (s, b)
        })
        .collect()
}

/// An ultimately periodic play of the merged game.
///
/// # Invariants
///
/// - `cycle` is nonempty and transition-consistent with the game (see
///   [`PcLasso::well_formed`]).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PcLasso {
    pub prefix: Vec<(usize, PcAction)>,
    pub cycle: Vec<(usize, PcAction)>,
}

impl PcLasso {
    pub fn well_formed(&self, pc: &PcGame) -> bool {
        if self.cycle.is_empty() {
            return false;
        }
        let step = |s: usize, a: PcAction| -> Option<usize> {
            pc.succ[s].iter().find(|&&(b, _)| b == a).map(|&(_, t)| t)
        };
        let seq: Vec<_> = self.prefix.iter().chain(self.cycle.iter()).collect();
        for w in seq.windows(2) {
            if step(w[0].0, w[0].1) != Some(w[1].0) {
                return false;
            }
        }
        let (last, la) = *self.cycle.last().unwrap();
        step(last, la) == Some(self.cycle[0].0)
    }
}

/// The product play corresponding to a merged-game lasso.
pub fn corresp_lasso(pc: &PcGame, l: &PcLasso) -> ProductLasso {
    ProductLasso {
        prefix: corresp(pc, &l.prefix),
        cycle: corresp(pc, &l.cycle),
    }
}

/// Uniform random lasso of the merged game: a random walk from the initial
/// state until a state repeats.
pub fn random_pc_lasso<R: Rng>(pc: &PcGame, rng: &mut R) -> PcLasso {
    let mut pos: std::collections::HashMap<usize, usize> = std::collections::HashMap::new();
    let mut seq: Vec<(usize, PcAction)> = Vec::new();
    let mut cur = pc.initial();
    loop {
        if let Some(&k) = pos.get(&cur) {
            return PcLasso {
                prefix: seq[..k].to_vec(),
                cycle: seq[k..].to_vec(),
            };
        }
        pos.insert(cur, seq.len());
        let &(a, t) = &pc.succ[cur][rng.gen_range(0..pc.succ[cur].len())];
        seq.push((cur, a));
        cur = t;
    }
}
