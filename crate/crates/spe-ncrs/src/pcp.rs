//! The first reduction stage: from a multi-player game to a three-player
//! game between a Checker and two Provers.
//!
//! The Checker annotates the play with a predicted gain vector (one win bit
//! per player of the original game) and proposes actions on behalf of the
//! environment players; Prover 1 plays player 0's actions under imperfect
//! information (gain annotations and proposals are hidden); Prover 2 either
//! accepts a proposal or deviates to another action of the same environment
//! player, which forces the Checker to re-propose a gain vector whose
//! component for the deviating player may only decrease. The Checker wins
//! iff the annotation discipline survives: the predicted gains are
//! eventually correct for the simulated play, or some single environment
//! player deviates forever without ever beating the prediction, or the
//! deviating player changes infinitely often.

use std::collections::HashMap;
use std::fmt;

use rand::Rng;

use crate::arena::{evaluate_lasso, ActionId, Game, LassoPlay, PlayerId, StateId};

/// A predicted gain vector: bit `i` claims player `i` wins the play.
/// Supports games with at most 16 players.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Gain(pub u16);

impl Gain {
    pub fn bit(self, i: PlayerId) -> bool {
        self.0 & (1 << i) != 0
    }

    pub fn from_bools(bits: &[bool]) -> Gain {
        let mut g = 0u16;
        for (i, &b) in bits.iter().enumerate() {
            if b {
                g |= 1 << i;
            }
        }
        Gain(g)
    }

    /// All gain vectors for `players` players, ascending.
    pub fn all(players: usize) -> impl Iterator<Item = Gain> {
        (0u16..1 << players).map(Gain)
    }
}

impl fmt::Display for Gain {
    fn fmt(&self, w: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(w, "{:b}", self.0)
    }
}

/// The three sides of the Checker–Prover game.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Who {
    Prover1,
    Prover2,
    Checker,
}

/// States of the Checker–Prover game.
///
/// The `Player` variant's `dev` component records how the state was entered:
/// `None` means Prover 2 accepted the proposal, `Some(i)` means Prover 2
/// deviated on behalf of environment player `i`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PcpState {
    /// The unique initial state, before the first gain annotation.
    Initial,
    /// `v` with current annotation `g`; owned by Prover 1 if player 0 owns
    /// `v`, by the Checker otherwise.
    G { v: StateId, g: Gain },
    /// A pending proposal `a` at environment state `v`; owned by Prover 2.
    Action { v: StateId, a: ActionId, g: Gain },
    /// Post-move bookkeeping state at the *successor* `v`; owned by the
    /// Checker, which must now (re-)propose an annotation.
    Player {
        v: StateId,
        dev: Option<PlayerId>,
        g: Gain,
    },
}

/// Actions of the Checker–Prover game. `P1`/`P2` actions are visible to
/// Prover 1 as themselves; `Propose` and `Annotate` are Checker actions,
/// all observed as the single hidden letter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PcpAction {
    /// Prover 1 plays one of player 0's actions.
    P1(ActionId),
    /// Prover 2 resolves a proposal by playing an environment action
    /// (the proposed one or a deviation).
    P2(ActionId),
    /// Checker proposes environment action `a` of player `i`.
    Propose(ActionId, PlayerId),
    /// Checker annotates the play with a gain vector.
    Annotate(Gain),
}

/// What Prover 1 can observe of a state: everything except the annotation,
/// proposal, and deviation bookkeeping — i.e. the underlying game state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PcpObs {
    Init,
    At(StateId),
}

/// What Prover 1 can observe of an action.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PcpLetter {
    /// A hidden Checker move.
    Sharp,
    /// A visible Prover move (player 0's own actions and the environment
    /// actions resolved by Prover 2).
    Visible(ActionId),
}

impl PcpAction {
    pub fn observe(self) -> PcpLetter {
        match self {
            PcpAction::P1(a) | PcpAction::P2(a) => PcpLetter::Visible(a),
            PcpAction::Propose(..) | PcpAction::Annotate(_) => PcpLetter::Sharp,
        }
    }
}

/// The reachable part of the Checker–Prover game built from a base game.
///
/// # Invariants
///
/// - state 0 is [`PcpState::Initial`];
/// - successor lists are sorted by action and deterministic (distinct
///   actions lead to distinct states);
/// - every state has at least one successor;
/// - on every annotation edge leaving a deviation state for player `i`, the
///   `i`-th gain component never increases.
#[derive(Debug, Clone)]
pub struct PcpGame {
    pub states: Vec<PcpState>,
    pub index: HashMap<PcpState, usize>,
    pub succ: Vec<Vec<(PcpAction, usize)>>,
    pub players: usize,
}

impl PcpGame {
    pub fn n(&self) -> usize {
        self.states.len()
    }

    pub fn initial(&self) -> usize {
        0
    }

    pub fn owner_of(&self, s: usize) -> Who {
        match self.states[s] {
            PcpState::Initial | PcpState::Player { .. } => Who::Checker,
            PcpState::G { .. } if self.p1_owned_g(s) => Who::Prover1,
            PcpState::G { .. } => Who::Checker,
            PcpState::Action { .. } => Who::Prover2,
        }
    }

    fn p1_owned_g(&self, s: usize) -> bool {
        match self.states[s] {
            PcpState::G { .. } => self.succ[s]
                .first()
                .is_some_and(|(a, _)| matches!(a, PcpAction::P1(_))),
            _ => false,
        }
    }

    /// Prover 1's view of a state: the underlying game state, or the
    /// distinguished initial observation.
    pub fn obs_state(&self, s: usize) -> PcpObs {
        match self.states[s] {
            PcpState::Initial => PcpObs::Init,
            PcpState::G { v, .. } | PcpState::Action { v, .. } | PcpState::Player { v, .. } => {
                PcpObs::At(v)
            }
        }
    }

    /// The current gain annotation, absent only at the initial state.
    pub fn gain_of(&self, s: usize) -> Option<Gain> {
        match self.states[s] {
            PcpState::Initial => None,
            PcpState::G { g, .. } | PcpState::Action { g, .. } | PcpState::Player { g, .. } => {
                Some(g)
            }
        }
    }

    /// The underlying game state, absent only at the initial state.
    pub fn gcomp(&self, s: usize) -> Option<StateId> {
        match self.obs_state(s) {
            PcpObs::Init => None,
            PcpObs::At(v) => Some(v),
        }
    }

    /// For bookkeeping states, how they were entered (`None` = accepted
    /// proposal, `Some(i)` = deviation by player `i`).
    pub fn deviation_of(&self, s: usize) -> Option<Option<PlayerId>> {
        match self.states[s] {
            PcpState::Player { dev, .. } => Some(dev),
            _ => None,
        }
    }
}

/// Builds the reachable Checker–Prover game for a base game.
///
/// Panics if the base game has more than 16 players (the gain vector is a
/// 16-bit mask).
pub fn build_pcp(game: &Game) -> PcpGame {
    let g = &game.structure;
    assert!(g.players <= 16, "gain vectors support at most 16 players");

    let mut states: Vec<PcpState> = Vec::new();
    let mut index: HashMap<PcpState, usize> = HashMap::new();
    let mut succ: Vec<Vec<(PcpAction, usize)>> = Vec::new();

    let intern = |st: PcpState,
                      states: &mut Vec<PcpState>,
                      succ: &mut Vec<Vec<(PcpAction, usize)>>,
                      index: &mut HashMap<PcpState, usize>|
     -> usize {
        *index.entry(st).or_insert_with(|| {
            states.push(st);
            succ.push(Vec::new());
            states.len() - 1
        })
    };

    let root = intern(PcpState::Initial, &mut states, &mut succ, &mut index);
    let mut queue = vec![root];
    let mut qi = 0;
    while qi < queue.len() {
        let s = queue[qi];
        qi += 1;
        let st = states[s];
        let mut out: Vec<(PcpAction, PcpState)> = Vec::new();
        match st {
            PcpState::Initial => {
                // The Checker opens with any annotation claiming a loss for
                // player 0.
                for gain in Gain::all(g.players).filter(|gain| !gain.bit(0)) {
                    out.push((
                        PcpAction::Annotate(gain),
                        PcpState::G {
                            v: g.initial,
                            g: gain,
                        },
                    ));
                }
            }
            PcpState::G { v, g: gain } => {
                let owner = g.owner[v.idx()];
                if owner == 0 {
                    for &(a, t) in &g.succ[v.idx()] {
                        out.push((PcpAction::P1(a), PcpState::G { v: t, g: gain }));
                    }
                } else {
                    for &(a, _) in &g.succ[v.idx()] {
                        out.push((
                            PcpAction::Propose(a, owner),
                            PcpState::Action { v, a, g: gain },
                        ));
                    }
                }
            }
            PcpState::Action { v, a, g: gain } => {
                let owner = g.owner[v.idx()];
                for &(b, t) in &g.succ[v.idx()] {
                    let dev = if b == a { None } else { Some(owner) };
                    out.push((PcpAction::P2(b), PcpState::Player { v: t, dev, g: gain }));
                }
            }
            PcpState::Player { v, dev, g: gain } => match dev {
                None => {
                    // Accepted proposal: the annotation is replayed as is.
                    out.push((PcpAction::Annotate(gain), PcpState::G { v, g: gain }));
                }
                Some(i) => {
                    // Deviation by player i: re-propose any annotation whose
                    // i-th component does not exceed the current one.
                    for fresh in Gain::all(g.players) {
                        if fresh.bit(i) && !gain.bit(i) {
                            continue;
                        }
                        out.push((PcpAction::Annotate(fresh), PcpState::G { v, g: fresh }));
                    }
                }
            },
        }
        out.sort_unstable_by_key(|&(a, _)| a);
        for (a, t) in out {
            let ti = intern(t, &mut states, &mut succ, &mut index);
            succ[s].push((a, ti));
        }
        // Interning only appends, so the states added by this expansion are
        // exactly the ids from queue.len() up.
        while queue.len() < states.len() {
            queue.push(queue.len());
        }
    }

    debug_assert!(succ.iter().all(|list| !list.is_empty()), "no deadlocks");
    debug_assert!(
        succ.iter()
            .all(|list| list.windows(2).all(|w| w[0].0 < w[1].0)),
        "successors sorted by action, hence action-unique"
    );

    PcpGame {
        states,
        index,
        succ,
        players: g.players,
    }
}

/// An ultimately periodic play of the Checker–Prover game.
///
/// # Invariants
///
/// - `cycle` is nonempty and transition-consistent with the game (see
///   [`PcpLasso::well_formed`]).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PcpLasso {
    pub prefix: Vec<(usize, PcpAction)>,
    pub cycle: Vec<(usize, PcpAction)>,
}

impl PcpLasso {
    pub fn well_formed(&self, pcp: &PcpGame) -> bool {
        if self.cycle.is_empty() {
            return false;
        }
        let step = |s: usize, a: PcpAction| -> Option<usize> {
            pcp.succ[s].iter().find(|&&(b, _)| b == a).map(|&(_, t)| t)
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

/// Projects a play of the Checker–Prover game to the play of the base game
/// it simulates: Prover moves contribute steps, Checker moves do not.
///
/// Every cycle of the Checker–Prover game contains at least one Prover move,
/// so the projection of a lasso is a lasso.
pub fn simulate_lasso(pcp: &PcpGame, p: &PcpLasso) -> LassoPlay {
    debug_assert!(p.well_formed(pcp));
    let project = |steps: &[(usize, PcpAction)]| -> Vec<(StateId, ActionId)> {
        steps
            .iter()
            .filter_map(|&(s, a)| match a {
                PcpAction::P1(act) | PcpAction::P2(act) => {
                    let v = pcp.gcomp(s).expect("prover moves happen after the start");
                    Some((v, act))
                }
                _ => None,
            })
            .collect()
    };
    LassoPlay {
        prefix: project(&p.prefix),
        cycle: project(&p.cycle),
    }
}

/// The true gain vector of the simulated play, per the base game's
/// objectives.
pub fn simulated_gain(game: &Game, pcp: &PcpGame, p: &PcpLasso) -> Gain {
    let sim = simulate_lasso(pcp, p);
    debug_assert!(sim.well_formed(&game.structure));
    let bits: Vec<bool> = game
        .objectives
        .iter()
        .map(|o| evaluate_lasso(&sim, o))
        .collect();
    Gain::from_bools(&bits)
}

/// Winner of a play of the Checker–Prover game.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Winner {
    Checker,
    Provers,
}

/// Why a play was decided the way it was.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Classification {
    /// Annotations stabilize in accepted mode with the correct gain vector.
    TrueGain,
    /// One environment player deviates forever and the annotation never
    /// undersells that player.
    StableDeviation,
    /// The deviating player changes infinitely often.
    InfiniteDeviators,
    /// Annotations stabilize in accepted mode with a wrong gain vector.
    WrongGain,
    /// One environment player deviates forever and actually wins although
    /// the annotation claims otherwise.
    ProfitableDeviation,
    /// Deviation mode froze right after a change of deviating player, with
    /// no further bookkeeping states; counted for the Checker.
    FrozenSwitch,
}

impl Classification {
    pub fn winner(self) -> Winner {
        match self {
            Classification::TrueGain
            | Classification::StableDeviation
            | Classification::InfiniteDeviators
            | Classification::FrozenSwitch => Winner::Checker,
            Classification::WrongGain | Classification::ProfitableDeviation => Winner::Provers,
        }
    }
}

/// Decides the winner of an ultimately periodic play of the Checker–Prover
/// game directly from its definition.
///
/// The mode bookkeeping mirrors the observer automaton: the deviating player
/// and the change flag are `None`/0 until the first deviation, and a change
/// is flagged only when the deviating player differs from the previous one.
pub fn classify_play(game: &Game, pcp: &PcpGame, p: &PcpLasso) -> Classification {
    debug_assert!(p.well_formed(pcp));
    let simgain = simulated_gain(game, pcp, p);

    // Walk the whole lasso once, tracking (mode, last deviator, change flag)
    // exactly as the observers do.
    #[derive(Clone, Copy)]
    struct Book {
        mode: Option<PlayerId>,   // None = accepted, Some(i) = deviation by i
        last_dev: Option<PlayerId>,
        fresh_switch: bool,
    }
    let mut book = Book {
        mode: None,
        last_dev: None,
        fresh_switch: false,
    };
    let update = |book: &mut Book, s: usize| {
        if let Some(dev) = pcp.deviation_of(s) {
            match dev {
                None => book.mode = None,
                Some(i) => {
                    book.mode = Some(i);
                    book.fresh_switch = matches!(book.last_dev, Some(j) if j != i);
                    book.last_dev = Some(i);
                }
            }
        }
    };
    for &(s, _) in &p.prefix {
        update(&mut book, s);
    }
    let frozen = book;

    // Cycle analysis.
    let mut deviators: Vec<PlayerId> = Vec::new();
    let mut cycle_has_bookkeeping = false;
    let mut accepted_gains: Vec<Gain> = Vec::new();
    let mut deviation_undersold = false;
    for &(s, _) in &p.cycle {
        if let Some(dev) = pcp.deviation_of(s) {
            cycle_has_bookkeeping = true;
            match dev {
                None => accepted_gains.push(pcp.gain_of(s).unwrap()),
                Some(i) => {
                    if !deviators.contains(&i) {
                        deviators.push(i);
                    }
                    let g = pcp.gain_of(s).unwrap();
                    if !g.bit(i) && simgain.bit(i) {
                        deviation_undersold = true;
                    }
                }
            }
        }
    }

    match deviators.len() {
        0 if cycle_has_bookkeeping => {
            // All bookkeeping states in the cycle are accepted ones; the
            // annotation is constant around the cycle.
            debug_assert!(accepted_gains.windows(2).all(|w| w[0] == w[1]));
            if accepted_gains[0] == simgain {
                Classification::TrueGain
            } else {
                Classification::WrongGain
            }
        }
        0 => {
            // No bookkeeping states at all in the cycle: the mode is frozen
            // at its last prefix value, and so is the annotation.
            let g = pcp
                .gain_of(p.cycle[0].0)
                .expect("cycles never pass the initial state");
            match frozen.mode {
                None => {
                    if g == simgain {
                        Classification::TrueGain
                    } else {
                        Classification::WrongGain
                    }
                }
                Some(_) if frozen.fresh_switch => Classification::FrozenSwitch,
                Some(i) => {
                    if !g.bit(i) && simgain.bit(i) {
                        Classification::ProfitableDeviation
                    } else {
                        Classification::StableDeviation
                    }
                }
            }
        }
        1 => {
            if deviation_undersold {
                Classification::ProfitableDeviation
            } else {
                Classification::StableDeviation
            }
        }
        _ => Classification::InfiniteDeviators,
    }
}

/// Uniform random lasso of the Checker–Prover game: a random walk from the
/// initial state until a state repeats.
pub fn random_pcp_lasso<R: Rng>(pcp: &PcpGame, rng: &mut R) -> PcpLasso {
    let mut pos: HashMap<usize, usize> = HashMap::new();
    let mut seq: Vec<(usize, PcpAction)> = Vec::new();
    let mut cur = pcp.initial();
    loop {
        if let Some(&k) = pos.get(&cur) {
            return PcpLasso {
                prefix: seq[..k].to_vec(),
                cycle: seq[k..].to_vec(),
            };
        }
        pos.insert(cur, seq.len());
        let &(a, t) = &pcp.succ[cur][rng.gen_range(0..pcp.succ[cur].len())];
        seq.push((cur, a));
        cur = t;
    }
}
