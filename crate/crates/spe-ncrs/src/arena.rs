//! Core game model: multi-player game structures on graphs, the input file
//! format, objective specifications, and evaluation of objectives on
//! ultimately-periodic plays represented as lassos.
//!
//! A game structure is a finite directed arena `(V, A, Π, δ, v0)` where every
//! state is owned by exactly one player, every action by exactly one player,
//! and the transition function is deterministic and partial, defined only for
//! actions of the owning player. Structures are immutable after construction
//! and are indexed by dense integer ids for speed; the original names are kept
//! for parsing, printing and diagnostics.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;

use thiserror::Error;

/// Player index; player 0 is the protagonist of the synthesis problem.
pub type PlayerId = usize;

/// Dense state identifier, assigned in declaration order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct StateId(pub u32);

/// Dense action identifier, assigned in order of first appearance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ActionId(pub u32);

impl StateId {
    #[inline]
    pub fn idx(self) -> usize {
        self.0 as usize
    }
}

impl ActionId {
    #[inline]
    pub fn idx(self) -> usize {
        self.0 as usize
    }
}

/// A finite multi-player turn-based game structure.
///
/// # Invariants
///
/// Established by [`parse_game`] / checked by [`validate`]:
/// - deadlock-free: every state has at least one defined outgoing action;
/// - action-unique: at any state, distinct defined actions lead to distinct
///   successors;
/// - action ownership: an action is used only from states of a single owner,
///   and in particular no action is shared between player 0 and any other
///   player;
/// - state ownership is a total function (single `owner` field).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GameStructure {
    /// Number of players; ids are `0..players`.
    pub players: usize,
    /// State names, indexed by [`StateId`].
    pub state_names: Vec<String>,
    /// Action names, indexed by [`ActionId`].
    pub action_names: Vec<String>,
    /// Owner of each state.
    pub owner: Vec<PlayerId>,
    /// Owner of each action (derived from the owners of the states it is
    /// used from).
    pub action_owner: Vec<PlayerId>,
    /// Outgoing edges per state, sorted by action id. Deterministic: each
    /// action appears at most once per state.
    pub succ: Vec<Vec<(ActionId, StateId)>>,
    /// Initial state.
    pub initial: StateId,
}

impl GameStructure {
    pub fn n_states(&self) -> usize {
        self.state_names.len()
    }

    pub fn n_actions(&self) -> usize {
        self.action_names.len()
    }

    /// Successor under `a` from `v`, if defined.
    pub fn step(&self, v: StateId, a: ActionId) -> Option<StateId> {
        self.succ[v.idx()]
            .iter()
            .find(|&&(b, _)| b == a)
            .map(|&(_, t)| t)
    }

    pub fn state_name(&self, v: StateId) -> &str {
        &self.state_names[v.idx()]
    }

    pub fn action_name(&self, a: ActionId) -> &str {
        &self.action_names[a.idx()]
    }

    /// All states owned by `i`, in id order.
    pub fn states_of(&self, i: PlayerId) -> impl Iterator<Item = StateId> + '_ {
        (0..self.n_states() as u32)
            .map(StateId)
            .filter(move |v| self.owner[v.idx()] == i)
    }
}

/// Objective of a single player.
///
/// Reachability and parity are the input-level objectives; Rabin and Streett
/// appear on the intermediate products of the reduction. All variants
/// constrain states only, never actions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Objective {
    /// Visit some target state at least once. Mask indexed by state.
    Reach(Vec<bool>),
    /// Smallest priority seen infinitely often is even. Total map.
    Parity(Vec<u32>),
    /// Some pair `(E, F)` has `Inf ∩ E = ∅` and `Inf ∩ F ≠ ∅`.
    Rabin(Vec<(Vec<bool>, Vec<bool>)>),
    /// Every pair `(E, F)` has `Inf ∩ E ≠ ∅` or `Inf ∩ F = ∅`.
    Streett(Vec<(Vec<bool>, Vec<bool>)>),
}

impl Objective {
    pub fn is_reach(&self) -> bool {
        matches!(self, Objective::Reach(_))
    }

    pub fn is_parity(&self) -> bool {
        matches!(self, Objective::Parity(_))
    }
}

/// A finite representation `prefix · cycleʷ` of an ultimately periodic play.
///
/// Both components alternate states and the action taken *from* that state;
/// the action of the last cycle entry returns to the first cycle state.
///
/// # Invariants
///
/// - `cycle` is nonempty;
/// - consecutive steps follow the arena's transition function
///   (checked by [`LassoPlay::well_formed`]).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LassoPlay {
    pub prefix: Vec<(StateId, ActionId)>,
    pub cycle: Vec<(StateId, ActionId)>,
}

impl LassoPlay {
    /// First state of the play.
    pub fn start(&self) -> StateId {
        self.prefix.first().unwrap_or(&self.cycle[0]).0
    }

    /// All states of prefix and cycle, in order of first occurrence groups.
    pub fn states(&self) -> impl Iterator<Item = StateId> + '_ {
        self.prefix
            .iter()
            .chain(self.cycle.iter())
            .map(|&(v, _)| v)
    }

    pub fn cycle_states(&self) -> impl Iterator<Item = StateId> + '_ {
        self.cycle.iter().map(|&(v, _)| v)
    }

    /// Checks transition-consistency against `g` and the cycle's closing
    /// step.
    pub fn well_formed(&self, g: &GameStructure) -> bool {
        if self.cycle.is_empty() {
            return false;
        }
        let seq: Vec<_> = self.prefix.iter().chain(self.cycle.iter()).collect();
        for w in seq.windows(2) {
            let (v, a) = *w[0];
            if g.step(v, a) != Some(w[1].0) {
                return false;
            }
        }
        let (last, la) = *self.cycle.last().unwrap();
        g.step(last, la) == Some(self.cycle[0].0)
    }

    /// Canonical form: the cycle is reduced to its primitive period, then
    /// the prefix is shortened as long as its last step merely pre-plays the
    /// end of the cycle. The result is the unique representation with
    /// primitive period and shortest prefix, so two lassos denote the same
    /// play iff their canonical forms are equal.
    pub fn canonicalize(&self) -> LassoPlay {
        let mut cycle = primitive_period(&self.cycle);
        let mut prefix = self.prefix.clone();
        // Absorb: if the prefix ends with the cycle's last element, the play
        // is unchanged by starting the loop one step earlier.
        while prefix.last() == cycle.last() && !prefix.is_empty() {
            prefix.pop();
            cycle.rotate_right(1);
        }
        LassoPlay { prefix, cycle }
    }
}

fn primitive_period(cycle: &[(StateId, ActionId)]) -> Vec<(StateId, ActionId)> {
    let n = cycle.len();
    for p in 1..=n {
        if n % p == 0 && (p..n).all(|k| cycle[k] == cycle[k % p]) {
            return cycle[..p].to_vec();
        }
    }
    cycle.to_vec()
}

/// Evaluates one player's objective on a lasso.
///
/// - `Reach`: some prefix-or-cycle state is in the target set;
/// - `Parity`: the minimum priority among cycle states is even;
/// - `Rabin`: some pair has `cycle ∩ E = ∅` and `cycle ∩ F ≠ ∅`;
/// - `Streett`: the negation of `Rabin` on the same pairs.
pub fn evaluate_lasso(p: &LassoPlay, o: &Objective) -> bool {
    match o {
        Objective::Reach(target) => p.states().any(|v| target[v.idx()]),
        Objective::Parity(prio) => {
            let min = p.cycle_states().map(|v| prio[v.idx()]).min().unwrap();
            min % 2 == 0
        }
        Objective::Rabin(pairs) => pairs.iter().any(|(e, f)| {
            !p.cycle_states().any(|v| e[v.idx()]) && p.cycle_states().any(|v| f[v.idx()])
        }),
        Objective::Streett(pairs) => !evaluate_lasso(p, &Objective::Rabin(pairs.clone())),
    }
}

/// A violation of one of the [`GameStructure`] invariants, as data.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    /// State has no defined outgoing action.
    Deadlock { state: String },
    /// Two distinct actions at `state` lead to the same successor.
    ActionUnique {
        state: String,
        actions: (String, String),
        successor: String,
    },
    /// An action is used from states of two different owners.
    ActionShared {
        action: String,
        players: (PlayerId, PlayerId),
    },
    /// An owner id is outside `0..players`.
    OwnerRange { state: String, owner: PlayerId },
}

impl fmt::Display for Violation {
    fn fmt(&self, w: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Deadlock { state } => write!(w, "state {state} has no outgoing edge"),
            Violation::ActionUnique {
                state,
                actions,
                successor,
            } => write!(
                w,
                "state {state}: actions {} and {} both lead to {successor}",
                actions.0, actions.1
            ),
            Violation::ActionShared { action, players } => write!(
                w,
                "action {action} is used by players {} and {}",
                players.0, players.1
            ),
            Violation::OwnerRange { state, owner } => {
                write!(w, "state {state} has out-of-range owner {owner}")
            }
        }
    }
}

/// Checks the four structural invariants; an empty list means the structure
/// is valid. Violations are data, not failures, so callers can report all of
/// them at once.
pub fn validate(g: &GameStructure) -> Vec<Violation> {
    let mut out = Vec::new();
    for v in 0..g.n_states() {
        if g.owner[v] >= g.players {
            out.push(Violation::OwnerRange {
                state: g.state_names[v].clone(),
                owner: g.owner[v],
            });
        }
        if g.succ[v].is_empty() {
            out.push(Violation::Deadlock {
                state: g.state_names[v].clone(),
            });
        }
        for (k, &(a, t)) in g.succ[v].iter().enumerate() {
            for &(b, u) in &g.succ[v][k + 1..] {
                if t == u && a != b {
                    out.push(Violation::ActionUnique {
                        state: g.state_names[v].clone(),
                        actions: (g.action_name(a).to_owned(), g.action_name(b).to_owned()),
                        successor: g.state_name(t).to_owned(),
                    });
                }
            }
        }
    }
    // Action ownership: collect the owners of source states per action.
    let mut seen: Vec<Option<PlayerId>> = vec![None; g.n_actions()];
    for v in 0..g.n_states() {
        for &(a, _) in &g.succ[v] {
            match seen[a.idx()] {
                None => seen[a.idx()] = Some(g.owner[v]),
                Some(p) if p != g.owner[v] => {
                    let viol = Violation::ActionShared {
                        action: g.action_name(a).to_owned(),
                        players: (p, g.owner[v]),
                    };
                    if !out.contains(&viol) {
                        out.push(viol);
                    }
                }
                _ => {}
            }
        }
    }
    out
}

/// Parse or validation error for the game file format.
#[derive(Debug, Error)]
pub enum ParseError {
    #[error("line {line}: syntax error: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("line {line}: unknown directive `{directive}`")]
    UnknownDirective { line: usize, directive: String },
    #[error("line {line}: undeclared identifier `{name}`")]
    Undeclared { line: usize, name: String },
    #[error("line {line}: duplicate declaration of `{name}`")]
    Duplicate { line: usize, name: String },
    #[error("line {line}: objective for unknown player {player}")]
    UnknownPlayer { line: usize, player: usize },
    #[error("missing `players` directive")]
    MissingPlayers,
    #[error("missing `init` directive")]
    MissingInit,
    #[error("player {player} has {count} objective lines; exactly one is required")]
    ObjectiveCount { player: usize, count: usize },
    #[error("line {line}: parity map does not cover state `{state}`")]
    ParityNotTotal { line: usize, state: String },
    #[error("invalid game structure: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<Violation>),
}

/// A parsed and validated game: structure plus exactly one objective per
/// player.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Game {
    pub structure: GameStructure,
    pub objectives: Vec<Objective>,
}

impl Game {
    /// True iff every player's objective is reachability.
    pub fn all_reachability(&self) -> bool {
        self.objectives.iter().all(Objective::is_reach)
    }
}

/// Parses the line-oriented game file format.
///
/// Grammar (whitespace-separated tokens, `#` starts a comment):
///
/// ```text
/// players <n>
/// state <name> owner <i>
/// init <name>                     # exactly once
/// edge <state> <action> <state>
/// objective <i> reach <state>...
/// objective <i> parity <state>:<prio> ...
/// ```
///
/// Exactly one objective line per player; unknown directives are errors. The
/// returned model is validated: structural violations are reported via
/// [`ParseError::Invalid`].
pub fn parse_game(text: &str) -> Result<Game, ParseError> {
    struct RawEdge {
        line: usize,
        src: String,
        action: String,
        dst: String,
    }
    enum RawObjective {
        Reach(Vec<String>),
        Parity(Vec<(String, u32)>),
    }

    let mut players: Option<usize> = None;
    let mut state_order: Vec<(String, PlayerId)> = Vec::new();
    let mut state_lookup: HashMap<String, StateId> = HashMap::new();
    let mut init: Option<(usize, String)> = None;
    let mut edges: Vec<RawEdge> = Vec::new();
    let mut objectives: BTreeMap<usize, Vec<(usize, RawObjective)>> = BTreeMap::new();

    for (lineno, raw) in text.lines().enumerate() {
        let line = lineno + 1;
        let content = raw.split('#').next().unwrap_or("");
        let toks: Vec<&str> = content.split_whitespace().collect();
        if toks.is_empty() {
            continue;
        }
        let syntax = |msg: &str| ParseError::Syntax {
            line,
            msg: msg.to_owned(),
        };
        match toks[0] {
            "players" => {
                if players.is_some() {
                    return Err(ParseError::Duplicate {
                        line,
                        name: "players".to_owned(),
                    });
                }
                let n: usize = toks
                    .get(1)
                    .and_then(|t| t.parse().ok())
                    .ok_or_else(|| syntax("expected `players <count>`"))?;
                if toks.len() != 2 || n == 0 {
                    return Err(syntax("expected `players <count>` with count >= 1"));
                }
                players = Some(n);
            }
            "state" => {
                if toks.len() != 4 || toks[2] != "owner" {
                    return Err(syntax("expected `state <name> owner <player>`"));
                }
                let name = toks[1].to_owned();
                let owner: usize = toks[3]
                    .parse()
                    .map_err(|_| syntax("owner must be a player index"))?;
                if state_lookup.contains_key(&name) {
                    return Err(ParseError::Duplicate { line, name });
                }
                state_lookup.insert(name.clone(), StateId(state_order.len() as u32));
                state_order.push((name, owner));
            }
            "init" => {
                if toks.len() != 2 {
                    return Err(syntax("expected `init <state>`"));
                }
                if init.is_some() {
                    return Err(ParseError::Duplicate {
                        line,
                        name: "init".to_owned(),
                    });
                }
                init = Some((line, toks[1].to_owned()));
            }
            "edge" => {
                if toks.len() != 4 {
                    return Err(syntax("expected `edge <state> <action> <state>`"));
                }
                edges.push(RawEdge {
                    line,
                    src: toks[1].to_owned(),
                    action: toks[2].to_owned(),
                    dst: toks[3].to_owned(),
                });
            }
            "objective" => {
                if toks.len() < 3 {
                    return Err(syntax("expected `objective <player> <kind> ...`"));
                }
                let player: usize = toks[1]
                    .parse()
                    .map_err(|_| syntax("objective player must be an index"))?;
                let body = match toks[2] {
                    "reach" => {
                        RawObjective::Reach(toks[3..].iter().map(|s| (*s).to_owned()).collect())
                    }
                    "parity" => {
                        let mut entries = Vec::new();
                        for t in &toks[3..] {
                            let (name, prio) = t
                                .split_once(':')
                                .ok_or_else(|| syntax("parity entries are `<state>:<prio>`"))?;
                            let prio: u32 = prio
                                .parse()
                                .map_err(|_| syntax("priority must be a nonnegative integer"))?;
                            entries.push((name.to_owned(), prio));
                        }
                        RawObjective::Parity(entries)
                    }
                    other => {
                        return Err(syntax(&format!(
                            "unknown objective kind `{other}` (expected reach|parity)"
                        )))
                    }
                };
                objectives.entry(player).or_default().push((line, body));
            }
            other => {
                return Err(ParseError::UnknownDirective {
                    line,
                    directive: other.to_owned(),
                })
            }
        }
    }

    let players = players.ok_or(ParseError::MissingPlayers)?;
    let n_states = state_order.len();
    let (init_line, init_name) = init.ok_or(ParseError::MissingInit)?;
    let initial = *state_lookup
        .get(&init_name)
        .ok_or_else(|| ParseError::Undeclared {
            line: init_line,
            name: init_name.clone(),
        })?;

    // Intern actions in order of first appearance and build edge lists.
    let mut action_lookup: HashMap<String, ActionId> = HashMap::new();
    let mut action_names: Vec<String> = Vec::new();
    let mut succ: Vec<Vec<(ActionId, StateId)>> = vec![Vec::new(); n_states];
    let mut claimed: HashSet<(StateId, ActionId)> = HashSet::new();
    for e in &edges {
        let src = *state_lookup
            .get(&e.src)
            .ok_or_else(|| ParseError::Undeclared {
                line: e.line,
                name: e.src.clone(),
            })?;
        let dst = *state_lookup
            .get(&e.dst)
            .ok_or_else(|| ParseError::Undeclared {
                line: e.line,
                name: e.dst.clone(),
            })?;
        let a = *action_lookup.entry(e.action.clone()).or_insert_with(|| {
            action_names.push(e.action.clone());
            ActionId(action_names.len() as u32 - 1)
        });
        if !claimed.insert((src, a)) {
            return Err(ParseError::Duplicate {
                line: e.line,
                name: format!("edge {} {}", e.src, e.action),
            });
        }
        succ[src.idx()].push((a, dst));
    }
    for list in &mut succ {
        list.sort_unstable();
    }

    let owner: Vec<PlayerId> = state_order.iter().map(|&(_, o)| o).collect();
    // Action owners: owner of the (first) source state using the action.
    let mut action_owner = vec![0usize; action_names.len()];
    let mut seen = vec![false; action_names.len()];
    for (v, list) in succ.iter().enumerate() {
        for &(a, _) in list {
            if !seen[a.idx()] {
                seen[a.idx()] = true;
                action_owner[a.idx()] = owner[v];
            }
        }
    }

    let structure = GameStructure {
        players,
        state_names: state_order.into_iter().map(|(n, _)| n).collect(),
        action_names,
        owner,
        action_owner,
        succ,
        initial,
    };

    // Objectives: exactly one per player, all players covered.
    let mut per_player: Vec<Option<Objective>> = vec![None; players];
    for (&player, list) in &objectives {
        if player >= players {
            return Err(ParseError::UnknownPlayer {
                line: list[0].0,
                player,
            });
        }
        if list.len() != 1 {
            return Err(ParseError::ObjectiveCount {
                player,
                count: list.len(),
            });
        }
        let (line, raw) = &list[0];
        let obj = match raw {
            RawObjective::Reach(names) => {
                let mut mask = vec![false; n_states];
                for name in names {
                    let v = *state_lookup
                        .get(name)
                        .ok_or_else(|| ParseError::Undeclared {
                            line: *line,
                            name: name.clone(),
                        })?;
                    mask[v.idx()] = true;
                }
                Objective::Reach(mask)
            }
            RawObjective::Parity(entries) => {
                let mut prio: Vec<Option<u32>> = vec![None; n_states];
                for (name, p) in entries {
                    let v = *state_lookup
                        .get(name)
                        .ok_or_else(|| ParseError::Undeclared {
                            line: *line,
                            name: name.clone(),
                        })?;
                    prio[v.idx()] = Some(*p);
                }
                if let Some(missing) = prio.iter().position(Option::is_none) {
                    return Err(ParseError::ParityNotTotal {
                        line: *line,
                        state: structure.state_names[missing].clone(),
                    });
                }
                Objective::Parity(prio.into_iter().map(Option::unwrap).collect())
            }
        };
        per_player[player] = Some(obj);
    }
    if let Some(missing) = per_player.iter().position(Option::is_none) {
        return Err(ParseError::ObjectiveCount {
            player: missing,
            count: 0,
        });
    }

    let violations = validate(&structure);
    if !violations.is_empty() {
        return Err(ParseError::Invalid(violations));
    }

    Ok(Game {
        structure,
        objectives: per_player.into_iter().map(Option::unwrap).collect(),
    })
}

/// Prints a game in the canonical file format, the inverse of [`parse_game`]
/// on canonical models: states in id order, edges sorted, objectives by
/// player.
pub fn print_game(game: &Game) -> String {
    let g = &game.structure;
    let mut out = String::new();
    out.push_str(&format!("players {}\n", g.players));
    for v in 0..g.n_states() {
        out.push_str(&format!("state {} owner {}\n", g.state_names[v], g.owner[v]));
    }
    out.push_str(&format!("init {}\n", g.state_name(g.initial)));
    for v in 0..g.n_states() {
        for &(a, t) in &g.succ[v] {
            out.push_str(&format!(
                "edge {} {} {}\n",
                g.state_names[v],
                g.action_name(a),
                g.state_name(t)
            ));
        }
    }
    for (i, obj) in game.objectives.iter().enumerate() {
        match obj {
            Objective::Reach(mask) => {
                out.push_str(&format!("objective {i} reach"));
                for v in 0..g.n_states() {
                    if mask[v] {
                        out.push_str(&format!(" {}", g.state_names[v]));
                    }
                }
                out.push('\n');
            }
            Objective::Parity(prio) => {
                out.push_str(&format!("objective {i} parity"));
                for v in 0..g.n_states() {
                    out.push_str(&format!(" {}:{}", g.state_names[v], prio[v]));
                }
                out.push('\n');
            }
            Objective::Rabin(_) | Objective::Streett(_) => {
                unreachable!("Rabin/Streett objectives never appear in game files")
            }
        }
    }
    out
}

/// Result of [`binarize`]: the out-degree-≤2 structure together with the
/// data needed to transport plays and objectives.
///
/// Original states keep their ids; auxiliary tree-internal states are
/// appended, owned by their root's owner, and never belong to any target set.
#[derive(Debug, Clone)]
pub struct Binarized {
    pub game: GameStructure,
    /// For each new state: the original state it represents, or `None` for
    /// auxiliary tree-internal states.
    pub orig_of: Vec<Option<StateId>>,
    /// For each original edge `(v, a)`, the step sequence realizing it in the
    /// binarized structure (ending with action `a` into the original
    /// successor's image).
    pub edge_path: HashMap<(StateId, ActionId), Vec<(StateId, ActionId)>>,
}

/// Reduces out-degree to ≤ 2 by expanding each state's edge fan into a
/// balanced binary tree of auxiliary states.
///
/// The bijection between plays maps the original step `v --a--> u` to the
/// unique tree path from `v`'s image ending with the original action `a`.
/// Per-player visitation of original states is preserved because auxiliary
/// states represent no original state.
pub fn binarize(g: &GameStructure) -> Binarized {
    let state_names = g.state_names.clone();
    let owner = g.owner.clone();
    let orig_of: Vec<Option<StateId>> = (0..g.n_states() as u32)
        .map(|v| Some(StateId(v)))
        .collect();
    let action_names = g.action_names.clone();
    let action_owner = g.action_owner.clone();
    let succ: Vec<Vec<(ActionId, StateId)>> = vec![Vec::new(); g.n_states()];
    // Per-owner auxiliary branch actions, created on demand.
    let branch_actions: HashMap<(PlayerId, u8), ActionId> = HashMap::new();

    // Recursive splitting: a slice with one edge attaches directly with the
    // original action; a larger slice gets (up to) one auxiliary child per
    // half.
    struct Ctx {
        state_names: Vec<String>,
        owner: Vec<PlayerId>,
        orig_of: Vec<Option<StateId>>,
        succ: Vec<Vec<(ActionId, StateId)>>,
        action_names: Vec<String>,
        action_owner: Vec<PlayerId>,
        branch_actions: HashMap<(PlayerId, u8), ActionId>,
    }
    impl Ctx {
        fn branch_action(&mut self, who: PlayerId, side: u8) -> ActionId {
            if let Some(&a) = self.branch_actions.get(&(who, side)) {
                return a;
            }
            self.action_names.push(format!("@b{side}p{who}"));
            self.action_owner.push(who);
            let a = ActionId(self.action_names.len() as u32 - 1);
            self.branch_actions.insert((who, side), a);
            a
        }
        fn attach(
            &mut self,
            node: StateId,
            who: PlayerId,
            edges: &[(ActionId, StateId)],
            root_name: &str,
            counter: &mut usize,
        ) {
            debug_assert!(!edges.is_empty(), "empty edge slice");
            if let [(a, t)] = edges {
                self.succ[node.idx()].push((*a, *t));
                return;
            }
            let mid = edges.len().div_ceil(2);
            for (side, part) in [(0u8, &edges[..mid]), (1u8, &edges[mid..])] {
                if let [(a, t)] = part {
                    self.succ[node.idx()].push((*a, *t));
                } else {
                    let aux_name = format!("{root_name}@t{counter}");
                    *counter += 1;
                    self.state_names.push(aux_name);
                    self.owner.push(who);
                    self.orig_of.push(None);
                    self.succ.push(Vec::new());
                    let aux = StateId(self.state_names.len() as u32 - 1);
                    let ba = self.branch_action(who, side);
                    self.succ[node.idx()].push((ba, aux));
                    self.attach(aux, who, part, root_name, counter);
                }
            }
        }
    }
    let mut ctx = Ctx {
        state_names,
        owner,
        orig_of,
        succ,
        action_names,
        action_owner,
        branch_actions,
    };
    for v in 0..g.n_states() {
        let edges = g.succ[v].clone();
        let who = g.owner[v];
        let root_name = g.state_names[v].clone();
        let mut counter = 0usize;
        ctx.attach(StateId(v as u32), who, &edges, &root_name, &mut counter);
    }
    let Ctx {
        state_names,
        owner,
        orig_of,
        mut succ,
        action_names,
        action_owner,
        ..
    } = ctx;
    for list in &mut succ {
        list.sort_unstable();
    }

    let game = GameStructure {
        players: g.players,
        state_names,
        action_names,
        owner,
        action_owner,
        succ,
        initial: g.initial,
    };

    // Recover the realized path of each original edge by walking the tree:
    // from v, follow branch actions until the original action appears.
    let mut edge_path: HashMap<(StateId, ActionId), Vec<(StateId, ActionId)>> = HashMap::new();
    for v in 0..g.n_states() {
        for &(a, _) in &g.succ[v] {
            let mut path = Vec::new();
            let mut cur = StateId(v as u32);
            'walk: loop {
                // Exactly one outgoing edge of `cur` leads (eventually) to
                // the subtree containing action `a`; at desk scale a simple
                // DFS probe per step is fine.
                for &(b, t) in &game.succ[cur.idx()] {
                    if b == a {
                        path.push((cur, a));
                        break 'walk;
                    }
                    // Does the subtree rooted at t (aux states only) contain a?
                    if game.orig_of_contains(t, a, &orig_of) {
                        path.push((cur, b));
                        cur = t;
                        continue 'walk;
                    }
                }
                unreachable!("binarize lost edge ({v}, {})", a.0);
            }
            edge_path.insert((StateId(v as u32), a), path);
        }
    }

    Binarized {
        game,
        orig_of,
        edge_path,
    }
}

impl GameStructure {
    /// True iff the auxiliary subtree rooted at `t` offers original action
    /// `a` (used by [`binarize`] to reconstruct edge paths).
    fn orig_of_contains(&self, t: StateId, a: ActionId, orig_of: &[Option<StateId>]) -> bool {
        if orig_of[t.idx()].is_some() {
            return false; // left the auxiliary tree
        }
        self.succ[t.idx()]
            .iter()
            .any(|&(b, u)| b == a || self.orig_of_contains(u, a, orig_of))
    }
}

/// A game structure augmented with per-player target-visited bits, so that
/// reachability gains become a function of the current augmented state.
///
/// States are pairs `(original state, visited mask)` reachable from the
/// augmented initial state; the mask records, per player, whether that
/// player's target set has been visited (including by the current state).
#[derive(Debug, Clone)]
pub struct BitAugmented {
    pub game: GameStructure,
    /// Per augmented state: original state and visited mask.
    pub decode: Vec<(StateId, u32)>,
    /// Reverse lookup.
    pub encode: HashMap<(StateId, u32), StateId>,
    /// The target masks the augmentation was built from (per player, over
    /// original states).
    pub targets: Vec<Vec<bool>>,
}

impl BitAugmented {
    /// The augmented image of an original state under a given already-seen
    /// mask (the mask is completed with the state's own target memberships).
    pub fn image(&self, v: StateId, seen: u32) -> Option<StateId> {
        let mask = seen | self.hit_mask(v);
        self.encode.get(&(v, mask)).copied()
    }

    /// Bits of targets containing `v`.
    pub fn hit_mask(&self, v: StateId) -> u32 {
        let mut m = 0;
        for (i, t) in self.targets.iter().enumerate() {
            if t[v.idx()] {
                m |= 1 << i;
            }
        }
        m
    }
}

/// Augments `g` with per-player visited-bits for the given target sets.
///
/// Only the reachable part is materialized. Bits are monotone along plays:
/// once player `i`'s target has been visited, bit `i` stays set.
pub fn bit_augment(g: &GameStructure, targets: &[Vec<bool>]) -> BitAugmented {
    assert_eq!(targets.len(), g.players, "one target set per player");
    let hit = |v: StateId| -> u32 {
        let mut m = 0;
        for (i, t) in targets.iter().enumerate() {
            if t[v.idx()] {
                m |= 1 << i;
            }
        }
        m
    };

    let mut decode: Vec<(StateId, u32)> = Vec::new();
    let mut encode: HashMap<(StateId, u32), StateId> = HashMap::new();
    let mut state_names = Vec::new();
    let mut owner = Vec::new();
    let mut succ: Vec<Vec<(ActionId, StateId)>> = Vec::new();

    let intern = |v: StateId,
                      mask: u32,
                      decode: &mut Vec<(StateId, u32)>,
                      state_names: &mut Vec<String>,
                      owner: &mut Vec<PlayerId>,
                      succ: &mut Vec<Vec<(ActionId, StateId)>>,
                      encode: &mut HashMap<(StateId, u32), StateId>|
     -> StateId {
        if let Some(&id) = encode.get(&(v, mask)) {
            return id;
        }
        let id = StateId(decode.len() as u32);
        decode.push((v, mask));
        state_names.push(format!("{}&{:b}", g.state_name(v), mask));
        owner.push(g.owner[v.idx()]);
        succ.push(Vec::new());
        encode.insert((v, mask), id);
        id
    };

    let init_mask = hit(g.initial);
    let start = intern(
        g.initial,
        init_mask,
        &mut decode,
        &mut state_names,
        &mut owner,
        &mut succ,
        &mut encode,
    );
    let mut queue = vec![start];
    let mut qi = 0;
    while qi < queue.len() {
        let cur = queue[qi];
        qi += 1;
        let (v, mask) = decode[cur.idx()];
        for &(a, t) in &g.succ[v.idx()] {
            let tmask = mask | hit(t);
            let before = decode.len();
            let img = intern(
                t,
                tmask,
                &mut decode,
                &mut state_names,
                &mut owner,
                &mut succ,
                &mut encode,
            );
            if decode.len() > before {
                queue.push(img);
            }
            succ[cur.idx()].push((a, img));
        }
        succ[cur.idx()].sort_unstable();
    }

    let game = GameStructure {
        players: g.players,
        state_names,
        action_names: g.action_names.clone(),
        owner,
        action_owner: g.action_owner.clone(),
        succ,
        initial: start,
    };
    BitAugmented {
        game,
        decode,
        encode,
        targets: targets.to_vec(),
    }
}

/// Priority maps encoding reachability objectives on a bit-augmented arena:
/// priority 0 on augmented states whose player-`i` bit is set, 1 otherwise.
///
/// A play satisfies `Parity(map_i)` iff the projected original play satisfies
/// `Reach(T_i)`: the bit is monotone, so the minimum priority seen infinitely
/// often is 0 exactly when the target was ever visited.
pub fn reach_to_parity(aug: &BitAugmented) -> Vec<Vec<u32>> {
    (0..aug.game.players)
        .map(|i| {
            aug.decode
                .iter()
                .map(|&(_, mask)| if mask & (1 << i) != 0 { 0 } else { 1 })
                .collect()
        })
        .collect()
}
