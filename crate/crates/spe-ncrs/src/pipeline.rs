//! End-to-end decision pipeline: from a parsed game to a verdict and, on
//! positive instances, a finite-state strategy for player 0.
//!
//! The chain is fixed: build the Checker–Prover game, product it with the
//! observer, merge the Provers, read the result as a path automaton over
//! observation letters, determinize-complement it, build the knowledge
//! parity game, and solve that with the recursive parity solver.  The
//! verdict is positive exactly when the knowledge game's initial state is
//! won by the Prover, and the winning positional strategy then folds back
//! into a Mealy machine over player 0's observations of the original game.

use std::collections::HashMap;
use std::fmt;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::arena::{validate, ActionId, Game, GameStructure, Objective, StateId};
use crate::knowledge::{
    build_knowledge_game, build_streett_aut, build_streett_aut_reach, determinize_complement,
    DetParityAutomaton, KLetter, KnowledgeParityGame, NondetStreettAutomaton, SizeBlowup,
    DEFAULT_STATE_CAP,
};
use crate::observer::{build_parity_observer, build_reach_observer, Mem, RabinPair};
use crate::one_prover::{
    merge_provers, FunctionBlowup, FunctionMode, PcAction, PcGame, PcLetter, PcOwner,
    DEFAULT_FUNCTION_CAP,
};
use crate::parity_solver::{Side, SolveResult};
use crate::pcp::{build_pcp, Gain, PcpAction, PcpGame, PcpObs, PcpState, Who};

/// Route selection for the reduction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Mode {
    /// Reachability inputs take the collapsed route, parity inputs the full
    /// one.
    #[default]
    Auto,
    /// Track full merged-game states in the path automaton.  Valid for every
    /// supported input; the only route for parity objectives.
    Parity,
    /// Track only the observer component in the path automaton.  Valid for
    /// reachability objectives, where pair membership factors through it.
    ReachFast,
}

/// Tunable limits and the route for one [`run_pipeline`] call.
#[derive(Debug, Clone)]
pub struct SolveOptions {
    pub mode: Mode,
    /// Bound on the states of each constructed arena or automaton.
    pub state_cap: usize,
    /// Bound on the number of enumerated Prover-2 function actions.
    pub function_cap: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            mode: Mode::Auto,
            state_cap: DEFAULT_STATE_CAP,
            function_cap: DEFAULT_FUNCTION_CAP,
        }
    }
}

/// Why a solve attempt was abandoned.
#[derive(Debug, Error)]
pub enum SolveError {
    /// The input game fails structural validation.
    #[error("invalid game: {0}")]
    Invalid(String),
    /// The reach-fast route was requested for a non-reachability input.
    #[error("mode reach-fast requires every objective to be a reachability objective")]
    ModeMismatch,
    /// Objectives mix kinds; the pipeline handles all-reachability and
    /// all-parity inputs.
    #[error("unsupported objectives: every player must have a reachability objective, or every player a parity objective")]
    Unsupported,
    /// A constructed object outgrew [`SolveOptions::state_cap`].
    #[error(transparent)]
    Size(#[from] SizeBlowup),
    /// Prover-2 function enumeration outgrew [`SolveOptions::function_cap`].
    #[error(transparent)]
    Functions(#[from] FunctionBlowup),
}

/// Size and wall-clock record of one pipeline stage.
#[derive(Debug, Clone)]
pub struct StageStat {
    pub stage: &'static str,
    pub states: usize,
    pub edges: usize,
    /// Free-form extras (pair counts, letter counts, ...), possibly empty.
    pub note: String,
    pub millis: f64,
}

impl fmt::Display for StageStat {
    fn fmt(&self, w: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            w,
            "{:<22} {:>8} states {:>8} edges {:>9.2} ms",
            self.stage, self.states, self.edges, self.millis
        )?;
        if !self.note.is_empty() {
            write!(w, "  ({})", self.note)?;
        }
        Ok(())
    }
}

/// Outcome of a solve: the answer, the synthesized strategy on positive
/// instances, and per-stage statistics.
#[derive(Debug, Clone)]
pub struct Verdict {
    pub positive: bool,
    /// Present exactly on positive verdicts.
    pub strategy: Option<MealyStrategy>,
    pub stats: Vec<StageStat>,
}

impl Verdict {
    pub fn answer(&self) -> &'static str {
        if self.positive {
            "YES"
        } else {
            "NO"
        }
    }
}

/// A verdict together with every intermediate object, for inspection,
/// statistics, and Graphviz export.
pub struct Solved {
    pub verdict: Verdict,
    /// The merged one-Prover game; it owns the observer product, which owns
    /// the Checker–Prover game.
    pub pc: PcGame,
    pub nsa: NondetStreettAutomaton,
    pub dpa: DetParityAutomaton,
    pub kg: KnowledgeParityGame,
    pub result: SolveResult,
}

fn edge_count<T>(succ: &[Vec<T>]) -> usize {
    succ.iter().map(Vec::len).sum()
}

/// Runs the full reduction and solve, keeping all intermediate objects.
///
/// The verdict is positive iff the knowledge game's initial state lies in
/// the Prover's winning region; the strategy is extracted exactly then.
///
/// # Invariants
///
/// - every stage is guarded by [`SolveOptions::state_cap`] (function
///   enumeration by [`SolveOptions::function_cap`]) and aborts with the
///   offending stage's name;
/// - the Checker–Prover game obeys its published size bound
///   `5·|V|·|A|·2^players`;
/// - statistics cover every executed stage in construction order.
pub fn run_pipeline(game: &Game, opts: &SolveOptions) -> Result<Solved, SolveError> {
    let violations = validate(&game.structure);
    if !violations.is_empty() {
        let msgs: Vec<String> = violations.iter().map(|v| v.to_string()).collect();
        return Err(SolveError::Invalid(msgs.join("; ")));
    }
    if game.structure.players > 16 {
        return Err(SolveError::Invalid(
            "gain annotations support at most 16 players".to_owned(),
        ));
    }
    if game.objectives.len() != game.structure.players {
        return Err(SolveError::Invalid(format!(
            "{} objectives for {} players",
            game.objectives.len(),
            game.structure.players
        )));
    }

    let all_reach = game.all_reachability();
    let all_parity = game.objectives.iter().all(Objective::is_parity);
    if !all_reach && !all_parity {
        return Err(SolveError::Unsupported);
    }
    // The collapsed path automaton is sound only when pair membership
    // factors through the observer component, i.e. for reachability pairs.
    let collapsed = match (opts.mode, all_reach) {
        (Mode::ReachFast, false) => return Err(SolveError::ModeMismatch),
        (Mode::ReachFast, true) | (Mode::Auto, true) => true,
        (Mode::Parity, _) | (Mode::Auto, false) => false,
    };

    let mut stats: Vec<StageStat> = Vec::new();
    let guard = |stage: &'static str, n: usize| -> Result<(), SolveError> {
        if n > opts.state_cap {
            Err(SizeBlowup {
                stage,
                cap: opts.state_cap,
            }
            .into())
        } else {
            Ok(())
        }
    };

    let t = Instant::now();
    let pcp = build_pcp(game);
    let g = &game.structure;
    debug_assert!(
        pcp.n() as u64
            <= 5 * g.n_states() as u64 * g.n_actions() as u64 * (1u64 << g.players),
        "the Checker-Prover game exceeds its published size bound"
    );
    stats.push(StageStat {
        stage: "checker-prover game",
        states: pcp.n(),
        edges: edge_count(&pcp.succ),
        note: String::new(),
        millis: t.elapsed().as_secs_f64() * 1e3,
    });
    guard("the checker-prover game", pcp.n())?;

    let t = Instant::now();
    let prod = if all_reach {
        build_reach_observer(game, pcp)
    } else {
        build_parity_observer(game, pcp)
    };
    stats.push(StageStat {
        stage: "observer product",
        states: prod.n(),
        edges: edge_count(&prod.succ),
        note: format!("{} Rabin pairs", prod.pairs.len()),
        millis: t.elapsed().as_secs_f64() * 1e3,
    });
    guard("the observer product", prod.n())?;

    let t = Instant::now();
    let pc = merge_provers(prod, FunctionMode::Quotiented, opts.function_cap)?;
    stats.push(StageStat {
        stage: "one-prover merge",
        states: pc.n(),
        edges: edge_count(&pc.succ),
        note: format!("{} function actions", pc.fun_actions.len()),
        millis: t.elapsed().as_secs_f64() * 1e3,
    });
    guard("the one-prover merge", pc.n())?;

    let t = Instant::now();
    let nsa = if collapsed {
        build_streett_aut_reach(&pc)
    } else {
        build_streett_aut(&pc)
    };
    stats.push(StageStat {
        stage: "path automaton",
        states: nsa.n(),
        edges: edge_count(&nsa.succ),
        note: format!(
            "{} Streett pairs, {} letters",
            nsa.pairs.len(),
            nsa.letters.len()
        ),
        millis: t.elapsed().as_secs_f64() * 1e3,
    });
    guard("the path automaton", nsa.n())?;

    let t = Instant::now();
    let dpa = determinize_complement(&nsa, opts.state_cap)?;
    let det_row = stats.len();
    stats.push(StageStat {
        stage: "determinization",
        states: 0,
        edges: 0,
        note: String::new(),
        millis: t.elapsed().as_secs_f64() * 1e3,
    });

    let t = Instant::now();
    let kg = build_knowledge_game(&pc, &dpa, opts.state_cap)?;
    let distinct: std::collections::BTreeSet<u32> = kg.priority.iter().copied().collect();
    stats.push(StageStat {
        stage: "knowledge game",
        states: kg.n(),
        edges: edge_count(&kg.succ),
        note: format!("{} distinct priorities", distinct.len()),
        millis: t.elapsed().as_secs_f64() * 1e3,
    });
    stats[det_row].states = dpa.n_built();
    stats[det_row].note = format!(
        "{} letters, states built on demand during the knowledge stage",
        dpa.n_letters()
    );

    let t = Instant::now();
    let arena = kg.parity_arena();
    let result = crate::parity_solver::solve(&arena);
    let positive = result.region[kg.initial()] == Side::Even;
    let even = result.region.iter().filter(|&&r| r == Side::Even).count();
    stats.push(StageStat {
        stage: "parity solve",
        states: kg.n(),
        edges: edge_count(&kg.succ),
        note: format!(
            "Prover wins {} of {} states; initial is {}",
            even,
            kg.n(),
            if positive { "winning" } else { "losing" }
        ),
        millis: t.elapsed().as_secs_f64() * 1e3,
    });

    let strategy = if positive {
        let t = Instant::now();
        let strat = extract_strategy(&result, &kg, &pc, game);
        stats.push(StageStat {
            stage: "strategy extraction",
            states: strat.states.len(),
            edges: edge_count(&strat.update),
            note: String::new(),
            millis: t.elapsed().as_secs_f64() * 1e3,
        });
        Some(strat)
    } else {
        None
    };

    Ok(Solved {
        verdict: Verdict {
            positive,
            strategy,
            stats,
        },
        pc,
        nsa,
        dpa,
        kg,
        result,
    })
}

/// Decides the synthesis question: is there a strategy for player 0 such
/// that every subgame-perfect response of the other players yields a play
/// satisfying player 0's objective?
pub fn solve_spe_ncrs(game: &Game, opts: &SolveOptions) -> Result<Verdict, SolveError> {
    run_pipeline(game, opts).map(|s| s.verdict)
}

/// One memory state of a synthesized Mealy strategy.
///
/// # Invariants
///
/// - `output` is `Some` exactly at Prover-owned states whose knowledge set
///   consists of states where player 0 moves, and the action is then
///   defined at every base-game state under the set;
/// - `over` aligns with `u` and projects each knowledge-set member to its
///   base-game state (`None` for the pre-initial state).  Strategies
///   reloaded from JSON carry `u` verbatim but leave `over` empty.
#[derive(Debug, Clone)]
pub struct MemoryState {
    /// Index of the backing knowledge-game state (or a self-index on
    /// reloaded strategies).
    pub knowledge: usize,
    /// Rendered knowledge set: one description per merged-game state.
    pub u: Vec<String>,
    /// Base-game projection of each knowledge-set member.
    pub over: Vec<Option<StateId>>,
    /// Automaton component shared by the knowledge set.
    pub q: usize,
    pub owner: PcOwner,
    pub output: Option<ActionId>,
}

impl MemoryState {
    /// The unique base-game state under the knowledge set, if all members
    /// agree on one.
    pub fn projection(&self) -> Option<StateId> {
        let first = (*self.over.first()?)?;
        self.over
            .iter()
            .all(|&o| o == Some(first))
            .then_some(first)
    }
}

/// A finite-state strategy for player 0, read as a Mealy machine over the
/// observation letters of the merged game.
///
/// # Invariants
///
/// - `update` rows are sorted by letter id and total on the observations
///   reachable when player 0 follows the machine;
/// - Prover-owned states keep exactly one update edge (the machine's own
///   move); Checker-owned states keep one edge per feasible observation;
/// - `letter_index` inverts `letters`.
#[derive(Debug, Clone)]
pub struct MealyStrategy {
    pub states: Vec<MemoryState>,
    pub initial: usize,
    pub letters: Vec<KLetter>,
    pub letter_index: HashMap<KLetter, usize>,
    pub update: Vec<Vec<(usize, usize)>>,
}

impl MealyStrategy {
    pub fn n(&self) -> usize {
        self.states.len()
    }

    /// Memory successor on one observed letter.
    pub fn step(&self, m: usize, letter: KLetter) -> Option<usize> {
        let l = *self.letter_index.get(&letter)?;
        self.update[m]
            .binary_search_by_key(&l, |&(x, _)| x)
            .ok()
            .map(|i| self.update[m][i].1)
    }

    /// The memory in force when the play stands at the initial game state:
    /// the initial memory advanced over the hidden inaugural annotation.
    pub fn begin(&self) -> Option<usize> {
        self.step(self.initial, (PcpObs::Init, PcLetter::Sharp))
    }

    /// Player 0's move at `v`.  A live memory answers with its output; a
    /// dead or desynchronized one falls back to the first defined action,
    /// which is sound because plays that kill the memory are never part of
    /// a subgame-perfect response to this machine.
    pub fn decide(&self, game: &Game, mem: Option<usize>, v: StateId) -> ActionId {
        if let Some(a) = mem.and_then(|m| self.states[m].output) {
            if game.structure.step(v, a).is_some() {
                return a;
            }
        }
        game.structure.succ[v.idx()][0].0
    }

    /// Memory update across one base-game step `v --a--> v2`.
    ///
    /// A step of player 0 is one visible letter.  A step of any other
    /// player unfolds into the hidden proposal at `v`, the machine's own
    /// function move, and the hidden annotation at `v2`; the last lookup
    /// fails — killing the memory — when the machine's function deviates
    /// from the move that actually happened.
    pub fn advance(
        &self,
        game: &Game,
        mem: Option<usize>,
        v: StateId,
        a: ActionId,
        v2: StateId,
    ) -> Option<usize> {
        let m = mem?;
        if game.structure.owner[v.idx()] == 0 {
            debug_assert!(game.structure.step(v, a) == Some(v2));
            return self.step(m, (PcpObs::At(v), PcLetter::Visible(a)));
        }
        let m1 = self.step(m, (PcpObs::At(v), PcLetter::Sharp))?;
        let row = &self.update[m1];
        debug_assert!(
            self.states[m1].owner == PcOwner::Prover && row.len() == 1,
            "the interaction stage carries exactly the machine's own move"
        );
        let &(l, m2) = row.first()?;
        debug_assert!(
            matches!(self.letters[l].1, PcLetter::Fun(_)),
            "the machine's own move is a function letter"
        );
        self.step(m2, (PcpObs::At(v2), PcLetter::Sharp))
    }
}

/// Folds the Prover's positional winning strategy back into a Mealy machine
/// for player 0.
///
/// Memory states are the knowledge-game states reachable from the initial
/// one when Prover-owned states keep only their strategy edge and
/// Checker-owned states keep all edges.  Panics with an internal
/// consistency failure if a kept visible letter is not a defined player-0
/// action under its knowledge set, and asserts that the kept region stays
/// inside the Prover's winning region.
pub fn extract_strategy(
    result: &SolveResult,
    kg: &KnowledgeParityGame,
    pc: &PcGame,
    game: &Game,
) -> MealyStrategy {
    assert_eq!(
        result.region[kg.initial()],
        Side::Even,
        "extraction requires a winning initial knowledge state"
    );
    let mut mem_of: HashMap<usize, usize> = HashMap::new();
    let mut order: Vec<usize> = vec![kg.initial()];
    mem_of.insert(kg.initial(), 0);
    let mut kept: Vec<Vec<(usize, usize)>> = Vec::new();
    let mut done = 0;
    while done < order.len() {
        let s = order[done];
        done += 1;
        assert_eq!(
            result.region[s],
            Side::Even,
            "the kept region leaves the winning region"
        );
        let row: Vec<(usize, usize)> = match kg.owner[s] {
            PcOwner::Prover => {
                let k = result.strategy[s].expect("winner-owned states carry a strategy edge");
                vec![kg.succ[s][k]]
            }
            PcOwner::Checker => kg.succ[s].clone(),
        };
        for &(_, t) in &row {
            if !mem_of.contains_key(&t) {
                mem_of.insert(t, order.len());
                order.push(t);
            }
        }
        kept.push(row);
    }

    let update: Vec<Vec<(usize, usize)>> = kept
        .iter()
        .map(|row| row.iter().map(|&(l, t)| (l, mem_of[&t])).collect())
        .collect();
    let mut states = Vec::with_capacity(order.len());
    for (m, &s) in order.iter().enumerate() {
        let ks = &kg.states[s];
        let owner = kg.owner[s];
        let output = if owner == PcOwner::Prover {
            let &(l, _) = update[m]
                .first()
                .expect("Prover-owned memory keeps its strategy edge");
            match kg.letters[l] {
                (_, PcLetter::Visible(a)) => {
                    for &member in &ks.belief {
                        let v = pc
                            .prod
                            .pcp
                            .gcomp(pc.prod.pcp_state(member))
                            .expect("a moving Prover state lies over a base state");
                        assert!(
                            game.structure.owner[v.idx()] == 0
                                && game.structure.step(v, a).is_some(),
                            "internal consistency failure: the chosen letter {} is not a \
                             defined player-0 action at {}",
                            game.structure.action_name(a),
                            game.structure.state_name(v)
                        );
                    }
                    Some(a)
                }
                (_, PcLetter::Fun(_)) => None,
                (_, PcLetter::Sharp) => unreachable!("Prover moves are never hidden"),
            }
        } else {
            None
        };
        states.push(MemoryState {
            knowledge: s,
            u: ks
                .belief
                .iter()
                .map(|&member| pc_state_desc(game, pc, member))
                .collect(),
            over: ks
                .belief
                .iter()
                .map(|&member| pc.prod.pcp.gcomp(pc.prod.pcp_state(member)))
                .collect(),
            q: ks.q,
            owner,
            output,
        });
    }
    let letters = kg.letters.clone();
    let letter_index = letters.iter().enumerate().map(|(i, &l)| (l, i)).collect();
    MealyStrategy {
        states,
        initial: 0,
        letters,
        letter_index,
        update,
    }
}

/// Wraps a memoryless choice of player-0 actions (indexed by state, entries
/// at other players' states ignored) as a [`MealyStrategy`], so that
/// positional plans can be replayed and refuted through the same driver.
pub fn memoryless_strategy(game: &Game, choice: &[ActionId]) -> MealyStrategy {
    let g = &game.structure;
    let n = g.n_states();
    assert_eq!(choice.len(), n, "one choice entry per state");
    let mut letters: Vec<KLetter> = Vec::new();
    let mut letter_index: HashMap<KLetter, usize> = HashMap::new();
    let mut intern = |l: KLetter| -> usize {
        *letter_index.entry(l).or_insert_with(|| {
            letters.push(l);
            letters.len() - 1
        })
    };

    // Memory ids: 0 is the pre-initial state; 1 + v is the state tracking
    // `v`; interaction stages for environment states are appended after.
    let at = |v: usize| 1 + v;
    let mut states: Vec<MemoryState> = Vec::new();
    let mut update: Vec<Vec<(usize, usize)>> = Vec::new();
    let push = |states: &mut Vec<MemoryState>,
                update: &mut Vec<Vec<(usize, usize)>>,
                owner: PcOwner,
                output: Option<ActionId>,
                row: Vec<(usize, usize)>| {
        let id = states.len();
        states.push(MemoryState {
            knowledge: id,
            u: Vec::new(),
            over: Vec::new(),
            q: 0,
            owner,
            output,
        });
        update.push(row);
    };

    let init_row = vec![(intern((PcpObs::Init, PcLetter::Sharp)), at(g.initial.idx()))];
    push(&mut states, &mut update, PcOwner::Checker, None, init_row);
    for v in 0..n {
        let sid = StateId(v as u32);
        if g.owner[v] == 0 {
            let a = choice[v];
            let v2 = g
                .step(sid, a)
                .expect("the chosen action is defined at its state");
            let row = vec![(intern((PcpObs::At(sid), PcLetter::Visible(a))), at(v2.idx()))];
            push(&mut states, &mut update, PcOwner::Prover, Some(a), row);
        } else {
            // Filled below once the interaction stages have known ids.
            push(&mut states, &mut update, PcOwner::Checker, None, Vec::new());
        }
    }
    for v in 0..n {
        let sid = StateId(v as u32);
        if g.owner[v] == 0 {
            continue;
        }
        let accept = states.len();
        let land = states.len() + 1;
        update[at(v)] = vec![(intern((PcpObs::At(sid), PcLetter::Sharp)), accept)];
        let own_move = vec![(intern((PcpObs::At(sid), PcLetter::Fun(0))), land)];
        push(&mut states, &mut update, PcOwner::Prover, None, own_move);
        let mut row: Vec<(usize, usize)> = g.succ[v]
            .iter()
            .map(|&(_, v2)| (intern((PcpObs::At(v2), PcLetter::Sharp)), at(v2.idx())))
            .collect();
        row.sort_unstable();
        row.dedup();
        push(&mut states, &mut update, PcOwner::Checker, None, row);
    }
    for row in &mut update {
        row.sort_unstable_by_key(|&(l, _)| l);
    }
    MealyStrategy {
        states,
        initial: 0,
        letters,
        letter_index,
        update,
    }
}

/// The game induced by pinning player 0 to a Mealy strategy: states pair a
/// base state with the strategy's memory (`None` once dead), player-0
/// states keep exactly the machine's move, and objectives lift along the
/// projection.
///
/// # Invariants
///
/// - state 0 pairs the base initial state with the post-inaugural memory;
/// - the action table is shared with the base game, so validity of the
///   base game carries over to the product.
pub fn strategy_product(game: &Game, strat: &MealyStrategy) -> Game {
    let g = &game.structure;
    let mut index: HashMap<(StateId, Option<usize>), usize> = HashMap::new();
    let mut nodes: Vec<(StateId, Option<usize>)> = Vec::new();
    let mut succ: Vec<Vec<(ActionId, StateId)>> = Vec::new();
    let start = (g.initial, strat.begin());
    index.insert(start, 0);
    nodes.push(start);
    let mut done = 0;
    while done < nodes.len() {
        let (v, m) = nodes[done];
        done += 1;
        let moves: Vec<(ActionId, StateId)> = if g.owner[v.idx()] == 0 {
            let a = strat.decide(game, m, v);
            vec![(a, g.step(v, a).expect("the decided action is defined"))]
        } else {
            g.succ[v.idx()].clone()
        };
        let mut row = Vec::with_capacity(moves.len());
        for (a, v2) in moves {
            let m2 = strat.advance(game, m, v, a, v2);
            let key = (v2, m2);
            let id = *index.entry(key).or_insert_with(|| {
                nodes.push(key);
                nodes.len() - 1
            });
            row.push((a, StateId(id as u32)));
        }
        succ.push(row);
    }

    let state_names = nodes
        .iter()
        .map(|&(v, m)| match m {
            Some(m) => format!("{}@{}", g.state_name(v), m),
            None => format!("{}@dead", g.state_name(v)),
        })
        .collect();
    let structure = GameStructure {
        players: g.players,
        state_names,
        action_names: g.action_names.clone(),
        owner: nodes.iter().map(|&(v, _)| g.owner[v.idx()]).collect(),
        action_owner: g.action_owner.clone(),
        succ,
        initial: StateId(0),
    };
    let lift = |mask: &[bool]| -> Vec<bool> { nodes.iter().map(|&(v, _)| mask[v.idx()]).collect() };
    let objectives = game
        .objectives
        .iter()
        .map(|o| match o {
            Objective::Reach(mask) => Objective::Reach(lift(mask)),
            Objective::Parity(pr) => {
                Objective::Parity(nodes.iter().map(|&(v, _)| pr[v.idx()]).collect())
            }
            Objective::Rabin(pairs) => {
                Objective::Rabin(pairs.iter().map(|(e, f)| (lift(e), lift(f))).collect())
            }
            Objective::Streett(pairs) => {
                Objective::Streett(pairs.iter().map(|(e, f)| (lift(e), lift(f))).collect())
            }
        })
        .collect();
    Game {
        structure,
        objectives,
    }
}

// ---------------------------------------------------------------------------
// Strategy JSON
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct LetterDto {
    /// Observed state: a base-game state name, or `null` for the
    /// pre-initial observation.
    obs: Option<String>,
    /// `"sharp"`, `"visible"`, or `"fun"`.
    kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    action: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    fun: Option<usize>,
}

#[derive(Serialize, Deserialize)]
struct MemoryDto {
    id: usize,
    u: Vec<String>,
    q: usize,
    owner: String,
    output: Option<String>,
}

#[derive(Serialize, Deserialize)]
struct UpdateDto {
    from: usize,
    letter: usize,
    to: usize,
}

#[derive(Serialize, Deserialize)]
struct StrategyDto {
    format: String,
    initial: usize,
    letters: Vec<LetterDto>,
    memory: Vec<MemoryDto>,
    updates: Vec<UpdateDto>,
}

const STRATEGY_FORMAT: &str = "spe-ncrs-strategy";

/// Renders a strategy as self-describing JSON: the memory-state table and
/// the update edges, keyed by observation letters spelled with the game's
/// state and action names.
pub fn strategy_to_json(game: &Game, strat: &MealyStrategy) -> String {
    let g = &game.structure;
    let letters = strat
        .letters
        .iter()
        .map(|&(obs, act)| {
            let obs = match obs {
                PcpObs::Init => None,
                PcpObs::At(v) => Some(g.state_name(v).to_owned()),
            };
            match act {
                PcLetter::Sharp => LetterDto {
                    obs,
                    kind: "sharp".to_owned(),
                    action: None,
                    fun: None,
                },
                PcLetter::Visible(a) => LetterDto {
                    obs,
                    kind: "visible".to_owned(),
                    action: Some(g.action_name(a).to_owned()),
                    fun: None,
                },
                PcLetter::Fun(i) => LetterDto {
                    obs,
                    kind: "fun".to_owned(),
                    action: None,
                    fun: Some(i),
                },
            }
        })
        .collect();
    let memory = strat
        .states
        .iter()
        .enumerate()
        .map(|(id, m)| MemoryDto {
            id,
            u: m.u.clone(),
            q: m.q,
            owner: match m.owner {
                PcOwner::Prover => "prover".to_owned(),
                PcOwner::Checker => "checker".to_owned(),
            },
            output: m.output.map(|a| g.action_name(a).to_owned()),
        })
        .collect();
    let updates = strat
        .update
        .iter()
        .enumerate()
        .flat_map(|(from, row)| {
            row.iter().map(move |&(letter, to)| UpdateDto {
                from,
                letter,
                to,
            })
        })
        .collect();
    let dto = StrategyDto {
        format: STRATEGY_FORMAT.to_owned(),
        initial: strat.initial,
        letters,
        memory,
        updates,
    };
    serde_json::to_string_pretty(&dto).expect("strategy serialization cannot fail")
}

/// Parses a strategy back from its JSON form, resolving state and action
/// names against `game`.  The `u` lists are kept verbatim as labels; the
/// reloaded machine drives and refutes exactly like the original.
pub fn strategy_from_json(game: &Game, text: &str) -> Result<MealyStrategy, String> {
    let g = &game.structure;
    let dto: StrategyDto = serde_json::from_str(text).map_err(|e| e.to_string())?;
    if dto.format != STRATEGY_FORMAT {
        return Err(format!("not a strategy file (format `{}`)", dto.format));
    }
    let state_id = |name: &str| -> Result<StateId, String> {
        g.state_names
            .iter()
            .position(|n| n == name)
            .map(|i| StateId(i as u32))
            .ok_or_else(|| format!("unknown state `{name}`"))
    };
    let action_id = |name: &str| -> Result<ActionId, String> {
        g.action_names
            .iter()
            .position(|n| n == name)
            .map(|i| ActionId(i as u32))
            .ok_or_else(|| format!("unknown action `{name}`"))
    };

    let mut letters = Vec::with_capacity(dto.letters.len());
    for l in &dto.letters {
        let obs = match &l.obs {
            None => PcpObs::Init,
            Some(name) => PcpObs::At(state_id(name)?),
        };
        let act = match l.kind.as_str() {
            "sharp" => PcLetter::Sharp,
            "visible" => PcLetter::Visible(action_id(
                l.action.as_deref().ok_or("visible letter without action")?,
            )?),
            "fun" => PcLetter::Fun(l.fun.ok_or("fun letter without index")?),
            other => return Err(format!("unknown letter kind `{other}`")),
        };
        letters.push((obs, act));
    }
    let mut letter_index: HashMap<KLetter, usize> = HashMap::new();
    for (i, &l) in letters.iter().enumerate() {
        if letter_index.insert(l, i).is_some() {
            return Err("duplicate letter".to_owned());
        }
    }

    let n = dto.memory.len();
    if dto.initial >= n {
        return Err("initial memory out of range".to_owned());
    }
    let mut states = Vec::with_capacity(n);
    for (at, m) in dto.memory.iter().enumerate() {
        if m.id != at {
            return Err("memory table must be contiguous and in order".to_owned());
        }
        let owner = match m.owner.as_str() {
            "prover" => PcOwner::Prover,
            "checker" => PcOwner::Checker,
            other => return Err(format!("unknown owner `{other}`")),
        };
        let output = match &m.output {
            None => None,
            Some(name) => Some(action_id(name)?),
        };
        states.push(MemoryState {
            knowledge: at,
            u: m.u.clone(),
            over: Vec::new(),
            q: m.q,
            owner,
            output,
        });
    }

    let mut update: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
    for e in &dto.updates {
        if e.from >= n || e.to >= n || e.letter >= letters.len() {
            return Err("update edge out of range".to_owned());
        }
        update[e.from].push((e.letter, e.to));
    }
    for row in &mut update {
        row.sort_unstable_by_key(|&(l, _)| l);
        if row.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err("two update edges on one letter".to_owned());
        }
    }
    Ok(MealyStrategy {
        states,
        initial: dto.initial,
        letters,
        letter_index,
        update,
    })
}

// ---------------------------------------------------------------------------
// Graphviz export
// ---------------------------------------------------------------------------

fn gain_desc(g: Gain, players: usize) -> String {
    (0..players)
        .map(|i| if g.bit(i) { '1' } else { '0' })
        .collect()
}

fn pcp_state_desc(game: &Game, pcp: &PcpGame, s: usize) -> String {
    let g = &game.structure;
    let players = g.players;
    match pcp.states[s] {
        PcpState::Initial => "init".to_owned(),
        PcpState::G { v, g: gain } => {
            format!("{} g={}", g.state_name(v), gain_desc(gain, players))
        }
        PcpState::Action { v, a, g: gain } => format!(
            "{}?{} g={}",
            g.state_name(v),
            g.action_name(a),
            gain_desc(gain, players)
        ),
        PcpState::Player { v, dev, g: gain } => {
            let how = match dev {
                None => "acc".to_owned(),
                Some(i) => format!("dev{i}"),
            };
            format!("{} {} g={}", g.state_name(v), how, gain_desc(gain, players))
        }
    }
}

fn pcp_action_desc(game: &Game, a: PcpAction) -> String {
    let g = &game.structure;
    match a {
        PcpAction::P1(x) | PcpAction::P2(x) => g.action_name(x).to_owned(),
        PcpAction::Propose(x, i) => format!("{}?{}", g.action_name(x), i),
        PcpAction::Annotate(gain) => format!("g:={}", gain_desc(gain, g.players)),
    }
}

fn mem_desc(m: Mem, players: usize) -> String {
    let opt = |x: Option<usize>| x.map_or("-".to_owned(), |i| i.to_string());
    format!(
        "j{} d{} f{} t={}",
        opt(m.j),
        opt(m.d),
        u8::from(m.f),
        gain_desc(m.t, players)
    )
}

fn pc_state_desc(game: &Game, pc: &PcGame, s: usize) -> String {
    format!(
        "{} | {}",
        pcp_state_desc(game, &pc.prod.pcp, pc.prod.pcp_state(s)),
        mem_desc(pc.prod.mem(s), game.structure.players)
    )
}

fn pc_action_desc(game: &Game, a: PcAction) -> String {
    match a {
        PcAction::Base(x) => pcp_action_desc(game, x),
        PcAction::Fun(i) => format!("f{i}"),
    }
}

fn letter_desc(game: &Game, l: KLetter) -> String {
    let g = &game.structure;
    let obs = match l.0 {
        PcpObs::Init => "init".to_owned(),
        PcpObs::At(v) => g.state_name(v).to_owned(),
    };
    let act = match l.1 {
        PcLetter::Sharp => "#".to_owned(),
        PcLetter::Visible(a) => g.action_name(a).to_owned(),
        PcLetter::Fun(i) => format!("f{i}"),
    };
    format!("{obs}/{act}")
}

fn dot_escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

fn who_shape(w: Who) -> &'static str {
    match w {
        Who::Prover1 => "circle",
        Who::Prover2 => "diamond",
        Who::Checker => "box",
    }
}

fn pair_marks(pairs: &[RabinPair], s: usize) -> String {
    let mut out = String::new();
    for (i, p) in pairs.iter().enumerate() {
        if p.e[s] {
            let _ = write!(out, " -{i}");
        }
        if p.f[s] {
            let _ = write!(out, " +{i}");
        }
    }
    out
}

/// Writes Graphviz snapshots of every reduction stage into `dir`, in
/// pipeline order, returning the written paths.
pub fn export_dots(game: &Game, solved: &Solved, dir: &Path) -> std::io::Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let pc = &solved.pc;
    let pcp = &pc.prod.pcp;
    let mut written = Vec::new();
    let mut emit = |name: &str, body: String| -> std::io::Result<()> {
        let path = dir.join(name);
        std::fs::write(&path, body)?;
        written.push(path);
        Ok(())
    };

    let mut dot = String::from("digraph pcp {\n  rankdir=LR;\n");
    for s in 0..pcp.n() {
        let _ = writeln!(
            dot,
            "  n{s} [shape={} label=\"{}\"];",
            who_shape(pcp.owner_of(s)),
            dot_escape(&pcp_state_desc(game, pcp, s))
        );
    }
    for (s, row) in pcp.succ.iter().enumerate() {
        for &(a, t) in row {
            let _ = writeln!(
                dot,
                "  n{s} -> n{t} [label=\"{}\"];",
                dot_escape(&pcp_action_desc(game, a))
            );
        }
    }
    dot.push_str("}\n");
    emit("01-pcp.dot", dot)?;

    let prod = &pc.prod;
    let mut dot = String::from("digraph observer {\n  rankdir=LR;\n");
    for s in 0..prod.n() {
        let _ = writeln!(
            dot,
            "  n{s} [shape={} label=\"{}\\n{}{}\"];",
            who_shape(prod.owner_of(s)),
            dot_escape(&pcp_state_desc(game, pcp, prod.pcp_state(s))),
            dot_escape(&mem_desc(prod.mem(s), game.structure.players)),
            dot_escape(&pair_marks(&prod.pairs, s))
        );
    }
    for (s, row) in prod.succ.iter().enumerate() {
        for &(a, t) in row {
            let _ = writeln!(
                dot,
                "  n{s} -> n{t} [label=\"{}\"];",
                dot_escape(&pcp_action_desc(game, a))
            );
        }
    }
    dot.push_str("}\n");
    emit("02-observer.dot", dot)?;

    let mut dot = String::from("digraph one_prover {\n  rankdir=LR;\n");
    for s in 0..pc.n() {
        let shape = match pc.owner_of(s) {
            PcOwner::Prover => "ellipse",
            PcOwner::Checker => "box",
        };
        let _ = writeln!(
            dot,
            "  n{s} [shape={shape} label=\"{}\"];",
            dot_escape(&pc_state_desc(game, pc, s))
        );
    }
    for (s, row) in pc.succ.iter().enumerate() {
        for &(a, t) in row {
            let _ = writeln!(
                dot,
                "  n{s} -> n{t} [label=\"{}\"];",
                dot_escape(&pc_action_desc(game, a))
            );
        }
    }
    dot.push_str("}\n");
    emit("03-one-prover.dot", dot)?;

    let kg = &solved.kg;
    let belief_desc = |s: usize| -> String {
        let ks = &kg.states[s];
        let members: Vec<String> = ks.belief.iter().map(|m| m.to_string()).collect();
        format!("{{{}}} q{} p{}", members.join(","), ks.q, kg.priority[s])
    };
    let mut dot = String::from("digraph knowledge {\n  rankdir=LR;\n");
    for s in 0..kg.n() {
        let shape = match kg.owner[s] {
            PcOwner::Prover => "ellipse",
            PcOwner::Checker => "box",
        };
        let _ = writeln!(
            dot,
            "  n{s} [shape={shape} label=\"{}\"];",
            dot_escape(&belief_desc(s))
        );
    }
    for (s, row) in kg.succ.iter().enumerate() {
        for &(l, t) in row {
            let _ = writeln!(
                dot,
                "  n{s} -> n{t} [label=\"{}\"];",
                dot_escape(&letter_desc(game, kg.letters[l]))
            );
        }
    }
    dot.push_str("}\n");
    emit("04-knowledge.dot", dot)?;

    let result = &solved.result;
    let mut dot = String::from("digraph final {\n  rankdir=LR;\n");
    for s in 0..kg.n() {
        let shape = match kg.owner[s] {
            PcOwner::Prover => "ellipse",
            PcOwner::Checker => "box",
        };
        let fill = match result.region[s] {
            Side::Even => "palegreen",
            Side::Odd => "mistyrose",
        };
        let _ = writeln!(
            dot,
            "  n{s} [shape={shape} style=filled fillcolor={fill} label=\"{}\"];",
            dot_escape(&belief_desc(s))
        );
    }
    for (s, row) in kg.succ.iter().enumerate() {
        for (k, &(l, t)) in row.iter().enumerate() {
            let chosen = result.strategy[s] == Some(k);
            let style = if chosen { " penwidth=2.5 style=bold" } else { "" };
            let _ = writeln!(
                dot,
                "  n{s} -> n{t} [label=\"{}\"{style}];",
                dot_escape(&letter_desc(game, kg.letters[l]))
            );
        }
    }
    dot.push_str("}\n");
    emit("05-final.dot", dot)?;

    Ok(written)
}
