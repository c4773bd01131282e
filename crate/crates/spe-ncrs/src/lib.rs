//! Deciding non-cooperative rational synthesis under subgame-perfect
//! equilibria (SPE-NCRS) for multi-player reachability and parity games.
//!
//! The decision procedure reduces the input game through a chain of
//! constructions:
//!
//! 1. [`arena`] — the input game model, parsing, validation, objective
//!    evaluation on ultimately-periodic plays.
//! 2. [`pcp`] — a three-player Prover 1 / Challenger / Prover 2 game with
//!    imperfect information for Prover 1, whose plays simulate plays of the
//!    input game annotated with Challenger's gain predictions.
//! 3. [`observer`] — a deterministic observer automaton synchronized with the
//!    PCP arena, turning the play-classification objective into explicit
//!    Rabin pairs.
//! 4. [`one_prover`] — merging the two Provers into a single Prover via
//!    partial-function actions, yielding a two-player zero-sum Rabin game
//!    with imperfect information.
//! 5. [`knowledge`] — eliminating imperfect information: a nondeterministic
//!    Streett automaton over observations, its complementation into a
//!    deterministic parity automaton, and the knowledge subset-construction
//!    game.
//! 6. [`parity_solver`] — Zielonka's recursive algorithm with positional
//!    strategy extraction.
//! 7. [`pipeline`] — end-to-end orchestration, Mealy strategy extraction for
//!    player 0, and the command-line interface.
//!
//! [`equilibria_oracle`] provides brute-force desk-scale ground truth
//! (memoryless-profile enumeration, equilibrium checks, exhaustive parity
//! solving, refutation of extracted strategies) used by the test suites.

pub mod arena;
pub mod equilibria_oracle;
pub mod knowledge;
pub mod observer;
pub mod one_prover;
pub mod parity_solver;
pub mod pcp;
pub mod pipeline;
