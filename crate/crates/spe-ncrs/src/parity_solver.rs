//! Two-player zero-sum parity games: the arena representation shared by the
//! recursive solver and the brute-force oracle, the solver itself, and
//! strategy verification.
//!
//! The protagonist is called Even (wins a play iff the minimum priority seen
//! infinitely often is even), the antagonist Odd.  [`solve`] runs Zielonka's
//! recursive algorithm and extracts positional strategies as a by-product of
//! its attractor computations; [`verify_strategy`] checks a claimed solution
//! with an independent cycle analysis so the two can validate each other.

/// The two sides of a zero-sum parity game.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    Even,
    Odd,
}

impl Side {
    pub fn opponent(self) -> Side {
        match self {
            Side::Even => Side::Odd,
            Side::Odd => Side::Even,
        }
    }

    /// The side that wins when priority `p` dominates a cycle.
    pub fn of_priority(p: u32) -> Side {
        if p % 2 == 0 {
            Side::Even
        } else {
            Side::Odd
        }
    }
}

/// A two-player zero-sum parity game: every state has an owner, a priority,
/// and a nonempty list of successor states.
///
/// # Invariants
///
/// - `owner`, `succ` and `priority` all have the same length;
/// - every `succ[v]` is nonempty (checked by [`ParityArena::check`]).
#[derive(Debug, Clone)]
pub struct ParityArena {
    pub owner: Vec<Side>,
    pub succ: Vec<Vec<usize>>,
    pub priority: Vec<u32>,
}

impl ParityArena {
    pub fn n(&self) -> usize {
        self.owner.len()
    }

    /// Panics if the arena is malformed; used by entry points in debug
    /// builds.
    pub fn check(&self) {
        assert_eq!(self.owner.len(), self.succ.len());
        assert_eq!(self.owner.len(), self.priority.len());
        for (v, list) in self.succ.iter().enumerate() {
            assert!(!list.is_empty(), "state {v} has no successor");
            for &t in list {
                assert!(t < self.n(), "state {v} has dangling successor {t}");
            }
        }
    }
}

/// Winning regions and positional strategies for both sides of a parity
/// game.
///
/// # Invariants
///
/// - `region` and `strategy` have the arena's length; the two regions
///   partition the state set by construction.
/// - `strategy[v]` is `Some(k)` exactly when `owner[v] == region[v]`; `k`
///   then indexes `succ[v]` and the chosen edge stays inside the winner's
///   region.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SolveResult {
    pub region: Vec<Side>,
    pub strategy: Vec<Option<usize>>,
}

/// Solves a parity game with Zielonka's recursive algorithm, returning
/// winning regions and positional strategies for both sides.
///
/// Priorities need not be dense; only their order and parity matter.  In
/// debug builds the result is checked with [`verify_strategy`] before it is
/// returned.
pub fn solve(arena: &ParityArena) -> SolveResult {
    arena.check();
    let n = arena.n();
    let mut region = vec![Side::Even; n];
    let mut strategy = vec![None; n];
    zielonka(arena, vec![true; n], &mut region, &mut strategy);
    let result = SolveResult { region, strategy };
    debug_assert!(
        verify_strategy(arena, &result),
        "solver produced an unverifiable solution"
    );
    result
}

/// One level of the recursion: solves the sub-arena given by `alive` and
/// writes winners and strategy edges for exactly the alive states.
fn zielonka(
    arena: &ParityArena,
    alive: Vec<bool>,
    region: &mut [Side],
    strategy: &mut [Option<usize>],
) {
    let n = arena.n();
    if !alive.iter().any(|&a| a) {
        return;
    }
    debug_assert!(
        (0..n).all(|v| !alive[v] || arena.succ[v].iter().any(|&t| alive[t])),
        "sub-arena has a deadlocked state"
    );

    let d = (0..n)
        .filter(|&v| alive[v])
        .map(|v| arena.priority[v])
        .min()
        .expect("nonempty sub-arena");
    let winner = Side::of_priority(d);
    let loser = winner.opponent();
    let mut targets = vec![false; n];
    for v in 0..n {
        targets[v] = alive[v] && arena.priority[v] == d;
    }

    let (attr, attr_strat) = attractor(arena, &alive, winner, &targets);
    let mut rest = alive.clone();
    for v in 0..n {
        if attr[v] {
            rest[v] = false;
        }
    }
    zielonka(arena, rest.clone(), region, strategy);

    let opposition: Vec<usize> = (0..n).filter(|&v| rest[v] && region[v] == loser).collect();
    if opposition.is_empty() {
        // The priority-d side wins the whole sub-arena: inside the attractor
        // it heads for the d-states (where any edge that stays alive will
        // do), and outside it follows the recursive solution.
        for v in 0..n {
            if !attr[v] {
                continue;
            }
            region[v] = winner;
            strategy[v] = if arena.owner[v] != winner {
                None
            } else if targets[v] {
                arena.succ[v].iter().position(|&t| alive[t])
            } else {
                attr_strat[v]
            };
        }
    } else {
        // The opponent's inner region extends to its attractor; the rest of
        // the sub-arena is settled by a second recursion.
        let mut opp_targets = vec![false; n];
        for &v in &opposition {
            opp_targets[v] = true;
        }
        let (battr, battr_strat) = attractor(arena, &alive, loser, &opp_targets);
        let mut rest2 = alive.clone();
        for v in 0..n {
            if battr[v] {
                rest2[v] = false;
            }
        }
        zielonka(arena, rest2, region, strategy);
        for v in 0..n {
            if !battr[v] {
                continue;
            }
            region[v] = loser;
            if !opp_targets[v] {
                // Inner-region states keep their recursive strategy; the
                // freshly attracted ones head for the inner region.
                strategy[v] = if arena.owner[v] == loser { battr_strat[v] } else { None };
            }
        }
    }
}

/// Computes the `side`-attractor of `targets` inside the sub-arena `alive`.
///
/// Returns the attractor as a mask together with, for every `side`-owned
/// non-target state that joined, the lowest-indexed edge through which it
/// entered (targets themselves get no edge here).  Dead states and edges
/// into dead states are ignored entirely.
pub fn attractor(
    arena: &ParityArena,
    alive: &[bool],
    side: Side,
    targets: &[bool],
) -> (Vec<bool>, Vec<Option<usize>>) {
    let n = arena.n();
    let mut in_attr = vec![false; n];
    for v in 0..n {
        in_attr[v] = alive[v] && targets[v];
    }
    let mut strat = vec![None; n];
    loop {
        let mut changed = false;
        for v in 0..n {
            if !alive[v] || in_attr[v] {
                continue;
            }
            if arena.owner[v] == side {
                if let Some(k) = arena.succ[v].iter().position(|&t| alive[t] && in_attr[t]) {
                    in_attr[v] = true;
                    strat[v] = Some(k);
                    changed = true;
                }
            } else {
                let mut all = true;
                let mut any = false;
                for &t in &arena.succ[v] {
                    if alive[t] {
                        any = true;
                        all &= in_attr[t];
                    }
                }
                if any && all {
                    in_attr[v] = true;
                    changed = true;
                }
            }
        }
        if !changed {
            return (in_attr, strat);
        }
    }
}

/// Checks a [`SolveResult`] against its arena without trusting the solver.
///
/// Fixing each winner's positional strategy inside their region yields a
/// one-player sub-arena for the opponent; the result is accepted iff both
/// regions are closed under the allowed moves and every cycle the opponent
/// can reach inside the committed sub-arena has a winner-favorable minimum
/// priority.  Shape violations (wrong lengths, missing or out-of-range
/// strategy edges, edges on loser-owned states) are rejected rather than
/// reported as panics.
pub fn verify_strategy(arena: &ParityArena, result: &SolveResult) -> bool {
    let n = arena.n();
    if result.region.len() != n || result.strategy.len() != n {
        return false;
    }
    for v in 0..n {
        let winner_owned = arena.owner[v] == result.region[v];
        match result.strategy[v] {
            Some(k) => {
                if !winner_owned || k >= arena.succ[v].len() {
                    return false;
                }
            }
            None => {
                if winner_owned {
                    return false;
                }
            }
        }
    }
    for side in [Side::Even, Side::Odd] {
        let in_region: Vec<bool> = result.region.iter().map(|&r| r == side).collect();
        // The committed sub-arena: the winner follows the strategy, the
        // opponent keeps all edges, and nothing may leave the region.
        let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
        for v in 0..n {
            if !in_region[v] {
                continue;
            }
            if arena.owner[v] == side {
                let t = arena.succ[v][result.strategy[v].expect("checked above")];
                if !in_region[t] {
                    return false;
                }
                adj[v].push(t);
            } else {
                for &t in &arena.succ[v] {
                    if !in_region[t] {
                        return false;
                    }
                    adj[v].push(t);
                }
            }
        }
        // An opponent-favorable cycle with minimum priority d is a cycle
        // through a d-state in the subgraph of priorities >= d.
        let mut bad_priorities: Vec<u32> = (0..n)
            .filter(|&v| in_region[v] && Side::of_priority(arena.priority[v]) != side)
            .map(|v| arena.priority[v])
            .collect();
        bad_priorities.sort_unstable();
        bad_priorities.dedup();
        for d in bad_priorities {
            let alive: Vec<bool> = (0..n)
                .map(|v| in_region[v] && arena.priority[v] >= d)
                .collect();
            for comp in sccs(&adj, &alive) {
                let cyclic = comp.len() > 1
                    || adj[comp[0]].iter().any(|&t| t == comp[0] && alive[comp[0]]);
                if cyclic && comp.iter().any(|&v| arena.priority[v] == d) {
                    return false;
                }
            }
        }
    }
    true
}

/// Strongly connected components of the subgraph induced by `alive`, via
/// Kosaraju's algorithm with explicit stacks.  Dead states and edges with a
/// dead endpoint are ignored; singleton components are returned whether or
/// not they carry a self-loop.
pub(crate) fn sccs(adj: &[Vec<usize>], alive: &[bool]) -> Vec<Vec<usize>> {
    let n = adj.len();
    let mut order = Vec::with_capacity(n);
    let mut seen = vec![false; n];
    for s in 0..n {
        if !alive[s] || seen[s] {
            continue;
        }
        seen[s] = true;
        let mut stack: Vec<(usize, usize)> = vec![(s, 0)];
        while let Some(&mut (v, ref mut i)) = stack.last_mut() {
            if *i < adj[v].len() {
                let t = adj[v][*i];
                *i += 1;
                if alive[t] && !seen[t] {
                    seen[t] = true;
                    stack.push((t, 0));
                }
            } else {
                order.push(v);
                stack.pop();
            }
        }
    }
    let mut radj: Vec<Vec<usize>> = vec![Vec::new(); n];
    for v in 0..n {
        if !alive[v] {
            continue;
        }
        for &t in &adj[v] {
            if alive[t] {
                radj[t].push(v);
            }
        }
    }
    let mut comp_of = vec![usize::MAX; n];
    let mut comps: Vec<Vec<usize>> = Vec::new();
    for &s in order.iter().rev() {
        if comp_of[s] != usize::MAX {
            continue;
        }
        let id = comps.len();
        comps.push(Vec::new());
        let mut stack = vec![s];
        comp_of[s] = id;
        while let Some(v) = stack.pop() {
            comps[id].push(v);
            for &t in &radj[v] {
                if comp_of[t] == usize::MAX {
                    comp_of[t] = id;
                    stack.push(t);
                }
            }
        }
    }
    comps
}
