//! The second reduction stage: a deterministic observer runs alongside the
//! Checker–Prover game and turns its winning condition into Rabin pairs
//! (from the Provers' point of view) over the synchronized product.
//!
//! The observer memory tracks the bookkeeping mode of the play: `j` is the
//! mode entered at the last bookkeeping state (`None` after an accepted
//! proposal, `Some(i)` after a deviation by player `i`), `d` is the last
//! deviating player ever, `f` flags whether the last two deviations were by
//! different players, and `t` accumulates which players' target sets the
//! play has visited (used only when the base objectives are reachability).
//!
//! The pair families over-approximate the Provers' objective on individual
//! plays: a deviator pair for player `k` can fire on a play that the
//! Checker wins through a stable deviation by some other player, when the
//! annotation undersells `k`. A Checker playing truthful annotations never
//! offers such plays, so the product game has the same value as the
//! Checker–Prover game; tests below check both the exact inclusion (every
//! Prover-won play fires a pair) and this characterization of false fires.

use std::collections::HashMap;

use crate::arena::{Game, Objective, PlayerId};
use crate::pcp::{Gain, PcpAction, PcpGame, PcpLasso, PcpObs, Who};

/// Observer memory synchronized with the product state.
///
/// # Invariants
///
/// - `d` is `None` only before the first deviation, and `f` implies the
///   play saw two consecutive deviations by different players;
/// - `t` only ever gains bits along a play.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Mem {
    pub j: Option<PlayerId>,
    pub d: Option<PlayerId>,
    pub f: bool,
    pub t: Gain,
}

impl Mem {
    pub fn initial() -> Mem {
        Mem {
            j: None,
            d: None,
            f: false,
            t: Gain(0),
        }
    }
}

/// Which condition a Rabin pair encodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairKind {
    /// No deviation in the limit, yet player `i`'s predicted bit is 0 while
    /// the least priority seen forever is the even `p`.
    AcceptedEven { player: PlayerId, p: u32 },
    /// Mirror case: predicted bit 1, least priority odd.
    AcceptedOdd { player: PlayerId, p: u32 },
    /// Stable deviation whose annotation undersells player `player` (even
    /// least priority `p`).
    DeviatorEven { player: PlayerId, p: u32 },
    /// Reachability form of the accepted-mode pair: the annotation differs
    /// from the visited-targets vector.
    AcceptedReach,
    /// Reachability form of the deviator pair for `player`.
    DeviatorReach { player: PlayerId },
}

/// One Rabin pair, materialized as membership vectors over product states.
/// The Provers win a play iff for some pair the set of states visited
/// infinitely often avoids `e` entirely and meets `f`.
#[derive(Debug, Clone)]
pub struct RabinPair {
    pub kind: PairKind,
    pub e: Vec<bool>,
    pub f: Vec<bool>,
}

/// The synchronized product of a Checker–Prover game with the observer.
///
/// # Invariants
///
/// - state 0 pairs the Checker–Prover initial state with [`Mem::initial`];
/// - the product projects onto the underlying game: a state's successor
///   list carries exactly the actions of its first component;
/// - all `pairs` vectors have length `states.len()`.
#[derive(Debug, Clone)]
pub struct ObserverProduct {
    pub pcp: PcpGame,
    pub states: Vec<(usize, Mem)>,
    pub index: HashMap<(usize, Mem), usize>,
    pub succ: Vec<Vec<(PcpAction, usize)>>,
    pub pairs: Vec<RabinPair>,
}

impl ObserverProduct {
    pub fn n(&self) -> usize {
        self.states.len()
    }

    pub fn initial(&self) -> usize {
        0
    }

    pub fn pcp_state(&self, s: usize) -> usize {
        self.states[s].0
    }

    pub fn mem(&self, s: usize) -> Mem {
        self.states[s].1
    }

    pub fn owner_of(&self, s: usize) -> Who {
        self.pcp.owner_of(self.pcp_state(s))
    }

    pub fn obs_state(&self, s: usize) -> PcpObs {
        self.pcp.obs_state(self.pcp_state(s))
    }

    pub fn gain_of(&self, s: usize) -> Option<Gain> {
        self.pcp.gain_of(self.pcp_state(s))
    }
}

/// Memory update on entering a Checker–Prover state.
fn mem_step(pcp: &PcpGame, target_mask: &[u16], mut m: Mem, entered: usize) -> Mem {
    if let Some(v) = pcp.gcomp(entered) {
        m.t = Gain(m.t.0 | target_mask[v.idx()]);
    }
    if let Some(dev) = pcp.deviation_of(entered) {
        match dev {
            None => m.j = None,
            Some(i) => {
                m.f = matches!(m.d, Some(x) if x != i);
                m.j = Some(i);
                m.d = Some(i);
            }
        }
    }
    m
}

/// Expands the reachable product of `pcp` with the observer memory.
/// `target_mask[v]` is the bitmask of players whose target set contains `v`
/// (all zeros when the base objectives are not reachability).
fn build_product(pcp: PcpGame, target_mask: &[u16]) -> ObserverProduct {
    let mut states: Vec<(usize, Mem)> = Vec::new();
    let mut index: HashMap<(usize, Mem), usize> = HashMap::new();
    let mut succ: Vec<Vec<(PcpAction, usize)>> = Vec::new();

    let intern = |key: (usize, Mem),
                      states: &mut Vec<(usize, Mem)>,
                      succ: &mut Vec<Vec<(PcpAction, usize)>>,
                      index: &mut HashMap<(usize, Mem), usize>|
     -> usize {
        *index.entry(key).or_insert_with(|| {
            states.push(key);
            succ.push(Vec::new());
            states.len() - 1
        })
    };

    intern(
        (pcp.initial(), Mem::initial()),
        &mut states,
        &mut succ,
        &mut index,
    );
    let mut done = 0;
    while done < states.len() {
        let s = done;
        done += 1;
        let (ps, m) = states[s];
        for k in 0..pcp.succ[ps].len() {
            let (a, pt) = pcp.succ[ps][k];
            let mt = mem_step(&pcp, target_mask, m, pt);
            let ti = intern((pt, mt), &mut states, &mut succ, &mut index);
            succ[s].push((a, ti));
        }
    }

    ObserverProduct {
        pcp,
        states,
        index,
        succ,
        pairs: Vec::new(),
    }
}

fn target_mask_of(game: &Game) -> Vec<u16> {
    let mut mask = vec![0u16; game.structure.n_states()];
    for (i, o) in game.objectives.iter().enumerate() {
        if let Objective::Reach(t) = o {
            for (v, &is_target) in t.iter().enumerate() {
                if is_target {
                    mask[v] |= 1 << i;
                }
            }
        }
    }
    mask
}

/// Builds the product for a game whose objectives are all reachability,
/// with the constant-size pair family: one accepted-mode pair plus one pair
/// per environment player.
pub fn build_reach_observer(game: &Game, pcp: PcpGame) -> ObserverProduct {
    assert!(
        game.objectives
            .iter()
            .all(|o| matches!(o, Objective::Reach(_))),
        "reach observer needs reachability objectives"
    );
    let mask = target_mask_of(game);
    let mut prod = build_product(pcp, &mask);

    let n = prod.n();
    let players = game.structure.players;
    let mut pairs = Vec::new();

    let mut e = vec![false; n];
    let mut f = vec![false; n];
    for s in 0..n {
        let m = prod.mem(s);
        e[s] = m.j.is_some();
        f[s] = prod.gain_of(s).is_some_and(|g| g != m.t);
    }
    pairs.push(RabinPair {
        kind: PairKind::AcceptedReach,
        e,
        f,
    });

    for player in 1..players {
        let mut e = vec![false; n];
        let mut f = vec![false; n];
        for s in 0..n {
            let m = prod.mem(s);
            e[s] = m.f;
            f[s] = prod
                .gain_of(s)
                .is_some_and(|g| !g.bit(player) && m.t.bit(player));
        }
        pairs.push(RabinPair {
            kind: PairKind::DeviatorReach { player },
            e,
            f,
        });
    }

    prod.pairs = pairs;
    prod
}

/// Builds the product for a game whose objectives are all parity, with the
/// three pair families: two accepted-mode families (one per parity of the
/// stabilized least priority) and the deviator family.
pub fn build_parity_observer(game: &Game, pcp: PcpGame) -> ObserverProduct {
    let priorities: Vec<&Vec<u32>> = game
        .objectives
        .iter()
        .map(|o| match o {
            Objective::Parity(p) => p,
            _ => panic!("parity observer needs parity objectives"),
        })
        .collect();

    let mask = vec![0u16; game.structure.n_states()];
    let mut prod = build_product(pcp, &mask);

    let n = prod.n();
    let mut pairs = Vec::new();

    // Membership helpers; states without a base-game component (only the
    // initial state) never lie on a cycle, so their membership is moot.
    let alpha = |prod: &ObserverProduct, s: usize, i: PlayerId| -> Option<u32> {
        prod.pcp
            .gcomp(prod.pcp_state(s))
            .map(|v| priorities[i][v.idx()])
    };

    for (i, alpha_i) in priorities.iter().enumerate() {
        let d_i = *alpha_i.iter().max().unwrap();
        for p in 0..=d_i {
            let mut e = vec![false; n];
            let mut f = vec![false; n];
            for s in 0..n {
                let m = prod.mem(s);
                let Some(pv) = alpha(&prod, s, i) else { continue };
                let g = prod.gain_of(s).unwrap();
                e[s] = m.j.is_some() || pv < p;
                f[s] = pv == p && g.bit(i) == (p % 2 == 1);
            }
            let kind = if p % 2 == 0 {
                PairKind::AcceptedEven { player: i, p }
            } else {
                PairKind::AcceptedOdd { player: i, p }
            };
            pairs.push(RabinPair { kind, e, f });
        }
    }

    for (j, alpha_j) in priorities.iter().enumerate().skip(1) {
        let d_j = *alpha_j.iter().max().unwrap();
        for p in (0..=d_j).filter(|p| p % 2 == 0) {
            let mut e = vec![false; n];
            let mut f = vec![false; n];
            for s in 0..n {
                let m = prod.mem(s);
                let Some(pv) = alpha(&prod, s, j) else { continue };
                let g = prod.gain_of(s).unwrap();
                e[s] = m.f || pv < p;
                f[s] = pv == p && !g.bit(j);
            }
            pairs.push(RabinPair {
                kind: PairKind::DeviatorEven { player: j, p },
                e,
                f,
            });
        }
    }

    prod.pairs = pairs;
    prod
}

/// An ultimately periodic play of the product.
#[derive(Debug, Clone)]
pub struct ProductLasso {
    pub prefix: Vec<(usize, PcpAction)>,
    pub cycle: Vec<(usize, PcpAction)>,
}

impl ProductLasso {
    pub fn well_formed(&self, prod: &ObserverProduct) -> bool {
        if self.cycle.is_empty() {
            return false;
        }
        let step = |s: usize, a: PcpAction| -> Option<usize> {
            prod.succ[s].iter().find(|&&(b, _)| b == a).map(|&(_, t)| t)
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

/// Lifts a play of the Checker–Prover game into the product. The memory is
/// a deterministic function of the history, but it may take several turns
/// of the underlying cycle to settle, so the product cycle is the
/// underlying one unrolled until the boundary state repeats.
pub fn lift_lasso(prod: &ObserverProduct, p: &PcpLasso) -> ProductLasso {
    debug_assert!(p.well_formed(&prod.pcp));
    let step = |s: usize, a: PcpAction| -> usize {
        prod.succ[s]
            .iter()
            .find(|&&(b, _)| b == a)
            .expect("product carries every underlying action")
            .1
    };
    let mut cur = prod.initial();
    debug_assert_eq!(prod.pcp_state(cur), p.prefix.first().unwrap_or(&p.cycle[0]).0);
    let mut out: Vec<(usize, PcpAction)> = Vec::new();
    for &(_, a) in &p.prefix {
        out.push((cur, a));
        cur = step(cur, a);
    }
    let mut seen: HashMap<usize, usize> = HashMap::new();
    loop {
        if let Some(&k) = seen.get(&cur) {
            let lifted = ProductLasso {
                prefix: out[..k].to_vec(),
                cycle: out[k..].to_vec(),
            };
            debug_assert!(lifted.well_formed(prod));
            return lifted;
        }
        seen.insert(cur, out.len());
        for &(_, a) in &p.cycle {
            out.push((cur, a));
            cur = step(cur, a);
        }
    }
}

/// Indices of the Rabin pairs that fire on the cycle of a product lasso.
pub fn firing_pairs(prod: &ObserverProduct, l: &ProductLasso) -> Vec<usize> {
    debug_assert!(l.well_formed(prod));
    prod.pairs
        .iter()
        .enumerate()
        .filter(|(_, pair)| {
            l.cycle.iter().all(|&(s, _)| !pair.e[s]) && l.cycle.iter().any(|&(s, _)| pair.f[s])
        })
        .map(|(k, _)| k)
        .collect()
}

/// Whether the Provers win a Checker–Prover play according to the product's
/// Rabin pairs.
pub fn provers_win(prod: &ObserverProduct, p: &PcpLasso) -> bool {
    !firing_pairs(prod, &lift_lasso(prod, p)).is_empty()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arena::parse_game;
    use crate::equilibria_oracle::{random_game, RandomGameParams};
    use crate::pcp::{build_pcp, classify_play, random_pcp_lasso, Classification, Winner};
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

    /// Same arena with the targets encoded as parity objectives: priority 0
    /// exactly on the target self-loop, 1 elsewhere.
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

    fn aid(game: &Game, name: &str) -> crate::arena::ActionId {
        crate::arena::ActionId(
            game.structure
                .action_names
                .iter()
                .position(|n| n == name)
                .unwrap() as u32,
        )
    }

    fn lasso_by_actions(pcp: &PcpGame, actions: &[PcpAction], cut: usize) -> PcpLasso {
        let mut seq = Vec::new();
        let mut cur = pcp.initial();
        for &a in actions {
            seq.push((cur, a));
            cur = pcp.succ[cur]
                .iter()
                .find(|&&(b, _)| b == a)
                .unwrap_or_else(|| panic!("action {a:?} undefined at {:?}", pcp.states[cur]))
                .1;
        }
        let p = PcpLasso {
            prefix: seq[..cut].to_vec(),
            cycle: seq[cut..].to_vec(),
        };
        assert!(p.well_formed(pcp));
        p
    }

    /// Reference lassos shared by the reach and parity observer tests:
    /// (actions, prefix length, expected classification).
    fn reference_plays(game: &Game) -> Vec<(Vec<PcpAction>, usize, Classification)> {
        let l = aid(game, "l");
        let r = aid(game, "r");
        let lp = aid(game, "lp");
        let rp = aid(game, "rp");
        let g00 = Gain(0b00);
        let g10 = Gain(0b10);
        vec![
            (
                vec![
                    PcpAction::Annotate(g00),
                    PcpAction::Propose(r, 1),
                    PcpAction::P2(r),
                    PcpAction::Annotate(g00),
                    PcpAction::P1(rp),
                    PcpAction::P1(lp),
                ],
                5,
                Classification::TrueGain,
            ),
            (
                vec![
                    PcpAction::Annotate(g10),
                    PcpAction::Propose(r, 1),
                    PcpAction::P2(r),
                    PcpAction::Annotate(g10),
                    PcpAction::P1(rp),
                    PcpAction::P1(lp),
                ],
                5,
                Classification::WrongGain,
            ),
            (
                vec![
                    PcpAction::Annotate(g00),
                    PcpAction::Propose(r, 1),
                    PcpAction::P2(l),
                    PcpAction::Annotate(g00),
                    PcpAction::P1(lp),
                    PcpAction::P1(lp),
                ],
                5,
                Classification::ProfitableDeviation,
            ),
            (
                vec![
                    PcpAction::Annotate(g10),
                    PcpAction::Propose(r, 1),
                    PcpAction::P2(l),
                    PcpAction::Annotate(g10),
                    PcpAction::P1(lp),
                    PcpAction::P1(lp),
                ],
                5,
                Classification::StableDeviation,
            ),
        ]
    }

    #[test]
    fn product_projects_onto_base_game() {
        for (text, parity) in [(FIG2, false), (FIG2_PARITY, true)] {
            let game = parse_game(text).unwrap();
            let pcp = build_pcp(&game);
            let prod = if parity {
                build_parity_observer(&game, pcp)
            } else {
                build_reach_observer(&game, pcp)
            };
            assert_eq!(prod.states[0], (prod.pcp.initial(), Mem::initial()));
            for s in 0..prod.n() {
                let ps = prod.pcp_state(s);
                let mine: Vec<PcpAction> = prod.succ[s].iter().map(|&(a, _)| a).collect();
                let theirs: Vec<PcpAction> = prod.pcp.succ[ps].iter().map(|&(a, _)| a).collect();
                assert_eq!(mine, theirs, "product must not gain or lose actions");
                for (k, &(_, t)) in prod.succ[s].iter().enumerate() {
                    assert_eq!(prod.pcp_state(t), prod.pcp.succ[ps][k].1);
                }
            }
            for pair in &prod.pairs {
                assert_eq!(pair.e.len(), prod.n());
                assert_eq!(pair.f.len(), prod.n());
            }
        }
    }

    #[test]
    fn memory_is_monotone_and_consistent() {
        let game = parse_game(FIG2).unwrap();
        let pcp = build_pcp(&game);
        let prod = build_reach_observer(&game, pcp);
        for s in 0..prod.n() {
            let m = prod.mem(s);
            for &(_, t) in &prod.succ[s] {
                let mt = prod.mem(t);
                assert_eq!(mt.t.0 & m.t.0, m.t.0, "visited targets only grow");
                // The deviation flag comes with a recorded deviator.
                assert!(!mt.f || mt.d.is_some());
                assert!(mt.j.is_none() || mt.d == mt.j);
            }
        }
    }

    #[test]
    fn reach_pair_count_is_constant() {
        let game = parse_game(FIG2).unwrap();
        let pcp = build_pcp(&game);
        let prod = build_reach_observer(&game, pcp);
        assert_eq!(prod.pairs.len(), 2); // accepted + one environment player
        assert_eq!(prod.pairs[0].kind, PairKind::AcceptedReach);
        assert_eq!(prod.pairs[1].kind, PairKind::DeviatorReach { player: 1 });
    }

    #[test]
    fn memory_count_does_not_grow_with_the_arena() {
        // Chains of increasing length with the same players and actions:
        // the number of distinct memories must stay below a constant.
        let mut counts = Vec::new();
        for len in [3usize, 6, 12, 24] {
            let mut text = String::from("players 2\n");
            for k in 0..len {
                let owner = k % 2;
                text.push_str(&format!("state s{k} owner {owner}\n"));
            }
            text.push_str("init s0\n");
            for k in 0..len {
                let owner = k % 2;
                text.push_str(&format!("edge s{k} step{owner} s{}\n", (k + 1) % len));
                text.push_str(&format!("edge s{k} jump{owner} s{}\n", (k + 2) % len));
            }
            text.push_str(&format!("objective 0 reach s{}\n", len - 1));
            text.push_str(&format!("objective 1 reach s{}\n", len - 2));
            let game = parse_game(&text).unwrap();
            let pcp = build_pcp(&game);
            let prod = build_reach_observer(&game, pcp);
            let mut mems: Vec<Mem> = (0..prod.n()).map(|s| prod.mem(s)).collect();
            mems.sort_by_key(|m| (m.j, m.d, m.f, m.t));
            mems.dedup();
            counts.push(mems.len());
        }
        let bound = 4 * 3 * 3 * 2; // t choices * j choices * d choices * f
        for &c in &counts {
            assert!(c <= bound, "{c} > {bound}");
        }
        assert_eq!(counts[2], counts[3], "memory count saturates");
    }

    #[test]
    fn reference_plays_through_reach_pairs() {
        let game = parse_game(FIG2).unwrap();
        let pcp = build_pcp(&game);
        let prod = build_reach_observer(&game, pcp);
        for (actions, cut, expect) in reference_plays(&game) {
            let p = lasso_by_actions(&prod.pcp, &actions, cut);
            assert_eq!(classify_play(&game, &prod.pcp, &p), expect);
            let lifted = lift_lasso(&prod, &p);
            let fires = firing_pairs(&prod, &lifted);
            match expect.winner() {
                Winner::Provers => assert!(!fires.is_empty(), "{expect:?} must fire"),
                Winner::Checker => assert!(fires.is_empty(), "{expect:?} fired {fires:?}"),
            }
        }
    }

    #[test]
    fn reference_plays_through_parity_pairs() {
        let game = parse_game(FIG2_PARITY).unwrap();
        let pcp = build_pcp(&game);
        let prod = build_parity_observer(&game, pcp);
        for (actions, cut, expect) in reference_plays(&game) {
            let p = lasso_by_actions(&prod.pcp, &actions, cut);
            assert_eq!(classify_play(&game, &prod.pcp, &p), expect);
            let lifted = lift_lasso(&prod, &p);
            let fires = firing_pairs(&prod, &lifted);
            match expect.winner() {
                Winner::Provers => assert!(!fires.is_empty(), "{expect:?} must fire"),
                Winner::Checker => assert!(fires.is_empty(), "{expect:?} fired {fires:?}"),
            }
        }
    }

    #[test]
    fn fired_parity_pairs_identify_the_lie() {
        let game = parse_game(FIG2_PARITY).unwrap();
        let pcp = build_pcp(&game);
        let prod = build_parity_observer(&game, pcp);
        let plays = reference_plays(&game);

        // Wrong gain: predicted 1 for player 1 whose least priority is odd.
        let (actions, cut, _) = &plays[1];
        let p = lasso_by_actions(&prod.pcp, actions, *cut);
        let fires = firing_pairs(&prod, &lift_lasso(&prod, &p));
        let kinds: Vec<PairKind> = fires.iter().map(|&k| prod.pairs[k].kind).collect();
        assert_eq!(kinds, vec![PairKind::AcceptedOdd { player: 1, p: 1 }]);

        // Profitable deviation: deviator 1 reaches priority 0 with bit 0.
        let (actions, cut, _) = &plays[2];
        let p = lasso_by_actions(&prod.pcp, actions, *cut);
        let fires = firing_pairs(&prod, &lift_lasso(&prod, &p));
        let kinds: Vec<PairKind> = fires.iter().map(|&k| prod.pairs[k].kind).collect();
        assert!(kinds.contains(&PairKind::DeviatorEven { player: 1, p: 0 }));
        // The accepted families stay quiet: the mode never returns to
        // accepted, so their e-sets are hit.
        assert!(kinds
            .iter()
            .all(|k| matches!(k, PairKind::DeviatorEven { .. })));
    }

    #[test]
    fn smaller_priority_kills_a_pair() {
        // One player-0 chain alternating priorities 2 and 1 for player 1:
        // the least priority seen forever is 1 (odd), so predicting a win
        // for player 1 must fire the odd pair at 1, while the even pair at
        // 2 is disarmed by the smaller priority in its e-set.
        let text = "\
players 2
state x owner 0
state y owner 0
init x
edge x a y
edge y b x
objective 0 parity x:1 y:1
objective 1 parity x:2 y:1
";
        let game = parse_game(text).unwrap();
        let pcp = build_pcp(&game);
        let prod = build_parity_observer(&game, pcp);
        let a = aid(&game, "a");
        let b = aid(&game, "b");
        for (gain, expect_fire) in [(Gain(0b00), false), (Gain(0b10), true)] {
            let p = lasso_by_actions(
                &prod.pcp,
                &[PcpAction::Annotate(gain), PcpAction::P1(a), PcpAction::P1(b)],
                1,
            );
            let fires = firing_pairs(&prod, &lift_lasso(&prod, &p));
            let kinds: Vec<PairKind> = fires.iter().map(|&k| prod.pairs[k].kind).collect();
            if expect_fire {
                assert_eq!(kinds, vec![PairKind::AcceptedOdd { player: 1, p: 1 }]);
            } else {
                assert!(kinds.is_empty(), "honest prediction fired {kinds:?}");
            }
        }
    }

    /// The stable deviator of a lasso, when there is one: the unique player
    /// deviating in the cycle, or the frozen deviation mode when the cycle
    /// has no bookkeeping states.
    fn stable_deviator(prod: &ObserverProduct, l: &ProductLasso) -> Option<PlayerId> {
        let mut deviators: Vec<PlayerId> = Vec::new();
        let mut bookkeeping = false;
        for &(s, _) in &l.cycle {
            if let Some(dev) = prod.pcp.deviation_of(prod.pcp_state(s)) {
                bookkeeping = true;
                if let Some(i) = dev {
                    if !deviators.contains(&i) {
                        deviators.push(i);
                    }
                }
            }
        }
        match (bookkeeping, deviators.len()) {
            (true, 1) => Some(deviators[0]),
            (true, _) => None,
            (false, _) => prod.mem(l.cycle[0].0).j,
        }
    }

    fn agreement_on_random_lassos(parity: bool, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut fired_for_provers = 0usize;
        let mut quiet_for_checker = 0usize;
        for round in 0..30 {
            let params = RandomGameParams {
                players: 2 + (round % 2),
                states: 2 + (round % 3),
                max_actions: 2,
                target_density: 0.4,
            };
            let mut game = random_game(&mut rng, &params);
            if parity {
                // Replace the reach objectives by random priorities.
                let n = game.structure.n_states();
                game.objectives = (0..game.structure.players)
                    .map(|_| {
                        Objective::Parity((0..n).map(|_| rng.gen_range(0..=3u32)).collect())
                    })
                    .collect();
            }
            let pcp = build_pcp(&game);
            let prod = if parity {
                build_parity_observer(&game, pcp)
            } else {
                build_reach_observer(&game, pcp)
            };
            for _ in 0..80 {
                let p = random_pcp_lasso(&prod.pcp, &mut rng);
                let class = classify_play(&game, &prod.pcp, &p);
                let lifted = lift_lasso(&prod, &p);
                let fires = firing_pairs(&prod, &lifted);
                match class.winner() {
                    Winner::Provers => {
                        assert!(
                            !fires.is_empty(),
                            "{class:?} must fire a pair (game: {})",
                            crate::arena::print_game(&game)
                        );
                        fired_for_provers += 1;
                    }
                    Winner::Checker => {
                        if fires.is_empty() {
                            quiet_for_checker += 1;
                        } else {
                            // The only admissible false fires: deviator
                            // pairs for a player other than the stable
                            // deviator, on stably-deviating plays.
                            assert_eq!(class, Classification::StableDeviation);
                            let dev = stable_deviator(&prod, &lifted)
                                .expect("stable deviation has a deviator");
                            for &k in &fires {
                                match prod.pairs[k].kind {
                                    PairKind::DeviatorReach { player }
                                    | PairKind::DeviatorEven { player, .. } => {
                                        assert_ne!(
                                            player, dev,
                                            "a pair for the deviator itself must agree \
                                             with the classification"
                                        );
                                    }
                                    other => panic!("accepted-family false fire: {other:?}"),
                                }
                            }
                        }
                    }
                }
            }
        }
        assert!(fired_for_provers > 50, "{fired_for_provers}");
        assert!(quiet_for_checker > 50, "{quiet_for_checker}");
    }

    #[test]
    fn pairs_agree_with_classification_reach() {
        agreement_on_random_lassos(false, 101);
    }

    #[test]
    fn pairs_agree_with_classification_parity() {
        agreement_on_random_lassos(true, 103);
    }

    #[test]
    fn lifting_unrolls_until_memory_settles() {
        // A two-target chain where the first cycle traversal still flips
        // t-bits: the lifted cycle must start only once the memory repeats.
        let text = "\
players 2
state s0 owner 0
state s1 owner 0
state s2 owner 0
init s0
edge s0 go s1
edge s1 go s2
edge s2 go s0
objective 0 reach s1
objective 1 reach s2
";
        let game = parse_game(text).unwrap();
        let pcp = build_pcp(&game);
        let prod = build_reach_observer(&game, pcp);
        let go = aid(&game, "go");
        let p = lasso_by_actions(
            &prod.pcp,
            &[
                PcpAction::Annotate(Gain(0b00)),
                PcpAction::P1(go),
                PcpAction::P1(go),
                PcpAction::P1(go),
            ],
            1,
        );
        let lifted = lift_lasso(&prod, &p);
        assert!(lifted.well_formed(&prod));
        // All cycle states agree on the fully-saturated target vector.
        for &(s, _) in &lifted.cycle {
            assert_eq!(prod.mem(s).t, Gain(0b11));
        }
        // The prediction 00 disagrees with 110 forever: the accepted pair
        // fires even though no bookkeeping state is ever seen.
        let fires = firing_pairs(&prod, &lifted);
        let kinds: Vec<PairKind> = fires.iter().map(|&k| prod.pairs[k].kind).collect();
        assert!(kinds.contains(&PairKind::AcceptedReach));
    }
}
