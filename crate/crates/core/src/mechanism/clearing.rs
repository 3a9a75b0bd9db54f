use std::cmp::Reverse;
use std::collections::BinaryHeap;

use crate::error::Result;
use crate::seed;

use super::{MechanismConfig, Population};

/// Strict priority of an applicant at a program: merit bracket, then the
/// program's lottery draw, then applicant index (only matters on a 64-bit
/// draw collision).
type Key = (u32, u64, u32);

/// Lottery draw of applicant `i` at program `k`. Programs draw independently.
pub fn lottery_draw(seed: u64, k: usize, i: usize) -> u64 {
    seed::derive(seed::derive(seed, k as u64), i as u64)
}

struct Lottery {
    program_seeds: Vec<u64>,
}

impl Lottery {
    fn new(seed: u64, k: usize) -> Self {
        Lottery { program_seeds: (0..k).map(|p| seed::derive(seed, p as u64)).collect() }
    }

    fn key(&self, pop: &Population, k: usize, i: usize) -> Key {
        (pop.applicants[i].merit, seed::derive(self.program_seeds[k], i as u64), i as u32)
    }
}

/// Lowest-priority admit of a program.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub struct Cutoff {
    pub merit: u32,
    /// Lottery rank (1 = best draw) of the last admit among the program's
    /// applicants in the cutoff bracket.
    pub lottery_rank: usize,
    pub applicant: usize,
}

/// Applicants who ranked an oversubscribed program and sit in its cutoff
/// bracket; their admission there is decided by the lottery alone.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct PivotalGroup {
    pub program: usize,
    pub merit: u32,
    /// Best lottery draw first.
    pub members: Vec<usize>,
    /// `luck[r]` belongs to `members[r]`.
    pub luck: Vec<f64>,
}

impl PivotalGroup {
    pub fn size(&self) -> usize {
        self.members.len()
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct AllocationResult {
    /// Program each applicant enrolls in (`None` = outside option). Without
    /// mutual exclusivity this is the most preferred offer.
    pub assignment: Vec<Option<usize>>,
    /// Every offer held, only populated when offers are not exclusive.
    pub offers: Option<Vec<Vec<usize>>>,
    pub enrolled: Vec<usize>,
    /// Whether any applicant who ranked the program was turned away.
    pub oversubscribed: Vec<bool>,
    pub cutoffs: Vec<Option<Cutoff>>,
    pub pivotal_groups: Vec<PivotalGroup>,
    pub lottery_seed: u64,
}

impl AllocationResult {
    /// Whether applicant `i` holds a seat at program `k`.
    pub fn admitted(&self, i: usize, k: usize) -> bool {
        match &self.offers {
            Some(o) => o[i].contains(&k),
            None => self.assignment[i] == Some(k),
        }
    }
}

/// Assignment only, for counterfactual reruns.
pub(crate) struct Clearing {
    pub assignment: Vec<Option<usize>>,
    pub offers: Option<Vec<Vec<usize>>>,
    pub rejected: Vec<bool>,
}

pub(crate) fn clear(pop: &Population, capacities: &[usize], seed: u64, exclusive: bool) -> Clearing {
    let lottery = Lottery::new(seed, pop.k);
    if exclusive {
        deferred_acceptance(pop, capacities, &lottery)
    } else {
        independent_admission(pop, capacities, &lottery)
    }
}

/// Applicant-proposing deferred acceptance.
fn deferred_acceptance(pop: &Population, capacities: &[usize], lottery: &Lottery) -> Clearing {
    let n = pop.len();
    let mut held: Vec<BinaryHeap<Reverse<Key>>> =
        capacities.iter().map(|&c| BinaryHeap::with_capacity(c.min(n) + 1)).collect();
    let mut rejected = vec![false; pop.k];
    let mut next = vec![0usize; n];
    let mut free: Vec<usize> = (0..n).rev().collect();
    while let Some(i) = free.pop() {
        let prefs = &pop.applicants[i].prefs;
        let Some(&k) = prefs.get(next[i]) else { continue };
        next[i] += 1;
        let key = lottery.key(pop, k, i);
        let heap = &mut held[k];
        if heap.len() < capacities[k] {
            heap.push(Reverse(key));
            continue;
        }
        rejected[k] = true;
        let Reverse(worst) = *heap.peek().expect("capacity is positive");
        if key > worst {
            heap.pop();
            heap.push(Reverse(key));
            free.push(worst.2 as usize);
        } else {
            free.push(i);
        }
    }
    let mut assignment = vec![None; n];
    for (k, heap) in held.iter().enumerate() {
        for Reverse(key) in heap {
            assignment[key.2 as usize] = Some(k);
        }
    }
    Clearing { assignment, offers: None, rejected }
}

/// Every program admits its top applicants regardless of other offers.
fn independent_admission(pop: &Population, capacities: &[usize], lottery: &Lottery) -> Clearing {
    let n = pop.len();
    let mut offers = vec![Vec::new(); n];
    let mut rejected = vec![false; pop.k];
    for k in 0..pop.k {
        let mut keys: Vec<Key> = (0..n).filter(|&i| pop.applicants[i].prefs.contains(&k)).map(|i| lottery.key(pop, k, i)).collect();
        keys.sort_unstable_by(|a, b| b.cmp(a));
        rejected[k] = keys.len() > capacities[k];
        for key in keys.iter().take(capacities[k]) {
            offers[key.2 as usize].push(k);
        }
    }
    let assignment = pop
        .applicants
        .iter()
        .zip(&offers)
        .map(|(a, o)| a.prefs.iter().copied().find(|p| o.contains(p)))
        .collect();
    Clearing { assignment, offers: Some(offers), rejected }
}

/// Runs the admission round and derives cutoffs and pivotal groups.
pub fn run_clearing(pop: &Population, cfg: &MechanismConfig) -> Result<AllocationResult> {
    pop.validate()?;
    cfg.validate(pop)?;
    let c = clear(pop, &cfg.capacities, cfg.lottery_seed, cfg.mutually_exclusive);
    let mut enrolled = vec![0; pop.k];
    match &c.offers {
        Some(offers) => offers.iter().flatten().for_each(|&k| enrolled[k] += 1),
        None => c.assignment.iter().flatten().for_each(|&k| enrolled[k] += 1),
    }
    let mut result = AllocationResult {
        assignment: c.assignment,
        offers: c.offers,
        enrolled,
        oversubscribed: c.rejected,
        cutoffs: vec![None; pop.k],
        pivotal_groups: Vec::new(),
        lottery_seed: cfg.lottery_seed,
    };
    let lottery = Lottery::new(cfg.lottery_seed, pop.k);
    for k in 0..pop.k {
        let worst = (0..pop.len()).filter(|&i| result.admitted(i, k)).map(|i| lottery.key(pop, k, i)).min();
        if let Some(w) = worst {
            let bracket = ranked_bracket(pop, &lottery, k, w.0);
            let rank = bracket.iter().position(|&i| i == w.2 as usize).expect("last admit is in its own bracket") + 1;
            result.cutoffs[k] = Some(Cutoff { merit: w.0, lottery_rank: rank, applicant: w.2 as usize });
        }
    }
    result.pivotal_groups = identify_pivotal_groups(pop, &result);
    Ok(result)
}

/// Applicants ranking `k` with merit `merit`, best draw at `k` first.
fn ranked_bracket(pop: &Population, lottery: &Lottery, k: usize, merit: u32) -> Vec<usize> {
    let mut keys: Vec<Key> = pop
        .applicants
        .iter()
        .enumerate()
        .filter(|(_, a)| a.merit == merit && a.prefs.contains(&k))
        .map(|(i, _)| lottery.key(pop, k, i))
        .collect();
    keys.sort_unstable_by(|a, b| b.cmp(a));
    keys.into_iter().map(|key| key.2 as usize).collect()
}

/// One group per oversubscribed program: everyone who ranked it and whose
/// merit equals the cutoff bracket, ordered by lottery draw.
pub fn identify_pivotal_groups(pop: &Population, result: &AllocationResult) -> Vec<PivotalGroup> {
    let lottery = Lottery::new(result.lottery_seed, pop.k);
    (0..pop.k)
        .filter(|&k| result.oversubscribed[k])
        .filter_map(|k| {
            let cut = result.cutoffs[k]?;
            let members = ranked_bracket(pop, &lottery, k, cut.merit);
            let luck = luck_variable(members.len());
            Some(PivotalGroup { program: k, merit: cut.merit, members, luck })
        })
        .collect()
}

/// `L = 1 - rank/(n+1)` for ranks `1..=n`, computed as `(n+1-rank)/(n+1)`
/// so that the values are exactly `i/(n+1)`.
pub fn luck_variable(n: usize) -> Vec<f64> {
    let denom = (n + 1) as f64;
    (1..=n).map(|rank| (n + 1 - rank) as f64 / denom).collect()
}

/// Exhaustive search for pairs (applicant, program) where the applicant
/// prefers the program to their assignment and either the program has a free
/// seat or the applicant outranks one of its admits. Empty for a stable
/// outcome.
pub fn blocking_pairs(pop: &Population, cfg: &MechanismConfig, result: &AllocationResult) -> Vec<(usize, usize)> {
    let lottery = Lottery::new(result.lottery_seed, pop.k);
    let mut worst: Vec<Option<Key>> = vec![None; pop.k];
    let mut count = vec![0usize; pop.k];
    for (i, s) in result.assignment.iter().enumerate() {
        if let Some(k) = *s {
            count[k] += 1;
            let key = lottery.key(pop, k, i);
            worst[k] = Some(worst[k].map_or(key, |w| w.min(key)));
        }
    }
    let mut out = Vec::new();
    for (i, a) in pop.applicants.iter().enumerate() {
        for &k in &a.prefs {
            if result.assignment[i] == Some(k) {
                break;
            }
            let free_seat = count[k] < cfg.capacities[k];
            if free_seat || worst[k].is_some_and(|w| lottery.key(pop, k, i) > w) {
                out.push((i, k));
            }
        }
    }
    out
}
