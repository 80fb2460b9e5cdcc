//! Exact operating characteristics by full enumeration of the outcome space.
//!
//! Decisions are evaluated once per canonical (sorted) outcome vector when the
//! design is exchangeable. Probability weights are accumulated over every raw
//! vector, partitioned by the first stratum's count; partitions may run in
//! parallel and are merged in ascending order, so results do not depend on the
//! number of worker threads.

use std::sync::Arc;

use rayon::prelude::*;

use super::{BackendKind, OCResult, Scenario};
use crate::design::{BasketModel, Design, PhiWeights, TuningParams};
use crate::distributions::binom_pmf_table;
use crate::error::{Error, Result};

/// Largest outcome space enumerated before refusing.
pub const DEFAULT_OUTCOME_CEILING: u128 = 10_000_000;

/// Canonical representative of `r` and the permutation taking sorted
/// positions back to strata (`perm[p]` is the stratum at sorted position `p`).
/// Non-exchangeable designs use the identity.
pub fn representative_key(r: &[u32], design: &Design) -> (Vec<u32>, Vec<usize>) {
    let mut perm: Vec<usize> = (0..r.len()).collect();
    if design.is_exchangeable() {
        perm.sort_by_key(|&j| (r[j], j));
    }
    (perm.iter().map(|&j| r[j]).collect(), perm)
}

/// Ranks non-decreasing sequences over 0..=n of fixed length in the
/// combinatorial number system.
pub(crate) struct MultisetRanker {
    binom: Vec<Vec<u64>>,
    len: usize,
}

impl MultisetRanker {
    pub(crate) fn new(n: u32, len: usize) -> Self {
        let top = n as usize + len + 1;
        let mut binom = vec![vec![0u64; len + 2]; top];
        for m in 0..top {
            binom[m][0] = 1;
            for k in 1..(len + 2).min(m + 1) {
                binom[m][k] = binom[m - 1][k - 1] + if k < m { binom[m - 1][k] } else { 0 };
            }
        }
        MultisetRanker { binom, len }
    }

    /// Number of multisets, C(n + len, len).
    pub(crate) fn count(&self) -> usize {
        self.binom[self.binom.len() - 1][self.len] as usize
    }

    #[inline]
    pub(crate) fn rank(&self, sorted: &[u32]) -> usize {
        sorted
            .iter()
            .enumerate()
            .map(|(k, &s)| self.binom[s as usize + k][k + 1])
            .sum::<u64>() as usize
    }
}

fn for_each_multiset(n: u32, len: usize, f: &mut impl FnMut(&[u32])) {
    fn rec(n: u32, start: u32, buf: &mut Vec<u32>, len: usize, f: &mut impl FnMut(&[u32])) {
        if buf.len() == len {
            f(buf);
            return;
        }
        for v in start..=n {
            buf.push(v);
            rec(n, v, buf, len, f);
            buf.pop();
        }
    }
    rec(n, 0, &mut Vec::with_capacity(len), len, f);
}

#[derive(Clone)]
struct Accumulator {
    reject: Vec<f64>,
    fwer: f64,
    ewp: f64,
    mass: f64,
}

impl Accumulator {
    fn new(strata: usize) -> Self {
        Accumulator {
            reject: vec![0.0; strata],
            fwer: 0.0,
            ewp: 0.0,
            mass: 0.0,
        }
    }

    fn merge(&mut self, other: &Accumulator) {
        for (a, b) in self.reject.iter_mut().zip(&other.reject) {
            *a += b;
        }
        self.fwer += other.fwer;
        self.ewp += other.ewp;
        self.mass += other.mass;
    }
}

enum DecisionTable {
    Canonical { ranker: MultisetRanker, masks: Vec<u64> },
    Direct,
}

pub struct ExactEngine {
    model: Arc<BasketModel>,
    ceiling: u128,
}

impl ExactEngine {
    pub fn new(model: Arc<BasketModel>) -> Self {
        ExactEngine {
            model,
            ceiling: DEFAULT_OUTCOME_CEILING,
        }
    }

    pub fn with_ceiling(mut self, ceiling: u128) -> Self {
        self.ceiling = ceiling;
        self
    }

    pub fn model(&self) -> &Arc<BasketModel> {
        &self.model
    }

    pub fn check_ceiling(&self) -> Result<()> {
        let outcomes = self.model.design().outcome_count();
        if outcomes > self.ceiling {
            return Err(Error::OutcomeSpaceTooLarge {
                outcomes,
                ceiling: self.ceiling,
            });
        }
        Ok(())
    }

    pub fn evaluate(&self, phi: &TuningParams, scenario: &Scenario) -> Result<OCResult> {
        Ok(self.evaluate_many(phi, std::slice::from_ref(scenario))?.remove(0))
    }

    fn decision_table(&self, weights: &PhiWeights<'_>) -> Result<DecisionTable> {
        let design = self.model.design();
        if !design.is_exchangeable() {
            return Ok(DecisionTable::Direct);
        }
        let n = design.sample_sizes[0];
        let len = design.strata();
        let ranker = MultisetRanker::new(n, len);
        let mut keys = Vec::with_capacity(ranker.count());
        for_each_multiset(n, len, &mut |s| keys.push(s.to_vec()));
        let decided: Vec<(usize, u64)> = keys
            .par_iter()
            .map(|k| Ok((ranker.rank(k), weights.decide_mask(k)?)))
            .collect::<Result<_>>()?;
        let mut masks = vec![0u64; ranker.count()];
        for (rank, mask) in decided {
            masks[rank] = mask;
        }
        Ok(DecisionTable::Canonical { ranker, masks })
    }

    /// Exact operating characteristics for each scenario, sharing one decision
    /// table across them.
    pub fn evaluate_many(&self, phi: &TuningParams, scenarios: &[Scenario]) -> Result<Vec<OCResult>> {
        self.check_ceiling()?;
        let design = self.model.design();
        let strata = design.strata();
        for s in scenarios {
            s.validate_for(design)?;
        }
        let weights = self.model.weights_for(phi)?;
        let table = self.decision_table(&weights)?;
        let pmfs: Vec<Vec<Vec<f64>>> = scenarios
            .iter()
            .map(|s| {
                design
                    .sample_sizes
                    .iter()
                    .zip(&s.rates)
                    .map(|(&n, &p)| binom_pmf_table(n, p))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<_>>()?;
        let active: Vec<u64> = scenarios.iter().map(Scenario::active_mask).collect();
        let all = if strata == 64 { u64::MAX } else { (1u64 << strata) - 1 };

        let n0 = design.sample_sizes[0];
        let partitions: Vec<Vec<Accumulator>> = (0..=n0)
            .into_par_iter()
            .map(|first| {
                let mut acc = vec![Accumulator::new(strata); scenarios.len()];
                let mut r = vec![0u32; strata];
                r[0] = first;
                let mut sorted = vec![(0u32, 0usize); strata];
                loop {
                    let mask = match &table {
                        DecisionTable::Direct => weights.decide_mask(&r)?,
                        DecisionTable::Canonical { ranker, masks } => {
                            for (j, slot) in sorted.iter_mut().enumerate() {
                                *slot = (r[j], j);
                            }
                            sorted.sort_unstable();
                            let mut key = [0u32; 64];
                            for (p, &(v, _)) in sorted.iter().enumerate() {
                                key[p] = v;
                            }
                            let canon = masks[ranker.rank(&key[..strata])];
                            sorted
                                .iter()
                                .enumerate()
                                .filter(|(p, _)| canon >> p & 1 == 1)
                                .fold(0u64, |m, (_, &(_, j))| m | 1 << j)
                        }
                    };
                    for (s, a) in acc.iter_mut().enumerate() {
                        let mut w = 1.0;
                        for (j, &rj) in r.iter().enumerate() {
                            w *= pmfs[s][j][rj as usize];
                        }
                        a.mass += w;
                        if mask != 0 {
                            for (i, slot) in a.reject.iter_mut().enumerate() {
                                if mask >> i & 1 == 1 {
                                    *slot += w;
                                }
                            }
                            if mask & !active[s] & all != 0 {
                                a.fwer += w;
                            }
                            if mask & active[s] != 0 {
                                a.ewp += w;
                            }
                        }
                    }
                    // odometer over strata 1.., last stratum fastest
                    let mut j = strata;
                    loop {
                        if j == 1 {
                            return Ok(acc);
                        }
                        j -= 1;
                        if r[j] < design.sample_sizes[j] {
                            r[j] += 1;
                            break;
                        }
                        r[j] = 0;
                    }
                }
            })
            .collect::<Result<_>>()?;

        let mut totals = vec![Accumulator::new(strata); scenarios.len()];
        for part in &partitions {
            for (t, p) in totals.iter_mut().zip(part) {
                t.merge(p);
            }
        }
        Ok(scenarios
            .iter()
            .zip(totals)
            .map(|(s, t)| {
                let active = s.active();
                let reject: Vec<f64> = t.reject.iter().map(|p| p.clamp(0.0, 1.0)).collect();
                let ecd = reject
                    .iter()
                    .zip(&active)
                    .map(|(p, a)| if *a { *p } else { 1.0 - *p })
                    .sum();
                OCResult {
                    reject_prob: reject,
                    fwer: t.fwer.clamp(0.0, 1.0),
                    ewp: t.ewp.clamp(0.0, 1.0),
                    ecd,
                    active,
                    mcse: None,
                    backend: BackendKind::Exact,
                    probability_mass: Some(t.mass),
                }
            })
            .collect())
    }
}
