//! Fujikawa's borrowing design: similarity weights between strata, the
//! borrowing posterior and the per-stratum detection rule.

use std::sync::{Arc, OnceLock};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distributions::{beta_cdf_and_sf, BetaShapes, DivergenceKind};
use crate::error::{Error, Result};

/// Upper end of the ε interval whenever a finite search box is needed.
pub const EPSILON_CAP: f64 = 25.0;

/// Trial blueprint: per-stratum sample sizes, beta priors and target rates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Design {
    pub sample_sizes: Vec<u32>,
    pub prior_a: Vec<f64>,
    pub prior_b: Vec<f64>,
    pub target_rates: Vec<f64>,
    #[serde(default)]
    pub divergence: DivergenceKind,
}

impl Design {
    /// Design with unit Beta(1, 1) priors and the JSD similarity.
    pub fn new(sample_sizes: Vec<u32>, target_rates: Vec<f64>) -> Result<Self> {
        let strata = sample_sizes.len();
        let design = Design {
            sample_sizes,
            prior_a: vec![1.0; strata],
            prior_b: vec![1.0; strata],
            target_rates,
            divergence: DivergenceKind::Jsd,
        };
        design.validate()?;
        Ok(design)
    }

    /// `strata` strata of `n` patients each sharing the target rate `p_star`.
    pub fn balanced(strata: usize, n: u32, p_star: f64) -> Result<Self> {
        Self::new(vec![n; strata], vec![p_star; strata])
    }

    pub fn with_divergence(mut self, divergence: DivergenceKind) -> Self {
        self.divergence = divergence;
        self
    }

    pub fn with_priors(mut self, prior_a: Vec<f64>, prior_b: Vec<f64>) -> Result<Self> {
        self.prior_a = prior_a;
        self.prior_b = prior_b;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let strata = self.sample_sizes.len();
        if strata == 0 {
            return Err(Error::Domain("design needs at least one stratum".into()));
        }
        if strata > 64 {
            return Err(Error::Domain(format!("at most 64 strata are supported, got {strata}")));
        }
        if self.prior_a.len() != strata || self.prior_b.len() != strata || self.target_rates.len() != strata {
            return Err(Error::Domain(format!(
                "sample_sizes, prior_a, prior_b and target_rates must all have length {strata}"
            )));
        }
        if let Some(n) = self.sample_sizes.iter().find(|&&n| n == 0) {
            return Err(Error::Domain(format!("sample sizes must be positive, got {n}")));
        }
        for (&a, &b) in self.prior_a.iter().zip(&self.prior_b) {
            BetaShapes::new(a, b)?;
        }
        if let Some(p) = self.target_rates.iter().find(|p| !(**p > 0.0 && **p < 1.0)) {
            return Err(Error::Domain(format!("target rates must lie in (0, 1), got {p}")));
        }
        Ok(())
    }

    pub fn strata(&self) -> usize {
        self.sample_sizes.len()
    }

    /// Equal sample sizes, priors and target rates in every stratum.
    pub fn is_exchangeable(&self) -> bool {
        let first = |v: &[f64]| v.iter().all(|x| x.to_bits() == v[0].to_bits());
        self.sample_sizes.iter().all(|&n| n == self.sample_sizes[0])
            && first(&self.prior_a)
            && first(&self.prior_b)
            && first(&self.target_rates)
    }

    /// Number of outcome vectors, Π (n_i + 1).
    pub fn outcome_count(&self) -> u128 {
        self.sample_sizes.iter().map(|&n| u128::from(n) + 1).product()
    }

    /// Conjugate posterior Beta(a_i + r_i, b_i + n_i − r_i) without borrowing.
    pub fn unaltered_posterior(&self, stratum: usize, responses: u32) -> BetaShapes {
        BetaShapes {
            alpha: self.prior_a[stratum] + f64::from(responses),
            beta: self.prior_b[stratum] + f64::from(self.sample_sizes[stratum] - responses),
        }
    }

    pub fn check_outcome(&self, r: &[u32]) -> Result<()> {
        if r.len() != self.strata() {
            return Err(Error::Domain(format!(
                "outcome vector has length {}, design has {} strata",
                r.len(),
                self.strata()
            )));
        }
        for (i, (&ri, &ni)) in r.iter().zip(&self.sample_sizes).enumerate() {
            if ri > ni {
                return Err(Error::Domain(format!("stratum {i}: {ri} responders exceed sample size {ni}")));
            }
        }
        Ok(())
    }
}

/// Tuning parameters φ = (λ, ε, τ): detection threshold, similarity exponent
/// and similarity cutoff.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TuningParams {
    pub lambda: f64,
    pub epsilon: f64,
    pub tau: f64,
}

impl TuningParams {
    pub fn new(lambda: f64, epsilon: f64, tau: f64) -> Result<Self> {
        let phi = TuningParams { lambda, epsilon, tau };
        phi.validate()?;
        Ok(phi)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(Error::Domain(format!("lambda must lie in [0, 1], got {}", self.lambda)));
        }
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(Error::Domain(format!("epsilon must be finite and >= 0, got {}", self.epsilon)));
        }
        if !(0.0..=1.0).contains(&self.tau) {
            return Err(Error::Domain(format!("tau must lie in [0, 1], got {}", self.tau)));
        }
        Ok(())
    }

    /// Point in (λ, ε, τ) order.
    pub fn from_slice(x: &[f64]) -> Result<Self> {
        match x {
            [lambda, epsilon, tau] => Self::new(*lambda, *epsilon, *tau),
            _ => Err(Error::Domain(format!("expected 3 tuning parameters, got {}", x.len()))),
        }
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.lambda, self.epsilon, self.tau]
    }

    /// Weight ω = ω̃^ε if ω̃^ε > τ, else 0.
    #[inline]
    pub fn sharpen(&self, raw: f64) -> f64 {
        let w = raw.powf(self.epsilon);
        if w > self.tau {
            w
        } else {
            0.0
        }
    }
}

/// Validated vector of responders per stratum.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct OutcomeVector(Vec<u32>);

impl OutcomeVector {
    pub fn new(responses: Vec<u32>, design: &Design) -> Result<Self> {
        design.check_outcome(&responses)?;
        Ok(OutcomeVector(responses))
    }

    pub fn as_slice(&self) -> &[u32] {
        &self.0
    }
}

/// Dense I×I matrix of borrowing weights.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMatrix {
    size: usize,
    values: Vec<f64>,
}

impl WeightMatrix {
    pub fn size(&self) -> usize {
        self.size
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.size + j]
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.size).all(|i| (0..i).all(|j| self.get(i, j).to_bits() == self.get(j, i).to_bits()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct StratumClass {
    n: u32,
    a: f64,
    b: f64,
}

type SimilarityTable = std::result::Result<Arc<[f64]>, Error>;

/// Design plus its memo of raw similarities ω̃.
///
/// Strata sharing (n, a, b) form a class; for every ordered pair of classes the
/// full (n_i + 1) × (n_j + 1) table of ω̃ is computed once on first use and then
/// shared read-only between threads.
#[derive(Debug)]
pub struct BasketModel {
    design: Design,
    class_of: Vec<usize>,
    classes: Vec<StratumClass>,
    tables: Vec<OnceLock<SimilarityTable>>,
}

impl BasketModel {
    pub fn new(design: Design) -> Result<Self> {
        design.validate()?;
        let mut classes: Vec<StratumClass> = Vec::new();
        let mut class_of = Vec::with_capacity(design.strata());
        for i in 0..design.strata() {
            let c = StratumClass {
                n: design.sample_sizes[i],
                a: design.prior_a[i],
                b: design.prior_b[i],
            };
            let idx = match classes.iter().position(|k| *k == c) {
                Some(idx) => idx,
                None => {
                    classes.push(c);
                    classes.len() - 1
                }
            };
            class_of.push(idx);
        }
        let tables = (0..classes.len() * classes.len()).map(|_| OnceLock::new()).collect();
        Ok(BasketModel {
            design,
            class_of,
            classes,
            tables,
        })
    }

    pub fn design(&self) -> &Design {
        &self.design
    }

    fn class_table(&self, ci: usize, cj: usize) -> Result<&Arc<[f64]>> {
        let slot = &self.tables[ci * self.classes.len() + cj];
        slot.get_or_init(|| self.build_table(ci, cj))
            .as_ref()
            .map_err(Clone::clone)
    }

    fn build_table(&self, ci: usize, cj: usize) -> SimilarityTable {
        let (p, q) = (self.classes[ci], self.classes[cj]);
        let kind = self.design.divergence;
        let cols = q.n as usize + 1;
        let rows: Vec<Vec<f64>> = (0..=p.n)
            .into_par_iter()
            .map(|ri| {
                let sp = BetaShapes {
                    alpha: p.a + f64::from(ri),
                    beta: p.b + f64::from(p.n - ri),
                };
                (0..=q.n)
                    .map(|rj| {
                        // within one class the table is symmetric; fill the upper triangle only
                        if ci == cj && rj < ri {
                            return Ok(f64::NAN);
                        }
                        let sq = BetaShapes {
                            alpha: q.a + f64::from(rj),
                            beta: q.b + f64::from(q.n - rj),
                        };
                        Ok((1.0 - kind.divergence(&sp, &sq)?).clamp(0.0, 1.0))
                    })
                    .collect::<Result<Vec<f64>>>()
            })
            .collect::<Result<_>>()?;
        let mut flat: Vec<f64> = rows.into_iter().flatten().collect();
        if ci == cj {
            for ri in 0..cols {
                for rj in 0..ri {
                    flat[ri * cols + rj] = flat[rj * cols + ri];
                }
            }
        }
        Ok(flat.into())
    }

    /// Raw similarity ω̃ between strata `i` and `j` with `r_i`, `r_j` responders.
    pub fn raw_similarity(&self, i: usize, j: usize, r_i: u32, r_j: u32) -> Result<f64> {
        let (ci, cj) = (self.class_of[i], self.class_of[j]);
        if r_i > self.classes[ci].n || r_j > self.classes[cj].n {
            return Err(Error::Domain("responders exceed sample size".into()));
        }
        let table = self.class_table(ci, cj)?;
        Ok(table[r_i as usize * (self.classes[cj].n as usize + 1) + r_j as usize])
    }

    /// Borrowing weight ω_ij; the self weight ω_ii is always 1.
    pub fn weight(&self, i: usize, j: usize, r_i: u32, r_j: u32, phi: &TuningParams) -> Result<f64> {
        if i == j {
            return Ok(1.0);
        }
        Ok(phi.sharpen(self.raw_similarity(i, j, r_i, r_j)?))
    }

    /// Precomputes ω for every ordered class pair under `phi`.
    pub fn weights_for(&self, phi: &TuningParams) -> Result<PhiWeights<'_>> {
        phi.validate()?;
        let nc = self.classes.len();
        let mut tables = Vec::with_capacity(nc * nc);
        for ci in 0..nc {
            for cj in 0..nc {
                let raw = self.class_table(ci, cj)?;
                tables.push(raw.iter().map(|&w| phi.sharpen(w)).collect::<Vec<f64>>());
            }
        }
        Ok(PhiWeights {
            model: self,
            phi: *phi,
            tables,
        })
    }

    pub fn weight_matrix(&self, r: &[u32], phi: &TuningParams) -> Result<WeightMatrix> {
        self.design.check_outcome(r)?;
        let w = self.weights_for(phi)?;
        let size = r.len();
        let mut values = vec![0.0; size * size];
        for i in 0..size {
            for j in 0..size {
                values[i * size + j] = w.get(i, j, r[i], r[j]);
            }
        }
        Ok(WeightMatrix { size, values })
    }

    pub fn borrowing_posterior(&self, r: &[u32], phi: &TuningParams) -> Result<Vec<BetaShapes>> {
        self.design.check_outcome(r)?;
        Ok(self.weights_for(phi)?.posterior(r))
    }

    /// Detection vector: stratum i is detected iff P(p_i > p*_i | r) ≥ λ under
    /// the borrowing posterior.
    pub fn decide(&self, r: &[u32], phi: &TuningParams) -> Result<Vec<bool>> {
        self.design.check_outcome(r)?;
        let mask = self.weights_for(phi)?.decide_mask(r)?;
        Ok((0..r.len()).map(|i| mask >> i & 1 == 1).collect())
    }

    /// ω̃* = max ω̃ over all stratum pairs whose unaltered posteriors differ.
    pub fn max_distinct_similarity(&self) -> Result<f64> {
        let strata = self.design.strata();
        if strata < 2 {
            return Err(Error::Domain("the extreme borrowing boundary needs at least two strata".into()));
        }
        let mut pairs: Vec<(usize, usize)> = Vec::new();
        for i in 0..strata {
            for j in (i + 1)..strata {
                let key = (self.class_of[i], self.class_of[j]);
                if !pairs.contains(&key) {
                    pairs.push(key);
                }
            }
        }
        let mut best = f64::NEG_INFINITY;
        for (ci, cj) in pairs {
            let (p, q) = (self.classes[ci], self.classes[cj]);
            let table = self.class_table(ci, cj)?;
            let cols = q.n as usize + 1;
            for ri in 0..=p.n {
                for rj in 0..=q.n {
                    let same = p.a + f64::from(ri) == q.a + f64::from(rj)
                        && p.b + f64::from(p.n - ri) == q.b + f64::from(q.n - rj);
                    if !same {
                        best = best.max(table[ri as usize * cols + rj as usize]);
                    }
                }
            }
        }
        Ok(best)
    }

    /// ε_extreme(τ) = ln τ / ln ω̃*: above it, borrowing only happens between
    /// strata with identical unaltered posteriors.
    pub fn extreme_boundary(&self, tau: f64) -> Result<f64> {
        if !(tau > 0.0 && tau < 1.0) {
            return Err(Error::Domain(format!("tau must lie in (0, 1), got {tau}")));
        }
        let star = self.max_distinct_similarity()?;
        if !(star > 0.0 && star < 1.0) {
            return Err(Error::Domain(format!("degenerate maximal similarity {star}")));
        }
        Ok(tau.ln() / star.ln())
    }
}

/// Borrowing weights for one fixed φ, ready for repeated decisions.
pub struct PhiWeights<'m> {
    model: &'m BasketModel,
    phi: TuningParams,
    tables: Vec<Vec<f64>>,
}

impl<'m> PhiWeights<'m> {
    pub fn phi(&self) -> &TuningParams {
        &self.phi
    }

    pub fn model(&self) -> &'m BasketModel {
        self.model
    }

    #[inline]
    fn get(&self, i: usize, j: usize, r_i: u32, r_j: u32) -> f64 {
        if i == j {
            return 1.0;
        }
        let m = self.model;
        let (ci, cj) = (m.class_of[i], m.class_of[j]);
        let cols = m.classes[cj].n as usize + 1;
        self.tables[ci * m.classes.len() + cj][r_i as usize * cols + r_j as usize]
    }

    /// Borrowing shapes for stratum `i`. Contributions are summed in ascending
    /// order of responders (ties by index), so relabelling exchangeable strata
    /// yields bitwise identical shapes.
    #[inline]
    fn shapes_for(&self, i: usize, r: &[u32], order: &[usize]) -> (f64, f64) {
        let d = &self.model.design;
        let (mut alpha, mut beta) = (0.0, 0.0);
        for &j in order {
            let w = self.get(i, j, r[i], r[j]);
            if w != 0.0 {
                alpha += w * (d.prior_a[j] + f64::from(r[j]));
                beta += w * (d.prior_b[j] + f64::from(d.sample_sizes[j] - r[j]));
            }
        }
        (alpha, beta)
    }

    pub fn posterior(&self, r: &[u32]) -> Vec<BetaShapes> {
        let order = summation_order(r);
        (0..r.len())
            .map(|i| {
                let (alpha, beta) = self.shapes_for(i, r, &order);
                BetaShapes { alpha, beta }
            })
            .collect()
    }

    /// Detection bitmask (bit i set iff stratum i is detected). `r` must be a
    /// valid outcome for the design.
    pub fn decide_mask(&self, r: &[u32]) -> Result<u64> {
        let order = summation_order(r);
        let d = &self.model.design;
        // P(p > p*) >= λ evaluated as I_{p*}(α, β) <= 1 − λ, which keeps the
        // tiny lower tail accurate near λ = 1.
        let max_cdf = 1.0 - self.phi.lambda;
        let mut mask = 0u64;
        for i in 0..r.len() {
            let (alpha, beta) = self.shapes_for(i, r, &order);
            let (cdf, _) = beta_cdf_and_sf(d.target_rates[i], alpha, beta)?;
            if cdf <= max_cdf {
                mask |= 1 << i;
            }
        }
        Ok(mask)
    }
}

fn summation_order(r: &[u32]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..r.len()).collect();
    order.sort_by_key(|&j| (r[j], j));
    order
}
