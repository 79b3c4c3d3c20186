//! Banks of almost-isometric linear embeddings `ψ_n`, their certification,
//! spreading-limit estimates, and subsequence selection.
//!
//! A bank is the computational surrogate for finite representability: a
//! finite ordered list of maps, each certified to satisfy
//! `‖v‖ ≤ ‖ψ_n v‖ ≤ (1 + ε_n)‖v‖` on a designated vector set, with the
//! budget `∏(1 + ε_n) ≤ 1 + γ`. Bank indices are 0-based.

use std::collections::HashSet;
use std::f64::consts::{PI, SQRT_2};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pointset::{AnnulusDecomposition, LocallyFiniteSet};
use crate::schedule::cos_sin;
use crate::spaces::{blend, Exponent, LinearMap, NormSpec, Point, Space};

/// Absolute slack on certified ratios.
pub const CERTIFY_TOL: f64 = 1e-12;

/// Upper bound on the number of index tuples a spreading estimate enumerates.
const MAX_TUPLES: usize = 2_000_000;

/// How the maps of a bank are produced.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "strategy", rename_all = "snake_case")]
pub enum BankStrategy {
    /// `ψ_n` copies the source coordinates into the `n`-th disjoint block of
    /// width `block_width` (default: source dimension) of the target.
    BlockShift {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        block_width: Option<usize>,
    },
    /// ℓ_2^2 → ℓ_1: `ψ_n x = w·(⟨x, θ_k⟩)_k` over `directions` equally spaced
    /// half-circle directions with a seeded random offset per map, written
    /// into the `n`-th block. `w = tan(π/(2K))` makes the minimum ratio 1.
    #[serde(rename = "quadrature_l2_to_l1")]
    QuadratureL2ToL1 { directions: usize, seed: u64 },
    /// Explicit matrices, each `target.dim × source.dim`, given as rows.
    UserMatrices { matrices: Vec<Vec<Vec<f64>>> },
}

/// Observed ratio range of one map over its certification set.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Certificate {
    pub index: usize,
    pub min_ratio: f64,
    pub max_ratio: f64,
    pub vectors: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingBank {
    maps: Vec<LinearMap>,
    eps_n: Vec<f64>,
    gamma: f64,
    strategy: BankStrategy,
    certificates: Vec<Certificate>,
}

impl EmbeddingBank {
    pub fn len(&self) -> usize {
        self.maps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.maps.is_empty()
    }

    pub fn map(&self, n: usize) -> &LinearMap {
        &self.maps[n]
    }

    pub fn maps(&self) -> &[LinearMap] {
        &self.maps
    }

    pub fn eps_n(&self) -> &[f64] {
        &self.eps_n
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn strategy(&self) -> &BankStrategy {
        &self.strategy
    }

    pub fn certificates(&self) -> &[Certificate] {
        &self.certificates
    }

    pub fn source(&self) -> &Space {
        self.maps[0].source()
    }

    pub fn target(&self) -> &Space {
        self.maps[0].target()
    }

    /// Largest observed `ratio − 1` over all maps.
    pub fn achieved_slack(&self) -> f64 {
        self.certificates.iter().map(|c| c.max_ratio - 1.0).fold(0.0, f64::max)
    }

    /// `∏(1 + ε_n)`.
    pub fn budget_product(&self) -> f64 {
        self.eps_n.iter().map(|e| e.ln_1p()).sum::<f64>().exp()
    }
}

/// Uniform split `ε_n = (1+γ)^{1/count} − 1`.
pub fn uniform_eps(gamma: f64, count: usize) -> f64 {
    (gamma.ln_1p() / count as f64).exp_m1()
}

/// Builds the maps for `strategy` and certifies each on `certify_set`.
pub fn build_bank(
    strategy: BankStrategy,
    source: &Space,
    target: &Space,
    gamma: f64,
    count: usize,
    certify_set: &[Point],
) -> Result<EmbeddingBank> {
    if !(gamma >= 0.0 && gamma.is_finite()) {
        return Err(Error::InvalidParams(format!("gamma must be nonnegative, got {gamma}")));
    }
    if count < 2 {
        return Err(Error::InvalidParams("a bank needs at least two maps".into()));
    }
    if certify_set.is_empty() {
        return Err(Error::InvalidParams("certification set is empty".into()));
    }
    let maps = match &strategy {
        BankStrategy::BlockShift { block_width } => block_shift_maps(source, target, block_width.unwrap_or(source.dim()), count)?,
        BankStrategy::QuadratureL2ToL1 { directions, seed } => {
            quadrature_maps(source, target, *directions, *seed, count)?
        }
        BankStrategy::UserMatrices { matrices } => {
            if matrices.len() != count {
                return Err(Error::InvalidParams(format!(
                    "count {count} does not match {} user matrices",
                    matrices.len()
                )));
            }
            matrices
                .iter()
                .map(|rows| LinearMap::from_rows(rows.clone(), source.clone(), target.clone()))
                .collect::<Result<_>>()?
        }
    };
    let eps = uniform_eps(gamma, count);
    let eps_n = vec![eps; count];
    let certificates = maps
        .iter()
        .enumerate()
        .map(|(n, m)| certify(n, m, eps, certify_set))
        .collect::<Result<Vec<_>>>()?;
    let bank = EmbeddingBank { maps, eps_n, gamma, strategy, certificates };
    let product = bank.budget_product();
    if product > 1.0 + gamma + CERTIFY_TOL {
        return Err(Error::InvalidParams(format!("budget product {product} exceeds 1 + gamma")));
    }
    Ok(bank)
}

fn certify(index: usize, map: &LinearMap, eps: f64, vectors: &[Point]) -> Result<Certificate> {
    let source = map.source();
    let target = map.target();
    let upper = 1.0 + eps;
    let mut cert = Certificate { index, min_ratio: f64::INFINITY, max_ratio: 0.0, vectors: 0 };
    for v in vectors {
        source.check(v)?;
        let nv = source.norm_unchecked(v.coords());
        if nv == 0.0 {
            continue;
        }
        let ratio = target.norm_unchecked(&map.apply_slice(v.coords())) / nv;
        if ratio < 1.0 - CERTIFY_TOL || ratio > upper + CERTIFY_TOL || !ratio.is_finite() {
            return Err(Error::CertificationFailed { map: index, vector: v.coords().to_vec(), ratio, upper });
        }
        cert.min_ratio = cert.min_ratio.min(ratio);
        cert.max_ratio = cert.max_ratio.max(ratio);
        cert.vectors += 1;
    }
    if cert.vectors == 0 {
        return Err(Error::InvalidParams("certification set has no nonzero vector".into()));
    }
    Ok(cert)
}

fn block_shift_maps(source: &Space, target: &Space, width: usize, count: usize) -> Result<Vec<LinearMap>> {
    let d = source.dim();
    if width < d {
        return Err(Error::InvalidParams(format!("block width {width} is below the source dimension {d}")));
    }
    if target.dim() < count * width {
        return Err(Error::DimensionMismatch { expected: count * width, found: target.dim() });
    }
    Ok((0..count)
        .map(|n| {
            let mut data = vec![0.0; target.dim() * d];
            for k in 0..d {
                data[(n * width + k) * d + k] = 1.0;
            }
            LinearMap::from_row_major(data, source.clone(), target.clone()).expect("shape checked")
        })
        .collect())
}

fn quadrature_maps(
    source: &Space,
    target: &Space,
    directions: usize,
    seed: u64,
    count: usize,
) -> Result<Vec<LinearMap>> {
    let is_l2 = matches!(source.norm_spec(), NormSpec::Lp { p: Exponent::Finite(p) } if *p == 2.0);
    if !is_l2 || source.dim() != 2 {
        return Err(Error::Unsupported("quadrature banks need an l2 source of dimension 2".into()));
    }
    if directions < 2 {
        return Err(Error::InvalidParams("quadrature needs at least 2 directions".into()));
    }
    if target.dim() < count * directions {
        return Err(Error::DimensionMismatch { expected: count * directions, found: target.dim() });
    }
    let k = directions as f64;
    let weight = (PI / (2.0 * k)).tan();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..count)
        .map(|n| {
            let offset = rng.random::<f64>() * PI / k;
            let mut data = vec![0.0; target.dim() * 2];
            for j in 0..directions {
                let phi = offset + j as f64 * PI / k;
                let row = n * directions + j;
                data[row * 2] = weight * phi.cos();
                data[row * 2 + 1] = weight * phi.sin();
            }
            LinearMap::from_row_major(data, source.clone(), target.clone()).expect("shape checked")
        })
        .collect())
}

/// Certification vectors: every nonzero point, every pairwise difference, and
/// `random` random unit vectors.
pub fn certification_set(pts: &LocallyFiniteSet, random: usize, seed: u64) -> Vec<Point> {
    let space = pts.space();
    let mut out: Vec<Point> = pts.points().iter().map(|(_, p)| p.clone()).filter(|p| !p.is_zero()).collect();
    let all = pts.points();
    for a in 0..all.len() {
        for b in a + 1..all.len() {
            out.push(all[a].1.sub(&all[b].1));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    while out.len() < pts.len() * (pts.len() + 1) / 2 + random {
        let g: Vec<f64> = (0..space.dim()).map(|_| rng.sample(StandardNormal)).collect();
        let n = space.norm_unchecked(&g);
        if n > 1e-9 {
            out.push(Point::from_raw(g.into_iter().map(|c| c / n).collect()));
        }
    }
    out
}

/// Outcome of a spreading-limit estimate.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SpreadingEstimate {
    pub value: f64,
    /// First bank index `ν` from which all tuples agree within `tol`.
    pub start: usize,
    pub oscillation: f64,
}

/// Estimates `L(a) = lim ‖Σ_k a_k ψ_{n_k}(u)‖` over increasing tuples
/// `ν ≤ n_1 < n_2 < …`, for start indices `ν ≤ max_start`. A window must
/// leave room for at least `k + 1` indices, so `ν ≤ len − k − 1`.
pub fn spreading_limit_estimate(
    bank: &EmbeddingBank,
    u: &Point,
    a: &[f64],
    tol: f64,
    max_start: usize,
) -> Result<SpreadingEstimate> {
    if a.is_empty() || a.iter().all(|&c| c == 0.0) {
        return Err(Error::InvalidParams("coefficients need a nonzero entry".into()));
    }
    let k = a.len();
    let n = bank.len();
    if k >= n {
        return Err(Error::InvalidParams(format!("{k} coefficients need a bank of more than {n} maps")));
    }
    if binomial(n, k) > MAX_TUPLES {
        return Err(Error::InvalidParams(format!("C({n}, {k}) tuples exceed the enumeration cap")));
    }
    bank.source().check(u)?;
    let images: Vec<Vec<f64>> = bank.maps.iter().map(|m| m.apply_slice(u.coords())).collect();
    let target = bank.target();

    // extremes of the norm over tuples, bucketed by first index
    let mut lo = vec![f64::INFINITY; n];
    let mut hi = vec![f64::NEG_INFINITY; n];
    let mut idx: Vec<usize> = (0..k).collect();
    let mut acc = vec![0.0; target.dim()];
    loop {
        acc.iter_mut().for_each(|v| *v = 0.0);
        for (c, &i) in a.iter().zip(&idx) {
            for (s, x) in acc.iter_mut().zip(&images[i]) {
                *s += c * x;
            }
        }
        let v = target.norm_unchecked(&acc);
        lo[idx[0]] = lo[idx[0]].min(v);
        hi[idx[0]] = hi[idx[0]].max(v);
        if !next_combination(&mut idx, n) {
            break;
        }
    }
    let last_start = (n - k - 1).min(max_start);
    let (mut run_lo, mut run_hi) = (f64::INFINITY, f64::NEG_INFINITY);
    let mut tails = vec![(0.0, 0.0); last_start + 1];
    for s in (0..=n - k).rev() {
        run_lo = run_lo.min(lo[s]);
        run_hi = run_hi.max(hi[s]);
        if s <= last_start {
            tails[s] = (run_lo, run_hi);
        }
    }
    let mut best = f64::INFINITY;
    for (start, &(l, h)) in tails.iter().enumerate() {
        let osc = h - l;
        if osc < tol {
            return Ok(SpreadingEstimate { value: 0.5 * (l + h), start, oscillation: osc });
        }
        best = best.min(osc);
    }
    Err(Error::NotStabilized { oscillation: best, tol })
}

fn binomial(n: usize, k: usize) -> usize {
    (0..k).fold(1usize, |acc, i| acc.saturating_mul(n - i) / (i + 1))
}

fn next_combination(idx: &mut [usize], n: usize) -> bool {
    let k = idx.len();
    for pos in (0..k).rev() {
        if idx[pos] < n - k + pos {
            idx[pos] += 1;
            for q in pos + 1..k {
                idx[q] = idx[q - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// `√2 / (3(1 + ζ))`: the norm every blended direction must reach.
pub fn selection_threshold(zeta: f64) -> f64 {
    SQRT_2 / (3.0 * (1.0 + zeta))
}

/// Chosen bank indices `Ψ_1, …, Ψ_{m+1}` and per-level worst margins.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SelectionResult {
    pub chosen: Vec<usize>,
    /// `min ‖cos τ Ψ_i u + sin τ Ψ_{i+1} u‖ − threshold` per level; `None`
    /// when the level has no directions.
    pub level_margins: Vec<Option<f64>>,
    pub threshold: f64,
}

impl SelectionResult {
    pub fn levels(&self) -> usize {
        self.chosen.len() - 1
    }
}

#[derive(Clone, Debug)]
struct Shortfall {
    level: usize,
    margin: f64,
    direction: Vec<f64>,
    tau: f64,
    achieved: f64,
}

struct Selector<'a> {
    bank: &'a EmbeddingBank,
    decomp: &'a AnnulusDecomposition,
    threshold: f64,
    /// `images[level-1][dir][n] = ψ_n(u_dir)`
    images: Vec<Vec<Vec<Vec<f64>>>>,
    dead: HashSet<(usize, usize)>,
    shortfall: Option<Shortfall>,
}

impl Selector<'_> {
    /// Worst margin of the pair `(a, b)` at `level`, with its witness.
    fn evaluate(&self, level: usize, a: usize, b: usize) -> (Option<f64>, Option<Shortfall>) {
        let target = self.bank.target();
        let mut worst: Option<Shortfall> = None;
        for (d, dir) in self.decomp.level(level).directions.iter().enumerate() {
            let imgs = &self.images[level - 1][d];
            for &tau in &dir.taus {
                let (c, s) = cos_sin(tau);
                let achieved = target.norm_unchecked(&blend(c, &imgs[a], s, &imgs[b]));
                let margin = achieved - self.threshold;
                if worst.as_ref().is_none_or(|w| margin < w.margin) {
                    worst = Some(Shortfall { level, margin, direction: dir.u.coords().to_vec(), tau, achieved });
                }
            }
        }
        (worst.as_ref().map(|w| w.margin), worst)
    }

    fn record(&mut self, s: Shortfall) {
        let replace = match &self.shortfall {
            None => true,
            Some(cur) => s.level > cur.level || (s.level == cur.level && s.margin > cur.margin),
        };
        if replace {
            self.shortfall = Some(s);
        }
    }

    /// Extends a chain whose level-`level` map is bank index `prev`.
    fn extend(&mut self, level: usize, prev: usize, chain: &mut Vec<usize>, margins: &mut Vec<Option<f64>>) -> bool {
        if level > self.decomp.levels.len() {
            return true;
        }
        if self.dead.contains(&(level, prev)) {
            return false;
        }
        for next in prev + 1..self.bank.len() {
            let (margin, witness) = self.evaluate(level, prev, next);
            if margin.is_none_or(|m| m >= 0.0) {
                chain.push(next);
                margins.push(margin);
                if self.extend(level + 1, next, chain, margins) {
                    return true;
                }
                chain.pop();
                margins.pop();
            } else if let Some(w) = witness {
                self.record(w);
            }
        }
        self.dead.insert((level, prev));
        false
    }
}

/// Greedy depth-first search for strictly increasing indices
/// `n_1 < … < n_{m+1}` such that every `u ∈ U_i`, `τ ∈ T_i(u)` satisfies
/// `‖cos τ ψ_{n_i}(u) + sin τ ψ_{n_{i+1}}(u)‖ ≥ √2/(3(1+ζ))`.
/// Earlier indices are preferred at every step.
pub fn select_subsequence(
    bank: &EmbeddingBank,
    decomp: &AnnulusDecomposition,
    zeta: f64,
) -> Result<SelectionResult> {
    let m = decomp.levels.len();
    if bank.len() < m + 1 {
        return Err(Error::InvalidParams(format!("bank of {} maps cannot cover {m} levels", bank.len())));
    }
    if zeta.is_nan() || zeta <= 0.0 {
        return Err(Error::InvalidParams(format!("zeta must be positive, got {zeta}")));
    }
    let images = decomp
        .levels
        .iter()
        .map(|l| {
            l.directions
                .iter()
                .map(|d| bank.maps.iter().map(|mp| mp.apply_slice(d.u.coords())).collect())
                .collect()
        })
        .collect();
    let threshold = selection_threshold(zeta);
    let mut sel = Selector { bank, decomp, threshold, images, dead: HashSet::new(), shortfall: None };
    for first in 0..bank.len() - m {
        let mut chain = vec![first];
        let mut margins = Vec::new();
        if sel.extend(1, first, &mut chain, &mut margins) {
            return Ok(SelectionResult { chosen: chain, level_margins: margins, threshold });
        }
    }
    let s = sel.shortfall.expect("a failed search records a shortfall");
    Err(Error::BankExhausted { level: s.level, direction: s.direction, tau: s.tau, achieved: s.achieved, threshold })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pointset::{decompose, generate_annular, Placement};
    use crate::schedule::{build_schedule, Params};
    use std::f64::consts::FRAC_PI_2;

    fn unit_vectors(space: &Space, n: usize, seed: u64) -> Vec<Point> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                let g: Vec<f64> = (0..space.dim()).map(|_| rng.sample(StandardNormal)).collect();
                let nn = space.norm_unchecked(&g);
                Point::new(g.into_iter().map(|c| c / nn).collect()).unwrap()
            })
            .collect()
    }

    #[test]
    fn block_shift_is_exact_isometry() {
        for p in [1.0, 1.5, 2.0, 4.0] {
            let src = Space::lp(3, p).unwrap();
            let tgt = Space::lp(12, p).unwrap();
            let vs = unit_vectors(&src, 200, 1);
            let bank = build_bank(BankStrategy::BlockShift { block_width: None }, &src, &tgt, 0.01, 4, &vs).unwrap();
            assert_eq!(bank.achieved_slack(), 0.0);
            for c in bank.certificates() {
                assert_eq!(c.min_ratio, 1.0);
                assert_eq!(c.max_ratio, 1.0);
            }
            assert!(bank.budget_product() <= 1.01 + 1e-12);
        }
    }

    #[test]
    fn block_shift_needs_room() {
        let src = Space::lp(3, 1.0).unwrap();
        let tgt = Space::lp(8, 1.0).unwrap();
        let vs = unit_vectors(&src, 5, 1);
        assert!(build_bank(BankStrategy::BlockShift { block_width: None }, &src, &tgt, 0.01, 3, &vs).is_err());
        assert!(build_bank(BankStrategy::BlockShift { block_width: Some(2) }, &src, &tgt, 0.01, 2, &vs).is_err());
    }

    /// Dense-sampling oracle: ratio range of the quadrature sum over the unit circle.
    fn quadrature_ratio_range(k: usize, offset: f64) -> (f64, f64) {
        let w = (PI / (2.0 * k as f64)).tan();
        let mut lo = f64::INFINITY;
        let mut hi = 0.0_f64;
        for s in 0..20_000 {
            let beta = s as f64 * 2.0 * PI / 20_000.0;
            let v: f64 = (0..k)
                .map(|j| {
                    let phi = offset + j as f64 * PI / k as f64;
                    w * (phi - beta).cos().abs()
                })
                .sum();
            lo = lo.min(v);
            hi = hi.max(v);
        }
        (lo, hi)
    }

    #[test]
    fn quadrature_oracle_and_certification() {
        let (lo, hi) = quadrature_ratio_range(64, 0.01);
        assert!((1.0 - 1e-9..1.0 + 1e-6).contains(&lo), "{lo}");
        assert!(hi <= 1.0 / (PI / 128.0).cos() + 1e-12 && hi < 1.02, "{hi}");

        let src = Space::lp(2, 2.0).unwrap();
        let tgt = Space::lp(4 * 64, 1.0).unwrap();
        let vs = unit_vectors(&src, 1000, 5);
        let bank = build_bank(
            BankStrategy::QuadratureL2ToL1 { directions: 64, seed: 3 },
            &src,
            &tgt,
            0.01,
            4,
            &vs,
        )
        .unwrap();
        for c in bank.certificates() {
            assert!(c.min_ratio >= 1.0 - 1e-12 && c.max_ratio <= 1.02, "{c:?}");
        }
    }

    #[test]
    fn quadrature_rejects_other_sources() {
        let src = Space::lp(3, 2.0).unwrap();
        let tgt = Space::lp(64, 1.0).unwrap();
        let vs = unit_vectors(&src, 3, 5);
        let err = build_bank(BankStrategy::QuadratureL2ToL1 { directions: 8, seed: 0 }, &src, &tgt, 0.1, 2, &vs);
        assert!(matches!(err, Err(Error::Unsupported(_))));
    }

    #[test]
    fn contraction_fails_certification() {
        let s = Space::lp(2, 2.0).unwrap();
        let half = vec![vec![0.5, 0.0], vec![0.0, 1.0]];
        let id = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let vs = vec![Point::new(vec![0.0, 1.0]).unwrap(), Point::new(vec![1.0, 0.0]).unwrap()];
        let err = build_bank(BankStrategy::UserMatrices { matrices: vec![id, half] }, &s, &s, 0.1, 2, &vs).unwrap_err();
        match err {
            Error::CertificationFailed { map, ratio, .. } => {
                assert_eq!(map, 1);
                assert_eq!(ratio, 0.5);
            }
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn spreading_block_shift_closed_forms() {
        for (p, exp) in [(1.0, Exponent::Finite(1.0)), (3.0, Exponent::Finite(3.0)), (0.0, Exponent::Infinity)] {
            let src = Space::new(2, NormSpec::Lp { p: exp }).unwrap();
            let tgt = Space::new(16, NormSpec::Lp { p: exp }).unwrap();
            let vs = unit_vectors(&src, 10, 2);
            let bank = build_bank(BankStrategy::BlockShift { block_width: None }, &src, &tgt, 0.0, 8, &vs).unwrap();
            let u = &vs[0];
            let (c, s) = (0.6, 0.8);
            let est = spreading_limit_estimate(&bank, u, &[c, s], 1e-12, 3).unwrap();
            let expect = match exp {
                Exponent::Infinity => 0.8,
                _ => (c.powf(p) + s.powf(p)).powf(1.0 / p),
            };
            assert!((est.value - expect).abs() < 1e-12, "p={p}: {} vs {expect}", est.value);
            assert_eq!(est.start, 0);
            let one = spreading_limit_estimate(&bank, u, &[1.0], 1e-12, 3).unwrap();
            assert!((one.value - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn spreading_detects_instability() {
        let s = Space::lp(1, 1.0).unwrap();
        // alternating signs: |ψ_a u + ψ_b u| is 2 or 0
        let ms: Vec<Vec<Vec<f64>>> = (0..6).map(|n| vec![vec![if n % 2 == 0 { 1.0 } else { -1.0 }]]).collect();
        let u = Point::new(vec![1.0]).unwrap();
        let bank = build_bank(BankStrategy::UserMatrices { matrices: ms }, &s, &s, 0.0, 6, std::slice::from_ref(&u)).unwrap();
        let err = spreading_limit_estimate(&bank, &u, &[1.0, 1.0], 1e-6, 4).unwrap_err();
        assert!(matches!(err, Error::NotStabilized { .. }));
        assert!(spreading_limit_estimate(&bank, &u, &[0.0, 0.0], 1e-6, 4).is_err());
    }

    fn ramp_instance(levels: usize) -> (Space, crate::schedule::RadiiSchedule) {
        let p = Params::new(0.5, 0.1, 0.01, 0.01).unwrap();
        (Space::lp(2, 1.0).unwrap(), build_schedule(p, 1.0, levels, 0.01).unwrap())
    }

    #[test]
    fn selection_block_shift_l1_takes_first_indices() {
        let (src, s) = ramp_instance(3);
        let pts = generate_annular(4, &s, 6, &src, Placement::Mixed).unwrap();
        let dec = decompose(&pts, &s).unwrap();
        let tgt = Space::lp(12, 1.0).unwrap();
        let cert = certification_set(&pts, 20, 1);
        let bank = build_bank(BankStrategy::BlockShift { block_width: None }, &src, &tgt, 0.01, 6, &cert).unwrap();
        let sel = select_subsequence(&bank, &dec, 0.01).unwrap();
        assert_eq!(sel.chosen, vec![0, 1, 2, 3]);
        for m in sel.level_margins.iter().flatten() {
            // cos τ + sin τ ≥ 1
            assert!(*m >= 1.0 - sel.threshold - 1e-12);
        }
    }

    #[test]
    fn selection_vacuous_levels() {
        let (src, s) = ramp_instance(2);
        let pts = LocallyFiniteSet::from_points(src.clone(), vec![Point::zeros(2)]).unwrap();
        let dec = decompose(&pts, &s).unwrap();
        let cert = vec![Point::new(vec![1.0, 0.0]).unwrap()];
        let tgt = Space::lp(8, 1.0).unwrap();
        let bank = build_bank(BankStrategy::BlockShift { block_width: None }, &src, &tgt, 0.01, 4, &cert).unwrap();
        let sel = select_subsequence(&bank, &dec, 0.01).unwrap();
        assert_eq!(sel.chosen, vec![0, 1, 2]);
        assert_eq!(sel.level_margins, vec![None, None]);
    }

    #[test]
    fn selection_skips_cancelling_pairs() {
        let (src, s) = ramp_instance(1);
        let lt = 0.5 * (s.log_r(1) + s.log_big_r(1));
        let x = Point::new(vec![lt.exp(), 0.0]).unwrap();
        let pts = LocallyFiniteSet::from_points(src.clone(), vec![Point::zeros(2), x.clone()]).unwrap();
        let dec = decompose(&pts, &s).unwrap();
        let id = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let neg = vec![vec![-1.0, 0.0], vec![0.0, -1.0]];
        let cert = certification_set(&pts, 4, 0);
        // (I, -I) collapses at τ = π/4, (I, I) does not
        let bank = build_bank(
            BankStrategy::UserMatrices { matrices: vec![id.clone(), neg.clone(), id] },
            &src,
            &src,
            0.0,
            3,
            &cert,
        )
        .unwrap();
        let sel = select_subsequence(&bank, &dec, 0.01).unwrap();
        assert_eq!(sel.chosen, vec![0, 2]);

        let bank = build_bank(BankStrategy::UserMatrices { matrices: vec![neg.clone(), neg.iter().map(|r| r.iter().map(|c| -c).collect()).collect()] }, &src, &src, 0.0, 2, &cert).unwrap();
        match select_subsequence(&bank, &dec, 0.01).unwrap_err() {
            Error::BankExhausted { level, tau, achieved, .. } => {
                assert_eq!(level, 1);
                assert!((tau - FRAC_PI_2 / 2.0).abs() < 1e-12);
                assert!(achieved < 1e-12);
            }
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn uniform_split_respects_budget() {
        for &(g, n) in &[(0.01, 3usize), (0.5, 10), (0.0, 4)] {
            let e = uniform_eps(g, n);
            assert!(((n as f64) * e.ln_1p()).exp() <= 1.0 + g + 1e-15);
        }
    }
}
