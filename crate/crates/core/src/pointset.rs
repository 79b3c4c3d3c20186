//! Finite point sets in the source space, their annulus decomposition into
//! overlapping shells `M_i`, and the direction bookkeeping `U_i`, `T_i(u)`.

use std::collections::HashSet;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::schedule::{log_of, RadiiSchedule, WeightSystem};
use crate::spaces::{NormSpec, Point, Space};

/// Two directions are merged in `U_i` when all coordinates agree this closely.
pub const DIRECTION_DEDUP_TOL: f64 = 1e-12;

/// A finite set of distinct points, each tagged with an id.
#[derive(Clone, Debug, PartialEq)]
pub struct LocallyFiniteSet {
    space: Space,
    points: Vec<(usize, Point)>,
    norms: Vec<f64>,
}

/// On-disk form: `{dim, norm, points: [[...], ...]}`. Ids are positions.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PointSetFile {
    pub dim: usize,
    pub norm: NormSpec,
    pub points: Vec<Vec<f64>>,
}

impl LocallyFiniteSet {
    pub fn new(space: Space, points: Vec<(usize, Point)>) -> Result<Self> {
        let mut seen_coords = HashSet::new();
        let mut seen_ids = HashSet::new();
        for (id, p) in &points {
            space.check(p)?;
            // -0.0 and 0.0 are the same point
            let key: Vec<u64> = p.coords().iter().map(|c| (c + 0.0).to_bits()).collect();
            if !seen_coords.insert(key) {
                return Err(Error::InvalidPoint(format!("point {id} duplicates an earlier point")));
            }
            if !seen_ids.insert(*id) {
                return Err(Error::InvalidPoint(format!("duplicate id {id}")));
            }
        }
        let norms = points.iter().map(|(_, p)| space.norm_unchecked(p.coords())).collect::<Vec<_>>();
        if let Some(n) = norms.iter().find(|n| !n.is_finite()) {
            return Err(Error::InvalidPoint(format!("norm {n} is not finite")));
        }
        Ok(LocallyFiniteSet { space, points, norms })
    }

    /// Ids are assigned in order, starting at 0.
    pub fn from_points(space: Space, points: Vec<Point>) -> Result<Self> {
        LocallyFiniteSet::new(space, points.into_iter().enumerate().collect())
    }

    pub fn space(&self) -> &Space {
        &self.space
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[(usize, Point)] {
        &self.points
    }

    pub fn norms(&self) -> &[f64] {
        &self.norms
    }

    pub fn includes_origin(&self) -> bool {
        self.points.iter().any(|(_, p)| p.is_zero())
    }

    pub fn max_norm(&self) -> f64 {
        self.norms.iter().copied().fold(0.0, f64::max)
    }

    pub fn to_file(&self) -> PointSetFile {
        PointSetFile {
            dim: self.space.dim(),
            norm: self.space.norm_spec().clone(),
            points: self.points.iter().map(|(_, p)| p.coords().to_vec()).collect(),
        }
    }

    pub fn from_file(file: PointSetFile) -> Result<Self> {
        let space = Space::new(file.dim, file.norm)?;
        let pts = file.points.into_iter().map(|c| space.point(c)).collect::<Result<Vec<_>>>()?;
        LocallyFiniteSet::from_points(space, pts)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        LocallyFiniteSet::from_file(serde_json::from_str(&text)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, serde_json::to_string_pretty(&self.to_file())?)?;
        Ok(())
    }
}

/// A unit direction `u ∈ U_i` with its angle set `T_i(u)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Direction {
    pub u: Point,
    pub taus: Vec<f64>,
}

/// One shell `M_i` and its directions.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LevelSet {
    pub level: usize,
    /// Ids of input points in `M_i`. The origin is listed only if it is an input point.
    pub members: Vec<usize>,
    pub directions: Vec<Direction>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AnnulusDecomposition {
    pub levels: Vec<LevelSet>,
}

impl AnnulusDecomposition {
    pub fn level(&self, i: usize) -> &LevelSet {
        &self.levels[i - 1]
    }

    pub fn direction_count(&self) -> usize {
        self.levels.iter().map(|l| l.directions.len()).sum()
    }
}

/// Levels `i` with `R_{i-1} < ‖x‖ ≤ r_{i+1}` (every level, for the origin).
pub fn levels_containing(sched: &RadiiSchedule, log_norm: f64) -> Vec<usize> {
    (1..=sched.levels())
        .filter(|&i| {
            log_norm == f64::NEG_INFINITY || (sched.log_big_r(i - 1) < log_norm && log_norm <= sched.log_r(i + 1))
        })
        .collect()
}

/// Builds `M_i`, `U_i`, and `T_i(u)` for every level. The origin is adjoined
/// to every shell whether or not it is an input point.
pub fn decompose(pts: &LocallyFiniteSet, sched: &RadiiSchedule) -> Result<AnnulusDecomposition> {
    let logs: Vec<f64> = pts.norms.iter().map(|&n| log_of(n)).collect();
    for &l in &logs {
        sched.check_covered(l)?;
    }
    let ws = WeightSystem::new(sched.clone());
    let space = pts.space();
    let origin = Point::zeros(space.dim());
    let has_origin = pts.includes_origin();

    let mut levels = Vec::with_capacity(sched.levels());
    for i in 1..=sched.levels() {
        let members: Vec<usize> = (0..pts.len())
            .filter(|&k| levels_containing(sched, logs[k]).contains(&i))
            .collect();
        // (point, norm, log norm)
        let mut cand: Vec<(&Point, f64, f64)> =
            members.iter().map(|&k| (&pts.points[k].1, pts.norms[k], logs[k])).collect();
        if !has_origin {
            cand.push((&origin, 0.0, f64::NEG_INFINITY));
        }
        let (log_r, log_big_r) = (sched.log_r(i), sched.log_big_r(i));
        let mut raw: Vec<(Vec<f64>, f64)> = Vec::new();
        for (a, &(x, nx, lx)) in cand.iter().enumerate() {
            if lx <= log_r {
                continue;
            }
            let tau = ws.tau_log(i, lx);
            for (b, &(y, ny, ly)) in cand.iter().enumerate() {
                if a == b || ly > log_big_r || nx < ny {
                    continue;
                }
                let d = x.sub(y);
                let nd = space.norm_unchecked(d.coords());
                raw.push((d.coords().iter().map(|c| c / nd).collect(), tau));
            }
        }
        levels.push(LevelSet {
            level: i,
            members: members.iter().map(|&k| pts.points[k].0).collect(),
            directions: merge_directions(raw),
        });
    }
    Ok(AnnulusDecomposition { levels })
}

fn merge_directions(mut raw: Vec<(Vec<f64>, f64)>) -> Vec<Direction> {
    raw.sort_by(|a, b| {
        a.0.iter()
            .zip(&b.0)
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let mut out: Vec<Direction> = Vec::new();
    for (u, tau) in raw {
        match out.last_mut() {
            Some(last)
                if last
                    .u
                    .coords()
                    .iter()
                    .zip(&u)
                    .all(|(a, b)| (a - b).abs() <= DIRECTION_DEDUP_TOL) =>
            {
                last.taus.push(tau)
            }
            _ => out.push(Direction { u: Point::from_raw(u), taus: vec![tau] }),
        }
    }
    for d in &mut out {
        d.taus.sort_by(f64::total_cmp);
        d.taus.dedup_by(|a, b| (*a - *b).abs() <= DIRECTION_DEDUP_TOL);
    }
    out
}

/// Where generated points land within each level.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Placement {
    /// Norms in the plateau `[R_{i-1}, r_i]` of each level.
    Plateau,
    /// Norms in the ramp `(r_i, R_i)` of each level.
    Ramp,
    /// Alternating plateau and ramp within each level.
    Mixed,
}

/// Deterministic test instance: `per_level` points per level with random
/// directions and log-uniform norms, plus the origin (id 0).
pub fn generate_annular(
    seed: u64,
    sched: &RadiiSchedule,
    per_level: usize,
    space: &Space,
    placement: Placement,
) -> Result<LocallyFiniteSet> {
    if per_level == 0 {
        return Err(Error::InvalidParams("per_level must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = vec![Point::zeros(space.dim())];
    for i in 1..=sched.levels() {
        for k in 0..per_level {
            let on_plateau = match placement {
                Placement::Plateau => true,
                Placement::Ramp => false,
                Placement::Mixed => k % 2 == 0,
            };
            let (lo, hi) = if on_plateau {
                let lo = if i == 1 { sched.log_r(1) - 3.0 } else { sched.log_big_r(i - 1) };
                (lo, sched.log_r(i))
            } else {
                (sched.log_r(i), sched.log_big_r(i))
            };
            let frac = 0.001 + 0.998 * rng.random::<f64>();
            let log_t = lo + frac * (hi - lo);
            let t = log_t.exp();
            if !t.is_finite() {
                return Err(Error::Overflow { what: format!("generated norm at level {i}"), log_value: log_t });
            }
            let dir = loop {
                let g: Vec<f64> = (0..space.dim()).map(|_| rng.sample(StandardNormal)).collect();
                let n = space.norm_unchecked(&g);
                if n > 1e-6 {
                    break g.into_iter().map(|c| c / n).collect::<Vec<f64>>();
                }
            };
            points.push(Point::new(dir.into_iter().map(|c| c * t).collect())?);
        }
    }
    LocallyFiniteSet::from_points(space.clone(), points)
}

/// The dichotomy for an ordered pair `‖x‖ ≥ ‖y‖`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "class", rename_all = "snake_case")]
pub enum PairClass {
    /// Both points lie in `M_level` (least such level).
    SameLevel { level: usize },
    /// `y ∈ A_{R_{i-1}, R_i}` and `x ∈ A_{r_{j+1}, r_{j+2}}` with `i ≤ j`.
    Far { i: usize, j: usize },
}

impl PairClass {
    pub fn label(&self) -> String {
        match self {
            PairClass::SameLevel { level } => format!("same:{level}"),
            PairClass::Far { i, j } => format!("far:{i}:{j}"),
        }
    }
}

pub fn classify_pair(space: &Space, x: &Point, y: &Point, sched: &RadiiSchedule) -> Result<PairClass> {
    classify_log_norms(sched, log_of(space.norm(x)?), log_of(space.norm(y)?))
}

/// Classification from `ln ‖x‖ ≥ ln ‖y‖`.
pub fn classify_log_norms(sched: &RadiiSchedule, log_x: f64, log_y: f64) -> Result<PairClass> {
    sched.check_covered(log_x)?;
    if log_x < log_y {
        return Err(Error::InvalidParams("classify_pair expects ‖x‖ ≥ ‖y‖".into()));
    }
    let m = sched.levels();
    let ix = (1..=m)
        .find(|&i| log_x <= sched.log_r(i + 1))
        .expect("covered norms lie below r_{m+1}");
    if log_y == f64::NEG_INFINITY || log_y > sched.log_big_r(ix - 1) {
        return Ok(PairClass::SameLevel { level: ix });
    }
    let i = (1..ix).find(|&i| log_y <= sched.log_big_r(i)).expect("y lies below R_{ix-1}");
    Ok(PairClass::Far { i, j: ix - 1 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schedule::{build_schedule, Params};

    fn setup(levels: usize) -> (Space, RadiiSchedule) {
        let p = Params::new(0.5, 0.1, 0.01, 0.01).unwrap();
        (Space::lp(2, 2.0).unwrap(), build_schedule(p, 1.0, levels, 0.01).unwrap())
    }

    fn at_log_norm(space: &Space, dir: [f64; 2], log_t: f64) -> Point {
        let p = Point::new(dir.to_vec()).unwrap();
        let n = space.norm(&p).unwrap();
        p.scale(log_t.exp() / n)
    }

    #[test]
    fn origin_only() {
        let (space, s) = setup(3);
        let pts = LocallyFiniteSet::from_points(space.clone(), vec![Point::zeros(2)]).unwrap();
        let d = decompose(&pts, &s).unwrap();
        for l in &d.levels {
            assert_eq!(l.members, vec![0]);
            assert!(l.directions.is_empty());
        }
    }

    #[test]
    fn plateau_pair_direction() {
        let (space, s) = setup(2);
        // y on plateau 1 (‖y‖ ≤ R_1), x on plateau 2 (r_1 < ‖x‖ ≤ r_2)
        let y = at_log_norm(&space, [1.0, 0.0], s.log_r(1) - 0.5);
        let x = at_log_norm(&space, [0.0, 1.0], 0.5 * (s.log_big_r(1) + s.log_r(2)));
        let pts = LocallyFiniteSet::from_points(space.clone(), vec![x.clone(), y.clone()]).unwrap();
        let d = decompose(&pts, &s).unwrap();
        let lvl = d.level(1);
        assert_eq!(lvl.members, vec![0, 1]);
        let diff = x.sub(&y);
        let u = diff.scale(1.0 / space.norm(&diff).unwrap());
        let hit = lvl
            .directions
            .iter()
            .find(|dir| dir.u.coords().iter().zip(u.coords()).all(|(a, b)| (a - b).abs() < 1e-12))
            .expect("direction (x-y)/|x-y| present");
        let ws = WeightSystem::new(s.clone());
        assert_eq!(hit.taus, vec![ws.tau(1, space.norm(&x).unwrap())]);
        // the synthetic origin contributes x/‖x‖ as well
        assert_eq!(lvl.directions.len(), 2);
        for dir in &lvl.directions {
            assert!((space.norm(&dir.u).unwrap() - 1.0).abs() < 1e-12);
            assert!(dir.taus.iter().all(|t| (0.0..=std::f64::consts::FRAC_PI_2).contains(t)));
        }
    }

    #[test]
    fn boundary_norm_excluded() {
        let (space, s) = setup(3);
        // ‖x‖ = R_1 exactly in log terms → not in M_2
        let members = levels_containing(&s, s.log_big_r(1));
        assert_eq!(members, vec![1]);
        let members = levels_containing(&s, s.log_big_r(1) + 1e-9);
        assert_eq!(members, vec![1, 2]);
        let _ = space;
    }

    #[test]
    fn out_of_range_points_rejected() {
        let (space, s) = setup(1);
        let x = at_log_norm(&space, [1.0, 1.0], s.log_coverage() + 0.01);
        let pts = LocallyFiniteSet::from_points(space, vec![x]).unwrap();
        assert!(matches!(decompose(&pts, &s), Err(Error::OutOfScheduleRange { .. })));
    }

    #[test]
    fn generator_is_deterministic_and_counts() {
        let (space, s) = setup(3);
        let a = generate_annular(7, &s, 2, &space, Placement::Mixed).unwrap();
        let b = generate_annular(7, &s, 2, &space, Placement::Mixed).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 7);
        assert!(a.includes_origin());
        let c = generate_annular(8, &s, 2, &space, Placement::Mixed).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn plateau_placement_lands_on_plateaus() {
        let (space, s) = setup(3);
        let pts = generate_annular(3, &s, 5, &space, Placement::Plateau).unwrap();
        for &n in &pts.norms()[1..] {
            let l = n.ln();
            let ok = (1..=3).any(|i| s.log_big_r(i - 1) <= l && l <= s.log_r(i));
            assert!(ok, "norm e^{l} not on a plateau");
        }
        let pts = generate_annular(3, &s, 5, &space, Placement::Ramp).unwrap();
        for &n in &pts.norms()[1..] {
            let l = n.ln();
            assert!((1..=3).any(|i| s.log_r(i) < l && l < s.log_big_r(i)));
        }
    }

    #[test]
    fn classification_examples() {
        let (_, s) = setup(3);
        // both in (R_1, r_3]
        let c = classify_log_norms(&s, s.log_r(3) - 0.1, s.log_big_r(1) + 0.1).unwrap();
        assert_eq!(c, PairClass::SameLevel { level: 2 });
        // y ≤ R_1, x > r_3: a full level between
        let c = classify_log_norms(&s, s.log_r(3) + 0.1, s.log_big_r(1) - 0.1).unwrap();
        assert_eq!(c, PairClass::Far { i: 1, j: 2 });
        // origin pairs with the least level containing x
        let c = classify_log_norms(&s, s.log_big_r(2) + 0.1, f64::NEG_INFINITY).unwrap();
        assert_eq!(c, PairClass::SameLevel { level: 2 });
        let c = classify_log_norms(&s, s.log_r(1) - 0.1, f64::NEG_INFINITY).unwrap();
        assert_eq!(c, PairClass::SameLevel { level: 1 });
        assert!(classify_log_norms(&s, 0.0, 1.0).is_err());
        assert!(classify_log_norms(&s, s.log_coverage() + 1.0, 0.0).is_err());
    }

    #[test]
    fn duplicates_rejected() {
        let space = Space::lp(2, 1.0).unwrap();
        let p = Point::new(vec![1.0, 2.0]).unwrap();
        assert!(LocallyFiniteSet::from_points(space.clone(), vec![p.clone(), p]).is_err());
        let z = Point::new(vec![0.0, -0.0]).unwrap();
        assert!(LocallyFiniteSet::from_points(space, vec![Point::zeros(2), z]).is_err());
    }

    #[test]
    fn file_round_trip() {
        let (space, s) = setup(2);
        let pts = generate_annular(1, &s, 3, &space, Placement::Mixed).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pts.json");
        pts.save(&path).unwrap();
        assert_eq!(LocallyFiniteSet::load(&path).unwrap(), pts);
    }
}
