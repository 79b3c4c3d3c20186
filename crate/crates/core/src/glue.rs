//! The glued embedding `Ψ(x) = Σ μ_i(‖x‖) Ψ_i(x)`, its two-term level maps
//! `T`, and the angle function `g(θ, u) = ‖cos θ E u + sin θ F u‖`.

use std::f64::consts::FRAC_PI_2;

use serde::Serialize;

use crate::bank::{EmbeddingBank, SelectionResult};
use crate::error::{Error, Result};
use crate::pointset::LocallyFiniteSet;
use crate::schedule::{cos_sin, log_of, RadiiSchedule, Region, WeightSystem};
use crate::spaces::{blend, LinearMap, Point, Space};

/// Tolerance on `‖u‖ = 1` for [`g_value`].
pub const UNIT_TOL: f64 = 1e-12;

#[derive(Clone, Debug)]
pub struct GlueEmbedding {
    ws: WeightSystem,
    bank: EmbeddingBank,
    selection: SelectionResult,
}

/// Embedded image of one point.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Image {
    pub id: usize,
    pub coords: Vec<f64>,
}

impl GlueEmbedding {
    pub fn new(ws: WeightSystem, bank: EmbeddingBank, selection: SelectionResult) -> Result<Self> {
        let m = ws.levels();
        if selection.chosen.len() != m + 1 {
            return Err(Error::InvalidParams(format!(
                "selection has {} maps, a {m}-level schedule needs {}",
                selection.chosen.len(),
                m + 1
            )));
        }
        if selection.chosen.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidParams("chosen indices must strictly increase".into()));
        }
        if let Some(&last) = selection.chosen.last() {
            if last >= bank.len() {
                return Err(Error::InvalidParams(format!("chosen index {last} outside a bank of {}", bank.len())));
            }
        }
        let gamma = ws.schedule().params().gamma;
        if bank.gamma() > gamma {
            return Err(Error::InvalidParams(format!(
                "bank budget {} exceeds the schedule's gamma {gamma}",
                bank.gamma()
            )));
        }
        Ok(GlueEmbedding { ws, bank, selection })
    }

    pub fn weights(&self) -> &WeightSystem {
        &self.ws
    }

    pub fn schedule(&self) -> &RadiiSchedule {
        self.ws.schedule()
    }

    pub fn bank(&self) -> &EmbeddingBank {
        &self.bank
    }

    pub fn selection(&self) -> &SelectionResult {
        &self.selection
    }

    pub fn source(&self) -> &Space {
        self.bank.source()
    }

    pub fn target(&self) -> &Space {
        self.bank.target()
    }

    pub fn levels(&self) -> usize {
        self.ws.levels()
    }

    /// `Ψ_i`, for `1 ≤ i ≤ levels + 1`.
    pub fn psi(&self, i: usize) -> &LinearMap {
        self.bank.map(self.selection.chosen[i - 1])
    }

    /// `Ψ(x)`.
    pub fn evaluate(&self, x: &Point) -> Result<Point> {
        let nx = self.source().norm(x)?;
        Ok(Point::from_raw(self.evaluate_log(x.coords(), log_of(nx))?))
    }

    pub(crate) fn evaluate_log(&self, x: &[f64], log_norm: f64) -> Result<Vec<f64>> {
        match self.schedule().locate_log(log_norm)? {
            Region::Plateau(i) => Ok(self.psi(i).apply_slice(x)),
            Region::Ramp(i) => {
                let (c, s) = self.ws.angle_weights_log(i, log_norm);
                Ok(blend(c, &self.psi(i).apply_slice(x), s, &self.psi(i + 1).apply_slice(x)))
            }
        }
    }

    /// `T(x) = cos τ_i(‖x‖)·Ψ_i x + sin τ_i(‖x‖)·Ψ_{i+1} x`.
    pub fn t_map(&self, i: usize, x: &Point) -> Result<Point> {
        self.check_level(i)?;
        let nx = self.source().norm(x)?;
        Ok(Point::from_raw(self.t_map_log(i, x.coords(), log_of(nx))?))
    }

    pub(crate) fn t_map_log(&self, i: usize, x: &[f64], log_norm: f64) -> Result<Vec<f64>> {
        self.schedule().check_covered(log_norm)?;
        let (c, s) = self.ws.angle_weights_log(i, log_norm);
        Ok(blend(c, &self.psi(i).apply_slice(x), s, &self.psi(i + 1).apply_slice(x)))
    }

    /// `g(θ, u)` with `E = Ψ_i`, `F = Ψ_{i+1}`.
    pub fn g(&self, i: usize, theta: f64, u: &Point) -> Result<f64> {
        self.check_level(i)?;
        g_value(theta, u, self.psi(i), self.psi(i + 1))
    }

    /// Relative residual of
    /// `T(x) − T(y) = G_σ(x−y) + 2 sin((τ(‖x‖) − τ(‖y‖))/2)·G_θ y`
    /// with `σ = τ(‖x‖)`, `θ = π/2 + (τ(‖x‖) + τ(‖y‖))/2`, measured as
    /// `‖lhs − rhs‖ / (‖x‖ + ‖y‖)`.
    pub fn decomposition_residual(&self, i: usize, x: &Point, y: &Point) -> Result<f64> {
        self.check_level(i)?;
        let src = self.source();
        let (nx, ny) = (src.norm(x)?, src.norm(y)?);
        if nx < ny {
            return Err(Error::InvalidParams("decomposition_residual expects ‖x‖ ≥ ‖y‖".into()));
        }
        let (lx, ly) = (log_of(nx), log_of(ny));
        let tx = self.t_map_log(i, x.coords(), lx)?;
        let ty = self.t_map_log(i, y.coords(), ly)?;
        let (tau_x, tau_y) = (self.ws.tau_log(i, lx), self.ws.tau_log(i, ly));
        let (e, f) = (self.psi(i), self.psi(i + 1));
        let d = x.sub(y);
        let g_sigma = blend(tau_x.cos(), &e.apply_slice(d.coords()), tau_x.sin(), &f.apply_slice(d.coords()));
        let theta = FRAC_PI_2 + 0.5 * (tau_x + tau_y);
        let k = 2.0 * (0.5 * (tau_x - tau_y)).sin();
        let g_theta = blend(theta.cos(), &e.apply_slice(y.coords()), theta.sin(), &f.apply_slice(y.coords()));
        let resid: Vec<f64> = tx
            .iter()
            .zip(&ty)
            .zip(g_sigma.iter().zip(&g_theta))
            .map(|((a, b), (gs, gt))| (a - b) - (gs + k * gt))
            .collect();
        let scale = nx + ny;
        Ok(if scale == 0.0 { 0.0 } else { self.target().norm_unchecked(&resid) / scale })
    }

    pub fn embed_all(&self, pts: &LocallyFiniteSet) -> Result<Vec<Image>> {
        pts.points()
            .iter()
            .zip(pts.norms())
            .map(|((id, p), &n)| Ok(Image { id: *id, coords: self.evaluate_log(p.coords(), log_of(n))? }))
            .collect()
    }

    fn check_level(&self, i: usize) -> Result<()> {
        if i == 0 || i > self.levels() {
            return Err(Error::InvalidParams(format!("level {i} outside 1..={}", self.levels())));
        }
        Ok(())
    }
}

/// `g(θ, u) = ‖cos θ·E u + sin θ·F u‖` for a unit vector `u`.
pub fn g_value(theta: f64, u: &Point, e: &LinearMap, f: &LinearMap) -> Result<f64> {
    let src = e.source();
    if f.source().dim() != src.dim() {
        return Err(Error::DimensionMismatch { expected: src.dim(), found: f.source().dim() });
    }
    if f.target().dim() != e.target().dim() {
        return Err(Error::DimensionMismatch { expected: e.target().dim(), found: f.target().dim() });
    }
    let nu = src.norm(u)?;
    if (nu - 1.0).abs() > UNIT_TOL {
        return Err(Error::InvalidPoint(format!("g needs a unit vector, got norm {nu}")));
    }
    Ok(g_unchecked(theta, u.coords(), e, f))
}

pub(crate) fn g_unchecked(theta: f64, u: &[f64], e: &LinearMap, f: &LinearMap) -> f64 {
    let (c, s) = if (0.0..=FRAC_PI_2).contains(&theta) { cos_sin(theta) } else { (theta.cos(), theta.sin()) };
    e.target().norm_unchecked(&blend(c, &e.apply_slice(u), s, &f.apply_slice(u)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bank::{build_bank, certification_set, select_subsequence, BankStrategy};
    use crate::pointset::{decompose, generate_annular, Placement};
    use crate::schedule::{build_schedule, Params};
    use std::f64::consts::{FRAC_PI_4, PI, SQRT_2};

    fn pipeline(levels: usize, placement: Placement) -> (GlueEmbedding, LocallyFiniteSet) {
        let p = Params::new(0.4, 0.1, 0.01, 0.01).unwrap();
        let s = build_schedule(p, 1.0, levels, 0.01).unwrap();
        let src = Space::lp(2, 2.0).unwrap();
        let pts = generate_annular(9, &s, 6, &src, placement).unwrap();
        let dec = decompose(&pts, &s).unwrap();
        let tgt = Space::lp(2 * (levels + 2), 2.0).unwrap();
        let cert = certification_set(&pts, 10, 2);
        let bank =
            build_bank(BankStrategy::BlockShift { block_width: None }, &src, &tgt, 0.01, levels + 2, &cert).unwrap();
        let sel = select_subsequence(&bank, &dec, 0.01).unwrap();
        (GlueEmbedding::new(WeightSystem::new(s), bank, sel).unwrap(), pts)
    }

    #[test]
    fn origin_maps_to_origin() {
        let (g, _) = pipeline(2, Placement::Mixed);
        assert!(g.evaluate(&Point::zeros(2)).unwrap().is_zero());
    }

    #[test]
    fn evaluate_matches_t_map_on_shells() {
        let (g, pts) = pipeline(3, Placement::Mixed);
        let s = g.schedule();
        for (_, x) in pts.points() {
            let lx = log_of(g.source().norm(x).unwrap());
            for i in crate::pointset::levels_containing(s, lx) {
                assert_eq!(g.evaluate(x).unwrap(), g.t_map(i, x).unwrap());
            }
        }
    }

    #[test]
    fn plateau_points_use_one_map() {
        let (g, pts) = pipeline(2, Placement::Plateau);
        for (_, x) in pts.points() {
            let r = g.schedule().locate(g.source().norm(x).unwrap()).unwrap();
            let Region::Plateau(i) = r else { panic!("{r:?}") };
            assert_eq!(g.evaluate(x).unwrap(), g.psi(i).apply(x).unwrap());
        }
    }

    #[test]
    fn t_map_clamps() {
        let (g, _) = pipeline(2, Placement::Mixed);
        let s = g.schedule();
        let low = Point::new(vec![0.0, (s.log_r(2) - 0.5).exp()]).unwrap();
        assert_eq!(g.t_map(2, &low).unwrap(), g.psi(2).apply(&low).unwrap());
        let high = Point::new(vec![(s.log_big_r(1) + 0.5).exp(), 0.0]).unwrap();
        assert_eq!(g.t_map(1, &high).unwrap(), g.psi(2).apply(&high).unwrap());
        let far = Point::new(vec![(s.log_coverage() + 1.0).exp(), 0.0]).unwrap();
        assert!(matches!(g.evaluate(&far), Err(Error::OutOfScheduleRange { .. })));
    }

    #[test]
    fn decomposition_identity() {
        let (g, pts) = pipeline(3, Placement::Ramp);
        let all = pts.points();
        for a in 1..all.len() {
            for b in 1..all.len() {
                let (x, y) = (&all[a].1, &all[b].1);
                if a == b || g.source().norm(x).unwrap() < g.source().norm(y).unwrap() {
                    continue;
                }
                for i in 1..=g.levels() {
                    assert!(g.decomposition_residual(i, x, y).unwrap() <= 1e-12);
                }
            }
        }
    }

    #[test]
    fn g_cases() {
        let s = Space::lp(2, 2.0).unwrap();
        let e = LinearMap::identity(&s);
        let u = Point::new(vec![0.6, 0.8]).unwrap();
        assert_eq!(g_value(0.0, &u, &e, &e.neg()).unwrap(), 1.0);
        assert!(g_value(FRAC_PI_4, &u, &e, &e.neg()).unwrap() < 1e-15);
        assert!((g_value(3.0 * FRAC_PI_4, &u, &e, &e.neg()).unwrap() - SQRT_2).abs() < 1e-12);
        let half = e.scaled(-2.5);
        let f = e.scaled(0.3);
        let a = g_value(1.1, &u, &half, &f.scaled(-2.5)).unwrap();
        let b = g_value(1.1, &u, &e, &f).unwrap();
        assert!((a - 2.5 * b).abs() < 1e-12);
        assert!(g_value(PI, &Point::new(vec![1.0, 1.0]).unwrap(), &e, &e).is_err());
    }
}
