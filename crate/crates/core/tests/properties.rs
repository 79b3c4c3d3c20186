use std::f64::consts::{FRAC_PI_2, SQRT_2};

use proptest::prelude::*;
use spiral_embed::bank::{build_bank, certification_set, select_subsequence, spreading_limit_estimate, BankStrategy};
use spiral_embed::glue::{g_value, GlueEmbedding};
use spiral_embed::pointset::{classify_pair, decompose, generate_annular, levels_containing, PairClass, Placement};
use spiral_embed::schedule::{build_schedule, Params, RadiiSchedule, WeightSystem};
use spiral_embed::spaces::{blend, combine, LinearMap, NormSpec, Point, Space};
use spiral_embed::theory::{pab_lower_bound, theoretical_bounds};
use spiral_embed::verify::{distortion, sweep, VerifyOptions};

fn norm_spec() -> impl Strategy<Value = NormSpec> {
    prop_oneof![
        (1.0f64..6.0).prop_map(NormSpec::lp),
        Just(NormSpec::linf()),
        (1.0f64..4.0, prop::collection::vec(0.2f64..3.0, 3)).prop_map(|(p, w)| NormSpec::WeightedLp {
            p: spiral_embed::spaces::Exponent::Finite(p),
            weights: w
        }),
    ]
}

fn vec3() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1e3f64..1e3, 3)
}

fn params() -> impl Strategy<Value = Params> {
    (0.1f64..0.6, 0.02f64..0.5, 0.001f64..0.3, 0.001f64..0.3)
        .prop_map(|(e, d, g, z)| Params::new(e, d, g, z).unwrap())
}

fn schedule() -> impl Strategy<Value = RadiiSchedule> {
    (params(), -5.0f64..5.0, 1usize..4, 0.0f64..0.2)
        .prop_map(|(p, lr1, m, margin)| build_schedule(p, lr1.exp(), m, margin).unwrap())
}

/// A full ℓ_p pipeline on a generated instance.
fn instance(
    p: f64,
    levels: usize,
    seed: u64,
    placement: Placement,
) -> (GlueEmbedding, spiral_embed::pointset::LocallyFiniteSet) {
    let params = Params::new(0.3, 0.1, 0.05, 0.05).unwrap();
    let s = build_schedule(params, 1.0, levels, 0.01).unwrap();
    let src = Space::lp(2, p).unwrap();
    let pts = generate_annular(seed, &s, 4, &src, placement).unwrap();
    let dec = decompose(&pts, &s).unwrap();
    let tgt = Space::lp(2 * (levels + 1), p).unwrap();
    let cert = certification_set(&pts, 16, seed);
    let bank =
        build_bank(BankStrategy::BlockShift { block_width: None }, &src, &tgt, 0.05, levels + 1, &cert).unwrap();
    let sel = select_subsequence(&bank, &dec, params.zeta).unwrap();
    (GlueEmbedding::new(WeightSystem::new(s), bank, sel).unwrap(), pts)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn norm_axioms(spec in norm_spec(), x in vec3(), y in vec3(), a in -50.0f64..50.0) {
        let s = Space::new(3, spec).unwrap();
        let (px, py) = (Point::new(x).unwrap(), Point::new(y).unwrap());
        let (nx, ny) = (s.norm(&px).unwrap(), s.norm(&py).unwrap());
        prop_assert!(nx >= 0.0);
        let nsum = s.norm(&px.add(&py)).unwrap();
        prop_assert!(nsum <= (nx + ny) * (1.0 + 1e-12) + 1e-12);
        let nscaled = s.norm(&px.scale(a)).unwrap();
        prop_assert!((nscaled - a.abs() * nx).abs() <= 1e-12 * (1.0 + a.abs() * nx));
    }

    #[test]
    fn norms_survive_huge_coordinates(spec in norm_spec(), x in vec3()) {
        prop_assume!(x.iter().any(|c| c.abs() > 1e-3));
        let s = Space::new(3, spec).unwrap();
        let p = Point::new(x).unwrap();
        let n = s.norm(&p).unwrap();
        let big = s.norm(&p.scale(1e300)).unwrap();
        prop_assert!(big.is_finite());
        prop_assert!((big / 1e300 - n).abs() <= 1e-12 * n);
    }

    #[test]
    fn combine_agrees_with_blend(theta in 0.0f64..std::f64::consts::PI, x in vec3(), seed in 0u64..1000) {
        let s = Space::lp(3, 2.0).unwrap();
        let rows = |k: u64| -> Vec<Vec<f64>> {
            (0..3).map(|r| (0..3).map(|c| (((r * 3 + c) as u64 * 7919 + k * 104729) % 17) as f64 - 8.0).collect()).collect()
        };
        let e = LinearMap::from_rows(rows(seed), s.clone(), s.clone()).unwrap();
        let f = LinearMap::from_rows(rows(seed + 1), s.clone(), s.clone()).unwrap();
        let px = Point::new(x).unwrap();
        let direct = combine(theta, &e, &f).unwrap().apply(&px).unwrap();
        let mixed = blend(theta.cos(), e.apply(&px).unwrap().coords(), theta.sin(), f.apply(&px).unwrap().coords());
        for (a, b) in direct.coords().iter().zip(&mixed) {
            prop_assert!((a - b).abs() <= 1e-9 * (1.0 + a.abs()));
        }
    }

    #[test]
    fn schedule_invariants(s in schedule()) {
        let eps = s.params().eps;
        let min_gap = -s.params().delta.ln();
        for i in 1..=s.levels() {
            prop_assert!(s.log_r(i) < s.log_big_r(i));
            prop_assert!(eps * (s.log_big_r(i) - s.log_r(i)) >= FRAC_PI_2 - 1e-9);
            if i >= 2 {
                prop_assert!(s.log_r(i) - s.log_big_r(i - 1) >= min_gap - 1e-9);
            }
        }
        if let Ok((r, big)) = s.radii() {
            for (l, v) in s.log_r_all().iter().zip(&r).chain(s.log_big_r_all().iter().zip(&big)) {
                prop_assert!((v.ln() - l).abs() <= 1e-12 * l.abs().max(1.0));
                prop_assert!((v - l.exp()).abs() <= 1e-12 * v);
            }
        }
    }

    #[test]
    fn weights_partition_and_support(s in schedule(), frac in 0.0f64..1.0) {
        let ws = WeightSystem::new(s.clone());
        let lo = s.log_r(1) - 2.0;
        let lt = lo + frac * (s.log_coverage() - lo);
        let mus = ws.mu_all_log(lt).unwrap();
        let sq: f64 = mus.iter().map(|m| m * m).sum();
        prop_assert!((sq - 1.0).abs() <= 1e-12);
        prop_assert!(mus.iter().filter(|&&m| m != 0.0).count() <= 2);
        for i in 1..=s.levels() {
            let t = ws.tau_log(i, lt);
            prop_assert!((0.0..=FRAC_PI_2).contains(&t));
            if lt <= s.log_r(i) { prop_assert_eq!(t, 0.0); }
            if lt >= s.log_big_r(i) { prop_assert_eq!(t, FRAC_PI_2); }
        }
        for j in 2..=s.levels() + 1 {
            if lt < s.log_r(j - 1) { prop_assert_eq!(mus[j - 1], 0.0); }
        }
        if lt > s.log_big_r(1) { prop_assert_eq!(mus[0], 0.0); }
    }

    #[test]
    fn tau_monotone_and_slow(s in schedule(), a in 0.0f64..1.0, b in 0.0f64..1.0) {
        let ws = WeightSystem::new(s.clone());
        let lo = s.log_r(1) - 1.0;
        let span = s.log_coverage() - lo;
        let (la, lb) = (lo + a.min(b) * span, lo + a.max(b) * span);
        for i in 1..=s.levels() {
            let (ta, tb) = (ws.tau_log(i, la), ws.tau_log(i, lb));
            prop_assert!(tb >= ta);
            prop_assert!(tb - ta <= s.params().eps * (lb - la) + 1e-12);
        }
    }

    #[test]
    fn decomposition_is_consistent(s in schedule(), seed in 0u64..500) {
        let space = Space::lp(2, 2.0).unwrap();
        let pts = generate_annular(seed, &s, 3, &space, Placement::Mixed).unwrap();
        let dec = decompose(&pts, &s).unwrap();
        for (k, (id, _)) in pts.points().iter().enumerate() {
            let lv = levels_containing(&s, pts.norms()[k].ln());
            prop_assert!(!lv.is_empty());
            for i in lv {
                prop_assert!(dec.level(i).members.contains(id));
            }
        }
        for l in &dec.levels {
            for d in &l.directions {
                prop_assert!((space.norm(&d.u).unwrap() - 1.0).abs() <= 1e-12);
                prop_assert!(d.taus.iter().all(|t| (0.0..=FRAC_PI_2).contains(t)));
            }
        }
    }

    #[test]
    fn far_pairs_are_far(s in schedule(), seed in 0u64..500) {
        let space = Space::lp(2, 1.0).unwrap();
        let pts = generate_annular(seed, &s, 3, &space, Placement::Mixed).unwrap();
        let all = pts.points();
        for a in 0..all.len() {
            for b in 0..all.len() {
                let (na, nb) = (pts.norms()[a], pts.norms()[b]);
                if a == b || na < nb { continue; }
                if let PairClass::Far { i, j } = classify_pair(&space, &all[a].1, &all[b].1, &s).unwrap() {
                    prop_assert!(i <= j);
                    prop_assert!(nb <= s.params().delta * na);
                }
            }
        }
    }

    #[test]
    fn bank_budget_and_sandwich(gamma in 0.0f64..0.5, count in 2usize..8, p in 1.0f64..5.0, seed in 0u64..100) {
        let src = Space::lp(2, p).unwrap();
        let tgt = Space::lp(2 * count, p).unwrap();
        let s = build_schedule(Params::uniform(0.3).unwrap(), 1.0, 2, 0.0).unwrap();
        let pts = generate_annular(seed, &s, 3, &src, Placement::Mixed).unwrap();
        let cert = certification_set(&pts, 8, seed);
        let bank = build_bank(BankStrategy::BlockShift { block_width: None }, &src, &tgt, gamma, count, &cert).unwrap();
        prop_assert!(bank.budget_product() <= 1.0 + gamma + 1e-12);
        for (n, m) in bank.maps().iter().enumerate() {
            for v in &cert {
                let nv = src.norm(v).unwrap();
                if nv == 0.0 { continue; }
                let r = tgt.norm(&m.apply(v).unwrap()).unwrap() / nv;
                prop_assert!(r >= 1.0 - 1e-12 && r <= 1.0 + bank.eps_n()[n] + 1e-12);
            }
        }
    }

    #[test]
    fn spreading_matches_closed_form_and_pab(p in 1.0f64..6.0, tau in 0.0f64..FRAC_PI_2, u0 in -1.0f64..1.0) {
        let src = Space::lp(2, p).unwrap();
        let tgt = Space::lp(12, p).unwrap();
        let raw = Point::new(vec![u0, 1.0]).unwrap();
        let u = raw.scale(1.0 / src.norm(&raw).unwrap());
        let bank = build_bank(BankStrategy::BlockShift { block_width: None }, &src, &tgt, 0.0, 6, std::slice::from_ref(&u)).unwrap();
        let (c, s) = (tau.cos(), tau.sin());
        let est = spreading_limit_estimate(&bank, &u, &[c, s], 1e-9, 3).unwrap();
        let closed = (c.powf(p) + s.powf(p)).powf(1.0 / p);
        prop_assert!((est.value - closed).abs() <= 1e-9);
        prop_assert!(est.value >= pab_lower_bound(c, s).unwrap() - 1e-9);
    }

    #[test]
    fn bound_monotonicity(p in params(), k in 0.05f64..0.95) {
        if let (Ok(a), Ok(b)) = (theoretical_bounds(&p), theoretical_bounds(&p.scaled(k).unwrap())) {
            prop_assert!(b.ratio <= a.ratio + 1e-12);
            prop_assert!(b.ratio >= 3.0 - 1e-12);
        }
    }

    #[test]
    fn g_homogeneous_and_bounded(theta in 0.0f64..std::f64::consts::PI, a in -5.0f64..5.0, u0 in -1.0f64..1.0) {
        let s = Space::lp(2, 2.0).unwrap();
        let t = Space::lp(4, 2.0).unwrap();
        let e = LinearMap::from_rows(vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![0.0, 0.0], vec![0.0, 0.0]], s.clone(), t.clone()).unwrap();
        let f = LinearMap::from_rows(vec![vec![0.0, 0.0], vec![0.0, 0.0], vec![0.6, -0.8], vec![0.8, 0.6]], s.clone(), t).unwrap();
        let raw = Point::new(vec![u0, 0.5]).unwrap();
        let u = raw.scale(1.0 / s.norm(&raw).unwrap());
        let base = g_value(theta, &u, &e, &f).unwrap();
        prop_assert!(base <= SQRT_2 + 1e-12);
        let scaled = g_value(theta, &u, &e.scaled(a), &f.scaled(a)).unwrap();
        prop_assert!((scaled - a.abs() * base).abs() <= 1e-12 * (1.0 + a.abs()));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn glue_identities(p in prop_oneof![Just(1.0), Just(2.0), Just(3.0)], levels in 1usize..4, seed in 0u64..1000) {
        let (g, pts) = instance(p, levels, seed, Placement::Mixed);
        let s = g.schedule().clone();
        let src = g.source().clone();
        for (_, x) in pts.points() {
            let nx = src.norm(x).unwrap();
            for i in levels_containing(&s, nx.ln()) {
                prop_assert_eq!(g.evaluate(x).unwrap(), g.t_map(i, x).unwrap());
            }
            if nx > 0.0 {
                let i = levels_containing(&s, nx.ln())[0];
                let tx = g.t_map(i, x).unwrap();
                let ray = g.target().norm(&tx).unwrap() / nx;
                let tau = g.weights().tau(i, nx);
                let expect = g.g(i, tau, &x.scale(1.0 / nx)).unwrap();
                prop_assert!((ray - expect).abs() <= 1e-12 * (1.0 + ray));
            }
        }
        for (_, x) in pts.points() {
            for (_, y) in pts.points() {
                let (nx, ny) = (src.norm(x).unwrap(), src.norm(y).unwrap());
                if x == y || nx < ny { continue; }
                for i in 1..=levels {
                    prop_assert!(g.decomposition_residual(i, x, y).unwrap() <= 1e-9);
                }
            }
        }
    }

    #[test]
    fn verified_sweeps_are_coherent(p in prop_oneof![Just(1.0), Just(2.0)], levels in 1usize..4, seed in 0u64..1000) {
        let (g, pts) = instance(p, levels, seed, Placement::Mixed);
        let opts = VerifyOptions::default();
        let rep = distortion(&g, &pts, &opts).unwrap();
        let checks = sweep(&g, &pts, &opts).unwrap();
        prop_assert!(rep.min_ratio <= rep.max_ratio);
        prop_assert!(rep.distortion >= 1.0);
        prop_assert!(rep.distortion <= rep.bounds.ratio + 1e-9);
        for pc in &checks {
            prop_assert!(rep.min_ratio <= pc.ratio && pc.ratio <= rep.max_ratio);
            prop_assert!(pc.lower_slack >= -1e-9 && pc.upper_slack >= -1e-9);
        }
    }
}
