mod common;

use autobid_core::analysis::horseshoe::{chua_poincare_config, chua_section, Quadrangles};
use autobid_core::analysis::{find_periodic_orbit, largest_lyapunov, poincare_returns, LyapunovConfig};
use autobid_core::chua::{augmented_field, augmented_initial, chua_as_target, chua_field, diode, AugmentedChua, ChuaField, ChuaParams};
use autobid_core::continuous::{integrate, FnField, IntegratorConfig, Stepper};
use autobid_core::discrete::{DiscreteMap, Model, Update};
use autobid_core::market::{self, ContinuumSegment, Density, MarketInstance};
use autobid_core::reduction::gadgets::build_negation_gadget;
use autobid_core::reduction::{compile, verify_simulation, AffineMap, CompileOptions};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(1.0)
}

fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let inner: f64 = (1..n).map(|k| f(a + h * k as f64) * if k % 2 == 1 { 4.0 } else { 2.0 }).sum();
    (f(a) + f(b) + inner) * h / 3.0
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn allocation_is_a_split(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (inst, m) = common::random_instance(&mut rng);
        let alloc = market::allocate(&inst, &m).unwrap();
        for (j, (row, pay)) in alloc.fractions().iter().zip(alloc.payments()).enumerate() {
            let total: f64 = row.iter().sum();
            prop_assert!(row.iter().all(|x| (0.0..=1.0).contains(x)));
            prop_assert!(total == 0.0 || (total - 1.0).abs() < 1e-15, "item {j}: {total}");
            prop_assert_eq!(total == 0.0, alloc.items[j].winners.is_empty());
            for i in 0..inst.n_bidders {
                prop_assert!(pay[i] <= row[i] * m[i] * inst.items[j].values[i], "item {j} bidder {i}");
            }
        }
    }

    #[test]
    fn oracle_agrees_on_fresh_instances(seed in any::<u64>()) {
        let bad = common::oracle_mismatches(4, seed);
        prop_assert!(bad.is_empty(), "{:?}", bad);
    }

    #[test]
    fn symmetric_instances_pay_symmetric_utilities(
        base in prop::collection::vec(0.1f64..3.0, 2..=4),
        m in 0.1f64..3.0,
    ) {
        let n = base.len();
        let rows: Vec<Vec<f64>> = (0..n).map(|j| (0..n).map(|i| base[(j + n - i) % n]).collect()).collect();
        let inst = MarketInstance::from_value_rows(n, &rows);
        let u = market::utility(&inst, &vec![m; n]).unwrap();
        prop_assert!(u.iter().all(|x| close(*x, u[0], 1e-12)), "{:?}", u);
    }

    #[test]
    fn closed_form_segments_match_quadrature(
        c in 0.1f64..5.0,
        v in 0.5f64..3.0,
        a in 1.05f64..2.5,
        width in 0.01f64..1.5,
    ) {
        let b = a + width;
        for d in [Density::Constant { c }, Density::Negation { c }] {
            let rho = |p: f64| d.rho(p, v);
            let want_u = simpson(|p| (v - p) * rho(p), a, b, 4000);
            let want_m = simpson(rho, a, b, 4000);
            let want_p = simpson(|p| p * rho(p), a, b, 4000);
            prop_assert!(close(d.utility_integral(a, b, v).unwrap(), want_u, 1e-8));
            prop_assert!(close(d.mass_integral(a, b, v).unwrap(), want_m, 1e-8));
            prop_assert!(close(d.price_integral(a, b, v).unwrap(), want_p, 1e-8));
        }
    }

    #[test]
    fn symmetric_closed_form_matches_instance(v in 1.05f64..4.0, eta in 0.05f64..3.0, frac in 0.001f64..1.0) {
        let m = 3.0 * v * frac;
        for update in [Update::Entropic, Update::Euclidean, Update::TruncatedEntropic] {
            let closed = DiscreteMap::new(update, eta, Model::Symmetric { v }).unwrap();
            let inst = MarketInstance::from_valuation_matrix(&[vec![v, 1.0], vec![1.0, v]]);
            let full = DiscreteMap::new(update, eta, Model::Market(inst)).unwrap();
            let (Ok(a), Ok(b)) = (closed.map_1d(m), full.step(&[m, m])) else { continue };
            prop_assert_eq!(b[0], b[1]);
            prop_assert!(close(a, b[0], 1e-12), "{} {}", a, b[0]);
        }
    }

    #[test]
    fn fixed_point_stability_follows_the_linear_threshold(v in 1.1f64..3.0, eta in 0.05f64..1.5) {
        let map = DiscreteMap::new(Update::Entropic, eta, Model::Symmetric { v }).unwrap();
        let slope = 1.0 - eta * v;
        prop_assume!((slope.abs() - 1.0).abs() > 0.05);
        if slope.abs() < 1.0 {
            let mut m = v * (1.0 + 1e-3);
            for _ in 0..5000 {
                m = map.map_1d(m).unwrap();
            }
            prop_assert!((m - v).abs() < 1e-9, "eta {} v {}: {}", eta, v, m);
        } else {
            let d0 = 1e-8 * v;
            let d1 = (map.map_1d(v + d0).unwrap() - v).abs();
            prop_assert!(d1 > d0, "eta {} v {}", eta, v);
        }
    }

    #[test]
    fn fixed_point_found_at_v(v in 1.2f64..3.0, eta in 0.2f64..2.5) {
        let map = DiscreteMap::new(Update::Entropic, eta, Model::Symmetric { v }).unwrap();
        let m = find_periodic_orbit(|m| map.map_1d(m), 1, [0.5 * v + 0.01, 1.5 * v]).unwrap();
        prop_assert!(m.is_some_and(|m| (m - v).abs() < 1e-9), "{:?}", m);
    }

    #[test]
    fn period_three_points_are_distinct(eta in 1.6f64..2.6) {
        let map = DiscreteMap::new(Update::Entropic, eta, Model::Symmetric { v: 2.0 }).unwrap();
        let f = |m: f64| map.map_1d(m);
        if let Some(m) = find_periodic_orbit(f, 3, [0.001, 4.0]).unwrap() {
            let p = [m, f(m).unwrap(), f(f(m).unwrap()).unwrap()];
            prop_assert!((p[0] - p[1]).abs() >= 1e-6 && (p[1] - p[2]).abs() >= 1e-6 && (p[0] - p[2]).abs() >= 1e-6, "{:?}", p);
        }
    }

    #[test]
    fn truncated_map_settles_on_period_two(eta in 1.15f64..3.0, m0 in 0.2f64..3.0) {
        // above eta = ln 3 the orbit 1 -> e^eta -> (below 1, floored) 1 closes
        let map = DiscreteMap::new(Update::TruncatedEntropic, eta, Model::Symmetric { v: 2.0 }).unwrap();
        let mut m = m0;
        for _ in 0..500 {
            m = map.map_1d(m).unwrap();
        }
        let next = map.map_1d(m).unwrap();
        let (lo, hi) = if m < next { (m, next) } else { (next, m) };
        prop_assert_eq!(lo, 1.0);
        prop_assert!(close(hi, eta.exp(), 1e-12), "{} vs {}", hi, eta.exp());
    }

    #[test]
    fn negation_gadget_is_exact(lam in 1.0f64..1e4, m in 1.05f64..1.95, bar in 1.05f64..1.95) {
        let mut inst = MarketInstance::new(1);
        let b = build_negation_gadget(&mut inst, lam, 0).unwrap();
        let u = market::utility(&inst, &[m, bar]).unwrap();
        prop_assert!((u[b] - lam * (3.0 - m - bar)).abs() <= 1e-12 * lam, "{} vs {}", u[b], lam * (3.0 - m - bar));
        prop_assert_eq!(u[0], 0.0);
    }

    #[test]
    fn negation_gadget_does_not_interfere(seed in any::<u64>(), lam in 1.0f64..1e4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.random_range(1..=4);
        let rows: Vec<Vec<f64>> = (0..rng.random_range(1..=5))
            .map(|_| (0..n).map(|_| rng.random_range(0.0..3.0)).collect())
            .collect();
        let before = MarketInstance::from_value_rows(n, &rows);
        let mut after = before.clone();
        let input = rng.random_range(0..n);
        build_negation_gadget(&mut after, lam, input).unwrap();
        let m: Vec<f64> = (0..=n).map(|_| rng.random_range(1.05..1.95)).collect();
        let u0 = market::utility(&before, &m[..n]).unwrap();
        let u1 = market::utility(&after, &m).unwrap();
        prop_assert_eq!(&u0[..], &u1[..n]);
    }

    #[test]
    fn box_encoding_round_trips(
        lo in prop::collection::vec(-50.0f64..50.0, 1..5),
        width in prop::collection::vec(0.01f64..100.0, 4),
        t in prop::collection::vec(0.0f64..1.0, 4),
    ) {
        let bounds: Vec<[f64; 2]> = lo.iter().zip(&width).map(|(l, w)| [*l, l + w]).collect();
        let enc = AffineMap::onto_box(&bounds);
        let x: Vec<f64> = bounds.iter().zip(&t).map(|(b, t)| b[0] + t * (b[1] - b[0])).collect();
        let y = enc.encode(&x);
        prop_assert!(y.iter().all(|y| (1.1 - 1e-12..=1.9 + 1e-12).contains(y)));
        let back = enc.decode(&y);
        for (a, b) in x.iter().zip(&back) {
            prop_assert!(close(*a, *b, 1e-12), "{} {}", a, b);
        }
    }

    #[test]
    fn diode_is_odd(x in -1e4f64..1e4) {
        let p = ChuaParams::default();
        prop_assert_eq!(diode(-x, &p), -diode(x, &p));
    }

    #[test]
    fn augmented_on_slice_is_chua(
        x in -2.5f64..2.5, y in -0.45f64..0.45, z in -9.5f64..9.5, lam in 1.0f64..1e4,
    ) {
        let p = ChuaParams::default();
        let aug = augmented_field(&augmented_initial(&[x, y, z]), &p, lam);
        let raw = chua_field(&[x, y, z], &p);
        for k in 0..3 {
            prop_assert!((aug[k] - raw[k]).abs() <= 1e-12 * raw[k].abs().max(10.0), "{} {}", aug[k], raw[k]);
            prop_assert_eq!(aug[3 + k], 0.0);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn oscillator_energy_is_conserved(x0 in -2.0f64..2.0, v0 in -2.0f64..2.0) {
        prop_assume!(x0.abs() + v0.abs() > 0.1);
        let f = FnField::new(2, |x: &[f64], dx: &mut [f64]| {
            dx[0] = x[1];
            dx[1] = -x[0];
        });
        let e0 = x0 * x0 + v0 * v0;
        for cfg in [IntegratorConfig::default(), IntegratorConfig::rk4(0.01), IntegratorConfig::etd4(0.01)] {
            let traj = integrate(&f, &[x0, v0], 100.0, &cfg).unwrap();
            let drift = traj.states.iter().map(|s| (s[0] * s[0] + s[1] * s[1] - e0).abs()).fold(0.0, f64::max);
            prop_assert!(drift <= 1e-6 * e0, "{:?}: drift {}", cfg.method, drift);
        }
    }
}

#[test]
fn fixed_step_methods_are_fourth_order() {
    // pendulum: nonlinear, smooth, no closed form needed
    let f = FnField::new(2, |x: &[f64], dx: &mut [f64]| {
        dx[0] = x[1];
        dx[1] = -x[0].sin();
    });
    for make in [IntegratorConfig::rk4 as fn(f64) -> IntegratorConfig, IntegratorConfig::etd4] {
        let end = |h: f64| integrate(&f, &[1.0, 0.0], 5.0, &make(h)).unwrap().last().unwrap().1.to_vec();
        let reference = end(1e-4);
        let err = |h: f64| {
            let e = end(h);
            (e[0] - reference[0]).abs().max((e[1] - reference[1]).abs())
        };
        let order = (err(0.1) / err(0.05)).log2();
        assert!(order >= 3.5, "{:?}: observed order {order}", make(0.1).method);
    }
}

#[test]
fn compiled_chua_matches_hand_written_field_at_every_rate() {
    for lam in [10.0, 100.0, 1000.0] {
        let worst = common::compiled_chua_discrepancy(lam, 1000, 21);
        assert!(worst <= 1e-9, "lambda {lam}: {worst}");
    }
}

#[test]
fn simulation_error_shrinks_with_rate() {
    let target = chua_as_target();
    let mut last = f64::INFINITY;
    for lam in [30.0, 100.0, 1000.0, 10_000.0] {
        let compiled = compile(&target, &CompileOptions { lambda: Some(lam), ..Default::default() }).unwrap();
        let r = verify_simulation(&compiled, &target, &[0.1, 0.1, 0.1], 5.0, 0.01).unwrap();
        assert!(r.sup_error <= last, "lambda {lam}: {} after {last}", r.sup_error);
        last = r.sup_error;
    }
}

/// Time of the second downward crossing of `x = 1`, found on one uninterrupted
/// integration.
fn second_crossing(field: &ChuaField, cfg: &IntegratorConfig, x0: &[f64]) -> f64 {
    let mut st = Stepper::new(field, *cfg, 0.0, x0).unwrap();
    let mut seen = 0;
    let mut before = x0[0] - 1.0;
    let mut buf = [0.0; 3];
    loop {
        st.step(f64::INFINITY).unwrap();
        let after = st.state()[0] - 1.0;
        if before > 0.0 && after <= 0.0 {
            seen += 1;
            if seen == 2 {
                let (mut lo, mut hi) = (st.previous().0, st.t());
                while hi - lo > 1e-13 {
                    let mid = 0.5 * (lo + hi);
                    st.interpolate(mid, &mut buf);
                    if buf[0] > 1.0 {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                // the dense output is only a guess; finish with Newton steps
                // on integrations that end exactly at the trial time
                let mut t = 0.5 * (lo + hi);
                for _ in 0..3 {
                    let end = integrate(field, x0, t, cfg).unwrap();
                    let x = end.last().unwrap().1;
                    t -= (x[0] - 1.0) / chua_field(x, &field.params)[0];
                }
                return t;
            }
        }
        before = after;
    }
}

#[test]
fn return_times_add_up() {
    let field = ChuaField { params: ChuaParams::default() };
    let cfg = chua_poincare_config();
    let reference = IntegratorConfig::dopri5(1e-13, 1e-14, 0.005);
    let section = chua_section();
    let q = Quadrangles::default();
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for _ in 0..50 {
        // random point inside one of the two quadrangles
        let corners = if rng.random_bool(0.5) { &q.points[0..4] } else { &q.points[4..8] };
        let w: Vec<f64> = (0..4).map(|_| rng.random::<f64>()).collect();
        let s: f64 = w.iter().sum();
        let y = corners.iter().zip(&w).map(|(c, w)| c[0] * w / s).sum::<f64>();
        let z = corners.iter().zip(&w).map(|(c, w)| c[1] * w / s).sum::<f64>();
        let x0 = [1.0, y, z];
        let r = poincare_returns(&field, &cfg, &section, &x0, 2).unwrap();
        let total = r[0].tau + r[1].tau;
        // the reference flight runs at tighter tolerances than the map under test
        let direct = second_crossing(&field, &reference, &x0);
        let gap = (direct - total).abs();
        assert!(gap <= 1e-7, "from {x0:?}: {direct} in one flight, {total} in two");
    }
}

#[test]
fn lyapunov_estimate_is_insensitive_to_its_knobs() {
    let field = AugmentedChua::new(ChuaParams::default(), 100.0).unwrap();
    let integ = IntegratorConfig::for_field(&field);
    let x0 = augmented_initial(&[0.1, 0.1, 0.1]);
    let base = LyapunovConfig::default();
    let run = |cfg: LyapunovConfig| largest_lyapunov(&field, &x0, &cfg, &integ).unwrap().exponent;
    let reference = run(base);
    let half_d0 = run(LyapunovConfig { d0: 0.5 * base.d0, ..base });
    let half_dt = run(LyapunovConfig { renorm_dt: 0.5 * base.renorm_dt, ..base });
    assert!((half_d0 - reference).abs() <= 0.01, "{reference} vs {half_d0}");
    assert!((half_dt - reference).abs() <= 0.01, "{reference} vs {half_dt}");
}

#[test]
fn shared_segment_splits_between_owners() {
    // two owners of one unit segment on [0, 2]: below the lower cap both share
    let mut inst = MarketInstance::new(2);
    inst.add_segment(ContinuumSegment {
        owners: vec![0, 1],
        value: 1.0,
        support: [0.0, 2.0],
        density: Density::Constant { c: 1.0 },
    });
    let u = market::utility(&inst, &[0.5, 1.5]).unwrap();
    let shared = 0.5 * (0.5 - 0.125);
    assert!((u[0] - shared).abs() < 1e-15);
    assert!((u[1] - (shared + 1.0 - 0.5 * (1.5 * 1.5 - 0.25))).abs() < 1e-15);
}
