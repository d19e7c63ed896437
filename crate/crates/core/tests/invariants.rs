use proptest::prelude::*;

use srmkit::axioms::{check_ic, check_tn, check_wn, random_beliefs, trade_scenarios, SearchConfig};
use srmkit::contract::Contract;
use srmkit::convex::ConvexFn;
use srmkit::costmarket::{CostSpec, ShareSpace};
use srmkit::engine::MarketSession;
use srmkit::outcome::OutcomeSpace;
use srmkit::scoring::{ExpectationRule, RatioRule, Report, ScoringRule};
use srmkit::transform::Transform;
use srmkit::verdict::Verdict;

fn families() -> Vec<(&'static str, ScoringRule, SearchConfig)> {
    let coarse = |step: f64, lo: f64, hi: f64| SearchConfig {
        report_step: step,
        report_window: [lo, hi],
        ..SearchConfig::default()
    };
    vec![
        ("mode", ScoringRule::mode(4).unwrap(), coarse(1.0, 0.0, 1.0)),
        (
            "negentropy",
            ScoringRule::Expectation(ExpectationRule {
                outcomes: OutcomeSpace::numbered(2).unwrap(),
                phi: Some(vec![vec![0.0], vec![1.0]]),
                potential: ConvexFn::binary_negentropy(),
            }),
            coarse(0.05, 0.0, 1.0),
        ),
        (
            "mean",
            ScoringRule::mean(OutcomeSpace::interval(-1.0, 2.0).unwrap()).unwrap(),
            coarse(0.05, -1.0, 2.0),
        ),
        (
            "quantile",
            ScoringRule::quantile(OutcomeSpace::real_line(), 0.3, Transform::Sigmoid).unwrap(),
            coarse(0.05, -3.0, 3.0),
        ),
        (
            "expectile",
            ScoringRule::expectile(OutcomeSpace::real_line(), 0.7).unwrap(),
            coarse(0.05, -3.0, 3.0),
        ),
        (
            "ratio",
            ScoringRule::Ratio(RatioRule {
                outcomes: OutcomeSpace::numbered(3).unwrap(),
                phi: vec![vec![0.0], vec![1.0], vec![2.0]],
                denominator: vec![1.0, 3.0, 1.0],
                potential: ConvexFn::BinaryEntropy { lo: 0.0, hi: 2.0 },
            }),
            coarse(0.05, 0.0, 2.0),
        ),
        (
            "lmsr",
            ScoringRule::Cost(CostSpec::binary_lmsr(ShareSpace::Full).unwrap()),
            coarse(0.25, -4.0, 4.0),
        ),
    ]
}

fn grids() -> Vec<(&'static str, ScoringRule, Vec<Report>, SearchConfig)> {
    families()
        .into_iter()
        .map(|(name, rule, cfg)| {
            let grid = cfg.grid(&rule).unwrap();
            (name, rule, grid, cfg)
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn ledgers_telescope(picks in prop::collection::vec(any::<prop::sample::Index>(), 21)) {
        for (name, rule, grid, _) in grids() {
            let mut s = MarketSession::open(rule.clone(), picks[0].get(&grid).clone()).unwrap();
            for (i, p) in picks[1..].iter().enumerate() {
                s.execute_trade(if i % 2 == 0 { "a" } else { "b" }, p.get(&grid).clone()).unwrap();
            }
            let r = s.verify_path_independence();
            prop_assert_eq!(r.verdict, Verdict::Holds, "{}: {:?}", name, r.witnesses);
        }
    }

    #[test]
    fn no_trade_pays_in_every_outcome(a in any::<prop::sample::Index>(), b in any::<prop::sample::Index>()) {
        for (name, rule, grid, _) in grids() {
            let f = rule.trade_contract(a.get(&grid), b.get(&grid)).unwrap();
            let inf = f.inf().finite().unwrap_or(f64::NEG_INFINITY);
            prop_assert!(inf <= 1e-12, "{} has arbitrage {}", name, inf);
        }
    }

    #[test]
    fn truthful_reports_maximize_expected_score(seed in any::<u64>(), r in any::<prop::sample::Index>()) {
        for (name, rule, grid, cfg) in grids() {
            let p = &random_beliefs(&rule, 1, &cfg, seed).unwrap()[0];
            let truth = rule.property_report(p).unwrap();
            let gain = rule.expected_score(&truth, p).unwrap() - rule.expected_score(r.get(&grid), p).unwrap();
            prop_assert!(gain >= -1e-9, "{}: {}", name, gain);
        }
    }

    #[test]
    fn cashless_projection_is_idempotent(v in prop::collection::vec(-5.0f64..5.0, 2..6)) {
        let c = Contract::finite(v.clone()).unwrap();
        let (d0, cash) = c.project_cashless().unwrap();
        let (d00, zero) = d0.project_cashless().unwrap();
        prop_assert!(zero.abs() < 1e-12);
        prop_assert!(d00.max_abs_diff(&d0).unwrap() < 1e-15);
        let back = d0.add(&Contract::constant(&OutcomeSpace::numbered(v.len()).unwrap(), cash)).unwrap();
        prop_assert!(back.max_abs_diff(&c).unwrap() < 1e-12);
    }

    #[test]
    fn fenchel_young(x in 0.02f64..0.98, theta in -6.0f64..6.0) {
        for g in [ConvexFn::binary_negentropy(), ConvexFn::quadratic(1), ConvexFn::BinaryEntropy { lo: 0.0, hi: 2.0 }] {
            let gx = g.value(&[x]).unwrap();
            let (conj, _) = g.conjugate(&[theta]).unwrap();
            prop_assert!(gx + conj >= x * theta - 1e-9);
            let d = g.gradient(&[x]).unwrap();
            let (at, _) = g.conjugate(&d).unwrap();
            prop_assert!((gx + at - x * d[0]).abs() < 1e-8 * (1.0 + at.abs()));
        }
        let lmsr = ConvexFn::binary_lmsr();
        let (neg, _) = lmsr.conjugate(&[x]).unwrap();
        let h = x * x.ln() + (1.0 - x) * (1.0 - x).ln();
        prop_assert!((neg - h).abs() < 1e-8);
    }

    #[test]
    fn trade_neutralization_implies_weak_neutralization(seed in any::<u64>()) {
        for (name, rule, grid, cfg) in grids() {
            let set = trade_scenarios(&grid, 12, seed);
            let wn = check_wn(&rule, &grid, &set, &cfg).unwrap();
            let tn = check_tn(&rule, &grid, &set, &cfg).unwrap();
            for s in &tn.scenarios {
                if s.verdict.is_positive() {
                    prop_assert!(wn.scenario(&s.key).is_some_and(Verdict::is_positive), "{} {}", name, s.key);
                }
            }
        }
    }
}

#[test]
fn best_responses_match_the_property() {
    for (name, rule, _, cfg) in grids() {
        let beliefs = random_beliefs(&rule, 100, &cfg, 11).unwrap();
        let r = check_ic(&rule, &beliefs, &cfg).unwrap();
        assert!(
            r.verdict.is_positive(),
            "{name}: {:?} {:?}",
            r.witnesses,
            r.notes
        );
        if !rule.has_finite_reports() {
            for p in &beliefs {
                let a = rule.best_response(p).unwrap();
                let b = rule.property_report(p).unwrap();
                let tol = 1e-6
                    * (1.0
                        + b.as_point()
                            .unwrap()
                            .iter()
                            .fold(0.0f64, |m, v| m.max(v.abs())));
                assert!(a.distance(&b) <= tol, "{name}: {a} vs {b}");
            }
        }
    }
}
