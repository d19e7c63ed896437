use srmkit::axioms::{check_arb, check_wcl, replay_witness, SearchConfig, Subject};
use srmkit::convex::ConvexFn;
use srmkit::costmarket::{check_rule_subgroup, CostMarket, CostSpec, ShareSpace, ShareTrade};
use srmkit::outcome::OutcomeSpace;
use srmkit::scoring::{FiniteRule, Report, ScoringRule};
use srmkit::verdict::{Verdict, Witness};

#[test]
fn lmsr_price_bound_over_seeded_trials() {
    let spec = CostSpec::binary_lmsr(ShareSpace::Full).unwrap();
    let r = spec.price_bound_check(1000, 42);
    assert_eq!(r.verdict, Verdict::HoldsAtBudget);
    assert_eq!(r.budget, 1000);
    assert!(r.margin.unwrap().finite().unwrap() > 0.0);
    let step = spec.cost_of(&[0.0], &[1.0]).unwrap();
    assert!((step - ((1.0 + 1f64.exp()) / 2.0).ln()).abs() < 1e-12);
}

#[test]
fn lattice_lmsr_is_a_subgroup_and_mode_is_not() {
    let spec = CostSpec::binary_lmsr(ShareSpace::integers(1, 8)).unwrap();
    let rule = ScoringRule::Cost(spec);
    let grid = rule.report_grid(1.0, (0.0, 1.0)).unwrap();
    assert_eq!(
        check_rule_subgroup(&rule, &grid).unwrap().verdict,
        Verdict::HoldsAtBudget
    );

    let mode = ScoringRule::mode(3).unwrap();
    let grid = mode.report_grid(1.0, (0.0, 1.0)).unwrap();
    let r = check_rule_subgroup(&mode, &grid).unwrap();
    assert_eq!(r.verdict, Verdict::Fails);
    let subject = Subject::Rule {
        rule: &mode,
        reports: &grid,
    };
    assert!(
        replay_witness(subject, &r.witnesses[0], &SearchConfig::default())
            .unwrap()
            .1
    );
}

#[test]
fn portfolio_of_share_trades_cancels() {
    let mut m =
        CostMarket::new(CostSpec::binary_lmsr(ShareSpace::Full).unwrap(), vec![0.0]).unwrap();
    let mut held = Vec::new();
    for v in [2.0, -1.0, 3.0] {
        let (cost, _) = m.trade(&[v]).unwrap();
        held.push(ShareTrade {
            bundle: vec![v],
            cost,
        });
    }
    let n = m.neutralizing_bundle(&held).unwrap();
    assert_eq!(n.bundle, vec![-4.0]);
    assert!(n.improves());
}

#[test]
fn failing_witnesses_replay() {
    let cfg = SearchConfig::default();
    let dominated = ScoringRule::Finite(FiniteRule {
        outcomes: OutcomeSpace::numbered(2).unwrap(),
        reports: vec!["low".into(), "high".into()],
        payoffs: vec![vec![0.0, 1.0], vec![1.0, 2.0]],
    });
    let grid = cfg.grid(&dominated).unwrap();
    let arb = check_arb(&dominated, &grid, &cfg).unwrap();
    assert_eq!(arb.verdict, Verdict::Fails);
    let subject = Subject::Rule {
        rule: &dominated,
        reports: &grid,
    };
    for w in &arb.witnesses {
        assert!(replay_witness(subject, w, &cfg).unwrap().1);
    }

    let mean = ScoringRule::mean(OutcomeSpace::real_line()).unwrap();
    let grid = SearchConfig {
        report_step: 0.5,
        ..cfg.clone()
    }
    .grid(&mean)
    .unwrap();
    let wcl = check_wcl(&mean, &Report::scalar(0.0), &grid, &cfg).unwrap();
    assert_eq!(wcl.verdict, Verdict::Fails);
    let Witness::Divergence { losses, .. } = &wcl.witnesses[0] else {
        panic!()
    };
    assert_eq!(losses[..4], [1.0, 3.0, 5.0, 7.0]);
    let subject = Subject::Rule {
        rule: &mean,
        reports: &grid,
    };
    assert!(replay_witness(subject, &wcl.witnesses[0], &cfg).unwrap().1);

    let hinge = CostSpec::new(
        OutcomeSpace::numbered(2).unwrap(),
        vec![vec![0.0], vec![1.0]],
        ConvexFn::SmoothHinge,
        ShareSpace::Full,
    )
    .unwrap();
    let q = hinge.check_quasi_open(200, 1);
    assert_eq!(q.verdict, Verdict::Fails);
    for w in &q.witnesses {
        assert!(replay_witness(Subject::Market(&hinge), w, &cfg).unwrap().1);
    }
}
