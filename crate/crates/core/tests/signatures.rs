//! Which axioms each family satisfies, on small grids.

use srmkit::axioms::*;
use srmkit::convex::ConvexFn;
use srmkit::ext::ExtReal;
use srmkit::outcome::OutcomeSpace;
use srmkit::scoring::{ExpectationRule, RatioRule, Report, ScoringRule};
use srmkit::transform::Transform;
use srmkit::verdict::{Basis, Verdict};

fn cfg(step: f64) -> SearchConfig {
    SearchConfig {
        report_step: step,
        scenarios: 200,
        beliefs: 40,
        ..SearchConfig::default()
    }
}

fn binary_negentropy() -> ScoringRule {
    ScoringRule::Expectation(ExpectationRule {
        outcomes: OutcomeSpace::numbered(2).unwrap(),
        phi: Some(vec![vec![0.0], vec![1.0]]),
        potential: ConvexFn::binary_negentropy(),
    })
}

fn ratio(denominator: Vec<f64>) -> ScoringRule {
    ScoringRule::Ratio(RatioRule {
        outcomes: OutcomeSpace::numbered(3).unwrap(),
        phi: vec![vec![0.0], vec![1.0], vec![2.0]],
        denominator,
        potential: ConvexFn::BinaryEntropy { lo: 0.0, hi: 2.0 },
    })
}

#[test]
fn mode_market() {
    let rule = ScoringRule::mode(7).unwrap();
    let c = cfg(0.01);
    let grid = c.grid(&rule).unwrap();
    let set = trade_scenarios(&grid, 300, 1);
    assert!(set.exhaustive);
    assert_eq!(set.scenarios.len(), 294);
    let wcl = check_wcl(&rule, &grid[0], &grid, &c).unwrap();
    assert_eq!(
        (wcl.verdict, wcl.margin),
        (Verdict::Holds, Some(ExtReal::Finite(1.0)))
    );
    assert_eq!(check_arb(&rule, &grid, &c).unwrap().verdict, Verdict::Holds);
    let wn = check_wn(&rule, &grid, &set, &c).unwrap();
    assert_eq!((wn.verdict, wn.basis), (Verdict::Fails, Basis::Exhaustive));
    let tn = check_tn(&rule, &grid, &set, &c).unwrap();
    assert_eq!(tn.verdict, Verdict::Fails);
    let cases = random_btb_cases(&rule, &grid, 20, &c, 3).unwrap();
    assert_eq!(
        check_btb(&rule, &grid, &cases, &c).unwrap().verdict,
        Verdict::Fails
    );
}

#[test]
fn bounded_expectation_market() {
    let rule = binary_negentropy();
    let c = cfg(0.01);
    let grid = c.grid(&rule).unwrap();
    assert!(grid.len() >= 50);
    let wcl = check_wcl(&rule, &Report::scalar(0.5), &grid, &c).unwrap();
    assert_eq!(wcl.verdict, Verdict::Holds);
    assert!((wcl.margin.unwrap().finite().unwrap() - 2f64.ln()).abs() < 1e-12);
    let set = trade_scenarios(&grid, 200, 2);
    let tn = check_tn(&rule, &grid, &set, &c).unwrap();
    assert_eq!(tn.verdict, Verdict::HoldsAtBudget, "{:?}", tn.witnesses);
    let pn = check_pn(&rule, &grid, &portfolio_scenarios(&grid, 3, 200, 2), &c).unwrap();
    assert_eq!(pn.verdict, Verdict::HoldsAtBudget, "{:?}", pn.witnesses);
    let cases = random_btb_cases(&rule, &grid, 20, &c, 3).unwrap();
    let btb = check_btb(&rule, &grid, &cases, &c).unwrap();
    assert_eq!(btb.verdict, Verdict::HoldsAtBudget, "{:?}", btb.witnesses);
}

#[test]
fn mean_on_the_line_has_unbounded_loss() {
    let rule = ScoringRule::mean(OutcomeSpace::real_line()).unwrap();
    let c = cfg(0.1);
    let grid = c.grid(&rule).unwrap();
    assert_eq!(
        check_wcl(&rule, &Report::scalar(0.0), &grid, &c)
            .unwrap()
            .verdict,
        Verdict::Fails
    );
}

#[test]
fn quantile_market() {
    let rule = ScoringRule::quantile(OutcomeSpace::real_line(), 0.5, Transform::Sigmoid).unwrap();
    let c = cfg(0.1);
    let grid = c.grid(&rule).unwrap();
    let set = trade_scenarios(&grid, 200, 4);
    let wn = check_wn(&rule, &grid, &set, &c).unwrap();
    assert_eq!(wn.verdict, Verdict::Fails);
    assert!(
        !wn.scenarios
            .iter()
            .any(|s| s.verdict == Verdict::Inconclusive),
        "{:?}",
        wn.notes
    );
    assert_eq!(
        check_wcl(&rule, &Report::scalar(0.0), &grid, &c)
            .unwrap()
            .verdict,
        Verdict::Holds
    );
    let cases = random_btb_cases(&rule, &grid, 20, &c, 3).unwrap();
    let btb = check_btb(&rule, &grid, &cases, &c).unwrap();
    assert_eq!(btb.verdict, Verdict::HoldsAtBudget, "{:?}", btb.witnesses);
}

#[test]
fn expectile_market() {
    let rule = ScoringRule::expectile(OutcomeSpace::real_line(), 0.3).unwrap();
    let c = cfg(0.1);
    let grid = c.grid(&rule).unwrap();
    let wn = check_wn(&rule, &grid, &trade_scenarios(&grid, 200, 5), &c).unwrap();
    assert_eq!(wn.verdict, Verdict::HoldsAtBudget, "{:?}", wn.witnesses);
}

#[test]
fn ratio_market() {
    let rule = ratio(vec![1.0, 3.0, 1.0]);
    let c = cfg(0.02);
    let grid = c.grid(&rule).unwrap();
    assert!(grid.len() >= 50);
    let set = trade_scenarios(&grid, 200, 6);
    let wn = check_wn(&rule, &grid, &set, &c).unwrap();
    assert_eq!(wn.verdict, Verdict::HoldsAtBudget, "{:?}", wn.witnesses);
    let tn = check_tn(&rule, &grid, &set, &c).unwrap();
    assert_eq!(tn.verdict, Verdict::Fails);
    assert!(matches!(tn.basis, Basis::ClosedForm(_)));
}

#[test]
fn ratio_market_tie_blocks_every_trade() {
    // the held trade loses the same amount on outcomes whose price ratios
    // 0 and 1/2 straddle the state, and no single trade raises both
    let rule = ratio(vec![1.0, 2.0, 1.0]);
    let c = cfg(0.01);
    let grid = c.grid(&rule).unwrap();
    let set = ScenarioSet {
        scenarios: vec![Scenario::single(
            Report::scalar(0.46),
            Report::scalar(1.54),
            Report::scalar(0.12),
        )],
        exhaustive: false,
    };
    let wn = check_wn(&rule, &grid, &set, &c).unwrap();
    assert_eq!(wn.verdict, Verdict::Fails);
    let subject = Subject::Rule {
        rule: &rule,
        reports: &grid,
    };
    let (_, ok) = replay_witness(subject, &wn.witnesses[0], &c).unwrap();
    assert!(ok);
}
