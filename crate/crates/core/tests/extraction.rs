use srmkit::convex::{BoxBounds, ConvexFn};
use srmkit::costmarket::extract_cost_market;
use srmkit::error::Error;
use srmkit::outcome::OutcomeSpace;
use srmkit::scoring::{ExpectationRule, RatioRule, Report, ScoringRule};

fn expectation(n: usize, phi: Vec<Vec<f64>>, potential: ConvexFn) -> ScoringRule {
    ScoringRule::Expectation(ExpectationRule {
        outcomes: OutcomeSpace::numbered(n).unwrap(),
        phi: Some(phi),
        potential,
    })
}

fn round_trip(rule: &ScoringRule, grid: &[Report]) {
    assert!(grid.len() >= 9);
    let x = extract_cost_market(rule, grid).unwrap();
    assert!(
        x.decomposition_residual < 1e-8,
        "{}",
        x.decomposition_residual
    );
    assert!(x.round_trip_residual < 1e-8, "{}", x.round_trip_residual);
    let dev = x
        .conjugate_deviation
        .expect("differentiable potentials have a known conjugate");
    assert!(dev < 1e-6, "{dev}");
    // every trade of the rule is a trade of the extracted market
    for a in grid {
        for b in grid {
            let f = rule.trade_contract(a, b).unwrap();
            let v: Vec<f64> = x
                .share_of(b)
                .unwrap()
                .iter()
                .zip(x.share_of(a).unwrap())
                .map(|(p, q)| p - q)
                .collect();
            let cost = x.market.cost_of(x.share_of(a).unwrap(), &v).unwrap();
            let g = x.market.bundle_contract(&v, cost).unwrap();
            assert!(f.max_abs_diff(&g).unwrap() < 1e-8);
        }
    }
}

#[test]
fn quadratic_potential() {
    let rule = expectation(
        2,
        vec![vec![0.0], vec![1.0]],
        ConvexFn::Quadratic {
            dim: 1,
            scale: 1.0,
            bounds: Some(BoxBounds::new(vec![0.0], vec![1.0]).unwrap()),
        },
    );
    round_trip(&rule, &rule.report_grid(0.1, (0.0, 1.0)).unwrap());
}

#[test]
fn binary_negative_entropy() {
    let rule = expectation(2, vec![vec![0.0], vec![1.0]], ConvexFn::binary_negentropy());
    round_trip(&rule, &rule.report_grid(0.1, (0.0, 1.0)).unwrap());
}

#[test]
fn simplex_entropy_is_the_lmsr_conjugate() {
    let rule = expectation(
        3,
        vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]],
        ConvexFn::SimplexEntropy { dim: 2 },
    );
    let grid = rule.report_grid(0.1, (0.0, 1.0)).unwrap();
    round_trip(&rule, &grid);
}

#[test]
fn ratio_rule_is_not_a_cost_market() {
    let rule = ScoringRule::Ratio(RatioRule {
        outcomes: OutcomeSpace::numbered(3).unwrap(),
        phi: vec![vec![0.0], vec![1.0], vec![2.0]],
        denominator: vec![1.0, 3.0, 1.0],
        potential: ConvexFn::BinaryEntropy { lo: 0.0, hi: 2.0 },
    });
    let grid = rule.report_grid(0.2, (0.0, 2.0)).unwrap();
    let err = extract_cost_market(&rule, &grid).unwrap_err();
    assert!(
        matches!(err, Error::Extraction { ref step, .. } if step == "subgroup"),
        "{err}"
    );
}
