//! Additive-group checks on sets of cashless payoff vectors.

use nalgebra::DMatrix;

use crate::contract::Contract;
use crate::error::{Error, Result};
use crate::numeric;
use crate::scoring::{Report, ScoringRule};
use crate::verdict::{AxiomReport, Basis, Check, Verdict, Witness};

use super::{CostSpec, ShareSpace};

const MATCH_TOL: f64 = 1e-9;

/// Which sums and negations a sample is expected to contain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SubgroupWindow {
    /// The sample is the whole set.
    Complete,
    /// The sample contains every member of Euclidean norm below the radius.
    Ball(f64),
}

impl SubgroupWindow {
    fn requires(&self, v: &[f64]) -> bool {
        match self {
            SubgroupWindow::Complete => true,
            SubgroupWindow::Ball(r) => numeric::norm(v) < *r - MATCH_TOL,
        }
    }

    /// The radius within which a truncated lattice of bundles yields every
    /// cashless payoff: `sigma_min(P Phi B) * (bound + 1)`, where `P` removes
    /// the mean and `B` holds the lattice basis.
    pub fn for_lattice(spec: &CostSpec) -> Result<Self> {
        let ShareSpace::Lattice { basis, bound } = &spec.shares else {
            return Err(Error::InvalidSearch(
                "window needs a lattice share space".into(),
            ));
        };
        let n = spec.phi.len();
        let m = DMatrix::from_fn(n, basis.len(), |y, j| numeric::dot(&spec.phi[y], &basis[j]));
        let means = m.row_mean();
        let centered = DMatrix::from_fn(n, basis.len(), |y, j| m[(y, j)] - means[j]);
        let sigma = centered.singular_values().min();
        Ok(SubgroupWindow::Ball(sigma * (*bound as f64 + 1.0)))
    }
}

fn project(c: &Contract) -> Result<Vec<f64>> {
    let v = c.as_finite().ok_or(Error::RequiresFiniteOutcomes)?;
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    Ok(v.iter().map(|x| x - mean).collect())
}

fn max_abs(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

fn push_unique(set: &mut Vec<Vec<f64>>, v: Vec<f64>) {
    if !set.iter().any(|s| max_abs(s, &v) <= MATCH_TOL) {
        set.push(v);
    }
}

pub(crate) fn nearest_member(set: &[Vec<f64>], v: &[f64]) -> f64 {
    set.iter()
        .map(|s| max_abs(s, v))
        .fold(f64::INFINITY, f64::min)
}

/// Cashless parts of the score vectors `S(r, .)` over the given reports.
pub fn score_sample(rule: &ScoringRule, reports: &[Report]) -> Result<Vec<Vec<f64>>> {
    let mut out = Vec::new();
    for r in reports {
        push_unique(&mut out, project(&rule.score_contract(r)?)?);
    }
    Ok(out)
}

/// Cashless parts of every trade `S(r', .) - S(r, .)` between the reports.
pub fn difference_sample(rule: &ScoringRule, reports: &[Report]) -> Result<Vec<Vec<f64>>> {
    let h = score_sample(rule, reports)?;
    let mut out = Vec::new();
    for a in &h {
        for b in &h {
            push_unique(&mut out, numeric::sub(b, a));
        }
    }
    Ok(out)
}

/// Looks for a member whose negation, or a pair whose sum, is missing from
/// the sample. With `scores`, also checks that every translate
/// `scores - {h}` equals the sample.
pub fn check_subgroup(
    sample: &[Vec<f64>],
    scores: Option<&[Vec<f64>]>,
    window: SubgroupWindow,
) -> AxiomReport {
    let mut witnesses = Vec::new();
    let mut cases = 0;
    'outer: for (i, d) in sample.iter().enumerate() {
        let neg: Vec<f64> = d.iter().map(|v| -v).collect();
        if window.requires(&neg) {
            cases += 1;
            let gap = nearest_member(sample, &neg);
            if gap > MATCH_TOL {
                witnesses.push(Witness::Subgroup {
                    d: d.clone(),
                    d2: None,
                    margin: gap,
                });
                break;
            }
        }
        for d2 in &sample[i..] {
            let sum = numeric::add(d, d2);
            if !window.requires(&sum) {
                continue;
            }
            cases += 1;
            let gap = nearest_member(sample, &sum);
            if gap > MATCH_TOL {
                witnesses.push(Witness::Subgroup {
                    d: d.clone(),
                    d2: Some(d2.clone()),
                    margin: gap,
                });
                break 'outer;
            }
        }
    }
    if witnesses.is_empty() {
        if let Some(h) = scores {
            'translates: for h0 in h {
                for d in sample {
                    let shifted = numeric::add(h0, d);
                    if !(window.requires(d) && window.requires(&shifted)) {
                        continue;
                    }
                    cases += 1;
                    let gap = nearest_member(h, &shifted);
                    if gap > MATCH_TOL {
                        witnesses.push(Witness::Subgroup {
                            d: d.clone(),
                            d2: Some(h0.clone()),
                            margin: gap,
                        });
                        break 'translates;
                    }
                }
            }
        }
    }
    let (verdict, note) = match (witnesses.is_empty(), window) {
        (false, _) => (Verdict::Fails, None),
        (true, SubgroupWindow::Complete) => (Verdict::Holds, None),
        (true, SubgroupWindow::Ball(r)) => (
            Verdict::HoldsAtBudget,
            Some(format!("closure checked within radius {r:.6}")),
        ),
    };
    let mut report =
        AxiomReport::new(Check::Subgroup, verdict, Basis::Exhaustive).with_budget(cases);
    if let Some(n) = note {
        report = report.with_note(n);
    }
    report.witnesses = witnesses;
    report
}

/// Subgroup check for the trades of a rule with a finite or lattice report
/// space.
pub fn check_rule_subgroup(rule: &ScoringRule, reports: &[Report]) -> Result<AxiomReport> {
    let window = match rule {
        ScoringRule::Cost(c) if matches!(c.shares, ShareSpace::Lattice { .. }) => {
            SubgroupWindow::for_lattice(c)?
        }
        _ => SubgroupWindow::Complete,
    };
    let h = score_sample(rule, reports)?;
    let d = difference_sample(rule, reports)?;
    Ok(check_subgroup(&d, Some(&h), window))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mode_differences_are_not_closed_under_addition() {
        let rule = ScoringRule::mode(3).unwrap();
        let reports = rule.report_grid(1.0, (0.0, 1.0)).unwrap();
        let d = difference_sample(&rule, &reports).unwrap();
        assert_eq!(d.len(), 7);
        let r = check_subgroup(&d, None, SubgroupWindow::Complete);
        assert_eq!(r.verdict, Verdict::Fails);
        let Witness::Subgroup {
            d,
            d2: Some(d2),
            margin,
        } = &r.witnesses[0]
        else {
            panic!("expected a sum witness")
        };
        assert!(*margin > 0.1);
        let sum = numeric::add(d, d2);
        assert!(nearest_member(&difference_sample(&rule, &reports).unwrap(), &sum) > 0.1);
    }

    #[test]
    fn lattice_lmsr_differences_form_a_group() {
        let spec = CostSpec::binary_lmsr(ShareSpace::integers(1, 8)).unwrap();
        let rule = ScoringRule::Cost(spec.clone());
        let reports = rule.report_grid(1.0, (0.0, 1.0)).unwrap();
        assert_eq!(reports.len(), 17);
        let r = check_rule_subgroup(&rule, &reports).unwrap();
        assert_eq!(r.verdict, Verdict::HoldsAtBudget, "{:?}", r.witnesses);
        assert!(r.budget > 100);
        let SubgroupWindow::Ball(radius) = SubgroupWindow::for_lattice(&spec).unwrap() else {
            unreachable!()
        };
        assert!((radius - 9.0 / 2f64.sqrt()).abs() < 1e-12);
    }
}
