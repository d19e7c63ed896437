//! The `figure` subcommand: payoff curves and market-state tables as
//! tab-separated columns.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use srmkit::costmarket::{CostSpec, ShareSpace};
use srmkit::outcome::{Outcome, OutcomeSpace};
use srmkit::scoring::ScoringRule;

use crate::config::{MarketSpec, ReportSpec};
use crate::error::CliError;
use crate::report::TOOL;

pub const BUNDLED: &str = include_str!("../configs/figures.toml");

/// Sample points on a real outcome axis, endpoints included.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axis {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
}

/// A payoff curve: `S(score, .)` or the sum of `F(to | from)` over trades.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Curve {
    pub label: String,
    #[serde(default)]
    pub score: Option<ReportSpec>,
    #[serde(default)]
    pub trades: Vec<[ReportSpec; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Panel {
    pub name: String,
    pub market: MarketSpec,
    #[serde(default)]
    pub ys: Option<Axis>,
    #[serde(rename = "curve")]
    pub curves: Vec<Curve>,
}

/// States `q = -bound..=bound` of the single-security integer-lattice LMSR,
/// with cost, price and the conjugate at that price.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Lattice {
    pub name: String,
    pub bound: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FigureConfig {
    #[serde(default, rename = "panel")]
    pub panels: Vec<Panel>,
    #[serde(default, rename = "lattice")]
    pub lattices: Vec<Lattice>,
}

/// One emitted data file.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    /// First entry of each row is the x value (outcome or share state).
    pub rows: Vec<Vec<f64>>,
    /// Outcome labels for finite panels, used in place of the x value.
    pub row_labels: Option<Vec<String>>,
}

impl Table {
    pub fn to_tsv(&self, sha256: &str) -> String {
        let mut out = format!(
            "# srmkit figure {}\n# tool: {TOOL}\n# config-sha256: {sha256}\n",
            self.name
        );
        out.push_str(&self.columns.join("\t"));
        out.push('\n');
        for (i, row) in self.rows.iter().enumerate() {
            let mut cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            if let Some(labels) = &self.row_labels {
                cells[0] = labels[i].clone();
            }
            let _ = writeln!(out, "{}", cells.join("\t"));
        }
        out
    }
}

pub fn parse(text: &str) -> Result<(FigureConfig, String), CliError> {
    let cfg: FigureConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
    Ok((cfg, hex::encode(Sha256::digest(text.as_bytes()))))
}

fn outcomes(
    space: &OutcomeSpace,
    ys: Option<Axis>,
) -> Result<(Vec<Outcome>, Vec<f64>, Option<Vec<String>>), CliError> {
    if let Some(labels) = space.labels() {
        let ys: Vec<Outcome> = space.outcomes().into_iter().flatten().collect();
        let xs = (0..ys.len()).map(|i| i as f64).collect();
        return Ok((ys, xs, Some(labels.to_vec())));
    }
    let axis = ys.ok_or_else(|| {
        CliError::Config("a real-outcome panel needs ys = { lo, hi, points }".into())
    })?;
    if axis.points < 2 || !(axis.lo < axis.hi) {
        return Err(CliError::Config(
            "ys needs at least two points on a nonempty range".into(),
        ));
    }
    let xs: Vec<f64> = (0..axis.points)
        .map(|i| axis.lo + (axis.hi - axis.lo) * i as f64 / (axis.points - 1) as f64)
        .collect();
    Ok((xs.iter().map(|&y| Outcome::Real(y)).collect(), xs, None))
}

fn curve_values(rule: &ScoringRule, c: &Curve, ys: &[Outcome]) -> Result<Vec<f64>, CliError> {
    let mut total = vec![0.0; ys.len()];
    let mut add = |contract: srmkit::contract::Contract| -> Result<(), CliError> {
        for (t, y) in total.iter_mut().zip(ys) {
            *t += contract.eval(y)?;
        }
        Ok(())
    };
    if let Some(r) = &c.score {
        add(rule.score_contract(&r.resolve(rule)?)?)?;
    }
    for [from, to] in &c.trades {
        add(rule.trade_contract(&from.resolve(rule)?, &to.resolve(rule)?)?)?;
    }
    if c.score.is_none() && c.trades.is_empty() {
        return Err(CliError::Config(format!(
            "curve '{}' has neither a score nor trades",
            c.label
        )));
    }
    Ok(total)
}

pub fn render_panel(p: &Panel) -> Result<Table, CliError> {
    let rule = p.market.rule()?;
    let (ys, xs, row_labels) = outcomes(rule.outcomes(), p.ys)?;
    let values = p
        .curves
        .iter()
        .map(|c| curve_values(&rule, c, &ys))
        .collect::<Result<Vec<_>, _>>()?;
    let rows = (0..ys.len())
        .map(|i| {
            std::iter::once(xs[i])
                .chain(values.iter().map(|v| v[i]))
                .collect()
        })
        .collect();
    Ok(Table {
        name: p.name.clone(),
        columns: std::iter::once("y".to_string())
            .chain(p.curves.iter().map(|c| c.label.clone()))
            .collect(),
        rows,
        row_labels,
    })
}

pub fn render_lattice(l: &Lattice) -> Result<Table, CliError> {
    let spec = CostSpec::binary_lmsr(ShareSpace::integers(1, l.bound))?;
    let rows = spec
        .lattice_points()?
        .into_iter()
        .map(|q| {
            let cost = spec.cost.value(&q)?;
            let price = spec.cost.gradient(&q)?;
            let (conj, _) = spec.cost.conjugate(&price)?;
            Ok(vec![q[0], cost, price[0], conj])
        })
        .collect::<Result<Vec<_>, srmkit::error::Error>>()?;
    Ok(Table {
        name: l.name.clone(),
        columns: ["q", "cost", "price", "conjugate"]
            .map(String::from)
            .to_vec(),
        rows,
        row_labels: None,
    })
}

pub fn render(cfg: &FigureConfig) -> Result<Vec<Table>, CliError> {
    let mut out = cfg
        .panels
        .iter()
        .map(render_panel)
        .collect::<Result<Vec<_>, _>>()?;
    for l in &cfg.lattices {
        out.push(render_lattice(l)?);
    }
    Ok(out)
}

/// Writes one `<name>.tsv` per panel and lattice table.
pub fn write_figures(tables: &[Table], sha256: &str, out: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(out)?;
    for t in tables {
        std::fs::write(out.join(format!("{}.tsv", t.name)), t.to_tsv(sha256))?;
    }
    Ok(())
}
