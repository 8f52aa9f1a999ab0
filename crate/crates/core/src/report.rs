//! CSV artifacts. Every file starts with
//! `# barbench <version> config=<hash prefix> seed=<seed>`; stations are
//! numbered from 1.

use std::io::Write;
use std::path::Path;

use crate::bar::{BarReport, NReport, PrelimitRow, RayTable};
use crate::exponents::ExpansionTable;
use crate::sim::{FlowReport, StationaryEstimate};
use crate::srbm::{SrbmBarResidual, SrbmSample};
use crate::stats::BatchEstimate;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Header {
    pub config_hash: String,
    pub seed: u64,
}

impl Header {
    pub fn line(&self) -> String {
        let prefix: String = self.config_hash.chars().take(12).collect();
        format!("# barbench {VERSION} config={prefix} seed={}", self.seed)
    }
}

/// Rows of already formatted cells.
#[derive(Debug, Clone, Default)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: Into<String>>(columns: impl IntoIterator<Item = S>) -> Self {
        Table { columns: columns.into_iter().map(Into::into).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn write<W: Write>(&self, header: &Header, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{}", header.line())?;
        writeln!(w, "{}", self.columns.join(","))?;
        for r in &self.rows {
            writeln!(w, "{}", r.join(","))?;
        }
        Ok(())
    }

    pub fn save(&self, header: &Header, path: &Path) -> std::io::Result<()> {
        let mut buf = Vec::new();
        self.write(header, &mut buf)?;
        std::fs::write(path, buf)
    }
}

fn num(x: f64) -> String {
    // drop the sign of negative zero
    format!("{:e}", if x == 0.0 { 0.0 } else { x })
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

fn theta_columns(d: usize) -> Vec<String> {
    (1..=d).map(|j| format!("theta_{j}")).collect()
}

pub fn flow_table(report: &FlowReport) -> Table {
    let mut t = Table::new(["quantity", "station", "estimate", "se", "target", "z"]);
    for (name, items) in [("arrival_rate", &report.arrival), ("departure_rate", &report.departure), ("idle_fraction", &report.idle)] {
        for i in items {
            t.push(vec![name.into(), (i.station + 1).to_string(), num(i.estimate), num(i.se), num(i.target), num(i.z)]);
        }
    }
    t.push(vec!["replay_residual".into(), String::new(), report.replay_residual.to_string(), String::new(), "0".into(), String::new()]);
    t.push(vec!["time_balance_error".into(), String::new(), num(report.time_balance_error), String::new(), "0".into(), String::new()]);
    t
}

/// Per-station mean queue length and idle fraction.
pub fn summary_table(est: &StationaryEstimate) -> Table {
    let mut t = Table::new(["station", "mean_queue", "mean_queue_se", "idle_fraction", "idle_fraction_se"]);
    for j in 0..est.d {
        let q = est.mean_queue(j);
        let i = est.idle_fraction(j);
        t.push(vec![(j + 1).to_string(), num(q.mean), num(q.se), num(i.mean), num(i.se)]);
    }
    t
}

pub fn expansion_table(tables: &[ExpansionTable]) -> Table {
    let d = tables.first().and_then(|t| t.points.first()).map_or(0, |p| p.theta.len());
    let mut cols = vec!["n".to_string(), "r_n".to_string()];
    cols.extend(theta_columns(d));
    for j in 1..=d {
        cols.extend([format!("eta_{j}"), format!("eta_quad_{j}")]);
    }
    for j in 1..=d {
        cols.extend([format!("zeta_{j}"), format!("zeta_quad_{j}")]);
    }
    cols.extend(["eta_error".into(), "zeta_error".into()]);
    let mut t = Table::new(cols);
    for tab in tables {
        for p in &tab.points {
            let mut row = vec![tab.n.to_string(), num(tab.r_n)];
            row.extend(p.theta.iter().map(|&x| num(x)));
            for j in 0..d {
                row.extend([opt(p.eta_exact[j]), opt(p.eta_quad[j])]);
            }
            for j in 0..d {
                row.extend([num(p.zeta_exact[j]), num(p.zeta_quad[j])]);
            }
            row.extend([num(p.eta_error), num(p.zeta_error)]);
            t.push(row);
        }
    }
    t
}

pub fn prelimit_table(n: u64, rows: &[PrelimitRow]) -> Table {
    let d = rows.first().map_or(0, |r| r.theta.len());
    let mut cols = vec!["n".to_string()];
    cols.extend(theta_columns(d));
    cols.extend(["residual", "se", "z", "telescoped", "exponent_residual"].map(String::from));
    let mut t = Table::new(cols);
    for r in rows {
        let mut row = vec![n.to_string()];
        row.extend(r.theta.iter().map(|&x| num(x)));
        row.extend([num(r.residual), num(r.se), num(r.z()), num(r.telescoped), num(r.max_exponent_residual)]);
        t.push(row);
    }
    t
}

pub fn residuals_table(per_n: &[NReport]) -> Table {
    let d = per_n.first().and_then(|r| r.epsilon.first()).map_or(0, |e| e.theta.len());
    let mut cols = vec!["n".to_string()];
    cols.extend(theta_columns(d));
    cols.extend(["epsilon", "se", "normalized"].map(String::from));
    let mut t = Table::new(cols);
    for r in per_n {
        for e in &r.epsilon {
            let mut row = vec![r.n.to_string()];
            row.extend(e.theta.iter().map(|&x| num(x)));
            row.extend([num(e.epsilon), num(e.se), num(e.normalized)]);
            t.push(row);
        }
    }
    t
}

/// One row per `n`: the grid sup and the gap between the two evaluation routes.
pub fn sup_table(per_n: &[NReport]) -> Table {
    let mut t = Table::new(["n", "r_n", "sup_normalized", "consistency_gap"]);
    for r in per_n {
        t.push(vec![r.n.to_string(), num(r.r_n), num(r.sup_normalized), num(r.consistency_gap)]);
    }
    t
}

pub fn distances_table(report: &BarReport) -> Table {
    let mut t = Table::new(["n", "station", "reference", "ks", "w1"]);
    for r in &report.distances {
        t.push(vec![r.n.to_string(), (r.station + 1).to_string(), r.reference.into(), num(r.ks), num(r.w1)]);
    }
    t
}

pub fn rays_table(rays: &RayTable) -> Table {
    // `ok` means `difference >= -margin`
    let mut t = Table::new(["n", "subset", "station", "alpha", "difference", "se", "margin", "ok"]);
    let subset = |s: &[usize]| s.iter().map(|i| (i + 1).to_string()).collect::<Vec<_>>().join(" ");
    for r in &rays.rows {
        t.push(vec![
            rays.n.to_string(),
            subset(&r.subset),
            (r.station + 1).to_string(),
            num(r.alpha),
            num(r.difference),
            num(r.se),
            num(3.0 * r.se),
            r.finite_ok.to_string(),
        ]);
    }
    // the extrapolated limits carry alpha = 0
    for l in &rays.limits {
        t.push(vec![
            rays.n.to_string(),
            subset(&l.subset),
            (l.station + 1).to_string(),
            "0".into(),
            num(l.limit),
            num(l.se),
            num(3.0 * l.se + l.truncation),
            l.limit_ok.to_string(),
        ]);
    }
    t
}

/// Stationary moments and regulator rates of an SRBM path.
pub fn srbm_summary_table(sample: &SrbmSample, regulator: &[BatchEstimate], b: &[f64]) -> Table {
    let mut t = Table::new(["station", "mean", "regulator_rate", "regulator_rate_se", "b"]);
    for j in 0..sample.d {
        t.push(vec![
            (j + 1).to_string(),
            num(sample.marginal(j).mean()),
            num(regulator[j].mean),
            num(regulator[j].se),
            num(b[j]),
        ]);
    }
    t
}

pub fn srbm_residual_table(rows: &[SrbmBarResidual]) -> Table {
    let d = rows.first().map_or(0, |r| r.theta.len());
    let mut cols = theta_columns(d);
    cols.extend(["residual", "se", "normalized", "phi"].map(String::from));
    cols.extend((1..=d).map(|j| format!("phi_boundary_{j}")));
    let mut t = Table::new(cols);
    for r in rows {
        let norm = r.theta.iter().fold(0.0f64, |a, x| a.max(x.abs()));
        let mut row: Vec<String> = r.theta.iter().map(|&x| num(x)).collect();
        row.extend([num(r.residual.mean), num(r.residual.se), num(r.residual.mean.abs() / norm), num(r.phi.mean)]);
        row.extend(r.phi_boundary.iter().map(|p| num(p.mean)));
        t.push(row);
    }
    t
}
