//! Tab-separated report rows and CSV margin tables.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::f64::consts::LN_2;

use cqbound::bounds::BoundReport;
use cqbound::verify::CheckRow;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Unit {
    /// Entropic quantity; converted when bits are requested.
    Entropic,
    Dimensionless,
    Count,
}

#[derive(Debug, Clone)]
struct Row {
    name: String,
    value: String,
    units: &'static str,
    flags: String,
}

/// Report rows `name<TAB>value<TAB>units<TAB>flags`.
#[derive(Debug, Clone)]
pub struct Report {
    bits: bool,
    flags: String,
    rows: Vec<Row>,
}

impl Report {
    pub fn new(bits: bool, flags: &BTreeMap<&'static str, String>) -> Self {
        let mut all = flags.clone();
        all.insert("bits", bits.to_string());
        let flags = all.iter().map(|(k, v)| format!("{k}={v}")).collect::<Vec<_>>().join(";");
        Report { bits, flags, rows: Vec::new() }
    }

    pub fn value(&mut self, name: impl Into<String>, value: f64, unit: Unit) {
        let (value, units) = match unit {
            Unit::Entropic if self.bits => (value / LN_2, "bits"),
            Unit::Entropic => (value, "nats"),
            Unit::Dimensionless => (value, "-"),
            Unit::Count => (value, "count"),
        };
        self.rows.push(Row { name: name.into(), value: format!("{value}"), units, flags: self.flags.clone() });
    }

    pub fn text(&mut self, name: impl Into<String>, value: impl Into<String>) {
        self.rows.push(Row { name: name.into(), value: value.into(), units: "-", flags: self.flags.clone() });
    }

    pub fn bound(&mut self, b: &BoundReport) {
        for (part, v) in [
            ("first_order", b.first_order),
            ("second_order", b.second_order),
            ("third_order", b.third_order),
            ("total", b.total),
        ] {
            self.value(format!("{}.{part}", b.name), v, Unit::Entropic);
        }
        for (k, v) in &b.constants {
            self.value(format!("{}.{k}", b.name), *v, Unit::Dimensionless);
        }
        for (k, v) in &b.witnesses {
            self.text(format!("{}.{k}", b.name), v.clone());
        }
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for r in &self.rows {
            let _ = writeln!(out, "{}\t{}\t{}\t{}", r.name, r.value, r.units, r.flags);
        }
        out
    }
}

pub const CSV_HEADER: [&str; 8] = ["instance_id", "seed", "suite", "check", "params", "lhs", "rhs", "margin"];

pub fn margins_csv(rows: &[CheckRow]) -> Result<String, csv::Error> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_HEADER)?;
    for r in rows {
        w.write_record([
            r.instance_id.to_string(),
            r.seed.to_string(),
            r.suite.to_string(),
            r.check.to_string(),
            r.params_string(),
            format!("{}", r.lhs),
            format!("{}", r.rhs),
            format!("{}", r.margin),
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| e.into_error())?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}
