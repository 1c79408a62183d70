//! Per-phase token, cost, and time accounting.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::ops::AddAssign;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, ModelError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Phase {
    Pre,
    Hyp,
    Expt,
    Anlys,
    Imp,
    Post,
}

impl Phase {
    pub const ALL: [Phase; 6] = [Phase::Pre, Phase::Hyp, Phase::Expt, Phase::Anlys, Phase::Imp, Phase::Post];

    /// Column heading used in the rendered table.
    pub fn label(self) -> &'static str {
        match self {
            Phase::Pre => "Pre",
            Phase::Hyp => "Hyp.",
            Phase::Expt => "Expt.",
            Phase::Anlys => "Anlys.",
            Phase::Imp => "Imp.",
            Phase::Post => "Post",
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Usage {
    pub input_tokens: u64,
    pub output_tokens: u64,
    pub wall_time_s: f64,
    pub cost_usd: f64,
}

impl Usage {
    /// Usage priced at `price_in` / `price_out` USD per million tokens.
    pub fn priced(input_tokens: u64, output_tokens: u64, wall_time_s: f64, price_in: f64, price_out: f64) -> Self {
        Usage {
            input_tokens,
            output_tokens,
            wall_time_s,
            cost_usd: (input_tokens as f64 * price_in + output_tokens as f64 * price_out) / 1_000_000.0,
        }
    }

    fn validate(&self) -> Result<(), ModelError> {
        for (what, v) in [("wall_time_s", self.wall_time_s), ("cost_usd", self.cost_usd)] {
            if !v.is_finite() || v < 0.0 {
                return Err(invalid("usage", format!("{what} must be finite and non-negative, got {v}")));
            }
        }
        Ok(())
    }
}

impl AddAssign for Usage {
    fn add_assign(&mut self, rhs: Usage) {
        self.input_tokens += rhs.input_tokens;
        self.output_tokens += rhs.output_tokens;
        self.wall_time_s += rhs.wall_time_s;
        self.cost_usd += rhs.cost_usd;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseRow {
    pub phase: Phase,
    #[serde(flatten)]
    pub usage: Usage,
}

#[derive(Serialize, Deserialize)]
struct LedgerRepr {
    rows: Vec<PhaseRow>,
    total: Usage,
}

/// Six phase rows plus a totals row that is always the column sum.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(try_from = "LedgerRepr", into = "LedgerRepr")]
pub struct CostLedger {
    rows: [Usage; 6],
}

impl CostLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&mut self, phase: Phase, usage: Usage) {
        self.rows[phase.index()] += usage;
    }

    /// Functional form of [`CostLedger::record`].
    pub fn with_usage(mut self, phase: Phase, usage: Usage) -> Self {
        self.record(phase, usage);
        self
    }

    pub fn row(&self, phase: Phase) -> Usage {
        self.rows[phase.index()]
    }

    pub fn rows(&self) -> impl Iterator<Item = (Phase, Usage)> + '_ {
        Phase::ALL.iter().map(|p| (*p, self.row(*p)))
    }

    /// Column sums over the six phases, in phase order.
    pub fn total(&self) -> Usage {
        let mut total = Usage::default();
        for row in &self.rows {
            total += *row;
        }
        total
    }

    /// The same ledger with every wall time zeroed.
    pub fn without_wall_time(&self) -> CostLedger {
        let mut out = self.clone();
        for row in &mut out.rows {
            row.wall_time_s = 0.0;
        }
        out
    }

    /// Table with the four metric rows and `All` followed by the six phases.
    pub fn render_table(&self) -> String {
        let mut header = Vec::from(["Metric".into(), "All".into()]);
        header.extend(Phase::ALL.iter().map(|p| String::from(p.label())));
        let cols: Vec<Usage> = core::iter::once(self.total()).chain(self.rows.iter().copied()).collect();
        let metric = |label: &str, f: &dyn Fn(&Usage) -> String| {
            let mut row = Vec::from([String::from(label)]);
            row.extend(cols.iter().map(f));
            row
        };
        let table = [
            header,
            metric("Input tokens", &|u| compact_tokens(u.input_tokens)),
            metric("Output tokens", &|u| compact_tokens(u.output_tokens)),
            metric("API cost ($)", &|u| format!("{:.2}", u.cost_usd)),
            metric("Time", &|u| compact_time(u.wall_time_s)),
        ];
        let widths: Vec<usize> = (0..table[0].len()).map(|c| table.iter().map(|r| r[c].len()).max().unwrap_or(0)).collect();
        let mut out = String::new();
        for row in &table {
            let mut line = String::new();
            for (c, cell) in row.iter().enumerate() {
                if c == 0 {
                    line.push_str(&format!("{cell:<w$}", w = widths[c]));
                } else {
                    line.push_str(&format!("  {cell:>w$}", w = widths[c]));
                }
            }
            out.push_str(line.trim_end());
            out.push('\n');
        }
        out
    }
}

impl From<CostLedger> for LedgerRepr {
    fn from(ledger: CostLedger) -> Self {
        LedgerRepr {
            rows: ledger.rows().map(|(phase, usage)| PhaseRow { phase, usage }).collect(),
            total: ledger.total(),
        }
    }
}

impl TryFrom<LedgerRepr> for CostLedger {
    type Error = ModelError;

    fn try_from(repr: LedgerRepr) -> Result<Self, ModelError> {
        let mut ledger = CostLedger::new();
        let mut seen = [false; 6];
        for row in repr.rows {
            row.usage.validate()?;
            if core::mem::replace(&mut seen[row.phase.index()], true) {
                return Err(invalid("ledger", format!("duplicate row for phase {}", row.phase)));
            }
            ledger.rows[row.phase.index()] = row.usage;
        }
        if ledger.total() != repr.total {
            return Err(invalid("ledger", "totals row does not equal the column sums"));
        }
        Ok(ledger)
    }
}

/// `59000` → `59k`, `2600` → `2.6k`, `500` → `0.5k`, `0` → `0`.
pub fn compact_tokens(n: u64) -> String {
    match n {
        0 => String::from("0"),
        n if n < 10_000 => format!("{:.1}k", n as f64 / 1000.0),
        n => format!("{}k", (n + 500) / 1000),
    }
}

/// `21` → `21s`, `156` → `2.6m`, `660` → `11m`.
pub fn compact_time(s: f64) -> String {
    if s < 60.0 {
        format!("{}s", libm_round(s))
    } else if s < 600.0 {
        format!("{:.1}m", s / 60.0)
    } else {
        format!("{}m", libm_round(s / 60.0))
    }
}

fn libm_round(x: f64) -> u64 {
    (x + 0.5) as u64
}

#[cfg(test)]
mod tests {
    use super::*;

    fn usage(i: u64, o: u64) -> Usage {
        Usage { input_tokens: i, output_tokens: o, wall_time_s: 1.0, cost_usd: 0.01 }
    }

    #[test]
    fn record_hyp_row() {
        let ledger = CostLedger::new().with_usage(Phase::Hyp, usage(25_000, 2_500));
        assert_eq!(ledger.row(Phase::Hyp).input_tokens, 25_000);
        assert_eq!(compact_tokens(ledger.row(Phase::Hyp).input_tokens), "25k");
        assert_eq!(compact_tokens(ledger.row(Phase::Hyp).output_tokens), "2.5k");
        assert_eq!(ledger.row(Phase::Pre), Usage::default());
    }

    #[test]
    fn zero_usage_changes_only_time() {
        let before = CostLedger::new().with_usage(Phase::Expt, usage(10, 10));
        let after = before.clone().with_usage(Phase::Expt, Usage { wall_time_s: 2.0, ..Usage::default() });
        assert_eq!(after.without_wall_time(), before.without_wall_time());
        assert_eq!(after.row(Phase::Expt).wall_time_s, 3.0);
    }

    #[test]
    fn pricing_is_per_million() {
        let u = Usage::priced(1_000_000, 500_000, 0.0, 2.5, 10.0);
        assert_eq!(u.cost_usd, 7.5);
    }

    #[test]
    fn serde_round_trip_and_tamper() {
        let ledger = CostLedger::new().with_usage(Phase::Pre, usage(3, 4)).with_usage(Phase::Post, usage(5, 6));
        let json = serde_json::to_string(&ledger).unwrap();
        let back: CostLedger = serde_json::from_str(&json).unwrap();
        assert_eq!(back, ledger);
        let tampered = json.replace("\"input_tokens\":8", "\"input_tokens\":9");
        assert_ne!(tampered, json);
        assert!(serde_json::from_str::<CostLedger>(&tampered).is_err());
    }

    #[test]
    fn compact_formats() {
        assert_eq!(compact_tokens(59_000), "59k");
        assert_eq!(compact_tokens(2_600), "2.6k");
        assert_eq!(compact_tokens(500), "0.5k");
        assert_eq!(compact_tokens(284_000), "284k");
        assert_eq!(compact_time(21.0), "21s");
        assert_eq!(compact_time(156.0), "2.6m");
        assert_eq!(compact_time(660.0), "11m");
    }

    #[test]
    fn table_labels() {
        let table = CostLedger::new().render_table();
        let lines: Vec<&str> = table.lines().collect();
        assert_eq!(lines.len(), 5);
        for (line, label) in lines[1..].iter().zip(["Input tokens", "Output tokens", "API cost ($)", "Time"]) {
            assert!(line.starts_with(label), "{line}");
        }
        let heads: Vec<&str> = lines[0].split_whitespace().collect();
        assert_eq!(heads, ["Metric", "All", "Pre", "Hyp.", "Expt.", "Anlys.", "Imp.", "Post"]);
    }
}
