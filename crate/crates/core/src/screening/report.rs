use std::fmt::Write;

use serde::{Deserialize, Serialize};

use super::RejectionReason;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum Outcome {
    RejectedInitial { reason: RejectionReason, rule: String },
    ExcludedDetailed { reason: RejectionReason, rule: String },
    Recommended,
    FutureConsideration {
        /// Not examined in detail because the detail budget ran out.
        #[serde(default)]
        deferred: bool,
    },
}

impl Outcome {
    pub fn label(&self) -> &'static str {
        match self {
            Outcome::RejectedInitial { .. } => "rejected (initial)",
            Outcome::ExcludedDetailed { .. } => "excluded (detailed)",
            Outcome::Recommended => "recommended",
            Outcome::FutureConsideration { .. } => "future consideration",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScreenedSuggestion {
    pub proposal_id: String,
    pub parcel_id: String,
    pub session_id: String,
    pub district_id: String,
    pub capacity: u32,
    #[serde(flatten)]
    pub outcome: Outcome,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct FunnelCounts {
    pub suggested: usize,
    pub rejected_initial: usize,
    /// Survivors of the initial stage.
    pub feasible: usize,
    pub excluded_detailed: usize,
    pub recommended: usize,
    pub future: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ScreeningReport {
    pub funnel: FunnelCounts,
    pub total_proposed_capacity: u64,
    pub recommended_capacity: u64,
    pub entries: Vec<ScreenedSuggestion>,
}

impl ScreeningReport {
    pub fn from_entries(entries: Vec<ScreenedSuggestion>) -> Self {
        let mut f = FunnelCounts { suggested: entries.len(), ..Default::default() };
        let mut recommended_capacity = 0;
        for e in &entries {
            match e.outcome {
                Outcome::RejectedInitial { .. } => f.rejected_initial += 1,
                Outcome::ExcludedDetailed { .. } => f.excluded_detailed += 1,
                Outcome::Recommended => {
                    f.recommended += 1;
                    recommended_capacity += e.capacity as u64;
                }
                Outcome::FutureConsideration { .. } => f.future += 1,
            }
        }
        f.feasible = f.suggested - f.rejected_initial;
        Self {
            funnel: f,
            total_proposed_capacity: entries.iter().map(|e| e.capacity as u64).sum(),
            recommended_capacity,
            entries,
        }
    }

    /// `"161 suggested / 44 feasible / 6 recommended / 14 future"`.
    pub fn summary_line(&self) -> String {
        let f = &self.funnel;
        format!(
            "{} suggested / {} feasible / {} recommended / {} future",
            f.suggested, f.feasible, f.recommended, f.future
        )
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Markdown rendering: summary, stage counts, then one row per suggestion
/// in input order.
pub fn render_markdown(r: &ScreeningReport) -> String {
    let f = &r.funnel;
    let mut s = String::new();
    writeln!(s, "# Feasibility screening\n").unwrap();
    writeln!(s, "{}\n", r.summary_line()).unwrap();
    if r.entries.is_empty() {
        return s;
    }
    writeln!(s, "| Stage | Suggestions |\n|---|---:|").unwrap();
    writeln!(s, "| Suggested | {} |", f.suggested).unwrap();
    writeln!(s, "| Rejected in initial assessment | {} |", f.rejected_initial).unwrap();
    writeln!(s, "| Feasible after initial assessment | {} |", f.feasible).unwrap();
    writeln!(s, "| Excluded after detailed examination | {} |", f.excluded_detailed).unwrap();
    writeln!(s, "| Recommended | {} |", f.recommended).unwrap();
    writeln!(s, "| Future consideration | {} |", f.future).unwrap();
    writeln!(
        s,
        "\nProposed places: {}. Recommended places: {}.\n",
        r.total_proposed_capacity, r.recommended_capacity
    )
    .unwrap();
    writeln!(s, "## Suggestions\n").unwrap();
    writeln!(s, "| Proposal | Parcel | District | Places | Outcome | Reason | Rule |\n|---|---|---|---:|---|---|---|").unwrap();
    for e in &r.entries {
        let (reason, rule) = match &e.outcome {
            Outcome::RejectedInitial { reason, rule } | Outcome::ExcludedDetailed { reason, rule } => {
                (reason.label(), rule.as_str())
            }
            Outcome::FutureConsideration { deferred: true } => ("detail budget exhausted", ""),
            _ => ("", ""),
        };
        writeln!(
            s,
            "| {} | {} | {} | {} | {} | {} | {} |",
            e.proposal_id,
            e.parcel_id,
            e.district_id,
            e.capacity,
            e.outcome.label(),
            reason,
            rule
        )
        .unwrap();
    }
    s
}
