//! Post-workshop feasibility screening.
//!
//! Suggestions pass an initial stage (first matching rule rejects), then a
//! detailed stage (first matching rule excludes); the survivors are split
//! by a readiness predicate into recommended and future consideration.
//! Rules are data: see [`RuleSet`] for the JSON format.

mod report;
mod rules;

pub use report::{render_markdown, FunnelCounts, Outcome, ScreenedSuggestion, ScreeningReport};
pub use rules::{AttrType, Condition, Field, Op, RejectionReason, RuleError, RuleSet, ScreeningRule, Stage};

use crate::session::Suggestion;

/// Run the funnel.
///
/// `detail_budget` caps how many initial-stage survivors are examined in
/// detail, in input order; survivors past the cap are kept for future
/// consideration without a detailed check. `None` examines all of them.
pub fn screen(suggestions: &[Suggestion], rules: &RuleSet, detail_budget: Option<usize>) -> ScreeningReport {
    let mut entries = Vec::with_capacity(suggestions.len());
    let mut examined = 0usize;
    for s in suggestions {
        let outcome = if let Some(r) = rules.first_match(Stage::Initial, s) {
            Outcome::RejectedInitial { reason: r.reason, rule: r.name.clone() }
        } else if detail_budget.is_some_and(|b| examined >= b) {
            Outcome::FutureConsideration { deferred: true }
        } else {
            examined += 1;
            if let Some(r) = rules.first_match(Stage::Detailed, s) {
                Outcome::ExcludedDetailed { reason: r.reason, rule: r.name.clone() }
            } else if rules.readiness.eval(s) {
                Outcome::Recommended
            } else {
                Outcome::FutureConsideration { deferred: false }
            }
        };
        entries.push(ScreenedSuggestion {
            proposal_id: s.proposal.id.clone(),
            parcel_id: s.proposal.parcel_id.clone(),
            session_id: s.session_id.clone(),
            district_id: s.district_id.clone(),
            capacity: s.proposal.capacity,
            outcome,
        });
    }
    ScreeningReport::from_entries(entries)
}
