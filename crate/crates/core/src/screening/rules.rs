//! Rule file format:
//!
//! ```json
//! {
//!   "attributes": {"planned_use": "string", "contaminated": "bool"},
//!   "rules": [
//!     {"name": "reserved", "stage": "initial", "reason": "other_land_use",
//!      "when": {"attr": "planned_use", "op": "ne", "value": "none"}},
//!     {"name": "park", "stage": "initial", "reason": "direct_use_conflict",
//!      "when": {"restriction": "park", "op": "ge", "value": 0.5}},
//!     {"name": "soil", "stage": "detailed", "reason": "technical_structural",
//!      "when": {"attr": "contaminated", "op": "eq", "value": true}}
//!   ],
//!   "readiness": {"all": [{"field": "capacity_margin", "op": "ge", "value": 0},
//!                          {"field": "high_coverage", "op": "eq", "value": 0}]}
//! }
//! ```
//!
//! Conditions reference parcel attributes (`attr`, which must be declared
//! under `attributes`), built-in detail fields (`field`), or the coverage of
//! a named restriction layer (`restriction`, 0 when the layer does not touch
//! the parcel), and combine with `all`, `any` and `not`. A comparison on an
//! attribute the parcel lacks is false; `exists` tests presence.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::session::Suggestion;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectionReason {
    OtherLandUse,
    DirectUseConflict,
    TechnicalStructural,
}

impl RejectionReason {
    pub fn label(self) -> &'static str {
        match self {
            RejectionReason::OtherLandUse => "other land use",
            RejectionReason::DirectUseConflict => "direct use conflict",
            RejectionReason::TechnicalStructural => "technical or structural",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Initial,
    Detailed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttrType {
    String,
    Number,
    Bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Op {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    In,
    Exists,
}

impl Op {
    fn ordering(self) -> bool {
        matches!(self, Op::Lt | Op::Le | Op::Gt | Op::Ge)
    }
}

/// Built-in values of a suggestion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Field {
    AreaM2,
    /// Estimated places on the parcel.
    Capacity,
    /// Places the proposal asks for.
    ProposedCapacity,
    /// `capacity - proposed_capacity`.
    CapacityMargin,
    HighCoverage,
    LessCoverage,
    CityOwned,
    Designation,
    /// `"high"`, `"medium"` or `"low"`.
    Suitability,
}

impl Field {
    fn kind(self) -> AttrType {
        match self {
            Field::CityOwned => AttrType::Bool,
            Field::Designation | Field::Suitability => AttrType::String,
            _ => AttrType::Number,
        }
    }

    fn value(self, s: &Suggestion) -> Value {
        let d = &s.detail;
        match self {
            Field::AreaM2 => d.area_m2.into(),
            Field::Capacity => d.capacity.into(),
            Field::ProposedCapacity => s.proposal.capacity.into(),
            Field::CapacityMargin => (d.capacity as i64 - s.proposal.capacity as i64).into(),
            Field::HighCoverage => d.high_coverage.into(),
            Field::LessCoverage => d.less_coverage.into(),
            Field::CityOwned => d.city_owned.into(),
            Field::Designation => d.designation.clone().into(),
            Field::Suitability => d.suitability.label().into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Condition {
    All {
        all: Vec<Condition>,
    },
    Any {
        any: Vec<Condition>,
    },
    Not {
        not: Box<Condition>,
    },
    Attr {
        attr: String,
        op: Op,
        #[serde(default)]
        value: Value,
    },
    Field {
        field: Field,
        op: Op,
        value: Value,
    },
    Restriction {
        restriction: String,
        op: Op,
        value: f64,
    },
}

fn compare(actual: Option<&Value>, op: Op, expected: &Value) -> bool {
    let Some(a) = actual else { return false };
    if op == Op::Exists {
        return true;
    }
    if op == Op::In {
        return expected.as_array().is_some_and(|xs| xs.iter().any(|x| same(a, x)));
    }
    if op.ordering() {
        let (Some(x), Some(y)) = (a.as_f64(), expected.as_f64()) else { return false };
        return match op {
            Op::Lt => x < y,
            Op::Le => x <= y,
            Op::Gt => x > y,
            _ => x >= y,
        };
    }
    match op {
        Op::Eq => same(a, expected),
        _ => !same(a, expected),
    }
}

fn same(a: &Value, b: &Value) -> bool {
    match (a.as_f64(), b.as_f64()) {
        (Some(x), Some(y)) => x == y,
        _ => a == b,
    }
}

impl Condition {
    pub fn eval(&self, s: &Suggestion) -> bool {
        match self {
            Condition::All { all } => all.iter().all(|c| c.eval(s)),
            Condition::Any { any } => any.iter().any(|c| c.eval(s)),
            Condition::Not { not } => !not.eval(s),
            Condition::Attr { attr, op, value } => compare(s.detail.attributes.get(attr), *op, value),
            Condition::Field { field, op, value } => compare(Some(&field.value(s)), *op, value),
            Condition::Restriction { restriction, op, value } => {
                let c = s.detail.restrictions.iter().find(|r| r.layer == *restriction).map_or(0.0, |r| r.coverage);
                compare(Some(&c.into()), *op, &(*value).into())
            }
        }
    }

    fn validate(&self, attrs: &BTreeMap<String, AttrType>, at: &str) -> Result<(), RuleError> {
        let bad = |message: String| Err(RuleError::Condition { rule: at.to_string(), message });
        match self {
            Condition::All { all: cs } | Condition::Any { any: cs } => {
                cs.iter().try_for_each(|c| c.validate(attrs, at))
            }
            Condition::Not { not } => not.validate(attrs, at),
            Condition::Attr { attr, op, value } => {
                let Some(ty) = attrs.get(attr) else {
                    return Err(RuleError::UnknownAttribute { rule: at.to_string(), attr: attr.clone() });
                };
                check_operand(*ty, *op, value).or_else(|m| bad(format!("attribute {attr:?}: {m}")))
            }
            Condition::Field { field, op, value } => {
                check_operand(field.kind(), *op, value).or_else(|m| bad(format!("field {field:?}: {m}")))
            }
            Condition::Restriction { op, value, .. } => {
                if *op == Op::In || *op == Op::Exists {
                    return bad(format!("restriction coverage does not support {op:?}"));
                }
                if !value.is_finite() {
                    return bad("restriction threshold must be finite".into());
                }
                Ok(())
            }
        }
    }
}

fn type_matches(ty: AttrType, v: &Value) -> bool {
    match ty {
        AttrType::String => v.is_string(),
        AttrType::Number => v.is_number(),
        AttrType::Bool => v.is_boolean(),
    }
}

fn check_operand(ty: AttrType, op: Op, value: &Value) -> Result<(), String> {
    match op {
        Op::Exists => Ok(()),
        Op::In => match value.as_array() {
            Some(xs) if xs.iter().all(|x| type_matches(ty, x)) => Ok(()),
            _ => Err(format!("`in` needs an array of {ty:?} values")),
        },
        _ if op.ordering() && ty != AttrType::Number => Err(format!("{op:?} needs a number-typed operand")),
        _ if !type_matches(ty, value) => Err(format!("value {value} is not a {ty:?}")),
        _ => Ok(()),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScreeningRule {
    pub name: String,
    pub stage: Stage,
    pub reason: RejectionReason,
    pub when: Condition,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RuleError {
    #[error("rule {rule:?} references undeclared attribute {attr:?}")]
    UnknownAttribute { rule: String, attr: String },
    #[error("rule {rule:?}: {message}")]
    Condition { rule: String, message: String },
    #[error("duplicate rule name {0:?}")]
    DuplicateName(String),
    #[error("initial-stage rule {0:?} is listed after a detailed-stage rule")]
    StageOrder(String),
    #[error("rules file: {0}")]
    Parse(String),
}

/// A validated, ordered rule set with its readiness predicate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RuleSet {
    pub attributes: BTreeMap<String, AttrType>,
    pub rules: Vec<ScreeningRule>,
    pub readiness: Condition,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRules {
    #[serde(default)]
    attributes: BTreeMap<String, AttrType>,
    rules: Vec<ScreeningRule>,
    readiness: Condition,
}

impl RuleSet {
    pub fn new(
        attributes: BTreeMap<String, AttrType>,
        rules: Vec<ScreeningRule>,
        readiness: Condition,
    ) -> Result<Self, RuleError> {
        let mut seen_detailed = false;
        for (i, r) in rules.iter().enumerate() {
            if rules[..i].iter().any(|o| o.name == r.name) {
                return Err(RuleError::DuplicateName(r.name.clone()));
            }
            match r.stage {
                Stage::Detailed => seen_detailed = true,
                Stage::Initial if seen_detailed => return Err(RuleError::StageOrder(r.name.clone())),
                Stage::Initial => {}
            }
            r.when.validate(&attributes, &r.name)?;
        }
        readiness.validate(&attributes, "readiness")?;
        Ok(Self { attributes, rules, readiness })
    }

    pub fn from_json(text: &str) -> Result<Self, RuleError> {
        let raw: RawRules = serde_json::from_str(text).map_err(|e| RuleError::Parse(e.to_string()))?;
        Self::new(raw.attributes, raw.rules, raw.readiness)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("rules serialize")
    }

    pub fn stage(&self, stage: Stage) -> impl Iterator<Item = &ScreeningRule> {
        self.rules.iter().filter(move |r| r.stage == stage)
    }

    pub fn first_match(&self, stage: Stage, s: &Suggestion) -> Option<&ScreeningRule> {
        self.stage(stage).find(|r| r.when.eval(s))
    }
}
