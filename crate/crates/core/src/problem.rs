//! The inequality problem schema.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::{Expr, VarId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Category {
    Amgm,
    Cauchy,
    Misc,
    Real,
    Generated,
}

impl Category {
    pub fn as_str(self) -> &'static str {
        match self {
            Category::Amgm => "amgm",
            Category::Cauchy => "cauchy",
            Category::Misc => "misc",
            Category::Real => "real",
            Category::Generated => "generated",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Category {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "amgm" => Ok(Category::Amgm),
            "cauchy" => Ok(Category::Cauchy),
            "misc" => Ok(Category::Misc),
            "real" => Ok(Category::Real),
            "generated" => Ok(Category::Generated),
            other => Err(format!("unknown category `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConditionKind {
    Eq,
    Gt,
    Ge,
}

impl ConditionKind {
    pub fn symbol(self) -> &'static str {
        match self {
            ConditionKind::Eq => "=",
            ConditionKind::Gt => ">",
            ConditionKind::Ge => "≥",
        }
    }
}

/// A side condition beyond the implicit positivity of every variable.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Condition {
    pub kind: ConditionKind,
    pub lhs: Expr,
    pub rhs: Expr,
}

impl Condition {
    pub fn new(kind: ConditionKind, lhs: Expr, rhs: Expr) -> Self {
        Self { kind, lhs, rhs }
    }

    pub fn eq(lhs: Expr, rhs: Expr) -> Self {
        Self::new(ConditionKind::Eq, lhs, rhs)
    }

    pub fn substitute(&self, map: &BTreeMap<VarId, Expr>) -> Self {
        Self::new(self.kind, self.lhs.substitute(map), self.rhs.substitute(map))
    }

    pub fn free_vars(&self) -> BTreeSet<VarId> {
        let mut out = self.lhs.free_vars();
        out.extend(self.rhs.free_vars());
        out
    }

    fn canonical(&self) -> Self {
        Self::new(self.kind, self.lhs.canonical(), self.rhs.canonical())
    }
}

/// Rule family recorded in a provenance step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Family {
    #[serde(rename = "composition")]
    Composition,
    #[serde(rename = "variable-level")]
    VariableLevel,
    #[serde(rename = "problem-level")]
    ProblemLevel,
    #[serde(rename = "typeI")]
    TypeI,
    #[serde(rename = "typeII")]
    TypeII,
}

impl Family {
    pub const ALL: [Family; 5] = [
        Family::Composition,
        Family::VariableLevel,
        Family::ProblemLevel,
        Family::TypeI,
        Family::TypeII,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Family::Composition => "composition",
            Family::VariableLevel => "variable-level",
            Family::ProblemLevel => "problem-level",
            Family::TypeI => "typeI",
            Family::TypeII => "typeII",
        }
    }
}

impl FromStr for Family {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Family::ALL
            .into_iter()
            .find(|f| f.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown rule family `{s}`"))
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Int(i64),
    Text(String),
}

/// A parent reference: either a problem id, or an earlier step of the same
/// trace (used for intermediate problems that never get their own record).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParentRef {
    Step(usize),
    Problem(String),
}

/// One applied rule in a provenance trace.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Step {
    pub rule: String,
    pub family: Family,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variant: Option<String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub params: BTreeMap<String, ParamValue>,
    pub parents: Vec<ParentRef>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProblemError {
    #[error("variable {0} occurs in the statement or conditions but is not declared")]
    UndeclaredVariable(VarId),
    #[error("variable {0} is declared but never used")]
    UnusedVariable(VarId),
    #[error("variable {0} is declared twice")]
    DuplicateVariable(VarId),
    #[error("empty problem id")]
    EmptyId,
}

/// An inequality problem: under positivity of every variable and the side
/// conditions, `lhs ≥ rhs`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Problem {
    id: String,
    category: Category,
    variables: Vec<VarId>,
    conditions: Vec<Condition>,
    lhs: Expr,
    rhs: Expr,
    rhs_positive: bool,
    provenance: Vec<Step>,
}

impl Problem {
    pub fn new(
        id: impl Into<String>,
        category: Category,
        variables: Vec<VarId>,
        conditions: Vec<Condition>,
        lhs: Expr,
        rhs: Expr,
        rhs_positive: bool,
    ) -> Result<Self, ProblemError> {
        let id = id.into();
        if id.is_empty() {
            return Err(ProblemError::EmptyId);
        }
        let mut declared = BTreeSet::new();
        for v in &variables {
            if !declared.insert(v.clone()) {
                return Err(ProblemError::DuplicateVariable(v.clone()));
            }
        }
        let mut used = lhs.free_vars();
        used.extend(rhs.free_vars());
        for c in &conditions {
            used.extend(c.free_vars());
        }
        if let Some(v) = used.difference(&declared).next() {
            return Err(ProblemError::UndeclaredVariable(v.clone()));
        }
        if let Some(v) = declared.difference(&used).next() {
            return Err(ProblemError::UnusedVariable(v.clone()));
        }
        Ok(Self {
            id,
            category,
            variables,
            conditions,
            lhs,
            rhs,
            rhs_positive,
            provenance: Vec::new(),
        })
    }

    pub fn with_provenance(mut self, provenance: Vec<Step>) -> Self {
        self.provenance = provenance;
        self
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = id.into();
        self
    }

    pub fn with_category(mut self, category: Category) -> Self {
        self.category = category;
        self
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn category(&self) -> Category {
        self.category
    }

    pub fn variables(&self) -> &[VarId] {
        &self.variables
    }

    pub fn conditions(&self) -> &[Condition] {
        &self.conditions
    }

    pub fn lhs(&self) -> &Expr {
        &self.lhs
    }

    pub fn rhs(&self) -> &Expr {
        &self.rhs
    }

    pub fn rhs_positive(&self) -> bool {
        self.rhs_positive
    }

    pub fn provenance(&self) -> &[Step] {
        &self.provenance
    }

    pub fn is_basic_only(&self) -> bool {
        self.conditions.is_empty()
    }

    pub fn var_set(&self) -> BTreeSet<VarId> {
        self.variables.iter().cloned().collect()
    }

    /// Statement equality ignoring id, category and provenance.
    pub fn same_statement(&self, other: &Problem) -> bool {
        self.variables == other.variables
            && self.conditions == other.conditions
            && self.lhs == other.lhs
            && self.rhs == other.rhs
            && self.rhs_positive == other.rhs_positive
    }

    /// Order-insensitive key of the mathematical content, used to detect
    /// duplicates among generated problems.
    pub fn statement_key(&self) -> StatementKey {
        let mut vars = self.variables.clone();
        vars.sort();
        let mut conds: Vec<Condition> = self.conditions.iter().map(Condition::canonical).collect();
        conds.sort();
        StatementKey {
            vars,
            conditions: conds,
            lhs: self.lhs.canonical(),
            rhs: self.rhs.canonical(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct StatementKey {
    vars: Vec<VarId>,
    conditions: Vec<Condition>,
    lhs: Expr,
    rhs: Expr,
}
