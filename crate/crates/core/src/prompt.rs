//! Prover prompt templates.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

const HEADER: &str = "```lean4\nimport Mathlib\nimport Aesop\n\nset_option maxHeartbeats 0\n\nopen BigOperators Real Nat Topology Rat\n\n";

const ANSWER: &str = "```lean4\n<You answer>\n```";

const ICL_INTRO: &str = "Following is the solution for a related problem written in Lean 4. You can fully trust the provided code and it has already passed the Lean 4 compilation.\n";

const ICL_OUTRO: &str = "Please follow the provided code such that you don't make more mistakes. Your code should be self-contained, i.e., you should first prove the provided example inside your whole proof (not as a separate theorem outside the proof of the problem) if you want to use the result. You should wrap your answer in the lean code block\n\n";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Template {
    Plain,
    ChatThinking,
    Kimina,
    Icl,
    IclGen,
}

impl Template {
    pub const ALL: [Template; 5] = [
        Template::Plain,
        Template::ChatThinking,
        Template::Kimina,
        Template::Icl,
        Template::IclGen,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Template::Plain => "plain",
            Template::ChatThinking => "chat-thinking",
            Template::Kimina => "kimina",
            Template::Icl => "icl",
            Template::IclGen => "icl-gen",
        }
    }

    /// Whether the model's chat template is applied to the rendered text by
    /// default. In-context prompts for non-thinking completion models turn
    /// this off through [`PromptTask::chat_template`].
    pub fn default_chat_template(self) -> bool {
        !matches!(self, Template::Plain)
    }

    fn proofs_needed(self) -> (usize, usize) {
        match self {
            Template::Icl => (1, usize::MAX),
            Template::IclGen => (2, 2),
            _ => (0, 0),
        }
    }
}

impl fmt::Display for Template {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Template {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "kimina-style" => return Ok(Template::Kimina),
            "icl_gen" => return Ok(Template::IclGen),
            _ => {}
        }
        Template::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| format!("unknown template {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptTask {
    pub template: Template,
    #[serde(default)]
    pub informal_prefix: Option<String>,
    pub formal_statement: String,
    #[serde(default)]
    pub icl_proofs: Vec<String>,
    #[serde(default)]
    pub chat_template: Option<bool>,
}

impl PromptTask {
    pub fn new(template: Template, formal_statement: impl Into<String>) -> Self {
        PromptTask {
            template,
            informal_prefix: None,
            formal_statement: formal_statement.into(),
            icl_proofs: Vec::new(),
            chat_template: None,
        }
    }

    pub fn with_proofs(mut self, proofs: Vec<String>) -> Self {
        self.icl_proofs = proofs;
        self
    }

    pub fn with_informal(mut self, prefix: impl Into<String>) -> Self {
        self.informal_prefix = Some(prefix.into());
        self
    }

    pub fn applies_chat_template(&self) -> bool {
        self.chat_template.unwrap_or_else(|| self.template.default_chat_template())
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TemplateError {
    #[error("template {0} needs a formal statement")]
    MissingStatement(Template),
    #[error("template {template} takes {want} in-context proof(s), got {got}")]
    ProofCount { template: Template, want: String, got: usize },
}

/// Fills the chosen template. The text is returned exactly as the model
/// should see it before any chat formatting.
pub fn render_prompt(task: &PromptTask) -> Result<String, TemplateError> {
    let t = task.template;
    if task.formal_statement.trim().is_empty() {
        return Err(TemplateError::MissingStatement(t));
    }
    let (lo, hi) = t.proofs_needed();
    let got = task.icl_proofs.len();
    if got < lo || got > hi {
        let want = match (lo, hi) {
            (0, 0) => "no".to_string(),
            (a, b) if a == b => a.to_string(),
            (a, _) => format!("at least {a}"),
        };
        return Err(TemplateError::ProofCount { template: t, want, got });
    }
    let prefix = task.informal_prefix.as_deref().unwrap_or("");
    let stmt = &task.formal_statement;
    let give = "Give a proof for the following problem written in lean 4:\n\n";
    Ok(match t {
        Template::Plain => format!(
            "Complete the following Lean 4 code with explanatory comments preceding each line of code:\n\n{HEADER}{prefix}{stmt}"
        ),
        Template::ChatThinking => format!(
            "{give}{HEADER}{prefix}{stmt}```.\n\nYou should wrap your answer in the lean code block \n\n{ANSWER}"
        ),
        Template::Kimina => format!(
            "Think about and solve the following problem step by step in Lean 4.\n# Informal statement:\n{prefix}\n# Formal statement:\n{HEADER}{stmt}```\n"
        ),
        Template::Icl => format!(
            "{give}{HEADER}{prefix}{stmt}```.\n\n{ICL_INTRO}{}\n\n{ICL_OUTRO}{ANSWER}",
            task.icl_proofs.join("\n\n")
        ),
        Template::IclGen => format!(
            "{give}{HEADER}{prefix}{stmt}```.\n\n{ICL_INTRO}{}\n\n{}\n\n{ICL_OUTRO}{ANSWER}",
            task.icl_proofs[0], task.icl_proofs[1]
        ),
    })
}
