use std::fmt;

use super::HarnessError;
use crate::prompting::{PromptVariant, MAX_WORD_BUDGET};

/// Default built-in codec quality for the visual condition.
pub const DEFAULT_QUALITY: u8 = 35;

/// Presets of the main rate/quality matrix: text-only at three budgets and
/// image conditioning with 0, 15 and 60 caption words.
pub const MATRIX_PRESETS: [&str; 6] = ["text15", "text30", "text120", "visual", "multi15", "multi60"];

/// Every preset, including the unstructured-prompt ablation.
pub const ALL_PRESETS: [&str; 7] = [
    "text15", "text30", "text120", "text30u", "visual", "multi15", "multi60",
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum VisualMode {
    None,
    Builtin { quality: u8 },
    External { target_bpp: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mode {
    pub name: String,
    /// Caption word budget; 0 disables the text branch.
    pub text_budget: usize,
    pub visual: VisualMode,
    pub prompt_variant: PromptVariant,
}

impl Mode {
    pub fn new(
        name: impl Into<String>,
        text_budget: usize,
        visual: VisualMode,
        prompt_variant: PromptVariant,
    ) -> Result<Self, HarnessError> {
        let mode = Self {
            name: name.into(),
            text_budget,
            visual,
            prompt_variant,
        };
        mode.validate()?;
        Ok(mode)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let invalid = |why: String| Err(HarnessError::InvalidMode(format!("{}: {why}", self.name)));
        if self.name.is_empty() || self.name.contains(['/', '\\']) {
            return invalid("name must be non-empty and path-safe".into());
        }
        if self.text_budget == 0 && self.visual == VisualMode::None {
            return invalid("needs a caption budget or a visual condition".into());
        }
        if self.text_budget > MAX_WORD_BUDGET {
            return invalid(format!("budget exceeds {MAX_WORD_BUDGET} words"));
        }
        match self.visual {
            VisualMode::Builtin { quality } if !(1..=100).contains(&quality) => {
                invalid(format!("quality {quality} outside 1..=100"))
            }
            VisualMode::External { target_bpp } if !(target_bpp > 0.0 && target_bpp.is_finite()) => {
                invalid(format!("target bpp {target_bpp} must be positive"))
            }
            _ => Ok(()),
        }
    }

    /// Named preset; `quality` applies to the modes with a visual condition.
    pub fn preset(name: &str, quality: u8) -> Result<Self, HarnessError> {
        use PromptVariant::*;
        let builtin = VisualMode::Builtin { quality };
        let (budget, visual, variant) = match name {
            "text15" => (15, VisualMode::None, Structured),
            "text30" => (30, VisualMode::None, Structured),
            "text120" => (120, VisualMode::None, Structured),
            "text30u" => (30, VisualMode::None, Unstructured),
            "visual" => (0, builtin, Structured),
            "multi15" => (15, builtin, Structured),
            "multi60" => (60, builtin, Structured),
            other => {
                return Err(HarnessError::InvalidMode(format!("unknown preset `{other}`")))
            }
        };
        Self::new(name, budget, visual, variant)
    }

    /// A preset name, or a custom mode written as `;`-separated settings:
    /// `name=NAME;text=N;visual=none|builtin:Q|external:BPP;variant=structured|unstructured`.
    /// Omitted settings default to text 0, visual none, structured; the name
    /// defaults to the mode string itself with `;` `=` `:` replaced.
    pub fn parse(spec: &str, default_quality: u8) -> Result<Self, HarnessError> {
        if !spec.contains('=') {
            return Self::preset(spec.trim(), default_quality);
        }
        let bad = |what: String| HarnessError::InvalidMode(format!("`{spec}`: {what}"));
        let mut name = None;
        let mut text_budget = 0;
        let mut visual = VisualMode::None;
        let mut variant = PromptVariant::Structured;
        for part in spec.split(';').map(str::trim).filter(|p| !p.is_empty()) {
            let (key, value) = part
                .split_once('=')
                .ok_or_else(|| bad(format!("expected key=value, got `{part}`")))?;
            match key.trim() {
                "name" => name = Some(value.trim().to_string()),
                "text" => {
                    text_budget = value
                        .trim()
                        .parse()
                        .map_err(|_| bad(format!("bad text budget `{value}`")))?
                }
                "variant" => variant = value.trim().parse().map_err(|e| bad(format!("{e}")))?,
                "visual" => {
                    visual = match value.trim().split_once(':') {
                        None if value.trim() == "none" => VisualMode::None,
                        None if value.trim() == "builtin" => VisualMode::Builtin {
                            quality: default_quality,
                        },
                        Some(("builtin", q)) => VisualMode::Builtin {
                            quality: q.parse().map_err(|_| bad(format!("bad quality `{q}`")))?,
                        },
                        Some(("external", b)) => VisualMode::External {
                            target_bpp: b.parse().map_err(|_| bad(format!("bad bpp `{b}`")))?,
                        },
                        _ => return Err(bad(format!("bad visual setting `{value}`"))),
                    }
                }
                other => return Err(bad(format!("unknown key `{other}`"))),
            }
        }
        let name = name.unwrap_or_else(|| {
            spec.chars()
                .map(|c| if matches!(c, ';' | '=' | ':') { '_' } else { c })
                .collect()
        });
        Self::new(name, text_budget, visual, variant)
    }

    pub fn has_text(&self) -> bool {
        self.text_budget > 0
    }

    pub fn has_visual(&self) -> bool {
        self.visual != VisualMode::None
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)
    }
}
