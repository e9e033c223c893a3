//! Captioning instructions and checks on the captions that come back.
//!
//! The structured instruction lives in `templates/structured.txt`. It is plain
//! text with these placeholders:
//!
//! * `{N}` - the word budget.
//! * `{TYPE}` - an image-type clause, or nothing when the type is unspecified.
//! * `{DIM_FEATURE_CORRESPONDENCE}`, `{DIM_GEOMETRIC_CONSISTENCY}`,
//!   `{DIM_PHOTOMETRIC_PROPERTIES}`, `{DIM_STYLISTIC_ALIGNMENT}`,
//!   `{DIM_SEMANTIC_COHERENCE}`, `{DIM_STRUCTURAL_INTEGRITY}` - one clause per
//!   enabled consistency dimension, or nothing when disabled.
//!
//! Every substituted clause ends in a single space, so placeholders are
//! written back to back. A trailing newline in the file is ignored.

use std::collections::BTreeSet;
use std::str::FromStr;

use thiserror::Error;

use crate::textcodec::{truncate_to_budget, Caption};

pub const MAX_WORD_BUDGET: usize = 500;

/// Word budgets used by the experiment presets.
pub const PRESET_BUDGETS: [usize; 4] = [15, 30, 60, 120];

pub const RASTER_SCAN_CLAUSE: &str =
    "Describe the visual elements in a top-to-bottom, left-to-right order";

const DEFAULT_TEMPLATE: &str = include_str!("../templates/structured.txt");

/// Positional words counted by [`spatial_coverage_score`].
pub const SPATIAL_LEXICON: [&str; 11] = [
    "left",
    "right",
    "top",
    "bottom",
    "center",
    "foreground",
    "background",
    "above",
    "below",
    "behind",
    "front",
];

const SPATIAL_NORMALIZER: f64 = 6.0;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PromptError {
    #[error("word budget must be in 1..={MAX_WORD_BUDGET}, got {0}")]
    InvalidBudget(usize),
    #[error("unknown template placeholder {{{0}}}")]
    UnknownPlaceholder(String),
    #[error("unterminated placeholder in template")]
    Unterminated,
    #[error("template lacks the {{N}} budget placeholder")]
    MissingBudget,
    #[error("unknown {kind} `{value}`")]
    UnknownName { kind: &'static str, value: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PromptVariant {
    Structured,
    Unstructured,
}

impl FromStr for PromptVariant {
    type Err = PromptError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "structured" => Ok(Self::Structured),
            "unstructured" => Ok(Self::Unstructured),
            other => Err(PromptError::UnknownName {
                kind: "prompt variant",
                value: other.to_string(),
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ImageTypeHint {
    Photo,
    Painting,
    Anime,
    Diagram,
    #[default]
    Unspecified,
}

impl ImageTypeHint {
    fn clause(self) -> Option<&'static str> {
        match self {
            Self::Photo => Some("The image is a photograph; describe it as a photograph."),
            Self::Painting => {
                Some("The image is a painting; mention the medium and brushwork.")
            }
            Self::Anime => {
                Some("The image is an anime illustration; mention the line art and shading.")
            }
            Self::Diagram => Some(
                "The image is a diagram; list its labels and connections in reading order.",
            ),
            Self::Unspecified => None,
        }
    }
}

impl FromStr for ImageTypeHint {
    type Err = PromptError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "photo" => Ok(Self::Photo),
            "painting" => Ok(Self::Painting),
            "anime" => Ok(Self::Anime),
            "diagram" => Ok(Self::Diagram),
            "unspecified" | "" => Ok(Self::Unspecified),
            other => Err(PromptError::UnknownName {
                kind: "image type",
                value: other.to_string(),
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PromptSpec {
    word_budget: usize,
    pub variant: PromptVariant,
    pub image_type_hint: ImageTypeHint,
}

impl PromptSpec {
    pub fn new(word_budget: usize, variant: PromptVariant) -> Result<Self, PromptError> {
        if !(1..=MAX_WORD_BUDGET).contains(&word_budget) {
            return Err(PromptError::InvalidBudget(word_budget));
        }
        Ok(Self {
            word_budget,
            variant,
            image_type_hint: ImageTypeHint::Unspecified,
        })
    }

    pub fn with_hint(mut self, hint: ImageTypeHint) -> Self {
        self.image_type_hint = hint;
        self
    }

    pub fn word_budget(&self) -> usize {
        self.word_budget
    }
}

/// The six consistency dimensions. All are on by default; switching one off
/// is only meant for ablations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DimensionSet {
    pub feature_correspondence: bool,
    pub geometric_consistency: bool,
    pub photometric_properties: bool,
    pub stylistic_alignment: bool,
    pub semantic_coherence: bool,
    pub structural_integrity: bool,
}

impl Default for DimensionSet {
    fn default() -> Self {
        Self {
            feature_correspondence: true,
            geometric_consistency: true,
            photometric_properties: true,
            stylistic_alignment: true,
            semantic_coherence: true,
            structural_integrity: true,
        }
    }
}

/// Placeholder, display name, clause.
const DIMENSIONS: [(&str, &str, &str); 6] = [
    (
        "DIM_FEATURE_CORRESPONDENCE",
        "Feature correspondence",
        "mention distinctive textures and edges.",
    ),
    (
        "DIM_GEOMETRIC_CONSISTENCY",
        "Geometric consistency",
        "state where objects sit and how they line up.",
    ),
    (
        "DIM_PHOTOMETRIC_PROPERTIES",
        "Photometric properties",
        "mention lighting, shadows and color tones.",
    ),
    (
        "DIM_STYLISTIC_ALIGNMENT",
        "Stylistic alignment",
        "name the visual style.",
    ),
    (
        "DIM_SEMANTIC_COHERENCE",
        "Semantic coherence",
        "keep every object whole and plausible.",
    ),
    (
        "DIM_STRUCTURAL_INTEGRITY",
        "Structural integrity",
        "keep the global composition intact.",
    ),
];

/// Display names of the six dimensions, in prompt order.
pub fn dimension_names() -> [&'static str; 6] {
    DIMENSIONS.map(|(_, name, _)| name)
}

impl DimensionSet {
    fn enabled(&self, placeholder: &str) -> bool {
        match placeholder {
            "DIM_FEATURE_CORRESPONDENCE" => self.feature_correspondence,
            "DIM_GEOMETRIC_CONSISTENCY" => self.geometric_consistency,
            "DIM_PHOTOMETRIC_PROPERTIES" => self.photometric_properties,
            "DIM_STYLISTIC_ALIGNMENT" => self.stylistic_alignment,
            "DIM_SEMANTIC_COHERENCE" => self.semantic_coherence,
            "DIM_STRUCTURAL_INTEGRITY" => self.structural_integrity,
            _ => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Piece {
    Literal(String),
    Budget,
    ImageType,
    Dimension(&'static str),
}

/// A parsed structured-prompt template.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    pieces: Vec<Piece>,
}

impl Default for PromptTemplate {
    fn default() -> Self {
        Self::parse(DEFAULT_TEMPLATE).expect("bundled template is valid")
    }
}

impl PromptTemplate {
    pub fn parse(text: &str) -> Result<Self, PromptError> {
        let text = text.strip_suffix('\n').unwrap_or(text);
        let mut pieces = Vec::new();
        let mut rest = text;
        while let Some(open) = rest.find('{') {
            if open > 0 {
                pieces.push(Piece::Literal(rest[..open].to_string()));
            }
            let close = rest[open..].find('}').ok_or(PromptError::Unterminated)? + open;
            let name = &rest[open + 1..close];
            pieces.push(match name {
                "N" => Piece::Budget,
                "TYPE" => Piece::ImageType,
                _ => match DIMENSIONS.iter().find(|(p, _, _)| *p == name) {
                    Some((p, _, _)) => Piece::Dimension(p),
                    None => return Err(PromptError::UnknownPlaceholder(name.to_string())),
                },
            });
            rest = &rest[close + 1..];
        }
        if !rest.is_empty() {
            pieces.push(Piece::Literal(rest.to_string()));
        }
        if !pieces.contains(&Piece::Budget) {
            return Err(PromptError::MissingBudget);
        }
        Ok(Self { pieces })
    }

    pub fn render(&self, spec: &PromptSpec, dims: &DimensionSet) -> String {
        let mut out = String::new();
        for piece in &self.pieces {
            match piece {
                Piece::Literal(s) => out.push_str(s),
                Piece::Budget => out.push_str(&spec.word_budget.to_string()),
                Piece::ImageType => {
                    if let Some(clause) = spec.image_type_hint.clause() {
                        out.push_str(clause);
                        out.push(' ');
                    }
                }
                Piece::Dimension(p) => {
                    if dims.enabled(p) {
                        let (_, name, clause) = DIMENSIONS
                            .iter()
                            .find(|(q, _, _)| q == p)
                            .expect("parsed placeholders are known");
                        out.push_str(&format!("{name}: {clause} "));
                    }
                }
            }
        }
        out
    }
}

/// Builds the captioning instruction with the bundled template.
pub fn build_prompt(spec: &PromptSpec, dims: &DimensionSet) -> String {
    build_prompt_with(&PromptTemplate::default(), spec, dims)
}

pub fn build_prompt_with(template: &PromptTemplate, spec: &PromptSpec, dims: &DimensionSet) -> String {
    match spec.variant {
        PromptVariant::Structured => template.render(spec, dims),
        PromptVariant::Unstructured => {
            format!("Describe this image in {} words or fewer.", spec.word_budget)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CaptionAction {
    Accepted,
    Truncated,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidationReport {
    /// The caption to transmit; never over budget.
    pub caption: Caption,
    pub within_budget: bool,
    /// Word count of the caption as received.
    pub word_count: usize,
    pub action_taken: CaptionAction,
}

pub fn validate_caption(caption: &Caption, spec: &PromptSpec) -> ValidationReport {
    let word_count = caption.word_count();
    let within_budget = word_count <= spec.word_budget;
    if within_budget {
        return ValidationReport {
            caption: caption.clone(),
            within_budget,
            word_count,
            action_taken: CaptionAction::Accepted,
        };
    }
    let caption = truncate_to_budget(caption, spec.word_budget)
        .expect("PromptSpec budgets are at least 1");
    ValidationReport {
        caption,
        within_budget,
        word_count,
        action_taken: CaptionAction::Truncated,
    }
}

/// Share of the positional lexicon present in the caption, as
/// `distinct matches / 6` capped at 1. Diagnostic only.
pub fn spatial_coverage_score(caption: &Caption) -> f64 {
    let words: BTreeSet<String> = caption
        .text()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(str::to_lowercase)
        .collect();
    let matches = SPATIAL_LEXICON
        .iter()
        .filter(|w| words.contains(**w))
        .count();
    (matches as f64 / SPATIAL_NORMALIZER).min(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(n: usize, variant: PromptVariant) -> PromptSpec {
        PromptSpec::new(n, variant).unwrap()
    }

    #[test]
    fn structured_prompt_has_all_clauses_in_order() {
        let p = build_prompt(&spec(30, PromptVariant::Structured), &DimensionSet::default());
        let raster = p.find(RASTER_SCAN_CLAUSE).unwrap();
        let emphasis = p.find("position, shape, and appearance").unwrap();
        let mut last = emphasis;
        for name in dimension_names() {
            let at = p.find(name).unwrap_or_else(|| panic!("missing {name}"));
            assert!(at > last);
            last = at;
        }
        let budget = p.find("in 30 words or fewer").unwrap();
        assert!(raster < emphasis && last < budget);
        assert!(!p.contains("  "));
        assert!(!p.contains('{'));
    }

    #[test]
    fn image_type_clause_precedes_budget() {
        let s = spec(30, PromptVariant::Structured).with_hint(ImageTypeHint::Painting);
        let p = build_prompt(&s, &DimensionSet::default());
        let ty = p.find("painting").unwrap();
        assert!(ty > p.find("Structural integrity").unwrap());
        assert!(ty < p.find("in 30 words or fewer").unwrap());
        let plain = build_prompt(&spec(30, PromptVariant::Structured), &DimensionSet::default());
        assert!(!plain.contains("The image is"));
    }

    #[test]
    fn unstructured_prompt_is_fixed() {
        let p = build_prompt(&spec(15, PromptVariant::Unstructured), &DimensionSet::default());
        assert_eq!(p, "Describe this image in 15 words or fewer.");
        assert!(!p.contains(RASTER_SCAN_CLAUSE));
    }

    #[test]
    fn disabled_dimension_is_dropped() {
        let dims = DimensionSet {
            geometric_consistency: false,
            ..DimensionSet::default()
        };
        let p = build_prompt(&spec(30, PromptVariant::Structured), &dims);
        assert!(!p.contains("Geometric consistency"));
        assert!(p.contains(RASTER_SCAN_CLAUSE));
        assert!(p.contains("Feature correspondence"));
    }

    #[test]
    fn budget_bounds() {
        assert_eq!(
            PromptSpec::new(0, PromptVariant::Structured),
            Err(PromptError::InvalidBudget(0))
        );
        assert!(PromptSpec::new(500, PromptVariant::Structured).is_ok());
        assert!(PromptSpec::new(501, PromptVariant::Structured).is_err());
    }

    #[test]
    fn template_parse_errors() {
        assert_eq!(
            PromptTemplate::parse("in {N} words {BOGUS}"),
            Err(PromptError::UnknownPlaceholder("BOGUS".into()))
        );
        assert_eq!(PromptTemplate::parse("in {N words"), Err(PromptError::Unterminated));
        assert_eq!(PromptTemplate::parse("no budget"), Err(PromptError::MissingBudget));
        let t = PromptTemplate::parse("Say it in {N} words. {DIM_STYLISTIC_ALIGNMENT}\n").unwrap();
        let s = spec(7, PromptVariant::Structured);
        assert_eq!(
            t.render(&s, &DimensionSet::default()),
            "Say it in 7 words. Stylistic alignment: name the visual style. "
        );
    }

    #[test]
    fn caption_validation() {
        let s = spec(30, PromptVariant::Structured);
        let words = |n: usize| Caption::new(vec!["w"; n].join(" ")).unwrap();

        let r = validate_caption(&words(28), &s);
        assert_eq!(r.action_taken, CaptionAction::Accepted);
        assert!(r.within_budget);

        let r = validate_caption(&words(40), &s);
        assert_eq!(r.action_taken, CaptionAction::Truncated);
        assert!(!r.within_budget);
        assert_eq!(r.word_count, 40);
        assert_eq!(r.caption.word_count(), 30);

        let r = validate_caption(&Caption::new("").unwrap(), &s);
        assert_eq!(r.action_taken, CaptionAction::Accepted);
        assert_eq!(r.word_count, 0);
    }

    #[test]
    fn spatial_scores() {
        let score = |s: &str| spatial_coverage_score(&Caption::new(s).unwrap());
        assert_eq!(score("a cat"), 0.0);
        assert_eq!(
            score("tree on the left, house on the right, mountains in the background"),
            0.5
        );
        assert_eq!(score("Left LEFT left"), 1.0 / 6.0);
        // Word boundaries: "leftover" and "topping" do not count.
        assert_eq!(score("leftover topping"), 0.0);
        assert_eq!(
            score("top left, bottom right, center, front, behind the foreground"),
            1.0
        );
    }
}
