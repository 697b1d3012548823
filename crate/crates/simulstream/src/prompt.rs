//! Primed prompt rendering and background-information handling.
//!
//! The rendered prompt has three turns: a system message (optionally
//! embedding a background document that constrains terminology), a user turn
//! holding the partial source, and an assistant turn pre-filled with the
//! partial translation. With response priming enabled the prompt ends
//! exactly at the last character of the partial target, so a completion
//! backend can only continue the translation — it cannot prepend apologies
//! or notes. With priming disabled (ablation mode) the partial target moves
//! into the user turn and the assistant turn is left empty.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PromptError {
    #[error("partial source must be non-empty")]
    EmptySource,
    #[error("invalid chat template: {0}")]
    Template(String),
    #[error("background document parse error: {0}")]
    Parse(String),
    #[error("background document schema error: {0}")]
    Schema(String),
    #[error("no parseable background document found in response")]
    Extraction,
    #[error("input text must be non-empty")]
    EmptyText,
}

/// Special strings flanking the prompt turns. Defaults follow the Llama-3
/// convention; all four markers are configurable so other model families can
/// be targeted.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatTemplate {
    pub begin_marker: String,
    pub header_open: String,
    pub header_close: String,
    pub turn_end: String,
    pub system_role: String,
    pub user_role: String,
    pub assistant_role: String,
}

impl Default for ChatTemplate {
    fn default() -> Self {
        Self {
            begin_marker: "<|begin_of_text|>".into(),
            header_open: "<|start_header_id|>".into(),
            header_close: "<|end_header_id|>".into(),
            turn_end: "<|eot_id|>".into(),
            system_role: "system".into(),
            user_role: "user".into(),
            assistant_role: "assistant".into(),
        }
    }
}

impl ChatTemplate {
    pub fn validate(&self) -> Result<(), PromptError> {
        let markers = [
            &self.begin_marker,
            &self.header_open,
            &self.header_close,
            &self.turn_end,
        ];
        if markers.iter().any(|m| m.is_empty()) {
            return Err(PromptError::Template("markers must be non-empty".into()));
        }
        for i in 0..markers.len() {
            for j in i + 1..markers.len() {
                if markers[i] == markers[j] {
                    return Err(PromptError::Template(format!(
                        "markers must be pairwise distinct, found {:?} twice",
                        markers[i]
                    )));
                }
            }
        }
        Ok(())
    }

    fn header(&self, role: &str) -> String {
        format!("{}{}{}", self.header_open, role, self.header_close)
    }
}

/// One glossary entry of a background document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NamedEntity {
    pub entity: String,
    pub description: String,
}

/// Per-discourse topic and named-entity glossary, injected into the system
/// message to keep terminology consistent across a talk.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BackgroundInfo {
    pub topic: String,
    #[serde(default)]
    pub named_entities: Vec<NamedEntity>,
}

impl BackgroundInfo {
    /// Single-line serialization as embedded in the system message.
    pub fn to_compact_json(&self) -> String {
        serde_json::to_string(self).expect("background serialization cannot fail")
    }
}

/// Parse and validate a background document. Unknown fields are ignored;
/// duplicate or empty entity names are rejected.
pub fn load_background(document: &str) -> Result<BackgroundInfo, PromptError> {
    let info: BackgroundInfo = serde_json::from_str(document).map_err(|e| {
        if e.classify() == serde_json::error::Category::Data {
            PromptError::Schema(e.to_string())
        } else {
            PromptError::Parse(e.to_string())
        }
    })?;
    validate_background(&info)?;
    Ok(info)
}

fn validate_background(info: &BackgroundInfo) -> Result<(), PromptError> {
    let mut seen = std::collections::HashSet::new();
    for entity in &info.named_entities {
        if entity.entity.is_empty() {
            return Err(PromptError::Schema("entity name must be non-empty".into()));
        }
        if !seen.insert(entity.entity.as_str()) {
            return Err(PromptError::Schema(format!(
                "duplicate entity {:?}",
                entity.entity
            )));
        }
    }
    Ok(())
}

/// The instruction a session puts in the system turn. When a background
/// document is supplied it is embedded, single-line, in the middle of the
/// message.
pub fn system_message(
    src_lang: &str,
    tgt_lang: &str,
    background: Option<&BackgroundInfo>,
) -> String {
    match background {
        Some(bg) => format!(
            "You are a conference interpreter. As you translate, you can use the following \
             background information: {}. Taking into account the original {src_lang} text, \
             complete its translation into {tgt_lang}. Do not add any notes or comments to \
             the translation.",
            bg.to_compact_json()
        ),
        None => format!(
            "You are a conference interpreter. Taking into account the original {src_lang} \
             text, complete its translation into {tgt_lang}. Do not add any notes or comments \
             to the translation."
        ),
    }
}

/// Everything needed to render one prompt for one generation step.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptSpec {
    pub src_lang: String,
    pub tgt_lang: String,
    pub system_message: String,
    pub background: Option<BackgroundInfo>,
    pub partial_source: Vec<String>,
    pub partial_target: Vec<String>,
    pub priming_enabled: bool,
}

impl PromptSpec {
    /// Build a spec with the default system message; the background document,
    /// when present, is embedded into it.
    pub fn new(
        src_lang: impl Into<String>,
        tgt_lang: impl Into<String>,
        background: Option<BackgroundInfo>,
    ) -> Self {
        let src_lang = src_lang.into();
        let tgt_lang = tgt_lang.into();
        let message = system_message(&src_lang, &tgt_lang, background.as_ref());
        Self {
            src_lang,
            tgt_lang,
            system_message: message,
            background,
            partial_source: Vec::new(),
            partial_target: Vec::new(),
            priming_enabled: true,
        }
    }
}

/// Render the primed prompt.
///
/// Layout: begin marker, system turn (system message with any embedded
/// background), user turn `Context: <partial source>`, assistant turn
/// `<target language> translation: <partial target>`. With priming enabled
/// the output ends exactly at the last partial-target character (or at the
/// `"translation: "` label's trailing space when the target is still empty)
/// so that backend continuations concatenate seamlessly.
pub fn render_prompt(spec: &PromptSpec, template: &ChatTemplate) -> Result<String, PromptError> {
    template.validate()?;
    if spec.partial_source.is_empty() {
        return Err(PromptError::EmptySource);
    }
    let source = spec.partial_source.join(" ");
    let target = spec.partial_target.join(" ");
    let label = format!("{} translation:", spec.tgt_lang);

    let mut out = String::new();
    out.push_str(&template.begin_marker);
    out.push_str(&template.header(&template.system_role));
    out.push('\n');
    out.push_str(&spec.system_message);
    out.push('\n');
    out.push_str(&template.turn_end);
    out.push_str(&template.header(&template.user_role));
    out.push('\n');
    out.push_str("Context: ");
    out.push_str(&source);
    out.push('\n');
    if spec.priming_enabled {
        out.push_str(&template.turn_end);
        out.push_str(&template.header(&template.assistant_role));
        out.push('\n');
        out.push_str(&label);
        out.push(' ');
        out.push_str(&target);
    } else {
        out.push_str(&label);
        out.push(' ');
        out.push_str(&target);
        out.push('\n');
        out.push_str(&template.turn_end);
        out.push_str(&template.header(&template.assistant_role));
        out.push('\n');
    }
    Ok(out)
}

const EXTRACTION_EXAMPLE: &str = r#"{
  "topic": "Climate Crisis and Fossil Fuel Industry's Influence",
  "named_entities": [
    {
      "entity": "troposphere",
      "description": "the lowest part of the atmosphere"
    },
    {
      "entity": "gravity-measuring satellite",
      "description": "satellite used to observe water surpluses and deficits"
    },
    {
      "entity": "Inflation Reduction Act",
      "description": "U.S. legislation aimed at addressing climate change"
    },
    {
      "entity": "fossil fuel industry",
      "description": "industry opposing climate legislation"
    },
    {
      "entity": "UN Secretary General",
      "description": "stated fossil fuel industry is the 'polluted heart' of climate crisis"
    },
    {
      "entity": "COP process",
      "description": "Conference of the Parties, climate change conferences"
    },
    {
      "entity": "COP28",
      "description": "upcoming climate conference hosted by UAE"
    },
    {
      "entity": "Sultan Al Jaber",
      "description": "CEO of Abu Dhabi National Oil Company and president of COP28"
    },
    {
      "entity": "Paris Agreement",
      "description": "international treaty on climate change"
    },
    {
      "entity": "Chevron",
      "description": "company with 93% of profits from fossil fuels"
    },
    {
      "entity": "World Bank",
      "description": "institution needing reform to aid developing countries"
    },
    {
      "entity": "gigafactory",
      "description": "large factory for producing batteries and renewable energy components"
    },
    {
      "entity": "Drew Shindell",
      "description": "researcher on CO2 reduction timelines"
    }
  ]
}"#;

/// Prompt asking a completion backend to distill a talk transcript into a
/// background document, with one worked example in-prompt.
pub fn build_extraction_prompt(full_text: &str) -> Result<String, PromptError> {
    if full_text.is_empty() {
        return Err(PromptError::EmptyText);
    }
    Ok(format!(
        "Please extract the topic and named entities (which are either proper names, \
         technical terms or acronyms) from the following text, and return them as a JSON \
         object with the following fields: topic, named_entities({{entity, description}}). \
         For example:\n\n{EXTRACTION_EXAMPLE}\n\n{full_text}"
    ))
}

/// Locate the first structured document inside a (possibly chatty) model
/// response and parse it. Models often wrap their output in prose or code
/// fences; any balanced JSON object that validates as a background document
/// is accepted.
pub fn parse_extraction_response(response: &str) -> Result<BackgroundInfo, PromptError> {
    let mut offset = 0;
    while let Some((start, end)) = find_balanced_object(&response[offset..]) {
        let candidate = &response[offset + start..offset + end];
        if let Ok(info) = load_background(candidate) {
            return Ok(info);
        }
        offset += start + 1;
    }
    Err(PromptError::Extraction)
}

/// Byte range of the first balanced `{...}` group, skipping over string
/// literals.
fn find_balanced_object(text: &str) -> Option<(usize, usize)> {
    let bytes = text.as_bytes();
    let mut start = None;
    let mut depth = 0usize;
    let mut in_string = false;
    let mut escaped = false;
    for (i, &b) in bytes.iter().enumerate() {
        if in_string {
            if escaped {
                escaped = false;
            } else if b == b'\\' {
                escaped = true;
            } else if b == b'"' {
                in_string = false;
            }
            continue;
        }
        match b {
            b'"' if start.is_some() => in_string = true,
            b'{' => {
                if start.is_none() {
                    start = Some(i);
                }
                depth += 1;
            }
            b'}' if start.is_some() => {
                depth -= 1;
                if depth == 0 {
                    return Some((start.unwrap(), i + 1));
                }
            }
            _ => {}
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    const LISTING: &str = r#"{
        "topic": "Climate Crisis and Fossil Fuel Industry's Influence",
        "named_entities": [
            {"entity": "troposphere", "description": "the lowest part of the atmosphere"},
            {"entity": "Inflation Reduction Act", "description": "U.S. legislation aimed at addressing climate change"},
            {"entity": "COP process", "description": "Conference of the Parties, climate change conferences"},
            {"entity": "COP28", "description": "upcoming climate conference hosted by UAE"}
        ]
    }"#;

    fn spec() -> PromptSpec {
        let mut spec = PromptSpec::new("English", "German", None);
        spec.partial_source = vec!["Early".into(), "elections".into()];
        spec.partial_target = vec!["Vorzeitige".into()];
        spec
    }

    #[test]
    fn render_layout_mid_sentence() {
        let got = render_prompt(&spec(), &ChatTemplate::default()).unwrap();
        let expected = "<|begin_of_text|><|start_header_id|>system<|end_header_id|>\n\
            You are a conference interpreter. Taking into account the original English text, \
            complete its translation into German. Do not add any notes or comments to the \
            translation.\n\
            <|eot_id|><|start_header_id|>user<|end_header_id|>\n\
            Context: Early elections\n\
            <|eot_id|><|start_header_id|>assistant<|end_header_id|>\n\
            German translation: Vorzeitige";
        assert_eq!(got, expected);
    }

    #[test]
    fn empty_target_ends_with_label_and_space() {
        let mut s = spec();
        s.partial_target.clear();
        let got = render_prompt(&s, &ChatTemplate::default()).unwrap();
        assert!(got.ends_with("German translation: "));
    }

    #[test]
    fn render_is_pure() {
        let s = spec();
        let template = ChatTemplate::default();
        assert_eq!(
            render_prompt(&s, &template).unwrap(),
            render_prompt(&s, &template).unwrap()
        );
    }

    #[test]
    fn priming_suffix_property() {
        let s = spec();
        let got = render_prompt(&s, &ChatTemplate::default()).unwrap();
        assert!(got.ends_with("Vorzeitige"));
    }

    #[test]
    fn priming_toggle_relocates_target_only() {
        let on = render_prompt(&spec(), &ChatTemplate::default()).unwrap();
        let mut s = spec();
        s.priming_enabled = false;
        let off = render_prompt(&s, &ChatTemplate::default()).unwrap();
        // Both carry the same labelled target exactly once.
        assert_eq!(on.matches("German translation: Vorzeitige").count(), 1);
        assert_eq!(off.matches("German translation: Vorzeitige").count(), 1);
        // Without priming the assistant turn is empty and ends the prompt.
        assert!(off.ends_with("<|start_header_id|>assistant<|end_header_id|>\n"));
        // System and source regions agree byte for byte.
        let sys_end = on.find("<|start_header_id|>user").unwrap();
        assert_eq!(on[..sys_end], off[..sys_end]);
        assert!(on.contains("Context: Early elections\n"));
        assert!(off.contains("Context: Early elections\n"));
    }

    #[test]
    fn empty_source_is_an_error() {
        let mut s = spec();
        s.partial_source.clear();
        assert!(matches!(
            render_prompt(&s, &ChatTemplate::default()),
            Err(PromptError::EmptySource)
        ));
    }

    #[test]
    fn background_document_embeds_in_system_message() {
        let bg = load_background(LISTING).unwrap();
        let mut s = PromptSpec::new("English", "German", Some(bg.clone()));
        s.partial_source = vec!["Hello".into()];
        let got = render_prompt(&s, &ChatTemplate::default()).unwrap();
        assert!(got.contains(&bg.to_compact_json()));
        // The document appears only in the system region.
        let user_start = got.find("<|start_header_id|>user").unwrap();
        assert!(!got[user_start..].contains("troposphere"));
    }

    #[test]
    fn duplicate_markers_rejected() {
        let template = ChatTemplate {
            turn_end: "<|begin_of_text|>".into(),
            ..ChatTemplate::default()
        };
        assert!(matches!(
            render_prompt(&spec(), &template),
            Err(PromptError::Template(_))
        ));
    }

    #[test]
    fn load_background_listing_document() {
        let bg = load_background(LISTING).unwrap();
        assert_eq!(bg.topic, "Climate Crisis and Fossil Fuel Industry's Influence");
        assert_eq!(bg.named_entities.len(), 4);
        assert_eq!(bg.named_entities[0].entity, "troposphere");
    }

    #[test]
    fn empty_glossary_is_valid() {
        let bg = load_background(r#"{"topic":"T","named_entities":[]}"#).unwrap();
        assert_eq!(bg.topic, "T");
        assert!(bg.named_entities.is_empty());
    }

    #[test]
    fn duplicate_entity_rejected() {
        let doc = r#"{"topic":"T","named_entities":[
            {"entity":"X","description":"a"},
            {"entity":"X","description":"b"}
        ]}"#;
        assert!(matches!(load_background(doc), Err(PromptError::Schema(_))));
    }

    #[test]
    fn missing_topic_is_schema_error() {
        let err = load_background(r#"{"named_entities":[]}"#).unwrap_err();
        assert!(matches!(err, PromptError::Schema(msg) if msg.contains("topic")));
    }

    #[test]
    fn malformed_document_reports_position() {
        let err = load_background("{\"topic\": \"T\",\n  oops}").unwrap_err();
        assert!(matches!(err, PromptError::Parse(msg) if msg.contains("line 2")));
    }

    #[test]
    fn unknown_fields_ignored() {
        let bg = load_background(r#"{"topic":"T","named_entities":[],"extra":42}"#).unwrap();
        assert_eq!(bg.topic, "T");
    }

    #[test]
    fn background_round_trip() {
        let bg = load_background(LISTING).unwrap();
        assert_eq!(load_background(&bg.to_compact_json()).unwrap(), bg);
    }

    #[test]
    fn extraction_prompt_contains_exemplar_and_ends_with_text() {
        let prompt = build_extraction_prompt("My talk about rivers.").unwrap();
        assert!(prompt.contains("Drew Shindell"));
        assert!(prompt.ends_with("My talk about rivers."));
    }

    #[test]
    fn extraction_prompt_rejects_empty_text() {
        assert!(matches!(
            build_extraction_prompt(""),
            Err(PromptError::EmptyText)
        ));
    }

    #[test]
    fn extraction_prompts_differ_only_in_trailing_text() {
        let a = build_extraction_prompt("AAA").unwrap();
        let b = build_extraction_prompt("BBB").unwrap();
        assert_eq!(a.strip_suffix("AAA").unwrap(), b.strip_suffix("BBB").unwrap());
    }

    #[test]
    fn parse_response_with_fences_and_prose() {
        let response = format!(
            "Sure! Here is the background information you asked for:\n```json\n{LISTING}\n```\nLet me know if you need anything else."
        );
        let bg = parse_extraction_response(&response).unwrap();
        assert_eq!(bg.named_entities.len(), 4);
    }

    #[test]
    fn parse_response_bare_document() {
        assert_eq!(
            parse_extraction_response(LISTING).unwrap(),
            load_background(LISTING).unwrap()
        );
    }

    #[test]
    fn parse_response_skips_non_matching_objects() {
        let response = format!("{{\"note\": \"ignore me\"}} then {LISTING}");
        let bg = parse_extraction_response(&response).unwrap();
        assert_eq!(bg.topic, "Climate Crisis and Fossil Fuel Industry's Influence");
    }

    #[test]
    fn parse_response_pure_prose_fails() {
        assert!(matches!(
            parse_extraction_response("no structure here at all"),
            Err(PromptError::Extraction)
        ));
    }
}
