//! A simplified NLM-style annotation format and its converter.
//!
//! The foreign format differs from the native one in three ways: label
//! drugs are explicitly annotated as mentions instead of being a document
//! attribute; the "trigger" of a PD interaction is really the specific
//! interaction phrase; and the real PD trigger, when known, travels in an
//! auxiliary field. [`convert_nlm180`] undoes all three.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::format::{parse_fragments, split_fields};
use super::matcher::LabelDrugMatcher;
use super::types::{DdiType, Document, Interaction, Mention, MentionKind, Sentence, Span};
use super::CorpusError;
use crate::pksubtype::{classify, PkDicts};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ForeignMentionKind {
    /// An explicit annotation of the label drug in the text.
    LabelDrug,
    Precipitant,
    /// For PK/UN interactions the real trigger; for PD interactions this is
    /// in fact the specific interaction phrase.
    Trigger,
}

impl ForeignMentionKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ForeignMentionKind::LabelDrug => "LabelDrug",
            ForeignMentionKind::Precipitant => "Precipitant",
            ForeignMentionKind::Trigger => "Trigger",
        }
    }

    pub fn parse(s: &str) -> Option<ForeignMentionKind> {
        match s {
            "LabelDrug" => Some(ForeignMentionKind::LabelDrug),
            "Precipitant" => Some(ForeignMentionKind::Precipitant),
            "Trigger" => Some(ForeignMentionKind::Trigger),
            _ => None,
        }
    }
}

impl fmt::Display for ForeignMentionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForeignMention {
    pub id: String,
    pub kind: ForeignMentionKind,
    pub sentence_index: usize,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForeignInteraction {
    pub ddi_type: DdiType,
    pub precipitant: String,
    pub trigger: String,
    /// The real PD trigger mention; required for PD records, absent otherwise.
    pub aux_trigger: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForeignDocument {
    pub id: String,
    pub label_drug: String,
    pub sentences: Vec<String>,
    pub mentions: Vec<ForeignMention>,
    pub interactions: Vec<ForeignInteraction>,
}

impl ForeignDocument {
    pub fn mention(&self, id: &str) -> Option<&ForeignMention> {
        self.mentions.iter().find(|m| m.id == id)
    }
}

/// Parses the foreign line format:
///
/// ```text
/// NDOC <id> DRUG <name>
/// NSENT <idx> <raw text>
/// NMENTION <id> <LabelDrug|Precipitant|Trigger> <sent idx> <frags>
/// NINT <PK|PD|UN> P=<id> T=<id> [AUX=<id>]
/// ```
pub fn parse_foreign_document(text: &str) -> Result<ForeignDocument, CorpusError> {
    let mut doc: Option<ForeignDocument> = None;
    for (line_no, raw_line) in text.lines().enumerate() {
        let line_no = line_no + 1;
        let line = raw_line.strip_suffix('\r').unwrap_or(raw_line);
        if line.trim().is_empty() || line.trim_start().starts_with('#') {
            continue;
        }
        let fields = split_fields(line);
        let (kw_col, keyword) = fields[0];
        if keyword == "NDOC" {
            if doc.is_some() {
                return Err(CorpusError::syntax(line_no, kw_col, "second NDOC header"));
            }
            if fields.len() < 4 || fields[2].1 != "DRUG" {
                return Err(CorpusError::syntax(line_no, kw_col, "expected NDOC <id> DRUG <name>"));
            }
            let name: Vec<&str> = fields[3..].iter().map(|&(_, f)| f).collect();
            doc = Some(ForeignDocument {
                id: fields[1].1.to_string(),
                label_drug: name.join(" "),
                sentences: Vec::new(),
                mentions: Vec::new(),
                interactions: Vec::new(),
            });
            continue;
        }
        let doc = doc
            .as_mut()
            .ok_or_else(|| CorpusError::syntax(line_no, kw_col, "record before NDOC header"))?;
        match keyword {
            "NSENT" => {
                let (idx_col, idx) = *fields
                    .get(1)
                    .ok_or_else(|| CorpusError::syntax(line_no, 1, "NSENT needs an index"))?;
                let idx: usize = idx.parse().map_err(|_| {
                    CorpusError::syntax(line_no, idx_col, "sentence index must be an integer")
                })?;
                if idx != doc.sentences.len() {
                    return Err(CorpusError::syntax(
                        line_no,
                        idx_col,
                        format!("expected sentence index {}, found {idx}", doc.sentences.len()),
                    ));
                }
                let raw_col = fields
                    .get(2)
                    .map(|&(col, _)| col)
                    .ok_or_else(|| CorpusError::syntax(line_no, 1, "NSENT needs raw text"))?;
                doc.sentences.push(line.chars().skip(raw_col - 1).collect());
            }
            "NMENTION" => {
                if fields.len() != 5 {
                    return Err(CorpusError::syntax(
                        line_no,
                        1,
                        "NMENTION needs <id> <kind> <sent idx> <frags>",
                    ));
                }
                let kind = ForeignMentionKind::parse(fields[2].1).ok_or_else(|| {
                    CorpusError::syntax(
                        line_no,
                        fields[2].0,
                        format!("unknown mention kind {:?}", fields[2].1),
                    )
                })?;
                let sentence_index: usize = fields[3].1.parse().map_err(|_| {
                    CorpusError::syntax(line_no, fields[3].0, "sentence index must be an integer")
                })?;
                let span = parse_fragments(line_no, fields[4].0, fields[4].1)?;
                doc.mentions.push(ForeignMention {
                    id: fields[1].1.to_string(),
                    kind,
                    sentence_index,
                    span,
                });
            }
            "NINT" => {
                let (ty_col, ty) = *fields
                    .get(1)
                    .ok_or_else(|| CorpusError::syntax(line_no, 1, "NINT needs a type"))?;
                let ddi_type = DdiType::parse(ty).ok_or_else(|| {
                    CorpusError::syntax(line_no, ty_col, format!("unknown interaction type {ty:?}"))
                })?;
                let mut precipitant = None;
                let mut trigger = None;
                let mut aux = None;
                for &(col, field) in &fields[2..] {
                    if let Some(v) = field.strip_prefix("P=") {
                        precipitant = Some(v.to_string());
                    } else if let Some(v) = field.strip_prefix("T=") {
                        trigger = Some(v.to_string());
                    } else if let Some(v) = field.strip_prefix("AUX=") {
                        aux = Some(v.to_string());
                    } else {
                        return Err(CorpusError::syntax(
                            line_no,
                            col,
                            format!("unknown NINT field {field:?}"),
                        ));
                    }
                }
                let precipitant = precipitant
                    .ok_or_else(|| CorpusError::syntax(line_no, 1, "NINT needs P=<id>"))?;
                let trigger =
                    trigger.ok_or_else(|| CorpusError::syntax(line_no, 1, "NINT needs T=<id>"))?;
                doc.interactions.push(ForeignInteraction {
                    ddi_type,
                    precipitant,
                    trigger,
                    aux_trigger: aux,
                });
            }
            other => {
                return Err(CorpusError::syntax(
                    line_no,
                    kw_col,
                    format!("unknown record type {other:?}"),
                ));
            }
        }
    }
    doc.ok_or_else(|| CorpusError::syntax(1, 1, "missing NDOC header"))
}

pub fn serialize_foreign_document(doc: &ForeignDocument) -> String {
    let mut out = String::new();
    writeln!(out, "NDOC {} DRUG {}", doc.id, doc.label_drug).unwrap();
    for (i, raw) in doc.sentences.iter().enumerate() {
        writeln!(out, "NSENT {i} {raw}").unwrap();
    }
    for m in &doc.mentions {
        writeln!(out, "NMENTION {} {} {} {}", m.id, m.kind, m.sentence_index, m.span).unwrap();
    }
    for it in &doc.interactions {
        write!(out, "NINT {} P={} T={}", it.ddi_type, it.precipitant, it.trigger).unwrap();
        if let Some(aux) = &it.aux_trigger {
            write!(out, " AUX={aux}").unwrap();
        }
        out.push('\n');
    }
    out
}

/// Converts a foreign document to the native model.
///
/// * Label-drug mentions are removed; their surface forms become document
///   aliases.
/// * Precipitant mentions whose text matches the label drug or an alias
///   are filtered out, along with interactions that reference them.
/// * PD records: the foreign trigger becomes the SpecificInteraction and
///   the auxiliary field, which must be present, becomes the real Trigger.
/// * PK records get a subtype from the rule classifier, since the foreign
///   format carries none.
/// * Foreign trigger mentions referenced by no interaction are dropped
///   (their interaction type is unknowable).
pub fn convert_nlm180(
    foreign: &ForeignDocument,
    dicts: &PkDicts,
) -> Result<Document, CorpusError> {
    let sentences: Vec<Sentence> =
        foreign.sentences.iter().map(|raw| Sentence::new(raw.clone())).collect();

    // Pass 0: every foreign mention must have a unique id and lie within
    // an existing sentence.
    let mut foreign_ids: HashSet<&str> = HashSet::new();
    for m in &foreign.mentions {
        if !foreign_ids.insert(m.id.as_str()) {
            return Err(CorpusError::Invariant(format!("duplicate mention id {}", m.id)));
        }
        let sent = sentences.get(m.sentence_index).ok_or_else(|| {
            CorpusError::Invariant(format!(
                "mention {} references missing sentence {}",
                m.id, m.sentence_index
            ))
        })?;
        m.span.validate(sent.tokens.len())?;
    }

    // Pass 1: label-drug mentions become aliases.
    let mut aliases: Vec<String> = Vec::new();
    let mut seen_names: HashSet<String> = HashSet::new();
    seen_names.insert(foreign.label_drug.to_lowercase());
    for m in &foreign.mentions {
        if m.kind != ForeignMentionKind::LabelDrug {
            continue;
        }
        let sent = &sentences[m.sentence_index];
        let text = m.span.covered_text(&sent.tokens);
        if seen_names.insert(text.to_lowercase()) {
            aliases.push(text);
        }
    }
    let matcher = LabelDrugMatcher::new(&foreign.label_drug, &aliases);

    // Pass 2: keep precipitants that do not match the label drug.
    let mut mentions: Vec<Mention> = Vec::new();
    let mut used_ids: HashSet<String> = HashSet::new();
    let mut dropped_precipitants: HashSet<&str> = HashSet::new();
    for m in &foreign.mentions {
        if m.kind != ForeignMentionKind::Precipitant {
            continue;
        }
        let sent = &sentences[m.sentence_index];
        if matcher.matches_span(&sent.tokens, &m.span) {
            log::warn!(
                "dropping precipitant {} ({:?}): matches the label drug",
                m.id,
                m.span.covered_text(&sent.tokens)
            );
            dropped_precipitants.insert(m.id.as_str());
            continue;
        }
        used_ids.insert(m.id.clone());
        mentions.push(Mention {
            id: m.id.clone(),
            kind: MentionKind::Precipitant,
            sentence_index: m.sentence_index,
            span: m.span.clone(),
            ddi_type: None,
        });
    }

    // Pass 3: interactions, creating typed trigger / specific-interaction
    // mentions as they are referenced.
    let mut interactions: Vec<Interaction> = Vec::new();
    let mut interned: HashMap<(MentionKind, Option<DdiType>, usize, Span), String> =
        HashMap::new();
    let mut intern = |foreign_id: &str,
                      kind: MentionKind,
                      ddi: Option<DdiType>,
                      sentence_index: usize,
                      span: &Span,
                      mentions: &mut Vec<Mention>,
                      used_ids: &mut HashSet<String>|
     -> String {
        let key = (kind, ddi, sentence_index, span.clone());
        if let Some(id) = interned.get(&key) {
            return id.clone();
        }
        let mut id = foreign_id.to_string();
        let mut n = 1;
        while !used_ids.insert(id.clone()) {
            n += 1;
            id = format!("{foreign_id}x{n}");
        }
        mentions.push(Mention {
            id: id.clone(),
            kind,
            sentence_index,
            span: span.clone(),
            ddi_type: ddi,
        });
        interned.insert(key, id.clone());
        id
    };

    for it in &foreign.interactions {
        if dropped_precipitants.contains(it.precipitant.as_str()) {
            log::warn!("dropping interaction of filtered precipitant {}", it.precipitant);
            continue;
        }
        let prec = foreign.mention(&it.precipitant).ok_or_else(|| {
            CorpusError::Invariant(format!("dangling mention id {}", it.precipitant))
        })?;
        let trig = foreign.mention(&it.trigger).ok_or_else(|| {
            CorpusError::Invariant(format!("dangling mention id {}", it.trigger))
        })?;
        let sent = &sentences[trig.sentence_index];
        match it.ddi_type {
            DdiType::Pd => {
                let aux_id = it
                    .aux_trigger
                    .as_deref()
                    .ok_or_else(|| CorpusError::MissingPdTrigger(it.precipitant.clone()))?;
                let aux = foreign.mention(aux_id).ok_or_else(|| {
                    CorpusError::Invariant(format!("dangling mention id {aux_id}"))
                })?;
                let si_id = intern(
                    &it.trigger,
                    MentionKind::SpecificInteraction,
                    None,
                    trig.sentence_index,
                    &trig.span,
                    &mut mentions,
                    &mut used_ids,
                );
                let trig_id = intern(
                    aux_id,
                    MentionKind::Trigger,
                    Some(DdiType::Pd),
                    aux.sentence_index,
                    &aux.span,
                    &mut mentions,
                    &mut used_ids,
                );
                interactions.push(Interaction {
                    ddi_type: DdiType::Pd,
                    precipitant: it.precipitant.clone(),
                    trigger: trig_id,
                    specific_interaction: Some(si_id),
                    pk_subtype: None,
                });
            }
            DdiType::Pk => {
                let trig_id = intern(
                    &it.trigger,
                    MentionKind::Trigger,
                    Some(DdiType::Pk),
                    trig.sentence_index,
                    &trig.span,
                    &mut mentions,
                    &mut used_ids,
                );
                let occurrences = matcher.occurrences(&sent.tokens);
                let subtype =
                    classify(&sent.tokens, &trig.span, &prec.span, &occurrences, dicts).subtype;
                interactions.push(Interaction {
                    ddi_type: DdiType::Pk,
                    precipitant: it.precipitant.clone(),
                    trigger: trig_id,
                    specific_interaction: None,
                    pk_subtype: Some(subtype),
                });
            }
            DdiType::Un => {
                let trig_id = intern(
                    &it.trigger,
                    MentionKind::Trigger,
                    Some(DdiType::Un),
                    trig.sentence_index,
                    &trig.span,
                    &mut mentions,
                    &mut used_ids,
                );
                interactions.push(Interaction {
                    ddi_type: DdiType::Un,
                    precipitant: it.precipitant.clone(),
                    trigger: trig_id,
                    specific_interaction: None,
                    pk_subtype: None,
                });
            }
        }
    }

    let orphan_triggers = foreign
        .mentions
        .iter()
        .filter(|m| m.kind == ForeignMentionKind::Trigger)
        .filter(|m| {
            !foreign.interactions.iter().any(|it| {
                it.trigger == m.id || it.aux_trigger.as_deref() == Some(m.id.as_str())
            })
        })
        .count();
    if orphan_triggers > 0 {
        log::warn!("dropping {orphan_triggers} foreign trigger mention(s) with no interaction");
    }

    let doc = Document {
        id: foreign.id.clone(),
        label_drug: foreign.label_drug.clone(),
        label_drug_aliases: aliases,
        sentences,
        mentions,
        interactions,
    };
    doc.validate()?;
    Ok(doc)
}

/// Renders a native document in the foreign format: label-drug occurrences
/// become explicit mentions, PD specific interactions take the trigger
/// slot with the real trigger in the auxiliary field, and PK subtypes are
/// dropped. Mainly used to build converter fixtures.
pub fn document_to_foreign(doc: &Document) -> ForeignDocument {
    let matcher = LabelDrugMatcher::for_document(doc);
    let mut mentions: Vec<ForeignMention> = Vec::new();
    let mut ld_count = 0usize;
    for (si, sent) in doc.sentences.iter().enumerate() {
        for span in matcher.occurrences(&sent.tokens) {
            ld_count += 1;
            mentions.push(ForeignMention {
                id: format!("ld{ld_count}"),
                kind: ForeignMentionKind::LabelDrug,
                sentence_index: si,
                span,
            });
        }
    }
    for m in &doc.mentions {
        let kind = match m.kind {
            MentionKind::Precipitant => ForeignMentionKind::Precipitant,
            // Both real triggers and specific interactions are "triggers"
            // in the foreign annotation model.
            MentionKind::Trigger | MentionKind::SpecificInteraction => {
                ForeignMentionKind::Trigger
            }
        };
        mentions.push(ForeignMention {
            id: m.id.clone(),
            kind,
            sentence_index: m.sentence_index,
            span: m.span.clone(),
        });
    }
    let interactions = doc
        .interactions
        .iter()
        .map(|it| match it.ddi_type {
            DdiType::Pd => ForeignInteraction {
                ddi_type: DdiType::Pd,
                precipitant: it.precipitant.clone(),
                trigger: it.specific_interaction.clone().expect("PD carries one"),
                aux_trigger: Some(it.trigger.clone()),
            },
            _ => ForeignInteraction {
                ddi_type: it.ddi_type,
                precipitant: it.precipitant.clone(),
                trigger: it.trigger.clone(),
                aux_trigger: None,
            },
        })
        .collect();
    ForeignDocument {
        id: doc.id.clone(),
        label_drug: doc.label_drug.clone(),
        sentences: doc.sentences.iter().map(|s| s.raw.clone()).collect(),
        mentions,
        interactions,
    }
}
