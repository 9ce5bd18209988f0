use std::fmt::Write as _;
use std::path::Path;

use super::types::{
    DdiType, Document, Interaction, Mention, MentionKind, Sentence, Span,
};
use super::CorpusError;
use crate::pksubtype::PkSubtype;

/// Parses one document from its line-oriented text form.
///
/// Grammar (one record per line, `#` comments and blank lines ignored):
///
/// ```text
/// DOC <id> LABELDRUG <name> [ALIAS <name>]*
/// SENT <idx> <raw text>
/// MENTION <id> <kind> <sent idx> <frags a-b[,c-d]*> [DDI <PK|PD|UN>]
/// INT <type> P=<id> T=<id> [S=<id>] [SUBTYPE=<code>]
/// ```
///
/// Fragment indices are inclusive token indices. The parsed document is
/// checked against every data-model invariant before being returned.
pub fn parse_document(text: &str) -> Result<Document, CorpusError> {
    let mut doc: Option<Document> = None;
    for (line_no, raw_line) in text.lines().enumerate() {
        let line_no = line_no + 1;
        let line = raw_line.strip_suffix('\r').unwrap_or(raw_line);
        if line.trim().is_empty() || line.trim_start().starts_with('#') {
            continue;
        }
        let fields = split_fields(line);
        let (kw_col, keyword) = fields[0];
        match keyword {
            "DOC" => {
                if doc.is_some() {
                    return Err(CorpusError::syntax(line_no, kw_col, "second DOC header"));
                }
                doc = Some(parse_doc_header(line_no, &fields)?);
            }
            _ => {
                let doc = doc.as_mut().ok_or_else(|| {
                    CorpusError::syntax(line_no, kw_col, "record before DOC header")
                })?;
                match keyword {
                    "SENT" => parse_sent(line_no, line, &fields, doc)?,
                    "MENTION" => parse_mention(line_no, &fields, doc)?,
                    "INT" => parse_int(line_no, line, &fields, doc)?,
                    other => {
                        return Err(CorpusError::syntax(
                            line_no,
                            kw_col,
                            format!("unknown record type {other:?}"),
                        ));
                    }
                }
            }
        }
    }
    let doc = doc.ok_or_else(|| CorpusError::syntax(1, 1, "missing DOC header"))?;
    doc.validate()?;
    Ok(doc)
}

/// Renders a document in the format accepted by [`parse_document`].
/// Round-trips: parsing the output reproduces the document exactly.
pub fn serialize_document(doc: &Document) -> String {
    let mut out = String::new();
    write!(out, "DOC {} LABELDRUG {}", doc.id, doc.label_drug).unwrap();
    for alias in &doc.label_drug_aliases {
        write!(out, " ALIAS {alias}").unwrap();
    }
    out.push('\n');
    for (i, sent) in doc.sentences.iter().enumerate() {
        writeln!(out, "SENT {i} {}", sent.raw).unwrap();
    }
    for m in &doc.mentions {
        write!(out, "MENTION {} {} {} {}", m.id, m.kind, m.sentence_index, m.span).unwrap();
        if let Some(ddi) = m.ddi_type {
            write!(out, " DDI {ddi}").unwrap();
        }
        out.push('\n');
    }
    for it in &doc.interactions {
        write!(out, "INT {} P={} T={}", it.ddi_type, it.precipitant, it.trigger).unwrap();
        if let Some(s) = &it.specific_interaction {
            write!(out, " S={s}").unwrap();
        }
        if let Some(sub) = &it.pk_subtype {
            write!(out, " SUBTYPE={}", sub.code()).unwrap();
        }
        out.push('\n');
    }
    out
}

/// Reads every regular file in `dir` (sorted by file name) as one document.
pub fn load_corpus_dir(dir: &Path) -> Result<Vec<Document>, CorpusError> {
    let mut paths: Vec<_> = std::fs::read_dir(dir)
        .map_err(|e| CorpusError::Invariant(format!("cannot read {}: {e}", dir.display())))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.is_file())
        .filter(|p| !p.file_name().is_some_and(|n| n.to_string_lossy().starts_with('.')))
        .collect();
    paths.sort();
    let mut docs = Vec::with_capacity(paths.len());
    for path in paths {
        let text = std::fs::read_to_string(&path)
            .map_err(|e| CorpusError::Invariant(format!("cannot read {}: {e}", path.display())))?;
        let doc = parse_document(&text).map_err(|e| match e {
            CorpusError::Syntax { line, col, msg } => CorpusError::Syntax {
                line,
                col,
                msg: format!("{}: {msg}", path.display()),
            },
            other => other,
        })?;
        docs.push(doc);
    }
    Ok(docs)
}

fn parse_doc_header(
    line_no: usize,
    fields: &[(usize, &str)],
) -> Result<Document, CorpusError> {
    let (_, id) = *fields
        .get(1)
        .ok_or_else(|| CorpusError::syntax(line_no, 1, "DOC needs an id"))?;
    match fields.get(2) {
        Some(&(_, "LABELDRUG")) => {}
        Some(&(col, other)) => {
            return Err(CorpusError::syntax(
                line_no,
                col,
                format!("expected LABELDRUG, found {other:?}"),
            ));
        }
        None => return Err(CorpusError::syntax(line_no, 1, "DOC needs LABELDRUG <name>")),
    }
    // The drug name runs until the first ALIAS keyword; each ALIAS keyword
    // starts another name. Multi-token names are joined by single spaces.
    let mut names: Vec<Vec<&str>> = vec![Vec::new()];
    for &(col, field) in &fields[3..] {
        if field == "ALIAS" {
            names.push(Vec::new());
        } else if field == "LABELDRUG" {
            return Err(CorpusError::syntax(line_no, col, "repeated LABELDRUG"));
        } else {
            names.last_mut().unwrap().push(field);
        }
    }
    if names[0].is_empty() {
        return Err(CorpusError::syntax(line_no, 1, "empty label-drug name"));
    }
    if names.iter().any(|n| n.is_empty()) {
        return Err(CorpusError::syntax(line_no, 1, "empty ALIAS name"));
    }
    let mut names = names.into_iter().map(|n| n.join(" "));
    Ok(Document {
        id: id.to_string(),
        label_drug: names.next().unwrap(),
        label_drug_aliases: names.collect(),
        sentences: Vec::new(),
        mentions: Vec::new(),
        interactions: Vec::new(),
    })
}

fn parse_sent(
    line_no: usize,
    line: &str,
    fields: &[(usize, &str)],
    doc: &mut Document,
) -> Result<(), CorpusError> {
    let (idx_col, idx) = *fields
        .get(1)
        .ok_or_else(|| CorpusError::syntax(line_no, 1, "SENT needs an index"))?;
    let idx: usize = idx
        .parse()
        .map_err(|_| CorpusError::syntax(line_no, idx_col, "sentence index must be an integer"))?;
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
        .ok_or_else(|| CorpusError::syntax(line_no, 1, "SENT needs raw text"))?;
    let raw: String = line.chars().skip(raw_col - 1).collect();
    doc.sentences.push(Sentence::new(raw));
    Ok(())
}

fn parse_mention(
    line_no: usize,
    fields: &[(usize, &str)],
    doc: &mut Document,
) -> Result<(), CorpusError> {
    if fields.len() < 5 {
        return Err(CorpusError::syntax(
            line_no,
            1,
            "MENTION needs <id> <kind> <sent idx> <frags>",
        ));
    }
    let (_, id) = fields[1];
    let (kind_col, kind_str) = fields[2];
    let kind = MentionKind::parse(kind_str).ok_or_else(|| {
        CorpusError::syntax(line_no, kind_col, format!("unknown mention kind {kind_str:?}"))
    })?;
    let (idx_col, idx) = fields[3];
    let sentence_index: usize = idx
        .parse()
        .map_err(|_| CorpusError::syntax(line_no, idx_col, "sentence index must be an integer"))?;
    let (frag_col, frags) = fields[4];
    let span = parse_fragments(line_no, frag_col, frags)?;
    let ddi_type = match fields.get(5) {
        None => None,
        Some(&(col, "DDI")) => {
            let (ty_col, ty) = *fields.get(6).ok_or_else(|| {
                CorpusError::syntax(line_no, col, "DDI needs a type")
            })?;
            Some(DdiType::parse(ty).ok_or_else(|| {
                CorpusError::syntax(line_no, ty_col, format!("unknown DDI type {ty:?}"))
            })?)
        }
        Some(&(col, other)) => {
            return Err(CorpusError::syntax(
                line_no,
                col,
                format!("expected DDI, found {other:?}"),
            ));
        }
    };
    doc.mentions.push(Mention { id: id.to_string(), kind, sentence_index, span, ddi_type });
    Ok(())
}

fn parse_int(
    line_no: usize,
    line: &str,
    fields: &[(usize, &str)],
    doc: &mut Document,
) -> Result<(), CorpusError> {
    let (ty_col, ty) = *fields
        .get(1)
        .ok_or_else(|| CorpusError::syntax(line_no, 1, "INT needs a type"))?;
    let ddi_type = DdiType::parse(ty).ok_or_else(|| {
        CorpusError::syntax(line_no, ty_col, format!("unknown interaction type {ty:?}"))
    })?;
    let mut precipitant = None;
    let mut trigger = None;
    let mut specific = None;
    let mut subtype = None;
    for &(col, field) in &fields[2..] {
        if let Some(v) = field.strip_prefix("P=") {
            precipitant = Some(v.to_string());
        } else if let Some(v) = field.strip_prefix("T=") {
            trigger = Some(v.to_string());
        } else if let Some(v) = field.strip_prefix("S=") {
            specific = Some(v.to_string());
        } else if field.starts_with("SUBTYPE=") {
            // The code contains spaces, so it runs to the end of the line.
            let code: String = line.chars().skip(col - 1 + "SUBTYPE=".len()).collect();
            subtype = Some(PkSubtype::parse_code(code.trim()).ok_or_else(|| {
                CorpusError::syntax(line_no, col, format!("unknown subtype code {:?}", code.trim()))
            })?);
            break;
        } else {
            return Err(CorpusError::syntax(
                line_no,
                col,
                format!("unknown INT field {field:?}"),
            ));
        }
    }
    let precipitant =
        precipitant.ok_or_else(|| CorpusError::syntax(line_no, 1, "INT needs P=<id>"))?;
    let trigger = trigger.ok_or_else(|| CorpusError::syntax(line_no, 1, "INT needs T=<id>"))?;
    doc.interactions.push(Interaction {
        ddi_type,
        precipitant,
        trigger,
        specific_interaction: specific,
        pk_subtype: subtype,
    });
    Ok(())
}

pub(super) fn parse_fragments(
    line_no: usize,
    col: usize,
    text: &str,
) -> Result<Span, CorpusError> {
    let mut fragments = Vec::new();
    for part in text.split(',') {
        let (a, b) = part.split_once('-').ok_or_else(|| {
            CorpusError::syntax(line_no, col, format!("bad fragment {part:?}, expected a-b"))
        })?;
        let a: usize = a.parse().map_err(|_| {
            CorpusError::syntax(line_no, col, format!("bad fragment index {a:?}"))
        })?;
        let b: usize = b.parse().map_err(|_| {
            CorpusError::syntax(line_no, col, format!("bad fragment index {b:?}"))
        })?;
        fragments.push((a, b));
    }
    // Keep the list exactly as written; validation rejects unsorted or
    // adjacent fragments so that serialization round-trips byte-stably.
    Ok(Span { fragments })
}

/// Splits a line on whitespace, keeping each field's 1-based char column.
pub(super) fn split_fields(line: &str) -> Vec<(usize, &str)> {
    let mut fields = Vec::new();
    let mut start_byte = None;
    let mut start_col = 0usize;
    let mut col = 0usize;
    for (byte, ch) in line.char_indices() {
        col += 1;
        if ch.is_whitespace() {
            if let Some(s) = start_byte.take() {
                fields.push((start_col, &line[s..byte]));
            }
        } else if start_byte.is_none() {
            start_byte = Some(byte);
            start_col = col;
        }
    }
    if let Some(s) = start_byte {
        fields.push((start_col, &line[s..]));
    }
    fields
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pksubtype::{AffectedObject, PkParameter, Trend};

    #[test]
    fn minimal_document_parses() {
        let doc = parse_document("DOC d1 LABELDRUG warfarin\nSENT 0 No interactions here.\n")
            .unwrap();
        assert_eq!(doc.id, "d1");
        assert_eq!(doc.label_drug, "warfarin");
        assert_eq!(doc.sentences.len(), 1);
        assert!(doc.mentions.is_empty());
        assert!(doc.interactions.is_empty());
    }

    #[test]
    fn dangling_interaction_reference_is_reported() {
        let text = "DOC d1 LABELDRUG warfarin\n\
                    SENT 0 Aspirin may interact somehow.\n\
                    MENTION m1 Precipitant 0 0-0\n\
                    MENTION m2 Trigger 0 2-2 DDI UN\n\
                    INT UN P=m1 T=m9\n";
        let err = parse_document(text).unwrap_err();
        assert!(err.to_string().contains("dangling mention id m9"), "{err}");
    }

    #[test]
    fn pd_document_round_trips() {
        let text = "DOC adoxa LABELDRUG ADOXA ALIAS doxycycline\n\
                    SENT 0 Aspirin may increase the risk of bleeding events.\n\
                    MENTION m1 Precipitant 0 0-0\n\
                    MENTION m2 Trigger 0 2-2 DDI PD\n\
                    MENTION m3 SpecificInteraction 0 6-7\n\
                    INT PD P=m1 T=m2 S=m3\n";
        let doc = parse_document(text).unwrap();
        assert_eq!(doc.mentions.len(), 3);
        assert_eq!(doc.interactions.len(), 1);
        assert_eq!(doc.interactions[0].ddi_type, DdiType::Pd);
        assert_eq!(doc.label_drug_aliases, vec!["doxycycline".to_string()]);
        let doc2 = parse_document(&serialize_document(&doc)).unwrap();
        assert_eq!(doc, doc2);
    }

    #[test]
    fn discontinuous_span_and_subtype_round_trip() {
        let sub = PkSubtype::new(Trend::Decreased, PkParameter::Level, AffectedObject::ConcomitantDrug);
        let text = format!(
            "# a comment\n\
             DOC d2 LABELDRUG digoxin\n\
             SENT 0 Quinidine may decrease renal clearance and plasma levels fall.\n\
             MENTION m1 Precipitant 0 0-0\n\
             MENTION m2 Trigger 0 2-3,7-8 DDI PK\n\
             \n\
             INT PK P=m1 T=m2 SUBTYPE={}\n",
            sub.code()
        );
        let doc = parse_document(&text).unwrap();
        assert_eq!(doc.mentions[1].span.fragments, vec![(2, 3), (7, 8)]);
        assert_eq!(doc.interactions[0].pk_subtype, Some(sub));
        let blob = serialize_document(&doc);
        let doc2 = parse_document(&blob).unwrap();
        assert_eq!(doc, doc2);
        assert_eq!(blob, serialize_document(&doc2));
    }

    #[test]
    fn syntax_errors_carry_line_and_column() {
        let err = parse_document("DOC d1 LABELDRUG w\nSENT 0 ok\nMENTION m1 Nonsense 0 0-0\n")
            .unwrap_err();
        match err {
            CorpusError::Syntax { line, col, ref msg } => {
                assert_eq!(line, 3);
                assert_eq!(col, 12);
                assert!(msg.contains("Nonsense"));
            }
            other => panic!("expected syntax error, got {other}"),
        }
    }

    #[test]
    fn sentence_indices_must_be_sequential() {
        let err = parse_document("DOC d LABELDRUG w\nSENT 1 hello\n").unwrap_err();
        assert!(err.to_string().contains("expected sentence index 0"));
    }

    #[test]
    fn raw_text_survives_exactly() {
        let raw = "Levels rose  (86%)   after dosing.";
        let text = format!("DOC d LABELDRUG w\nSENT 0 {raw}\n");
        let doc = parse_document(&text).unwrap();
        assert_eq!(doc.sentences[0].raw, raw);
    }
}
