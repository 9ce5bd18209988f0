//! Deterministic synthetic corpus generator.
//!
//! The generated documents are the test substitute for real annotated
//! labels: small, varied, valid by construction, and disciplined so that
//! a perfect tagger could reproduce them exactly — every precipitant takes
//! part in at least one interaction, overlapping mentions always share one
//! precipitant and one trigger, every mention set is representable in the
//! tag codec, and PK subtypes are produced by the same classifier the
//! extraction pipeline uses.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::matcher::LabelDrugMatcher;
use super::types::{
    DdiType, Document, Interaction, Mention, MentionKind, Sentence, Span,
};
use crate::pksubtype::{classify, PkDicts};

const LABEL_DRUGS: &[&str] = &[
    "Adoxamil", "Betrozine", "Cavodrel", "Dexulfan", "Epratide", "Fluvexin",
    "Gadolor", "Hepzarin", "Ixabrel", "Jantovir", "Kelzane", "Lorvastat",
];

const PRECIPITANTS: &[&str] = &[
    "ketoconazole", "rifampin", "warfarin", "digoxin", "cyclosporine",
    "phenytoin", "erythromycin", "itraconazole", "cimetidine", "quinidine",
    "verapamil", "amiodarone",
];

const TRENDS: &[&str] = &["increased", "decreased", "elevated", "reduced", "raised", "lowered"];

const PARAMS: &[&str] =
    &["exposure", "concentration", "AUC", "Cmax", "half-life", "bioavailability"];

const PD_VERBS: &[&str] = &["potentiate", "enhance", "antagonize", "attenuate"];

const PD_EFFECTS: &[&[&str]] = &[
    &["excessive", "sedation"],
    &["severe", "hypotension"],
    &["QT", "prolongation"],
    &["serotonin", "syndrome"],
    &["respiratory", "depression"],
    &["bleeding"],
];

/// (left adjective, right adjective, shared head) for coordinated effects.
const PD_PAIRS: &[(&str, &str, &str)] = &[
    ("hepatic", "renal", "toxicity"),
    ("motor", "cognitive", "impairment"),
    ("systolic", "diastolic", "hypotension"),
    ("auditory", "vestibular", "ototoxicity"),
];

const FILLERS: &[&[&str]] = &[
    &["Store", "at", "room", "temperature"],
    &["See", "full", "prescribing", "information", "for", "details"],
    &["Monitor", "patients", "closely", "during", "treatment"],
    &["No", "dosage", "adjustment", "is", "required"],
];

/// One planned sentence: its words (one token each; a final period is
/// appended on serialization), mention descriptors, and interactions
/// referencing mentions by local index.
struct SentencePlan {
    words: Vec<String>,
    mentions: Vec<(MentionKind, Vec<(usize, usize)>, Option<DdiType>)>,
    interactions: Vec<(DdiType, usize, usize, Option<usize>)>,
}

impl SentencePlan {
    fn bare(words: &[&str]) -> Self {
        SentencePlan {
            words: words.iter().map(|w| w.to_string()).collect(),
            mentions: Vec::new(),
            interactions: Vec::new(),
        }
    }
}

fn pick<'a, R: Rng>(rng: &mut R, items: &[&'a str]) -> &'a str {
    items[rng.random_range(0..items.len())]
}

fn pick_two<'a, R: Rng>(rng: &mut R, items: &[&'a str]) -> (&'a str, &'a str) {
    let a = rng.random_range(0..items.len());
    let mut b = rng.random_range(0..items.len() - 1);
    if b >= a {
        b += 1;
    }
    (items[a], items[b])
}

/// "<P> coadministration <trend> the <param> of <LD>" — label drug and
/// precipitant tie on distance, so the label drug's pharmacokinetics are
/// the ones described.
fn pk_near_label(rng: &mut ChaCha8Rng, ld: &str) -> SentencePlan {
    let p = pick(rng, PRECIPITANTS);
    let words = vec![
        p.to_string(),
        "coadministration".into(),
        pick(rng, TRENDS).into(),
        "the".into(),
        pick(rng, PARAMS).into(),
        "of".into(),
        ld.to_string(),
    ];
    SentencePlan {
        words,
        mentions: vec![
            (MentionKind::Precipitant, vec![(0, 0)], None),
            (MentionKind::Trigger, vec![(2, 4)], Some(DdiType::Pk)),
        ],
        interactions: vec![(DdiType::Pk, 0, 1, None)],
    }
}

/// "Coadministration of <P> <trend> the <param> of <LD>" — here the
/// precipitant sits next to the trigger, so the concomitant drug wins.
fn pk_near_precipitant(rng: &mut ChaCha8Rng, ld: &str) -> SentencePlan {
    let p = pick(rng, PRECIPITANTS);
    let words = vec![
        "Coadministration".to_string(),
        "of".into(),
        p.to_string(),
        pick(rng, TRENDS).into(),
        "the".into(),
        pick(rng, PARAMS).into(),
        "of".into(),
        ld.to_string(),
    ];
    SentencePlan {
        words,
        mentions: vec![
            (MentionKind::Precipitant, vec![(2, 2)], None),
            (MentionKind::Trigger, vec![(3, 5)], Some(DdiType::Pk)),
        ],
        interactions: vec![(DdiType::Pk, 0, 1, None)],
    }
}

/// PK sentence without any label-drug occurrence.
fn pk_no_label(rng: &mut ChaCha8Rng) -> SentencePlan {
    let p = pick(rng, PRECIPITANTS);
    let words = vec![
        "Coadministration".to_string(),
        "of".into(),
        p.to_string(),
        "significantly".into(),
        pick(rng, TRENDS).into(),
        "plasma".into(),
        pick(rng, PARAMS).into(),
    ];
    SentencePlan {
        words,
        mentions: vec![
            (MentionKind::Precipitant, vec![(2, 2)], None),
            (MentionKind::Trigger, vec![(4, 6)], Some(DdiType::Pk)),
        ],
        interactions: vec![(DdiType::Pk, 0, 1, None)],
    }
}

/// Two precipitants sharing one PK trigger.
fn pk_double(rng: &mut ChaCha8Rng, ld: &str) -> SentencePlan {
    let (pa, pb) = pick_two(rng, PRECIPITANTS);
    let words = vec![
        pa.to_string(),
        "and".into(),
        pb.to_string(),
        "each".into(),
        pick(rng, TRENDS).into(),
        "the".into(),
        pick(rng, PARAMS).into(),
        "of".into(),
        ld.to_string(),
    ];
    SentencePlan {
        words,
        mentions: vec![
            (MentionKind::Precipitant, vec![(0, 0)], None),
            (MentionKind::Precipitant, vec![(2, 2)], None),
            (MentionKind::Trigger, vec![(4, 6)], Some(DdiType::Pk)),
        ],
        interactions: vec![(DdiType::Pk, 0, 2, None), (DdiType::Pk, 1, 2, None)],
    }
}

/// "Concomitant use of <P> may <verb> <effect...>".
fn pd_simple(rng: &mut ChaCha8Rng) -> SentencePlan {
    let p = pick(rng, PRECIPITANTS);
    let effect = PD_EFFECTS[rng.random_range(0..PD_EFFECTS.len())];
    let mut words: Vec<String> = vec![
        "Concomitant".into(),
        "use".into(),
        "of".into(),
        p.to_string(),
        "may".into(),
        pick(rng, PD_VERBS).into(),
    ];
    let e_first = words.len();
    words.extend(effect.iter().map(|w| w.to_string()));
    let e_last = words.len() - 1;
    SentencePlan {
        words,
        mentions: vec![
            (MentionKind::Precipitant, vec![(3, 3)], None),
            (MentionKind::Trigger, vec![(5, 5)], Some(DdiType::Pd)),
            (MentionKind::SpecificInteraction, vec![(e_first, e_last)], None),
        ],
        interactions: vec![(DdiType::Pd, 0, 1, Some(2))],
    }
}

/// "<P> may increase the risk of <A> and <B> <head>": two specific
/// interactions share the head word, one of them discontinuous.
fn pd_shared_pair(rng: &mut ChaCha8Rng) -> SentencePlan {
    let p = pick(rng, PRECIPITANTS);
    let (a, b, head) = PD_PAIRS[rng.random_range(0..PD_PAIRS.len())];
    let words: Vec<String> = vec![
        p.to_string(),
        "may".into(),
        "increase".into(),
        "the".into(),
        "risk".into(),
        "of".into(),
        a.into(),
        "and".into(),
        b.into(),
        head.into(),
    ];
    SentencePlan {
        words,
        mentions: vec![
            (MentionKind::Precipitant, vec![(0, 0)], None),
            (MentionKind::Trigger, vec![(2, 4)], Some(DdiType::Pd)),
            (MentionKind::SpecificInteraction, vec![(6, 6), (9, 9)], None),
            (MentionKind::SpecificInteraction, vec![(8, 9)], None),
        ],
        interactions: vec![(DdiType::Pd, 0, 1, Some(2)), (DdiType::Pd, 0, 1, Some(3))],
    }
}

fn un_interaction(rng: &mut ChaCha8Rng, ld: &str) -> SentencePlan {
    let p = pick(rng, PRECIPITANTS);
    if rng.random_bool(0.5) {
        let words = vec![
            "Drug".to_string(),
            "interaction".into(),
            "studies".into(),
            "with".into(),
            p.to_string(),
            "have".into(),
            "not".into(),
            "been".into(),
            "conducted".into(),
        ];
        SentencePlan {
            words,
            mentions: vec![
                (MentionKind::Trigger, vec![(1, 1)], Some(DdiType::Un)),
                (MentionKind::Precipitant, vec![(4, 4)], None),
            ],
            interactions: vec![(DdiType::Un, 1, 0, None)],
        }
    } else {
        let words = vec![
            "The".to_string(),
            "interaction".into(),
            "of".into(),
            p.to_string(),
            "with".into(),
            ld.to_string(),
            "is".into(),
            "unknown".into(),
        ];
        SentencePlan {
            words,
            mentions: vec![
                (MentionKind::Trigger, vec![(1, 1)], Some(DdiType::Un)),
                (MentionKind::Precipitant, vec![(3, 3)], None),
            ],
            interactions: vec![(DdiType::Un, 1, 0, None)],
        }
    }
}

fn label_only(rng: &mut ChaCha8Rng, ld: &str) -> SentencePlan {
    if rng.random_bool(0.5) {
        SentencePlan::bare(&["Take", ld, "once", "daily", "with", "food"])
    } else {
        SentencePlan::bare(&[ld, "is", "administered", "orally"])
    }
}

/// Generates a deterministic corpus of `n_docs` synthetic documents.
///
/// The same `(seed, n_docs)` always yields the same corpus. Documents mix
/// PK, PD and UN interactions, discontinuous and shared-word mention
/// pairs, label-drug aliases, sentences without the label drug, and
/// sentences without any annotation; every document passes validation.
pub fn synth_corpus(seed: u64, n_docs: usize) -> Vec<Document> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dicts = PkDicts::builtin();
    (0..n_docs).map(|i| synth_document(&mut rng, i, &dicts)).collect()
}

fn synth_document(rng: &mut ChaCha8Rng, index: usize, dicts: &PkDicts) -> Document {
    let canonical = pick(rng, LABEL_DRUGS);
    let alias = canonical[..4].to_uppercase();
    let aliases = if rng.random_bool(0.5) { vec![alias] } else { Vec::new() };
    let matcher = LabelDrugMatcher::new(canonical, &aliases);

    let mut doc = Document {
        id: format!("synth{index:04}"),
        label_drug: canonical.to_string(),
        label_drug_aliases: aliases.clone(),
        sentences: Vec::new(),
        mentions: Vec::new(),
        interactions: Vec::new(),
    };

    let n_sentences = rng.random_range(2..=4);
    for sentence_index in 0..n_sentences {
        // The in-sentence label drug surface form: canonical or an alias.
        let surface = if !aliases.is_empty() && rng.random_bool(0.3) {
            aliases[0].clone()
        } else {
            canonical.to_string()
        };
        let plan = match rng.random_range(0..100) {
            0..18 => pk_near_label(rng, &surface),
            18..33 => pk_near_precipitant(rng, &surface),
            33..43 => pk_no_label(rng),
            43..51 => pk_double(rng, &surface),
            51..66 => pd_simple(rng),
            66..76 => pd_shared_pair(rng),
            76..88 => un_interaction(rng, &surface),
            88..94 => label_only(rng, &surface),
            _ => SentencePlan::bare(FILLERS[rng.random_range(0..FILLERS.len())]),
        };

        let raw = format!("{}.", plan.words.join(" "));
        let sentence = Sentence::new(raw);
        debug_assert_eq!(sentence.tokens.len(), plan.words.len() + 1);
        let occurrences = matcher.occurrences(&sentence.tokens);

        let base = doc.mentions.len();
        for (local, (kind, fragments, ddi_type)) in plan.mentions.iter().enumerate() {
            doc.mentions.push(Mention {
                id: format!("m{}", base + local),
                kind: *kind,
                sentence_index,
                span: Span::from_fragments(fragments.clone()),
                ddi_type: *ddi_type,
            });
        }
        for &(ddi_type, p_local, t_local, si_local) in &plan.interactions {
            let precipitant = &doc.mentions[base + p_local];
            let trigger = &doc.mentions[base + t_local];
            let pk_subtype = (ddi_type == DdiType::Pk).then(|| {
                classify(
                    &sentence.tokens,
                    &trigger.span,
                    &precipitant.span,
                    &occurrences,
                    dicts,
                )
                .subtype
            });
            doc.interactions.push(Interaction {
                ddi_type,
                precipitant: precipitant.id.clone(),
                trigger: trigger.id.clone(),
                specific_interaction: si_local.map(|l| doc.mentions[base + l].id.clone()),
                pk_subtype,
            });
        }
        doc.sentences.push(sentence);
    }

    doc.validate().expect("synthetic documents are valid by construction");
    doc
}

#[cfg(test)]
mod tests {
    use super::super::format::{parse_document, serialize_document};
    use super::*;
    use crate::codec::{encode, TagScheme};

    #[test]
    fn zero_documents_is_an_empty_corpus() {
        assert!(synth_corpus(7, 0).is_empty());
    }

    #[test]
    fn same_seed_same_corpus() {
        assert_eq!(synth_corpus(7, 20), synth_corpus(7, 20));
        assert_ne!(synth_corpus(7, 20), synth_corpus(8, 20));
    }

    #[test]
    fn corpus_exercises_every_annotation_shape() {
        let corpus = synth_corpus(7, 200);
        assert_eq!(corpus.len(), 200);
        let mut types_seen = [false; 3];
        let mut discontinuous_si = false;
        let mut absent_label_sentence = false;
        let mut alias_seen = false;
        for doc in &corpus {
            for interaction in &doc.interactions {
                types_seen[interaction.ddi_type as usize] = true;
            }
            for mention in &doc.mentions {
                discontinuous_si |= mention.kind == MentionKind::SpecificInteraction
                    && !mention.span.is_contiguous();
            }
            let matcher = LabelDrugMatcher::for_document(doc);
            for sentence in &doc.sentences {
                absent_label_sentence |= matcher.occurrences(&sentence.tokens).is_empty();
            }
            alias_seen |= !doc.label_drug_aliases.is_empty();
        }
        assert!(types_seen.iter().all(|&t| t), "all three interaction types");
        assert!(discontinuous_si, "at least one discontinuous specific interaction");
        assert!(absent_label_sentence, "at least one sentence without the label drug");
        assert!(alias_seen, "at least one document with an alias");
    }

    #[test]
    fn fifty_documents_round_trip_byte_stable() {
        for doc in synth_corpus(3, 50) {
            let first = serialize_document(&doc);
            let reparsed = parse_document(&first).unwrap();
            assert_eq!(reparsed, doc);
            assert_eq!(serialize_document(&reparsed), first);
        }
    }

    /// The tagging discipline behind the oracle-stub pipeline: per sentence,
    /// the precipitants encode in BIOHD; per precipitant, the step-2 targets
    /// (trigger, or specific interaction for PD) encode in fine-grained
    /// BIOHD; per sentence, the PD triggers encode in BIOHD.
    #[test]
    fn every_sentence_is_codec_representable() {
        for doc in synth_corpus(13, 100) {
            for (s, sentence) in doc.sentences.iter().enumerate() {
                let n = sentence.tokens.len();
                let precipitants: Vec<_> = doc
                    .mentions
                    .iter()
                    .filter(|m| m.sentence_index == s && m.kind == MentionKind::Precipitant)
                    .collect();
                let step1: Vec<_> =
                    precipitants.iter().map(|m| (m.span.clone(), None)).collect();
                encode(n, &step1, TagScheme::Biohd).expect("step-1 targets representable");

                for p in &precipitants {
                    let mut step2 = Vec::new();
                    for interaction in &doc.interactions {
                        if interaction.precipitant != p.id {
                            continue;
                        }
                        let target = interaction
                            .specific_interaction
                            .as_deref()
                            .unwrap_or(&interaction.trigger);
                        let span = doc.mention(target).unwrap().span.clone();
                        step2.push((span, Some(interaction.ddi_type)));
                    }
                    step2.sort();
                    step2.dedup();
                    encode(n, &step2, TagScheme::BiohdDdi)
                        .expect("step-2 targets representable");
                }

                let step3: Vec<_> = doc
                    .mentions
                    .iter()
                    .filter(|m| {
                        m.sentence_index == s
                            && m.kind == MentionKind::Trigger
                            && m.ddi_type == Some(DdiType::Pd)
                    })
                    .map(|m| (m.span.clone(), None))
                    .collect();
                encode(n, &step3, TagScheme::Biohd).expect("step-3 targets representable");
            }
        }
    }
}
