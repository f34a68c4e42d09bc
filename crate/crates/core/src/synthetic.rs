//! Synthetic extractive-QA corpora with planted easy/hard structure.
//!
//! Contexts are short stories of "someone did something to something in a
//! year" events padded with filler sentences. Person questions ask who did
//! an event, time questions ask when. Every question template starts with
//! three words that carry only the answer type ("Who was the", "In which
//! year"), so a question is answerable from its prefix exactly when its
//! context holds a single candidate of that type. Contexts with a single
//! event therefore produce easy questions; contexts with several events
//! produce mostly hard ones.

use std::sync::Arc;

use indexmap::IndexMap;
use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{split_by_context, AnswerSpan, ContextDoc, Dataset, Role, Sample, SplitRatios};
use crate::rng::seeded_rng;
use crate::Result;

const SYLLABLES: [&str; 16] = [
    "ka", "lo", "mi", "ra", "ten", "vo", "sa", "dor", "el", "bri", "na", "gus", "ti", "per", "ul", "zan",
];
const VERBS: [&str; 20] = [
    "founded", "painted", "built", "designed", "funded", "restored", "opened", "sold", "bought", "visited",
    "photographed", "repaired", "discovered", "mapped", "named", "guarded", "cleaned", "measured", "described",
    "inspected",
];
const OBJECTS: [&str; 24] = [
    "library", "bridge", "museum", "tower", "garden", "harbor", "school", "chapel", "mill", "theater", "market",
    "lighthouse", "station", "fountain", "gallery", "archive", "stadium", "palace", "canal", "observatory", "castle",
    "orchard", "hospital", "monastery",
];
const ADJECTIVES: [&str; 10] = [
    "mild", "cold", "quiet", "busy", "wet", "calm", "long", "dry", "bright", "grey",
];
const FILLERS: [&str; 5] = [
    "the weather was {adj} that season .",
    "many travelers found the roads {adj} and slow .",
    "local records from that time are {adj} .",
    "the river stayed {adj} for most of the year .",
    "nobody thought the winter would be so {adj} .",
];
const PERSON_TEMPLATES: [&str; 3] = [
    "Who was the one that {verb} the {object} ?",
    "Which person is it that {verb} the {object} ?",
    "Who is known to have {verb} the {object} ?",
];
const TIME_TEMPLATES: [&str; 2] = [
    "When was it that the {object} was {verb} ?",
    "In which year was the {object} {verb} ?",
];

/// Sentence layout of event sentences.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Style {
    /// "In 1990 , Kalo founded the library ."
    YearFirst,
    /// "Kalo , in 1990 , founded the library ."
    NameFirst,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub name: String,
    pub n_contexts: usize,
    /// Share of contexts holding a single event.
    pub single_event_fraction: f64,
    pub min_events: usize,
    pub max_events: usize,
    pub year_probability: f64,
    pub style: Style,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            name: "synthetic".into(),
            n_contexts: 200,
            single_event_fraction: 0.3,
            min_events: 4,
            max_events: 7,
            year_probability: 0.6,
            style: Style::YearFirst,
            seed: 0,
        }
    }
}

struct Event {
    name: String,
    verb: &'static str,
    object: &'static str,
    year: Option<u32>,
}

/// Text assembled token by token, remembering character offsets.
#[derive(Default)]
struct TextBuilder {
    text: String,
    chars: usize,
}

impl TextBuilder {
    /// Appends a word and returns its character offset.
    fn push(&mut self, word: &str) -> usize {
        if !self.text.is_empty() {
            self.text.push(' ');
            self.chars += 1;
        }
        let at = self.chars;
        self.text.push_str(word);
        self.chars += word.chars().count();
        at
    }

    fn push_all(&mut self, sentence: &str) {
        for w in sentence.split_whitespace() {
            self.push(w);
        }
    }
}

fn person_name(rng: &mut impl Rng) -> String {
    let n = rng.random_range(2..=3);
    let mut name: String = (0..n).map(|_| *SYLLABLES.choose(rng).expect("non-empty")).collect();
    name[..1].make_ascii_uppercase();
    name
}

/// Generates one dataset under `config`.
pub fn generate(config: &SyntheticConfig) -> Dataset {
    let mut rng = seeded_rng(config.seed);
    let mut contexts = IndexMap::new();
    let mut samples = Vec::new();
    for c in 0..config.n_contexts {
        let doc_id = format!("{}-c{c:04}", config.name);
        let n_events = if rng.random_bool(config.single_event_fraction.clamp(0.0, 1.0)) {
            1
        } else {
            rng.random_range(config.min_events.max(2)..=config.max_events.max(config.min_events.max(2)))
        };
        let single = n_events == 1;
        let verbs: Vec<&str> = VERBS.choose_multiple(&mut rng, n_events).copied().collect();
        let objects: Vec<&str> = OBJECTS.choose_multiple(&mut rng, n_events).copied().collect();
        let mut names: Vec<String> = Vec::new();
        while names.len() < n_events {
            let n = person_name(&mut rng);
            if !names.contains(&n) {
                names.push(n);
            }
        }
        let mut years: Vec<u32> = Vec::new();
        let events: Vec<Event> = (0..n_events)
            .map(|i| {
                let year = (single || rng.random_bool(config.year_probability)).then(|| loop {
                    let y = rng.random_range(1700..2020);
                    if !years.contains(&y) {
                        years.push(y);
                        break y;
                    }
                });
                Event {
                    name: names[i].clone(),
                    verb: verbs[i],
                    object: objects[i],
                    year,
                }
            })
            .collect();

        let n_fillers = rng.random_range(2..=4);
        let mut layout: Vec<Option<usize>> = (0..n_events).map(Some).chain((0..n_fillers).map(|_| None)).collect();
        layout.shuffle(&mut rng);

        let mut text = TextBuilder::default();
        let mut name_at = vec![0usize; n_events];
        let mut year_at = vec![None; n_events];
        for slot in layout {
            match slot {
                None => {
                    let adj = ADJECTIVES.choose(&mut rng).expect("non-empty");
                    text.push_all(&FILLERS.choose(&mut rng).expect("non-empty").replace("{adj}", adj));
                }
                Some(i) => {
                    let e = &events[i];
                    match (config.style, e.year) {
                        (Style::YearFirst, Some(y)) => {
                            text.push("In");
                            year_at[i] = Some(text.push(&y.to_string()));
                            text.push(",");
                            name_at[i] = text.push(&e.name);
                        }
                        (Style::NameFirst, Some(y)) => {
                            name_at[i] = text.push(&e.name);
                            text.push_all(", in");
                            year_at[i] = Some(text.push(&y.to_string()));
                            text.push(",");
                        }
                        (_, None) => name_at[i] = text.push(&e.name),
                    }
                    text.push_all(&format!("{} the {} .", e.verb, e.object));
                }
            }
        }
        let doc = Arc::new(ContextDoc::new(doc_id.clone(), text.text));

        let mut q = 0;
        let mut ask = |question: String, answer: String, at: usize, samples: &mut Vec<Sample>| {
            let span = AnswerSpan::locate(&doc, &answer, at).expect("generated answer is anchored");
            samples.push(Sample {
                sample_id: format!("{doc_id}-q{q:02}"),
                question,
                doc_id: doc_id.clone(),
                gold_answers: vec![span],
            });
            q += 1;
        };
        for (i, e) in events.iter().enumerate() {
            let fill = |t: &str| t.replace("{verb}", e.verb).replace("{object}", e.object);
            let person: Vec<&str> = if single {
                PERSON_TEMPLATES.to_vec()
            } else {
                let k = if rng.random_bool(0.5) { 2 } else { 1 };
                PERSON_TEMPLATES.choose_multiple(&mut rng, k).copied().collect()
            };
            for t in person {
                ask(fill(t), e.name.clone(), name_at[i], &mut samples);
            }
            if let (Some(y), Some(at)) = (e.year, year_at[i]) {
                let time: Vec<&str> = if single {
                    TIME_TEMPLATES.to_vec()
                } else {
                    vec![*TIME_TEMPLATES.choose(&mut rng).expect("non-empty")]
                };
                for t in time {
                    ask(fill(t), y.to_string(), at, &mut samples);
                }
            }
        }
        contexts.insert(doc_id, doc);
    }
    Dataset::new(config.name.clone(), Role::Train, contexts, samples).expect("generated dataset is consistent")
}

/// Training pool, in-domain hold-out and one out-of-domain set.
#[derive(Debug, Clone)]
pub struct PlantedBenchmark {
    pub train: Dataset,
    pub holdout: Dataset,
    pub generalization: Dataset,
}

/// ~2,000 samples over ~200 contexts, split 90/10 by context, plus a
/// differently styled out-of-domain set.
pub fn planted_benchmark(seed: u64) -> Result<PlantedBenchmark> {
    planted_benchmark_with(seed, SyntheticConfig::default().n_contexts)
}

/// [`planted_benchmark`] over `n_contexts` in-domain contexts; the
/// out-of-domain set keeps a fifth of that.
pub fn planted_benchmark_with(seed: u64, n_contexts: usize) -> Result<PlantedBenchmark> {
    let base = generate(&SyntheticConfig {
        name: "planted".into(),
        n_contexts,
        seed,
        ..SyntheticConfig::default()
    });
    let (train, holdout, _) = split_by_context(&base, SplitRatios([0.9, 0.1, 0.0]), seed)?;
    let generalization = generate(&SyntheticConfig {
        name: "planted-ood".into(),
        n_contexts: (n_contexts / 5).max(1),
        style: Style::NameFirst,
        seed: seed ^ 0xa5a5,
        ..SyntheticConfig::default()
    });
    Ok(PlantedBenchmark {
        train,
        holdout: Dataset::new("planted-holdout", Role::Dev, holdout.contexts().clone(), holdout.samples().to_vec())?,
        generalization: Dataset::new(
            generalization.name.clone(),
            Role::Test,
            generalization.contexts().clone(),
            generalization.samples().to_vec(),
        )?,
    })
}

/// A small dataset: each `(doc_id, sample_ids)` entry becomes a context
/// with one answerable question per id.
pub fn tiny_dataset(layout: &[(&str, &[&str])]) -> Dataset {
    let mut contexts = IndexMap::new();
    let mut samples = Vec::new();
    for (doc_id, ids) in layout {
        let doc = Arc::new(ContextDoc::new(*doc_id, format!("Alpha met Beta in {doc_id} .")));
        for id in *ids {
            samples.push(Sample {
                sample_id: id.to_string(),
                question: "Who met Beta ?".into(),
                doc_id: doc_id.to_string(),
                gold_answers: vec![AnswerSpan::locate(&doc, "Alpha", 0).expect("anchored")],
            });
        }
        contexts.insert(doc_id.to_string(), doc);
    }
    Dataset::new("tiny", Role::Train, contexts, samples).expect("tiny dataset is consistent")
}
