//! Hypernym taxonomy and knee-based conceptualization.
//!
//! File format (UTF-8, `#` comments, tab-separated):
//!
//! ```text
//! core.n.01	interiority.n.01	6     # child, hypernym, sense weight
//! importance.n.01	-	4             # root node
//! syn	importance.n.01	importance,matter,significance
//! ```
//!
//! Node ids are `lemma.pos.NN` with pos one of `n v a s r`. A node's
//! synonym set always contains its head lemma. A node may have several
//! hypernyms; repeated declarations must agree on the weight.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fs;
use std::path::Path;

use super::knee::knee_point;
use super::token::Pos;
use crate::error::{HanError, Result};

#[derive(Clone, Debug, PartialEq)]
struct Node {
    pos: Pos,
    weight: f64,
    parents: Vec<String>,
    synonyms: BTreeSet<String>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Taxonomy {
    nodes: BTreeMap<String, Node>,
    by_lemma: BTreeMap<String, BTreeSet<String>>,
}

fn split_id(id: &str) -> Option<(&str, Pos)> {
    let mut it = id.rsplitn(3, '.');
    let num = it.next()?;
    let pos = Pos::from_code(it.next()?)?;
    let lemma = it.next()?;
    (!lemma.is_empty() && !num.is_empty() && num.bytes().all(|b| b.is_ascii_digit())).then_some((lemma, pos))
}

impl Taxonomy {
    pub fn parse(text: &str) -> Result<Self> {
        let mut nodes: BTreeMap<String, Node> = BTreeMap::new();
        let mut first_line: HashMap<String, usize> = HashMap::new();
        let mut references: Vec<(String, usize)> = Vec::new();
        let mut syn_lines: Vec<(String, Vec<String>, usize)> = Vec::new();

        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let bad = |message: String| HanError::MalformedTaxonomy { line, message };
            let l = raw.trim_end_matches('\r');
            if l.trim().is_empty() || l.trim_start().starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = l.split('\t').map(str::trim).collect();
            let [a, b, c] = fields[..] else {
                return Err(bad(format!("expected 3 tab-separated fields, got {}", fields.len())));
            };
            if a == "syn" {
                let lemmas: Vec<String> =
                    c.split(',').map(|s| s.trim().to_lowercase()).filter(|s| !s.is_empty()).collect();
                syn_lines.push((b.to_string(), lemmas, line));
                continue;
            }
            let Some((head, pos)) = split_id(a) else {
                return Err(bad(format!("bad node id {a:?}, expected lemma.pos.NN")));
            };
            let weight: f64 = c.parse().map_err(|_| bad(format!("bad weight {c:?}")))?;
            if !weight.is_finite() || weight < 0.0 {
                return Err(bad(format!("weight must be finite and >= 0, got {c}")));
            }
            let node = nodes.entry(a.to_string()).or_insert_with(|| Node {
                pos,
                weight,
                parents: Vec::new(),
                synonyms: BTreeSet::from([head.to_lowercase()]),
            });
            if node.weight != weight {
                return Err(bad(format!("conflicting weights for {a}: {} vs {weight}", node.weight)));
            }
            first_line.entry(a.to_string()).or_insert(line);
            if b != "-" {
                if split_id(b).is_none() {
                    return Err(bad(format!("bad node id {b:?}, expected lemma.pos.NN")));
                }
                if !node.parents.iter().any(|p| p == b) {
                    node.parents.push(b.to_string());
                }
                references.push((b.to_string(), line));
            }
        }

        for (id, line) in &references {
            if !nodes.contains_key(id) {
                return Err(HanError::MalformedTaxonomy {
                    line: *line,
                    message: format!("hypernym {id} is never declared"),
                });
            }
        }
        for (id, lemmas, line) in syn_lines {
            let node = nodes.get_mut(&id).ok_or_else(|| HanError::MalformedTaxonomy {
                line,
                message: format!("synonyms for undeclared node {id}"),
            })?;
            node.synonyms.extend(lemmas);
        }

        // every node reaches a root iff the hypernym graph is acyclic
        #[derive(Clone, Copy, PartialEq)]
        enum Mark {
            Open,
            Done,
        }
        let mut marks: HashMap<&str, Mark> = HashMap::new();
        for start in nodes.keys() {
            if marks.contains_key(start.as_str()) {
                continue;
            }
            let mut stack: Vec<(&str, usize)> = vec![(start, 0)];
            marks.insert(start, Mark::Open);
            while let Some((id, next)) = stack.pop() {
                let parents = &nodes[id].parents;
                if next == parents.len() {
                    marks.insert(id, Mark::Done);
                    continue;
                }
                stack.push((id, next + 1));
                let p = parents[next].as_str();
                match marks.get(p) {
                    Some(Mark::Open) => {
                        return Err(HanError::MalformedTaxonomy {
                            line: first_line[id],
                            message: format!("hypernym cycle through {id} and {p}"),
                        })
                    }
                    Some(Mark::Done) => {}
                    None => {
                        marks.insert(p, Mark::Open);
                        stack.push((p, 0));
                    }
                }
            }
        }

        let mut by_lemma: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
        for (id, node) in &nodes {
            for lemma in &node.synonyms {
                by_lemma.entry(lemma.clone()).or_default().insert(id.clone());
            }
        }
        Ok(Taxonomy { nodes, by_lemma })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::parse(&fs::read_to_string(path).map_err(|e| HanError::io(path, e))?)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn contains_lemma(&self, lemma: &str) -> bool {
        self.by_lemma.contains_key(lemma)
    }

    /// Nodes whose synonym set contains `lemma`, in id order.
    pub fn synsets_with(&self, lemma: &str) -> impl Iterator<Item = &str> {
        self.by_lemma.get(lemma).into_iter().flatten().map(String::as_str)
    }

    /// Senses of `lemma` with the given part of speech, in id order.
    pub fn senses(&self, lemma: &str, pos: Pos) -> Vec<&str> {
        self.synsets_with(lemma).filter(|id| self.nodes[*id].pos == pos).collect()
    }

    /// Part of speech of the lemma's first sense.
    pub fn first_pos(&self, lemma: &str) -> Option<Pos> {
        self.synsets_with(lemma).next().map(|id| self.nodes[id].pos)
    }

    pub fn pos(&self, id: &str) -> Option<Pos> {
        self.nodes.get(id).map(|n| n.pos)
    }

    pub fn weight(&self, id: &str) -> Option<f64> {
        self.nodes.get(id).map(|n| n.weight)
    }

    pub fn hypernyms(&self, id: &str) -> &[String] {
        self.nodes.get(id).map_or(&[], |n| n.parents.as_slice())
    }

    pub fn synonyms(&self, id: &str) -> impl Iterator<Item = &str> {
        self.nodes.get(id).into_iter().flat_map(|n| n.synonyms.iter().map(String::as_str))
    }

    /// Concept label of a node: its head lemma, uppercased.
    pub fn label(&self, id: &str) -> String {
        split_id(id).map_or(id, |(head, _)| head).to_uppercase()
    }

    /// Ancestors of `id` with their shortest hypernym distance.
    fn ancestors(&self, id: &str) -> BTreeMap<&str, usize> {
        let mut dist = BTreeMap::new();
        let mut queue = VecDeque::from([(id, 0usize)]);
        while let Some((n, k)) = queue.pop_front() {
            for p in self.hypernyms(n) {
                if !dist.contains_key(p.as_str()) {
                    dist.insert(p.as_str(), k + 1);
                    queue.push_back((p, k + 1));
                }
            }
        }
        dist
    }
}

#[derive(Clone, Debug, PartialEq)]
struct LevelBest<'t> {
    node: &'t str,
    coverage: f64,
}

/// Abstracts a word into a concept label.
///
/// Level `k` considers every hypernym within `k` steps of some sense of the
/// lemma. A hypernym covers the senses it is reachable from within `k`
/// steps; its coverage is their share of the total sense weight (uniform
/// weights if all are zero). The best hypernym per level has the highest
/// coverage, then the shortest reach, then the smallest id. The knee of the
/// best-coverage-per-level curve picks the level; with fewer than 3 levels
/// or no knee, the first level reaching the maximum coverage is used. A
/// lemma whose senses are all roots is its own concept.
pub fn conceptualize(lemma: &str, pos: Pos, taxonomy: &Taxonomy) -> Result<String> {
    let senses = taxonomy.senses(lemma, pos);
    if senses.is_empty() {
        return Err(HanError::UnknownWord {
            lemma: lemma.to_string(),
            pos: pos.to_string(),
        });
    }
    let raw: Vec<f64> = senses.iter().map(|s| taxonomy.nodes[*s].weight).collect();
    let total: f64 = raw.iter().sum();
    let weights: Vec<f64> = if total > 0.0 {
        raw.iter().map(|w| w / total).collect()
    } else {
        vec![1.0 / senses.len() as f64; senses.len()]
    };
    let ancestors: Vec<BTreeMap<&str, usize>> = senses.iter().map(|s| taxonomy.ancestors(s)).collect();
    let depth = ancestors.iter().flat_map(|a| a.values().copied()).max().unwrap_or(0);
    if depth == 0 {
        let heaviest = (0..senses.len()).fold(0, |b, i| if weights[i] > weights[b] { i } else { b });
        return Ok(taxonomy.label(senses[heaviest]));
    }

    let own: BTreeSet<&str> = senses.iter().copied().collect();
    let candidates: BTreeSet<&str> =
        ancestors.iter().flat_map(|a| a.keys().copied()).filter(|c| !own.contains(c)).collect();
    let mut levels: Vec<LevelBest> = Vec::with_capacity(depth);
    for k in 1..=depth {
        let mut best: Option<(f64, usize, &str)> = None;
        for &c in &candidates {
            let mut coverage = 0.0;
            let mut reach = 0;
            for (a, w) in ancestors.iter().zip(&weights) {
                if let Some(&dk) = a.get(c).filter(|&&dk| dk <= k) {
                    coverage += w;
                    reach = reach.max(dk);
                }
            }
            if reach == 0 {
                continue;
            }
            let better = match best {
                None => true,
                Some((bc, br, _)) => coverage > bc || (coverage == bc && reach < br),
            };
            if better {
                best = Some((coverage, reach, c));
            }
        }
        match best {
            Some((coverage, _, node)) => levels.push(LevelBest { node, coverage }),
            // only the lemma's own senses are reachable so far
            None => levels.push(LevelBest { node: "", coverage: 0.0 }),
        }
    }
    let curve: Vec<f64> = levels.iter().map(|l| l.coverage).collect();
    let knee = if curve.len() >= 3 { knee_point(&curve).ok() } else { None };
    let level = knee.unwrap_or_else(|| {
        let max = curve.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        curve.iter().position(|&c| c == max).expect("non-empty curve")
    });
    let chosen = &levels[level];
    if chosen.node.is_empty() {
        return Err(HanError::EmptyConcept);
    }
    Ok(taxonomy.label(chosen.node))
}
