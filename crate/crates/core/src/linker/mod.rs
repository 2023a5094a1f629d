//! Text-visual links: which narration words talk about which table rows,
//! and through the row map, which chart elements.
//!
//! Two backends produce links. The rule matcher scans the narration for
//! cell values and is fully deterministic. The LLM backend sends a prompt to
//! a chat-completion service and parses replies in the line grammar
//! `(segment)[table x: R0, R1]`.

mod grammar;
mod llm;
mod prompt;
mod rules;

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::chart::{ElementRowMap, RowRef};
use crate::narration::SegmentSpan;

pub use grammar::{parse_llm_output, serialize_links, ParsedLinks};
pub use llm::{link_llm, HttpLlmClient, LlmClient, LlmError};
pub use prompt::build_prompt;
pub use rules::{key_matches_at, link_rules, match_keys, MatchKey};

#[derive(Debug, thiserror::Error)]
pub enum LinkError {
    #[error("llm service unreachable: {0}")]
    LlmUnreachable(String),
    #[error("llm returned an empty reply")]
    LlmEmptyOutput,
    #[error("link refers to unknown row {0}")]
    UnknownRowRef(RowRef),
    #[error("failed to write transcript {path}: {source}")]
    Io {
        path: std::path::PathBuf,
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LinkOrigin {
    Llm,
    Rules,
}

impl fmt::Display for LinkOrigin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LinkOrigin::Llm => "llm",
            LinkOrigin::Rules => "rules",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TextVisualLink {
    pub span: SegmentSpan,
    /// Sorted, without repeats.
    pub row_refs: Vec<RowRef>,
    /// Filled by [`resolve_elements`].
    pub element_ids: BTreeSet<String>,
    pub origin: LinkOrigin,
}

impl TextVisualLink {
    pub fn new(span: SegmentSpan, rows: impl IntoIterator<Item = RowRef>, origin: LinkOrigin) -> Self {
        let mut row_refs: Vec<RowRef> = rows.into_iter().collect();
        row_refs.sort();
        row_refs.dedup();
        Self {
            span,
            row_refs,
            element_ids: BTreeSet::new(),
            origin,
        }
    }

    fn key(&self) -> (SegmentSpan, &[RowRef]) {
        (self.span, &self.row_refs)
    }

    /// Span and rows both inside `other`'s.
    fn within(&self, other: &TextVisualLink) -> bool {
        other.span.contains(&self.span) && self.row_refs.iter().all(|r| other.row_refs.contains(r))
    }
}

/// Links ordered by first word ascending, longer spans first on ties.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct LinkSet {
    pub links: Vec<TextVisualLink>,
}

impl LinkSet {
    pub fn len(&self) -> usize {
        self.links.len()
    }

    pub fn is_empty(&self) -> bool {
        self.links.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, TextVisualLink> {
        self.links.iter()
    }
}

pub(crate) fn sort_links(links: &mut [TextVisualLink]) {
    links.sort_by(|a, b| {
        a.span
            .first_word
            .cmp(&b.span.first_word)
            .then(b.span.len().cmp(&a.span.len()))
            .then_with(|| a.row_refs.cmp(&b.row_refs))
            .then(a.origin.cmp(&b.origin))
    });
}

/// Drops exact repeats and links whose span and rows both sit inside
/// another link's, then orders the rest.
pub fn dedupe_links(links: Vec<TextVisualLink>) -> LinkSet {
    let mut links = links;
    sort_links(&mut links);
    let mut unique: Vec<TextVisualLink> = Vec::with_capacity(links.len());
    for link in links {
        if !unique.iter().any(|u| u.key() == link.key()) {
            unique.push(link);
        }
    }
    let kept: Vec<TextVisualLink> = unique
        .iter()
        .filter(|a| !unique.iter().any(|b| b.key() != a.key() && a.within(b)))
        .cloned()
        .collect();
    LinkSet { links: kept }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Resolved {
    pub links: LinkSet,
    pub warnings: Vec<String>,
}

/// Fills each link's element ids from the row map. Links whose rows map to
/// no element are dropped with a warning.
pub fn resolve_elements(set: &LinkSet, map: &ElementRowMap) -> Result<Resolved, LinkError> {
    let mut out = Vec::with_capacity(set.len());
    let mut warnings = Vec::new();
    for link in set.iter() {
        let mut ids = BTreeSet::new();
        for &row in &link.row_refs {
            if !map.contains_row(row) {
                return Err(LinkError::UnknownRowRef(row));
            }
            if let Some(mapped) = map.elements(row) {
                ids.extend(mapped.iter().cloned());
            }
        }
        if ids.is_empty() {
            warnings.push(format!(
                "dropping link on words {}..={}: rows {} map to no element",
                link.span.first_word,
                link.span.last_word,
                link.row_refs
                    .iter()
                    .map(|r| r.to_string())
                    .collect::<Vec<_>>()
                    .join(", ")
            ));
            continue;
        }
        let mut resolved = link.clone();
        resolved.element_ids = ids;
        out.push(resolved);
    }
    Ok(Resolved {
        links: LinkSet { links: out },
        warnings,
    })
}
