use std::collections::BTreeMap;

use crate::chart::{DataTable, RowRef};
use crate::narration::{strip_word, NarrationText, SegmentSpan};

use super::{LinkOrigin, TextVisualLink};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParsedLinks {
    pub links: Vec<TextVisualLink>,
    pub warnings: Vec<String>,
}

/// Parses replies in the line grammar
///
/// ```text
/// OUTPUT  := LINE*
/// LINE    := '(' SEGMENT ')' '[' 'table' INT ':' ROW (',' ROW)* ']'
/// ROW     := 'R'? INT
/// ```
///
/// Each segment is located in the narration by an in-order, case-insensitive word
/// match, searching forward from the previous match's first word. Bad lines,
/// unknown segments and out-of-range rows are skipped with a warning.
pub fn parse_llm_output(raw: &str, text: &NarrationText, tables: &[DataTable]) -> ParsedLinks {
    let mut out = ParsedLinks::default();
    let mut cursor = 0usize;

    for (lineno, line) in raw.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let (segment, table, rows) = match parse_line(line) {
            Ok(parts) => parts,
            Err(why) => {
                out.warnings.push(format!("line {}: {why}: `{line}`", lineno + 1));
                continue;
            }
        };

        let Some(table_rows) = tables.get(table).map(|t| t.rows.len()) else {
            out.warnings
                .push(format!("line {}: table {table} does not exist", lineno + 1));
            continue;
        };
        let mut refs = Vec::new();
        for r in rows {
            if r < table_rows {
                refs.push(RowRef::new(table, r));
            } else {
                out.warnings.push(format!(
                    "line {}: row R{r} is out of range for table {table}",
                    lineno + 1
                ));
            }
        }
        if refs.is_empty() {
            continue;
        }

        let tokens: Vec<&str> = segment
            .split_whitespace()
            .map(strip_word)
            .filter(|t| !t.is_empty())
            .collect();
        if tokens.is_empty() {
            out.warnings.push(format!("line {}: empty segment", lineno + 1));
            continue;
        }
        let span = match find_span(text, &tokens, cursor) {
            Some(span) => span,
            None => match find_span(text, &tokens, 0) {
                Some(span) => {
                    out.warnings.push(format!(
                        "line {}: segment `{segment}` found only before the previous match",
                        lineno + 1
                    ));
                    span
                }
                None => {
                    out.warnings.push(format!(
                        "line {}: segment `{segment}` not found in narration",
                        lineno + 1
                    ));
                    continue;
                }
            },
        };
        cursor = span.first_word;
        out.links.push(TextVisualLink::new(span, refs, LinkOrigin::Llm));
    }
    out
}

fn find_span(text: &NarrationText, tokens: &[&str], from: usize) -> Option<SegmentSpan> {
    let n = tokens.len();
    if n > text.words.len() {
        return None;
    }
    (from..=text.words.len() - n)
        .find(|&start| {
            text.words[start..start + n]
                .iter()
                .zip(tokens)
                .all(|(w, t)| w.text.eq_ignore_ascii_case(t))
        })
        .map(|start| SegmentSpan::new(start, start + n - 1))
}

fn parse_line(line: &str) -> Result<(&str, usize, Vec<usize>), &'static str> {
    let body = line.strip_prefix('(').ok_or("expected `(` at line start")?;
    let body = body.strip_suffix(']').ok_or("expected `]` at line end")?;
    let open = body.rfind('[').ok_or("missing `[`")?;
    let segment = body[..open]
        .trim_end()
        .strip_suffix(')')
        .ok_or("missing `)` before `[`")?;
    let refs = body[open + 1..].trim();
    let refs = refs.strip_prefix("table").ok_or("expected `table`")?;
    let (table, rows) = refs.split_once(':').ok_or("missing `:`")?;
    let table: usize = table.trim().parse().map_err(|_| "bad table index")?;
    let rows = rows
        .split(',')
        .map(|r| {
            let r = r.trim();
            let r = r.strip_prefix(['R', 'r']).unwrap_or(r);
            r.parse::<usize>().map_err(|_| "bad row index")
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok((segment.trim(), table, rows))
}

/// Writes links in the line grammar, one line per (link, table).
pub fn serialize_links<'a>(links: impl IntoIterator<Item = &'a TextVisualLink>, text: &NarrationText) -> String {
    let mut out = String::new();
    for link in links {
        let segment = text
            .span_text(link.span)
            .split_whitespace()
            .collect::<Vec<_>>()
            .join(" ");
        let mut by_table: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for r in &link.row_refs {
            by_table.entry(r.table_index).or_default().push(r.row_index);
        }
        for (table, rows) in by_table {
            let rows: Vec<String> = rows.iter().map(|r| format!("R{r}")).collect();
            out.push_str(&format!("({segment})[table {table}: {}]\n", rows.join(", ")));
        }
    }
    out
}
