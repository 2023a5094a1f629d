use std::collections::BTreeMap;

use serde_json::Value;

use crate::chart::{DataTable, RowRef};
use crate::narration::{NarrationText, SegmentSpan};

use super::{sort_links, LinkOrigin, TextVisualLink};

const STOPWORDS: &[&str] = &[
    "a", "an", "and", "are", "as", "at", "be", "by", "for", "from", "in", "is", "it", "of", "on", "or", "the", "to",
    "was", "were", "with",
];

const ORDINAL_WORDS: [&str; 20] = [
    "first",
    "second",
    "third",
    "fourth",
    "fifth",
    "sixth",
    "seventh",
    "eighth",
    "ninth",
    "tenth",
    "eleventh",
    "twelfth",
    "thirteenth",
    "fourteenth",
    "fifteenth",
    "sixteenth",
    "seventeenth",
    "eighteenth",
    "nineteenth",
    "twentieth",
];

const ORDINAL_MAX: u32 = 31;

fn ordinal_word(n: u32) -> Option<String> {
    match n {
        1..=20 => Some(ORDINAL_WORDS[n as usize - 1].to_string()),
        21..=29 => Some(format!("twenty-{}", ORDINAL_WORDS[n as usize - 21])),
        30 => Some("thirtieth".to_string()),
        31 => Some("thirty-first".to_string()),
        _ => None,
    }
}

fn ordinal_suffix(n: u32) -> &'static str {
    match (n % 10, n % 100) {
        (_, 11..=13) => "th",
        (1, _) => "st",
        (2, _) => "nd",
        (3, _) => "rd",
        _ => "th",
    }
}

/// Parses "8th" or "eighth" (any case) to 8, up to 31.
fn parse_ordinal(s: &str) -> Option<u32> {
    let s = s.to_lowercase();
    let digits: String = s.chars().take_while(|c| c.is_ascii_digit()).collect();
    if !digits.is_empty() {
        let n: u32 = digits.parse().ok()?;
        return ((1..=ORDINAL_MAX).contains(&n) && s[digits.len()..] == *ordinal_suffix(n)).then_some(n);
    }
    (1..=ORDINAL_MAX).find(|&n| ordinal_word(n).as_deref() == Some(s.as_str()))
}

/// Reads a number with optional currency prefix, thousands separators and a
/// unit suffix ("1,200", "$3.5", "45%", "300 ppm"). Ordinals are not numbers.
fn parse_number(s: &str) -> Option<f64> {
    let s = s.trim().trim_start_matches(['$', '€', '£', '¥']);
    let (sign, body) = match s.strip_prefix('-') {
        Some(rest) => (-1.0, rest),
        None => (1.0, s),
    };
    let numeric_len = body
        .char_indices()
        .find(|&(_, c)| !(c.is_ascii_digit() || c == ',' || c == '.'))
        .map(|(i, _)| i)
        .unwrap_or(body.len());
    let (num, unit) = body.split_at(numeric_len);
    if num.is_empty() || !num.starts_with(|c: char| c.is_ascii_digit()) || num.ends_with([',', '.']) {
        return None;
    }
    let unit = unit.trim_start();
    let unit_ok = unit.is_empty()
        || (!matches!(unit.to_lowercase().as_str(), "st" | "nd" | "rd" | "th")
            && unit
                .chars()
                .all(|c| c.is_alphabetic() || matches!(c, '%' | '°' | '/' | '³' | '²')));
    if !unit_ok {
        return None;
    }
    let plain = if num.contains(',') {
        let (int, frac) = num.split_once('.').unwrap_or((num, ""));
        let groups: Vec<&str> = int.split(',').collect();
        let grouped = !groups[0].is_empty()
            && groups[0].len() <= 3
            && groups[1..]
                .iter()
                .all(|g| g.len() == 3 && g.chars().all(|c| c.is_ascii_digit()));
        if !grouped || frac.contains(',') {
            return None;
        }
        num.replace(',', "")
    } else {
        num.to_string()
    };
    plain.parse::<f64>().ok().map(|v| sign * v)
}

fn numbers_equal(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0)
}

/// Something a narration word run can match to tie it to a cell.
#[derive(Debug, Clone, PartialEq)]
pub enum MatchKey {
    /// Consecutive words, compared case-insensitively.
    Words(Vec<String>),
    /// A single word read as a number.
    Number(f64),
}

fn lower_words(s: &str) -> Vec<String> {
    s.split_whitespace()
        .map(|w| crate::narration::strip_word(w).to_lowercase())
        .filter(|w| !w.is_empty())
        .collect()
}

/// Match keys of one cell: its text, its numeric value, and the other
/// spelling of an ordinal. Keys made only of stopwords are skipped.
pub fn match_keys(value: &Value) -> Vec<MatchKey> {
    let mut keys = Vec::new();
    match value {
        Value::Number(n) => {
            if let Some(v) = n.as_f64() {
                keys.push(MatchKey::Number(v));
            }
        }
        Value::String(s) => {
            if let Some(v) = parse_number(s) {
                keys.push(MatchKey::Number(v));
            }
            let words = lower_words(s);
            if !words.is_empty() && !words.iter().all(|w| STOPWORDS.contains(&w.as_str())) {
                if words.len() == 1 {
                    if let Some(n) = parse_ordinal(&words[0]) {
                        let numeric = format!("{n}{}", ordinal_suffix(n));
                        let spelled = ordinal_word(n).expect("n is in range");
                        keys.push(MatchKey::Words(vec![numeric]));
                        keys.push(MatchKey::Words(vec![spelled]));
                        return keys;
                    }
                }
                keys.push(MatchKey::Words(words));
            }
        }
        _ => {}
    }
    keys
}

/// Number of words `key` covers when matched at word `i`, if it matches.
pub fn key_matches_at(key: &MatchKey, text: &NarrationText, i: usize) -> Option<usize> {
    match key {
        MatchKey::Number(v) => {
            let w = text.words.get(i)?;
            parse_number(&w.text).is_some_and(|x| numbers_equal(x, *v)).then_some(1)
        }
        MatchKey::Words(ws) => {
            let run = text.words.get(i..i + ws.len())?;
            run.iter()
                .zip(ws)
                .all(|(w, k)| w.text.to_lowercase() == *k)
                .then_some(ws.len())
        }
    }
}

/// Deterministic linker: every cell-key hit in the narration links its word
/// run to the cell's row. Hits on the same row inside one sentence merge into
/// one link spanning from the first hit to the last.
pub fn link_rules(tables: &[DataTable], text: &NarrationText) -> Vec<TextVisualLink> {
    // (sentence, row) -> hull
    let mut hulls: BTreeMap<(usize, RowRef), (usize, usize)> = BTreeMap::new();
    for table in tables {
        for (r, row) in table.rows.iter().enumerate() {
            let row_ref = RowRef::new(table.table_index, r);
            let keys: Vec<MatchKey> = row.iter().flat_map(match_keys).collect();
            for i in 0..text.words.len() {
                for key in &keys {
                    let Some(len) = key_matches_at(key, text, i) else {
                        continue;
                    };
                    let last = i + len - 1;
                    let Some(sentence) = text.sentence_of(i) else {
                        continue;
                    };
                    if text.sentence_of(last) != Some(sentence) {
                        continue;
                    }
                    hulls
                        .entry((sentence, row_ref))
                        .and_modify(|h| {
                            h.0 = h.0.min(i);
                            h.1 = h.1.max(last);
                        })
                        .or_insert((i, last));
                }
            }
        }
    }
    let mut links: Vec<TextVisualLink> = hulls
        .into_iter()
        .map(|((_, row), (first, last))| TextVisualLink::new(SegmentSpan::new(first, last), [row], LinkOrigin::Rules))
        .collect();
    sort_links(&mut links);
    links
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chart::TableKind;
    use crate::narration::segment_words;
    use proptest::prelude::*;
    use serde_json::json;

    fn pm25() -> Vec<DataTable> {
        let values = [54.8, 89.1, 120.4, 160.0, 201.3, 230.9, 280.2, 312.6];
        vec![
            DataTable {
                table_index: 0,
                kind: TableKind::Marks,
                columns: vec!["Day".into(), "PM2.5 Value".into()],
                rows: values
                    .iter()
                    .enumerate()
                    .map(|(i, v)| {
                        let n = i as u32 + 1;
                        vec![json!(format!("{n}{}", ordinal_suffix(n))), json!(v)]
                    })
                    .collect(),
            },
            DataTable {
                table_index: 1,
                kind: TableKind::Annotation,
                columns: vec!["Level".into(), "Threshold".into()],
                rows: vec![vec![json!("hazardous"), json!(300)]],
            },
        ]
    }

    #[test]
    fn number_parsing() {
        assert_eq!(parse_number("1,200"), Some(1200.0));
        assert_eq!(parse_number("1,200.5"), Some(1200.5));
        assert_eq!(parse_number("$3.5"), Some(3.5));
        assert_eq!(parse_number("45%"), Some(45.0));
        assert_eq!(parse_number("300 ppm"), Some(300.0));
        assert_eq!(parse_number("-3"), Some(-3.0));
        assert_eq!(parse_number("8th"), None);
        assert_eq!(parse_number("1,2"), None);
        assert_eq!(parse_number("PM2.5"), None);
        assert_eq!(parse_number("2.5a5"), None);
    }

    #[test]
    fn ordinals_both_ways() {
        assert_eq!(parse_ordinal("1st"), Some(1));
        assert_eq!(parse_ordinal("First"), Some(1));
        assert_eq!(parse_ordinal("twenty-second"), Some(22));
        assert_eq!(parse_ordinal("11th"), Some(11));
        assert_eq!(parse_ordinal("11st"), None);
        assert_eq!(parse_ordinal("32nd"), None);
        assert_eq!(
            match_keys(&json!("first")),
            vec![
                MatchKey::Words(vec!["1st".into()]),
                MatchKey::Words(vec!["first".into()])
            ]
        );
    }

    #[test]
    fn stopword_cells_have_no_text_key() {
        assert!(match_keys(&json!("the")).is_empty());
        assert!(match_keys(&json!(true)).is_empty());
        assert_eq!(match_keys(&json!("A")), Vec::<MatchKey>::new());
    }

    #[test]
    fn value_links_to_its_row() {
        let text = segment_words("The value was 54.8 that morning.").unwrap();
        let links = link_rules(&pm25(), &text);
        assert_eq!(links.len(), 1);
        assert_eq!(links[0].row_refs, vec![RowRef::new(0, 0)]);
        assert_eq!(links[0].span, SegmentSpan::single(3));
        assert_eq!(links[0].origin, LinkOrigin::Rules);
    }

    #[test]
    fn hits_in_one_sentence_merge() {
        let text = segment_words("On the first day the value was 54.8. Later it was 54.8 again.").unwrap();
        let links = link_rules(&pm25(), &text);
        assert_eq!(links.len(), 2);
        assert_eq!(links[0].span, SegmentSpan::new(2, 7));
        assert_eq!(links[1].span, SegmentSpan::single(11));
    }

    #[test]
    fn annotation_threshold() {
        let text = segment_words("It climbed above the hazardous level of 300.").unwrap();
        let links = link_rules(&pm25(), &text);
        assert_eq!(links.len(), 1);
        assert_eq!(links[0].row_refs, vec![RowRef::new(1, 0)]);
        assert_eq!(links[0].span, SegmentSpan::new(4, 7));
    }

    #[test]
    fn no_matches() {
        let text = segment_words("Nothing to see here.").unwrap();
        assert!(link_rules(&pm25(), &text).is_empty());
    }

    fn word_strategy() -> impl Strategy<Value = String> {
        prop_oneof![
            Just("the".to_string()),
            Just("value".to_string()),
            Just("54.8".to_string()),
            Just("300.".to_string()),
            Just("hazardous".to_string()),
            Just("8th,".to_string()),
            Just("312.6".to_string()),
            Just("first".to_string()),
            Just("third.".to_string()),
            "[a-z]{2,6}",
        ]
    }

    proptest! {
        #[test]
        fn rule_links_rescan(words in proptest::collection::vec(word_strategy(), 1..30)) {
            let text = segment_words(&words.join(" ")).unwrap();
            let tables = pm25();
            let links = link_rules(&tables, &text);
            prop_assert_eq!(&links, &link_rules(&tables, &text));
            for link in &links {
                prop_assert_eq!(link.row_refs.len(), 1);
                let r = link.row_refs[0];
                let keys: Vec<MatchKey> = tables[r.table_index].rows[r.row_index].iter().flat_map(match_keys).collect();
                let hit = (link.span.first_word..=link.span.last_word).any(|i| {
                    keys.iter().any(|k| key_matches_at(k, &text, i).is_some_and(|n| i + n - 1 <= link.span.last_word))
                });
                prop_assert!(hit);
                prop_assert_eq!(text.sentence_of(link.span.first_word), text.sentence_of(link.span.last_word));
            }
        }
    }
}
