use std::fmt::Write;

use crate::chart::{display_value, DataTable};
use crate::narration::NarrationText;

const INSTRUCTION: &str = "\
You link narration to chart data. Below are the data tables behind a chart, \
each row labelled R<index>, followed by the narration spoken over the chart.

Find every narration segment that refers to one or more rows. Reply with one \
line per link and nothing else, in exactly this format:

(<segment copied verbatim from the narration>)[table <x>: R<i>, R<j>, ...]

Copy each segment word for word. Prefer the shortest segment that still names \
the rows. Use the table and row indices exactly as listed. If nothing links, \
reply with an empty message.";

const EXAMPLES: &str = "\
Example 1
Tables:
table 0
R0: Country=USA, GDP=21.4
R1: Country=China, GDP=14.3
Narration:
The USA has the highest GDP, at 21.4 trillion, while China follows.
Answer:
(The USA has the highest GDP)[table 0: R0]
(21.4 trillion)[table 0: R0]
(China follows)[table 0: R1]

Example 2
Tables:
table 0
R0: Month=Jan, Sales=120
R1: Month=Feb, Sales=180
R2: Month=Mar, Sales=90
table 1
R0: label=target, Sales=150
Narration:
Sales rose from January to February, beating the target of 150, then fell in March.
Answer:
(Sales rose from January to February)[table 0: R0, R1]
(the target of 150)[table 1: R0]
(fell in March)[table 0: R2]
";

/// Builds the linking prompt. Byte-identical for identical inputs.
pub fn build_prompt(tables: &[DataTable], text: &NarrationText) -> String {
    let mut out = String::new();
    out.push_str(INSTRUCTION);
    out.push_str("\n\n");
    out.push_str(EXAMPLES);
    out.push_str("\nNow the real task.\nTables:\n");
    for table in tables {
        let _ = writeln!(out, "table {}", table.table_index);
        for (i, row) in table.rows.iter().enumerate() {
            let cells: Vec<String> = table
                .columns
                .iter()
                .zip(row)
                .filter(|(_, v)| !v.is_null())
                .map(|(c, v)| format!("{c}={}", display_value(v)))
                .collect();
            let _ = writeln!(out, "R{i}: {}", cells.join(", "));
        }
    }
    out.push_str("Narration:\n");
    out.push_str(text.raw.trim());
    out.push_str("\nAnswer:\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chart::TableKind;
    use crate::narration::segment_words;
    use serde_json::json;

    fn pm25() -> Vec<DataTable> {
        vec![
            DataTable {
                table_index: 0,
                kind: TableKind::Marks,
                columns: vec!["Day".into(), "PM2.5 Value".into()],
                rows: vec![vec![json!("1st"), json!(54.8)], vec![json!("2nd"), json!(89.1)]],
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
    fn embeds_tables_and_narration() {
        let text = segment_words("On the first day the value was 54.8.").unwrap();
        let p = build_prompt(&pm25(), &text);
        assert!(p.contains("table 0\nR0: Day=1st, PM2.5 Value=54.8\n"));
        assert!(p.contains("table 1\nR0: Level=hazardous, Threshold=300\n"));
        assert!(p.contains("On the first day the value was 54.8."));
        assert!(p.contains("[table <x>: R<i>"));
    }

    #[test]
    fn few_shot_answers_parse_under_the_grammar() {
        let answers: Vec<&str> = EXAMPLES.lines().filter(|l| l.starts_with('(')).collect();
        assert!(answers.len() >= 2);
        for line in answers {
            assert!(line.ends_with(']') && line.contains(")[table "), "{line}");
        }
    }

    #[test]
    fn deterministic() {
        let text = segment_words("It climbed to 312.6.").unwrap();
        assert_eq!(build_prompt(&pm25(), &text), build_prompt(&pm25(), &text));
    }

    #[test]
    fn null_cells_are_omitted() {
        let t = DataTable {
            table_index: 0,
            kind: TableKind::Marks,
            columns: vec!["a".into(), "b".into()],
            rows: vec![vec![json!(1), serde_json::Value::Null]],
        };
        let p = build_prompt(&[t], &segment_words("x").unwrap());
        assert!(p.contains("R0: a=1\n"));
    }
}
