use std::collections::BTreeMap;

use serde_json::Value;

use super::{ChartDocument, ChartError, DataTable, ElementRole, ElementRowMap, Record, RowRef, TableKind};

/// Default distance under which ungrouped annotation pieces are merged.
pub const DEFAULT_ANNOTATION_GAP: f64 = 24.0;

#[derive(Debug, Clone, PartialEq)]
pub struct Extraction {
    /// Marks table first (index 0), then one table per annotation group.
    pub tables: Vec<DataTable>,
    pub map: ElementRowMap,
    /// Annotation groups in table order: `groups[i]` feeds table `i + 1`.
    pub annotation_groups: Vec<Vec<String>>,
    pub warnings: Vec<String>,
}

impl Extraction {
    pub fn marks_table(&self) -> &DataTable {
        &self.tables[0]
    }
}

pub fn extract_tables(doc: &ChartDocument) -> Result<Extraction, ChartError> {
    extract_tables_with(doc, DEFAULT_ANNOTATION_GAP)
}

pub fn extract_tables_with(doc: &ChartDocument, gap: f64) -> Result<Extraction, ChartError> {
    let marks: Vec<_> = doc.marks().collect();
    if marks.is_empty() {
        return Err(ChartError::NoMarks);
    }
    let mut warnings = Vec::new();
    let mut map = ElementRowMap::default();

    let mut columns: Vec<String> = Vec::new();
    for record in marks.iter().flat_map(|m| &m.data) {
        for key in record.keys() {
            if !columns.contains(key) {
                columns.push(key.clone());
            }
        }
    }
    let mut rows: Vec<Vec<Value>> = Vec::new();
    let mut row_owner: Vec<String> = Vec::new();
    for mark in &marks {
        for record in &mark.data {
            let tuple: Vec<Value> = columns
                .iter()
                .map(|c| record.get(c).cloned().unwrap_or(Value::Null))
                .collect();
            let row = match rows.iter().position(|r| tuples_equal(r, &tuple)) {
                Some(existing) => {
                    if row_owner[existing] != mark.id {
                        warnings.push(format!(
                            "inconsistent bindings: marks `{}` and `{}` share row {existing}",
                            row_owner[existing], mark.id
                        ));
                    }
                    existing
                }
                None => {
                    rows.push(tuple);
                    row_owner.push(mark.id.clone());
                    rows.len() - 1
                }
            };
            map.insert(RowRef::new(0, row), &mark.id);
        }
    }

    let marks_table = DataTable {
        table_index: 0,
        kind: TableKind::Marks,
        columns,
        rows,
    };

    // Other bound elements (axis labels, legend entries) join the rows whose
    // values they repeat.
    for el in &doc.elements {
        if el.role == ElementRole::Mark || el.role.is_annotation() {
            continue;
        }
        for record in &el.data {
            for row in matching_rows(&marks_table, record) {
                map.insert(RowRef::new(0, row), &el.id);
            }
        }
    }

    let mut tables = vec![marks_table];
    let annotation_groups = group_annotations_with(doc, gap);
    for group in &annotation_groups {
        let table_index = tables.len();
        let members: Vec<_> = group.iter().filter_map(|id| doc.element(id)).collect();
        let mut columns: Vec<String> = Vec::new();
        for record in members.iter().flat_map(|m| &m.data) {
            for key in record.keys() {
                if !columns.contains(key) {
                    columns.push(key.clone());
                }
            }
        }
        let mut rows: Vec<Vec<Value>> = Vec::new();
        for record in members.iter().flat_map(|m| &m.data) {
            let tuple: Vec<Value> = columns
                .iter()
                .map(|c| record.get(c).cloned().unwrap_or(Value::Null))
                .collect();
            if !rows.iter().any(|r| tuples_equal(r, &tuple)) {
                rows.push(tuple);
            }
        }
        if rows.is_empty() {
            // Unbound annotation: fall back to its visible text.
            let text = members
                .iter()
                .filter_map(|m| m.text.as_deref())
                .collect::<Vec<_>>()
                .join(" ");
            columns = vec!["text".to_string()];
            rows.push(vec![Value::String(text)]);
            warnings.push(format!(
                "annotation group [{}] carries no data-datum; using its text",
                group.join(", ")
            ));
        }
        let table = DataTable {
            table_index,
            kind: TableKind::Annotation,
            columns,
            rows,
        };
        for member in &members {
            if member.data.is_empty() {
                for row in 0..table.rows.len() {
                    map.insert(RowRef::new(table_index, row), &member.id);
                }
            } else {
                for record in &member.data {
                    for row in matching_rows(&table, record) {
                        map.insert(RowRef::new(table_index, row), &member.id);
                    }
                }
            }
        }
        tables.push(table);
    }

    map.row_counts = tables.iter().map(|t| t.rows.len()).collect();
    Ok(Extraction {
        tables,
        map,
        annotation_groups,
        warnings,
    })
}

/// Rows where every key of `record` is a column holding an equal value.
fn matching_rows<'a>(table: &'a DataTable, record: &'a Record) -> impl Iterator<Item = usize> + 'a {
    let cols: Option<Vec<(usize, &Value)>> = record
        .iter()
        .map(|(k, v)| table.columns.iter().position(|c| c == k).map(|i| (i, v)))
        .collect();
    table
        .rows
        .iter()
        .enumerate()
        .filter(move |(_, row)| {
            cols.as_ref()
                .is_some_and(|cols| !cols.is_empty() && cols.iter().all(|(i, v)| values_equal(&row[*i], v)))
        })
        .map(|(i, _)| i)
}

/// Numbers compare by value so `300` and `300.0` are the same datum.
pub(crate) fn values_equal(a: &Value, b: &Value) -> bool {
    match (a, b) {
        (Value::Number(x), Value::Number(y)) => x.as_f64() == y.as_f64(),
        _ => a == b,
    }
}

fn tuples_equal(a: &[Value], b: &[Value]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| values_equal(x, y))
}

pub fn group_annotations(doc: &ChartDocument) -> Vec<Vec<String>> {
    group_annotations_with(doc, DEFAULT_ANNOTATION_GAP)
}

/// Groups annotation elements: shared `data-group` first, then ungrouped
/// pieces whose boxes lie within `gap` px of each other (transitively).
/// Groups come back in document order of their first member.
pub fn group_annotations_with(doc: &ChartDocument, gap: f64) -> Vec<Vec<String>> {
    let annotations: Vec<(usize, &super::VisualElement)> = doc
        .elements
        .iter()
        .enumerate()
        .filter(|(_, e)| e.role.is_annotation())
        .collect();

    let mut by_group: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    let mut loose: Vec<usize> = Vec::new();
    for (pos, (_, el)) in annotations.iter().enumerate() {
        match el.group_id.as_deref() {
            Some(g) => by_group.entry(g).or_default().push(pos),
            None => loose.push(pos),
        }
    }

    let mut parent: Vec<usize> = (0..loose.len()).collect();
    fn find(parent: &mut [usize], i: usize) -> usize {
        let mut root = i;
        while parent[root] != root {
            root = parent[root];
        }
        let mut cur = i;
        while parent[cur] != root {
            let next = parent[cur];
            parent[cur] = root;
            cur = next;
        }
        root
    }
    for i in 0..loose.len() {
        for j in i + 1..loose.len() {
            let a = &annotations[loose[i]].1.bbox;
            let b = &annotations[loose[j]].1.bbox;
            if a.gap(b) <= gap {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                if ri != rj {
                    parent[ri.max(rj)] = ri.min(rj);
                }
            }
        }
    }
    let mut clusters: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &pos) in loose.iter().enumerate() {
        let root = find(&mut parent, i);
        clusters.entry(root).or_default().push(pos);
    }

    let mut groups: Vec<Vec<usize>> = by_group.into_values().chain(clusters.into_values()).collect();
    groups.sort_by_key(|g| annotations[g[0]].0);
    groups
        .into_iter()
        .map(|g| g.into_iter().map(|pos| annotations[pos].1.id.clone()).collect())
        .collect()
}
