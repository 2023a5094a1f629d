//! Chart documents: SVG parsing, element roles, and data-table extraction.
//!
//! A chart is read from an SVG whose nodes carry their data in a `data-datum`
//! attribute (a JSON object, or a list of objects for elements standing for
//! several data items). Roles come from `role-*` class tokens, with a small
//! set of structural heuristics as fallback.

mod geometry;
mod parse;
mod role;
mod tables;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use geometry::BBox;
pub use parse::{parse_anchored, parse_document, Anchor};
pub use role::{classify_role, RoleHints};
pub use tables::{
    extract_tables, extract_tables_with, group_annotations, group_annotations_with, Extraction, DEFAULT_ANNOTATION_GAP,
};

/// One data record bound to an element. Key order is the order in the source.
pub type Record = serde_json::Map<String, serde_json::Value>;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ChartError {
    #[error("malformed svg at byte {position}: {message}")]
    MalformedSvg { position: u64, message: String },
    #[error("svg root has no usable width/height or viewBox")]
    MissingCanvas,
    #[error("element `{element_id}` has an invalid data-datum payload: {message}")]
    BadDataAttribute { element_id: String, message: String },
    #[error("element id `{0}` appears more than once")]
    DuplicateId(String),
    #[error("document contains no mark elements")]
    NoMarks,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ElementRole {
    Mark,
    Axis,
    AxisLabel,
    AxisSymbol,
    LegendSymbol,
    LegendLabel,
    Title,
    Background,
    AnnotationText,
    AnnotationShape,
}

impl ElementRole {
    pub const ALL: [ElementRole; 10] = [
        ElementRole::Mark,
        ElementRole::Axis,
        ElementRole::AxisLabel,
        ElementRole::AxisSymbol,
        ElementRole::LegendSymbol,
        ElementRole::LegendLabel,
        ElementRole::Title,
        ElementRole::Background,
        ElementRole::AnnotationText,
        ElementRole::AnnotationShape,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ElementRole::Mark => "mark",
            ElementRole::Axis => "axis",
            ElementRole::AxisLabel => "axis-label",
            ElementRole::AxisSymbol => "axis-symbol",
            ElementRole::LegendSymbol => "legend-symbol",
            ElementRole::LegendLabel => "legend-label",
            ElementRole::Title => "title",
            ElementRole::Background => "background",
            ElementRole::AnnotationText => "annotation-text",
            ElementRole::AnnotationShape => "annotation-shape",
        }
    }

    pub fn is_annotation(self) -> bool {
        matches!(self, ElementRole::AnnotationText | ElementRole::AnnotationShape)
    }

    /// Roles that are on the canvas from the first frame unless something
    /// enters them explicitly.
    pub fn is_default_visible(self) -> bool {
        matches!(
            self,
            ElementRole::Background
                | ElementRole::Title
                | ElementRole::Axis
                | ElementRole::AxisLabel
                | ElementRole::AxisSymbol
        )
    }
}

impl fmt::Display for ElementRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ElementRole {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ElementRole::ALL
            .into_iter()
            .find(|r| r.as_str() == s)
            .ok_or_else(|| format!("unknown element role `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MarkShape {
    Rect,
    LinePath,
    Arc,
    Point,
    Text,
    Rule,
    Image,
    Other,
}

impl MarkShape {
    pub const ALL: [MarkShape; 8] = [
        MarkShape::Rect,
        MarkShape::LinePath,
        MarkShape::Arc,
        MarkShape::Point,
        MarkShape::Text,
        MarkShape::Rule,
        MarkShape::Image,
        MarkShape::Other,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MarkShape::Rect => "rect",
            MarkShape::LinePath => "line-path",
            MarkShape::Arc => "arc",
            MarkShape::Point => "point",
            MarkShape::Text => "text",
            MarkShape::Rule => "rule",
            MarkShape::Image => "image",
            MarkShape::Other => "other",
        }
    }

    /// Shapes that can encode data as a mark.
    pub fn is_mark_shape(self) -> bool {
        matches!(
            self,
            MarkShape::Rect | MarkShape::LinePath | MarkShape::Arc | MarkShape::Point
        )
    }
}

impl fmt::Display for MarkShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MarkShape {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        MarkShape::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| format!("unknown mark shape `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VisualElement {
    pub id: String,
    pub role: ElementRole,
    pub shape: MarkShape,
    pub bbox: BBox,
    /// Bound data records; more than one when the element stands for
    /// several data items.
    pub data: Vec<Record>,
    pub group_id: Option<String>,
    /// Concatenated character data, for text elements.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Canvas {
    pub width: f64,
    pub height: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChartDocument {
    pub elements: Vec<VisualElement>,
    pub canvas: Canvas,
    /// Hex SHA-256 of the input bytes.
    pub source_hash: String,
}

impl ChartDocument {
    pub fn element(&self, id: &str) -> Option<&VisualElement> {
        self.elements.iter().find(|e| e.id == id)
    }

    pub fn marks(&self) -> impl Iterator<Item = &VisualElement> {
        self.elements.iter().filter(|e| e.role == ElementRole::Mark)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TableKind {
    Marks,
    Annotation,
}

impl TableKind {
    pub fn as_str(self) -> &'static str {
        match self {
            TableKind::Marks => "marks",
            TableKind::Annotation => "annotation",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DataTable {
    pub table_index: usize,
    pub kind: TableKind,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<serde_json::Value>>,
}

impl DataTable {
    pub fn cell(&self, row: usize, column: usize) -> Option<&serde_json::Value> {
        self.rows.get(row).and_then(|r| r.get(column))
    }
}

/// Renders a cell value the way it appears in prompts, CSV dumps and
/// match keys: strings bare, numbers in their shortest form.
pub fn display_value(v: &serde_json::Value) -> String {
    match v {
        serde_json::Value::String(s) => s.clone(),
        serde_json::Value::Null => String::new(),
        other => other.to_string(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RowRef {
    pub table_index: usize,
    pub row_index: usize,
}

impl RowRef {
    pub fn new(table_index: usize, row_index: usize) -> Self {
        Self { table_index, row_index }
    }
}

impl fmt::Display for RowRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "table {}: R{}", self.table_index, self.row_index)
    }
}

/// Row → element correspondence. Also remembers each table's row count so
/// row references can be bounds-checked without the tables at hand.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ElementRowMap {
    pub row_counts: Vec<usize>,
    pub entries: BTreeMap<RowRef, BTreeSet<String>>,
}

impl ElementRowMap {
    pub fn contains_row(&self, row: RowRef) -> bool {
        self.row_counts.get(row.table_index).is_some_and(|&n| row.row_index < n)
    }

    pub fn elements(&self, row: RowRef) -> Option<&BTreeSet<String>> {
        self.entries.get(&row)
    }

    pub fn insert(&mut self, row: RowRef, element_id: &str) {
        self.entries.entry(row).or_default().insert(element_id.to_string());
    }

    /// Every row an element is mapped from.
    pub fn rows_of<'a>(&'a self, element_id: &'a str) -> impl Iterator<Item = RowRef> + 'a {
        self.entries
            .iter()
            .filter(move |(_, ids)| ids.contains(element_id))
            .map(|(r, _)| *r)
    }
}
