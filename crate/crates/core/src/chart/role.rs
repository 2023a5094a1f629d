use super::{ElementRole, MarkShape, Record};

/// Everything `classify_role` looks at besides shape and data: the node's
/// class tokens and two structural facts computed by the parser.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RoleHints {
    pub classes: Vec<String>,
    /// Some ancestor `<g>` carries an `axis` class token (d3 style).
    pub in_axis_group: bool,
    /// A text node whose centre sits horizontally within a mark's extent and
    /// below it.
    pub under_mark_column: bool,
}

impl RoleHints {
    pub fn with_classes<I, S>(classes: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self {
            classes: classes.into_iter().map(Into::into).collect(),
            ..Self::default()
        }
    }
}

/// Precedence: explicit `role-*` class, then structural heuristics, then
/// `background`.
pub fn classify_role(hints: &RoleHints, shape: MarkShape, data: &[Record]) -> ElementRole {
    if let Some(role) = hints
        .classes
        .iter()
        .filter_map(|c| c.strip_prefix("role-"))
        .find_map(|r| r.parse::<ElementRole>().ok())
    {
        return role;
    }

    let has_data = data.iter().any(|r| !r.is_empty());
    if has_data && shape.is_mark_shape() {
        return ElementRole::Mark;
    }

    if hints.in_axis_group {
        return match shape {
            MarkShape::Text => ElementRole::AxisLabel,
            MarkShape::Rule | MarkShape::LinePath => ElementRole::Axis,
            _ => ElementRole::AxisSymbol,
        };
    }

    if shape == MarkShape::Text && hints.under_mark_column {
        return ElementRole::AxisLabel;
    }

    ElementRole::Background
}
