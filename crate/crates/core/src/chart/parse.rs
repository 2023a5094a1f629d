use quick_xml::events::{BytesStart, Event};
use quick_xml::{Reader, XmlVersion};
use sha2::{Digest, Sha256};

use super::geometry::{numbers, parse_translate, path_bounds};
use super::role::{classify_role, RoleHints};
use super::{BBox, Canvas, ChartDocument, ChartError, ElementRole, MarkShape, Record, VisualElement};

const DATUM_ATTR: &str = "data-datum";
const GROUP_ATTR: &str = "data-group";
const DEFAULT_FONT_SIZE: f64 = 12.0;

#[derive(Debug, Default)]
struct XmlNode {
    name: String,
    attrs: Vec<(String, String)>,
    children: Vec<XmlNode>,
    text: String,
    order: usize,
}

impl XmlNode {
    fn attr(&self, key: &str) -> Option<&str> {
        self.attrs.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    fn num(&self, key: &str) -> f64 {
        self.attr(key).and_then(|v| numbers(v).first().copied()).unwrap_or(0.0)
    }

    fn classes(&self) -> impl Iterator<Item = &str> {
        self.attr("class").unwrap_or("").split_whitespace()
    }

    fn text_content(&self) -> String {
        let mut out = self.text.clone();
        for c in &self.children {
            out.push(' ');
            out.push_str(&c.text_content());
        }
        out.split_whitespace().collect::<Vec<_>>().join(" ")
    }
}

/// Where a parsed element sits in the source: its position among all start
/// tags in document order, and the translation its parent applies.
#[derive(Debug, Clone, PartialEq)]
pub struct Anchor {
    pub order: usize,
    pub id: String,
    pub parent_offset: (f64, f64),
}

/// Parses SVG bytes into a chart document. Deterministic: the same bytes
/// always give the same document.
pub fn parse_document(svg_bytes: &[u8]) -> Result<ChartDocument, ChartError> {
    parse_anchored(svg_bytes).map(|(doc, _)| doc)
}

/// Like [`parse_document`], also returning one anchor per element.
pub fn parse_anchored(svg_bytes: &[u8]) -> Result<(ChartDocument, Vec<Anchor>), ChartError> {
    let root = read_tree(svg_bytes)?;
    if local_name(&root.name) != "svg" {
        return Err(ChartError::MalformedSvg {
            position: 0,
            message: format!("root element is <{}>, expected <svg>", root.name),
        });
    }
    let canvas = canvas_of(&root)?;

    let mut raw = Vec::new();
    let ctx = Inherited::default();
    for child in &root.children {
        collect(child, &ctx, &mut raw)?;
    }

    let mut elements: Vec<VisualElement> = Vec::with_capacity(raw.len());
    let mut seen = std::collections::HashSet::new();
    for (index, r) in raw.iter().enumerate() {
        let id = match &r.id {
            Some(id) => id.clone(),
            None => {
                let mut candidate = format!("{}-{index}", local_name(&r.tag));
                while raw.iter().any(|o| o.id.as_deref() == Some(candidate.as_str())) || seen.contains(&candidate) {
                    candidate.push('_');
                }
                candidate
            }
        };
        if !seen.insert(id.clone()) {
            return Err(ChartError::DuplicateId(id));
        }
        elements.push(VisualElement {
            id,
            role: classify_role(&r.hints, r.shape, &r.data),
            shape: r.shape,
            bbox: r.bbox,
            data: r.data.clone(),
            group_id: r.group_id.clone(),
            text: r.text.clone(),
        });
    }

    // Second pass: text adjacency needs the final mark geometry.
    let mark_boxes: Vec<BBox> = elements
        .iter()
        .filter(|e| e.role == ElementRole::Mark)
        .map(|e| e.bbox)
        .collect();
    for (el, r) in elements.iter_mut().zip(&raw) {
        if el.shape != MarkShape::Text || el.role != ElementRole::Background {
            continue;
        }
        let (cx, cy) = el.bbox.center();
        let under = mark_boxes
            .iter()
            .any(|m| cx >= m.x && cx <= m.right() && cy >= m.bottom());
        if under {
            let hints = RoleHints {
                under_mark_column: true,
                ..r.hints.clone()
            };
            el.role = classify_role(&hints, el.shape, &el.data);
        }
    }

    let anchors = elements
        .iter()
        .zip(&raw)
        .map(|(e, r)| Anchor {
            order: r.order,
            id: e.id.clone(),
            parent_offset: r.parent_offset,
        })
        .collect();
    let doc = ChartDocument {
        elements,
        canvas,
        source_hash: hex::encode(Sha256::digest(svg_bytes)),
    };
    Ok((doc, anchors))
}

fn local_name(name: &str) -> &str {
    name.rsplit(':').next().unwrap_or(name)
}

fn read_tree(bytes: &[u8]) -> Result<XmlNode, ChartError> {
    let mut reader = Reader::from_reader(bytes);
    reader.config_mut().check_end_names = true;
    let mut stack: Vec<XmlNode> = Vec::new();
    let mut root: Option<XmlNode> = None;
    let mut buf = Vec::new();
    let mut order = 0;

    let malformed = |reader: &Reader<&[u8]>, message: String| ChartError::MalformedSvg {
        position: reader.error_position(),
        message,
    };

    loop {
        let event = reader
            .read_event_into(&mut buf)
            .map_err(|e| malformed(&reader, e.to_string()))?;
        match event {
            Event::Start(start) => {
                let node = open_node(&reader, &start, &mut order)?;
                stack.push(node);
            }
            Event::Empty(start) => {
                let node = open_node(&reader, &start, &mut order)?;
                attach(&mut stack, &mut root, node, &reader)?;
            }
            Event::End(_) => {
                let node = stack
                    .pop()
                    .ok_or_else(|| malformed(&reader, "unexpected closing tag".to_string()))?;
                attach(&mut stack, &mut root, node, &reader)?;
            }
            Event::Text(t) => {
                if let Some(top) = stack.last_mut() {
                    top.text.push_str(&t.xml10_content());
                }
            }
            Event::CData(t) => {
                if let Some(top) = stack.last_mut() {
                    top.text.push_str(&t.xml10_content());
                }
            }
            Event::GeneralRef(r) => {
                if let Some(top) = stack.last_mut() {
                    top.text.push_str(&resolve_entity(&r.xml10_content()));
                }
            }
            Event::Eof => break,
            _ => {}
        }
        buf.clear();
    }

    if !stack.is_empty() {
        return Err(ChartError::MalformedSvg {
            position: reader.buffer_position(),
            message: format!("unclosed element <{}>", stack.last().unwrap().name),
        });
    }
    root.ok_or(ChartError::MalformedSvg {
        position: 0,
        message: "document has no root element".to_string(),
    })
}

fn resolve_entity(name: &str) -> String {
    match name {
        "amp" => "&".into(),
        "lt" => "<".into(),
        "gt" => ">".into(),
        "quot" => "\"".into(),
        "apos" => "'".into(),
        _ => {
            let code = name
                .strip_prefix("#x")
                .and_then(|h| u32::from_str_radix(h, 16).ok())
                .or_else(|| name.strip_prefix('#').and_then(|d| d.parse().ok()));
            code.and_then(char::from_u32).map(String::from).unwrap_or_default()
        }
    }
}

fn open_node(reader: &Reader<&[u8]>, start: &BytesStart<'_>, order: &mut usize) -> Result<XmlNode, ChartError> {
    let name = start.name().as_ref().to_string();
    let mut attrs = Vec::new();
    for attr in start.attributes() {
        let attr = attr.map_err(|e| ChartError::MalformedSvg {
            position: reader.buffer_position(),
            message: e.to_string(),
        })?;
        let key = attr.key.as_ref().to_string();
        let value = attr
            .normalized_value(XmlVersion::Implicit1_0)
            .map_err(|e| ChartError::MalformedSvg {
                position: reader.buffer_position(),
                message: e.to_string(),
            })?
            .into_owned();
        attrs.push((key, value));
    }
    *order += 1;
    Ok(XmlNode {
        name,
        attrs,
        order: *order - 1,
        ..XmlNode::default()
    })
}

fn attach(
    stack: &mut [XmlNode],
    root: &mut Option<XmlNode>,
    node: XmlNode,
    reader: &Reader<&[u8]>,
) -> Result<(), ChartError> {
    match stack.last_mut() {
        Some(parent) => parent.children.push(node),
        None if root.is_none() => *root = Some(node),
        None => {
            return Err(ChartError::MalformedSvg {
                position: reader.buffer_position(),
                message: "more than one root element".to_string(),
            })
        }
    }
    Ok(())
}

fn canvas_of(root: &XmlNode) -> Result<Canvas, ChartError> {
    let dim = |key: &str| {
        root.attr(key)
            .filter(|v| !v.trim_end().ends_with('%'))
            .and_then(|v| numbers(v).first().copied())
    };
    let view_box = root.attr("viewBox").map(numbers).filter(|v| v.len() == 4);
    let width = dim("width").or_else(|| view_box.as_ref().map(|v| v[2]));
    let height = dim("height").or_else(|| view_box.as_ref().map(|v| v[3]));
    match (width, height) {
        (Some(w), Some(h)) if w > 0.0 && h > 0.0 => Ok(Canvas { width: w, height: h }),
        _ => Err(ChartError::MissingCanvas),
    }
}

#[derive(Debug, Clone, Default)]
struct Inherited {
    dx: f64,
    dy: f64,
    in_axis_group: bool,
    group_id: Option<String>,
    font_size: Option<f64>,
}

struct RawElement {
    tag: String,
    id: Option<String>,
    shape: MarkShape,
    bbox: BBox,
    data: Vec<Record>,
    group_id: Option<String>,
    hints: RoleHints,
    text: Option<String>,
    order: usize,
    parent_offset: (f64, f64),
}

const SKIPPED: [&str; 10] = [
    "defs", "clipPath", "mask", "marker", "pattern", "symbol", "style", "script", "title", "desc",
];

fn collect(node: &XmlNode, ctx: &Inherited, out: &mut Vec<RawElement>) -> Result<(), ChartError> {
    let tag = local_name(&node.name);
    if SKIPPED.contains(&tag) || tag == "metadata" || tag == "linearGradient" {
        return Ok(());
    }

    let (tx, ty) = node.attr("transform").map(parse_translate).unwrap_or((0.0, 0.0));
    let mut here = ctx.clone();
    here.dx += tx;
    here.dy += ty;
    if let Some(g) = node.attr(GROUP_ATTR) {
        here.group_id = Some(g.to_string());
    }
    if let Some(fs) = node.attr("font-size").and_then(|v| numbers(v).first().copied()) {
        here.font_size = Some(fs);
    }

    let is_container = matches!(tag, "g" | "a" | "switch") || tag == "svg";
    if is_container && node.attr(DATUM_ATTR).is_none() {
        if node.classes().any(|c| c.contains("axis") && !c.starts_with("role-")) {
            here.in_axis_group = true;
        }
        for child in &node.children {
            collect(child, &here, out)?;
        }
        return Ok(());
    }

    let Some(shape) = shape_of(node, tag) else {
        return Ok(());
    };
    let id = node.attr("id").map(str::to_string);
    let data = match node.attr(DATUM_ATTR) {
        Some(payload) => parse_datum(payload).map_err(|message| ChartError::BadDataAttribute {
            element_id: id.clone().unwrap_or_else(|| format!("<{tag}>")),
            message,
        })?,
        None => Vec::new(),
    };
    let text = (shape == MarkShape::Text).then(|| node.text_content());
    let bbox = bbox_of(node, tag, &here, text.as_deref()).translate(here.dx, here.dy);

    out.push(RawElement {
        tag: tag.to_string(),
        id,
        shape,
        bbox,
        data,
        group_id: here.group_id.clone(),
        hints: RoleHints {
            classes: node.classes().map(str::to_string).collect(),
            in_axis_group: here.in_axis_group,
            under_mark_column: false,
        },
        text,
        order: node.order,
        parent_offset: (ctx.dx, ctx.dy),
    });
    Ok(())
}

fn shape_of(node: &XmlNode, tag: &str) -> Option<MarkShape> {
    Some(match tag {
        "rect" => MarkShape::Rect,
        "circle" | "ellipse" => MarkShape::Point,
        "line" => MarkShape::Rule,
        "polyline" => MarkShape::LinePath,
        "polygon" => MarkShape::Other,
        "path" => {
            let (_, arc) = path_bounds(node.attr("d").unwrap_or(""));
            if arc {
                MarkShape::Arc
            } else {
                MarkShape::LinePath
            }
        }
        "text" => MarkShape::Text,
        "image" => MarkShape::Image,
        "g" | "use" => MarkShape::Other,
        _ => return None,
    })
}

fn bbox_of(node: &XmlNode, tag: &str, ctx: &Inherited, text: Option<&str>) -> BBox {
    match tag {
        "rect" | "image" | "use" => BBox::new(node.num("x"), node.num("y"), node.num("width"), node.num("height")),
        "circle" => {
            let r = node.num("r");
            BBox::new(node.num("cx") - r, node.num("cy") - r, 2.0 * r, 2.0 * r)
        }
        "ellipse" => {
            let (rx, ry) = (node.num("rx"), node.num("ry"));
            BBox::new(node.num("cx") - rx, node.num("cy") - ry, 2.0 * rx, 2.0 * ry)
        }
        "line" => BBox::from_points(&[(node.num("x1"), node.num("y1")), (node.num("x2"), node.num("y2"))]),
        "polyline" | "polygon" => {
            let pts: Vec<(f64, f64)> = numbers(node.attr("points").unwrap_or(""))
                .chunks_exact(2)
                .map(|p| (p[0], p[1]))
                .collect();
            BBox::from_points(&pts)
        }
        "path" => path_bounds(node.attr("d").unwrap_or("")).0,
        "text" => {
            let size = node
                .attr("font-size")
                .and_then(|v| numbers(v).first().copied())
                .or(ctx.font_size)
                .unwrap_or(DEFAULT_FONT_SIZE);
            let chars = text.map(|t| t.chars().count()).unwrap_or(0) as f64;
            let width = chars * size * 0.6;
            let x = node.num("x");
            let left = match node.attr("text-anchor") {
                Some("middle") => x - width / 2.0,
                Some("end") => x - width,
                _ => x,
            };
            BBox::new(left, node.num("y") - size * 0.8, width, size)
        }
        _ => BBox::default(),
    }
}

fn parse_datum(payload: &str) -> Result<Vec<Record>, String> {
    let value: serde_json::Value = serde_json::from_str(payload).map_err(|e| e.to_string())?;
    let records = match value {
        serde_json::Value::Object(map) => vec![map],
        serde_json::Value::Array(items) => items
            .into_iter()
            .map(|item| match item {
                serde_json::Value::Object(map) => Ok(map),
                other => Err(format!("list entries must be objects, found {other}")),
            })
            .collect::<Result<Vec<_>, _>>()?,
        other => return Err(format!("expected an object or a list of objects, found {other}")),
    };
    for r in &records {
        if let Some((k, v)) = r.iter().find(|(_, v)| v.is_object() || v.is_array()) {
            return Err(format!("value of `{k}` must be a scalar, found {v}"));
        }
    }
    Ok(records.into_iter().filter(|r| !r.is_empty()).collect())
}
