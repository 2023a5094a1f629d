use crate::chart::{parse_anchored, MarkShape};

use super::{ExportError, TimelineDocument};

const TEMPLATE: &str = include_str!("../../assets/preview.html");

/// JSON inside a script element must not close it early.
fn script_safe(json: &str) -> String {
    json.replace("</", "<\\/")
}

/// Fills the fixed page template with the source graphic, the timeline
/// bytes and the element anchors the player needs to find nodes.
pub fn emit_preview(tdoc: &TimelineDocument, svg: &[u8]) -> Result<String, ExportError> {
    let (doc, anchors) = parse_anchored(svg)?;
    let anchors: Vec<serde_json::Value> = anchors
        .iter()
        .map(|a| {
            let paint = match doc.element(&a.id).map(|e| e.shape) {
                Some(MarkShape::LinePath | MarkShape::Rule) => "stroke",
                _ => "fill",
            };
            serde_json::json!([a.order, a.id, paint])
        })
        .collect();
    let timeline = String::from_utf8(tdoc.to_bytes()).expect("timeline is UTF-8");
    let svg = String::from_utf8_lossy(svg);
    let fills = [
        ("{{svg}}", svg.trim().to_string()),
        ("{{timeline}}", script_safe(timeline.trim_end())),
        ("{{anchors}}", script_safe(&serde_json::to_string(&anchors)?)),
    ];

    let mut out = String::with_capacity(TEMPLATE.len() + svg.len() + timeline.len());
    let mut rest = TEMPLATE;
    while let Some((at, key, value)) = fills
        .iter()
        .filter_map(|(k, v)| rest.find(k).map(|i| (i, *k, v)))
        .min_by_key(|(i, _, _)| *i)
    {
        out.push_str(&rest[..at]);
        out.push_str(value);
        rest = &rest[at + key.len()..];
    }
    out.push_str(rest);
    Ok(out)
}
