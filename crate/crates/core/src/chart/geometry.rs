use serde::Serialize;

/// Axis-aligned box in canvas pixels.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct BBox {
    pub x: f64,
    pub y: f64,
    pub width: f64,
    pub height: f64,
}

impl BBox {
    pub fn new(x: f64, y: f64, width: f64, height: f64) -> Self {
        Self { x, y, width, height }
    }

    pub fn from_points(points: &[(f64, f64)]) -> Self {
        let Some(&(x0, y0)) = points.first() else {
            return Self::default();
        };
        let (mut min_x, mut min_y, mut max_x, mut max_y) = (x0, y0, x0, y0);
        for &(x, y) in &points[1..] {
            min_x = min_x.min(x);
            min_y = min_y.min(y);
            max_x = max_x.max(x);
            max_y = max_y.max(y);
        }
        Self::new(min_x, min_y, max_x - min_x, max_y - min_y)
    }

    pub fn right(&self) -> f64 {
        self.x + self.width
    }

    pub fn bottom(&self) -> f64 {
        self.y + self.height
    }

    pub fn center(&self) -> (f64, f64) {
        (self.x + self.width / 2.0, self.y + self.height / 2.0)
    }

    pub fn translate(&self, dx: f64, dy: f64) -> Self {
        Self::new(self.x + dx, self.y + dy, self.width, self.height)
    }

    /// Euclidean gap between two boxes; zero when they touch or overlap.
    pub fn gap(&self, other: &BBox) -> f64 {
        let dx = (other.x - self.right()).max(self.x - other.right()).max(0.0);
        let dy = (other.y - self.bottom()).max(self.y - other.bottom()).max(0.0);
        dx.hypot(dy)
    }
}

/// Reads a leading translate(...) out of a transform list. Other transform
/// functions are ignored; charts produced by common toolkits position groups
/// with translations only.
pub(crate) fn parse_translate(transform: &str) -> (f64, f64) {
    let mut dx = 0.0;
    let mut dy = 0.0;
    let mut rest = transform;
    while let Some(pos) = rest.find("translate") {
        rest = &rest[pos + "translate".len()..];
        let Some(open) = rest.find('(') else { break };
        let Some(close) = rest.find(')') else { break };
        let nums = numbers(&rest[open + 1..close]);
        dx += nums.first().copied().unwrap_or(0.0);
        dy += nums.get(1).copied().unwrap_or(0.0);
        rest = &rest[close + 1..];
    }
    (dx, dy)
}

pub(crate) fn numbers(s: &str) -> Vec<f64> {
    let mut out = Vec::new();
    let bytes = s.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_ascii_digit() || c == '-' || c == '+' || c == '.' {
            let start = i;
            i += 1;
            let mut seen_dot = c == '.';
            let mut seen_exp = false;
            while i < bytes.len() {
                let d = bytes[i] as char;
                if d.is_ascii_digit() {
                    i += 1;
                } else if d == '.' && !seen_dot && !seen_exp {
                    seen_dot = true;
                    i += 1;
                } else if (d == 'e' || d == 'E') && !seen_exp {
                    seen_exp = true;
                    i += 1;
                    if i < bytes.len() && (bytes[i] == b'-' || bytes[i] == b'+') {
                        i += 1;
                    }
                } else {
                    break;
                }
            }
            if let Ok(v) = s[start..i].parse::<f64>() {
                out.push(v);
            }
        } else {
            i += 1;
        }
    }
    out
}

/// Approximate bounds of path data: endpoints and control points of every
/// segment, arcs by their endpoints. Also reports whether an arc command
/// appears, which is how sector marks are recognised.
pub(crate) fn path_bounds(d: &str) -> (BBox, bool) {
    let mut points = Vec::new();
    let mut has_arc = false;
    let (mut cx, mut cy) = (0.0, 0.0);
    let (mut sx, mut sy) = (0.0, 0.0);

    for (cmd, args) in path_commands(d) {
        let rel = cmd.is_ascii_lowercase();
        let (bx, by) = if rel { (cx, cy) } else { (0.0, 0.0) };
        match cmd.to_ascii_uppercase() {
            'M' | 'L' | 'T' => {
                for (i, pair) in args.chunks_exact(2).enumerate() {
                    let (x, y) = (offset(rel, cx, pair[0]), offset(rel, cy, pair[1]));
                    cx = x;
                    cy = y;
                    if i == 0 && cmd.eq_ignore_ascii_case(&'M') {
                        sx = x;
                        sy = y;
                    }
                    points.push((x, y));
                }
            }
            'H' => {
                for &v in &args {
                    cx = if rel { cx + v } else { v };
                    points.push((cx, cy));
                }
            }
            'V' => {
                for &v in &args {
                    cy = if rel { cy + v } else { v };
                    points.push((cx, cy));
                }
            }
            'C' => {
                for seg in args.chunks_exact(6) {
                    for pair in seg.chunks_exact(2) {
                        points.push((bx + pair[0], by + pair[1]));
                    }
                    cx = bx + seg[4];
                    cy = by + seg[5];
                }
            }
            'S' | 'Q' => {
                for seg in args.chunks_exact(4) {
                    for pair in seg.chunks_exact(2) {
                        points.push((bx + pair[0], by + pair[1]));
                    }
                    cx = bx + seg[2];
                    cy = by + seg[3];
                }
            }
            'A' => {
                has_arc = true;
                for seg in args.chunks_exact(7) {
                    cx = bx + seg[5];
                    cy = by + seg[6];
                    points.push((cx, cy));
                }
            }
            'Z' => {
                cx = sx;
                cy = sy;
            }
            _ => {}
        }
    }
    (BBox::from_points(&points), has_arc)
}

fn offset(rel: bool, cur: f64, v: f64) -> f64 {
    if rel {
        cur + v
    } else {
        v
    }
}

fn path_commands(d: &str) -> Vec<(char, Vec<f64>)> {
    let mut out = Vec::new();
    let mut current: Option<(char, usize)> = None;
    for (i, c) in d.char_indices() {
        if c.is_ascii_alphabetic() && c != 'e' && c != 'E' {
            if let Some((cmd, start)) = current.take() {
                out.push((cmd, numbers(&d[start..i])));
            }
            current = Some((c, i + c.len_utf8()));
        }
    }
    if let Some((cmd, start)) = current {
        out.push((cmd, numbers(&d[start..])));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gap_is_zero_for_overlap() {
        let a = BBox::new(0.0, 0.0, 10.0, 10.0);
        let b = BBox::new(5.0, 5.0, 10.0, 10.0);
        assert_eq!(a.gap(&b), 0.0);
        let c = BBox::new(13.0, 14.0, 1.0, 1.0);
        assert_eq!(a.gap(&c), 5.0);
    }

    #[test]
    fn sector_path_is_an_arc() {
        let (bb, arc) = path_bounds("M100,100 L100,20 A80,80 0 0,1 180,100 Z");
        assert!(arc);
        assert_eq!(bb, BBox::new(100.0, 20.0, 80.0, 80.0));
    }

    #[test]
    fn relative_line_path() {
        let (bb, arc) = path_bounds("m10 10 l5 5 h10 v-20");
        assert!(!arc);
        assert_eq!(bb, BBox::new(10.0, -5.0, 15.0, 20.0));
    }

    #[test]
    fn translate_accumulates() {
        assert_eq!(parse_translate("translate(10, 20) translate(5)"), (15.0, 20.0));
        assert_eq!(parse_translate("scale(2)"), (0.0, 0.0));
    }

    #[test]
    fn numbers_with_exponents_and_packed_signs() {
        assert_eq!(numbers("1e2-3.5.5"), vec![100.0, -3.5, 0.5]);
    }
}
