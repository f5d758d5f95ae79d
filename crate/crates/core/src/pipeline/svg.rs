//! Polyline subset of SVG 1.1.
//!
//! Written files use a view box of `-wx -wy 2wx 2wy` in normalized image
//! units, so file coordinates are image coordinates with y negated. On
//! input, any view box (or the `width`/`height` box when absent) is mapped
//! so that its longer side spans [-1, 1], matching [`Viewport`].

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geom::{AnchoredPolyline, Vec2, Viewport};

pub const ANALYTIC_COLOR: &str = "#FFA500";
pub const DEVIATED_COLOR: &str = "#000000";
pub const MATCH_COLOR: &str = "#1E90FF";

#[derive(Clone, Debug, PartialEq)]
pub struct SvgPath {
    pub class: String,
    pub stroke: String,
    pub points: Vec<Vec2>,
    pub closed: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SvgDocument {
    pub viewport: Viewport,
    pub paths: Vec<SvgPath>,
}

impl SvgDocument {
    pub fn new(viewport: Viewport) -> Self {
        Self {
            viewport,
            paths: Vec::new(),
        }
    }

    pub fn add_curves<'a>(
        &mut self,
        curves: impl IntoIterator<Item = &'a AnchoredPolyline>,
        class: impl Fn(usize) -> String,
        stroke: &str,
    ) {
        for (k, c) in curves.into_iter().enumerate() {
            self.paths.push(SvgPath {
                class: class(k),
                stroke: stroke.into(),
                points: c.points.clone(),
                closed: c.closed,
            });
        }
    }

    /// Paths with at least two points, as strokes.
    pub fn strokes(&self) -> Vec<AnchoredPolyline> {
        self.paths
            .iter()
            .filter(|p| p.points.len() >= 2)
            .enumerate()
            .map(|(k, p)| AnchoredPolyline {
                points: p.points.clone(),
                anchors: None,
                closed: p.closed,
                source_id: k,
            })
            .collect()
    }

    pub fn to_svg(&self) -> String {
        let (wx, wy) = self.viewport.half_extent();
        let mut s = String::new();
        let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{}" height="{}" viewBox="{} {} {} {}">"#,
            self.viewport.width,
            self.viewport.height,
            -wx,
            -wy,
            2.0 * wx,
            2.0 * wy
        );
        for p in &self.paths {
            let mut d = String::new();
            for (k, q) in p.points.iter().enumerate() {
                let cmd = if k == 0 { 'M' } else { 'L' };
                // + 0.0 folds -0 into 0
                let _ = write!(d, "{}{} {} ", cmd, q.x + 0.0, -q.y + 0.0);
            }
            if p.closed {
                d.push('Z');
            }
            let _ = writeln!(
                s,
                r#"  <path class="{}" d="{}" fill="none" stroke="{}" stroke-width="0.003"/>"#,
                p.class,
                d.trim_end(),
                p.stroke
            );
        }
        s.push_str("</svg>\n");
        s
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path.as_ref(), self.to_svg()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text =
            std::fs::read_to_string(path.as_ref()).map_err(|e| Error::io(path.as_ref(), e))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let doc =
            roxmltree::Document::parse(text).map_err(|e| Error::Parse(format!("SVG: {e}")))?;
        let root = doc.root_element();
        if root.tag_name().name() != "svg" {
            return Err(Error::Parse("root element is not <svg>".into()));
        }
        let length = |name: &str| -> Result<Option<f64>> {
            root.attribute(name)
                .map(|v| {
                    v.trim_end_matches("px")
                        .parse::<f64>()
                        .map_err(|_| Error::Parse(format!("bad {name} attribute {v:?}")))
                })
                .transpose()
        };
        let (width, height) = (length("width")?, length("height")?);
        let vb = match root.attribute("viewBox") {
            Some(v) => {
                let n = numbers(v)?;
                if n.len() != 4 {
                    return Err(Error::Parse(format!("viewBox needs 4 numbers, got {v:?}")));
                }
                [n[0], n[1], n[2], n[3]]
            }
            None => match (width, height) {
                (Some(w), Some(h)) => [0.0, 0.0, w, h],
                _ => {
                    return Err(Error::Parse(
                        "SVG needs a viewBox or width and height".into(),
                    ))
                }
            },
        };
        let viewport = Viewport::new(width.unwrap_or(vb[2]), height.unwrap_or(vb[3]))
            .map_err(|e| Error::Parse(e.to_string()))?;
        let (cx, cy) = (vb[0] + 0.5 * vb[2], vb[1] + 0.5 * vb[3]);
        let half = 0.5 * vb[2].max(vb[3]);
        if !(half > 0.0) {
            return Err(Error::Parse("empty viewBox".into()));
        }
        let map = |x: f64, y: f64| Vec2::new((x - cx) / half + 0.0, -((y - cy) / half) + 0.0);

        let mut paths = Vec::new();
        for node in root.descendants().filter(|n| n.is_element()) {
            if node.attribute("transform").is_some() {
                return Err(Error::Parse(
                    "transform attributes are not supported".into(),
                ));
            }
            let class = node.attribute("class").unwrap_or("").to_string();
            let stroke = node
                .attribute("stroke")
                .unwrap_or(DEVIATED_COLOR)
                .to_string();
            let subpaths = match node.tag_name().name() {
                "path" => parse_path(node.attribute("d").unwrap_or(""))?,
                "polyline" | "polygon" => {
                    let n = numbers(node.attribute("points").unwrap_or(""))?;
                    if n.len() % 2 != 0 {
                        return Err(Error::Parse("odd number of polyline coordinates".into()));
                    }
                    let pts = n.chunks(2).map(|c| (c[0], c[1])).collect();
                    vec![(pts, node.tag_name().name() == "polygon")]
                }
                "line" => {
                    let a = |k: &str| -> Result<f64> {
                        node.attribute(k)
                            .unwrap_or("0")
                            .parse()
                            .map_err(|_| Error::Parse(format!("bad line attribute {k}")))
                    };
                    vec![(vec![(a("x1")?, a("y1")?), (a("x2")?, a("y2")?)], false)]
                }
                _ => continue,
            };
            for (pts, closed) in subpaths {
                paths.push(SvgPath {
                    class: class.clone(),
                    stroke: stroke.clone(),
                    points: pts.into_iter().map(|(x, y)| map(x, y)).collect(),
                    closed,
                });
            }
        }
        Ok(Self { viewport, paths })
    }
}

fn numbers(s: &str) -> Result<Vec<f64>> {
    s.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse::<f64>()
                .map_err(|_| Error::Parse(format!("bad number {t:?}")))
        })
        .collect()
}

/// Tokens of a path `d` attribute: command letters and numbers.
fn path_tokens(d: &str) -> Result<Vec<PathToken>> {
    let mut out = Vec::new();
    let b = d.as_bytes();
    let mut i = 0;
    while i < b.len() {
        let c = b[i] as char;
        if c.is_ascii_whitespace() || c == ',' {
            i += 1;
        } else if c.is_ascii_alphabetic() && c != 'e' && c != 'E' {
            out.push(PathToken::Cmd(c));
            i += 1;
        } else {
            let start = i;
            i += 1;
            while i < b.len() {
                let ch = b[i] as char;
                let prev = b[i - 1] as char;
                let ok = ch.is_ascii_digit()
                    || ch == '.'
                    || ch == 'e'
                    || ch == 'E'
                    || ((ch == '-' || ch == '+') && (prev == 'e' || prev == 'E'));
                if !ok {
                    break;
                }
                i += 1;
            }
            let t = &d[start..i];
            out.push(PathToken::Num(
                t.parse()
                    .map_err(|_| Error::Parse(format!("bad path number {t:?}")))?,
            ));
        }
    }
    Ok(out)
}

enum PathToken {
    Cmd(char),
    Num(f64),
}

type Subpath = (Vec<(f64, f64)>, bool);

/// Subpaths of the `M`/`L`/`H`/`V`/`Z` subset (absolute or relative).
fn parse_path(d: &str) -> Result<Vec<Subpath>> {
    let tokens = path_tokens(d)?;
    let mut out: Vec<Subpath> = Vec::new();
    let mut cur: Vec<(f64, f64)> = Vec::new();
    let mut pos = (0.0, 0.0);
    let mut cmd = None;
    let mut k = 0;
    let take = |k: &mut usize| -> Result<f64> {
        match tokens.get(*k) {
            Some(PathToken::Num(v)) => {
                *k += 1;
                Ok(*v)
            }
            _ => Err(Error::Parse("path command is missing a coordinate".into())),
        }
    };
    let flush = |cur: &mut Vec<(f64, f64)>, out: &mut Vec<Subpath>, closed: bool| {
        if !cur.is_empty() {
            out.push((std::mem::take(cur), closed));
        }
    };
    while k < tokens.len() {
        let c = match tokens[k] {
            PathToken::Cmd(c) => {
                k += 1;
                c
            }
            PathToken::Num(_) => match cmd {
                // implicit repetition; a repeated moveto is a lineto
                Some('M') => 'L',
                Some('m') => 'l',
                Some(c) if c != 'Z' && c != 'z' => c,
                _ => return Err(Error::Parse("path data must start with a command".into())),
            },
        };
        match c {
            'M' | 'm' => {
                flush(&mut cur, &mut out, false);
                let (x, y) = (take(&mut k)?, take(&mut k)?);
                pos = if c == 'm' {
                    (pos.0 + x, pos.1 + y)
                } else {
                    (x, y)
                };
                cur.push(pos);
            }
            'L' | 'l' => {
                let (x, y) = (take(&mut k)?, take(&mut k)?);
                pos = if c == 'l' {
                    (pos.0 + x, pos.1 + y)
                } else {
                    (x, y)
                };
                cur.push(pos);
            }
            'H' | 'h' => {
                let x = take(&mut k)?;
                pos.0 = if c == 'h' { pos.0 + x } else { x };
                cur.push(pos);
            }
            'V' | 'v' => {
                let y = take(&mut k)?;
                pos.1 = if c == 'v' { pos.1 + y } else { y };
                cur.push(pos);
            }
            'Z' | 'z' => {
                if let Some(&first) = cur.first() {
                    pos = first;
                }
                flush(&mut cur, &mut out, true);
            }
            other => return Err(Error::Parse(format!("unsupported path command {other:?}"))),
        }
        cmd = Some(c);
    }
    flush(&mut cur, &mut out, false);
    Ok(out)
}
