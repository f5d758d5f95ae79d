use std::collections::{BTreeMap, BTreeSet};

use super::{
    contour_tangents, vertex_sv, viterbi_match, Assignment, MatchParams, StrokeSet, StrokeVertex,
};
use crate::exec;
use crate::geom::AnchoredPolyline;

fn claims(assignments: &[Assignment]) -> BTreeMap<StrokeVertex, BTreeSet<usize>> {
    let mut map: BTreeMap<StrokeVertex, BTreeSet<usize>> = BTreeMap::new();
    for (c, a) in assignments.iter().enumerate() {
        for q in a.iter().flatten() {
            map.entry(*q).or_default().insert(c);
        }
    }
    map
}

/// Second matching round for stroke vertices claimed by several curves.
///
/// Conflicted contour vertices get candidates from a widened radius that
/// excludes every conflicted stroke vertex; the affected curves are decoded
/// again. Each conflicted vertex then keeps the better (by compatibility) of
/// its two matches. A stroke vertex still claimed by several curves goes to
/// the curve holding the claim with the highest compatibility (lowest curve
/// id on ties); the other curves fall back to their round-2 match or become
/// unmatched. Matches within one curve may share a stroke vertex.
pub fn resolve_conflicts(
    curves: &[AnchoredPolyline],
    strokes: &StrokeSet,
    params: &MatchParams,
    round1: Vec<Assignment>,
) -> Vec<Assignment> {
    let contested: BTreeSet<StrokeVertex> = claims(&round1)
        .into_iter()
        .filter(|(_, cs)| cs.len() >= 2)
        .map(|(q, _)| q)
        .collect();
    if contested.is_empty() {
        return round1;
    }
    let conflicted = |c: usize, i: usize| round1[c][i].is_some_and(|q| contested.contains(&q));
    let affected: Vec<usize> = (0..curves.len())
        .filter(|&c| (0..curves[c].len()).any(|i| conflicted(c, i)))
        .collect();

    let wide = params.candidate_radius * params.conflict_radius_factor;
    let round2: Vec<(usize, Assignment)> = exec::map(&affected, |&c| {
        let curve = &curves[c];
        let cands: Vec<Vec<StrokeVertex>> = (0..curve.len())
            .map(|i| {
                if conflicted(c, i) {
                    strokes.candidates(&curve.points[i], wide, Some(&contested))
                } else {
                    strokes.candidates(&curve.points[i], params.candidate_radius, None)
                }
            })
            .collect();
        (c, viterbi_match(curve, strokes, params, &cands).assignment)
    });

    let mut out = round1.clone();
    let tangents: Vec<_> = curves.iter().map(contour_tangents).collect();
    let sv = |c: usize, i: usize, q: StrokeVertex| {
        vertex_sv(&curves[c], &tangents[c], i, q, strokes, params)
    };

    // per-vertex choice between the two rounds
    let mut second: BTreeMap<(usize, usize), Option<StrokeVertex>> = BTreeMap::new();
    for (c, a2) in &round2 {
        for i in 0..curves[*c].len() {
            if !conflicted(*c, i) {
                continue;
            }
            let q1 = round1[*c][i].expect("conflicted vertex is matched");
            second.insert((*c, i), a2[i]);
            if let Some(q2) = a2[i] {
                if sv(*c, i, q2) > sv(*c, i, q1) {
                    out[*c][i] = Some(q2);
                }
            }
        }
    }

    // stroke vertices still contested: the strongest claim wins
    for q in &contested {
        let holders: Vec<(usize, usize)> = second
            .keys()
            .copied()
            .filter(|&(c, i)| out[c][i] == Some(*q))
            .collect();
        let curves_holding: BTreeSet<usize> = holders.iter().map(|h| h.0).collect();
        if curves_holding.len() < 2 {
            continue;
        }
        let winner = holders
            .iter()
            .map(|&(c, i)| (sv(c, i, *q), c))
            .max_by(|a, b| a.0.total_cmp(&b.0).then(b.1.cmp(&a.1)))
            .map(|w| w.1)
            .expect("non-empty holders");
        for &(c, i) in &holders {
            if c != winner {
                out[c][i] = second[&(c, i)].filter(|q2| q2 != q);
            }
        }
    }

    cleanup(curves, &tangents, strokes, params, &mut out);
    out
}

/// Remove any remaining cross-curve sharing: the curve with the strongest
/// claim keeps the stroke vertex, other claims are dropped.
fn cleanup(
    curves: &[AnchoredPolyline],
    tangents: &[Vec<Option<crate::geom::Vec2>>],
    strokes: &StrokeSet,
    params: &MatchParams,
    out: &mut [Assignment],
) {
    for (q, cs) in claims(out) {
        if cs.len() < 2 {
            continue;
        }
        let mut best: Option<(f64, usize)> = None;
        for &c in &cs {
            for i in 0..out[c].len() {
                if out[c][i] == Some(q) {
                    let s = vertex_sv(&curves[c], &tangents[c], i, q, strokes, params);
                    if best.is_none_or(|b| s > b.0) {
                        best = Some((s, c));
                    }
                }
            }
        }
        let keep = best.expect("claimed").1;
        for &c in &cs {
            if c != keep {
                for slot in out[c].iter_mut() {
                    if *slot == Some(q) {
                        *slot = None;
                    }
                }
            }
        }
    }
}
