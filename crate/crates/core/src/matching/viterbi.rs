use std::cmp::Ordering;

use super::{
    contour_tangents, log_compatibility, log_consistency, MatchParams, StrokeSet, StrokeVertex,
};
use crate::geom::AnchoredPolyline;

/// Result of decoding one curve.
#[derive(Clone, Debug, PartialEq)]
pub struct CurveMatch {
    pub assignment: Vec<Option<StrokeVertex>>,
    /// Log of the HMM score of the decoded assignment; `None` when no vertex
    /// had a candidate.
    pub log_score: Option<f64>,
}

/// Greater score wins; equal scores prefer the lower stroke vertex.
fn better(a: (f64, StrokeVertex), b: (f64, StrokeVertex)) -> bool {
    match a.0.partial_cmp(&b.0) {
        Some(Ordering::Greater) => true,
        Some(Ordering::Equal) => a.1 < b.1,
        _ => false,
    }
}

/// Decode the assignment maximizing the product of compatibility factors
/// over vertices with candidates and consistency factors over edges whose
/// endpoints both have candidates. Vertices with empty candidate sets split
/// the curve into independent runs. The closing edge of a closed curve is
/// not scored.
pub fn viterbi_match(
    curve: &AnchoredPolyline,
    strokes: &StrokeSet,
    params: &MatchParams,
    candidates: &[Vec<StrokeVertex>],
) -> CurveMatch {
    let n = curve.len();
    let tangents = contour_tangents(curve);
    let sig_e = params.consistency_sigma();
    let mut assignment = vec![None; n];
    let mut total: Option<f64> = None;

    let mut i = 0;
    while i < n {
        if candidates[i].is_empty() {
            i += 1;
            continue;
        }
        let start = i;
        while i < n && !candidates[i].is_empty() {
            i += 1;
        }
        let run = start..i;

        // delta[k][s]: best log score of the run prefix ending in state s
        let mut delta: Vec<Vec<f64>> = Vec::with_capacity(run.len());
        let mut back: Vec<Vec<usize>> = Vec::with_capacity(run.len());
        for v in run.clone() {
            let p = curve.points[v];
            let emit: Vec<f64> = candidates[v]
                .iter()
                .map(|&q| {
                    log_compatibility(
                        &p,
                        &strokes.point(q),
                        tangents[v],
                        strokes.tangent(q),
                        params.sigma1,
                    )
                })
                .collect();
            if v == start {
                delta.push(emit);
                back.push(vec![0; candidates[v].len()]);
                continue;
            }
            let prev = &delta[delta.len() - 1];
            let pp = curve.points[v - 1];
            let mut row = Vec::with_capacity(candidates[v].len());
            let mut brow = Vec::with_capacity(candidates[v].len());
            for (s, &q) in candidates[v].iter().enumerate() {
                let qp = strokes.point(q);
                let mut best: Option<(f64, usize)> = None;
                for (r, &qr) in candidates[v - 1].iter().enumerate() {
                    let score = prev[r] + log_consistency(&pp, &p, &strokes.point(qr), &qp, sig_e);
                    let take = match best {
                        None => true,
                        Some((b, br)) => better((score, qr), (b, candidates[v - 1][br])),
                    };
                    if take {
                        best = Some((score, r));
                    }
                }
                let (b, br) = best.expect("non-empty candidate set");
                row.push(b + emit[s]);
                brow.push(br);
            }
            delta.push(row);
            back.push(brow);
        }

        let last = delta.len() - 1;
        let cands_last = &candidates[run.end - 1];
        let mut best_s = 0;
        for s in 1..cands_last.len() {
            if better(
                (delta[last][s], cands_last[s]),
                (delta[last][best_s], cands_last[best_s]),
            ) {
                best_s = s;
            }
        }
        *total.get_or_insert(0.0) += delta[last][best_s];
        let mut s = best_s;
        for k in (0..delta.len()).rev() {
            let v = start + k;
            assignment[v] = Some(candidates[v][s]);
            s = back[k][s];
        }
    }
    CurveMatch {
        assignment,
        log_score: total,
    }
}

/// Log HMM score of an arbitrary assignment under the same factorization
/// used by [`viterbi_match`].
pub fn path_log_score(
    curve: &AnchoredPolyline,
    strokes: &StrokeSet,
    params: &MatchParams,
    assignment: &[Option<StrokeVertex>],
) -> Option<f64> {
    let tangents = contour_tangents(curve);
    let mut total = None;
    for (v, q) in assignment.iter().enumerate() {
        let Some(q) = q else { continue };
        let mut s = log_compatibility(
            &curve.points[v],
            &strokes.point(*q),
            tangents[v],
            strokes.tangent(*q),
            params.sigma1,
        );
        if v > 0 {
            if let Some(qp) = assignment[v - 1] {
                s += log_consistency(
                    &curve.points[v - 1],
                    &curve.points[v],
                    &strokes.point(qp),
                    &strokes.point(*q),
                    params.consistency_sigma(),
                );
            }
        }
        *total.get_or_insert(0.0) += s;
    }
    total
}
