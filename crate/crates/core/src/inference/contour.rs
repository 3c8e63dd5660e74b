//! Marching-squares iso-lines on a rectangular grid.

use std::collections::HashMap;

/// One connected piece of an iso-line. Closed loops repeat their first
/// point at the end.
#[derive(Debug, Clone, PartialEq)]
pub struct Polyline {
    pub points: Vec<[f64; 2]>,
    pub closed: bool,
}

impl Polyline {
    pub fn length(&self) -> f64 {
        self.points
            .windows(2)
            .map(|w| (w[1][0] - w[0][0]).hypot(w[1][1] - w[0][1]))
            .sum()
    }
}

/// A grid edge: horizontal from node `(i, j)` to `(i + 1, j)`, or vertical
/// from `(i, j)` to `(i, j + 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum EdgeKey {
    H(usize, usize),
    V(usize, usize),
}

/// Iso-lines of `values` at `level`.
///
/// `values[i * ys.len() + j]` is the value at `(xs[i], ys[j])`. Cells with
/// a non-finite corner are skipped, so invalid nodes cut the lines rather
/// than being imputed. Nodes with `value ≤ level` count as inside; saddle
/// cells are resolved by the cell-center average.
pub fn extract_contours(values: &[f64], xs: &[f64], ys: &[f64], level: f64) -> Vec<Polyline> {
    let (nx, ny) = (xs.len(), ys.len());
    if nx < 2 || ny < 2 || values.len() != nx * ny || !level.is_finite() {
        return Vec::new();
    }
    let v = |i: usize, j: usize| values[i * ny + j];
    let point = |e: EdgeKey| -> [f64; 2] {
        let ((ia, ja), (ib, jb)) = match e {
            EdgeKey::H(i, j) => ((i, j), (i + 1, j)),
            EdgeKey::V(i, j) => ((i, j), (i, j + 1)),
        };
        let (va, vb) = (v(ia, ja), v(ib, jb));
        let t = ((level - va) / (vb - va)).clamp(0.0, 1.0);
        [
            xs[ia] + t * (xs[ib] - xs[ia]),
            ys[ja] + t * (ys[jb] - ys[ja]),
        ]
    };

    let mut segments: Vec<(EdgeKey, EdgeKey)> = Vec::new();
    for i in 0..nx - 1 {
        for j in 0..ny - 1 {
            let c = [v(i, j), v(i + 1, j), v(i + 1, j + 1), v(i, j + 1)];
            if c.iter().any(|x| !x.is_finite()) {
                continue;
            }
            let above = c.map(|x| x > level);
            // Edges in corner order: bottom, right, top, left.
            let edges = [
                EdgeKey::H(i, j),
                EdgeKey::V(i + 1, j),
                EdgeKey::H(i, j + 1),
                EdgeKey::V(i, j),
            ];
            let crossed: Vec<usize> = (0..4).filter(|&k| above[k] != above[(k + 1) % 4]).collect();
            match crossed.len() {
                2 => segments.push((edges[crossed[0]], edges[crossed[1]])),
                4 => {
                    let center_above = c.iter().sum::<f64>() / 4.0 > level;
                    if center_above == above[0] {
                        // Corners 0 and 2 join through the center; cut off 1 and 3.
                        segments.push((edges[0], edges[1]));
                        segments.push((edges[2], edges[3]));
                    } else {
                        segments.push((edges[3], edges[0]));
                        segments.push((edges[1], edges[2]));
                    }
                }
                _ => {}
            }
        }
    }

    let mut at: HashMap<EdgeKey, Vec<usize>> = HashMap::new();
    for (s, (a, b)) in segments.iter().enumerate() {
        at.entry(*a).or_default().push(s);
        at.entry(*b).or_default().push(s);
    }
    let other = |s: usize, e: EdgeKey| {
        if segments[s].0 == e {
            segments[s].1
        } else {
            segments[s].0
        }
    };
    let mut used = vec![false; segments.len()];
    let mut lines = Vec::new();

    // Walks from `start` along unused segments until the chain ends.
    let walk = |start: EdgeKey, used: &mut Vec<bool>| -> (Vec<EdgeKey>, bool) {
        let mut keys = vec![start];
        let mut cur = start;
        while let Some(&s) = at[&cur].iter().find(|&&s| !used[s]) {
            used[s] = true;
            cur = other(s, cur);
            keys.push(cur);
            if cur == start {
                return (keys, true);
            }
        }
        (keys, false)
    };

    // Open lines start at edges touched by a single segment (grid border or
    // an invalid cell); whatever remains forms closed loops.
    for s in 0..segments.len() {
        for end in [segments[s].0, segments[s].1] {
            if !used[s] && at[&end].len() == 1 {
                let (keys, closed) = walk(end, &mut used);
                lines.push(Polyline {
                    points: keys.into_iter().map(point).collect(),
                    closed,
                });
            }
        }
    }
    for s in 0..segments.len() {
        if !used[s] {
            let (keys, closed) = walk(segments[s].0, &mut used);
            lines.push(Polyline {
                points: keys.into_iter().map(point).collect(),
                closed,
            });
        }
    }
    lines
}
