//! Data association: gated cost matrices and optimal assignment.

mod lap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{iou, BoundingBox};
use crate::kalman::MotionModel;
use crate::tracker::{Detection, Track};

/// Marks a track/detection pair that must not be matched.
pub const INFEASIBLE: f64 = f64::INFINITY;

/// 0.95 quantile of the chi-square distribution with 4 degrees of freedom.
pub const CHI2_95_4DOF: f64 = 9.4877;

/// Stage-two pairs overlapping less than this are not matched.
pub const STAGE2_MIN_IOU: f64 = 0.3;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CostMatrixError {
    #[error("expected {expected} entries for a {rows}x{cols} matrix, got {got}")]
    Shape {
        rows: usize,
        cols: usize,
        expected: usize,
        got: usize,
    },
    #[error(
        "cost at ({row}, {col}) is {value}; costs must be finite and non-negative or INFEASIBLE"
    )]
    InvalidEntry { row: usize, col: usize, value: f64 },
}

/// Tracks × detections matrix of non-negative costs. [`INFEASIBLE`] entries
/// are gated out.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl CostMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, CostMatrixError> {
        if data.len() != rows * cols {
            return Err(CostMatrixError::Shape {
                rows,
                cols,
                expected: rows * cols,
                got: data.len(),
            });
        }
        for (k, &value) in data.iter().enumerate() {
            if !is_valid_cost(value) {
                return Err(CostMatrixError::InvalidEntry {
                    row: k / cols.max(1),
                    col: k % cols.max(1),
                    value,
                });
            }
        }
        Ok(Self { rows, cols, data })
    }

    /// All-infeasible matrix.
    pub fn infeasible(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![INFEASIBLE; rows * cols],
        }
    }

    /// Build from row vectors; all rows must have the same length.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, CostMatrixError> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for row in rows {
            if row.len() != cols {
                return Err(CostMatrixError::Shape {
                    rows: rows.len(),
                    cols,
                    expected: rows.len() * cols,
                    got: rows.iter().map(Vec::len).sum(),
                });
            }
            data.extend_from_slice(row);
        }
        Self::new(rows.len(), cols, data)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.cols + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: f64) -> Result<(), CostMatrixError> {
        if !is_valid_cost(value) {
            return Err(CostMatrixError::InvalidEntry { row, col, value });
        }
        self.data[row * self.cols + col] = value;
        Ok(())
    }

    pub fn is_feasible(&self, row: usize, col: usize) -> bool {
        self.get(row, col) != INFEASIBLE
    }
}

fn is_valid_cost(value: f64) -> bool {
    value == INFEASIBLE || (value.is_finite() && value >= 0.0)
}

/// Result of [`solve_assignment`]. All index lists are ascending; `pairs` is
/// sorted by track index.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Assignment {
    pub pairs: Vec<(usize, usize)>,
    pub unmatched_tracks: Vec<usize>,
    pub unmatched_detections: Vec<usize>,
}

impl Assignment {
    pub fn total_cost(&self, c: &CostMatrix) -> f64 {
        self.pairs.iter().map(|&(i, j)| c.get(i, j)).sum()
    }
}

/// Optimal matching on the feasible entries of `c`.
///
/// Among all matchings that use only feasible entries, the result has the
/// largest possible number of pairs and, among those, the smallest total
/// cost. For a fully finite matrix this is the minimum-cost injection of the
/// smaller side into the larger; for a square one it is a perfect matching.
///
/// The matrix is split into connected components of the feasible-pair graph
/// and each component is solved exactly on a square matrix augmented with
/// dummy rows and columns.
pub fn solve_assignment(c: &CostMatrix) -> Assignment {
    let (rows, cols) = (c.rows, c.cols);
    let mut matched_row = vec![None; rows];
    let mut matched_col = vec![false; cols];

    for component in components(c) {
        for (i, j) in solve_component(c, &component.rows, &component.cols) {
            matched_row[i] = Some(j);
            matched_col[j] = true;
        }
    }

    let mut out = Assignment::default();
    for (i, m) in matched_row.iter().enumerate() {
        match m {
            Some(j) => out.pairs.push((i, *j)),
            None => out.unmatched_tracks.push(i),
        }
    }
    out.unmatched_detections = (0..cols).filter(|&j| !matched_col[j]).collect();
    out
}

struct Component {
    rows: Vec<usize>,
    cols: Vec<usize>,
}

/// Connected components (with at least one feasible edge) of the bipartite
/// graph whose edges are the feasible entries.
fn components(c: &CostMatrix) -> Vec<Component> {
    let n = c.rows + c.cols;
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    let mut has_edge = vec![false; n];
    for i in 0..c.rows {
        for j in 0..c.cols {
            if c.is_feasible(i, j) {
                let a = find(&mut parent, i);
                let b = find(&mut parent, c.rows + j);
                if a != b {
                    // Keep the smaller index as root for a stable component order.
                    let (lo, hi) = if a < b { (a, b) } else { (b, a) };
                    parent[hi] = lo;
                }
                has_edge[i] = true;
                has_edge[c.rows + j] = true;
            }
        }
    }

    let mut index_of_root = vec![usize::MAX; n];
    let mut out: Vec<Component> = Vec::new();
    for node in 0..n {
        if !has_edge[node] {
            continue;
        }
        let root = find(&mut parent, node);
        if index_of_root[root] == usize::MAX {
            index_of_root[root] = out.len();
            out.push(Component {
                rows: Vec::new(),
                cols: Vec::new(),
            });
        }
        let comp = &mut out[index_of_root[root]];
        if node < c.rows {
            comp.rows.push(node);
        } else {
            comp.cols.push(node - c.rows);
        }
    }
    out
}

fn solve_component(c: &CostMatrix, rows: &[usize], cols: &[usize]) -> Vec<(usize, usize)> {
    let (nr, nc) = (rows.len(), cols.len());
    if nr == 1 && nc == 1 {
        return vec![(rows[0], cols[0])];
    }

    let max_cost = rows
        .iter()
        .flat_map(|&i| cols.iter().map(move |&j| c.get(i, j)))
        .filter(|v| v.is_finite())
        .fold(0.0f64, f64::max);
    // Leaving a row and a column unmatched costs 2·skip, which exceeds the
    // total of any feasible matching, so cardinality is maximized first.
    let skip = (max_cost + 1.0) * (nr.min(nc) as f64 + 1.0);

    // [ C        | skip (nr×nr) ]
    // [ skip (nc×nc) | 0        ]
    let n = nr + nc;
    let mut sq = vec![0.0f64; n * n];
    for (a, &i) in rows.iter().enumerate() {
        for (b, &j) in cols.iter().enumerate() {
            sq[a * n + b] = c.get(i, j);
        }
        for b in nc..n {
            sq[a * n + b] = skip;
        }
    }
    for a in nr..n {
        for b in 0..nc {
            sq[a * n + b] = skip;
        }
    }

    lap::solve_square(&sq, n)
        .into_iter()
        .take(nr)
        .enumerate()
        .filter(|&(_, b)| b < nc)
        .map(|(a, b)| (rows[a], cols[b]))
        .collect()
}

/// Weighting and gating of the stage-one cost.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostWeights {
    /// Weight of the motion term; `1 - lambda` weights appearance.
    pub lambda: f64,
    /// Squared Mahalanobis distance above which a pair is infeasible.
    pub gate: f64,
}

impl Default for CostWeights {
    fn default() -> Self {
        Self {
            lambda: 0.5,
            gate: CHI2_95_4DOF,
        }
    }
}

/// Stage-one costs: `lambda · d_motion + (1 − lambda) · d_appearance`.
///
/// `d_motion` is the gating distance of the detection under the track's
/// predicted state; pairs above `weights.gate` are infeasible. When the track
/// has no gallery yet or the detection has no (compatible) embedding, the
/// cost is `d_motion` alone. Tracks whose innovation covariance cannot be
/// factored get an all-infeasible row.
pub fn build_cost_matrix(
    model: &MotionModel,
    tracks: &[&Track],
    detections: &[&Detection],
    weights: &CostWeights,
) -> CostMatrix {
    let mut c = CostMatrix::infeasible(tracks.len(), detections.len());
    for (i, track) in tracks.iter().enumerate() {
        let Ok(innovation) = model.project(track.state()) else {
            continue;
        };
        for (j, det) in detections.iter().enumerate() {
            let motion = innovation.distance(&det.bbox().to_measurement());
            if motion.is_nan() || motion > weights.gate {
                continue;
            }
            let cost = match det.embedding() {
                Some(e) if weights.lambda < 1.0 => match track.gallery().distance(e) {
                    Ok(appearance) => weights.lambda * motion + (1.0 - weights.lambda) * appearance,
                    Err(_) => motion,
                },
                _ => motion,
            };
            c.data[i * c.cols + j] = cost;
        }
    }
    c
}

/// Stage-two costs `1 − iou`, infeasible below [`STAGE2_MIN_IOU`].
pub fn stage2_iou_cost(tracks: &[BoundingBox], detections: &[BoundingBox]) -> CostMatrix {
    let mut c = CostMatrix::infeasible(tracks.len(), detections.len());
    for (i, t) in tracks.iter().enumerate() {
        for (j, d) in detections.iter().enumerate() {
            let overlap = iou(t, d);
            if overlap >= STAGE2_MIN_IOU {
                c.data[i * c.cols + j] = 1.0 - overlap;
            }
        }
    }
    c
}
