//! Shortest augmenting path solver for square assignment problems.
//!
//! Follows the Jonker-Volgenant / Crouse formulation: rows are inserted one
//! at a time along a Dijkstra shortest path on reduced costs `c - u - v`.
//! The solver state (matching plus duals) is kept so that a subproblem which
//! differs by one removed match can be re-solved with a single augmentation.

const NONE: usize = usize::MAX;

/// Matching and dual variables of a (partially) solved square problem.
#[derive(Debug, Clone)]
pub(crate) struct LapState {
    pub col4row: Vec<usize>,
    pub row4col: Vec<usize>,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

impl LapState {
    pub fn empty(size: usize) -> Self {
        Self {
            col4row: vec![NONE; size],
            row4col: vec![NONE; size],
            u: vec![0.0; size],
            v: vec![0.0; size],
        }
    }

    pub fn unmatch_row(&mut self, row: usize) {
        let col = self.col4row[row];
        if col != NONE {
            self.row4col[col] = NONE;
            self.col4row[row] = NONE;
        }
    }
}

/// Scratch buffers reused across augmentations.
#[derive(Debug, Default)]
pub(crate) struct Workspace {
    shortest: Vec<f64>,
    path: Vec<usize>,
    remaining: Vec<usize>,
    scanned_rows: Vec<bool>,
    scanned_cols: Vec<bool>,
}

impl Workspace {
    fn reset(&mut self, size: usize) {
        self.shortest.clear();
        self.shortest.resize(size, f64::INFINITY);
        self.path.clear();
        self.path.resize(size, NONE);
        self.scanned_rows.clear();
        self.scanned_rows.resize(size, false);
        self.scanned_cols.clear();
        self.scanned_cols.resize(size, false);
        self.remaining.clear();
    }
}

/// Inserts `start_row` into the matching along a shortest augmenting path.
///
/// Only columns with `col_active[j]` participate. Returns `false` when no
/// finite augmenting path exists; the state is then left unchanged.
pub(crate) fn augment<F>(
    cost: F,
    state: &mut LapState,
    start_row: usize,
    col_active: &[bool],
    ws: &mut Workspace,
) -> bool
where
    F: Fn(usize, usize) -> f64,
{
    let size = state.u.len();
    ws.reset(size);
    // Reverse order keeps constant matrices on the identity.
    ws.remaining
        .extend((0..size).rev().filter(|&j| col_active[j]));

    let mut row = start_row;
    let mut min_val = 0.0;
    let sink = loop {
        ws.scanned_rows[row] = true;
        let mut best_idx = NONE;
        let mut lowest = f64::INFINITY;
        let ui = state.u[row];
        for (idx, &j) in ws.remaining.iter().enumerate() {
            let c = cost(row, j);
            if c.is_finite() {
                let r = min_val + c - ui - state.v[j];
                if r < ws.shortest[j] {
                    ws.path[j] = row;
                    ws.shortest[j] = r;
                }
            }
            let s = ws.shortest[j];
            if s < lowest || (s == lowest && s.is_finite() && state.row4col[j] == NONE) {
                lowest = s;
                best_idx = idx;
            }
        }
        if !lowest.is_finite() {
            return false;
        }
        min_val = lowest;
        let j = ws.remaining.swap_remove(best_idx);
        ws.scanned_cols[j] = true;
        if state.row4col[j] == NONE {
            break j;
        }
        row = state.row4col[j];
    };

    state.u[start_row] += min_val;
    for i in 0..size {
        if ws.scanned_rows[i] && i != start_row {
            state.u[i] += min_val - ws.shortest[state.col4row[i]];
        }
    }
    for j in 0..size {
        if ws.scanned_cols[j] {
            state.v[j] -= min_val - ws.shortest[j];
        }
    }

    let mut j = sink;
    loop {
        let i = ws.path[j];
        state.row4col[j] = i;
        std::mem::swap(&mut state.col4row[i], &mut j);
        if i == start_row {
            break;
        }
    }
    true
}

/// Solves a full square problem from scratch.
#[cfg(test)]
pub(crate) fn solve<F>(cost: F, size: usize, ws: &mut Workspace) -> Option<LapState>
where
    F: Fn(usize, usize) -> f64,
{
    let mut state = LapState::empty(size);
    let active = vec![true; size];
    for row in 0..size {
        if !augment(&cost, &mut state, row, &active, ws) {
            return None;
        }
    }
    Some(state)
}

/// Solves a square problem whose rows from `real` on cost zero everywhere.
///
/// Real rows first take their cheapest column when it is still free, with
/// `u` set to the row minimum and `v = 0`; the rest are inserted by
/// augmentation. The zero rows then fill the leftover columns, which keep
/// `v = 0` and are therefore tight.
pub(crate) fn solve_padded<F>(cost: F, real: usize, size: usize, ws: &mut Workspace) -> Option<LapState>
where
    F: Fn(usize, usize) -> f64,
{
    let mut state = LapState::empty(size);
    let mut pending = Vec::new();
    for row in 0..real {
        let mut best = NONE;
        let mut lowest = f64::INFINITY;
        for j in 0..size {
            let c = cost(row, j);
            if c < lowest {
                lowest = c;
                best = j;
            }
        }
        if best == NONE {
            return None;
        }
        state.u[row] = lowest;
        if state.row4col[best] == NONE {
            state.row4col[best] = row;
            state.col4row[row] = best;
        } else {
            pending.push(row);
        }
    }
    let active = vec![true; size];
    for row in pending {
        if !augment(&cost, &mut state, row, &active, ws) {
            return None;
        }
    }
    let free: Vec<usize> = (0..size).filter(|&j| state.row4col[j] == NONE).collect();
    if free.len() != size - real {
        return None;
    }
    for (row, j) in (real..size).zip(free) {
        state.row4col[j] = row;
        state.col4row[row] = j;
    }
    Some(state)
}
