//! Binary morphology on level sets.
//!
//! All operators look only at neighbours that exist: a structuring element
//! that hangs over the border is cut to the in-bounds cells.

use crate::grid::{Grid, LevelSet};

const CROSS: [(i64, i64); 4] = [(-1, 0), (1, 0), (0, -1), (0, 1)];

/// Off-centre cells of the four length-3 segments through a pixel:
/// horizontal, vertical, main diagonal, anti-diagonal.
const LINES: [[(i64, i64); 2]; 4] = [
    [(-1, 0), (1, 0)],
    [(0, -1), (0, 1)],
    [(-1, -1), (1, 1)],
    [(-1, 1), (1, -1)],
];

#[inline]
fn neighbour(u: &LevelSet, x: usize, y: usize, (dx, dy): (i64, i64)) -> Option<bool> {
    let xx = x as i64 + dx;
    let yy = y as i64 + dy;
    if xx < 0 || yy < 0 || xx >= u.nx() as i64 || yy >= u.ny() as i64 {
        return None;
    }
    Some(u.at(xx as usize, yy as usize))
}

/// Dilation by the 3×3 cross.
pub fn dilate(u: &LevelSet) -> LevelSet {
    Grid::from_fn(u.nx(), u.ny(), |x, y| {
        u.at(x, y) || CROSS.iter().any(|&o| neighbour(u, x, y, o) == Some(true))
    })
}

/// Erosion by the 3×3 cross.
pub fn erode(u: &LevelSet) -> LevelSet {
    Grid::from_fn(u.nx(), u.ny(), |x, y| {
        u.at(x, y) && CROSS.iter().all(|&o| neighbour(u, x, y, o) != Some(false))
    })
}

/// Sup over the four segments of the erosion by that segment.
pub(crate) fn sup_inf(u: &LevelSet) -> LevelSet {
    Grid::from_fn(u.nx(), u.ny(), |x, y| {
        u.at(x, y)
            && LINES
                .iter()
                .any(|line| line.iter().all(|&o| neighbour(u, x, y, o) != Some(false)))
    })
}

/// Inf over the four segments of the dilation by that segment.
pub(crate) fn inf_sup(u: &LevelSet) -> LevelSet {
    Grid::from_fn(u.nx(), u.ny(), |x, y| {
        u.at(x, y)
            || LINES
                .iter()
                .all(|line| line.iter().any(|&o| neighbour(u, x, y, o) == Some(true)))
    })
}

/// Morphological curvature operator that alternates `SI∘IS` and `IS∘SI`
/// between successive calls.
#[derive(Debug, Clone, Default)]
pub struct CurvatureSmoother {
    calls: usize,
}

impl CurvatureSmoother {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn apply(&mut self, u: &LevelSet) -> LevelSet {
        let out = if self.calls.is_multiple_of(2) {
            sup_inf(&inf_sup(u))
        } else {
            inf_sup(&sup_inf(u))
        };
        self.calls += 1;
        out
    }
}

/// `passes` applications of the curvature operator, starting with `SI∘IS`.
pub fn curvature_smooth(u: &LevelSet, passes: usize) -> LevelSet {
    let mut smoother = CurvatureSmoother::new();
    let mut out = u.clone();
    for _ in 0..passes {
        out = smoother.apply(&out);
    }
    out
}

/// Pixels whose 3×3 neighbourhood contains both inside and outside cells.
pub(crate) fn boundary(u: &LevelSet) -> Grid<bool> {
    let (nx, ny) = u.shape();
    Grid::from_fn(nx, ny, |x, y| {
        let mut seen_in = false;
        let mut seen_out = false;
        for yy in y.saturating_sub(1)..=(y + 1).min(ny - 1) {
            for xx in x.saturating_sub(1)..=(x + 1).min(nx - 1) {
                if u.at(xx, yy) {
                    seen_in = true;
                } else {
                    seen_out = true;
                }
            }
        }
        seen_in && seen_out
    })
}
