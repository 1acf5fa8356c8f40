//! Dense row-major 2D grids shared by every per-slice operation.
//!
//! A grid cell `(x, y)` lives at `data[y * nx + x]`; `x` runs along a row.

use std::fmt;

/// Row-major 2D grid.
#[derive(Clone, PartialEq)]
pub struct Grid<T> {
    nx: usize,
    ny: usize,
    data: Vec<T>,
}

/// A single transversal slice of real-valued samples (HU or rescaled intensity).
pub type Slice2D = Grid<f64>;

/// Binary level set: `true` inside the contour, `false` outside.
pub type LevelSet = Grid<bool>;

/// Returned when a grid is built from a buffer of the wrong length.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ShapeError {
    pub nx: usize,
    pub ny: usize,
    pub len: usize,
}

impl fmt::Display for ShapeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "grid of {}x{} needs {} values, got {}",
            self.nx,
            self.ny,
            self.nx * self.ny,
            self.len
        )
    }
}

impl std::error::Error for ShapeError {}

impl<T: Clone> Grid<T> {
    pub fn filled(nx: usize, ny: usize, value: T) -> Self {
        Self {
            nx,
            ny,
            data: vec![value; nx * ny],
        }
    }

    /// Builds a grid by evaluating `f(x, y)` at every cell.
    pub fn from_fn(nx: usize, ny: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(nx * ny);
        for y in 0..ny {
            for x in 0..nx {
                data.push(f(x, y));
            }
        }
        Self { nx, ny, data }
    }

    /// Copies the `w`×`h` window whose top-left corner is `(x0, y0)`.
    ///
    /// Panics if the window leaves the grid.
    pub fn window(&self, x0: usize, y0: usize, w: usize, h: usize) -> Self {
        assert!(
            x0 + w <= self.nx && y0 + h <= self.ny,
            "window out of bounds"
        );
        Self::from_fn(w, h, |x, y| self.data[(y0 + y) * self.nx + x0 + x].clone())
    }

    pub fn map<U>(&self, f: impl FnMut(&T) -> U) -> Grid<U> {
        Grid {
            nx: self.nx,
            ny: self.ny,
            data: self.data.iter().map(f).collect(),
        }
    }
}

impl<T> Grid<T> {
    pub fn from_vec(nx: usize, ny: usize, data: Vec<T>) -> Result<Self, ShapeError> {
        if data.len() != nx * ny {
            return Err(ShapeError {
                nx,
                ny,
                len: data.len(),
            });
        }
        Ok(Self { nx, ny, data })
    }

    #[inline]
    pub fn nx(&self) -> usize {
        self.nx
    }

    #[inline]
    pub fn ny(&self) -> usize {
        self.ny
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.nx, self.ny)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize) -> usize {
        debug_assert!(x < self.nx && y < self.ny);
        y * self.nx + x
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> &T {
        &self.data[self.index(x, y)]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: T) {
        let i = self.index(x, y);
        self.data[i] = value;
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn iter(&self) -> std::slice::Iter<'_, T> {
        self.data.iter()
    }

    /// Iterates `(x, y, &value)` in row-major order.
    pub fn indexed(&self) -> impl Iterator<Item = (usize, usize, &T)> {
        let nx = self.nx;
        self.data
            .iter()
            .enumerate()
            .map(move |(i, v)| (i % nx, i / nx, v))
    }
}

impl<T: Copy> Grid<T> {
    #[inline]
    pub fn at(&self, x: usize, y: usize) -> T {
        self.data[y * self.nx + x]
    }
}

impl Grid<f64> {
    pub fn min_max(&self) -> Option<(f64, f64)> {
        let mut it = self.data.iter().copied();
        let first = it.next()?;
        Some(it.fold((first, first), |(lo, hi), v| (lo.min(v), hi.max(v))))
    }
}

impl Grid<bool> {
    /// Number of cells inside the level set.
    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&v| v).count()
    }

    pub fn is_all_false(&self) -> bool {
        !self.data.iter().any(|&v| v)
    }

    pub fn is_all_true(&self) -> bool {
        self.data.iter().all(|&v| v)
    }

    pub fn complement(&self) -> Self {
        self.map(|&v| !v)
    }

    /// Filled disk `(x - cx)^2 + (y - cy)^2 <= r^2` over pixel centers.
    pub fn disk(nx: usize, ny: usize, cx: f64, cy: f64, r: f64) -> Self {
        Self::from_fn(nx, ny, |x, y| {
            let dx = x as f64 - cx;
            let dy = y as f64 - cy;
            dx * dx + dy * dy <= r * r
        })
    }
}

impl<T: fmt::Debug> fmt::Debug for Grid<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid")
            .field("nx", &self.nx)
            .field("ny", &self.ny)
            .field("data", &self.data)
            .finish()
    }
}
