//! Regular box partitions of a compact domain.
//!
//! Cells are half-open boxes `[a, b)`; cell indices are row-major with the
//! first axis varying fastest. Wrapped axes are identified end-to-end, so
//! `lower` and `upper` name the same point on them.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Domain {
    lower: Vec<f64>,
    upper: Vec<f64>,
    wrap: Vec<bool>,
}

impl Domain {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>, wrap: Vec<bool>) -> Result<Self> {
        if lower.is_empty() {
            return Err(Error::invalid("domain needs at least one axis"));
        }
        if lower.len() != upper.len() || lower.len() != wrap.len() {
            return Err(Error::invalid(format!(
                "domain axis mismatch: {} lower, {} upper, {} wrap flags",
                lower.len(),
                upper.len(),
                wrap.len()
            )));
        }
        for (i, (lo, hi)) in lower.iter().zip(&upper).enumerate() {
            if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
                return Err(Error::invalid(format!(
                    "axis {i}: need finite lower < upper, got [{lo}, {hi})"
                )));
            }
        }
        Ok(Self { lower, upper, wrap })
    }

    /// `[−h₀, h₀) × [−h₁, h₁) × …`
    pub fn symmetric_box(half_widths: &[f64], wrap: &[bool]) -> Result<Self> {
        Self::new(
            half_widths.iter().map(|h| -h).collect(),
            half_widths.to_vec(),
            wrap.to_vec(),
        )
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn wrap(&self) -> &[bool] {
        &self.wrap
    }

    pub fn span(&self, axis: usize) -> f64 {
        self.upper[axis] - self.lower[axis]
    }

    pub fn volume(&self) -> f64 {
        (0..self.dim()).map(|i| self.span(i)).product()
    }

    /// Reduces wrapped coordinates into `[lower, upper)`; other axes untouched.
    pub fn wrap_point(&self, x: &mut [f64]) {
        for (i, xi) in x.iter_mut().enumerate() {
            if self.wrap[i] {
                *xi = self.wrap_coord(i, *xi);
            }
        }
    }

    fn wrap_coord(&self, axis: usize, v: f64) -> f64 {
        let lo = self.lower[axis];
        let span = self.span(axis);
        let r = lo + (v - lo).rem_euclid(span);
        // rem_euclid can round up to exactly `span`
        if r >= self.upper[axis] {
            lo
        } else {
            r
        }
    }

    /// True when every non-wrapped coordinate lies in `[lower, upper)`.
    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter().enumerate().all(|(i, &v)| {
            self.wrap[i] || (v >= self.lower[i] && v < self.upper[i])
        })
    }
}

/// Result of a point lookup.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Location {
    Cell(usize),
    Outside,
}

impl Location {
    pub fn cell(self) -> Option<usize> {
        match self {
            Location::Cell(i) => Some(i),
            Location::Outside => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    domain: Domain,
    counts: Vec<usize>,
    strides: Vec<usize>,
    len: usize,
}

impl Partition {
    pub fn new(domain: Domain, counts: Vec<usize>) -> Result<Self> {
        if counts.len() != domain.dim() {
            return Err(Error::invalid(format!(
                "{} cell counts for a {}-dimensional domain",
                counts.len(),
                domain.dim()
            )));
        }
        if let Some(axis) = counts.iter().position(|&c| c == 0) {
            return Err(Error::invalid(format!("axis {axis} has zero cells")));
        }
        let mut strides = Vec::with_capacity(counts.len());
        let mut len: usize = 1;
        for &c in &counts {
            strides.push(len);
            len = len
                .checked_mul(c)
                .ok_or_else(|| Error::invalid("cell count overflows usize"))?;
        }
        Ok(Self {
            domain,
            counts,
            strides,
            len,
        })
    }

    /// Total number of cells `L`.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn dim(&self) -> usize {
        self.counts.len()
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn cell_width(&self, axis: usize) -> f64 {
        self.domain.span(axis) / self.counts[axis] as f64
    }

    pub fn cell_volume(&self) -> f64 {
        (0..self.dim()).map(|i| self.cell_width(i)).product()
    }

    pub fn multi_index(&self, cell: usize) -> Vec<usize> {
        self.counts
            .iter()
            .zip(&self.strides)
            .map(|(&c, &s)| (cell / s) % c)
            .collect()
    }

    pub fn flat_index(&self, multi: &[usize]) -> usize {
        multi.iter().zip(&self.strides).map(|(k, s)| k * s).sum()
    }

    fn axis_edge(&self, axis: usize, k: usize) -> f64 {
        let lo = self.domain.lower[axis];
        if k == self.counts[axis] {
            return self.domain.upper[axis];
        }
        lo + self.domain.span(axis) * k as f64 / self.counts[axis] as f64
    }

    /// Lower and upper corners of cell `i`.
    pub fn cell_bounds(&self, cell: usize) -> (Vec<f64>, Vec<f64>) {
        let m = self.multi_index(cell);
        let lo = m.iter().enumerate().map(|(a, &k)| self.axis_edge(a, k)).collect();
        let hi = m
            .iter()
            .enumerate()
            .map(|(a, &k)| self.axis_edge(a, k + 1))
            .collect();
        (lo, hi)
    }

    pub fn cell_center(&self, cell: usize) -> Vec<f64> {
        let (lo, hi) = self.cell_bounds(cell);
        lo.iter().zip(&hi).map(|(a, b)| 0.5 * (a + b)).collect()
    }

    /// Axis index of an in-range coordinate; `None` when outside a non-wrapped axis.
    fn axis_index(&self, axis: usize, v: f64) -> Option<usize> {
        let d = &self.domain;
        let v = if d.wrap[axis] {
            d.wrap_coord(axis, v)
        } else if v < d.lower[axis] || v >= d.upper[axis] {
            return None;
        } else {
            v
        };
        let n = self.counts[axis];
        let t = (v - d.lower[axis]) / d.span(axis) * n as f64;
        Some((t.floor() as usize).min(n - 1))
    }

    pub fn locate(&self, x: &[f64]) -> Result<Location> {
        if x.len() != self.dim() {
            return Err(Error::invalid(format!(
                "point has {} coordinates, partition is {}-dimensional",
                x.len(),
                self.dim()
            )));
        }
        if x.iter().any(|v| v.is_nan()) {
            return Err(Error::InvalidState(format!("NaN coordinate in {x:?}")));
        }
        let mut cell = 0;
        for (axis, &v) in x.iter().enumerate() {
            if v.is_infinite() && self.domain.wrap[axis] {
                return Ok(Location::Outside);
            }
            match self.axis_index(axis, v) {
                Some(k) => cell += k * self.strides[axis],
                None => return Ok(Location::Outside),
            }
        }
        Ok(Location::Cell(cell))
    }

    /// Like [`locate`](Self::locate), but points off a non-wrapped axis are
    /// projected onto the nearest boundary cell. Non-finite points stay outside.
    pub fn locate_clamped(&self, x: &[f64]) -> Result<Location> {
        if x.iter().any(|v| v.is_nan()) {
            return Err(Error::InvalidState(format!("NaN coordinate in {x:?}")));
        }
        if x.iter().any(|v| v.is_infinite()) {
            return Ok(Location::Outside);
        }
        let mut cell = 0;
        for (axis, &v) in x.iter().enumerate() {
            let k = match self.axis_index(axis, v) {
                Some(k) => k,
                None if v < self.domain.lower[axis] => 0,
                None => self.counts[axis] - 1,
            };
            cell += k * self.strides[axis];
        }
        Ok(Location::Cell(cell))
    }

    /// Appends `m` points drawn uniformly from cell `cell` to `out` (flat,
    /// `dim` coordinates per point). The stream is keyed by `(seed, cell)`.
    pub fn sample_cell_into(&self, cell: usize, m: usize, seed: u64, out: &mut Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(cell as u64);
        let multi = self.multi_index(cell);
        out.reserve(m * self.dim());
        for _ in 0..m {
            for (axis, &k) in multi.iter().enumerate() {
                let a = self.axis_edge(axis, k);
                let b = self.axis_edge(axis, k + 1);
                // redraw the rare value whose rounding lands on a neighbour
                loop {
                    let v = a + rng.gen::<f64>() * (b - a);
                    if self.axis_index(axis, v) == Some(k) {
                        out.push(v);
                        break;
                    }
                }
            }
        }
    }

    pub fn sample_cell(&self, cell: usize, m: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut flat = Vec::new();
        self.sample_cell_into(cell, m, seed, &mut flat);
        flat.chunks(self.dim()).map(<[f64]>::to_vec).collect()
    }

    /// Cells meeting the closed ℓ∞ ball of radius `epsilon` around `center`.
    pub fn attractor_cells(&self, center: &[f64], epsilon: f64) -> Result<CellSet> {
        if !(epsilon >= 0.0) {
            return Err(Error::invalid(format!(
                "attractor radius must be >= 0, got {epsilon}"
            )));
        }
        if center.len() != self.dim() || !self.domain.contains(center) {
            return Err(Error::invalid(format!(
                "attractor center {center:?} is outside the domain"
            )));
        }
        if matches!(self.locate(center)?, Location::Outside) {
            return Err(Error::invalid(format!(
                "attractor center {center:?} is outside the domain"
            )));
        }
        let mut per_axis: Vec<Vec<usize>> = Vec::with_capacity(self.dim());
        for (axis, &c) in center.iter().enumerate() {
            let n = self.counts[axis];
            let d = &self.domain;
            let scale = n as f64 / d.span(axis);
            let c = if d.wrap[axis] { d.wrap_coord(axis, c) } else { c };
            let lo = ((c - epsilon - d.lower[axis]) * scale).floor();
            let hi = ((c + epsilon - d.lower[axis]) * scale).floor();
            let ks: Vec<usize> = if d.wrap[axis] {
                if hi - lo + 1.0 >= n as f64 {
                    (0..n).collect()
                } else {
                    let mut ks: Vec<usize> = (lo as i64..=hi as i64)
                        .map(|k| k.rem_euclid(n as i64) as usize)
                        .collect();
                    ks.sort_unstable();
                    ks.dedup();
                    ks
                }
            } else {
                let lo = lo.max(0.0) as usize;
                let hi = (hi.min((n - 1) as f64)) as usize;
                (lo..=hi).collect()
            };
            per_axis.push(ks);
        }
        let mut cells = vec![0usize];
        for (axis, ks) in per_axis.iter().enumerate() {
            cells = cells
                .iter()
                .flat_map(|&base| ks.iter().map(move |&k| base + k * self.strides[axis]))
                .collect();
        }
        CellSet::new(cells, self.len)
    }
}

/// Sorted, duplicate-free set of cell indices below a fixed universe size.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CellSet {
    cells: Vec<usize>,
}

impl CellSet {
    pub fn new(mut cells: Vec<usize>, universe: usize) -> Result<Self> {
        cells.sort_unstable();
        cells.dedup();
        if let Some(&last) = cells.last() {
            if last >= universe {
                return Err(Error::invalid(format!(
                    "cell index {last} out of range for {universe} cells"
                )));
            }
        }
        Ok(Self { cells })
    }

    pub fn single(cell: usize) -> Self {
        Self { cells: vec![cell] }
    }

    pub fn complement(&self, universe: usize) -> CellSet {
        let mut out = Vec::with_capacity(universe.saturating_sub(self.cells.len()));
        let mut it = self.cells.iter().peekable();
        for i in 0..universe {
            if it.peek() == Some(&&i) {
                it.next();
            } else {
                out.push(i);
            }
        }
        CellSet { cells: out }
    }

    pub fn contains(&self, cell: usize) -> bool {
        self.cells.binary_search(&cell).is_ok()
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.cells
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.cells.iter().copied()
    }
}

impl From<CellSet> for Vec<usize> {
    fn from(set: CellSet) -> Self {
        set.cells
    }
}
