use super::state::{Coords, StatePoint};
use smallvec::SmallVec;

/// Relative tolerance used when testing whether a point lies on a box.
pub const BOX_TOL: f64 = 1e-9;

/// One rectilinear grid axis acting on a coordinate of the state.
#[derive(Clone, Debug)]
pub struct Axis {
    pub coord: usize,
    edges: Vec<f64>,
}

impl Axis {
    pub fn uniform(coord: usize, lo: f64, hi: f64, cells: usize) -> Self {
        assert!(cells >= 1 && hi > lo, "axis needs at least one cell and hi > lo");
        let h = (hi - lo) / cells as f64;
        let mut edges: Vec<f64> = (0..=cells).map(|i| lo + i as f64 * h).collect();
        edges[cells] = hi;
        Self { coord, edges }
    }

    pub fn from_edges(coord: usize, edges: Vec<f64>) -> Self {
        assert!(edges.len() >= 2 && edges.windows(2).all(|w| w[1] > w[0]), "edges must increase");
        Self { coord, edges }
    }

    pub fn len(&self) -> usize {
        self.edges.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    pub fn lo(&self) -> f64 {
        self.edges[0]
    }

    pub fn hi(&self) -> f64 {
        self.edges[self.len()]
    }

    pub fn width(&self, i: usize) -> f64 {
        self.edges[i + 1] - self.edges[i]
    }

    pub fn center(&self, i: usize) -> f64 {
        0.5 * (self.edges[i] + self.edges[i + 1])
    }

    pub fn min_width(&self) -> f64 {
        (0..self.len()).map(|i| self.width(i)).fold(f64::INFINITY, f64::min)
    }

    fn tol(&self) -> f64 {
        BOX_TOL * (self.hi() - self.lo()).max(self.lo().abs()).max(self.hi().abs())
    }

    pub fn contains(&self, x: f64) -> bool {
        let tol = self.tol();
        x >= self.lo() - tol && x <= self.hi() + tol
    }

    /// Cell containing `x`; points on the outer edges belong to the end cells.
    pub fn locate(&self, x: f64) -> Option<usize> {
        if !self.contains(x) {
            return None;
        }
        let k = self.edges.partition_point(|&e| e <= x);
        Some(k.saturating_sub(1).min(self.len() - 1))
    }

    /// Cells overlapping `[a, b]` with the overlap lengths.
    pub fn overlaps(&self, a: f64, b: f64) -> SmallVec<[(usize, f64); 4]> {
        let mut out = SmallVec::new();
        let (a, b) = (a.max(self.lo()), b.min(self.hi()));
        if b <= a {
            return out;
        }
        let mut i = self.edges.partition_point(|&e| e <= a).saturating_sub(1);
        while i < self.len() && self.edges[i] < b {
            let len = b.min(self.edges[i + 1]) - a.max(self.edges[i]);
            if len > 0.0 {
                out.push((i, len));
            }
            i += 1;
        }
        out
    }

    /// Linear interpolation stencil between cell centers, constant beyond
    /// the outermost centers: `(i, j, weight of j)`.
    pub fn stencil(&self, x: f64) -> (usize, usize, f64) {
        let n = self.len();
        if n == 1 || x <= self.center(0) {
            return (0, 0, 0.0);
        }
        if x >= self.center(n - 1) {
            return (n - 1, n - 1, 0.0);
        }
        // Index of the last center ≤ x.
        let k = self.edges.partition_point(|&e| e <= x).saturating_sub(1).min(n - 1);
        let i = if x >= self.center(k) { k } else { k - 1 };
        let (ci, cj) = (self.center(i), self.center(i + 1));
        (i, i + 1, (x - ci) / (cj - ci))
    }
}

/// Multilinear interpolation on a tensor block of cell values, with
/// constant extrapolation beyond the outermost centers.
pub fn multilinear(axes: &[&Axis], pos: &[f64], value: impl Fn(usize) -> f64) -> f64 {
    let d = axes.len();
    if d == 0 {
        return value(0);
    }
    let mut stencils: SmallVec<[(usize, usize, f64); 3]> = SmallVec::new();
    let mut strides: SmallVec<[usize; 3]> = SmallVec::from_elem(1, d);
    for k in (0..d).rev() {
        if k + 1 < d {
            strides[k] = strides[k + 1] * axes[k + 1].len();
        }
    }
    for (axis, &x) in axes.iter().zip(pos) {
        stencils.push(axis.stencil(x));
    }
    let mut sum = 0.0;
    for corner in 0..(1usize << d) {
        let mut w = 1.0;
        let mut idx = 0;
        for k in 0..d {
            let (i, j, t) = stencils[k];
            if corner >> k & 1 == 1 {
                if t == 0.0 {
                    w = 0.0;
                    break;
                }
                w *= t;
                idx += j * strides[k];
            } else {
                w *= 1.0 - t;
                idx += i * strides[k];
            }
        }
        if w != 0.0 {
            sum += w * value(idx);
        }
    }
    sum
}

/// Rectilinear grid of one mode.
#[derive(Clone, Debug)]
pub struct ModeGrid {
    pub mode: usize,
    pub dim: usize,
    pub axes: Vec<Axis>,
    /// Coordinates held fixed in this mode (coordinate index, value).
    pub fixed: Vec<(usize, f64)>,
    /// Density of the reference measure with respect to the axes' Lebesgue measure.
    pub weight: f64,
    offset: usize,
    strides: Vec<usize>,
}

impl ModeGrid {
    pub fn new(mode: usize, dim: usize, axes: Vec<Axis>, fixed: Vec<(usize, f64)>, weight: f64) -> Self {
        assert!(weight > 0.0 && weight.is_finite(), "mode weight must be positive");
        let mut strides = vec![1; axes.len()];
        for k in (0..axes.len().saturating_sub(1)).rev() {
            strides[k] = strides[k + 1] * axes[k + 1].len();
        }
        Self { mode, dim, axes, fixed, weight, offset: 0, strides }
    }

    pub fn n_cells(&self) -> usize {
        self.axes.iter().map(Axis::len).product()
    }

    pub fn offset(&self) -> usize {
        self.offset
    }

    pub fn strides(&self) -> &[usize] {
        &self.strides
    }

    pub fn multi_index(&self, local: usize) -> SmallVec<[usize; 3]> {
        self.strides.iter().zip(&self.axes).map(|(s, a)| (local / s) % a.len()).collect()
    }

    pub fn local_index(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.strides).map(|(i, s)| i * s).sum()
    }

    /// A state in this mode with the given axis coordinates.
    pub fn point(&self, axis_coords: &[f64]) -> StatePoint {
        let mut coords: Coords = SmallVec::from_elem(0.0, self.dim);
        for &(c, v) in &self.fixed {
            coords[c] = v;
        }
        for (a, &x) in self.axes.iter().zip(axis_coords) {
            coords[a.coord] = x;
        }
        StatePoint { coords, mode: self.mode }
    }

    pub fn center(&self, local: usize) -> StatePoint {
        let idx = self.multi_index(local);
        let xs: SmallVec<[f64; 3]> = self.axes.iter().zip(&idx).map(|(a, &i)| a.center(i)).collect();
        self.point(&xs)
    }

    pub fn cell_bounds(&self, local: usize) -> (SmallVec<[f64; 3]>, SmallVec<[f64; 3]>) {
        let idx = self.multi_index(local);
        let lo = self.axes.iter().zip(&idx).map(|(a, &i)| a.edges()[i]).collect();
        let hi = self.axes.iter().zip(&idx).map(|(a, &i)| a.edges()[i + 1]).collect();
        (lo, hi)
    }

    pub fn cell_volume(&self, local: usize) -> f64 {
        let idx = self.multi_index(local);
        self.axes.iter().zip(&idx).map(|(a, &i)| a.width(i)).product::<f64>() * self.weight
    }

    pub fn axis_coords(&self, x: &StatePoint) -> SmallVec<[f64; 3]> {
        self.axes.iter().map(|a| x.coords[a.coord]).collect()
    }

    pub fn contains(&self, x: &StatePoint) -> bool {
        x.mode == self.mode && self.axes.iter().all(|a| a.contains(x.coords[a.coord]))
    }

    pub fn locate(&self, x: &StatePoint) -> Option<usize> {
        if x.mode != self.mode {
            return None;
        }
        let mut local = 0;
        for (a, s) in self.axes.iter().zip(&self.strides) {
            local += a.locate(x.coords[a.coord])? * s;
        }
        Some(local)
    }

    /// Box-restricted multilinear interpolation of mode-local cell values;
    /// zero outside the box.
    pub fn interpolate(&self, values: &[f64], x: &StatePoint) -> f64 {
        if !self.contains(x) {
            return 0.0;
        }
        let axes: SmallVec<[&Axis; 3]> = self.axes.iter().collect();
        let pos = self.axis_coords(x);
        multilinear(&axes, &pos, |i| values[self.offset + i])
    }

    /// Smallest cell width over all axes.
    pub fn min_width(&self) -> f64 {
        self.axes.iter().map(Axis::min_width).fold(f64::INFINITY, f64::min)
    }
}

/// Grid of the interior E⁰ across all modes.
#[derive(Clone, Debug)]
pub struct InteriorGrid {
    modes: Vec<ModeGrid>,
    n_cells: usize,
    weights: Vec<f64>,
}

impl InteriorGrid {
    /// Mode grids must be listed in mode order, one per mode.
    pub fn new(mut modes: Vec<ModeGrid>) -> Self {
        let mut offset = 0;
        for (k, g) in modes.iter_mut().enumerate() {
            assert_eq!(g.mode, k, "mode grids must be listed in mode order");
            g.offset = offset;
            offset += g.n_cells();
        }
        let weights = modes.iter().flat_map(|g| (0..g.n_cells()).map(move |i| g.cell_volume(i))).collect();
        Self { modes, n_cells: offset, weights }
    }

    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    pub fn modes(&self) -> &[ModeGrid] {
        &self.modes
    }

    pub fn mode(&self, m: usize) -> &ModeGrid {
        &self.modes[m]
    }

    /// Reference-measure weight of every cell.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Mode grid and local index of a global cell.
    pub fn split(&self, cell: usize) -> (&ModeGrid, usize) {
        let m = self.modes.partition_point(|g| g.offset <= cell) - 1;
        let g = &self.modes[m];
        (g, cell - g.offset)
    }

    pub fn center(&self, cell: usize) -> StatePoint {
        let (g, i) = self.split(cell);
        g.center(i)
    }

    pub fn centers(&self) -> Vec<StatePoint> {
        (0..self.n_cells).map(|c| self.center(c)).collect()
    }

    pub fn locate(&self, x: &StatePoint) -> Option<usize> {
        let g = self.modes.get(x.mode)?;
        g.locate(x).map(|i| g.offset + i)
    }

    pub fn contains(&self, x: &StatePoint) -> bool {
        self.modes.get(x.mode).is_some_and(|g| g.contains(x))
    }

    /// Interpolated value of a cell field at an arbitrary point.
    pub fn interpolate(&self, values: &[f64], x: &StatePoint) -> f64 {
        self.modes.get(x.mode).map_or(0.0, |g| g.interpolate(values, x))
    }

    pub fn mass(&self, values: &[f64]) -> f64 {
        values.iter().zip(&self.weights).map(|(v, w)| v * w).sum()
    }

    pub fn min_width(&self) -> f64 {
        self.modes.iter().map(ModeGrid::min_width).fold(f64::INFINITY, f64::min)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn locate_and_overlaps() {
        let a = Axis::uniform(0, 0.0, 1.0, 10);
        assert_eq!(a.locate(0.0), Some(0));
        assert_eq!(a.locate(1.0), Some(9));
        assert_eq!(a.locate(0.35), Some(3));
        assert_eq!(a.locate(1.1), None);
        let ov = a.overlaps(0.15, 0.32);
        assert_eq!(ov.len(), 3);
        assert!((ov.iter().map(|p| p.1).sum::<f64>() - 0.17).abs() < 1e-15);
    }

    #[test]
    fn multilinear_reproduces_linear_fields() {
        let ax = Axis::uniform(0, 0.0, 1.0, 4);
        let ay = Axis::uniform(1, 0.0, 2.0, 5);
        let f = |x: f64, y: f64| 1.0 + 2.0 * x - 0.5 * y;
        let vals: Vec<f64> =
            (0..4).flat_map(|i| (0..5).map(move |j| (i, j))).map(|(i, j)| f(ax.center(i), ay.center(j))).collect();
        let v = multilinear(&[&ax, &ay], &[0.41, 1.13], |k| vals[k]);
        assert!((v - f(0.41, 1.13)).abs() < 1e-14);
    }

    #[test]
    fn grid_offsets_and_masses() {
        let g0 = ModeGrid::new(0, 1, vec![Axis::uniform(0, 0.0, 1.0, 4)], vec![], 0.5);
        let g1 = ModeGrid::new(1, 2, vec![Axis::uniform(0, 0.0, 1.0, 2), Axis::uniform(1, 0.0, 1.0, 3)], vec![], 1.0);
        let grid = InteriorGrid::new(vec![g0, g1]);
        assert_eq!(grid.n_cells(), 10);
        assert!((grid.mass(&[1.0; 10]) - 1.5).abs() < 1e-15);
        let c = grid.center(4 + 5);
        assert_eq!(c.mode, 1);
        assert_eq!(grid.locate(&c), Some(9));
    }
}
