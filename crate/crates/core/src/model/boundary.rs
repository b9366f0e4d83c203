use super::flow::FlowMap;
use super::grid::{multilinear, Axis, InteriorGrid, BOX_TOL};
use super::state::StatePoint;
use smallvec::SmallVec;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    Lo,
    Hi,
}

/// A face of a mode box: the `axis`-th grid axis of `mode` at its low or high end.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Face {
    pub mode: usize,
    pub axis: usize,
    pub side: Side,
}

/// Role of a face.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FaceKind {
    /// Part of Γ⁻: the flow enters here.
    Incoming,
    /// Part of Γ⁺: the flow leaves here and a jump is forced.
    Outgoing,
    /// Grid truncation or chart edge; mass crossing it is lost.
    Open,
}

/// A cell of Γ⁻ or Γ⁺.
#[derive(Clone, Debug)]
pub struct BoundaryCell {
    pub face: usize,
    /// Representative point (face center of the tangent cell).
    pub point: StatePoint,
    /// m± weight of the cell.
    pub weight: f64,
    /// t₊ for Γ⁻ cells, t₋ for Γ⁺ cells.
    pub lifetime: f64,
    /// Tangent extent of the cell in the face's tangent axes.
    pub tangent_lo: SmallVec<[f64; 2]>,
    pub tangent_hi: SmallVec<[f64; 2]>,
    /// The two interior cells nearest the face along its normal, nearest first.
    pub neighbors: Option<[usize; 2]>,
    /// Interior cell adjacent to the face.
    pub adjacent: usize,
}

#[derive(Clone, Debug)]
pub struct FaceInfo {
    pub face: Face,
    pub kind: FaceKind,
    /// Normal coordinate of the face.
    pub position: f64,
    /// Index of the first cell in the Γ⁻ or Γ⁺ list.
    pub first: usize,
    pub count: usize,
    /// Tangent axes (indices into the mode's axes).
    pub tangent: SmallVec<[usize; 2]>,
}

/// Finite cell lists for Γ⁻ and Γ⁺ with their m± weights and lifetimes.
#[derive(Clone, Debug, Default)]
pub struct BoundaryAtlas {
    faces: Vec<FaceInfo>,
    minus: Vec<BoundaryCell>,
    plus: Vec<BoundaryCell>,
}

impl BoundaryAtlas {
    /// Builds the atlas from declared faces. `normal_speed` gives |b·n| at a
    /// face point; the m± weight is tangent measure × mode weight × |b·n|.
    pub fn build(
        grid: &InteriorGrid,
        faces: &[(Face, FaceKind)],
        flow: &dyn FlowMap,
        normal_speed: &dyn Fn(&StatePoint, Face) -> f64,
    ) -> Self {
        let mut atlas = BoundaryAtlas::default();
        for &(face, kind) in faces {
            let mg = grid.mode(face.mode);
            let normal = &mg.axes[face.axis];
            let position = match face.side {
                Side::Lo => normal.lo(),
                Side::Hi => normal.hi(),
            };
            let tangent: SmallVec<[usize; 2]> = (0..mg.axes.len()).filter(|&k| k != face.axis).collect();
            let list = match kind {
                FaceKind::Incoming => &mut atlas.minus,
                FaceKind::Outgoing => &mut atlas.plus,
                FaceKind::Open => {
                    atlas.faces.push(FaceInfo { face, kind, position, first: 0, count: 0, tangent });
                    continue;
                }
            };
            let first = list.len();
            let counts: SmallVec<[usize; 2]> = tangent.iter().map(|&k| mg.axes[k].len()).collect();
            let total: usize = counts.iter().product();
            for t in 0..total {
                // Tangent multi-index, last tangent axis fastest.
                let mut rem = t;
                let mut tidx: SmallVec<[usize; 2]> = SmallVec::from_elem(0, tangent.len());
                for k in (0..tangent.len()).rev() {
                    tidx[k] = rem % counts[k];
                    rem /= counts[k];
                }
                let mut axis_coords: SmallVec<[f64; 3]> = SmallVec::from_elem(0.0, mg.axes.len());
                let mut full_idx: SmallVec<[usize; 3]> = SmallVec::from_elem(0, mg.axes.len());
                let mut measure = mg.weight;
                let mut tangent_lo = SmallVec::new();
                let mut tangent_hi = SmallVec::new();
                for (k, &ax) in tangent.iter().enumerate() {
                    let a = &mg.axes[ax];
                    axis_coords[ax] = a.center(tidx[k]);
                    full_idx[ax] = tidx[k];
                    measure *= a.width(tidx[k]);
                    tangent_lo.push(a.edges()[tidx[k]]);
                    tangent_hi.push(a.edges()[tidx[k] + 1]);
                }
                axis_coords[face.axis] = position;
                let point = mg.point(&axis_coords);
                let weight = measure * normal_speed(&point, face);
                let lifetime = match kind {
                    FaceKind::Incoming => flow.hit_plus(&point),
                    _ => flow.hit_minus(&point),
                };
                let n = normal.len();
                let near = |k: usize| {
                    let mut idx = full_idx.clone();
                    idx[face.axis] = match face.side {
                        Side::Lo => k,
                        Side::Hi => n - 1 - k,
                    };
                    mg.offset() + mg.local_index(&idx)
                };
                let neighbors = (n >= 2).then(|| [near(0), near(1)]);
                list.push(BoundaryCell {
                    face: atlas.faces.len(),
                    point,
                    weight,
                    lifetime,
                    tangent_lo,
                    tangent_hi,
                    neighbors,
                    adjacent: near(0),
                });
            }
            atlas.faces.push(FaceInfo { face, kind, position, first, count: total, tangent });
        }
        atlas
    }

    pub fn faces(&self) -> &[FaceInfo] {
        &self.faces
    }

    /// Γ⁻ cells.
    pub fn minus(&self) -> &[BoundaryCell] {
        &self.minus
    }

    /// Γ⁺ cells.
    pub fn plus(&self) -> &[BoundaryCell] {
        &self.plus
    }

    pub fn minus_weights(&self) -> Vec<f64> {
        self.minus.iter().map(|c| c.weight).collect()
    }

    pub fn plus_weights(&self) -> Vec<f64> {
        self.plus.iter().map(|c| c.weight).collect()
    }

    fn on_face(&self, grid: &InteriorGrid, info: &FaceInfo, x: &StatePoint) -> bool {
        if info.face.mode != x.mode {
            return false;
        }
        let mg = grid.mode(x.mode);
        let a = &mg.axes[info.face.axis];
        let tol = BOX_TOL * (a.hi() - a.lo()).max(info.position.abs()).max(1.0);
        (x.coords[a.coord] - info.position).abs() <= tol
            && info.tangent.iter().all(|&k| mg.axes[k].contains(x.coords[mg.axes[k].coord]))
    }

    fn locate_in(&self, grid: &InteriorGrid, kind: FaceKind, x: &StatePoint) -> Option<(usize, &FaceInfo)> {
        let info = self.faces.iter().find(|f| f.kind == kind && self.on_face(grid, f, x))?;
        let mg = grid.mode(x.mode);
        let mut t = 0;
        for &k in &info.tangent {
            let a = &mg.axes[k];
            t = t * a.len() + a.locate(x.coords[a.coord])?;
        }
        Some((info.first + t, info))
    }

    /// Γ⁻ cell containing `x`.
    pub fn locate_minus(&self, grid: &InteriorGrid, x: &StatePoint) -> Option<usize> {
        self.locate_in(grid, FaceKind::Incoming, x).map(|p| p.0)
    }

    /// Γ⁺ cell containing `x`.
    pub fn locate_plus(&self, grid: &InteriorGrid, x: &StatePoint) -> Option<usize> {
        self.locate_in(grid, FaceKind::Outgoing, x).map(|p| p.0)
    }

    fn interpolate_in(&self, grid: &InteriorGrid, kind: FaceKind, values: &[f64], x: &StatePoint) -> f64 {
        let Some((_, info)) = self.locate_in(grid, kind, x) else { return 0.0 };
        let mg = grid.mode(x.mode);
        let axes: SmallVec<[&Axis; 2]> = info.tangent.iter().map(|&k| &mg.axes[k]).collect();
        let pos: SmallVec<[f64; 2]> = axes.iter().map(|a| x.coords[a.coord]).collect();
        multilinear(&axes, &pos, |i| values[info.first + i])
    }

    /// Interpolated Γ⁻ field at a boundary point; zero off Γ⁻.
    pub fn interpolate_minus(&self, grid: &InteriorGrid, values: &[f64], x: &StatePoint) -> f64 {
        self.interpolate_in(grid, FaceKind::Incoming, values, x)
    }

    /// Interpolated Γ⁺ field at a boundary point; zero off Γ⁺.
    pub fn interpolate_plus(&self, grid: &InteriorGrid, values: &[f64], x: &StatePoint) -> f64 {
        self.interpolate_in(grid, FaceKind::Outgoing, values, x)
    }
}
