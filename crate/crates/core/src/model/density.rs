use super::boundary::BoundaryAtlas;
use super::grid::InteriorGrid;
use super::state::StatePoint;
use crate::error::{Error, Result};

/// Piecewise-constant density on the interior grid (values per unit of m).
#[derive(Clone, Debug, PartialEq)]
pub struct GridDensity {
    values: Vec<f64>,
    total_mass: f64,
}

impl GridDensity {
    pub fn new(grid: &InteriorGrid, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), grid.n_cells(), "one value per interior cell");
        let total_mass = grid.mass(&values);
        Self { values, total_mass }
    }

    pub fn zeros(grid: &InteriorGrid) -> Self {
        Self { values: vec![0.0; grid.n_cells()], total_mass: 0.0 }
    }

    /// Samples `f` at cell centers.
    pub fn from_fn(grid: &InteriorGrid, f: impl Fn(&StatePoint) -> f64) -> Self {
        let values = (0..grid.n_cells()).map(|c| f(&grid.center(c))).collect();
        Self::new(grid, values)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn total_mass(&self) -> f64 {
        self.total_mass
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self { values: self.values.iter().map(|v| v * c).collect(), total_mass: self.total_mass * c }
    }

    /// Rescales to unit mass.
    pub fn normalized(&self) -> Result<Self> {
        if !(self.total_mass > 0.0) || !self.total_mass.is_finite() {
            return Err(Error::ZeroMass("density cannot be normalized"));
        }
        Ok(self.scaled(1.0 / self.total_mass))
    }

    pub fn l1_distance(&self, other: &GridDensity, grid: &InteriorGrid) -> f64 {
        self.values.iter().zip(&other.values).zip(grid.weights()).map(|((a, b), w)| (a - b).abs() * w).sum()
    }
}

/// Density on the Γ⁻ cells (values per unit of m⁻).
#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryDensity {
    values: Vec<f64>,
    total_mass: f64,
}

impl BoundaryDensity {
    pub fn new(atlas: &BoundaryAtlas, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), atlas.minus().len(), "one value per incoming boundary cell");
        let total_mass = values.iter().zip(atlas.minus()).map(|(v, c)| v * c.weight).sum();
        Self { values, total_mass }
    }

    pub fn zeros(atlas: &BoundaryAtlas) -> Self {
        Self { values: vec![0.0; atlas.minus().len()], total_mass: 0.0 }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn total_mass(&self) -> f64 {
        self.total_mass
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self { values: self.values.iter().map(|v| v * c).collect(), total_mass: self.total_mass * c }
    }

    pub fn l1_distance(&self, other: &BoundaryDensity, atlas: &BoundaryAtlas) -> f64 {
        self.values.iter().zip(&other.values).zip(atlas.minus()).map(|((a, b), c)| (a - b).abs() * c.weight).sum()
    }
}

/// Element of L¹(E, m) × L¹(Γ⁻, m⁻).
#[derive(Clone, Debug, PartialEq)]
pub struct DensityPair {
    pub interior: GridDensity,
    pub boundary: BoundaryDensity,
}

impl DensityPair {
    pub fn new(interior: GridDensity, boundary: BoundaryDensity) -> Self {
        Self { interior, boundary }
    }

    pub fn norm(&self) -> f64 {
        self.interior.total_mass() + self.boundary.total_mass()
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self { interior: self.interior.scaled(c), boundary: self.boundary.scaled(c) }
    }

    pub fn normalized(&self) -> Result<Self> {
        let n = self.norm();
        if !(n > 0.0) || !n.is_finite() {
            return Err(Error::ZeroMass("pair cannot be normalized"));
        }
        Ok(self.scaled(1.0 / n))
    }

    pub fn l1_distance(&self, other: &DensityPair, grid: &InteriorGrid, atlas: &BoundaryAtlas) -> f64 {
        self.interior.l1_distance(&other.interior, grid) + self.boundary.l1_distance(&other.boundary, atlas)
    }
}
