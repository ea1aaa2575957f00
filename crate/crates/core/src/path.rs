use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::TimeGrid;

/// A sampled trajectory on a time grid, with its absorption time and state if
/// absorption happened within the horizon.
///
/// States are stored row-major: `values[k * dim .. (k + 1) * dim]` is the state
/// at `grid.times()[k]`. Once absorbed at index `k`, every later state equals
/// the absorption state.
#[derive(Debug, Clone, PartialEq)]
pub struct AbsorbedPath {
    grid: Arc<TimeGrid<f64>>,
    dim: usize,
    values: Vec<f64>,
    absorption_index: Option<usize>,
}

impl AbsorbedPath {
    /// Assembles a path. If `absorption_index` is set, the state there is taken
    /// as the absorption state and copied forward.
    pub fn from_parts(
        grid: Arc<TimeGrid<f64>>,
        dim: usize,
        mut values: Vec<f64>,
        absorption_index: Option<usize>,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::arg("state dimension must be positive"));
        }
        if values.len() != grid.len() * dim {
            return Err(Error::arg(format!(
                "path has {} values, expected {} x {}",
                values.len(),
                grid.len(),
                dim
            )));
        }
        if let Some(k) = absorption_index {
            if k >= grid.len() {
                return Err(Error::arg("absorption index outside the grid"));
            }
            let (head, tail) = values.split_at_mut((k + 1) * dim);
            let state = &head[k * dim..];
            for chunk in tail.chunks_exact_mut(dim) {
                chunk.copy_from_slice(state);
            }
        }
        Ok(Self {
            grid,
            dim,
            values,
            absorption_index,
        })
    }

    pub fn grid(&self) -> &TimeGrid<f64> {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    pub fn state(&self, k: usize) -> &[f64] {
        &self.values[k * self.dim..(k + 1) * self.dim]
    }

    /// First coordinate of the state at index `k`.
    pub fn scalar(&self, k: usize) -> f64 {
        self.values[k * self.dim]
    }

    pub fn last_state(&self) -> &[f64] {
        self.state(self.len() - 1)
    }

    pub fn states(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.dim)
    }

    pub fn absorption_index(&self) -> Option<usize> {
        self.absorption_index
    }

    pub fn absorption_time(&self) -> Option<f64> {
        self.absorption_index.map(|k| self.grid.times()[k])
    }

    pub fn absorption_state(&self) -> Option<&[f64]> {
        self.absorption_index.map(|k| self.state(k))
    }

    /// Whether absorption occurred at or before grid index `k`.
    pub fn absorbed_by(&self, k: usize) -> bool {
        self.absorption_index.is_some_and(|a| a <= k)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;

    #[test]
    fn absorption_state_is_copied_forward() {
        let g = Arc::new(make_grid(1.0, 4).unwrap());
        let p = AbsorbedPath::from_parts(g, 1, vec![1.0, 0.5, 0.0, 9.0, 9.0], Some(2)).unwrap();
        assert_eq!(p.scalar(3), 0.0);
        assert_eq!(p.scalar(4), 0.0);
        assert_eq!(p.absorption_time(), Some(0.5));
        assert!(p.absorbed_by(2) && !p.absorbed_by(1));
    }

    #[test]
    fn shape_is_checked() {
        let g = Arc::new(make_grid(1.0, 2).unwrap());
        assert!(AbsorbedPath::from_parts(g.clone(), 2, vec![0.0; 5], None).is_err());
        assert!(AbsorbedPath::from_parts(g, 1, vec![0.0; 3], Some(3)).is_err());
    }
}
