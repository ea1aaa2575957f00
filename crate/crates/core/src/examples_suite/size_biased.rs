use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::mc::{MCEstimate, McPlan};
use crate::sde::{simulate_besq, BesqDimension};

use super::anchored;

/// `n` independent BESQ⁰ processes, all started from `z`, observed on `t_grid`.
#[derive(Debug, Clone, PartialEq)]
pub struct SizeBiasedConfig {
    n: usize,
    z: f64,
    t_grid: TimeGrid<f64>,
}

impl SizeBiasedConfig {
    pub fn new(n: usize, z: f64, t_grid: TimeGrid<f64>) -> Result<Self> {
        if n < 2 {
            return Err(Error::arg(format!("need at least two coordinates, got {n}")));
        }
        if !(z > 0.0) || !z.is_finite() {
            return Err(Error::arg(format!("start must be positive, got {z}")));
        }
        Ok(Self { n, z, t_grid })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn z(&self) -> f64 {
        self.z
    }

    pub fn t_grid(&self) -> &TimeGrid<f64> {
        &self.t_grid
    }
}

/// Mean share `E[Z_t(i) / ζ_t]` of coordinate `i` under independent BESQ⁰ laws.
///
/// Once every coordinate has been absorbed the share is frozen at its value on
/// the last grid time where the total was positive.
pub fn coordinate_share(cfg: &SizeBiasedConfig, coordinate: usize, plan: &McPlan) -> Result<Vec<(f64, MCEstimate)>> {
    if coordinate >= cfg.n {
        return Err(Error::arg(format!(
            "coordinate {coordinate} out of range for {} processes",
            cfg.n
        )));
    }
    let (grid, idx) = anchored(&cfg.t_grid)?;
    let est = plan.estimate(idx.len(), |src, row| {
        let paths = (0..cfg.n)
            .map(|_| simulate_besq(BesqDimension::Zero, cfg.z, &grid, src))
            .collect::<Result<Vec<_>>>()?;
        let mut share = 1.0 / cfg.n as f64;
        let mut next = 0;
        for k in 0..grid.len() {
            let total: f64 = paths.iter().map(|p| p.scalar(k)).sum();
            if total > 0.0 {
                share = paths[coordinate].scalar(k) / total;
            }
            if next < idx.len() && idx[next] == k {
                row[next] = share;
                next += 1;
            }
        }
        Ok(())
    })?;
    Ok(cfg.t_grid.times().iter().copied().zip(est).collect())
}

/// `E[Z_t(1) / ζ_t]` across the grid; a martingale started at `1/n`.
pub fn ratio_martingale_check(cfg: &SizeBiasedConfig, plan: &McPlan) -> Result<Vec<(f64, MCEstimate)>> {
    coordinate_share(cfg, 0, plan)
}

/// Expectations of the four functionals at one grid time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SizeBiasedRow {
    pub t: f64,
    /// `ζ² / Z(1)`
    pub total_sq_over_first: MCEstimate,
    /// `Z(2) ζ / Z(1)`
    pub second_times_total_over_first: MCEstimate,
    /// `(ζ / Z(1)) ∏_{i≥2} Z(i)`
    pub product_times_total_over_first: MCEstimate,
    /// `ζ ∏_{i≥2} Z(i)`, a true martingale.
    pub total_times_product: MCEstimate,
}

/// Expectations under the size-biased law `P`, whose density against the
/// independent BESQ⁰ law `Q` is `h = n Z(1) / ζ`.
///
/// Each functional `F` is estimated as `E^Q[h_t F_t]` from `Q`-paths. On
/// `{Z(1)_t > 0}` the products simplify (for example `h N = n ζ`); when
/// `Z(1)_t = 0` either `h` vanishes or every coordinate is absorbed, and all
/// four functionals are zero in the limit.
pub fn size_biased_expectations(cfg: &SizeBiasedConfig, plan: &McPlan) -> Result<Vec<SizeBiasedRow>> {
    let (grid, idx) = anchored(&cfg.t_grid)?;
    let grid: Arc<TimeGrid<f64>> = grid;
    let nf = cfg.n as f64;
    let width = 4 * idx.len();
    let est = plan.estimate(width, |src, row| {
        let paths = (0..cfg.n)
            .map(|_| simulate_besq(BesqDimension::Zero, cfg.z, &grid, src))
            .collect::<Result<Vec<_>>>()?;
        for (slot, &k) in row.chunks_exact_mut(4).zip(&idx) {
            let z1 = paths[0].scalar(k);
            if z1 <= 0.0 {
                slot.fill(0.0);
                continue;
            }
            let others: Vec<f64> = paths[1..].iter().map(|p| p.scalar(k)).collect();
            let total = z1 + others.iter().sum::<f64>();
            let prod: f64 = others.iter().product();
            slot[0] = nf * total;
            slot[1] = nf * others[0];
            slot[2] = nf * prod;
            slot[3] = nf * z1 * prod;
        }
        Ok(())
    })?;
    Ok(cfg
        .t_grid
        .times()
        .iter()
        .zip(est.chunks_exact(4))
        .map(|(&t, e)| SizeBiasedRow {
            t,
            total_sq_over_first: e[0],
            second_times_total_over_first: e[1],
            product_times_total_over_first: e[2],
            total_times_product: e[3],
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(n: usize) -> SizeBiasedConfig {
        SizeBiasedConfig::new(n, 1.0, TimeGrid::from_times(vec![0.0, 0.5, 1.0]).unwrap()).unwrap()
    }

    #[test]
    fn config_validation() {
        let g = TimeGrid::from_times(vec![0.0, 1.0]).unwrap();
        assert!(SizeBiasedConfig::new(1, 1.0, g.clone()).is_err());
        assert!(SizeBiasedConfig::new(2, 0.0, g).is_err());
    }

    #[test]
    fn share_at_time_zero_is_exact() {
        let r = ratio_martingale_check(&cfg(3), &McPlan::new(50, 1)).unwrap();
        assert!((r[0].1.mean - 1.0 / 3.0).abs() < 1e-15);
        assert!(r[0].1.stderr < 1e-15);
    }

    #[test]
    fn size_biased_values_at_time_zero() {
        let rows = size_biased_expectations(&cfg(2), &McPlan::new(20, 1)).unwrap();
        let r = &rows[0];
        assert_eq!(r.total_sq_over_first.mean, 4.0);
        assert_eq!(r.second_times_total_over_first.mean, 2.0);
        assert_eq!(r.product_times_total_over_first.mean, 2.0);
        assert_eq!(r.total_times_product.mean, 2.0);
    }

    #[test]
    fn shares_sum_to_one_per_path() {
        let c = cfg(3);
        let plan = McPlan::new(400, 9);
        let shares: Vec<_> = (0..3).map(|i| coordinate_share(&c, i, &plan).unwrap()).collect();
        for k in 0..3 {
            let s: f64 = shares.iter().map(|v| v[k].1.mean).sum();
            assert!((s - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn grid_without_zero_is_anchored() {
        let c = SizeBiasedConfig::new(2, 1.0, TimeGrid::from_times(vec![0.5, 1.0]).unwrap()).unwrap();
        let r = ratio_martingale_check(&c, &McPlan::new(100, 2)).unwrap();
        assert_eq!(r.len(), 2);
        assert_eq!(r[0].0, 0.5);
    }
}
