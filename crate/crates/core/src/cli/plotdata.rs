//! Figure data: energy contours, pseudo-potentials and the periodicity
//! bound, all in rescaled variables.

use crate::conservative::{periodicity_bound, profile_1d, profile_rel_emp, v1d, PotentialProfile};
use crate::invariants::energy_1d;
use crate::Result;

use super::output::Table;

pub const FIG1_X_RANGE: f64 = 3.0;
pub const FIG1_NX: usize = 121;
pub const FIG1_NV: usize = 99;
/// Points per branch of a level curve.
pub const LEVEL_POINTS: usize = 201;
pub const DEFAULT_LEVELS: [f64; 6] = [1.0, 1.0001, 1.001, 1.5, 2.0, 3.0];
pub const PROFILE_POINTS: usize = 401;
pub const FIG4_POINTS: usize = 201;

/// `H_1D` on `[-3, 3]` x `(-1, 1)`. The velocity grid stays off `|v| = 1`.
pub fn fig1_grid(nx: usize, nv: usize) -> Result<Table> {
    let mut t = Table::new(&["x", "v", "H"]);
    for i in 0..nx {
        let x = FIG1_X_RANGE * (-1.0 + 2.0 * i as f64 / (nx - 1).max(1) as f64);
        for k in 0..nv {
            let v = -1.0 + 2.0 * (k + 1) as f64 / (nv + 1) as f64;
            t.push(vec![x, v, energy_1d(x, v)?]);
        }
    }
    Ok(t)
}

/// Closed level curve `H_1D = h` through `v = +-sqrt(-2 V_1D(x))`, upper
/// branch left to right then lower branch back. `h = 1` is the single
/// point at the origin.
pub fn fig1_level(h: f64, points: usize) -> Result<Vec<(f64, f64)>> {
    let a = crate::conservative::amplitude_1d(h)?;
    if a == 0.0 {
        return Ok(vec![(0.0, 0.0)]);
    }
    let m = points.max(2);
    let xs: Vec<f64> = (0..m)
        .map(|i| a * (-1.0 + 2.0 * i as f64 / (m - 1) as f64))
        .collect();
    let speed = |x: f64| -> Result<f64> {
        // clamp the rounding at the return points
        Ok((-2.0 * v1d(x, h)?).max(0.0).sqrt())
    };
    let mut pts = Vec::with_capacity(2 * m);
    for &x in &xs {
        pts.push((x, speed(x)?));
    }
    for &x in xs.iter().rev().skip(1).take(m - 2) {
        pts.push((x, -speed(x)?));
    }
    Ok(pts)
}

pub fn fig1_levels(levels: &[f64], points: usize) -> Result<Table> {
    let mut t = Table::new(&["H", "x", "v"]);
    for &h in levels {
        for (x, v) in fig1_level(h, points)? {
            t.push(vec![h, x, v]);
        }
    }
    Ok(t)
}

/// `V_1D` curves, one per energy.
pub fn fig2(levels: &[f64], points: usize) -> Result<Table> {
    let mut t = Table::new(&["H", "x", "V"]);
    for &h in levels {
        let p = profile_1d(h, points)?;
        for (x, v) in p.coordinate.iter().zip(&p.potential) {
            t.push(vec![h, *x, *v]);
        }
    }
    Ok(t)
}

/// `V(rho)` at energy `h` and angular momentum `j`.
pub fn fig3(h: f64, j: f64, points: usize) -> Result<(Table, PotentialProfile)> {
    let p = profile_rel_emp(h, j, points)?;
    Ok((profile_table(&p, "rho"), p))
}

pub fn profile_table(p: &PotentialProfile, coordinate: &str) -> Table {
    let mut t = Table::new(&[coordinate, "V"]);
    for (x, v) in p.coordinate.iter().zip(&p.potential) {
        t.push(vec![*x, *v]);
    }
    t
}

/// `F(H)` on `[1, h_max]`; the last row is exactly `h_max`.
pub fn fig4(h_max: f64, points: usize) -> Result<Table> {
    if !(h_max >= 1.0 && h_max.is_finite()) {
        return Err(crate::Error::InvalidParameter(format!(
            "H_max must be >= 1, got {h_max}"
        )));
    }
    let m = points.max(2);
    let mut t = Table::new(&["H", "F"]);
    for i in 0..m {
        let h = if i == m - 1 {
            h_max
        } else {
            1.0 + (h_max - 1.0) * i as f64 / (m - 1) as f64
        };
        t.push(vec![h, periodicity_bound(h)]);
    }
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fig4_ends_at_h_max() {
        let t = fig4(3.0, 11).unwrap();
        let last = t.rows.last().unwrap();
        assert_eq!(last[0], 3.0);
        assert!((last[1] - 6.15840).abs() < 1e-5);
        assert_eq!(t.rows[0], vec![1.0, 0.0]);
        assert!(fig4(0.5, 11).is_err());
    }

    #[test]
    fn fig2_has_zero_at_origin() {
        let t = fig2(&[1.0], 101).unwrap();
        assert!(t.rows.iter().any(|r| r[1] == 0.0 && r[2] == 0.0));
    }

    #[test]
    fn level_curves() {
        assert_eq!(fig1_level(1.0, 50).unwrap(), vec![(0.0, 0.0)]);
        let pts = fig1_level(1.5, 51).unwrap();
        assert_eq!(pts.len(), 100);
        for (x, v) in pts {
            assert!((energy_1d(x, v).unwrap() - 1.5).abs() < 1e-12);
        }
        assert!(fig1_level(0.9, 10).is_err());
    }

    #[test]
    fn grid_is_open_in_velocity() {
        let t = fig1_grid(5, 9).unwrap();
        assert_eq!(t.rows.len(), 45);
        assert!(t.rows.iter().all(|r| r[1].abs() < 1.0 && r[2] >= 1.0));
    }
}
