//! The square domain `(0, L)^2`, its collocation grid and Dirichlet eigenpairs.
//!
//! Eigenfunctions are `w_{m,n}(x, y) = (2/L) sin(m pi x / L) sin(n pi y / L)` with
//! eigenvalues `lambda_{m,n} = (m^2 + n^2)(pi/L)^2`, for `m, n = 1..N-1`. The grid
//! nodes are the interior points `x_i = i L / N`, `i = 1..N-1`, of the type-I sine
//! transform, so sampling and projection round-trip exactly.

use std::f64::consts::PI;
use std::sync::Arc;

use ndarray::Array2;

use crate::error::{Error, Result};

/// Default corner mask radius as a fraction of the side length.
pub const DEFAULT_CORNER_FRACTION: f64 = 0.05;

#[derive(Debug, Clone)]
pub struct Geometry {
    n: usize,
    side: f64,
    corner_radius: f64,
    eigenvalues: Array2<f64>,
    sqrt_eigenvalues: Array2<f64>,
    ground_state: Array2<f64>,
    distance: Array2<f64>,
    mask: Array2<bool>,
    equivalence: Option<(f64, f64)>,
}

impl Geometry {
    /// Builds the square geometry with `n` grid intervals per axis.
    pub fn square(n: usize, side: f64, corner_radius: f64) -> Result<Arc<Geometry>> {
        let mut problems = Vec::new();
        if n < 8 {
            problems.push(format!("N >= 8 required, got {n}"));
        }
        if !(side > 0.0 && side.is_finite()) {
            problems.push(format!("side_length must be positive, got {side}"));
        }
        if !(corner_radius >= 0.0 && corner_radius < side / 4.0) {
            problems.push(format!(
                "corner_radius must lie in [0, side_length/4), got {corner_radius}"
            ));
        }
        if !problems.is_empty() {
            return Err(Error::Config(problems.join("; ")));
        }

        let modes = n - 1;
        let k2 = (PI / side).powi(2);
        let eigenvalues =
            Array2::from_shape_fn((modes, modes), |(a, b)| (((a + 1).pow(2) + (b + 1).pow(2)) as f64) * k2);
        let sqrt_eigenvalues = eigenvalues.mapv(f64::sqrt);

        let h = side / n as f64;
        // sin(pi i / N) folded so the table is exactly mirror symmetric.
        let sines: Vec<f64> = (1..n)
            .map(|i| (PI * i.min(n - i) as f64 / n as f64).sin())
            .collect();
        let amp = 2.0 / side;
        let ground_state = Array2::from_shape_fn((modes, modes), |(a, b)| amp * sines[a] * sines[b]);
        let distance = Array2::from_shape_fn((modes, modes), |(a, b)| {
            let (i, j) = (a + 1, b + 1);
            i.min(n - i).min(j).min(n - j) as f64 * h
        });
        let mask = Array2::from_shape_fn((modes, modes), |(a, b)| {
            corner_distance((a + 1) as f64 * h, (b + 1) as f64 * h, side) < corner_radius
        });

        let mut geom = Geometry {
            n,
            side,
            corner_radius,
            eigenvalues,
            sqrt_eigenvalues,
            ground_state,
            distance,
            mask,
            equivalence: None,
        };
        geom.equivalence = geom.fit_ground_state_equivalence().ok();
        Ok(Arc::new(geom))
    }

    /// Square with the default corner radius `0.05 L`.
    pub fn with_default_mask(n: usize, side: f64) -> Result<Arc<Geometry>> {
        Self::square(n, side, DEFAULT_CORNER_FRACTION * side)
    }

    /// Number of grid intervals per axis.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of retained sine modes (and interior nodes) per axis, `N - 1`.
    pub fn modes(&self) -> usize {
        self.n - 1
    }

    pub fn side(&self) -> f64 {
        self.side
    }

    pub fn corner_radius(&self) -> f64 {
        self.corner_radius
    }

    /// Grid spacing `L / N`.
    pub fn spacing(&self) -> f64 {
        self.side / self.n as f64
    }

    /// `pi / L`, the fundamental wavenumber of the sine basis.
    pub fn wavenumber(&self) -> f64 {
        PI / self.side
    }

    pub fn area(&self) -> f64 {
        self.side * self.side
    }

    /// Coordinate of grid node `i` (`0..=N`, boundary included).
    pub fn coord(&self, i: usize) -> f64 {
        i as f64 * self.spacing()
    }

    /// Interior node position for interior indices `(a, b)` (0-based, node `a + 1`).
    pub fn node(&self, a: usize, b: usize) -> [f64; 2] {
        [self.coord(a + 1), self.coord(b + 1)]
    }

    /// `lambda_{m,n}`, indexed by `[m - 1, n - 1]`.
    pub fn eigenvalues(&self) -> &Array2<f64> {
        &self.eigenvalues
    }

    /// `sqrt(lambda_{m,n})`.
    pub fn sqrt_eigenvalues(&self) -> &Array2<f64> {
        &self.sqrt_eigenvalues
    }

    pub fn eigenvalue(&self, m: usize, n: usize) -> f64 {
        ((m * m + n * n) as f64) * self.wavenumber().powi(2)
    }

    /// `lambda_1 = 2 (pi/L)^2`.
    pub fn lambda1(&self) -> f64 {
        self.eigenvalue(1, 1)
    }

    /// Ground state `w_1` at interior nodes.
    pub fn ground_state(&self) -> &Array2<f64> {
        &self.ground_state
    }

    /// Distance to the boundary at interior nodes.
    pub fn distance(&self) -> &Array2<f64> {
        &self.distance
    }

    /// Corner mask at interior nodes; `true` means excluded.
    pub fn corner_mask(&self) -> &Array2<bool> {
        &self.mask
    }

    /// Evaluates the eigenfunction `w_{m,n}` at an arbitrary point.
    pub fn eigenfunction(&self, m: usize, n: usize, x: [f64; 2]) -> f64 {
        let k = self.wavenumber();
        2.0 / self.side * (m as f64 * k * x[0]).sin() * (n as f64 * k * x[1]).sin()
    }

    pub fn ground_state_at(&self, x: [f64; 2]) -> f64 {
        self.eigenfunction(1, 1, x)
    }

    /// Distance from an arbitrary point to the nearest side.
    pub fn distance_at(&self, x: [f64; 2]) -> f64 {
        x[0].min(x[1]).min(self.side - x[0]).min(self.side - x[1])
    }

    pub fn is_masked_at(&self, x: [f64; 2]) -> bool {
        corner_distance(x[0], x[1], self.side) < self.corner_radius
    }

    pub fn contains(&self, x: [f64; 2]) -> bool {
        x[0] > 0.0 && x[1] > 0.0 && x[0] < self.side && x[1] < self.side
    }

    /// Stored `(c0, C0)` with `c0 d <= w_1 <= C0 d` off the corner mask, if fittable.
    pub fn equivalence_constants(&self) -> Option<(f64, f64)> {
        self.equivalence
    }

    /// Min and max of `w_1 / d` over unmasked interior nodes.
    pub fn fit_ground_state_equivalence(&self) -> Result<(f64, f64)> {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        let mut count = 0usize;
        for ((w, d), masked) in self
            .ground_state
            .iter()
            .zip(self.distance.iter())
            .zip(self.mask.iter())
        {
            if *masked {
                continue;
            }
            let r = w / d;
            lo = lo.min(r);
            hi = hi.max(r);
            count += 1;
        }
        if count == 0 {
            return Err(Error::Config("corner mask excludes every interior node".into()));
        }
        Ok((lo, hi))
    }

    /// True if `other` shares grid size and side length.
    pub fn same_grid(&self, other: &Geometry) -> bool {
        self.n == other.n && self.side == other.side
    }

    /// A geometry on the same square refined by an integer factor.
    pub fn refined(&self, factor: usize) -> Result<Arc<Geometry>> {
        if factor == 0 {
            return Err(Error::Config("refinement factor must be >= 1".into()));
        }
        Geometry::square(self.n * factor, self.side, self.corner_radius)
    }
}

fn corner_distance(x: f64, y: f64, side: f64) -> f64 {
    let dx = x.min(side - x);
    let dy = y.min(side - y);
    dx.hypot(dy)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_form_ground_state() {
        let g = Geometry::square(8, PI, 0.0).unwrap();
        assert!((g.lambda1() - 2.0).abs() < 1e-14);
        assert!((g.eigenvalues()[[0, 0]] - 2.0).abs() < 1e-14);
        // node 4 is x = pi/2
        let w = g.ground_state()[[3, 3]];
        assert!((w - 2.0 / PI).abs() < 1e-15);
        assert!((g.distance()[[3, 3]] - PI / 2.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_sizes() {
        assert!(matches!(Geometry::square(4, PI, 0.0), Err(Error::Config(_))));
        assert!(Geometry::square(16, -1.0, 0.0).is_err());
        assert!(Geometry::square(16, PI, PI / 4.0).is_err());
    }

    #[test]
    fn corner_degeneracy_of_ratio() {
        let g = Geometry::square(64, PI, 0.2).unwrap();
        let h = g.spacing();
        // node (1,1): w1 ~ (2/pi) h^2, d = h
        let ratio = g.ground_state()[[0, 0]] / g.distance()[[0, 0]];
        assert!((ratio / ((2.0 / PI) * h) - 1.0).abs() < 1e-3);
        assert!(g.corner_mask()[[0, 0]]);
        let ratio_2 = {
            let g2 = Geometry::square(128, PI, 0.2).unwrap();
            g2.ground_state()[[0, 0]] / g2.distance()[[0, 0]]
        };
        assert!(ratio_2 < 0.55 * ratio);
    }

    #[test]
    fn equivalence_constants_bracket_side_limit() {
        let g = Geometry::square(64, PI, 0.3).unwrap();
        let (c0, cmax) = g.fit_ground_state_equivalence().unwrap();
        assert!(c0 > 0.0 && c0 <= 2.0 / PI);
        // sup of w1/d is the side-midpoint limit 2/pi, reached only as d -> 0;
        // on the grid it is (2/pi) sin(h)/h.
        let h = g.spacing();
        assert!((cmax - 2.0 / PI * h.sin() / h).abs() < 1e-12);
        assert_eq!(g.equivalence_constants(), Some((c0, cmax)));
    }

    #[test]
    fn equivalence_refinement_is_stable() {
        // the minimum sits on the sampled mask circle, so compare the two finest grids
        let c = |n| Geometry::square(n, PI, 0.3).unwrap().fit_ground_state_equivalence().unwrap().0;
        let (c128, c256) = (c(128), c(256));
        assert!(((c256 - c128) / c128).abs() < 0.05, "{c128} vs {c256}");
    }

    #[test]
    fn unmasked_corners_degenerate() {
        let c = |n| Geometry::square(n, PI, 0.0).unwrap().fit_ground_state_equivalence().unwrap().0;
        let (a, b, d) = (c(16), c(64), c(256));
        assert!(a > b && b > d);
        assert!(d < 0.01);
    }

    #[test]
    fn distance_is_dihedral_symmetric() {
        let g = Geometry::square(33, 2.0, 0.1).unwrap();
        let d = g.distance();
        let m = g.modes();
        for a in 0..m {
            for b in 0..m {
                let v = d[[a, b]];
                assert_eq!(v, d[[b, a]]);
                assert_eq!(v, d[[m - 1 - a, b]]);
                assert_eq!(v, d[[a, m - 1 - b]]);
                assert_eq!(g.ground_state()[[a, b]], g.ground_state()[[m - 1 - b, a]]);
            }
        }
    }

    #[test]
    fn mask_keeps_most_nodes_at_default_radius() {
        let g = Geometry::with_default_mask(128, PI).unwrap();
        let masked = g.corner_mask().iter().filter(|m| **m).count();
        let total = g.modes() * g.modes();
        assert!((masked as f64) < 0.01 * total as f64);
    }
}
