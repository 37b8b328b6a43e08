//! Cameron–Martin vectors on a uniform grid of `[0, 1]`.
//!
//! An element `h` is stored through its derivative, a step function that is
//! constant on each cell `[t_{i-1}, t_i)`. The inner product `<h, k>` is the
//! L² inner product of the derivatives, so for step derivatives every
//! quantity here (kernel inner products, point evaluation, refinement) is
//! computed exactly up to floating-point rounding.

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Absolute slack on `s * n_steps` when deciding whether `s` is a knot.
const KNOT_TOLERANCE: f64 = 1e-9;

/// Uniform grid with knots `t_i = i / n_steps`, `i = 0..=n_steps`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Grid {
    n_steps: usize,
}

impl Grid {
    pub fn new(n_steps: usize) -> Result<Self> {
        if n_steps == 0 {
            return Err(Error::EmptyGrid);
        }
        Ok(Self { n_steps })
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.n_steps as f64
    }

    pub fn knot(&self, i: usize) -> f64 {
        i as f64 / self.n_steps as f64
    }

    /// Knots `t_1..t_n` (the origin is excluded).
    pub fn interior_and_end_knots(&self) -> Vec<f64> {
        (1..=self.n_steps).map(|i| self.knot(i)).collect()
    }

    /// Index `i` with `t_i = s`, or `SNotOnGrid`.
    pub fn knot_index(&self, s: f64) -> Result<usize> {
        if !(0.0..=1.0).contains(&s) {
            return Err(Error::TimeOutOfRange(s));
        }
        let scaled = s * self.n_steps as f64;
        let index = scaled.round();
        if (scaled - index).abs() > KNOT_TOLERANCE {
            return Err(Error::SNotOnGrid {
                s,
                n_steps: self.n_steps,
            });
        }
        Ok(index as usize)
    }

    pub fn is_knot(&self, s: f64) -> bool {
        self.knot_index(s).is_ok()
    }

    /// True when every knot of `self` is a knot of `finer`.
    pub fn is_refined_by(&self, finer: &Grid) -> bool {
        finer.n_steps.is_multiple_of(self.n_steps)
    }

    /// Coarsest grid refining both.
    pub fn common_refinement(&self, other: &Grid) -> Grid {
        let g = gcd(self.n_steps, other.n_steps);
        Grid {
            n_steps: self.n_steps / g * other.n_steps,
        }
    }
}

fn gcd(mut a: usize, mut b: usize) -> usize {
    while b != 0 {
        let r = a % b;
        a = b;
        b = r;
    }
    a
}

/// Element of the Cameron–Martin space with a step-function derivative.
#[derive(Debug, Clone, PartialEq)]
pub struct CmVector {
    grid: Grid,
    deriv: Vec<f64>,
}

impl CmVector {
    pub fn new(grid: Grid, deriv: Vec<f64>) -> Result<Self> {
        if deriv.len() != grid.n_steps {
            return Err(Error::LengthMismatch {
                expected: grid.n_steps,
                got: deriv.len(),
            });
        }
        Ok(Self { grid, deriv })
    }

    pub fn zeros(grid: Grid) -> Self {
        Self {
            grid,
            deriv: vec![0.0; grid.n_steps],
        }
    }

    /// Reproducing kernel `K_s = min(s, .)`, whose derivative is `1_[0,s]`.
    pub fn kernel(s: f64, grid: Grid) -> Result<Self> {
        let k = grid.knot_index(s)?;
        let deriv = (0..grid.n_steps)
            .map(|i| if i < k { 1.0 } else { 0.0 })
            .collect();
        Ok(Self { grid, deriv })
    }

    /// Vector whose derivative is the indicator of `[a, b]`; both ends must be knots.
    pub fn indicator(a: f64, b: f64, grid: Grid) -> Result<Self> {
        let lo = grid.knot_index(a)?;
        let hi = grid.knot_index(b)?;
        let deriv = (0..grid.n_steps)
            .map(|i| if i >= lo && i < hi { 1.0 } else { 0.0 })
            .collect();
        Ok(Self { grid, deriv })
    }

    /// Vector with constant derivative `value` (the path `t -> value * t`).
    pub fn constant(value: f64, grid: Grid) -> Self {
        Self {
            grid,
            deriv: vec![value; grid.n_steps],
        }
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn deriv(&self) -> &[f64] {
        &self.deriv
    }

    pub fn into_deriv(self) -> Vec<f64> {
        self.deriv
    }

    fn check_grid(&self, other: &CmVector) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch {
                left: self.grid.n_steps,
                right: other.grid.n_steps,
            });
        }
        Ok(())
    }

    /// `<h, k> = ∫ ḣ k̇`, exact for step derivatives.
    pub fn inner(&self, other: &CmVector) -> Result<f64> {
        self.check_grid(other)?;
        Ok(self.inner_unchecked(other))
    }

    pub(crate) fn inner_unchecked(&self, other: &CmVector) -> f64 {
        let sum: f64 = self
            .deriv
            .iter()
            .zip(&other.deriv)
            .map(|(a, b)| a * b)
            .sum();
        sum / self.grid.n_steps as f64
    }

    /// Inner product after lifting both vectors to their common refinement.
    pub fn inner_refined(&self, other: &CmVector) -> Result<f64> {
        if self.grid == other.grid {
            return Ok(self.inner_unchecked(other));
        }
        let grid = self.grid.common_refinement(&other.grid);
        Ok(self.refine(grid)?.inner_unchecked(&other.refine(grid)?))
    }

    pub fn norm_sq(&self) -> f64 {
        self.inner_unchecked(self)
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    /// `h(s) = ∫_0^s ḣ`, for any `s` in `[0, 1]`.
    pub fn evaluate(&self, s: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&s) {
            return Err(Error::TimeOutOfRange(s));
        }
        let n = self.grid.n_steps;
        if let Ok(k) = self.grid.knot_index(s) {
            let full: f64 = self.deriv[..k].iter().sum();
            return Ok(full / n as f64);
        }
        let k = ((s * n as f64).floor() as usize).min(n - 1);
        let full: f64 = self.deriv[..k].iter().sum();
        Ok(full / n as f64 + self.deriv[k] * (s - self.grid.knot(k)))
    }

    /// `∫_a^b ḣ`.
    pub fn integral(&self, a: f64, b: f64) -> Result<f64> {
        Ok(self.evaluate(b)? - self.evaluate(a)?)
    }

    /// Values `h(t_1), ..., h(t_n)` at the grid knots.
    pub fn knot_values(&self) -> Vec<f64> {
        let n = self.grid.n_steps as f64;
        let mut acc = 0.0;
        self.deriv
            .iter()
            .map(|d| {
                acc += d;
                acc / n
            })
            .collect()
    }

    /// Same function on a finer uniform grid.
    pub fn refine(&self, target: Grid) -> Result<CmVector> {
        if !self.grid.is_refined_by(&target) {
            return Err(Error::NotARefinement {
                source_steps: self.grid.n_steps,
                target: target.n_steps,
            });
        }
        let factor = target.n_steps / self.grid.n_steps;
        let deriv = self
            .deriv
            .iter()
            .flat_map(|&d| std::iter::repeat_n(d, factor))
            .collect();
        Ok(CmVector {
            grid: target,
            deriv,
        })
    }

    pub fn scaled(&self, a: f64) -> CmVector {
        CmVector {
            grid: self.grid,
            deriv: self.deriv.iter().map(|d| a * d).collect(),
        }
    }

    /// `self += a * other`.
    pub fn axpy(&mut self, a: f64, other: &CmVector) -> Result<()> {
        self.check_grid(other)?;
        for (x, y) in self.deriv.iter_mut().zip(&other.deriv) {
            *x += a * y;
        }
        Ok(())
    }

    pub fn add(&self, other: &CmVector) -> Result<CmVector> {
        let mut out = self.clone();
        out.axpy(1.0, other)?;
        Ok(out)
    }

    pub fn sub(&self, other: &CmVector) -> Result<CmVector> {
        let mut out = self.clone();
        out.axpy(-1.0, other)?;
        Ok(out)
    }

    /// `Σ a_k v_k` over vectors sharing one grid.
    pub fn linear_combination(grid: Grid, terms: &[(f64, &CmVector)]) -> Result<CmVector> {
        let mut out = CmVector::zeros(grid);
        for (a, v) in terms {
            out.axpy(*a, v)?;
        }
        Ok(out)
    }

    pub fn max_abs_deviation(&self, other: &CmVector) -> Result<f64> {
        self.check_grid(other)?;
        Ok(self
            .deriv
            .iter()
            .zip(&other.deriv)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }
}

#[derive(Serialize, Deserialize)]
struct CmVectorRepr {
    n_steps: usize,
    deriv: Vec<f64>,
}

impl Serialize for CmVector {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        CmVectorRepr {
            n_steps: self.grid.n_steps,
            deriv: self.deriv.clone(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for CmVector {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let repr = CmVectorRepr::deserialize(deserializer)?;
        let grid = Grid::new(repr.n_steps).map_err(serde::de::Error::custom)?;
        CmVector::new(grid, repr.deriv).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn grid(n: usize) -> Grid {
        Grid::new(n).unwrap()
    }

    #[test]
    fn kernel_vectors() {
        assert_eq!(CmVector::kernel(1.0, grid(4)).unwrap().deriv(), &[1.0; 4]);
        assert_eq!(CmVector::kernel(0.0, grid(4)).unwrap().deriv(), &[0.0; 4]);
        let k = CmVector::kernel(0.5, grid(4)).unwrap();
        assert_eq!(k.deriv(), &[1.0, 1.0, 0.0, 0.0]);
        assert_eq!(k.evaluate(0.25).unwrap(), 0.25);
        assert_eq!(k.evaluate(0.75).unwrap(), 0.5);
    }

    #[test]
    fn kernel_off_grid_is_rejected() {
        assert!(matches!(
            CmVector::kernel(0.3, grid(4)),
            Err(Error::SNotOnGrid { .. })
        ));
        assert!(matches!(
            CmVector::kernel(1.5, grid(4)),
            Err(Error::TimeOutOfRange(_))
        ));
        assert_eq!(Grid::new(0), Err(Error::EmptyGrid));
    }

    #[test]
    fn kernel_inner_products() {
        let g = grid(4);
        let k25 = CmVector::kernel(0.25, g).unwrap();
        let k50 = CmVector::kernel(0.5, g).unwrap();
        let k75 = CmVector::kernel(0.75, g).unwrap();
        assert_eq!(k25.inner(&k75).unwrap(), 0.25);
        assert_eq!(k50.inner(&k50).unwrap(), 0.5);
        assert_eq!(CmVector::constant(1.0, g).norm_sq(), 1.0);
    }

    #[test]
    fn evaluation() {
        let g = grid(4);
        let k = CmVector::kernel(0.5, g).unwrap();
        assert_eq!(k.evaluate(0.75).unwrap(), 0.5);
        assert_eq!(k.evaluate(0.0).unwrap(), 0.0);
        // off-knot evaluation integrates the partial cell
        assert!((k.evaluate(0.375).unwrap() - 0.375).abs() < 1e-15);
        assert!(k.evaluate(-0.1).is_err());
    }

    #[test]
    fn grid_mismatch() {
        let a = CmVector::kernel(0.5, grid(4)).unwrap();
        let b = CmVector::kernel(0.5, grid(8)).unwrap();
        assert_eq!(a.inner(&b), Err(Error::GridMismatch { left: 4, right: 8 }));
        assert_eq!(a.inner_refined(&b).unwrap(), 0.5);
        let c = CmVector::kernel(1.0 / 3.0, grid(6)).unwrap();
        // common refinement of 4 and 6 is 12
        assert!((a.inner_refined(&c).unwrap() - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn refinement() {
        let h = CmVector::new(grid(2), vec![3.0, -1.0]).unwrap();
        assert_eq!(h.refine(grid(4)).unwrap().deriv(), &[3.0, 3.0, -1.0, -1.0]);
        assert!(matches!(
            h.refine(grid(3)),
            Err(Error::NotARefinement { .. })
        ));
        let k = CmVector::kernel(0.5, grid(2)).unwrap();
        assert_eq!(
            k.refine(grid(8)).unwrap(),
            CmVector::kernel(0.5, grid(8)).unwrap()
        );
    }

    #[test]
    fn gram_of_kernels_is_min() {
        let g = grid(16);
        let times = [0.125, 0.25, 0.5, 0.8125, 1.0];
        let ks: Vec<_> = times
            .iter()
            .map(|&s| CmVector::kernel(s, g).unwrap())
            .collect();
        for (i, a) in ks.iter().enumerate() {
            for (j, b) in ks.iter().enumerate() {
                assert_eq!(a.inner(b).unwrap(), times[i].min(times[j]));
            }
        }
    }

    #[test]
    fn json_shape() {
        let h = CmVector::new(grid(2), vec![1.0, 0.5]).unwrap();
        let text = serde_json::to_string(&h).unwrap();
        assert_eq!(text, r#"{"n_steps":2,"deriv":[1.0,0.5]}"#);
        let back: CmVector = serde_json::from_str(&text).unwrap();
        assert_eq!(back, h);
        assert!(serde_json::from_str::<CmVector>(r#"{"n_steps":3,"deriv":[1.0]}"#).is_err());
    }

    fn vector_on(n: usize) -> impl Strategy<Value = CmVector> {
        proptest::collection::vec(-5.0f64..5.0, n)
            .prop_map(move |d| CmVector::new(Grid::new(n).unwrap(), d).unwrap())
    }

    proptest! {
        #[test]
        fn reproducing_property(h in vector_on(16), k in 0usize..=16) {
            let g = h.grid();
            let s = g.knot(k);
            let kernel = CmVector::kernel(s, g).unwrap();
            prop_assert_eq!(kernel.inner(&h).unwrap(), h.evaluate(s).unwrap());
        }

        #[test]
        fn sup_norm_bound(h in vector_on(32)) {
            let norm = h.norm();
            for v in h.knot_values() {
                prop_assert!(v.abs() <= norm * (1.0 + 1e-12) + 1e-15);
            }
        }

        #[test]
        fn symmetric_bilinear_positive(h in vector_on(8), k in vector_on(8), a in -3.0f64..3.0) {
            let hk = h.inner(&k).unwrap();
            prop_assert!((hk - k.inner(&h).unwrap()).abs() <= 1e-12 * (1.0 + hk.abs()));
            let mut lin = h.scaled(a);
            lin.axpy(1.0, &k).unwrap();
            let lhs = lin.inner(&k).unwrap();
            let rhs = a * hk + k.norm_sq();
            prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs() + rhs.abs()));
            prop_assert!(h.norm_sq() >= 0.0);
            if h.norm_sq() == 0.0 {
                prop_assert!(h.deriv().iter().all(|&d| d == 0.0));
            }
        }

        #[test]
        fn refinement_preserves_inner(h in vector_on(4), k in vector_on(4), factor in 1usize..6) {
            let target = Grid::new(4 * factor).unwrap();
            let before = h.inner(&k).unwrap();
            let after = h.refine(target).unwrap().inner(&k.refine(target).unwrap()).unwrap();
            prop_assert!((before - after).abs() <= 1e-12 * (1.0 + before.abs()));
        }
    }
}
