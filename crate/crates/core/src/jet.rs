//! Third-order jets and their composition.

use crate::numerics::Real;

/// Value and the first three derivatives of a function at a point.
///
/// `order` records whether derivatives are meaningful; value-only jets
/// (`order == 0`) skip all derivative arithmetic when composed.
#[derive(Clone, Debug, PartialEq)]
pub struct Jet<T> {
    pub v: T,
    pub d1: T,
    pub d2: T,
    pub d3: T,
    pub order: u8,
}

impl<T: Real> Jet<T> {
    /// Jet of the identity at `x`.
    pub fn variable(x: T) -> Self {
        Jet::new(x, T::one(), T::zero(), T::zero())
    }

    pub fn value_only(x: T) -> Self {
        Jet {
            v: x,
            d1: T::zero(),
            d2: T::zero(),
            d3: T::zero(),
            order: 0,
        }
    }

    pub fn new(v: T, d1: T, d2: T, d3: T) -> Self {
        Jet {
            v,
            d1,
            d2,
            d3,
            order: 3,
        }
    }

    /// Jet of a constant function.
    pub fn constant(v: T) -> Self {
        Jet::new(v, T::zero(), T::zero(), T::zero())
    }

    /// `f ∘ self`, where `local = [f, f', f'', f''']` evaluated at `self.v`.
    ///
    /// `(f∘g)'' = f''(g)g'^2 + f'(g)g''` and
    /// `(f∘g)''' = f'''(g)g'^3 + 3f''(g)g'g'' + f'(g)g'''`.
    pub fn compose_with(&self, local: [T; 4]) -> Self {
        let [f0, f1, f2, f3] = local;
        if self.order == 0 {
            return Jet::value_only(f0);
        }
        let g1 = &self.d1;
        let g2 = &self.d2;
        let g3 = &self.d3;
        let g1sq = g1.clone() * g1.clone();
        let d1 = f1.clone() * g1.clone();
        let d2 = f2.clone() * g1sq.clone() + f1.clone() * g2.clone();
        let d3 = f3 * g1sq * g1.clone()
            + f2.int(3) * f2 * g1.clone() * g2.clone()
            + f1 * g3.clone();
        Jet::new(f0, d1, d2, d3)
    }

    /// `a * self + b` for scalars `a`, `b`.
    pub fn affine(&self, a: &T, b: &T) -> Self {
        if self.order == 0 {
            return Jet::value_only(a.clone() * self.v.clone() + b.clone());
        }
        Jet::new(
            a.clone() * self.v.clone() + b.clone(),
            a.clone() * self.d1.clone(),
            a.clone() * self.d2.clone(),
            a.clone() * self.d3.clone(),
        )
    }

    /// `self / d`, dividing every component (exact when `d` divides exactly).
    pub fn div_scalar(&self, d: &T) -> Self {
        Jet {
            v: self.v.clone() / d.clone(),
            d1: self.d1.clone() / d.clone(),
            d2: self.d2.clone() / d.clone(),
            d3: self.d3.clone() / d.clone(),
            order: self.order,
        }
    }

    pub fn shift(&self, b: &T) -> Self {
        let mut out = self.clone();
        out.v = out.v + b.clone();
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn composition_matches_closed_form() {
        // sin(x^2) at x = 0.7
        let x = 0.7f64;
        let g = Jet::new(x * x, 2.0 * x, 2.0, 0.0);
        let s = x * x;
        let out = g.compose_with([s.sin(), s.cos(), -s.sin(), -s.cos()]);
        let d1 = 2.0 * x * s.cos();
        let d2 = 2.0 * s.cos() - 4.0 * x * x * s.sin();
        let d3 = -12.0 * x * s.sin() - 8.0 * x * x * x * s.cos();
        assert!((out.d1 - d1).abs() < 1e-14);
        assert!((out.d2 - d2).abs() < 1e-13);
        assert!((out.d3 - d3).abs() < 1e-13);
    }

    #[test]
    fn value_only_skips_derivatives() {
        let j = Jet::value_only(0.3f64).compose_with([1.0, 2.0, 3.0, 4.0]);
        assert_eq!(j.order, 0);
        assert_eq!(j.v, 1.0);
    }
}
