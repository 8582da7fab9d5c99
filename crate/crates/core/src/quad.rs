//! Thin wrapper over double-exponential quadrature.

/// Absolute tolerance for one-dimensional integrals of smooth integrands.
pub const QUAD_TOL: f64 = 1e-10;

/// `∫_a^b f`, oriented (negative when `b < a`).
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    if b < a {
        return -integrate(f, b, a);
    }
    quadrature::integrate(f, a, b, QUAD_TOL).integral
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_and_exponential() {
        assert!((integrate(|x| x * x, 0.0, 3.0) - 9.0).abs() < 1e-12);
        assert!((integrate(|x| (-x).exp(), 0.0, 1.0) - (1.0 - (-1.0f64).exp())).abs() < 1e-12);
        assert!((integrate(|x| x, 2.0, 0.0) + 2.0).abs() < 1e-12);
        assert_eq!(integrate(|x| x, 1.0, 1.0), 0.0);
    }
}
