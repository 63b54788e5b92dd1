/// C² cutoff `T_m`: identity on `[0, m−1]`, constant `m` on `[m+1, ∞)`.
///
/// With `T_m(m−1) = m−1`, `T′ ≤ 1` and `T′(m) = 0` the plateau cannot start
/// at `m`, so the bridge spans `(m−1, m+1)`. On it, with `s = σ − (m−1)` and
/// `x = s/2`, `T_m = m − 1 + s − 2x³ + x⁴`, giving
/// `T′ = (1−x)²(1+2x) ∈ [0, 1]` and `T″ = −3x(1−x) ∈ [−3/4, 0]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncationFn {
    m: f64,
}

impl TruncationFn {
    /// Requires `m ≥ 1` so that the bridge stays in `[0, ∞)`.
    pub fn new(m: f64) -> Option<Self> {
        (m.is_finite() && m >= 1.0).then_some(Self { m })
    }

    pub fn level(&self) -> f64 {
        self.m
    }

    fn bridge_coord(&self, sigma: f64) -> Option<f64> {
        let s = sigma - (self.m - 1.0);
        (s > 0.0 && s < 2.0).then_some(s)
    }

    pub fn value(&self, sigma: f64) -> f64 {
        if sigma <= self.m - 1.0 {
            return sigma;
        }
        match self.bridge_coord(sigma) {
            Some(s) => {
                let x = 0.5 * s;
                self.m - 1.0 + s - 2.0 * x * x * x + x * x * x * x
            }
            None => self.m,
        }
    }

    pub fn derivative(&self, sigma: f64) -> f64 {
        if sigma <= self.m - 1.0 {
            return 1.0;
        }
        match self.bridge_coord(sigma) {
            Some(s) => {
                let x = 0.5 * s;
                (1.0 - x) * (1.0 - x) * (1.0 + 2.0 * x)
            }
            None => 0.0,
        }
    }

    pub fn second_derivative(&self, sigma: f64) -> f64 {
        match self.bridge_coord(sigma) {
            Some(s) => {
                let x = 0.5 * s;
                -3.0 * x * (1.0 - x)
            }
            None => 0.0,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pieces() {
        let t = TruncationFn::new(5.0).unwrap();
        assert_eq!(t.value(3.0), 3.0);
        assert_eq!(t.value(7.0), 5.0);
        assert_eq!(t.value(6.0), 5.0);
        let v = t.value(4.5);
        assert!(v > 4.0 && v < 5.0);
        assert!((v - 4.472_656_25).abs() < 1e-15);
        assert!(TruncationFn::new(0.5).is_none());
    }

    #[test]
    fn derivative_bounds_by_dense_sampling() {
        for m in [1.0, 2.5, 5.0, 40.0] {
            let t = TruncationFn::new(m).unwrap();
            let top = m + 3.0;
            let steps = 200_000;
            let mut prev = t.value(0.0);
            for k in 1..=steps {
                let s = top * k as f64 / steps as f64;
                let (d1, d2) = (t.derivative(s), t.second_derivative(s));
                assert!((0.0..=1.0).contains(&d1), "T'({s}) = {d1}");
                assert!((-1.0..=0.0).contains(&d2), "T''({s}) = {d2}");
                let v = t.value(s);
                assert!(v >= prev - 1e-15 && v <= m);
                prev = v;
            }
        }
    }

    #[test]
    fn knots_are_c2() {
        let t = TruncationFn::new(5.0).unwrap();
        let h = 1e-7;
        for knot in [4.0, 6.0] {
            for f in [
                |t: &TruncationFn, s: f64| t.value(s),
                |t: &TruncationFn, s: f64| t.derivative(s),
                |t: &TruncationFn, s: f64| t.second_derivative(s),
            ] {
                assert!((f(&t, knot - h) - f(&t, knot + h)).abs() < 1e-6);
            }
            assert!((t.second_derivative(knot - h) - t.second_derivative(knot + h)).abs() <= 1e-6);
        }
        // Finite differences of the value reproduce the derivatives on the bridge.
        for &s in &[4.2, 4.9, 5.5, 5.95] {
            let fd1 = (t.value(s + 1e-6) - t.value(s - 1e-6)) / 2e-6;
            let fd2 = (t.derivative(s + 1e-6) - t.derivative(s - 1e-6)) / 2e-6;
            assert!((fd1 - t.derivative(s)).abs() < 1e-8);
            assert!((fd2 - t.second_derivative(s)).abs() < 1e-8);
        }
    }
}
