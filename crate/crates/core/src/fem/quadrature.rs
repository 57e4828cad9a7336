//! Gauss rules on the reference interval `[0, 1]` and the reference triangle
//! `{(x, y) : x, y >= 0, x + y <= 1}`.

/// Quadrature points and weights on a reference cell.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    dim: usize,
    points: Vec<[f64; 2]>,
    weights: Vec<f64>,
    exactness: usize,
}

/// What a rule is used for; decides its polynomial exactness.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QuadraturePurpose {
    /// Exact for degree `3k`: products of a degree-k coefficient with two basis functions.
    Assembly,
    /// Exact for degree `2k + 4`: initial data, loads and error norms.
    Error,
}

impl QuadraturePurpose {
    pub fn exactness(self, degree: usize) -> usize {
        match self {
            QuadraturePurpose::Assembly => 3 * degree,
            QuadraturePurpose::Error => 2 * degree + 4,
        }
    }
}

impl QuadratureRule {
    /// Gauss–Legendre rule on `[0, 1]` exact for polynomials of degree `exactness`.
    pub fn interval(exactness: usize) -> Self {
        let n = exactness / 2 + 1;
        let (x, w) = gauss_legendre(n);
        Self {
            dim: 1,
            points: x.iter().map(|&p| [p, 0.0]).collect(),
            weights: w,
            exactness: 2 * n - 1,
        }
    }

    /// Collapsed (Duffy) Gauss rule on the reference triangle.
    ///
    /// Maps `(u, v)` in the unit square to `(u, v (1 - u))`; the Jacobian
    /// `1 - u` raises the degree in `u` by one.
    pub fn triangle(exactness: usize) -> Self {
        let nu = (exactness + 2).div_ceil(2);
        let nv = (exactness + 1).div_ceil(2);
        let (xu, wu) = gauss_legendre(nu);
        let (xv, wv) = gauss_legendre(nv);
        let mut points = Vec::with_capacity(nu * nv);
        let mut weights = Vec::with_capacity(nu * nv);
        for (&u, &wi) in xu.iter().zip(&wu) {
            for (&v, &wj) in xv.iter().zip(&wv) {
                points.push([u, v * (1.0 - u)]);
                weights.push(wi * wj * (1.0 - u));
            }
        }
        Self {
            dim: 2,
            points,
            weights,
            exactness: (2 * nu - 2).min(2 * nv - 1),
        }
    }

    pub fn for_cell(dim: usize, exactness: usize) -> Self {
        match dim {
            1 => Self::interval(exactness),
            _ => Self::triangle(exactness),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn points(&self) -> &[[f64; 2]] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Highest total polynomial degree integrated exactly.
    pub fn exactness(&self) -> usize {
        self.exactness
    }
}

/// Gauss–Legendre nodes and weights mapped to `[0, 1]`, by Newton iteration on `P_n`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        // x is the i-th largest root on [-1, 1]
        nodes[i] = 0.5 * (1.0 - x);
        nodes[n - 1 - i] = 0.5 * (1.0 + x);
        weights[i] = 0.5 * w;
        weights[n - 1 - i] = 0.5 * w;
    }
    (nodes, weights)
}

/// `(P_n(x), P_n'(x))` by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn factorial(n: usize) -> f64 {
        (1..=n).map(|k| k as f64).product()
    }

    #[test]
    fn interval_monomials() {
        for exactness in 1..=12 {
            let rule = QuadratureRule::interval(exactness);
            assert!(rule.exactness() >= exactness);
            for p in 0..=rule.exactness() {
                let q: f64 = rule.points().iter().zip(rule.weights()).map(|(x, w)| w * x[0].powi(p as i32)).sum();
                assert!((q - 1.0 / (p as f64 + 1.0)).abs() < 1e-14, "p={p} exactness={exactness}");
            }
            let sum: f64 = rule.weights().iter().sum();
            assert!((sum - 1.0).abs() < 1e-14);
            assert!(rule.weights().iter().all(|&w| w > 0.0));
        }
    }

    #[test]
    fn triangle_monomials() {
        for exactness in 1..=10 {
            let rule = QuadratureRule::triangle(exactness);
            assert!(rule.exactness() >= exactness);
            for a in 0..=rule.exactness() {
                for b in 0..=rule.exactness() - a {
                    let q: f64 = rule
                        .points()
                        .iter()
                        .zip(rule.weights())
                        .map(|(x, w)| w * x[0].powi(a as i32) * x[1].powi(b as i32))
                        .sum();
                    let exact = factorial(a) * factorial(b) / factorial(a + b + 2);
                    assert!((q - exact).abs() < 1e-14, "x^{a} y^{b}");
                }
            }
            let sum: f64 = rule.weights().iter().sum();
            assert!((sum - 0.5).abs() < 1e-14);
            assert!(rule.weights().iter().all(|&w| w > 0.0));
        }
    }

    #[test]
    fn default_exactness() {
        assert!(QuadratureRule::interval(QuadraturePurpose::Assembly.exactness(1)).exactness() >= 3);
        assert_eq!(QuadratureRule::interval(QuadraturePurpose::Assembly.exactness(1)).len(), 2);
        assert!(QuadratureRule::interval(QuadraturePurpose::Assembly.exactness(2)).exactness() >= 6);
        assert_eq!(QuadratureRule::interval(QuadraturePurpose::Assembly.exactness(2)).len(), 4);
        assert!(QuadratureRule::triangle(QuadraturePurpose::Error.exactness(2)).exactness() >= 8);
    }
}
