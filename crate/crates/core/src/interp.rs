//! Cubic splines on uniform grids.

/// End condition of a cubic spline.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum EndCondition {
    Natural,
    /// Prescribed first derivative.
    Clamped(f64),
    /// Continuous third derivative across the first interior node.
    NotAKnot,
}

/// Interpolating cubic spline through `(x0 + i h, y_i)`.
#[derive(Clone, Debug)]
pub struct UniformSpline {
    x0: f64,
    h: f64,
    y: Vec<f64>,
    m: Vec<f64>,
}

impl UniformSpline {
    /// Panics if fewer than two nodes (four with [`EndCondition::NotAKnot`])
    /// or a non-positive step are given.
    pub fn new(x0: f64, h: f64, y: Vec<f64>, left: EndCondition, right: EndCondition) -> Self {
        let n = y.len();
        assert!(n >= 2 && h > 0.0, "spline needs two nodes and a positive step");
        let not_a_knot = |c: EndCondition| c == EndCondition::NotAKnot;
        assert!(n >= 4 || !(not_a_knot(left) || not_a_knot(right)), "not-a-knot needs four nodes");
        // tridiagonal system for second derivatives m_i
        let mut sub = vec![0.0; n];
        let mut diag = vec![0.0; n];
        let mut sup = vec![0.0; n];
        let mut rhs = vec![0.0; n];
        let inv = 6.0 / (h * h);
        for i in 1..n - 1 {
            sub[i] = 1.0;
            diag[i] = 4.0;
            sup[i] = 1.0;
            rhs[i] = inv * (y[i + 1] - 2.0 * y[i] + y[i - 1]);
        }
        // not-a-knot: m_0 = 2 m_1 - m_2 folds the first interior row to 6 m_1 = rhs_1
        match left {
            EndCondition::Natural => {
                diag[0] = 1.0;
            }
            EndCondition::NotAKnot => {
                diag[0] = 1.0;
                sub[1] = 0.0;
                diag[1] = 6.0;
                sup[1] = 0.0;
            }
            EndCondition::Clamped(d) => {
                diag[0] = 2.0;
                sup[0] = 1.0;
                rhs[0] = 6.0 / h * ((y[1] - y[0]) / h - d);
            }
        }
        match right {
            EndCondition::Natural => {
                diag[n - 1] = 1.0;
            }
            EndCondition::NotAKnot => {
                diag[n - 1] = 1.0;
                sub[n - 2] = 0.0;
                diag[n - 2] = 6.0;
                sup[n - 2] = 0.0;
            }
            EndCondition::Clamped(d) => {
                sub[n - 1] = 1.0;
                diag[n - 1] = 2.0;
                rhs[n - 1] = 6.0 / h * (d - (y[n - 1] - y[n - 2]) / h);
            }
        }
        for i in 1..n {
            let w = sub[i] / diag[i - 1];
            diag[i] -= w * sup[i - 1];
            rhs[i] -= w * rhs[i - 1];
        }
        let mut m = vec![0.0; n];
        m[n - 1] = rhs[n - 1] / diag[n - 1];
        for i in (0..n - 1).rev() {
            m[i] = (rhs[i] - sup[i] * m[i + 1]) / diag[i];
        }
        if not_a_knot(left) {
            m[0] = 2.0 * m[1] - m[2];
        }
        if not_a_knot(right) {
            m[n - 1] = 2.0 * m[n - 2] - m[n - 3];
        }
        Self { x0, h, y, m }
    }

    pub fn x_min(&self) -> f64 {
        self.x0
    }

    pub fn x_max(&self) -> f64 {
        self.x0 + self.h * (self.y.len() - 1) as f64
    }

    pub fn nodes(&self) -> &[f64] {
        &self.y
    }

    #[inline]
    fn locate(&self, x: f64) -> (usize, f64) {
        let u = ((x - self.x0) / self.h).max(0.0);
        let i = (u as usize).min(self.y.len() - 2);
        (i, u - i as f64)
    }

    /// Value at `x`; the end cubics are extended outside the grid.
    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        let (i, u) = self.locate(x);
        let v = 1.0 - u;
        let h2 = self.h * self.h / 6.0;
        v * self.y[i] + u * self.y[i + 1] + h2 * ((v * v * v - v) * self.m[i] + (u * u * u - u) * self.m[i + 1])
    }

    /// First derivative at `x`.
    pub fn derivative(&self, x: f64) -> f64 {
        let (i, u) = self.locate(x);
        let v = 1.0 - u;
        (self.y[i + 1] - self.y[i]) / self.h + self.h / 6.0 * ((1.0 - 3.0 * v * v) * self.m[i] + (3.0 * u * u - 1.0) * self.m[i + 1])
    }
}
