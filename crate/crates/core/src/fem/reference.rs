//! Lagrange shape functions on the reference interval and triangle.
//!
//! Local node order: vertices first, then edge midpoints. In 1D the P2
//! midpoint is node 2. On the triangle the P2 midpoints are on edges
//! (0,1), (1,2), (2,0), in that order.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReferenceElement {
    dim: usize,
    degree: usize,
}

impl ReferenceElement {
    pub(crate) fn new(dim: usize, degree: usize) -> Self {
        debug_assert!((1..=2).contains(&dim) && (1..=2).contains(&degree));
        Self { dim, degree }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    /// Number of local basis functions.
    pub fn num_basis(&self) -> usize {
        match self.dim {
            1 => self.degree + 1,
            _ => (self.degree + 1) * (self.degree + 2) / 2,
        }
    }

    /// Reference coordinates of the local nodes.
    pub fn nodes(&self) -> Vec<[f64; 2]> {
        match (self.dim, self.degree) {
            (1, 1) => vec![[0.0, 0.0], [1.0, 0.0]],
            (1, _) => vec![[0.0, 0.0], [1.0, 0.0], [0.5, 0.0]],
            (_, 1) => vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]],
            _ => vec![
                [0.0, 0.0],
                [1.0, 0.0],
                [0.0, 1.0],
                [0.5, 0.0],
                [0.5, 0.5],
                [0.0, 0.5],
            ],
        }
    }

    /// Local nodes given as pairs of vertices whose midpoint they are
    /// (a vertex is the pair `(v, v)`).
    pub(crate) fn node_vertex_pairs(&self) -> Vec<(usize, usize)> {
        match (self.dim, self.degree) {
            (1, 1) => vec![(0, 0), (1, 1)],
            (1, _) => vec![(0, 0), (1, 1), (0, 1)],
            (_, 1) => vec![(0, 0), (1, 1), (2, 2)],
            _ => vec![(0, 0), (1, 1), (2, 2), (0, 1), (1, 2), (2, 0)],
        }
    }

    /// Values of all local basis functions at `p`.
    pub fn eval(&self, p: [f64; 2], out: &mut [f64]) {
        let [x, y] = p;
        match (self.dim, self.degree) {
            (1, 1) => {
                out[0] = 1.0 - x;
                out[1] = x;
            }
            (1, _) => {
                out[0] = (1.0 - x) * (1.0 - 2.0 * x);
                out[1] = x * (2.0 * x - 1.0);
                out[2] = 4.0 * x * (1.0 - x);
            }
            (_, 1) => {
                out[0] = 1.0 - x - y;
                out[1] = x;
                out[2] = y;
            }
            _ => {
                let l = [1.0 - x - y, x, y];
                for i in 0..3 {
                    out[i] = l[i] * (2.0 * l[i] - 1.0);
                }
                out[3] = 4.0 * l[0] * l[1];
                out[4] = 4.0 * l[1] * l[2];
                out[5] = 4.0 * l[2] * l[0];
            }
        }
    }

    /// Reference gradients of all local basis functions at `p`.
    pub fn eval_grad(&self, p: [f64; 2], out: &mut [[f64; 2]]) {
        let [x, y] = p;
        match (self.dim, self.degree) {
            (1, 1) => {
                out[0] = [-1.0, 0.0];
                out[1] = [1.0, 0.0];
            }
            (1, _) => {
                out[0] = [4.0 * x - 3.0, 0.0];
                out[1] = [4.0 * x - 1.0, 0.0];
                out[2] = [4.0 - 8.0 * x, 0.0];
            }
            (_, 1) => {
                out[0] = [-1.0, -1.0];
                out[1] = [1.0, 0.0];
                out[2] = [0.0, 1.0];
            }
            _ => {
                let l = [1.0 - x - y, x, y];
                let dl = [[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]];
                for i in 0..3 {
                    let s = 4.0 * l[i] - 1.0;
                    out[i] = [s * dl[i][0], s * dl[i][1]];
                }
                for (k, (a, b)) in [(0, 1), (1, 2), (2, 0)].into_iter().enumerate() {
                    out[3 + k] = [
                        4.0 * (dl[a][0] * l[b] + l[a] * dl[b][0]),
                        4.0 * (dl[a][1] * l[b] + l[a] * dl[b][1]),
                    ];
                }
            }
        }
    }
}
