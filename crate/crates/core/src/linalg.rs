use serde::{Deserialize, Serialize};

/// Row-major 2×2 matrix.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Mat2(pub [[f64; 2]; 2]);

impl Mat2 {
    pub const IDENTITY: Mat2 = Mat2([[1.0, 0.0], [0.0, 1.0]]);

    pub fn det(&self) -> f64 {
        let m = &self.0;
        m[0][0] * m[1][1] - m[0][1] * m[1][0]
    }

    pub fn trace(&self) -> f64 {
        self.0[0][0] + self.0[1][1]
    }

    pub fn mul_vec(&self, v: [f64; 2]) -> [f64; 2] {
        let m = &self.0;
        [
            m[0][0] * v[0] + m[0][1] * v[1],
            m[1][0] * v[0] + m[1][1] * v[1],
        ]
    }

    pub fn sub_identity(&self) -> Mat2 {
        let m = &self.0;
        Mat2([[m[0][0] - 1.0, m[0][1]], [m[1][0], m[1][1] - 1.0]])
    }

    /// Solves `self · x = b`; `None` when singular.
    pub fn solve(&self, b: [f64; 2]) -> Option<[f64; 2]> {
        let d = self.det();
        let m = &self.0;
        let scale = m.iter().flatten().fold(0.0f64, |a, v| a.max(v.abs()));
        if d.abs() <= 1e-300 || d.abs() <= f64::EPSILON * scale * scale {
            return None;
        }
        Some([
            (m[1][1] * b[0] - m[0][1] * b[1]) / d,
            (m[0][0] * b[1] - m[1][0] * b[0]) / d,
        ])
    }

    /// Real eigenpairs ordered by decreasing modulus, with unit eigenvectors.
    /// `None` when the eigenvalues are complex.
    pub fn real_eigen(&self) -> Option<[(f64, [f64; 2]); 2]> {
        let tr = self.trace();
        let det = self.det();
        let disc = tr * tr / 4.0 - det;
        if disc < 0.0 {
            return None;
        }
        let sq = disc.sqrt();
        // Stable root pairing: compute the larger-modulus root first.
        let l1 = tr / 2.0 + tr.signum() * sq;
        let l1 = if tr == 0.0 { sq } else { l1 };
        let l2 = if l1 != 0.0 { det / l1 } else { tr / 2.0 - sq };
        let (big, small) = if l1.abs() >= l2.abs() {
            (l1, l2)
        } else {
            (l2, l1)
        };
        Some([
            (big, self.eigenvector(big)),
            (small, self.eigenvector(small)),
        ])
    }

    fn eigenvector(&self, lambda: f64) -> [f64; 2] {
        let m = &self.0;
        // Rows of (M − λI); pick the better-conditioned one.
        let r0 = [m[0][0] - lambda, m[0][1]];
        let r1 = [m[1][0], m[1][1] - lambda];
        let n0 = r0[0].hypot(r0[1]);
        let n1 = r1[0].hypot(r1[1]);
        let v = if n0 == 0.0 && n1 == 0.0 {
            [1.0, 0.0]
        } else if n0 >= n1 {
            [-r0[1], r0[0]]
        } else {
            [-r1[1], r1[0]]
        };
        normalize_oriented(v)
    }
}

/// Unit vector with a canonical sign: positive `x` component, or positive `y`
/// when `x` vanishes.
pub fn normalize_oriented(v: [f64; 2]) -> [f64; 2] {
    let n = v[0].hypot(v[1]);
    let mut u = [v[0] / n, v[1] / n];
    if u[0] < -1e-14 || (u[0].abs() <= 1e-14 && u[1] < 0.0) {
        u = [-u[0], -u[1]];
    }
    u
}
