use nalgebra::DMatrix;

const TOL: f64 = 1e-15;
const MAX_SWEEPS: usize = 80;

/// Right singular vectors and singular values, sorted by decreasing value.
#[derive(Debug, Clone)]
pub(crate) struct RightSvd {
    pub v: DMatrix<f64>,
    pub sigma: Vec<f64>,
}

/// One-sided (Hestenes) Jacobi on the columns of `a`.
///
/// Returns `a` with orthogonalized columns (`u_j * sigma_j`) and the
/// accumulated rotation.
fn hestenes(mut a: DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let (m, n) = a.shape();
    let mut v = DMatrix::<f64>::identity(n, n);
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for i in 0..n {
            for j in i + 1..n {
                let (alpha, beta, gamma) = {
                    let ci = a.column(i);
                    let cj = a.column(j);
                    (ci.norm_squared(), cj.norm_squared(), ci.dot(&cj))
                };
                if gamma == 0.0 || gamma.abs() <= TOL * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate(a.as_mut_slice(), m, i, j, c, s);
                rotate(v.as_mut_slice(), n, i, j, c, s);
            }
        }
        if !rotated {
            break;
        }
    }
    (a, v)
}

fn rotate(data: &mut [f64], len: usize, i: usize, j: usize, c: f64, s: f64) {
    let (left, right) = data.split_at_mut(j * len);
    let ci = &mut left[i * len..(i + 1) * len];
    let cj = &mut right[..len];
    for (x, y) in ci.iter_mut().zip(cj.iter_mut()) {
        let (xi, yj) = (*x, *y);
        *x = c * xi - s * yj;
        *y = s * xi + c * yj;
    }
}

pub(crate) fn right_svd(x: &DMatrix<f64>) -> RightSvd {
    let (m, n) = x.shape();
    let (vectors, sigma) = if m >= n {
        let (u, v) = hestenes(x.clone());
        let sigma: Vec<f64> = u.column_iter().map(|c| c.norm()).collect();
        (v, sigma)
    } else {
        // the orthogonalized columns of xᵀ are sigma_j v_j
        let (u, _) = hestenes(x.transpose());
        let sigma: Vec<f64> = u.column_iter().map(|c| c.norm()).collect();
        let mut v = u;
        for (j, mut col) in v.column_iter_mut().enumerate() {
            if sigma[j] > 0.0 {
                col /= sigma[j];
            }
        }
        (v, sigma)
    };
    let mut order: Vec<usize> = (0..sigma.len()).collect();
    order.sort_by(|&a, &b| sigma[b].total_cmp(&sigma[a]));
    RightSvd {
        v: vectors.select_columns(&order),
        sigma: order.iter().map(|&j| sigma[j]).collect(),
    }
}
