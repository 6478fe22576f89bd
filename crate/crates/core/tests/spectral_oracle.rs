//! Spectral-radius cross-check: the repeated-squaring computation used by
//! feature extraction against an independent dense eigensolver
//! (Hessenberg reduction + Francis double-shift QR), implemented here as
//! a test-only oracle.

use safegate_core::linalg::{norm2, spectral_radius, Matrix};
use safegate_core::rng::RngStream;

/// All eigenvalue moduli via the real Schur form.
fn qr_eigen_moduli(a: &Matrix) -> Vec<f64> {
    let n = a.rows;
    assert_eq!(n, a.cols);
    let mut h = a.clone();

    // Householder reduction to upper Hessenberg.
    for k in 0..n.saturating_sub(2) {
        let x: Vec<f64> = (k + 1..n).map(|i| h.at(i, k)).collect();
        let xn = norm2(&x);
        if xn == 0.0 {
            continue;
        }
        let alpha = if x[0] >= 0.0 { -xn } else { xn };
        let mut v = x;
        v[0] -= alpha;
        let vn = norm2(&v);
        if vn == 0.0 {
            continue;
        }
        for vi in &mut v {
            *vi /= vn;
        }
        for j in 0..n {
            let mut s = 0.0;
            for (idx, i) in (k + 1..n).enumerate() {
                s += v[idx] * h.at(i, j);
            }
            for (idx, i) in (k + 1..n).enumerate() {
                *h.at_mut(i, j) -= 2.0 * v[idx] * s;
            }
        }
        for i in 0..n {
            let mut s = 0.0;
            for (idx, j) in (k + 1..n).enumerate() {
                s += v[idx] * h.at(i, j);
            }
            for (idx, j) in (k + 1..n).enumerate() {
                *h.at_mut(i, j) -= 2.0 * v[idx] * s;
            }
        }
    }

    // Francis double-shift QR with deflation from the bottom.
    let mut moduli = Vec::new();
    let mut hi = n;
    let mut guard = 0usize;
    while hi > 0 {
        guard += 1;
        assert!(guard < 100_000, "QR iteration did not converge");

        let mut lo = hi - 1;
        while lo > 0 {
            let sub = h.at(lo, lo - 1).abs();
            let scale = (h.at(lo, lo).abs() + h.at(lo - 1, lo - 1).abs()).max(1e-300);
            if sub <= 1e-13 * scale {
                *h.at_mut(lo, lo - 1) = 0.0;
                break;
            }
            lo -= 1;
        }
        if lo == hi - 1 {
            moduli.push(h.at(lo, lo).abs());
            hi -= 1;
            continue;
        }
        if lo == hi - 2 {
            let (a_, b_, c_, d_) = (
                h.at(lo, lo),
                h.at(lo, lo + 1),
                h.at(lo + 1, lo),
                h.at(lo + 1, lo + 1),
            );
            let tr = a_ + d_;
            let det = a_ * d_ - b_ * c_;
            let disc = tr * tr / 4.0 - det;
            if disc >= 0.0 {
                let s = disc.sqrt();
                moduli.push((tr / 2.0 + s).abs());
                moduli.push((tr / 2.0 - s).abs());
            } else {
                moduli.push(det.abs().sqrt());
                moduli.push(det.abs().sqrt());
            }
            hi -= 2;
            continue;
        }

        // Implicit double shift from the trailing 2x2 of the active block.
        let m_end = hi - 1;
        let s = h.at(m_end - 1, m_end - 1) + h.at(m_end, m_end);
        let d = h.at(m_end - 1, m_end - 1) * h.at(m_end, m_end)
            - h.at(m_end - 1, m_end) * h.at(m_end, m_end - 1);
        let mut x = h.at(lo, lo) * h.at(lo, lo) + h.at(lo, lo + 1) * h.at(lo + 1, lo)
            - s * h.at(lo, lo)
            + d;
        let mut y = h.at(lo + 1, lo) * (h.at(lo, lo) + h.at(lo + 1, lo + 1) - s);
        let mut z = h.at(lo + 2, lo + 1) * h.at(lo + 1, lo);

        for k in lo..hi - 2 {
            let col = [x, y, z];
            let cn = (col[0] * col[0] + col[1] * col[1] + col[2] * col[2]).sqrt();
            if cn > 0.0 {
                let alpha = if col[0] >= 0.0 { -cn } else { cn };
                let mut v = [col[0] - alpha, col[1], col[2]];
                let vn = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
                if vn > 0.0 {
                    for vi in &mut v {
                        *vi /= vn;
                    }
                    let rows: Vec<usize> = (k..(k + 3).min(n)).collect();
                    for j in 0..n {
                        let mut sd = 0.0;
                        for (idx, &i) in rows.iter().enumerate() {
                            sd += v[idx] * h.at(i, j);
                        }
                        for (idx, &i) in rows.iter().enumerate() {
                            *h.at_mut(i, j) -= 2.0 * v[idx] * sd;
                        }
                    }
                    for i in 0..n {
                        let mut sd = 0.0;
                        for (idx, &j) in rows.iter().enumerate() {
                            sd += v[idx] * h.at(i, j);
                        }
                        for (idx, &j) in rows.iter().enumerate() {
                            *h.at_mut(i, j) -= 2.0 * v[idx] * sd;
                        }
                    }
                }
            }
            x = h.at(k + 1, k);
            y = h.at(k + 2, k);
            z = if k + 3 < hi { h.at(k + 3, k) } else { 0.0 };
        }

        // Final 2-vector reflection at the block bottom.
        let k = hi - 2;
        let cn = (x * x + y * y).sqrt();
        if cn > 0.0 {
            let alpha = if x >= 0.0 { -cn } else { cn };
            let v = [x - alpha, y];
            let vn = (v[0] * v[0] + v[1] * v[1]).sqrt();
            if vn > 0.0 {
                let v = [v[0] / vn, v[1] / vn];
                for j in 0..n {
                    let sd = v[0] * h.at(k, j) + v[1] * h.at(k + 1, j);
                    *h.at_mut(k, j) -= 2.0 * v[0] * sd;
                    *h.at_mut(k + 1, j) -= 2.0 * v[1] * sd;
                }
                for i in 0..n {
                    let sd = v[0] * h.at(i, k) + v[1] * h.at(i, k + 1);
                    *h.at_mut(i, k) -= 2.0 * v[0] * sd;
                    *h.at_mut(i, k + 1) -= 2.0 * v[1] * sd;
                }
            }
        }
    }
    moduli
}

fn qr_spectral_radius(a: &Matrix) -> f64 {
    qr_eigen_moduli(a).into_iter().fold(0.0, f64::max)
}

#[test]
fn qr_oracle_sanity() {
    let d = Matrix::from_vec(3, 3, vec![0.8, 0.0, 0.0, 0.0, -0.3, 0.0, 0.0, 0.0, 0.1]).unwrap();
    assert!((qr_spectral_radius(&d) - 0.8).abs() < 1e-10);

    let theta: f64 = 1.1;
    let rot = Matrix::from_vec(
        2,
        2,
        vec![
            0.7 * theta.cos(),
            -0.7 * theta.sin(),
            0.7 * theta.sin(),
            0.7 * theta.cos(),
        ],
    )
    .unwrap();
    assert!((qr_spectral_radius(&rot) - 0.7).abs() < 1e-10);

    // Triangular: eigenvalues on the diagonal.
    let t = Matrix::from_vec(3, 3, vec![0.5, 2.0, -1.0, 0.0, -1.2, 3.0, 0.0, 0.0, 0.9]).unwrap();
    assert!((qr_spectral_radius(&t) - 1.2).abs() < 1e-10);
}

#[test]
fn squaring_matches_dense_eigensolver() {
    let rng = RngStream::new(42);
    for case in 0..200u64 {
        let mut child = rng.child_indexed("spectral-case", case);
        let scale = [0.05, 0.2, 1.0, 3.0][case as usize % 4];
        let m = Matrix::from_vec(12, 12, child.normal_vec(144, scale)).unwrap();
        let fast = spectral_radius(&m, 60, 1e-14);
        let oracle = qr_spectral_radius(&m);
        assert!(
            (fast - oracle).abs() <= 1e-6 * oracle.max(1.0),
            "case {case}: squaring {fast} vs QR {oracle}"
        );
    }
}

#[test]
fn squaring_matches_oracle_on_recurrent_inits() {
    use safegate_core::oracle::random_candidate;
    use safegate_core::params::LtcArchitecture;
    let rng = RngStream::new(7);
    for case in 0..50u64 {
        let mut child = rng.child_indexed("wrec", case);
        let theta = random_candidate(LtcArchitecture::new(4, 12, 2).unwrap(), &mut child);
        let w_rec = theta.unpack().w_rec;
        let fast = spectral_radius(&w_rec, 60, 1e-14);
        let oracle = qr_spectral_radius(&w_rec);
        assert!(
            (fast - oracle).abs() <= 1e-6 * oracle.max(1.0),
            "case {case}: {fast} vs {oracle}"
        );
    }
}
