//! Matrix exponential kernels.
//!
//! `expm` is the Higham scaling-and-squaring method with diagonal Pade
//! approximants of orders 3/5/7/9/13. `expm_action` evaluates exp(sA)v by
//! scaled Taylor summation, which avoids forming the exponential when only a
//! few vectors need propagating.

use ndarray::{Array1, Array2};
use num_complex::Complex64;

type CMat = Array2<Complex64>;

const THETA_3: f64 = 1.495585217958292e-2;
const THETA_5: f64 = 2.539398330063230e-1;
const THETA_7: f64 = 9.504178996162932e-1;
const THETA_9: f64 = 2.097847961257068e0;
const THETA_13: f64 = 5.371920351148152e0;

fn one_norm(a: &CMat) -> f64 {
    let n = a.nrows();
    let mut best = 0.0_f64;
    for j in 0..n {
        let s: f64 = (0..n).map(|i| a[[i, j]].norm()).sum();
        best = best.max(s);
    }
    best
}

/// Solve A X = B with partial-pivot LU, overwriting nothing.
fn solve(a: &CMat, b: &CMat) -> CMat {
    let n = a.nrows();
    let mut lu = a.clone();
    let mut perm: Vec<usize> = (0..n).collect();
    for k in 0..n {
        let mut pivot = k;
        let mut best = lu[[k, k]].norm();
        for i in k + 1..n {
            let v = lu[[i, k]].norm();
            if v > best {
                best = v;
                pivot = i;
            }
        }
        if pivot != k {
            for j in 0..n {
                let tmp = lu[[k, j]];
                lu[[k, j]] = lu[[pivot, j]];
                lu[[pivot, j]] = tmp;
            }
            perm.swap(k, pivot);
        }
        let d = lu[[k, k]];
        for i in k + 1..n {
            let f = lu[[i, k]] / d;
            lu[[i, k]] = f;
            for j in k + 1..n {
                let sub = f * lu[[k, j]];
                lu[[i, j]] -= sub;
            }
        }
    }
    let m = b.ncols();
    let mut x = Array2::zeros((n, m));
    for c in 0..m {
        // forward substitution on permuted rows
        let mut y: Vec<Complex64> = (0..n).map(|i| b[[perm[i], c]]).collect();
        for i in 1..n {
            for j in 0..i {
                let sub = lu[[i, j]] * y[j];
                y[i] -= sub;
            }
        }
        // back substitution
        for i in (0..n).rev() {
            for j in i + 1..n {
                let sub = lu[[i, j]] * y[j];
                y[i] -= sub;
            }
            y[i] /= lu[[i, i]];
        }
        for i in 0..n {
            x[[i, c]] = y[i];
        }
    }
    x
}

fn pade_uv(a: &CMat, coeffs: &[f64]) -> (CMat, CMat) {
    // U = A * (c1 I + c3 A2 + c5 A4 + ...), V = c0 I + c2 A2 + ...
    let n = a.nrows();
    let a2 = a.dot(a);
    let mut even_powers: Vec<CMat> = vec![Array2::eye(n), a2.clone()];
    let needed = (coeffs.len() - 1) / 2;
    while even_powers.len() <= needed {
        let next = even_powers.last().unwrap().dot(&a2);
        even_powers.push(next);
    }
    let mut u_inner: CMat = Array2::zeros((n, n));
    let mut v: CMat = Array2::zeros((n, n));
    for (k, &c) in coeffs.iter().enumerate() {
        let p = &even_powers[k / 2];
        if k % 2 == 1 {
            u_inner = u_inner + p.mapv(|z| z * c);
        } else {
            v = v + p.mapv(|z| z * c);
        }
    }
    (a.dot(&u_inner), v)
}

fn pade_13(a: &CMat) -> (CMat, CMat) {
    const B: [f64; 14] = [
        64764752532480000.0,
        32382376266240000.0,
        7771770303897600.0,
        1187353796428800.0,
        129060195264000.0,
        10559470521600.0,
        670442572800.0,
        33522128640.0,
        1323241920.0,
        40840800.0,
        960960.0,
        16380.0,
        182.0,
        1.0,
    ];
    let n = a.nrows();
    let a2 = a.dot(a);
    let a4 = a2.dot(&a2);
    let a6 = a4.dot(&a2);
    let eye: CMat = Array2::eye(n);
    let u_hi = a6.dot(&(a6.mapv(|z| z * B[13]) + a4.mapv(|z| z * B[11]) + a2.mapv(|z| z * B[9])));
    let u_lo = a6.mapv(|z| z * B[7]) + a4.mapv(|z| z * B[5]) + a2.mapv(|z| z * B[3]) + eye.mapv(|z| z * B[1]);
    let u = a.dot(&(u_hi + u_lo));
    let v_hi = a6.dot(&(a6.mapv(|z| z * B[12]) + a4.mapv(|z| z * B[10]) + a2.mapv(|z| z * B[8])));
    let v_lo = a6.mapv(|z| z * B[6]) + a4.mapv(|z| z * B[4]) + a2.mapv(|z| z * B[2]) + eye.mapv(|z| z * B[0]);
    (u, v_hi + v_lo)
}

pub fn expm(a: &CMat) -> CMat {
    let norm = one_norm(a);
    let orders: [(f64, &[f64]); 4] = [
        (THETA_3, &[120.0, 60.0, 12.0, 1.0]),
        (THETA_5, &[30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0]),
        (
            THETA_7,
            &[17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0],
        ),
        (
            THETA_9,
            &[
                17643225600.0,
                8821612800.0,
                2075673600.0,
                302702400.0,
                30270240.0,
                2162160.0,
                110880.0,
                3960.0,
                90.0,
                1.0,
            ],
        ),
    ];
    for (theta, coeffs) in orders {
        if norm <= theta {
            let (u, v) = pade_uv(a, coeffs);
            return solve(&(&v - &u), &(&v + &u));
        }
    }
    // Pade-13 with scaling and squaring.
    let s = if norm > THETA_13 {
        ((norm / THETA_13).log2().ceil() as i32).max(0)
    } else {
        0
    };
    let scaled = a.mapv(|z| z / 2f64.powi(s));
    let (u, v) = pade_13(&scaled);
    let mut e = solve(&(&v - &u), &(&v + &u));
    for _ in 0..s {
        e = e.dot(&e);
    }
    e
}

/// exp(scale * A) applied to each vector in `states`, in place.
pub fn expm_action(a: &CMat, scale: Complex64, states: &mut [Array1<Complex64>]) {
    let norm = one_norm(a) * scale.norm();
    // Keep each substep norm near 2 so the Taylor hump stays below e^2.
    let substeps = (norm / 2.0).ceil().max(1.0) as usize;
    let step_scale = scale / substeps as f64;
    let tol = 1e-16;
    for psi in states.iter_mut() {
        for _ in 0..substeps {
            let mut term = psi.clone();
            let mut acc = psi.clone();
            let mut k = 1usize;
            loop {
                let az = a.dot(&term).mapv(|z| z * step_scale / k as f64);
                term = az;
                acc = acc + &term;
                let tn: f64 = term.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
                let an: f64 = acc.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
                k += 1;
                if tn <= tol * an.max(1e-300) || k > 64 {
                    break;
                }
            }
            *psi = acc;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solve_small_system() {
        let a: CMat = ndarray::array![
            [Complex64::new(2.0, 0.0), Complex64::new(1.0, 1.0)],
            [Complex64::new(0.0, -1.0), Complex64::new(3.0, 0.0)]
        ];
        let x_true: CMat = ndarray::array![
            [Complex64::new(0.3, -0.2)],
            [Complex64::new(1.1, 0.7)]
        ];
        let b = a.dot(&x_true);
        let x = solve(&a, &b);
        let err: f64 = (&x - &x_true).iter().map(|z| z.norm()).sum();
        assert!(err < 1e-13);
    }

    #[test]
    fn expm_scalar_matches() {
        for &z in &[
            Complex64::new(0.001, 0.0),
            Complex64::new(-0.4, 1.3),
            Complex64::new(2.0, -7.0),
            Complex64::new(8.5, 3.0),
        ] {
            let a = Array2::from_elem((1, 1), z);
            let e = expm(&a);
            assert!((e[[0, 0]] - z.exp()).norm() < 1e-12 * z.exp().norm());
        }
    }

    #[test]
    fn expm_large_norm_uses_squaring() {
        // Nilpotent + diagonal, exact answer known: exp([[a,b],[0,a]]) = e^a [[1,b],[0,1]]
        let a = Complex64::new(0.0, 9.4);
        let b = Complex64::new(3.0, 0.0);
        let m: CMat = ndarray::array![[a, b], [Complex64::new(0.0, 0.0), a]];
        let e = expm(&m);
        let ea = a.exp();
        assert!((e[[0, 0]] - ea).norm() < 1e-11);
        assert!((e[[0, 1]] - ea * b).norm() < 1e-10);
        assert!((e[[1, 1]] - ea).norm() < 1e-11);
        assert!(e[[1, 0]].norm() < 1e-12);
    }
}
