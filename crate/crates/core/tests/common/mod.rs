//! Shared helpers for the integration suites: an explicit dense-matrix
//! oracle for one walk period and the expected phase tables along the scan
//! line θ₁ = θ₂ + π/2.

#![allow(dead_code)]

use std::f64::consts::PI;

use num_complex::Complex64 as C;
use qwalk::engine::{FloquetSequence, PrimitiveOp, WalkerState};

pub type Dense = Vec<Vec<C>>;

fn zeros(n: usize) -> Dense {
    vec![vec![C::new(0.0, 0.0); n]; n]
}

fn matmul(a: &Dense, b: &Dense) -> Dense {
    let n = a.len();
    let mut out = zeros(n);
    for i in 0..n {
        for l in 0..n {
            let ail = a[i][l];
            if ail == C::new(0.0, 0.0) {
                continue;
            }
            for j in 0..n {
                out[i][j] += ail * b[l][j];
            }
        }
    }
    out
}

fn matvec(a: &Dense, v: &[C]) -> Vec<C> {
    a.iter().map(|row| row.iter().zip(v).map(|(x, y)| x * y).sum()).collect()
}

/// Full matrix of one primitive on the open window `[x0, x0 + w)`; basis
/// index `2i + c` is site `x0 + i`, coin c (0 = H, 1 = V). Amplitude pushed
/// out of the window is dropped.
fn primitive_matrix(op: &PrimitiveOp, seq: &FloquetSequence, x0: i64, w: usize, t: usize) -> Dense {
    let n = 2 * w;
    let mut m = zeros(n);
    let one = C::new(1.0, 0.0);
    match op {
        PrimitiveOp::CoinRotation(angle) => {
            for i in 0..w {
                let th = angle.resolve(seq.coin_at(x0 + i as i64, t));
                let (c, s) = (th.cos(), th.sin());
                m[2 * i][2 * i] = C::new(c, 0.0);
                m[2 * i][2 * i + 1] = C::new(-s, 0.0);
                m[2 * i + 1][2 * i] = C::new(s, 0.0);
                m[2 * i + 1][2 * i + 1] = C::new(c, 0.0);
            }
        }
        PrimitiveOp::Shift | PrimitiveOp::ShiftUp | PrimitiveOp::ShiftDown => {
            let h_moves = !matches!(op, PrimitiveOp::ShiftUp);
            let v_moves = !matches!(op, PrimitiveOp::ShiftDown);
            for i in 0..w {
                let hi = if h_moves { i as i64 - 1 } else { i as i64 };
                let vi = if v_moves { i as i64 + 1 } else { i as i64 };
                if (0..w as i64).contains(&hi) {
                    m[2 * hi as usize][2 * i] = one;
                }
                if (0..w as i64).contains(&vi) {
                    m[2 * vi as usize + 1][2 * i + 1] = one;
                }
            }
        }
        PrimitiveOp::Loss(p) => {
            // |+⟩⟨+| + sqrt(1-p)|−⟩⟨−| from explicit outer products
            let r = std::f64::consts::FRAC_1_SQRT_2;
            let plus = [r, r];
            let minus = [r, -r];
            let s = (1.0 - p).sqrt();
            for i in 0..w {
                for a in 0..2 {
                    for b in 0..2 {
                        m[2 * i + a][2 * i + b] = C::new(plus[a] * plus[b] + s * minus[a] * minus[b], 0.0);
                    }
                }
            }
        }
    }
    m
}

/// Matrix of a whole period (application order = right-to-left product).
pub fn period_matrix(seq: &FloquetSequence, x0: i64, w: usize, t: usize) -> Dense {
    let mut u = zeros(2 * w);
    for i in 0..2 * w {
        u[i][i] = C::new(1.0, 0.0);
    }
    for op in &seq.ops {
        u = matmul(&primitive_matrix(op, seq, x0, w, t), &u);
    }
    u
}

pub fn to_vector(st: &WalkerState, x0: i64, w: usize) -> Vec<C> {
    let mut v = vec![C::new(0.0, 0.0); 2 * w];
    for i in 0..w {
        let s = st.get(x0 + i as i64);
        v[2 * i] = s[0];
        v[2 * i + 1] = s[1];
    }
    v
}

/// One period by dense multiplication: the new state vector and the
/// per-site loss p·|⟨x, −|φ⟩|², φ being the state right before the loss.
pub fn dense_step(seq: &FloquetSequence, v: &[C], x0: i64, w: usize, t: usize) -> (Vec<C>, Vec<f64>) {
    let mut cur = v.to_vec();
    let mut loss = vec![0.0; w];
    for op in &seq.ops {
        if let PrimitiveOp::Loss(p) = op {
            let r = std::f64::consts::FRAC_1_SQRT_2;
            for i in 0..w {
                let minus = (cur[2 * i] - cur[2 * i + 1]) * r;
                loss[i] += p * minus.norm_sqr();
            }
        }
        cur = matvec(&primitive_matrix(op, seq, x0, w, t), &cur);
    }
    (cur, loss)
}

pub fn dense_apply(u: &Dense, v: &[C]) -> Vec<C> {
    matvec(u, v)
}

/// θ₂ samples on the scan line: 13 midpoints of equal slices of (−π, π).
pub fn line_samples() -> Vec<f64> {
    (0..13).map(|j| -PI + 2.0 * PI * (j as f64 + 0.5) / 13.0).collect()
}

/// Expected ν′ of the three-step walk on θ₁ = θ₂ + π/2 (ν″ = 0 throughout).
/// Gap closings sit at θ₂ = ±π/6, ±π/2, ±5π/6.
pub fn three_step_line_phase(theta2: f64) -> i32 {
    let a = theta2.abs();
    if a < PI / 6.0 {
        3
    } else if a < PI / 2.0 {
        1
    } else if a < 5.0 * PI / 6.0 {
        -1
    } else {
        -3
    }
}

/// Expected (ν′, ν″) of the four-step walk on θ₁ = θ₂ + π/2; gap closings
/// at θ₂ = ±π/4, ±3π/4.
pub fn four_step_line_phase(theta2: f64) -> (i32, i32) {
    if theta2.abs() > 3.0 * PI / 4.0 {
        (-4, 0)
    } else if theta2 < -PI / 4.0 {
        (0, -4)
    } else if theta2 < PI / 4.0 {
        (4, 0)
    } else {
        (0, 4)
    }
}

/// Centres of the three-step phases on the scan line, with their ν′.
pub fn three_step_centres() -> Vec<(f64, i32)> {
    vec![
        (PI, -3),
        (-2.0 * PI / 3.0, -1),
        (-PI / 3.0, 1),
        (0.0, 3),
        (PI / 3.0, 1),
        (2.0 * PI / 3.0, -1),
    ]
}

/// Centres of the four-step phases on the scan line, with (ν′, ν″).
pub fn four_step_centres() -> Vec<(f64, (i32, i32))> {
    vec![(PI, (-4, 0)), (-PI / 2.0, (0, -4)), (0.0, (4, 0)), (PI / 2.0, (0, 4))]
}

/// Prints a one-line verdict and returns it.
pub fn report(id: &str, ok: bool, detail: &str) -> bool {
    println!("{} {id}: {detail}", if ok { "PASS" } else { "FAIL" });
    ok
}
