//! Small numerical helpers shared across the crate.
//!
//! Transcendental functions are routed through `libm` so the crate stays
//! `no_std`-compatible.

#[inline(always)]
pub fn exp(x: f64) -> f64 {
    libm::exp(x)
}

#[inline(always)]
pub fn ln(x: f64) -> f64 {
    libm::log(x)
}

#[inline(always)]
pub fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

#[inline(always)]
pub fn abs(x: f64) -> f64 {
    libm::fabs(x)
}

#[inline(always)]
pub fn pos(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        0.0
    }
}

/// `(1 - exp(-k*t)) / k`, with the `k -> 0` limit handled by a series
/// expansion so curve and bond formulas stay smooth for tiny mean reversion.
pub fn g_factor(k: f64, t: f64) -> f64 {
    let kt = k * t;
    if abs(kt) < 1e-6 {
        // (1 - e^{-kt})/k = t (1 - kt/2 + kt^2/6 - ...)
        t * (1.0 - 0.5 * kt + kt * kt / 6.0)
    } else {
        (1.0 - exp(-kt)) / k
    }
}

/// `(1 - exp(-x)) / x` with the small-`x` limit.
pub fn expm1_over(x: f64) -> f64 {
    if abs(x) < 1e-8 {
        1.0 - 0.5 * x + x * x / 6.0
    } else {
        -libm::expm1(-x) / x
    }
}

/// Brent root finder on a bracketing interval.
///
/// `f(a)` and `f(b)` must have opposite signs. Iterates until the function
/// value is below `f_tol` or the interval collapses to machine precision.
pub fn brent_root<F: FnMut(f64) -> f64>(
    mut f: F,
    mut a: f64,
    mut b: f64,
    f_tol: f64,
    max_iter: usize,
) -> Option<f64> {
    let mut fa = f(a);
    let mut fb = f(b);
    if fa == 0.0 {
        return Some(a);
    }
    if fb == 0.0 {
        return Some(b);
    }
    if fa * fb > 0.0 {
        return None;
    }
    if abs(fa) < abs(fb) {
        core::mem::swap(&mut a, &mut b);
        core::mem::swap(&mut fa, &mut fb);
    }
    let mut c = a;
    let mut fc = fa;
    let mut d = b - a;
    let mut mflag = true;
    for _ in 0..max_iter {
        if abs(fb) < f_tol {
            return Some(b);
        }
        let mut s = if fa != fc && fb != fc {
            // inverse quadratic interpolation
            a * fb * fc / ((fa - fb) * (fa - fc))
                + b * fa * fc / ((fb - fa) * (fb - fc))
                + c * fa * fb / ((fc - fa) * (fc - fb))
        } else {
            b - fb * (b - a) / (fb - fa)
        };
        let lo = (3.0 * a + b) / 4.0;
        let cond = !((s > lo.min(b) && s < lo.max(b))
            || (s > b.min(lo) && s < b.max(lo)))
            || (mflag && abs(s - b) >= abs(b - c) / 2.0)
            || (!mflag && abs(s - b) >= abs(c - d) / 2.0)
            || (mflag && abs(b - c) < 1e-16)
            || (!mflag && abs(c - d) < 1e-16);
        if cond {
            s = 0.5 * (a + b);
            mflag = true;
        } else {
            mflag = false;
        }
        let fs = f(s);
        d = c;
        c = b;
        fc = fb;
        if fa * fs < 0.0 {
            b = s;
            fb = fs;
        } else {
            a = s;
            fa = fs;
        }
        if abs(fa) < abs(fb) {
            core::mem::swap(&mut a, &mut b);
            core::mem::swap(&mut fa, &mut fb);
        }
        if abs(b - a) < 4.0 * f64::EPSILON * (abs(a) + abs(b)).max(1.0) {
            return Some(b);
        }
    }
    if abs(fb) < f_tol {
        Some(b)
    } else {
        None
    }
}

/// 8-point Gauss-Legendre nodes/weights on [-1, 1].
pub const GL8_X: [f64; 8] = [
    -0.960_289_856_497_536_2,
    -0.796_666_477_413_626_7,
    -0.525_532_409_916_329,
    -0.183_434_642_495_649_8,
    0.183_434_642_495_649_8,
    0.525_532_409_916_329,
    0.796_666_477_413_626_7,
    0.960_289_856_497_536_2,
];
pub const GL8_W: [f64; 8] = [
    0.101_228_536_290_376_26,
    0.222_381_034_453_374_47,
    0.313_706_645_877_887_3,
    0.362_683_783_378_362,
    0.362_683_783_378_362,
    0.313_706_645_877_887_3,
    0.222_381_034_453_374_47,
    0.101_228_536_290_376_26,
];

/// Integrates `f` on `[a, b]` with 8-point Gauss-Legendre.
pub fn gl8<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64) -> f64 {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let mut acc = 0.0;
    for i in 0..8 {
        acc += GL8_W[i] * f(mid + half * GL8_X[i]);
    }
    acc * half
}

/// Solves a tridiagonal system in place (Thomas algorithm).
///
/// `lower[0]` and `upper[n-1]` are ignored. `rhs` is overwritten with the
/// solution. Panics if a pivot vanishes (the schemes used here are
/// diagonally dominant).
pub fn solve_tridiagonal(
    lower: &[f64],
    diag: &[f64],
    upper: &[f64],
    rhs: &mut [f64],
    scratch: &mut alloc::vec::Vec<f64>,
) {
    let n = diag.len();
    debug_assert!(lower.len() == n && upper.len() == n && rhs.len() == n);
    scratch.clear();
    scratch.resize(n, 0.0);
    let mut beta = diag[0];
    assert!(beta != 0.0, "tridiagonal pivot vanished");
    rhs[0] /= beta;
    for i in 1..n {
        scratch[i] = upper[i - 1] / beta;
        beta = diag[i] - lower[i] * scratch[i];
        assert!(beta != 0.0, "tridiagonal pivot vanished");
        rhs[i] = (rhs[i] - lower[i] * rhs[i - 1]) / beta;
    }
    for i in (0..n - 1).rev() {
        rhs[i] -= scratch[i + 1] * rhs[i + 1];
    }
}
