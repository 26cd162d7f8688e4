//! Exact proximal operator of the discrete total variation,
//! `argmin_f ½‖y − f‖² + κ Σ |f_{i+1} − f_i|`.
//!
//! The solver is Condat's direct algorithm, which follows the taut string
//! through a running pair of lower/upper value bounds and emits one
//! constant segment at a time. Its output is exact up to round-off, and
//! equal values within a segment are bitwise identical, which the segment
//! analysis below relies on.

use crate::scalar::Scalar;

/// Writes `prox_{κ·TV}(y)` into `out`.
pub fn tv_prox_into<T: Scalar>(y: &[T], kappa: T, out: &mut [T]) {
    let width = y.len();
    assert_eq!(out.len(), width);
    if width == 0 {
        return;
    }
    if !(kappa > T::zero()) {
        out.copy_from_slice(y);
        return;
    }
    let lambda = kappa;
    let minlambda = -lambda;
    let twolambda = lambda + lambda;
    let mut k = 0usize;
    let mut k0 = 0usize;
    let mut umin = lambda;
    let mut umax = minlambda;
    let mut vmin = y[0] - lambda;
    let mut vmax = y[0] + lambda;
    let mut kplus = 0usize;
    let mut kminus = 0usize;
    loop {
        while k == width - 1 {
            if umin < T::zero() {
                loop {
                    out[k0] = vmin;
                    k0 += 1;
                    if k0 > kminus {
                        break;
                    }
                }
                k = k0;
                kminus = k0;
                vmin = y[k];
                umin = lambda;
                umax = vmin + umin - vmax;
            } else if umax > T::zero() {
                loop {
                    out[k0] = vmax;
                    k0 += 1;
                    if k0 > kplus {
                        break;
                    }
                }
                k = k0;
                kplus = k0;
                vmax = y[k];
                umax = minlambda;
                umin = vmax + umax - vmin;
            } else {
                vmin += umin / T::from_usize(k - k0 + 1).unwrap();
                loop {
                    out[k0] = vmin;
                    k0 += 1;
                    if k0 > k {
                        break;
                    }
                }
                return;
            }
        }
        umin += y[k + 1] - vmin;
        if umin < minlambda {
            loop {
                out[k0] = vmin;
                k0 += 1;
                if k0 > kminus {
                    break;
                }
            }
            k = k0;
            kminus = k0;
            kplus = k0;
            vmin = y[k];
            vmax = vmin + twolambda;
            umin = lambda;
            umax = minlambda;
            continue;
        }
        umax += y[k + 1] - vmax;
        if umax > lambda {
            loop {
                out[k0] = vmax;
                k0 += 1;
                if k0 > kplus {
                    break;
                }
            }
            k = k0;
            kminus = k0;
            kplus = k0;
            vmax = y[k];
            vmin = vmax - twolambda;
            umin = lambda;
            umax = minlambda;
            continue;
        }
        k += 1;
        if umin >= lambda {
            kminus = k;
            vmin += (umin - lambda) / T::from_usize(kminus - k0 + 1).unwrap();
            umin = lambda;
        }
        if umax <= minlambda {
            kplus = k;
            vmax += (umax + lambda) / T::from_usize(kplus - k0 + 1).unwrap();
            umax = minlambda;
        }
    }
}

pub fn tv_prox<T: Scalar>(y: &[T], kappa: T) -> Vec<T> {
    let mut out = vec![T::zero(); y.len()];
    tv_prox_into(y, kappa, &mut out);
    out
}

/// Constant runs of a piecewise-constant vector and the signs of the jumps
/// between them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Segments {
    /// Start index of every run, followed by `n`.
    pub bounds: Vec<usize>,
    /// Sign (`±1`) of each jump between consecutive runs.
    pub signs: Vec<i8>,
}

impl Segments {
    pub fn of<T: Scalar>(f: &[T]) -> Self {
        let mut bounds = vec![0];
        let mut signs = Vec::new();
        for i in 1..f.len() {
            if f[i] != f[i - 1] {
                bounds.push(i);
                signs.push(if f[i] > f[i - 1] { 1 } else { -1 });
            }
        }
        bounds.push(f.len());
        Self { bounds, signs }
    }

    pub fn count(&self) -> usize {
        self.bounds.len() - 1
    }

    /// Sign of the jump entering run `k` (0 for the first run).
    fn left(&self, k: usize) -> i8 {
        if k == 0 {
            0
        } else {
            self.signs[k - 1]
        }
    }

    /// Sign of the jump leaving run `k` (0 for the last run).
    fn right(&self, k: usize) -> i8 {
        self.signs.get(k).copied().unwrap_or(0)
    }

    /// Per-run `(σ_k − σ_{k−1}) / len_k`: the prox moves run `k` by `κ` times
    /// this amount away from its mean.
    pub fn drifts<T: Scalar>(&self) -> Vec<T> {
        (0..self.count())
            .map(|k| {
                let len = T::from_usize(self.bounds[k + 1] - self.bounds[k]).unwrap();
                T::from_i8(self.right(k) - self.left(k)).unwrap() / len
            })
            .collect()
    }

    /// Per-run `σ_{k−1} − σ_k`, so that `TV(f) = Σ_k v_k · weight_k`.
    pub fn tv_weights<T: Scalar>(&self) -> Vec<T> {
        (0..self.count())
            .map(|k| T::from_i8(self.left(k) - self.right(k)).unwrap())
            .collect()
    }

    /// Run means of `y`.
    pub fn means<T: Scalar>(&self, y: &[T]) -> Vec<T> {
        self.bounds
            .windows(2)
            .map(|w| {
                let s: T = y[w[0]..w[1]].iter().copied().sum();
                s / T::from_usize(w[1] - w[0]).unwrap()
            })
            .collect()
    }

    /// Fills `out` with run value `v[k]` over each run.
    pub fn expand<T: Scalar>(&self, v: &[T], out: &mut [T]) {
        for (k, w) in self.bounds.windows(2).enumerate() {
            out[w[0]..w[1]].fill(v[k]);
        }
    }

    /// Affine model of `TV(prox_κ(y)) = a − b κ`, valid while the run
    /// structure and jump signs stay fixed.
    pub fn tv_model<T: Scalar>(&self, y: &[T]) -> (T, T) {
        let means = self.means(y);
        let w = self.tv_weights::<T>();
        let d = self.drifts::<T>();
        let a = means.iter().zip(&w).map(|(&m, &wk)| m * wk).sum();
        // Σ_k d_k w_k = −Σ (σ_k − σ_{k−1})² / len_k.
        let b = -d.iter().zip(&w).map(|(&dk, &wk)| dk * wk).sum::<T>();
        (a, b)
    }
}

/// Largest violation of the optimality conditions of the TV prox at `f`.
///
/// With partial sums `r_i = Σ_{j≤i} (y_j − f_j)`, optimality is `r_n = 0` and
/// `−r_i ∈ κ ∂|f_{i+1} − f_i|`. The result is in the units of `y`.
pub fn prox_violation<T: Scalar>(y: &[T], f: &[T], kappa: T) -> T {
    let n = y.len();
    let mut r = T::zero();
    let mut worst = T::zero();
    for i in 0..n {
        r += y[i] - f[i];
        if i + 1 == n {
            worst = worst.max(r.abs());
        } else {
            let jump = f[i + 1] - f[i];
            let target = -r;
            let v = if jump > T::zero() {
                (target - kappa).abs()
            } else if jump < T::zero() {
                (target + kappa).abs()
            } else {
                (target.abs() - kappa).max(T::zero())
            };
            worst = worst.max(v);
        }
    }
    worst
}
