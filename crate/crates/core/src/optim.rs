//! Unconstrained minimisers used for hyperparameter training.
//!
//! Two routes: a Powell direction-set method (derivative free, Brent line
//! searches) and BFGS with central finite-difference gradients. Both only
//! ever accept iterates that do not increase the objective, so the recorded
//! history is monotone.

/// Termination settings shared by both minimisers.
#[derive(Debug, Clone, Copy)]
pub struct Options {
    pub max_iters: usize,
    /// Relative change in the objective below which an iteration counts as converged.
    pub rel_tol: f64,
    /// Initial step length along each coordinate.
    pub initial_step: f64,
}

impl Default for Options {
    fn default() -> Self {
        Options {
            max_iters: 500,
            rel_tol: 1e-8,
            initial_step: 0.5,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub f: f64,
    pub iters: usize,
    pub evals: usize,
    pub converged: bool,
    /// Objective after each accepted iteration, starting with the initial point.
    pub history: Vec<f64>,
    /// Accepted iterates, aligned with `history`.
    pub path: Vec<Vec<f64>>,
}

struct Counted<F> {
    f: F,
    evals: usize,
}

impl<F: FnMut(&[f64]) -> f64> Counted<F> {
    fn call(&mut self, x: &[f64]) -> f64 {
        self.evals += 1;
        let v = (self.f)(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    }
}

fn converged(f_old: f64, f_new: f64, tol: f64) -> bool {
    2.0 * (f_old - f_new).abs() <= tol * (f_old.abs() + f_new.abs()) + 1e-20
}

fn along(x: &[f64], d: &[f64], t: f64) -> Vec<f64> {
    x.iter().zip(d).map(|(a, b)| a + t * b).collect()
}

const GOLD: f64 = 1.618_033_988_749_895;
const CGOLD: f64 = 0.381_966_011_250_105;

/// Minimises `phi` over the line, starting from `phi(0) = f0`.
/// Returns `(t, phi(t))` with `phi(t) <= f0`.
fn line_minimise<G: FnMut(f64) -> f64>(mut phi: G, f0: f64, step: f64) -> (f64, f64) {
    // Bracket.
    let (mut a, mut fa) = (0.0, f0);
    let (mut b, mut fb) = (step, phi(step));
    if fb > fa {
        // try the other way first, then shrink
        let (c, fc) = (-step, phi(-step));
        if fc < fa {
            b = c;
            fb = fc;
        } else {
            // minimum lies inside [-step, step]
            return brent(&mut phi, -step, 0.0, step, f0, (a, fa));
        }
    }
    if fb > fa {
        std::mem::swap(&mut a, &mut b);
        std::mem::swap(&mut fa, &mut fb);
    }
    let mut c = b + GOLD * (b - a);
    let mut fc = phi(c);
    let mut guard = 0;
    while fb > fc && guard < 60 {
        a = b;
        fa = fb;
        b = c;
        fb = fc;
        c = b + GOLD * (b - a);
        fc = phi(c);
        guard += 1;
    }
    let _ = fa;
    let (lo, hi) = if a < c { (a, c) } else { (c, a) };
    let best = if fb < f0 { (b, fb) } else { (0.0, f0) };
    brent(&mut phi, lo, b, hi, f0, best)
}

/// Brent's parabolic/golden minimisation on `[lo, hi]` starting at `mid`.
fn brent<G: FnMut(f64) -> f64>(
    phi: &mut G,
    lo: f64,
    mid: f64,
    hi: f64,
    f0: f64,
    best0: (f64, f64),
) -> (f64, f64) {
    let (mut a, mut b) = (lo, hi);
    let mut x = mid;
    let mut fx = if mid == 0.0 { f0 } else { phi(mid) };
    let (mut w, mut v) = (x, x);
    let (mut fw, mut fv) = (fx, fx);
    let mut d: f64 = 0.0;
    let mut e: f64 = 0.0;
    for _ in 0..100 {
        let xm = 0.5 * (a + b);
        let tol1 = 1e-8 * x.abs() + 1e-12;
        let tol2 = 2.0 * tol1;
        if (x - xm).abs() <= tol2 - 0.5 * (b - a) {
            break;
        }
        let mut golden = true;
        if e.abs() > tol1 {
            let r = (x - w) * (fx - fv);
            let mut q = (x - v) * (fx - fw);
            let mut p = (x - v) * q - (x - w) * r;
            q = 2.0 * (q - r);
            if q > 0.0 {
                p = -p;
            }
            q = q.abs();
            let etemp = e;
            e = d;
            if !(p.abs() >= (0.5 * q * etemp).abs() || p <= q * (a - x) || p >= q * (b - x)) {
                d = p / q;
                let u = x + d;
                if u - a < tol2 || b - u < tol2 {
                    d = tol1.copysign(xm - x);
                }
                golden = false;
            }
        }
        if golden {
            e = if x >= xm { a - x } else { b - x };
            d = CGOLD * e;
        }
        let u = if d.abs() >= tol1 {
            x + d
        } else {
            x + tol1.copysign(d)
        };
        let fu = phi(u);
        if fu <= fx {
            if u >= x {
                a = x;
            } else {
                b = x;
            }
            v = w;
            w = x;
            x = u;
            fv = fw;
            fw = fx;
            fx = fu;
        } else {
            if u < x {
                a = u;
            } else {
                b = u;
            }
            if fu <= fw || w == x {
                v = w;
                w = u;
                fv = fw;
                fw = fu;
            } else if fu <= fv || v == x || v == w {
                v = u;
                fv = fu;
            }
        }
    }
    let best = if fx <= best0.1 { (x, fx) } else { best0 };
    if best.1 <= f0 {
        best
    } else {
        (0.0, f0)
    }
}

/// Powell's direction-set method.
pub fn powell<F: FnMut(&[f64]) -> f64>(f: F, x0: &[f64], opts: &Options) -> Minimum {
    let n = x0.len();
    let mut obj = Counted { f, evals: 0 };
    let mut x = x0.to_vec();
    let mut fx = obj.call(&x);
    let mut dirs: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let mut d = vec![0.0; n];
            d[i] = opts.initial_step;
            d
        })
        .collect();
    let mut history = vec![fx];
    let mut path = vec![x.clone()];
    let mut converged_flag = false;
    let mut iters = 0;
    if n == 0 || !fx.is_finite() {
        return Minimum {
            x,
            f: fx,
            iters,
            evals: obj.evals,
            converged: n == 0,
            history,
            path,
        };
    }
    while iters < opts.max_iters {
        iters += 1;
        let x_start = x.clone();
        let f_start = fx;
        let mut biggest = 0.0;
        let mut ibig = 0;
        for (i, d) in dirs.iter().enumerate() {
            let f_before = fx;
            let (t, ft) = line_minimise(|t| obj.call(&along(&x, d, t)), fx, 1.0);
            if ft < fx {
                x = along(&x, d, t);
                fx = ft;
            }
            if f_before - fx > biggest {
                biggest = f_before - fx;
                ibig = i;
            }
        }
        history.push(fx);
        path.push(x.clone());
        if converged(f_start, fx, opts.rel_tol) {
            converged_flag = true;
            break;
        }
        // Extrapolated point and new direction.
        let new_dir: Vec<f64> = x.iter().zip(&x_start).map(|(a, b)| a - b).collect();
        let x_ext: Vec<f64> = x.iter().zip(&x_start).map(|(a, b)| 2.0 * a - b).collect();
        let f_ext = obj.call(&x_ext);
        if f_ext < f_start {
            let t = 2.0 * (f_start - 2.0 * fx + f_ext) * (f_start - fx - biggest).powi(2)
                - biggest * (f_start - f_ext).powi(2);
            if t < 0.0 {
                let (s, fs) = line_minimise(|t| obj.call(&along(&x, &new_dir, t)), fx, 1.0);
                if fs < fx {
                    x = along(&x, &new_dir, s);
                    fx = fs;
                    *history.last_mut().unwrap() = fx;
                    *path.last_mut().unwrap() = x.clone();
                }
                dirs[ibig] = dirs[n - 1].clone();
                dirs[n - 1] = new_dir;
            }
        }
    }
    Minimum {
        x,
        f: fx,
        iters,
        evals: obj.evals,
        converged: converged_flag,
        history,
        path,
    }
}

fn fd_gradient<F: FnMut(&[f64]) -> f64>(obj: &mut Counted<F>, x: &[f64]) -> Vec<f64> {
    let mut g = vec![0.0; x.len()];
    let mut xp = x.to_vec();
    for i in 0..x.len() {
        let h = 1e-5 * x[i].abs().max(1.0);
        xp[i] = x[i] + h;
        let fp = obj.call(&xp);
        xp[i] = x[i] - h;
        let fm = obj.call(&xp);
        xp[i] = x[i];
        g[i] = (fp - fm) / (2.0 * h);
    }
    g
}

/// BFGS with central-difference gradients and Brent line searches.
pub fn bfgs<F: FnMut(&[f64]) -> f64>(f: F, x0: &[f64], opts: &Options) -> Minimum {
    let n = x0.len();
    let mut obj = Counted { f, evals: 0 };
    let mut x = x0.to_vec();
    let mut fx = obj.call(&x);
    let mut history = vec![fx];
    let mut path = vec![x.clone()];
    let mut iters = 0;
    let mut converged_flag = false;
    if n == 0 || !fx.is_finite() {
        return Minimum {
            x,
            f: fx,
            iters,
            evals: obj.evals,
            converged: n == 0,
            history,
            path,
        };
    }
    // inverse Hessian, row-major
    let mut h = vec![0.0; n * n];
    let reset = |h: &mut Vec<f64>| {
        h.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..n {
            h[i * n + i] = 1.0;
        }
    };
    reset(&mut h);
    let mut g = fd_gradient(&mut obj, &x);
    let mut stalled = 0;
    while iters < opts.max_iters {
        iters += 1;
        let mut p: Vec<f64> = (0..n)
            .map(|i| -(0..n).map(|j| h[i * n + j] * g[j]).sum::<f64>())
            .collect();
        let slope: f64 = p.iter().zip(&g).map(|(a, b)| a * b).sum();
        if !(slope < 0.0) {
            reset(&mut h);
            p = g.iter().map(|v| -v).collect();
        }
        let norm = p.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            converged_flag = true;
            break;
        }
        let step = (opts.initial_step / norm).min(1.0);
        let (t, ft) = line_minimise(|t| obj.call(&along(&x, &p, t)), fx, step);
        if t == 0.0 || ft >= fx {
            stalled += 1;
            history.push(fx);
            path.push(x.clone());
            if stalled >= 2 {
                converged_flag = true;
                break;
            }
            reset(&mut h);
            continue;
        }
        stalled = 0;
        let x_new = along(&x, &p, t);
        let g_new = fd_gradient(&mut obj, &x_new);
        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let f_old = fx;
        x = x_new;
        fx = ft;
        g = g_new;
        history.push(fx);
        path.push(x.clone());
        if converged(f_old, fx, opts.rel_tol) {
            converged_flag = true;
            break;
        }
        let sy: f64 = s.iter().zip(&y).map(|(a, b)| a * b).sum();
        if sy > 1e-12 {
            let rho = 1.0 / sy;
            let hy: Vec<f64> = (0..n)
                .map(|i| (0..n).map(|j| h[i * n + j] * y[j]).sum())
                .collect();
            let yhy: f64 = y.iter().zip(&hy).map(|(a, b)| a * b).sum();
            for i in 0..n {
                for j in 0..n {
                    h[i * n + j] += -rho * (hy[i] * s[j] + s[i] * hy[j])
                        + (rho * rho * yhy + rho) * s[i] * s[j];
                }
            }
        }
    }
    Minimum {
        x,
        f: fx,
        iters,
        evals: obj.evals,
        converged: converged_flag,
        history,
        path,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rosenbrock(x: &[f64]) -> f64 {
        (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2)
    }

    fn quadratic(x: &[f64]) -> f64 {
        (x[0] - 3.0).powi(2) + 10.0 * (x[1] + 1.0).powi(2) + 0.5 * (x[2] - 0.5).powi(2)
    }

    #[test]
    fn powell_quadratic() {
        let m = powell(quadratic, &[0.0, 0.0, 0.0], &Options::default());
        assert!(m.converged);
        assert!((m.x[0] - 3.0).abs() < 1e-4, "{:?}", m.x);
        assert!((m.x[1] + 1.0).abs() < 1e-4);
        assert!((m.x[2] - 0.5).abs() < 1e-4);
    }

    #[test]
    fn powell_rosenbrock() {
        let opts = Options {
            max_iters: 2000,
            rel_tol: 1e-12,
            ..Options::default()
        };
        let m = powell(rosenbrock, &[-1.2, 1.0], &opts);
        assert!(m.f < 1e-8, "{m:?}");
    }

    #[test]
    fn bfgs_rosenbrock() {
        let opts = Options {
            max_iters: 2000,
            rel_tol: 1e-14,
            ..Options::default()
        };
        let m = bfgs(rosenbrock, &[-1.2, 1.0], &opts);
        assert!(m.f < 1e-6, "{m:?}");
    }

    #[test]
    fn histories_are_monotone() {
        for m in [
            powell(rosenbrock, &[-1.2, 1.0], &Options::default()),
            bfgs(rosenbrock, &[-1.2, 1.0], &Options::default()),
        ] {
            assert!(m.history.windows(2).all(|w| w[1] <= w[0]));
            assert_eq!(m.history.len(), m.path.len());
        }
    }

    #[test]
    fn infinite_regions_are_avoided() {
        let f = |x: &[f64]| {
            if x[0] < 0.0 {
                f64::INFINITY
            } else {
                (x[0] - 0.1).powi(2)
            }
        };
        let m = powell(f, &[2.0], &Options::default());
        assert!((m.x[0] - 0.1).abs() < 1e-4);
    }
}
