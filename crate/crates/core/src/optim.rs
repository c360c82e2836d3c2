//! Dense BFGS minimizer with a strong-Wolfe line search.
//!
//! The line search follows the bracketing/zoom scheme with safeguarded cubic
//! interpolation, and falls back to the approximate Wolfe test of Hager and
//! Zhang once value changes drop below rounding resolution. The inverse Hessian approximation starts from a scaled
//! identity and skips updates that would lose positive definiteness.

use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone, Copy)]
pub struct BfgsOptions {
    /// Stop once `‖∇f‖∞` falls to this value.
    pub grad_tol: f64,
    pub max_iter: usize,
    /// Sufficient-decrease constant.
    pub c1: f64,
    /// Curvature constant.
    pub c2: f64,
}

impl Default for BfgsOptions {
    fn default() -> Self {
        BfgsOptions {
            grad_tol: 1e-6,
            max_iter: 500,
            c1: 1e-4,
            c2: 0.9,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Minimum {
    pub x: DVector<f64>,
    pub value: f64,
    pub gradient: DVector<f64>,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
}

impl Minimum {
    pub fn grad_norm(&self) -> f64 {
        self.gradient.amax()
    }
}

struct Counted<F> {
    f: F,
    evaluations: usize,
}

impl<F: FnMut(&DVector<f64>) -> (f64, DVector<f64>)> Counted<F> {
    fn eval(&mut self, x: &DVector<f64>) -> (f64, DVector<f64>) {
        self.evaluations += 1;
        (self.f)(x)
    }
}

/// Minimizes `f`, which returns the value and gradient at a point.
pub fn minimize<F>(f: F, x0: DVector<f64>, opts: &BfgsOptions) -> Minimum
where
    F: FnMut(&DVector<f64>) -> (f64, DVector<f64>),
{
    let mut f = Counted { f, evaluations: 0 };
    let n = x0.len();
    let mut x = x0;
    let (mut fx, mut gx) = f.eval(&x);
    let mut h = DMatrix::<f64>::identity(n, n);
    let mut scaled = false;
    let mut iterations = 0;

    while iterations < opts.max_iter {
        if !fx.is_finite() || gx.amax() <= opts.grad_tol {
            break;
        }
        let mut d = -(&h * &gx);
        if gx.dot(&d) >= 0.0 {
            // Approximation lost descent; fall back to steepest descent.
            h = DMatrix::identity(n, n);
            scaled = false;
            d = -gx.clone();
        }
        let alpha0 = if iterations == 0 {
            (1.0 / gx.norm()).min(1.0)
        } else {
            1.0
        };
        let Some((alpha, f_new, g_new)) = line_search(&mut f, &x, fx, &gx, &d, alpha0, opts) else {
            if scaled {
                // Retry once from a fresh approximation before giving up.
                h = DMatrix::identity(n, n);
                scaled = false;
                iterations += 1;
                continue;
            }
            break;
        };
        let s = &d * alpha;
        let y = &g_new - &gx;
        let sy = s.dot(&y);
        x += &s;
        fx = f_new;
        gx = g_new;
        iterations += 1;

        if sy > 1e-12 * s.norm() * y.norm() {
            if !scaled {
                h = DMatrix::identity(n, n) * (sy / y.dot(&y));
                scaled = true;
            }
            let rho = 1.0 / sy;
            let hy = &h * &y;
            let yhy = y.dot(&hy);
            // H+ = H - ρ(H y sᵀ + s yᵀ H) + (ρ² yᵀHy + ρ) s sᵀ
            h -= (&hy * s.transpose() + &s * hy.transpose()) * rho;
            h += (&s * s.transpose()) * (rho * rho * yhy + rho);
        }
    }

    let converged = fx.is_finite() && gx.amax() <= opts.grad_tol;
    Minimum {
        x,
        value: fx,
        gradient: gx,
        iterations,
        evaluations: f.evaluations,
        converged,
    }
}

fn cubic_min(a: f64, fa: f64, da: f64, b: f64, fb: f64, db: f64) -> Option<f64> {
    let d1 = da + db - 3.0 * (fa - fb) / (a - b);
    let disc = d1 * d1 - da * db;
    if !(disc >= 0.0) {
        return None;
    }
    let d2 = (b - a).signum() * disc.sqrt();
    let denom = db - da + 2.0 * d2;
    if denom == 0.0 {
        return None;
    }
    let t = b - (b - a) * (db + d2 - d1) / denom;
    t.is_finite().then_some(t)
}

/// Step length, value and gradient at the accepted point.
type Trial = (f64, f64, DVector<f64>);

/// A trial point: step, value, directional derivative, gradient.
type Point = (f64, f64, f64, DVector<f64>);

struct Conditions {
    f0: f64,
    dphi0: f64,
    /// Tolerance on value increase inside which the value is considered
    /// unresolved and the approximate Wolfe test applies.
    noise: f64,
    c1: f64,
    c2: f64,
}

impl Conditions {
    fn armijo(&self, a: f64, phi: f64) -> bool {
        phi <= self.f0 + self.c1 * a * self.dphi0
    }

    fn within_noise(&self, phi: f64) -> bool {
        phi <= self.f0 + self.noise
    }

    /// Strong Wolfe, or approximate Wolfe when the value change is below
    /// rounding resolution.
    fn accept(&self, a: f64, phi: f64, dphi: f64) -> bool {
        let strong = self.armijo(a, phi) && dphi.abs() <= -self.c2 * self.dphi0;
        let approximate = self.within_noise(phi)
            && dphi >= self.c2 * self.dphi0
            && dphi <= -(1.0 - 2.0 * APPROX_WOLFE_DELTA) * self.dphi0;
        strong || approximate
    }

    fn descent_ok(&self, a: f64, phi: f64) -> bool {
        self.armijo(a, phi) || self.within_noise(phi)
    }
}

const APPROX_WOLFE_DELTA: f64 = 0.1;

fn line_search<F>(
    f: &mut Counted<F>,
    x: &DVector<f64>,
    f0: f64,
    g0: &DVector<f64>,
    d: &DVector<f64>,
    alpha0: f64,
    opts: &BfgsOptions,
) -> Option<Trial>
where
    F: FnMut(&DVector<f64>) -> (f64, DVector<f64>),
{
    let dphi0 = g0.dot(d);
    if !(dphi0 < 0.0) {
        return None;
    }
    let cond = Conditions {
        f0,
        dphi0,
        noise: 1e-12 * f0.abs() + f64::MIN_POSITIVE,
        c1: opts.c1,
        c2: opts.c2,
    };

    let mut lo: Point = (0.0, f0, dphi0, g0.clone());
    let mut a = alpha0;
    for _ in 0..60 {
        let (phi, g) = f.eval(&(x + d * a));
        if !phi.is_finite() || g.iter().any(|v| !v.is_finite()) {
            a = lo.0 + 0.25 * (a - lo.0);
            continue;
        }
        let dphi = g.dot(d);
        if cond.accept(a, phi, dphi) {
            return Some((a, phi, g));
        }
        if !cond.descent_ok(a, phi) || dphi >= 0.0 {
            return zoom(f, x, d, &cond, lo, (a, phi, dphi, g));
        }
        lo = (a, phi, dphi, g);
        a *= 2.0;
    }
    (lo.0 > 0.0).then_some((lo.0, lo.1, lo.3))
}

/// Narrows `[lo, hi]`, where `lo` is an acceptable descent point still going
/// downhill and `hi` is either uphill or too high.
fn zoom<F>(
    f: &mut Counted<F>,
    x: &DVector<f64>,
    d: &DVector<f64>,
    cond: &Conditions,
    mut lo: Point,
    mut hi: Point,
) -> Option<Trial>
where
    F: FnMut(&DVector<f64>) -> (f64, DVector<f64>),
{
    for _ in 0..60 {
        let (left, right) = (lo.0.min(hi.0), lo.0.max(hi.0));
        if right - left <= 1e-16 * right.max(1e-300) {
            break;
        }
        let margin = 0.1 * (right - left);
        let a = match hi
            .1
            .is_finite()
            .then(|| cubic_min(lo.0, lo.1, lo.2, hi.0, hi.1, hi.2))
            .flatten()
        {
            Some(t) if t > left && t < right => t.clamp(left + margin, right - margin),
            _ => 0.5 * (left + right),
        };
        let (phi, g) = f.eval(&(x + d * a));
        if !phi.is_finite() {
            hi = (a, f64::INFINITY, 0.0, g);
            continue;
        }
        let dphi = g.dot(d);
        if cond.accept(a, phi, dphi) {
            return Some((a, phi, g));
        }
        if dphi >= 0.0 || !cond.descent_ok(a, phi) {
            hi = (a, phi, dphi, g);
        } else {
            lo = (a, phi, dphi, g);
        }
    }
    (lo.0 > 0.0 && cond.descent_ok(lo.0, lo.1)).then_some((lo.0, lo.1, lo.3))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rosenbrock(x: &DVector<f64>) -> (f64, DVector<f64>) {
        let (a, b) = (x[0], x[1]);
        let f = (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2);
        let g = DVector::from_vec(vec![-2.0 * (1.0 - a) - 400.0 * a * (b - a * a), 200.0 * (b - a * a)]);
        (f, g)
    }

    #[test]
    fn rosenbrock_minimum() {
        let m = minimize(rosenbrock, DVector::from_vec(vec![-1.2, 1.0]), &BfgsOptions::default());
        assert!(m.converged, "{m:?}");
        assert!((m.x[0] - 1.0).abs() < 1e-6 && (m.x[1] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn ill_conditioned_quadratic() {
        let diag = DVector::from_vec(vec![1.0, 1e3, 1e6, 1e9]);
        let target = DVector::from_vec(vec![1.0, -2.0, 3.0, -4.0]);
        let f = |x: &DVector<f64>| {
            let r = x - &target;
            let g = r.component_mul(&diag);
            (0.5 * r.dot(&g), g)
        };
        let opts = BfgsOptions {
            grad_tol: 1e-7,
            ..Default::default()
        };
        let m = minimize(f, DVector::zeros(4), &opts);
        assert!(m.converged, "{m:?}");
        assert!((&m.x - &target).amax() < 1e-6);
    }

    #[test]
    fn non_finite_region_is_avoided() {
        // log barrier: undefined for x <= 0, minimum at x = 1.
        let f = |x: &DVector<f64>| {
            let v = x[0];
            if v <= 0.0 {
                (f64::NAN, DVector::from_element(1, f64::NAN))
            } else {
                (v - v.ln(), DVector::from_element(1, 1.0 - 1.0 / v))
            }
        };
        let m = minimize(f, DVector::from_element(1, 5.0), &BfgsOptions::default());
        assert!(m.converged);
        assert!((m.x[0] - 1.0).abs() < 1e-6);
    }
}
