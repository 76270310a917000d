//! Summation and quadrature helpers.

use crate::scalar::Scalar;

/// Neumaier compensated accumulator.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum<T> {
    sum: T,
    compensation: T,
}

impl<T: Scalar> CompensatedSum<T> {
    pub fn new() -> Self {
        Self {
            sum: T::zero(),
            compensation: T::zero(),
        }
    }

    pub fn add(&mut self, x: T) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.compensation = self.compensation + ((self.sum - t) + x);
        } else {
            self.compensation = self.compensation + ((x - t) + self.sum);
        }
        self.sum = t;
    }

    pub fn total(&self) -> T {
        self.sum + self.compensation
    }
}

impl<T: Scalar> FromIterator<T> for CompensatedSum<T> {
    fn from_iter<I: IntoIterator<Item = T>>(iter: I) -> Self {
        let mut acc = Self::new();
        for x in iter {
            acc.add(x);
        }
        acc
    }
}

pub fn compensated_sum<T: Scalar>(xs: impl IntoIterator<Item = T>) -> T {
    xs.into_iter().collect::<CompensatedSum<T>>().total()
}

/// Pairwise (cascade) summation. The result depends only on the slice, so
/// reductions over per-trial values are independent of how the values were
/// produced.
pub fn pairwise_sum<T: Scalar>(xs: &[T]) -> T {
    const LEAF: usize = 64;
    if xs.len() <= LEAF {
        return xs.iter().fold(T::zero(), |acc, &x| acc + x);
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

const MAX_DEPTH: u32 = 50;

/// Adaptive Simpson quadrature of a vector-valued integrand on `[a, b]`.
///
/// All integrands in this crate are piecewise polynomials of degree at most
/// two, on which Simpson's rule is exact; subdivision only happens around
/// breakpoints. `rel_tol` is relative to `max(1, |estimate|)` per component.
pub fn adaptive_simpson<T, F, const N: usize>(f: &F, a: T, b: T, rel_tol: T) -> [T; N]
where
    T: Scalar,
    F: Fn(T) -> [T; N],
{
    if b <= a {
        return [T::zero(); N];
    }
    let m = (a + b) * T::half();
    let (fa, fm, fb) = (f(a), f(m), f(b));
    let whole = simpson(a, b, &fa, &fm, &fb);
    let scale = whole.iter().fold(T::one(), |s, w| s.max(w.abs()));
    recurse(f, a, b, fa, fm, fb, whole, rel_tol * scale, MAX_DEPTH)
}

fn simpson<T: Scalar, const N: usize>(a: T, b: T, fa: &[T; N], fm: &[T; N], fb: &[T; N]) -> [T; N] {
    let w = (b - a) / T::lit(6.0);
    std::array::from_fn(|i| w * (fa[i] + T::lit(4.0) * fm[i] + fb[i]))
}

#[allow(clippy::too_many_arguments)]
fn recurse<T, F, const N: usize>(
    f: &F,
    a: T,
    b: T,
    fa: [T; N],
    fm: [T; N],
    fb: [T; N],
    whole: [T; N],
    eps: T,
    depth: u32,
) -> [T; N]
where
    T: Scalar,
    F: Fn(T) -> [T; N],
{
    let m = (a + b) * T::half();
    let lm = (a + m) * T::half();
    let rm = (m + b) * T::half();
    let (flm, frm) = (f(lm), f(rm));
    let left = simpson(a, m, &fa, &flm, &fm);
    let right = simpson(m, b, &fm, &frm, &fb);
    let delta: [T; N] = std::array::from_fn(|i| left[i] + right[i] - whole[i]);
    let err = delta.iter().fold(T::zero(), |e, d| e.max(d.abs()));
    if depth == 0 || err <= T::lit(15.0) * eps || !(lm > a && rm < b) {
        return std::array::from_fn(|i| left[i] + right[i] + delta[i] / T::lit(15.0));
    }
    let half_eps = eps * T::half();
    let l = recurse(f, a, m, fa, flm, fm, left, half_eps, depth - 1);
    let r = recurse(f, m, b, fm, frm, fb, right, half_eps, depth - 1);
    std::array::from_fn(|i| l[i] + r[i])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensated_sum_recovers_cancelled_terms() {
        let xs = [1.0, 1e100, 1.0, -1e100];
        assert_eq!(compensated_sum(xs), 2.0);
    }

    #[test]
    fn pairwise_matches_naive_on_exact_values() {
        let xs: Vec<f64> = (0..1000).map(|i| i as f64).collect();
        assert_eq!(pairwise_sum(&xs), 499500.0);
    }

    #[test]
    fn simpson_is_exact_on_quadratics() {
        let [r] = adaptive_simpson(&|x: f64| [3.0 * x * x - x + 2.0], 0.0, 2.0, 1e-13);
        assert!((r - (8.0 - 2.0 + 4.0)).abs() < 1e-14);
    }

    #[test]
    fn simpson_resolves_kinks_and_jumps() {
        let [kink, jump] = adaptive_simpson(
            &|x: f64| [(x - 0.3).abs(), if x < 0.7 { 0.0 } else { 1.0 }],
            0.0,
            1.0,
            1e-13,
        );
        assert!((kink - (0.045 + 0.245)).abs() < 1e-12, "{kink}");
        assert!((jump - 0.3).abs() < 1e-12, "{jump}");
    }
}
