//! One-dimensional priors with exact quantile and CDF evaluation.
//!
//! Two representations are supported, both of which integrate in closed
//! form:
//!
//! * [`Discrete`]: finitely many atoms.
//! * [`PwlQuantile`]: a continuous piecewise-linear quantile function.
//!   Flat segments encode atoms, so mixed distributions are expressible.
//!
//! The quantile function is the left-continuous generalized inverse
//! `c(q) = inf { p : F(p) >= q }` and the CDF is right-continuous,
//! `F(p) = Pr[X <= p]`. With these conventions `c(q) <= p` iff `q <= F(p)`
//! for every `q` in `(0, 1]`.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result, ValidationReport};
use crate::numeric::{adaptive_simpson, CompensatedSum};
use crate::scalar::Scalar;

/// Finitely supported distribution with strictly increasing atom values.
#[derive(Debug, Clone, PartialEq)]
pub struct Discrete<T> {
    values: Vec<T>,
    probs: Vec<T>,
    /// `cum[i] = Pr[X <= values[i]]`; the last entry is exactly one.
    cum: Vec<T>,
}

/// Piecewise-linear quantile function through `(q, value)` knots with `q`
/// strictly increasing from 0 to 1 and values non-decreasing.
#[derive(Debug, Clone, PartialEq)]
pub struct PwlQuantile<T> {
    qs: Vec<T>,
    values: Vec<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(
    into = "RawDistribution<T>",
    try_from = "RawDistribution<T>",
    bound(
        serialize = "T: Scalar + Serialize",
        deserialize = "T: Scalar + Deserialize<'de>"
    )
)]
pub enum Distribution<T> {
    Discrete(Discrete<T>),
    Pwl(PwlQuantile<T>),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom<T> {
    pub value: T,
    pub prob: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Knot<T> {
    pub q: T,
    pub value: T,
}

/// Distribution as it appears in instance files, before validation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum RawDistribution<T> {
    Discrete { atoms: Vec<Atom<T>> },
    Pwl { knots: Vec<Knot<T>> },
    Uniform { lo: T, hi: T },
    Point { value: T },
}

impl<T: Scalar> RawDistribution<T> {
    /// Checks every invariant and returns the normalized distribution:
    /// atoms sorted, duplicate values merged, zero-probability atoms
    /// dropped. Sugar forms become `discrete` (point) or `pwl` (uniform).
    pub fn validate(&self) -> Result<Distribution<T>> {
        let mut report = ValidationReport::default();
        let dist = match self {
            RawDistribution::Discrete { atoms } => validate_atoms(atoms, &mut report),
            RawDistribution::Pwl { knots } => validate_knots(knots, &mut report),
            RawDistribution::Uniform { lo, hi } => {
                if !lo.is_finite() || !hi.is_finite() {
                    report.push("lo/hi", "bounds must be finite");
                    None
                } else if lo > hi {
                    report.push("lo/hi", "lo exceeds hi");
                    None
                } else {
                    Some(Distribution::Pwl(PwlQuantile {
                        qs: vec![T::zero(), T::one()],
                        values: vec![*lo, *hi],
                    }))
                }
            }
            RawDistribution::Point { value } => {
                if value.is_finite() {
                    Some(Distribution::point(*value))
                } else {
                    report.push("value", "value must be finite");
                    None
                }
            }
        };
        match dist {
            Some(d) if report.is_empty() => Ok(d),
            _ => Err(Error::Validation(report)),
        }
    }
}

fn validate_atoms<T: Scalar>(
    atoms: &[Atom<T>],
    report: &mut ValidationReport,
) -> Option<Distribution<T>> {
    if atoms.is_empty() {
        report.push("atoms", "at least one atom is required");
        return None;
    }
    let mut total = CompensatedSum::new();
    for (i, a) in atoms.iter().enumerate() {
        if !a.value.is_finite() {
            report.push(format!("atoms[{i}].value"), "value must be finite");
        }
        if !a.prob.is_finite() || a.prob < T::zero() || a.prob > T::one() {
            report.push(format!("atoms[{i}].prob"), "probability must lie in [0, 1]");
        } else {
            total.add(a.prob);
        }
    }
    if !report.is_empty() {
        return None;
    }
    let total = total.total();
    if (total - T::one()).abs() > T::prob_tol() {
        report.push("atoms", format!("probabilities sum ≠ 1 (sum = {total})"));
        return None;
    }

    let mut sorted: Vec<Atom<T>> = atoms.iter().copied().filter(|a| a.prob > T::zero()).collect();
    sorted.sort_by(|a, b| a.value.partial_cmp(&b.value).expect("finite values"));
    let mut values: Vec<T> = Vec::with_capacity(sorted.len());
    let mut probs: Vec<T> = Vec::with_capacity(sorted.len());
    for a in sorted {
        match values.last() {
            Some(&last) if last == a.value => {
                let p = probs.last_mut().expect("parallel vectors");
                *p = *p + a.prob;
            }
            _ => {
                values.push(a.value);
                probs.push(a.prob);
            }
        }
    }
    Some(Distribution::Discrete(Discrete::from_sorted(values, probs)))
}

fn validate_knots<T: Scalar>(
    knots: &[Knot<T>],
    report: &mut ValidationReport,
) -> Option<Distribution<T>> {
    if knots.len() < 2 {
        report.push("knots", "at least two knots are required");
        return None;
    }
    for (i, k) in knots.iter().enumerate() {
        if !k.q.is_finite() || !k.value.is_finite() {
            report.push(format!("knots[{i}]"), "q and value must be finite");
        }
    }
    if !report.is_empty() {
        return None;
    }
    if knots[0].q != T::zero() {
        report.push("knots[0].q", "first knot must have q = 0");
    }
    if knots[knots.len() - 1].q != T::one() {
        report.push(format!("knots[{}].q", knots.len() - 1), "last knot must have q = 1");
    }
    for (i, w) in knots.windows(2).enumerate() {
        if w[1].q <= w[0].q {
            report.push(format!("knots[{}].q", i + 1), "q not strictly increasing");
        }
        if w[1].value < w[0].value {
            report.push(format!("knots[{}].value", i + 1), "quantile not monotone");
        }
    }
    if !report.is_empty() {
        return None;
    }
    // Snap levels so that `1 - q` is exact; negation is then an exact
    // involution. Moves each level by at most one unit of 2^-53.
    let qs: Vec<T> = knots.iter().map(|k| T::one() - (T::one() - k.q)).collect();
    for (i, w) in qs.windows(2).enumerate() {
        if w[1] <= w[0] {
            report.push(format!("knots[{}].q", i + 1), "q levels too close to resolve");
        }
    }
    if !report.is_empty() {
        return None;
    }
    Some(Distribution::Pwl(PwlQuantile {
        qs,
        values: knots.iter().map(|k| k.value).collect(),
    }))
}

impl<T: Scalar> TryFrom<RawDistribution<T>> for Distribution<T> {
    type Error = Error;

    fn try_from(raw: RawDistribution<T>) -> Result<Self> {
        raw.validate()
    }
}

impl<T: Scalar> From<Distribution<T>> for RawDistribution<T> {
    fn from(d: Distribution<T>) -> Self {
        d.to_raw()
    }
}

fn check_probability<T: Scalar>(name: &str, q: T) -> Result<()> {
    if q >= T::zero() && q <= T::one() {
        Ok(())
    } else {
        Err(domain(format!("{name} = {q} is outside [0, 1]")))
    }
}

/// Linear interpolation that reproduces both endpoints exactly.
#[inline]
fn lerp<T: Scalar>(x: T, x0: T, x1: T, y0: T, y1: T) -> T {
    if x <= x0 {
        return y0;
    }
    if x >= x1 {
        return y1;
    }
    let t = (x - x0) / (x1 - x0);
    (y0 + t * (y1 - y0)).max(y0).min(y1)
}

impl<T: Scalar> Discrete<T> {
    fn from_sorted(values: Vec<T>, probs: Vec<T>) -> Self {
        let mut cum = Vec::with_capacity(probs.len());
        let mut acc = T::zero();
        for &p in &probs {
            acc = acc + p;
            cum.push(acc.min(T::one()));
        }
        if let Some(last) = cum.last_mut() {
            *last = T::one();
        }
        Self { values, probs, cum }
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn probs(&self) -> &[T] {
        &self.probs
    }

    /// `Pr[X <= values[i]]` for each atom.
    pub fn cumulative(&self) -> &[T] {
        &self.cum
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Index of the atom holding quantile `q`.
    pub fn quantile_index(&self, q: T) -> usize {
        let i = self.cum.partition_point(|&c| c < q);
        i.min(self.values.len() - 1)
    }

    /// Probability mass of atom `i` as seen by the quantile function.
    fn width(&self, i: usize) -> T {
        if i == 0 {
            self.cum[0]
        } else {
            self.cum[i] - self.cum[i - 1]
        }
    }

    fn cdf(&self, p: T) -> T {
        match self.values.partition_point(|&v| v <= p) {
            0 => T::zero(),
            k => self.cum[k - 1],
        }
    }

    fn integrate_quantile(&self, q0: T, q1: T) -> T {
        let mut acc = CompensatedSum::new();
        let start = self.quantile_index(q0);
        let mut lo = T::zero();
        if start > 0 {
            lo = self.cum[start - 1];
        }
        for i in start..self.values.len() {
            if lo >= q1 {
                break;
            }
            let hi = self.cum[i];
            let overlap = hi.min(q1) - lo.max(q0);
            if overlap > T::zero() {
                acc.add(self.values[i] * overlap);
            }
            lo = hi;
        }
        acc.total()
    }

    fn integrate_cdf(&self, p0: T, p1: T) -> T {
        let mut acc = CompensatedSum::new();
        let n = self.values.len();
        for i in 0..n {
            let lo = self.values[i].max(p0);
            let hi = if i + 1 < n { self.values[i + 1].min(p1) } else { p1 };
            if hi > lo {
                acc.add(self.cum[i] * (hi - lo));
            }
        }
        acc.total()
    }

    fn negate(&self) -> Self {
        Self::from_sorted(
            self.values.iter().rev().map(|&v| -v).collect(),
            self.probs.iter().rev().copied().collect(),
        )
    }
}

impl<T: Scalar> PwlQuantile<T> {
    pub fn knots(&self) -> impl Iterator<Item = (T, T)> + '_ {
        self.qs.iter().copied().zip(self.values.iter().copied())
    }

    pub fn qs(&self) -> &[T] {
        &self.qs
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    fn quantile(&self, q: T) -> T {
        let j = self.qs.partition_point(|&k| k < q);
        if j == 0 {
            return self.values[0];
        }
        let j = j.min(self.qs.len() - 1);
        lerp(q, self.qs[j - 1], self.qs[j], self.values[j - 1], self.values[j])
    }

    fn cdf(&self, p: T) -> T {
        let k = self.values.partition_point(|&v| v <= p);
        if k == 0 {
            return T::zero();
        }
        if k == self.values.len() {
            return T::one();
        }
        // values[k-1] <= p < values[k], so this segment is strictly increasing.
        lerp(p, self.values[k - 1], self.values[k], self.qs[k - 1], self.qs[k])
    }

    fn integrate_quantile(&self, q0: T, q1: T) -> T {
        let mut acc = CompensatedSum::new();
        for k in 0..self.qs.len() - 1 {
            let (qa, qb) = (self.qs[k], self.qs[k + 1]);
            if qb <= q0 {
                continue;
            }
            if qa >= q1 {
                break;
            }
            let a = qa.max(q0);
            let b = qb.min(q1);
            if b > a {
                let (ya, yb) = (self.values[k], self.values[k + 1]);
                let ca = lerp(a, qa, qb, ya, yb);
                let cb = lerp(b, qa, qb, ya, yb);
                acc.add((b - a) * (ca + cb) * T::half());
            }
        }
        acc.total()
    }

    fn integrate_cdf(&self, p0: T, p1: T) -> T {
        let mut acc = CompensatedSum::new();
        let n = self.values.len();
        for k in 0..n - 1 {
            let (ya, yb) = (self.values[k], self.values[k + 1]);
            if yb <= ya {
                continue;
            }
            let a = ya.max(p0);
            let b = yb.min(p1);
            if b > a {
                let (qa, qb) = (self.qs[k], self.qs[k + 1]);
                let fa = lerp(a, ya, yb, qa, qb);
                let fb = lerp(b, ya, yb, qa, qb);
                acc.add((b - a) * (fa + fb) * T::half());
            }
        }
        let top = self.values[n - 1].max(p0);
        if p1 > top {
            acc.add(p1 - top);
        }
        acc.total()
    }

    fn negate(&self) -> Self {
        Self {
            qs: self.qs.iter().rev().map(|&q| T::one() - q).collect(),
            values: self.values.iter().rev().map(|&v| -v).collect(),
        }
    }

    fn mean(&self) -> T {
        self.integrate_quantile(T::zero(), T::one())
    }
}

impl<T: Scalar> Distribution<T> {
    pub fn point(value: T) -> Self {
        Distribution::Discrete(Discrete::from_sorted(vec![value], vec![T::one()]))
    }

    /// Uniform on `[lo, hi]`; `lo == hi` gives a point mass.
    pub fn uniform(lo: T, hi: T) -> Result<Self> {
        RawDistribution::Uniform { lo, hi }.validate()
    }

    pub fn discrete(atoms: impl IntoIterator<Item = (T, T)>) -> Result<Self> {
        RawDistribution::Discrete {
            atoms: atoms.into_iter().map(|(value, prob)| Atom { value, prob }).collect(),
        }
        .validate()
    }

    pub fn pwl(knots: impl IntoIterator<Item = (T, T)>) -> Result<Self> {
        RawDistribution::Pwl {
            knots: knots.into_iter().map(|(q, value)| Knot { q, value }).collect(),
        }
        .validate()
    }

    pub fn as_discrete(&self) -> Option<&Discrete<T>> {
        match self {
            Distribution::Discrete(d) => Some(d),
            Distribution::Pwl(_) => None,
        }
    }

    pub fn to_raw(&self) -> RawDistribution<T> {
        match self {
            Distribution::Discrete(d) => RawDistribution::Discrete {
                atoms: d
                    .values
                    .iter()
                    .zip(&d.probs)
                    .map(|(&value, &prob)| Atom { value, prob })
                    .collect(),
            },
            Distribution::Pwl(p) => RawDistribution::Pwl {
                knots: p.knots().map(|(q, value)| Knot { q, value }).collect(),
            },
        }
    }

    /// Left-continuous generalized inverse of the CDF.
    pub fn quantile(&self, q: T) -> Result<T> {
        check_probability("q", q)?;
        Ok(self.quantile_unchecked(q))
    }

    pub(crate) fn quantile_unchecked(&self, q: T) -> T {
        match self {
            Distribution::Discrete(d) => d.values[d.quantile_index(q)],
            Distribution::Pwl(p) => p.quantile(q),
        }
    }

    /// `Pr[X <= p]`.
    pub fn cdf(&self, p: T) -> T {
        match self {
            Distribution::Discrete(d) => d.cdf(p),
            Distribution::Pwl(w) => w.cdf(p),
        }
    }

    /// Exact `∫_{q0}^{q1} c(q) dq`.
    pub fn integrate_quantile(&self, q0: T, q1: T) -> Result<T> {
        check_probability("q0", q0)?;
        check_probability("q1", q1)?;
        if q0 > q1 {
            return Err(domain(format!("inverted bounds: q0 = {q0} > q1 = {q1}")));
        }
        Ok(self.integrate_quantile_unchecked(q0, q1))
    }

    pub(crate) fn integrate_quantile_unchecked(&self, q0: T, q1: T) -> T {
        let q0 = q0.max(T::zero());
        let q1 = q1.min(T::one());
        if q1 <= q0 {
            return T::zero();
        }
        match self {
            Distribution::Discrete(d) => d.integrate_quantile(q0, q1),
            Distribution::Pwl(p) => p.integrate_quantile(q0, q1),
        }
    }

    /// Exact `∫_{p0}^{p1} F(p) dp`, the area under the CDF.
    pub fn integrate_cdf(&self, p0: T, p1: T) -> Result<T> {
        if p0 > p1 || p0.is_nan() || p1.is_nan() {
            return Err(domain(format!("inverted bounds: p0 = {p0} > p1 = {p1}")));
        }
        Ok(self.integrate_cdf_unchecked(p0, p1))
    }

    pub(crate) fn integrate_cdf_unchecked(&self, p0: T, p1: T) -> T {
        if p1 <= p0 {
            return T::zero();
        }
        match self {
            Distribution::Discrete(d) => d.integrate_cdf(p0, p1),
            Distribution::Pwl(p) => p.integrate_cdf(p0, p1),
        }
    }

    /// Inverse-transform sample for a uniform draw `u` in `[0, 1)`.
    pub fn sample(&self, u: T) -> Result<T> {
        if !(u >= T::zero() && u < T::one()) {
            return Err(domain(format!("u = {u} is outside [0, 1)")));
        }
        Ok(self.quantile_unchecked(u))
    }

    /// Distribution of `-X`.
    pub fn negate(&self) -> Self {
        match self {
            Distribution::Discrete(d) => Distribution::Discrete(d.negate()),
            Distribution::Pwl(p) => Distribution::Pwl(p.negate()),
        }
    }

    /// Mean computed directly from atoms or knots.
    pub fn mean(&self) -> T {
        match self {
            Distribution::Discrete(d) => d
                .values
                .iter()
                .zip(&d.probs)
                .map(|(&v, &p)| v * p)
                .collect::<CompensatedSum<T>>()
                .total(),
            Distribution::Pwl(p) => p.mean(),
        }
    }

    pub fn support_min(&self) -> T {
        match self {
            Distribution::Discrete(d) => d.values[0],
            Distribution::Pwl(p) => p.values[0],
        }
    }

    pub fn support_max(&self) -> T {
        match self {
            Distribution::Discrete(d) => d.values[d.values.len() - 1],
            Distribution::Pwl(p) => p.values[p.values.len() - 1],
        }
    }

    /// Values where the CDF has a kink or jump: atoms, or knot values.
    pub fn breakpoints(&self) -> &[T] {
        match self {
            Distribution::Discrete(d) => &d.values,
            Distribution::Pwl(p) => &p.values,
        }
    }

    /// `E[f(X)]` for a vector-valued `f`, exact on atoms and flat segments,
    /// adaptive quadrature over the quantile domain on sloped segments.
    pub fn expect<F, const N: usize>(&self, f: F) -> [T; N]
    where
        F: Fn(T) -> [T; N],
    {
        let mut acc = [CompensatedSum::new(); N];
        let mut add = |w: T, xs: [T; N]| {
            for (a, x) in acc.iter_mut().zip(xs) {
                a.add(w * x);
            }
        };
        match self {
            Distribution::Discrete(d) => {
                for i in 0..d.len() {
                    let w = d.width(i);
                    if w > T::zero() {
                        add(w, f(d.values[i]));
                    }
                }
            }
            Distribution::Pwl(p) => {
                for k in 0..p.qs.len() - 1 {
                    let (qa, qb) = (p.qs[k], p.qs[k + 1]);
                    let (ya, yb) = (p.values[k], p.values[k + 1]);
                    if ya == yb {
                        add(qb - qa, f(ya));
                    } else {
                        let g = |q: T| f(lerp(q, qa, qb, ya, yb));
                        add(T::one(), adaptive_simpson(&g, qa, qb, T::quad_tol()));
                    }
                }
            }
        }
        std::array::from_fn(|i| acc[i].total())
    }
}
