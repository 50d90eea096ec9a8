//! Exact summation helpers.
//!
//! The coupling factors `β = C μ` are computed as correctly rounded dot products so
//! that every route that computes the same real number (direct summation, or the
//! control-packet channel in exact arithmetic) lands on the same `f64`.

/// Error-free product: `a * b == hi + lo` exactly (barring underflow, and
/// overflow of the splitting for `|a|, |b| > 2^996`).
#[inline]
pub fn two_product(a: f64, b: f64) -> (f64, f64) {
    let hi = a * b;
    if cfg!(target_feature = "fma") {
        return (hi, a.mul_add(b, -hi));
    }
    // Veltkamp splitting; avoids the software fma fallback on targets without one.
    let (ah, al) = split(a);
    let (bh, bl) = split(b);
    let lo = al * bl - (((hi - ah * bh) - al * bh) - ah * bl);
    (hi, lo)
}

#[inline]
fn split(a: f64) -> (f64, f64) {
    let c = 134_217_729.0 * a;
    let hi = c - (c - a);
    (hi, a - hi)
}

/// Running exact sum using Shewchuk's non-overlapping partials.
#[derive(Debug, Clone, Default)]
pub struct ExactSum {
    partials: Vec<f64>,
}

impl ExactSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, mut x: f64) {
        let mut i = 0;
        for k in 0..self.partials.len() {
            let mut y = self.partials[k];
            if x.abs() < y.abs() {
                std::mem::swap(&mut x, &mut y);
            }
            let hi = x + y;
            let lo = y - (hi - x);
            if lo != 0.0 {
                self.partials[i] = lo;
                i += 1;
            }
            x = hi;
        }
        self.partials.truncate(i);
        self.partials.push(x);
    }

    /// The exact sum rounded to nearest, ties to even.
    pub fn value(&self) -> f64 {
        let p = &self.partials;
        let mut n = p.len();
        if n == 0 {
            return 0.0;
        }
        n -= 1;
        let mut hi = p[n];
        let mut lo = 0.0;
        while n > 0 {
            let x = hi;
            n -= 1;
            let y = p[n];
            hi = x + y;
            let yr = hi - x;
            lo = y - yr;
            if lo != 0.0 {
                break;
            }
        }
        // Half-way cases: the remaining partials decide the rounding direction.
        if n > 0 && ((lo < 0.0 && p[n - 1] < 0.0) || (lo > 0.0 && p[n - 1] > 0.0)) {
            let y = lo * 2.0;
            let x = hi + y;
            let yr = x - hi;
            if y == yr {
                hi = x;
            }
        }
        hi
    }
}

/// Correctly rounded sum of `xs`.
pub fn fsum<I: IntoIterator<Item = f64>>(xs: I) -> f64 {
    let mut acc = ExactSum::new();
    for x in xs {
        acc.add(x);
    }
    acc.value()
}

/// Correctly rounded dot product `Σ a_i b_i`.
///
/// A compensated sum settles almost every input; the exact accumulator runs only
/// when the compensated result could sit on a rounding boundary.
pub fn dot_rounded(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    if let Some(v) = dot2_if_certain(a, b) {
        return v;
    }
    let mut acc = ExactSum::new();
    for (&x, &y) in a.iter().zip(b) {
        let (hi, lo) = two_product(x, y);
        acc.add(hi);
        if lo != 0.0 {
            acc.add(lo);
        }
    }
    acc.value()
}

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

/// Compensated dot product, returned only if provably correctly rounded.
///
/// Before the final addition `p + s` is within `γ_n² Σ|a_i b_i|` of the exact
/// value, `γ_n = n u / (1 - n u)`. Splitting `p + s = r + e` exactly, `r` is the
/// rounded result whenever `|e|` plus that bound stays under half the smaller
/// neighbouring gap of `r`.
fn dot2_if_certain(a: &[f64], b: &[f64]) -> Option<f64> {
    let n = a.len();
    if n == 0 {
        return Some(0.0);
    }
    let (mut p, mut s) = two_product(a[0], b[0]);
    let mut abs_sum = p.abs();
    for i in 1..n {
        let (h, r) = two_product(a[i], b[i]);
        let (np, q) = two_sum(p, h);
        p = np;
        s += q + r;
        abs_sum += h.abs();
    }
    // Outside this range the error-free transformations may lose bits.
    if !(abs_sum == 0.0 || (1e-250..1e250).contains(&abs_sum)) {
        return None;
    }
    let (r, e) = two_sum(p, s);
    let u = f64::EPSILON / 2.0;
    let nu = n as f64 * u;
    let gamma = nu / (1.0 - nu);
    // The factor 2 absorbs rounding in `abs_sum` and in the bound itself.
    let bound = 2.0 * gamma * gamma * abs_sum;
    if r == 0.0 {
        return (e == 0.0 && bound == 0.0).then_some(0.0);
    }
    let bits = r.abs().to_bits();
    let above = f64::from_bits(bits + 1) - r.abs();
    let below = r.abs() - f64::from_bits(bits - 1);
    (e.abs() + bound < 0.5 * above.min(below)).then_some(r)
}

/// Mean and population standard deviation, order independent.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = fsum(xs.iter().copied()) / n;
    let var = fsum(xs.iter().map(|x| (x - mean) * (x - mean))) / n;
    (mean, var.max(0.0).sqrt())
}
