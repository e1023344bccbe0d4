//! Power-law pair kernels and certified lattice sums.
//!
//! Sums over `Z^d` are organised by columns: for an integer offset `a` along
//! the first axis, `T(a)` is the sum of `|x|^-p` over the transverse
//! hyperplane `x = (a, y)`, `y in Z^(d-1)`. Every other quantity in the crate
//! (the critical coupling, stripe energies, periodised potentials) is a
//! weighted series in `T`, so the truncation bookkeeping lives here.
//!
//! For large `a` the transverse sum is evaluated with Poisson summation,
//! which gives the leading term `kappa * a^(d-1-p)` plus a correction whose
//! size is bounded explicitly by shifting the integration contour to
//! `Im y = a / sqrt(2)`. For small `a` the transverse sum is done directly
//! with a trapezoid bracket on the remaining tail.

use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};
use statrs::function::beta::{beta_reg, ln_beta};
use statrs::function::gamma::gamma;

use crate::error::{domain, Error, Result};

const EPS: f64 = f64::EPSILON;

/// Relative accuracy we trust from the regularised incomplete beta function.
const BETA_REL_ERR: f64 = 1e-12;

/// Relative accuracy allowed for the Gamma-function constant `kappa`.
const KAPPA_REL_ERR: f64 = 1e-14;

/// Relative size of the Poisson correction below which the asymptotic form
/// of `T` is used.
const POISSON_SWITCH: f64 = 1e-16;

/// A value together with a rigorous bound on its error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SumResult {
    pub value: f64,
    pub tail_bound: f64,
    pub radius: u64,
}

impl SumResult {
    pub fn new(value: f64, tail_bound: f64, radius: u64) -> Self {
        SumResult { value, tail_bound, radius }
    }

    pub fn exact(value: f64) -> Self {
        SumResult { value, tail_bound: 0.0, radius: 0 }
    }

    pub fn lo(&self) -> f64 {
        self.value - self.tail_bound
    }

    pub fn hi(&self) -> f64 {
        self.value + self.tail_bound
    }

    /// Whether `x` lies in the certified interval.
    pub fn contains(&self, x: f64) -> bool {
        (x - self.value).abs() <= self.tail_bound
    }

    /// Whether the two certified intervals intersect, with `slop` extra room.
    pub fn agrees_with(&self, other: &SumResult, slop: f64) -> bool {
        (self.value - other.value).abs() <= self.tail_bound + other.tail_bound + slop
    }

    /// Builds a result from a bracket `[lo, hi]`.
    pub fn from_bracket(lo: f64, hi: f64, radius: u64) -> Self {
        SumResult { value: 0.5 * (lo + hi), tail_bound: 0.5 * (hi - lo).abs(), radius }
    }
}

impl Add for SumResult {
    type Output = SumResult;
    fn add(self, o: SumResult) -> SumResult {
        SumResult {
            value: self.value + o.value,
            tail_bound: self.tail_bound + o.tail_bound + EPS * (self.value + o.value).abs(),
            radius: self.radius.max(o.radius),
        }
    }
}

impl Sub for SumResult {
    type Output = SumResult;
    fn sub(self, o: SumResult) -> SumResult {
        self + (-o)
    }
}

impl Neg for SumResult {
    type Output = SumResult;
    fn neg(self) -> SumResult {
        SumResult { value: -self.value, ..self }
    }
}

impl Mul<f64> for SumResult {
    type Output = SumResult;
    fn mul(self, c: f64) -> SumResult {
        SumResult {
            value: self.value * c,
            tail_bound: self.tail_bound * c.abs() + EPS * (self.value * c).abs(),
            radius: self.radius,
        }
    }
}

impl std::iter::Sum for SumResult {
    fn sum<I: Iterator<Item = SumResult>>(iter: I) -> SumResult {
        let mut acc = Accumulator::default();
        let mut tail = 0.0;
        let mut radius = 0;
        for r in iter {
            acc.add(r.value);
            tail += r.tail_bound;
            radius = radius.max(r.radius);
        }
        SumResult::new(acc.value(), tail + acc.rounding(), radius)
    }
}

/// Neumaier compensated summation that also tracks a rounding allowance.
#[derive(Clone, Copy, Debug, Default)]
pub struct Accumulator {
    sum: f64,
    comp: f64,
    abs: f64,
}

impl Accumulator {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
        self.abs += x.abs();
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }

    /// Bound on accumulated rounding, including one ulp per summand for the
    /// evaluation of the summand itself.
    pub fn rounding(&self) -> f64 {
        6.0 * EPS * self.abs
    }

    pub fn result(&self, extra_tail: f64, radius: u64) -> SumResult {
        SumResult::new(self.value(), extra_tail + self.rounding(), radius)
    }
}

/// `|x|^-p` for a nonzero lattice vector.
pub fn kernel_value(x: &[i64], p: f64) -> Result<f64> {
    let r2: f64 = x.iter().map(|&c| (c as f64) * (c as f64)).sum();
    if r2 == 0.0 {
        return domain("kernel evaluated at the zero vector");
    }
    Ok(r2.powf(-0.5 * p))
}

/// Upper bound on `sum_{x in Z^d, |x| > R} |x|^-p`.
///
/// Each lattice point is compared with the integral over its unit cube.
/// With `s = sqrt(d)/2` the cube around `x` lies in `|y| >= |x| - s` and
/// `|x|^-p <= (1 + s/R)^p |y|^-p` on it, so for `R > s`
///
/// `tail <= (1 + s/R)^p * S_(d-1) * (R - s)^(d-p) / (p - d)`
///
/// with `S_(d-1) = 2 pi^(d/2) / Gamma(d/2)` the area of the unit sphere.
/// Below `R = 16` (or `2s + 1` in high dimension) the shell up to that
/// radius is summed exactly first, which keeps the bound tight and monotone.
pub fn tail_bound(r: u64, p: f64, d: u32) -> Result<f64> {
    if d == 0 {
        return domain("dimension must be at least 1");
    }
    if p <= d as f64 {
        return domain(format!("tail of |x|^-p diverges for p = {p} <= d = {d}"));
    }
    if r == 0 {
        return domain("radius must be at least 1");
    }
    let df = d as f64;
    let s = df.sqrt() / 2.0;
    let rf = r as f64;
    let r2 = if d <= 3 { 16 } else { (2.0 * s).ceil() as i64 + 1 };
    if rf >= r2 as f64 {
        return Ok(integral_tail(rf, p, d));
    }
    let mut acc = Accumulator::default();
    for_each_in_cube(d, r2, |x| {
        let n2: i64 = x.iter().map(|c| c * c).sum();
        let n = (n2 as f64).sqrt();
        if n2 > 0 && n > rf && n <= r2 as f64 {
            acc.add((n2 as f64).powf(-0.5 * p));
        }
    });
    Ok(acc.value() + acc.rounding() + integral_tail(r2 as f64, p, d))
}

fn integral_tail(r: f64, p: f64, d: u32) -> f64 {
    let df = d as f64;
    let s = df.sqrt() / 2.0;
    let area = 2.0 * std::f64::consts::PI.powf(df / 2.0) / gamma(df / 2.0);
    (1.0 + s / r).powf(p) * area * (r - s).powf(df - p) / (p - df)
}

fn for_each_in_cube(d: u32, r: i64, mut f: impl FnMut(&[i64])) {
    let d = d as usize;
    let mut x = vec![-r; d];
    loop {
        f(&x);
        let mut i = 0;
        loop {
            if i == d {
                return;
            }
            if x[i] < r {
                x[i] += 1;
                break;
            }
            x[i] = -r;
            i += 1;
        }
    }
}

/// `int_m^inf (b^2 + t^2)^(-q/2) dt` for `b > 0`, `q > 1`.
fn line_integral(b: f64, m: f64, q: f64) -> f64 {
    let x = b * b / (b * b + m * m);
    let a = 0.5 * (q - 1.0);
    0.5 * b.powf(1.0 - q) * beta_reg(a, 0.5, x) * ln_beta(a, 0.5).exp()
}

/// Bracket on `sum_{t >= n} (b^2 + t^2)^(-q/2)` via the trapezoid rule for
/// a convex summand. Requires `n >= b`.
fn line_tail(b: f64, q: f64, n: f64) -> (f64, f64) {
    let g = (b * b + n * n).powf(-0.5 * q);
    let dg = q * n * (b * b + n * n).powf(-0.5 * q - 1.0);
    let int = line_integral(b, n, q);
    let base = int + 0.5 * g;
    (base - BETA_REL_ERR * int, base + 0.125 * dg + BETA_REL_ERR * int)
}

/// Bracket on `sum_{n >= n0} (off + n * stride)^-s` for `s > 1`, `off + n0 * stride > 0`.
pub fn shifted_power_tail(off: f64, stride: f64, n0: u64, s: f64) -> (f64, f64) {
    let t0 = off + n0 as f64 * stride;
    let int = t0.powf(1.0 - s) / (stride * (s - 1.0));
    let g = t0.powf(-s);
    let dg = s * stride * t0.powf(-s - 1.0);
    let base = int + 0.5 * g;
    (base * (1.0 - 2.0 * EPS), base + 0.125 * dg + 2.0 * EPS * base)
}

/// Bracket on `sum_{a >= n0} a^-s` for `s > 1`, `n0 >= 1`.
pub fn power_tail(n0: u64, s: f64) -> (f64, f64) {
    shifted_power_tail(0.0, 1.0, n0, s)
}

/// `zeta(s)` with a certified error.
pub fn zeta(s: f64) -> Result<SumResult> {
    if s <= 1.0 {
        return domain(format!("zeta diverges at s = {s}"));
    }
    let n = 4096u64;
    let mut acc = Accumulator::default();
    for a in (1..n).rev() {
        acc.add((a as f64).powf(-s));
    }
    let (lo, hi) = power_tail(n, s);
    let t = SumResult::from_bracket(lo, hi, n);
    Ok(acc.result(t.tail_bound, n) + SumResult::exact(t.value))
}

/// Column sums of `|x|^-p` on `Z^d` for `d` in 1..=3.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Columns {
    pub d: u32,
    pub p: f64,
}

impl Columns {
    pub fn new(d: u32, p: f64) -> Result<Self> {
        if !(1..=3).contains(&d) {
            return domain(format!("column sums are implemented for d in 1..=3, got {d}"));
        }
        if p <= d as f64 {
            return domain(format!("transverse sums diverge for p = {p} <= d = {d}"));
        }
        Ok(Columns { d, p })
    }

    /// Exponent of the decay `T(a) ~ kappa * a^-sigma`.
    pub fn sigma(&self) -> f64 {
        self.p - self.d as f64 + 1.0
    }

    /// Leading coefficient of `T(a)`.
    pub fn kappa(&self) -> f64 {
        match self.d {
            1 => 1.0,
            2 => (ln_beta(0.5 * (self.p - 1.0), 0.5)).exp(),
            _ => 2.0 * std::f64::consts::PI / (self.p - 2.0),
        }
    }

    /// Relative size bound of the Poisson correction at offset `a`.
    pub fn poisson_rel(&self, a: f64) -> f64 {
        let q = std::f64::consts::SQRT_2 * std::f64::consts::PI * a;
        let e = (-q).exp();
        match self.d {
            1 => 0.0,
            2 => 2.0 * 2f64.powf(0.5 * (self.p - 1.0)) * e / (1.0 - e),
            _ => 8.0 * 2f64.powf(0.5 * (self.p - 2.0)) * e / ((1.0 - e) * (1.0 - e)),
        }
    }

    /// Smallest integer offset from which the Poisson form is used.
    pub fn asymptotic_start(&self) -> u64 {
        let mut a = 1u64;
        while self.poisson_rel(a as f64) > POISSON_SWITCH {
            a += 1;
        }
        a
    }

    /// `T(a) = sum_{y in Z^(d-1)} (a^2 + |y|^2)^(-p/2)` for real `a > 0`.
    pub fn transverse(&self, a: f64) -> SumResult {
        debug_assert!(a > 0.0);
        match self.d {
            1 => SumResult::new(a.powf(-self.p), EPS * a.powf(-self.p), 0),
            2 => {
                let rel = self.poisson_rel(a);
                if rel <= POISSON_SWITCH {
                    let v = self.kappa() * a.powf(1.0 - self.p);
                    SumResult::new(v, v * (rel + KAPPA_REL_ERR), 0)
                } else {
                    line_sum(a, self.p)
                }
            }
            _ => {
                let rel = self.poisson_rel(a);
                if rel <= POISSON_SWITCH {
                    let v = self.kappa() * a.powf(2.0 - self.p);
                    SumResult::new(v, v * (rel + KAPPA_REL_ERR), 0)
                } else {
                    self.plane_sum_direct(a)
                }
            }
        }
    }

    fn plane_sum_direct(&self, a: f64) -> SumResult {
        let line = Columns { d: 2, p: self.p };
        let m = (a.ceil() as u64).max(24);
        let mut acc = Accumulator::default();
        let mut tail = 0.0;
        for y in (1..=m).rev() {
            let r = (a * a + (y * y) as f64).sqrt();
            let t = line.transverse(r);
            acc.add(2.0 * t.value);
            tail += 2.0 * t.tail_bound;
        }
        let t0 = line.transverse(a);
        acc.add(t0.value);
        tail += t0.tail_bound;
        // beyond m the inner sums are asymptotic to far below double precision
        let k = line.kappa();
        let (lo, hi) = line_tail(a, self.p - 1.0, (m + 1) as f64);
        let rel = line.poisson_rel(m as f64) + KAPPA_REL_ERR;
        let lo = 2.0 * k * lo * (1.0 - rel);
        let hi = 2.0 * k * hi * (1.0 + rel);
        acc.add(0.5 * (lo + hi));
        acc.result(tail + 0.5 * (hi - lo), m)
    }

    /// `sum_{a >= 1} a T(a)`.
    pub fn critical_coupling(&self, tol: f64) -> Result<SumResult> {
        if self.p <= self.d as f64 + 1.0 {
            return domain(format!(
                "critical coupling diverges for p = {} <= d + 1 = {}",
                self.p,
                self.d + 1
            ));
        }
        if !(tol > 0.0) {
            return domain("tolerance must be positive");
        }
        self.moment_series(1.0, tol)
    }

    /// `sum_{a >= 1} a^k T(a)` for `k` in {0, 1}, with truncation chosen to
    /// meet `tol`.
    fn moment_series(&self, k: f64, tol: f64) -> Result<SumResult> {
        let start = self.asymptotic_start().max(16);
        let mut n = 64u64.max(start);
        loop {
            let r = self.moment_series_at(k, n);
            if r.tail_bound <= tol {
                return Ok(r);
            }
            if n > 1 << 22 {
                return Err(Error::Budget(format!(
                    "could not reach tolerance {tol:e}, best bound {:e}",
                    r.tail_bound
                )));
            }
            n *= 2;
        }
    }

    fn moment_series_at(&self, k: f64, n: u64) -> SumResult {
        let mut acc = Accumulator::default();
        let mut tail = 0.0;
        for a in (1..n).rev() {
            let t = self.transverse(a as f64);
            let w = (a as f64).powf(k);
            acc.add(w * t.value);
            tail += w * t.tail_bound;
        }
        let (lo, hi) = self.asymptotic_tail(n, self.sigma() - k);
        acc.add(0.5 * (lo + hi));
        acc.result(tail + 0.5 * (hi - lo), n)
    }

    /// Bracket on `sum_{a >= n} kappa a^-s (1 +- delta(n))`, valid once `n`
    /// is past the Poisson switch.
    pub fn asymptotic_tail(&self, n: u64, s: f64) -> (f64, f64) {
        let (lo, hi) = power_tail(n, s);
        let rel = self.poisson_rel(n as f64) + KAPPA_REL_ERR;
        let k = self.kappa();
        (k * lo * (1.0 - rel), k * hi * (1.0 + rel))
    }

    /// `v_L(x) = sum_n T(|x + nL|)`; `l = None` gives `v_inf = T`.
    pub fn periodized(&self, x: u64, l: Option<u64>) -> Result<SumResult> {
        let Some(l) = l else {
            if x == 0 {
                return domain("v_inf(0) is undefined");
            }
            return Ok(self.transverse(x as f64));
        };
        if l == 0 || x % l == 0 {
            return domain(format!("v_L undefined for x = {x}, L = {l}"));
        }
        let r = x % l;
        let start = self.asymptotic_start().max(64);
        let mut parts = Vec::new();
        for off in [r, l - r] {
            let mut acc = Accumulator::default();
            let mut tail = 0.0;
            let mut n = 0u64;
            while off + n * l < start {
                let t = self.transverse((off + n * l) as f64);
                acc.add(t.value);
                tail += t.tail_bound;
                n += 1;
            }
            let (lo, hi) = shifted_power_tail(off as f64, l as f64, n, self.sigma());
            let rel = self.poisson_rel((off + n * l) as f64) + KAPPA_REL_ERR;
            let k = self.kappa();
            let (lo, hi) = (k * lo * (1.0 - rel), k * hi * (1.0 + rel));
            acc.add(0.5 * (lo + hi));
            parts.push(acc.result(tail + 0.5 * (hi - lo), off + n * l));
        }
        Ok(parts[0] + parts[1])
    }

    /// `Z = sum_{x != 0} |x|^-p` over the whole lattice.
    pub fn lattice_zeta(&self) -> Result<SumResult> {
        let columns = self.moment_series(0.0, 1e-14)?;
        let plane = if self.d == 1 {
            SumResult::exact(0.0)
        } else {
            Columns::new(self.d - 1, self.p)?.lattice_zeta()?
        };
        Ok(columns * 2.0 + plane)
    }
}

/// `sum_{y in Z} (b^2 + y^2)^(-q/2)` by direct summation with a trapezoid
/// bracket on the tail.
fn line_sum(b: f64, q: f64) -> SumResult {
    let mut m = ((2.0 * b).ceil() as u64 + 8).max(64);
    let scale = ln_beta(0.5 * (q - 1.0), 0.5).exp() * b.powf(1.0 - q);
    loop {
        let n = (m + 1) as f64;
        let dg = q * n * (b * b + n * n).powf(-0.5 * q - 1.0);
        if 0.25 * dg <= 1e-17 * scale || m >= 1 << 20 {
            break;
        }
        m *= 2;
    }
    let mut acc = Accumulator::default();
    for y in (1..=m).rev() {
        acc.add(2.0 * (b * b + (y * y) as f64).powf(-0.5 * q));
    }
    acc.add(b.powf(-q));
    let (lo, hi) = line_tail(b, q, (m + 1) as f64);
    acc.add(lo + hi);
    acc.result(hi - lo, m)
}

/// Model parameters. `tau` is always derived from `j` and the cached
/// critical coupling.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub d: u32,
    pub p: f64,
    pub j: f64,
    jc: SumResult,
}

impl ModelParams {
    pub fn new(d: u32, p: f64, j: f64) -> Result<Self> {
        if !(j >= 0.0) {
            return domain(format!("coupling must be nonnegative, got {j}"));
        }
        // plane sums carry truncation error of order 1e-7 in three dimensions
        let tol = if d >= 3 { 1e-6 } else { 1e-13 };
        let jc = Columns::new(d, p)?.critical_coupling(tol)?;
        Ok(ModelParams { d, p, j, jc })
    }

    /// Parameters with `J = J_c + tau / 2`.
    pub fn from_tau(d: u32, p: f64, tau: f64) -> Result<Self> {
        let base = Self::new(d, p, 0.0)?;
        base.with_coupling(base.jc.value + 0.5 * tau)
    }

    pub fn with_coupling(&self, j: f64) -> Result<Self> {
        if !(j >= 0.0) {
            return domain(format!("coupling must be nonnegative, got {j}"));
        }
        Ok(ModelParams { j, ..*self })
    }

    pub fn jc(&self) -> SumResult {
        self.jc
    }

    pub fn tau(&self) -> f64 {
        2.0 * (self.j - self.jc.value)
    }

    pub fn tau_result(&self) -> SumResult {
        SumResult::new(self.tau(), 2.0 * self.jc.tail_bound + 4.0 * EPS * self.j, 0)
    }

    pub fn columns(&self) -> Columns {
        Columns { d: self.d, p: self.p }
    }

    /// The standing assumption of the geometric part, `p > 2d`.
    pub fn require_geometric(&self) -> Result<()> {
        if self.p <= 2.0 * self.d as f64 {
            return domain(format!("geometric bounds need p > 2d, got p = {}, d = {}", self.p, self.d));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute_line(b: f64, q: f64, m: i64) -> f64 {
        let mut acc = Accumulator::default();
        for y in -m..=m {
            acc.add((b * b + (y * y) as f64).powf(-0.5 * q));
        }
        acc.value()
    }

    #[test]
    fn kernel_values() {
        assert_eq!(kernel_value(&[1, 0], 5.0).unwrap(), 1.0);
        assert!((kernel_value(&[3, 4], 5.0).unwrap() - 3.2e-4).abs() < 1e-18);
        assert!((kernel_value(&[1, 1], 6.0).unwrap() - 0.125).abs() < 1e-16);
        assert!(kernel_value(&[0, 0], 5.0).is_err());
    }

    #[test]
    fn transverse_matches_brute_force_line() {
        let c = Columns::new(2, 5.0).unwrap();
        for a in [1.0, 2.0, 3.5, 8.0, 9.0, 12.0, 40.0] {
            let t = c.transverse(a);
            // tail of the brute sum beyond 2e5 is below 1e-21
            let b = brute_line(a, 5.0, 200_000);
            assert!((t.value - b).abs() <= t.tail_bound + 1e-15 * b, "a={a}: {t:?} vs {b}");
            assert!(t.tail_bound <= 1e-13 * t.value);
        }
    }

    #[test]
    fn poisson_switch_is_continuous() {
        let c = Columns::new(2, 5.0).unwrap();
        let a0 = c.asymptotic_start() as f64;
        let direct = line_sum(a0, 5.0);
        let asym = c.transverse(a0);
        assert!(direct.agrees_with(&asym, 0.0));
    }

    #[test]
    fn plane_sums_match_brute_force() {
        let c = Columns::new(3, 7.0).unwrap();
        for a in [1.0, 2.0, 5.0, 11.0] {
            let t = c.transverse(a);
            let m = 400i64;
            let mut acc = Accumulator::default();
            for y in -m..=m {
                for z in -m..=m {
                    acc.add((a * a + (y * y + z * z) as f64).powf(-3.5));
                }
            }
            // neglected part is below 2 pi m^-5 / 5
            let slack = 2.0 * std::f64::consts::PI * (m as f64).powi(-5) / 5.0;
            assert!((t.value - acc.value()).abs() <= t.tail_bound + slack + 1e-14, "a={a}");
        }
    }

    #[test]
    fn critical_coupling_against_double_sum() {
        // independent oracle: brute double sum over a square with the
        // integral tail bound for the rest
        let jc = Columns::new(2, 5.0).unwrap().critical_coupling(1e-13).unwrap();
        let r = 1500i64;
        let mut acc = Accumulator::default();
        for a in 1..=r {
            for y in -r..=r {
                let n2 = (a * a + y * y) as f64;
                acc.add(a as f64 * n2.powf(-2.5));
            }
        }
        // a / |x|^5 <= |x|^-4 and the square contains the ball of radius r
        let tail = 0.5 * tail_bound(r as u64, 4.0, 2).unwrap();
        let brute = acc.value();
        assert!(brute <= jc.hi());
        assert!(jc.lo() <= brute + tail, "{jc:?} brute={brute} tail={tail}");
        assert!(jc.value > 1.082323, "strictly above zeta(4)");
    }

    #[test]
    fn critical_coupling_limits_and_monotonicity() {
        let big = Columns::new(2, 60.0).unwrap().critical_coupling(1e-12).unwrap();
        assert!((big.value - 1.0).abs() < 1e-8);
        let z4 = std::f64::consts::PI.powi(4) / 90.0;
        let d1 = Columns::new(1, 5.0).unwrap().critical_coupling(1e-12).unwrap();
        assert!((d1.value - z4).abs() < 1e-11);
        let mut prev = f64::INFINITY;
        for k in 0..12 {
            let p = 3.5 + 0.5 * k as f64;
            let jc = Columns::new(2, p).unwrap().critical_coupling(1e-10).unwrap();
            assert!(jc.hi() < prev);
            prev = jc.lo();
        }
        assert!(Columns::new(2, 3.0).unwrap().critical_coupling(1e-8).is_err());
    }

    #[test]
    fn v_inf_one_against_line_oracle() {
        let c = Columns::new(2, 5.0).unwrap();
        let v = c.periodized(1, None).unwrap();
        let m = 100_000i64;
        let brute = brute_line(1.0, 5.0, m);
        // tail beyond |y| = 1e5 is at most 2 * m^-4 / 4
        assert!((v.value - brute).abs() <= v.tail_bound + 0.5 * (m as f64).powi(-4) + 1e-15);
        assert!(v.value >= 1.0);
    }

    #[test]
    fn periodized_symmetry_and_monotone_limit() {
        let c = Columns::new(2, 5.0).unwrap();
        for l in [5u64, 8, 13] {
            for x in 1..l {
                let a = c.periodized(x, Some(l)).unwrap();
                let b = c.periodized(l - x, Some(l)).unwrap();
                assert!(a.agrees_with(&b, 0.0));
            }
        }
        let inf = c.periodized(3, None).unwrap();
        let mut prev = f64::INFINITY;
        for l in [8u64, 16, 32, 64, 128] {
            let v = c.periodized(3, Some(l)).unwrap();
            assert!(v.value < prev && v.value > inf.value);
            prev = v.value;
        }
        assert!(c.periodized(6, Some(6)).is_err());
    }

    #[test]
    fn tail_bound_properties() {
        // exact 1D tail: sum_{|x| > 10} |x|^-3 = 2 (zeta(3) - sum_{1..=10})
        let z3 = zeta(3.0).unwrap().value;
        let head: f64 = (1..=10).map(|a| (a as f64).powi(-3)).sum();
        let exact = 2.0 * (z3 - head);
        assert!(tail_bound(10, 3.0, 1).unwrap() >= exact);
        for d in 1..=3u32 {
            let p = 2.0 * d as f64 + 1.0;
            let mut prev = f64::INFINITY;
            for r in 1..60u64 {
                let t = tail_bound(r, p, d).unwrap();
                assert!(t < prev, "d={d} r={r}");
                prev = t;
            }
            assert!(tail_bound(1 << 20, p, d).unwrap() < 1e-10);
        }
        assert!(tail_bound(3, 2.0, 2).is_err());
    }

    #[test]
    fn tail_bound_dominates_actual_2d_tail() {
        let z = Columns::new(2, 5.0).unwrap().lattice_zeta().unwrap();
        for r in [1u64, 2, 5, 20] {
            let mut acc = Accumulator::default();
            let ri = r as i64;
            for x in -ri..=ri {
                for y in -ri..=ri {
                    let n2 = x * x + y * y;
                    if n2 > 0 && n2 <= ri * ri {
                        acc.add((n2 as f64).powf(-2.5));
                    }
                }
            }
            let actual = z.value - acc.value();
            assert!(tail_bound(r, 5.0, 2).unwrap() >= actual - z.tail_bound);
        }
    }

    #[test]
    fn recomputation_at_double_radius_stays_inside() {
        let c = Columns::new(2, 5.0).unwrap();
        let a = c.moment_series_at(1.0, 256);
        let b = c.moment_series_at(1.0, 512);
        assert!((a.value - b.value).abs() <= a.tail_bound);
    }

    #[test]
    fn params_derive_tau() {
        let p = ModelParams::new(2, 5.0, 1.0).unwrap();
        assert!((p.tau() - 2.0 * (1.0 - p.jc().value)).abs() < 1e-15);
        let q = ModelParams::from_tau(2, 5.0, -0.01).unwrap();
        assert!((q.tau() + 0.01).abs() < 1e-14);
    }
}
