//! Striped-phase energetics.
//!
//! All energies are measured relative to the uniform state and are series in
//! the column sums `T(a)` of [`crate::kernel::Columns`]. With `tri(a)` the
//! distance from `a` to the nearest multiple of `2h`,
//!
//! `e_s(h) = tau/h + (2/h) sum_{a>h} (a - tri(a)) T(a)`.

use std::fmt::Write as _;
use std::sync::OnceLock;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::kernel::{power_tail, Accumulator, Columns, ModelParams, SumResult};

const TABLE_LEN: u64 = 8192;
const EPS: f64 = f64::EPSILON;

/// Widths `h_1..h_n` of minus stripes and the spacings `w_1..w_(n-1)`
/// between them, left to right.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StripeSequence {
    pub widths: Vec<u64>,
    pub spacings: Vec<u64>,
}

impl StripeSequence {
    pub fn new(widths: Vec<u64>, spacings: Vec<u64>) -> Result<Self> {
        if widths.is_empty() {
            return domain("a stripe sequence needs at least one stripe");
        }
        if spacings.len() + 1 != widths.len() {
            return domain(format!(
                "{} widths need {} spacings, got {}",
                widths.len(),
                widths.len() - 1,
                spacings.len()
            ));
        }
        if widths.iter().chain(&spacings).any(|&v| v == 0) {
            return domain("widths and spacings must be positive");
        }
        Ok(StripeSequence { widths, spacings })
    }

    /// Parses the interleaved form `h1,w1,h2,...,hn`.
    pub fn parse(s: &str) -> Result<Self> {
        let vals: Vec<u64> = s
            .split(',')
            .map(|t| t.trim().parse::<u64>().map_err(|e| Error::Parse(format!("{t:?}: {e}"))))
            .collect::<Result<_>>()?;
        if vals.len() % 2 == 0 {
            return domain("sequence must alternate widths and spacings and end with a width");
        }
        let widths = vals.iter().step_by(2).copied().collect();
        let spacings = vals.iter().skip(1).step_by(2).copied().collect();
        Self::new(widths, spacings)
    }

    pub fn len(&self) -> usize {
        self.widths.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Total horizontal extent from the first to the last stripe.
    pub fn span(&self) -> u64 {
        self.widths.iter().sum::<u64>() + self.spacings.iter().sum::<u64>()
    }

    /// Half-open column intervals occupied by the stripes, starting at 0.
    pub fn intervals(&self) -> Vec<(u64, u64)> {
        let mut out = Vec::with_capacity(self.widths.len());
        let mut x = 0;
        for (i, &h) in self.widths.iter().enumerate() {
            out.push((x, x + h));
            x += h + self.spacings.get(i).copied().unwrap_or(0);
        }
        out
    }

    pub fn reversed(&self) -> Self {
        let mut w = self.widths.clone();
        let mut s = self.spacings.clone();
        w.reverse();
        s.reverse();
        StripeSequence { widths: w, spacings: s }
    }
}

/// `e_s(h)` on a range of widths with the certified argmin.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EnergyCurve {
    pub entries: Vec<(u64, SumResult)>,
    pub h_star: u64,
    pub tie: bool,
}

impl EnergyCurve {
    pub fn get(&self, h: u64) -> Option<SumResult> {
        self.entries.iter().find(|e| e.0 == h).map(|e| e.1)
    }

    pub fn min_energy(&self) -> SumResult {
        self.get(self.h_star).expect("argmin is a stored entry")
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("h,e_s,tail_bound\n");
        for (h, e) in &self.entries {
            let _ = writeln!(s, "{h},{:.17e},{:.3e}", e.value, e.tail_bound);
        }
        s
    }

    fn from_entries(entries: Vec<(u64, SumResult)>) -> Self {
        let (h_star, best) = entries
            .iter()
            .copied()
            .min_by(|a, b| a.1.value.total_cmp(&b.1.value).then(a.0.cmp(&b.0)))
            .expect("nonempty curve");
        let close: Vec<u64> = entries
            .iter()
            .filter(|(h, e)| *h != h_star && e.agrees_with(&best, 0.0))
            .map(|e| e.0)
            .collect();
        let tie = !close.is_empty();
        let h_star = close.iter().copied().fold(h_star, u64::min);
        EnergyCurve { entries, h_star, tie }
    }
}

/// Result of a gap-bound fit.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GapFit {
    pub c3: f64,
    /// Width attaining the minimum defining `c3`.
    pub w_at_min: u64,
    pub h_star: u64,
    /// Largest violation of the derived inequality between `c3`, `tau` and
    /// the energy gap; nonpositive when it holds everywhere.
    pub derived_violation: f64,
}

/// Cached column sums and all striped-phase energies for one parameter set.
#[derive(Debug)]
pub struct Energetics {
    params: ModelParams,
    cols: Columns,
    table: Vec<SumResult>,
    quarter: OnceLock<Vec<SumResult>>,
}

impl Energetics {
    pub fn new(params: ModelParams) -> Result<Self> {
        let cols = params.columns();
        let mut table = Vec::with_capacity(TABLE_LEN as usize);
        table.push(SumResult::exact(f64::NAN));
        table.extend((1..TABLE_LEN).into_par_iter().map(|a| cols.transverse(a as f64)).collect::<Vec<_>>());
        Ok(Energetics { params, cols, table, quarter: OnceLock::new() })
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn columns(&self) -> &Columns {
        &self.cols
    }

    /// Same column tables with a different coupling.
    pub fn with_coupling(&self, j: f64) -> Result<Self> {
        Ok(Energetics {
            params: self.params.with_coupling(j)?,
            cols: self.cols,
            table: self.table.clone(),
            quarter: OnceLock::new(),
        })
    }

    /// `T(a)` for `a >= 1`.
    pub fn t(&self, a: u64) -> SumResult {
        match self.table.get(a as usize) {
            Some(r) if a > 0 => *r,
            _ => self.cols.transverse(a as f64),
        }
    }

    fn tail_start(&self, h: u64) -> u64 {
        let base = 512u64.max(64 * h);
        base.div_ceil(2 * h) * 2 * h
    }

    /// `sum_{a > n} (a - c) T(a)` for `c <= n`.
    fn shifted_first_moment_tail(&self, n: u64, c: f64) -> SumResult {
        let s = self.cols.sigma();
        let (lo1, hi1) = power_tail(n + 1, s - 1.0);
        let (lo2, hi2) = power_tail(n + 1, s);
        let rel = self.cols.poisson_rel((n + 1) as f64) + 1e-14;
        let k = self.cols.kappa();
        let lo = k * (1.0 - rel) * (lo1 - c * hi2);
        let hi = k * (1.0 + rel) * (hi1 - c * lo2);
        let r = SumResult::from_bracket(lo, hi, n);
        SumResult::new(r.value, r.tail_bound + 4.0 * EPS * k * (hi1 + c * hi2), n)
    }

    /// `S(h) = sum_{a>h} (a - tri_h(a)) T(a)`.
    fn stripe_series(&self, h: u64) -> SumResult {
        let n = self.tail_start(h);
        let period = 2 * h;
        let tri = |a: u64| {
            let r = a % period;
            r.min(period - r)
        };
        let mut acc = Accumulator::default();
        let mut tail = 0.0;
        for a in (h + 1..=n).rev() {
            let w = (a - tri(a)) as f64;
            let t = self.t(a);
            acc.add(w * t.value);
            tail += w * t.tail_bound;
        }
        // sum_{a>n} (a - h/2) T(a) minus the zero-mean periodic remainder,
        // the latter bounded by summation by parts
        let smooth = self.shifted_first_moment_tail(n, 0.5 * h as f64);
        let mut partial = 0.0f64;
        let mut smax = 0.0f64;
        for a in n + 1..=n + period {
            partial += tri(a) as f64 - 0.5 * h as f64;
            smax = smax.max(partial.abs());
        }
        let abel = smax * self.t(n + 1).hi();
        acc.add(smooth.value);
        acc.result(tail + smooth.tail_bound + abel, n)
    }

    /// Energy per site of the periodic striped state of width `h`.
    pub fn striped_energy_per_site(&self, h: u64) -> Result<SumResult> {
        if h == 0 {
            return domain("stripe width must be at least 1");
        }
        let hf = h as f64;
        Ok(self.params.tau_result() * (1.0 / hf) + self.stripe_series(h) * (2.0 / hf))
    }

    /// `e_s(h) - tau/h`, the part that decays like a power of `h`.
    pub fn stripe_excess(&self, h: u64) -> Result<SumResult> {
        if h == 0 {
            return domain("stripe width must be at least 1");
        }
        Ok(self.stripe_series(h) * (2.0 / h as f64))
    }

    /// `e_s` on `1..=h_max`, evaluated in parallel.
    pub fn energy_curve(&self, h_max: u64) -> Result<EnergyCurve> {
        if h_max == 0 {
            return domain("h_max must be at least 1");
        }
        let entries: Vec<(u64, SumResult)> = (1..=h_max)
            .into_par_iter()
            .map(|h| (h, self.striped_energy_per_site(h).expect("h >= 1")))
            .collect();
        Ok(EnergyCurve::from_entries(entries))
    }

    /// Certified minimiser of `e_s` over all widths.
    ///
    /// Since the series part of `e_s` is nonnegative, `e_s(h) >= tau/h`, so
    /// once `tau/h` exceeds the best energy seen no larger width can win.
    pub fn optimal_width(&self) -> Result<EnergyCurve> {
        let tau = self.params.tau_result();
        if tau.hi() >= 0.0 {
            return domain(format!(
                "tau = {:.3e} is not certifiably negative; the uniform state is optimal",
                tau.value
            ));
        }
        let mut entries = Vec::new();
        let mut best = f64::INFINITY;
        let mut h = 1u64;
        loop {
            let chunk: Vec<(u64, SumResult)> = (h..h + 16)
                .into_par_iter()
                .map(|k| (k, self.striped_energy_per_site(k).expect("k >= 1")))
                .collect();
            for &(k, e) in &chunk {
                best = best.min(e.hi());
                entries.push((k, e));
                if tau.lo() / (k as f64) > best {
                    return Ok(EnergyCurve::from_entries(entries));
                }
            }
            h += 16;
            if h > 1 << 20 {
                return Err(Error::Budget("optimal width search exceeded 2^20".into()));
            }
        }
    }

    /// `R(h) = sum_{a>h} (a - h) T(a)`.
    pub fn excess_moment(&self, h: u64) -> SumResult {
        let n = self.tail_start(h.max(1));
        let mut acc = Accumulator::default();
        let mut tail = 0.0;
        for a in (h + 1..=n).rev() {
            let w = (a - h) as f64;
            let t = self.t(a);
            acc.add(w * t.value);
            tail += w * t.tail_bound;
        }
        let sm = self.shifted_first_moment_tail(n, h as f64);
        acc.add(sm.value);
        acc.result(tail + sm.tail_bound, n)
    }

    /// `sum_{x != 0} min(|x_1|, h) |x|^-p = 2 (J_c - R(h))`.
    pub fn truncated_moment(&self, h: u64) -> SumResult {
        (self.params.jc() - self.excess_moment(h)) * 2.0
    }

    /// `sum_{u in I} sum_{v in I'} T(|u - v|)` for disjoint column intervals.
    pub fn interval_pair_sum(&self, a: (u64, u64), b: (u64, u64)) -> SumResult {
        let (a, b) = if a.0 < b.0 { (a, b) } else { (b, a) };
        debug_assert!(a.1 <= b.0);
        // distances run from b.0 - a.1 + 1 to b.1 - 1 - a.0 with trapezoidal multiplicity
        let la = a.1 - a.0;
        let lb = b.1 - b.0;
        let dmin = b.0 - a.1 + 1;
        let dmax = b.1 - 1 - a.0;
        let mut acc = Accumulator::default();
        let mut tail = 0.0;
        for dist in dmin..=dmax {
            let k = dist - dmin;
            let mult = (k + 1).min(la).min(lb).min(dmax - dist + 1);
            let t = self.t(dist);
            acc.add(mult as f64 * t.value);
            tail += mult as f64 * t.tail_bound;
        }
        acc.result(tail, dmax)
    }

    /// Energy per unit vertical length of a finite family of infinite
    /// vertical stripes in a plus background.
    pub fn e_infinity(&self, seq: &StripeSequence) -> SumResult {
        let n = seq.len() as f64;
        let mut terms = Vec::new();
        terms.push(SumResult::exact(4.0 * self.params.j * n));
        for &h in &seq.widths {
            terms.push(self.truncated_moment(h) * -2.0);
        }
        let iv = seq.intervals();
        for i in 0..iv.len() {
            for k in i + 1..iv.len() {
                // 1/2 (W(l_i, L_k) + W(l_k, L_i)) = 4 sum sum T
                terms.push(self.interval_pair_sum(iv[i], iv[k]) * 4.0);
            }
        }
        terms.into_iter().sum()
    }

    fn quarter_table(&self) -> &Vec<SumResult> {
        self.quarter.get_or_init(|| {
            let p = self.params.p;
            let mut v = vec![SumResult::exact(0.0)];
            v.extend((1..=QUARTER_LEN).into_par_iter().map(|a| quarter_column(a, p)).collect::<Vec<_>>());
            v
        })
    }

    fn quarter_col(&self, a: u64) -> SumResult {
        let t = self.quarter_table();
        match t.get(a as usize) {
            Some(r) => *r,
            None => quarter_column(a, self.params.p),
        }
    }

    /// `sum_{a > w} min(h, a - w) V(a)` with `V(a) = sum_{k>=1} k (a^2+k^2)^(-p/2)`.
    fn half_strip_quarter(&self, w: u64, h: u64) -> SumResult {
        let p = self.params.p;
        let amax = (8 * (w + h)).max(QUARTER_LEN);
        let mut acc = Accumulator::default();
        let mut tail = 0.0;
        for a in (w + 1..=amax).rev() {
            let m = h.min(a - w) as f64;
            let v = self.quarter_col(a);
            acc.add(m * v.value);
            tail += m * v.tail_bound;
        }
        // beyond amax the weight is h; V(a) = a^(2-p)/(p-2) +- g_max(a)
        let (lo1, hi1) = power_tail(amax + 1, p - 2.0);
        let (_, hi2) = power_tail(amax + 1, p - 1.0);
        let mp = (p - 1.0).powf(-0.5) * (p / (p - 1.0)).powf(-0.5 * p);
        let hf = h as f64;
        let lo = hf * (lo1 / (p - 2.0) - mp * hi2);
        let hi = hf * (hi1 / (p - 2.0) + mp * hi2);
        acc.add(0.5 * (lo + hi));
        acc.result(tail + 0.5 * (hi - lo), amax)
    }

    /// Interaction of a half-infinite vertical strip of width `h` with the
    /// quarter planes at horizontal distances `w1` (left) and `w2` (right)
    /// below it. `None` means the quarter plane is absent. Two dimensions only.
    pub fn f_interaction(&self, w1: Option<u64>, h: u64, w2: Option<u64>) -> Result<SumResult> {
        if self.params.d != 2 {
            return domain("the half-strip interaction is implemented for d = 2");
        }
        if h == 0 {
            return domain("strip width must be at least 1");
        }
        let mut total = SumResult::exact(0.0);
        for w in [w1, w2].into_iter().flatten() {
            total = total + self.half_strip_quarter(w, h) * 2.0;
        }
        Ok(total)
    }

    /// Periodised potential table `v_L(1..L)`.
    pub fn ring(&self, l: u64) -> Result<RingPotential> {
        if l < 2 {
            return domain("ring length must be at least 2");
        }
        let v = (1..l)
            .into_par_iter()
            .map(|x| self.cols.periodized(x, Some(l)))
            .collect::<Result<Vec<_>>>()?;
        Ok(RingPotential { l, j: self.params.j, v })
    }

    /// Checks `H^per(blocks) >= sum_i (h_i e_s(h_i) + w_i e_s(w_i))` on a
    /// ring of length `l`, the last spacing closing the ring.
    pub fn chessboard_check(&self, seq: &StripeSequence, l: u64) -> Result<crate::bounds::Certificate> {
        let used = seq.span();
        if l <= used {
            return domain(format!("ring length {l} leaves no closing spacing after span {used}"));
        }
        let ring = self.ring(l)?;
        let spins = block_spins(seq, l);
        let lhs = ring.energy(&spins);
        let mut parts = Vec::new();
        let closing = l - used;
        for &b in seq.widths.iter().chain(&seq.spacings).chain(std::iter::once(&closing)) {
            parts.push(self.striped_energy_per_site(b)? * b as f64);
        }
        let rhs: SumResult = parts.into_iter().sum();
        Ok(crate::bounds::Certificate::new(
            lhs,
            rhs,
            format!("chessboard L={l} seq={:?}/{:?}", seq.widths, seq.spacings),
        ))
    }

    /// Largest `c3` with `e_s(w) - e_s(h*) >= c3 w^(d-p) + tau/w` on `1..=w_max`.
    pub fn gap_bound_check(&self, w_max: u64) -> Result<GapFit> {
        let opt = self.optimal_width()?;
        let h_star = opt.h_star;
        let e_star = opt.min_energy();
        let tau = self.params.tau();
        let d = self.params.d as f64;
        let p = self.params.p;
        let es: Vec<SumResult> = (1..=w_max)
            .into_par_iter()
            .map(|w| self.striped_energy_per_site(w).expect("w >= 1"))
            .collect();
        let mut c3 = f64::INFINITY;
        let mut w_at_min = 1;
        for (i, e) in es.iter().enumerate() {
            let w = (i + 1) as f64;
            let c = w.powf(p - d) * (e.value - e_star.value - tau / w);
            if c < c3 {
                c3 = c;
                w_at_min = i as u64 + 1;
            }
        }
        if !(c3 > 0.0) {
            return Err(Error::Construction(format!("no positive gap constant, best {c3:e}")));
        }
        let x = (c3 / tau.abs()).powf(1.0 / (p - d - 1.0));
        let mut viol = f64::NEG_INFINITY;
        for (i, e) in es.iter().enumerate() {
            let w = (i + 1) as f64;
            let lhs = c3 * w.powf(d + 2.0 - p);
            let rhs = tau.abs() * w + x * w * (e.value - e_star.value);
            let slop = 1e-9 * lhs.abs().max(rhs.abs()) + x * w * (e.tail_bound + e_star.tail_bound);
            viol = viol.max(lhs - rhs - slop);
        }
        Ok(GapFit { c3, w_at_min, h_star, derived_violation: viol })
    }
}

const QUARTER_LEN: u64 = 2048;

/// `V(a) = sum_{k>=1} k (a^2 + k^2)^(-p/2)` with a trapezoid bracket on the
/// tail, where the summand is convex and decreasing.
fn quarter_column(a: u64, p: f64) -> SumResult {
    let af = a as f64;
    let m = (2 * a).max(1024);
    let mut acc = Accumulator::default();
    for k in (1..=m).rev() {
        let kf = k as f64;
        acc.add(kf * (af * af + kf * kf).powf(-0.5 * p));
    }
    let n = (m + 1) as f64;
    let u = af * af + n * n;
    let int = u.powf(1.0 - 0.5 * p) / (p - 2.0);
    let g = n * u.powf(-0.5 * p);
    let dg = u.powf(-0.5 * p - 1.0) * ((p - 1.0) * n * n - af * af);
    acc.add(int + 0.5 * g + 0.0625 * dg);
    acc.result(0.0625 * dg + 4.0 * EPS * int, m)
}

/// Spins of the block configuration on a ring of length `l`: minus on the
/// stripes of `seq`, plus elsewhere.
pub fn block_spins(seq: &StripeSequence, l: u64) -> Vec<i8> {
    let mut s = vec![1i8; l as usize];
    for (a, b) in seq.intervals() {
        for x in a..b {
            s[x as usize] = -1;
        }
    }
    s
}

/// The one-dimensional periodic Hamiltonian with the periodised potential.
#[derive(Clone, Debug)]
pub struct RingPotential {
    pub l: u64,
    j: f64,
    v: Vec<SumResult>,
}

impl RingPotential {
    /// `v_L(x)` for `1 <= x < L`.
    pub fn v(&self, x: u64) -> SumResult {
        self.v[(x - 1) as usize]
    }

    /// `-J sum (s_i s_(i+1) - 1) + sum_(i<j) (s_i s_j - 1) v_L(j - i)`.
    pub fn energy(&self, spins: &[i8]) -> SumResult {
        assert_eq!(spins.len() as u64, self.l);
        let n = spins.len();
        let walls = (0..n).filter(|&i| spins[i] != spins[(i + 1) % n]).count();
        let mut m = vec![0u64; n];
        for i in 0..n {
            for k in i + 1..n {
                if spins[i] != spins[k] {
                    m[k - i] += 1;
                }
            }
        }
        let mut acc = Accumulator::default();
        let mut tail = 0.0;
        acc.add(2.0 * self.j * walls as f64);
        for x in 1..n {
            if m[x] > 0 {
                let v = self.v(x as u64);
                acc.add(-2.0 * m[x] as f64 * v.value);
                tail += 2.0 * m[x] as f64 * v.tail_bound;
            }
        }
        acc.result(tail, self.l)
    }

    /// Dense pair matrix of the long-range part, for table-driven searches.
    pub fn values(&self) -> Vec<f64> {
        self.v.iter().map(|r| r.value).collect()
    }

    pub fn max_tail(&self) -> f64 {
        self.v.iter().map(|r| r.tail_bound).fold(0.0, f64::max)
    }

    pub fn coupling(&self) -> f64 {
        self.j
    }
}

/// Least-squares slope and intercept of `y` against `x`.
pub fn fit_line(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Fitted exponent and amplitude of `e_s(h) - tau/h ~ A h^-k` on `[h_lo, h_hi]`.
pub fn fit_excess_exponent(en: &Energetics, h_lo: u64, h_hi: u64) -> Result<(f64, f64)> {
    let hs: Vec<u64> = log_grid(h_lo, h_hi, 24);
    let ys = hs
        .par_iter()
        .map(|&h| en.stripe_excess(h).map(|e| e.value.ln()))
        .collect::<Result<Vec<_>>>()?;
    let xs: Vec<f64> = hs.iter().map(|&h| (h as f64).ln()).collect();
    let (slope, icpt) = fit_line(&xs, &ys);
    Ok((slope, icpt.exp()))
}

/// Roughly geometric integer grid from `lo` to `hi` inclusive.
pub fn log_grid(lo: u64, hi: u64, n: usize) -> Vec<u64> {
    let mut out: Vec<u64> = (0..n)
        .map(|i| {
            let t = i as f64 / (n - 1) as f64;
            ((lo as f64).ln() * (1.0 - t) + (hi as f64).ln() * t).exp().round() as u64
        })
        .collect();
    out.dedup();
    out
}
