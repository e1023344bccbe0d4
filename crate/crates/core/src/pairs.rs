//! Finite pair sums `sum_{x,y} a(x) b(y) |x - y|^-p` over planar patches.
//!
//! Large patches go through an FFT cross-correlation; the correlation of two
//! integer-valued patches is rounded back to integers before it is weighted
//! by the kernel, so the only error left is floating-point summation.

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use crate::kernel::{Accumulator, SumResult};

/// Direct evaluation is used below this many multiply-adds.
const DIRECT_LIMIT: usize = 1 << 22;

/// Dense values on the rectangle `[x0, x0 + w) x [y0, y0 + h)`, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Patch {
    pub x0: i64,
    pub y0: i64,
    pub w: usize,
    pub h: usize,
    pub v: Vec<f64>,
}

impl Patch {
    pub fn zeros(x0: i64, y0: i64, w: usize, h: usize) -> Self {
        Patch { x0, y0, w, h, v: vec![0.0; w * h] }
    }

    /// Indicator patch on the bounding box of `cells`.
    pub fn indicator(cells: &[(i64, i64)]) -> Self {
        Self::weighted(cells.iter().map(|&c| (c, 1.0)))
    }

    pub fn weighted(items: impl IntoIterator<Item = ((i64, i64), f64)>) -> Self {
        let items: Vec<_> = items.into_iter().collect();
        if items.is_empty() {
            return Patch::zeros(0, 0, 0, 0);
        }
        let (mut xa, mut ya, mut xb, mut yb) = (i64::MAX, i64::MAX, i64::MIN, i64::MIN);
        for &((x, y), _) in &items {
            xa = xa.min(x);
            ya = ya.min(y);
            xb = xb.max(x);
            yb = yb.max(y);
        }
        let mut p = Patch::zeros(xa, ya, (xb - xa + 1) as usize, (yb - ya + 1) as usize);
        for ((x, y), val) in items {
            let i = p.index(x, y).unwrap();
            p.v[i] += val;
        }
        p
    }

    pub fn index(&self, x: i64, y: i64) -> Option<usize> {
        let (dx, dy) = (x - self.x0, y - self.y0);
        if dx < 0 || dy < 0 || dx as usize >= self.w || dy as usize >= self.h {
            return None;
        }
        Some(dy as usize * self.w + dx as usize)
    }

    pub fn get(&self, x: i64, y: i64) -> f64 {
        self.index(x, y).map_or(0.0, |i| self.v[i])
    }

    pub fn is_empty(&self) -> bool {
        self.w == 0 || self.h == 0
    }

    fn nonzero(&self) -> Vec<(i64, i64, f64)> {
        let mut out = Vec::new();
        for j in 0..self.h {
            for i in 0..self.w {
                let v = self.v[j * self.w + i];
                if v != 0.0 {
                    out.push((self.x0 + i as i64, self.y0 + j as i64, v));
                }
            }
        }
        out
    }
}

/// `c(d) = sum_x a(x) b(x + d)`, on the patch of all offsets that can be
/// nonzero. With `integral` the result is rounded to integers.
pub fn correlate(a: &Patch, b: &Patch, integral: bool) -> Patch {
    if a.is_empty() || b.is_empty() {
        return Patch::zeros(0, 0, 0, 0);
    }
    let w = a.w + b.w - 1;
    let h = a.h + b.h - 1;
    let x0 = b.x0 - (a.x0 + a.w as i64 - 1);
    let y0 = b.y0 - (a.y0 + a.h as i64 - 1);
    let mut out = Patch::zeros(x0, y0, w, h);
    let na = a.nonzero();
    let nb = b.nonzero();
    if na.len().saturating_mul(nb.len()) <= DIRECT_LIMIT {
        for &(xa, ya, va) in &na {
            for &(xb, yb, vb) in &nb {
                let i = out.index(xb - xa, yb - ya).unwrap();
                out.v[i] += va * vb;
            }
        }
        return out;
    }
    // circular correlation on a grid large enough to avoid wraparound
    let mut buf_a = vec![Complex64::default(); w * h];
    let mut buf_b = vec![Complex64::default(); w * h];
    for j in 0..a.h {
        for i in 0..a.w {
            buf_a[j * w + i].re = a.v[j * a.w + i];
        }
    }
    for j in 0..b.h {
        for i in 0..b.w {
            buf_b[j * w + i].re = b.v[j * b.w + i];
        }
    }
    fft2(&mut buf_a, w, h, false);
    fft2(&mut buf_b, w, h, false);
    for (x, y) in buf_a.iter_mut().zip(&buf_b) {
        *x = x.conj() * y;
    }
    fft2(&mut buf_a, w, h, true);
    let norm = 1.0 / (w * h) as f64;
    // buf index (i, j) holds offset (b.x0 - a.x0 + i, ...) modulo the grid
    let bx = b.x0 - a.x0;
    let by = b.y0 - a.y0;
    for j in 0..h {
        for i in 0..w {
            let dx = x0 + i as i64;
            let dy = y0 + j as i64;
            let ci = (dx - bx).rem_euclid(w as i64) as usize;
            let cj = (dy - by).rem_euclid(h as i64) as usize;
            let v = buf_a[cj * w + ci].re * norm;
            out.v[j * w + i] = if integral { v.round() } else { v };
        }
    }
    out
}

fn fft2(buf: &mut [Complex64], w: usize, h: usize, inverse: bool) {
    let mut planner = FftPlanner::new();
    let row = if inverse { planner.plan_fft_inverse(w) } else { planner.plan_fft_forward(w) };
    for r in buf.chunks_mut(w) {
        row.process(r);
    }
    let col = if inverse { planner.plan_fft_inverse(h) } else { planner.plan_fft_forward(h) };
    let mut tmp = vec![Complex64::default(); h];
    for i in 0..w {
        for j in 0..h {
            tmp[j] = buf[j * w + i];
        }
        col.process(&mut tmp);
        for j in 0..h {
            buf[j * w + i] = tmp[j];
        }
    }
}

/// `sum_{d != 0} c(d) |d|^-p`.
pub fn weigh(c: &Patch, p: f64) -> SumResult {
    let mut acc = Accumulator::default();
    for j in 0..c.h {
        let dy = (c.y0 + j as i64) as f64;
        for i in 0..c.w {
            let v = c.v[j * c.w + i];
            if v == 0.0 {
                continue;
            }
            let dx = (c.x0 + i as i64) as f64;
            let r2 = dx * dx + dy * dy;
            if r2 > 0.0 {
                acc.add(v * r2.powf(-0.5 * p));
            }
        }
    }
    acc.result(0.0, 0)
}

/// `sum_{x in A, y in B, x != y} a(x) b(y) |x - y|^-p` for integer weights.
pub fn pair_sum(a: &Patch, b: &Patch, p: f64) -> SumResult {
    weigh(&correlate(a, b, true), p)
}

/// Ordered-pair sum over a cell set, `sum_{x != y in A} |x - y|^-p`.
pub fn self_sum(cells: &[(i64, i64)], p: f64) -> SumResult {
    if cells.len() > COLUMN_LIMIT {
        return column_self_sum(cells, p);
    }
    let a = Patch::indicator(cells);
    pair_sum(&a, &a, p)
}

/// Sets larger than this go through [`column_self_sum`].
const COLUMN_LIMIT: usize = 1 << 16;

/// Self sum of a large set that is mostly a union of full-height columns of
/// its bounding box. The set is split as `1_A = 1_S + e` with `S` the
/// majority columns and `e` a signed correction; the column part reduces
/// to one-dimensional tables.
pub fn column_self_sum(cells: &[(i64, i64)], p: f64) -> SumResult {
    if cells.is_empty() {
        return SumResult::exact(0.0);
    }
    let a = Patch::indicator(cells);
    let (w, h) = (a.w, a.h);
    let k = |dx: i64, dy: i64| ((dx * dx + dy * dy) as f64).powf(-0.5 * p);
    let mut full = vec![false; w];
    for (i, f) in full.iter_mut().enumerate() {
        let n = (0..h).filter(|&j| a.v[j * w + i] != 0.0).count();
        *f = 2 * n > h;
    }
    let mut e = Vec::new();
    for j in 0..h {
        for i in 0..w {
            let inside = a.v[j * w + i] != 0.0;
            if inside != full[i] {
                e.push(((a.x0 + i as i64, a.y0 + j as i64), if inside { 1.0 } else { -1.0 }));
            }
        }
    }
    let cols: Vec<i64> = (0..w).filter(|&i| full[i]).map(|i| i as i64).collect();
    let hi = h as i64;
    // g[dx] = sum_dy (h - |dy|) K(dx, dy)
    let mut acc = Accumulator::default();
    let mut count = vec![0.0f64; w];
    for (n, &c) in cols.iter().enumerate() {
        count[0] += 1.0;
        for &d in &cols[n + 1..] {
            count[(d - c) as usize] += 2.0;
        }
    }
    // line[dx][y] = sum_{t in [0, h), (dx, t - y) != 0} K(dx, t - y)
    let mut line = vec![0.0f64; w * h];
    let mut q = vec![0.0f64; 2 * h];
    for dx in 0..w {
        let dxi = dx as i64;
        // prefix sums of K(dx, t) for t in -(h-1)..h
        q[0] = 0.0;
        for t in -(hi - 1)..hi {
            let v = if dxi == 0 && t == 0 { 0.0 } else { k(dxi, t) };
            let idx = (t + hi) as usize;
            q[idx] = q[idx - 1] + v;
        }
        if count[dx] != 0.0 {
            let mut g = Accumulator::default();
            for dy in -(hi - 1)..hi {
                if dxi == 0 && dy == 0 {
                    continue;
                }
                g.add((hi - dy.abs()) as f64 * k(dxi, dy));
            }
            acc.add(count[dx] * g.value());
        }
        for y in 0..hi {
            // t - y runs over -y..h-1-y
            line[dx * h + y as usize] = q[(hi - 1 - y + hi) as usize] - q[(-y + hi - 1) as usize];
        }
    }
    let mut cross = Accumulator::default();
    for &((x, y), s) in &e {
        let (i, j) = ((x - a.x0) as i64, (y - a.y0) as usize);
        let mut f = 0.0;
        for &c in &cols {
            f += line[(c - i).unsigned_abs() as usize * h + j];
        }
        cross.add(s * f);
    }
    acc.add(2.0 * cross.value());
    let ep = Patch::weighted(e);
    acc.add(pair_sum(&ep, &ep, p).value);
    acc.result(0.0, 0)
}

/// `sum_{x in A, y in B} |x - y|^-p` for disjoint cell sets.
pub fn cross_sum(a: &[(i64, i64)], b: &[(i64, i64)], p: f64) -> SumResult {
    pair_sum(&Patch::indicator(a), &Patch::indicator(b), p)
}

/// Ordered-pair sum over a full `w x h` rectangle, with closed-form counts.
pub fn rectangle_self_sum(w: usize, h: usize, p: f64) -> SumResult {
    let mut acc = Accumulator::default();
    for dy in 0..h as i64 {
        for dx in 0..w as i64 {
            if dx == 0 && dy == 0 {
                continue;
            }
            let mult = if dx > 0 { 2.0 } else { 1.0 } * if dy > 0 { 2.0 } else { 1.0 };
            let count = (w as i64 - dx) as f64 * (h as i64 - dy) as f64;
            acc.add(mult * count * ((dx * dx + dy * dy) as f64).powf(-0.5 * p));
        }
    }
    acc.result(0.0, 0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn brute(a: &[(i64, i64)], b: &[(i64, i64)], p: f64) -> f64 {
        let mut s = 0.0;
        for &(x1, y1) in a {
            for &(x2, y2) in b {
                let r2 = ((x1 - x2).pow(2) + (y1 - y2).pow(2)) as f64;
                if r2 > 0.0 {
                    s += r2.powf(-0.5 * p);
                }
            }
        }
        s
    }

    fn random_cells(rng: &mut ChaCha8Rng, n: usize, span: i64, off: i64) -> Vec<(i64, i64)> {
        let mut v: Vec<(i64, i64)> =
            (0..n).map(|_| (rng.gen_range(0..span) + off, rng.gen_range(0..span) - off)).collect();
        v.sort();
        v.dedup();
        v
    }

    #[test]
    fn fft_path_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random_cells(&mut rng, 2500, 60, 0);
        let b = random_cells(&mut rng, 2500, 50, 7);
        let direct = brute(&a, &b, 5.0);
        let fast = cross_sum(&a, &b, 5.0);
        assert!((fast.value - direct).abs() < 1e-10 * direct, "{} vs {direct}", fast.value);
    }

    #[test]
    fn direct_path_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a = random_cells(&mut rng, 40, 10, -3);
        assert!((self_sum(&a, 4.0).value - brute(&a, &a, 4.0)).abs() < 1e-12);
    }

    #[test]
    fn column_split_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        // stripes with random bites and specks
        let mut cells = Vec::new();
        for y in 0..40 {
            for x in 0..50 {
                let stripe = (x / 6) % 2 == 1;
                let flip = rng.gen_bool(0.05);
                if stripe != flip {
                    cells.push((x + 3, y - 7));
                }
            }
        }
        let want = brute(&cells, &cells, 5.0);
        let got = column_self_sum(&cells, 5.0);
        assert!((got.value - want).abs() < 1e-10 * want, "{} vs {want}", got.value);
    }

    #[test]
    fn rectangle_counts() {
        let cells: Vec<_> = (0..7).flat_map(|y| (0..5).map(move |x| (x, y))).collect();
        let r = rectangle_self_sum(5, 7, 5.0);
        assert!((r.value - brute(&cells, &cells, 5.0)).abs() < 1e-12);
    }

    #[test]
    fn fft_correlation_is_integral_and_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = Patch::indicator(&random_cells(&mut rng, 3000, 70, 0));
        let b = Patch::indicator(&random_cells(&mut rng, 3000, 70, 2));
        let c = correlate(&a, &b, false);
        let total: f64 = c.v.iter().sum();
        let na: f64 = a.v.iter().sum();
        let nb: f64 = b.v.iter().sum();
        assert!((total - na * nb).abs() < 1e-6 * na * nb);
        assert!(c.v.iter().all(|v| (v - v.round()).abs() < 1e-6));
        let (dx, dy) = (3, -2);
        let mut want = 0.0;
        for j in 0..a.h {
            for i in 0..a.w {
                let (x, y) = (a.x0 + i as i64, a.y0 + j as i64);
                want += a.get(x, y) * b.get(x + dx, y + dy);
            }
        }
        assert_eq!(c.get(dx, dy).round(), want);
    }
}
