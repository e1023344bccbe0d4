//! Ground truth for small systems: exhaustive minimization on rings and
//! tori, and simulated annealing beyond the enumerable sizes.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{Boundary, Hamiltonian, Orientation, Rect, SpinConfig, TorusKernel};
use crate::error::{domain, Error, Result};
use crate::kernel::SumResult;
use crate::stripes::{block_spins, Energetics, StripeSequence};

pub const MAX_RING: usize = 28;
pub const MAX_TORUS: usize = 26;
const MAX_ANNEAL: usize = 4096;

/// Shape of a minimizer.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Pattern {
    Uniform,
    /// Equal-width stripes. On a torus `orientation` says which axis the
    /// interfaces are parallel to.
    Stripes { width: usize, orientation: Orientation },
    /// Constant along one axis but with unequal widths.
    Layered { orientation: Orientation },
    Other,
}

impl Pattern {
    pub fn is_striped(&self) -> bool {
        matches!(self, Pattern::Stripes { .. } | Pattern::Layered { .. })
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Minimizer {
    /// Row-major, `lx` per row.
    pub spins: Vec<i8>,
    pub pattern: Pattern,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SearchReport {
    pub lx: usize,
    pub ly: usize,
    pub j: f64,
    /// Canonical representatives, one per symmetry class, sorted.
    pub minimizers: Vec<Minimizer>,
    pub energy: SumResult,
    pub enumerated: u64,
    pub symmetries: Vec<String>,
    pub wall_time: f64,
    /// Best-so-far energy after each annealing sweep.
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub trace: Vec<f64>,
}

impl SearchReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Minimizers as configurations on a periodic window.
    pub fn configs(&self) -> Vec<SpinConfig> {
        let r = Rect::new(0, 0, self.lx, self.ly);
        self.minimizers
            .iter()
            .map(|m| SpinConfig::new(r, m.spins.clone(), Boundary::Periodic).expect("sizes match"))
            .collect()
    }
}

/// Pair couplings on a torus or ring: the energy is
/// `sum_(i<j) b_ij (s_i s_j - 1)`.
struct Couplings {
    n: usize,
    b: Vec<f64>,
    tol: f64,
}

impl Couplings {
    fn torus(kp: &TorusKernel, j: f64) -> Self {
        let (lx, ly) = (kp.lx, kp.ly);
        let n = lx * ly;
        let mut b = vec![0.0; n * n];
        let mut tail = 0.0f64;
        for s in 0..n {
            let (xs, ys) = ((s % lx) as i64, (s / lx) as i64);
            for t in 0..n {
                if s != t {
                    let k = kp.get(t as i64 % lx as i64 - xs, (t / lx) as i64 - ys);
                    b[s * n + t] = k.value;
                    tail = tail.max(k.tail_bound);
                }
            }
        }
        for s in 0..n {
            let (xs, ys) = ((s % lx) as i64, (s / lx) as i64);
            for (dx, dy) in [(1i64, 0i64), (0, 1)] {
                let t = ((xs + dx).rem_euclid(lx as i64) + (ys + dy).rem_euclid(ly as i64) * lx as i64) as usize;
                if t != s {
                    b[s * n + t] -= j;
                    b[t * n + s] -= j;
                }
            }
        }
        Couplings { n, b, tol: 1e-9 + n as f64 * n as f64 * tail }
    }

    fn ring(en: &Energetics, l: usize) -> Result<Self> {
        let ring = en.ring(l as u64)?;
        let v = ring.values();
        let j = ring.coupling();
        let mut b = vec![0.0; l * l];
        for s in 0..l {
            for t in 0..l {
                if s != t {
                    b[s * l + t] = v[(t as i64 - s as i64).rem_euclid(l as i64) as usize - 1];
                }
            }
        }
        for s in 0..l {
            let t = (s + 1) % l;
            if t != s {
                b[s * l + t] -= j;
                b[t * l + s] -= j;
            }
        }
        Ok(Couplings { n: l, b, tol: 1e-9 + (l * l) as f64 * ring.max_tail() })
    }

    fn energy(&self, s: &[i8]) -> f64 {
        let n = self.n;
        let mut e = 0.0;
        for i in 0..n {
            for k in i + 1..n {
                if s[i] != s[k] {
                    e -= 2.0 * self.b[i * n + k];
                }
            }
        }
        e
    }

    /// Gray-code sweep over the low `bits` free sites with the rest fixed;
    /// site 0 is never flipped. Returns the least energy and the spins
    /// reaching it up to `slop`.
    fn sweep(&self, mut s: Vec<i8>, bits: usize, slop: f64) -> (f64, Vec<Vec<i8>>) {
        let n = self.n;
        let mut e = self.energy(&s);
        let mut field: Vec<f64> = (0..n)
            .map(|i| (0..n).map(|k| self.b[i * n + k] * s[k] as f64).sum())
            .collect();
        let mut best = e;
        let mut found = vec![s.clone()];
        for step in 1u64..1 << bits {
            let i = step.trailing_zeros() as usize + 1;
            let old = s[i] as f64;
            e -= 2.0 * old * field[i];
            s[i] = -s[i];
            let row = &self.b[i * n..(i + 1) * n];
            for (f, &bk) in field.iter_mut().zip(row) {
                *f -= 2.0 * old * bk;
            }
            if e < best - slop {
                best = e;
                found.clear();
                found.push(s.clone());
            } else if e <= best + slop && found.len() < 4096 {
                found.push(s.clone());
            }
        }
        (best, found)
    }

    /// All configurations with site 0 up, split by the top free sites.
    fn enumerate(&self) -> (f64, Vec<Vec<i8>>) {
        let n = self.n;
        let free = n - 1;
        let top = free.min(4);
        let bits = free - top;
        let slop = self.tol;
        let parts: Vec<(f64, Vec<Vec<i8>>)> = (0..1u64 << top)
            .into_par_iter()
            .map(|prefix| {
                let mut s = vec![1i8; n];
                for b in 0..top {
                    if prefix >> b & 1 == 1 {
                        s[1 + bits + b] = -1;
                    }
                }
                self.sweep(s, bits, slop)
            })
            .collect();
        // re-evaluate candidates from scratch to drop accumulated drift
        let mut cand: Vec<(f64, Vec<i8>)> = Vec::new();
        let best = parts.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
        for (e, found) in parts {
            if e <= best + 2.0 * slop {
                cand.extend(found.into_iter().map(|s| (self.energy(&s), s)));
            }
        }
        let best = cand.iter().map(|c| c.0).fold(f64::INFINITY, f64::min);
        let keep = cand.into_iter().filter(|c| c.0 <= best + slop).map(|c| c.1).collect();
        (best, keep)
    }
}

/// Symmetry images of a torus configuration.
fn images(s: &[i8], lx: usize, ly: usize, flips: bool) -> Vec<Vec<i8>> {
    let mut out = Vec::new();
    let swaps: &[bool] = if lx == ly && ly > 1 { &[false, true] } else { &[false] };
    for &swap in swaps {
        for rx in [false, true] {
            for ry in [false, true] {
                for tx in 0..lx {
                    for ty in 0..ly {
                        let mut t = vec![0i8; lx * ly];
                        for y in 0..ly {
                            for x in 0..lx {
                                let (mut u, mut v) = ((x + tx) % lx, (y + ty) % ly);
                                if rx {
                                    u = lx - 1 - u;
                                }
                                if ry {
                                    v = ly - 1 - v;
                                }
                                if swap {
                                    (u, v) = (v, u);
                                }
                                t[v * lx + u] = s[y * lx + x];
                            }
                        }
                        if flips {
                            out.push(t.iter().map(|&a| -a).collect());
                        }
                        out.push(t);
                    }
                }
            }
        }
    }
    out
}

fn canonical(s: &[i8], lx: usize, ly: usize) -> Vec<i8> {
    images(s, lx, ly, true).into_iter().max().expect("at least the identity")
}

/// Cyclic run lengths of a periodic line.
fn runs(line: &[i8]) -> Vec<usize> {
    let n = line.len();
    let Some(start) = (0..n).find(|&i| line[i] != line[(i + n - 1) % n]) else {
        return vec![n];
    };
    let mut out = Vec::new();
    let mut len = 0;
    for k in 0..n {
        let i = (start + k) % n;
        if k > 0 && line[i] != line[(i + n - 1) % n] {
            out.push(len);
            len = 0;
        }
        len += 1;
    }
    out.push(len);
    out
}

/// Classifies a torus configuration.
pub fn pattern(s: &[i8], lx: usize, ly: usize) -> Pattern {
    if s.iter().all(|&a| a == s[0]) {
        return Pattern::Uniform;
    }
    // interfaces parallel to y: every column constant
    let cols_const = (0..lx).all(|x| (0..ly).all(|y| s[y * lx + x] == s[x]));
    let rows_const = (0..ly).all(|y| (0..lx).all(|x| s[y * lx + x] == s[y * lx]));
    let classify = |line: Vec<i8>, o: Orientation| {
        let r = runs(&line);
        if r.iter().all(|&w| w == r[0]) {
            Pattern::Stripes { width: r[0], orientation: o }
        } else {
            Pattern::Layered { orientation: o }
        }
    };
    if cols_const {
        classify(s[..lx].to_vec(), Orientation::Vertical)
    } else if rows_const {
        classify((0..ly).map(|y| s[y * lx]).collect(), Orientation::Horizontal)
    } else {
        Pattern::Other
    }
}

fn report(
    lx: usize,
    ly: usize,
    j: f64,
    found: Vec<Vec<i8>>,
    energy: SumResult,
    enumerated: u64,
    symmetries: Vec<String>,
    t0: Instant,
) -> SearchReport {
    let mut reps: Vec<Vec<i8>> = found.iter().map(|s| canonical(s, lx, ly)).collect();
    reps.sort();
    reps.dedup();
    reps.reverse();
    let minimizers = reps
        .into_iter()
        .map(|spins| {
            let pattern = pattern(&spins, lx, ly);
            Minimizer { spins, pattern }
        })
        .collect();
    SearchReport {
        lx,
        ly,
        j,
        minimizers,
        energy,
        enumerated,
        symmetries,
        wall_time: t0.elapsed().as_secs_f64(),
        trace: Vec::new(),
    }
}

/// All `2^L` configurations of the periodic chain under the periodised
/// potential, half of them enumerated thanks to the global flip.
pub fn exhaustive_1d(en: &Energetics, l: usize) -> Result<SearchReport> {
    if l > MAX_RING {
        return Err(Error::Budget(format!("ring of {l} sites exceeds {MAX_RING}")));
    }
    if l < 2 {
        return domain("ring needs at least 2 sites");
    }
    let t0 = Instant::now();
    let c = Couplings::ring(en, l)?;
    let (_, found) = c.enumerate();
    let ring = en.ring(l as u64)?;
    let energy = ring.energy(&found[0]);
    let syms = ["global flip (enumeration)", "cyclic shift", "reflection"].map(String::from).to_vec();
    Ok(report(l, 1, en.params().j, found, energy, 1 << (l - 1), syms, t0))
}

/// All `2^(lx ly)` configurations of an `lx x ly` torus, half enumerated.
pub fn exhaustive_2d(ham: &Hamiltonian, lx: usize, ly: usize) -> Result<SearchReport> {
    if lx * ly > MAX_TORUS {
        return Err(Error::Budget(format!("{lx}x{ly} torus exceeds {MAX_TORUS} sites")));
    }
    if lx < 2 || ly < 2 {
        return domain("torus sides must be at least 2; use the ring for one row");
    }
    let t0 = Instant::now();
    let kp = ham.torus_kernel(lx, ly)?;
    let j = ham.energetics().params().j;
    let c = Couplings::torus(&kp, j);
    let (_, found) = c.enumerate();
    let cfg = SpinConfig::new(Rect::new(0, 0, lx, ly), found[0].clone(), Boundary::Periodic)?;
    let energy = ham.periodic_energy_with(&cfg, &kp)?;
    let mut syms: Vec<String> = ["global flip (enumeration)", "translations", "reflections"].map(String::from).to_vec();
    if lx == ly {
        syms.push("axis swap".into());
    }
    Ok(report(lx, ly, j, found, energy, 1 << (lx * ly - 1), syms, t0))
}

/// Geometric cooling from `t_start` to `t_end` over `sweeps` sweeps.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct Schedule {
    pub sweeps: usize,
    pub t_start: f64,
    pub t_end: f64,
}

impl Default for Schedule {
    fn default() -> Self {
        Schedule { sweeps: 2000, t_start: 1.0, t_end: 1e-3 }
    }
}

/// Single-flip Metropolis annealing on a torus (`ly = 1` for a ring).
pub fn anneal(ham: &Hamiltonian, lx: usize, ly: usize, schedule: Schedule, seed: u64) -> Result<SearchReport> {
    let n = lx * ly;
    if n > MAX_ANNEAL {
        return Err(Error::Budget(format!("annealing is limited to {MAX_ANNEAL} sites")));
    }
    if n < 2 || schedule.sweeps == 0 || !(schedule.t_start > 0.0 && schedule.t_end > 0.0) {
        return domain("annealing needs at least 2 sites, one sweep and positive temperatures");
    }
    let t0 = Instant::now();
    let en = ham.energetics();
    let c = if ly == 1 { Couplings::ring(en, lx)? } else { Couplings::torus(&ham.torus_kernel(lx, ly)?, en.params().j) };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut s: Vec<i8> = (0..n).map(|_| if rng.gen_bool(0.5) { 1 } else { -1 }).collect();
    let mut e = c.energy(&s);
    let mut field: Vec<f64> = (0..n).map(|i| (0..n).map(|k| c.b[i * n + k] * s[k] as f64).sum()).collect();
    let (mut best, mut best_s) = (e, s.clone());
    let mut trace = Vec::with_capacity(schedule.sweeps);
    let ratio = if schedule.sweeps > 1 {
        (schedule.t_end / schedule.t_start).powf(1.0 / (schedule.sweeps - 1) as f64)
    } else {
        1.0
    };
    let mut temp = schedule.t_start;
    for _ in 0..schedule.sweeps {
        for _ in 0..n {
            let i = rng.gen_range(0..n);
            let old = s[i] as f64;
            let de = -2.0 * old * field[i];
            if de <= 0.0 || rng.gen::<f64>() < (-de / temp).exp() {
                e += de;
                s[i] = -s[i];
                let row = &c.b[i * n..(i + 1) * n];
                for (f, &bk) in field.iter_mut().zip(row) {
                    *f -= 2.0 * old * bk;
                }
                if e < best {
                    best = e;
                    best_s.clone_from(&s);
                }
            }
        }
        trace.push(best);
        temp *= ratio;
    }
    let energy = if ly == 1 {
        en.ring(lx as u64)?.energy(&best_s)
    } else {
        ham.periodic_energy(&SpinConfig::new(Rect::new(0, 0, lx, ly), best_s.clone(), Boundary::Periodic)?)?
    };
    let proposals = (schedule.sweeps * n) as u64;
    let mut r = report(lx, ly, en.params().j, vec![best_s], energy, proposals, vec!["none".into()], t0);
    r.trace = trace;
    Ok(r)
}

/// Wave vector `(kx, ky)` of the largest nonzero structure-factor peak.
pub fn structure_peak(s: &[i8], lx: usize, ly: usize) -> (usize, usize) {
    let mut best = (0.0, (0, 0));
    for ky in 0..ly {
        for kx in 0..lx {
            if kx == 0 && ky == 0 {
                continue;
            }
            let (mut re, mut im) = (0.0, 0.0);
            for y in 0..ly {
                for x in 0..lx {
                    let a = std::f64::consts::TAU * (kx * x) as f64 / lx as f64 + std::f64::consts::TAU * (ky * y) as f64 / ly as f64;
                    re += s[y * lx + x] as f64 * a.cos();
                    im += s[y * lx + x] as f64 * a.sin();
                }
            }
            let v = re * re + im * im;
            if v > best.0 + 1e-9 {
                best = (v, (kx, ky));
            }
        }
    }
    best.1
}

/// Striped energies per site on a ring of length `l`, for widths `h` with
/// `2h | l`.
pub fn ring_stripe_table(en: &Energetics, l: usize) -> Result<Vec<(usize, SumResult)>> {
    let ring = en.ring(l as u64)?;
    let mut out = Vec::new();
    for h in 1..=l / 2 {
        if l % (2 * h) == 0 {
            let n = l / (2 * h);
            let seq = StripeSequence::new(vec![h as u64; n], vec![h as u64; n - 1])?;
            let e = ring.energy(&block_spins(&seq, l as u64));
            out.push((h, e * (1.0 / l as f64)));
        }
    }
    Ok(out)
}

/// Striped energies per site on an `lx x ly` torus for every width dividing
/// either side into an even number of stripes.
pub fn torus_stripe_table(ham: &Hamiltonian, lx: usize, ly: usize) -> Result<Vec<(usize, Orientation, SumResult)>> {
    let kp = ham.torus_kernel(lx, ly)?;
    let r = Rect::new(0, 0, lx, ly);
    let mut out = Vec::new();
    for (o, side) in [(Orientation::Vertical, lx), (Orientation::Horizontal, ly)] {
        for h in 1..=side / 2 {
            if side % (2 * h) == 0 {
                let cfg = SpinConfig::from_fn(r, Boundary::Periodic, |(x, y)| {
                    let c = if o == Orientation::Vertical { x } else { y };
                    if (c / h as i64) % 2 == 1 { -1 } else { 1 }
                })?;
                let e = ham.periodic_energy_with(&cfg, &kp)?;
                out.push((h, o, e * (1.0 / (lx * ly) as f64)));
            }
        }
    }
    Ok(out)
}

/// Coupling at which the best entry of a striped table ties the uniform
/// state. Energies are affine in `J`, so it is located from two evaluations.
pub fn crossing_coupling(energy_at: impl Fn(f64) -> Result<f64>) -> Result<f64> {
    let (a, b) = (energy_at(0.0)?, energy_at(1.0)?);
    if !(b > a) {
        return Err(Error::Construction("striped energy does not grow with the coupling".into()));
    }
    Ok(-a / (b - a))
}

/// The finite-ring crossing: the largest `J` at which some stripe state has
/// negative energy.
pub fn ring_crossing(en: &Energetics, l: usize) -> Result<f64> {
    let tbl0 = ring_stripe_table(&en.with_coupling(0.0)?, l)?;
    let tbl1 = ring_stripe_table(&en.with_coupling(1.0)?, l)?;
    let mut best = f64::NEG_INFINITY;
    for (a, b) in tbl0.iter().zip(&tbl1) {
        best = best.max(crossing_coupling(|j| Ok(if j == 0.0 { a.1.value } else { b.1.value }))?);
    }
    Ok(best)
}

/// The finite-torus crossing among the stripe states.
pub fn torus_crossing(ham: &Hamiltonian, lx: usize, ly: usize) -> Result<f64> {
    let tbl0 = torus_stripe_table(&ham.with_coupling(0.0)?, lx, ly)?;
    let tbl1 = torus_stripe_table(&ham.with_coupling(1.0)?, lx, ly)?;
    let mut best = f64::NEG_INFINITY;
    for (a, b) in tbl0.iter().zip(&tbl1) {
        best = best.max(crossing_coupling(|j| Ok(if j == 0.0 { a.2.value } else { b.2.value }))?);
    }
    Ok(best)
}
