//! Energy certificates: localized energies of tiles and good regions, the
//! droplet self-energy bound and the chain of lower bounds leading to the
//! ground-state property of the optimal stripes.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::config::{Boundary, Hamiltonian, Orientation, Rect, SpinConfig};
use crate::error::{domain, Error, Result};
use crate::geometry::{
    bubble_from_cells, extract_contours, localize_bubbles, path_pair_set, tile_partition, Bubble, Site,
    SlicedRegion, TilePartition,
};
use crate::kernel::SumResult;
use crate::pairs;
use crate::stripes::Energetics;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Holds,
    HoldsWithinTails,
    Violated,
}

/// `lhs >= rhs`, decided up to the combined truncation error.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Certificate {
    pub lhs: SumResult,
    pub rhs: SumResult,
    pub slack: f64,
    pub verdict: Verdict,
    pub context: String,
}

impl Certificate {
    pub fn new(lhs: SumResult, rhs: SumResult, context: impl Into<String>) -> Self {
        let slack = lhs.value - rhs.value;
        let tails = lhs.tail_bound + rhs.tail_bound;
        let verdict = if slack >= tails {
            Verdict::Holds
        } else if slack >= -tails {
            Verdict::HoldsWithinTails
        } else {
            Verdict::Violated
        };
        Certificate { lhs, rhs, slack, verdict, context: context.into() }
    }

    pub fn tails(&self) -> f64 {
        self.lhs.tail_bound + self.rhs.tail_bound
    }

    pub fn ok(&self) -> bool {
        self.verdict != Verdict::Violated
    }

    /// Read as an identity: both sides agree within `factor` times the
    /// combined tails.
    pub fn equal_within(&self, factor: f64) -> bool {
        self.slack.abs() <= factor * self.tails()
    }

    /// Strict inequality certified beyond the truncation error.
    pub fn strict(&self) -> bool {
        self.slack > self.tails()
    }
}

/// Tunable constants of the certificates. The analytic statements only
/// assert that suitable values exist; these defaults are empirical.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Constants {
    /// Tile side is `ceil(c0 h*)`.
    pub c0: f64,
    /// Upper end of the tile window: `ell <= 1 / (window |tau|)`.
    pub window: f64,
}

impl Default for Constants {
    fn default() -> Self {
        Constants { c0: 8.0, window: 0.125 }
    }
}

/// A certificate together with the extremal constant that makes it hold.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConstantFit {
    pub certificate: Certificate,
    /// For lower-bound constants the largest admissible value, for
    /// upper-bound constants the smallest; `None` when unconstrained.
    pub fitted: Option<f64>,
}

/// Localized energies and the checks built on them, for one coupling.
#[derive(Debug)]
pub struct Certifier {
    ham: Hamiltonian,
    h_star: u64,
    e_star: SumResult,
    tie: bool,
    pub constants: Constants,
}

impl Certifier {
    /// Needs `tau < 0` so that the optimal width is finite.
    pub fn new(ham: Hamiltonian) -> Result<Self> {
        let opt = ham.energetics().optimal_width()?;
        Ok(Certifier { h_star: opt.h_star, e_star: opt.min_energy(), tie: opt.tie, ham, constants: Constants::default() })
    }

    pub fn hamiltonian(&self) -> &Hamiltonian {
        &self.ham
    }

    pub fn energetics(&self) -> &Energetics {
        self.ham.energetics()
    }

    pub fn h_star(&self) -> u64 {
        self.h_star
    }

    /// `e_s(h*)`.
    pub fn e_star(&self) -> SumResult {
        self.e_star
    }

    /// Whether another width attains the minimum within tails.
    pub fn tie(&self) -> bool {
        self.tie
    }

    pub fn tau(&self) -> f64 {
        self.energetics().params().tau()
    }

    fn p(&self) -> f64 {
        self.energetics().params().p
    }

    fn j(&self) -> f64 {
        self.energetics().params().j
    }

    pub fn default_ell(&self) -> u64 {
        (self.constants.c0 * self.h_star as f64).ceil() as u64
    }

    /// Domain error unless `c0 h* <= ell <= 1 / (window |tau|)`.
    pub fn check_window(&self, ell: u64) -> Result<()> {
        let lo = self.constants.c0 * self.h_star as f64;
        let hi = 1.0 / (self.constants.window * self.tau().abs());
        if (ell as f64) < lo - 1e-9 || ell as f64 > hi {
            return domain(format!("tile side {ell} outside [{lo:.1}, {hi:.1}]"));
        }
        Ok(())
    }

    /// Corner weight `2^(1 - p/2)`.
    pub fn corner_weight(&self) -> f64 {
        2f64.powf(1.0 - 0.5 * self.p())
    }

    /// `M(d) = sum_{n != 0} min(|n_1|, d) |n|^-p`, with `M(inf) = 2 J_c`.
    fn moments(&self, facing: &[Option<u64>]) -> SumResult {
        let mut counts: BTreeMap<Option<u64>, usize> = BTreeMap::new();
        for &d in facing {
            *counts.entry(d).or_insert(0) += 1;
        }
        let en = self.energetics();
        counts
            .into_iter()
            .map(|(d, n)| {
                let m = match d {
                    Some(d) => en.truncated_moment(d),
                    None => en.params().jc() * 2.0,
                };
                m * n as f64
            })
            .sum()
    }

    /// `2J |Gamma_b| + u_Q(b)`.
    pub fn bubble_energy(&self, b: &Bubble) -> SumResult {
        SumResult::exact(2.0 * self.j() * b.bonds.len() as f64) - self.moments(&b.facing)
    }

    /// `W(a, b) = 4 sum_{x in a, y in b} |x - y|^-p`.
    pub fn interaction(&self, a: &Bubble, b: &Bubble) -> SumResult {
        pairs::cross_sum(&a.cells, &b.cells, self.p()) * 4.0
    }

    /// `E_T`: bubble energies, all mutual interactions and the corner term.
    pub fn tile_energy(&self, bubbles: &[Bubble], n_c2: u32) -> SumResult {
        let mut parts: Vec<SumResult> = bubbles.iter().map(|b| self.bubble_energy(b)).collect();
        let cells: usize = bubbles.iter().map(|b| b.cells.len()).sum();
        if cells > 1 << 16 {
            // all pairs at once: sum_{a<b} W(a, b) = 2 (P(union) - sum_b P(b))
            let p = self.p();
            let union: Vec<Site> = bubbles.iter().flat_map(|b| b.cells.iter().copied()).collect();
            parts.push(pairs::self_sum(&union, p) * 2.0);
            for b in bubbles {
                parts.push(pairs::self_sum(&b.cells, p) * -2.0);
            }
        } else {
            for i in 0..bubbles.len() {
                for k in i + 1..bubbles.len() {
                    parts.push(self.interaction(&bubbles[i], &bubbles[k]));
                }
            }
        }
        parts.push(SumResult::exact(0.5 * self.corner_weight() * n_c2 as f64));
        parts.into_iter().sum()
    }

    /// `E_G`, keeping only pairs of bubbles that cannot be made to overlap
    /// by sliding along the stripes.
    pub fn region_energy(&self, bubbles: &[Bubble], orientation: Orientation) -> Result<SumResult> {
        if let Some(b) = bubbles.iter().find(|b| b.corners2 > 0) {
            return domain(format!("bubble at {:?} has corners", b.cells[0]));
        }
        let span = |b: &Bubble| {
            let (x0, y0, x1, y1) = b.bbox();
            match orientation {
                Orientation::Vertical => (x0, x1),
                Orientation::Horizontal => (y0, y1),
            }
        };
        let spans: Vec<(i64, i64)> = bubbles.iter().map(span).collect();
        let mut parts: Vec<SumResult> = bubbles.iter().map(|b| self.bubble_energy(b)).collect();
        for i in 0..bubbles.len() {
            for k in i + 1..bubbles.len() {
                let (a, b) = (spans[i], spans[k]);
                if a.1 <= b.0 || b.1 <= a.0 {
                    parts.push(self.interaction(&bubbles[i], &bubbles[k]));
                }
            }
        }
        Ok(parts.into_iter().sum())
    }

    /// `U(d) >= -sum_b M(d_b) + 2^(1-p/2) N_c + 4 sum_P |x - y|^-p` for one
    /// droplet.
    pub fn self_energy_check(&self, cells: &[Site]) -> Result<Certificate> {
        if cells.is_empty() {
            return domain("empty droplet");
        }
        let p = self.p();
        let (mut x0, mut y0, mut x1, mut y1) = (i64::MAX, i64::MAX, i64::MIN, i64::MIN);
        for &(x, y) in cells {
            (x0, y0, x1, y1) = (x0.min(x), y0.min(y), x1.max(x), y1.max(y));
        }
        let rect = Rect::new(x0 - 1, y0 - 1, (x1 - x0 + 3) as usize, (y1 - y0 + 3) as usize);
        let set: std::collections::HashSet<Site> = cells.iter().copied().collect();
        let cfg = SpinConfig::from_fn(rect, Boundary::Plus, |s| if set.contains(&s) { -1 } else { 1 })?;
        if crate::config::components(cells).len() != 1 {
            return domain("droplet is not connected");
        }
        let n_c = extract_contours(&cfg).n_c;
        let b = bubble_from_cells(&cfg, cells.to_vec());
        let u = (self.ham.zeta() * cells.len() as f64 - pairs::self_sum(cells, p)) * -2.0;
        let mut pair_terms = pairs_sum(&path_pair_set(cells), p);
        pair_terms = pair_terms * 4.0;
        let rhs = SumResult::exact(self.corner_weight() * n_c as f64) + pair_terms - self.moments(&b.facing);
        Ok(Certificate::new(u, rhs, format!("self-energy, {} cells, N_c = {n_c}", cells.len())))
    }

    /// `H^+ >= sum_T E_T + sum_G E_G` for a plus-boundary configuration.
    pub fn localization_check(&self, cfg: &SpinConfig, part: &TilePartition) -> Result<Localization> {
        if cfg.boundary() != Boundary::Plus {
            return domain("localization needs the plus boundary condition");
        }
        let lhs = self.ham.plus_energy(cfg)?;
        let mut tiles = Vec::new();
        for t in part.bad_tiles() {
            let bubbles = localize_bubbles(cfg, &part.tile_region(t.coords));
            tiles.push((t.coords, self.tile_energy(&bubbles, t.n_c2)));
        }
        let mut regions = Vec::new();
        for (i, g) in part.regions.iter().enumerate() {
            let bubbles = localize_bubbles(cfg, &part.region(i));
            let e = match g.orientation {
                Some(o) => self.region_energy(&bubbles, o)?,
                None if bubbles.is_empty() => SumResult::exact(0.0),
                None => return Err(Error::Consistency("good region with bubbles but no orientation".into())),
            };
            regions.push(e);
        }
        let rhs: SumResult = tiles.iter().map(|t| t.1).chain(regions.iter().copied()).sum();
        let certificate = Certificate::new(lhs, rhs, format!("localization, ell = {}", part.ell));
        Ok(Localization { certificate, tiles, regions })
    }

    /// `E_G' >= ell sum_j e_inf(seq_j) - sum_s f(w1, h, w2)`.
    pub fn lemma23_check(&self, s: &SlicedRegion) -> Result<Certificate> {
        let lhs = self.region_energy(&s.bubbles, Orientation::Vertical)?;
        let en = self.energetics();
        let mut rhs: Vec<SumResult> = s.slices.iter().map(|g| en.e_infinity(&g.seq) * s.ell as f64).collect();
        for seg in &s.segments {
            rhs.push(en.f_interaction(seg.w1, seg.h(), seg.w2)? * -1.0);
        }
        let rhs: SumResult = rhs.into_iter().sum();
        Ok(Certificate::new(
            lhs,
            rhs,
            format!("slices: {} slices, {} segments", s.slices.len(), s.segments.len()),
        ))
    }

    /// `sum_h (e_s(h) - e_s(h*)) A_h` over widths other than `h*`.
    pub fn stripe_penalty(&self, a_h: &BTreeMap<u64, usize>) -> Result<SumResult> {
        let en = self.energetics();
        let mut parts = Vec::new();
        for (&h, &a) in a_h {
            if h != self.h_star {
                parts.push((en.striped_energy_per_site(h)? - self.e_star) * a as f64);
            }
        }
        Ok(parts.into_iter().sum())
    }

    /// `E_G >= e_s(h*) |G| - c1 |tau| |dG| + 1/2 sum_h (e_s(h) - e_s(h*)) A_h`
    /// for the `i`-th good region; `fitted` is the least admissible `c1`.
    pub fn lemma22(&self, cfg: &SpinConfig, part: &TilePartition, i: usize, c1: f64) -> Result<ConstantFit> {
        let g = &part.regions[i];
        let orientation = g.orientation.unwrap_or(Orientation::Vertical);
        let lhs = self.region_energy(&localize_bubbles(cfg, &part.region(i)), orientation)?;
        let base = self.e_star * g.area as f64 + self.stripe_penalty(&g.a_h)? * 0.5;
        let edge = self.tau().abs() * g.perimeter as f64;
        let rhs = base - SumResult::exact(c1 * edge);
        let fitted = (edge > 0.0).then(|| (base.value - lhs.value) / edge);
        Ok(ConstantFit { certificate: Certificate::new(lhs, rhs, format!("good region {i}, c1 = {c1}")), fitted })
    }

    /// `E_T >= ell^2 e_s(h*) + c2 (n_c + |tau|^((p-2)/(p-3)) ell^2 hole)` for
    /// one bad tile; `fitted` is the largest admissible `c2`.
    pub fn lemma1(&self, cfg: &SpinConfig, part: &TilePartition, tile: (i64, i64), c2: f64) -> Result<TileBound> {
        self.check_window(part.ell)?;
        let t = part.tile(tile).ok_or_else(|| Error::Domain(format!("no tile {tile:?}")))?;
        let bubbles = localize_bubbles(cfg, &part.tile_region(tile));
        let lhs = self.tile_energy(&bubbles, t.n_c2);
        let ell = part.ell as f64;
        let p = self.p();
        let weight = 0.5 * t.n_c2 as f64 + if t.hole { self.tau().abs().powf((p - 2.0) / (p - 3.0)) * ell * ell } else { 0.0 };
        let base = self.e_star * (ell * ell);
        let rhs = base + SumResult::exact(c2 * weight);
        let fitted = (weight > 0.0).then(|| (lhs.value - base.value) / weight);
        let mut per_bubble = Vec::new();
        for b in bubbles.iter().filter(|b| b.corners2 > 0) {
            let nu = 0.5 * b.corners2 as f64;
            let own = self.bubble_energy(b) + SumResult::exact(self.corner_weight() * nu);
            let floor = SumResult::exact(self.tau() * b.bonds.len() as f64 + self.corner_weight() * nu);
            per_bubble.push(BubbleCheck {
                erasure: Certificate::new(own, floor, format!("corner bubble at {:?}", b.cells[0])),
                length: b.bonds.len(),
                length_bound: 2.0 * ell + 2.0 * ell * nu,
            });
        }
        Ok(TileBound {
            fit: ConstantFit { certificate: Certificate::new(lhs, rhs, format!("bad tile {tile:?}, c2 = {c2}")), fitted },
            hole: t.hole,
            n_c2: t.n_c2,
            per_bubble,
        })
    }

    /// Both sides of the quantitative bound for a perturbation of the optimal
    /// stripes inside the window of `cfg`, whose boundary must be those
    /// stripes.
    pub fn theorem3(&self, cfg: &SpinConfig, ell: u64, origin: Site, big_c1: f64) -> Result<GroundStateCheck> {
        let p = self.p();
        let (lo, hi) = (self.constants.c0 * self.h_star as f64, 1.0 / (self.constants.window * 0.5 * self.tau().abs()));
        if (ell as f64) < lo - 1e-9 || ell as f64 > hi {
            return domain(format!("tile side {ell} outside [{lo:.1}, {hi:.1}]"));
        }
        match cfg.boundary() {
            Boundary::Striped { width, .. } if width == self.h_star => {}
            b => return domain(format!("boundary {b:?} is not the optimal stripes of width {}", self.h_star)),
        }
        let excess = self.ham.excess_energy(cfg)?;
        let contours = extract_contours(cfg);
        let part = tile_partition(cfg, &contours, ell, origin)?;
        let holes = part.bad_tiles().filter(|t| t.hole).count();
        let mut a_h: BTreeMap<u64, usize> = BTreeMap::new();
        for g in &part.regions {
            for (&h, &a) in &g.a_h {
                *a_h.entry(h).or_insert(0) += a;
            }
        }
        let penalty = self.stripe_penalty(&a_h)? * 0.5;
        let weight = contours.n_c as f64 + (0.5 * self.tau().abs()).powf((p - 2.0) / (p - 3.0)) * (ell * ell) as f64 * holes as f64;
        let rhs = penalty + SumResult::exact(big_c1 * weight);
        let fitted = (weight > 0.0).then(|| (excess.value - penalty.value) / weight);
        let zero = SumResult::exact(0.0);
        Ok(GroundStateCheck {
            bound: ConstantFit { certificate: Certificate::new(excess, rhs, format!("quantitative bound, C1 = {big_c1}")), fitted },
            ground_state: Certificate::new(excess, zero, "ground state"),
            n_c: contours.n_c,
            holes,
        })
    }

    /// `sum_s f(w1, h, w2) <= (C2/C3) sum' [w |tau| + (C3/|tau|)^(1/(p-3)) w (e_s(w) - e_s(h*))]`.
    pub fn f_chain_check(&self, s: &SlicedRegion, c2: f64, c3: f64) -> Result<Certificate> {
        let en = self.energetics();
        let p = self.p();
        let tau = self.tau().abs();
        let x = (c3 / tau).powf(1.0 / (p - 3.0));
        let mut f = Vec::new();
        let mut bound = Vec::new();
        let mut es: HashMap<u64, SumResult> = HashMap::new();
        for seg in &s.segments {
            f.push(en.f_interaction(seg.w1, seg.h(), seg.w2)?);
            for w in [seg.w1, seg.w2].into_iter().flatten() {
                let e = match es.get(&w) {
                    Some(e) => *e,
                    None => *es.entry(w).or_insert(en.striped_energy_per_site(w)?),
                };
                bound.push(((e - self.e_star) * x + SumResult::exact(tau)) * (w as f64 * c2 / c3));
            }
        }
        Ok(Certificate::new(bound.into_iter().sum(), f.into_iter().sum(), "spacing chain"))
    }
}

fn pairs_sum(pairs: &[(Site, Site)], p: f64) -> SumResult {
    let mut acc = crate::kernel::Accumulator::default();
    for &(a, b) in pairs {
        let r2 = ((a.0 - b.0).pow(2) + (a.1 - b.1).pow(2)) as f64;
        acc.add(r2.powf(-0.5 * p));
    }
    acc.result(0.0, 0)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Localization {
    pub certificate: Certificate,
    pub tiles: Vec<((i64, i64), SumResult)>,
    pub regions: Vec<SumResult>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BubbleCheck {
    /// Cost of a cornered bubble against `tau |Gamma| + 2^(1-p/2) nu_c`.
    pub erasure: Certificate,
    pub length: usize,
    /// `2 ell + 2 ell nu_c`.
    pub length_bound: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TileBound {
    pub fit: ConstantFit,
    pub hole: bool,
    pub n_c2: u32,
    pub per_bubble: Vec<BubbleCheck>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GroundStateCheck {
    pub bound: ConstantFit,
    /// Excess energy against zero.
    pub ground_state: Certificate,
    pub n_c: usize,
    pub holes: usize,
}

impl GroundStateCheck {
    /// Nonnegative excess, strictly positive when there are corners.
    pub fn ok(&self) -> bool {
        self.ground_state.ok() && (self.n_c == 0 || self.ground_state.strict())
    }
}

/// Smallest `C2` with `f(w, h, inf) <= C2 w^(4-p)` over the given grid.
pub fn fit_c2(en: &Energetics, ws: &[u64], hs: &[u64]) -> Result<f64> {
    let p = en.params().p;
    let mut c2 = 0.0f64;
    for &w in ws {
        for &h in hs {
            let f = en.f_interaction(Some(w), h, None)?;
            c2 = c2.max(f.hi() * (w as f64).powf(p - 4.0));
        }
    }
    Ok(c2)
}
