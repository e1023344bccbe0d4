//! Spin configurations on a finite window with a prescribed exterior, their
//! energies, and the droplet representation of the plus-boundary energy.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::bounds::Certificate;
use crate::error::{domain, Error, Result};
use crate::geometry::{site_bonds, Bond, Site, NEIGHBOURS};
use crate::kernel::{tail_bound, Accumulator, Columns, SumResult};
use crate::pairs::{self, Patch};
use crate::stripes::Energetics;

/// Axis-aligned window `[x0, x0 + width) x [y0, y0 + height)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Rect {
    pub x0: i64,
    pub y0: i64,
    pub width: usize,
    pub height: usize,
}

impl Rect {
    pub fn new(x0: i64, y0: i64, width: usize, height: usize) -> Self {
        Rect { x0, y0, width, height }
    }

    pub fn x1(&self) -> i64 {
        self.x0 + self.width as i64
    }

    pub fn y1(&self) -> i64 {
        self.y0 + self.height as i64
    }

    pub fn area(&self) -> usize {
        self.width * self.height
    }

    /// Smallest rectangle containing both.
    pub fn union(&self, o: Rect) -> Rect {
        let (x0, y0) = (self.x0.min(o.x0), self.y0.min(o.y0));
        let (x1, y1) = (self.x1().max(o.x1()), self.y1().max(o.y1()));
        Rect::new(x0, y0, (x1 - x0) as usize, (y1 - y0) as usize)
    }

    pub fn contains(&self, (x, y): Site) -> bool {
        x >= self.x0 && x < self.x1() && y >= self.y0 && y < self.y1()
    }

    pub fn index(&self, s: Site) -> Option<usize> {
        self.contains(s)
            .then(|| (s.1 - self.y0) as usize * self.width + (s.0 - self.x0) as usize)
    }

    pub fn site(&self, i: usize) -> Site {
        (self.x0 + (i % self.width) as i64, self.y0 + (i / self.width) as i64)
    }

    /// Sites in row-major order, bottom row first.
    pub fn sites(&self) -> impl Iterator<Item = Site> + '_ {
        (0..self.area()).map(move |i| self.site(i))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Orientation {
    Vertical,
    Horizontal,
}

impl Orientation {
    pub fn swap(self) -> Self {
        match self {
            Orientation::Vertical => Orientation::Horizontal,
            Orientation::Horizontal => Orientation::Vertical,
        }
    }
}

/// What the configuration looks like outside its window.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Boundary {
    Plus,
    Periodic,
    /// Stripes of width `width`; the site with coordinate `u` across the
    /// stripes is minus iff `floor((u + phase) / width)` is odd.
    Striped { width: u64, orientation: Orientation, phase: u64 },
}

impl Boundary {
    pub fn striped(width: u64, orientation: Orientation, phase: u64) -> Result<Self> {
        if width == 0 || phase >= 2 * width {
            return domain(format!("bad stripe boundary: width {width}, phase {phase}"));
        }
        Ok(Boundary::Striped { width, orientation, phase })
    }

    /// Spin of the infinite background, if there is one.
    pub fn background(&self, (x, y): Site) -> Option<i8> {
        match *self {
            Boundary::Plus => Some(1),
            Boundary::Periodic => None,
            Boundary::Striped { width, orientation, phase } => {
                let u = match orientation {
                    Orientation::Vertical => x,
                    Orientation::Horizontal => y,
                };
                let k = (u + phase as i64).div_euclid(width as i64);
                Some(if k.rem_euclid(2) == 1 { -1 } else { 1 })
            }
        }
    }

    fn transposed(self) -> Self {
        match self {
            Boundary::Striped { width, orientation, phase } => {
                Boundary::Striped { width, orientation: orientation.swap(), phase }
            }
            b => b,
        }
    }
}

/// Spins on a window plus the boundary condition that fixes them outside.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SpinConfig {
    rect: Rect,
    spins: Vec<i8>,
    boundary: Boundary,
}

#[derive(Serialize, Deserialize)]
struct ConfigJson {
    origin: [i64; 2],
    boundary: Boundary,
    rows: Vec<String>,
}

impl SpinConfig {
    pub fn new(rect: Rect, spins: Vec<i8>, boundary: Boundary) -> Result<Self> {
        if spins.len() != rect.area() {
            return domain(format!("expected {} spins, got {}", rect.area(), spins.len()));
        }
        if spins.iter().any(|&s| s != 1 && s != -1) {
            return domain("spins must be +1 or -1");
        }
        if boundary == Boundary::Periodic && rect.area() == 0 {
            return domain("periodic window must be nonempty");
        }
        Ok(SpinConfig { rect, spins, boundary })
    }

    pub fn from_fn(rect: Rect, boundary: Boundary, f: impl FnMut(Site) -> i8) -> Result<Self> {
        Self::new(rect, rect.sites().map(f).collect(), boundary)
    }

    pub fn uniform(rect: Rect, spin: i8, boundary: Boundary) -> Result<Self> {
        Self::new(rect, vec![spin; rect.area()], boundary)
    }

    /// The striped background itself on `rect`.
    pub fn optimal_striped(rect: Rect, width: u64, orientation: Orientation, phase: u64) -> Result<Self> {
        let b = Boundary::striped(width, orientation, phase)?;
        Self::from_fn(rect, b, |s| b.background(s).unwrap())
    }

    pub fn rect(&self) -> Rect {
        self.rect
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    pub fn spins(&self) -> &[i8] {
        &self.spins
    }

    /// Spin anywhere in the plane.
    pub fn get(&self, s: Site) -> i8 {
        if let Some(i) = self.rect.index(s) {
            return self.spins[i];
        }
        match self.boundary.background(s) {
            Some(v) => v,
            None => {
                let x = (s.0 - self.rect.x0).rem_euclid(self.rect.width as i64) + self.rect.x0;
                let y = (s.1 - self.rect.y0).rem_euclid(self.rect.height as i64) + self.rect.y0;
                self.spins[self.rect.index((x, y)).unwrap()]
            }
        }
    }

    pub fn set(&mut self, s: Site, v: i8) -> Result<()> {
        if v != 1 && v != -1 {
            return domain("spins must be +1 or -1");
        }
        match self.rect.index(s) {
            Some(i) => {
                self.spins[i] = v;
                Ok(())
            }
            None => domain(format!("site {s:?} outside the window")),
        }
    }

    pub fn minus_sites(&self) -> Vec<Site> {
        self.rect.sites().zip(&self.spins).filter(|(_, &v)| v < 0).map(|(s, _)| s).collect()
    }

    /// Reflection across the diagonal `x = y`.
    pub fn transposed(&self) -> Self {
        let r = self.rect;
        let t = Rect::new(r.y0, r.x0, r.height, r.width);
        let spins = t.sites().map(|(x, y)| self.spins[r.index((y, x)).unwrap()]).collect();
        SpinConfig { rect: t, spins, boundary: self.boundary.transposed() }
    }

    /// Sites in the window where the spin differs from the background.
    pub fn flipped_sites(&self) -> Result<Vec<Site>> {
        if self.boundary == Boundary::Periodic {
            return domain("periodic configurations have no background");
        }
        Ok(self
            .rect
            .sites()
            .zip(&self.spins)
            .filter(|(s, &v)| self.boundary.background(*s) != Some(v))
            .map(|(s, _)| s)
            .collect())
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# origin {} {}", self.rect.x0, self.rect.y0);
        let _ = match self.boundary {
            Boundary::Plus => writeln!(out, "# boundary plus"),
            Boundary::Periodic => writeln!(out, "# boundary periodic"),
            Boundary::Striped { width, orientation, phase } => {
                let o = match orientation {
                    Orientation::Vertical => "vertical",
                    Orientation::Horizontal => "horizontal",
                };
                writeln!(out, "# boundary striped {width} {o} {phase}")
            }
        };
        for row in self.rows() {
            out.push_str(&row);
            out.push('\n');
        }
        out
    }

    fn rows(&self) -> Vec<String> {
        let w = self.rect.width;
        (0..self.rect.height)
            .rev()
            .map(|j| self.spins[j * w..(j + 1) * w].iter().map(|&s| if s > 0 { '+' } else { '-' }).collect())
            .collect()
    }

    fn from_rows(origin: (i64, i64), rows: &[String], boundary: Boundary) -> Result<Self> {
        let height = rows.len();
        let width = rows.first().map_or(0, |r| r.chars().count());
        let mut spins = vec![0i8; width * height];
        for (k, row) in rows.iter().enumerate() {
            if row.chars().count() != width {
                return Err(Error::Parse(format!("row {} has the wrong length", k + 1)));
            }
            let j = height - 1 - k;
            for (i, c) in row.chars().enumerate() {
                spins[j * width + i] = match c {
                    '+' => 1,
                    '-' => -1,
                    _ => return Err(Error::Parse(format!("unexpected character {c:?}"))),
                };
            }
        }
        Self::new(Rect::new(origin.0, origin.1, width, height), spins, boundary)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut origin = (0, 0);
        let mut boundary = Boundary::Plus;
        let mut rows = Vec::new();
        let bad = |l: &str| Error::Parse(format!("bad header line: {l}"));
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty()) {
            let Some(header) = line.strip_prefix('#') else {
                rows.push(line.to_string());
                continue;
            };
            let f: Vec<&str> = header.split_whitespace().collect();
            match f.as_slice() {
                ["origin", x, y] => {
                    origin = (x.parse().map_err(|_| bad(line))?, y.parse().map_err(|_| bad(line))?)
                }
                ["boundary", "plus"] => boundary = Boundary::Plus,
                ["boundary", "periodic"] => boundary = Boundary::Periodic,
                ["boundary", "striped", h, o, ph] => {
                    let o = match *o {
                        "vertical" => Orientation::Vertical,
                        "horizontal" => Orientation::Horizontal,
                        _ => return Err(bad(line)),
                    };
                    boundary = Boundary::striped(h.parse().map_err(|_| bad(line))?, o, ph.parse().map_err(|_| bad(line))?)?;
                }
                _ => {}
            }
        }
        Self::from_rows(origin, &rows, boundary)
    }

    pub fn to_json(&self) -> String {
        let j = ConfigJson { origin: [self.rect.x0, self.rect.y0], boundary: self.boundary, rows: self.rows() };
        serde_json::to_string_pretty(&j).expect("config serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let j: ConfigJson = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        Self::from_rows((j.origin[0], j.origin[1]), &j.rows, j.boundary)
    }

    /// Reads either format, chosen by a leading `{`.
    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        if text.trim_start().starts_with('{') {
            Self::from_json(&text)
        } else {
            Self::parse(&text)
        }
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let json = path.extension().is_some_and(|e| e == "json");
        std::fs::write(path, if json { self.to_json() } else { self.to_text() })?;
        Ok(())
    }
}

/// A maximal nearest-neighbour-connected set of minus sites.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Droplet {
    /// Sorted row-major.
    pub cells: Vec<Site>,
    /// `Gamma(delta)`, sorted.
    pub bonds: Vec<Bond>,
}

impl Droplet {
    pub fn from_cells(mut cells: Vec<Site>) -> Self {
        cells.sort_by_key(|&(x, y)| (y, x));
        cells.dedup();
        let set: std::collections::HashSet<Site> = cells.iter().copied().collect();
        let mut bonds = Vec::new();
        for &c in &cells {
            for (b, d) in site_bonds(c).into_iter().zip(NEIGHBOURS) {
                if !set.contains(&(c.0 + d.0, c.1 + d.1)) {
                    bonds.push(b);
                }
            }
        }
        bonds.sort();
        Droplet { cells, bonds }
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }
}

/// Connected components of `sites` under nearest-neighbour adjacency, in
/// order of their first site (row-major).
pub fn components(sites: &[Site]) -> Vec<Vec<Site>> {
    let index: HashMap<Site, usize> = sites.iter().enumerate().map(|(i, &s)| (s, i)).collect();
    let mut label = vec![usize::MAX; sites.len()];
    let mut order: Vec<usize> = (0..sites.len()).collect();
    order.sort_by_key(|&i| (sites[i].1, sites[i].0));
    let mut out = Vec::new();
    for &i in &order {
        if label[i] != usize::MAX {
            continue;
        }
        let id = out.len();
        let mut comp = Vec::new();
        let mut stack = vec![i];
        label[i] = id;
        while let Some(k) = stack.pop() {
            let (x, y) = sites[k];
            comp.push(sites[k]);
            for (dx, dy) in NEIGHBOURS {
                if let Some(&n) = index.get(&(x + dx, y + dy)) {
                    if label[n] == usize::MAX {
                        label[n] = id;
                        stack.push(n);
                    }
                }
            }
        }
        comp.sort_by_key(|&(x, y)| (y, x));
        out.push(comp);
    }
    out
}

/// Droplets of the minus sites inside the window.
pub fn droplet_decompose(cfg: &SpinConfig) -> Vec<Droplet> {
    components(&cfg.minus_sites()).into_iter().map(Droplet::from_cells).collect()
}

/// Number of nearest-neighbour pairs with opposite spins that touch the
/// window, each pair counted once.
fn domain_wall_count(cfg: &SpinConfig) -> usize {
    let r = cfg.rect();
    let mut n = 0;
    for s in r.sites() {
        let v = cfg.get(s);
        for (dx, dy) in NEIGHBOURS {
            let t = (s.0 + dx, s.1 + dy);
            // pairs inside the window are seen twice
            if r.contains(t) && (dx < 0 || dy < 0) {
                continue;
            }
            if cfg.get(t) != v {
                n += 1;
            }
        }
    }
    n
}

/// Stripe background as seen from one site: its spin and the field
/// `O(x) = sum_{y != x} s_y |x - y|^-p`.
#[derive(Clone, Debug)]
struct Background {
    boundary: Boundary,
    width: u64,
    field: Vec<SumResult>,
}

impl Background {
    fn at(&self, (x, y): Site) -> (i8, SumResult) {
        match self.boundary {
            Boundary::Striped { orientation, phase, .. } => {
                let u = match orientation {
                    Orientation::Vertical => x,
                    Orientation::Horizontal => y,
                };
                let r = (u + phase as i64).rem_euclid(2 * self.width as i64) as usize;
                (if r as u64 >= self.width { -1 } else { 1 }, self.field[r])
            }
            _ => (1, self.field[0]),
        }
    }
}

/// Per-period images folded onto a torus: `K_per(d) = sum_n |d + n L|^-p`.
#[derive(Clone, Debug)]
pub struct TorusKernel {
    pub lx: usize,
    pub ly: usize,
    values: Vec<SumResult>,
}

impl TorusKernel {
    /// Offsets are reduced modulo the torus; `K_per(0)` sums the nonzero
    /// images of the origin.
    pub fn get(&self, dx: i64, dy: i64) -> SumResult {
        let i = dx.rem_euclid(self.lx as i64) as usize;
        let j = dy.rem_euclid(self.ly as i64) as usize;
        self.values[j * self.lx + i]
    }
}

/// Energies of planar configurations for one parameter set.
#[derive(Debug)]
pub struct Hamiltonian {
    en: Energetics,
    zeta: SumResult,
    line_zeta: SumResult,
}

impl Hamiltonian {
    pub fn new(en: Energetics) -> Result<Self> {
        let params = *en.params();
        if params.d != 2 {
            return domain(format!("configurations are planar, got d = {}", params.d));
        }
        let zeta = en.columns().lattice_zeta()?;
        let line_zeta = Columns::new(1, params.p)?.lattice_zeta()?;
        Ok(Hamiltonian { en, zeta, line_zeta })
    }

    pub fn energetics(&self) -> &Energetics {
        &self.en
    }

    pub fn with_coupling(&self, j: f64) -> Result<Self> {
        Ok(Hamiltonian { en: self.en.with_coupling(j)?, zeta: self.zeta, line_zeta: self.line_zeta })
    }

    fn p(&self) -> f64 {
        self.en.params().p
    }

    fn j(&self) -> f64 {
        self.en.params().j
    }

    /// `sum_{x != 0} |x|^-p` over the plane.
    pub fn zeta(&self) -> SumResult {
        self.zeta
    }

    /// Field of the striped background of width `h` at a site whose
    /// coordinate across the stripes, shifted by the phase, is `r mod 2h`.
    pub fn stripe_field(&self, h: u64) -> Result<Vec<SumResult>> {
        if h == 0 {
            return domain("stripe width must be at least 1");
        }
        let period = 2 * h;
        let spin = |u: i64| -> f64 { if u.rem_euclid(period as i64) as u64 >= h { -1.0 } else { 1.0 } };
        let n = 512u64.max(64 * h).div_ceil(period) * period;
        Ok((0..period as i64)
            .map(|r| {
                let c = |a: u64| spin(r + a as i64) + spin(r - a as i64);
                let mut acc = Accumulator::default();
                let mut tail = spin(r).abs() * self.line_zeta.tail_bound;
                for a in (1..=n).rev() {
                    let t = self.en.t(a);
                    acc.add(c(a) * t.value);
                    tail += c(a).abs() * t.tail_bound;
                }
                acc.add(spin(r) * self.line_zeta.value);
                // zero-mean periodic weights against a decreasing T
                let mut partial = 0.0f64;
                let mut smax = 0.0f64;
                for a in n + 1..=n + period {
                    partial += c(a);
                    smax = smax.max(partial.abs());
                }
                acc.result(tail + smax * self.en.t(n + 1).hi(), n)
            })
            .collect())
    }

    fn background(&self, boundary: Boundary) -> Result<Background> {
        match boundary {
            Boundary::Plus => Ok(Background { boundary, width: 0, field: vec![self.zeta] }),
            Boundary::Striped { width, .. } => {
                Ok(Background { boundary, width, field: self.stripe_field(width)? })
            }
            Boundary::Periodic => domain("periodic configurations have no infinite background"),
        }
    }

    /// `H^+` through the closed form `2J|Gamma| - 2|Delta| Z + 2 P(Delta)`.
    pub fn plus_energy(&self, cfg: &SpinConfig) -> Result<SumResult> {
        if cfg.boundary() != Boundary::Plus {
            return domain("plus-boundary energy needs a plus boundary");
        }
        let minus = cfg.minus_sites();
        let walls = domain_wall_count(cfg) as f64;
        let p = pairs::self_sum(&minus, self.p());
        Ok(SumResult::exact(2.0 * self.j() * walls) - self.zeta * (2.0 * minus.len() as f64) + p * 2.0)
    }

    /// `H^+` summed site by site over a disk of radius `r` around every minus
    /// spin; the rest of the plane enters through the kernel tail bound.
    pub fn plus_energy_direct(&self, cfg: &SpinConfig, r: u64) -> Result<SumResult> {
        if cfg.boundary() != Boundary::Plus {
            return domain("plus-boundary energy needs a plus boundary");
        }
        let p = self.p();
        let ri = r as i64;
        let mut offsets = Vec::new();
        for dy in -ri..=ri {
            for dx in -ri..=ri {
                let d2 = dx * dx + dy * dy;
                if d2 > 0 && d2 <= ri * ri {
                    offsets.push((dx, dy, (d2 as f64).powf(-0.5 * p)));
                }
            }
        }
        let mut acc = Accumulator::default();
        let mut walls = 0usize;
        let minus = cfg.minus_sites();
        for &(x, y) in &minus {
            for &(dx, dy, k) in &offsets {
                if cfg.get((x + dx, y + dy)) > 0 {
                    acc.add(-2.0 * k);
                    if dx.abs() + dy.abs() == 1 {
                        walls += 1;
                    }
                }
            }
        }
        acc.add(2.0 * self.j() * walls as f64);
        // every omitted term is negative: shift to the middle of the bracket
        let t = minus.len() as f64 * tail_bound(r, p, 2)?;
        acc.add(-t);
        Ok(acc.result(t, r))
    }

    /// `U(delta) = -2 sum_{x in delta, y notin delta} |x - y|^-p`.
    pub fn droplet_self_energy(&self, d: &Droplet) -> SumResult {
        let p = pairs::self_sum(&d.cells, self.p());
        p * 2.0 - self.zeta * (2.0 * d.len() as f64)
    }

    /// `W(delta, delta') = 4 sum_{x in delta, y in delta'} |x - y|^-p`.
    pub fn droplet_interaction(&self, a: &Droplet, b: &Droplet) -> Result<SumResult> {
        let set: std::collections::HashSet<&Site> = a.cells.iter().collect();
        if b.cells.iter().any(|c| set.contains(c)) {
            return domain("droplets overlap");
        }
        Ok(pairs::cross_sum(&a.cells, &b.cells, self.p()) * 4.0)
    }

    /// Droplet side of the identity for `H^+`.
    pub fn droplet_energy(&self, cfg: &SpinConfig) -> Result<SumResult> {
        let drops = droplet_decompose(cfg);
        let mut total = SumResult::exact(0.0);
        for (i, d) in drops.iter().enumerate() {
            total = total + SumResult::exact(2.0 * self.j() * d.bonds.len() as f64) + self.droplet_self_energy(d);
            for e in &drops[i + 1..] {
                // half of the ordered double sum
                total = total + self.droplet_interaction(d, e)?;
            }
        }
        Ok(total)
    }

    /// Direct `H^+` against the droplet representation.
    pub fn droplet_identity_check(&self, cfg: &SpinConfig, r: u64) -> Result<Certificate> {
        let direct = self.plus_energy_direct(cfg, r)?;
        let drops = self.droplet_energy(cfg)?;
        Ok(Certificate::new(direct, drops, format!("droplet identity, radius {r}")))
    }

    /// `H_X(sigma_X | s)` with `X` the window and `s` the background given
    /// by the boundary condition.
    pub fn relative_energy(&self, cfg: &SpinConfig) -> Result<SumResult> {
        let bg = self.background(cfg.boundary())?;
        let r = cfg.rect();
        if r.area() == 0 {
            return Ok(SumResult::exact(0.0));
        }
        let p = self.p();
        let sigma = Patch::weighted(r.sites().map(|s| (s, cfg.get(s) as f64)));
        let back = Patch::weighted(r.sites().map(|s| (s, bg.at(s).0 as f64)));
        let qss = pairs::pair_sum(&sigma, &sigma, p);
        let qsb = pairs::pair_sum(&sigma, &back, p);
        let px = pairs::rectangle_self_sum(r.width, r.height, p);
        let mut field = Vec::with_capacity(r.area());
        for s in r.sites() {
            field.push(bg.at(s).1 * cfg.get(s) as f64);
        }
        let field: SumResult = field.into_iter().sum();
        let walls = SumResult::exact(2.0 * self.j() * domain_wall_count(cfg) as f64);
        Ok(walls + qss * 0.5 - qsb + px * 0.5 + field - self.zeta * r.area() as f64)
    }

    /// `H_X(sigma_X | s) - H_X(s_X | s)`, from the set `F` of flipped sites:
    /// `2J sum_{<xy>, x in F, y notin F} s_x s_y - 2 sum_F s_x O(x)
    ///  + 2 sum_{x != y in F} s_x s_y |x - y|^-p`.
    pub fn excess_energy(&self, cfg: &SpinConfig) -> Result<SumResult> {
        let bg = self.background(cfg.boundary())?;
        let flips = cfg.flipped_sites()?;
        Ok(self.flip_energy(&flips, &bg, |a, b| pairs::pair_sum(a, b, self.p())))
    }

    fn flip_energy(&self, flips: &[Site], bg: &Background, pair: impl Fn(&Patch, &Patch) -> SumResult) -> SumResult {
        if flips.is_empty() {
            return SumResult::exact(0.0);
        }
        let set: std::collections::HashSet<Site> = flips.iter().copied().collect();
        let mut nn = 0i64;
        let mut field = Vec::with_capacity(flips.len());
        for &x in flips {
            let (sx, ox) = bg.at(x);
            for (dx, dy) in NEIGHBOURS {
                let y = (x.0 + dx, x.1 + dy);
                if !set.contains(&y) {
                    nn += (sx * bg.at(y).0) as i64;
                }
            }
            field.push(ox * sx as f64);
        }
        let field: SumResult = field.into_iter().sum();
        let s = Patch::weighted(flips.iter().map(|&x| (x, bg.at(x).0 as f64)));
        SumResult::exact(2.0 * self.j() * nn as f64) - field * 2.0 + pair(&s, &s) * 2.0
    }

    /// `K_per` on an `lx x ly` torus. One-row tori use the periodised line
    /// potential; otherwise images are folded from a disk.
    pub fn torus_kernel(&self, lx: usize, ly: usize) -> Result<TorusKernel> {
        if lx == 0 || ly == 0 {
            return domain("torus sides must be positive");
        }
        let p = self.p();
        if ly == 1 {
            let cols = self.en.columns();
            let mut values = Vec::with_capacity(lx);
            // K_per(0) on a ring: the images of the origin
            values.push(self.line_zeta + self.ring_self_images(lx)?);
            for x in 1..lx {
                values.push(cols.periodized(x as u64, Some(lx as u64))?);
            }
            return Ok(TorusKernel { lx, ly, values });
        }
        let rho = (8 * lx.max(ly)).max(256) as f64;
        let s = 0.5 * ((lx * lx + ly * ly) as f64).sqrt();
        let ri = rho as i64;
        let mut acc = vec![Accumulator::default(); lx * ly];
        for b in -ri..=ri {
            let xr = ((rho * rho - (b * b) as f64).max(0.0)).sqrt().floor() as i64;
            for a in -xr..=xr {
                if a == 0 && b == 0 {
                    continue;
                }
                let i = a.rem_euclid(lx as i64) as usize + b.rem_euclid(ly as i64) as usize * lx;
                acc[i].add(((a * a + b * b) as f64).powf(-0.5 * p));
            }
        }
        let tail = (rho / (rho - s)).powf(p) * 2.0 * std::f64::consts::PI * (rho - s).powf(2.0 - p)
            / ((p - 2.0) * (lx * ly) as f64);
        let values = acc.iter().map(|a| a.result(tail, ri as u64)).collect();
        Ok(TorusKernel { lx, ly, values })
    }

    /// `sum_{n != 0} T(|n| L)` minus the on-axis part already in the line
    /// zeta: what the origin sees of its own images on a ring of length `L`.
    fn ring_self_images(&self, l: usize) -> Result<SumResult> {
        let cols = self.en.columns();
        let mut acc = Accumulator::default();
        let mut tail = 0.0;
        let n = 4096u64;
        for k in (1..=n).rev() {
            let t = cols.transverse((k * l as u64) as f64);
            acc.add(2.0 * t.value);
            tail += 2.0 * t.tail_bound;
        }
        let (_, hi) = cols.asymptotic_tail(n + 1, cols.sigma());
        let hi = 2.0 * hi * (l as f64).powf(-cols.sigma());
        acc.add(0.5 * hi);
        Ok(acc.result(tail + 0.5 * hi, n))
    }

    /// Energy per period of the periodic extension of the window.
    pub fn periodic_energy(&self, cfg: &SpinConfig) -> Result<SumResult> {
        if cfg.boundary() != Boundary::Periodic {
            return domain("periodic energy needs a periodic boundary");
        }
        let r = cfg.rect();
        let kp = self.torus_kernel(r.width, r.height)?;
        self.periodic_energy_with(cfg, &kp)
    }

    pub fn periodic_energy_with(&self, cfg: &SpinConfig, kp: &TorusKernel) -> Result<SumResult> {
        let r = cfg.rect();
        if (kp.lx, kp.ly) != (r.width, r.height) {
            return domain("torus kernel does not match the window");
        }
        let mut walls = 0usize;
        for s in r.sites() {
            let v = cfg.get(s);
            walls += (cfg.get((s.0 + 1, s.1)) != v) as usize + (cfg.get((s.0, s.1 + 1)) != v) as usize;
        }
        let minus = cfg.minus_sites();
        let plus: Vec<Site> = r.sites().filter(|&s| cfg.get(s) > 0).collect();
        let c = pairs::correlate(&Patch::indicator(&minus), &Patch::indicator(&plus), true);
        let mut acc = Accumulator::default();
        let mut tail = 0.0;
        for j in 0..c.h {
            for i in 0..c.w {
                let n = c.v[j * c.w + i];
                if n != 0.0 {
                    let k = kp.get(c.x0 + i as i64, c.y0 + j as i64);
                    acc.add(-2.0 * n * k.value);
                    tail += 2.0 * n * k.tail_bound;
                }
            }
        }
        acc.add(2.0 * self.j() * walls as f64);
        Ok(acc.result(tail, 0))
    }

    /// Excess of the periodic extension over the striped background on an
    /// `lx x ly` torus, for a flip set inside it.
    fn periodic_flip_energy(&self, flips: &[Site], bg: &Background, lx: usize, ly: usize) -> Result<SumResult> {
        let p = self.p();
        let mut cache: HashMap<(i64, i64), SumResult> = HashMap::new();
        let base = self.flip_energy(flips, bg, |_, _| SumResult::exact(0.0));
        let mut acc = Vec::new();
        for &x in flips {
            for &y in flips {
                let d = ((y.0 - x.0).rem_euclid(lx as i64), (y.1 - x.1).rem_euclid(ly as i64));
                let k = *cache.entry(d).or_insert_with(|| torus_kernel_at(d, lx, ly, p));
                acc.push(k * (2.0 * (bg.at(x).0 * bg.at(y).0) as f64));
            }
        }
        // wrapped nearest-neighbour pairs between flipped sites
        let set: std::collections::HashSet<Site> = flips
            .iter()
            .map(|&(x, y)| (x.rem_euclid(lx as i64), y.rem_euclid(ly as i64)))
            .collect();
        if set.len() != flips.len() {
            return domain("flip set does not fit in the torus");
        }
        let mut fix = 0i64;
        for &x in flips {
            let (sx, _) = bg.at(x);
            for (dx, dy) in NEIGHBOURS {
                let y = (x.0 + dx, x.1 + dy);
                let w = (y.0.rem_euclid(lx as i64), y.1.rem_euclid(ly as i64));
                if set.contains(&w) && !flips.contains(&y) {
                    // counted as an outside neighbour, but it is a flipped image
                    fix -= (sx * bg.at(y).0) as i64;
                }
            }
        }
        Ok(base + acc.into_iter().sum() + SumResult::exact(2.0 * self.j() * fix as f64))
    }

    /// Compares the infinite-volume excess of a striped-boundary
    /// perturbation with its periodic counterpart on growing tori, and the
    /// per-copy plus-boundary energy of `M x M` juxtaposed copies with the
    /// periodic energy.
    pub fn boundary_reduction_check(&self, cfg: &SpinConfig, ls: &[u64], ms: &[u64]) -> Result<ReductionReport> {
        let Boundary::Striped { width, .. } = cfg.boundary() else {
            return domain("boundary reduction needs a striped boundary");
        };
        let r = cfg.rect();
        let bg = self.background(cfg.boundary())?;
        let flips = cfg.flipped_sites()?;
        let excess = self.excess_energy(cfg)?;
        let mut periodic = Vec::new();
        for &l in ls {
            if l % (2 * width) != 0 {
                return domain(format!("torus side {l} not divisible by 2h = {}", 2 * width));
            }
            if (l as usize) < r.width.max(r.height) {
                return domain(format!("torus side {l} smaller than the window"));
            }
            let e = self.periodic_flip_energy(&flips, &bg, l as usize, l as usize)?;
            periodic.push(ReductionStep { size: l, energy: e, difference: (e.value - excess.value).abs() });
        }
        let mut juxtaposition = Vec::new();
        let mut target = None;
        if let Some(&l) = ls.first() {
            let l = l as i64;
            // one period: the window's spins on the torus, background elsewhere
            let torus = Rect::new(r.x0, r.y0, l as usize, l as usize);
            let cell = SpinConfig::from_fn(torus, Boundary::Periodic, |s| cfg.get(s))?;
            let per = self.periodic_energy(&cell)?;
            target = Some(per);
            for &m in ms {
                let big = Rect::new(r.x0, r.y0, (m as i64 * l) as usize, (m as i64 * l) as usize);
                let tiled = SpinConfig::from_fn(big, Boundary::Plus, |s| cell.get(s))?;
                let e = self.plus_energy(&tiled)? * (1.0 / (m * m) as f64);
                juxtaposition.push(ReductionStep { size: m, energy: e, difference: (e.value - per.value).abs() });
            }
        }
        Ok(ReductionReport { excess, periodic, juxtaposition, periodic_energy: target })
    }
}

/// `K_per(d)` for one offset by direct image summation.
pub fn torus_kernel_at(d: (i64, i64), lx: usize, ly: usize, p: f64) -> SumResult {
    let (lxf, lyf) = (lx as f64, ly as f64);
    let rho = 64.0 * lxf.max(lyf);
    let s = 0.5 * (lxf * lxf + lyf * lyf).sqrt();
    let nmax = (rho / lxf).ceil() as i64 + 1;
    let mmax = (rho / lyf).ceil() as i64 + 1;
    let mut acc = Accumulator::default();
    for m in -mmax..=mmax {
        for n in -nmax..=nmax {
            let x = (d.0 + n * lx as i64) as f64;
            let y = (d.1 + m * ly as i64) as f64;
            let r2 = x * x + y * y;
            if r2 > 0.0 && r2 <= rho * rho {
                acc.add(r2.powf(-0.5 * p));
            }
        }
    }
    let tail = (rho / (rho - s)).powf(p) * 2.0 * std::f64::consts::PI * (rho - s).powf(2.0 - p) / ((p - 2.0) * lxf * lyf);
    acc.result(tail, rho as u64)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ReductionStep {
    /// Torus side or juxtaposition factor.
    pub size: u64,
    pub energy: SumResult,
    pub difference: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ReductionReport {
    pub excess: SumResult,
    pub periodic: Vec<ReductionStep>,
    pub juxtaposition: Vec<ReductionStep>,
    pub periodic_energy: Option<SumResult>,
}
