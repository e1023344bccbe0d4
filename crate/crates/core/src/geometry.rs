//! Contours, corners, tilings, bubbles and the slicing of good regions.
//!
//! Dual-lattice conventions: the dual vertex `(x, y)` is the lower-left
//! corner of site `(x, y)`. A vertical bond `V(x, y)` runs from `(x, y)` to
//! `(x, y + 1)` and separates sites `(x - 1, y)` and `(x, y)`; a horizontal
//! bond `H(x, y)` runs from `(x, y)` to `(x + 1, y)` and separates
//! `(x, y - 1)` and `(x, y)`.

use std::collections::{BTreeMap, HashMap, HashSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{components, droplet_decompose, Boundary, Orientation, Rect, SpinConfig};
use crate::error::{domain, Error, Result};
use crate::stripes::StripeSequence;

pub type Site = (i64, i64);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Axis {
    V,
    H,
}

/// A dual bond separating two nearest-neighbour sites.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Bond {
    pub axis: Axis,
    pub x: i64,
    pub y: i64,
}

impl Bond {
    pub fn v(x: i64, y: i64) -> Self {
        Bond { axis: Axis::V, x, y }
    }

    pub fn h(x: i64, y: i64) -> Self {
        Bond { axis: Axis::H, x, y }
    }

    /// The two sites it separates, lower/left one first.
    pub fn sites(&self) -> [Site; 2] {
        match self.axis {
            Axis::V => [(self.x - 1, self.y), (self.x, self.y)],
            Axis::H => [(self.x, self.y - 1), (self.x, self.y)],
        }
    }

    /// The bond between two nearest neighbours.
    pub fn between(a: Site, b: Site) -> Option<Self> {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        match (hi.0 - lo.0, hi.1 - lo.1) {
            (1, 0) => Some(Bond::v(hi.0, hi.1)),
            (0, 1) => Some(Bond::h(hi.0, hi.1)),
            _ => None,
        }
    }

    /// Dual-lattice endpoints.
    pub fn ends(&self) -> [Site; 2] {
        match self.axis {
            Axis::V => [(self.x, self.y), (self.x, self.y + 1)],
            Axis::H => [(self.x, self.y), (self.x + 1, self.y)],
        }
    }
}

/// The four bonds of a site: left, right, down, up.
pub fn site_bonds((x, y): Site) -> [Bond; 4] {
    [Bond::v(x, y), Bond::v(x + 1, y), Bond::h(x, y), Bond::h(x, y + 1)]
}

pub const NEIGHBOURS: [(i64, i64); 4] = [(-1, 0), (1, 0), (0, -1), (0, 1)];


/// The bonds at a dual vertex, in the order up, right, down, left.
fn vertex_bonds((x, y): Site) -> [Bond; 4] {
    [Bond::v(x, y), Bond::h(x, y), Bond::v(x, y - 1), Bond::h(x - 1, y)]
}

/// How the boundary bonds at a dual vertex are joined into contours, as
/// pairs of indices into [`vertex_bonds`]. Four-valent vertices are chopped
/// so that the two minus squares are cut off the vertex.
fn vertex_pairs(minus: &impl Fn(Site) -> bool, (x, y): Site) -> Vec<(usize, usize)> {
    let ne = minus((x, y));
    let nw = minus((x - 1, y));
    let sw = minus((x - 1, y - 1));
    let se = minus((x, y - 1));
    let present = [nw != ne, se != ne, sw != se, sw != nw];
    let idx: Vec<usize> = (0..4).filter(|&i| present[i]).collect();
    match idx.len() {
        2 => vec![(idx[0], idx[1])],
        4 if ne => vec![(0, 1), (2, 3)],
        4 => vec![(0, 3), (1, 2)],
        _ => Vec::new(),
    }
}

fn orthogonal(a: usize, b: usize) -> bool {
    (a + b) % 2 == 1
}

/// The bond joined to `b` at its endpoint `v`, and whether they meet at a
/// corner.
fn partner(minus: &impl Fn(Site) -> bool, b: Bond, v: Site) -> Option<(Bond, bool)> {
    let around = vertex_bonds(v);
    let k = around.iter().position(|&c| c == b)?;
    vertex_pairs(minus, v).into_iter().find_map(|(i, j)| {
        if i == k {
            Some((around[j], orthogonal(i, j)))
        } else if j == k {
            Some((around[i], orthogonal(i, j)))
        } else {
            None
        }
    })
}

/// Number of endpoints of `b` at which its contour turns.
pub fn corner_ends(cfg: &SpinConfig, b: Bond) -> u32 {
    let minus = |s: Site| cfg.get(s) < 0;
    b.ends().iter().filter(|&&v| matches!(partner(&minus, b, v), Some((_, true)))).count() as u32
}

/// The site of `b` carrying the minus spin, if `b` is a domain wall.
pub fn minus_side(cfg: &SpinConfig, b: Bond) -> Option<Site> {
    let [a, c] = b.sites();
    match (cfg.get(a) < 0, cfg.get(c) < 0) {
        (true, false) => Some(a),
        (false, true) => Some(c),
        _ => None,
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Contour {
    /// Consecutive bonds along the polygon.
    pub bonds: Vec<Bond>,
    /// False for chains cut by the edge of the window.
    pub closed: bool,
    pub corners: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ContourSet {
    /// `Gamma(Delta)`: bonds whose minus site lies in the window, sorted.
    pub bonds: Vec<Bond>,
    pub contours: Vec<Contour>,
    pub n_c: usize,
}

/// Boundary of the minus set of the window, split into contours after
/// chopping four-valent vertices.
pub fn extract_contours(cfg: &SpinConfig) -> ContourSet {
    let minus = |s: Site| cfg.get(s) < 0;
    let mut bonds = Vec::new();
    for s in cfg.minus_sites() {
        for (b, d) in site_bonds(s).into_iter().zip(NEIGHBOURS) {
            if !minus((s.0 + d.0, s.1 + d.1)) {
                bonds.push(b);
            }
        }
    }
    bonds.sort();
    let set: HashSet<Bond> = bonds.iter().copied().collect();
    let mut seen: HashSet<Bond> = HashSet::new();
    let mut contours = Vec::new();
    // follows the chain from `b` out through endpoint `v`
    let walk = |start: Bond, v: Site, seen: &mut HashSet<Bond>| -> (Vec<(Bond, bool)>, bool) {
        let mut out = Vec::new();
        let (mut cur, mut v) = (start, v);
        loop {
            let Some((next, turn)) = partner(&minus, cur, v) else { return (out, false) };
            if next == start {
                out.push((next, turn));
                return (out, true);
            }
            if !set.contains(&next) || !seen.insert(next) {
                return (out, false);
            }
            out.push((next, turn));
            let e = next.ends();
            v = if e[0] == v { e[1] } else { e[0] };
            cur = next;
        }
    };
    for &b in &bonds {
        if !seen.insert(b) {
            continue;
        }
        let ends = b.ends();
        let (fwd, closed) = walk(b, ends[1], &mut seen);
        if closed {
            let corners = fwd.iter().filter(|t| t.1).count();
            let mut cb = vec![b];
            cb.extend(fwd[..fwd.len() - 1].iter().map(|t| t.0));
            contours.push(Contour { bonds: cb, closed: true, corners });
        } else {
            let (back, _) = walk(b, ends[0], &mut seen);
            let mut cb: Vec<Bond> = back.iter().rev().map(|t| t.0).collect();
            cb.push(b);
            cb.extend(fwd.iter().map(|t| t.0));
            let corners = fwd.iter().chain(&back).filter(|t| t.1).count();
            contours.push(Contour { bonds: cb, closed: false, corners });
        }
    }
    let n_c = contours.iter().map(|c| c.corners).sum();
    ContourSet { bonds, contours, n_c }
}

/// A set of sites. With `open` set, every site outside that rectangle also
/// belongs to the region.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Region {
    cells: HashSet<Site>,
    open: Option<Rect>,
}

impl Region {
    pub fn from_cells(cells: impl IntoIterator<Item = Site>) -> Self {
        Region { cells: cells.into_iter().collect(), open: None }
    }

    /// Union of `ell`-tiles with the given tile indices.
    pub fn from_tiles(ell: u64, origin: Site, tiles: &[(i64, i64)]) -> Self {
        let l = ell as i64;
        let mut cells = HashSet::new();
        for &(tx, ty) in tiles {
            for y in 0..l {
                for x in 0..l {
                    cells.insert((origin.0 + tx * l + x, origin.1 + ty * l + y));
                }
            }
        }
        Region { cells, open: None }
    }

    pub fn with_exterior(mut self, inner: Rect) -> Self {
        self.open = Some(inner);
        self
    }

    pub fn contains(&self, s: Site) -> bool {
        self.cells.contains(&s) || self.open.is_some_and(|r| !r.contains(s))
    }

    /// Finite part, row-major.
    pub fn cells(&self) -> Vec<Site> {
        let mut v: Vec<Site> = self.cells.iter().copied().collect();
        v.sort_by_key(|&(x, y)| (y, x));
        v
    }

    pub fn area(&self) -> usize {
        self.cells.len()
    }

    pub fn is_open(&self) -> bool {
        self.open.is_some()
    }

    /// Number of unit edges between the finite part and the complement.
    pub fn perimeter(&self) -> usize {
        let mut n = 0;
        for &(x, y) in &self.cells {
            for (dx, dy) in NEIGHBOURS {
                if !self.contains((x + dx, y + dy)) {
                    n += 1;
                }
            }
        }
        n
    }

    pub fn transposed(&self) -> Self {
        Region {
            cells: self.cells.iter().map(|&(x, y)| (y, x)).collect(),
            open: self.open.map(|r| Rect::new(r.y0, r.x0, r.height, r.width)),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tile {
    pub coords: (i64, i64),
    /// Twice the corner count `n_c(T)`.
    pub n_c2: u32,
    pub hole: bool,
    pub bad: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GoodRegion {
    pub tiles: Vec<(i64, i64)>,
    /// `None` when no contour enters the region.
    pub orientation: Option<Orientation>,
    pub area: usize,
    /// True when the region continues into the striped exterior.
    pub open: bool,
    /// Area of rectangular stripe portions by width.
    pub a_h: BTreeMap<u64, usize>,
    /// `|dG|`: unit edges shared with bad tiles.
    pub perimeter: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TilePartition {
    pub ell: u64,
    pub origin: Site,
    pub n_c: usize,
    pub tiles: Vec<Tile>,
    pub regions: Vec<GoodRegion>,
    /// Tile index ranges `[tx0, tx1) x [ty0, ty1)` covering the window.
    pub span: (i64, i64, i64, i64),
}

fn tile_of(ell: u64, origin: Site, (x, y): Site) -> (i64, i64) {
    let l = ell as i64;
    ((x - origin.0).div_euclid(l), (y - origin.1).div_euclid(l))
}

/// Whether the `ell`-tile at `t` contains a `floor(ell/5)`-square of equal
/// spins.
fn has_hole(cfg: &SpinConfig, ell: u64, origin: Site, (tx, ty): (i64, i64)) -> bool {
    let l = ell as usize;
    let s = l / 5;
    let (x0, y0) = (origin.0 + tx * ell as i64, origin.1 + ty * ell as i64);
    // prefix sums of minus counts
    let mut pre = vec![0u32; (l + 1) * (l + 1)];
    for j in 0..l {
        for i in 0..l {
            let m = (cfg.get((x0 + i as i64, y0 + j as i64)) < 0) as u32;
            pre[(j + 1) * (l + 1) + i + 1] = m + pre[j * (l + 1) + i + 1] + pre[(j + 1) * (l + 1) + i] - pre[j * (l + 1) + i];
        }
    }
    let full = (s * s) as u32;
    for j in 0..=l - s {
        for i in 0..=l - s {
            let c = pre[(j + s) * (l + 1) + i + s] + pre[j * (l + 1) + i] - pre[j * (l + 1) + i + s] - pre[(j + s) * (l + 1) + i];
            if c == 0 || c == full {
                return true;
            }
        }
    }
    false
}

/// Paves the plane with `ell`-tiles and classifies those meeting the window.
pub fn tile_partition(cfg: &SpinConfig, contours: &ContourSet, ell: u64, origin: Site) -> Result<TilePartition> {
    if ell < 5 {
        return domain(format!("tile side {ell} below 5"));
    }
    let r = cfg.rect();
    let (tx0, ty0) = tile_of(ell, origin, (r.x0, r.y0));
    let (tx1, ty1) = tile_of(ell, origin, (r.x1() - 1, r.y1() - 1));
    let (tx1, ty1) = (tx1 + 1, ty1 + 1);
    let nx = (tx1 - tx0) as usize;
    let idx = |(tx, ty): (i64, i64)| -> Option<usize> {
        (tx >= tx0 && tx < tx1 && ty >= ty0 && ty < ty1).then(|| (ty - ty0) as usize * nx + (tx - tx0) as usize)
    };
    let mut n_c2 = vec![0u32; nx * (ty1 - ty0) as usize];
    let mut axes: Vec<[bool; 2]> = vec![[false; 2]; n_c2.len()];
    for &b in &contours.bonds {
        let m = minus_side(cfg, b).ok_or_else(|| Error::Consistency(format!("{b:?} is not a domain wall")))?;
        let k = idx(tile_of(ell, origin, m)).ok_or_else(|| Error::Consistency(format!("{b:?} outside tiling")))?;
        n_c2[k] += corner_ends(cfg, b);
        axes[k][(b.axis == Axis::H) as usize] = true;
    }
    let coords: Vec<(i64, i64)> = (ty0..ty1).flat_map(|ty| (tx0..tx1).map(move |tx| (tx, ty))).collect();
    let tiles: Vec<Tile> = coords
        .par_iter()
        .zip(&n_c2)
        .map(|(&c, &n)| {
            let hole = has_hole(cfg, ell, origin, c);
            Tile { coords: c, n_c2: n, hole, bad: n > 0 || hole }
        })
        .collect();
    let open_exterior = matches!(cfg.boundary(), Boundary::Striped { .. });
    let l = ell as i64;
    let inner = Rect::new(origin.0 + tx0 * l, origin.1 + ty0 * l, nx * ell as usize, (ty1 - ty0) as usize * ell as usize);
    let good: Vec<Site> = tiles.iter().filter(|t| !t.bad).map(|t| t.coords).collect();
    let mut regions = Vec::new();
    for comp in components(&good) {
        let open = open_exterior && comp.iter().any(|&(tx, ty)| tx == tx0 || tx == tx1 - 1 || ty == ty0 || ty == ty1 - 1);
        let mut seen = [false; 2];
        for &c in &comp {
            let a = axes[idx(c).unwrap()];
            seen[0] |= a[0];
            seen[1] |= a[1];
        }
        let orientation = match seen {
            [true, true] => {
                return Err(Error::Consistency(format!("good region at tile {:?} has both orientations", comp[0])));
            }
            [true, false] => Some(Orientation::Vertical),
            [false, true] => Some(Orientation::Horizontal),
            [false, false] => match cfg.boundary() {
                Boundary::Striped { orientation, .. } if open => Some(orientation),
                _ => None,
            },
        };
        let in_comp: HashSet<(i64, i64)> = comp.iter().copied().collect();
        let mut edges = 0;
        for &(tx, ty) in &comp {
            for (dx, dy) in NEIGHBOURS {
                let n = (tx + dx, ty + dy);
                let boundary_edge = match idx(n) {
                    Some(_) => !in_comp.contains(&n),
                    None => !open_exterior,
                };
                edges += boundary_edge as usize;
            }
        }
        let mut region = Region::from_tiles(ell, origin, &comp);
        if open {
            region = region.with_exterior(inner);
        }
        let a_h = match orientation {
            Some(o) => rect_portions(cfg, &region, o),
            None => BTreeMap::new(),
        };
        regions.push(GoodRegion {
            area: region.area(),
            tiles: comp,
            orientation,
            open,
            a_h,
            perimeter: edges * ell as usize,
        });
    }
    Ok(TilePartition { ell, origin, n_c: contours.n_c, tiles, regions, span: (tx0, tx1, ty0, ty1) })
}

impl TilePartition {
    pub fn tile(&self, c: (i64, i64)) -> Option<&Tile> {
        let (tx0, tx1, ty0, ty1) = self.span;
        if c.0 < tx0 || c.0 >= tx1 || c.1 < ty0 || c.1 >= ty1 {
            return None;
        }
        Some(&self.tiles[(c.1 - ty0) as usize * (tx1 - tx0) as usize + (c.0 - tx0) as usize])
    }

    pub fn n_c2_total(&self) -> u32 {
        self.tiles.iter().map(|t| t.n_c2).sum()
    }

    pub fn bad_tiles(&self) -> impl Iterator<Item = &Tile> {
        self.tiles.iter().filter(|t| t.bad)
    }

    fn inner(&self) -> Rect {
        let (tx0, tx1, ty0, ty1) = self.span;
        let l = self.ell as i64;
        Rect::new(
            self.origin.0 + tx0 * l,
            self.origin.1 + ty0 * l,
            ((tx1 - tx0) * l) as usize,
            ((ty1 - ty0) * l) as usize,
        )
    }

    /// Sites of a single tile.
    pub fn tile_region(&self, c: (i64, i64)) -> Region {
        Region::from_tiles(self.ell, self.origin, &[c])
    }

    /// Sites of the `i`-th good region.
    pub fn region(&self, i: usize) -> Region {
        let g = &self.regions[i];
        let r = Region::from_tiles(self.ell, self.origin, &g.tiles);
        if g.open {
            r.with_exterior(self.inner())
        } else {
            r
        }
    }

    /// Decomposition report as a JSON value.
    pub fn report(&self) -> serde_json::Value {
        serde_json::json!({
            "N_c": self.n_c,
            "ell": self.ell,
            "tiles": self.tiles.iter().map(|t| serde_json::json!({
                "coords": [t.coords.0, t.coords.1],
                "n_c2": t.n_c2,
                "hole": t.hole,
                "bad": t.bad,
            })).collect::<Vec<_>>(),
            "good_regions": self.regions.iter().map(|g| serde_json::json!({
                "orientation": g.orientation,
                "area": g.area,
                "open": g.open,
                "perimeter": g.perimeter,
                "A_h": g.a_h.iter().map(|(h, a)| (h.to_string(), *a)).collect::<BTreeMap<_, _>>(),
            })).collect::<Vec<_>>(),
        })
    }

    /// Minus sites, tiles (bad ones shaded) and contours as SVG.
    pub fn to_svg(&self, cfg: &SpinConfig, contours: &ContourSet) -> String {
        let r = self.inner().union(cfg.rect());
        let px = 6i64;
        let (w, h) = (r.width as i64 * px, r.height as i64 * px);
        // y grows upward in the lattice, downward in SVG
        let tx = |x: i64| (x - r.x0) * px;
        let ty = |y: i64| h - (y - r.y0) * px;
        let mut s = format!("<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\">\n");
        for (x, y) in cfg.minus_sites() {
            s += &format!("<rect x=\"{}\" y=\"{}\" width=\"{px}\" height=\"{px}\" fill=\"#9ab\"/>\n", tx(x), ty(y + 1));
        }
        let l = self.ell as i64;
        for t in &self.tiles {
            let (x0, y0) = (self.origin.0 + t.coords.0 * l, self.origin.1 + t.coords.1 * l);
            let fill = if t.bad { "#c33" } else { "none" };
            s += &format!(
                "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"{fill}\" fill-opacity=\"0.2\" stroke=\"#888\"/>\n",
                tx(x0),
                ty(y0 + l),
                l * px,
                l * px
            );
        }
        for c in &contours.contours {
            for b in &c.bonds {
                let [a, e] = b.ends();
                s += &format!(
                    "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\" stroke-width=\"1.5\"/>\n",
                    tx(a.0),
                    ty(a.1),
                    tx(e.0),
                    ty(e.1)
                );
            }
        }
        s + "</svg>\n"
    }
}

/// Area of the rectangular stripe portions of `region`, by width. A portion
/// is a maximal run of equal spins across the stripes that lies in the
/// region and is bounded on both sides by contour bonds of the region.
pub fn rect_portions(cfg: &SpinConfig, region: &Region, orientation: Orientation) -> BTreeMap<u64, usize> {
    // work in coordinates where runs are horizontal
    let flip = orientation == Orientation::Horizontal;
    let at = |u: i64, v: i64| if flip { (v, u) } else { (u, v) };
    let mut rows: BTreeMap<i64, Vec<i64>> = BTreeMap::new();
    for (x, y) in region.cells() {
        let (u, v) = if flip { (y, x) } else { (x, y) };
        rows.entry(v).or_default().push(u);
    }
    let mut out = BTreeMap::new();
    for (v, mut us) in rows {
        us.sort();
        let finite: HashSet<i64> = us.iter().copied().collect();
        let mut done: HashSet<i64> = HashSet::new();
        for &u in &us {
            if done.contains(&u) {
                continue;
            }
            let spin = cfg.get(at(u, v));
            let mut ok = true;
            let mut ends = [u, u];
            for (k, step) in [-1i64, 1].into_iter().enumerate() {
                let mut w = u;
                loop {
                    let n = w + step;
                    if cfg.get(at(n, v)) != spin {
                        // the bounding bond belongs to the region through its minus site
                        let m = if spin < 0 { w } else { n };
                        ok &= region.contains(at(m, v));
                        break;
                    }
                    if !region.contains(at(n, v)) {
                        ok = false;
                        break;
                    }
                    w = n;
                    if (w - u).abs() > 1 << 20 {
                        ok = false;
                        break;
                    }
                }
                ends[k] = w;
            }
            let width = (ends[1] - ends[0] + 1) as u64;
            let mut count = 0;
            for w in ends[0]..=ends[1] {
                if finite.contains(&w) {
                    done.insert(w);
                    count += 1;
                }
            }
            if ok {
                *out.entry(width).or_insert(0) += count;
            }
        }
    }
    out
}

/// A connected piece of a droplet inside a region.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bubble {
    /// Row-major.
    pub cells: Vec<Site>,
    /// Domain walls with the minus site in the bubble, sorted.
    pub bonds: Vec<Bond>,
    /// Distance to the facing bond across the bubble, per bond; `None` when
    /// the bond faces the boundary of the region.
    pub facing: Vec<Option<u64>>,
    /// Twice the corner count of the bonds.
    pub corners2: u32,
}

impl Bubble {
    /// `(x0, y0, x1, y1)`, half-open.
    pub fn bbox(&self) -> (i64, i64, i64, i64) {
        let mut b = (i64::MAX, i64::MAX, i64::MIN, i64::MIN);
        for &(x, y) in &self.cells {
            b = (b.0.min(x), b.1.min(y), b.2.max(x + 1), b.3.max(y + 1));
        }
        b
    }

    pub fn is_rectangle(&self) -> bool {
        let (x0, y0, x1, y1) = self.bbox();
        ((x1 - x0) * (y1 - y0)) as usize == self.cells.len()
    }

    /// A full rectangle whose contour has no bonds of the given axis, so it
    /// spans the region across that axis.
    pub fn is_rectangular(&self, across: Axis) -> bool {
        self.is_rectangle() && self.bonds.iter().all(|b| b.axis != across)
    }

    /// Which droplet of `droplets` it came from.
    pub fn droplet(&self, labels: &HashMap<Site, usize>) -> Option<usize> {
        labels.get(&self.cells[0]).copied()
    }
}

/// Site to droplet index, for the droplets inside the window.
pub fn droplet_labels(cfg: &SpinConfig) -> HashMap<Site, usize> {
    let mut m = HashMap::new();
    for (i, d) in droplet_decompose(cfg).iter().enumerate() {
        for &s in &d.cells {
            m.insert(s, i);
        }
    }
    m
}

fn facing_distance(cfg: &SpinConfig, cells: &HashSet<Site>, m: Site, q: Site) -> Option<u64> {
    let d = (m.0 - q.0, m.1 - q.1);
    let mut k = 1;
    loop {
        let n = (m.0 + k * d.0, m.1 + k * d.1);
        if !cells.contains(&n) {
            return (cfg.get(n) > 0).then_some(k as u64);
        }
        k += 1;
    }
}

/// Bubble built from a connected set of minus cells.
pub fn bubble_from_cells(cfg: &SpinConfig, mut cells: Vec<Site>) -> Bubble {
    cells.sort_by_key(|&(x, y)| (y, x));
    let set: HashSet<Site> = cells.iter().copied().collect();
    let mut walls = Vec::new();
    for &s in &cells {
        for (b, (dx, dy)) in site_bonds(s).into_iter().zip(NEIGHBOURS) {
            let q = (s.0 + dx, s.1 + dy);
            if cfg.get(q) > 0 {
                walls.push((b, facing_distance(cfg, &set, s, q)));
            }
        }
    }
    walls.sort();
    let corners2 = walls.iter().map(|w| corner_ends(cfg, w.0)).sum();
    Bubble { cells, bonds: walls.iter().map(|w| w.0).collect(), facing: walls.iter().map(|w| w.1).collect(), corners2 }
}

/// Components of the minus sites of `region`'s finite part.
pub fn localize_bubbles(cfg: &SpinConfig, region: &Region) -> Vec<Bubble> {
    let minus: Vec<Site> = region.cells().into_iter().filter(|&s| cfg.get(s) < 0).collect();
    components(&minus).into_iter().map(|c| bubble_from_cells(cfg, c)).collect()
}

/// Number of membership changes along consecutive sites.
fn crossings(inside: &impl Fn(Site) -> bool, path: impl Iterator<Item = Site>) -> usize {
    let mut n = 0;
    let mut prev: Option<bool> = None;
    for s in path {
        let c = inside(s);
        if prev.is_some_and(|p| p != c) {
            n += 1;
        }
        prev = Some(c);
    }
    n
}

fn range(a: i64, b: i64) -> Box<dyn Iterator<Item = i64>> {
    if a <= b {
        Box::new(a..=b)
    } else {
        Box::new((b..=a).rev())
    }
}

/// Unordered pairs of the droplet such that both the horizontal-first and
/// the vertical-first lattice path between them cross at least two of its
/// boundary bonds.
pub fn path_pair_set(cells: &[Site]) -> Vec<(Site, Site)> {
    let set: HashSet<Site> = cells.iter().copied().collect();
    let inside = |s: Site| set.contains(&s);
    let mut sorted = cells.to_vec();
    sorted.sort_by_key(|&(x, y)| (y, x));
    let mut out = Vec::new();
    for (i, &a) in sorted.iter().enumerate() {
        for &b in &sorted[i + 1..] {
            if a.0 == b.0 || a.1 == b.1 {
                // both paths are the same straight segment
                let n = crossings(&inside, range(a.0, b.0).flat_map(|x| range(a.1, b.1).map(move |y| (x, y))));
                if n >= 2 {
                    out.push((a, b));
                }
                continue;
            }
            let hv = range(a.0, b.0).map(|x| (x, a.1)).chain(range(a.1, b.1).skip(1).map(|y| (b.0, y)));
            if crossings(&inside, hv) < 2 {
                continue;
            }
            let vh = range(a.1, b.1).map(|y| (a.0, y)).chain(range(a.0, b.0).skip(1).map(|x| (x, b.1)));
            if crossings(&inside, vh) >= 2 {
                out.push((a, b));
            }
        }
    }
    out
}

/// One horizontal slice of a deformed region: a band of height `ell` cut
/// between the outer sides of two bubbles.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Slice {
    pub x0: i64,
    pub x1: i64,
    pub y0: i64,
    pub y1: i64,
    pub seq: StripeSequence,
    /// Bubbles crossing the slice, left to right.
    pub bubbles: Vec<usize>,
}

/// Top or bottom side of a bubble along the boundary of the region.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub bubble: usize,
    pub top: bool,
    pub y: i64,
    pub x0: i64,
    pub x1: i64,
    pub w1: Option<u64>,
    pub w2: Option<u64>,
}

impl Segment {
    pub fn h(&self) -> u64 {
        (self.x1 - self.x0) as u64
    }
}

/// A good region after its sides were pushed onto rectangular bubbles,
/// cut into slices. Horizontal regions are stored transposed.
#[derive(Clone, Debug)]
pub struct SlicedRegion {
    pub ell: u64,
    pub transposed: bool,
    /// The configuration the coordinates refer to.
    pub config: SpinConfig,
    pub region: Region,
    pub bubbles: Vec<Bubble>,
    pub slices: Vec<Slice>,
    /// In boundary-walk order.
    pub segments: Vec<Segment>,
    /// Indices of the two segments of each bubble.
    pub pairs: Vec<(usize, usize)>,
    pub perimeter_before: usize,
    pub perimeter_after: usize,
}

/// Maximal horizontal runs of tiles, as `(ty, tx0, tx1)`.
fn band_runs(tiles: &[(i64, i64)]) -> Vec<(i64, i64, i64)> {
    let mut rows: BTreeMap<i64, Vec<i64>> = BTreeMap::new();
    for &(tx, ty) in tiles {
        rows.entry(ty).or_default().push(tx);
    }
    let mut out = Vec::new();
    for (ty, mut xs) in rows {
        xs.sort();
        xs.dedup();
        let mut start = xs[0];
        for w in xs.windows(2) {
            if w[1] != w[0] + 1 {
                out.push((ty, start, w[0] + 1));
                start = w[1];
            }
        }
        out.push((ty, start, xs[xs.len() - 1] + 1));
    }
    out
}

/// Pushes the vertical sides of a good region onto rectangular bubbles and
/// slices the result.
pub fn deform_good_region(
    cfg: &SpinConfig,
    tiles: &[(i64, i64)],
    ell: u64,
    origin: Site,
    orientation: Orientation,
) -> Result<SlicedRegion> {
    if tiles.is_empty() {
        return domain("empty region");
    }
    let transposed = orientation == Orientation::Horizontal;
    let (cfg, tiles, origin) = if transposed {
        (cfg.transposed(), tiles.iter().map(|&(a, b)| (b, a)).collect(), (origin.1, origin.0))
    } else {
        (cfg.clone(), tiles.to_vec(), origin)
    };
    let l = ell as i64;
    let g = Region::from_tiles(ell, origin, &tiles);
    let before = localize_bubbles(&cfg, &g);
    let rects: Vec<(i64, i64, i64, i64)> =
        before.iter().filter(|b| b.is_rectangular(Axis::H)).map(|b| b.bbox()).collect();
    let mut runs = Vec::new();
    for (ty, ta, tb) in band_runs(&tiles) {
        let (y0, y1) = (origin.1 + ty * l, origin.1 + (ty + 1) * l);
        let (xa, xb) = (origin.0 + ta * l, origin.0 + tb * l);
        let inside: Vec<_> =
            rects.iter().filter(|r| r.1 <= y0 && r.3 >= y1 && r.0 >= xa && r.2 <= xb).collect();
        let (Some(left), Some(right)) = (inside.iter().map(|r| r.0).min(), inside.iter().map(|r| r.2).max()) else {
            return Err(Error::Construction(format!("band y {y0}..{y1}, x {xa}..{xb}: no rectangular bubble")));
        };
        if 5 * (left - xa) > 2 * l || 5 * (xb - right) > 2 * l {
            return Err(Error::Construction(format!(
                "band y {y0}..{y1}: sides move by {} and {}, more than 2l/5",
                left - xa,
                xb - right
            )));
        }
        runs.push((y0, y1, left, right));
    }
    let mut cells = Vec::new();
    for &(y0, y1, x0, x1) in &runs {
        for y in y0..y1 {
            for x in x0..x1 {
                cells.push((x, y));
            }
        }
    }
    let region = Region::from_cells(cells);
    let (perimeter_before, perimeter_after) = (g.perimeter(), region.perimeter());
    if perimeter_after > 2 * perimeter_before {
        return Err(Error::Construction(format!("perimeter grew from {perimeter_before} to {perimeter_after}")));
    }
    let bubbles = localize_bubbles(&cfg, &region);
    if let Some(b) = bubbles.iter().find(|b| !b.is_rectangular(Axis::H)) {
        return Err(Error::Construction(format!("bubble at {:?} is not rectangular after deformation", b.cells[0])));
    }
    let boxes: Vec<_> = bubbles.iter().map(|b| b.bbox()).collect();
    let mut slices = Vec::new();
    let mut left_gap: Vec<Option<u64>> = vec![None; bubbles.len()];
    let mut right_gap: Vec<Option<u64>> = vec![None; bubbles.len()];
    for &(y0, y1, x0, x1) in &runs {
        let mut ids: Vec<usize> =
            (0..bubbles.len()).filter(|&i| boxes[i].1 < y1 && boxes[i].3 > y0 && boxes[i].0 >= x0 && boxes[i].2 <= x1).collect();
        ids.sort_by_key(|&i| boxes[i].0);
        let widths = ids.iter().map(|&i| (boxes[i].2 - boxes[i].0) as u64).collect();
        let mut spacings = Vec::new();
        for w in ids.windows(2) {
            let gap = (boxes[w[1]].0 - boxes[w[0]].2) as u64;
            spacings.push(gap);
            right_gap[w[0]] = Some(right_gap[w[0]].map_or(gap, |g| g.min(gap)));
            left_gap[w[1]] = Some(left_gap[w[1]].map_or(gap, |g| g.min(gap)));
        }
        slices.push(Slice { x0, x1, y0, y1, seq: StripeSequence::new(widths, spacings)?, bubbles: ids });
    }
    let owner: HashMap<Site, usize> =
        bubbles.iter().enumerate().flat_map(|(i, b)| b.cells.iter().map(move |&c| (c, i))).collect();
    let mut segments = Vec::new();
    for cycle in boundary_cycles(&region) {
        let mut cur: Option<Segment> = None;
        for (a, d) in cycle {
            let hit = match d {
                (1, 0) => owner.get(&(a.0, a.1 - 1)).map(|&i| (i, true, a.0)),
                (-1, 0) => owner.get(&(a.0 - 1, a.1)).map(|&i| (i, false, a.0 - 1)),
                _ => None,
            };
            match (&mut cur, hit) {
                (Some(s), Some((i, top, x))) if s.bubble == i && s.top == top => {
                    s.x0 = s.x0.min(x);
                    s.x1 = s.x1.max(x + 1);
                }
                (_, hit) => {
                    segments.extend(cur.take());
                    cur = hit.map(|(i, top, x)| Segment {
                        bubble: i,
                        top,
                        y: a.1,
                        x0: x,
                        x1: x + 1,
                        w1: left_gap[i],
                        w2: right_gap[i],
                    });
                }
            }
        }
        segments.extend(cur);
    }
    let mut pairs = Vec::new();
    for i in 0..bubbles.len() {
        let mine: Vec<usize> = (0..segments.len()).filter(|&k| segments[k].bubble == i).collect();
        match mine[..] {
            [a, b] if segments[a].top != segments[b].top => pairs.push((a.min(b), a.max(b))),
            _ => {
                return Err(Error::Consistency(format!(
                    "bubble at {:?} has {} boundary segments",
                    bubbles[i].cells[0],
                    mine.len()
                )))
            }
        }
    }
    pairs.sort();
    Ok(SlicedRegion {
        ell,
        transposed,
        config: cfg,
        region,
        bubbles,
        slices,
        segments,
        pairs,
        perimeter_before,
        perimeter_after,
    })
}

/// Directed boundary edges of a finite region with the region on the right,
/// as cycles of `(start vertex, direction)`. Each cycle starts at its
/// leftmost eastward edge; cycles are ordered by that edge (left first, then
/// top first).
fn boundary_cycles(region: &Region) -> Vec<Vec<(Site, (i64, i64))>> {
    let mut out_edges: HashMap<Site, Vec<(i64, i64)>> = HashMap::new();
    for (x, y) in region.cells() {
        let mut add = |v: Site, d: (i64, i64)| out_edges.entry(v).or_default().push(d);
        if !region.contains((x, y + 1)) {
            add((x, y + 1), (1, 0));
        }
        if !region.contains((x, y - 1)) {
            add((x + 1, y), (-1, 0));
        }
        if !region.contains((x - 1, y)) {
            add((x, y), (0, 1));
        }
        if !region.contains((x + 1, y)) {
            add((x + 1, y + 1), (0, -1));
        }
    }
    let mut used: HashSet<(Site, (i64, i64))> = HashSet::new();
    let mut starts: Vec<(Site, (i64, i64))> =
        out_edges.iter().flat_map(|(&v, ds)| ds.iter().map(move |&d| (v, d))).filter(|e| e.1 == (1, 0)).collect();
    starts.sort_by_key(|&((x, y), _)| (x, -y));
    let mut cycles = Vec::new();
    for start in starts {
        if used.contains(&start) {
            continue;
        }
        let mut cycle = Vec::new();
        let mut e = start;
        loop {
            used.insert(e);
            cycle.push(e);
            let (v, d) = e;
            let w = (v.0 + d.0, v.1 + d.1);
            let outs = &out_edges[&w];
            // right turn first so diagonal neighbours stay apart
            let next = [(d.1, -d.0), d, (-d.1, d.0)].into_iter().find(|c| outs.contains(c)).unwrap();
            e = (w, next);
            if e == start {
                break;
            }
        }
        cycles.push(cycle);
    }
    cycles
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cfg_from(cells: &[Site], rect: Rect) -> SpinConfig {
        let set: HashSet<Site> = cells.iter().copied().collect();
        SpinConfig::from_fn(rect, Boundary::Plus, |s| if set.contains(&s) { -1 } else { 1 }).unwrap()
    }

    fn random_cfg(rng: &mut ChaCha8Rng, n: usize, q: f64) -> SpinConfig {
        SpinConfig::from_fn(Rect::new(0, 0, n, n), Boundary::Plus, |_| if rng.gen_bool(q) { -1 } else { 1 }).unwrap()
    }

    // corners read straight off the 2x2 spin pattern around each dual vertex
    fn corners_oracle(cfg: &SpinConfig) -> usize {
        let r = cfg.rect();
        let mut n = 0;
        for y in r.y0..=r.y1() {
            for x in r.x0..=r.x1() {
                let q = [cfg.get((x, y)), cfg.get((x - 1, y)), cfg.get((x - 1, y - 1)), cfg.get((x, y - 1))];
                let minus = q.iter().filter(|&&s| s < 0).count();
                if minus == 1 || minus == 3 {
                    n += 1;
                } else if minus == 2 && q[0] == q[2] {
                    n += 2;
                }
            }
        }
        n
    }

    #[test]
    fn single_site_and_rectangle() {
        let c = extract_contours(&cfg_from(&[(2, 2)], Rect::new(0, 0, 5, 5)));
        assert_eq!((c.contours.len(), c.n_c, c.bonds.len()), (1, 4, 4));
        let cells: Vec<Site> = (1..4).flat_map(|y| (1..6).map(move |x| (x, y))).collect();
        let c = extract_contours(&cfg_from(&cells, Rect::new(0, 0, 8, 8)));
        assert_eq!((c.contours.len(), c.n_c, c.bonds.len()), (1, 4, 16));
        assert!(c.contours[0].closed);
    }

    #[test]
    fn diagonal_pair_is_chopped_apart() {
        let c = extract_contours(&cfg_from(&[(1, 1), (2, 2)], Rect::new(0, 0, 4, 4)));
        assert_eq!(c.contours.len(), 2);
        assert_eq!(c.n_c, 8);
        assert!(c.contours.iter().all(|k| k.bonds.len() == 4 && k.corners == 4));
        // the other diagonal is chopped the other way
        let c = extract_contours(&cfg_from(&[(2, 1), (1, 2)], Rect::new(0, 0, 4, 4)));
        assert_eq!((c.contours.len(), c.n_c), (2, 8));
    }

    #[test]
    fn plus_ring_around_minus_is_one_contour_each_side() {
        // minus square with a plus hole: outer and inner contours
        let cells: Vec<Site> = (0..5).flat_map(|y| (0..5).map(move |x| (x, y))).filter(|&s| s != (2, 2)).collect();
        let c = extract_contours(&cfg_from(&cells, Rect::new(-1, -1, 7, 7)));
        assert_eq!((c.contours.len(), c.n_c, c.bonds.len()), (2, 8, 24));
    }

    #[test]
    fn contours_partition_bonds_and_count_corners() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for k in 0..100 {
            let cfg = random_cfg(&mut rng, 12, 0.2 + 0.006 * k as f64);
            let c = extract_contours(&cfg);
            let mut all: Vec<Bond> = c.contours.iter().flat_map(|k| k.bonds.clone()).collect();
            all.sort();
            assert_eq!(all, c.bonds);
            assert!(c.contours.iter().all(|k| k.closed));
            assert_eq!(c.n_c, corners_oracle(&cfg));
            for ell in [5, 6, 7] {
                let t = tile_partition(&cfg, &c, ell, (0, 0)).unwrap();
                assert_eq!(t.n_c2_total() as usize, 2 * c.n_c);
                for tile in &t.tiles {
                    assert_eq!(tile.bad, tile.n_c2 > 0 || tile.hole);
                }
            }
        }
    }

    #[test]
    fn contour_walk_is_a_closed_path() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let cfg = random_cfg(&mut rng, 15, 0.4);
        for k in extract_contours(&cfg).contours {
            let n = k.bonds.len();
            for i in 0..n {
                let (a, b) = (k.bonds[i].ends(), k.bonds[(i + 1) % n].ends());
                assert!(a.iter().any(|v| b.contains(v)));
            }
        }
    }

    #[test]
    fn all_plus_has_only_holes() {
        let cfg = SpinConfig::uniform(Rect::new(0, 0, 30, 30), 1, Boundary::Plus).unwrap();
        let t = tile_partition(&cfg, &extract_contours(&cfg), 10, (0, 0)).unwrap();
        assert_eq!(t.tiles.len(), 9);
        assert!(t.tiles.iter().all(|t| t.hole && t.bad));
        assert!(t.regions.is_empty());
    }

    #[test]
    fn perfect_stripes_form_one_good_region() {
        let h = 3;
        let ell = 10 * h;
        let cfg = SpinConfig::optimal_striped(Rect::new(0, 0, 60, 60), h, Orientation::Vertical, 0).unwrap();
        let t = tile_partition(&cfg, &extract_contours(&cfg), ell, (0, 0)).unwrap();
        assert_eq!(t.bad_tiles().count(), 0);
        assert_eq!(t.regions.len(), 1);
        let g = &t.regions[0];
        assert_eq!(g.orientation, Some(Orientation::Vertical));
        assert_eq!(g.area, 3600);
        assert_eq!(g.a_h, BTreeMap::from([(h, 3600)]));
        assert_eq!(g.perimeter, 0);
        let cfg = cfg.transposed();
        let t = tile_partition(&cfg, &extract_contours(&cfg), ell, (0, 0)).unwrap();
        assert_eq!(t.regions[0].orientation, Some(Orientation::Horizontal));
        assert_eq!(t.regions[0].a_h, BTreeMap::from([(h, 3600)]));
    }

    #[test]
    fn stripe_inventory_counts_plus_and_minus_portions() {
        // stripes of width 2 and 4 inside a plus sea, region = the stripe block
        let mut cells = Vec::new();
        for y in 0..10 {
            for x in (2..4).chain(6..10) {
                cells.push((x, y));
            }
        }
        let cfg = cfg_from(&cells, Rect::new(0, 0, 12, 10));
        let region = Region::from_cells((0..10).flat_map(|y| (1..11).map(move |x| (x, y))));
        let a = rect_portions(&cfg, &region, Orientation::Vertical);
        // minus runs 2 and 4, the plus run between them has width 2
        assert_eq!(a, BTreeMap::from([(2, 40), (4, 40)]));
    }

    #[test]
    fn path_pairs() {
        let rect: Vec<Site> = (0..3).flat_map(|y| (0..4).map(move |x| (x, y))).collect();
        assert!(path_pair_set(&rect).is_empty());
        // for any L one of the two elbow paths runs through the corner cell
        assert!(path_pair_set(&[(0, 0), (1, 0), (0, 1)]).is_empty());
        let l: Vec<Site> = (0..5).map(|x| (x, 0)).chain((1..5).map(|y| (0, y))).collect();
        assert!(path_pair_set(&l).is_empty());
        let u = [(0, 0), (1, 0), (2, 0), (0, 1), (2, 1), (0, 2), (2, 2)];
        let p = path_pair_set(&u);
        assert!(p.contains(&((0, 2), (2, 2))));
        assert!(p.contains(&((0, 1), (2, 1))));
        assert!(!p.contains(&((0, 0), (2, 0))));
    }

    // counts boundary bonds crossed by each unit step
    fn pairs_oracle(cells: &[Site]) -> HashSet<(Site, Site)> {
        let set: HashSet<Site> = cells.iter().copied().collect();
        let gamma: HashSet<Bond> = cells
            .iter()
            .flat_map(|&(x, y)| NEIGHBOURS.iter().map(move |&(dx, dy)| ((x, y), (x + dx, y + dy))))
            .filter(|(_, n)| !set.contains(n))
            .map(|(a, b)| Bond::between(a, b).unwrap())
            .collect();
        let count = |path: &[Site]| path.windows(2).filter(|w| gamma.contains(&Bond::between(w[0], w[1]).unwrap())).count();
        let mut out = HashSet::new();
        for &a in cells {
            for &b in cells {
                if (a.1, a.0) >= (b.1, b.0) {
                    continue;
                }
                let sx = (b.0 - a.0).signum();
                let sy = (b.1 - a.1).signum();
                let mut hv = vec![a];
                let mut c = a;
                while c.0 != b.0 {
                    c.0 += sx;
                    hv.push(c);
                }
                while c.1 != b.1 {
                    c.1 += sy;
                    hv.push(c);
                }
                let mut vh = vec![a];
                let mut c = a;
                while c.1 != b.1 {
                    c.1 += sy;
                    vh.push(c);
                }
                while c.0 != b.0 {
                    c.0 += sx;
                    vh.push(c);
                }
                if count(&hv) >= 2 && count(&vh) >= 2 {
                    out.insert((a, b));
                }
            }
        }
        out
    }

    #[test]
    fn path_pairs_match_step_tracer() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let mut tried = 0;
        while tried < 300 {
            // random connected animal grown from the origin
            let n = rng.gen_range(3..=12);
            let mut cells = vec![(0i64, 0i64)];
            while cells.len() < n {
                let (x, y) = cells[rng.gen_range(0..cells.len())];
                let (dx, dy) = NEIGHBOURS[rng.gen_range(0..4)];
                if !cells.contains(&(x + dx, y + dy)) {
                    cells.push((x + dx, y + dy));
                }
            }
            let got: HashSet<_> = path_pair_set(&cells).into_iter().collect();
            assert_eq!(got, pairs_oracle(&cells), "{cells:?}");
            tried += 1;
        }
    }

    #[test]
    fn facing_is_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        for _ in 0..20 {
            let cfg = random_cfg(&mut rng, 14, 0.5);
            let region = Region::from_cells((2..12).flat_map(|y| (2..12).map(move |x| (x, y))));
            for b in localize_bubbles(&cfg, &region) {
                let f: HashMap<Bond, Option<u64>> = b.bonds.iter().copied().zip(b.facing.iter().copied()).collect();
                for (&bond, &d) in &f {
                    let Some(d) = d else { continue };
                    let m = minus_side(&cfg, bond).unwrap();
                    let [s0, s1] = bond.sites();
                    let q = if s0 == m { s1 } else { s0 };
                    let dir = (m.0 - q.0, m.1 - q.1);
                    let far = (m.0 + (d as i64 - 1) * dir.0, m.1 + (d as i64 - 1) * dir.1);
                    let other = Bond::between(far, (far.0 + dir.0, far.1 + dir.1)).unwrap();
                    assert_eq!(f[&other], Some(d));
                }
            }
        }
    }

    #[test]
    fn droplet_split_by_region() {
        // a U-shaped droplet whose bottom lies outside the region
        let mut cells: Vec<Site> = (0..5).map(|x| (x, 0)).collect();
        cells.extend((1..6).flat_map(|y| [(0, y), (4, y)]));
        let cfg = cfg_from(&cells, Rect::new(-2, -2, 10, 10));
        let labels = droplet_labels(&cfg);
        let inside = localize_bubbles(&cfg, &Region::from_cells((1..8).flat_map(|y| (-2..8).map(move |x| (x, y)))));
        assert_eq!(inside.len(), 2);
        assert_eq!(inside[0].droplet(&labels), inside[1].droplet(&labels));
        // bonds at the cut face the boundary
        assert!(inside[0].facing.contains(&None));
        let whole = localize_bubbles(&cfg, &Region::from_cells(cfg.rect().sites()));
        assert_eq!(whole.len(), 1);
        assert_eq!(whole[0].cells.len(), cells.len());
        assert!(whole[0].facing.iter().all(|d| d.is_some()));
    }

    #[test]
    fn disconnected_contour_portion() {
        // a full-height stripe through a region has two separate walls
        let cells: Vec<Site> = (-5..15).flat_map(|y| (3..6).map(move |x| (x, y))).collect();
        let cfg = cfg_from(&cells, Rect::new(-5, -5, 20, 20));
        let b = localize_bubbles(&cfg, &Region::from_cells((0..10).flat_map(|y| (0..10).map(move |x| (x, y)))));
        assert_eq!(b.len(), 1);
        assert_eq!(b[0].bonds.len(), 20);
        assert!(b[0].is_rectangular(Axis::H));
        assert!(b[0].facing.iter().all(|&d| d == Some(3)));
    }

    #[test]
    fn aligned_region_is_a_fixed_point() {
        let cells: Vec<Site> =
            (-10..50).flat_map(|y| (0..40).filter(|x| x % 8 < 4).map(move |x| (x, y))).collect();
        let cfg = cfg_from(&cells, Rect::new(-10, -10, 60, 60));
        // stripes [0, 4), [8, 12), ..., [32, 36) fill two 18-tiles exactly
        let s = deform_good_region(&cfg, &[(0, 0), (1, 0), (0, 1), (1, 1)], 18, (0, 0), Orientation::Vertical).unwrap();
        assert_eq!(s.perimeter_before, s.perimeter_after);
        assert_eq!(s.region, Region::from_tiles(18, (0, 0), &[(0, 0), (1, 0), (0, 1), (1, 1)]));
        assert_eq!(s.slices.len(), 2);
        assert_eq!(s.slices[0].seq, StripeSequence::new(vec![4; 5], vec![4; 4]).unwrap());
        assert_eq!(s.segments.len(), 10);
        assert_eq!(s.pairs.len(), 5);
    }

    #[test]
    fn deformation_refuses_far_sides() {
        let cells: Vec<Site> = (-10..30).flat_map(|y| (12..16).map(move |x| (x, y))).collect();
        let cfg = cfg_from(&cells, Rect::new(-10, -10, 40, 40));
        let e = deform_good_region(&cfg, &[(0, 0)], 20, (0, 0), Orientation::Vertical).unwrap_err();
        assert!(matches!(e, Error::Construction(_)));
    }
}
