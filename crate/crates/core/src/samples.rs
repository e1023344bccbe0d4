//! Seeded generators of test configurations.

use rand::Rng;

use crate::config::{Boundary, Orientation, Rect, SpinConfig};
use crate::error::Result;
use crate::geometry::Site;

/// Independent spins, minus with probability `minus`.
pub fn random_config(rng: &mut impl Rng, rect: Rect, boundary: Boundary, minus: f64) -> Result<SpinConfig> {
    SpinConfig::from_fn(rect, boundary, |_| if rng.gen_bool(minus) { -1 } else { 1 })
}

/// A connected set of `n` cells grown from the origin by attaching random
/// neighbours.
pub fn random_polyomino(rng: &mut impl Rng, n: usize) -> Vec<Site> {
    let mut cells = vec![(0i64, 0i64)];
    while cells.len() < n {
        let (x, y) = cells[rng.gen_range(0..cells.len())];
        let (dx, dy) = [(1, 0), (-1, 0), (0, 1), (0, -1)][rng.gen_range(0..4)];
        let c = (x + dx, y + dy);
        if !cells.contains(&c) {
            cells.push(c);
        }
    }
    cells.sort_unstable();
    cells
}

/// Optimal stripes of width `h` on a square window of side `n`, overwritten
/// by `blobs` random rectangles of random sign.
pub fn perturbed_stripes(rng: &mut impl Rng, n: i64, h: u64, boundary: Boundary, blobs: usize) -> Result<SpinConfig> {
    let r = Rect::new(0, 0, n as usize, n as usize);
    let hi = h as i64;
    let mut c = SpinConfig::from_fn(r, boundary, |(x, _)| if (x / hi) % 2 == 1 { -1 } else { 1 })?;
    for _ in 0..blobs {
        let (w, bh) = (rng.gen_range(1..=(hi + 3).min(n)), rng.gen_range(1..=(2 * hi).min(n)));
        let (x0, y0) = (rng.gen_range(0..=n - w), rng.gen_range(0..=n - bh));
        let v: i8 = if rng.gen_bool(0.5) { 1 } else { -1 };
        for y in y0..y0 + bh {
            for x in x0..x0 + w {
                c.set((x, y), v)?;
            }
        }
    }
    Ok(c)
}

/// A compactly supported perturbation of the optimal stripes: a window
/// with the striped boundary condition in which a few random rectangles,
/// single sites and stripe shifts differ from the background.
pub fn compact_perturbation(rng: &mut impl Rng, n: i64, h: u64) -> Result<SpinConfig> {
    let r = Rect::new(0, 0, n as usize, n as usize);
    let mut c = SpinConfig::optimal_striped(r, h, Orientation::Vertical, 0)?;
    let hi = h as i64;
    let m = (n / 4).max(1);
    match rng.gen_range(0..4) {
        0 => {
            let s = (rng.gen_range(m..n - m), rng.gen_range(m..n - m));
            c.set(s, -c.get(s))?;
        }
        1 => {
            for _ in 0..rng.gen_range(1..=3) {
                let (w, bh) = (rng.gen_range(1..=hi + 2), rng.gen_range(1..=2 * hi));
                let (x0, y0) = (rng.gen_range(1..n - w), rng.gen_range(1..n - bh));
                let v: i8 = if rng.gen_bool(0.5) { 1 } else { -1 };
                for y in y0..y0 + bh {
                    for x in x0..x0 + w {
                        c.set((x, y), v)?;
                    }
                }
            }
        }
        2 => {
            // shift a block of stripes sideways
            let (y0, y1) = (rng.gen_range(1..n / 2), rng.gen_range(n / 2..n - 1));
            let (x0, x1) = (rng.gen_range(1..n / 3), rng.gen_range(2 * n / 3..n - 1));
            let d = rng.gen_range(1..=hi);
            let old = c.clone();
            for y in y0..y1 {
                for x in x0..x1 {
                    c.set((x, y), old.get((x + d, y)))?;
                }
            }
        }
        _ => {
            for _ in 0..rng.gen_range(2..=12) {
                let s = (rng.gen_range(1..n - 1), rng.gen_range(1..n - 1));
                c.set(s, -c.get(s))?;
            }
        }
    }
    Ok(c)
}

/// Single-tile windows of side `ell` with the optimal-stripe boundary, each
/// carrying a different kind of defect. Defects scale with `ell`.
pub fn bad_tiles(h: u64, ell: u64) -> Result<Vec<(&'static str, SpinConfig)>> {
    let (n, hi) = (ell as i64, h as i64);
    let r = Rect::new(0, 0, ell as usize, ell as usize);
    let base = SpinConfig::optimal_striped(r, h, Orientation::Vertical, 0)?;
    // left edge of a minus stripe near the middle
    let mid = (n / 2 / (2 * hi)) * 2 * hi + hi;
    let fill = |c: &mut SpinConfig, xs: std::ops::Range<i64>, ys: std::ops::Range<i64>, v: i8| -> Result<()> {
        for y in ys {
            for x in xs.clone() {
                c.set((x, y), v)?;
            }
        }
        Ok(())
    };
    let mut out = Vec::new();
    let mut c = base.clone();
    fill(&mut c, mid..mid + hi, n / 2..n, 1)?;
    out.push(("stripe end", c));
    let mut c = base.clone();
    c.set((mid - hi / 2, n / 2), -1)?;
    out.push(("flipped site", c));
    let mut c = base.clone();
    fill(&mut c, mid - hi..mid, n / 3..2 * n / 3, -1)?;
    out.push(("bridge", c));
    let mut c = base.clone();
    let k = (n / (4 * hi)).max(1) * hi;
    fill(&mut c, mid - k..mid + k, 0..n, 1)?;
    out.push(("hole", c));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::components;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn polyominoes_are_connected() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for n in 1..=12 {
            let p = random_polyomino(&mut rng, n);
            assert_eq!(p.len(), n);
            assert_eq!(components(&p).len(), 1);
        }
    }

    #[test]
    fn perturbations_differ_from_the_background_inside() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..40 {
            let c = compact_perturbation(&mut rng, 40, 5).unwrap();
            let flips = c.flipped_sites().unwrap();
            assert!(flips.iter().all(|&(x, y)| x > 0 && y > 0 && x < 39 && y < 39));
        }
    }

    #[test]
    fn bad_tile_family_is_bad() {
        use crate::geometry::{extract_contours, tile_partition};
        for (name, c) in bad_tiles(6, 48).unwrap() {
            let part = tile_partition(&c, &extract_contours(&c), 48, (0, 0)).unwrap();
            assert!(part.tile((0, 0)).unwrap().bad, "{name}");
        }
    }
}
