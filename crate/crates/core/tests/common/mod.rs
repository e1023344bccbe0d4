//! The running example of a vertically striped good region: a 4 x 4 block of
//! 20-tiles with two tiles missing in the middle and one extra tile on the
//! left, inside a plus sea.

use stripes_core::config::{Boundary, Rect, SpinConfig};

pub const ELL: u64 = 20;

pub fn example() -> SpinConfig {
    let full = [(4, 9), (17, 24), (26, 30), (34, 37), (57, 63), (67, 71), (73, 77)];
    let bottom = [(43, 46), (49, 53)];
    let top = [(45, 49), (55, 57)];
    SpinConfig::from_fn(Rect::new(-10, -10, 100, 100), Boundary::Plus, |(x, y)| {
        let hit = |s: &[(i64, i64)]| s.iter().any(|&(a, b)| a <= x && x < b);
        if hit(&full) || (y < 30 && hit(&bottom)) || (y >= 50 && hit(&top)) {
            -1
        } else {
            1
        }
    })
    .unwrap()
}

pub fn tiles() -> Vec<(i64, i64)> {
    let mut t: Vec<(i64, i64)> =
        (1..=3).flat_map(|tx| (0..=3).map(move |ty| (tx, ty))).filter(|&c| c != (2, 1) && c != (2, 2)).collect();
    t.push((0, 2));
    t
}
