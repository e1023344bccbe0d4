//! Acceptance suite. Prints one line per criterion and exits nonzero if any
//! of them fails.

mod common;

use std::collections::BTreeSet;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use stripes_core::bounds::{fit_c2, Certifier};
use stripes_core::config::{Boundary, Hamiltonian, Orientation, Rect};
use stripes_core::geometry::{
    deform_good_region, extract_contours, path_pair_set, tile_partition, Site,
};
use stripes_core::oracle::{
    exhaustive_1d, exhaustive_2d, ring_crossing, ring_stripe_table, torus_crossing, torus_stripe_table, Pattern,
};
use stripes_core::samples::{bad_tiles, compact_perturbation, perturbed_stripes, random_config, random_polyomino};
use stripes_core::stripes::{fit_excess_exponent, fit_line, log_grid, Energetics, StripeSequence};
use stripes_core::ModelParams;

type Outcome = Result<String, String>;

fn energetics(d: u32, p: f64, tau: f64) -> Energetics {
    Energetics::new(ModelParams::from_tau(d, p, tau).unwrap()).unwrap()
}

fn certifier(tau: f64) -> Certifier {
    Certifier::new(Hamiltonian::new(energetics(2, 5.0, tau)).unwrap()).unwrap()
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

/// Direct plus-boundary energy against the droplet representation.
fn droplet_identity() -> Outcome {
    let t0 = Instant::now();
    let ham = Hamiltonian::new(energetics(2, 5.0, -0.03)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut fails = 0;
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let minus = rng.gen_range(0.1..0.6);
        let cfg = random_config(&mut rng, Rect::new(0, 0, 10, 10), Boundary::Plus, minus).unwrap();
        let c = ham.droplet_identity_check(&cfg, 32).unwrap();
        if !c.equal_within(2.0) {
            fails += 1;
        }
        worst = worst.max(c.slack.abs() / c.tails().max(f64::MIN_POSITIVE));
    }
    let secs = t0.elapsed().as_secs_f64();
    check(
        fails == 0 && secs < 60.0,
        format!("{} of 100 equal within 2x tails, worst |gap|/tails {worst:.2}, {secs:.1} s", 100 - fails),
    )
}

/// Pairs of cells joined by two membership changes along both L-shaped
/// paths, traced step by step.
fn path_pairs_by_tracing(cells: &[Site]) -> BTreeSet<(Site, Site)> {
    let set: BTreeSet<Site> = cells.iter().copied().collect();
    let changes = |mut at: Site, legs: [(i64, i64, i64); 2]| {
        let mut n = 0;
        for (dx, dy, steps) in legs {
            for _ in 0..steps {
                let next = (at.0 + dx, at.1 + dy);
                n += (set.contains(&at) != set.contains(&next)) as usize;
                at = next;
            }
        }
        n
    };
    let mut out = BTreeSet::new();
    for (i, &a) in cells.iter().enumerate() {
        for &b in &cells[i + 1..] {
            let (sx, sy) = ((b.0 - a.0).signum(), (b.1 - a.1).signum());
            let (nx, ny) = ((b.0 - a.0).abs(), (b.1 - a.1).abs());
            let hv = changes(a, [(sx, 0, nx), (0, sy, ny)]);
            let vh = changes(a, [(0, sy, ny), (sx, 0, nx)]);
            if hv >= 2 && vh >= 2 {
                out.insert((a.min(b), a.max(b)));
            }
        }
    }
    out
}

fn self_energy() -> Outcome {
    let cert = certifier(-0.03);
    let mut rng = ChaCha8Rng::seed_from_u64(102);
    let (mut violations, mut mismatches, mut with_pairs) = (0, 0, 0);
    for _ in 0..100 {
        let n = rng.gen_range(1..=12);
        let cells = random_polyomino(&mut rng, n);
        let lib: BTreeSet<(Site, Site)> = path_pair_set(&cells).into_iter().map(|(a, b)| (a.min(b), a.max(b))).collect();
        let traced = path_pairs_by_tracing(&cells);
        mismatches += (lib != traced) as usize;
        with_pairs += (!traced.is_empty()) as usize;
        if !cert.self_energy_check(&cells).unwrap().ok() {
            violations += 1;
        }
    }
    check(
        violations == 0 && mismatches == 0,
        format!("100 polyominoes, {violations} violations, {mismatches} path-set mismatches, {with_pairs} with nonempty path set"),
    )
}

fn chessboard() -> Outcome {
    let tau = -0.03;
    let en = energetics(2, 5.0, tau);
    let mut rng = ChaCha8Rng::seed_from_u64(103);
    let mut violations = 0;
    let mut done = 0;
    while done < 200 {
        let n = rng.gen_range(1..=5);
        let widths: Vec<u64> = (0..n).map(|_| rng.gen_range(1..=10)).collect();
        let spacings: Vec<u64> = (1..n).map(|_| rng.gen_range(1..=10)).collect();
        let seq = StripeSequence::new(widths, spacings).unwrap();
        if seq.span() >= 64 {
            continue;
        }
        let l = rng.gen_range(seq.span() + 1..=64);
        if !en.chessboard_check(&seq, l).unwrap().ok() {
            violations += 1;
        }
        done += 1;
    }
    let h = en.optimal_width().unwrap().h_star;
    let gaps: Vec<f64> = [64u64, 128, 256]
        .iter()
        .map(|&l| {
            let w = l - h;
            (en.striped_energy_per_site(w).unwrap().value * w as f64 - tau).abs()
        })
        .collect();
    let monotone = gaps.windows(2).all(|g| g[1] < g[0]);
    check(
        violations == 0 && monotone,
        format!("200 sequences, {violations} violations; closing-block gaps {:.3e} {:.3e} {:.3e}", gaps[0], gaps[1], gaps[2]),
    )
}

fn localization() -> Outcome {
    let t0 = Instant::now();
    let cert = certifier(-0.03);
    let h = cert.h_star();
    let ell = 8 * h;
    let mut rng = ChaCha8Rng::seed_from_u64(104);
    let (mut violations, mut slack) = (0, f64::INFINITY);
    for k in 0..50 {
        let cfg = perturbed_stripes(&mut rng, 3 * ell as i64, h, Boundary::Plus, 1 + k % 5).unwrap();
        let part = tile_partition(&cfg, &extract_contours(&cfg), ell, (0, 0)).unwrap();
        let l = cert.localization_check(&cfg, &part).unwrap();
        if !l.certificate.ok() {
            violations += 1;
        }
        slack = slack.min(l.certificate.slack);
    }
    check(
        violations == 0,
        format!("50 configurations, l = {ell}, {violations} violations, least slack {slack:.3}, {:.1} s", t0.elapsed().as_secs_f64()),
    )
}

fn ground_state() -> Outcome {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(105);
    let (mut violations, mut strict, mut total) = (0, 0, 0);
    for tau in [-0.08, -0.04, -0.02, -0.01, -0.005] {
        let cert = certifier(tau);
        let h = cert.h_star();
        let ell = 8 * h;
        for _ in 0..200 {
            let cfg = compact_perturbation(&mut rng, 2 * ell as i64, h).unwrap();
            let g = cert.theorem3(&cfg, ell, (0, 0), 0.0).unwrap();
            total += 1;
            if !g.ok() {
                violations += 1;
            }
            strict += (g.n_c > 0 && g.ground_state.strict()) as usize;
        }
    }
    let secs = t0.elapsed().as_secs_f64();
    check(
        violations == 0 && secs < 600.0,
        format!("{total} perturbations over 5 couplings, {violations} violations, {strict} strict with corners, {secs:.1} s"),
    )
}

fn scaling() -> Outcome {
    let (k2, _) = fit_excess_exponent(&energetics(2, 5.0, -0.01), 20, 200).unwrap();
    let taus: Vec<f64> = (0..8).map(|i| -1e-3 * 10f64.powf(i as f64 / 7.0)).collect();
    let hs: Vec<f64> = taus.iter().map(|&t| energetics(2, 5.0, t).optimal_width().unwrap().h_star as f64).collect();
    let (slope, _) = fit_line(&taus.iter().map(|t| t.abs().ln()).collect::<Vec<_>>(), &hs.iter().map(|h| h.ln()).collect::<Vec<_>>());
    let (k3, _) = fit_excess_exponent(&energetics(3, 6.0, -0.01), 20, 200).unwrap();
    let ok = (k2 + 3.0).abs() <= 0.02 * 3.0 && (slope + 0.5).abs() <= 0.1 * 0.5 && (k3 + 3.0).abs() <= 0.02 * 3.0;
    check(ok, format!("d=2 exponent {k2:.4} (want -3), h* slope {slope:.4} (want -0.5), d=3 p=6 exponent {k3:.4} (want -3)"))
}

fn brute_force() -> Outcome {
    let en = energetics(2, 5.0, -0.01);
    let mut notes = Vec::new();
    let mut ok = true;
    for l in [8usize, 12, 16, 20, 24] {
        let jx = ring_crossing(&en, l).unwrap();
        let below = en.with_coupling(jx * 0.999).unwrap();
        let tbl = ring_stripe_table(&below, l).unwrap();
        let want = tbl.iter().min_by(|a, b| a.1.value.total_cmp(&b.1.value)).unwrap().0;
        let r = exhaustive_1d(&below, l).unwrap();
        let striped = r.minimizers.iter().all(|m| matches!(m.pattern, Pattern::Stripes { width, .. } if width == want));
        let above = exhaustive_1d(&en.with_coupling(jx * 1.001).unwrap(), l).unwrap();
        let uniform = above.minimizers.iter().all(|m| m.pattern == Pattern::Uniform);
        ok &= striped && uniform;
        notes.push(format!("L={l}:h={want}"));
    }
    let ham = Hamiltonian::new(en).unwrap();
    for (lx, ly) in [(4usize, 4usize), (4, 6)] {
        let jx = torus_crossing(&ham, lx, ly).unwrap();
        let below = ham.with_coupling(jx * 0.999).unwrap();
        let tbl = torus_stripe_table(&below, lx, ly).unwrap();
        let best = tbl.iter().map(|t| t.2.value).fold(f64::INFINITY, f64::min);
        let widths: Vec<usize> = tbl.iter().filter(|t| t.2.value <= best + 1e-12).map(|t| t.0).collect();
        let r = exhaustive_2d(&below, lx, ly).unwrap();
        let striped = r.minimizers.iter().all(|m| matches!(m.pattern, Pattern::Stripes { width, .. } if widths.contains(&width)));
        let above = exhaustive_2d(&ham.with_coupling(jx * 1.001).unwrap(), lx, ly).unwrap();
        let uniform = above.minimizers.iter().all(|m| m.pattern == Pattern::Uniform);
        ok &= striped && uniform;
        notes.push(format!("{lx}x{ly}:h={widths:?}"));
    }
    check(ok, format!("striped below and uniform above the crossing: {}", notes.join(" ")))
}

fn geometry() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(108);
    let (mut count_fail, mut length_fail) = (0, 0);
    for _ in 0..100 {
        let n = rng.gen_range(10..40);
        let minus = rng.gen_range(0.2..0.6);
        let cfg = random_config(&mut rng, Rect::new(0, 0, n, n), Boundary::Plus, minus).unwrap();
        let cs = extract_contours(&cfg);
        let ell = rng.gen_range(5..12);
        let part = tile_partition(&cfg, &cs, ell, (rng.gen_range(0..ell as i64), 0)).unwrap();
        count_fail += (part.n_c2_total() as usize != 2 * cs.n_c) as usize;
        // every plus-minus nearest-neighbour pair is one bond of one contour
        let r = cfg.rect();
        let mut walls = 0;
        for s in r.x0 - 1..=r.x1() {
            for t in r.y0 - 1..=r.y1() {
                walls += (cfg.get((s, t)) != cfg.get((s + 1, t))) as usize + (cfg.get((s, t)) != cfg.get((s, t + 1))) as usize;
            }
        }
        let on_contours: usize = cs.contours.iter().map(|c| c.bonds.len()).sum();
        length_fail += (on_contours != walls || cs.bonds.len() != walls) as usize;
    }
    let s = deform_good_region(&common::example(), &common::tiles(), common::ELL, (0, 0), Orientation::Vertical).unwrap();
    let inf = |f: fn(&stripes_core::geometry::Segment) -> bool| -> Vec<usize> {
        (0..s.segments.len()).filter(|&i| f(&s.segments[i])).map(|i| i + 1).collect()
    };
    let (w1, w2) = (inf(|g| g.w1.is_none()), inf(|g| g.w2.is_none()));
    let pattern = s.segments.len() == 22 && w1 == vec![1, 17] && w2 == vec![8, 9];
    check(
        count_fail == 0 && length_fail == 0 && pattern,
        format!(
            "corner count off on {count_fail}, contour length off on {length_fail} of 100; running example infinite w1 at {w1:?}, w2 at {w2:?}"
        ),
    )
}

/// Largest over smallest of a positive family.
fn spread(v: &[f64]) -> f64 {
    let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
    hi / lo
}

fn constants() -> Outcome {
    let t0 = Instant::now();
    let mults = [8u64, 12, 16];
    // spacing constants and the good-region constant
    let cert = certifier(-0.03);
    let h = cert.h_star();
    let en = cert.energetics();
    let (mut c3s, mut c2s, mut c1s) = (Vec::new(), Vec::new(), Vec::new());
    for &m in &mults {
        let ell = m * h;
        c3s.push(en.gap_bound_check(ell).map(|g| g.c3).unwrap_or(f64::NAN));
        let grid = log_grid(1, ell, 10);
        c2s.push(fit_c2(en, &grid, &grid).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(109);
        let mut c1 = f64::NEG_INFINITY;
        for k in 0..6 {
            let cfg = perturbed_stripes(&mut rng, 3 * ell as i64, h, Boundary::Plus, 1 + k % 3).unwrap();
            let part = tile_partition(&cfg, &extract_contours(&cfg), ell, (0, 0)).unwrap();
            for i in 0..part.regions.len() {
                if let Some(f) = cert.lemma22(&cfg, &part, i, 0.0).unwrap().fitted {
                    c1 = c1.max(f);
                }
            }
        }
        c1s.push(c1);
    }
    // the bad-tile constant needs l |tau| small, hence a much smaller tau
    let cert = certifier(-1e-4);
    let h = cert.h_star();
    let mut c2t = Vec::new();
    for &m in &mults {
        let ell = m * h;
        let mut least = f64::INFINITY;
        for (_, cfg) in bad_tiles(h, ell).unwrap() {
            let part = tile_partition(&cfg, &extract_contours(&cfg), ell, (0, 0)).unwrap();
            if let Some(f) = cert.lemma1(&cfg, &part, (0, 0), 0.0).unwrap().fit.fitted {
                least = least.min(f);
            }
        }
        c2t.push(least);
    }
    let good = |v: &[f64]| v.iter().all(|&c| c > 0.0 && c.is_finite()) && spread(v) <= 2.0;
    let ok = good(&c3s) && good(&c2s) && good(&c1s) && good(&c2t);
    check(
        ok,
        format!(
            "over l = 8,12,16 h*: C3 {c3s:.3?} C2 {c2s:.3?} c1 {c1s:.3?} (tau -0.03), c2 {c2t:.3?} (tau -1e-4), {:.0} s",
            t0.elapsed().as_secs_f64()
        ),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("droplet identity", droplet_identity),
        ("self-energy bound", self_energy),
        ("chessboard bound", chessboard),
        ("localization bound", localization),
        ("ground-state corollary", ground_state),
        ("scaling laws", scaling),
        ("brute-force stripes", brute_force),
        ("geometry invariants", geometry),
        ("inequality chain constants", constants),
    ];
    let only: Option<usize> = std::env::var("ACCEPTANCE_ONLY").ok().and_then(|s| s.parse().ok());
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        if only.is_some_and(|k| k != i + 1) {
            continue;
        }
        match f() {
            Ok(d) => println!("criterion {} {name}: PASS ({d})", i + 1),
            Err(d) => {
                failed += 1;
                println!("criterion {} {name}: FAIL ({d})", i + 1);
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
