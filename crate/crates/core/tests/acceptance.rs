//! Acceptance suite. Runs every criterion sequentially inside one test so the
//! timing checks are not disturbed by concurrently running tests, prints one
//! PASS/FAIL line per criterion and fails if any criterion fails.

mod common;

use std::collections::HashSet;
use std::f64::consts::PI;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use uvgs_core::bench::{growth_ratios, time_pipeline};
use uvgs_core::formats::{decode_tensor, encode_tensor, FormatError, HEADER_LEN};
use uvgs_core::mapping::angles_of;
use uvgs_core::packing::tally;
use uvgs_core::ply::{encode_ply, parse_ply};
use uvgs_core::*;

use common::*;

/// Relative tolerance for real-valued outputs.
const REAL_RTOL: f64 = 1e-9;
const RANDOM_CASES: usize = 1000;

type Outcome = Result<String, String>;

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn rel_close(a: f64, b: f64) -> bool {
    (a - b).abs() <= REAL_RTOL * b.abs().max(1.0)
}

fn within_budget(elapsed: Duration, budget: Duration) -> Result<(), String> {
    check(elapsed < budget, || format!("took {elapsed:.2?}, budget {budget:?}"))
}

// ---------------------------------------------------------------------------
// 1. Formula conformance
// ---------------------------------------------------------------------------

fn direction_oracle(p: [f64; 3], c: [f64; 3]) -> [f64; 3] {
    let d = [p[0] - c[0], p[1] - c[1], p[2] - c[2]];
    let n = d[0].hypot(d[1]).hypot(d[2]);
    d.map(|x| x / n)
}

/// Independent O(N²) rank: 1 + #{j : (v_j, k_j) < (v_i, k_i)}.
fn naive_ranks(values: &[f64], keys: &[u64]) -> Vec<f64> {
    let n = values.len();
    (0..n)
        .map(|i| {
            let below =
                (0..n).filter(|&j| values[j] < values[i] || (values[j] == values[i] && keys[j] < keys[i])).count();
            (below + 1) as f64 / n as f64
        })
        .collect()
}

/// Exhaustive cell scan: the cell whose interval `[c/W, (c+1)/W)` holds `x`, capped.
fn scan_cell(x: f64, cells: usize) -> u32 {
    let scaled = x * cells as f64;
    for c in 0..cells {
        if (c as f64) <= scaled && scaled < (c + 1) as f64 {
            return c as u32;
        }
    }
    (cells - 1) as u32
}

/// Entry `e` is kept iff fewer than K entries beat it; kept entries ordered by how many beat them.
fn naive_top_k(arrivals: &[(u64, f32)], k: usize) -> Vec<(u64, f32)> {
    let beats = |a: &(u64, f32), b: &(u64, f32)| a.1 > b.1 || (a.1 == b.1 && a.0 < b.0);
    let mut kept: Vec<(usize, (u64, f32))> = arrivals
        .iter()
        .map(|e| (arrivals.iter().filter(|o| beats(o, e)).count(), *e))
        .filter(|(better, _)| *better < k)
        .collect();
    kept.sort_by_key(|(better, _)| *better);
    kept.into_iter().map(|(_, e)| e).collect()
}

fn criterion_formula_conformance() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xC1);

    // to_direction
    check(to_direction([0.0, 0.0, 2.0], [0.0; 3]) == Ok([0.0, 0.0, 1.0]), || "to_direction (0,0,2)".into())?;
    let d = to_direction([3.0, 4.0, 0.0], [0.0; 3]).unwrap();
    check(rel_close(d[0], 0.6) && rel_close(d[1], 0.8) && d[2] == 0.0, || format!("to_direction 3-4-5 gave {d:?}"))?;
    check(to_direction([1.0; 3], [1.0; 3]) == Err(MappingError::DegenerateDirection), || "degenerate".into())?;
    for case in 0..RANDOM_CASES {
        let p: [f64; 3] = std::array::from_fn(|_| rng.random_range(-10.0..10.0));
        let c: [f64; 3] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
        let got = to_direction(p, c).map_err(|e| format!("case {case}: {e}"))?;
        let want = direction_oracle(p, c);
        let norm = (got[0] * got[0] + got[1] * got[1] + got[2] * got[2]).sqrt();
        check((norm - 1.0).abs() <= 1e-9 && (0..3).all(|i| rel_close(got[i], want[i])), || {
            format!("to_direction case {case}: {got:?} vs {want:?}")
        })?;
    }

    // to_angles: reconstruction oracle plus range checks
    let ex =
        [([1.0, 0.0, 0.0], (0.0, PI / 2.0)), ([0.0, 1.0, 0.0], (PI / 2.0, PI / 2.0)), ([0.0, 0.0, -1.0], (0.0, PI))];
    for (dir, (t, p)) in ex {
        let (gt, gp) = to_angles(dir);
        check(rel_close(gt, t) && rel_close(gp, p), || format!("to_angles {dir:?} gave ({gt}, {gp})"))?;
    }
    for case in 0..RANDOM_CASES {
        let raw: [f64; 3] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
        let dir = direction_oracle(raw, [0.0; 3]);
        let (t, p) = to_angles(dir);
        let back = [p.sin() * t.cos(), p.sin() * t.sin(), p.cos()];
        check((-PI..PI).contains(&t) && (0.0..=PI).contains(&p), || format!("to_angles case {case} out of range"))?;
        check((0..3).all(|i| (back[i] - dir[i]).abs() <= REAL_RTOL), || {
            format!("to_angles case {case}: {dir:?} reconstructs to {back:?}")
        })?;
    }

    // rank_normalize
    check(rank_normalize(&[0.5, -1.0, 2.0, 0.0], &[0, 1, 2, 3]).unwrap() == vec![0.75, 0.25, 1.0, 0.5], || {
        "rank example 1".into()
    })?;
    check(rank_normalize(&[7.0], &[0]).unwrap() == vec![1.0], || "rank example 2".into())?;
    check(rank_normalize(&[1.0, 1.0, 2.0], &[0, 1, 2]).unwrap() == vec![1.0 / 3.0, 2.0 / 3.0, 1.0], || {
        "rank example 3".into()
    })?;
    for case in 0..RANDOM_CASES {
        let n = rng.random_range(1..80);
        let levels = rng.random_range(1..20);
        let values: Vec<f64> = (0..n).map(|_| rng.random_range(0..levels) as f64 * 0.37 - 2.0).collect();
        let mut keys: Vec<u64> = (0..n as u64).map(|k| k * 3 + 1).collect();
        keys.shuffle(&mut rng);
        let got = rank_normalize(&values, &keys).unwrap();
        check(got == naive_ranks(&values, &keys), || format!("rank_normalize case {case} differs from O(N^2) oracle"))?;
    }

    // discretize
    let uv = ContinuousUv { u: vec![1.0, 0.5, 0.0], v: vec![1.0, 0.25, 0.0], strategy: Strategy::RankOt };
    let a = discretize(&uv, &GridConfig::new(512, 512, 1));
    check((a.col[0], a.row[0]) == (511, 511) && (a.col[2], a.row[2]) == (0, 0), || "discretize caps".into())?;
    let a = discretize(&uv, &GridConfig::new(4, 4, 1));
    check((a.col[1], a.row[1]) == (2, 1), || "discretize (0.5, 0.25) on 4x4".into())?;
    for case in 0..RANDOM_CASES {
        let (h, w) = (rng.random_range(1..600), rng.random_range(1..600));
        let n = 20;
        let u: Vec<f64> = (0..n).map(|i| if i == 0 { 1.0 } else { rng.random::<f64>() }).collect();
        let v: Vec<f64> = (0..n).map(|i| if i == 1 { 1.0 } else { rng.random::<f64>() }).collect();
        let a = discretize(
            &ContinuousUv { u: u.clone(), v: v.clone(), strategy: Strategy::RankOt },
            &GridConfig::new(h, w, 1),
        );
        for i in 0..n {
            check(a.col[i] == scan_cell(u[i], w) && a.row[i] == scan_cell(v[i], h), || {
                format!("discretize case {case} entry {i}")
            })?;
        }
        // exhaustive slot tally
        let raw = tally(&a, h, w);
        for (r, c) in a.row.iter().zip(&a.col) {
            let s = *r as usize * w + *c as usize;
            let brute = a.row.iter().zip(&a.col).filter(|(r2, c2)| *r2 == r && *c2 == c).count();
            check(raw[s] as usize == brute, || format!("tally case {case} slot {s}"))?;
        }
        check(raw.iter().map(|&x| x as usize).sum::<usize>() == n, || "tally conservation".into())?;
    }

    // top_k_retain
    let arr = [(0, 0.9f32), (1, 0.1), (2, 0.5)];
    check(top_k_retain(&arr, 1) == vec![(0, 0.9)], || "top-k K=1".into())?;
    check(top_k_retain(&arr, 2) == vec![(0, 0.9), (2, 0.5)], || "top-k K=2".into())?;
    check(top_k_retain(&[(5, 0.3), (2, 0.3)], 1) == vec![(2, 0.3)], || "top-k tie".into())?;
    for case in 0..RANDOM_CASES {
        let m = rng.random_range(0..40);
        let mut ids: Vec<u64> = (0..200).collect();
        ids.shuffle(&mut rng);
        let arrivals: Vec<(u64, f32)> = ids[..m].iter().map(|&id| (id, rng.random_range(0..6) as f32 * 0.25)).collect();
        let k = rng.random_range(1..10);
        check(top_k_retain(&arrivals, k) == naive_top_k(&arrivals, k), || format!("top-k case {case}"))?;
    }
    Ok(format!("5 operations x {RANDOM_CASES} randomized cases match their oracles"))
}

// ---------------------------------------------------------------------------
// 2. Marginal uniformity
// ---------------------------------------------------------------------------

fn has_distinct_angles(angles: &AngularCoordinates) -> bool {
    [&angles.theta, &angles.phi].iter().all(|vals| {
        let mut s: Vec<f64> = vals.to_vec();
        s.sort_by(|a, b| a.partial_cmp(b).unwrap());
        s.windows(2).all(|w| w[0] < w[1])
    })
}

fn random_clustered_set(rng: &mut ChaCha8Rng, n: usize) -> GaussianSet {
    let clusters = rng.random_range(1..12);
    let kappa = rng.random_range(1.0..300.0);
    generate(&SynthSpec::vmf(clusters, kappa, n, rng.random())).unwrap()
}

fn criterion_marginal_uniformity() -> Outcome {
    let (n, cells) = (10_000usize, 64usize);
    let grid = GridConfig::new(cells, cells, 1);
    let config = MappingConfig::new(Strategy::RankOt);
    let mut rng = ChaCha8Rng::seed_from_u64(0xC2);
    let mut worst = 0.0f64;
    let mut sets = 0;
    while sets < 100 {
        let set = random_clustered_set(&mut rng, n);
        let center = resolve_center(&set, config.origin_policy).unwrap();
        if !has_distinct_angles(&angles_of(&set, center)) {
            continue;
        }
        sets += 1;
        let a = discretize(&map_set(&set, &config).unwrap(), &grid);
        let raw = tally(&a, cells, cells);
        // interval-counting oracle
        let mut oracle = vec![0usize; cells];
        for r in 1..=n {
            oracle[rank_cell(r, n, cells)] += 1;
        }
        for i in 0..cells {
            let row: usize = raw[i * cells..(i + 1) * cells].iter().map(|&x| x as usize).sum();
            let col: usize = (0..cells).map(|r| raw[r * cells + i] as usize).sum();
            let ideal = n as f64 / cells as f64;
            check(row == oracle[i] && col == oracle[i], || {
                format!("set {sets} line {i}: row {row}, col {col}, oracle {}", oracle[i])
            })?;
            for count in [row, col] {
                let dev = (count as f64 - ideal).abs();
                worst = worst.max(dev);
                check(dev <= 2.0, || format!("set {sets} line {i}: count {count} deviates {dev} from {ideal}"))?;
            }
        }
    }
    Ok(format!("100 sets, max |count - N/W| = {worst:.2}"))
}

// ---------------------------------------------------------------------------
// 3 and 4. Utilization ordering and K-sweep on vMF fixtures
// ---------------------------------------------------------------------------

fn vmf_fixture(seed: u64) -> GaussianSet {
    generate(&SynthSpec::vmf(8, 50.0, 50_000, seed)).unwrap()
}

const FIXTURE_SEEDS: std::ops::Range<u64> = 0..20;

/// Name, accessor, and whether higher is better.
type Metric = (&'static str, fn(&UtilizationReport) -> f64, bool);

fn criterion_utilization_ordering() -> Outcome {
    let grid = GridConfig::new(512, 512, 1);
    let mut mean = [[0.0f64; 3]; 3];
    // (metric, pair) -> fixtures violating it
    let mut violations: Vec<(String, usize)> = Vec::new();
    let mut note = |what: String| match violations.iter_mut().find(|(w, _)| *w == what) {
        Some(entry) => entry.1 += 1,
        None => violations.push((what, 1)),
    };
    for seed in FIXTURE_SEEDS {
        let set = vmf_fixture(seed);
        let r = compare(&set, &MappingConfig::default(), &grid, &Strategy::ALL).map_err(|e| e.to_string())?;
        let (sph, he, ot) = (&r[0], &r[1], &r[2]);
        let metrics: [Metric; 3] = [
            ("non-empty", |r| r.non_empty_ratio, true),
            ("collision", |r| r.collision_rate, false),
            ("retention", |r| r.retention, true),
        ];
        for (name, get, higher_is_better) in metrics {
            for ((a_name, a), (b_name, b)) in [(("OT", ot), ("HE", he)), (("HE", he), ("spherical", sph))] {
                let holds = if higher_is_better { get(a) >= get(b) } else { get(a) <= get(b) };
                if !holds {
                    note(format!("{name} {a_name} vs {b_name}"));
                }
            }
        }
        for (i, rep) in r.iter().enumerate() {
            mean[i][0] += rep.non_empty_ratio / 20.0;
            mean[i][1] += rep.collision_rate / 20.0;
            mean[i][2] += rep.retention / 20.0;
        }
    }
    let fmt = |m: [f64; 3]| format!("{:.1}%/{:.3}/{:.1}%", 100.0 * m[0], m[1], 100.0 * m[2]);
    let summary = format!(
        "mean non-empty/collision/retention: spherical {}, HE {}, OT {}",
        fmt(mean[0]),
        fmt(mean[1]),
        fmt(mean[2])
    );
    if violations.is_empty() {
        Ok(format!("20 fixtures; {summary}"))
    } else {
        let list: Vec<String> = violations.iter().map(|(w, n)| format!("{w} on {n}/20")).collect();
        Err(format!("ordering violated: {}; {summary}", list.join(", ")))
    }
}

fn criterion_k_sweep() -> Outcome {
    let grid = GridConfig::new(512, 512, 1);
    let ks = [1usize, 2, 4, 8];
    let mut mean_gap = [0.0f64; 4];
    for seed in FIXTURE_SEEDS {
        let set = vmf_fixture(seed);
        let sweep = |s: Strategy| {
            let uv = map_set(&set, &MappingConfig::new(s)).unwrap();
            k_sweep(&set, &uv, &grid, &ks)
        };
        let (sph, ot) = (sweep(Strategy::Spherical), sweep(Strategy::RankOt));
        let gaps: Vec<f64> = sph.iter().zip(&ot).map(|(s, o)| o.retention - s.retention).collect();
        for (i, &k) in ks.iter().enumerate() {
            check(gaps[i] >= 0.0, || {
                format!("seed {seed} K={k}: OT {} < spherical {}", ot[i].retention, sph[i].retention)
            })?;
            mean_gap[i] += gaps[i] / 20.0;
        }
        check(gaps[1..].iter().all(|&g| gaps[0] > g), || {
            format!("seed {seed}: gap at K=1 not strictly largest: {gaps:?}")
        })?;
        for reports in [&sph, &ot] {
            check(reports.windows(2).all(|w| w[0].retention <= w[1].retention), || {
                format!("seed {seed}: retention not monotone in K")
            })?;
        }
    }
    Ok(format!(
        "20 fixtures, mean retention gap OT - spherical at K=1,2,4,8: {:.3}, {:.3}, {:.3}, {:.3}",
        mean_gap[0], mean_gap[1], mean_gap[2], mean_gap[3]
    ))
}

// ---------------------------------------------------------------------------
// 5. Invariance suite
// ---------------------------------------------------------------------------

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}

/// Positions on a dyadic lattice, so that scaling by 0.5 or 3 is exact in f32.
///
/// A point is dropped when its azimuth or polar angle equals that of an
/// earlier point exactly. Equality is decided on integer keys, because two
/// analytically equal angles can differ in their last bits once computed.
fn lattice_set(rng: &mut ChaCha8Rng, n: usize) -> GaussianSet {
    let mut seen_theta = HashSet::new();
    let mut seen_phi = HashSet::new();
    let mut gaussians = Vec::with_capacity(n);
    while gaussians.len() < n {
        let k: [i64; 3] = std::array::from_fn(|_| rng.random_range(-512..=512));
        let r2 = k[0] * k[0] + k[1] * k[1] + k[2] * k[2];
        if r2 == 0 {
            continue;
        }
        let g = gcd(k[0], k[1]).max(1);
        let theta_key = (k[0] / g, k[1] / g);
        let z2 = k[2] * k[2];
        let g = gcd(z2, r2);
        let phi_key = (k[2].signum(), z2 / g, r2 / g);
        if !seen_theta.insert(theta_key) || !seen_phi.insert(phi_key) {
            continue;
        }
        let p = k.map(|x| x as f32 / 64.0);
        // distinct opacities
        let opacity = gaussians.len() as f32 * 0.001 - 0.3 * rng.random_range(0..4) as f32;
        gaussians.push(Gaussian::neutral(p, opacity, 3, gaussians.len() as u64));
    }
    GaussianSet::new(gaussians, 3).unwrap().with_origin_policy(OriginPolicy::RawOrigin)
}

fn scaled(set: &GaussianSet, c: f32) -> GaussianSet {
    let gs = set.iter().map(|g| Gaussian { position: g.position.map(|x| x * c), ..g.clone() }).collect();
    GaussianSet::new(gs, set.appearance_width()).unwrap()
}

fn criterion_invariance() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xC5);
    let grid = GridConfig::new(64, 64, 2);
    let mut violations = Vec::new();
    for trial in 0..200 {
        let n = rng.random_range(50..400);
        let set = lattice_set(&mut rng, n);
        let base = MappingConfig::default().with_origin_policy(OriginPolicy::RawOrigin);

        for s in Strategy::ALL {
            let config = base.with_strategy(s);
            let uv = map_set(&set, &config).unwrap();
            for c in [0.5f32, 3.0] {
                let other = map_set(&scaled(&set, c), &config).unwrap();
                let ok = match s {
                    Strategy::Spherical => {
                        uv.u.iter()
                            .zip(&other.u)
                            .chain(uv.v.iter().zip(&other.v))
                            .all(|(a, b)| (a - b).abs() <= REAL_RTOL)
                    }
                    _ => uv == other,
                };
                if !ok {
                    violations.push(format!("trial {trial}: scale {c} changes {} uv", s.short_name()));
                }
            }
            // determinism, through to the packed bytes
            let t1 = pack(&set, &discretize(&uv, &grid), &grid, s).unwrap();
            let uv2 = map_set(&set, &config).unwrap();
            let t2 = pack(&set, &discretize(&uv2, &grid), &grid, s).unwrap();
            if encode_tensor(&t1) != encode_tensor(&t2) {
                violations.push(format!("trial {trial}: {} is not deterministic", s.short_name()));
            }
        }

        // permutation equivariance (RankOT), including the packed tensor
        let config = base.with_strategy(Strategy::RankOt);
        let uv = map_set(&set, &config).unwrap();
        let mut perm: Vec<usize> = (0..set.len()).collect();
        perm.shuffle(&mut rng);
        let shuffled = GaussianSet::from_reordered(
            perm.iter().map(|&i| set.gaussians()[i].clone()).collect(),
            set.appearance_width(),
            set.origin_policy,
        );
        let uv_s = map_set(&shuffled, &config).unwrap();
        if perm.iter().enumerate().any(|(j, &i)| uv_s.u[j] != uv.u[i] || uv_s.v[j] != uv.v[i]) {
            violations.push(format!("trial {trial}: permutation changes RankOT uv"));
        }
        let t = pack(&set, &discretize(&uv, &grid), &grid, Strategy::RankOt).unwrap();
        let t_s = pack(&shuffled, &discretize(&uv_s, &grid), &grid, Strategy::RankOt).unwrap();
        if t != t_s {
            violations.push(format!("trial {trial}: permutation changes the packed tensor"));
        }

        // rank monotonicity, with ties forced by duplicating positions
        let mut dup: Vec<Gaussian> = set.gaussians().to_vec();
        for i in 0..dup.len() / 3 {
            dup[3 * i + 1].position = dup[3 * i].position;
        }
        let dup = GaussianSet::new(dup, 3).unwrap().with_origin_policy(OriginPolicy::RawOrigin);
        let angles = angles_of(&dup, [0.0; 3]);
        let uv_d = map_set(&dup, &config).unwrap();
        for (vals, out) in [(&angles.theta, &uv_d.u), (&angles.phi, &uv_d.v)] {
            let mut order: Vec<usize> = (0..vals.len()).collect();
            order.sort_by(|&a, &b| vals[a].partial_cmp(&vals[b]).unwrap().then(a.cmp(&b)));
            if order.windows(2).any(|w| out[w[0]] >= out[w[1]]) {
                violations.push(format!("trial {trial}: rank order violated"));
            }
        }
    }
    if violations.is_empty() {
        Ok("200 trials: scale, permutation, monotonicity, determinism; 0 violations".into())
    } else {
        Err(format!("{} violations, first: {}", violations.len(), violations[0]))
    }
}

// ---------------------------------------------------------------------------
// 6. Complexity
// ---------------------------------------------------------------------------

fn criterion_complexity() -> Outcome {
    let sizes: Vec<usize> = (0..5).map(|i| 100_000 << i).collect();
    let template = SynthSpec::vmf(8, 50.0, 1, 6);
    let rows = time_pipeline(&sizes, &template, &MappingConfig::new(Strategy::RankOt), &GridConfig::default(), 3)
        .map_err(|e| e.to_string())?;
    let ratios = growth_ratios(&rows);
    check(ratios.iter().all(|&r| r < 2.5), || format!("time-per-doubling ratios {ratios:.2?}"))?;
    let t_1m = {
        let set = generate(&SynthSpec { n: 1_000_000, ..template.clone() }).unwrap();
        let grid = GridConfig::default();
        let start = Instant::now();
        let uv = map_set(&set, &MappingConfig::new(Strategy::RankOt)).unwrap();
        let t = pack(&set, &discretize(&uv, &grid), &grid, Strategy::RankOt).unwrap();
        std::hint::black_box(t);
        start.elapsed()
    };
    let soft = if t_1m < Duration::from_secs(2) { "met" } else { "missed (soft)" };
    Ok(format!("ratios {ratios:.2?}; 10^6 Gaussians in {t_1m:.2?}, 2 s target {soft}"))
}

// ---------------------------------------------------------------------------
// 7. Format fidelity
// ---------------------------------------------------------------------------

/// Deterministic mutations of a valid UVGT file, each breaking an invariant.
fn mutations(golden: &[u8], t: &UvTensor) -> Vec<(String, Vec<u8>)> {
    let slots = t.shape.slots();
    let counts_at = HEADER_LEN;
    let raw_at = counts_at + 4 * slots;
    let data_at = raw_at + 4 * slots;
    let ids_at = data_at + 4 * t.data.len();
    let entry_bytes = 4 * t.shape.channels;
    let mut out: Vec<(String, Vec<u8>)> = Vec::new();
    let mut edit = |name: String, f: &dyn Fn(&mut Vec<u8>)| {
        let mut b = golden.to_vec();
        f(&mut b);
        out.push((name, b));
    };
    for i in 0..4 {
        edit(format!("magic byte {i}"), &|b| b[i] ^= 0x20);
    }
    for v in [0u8, 2, 255] {
        edit(format!("version {v}"), &|b| b[4] = v);
    }
    for v in [1u8, 0x80] {
        edit(format!("flags {v}"), &|b| b[5] = v);
    }
    for (field, at) in [("H", 6), ("W", 10), ("K", 14), ("C", 18)] {
        edit(format!("{field} + 1"), &|b| b[at] += 1);
        edit(format!("{field} = 0"), &|b| b[at..at + 4].copy_from_slice(&[0; 4]));
    }
    for v in [3u8, 200] {
        edit(format!("strategy {v}"), &|b| b[22] = v);
    }
    edit("n_input + 1".into(), &|b| b[23] += 1);
    edit("n_input - 1".into(), &|b| b[23] -= 1);
    for cut in [1usize, 4, 8, 13, golden.len() - HEADER_LEN] {
        edit(format!("truncate {cut}"), &|b| b.truncate(b.len() - cut));
    }
    edit("append byte".into(), &|b| b.push(0));
    edit("append id".into(), &|b| b.extend_from_slice(&u64::MAX.to_le_bytes()));
    for s in 0..slots {
        let (c, r) = (counts_at + 4 * s, raw_at + 4 * s);
        edit(format!("counts[{s}] + 1"), &|b| b[c] += 1);
        edit(format!("raw_counts[{s}] + 1"), &|b| b[r] += 1);
        edit(format!("counts[{s}] = K + 1 with raw = K + 1"), &|b| {
            let k1 = (t.shape.capacity as u32 + 1).to_le_bytes();
            b[c..c + 4].copy_from_slice(&k1);
            b[r..r + 4].copy_from_slice(&k1);
        });
    }
    for s in 0..slots {
        let e = ids_at + 8 * s * t.shape.capacity;
        if t.counts[s] == 0 {
            edit(format!("empty slot {s} gets id 0"), &|b| b[e..e + 8].copy_from_slice(&0u64.to_le_bytes()));
            let d = data_at + entry_bytes * s * t.shape.capacity;
            edit(format!("empty slot {s} gets data"), &|b| b[d + 3] = 0x3f);
            edit(format!("empty slot {s} gets -0.0"), &|b| b[d + 3] = 0x80);
        } else {
            edit(format!("slot {s} id -> sentinel"), &|b| b[e..e + 8].copy_from_slice(&u64::MAX.to_le_bytes()));
            edit(format!("slot {s} id -> n_input"), &|b| b[e..e + 8].copy_from_slice(&t.n_input.to_le_bytes()));
        }
    }
    let occupied: Vec<usize> = (0..slots).filter(|&s| t.counts[s] > 0).collect();
    if occupied.len() >= 2 {
        let (a, b2) = (ids_at + 8 * occupied[0] * t.shape.capacity, ids_at + 8 * occupied[1] * t.shape.capacity);
        edit("duplicate retained id".into(), &|b| {
            let src: [u8; 8] = b[a..a + 8].try_into().unwrap();
            b[b2..b2 + 8].copy_from_slice(&src);
        });
    }
    out
}

fn criterion_format_fidelity() -> Outcome {
    // UVGT round trips
    let mut tensors = vec![fixture_tensor(1), fixture_tensor(2)];
    let set = vmf_fixture(3);
    for s in Strategy::ALL {
        let grid =
            GridConfig::new(48, 64, 3).with_channels(vec![Channel::Position, Channel::Opacity, Channel::Appearance]);
        let uv = map_set(&set, &MappingConfig::new(s)).unwrap();
        tensors.push(pack(&set, &discretize(&uv, &grid), &grid, s).unwrap());
    }
    tensors.push(
        pack(
            &GaussianSet::empty(3),
            &UvAssignment { row: vec![], col: vec![] },
            &GridConfig::new(3, 5, 2),
            Strategy::HistogramEq,
        )
        .unwrap(),
    );
    for (i, t) in tensors.iter().enumerate() {
        let bytes = encode_tensor(t);
        let back = decode_tensor(&bytes).map_err(|e| format!("tensor {i}: {e}"))?;
        check(&back == t && encode_tensor(&back) == bytes, || format!("tensor {i} round trip"))?;
    }

    // PLY round trips
    let mut wide = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(0xC7);
    for i in 0..50u64 {
        let mut g = Gaussian::neutral([rng.random(), rng.random(), -0.0], rng.random(), 48, i);
        g.appearance =
            (0..48).map(|j| if j == 5 { f32::MIN_POSITIVE / 3.0 } else { rng.random_range(-3.0..3.0) }).collect();
        g.rotation = [rng.random(), -0.0, rng.random(), 1e-30];
        wide.push(g);
    }
    let sets = [
        single_vertex_set(),
        generate(&SynthSpec::new(SynthKind::UniformSphere, 1000, 42)).unwrap(),
        GaussianSet::new(wide, 48).unwrap().with_origin_policy(OriginPolicy::RawOrigin),
        GaussianSet::empty(0),
    ];
    for (i, s) in sets.iter().enumerate() {
        let bytes = encode_ply(s);
        let (back, _) = parse_ply(&bytes).map_err(|e| format!("ply {i}: {e}"))?;
        let bit_equal = back.len() == s.len()
            && back.appearance_width() == s.appearance_width()
            && back.origin_policy == s.origin_policy
            && back.iter().zip(s.iter()).all(|(a, b)| {
                let bits = |g: &Gaussian| -> Vec<u32> {
                    g.position
                        .iter()
                        .chain(&g.scale)
                        .chain(&g.rotation)
                        .chain([&g.opacity])
                        .chain(&g.appearance)
                        .map(|x| x.to_bits())
                        .collect()
                };
                bits(a) == bits(b) && a.source_index == b.source_index
            });
        check(bit_equal, || format!("ply {i} round trip is not bit-exact"))?;
    }

    // golden bytes
    let golden_uvgt = std::fs::read(golden_dir().join("fixture_2x2.uvgt")).map_err(|e| e.to_string())?;
    check(encode_tensor(&fixture_tensor(1)) == golden_uvgt, || "fixture_2x2.uvgt differs from writer output".into())?;
    let golden_ply = std::fs::read(golden_dir().join("single_vertex.ply")).map_err(|e| e.to_string())?;
    check(encode_ply(&single_vertex_set()) == golden_ply, || "single_vertex.ply differs from writer output".into())?;

    // validator rejects mutated golden files
    let t = decode_tensor(&golden_uvgt).map_err(|e| e.to_string())?;
    let muts = mutations(&golden_uvgt, &t);
    check(muts.len() >= 50, || format!("only {} mutations generated", muts.len()))?;
    for (name, bytes) in &muts {
        match decode_tensor(bytes) {
            Err(FormatError::Io(e)) => return Err(format!("mutation '{name}' gave i/o error {e}")),
            Err(_) => {}
            Ok(_) => return Err(format!("mutation '{name}' was accepted")),
        }
    }
    Ok(format!(
        "{} UVGT and {} PLY round trips bit-exact; goldens match; {} mutations rejected",
        tensors.len(),
        sets.len(),
        muts.len()
    ))
}

#[test]
fn acceptance() {
    type Criterion = (&'static str, fn() -> Outcome, Duration);
    let criteria: [Criterion; 7] = [
        ("1 formula conformance", criterion_formula_conformance, Duration::from_secs(10)),
        ("2 marginal uniformity", criterion_marginal_uniformity, Duration::from_secs(30)),
        ("3 utilization ordering", criterion_utilization_ordering, Duration::from_secs(120)),
        ("4 K-sweep shape", criterion_k_sweep, Duration::from_secs(180)),
        ("5 invariance suite", criterion_invariance, Duration::MAX),
        ("6 complexity", criterion_complexity, Duration::MAX),
        ("7 format fidelity", criterion_format_fidelity, Duration::MAX),
    ];
    let mut failed = Vec::new();
    for (name, run, budget) in criteria {
        let start = Instant::now();
        let result = run().and_then(|detail| within_budget(start.elapsed(), budget).map(|_| detail));
        let elapsed = start.elapsed();
        match result {
            Ok(detail) => println!("[PASS] {name} ({elapsed:.2?}): {detail}"),
            Err(why) => {
                println!("[FAIL] {name} ({elapsed:.2?}): {why}");
                failed.push(name);
            }
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
