//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::collections::BTreeMap;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use rand::Rng;

use armtest::analysis::{
    cliffs_delta, cosine_distance, permutation_exact, permutation_monte_carlo, severity_distance, sparseness,
    GroupSummary, Metric, StatsReport,
};
use armtest::geometry::{obb_iou, ObbPose};
use armtest::perception::{eval_offline, generate_dataset, Annotation, Detection, SyntheticPerception, SyntheticPerceptionParams};
use armtest::repair::{assemble, reexecute, refit, replay, ReplayConfig};
use armtest::rng::rng_from_seed;
use armtest::search::{run_search, Archive, SearchConfig, SearchSetup, Strategy};
use armtest::simulator::{
    classify, mutual_clearance_violations, BoxEvents, FailureMode, FailureSet, Outcome, Placement, RequirementThresholds,
};
use armtest::{Config, Profile};

// Tolerances.
const MIN_FAILURE_RATIO: f64 = 1.25;
const MAX_P_VALUE: f64 = 0.05;
const MAX_RUNTIME_S: f64 = 300.0;
const MIN_DIVERSITY_DELTA: f64 = 0.474;
const MIN_SOFT_REPAIR_RATE: f64 = 0.95;
// Finger penetration that no plausible prediction error of the repaired
// detector can undo.
const GEOMETRIC_MARGIN_M: f64 = 0.005;
const NULL_ARCHIVE_SIZE: usize = 500;
const MAP_RANGE: (f64, f64) = (0.95, 0.99);
const IOU_PAIRS: usize = 10_000;
const MAX_IOU_ERROR: f64 = 3e-3;
const MAX_SPARSENESS_N: usize = 200;
const MAX_PERM_P_ERROR: f64 = 0.02;

struct Verdict {
    pass: bool,
    detail: String,
}

type Check<'a> = (&'static str, Box<dyn Fn() -> Verdict + 'a>);

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

fn search_groups(config: &Config) -> (Vec<Archive>, Vec<Archive>, f64) {
    let setup = SearchSetup {
        ranges: &config.ranges,
        workspace: &config.workspace,
        thresholds: &config.thresholds,
    };
    let t0 = Instant::now();
    let mut out = Vec::new();
    for strategy in [Strategy::Ga, Strategy::Rs] {
        let search = SearchConfig {
            strategy,
            ..config.search.clone()
        };
        let runs: Vec<Archive> = (0..5)
            .map(|run| {
                run_search(&search, setup, &mut SyntheticPerception::new(config.perception.clone()), run)
                    .expect("search run")
            })
            .collect();
        out.push(runs);
    }
    let rs = out.pop().unwrap();
    let ga = out.pop().unwrap();
    (ga, rs, t0.elapsed().as_secs_f64())
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn effectiveness(config: &Config, ga: &[Archive], rs: &[Archive], secs: f64) -> Verdict {
    let g = GroupSummary::build("ga", ga, &config.ranges, config.search.scaling);
    let r = GroupSummary::build("rs", rs, &config.ranges, config.search.scaling);
    let (fg, fr) = (g.metric(Metric::Failures), r.metric(Metric::Failures));
    let report = StatsReport::build(vec![g, r], 10_000, 0).expect("stats");
    let p = report
        .comparisons
        .iter()
        .find(|c| c.metric == Metric::Failures)
        .unwrap()
        .result
        .p_value;
    let ratio = mean(&fg) / mean(&fr);
    verdict(
        ratio >= MIN_FAILURE_RATIO && p < MAX_P_VALUE && secs < MAX_RUNTIME_S,
        format!(
            "GA failures {fg:?} mean {:.1}, RS {fr:?} mean {:.1}; ratio {ratio:.3} (need >= {MIN_FAILURE_RATIO}), p = {p:.4} (need < {MAX_P_VALUE}); {secs:.1} s",
            mean(&fg),
            mean(&fr)
        ),
    )
}

fn diversity(config: &Config, ga: &[Archive], rs: &[Archive]) -> Verdict {
    let g = GroupSummary::build("ga", ga, &config.ranges, config.search.scaling);
    let r = GroupSummary::build("rs", rs, &config.ranges, config.search.scaling);
    let (sg, sr) = (g.metric(Metric::SAvf), r.metric(Metric::SAvf));
    let (vg, vr) = (g.metric(Metric::SAvs), r.metric(Metric::SAvs));
    let (delta, _) = cliffs_delta(&sg, &sr).unwrap();
    let (delta_s, _) = cliffs_delta(&vg, &vr).unwrap();
    let p = permutation_exact(&sg, &sr).unwrap();
    verdict(
        mean(&sg) > mean(&sr) && delta >= MIN_DIVERSITY_DELTA,
        format!(
            "S_avf GA {:.4} vs RS {:.4}, delta {delta:+.2} (need >= {MIN_DIVERSITY_DELTA}), p = {p:.3}; S_avs GA {:.3} vs RS {:.3}, delta {delta_s:+.2} (not gated)",
            mean(&sg),
            mean(&sr),
            mean(&vg),
            mean(&vr)
        ),
    )
}

fn validation_scenes(config: &Config) -> Vec<armtest::perception::DatasetSample> {
    let rc = &config.repair;
    generate_dataset(&config.dataset_ranges, &config.workspace, rc.validation_scenes * 5, rc.dataset_seed)
        .expect("dataset")
        .validation()
        .cloned()
        .collect()
}

fn repair_efficacy(config: &Config, ga: &[Archive], rs: &[Archive]) -> Verdict {
    // Soft failures of the default profile.
    let all: Vec<Archive> = ga.iter().chain(rs).cloned().collect();
    let archive = Archive::merge(&all);
    let dataset = assemble(&archive, &config.workspace, validation_scenes(config)).expect("assemble");
    let m_f = refit(&config.perception, &dataset, config.repair.learning_rate).expect("refit").params;
    let report = replay(archive.failed(), &m_f, &config.workspace, &config.thresholds, &ReplayConfig::default())
        .expect("replay");
    let soft_rate = report.soft.repaired as f64 / report.soft.replayed as f64;

    // Purely geometric hard failures of the parallel gripper: found under a
    // noise-free detector with the arm never getting stuck, then replayed
    // with the model repaired on that profile's own failures.
    let uc2 = Config::for_profile(Profile::Uc2Parallel);
    let (uc2_ga, uc2_rs, _) = search_groups(&uc2);
    let uc2_all: Vec<Archive> = uc2_ga.into_iter().chain(uc2_rs).collect();
    let uc2_archive = Archive::merge(&uc2_all);
    let uc2_ds = assemble(&uc2_archive, &uc2.workspace, validation_scenes(&uc2)).expect("assemble");
    let uc2_m_f = refit(&uc2.perception, &uc2_ds, uc2.repair.learning_rate).expect("refit").params;
    let mut ws = uc2.workspace.clone();
    if let Some(z) = ws.singularity.as_mut() {
        z.p_stuck = 0.0;
    }
    let setup = SearchSetup {
        ranges: &uc2.ranges,
        workspace: &ws,
        thresholds: &uc2.thresholds,
    };
    let mut geometric = Vec::new();
    let mut grazing = Vec::new();
    for strategy in [Strategy::Ga, Strategy::Rs] {
        let search = SearchConfig {
            strategy,
            ..uc2.search.clone()
        };
        for run in 0..5 {
            let a = run_search(&search, setup, &mut SyntheticPerception::new(SyntheticPerceptionParams::perfect()), run)
                .expect("search");
            for r in a.records {
                let boxes = &r.episode.scene.boxes;
                if !mutual_clearance_violations(boxes, &ws.gripper, GEOMETRIC_MARGIN_M).is_empty() {
                    geometric.push(r);
                } else if !mutual_clearance_violations(boxes, &ws.gripper, 0.0).is_empty() {
                    grazing.push(r);
                }
            }
        }
    }
    let geo_report = replay(&geometric, &uc2_m_f, &ws, &uc2.thresholds, &ReplayConfig::default()).expect("replay");
    let geo_all_failed = geometric.iter().all(|r| r.outcome() == Outcome::Fail);
    let graze_report = replay(&grazing, &uc2_m_f, &ws, &uc2.thresholds, &ReplayConfig::default()).expect("replay");
    verdict(
        soft_rate >= MIN_SOFT_REPAIR_RATE
            && !geometric.is_empty()
            && geo_all_failed
            && geo_report.n_non_repaired == geometric.len(),
        format!(
            "uc1-suction soft failures repaired {}/{} = {:.1}% (need >= {:.0}%); uc2-parallel geometric hard failures in S_NR {}/{} (grazing contacts under {} mm, not gated: {}/{})",
            report.soft.repaired,
            report.soft.replayed,
            100.0 * soft_rate,
            100.0 * MIN_SOFT_REPAIR_RATE,
            geo_report.n_non_repaired,
            geometric.len(),
            GEOMETRIC_MARGIN_M * 1000.0,
            graze_report.n_non_repaired,
            grazing.len()
        ),
    )
}

fn null_repair(config: &Config) -> Verdict {
    let setup = SearchSetup {
        ranges: &config.ranges,
        workspace: &config.workspace,
        thresholds: &config.thresholds,
    };
    let search = SearchConfig {
        eval_budget: NULL_ARCHIVE_SIZE,
        ..config.search.clone()
    };
    let archive = run_search(&search, setup, &mut SyntheticPerception::new(config.perception.clone()), 0).expect("search");
    let mut outcome_mismatches = 0;
    let mut episode_mismatches = 0;
    for r in &archive.records {
        let e = reexecute(r, &config.perception, &config.workspace, &config.thresholds, r.seed()).expect("decode");
        outcome_mismatches += (e.outcome != r.outcome() || e.failure_modes != *r.failure_modes()) as usize;
        episode_mismatches += (e != r.episode) as usize;
    }
    verdict(
        archive.len() == NULL_ARCHIVE_SIZE && outcome_mismatches == 0,
        format!(
            "{} records replayed with M_f = M_o: {outcome_mismatches} outcome mismatches, {episode_mismatches} episode mismatches",
            archive.len()
        ),
    )
}

fn offline_calibration(config: &Config) -> Verdict {
    let val = validation_scenes(config);
    let gts: Vec<Vec<Annotation>> = val.iter().map(|s| s.annotations.clone()).collect();
    let map = |m: &SyntheticPerceptionParams| {
        let preds: Vec<Vec<Detection>> = val.iter().map(|s| m.predict(&s.scene, s.seed)).collect();
        eval_offline(&preds, &gts).map_50_95
    };
    let (m_o, perfect) = (map(&config.perception), map(&SyntheticPerceptionParams::perfect()));
    verdict(
        val.len() == 240 && (MAP_RANGE.0..=MAP_RANGE.1).contains(&m_o) && perfect == 1.0,
        format!(
            "{} validation scenes: M_o mAP@[.50:.95] {m_o:.4} (need in [{}, {}]), perfect {perfect}",
            val.len(),
            MAP_RANGE.0,
            MAP_RANGE.1
        ),
    )
}

// Rectangle corners computed from scratch.
fn corners(b: &ObbPose) -> [[f64; 2]; 4] {
    let (s, c) = b.rot_deg.to_radians().sin_cos();
    let (hw, hh) = (b.width / 2.0, b.height / 2.0);
    [(-hw, -hh), (hw, -hh), (hw, hh), (-hw, hh)].map(|(x, y)| [b.cx + c * x - s * y, b.cy + s * x + c * y])
}

/// Horizontal extent of a convex polygon at height `y`.
fn span_at(poly: &[[f64; 2]; 4], y: f64) -> Option<(f64, f64)> {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..4 {
        let (p, q) = (poly[i], poly[(i + 1) % 4]);
        if (p[1] - y) * (q[1] - y) <= 0.0 && p[1] != q[1] {
            let x = p[0] + (y - p[1]) * (q[0] - p[0]) / (q[1] - p[1]);
            lo = lo.min(x);
            hi = hi.max(x);
        }
    }
    (lo <= hi).then_some((lo, hi))
}

/// IoU by jittered-scanline Monte-Carlo rasterization of the overlap.
fn iou_oracle(a: &ObbPose, b: &ObbPose, lines: usize, rng: &mut impl Rng) -> f64 {
    let (pa, pb) = (corners(a), corners(b));
    let ys = |p: &[[f64; 2]; 4]| {
        p.iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), q| (l.min(q[1]), h.max(q[1])))
    };
    let ((la, ha), (lb, hb)) = (ys(&pa), ys(&pb));
    let (y0, y1) = (la.max(lb), ha.min(hb));
    let mut inter = 0.0;
    if y1 > y0 {
        let dy = (y1 - y0) / lines as f64;
        for k in 0..lines {
            let y = y0 + (k as f64 + rng.random::<f64>()) * dy;
            if let (Some((xa0, xa1)), Some((xb0, xb1))) = (span_at(&pa, y), span_at(&pb, y)) {
                inter += (xa1.min(xb1) - xa0.max(xb0)).max(0.0) * dy;
            }
        }
    }
    inter / (a.width * a.height + b.width * b.height - inter)
}

fn oracle_iou() -> Verdict {
    let mut rng = rng_from_seed(61);
    let mut worst: f64 = 0.0;
    let mut overlapping = 0;
    for i in 0..IOU_PAIRS {
        let a = ObbPose::new(
            rng.random_range(0.0..1.0),
            rng.random_range(0.0..1.0),
            rng.random_range(-180.0..180.0),
            rng.random_range(0.05..1.0),
            rng.random_range(0.05..1.0),
        );
        let b = match i % 10 {
            0 => a,
            1 => ObbPose { rot_deg: a.rot_deg + 90.0, ..a },
            _ => ObbPose::new(
                a.cx + rng.random_range(-0.6..0.6),
                a.cy + rng.random_range(-0.6..0.6),
                rng.random_range(-180.0..180.0),
                rng.random_range(0.05..1.0),
                rng.random_range(0.05..1.0),
            ),
        };
        let got = obb_iou(&a, &b);
        overlapping += (got > 0.0) as usize;
        worst = worst.max((got - iou_oracle(&a, &b, 2000, &mut rng)).abs());
    }
    verdict(
        worst <= MAX_IOU_ERROR,
        format!("{IOU_PAIRS} pairs ({overlapping} overlapping): max |IoU - oracle| {worst:.2e} (need <= {MAX_IOU_ERROR:.0e})"),
    )
}

fn oracle_sparseness() -> Verdict {
    let mut rng = rng_from_seed(62);
    let mut mismatches = 0;
    let mut cases = 0;
    for n in [1, 2, 3, 10, 57, MAX_SPARSENESS_N] {
        let vecs: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..10).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let sets: Vec<FailureSet> = (0..n)
            .map(|_| {
                [FailureMode::FM1, FailureMode::FM2, FailureMode::FM3, FailureMode::FM4, FailureMode::FM5]
                    .into_iter()
                    .filter(|_| rng.random_bool(0.4))
                    .collect()
            })
            .collect();
        let cos = |a: &Vec<f64>, b: &Vec<f64>| cosine_distance(a, b).unwrap();
        let jaccard = |a: &FailureSet, b: &FailureSet| {
            let inter = a.iter().filter(|m| b.contains(m)).count();
            let union = a.len() + b.len() - inter;
            if union == 0 {
                0.0
            } else {
                (union - inter) as f64 / union as f64
            }
        };
        for (got, want) in [
            (sparseness(&vecs, cos), brute_sparseness(&vecs, cos)),
            (sparseness(&sets, severity_distance), brute_sparseness(&sets, jaccard)),
        ] {
            cases += 1;
            mismatches += (got != want) as usize;
        }
    }
    verdict(
        mismatches == 0,
        format!("{cases} cases up to N = {MAX_SPARSENESS_N}: {mismatches} differ from the double loop"),
    )
}

fn brute_sparseness<T>(items: &[T], d: impl Fn(&T, &T) -> f64) -> f64 {
    if items.is_empty() {
        return 0.0;
    }
    let mut total = 0.0;
    for i in 0..items.len() {
        let mut best = 0.0;
        for j in 0..items.len() {
            if i != j {
                let v = d(&items[i], &items[j]);
                if v > best {
                    best = v;
                }
            }
        }
        total += best;
    }
    total / items.len() as f64
}

/// Exact two-sided p-value by enumerating subsets as bit masks.
fn brute_permutation(a: &[f64], b: &[f64]) -> f64 {
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let n = pooled.len();
    let observed = (mean(a) - mean(b)).abs();
    let (mut hits, mut total) = (0u32, 0u32);
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as usize != a.len() {
            continue;
        }
        let (mut x, mut y) = (Vec::new(), Vec::new());
        for (i, v) in pooled.iter().enumerate() {
            if mask >> i & 1 == 1 {
                x.push(*v)
            } else {
                y.push(*v)
            }
        }
        total += 1;
        hits += ((mean(&x) - mean(&y)).abs() >= observed - 1e-9) as u32;
    }
    hits as f64 / total as f64
}

fn oracle_permutation() -> Verdict {
    let mut rng = rng_from_seed(63);
    let (mut worst_mc, mut worst_exact): (f64, f64) = (0.0, 0.0);
    for case in 0..120 {
        let (na, nb) = (rng.random_range(1..=6), rng.random_range(1..=6));
        let shift = rng.random_range(0.0..2.0);
        // Some samples are integer-valued to exercise ties.
        let draw = |rng: &mut armtest::rng::SimRng, s: f64| {
            if case % 3 == 0 {
                rng.random_range(0..4) as f64 + s.round()
            } else {
                rng.random_range(0.0..3.0) + s
            }
        };
        let a: Vec<f64> = (0..na).map(|_| draw(&mut rng, shift)).collect();
        let b: Vec<f64> = (0..nb).map(|_| draw(&mut rng, 0.0)).collect();
        let oracle = brute_permutation(&a, &b);
        worst_exact = worst_exact.max((permutation_exact(&a, &b).unwrap() - oracle).abs());
        worst_mc = worst_mc.max((permutation_monte_carlo(&a, &b, 20_000, case).unwrap() - oracle).abs());
    }
    verdict(
        worst_mc <= MAX_PERM_P_ERROR && worst_exact < 1e-12,
        format!(
            "120 cases n <= 6+6: max |p_mc - p_exact| {worst_mc:.4} (need <= {MAX_PERM_P_ERROR}), enumeration matches brute force within {worst_exact:.1e}"
        ),
    )
}

fn oracle_cliffs() -> Verdict {
    let mut rng = rng_from_seed(64);
    let mut mismatches = 0;
    for _ in 0..300 {
        let a: Vec<f64> = (0..rng.random_range(1..30)).map(|_| rng.random_range(0..8) as f64).collect();
        let b: Vec<f64> = (0..rng.random_range(1..30)).map(|_| rng.random_range(0..8) as f64).collect();
        let (mut gt, mut lt) = (0i64, 0i64);
        for x in &a {
            for y in &b {
                if x > y {
                    gt += 1;
                } else if x < y {
                    lt += 1;
                }
            }
        }
        let want = (gt - lt) as f64 / (a.len() * b.len()) as f64;
        mismatches += (cliffs_delta(&a, &b).unwrap().0 != want) as usize;
    }
    verdict(mismatches == 0, format!("300 random samples with ties: {mismatches} differ from all-pairs count"))
}

fn thresholds_sweep() -> Verdict {
    let ws = Profile::Uc1Suction.workspace();
    let (w, _) = ws.box_dims;
    let mut failures = Vec::new();
    for th in [
        RequirementThresholds::default(),
        RequirementThresholds {
            place_rot_tol_deg: 7.5,
            place_pos_tol_frac: 0.3,
            near_fail_rot_deg: 2.0,
            near_fail_center_m: 0.004,
        },
    ] {
        let good = || {
            let mut b = BoxEvents::new(0, ObbPose::new(0.7, 0.4, 0.0, 0.17, 0.14));
            b.detected = true;
            b.grasped = true;
            b.placement = Some(Placement {
                offset: [0.0, 0.0],
                rotation_deg: 0.0,
                shake_deg: 0.0,
                transport_deg: 0.0,
            });
            b
        };
        type Setter = fn(&mut BoxEvents, f64);
        let cases: [(&str, f64, Setter, FailureMode, Outcome); 4] = [
            (
                "placement rotation",
                th.place_rot_tol_deg,
                |b, v| b.placement.as_mut().unwrap().rotation_deg = -v,
                FailureMode::FM4,
                Outcome::Fail,
            ),
            (
                "placement offset",
                th.place_pos_tol_frac * w,
                |b, v| b.placement.as_mut().unwrap().offset[0] = v,
                FailureMode::FM3,
                Outcome::Fail,
            ),
            ("center error", th.near_fail_center_m, |b, v| b.max_center_dev = v, FailureMode::FM1, Outcome::NearFail),
            ("rotation error", th.near_fail_rot_deg, |b, v| b.max_rot_dev = v, FailureMode::FM2, Outcome::NearFail),
        ];
        for (name, bound, set, mode, flipped) in cases {
            for (value, expect) in [(bound * 0.999, false), (bound, false), (bound.next_up(), true), (bound * 1.001, true)] {
                let mut b = good();
                set(&mut b, value);
                let (outcome, _, modes) = classify(&[b], false, &ws, &th);
                let flagged = modes.contains(&mode);
                let want_outcome = if expect { flipped } else { Outcome::Pass };
                if flagged != expect || outcome != want_outcome {
                    failures.push(format!("{name} at {value}: {outcome:?} {modes:?}"));
                }
            }
        }
    }
    verdict(
        failures.is_empty(),
        if failures.is_empty() {
            "4 boundaries x 2 threshold sets: labels flip just above each bound, never at it".into()
        } else {
            failures.join("; ")
        },
    )
}

fn files_under(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(dir).unwrap().display().to_string(), std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

fn cli(dir: &Path, args: &[&str]) -> (i32, Vec<u8>) {
    let out = Command::new(env!("CARGO_BIN_EXE_armtest"))
        .args(args)
        .current_dir(dir)
        .env("SOURCE_DATE_EPOCH", "0")
        .output()
        .expect("spawn cli");
    (out.status.code().unwrap_or(-1), out.stdout)
}

fn pipeline(dir: &Path) -> Vec<(i32, Vec<u8>)> {
    let runs = |s: &str| (0..2).map(|i| format!("search/{s}-run{i}.jsonl")).collect::<Vec<_>>().join(",");
    let (ga, rs) = (runs("ga"), runs("rs"));
    let (ga_group, rs_group) = (format!("ga={ga}"), format!("rs={rs}"));
    let mut repair = vec!["repair", "--model", "search/model-operating.json", "--out", "repair"];
    let ga_paths: Vec<String> = ga.split(',').map(str::to_owned).collect();
    for p in &ga_paths {
        repair.push("--archive");
        repair.push(p);
    }
    vec![
        cli(dir, &["dataset", "--count", "40", "--out", "dataset"]),
        cli(dir, &["search", "--strategy", "ga", "--runs", "2", "--seed", "5", "--out", "search"]),
        cli(dir, &["search", "--strategy", "rs", "--runs", "2", "--seed", "5", "--out", "search"]),
        cli(dir, &["stats", "--group", &ga_group, "--group", &rs_group, "--out", "stats"]),
        cli(dir, &repair),
        cli(dir, &["replay", "--archive", "search/ga-run0.jsonl", "--id", "ga-r0-0100"]),
        cli(dir, &["--profile", "uc2-parallel", "search", "--strategy", "ga", "--runs", "1", "--out", "uc2"]),
    ]
}

fn determinism() -> Verdict {
    let (d1, d2) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let (o1, o2) = (pipeline(d1.path()), pipeline(d2.path()));
    let codes: Vec<i32> = o1.iter().map(|o| o.0).collect();
    let (f1, f2) = (files_under(d1.path()), files_under(d2.path()));
    let differing: Vec<&String> = f1.keys().filter(|k| f1.get(*k) != f2.get(*k)).collect();
    verdict(
        codes.iter().all(|&c| c == 0) && o1 == o2 && f1.len() == f2.len() && differing.is_empty(),
        format!(
            "7 invocations twice (exit codes {codes:?}): {} files, {} differ, stdout identical: {}",
            f1.len(),
            differing.len(),
            o1 == o2
        ),
    )
}

fn main() {
    let config = Config::for_profile(Profile::Uc1Suction);
    let (ga, rs, secs) = search_groups(&config);
    let checks: Vec<Check<'_>> = vec![
        ("1 GA vs RS effectiveness", Box::new(|| effectiveness(&config, &ga, &rs, secs))),
        ("2 failure diversity", Box::new(|| diversity(&config, &ga, &rs))),
        ("3 repair efficacy", Box::new(|| repair_efficacy(&config, &ga, &rs))),
        ("4 null-repair identity", Box::new(|| null_repair(&config))),
        ("5 offline eval calibration", Box::new(|| offline_calibration(&config))),
        ("6a IoU vs rasterization oracle", Box::new(oracle_iou)),
        ("6b sparseness vs double loop", Box::new(oracle_sparseness)),
        ("6c permutation MC vs exact", Box::new(oracle_permutation)),
        ("6d Cliff's delta vs all pairs", Box::new(oracle_cliffs)),
        ("7 classification thresholds", Box::new(thresholds_sweep)),
        ("8 CLI determinism", Box::new(determinism)),
    ];
    let mut failed = 0;
    for (name, check) in checks {
        let v = check();
        failed += !v.pass as usize;
        println!("{} {name}: {}", if v.pass { "PASS" } else { "FAIL" }, v.detail);
    }
    println!("acceptance: {} failed", failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
