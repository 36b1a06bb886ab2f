//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails. All randomness is seeded.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use axum::http::{Method, StatusCode};
use common::{call, gen, state, Server};
use gkq::fuzzy::{set_complement, set_intersection, set_union, FuzzySet, PiecewiseLinearMF, TConorm, TNorm, Universe};
use gkq::gk::{
    default_calibration, generate_gk_rulebase, reference_profiles, Attribute, GKProfile, GkModel, QualityLevel,
};
use gkq::inference::{aggregate, defuzzify, implicate, Defuzzifier, Implication, InferenceConfig};
use gkq::report::EvaluationReport;
use gkq::ruledsl::{format_rulebase, parse_rulebase, parse_rulebase_bytes};
use gkq::store::replay;
use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};

const SEED: u64 = 0x6b_6565_7065_72;

const TIME_LIMIT: Duration = Duration::from_secs(1);
const REFERENCE_BAND: f64 = 15.0;
const CENTROID_SETS: usize = 100;
const ORACLE_POINTS: usize = 1_000_000;
const CENTROID_REL_TOL: f64 = 1e-6;
const ALGEBRA_PAIRS: usize = 1000;
const ALGEBRA_GRID: usize = 1001;
const ASSOC_TOL: f64 = 1e-12;
const SYMMETRY_TOL: f64 = 1e-9;
const MIRROR_PROFILES: usize = 200;
const MIRROR_TOL: f64 = 0.1;
const MONO_PROFILES: usize = 200;
const MONO_STEPS: usize = 11;
const MONO_TOL: f64 = 0.5;
const DSL_RANDOM_BASES: usize = 1000;
const FUZZ_INPUTS: usize = 10_000;
const GRID_PROFILES: usize = 200;
const GRID_TOL: f64 = 0.05;
const SERVICE_PROFILES: usize = 100;

struct Outcome {
    ok: bool,
    detail: String,
}

fn outcome(ok: bool, detail: impl Into<String>) -> Outcome {
    Outcome { ok, detail: detail.into() }
}

fn random_profile(rng: &mut StdRng) -> GKProfile {
    let mut p = GKProfile::from_numbers([0.0; 7], 0.0);
    for attr in Attribute::ALL {
        let (lo, hi) = attr.range();
        let x = rng.gen_range(lo..=hi);
        *p.get_mut(attr) = if rng.gen_bool(0.3) { x.round() } else { x }.into();
    }
    p
}

fn rule_counts() -> Outcome {
    let start = Instant::now();
    let rb = generate_gk_rulebase(&default_calibration());
    let counts: Vec<usize> = QualityLevel::ALL
        .into_iter()
        .rev()
        .map(|l| rb.rules().iter().filter(|r| r.consequent().1 == l.label()).count())
        .collect();
    let elapsed = start.elapsed();
    let ok = counts == [1, 8, 28, 56, 70, 56, 28, 8, 1] && rb.rules().len() == 256 && elapsed < TIME_LIMIT;
    outcome(ok, format!("counts {counts:?}, total {}, {elapsed:?}", rb.rules().len()))
}

fn reference_ordering() -> Outcome {
    let start = Instant::now();
    let model = GkModel::default();
    let scored: Vec<(&str, f64, f64)> = reference_profiles()
        .iter()
        .map(|(id, p, reference)| (*id, model.score(p).unwrap().score, *reference))
        .collect();
    let elapsed = start.elapsed();
    let ordered = scored[2].1 > scored[1].1 && scored[1].1 > scored[0].1;
    let banded = scored.iter().all(|(_, s, reference)| (s - reference).abs() <= REFERENCE_BAND);
    let detail = scored.iter().map(|(id, s, reference)| format!("{id} {s:.2} (ref {reference})")).collect::<Vec<_>>();
    outcome(ordered && banded && elapsed < TIME_LIMIT, format!("{}, {elapsed:?}", detail.join(", ")))
}

/// Centroid by midpoint Riemann sum, interpolating the set's grid samples directly.
fn riemann_centroid(set: &FuzzySet) -> Option<f64> {
    let u = set.universe();
    let samples = set.samples();
    let cell = (u.hi() - u.lo()) / (samples.len() - 1) as f64;
    let h = (u.hi() - u.lo()) / ORACLE_POINTS as f64;
    let (mut area, mut moment) = (0.0, 0.0);
    for i in 0..ORACLE_POINTS {
        let x = u.lo() + (i as f64 + 0.5) * h;
        let t = (x - u.lo()) / cell;
        let k = (t.floor() as usize).min(samples.len() - 2);
        let f = t - k as f64;
        let mu = samples[k] * (1.0 - f) + samples[k + 1] * f;
        area += mu;
        moment += mu * x;
    }
    (area > 0.0).then(|| moment / area)
}

fn centroid_oracle(rng: &mut StdRng) -> Outcome {
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    let mut attempts = 0;
    while checked < CENTROID_SETS && attempts < 10 * CENTROID_SETS {
        attempts += 1;
        let var = gen::variable(rng, "y".into(), 1001);
        let implication = *[Implication::Clip, Implication::Scale].choose(rng).unwrap();
        let outputs: Vec<FuzzySet> =
            var.terms().iter().map(|t| implicate(t, rng.gen_range(0.05..=1.0), implication)).collect();
        let agg = aggregate(&outputs).unwrap();
        let Some(oracle) = riemann_centroid(&agg) else { continue };
        let engine = defuzzify(&agg, Defuzzifier::Centroid);
        let scale = oracle.abs().max(var.universe().hi() - var.universe().lo());
        worst = worst.max((engine.value - oracle).abs() / scale);
        checked += 1;
    }

    let u = Universe::new(0.0, 100.0).unwrap();
    let tri = |c: f64| FuzzySet::new("t", u, PiecewiseLinearMF::triangle(c - 12.5, c, c + 12.5).unwrap()).unwrap();
    let agg = aggregate(&[implicate(&tri(25.0), 1.0, Implication::Scale), implicate(&tri(75.0), 0.5, Implication::Scale)])
        .unwrap();
    let oracle = riemann_centroid(&agg).unwrap();
    let engine = defuzzify(&agg, Defuzzifier::Centroid).value;
    let asym = (engine - oracle).abs() / oracle;
    worst = worst.max(asym);

    outcome(
        checked == CENTROID_SETS && worst < CENTROID_REL_TOL,
        format!("{checked} sets + asymmetric example ({engine:.6} vs {oracle:.6}), max rel err {worst:.2e}"),
    )
}

fn random_set(rng: &mut StdRng, u: Universe) -> FuzzySet {
    let set = if rng.gen_bool(0.5) {
        let degrees = (0..u.grid_points()).map(|_| rng.gen_range(0.0..=1.0)).collect();
        FuzzySet::from_grid("g", u, degrees).unwrap()
    } else {
        let mut xs: Vec<f64> = Vec::new();
        while xs.len() < 2 {
            xs = (0..rng.gen_range(2..8)).map(|_| rng.gen_range(u.lo()..=u.hi())).collect();
            xs.sort_by(f64::total_cmp);
            xs.dedup();
        }
        let pts = xs.into_iter().map(|x| (x, rng.gen_range(0.0..=1.0))).collect();
        FuzzySet::new("p", u, PiecewiseLinearMF::new(pts).unwrap()).unwrap()
    };
    if rng.gen_bool(0.25) {
        set_complement(&set)
    } else {
        set
    }
}

fn operator_algebra(rng: &mut StdRng) -> Outcome {
    let u = Universe::with_grid(0.0, 100.0, ALGEBRA_GRID).unwrap();
    let (mut demorgan, mut involution, mut worst_assoc) = (0, 0, 0.0f64);
    for _ in 0..ALGEBRA_PAIRS {
        let (a, b, c) = (random_set(rng, u), random_set(rng, u), random_set(rng, u));
        let (na, nb) = (set_complement(&a), set_complement(&b));
        let lhs = set_complement(&set_union(&a, &b, TConorm::Max).unwrap()).samples();
        let rhs = set_intersection(&na, &nb, TNorm::Min).unwrap().samples();
        let lhs2 = set_complement(&set_intersection(&a, &b, TNorm::Min).unwrap()).samples();
        let rhs2 = set_union(&na, &nb, TConorm::Max).unwrap().samples();
        if lhs != rhs || lhs2 != rhs2 {
            demorgan += 1;
        }
        let x = rng.gen_range(u.lo()..=u.hi());
        let back = set_complement(&na);
        if back.samples() != a.samples() || back.degree(x) != a.degree(x) {
            involution += 1;
        }
        for (l, r) in [
            (
                set_union(&set_union(&a, &b, TConorm::AlgebraicSum).unwrap(), &c, TConorm::AlgebraicSum),
                set_union(&a, &set_union(&b, &c, TConorm::AlgebraicSum).unwrap(), TConorm::AlgebraicSum),
            ),
            (
                set_intersection(&set_intersection(&a, &b, TNorm::Product).unwrap(), &c, TNorm::Product),
                set_intersection(&a, &set_intersection(&b, &c, TNorm::Product).unwrap(), TNorm::Product),
            ),
        ] {
            for (p, q) in l.unwrap().samples().into_iter().zip(r.unwrap().samples()) {
                worst_assoc = worst_assoc.max((p - q).abs());
            }
        }
    }
    outcome(
        demorgan == 0 && involution == 0 && worst_assoc <= ASSOC_TOL,
        format!(
            "{ALGEBRA_PAIRS} pairs on {ALGEBRA_GRID} points: De Morgan mismatches {demorgan}, \
             involution mismatches {involution}, max associativity error {worst_assoc:.1e}"
        ),
    )
}

fn symmetry(rng: &mut StdRng) -> Outcome {
    let model = GkModel::default();
    let cal = model.calibration().clone();
    let center = model.score(&GKProfile::from_numbers([5.0; 7], 180.0)).unwrap().score;
    let mut worst: f64 = 0.0;
    for _ in 0..MIRROR_PROFILES {
        let p = random_profile(rng);
        let total = model.score(&p).unwrap().score + model.score(&p.mirrored(&cal)).unwrap().score;
        worst = worst.max((total - 100.0).abs());
    }
    let center_err = (center - 50.0).abs();
    outcome(
        center_err <= SYMMETRY_TOL && worst <= MIRROR_TOL,
        format!("all-5s/180 = {center:.12}, max |s(p)+s(mirror p)-100| = {worst:.2e} over {MIRROR_PROFILES}"),
    )
}

fn monotonicity(rng: &mut StdRng) -> Outcome {
    let model = GkModel::default();
    let mut worst_drop: f64 = 0.0;
    let mut evaluations = 0;
    for _ in 0..MONO_PROFILES {
        let base = random_profile(rng);
        for attr in Attribute::ALL {
            let (lo, hi) = attr.range();
            let mut best_below = f64::NEG_INFINITY;
            for k in 0..MONO_STEPS {
                let x = lo + (hi - lo) * k as f64 / (MONO_STEPS - 1) as f64;
                let s = model.score(&base.clone().with(attr, x)).unwrap().score;
                evaluations += 1;
                worst_drop = worst_drop.max(best_below - s);
                best_below = best_below.max(s);
            }
        }
    }
    outcome(
        worst_drop <= MONO_TOL,
        format!("{evaluations} evaluations, largest drop over any increase {:.3e}", worst_drop.max(0.0)),
    )
}

fn dsl_roundtrip_and_fuzz(rng: &mut StdRng) -> Outcome {
    let gk = generate_gk_rulebase(&default_calibration());
    let gk_text = format_rulebase(&gk);
    let gk_ok = parse_rulebase(&gk_text).map(|rb| rb == gk).unwrap_or(false);

    let mut corpus = vec![gk_text.clone()];
    let mut roundtrip_failures = 0;
    for _ in 0..DSL_RANDOM_BASES {
        let rb = gen::rulebase(rng);
        let text = format_rulebase(&rb);
        match parse_rulebase(&text) {
            Ok(back) if back == rb && format_rulebase(&back) == text => {}
            _ => roundtrip_failures += 1,
        }
        if corpus.len() < 50 {
            corpus.push(text);
        }
    }

    let alphabet: &[u8] = b"input output rule config term range IF AND THEN is ( ) , : { } = # \" \\ \n 0 1 -2.5e3 x y";
    let mut panics = 0;
    let mut bad_results = 0;
    let prev_hook = std::panic::take_hook();
    std::panic::set_hook(Box::new(|_| {}));
    for i in 0..FUZZ_INPUTS {
        let bytes: Vec<u8> = match i % 3 {
            0 => (0..rng.gen_range(0..256)).map(|_| rng.gen()).collect(),
            1 => (0..rng.gen_range(0..256)).map(|_| *alphabet.choose(rng).unwrap()).collect(),
            _ => {
                let mut b = corpus.choose(rng).unwrap().as_bytes().to_vec();
                for _ in 0..rng.gen_range(1..6) {
                    if b.is_empty() {
                        break;
                    }
                    let at = rng.gen_range(0..b.len());
                    match rng.gen_range(0..4) {
                        0 => b[at] = rng.gen(),
                        1 => b.truncate(at),
                        2 => {
                            let end = (at + rng.gen_range(1..40)).min(b.len());
                            b.drain(at..end);
                        }
                        _ => b.insert(at, *alphabet.choose(rng).unwrap()),
                    }
                }
                b
            }
        };
        match catch_unwind(AssertUnwindSafe(|| parse_rulebase_bytes(&bytes))) {
            Err(_) => panics += 1,
            Ok(Err(e)) if e.diagnostics.is_empty() => bad_results += 1,
            Ok(_) => {}
        }
    }
    std::panic::set_hook(prev_hook);

    outcome(
        gk_ok && roundtrip_failures == 0 && panics == 0 && bad_results == 0,
        format!(
            "GK base {}, {DSL_RANDOM_BASES} random bases with {roundtrip_failures} failures, \
             {FUZZ_INPUTS} fuzz inputs with {panics} panics and {bad_results} empty errors",
            if gk_ok { "ok" } else { "FAILED" }
        ),
    )
}

fn grid_refinement(rng: &mut StdRng) -> Outcome {
    let coarse = GkModel::default();
    let cal = default_calibration()
        .with_inference(InferenceConfig { grid_points: 2001, ..*default_calibration().inference() })
        .unwrap();
    let fine = GkModel::new(cal);
    let mut profiles: Vec<GKProfile> = reference_profiles().into_iter().map(|(_, p, _)| p).collect();
    profiles.extend((0..GRID_PROFILES).map(|_| random_profile(rng)));
    let worst = profiles
        .iter()
        .map(|p| (coarse.score(p).unwrap().score - fine.score(p).unwrap().score).abs())
        .fold(0.0, f64::max);
    outcome(worst < GRID_TOL, format!("{} profiles, max |1001 - 2001| = {worst:.2e}", profiles.len()))
}

fn service_equivalence_and_replay(rng: &mut StdRng) -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let runtime = tokio::runtime::Runtime::new().unwrap();
    let model = GkModel::default();
    let profiles: Vec<GKProfile> = (0..SERVICE_PROFILES).map(|_| random_profile(rng)).collect();
    let mismatches = runtime.block_on(async {
        let st = state(&dir.path().join("inproc.jsonl"));
        let mut mismatches = 0;
        for p in &profiles {
            let r = call(&st, Method::POST, "/api/evaluate", serde_json::to_string(p).unwrap()).await;
            let expected = EvaluationReport::new(&model.score(p).unwrap(), model.rulebase()).to_json();
            if r.status != StatusCode::OK || r.body != expected {
                mismatches += 1;
            }
        }
        mismatches
    });

    let store = dir.path().join("served.jsonl");
    let mut server = Server::spawn(&store, &[]);
    for (i, p) in profiles.iter().take(6).enumerate() {
        let body = format!(r#"{{"id":"c{i}","name":"c{i}","profile":{}}}"#, serde_json::to_string(p).unwrap());
        assert_eq!(server.request("POST", "/api/candidates", &body).0, 201);
    }
    assert_eq!(server.request("DELETE", "/api/candidates/c2", "").0, 204);
    let (_, before) = server.request("GET", "/api/candidates", "");
    server.kill();
    let replayed = replay(&store).map(|(live, _)| live.len()).unwrap_or(usize::MAX);
    let restarted = Server::spawn(&store, &[]);
    let (_, after) = restarted.request("GET", "/api/candidates", "");
    let strip = |s: &str| {
        let mut v: serde_json::Value = serde_json::from_str(s).unwrap();
        for c in v.as_array_mut().unwrap() {
            c.as_object_mut().unwrap().remove("rulebase_version");
        }
        v
    };
    let same = strip(&before) == strip(&after);
    outcome(
        mismatches == 0 && replayed == 5 && same,
        format!(
            "{SERVICE_PROFILES} evaluations with {mismatches} mismatches; after SIGKILL {replayed} records \
             replayed, restarted list {}",
            if same { "identical" } else { "DIFFERENT" }
        ),
    )
}

fn main() {
    let mut rng = StdRng::seed_from_u64(SEED);
    let criteria: Vec<(&str, Box<dyn FnOnce(&mut StdRng) -> Outcome>)> = vec![
        ("rule-count reproduction", Box::new(|_| rule_counts())),
        ("reference ordering and band", Box::new(|_| reference_ordering())),
        ("centroid oracle equivalence", Box::new(centroid_oracle)),
        ("operator algebra", Box::new(operator_algebra)),
        ("symmetry anchors", Box::new(symmetry)),
        ("monotonicity sweep", Box::new(monotonicity)),
        ("dsl roundtrip and fuzz", Box::new(dsl_roundtrip_and_fuzz)),
        ("grid-refinement stability", Box::new(grid_refinement)),
        ("service equivalence and crash replay", Box::new(service_equivalence_and_replay)),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let result = catch_unwind(AssertUnwindSafe(|| check(&mut rng)))
            .unwrap_or_else(|_| outcome(false, "panicked"));
        println!("{} {name}: {}", if result.ok { "PASS" } else { "FAIL" }, result.detail);
        failed += usize::from(!result.ok);
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
