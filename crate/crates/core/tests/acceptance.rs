//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any fails.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use btm_core::cooccur::{count_pairs, Direction, Pool};
use btm_core::measures::{closeness_skew, SkewLabel};
use btm_core::pipeline::{self, analyze, Analysis, AnalysisOptions, RunConfig};
use btm_core::report::{plot_data, DEFAULT_MERGE_BELOW, DEFAULT_TOP_K};
use btm_core::synth::{brute_force_report, generate_pair, OracleDirection, SynthConfig};
use btm_core::{classify_relationship, cohens_kappa, CorpusBundle, MeasureReport, Relationship, TopicId};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn check(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

/// Random valid configuration whose bundles fit the given limits.
fn random_config(rng: &mut ChaCha8Rng, max_topics: usize, max_docs: usize) -> SynthConfig {
    loop {
        let shared = rng.random_range(0..=4);
        let u1 = rng.random_range(0..=3);
        let u2 = rng.random_range(0..=3);
        let config = SynthConfig {
            seed: rng.random(),
            dim: (shared + u1 + u2 + rng.random_range(0..=6)).max(1),
            clusters_shared: shared,
            clusters_unique_1: u1,
            clusters_unique_2: u2,
            docs_per_cluster: rng.random_range(1..=15),
            cluster_spread: rng.random_range(0.05..1.0),
            centroid_separation: 1.0,
            outlier_fraction: if rng.random_bool(0.2) { 0.0 } else { rng.random_range(0.0..0.6) },
        };
        let Ok((b1, b2, _)) = generate_pair(&config) else {
            continue;
        };
        if b1.n_topics() <= max_topics && b2.n_topics() <= max_topics && b1.n_docs() + b2.n_docs() <= max_docs {
            return config;
        }
    }
}

/// Every analyzed direction, for the identities that must hold on all instances.
struct Instances(Vec<(String, MeasureReport)>);

impl Instances {
    fn analyze(
        &mut self,
        name: &str,
        b1: &CorpusBundle,
        b2: &CorpusBundle,
        options: &AnalysisOptions,
    ) -> Result<Analysis, String> {
        let a = analyze(b1, b2, options).map_err(|e| format!("{name}: {e}"))?;
        for d in a.report.directions() {
            self.0.push((format!("{name}/{}", d.measures.direction), d.measures.clone()));
        }
        Ok(a)
    }
}

fn pool_for(k: usize) -> Pool {
    if k.is_multiple_of(2) {
        Pool::Both
    } else {
        Pool::NativeOnly
    }
}

fn row_simplex(all: &mut Instances) -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut rows = 0usize;
    let mut worst = 0.0f64;
    for k in 0..100 {
        let config = random_config(&mut rng, 16, 600);
        let (b1, b2, _) = generate_pair(&config).map_err(|e| e.to_string())?;
        let options = AnalysisOptions { pool: pool_for(k), ..AnalysisOptions::default() };
        let a = all.analyze(&format!("random-{k}"), &b1, &b2, &options)?;
        for sm in &a.strengths {
            for row in sm.rows.iter().flatten() {
                let dev = (row.iter().sum::<f64>() - 1.0).abs();
                worst = worst.max(dev);
                rows += 1;
                check(dev <= 1e-9, format!("instance {k}: row sum off by {dev:e}"))?;
            }
        }
    }
    let elapsed = start.elapsed();
    check(elapsed < Duration::from_secs(30), format!("took {elapsed:?}"))?;
    Ok(format!("100 pairs, {rows} rows, max |sum-1| = {worst:.1e}, {elapsed:.2?}"))
}

fn oracle_equivalence(all: &mut Instances) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    let n = 120;
    for k in 0..n {
        let config = random_config(&mut rng, 8, 200);
        let (b1, b2, _) = generate_pair(&config).map_err(|e| e.to_string())?;
        let pool = pool_for(k);
        let options = AnalysisOptions { pool, ..AnalysisOptions::default() };
        let a = all.analyze(&format!("oracle-{k}"), &b1, &b2, &options)?;
        let oracle = brute_force_report(&b1, &b2, pool).map_err(|e| e.to_string())?;

        let pairs: Vec<(i32, i32)> = a.table.rows.iter().map(|r| (r.model1_topic.0, r.model2_topic.0)).collect();
        check(pairs == oracle.pairs, format!("instance {k}: cross assignments differ"))?;

        let expected = [(Direction::OneToTwo, &oracle.one_to_two), (Direction::TwoToOne, &oracle.two_to_one)];
        for ((direction, od), d) in expected.into_iter().zip(a.report.directions()) {
            let counts = count_pairs(&a.table, direction, pool).map_err(|e| e.to_string())?;
            let mut ours = BTreeMap::new();
            for (i, row) in counts.counts.iter().enumerate() {
                for (j, &c) in row.iter().enumerate() {
                    if c > 0 {
                        ours.insert((counts.native_topics[i].0, counts.cross_topics[j].0), c);
                    }
                }
            }
            check(ours == od.counts, format!("instance {k} {direction}: counts differ"))?;

            let m = &d.measures;
            check(m.direction == direction, "direction order")?;
            let OracleDirection { c, c_w, u, u_w, a: al, a_w, .. } = *od;
            for (name, x, y) in [
                ("C", m.c, c),
                ("C_w", m.c_w, c_w),
                ("U", m.u, u),
                ("U_w", m.u_w, u_w),
                ("A", m.a, al),
                ("A_w", m.a_w, a_w),
            ] {
                let diff = (x - y).abs();
                worst = worst.max(diff);
                check(diff <= 1e-9, format!("instance {k} {direction}: {name} {x} vs oracle {y}"))?;
            }
            // ours is ordered by uniqueness, the oracle's by topic id
            let unique: BTreeSet<i32> = m.unique_topics.iter().map(|t| t.topic.0).collect();
            let expected: BTreeSet<i32> = od.unique_topics.iter().copied().collect();
            check(unique == expected, format!("instance {k} {direction}: unique topics {unique:?} vs oracle {expected:?}"))?;
        }
    }
    Ok(format!("{n} instances, counts exact, max factor diff {worst:.1e}"))
}

fn complement_identities(all: &Instances) -> Outcome {
    let mut worst = 0.0f64;
    for (name, m) in &all.0 {
        let d = (m.c + m.u - 1.0).abs().max((m.c_w + m.u_w - 1.0).abs());
        worst = worst.max(d);
        check(d <= 1e-12, format!("{name}: C+U={} C_w+U_w={}", m.c + m.u, m.c_w + m.u_w))?;
    }
    Ok(format!("{} directions, max deviation {worst:.1e}", all.0.len()))
}

fn impossibility_bound(all: &Instances) -> Outcome {
    let mut min_slack = f64::INFINITY;
    for (name, m) in &all.0 {
        min_slack = min_slack.min(1.0 - m.u - m.a);
        check(m.a <= 1.0 - m.u + 1e-12, format!("{name}: A={} U={}", m.a, m.u))?;
    }
    Ok(format!("{} directions, min (1-U)-A = {min_slack:.1e}", all.0.len()))
}

fn planted_recovery(all: &mut Instances) -> Outcome {
    let mut slowest = Duration::ZERO;
    let mut summary = Vec::new();
    for seed in 0..5 {
        let shared = SynthConfig {
            seed,
            clusters_shared: 5,
            clusters_unique_1: 0,
            clusters_unique_2: 0,
            cluster_spread: 0.1,
            centroid_separation: 1.0,
            outlier_fraction: 0.0,
            ..SynthConfig::default()
        };
        let start = Instant::now();
        let (b1, b2, _) = generate_pair(&shared).map_err(|e| e.to_string())?;
        let a = all.analyze(&format!("shared-{seed}"), &b1, &b2, &AnalysisOptions::default())?;
        slowest = slowest.max(start.elapsed());
        for d in a.report.directions() {
            let m = &d.measures;
            let tag = format!("shared seed {seed} {}", m.direction);
            check(m.c >= 0.95, format!("{tag}: C={}", m.c))?;
            check(m.a >= 0.9, format!("{tag}: A={}", m.a))?;
            check(m.unique_topics.is_empty(), format!("{tag}: {} unique topics", m.unique_topics.len()))?;
            check(d.validation.kappa == 1.0, format!("{tag}: kappa={}", d.validation.kappa))?;
            if seed == 0 {
                summary.push(format!("C={:.3} A={:.3}", m.c, m.a));
            }
        }

        let disjoint = SynthConfig {
            seed,
            dim: 6,
            clusters_shared: 0,
            clusters_unique_1: 3,
            clusters_unique_2: 3,
            cluster_spread: 0.1,
            centroid_separation: 1.0,
            outlier_fraction: 0.3,
            ..SynthConfig::default()
        };
        let start = Instant::now();
        let (b1, b2, _) = generate_pair(&disjoint).map_err(|e| e.to_string())?;
        let a = all.analyze(&format!("disjoint-{seed}"), &b1, &b2, &AnalysisOptions::default())?;
        slowest = slowest.max(start.elapsed());
        for (d, bundle) in a.report.directions().into_iter().zip([&b1, &b2]) {
            let m = &d.measures;
            let tag = format!("disjoint seed {seed} {}", m.direction);
            check(m.u >= 0.9, format!("{tag}: U={}", m.u))?;
            let unique: BTreeSet<TopicId> = m.unique_topics.iter().map(|t| t.topic).collect();
            let topics: BTreeSet<TopicId> = bundle.topic_ids().into_iter().filter(|t| !t.is_outlier()).collect();
            check(unique == topics, format!("{tag}: unique {unique:?} of {topics:?}"))?;
            if seed == 0 {
                summary.push(format!("U={:.3}", m.u));
            }
        }
    }
    check(slowest < Duration::from_secs(10), format!("slowest run {slowest:?}"))?;
    Ok(format!(
        "shared {} | disjoint {} | slowest run {slowest:.2?}",
        summary[..2].join(", "),
        summary[2..].join(", ")
    ))
}

fn kappa_anchor() -> Outcome {
    let labels = |v: [char; 4]| -> BTreeMap<TopicId, char> {
        v.into_iter().enumerate().map(|(i, c)| (TopicId(i as i32), c)).collect()
    };
    let a = labels(['x', 'x', 'y', 'y']);
    let b = labels(['x', 'y', 'y', 'y']);
    let k: f64 = cohens_kappa(&a, &b).map_err(|e| e.to_string())?;
    check((k - 0.5).abs() <= 1e-12, format!("kappa {k}"))?;
    let same: f64 = cohens_kappa(&a, &a).map_err(|e| e.to_string())?;
    check(same == 1.0, format!("identical labelings gave {same}"))?;
    let same32: f32 = cohens_kappa(&b, &b).map_err(|e| e.to_string())?;
    check(same32 == 1.0, format!("identical f32 labelings gave {same32}"))?;
    Ok(format!("kappa = {k}, identical = {same}"))
}

fn case_study_regime() -> Outcome {
    for a in [0.45f64, 0.44] {
        let r = classify_relationship(0.34f64, a).map_err(|e| e.to_string())?;
        check(r == Relationship::OverlapMultifaceted, format!("U=0.34 A={a} classified {r:?}"))?;
    }
    for (c, c_w) in [(0.66f64, 0.68), (0.66, 0.70)] {
        let (theta, label) = closeness_skew(c, c_w);
        check(label == SkewLabel::SizeIndependent, format!("theta {theta} labeled {label:?}"))?;
    }
    Ok("U=0.34 A=0.45 overlap-multifaceted, theta 0.02 and 0.04 size-independent".into())
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let config = SynthConfig { seed: 42, ..SynthConfig::default() };
    pipeline::run_synth(&config, dir.path()).map_err(|e| e.to_string())?;
    let mut outputs = Vec::new();
    for threads in [1, 4] {
        for run in 0..3 {
            let out = dir.path().join(format!("out-{threads}-{run}"));
            let mut rc = RunConfig::new(dir.path().join("corpus_1"), dir.path().join("corpus_2"), &out);
            rc.threads = Some(threads);
            pipeline::run_analyze(&rc).map_err(|e| e.to_string())?;
            let read = |f: &str| fs::read(out.join(f)).map_err(|e| e.to_string());
            outputs.push((read(pipeline::REPORT_FILE)?, read(pipeline::PLOT_DATA_FILE)?));
        }
    }
    check(outputs.windows(2).all(|w| w[0] == w[1]), "outputs differ between runs")?;
    Ok(format!(
        "{} runs over threads {{1, 4}} byte-identical ({} + {} bytes)",
        outputs.len(),
        outputs[0].0.len(),
        outputs[0].1.len()
    ))
}

fn plot_contract() -> Outcome {
    let defaults = AnalysisOptions::default();
    check(defaults.top_k == 25 && DEFAULT_TOP_K == 25, "top_k default")?;
    check(defaults.merge_below == 0.05 && DEFAULT_MERGE_BELOW == 0.05, "merge_below default")?;

    // More than 25 topics per corpus so truncation is exercised; wide clusters
    // produce plenty of weak pairs to merge.
    let config = SynthConfig {
        seed: 9,
        dim: 32,
        clusters_shared: 26,
        clusters_unique_1: 4,
        clusters_unique_2: 2,
        docs_per_cluster: 12,
        cluster_spread: 0.35,
        outlier_fraction: 0.25,
        ..SynthConfig::default()
    };
    let (b1, b2, _) = generate_pair(&config).map_err(|e| e.to_string())?;
    let a = analyze(&b1, &b2, &defaults).map_err(|e| e.to_string())?;
    let mut merged = 0;
    let mut outliers = 0;
    for d in a.report.directions() {
        let direction = d.measures.direction;
        let segs: Vec<_> = a.plot.iter().filter(|s| s.direction == direction).collect();
        let mut topics: Vec<TopicId> = segs.iter().map(|s| s.native_topic).collect();
        topics.dedup();
        check(topics.len() == 25, format!("{direction}: {} topics plotted", topics.len()))?;
        let size = |t: TopicId| d.native_topics.iter().find(|l| l.id == t).map_or(0, |l| l.native_size);
        check(topics.windows(2).all(|w| size(w[0]) >= size(w[1])), "topics not ordered by size")?;

        for t in topics {
            let ts: Vec<_> = segs.iter().filter(|s| s.native_topic == t).collect();
            let pt = d.measures.per_topic.iter().find(|p| p.topic == t).ok_or("topic missing")?;
            let row_sum: f64 = pt.pairings.iter().map(|p| p.strength).sum();
            let seg_sum: f64 = ts.iter().map(|s| s.strength).sum();
            check(
                (row_sum - seg_sum).abs() <= 1e-9,
                format!("{direction} topic {t}: segments {seg_sum} vs row {row_sum}"),
            )?;

            let weak: f64 = pt
                .pairings
                .iter()
                .filter(|p| !p.cross_topic.is_outlier() && p.strength < 0.05)
                .map(|p| p.strength)
                .sum();
            let remaining: Vec<_> = ts.iter().filter(|s| s.is_remaining).collect();
            if weak > 0.0 {
                check(
                    remaining.len() == 1 && (remaining[0].strength - weak).abs() <= 1e-12,
                    format!("{direction} topic {t}: weak pairs not merged into one segment"),
                )?;
                merged += 1;
            } else {
                check(remaining.is_empty(), format!("{direction} topic {t}: spurious remaining segment"))?;
            }
            check(
                ts.iter().filter(|s| !s.is_remaining && !s.is_outlier).all(|s| s.strength >= 0.05),
                format!("{direction} topic {t}: sub-threshold pair kept separate"),
            )?;

            let outlier_strength = pt.pairings.iter().find(|p| p.cross_topic.is_outlier()).map(|p| p.strength);
            let outlier_segs: Vec<_> = ts.iter().filter(|s| s.is_outlier).collect();
            match outlier_strength {
                Some(s) => {
                    check(outlier_segs.len() == 1 && outlier_segs[0].strength == s, "outlier segment value")?;
                    check(
                        ts.last().is_some_and(|l| l.is_outlier && l.cross_topic == Some(TopicId::OUTLIER)),
                        "outlier segment not last",
                    )?;
                    outliers += 1;
                }
                None => check(outlier_segs.is_empty(), "spurious outlier segment")?,
            }
            check(ts.iter().enumerate().all(|(k, s)| s.rank == k + 1), "ranks not consecutive")?;
        }
    }
    check(merged > 0 && outliers > 0, "instance exercised no merging or no outlier segment")?;

    let small = plot_data(&a.report, 3, 0.2).map_err(|e| e.to_string())?;
    let plotted: BTreeSet<_> = small.iter().map(|s| (s.direction.as_str(), s.native_topic)).collect();
    check(plotted.len() == 6, format!("top_k 3 plotted {} topics", plotted.len()))?;
    Ok(format!("{merged} merged bars, {outliers} outlier segments, sums within 1e-9"))
}

fn main() -> ExitCode {
    let mut all = Instances(Vec::new());
    let mut failed = 0;
    let mut report = |name: &str, outcome: Outcome| match outcome {
        Ok(detail) => println!("PASS  {name}: {detail}"),
        Err(why) => {
            failed += 1;
            println!("FAIL  {name}: {why}");
        }
    };
    println!();
    report("row-simplex", row_simplex(&mut all));
    report("oracle-equivalence", oracle_equivalence(&mut all));
    report("planted-recovery", planted_recovery(&mut all));
    report("complement-identities", complement_identities(&all));
    report("impossibility-bound", impossibility_bound(&all));
    report("kappa-anchor", kappa_anchor());
    report("case-study-regime", case_study_regime());
    report("determinism", determinism());
    report("plot-data-contract", plot_contract());
    println!();
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        ExitCode::FAILURE
    } else {
        println!("all acceptance criteria passed");
        ExitCode::SUCCESS
    }
}
