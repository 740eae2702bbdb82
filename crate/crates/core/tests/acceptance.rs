//! Acceptance suite. Runs every criterion, prints one line each, and exits
//! non-zero if any criterion fails.

use std::collections::{BTreeMap, BTreeSet};
use std::time::{Duration as StdDuration, Instant};

use chrono::{Duration, TimeZone, Utc};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use commitgate::calendar::{add_months, fractional_months, shift_months};
use commitgate::identity::{resolve_identities, DevId, IdentityMap, ResolveOptions};
use commitgate::ingest::{
    normalize, parse_git_log, write_git_log, CommitRecord, Event, EventKind, EventStream, NormalizeOptions,
    RawIdentity, RepoId, Timestamp,
};
use commitgate::lifecycle::{cliffs_delta, detect_immigrations, mann_whitney_u, read_corrections, LifecycleConfig};
use commitgate::metrics::{build_panel, covariates_at, ActivityIndex, Covariate, LexiconScorer, MetricsConfig};
use commitgate::pipeline::{render_coefficient_table, run_pipeline, Format, RunConfig};
use commitgate::survival::{
    fit_cox_tvc, fit_piecewise_exponential, log_partial_likelihood, model_tests, nelson_aalen, vifs, CoxFit,
    CoxOptions, SurvRow, SurvivalData, Ties,
};
use commitgate::synthetic::{community, epoch, simulate_piecewise_exponential, write_community_project};

enum Outcome {
    Pass(String),
    Fail(String),
    Skip(String),
}

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn three_subjects() -> SurvivalData {
    let row = |id: &str, stop: f64, event: bool, x: f64| SurvRow { id: id.into(), start: 0.0, stop, event, x: vec![x] };
    SurvivalData::numeric(&["x"], vec![row("a", 1.0, true, 1.0), row("b", 2.0, true, 0.0), row("c", 3.0, false, 1.0)])
        .unwrap()
}

fn analytic_cox_mle() -> Check {
    let started = Instant::now();
    let fit = fit_cox_tvc(&three_subjects(), &CoxOptions::default()).map_err(|e| e.to_string())?;
    let elapsed = started.elapsed();
    let analytic = -0.5 * 2f64.ln();
    // at t=1 the risk set is {x=1, x=0, x=1}; at t=2 it is {x=0, x=1}
    let loglik = |b: f64| b - (2.0 * b.exp() + 1.0).ln() - (1.0 + b.exp()).ln();
    let grid = (0..=600_000).map(|k| -3.0 + k as f64 * 1e-5).fold((0.0, f64::NEG_INFINITY), |best, b| {
        let l = loglik(b);
        if l > best.1 {
            (b, l)
        } else {
            best
        }
    });
    let b = fit.beta[0];
    ensure((b - (-0.346574)).abs() <= 1e-4, || format!("beta {b}"))?;
    ensure((b - analytic).abs() <= 1e-4, || format!("beta {b} vs analytic {analytic}"))?;
    ensure((b - grid.0).abs() <= 1e-4, || format!("beta {b} vs grid {}", grid.0))?;
    ensure(elapsed < StdDuration::from_secs(1), || format!("took {elapsed:?}"))?;
    Ok(format!("beta={b:.6} analytic={analytic:.6} grid={:.5} in {elapsed:.2?}", grid.0))
}

/// Counting-process panel: subjects with one to three consecutive rows.
fn random_panel(rng: &mut ChaCha8Rng, p: usize) -> SurvivalData {
    let mut rows = Vec::new();
    let mut subject = 0;
    while rows.len() < 44 {
        let n_rows = rng.random_range(1..=3);
        let mut t = 0.0;
        let event = rng.random_bool(0.6);
        for k in 0..n_rows {
            let stop = t + rng.random_range(1..4) as f64;
            rows.push(SurvRow {
                id: format!("s{subject}"),
                start: t,
                stop,
                event: event && k + 1 == n_rows,
                x: (0..p).map(|_| rng.random_range(-1.5..1.5)).collect(),
            });
            t = stop;
        }
        subject += 1;
    }
    let names: Vec<String> = (0..p).map(|j| format!("x{j}")).collect();
    let refs: Vec<&str> = names.iter().map(String::as_str).collect();
    SurvivalData::numeric(&refs, rows).unwrap()
}

fn gradient_and_information() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst = 0.0f64;
    for panel in 0..20 {
        let p = 1 + panel % 4;
        let data = random_panel(&mut rng, p);
        for ties in [Ties::Efron, Ties::Breslow] {
            for _ in 0..10 {
                let beta: Vec<f64> = (0..p).map(|_| rng.random_range(-1.0..1.0)).collect();
                let parts = log_partial_likelihood(&data, &beta, ties).map_err(|e| e.to_string())?;
                let h = 1e-5;
                let fd: Vec<f64> = (0..p)
                    .map(|j| {
                        let mut up = beta.clone();
                        let mut down = beta.clone();
                        up[j] += h;
                        down[j] -= h;
                        let l = |b: &[f64]| log_partial_likelihood(&data, b, ties).unwrap().loglik;
                        (l(&up) - l(&down)) / (2.0 * h)
                    })
                    .collect();
                let num: f64 = (0..p).map(|j| (parts.gradient[j] - fd[j]).powi(2)).sum::<f64>().sqrt();
                let den: f64 = fd.iter().map(|v| v * v).sum::<f64>().sqrt().max(1.0);
                worst = worst.max(num / den);
            }
        }
        let fit = fit_cox_tvc(&data, &CoxOptions::default()).map_err(|e| format!("panel {panel}: {e}"))?;
        ensure(fit.converged, || format!("panel {panel} did not converge: {:?}", fit.diagnostics))?;
        let info = log_partial_likelihood(&data, &fit.beta, Ties::Efron).unwrap().information;
        ensure((&info - info.transpose()).abs().max() < 1e-10, || format!("panel {panel}: information not symmetric"))?;
        ensure(info.clone().cholesky().is_some(), || format!("panel {panel}: information not positive definite"))?;
    }
    ensure(worst < 1e-6, || format!("worst relative gradient error {worst:e}"))?;
    Ok(format!("20 panels x 2 tie methods x 10 points, worst relative error {worst:.1e}, information SPD at every optimum"))
}

fn simulation_recovery() -> Check {
    let started = Instant::now();
    let (runs, n, beta) = (200, 2000, 0.7);
    let mut covered = 0;
    let mut failed = 0;
    for seed in 0..runs {
        let subjects = simulate_piecewise_exponential(1000 + seed, n, beta, &[6.0], &[0.05f64.ln(), 0.02f64.ln()], 24.0);
        let data = SurvivalData::from_subjects(&subjects).map_err(|e| e.to_string())?;
        match fit_piecewise_exponential(&data, &[0.0, 6.0, 24.0], 1e-8, 100) {
            Ok(fit) if fit.converged => {
                let (b, se) = (fit.beta[0], fit.se_beta[0]);
                if (b - 1.959964 * se..=b + 1.959964 * se).contains(&beta) {
                    covered += 1;
                }
            }
            _ => failed += 1,
        }
    }
    let elapsed = started.elapsed();
    let rate = covered as f64 / runs as f64;
    ensure(failed == 0, || format!("{failed} fits failed"))?;
    ensure(rate >= 0.90, || format!("coverage {rate:.3}"))?;
    ensure(elapsed < StdDuration::from_secs(300), || format!("took {elapsed:?}"))?;
    Ok(format!("95% Wald CI covered beta=0.7 in {covered}/{runs} runs ({:.1}%) in {elapsed:.1?}", 100.0 * rate))
}

fn scaling_equivariance() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut worst = 0.0f64;
    for panel in 0..10 {
        let data = random_panel(&mut rng, 3);
        let base = fit_cox_tvc(&data, &CoxOptions::default()).map_err(|e| e.to_string())?;
        for j in 0..3 {
            let scaled = fit_cox_tvc(&data.scale_column(j, 10.0), &CoxOptions::default()).map_err(|e| e.to_string())?;
            let rel = |a: f64, b: f64| (a - b).abs() / b.abs().max(1e-12);
            let checks = [
                rel(scaled.beta[j], base.beta[j] / 10.0),
                (scaled.z[j] - base.z[j]).abs() / base.z[j].abs().max(1.0),
                (scaled.lr_stat - base.lr_stat).abs() / base.lr_stat.abs().max(1.0),
            ];
            for c in checks {
                worst = worst.max(c);
            }
            ensure(checks.iter().all(|c| *c < 1e-6), || format!("panel {panel} column {j}: {checks:?}"))?;
        }
    }
    Ok(format!("30 rescalings by 10, worst deviation {worst:.1e}"))
}

/// Least squares through the normal equations, solved by Gauss-Jordan
/// elimination with partial pivoting.
fn ols_r2(y: &[f64], xs: &[Vec<f64>]) -> f64 {
    let n = y.len();
    let p = xs.len() + 1;
    let col = |k: usize, i: usize| if k == 0 { 1.0 } else { xs[k - 1][i] };
    let mut a = vec![vec![0.0; p + 1]; p];
    for r in 0..p {
        for c in 0..p {
            a[r][c] = (0..n).map(|i| col(r, i) * col(c, i)).sum();
        }
        a[r][p] = (0..n).map(|i| col(r, i) * y[i]).sum();
    }
    for c in 0..p {
        let piv = (c..p).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs())).unwrap();
        a.swap(c, piv);
        for r in 0..p {
            if r != c {
                let f = a[r][c] / a[c][c];
                for k in c..=p {
                    a[r][k] -= f * a[c][k];
                }
            }
        }
    }
    let coef: Vec<f64> = (0..p).map(|r| a[r][p] / a[r][r]).collect();
    let mean = y.iter().sum::<f64>() / n as f64;
    let tss: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    let rss: f64 = (0..n).map(|i| (y[i] - (0..p).map(|k| coef[k] * col(k, i)).sum::<f64>()).powi(2)).sum();
    1.0 - rss / tss
}

fn statistics_oracles() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for case in 0..100 {
        let a: Vec<f64> = (0..rng.random_range(1..=30)).map(|_| rng.random_range(0..12) as f64).collect();
        let b: Vec<f64> = (0..rng.random_range(1..=30)).map(|_| rng.random_range(0..12) as f64).collect();
        let (mut gt, mut lt, mut eq) = (0i64, 0i64, 0i64);
        for x in &a {
            for y in &b {
                match x.partial_cmp(y).unwrap() {
                    std::cmp::Ordering::Greater => gt += 1,
                    std::cmp::Ordering::Less => lt += 1,
                    std::cmp::Ordering::Equal => eq += 1,
                }
            }
        }
        let u = mann_whitney_u(&a, &b).unwrap();
        let u_oracle = gt as f64 + 0.5 * eq as f64;
        ensure(u.u_a == u_oracle, || format!("case {case}: U {} vs {u_oracle}", u.u_a))?;
        let d = cliffs_delta(&a, &b).unwrap();
        let d_oracle = (gt - lt) as f64 / (a.len() * b.len()) as f64;
        ensure(d == d_oracle, || format!("case {case}: delta {d} vs {d_oracle}"))?;
    }

    let mut worst_vif = 0.0f64;
    for _ in 0..20 {
        let n = 60;
        let x1: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let x2: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let x3: Vec<f64> = (0..n).map(|i| 0.8 * x1[i] - 0.5 * x2[i] + rng.random_range(-0.3..0.3)).collect();
        let x4: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..5.0)).collect();
        let cols = [x1, x2, x3, x4];
        let rows = (0..n)
            .map(|i| SurvRow {
                id: format!("r{i:02}"),
                start: 0.0,
                stop: 1.0 + i as f64,
                event: i % 3 == 0,
                x: cols.iter().map(|c| c[i]).collect(),
            })
            .collect();
        let data = SurvivalData::numeric(&["x1", "x2", "x3", "x4"], rows).unwrap();
        // SurvivalData reorders rows; read the columns back in its order
        let ordered: Vec<Vec<f64>> = (0..4).map(|j| data.rows().iter().map(|r| r.x[j]).collect()).collect();
        let got = vifs(&data);
        for j in 0..4 {
            let others: Vec<Vec<f64>> = (0..4).filter(|&k| k != j).map(|k| ordered[k].clone()).collect();
            let oracle = 1.0 / (1.0 - ols_r2(&ordered[j], &others));
            let rel = (got[j] - oracle).abs() / oracle;
            worst_vif = worst_vif.max(rel);
            ensure(rel < 1e-9, || format!("VIF {} vs {oracle}", got[j]))?;
        }
    }

    for _ in 0..50 {
        let data = random_panel(&mut rng, 1);
        for (t, h) in nelson_aalen(&data) {
            let at_risk = data.rows().iter().filter(|r| r.start < t && t <= r.stop).count();
            let died = data.rows().iter().filter(|r| r.event && r.stop == t).count();
            ensure(h == died as f64 / at_risk as f64, || format!("increment at {t}: {h}"))?;
        }
    }
    Ok(format!("100 U/delta pairs exact, VIF worst relative error {worst_vif:.1e}, Nelson-Aalen exact on 50 panels"))
}

// Immigration fixture: a founder who commits everyone's work, 29
// contributors, three of whom gain commit rights, one later excluded by
// correction, and one whose first self-commit lands just after collection.

fn at(month: u32, day: u32) -> Timestamp {
    Utc.with_ymd_and_hms(2020, 1, 1, 12, 0, 0).unwrap() + Duration::days(i64::from(month) * 30 + i64::from(day))
}

fn dev(k: usize) -> RawIdentity {
    RawIdentity::git(format!("Contributor {k}"), format!("c{k}@example.org"))
}

struct Planted {
    log: String,
    collection: Timestamp,
    first: BTreeMap<usize, Timestamp>,
    immigrated: BTreeMap<usize, Timestamp>,
    founder: usize,
    excluded: usize,
    near_miss: usize,
}

fn planted_fixture() -> Planted {
    let repo = RepoId::new("acme", "core");
    let collection = at(24, 0);
    let mut commits = Vec::new();
    let mut push = |author: usize, committer: usize, authored: Timestamp, committed: Timestamp| {
        let (a, c) = (dev(author), dev(committer));
        commits.push(CommitRecord {
            hash: format!("{:040x}", commits.len() + 1),
            author_name: a.name.unwrap(),
            author_email: a.email.unwrap(),
            author_time: authored,
            committer_name: c.name.unwrap(),
            committer_email: c.email.unwrap(),
            committer_time: committed,
            repo: repo.clone(),
            files_touched: BTreeSet::from([format!("src/m{author}.rs")]),
            message: format!("change by {author}"),
        });
    };
    let founder = 0;
    for m in 0..24 {
        push(founder, founder, at(m, 1), at(m, 1));
    }
    let mut first = BTreeMap::new();
    for k in 1..30 {
        let start = (k as u32 * 7) % 18;
        first.insert(k, at(start, 3));
        for m in (start..24).step_by(3) {
            push(k, founder, at(m, 3), at(m, 4));
        }
    }
    let mut immigrated = BTreeMap::new();
    for (k, month) in [(1usize, 14u32), (2, 20), (3, 9)] {
        let t = at(month, 10);
        push(k, k, t - Duration::hours(2), t);
        immigrated.insert(k, t);
    }
    let (excluded, near_miss) = (4, 5);
    push(excluded, excluded, at(15, 10), at(15, 11));
    push(near_miss, near_miss, collection - Duration::days(1), collection + Duration::days(1));
    Planted { log: write_git_log(&commits), collection, first, immigrated, founder, excluded, near_miss }
}

fn immigration_detection() -> Check {
    let f = planted_fixture();
    let repo = RepoId::new("acme", "core");
    let commits = parse_git_log(&f.log, &repo).map_err(|e| e.to_string())?;
    let stream = normalize(commits, vec![], &NormalizeOptions::default());
    let ids = resolve_identities(&stream, &ResolveOptions::default());
    let id = |k: usize| ids.dev_of(&dev(k)).cloned().unwrap();
    ensure(ids.devs().count() == 30, || format!("{} developers resolved", ids.devs().count()))?;
    let corrections =
        read_corrections(&format!("dev_id,action,timestamp,reason\n{},exclude,,company employee\n", id(f.excluded)))
            .map_err(|e| e.to_string())?;
    let (events, pool) = detect_immigrations(&stream, &ids, &corrections, f.collection, &LifecycleConfig::default())
        .map_err(|e| e.to_string())?;

    ensure(pool.founding_committers == BTreeSet::from([id(f.founder)]), || format!("founders {:?}", pool.founding_committers))?;
    ensure(pool.exclusions.keys().eq([id(f.excluded)].iter()), || format!("exclusions {:?}", pool.exclusions))?;
    let expected_candidates: BTreeSet<DevId> = (1..30).filter(|&k| k != f.excluded).map(id).collect();
    ensure(pool.candidates == expected_candidates, || format!("{} candidates", pool.candidates.len()))?;
    let expected_immigrants: BTreeSet<DevId> = f.immigrated.keys().map(|&k| id(k)).collect();
    ensure(pool.immigrants == expected_immigrants, || format!("immigrants {:?}", pool.immigrants))?;
    ensure(events.len() == expected_candidates.len(), || format!("{} events", events.len()))?;
    let by_dev: BTreeMap<&DevId, _> = events.iter().map(|e| (&e.dev, e)).collect();
    for k in (1..30).filter(|&k| k != f.excluded) {
        let e = by_dev[&id(k)];
        let want = f.immigrated.get(&k).copied();
        ensure(e.first_appearance == f.first[&k], || format!("dev {k} first appearance {}", e.first_appearance))?;
        ensure(e.immigration_time == want, || format!("dev {k} immigration {:?} vs {want:?}", e.immigration_time))?;
        let interval = fractional_months(f.first[&k], want.unwrap_or(f.collection));
        ensure(e.transition_interval == interval, || format!("dev {k} interval {}", e.transition_interval))?;
    }
    ensure(by_dev[&id(f.near_miss)].censored(), || "near miss was not censored".into())?;
    Ok(format!(
        "30 developers: founder, {} immigrants, 1 exclusion, near miss censored, {} candidates exact",
        f.immigrated.len(),
        expected_candidates.len()
    ))
}

fn shifted(events: &[Event], k: u32) -> Vec<Event> {
    events
        .iter()
        .cloned()
        .map(|mut e| {
            e.time = shift_months(e.time, k);
            if let Some(c) = e.commit.as_mut() {
                c.author_time = shift_months(c.author_time, k);
                c.committer_time = shift_months(c.committer_time, k);
            }
            e
        })
        .collect()
}

fn comment_oracle(stream: &EventStream, ids: &IdentityMap, dev: &DevId, before: Timestamp) -> f64 {
    stream
        .iter()
        .filter(|e| matches!(e.kind, EventKind::PrComment | EventKind::IssueComment | EventKind::CommitComment))
        .filter(|e| e.time < before && ids.dev_of(&e.actor) == Some(dev))
        .count() as f64
}

fn panel_integrity() -> Check {
    let mut rows_checked = 0;
    for seed in [1u64, 2, 3] {
        let c = community(seed, 40, 24);
        let focal = normalize(c.focal_commits.clone(), c.focal_events.clone(), &NormalizeOptions::default());
        let sib = normalize(c.sibling_commits.clone(), c.sibling_events.clone(), &NormalizeOptions::default());
        let ids = resolve_identities(&EventStream::merge([focal.clone(), sib.clone()]), &ResolveOptions::default());
        let collection = add_months(epoch(), 24);
        let (imm, pool) =
            detect_immigrations(&focal, &ids, &[], collection, &LifecycleConfig::default()).map_err(|e| e.to_string())?;
        let cfg = MetricsConfig::default();
        let index = ActivityIndex::build(&focal, Some(&sib), &ids, &cfg, &LexiconScorer::default());
        let panel = build_panel(&index, &pool, &imm, collection).map_err(|e| e.to_string())?;
        rows_checked += panel.len();
        let first: BTreeMap<&DevId, Timestamp> = imm.iter().map(|e| (&e.dev, e.first_appearance)).collect();

        let mut by_dev: BTreeMap<&DevId, Vec<_>> = BTreeMap::new();
        for r in &panel {
            by_dev.entry(&r.dev).or_default().push(r);
        }
        ensure(by_dev.len() == pool.candidates.len(), || "a candidate has no rows".into())?;
        for (d, rows) in &by_dev {
            for (k, r) in rows.iter().enumerate() {
                ensure(r.start == k as f64 && r.stop == k as f64 + 1.0, || format!("{d}: gap at row {k}"))?;
                ensure(!r.y || k + 1 == rows.len(), || format!("{d}: event before the last row"))?;
                let cutoff = add_months(first[d], r.month - 1);
                let m7 = r.get(Covariate::AllComment).unwrap();
                ensure(m7 == comment_oracle(&focal, &ids, d, cutoff), || format!("{d}: M7 {m7} month {}", r.month))?;
            }
            for w in rows.windows(2) {
                for c in Covariate::ALL.into_iter().filter(|c| c.is_cumulative()) {
                    ensure(w[1].get(c) >= w[0].get(c), || format!("{d}: {c} decreased"))?;
                }
            }
        }

        // every event one calendar month later: month m becomes month m + 1
        let focal2 = normalize(vec![], shifted(focal.events(), 1), &NormalizeOptions::default());
        let sib2 = normalize(vec![], shifted(sib.events(), 1), &NormalizeOptions::default());
        let index2 = ActivityIndex::build(&focal2, Some(&sib2), &ids, &cfg, &LexiconScorer::default());
        for d in &pool.candidates {
            for month in 1..24u32 {
                let before = covariates_at(&index, d, epoch(), month);
                let after = covariates_at(&index2, d, epoch(), month + 1);
                for c in Covariate::ALL.into_iter().filter(|c| *c != Covariate::Age) {
                    ensure(before[c.index()] == after[c.index()], || format!("{d}: {c} leaks at month {month}"))?;
                }
            }
        }
    }
    Ok(format!("{rows_checked} rows over 3 fixtures: monotone, M7 = comment sum, gap-free, shift-consistent"))
}

fn table_fidelity() -> Check {
    let fit = |beta: f64, se: f64| -> CoxFit {
        let mut f = fit_cox_tvc(&three_subjects(), &CoxOptions::default()).unwrap();
        f.covariate_names = vec!["merge_ratio".into()];
        f.beta = vec![beta];
        f.exp_beta = vec![beta.exp()];
        f.se = vec![se];
        f.z = vec![beta / se];
        f.p = vec![2.0 * commitgate::special::normal_sf((beta / se).abs())];
        f.df = 15;
        f.lr_stat = 570.2;
        f.loglik_fit = f.loglik_null + 285.1;
        f.wald_stat = 480.0;
        f.score_stat = 610.3;
        f
    };
    // the published row shows 0.54***, 1.71, 0.08, 6.37: consistent with
    // unrounded 0.537 / 0.0843
    let md = render_coefficient_table(&fit(0.537, 0.0843), Format::Markdown);
    ensure(md.contains("| merge_ratio | 0.54*** | 1.71 | 0.08 | 6.37 |"), || md.clone())?;
    ensure(md.contains("| Covariate | Coef | EXP(Coef) | SE(Coef) | Z |"), || md.clone())?;
    ensure(md.contains("Likelihood ratio test: 570.2 on 15 df, p=<2e-16"), || md.clone())?;
    ensure(md.contains("Wald test: 480 on 15 df") && md.contains("Score (logrank) test: 610.3 on 15 df"), || md.clone())?;
    ensure(md.contains("***p < 0.001, **p < 0.01, *p < 0.05"), || md.clone())?;
    let zero = render_coefficient_table(&fit(0.0, 0.3), Format::Markdown);
    ensure(zero.contains("| merge_ratio | 0.00 | 1.00 | 0.30 | 0.00 |"), || zero.clone())?;
    let exact = render_coefficient_table(&fit(0.54, 0.08), Format::Markdown);
    ensure(exact.contains("| 6.75 |"), || exact.clone())?;
    let tests = model_tests(&fit(0.537, 0.0843)).unwrap();
    ensure(tests.likelihood_ratio.df == 15, || "df".into())?;
    Ok("row 0.54*** | 1.71 | 0.08 | 6.37 and footer \"570.2 on 15 df, p=<2e-16\" reproduced (exact 0.54 displays exp 1.72)".into())
}

fn determinism() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let config = write_community_project(dir.path(), 31, 50, 24).map_err(|e| e.to_string())?;
    let cfg = RunConfig::from_file(&config).map_err(|e| e.to_string())?;
    let mut manifests = Vec::new();
    for _ in 0..3 {
        let bundle = run_pipeline(&cfg).map_err(|e| e.to_string())?;
        let on_disk = std::fs::read(bundle.output_dir.join("manifest.json")).map_err(|e| e.to_string())?;
        manifests.push((bundle.manifest.artifacts.clone(), on_disk));
    }
    ensure(manifests.windows(2).all(|w| w[0] == w[1]), || "artifact hashes differ between runs".into())?;
    ensure(manifests[0].0.len() >= 6, || format!("only {} artifacts", manifests[0].0.len()))?;
    Ok(format!("{} artifacts and manifest byte-identical over 3 runs", manifests[0].0.len()))
}

fn main() {
    let criteria: Vec<(&str, Box<dyn Fn() -> Outcome>)> = vec![
        ("1 analytic Cox MLE", Box::new(|| wrap(analytic_cox_mle()))),
        ("2 gradient and information", Box::new(|| wrap(gradient_and_information()))),
        ("3 simulation recovery", Box::new(|| wrap(simulation_recovery()))),
        ("4 scaling equivariance", Box::new(|| wrap(scaling_equivariance()))),
        ("5 statistics oracles", Box::new(|| wrap(statistics_oracles()))),
        ("6 immigration detection", Box::new(|| wrap(immigration_detection()))),
        ("7 panel integrity", Box::new(|| wrap(panel_integrity()))),
        ("8 table format", Box::new(|| wrap(table_fidelity()))),
        (
            "9 replication data",
            Box::new(|| Outcome::Skip("optional; the authors' replication dataset is not bundled".into())),
        ),
        ("10 determinism", Box::new(|| wrap(determinism()))),
    ];
    let mut failures = 0;
    for (name, run) in criteria {
        let started = Instant::now();
        let outcome = std::panic::catch_unwind(std::panic::AssertUnwindSafe(run))
            .unwrap_or_else(|e| Outcome::Fail(format!("panicked: {:?}", e.downcast_ref::<String>())));
        let secs = started.elapsed().as_secs_f64();
        match outcome {
            Outcome::Pass(msg) => println!("PASS  criterion {name:<30} {msg} [{secs:.1}s]"),
            Outcome::Skip(msg) => println!("SKIP  criterion {name:<30} {msg}"),
            Outcome::Fail(msg) => {
                failures += 1;
                println!("FAIL  criterion {name:<30} {msg} [{secs:.1}s]");
            }
        }
    }
    if failures > 0 {
        println!("{failures} acceptance criteria failed");
        std::process::exit(1);
    }
    println!("all required acceptance criteria passed");
}

fn wrap(c: Check) -> Outcome {
    match c {
        Ok(m) => Outcome::Pass(m),
        Err(m) => Outcome::Fail(m),
    }
}
