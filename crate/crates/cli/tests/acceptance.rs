//! Exit criteria. Each test prints one `criterion N: PASS|FAIL` line with the
//! measured quantities, then asserts the same verdict.

use std::io::Write;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::Rng;

use scosep::distributions::{DistSpec, Sample, SampleB};
use scosep::losses::LossSpec;
use scosep::relunet::{approx_smooth, build_fa_network, build_fb_network, fa_features, fb_features, pwl_to_relu, PiecewiseLinear};
use scosep::rng::{Domain, StreamKey};
use scosep::verify::{self, Verdict, VerifyOptions};
use scosep_cli::experiments::{self, Axis, ExperimentId, ExperimentSpec, RunOutput};

fn report(id: u32, pass: bool, started: Instant, limit: Duration, detail: String) {
    let elapsed = started.elapsed();
    let pass = pass && elapsed < limit;
    // Written to the raw stream so passing criteria show up in plain
    // `cargo test` output as well.
    let _ = writeln!(
        std::io::stderr().lock(),
        "criterion {id}: {} {detail}; {:.1}s (limit {}s)",
        if pass { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64(),
        limit.as_secs()
    );
    assert!(pass, "criterion {id} failed: {detail}");
}

fn spec(id: ExperimentId, trials: u64) -> ExperimentSpec {
    ExperimentSpec { trials: Some(trials), ..ExperimentSpec::new(id) }
}

fn mean(out: &RunOutput, metric: &str) -> f64 {
    out.summary.metric(metric).map_or(f64::NAN, |m| m.mean)
}

fn values<'a>(out: &'a RunOutput, metric: &'a str) -> impl Iterator<Item = f64> + 'a {
    out.records.iter().filter(move |r| r.metric == metric).map(|r| r.value)
}

#[test]
fn criterion_1_sgd_rate() {
    let t0 = Instant::now();
    let out = experiments::sweep(&spec(ExperimentId::SgdRate, 50), Axis::N, &[64.0, 256.0, 1024.0, 4096.0]).unwrap();
    let slope = out.summary.loglog_slope.unwrap_or(f64::NAN);
    let pass = (-0.65..=-0.35).contains(&slope);
    report(1, pass, t0, Duration::from_secs(60), format!("slope {slope:.4} in [-0.65, -0.35], means {:?}", out.summary.means));
}

#[test]
fn criterion_2_erm_rerm_failure() {
    let t0 = Instant::now();
    let out = experiments::run(&spec(ExperimentId::SgdVsRerm, 100)).unwrap();
    let found = mean(&out, "special_found");
    // Recorded only on trials where the special coordinate exists.
    let separated = mean(&out, "rerm_separated");
    let per_lambda = mean(&out, "rerm_lambda_pass_frac");
    let sgd = mean(&out, "sgd_excess");
    let pass = found >= 0.85 && separated >= 0.6 && sgd <= 0.3;
    report(
        2,
        pass,
        t0,
        Duration::from_secs(300),
        format!(
            "found {found:.3} (>= 0.85), every-lambda winner excess >= 0.1 in {separated:.3} of found trials (>= 0.6), \
             per-lambda pass fraction {per_lambda:.3}, SGD excess {sgd:.4} (<= 0.3)"
        ),
    );
}

#[test]
fn criterion_3_kink_trap() {
    let t0 = Instant::now();
    let out = experiments::run(&spec(ExperimentId::GdKinkTrap, 50)).unwrap();
    let n = out.summary.n as f64;
    let trapped = mean(&out, "trapped");
    let formula = 1.0 / (4.0 * n.powf(0.375));
    let floor = formula.max(0.0139);
    let min_excess = values(&out, "trapped_excess").fold(f64::INFINITY, f64::min);
    let sgd = mean(&out, "sgd_reached");
    let gd = mean(&out, "gd_large_reached");
    let pass = trapped >= 0.6 && min_excess >= floor && sgd >= 0.9 && gd >= 0.9;
    let detail = format!(
        "n {n}: trapped {trapped:.3} (>= 0.6), min trapped excess {min_excess:.4} (>= {formula:.4} and 0.0139), \
         reached 3/4 at large step: SGD {sgd:.3}, GD {gd:.3} (each >= 0.9)"
    );
    // Context only: at n = 16 the small step actually reaches the kinks.
    let small = experiments::run(&ExperimentSpec { n: Some(16), ..spec(ExperimentId::GdKinkTrap, 50) }).unwrap();
    println!(
        "  n 16 small-step GD: trapped {:.3}, mean final w {:.3}, excess {:.4}",
        mean(&small, "trapped"),
        mean(&small, "final_w"),
        mean(&small, "trapped_excess")
    );
    report(3, pass, t0, Duration::from_secs(180), detail);
}

#[test]
fn criterion_4_drift_lower_bound() {
    let t0 = Instant::now();
    let out = experiments::run(&spec(ExperimentId::GdDrift, 2000)).unwrap();
    let bad = mean(&out, "bad_dataset");
    let bad_count = values(&out, "bad_dataset").filter(|&v| v == 1.0).count();
    let failures = values(&out, "last_bound_holds").filter(|&v| v != 1.0).count();
    let checked = values(&out, "last_bound_holds").count();
    let pass = bad >= 0.012 && failures == 0 && checked == bad_count;
    report(
        4,
        pass,
        t0,
        Duration::from_secs(60),
        format!("bad-dataset frequency {bad:.4} (>= 0.012), iterate bound failures {failures} of {checked}"),
    );
}

#[test]
fn criterion_5_multipass_gain() {
    let t0 = Instant::now();
    let s = ExperimentSpec { n: Some(64), d: Some(64), ..spec(ExperimentId::MultipassGain, 30) };
    let out = experiments::sweep(&s, Axis::K, &[1.0, 4.0, 16.0]).unwrap();
    let u_err = out
        .records
        .iter()
        .filter(|r| r.metric == "u_traversal_err")
        .map(|r| r.value)
        .fold(0.0, f64::max);
    let means = &out.summary.means;
    let decreasing = means.windows(2).all(|w| w[1] < w[0]);
    let ratio = means[2] / means[0];
    let pass = u_err <= 1e-9 && decreasing && ratio <= 0.6;
    report(
        5,
        pass,
        t0,
        Duration::from_secs(180),
        format!("max u error {u_err:.2e} (<= 1e-9), means {means:?} strictly decreasing {decreasing}, ratio {ratio:.3} (<= 0.6)"),
    );
}

#[test]
fn criterion_6_network_separation() {
    let t0 = Instant::now();
    let out = experiments::run(&spec(ExperimentId::NnErmFail, 500)).unwrap();
    let found = mean(&out, "special_found");
    let worst_empirical = values(&out, "erm_empirical").fold(0.0, f64::max);
    let excess = mean(&out, "erm_excess");
    let big = experiments::run(&ExperimentSpec { n: Some(256), d: Some(64), ..spec(ExperimentId::NnErmFail, 100) }).unwrap();
    let sgd = mean(&big, "sgd_excess");
    let pass = found >= 0.85 && worst_empirical == 0.0 && (excess - 0.25).abs() <= 0.01 && sgd <= 0.3;
    report(
        6,
        pass,
        t0,
        Duration::from_secs(180),
        format!(
            "found {found:.3} of 500 (>= 0.85), max ERM empirical loss {worst_empirical}, ERM excess {excess:.4} (0.25 +- 0.01), \
             SGD excess at n 256 d 64 {sgd:.4} (<= 0.3)"
        ),
    );
}

#[test]
fn criterion_7_oracle_suite() {
    let t0 = Instant::now();
    let reports = verify::run_all(&VerifyOptions::default()).unwrap();
    let failing: Vec<String> = reports
        .iter()
        .filter(|r| r.verdict != Verdict::Pass)
        .map(|r| format!("{} {}/{}", r.id, r.passes, r.trials))
        .collect();
    print!("{}", verify::format_table(&reports));
    report(
        7,
        failing.is_empty(),
        t0,
        Duration::from_secs(300),
        format!("{} oracle reports, not passing: [{}]", reports.len(), failing.join(", ")),
    );
}

#[test]
fn criterion_8_relu_compiler() {
    let t0 = Instant::now();
    let mut rng = StreamKey::new(8, Domain::Oracle).stream(0);
    let mut pwl_err: f64 = 0.0;
    for _ in 0..100 {
        let k = rng.gen_range(1..16);
        let mut ends: Vec<f64> = (0..k).map(|_| rng.gen_range(-10.0..10.0)).collect();
        ends.sort_by(f64::total_cmp);
        ends.dedup();
        let slopes: Vec<f64> = (0..=ends.len()).map(|_| rng.gen_range(-4.0..4.0)).collect();
        let a1 = ends[0];
        let v1 = rng.gen_range(-3.0..3.0);
        // Independent evaluation: walk the pieces from the first endpoint.
        let reference = |x: f64| {
            if x <= a1 {
                return v1 + slopes[0] * (x - a1);
            }
            let mut v = v1;
            for i in 0..ends.len() {
                let right = ends.get(i + 1).copied().unwrap_or(f64::INFINITY);
                if x <= right {
                    return v + slopes[i + 1] * (x - ends[i]);
                }
                v += slopes[i + 1] * (right - ends[i]);
            }
            unreachable!()
        };
        let f = PiecewiseLinear::new(ends.clone(), v1, slopes.clone()).unwrap();
        let net = pwl_to_relu(&f).unwrap();
        for _ in 0..200 {
            let x = rng.gen_range(-15.0..15.0);
            pwl_err = pwl_err.max((net.eval(x) - reference(x)).abs());
        }
    }

    let sq = approx_smooth(|x| x * x, |x| 2.0 * x, 0.0, 1.0, 2.0, 2.0, 0.1).unwrap();
    let grid = 1000;
    let mut value_err: f64 = 0.0;
    let mut slope_err: f64 = 0.0;
    for i in 0..=grid {
        let x = i as f64 / grid as f64;
        value_err = value_err.max((sq.combo.eval(x) - x * x).abs());
        // Slopes are probed off the breakpoints.
        if i < grid {
            let xm = (i as f64 + 0.5) / grid as f64;
            slope_err = slope_err.max((sq.combo.slope(xm) - 2.0 * xm).abs());
        }
    }

    let d = 9;
    let c_n = 0.25 * 0.5;
    let fa = build_fa_network(d);
    let fb = build_fb_network(d, c_n);
    let mut net_err: f64 = 0.0;
    for t in 0..1000 {
        let w: Vec<f64> = (0..d).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let alpha = t % (d + 1);
        let z = match (DistSpec::D { delta: 0.1, p: 0.5, a: alpha, d }).sample(&mut rng) {
            Sample::A(s) => s,
            _ => unreachable!(),
        };
        let net = z.y as f64 * fa.forward(&w, &fa_features(&z)).unwrap();
        net_err = net_err.max((net - LossSpec::Fa { d }.value(&w, &Sample::A(z.clone()))).abs());
        let zb = SampleB { x: z.x.clone(), alpha };
        let net = fb.forward(&w, &fb_features(&zb)).unwrap();
        net_err = net_err.max((net - LossSpec::Fb { d, c_n }.value(&w, &Sample::B(zb))).abs());
    }

    let pass = pwl_err <= 1e-12 && sq.intervals == 20 && value_err <= 0.1 && slope_err <= 0.1 && net_err <= 1e-12;
    report(
        8,
        pass,
        t0,
        Duration::from_secs(30),
        format!(
            "pwl max error {pwl_err:.1e}, x^2 intervals {} value error {value_err:.4} slope error {slope_err:.4}, \
             network max error {net_err:.1e}",
            sq.intervals
        ),
    );
}

fn scosep(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_scosep")).args(args).output().expect("spawn scosep")
}

fn run_twice(dir: &Path, tag: &str, args: &[&str]) -> bool {
    let mut outputs = Vec::new();
    for workers in ["1", "4"] {
        let csv = dir.join(format!("{tag}-{workers}.csv"));
        let csv_s = csv.to_str().unwrap();
        let mut full: Vec<&str> = args.to_vec();
        full.extend(["--workers", workers, "--out", csv_s]);
        let o = scosep(&full);
        assert!(o.status.success(), "{tag}: {}", String::from_utf8_lossy(&o.stderr));
        let json = scosep_cli::summary_path(&csv);
        outputs.push((std::fs::read(&csv).unwrap(), std::fs::read(json).unwrap()));
    }
    outputs[0] == outputs[1]
}

#[test]
fn criterion_9_reproducibility() {
    let t0 = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let runs: [(&str, &[&str]); 8] = [
        ("sgd-rate", &["run", "sgd-rate", "--trials", "6", "--seed", "11"]),
        ("sgd-vs-rerm", &["run", "sgd-vs-rerm", "--trials", "3", "--seed", "11", "--mc", "500"]),
        ("nn-erm-fail", &["run", "nn-erm-fail", "--trials", "6", "--seed", "11", "--mc", "500"]),
        ("gd-kink-trap", &["run", "gd-kink-trap", "--n", "16", "--T", "2000", "--trials", "6", "--seed", "11"]),
        ("gd-drift", &["run", "gd-drift", "--trials", "40", "--seed", "11"]),
        ("multipass-gain", &["run", "multipass-gain", "--n", "32", "--d", "16", "--trials", "4", "--seed", "11"]),
        ("composite", &["run", "gd-vs-sgd-composite", "--n", "64", "--trials", "4", "--seed", "11", "--mc", "500"]),
        ("sweep", &["sweep", "sgd-rate", "--axis", "n", "--values", "64,256", "--trials", "5", "--seed", "11"]),
    ];
    let mut mismatched: Vec<&str> = runs.iter().filter(|(tag, args)| !run_twice(dir.path(), tag, args)).map(|r| r.0).collect();

    let mut verify_json = Vec::new();
    for workers in ["1", "4"] {
        let out = dir.path().join(format!("verify-{workers}.json"));
        let o = scosep(&["verify", "all", "--seed", "5", "--workers", workers, "--out", out.to_str().unwrap()]);
        assert!(o.status.code().is_some_and(|c| c == 0 || c == 1), "{}", String::from_utf8_lossy(&o.stderr));
        verify_json.push(std::fs::read(out).unwrap());
    }
    if verify_json[0] != verify_json[1] {
        mismatched.push("verify");
    }

    let unknown_experiment = scosep(&["run", "no-such-experiment"]).status.code();
    let unknown_oracle = scosep(&["verify", "no-such-oracle"]).status.code();
    let pass = mismatched.is_empty() && unknown_experiment == Some(2) && unknown_oracle == Some(2);
    report(
        9,
        pass,
        t0,
        Duration::from_secs(300),
        format!(
            "{} invocations compared across 1 and 4 workers, mismatched [{}], unknown ids exit {:?}/{:?} (2)",
            runs.len() + 1,
            mismatched.join(", "),
            unknown_experiment,
            unknown_oracle
        ),
    );
}
