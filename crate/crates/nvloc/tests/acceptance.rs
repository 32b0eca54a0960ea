//! Acceptance suite: one `[PASS]`/`[FAIL]` line per criterion.
//!
//! Runs without the libtest harness so the lines print in order and
//! uncaptured. Exits nonzero if any criterion fails.

use std::collections::BTreeSet;
use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::time::Instant;

use astro_float::{BigFloat, Consts, Radix, RoundingMode};
use nvloc::config::RunConfig;
use nvloc::run::{LocateReport, Options, Run};
use nvloc_core::bath::{pair_cluster_coherence, BathPair, BathSpec};
use nvloc_core::coherence::{coherence_curve, dip_time, CurveEvaluator, EngineKind, Scenario, TimeGrid};
use nvloc_core::geometry::{from_polar, polar_coordinates};
use nvloc_core::linalg::{eigh, kron_all, spin_operators, ComplexMatrix};
use nvloc_core::nv::{nv_eigensystem, renormalization_factor, sensor_larmor, FieldConfig, SensorConfig, TargetSpec};
use nvloc_core::positioning::extract_features;
use nvloc_core::sequence::{cpmg_filter, cpmg_times};
use nvloc_core::{units, Vec3};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn example(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("examples").join(name)
}

fn main() {
    let criteria: Vec<(&str, fn() -> Outcome)> = vec![
        ("1 renormalization factor", renormalization),
        ("2 filter-function equivalence", filter_equivalence),
        ("3 engine cross-validation", engine_cross_validation),
        ("4 dip-time law", dip_time_law),
        ("5+6 three-sensor positioning and displacement", three_sensor_positioning),
        ("7 range extension", range_extension),
        ("8 bath protection", bath_protection),
        ("9 symmetry and determinism", symmetry_and_determinism),
    ];
    let mut failed = 0;
    for (name, f) in criteria {
        let started = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(f))
            .unwrap_or_else(|e| outcome(false, format!("panicked: {}", panic_message(&e))));
        for (k, line) in result.detail.lines().enumerate() {
            if k == 0 {
                let tag = if result.pass { "PASS" } else { "FAIL" };
                println!("[{tag}] {name}: {line} ({:.1} s)", started.elapsed().as_secs_f64());
            } else {
                println!("       {line}");
            }
        }
        failed += usize::from(!result.pass);
    }
    if failed > 0 {
        println!("{failed} criterion group(s) failed");
        std::process::exit(1);
    }
}

fn panic_message(e: &Box<dyn std::any::Any + Send>) -> String {
    e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default()
}

// 1 ---------------------------------------------------------------------

fn renormalization() -> Outcome {
    let sensor = SensorConfig::new("A", Vec3::ZERO, 3.0);
    let lambda = |gauss: f64| {
        let field = FieldConfig::along_111(gauss);
        renormalization_factor(sensor.strain, sensor_larmor(&sensor, &field)).unwrap()
    };
    let (hi, lo) = (lambda(0.2), lambda(0.05));
    let pass = (hi - 0.18).abs() <= 0.005 && (lo - 0.05).abs() <= 0.005;
    outcome(pass, format!("lambda(0.2 G) = {hi:.4} (0.18 +- 0.005), lambda(0.05 G) = {lo:.4} (0.05 +- 0.005)"))
}

// 2 ---------------------------------------------------------------------

/// F(ω) = |Σ_k (−1)^k (e^{iωt_{k+1}} − e^{iωt_k})| over the CPMG pulse
/// times, summed in 256-bit arithmetic.
fn filter_direct_bigfloat(n: usize, omega: f64, t: f64, cc: &mut Consts) -> f64 {
    let p = 256;
    let rm = RoundingMode::ToEven;
    let w = BigFloat::from_f64(omega, p);
    let total = BigFloat::from_f64(t, p);
    let two_n = BigFloat::from_u64(2 * n as u64, p);
    let mut bounds = vec![BigFloat::from_u64(0, p)];
    for k in 1..=n {
        bounds.push(total.mul(&BigFloat::from_u64(2 * k as u64 - 1, p), p, rm).div(&two_n, p, rm));
    }
    bounds.push(total.clone());
    let mut re = BigFloat::from_u64(0, p);
    let mut im = BigFloat::from_u64(0, p);
    let mut prev = (BigFloat::from_u64(1, p), BigFloat::from_u64(0, p));
    for (j, tk) in bounds.iter().enumerate().skip(1) {
        let ph = w.mul(tk, p, rm);
        let cur = (ph.cos(p, rm, cc), ph.sin(p, rm, cc));
        let (dr, di) = (cur.0.sub(&prev.0, p, rm), cur.1.sub(&prev.1, p, rm));
        if j % 2 == 1 {
            re = re.add(&dr, p, rm);
            im = im.add(&di, p, rm);
        } else {
            re = re.sub(&dr, p, rm);
            im = im.sub(&di, p, rm);
        }
        prev = cur;
    }
    let norm = re.mul(&re, p, rm).add(&im.mul(&im, p, rm), p, rm).sqrt(p, rm);
    norm.format(Radix::Dec, rm, cc).unwrap().parse().unwrap()
}

fn filter_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut cc = Consts::new().unwrap();
    let mut worst = (0.0f64, 0usize, 0.0, 0.0);
    for _ in 0..1000 {
        let n = rng.random_range(1..=64usize);
        let omega = rng.random_range(-40.0..40.0);
        let t = rng.random_range(0.1..300.0);
        let closed = cpmg_filter(n, omega, t);
        let direct = filter_direct_bigfloat(n, omega, t, &mut cc);
        let rel = (closed - direct).abs() / direct;
        if rel > worst.0 {
            worst = (rel, n, omega, t);
        }
    }
    let mut dip_err = 0.0f64;
    for n in 1..=64usize {
        for q in 1..=3usize {
            let t = rng.random_range(1.0..200.0);
            let omega = PI * (2 * q - 1) as f64 * n as f64 / t;
            let f = cpmg_filter(n, omega, t);
            dip_err = dip_err.max((f - 2.0 * n as f64).abs() / (2.0 * n as f64));
        }
    }
    let pass = worst.0 < 1e-10 && dip_err < 1e-12;
    outcome(
        pass,
        format!(
            "1000 random (w, t, N<=64): max relative error {:.2e} (< 1e-10) at N={} w={:.4} t={:.4}; \
             max |F/2N - 1| at the dip {dip_err:.1e} (< 1e-12)",
            worst.0, worst.1, worst.2, worst.3
        ),
    )
}

// 3 ---------------------------------------------------------------------

/// A target at (r, θ, φ) in the sensor frame.
fn scenario(strain: f64, gauss: f64, r: f64, theta: f64, phi: f64) -> Scenario {
    let s = SensorConfig::new("S", Vec3::ZERO, strain);
    let pos = from_polar(Vec3::ZERO, &s.frame().unwrap(), r, theta, phi);
    Scenario::new(s, FieldConfig::along_111(gauss)).with_target(TargetSpec::electron(pos))
}

/// κ = λ|A|/ω′ and x = λA_⊥N/ω′ of a single-target scenario.
fn coupling(sc: &Scenario, n: usize) -> (f64, f64, f64, f64) {
    let spin = sc.env_spins().unwrap()[0];
    let lambda = nv_eigensystem(&sc.sensor, &sc.field).unwrap().lambda;
    let w = spin.larmor + lambda * spin.a_z() / 2.0;
    let kappa = lambda * spin.a_perp().hypot(spin.a_z()) / w;
    (kappa, lambda * spin.a_perp() * n as f64 / w, lambda, spin.a_z())
}

fn random_scenario(rng: &mut ChaCha8Rng) -> (Scenario, f64, f64) {
    let sc = scenario(
        rng.random_range(1.0..5.0),
        rng.random_range(0.05..0.3),
        rng.random_range(5.0..30.0),
        rng.random_range(2.0f64..88.0).to_radians(),
        rng.random_range(0.0..2.0 * PI),
    );
    let omega_e = sc.field.larmor(units::gamma_nv());
    (sc, omega_e, 0.0)
}

fn engine_cross_validation() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    let mut accepted = 0;
    while accepted < 50 {
        let (sc, omega_e, _) = random_scenario(&mut rng);
        let n = rng.random_range(10..=60usize);
        if coupling(&sc, n).0 > 0.01 {
            continue;
        }
        accepted += 1;
        let times = TimeGrid::first_dip(n, omega_e, 2000).unwrap().times();
        let ex = coherence_curve(&sc, n, &times, EngineKind::Exact).unwrap();
        let mg = coherence_curve(&sc, n, &times, EngineKind::Magnus).unwrap();
        for (a, b) in ex.values.iter().zip(&mg.values) {
            worst = worst.max((a - b).abs());
        }
    }
    let mut worst_sc = 0.0f64;
    let mut checked = 0;
    while checked < 50 {
        let (sc, omega_e, _) = random_scenario(&mut rng);
        let n = rng.random_range(1..=5usize);
        let (kappa, _, lambda, a_z) = coupling(&sc, n);
        if kappa > 0.01 {
            continue;
        }
        checked += 1;
        let t = dip_time(n, 1, omega_e, lambda, a_z).unwrap();
        let m = CurveEvaluator::new(&sc, n, EngineKind::Magnus).unwrap().eval(t).unwrap();
        let s = CurveEvaluator::new(&sc, n, EngineKind::Semiclassical).unwrap().eval(t).unwrap();
        worst_sc = worst_sc.max((m - s).abs());
    }
    let pass = worst < 1e-3 && worst_sc < 1e-3;
    outcome(
        pass,
        format!(
            "50 weak-coupling scenarios (kappa <= 0.01): max |L_exact - L_magnus| = {worst:.2e} (< 1e-3); \
             50 with N <= 5: max depth |magnus - semiclassical| = {worst_sc:.2e} (< 1e-3)"
        ),
    )
}

// 4 ---------------------------------------------------------------------

fn dip_time_law() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst = [0.0f64; 2];
    let mut accepted = 0;
    while accepted < 20 {
        let (sc, omega_e, _) = random_scenario(&mut rng);
        let n = rng.random_range(100..=160usize);
        let (kappa, x, lambda, a_z) = coupling(&sc, n);
        if kappa > 0.01 || !(0.05..=1.5).contains(&x) {
            continue;
        }
        accepted += 1;
        let centre = PI * n as f64 / omega_e;
        let step = centre / 1999.0;
        for q in [1usize, 2] {
            let t6 = dip_time(n, q, omega_e, lambda, a_z).unwrap();
            let c = centre * (2 * q - 1) as f64;
            let grid = TimeGrid::new(c - 0.5 * centre, c + 0.5 * centre, 2000).unwrap();
            let curve = coherence_curve(&sc, n, &grid.times(), EngineKind::Exact).unwrap();
            let k = (0..curve.values.len()).min_by(|&a, &b| curve.values[a].total_cmp(&curve.values[b])).unwrap();
            worst[q - 1] = worst[q - 1].max((curve.times[k] - t6).abs() / step);
        }
    }
    let pass = worst[0] <= 1.0 && worst[1] <= 1.0;
    outcome(
        pass,
        format!(
            "20 scenarios, N in [100,160]: argmin offset from the dip-time law {:.2} steps (q=1), {:.2} steps (q=2 at 3x); limit 1",
            worst[0], worst[1]
        ),
    )
}

// 5, 6 ------------------------------------------------------------------

/// (R, θ in degrees) of the target as seen by each sensor.
fn sensor_view(run: &Run) -> Vec<(f64, f64)> {
    let t = run.cfg.target.unwrap().position;
    run.cfg
        .sensors
        .iter()
        .map(|s| {
            let (r, th, _) = polar_coordinates(t - s.position, &s.frame().unwrap());
            (r, th.to_degrees())
        })
        .collect()
}

fn truth_region_resolution(report: &LocateReport) -> Option<(f64, f64)> {
    let truth = report.truth?;
    let e = &report.estimate;
    e.regions.iter().find(|r| r.contains(truth, e.voxel)).map(|r| (r.resolution, r.max_extent))
}

fn three_sensor_positioning() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let opts = Options { config: example("three_sensors.toml"), out: Some(dir.path().join("base")), ..Options::default() };
    let run = Run::new(&opts).unwrap();
    run.simulate().unwrap();
    let built = Instant::now();
    let lib = run.library().unwrap();
    let build_s = built.elapsed().as_secs_f64();
    let report = run.locate().unwrap();

    let reference = [("A", [7.40, 7.50], [18.4, 20.0]), ("B", [8.64, 8.76], [32.2, 34.2]), ("C", [8.64, 8.96], [33.0, 36.0])];
    let grid = run.cfg.library.as_ref().unwrap().grid;
    let (hr, ht) = (grid.r.step / 2.0, grid.theta.step.to_degrees() / 2.0);
    let mut pass5 = true;
    let mut lines = Vec::new();
    for ((m, (r, th)), (id, cr, ct)) in report.sensors.iter().zip(sensor_view(&run)).zip(reference) {
        let containing = m.intervals.iter().find(|b| {
            r >= b.r_nm[0] - hr && r <= b.r_nm[1] + hr && th >= b.theta_deg[0] - ht && th <= b.theta_deg[1] + ht
        });
        match containing {
            None => {
                pass5 = false;
                lines.push(format!("{id}: no interval contains the truth R={r:.2}, theta={th:.2}"));
            }
            Some(b) => {
                let wr = (b.r_nm[1] - b.r_nm[0]) / (cr[1] - cr[0]);
                let wt = (b.theta_deg[1] - b.theta_deg[0]) / (ct[1] - ct[0]);
                let ok = (0.5..=2.0).contains(&wr) && (0.5..=2.0).contains(&wt);
                pass5 &= ok;
                lines.push(format!(
                    "{id}: R in [{:.2}, {:.2}] nm (width x{wr:.2} of reference), theta in [{:.1}, {:.1}] deg (x{wt:.2}){}",
                    b.r_nm[0],
                    b.r_nm[1],
                    b.theta_deg[0],
                    b.theta_deg[1],
                    if ok { "" } else { " OUTSIDE 2x" }
                ));
            }
        }
    }
    let res = truth_region_resolution(&report);
    match res {
        Some((d, ext)) => {
            pass5 &= d < 0.3;
            lines.push(format!(
                "region with the truth: resolution {d:.3} nm (< 0.3; equal-volume sphere diameter), bounding-box extent {ext:.3} nm"
            ));
        }
        None => {
            pass5 = false;
            lines.push("no region contains the truth".into());
        }
    }
    if report.estimate.regions.len() > 1 {
        lines.push(format!("{} regions in total (ambiguous)", report.estimate.regions.len()));
    }
    let spot = lib.sensors.iter().filter_map(|s| s.spot_check.as_ref().map(|c| c.max_depth_abs)).fold(0.0, f64::max);
    lines.push(format!("library build {build_s:.0} s for 3 x {} cells; Magnus spot check max |d depth| {spot:.3}", lib.sensors[0].cells));

    // 6: the same libraries against curves of a displaced target.
    let (base_sensors, base_matches) = run.match_sensors().unwrap();
    let _ = base_sensors;
    let original: BTreeSet<_> = run.consistent_voxels(&base_matches).unwrap().into_iter().collect();
    let mut pass6 = !original.is_empty();
    let (mut raw, src) = RunConfig::load(&opts.config).unwrap();
    for (k, d) in [[0.6, 0.0, 0.0], [-0.6, 0.0, 0.0], [0.0, 0.6, 0.0], [0.0, -0.6, 0.0], [0.0, 0.0, 0.6], [0.0, 0.0, -0.6]]
        .into_iter()
        .enumerate()
    {
        raw.target.as_mut().unwrap().displacement = Some(d);
        let cfg = raw.resolve(Some(&src)).unwrap();
        let out = dir.path().join(format!("moved{k}"));
        std::fs::create_dir_all(&out).unwrap();
        for s in &cfg.sensors {
            let name = format!("library_{}.nvlib", s.id);
            std::fs::copy(run.out.join(&name), out.join(&name)).unwrap();
        }
        let moved = Run::from_resolved(cfg, out, None, false).unwrap();
        moved.simulate().unwrap();
        let (_, matches) = moved.match_sensors().unwrap();
        let voxels: BTreeSet<_> = moved.consistent_voxels(&matches).unwrap().into_iter().collect();
        let shared = voxels.intersection(&original).count();
        let report = moved.locate().unwrap();
        let ok = !voxels.is_empty() && shared == 0;
        pass6 &= ok;
        lines.push(format!(
            "6: displaced {d:?} nm: {} voxels, {shared} shared with the original {} ({}); displaced truth {}",
            voxels.len(),
            original.len(),
            if ok { "disjoint" } else { "NOT disjoint" },
            if report.truth_contained == Some(true) { "recovered" } else { "not recovered" }
        ));
    }
    let head = format!("5: {}; 6: {}", if pass5 { "pass" } else { "FAIL" }, if pass6 { "pass" } else { "FAIL" });
    outcome(pass5 && pass6, std::iter::once(head).chain(lines).collect::<Vec<_>>().join("\n"))
}

// 7 ---------------------------------------------------------------------

fn range_extension() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let opts = Options { config: example("long_range.toml"), out: Some(dir.path().to_path_buf()), ..Options::default() };
    let run = Run::new(&opts).unwrap();
    let sim = run.simulate().unwrap();
    let mut pass = run.cfg.pulses == 100;
    let mut lines = Vec::new();
    let depths: Vec<String> = sim
        .sensors
        .iter()
        .map(|s| match &s.first_dip {
            Some(d) => {
                pass &= d.depth < 0.9;
                format!("{} {:.3}", s.id, d.depth)
            }
            None => {
                pass = false;
                format!("{} none", s.id)
            }
        })
        .collect();
    lines.push(format!("CPMG-100 dip depths {} (< 0.9)", depths.join(", ")));
    run.library().unwrap();
    let report = run.locate().unwrap();
    match truth_region_resolution(&report) {
        Some((d, ext)) => {
            pass &= d < 1.0;
            lines.push(format!("region with the truth: resolution {d:.3} nm (< 1), extent {ext:.3} nm"));
        }
        None => {
            pass = false;
            lines.push("no region contains the truth".into());
        }
    }
    if report.estimate.regions.len() > 1 {
        let others: Vec<String> = report.estimate.regions.iter().map(|r| format!("{:.2} nm{}", r.resolution, if r.mirror_branch { " (mirror)" } else { "" })).collect();
        lines.push(format!("{} regions: {}", others.len(), others.join(", ")));
    }
    // R = 20 nm, θ = 30°, sensor A.
    let sc = scenario(3.0, 0.1, 20.0, 30f64.to_radians(), 0.0);
    let omega_e = sc.field.larmor(units::gamma_nv());
    let times = TimeGrid::first_dip(100, omega_e, 2000).unwrap().times();
    let far = extract_features(&coherence_curve(&sc, 100, &times, EngineKind::Exact).unwrap());
    match far {
        Some(d) => {
            pass &= d.depth < 0.99;
            lines.push(format!("R = 20 nm, theta = 30 deg: dip depth {:.4} (< 0.99)", d.depth));
        }
        None => {
            pass = false;
            lines.push("R = 20 nm, theta = 30 deg: no dip".into());
        }
    }
    outcome(pass, lines.join("\n"))
}

// 8 ---------------------------------------------------------------------

/// Secular Hamiltonians of two spin-1/2 nuclei in both sensor branches.
fn pair_branches(a1: f64, a2: f64, dzz: f64, zeeman: f64) -> (ComplexMatrix, ComplexMatrix) {
    let (sx, sy, sz) = spin_operators(0.5).unwrap();
    let i2 = ComplexMatrix::identity(2);
    let op = |a: &ComplexMatrix, b: &ComplexMatrix| kron_all(&[a.clone(), b.clone()]).unwrap();
    let z1 = op(&sz, &i2);
    let z2 = op(&i2, &sz);
    let flip = op(&sx, &sx).add(&op(&sy, &sy)).unwrap();
    let dip = op(&sz, &sz).sub(&flip.scale_real(0.5)).unwrap().scale_real(dzz);
    let bare = z1.add(&z2).unwrap().scale_real(zeeman).add(&dip).unwrap();
    let plus = bare.add(&z1.scale_real(a1)).unwrap().add(&z2.scale_real(a2)).unwrap();
    (plus, bare)
}

/// (1/4) Tr[U₀† U₊] by propagating every free segment of CPMG-N.
fn brute_force(hp: &ComplexMatrix, h0: &ComplexMatrix, n: usize, t: f64) -> Complex64 {
    let (ep, e0) = (eigh(hp).unwrap(), eigh(h0).unwrap());
    let mut up = ComplexMatrix::identity(4);
    let mut u0 = ComplexMatrix::identity(4);
    for (dt, sign) in cpmg_times(n, t).unwrap().segments() {
        let (a, b) = (ep.propagator(dt), e0.propagator(dt));
        let (p, z) = if sign > 0.0 { (a, b) } else { (b, a) };
        up = p.matmul(&up).unwrap();
        u0 = z.matmul(&u0).unwrap();
    }
    u0.adjoint().matmul(&up).unwrap().trace() / 4.0
}

fn bath_protection() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let opts = Options { config: example("bath.toml"), out: Some(dir.path().to_path_buf()), ..Options::default() };
    let run = Run::new(&opts).unwrap();
    let b = run.cfg.bath.clone().unwrap();
    let natural = BathSpec::natural(0);
    let mut pass = b.realizations >= 5 && run.cfg.pulses == 30 && b.spec.abundance == natural.abundance;
    let summary = run.bath().unwrap();
    let text = std::fs::read_to_string(dir.path().join(&summary.file)).unwrap();
    let mut min_mean = f64::INFINITY;
    let mut at = 0.0;
    for line in text.lines().filter(|l| !l.starts_with('#')).skip(1) {
        let cols: Vec<f64> = line.split(',').map(|c| c.parse().unwrap()).collect();
        if cols[0] < 1000.0 && cols[1] < min_mean {
            min_mean = cols[1];
            at = cols[0];
        }
    }
    pass &= min_mean > 0.9;
    let pairs: Vec<usize> = summary.realizations.iter().map(|r| r.pairs).collect();

    // CCE-2 pair factor against brute-force evolution of the two nuclei.
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let (a1, a2) = (rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5));
        let dzz = rng.random_range(-0.01..0.01);
        let zeeman = rng.random_range(0.0..0.01);
        let n = rng.random_range(1..=40usize);
        let t = rng.random_range(1.0..1000.0);
        let (hp, h0) = pair_branches(a1, a2, dzz, zeeman);
        let pair = BathPair { i: 0, j: 1, dzz, detuning: a1 - a2 };
        worst = worst.max((brute_force(&hp, &h0, n, t) - pair_cluster_coherence(&pair, n, t)).norm());
    }
    // Pairs of a generated realization, with their own couplings.
    let bath = nvloc_core::bath::generate_bath(&b.spec, &run.cfg.sensors[b.sensor], &run.cfg.field).unwrap();
    let zeeman = bath.gamma_n.abs() * run.cfg.field.magnitude;
    for p in bath.pairs.iter().step_by((bath.pairs.len() / 50).max(1)) {
        let (hp, h0) = pair_branches(bath.spins[p.i].secular, bath.spins[p.j].secular, p.dzz, zeeman);
        for t in [100.0, 500.0, 1000.0] {
            worst = worst.max((brute_force(&hp, &h0, 30, t) - pair_cluster_coherence(p, 30, t)).norm());
        }
    }
    pass &= worst < 1e-10;
    outcome(
        pass,
        format!(
            "{} seeds, CPMG-30: min seed-averaged L_bath for t < 1 ms = {min_mean:.5} at {at:.0} us (> 0.9); pairs per seed {pairs:?}\n\
             CCE-2 pair factor vs brute-force 4-level evolution: max |diff| {worst:.1e} (< 1e-10)",
            summary.realizations.len()
        ),
    )
}

// 9 ---------------------------------------------------------------------

fn dir_contents(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
        })
        .collect();
    files.sort();
    files
}

fn symmetry_and_determinism() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let (strain, gauss) = (rng.random_range(1.0..5.0), rng.random_range(0.05..0.3));
        let (r, th, ph) = (rng.random_range(5.0..30.0), rng.random_range(0.0..PI / 2.0), rng.random_range(0.0..2.0 * PI));
        let n = rng.random_range(1..=100usize);
        let omega_e = FieldConfig::along_111(gauss).larmor(units::gamma_nv());
        let times = TimeGrid::first_dip(n, omega_e, 400).unwrap().times();
        for engine in [EngineKind::Exact, EngineKind::Magnus] {
            let a = coherence_curve(&scenario(strain, gauss, r, th, ph), n, &times, engine).unwrap();
            let b = coherence_curve(&scenario(strain, gauss, r, PI - th, ph), n, &times, engine).unwrap();
            for (x, y) in a.values.iter().zip(&b.values) {
                worst = worst.max((x - y).abs());
            }
        }
    }
    let mut pass = worst <= 1e-12;

    // Every verb, once single-threaded and once with four workers.
    let root = tempfile::tempdir().unwrap();
    let config = root.path().join("det.toml");
    let src = std::fs::read_to_string(example("three_sensors.toml"))
        .unwrap()
        .replace("r = [5.0, 30.0, 0.02]", "r = [8.0, 9.0, 0.05]")
        .replace("theta_deg = [0.0, 90.0, 0.2]", "theta_deg = [15.0, 40.0, 0.5]")
        .replace("[output]", "[bath]\ncutoff = 3.0\nrealizations = 2\nsamples = 21\n\n[output]");
    std::fs::write(&config, src).unwrap();
    let mut outputs = Vec::new();
    for threads in [1usize, 4] {
        let out = root.path().join(format!("t{threads}"));
        let opts = Options { config: config.clone(), out: Some(out.clone()), threads: Some(threads), seed: Some(11), ..Options::default() };
        let run = Run::new(&opts).unwrap();
        run.simulate().unwrap();
        run.library().unwrap();
        run.locate().unwrap();
        run.bath().unwrap();
        outputs.push(dir_contents(&out));
    }
    let identical = outputs[0] == outputs[1];
    pass &= identical;
    let names: Vec<&str> = outputs[0].iter().map(|(n, _)| n.as_str()).collect();
    outcome(
        pass,
        format!(
            "theta <-> 180-theta: max |dL| {worst:.1e} over 20 scenarios x 2 engines (<= 1e-12); \
             {} output files byte-identical across 1 and 4 threads: {identical}\nfiles: {}",
            names.len(),
            names.join(" ")
        ),
    )
}
