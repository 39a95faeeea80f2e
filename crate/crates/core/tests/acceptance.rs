//! End-to-end acceptance checks. Each test prints one PASS/FAIL line.
//!
//! Run with `cargo test -p formation-core --test acceptance -- --nocapture`.

use std::path::PathBuf;
use std::time::{Duration, Instant};

use formation_core::analysis::{
    distance_errors, lyapunov_v, max_deviation, minimally_rigid_edges, rigidity_matrix, safety_metrics, settling_step,
    verify_lyapunov_decay, DecayReport, RANK_TOLERANCE,
};
use formation_core::control::{
    consensus_input, follower_input, gradient_rigidity_input, leader_input, ControlGains, ControlMode, FormationSpec,
    LeaderBias,
};
use formation_core::potential::{
    attractive_force, detect_lmp, repulsive_force, resultant_force, total_repulsion, ApfGains, Environment,
};
use formation_core::scenarios::{
    builtin_scenario, export_trajectory, load_scenario, write_trajectory_csv, Format, Scenario, BUILTIN_NAMES,
};
use formation_core::simulation::{check_arrived, run, AgentState, Outcome, SimConfig, TrajectoryLog};
use formation_core::topology::{radius_neighbors, validate_topology, Topology};
use formation_core::Vec2;

/// Print the verdict line and any failing sub-checks, then assert.
fn report(criterion: &str, checks: &[(String, bool)]) {
    let passed = checks.iter().all(|(_, ok)| *ok);
    println!("{} {criterion}", if passed { "PASS" } else { "FAIL" });
    for (what, ok) in checks {
        println!("       [{}] {what}", if *ok { "ok" } else { "xx" });
    }
    assert!(passed, "{criterion} failed");
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * b.abs().max(f64::MIN_POSITIVE) || a == b
}

fn close_vec(a: Vec2, b: Vec2, rel: f64) -> bool {
    (a - b).norm() <= rel * b.norm() || a == b
}

fn lmp_scenario() -> Scenario {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("scenarios/lmp_escape.json");
    load_scenario(path).expect("lmp_escape.json loads")
}

fn csv_bytes(log: &TrajectoryLog) -> Vec<u8> {
    let mut buf = Vec::new();
    write_trajectory_csv(log, &mut buf).unwrap();
    buf
}

fn reproduction_checks(name: &str, with_inter_agent: bool) -> Vec<(String, bool)> {
    let scenario = builtin_scenario(name).unwrap();
    let cfg = &scenario.config;
    let start = Instant::now();
    let log = run(cfg).unwrap();
    let elapsed = start.elapsed();
    let edges = cfg.topology.edges();
    let safety = safety_metrics(&log, &cfg.formation, &edges);

    let leader_final = log.positions(log.final_step())[cfg.formation.leader()];
    let mut checks = vec![
        (
            format!("arrives by k=800: {:?}", log.outcome),
            matches!(log.outcome, Outcome::Arrived { step } if step <= 800)
                && check_arrived(leader_final, Vec2::new(14.0, 14.0), 0.5),
        ),
        (
            format!(
                "final 50 steps: max |ω|/d̃ = {:.4} < 0.05",
                safety.terminal_max_relative_error
            ),
            log.snapshots.len() >= 50 && safety.terminal_max_relative_error < 0.05,
        ),
        (
            format!("min agent-obstacle distance {:?} > 0, no abort", safety.min_obstacle),
            safety.min_obstacle.is_some_and(|d| d > 0.0) && !log.outcome.is_abort(),
        ),
        (
            format!("runtime {:.2} ms < 1 s", elapsed.as_secs_f64() * 1e3),
            elapsed < Duration::from_secs(1),
        ),
    ];
    if with_inter_agent {
        checks.push((
            format!("min inter-agent distance {:?} > 0.1", safety.min_inter_agent),
            safety.min_inter_agent.is_some_and(|d| d > 0.1),
        ));
    }
    checks
}

#[test]
fn criterion_01_triangle_reproduction() {
    report("1 triangle reproduction", &reproduction_checks("triangle", false));
}

#[test]
fn criterion_02_square_reproduction() {
    report("2 square reproduction", &reproduction_checks("square", false));
}

#[test]
fn criterion_03_hexagon_reproduction() {
    report("3 hexagon reproduction", &reproduction_checks("hexagon", true));
}

#[test]
fn criterion_04_obstacle_influence() {
    let scenario = builtin_scenario("triangle").unwrap();
    let cfg = &scenario.config;
    let leader = cfg.formation.leader();
    let target = cfg.environment.target();
    let log = run(cfg).unwrap();

    // Leader feels a nonzero repulsion while inside the field of one of the
    // first four obstacles.
    let near: Vec<Vec2> = cfg.environment.obstacles()[..4].to_vec();
    let pushed = (0..log.final_step()).filter(|&k| {
        let q = log.positions(k)[leader];
        log.records[k].agents[leader].repulsion.norm() > 0.0
            && near.iter().any(|o| q.distance(*o) <= cfg.environment.rho_m())
    });
    let pushed_steps = pushed.count();

    let path = log.path(leader);
    let deviation = max_deviation(&path, path[0], target);

    let mut free = cfg.clone();
    free.environment = cfg.environment.without_obstacles();
    let free_log = run(&free).unwrap();
    let edges = cfg.topology.edges();
    let settle = settling_step(&free_log, &free.formation, &edges, 0.05);
    let free_path = free_log.path(leader);
    let free_deviation = settle.map(|s| max_deviation(&free_path[s..], free_path[s], target));

    report(
        "4 obstacle influence",
        &[
            (
                format!("leader steps with |f_rep| > 0 near an obstacle: {pushed_steps}"),
                pushed_steps > 0,
            ),
            (format!("leader max deviation {deviation:.4} > 0.1"), deviation > 0.1),
            (
                format!(
                    "obstacle-free: settled at {settle:?}, max deviation after settling {free_deviation:?} < 0.1"
                ),
                free_deviation.is_some_and(|d| d < 0.1),
            ),
        ],
    );
}

#[test]
fn criterion_05_lmp_escape() {
    let with_srm = lmp_scenario();
    let without = with_srm.with_overrides(&["srm.enabled=false"]).unwrap();

    let stalled = run(&without.config).unwrap();
    let k_max = without.config.k_max;
    let tail = &stalled.path(0)[stalled.snapshots.len() - 51..];
    let newest = *tail.last().unwrap();
    let tail_motion = tail.iter().map(|p| p.distance(newest)).fold(0.0, f64::max);
    let mirrored = {
        let cfg = &without.config;
        let (start, target) = (cfg.positions()[0], cfg.environment.target());
        let obs = cfg.environment.obstacles();
        // Both on the x axis line through start and target, mirrored across it.
        obs.len() == 2
            && start.y == 0.0
            && target.y == 0.0
            && obs[0].x == obs[1].x
            && obs[0].y == -obs[1].y
            && obs[0].y != 0.0
            && obs[0].x > start.x
            && obs[0].x < target.x
    };
    let stall_point = stalled.positions(stalled.final_step());
    let stall_balance = {
        let cfg = &without.config;
        let rep = total_repulsion(0, &stall_point, &cfg.environment, &cfg.apf, cfg.agent_radius()).unwrap();
        resultant_force(attractive_force(stall_point[0], cfg.environment.target(), cfg.apf.eta), rep).norm()
    };

    let escaped = run(&with_srm.config).unwrap();
    let replay = run(&with_srm.config).unwrap();

    report(
        "5 local-minimum escape",
        &[
            (
                "target sits behind an obstacle pair mirrored about the start-target line".to_string(),
                mirrored,
            ),
            (
                format!("SRM off: |f_res| at stall point {stall_balance:.2e} < eps_lmp"),
                stall_balance < without.config.apf.eps_lmp,
            ),
            (
                format!("SRM off: displacement over last 50 steps {tail_motion:.2e} < 1e-4"),
                tail_motion < 1e-4,
            ),
            (
                format!("SRM off: {:?} after {} steps", stalled.outcome, stalled.final_step()),
                stalled.outcome == Outcome::NotArrived && stalled.final_step() == k_max,
            ),
            (
                format!(
                    "SRM on: {:?} with {} kick(s)",
                    escaped.outcome,
                    escaped.srm_trigger_count()
                ),
                escaped.outcome.arrival_step().is_some() && escaped.srm_trigger_count() > 0,
            ),
            (
                "SRM on: replay with the same seed is byte-identical".to_string(),
                csv_bytes(&escaped) == csv_bytes(&replay),
            ),
        ],
    );
}

#[test]
fn criterion_06_consensus() {
    let topology = validate_topology(&[vec![0, 1, 0], vec![1, 0, 1], vec![0, 1, 0]]).unwrap();
    let dt = 0.1;
    let eps = 1.0;
    let max_degree = topology.max_degree() as f64;
    let spec = FormationSpec::new(
        vec![Vec2::new(-2.0, 0.0), Vec2::new(-1.0, 0.0), Vec2::ZERO],
        2,
    )
    .unwrap();
    let starts = [Vec2::new(-3.0, 4.0), Vec2::new(5.0, -1.0), Vec2::new(0.5, 2.5)];
    let cfg = SimConfig {
        topology,
        formation: spec,
        environment: Environment::new(vec![], 1.0, Vec2::new(1e6, 1e6)).unwrap(),
        apf: ApfGains::default(),
        control: ControlGains::default(),
        mode: ControlMode::Consensus,
        leader_bias: LeaderBias::Error,
        initial_states: starts.iter().map(|&p| AgentState::new(p, 0.0)).collect(),
        k_max: 5000,
        dt,
        seed: 0,
        rho_a: None,
    };
    let log = run(&cfg).unwrap();
    let centroid = |k: usize| log.positions(k).into_iter().sum::<Vec2>() * (1.0 / 3.0);
    let c0 = centroid(0);
    let drift = (0..log.snapshots.len()).map(|k| centroid(k).distance(c0)).fold(0.0, f64::max);
    let spread = |k: usize| {
        let q = log.positions(k);
        let mut m = 0.0f64;
        for i in 0..q.len() {
            for j in i + 1..q.len() {
                m = m.max(q[i].distance(q[j]));
            }
        }
        m
    };
    let agreed = (0..log.snapshots.len()).find(|&k| spread(k) < 1e-6);

    report(
        "6 consensus correctness",
        &[
            (
                format!("dt·ε·max-degree = {} < 1", dt * eps * max_degree),
                dt * eps * max_degree < 1.0,
            ),
            (
                format!("max pairwise distance < 1e-6 first at step {agreed:?} (limit 5000)"),
                agreed.is_some_and(|k| k <= 5000),
            ),
            (format!("total centroid drift {drift:.2e} < 1e-8"), drift < 1e-8),
        ],
    );
}

fn gradient_config(dt: f64, k_max: usize) -> SimConfig {
    let triangle = builtin_scenario("triangle").unwrap().config;
    let desired = triangle.formation.placed_at(Vec2::new(2.0, 1.0));
    let nudge = [Vec2::new(0.31, -0.17), Vec2::new(-0.22, 0.27), Vec2::new(0.13, 0.41)];
    let initial_states = desired
        .iter()
        .zip(nudge)
        .map(|(&p, d)| AgentState::new(p + d, 0.0))
        .collect();
    SimConfig {
        environment: Environment::new(vec![], 1.0, Vec2::new(1e6, 1e6)).unwrap(),
        mode: ControlMode::RigidityGradient,
        control: ControlGains {
            beta: 0.1,
            ..triangle.control
        },
        initial_states,
        k_max,
        dt,
        ..triangle
    }
}

fn decay(dt: f64, horizon: f64) -> (DecayReport, SimConfig) {
    let cfg = gradient_config(dt, (horizon / dt).round() as usize);
    let log = run(&cfg).unwrap();
    let report = verify_lyapunov_decay(&log, &cfg.formation, &cfg.topology.edges(), cfg.control.beta).unwrap();
    (report, cfg)
}

#[test]
fn criterion_07_lyapunov_verification() {
    let horizon = 10.0;
    let (coarse, cfg) = decay(1e-3, horizon);
    let (fine, _) = decay(5e-4, horizon);
    let shrink = coarse.max_relative_residual / fine.max_relative_residual;
    report(
        "7 Lyapunov verification",
        &[
            (
                format!(
                    "obstacle-free rigidity-gradient triangle, β = {}, dt = 1e-3, {} steps",
                    cfg.control.beta, coarse.steps
                ),
                cfg.environment.obstacles().is_empty() && cfg.mode == ControlMode::RigidityGradient,
            ),
            (
                format!("V non-increasing at {:.4} of steps", coarse.non_increasing_fraction),
                coarse.non_increasing_fraction == 1.0,
            ),
            (
                format!("max relative residual {:.3e} < 5%", coarse.max_relative_residual),
                coarse.max_relative_residual < 0.05,
            ),
            (
                format!(
                    "residual shrinks {shrink:.3}x when dt is halved ({:.3e} -> {:.3e})",
                    coarse.max_relative_residual, fine.max_relative_residual
                ),
                shrink >= 1.5,
            ),
            (
                format!("V final / V initial = {:.3e} < 1e-6", coarse.v_final / coarse.v_initial),
                coarse.v_final < 1e-6 * coarse.v_initial,
            ),
        ],
    );
}

type Framework = (String, Vec<Vec2>, Vec<(usize, usize)>);

#[test]
fn criterion_08_rigidity_facts() {
    let mut checks = Vec::new();
    let generic = vec![Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.0), Vec2::new(0.0, 1.0)];
    let mut frameworks: Vec<Framework> =
        vec![("generic triangle".into(), generic, vec![(0, 1), (0, 2), (1, 2)])];
    for name in BUILTIN_NAMES {
        let cfg = builtin_scenario(name).unwrap().config;
        let desired = cfg.formation.placed_at(Vec2::ZERO);
        let edges = minimally_rigid_edges(&desired, &cfg.topology.edges());
        frameworks.push((format!("{name} desired shape"), desired, edges));
    }
    let collinear = vec![Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.0), Vec2::new(2.5, 0.0)];
    frameworks.push(("collinear triple".into(), collinear, vec![(0, 1), (0, 2), (1, 2)]));
    let flat_square = vec![
        Vec2::new(0.0, 0.0),
        Vec2::new(1.0, 0.0),
        Vec2::new(2.0, 0.0),
        Vec2::new(3.0, 0.0),
    ];
    frameworks.push((
        "collinear four, 5 edges".into(),
        flat_square,
        vec![(0, 1), (1, 2), (2, 3), (0, 2), (1, 3)],
    ));

    for (label, q, edges) in &frameworks {
        let n = q.len();
        let r = rigidity_matrix(q, edges).unwrap();
        let expect_rigid = !label.starts_with("collinear");
        checks.push((
            format!("{label}: rank {} vs 2N-3 = {}", r.rank, 2 * n - 3),
            if expect_rigid { r.rank == 2 * n - 3 } else { r.rank < 2 * n - 3 },
        ));
        checks.push((
            format!(
                "{label}: |E| = {}, λmin(RRᵀ) = {:.3e}, rigid = {}",
                edges.len(),
                r.min_eig_rrt,
                r.infinitesimally_rigid
            ),
            edges.len() == 2 * n - 3 && (r.min_eig_rrt > RANK_TOLERANCE) == r.infinitesimally_rigid,
        ));
    }
    report("8 rigidity facts", &checks);
}

#[test]
fn criterion_09_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let mut checks = Vec::new();
    let mut scenarios: Vec<Scenario> = BUILTIN_NAMES.iter().map(|n| builtin_scenario(n).unwrap()).collect();
    scenarios.push(lmp_scenario());
    for s in &scenarios {
        let a = dir.path().join(format!("{}_a.csv", s.name));
        let b = dir.path().join(format!("{}_b.csv", s.name));
        export_trajectory(&run(&s.config).unwrap(), &a, Format::Csv).unwrap();
        export_trajectory(&run(&s.config).unwrap(), &b, Format::Csv).unwrap();
        let (a, b) = (std::fs::read(a).unwrap(), std::fs::read(b).unwrap());
        checks.push((format!("{}: {} bytes, identical", s.name, a.len()), a == b));
    }
    report("9 determinism", &checks);
}

#[test]
fn criterion_10_unit_oracles() {
    const TOL: f64 = 1e-12;
    let mut checks: Vec<(String, bool)> = Vec::new();
    let mut check = |what: &str, ok: bool| checks.push((what.to_string(), ok));

    let q = [Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.0), Vec2::new(10.0, 0.0)];
    check("radius neighbors of agent 0 at ρ=2 is {1}", radius_neighbors(&q, 0, 2.0).unwrap() == vec![1]);

    check(
        "attraction (13,14)->(14,14), η=1 is (1,0)",
        close_vec(attractive_force(Vec2::new(13.0, 14.0), Vec2::new(14.0, 14.0), 1.0), Vec2::new(1.0, 0.0), TOL),
    );
    let f_att = attractive_force(Vec2::new(-4.0, -1.5), Vec2::new(14.0, 14.0), 0.1);
    check("attraction (-4,-1.5), η=0.1 is (1.8,1.55)", close_vec(f_att, Vec2::new(1.8, 1.55), TOL));

    let rep = repulsive_force(Vec2::new(0.5, 1.5), Vec2::new(0.0, 1.5), 1.0, 1.0).unwrap();
    check("repulsion at ρ=0.5, k_r=1, ρ_m=1 is (4,0)", close_vec(rep, Vec2::new(4.0, 0.0), TOL));

    let env = Environment::new(vec![Vec2::new(0.0, 1.5)], 1.0, Vec2::new(14.0, 14.0)).unwrap();
    let gains = ApfGains {
        k_r: 1.0,
        ..ApfGains::default()
    };
    let alone = [Vec2::new(0.5, 1.5), Vec2::new(30.0, 30.0)];
    let total = total_repulsion(0, &alone, &env, &gains, 0.5).unwrap();
    check(
        "total repulsion, single obstacle at 0.5 is magnitude 4 away",
        close_vec(total, Vec2::new(4.0, 0.0), TOL),
    );

    check(
        "resultant of (1.8,1.55) and zero",
        close_vec(resultant_force(f_att, Vec2::ZERO), Vec2::new(1.8, 1.55), TOL),
    );

    let moving: Vec<Vec2> = (0..50).map(|k| Vec2::new(k as f64, 0.0)).collect();
    let f_res = Vec2::new(0.3, 0.4);
    check(
        "|f_res| = 0.5 with a moving window is not a local minimum",
        f_res.norm() == 0.5 && !detect_lmp(f_res, 5.0, &moving, &ApfGains::default()),
    );

    let tri = Topology::complete(3).unwrap();
    let q = [Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.0), Vec2::new(0.0, 1.0)];
    check(
        "consensus input of agent 0 on the triangle is (1,1)",
        close_vec(consensus_input(&q, &tri, 0).unwrap(), Vec2::new(1.0, 1.0), TOL),
    );

    let pair = Topology::complete(2).unwrap();
    let spec = FormationSpec::new(vec![Vec2::new(-1.0, 0.0), Vec2::ZERO], 1).unwrap();
    let q = [Vec2::new(0.0, 0.0), Vec2::new(2.0, 0.0)];
    let unit = ControlGains::default();
    check(
        "follower input, ε=1, f=0 is (1,0)",
        close_vec(
            follower_input(&q, &pair, &spec, 0, &unit, Vec2::ZERO).unwrap(),
            Vec2::new(1.0, 0.0),
            TOL,
        ),
    );
    let mu2 = ControlGains { mu: 2.0, ..unit };
    check(
        "follower input, μ=2, f=(0,1) is (1,2)",
        close_vec(
            follower_input(&q, &pair, &spec, 0, &mu2, Vec2::new(0.0, 1.0)).unwrap(),
            Vec2::new(1.0, 2.0),
            TOL,
        ),
    );

    let lone = Topology::complete(1).unwrap();
    let lone_spec = FormationSpec::new(vec![Vec2::ZERO], 0).unwrap();
    check(
        "leader input at (13,14), γ=1 is (1,0)",
        close_vec(
            leader_input(
                &[Vec2::new(13.0, 14.0)],
                &lone,
                &lone_spec,
                Vec2::new(14.0, 14.0),
                &unit,
                Vec2::ZERO,
                Vec2::ZERO,
                LeaderBias::Error,
            )
            .unwrap(),
            Vec2::new(1.0, 0.0),
            TOL,
        ),
    );

    let u = gradient_rigidity_input(&q, &spec, &[(0, 1)], 1.0).unwrap();
    check(
        "2-agent gradient input is (6,0), (-6,0)",
        close_vec(u[0], Vec2::new(6.0, 0.0), TOL) && close_vec(u[1], Vec2::new(-6.0, 0.0), TOL),
    );
    let r = rigidity_matrix(&q, &[(0, 1)]).unwrap();
    check(
        "2-agent rigidity row is [-2, 0, 2, 0]",
        r.matrix.row(0).iter().copied().collect::<Vec<f64>>() == vec![-2.0, 0.0, 2.0, 0.0],
    );

    let step_cfg = SimConfig {
        topology: pair.clone(),
        formation: spec.clone(),
        environment: Environment::new(vec![], 1.0, Vec2::new(1e6, 0.0)).unwrap(),
        apf: ApfGains::default(),
        control: unit,
        mode: ControlMode::Consensus,
        leader_bias: LeaderBias::Error,
        initial_states: q.iter().map(|&p| AgentState::new(p, 0.0)).collect(),
        k_max: 1,
        dt: 0.1,
        seed: 0,
        rho_a: None,
    };
    let one = run(&step_cfg).unwrap().positions(1);
    check(
        "one consensus step from (0,0),(2,0) with dt=0.1 lands on (0.2,0),(1.8,0)",
        close_vec(one[0], Vec2::new(0.2, 0.0), TOL) && close_vec(one[1], Vec2::new(1.8, 0.0), TOL),
    );

    check(
        "leader at distance 1 has not arrived with eps_goal 0.5",
        !check_arrived(Vec2::new(13.0, 14.0), Vec2::new(14.0, 14.0), 0.5),
    );

    let unit_spec = spec.clone();
    let (d, w) = distance_errors(&[Vec2::ZERO, Vec2::new(2.0, 0.0)], &unit_spec, &[(0, 1)]);
    check("edge length 2, d̃=1: δ=3, ω=1", close(d[0], 3.0, TOL) && close(w[0], 1.0, TOL));
    check("δ = ω² + 2ωd̃", close(d[0], w[0] * w[0] + 2.0 * w[0] * 1.0, TOL));
    let (d, w) = distance_errors(&[Vec2::ZERO, Vec2::new(0.5, 0.0)], &unit_spec, &[(0, 1)]);
    check("edge length 0.5, d̃=1: δ=-0.75, ω=-0.5", close(d[0], -0.75, TOL) && close(w[0], -0.5, TOL));
    check("V(δ=2) = 1", close(lyapunov_v(&[2.0]), 1.0, TOL));
    check("V(3, -0.75) = 2.390625", close(lyapunov_v(&[3.0, -0.75]), 2.390625, TOL));

    let generic = [Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.0), Vec2::new(0.0, 1.0)];
    let r = rigidity_matrix(&generic, &[(0, 1), (0, 2), (1, 2)]).unwrap();
    check("generic triangle rank 3", r.rank == 3 && r.infinitesimally_rigid);
    let line = [Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.0), Vec2::new(2.0, 0.0)];
    let r = rigidity_matrix(&line, &[(0, 1), (0, 2), (1, 2)]).unwrap();
    check("collinear triple rank <= 2", r.rank <= 2 && !r.infinitesimally_rigid);

    report("10 unit oracle suite", &checks);
}
