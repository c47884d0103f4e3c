//! Quick reproduction check for the six final running means.

use sched_core::config::{ExperimentConfig, SamplingSpec, Solver};
use sched_core::model::{Mode, RewardParams, RouteClass, RouteSpec};
use sched_core::probvec::ProbVec;
use sched_core::run_trials;

fn pv(p: &[f64]) -> ProbVec {
    ProbVec::from_floats(p).unwrap()
}

fn fig1_routes() -> Vec<RouteSpec> {
    vec![
        RouteSpec::new(
            1,
            RouteClass::Hard,
            pv(&[0., 0., 0., 0.5, 0.5]),
            7,
            pv(&[0., 0., 0., 0., 0., 0., 0., 0., 1.]),
        )
        .unwrap(),
        RouteSpec::new(
            2,
            RouteClass::Soft,
            pv(&[0., 0., 1.]),
            3,
            pv(&[0., 0., 0., 0., 1.]),
        )
        .unwrap(),
    ]
}

fn main() {
    let trials: usize = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(200);
    let args: Vec<String> = std::env::args().collect();
    let depth: u32 = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(20);
    let sims: u32 = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(1000);
    let c: f64 = args.get(4).and_then(|s| s.parse().ok()).unwrap_or(10.0);
    let targets = [
        (Mode::Preemptible, Solver::Vi, -46.46),
        (Mode::NonPreemptible, Solver::Vi, -50.25),
        (Mode::Preemptible, Solver::MctsEdf, -64.49),
        (Mode::NonPreemptible, Solver::MctsEdf, -53.30),
        (Mode::Preemptible, Solver::MctsRandom, -119.74),
        (Mode::NonPreemptible, Solver::MctsRandom, -76.27),
    ];
    for (mode, solver, target) in targets {
        let cfg = ExperimentConfig {
            label: String::new(),
            routes: fig1_routes(),
            rewards: RewardParams::default(),
            mode,
            solver,
            sampling: SamplingSpec::default(),
            trials,
            traversals_per_trial: 10,
            report_stride: trials.min(50),
            seed: 12345,
            discount: 0.99,
            mcts: sched_core::solve::MctsConfig {
                depth,
                simulations: sims,
                exploration_c: c,
                ..Default::default()
            },
        };
        let start = std::time::Instant::now();
        let series = run_trials(&cfg).unwrap();
        println!(
            "{mode:?} {solver:?}: final mean {:.2} (target {target}) [{:.1}s]",
            series.final_mean(),
            start.elapsed().as_secs_f64()
        );
    }
}
