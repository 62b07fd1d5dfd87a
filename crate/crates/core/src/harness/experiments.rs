//! Built-in experiments, runnable by name from the command line.

use crate::dcg::CgOptions;
use crate::landr::LanDrConfig;
use crate::reorth::ReorthPolicy;

use super::{ExperimentSpec, MatrixRecipe, RhsSpec, Step};

pub const NAMES: &[&str] = &[
    "example1", "table41", "table42", "table43", "example5", "example7", "example8", "example10", "fig54",
];

/// Seed for the right-hand sides of every built-in experiment.
pub const RHS_SEED: u64 = 1;

/// Policies of the reorthogonalization comparison on the second matrix.
pub fn table42_policies() -> Vec<ReorthPolicy> {
    use ReorthPolicy::*;
    vec![
        Full,
        KSelective,
        KPeriodic(40),
        KPeriodic(60),
        KPeriodic(70),
        KPeriodic(75),
        Periodic(40),
        Periodic(70),
        Periodic(75),
        Periodic(80),
        KPartial(0.5),
        KPartial(0.75),
        Partial(0.5),
        Partial(0.75),
    ]
}

/// Cycles of Lan-DR(m, k) needed to reach at least `matvecs` products.
pub fn cycles_for_matvecs(m: usize, k: usize, matvecs: usize) -> usize {
    if m >= matvecs {
        1
    } else {
        1 + (matvecs - m).div_ceil(m - k)
    }
}

fn landr(rhs: usize, cfg: LanDrConfig, label: &str) -> Step {
    Step::LanDr {
        rhs,
        config: cfg,
        then_dcg: None,
        label: Some(label.into()),
    }
}

fn fixed_cycles(m: usize, k: usize, cycles: usize, policy: ReorthPolicy) -> LanDrConfig {
    LanDrConfig {
        max_cycles: cycles,
        run_all_cycles: true,
        n_eig_wanted: 30.min(k),
        policy,
        ..LanDrConfig::new(m, k)
    }
}

fn dcg(rhs: Vec<usize>, rtol: f64, project_solutions: bool, label: &str) -> Step {
    Step::DCg {
        rhs,
        options: CgOptions::new(rtol, 10_000),
        project_solutions,
        label: Some(label.into()),
    }
}

fn cg(rhs: Vec<usize>, rtol: f64, label: &str) -> Step {
    Step::Cg {
        rhs,
        options: CgOptions::new(rtol, 10_000),
        label: Some(label.into()),
    }
}

/// Lan-DR(100,15) for four cycles on the first right-hand side, deflated CG
/// for the rest, and block CG on all of them.
fn multi_rhs(name: &str, rhs: RhsSpec, rtol: f64, project: bool) -> ExperimentSpec {
    let count = rhs.count();
    ExperimentSpec {
        name: name.into(),
        matrix: MatrixRecipe::Example7 { n: 10_000 },
        complex: false,
        rhs,
        steps: vec![
            Step::LanDr {
                rhs: 0,
                config: LanDrConfig {
                    max_cycles: 4,
                    lin_rtol: rtol,
                    policy: ReorthPolicy::KPeriodic(40),
                    ..LanDrConfig::new(100, 15)
                },
                then_dcg: Some(CgOptions::new(rtol, 10_000)),
                label: Some("pipeline".into()),
            },
            dcg((1..count).collect(), rtol, project, "pipeline"),
            Step::BlockCg {
                rhs: vec![],
                rtol,
                maxit: 10_000,
                label: Some("block".into()),
            },
        ],
    }
}

/// The built-in experiment `name`, if there is one.
pub fn builtin(name: &str) -> Option<ExperimentSpec> {
    let rhs1 = RhsSpec::RandomNormal {
        count: 1,
        seed: RHS_SEED,
    };
    let rhs2 = RhsSpec::RandomNormal {
        count: 2,
        seed: RHS_SEED,
    };
    let spec = match name {
        "example1" => {
            let base = LanDrConfig {
                max_cycles: 200,
                lin_rtol: 1e-8,
                ..LanDrConfig::new(100, 40)
            };
            ExperimentSpec {
                name: name.into(),
                matrix: MatrixRecipe::Example1 { n: 5000 },
                complex: false,
                rhs: rhs1,
                steps: vec![
                    landr(
                        0,
                        LanDrConfig {
                            n_eig_wanted: 30,
                            ..base.clone()
                        },
                        "lan-dr(100,40)",
                    ),
                    landr(0, LanDrConfig::new(100, 10).with_cycles(200), "lan-dr(100,10)"),
                    landr(0, LanDrConfig::new(30, 10).with_cycles(400), "lan-dr(30,10)"),
                    cg(vec![0], 1e-8, "cg"),
                ],
            }
        }
        "table41" => ExperimentSpec {
            name: name.into(),
            matrix: MatrixRecipe::Example1 { n: 5000 },
            complex: false,
            rhs: rhs1,
            steps: vec![
                landr(0, fixed_cycles(100, 40, 57, ReorthPolicy::RestartOnly), "restart-only"),
                landr(0, fixed_cycles(100, 40, 57, ReorthPolicy::Full), "full"),
            ],
        },
        "table42" => {
            let mut steps = Vec::new();
            for p in table42_policies() {
                let label = p.to_string();
                steps.push(landr(0, fixed_cycles(120, 40, 12, p), &label));
                steps.push(dcg(vec![1], 1e-8, false, &label));
            }
            ExperimentSpec {
                name: name.into(),
                matrix: MatrixRecipe::Example3 { n: 5000 },
                complex: false,
                rhs: rhs2,
                steps,
            }
        }
        "table43" => {
            let mut steps = Vec::new();
            for m in [100, 120, 140, 160, 180, 200] {
                let cycles = cycles_for_matvecs(m, 40, 1000);
                for p in [ReorthPolicy::KSelective, ReorthPolicy::Full] {
                    steps.push(landr(0, fixed_cycles(m, 40, cycles, p), &format!("m{m}-{p}")));
                }
            }
            ExperimentSpec {
                name: name.into(),
                matrix: MatrixRecipe::Example3 { n: 5000 },
                complex: false,
                rhs: rhs1,
                steps,
            }
        }
        "example5" => ExperimentSpec {
            name: name.into(),
            matrix: MatrixRecipe::Example5 {
                n: 5000,
                largest: 5400.0,
            },
            complex: false,
            rhs: rhs1,
            steps: vec![
                landr(0, fixed_cycles(120, 40, 12, ReorthPolicy::KSelective), "k-so"),
                landr(
                    0,
                    LanDrConfig {
                        extra_largest: 1,
                        ..fixed_cycles(120, 41, 12, ReorthPolicy::KSelective)
                    },
                    "k-so+largest",
                ),
                landr(0, fixed_cycles(120, 40, 12, ReorthPolicy::Full), "full"),
            ],
        },
        "example7" => multi_rhs(
            name,
            RhsSpec::RandomNormal {
                count: 20,
                seed: RHS_SEED,
            },
            1e-8,
            false,
        ),
        "example8" => multi_rhs(
            name,
            RhsSpec::Related {
                count: 20,
                seed: RHS_SEED,
                scale: 1e-3,
            },
            1e-6,
            true,
        ),
        "example10" => {
            let cfg = LanDrConfig {
                max_cycles: 60,
                lin_rtol: 1e-8,
                policy: ReorthPolicy::Full,
                ..LanDrConfig::new(EXAMPLE10_M, EXAMPLE10_K)
            };
            ExperimentSpec {
                name: name.into(),
                matrix: MatrixRecipe::Example10 {
                    n: 1000,
                    seed: super::recipes::EXAMPLE10_SEED,
                    shift: 2.0,
                },
                complex: false,
                rhs: RhsSpec::RandomNormal {
                    count: 3,
                    seed: RHS_SEED,
                },
                steps: vec![
                    Step::MinresDr {
                        rhs: 0,
                        config: cfg.clone(),
                        label: Some("minres-dr".into()),
                    },
                    Step::DMinres {
                        rhs: vec![1, 2],
                        rtol: 1e-8,
                        maxit: 5000,
                        label: Some("minres-dr".into()),
                    },
                    landr(0, cfg, "lan-dr"),
                    Step::DMinres {
                        rhs: vec![1, 2],
                        rtol: 1e-8,
                        maxit: 5000,
                        label: Some("lan-dr".into()),
                    },
                    Step::Minres {
                        rhs: vec![0, 1, 2],
                        rtol: 1e-8,
                        maxit: 5000,
                        label: Some("minres".into()),
                    },
                    cg(vec![0], 1e-8, "cg"),
                ],
            }
        }
        "fig54" => ExperimentSpec {
            name: name.into(),
            matrix: MatrixRecipe::Example1 { n: 5000 },
            complex: false,
            rhs: RhsSpec::RandomNormal {
                count: 10,
                seed: RHS_SEED,
            },
            steps: vec![
                landr(0, fixed_cycles(180, 120, 44, ReorthPolicy::KSelective), "pipeline"),
                dcg((1..10).collect(), 1e-8, false, "pipeline"),
                cg(vec![0], 1e-8, "cg"),
            ],
        },
        _ => return None,
    };
    Some(spec)
}

/// Subspace sizes of Minres-DR and Lan-DR on the indefinite example.
pub const EXAMPLE10_M: usize = 80;
pub const EXAMPLE10_K: usize = 30;

impl LanDrConfig {
    /// Same configuration with a different cycle budget.
    pub fn with_cycles(mut self, cycles: usize) -> Self {
        self.max_cycles = cycles;
        self
    }
}
