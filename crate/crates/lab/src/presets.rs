//! Bundled experiment configurations.

use gavg_core::{Epsilon, Expr, Spatial, StateFactor, Steps, Temporal, Term};

use crate::config::{
    AveragingConfig, ExperimentConfig, FkConfig, GridConfig, LatticeConfig, PenaltyConfig, ProblemConfig, SigmaConfig,
    ValidationConfig,
};

pub const NAMES: [&str; 4] = ["g_heat", "obstacle_basic", "penalization_demo", "averaging_trig"];

pub fn preset(name: &str) -> Option<ExperimentConfig> {
    match name {
        "g_heat" => Some(g_heat()),
        "obstacle_basic" => Some(obstacle_basic()),
        "penalization_demo" => Some(penalization_demo()),
        "averaging_trig" => Some(averaging_trig()),
        _ => None,
    }
}

fn x_squared() -> Term {
    Term::constant(1.0).space(Spatial::Monomial { axis: 0, degree: 2 })
}

fn tanh_x() -> Spatial {
    Spatial::Tanh { k: vec![1.0] }
}

fn base(name: &str, problem: ProblemConfig, sigma: (f64, f64), grid: (f64, f64, usize)) -> ExperimentConfig {
    ExperimentConfig {
        name: Some(name.to_string()),
        problem,
        sigma: SigmaConfig { lower: sigma.0, upper: sigma.1 },
        grid: GridConfig { x_min: grid.0, x_max: grid.1, nx: grid.2, nt: Steps::Auto },
        lattice: None,
        penalty: None,
        averaging: AveragingConfig::default(),
        epsilons: Vec::new(),
        window: 0.6,
        output_dir: None,
        seed: 7,
        validation: ValidationConfig::default(),
        fk: FkConfig::default(),
    }
}

fn lattice_problem(phi: Expr, obstacle: Expr, f: Expr, constants: (f64, f64)) -> ProblemConfig {
    ProblemConfig {
        horizon: 1.0,
        epsilon: Epsilon::Scale(1.0),
        b: Expr::zero(),
        h: Expr::zero(),
        sigma: Expr::constant(1.0),
        f,
        g: Expr::zero(),
        phi,
        obstacle,
        lipschitz: constants.0,
        growth_m: 1,
        obstacle_cap: constants.1,
    }
}

/// Pure G-heat equation, `u = x^2 + upper * (T - t)`.
pub fn g_heat() -> ExperimentConfig {
    let problem = lattice_problem(Expr::term(x_squared()), Expr::constant(-1e10), Expr::zero(), (1.0, -1e10));
    let mut cfg = base("g_heat", problem, (1.0, 4.0), (-16.0, 16.0, 400));
    cfg.lattice = Some(LatticeConfig { steps: 2000, x0: 0.0 });
    cfg
}

/// Obstacle `0.5 cos x` raised against a negative constant driver.
pub fn obstacle_basic() -> ExperimentConfig {
    let problem = lattice_problem(
        Expr::term(x_squared()).plus(Term::constant(0.5)),
        Expr::term(Term::constant(0.5).space(Spatial::Cos { k: vec![1.0] })),
        Expr::constant(-3.0),
        (3.0, 0.5),
    );
    let mut cfg = base("obstacle_basic", problem, (0.25, 1.0), (-8.0, 8.0, 159));
    cfg.lattice = Some(LatticeConfig { steps: 1000, x0: 1.5 });
    cfg.penalty = Some(PenaltyConfig { n_list: vec![1.0, 4.0, 16.0, 64.0, 256.0] });
    cfg
}

/// `phi = x^2`, `S = 0`, `f = -1`: the free solution dips below the obstacle near 0.
pub fn penalization_demo() -> ExperimentConfig {
    let problem = lattice_problem(Expr::term(x_squared()), Expr::zero(), Expr::constant(-1.0), (1.0, 0.0));
    let mut cfg = base("penalization_demo", problem, (0.1, 0.5), (-6.0, 6.0, 119));
    cfg.lattice = Some(LatticeConfig { steps: 500, x0: 0.0 });
    cfg.penalty = Some(PenaltyConfig { n_list: vec![1.0, 4.0, 16.0, 64.0, 256.0] });
    cfg
}

/// Oscillating drift and driver with a state-dependent volatility modulation.
pub fn averaging_trig() -> ExperimentConfig {
    let sin = Temporal::Sin { omega: 1.0, phase: 0.0 };
    let cos = Temporal::Cos { omega: 1.0, phase: 0.0 };
    let cos2 = Temporal::CosSquared { omega: 1.0, phase: 0.0 };
    let problem = ProblemConfig {
        horizon: 1.0,
        epsilon: Epsilon::Scale(0.1),
        b: Expr::term(Term::constant(1.0).time(sin).space(tanh_x())),
        h: Expr::zero(),
        sigma: Expr::constant(1.0).plus(Term::constant(0.25).space(tanh_x())),
        f: Expr::term(Term::constant(1.0).time(cos2).state(StateFactor::Y))
            .plus(Term::constant(1.0).time(cos).state(StateFactor::TanhZ { index: 0 })),
        g: Expr::zero(),
        phi: Expr::term(x_squared()),
        obstacle: Expr::constant(-1.0).plus(Term::constant(0.5).space(tanh_x())),
        lipschitz: 1.0,
        growth_m: 1,
        obstacle_cap: -0.5,
    };
    let mut cfg = base("averaging_trig", problem, (0.25, 1.0), (-4.0, 4.0, 159));
    cfg.epsilons = vec![0.4, 0.2, 0.1, 0.05];
    cfg
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_round_trip_and_check() {
        for name in NAMES {
            let cfg = preset(name).unwrap();
            cfg.check().unwrap();
            let back = ExperimentConfig::from_json(&cfg.to_json()).unwrap();
            assert_eq!(back, cfg, "{name}");
        }
        assert!(preset("nope").is_none());
    }
}
