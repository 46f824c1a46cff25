//! Reference problem instances used by the examples, the CLI and the
//! acceptance suite.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::linalg::{mat, scalar, Matrix};
use crate::model::{SensorModel, SystemModel};

#[derive(Debug, Clone)]
pub struct Instance {
    pub model: SystemModel,
    pub sensors: Vec<SensorModel>,
    pub beta: f64,
}

fn plant_2x2() -> SystemModel {
    SystemModel::new(mat(&[&[1.1, 0.2], &[0.2, 0.8]]), Matrix::identity(2, 2)).expect("valid plant")
}

fn row(c: [f64; 2], r: f64, lambda: f64, energy: f64) -> SensorModel {
    SensorModel::new(mat(&[&c]), scalar(r), lambda, energy).expect("valid sensor")
}

/// Single vector sensor: `C = [1 1]`, `R = 1`, `lambda = 0.8`, `E = 1`,
/// `beta = 0.05`.
pub fn single_sensor() -> Instance {
    Instance {
        model: plant_2x2(),
        sensors: vec![row([1.0, 1.0], 1.0, 0.8, 1.0)],
        beta: 0.05,
    }
}

/// Two scalar sensors with `A = 1.1`, `C = (1.5, 1)`, `lambda = (0.8, 0.6)`,
/// `E = (1, e2)`, `beta = 0.2`.
pub fn two_scalar_sensors(e2: f64) -> Instance {
    Instance {
        model: SystemModel::scalar(1.1, 1.0).expect("valid plant"),
        sensors: vec![
            SensorModel::scalar(1.5, 1.0, 0.8, 1.0).expect("valid sensor"),
            SensorModel::scalar(1.0, 1.0, 0.6, e2).expect("valid sensor"),
        ],
        beta: 0.2,
    }
}

/// Two vector sensors, `C_1 = [1.5 1.5]`, `C_2 = [1 1]`, `E = (1, 0.4)`.
/// `beta` is swept for the tradeoff curve; 0.5 is a placeholder.
pub fn two_vector_sensors() -> Instance {
    Instance {
        model: plant_2x2(),
        sensors: vec![row([1.5, 1.5], 1.0, 0.8, 1.0), row([1.0, 1.0], 1.0, 0.6, 0.4)],
        beta: 0.5,
    }
}

/// Vector plant with `C_1 = [1 -0.9]` whose one-step measurement value is
/// not monotone in `P`.
pub fn nonmonotone_vector() -> Instance {
    Instance {
        model: plant_2x2(),
        sensors: vec![row([1.0, -0.9], 1.0, 0.8, 1.0)],
        beta: 0.5,
    }
}

/// The larger covariance `P'` compared against `P̄_1` of
/// [`nonmonotone_vector`].
pub fn nonmonotone_upper() -> Matrix {
    mat(&[&[7.85, 7.40], &[7.40, 7.80]])
}

/// Scalar two-sensor measurement instance where sensor 2 transmits on two
/// separate intervals.
pub fn split_band_scalar() -> Instance {
    Instance {
        model: SystemModel::scalar(1.1, 0.1).expect("valid plant"),
        sensors: vec![
            SensorModel::scalar(1.0, 1.0, 0.6, 0.17).expect("valid sensor"),
            SensorModel::scalar(1.0, 2.0, 0.7, 0.1).expect("valid sensor"),
        ],
        beta: 0.5,
    }
}

/// Random two-sensor draw for the estimator comparison: `C` entries from
/// `U(0.5, 2)`, `R` from `U(1, 10)`, `lambda` from `U(0.5, 1)`, zero energy.
pub fn random_comparison_draw<R: Rng + ?Sized>(rng: &mut R) -> Instance {
    let sensor = |rng: &mut R| {
        let c = [rng.random_range(0.5..2.0), rng.random_range(0.5..2.0)];
        let r = rng.random_range(1.0..10.0);
        let lambda = rng.random_range(0.5..1.0);
        row(c, r, lambda, 0.0)
    };
    let s1 = sensor(rng);
    let s2 = sensor(rng);
    Instance {
        model: plant_2x2(),
        sensors: vec![s1, s2],
        beta: 0.5,
    }
}

/// Random small instance whose reception probabilities clear the stability
/// bound. One sensor gives a `2 x 2` plant with a vector sensor, more give a
/// scalar plant. Spectral radius lies in `[0.5, 1.3)`.
pub fn random_small_instance<R: Rng + ?Sized>(rng: &mut R, sensors: usize) -> Instance {
    loop {
        let rho = rng.random_range(0.5..1.3);
        let model = if sensors == 1 {
            let raw = mat(&[
                &[rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)],
                &[rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)],
            ]);
            let r = crate::linalg::spectral_radius(&raw);
            if r < 1e-3 {
                continue;
            }
            let q = rng.random_range(0.2..2.0);
            SystemModel::new(raw * (rho / r), Matrix::identity(2, 2) * q)
        } else {
            SystemModel::scalar(rho, rng.random_range(0.2..2.0))
        }
        .expect("valid plant");
        let floor = crate::model::stability_bound(&model) + 0.05;
        let list: Vec<SensorModel> = (0..sensors)
            .map(|_| {
                let lambda = rng.random_range(floor.max(0.3)..1.0);
                let energy = rng.random_range(0.0..2.0);
                let r = rng.random_range(0.5..3.0);
                let c = if sensors == 1 {
                    mat(&[&[rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)]])
                } else {
                    scalar(rng.random_range(0.5..2.0))
                };
                SensorModel::new(c, scalar(r), lambda, energy).expect("valid sensor")
            })
            .collect();
        if list.iter().all(|s| crate::model::check_detectability(&model, s.c())) {
            return Instance {
                model,
                sensors: list,
                beta: rng.random_range(0.05..0.95),
            };
        }
    }
}
