//! Reference parameter sets: a three-regime credit market and a sinusoidal
//! time-varying generator.

use nalgebra::DMatrix;

use crate::model::{Generator, RegimeModel, TimeVaryingGenerator, DEFAULT_EPSILON_FLOOR};

/// Risk-neutral generator of the three-regime market.
pub const GENERATOR_ROWS: [[f64; 3]; 3] = [
    [-0.380313, 0.336870, 0.043443],
    [0.254397, -0.254397, 0.0],
    [0.208683, 0.000006, -0.208689],
];

pub const HAZARDS: [f64; 3] = [0.00741, 0.04261, 0.11137];
pub const LOSSES: [f64; 3] = [0.1, 0.4, 0.9];
pub const VOLS: [f64; 3] = [0.05, 0.1, 0.2];
pub const RATES: [f64; 3] = [0.01, 0.1, 0.3];
/// Flat rate that reproduces the published bond ODE column.
pub const FLAT_RATES: [f64; 3] = [0.03, 0.03, 0.03];

/// Bond maturities of the published bond table.
pub const BOND_MATURITIES: [f64; 11] = [0.25, 0.5, 1.0, 2.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0, 50.0];

/// Published bond prices by the series method, regimes 1..3 per maturity.
pub const BOND_TABLE_NM: [[f64; 3]; 11] = [
    [0.9921, 0.9884, 0.9686],
    [0.9837, 0.9772, 0.9393],
    [0.9659, 0.9555, 0.8864],
    [0.9282, 0.9146, 0.7991],
    [0.8140, 0.8029, 0.6274],
    [0.6488, 0.6430, 0.4701],
    [0.5170, 0.5131, 0.3691],
    [0.4119, 0.4090, 0.2931],
    [0.3282, 0.3259, 0.2334],
    [0.2616, 0.2597, 0.1859],
    [0.1055, 0.1047, 0.0750],
];

/// Published bond prices by the ODE method, regimes 1..3 per maturity.
pub const BOND_TABLE_ODE: [[f64; 3]; 11] = [
    [0.9921, 0.9884, 0.9686],
    [0.9837, 0.9772, 0.9393],
    [0.9659, 0.9555, 0.8864],
    [0.9281, 0.9146, 0.7990],
    [0.8136, 0.8031, 0.6273],
    [0.6484, 0.6431, 0.4701],
    [0.5166, 0.5131, 0.3690],
    [0.4116, 0.4090, 0.2930],
    [0.3280, 0.3259, 0.2333],
    [0.2613, 0.2597, 0.1858],
    [0.1053, 0.1047, 0.0749],
];

/// Barrier-table maturities.
pub const BARRIER_MATURITIES: [f64; 10] = [0.5, 1.0, 2.5, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0, 35.0];

/// Barrier level on the volatility.
pub const BARRIER_LEVEL: f64 = 0.2;

/// Barrier strike for the knock-out call on the volatility level.
pub const BARRIER_STRIKE: f64 = 0.075;

/// Published knock-out prices per maturity: digital e1, digital e2, call e1, call e2 (calls in 1e-3 units).
pub const BARRIER_TABLE_NM: [[f64; 4]; 10] = [
    [0.9719, 0.9525, 3.5081, 21.1632],
    [0.9419, 0.9093, 5.8869, 18.2870],
    [0.8482, 0.7980, 9.0631, 13.1068],
    [0.7013, 0.6506, 9.1533, 9.3528],
    [0.4732, 0.4373, 6.4919, 6.0298],
    [0.3187, 0.2944, 4.3833, 4.0508],
    [0.2146, 0.1983, 2.9521, 2.7274],
    [0.1445, 0.1335, 1.9879, 1.8366],
    [0.0973, 0.0899, 1.3386, 1.2367],
    [0.0655, 0.0605, 0.9014, 0.8328],
];

/// Published Monte-Carlo estimates in the same layout as [`BARRIER_TABLE_NM`].
pub const BARRIER_TABLE_MC: [[f64; 4]; 10] = [
    [0.9693, 0.9523, 3.5574, 21.0587],
    [0.9455, 0.9100, 5.7910, 18.2697],
    [0.8466, 0.7964, 9.0351, 13.0927],
    [0.6986, 0.6481, 9.2635, 9.5317],
    [0.4721, 0.4336, 6.3608, 5.9426],
    [0.3201, 0.2955, 4.3335, 4.1597],
    [0.2141, 0.1974, 2.9365, 2.8137],
    [0.1445, 0.1341, 1.9577, 1.7792],
    [0.0985, 0.0912, 1.3136, 1.2111],
    [0.0676, 0.0608, 0.9038, 0.8228],
];

pub fn table1_generator() -> Generator {
    Generator::Constant(DMatrix::from_fn(3, 3, |i, j| GENERATOR_ROWS[i][j]))
}

fn model_with(rates: [f64; 3], generator: Generator) -> RegimeModel {
    RegimeModel::new(
        rates.to_vec(),
        HAZARDS.to_vec(),
        LOSSES.to_vec(),
        VOLS.to_vec(),
        rates.to_vec(),
        generator,
    )
    .expect("fixture parameters are valid")
}

/// Three-regime market with rates (0.01, 0.1, 0.3) and the raw generator.
pub fn table1_model() -> RegimeModel {
    model_with(RATES, table1_generator())
}

/// [`table1_model`] with the zero rate floored so the series pricer accepts it.
pub fn table1_model_floored() -> RegimeModel {
    table1_model().with_epsilon_floor(DEFAULT_EPSILON_FLOOR)
}

/// Same market with a flat 3% short rate.
pub fn flat_rate_model() -> RegimeModel {
    model_with(FLAT_RATES, table1_generator())
}

pub fn flat_rate_model_floored() -> RegimeModel {
    flat_rate_model().with_epsilon_floor(DEFAULT_EPSILON_FLOOR)
}

/// Three regimes, every off-diagonal rate 0.5 except `a_12(t) = 0.5 + 0.4 sin t`.
pub fn sinusoidal_generator() -> Generator {
    let base = DMatrix::from_fn(3, 3, |i, j| if i == j { 0.0 } else { 0.5 });
    let mut amplitude = DMatrix::zeros(3, 3);
    amplitude[(0, 1)] = 0.4;
    let frequency = DMatrix::from_element(3, 3, 1.0);
    let phase = DMatrix::zeros(3, 3);
    Generator::TimeVarying(
        TimeVaryingGenerator::sinusoidal(base, amplitude, frequency, phase)
            .expect("fixture blocks are square"),
    )
}

/// Three-regime market driven by [`sinusoidal_generator`].
pub fn sinusoidal_model() -> RegimeModel {
    model_with(RATES, sinusoidal_generator())
}
