//! Pointwise data of a problem: forcing terms, initial data and exact solutions.

/// Values of the three fields (or of the three forcing terms) at one point.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct FieldValues {
    pub u: [f64; 2],
    pub p: f64,
    pub theta: f64,
}

/// Right-hand sides `(f, g, η)` of the momentum, mass and energy balances.
pub trait Forcing: Sync {
    fn eval_forcing(&self, x: f64, y: f64, t: f64) -> FieldValues;

    /// Lets assembly skip quadrature entirely.
    fn is_zero(&self) -> bool {
        false
    }
}

/// Space-time field data, used for initial conditions and exact solutions.
pub trait SpaceTimeField: Sync {
    fn eval_exact(&self, x: f64, y: f64, t: f64) -> FieldValues;
}

/// Identically zero data.
#[derive(Clone, Copy, Debug, Default)]
pub struct Zero;

impl Forcing for Zero {
    fn eval_forcing(&self, _: f64, _: f64, _: f64) -> FieldValues {
        FieldValues::default()
    }

    fn is_zero(&self) -> bool {
        true
    }
}

impl SpaceTimeField for Zero {
    fn eval_exact(&self, _: f64, _: f64, _: f64) -> FieldValues {
        FieldValues::default()
    }
}

/// Time-independent injection/production sources acting on the mass and
/// energy balances: `g = η = amplitude (exp(-s|x - x1|²) - exp(-s|x - x2|²))`.
#[derive(Clone, Copy, Debug)]
pub struct WellPair {
    pub injector: [f64; 2],
    pub producer: [f64; 2],
    pub amplitude: f64,
    pub sharpness: f64,
}

impl WellPair {
    pub fn source(&self, x: f64, y: f64) -> f64 {
        let bump = |c: [f64; 2]| {
            (-self.sharpness * (x - c[0]).powi(2) - self.sharpness * (y - c[1]).powi(2)).exp()
        };
        self.amplitude * (bump(self.injector) - bump(self.producer))
    }
}

impl Default for WellPair {
    fn default() -> Self {
        WellPair {
            injector: [0.25, 0.5],
            producer: [0.75, 0.5],
            amplitude: 1e-2,
            sharpness: 1000.0,
        }
    }
}

impl Forcing for WellPair {
    fn eval_forcing(&self, x: f64, y: f64, _t: f64) -> FieldValues {
        let s = self.source(x, y);
        FieldValues {
            u: [0.0, 0.0],
            p: s,
            theta: s,
        }
    }
}
