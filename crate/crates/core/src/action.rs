/// Top linear speed of the drive base in m/s.
pub const MAX_LINEAR: f64 = 0.5;
/// Top angular speed of the drive base in rad/s.
pub const MAX_ANGULAR: f64 = 4.5;

/// Normalized drive command shared by every policy: `v` and `w` in `[-1, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Action {
    pub v: f64,
    pub w: f64,
}

impl Action {
    pub const STOP: Action = Action { v: 0.0, w: 0.0 };

    /// Clamps both components into `[-1, 1]`. NaN maps to 0.
    pub fn new(v: f64, w: f64) -> Self {
        Self { v: clamp_unit(v), w: clamp_unit(w) }
    }

    /// `(v m/s, ω rad/s)`.
    pub fn denormalize(self) -> (f64, f64) {
        (MAX_LINEAR * self.v, MAX_ANGULAR * self.w)
    }

    pub fn to_array(self) -> [f64; 2] {
        [self.v, self.w]
    }

    pub fn squared_distance(self, other: Action) -> f64 {
        let (dv, dw) = (self.v - other.v, self.w - other.w);
        dv * dv + dw * dw
    }
}

fn clamp_unit(x: f64) -> f64 {
    if x.is_nan() {
        0.0
    } else {
        x.clamp(-1.0, 1.0)
    }
}

/// Free-function form of [`Action::denormalize`].
pub fn denormalize(a: Action) -> (f64, f64) {
    a.denormalize()
}
