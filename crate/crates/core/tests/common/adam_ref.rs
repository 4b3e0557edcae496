//! Reference Adam trace on scalar fixtures.

use ms3l_core::nn::{adam_update, AdamConfig};

/// Textbook Adam with the L2 term added to the gradient, one scalar at a time.
struct Reference {
    lr: f64,
    wd: f64,
    m: f64,
    v: f64,
    t: i32,
}

impl Reference {
    fn step(&mut self, w: f64, g: f64) -> f64 {
        self.t += 1;
        let g = g + self.wd * w;
        self.m = 0.9 * self.m + 0.1 * g;
        self.v = 0.999 * self.v + 0.001 * g * g;
        let m_hat = self.m / (1.0 - 0.9f64.powi(self.t));
        let v_hat = self.v / (1.0 - 0.999f64.powi(self.t));
        w - self.lr * m_hat / (v_hat.sqrt() + 1e-8)
    }
}

/// Gradient of `a·w² + c·w` at `w`.
fn grad(w: f64, a: f64, c: f64) -> f64 {
    2.0 * a * w + c
}

/// Runs `steps` updates on three scalars through `adam_update` and through
/// the reference; returns the largest absolute weight difference seen.
pub fn trace(steps: usize, lr: f64, wd: f64) -> f64 {
    let fixtures = [(1.0, 0.5, 0.3), (-0.5, 2.0, -1.0), (2.0, 0.1, 0.0)];
    let cfg = AdamConfig::new(lr, wd);
    let mut w: Vec<f64> = fixtures.iter().map(|f| f.0).collect();
    let (mut m, mut v) = (vec![0.0; 3], vec![0.0; 3]);
    let mut refs: Vec<(f64, Reference)> =
        fixtures.iter().map(|f| (f.0, Reference { lr, wd, m: 0.0, v: 0.0, t: 0 })).collect();
    let mut worst = 0.0f64;
    for t in 1..=steps {
        let g: Vec<f64> = (0..3).map(|i| grad(w[i], fixtures[i].1, fixtures[i].2)).collect();
        adam_update(&cfg, t as u64, &mut w, &g, &mut m, &mut v);
        for (i, (rw, r)) in refs.iter_mut().enumerate() {
            *rw = r.step(*rw, grad(*rw, fixtures[i].1, fixtures[i].2));
            worst = worst.max((*rw - w[i]).abs());
        }
    }
    worst
}
