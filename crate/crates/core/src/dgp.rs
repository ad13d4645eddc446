//! Synthetic data generating processes with known `η`.

use std::sync::OnceLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::parallel::derive_seed;

/// Draws used to estimate `E[f(X)]`.
pub const CENTER_DRAWS: usize = 1_000_000;
const CENTER_SEED: u64 = 0xC3A7_E2D0_0F5E_ED01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum DgpKind {
    Ball,
    Friedman1,
    Friedman2,
    Friedman3,
    Poly1,
    Poly2,
    Ring,
    Collinear,
}

impl DgpKind {
    pub const ALL: [DgpKind; 8] = [
        DgpKind::Ball,
        DgpKind::Friedman1,
        DgpKind::Friedman2,
        DgpKind::Friedman3,
        DgpKind::Poly1,
        DgpKind::Poly2,
        DgpKind::Ring,
        DgpKind::Collinear,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DgpKind::Ball => "ball",
            DgpKind::Friedman1 => "friedman1",
            DgpKind::Friedman2 => "friedman2",
            DgpKind::Friedman3 => "friedman3",
            DgpKind::Poly1 => "poly1",
            DgpKind::Poly2 => "poly2",
            DgpKind::Ring => "ring",
            DgpKind::Collinear => "collinear",
        }
    }

    /// Row label used in Markdown tables.
    pub fn label(self) -> &'static str {
        match self {
            DgpKind::Ball => "Ball",
            DgpKind::Friedman1 => "Friedman #1",
            DgpKind::Friedman2 => "Friedman #2",
            DgpKind::Friedman3 => "Friedman #3",
            DgpKind::Poly1 => "Poly #1",
            DgpKind::Poly2 => "Poly #2",
            DgpKind::Ring => "Ring",
            DgpKind::Collinear => "Collinear",
        }
    }

    pub fn index(self) -> usize {
        Self::ALL.iter().position(|&k| k == self).expect("listed")
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name().eq_ignore_ascii_case(s))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DgpSpec {
    pub kind: DgpKind,
    /// Poly2 only: use `4·X₄` for the last term instead of the `4·X₁`.
    pub poly2_uses_x4: bool,
}

impl From<DgpKind> for DgpSpec {
    fn from(kind: DgpKind) -> Self {
        Self { kind, poly2_uses_x4: false }
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl DgpSpec {
    pub fn name(&self) -> &'static str {
        self.kind.name()
    }

    pub fn n_features(&self) -> usize {
        match self.kind {
            DgpKind::Collinear => 6,
            _ => 5,
        }
    }

    pub fn f(&self, x: &[f64]) -> f64 {
        use std::f64::consts::PI;
        let z2 = || 40.0 * PI + 520.0 * PI * x[1];
        let z4 = || 10.0 * x[3] + 1.0;
        match self.kind {
            DgpKind::Ball => x[..3].iter().map(|v| v * v).sum(),
            DgpKind::Friedman1 => {
                10.0 * (PI * x[0] * x[1]).sin()
                    + 20.0 * (x[2] - 0.5).powi(2)
                    + 10.0 * x[3]
                    + 5.0 * x[4]
            }
            DgpKind::Friedman2 => {
                let z1 = 100.0 * x[0];
                let (z2, z4) = (z2(), z4());
                (z1 * z1 + (z2 * x[2] - 1.0 / (z2 * z4)).powi(2)).sqrt()
            }
            DgpKind::Friedman3 => {
                let z1 = 100.0 * x[0];
                let (z2, z4) = (z2(), z4());
                ((z2 * x[2] - 1.0 / (z2 * z4)) / z1).atan()
            }
            DgpKind::Poly1 => 4.0 * x[0] + 3.0 * x[1].powi(2) + 2.0 * x[2].powi(3) + x[3].powi(4),
            DgpKind::Poly2 => {
                let last = if self.poly2_uses_x4 { x[3] } else { x[0] };
                x[0].powi(4) + 2.0 * x[1].powi(3) + 3.0 * x[2].powi(2) + 4.0 * last
            }
            DgpKind::Ring => (x[..3].iter().map(|v| v * v).sum::<f64>() - 1.0).abs(),
            DgpKind::Collinear => x.iter().sum(),
        }
    }

    fn draw_row(&self, rng: &mut ChaCha8Rng, row: &mut [f64]) {
        match self.kind {
            DgpKind::Collinear => {
                for i in 0..3 {
                    row[i] = rng.random();
                }
                for i in 0..3 {
                    let noise: f64 = rng.sample(StandardNormal);
                    row[i + 3] = row[i] + 0.1 * noise;
                }
            }
            _ => {
                for v in row.iter_mut() {
                    *v = rng.random();
                }
            }
        }
    }

    /// Monte-Carlo mean of `f` from `draws` feature vectors.
    pub fn center_constant(&self, draws: usize, seed: u64) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut row = vec![0.0; self.n_features()];
        let mut sum = 0.0;
        for _ in 0..draws {
            self.draw_row(&mut rng, &mut row);
            sum += self.f(&row);
        }
        sum / draws as f64
    }

    /// `E[f(X)]`, estimated once per process with a reserved seed.
    pub fn center(&self) -> f64 {
        static CACHE: [OnceLock<f64>; 9] = [const { OnceLock::new() }; 9];
        let slot = if self.kind == DgpKind::Poly2 && self.poly2_uses_x4 {
            8
        } else {
            self.kind.index()
        };
        *CACHE[slot].get_or_init(|| {
            self.center_constant(CENTER_DRAWS, derive_seed(CENTER_SEED, &[slot as u64]))
        })
    }

    pub fn eta(&self, x: &[f64]) -> f64 {
        sigmoid(self.f(x) - self.center())
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticSample {
    pub dataset: Dataset,
    pub dgp: DgpSpec,
    pub seed: u64,
}

/// `n` rows with `X ~ U(0,1)^p` (plus noisy copies for Collinear),
/// `η = sigmoid(f(X) − E f)` and `Y ~ Bernoulli(η)`.
pub fn sample(spec: &DgpSpec, n: usize, seed: u64) -> SyntheticSample {
    let p = spec.n_features();
    let center = spec.center();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut columns = vec![Vec::with_capacity(n); p];
    let mut eta = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    let mut row = vec![0.0; p];
    for _ in 0..n {
        spec.draw_row(&mut rng, &mut row);
        for (col, &v) in columns.iter_mut().zip(&row) {
            col.push(v);
        }
        let e = sigmoid(spec.f(&row) - center);
        eta.push(e);
        y.push(f64::from(u8::from(rng.random::<f64>() < e)));
    }
    SyntheticSample {
        dataset: Dataset::from_columns(columns, y, Some(eta)).expect("generated data is valid"),
        dgp: *spec,
        seed,
    }
}

/// Columns `x1..xp, eta, y`.
pub fn sample_csv(s: &SyntheticSample) -> String {
    let ds = &s.dataset;
    let eta = ds.eta_true().expect("synthetic samples carry eta");
    let mut out = ds.feature_names().join(",");
    out.push_str(",eta,y\n");
    for i in 0..ds.n_rows() {
        for j in 0..ds.n_features() {
            out.push_str(&ds.value(i, j).to_string());
            out.push(',');
        }
        out.push_str(&format!("{},{}\n", eta[i], ds.response()[i]));
    }
    out
}
