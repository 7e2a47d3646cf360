#![allow(dead_code)]

use nalgebra::DMatrix;
use poset_mobius::{Poset, System};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn diamond() -> Poset {
    Poset::from_cover_relations(&["1", "2", "3", "4"], &[("1", "2"), ("1", "3"), ("2", "4"), ("3", "4")]).unwrap()
}

pub fn vee() -> Poset {
    Poset::from_cover_relations(&["1", "2", "3"], &[("1", "2"), ("1", "3")]).unwrap()
}

/// Random order on `1..=max` elements: a random DAG over a shuffled label list.
pub fn random_poset(rng: &mut ChaCha8Rng, min: usize, max: usize, density: f64) -> Poset {
    let s = rng.gen_range(min..=max);
    let mut labels: Vec<String> = (1..=s).map(|i| format!("e{i}")).collect();
    labels.shuffle(rng);
    let mut covers = Vec::new();
    for a in 0..s {
        for b in a + 1..s {
            if rng.gen_bool(density) {
                covers.push((labels[a].clone(), labels[b].clone()));
            }
        }
    }
    labels.shuffle(rng);
    Poset::from_cover_relations(&labels, &covers).unwrap()
}

/// Entries uniform in `[-1, 1]` on the incidence pattern, `diag` added on the diagonal.
pub fn random_member(p: &Poset, rng: &mut ChaCha8Rng, diag: f64) -> DMatrix<f64> {
    let s = p.len();
    DMatrix::from_fn(s, s, |r, c| {
        if p.in_incidence_pattern(r, c) {
            rng.gen_range(-1.0..1.0) + if r == c { diag } else { 0.0 }
        } else {
            0.0
        }
    })
}

/// Arbitrary matrix restricted to the downstream pattern.
pub fn random_free_variables(p: &Poset, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let s = p.len();
    DMatrix::from_fn(s, s, |j, i| if p.in_downstream_pattern(i, j) { rng.gen_range(-1.0..1.0) } else { 0.0 })
}

/// `ẋ = A x + w + B u`, cost `‖x‖² + ‖u‖²`, with `B` unit lower triangular.
pub fn random_lqr_system(p: Poset, rng: &mut ChaCha8Rng) -> System {
    let s = p.len();
    let a = random_member(&p, rng, 0.0);
    let mut b = random_member(&p, rng, 0.0) * 0.5;
    b.fill_diagonal(1.0);
    let mut c = DMatrix::zeros(2 * s, s);
    c.view_mut((0, 0), (s, s)).fill_with_identity();
    let mut d = DMatrix::zeros(2 * s, s);
    d.view_mut((s, 0), (s, s)).fill_with_identity();
    System::new(p, a, b, c, d).unwrap()
}

/// Discrete-time plant with spectral radius below one.
pub fn random_discrete_system(p: Poset, rng: &mut ChaCha8Rng) -> System {
    let s = p.len();
    let mut a = random_member(&p, rng, 0.0) * 0.3;
    for i in 0..s {
        a[(i, i)] = rng.gen_range(-0.6..0.6);
    }
    let b = random_member(&p, rng, 0.0);
    let mut c = DMatrix::zeros(2 * s, s);
    c.view_mut((0, 0), (s, s)).fill_with_identity();
    let mut d = DMatrix::zeros(2 * s, s);
    d.view_mut((s, 0), (s, s)).fill_with_identity();
    System::new(p, a, b, c, d).unwrap()
}


/// Random values for the diamond's free symbols: `x_k` and the predictions
/// `x_j(i)` for `i ≺ j`.
pub struct DiamondSymbols {
    pub x: [f64; 4],
    pub pred: [[f64; 4]; 4],
}

impl DiamondSymbols {
    pub fn draw(rng: &mut ChaCha8Rng) -> Self {
        let mut pred = [[0.0; 4]; 4];
        for row in pred.iter_mut() {
            for v in row.iter_mut() {
                *v = rng.gen_range(-1.0..1.0);
            }
        }
        Self { x: [0.0; 4].map(|_| rng.gen_range(-1.0..1.0)), pred }
    }

    /// `x_j(i)` with 1-based labels as written by hand.
    pub fn p(&self, j: usize, i: usize) -> f64 {
        self.pred[j - 1][i - 1]
    }

    pub fn x(&self, j: usize) -> f64 {
        self.x[j - 1]
    }

    pub fn x_d(&self) -> DMatrix<f64> {
        let (x, p) = (|j| self.x(j), |j, i| self.p(j, i));
        DMatrix::from_row_slice(
            4,
            4,
            &[
                x(1), 0.0, 0.0, 0.0,
                p(2, 1), x(2), 0.0, 0.0,
                p(3, 1), 0.0, x(3), 0.0,
                p(4, 1), p(4, 2), p(4, 3), x(4),
            ],
        )
    }

    pub fn completed(&self) -> DMatrix<f64> {
        let (x, p) = (|j| self.x(j), |j, i| self.p(j, i));
        DMatrix::from_row_slice(
            4,
            4,
            &[
                x(1), x(1), x(1), x(1),
                p(2, 1), x(2), p(2, 1), x(2),
                p(3, 1), p(3, 1), x(3), x(3),
                p(4, 1), p(4, 2), p(4, 3), x(4),
            ],
        )
    }

    pub fn mobius(&self) -> DMatrix<f64> {
        let (x, p) = (|j| self.x(j), |j, i| self.p(j, i));
        DMatrix::from_row_slice(
            4,
            4,
            &[
                x(1), 0.0, 0.0, 0.0,
                p(2, 1), x(2) - p(2, 1), 0.0, 0.0,
                p(3, 1), 0.0, x(3) - p(3, 1), 0.0,
                p(4, 1), p(4, 2) - p(4, 1), p(4, 3) - p(4, 1), x(4) - p(4, 3) - p(4, 2) + p(4, 1),
            ],
        )
    }
}
