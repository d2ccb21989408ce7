//! Seeded synthetic datasets for tests, benchmarks and bound checks.

use rand::Rng;

use crate::data::Dataset;
use crate::util::rng_from_seed;
use crate::Result;

/// Two discs of radius 0.2 centred at (0.75, 0.25) (positive) and
/// (0.25, 0.75) (negative); separable by a line through the origin.
pub fn separable_2d(m: usize, seed: u64) -> Result<Dataset> {
    let mut rng = rng_from_seed(seed);
    let mut rows = Vec::with_capacity(m);
    let mut labels = Vec::with_capacity(m);
    for _ in 0..m {
        let label: i8 = if rng.gen::<bool>() { 1 } else { -1 };
        let (r, a) = (0.2 * rng.gen::<f64>().sqrt(), std::f64::consts::TAU * rng.gen::<f64>());
        let (cx, cy) = if label > 0 { (0.75, 0.25) } else { (0.25, 0.75) };
        rows.push(vec![cx + r * a.cos(), cy + r * a.sin()]);
        labels.push(label);
    }
    Dataset::from_dense(&rows, &labels)
}

/// Uniform points in [0,1]^dims labelled by a random hyperplane through the
/// centre of the cube, with 10% of labels flipped.
pub fn random_classification(m: usize, dims: usize, seed: u64) -> Result<Dataset> {
    let mut rng = rng_from_seed(seed);
    let normal: Vec<f64> = (0..dims).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect();
    let mut rows = Vec::with_capacity(m);
    let mut labels = Vec::with_capacity(m);
    for _ in 0..m {
        let row: Vec<f64> = (0..dims).map(|_| rng.gen::<f64>()).collect();
        let side: f64 = row.iter().zip(&normal).map(|(x, n)| (x - 0.5) * n).sum();
        let mut label: i8 = if side >= 0.0 { 1 } else { -1 };
        if rng.gen::<f64>() < 0.1 {
            label = -label;
        }
        rows.push(row);
        labels.push(label);
    }
    Dataset::from_dense(&rows, &labels)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn separable_points_sit_on_the_right_side() {
        let ds = separable_2d(500, 3).unwrap();
        for inst in &ds.instances {
            let (x, y) = (inst.features.get(0), inst.features.get(1));
            assert!(f64::from(inst.label) * (x - y) > 0.2);
            assert!((0.0..=1.0).contains(&x) && (0.0..=1.0).contains(&y));
        }
    }

    #[test]
    fn generators_are_seeded() {
        assert_eq!(random_classification(50, 3, 1).unwrap(), random_classification(50, 3, 1).unwrap());
        assert_ne!(random_classification(50, 3, 1).unwrap(), random_classification(50, 3, 2).unwrap());
        assert_eq!(random_classification(7, 4, 0).unwrap().num_features, 4);
    }
}
