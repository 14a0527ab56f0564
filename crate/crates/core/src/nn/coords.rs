use rand::distributions::Open01;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::tensor::Tensor;

/// Static per-pixel coordinates fed to CoordConv and CoordGate layers.
///
/// `values` is `[1, n, 1]` for 1-D extents and `[1, h, w, 2]` for 2-D ones;
/// channel 0 varies along x (the width axis), channel 1 along y.
#[derive(Clone, Debug, PartialEq)]
pub struct CoordinateMap<T> {
    pub values: Tensor<T>,
    /// Identical for every sample and epoch.
    pub is_static: bool,
}

impl<T: Real> CoordinateMap<T> {
    pub fn extents(&self) -> &[usize] {
        let s = self.values.shape();
        &s[1..s.len() - 1]
    }

    pub fn dims(&self) -> usize {
        self.values.channels()
    }
}

/// `i -> -1 + 2 i / (n - 1)`; a single sample sits at 0.
fn ramp<T: Real>(i: usize, n: usize) -> T {
    if n <= 1 {
        return T::zero();
    }
    T::from_f64(-1.0 + 2.0 * i as f64 / (n - 1) as f64)
}

fn check_extents(extents: &[usize]) -> Result<()> {
    if extents.is_empty() || extents.len() > 2 || extents.contains(&0) {
        return Err(Error::Config(format!(
            "coordinate extents must be 1 or 2 positive sizes, got {extents:?}"
        )));
    }
    Ok(())
}

/// Linear ramps from -1 to 1 inclusive along each axis.
pub fn make_coordinate_map<T: Real>(extents: &[usize]) -> Result<CoordinateMap<T>> {
    check_extents(extents)?;
    let values = match *extents {
        [n] => Tensor::from_fn([1, n, 1], |i| ramp(i, n)),
        [h, w] => Tensor::from_fn([1, h, w, 2], |i| {
            let (px, ch) = (i / 2, i % 2);
            if ch == 0 {
                ramp(px % w, w)
            } else {
                ramp(px / w, h)
            }
        }),
        _ => unreachable!(),
    };
    Ok(CoordinateMap {
        values,
        is_static: true,
    })
}

/// Same layout as [`make_coordinate_map`], filled with i.i.d. draws from the
/// open interval (-1, 1). Fixed by `seed`, so it is just as static.
pub fn make_random_static_map<T: Real>(extents: &[usize], seed: u64) -> Result<CoordinateMap<T>> {
    check_extents(extents)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut shape = vec![1];
    shape.extend_from_slice(extents);
    shape.push(extents.len());
    let values = Tensor::from_fn(shape, |_| {
        let u: f64 = rng.sample(Open01);
        T::from_f64(2.0 * u - 1.0)
    });
    Ok(CoordinateMap {
        values,
        is_static: true,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linspace_endpoints() {
        let m = make_coordinate_map::<f64>(&[3]).unwrap();
        assert_eq!(m.values.data(), &[-1.0, 0.0, 1.0]);
        let m = make_coordinate_map::<f64>(&[2]).unwrap();
        assert_eq!(m.values.data(), &[-1.0, 1.0]);
        let m = make_coordinate_map::<f64>(&[1]).unwrap();
        assert_eq!(m.values.data(), &[0.0]);
    }

    #[test]
    fn axes_vary_independently() {
        let m = make_coordinate_map::<f64>(&[3, 3]).unwrap();
        for y in 0..3 {
            for x in 0..3 {
                // channel 0: x only; channel 1: y only
                assert_eq!(m.values.at(&[0, y, x, 0]), m.values.at(&[0, 0, x, 0]));
                assert_eq!(m.values.at(&[0, y, x, 1]), m.values.at(&[0, y, 0, 1]));
            }
        }
        assert_eq!(m.values.at(&[0, 0, 2, 0]), 1.0);
        assert_eq!(m.values.at(&[0, 2, 0, 1]), 1.0);
        let rect = make_coordinate_map::<f64>(&[4, 7]).unwrap();
        let (lo, hi) = rect
            .values
            .data()
            .iter()
            .fold((f64::MAX, f64::MIN), |(l, h), &v| (l.min(v), h.max(v)));
        assert_eq!((lo, hi), (-1.0, 1.0));
    }

    #[test]
    fn random_map_is_seeded_and_open() {
        let a = make_random_static_map::<f64>(&[8, 8], 7).unwrap();
        let b = make_random_static_map::<f64>(&[8, 8], 7).unwrap();
        let c = make_random_static_map::<f64>(&[8, 8], 8).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!(a.values.data().iter().all(|&v| v > -1.0 && v < 1.0));
    }

    #[test]
    fn random_map_mean_near_zero() {
        let m = make_random_static_map::<f64>(&[10_000], 3).unwrap();
        let mean = m.values.sum() / 10_000.0;
        assert!(mean.abs() < 0.05, "mean {mean}");
    }

    #[test]
    fn rejects_empty_extent() {
        assert!(make_coordinate_map::<f64>(&[0]).is_err());
        assert!(make_coordinate_map::<f64>(&[2, 2, 2]).is_err());
    }
}
