//! Zero-padding leaks position: repeated constant convolutions of a constant
//! image, with and without down/up sampling.

use serde::{Deserialize, Serialize};

use crate::autodiff::{Padding, Resample, Tape};
use crate::error::Result;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BoundaryVariant {
    /// `layers` stacked 3x3 convolutions.
    Plain { layers: usize },
    /// Exact rationals overflow past roughly 18 convolutions (denominators are
    /// powers of 9), so keep the counts modest when running with `Rational64`.
    ///
    /// `steps` max-pool downsamplings, each preceded by `convs` convolutions,
    /// `middle` convolutions at the coarsest level, then `steps` nearest
    /// upsamplings each followed by `convs` convolutions. No skips.
    UNet { steps: usize, convs: usize, middle: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryStage<T> {
    pub label: String,
    /// `[h, w]`.
    pub map: Tensor<T>,
    pub defect_depth: usize,
    pub uniform_side: usize,
}

/// One more than the largest border distance of any pixel that differs from
/// 1, or 0 if the map is uniform. For a square map the uniform core then has
/// side `h - 2 * depth`.
pub fn defect_depth<T: Scalar>(map: &Tensor<T>) -> usize {
    let (h, w) = (map.shape()[0], map.shape()[1]);
    let mut depth = 0;
    for y in 0..h {
        for x in 0..w {
            if map.data()[y * w + x] != T::one() {
                let d = y.min(x).min(h - 1 - y).min(w - 1 - x);
                depth = depth.max(d + 1);
            }
        }
    }
    depth
}

fn stage<T: Scalar>(label: String, t: &Tensor<T>) -> Result<BoundaryStage<T>> {
    let (h, w) = (t.shape()[1], t.shape()[2]);
    let map = t.clone().reshape([h, w])?;
    let depth = defect_depth(&map);
    Ok(BoundaryStage {
        label,
        uniform_side: h.min(w).saturating_sub(2 * depth),
        defect_depth: depth,
        map,
    })
}

/// Every intermediate map of `variant` applied to a `size x size` image of
/// ones with the uniform 3x3 kernel of weight 1/9 and zero padding.
pub fn run_boundary<T: Scalar>(size: usize, variant: BoundaryVariant) -> Result<Vec<BoundaryStage<T>>> {
    let ninth = T::one() / T::from_usize(9);
    let mut tape = Tape::new();
    let kernel = tape.leaf(Tensor::full([3, 3, 1, 1], ninth), false);
    let mut h = tape.leaf(Tensor::ones([1, size, size, 1]), false);
    let mut stages = Vec::new();
    let mut n = 0;
    let mut conv = |tape: &mut Tape<T>, h: &mut crate::autodiff::Var, stages: &mut Vec<BoundaryStage<T>>| -> Result<()> {
        *h = tape.conv2d(*h, kernel, None, Padding::SameZero)?;
        n += 1;
        stages.push(stage(format!("conv{n}"), tape.value(*h))?);
        Ok(())
    };
    match variant {
        BoundaryVariant::Plain { layers } => {
            for _ in 0..layers {
                conv(&mut tape, &mut h, &mut stages)?;
            }
        }
        BoundaryVariant::UNet { steps, convs, middle } => {
            for s in 0..steps {
                for _ in 0..convs {
                    conv(&mut tape, &mut h, &mut stages)?;
                }
                h = tape.resample2x(h, Resample::Down)?;
                stages.push(stage(format!("down{}", s + 1), tape.value(h))?);
            }
            for _ in 0..middle {
                conv(&mut tape, &mut h, &mut stages)?;
            }
            for s in 0..steps {
                h = tape.resample2x(h, Resample::Up)?;
                stages.push(stage(format!("up{}", s + 1), tape.value(h))?);
                for _ in 0..convs {
                    conv(&mut tape, &mut h, &mut stages)?;
                }
            }
        }
    }
    Ok(stages)
}

/// The maps after each of `layers` plain convolutions.
pub fn demo_boundary<T: Scalar>(size: usize, layers: usize) -> Result<Vec<Tensor<T>>> {
    Ok(run_boundary(size, BoundaryVariant::Plain { layers })?
        .into_iter()
        .map(|s| s.map)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::Rational64;

    #[test]
    fn first_layer_tap_counts() {
        let maps = demo_boundary::<Rational64>(12, 1).unwrap();
        let m = &maps[0];
        assert_eq!(m.at(&[0, 0]), Rational64::new(4, 9));
        assert_eq!(m.at(&[0, 5]), Rational64::new(6, 9));
        assert_eq!(m.at(&[5, 5]), Rational64::from_integer(1));
    }

    #[test]
    fn defect_grows_one_pixel_per_layer() {
        let stages = run_boundary::<Rational64>(12, BoundaryVariant::Plain { layers: 5 }).unwrap();
        let depths: Vec<usize> = stages.iter().map(|s| s.defect_depth).collect();
        assert_eq!(depths, [1, 2, 3, 4, 5]);
        assert_eq!(stages[4].uniform_side, 2);
    }

    #[test]
    fn resampling_reaches_centre() {
        let v = BoundaryVariant::UNet { steps: 2, convs: 2, middle: 2 };
        let last = run_boundary::<Rational64>(12, v).unwrap().pop().unwrap();
        assert_eq!(last.uniform_side, 0);
        assert_ne!(last.map.at(&[6, 6]), Rational64::from_integer(1));
        let v = BoundaryVariant::UNet { steps: 4, convs: 1, middle: 2 };
        let last = run_boundary::<Rational64>(16, v).unwrap().pop().unwrap();
        assert_eq!(last.uniform_side, 0);
        let plain = run_boundary::<Rational64>(12, BoundaryVariant::Plain { layers: 5 }).unwrap();
        assert_eq!(plain[4].map.at(&[6, 6]), Rational64::from_integer(1));
    }
}
