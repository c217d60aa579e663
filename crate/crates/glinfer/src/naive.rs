//! The unadjusted comparator: a two-sided Z-test for a segment mean
//! difference that treats the detected changepoint locations as fixed in
//! advance.  It ignores the selection event entirely, which is exactly why
//! its null p-values come out anti-conservative in the simulations.

use glinfer_core::contrast::{fl_segment, SelectedModel1D};
use glinfer_core::tg::norm_sf;
use glinfer_core::{Error, Result};
use nalgebra::DVector;

/// Two-sided normal p-value for the mean difference between the two fitted
/// segments adjacent to `location`, with known noise level `sigma`.  The
/// variance is `sigma^2 (1/n_left + 1/n_right)`, i.e. the usual two-sample
/// Z-test with the segmentation taken at face value.
pub fn naive_z_pvalue(
    y: &DVector<f64>,
    model: &SelectedModel1D,
    location: usize,
    sigma: f64,
) -> Result<(f64, f64)> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::BadParameter(format!("sigma must be positive, got {sigma}")));
    }
    if y.len() != model.n {
        return Err(Error::Dimension(format!(
            "y has {} entries, model describes {}",
            y.len(),
            model.n
        )));
    }
    // The segment-mean-difference contrast; its norm already encodes
    // sqrt(1/n_left + 1/n_right).
    let v = fl_segment(model.n, &model.locations, location, 1)?;
    let z = v.dot(y) / (sigma * v.norm());
    Ok((z, (2.0 * norm_sf(z.abs())).min(1.0)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn model(n: usize, locations: &[usize]) -> SelectedModel1D {
        SelectedModel1D {
            n,
            locations: locations.to_vec(),
            signs: vec![1; locations.len()],
        }
    }

    #[test]
    fn equal_segment_means_give_p_one() {
        let y = DVector::from_vec(vec![3.0, 3.0, 3.0, 3.0, 3.0, 3.0]);
        let (z, p) = naive_z_pvalue(&y, &model(6, &[3]), 3, 1.0).unwrap();
        assert_relative_eq!(z, 0.0, epsilon = 1e-15);
        assert_relative_eq!(p, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn z_statistic_scales_linearly_with_the_data() {
        let y = DVector::from_vec(vec![0.2, -0.1, 0.4, 1.3, 1.9, 1.1]);
        let (z1, _) = naive_z_pvalue(&y, &model(6, &[3]), 3, 1.0).unwrap();
        let scaled = &y * 2.5;
        let (z2, _) = naive_z_pvalue(&scaled, &model(6, &[3]), 3, 1.0).unwrap();
        assert_relative_eq!(z2, 2.5 * z1, max_relative = 1e-12);
    }

    #[test]
    fn variance_uses_both_segment_lengths() {
        // Segments {1,2} and {3,4,5,6}: var = sigma^2 (1/2 + 1/4).
        let y = DVector::from_vec(vec![0.0, 0.0, 1.0, 1.0, 1.0, 1.0]);
        let (z, _) = naive_z_pvalue(&y, &model(6, &[2]), 2, 2.0).unwrap();
        let expected = 1.0 / (2.0 * (0.5f64 + 0.25).sqrt());
        assert_relative_eq!(z, expected, max_relative = 1e-12);
    }

    #[test]
    fn rejects_bad_inputs() {
        let y = DVector::from_vec(vec![0.0, 1.0, 2.0]);
        assert!(naive_z_pvalue(&y, &model(6, &[3]), 3, 1.0).is_err());
        assert!(naive_z_pvalue(&y, &model(3, &[1]), 1, 0.0).is_err());
        // Location not in the model.
        assert!(naive_z_pvalue(&y, &model(3, &[1]), 2, 1.0).is_err());
    }
}
