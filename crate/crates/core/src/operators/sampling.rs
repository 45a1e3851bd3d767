//! Bilinear interpolation of cell-centered fields, with zero outside the grid.

use crate::grid::GridSpec;

/// Visits the (at most four) grid nodes contributing to the bilinear
/// interpolant at `(x, y)` together with their interpolation weights.
/// Nodes outside the grid carry value zero and are skipped.
#[inline]
pub(crate) fn bilinear(spec: &GridSpec, x: f64, y: f64, mut visit: impl FnMut(usize, f64)) {
    let (u, v) = spec.to_cell_coords(x, y);
    let (nx, ny) = (spec.nx() as isize, spec.ny() as isize);
    let (fu, fv) = (u.floor(), v.floor());
    let (i0, j0) = (fu as isize, fv as isize);
    if i0 < -1 || j0 < -1 || i0 >= nx || j0 >= ny {
        return;
    }
    let (tx, ty) = (u - fu, v - fv);
    let corners = [
        (i0, j0, (1.0 - tx) * (1.0 - ty)),
        (i0 + 1, j0, tx * (1.0 - ty)),
        (i0, j0 + 1, (1.0 - tx) * ty),
        (i0 + 1, j0 + 1, tx * ty),
    ];
    for (i, j, w) in corners {
        if i >= 0 && j >= 0 && i < nx && j < ny && w != 0.0 {
            visit(spec.index(i as usize, j as usize), w);
        }
    }
}

#[inline]
pub(crate) fn sample(spec: &GridSpec, values: &[f64], x: f64, y: f64) -> f64 {
    let mut acc = 0.0;
    bilinear(spec, x, y, |k, w| acc += w * values[k]);
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reproduces_nodes_and_linear_data() {
        let spec = GridSpec::square(5, 0.0, 1.0).unwrap();
        let values: Vec<f64> = (0..25)
            .map(|k| {
                let (x, y) = spec.center(k % 5, k / 5);
                2.0 * x - y
            })
            .collect();
        let (x, y) = spec.center(2, 3);
        assert!((sample(&spec, &values, x, y) - values[spec.index(2, 3)]).abs() < 1e-14);
        assert!((sample(&spec, &values, 0.43, 0.61) - (0.86 - 0.61)).abs() < 1e-14);
    }

    #[test]
    fn fades_to_zero_half_a_cell_outside() {
        let spec = GridSpec::square(4, 0.0, 1.0).unwrap();
        let ones = vec![1.0; 16];
        assert!((sample(&spec, &ones, 0.5, 1.0) - 0.5).abs() < 1e-14);
        assert_eq!(sample(&spec, &ones, 0.5, 1.125), 0.0);
        assert_eq!(sample(&spec, &ones, -3.0, 0.5), 0.0);
    }
}
