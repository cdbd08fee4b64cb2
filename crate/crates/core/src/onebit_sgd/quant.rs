use ndarray::Array2;

use crate::error::{Error, Result};

/// Wire size of one column's reconstruction values (two f64).
pub const SCALE_BITS_PER_COLUMN: usize = 128;
/// Wire size of a dense gradient entry.
pub const DENSE_BITS_PER_ENTRY: usize = 32;

/// Sign bits plus per-column reconstruction values.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantizedGradient {
    rows: usize,
    cols: usize,
    /// Row-major, one bit per entry.
    bits: Vec<u64>,
    pos_scale: Vec<f64>,
    neg_scale: Vec<f64>,
}

impl QuantizedGradient {
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn bit(&self, r: usize, c: usize) -> bool {
        let i = r * self.cols + c;
        self.bits[i / 64] >> (i % 64) & 1 == 1
    }

    pub fn pos_scale(&self) -> &[f64] {
        &self.pos_scale
    }

    pub fn neg_scale(&self) -> &[f64] {
        &self.neg_scale
    }

    pub fn dequantize(&self) -> Array2<f64> {
        Array2::from_shape_fn((self.rows, self.cols), |(r, c)| {
            if self.bit(r, c) {
                self.pos_scale[c]
            } else {
                -self.neg_scale[c]
            }
        })
    }

    /// Bits on the wire: one per entry plus the column scales.
    pub fn wire_bits(&self) -> usize {
        self.rows * self.cols + SCALE_BITS_PER_COLUMN * self.cols
    }
}

/// Wire bits per gradient entry for a matrix with `rows` rows.
pub fn bits_per_entry(rows: usize) -> f64 {
    1.0 + SCALE_BITS_PER_COLUMN as f64 / rows as f64
}

/// Quantizes `g + residual`: sign bit per entry, per-column mean of the
/// non-negative and of the negative magnitudes as reconstruction values.
/// Returns the quantized gradient and the new residual `a - dequantized`.
pub fn quantize(g: &Array2<f64>, residual: &Array2<f64>) -> Result<(QuantizedGradient, Array2<f64>)> {
    if g.dim() != residual.dim() {
        return Err(Error::Shape(format!("gradient {:?} vs residual {:?}", g.dim(), residual.dim())));
    }
    let a = g + residual;
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("gradient"));
    }
    let (rows, cols) = a.dim();
    let mut bits = vec![0u64; (rows * cols).div_ceil(64)];
    let mut pos_scale = vec![0.0; cols];
    let mut neg_scale = vec![0.0; cols];
    for c in 0..cols {
        let (mut ps, mut pn, mut ns, mut nn) = (0.0, 0usize, 0.0, 0usize);
        for r in 0..rows {
            let v = a[(r, c)];
            if v >= 0.0 {
                let i = r * cols + c;
                bits[i / 64] |= 1 << (i % 64);
                ps += v;
                pn += 1;
            } else {
                ns -= v;
                nn += 1;
            }
        }
        if pn > 0 {
            pos_scale[c] = ps / pn as f64;
        }
        if nn > 0 {
            neg_scale[c] = ns / nn as f64;
        }
    }
    let q = QuantizedGradient {
        rows,
        cols,
        bits,
        pos_scale,
        neg_scale,
    };
    let new_residual = &a - &q.dequantize();
    Ok((q, new_residual))
}

/// Sum of dequantized gradients, accumulated in input order.
pub fn aggregate(quants: &[QuantizedGradient]) -> Result<Array2<f64>> {
    let first = quants.first().ok_or(Error::Empty("quantized gradients"))?;
    let mut sum = Array2::zeros(first.shape());
    for q in quants {
        if q.shape() != first.shape() {
            return Err(Error::Shape(format!("{:?} vs {:?}", q.shape(), first.shape())));
        }
        sum += &q.dequantize();
    }
    Ok(sum)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;

    #[test]
    fn column_example() {
        let g = array![[1.0], [-2.0], [3.0]];
        let (q, r) = quantize(&g, &Array2::zeros((3, 1))).unwrap();
        assert_eq!((q.bit(0, 0), q.bit(1, 0), q.bit(2, 0)), (true, false, true));
        assert_eq!((q.pos_scale()[0], q.neg_scale()[0]), (2.0, 2.0));
        assert_eq!(q.dequantize(), array![[2.0], [-2.0], [2.0]]);
        assert_eq!(r, array![[-1.0], [0.0], [1.0]]);
    }

    #[test]
    fn zero_gradient() {
        let z = Array2::zeros((4, 3));
        let (q, r) = quantize(&z, &z).unwrap();
        assert!(q.pos_scale().iter().chain(q.neg_scale()).all(|&s| s == 0.0));
        assert_eq!(r, z);
    }

    #[test]
    fn aggregate_cases() {
        let g = array![[1.0, -0.5], [2.0, 0.5]];
        let z = Array2::zeros((2, 2));
        let (q, _) = quantize(&g, &z).unwrap();
        assert_eq!(aggregate(std::slice::from_ref(&q)).unwrap(), q.dequantize());
        let (qn, _) = quantize(&(-&g), &z).unwrap();
        let s = aggregate(&[q.clone(), qn]).unwrap();
        assert!(s.iter().all(|v| *v == 0.0));
        assert!(aggregate(&[]).is_err());
        let (other, _) = quantize(&Array2::zeros((3, 2)), &Array2::zeros((3, 2))).unwrap();
        assert!(aggregate(&[q, other]).is_err());
    }

    #[test]
    fn wire_size() {
        let (q, _) = quantize(&Array2::ones((64, 3)), &Array2::zeros((64, 3))).unwrap();
        assert_eq!(q.wire_bits(), 64 * 3 + 128 * 3);
        assert_eq!(bits_per_entry(64), 3.0);
        assert_eq!(q.wire_bits() as f64 / (64.0 * 3.0), bits_per_entry(64));
    }

    #[test]
    fn rejects_bad_input() {
        assert!(quantize(&Array2::zeros((2, 2)), &Array2::zeros((2, 3))).is_err());
        assert!(quantize(&array![[f64::NAN]], &array![[0.0]]).is_err());
    }

    proptest! {
        #[test]
        fn bookkeeping_identity(
            (rows, cols, vals) in (1usize..12, 1usize..5).prop_flat_map(|(r, c)| {
                (Just(r), Just(c), prop::collection::vec((-10.0f64..10.0, -1.0f64..1.0), r * c))
            })
        ) {
            let g = Array2::from_shape_fn((rows, cols), |(i, j)| vals[i * cols + j].0);
            let res = Array2::from_shape_fn((rows, cols), |(i, j)| vals[i * cols + j].1);
            let (q, nr) = quantize(&g, &res).unwrap();
            let back = q.dequantize() + &nr;
            for (x, y) in back.iter().zip((&g + &res).iter()) {
                prop_assert!((x - y).abs() <= 1e-12);
            }
            // reconstruction preserves column sums
            for c in 0..cols {
                let a: f64 = (&g + &res).column(c).sum();
                let d: f64 = q.dequantize().column(c).sum();
                prop_assert!((a - d).abs() < 1e-9);
            }
        }
    }
}
