use crate::{Error, Result};

/// Full Fourier cosine basis `cos(pi c . s)` over a box-normalized state, with
/// every integer coefficient vector `c` in `{0..=order}^dim` in lexicographic
/// order (first dimension most significant).
#[derive(Clone, Debug, PartialEq)]
pub struct FourierBasis {
    order: usize,
    bounds: Vec<(f64, f64)>,
    coefficients: Vec<Vec<u32>>,
    scales: Vec<f64>,
}

impl FourierBasis {
    pub fn new(order: usize, bounds: Vec<(f64, f64)>) -> Self {
        let dim = bounds.len();
        let base = order + 1;
        let count = base.pow(dim as u32);
        let coefficients: Vec<Vec<u32>> = (0..count)
            .map(|mut i| {
                let mut c = vec![0u32; dim];
                for d in (0..dim).rev() {
                    c[d] = (i % base) as u32;
                    i /= base;
                }
                c
            })
            .collect();
        let scales = coefficients
            .iter()
            .map(|c| {
                let norm = c.iter().map(|&k| (k * k) as f64).sum::<f64>().sqrt();
                if norm == 0.0 {
                    1.0
                } else {
                    1.0 / norm
                }
            })
            .collect();
        FourierBasis {
            order,
            bounds,
            coefficients,
            scales,
        }
    }

    /// Basis over `(x, y, xdot, ydot)` with positions in `[0,1]` and velocities in `[-1,1]`.
    pub fn pinball(order: usize) -> Self {
        Self::new(order, vec![(0.0, 1.0), (0.0, 1.0), (-1.0, 1.0), (-1.0, 1.0)])
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn dim(&self) -> usize {
        self.bounds.len()
    }

    pub fn len(&self) -> usize {
        self.coefficients.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coefficients.is_empty()
    }

    pub fn coefficients(&self) -> &[Vec<u32>] {
        &self.coefficients
    }

    /// Per-feature learning-rate scale `1 / |c|`, 1 for the constant feature.
    pub fn scales(&self) -> &[f64] {
        &self.scales
    }

    /// Maps `state` into the unit box, failing on components outside their bounds.
    pub fn normalize(&self, state: &[f64], out: &mut [f64]) -> Result<()> {
        if state.len() != self.dim() {
            return Err(Error::usage(format!(
                "state has {} components, basis expects {}",
                state.len(),
                self.dim()
            )));
        }
        for (i, ((&v, &(lo, hi)), o)) in state.iter().zip(&self.bounds).zip(out.iter_mut()).enumerate() {
            if !(v >= lo && v <= hi) {
                return Err(Error::Numeric(format!(
                    "component {i} = {v} outside [{lo}, {hi}]"
                )));
            }
            *o = (v - lo) / (hi - lo);
        }
        Ok(())
    }

    pub fn features(&self, state: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.len()];
        self.features_into(state, &mut out)?;
        Ok(out)
    }

    /// Writes all features into `out` (length [`FourierBasis::len`]).
    ///
    /// `cos(pi c . s)` is the real part of `prod_d exp(i pi c_d s_d)`, so the
    /// features come from products of per-dimension unit phasors instead of one
    /// cosine per feature.
    pub fn features_into(&self, state: &[f64], out: &mut [f64]) -> Result<()> {
        let dim = self.dim();
        let base = self.order + 1;
        let mut unit = [0.0f64; 8];
        let unit = if dim <= unit.len() {
            &mut unit[..dim]
        } else {
            return Err(Error::usage("Fourier basis supports at most 8 dimensions"));
        };
        self.normalize(state, unit)?;

        let mut phasors = vec![(1.0f64, 0.0f64); dim * base];
        for d in 0..dim {
            let (s, c) = (std::f64::consts::PI * unit[d]).sin_cos();
            for k in 1..base {
                let (pr, pi) = phasors[d * base + k - 1];
                phasors[d * base + k] = (pr * c - pi * s, pr * s + pi * c);
            }
        }

        let mut cur = vec![(1.0f64, 0.0f64)];
        let mut next = Vec::with_capacity(self.len());
        for d in 0..dim {
            next.clear();
            for &(ar, ai) in &cur {
                for &(br, bi) in &phasors[d * base..(d + 1) * base] {
                    next.push((ar * br - ai * bi, ar * bi + ai * br));
                }
            }
            std::mem::swap(&mut cur, &mut next);
        }
        for (o, (re, _)) in out.iter_mut().zip(cur) {
            *o = re;
        }
        Ok(())
    }
}
