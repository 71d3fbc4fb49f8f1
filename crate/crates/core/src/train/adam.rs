use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Moment estimates for bias-corrected Adam.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState<T> {
    pub m: Vec<T>,
    pub v: Vec<T>,
    pub step: u64,
    pub beta1: T,
    pub beta2: T,
    pub eps: T,
}

impl<T: Scalar> AdamState<T> {
    /// Zeroed moments with β1 = 0.9, β2 = 0.999, ε = 1e-8.
    pub fn new(len: usize) -> Self {
        Self {
            m: vec![T::zero(); len],
            v: vec![T::zero(); len],
            step: 0,
            beta1: T::of(0.9),
            beta2: T::of(0.999),
            eps: T::of(1e-8),
        }
    }

    pub fn len(&self) -> usize {
        self.m.len()
    }

    pub fn is_empty(&self) -> bool {
        self.m.is_empty()
    }

    /// Advances the step counter and returns the bias corrections
    /// `(1 - β1^t, 1 - β2^t)` for the new step.
    fn advance(&mut self) -> (T, T) {
        self.step += 1;
        let t = self.step as i32;
        (T::one() - self.beta1.powi(t), T::one() - self.beta2.powi(t))
    }

    /// Updates `params` in place against the moments starting at `offset`.
    fn update_slice(&mut self, offset: usize, params: &mut [T], grads: &[T], lr: T, corr: (T, T)) {
        let (b1, b2, eps) = (self.beta1, self.beta2, self.eps);
        let m = &mut self.m[offset..offset + params.len()];
        let v = &mut self.v[offset..offset + params.len()];
        for i in 0..params.len() {
            let g = grads[i];
            m[i] = b1 * m[i] + (T::one() - b1) * g;
            v[i] = b2 * v[i] + (T::one() - b2) * g * g;
            let m_hat = m[i] / corr.0;
            let v_hat = v[i] / corr.1;
            params[i] -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    }

    /// One Adam step over parameters stored in several buffers, visited in
    /// order. Total length must match the state.
    pub fn step_parts<'a, I>(&mut self, parts: I, lr: T) -> Result<()>
    where
        I: IntoIterator<Item = (&'a mut [T], &'a [T])>,
        T: 'a,
    {
        let parts: Vec<_> = parts.into_iter().collect();
        let mut total = 0;
        for (p, g) in &parts {
            if p.len() != g.len() {
                return Err(Error::shape("gradient", p.len(), g.len()));
            }
            total += p.len();
        }
        if total != self.len() {
            return Err(Error::shape("parameters", self.len(), total));
        }
        let corr = self.advance();
        let mut offset = 0;
        for (p, g) in parts {
            let n = p.len();
            self.update_slice(offset, p, g, lr, corr);
            offset += n;
        }
        Ok(())
    }
}

pub fn adam_step<T: Scalar>(params: &mut [T], grads: &[T], state: &mut AdamState<T>, lr: T) -> Result<()> {
    state.step_parts(std::iter::once((params, grads)), lr)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn oracle(p0: f64, g: f64, steps: usize, lr: f64) -> f64 {
        let (b1, b2, eps) = (0.9f64, 0.999f64, 1e-8);
        let (mut p, mut m, mut v) = (p0, 0.0, 0.0);
        for t in 1..=steps {
            m = b1 * m + (1.0 - b1) * g;
            v = b2 * v + (1.0 - b2) * g * g;
            let mh = m / (1.0 - b1.powi(t as i32));
            let vh = v / (1.0 - b2.powi(t as i32));
            p -= lr * mh / (vh.sqrt() + eps);
        }
        p
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut p = [0.0f64];
        let mut s = AdamState::new(1);
        adam_step(&mut p, &[1.0], &mut s, 1e-3).unwrap();
        assert!((p[0] + 1e-3).abs() < 1e-10);
        assert_eq!(s.step, 1);
    }

    #[test]
    fn zero_gradient_leaves_parameters() {
        let mut p = [0.5f64, -2.0, 7.0];
        let mut s = AdamState::new(3);
        for _ in 0..5 {
            adam_step(&mut p, &[0.0; 3], &mut s, 1e-3).unwrap();
        }
        assert_eq!(p, [0.5, -2.0, 7.0]);
    }

    #[test]
    fn two_steps_match_scalar_oracle() {
        let mut p = [0.25f64, -1.0];
        let g = [0.3, -1.7];
        let mut s = AdamState::new(2);
        adam_step(&mut p, &g, &mut s, 1e-3).unwrap();
        adam_step(&mut p, &g, &mut s, 1e-3).unwrap();
        assert!((p[0] - oracle(0.25, 0.3, 2, 1e-3)).abs() < 1e-12);
        assert!((p[1] - oracle(-1.0, -1.7, 2, 1e-3)).abs() < 1e-12);
    }

    #[test]
    fn split_buffers_equal_single_buffer() {
        let g = [0.1, 0.2, -0.3, 0.4];
        let mut whole = [1.0f64, 2.0, 3.0, 4.0];
        let mut s1 = AdamState::new(4);
        adam_step(&mut whole, &g, &mut s1, 1e-2).unwrap();
        let (mut a, mut b) = ([1.0f64, 2.0], [3.0f64, 4.0]);
        let mut s2 = AdamState::new(4);
        s2.step_parts([(&mut a[..], &g[..2]), (&mut b[..], &g[2..])], 1e-2).unwrap();
        assert_eq!([a[0], a[1], b[0], b[1]], whole);
        assert_eq!(s1, s2);
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let mut s = AdamState::new(2);
        assert!(matches!(adam_step(&mut [0.0f64; 2], &[0.0; 3], &mut s, 1e-3), Err(Error::Shape { .. })));
        assert!(matches!(adam_step(&mut [0.0f64; 3], &[0.0; 3], &mut s, 1e-3), Err(Error::Shape { .. })));
        assert_eq!(s.step, 0);
    }
}
