use rand::Rng;
use serde::{Deserialize, Serialize};

/// Row-major dense matrix of f64; vectors are `n x 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Tensor {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn uniform<R: Rng + ?Sized>(rows: usize, cols: usize, scale: f64, rng: &mut R) -> Self {
        let data = (0..rows * cols)
            .map(|_| rng.gen_range(-scale..scale))
            .collect();
        Tensor { rows, cols, data }
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn fill(&mut self, v: f64) {
        self.data.iter_mut().for_each(|x| *x = v);
    }

    /// `out[i] += sum_j self[rows.start + i, j] * x[j]` over a block of rows.
    pub fn matvec_rows_into(&self, rows: std::ops::Range<usize>, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.cols);
        for (o, r) in out.iter_mut().zip(rows) {
            let row = self.row(r);
            let mut acc = 0.0;
            for (w, v) in row.iter().zip(x) {
                acc += w * v;
            }
            *o += acc;
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.rows];
        self.matvec_rows_into(0..self.rows, x, &mut out);
        out
    }

    /// `out[j] += sum_i self[offset + i, j] * dy[i]`.
    pub fn matvec_t_rows_into(&self, offset: usize, dy: &[f64], out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.cols);
        for (i, &d) in dy.iter().enumerate() {
            if d == 0.0 {
                continue;
            }
            for (o, w) in out.iter_mut().zip(self.row(offset + i)) {
                *o += w * d;
            }
        }
    }

    /// `self[offset + i, j] += dy[i] * x[j]`.
    pub fn add_outer_rows(&mut self, offset: usize, dy: &[f64], x: &[f64]) {
        for (i, &d) in dy.iter().enumerate() {
            if d == 0.0 {
                continue;
            }
            for (w, v) in self.row_mut(offset + i).iter_mut().zip(x) {
                *w += d * v;
            }
        }
    }

    pub fn add_slice(&mut self, offset: usize, v: &[f64]) {
        for (a, b) in self.data[offset..offset + v.len()].iter_mut().zip(v) {
            *a += b;
        }
    }

    pub fn sum_squares(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }
}

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

pub fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|x| (x - max).exp()).sum::<f64>().ln();
    logits.iter().map(|x| x - lse).collect()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
