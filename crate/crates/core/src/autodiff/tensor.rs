use crate::error::{Error, Result};

/// Dense row-major `f64` array with an optional gradient accumulator.
///
/// The accumulator is present exactly when the tensor requires a gradient.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
    grad: Option<Vec<f64>>,
}

pub(crate) fn numel(shape: &[usize]) -> usize {
    shape.iter().product()
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        if numel(&shape) != data.len() {
            return Err(Error::InvalidShape(format!(
                "shape {:?} holds {} values, got {}",
                shape,
                numel(&shape),
                data.len()
            )));
        }
        Ok(Self {
            shape,
            data,
            grad: None,
        })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self {
            shape: shape.to_vec(),
            data: vec![0.0; numel(shape)],
            grad: None,
        }
    }

    pub fn scalar(value: f64) -> Self {
        Self {
            shape: Vec::new(),
            data: vec![value],
            grad: None,
        }
    }

    pub fn vector(data: Vec<f64>) -> Self {
        Self {
            shape: vec![data.len()],
            data,
            grad: None,
        }
    }

    pub fn matrix(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        Self::new(vec![rows, cols], data)
    }

    pub fn identity(n: usize) -> Self {
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            data[i * n + i] = 1.0;
        }
        Self {
            shape: vec![n, n],
            data,
            grad: None,
        }
    }

    /// Marks the tensor as trainable and allocates a zeroed gradient.
    pub fn requiring_grad(mut self) -> Self {
        self.set_requires_grad(true);
        self
    }

    pub fn set_requires_grad(&mut self, on: bool) {
        if on {
            if self.grad.is_none() {
                self.grad = Some(vec![0.0; self.data.len()]);
            }
        } else {
            self.grad = None;
        }
    }

    pub fn requires_grad(&self) -> bool {
        self.grad.is_some()
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    pub fn is_scalar(&self) -> bool {
        self.data.len() == 1 && self.shape.iter().all(|&d| d == 1)
    }

    pub fn item(&self) -> f64 {
        self.data[0]
    }

    pub fn grad(&self) -> Option<&[f64]> {
        self.grad.as_deref()
    }

    pub fn zero_grad(&mut self) {
        if let Some(g) = self.grad.as_mut() {
            g.iter_mut().for_each(|v| *v = 0.0);
        }
    }

    /// Adds `delta` into the gradient. No-op for tensors that do not require a gradient.
    pub fn accumulate_grad(&mut self, delta: &[f64]) {
        if let Some(g) = self.grad.as_mut() {
            debug_assert_eq!(g.len(), delta.len());
            for (a, d) in g.iter_mut().zip(delta) {
                *a += d;
            }
        }
    }

    pub(crate) fn grad_and_data_mut(&mut self) -> (Option<&[f64]>, &mut [f64]) {
        (self.grad.as_deref(), &mut self.data)
    }

    pub fn reshape(mut self, shape: &[usize]) -> Result<Self> {
        if numel(shape) != self.data.len() {
            return Err(Error::Shape {
                op: "reshape",
                lhs: self.shape,
                rhs: shape.to_vec(),
            });
        }
        self.shape = shape.to_vec();
        Ok(self)
    }

    /// Concatenates along `axis`; all other extents must agree.
    pub fn concat(parts: &[&Tensor], axis: usize) -> Result<Tensor> {
        let shapes: Vec<&[usize]> = parts.iter().map(|t| t.shape()).collect();
        let (shape, layout) = concat_layout(&shapes, axis)?;
        let mut data = Vec::with_capacity(numel(&shape));
        for o in 0..layout.outer {
            for (part, &w) in parts.iter().zip(&layout.widths) {
                data.extend_from_slice(&part.data[o * w..(o + 1) * w]);
            }
        }
        Tensor::new(shape, data)
    }

    /// Inverse of [`Tensor::concat`]: splits along `axis` into pieces of the given extents.
    pub fn split(&self, axis: usize, sizes: &[usize]) -> Result<Vec<Tensor>> {
        if axis >= self.shape.len() || sizes.iter().sum::<usize>() != self.shape[axis] {
            return Err(Error::InvalidShape(format!(
                "split: sizes {:?} do not partition axis {} of {:?}",
                sizes, axis, self.shape
            )));
        }
        let outer: usize = self.shape[..axis].iter().product();
        let inner: usize = self.shape[axis + 1..].iter().product();
        let row = self.shape[axis] * inner;
        let mut out = Vec::with_capacity(sizes.len());
        let mut offset = 0;
        for &s in sizes {
            let w = s * inner;
            let mut data = Vec::with_capacity(outer * w);
            for o in 0..outer {
                let start = o * row + offset;
                data.extend_from_slice(&self.data[start..start + w]);
            }
            let mut shape = self.shape.clone();
            shape[axis] = s;
            out.push(Tensor::new(shape, data)?);
            offset += w;
        }
        Ok(out)
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

pub(crate) struct ConcatLayout {
    pub outer: usize,
    /// Contiguous run length contributed by each part per outer index.
    pub widths: Vec<usize>,
}

pub(crate) fn concat_layout(shapes: &[&[usize]], axis: usize) -> Result<(Vec<usize>, ConcatLayout)> {
    let first = shapes
        .first()
        .ok_or_else(|| Error::InvalidShape("concat: no inputs".into()))?;
    if axis >= first.len() {
        return Err(Error::InvalidShape(format!(
            "concat: axis {} out of range for shape {:?}",
            axis, first
        )));
    }
    let mut total = 0;
    for s in shapes {
        let compatible = s.len() == first.len()
            && s.iter()
                .zip(first.iter())
                .enumerate()
                .all(|(i, (a, b))| i == axis || a == b);
        if !compatible {
            return Err(Error::Shape {
                op: "concat",
                lhs: first.to_vec(),
                rhs: s.to_vec(),
            });
        }
        total += s[axis];
    }
    let outer: usize = first[..axis].iter().product();
    let inner: usize = first[axis + 1..].iter().product();
    let widths = shapes.iter().map(|s| s[axis] * inner).collect();
    let mut shape = first.to_vec();
    shape[axis] = total;
    Ok((shape, ConcatLayout { outer, widths }))
}
