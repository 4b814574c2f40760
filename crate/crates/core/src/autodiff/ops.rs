use alloc::vec;
use alloc::vec::Vec;

use super::{Op, Tape, Tensor, Value, Var};
use crate::error::{Error, Result};
use crate::fft::Direction;
use crate::math;
use crate::tensor::{ComplexVec, Shape};

/// Moduli below this are clamped in the `arg`/`abs` pullbacks.
pub(crate) const MODULUS_FLOOR: f64 = 1e-12;

pub const ATANH_CLAMP: f64 = 1.0 - 1e-9;

impl Tape {
    fn real_in(&self, v: Var, op: &'static str) -> Result<(&[f64], Shape)> {
        let t = &self.nodes[v.0].tensor;
        match &t.value {
            Value::Real(d) => Ok((d, t.shape)),
            other => Err(Error::KindMismatch {
                op,
                expected: "real",
                got: other.kind(),
            }),
        }
    }

    fn complex_in(&self, v: Var, op: &'static str) -> Result<(&ComplexVec, Shape)> {
        let t = &self.nodes[v.0].tensor;
        match &t.value {
            Value::Complex(z) => Ok((z, t.shape)),
            other => Err(Error::KindMismatch {
                op,
                expected: "complex",
                got: other.kind(),
            }),
        }
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<Shape> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa != sb {
            return Err(Error::ShapeMismatch { op, lhs: sa, rhs: sb });
        }
        Ok(sa)
    }

    fn zip_with(
        &mut self,
        name: &'static str,
        a: Var,
        b: Var,
        op: Op,
        fr: impl Fn(f64, f64) -> f64,
        fc: impl Fn((f64, f64), (f64, f64)) -> (f64, f64),
    ) -> Result<Var> {
        let shape = self.same_shape(name, a, b)?;
        let value = match (&self.nodes[a.0].tensor.value, &self.nodes[b.0].tensor.value) {
            (Value::Real(x), Value::Real(y)) => {
                Value::Real(x.iter().zip(y).map(|(&p, &q)| fr(p, q)).collect())
            }
            (Value::Complex(x), Value::Complex(y)) => {
                let mut out = ComplexVec::zeros(x.len());
                for i in 0..x.len() {
                    let (r, im) = fc(x.get(i), y.get(i));
                    out.re[i] = r;
                    out.im[i] = im;
                }
                Value::Complex(out)
            }
            (x, y) => {
                return Err(Error::KindMismatch {
                    op: name,
                    expected: x.kind(),
                    got: y.kind(),
                })
            }
        };
        self.push(op, Tensor { shape, value }, name)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip_with("add", a, b, Op::Add(a, b), |x, y| x + y, |x, y| (x.0 + y.0, x.1 + y.1))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip_with("sub", a, b, Op::Sub(a, b), |x, y| x - y, |x, y| (x.0 - y.0, x.1 - y.1))
    }

    /// Elementwise product; both operands real or both complex.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip_with(
            "mul",
            a,
            b,
            Op::Mul(a, b),
            |x, y| x * y,
            |x, y| (x.0 * y.0 - x.1 * y.1, x.0 * y.1 + x.1 * y.0),
        )
    }

    /// Multiplies by a real constant. Works on real and complex nodes.
    pub fn scale(&mut self, a: Var, k: f64) -> Result<Var> {
        let t = &self.nodes[a.0].tensor;
        let value = match &t.value {
            Value::Real(x) => Value::Real(x.iter().map(|v| v * k).collect()),
            Value::Complex(z) => Value::Complex(ComplexVec {
                re: z.re.iter().map(|v| v * k).collect(),
                im: z.im.iter().map(|v| v * k).collect(),
            }),
        };
        let shape = t.shape;
        self.push(Op::Scale(a, k), Tensor { shape, value }, "scale")
    }

    /// `a[r, c] + row[c]` for every row of `a`.
    pub fn add_row(&mut self, a: Var, row: Var) -> Result<Var> {
        let (x, sa) = self.real_in(a, "add_row")?;
        let (r, sr) = self.real_in(row, "add_row")?;
        if sr != Shape::vector(sa.cols) {
            return Err(Error::ShapeMismatch { op: "add_row", lhs: sa, rhs: sr });
        }
        let out = x
            .chunks(sa.cols)
            .flat_map(|chunk| chunk.iter().zip(r).map(|(p, q)| p + q))
            .collect();
        self.push(Op::AddRow(a, row), Tensor::real(sa, out), "add_row")
    }

    /// `a[r, c] * row[c]` for every row of `a`.
    pub fn mul_row(&mut self, a: Var, row: Var) -> Result<Var> {
        let (x, sa) = self.real_in(a, "mul_row")?;
        let (r, sr) = self.real_in(row, "mul_row")?;
        if sr != Shape::vector(sa.cols) {
            return Err(Error::ShapeMismatch { op: "mul_row", lhs: sa, rhs: sr });
        }
        let out = x
            .chunks(sa.cols)
            .flat_map(|chunk| chunk.iter().zip(r).map(|(p, q)| p * q))
            .collect();
        self.push(Op::MulRow(a, row), Tensor::real(sa, out), "mul_row")
    }

    /// `e^{i phi}` elementwise.
    pub fn polar(&mut self, phi: Var) -> Result<Var> {
        let (x, shape) = self.real_in(phi, "polar")?;
        let z = ComplexVec::from_phases(x);
        self.push(Op::Polar(phi), Tensor::complex(shape, z), "polar")
    }

    /// Principal argument in `(-pi, pi]`.
    pub fn arg(&mut self, z: Var) -> Result<Var> {
        let (w, shape) = self.complex_in(z, "arg")?;
        let out = w.args();
        self.push(Op::Arg(z), Tensor::real(shape, out), "arg")
    }

    pub fn abs(&mut self, z: Var) -> Result<Var> {
        let (w, shape) = self.complex_in(z, "abs")?;
        let out = w.moduli();
        self.push(Op::Abs(z), Tensor::real(shape, out), "abs")
    }

    /// Unitary forward DFT of a complex vector.
    pub fn dft(&mut self, z: Var) -> Result<Var> {
        self.dft_dir(z, Direction::Forward)
    }

    /// Unitary inverse DFT of a complex vector.
    pub fn idft(&mut self, z: Var) -> Result<Var> {
        self.dft_dir(z, Direction::Inverse)
    }

    fn dft_dir(&mut self, z: Var, dir: Direction) -> Result<Var> {
        let (w, shape) = self.complex_in(z, "dft")?;
        if shape.rows != 1 {
            return Err(Error::ShapeMismatch {
                op: "dft",
                lhs: shape,
                rhs: Shape::vector(shape.len()),
            });
        }
        let mut out = w.clone();
        self.plan(shape.cols)
            .apply_in_place(&mut out.re, &mut out.im, dir);
        self.push(Op::Dft(z, dir), Tensor::complex(shape, out), "dft")
    }

    /// Real matrix product `(n x k)(k x m)`.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (x, sa) = self.real_in(a, "matmul")?;
        let (y, sb) = self.real_in(b, "matmul")?;
        if sa.cols != sb.rows {
            return Err(Error::ShapeMismatch { op: "matmul", lhs: sa, rhs: sb });
        }
        let out = matmul_raw(x, y, sa.rows, sa.cols, sb.cols);
        let shape = Shape::new(sa.rows, sb.cols);
        self.push(Op::MatMul(a, b), Tensor::real(shape, out), "matmul")
    }

    /// Real `M x` for `M: n x m` and a length-`m` vector; returns a length-`n` vector.
    pub fn matvec(&mut self, m: Var, x: Var) -> Result<Var> {
        let mt = self.transpose(m)?;
        self.matmul(x, mt)
    }

    /// Complex `M z` for `M: n x m` and a length-`m` vector.
    pub fn cmatvec(&mut self, m: Var, z: Var) -> Result<Var> {
        let (mat, sm) = self.complex_in(m, "cmatvec")?;
        let (w, sz) = self.complex_in(z, "cmatvec")?;
        if sz.rows != 1 || sm.cols != sz.cols {
            return Err(Error::ShapeMismatch { op: "cmatvec", lhs: sm, rhs: sz });
        }
        let mut out = ComplexVec::zeros(sm.rows);
        for i in 0..sm.rows {
            let (mut sr, mut si) = (0.0, 0.0);
            for j in 0..sm.cols {
                let (a, b) = mat.get(i * sm.cols + j);
                let (c, d) = w.get(j);
                sr += a * c - b * d;
                si += a * d + b * c;
            }
            out.re[i] = sr;
            out.im[i] = si;
        }
        self.push(Op::CMatVec(m, z), Tensor::complex(Shape::vector(sm.rows), out), "cmatvec")
    }

    pub fn transpose(&mut self, a: Var) -> Result<Var> {
        let (x, s) = self.real_in(a, "transpose")?;
        let out = transpose_raw(x, s.rows, s.cols);
        self.push(Op::Transpose(a), Tensor::real(s.transposed(), out), "transpose")
    }

    fn map_real(&mut self, a: Var, name: &'static str, op: Op, f: impl Fn(f64) -> f64) -> Result<Var> {
        let (x, s) = self.real_in(a, name)?;
        let out = x.iter().map(|&v| f(v)).collect();
        self.push(op, Tensor::real(s, out), name)
    }

    pub fn sin(&mut self, a: Var) -> Result<Var> {
        self.map_real(a, "sin", Op::Sin(a), math::sin)
    }

    pub fn asin(&mut self, a: Var) -> Result<Var> {
        let (x, _) = self.real_in(a, "asin")?;
        if let Some(&bad) = x.iter().find(|v| v.abs() > 1.0) {
            return Err(Error::Domain { op: "asin", value: bad });
        }
        self.map_real(a, "asin", Op::Asin(a), math::asin)
    }

    pub fn tanh(&mut self, a: Var) -> Result<Var> {
        self.map_real(a, "tanh", Op::Tanh(a), math::tanh)
    }

    /// `atanh` of the input clamped to `|x| <= ATANH_CLAMP`; zero slope where clamped.
    pub fn atanh(&mut self, a: Var) -> Result<Var> {
        self.map_real(a, "atanh", Op::Atanh(a), |v| {
            math::atanh(v.clamp(-ATANH_CLAMP, ATANH_CLAMP))
        })
    }

    /// Fused `arcsin(sin(phi))` with slope `sign(cos phi)`.
    pub fn fold(&mut self, a: Var) -> Result<Var> {
        self.map_real(a, "fold", Op::Fold(a), math::fold_phase)
    }

    pub fn relu(&mut self, a: Var) -> Result<Var> {
        self.map_real(a, "relu", Op::Relu(a), |v| v.max(0.0))
    }

    pub fn softmax_rows(&mut self, a: Var) -> Result<Var> {
        let (x, s) = self.real_in(a, "softmax_rows")?;
        let mut out = Vec::with_capacity(x.len());
        for row in x.chunks(s.cols) {
            let m = row.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v));
            let start = out.len();
            let mut total = 0.0;
            for &v in row {
                let e = math::exp(v - m);
                total += e;
                out.push(e);
            }
            for v in &mut out[start..] {
                *v /= total;
            }
        }
        self.push(Op::SoftmaxRows(a), Tensor::real(s, out), "softmax_rows")
    }

    /// Per-row standardization `(x - mean) / sqrt(var + eps)`, without affine terms.
    pub fn layer_norm_rows(&mut self, a: Var, eps: f64) -> Result<Var> {
        let (x, s) = self.real_in(a, "layer_norm_rows")?;
        let n = s.cols as f64;
        let mut out = Vec::with_capacity(x.len());
        for row in x.chunks(s.cols) {
            let mean = row.iter().sum::<f64>() / n;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
            let inv = 1.0 / math::sqrt(var + eps);
            out.extend(row.iter().map(|v| (v - mean) * inv));
        }
        self.push(Op::LayerNormRows(a, eps), Tensor::real(s, out), "layer_norm_rows")
    }

    /// Columns `start..end` of a real matrix.
    pub fn slice_cols(&mut self, a: Var, start: usize, end: usize) -> Result<Var> {
        let (x, s) = self.real_in(a, "slice_cols")?;
        if start >= end || end > s.cols {
            return Err(Error::IndexOutOfRange { op: "slice_cols", index: end, shape: s });
        }
        let out = x.chunks(s.cols).flat_map(|r| r[start..end].iter().copied()).collect();
        let shape = Shape::new(s.rows, end - start);
        self.push(Op::SliceCols(a, start), Tensor::real(shape, out), "slice_cols")
    }

    /// Horizontal concatenation of real matrices with equal row counts.
    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let first = parts.first().ok_or(Error::EmptySamples)?;
        let rows = self.shape(*first).rows;
        let mut cols = 0;
        for &p in parts {
            let (_, s) = self.real_in(p, "concat_cols")?;
            if s.rows != rows {
                return Err(Error::ShapeMismatch {
                    op: "concat_cols",
                    lhs: self.shape(*first),
                    rhs: s,
                });
            }
            cols += s.cols;
        }
        let mut out = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for &p in parts {
                let c = self.shape(p).cols;
                out.extend_from_slice(&self.real(p)[r * c..(r + 1) * c]);
            }
        }
        self.push(
            Op::ConcatCols(parts.to_vec()),
            Tensor::real(Shape::new(rows, cols), out),
            "concat_cols",
        )
    }

    /// Row `r` of a real matrix as a `1 x cols` vector.
    pub fn row(&mut self, a: Var, r: usize) -> Result<Var> {
        let (x, s) = self.real_in(a, "row")?;
        if r >= s.rows {
            return Err(Error::IndexOutOfRange { op: "row", index: r, shape: s });
        }
        let out = x[r * s.cols..(r + 1) * s.cols].to_vec();
        self.push(Op::Row(a, r), Tensor::real(Shape::vector(s.cols), out), "row")
    }

    /// Flat element `i` of a real or complex node as a `1 x 1` node of the same kind.
    pub fn element(&mut self, a: Var, i: usize) -> Result<Var> {
        let t = &self.nodes[a.0].tensor;
        if i >= t.shape.len() {
            return Err(Error::IndexOutOfRange { op: "element", index: i, shape: t.shape });
        }
        let value = match &t.value {
            Value::Real(x) => Value::Real(vec![x[i]]),
            Value::Complex(z) => Value::Complex(ComplexVec::new(vec![z.re[i]], vec![z.im[i]])),
        };
        self.push(Op::Element(a, i), Tensor { shape: Shape::scalar(), value }, "element")
    }

    /// Gathers real scalars into a `1 x k` vector.
    pub fn stack(&mut self, scalars: &[Var]) -> Result<Var> {
        let mut out = Vec::with_capacity(scalars.len());
        for &s in scalars {
            let (x, shape) = self.real_in(s, "stack")?;
            if shape != Shape::scalar() {
                return Err(Error::ShapeMismatch { op: "stack", lhs: shape, rhs: Shape::scalar() });
            }
            out.push(x[0]);
        }
        let shape = Shape::vector(out.len());
        self.push(Op::Stack(scalars.to_vec()), Tensor::real(shape, out), "stack")
    }

    pub fn sum(&mut self, a: Var) -> Result<Var> {
        let (x, _) = self.real_in(a, "sum")?;
        let s = x.iter().sum();
        self.push(Op::Sum(a), Tensor::real(Shape::scalar(), vec![s]), "sum")
    }

    pub fn mean(&mut self, a: Var) -> Result<Var> {
        let (x, _) = self.real_in(a, "mean")?;
        let m = x.iter().sum::<f64>() / x.len() as f64;
        self.push(Op::Mean(a), Tensor::real(Shape::scalar(), vec![m]), "mean")
    }

    /// Mean squared error against a constant target.
    pub fn mse(&mut self, pred: Var, target: &[f64]) -> Result<Var> {
        let (x, s) = self.real_in(pred, "mse")?;
        if s.len() != target.len() {
            return Err(Error::ShapeMismatch { op: "mse", lhs: s, rhs: Shape::vector(target.len()) });
        }
        let l = x.iter().zip(target).map(|(p, t)| (p - t) * (p - t)).sum::<f64>() / x.len() as f64;
        self.push(Op::Mse(pred, target.to_vec()), Tensor::real(Shape::scalar(), vec![l]), "mse")
    }

    /// Mean absolute error against a constant target.
    pub fn mae(&mut self, pred: Var, target: &[f64]) -> Result<Var> {
        let (x, s) = self.real_in(pred, "mae")?;
        if s.len() != target.len() {
            return Err(Error::ShapeMismatch { op: "mae", lhs: s, rhs: Shape::vector(target.len()) });
        }
        let l = x.iter().zip(target).map(|(p, t)| (p - t).abs()).sum::<f64>() / x.len() as f64;
        self.push(Op::Mae(pred, target.to_vec()), Tensor::real(Shape::scalar(), vec![l]), "mae")
    }
}

pub(crate) fn matmul_raw(a: &[f64], b: &[f64], n: usize, k: usize, m: usize) -> Vec<f64> {
    let mut out = vec![0.0; n * m];
    for i in 0..n {
        let orow = &mut out[i * m..(i + 1) * m];
        for p in 0..k {
            let av = a[i * k + p];
            let brow = &b[p * m..(p + 1) * m];
            for (o, &bv) in orow.iter_mut().zip(brow) {
                *o += av * bv;
            }
        }
    }
    out
}

pub(crate) fn transpose_raw(a: &[f64], rows: usize, cols: usize) -> Vec<f64> {
    let mut out = vec![0.0; a.len()];
    for r in 0..rows {
        for c in 0..cols {
            out[c * rows + r] = a[r * cols + c];
        }
    }
    out
}
