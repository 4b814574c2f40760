use alloc::vec;
use alloc::vec::Vec;

use super::ops::{matmul_raw, transpose_raw, ATANH_CLAMP, MODULUS_FLOOR};
use super::{Gradient, Op, Tape, Value, Var};
use crate::error::{Error, Result};
use crate::math;
use crate::tensor::{ComplexVec, RealVec, Shape};

impl Tape {
    /// Reverse sweep from a real `1 x 1` loss node.
    ///
    /// Parameters that do not influence `loss` get a zero gradient.
    pub fn backward(&self, loss: Var) -> Result<Gradient> {
        let t = &self.nodes[loss.0].tensor;
        if let Value::Complex(_) = t.value {
            return Err(Error::KindMismatch { op: "backward", expected: "real", got: "complex" });
        }
        if t.shape != Shape::scalar() {
            return Err(Error::ShapeMismatch { op: "backward", lhs: t.shape, rhs: Shape::scalar() });
        }

        let mut grads: Vec<RealVec> = self
            .params
            .iter()
            .map(|&p| RealVec::zeros(self.shape(p).len()))
            .collect();
        let mut cot: Vec<Option<Value>> = vec![None; loss.0 + 1];
        cot[loss.0] = Some(Value::Real(vec![1.0]));

        for i in (0..=loss.0).rev() {
            let Some(g) = cot[i].take() else { continue };
            let node = &self.nodes[i];
            let shape = node.tensor.shape;
            match &node.op {
                Op::Constant => {}
                Op::Param(idx) => grads[*idx].data = into_real(g),
                Op::Add(a, b) => {
                    acc(&mut cot, *a, g.clone());
                    acc(&mut cot, *b, g);
                }
                Op::Sub(a, b) => {
                    acc(&mut cot, *a, g.clone());
                    acc(&mut cot, *b, scale_value(g, -1.0));
                }
                Op::Scale(a, k) => acc(&mut cot, *a, scale_value(g, *k)),
                Op::Mul(a, b) => match g {
                    Value::Real(g) => {
                        let (x, y) = (self.real(*a), self.real(*b));
                        let ga = g.iter().zip(y).map(|(g, y)| g * y).collect();
                        let gb = g.iter().zip(x).map(|(g, x)| g * x).collect();
                        acc(&mut cot, *a, Value::Real(ga));
                        acc(&mut cot, *b, Value::Real(gb));
                    }
                    Value::Complex(g) => {
                        let ga = mul_conj(&g, self.complex(*b));
                        let gb = mul_conj(&g, self.complex(*a));
                        acc(&mut cot, *a, Value::Complex(ga));
                        acc(&mut cot, *b, Value::Complex(gb));
                    }
                },
                Op::AddRow(a, row) => {
                    let g = into_real(g);
                    let mut gr = vec![0.0; shape.cols];
                    for chunk in g.chunks(shape.cols) {
                        for (s, v) in gr.iter_mut().zip(chunk) {
                            *s += v;
                        }
                    }
                    acc(&mut cot, *a, Value::Real(g));
                    acc(&mut cot, *row, Value::Real(gr));
                }
                Op::MulRow(a, row) => {
                    let g = into_real(g);
                    let (x, r) = (self.real(*a), self.real(*row));
                    let mut ga = Vec::with_capacity(g.len());
                    let mut gr = vec![0.0; shape.cols];
                    for (gc, xc) in g.chunks(shape.cols).zip(x.chunks(shape.cols)) {
                        for c in 0..shape.cols {
                            ga.push(gc[c] * r[c]);
                            gr[c] += gc[c] * xc[c];
                        }
                    }
                    acc(&mut cot, *a, Value::Real(ga));
                    acc(&mut cot, *row, Value::Real(gr));
                }
                Op::Polar(phi) => {
                    let g = into_complex(g);
                    let w = self.complex(Var(i));
                    let gp = (0..w.len())
                        .map(|t| 2.0 * (g.im[t] * w.re[t] - g.re[t] * w.im[t]))
                        .collect();
                    acc(&mut cot, *phi, Value::Real(gp));
                }
                Op::Arg(z) => {
                    let g = into_real(g);
                    let w = self.complex(*z);
                    let mut out = ComplexVec::zeros(w.len());
                    for (t, gt) in g.iter().enumerate() {
                        let (a, b) = w.get(t);
                        let r2 = (a * a + b * b).max(MODULUS_FLOOR * MODULUS_FLOOR);
                        out.re[t] = 0.5 * gt * (-b) / r2;
                        out.im[t] = 0.5 * gt * a / r2;
                    }
                    acc(&mut cot, *z, Value::Complex(out));
                }
                Op::Abs(z) => {
                    let g = into_real(g);
                    let w = self.complex(*z);
                    let mut out = ComplexVec::zeros(w.len());
                    for (t, gt) in g.iter().enumerate() {
                        let (a, b) = w.get(t);
                        let r = math::hypot(a, b).max(MODULUS_FLOOR);
                        out.re[t] = 0.5 * gt * a / r;
                        out.im[t] = 0.5 * gt * b / r;
                    }
                    acc(&mut cot, *z, Value::Complex(out));
                }
                Op::Dft(z, dir) => {
                    let mut g = into_complex(g);
                    let back = match dir {
                        crate::fft::Direction::Forward => crate::fft::Direction::Inverse,
                        crate::fft::Direction::Inverse => crate::fft::Direction::Forward,
                    };
                    let plan = self
                        .plans
                        .iter()
                        .find(|p| p.len() == shape.cols)
                        .expect("plan recorded in forward pass");
                    plan.apply_in_place(&mut g.re, &mut g.im, back);
                    acc(&mut cot, *z, Value::Complex(g));
                }
                Op::MatMul(a, b) => {
                    let g = into_real(g);
                    let (sa, sb) = (self.shape(*a), self.shape(*b));
                    let bt = transpose_raw(self.real(*b), sb.rows, sb.cols);
                    let at = transpose_raw(self.real(*a), sa.rows, sa.cols);
                    let ga = matmul_raw(&g, &bt, sa.rows, sb.cols, sb.rows);
                    let gb = matmul_raw(&at, &g, sa.cols, sa.rows, sb.cols);
                    acc(&mut cot, *a, Value::Real(ga));
                    acc(&mut cot, *b, Value::Real(gb));
                }
                Op::CMatVec(m, z) => {
                    let g = into_complex(g);
                    let sm = self.shape(*m);
                    let (mat, w) = (self.complex(*m), self.complex(*z));
                    let mut gz = ComplexVec::zeros(sm.cols);
                    let mut gm = ComplexVec::zeros(sm.len());
                    for r in 0..sm.rows {
                        let (gr, gi) = g.get(r);
                        for c in 0..sm.cols {
                            let k = r * sm.cols + c;
                            let (a, b) = mat.get(k);
                            // conj(M) * g
                            gz.re[c] += a * gr + b * gi;
                            gz.im[c] += a * gi - b * gr;
                            // g * conj(z)
                            let (zr, zi) = w.get(c);
                            gm.re[k] = gr * zr + gi * zi;
                            gm.im[k] = gi * zr - gr * zi;
                        }
                    }
                    acc(&mut cot, *m, Value::Complex(gm));
                    acc(&mut cot, *z, Value::Complex(gz));
                }
                Op::Transpose(a) => {
                    let g = into_real(g);
                    acc(&mut cot, *a, Value::Real(transpose_raw(&g, shape.rows, shape.cols)));
                }
                Op::Sin(a) => {
                    let x = self.real(*a);
                    let ga = zip_map(g, x, |g, x| g * math::cos(x));
                    acc(&mut cot, *a, ga);
                }
                Op::Asin(a) => {
                    let x = self.real(*a);
                    let ga = zip_map(g, x, |g, x| {
                        let d = 1.0 - x * x;
                        if d <= 0.0 {
                            0.0
                        } else {
                            g / math::sqrt(d)
                        }
                    });
                    acc(&mut cot, *a, ga);
                }
                Op::Tanh(a) => {
                    let y = self.real(Var(i));
                    acc(&mut cot, *a, zip_map(g, y, |g, y| g * (1.0 - y * y)));
                }
                Op::Atanh(a) => {
                    let x = self.real(*a);
                    let ga = zip_map(g, x, |g, x| {
                        if x.abs() > ATANH_CLAMP {
                            0.0
                        } else {
                            g / (1.0 - x * x)
                        }
                    });
                    acc(&mut cot, *a, ga);
                }
                Op::Fold(a) => {
                    let x = self.real(*a);
                    acc(&mut cot, *a, zip_map(g, x, |g, x| g * math::fold_phase_slope(x)));
                }
                Op::Relu(a) => {
                    let x = self.real(*a);
                    acc(&mut cot, *a, zip_map(g, x, |g, x| if x > 0.0 { g } else { 0.0 }));
                }
                Op::SoftmaxRows(a) => {
                    let g = into_real(g);
                    let y = self.real(Var(i));
                    let mut ga = Vec::with_capacity(g.len());
                    for (gr, yr) in g.chunks(shape.cols).zip(y.chunks(shape.cols)) {
                        let dot: f64 = gr.iter().zip(yr).map(|(g, y)| g * y).sum();
                        ga.extend(gr.iter().zip(yr).map(|(g, y)| y * (g - dot)));
                    }
                    acc(&mut cot, *a, Value::Real(ga));
                }
                Op::LayerNormRows(a, eps) => {
                    let g = into_real(g);
                    let (x, y) = (self.real(*a), self.real(Var(i)));
                    let n = shape.cols as f64;
                    let mut ga = Vec::with_capacity(g.len());
                    for ((gr, xr), yr) in g
                        .chunks(shape.cols)
                        .zip(x.chunks(shape.cols))
                        .zip(y.chunks(shape.cols))
                    {
                        let mean = xr.iter().sum::<f64>() / n;
                        let var = xr.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
                        let inv = 1.0 / math::sqrt(var + eps);
                        let sg: f64 = gr.iter().sum();
                        let sgy: f64 = gr.iter().zip(yr).map(|(g, y)| g * y).sum();
                        ga.extend(
                            gr.iter()
                                .zip(yr)
                                .map(|(g, y)| inv / n * (n * g - sg - y * sgy)),
                        );
                    }
                    acc(&mut cot, *a, Value::Real(ga));
                }
                Op::SliceCols(a, start) => {
                    let g = into_real(g);
                    let sa = self.shape(*a);
                    let mut ga = vec![0.0; sa.len()];
                    for (r, gr) in g.chunks(shape.cols).enumerate() {
                        let off = r * sa.cols + start;
                        ga[off..off + shape.cols].copy_from_slice(gr);
                    }
                    acc(&mut cot, *a, Value::Real(ga));
                }
                Op::ConcatCols(parts) => {
                    let g = into_real(g);
                    let mut offset = 0;
                    for &p in parts {
                        let c = self.shape(p).cols;
                        let gp = g
                            .chunks(shape.cols)
                            .flat_map(|r| r[offset..offset + c].iter().copied())
                            .collect();
                        acc(&mut cot, p, Value::Real(gp));
                        offset += c;
                    }
                }
                Op::Row(a, r) => {
                    let g = into_real(g);
                    let sa = self.shape(*a);
                    let mut ga = vec![0.0; sa.len()];
                    ga[r * sa.cols..(r + 1) * sa.cols].copy_from_slice(&g);
                    acc(&mut cot, *a, Value::Real(ga));
                }
                Op::Element(a, idx) => {
                    let n = self.shape(*a).len();
                    let ga = match g {
                        Value::Real(g) => {
                            let mut v = vec![0.0; n];
                            v[*idx] = g[0];
                            Value::Real(v)
                        }
                        Value::Complex(g) => {
                            let mut v = ComplexVec::zeros(n);
                            v.re[*idx] = g.re[0];
                            v.im[*idx] = g.im[0];
                            Value::Complex(v)
                        }
                    };
                    acc(&mut cot, *a, ga);
                }
                Op::Stack(scalars) => {
                    let g = into_real(g);
                    for (&s, &v) in scalars.iter().zip(&g) {
                        acc(&mut cot, s, Value::Real(vec![v]));
                    }
                }
                Op::Sum(a) => {
                    let g0 = into_real(g)[0];
                    let n = self.shape(*a).len();
                    acc(&mut cot, *a, Value::Real(vec![g0; n]));
                }
                Op::Mean(a) => {
                    let g0 = into_real(g)[0];
                    let n = self.shape(*a).len();
                    acc(&mut cot, *a, Value::Real(vec![g0 / n as f64; n]));
                }
                Op::Mse(p, target) => {
                    let g0 = into_real(g)[0];
                    let x = self.real(*p);
                    let n = x.len() as f64;
                    let gp = x
                        .iter()
                        .zip(target)
                        .map(|(x, t)| g0 * 2.0 * (x - t) / n)
                        .collect();
                    acc(&mut cot, *p, Value::Real(gp));
                }
                Op::Mae(p, target) => {
                    let g0 = into_real(g)[0];
                    let x = self.real(*p);
                    let n = x.len() as f64;
                    let gp = x
                        .iter()
                        .zip(target)
                        .map(|(x, t)| {
                            let d = x - t;
                            let s = if d > 0.0 {
                                1.0
                            } else if d < 0.0 {
                                -1.0
                            } else {
                                0.0
                            };
                            g0 * s / n
                        })
                        .collect();
                    acc(&mut cot, *p, Value::Real(gp));
                }
            }
        }
        Ok(Gradient { grads })
    }
}

fn acc(cot: &mut [Option<Value>], v: Var, g: Value) {
    match (&mut cot[v.0], g) {
        (slot @ None, g) => *slot = Some(g),
        (Some(Value::Real(x)), Value::Real(g)) => {
            for (a, b) in x.iter_mut().zip(g) {
                *a += b;
            }
        }
        (Some(Value::Complex(x)), Value::Complex(g)) => {
            for (a, b) in x.re.iter_mut().zip(g.re) {
                *a += b;
            }
            for (a, b) in x.im.iter_mut().zip(g.im) {
                *a += b;
            }
        }
        _ => unreachable!("cotangent kind differs from node kind"),
    }
}

fn into_real(g: Value) -> Vec<f64> {
    match g {
        Value::Real(g) => g,
        Value::Complex(_) => unreachable!("real node with complex cotangent"),
    }
}

fn into_complex(g: Value) -> ComplexVec {
    match g {
        Value::Complex(g) => g,
        Value::Real(_) => unreachable!("complex node with real cotangent"),
    }
}

fn scale_value(g: Value, k: f64) -> Value {
    match g {
        Value::Real(mut g) => {
            g.iter_mut().for_each(|v| *v *= k);
            Value::Real(g)
        }
        Value::Complex(mut g) => {
            g.re.iter_mut().chain(g.im.iter_mut()).for_each(|v| *v *= k);
            Value::Complex(g)
        }
    }
}

fn zip_map(g: Value, x: &[f64], f: impl Fn(f64, f64) -> f64) -> Value {
    let g = into_real(g);
    Value::Real(g.iter().zip(x).map(|(&g, &x)| f(g, x)).collect())
}

/// `g * conj(w)` elementwise.
fn mul_conj(g: &ComplexVec, w: &ComplexVec) -> ComplexVec {
    let mut out = ComplexVec::zeros(g.len());
    for t in 0..g.len() {
        let (gr, gi) = g.get(t);
        let (a, b) = w.get(t);
        out.re[t] = gr * a + gi * b;
        out.im[t] = gi * a - gr * b;
    }
    out
}
