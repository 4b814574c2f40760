//! Define-by-run reverse-mode differentiation over real and complex tensors.
//!
//! Every recording method on [`Tape`] evaluates its forward value eagerly and
//! appends a node, so node order is a topological order. [`Tape::backward`]
//! walks the nodes in reverse and returns one gradient per registered
//! parameter, in registration order.
//!
//! Complex nodes carry the Wirtinger cotangent `dL/d conj(w)` for the real
//! loss `L`. With that convention a linear map `w' = M w` pulls back as
//! `M^H`, so the unitary DFT pulls back through its inverse and a phase
//! rotation through its conjugate. Where a complex node meets a real one the
//! real derivative is `2 Re(conj(g) dw/dx)`.
//!
//! All tensors are row-major `rows x cols`; vectors are `1 x n`.

mod backward;
pub mod gradcheck;
pub(crate) mod ops;

pub use ops::ATANH_CLAMP;

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::fft::{DftPlan, Direction};
use crate::tensor::{ComplexVec, RealVec, Shape};

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Real(Vec<f64>),
    Complex(ComplexVec),
}

impl Value {
    pub fn kind(&self) -> &'static str {
        match self {
            Value::Real(_) => "real",
            Value::Complex(_) => "complex",
        }
    }

    fn is_finite(&self) -> bool {
        match self {
            Value::Real(v) => v.iter().all(|x| x.is_finite()),
            Value::Complex(z) => z.is_finite(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub shape: Shape,
    pub value: Value,
}

impl Tensor {
    pub fn real(shape: Shape, data: Vec<f64>) -> Self {
        debug_assert_eq!(shape.len(), data.len());
        Tensor {
            shape,
            value: Value::Real(data),
        }
    }

    pub fn complex(shape: Shape, z: ComplexVec) -> Self {
        debug_assert_eq!(shape.len(), z.len());
        Tensor {
            shape,
            value: Value::Complex(z),
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) enum Op {
    Constant,
    Param(usize),
    Add(Var, Var),
    Sub(Var, Var),
    Scale(Var, f64),
    Mul(Var, Var),
    AddRow(Var, Var),
    MulRow(Var, Var),
    Polar(Var),
    Arg(Var),
    Abs(Var),
    Dft(Var, Direction),
    MatMul(Var, Var),
    CMatVec(Var, Var),
    Transpose(Var),
    Sin(Var),
    Asin(Var),
    Tanh(Var),
    Atanh(Var),
    Fold(Var),
    Relu(Var),
    SoftmaxRows(Var),
    LayerNormRows(Var, f64),
    SliceCols(Var, usize),
    ConcatCols(Vec<Var>),
    Row(Var, usize),
    Element(Var, usize),
    Stack(Vec<Var>),
    Sum(Var),
    Mean(Var),
    Mse(Var, Vec<f64>),
    Mae(Var, Vec<f64>),
}

#[derive(Debug, Clone)]
pub(crate) struct Node {
    pub(crate) tensor: Tensor,
    pub(crate) op: Op,
}

/// Per-parameter gradients, aligned with the order of [`Tape::param`] calls.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub grads: Vec<RealVec>,
}

impl Gradient {
    pub fn flatten(&self) -> Vec<f64> {
        self.grads.iter().flat_map(|g| g.data.iter().copied()).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.grads.iter().all(RealVec::is_finite)
    }
}

#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    params: Vec<Var>,
    plans: Vec<DftPlan>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    /// Registers a trainable real leaf.
    pub fn param(&mut self, data: &[f64], shape: Shape) -> Result<Var> {
        check_len("param", shape, data.len())?;
        let idx = self.params.len();
        let var = self.push(Op::Param(idx), Tensor::real(shape, data.to_vec()), "param")?;
        self.params.push(var);
        Ok(var)
    }

    pub fn param_vec(&mut self, data: &[f64]) -> Result<Var> {
        self.param(data, Shape::vector(data.len()))
    }

    pub fn constant(&mut self, data: &[f64], shape: Shape) -> Result<Var> {
        check_len("constant", shape, data.len())?;
        self.push(Op::Constant, Tensor::real(shape, data.to_vec()), "constant")
    }

    pub fn constant_vec(&mut self, data: &[f64]) -> Result<Var> {
        self.constant(data, Shape::vector(data.len()))
    }

    pub fn constant_complex(&mut self, z: ComplexVec, shape: Shape) -> Result<Var> {
        check_len("constant_complex", shape, z.len())?;
        self.push(Op::Constant, Tensor::complex(shape, z), "constant_complex")
    }

    pub fn tensor(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].tensor
    }

    pub fn shape(&self, v: Var) -> Shape {
        self.nodes[v.0].tensor.shape
    }

    /// Real data of `v`; panics on complex nodes.
    pub fn real(&self, v: Var) -> &[f64] {
        match &self.nodes[v.0].tensor.value {
            Value::Real(d) => d,
            Value::Complex(_) => panic!("node {} is complex", v.0),
        }
    }

    /// Complex data of `v`; panics on real nodes.
    pub fn complex(&self, v: Var) -> &ComplexVec {
        match &self.nodes[v.0].tensor.value {
            Value::Complex(z) => z,
            Value::Real(_) => panic!("node {} is real", v.0),
        }
    }

    /// Value of a real `1 x 1` node.
    pub fn scalar(&self, v: Var) -> f64 {
        self.real(v)[0]
    }

    fn push(&mut self, op: Op, tensor: Tensor, name: &'static str) -> Result<Var> {
        if !tensor.value.is_finite() {
            return Err(Error::NonFinite { op: name });
        }
        self.nodes.push(Node { tensor, op });
        Ok(Var(self.nodes.len() - 1))
    }

    fn plan(&mut self, len: usize) -> &DftPlan {
        let pos = match self.plans.iter().position(|p| p.len() == len) {
            Some(p) => p,
            None => {
                self.plans.push(DftPlan::new(len));
                self.plans.len() - 1
            }
        };
        &self.plans[pos]
    }
}

fn check_len(op: &'static str, shape: Shape, len: usize) -> Result<()> {
    if shape.len() != len {
        return Err(Error::ShapeMismatch {
            op,
            lhs: shape,
            rhs: Shape::vector(len),
        });
    }
    Ok(())
}
