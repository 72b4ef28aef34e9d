use super::onnx::{tensor_proto, TensorProto};
use super::{DeepError, Result};

/// Dense row-major tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<T> {
    pub shape: Vec<usize>,
    pub data: Vec<T>,
}

pub type TensorF = Tensor<f32>;
pub type TensorI = Tensor<i64>;

impl<T: Copy + Default> Tensor<T> {
    pub fn new(shape: Vec<usize>, data: Vec<T>) -> Self {
        debug_assert_eq!(shape.iter().product::<usize>(), data.len(), "shape {shape:?}");
        Self { shape, data }
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let n = shape.iter().product();
        Self::new(shape, vec![T::default(); n])
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn reshaped(self, shape: Vec<usize>) -> Result<Self> {
        if shape.iter().product::<usize>() != self.data.len() {
            return Err(DeepError::Shape(format!(
                "cannot reshape {:?} to {shape:?}",
                self.shape
            )));
        }
        Ok(Self { shape, data: self.data })
    }

    pub fn transposed(&self, perm: &[usize]) -> Result<Self> {
        let rank = self.rank();
        let mut seen = vec![false; rank];
        if perm.len() != rank || perm.iter().any(|&p| p >= rank || std::mem::replace(&mut seen[p], true)) {
            return Err(DeepError::Shape(format!("bad permutation {perm:?} for rank {rank}")));
        }
        let src_strides = strides(&self.shape);
        let shape: Vec<usize> = perm.iter().map(|&p| self.shape[p]).collect();
        let walk: Vec<usize> = perm.iter().map(|&p| src_strides[p]).collect();
        let mut out = Vec::with_capacity(self.len());
        for_each_index(&shape, |offsets| {
            out.push(self.data[offsets.iter().zip(&walk).map(|(i, s)| i * s).sum::<usize>()]);
        });
        Ok(Self::new(shape, out))
    }
}

pub fn strides(shape: &[usize]) -> Vec<usize> {
    let mut s = vec![1; shape.len()];
    for k in (0..shape.len().saturating_sub(1)).rev() {
        s[k] = s[k + 1] * shape[k + 1];
    }
    s
}

/// Calls `f` with every multi-index of `shape` in row-major order.
pub fn for_each_index(shape: &[usize], mut f: impl FnMut(&[usize])) {
    if shape.contains(&0) {
        return;
    }
    let mut idx = vec![0usize; shape.len()];
    loop {
        f(&idx);
        let mut k = shape.len();
        loop {
            if k == 0 {
                return;
            }
            k -= 1;
            idx[k] += 1;
            if idx[k] < shape[k] {
                break;
            }
            idx[k] = 0;
        }
    }
}

pub fn broadcast_shape(a: &[usize], b: &[usize]) -> Result<Vec<usize>> {
    let rank = a.len().max(b.len());
    let dim = |s: &[usize], k: usize| if k + s.len() >= rank { s[k + s.len() - rank] } else { 1 };
    (0..rank)
        .map(|k| match (dim(a, k), dim(b, k)) {
            (x, y) if x == y => Ok(x),
            (1, y) => Ok(y),
            (x, 1) => Ok(x),
            _ => Err(DeepError::Shape(format!("cannot broadcast {a:?} with {b:?}"))),
        })
        .collect()
}

/// Strides of `shape` viewed inside the broadcast `target` shape; broadcast
/// axes get stride 0.
pub fn broadcast_strides(shape: &[usize], target: &[usize]) -> Vec<usize> {
    let own = strides(shape);
    let pad = target.len() - shape.len();
    (0..target.len())
        .map(|k| {
            if k < pad || shape[k - pad] == 1 {
                0
            } else {
                own[k - pad]
            }
        })
        .collect()
}

pub fn broadcast_binary<T: Copy + Default, U: Copy + Default>(
    a: &Tensor<T>,
    b: &Tensor<T>,
    f: impl Fn(T, T) -> U,
) -> Result<Tensor<U>> {
    if a.shape == b.shape {
        return Ok(Tensor::new(
            a.shape.clone(),
            a.data.iter().zip(&b.data).map(|(&x, &y)| f(x, y)).collect(),
        ));
    }
    let shape = broadcast_shape(&a.shape, &b.shape)?;
    if b.len() == 1 {
        let y = b.data[0];
        let data = a.data.iter().map(|&x| f(x, y)).collect();
        return Ok(Tensor::new(shape, data));
    }
    let (sa, sb) = (broadcast_strides(&a.shape, &shape), broadcast_strides(&b.shape, &shape));
    let mut data = Vec::with_capacity(shape.iter().product());
    for_each_index(&shape, |idx| {
        let (mut ia, mut ib) = (0, 0);
        for k in 0..idx.len() {
            ia += idx[k] * sa[k];
            ib += idx[k] * sb[k];
        }
        data.push(f(a.data[ia], b.data[ib]));
    });
    Ok(Tensor::new(shape, data))
}

/// A runtime value: float activations or integer shape/index tensors.
#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Float(TensorF),
    Int(TensorI),
}

impl Value {
    pub fn shape(&self) -> &[usize] {
        match self {
            Value::Float(t) => &t.shape,
            Value::Int(t) => &t.shape,
        }
    }

    pub fn float(&self) -> Result<&TensorF> {
        match self {
            Value::Float(t) => Ok(t),
            Value::Int(_) => Err(DeepError::Shape("expected a float tensor".into())),
        }
    }

    pub fn int(&self) -> Result<&TensorI> {
        match self {
            Value::Int(t) => Ok(t),
            Value::Float(_) => Err(DeepError::Shape("expected an integer tensor".into())),
        }
    }

    pub fn into_float(self) -> Result<TensorF> {
        match self {
            Value::Float(t) => Ok(t),
            Value::Int(_) => Err(DeepError::Shape("expected a float tensor".into())),
        }
    }

    /// Integer contents regardless of storage; used for shape-like inputs.
    pub fn to_i64s(&self) -> Vec<i64> {
        match self {
            Value::Int(t) => t.data.clone(),
            Value::Float(t) => t.data.iter().map(|&v| v as i64).collect(),
        }
    }
}

fn dims_of(proto: &TensorProto) -> Result<Vec<usize>> {
    proto
        .dims
        .iter()
        .map(|&d| usize::try_from(d).map_err(|_| DeepError::Malformed(format!("negative tensor dim {d}"))))
        .collect()
}

fn le_chunks<const N: usize, T>(raw: &[u8], f: impl Fn([u8; N]) -> T) -> Vec<T> {
    raw.chunks_exact(N).map(|c| f(c.try_into().expect("chunk"))).collect()
}

/// Decodes an initializer or constant tensor.
pub fn from_proto(proto: &TensorProto) -> Result<Value> {
    let name = proto.name.as_deref().unwrap_or("<unnamed>");
    if !proto.external_data.is_empty() || proto.data_location == Some(1) {
        return Err(DeepError::Malformed(format!("tensor `{name}` uses external data")));
    }
    let shape = dims_of(proto)?;
    let n: usize = shape.iter().product();
    let checked = |data_len: usize| {
        if data_len == n {
            Ok(())
        } else {
            Err(DeepError::Malformed(format!(
                "tensor `{name}` holds {data_len} values for shape {shape:?}"
            )))
        }
    };
    let raw = proto.raw_data.as_deref();
    match proto.data_type.unwrap_or(0) {
        tensor_proto::FLOAT | tensor_proto::DOUBLE => {
            let data: Vec<f32> = match (raw, proto.data_type == Some(tensor_proto::FLOAT)) {
                (Some(r), true) => le_chunks(r, f32::from_le_bytes),
                (Some(r), false) => le_chunks(r, |b| f64::from_le_bytes(b) as f32),
                (None, true) => proto.float_data.clone(),
                (None, false) => proto.double_data.iter().map(|&v| v as f32).collect(),
            };
            checked(data.len())?;
            Ok(Value::Float(Tensor::new(shape, data)))
        }
        tensor_proto::INT64 | tensor_proto::INT32 | tensor_proto::BOOL => {
            let data: Vec<i64> = match (raw, proto.data_type.unwrap_or(0)) {
                (Some(r), tensor_proto::INT64) => le_chunks(r, i64::from_le_bytes),
                (Some(r), tensor_proto::INT32) => le_chunks(r, |b| i32::from_le_bytes(b) as i64),
                (Some(r), _) => r.iter().map(|&b| b as i64).collect(),
                (None, tensor_proto::INT64) => proto.int64_data.clone(),
                (None, _) => proto.int32_data.iter().map(|&v| v as i64).collect(),
            };
            checked(data.len())?;
            Ok(Value::Int(Tensor::new(shape, data)))
        }
        other => Err(DeepError::Unsupported(format!(
            "tensor `{name}` has element type {other}"
        ))),
    }
}
