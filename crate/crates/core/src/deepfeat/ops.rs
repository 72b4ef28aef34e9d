//! CPU kernels for the operators exported CNN backbones use. Activations are
//! NCHW `f32`; integer tensors only carry shapes and indices.

use super::onnx::{AttributeProto, NodeProto};
use super::tensor::{
    broadcast_binary, broadcast_shape, broadcast_strides, for_each_index, from_proto, strides, Tensor, TensorF,
    TensorI, Value,
};
use super::{DeepError, Result};

struct Attrs<'a>(&'a [AttributeProto]);

impl<'a> Attrs<'a> {
    fn get(&self, name: &str) -> Option<&'a AttributeProto> {
        self.0.iter().find(|a| a.name.as_deref() == Some(name))
    }

    fn int(&self, name: &str, default: i64) -> i64 {
        self.get(name).and_then(|a| a.i).unwrap_or(default)
    }

    fn float(&self, name: &str, default: f32) -> f32 {
        self.get(name).and_then(|a| a.f).unwrap_or(default)
    }

    fn ints(&self, name: &str) -> Option<Vec<i64>> {
        self.get(name).map(|a| a.ints.clone())
    }

    fn string(&self, name: &str) -> Option<String> {
        self.get(name)
            .and_then(|a| a.s.as_ref())
            .map(|s| String::from_utf8_lossy(s).into_owned())
    }
}

fn input<'v>(inputs: &[Option<&'v Value>], k: usize, op: &str) -> Result<&'v Value> {
    inputs
        .get(k)
        .copied()
        .flatten()
        .ok_or_else(|| DeepError::Malformed(format!("{op}: missing input {k}")))
}

fn optional<'v>(inputs: &[Option<&'v Value>], k: usize) -> Option<&'v Value> {
    inputs.get(k).copied().flatten()
}

fn axis(a: i64, rank: usize) -> Result<usize> {
    let r = rank as i64;
    let k = if a < 0 { a + r } else { a };
    if (0..r.max(1)).contains(&k) {
        Ok(k as usize)
    } else {
        Err(DeepError::Shape(format!("axis {a} out of range for rank {rank}")))
    }
}

fn map(t: &TensorF, f: impl Fn(f32) -> f32) -> Value {
    Value::Float(Tensor::new(t.shape.clone(), t.data.iter().map(|&v| f(v)).collect()))
}

pub const SUPPORTED: &[&str] = &[
    "Add",
    "AveragePool",
    "BatchNormalization",
    "Cast",
    "Clip",
    "Concat",
    "Constant",
    "Conv",
    "Div",
    "Dropout",
    "Exp",
    "Flatten",
    "Gather",
    "Gemm",
    "GlobalAveragePool",
    "GlobalMaxPool",
    "HardSigmoid",
    "Identity",
    "LeakyRelu",
    "MatMul",
    "MaxPool",
    "Mul",
    "Neg",
    "Pad",
    "ReduceMean",
    "Relu",
    "Reshape",
    "Shape",
    "Sigmoid",
    "Softmax",
    "Sqrt",
    "Squeeze",
    "Sub",
    "Tanh",
    "Transpose",
    "Unsqueeze",
];

/// Executes one node and returns its outputs in declaration order.
pub fn run_node(node: &NodeProto, inputs: &[Option<&Value>], opset: i64) -> Result<Vec<Value>> {
    let op = node.op_type.as_deref().unwrap_or("");
    let attrs = Attrs(&node.attribute);
    let x = || input(inputs, 0, op);
    let out = match op {
        "Conv" => Value::Float(conv(
            x()?.float()?,
            input(inputs, 1, op)?.float()?,
            optional(inputs, 2),
            &attrs,
        )?),
        "Relu" => map(x()?.float()?, |v| v.max(0.0)),
        "LeakyRelu" => {
            let alpha = attrs.float("alpha", 0.01);
            map(x()?.float()?, |v| if v < 0.0 { alpha * v } else { v })
        }
        "Sigmoid" => map(x()?.float()?, |v| 1.0 / (1.0 + (-v).exp())),
        "HardSigmoid" => {
            let (alpha, beta) = (attrs.float("alpha", 0.2), attrs.float("beta", 0.5));
            map(x()?.float()?, |v| (alpha * v + beta).clamp(0.0, 1.0))
        }
        "Tanh" => map(x()?.float()?, f32::tanh),
        "Exp" => map(x()?.float()?, f32::exp),
        "Sqrt" => map(x()?.float()?, f32::sqrt),
        "Neg" => map(x()?.float()?, |v| -v),
        "Clip" => {
            let (lo, hi) = if opset < 11 {
                (attrs.float("min", f32::MIN), attrs.float("max", f32::MAX))
            } else {
                let bound =
                    |k, d| optional(inputs, k).map_or(Ok(d), |v: &Value| Ok::<_, DeepError>(v.float()?.data[0]));
                (bound(1, f32::MIN)?, bound(2, f32::MAX)?)
            };
            map(x()?.float()?, |v| v.clamp(lo, hi))
        }
        "Identity" | "Dropout" => x()?.clone(),
        "Add" | "Sub" | "Mul" | "Div" => arithmetic(op, x()?, input(inputs, 1, op)?)?,
        "BatchNormalization" => Value::Float(batch_norm(x()?.float()?, inputs, &attrs)?),
        "MaxPool" | "AveragePool" => Value::Float(pool(op, x()?.float()?, &attrs)?),
        "GlobalAveragePool" | "GlobalMaxPool" => Value::Float(global_pool(op, x()?.float()?)?),
        "Gemm" => Value::Float(gemm(
            x()?.float()?,
            input(inputs, 1, op)?.float()?,
            optional(inputs, 2),
            &attrs,
        )?),
        "MatMul" => Value::Float(matmul(x()?.float()?, input(inputs, 1, op)?.float()?)?),
        "Softmax" => Value::Float(softmax(x()?.float()?, &attrs, opset)?),
        "Flatten" => {
            let t = x()?;
            let k = axis(attrs.int("axis", 1), t.shape().len() + 1)?;
            let outer = t.shape()[..k].iter().product();
            let inner = t.shape()[k..].iter().product();
            reshape_value(t.clone(), vec![outer, inner])?
        }
        "Reshape" => {
            let t = x()?;
            let spec = input(inputs, 1, op)?.to_i64s();
            let shape = resolve_reshape(t.shape(), &spec, attrs.int("allowzero", 0) != 0)?;
            reshape_value(t.clone(), shape)?
        }
        "Transpose" => {
            let t = x()?;
            let perm = match attrs.ints("perm") {
                Some(p) => p
                    .iter()
                    .map(|&a| axis(a, t.shape().len()))
                    .collect::<Result<Vec<_>>>()?,
                None => (0..t.shape().len()).rev().collect(),
            };
            match t {
                Value::Float(f) => Value::Float(f.transposed(&perm)?),
                Value::Int(i) => Value::Int(i.transposed(&perm)?),
            }
        }
        "Concat" => concat(inputs, attrs.int("axis", 0))?,
        "Pad" => Value::Float(pad(x()?.float()?, inputs, &attrs, opset)?),
        "Constant" => constant(&attrs)?,
        "Shape" => {
            let shape = x()?.shape();
            let r = shape.len() as i64;
            let clampi = |v: i64| (if v < 0 { v + r } else { v }).clamp(0, r) as usize;
            let (start, end) = (clampi(attrs.int("start", 0)), clampi(attrs.int("end", r)));
            let dims: Vec<i64> = shape[start..end.max(start)].iter().map(|&d| d as i64).collect();
            Value::Int(Tensor::new(vec![dims.len()], dims))
        }
        "Gather" => gather(x()?, input(inputs, 1, op)?.int()?, attrs.int("axis", 0))?,
        "Unsqueeze" | "Squeeze" => {
            let t = x()?;
            let axes = if opset >= 13 {
                optional(inputs, 1).map(Value::to_i64s)
            } else {
                attrs.ints("axes")
            };
            let shape = if op == "Unsqueeze" {
                let axes = axes.ok_or_else(|| DeepError::Malformed("Unsqueeze without axes".into()))?;
                unsqueeze_shape(t.shape(), &axes)?
            } else {
                squeeze_shape(t.shape(), axes.as_deref())?
            };
            reshape_value(t.clone(), shape)?
        }
        "ReduceMean" => {
            let t = x()?.float()?;
            let axes = if opset >= 18 {
                optional(inputs, 1).map(Value::to_i64s)
            } else {
                attrs.ints("axes")
            };
            let axes = match axes {
                Some(a) if !a.is_empty() => a.iter().map(|&k| axis(k, t.rank())).collect::<Result<Vec<_>>>()?,
                _ if attrs.int("noop_with_empty_axes", 0) != 0 => return Ok(vec![Value::Float(t.clone())]),
                _ => (0..t.rank()).collect(),
            };
            Value::Float(reduce_mean(t, &axes, attrs.int("keepdims", 1) != 0))
        }
        "Cast" => match (attrs.int("to", 0) as i32, x()?) {
            (1 | 11, Value::Float(t)) => Value::Float(t.clone()),
            (1 | 11, Value::Int(t)) => {
                Value::Float(Tensor::new(t.shape.clone(), t.data.iter().map(|&v| v as f32).collect()))
            }
            (6 | 7, Value::Int(t)) => Value::Int(t.clone()),
            (6 | 7, Value::Float(t)) => {
                Value::Int(Tensor::new(t.shape.clone(), t.data.iter().map(|&v| v as i64).collect()))
            }
            (to, _) => return Err(DeepError::Unsupported(format!("Cast to element type {to}"))),
        },
        _ => return Err(DeepError::Unsupported(format!("operator `{op}`"))),
    };
    Ok(vec![out])
}

fn reshape_value(v: Value, shape: Vec<usize>) -> Result<Value> {
    Ok(match v {
        Value::Float(t) => Value::Float(t.reshaped(shape)?),
        Value::Int(t) => Value::Int(t.reshaped(shape)?),
    })
}

fn arithmetic(op: &str, a: &Value, b: &Value) -> Result<Value> {
    match (a, b) {
        (Value::Float(a), Value::Float(b)) => {
            let f: fn(f32, f32) -> f32 = match op {
                "Add" => |x, y| x + y,
                "Sub" => |x, y| x - y,
                "Mul" => |x, y| x * y,
                _ => |x, y| x / y,
            };
            Ok(Value::Float(broadcast_binary(a, b, f)?))
        }
        (Value::Int(a), Value::Int(b)) => {
            let f: fn(i64, i64) -> i64 = match op {
                "Add" => |x, y| x + y,
                "Sub" => |x, y| x - y,
                "Mul" => |x, y| x * y,
                _ => |x, y| if y == 0 { 0 } else { x / y },
            };
            Ok(Value::Int(broadcast_binary(a, b, f)?))
        }
        _ => Err(DeepError::Shape(format!("{op}: mixed float and integer operands"))),
    }
}

fn spatial(x: &TensorF, op: &str) -> Result<(usize, usize, usize, usize)> {
    match x.shape[..] {
        [n, c, h, w] => Ok((n, c, h, w)),
        _ => Err(DeepError::Unsupported(format!(
            "{op} on rank-{} input (only 2-D spatial)",
            x.rank()
        ))),
    }
}

/// Output extent and begin/end padding along one spatial axis.
struct Axis {
    out: usize,
    pad_begin: usize,
    pad_end: usize,
}

fn plan_axis(
    input: usize,
    kernel: usize,
    stride: usize,
    dilation: usize,
    pads: (usize, usize),
    auto_pad: &str,
    ceil: bool,
) -> Result<Axis> {
    let span = (kernel - 1) * dilation + 1;
    let (pad_begin, pad_end) = match auto_pad {
        "SAME_UPPER" | "SAME_LOWER" => {
            let out = input.div_ceil(stride);
            let total = ((out - 1) * stride + span).saturating_sub(input);
            let small = total / 2;
            if auto_pad == "SAME_UPPER" {
                (small, total - small)
            } else {
                (total - small, small)
            }
        }
        "VALID" => (0, 0),
        _ => pads,
    };
    let padded = input + pad_begin + pad_end;
    if padded < span {
        return Err(DeepError::Shape(format!(
            "kernel span {span} exceeds padded input {padded}"
        )));
    }
    let mut out = if ceil {
        (padded - span).div_ceil(stride) + 1
    } else {
        (padded - span) / stride + 1
    };
    // a window starting entirely in the end padding is dropped
    if ceil && (out - 1) * stride >= input + pad_begin {
        out -= 1;
    }
    Ok(Axis {
        out,
        pad_begin,
        pad_end,
    })
}

struct Window {
    kernel: [usize; 2],
    strides: [usize; 2],
    dilations: [usize; 2],
    pads: [(usize, usize); 2],
}

fn window(attrs: &Attrs, kernel: Option<[usize; 2]>, op: &str) -> Result<Window> {
    let pair = |name: &str, default: usize| -> Result<[usize; 2]> {
        match attrs.ints(name) {
            None => Ok([default; 2]),
            Some(v) if v.len() == 2 && v.iter().all(|&k| k >= 1) => Ok([v[0] as usize, v[1] as usize]),
            Some(v) => Err(DeepError::Unsupported(format!("{op} {name} {v:?}"))),
        }
    };
    let kernel = match (attrs.ints("kernel_shape"), kernel) {
        (Some(k), _) if k.len() == 2 && k.iter().all(|&v| v >= 1) => [k[0] as usize, k[1] as usize],
        (None, Some(k)) => k,
        (k, _) => return Err(DeepError::Unsupported(format!("{op} kernel_shape {k:?}"))),
    };
    let pads = match attrs.ints("pads") {
        None => [(0, 0); 2],
        Some(p) if p.len() == 4 && p.iter().all(|&v| v >= 0) => {
            [(p[0] as usize, p[2] as usize), (p[1] as usize, p[3] as usize)]
        }
        Some(p) => return Err(DeepError::Unsupported(format!("{op} pads {p:?}"))),
    };
    Ok(Window {
        kernel,
        strides: pair("strides", 1)?,
        dilations: pair("dilations", 1)?,
        pads,
    })
}

fn conv(x: &TensorF, w: &TensorF, bias: Option<&Value>, attrs: &Attrs) -> Result<TensorF> {
    let (n, c, h, wd) = spatial(x, "Conv")?;
    let [m, cg, kh, kw] = w.shape[..] else {
        return Err(DeepError::Shape(format!("Conv weight shape {:?}", w.shape)));
    };
    let groups = attrs.int("group", 1).max(1) as usize;
    if c != cg * groups || m % groups != 0 {
        return Err(DeepError::Shape(format!(
            "Conv: input channels {c}, weight {:?}, group {groups}",
            w.shape
        )));
    }
    let win = window(attrs, Some([kh, kw]), "Conv")?;
    let auto_pad = attrs.string("auto_pad").unwrap_or_default();
    let ay = plan_axis(h, kh, win.strides[0], win.dilations[0], win.pads[0], &auto_pad, false)?;
    let ax = plan_axis(wd, kw, win.strides[1], win.dilations[1], win.pads[1], &auto_pad, false)?;
    let (oh, ow) = (ay.out, ax.out);
    let bias = match bias {
        Some(b) => Some(b.float()?.data.clone()),
        None => None,
    };
    let mg = m / groups;
    let patch = cg * kh * kw;
    let mut out = vec![0f32; n * m * oh * ow];
    let mut cols = vec![0f32; patch * oh * ow];
    for b in 0..n {
        for g in 0..groups {
            // im2col: one row per (channel, ky, kx), one column per output pixel
            for ci in 0..cg {
                let plane = &x.data[((b * c) + g * cg + ci) * h * wd..][..h * wd];
                for ky in 0..kh {
                    for kx in 0..kw {
                        let row = &mut cols[((ci * kh + ky) * kw + kx) * oh * ow..][..oh * ow];
                        for oy in 0..oh {
                            let iy = (oy * win.strides[0] + ky * win.dilations[0]) as isize - ay.pad_begin as isize;
                            for ox in 0..ow {
                                let ix = (ox * win.strides[1] + kx * win.dilations[1]) as isize - ax.pad_begin as isize;
                                row[oy * ow + ox] = if iy >= 0 && ix >= 0 && (iy as usize) < h && (ix as usize) < wd {
                                    plane[iy as usize * wd + ix as usize]
                                } else {
                                    0.0
                                };
                            }
                        }
                    }
                }
            }
            let weights = &w.data[g * mg * patch..][..mg * patch];
            let dst = &mut out[(b * m + g * mg) * oh * ow..][..mg * oh * ow];
            sgemm(mg, patch, oh * ow, weights, (patch, 1), &cols, (oh * ow, 1), dst);
            if let Some(bias) = &bias {
                for (k, chunk) in dst.chunks_mut(oh * ow).enumerate() {
                    let v = bias[g * mg + k];
                    chunk.iter_mut().for_each(|o| *o += v);
                }
            }
        }
    }
    Ok(Tensor::new(vec![n, m, oh, ow], out))
}

/// `c = a * b` with `a` m×k and `b` k×n given as (row stride, column stride).
#[allow(clippy::too_many_arguments)]
fn sgemm(m: usize, k: usize, n: usize, a: &[f32], sa: (usize, usize), b: &[f32], sb: (usize, usize), c: &mut [f32]) {
    assert!(c.len() >= m * n);
    if m == 0 || n == 0 {
        return;
    }
    if k > 0 {
        assert!(a.len() > (m - 1) * sa.0 + (k - 1) * sa.1);
        assert!(b.len() > (k - 1) * sb.0 + (n - 1) * sb.1);
    }
    // SAFETY: the asserts above bound every index the kernel touches.
    unsafe {
        matrixmultiply::sgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            sa.0 as isize,
            sa.1 as isize,
            b.as_ptr(),
            sb.0 as isize,
            sb.1 as isize,
            0.0,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

fn pool(op: &str, x: &TensorF, attrs: &Attrs) -> Result<TensorF> {
    let (n, c, h, w) = spatial(x, op)?;
    let win = window(attrs, None, op)?;
    let auto_pad = attrs.string("auto_pad").unwrap_or_default();
    let ceil = attrs.int("ceil_mode", 0) != 0;
    let ay = plan_axis(
        h,
        win.kernel[0],
        win.strides[0],
        win.dilations[0],
        win.pads[0],
        &auto_pad,
        ceil,
    )?;
    let ax = plan_axis(
        w,
        win.kernel[1],
        win.strides[1],
        win.dilations[1],
        win.pads[1],
        &auto_pad,
        ceil,
    )?;
    let include_pad = attrs.int("count_include_pad", 0) != 0;
    let max = op == "MaxPool";
    let mut out = Vec::with_capacity(n * c * ay.out * ax.out);
    for plane in x.data.chunks(h * w) {
        for oy in 0..ay.out {
            for ox in 0..ax.out {
                let (mut acc, mut count, mut padded) = (if max { f32::NEG_INFINITY } else { 0.0 }, 0usize, 0usize);
                for ky in 0..win.kernel[0] {
                    let iy = (oy * win.strides[0] + ky * win.dilations[0]) as isize - ay.pad_begin as isize;
                    for kx in 0..win.kernel[1] {
                        let ix = (ox * win.strides[1] + kx * win.dilations[1]) as isize - ax.pad_begin as isize;
                        if iy < (h + ay.pad_end) as isize && ix < (w + ax.pad_end) as isize {
                            padded += 1;
                        }
                        if iy < 0 || ix < 0 || iy as usize >= h || ix as usize >= w {
                            continue;
                        }
                        let v = plane[iy as usize * w + ix as usize];
                        if max {
                            acc = acc.max(v);
                        } else {
                            acc += v;
                        }
                        count += 1;
                    }
                }
                out.push(match (max, include_pad) {
                    (true, _) => acc,
                    (false, true) => acc / padded.max(1) as f32,
                    (false, false) => acc / count.max(1) as f32,
                });
            }
        }
    }
    Ok(Tensor::new(vec![n, c, ay.out, ax.out], out))
}

fn global_pool(op: &str, x: &TensorF) -> Result<TensorF> {
    if x.rank() < 3 {
        return Err(DeepError::Shape(format!("{op} on rank-{} input", x.rank())));
    }
    let area: usize = x.shape[2..].iter().product();
    let data = x
        .data
        .chunks(area.max(1))
        .map(|p| {
            if op == "GlobalMaxPool" {
                p.iter().copied().fold(f32::NEG_INFINITY, f32::max)
            } else {
                (p.iter().map(|&v| v as f64).sum::<f64>() / area as f64) as f32
            }
        })
        .collect();
    let mut shape = x.shape[..2].to_vec();
    shape.extend(std::iter::repeat_n(1, x.rank() - 2));
    Ok(Tensor::new(shape, data))
}

fn batch_norm(x: &TensorF, inputs: &[Option<&Value>], attrs: &Attrs) -> Result<TensorF> {
    let param = |k| input(inputs, k, "BatchNormalization").and_then(Value::float);
    let (scale, bias, mean, var) = (param(1)?, param(2)?, param(3)?, param(4)?);
    let eps = attrs.float("epsilon", 1e-5);
    let c = *x.shape.get(1).unwrap_or(&1);
    if [scale, bias, mean, var].iter().any(|p| p.len() != c) {
        return Err(DeepError::Shape(format!(
            "BatchNormalization parameters do not match {c} channels"
        )));
    }
    let inner: usize = x.shape.get(2..).map_or(1, |s| s.iter().product());
    let mut out = x.data.clone();
    for (k, chunk) in out.chunks_mut(inner.max(1)).enumerate() {
        let ch = k % c;
        let a = scale.data[ch] / (var.data[ch] + eps).sqrt();
        let b = bias.data[ch] - mean.data[ch] * a;
        chunk.iter_mut().for_each(|v| *v = *v * a + b);
    }
    Ok(Tensor::new(x.shape.clone(), out))
}

fn gemm(a: &TensorF, b: &TensorF, c: Option<&Value>, attrs: &Attrs) -> Result<TensorF> {
    let (ta, tb) = (attrs.int("transA", 0) != 0, attrs.int("transB", 0) != 0);
    let (alpha, beta) = (attrs.float("alpha", 1.0), attrs.float("beta", 1.0));
    let ([ar, ac], [br, bc]) = (
        a.shape[..].try_into().map_err(|_| gemm_shape(a, b))?,
        b.shape[..].try_into().map_err(|_| gemm_shape(a, b))?,
    );
    let (m, k) = if ta { (ac, ar) } else { (ar, ac) };
    let (k2, n) = if tb { (bc, br) } else { (br, bc) };
    if k != k2 {
        return Err(gemm_shape(a, b));
    }
    let sa = if ta { (1, ac) } else { (ac, 1) };
    let sb = if tb { (1, bc) } else { (bc, 1) };
    let mut out = vec![0f32; m * n];
    sgemm(m, k, n, &a.data, sa, &b.data, sb, &mut out);
    let mut y = Tensor::new(vec![m, n], out);
    if alpha != 1.0 {
        y.data.iter_mut().for_each(|v| *v *= alpha);
    }
    if let Some(c) = c {
        let c = c.float()?;
        let scaled = Tensor::new(c.shape.clone(), c.data.iter().map(|&v| v * beta).collect());
        y = broadcast_binary(&y, &scaled, |p, q| p + q)?;
        if y.shape != [m, n] {
            return Err(DeepError::Shape(format!(
                "Gemm bias {:?} does not broadcast to [{m}, {n}]",
                c.shape
            )));
        }
    }
    Ok(y)
}

fn gemm_shape(a: &TensorF, b: &TensorF) -> DeepError {
    DeepError::Shape(format!("Gemm operands {:?} x {:?}", a.shape, b.shape))
}

fn matmul(a: &TensorF, b: &TensorF) -> Result<TensorF> {
    let err = || DeepError::Shape(format!("MatMul operands {:?} x {:?}", a.shape, b.shape));
    if a.rank() == 0 || b.rank() == 0 {
        return Err(err());
    }
    let a_shape = if a.rank() == 1 {
        vec![1, a.shape[0]]
    } else {
        a.shape.clone()
    };
    let b_shape = if b.rank() == 1 {
        vec![b.shape[0], 1]
    } else {
        b.shape.clone()
    };
    let (m, k) = (a_shape[a_shape.len() - 2], a_shape[a_shape.len() - 1]);
    let (k2, n) = (b_shape[b_shape.len() - 2], b_shape[b_shape.len() - 1]);
    if k != k2 {
        return Err(err());
    }
    let (ab, bb) = (&a_shape[..a_shape.len() - 2], &b_shape[..b_shape.len() - 2]);
    let batch = broadcast_shape(ab, bb)?;
    let (sa, sb) = (broadcast_strides(ab, &batch), broadcast_strides(bb, &batch));
    let count: usize = batch.iter().product();
    let mut out = vec![0f32; count * m * n];
    let mut slot = 0;
    let mut run = |ia: usize, ib: usize| {
        sgemm(
            m,
            k,
            n,
            &a.data[ia * m * k..],
            (k, 1),
            &b.data[ib * k * n..],
            (n, 1),
            &mut out[slot * m * n..],
        );
        slot += 1;
    };
    if batch.is_empty() {
        run(0, 0);
    } else {
        for_each_index(&batch, |idx| {
            let ia = idx.iter().zip(&sa).map(|(i, s)| i * s).sum();
            let ib = idx.iter().zip(&sb).map(|(i, s)| i * s).sum();
            run(ia, ib);
        });
    }
    let mut shape = batch;
    if a.rank() > 1 {
        shape.push(m);
    }
    if b.rank() > 1 {
        shape.push(n);
    }
    Ok(Tensor::new(shape, out))
}

fn softmax(x: &TensorF, attrs: &Attrs, opset: i64) -> Result<TensorF> {
    let default = if opset >= 13 { -1 } else { 1 };
    let k = axis(attrs.int("axis", default), x.rank())?;
    let (len, inner) = if opset >= 13 {
        (x.shape[k], x.shape[k + 1..].iter().product::<usize>())
    } else {
        (x.shape[k..].iter().product(), 1)
    };
    let mut out = x.data.clone();
    for block in out.chunks_mut((len * inner).max(1)) {
        for i in 0..inner {
            let max = (0..len).map(|j| block[j * inner + i]).fold(f32::NEG_INFINITY, f32::max);
            let mut sum = 0f64;
            for j in 0..len {
                let e = (block[j * inner + i] - max).exp();
                block[j * inner + i] = e;
                sum += e as f64;
            }
            for j in 0..len {
                block[j * inner + i] = (block[j * inner + i] as f64 / sum) as f32;
            }
        }
    }
    Ok(Tensor::new(x.shape.clone(), out))
}

fn resolve_reshape(from: &[usize], spec: &[i64], allow_zero: bool) -> Result<Vec<usize>> {
    let total: usize = from.iter().product();
    let mut infer = None;
    let mut shape = Vec::with_capacity(spec.len());
    for (k, &d) in spec.iter().enumerate() {
        shape.push(match d {
            -1 if infer.is_none() => {
                infer = Some(k);
                1
            }
            0 if !allow_zero => *from
                .get(k)
                .ok_or_else(|| DeepError::Shape(format!("Reshape copies missing dim {k}")))?,
            d if d >= 0 => d as usize,
            _ => return Err(DeepError::Shape(format!("Reshape spec {spec:?}"))),
        });
    }
    if let Some(k) = infer {
        let known: usize = shape.iter().product();
        if known == 0 || !total.is_multiple_of(known) {
            return Err(DeepError::Shape(format!("Reshape {from:?} to {spec:?}")));
        }
        shape[k] = total / known;
    }
    Ok(shape)
}

fn concat(inputs: &[Option<&Value>], axis_attr: i64) -> Result<Value> {
    let parts: Vec<&Value> = inputs.iter().flatten().copied().collect();
    let first = parts
        .first()
        .ok_or_else(|| DeepError::Malformed("Concat without inputs".into()))?;
    let k = axis(axis_attr, first.shape().len())?;
    fn join<T: Copy + Default>(parts: &[&Tensor<T>], k: usize) -> Result<Tensor<T>> {
        let base = &parts[0].shape;
        if parts
            .iter()
            .any(|p| p.rank() != base.len() || (0..base.len()).any(|d| d != k && p.shape[d] != base[d]))
        {
            return Err(DeepError::Shape("Concat operands disagree off the concat axis".into()));
        }
        let outer: usize = base[..k].iter().product();
        let mut shape = base.clone();
        shape[k] = parts.iter().map(|p| p.shape[k]).sum();
        let mut data = Vec::with_capacity(shape.iter().product());
        for o in 0..outer {
            for p in parts {
                let block = p.data.len() / outer.max(1);
                data.extend_from_slice(&p.data[o * block..(o + 1) * block]);
            }
        }
        Ok(Tensor::new(shape, data))
    }
    match first {
        Value::Float(_) => {
            let ts = parts.iter().map(|p| p.float()).collect::<Result<Vec<_>>>()?;
            Ok(Value::Float(join(&ts, k)?))
        }
        Value::Int(_) => {
            let ts = parts.iter().map(|p| p.int()).collect::<Result<Vec<_>>>()?;
            Ok(Value::Int(join(&ts, k)?))
        }
    }
}

fn pad(x: &TensorF, inputs: &[Option<&Value>], attrs: &Attrs, opset: i64) -> Result<TensorF> {
    let (pads, value) = if opset < 11 {
        (attrs.ints("pads").unwrap_or_default(), attrs.float("value", 0.0))
    } else {
        let v = match optional(inputs, 2) {
            Some(v) => v.float()?.data.first().copied().unwrap_or(0.0),
            None => 0.0,
        };
        (input(inputs, 1, "Pad")?.to_i64s(), v)
    };
    let r = x.rank();
    if pads.len() != 2 * r || pads.iter().any(|&p| p < 0) {
        return Err(DeepError::Unsupported(format!("Pad pads {pads:?} for rank {r}")));
    }
    let mode = attrs.string("mode").unwrap_or_else(|| "constant".into());
    if !matches!(mode.as_str(), "constant" | "edge" | "reflect") {
        return Err(DeepError::Unsupported(format!("Pad mode `{mode}`")));
    }
    let shape: Vec<usize> = (0..r).map(|d| x.shape[d] + (pads[d] + pads[d + r]) as usize).collect();
    let src = strides(&x.shape);
    let mut data = Vec::with_capacity(shape.iter().product());
    for_each_index(&shape, |idx| {
        let mut offset = 0;
        for d in 0..r {
            let n = x.shape[d] as isize;
            let mut i = idx[d] as isize - pads[d] as isize;
            if i < 0 || i >= n {
                match mode.as_str() {
                    "edge" => i = i.clamp(0, n - 1),
                    "reflect" if n > 1 => {
                        let period = 2 * (n - 1);
                        i = i.rem_euclid(period);
                        if i >= n {
                            i = period - i;
                        }
                    }
                    "reflect" => i = 0,
                    _ => {
                        data.push(value);
                        return;
                    }
                }
            }
            offset += i as usize * src[d];
        }
        data.push(x.data[offset]);
    });
    Ok(Tensor::new(shape, data))
}

fn constant(attrs: &Attrs) -> Result<Value> {
    if let Some(t) = attrs.get("value").and_then(|a| a.t.as_ref()) {
        return from_proto(t);
    }
    if let Some(a) = attrs.get("value_float").and_then(|a| a.f) {
        return Ok(Value::Float(Tensor::new(vec![], vec![a])));
    }
    if let Some(a) = attrs.get("value_floats") {
        return Ok(Value::Float(Tensor::new(vec![a.floats.len()], a.floats.clone())));
    }
    if let Some(a) = attrs.get("value_int").and_then(|a| a.i) {
        return Ok(Value::Int(Tensor::new(vec![], vec![a])));
    }
    if let Some(a) = attrs.get("value_ints") {
        return Ok(Value::Int(Tensor::new(vec![a.ints.len()], a.ints.clone())));
    }
    Err(DeepError::Unsupported(
        "Constant without a supported value attribute".into(),
    ))
}

fn gather(data: &Value, indices: &TensorI, axis_attr: i64) -> Result<Value> {
    fn take<T: Copy + Default>(t: &Tensor<T>, indices: &TensorI, k: usize) -> Result<Tensor<T>> {
        let dim = t.shape[k] as i64;
        let outer: usize = t.shape[..k].iter().product();
        let inner: usize = t.shape[k + 1..].iter().product();
        let mut shape = t.shape[..k].to_vec();
        shape.extend_from_slice(&indices.shape);
        shape.extend_from_slice(&t.shape[k + 1..]);
        let mut out = Vec::with_capacity(shape.iter().product());
        for o in 0..outer {
            for &i in &indices.data {
                let i = if i < 0 { i + dim } else { i };
                if !(0..dim).contains(&i) {
                    return Err(DeepError::Shape(format!("Gather index {i} out of range {dim}")));
                }
                let start = (o * t.shape[k] + i as usize) * inner;
                out.extend_from_slice(&t.data[start..start + inner]);
            }
        }
        Ok(Tensor::new(shape, out))
    }
    let k = axis(axis_attr, data.shape().len())?;
    Ok(match data {
        Value::Float(t) => Value::Float(take(t, indices, k)?),
        Value::Int(t) => Value::Int(take(t, indices, k)?),
    })
}

fn unsqueeze_shape(shape: &[usize], axes: &[i64]) -> Result<Vec<usize>> {
    let rank = shape.len() + axes.len();
    let mut positions = axes.iter().map(|&a| axis(a, rank)).collect::<Result<Vec<_>>>()?;
    positions.sort_unstable();
    positions.dedup();
    if positions.len() != axes.len() {
        return Err(DeepError::Shape(format!("Unsqueeze repeats an axis in {axes:?}")));
    }
    let mut rest = shape.iter();
    Ok((0..rank)
        .map(|k| {
            if positions.binary_search(&k).is_ok() {
                1
            } else {
                *rest.next().expect("rank")
            }
        })
        .collect())
}

fn squeeze_shape(shape: &[usize], axes: Option<&[i64]>) -> Result<Vec<usize>> {
    let drop = match axes {
        Some(a) => a.iter().map(|&k| axis(k, shape.len())).collect::<Result<Vec<_>>>()?,
        None => (0..shape.len()).filter(|&k| shape[k] == 1).collect(),
    };
    if drop.iter().any(|&k| shape[k] != 1) {
        return Err(DeepError::Shape(format!("Squeeze of non-unit axis in {shape:?}")));
    }
    Ok((0..shape.len())
        .filter(|k| !drop.contains(k))
        .map(|k| shape[k])
        .collect())
}

fn reduce_mean(x: &TensorF, axes: &[usize], keepdims: bool) -> TensorF {
    let kept: Vec<usize> = x
        .shape
        .iter()
        .enumerate()
        .map(|(k, &d)| if axes.contains(&k) { 1 } else { d })
        .collect();
    let src = strides(&x.shape);
    let dst = strides(&kept);
    let mut sums = vec![0f64; kept.iter().product()];
    for_each_index(&x.shape, |idx| {
        let (mut s, mut d) = (0, 0);
        for k in 0..idx.len() {
            s += idx[k] * src[k];
            if !axes.contains(&k) {
                d += idx[k] * dst[k];
            }
        }
        sums[d] += x.data[s] as f64;
    });
    let count: usize = axes.iter().map(|&k| x.shape[k]).product();
    let data = sums.into_iter().map(|v| (v / count.max(1) as f64) as f32).collect();
    let shape = if keepdims {
        kept
    } else {
        (0..x.rank())
            .filter(|k| !axes.contains(k))
            .map(|k| x.shape[k])
            .collect()
    };
    Tensor::new(shape, data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::deepfeat::onnx::AttributeProto;

    fn node(op: &str, attrs: Vec<AttributeProto>) -> NodeProto {
        NodeProto {
            op_type: Some(op.into()),
            attribute: attrs,
            ..Default::default()
        }
    }

    fn ints(name: &str, v: &[i64]) -> AttributeProto {
        AttributeProto {
            name: Some(name.into()),
            ints: v.to_vec(),
            ..Default::default()
        }
    }

    fn int(name: &str, v: i64) -> AttributeProto {
        AttributeProto {
            name: Some(name.into()),
            i: Some(v),
            ..Default::default()
        }
    }

    fn f(shape: &[usize], data: Vec<f32>) -> Value {
        Value::Float(Tensor::new(shape.to_vec(), data))
    }

    fn run(n: &NodeProto, inputs: &[&Value]) -> TensorF {
        let ins: Vec<Option<&Value>> = inputs.iter().map(|v| Some(*v)).collect();
        run_node(n, &ins, 17).unwrap().remove(0).into_float().unwrap()
    }

    /// Direct-summation convolution used as the oracle for the im2col path.
    fn naive_conv(x: &TensorF, w: &TensorF, stride: usize, pad: usize) -> Vec<f32> {
        let (c, h, wd) = (x.shape[1], x.shape[2], x.shape[3]);
        let (m, k) = (w.shape[0], w.shape[2]);
        let oh = (h + 2 * pad - k) / stride + 1;
        let ow = (wd + 2 * pad - k) / stride + 1;
        let mut out = vec![0f32; m * oh * ow];
        for o in 0..m {
            for y in 0..oh {
                for xo in 0..ow {
                    let mut acc = 0f32;
                    for ci in 0..c {
                        for ky in 0..k {
                            for kx in 0..k {
                                let iy = (y * stride + ky) as isize - pad as isize;
                                let ix = (xo * stride + kx) as isize - pad as isize;
                                if iy >= 0 && ix >= 0 && (iy as usize) < h && (ix as usize) < wd {
                                    acc += x.data[(ci * h + iy as usize) * wd + ix as usize]
                                        * w.data[((o * c + ci) * k + ky) * k + kx];
                                }
                            }
                        }
                    }
                    out[(o * oh + y) * ow + xo] = acc;
                }
            }
        }
        out
    }

    #[test]
    fn conv_matches_direct_summation() {
        let x = Tensor::new(vec![1, 2, 5, 6], (0..60).map(|v| (v as f32 * 0.37).sin()).collect());
        let w = Tensor::new(vec![3, 2, 3, 3], (0..54).map(|v| (v as f32 * 0.11).cos()).collect());
        for (stride, pad) in [(1, 0), (1, 1), (2, 1)] {
            let n = node(
                "Conv",
                vec![ints("strides", &[stride, stride]), ints("pads", &[pad, pad, pad, pad])],
            );
            let y = run(&n, &[&Value::Float(x.clone()), &Value::Float(w.clone())]);
            let want = naive_conv(&x, &w, stride as usize, pad as usize);
            assert_eq!(y.len(), want.len());
            for (a, b) in y.data.iter().zip(&want) {
                assert!((a - b).abs() < 1e-5, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn grouped_conv_with_bias() {
        // depthwise 1x1: each channel scaled by its own weight, plus bias
        let x = f(&[1, 2, 1, 2], vec![1.0, 2.0, 3.0, 4.0]);
        let w = f(&[2, 1, 1, 1], vec![10.0, -1.0]);
        let b = f(&[2], vec![0.5, 1.0]);
        let y = run(&node("Conv", vec![int("group", 2)]), &[&x, &w, &b]);
        assert_eq!(y.data, vec![10.5, 20.5, -2.0, -3.0]);
    }

    #[test]
    fn same_upper_padding_keeps_size() {
        let x = f(&[1, 1, 5, 5], vec![1.0; 25]);
        let w = f(&[1, 1, 3, 3], vec![1.0; 9]);
        let mut a = ints("", &[]);
        a.name = Some("auto_pad".into());
        a.s = Some(b"SAME_UPPER".to_vec());
        let y = run(&node("Conv", vec![a]), &[&x, &w]);
        assert_eq!(y.shape, vec![1, 1, 5, 5]);
        assert_eq!(y.data[0], 4.0);
        assert_eq!(y.data[12], 9.0);
    }

    #[test]
    fn pooling() {
        let x = f(&[1, 1, 2, 4], vec![1.0, 5.0, 2.0, 0.0, 3.0, -1.0, 8.0, 4.0]);
        let k = || vec![ints("kernel_shape", &[2, 2]), ints("strides", &[2, 2])];
        assert_eq!(run(&node("MaxPool", k()), &[&x]).data, vec![5.0, 8.0]);
        assert_eq!(run(&node("AveragePool", k()), &[&x]).data, vec![2.0, 3.5]);
        assert_eq!(run(&node("GlobalAveragePool", vec![]), &[&x]).data, vec![2.75]);
        // 3x3 average with pad 1 at the corner: 4 real cells, 9 with padding
        let ones = f(&[1, 1, 3, 3], vec![1.0; 9]);
        let avg = |include| {
            let attrs = vec![
                ints("kernel_shape", &[3, 3]),
                ints("pads", &[1, 1, 1, 1]),
                int("count_include_pad", include),
            ];
            run(&node("AveragePool", attrs), &[&ones]).data[0]
        };
        assert_eq!(avg(0), 1.0);
        assert!((avg(1) - 4.0 / 9.0).abs() < 1e-7);
    }

    #[test]
    fn ceil_mode_pool_shape() {
        let x = f(&[1, 1, 5, 5], (0..25).map(|v| v as f32).collect());
        let attrs = vec![
            ints("kernel_shape", &[2, 2]),
            ints("strides", &[2, 2]),
            int("ceil_mode", 1),
        ];
        let y = run(&node("MaxPool", attrs), &[&x]);
        assert_eq!(y.shape, vec![1, 1, 3, 3]);
        assert_eq!(y.data[8], 24.0);
    }

    #[test]
    fn gemm_and_matmul_agree() {
        let a = f(&[2, 3], vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let b = f(&[3, 2], vec![1.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
        let bt = f(&[2, 3], vec![1.0, 0.0, 1.0, 0.0, 1.0, 1.0]);
        let c = f(&[2], vec![10.0, 20.0]);
        let want = vec![4.0, 5.0, 10.0, 11.0];
        assert_eq!(run(&node("MatMul", vec![]), &[&a, &b]).data, want);
        let g = run(&node("Gemm", vec![int("transB", 1)]), &[&a, &bt, &c]);
        assert_eq!(g.data, vec![14.0, 25.0, 20.0, 31.0]);
        let batched = f(&[2, 1, 3], vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let y = run(&node("MatMul", vec![]), &[&batched, &b]);
        assert_eq!(y.shape, vec![2, 1, 2]);
        assert_eq!(y.data, want);
    }

    #[test]
    fn batch_norm_normalizes_per_channel() {
        let x = f(&[1, 2, 1, 2], vec![1.0, 3.0, 10.0, 20.0]);
        let ins = [
            &x,
            &f(&[2], vec![1.0, 2.0]),
            &f(&[2], vec![0.0, 1.0]),
            &f(&[2], vec![2.0, 15.0]),
            &f(&[2], vec![1.0, 25.0]),
        ];
        let mut eps = int("", 0);
        eps.name = Some("epsilon".into());
        eps.i = None;
        eps.f = Some(0.0);
        let y = run(&node("BatchNormalization", vec![eps]), &ins);
        assert_eq!(y.data, vec![-1.0, 1.0, -1.0, 3.0]);
    }

    #[test]
    fn shape_plumbing() {
        let x = f(&[2, 3, 4], vec![0.0; 24]);
        let ins: Vec<Option<&Value>> = vec![Some(&x)];
        let shape = run_node(&node("Shape", vec![]), &ins, 17).unwrap().remove(0);
        assert_eq!(shape, Value::Int(Tensor::new(vec![3], vec![2, 3, 4])));
        let idx = Value::Int(Tensor::new(vec![], vec![0]));
        let first = run_node(&node("Gather", vec![]), &[Some(&shape), Some(&idx)], 17)
            .unwrap()
            .remove(0);
        assert_eq!(first, Value::Int(Tensor::new(vec![], vec![2])));
        let spec = Value::Int(Tensor::new(vec![2], vec![0, -1]));
        let r = run_node(&node("Reshape", vec![]), &[Some(&x), Some(&spec)], 17)
            .unwrap()
            .remove(0);
        assert_eq!(r.shape(), &[2, 12]);
        let axes = Value::Int(Tensor::new(vec![1], vec![-1]));
        let u = run_node(&node("Unsqueeze", vec![]), &[Some(&x), Some(&axes)], 17)
            .unwrap()
            .remove(0);
        assert_eq!(u.shape(), &[2, 3, 4, 1]);
        let s = run_node(&node("Squeeze", vec![]), &[Some(&u)], 17).unwrap().remove(0);
        assert_eq!(s.shape(), &[2, 3, 4]);
        let fl = run(&node("Flatten", vec![int("axis", 2)]), &[&x]);
        assert_eq!(fl.shape, vec![6, 4]);
    }

    #[test]
    fn concat_softmax_pad_reduce() {
        let a = f(&[1, 1, 2], vec![1.0, 2.0]);
        let b = f(&[1, 2, 2], vec![3.0, 4.0, 5.0, 6.0]);
        let c = run(&node("Concat", vec![int("axis", 1)]), &[&a, &b]);
        assert_eq!(
            (c.shape.clone(), c.data.clone()),
            (vec![1, 3, 2], vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0])
        );
        let s = run(&node("Softmax", vec![]), &[&f(&[2], vec![0.0, 2f32.ln()])]);
        assert!((s.data[0] - 1.0 / 3.0).abs() < 1e-6 && (s.data[1] - 2.0 / 3.0).abs() < 1e-6);
        let pads = Value::Int(Tensor::new(vec![2], vec![1, 2]));
        let mut mode = int("", 0);
        mode.name = Some("mode".into());
        mode.i = None;
        mode.s = Some(b"reflect".to_vec());
        let p = run(&node("Pad", vec![mode]), &[&f(&[3], vec![1.0, 2.0, 3.0]), &pads]);
        assert_eq!(p.data, vec![2.0, 1.0, 2.0, 3.0, 2.0, 1.0]);
        let m = run(&node("ReduceMean", vec![ints("axes", &[2]), int("keepdims", 0)]), &[&b]);
        assert_eq!((m.shape, m.data), (vec![1, 2], vec![3.5, 5.5]));
    }

    #[test]
    fn unknown_operator_is_unsupported() {
        let x = f(&[1], vec![0.0]);
        assert!(matches!(
            run_node(&node("Einsum", vec![]), &[Some(&x)], 17),
            Err(DeepError::Unsupported(_))
        ));
    }
}
