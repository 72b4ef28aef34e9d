import hashlib
import io
import json
from collections import Counter

import numpy as np
import onnx
import torch
from onnx import TensorProto, helper, numpy_helper

from .spec import IMAGENET_MEAN, IMAGENET_STD, ExportError, ExportSpec

INPUT = "input"


def weights_hash(graph: onnx.GraphProto) -> str:
    """SHA-256 over each initializer in file order: name, a zero byte, then the
    values little-endian as f32 (float tensors) or i64 (everything else)."""
    h = hashlib.sha256()
    for init in graph.initializer:
        h.update(init.name.encode())
        h.update(b"\0")
        arr = numpy_helper.to_array(init)
        h.update(arr.astype("<f4" if arr.dtype.kind == "f" else "<i8").tobytes())
    return h.hexdigest()


def scope_of(node_name: str):
    """Qualified module path and op component of a torch-exported node name.

    Scope components are dotted paths relative to the enclosing module, and a
    component that extends the previous one replaces it:
    `/features/features.1/conv/conv.0/Conv` -> (`features.1.conv.0`, `Conv`).
    """
    parts = [p for p in node_name.split("/") if p]
    if not parts:
        return "", ""
    anchor, qualified, prev = "", "", None
    for c in parts[:-1]:
        if prev is None or not c.startswith(prev + "."):
            anchor = qualified
        qualified = f"{anchor}.{c}" if anchor else c
        prev = c
    return qualified, parts[-1]


def _tap_names(nodes):
    base = []
    for n in nodes:
        module, op = scope_of(n.name)
        base.append(module or op.lower() or n.op_type.lower())
    counts = Counter(base)
    names = []
    for n, b in zip(nodes, base):
        module, op = scope_of(n.name)
        names.append(b if counts[b] == 1 else f"{module}.{(op or n.op_type).lower()}".lstrip("."))
    # whatever still collides gets a running suffix
    seen = Counter()
    out = []
    for name in names:
        seen[name] += 1
        out.append(name if seen[name] == 1 else f"{name}_{seen[name] - 1}")
    return out


def _static_shapes(model):
    try:
        inferred = onnx.shape_inference.infer_shapes(model, strict_mode=True)
    except Exception as e:  # onnx raises several unrelated types here
        raise ExportError(f"shape inference failed: {e}") from e
    shapes = {}
    for vi in list(inferred.graph.value_info) + list(inferred.graph.output) + list(inferred.graph.input):
        dims = vi.type.tensor_type.shape.dim
        if all(d.HasField("dim_value") for d in dims):
            shapes[vi.name] = [d.dim_value for d in dims]
    return shapes


def tap_graph(model: onnx.ModelProto, tap_ops, model_id: str, mean=None, std=None):
    """Renames every output of a tappable operator to `tap/<index>/<name>`,
    exposes it as a graph output and returns `(model, manifest_layers)`.

    With `mean`/`std`, a per-channel normalization is prepended so the graph
    takes plain `[0, 1]` pixels.
    """
    model = onnx.ModelProto.FromString(model.SerializeToString())
    graph = model.graph
    graph.name = model_id
    if len(graph.input) != 1:
        raise ExportError(f"expected one graph input, found {len(graph.input)}")
    source = graph.input[0].name

    if mean is not None:
        entry = "normalized_input"
        for n in graph.node:
            n.input[:] = [entry if i == source else i for i in n.input]
        shape = [1, len(mean), 1, 1]
        graph.initializer.extend([
            numpy_helper.from_array(np.asarray(mean, np.float32).reshape(shape), "preprocess_mean"),
            numpy_helper.from_array(np.asarray(std, np.float32).reshape(shape), "preprocess_std"),
        ])
        prologue = [
            helper.make_node("Sub", [source, "preprocess_mean"], ["centered_input"], name="/preprocess/Sub"),
            helper.make_node("Div", ["centered_input", "preprocess_std"], [entry], name="/preprocess/Div"),
        ]
        nodes = prologue + list(graph.node)
        del graph.node[:]
        graph.node.extend(nodes)

    tapped = [n for n in graph.node if n.op_type in tap_ops and len(n.output) >= 1]
    if not tapped:
        raise ExportError("no operator matches the tap policy")
    renames = {}
    for i, (n, name) in enumerate(zip(tapped, _tap_names(tapped)), start=1):
        renames[n.output[0]] = f"tap/{i}/{name}"
    for n in graph.node:
        n.input[:] = [renames.get(i, i) for i in n.input]
        n.output[:] = [renames.get(o, o) for o in n.output]
    # untapped final outputs stay available under their own names
    kept = [o for o in graph.output if o.name not in renames]

    del graph.output[:]
    shapes = _static_shapes(model)
    outputs, layers = [], []
    for i, tap in enumerate(renames.values(), start=1):
        if tap not in shapes:
            raise ExportError(f"shape inference failed: no static shape for `{tap}`")
        outputs.append(helper.make_tensor_value_info(tap, TensorProto.FLOAT, shapes[tap]))
        layers.append({"index": i, "name": tap.split("/", 2)[2], "output_shape": shapes[tap][1:]})
    graph.output.extend(outputs + kept)
    onnx.checker.check_model(model)
    return model, layers


def manifest_for(spec: ExportSpec, model: onnx.ModelProto, layers) -> dict:
    manifest = {
        "model_id": spec.id,
        "input_shape": [spec.side, spec.side, 3],
        "layers": layers,
        "weights_hash": weights_hash(model.graph),
        "preprocess": {"scale": 1 / 255, "offset": 0.0},
        "opset": spec.opset,
        "architecture": spec.architecture,
    }
    count = spec.arch().reference_layer_count
    if count is not None:
        manifest["reference_layer_count"] = count
    return manifest


def to_onnx(spec: ExportSpec, module: torch.nn.Module) -> onnx.ModelProto:
    buf = io.BytesIO()
    dummy = torch.zeros(1, 3, spec.side, spec.side)
    with torch.no_grad():
        torch.onnx.export(
            module,
            dummy,
            buf,
            opset_version=spec.opset,
            input_names=[INPUT],
            output_names=["output"],
            do_constant_folding=False,
            dynamo=False,
        )
    return onnx.load_from_string(buf.getvalue())


def export(spec: ExportSpec):
    """Writes `<out_dir>/<id>.onnx` and its `<id>.json` manifest sidecar."""
    arch = spec.arch()
    module = spec.load_model()
    norm = (IMAGENET_MEAN, IMAGENET_STD) if arch.imagenet_normalized else (None, None)
    model, layers = tap_graph(to_onnx(spec, module), spec.tap_ops, spec.id, *norm)
    manifest = manifest_for(spec, model, layers)
    spec.graph_path.parent.mkdir(parents=True, exist_ok=True)
    spec.graph_path.write_bytes(model.SerializeToString())
    spec.manifest_path.write_text(json.dumps(manifest, indent=2) + "\n")
    return spec.graph_path, spec.manifest_path
