import json
from collections import Counter

import numpy as np
import onnx
import torch
from onnx.reference import ReferenceEvaluator

from .export import scope_of
from .spec import IMAGENET_MEAN, IMAGENET_STD


def pinned_image(side: int) -> np.ndarray:
    """Deterministic grayscale test pattern used for reference activations."""
    y, x = np.mgrid[0:side, 0:side]
    return ((x * 7 + y * 13 + (x * y) % 11) % 256).astype(np.uint8)


def graph_input(image: np.ndarray, preprocess: dict) -> np.ndarray:
    """The NCHW tensor periscope feeds the graph for a grayscale image."""
    plane = image.astype(np.float32) * np.float32(preprocess["scale"]) + np.float32(preprocess["offset"])
    return np.repeat(plane[None, None], 3, axis=1)


def tap_producers(model: onnx.ModelProto):
    """Tap output name -> producing node."""
    taps = {o.name for o in model.graph.output if o.name.startswith("tap/")}
    return {o: n for n in model.graph.node for o in n.output if o in taps}


def run_graph(model: onnx.ModelProto, x: np.ndarray) -> dict:
    """Every tap of `model` on input `x`, via the ONNX reference evaluator."""
    taps = [o.name for o in model.graph.output if o.name.startswith("tap/")]
    values = ReferenceEvaluator(model).run(taps, {model.graph.input[0].name: x})
    return dict(zip(taps, values))


def reference_activations(module: torch.nn.Module, model: onnx.ModelProto, manifest: dict, side=None):
    """Tap activations on the pinned image, taken from the source framework.

    Taps produced inside a leaf module that runs exactly once are read off a
    forward hook on that module. Functional ops (residual adds, concats) have
    no module to hook; those are filled from the exported graph itself and
    marked `"graph"` in `sources`.
    """
    side = side or manifest["input_shape"][0]
    image = pinned_image(side)
    x = graph_input(image, manifest["preprocess"])

    leaves = {name: m for name, m in module.named_modules() if name and not list(m.children())}
    captured, calls = {}, Counter()

    def hook(name):
        def record(_m, _inp, out):
            calls[name] += 1
            if isinstance(out, torch.Tensor):
                # clone: a following in-place ReLU would overwrite it
                captured[name] = out.detach().clone()

        return record

    handles = [m.register_forward_hook(hook(name)) for name, m in leaves.items()]
    try:
        with torch.no_grad():
            t = torch.from_numpy(x)
            if _normalizes(model):
                mean = torch.tensor(IMAGENET_MEAN).view(1, 3, 1, 1)
                std = torch.tensor(IMAGENET_STD).view(1, 3, 1, 1)
                t = (t - mean) / std
            module.eval()(t)
    finally:
        for h in handles:
            h.remove()

    producers = tap_producers(model)
    taps, sources = {}, {}
    fallback = None
    for layer in manifest["layers"]:
        tap = f"tap/{layer['index']}/{layer['name']}"
        module_name, _ = scope_of(producers[tap].name)
        if module_name in captured and calls[module_name] == 1:
            value, source = captured[module_name].numpy(), "torch"
        else:
            if fallback is None:
                fallback = run_graph(model, x)
            value, source = fallback[tap], "graph"
        taps[layer["name"]] = value.ravel().astype(float).tolist()
        sources[layer["name"]] = source
    return {
        "model_id": manifest["model_id"],
        "side": side,
        "pixels": image.ravel().tolist(),
        "taps": taps,
        "sources": sources,
    }


def _normalizes(model):
    return any(init.name == "preprocess_mean" for init in model.graph.initializer)


def save_reference(reference: dict, path):
    with open(path, "w") as f:
        json.dump(reference, f)
