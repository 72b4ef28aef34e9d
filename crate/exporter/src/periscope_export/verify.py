import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import onnx

from .reference import graph_input, run_graph
from .spec import ExportError


@dataclass
class VerifyReport:
    tolerance: float
    # (layer name, max abs diff) in manifest order
    diffs: list = field(default_factory=list)

    @property
    def failures(self):
        return [name for name, d in self.diffs if not d <= self.tolerance]

    @property
    def passed(self) -> bool:
        return not self.failures

    def render(self) -> str:
        lines = [f"{name}\t{d:.3e}\t{'ok' if d <= self.tolerance else 'FAIL'}" for name, d in self.diffs]
        verdict = "pass" if self.passed else f"fail: {', '.join(self.failures)}"
        return "\n".join(lines + [verdict])


def check_agreement(model: onnx.ModelProto, manifest: dict):
    """Every manifest row has a matching tap output and vice versa."""
    in_graph = {o.name for o in model.graph.output if o.name.startswith("tap/")}
    in_manifest = {f"tap/{layer['index']}/{layer['name']}" for layer in manifest["layers"]}
    if in_graph != in_manifest:
        missing = sorted(in_manifest - in_graph)
        extra = sorted(in_graph - in_manifest)
        raise ExportError(f"missing tap: not in graph {missing}, not in manifest {extra}")


def verify(graph, manifest, reference, tolerance: float = 1e-4) -> VerifyReport:
    """Runs the graph on the reference image and compares every tap."""
    model = onnx.load(str(graph)) if isinstance(graph, (str, Path)) else graph
    if isinstance(manifest, (str, Path)):
        manifest = json.loads(Path(manifest).read_text())
    if isinstance(reference, (str, Path)):
        reference = json.loads(Path(reference).read_text())
    check_agreement(model, manifest)
    missing = [layer["name"] for layer in manifest["layers"] if layer["name"] not in reference["taps"]]
    if missing:
        raise ExportError(f"missing tap in reference activations: {missing}")

    side = reference["side"]
    image = np.asarray(reference["pixels"], dtype=np.uint8).reshape(side, side)
    outputs = run_graph(model, graph_input(image, manifest["preprocess"]))
    report = VerifyReport(tolerance)
    for layer in manifest["layers"]:
        got = outputs[f"tap/{layer['index']}/{layer['name']}"].astype(np.float64).ravel()
        want = np.asarray(reference["taps"][layer["name"]], dtype=np.float64)
        diff = float(np.max(np.abs(got - want))) if got.shape == want.shape else float("inf")
        report.diffs.append((layer["name"], diff))
    return report
