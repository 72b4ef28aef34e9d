"""ONNX export with `tap/<index>/<name>` outputs and a JSON layer manifest."""

from .spec import DEFAULT_TAP_OPS, ExportError, ExportSpec
from .export import export, tap_graph, weights_hash
from .reference import pinned_image, reference_activations
from .verify import VerifyReport, verify

__all__ = [
    "DEFAULT_TAP_OPS",
    "ExportError",
    "ExportSpec",
    "VerifyReport",
    "export",
    "pinned_image",
    "reference_activations",
    "tap_graph",
    "verify",
    "weights_hash",
]
