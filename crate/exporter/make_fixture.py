"""Writes exported_toy.{onnx,json} and exported_toy_reference.json into the
core crate's test fixtures, so the Rust loader is tested on real exporter
output.

    python3 make_fixture.py
"""

import json
import tempfile
from pathlib import Path

import onnx
import torch

from periscope_export import ExportSpec, export, reference_activations
from periscope_export.reference import save_reference
from periscope_export.spec import Toy

FIXTURES = Path(__file__).resolve().parent.parent / "crates/core/tests/fixtures"


def main():
    torch.manual_seed(7)
    with tempfile.TemporaryDirectory() as tmp:
        weights = Path(tmp) / "toy.pt"
        torch.save(Toy().state_dict(), weights)
        spec = ExportSpec("toy", weights=weights, out_dir=FIXTURES, model_id="exported_toy")
        graph, manifest = export(spec)
        ref = reference_activations(spec.load_model(), onnx.load(str(graph)), json.loads(manifest.read_text()))
    save_reference(ref, FIXTURES / "exported_toy_reference.json")


if __name__ == "__main__":
    main()
