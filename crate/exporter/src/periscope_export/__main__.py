import argparse
import json
import sys
from pathlib import Path

import onnx

from . import ExportError, ExportSpec, export, verify
from .reference import reference_activations, save_reference
from .spec import DEFAULT_TAP_OPS


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="periscope-export")
    sub = parser.add_subparsers(dest="command", required=True)

    ex = sub.add_parser("export", help="export a CNN with tap outputs and a manifest sidecar")
    ex.add_argument("architecture")
    ex.add_argument("--weights", default="pretrained", help="`pretrained` or a state_dict file")
    ex.add_argument("--out-dir", type=Path, default=Path("."))
    ex.add_argument("--opset", type=int, default=15)
    ex.add_argument("--model-id")
    ex.add_argument("--side", type=int)
    ex.add_argument("--tap-ops", help="comma-separated operator types", default=",".join(sorted(DEFAULT_TAP_OPS)))
    ex.add_argument("--reference", action="store_true", help="also write <id>_reference.json")

    ve = sub.add_parser("verify", help="compare a graph's taps with reference activations")
    ve.add_argument("graph", type=Path)
    ve.add_argument("manifest", type=Path)
    ve.add_argument("reference", type=Path)
    ve.add_argument("--tolerance", type=float, default=1e-4)

    args = parser.parse_args(argv)
    try:
        if args.command == "export":
            spec = ExportSpec(
                architecture=args.architecture,
                weights=args.weights,
                out_dir=args.out_dir,
                opset=args.opset,
                tap_ops=frozenset(op for op in args.tap_ops.split(",") if op),
                model_id=args.model_id,
                input_side=args.side,
            )
            graph, manifest = export(spec)
            print(graph)
            print(manifest)
            if args.reference:
                ref = reference_activations(spec.load_model(), onnx.load(str(graph)), json.loads(manifest.read_text()))
                path = spec.out_dir / f"{spec.id}_reference.json"
                save_reference(ref, path)
                print(path)
            return 0
        report = verify(args.graph, args.manifest, args.reference, args.tolerance)
        print(report.render())
        return 0 if report.passed else 1
    except ExportError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
