from dataclasses import dataclass
from pathlib import Path
from typing import FrozenSet, Optional, Union

import torch
from torch import nn

# Operator classes that become taps unless an ExportSpec overrides them.
DEFAULT_TAP_OPS = frozenset({
    "Conv", "Relu", "Clip", "MaxPool", "AveragePool", "GlobalAveragePool",
    "BatchNormalization", "Concat", "Add", "Gemm", "MatMul",
})

IMAGENET_MEAN = (0.485, 0.456, 0.406)
IMAGENET_STD = (0.229, 0.224, 0.225)


class ExportError(Exception):
    """Unsupported architecture or a graph whose shapes cannot be inferred."""


class Toy(nn.Module):
    """conv -> relu -> maxpool -> dense on a 32x32 input."""

    def __init__(self):
        super().__init__()
        self.conv1 = nn.Conv2d(3, 4, 3, padding=1)
        self.relu1 = nn.ReLU()
        self.pool1 = nn.MaxPool2d(2)
        self.dense1 = nn.Linear(4 * 16 * 16, 8)

    def forward(self, x):
        return self.dense1(torch.flatten(self.pool1(self.relu1(self.conv1(x))), 1))


@dataclass(frozen=True)
class Architecture:
    build: object
    input_side: int
    imagenet_normalized: bool
    # layer total reported for the Keras build of the same network
    reference_layer_count: Optional[int] = None


def _zoo(name, **kwargs):
    def build(pretrained):
        import torchvision

        weights = "DEFAULT" if pretrained else None
        return getattr(torchvision.models, name)(weights=weights, **kwargs)

    return build


def _toy(pretrained):
    if pretrained:
        raise ExportError("architecture `toy` has no pretrained weights")
    return Toy()


ARCHITECTURES = {
    "toy": Architecture(_toy, 32, False),
    "resnet101": Architecture(_zoo("resnet101"), 224, True, 379),
    "densenet121": Architecture(_zoo("densenet121"), 224, True, 597),
    "vgg19": Architecture(_zoo("vgg19"), 224, True, 26),
    "inception_v3": Architecture(_zoo("inception_v3", aux_logits=True, init_weights=False), 299, True, 313),
    "mobilenet_v2": Architecture(_zoo("mobilenet_v2"), 224, True, 157),
}


@dataclass
class ExportSpec:
    architecture: str
    # "pretrained" pulls the model zoo weights; anything else is a state_dict path
    weights: Union[str, Path] = "pretrained"
    out_dir: Path = Path(".")
    # 15: the ONNX reference evaluator treats BatchNormalization-9 with a
    # momentum attribute as training mode
    opset: int = 15
    tap_ops: FrozenSet[str] = DEFAULT_TAP_OPS
    model_id: Optional[str] = None
    input_side: Optional[int] = None

    def arch(self) -> Architecture:
        try:
            return ARCHITECTURES[self.architecture]
        except KeyError:
            known = ", ".join(sorted(ARCHITECTURES))
            raise ExportError(f"unsupported architecture `{self.architecture}` (known: {known})") from None

    @property
    def id(self) -> str:
        return self.model_id or self.architecture

    @property
    def side(self) -> int:
        return self.input_side or self.arch().input_side

    @property
    def graph_path(self) -> Path:
        return Path(self.out_dir) / f"{self.id}.onnx"

    @property
    def manifest_path(self) -> Path:
        return Path(self.out_dir) / f"{self.id}.json"

    def load_model(self) -> nn.Module:
        arch = self.arch()
        if str(self.weights) == "pretrained":
            model = arch.build(True)
        else:
            model = arch.build(False)
            model.load_state_dict(torch.load(self.weights, map_location="cpu", weights_only=True))
        return model.eval()
