"""The traffic-light network: stem, inverted-residual bottlenecks, two heads.

Layer stack (width multiplier α applied to every channel count):
conv 3x3 s2 -> 32ch, maxpool 2x2, ten bottleneck groups
(1,16,1,1) (6,24,1,2) (6,24,2,1) (6,32,1,2) (6,64,1,2) (6,64,2,1)
(6,96,1,1) (6,160,1,2) (6,160,1,1) (6,320,1,1), conv 1x1 -> 1280,
global average pool, then 1280->160->5 (class logits, order red / green /
countdown_green / countdown_blank / none) and 1280->80->4 (midline endpoints
x1,y1,x2,y2 in normalized [0,1] image coordinates, unclamped).

Any input whose spatial dims are divisible by 64 is accepted; the global
average pool absorbs the resulting feature-map size.
"""

from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from . import tensor as T
from .tensor import ConvDescriptor, ShapeError, Tensor

CLASS_NAMES = ("red", "green", "countdown_green", "countdown_blank", "none")
NUM_CLASSES = len(CLASS_NAMES)
CLASS_INDEX = {name: i for i, name in enumerate(CLASS_NAMES)}

BN_MOMENTUM = 0.1
BN_EPS = 1e-5


def apply_width_multiplier(c: int, alpha: float) -> int:
    """Scale a channel count by alpha, snapped to the nearest multiple of 8
    (ties round up), never below 8."""
    if c < 8:
        raise ValueError(f"channel count {c} below the minimum of 8")
    if alpha <= 0:
        raise ValueError(f"width multiplier must be positive, got {alpha}")
    snapped = 8 * int(np.floor(c * alpha / 8.0 + 0.5))
    return max(8, snapped)


@dataclass(frozen=True)
class BottleneckSpec:
    """One table row: expansion t, output channels c, repeats n, stride s.

    Within a repeated group only the first block uses stride s; the rest
    use stride 1.
    """

    expansion: int
    out_channels: int
    repeats: int
    stride: int

    def __post_init__(self):
        if self.expansion < 1 or self.out_channels < 1 or self.repeats < 1:
            raise ValueError(f"invalid bottleneck spec {self}")
        if self.stride not in (1, 2):
            raise ValueError(f"bottleneck stride must be 1 or 2, got {self.stride}")


# The printed table's 160-channel stage is stride-repaired (its first block
# must downsample for the arithmetic to hold) and represented as two
# single-repeat groups, giving ten groups / twelve blocks in total.
DEFAULT_BOTTLENECKS: Tuple[BottleneckSpec, ...] = (
    BottleneckSpec(1, 16, 1, 1),
    BottleneckSpec(6, 24, 1, 2),
    BottleneckSpec(6, 24, 2, 1),
    BottleneckSpec(6, 32, 1, 2),
    BottleneckSpec(6, 64, 1, 2),
    BottleneckSpec(6, 64, 2, 1),
    BottleneckSpec(6, 96, 1, 1),
    BottleneckSpec(6, 160, 1, 2),
    BottleneckSpec(6, 160, 1, 1),
    BottleneckSpec(6, 320, 1, 1),
)


@dataclass
class NetworkConfig:
    width_multiplier: float = 1.0
    input_height: int = 576
    input_width: int = 768
    bottlenecks: Tuple[BottleneckSpec, ...] = DEFAULT_BOTTLENECKS
    stem_channels: int = 32
    feature_channels: int = 1280
    class_head_width: int = 160
    regress_head_width: int = 80
    num_classes: int = NUM_CLASSES
    num_endpoints: int = 4

    def validate(self):
        if self.width_multiplier <= 0:
            raise ValueError(f"width multiplier must be positive, got {self.width_multiplier}")
        if self.input_height % 64 or self.input_width % 64:
            raise ValueError(
                f"input dims must be divisible by 64, got "
                f"{self.input_height}x{self.input_width}"
            )
        for spec in self.bottlenecks:
            if apply_width_multiplier(spec.out_channels, self.width_multiplier) < 8:
                raise ValueError(f"scaled channels below 8 for {spec}")
        return self


class Parameters:
    """Ordered, named collection of learnable tensors plus running buffers.

    Iteration yields learnable entries only (what the optimizer touches);
    ``state_arrays`` additionally interleaves the batch-norm running
    statistics in registration order for serialization.
    """

    def __init__(self):
        self._params: dict = {}
        self._buffers: dict = {}
        self._decay: set = set()
        self._order: list = []

    def add(self, name: str, array: np.ndarray, decay: bool = False) -> Tensor:
        if name in self._params or name in self._buffers:
            raise ValueError(f"duplicate parameter name {name!r}")
        t = Tensor(array, requires_grad=True, name=name)
        self._params[name] = t
        self._order.append((name, "param"))
        if decay:
            self._decay.add(name)
        return t

    def add_buffer(self, name: str, array: np.ndarray) -> np.ndarray:
        if name in self._params or name in self._buffers:
            raise ValueError(f"duplicate parameter name {name!r}")
        arr = np.ascontiguousarray(array, dtype=np.float32)
        self._buffers[name] = arr
        self._order.append((name, "buffer"))
        return arr

    def __len__(self):
        return len(self._params)

    def __contains__(self, name):
        return name in self._params

    def __getitem__(self, name) -> Tensor:
        return self._params[name]

    def items(self):
        return self._params.items()

    def names(self):
        return list(self._params)

    def tensors(self) -> List[Tensor]:
        return list(self._params.values())

    def decay_items(self):
        """(name, tensor) pairs subject to L2 regularization."""
        return [(n, t) for n, t in self._params.items() if n in self._decay]

    def zero_grad(self):
        for t in self._params.values():
            t.grad = None

    def state_arrays(self):
        """All persistent arrays (learnables + buffers) in registration order."""
        out = []
        for name, kind in self._order:
            arr = self._params[name].data if kind == "param" else self._buffers[name]
            out.append((name, arr))
        return out

    def load_state(self, arrays: dict):
        """Overwrite every persistent array from a name->array mapping."""
        expected = [name for name, _ in self._order]
        missing = [n for n in expected if n not in arrays]
        extra = [n for n in arrays if n not in set(expected)]
        if missing or extra:
            raise ValueError(
                f"parameter names do not match network: missing {missing[:3]}..., "
                f"unexpected {extra[:3]}..." if len(missing) + len(extra) > 6 else
                f"parameter names do not match network: missing {missing}, unexpected {extra}"
            )
        for name, kind in self._order:
            src = np.asarray(arrays[name], dtype=np.float32)
            dst = self._params[name].data if kind == "param" else self._buffers[name]
            if src.shape != dst.shape:
                raise ValueError(
                    f"shape mismatch for {name!r}: file has {src.shape}, network has {dst.shape}"
                )
            dst[...] = src


class _ConvBN:
    """Convolution + batch norm + optional relu6 (linear when act=False)."""

    def __init__(self, params, rng, name, cin, cout, kernel, stride, mode, act=True):
        pad = kernel // 2  # same padding keeps the table's spatial arithmetic
        self.name = name
        self.desc = ConvDescriptor(kernel, stride, (pad, pad), cin, cout, mode)
        fan_in = kernel * kernel * (1 if mode == "depthwise" else cin)
        self.weight = params.add(
            f"{name}.weight",
            T.init_uniform_fan_in(rng, self.desc.weight_shape, fan_in),
            decay=True,
        )
        self.gamma = params.add(f"{name}.bn.gamma", np.ones(cout, np.float32))
        self.beta = params.add(f"{name}.bn.beta", np.zeros(cout, np.float32))
        self.running_mean = params.add_buffer(f"{name}.bn.running_mean", np.zeros(cout))
        self.running_var = params.add_buffer(f"{name}.bn.running_var", np.ones(cout))
        self.act = act

    def forward(self, x, training):
        y = T.conv2d(x, self.weight, self.desc)
        if training:
            y, bmean, bvar = T.batch_norm_train(y, self.gamma, self.beta, BN_EPS)
            n, _, h, w = y.shape
            m = n * h * w
            unbiased = bvar * (m / (m - 1)) if m > 1 else bvar
            self.running_mean *= 1.0 - BN_MOMENTUM
            self.running_mean += BN_MOMENTUM * bmean
            self.running_var *= 1.0 - BN_MOMENTUM
            self.running_var += BN_MOMENTUM * unbiased
        else:
            y = T.batch_norm_eval(y, self.gamma, self.beta,
                                  self.running_mean, self.running_var, BN_EPS)
        if self.act:
            y = T.relu6(y)
        return y


class _Bottleneck:
    """Inverted residual: 1x1 expand (t>1), depthwise 3x3, linear 1x1 project."""

    def __init__(self, params, rng, name, cin, cout, expansion, stride):
        hidden = cin * expansion
        self.name = name
        self.expand = (
            _ConvBN(params, rng, f"{name}.expand", cin, hidden, 1, 1, "pointwise")
            if expansion != 1 else None
        )
        self.depthwise = _ConvBN(params, rng, f"{name}.depthwise",
                                 hidden, hidden, 3, stride, "depthwise")
        self.project = _ConvBN(params, rng, f"{name}.project",
                               hidden, cout, 1, 1, "pointwise", act=False)
        self.use_residual = stride == 1 and cin == cout

    def forward(self, x, training):
        y = x
        if self.expand is not None:
            y = self.expand.forward(y, training)
        y = self.depthwise.forward(y, training)
        y = self.project.forward(y, training)
        if self.use_residual:
            y = T.add(y, x)
        return y


class _Linear:
    def __init__(self, params, rng, name, fin, fout):
        self.weight = params.add(
            f"{name}.weight", T.init_uniform_fan_in(rng, (fin, fout), fin), decay=True
        )
        self.bias = params.add(f"{name}.bias", np.zeros(fout, np.float32))

    def forward(self, x):
        return T.fully_connected(x, self.weight, self.bias)


@dataclass
class LayerCost:
    """Analytic cost of one multiply-accumulate-bearing layer."""

    name: str
    kind: str  # standard | depthwise | pointwise | fc
    out_h: int
    out_w: int
    kernel: int
    in_channels: int
    out_channels: int
    macs: int


class LYTNet:
    """The assembled network with its learnable parameters."""

    def __init__(self, config: NetworkConfig, seed: int):
        config.validate()
        self.config = config
        rng = np.random.default_rng(seed)
        params = Parameters()
        alpha = config.width_multiplier

        c_stem = apply_width_multiplier(config.stem_channels, alpha)
        self.stem = _ConvBN(params, rng, "stem", 3, c_stem, 3, 2, "standard")

        self.blocks: List[_Bottleneck] = []
        cin = c_stem
        index = 0
        for spec in config.bottlenecks:
            cout = apply_width_multiplier(spec.out_channels, alpha)
            for repeat in range(spec.repeats):
                index += 1
                stride = spec.stride if repeat == 0 else 1
                self.blocks.append(
                    _Bottleneck(params, rng, f"bottleneck{index}",
                                cin, cout, spec.expansion, stride)
                )
                cin = cout

        self.c_features = apply_width_multiplier(config.feature_channels, alpha)
        self.features = _ConvBN(params, rng, "features", cin, self.c_features,
                                1, 1, "pointwise")
        self.class_fc1 = _Linear(params, rng, "head_class.fc1",
                                 self.c_features, config.class_head_width)
        self.class_fc2 = _Linear(params, rng, "head_class.fc2",
                                 config.class_head_width, config.num_classes)
        self.regress_fc1 = _Linear(params, rng, "head_regress.fc1",
                                   self.c_features, config.regress_head_width)
        self.regress_fc2 = _Linear(params, rng, "head_regress.fc2",
                                   config.regress_head_width, config.num_endpoints)
        self.parameters = params

    def forward(self, batch, training=False, trace=None):
        """Run the network. Returns (logits (N,5), endpoints (N,4)).

        ``trace``, when a list, collects (stage_name, output_shape) pairs.
        """
        x = batch if isinstance(batch, Tensor) else Tensor(batch)
        if x.ndim != 4 or x.shape[1] != 3:
            raise ShapeError(f"expected (N,3,H,W) input, got shape {x.shape}")
        if x.shape[2] % 64 or x.shape[3] % 64:
            raise ShapeError(
                f"input spatial dims must be divisible by 64, got {x.shape[2]}x{x.shape[3]}"
            )

        def record(name, t):
            if trace is not None:
                trace.append((name, tuple(t.shape)))

        record("input", x)
        y = self.stem.forward(x, training)
        record("stem", y)
        y = T.maxpool2d(y, 2, 2)
        record("maxpool", y)
        for block in self.blocks:
            y = block.forward(y, training)
            record(block.name, y)
        y = self.features.forward(y, training)
        record("features", y)
        pooled = T.global_avgpool(y)
        record("avgpool", pooled)

        h = T.relu6(self.class_fc1.forward(pooled))
        record("head_class.fc1", h)
        logits = self.class_fc2.forward(h)
        record("head_class.logits", logits)

        g = T.relu6(self.regress_fc1.forward(pooled))
        record("head_regress.fc1", g)
        endpoints = self.regress_fc2.forward(g)
        record("head_regress.endpoints", endpoints)
        return logits, endpoints

    # -- analytic cost -----------------------------------------------------

    def flops_breakdown(self) -> List[LayerCost]:
        """Per-layer analytic multiply-accumulate counts for one input image."""
        cfg = self.config
        costs: List[LayerCost] = []

        def conv_entry(name, desc: ConvDescriptor, h, w):
            k, s = desc.kernel_size, desc.stride
            ph, pw = desc.padding
            oh = (h + 2 * ph - k) // s + 1
            ow = (w + 2 * pw - k) // s + 1
            if desc.mode == "depthwise":
                macs = oh * ow * k * k * desc.in_channels
            else:
                macs = oh * ow * k * k * desc.in_channels * desc.out_channels
            costs.append(LayerCost(name, desc.mode, oh, ow, k,
                                   desc.in_channels, desc.out_channels, macs))
            return oh, ow

        h, w = cfg.input_height, cfg.input_width
        h, w = conv_entry("stem", self.stem.desc, h, w)
        h, w = h // 2, w // 2  # maxpool
        for block in self.blocks:
            if block.expand is not None:
                h, w = conv_entry(block.expand.name, block.expand.desc, h, w)
            h, w = conv_entry(block.depthwise.name, block.depthwise.desc, h, w)
            h, w = conv_entry(block.project.name, block.project.desc, h, w)
        h, w = conv_entry("features", self.features.desc, h, w)

        for name, layer in (
            ("head_class.fc1", self.class_fc1), ("head_class.fc2", self.class_fc2),
            ("head_regress.fc1", self.regress_fc1), ("head_regress.fc2", self.regress_fc2),
        ):
            fin, fout = layer.weight.shape
            costs.append(LayerCost(name, "fc", 1, 1, 1, fin, fout, fin * fout))
        return costs

    def count_flops(self) -> int:
        """Total analytic multiply-accumulates for one forward pass of one image."""
        return sum(c.macs for c in self.flops_breakdown())

    # -- persistence ---------------------------------------------------------

    def state_arrays(self):
        return self.parameters.state_arrays()

    def save(self, path):
        from .lytw import save_weights

        save_weights(path, self.state_arrays())

    def load(self, path):
        from .lytw import load_weights

        self.parameters.load_state(load_weights(path))
        return self


def build_lytnet(config: NetworkConfig, seed: int):
    """Build the network; two builds with the same seed produce identical
    Parameters."""
    net = LYTNet(config, seed)
    return net, net.parameters
