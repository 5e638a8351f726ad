"""End-to-end network: shared 1x1 reduction, difference map, graph and quantum
branches, SAM weighting, fusion layers and the classifier head."""
from dataclasses import asdict, dataclass

import numpy as np

from .autodiff import BatchNormState, Tensor, conv1x1, softmax
from .fusion import fuse, weighted_sum
from .gfl import gfl_forward
from .preprocess import sam_map
from .qec import qec_forward
from .qfl import qfl_forward
from .quantum import QuantumLayerParams, QueenCircuit


class ConfigError(ValueError):
    """Inconsistent layer widths or options."""


@dataclass
class ModelConfig:
    height: int
    width: int
    bands: int
    features: int = 64
    heads: int = 2
    qfl_groups: int = 4
    qubits: int = 4
    eta: int = 1
    topology: str = "chain"
    group_params: bool = False
    use_qfl: bool = True
    use_qec: bool = True

    def validate(self):
        if min(self.height, self.width, self.bands) < 1:
            raise ConfigError("image dimensions must be positive")
        if self.features % self.heads:
            raise ConfigError(f"{self.features} features do not split over {self.heads} heads")
        if self.qubits < 3:
            raise ConfigError("the entanglement stage needs at least 3 qubits")
        if self.topology not in ("chain", "ring"):
            raise ConfigError(f"unknown coupling topology {self.topology!r}")
        n_out = len(range(0, self.qubits, 2))
        # the classifier's quantum branch must emit one logit per class and
        # its concatenation with the classical branch must match W's channels
        if self.qubits != 4 or n_out != 2:
            raise ConfigError("the classifier head needs a 4-qubit circuit with 2 readouts")
        if self.eta < 1 or self.qfl_groups < 1:
            raise ConfigError("eta and qfl_groups must be at least 1")

    @property
    def n_readout(self):
        return len(range(0, self.qubits, 2))

    def to_dict(self):
        return asdict(self)


def expected_shapes(cfg):
    """Name -> shape of every trainable tensor for ``cfg``."""
    f, c, q = cfg.features, cfg.bands, cfg.qubits
    nq = QuantumLayerParams.size(q, cfg.eta, cfg.topology)
    hd = f // cfg.heads
    cond = cfg.qfl_groups * q
    shapes = {
        "dr.kernel": (c, f),
        "dr.bias": (f,),
    }
    for n in range(cfg.heads):
        shapes[f"gfl.l1.T{n}"] = (f, hd)
        shapes[f"gfl.l1.a{n}"] = (2 * hd,)
    shapes["gfl.l2.T"] = (f, f)
    shapes["gfl.l2.a"] = (2 * f,)
    shapes.update({
        "qfl.conv_in.kernel": (f, cond),
        "qfl.conv_in.bias": (cond,),
        "qfl.quantum": (cfg.qfl_groups if cfg.group_params else 1, nq),
        "qfl.conv_out.kernel": (cfg.qfl_groups * cfg.n_readout, f),
        "qfl.conv_out.bias": (f,),
    })
    for name, cin in (("ff1", 3 * f + 1), ("ff2", f)):
        shapes.update({
            f"{name}.kernel": (3, 3, cin, f),
            f"{name}.bias": (f,),
            f"{name}.slope": (1,),
            f"{name}.gamma": (f,),
            f"{name}.beta": (f,),
        })
    shapes.update({
        "qec.fcl1.kernel": (f, q),
        "qec.fcl1.bias": (q,),
        "qec.quantum": (1, nq),
        "qec.fcl2.kernel": (f, 2),
        "qec.fcl2.bias": (2,),
        "qec.W": (cfg.height, cfg.width, 2 + cfg.n_readout),
        "qec.fcl3.kernel": (2 + cfg.n_readout, 2),
        "qec.fcl3.bias": (2,),
    })
    return shapes


def _fan_in(name, shape):
    if name.endswith(".a0") or name.endswith(".a1") or name.endswith(".a"):
        return shape[0]
    if len(shape) == 4:
        return shape[0] * shape[1] * shape[2]
    return shape[0]


class ModelParams:
    """All trainable tensors plus batch-norm running statistics.

    Construction checks every tensor against the widths implied by the
    config, so an inconsistent channel chain fails before any data is seen.
    """

    def __init__(self, config, tensors, bn=None):
        config.validate()
        self.config = config
        shapes = expected_shapes(config)
        missing = set(shapes) - set(tensors)
        extra = set(tensors) - set(shapes)
        if missing or extra:
            raise ConfigError(f"parameter names differ: missing {sorted(missing)}, unexpected {sorted(extra)}")
        for name, shape in shapes.items():
            got = tuple(np.shape(tensors[name].data if isinstance(tensors[name], Tensor) else tensors[name]))
            if got != shape:
                raise ConfigError(f"{name}: expected shape {shape}, got {got}")
        self.tensors = {
            name: t if isinstance(t, Tensor) else Tensor(np.array(t, dtype=float), requires_grad=True, name=name)
            for name, t in ((n, tensors[n]) for n in shapes)
        }
        for name, t in self.tensors.items():
            t.requires_grad = True
            t.name = name
        self.bn = bn or {k: BatchNormState.create(config.features) for k in ("ff1", "ff2")}

    @classmethod
    def init(cls, config, rng):
        config.validate()
        tensors = {}
        for name, shape in expected_shapes(config).items():
            if name.endswith(".slope"):
                data = np.full(shape, 0.25)
            elif name.endswith(".gamma"):
                data = np.ones(shape)
            elif name.endswith(".beta") or name == "qec.W":
                data = np.zeros(shape)
            elif name.endswith(".quantum"):
                data = rng.uniform(0.0, 2 * np.pi, shape)
            else:
                bound = np.sqrt(1.0 / _fan_in(name, shape))
                data = rng.uniform(-bound, bound, shape)
            tensors[name] = data
        return cls(config, tensors)

    def __getitem__(self, name):
        return self.tensors[name]

    def __iter__(self):
        return iter(self.tensors)

    def items(self):
        return self.tensors.items()

    def zero_grad(self):
        for t in self.tensors.values():
            t.zero_grad()

    def grads(self):
        return {n: (np.zeros_like(t.data) if t.grad is None else t.grad) for n, t in self.tensors.items()}

    def arrays(self):
        return {n: t.data for n, t in self.tensors.items()}

    def copy(self):
        bn = {k: BatchNormState(s.mean.copy(), s.var.copy(), s.momentum, s.eps) for k, s in self.bn.items()}
        return ModelParams(self.config, {n: t.data.copy() for n, t in self.tensors.items()}, bn)


class Network:
    """Forward pass bound to a parameter set and its compiled circuits."""

    def __init__(self, params, backend=None):
        self.params = params
        cfg = params.config
        self.circuit = QueenCircuit(cfg.qubits, cfg.eta, cfg.topology, backend=backend)

    def forward(self, x1, x2, graph, z=None, training=True):
        """Return a dict with M, M_QNN, M_FCL and the main intermediates.

        ``z`` is the spectral angle map; computed from the inputs when omitted.
        """
        p, cfg = self.params, self.params.config
        x1 = np.asarray(x1, dtype=float)
        x2 = np.asarray(x2, dtype=float)
        if x1.shape != (cfg.height, cfg.width, cfg.bands) or x2.shape != x1.shape:
            raise ConfigError(f"inputs {x1.shape}/{x2.shape} do not match the configured image size")
        if z is None:
            z = sam_map(x1, x2)
        x1r = conv1x1(Tensor(x1), p["dr.kernel"], p["dr.bias"])
        x2r = conv1x1(Tensor(x2), p["dr.kernel"], p["dr.bias"])
        x_diff = x1r - x2r
        g_out = gfl_forward(x_diff, graph, p, cfg.heads)
        if cfg.use_qfl:
            q_out = qfl_forward(x_diff, p, self.circuit)
        else:
            q_out = Tensor(np.zeros(g_out.shape))
        x_fea = weighted_sum(g_out, q_out, z)
        x_fuse = fuse(x_fea, x1r, x2r, z, p, p.bn, training)
        if cfg.use_qec:
            m, m_qnn, m_fcl = qec_forward(x_fuse, p, self.circuit)
        else:
            m_fcl = softmax(conv1x1(x_fuse, p["qec.fcl2.kernel"], p["qec.fcl2.bias"]), axis=-1)
            m, m_qnn = m_fcl, None
        return {
            "M": m,
            "M_QNN": m_qnn,
            "M_FCL": m_fcl,
            "X_diff": x_diff,
            "X_fea": x_fea,
            "X_fuse": x_fuse,
            "Z": z,
        }
