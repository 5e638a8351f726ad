"""Label sampling, Adam with step decay, the training loop and Monte-Carlo runs."""
import json
import logging
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from .autodiff import NonFiniteError
from .metrics import ConfusionCounts, metrics
from .model import ModelConfig, ModelParams, Network
from .preprocess import lda_project, sam_map, slic
from .qec import loss

logger = logging.getLogger(__name__)


class TrainingDiverged(RuntimeError):
    """The loss or a gradient became non-finite."""


@dataclass
class TrainConfig:
    lr0: float = 0.005
    decay: float = 0.9
    decay_every: int = 20
    max_epochs: int = 250
    sample_rate: float = 0.01
    class_balance: float = 1.0  # changed : unchanged sample ratio
    split: float = 0.9  # training share of the sampled pixels, per class
    s: int = 20
    seed: int = 0
    use_qfl: bool = True
    use_qec: bool = True
    features: int = 64
    qfl_groups: int = 4
    eta: int = 1
    topology: str = "chain"
    group_params: bool = False
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def validate(self):
        for name in ("lr0", "decay", "sample_rate", "split"):
            v = getattr(self, name)
            if not 0 < v <= 1:
                raise ValueError(f"{name} must lie in (0, 1], got {v}")
        if self.class_balance <= 0:
            raise ValueError("class_balance must be positive")
        if self.max_epochs < 1 or self.decay_every < 1 or self.s < 1:
            raise ValueError("max_epochs, decay_every and s must be at least 1")
        return self

    @classmethod
    def from_dict(cls, d):
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d).validate()

    @classmethod
    def from_json(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self):
        return asdict(self)

    def lr_at(self, epoch):
        return self.lr0 * self.decay ** (epoch // self.decay_every)

    def model_config(self, height, width, bands):
        return ModelConfig(
            height, width, bands,
            features=self.features,
            qfl_groups=self.qfl_groups,
            eta=self.eta,
            topology=self.topology,
            group_params=self.group_params,
            use_qfl=self.use_qfl,
            use_qec=self.use_qec,
        )


def sample_labels(gt, rate=0.01, seed=0, split=0.9, balance=1.0):
    """Balanced random sample of labelled pixels, split into train/val masks.

    ``floor(rate * H * W)`` pixels are drawn, divided between changed and
    unchanged pixels in the ratio ``balance`` : 1 (at least one of each; capped
    at the class size with a warning). Each class is then split ``split`` :
    ``1 - split`` into training and validation pixels.
    """
    gt = np.asarray(gt).astype(bool)
    pos, neg = np.flatnonzero(gt.ravel()), np.flatnonzero(~gt.ravel())
    if len(pos) == 0 or len(neg) == 0:
        raise ValueError("ground truth must contain both changed and unchanged pixels")
    total = int(np.floor(rate * gt.size))
    n_pos = max(1, int(round(total * balance / (1 + balance))))
    n_neg = max(1, total - n_pos)
    rng = np.random.default_rng(seed)
    train = np.zeros(gt.size, dtype=bool)
    val = np.zeros(gt.size, dtype=bool)
    for idx, n, label in ((pos, n_pos, "changed"), (neg, n_neg, "unchanged")):
        if n > len(idx):
            logger.warning("only %d %s pixels available, wanted %d", len(idx), label, n)
            n = len(idx)
        pick = rng.choice(idx, size=n, replace=False)
        n_train = max(1, int(round(split * n)))
        train[pick[:n_train]] = True
        val[pick[n_train:]] = True
    return train.reshape(gt.shape), val.reshape(gt.shape)


class Adam:
    """Adam with bias correction over a name -> array parameter dict."""

    def __init__(self, beta1=0.9, beta2=0.999, eps=1e-8):
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.m = {}
        self.v = {}
        self.t = 0

    def step(self, params, grads, lr):
        """Update ``params`` (name -> ndarray) in place."""
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        c1 = 1 - b1 ** self.t
        c2 = 1 - b2 ** self.t
        for name, p in params.items():
            g = grads[name]
            if g.shape != p.shape:
                raise ValueError(f"{name}: gradient {g.shape} vs parameter {p.shape}")
            m = self.m.get(name)
            if m is None:
                m = self.m[name] = np.zeros_like(p)
                self.v[name] = np.zeros_like(p)
            v = self.v[name]
            m *= b1
            m += (1 - b1) * g
            v *= b2
            v += (1 - b2) * g * g
            p -= lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


@dataclass
class Prepared:
    """Everything derived from the inputs before training."""

    graph: object
    z: np.ndarray
    lda_w: np.ndarray
    lda_offset: float
    train_mask: np.ndarray
    val_mask: np.ndarray

    @property
    def test_mask(self):
        return ~(self.train_mask | self.val_mask)


def build_graph_from_axis(x1, x2, lda_w, lda_offset, s):
    proj = np.concatenate([x1, x2], axis=-1) @ lda_w + lda_offset
    return slic(proj, s)


def prepare(x1, x2, gt, config):
    train_mask, val_mask = sample_labels(
        gt, config.sample_rate, config.seed, config.split, config.class_balance
    )
    _, axis = lda_project(np.concatenate([x1, x2], axis=-1), gt, train_mask)
    graph = build_graph_from_axis(x1, x2, axis.w, axis.offset, config.s)
    return Prepared(graph, sam_map(x1, x2), axis.w, axis.offset, train_mask, val_mask)


def predict(net, x1, x2, graph, z=None):
    """Eval-mode change probabilities (H, W, 2) and the 0/1 map."""
    out = net.forward(x1, x2, graph, z, training=False)
    prob = out["M"].data
    return prob, (prob[..., 1] > prob[..., 0]).astype(np.uint8)


@dataclass
class TrainResult:
    params: ModelParams
    history: list
    prepared: Prepared
    best_epoch: int
    config: TrainConfig
    test_metrics: dict = field(default_factory=dict)


HISTORY_FIELDS = ("epoch", "lr", "loss", "val_OA", "val_kappa", "val_F1", "val_Pr", "val_Re")


def train(x1, x2, gt, config, backend=None, prepared=None, progress=None):
    """Transductive full-image training; returns the best-validation-F1 checkpoint.

    Ties in validation F1 are broken by lower validation loss. ``progress``
    is called with each history row.
    """
    config.validate()
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    gt = np.asarray(gt).astype(np.int64)
    prep = prepared or prepare(x1, x2, gt, config)
    sel_mask = prep.val_mask if prep.val_mask.any() else prep.train_mask
    h, w, c = x1.shape
    rng = np.random.default_rng([config.seed, 1])
    params = ModelParams.init(config.model_config(h, w, c), rng)
    net = Network(params, backend=backend)
    opt = Adam(config.beta1, config.beta2, config.eps)
    arrays = params.arrays()
    history = []
    best = None
    for epoch in range(config.max_epochs):
        lr = config.lr_at(epoch)
        try:
            out = net.forward(x1, x2, prep.graph, prep.z, training=True)
            terms = loss(out["M"], out["M_QNN"], out["M_FCL"], gt, prep.train_mask, config.use_qec)
            params.zero_grad()
            terms.total.backward()
        except NonFiniteError as exc:
            raise TrainingDiverged(f"epoch {epoch}: {exc}") from exc
        total = float(terms.total.data)
        if not np.isfinite(total):
            raise TrainingDiverged(f"epoch {epoch}: loss is {total}")
        opt.step(arrays, params.grads(), lr)
        try:
            ev = net.forward(x1, x2, prep.graph, prep.z, training=False)
            val_terms = loss(ev["M"], ev["M_QNN"], ev["M_FCL"], gt, sel_mask, config.use_qec)
        except NonFiniteError as exc:
            raise TrainingDiverged(f"epoch {epoch} (eval): {exc}") from exc
        prob = ev["M"].data
        pred = prob[..., 1] > prob[..., 0]
        m = metrics(ConfusionCounts.from_maps(pred, gt, sel_mask))
        row = {"epoch": epoch, "lr": lr, "loss": total}
        row.update({f"val_{k}": m[k] for k in ("OA", "kappa", "F1", "Pr", "Re")})
        history.append(row)
        if progress is not None:
            progress(row)
        key = (m["F1"], -float(val_terms.total.data))
        if best is None or key > best[0]:
            best = (key, epoch, params.copy())
    _, best_epoch, best_params = best
    result = TrainResult(best_params, history, prep, best_epoch, config)
    result.test_metrics = evaluate(best_params, x1, x2, gt, prep, backend)
    return result


def evaluate(params, x1, x2, gt, prep, backend=None):
    """Metrics on the test pixels (everything outside the train/val masks)."""
    net = Network(params, backend=backend)
    _, pred = predict(net, x1, x2, prep.graph, prep.z)
    return metrics(ConfusionCounts.from_maps(pred, gt, prep.test_mask))


def monte_carlo(x1, x2, gt, config, seeds, backend=None):
    """Train once per seed; return per-run test metrics with mean and std."""
    runs = []
    for seed in seeds:
        cfg = TrainConfig.from_dict({**config.to_dict(), "seed": int(seed)})
        res = train(x1, x2, gt, cfg, backend=backend)
        runs.append(res.test_metrics)
        logger.info("seed %d: OA %.4f kappa %.4f F1 %.4f", seed, res.test_metrics["OA"],
                    res.test_metrics["kappa"], res.test_metrics["F1"])
    summary = {}
    for k in ("OA", "kappa", "F1", "Pr", "Re"):
        vals = np.array([r[k] for r in runs])
        summary[k] = (float(vals.mean()), float(vals.std()))
    return runs, summary
