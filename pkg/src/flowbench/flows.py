"""Flow models: bijector chains over a standard-normal base, maximum
likelihood training with plateau schedule and nan-retry, sampling, density
evaluation, and model files.

Architectures:

* ``realnvp`` -- affine coupling layers, halves alternately swapped / randomly
  permuted between layers.
* ``maf``     -- masked affine autoregressive layers, random permutation
  between layers.
* ``crqs``    -- spline coupling layers, permutation scheme as realnvp.
* ``arqs``    -- spline autoregressive layers, permutation scheme as maf.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import autodiff as ad
from .autodiff import Node
from .bijectors import (AffineCoupling, AutoregressiveRQS, CouplingRQS,
                        MaskedAffine, Permutation, swap_halves_perm)
from .optim import Adam
from .rng import stream
from .targets import LOG_2PI, SampleBatch

Array = np.ndarray

ARCHITECTURES = ("realnvp", "maf", "crqs", "arqs")
MODEL_FORMAT_VERSION = 1


@dataclass
class Hyperparams:
    n_bijectors: int
    hidden: list[int]
    knots: int | None = None     # spline architectures only
    bound: float | None = None

    def label(self) -> str:
        h = "x".join(str(w) for w in self.hidden)
        s = f"b{self.n_bijectors}-h{h}"
        if self.knots is not None:
            s += f"-k{self.knots}"
        return s

    def to_dict(self) -> dict:
        return {"n_bijectors": self.n_bijectors, "hidden": list(self.hidden),
                "knots": self.knots, "bound": self.bound}

    @classmethod
    def from_dict(cls, d: dict) -> "Hyperparams":
        return cls(n_bijectors=d["n_bijectors"], hidden=list(d["hidden"]),
                   knots=d.get("knots"), bound=d.get("bound"))


class FlowModel:
    """Ordered bijector chain over a standard normal base.

    ``layers`` are stored in generative order: sampling applies them first to
    last, density evaluation inverts them last to first.
    """

    def __init__(self, dim: int, arch: str, hyper: Hyperparams, layers: list,
                 init_seed: int):
        self.dim = dim
        self.arch = arch
        self.hyper = hyper
        self.layers = layers
        self.init_seed = init_seed

    def parameters(self) -> list[Node]:
        params: list[Node] = []
        for layer in self.layers:
            params.extend(layer.parameters())
        return params

    def reinitialize(self, rng: np.random.Generator) -> None:
        for layer in self.layers:
            layer.reinitialize(rng)

    def get_weights(self) -> list[Array]:
        return [p.value.copy() for p in self.parameters()]

    def set_weights(self, weights: list[Array]) -> None:
        params = self.parameters()
        if len(params) != len(weights):
            raise ValueError("weight count mismatch")
        for p, w in zip(params, weights):
            if p.value.shape != np.asarray(w).shape:
                raise ValueError("weight shape mismatch")
            p.value = np.asarray(w, dtype=np.float64).copy()

    # -- density / sampling ---------------------------------------------------

    def normalize(self, y: Array):
        """Map data to base, accumulating the normalizing log-Jacobian."""
        z = np.asarray(y, dtype=np.float64)
        logdet = np.zeros(z.shape[0])
        for layer in reversed(self.layers):
            z, ld = layer.inverse_np(z)
            logdet += ld
        return z, logdet

    def log_prob(self, y: Array) -> Array:
        z, logdet = self.normalize(y)
        base = -0.5 * self.dim * LOG_2PI - 0.5 * (z * z).sum(axis=1)
        return base + logdet

    def sample(self, n_points: int, seed: int) -> SampleBatch:
        rng = stream(seed, "flow-sample")
        x = rng.standard_normal(size=(n_points, self.dim))
        for layer in self.layers:
            x, _ = layer.forward_np(x)
        return SampleBatch(data=x, source="flow", seed=seed)

    # -- training graph -------------------------------------------------------

    def nll_node(self, y: Array) -> Node:
        z: Node = ad.constant(np.asarray(y, dtype=np.float64))
        logdets = []
        for layer in reversed(self.layers):
            z, ld = layer.inverse_ad(z)
            logdets.append(ld)
        base = -0.5 * ad.nsum(ad.square(z), axis=1) - 0.5 * self.dim * LOG_2PI
        total = base
        for ld in logdets:
            total = total + ld
        return -ad.nmean(total)


def nll(model: FlowModel, y: Array) -> float:
    """Mean negative log-likelihood; by definition -mean(log_prob)."""
    return float(-np.mean(model.log_prob(y)))


def build_flow(arch: str, dim: int, hyper: Hyperparams, seed: int) -> FlowModel:
    """Construct a freshly initialized flow, deterministically in the seed."""
    if arch not in ARCHITECTURES:
        raise ValueError(f"unknown architecture {arch!r}; choose from {ARCHITECTURES}")
    coupling = arch in ("realnvp", "crqs")
    layers: list = []
    for i in range(hyper.n_bijectors):
        rng = stream(seed, "model-init", i)
        if arch == "realnvp":
            layers.append(AffineCoupling(dim, hyper.hidden, rng))
        elif arch == "maf":
            layers.append(MaskedAffine(dim, hyper.hidden, rng))
        elif arch == "crqs":
            layers.append(CouplingRQS(dim, hyper.hidden, hyper.knots, hyper.bound, rng))
        else:
            layers.append(AutoregressiveRQS(dim, hyper.hidden, hyper.knots, hyper.bound, rng))
        if i < hyper.n_bijectors - 1:
            perm_rng = stream(seed, "model-init", 1000 + i)
            if coupling and i % 2 == 0:
                perm = swap_halves_perm(dim)
            else:
                perm = perm_rng.permutation(dim)
                if not coupling and i == 0:
                    # autoregressive layers pass position 1 through
                    # unchanged; make the first permutation move a different
                    # dimension there, so no dimension can sit in the
                    # pass-through slot of every layer and stay frozen at
                    # the base distribution
                    while perm[0] == 0:
                        perm = perm_rng.permutation(dim)
            layers.append(Permutation(perm))
    return FlowModel(dim, arch, hyper, layers, seed)


# ---------------------------------------------------------------------------
# training


@dataclass
class TrainConfig:
    max_epochs: int = 1000
    init_lr: float = 1e-3
    plateau_factor: float = 0.5
    plateau_patience: int = 50
    early_stop_patience: int = 100
    min_improvement: float = 1e-4
    batch_size: int = 512
    nan_retry_factor: float = 1.0 / 3.0
    nan_retry_floor: float = 1e-6
    seed: int = 0

    def __post_init__(self):
        if self.plateau_patience < 1 or self.early_stop_patience < 1:
            raise ValueError("patience values must be >= 1")
        for name in ("max_epochs", "init_lr", "min_improvement", "batch_size",
                     "nan_retry_factor", "nan_retry_floor"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")

    @classmethod
    def for_arch(cls, arch: str, **kwargs) -> "TrainConfig":
        # realnvp trains with smaller batches than the other architectures
        kwargs.setdefault("batch_size", 256 if arch == "realnvp" else 512)
        return cls(**kwargs)


@dataclass
class TrainReport:
    success: bool
    epochs_run: int
    best_val_loss: float
    train_curve: list[float] = field(default_factory=list)
    val_curve: list[float] = field(default_factory=list)
    seconds: float = 0.0
    retries: int = 0
    final_lr: float = 0.0
    failure_reason: str | None = None

    def to_dict(self) -> dict:
        return {
            "success": self.success,
            "epochs_run": self.epochs_run,
            "best_val_loss": self.best_val_loss,
            "train_curve": self.train_curve,
            "val_curve": self.val_curve,
            "seconds": self.seconds,
            "retries": self.retries,
            "final_lr": self.final_lr,
            "failure_reason": self.failure_reason,
        }


class _NonFiniteLoss(Exception):
    pass


def _run_schedule(model: FlowModel, train_data: Array, val_data: Array,
                  config: TrainConfig, init_lr: float, attempt: int):
    """One training attempt; raises _NonFiniteLoss on a nan/inf loss."""
    params = model.parameters()
    opt = Adam(params, lr=init_lr)
    rng = stream(config.seed, "train", attempt)
    n = train_data.shape[0]
    best_val = np.inf
    best_weights = model.get_weights()
    plateau_count = 0
    stop_count = 0
    train_curve: list[float] = []
    val_curve: list[float] = []

    for epoch in range(config.max_epochs):
        order = rng.permutation(n)
        epoch_losses = []
        for start in range(0, n, config.batch_size):
            batch = train_data[order[start:start + config.batch_size]]
            ad.zero_grad(params)
            loss = model.nll_node(batch)
            if not np.isfinite(loss.value):
                raise _NonFiniteLoss("training loss")
            ad.backward(loss)
            try:
                opt.step()
            except FloatingPointError as exc:
                raise _NonFiniteLoss(str(exc)) from exc
            epoch_losses.append(float(loss.value))
        val_loss = nll(model, val_data)
        if not np.isfinite(val_loss):
            raise _NonFiniteLoss("validation loss")
        train_curve.append(float(np.mean(epoch_losses)))
        val_curve.append(val_loss)

        if best_val - val_loss > config.min_improvement:
            best_val = val_loss
            best_weights = model.get_weights()
            plateau_count = 0
            stop_count = 0
        else:
            plateau_count += 1
            stop_count += 1
            if plateau_count >= config.plateau_patience:
                opt.lr *= config.plateau_factor
                plateau_count = 0
            if stop_count >= config.early_stop_patience:
                break

    model.set_weights(best_weights)
    return best_val, train_curve, val_curve, opt.lr


def train(model: FlowModel, train_data: Array, val_data: Array,
          config: TrainConfig) -> TrainReport:
    """Maximum-likelihood training with plateau schedule and nan-retry.

    On a non-finite loss the model is reinitialized and the run restarts with
    the learning rate scaled down, until the rate drops below the floor (then
    a failure report is returned). The weights of the best validation epoch
    are restored before returning.
    """
    if train_data.shape[1] != model.dim or val_data.shape[1] != model.dim:
        raise ValueError("data width must equal model dimension")
    t0 = time.perf_counter()
    init_lr = config.init_lr
    retries = 0
    while True:
        try:
            best_val, tc, vc, final_lr = _run_schedule(
                model, train_data, val_data, config, init_lr, retries)
            return TrainReport(
                success=True, epochs_run=len(tc), best_val_loss=best_val,
                train_curve=tc, val_curve=vc,
                seconds=time.perf_counter() - t0, retries=retries,
                final_lr=final_lr)
        except _NonFiniteLoss as exc:
            retries += 1
            init_lr *= config.nan_retry_factor
            if init_lr < config.nan_retry_floor:
                return TrainReport(
                    success=False, epochs_run=0, best_val_loss=np.inf,
                    seconds=time.perf_counter() - t0, retries=retries,
                    final_lr=init_lr,
                    failure_reason=f"non-finite loss ({exc}); learning rate below floor")
            model.reinitialize(stream(config.seed, "model-init", 10_000 + retries))


# ---------------------------------------------------------------------------
# persistence


def save_model(model: FlowModel, path) -> None:
    from . import __version__
    perms = [layer.perm.tolist() for layer in model.layers
             if isinstance(layer, Permutation)]
    doc = {
        "format_version": MODEL_FORMAT_VERSION,
        "tool_version": __version__,
        "arch": model.arch,
        "dim": model.dim,
        "hyper": model.hyper.to_dict(),
        "init_seed": model.init_seed,
        "permutations": perms,
        "weights": [w.tolist() for w in model.get_weights()],
    }
    Path(path).write_text(json.dumps(doc) + "\n")


def load_model(path) -> FlowModel:
    doc = json.loads(Path(path).read_text())
    if doc["format_version"] != MODEL_FORMAT_VERSION:
        raise ValueError(f"unsupported model format version {doc['format_version']}")
    model = build_flow(doc["arch"], doc["dim"], Hyperparams.from_dict(doc["hyper"]),
                       doc["init_seed"])
    perms = [layer.perm.tolist() for layer in model.layers
             if isinstance(layer, Permutation)]
    if perms != doc["permutations"]:
        raise ValueError("stored permutations do not match rebuilt architecture")
    model.set_weights([np.array(w) for w in doc["weights"]])
    return model
