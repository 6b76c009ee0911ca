"""Feed-forward softmax classifier trained with Nesterov accelerated gradient."""

import copy
import json
from dataclasses import dataclass, field, asdict

import numpy as np

CHECKPOINT_FORMAT = "mlp-v1"


@dataclass
class MlpConfig:
    input_dim: int
    hidden_layers: tuple = (50,)
    output_dim: int = 2
    lr: float = 5e-4
    l1: float = 1e-5
    momentum: float = 0.9
    dropout_p: float = 0.5
    epochs: int = 100
    batch_size: int = 64
    seed: int = 0

    def __post_init__(self):
        self.hidden_layers = tuple(self.hidden_layers)
        if self.input_dim < 1 or self.output_dim < 1 or any(h < 1 for h in self.hidden_layers):
            raise ValueError("layer widths must be positive")
        if self.lr <= 0:
            raise ValueError("learning rate must be positive")
        if self.l1 < 0:
            raise ValueError("l1 penalty must be non-negative")
        if not 0.0 <= self.momentum < 1.0:
            raise ValueError("momentum must lie in [0, 1)")
        if not 0.0 <= self.dropout_p < 1.0:
            raise ValueError("dropout_p must lie in [0, 1)")
        if self.batch_size < 1 or self.epochs < 0:
            raise ValueError("epochs/batch_size out of range")


@dataclass
class MlpModel:
    weights: list
    biases: list
    vel_w: list
    vel_b: list
    config: MlpConfig


@dataclass(frozen=True)
class Prediction:
    sentence_id: str
    bank_id: str
    month: tuple
    p_distress: float


def init_model(config):
    """Seeded uniform init scaled by 1/sqrt(fan_in); zero biases and velocities."""
    rng = np.random.default_rng(config.seed)
    dims = (config.input_dim,) + config.hidden_layers + (config.output_dim,)
    weights, biases = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        bound = 1.0 / np.sqrt(fan_in)
        weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return MlpModel(
        weights=weights,
        biases=biases,
        vel_w=[np.zeros_like(w) for w in weights],
        vel_b=[np.zeros_like(b) for b in biases],
        config=config,
    )


def _softmax(logits):
    shifted = logits - logits.max(axis=-1, keepdims=True)
    expd = np.exp(shifted)
    return expd / expd.sum(axis=-1, keepdims=True)


def _forward_cached(weights, biases, config, x, mode, rng):
    """Forward pass keeping activations and dropout masks for backprop."""
    h = x
    activations = [h]
    masks = []
    n_hidden = len(weights) - 1
    for layer in range(n_hidden):
        h = np.maximum(h @ weights[layer] + biases[layer], 0.0)
        if mode == "train" and config.dropout_p > 0.0:
            keep = 1.0 - config.dropout_p
            mask = (rng.random(h.shape) >= config.dropout_p) / keep
            h = h * mask
        else:
            mask = None
        masks.append(mask)
        activations.append(h)
    probs = _softmax(h @ weights[-1] + biases[-1])
    return probs, activations, masks


def forward(model, x, mode="infer", rng=None):
    """Class probabilities for one input or a batch."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    if x.shape[-1] != model.config.input_dim:
        raise ValueError(
            "input has %d features, model expects %d" % (x.shape[-1], model.config.input_dim)
        )
    if mode not in ("train", "infer"):
        raise ValueError("mode must be 'train' or 'infer'")
    if mode == "train" and model.config.dropout_p > 0.0 and rng is None:
        raise ValueError("train-mode forward with dropout needs an rng")
    batch = x[None, :] if single else x
    probs, _, _ = _forward_cached(model.weights, model.biases, model.config, batch, mode, rng)
    return probs[0] if single else probs


def loss(model, x, y, weights=None, biases=None):
    """Mean negative log-likelihood plus the L1 weight penalty (no dropout)."""
    weights = model.weights if weights is None else weights
    biases = model.biases if biases is None else biases
    x = np.atleast_2d(np.asarray(x, dtype=float))
    y = np.asarray(y, dtype=np.int64)
    if x.shape[0] == 0:
        raise ValueError("empty batch")
    probs, _, _ = _forward_cached(weights, biases, model.config, x, "infer", None)
    nll = -np.log(np.clip(probs[np.arange(len(y)), y], 1e-300, None)).mean()
    penalty = model.config.l1 * sum(np.abs(w).sum() for w in weights)
    return nll + penalty


def gradients(model, x, y, rng=None, weights=None, biases=None):
    """Backprop gradients of the regularized loss.

    The L1 subgradient uses sign(w) with sign(0) = 0 and never touches
    biases. Returns (loss value, weight grads, bias grads).
    """
    weights = model.weights if weights is None else weights
    biases = model.biases if biases is None else biases
    cfg = model.config
    x = np.atleast_2d(np.asarray(x, dtype=float))
    y = np.asarray(y, dtype=np.int64)
    n = x.shape[0]
    if n == 0:
        raise ValueError("empty batch")
    mode = "train" if cfg.dropout_p > 0.0 else "infer"
    probs, activations, masks = _forward_cached(weights, biases, cfg, x, mode, rng)

    nll = -np.log(np.clip(probs[np.arange(n), y], 1e-300, None)).mean()
    value = nll + cfg.l1 * sum(np.abs(w).sum() for w in weights)

    delta = probs.copy()
    delta[np.arange(n), y] -= 1.0
    delta /= n

    grads_w = [None] * len(weights)
    grads_b = [None] * len(biases)
    for layer in range(len(weights) - 1, -1, -1):
        grads_w[layer] = activations[layer].T @ delta + cfg.l1 * np.sign(weights[layer])
        grads_b[layer] = delta.sum(axis=0)
        if layer > 0:
            delta = delta @ weights[layer].T
            if masks[layer - 1] is not None:
                delta = delta * masks[layer - 1]
            delta[activations[layer] <= 0.0] = 0.0
    return value, grads_w, grads_b


def nesterov_step(model, x, y, lr, rng=None):
    """One Nesterov update: gradient at the lookahead point, then velocity step."""
    gamma = model.config.momentum
    ahead_w = [w + gamma * v for w, v in zip(model.weights, model.vel_w)]
    ahead_b = [b + gamma * v for b, v in zip(model.biases, model.vel_b)]
    value, grads_w, grads_b = gradients(model, x, y, rng=rng, weights=ahead_w, biases=ahead_b)
    for i in range(len(model.weights)):
        model.vel_w[i] = gamma * model.vel_w[i] - lr * grads_w[i]
        model.vel_b[i] = gamma * model.vel_b[i] - lr * grads_b[i]
        model.weights[i] = model.weights[i] + model.vel_w[i]
        model.biases[i] = model.biases[i] + model.vel_b[i]
    return value


def train(model, x_train, y_train, eval_hook=None):
    """Mini-batch Nesterov training with best-validation snapshotting.

    ``eval_hook(model) -> score`` is called after every epoch; the parameter
    snapshot with the highest score is returned. Without a hook the final
    model is returned. The training curve rows are
    (epoch, mean step loss, validation score or nan).
    """
    x_train = np.asarray(x_train, dtype=float)
    y_train = np.asarray(y_train, dtype=np.int64)
    if len(x_train) == 0:
        raise ValueError("empty training set")
    cfg = model.config
    rng = np.random.default_rng([cfg.seed, 2])
    order = np.arange(len(x_train))
    curve = []
    best_score = None
    best_params = None
    for epoch in range(cfg.epochs):
        rng.shuffle(order)
        losses = []
        for start in range(0, len(order), cfg.batch_size):
            batch = order[start : start + cfg.batch_size]
            losses.append(nesterov_step(model, x_train[batch], y_train[batch], cfg.lr, rng=rng))
        score = float("nan")
        if eval_hook is not None:
            score = eval_hook(model)
            if best_score is None or score > best_score:
                best_score = score
                best_params = (
                    [w.copy() for w in model.weights],
                    [b.copy() for b in model.biases],
                )
        curve.append((epoch, float(np.mean(losses)), score))
    if best_params is not None:
        best = copy.deepcopy(model)
        best.weights, best.biases = best_params
        return best, curve
    return model, curve


def predict(model, samples, inputs):
    """Infer-mode predictions carrying (sentence, bank, month) keys through.

    ``samples`` is a sequence with sentence_id/bank_id/month attributes,
    ``inputs`` the matching matrix of classifier inputs.
    """
    inputs = np.atleast_2d(np.asarray(inputs, dtype=float))
    if len(samples) != inputs.shape[0]:
        raise ValueError("samples and inputs differ in length")
    if inputs.shape[0] == 0:
        return []
    probs = forward(model, inputs, mode="infer")
    return [
        Prediction(
            sentence_id=s.sentence_id,
            bank_id=s.bank_id,
            month=s.month,
            p_distress=float(p[1]),
        )
        for s, p in zip(samples, probs)
    ]


def save_checkpoint(model, path):
    arrays = {"header": np.frombuffer(
        json.dumps(
            {"format": CHECKPOINT_FORMAT, "config": asdict(model.config),
             "n_layers": len(model.weights)},
            sort_keys=True,
        ).encode("utf-8"),
        dtype=np.uint8,
    )}
    for i in range(len(model.weights)):
        arrays["w%d" % i] = model.weights[i]
        arrays["b%d" % i] = model.biases[i]
        arrays["vw%d" % i] = model.vel_w[i]
        arrays["vb%d" % i] = model.vel_b[i]
    np.savez(path, **arrays)


def load_checkpoint(path):
    with np.load(path, allow_pickle=False) as data:
        header = json.loads(bytes(data["header"].tobytes()).decode("utf-8"))
        if header.get("format") != CHECKPOINT_FORMAT:
            raise ValueError("unsupported checkpoint format: %r" % header.get("format"))
        cfg_dict = dict(header["config"])
        cfg_dict["hidden_layers"] = tuple(cfg_dict["hidden_layers"])
        cfg = MlpConfig(**cfg_dict)
        n = header["n_layers"]
        return MlpModel(
            weights=[data["w%d" % i].copy() for i in range(n)],
            biases=[data["b%d" % i].copy() for i in range(n)],
            vel_w=[data["vw%d" % i].copy() for i in range(n)],
            vel_b=[data["vb%d" % i].copy() for i in range(n)],
            config=cfg,
        )


def write_curve(curve, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("epoch,train_loss,val_usefulness\n")
        for epoch, train_loss, val_score in curve:
            fh.write("%d,%r,%r\n" % (epoch, train_loss, val_score))
