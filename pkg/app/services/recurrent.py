import json
import logging
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from app.exceptions import DataError, NumericalError
from app.models.classifier import NetworkConfig
from app.models.recurrent import RECURRENT_VERSION, Direction, LstmParams, LstmState, SequenceClassifier

logger = logging.getLogger(__name__)

Gradients = Dict[str, np.ndarray]


def sigmoid(x: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def _step(params: LstmParams, x: np.ndarray, h_prev: np.ndarray, c_prev: np.ndarray, peephole: bool):
    if x.shape != (params.input_size,) or h_prev.shape != (params.hidden_size,) or c_prev.shape != h_prev.shape:
        raise DataError(
            f"LSTM step expects x[{params.input_size}] and state[{params.hidden_size}], "
            f"got x{x.shape} h{h_prev.shape} c{c_prev.shape}"
        )
    h = params.hidden_size
    z = params.W @ x + params.U @ h_prev + params.b
    f = sigmoid(z[:h])
    i = sigmoid(z[h:2 * h])
    g = np.tanh(z[2 * h:3 * h])
    c = i * g + f * c_prev
    z_o = z[3 * h:]
    if peephole:
        z_o = z_o + params.V_o @ c
    o = sigmoid(z_o)
    tanh_c = np.tanh(c)
    h_new = o * tanh_c
    cache = {"x": x, "h_prev": h_prev, "c_prev": c_prev, "f": f, "i": i, "g": g, "o": o, "c": c, "tanh_c": tanh_c}
    return h_new, c, cache


def lstm_step(params: LstmParams, x_t: np.ndarray, prev: LstmState, peephole: bool = True) -> LstmState:
    """One LSTM time step with the output-gate peephole on the new cell state."""
    h, c, _ = _step(params, np.asarray(x_t, dtype=np.float64), prev.h, prev.c, peephole)
    return LstmState(h=h, c=c)


def _run_layer(params: LstmParams, xs: np.ndarray, peephole: bool) -> Tuple[np.ndarray, List[dict]]:
    h = np.zeros(params.hidden_size)
    c = np.zeros(params.hidden_size)
    hs = np.empty((len(xs), params.hidden_size))
    caches = []
    for t, x in enumerate(xs):
        h, c, cache = _step(params, x, h, c, peephole)
        hs[t] = h
        caches.append(cache)
    return hs, caches


def _backprop_layer(
    params: LstmParams, caches: List[dict], dhs: np.ndarray, peephole: bool
) -> Tuple[Gradients, np.ndarray]:
    """BPTT through one layer given dLoss/dh_t for every t; returns grads and dLoss/dx_t."""
    hidden = params.hidden_size
    grads = {name: np.zeros_like(array) for name, array in params.arrays().items()}
    dxs = np.zeros((len(caches), params.input_size))
    dh_next = np.zeros(hidden)
    dc_next = np.zeros(hidden)
    for t in reversed(range(len(caches))):
        k = caches[t]
        dh = dhs[t] + dh_next
        dz_o = dh * k["tanh_c"] * k["o"] * (1.0 - k["o"])
        dc = dc_next + dh * k["o"] * (1.0 - k["tanh_c"] ** 2)
        if peephole:
            dc = dc + params.V_o.T @ dz_o
            grads["V_o"] += np.outer(dz_o, k["c"])
        dz_f = dc * k["c_prev"] * k["f"] * (1.0 - k["f"])
        dz_i = dc * k["g"] * k["i"] * (1.0 - k["i"])
        dz_g = dc * k["i"] * (1.0 - k["g"] ** 2)
        dz = np.concatenate([dz_f, dz_i, dz_g, dz_o])
        grads["W"] += np.outer(dz, k["x"])
        grads["U"] += np.outer(dz, k["h_prev"])
        grads["b"] += dz
        dxs[t] = params.W.T @ dz
        dh_next = params.U.T @ dz
        dc_next = dc * k["f"]
    return grads, dxs


def _softmax(scores: np.ndarray) -> np.ndarray:
    exp = np.exp(scores - scores.max())
    return exp / exp.sum()


def forward_sequence(
    classifier: SequenceClassifier,
    sequence: np.ndarray,
    dropout: bool = False,
    seed: Optional[int] = None,
    rng: Optional[np.random.Generator] = None,
) -> Tuple[np.ndarray, dict]:
    """Class probabilities for an embedded sequence (T x D) plus the activations for BPTT."""
    xs = np.asarray(sequence, dtype=np.float64)
    if xs.ndim != 2 or len(xs) == 0:
        raise DataError("forward_sequence needs a non-empty T x D sequence")
    if xs.shape[1] != classifier.input_size:
        raise DataError(f"sequence dimension {xs.shape[1]} does not match network input {classifier.input_size}")

    config = classifier.config
    rate = config.dropout if dropout else 0.0
    if rate > 0 and rng is None:
        rng = np.random.default_rng(seed)

    cache = {"xs": xs, "stacks": {}, "dropout": rate}
    finals = []
    for stack_name, layers in classifier.stacks.items():
        inputs = xs if stack_name == "forward" else xs[::-1]
        layer_caches = []
        for params in layers:
            hs, steps = _run_layer(params, inputs, config.peephole)
            mask = None
            if rate > 0:
                mask = (rng.random(hs.shape) >= rate) / (1.0 - rate)
                hs = hs * mask
            layer_caches.append({"steps": steps, "mask": mask})
            inputs = hs
        cache["stacks"][stack_name] = layer_caches
        # the backward stack's last step sits at original position 1
        finals.append(inputs[-1])

    representation = np.concatenate(finals)
    logits = classifier.head_W @ representation + classifier.head_b
    probs = _softmax(logits)
    cache["representation"] = representation
    cache["probs"] = probs
    return probs, cache


def clip_gradients(grads: Gradients, max_norm: float) -> float:
    """Scale grads in place to global norm <= max_norm; returns the pre-clip norm."""
    norm = float(np.sqrt(sum(float((g**2).sum()) for g in grads.values())))
    if np.isfinite(max_norm) and norm > max_norm:
        scale = max_norm / norm
        for g in grads.values():
            g *= scale
    return norm


def backward_sequence(
    classifier: SequenceClassifier,
    cache: dict,
    gold: int,
    clip_norm: Optional[float] = None,
    clip_inputs: bool = False,
) -> Tuple[Gradients, float]:
    """Cross-entropy gradients for every parameter (plus 'inputs', dLoss/dx) and the loss.

    clip_norm defaults to the network config; pass float('inf') to disable clipping.
    With clip_inputs the input gradient joins the global norm, as when embeddings are tuned.
    """
    probs = cache["probs"]
    loss = float(-np.log(max(probs[gold], np.finfo(np.float64).tiny)))
    dlogits = probs.copy()
    dlogits[gold] -= 1.0

    grads: Gradients = {
        "head.W": np.outer(dlogits, cache["representation"]),
        "head.b": dlogits.copy(),
    }
    d_repr = classifier.head_W.T @ dlogits
    d_inputs = np.zeros_like(cache["xs"])

    for s, (stack_name, layers) in enumerate(classifier.stacks.items()):
        hidden = layers[-1].hidden_size
        layer_caches = cache["stacks"][stack_name]
        n_steps = len(cache["xs"])
        dhs = np.zeros((n_steps, hidden))
        dhs[-1] = d_repr[s * hidden:(s + 1) * hidden]
        for i in reversed(range(len(layers))):
            layer_cache = layer_caches[i]
            if layer_cache["mask"] is not None:
                dhs = dhs * layer_cache["mask"]
            layer_grads, dhs = _backprop_layer(layers[i], layer_cache["steps"], dhs, classifier.config.peephole)
            for name, g in layer_grads.items():
                grads[f"{stack_name}.{i}.{name}"] = g
        d_inputs += dhs if stack_name == "forward" else dhs[::-1]

    grads["inputs"] = d_inputs
    clipped = grads if clip_inputs else {k: g for k, g in grads.items() if k != "inputs"}
    clip_gradients(clipped, classifier.config.clip_norm if clip_norm is None else clip_norm)
    return grads, loss


def init_classifier(
    config: NetworkConfig,
    direction: Direction,
    n_classes: int,
    input_size: Optional[int] = None,
    rng: Optional[np.random.Generator] = None,
) -> SequenceClassifier:
    """Uniform [-init_scale, init_scale] initialization of every parameter."""
    rng = rng or np.random.default_rng(config.seed)
    input_size = input_size or config.embedding_dim

    def stack() -> List[LstmParams]:
        layers, size = [], input_size
        for _ in range(config.layers):
            layers.append(LstmParams.uniform(size, config.hidden, config.init_scale, rng))
            size = config.hidden
        return layers

    forward = stack()
    backward = stack() if direction is Direction.BIDIRECTIONAL else []
    width = config.hidden * (2 if direction is Direction.BIDIRECTIONAL else 1)
    return SequenceClassifier(
        direction=direction,
        config=config,
        n_classes=n_classes,
        forward_layers=forward,
        backward_layers=backward,
        head_W=rng.uniform(-config.init_scale, config.init_scale, size=(n_classes, width)),
        head_b=rng.uniform(-config.init_scale, config.init_scale, size=n_classes),
    )


def embed_ids(ids: np.ndarray, matrix: np.ndarray) -> np.ndarray:
    """Rows of the embedding matrix; id -1 (OOV) maps to a zero vector."""
    ids = np.asarray(ids, dtype=np.int64)
    out = np.zeros((len(ids), matrix.shape[1]))
    known = ids >= 0
    out[known] = matrix[ids[known]]
    return out


def train_network(
    examples: Sequence[Tuple[np.ndarray, int]],
    config: NetworkConfig,
    direction: Direction,
    n_classes: Optional[int] = None,
    embedding_matrix: Optional[np.ndarray] = None,
) -> Tuple[SequenceClassifier, List[float]]:
    """Per-example SGD over seeded shuffles; returns the model and per-epoch mean loss.

    Without embedding_matrix each example is a T x D array; with it, a vector of
    embedding row ids (-1 = OOV).
    """
    kept = [(seq, int(label)) for seq, label in examples if len(seq) > 0]
    if len(kept) < len(examples):
        logger.warning(f"Skipping {len(examples) - len(kept)} empty training sequences")
    if not kept:
        raise DataError("recurrent training needs at least one non-empty example")
    labels = [label for _, label in kept]
    n_classes = n_classes or max(labels) + 1
    missing = sorted(set(range(n_classes)) - set(labels))
    if missing:
        raise DataError(f"classes without training examples: {missing}")

    rng = np.random.default_rng(config.seed)
    input_size = embedding_matrix.shape[1] if embedding_matrix is not None else np.asarray(kept[0][0]).shape[1]
    classifier = init_classifier(config, direction, n_classes, input_size=input_size, rng=rng)
    tune = config.fine_tune_embeddings and embedding_matrix is not None
    if tune:
        classifier.tuned_embeddings = embedding_matrix.copy()
    params = classifier.parameters()

    trace: List[float] = []
    for epoch in range(1, config.epochs + 1):
        total = 0.0
        for step, idx in enumerate(rng.permutation(len(kept))):
            seq, label = kept[idx]
            if embedding_matrix is not None:
                source = classifier.tuned_embeddings if tune else embedding_matrix
                xs = embed_ids(seq, source)
            else:
                xs = np.asarray(seq, dtype=np.float64)
            _, cache = forward_sequence(classifier, xs, dropout=config.dropout > 0, rng=rng)
            grads, loss = backward_sequence(classifier, cache, label, clip_inputs=tune)
            if not np.isfinite(loss) or not all(np.all(np.isfinite(g)) for g in grads.values()):
                raise NumericalError(f"non-finite loss at epoch {epoch}, example {int(idx)} (step {step})")
            for name, array in params.items():
                array -= config.learning_rate * grads[name]
            if tune:
                ids = np.asarray(seq, dtype=np.int64)
                known = ids >= 0
                np.subtract.at(classifier.tuned_embeddings, ids[known], config.learning_rate * grads["inputs"][known])
            total += loss
        trace.append(total / len(kept))
        logger.info(f"{direction.value} LSTM epoch {epoch}/{config.epochs}: mean loss={trace[-1]:.4f}")
    return classifier, trace


def predict_sequence(classifier: SequenceClassifier, sequence: np.ndarray) -> Tuple[int, bool]:
    """Argmax class (ties -> lowest id) with dropout off; empty input -> (0, True)."""
    if len(sequence) == 0:
        logger.debug("Empty sequence; falling back to class 0")
        return 0, True
    probs, _ = forward_sequence(classifier, sequence, dropout=False)
    return int(np.argmax(probs)), False


def save_classifier(classifier: SequenceClassifier, path: str) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(json.dumps(classifier.to_payload()), encoding="utf-8")


def load_classifier(path: str) -> SequenceClassifier:
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    if payload.get("version") != RECURRENT_VERSION:
        raise DataError(f"Unsupported recurrent model version {payload.get('version')} in {path}")
    return SequenceClassifier.from_payload(payload)
