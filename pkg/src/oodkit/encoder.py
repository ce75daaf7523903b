"""A small feed-forward encoder with a softmax head, trained by hand-rolled Adam.

The forward pass records everything the analytic backward pass needs.  The
penultimate representation (``rep``) is the final tanh activation; its
L2-normalized form (``unit_rep``) feeds the similarity-based contrastive
loss, and the gradient arriving on ``unit_rep`` is mapped back onto ``rep``
through the normalization Jacobian (I - zz^T)/||h||.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DegenerateRepresentation, DimensionMismatch, InvalidShape, ShapeMismatch, StepsExhausted
from .rng import SplitMix64, derive_seed

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8
MIN_REP_NORM = 1e-30


@dataclass
class EncoderParams:
    """Hidden-stack weights/biases plus the softmax head."""

    layers: list[tuple[np.ndarray, np.ndarray]]
    softmax_weights: np.ndarray
    softmax_bias: np.ndarray

    @property
    def input_dim(self) -> int:
        return self.layers[0][0].shape[1]

    @property
    def rep_dim(self) -> int:
        return self.layers[-1][0].shape[0]

    @property
    def num_classes(self) -> int:
        return self.softmax_weights.shape[0]


@dataclass
class ForwardRecord:
    inputs: np.ndarray
    activations: list[np.ndarray]
    rep: np.ndarray
    unit_rep: np.ndarray
    rep_norm: float
    logits: np.ndarray
    probs: np.ndarray


@dataclass
class ParamGrads:
    layers: list[tuple[np.ndarray, np.ndarray]]
    softmax_weights: np.ndarray
    softmax_bias: np.ndarray


@dataclass
class AdamState:
    first_moment: ParamGrads
    second_moment: ParamGrads
    step: int
    lr: float
    total_steps: int


def init_params(input_dim: int, hidden_dims: Sequence[int], rep_dim: int, num_classes: int, seed: int) -> EncoderParams:
    """Uniform Xavier initialization, biases zero, deterministic per seed."""
    dims = [input_dim, *hidden_dims, rep_dim]
    if any(d < 1 for d in dims) or num_classes < 1:
        raise InvalidShape(f"all dimensions must be >= 1, got {dims} with {num_classes} classes")
    rng = SplitMix64(derive_seed(seed, "encoder-init"))

    def xavier(fan_out: int, fan_in: int) -> np.ndarray:
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        return np.array([[rng.uniform_in(-bound, bound) for _ in range(fan_in)] for _ in range(fan_out)])

    layers = [(xavier(out_d, in_d), np.zeros(out_d)) for in_d, out_d in zip(dims[:-1], dims[1:])]
    return EncoderParams(
        layers=layers,
        softmax_weights=xavier(num_classes, rep_dim),
        softmax_bias=np.zeros(num_classes),
    )


def softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - np.max(logits)
    exp = np.exp(shifted)
    return exp / np.sum(exp)


def forward(params: EncoderParams, x: np.ndarray) -> ForwardRecord:
    """Run one input through the stack; pure function of (params, x)."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (params.input_dim,):
        raise DimensionMismatch(f"input has shape {x.shape}, encoder expects ({params.input_dim},)")
    activations: list[np.ndarray] = []
    current = x
    for weights, bias in params.layers:
        current = np.tanh(weights @ current + bias)
        activations.append(current)
    rep = activations[-1]
    rep_norm = float(np.linalg.norm(rep))
    if rep_norm <= MIN_REP_NORM:
        raise DegenerateRepresentation(f"representation norm {rep_norm:.3e} is too small to normalize")
    logits = params.softmax_weights @ rep + params.softmax_bias
    return ForwardRecord(
        inputs=x,
        activations=activations,
        rep=rep,
        unit_rep=rep / rep_norm,
        rep_norm=rep_norm,
        logits=logits,
        probs=softmax(logits),
    )


def forward_batch(params: EncoderParams, xs: Sequence[np.ndarray]) -> list[ForwardRecord]:
    return [forward(params, x) for x in xs]


def zero_grads(params: EncoderParams) -> ParamGrads:
    return ParamGrads(
        layers=[(np.zeros_like(w), np.zeros_like(b)) for w, b in params.layers],
        softmax_weights=np.zeros_like(params.softmax_weights),
        softmax_bias=np.zeros_like(params.softmax_bias),
    )


def backward(
    params: EncoderParams,
    records: Sequence[ForwardRecord],
    grad_logits: Sequence[np.ndarray] | None = None,
    grad_rep: Sequence[np.ndarray] | None = None,
    grad_unit_rep: Sequence[np.ndarray] | None = None,
) -> ParamGrads:
    """Accumulate exact parameter gradients from per-example upstream gradients.

    Each of the three upstream streams is optional; lengths must match
    ``records`` when present.  Summation runs in example order so results are
    bit-reproducible.
    """
    for name, stream in (("grad_logits", grad_logits), ("grad_rep", grad_rep), ("grad_unit_rep", grad_unit_rep)):
        if stream is not None and len(stream) != len(records):
            raise ShapeMismatch(f"{name} has {len(stream)} entries for {len(records)} records")
    grads = zero_grads(params)
    num_classes = params.num_classes
    rep_dim = params.rep_dim
    for i, record in enumerate(records):
        g_rep = np.zeros(rep_dim)
        if grad_logits is not None:
            gl = np.asarray(grad_logits[i], dtype=np.float64)
            if gl.shape != (num_classes,):
                raise ShapeMismatch(f"grad_logits[{i}] has shape {gl.shape}, expected ({num_classes},)")
            grads.softmax_weights += np.outer(gl, record.rep)
            grads.softmax_bias += gl
            g_rep += params.softmax_weights.T @ gl
        if grad_rep is not None:
            gh = np.asarray(grad_rep[i], dtype=np.float64)
            if gh.shape != (rep_dim,):
                raise ShapeMismatch(f"grad_rep[{i}] has shape {gh.shape}, expected ({rep_dim},)")
            g_rep += gh
        if grad_unit_rep is not None:
            gz = np.asarray(grad_unit_rep[i], dtype=np.float64)
            if gz.shape != (rep_dim,):
                raise ShapeMismatch(f"grad_unit_rep[{i}] has shape {gz.shape}, expected ({rep_dim},)")
            unit = record.unit_rep
            g_rep += (gz - unit * float(unit @ gz)) / record.rep_norm

        upstream = g_rep
        for k in range(len(params.layers) - 1, -1, -1):
            weights, _ = params.layers[k]
            activation = record.activations[k]
            g_pre = upstream * (1.0 - activation * activation)
            prev = record.activations[k - 1] if k > 0 else record.inputs
            layer_w, layer_b = grads.layers[k]
            layer_w += np.outer(g_pre, prev)
            layer_b += g_pre
            upstream = weights.T @ g_pre
    return grads


def init_adam(params: EncoderParams, lr: float, total_steps: int) -> AdamState:
    if total_steps < 1:
        raise InvalidShape(f"total_steps must be >= 1, got {total_steps}")
    return AdamState(
        first_moment=zero_grads(params),
        second_moment=zero_grads(params),
        step=0,
        lr=lr,
        total_steps=total_steps,
    )


def adam_step(state: AdamState, params: EncoderParams, grads: ParamGrads) -> tuple[EncoderParams, AdamState]:
    """One Adam update with learning rate lr * (1 - step/total), functional style."""
    if state.step >= state.total_steps:
        raise StepsExhausted(f"all {state.total_steps} optimizer steps already taken")
    rate = state.lr * (1.0 - state.step / state.total_steps)
    t = state.step + 1
    bias1 = 1.0 - ADAM_BETA1**t
    bias2 = 1.0 - ADAM_BETA2**t

    def update(theta: np.ndarray, g: np.ndarray, m: np.ndarray, v: np.ndarray):
        m_new = ADAM_BETA1 * m + (1.0 - ADAM_BETA1) * g
        v_new = ADAM_BETA2 * v + (1.0 - ADAM_BETA2) * g * g
        theta_new = theta - rate * (m_new / bias1) / (np.sqrt(v_new / bias2) + ADAM_EPS)
        return theta_new, m_new, v_new

    new_layers, m_layers, v_layers = [], [], []
    for (w, b), (gw, gb), (mw, mb), (vw, vb) in zip(params.layers, grads.layers, state.first_moment.layers, state.second_moment.layers):
        w2, mw2, vw2 = update(w, gw, mw, vw)
        b2, mb2, vb2 = update(b, gb, mb, vb)
        new_layers.append((w2, b2))
        m_layers.append((mw2, mb2))
        v_layers.append((vw2, vb2))
    sw, msw, vsw = update(params.softmax_weights, grads.softmax_weights, state.first_moment.softmax_weights, state.second_moment.softmax_weights)
    sb, msb, vsb = update(params.softmax_bias, grads.softmax_bias, state.first_moment.softmax_bias, state.second_moment.softmax_bias)

    new_params = EncoderParams(layers=new_layers, softmax_weights=sw, softmax_bias=sb)
    new_state = AdamState(
        first_moment=ParamGrads(layers=m_layers, softmax_weights=msw, softmax_bias=msb),
        second_moment=ParamGrads(layers=v_layers, softmax_weights=vsw, softmax_bias=vsb),
        step=state.step + 1,
        lr=state.lr,
        total_steps=state.total_steps,
    )
    return new_params, new_state


def copy_params(params: EncoderParams) -> EncoderParams:
    return EncoderParams(
        layers=[(w.copy(), b.copy()) for w, b in params.layers],
        softmax_weights=params.softmax_weights.copy(),
        softmax_bias=params.softmax_bias.copy(),
    )


def params_to_payload(params: EncoderParams) -> dict:
    """JSON-ready parameter tensors with shape metadata."""
    return {
        "layers": [{"weights": w.tolist(), "bias": b.tolist()} for w, b in params.layers],
        "softmax_weights": params.softmax_weights.tolist(),
        "softmax_bias": params.softmax_bias.tolist(),
        "shapes": {
            "input_dim": params.input_dim,
            "hidden_dims": [w.shape[0] for w, _ in params.layers[:-1]],
            "rep_dim": params.rep_dim,
            "num_classes": params.num_classes,
        },
    }


def params_from_payload(payload: dict) -> EncoderParams:
    layers = [(np.asarray(entry["weights"], dtype=np.float64), np.asarray(entry["bias"], dtype=np.float64)) for entry in payload["layers"]]
    params = EncoderParams(
        layers=layers,
        softmax_weights=np.asarray(payload["softmax_weights"], dtype=np.float64),
        softmax_bias=np.asarray(payload["softmax_bias"], dtype=np.float64),
    )
    shapes = payload.get("shapes", {})
    if shapes:
        declared = (shapes.get("input_dim"), shapes.get("rep_dim"), shapes.get("num_classes"))
        actual = (params.input_dim, params.rep_dim, params.num_classes)
        if declared != actual:
            raise ShapeMismatch(f"checkpoint shape metadata {declared} does not match tensors {actual}")
    return params
