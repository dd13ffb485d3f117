"""Q-networks: one or two input branches, a concat point and a dense head."""
from __future__ import annotations

import copy

import numpy as np

from egodqn.nn.layers import Concat, Conv2D, Dense, Flatten, Layer, ReLU
from egodqn.nn.optim import AdamState, adam_step, huber_loss, polyak_update

N_OUTPUTS = 4


class QNetwork:
    """Feed-forward Q-function approximator.

    Each branch maps one input tensor to a flat feature vector; with more
    than one branch the features are concatenated before the head. Inputs
    are ``(C, H, W)`` per sample and are moved to channels-last on entry.
    """

    def __init__(self, input_shapes, branches, head, seed=None, lr=0.0002, dtype=np.float64):
        if len(input_shapes) != len(branches):
            raise ValueError("one branch per input is required")
        self.input_shapes = [tuple(s) for s in input_shapes]
        self.branches: list[list[Layer]] = [list(b) for b in branches]
        self.concat = Concat() if len(branches) > 1 else None
        self.head: list[Layer] = list(head)
        self.adam = AdamState(lr=lr)
        self.dtype = np.dtype(dtype)
        self._forwarded = False
        for layer in self.layers:
            layer.params = {k: v.astype(self.dtype) for k, v in layer.params.items()}
            layer.grads = {k: v.astype(self.dtype) for k, v in layer.grads.items()}

        shapes = []
        for shape, branch in zip(self.input_shapes, self.branches):
            shape = _channels_last(shape)
            for layer in branch:
                shape = layer.output_shape(shape)
            if len(shape) != 1:
                raise ValueError(f"branch must end flat, got {shape}")
            shapes.append(shape)
        shape = self.concat.output_shape_multi(shapes) if self.concat else shapes[0]
        for layer in self.head:
            shape = layer.output_shape(shape)
        if shape != (N_OUTPUTS,):
            raise ValueError(f"network must output {N_OUTPUTS} values, got {shape}")

        if seed is not None:
            self.init_params(np.random.default_rng(seed))

    @property
    def layers(self) -> list[Layer]:
        out = [layer for branch in self.branches for layer in branch]
        if self.concat:
            out.append(self.concat)
        return out + self.head

    def init_params(self, rng: np.random.Generator) -> None:
        for layer in self.layers:
            layer.init_params(rng)

    def named_parameters(self):
        out = []
        for i, layer in enumerate(self.layers):
            for key, p in layer.params.items():
                out.append((f"{i}.{layer.kind}.{key}", p, layer.grads[key]))
        return out

    def parameters(self) -> list[np.ndarray]:
        return [p for _, p, _ in self.named_parameters()]

    def gradients(self) -> list[np.ndarray]:
        return [g for _, _, g in self.named_parameters()]

    @property
    def n_params(self) -> int:
        return sum(layer.n_params for layer in self.layers)

    def layer_param_counts(self) -> list[int]:
        return [layer.n_params for layer in self.layers if layer.params]

    def zero_grad(self) -> None:
        for layer in self.layers:
            layer.zero_grad()

    def forward(self, *inputs) -> np.ndarray:
        """Q-values of shape ``(N, 4)`` for a batch of inputs (one array per branch)."""
        if len(inputs) != len(self.branches):
            raise ValueError(f"expected {len(self.branches)} inputs, got {len(inputs)}")
        feats = []
        for x, shape, branch in zip(inputs, self.input_shapes, self.branches):
            if x.shape[1:] != shape:
                raise ValueError(f"input shape {x.shape[1:]} does not match {shape}")
            if x.ndim == 4:
                x = x.transpose(0, 2, 3, 1)
            x = np.ascontiguousarray(x, dtype=self.dtype)
            for layer in branch:
                x = layer.forward(x)
            feats.append(x)
        h = self.concat.forward_multi(feats) if self.concat else feats[0]
        for layer in self.head:
            h = layer.forward(h)
        self._forwarded = True
        return h

    def q_values(self, *inputs) -> np.ndarray:
        """Q-values for a single unbatched observation."""
        return self.forward(*(x[None] for x in inputs))[0]

    def backward(self, grad_q: np.ndarray, input_grads: bool = False) -> list:
        """Accumulate parameter gradients.

        Returns the input gradient of each branch when ``input_grads`` is
        set, otherwise a list of ``None``.
        """
        if not self._forwarded:
            raise RuntimeError("backward() called before forward()")
        g = grad_q
        for layer in reversed(self.head):
            g = layer.backward(g)
        grads = self.concat.backward_multi(g) if self.concat else [g]
        out = []
        for g, branch in zip(grads, self.branches):
            branch[0].need_input_grad = input_grads
            for layer in reversed(branch):
                g = layer.backward(g)
            if g is not None and g.ndim == 4:
                g = g.transpose(0, 3, 1, 2)
            out.append(g)
        return out

    def adam_step(self) -> None:
        names, params, grads = zip(*self.named_parameters())
        adam_step(params, grads, self.adam, names)

    def backward_and_step(self, actions, losses, dlosses, weights) -> float:
        """Importance-weighted batch-mean loss step on the taken actions.

        ``losses``/``dlosses`` are per-sample loss values and derivatives with
        respect to Q(s, a_taken) from the latest ``forward``.
        """
        if not self._forwarded:
            raise RuntimeError("backward_and_step() called before forward()")
        n = len(actions)
        weights = np.asarray(weights, dtype=float)
        grad_q = np.zeros((n, N_OUTPUTS), dtype=self.dtype)
        grad_q[np.arange(n), actions] = weights * np.asarray(dlosses) / n
        self.zero_grad()
        self.backward(grad_q)
        self.adam_step()
        return float(np.mean(weights * np.asarray(losses)))

    def train_on_batch(self, inputs, actions, targets, weights):
        """Huber regression of Q(s, a) onto ``targets``; returns (loss, td_errors)."""
        q = self.forward(*inputs)
        q_taken = q[np.arange(len(actions)), actions]
        losses, dlosses = huber_loss(q_taken, targets)
        loss = self.backward_and_step(actions, losses, dlosses, weights)
        return loss, targets - q_taken

    def copy(self) -> "QNetwork":
        """Deep copy with fresh optimizer state (used for target networks)."""
        clone = copy.deepcopy(self)
        clone.adam = AdamState(lr=self.adam.lr)
        return clone

    def load_parameters_from(self, other: "QNetwork") -> None:
        for p, q in zip(self.parameters(), other.parameters()):
            p[...] = q

    def soft_update_from(self, online: "QNetwork", tau: float) -> None:
        polyak_update(self.parameters(), online.parameters(), tau)

    def __repr__(self):
        parts = [" > ".join(map(repr, b)) for b in self.branches]
        return f"QNetwork([{' | '.join(parts)}] > {' > '.join(map(repr, self.head))})"


def _channels_last(shape):
    return (shape[1], shape[2], shape[0]) if len(shape) == 3 else shape


def conv_stack(in_channels: int, padding: str) -> list[Layer]:
    """The two-conv feature extractor: 12 then 16 kernels of 3x3, stride 1."""
    return [
        Conv2D(in_channels, 12, 3, padding), ReLU(),
        Conv2D(12, 16, 3, padding), ReLU(),
        Flatten(),
    ]


def dense_head(in_features: int) -> list[Layer]:
    return [Dense(in_features, 16), ReLU(), Dense(16, N_OUTPUTS)]


def conv_stack_features(shape, padding: str) -> int:
    c, h, w = shape
    if padding == "valid":
        h, w = h - 4, w - 4
    return 16 * h * w


def build_conv_qnet(shape, padding="valid", seed=None, lr=0.0002, dtype=np.float64) -> QNetwork:
    """Conv12 > relu > conv16 > relu > flatten > dense16 > relu > dense4."""
    n_feat = conv_stack_features(shape, padding)
    return QNetwork([shape], [conv_stack(shape[0], padding)], dense_head(n_feat), seed=seed, lr=lr, dtype=dtype)


def build_integrated_qnet(global_shape, local_shape, seed=None, lr=0.0002, dtype=np.float64) -> QNetwork:
    """Global conv stack and a 6-kernel 2x2 local branch joined before dense16."""
    n_global = conv_stack_features(global_shape, "valid")
    c, h, w = local_shape
    n_local = 6 * (h - 1) * (w - 1)
    local = [Conv2D(c, 6, 2, "valid"), ReLU(), Flatten()]
    return QNetwork(
        [global_shape, local_shape],
        [conv_stack(global_shape[0], "valid"), local],
        dense_head(n_global + n_local),
        seed=seed,
        lr=lr,
        dtype=dtype,
    )
