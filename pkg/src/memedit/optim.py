"""Full-batch training loop and parameter-tree helpers.

Parameter containers are dataclasses whose array-valued fields (possibly
nested dataclasses) form a tree.  Gradients reuse the same container types,
so optimizers only need the generic tree maps below.

The default optimizer is plain gradient descent with a per-epoch backtracking
halving of the step: each epoch starts from the configured learning rate and
halves it until the loss does not increase beyond ``tol``, which makes the
training-loss curve non-increasing by construction while staying fully
deterministic.  An adaptive-moment optimizer is available behind config for
parity with common practice; it carries no monotonicity guarantee.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Callable

import numpy as np


def _is_params(obj) -> bool:
    return dataclasses.is_dataclass(obj) and not isinstance(obj, type)


def tree_arrays(params) -> list[np.ndarray]:
    """Collect array leaves in deterministic field order."""
    out: list[np.ndarray] = []
    for f in dataclasses.fields(params):
        if not f.init:
            continue
        val = getattr(params, f.name)
        if isinstance(val, np.ndarray):
            out.append(val)
        elif _is_params(val):
            out.extend(tree_arrays(val))
    return out


def tree_map(fn: Callable[[np.ndarray], np.ndarray], params):
    """Apply ``fn`` to every array leaf, returning a new container."""
    kwargs = {}
    for f in dataclasses.fields(params):
        if not f.init:
            continue
        val = getattr(params, f.name)
        if isinstance(val, np.ndarray):
            kwargs[f.name] = fn(val)
        elif _is_params(val):
            kwargs[f.name] = tree_map(fn, val)
        else:
            kwargs[f.name] = val
    return type(params)(**kwargs)


def tree_map2(fn: Callable[[np.ndarray, np.ndarray], np.ndarray], a, b):
    """Apply ``fn`` leafwise over two containers of identical structure."""
    kwargs = {}
    for f in dataclasses.fields(a):
        if not f.init:
            continue
        va, vb = getattr(a, f.name), getattr(b, f.name)
        if isinstance(va, np.ndarray):
            kwargs[f.name] = fn(va, vb)
        elif _is_params(va):
            kwargs[f.name] = tree_map2(fn, va, vb)
        else:
            kwargs[f.name] = va
    return type(a)(**kwargs)


def tree_copy(params):
    return tree_map(np.copy, params)


def tree_zeros_like(params):
    return tree_map(np.zeros_like, params)


def to_vector(params) -> np.ndarray:
    """Flatten all array leaves into one vector (for gradient checks)."""
    leaves = tree_arrays(params)
    if not leaves:
        return np.zeros(0)
    return np.concatenate([leaf.ravel() for leaf in leaves])


def from_vector(template, vec: np.ndarray):
    """Rebuild a container shaped like ``template`` from a flat vector."""
    pos = 0

    def take(arr: np.ndarray) -> np.ndarray:
        nonlocal pos
        n = arr.size
        out = vec[pos : pos + n].reshape(arr.shape).copy()
        pos += n
        return out

    rebuilt = tree_map(take, template)
    if pos != vec.size:
        raise ValueError(f"vector length {vec.size} does not match template ({pos})")
    return rebuilt


@dataclass
class TrainResult:
    params: object
    losses: list[float]


LossAndGrad = Callable[[object], tuple[float, object]]


def minimize(
    params,
    loss_and_grad: LossAndGrad,
    *,
    epochs: int,
    lr: float = 0.1,
    optimizer: str = "gd",
    tol: float = 1e-6,
    adam_betas: tuple[float, float] = (0.9, 0.999),
    adam_eps: float = 1e-8,
) -> TrainResult:
    """Run full-batch optimization and return final params plus loss history.

    ``optimizer`` is ``"gd"`` (backtracking gradient descent, loss
    non-increasing within ``tol``) or ``"adam"``.
    """
    if optimizer == "gd":
        return _minimize_gd(params, loss_and_grad, epochs=epochs, lr=lr, tol=tol)
    if optimizer == "adam":
        return _minimize_adam(
            params, loss_and_grad, epochs=epochs, lr=lr, betas=adam_betas, eps=adam_eps
        )
    raise ValueError(f"unknown optimizer {optimizer!r}")


def _minimize_gd(params, loss_and_grad, *, epochs, lr, tol) -> TrainResult:
    loss, grad = loss_and_grad(params)
    losses = [loss]
    step = lr
    for _ in range(epochs):
        # warm-start from the previous accepted step so sharp regions do not
        # force a full halving cascade every epoch; lr stays the cap
        step = min(lr, 2.0 * step)
        moved = False
        while step >= 1e-12:
            trial = tree_map2(lambda p, g, s=step: p - s * g, params, grad)
            t_loss, t_grad = loss_and_grad(trial)
            if t_loss <= loss + tol:
                params, loss, grad = trial, t_loss, t_grad
                moved = True
                break
            step /= 2.0
        if not moved:
            break  # no usable descent direction left
        losses.append(loss)
    return TrainResult(params=params, losses=losses)


def _minimize_adam(params, loss_and_grad, *, epochs, lr, betas, eps) -> TrainResult:
    b1, b2 = betas
    m = tree_zeros_like(params)
    v = tree_zeros_like(params)
    loss, grad = loss_and_grad(params)
    losses = [loss]
    for t in range(1, epochs + 1):
        m = tree_map2(lambda mi, gi: b1 * mi + (1 - b1) * gi, m, grad)
        v = tree_map2(lambda vi, gi: b2 * vi + (1 - b2) * gi * gi, v, grad)
        corr = lr * np.sqrt(1 - b2**t) / (1 - b1**t)
        update = tree_map2(lambda mi, vi: corr * mi / (np.sqrt(vi) + eps), m, v)
        params = tree_map2(lambda p, u: p - u, params, update)
        loss, grad = loss_and_grad(params)
        losses.append(loss)
    return TrainResult(params=params, losses=losses)
