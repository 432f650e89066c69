"""Central finite-difference gradient verification.

Runs the model in 64-bit mode, perturbs a random subsample of each
parameter tensor, and reports the worst relative error against the
analytic gradients.
"""

from typing import Optional

import numpy as np

from .loss import softmax_cross_entropy
from .model import Sequential


def _relative_error(analytic: float, numeric: float) -> float:
    diff = abs(analytic - numeric)
    if diff <= 1e-9:
        return 0.0
    return diff / max(abs(analytic), abs(numeric), 1e-8)


_KINK_TOLERANCE = 1e-3


def _central(f, flat, i, eps: float) -> float:
    orig = flat[i]
    flat[i] = orig + eps
    f_plus = f()
    flat[i] = orig - eps
    f_minus = f()
    flat[i] = orig
    return (f_plus - f_minus) / (2 * eps)


def grad_check(
    model: Sequential,
    x: np.ndarray,
    labels: Optional[np.ndarray] = None,
    eps: float = 1e-4,
    samples_per_tensor: int = 5,
    rng: Optional[np.random.Generator] = None,
    train: bool = True,
    linear_probe: bool = False,
    check_input: bool = False,
) -> float:
    """Max relative error between analytic and numeric gradients.

    The objective is softmax cross-entropy against ``labels``; with
    ``linear_probe`` the output is instead contracted with a fixed random
    vector, which works for layers whose output is not a logit pair.
    ``check_input`` additionally verifies the gradient w.r.t. the input.

    Samples whose finite differences disagree between two step sizes are
    skipped: there the perturbation crosses a ReLU kink or a pooling argmax
    switch, so the numeric estimate does not witness the true derivative.
    A genuine gradient error shows up on the smooth samples either way.
    """
    if model.dtype != np.float64:
        raise ValueError("grad_check requires a model built with dtype=np.float64")
    rng = rng if rng is not None else np.random.default_rng(0)
    x = np.ascontiguousarray(x, dtype=np.float64)
    if labels is None and not linear_probe:
        labels = rng.integers(0, 2, size=x.shape[0])
    probe = None

    def objective(want_grad: bool):
        nonlocal probe
        out = model.forward(x, train=train)
        if linear_probe:
            if probe is None:
                probe = rng.standard_normal(out.shape)
            return float((out * probe).sum()), (probe if want_grad else None)
        loss, grad = softmax_cross_entropy(out, labels)
        return loss, (grad if want_grad else None)

    saved = model.snapshot()
    model.zero_grad()
    _, out_grad = objective(want_grad=True)
    dx = model.backward(out_grad)

    def loss_value():
        value, _ = objective(want_grad=False)
        return value

    def sample(flat, gflat):
        best = 0.0
        count = min(samples_per_tensor, flat.size)
        for i in rng.choice(flat.size, size=count, replace=False):
            coarse = _central(loss_value, flat, i, eps)
            fine = _central(loss_value, flat, i, eps / 4)
            if _relative_error(coarse, fine) > _KINK_TOLERANCE:
                continue  # perturbation crosses a kink; sample is blind
            best = max(best, _relative_error(float(gflat[i]), fine))
        return best

    worst = 0.0
    for p in model.params():
        worst = max(worst, sample(p.value.reshape(-1), p.grad.reshape(-1)))
    if check_input:
        worst = max(worst, sample(x.reshape(-1), dx.reshape(-1)))

    model.set_tensors(saved)  # restore running statistics mutated by forwards
    return worst
