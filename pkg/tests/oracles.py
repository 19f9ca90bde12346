"""Independent brute-force oracles used by the test suite. These deliberately
avoid the library's own code paths: plain-Python sorting and summing, and
central finite differences over a closure."""

import numpy as np


def fd_param_grads(loss_fn, model, step=1e-5):
    """Central-finite-difference gradients for every model parameter.

    loss_fn is a zero-argument closure recomputing the loss from the model's
    current parameters. Returns a flat list of arrays, (weights, bias) per
    layer, matching the layout of the analytic gradients.
    """
    out = []
    for layer in model.layers:
        for arr in (layer.weights, layer.bias):
            grad = np.zeros_like(arr)
            it = np.nditer(arr, flags=["multi_index"])
            for _ in it:
                ix = it.multi_index
                orig = arr[ix]
                arr[ix] = orig + step
                plus = loss_fn()
                arr[ix] = orig - step
                minus = loss_fn()
                arr[ix] = orig
                grad[ix] = (plus - minus) / (2.0 * step)
            out.append(grad)
    return out


def max_rel_error(analytic, numeric, floor=1e-6):
    worst = 0.0
    for a, n in zip(analytic, numeric):
        denom = np.maximum(np.maximum(np.abs(a), np.abs(n)), floor)
        worst = max(worst, float((np.abs(a - n) / denom).max()))
    return worst


def flatten_grads(grads):
    return [arr for pair in grads for arr in pair]


def min_preactivation_margin(model, x1, x2, lambda2, mix_point):
    """Smallest |pre-activation| across both branch passes and the shared pass.

    Central differences are only a valid oracle when no relu argument sits
    within the perturbation's reach of its kink; callers redraw cases whose
    margin is too small.
    """
    margin = np.inf

    def run(layers, h):
        nonlocal margin
        for layer in layers:
            s = h @ layer.weights + layer.bias
            if layer.activation == "relu":
                margin = min(margin, float(np.abs(s).min()))
            h = np.maximum(s, 0.0) if layer.activation == "relu" else s
        return h

    a1 = run(model.layers[:mix_point], x1)
    a2 = run(model.layers[:mix_point], x2)
    run(model.layers[mix_point:], lambda2 * a1 + (1.0 - lambda2) * a2)
    return margin


def brute_force_rankedms(probs):
    """Literal sort-and-sum of rank-divided gaps, in plain Python floats."""
    q = sorted((float(p) for p in probs), reverse=True)
    total = 0.0
    for rank in range(1, len(q)):
        total += (q[rank - 1] - q[rank]) / rank
    return total


def brute_force_select(candidates, budget, direction):
    """Full sort then prefix, as a reference for the selection routine."""
    if direction == "smallest":
        ordered = sorted(candidates, key=lambda c: (c.score, c.pool_index))
    else:
        ordered = sorted(candidates, key=lambda c: (-c.score, c.pool_index))
    return [c.pool_index for c in ordered[:budget]]


def simplex_grid(num_classes, step_count):
    """Every probability vector on the simplex grid with entries k/step_count."""
    grid = []

    def extend(prefix, remaining, slots):
        if slots == 1:
            grid.append(prefix + [remaining])
            return
        for k in range(remaining + 1):
            extend(prefix + [k], remaining - k, slots - 1)

    extend([], step_count, num_classes)
    return [np.asarray(point, dtype=np.float64) / step_count for point in grid]
