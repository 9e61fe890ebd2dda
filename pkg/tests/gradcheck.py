"""Central finite-difference oracle for the loss gradients (float64)."""
import numpy as np

from asdpipe.nnet import AngularHead, DenseNet, angular_loss, l2_normalize, l2_normalize_backward, mse_loss, subspace_loss

H = 1e-5


def numeric_grad(f, x, h=H):
    g = np.zeros_like(x)
    it = np.nditer(x, flags=["multi_index"])
    for _ in it:
        i = it.multi_index
        old = x[i]
        x[i] = old + h
        fp = f()
        x[i] = old - h
        fm = f()
        x[i] = old
        g[i] = (fp - fm) / (2 * h)
    return g


def rel_error(analytic, numeric):
    """Max abs deviation relative to the gradient's magnitude."""
    scale = max(np.max(np.abs(analytic)), np.max(np.abs(numeric)), 1e-8)
    return float(np.max(np.abs(analytic - numeric)) / scale)


def mse_instance(rng):
    n, d = rng.integers(1, 6), rng.integers(1, 9)
    R, T = rng.standard_normal((n, d)), rng.standard_normal((n, d))
    _, g = mse_loss(R, T)
    return rel_error(g, numeric_grad(lambda: mse_loss(R, T)[0], R))


def _targets(rng, n, C, mix):
    y = rng.integers(0, C, n)
    if not mix:
        return y
    lam = rng.random()
    return [(y, lam), (rng.permutation(y), 1 - lam)]


def angular_instance(rng, kind, n=4, d=8, C=3, K=2, trainable=True, mix=False):
    """Worst relative error over the raw-feature and centre gradients."""
    head = AngularHead.create(C, d, rng, kind, subclusters=K if kind == "scac" else None,
                              center_mode="trainable" if trainable else "fixed", margin=0.2,
                              scale=None if kind == "arcface" else rng.uniform(1.0, 8.0))
    if kind == "arcface":
        head.scale = rng.uniform(1.0, 8.0)
    Z = rng.standard_normal((n, d))
    y = _targets(rng, n, C, mix)

    def loss():
        e, _ = l2_normalize(Z)
        return angular_loss(head, e, y, update_scale=False).loss

    e, norms = l2_normalize(Z)
    res = angular_loss(head, e, y, update_scale=False)
    errs = [rel_error(l2_normalize_backward(res.grad_embeddings, e, norms), numeric_grad(loss, Z))]
    if trainable:
        errs.append(rel_error(res.grad_centers, numeric_grad(loss, head.centers)))
    return max(errs)


def subspace_instance(rng, n=4, dims=(5, 3), C=3, kind="scac"):
    sub = 2 if kind == "scac" else None
    concat = AngularHead.create(C, sum(dims), rng, kind, subclusters=sub, center_mode="trainable",
                                scale=rng.uniform(1.0, 8.0))
    heads = [AngularHead.create(C, d, rng, kind, subclusters=sub, center_mode="trainable",
                                scale=rng.uniform(1.0, 8.0)) for d in dims]
    Zs = [rng.standard_normal((n, d)) for d in dims]
    y = rng.integers(0, C, n)

    def loss():
        return subspace_loss(heads, concat, Zs, y, update_scale=False).loss

    res = subspace_loss(heads, concat, Zs, y, update_scale=False)
    errs = [rel_error(g, numeric_grad(loss, z)) for g, z in zip(res.grad_branches, Zs)]
    for g, h in zip(res.grad_centers, [concat, *heads]):
        errs.append(rel_error(g, numeric_grad(loss, h.centers)))
    return max(errs)


def dense_instance(rng):
    """Backprop through a random ReLU net into an MSE loss.

    Instances with a pre-activation near the ReLU kink are redrawn, since
    finite differences are meaningless there.
    """
    while True:
        net = DenseNet.build([4, 6, 5, 3], rng)
        net.layers[0].bias[:] = rng.standard_normal(6)
        x, t = rng.standard_normal((3, 4)), rng.standard_normal((3, 3))
        h, near_kink = x, False
        for layer in net.layers:
            pre = h @ layer.weights.T + layer.bias
            near_kink |= layer.activation == "relu" and bool(np.any(np.abs(pre) < 1e-3))
            h = np.maximum(pre, 0) if layer.activation == "relu" else pre
        if not near_kink:
            break

    def loss():
        return mse_loss(net(x), t)[0]

    out, cache = net.forward(x)
    _, g = mse_loss(out, t)
    grads, gx = net.backward(cache, g)
    errs = [rel_error(ga, numeric_grad(loss, p)) for ga, p in zip(grads, net.parameters())]
    errs.append(rel_error(gx, numeric_grad(loss, x)))
    return max(errs)
