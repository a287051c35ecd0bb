import numpy as np

from ..errors import EmptyBatch, ShapeMismatch, ZeroNormImage


def normalized_l2(batch, batch_adv):
    """Mean over examples of ``||x_i - x'_i||_2 / ||x_i||_2``."""
    x = np.asarray(batch, dtype=np.float64)
    xa = np.asarray(batch_adv, dtype=np.float64)
    if x.shape != xa.shape:
        raise ShapeMismatch(f"batches differ in shape: {x.shape} vs {xa.shape}")
    if x.shape[0] == 0:
        raise EmptyBatch("normalized_l2 needs at least one example")
    flat = x.reshape(x.shape[0], -1)
    norms = np.linalg.norm(flat, axis=1)
    if np.any(norms == 0):
        raise ZeroNormImage("an all-zero image has no relative perturbation size")
    return float(np.mean(np.linalg.norm(flat - xa.reshape(flat.shape), axis=1) / norms))


def top1_accuracy(model, batch, labels):
    labels = np.asarray(labels)
    if labels.size == 0:
        raise EmptyBatch("top1_accuracy needs at least one example")
    return float(np.mean(model.predict(batch) == labels))
