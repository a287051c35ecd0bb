"""Gradient attacks: FGSM, I-FGSM, C&W l2, filtered-gradient and BPDA.

All attacks take ``(N, H, W, C)`` batches with integer labels and return
adversarial batches clipped to ``[0, 1]``.  ``sgn(0)`` is 0.
"""

from dataclasses import asdict, dataclass, replace
from typing import Optional

import numpy as np

from . import defenses
from .errors import ConfigError, ShapeMismatch
from .imagecore import clip
from .model import GradientTape
from .pca import pca_fit, patches_to_matrix, matrix_to_patches
from .spectral import disk_mask
from .wavelet import BIOR31, dwt2, idwt2

METHODS = ("none", "fgsm", "ifgsm", "cw", "fga", "bpda")


# --------------------------------------------------------------------------
# basis projectors


class BasisProjector:
    """Analysis/synthesis pair with a mask of retained coefficients.

    Subclasses implement ``analysis(img) -> coefficient vector`` and
    ``synthesis(coeffs) -> img`` on ``(H, W, C)`` arrays.
    """

    shape = None
    retained_mask = None

    def analysis(self, img):
        raise NotImplementedError

    def synthesis(self, coeffs):
        raise NotImplementedError

    def project(self, img):
        img = np.asarray(img, dtype=np.float64)
        if img.shape != self.shape:
            raise ShapeMismatch(f"projector built for {self.shape}, got {img.shape}")
        # a full basis projects onto everything: D D^T = I exactly
        if self.retained_mask.all():
            return img.copy()
        if not self.retained_mask.any():
            return np.zeros_like(img)
        return self.synthesis(self.analysis(img) * self.retained_mask)

    def filtered_coefficients(self, img):
        return self.analysis(img)[~self.retained_mask]


class FourierProjector(BasisProjector):
    """Unitary 2-D DFT per channel; retains bins inside a disk."""

    def __init__(self, shape, radius):
        self.shape = tuple(shape)
        h, w, c = self.shape
        self.retained_mask = np.tile(disk_mask(h, w, radius)[:, :, None], (1, 1, c)).ravel()

    def analysis(self, img):
        return np.fft.fft2(img, axes=(0, 1), norm="ortho").ravel()

    def synthesis(self, coeffs):
        spec = coeffs.reshape(self.shape)
        return np.fft.ifft2(spec, axes=(0, 1), norm="ortho").real


class PcaRowsProjector(BasisProjector):
    """Per-channel ``I kron U``: image rows expanded in the image's own PCA basis."""

    def __init__(self, image, k):
        image = np.asarray(image, dtype=np.float64)
        self.shape = image.shape
        h, w, c = self.shape
        self.bases = [pca_fit(image[:, :, ch], min(h, w)).components for ch in range(c)]
        self.bases = [_complete_basis(u) for u in self.bases]
        mask = np.zeros((c, h, w), dtype=bool)
        mask[:, :, :k] = True
        self.retained_mask = mask.ravel()

    def analysis(self, img):
        return np.stack([img[:, :, ch] @ u for ch, u in enumerate(self.bases)]).ravel()

    def synthesis(self, coeffs):
        h, w, c = self.shape
        z = coeffs.reshape(c, h, w)
        return np.stack([z[ch] @ u.T for ch, u in enumerate(self.bases)], axis=2)


class PcaPatchProjector(BasisProjector):
    """Non-overlapping patches expanded in the image's own patch PCA basis.

    Orthonormal when ``patch`` divides both image sides; otherwise the
    border patches are zero-padded and the map is only approximately a
    projection.
    """

    def __init__(self, image, patch, k):
        image = np.asarray(image, dtype=np.float64)
        self.shape = image.shape
        self.patch = patch
        h, w, c = self.shape
        self.bases = []
        for ch in range(c):
            rows, self.padded_shape = patches_to_matrix(image[:, :, ch], patch)
            self.bases.append(_complete_basis(pca_fit(rows, min(rows.shape)).components))
        n_patches = rows.shape[0]
        mask = np.zeros((c, n_patches, patch * patch), dtype=bool)
        mask[:, :, :k] = True
        self.retained_mask = mask.ravel()

    def _rows(self, channel):
        h, w = channel.shape
        ph, pw = self.padded_shape
        padded = np.zeros((ph, pw))
        padded[:h, :w] = channel
        return patches_to_matrix(padded, self.patch)[0]

    def analysis(self, img):
        return np.stack([self._rows(img[:, :, ch]) @ u for ch, u in enumerate(self.bases)]).ravel()

    def synthesis(self, coeffs):
        h, w, c = self.shape
        z = coeffs.reshape(c, -1, self.patch * self.patch)
        return np.stack(
            [matrix_to_patches(z[ch] @ u.T, self.patch, self.padded_shape, (h, w)) for ch, u in enumerate(self.bases)],
            axis=2,
        )


class WaveletProjector(BasisProjector):
    """Biorthogonal wavelet pyramid per channel; retains the approximation band."""

    def __init__(self, shape, levels, bank=BIOR31):
        self.shape = tuple(shape)
        self.levels, self.bank = levels, bank
        h, w, c = self.shape
        template = dwt2(np.zeros((h, w)), levels, bank)
        self._template = template
        sizes = [template.approx.size] + [b.size for bands in template.details for b in bands]
        per_channel = np.zeros(sum(sizes), dtype=bool)
        per_channel[: sizes[0]] = True
        self.retained_mask = np.tile(per_channel, c)

    def analysis(self, img):
        out = []
        for ch in range(self.shape[2]):
            pyr = dwt2(img[:, :, ch], self.levels, self.bank)
            out.append(pyr.approx.ravel())
            out.extend(b.ravel() for bands in pyr.details for b in bands)
        return np.concatenate(out)

    def synthesis(self, coeffs):
        t = self._template
        per = coeffs.reshape(self.shape[2], -1)
        channels = []
        for vec in per:
            pos = 0

            def take(shape):
                nonlocal pos
                n = int(np.prod(shape))
                arr = vec[pos : pos + n].reshape(shape)
                pos += n
                return arr

            approx = take(t.approx.shape)
            details = [tuple(take(b.shape) for b in bands) for bands in t.details]
            pyr = type(t)(approx=approx, details=details, shapes=t.shapes)
            channels.append(idwt2(pyr, self.bank))
        return np.stack(channels, axis=2)


def _complete_basis(u):
    """Return ``u`` unchanged if square, else extend it to an orthonormal basis."""
    d, k = u.shape
    if k == d:
        return u
    q, _ = np.linalg.qr(np.hstack([u, np.eye(d)]))
    q[:, :k] = u
    return q[:, :d]


def projector_for(spec, image):
    """The basis projector implied by a defense, or ``None`` if it has none."""
    image = np.asarray(image, dtype=np.float64)
    p = defenses.resolve(spec, image.shape)
    if spec.method == "lowpass":
        return FourierProjector(image.shape, p["radius"])
    if spec.method == "pca_rows":
        return PcaRowsProjector(image, p["k"])
    if spec.method == "pca_patches":
        return PcaPatchProjector(image, p["patch"], p["k"])
    if spec.method == "wavelet_approx":
        return WaveletProjector(image.shape, p["levels"])
    return None


def filtered_gradient(proj, g):
    """``D_retained D_retained^T g``: the gradient restricted to retained bases."""
    return proj.project(g)


def rescaled_denoise(denoise, g):
    """Run an image-range denoiser on a gradient via an affine map to [0, 1]."""
    lo, hi = float(g.min()), float(g.max())
    if hi == lo:
        return g.copy()
    return denoise((g - lo) / (hi - lo)) * (hi - lo) + lo


# --------------------------------------------------------------------------
# attacks


def _sign_steps(x, eps, iterations, gradient):
    x_adv = np.asarray(x, dtype=np.float64)
    for _ in range(iterations):
        x_adv = clip(x_adv + eps * np.sign(gradient(x_adv)))
    return x_adv


def fgsm(model, x, y, eps):
    return ifgsm(model, x, y, eps, 1)


def ifgsm(model, x, y, eps, iterations=10):
    if eps < 0:
        raise ValueError("epsilon must be non-negative")
    if iterations < 1:
        raise ValueError("iterations must be at least 1")
    return _sign_steps(x, eps, iterations, lambda xa: model.input_gradient(xa, y))


def _gradient_denoiser(denoiser, x):
    """Per-image callables ``g -> den(g)`` for a batch ``x``."""
    if denoiser is None:
        return [None] * len(x)
    if isinstance(denoiser, BasisProjector):
        return [denoiser.project] * len(x)
    if isinstance(denoiser, defenses.DefenseSpec):
        if denoiser.method == "none":
            return [None] * len(x)
        out = []
        for img in x:
            proj = projector_for(denoiser, img)
            if proj is not None:
                out.append(proj.project)
            else:
                out.append(lambda g, s=denoiser: rescaled_denoise(lambda v: defenses.apply(s, v), g))
        return out
    return [denoiser] * len(x)


def fga(model, x, y, eps, denoiser=None, iterations=1):
    """Filtered gradient attack: sign step along the denoised input gradient.

    ``denoiser`` is a :class:`BasisProjector`, a
    :class:`~basisguard.defenses.DefenseSpec` (projector built per image from
    the clean input when the defense has one), a callable on gradient arrays,
    or ``None`` for plain FGSM.
    """
    x = np.asarray(x, dtype=np.float64)
    dens = _gradient_denoiser(denoiser, x)

    def gradient(xa):
        g = model.input_gradient(xa, y)
        return np.stack([gi if d is None else d(gi) for d, gi in zip(dens, g)])

    return _sign_steps(x, eps, iterations, gradient)


def bpda_fgsm(model, x, y, eps, denoiser=None, iterations=1, threads=1):
    """Gradient taken at the denoised image, step applied to the raw image."""
    if denoiser is None:
        den = lambda xa: xa
    elif isinstance(denoiser, defenses.DefenseSpec):
        den = lambda xa: defenses.apply_batch(denoiser, xa, threads)
    else:
        den = lambda xa: np.stack([denoiser(im) for im in xa])
    return _sign_steps(x, eps, iterations, lambda xa: model.input_gradient(den(xa), y))


def cw_objective(model, x, x_adv, labels, kappa, lambda_f, tape=None):
    """Per-example ``||x - x'||^2 + lambda_f * max(-kappa, margin)``.

    ``margin = Z(x')_f(x) - max_{c != f(x)} Z(x')_c`` with ``labels = f(x)``.
    Returns ``(objective, logits)``.
    """
    logits = model.forward(x_adv, tape)
    rows = np.arange(len(labels))
    own = logits[rows, labels]
    others = logits.copy()
    others[rows, labels] = -np.inf
    margin = own - others.max(axis=1)
    dist = ((x_adv - x) ** 2).reshape(len(labels), -1).sum(axis=1)
    return dist + lambda_f * np.maximum(-kappa, margin), logits


def cw_l2(model, x, kappa=0.0, lambda_f=0.02, steps=100, lr=0.01, history=None):
    """C&W l2 attack optimised by Adam directly in pixel space.

    Iterates are projected to ``[0, 1]`` after every step; the iterate with
    the lowest objective (the start ``x' = x`` included) is returned.  If
    ``history`` is a list, the best objective so far is appended after each
    step.
    """
    if kappa < 0 or lambda_f <= 0:
        raise ValueError("need kappa >= 0 and lambda_f > 0")
    x = np.asarray(x, dtype=np.float64)
    n = x.shape[0]
    labels = model.predict(x)
    rows = np.arange(n)
    beta1, beta2, tiny = 0.9, 0.999, 1e-8

    x_adv = x.copy()
    best = x.copy()
    best_obj, _ = cw_objective(model, x, x, labels, kappa, lambda_f)
    m = np.zeros_like(x)
    v = np.zeros_like(x)
    for t in range(1, steps + 1):
        tape = GradientTape()
        logits = model.forward(x_adv, tape)
        others = logits.copy()
        others[rows, labels] = -np.inf
        runner_up = others.argmax(axis=1)
        margin = logits[rows, labels] - logits[rows, runner_up]
        active = (margin > -kappa).astype(np.float64)
        dlogits = np.zeros_like(logits)
        dlogits[rows, labels] = lambda_f * active
        dlogits[rows, runner_up] -= lambda_f * active
        grad_margin, _ = model.backward(tape, dlogits)
        grad = 2.0 * (x_adv - x) + grad_margin

        m = beta1 * m + (1 - beta1) * grad
        v = beta2 * v + (1 - beta2) * grad * grad
        m_hat = m / (1 - beta1**t)
        v_hat = v / (1 - beta2**t)
        x_adv = clip(x_adv - lr * m_hat / (np.sqrt(v_hat) + tiny))

        obj, _ = cw_objective(model, x, x_adv, labels, kappa, lambda_f)
        better = obj < best_obj
        best[better] = x_adv[better]
        best_obj = np.where(better, obj, best_obj)
        if history is not None:
            history.append(best_obj.copy())
    return best


def scale_perturbation(x, x_adv, s):
    """``clip(x + s (x' - x))`` for a magnitude multiplier ``s >= 1``."""
    if s < 1:
        raise ValueError("scale must be at least 1")
    x = np.asarray(x, dtype=np.float64)
    return clip(x + s * (np.asarray(x_adv, dtype=np.float64) - x))


# --------------------------------------------------------------------------
# specs


@dataclass(frozen=True)
class AttackSpec:
    method: str = "fgsm"
    epsilon: float = 0.0
    iterations: int = 1
    kappa: float = 0.0
    lambda_f: float = 0.02
    cw_steps: int = 100
    cw_lr: float = 0.01
    magnitude_scale: float = 1.0
    inner: Optional["AttackSpec"] = None
    defense: Optional[defenses.DefenseSpec] = None

    def __post_init__(self):
        if self.method not in METHODS:
            raise ConfigError(f"unknown attack {self.method!r}; choose from {METHODS}")
        if self.epsilon < 0:
            raise ConfigError("epsilon must be non-negative")
        if self.iterations < 1:
            raise ConfigError("iterations must be at least 1")
        if self.kappa < 0:
            raise ConfigError("kappa must be non-negative")
        if self.lambda_f <= 0:
            raise ConfigError("lambda_f must be positive")
        if self.magnitude_scale < 1:
            raise ConfigError("magnitude_scale must be at least 1")
        if self.inner is not None and self.inner.method not in ("fgsm", "ifgsm"):
            raise ConfigError("FGA/BPDA wrap only fgsm or ifgsm")

    @property
    def name(self):
        """Method, qualified by the wrapped attack for FGA/BPDA (``bpda-ifgsm``)."""
        return f"{self.method}-{self.inner.method}" if self.inner is not None else self.method

    @property
    def strength(self):
        """The sweep coordinate: total l-inf budget, or the C&W multiplier."""
        if self.method == "cw":
            return self.magnitude_scale
        if self.method == "none":
            return 0.0
        return self.epsilon * self._steps()

    def _steps(self):
        if self.method == "ifgsm":
            return self.iterations
        if self.method in ("fga", "bpda") and self.inner is not None:
            return self.inner.iterations if self.inner.method == "ifgsm" else 1
        return 1

    def with_defense(self, defense):
        return replace(self, defense=defense)

    def to_dict(self):
        out = asdict(self)
        out["inner"] = self.inner.to_dict() if self.inner else None
        out["defense"] = self.defense.to_dict() if self.defense else None
        return out

    @classmethod
    def from_dict(cls, data):
        data = dict(data)
        if data.get("inner") is not None:
            data["inner"] = cls.from_dict(data["inner"])
        if data.get("defense") is not None:
            data["defense"] = defenses.DefenseSpec.from_dict(data["defense"])
        try:
            return cls(**data)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc


def run_attack(spec, model, x, y, threads=1):
    """Generate the adversarial batch described by ``spec``."""
    x = np.asarray(x, dtype=np.float64)
    if spec.method == "none" or (spec.method != "cw" and spec.epsilon == 0):
        return clip(x)
    if spec.method == "fgsm":
        return fgsm(model, x, y, spec.epsilon)
    if spec.method == "ifgsm":
        return ifgsm(model, x, y, spec.epsilon, spec.iterations)
    if spec.method == "cw":
        x_adv = cw_l2(model, x, spec.kappa, spec.lambda_f, spec.cw_steps, spec.cw_lr)
        return scale_perturbation(x, x_adv, spec.magnitude_scale)
    iterations = spec._steps()
    if spec.method == "fga":
        return fga(model, x, y, spec.epsilon, spec.defense, iterations)
    return bpda_fgsm(model, x, y, spec.epsilon, spec.defense, iterations, threads)
