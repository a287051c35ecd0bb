import numpy as np
import pytest

from basisguard.attacks import (
    AttackSpec, FourierProjector, PcaPatchProjector, PcaRowsProjector, WaveletProjector, bpda_fgsm,
    cw_l2, cw_objective, fga, fgsm, filtered_gradient, ifgsm, run_attack,
    scale_perturbation,
)
from basisguard.defenses import DefenseSpec
from basisguard.errors import ConfigError
from basisguard.model import Classifier, Dense, softmax
from oracles import brute_dft2

SHAPE = (16, 16, 1)


@pytest.fixture(scope="module")
def model():
    return Classifier.initialized(SHAPE, num_classes=4, seed=21)


@pytest.fixture(scope="module")
def batch():
    rng = np.random.default_rng(0)
    return rng.random((6, *SHAPE)) * 0.8 + 0.1, rng.integers(0, 4, size=6)


def _projectors(img):
    return [
        FourierProjector(img.shape, 5.0),
        PcaRowsProjector(img, 4),
        PcaPatchProjector(img, 4, 3),
        WaveletProjector(img.shape, 2),
    ]


def test_zero_epsilon_is_identity(model, batch):
    x, y = batch
    assert np.array_equal(fgsm(model, x, y, 0.0), x)
    assert np.array_equal(ifgsm(model, x, y, 0.0, 5), x)
    assert np.array_equal(bpda_fgsm(model, x, y, 0.0, DefenseSpec("jpeg")), x)


def test_linf_bounds_and_range(model, batch):
    x, y = batch
    assert np.max(np.abs(fgsm(model, x, y, 0.05) - x)) <= 0.05 + 1e-15
    out = ifgsm(model, x, y, 0.02, 5)
    assert np.max(np.abs(out - x)) <= 5 * 0.02 + 1e-12
    assert out.min() >= 0 and out.max() <= 1


def test_fgsm_matches_sign_of_gradient(model, batch):
    x, y = batch
    g = model.input_gradient(x, y)
    np.testing.assert_array_equal(fgsm(model, x, y, 0.03), np.clip(x + 0.03 * np.sign(g), 0, 1))


def test_fgsm_on_linear_softmax_closed_form():
    # single dense layer: the sign step follows sgn(W^T (p - e_y))
    rng = np.random.default_rng(1)
    w = rng.normal(size=(16, 3))
    layer = Dense("d", 16, 3)
    x = rng.random(16) * 0.5 + 0.25
    p = softmax(x @ w)
    expected = np.clip(x + 0.04 * np.sign(w @ (p - np.eye(3)[1])), 0, 1)
    z, cache = layer.forward({"d.w": w, "d.b": np.zeros(3)}, x[None])
    dx, _ = layer.backward({"d.w": w, "d.b": np.zeros(3)}, softmax(z) - np.eye(3)[1], cache)
    np.testing.assert_array_equal(np.clip(x + 0.04 * np.sign(dx[0]), 0, 1), expected)


def test_sign_of_zero_is_zero():
    model = Classifier(SHAPE, 4)  # zero weights, zero gradient
    x = np.full((1, *SHAPE), 0.5)
    assert np.array_equal(fgsm(model, x, [0], 0.1), x)


def test_one_iteration_equals_fgsm(model, batch):
    x, y = batch
    assert np.array_equal(ifgsm(model, x, y, 0.03, 1), fgsm(model, x, y, 0.03))


def test_ifgsm_loss_mostly_nondecreasing(model):
    rng = np.random.default_rng(2)
    x = rng.random((100, *SHAPE))
    y = model.predict(x)
    xs = [x]
    for _ in range(5):
        xs.append(ifgsm(model, xs[-1], y, 0.01, 1))
    losses = np.stack([model.loss(v, y) for v in xs])
    ok = np.all(np.diff(losses, axis=0) >= 0, axis=0)
    assert ok.mean() >= 0.9


def test_bpda_identity_equals_fgsm(model, batch):
    x, y = batch
    ref = fgsm(model, x, y, 0.03)
    assert np.array_equal(bpda_fgsm(model, x, y, 0.03, None), ref)
    assert np.array_equal(bpda_fgsm(model, x, y, 0.03, DefenseSpec("none")), ref)
    assert np.array_equal(bpda_fgsm(model, x, y, 0.03, lambda im: im), ref)


def test_bpda_uses_gradient_at_denoised_image(model, batch):
    x, y = batch
    spec = DefenseSpec("lowpass")
    from basisguard.defenses import apply_batch

    g = model.input_gradient(apply_batch(spec, x), y)
    np.testing.assert_array_equal(bpda_fgsm(model, x, y, 0.03, spec), np.clip(x + 0.03 * np.sign(g), 0, 1))


def test_fga_identity_equals_fgsm(model, batch):
    x, y = batch
    assert np.array_equal(fga(model, x, y, 0.03, None), fgsm(model, x, y, 0.03))


def test_fga_full_basis_equals_fgsm_bitwise(model, batch):
    x, y = batch
    full = FourierProjector(SHAPE, 1e9)
    assert full.retained_mask.all()
    assert np.array_equal(fga(model, x, y, 0.03, full), fgsm(model, x, y, 0.03))
    rows_full = PcaRowsProjector(x[0], 16)
    assert np.array_equal(fga(model, x, y, 0.03, rows_full), fgsm(model, x, y, 0.03))


def test_empty_retained_set_gives_zero():
    proj = FourierProjector(SHAPE, 1e-9)
    proj.retained_mask = np.zeros_like(proj.retained_mask)
    g = np.random.default_rng(3).normal(size=SHAPE)
    assert np.array_equal(filtered_gradient(proj, g), np.zeros(SHAPE))


@pytest.mark.parametrize("freq,kept", [((1, 2), True), ((6, 5), False)])
def test_fourier_projector_on_cosines(freq, kept):
    i, j = np.meshgrid(np.arange(16), np.arange(16), indexing="ij")
    g = np.cos(2 * np.pi * (freq[0] * i + freq[1] * j) / 16)
    # brute-force DFT confirms where the energy sits
    mags = np.abs(brute_dft2(g))
    assert mags[freq] > 1 and mags[-freq[0], -freq[1]] > 1
    out = filtered_gradient(FourierProjector(SHAPE, 4.0), g[:, :, None])[:, :, 0]
    np.testing.assert_allclose(out, g if kept else 0 * g, atol=1e-12)


def test_projectors_reconstruct():
    img = np.random.default_rng(4).random(SHAPE)
    for proj in _projectors(img):
        np.testing.assert_allclose(proj.synthesis(proj.analysis(img)), img, atol=1e-9)


def test_projected_gradient_has_no_filtered_coefficients():
    rng = np.random.default_rng(5)
    for _ in range(5):
        img = rng.random(SHAPE)
        g = rng.normal(size=SHAPE)
        for proj in _projectors(img):
            out = filtered_gradient(proj, g)
            assert np.max(np.abs(proj.filtered_coefficients(out))) < 1e-8, type(proj).__name__


def test_projection_linear_and_idempotent():
    rng = np.random.default_rng(6)
    img = rng.random(SHAPE)
    a, b = rng.normal(size=SHAPE), rng.normal(size=SHAPE)
    for proj in _projectors(img):
        pa = proj.project(a)
        np.testing.assert_allclose(proj.project(2 * a - 3 * b), 2 * pa - 3 * proj.project(b), atol=1e-9)
        np.testing.assert_allclose(proj.project(pa), pa, atol=1e-9)


def test_fga_takes_sign_steps(model, batch):
    x, y = batch
    out = fga(model, x, y, 0.05, DefenseSpec("wavelet_approx"))
    inside = (out > 0) & (out < 1)
    assert np.all(np.isin(np.round((out - x)[inside] / 0.05, 12), [-1.0, 0.0, 1.0]))


def test_fga_with_general_denoiser_runs(model, batch):
    x, y = batch
    out = fga(model, x, y, 0.02, DefenseSpec("jpeg"))
    assert np.max(np.abs(out - x)) <= 0.02 + 1e-15


def test_scale_perturbation(batch):
    x, _ = batch
    rng = np.random.default_rng(7)
    x_adv = np.clip(x + rng.normal(scale=0.01, size=x.shape), 0, 1)
    assert np.array_equal(scale_perturbation(x, x_adv, 1), x_adv)
    assert np.array_equal(scale_perturbation(x, x, 5), x)
    interior = np.full((1, *SHAPE), 0.5)
    shifted = interior + rng.normal(scale=0.01, size=interior.shape)
    ratio = np.linalg.norm(scale_perturbation(interior, shifted, 3) - interior) / np.linalg.norm(shifted - interior)
    assert abs(ratio - 3) < 1e-12
    with pytest.raises(ValueError):
        scale_perturbation(x, x_adv, 0.5)


def test_cw_objective_at_clean_input_is_the_gap(model, batch):
    x, _ = batch
    labels = model.predict(x)
    obj, logits = cw_objective(model, x, x, labels, 0.0, 0.02)
    top2 = np.sort(logits, axis=1)[:, -2:]
    np.testing.assert_allclose(obj, 0.02 * (top2[:, 1] - top2[:, 0]), atol=1e-14)
    assert np.all(obj > 0)


def test_cw_history_non_increasing(model, batch):
    x, _ = batch
    hist = []
    cw_l2(model, x, steps=30, lr=0.05, history=hist)
    h = np.stack(hist)
    assert h.shape == (30, len(x))
    assert np.all(np.diff(h, axis=0) <= 0)


def test_cw_tiny_lambda_stays_at_input(model, batch):
    x, _ = batch
    out = cw_l2(model, x, lambda_f=1e-12, steps=10)
    assert np.max(np.abs(out - x)) < 1e-6


def test_cw_in_range(model, batch):
    x, _ = batch
    out = cw_l2(model, x, lambda_f=5.0, steps=20, lr=0.05)
    assert out.min() >= 0 and out.max() <= 1


@pytest.mark.parametrize("spec", [
    AttackSpec("fgsm", 0.03),
    AttackSpec("ifgsm", 0.01, iterations=3),
    AttackSpec("cw", cw_steps=5, magnitude_scale=2.0),
    AttackSpec("fga", 0.03, inner=AttackSpec("fgsm", 0.03), defense=DefenseSpec("pca_rows")),
    AttackSpec("bpda", 0.01, inner=AttackSpec("ifgsm", 0.01, iterations=2), defense=DefenseSpec("jpeg")),
])
def test_attacks_are_deterministic(model, batch, spec):
    x, y = batch
    assert np.array_equal(run_attack(spec, model, x, y), run_attack(spec, model, x.copy(), y))


def test_attack_spec_round_trip_and_strength():
    spec = AttackSpec("bpda", 0.01, inner=AttackSpec("ifgsm", 0.01, iterations=10), defense=DefenseSpec("jpeg"))
    assert AttackSpec.from_dict(spec.to_dict()) == spec
    assert abs(spec.strength - 0.1) < 1e-15
    assert AttackSpec("cw", magnitude_scale=4).strength == 4


@pytest.mark.parametrize("kwargs", [{"method": "pgd"}, {"epsilon": -1}, {"iterations": 0}, {"kappa": -1},
                                    {"lambda_f": 0}, {"magnitude_scale": 0.5}])
def test_attack_spec_validation(kwargs):
    with pytest.raises(ConfigError):
        AttackSpec(**kwargs)
