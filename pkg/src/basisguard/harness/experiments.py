"""Black-, gray- and white-box evaluation protocols."""

import hashlib
import logging
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone

from .. import defenses as defense_ops
from ..attacks import AttackSpec, run_attack, scale_perturbation
from ..model import dumps_checkpoint
from .metrics import normalized_l2, top1_accuracy

log = logging.getLogger(__name__)

NO_ATTACK = AttackSpec(method="none")


@dataclass
class EvaluationRecord:
    setting: str
    attack: AttackSpec
    defense: defense_ops.DefenseSpec
    normalized_l2: float
    top1_accuracy: float
    n_examples: int
    model_id: str = ""
    seed: int = 0
    timestamp: str = field(default="", compare=False)

    @property
    def eps(self):
        return self.attack.strength


def model_id(model):
    return hashlib.sha256(dumps_checkpoint(model)).hexdigest()[:12]


def _now():
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def _evaluate(setting, attack, x, x_adv, y, defenses, model, seed, threads):
    """One record per defense for a fixed adversarial batch."""
    l2 = normalized_l2(x, x_adv) if attack.method != "none" else 0.0
    mid = model_id(model)
    records = []
    for d in defenses:
        defended = defense_ops.apply_batch(d, x_adv, threads)
        acc = top1_accuracy(model, defended, y)
        records.append(EvaluationRecord(setting, attack, d, l2, acc, len(y), mid, seed, _now()))
    return records


def _adversarial(attack, model, x, y, threads, cw_cache):
    # a C&W sweep only rescales one optimised batch, so optimise it once
    if attack.method != "cw":
        return run_attack(attack, model, x, y, threads)
    key = replace(attack, magnitude_scale=1.0)
    if key not in cw_cache:
        cw_cache[key] = run_attack(key, model, x, y, threads)
    return scale_perturbation(x, cw_cache[key], attack.magnitude_scale)


def _transfer_protocol(setting, source, target, x, y, attacks, defenses, seed=0, threads=1):
    records = _evaluate(setting, NO_ATTACK, x, x, y, defenses, target, seed, threads)
    cw_cache = {}
    for attack in attacks:
        log.info("%s: %s strength %.4g", setting, attack.method, attack.strength)
        x_adv = _adversarial(attack, source, x, y, threads, cw_cache)
        records.extend(_evaluate(setting, attack, x, x_adv, y, defenses, target, seed, threads))
    return records


def run_graybox(model_a, x, y, attacks, defenses, seed=0, threads=1):
    """Attack model A without knowledge of the defense, evaluate on model A.

    The first ``len(defenses)`` records are the benign (no-attack) rows.
    """
    return _transfer_protocol("gray", model_a, model_a, x, y, attacks, defenses, seed, threads)


def run_blackbox(model_a, model_b, x, y, attacks, defenses, seed=0, threads=1):
    """Attack model A, evaluate the transferred examples on model B."""
    return _transfer_protocol("black", model_a, model_b, x, y, attacks, defenses, seed, threads)


def whitebox_attack(mode, base, defense):
    """Wrap an FGSM/I-FGSM spec into an FGA or BPDA spec that knows ``defense``."""
    method = "fga" if mode == "white-fga" else "bpda"
    return AttackSpec(method=method, epsilon=base.epsilon, inner=base, defense=defense)


def run_whitebox(model_a, x, y, attacks, defenses, mode="white-bpda", seed=0, threads=1):
    """Defense-aware attacks (FGA or BPDA built from each sign-gradient attack).

    Attacks other than fgsm/ifgsm are skipped.
    """
    if mode not in ("white-fga", "white-bpda"):
        raise ValueError(f"unknown white-box mode {mode!r}")
    records = _evaluate(mode, NO_ATTACK, x, x, y, defenses, model_a, seed, threads)
    mid = model_id(model_a)
    for base in attacks:
        if base.method not in ("fgsm", "ifgsm"):
            continue
        for d in defenses:
            attack = whitebox_attack(mode, base, d)
            x_adv = run_attack(attack, model_a, x, y, threads)
            defended = defense_ops.apply_batch(d, x_adv, threads)
            records.append(
                EvaluationRecord(
                    mode, attack, d, normalized_l2(x, x_adv), top1_accuracy(model_a, defended, y),
                    len(y), mid, seed, _now(),
                )
            )
    return records


def run_setting(setting, model_a, model_b, x, y, attacks, defenses, seed=0, threads=1):
    if setting == "gray":
        return run_graybox(model_a, x, y, attacks, defenses, seed, threads)
    if setting == "black":
        return run_blackbox(model_a, model_b, x, y, attacks, defenses, seed, threads)
    return run_whitebox(model_a, x, y, attacks, defenses, setting, seed, threads)


def benign_report(records, tolerance=0.25):
    """Benign accuracy drop per defense, flagging drops beyond ``tolerance``.

    Returns ``{defense_name: (drop, flagged)}`` for one setting's records.
    """
    benign = {r.defense.name: r.top1_accuracy for r in records if r.attack.method == "none"}
    base = benign.get("none")
    if base is None:
        return {}
    return {name: (base - acc, base - acc > tolerance) for name, acc in benign.items()}


def benign_ordering_flags(report, expected=(("soft_threshold", "jpeg"),)):
    """Pairs ``(a, b)`` whose benign drop is expected ``a < b`` but is not.

    ``report`` is the output of :func:`benign_report`; pairs with a missing
    defense are skipped.
    """
    flags = []
    for a, b in expected:
        if a in report and b in report and not report[a][0] < report[b][0]:
            flags.append((a, b, report[a][0], report[b][0]))
    return flags

