"""Persisting evaluation records: CSV, JSON and gnuplot ``.dat`` tables."""

import csv
import io
import json
from pathlib import Path

from ..attacks import AttackSpec
from ..defenses import DefenseSpec
from .experiments import EvaluationRecord

CSV_HEADER = ("setting", "attack", "defense", "eps", "normalized_l2", "top1", "n", "seed")


def _num(value):
    return repr(float(value))


def records_to_csv(records):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for r in records:
        writer.writerow(
            [r.setting, r.attack.name, r.defense.name, _num(r.eps), _num(r.normalized_l2),
             _num(r.top1_accuracy), r.n_examples, r.seed]
        )
    return buf.getvalue()


def record_to_dict(r):
    return {
        "setting": r.setting,
        "attack": r.attack.to_dict(),
        "defense": r.defense.to_dict(),
        "normalized_l2": r.normalized_l2,
        "top1_accuracy": r.top1_accuracy,
        "n_examples": r.n_examples,
        "model_id": r.model_id,
        "seed": r.seed,
        "timestamp": r.timestamp,
    }


def record_from_dict(d):
    return EvaluationRecord(
        setting=d["setting"],
        attack=AttackSpec.from_dict(d["attack"]),
        defense=DefenseSpec.from_dict(d["defense"]),
        normalized_l2=float(d["normalized_l2"]),
        top1_accuracy=float(d["top1_accuracy"]),
        n_examples=int(d["n_examples"]),
        model_id=d.get("model_id", ""),
        seed=int(d.get("seed", 0)),
        timestamp=d.get("timestamp", ""),
    )


def _ordered(items):
    seen = {}
    for item in items:
        seen.setdefault(item, None)
    return list(seen)


def dat_tables(records):
    """Build ``{filename: text}`` gnuplot tables.

    One accuracy table and one normalized-l2 table per (setting, attack
    name); rows are sweep points, columns follow defense declaration order.
    The benign rows appear as strength 0 in every table.
    """
    tables = {}
    for setting in _ordered(r.setting for r in records):
        rows = [r for r in records if r.setting == setting]
        benign = [r for r in rows if r.attack.method == "none"]
        for method in _ordered(r.attack.name for r in rows if r.attack.method != "none"):
            sel = benign + [r for r in rows if r.attack.name == method]
            defenses = _ordered(r.defense.name for r in sel)
            strengths = _ordered(r.eps for r in sel)
            cell = {(r.eps, r.defense.name): r for r in sel}
            for kind, attr in (("top1", "top1_accuracy"), ("l2", "normalized_l2")):
                lines = [f"# setting={setting} attack={method} value={kind}", "# eps " + " ".join(defenses)]
                for s in strengths:
                    vals = [_num(getattr(cell[(s, d)], attr)) if (s, d) in cell else "nan" for d in defenses]
                    lines.append(" ".join([_num(s)] + vals))
                tables[f"{setting}_{method}_{kind}.dat"] = "\n".join(lines) + "\n"
    return tables


def export_results(records, out_dir, stem="results"):
    """Write ``{stem}.csv``, ``{stem}.json`` and the ``.dat`` tables; return the paths."""
    if not records:
        raise ValueError("nothing to export")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    csv_path = out / f"{stem}.csv"
    csv_path.write_text(records_to_csv(records))
    paths.append(csv_path)
    json_path = out / f"{stem}.json"
    json_path.write_text(json.dumps([record_to_dict(r) for r in records], indent=1) + "\n")
    paths.append(json_path)
    for name, text in dat_tables(records).items():
        p = out / name
        p.write_text(text)
        paths.append(p)
    return paths


def load_results(path):
    with open(path) as fh:
        return [record_from_dict(d) for d in json.load(fh)]


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))
