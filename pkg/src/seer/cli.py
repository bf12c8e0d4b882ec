"""Command line entry point: ``seer {train,eval,sweep,synth,gradcheck,dump-features}``."""
from __future__ import annotations

import argparse
import csv
import logging
import sys
import time

from .config import ABLATIONS, HyperParams
from .data import load_dataset, make_synthetic, save_dataset, split_dataset
from .metrics import to_csv
from .numerics import reports_to_csv


def _hp(args) -> HyperParams:
    hp = HyperParams.from_file(args.config) if getattr(args, "config", None) else HyperParams()
    overrides = {}
    if getattr(args, "ablation", None):
        overrides["ablation"] = hp.ablation | set(args.ablation)
    if getattr(args, "epochs", None) is not None:
        overrides["epochs"] = args.epochs
    if getattr(args, "seed", None) is not None:
        overrides["seed"] = args.seed
    return hp.replace(**overrides) if overrides else hp


def _emit(text: str, out) -> None:
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _train_eval_split(items, seed):
    parts = split_dataset(items, seed=seed)
    return parts["train"], parts["test"]


def cmd_train(args) -> int:
    from .training import evaluate, save_model, train

    hp = _hp(args)
    train_items, test_items = _train_eval_split(load_dataset(args.data), hp.seed)
    start = time.perf_counter()
    result = train(train_items, hp)
    logging.info("trained %d epochs in %.1fs, loss %.4f -> %.4f", hp.epochs, time.perf_counter() - start,
                 result.loss_trace[0], result.loss_trace[-1])
    save_model(result.model, args.out)
    if test_items:
        _emit(to_csv([evaluate(result.model, test_items)]), args.metrics)
    return 0


def cmd_eval(args) -> int:
    from .training import evaluate, load_model

    model = load_model(args.model)
    items = load_dataset(args.data)
    if args.split:
        items = split_dataset(items, seed=model.hp.seed)[args.split]
    _emit(to_csv([evaluate(model, items)]), args.out)
    return 0


def cmd_sweep(args) -> int:
    from .training import sweep

    hp = _hp(args)
    values = [v for v in args.values.split(",") if v.strip()]
    train_items, test_items = _train_eval_split(load_dataset(args.data), hp.seed)
    rows = sweep(args.param, values, hp, train_items, test_items)
    _emit(to_csv(rows, key_name=args.param), args.out)
    return 0


def cmd_synth(args) -> int:
    items = make_synthetic(args.n, args.emotion_strength, args.alignment_strength, seed=args.seed)
    save_dataset(items, args.out)
    return 0


def cmd_gradcheck(args) -> int:
    from .gradsuite import component_checks, flat_reports

    reports = flat_reports(component_checks(args.dim, args.epsilon, args.tol))
    _emit(reports_to_csv(reports), args.out)
    return 0 if all(r.passed for r in reports) else 1


def cmd_dump_features(args) -> int:
    from .training import feature_rows, load_model

    model = load_model(args.model)
    items = load_dataset(args.data)
    d_f = model.hp.d_f
    header = (["id", "label", "y_fnd", "theta"] + [f"m_all_{i}" for i in range(4 * d_f)]
              + [f"e_{i}" for i in range(d_f)] + [f"m_ter_{i}" for i in range(d_f)])
    with open(args.out, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for item_id, label, y, theta, m_all, e, m_ter in feature_rows(model, items):
            writer.writerow([item_id, label, repr(y), repr(theta)] + [repr(float(v)) for v in (*m_all, *e, *m_ter)])
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="seer", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common_train(p):
        p.add_argument("--data", required=True)
        p.add_argument("--config")
        p.add_argument("--ablation", nargs="+", choices=sorted(ABLATIONS), default=[])
        p.add_argument("--epochs", type=int)
        p.add_argument("--seed", type=int)

    p = sub.add_parser("train", help="train on a JSONL dataset and save the model")
    common_train(p)
    p.add_argument("--out", default="seer_model.pt")
    p.add_argument("--metrics", help="metrics CSV for the test split (stdout if omitted)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="score a saved model on a dataset")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--split", choices=("train", "val", "test"))
    p.add_argument("--out")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", help="one train+eval per value of lambda or k_experts")
    common_train(p)
    p.add_argument("--param", required=True, choices=("lambda", "k_experts"))
    p.add_argument("--values", required=True, help="comma separated")
    p.add_argument("--out")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("synth", help="write a synthetic dataset")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--emotion-strength", type=float, required=True)
    p.add_argument("--alignment-strength", type=float, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("gradcheck", help="finite-difference check of every component")
    p.add_argument("--dim", type=int, default=8)
    p.add_argument("--tol", type=float, default=1e-4)
    p.add_argument("--epsilon", type=float, default=1e-3)
    p.add_argument("--out")
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("dump-features", help="write M_all, E and M_ter per item as CSV")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_dump_features)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except (ValueError, KeyError, OSError) as exc:
        print(f"seer: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
