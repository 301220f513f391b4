"""Command-line front end.

Subcommands: gen-data, run, aggregate, dump-embeddings, serve.  A JSON
config file supplies experiment settings; explicit flags override it.
All output files are written atomically (temp file + rename).
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .corpus import (
    ConllParseError,
    GenConfig,
    dataset_to_json,
    generate_synthetic,
)
from .files import write_atomic
from .loop import (
    ConfigError,
    ExperimentConfig,
    aggregate_runs,
    aggregate_to_csv,
    config_from_dict,
    config_to_dict,
    curve_from_json,
    curve_to_csv,
    curve_to_json,
    draw_seed_pool,
    encoded_pairs,
    load_dataset,
    run_experiment,
    simulated_oracle,
)
from .strategies import (
    STRATEGIES,
    Budget,
    embeddings_to_csv,
    gradient_embedding,
    sequence_embedding,
)
from .tagger import batch_forward, params_from_json, params_to_json, train


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="seqal",
        description="Active-learning experiments for token sequence labeling.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen-data", help="write a synthetic dataset as JSON")
    gen.add_argument("--out", required=True, help="output dataset path (JSON)")
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--n-train", type=int, default=GenConfig.n_train)
    gen.add_argument("--n-val", type=int, default=GenConfig.n_val)
    gen.add_argument("--n-test", type=int, default=GenConfig.n_test)
    gen.add_argument("--vocab-size", type=int, default=GenConfig.vocab_size)
    gen.add_argument("--entity-types", type=int, default=GenConfig.n_entity_types)
    gen.add_argument("--min-len", type=int, default=GenConfig.min_len)
    gen.add_argument("--max-len", type=int, default=GenConfig.max_len)
    gen.set_defaults(func=_cmd_gen_data)

    run = sub.add_parser("run", help="run an experiment for each repeat")
    run.add_argument("--config", required=True, help="experiment config (JSON)")
    run.add_argument("--out", required=True, help="output directory")
    run.add_argument("--seed", type=int, default=None, help="override base seed")
    run.add_argument("--strategy", choices=STRATEGIES, default=None)
    budget = run.add_mutually_exclusive_group()
    budget.add_argument("--budget-words", type=int, default=None)
    budget.add_argument("--budget-sentences", type=int, default=None)
    run.add_argument("--rounds", type=int, default=None)
    run.add_argument("--repeats", type=int, default=None)
    run.add_argument("--jobs", type=int, default=1, help="parallel repeats")
    run.set_defaults(func=_cmd_run)

    agg = sub.add_parser("aggregate", help="merge curve JSON files into a CSV")
    agg.add_argument("curves", nargs="+", help="curve JSON files")
    agg.add_argument("--out", required=True, help="output CSV path")
    agg.set_defaults(func=_cmd_aggregate)

    dump = sub.add_parser(
        "dump-embeddings",
        help="write unlabeled-pool embeddings under a checkpoint to CSV",
    )
    dump.add_argument("--config", required=True, help="experiment config (JSON)")
    dump.add_argument("--out", required=True, help="output CSV path")
    dump.add_argument("--seed", type=int, default=None, help="override base seed")
    dump.add_argument(
        "--checkpoint", default=None,
        help="tagger checkpoint JSON; omitted trains the seed-pool model",
    )
    dump.add_argument(
        "--kind", choices=("gradient", "sequence"), default="gradient",
        help="gradient embeddings (hybrid strategies) or mean hidden states",
    )
    dump.add_argument(
        "--save-checkpoint", default=None,
        help="also write the (possibly freshly trained) checkpoint here",
    )
    dump.set_defaults(func=_cmd_dump_embeddings)

    serve = sub.add_parser("serve", help="start the annotation service")
    serve.add_argument("--serve-addr", default="127.0.0.1:8000")
    serve.add_argument("--state-dir", default="sessions")
    serve.add_argument("--ui-dir", default=None, help="built annotator UI assets")
    serve.set_defaults(func=_cmd_serve)

    return parser


def _cmd_gen_data(args) -> int:
    config = GenConfig(
        n_train=args.n_train,
        n_val=args.n_val,
        n_test=args.n_test,
        vocab_size=args.vocab_size,
        n_entity_types=args.entity_types,
        min_len=args.min_len,
        max_len=args.max_len,
    )
    dataset = generate_synthetic(config, args.seed)
    write_atomic(args.out, dataset_to_json(dataset))
    print(f"wrote {args.out}")
    return 0


def _load_config(path: str, args) -> ExperimentConfig:
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValueError(f"{path}:{exc.lineno}: {exc.msg}") from None
    config = config_from_dict(doc)
    if getattr(args, "seed", None) is not None:
        config = dataclasses.replace(config, base_seed=args.seed)
    if getattr(args, "strategy", None) is not None:
        config = dataclasses.replace(config, strategy=args.strategy)
    if getattr(args, "budget_words", None) is not None:
        config = dataclasses.replace(config, budget=Budget("words", args.budget_words))
    if getattr(args, "budget_sentences", None) is not None:
        config = dataclasses.replace(
            config, budget=Budget("sentences", args.budget_sentences)
        )
    if getattr(args, "rounds", None) is not None:
        config = dataclasses.replace(config, n_rounds=args.rounds)
    if getattr(args, "repeats", None) is not None:
        config = dataclasses.replace(config, n_repeats=args.repeats)
    return config


def _repeat_config(config: ExperimentConfig, index: int) -> ExperimentConfig:
    return dataclasses.replace(
        config, base_seed=config.base_seed + index, n_repeats=1
    )


def _repeat_worker(doc: dict, index: int) -> str:
    # runs in a subprocess under --jobs > 1
    curve = run_experiment(_repeat_config(config_from_dict(doc), index))
    return curve_to_json(curve)


def _cmd_run(args) -> int:
    config = _load_config(args.config, args)
    out_dir = Path(args.out)

    if args.jobs > 1 and config.n_repeats > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            doc = config_to_dict(config)
            futures = [
                pool.submit(_repeat_worker, doc, i) for i in range(config.n_repeats)
            ]
            curve_texts = [f.result() for f in futures]
        curves = [curve_from_json(t) for t in curve_texts]
    else:
        dataset = load_dataset(config.dataset_source)
        curves = [
            run_experiment(_repeat_config(config, i), dataset)
            for i in range(config.n_repeats)
        ]
        curve_texts = [curve_to_json(c) for c in curves]

    for i, (curve, text) in enumerate(zip(curves, curve_texts)):
        write_atomic(out_dir / f"curve_{i}.json", text)
        write_atomic(out_dir / f"curve_{i}.csv", curve_to_csv(curve))
    write_atomic(out_dir / "aggregate.csv", aggregate_to_csv(aggregate_runs(curves)))
    final = aggregate_runs(curves)[-1]
    print(
        f"wrote {config.n_repeats} curve(s) to {out_dir}; "
        f"final f1 {final.f1_mean:.4f} +/- {final.f1_std:.4f}"
    )
    return 0


def _cmd_aggregate(args) -> int:
    curves = []
    for path in args.curves:
        with open(path, encoding="utf-8") as fh:
            curves.append(curve_from_json(fh.read()))
    write_atomic(args.out, aggregate_to_csv(aggregate_runs(curves)))
    print(f"wrote {args.out}")
    return 0


def _cmd_dump_embeddings(args) -> int:
    config = _load_config(args.config, args)
    dataset = load_dataset(config.dataset_source)
    pool = draw_seed_pool(dataset, config.initial_fraction, config.base_seed)
    if args.checkpoint is not None:
        with open(args.checkpoint, encoding="utf-8") as fh:
            params = params_from_json(fh.read())
    else:
        labels = simulated_oracle(dataset, pool.labeled_ids)
        params = train(
            config.tagger_config(dataset),
            encoded_pairs(dataset, pool.labeled_ids, labels),
            config.base_seed,
        )
    if args.save_checkpoint is not None:
        write_atomic(args.save_checkpoint, params_to_json(params))

    rows = []
    ids = sorted(pool.unlabeled_ids)
    for start in range(0, len(ids), 64):
        chunk = ids[start:start + 64]
        encoded = [dataset.encode(dataset.train_by_id(i).tokens) for i in chunk]
        result = batch_forward(params, encoded)
        for row, seq_id in enumerate(chunk):
            n = len(encoded[row])
            probs = result.probs[row, :n]
            hiddens = result.hiddens[row, :n]
            if args.kind == "gradient":
                vector = gradient_embedding(probs, hiddens, seq_id).values
            else:
                vector = sequence_embedding(hiddens)
            rows.append((seq_id, n, np.asarray(vector)))
    write_atomic(args.out, embeddings_to_csv(rows))
    print(f"wrote {len(rows)} embeddings to {args.out}")
    return 0


def _cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    host, _, port = args.serve_addr.rpartition(":")
    app = create_app(state_dir=args.state_dir, ui_dir=args.ui_dir)
    uvicorn.run(app, host=host or "127.0.0.1", port=int(port))
    return 0


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 2
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: invalid config: {exc}", file=sys.stderr)
        return 1
    except ConllParseError as exc:
        print(f"error: line {exc.line}: {exc}", file=sys.stderr)
        return 1
    except (OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
