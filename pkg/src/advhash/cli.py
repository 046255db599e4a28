"""Command-line surface: data generation, ground truth, training, encoding,
search, evaluation, reconstruction, and the gradient self-check."""

import argparse
import math
import sys
from dataclasses import replace

import numpy as np

from . import fileio, kernels
from .baselines import itq_encode, itq_train, lsh_train
from .datasets import (
    Dataset,
    apply_preprocessing,
    fit_preprocessing,
    read_bvecs,
    read_fvecs,
    read_idx_images,
    synthetic_mixture,
    write_fvecs,
)
from .errors import FormatError, NumericError, ShapeError
from .gradcheck import DEFAULT_TOLERANCE, run_gradient_check
from .metrics import evaluate
from .model import AdvHashModel, encode_binary, reconstruct
from .numerics import RngStream
from .search import exact_topn_euclidean, hamming_distances, pack_codes, sort_dtype
from .training import CONFIG_FIELDS, TrainConfig, train

METHODS = ("adv", "lsh", "itq")


def _log(msg: str) -> None:
    print(msg, file=sys.stderr)


def read_dataset(path: str, fmt: str = "auto") -> Dataset:
    if fmt == "auto":
        if path.endswith(".fvecs"):
            fmt = "fvecs"
        elif path.endswith(".bvecs"):
            fmt = "bvecs"
        elif path.endswith((".idx", "-ubyte", ".ubyte")):
            fmt = "idx"
        else:
            raise ValueError(f"cannot infer format of {path}; pass --format")
    if fmt == "fvecs":
        return read_fvecs(path)
    if fmt == "bvecs":
        return read_bvecs(path)
    if fmt == "idx":
        return read_idx_images(path)
    raise ValueError(f"unknown dataset format {fmt!r}")


def _add_data_flags(p):
    p.add_argument("--format", default="auto", choices=("auto", "fvecs", "bvecs", "idx"))
    p.add_argument("--center", action="store_true", help="subtract the data mean")
    p.add_argument("--unit-scale", action="store_true", help="scale values into [-1, 1]")
    p.add_argument("--stats-from", metavar="FILE",
                   help="fit centering/scaling statistics on this file instead of "
                        "the data itself (keeps databases and queries in one frame)")


def _fit_prep(args):
    if not (args.center or args.unit_scale):
        return None
    source = args.stats_from or args.data
    stats = read_dataset(source, args.format)
    return fit_preprocessing(stats.x, center=args.center, unit_scale=args.unit_scale)


def _load_data(args, attr="data", prep=None) -> Dataset:
    ds = read_dataset(getattr(args, attr), args.format)
    if prep is None:
        prep = _fit_prep(args)
    if prep is not None:
        ds = apply_preprocessing(ds, prep)
    if ds.preprocessing:
        _log(f"preprocessing: {ds.preprocessing}")
    return ds


def _train_flag_map():
    # CLI spelling -> TrainConfig field
    return {
        "bits": "bits", "alpha": "alpha", "beta": "beta", "gamma": "gamma",
        "lambda_": "lam", "sigma": "sigma", "m": "m", "batch_size": "batch_size",
        "epochs": "epochs", "lr": "lr", "weight_decay": "weight_decay",
        "seed": "master_seed", "trace_sign": "trace_sign",
        "sparsity_norm": "sparsity_norm", "recon_norm": "recon_norm",
        "disc_hidden": "disc_hidden", "leaky_slope": "leaky_slope",
        "gen_depth": "gen_depth",
    }


def resolve_train_config(args) -> TrainConfig:
    """defaults, overridden by --config file values, overridden by flags."""
    values = {}
    if args.config:
        values.update(fileio.coerce_config_values(fileio.parse_config_file(args.config)))
    for flag, field in _train_flag_map().items():
        v = getattr(args, flag, None)
        if v is not None:
            values[field] = v
    if args.no_adversarial:
        values["use_adversarial"] = False
    if values.get("trace_sign") in ("literal", "+1", "1"):
        values["trace_sign"] = +1
    elif values.get("trace_sign") in ("bound", "-1"):
        values["trace_sign"] = -1
    cfg = TrainConfig(**values)
    cfg.validate()
    return cfg


def _log_config(cfg: TrainConfig) -> None:
    resolved = " ".join(f"{name}={getattr(cfg, name)}" for name in CONFIG_FIELDS)
    _log(f"resolved config: {resolved}")


def cmd_gen_data(args) -> int:
    rng = RngStream(args.seed, "synthetic-data")
    ds = synthetic_mixture(args.k, args.d, args.n, args.spread, rng)
    write_fvecs(args.out, ds.x)
    _log(f"wrote {ds.count} x {ds.dim} vectors to {args.out}")
    return 0


def cmd_ground_truth(args) -> int:
    prep = _fit_prep(args)  # statistics from --stats-from or the database
    db = _load_data(args, prep=prep)
    queries = _load_data(args, attr="queries", prep=prep)
    n = min(args.n, db.count)
    if n < args.n:
        _log(f"clamping top-N from {args.n} to database size {n}")
    gt = exact_topn_euclidean(queries.x, db.x, n)
    fileio.save_ground_truth(args.out, gt)
    _log(f"wrote top-{n} ground truth for {queries.count} queries to {args.out}")
    return 0


def _train_one(method: str, x: np.ndarray, cfg: TrainConfig, itq_iters: int):
    if method == "adv":
        model, history = train(x, cfg)
        return model, history
    if method == "lsh":
        return lsh_train(x.shape[1], cfg.bits, RngStream(cfg.master_seed, "lsh")), None
    return itq_train(x, cfg.bits, itq_iters, RngStream(cfg.master_seed, "itq")), None


def _suffixed(path: str, tag: str) -> str:
    stem, dot, ext = path.rpartition(".")
    if not dot:
        return f"{path}.{tag}"
    return f"{stem}.{tag}.{ext}"


def cmd_train(args) -> int:
    cfg = resolve_train_config(args)
    _log_config(cfg)
    ds = _load_data(args)
    final_recon = []
    for rep in range(args.repeats):
        rep_cfg = replace(cfg, master_seed=cfg.master_seed + rep)
        model, history = _train_one(args.method, ds.x, rep_cfg, args.itq_iters)
        out = args.out if rep == 0 else _suffixed(args.out, f"r{rep}")
        fileio.save_model(out, model, master_seed=rep_cfg.master_seed)
        _log(f"wrote {args.method} model (seed {rep_cfg.master_seed}) to {out}")
        if history is not None:
            if args.history:
                hist_path = args.history if rep == 0 else _suffixed(args.history, f"r{rep}")
                fileio.write_history_csv(hist_path, history)
            if len(history):
                final_recon.append(history.recon_mse[-1])
    if len(final_recon) > 1:
        mean = float(np.mean(final_recon))
        sd = float(np.std(final_recon, ddof=1))
        _log(f"final reconstruction MSE over {len(final_recon)} repeats: "
             f"{mean:.6f} +/- {sd:.6f}")
    return 0


def encode_with(method: str, model, x: np.ndarray) -> np.ndarray:
    if method == "itq":
        return itq_encode(model, x)
    encoder = model.encoder if isinstance(model, AdvHashModel) else model
    return encode_binary(encoder, x)


def cmd_encode(args) -> int:
    method, model, _ = fileio.load_model(args.model)
    ds = _load_data(args)
    codes = pack_codes(encode_with(method, model, ds.x))
    fileio.save_codes(args.out, codes)
    _log(f"encoded {codes.count} items at {codes.bits} bits with {method} -> {args.out}")
    return 0


def cmd_search(args) -> int:
    db = fileio.load_codes(args.codes)
    queries = fileio.load_codes(args.query_codes)
    if db.bits != queries.bits:
        raise ShapeError(f"db codes are {db.bits}-bit, queries {queries.bits}-bit")
    topk = min(args.topk, db.count)
    rankings, dists = [], []
    for q in range(queries.count):
        d = hamming_distances(queries.item(q), db).astype(sort_dtype(db.bits))
        order = np.argsort(d, kind="stable")[:topk]
        rankings.append(order)
        dists.append(d[order])
    fileio.write_ranking_csv(args.out, rankings, dists)
    _log(f"wrote top-{topk} rankings for {queries.count} queries to {args.out}")
    return 0


def cmd_eval(args) -> int:
    db = fileio.load_codes(args.codes)
    queries = fileio.load_codes(args.query_codes)
    gt = fileio.load_ground_truth(args.gt)
    originals = model = None
    if args.data and args.model:
        method, loaded, _ = fileio.load_model(args.model)
        if method == "adv":
            model = loaded
            originals = _load_data(args).x
        else:
            _log(f"note: {method} models have no reconstruction; skipping recon metrics")
    report = evaluate(db, queries, gt, query_originals=originals, model=model,
                      precision_ks=tuple(args.pre_k), spearman_seed=args.seed)
    fileio.write_report_csv(args.out, report)
    summary = f"mAP={report.map:.6f}"
    for k in sorted(report.precision_at):
        summary += f" Pre@{k}={report.precision_at[k]:.6f}"
    if report.recon_mse is not None:
        summary += f" recon_mse={report.recon_mse:.6f} spearman={report.distance_spearman:.4f}"
    print(summary)
    return 0


def cmd_reconstruct(args) -> int:
    method, model, _ = fileio.load_model(args.model)
    if method != "adv":
        raise ValueError(f"{method} models cannot reconstruct inputs")
    ds = _load_data(args)
    if args.as_images:
        side = math.isqrt(ds.dim)
        if side * side != ds.dim:
            raise ValueError(f"--as-images needs a square dimension, got d={ds.dim}")
    xh = reconstruct(model, ds.x)
    write_fvecs(args.out, xh)
    _log(f"wrote {ds.count} reconstructions to {args.out}")
    if args.as_images:
        side = math.isqrt(ds.dim)
        count = min(args.image_limit, ds.count)
        stem = args.out.rsplit(".", 1)[0]
        for i in range(count):
            fileio.write_pgm(f"{stem}_{i}.pgm", xh[i].reshape(side, side))
        _log(f"wrote {count} PGM images next to {args.out}")
    return 0


def cmd_grad_check(args) -> int:
    results = run_gradient_check(seed=args.seed)
    failures = 0
    for label, err in results:
        status = "ok" if err <= DEFAULT_TOLERANCE else "FAIL"
        print(f"{status:4s} {label:40s} max relative error {err:.3e}")
        failures += err > DEFAULT_TOLERANCE
    if failures:
        print(f"{failures} gradient checks exceeded {DEFAULT_TOLERANCE}", file=sys.stderr)
        return 1
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="advhash",
        description="Binary hash codes for ANN search: adversarial training, "
                    "LSH/ITQ baselines, Hamming ranking, and evaluation.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="generate a synthetic Gaussian mixture as fvecs")
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--d", type=int, default=32)
    p.add_argument("--n", type=int, default=5000)
    p.add_argument("--spread", type=float, default=0.3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("ground-truth", help="exact Euclidean top-N neighbors")
    p.add_argument("--data", required=True)
    p.add_argument("--queries", required=True)
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--out", required=True)
    _add_data_flags(p)
    p.set_defaults(func=cmd_ground_truth)

    p = sub.add_parser("train", help="train a hashing model")
    p.add_argument("--data", required=True)
    p.add_argument("--method", default="adv", choices=METHODS)
    p.add_argument("--out", required=True)
    p.add_argument("--history", help="write per-epoch training history CSV here")
    p.add_argument("--config", help="config file (key = value lines)")
    p.add_argument("--bits", type=int)
    p.add_argument("--alpha", type=float)
    p.add_argument("--beta", type=float)
    p.add_argument("--gamma", type=float)
    p.add_argument("--lambda", dest="lambda_", type=float)
    p.add_argument("--sigma", type=float)
    p.add_argument("--m", type=int)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--weight-decay", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--no-adversarial", action="store_true")
    p.add_argument("--trace-sign", choices=("bound", "literal", "-1", "+1", "1"))
    p.add_argument("--sparsity-norm", choices=("l1", "l2"))
    p.add_argument("--recon-norm", choices=("l2sq", "l2"))
    p.add_argument("--disc-hidden", type=int)
    p.add_argument("--leaky-slope", type=float)
    p.add_argument("--gen-depth", type=int)
    p.add_argument("--itq-iters", type=int, default=50)
    p.add_argument("--repeats", type=int, default=1,
                   help="train this many seed-shifted models")
    _add_data_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("encode", help="encode a dataset to packed binary codes")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    _add_data_flags(p)
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("search", help="Hamming-rank a code database per query")
    p.add_argument("--codes", required=True)
    p.add_argument("--query-codes", required=True)
    p.add_argument("--topk", type=int, default=100)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_search)

    p = sub.add_parser("eval", help="retrieval metrics against ground truth")
    p.add_argument("--codes", required=True)
    p.add_argument("--query-codes", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--data", help="query vectors, for reconstruction metrics")
    p.add_argument("--model", help="model file, for reconstruction metrics")
    p.add_argument("--pre-k", type=int, nargs="+", default=[100])
    p.add_argument("--seed", type=int, default=0,
                   help="seed for the sampled distance-correlation pairs")
    _add_data_flags(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("reconstruct", help="emit synthetic reconstructions")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--as-images", action="store_true",
                   help="also write PGM images (square dimensions only)")
    p.add_argument("--image-limit", type=int, default=16)
    _add_data_flags(p)
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("grad-check", help="verify analytic gradients by finite differences")
    p.add_argument("--seed", type=int, default=7)
    p.set_defaults(func=cmd_grad_check)

    for sp in sub.choices.values():
        sp.add_argument("--threads", type=int, default=None,
                        help="cap numba kernel threads (other paths are single-threaded)")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    resolved = " ".join(f"{k}={v}" for k, v in sorted(vars(args).items())
                        if k != "func" and v is not None)
    _log(f"invocation: {resolved}")
    if args.threads is not None and kernels.NUMBA_ENABLED:
        import warnings

        import numba

        with warnings.catch_warnings():
            # threading-layer probing warns on some installs; the cap itself
            # is best-effort (no kernel here uses parallel loops)
            warnings.simplefilter("ignore")
            numba.set_num_threads(max(1, args.threads))
    try:
        return args.func(args)
    except (ValueError, FormatError, NumericError, ShapeError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
