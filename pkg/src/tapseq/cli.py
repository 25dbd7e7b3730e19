"""Command-line surface.

Subcommands: ``gen`` (synthetic dataset), ``train``, ``eval``, ``align``
(pairwise alignment export), ``gradcheck`` (finite-difference audit) and
``bench`` (alignment-vs-DTW timing table). Exit codes: 0 ok, 1 usage or
config error, 2 I/O failure, 3 numeric abort during training, 4 checkpoint
mismatch, 5 gradient-check failure.
"""

import argparse
import os
import statistics
import sys
import time
from pathlib import Path

import numpy as np

from . import autograd as ag
from . import config as cfgmod
from . import datagen, dtw, episodes, exports, gradcheck, model
from .errors import (CapacityError, CheckpointError, ConfigError, ContractError,
                     DimensionError, NumericAbort, SizeError)
from .params import load_checkpoint, save_checkpoint
from .sampling import sparse_sample

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_IO = 2
EXIT_NUMERIC = 3
EXIT_CHECKPOINT = 4
EXIT_GRADCHECK = 5


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on bad usage; the contract reserves 2 for I/O
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def build_parser():
    p = _Parser(prog="tapseq", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, *names):
        if "config" in names:
            sp.add_argument("--config", help="key = value configuration file")
        if "data" in names:
            sp.add_argument("--data", help="dataset directory")
        if "out" in names:
            sp.add_argument("--out", help="output path")
        if "checkpoint" in names:
            sp.add_argument("--checkpoint", help="checkpoint file")
        if "episodes" in names:
            sp.add_argument("--episodes", type=int, help="episode count override")
        if "nk" in names:
            sp.add_argument("--n-way", type=int, dest="n_way")
            sp.add_argument("--k-shot", type=int, dest="k_shot")
        sp.add_argument("--seed", type=int, help="seed override")
        sp.add_argument("--threads", type=int,
                        help="worker threads (TAP_THREADS as fallback)")

    sp = sub.add_parser("gen", help="generate a synthetic dataset")
    common(sp, "config", "out")

    sp = sub.add_parser("train", help="train a model episodically")
    common(sp, "config", "data", "out", "episodes", "nk")

    sp = sub.add_parser("eval", help="evaluate a checkpoint on the meta test set")
    common(sp, "config", "data", "out", "checkpoint", "episodes", "nk")

    sp = sub.add_parser("align", help="export the alignment matrices of one pair")
    common(sp, "config", "out", "checkpoint")
    sp.add_argument("file_a", help="class .seq file for the first sequence")
    sp.add_argument("index_a", type=int, help="sequence index within file_a")
    sp.add_argument("file_b", help="class .seq file for the second sequence")
    sp.add_argument("index_b", type=int, help="sequence index within file_b")

    sp = sub.add_parser("gradcheck", help="finite-difference audit of all gradients")
    common(sp, "config")
    sp.add_argument("--corrupt", action="store_true", help=argparse.SUPPRESS)

    sp = sub.add_parser("bench", help="alignment-vs-DTW forward timing table")
    common(sp, "config", "out")
    sp.add_argument("--t-list", default="8,16,32,64",
                    help="comma-separated sequence lengths")
    sp.add_argument("--reps", type=int, default=25, help="repetitions per length")
    return p


def effective_config(args):
    cfg = cfgmod.RunConfig()
    if getattr(args, "config", None):
        cfg = cfgmod.load_config(args.config, base=cfg)
    if getattr(args, "seed", None) is not None:
        cfg.seed = args.seed
    if getattr(args, "n_way", None) is not None:
        cfg.n_way = args.n_way
    if getattr(args, "k_shot", None) is not None:
        cfg.k_shot = args.k_shot
    if getattr(args, "threads", None) is not None:
        cfg.threads = args.threads
    elif os.environ.get("TAP_THREADS"):
        cfg.threads = int(os.environ["TAP_THREADS"])
    return cfg.validate()


def _echo_lines(cfg):
    return ["# " + line for line in cfgmod.config_lines(cfg)]


def cmd_gen(args):
    cfg = effective_config(args)
    if not args.out:
        raise ConfigError("gen needs --out for the dataset directory")
    stores = datagen.generate_metaset(cfgmod.gen_config(cfg))
    datagen.write_metaset(args.out, stores, cfgmod.config_lines(cfg))
    total = sum(len(s) for s in stores.values())
    print(f"wrote {total} class files under {args.out}")
    return EXIT_OK


def cmd_train(args):
    cfg = effective_config(args)
    if args.episodes is not None:
        if args.episodes < 0:
            raise ConfigError("--episodes must be >= 0")
        cfg.train_episodes = args.episodes
    if not args.data:
        raise ConfigError("train needs --data")
    if not args.out:
        raise ConfigError("train needs --out for the checkpoint")
    stores = datagen.load_metaset(args.data)
    mdl = model.TapModel.create(cfgmod.model_config(cfg), np.random.default_rng(cfg.seed))
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    metrics_path = out.with_suffix(".metrics.csv")
    with open(metrics_path, "w", encoding="utf-8") as metrics:
        for line in _echo_lines(cfg):
            metrics.write(line + "\n")

        def on_metrics(kind, row):
            if kind == "episode":
                idx, loss, gnorm, lr = row
                metrics.write(f"{idx},{loss:.9g},{gnorm:.9g},{lr:.9g}\n")
            else:
                idx, acc, ci = row
                metrics.write(f"{idx},{acc:.9g},{ci:.9g}\n")

        snapshot, history = episodes.train(
            stores["meta_train"], stores["meta_val"], mdl,
            cfgmod.train_config(cfg), on_metrics=on_metrics)
    save_checkpoint(out, snapshot)
    best = ""
    if history.best_episode >= 0:
        best = (f" (best val accuracy {history.best_accuracy:.4f}"
                f" at episode {history.best_episode})")
    print(f"wrote checkpoint {out} and metrics {metrics_path}{best}")
    return EXIT_OK


def _load_model(cfg, checkpoint_path):
    mdl = model.TapModel.create(cfgmod.model_config(cfg), np.random.default_rng(cfg.seed))
    state = load_checkpoint(checkpoint_path)
    mdl.store.load_data(state)
    return mdl


def cmd_eval(args):
    cfg = effective_config(args)
    if args.episodes is not None:
        if args.episodes < 1:
            raise ConfigError("--episodes must be >= 1")
        cfg.eval_episodes = args.episodes
    if not args.checkpoint:
        raise ConfigError("eval needs --checkpoint")
    if not args.data:
        raise ConfigError("eval needs --data")
    stores = datagen.load_metaset(args.data)
    mdl = _load_model(cfg, args.checkpoint)
    report = episodes.evaluate(stores["meta_test"], mdl, cfg.eval_episodes,
                               cfg.n_way, cfg.k_shot, seed=cfg.seed,
                               q_per_class=cfg.q_per_class, threads=cfg.threads)
    print(f"accuracy {report.accuracy:.4f} ± {report.ci_halfwidth:.4f} "
          f"over {report.episode_count} episodes")
    print(f"elapsed {report.seconds:.1f}s", file=sys.stderr)
    csv_path = Path(args.out) if args.out else Path(args.checkpoint).with_suffix(".eval.csv")
    fresh = not csv_path.exists()
    with open(csv_path, "a", encoding="utf-8") as fh:
        if fresh:
            for line in _echo_lines(cfg):
                fh.write(line + "\n")
            fh.write("episodes,n_way,k_shot,seed,accuracy,ci_halfwidth,mean_loss\n")
        fh.write(f"{report.episode_count},{cfg.n_way},{cfg.k_shot},{cfg.seed},"
                 f"{report.accuracy:.9g},{report.ci_halfwidth:.9g},"
                 f"{report.mean_loss:.9g}\n")
    return EXIT_OK


def cmd_align(args):
    cfg = effective_config(args)
    if cfg.similarity != "tap":
        raise ConfigError("align needs a tap-similarity model")
    if not args.checkpoint:
        raise ConfigError("align needs --checkpoint")
    mdl = _load_model(cfg, args.checkpoint)
    out_dir = Path(args.out) if args.out else Path(".")
    out_dir.mkdir(parents=True, exist_ok=True)
    pair = []
    for path, index in ((args.file_a, args.index_a), (args.file_b, args.index_b)):
        seqs = datagen.read_class_file(path, class_id=-1)
        if not 0 <= index < len(seqs):
            raise ConfigError(
                f"index {index} out of range for {path} ({len(seqs)} sequences)")
        pair.append(seqs[index])
    with ag.no_grad():
        feats = [mdl.encode(sparse_sample(seq, cfg.frames, "test")) for seq in pair]
        value, p, s = model.tap_similarity(feats[0], feats[1], mdl.store)
    (out_dir / "P.csv").write_text(exports.matrix_to_csv(p.data), encoding="utf-8")
    (out_dir / "S.csv").write_text(exports.matrix_to_csv(s.data), encoding="utf-8")
    (out_dir / "P.pgm").write_text(exports.alignment_pgm(p.data), encoding="utf-8")
    (out_dir / "S.pgm").write_text(exports.cosine_pgm(s.data), encoding="utf-8")
    print(f"similarity {value.item():.9g}")
    return EXIT_OK


def cmd_gradcheck(args):
    cfg = effective_config(args)
    rng = np.random.default_rng(cfg.seed)
    if args.corrupt:
        _install_corrupt_backward()
    results = gradcheck.run_check_suite(rng)
    results.extend(_model_checks(rng))
    failures = 0
    for name, err, tol in results:
        status = "pass" if err < tol else "FAIL"
        if err >= tol:
            failures += 1
        print(f"{status} {name:<28s} max_rel_err={err:.3e} tol={tol:g}")
    print(f"{len(results) - failures}/{len(results)} gradient checks passed")
    return EXIT_OK if failures == 0 else EXIT_GRADCHECK


def _install_corrupt_backward():
    """Test hook: break one backward rule so the audit must fail."""
    clean = ag.tanh

    def corrupt(a):
        out = clean(a)
        orig = out._backward
        if orig is not None:
            def wrong(g):
                orig(g * 1.01)
            out._backward = wrong
        return out

    ag.tanh = corrupt


def _model_checks(rng):
    """Model-level and episode-level finite-difference checks.

    Dimensions follow the audit configuration: 4 frames, 8 features, 6
    hidden units, a 5-way 1-shot episode.
    """
    from .gradcheck import finite_diff_check
    from .sampling import RawSequence, SampledSequence

    mcfg = model.ModelConfig(d_raw=5, enc_widths=(7,), d_f=8, lstm_hidden=6,
                             head_widths=(6, 1), frames=4)
    results = []

    store = model.init_params(mcfg, rng)
    a = ag.Tensor(rng.standard_normal((8, 4)))
    b = ag.Tensor(rng.standard_normal((8, 4)))

    w_ctx = rng.standard_normal((12, 4))

    def f_ctx(p):
        return ag.tsum(ag.mul(model.message_pass(a, p), ag.Tensor(w_ctx)))

    results.append(("bilstm_context",
                    finite_diff_check(f_ctx, store, 32, 1e-3, rng), 1e-4))

    def f_align(p):
        x = model.message_pass(a, p)
        y = model.message_pass(b, p)
        return ag.tsum(model.predict_alignment(x, y, p))

    results.append(("alignment_head",
                    finite_diff_check(f_align, store, 32, 1e-3, rng), 1e-4))

    def f_sim(p):
        return model.tap_similarity(a, b, p)[0]

    results.append(("sequence_similarity",
                    finite_diff_check(f_sim, store, 32, 1e-3, rng), 1e-4))

    raw_a = SampledSequence(frames=rng.standard_normal((5, 4)), source="a",
                            indices=np.arange(4))
    raw_b = SampledSequence(frames=rng.standard_normal((5, 4)), source="b",
                            indices=np.arange(4))

    def f_avg(p):
        from . import encoder as enc

        return model.avgpool_similarity(enc.encode(raw_a, p), enc.encode(raw_b, p))

    results.append(("avgpool_similarity",
                    finite_diff_check(f_avg, store, 16, 1e-3, rng), 1e-4))

    # full episode loss: 5 classes, 1 support + 1 query each
    seqs = {}
    for c in range(5):
        seqs[c] = [RawSequence(frames=rng.standard_normal((5, 9)), class_id=c,
                               instance_id=f"c{c}_i{k}") for k in range(2)]
    episode = episodes.sample_episode(seqs, 5, 1, 1, np.random.default_rng(1))
    mdl = model.TapModel(config=mcfg, store=store)

    def f_ep(p):
        return episodes.episode_loss(episode, mdl, "test")

    results.append(("episode_loss",
                    finite_diff_check(f_ep, store, 32, 1e-3, rng), 1e-4))
    return results


def cmd_bench(args):
    cfg = effective_config(args)
    try:
        t_values = [int(v) for v in args.t_list.replace(",", " ").split()]
    except ValueError as exc:
        raise ConfigError(f"bad --t-list: {exc}") from exc
    if any(t < 2 for t in t_values):
        raise ConfigError("bench needs T values >= 2")
    if args.reps < 1:
        raise ConfigError("--reps must be >= 1")
    rng = np.random.default_rng(cfg.seed)
    header = _echo_lines(cfg)
    rows = ["t,tap_seconds,dtw_seconds,ratio"]
    print(rows[0])
    for t in t_values:
        mcfg = model.ModelConfig(d_raw=cfg.d_raw, enc_widths=cfg.enc_widths,
                                 d_f=cfg.d_f, lstm_hidden=cfg.lstm_hidden,
                                 head_widths=cfg.head_widths, frames=t)
        store = model.init_params(mcfg, rng)
        a = ag.Tensor(rng.standard_normal((cfg.d_f, t)))
        b = ag.Tensor(rng.standard_normal((cfg.d_f, t)))
        with ag.no_grad():
            model.tap_similarity(a, b, store)  # warm any lazy compilation
            tap_times = []
            for _ in range(args.reps):
                t0 = time.perf_counter()
                model.tap_similarity(a, b, store)
                tap_times.append(time.perf_counter() - t0)
        dtw.dtw(a.data, b.data)
        dtw_times = []
        for _ in range(args.reps):
            t0 = time.perf_counter()
            dtw.dtw(a.data, b.data)
            dtw_times.append(time.perf_counter() - t0)
        tap_s = statistics.median(tap_times)
        dtw_s = statistics.median(dtw_times)
        row = f"{t},{tap_s:.9g},{dtw_s:.9g},{dtw_s / tap_s:.9g}"
        rows.append(row)
        print(row)
    if args.out:
        Path(args.out).write_text("".join(r + "\n" for r in header + rows),
                                  encoding="utf-8")
    return EXIT_OK


_COMMANDS = {
    "gen": cmd_gen,
    "train": cmd_train,
    "eval": cmd_eval,
    "align": cmd_align,
    "gradcheck": cmd_gradcheck,
    "bench": cmd_bench,
}


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return _COMMANDS[args.command](args)
    except SystemExit as exc:
        return exc.code if exc.code is not None else EXIT_USAGE
    except CheckpointError as exc:
        print(f"checkpoint error: {exc}", file=sys.stderr)
        return EXIT_CHECKPOINT
    except NumericAbort as exc:
        print(f"numeric abort: {exc} (last lr {exc.last_lr}, "
              f"last grad norm {exc.last_grad_norm})", file=sys.stderr)
        return EXIT_NUMERIC
    except (ConfigError, ContractError, DimensionError, SizeError,
            CapacityError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
