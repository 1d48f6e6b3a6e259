"""Command-line entry point: ``mtalk <subcommand> ...``.

Exit codes: 0 success, 2 usage or configuration error, 3 data error,
4 checkpoint error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import shutil
import sys
from dataclasses import asdict, fields
from pathlib import Path

import numpy as np

from . import checkpoint
from .config import ConfigError, apply_overrides, coerce, config_hash, load_config, write_config
from .corpus import Corpus, CorpusFormatError, CorpusSpec, generate_corpus
from .corpus.formats import read_audio, read_motion, read_tokens, write_motion
from .motion_vq import (
    DEFAULT_LAYOUT,
    PART_NAMES,
    VQConfig,
    VQTrainConfig,
    eval_windows,
    evaluate,
    load_vqvae,
    save_vqvae,
    train_vqvae,
)
from .synthesis import (
    MODULE_ROWS,
    GeneratorConfig,
    MissingStage1Error,
    Models,
    evaluate_generator,
    generate,
    load_generator,
    save_generator,
    train_stage2,
)

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_CHECKPOINT = 0, 2, 3, 4
GENERATOR_FILE = "generator.mtg2"
log = logging.getLogger("mtalk")


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


# -- shared helpers ----------------------------------------------------------------

def resolve_seed(flag: int | None, file_values: dict) -> int:
    """--seed, then the config file's ``seed``, then $MTALK_SEED, then 0."""
    if flag is not None:
        return flag
    if "seed" in file_values:
        try:
            return int(file_values["seed"])
        except ValueError:
            raise ConfigError(f"seed must be an integer, got {file_values['seed']!r}") from None
    env = os.environ.get("MTALK_SEED")
    if env:
        try:
            return int(env)
        except ValueError:
            raise ConfigError(f"MTALK_SEED must be an integer, got {env!r}") from None
    return 0


def read_file_config(path) -> dict:
    if path is None:
        return {}
    if not Path(path).exists():
        raise UsageError(f"config file {path} does not exist")
    return load_config(path)


def write_json(path, obj) -> None:
    Path(path).write_text(json.dumps(obj, indent=1, sort_keys=True) + "\n", encoding="utf-8")


def write_csv(path, header, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def fmt(x: float) -> str:
    return repr(float(x))


def open_corpus(path) -> Corpus:
    try:
        return Corpus(path)
    except FileNotFoundError as exc:
        raise DataError(str(exc)) from None


def load_models(models_dir) -> Models:
    root = Path(models_dir)
    gen = load_generator(root / GENERATOR_FILE)
    vq = {o: load_vqvae(root / f"{o}.mtvq", part=o) for o in PART_NAMES}
    return Models(gen, vq)


def history_rows(history: list[dict]):
    keys = sorted({k for h in history for k in h} - {"epoch"})
    return ["epoch"] + keys, [[h["epoch"]] + [fmt(h.get(k, float("nan"))) for k in keys]
                              for h in history]


# -- subcommands -----------------------------------------------------------------------

def cmd_gen_corpus(args) -> int:
    values = read_file_config(args.spec)
    spec = CorpusSpec()
    apply_overrides(spec, {k: v for k, v in values.items() if k != "seed"})
    spec.seed = resolve_seed(args.seed, values)
    try:
        spec.__post_init__()
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    out = generate_corpus(spec, args.out)
    write_config(out / "resolved.cfg", asdict(spec))
    corpus = Corpus(out)
    print(f"wrote {spec.n_clips} clips to {out} "
          f"(train {len(corpus.ids('train'))}, val {len(corpus.ids('val'))}, "
          f"test {len(corpus.ids('test'))})")
    return EXIT_OK


def vq_train_config(values: dict, seed: int) -> VQTrainConfig:
    """Training keys set VQTrainConfig fields; model keys build a frozen VQConfig."""
    model_keys = {f.name for f in fields(VQConfig)}
    defaults = VQConfig()
    try:
        model = VQConfig(**{k: coerce(v, getattr(defaults, k))
                            for k, v in values.items() if k in model_keys})
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from None
    cfg = VQTrainConfig(model=model)
    apply_overrides(cfg, {k: v for k, v in values.items() if k not in model_keys and k != "seed"})
    cfg.seed = seed
    return cfg


def flat_vq_config(cfg: VQTrainConfig) -> dict:
    out = {k: v for k, v in asdict(cfg).items() if k != "model"}
    out.update(cfg.model.to_dict())
    return out


def cmd_train_vqvae(args) -> int:
    values = read_file_config(args.config)
    cfg = vq_train_config(values, resolve_seed(args.seed, values))
    corpus = open_corpus(args.corpus)
    part = DEFAULT_LAYOUT.part(args.part)
    train = [DEFAULT_LAYOUT.extract(c.motion, args.part) for c in corpus.clips("train")]
    held = [DEFAULT_LAYOUT.extract(c.motion, args.part) for c in corpus.clips("val")]
    model, history = train_vqvae(train, part, cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_vqvae(out / f"{args.part}.mtvq", model)
    write_config(out / f"{args.part}.cfg", flat_vq_config(cfg))
    header, rows = history_rows(history)
    write_csv(out / f"{args.part}_history.csv", header, rows)
    summary = {"part": args.part, "history": history,
               "validation": evaluate(model, eval_windows(held, cfg.window), cfg.use_vel_acc)
               if held else {}}
    write_json(out / f"{args.part}_report.json", summary)
    first, last = history[0]["rec"], history[-1]["rec"]
    print(f"{args.part}: rec {first:.5f} -> {last:.5f} ({last / first:.1%} of epoch 1), "
          f"codebook utilization {history[-1]['utilization']:.0%}")
    return EXIT_OK


def cmd_train_gen(args) -> int:
    values = read_file_config(args.config)
    corpus = open_corpus(args.corpus)
    seed = resolve_seed(args.seed, values)
    base = GeneratorConfig(vocab_size=corpus.spec.vocab_size, n_speakers=corpus.spec.speakers,
                           fps=corpus.spec.fps, audio_rate=corpus.spec.audio_rate)
    vq_dir = Path(args.vq_dir)
    vq = {}
    for o in PART_NAMES:
        path = vq_dir / f"{o}.mtvq"
        vq[o] = load_vqvae(path, part=o) if path.exists() else None
    missing = [o for o, m in vq.items() if m is None]
    if missing:
        raise MissingStage1Error(f"{vq_dir}: missing stage-1 checkpoint(s) for {missing}")
    first = vq[PART_NAMES[0]].config
    base.codebook_size, base.code_dim, base.downsample = (first.codebook_size, first.code_dim,
                                                          first.downsample)
    cfg = GeneratorConfig.from_flat({**{k: v for k, v in values.items() if k != "seed"},
                                     "seed": str(seed)}, base)
    gen, history = train_stage2(corpus.clips("train"), vq, cfg, corpus.layout)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_generator(out / GENERATOR_FILE, gen)
    for o in PART_NAMES:
        shutil.copyfile(vq_dir / f"{o}.mtvq", out / f"{o}.mtvq")
    write_config(out / "generator.cfg", cfg.to_flat())
    header, rows = history_rows(history)
    write_csv(out / "generator_history.csv", header, rows)
    held = evaluate_generator(gen, corpus.clips("val"), vq, corpus.layout) if corpus.ids("val") else {}
    write_json(out / "generator_report.json", {"history": history, "validation": held})
    accs = ", ".join(f"{o} {held[o]['accuracy']:.1%}" for o in held)
    print(f"stage-2 loss {history[0]['loss']:.4f} -> {history[-1]['loss']:.4f}; "
          f"validation code accuracy: {accs}")
    return EXIT_OK


def _generate_one(models: Models, audio, tokens, speaker: int, out_path: Path) -> dict:
    result = generate(audio, tokens, speaker, models)
    write_motion(out_path, result.motion, result.fps)
    return {row: result.timings[row] / result.duration for row in MODULE_ROWS}


def cmd_generate(args) -> int:
    models = load_models(args.models)
    out = Path(args.out)
    timings = {}
    if args.corpus:
        corpus = open_corpus(args.corpus)
        out.mkdir(parents=True, exist_ok=True)
        for clip in corpus.clips(args.split):
            timings[f"clip_{clip.clip_id}"] = _generate_one(
                models, clip.audio, clip.tokens, clip.speaker, out / f"clip_{clip.clip_id}.mtmo")
        target_dir = out
        print(f"generated {len(timings)} clips from the {args.split} split into {out}")
    else:
        if not (args.audio and args.tokens and args.speaker is not None):
            raise UsageError("generate needs --audio, --tokens and --speaker (or --corpus)")
        try:
            audio, rate = read_audio(args.audio)
            tokens = read_tokens(args.tokens)
        except FileNotFoundError as exc:
            raise DataError(str(exc)) from None
        if rate != models.generator.config.audio_rate:
            raise DataError(f"audio rate {rate} differs from the model's "
                            f"{models.generator.config.audio_rate}")
        out.parent.mkdir(parents=True, exist_ok=True)
        timings[out.stem] = _generate_one(models, audio, tokens, args.speaker, out)
        target_dir = out.parent
        print(f"wrote {out}")
    write_config(target_dir / "generate.cfg", models.generator.config.to_flat())
    write_json(target_dir / "generate_timings.json", timings)
    return EXIT_OK


def generated_clips(path, corpus: Corpus, split: str) -> dict[int, np.ndarray]:
    root = Path(path)
    if (root / "corpus.json").exists():
        other = open_corpus(root)
        return {c.clip_id: c.motion for c in other.clips(split)}
    files = sorted(root.glob("clip_*.mtmo"))
    if not files:
        raise DataError(f"{root} holds no generated clip_*.mtmo files")
    out = {}
    for f in files:
        try:
            clip_id = int(f.stem.split("_", 1)[1])
        except ValueError:
            continue
        if clip_id in corpus.ids():
            out[clip_id] = read_motion(f).frames
    if not out:
        raise DataError(f"{root}: no generated clip matches a corpus clip id")
    return dict(sorted(out.items()))


def cmd_evaluate(args) -> int:
    from .metrics import (ExtractorConfig, FeatureExtractor, audio_beats, beat_constancy,
                          body_diversity, fgd, lvd, motion_beats, vertex_mse)

    values = read_file_config(args.config)
    corpus = open_corpus(args.corpus)
    fx_cfg = ExtractorConfig()
    apply_overrides(fx_cfg, {k: v for k, v in values.items() if k not in ("seed", "sigma")})
    fx_cfg.seed = resolve_seed(args.seed, values)
    sigma = float(values.get("sigma", args.sigma))
    resolved = {**fx_cfg.to_dict(), "sigma": sigma, "split": args.split}
    chash = config_hash(resolved)

    gen = generated_clips(args.generated, corpus, args.split)
    real = {i: corpus.clip(i) for i in gen}
    fx = FeatureExtractor(fx_cfg, corpus.layout)
    fx.fit([c.motion for c in corpus.clips("train")])

    real_motion = [real[i].motion for i in gen]
    lengths = [min(gen[i].shape[0], real[i].motion.shape[0]) for i in gen]
    n = min(lengths)
    fps = corpus.spec.fps
    face = corpus.layout.channels("face")
    bc = []
    for i, g in gen.items():
        b_g = motion_beats(g, fps, corpus.layout)
        b_a = audio_beats(real[i].audio, real[i].rate)
        if len(b_g) and len(b_a):
            bc.append(beat_constancy(b_g, b_a, sigma))
    metrics = {
        "fgd": fgd(fx.features(real_motion), fx.features(list(gen.values()))),
        "bc": float(np.mean(bc)) if bc else float("nan"),
        "diversity": body_diversity(np.stack([g[:n] for g in gen.values()]), corpus.layout)
        if len(gen) > 1 else float("nan"),
        "face_mse": float(np.mean([vertex_mse(g[:m, face], r[:m, face])
                                   for g, r, m in zip(gen.values(), real_motion, lengths)])),
        "lvd": float(np.mean([lvd(g[:m, face], r[:m, face])
                              for g, r, m in zip(gen.values(), real_motion, lengths)])),
        "extractor_recon_l1": fx.recon_l1,
        "clips": float(len(gen)),
    }
    report = Path(args.report)
    report.mkdir(parents=True, exist_ok=True)
    write_csv(report / "metrics.csv", ["metric", "value", "config-hash"],
              [[k, fmt(v), chash] for k, v in metrics.items()])
    write_json(report / "metrics.json", {"metrics": metrics, "config_hash": chash})
    write_config(report / "evaluate.cfg", resolved)
    for k, v in metrics.items():
        print(f"{k:>20s}  {v:.6g}")
    return EXIT_OK


def cmd_bench(args) -> int:
    from .bench import module_times, scaling_fits, scaling_table

    models = load_models(args.models)
    try:
        lengths = [int(x) for x in args.lengths.split(",") if x.strip()]
    except ValueError:
        raise UsageError(f"--lengths must be comma-separated integers, got {args.lengths!r}") from None
    if len(lengths) < 3 or args.repeats < 1:
        raise UsageError("bench needs at least three lengths and one repeat")
    seed = resolve_seed(args.seed, {})
    per_module = module_times(models, args.duration, args.repeats, seed)
    table = scaling_table(models.generator.global_scan.speech_ssm["body"], lengths,
                          args.repeats, seed)
    fits = scaling_fits(table)
    report = Path(args.report)
    report.mkdir(parents=True, exist_ok=True)
    write_csv(report / "modules.csv", ["module", "mean_seconds_per_second", "std"],
              [[row, fmt(m), fmt(s)] for row, (m, s) in per_module.items()])
    write_csv(report / "scaling.csv", ["length", "scan_seconds", "attention_seconds"],
              [[r["length"], fmt(r["scan_seconds"]), fmt(r["attention_seconds"])] for r in table])
    write_json(report / "bench.json", {"modules": {k: {"mean": m, "std": s}
                                                   for k, (m, s) in per_module.items()},
                                       "scaling": table, "fits": fits,
                                       "duration": args.duration, "repeats": args.repeats})
    print("module                seconds per generated second")
    for row, (m, s) in per_module.items():
        print(f"{row:<20s}  {m:.5f} +/- {s:.5f}")
    print(f"scan R^2 linear {fits['scan']['linear_r2']:.4f}; attention R^2 linear "
          f"{fits['attention']['linear_r2']:.4f} vs quadratic {fits['attention']['quadratic_r2']:.4f}")
    return EXIT_OK


# -- parser --------------------------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="mtalk", description="Speech-driven gesture synthesis with selective scans.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("gen-corpus", help="write the synthetic paired corpus")
    s.add_argument("--spec", help="key=value corpus spec file")
    s.add_argument("--out", required=True)
    s.add_argument("--seed", type=int)
    s.set_defaults(func=cmd_gen_corpus)

    s = sub.add_parser("train-vqvae", help="train one body part's VQ-VAE")
    s.add_argument("--corpus", required=True)
    s.add_argument("--part", required=True, choices=PART_NAMES)
    s.add_argument("--config")
    s.add_argument("--out", required=True)
    s.add_argument("--seed", type=int)
    s.set_defaults(func=cmd_train_vqvae)

    s = sub.add_parser("train-gen", help="train the stage-2 generator on frozen VQ-VAEs")
    s.add_argument("--corpus", required=True)
    s.add_argument("--vq-dir", required=True)
    s.add_argument("--config")
    s.add_argument("--out", required=True)
    s.add_argument("--seed", type=int)
    s.set_defaults(func=cmd_train_gen)

    s = sub.add_parser("generate", help="synthesize motion from audio and tokens")
    s.add_argument("--models", required=True)
    s.add_argument("--audio")
    s.add_argument("--tokens")
    s.add_argument("--speaker", type=int)
    s.add_argument("--corpus", help="generate every clip of --split instead of one input")
    s.add_argument("--split", default="test", choices=("train", "val", "test"))
    s.add_argument("--out", required=True)
    s.add_argument("--seed", type=int)
    s.set_defaults(func=cmd_generate)

    s = sub.add_parser("evaluate", help="FGD, BC, diversity and face errors against a corpus")
    s.add_argument("--corpus", required=True)
    s.add_argument("--generated", required=True)
    s.add_argument("--report", required=True)
    s.add_argument("--split", default="test", choices=("train", "val", "test"))
    s.add_argument("--sigma", type=float, default=0.1)
    s.add_argument("--config")
    s.add_argument("--seed", type=int)
    s.set_defaults(func=cmd_evaluate)

    s = sub.add_parser("bench", help="per-module latency and scan-vs-attention scaling")
    s.add_argument("--models", required=True)
    s.add_argument("--lengths", default="256,512,1024,2048,4096,8192")
    s.add_argument("--repeats", type=int, default=5)
    s.add_argument("--duration", type=float, default=8.0)
    s.add_argument("--report", required=True)
    s.add_argument("--seed", type=int)
    s.set_defaults(func=cmd_bench)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        return args.func(args)
    except (UsageError, ConfigError) as exc:
        print(f"mtalk: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (checkpoint.CheckpointError, MissingStage1Error) as exc:
        print(f"mtalk: checkpoint error: {exc}", file=sys.stderr)
        return EXIT_CHECKPOINT
    except (DataError, CorpusFormatError, FileNotFoundError) as exc:
        print(f"mtalk: data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
