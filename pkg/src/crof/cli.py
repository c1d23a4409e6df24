"""Command-line surface: reproducible experiments over the library modules.

Subcommands: gen-synth, inject-noise, fuse, prompt-request, train, sweep,
weights.  Option precedence is built-in defaults < config file (plain-text
``key = value``, ``#`` comments) < command-line flags.  Every run writes a
manifest of the fully resolved options before computing, and re-running with
``--config manifest.txt`` reproduces the outputs byte-identically.
"""

from __future__ import annotations

import argparse
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__, adapter, fusion, store, trainer
from .errors import ConfigError, CrofError
from .weighting import compute_weights, normalize_weights, rank_original


def _read_config_file(path) -> dict:
    values = {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
        key, value = line.split("=", 1)
        values[key.strip().replace("-", "_")] = value.strip()
    return values


def _coerce(raw: str, like):
    if isinstance(like, bool):
        return raw.lower() in ("1", "true", "yes", "on")
    if isinstance(like, int):
        return int(raw)
    if isinstance(like, float):
        return float(raw)
    return raw


def _apply_config_defaults(subparser: argparse.ArgumentParser, config_path) -> None:
    """Install config-file values as the subparser's defaults.

    The caller reparses argv afterwards, so explicitly given flags keep
    precedence over the file, and the file over built-in defaults.
    """
    file_values = _read_config_file(config_path)
    defaults = {
        a.dest: a.default for a in subparser._actions if a.dest != argparse.SUPPRESS
    }
    typed = {}
    for key, raw in file_values.items():
        if key in ("config", "command") or key not in defaults:
            continue  # manifests carry extra bookkeeping keys
        typed[key] = _coerce(raw, defaults[key])
    subparser.set_defaults(**typed)


def _require(args, *names) -> None:
    for name in names:
        if getattr(args, name) in (None, ""):
            raise ConfigError(f"--{name.replace('_', '-')} is required (flag or config file)")


def _write_manifest(out_dir: Path, command: str, args: argparse.Namespace) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    lines = [
        f"# crof {__version__} manifest",
        f"# written {datetime.now(timezone.utc).isoformat()}",
        f"command = {command}",
    ]
    for key in sorted(vars(args)):
        if key in ("command", "config", "func") or key.startswith("_"):
            continue
        value = getattr(args, key)
        if value is None:
            continue
        lines.append(f"{key} = {value}")
    (out_dir / "manifest.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")


# ---------------------------------------------------------------- datasets

def _save_dataset(out: Path, ds: store.FewShotDataset, protos: store.EmbeddingMatrix) -> None:
    store.save_embeddings(ds.images, out / "images.emb")
    store.save_labels(ds.clean_labels, out / "labels.txt")
    store.save_embeddings(protos, out / "prototypes.emb")
    store.save_class_names(ds.class_names, out / "class_names.txt")


def _load_dataset(data_dir) -> tuple[store.FewShotDataset, store.EmbeddingMatrix]:
    """Rebuild a dataset from a gen-synth output directory."""
    data = Path(data_dir)
    manifest = _read_config_file(data / "manifest.txt")
    shots = int(manifest["shots"])
    test_per_class = int(manifest["test_per_class"])
    images = store.load_embeddings(data / "images.emb")
    clean = store.load_labels(data / "labels.txt")
    protos = store.load_embeddings(data / "prototypes.emb")
    names = store.load_class_names(data / "class_names.txt")
    n = protos.rows
    noisy_path = data / "labels_noisy.txt"
    noisy = store.load_labels(noisy_path) if noisy_path.exists() else clean.copy()
    per_class = shots + test_per_class
    block = np.arange(per_class)
    train_idx = np.concatenate([c * per_class + block[:shots] for c in range(n)])
    test_idx = np.concatenate([c * per_class + block[shots:] for c in range(n)])
    ds = store.FewShotDataset(
        images=images,
        clean_labels=clean,
        noisy_labels=noisy,
        n_classes=n,
        shots=shots,
        class_names=names,
        train_idx=train_idx,
        test_idx=test_idx,
    )
    return ds, protos


# ------------------------------------------------------------- subcommands

def cmd_gen_synth(args) -> int:
    _require(args, "out")
    out = Path(args.out)
    _write_manifest(out, "gen-synth", args)
    ds, protos = store.generate_synthetic(
        args.classes, args.dims, args.shots, args.test_per_class, args.sigma, args.seed
    )
    _save_dataset(out, ds, protos)
    return 0


def cmd_inject_noise(args) -> int:
    _require(args, "data")
    data = Path(args.data)
    ds, _ = _load_dataset(data)
    spec = store.NoiseSpec(kind=args.kind, delta=args.delta, seed=args.seed)
    noisy = store.inject_noise(ds, spec)
    store.save_labels(noisy.noisy_labels, data / "labels_noisy.txt")
    return 0


def cmd_fuse(args) -> int:
    _require(args, "sup", "cafo", "out")
    sup = store.load_embeddings(args.sup)
    cafo = store.load_embeddings(args.cafo)
    store.save_embeddings(fusion.fuse(sup, cafo), args.out)
    return 0


def cmd_prompt_request(args) -> int:
    _require(args, "target")
    if args.classes_file:
        names = list(store.load_class_names(args.classes_file))
    else:
        names = [s.strip() for s in (args.classes or "").split(",") if s.strip()]
    text = fusion.build_prompt_request(args.target, names)
    if args.out:
        Path(args.out).write_text(text + "\n", encoding="utf-8")
    else:
        print(text)
    return 0


def _train_config(args) -> trainer.TrainConfig:
    return trainer.TrainConfig(
        alpha=args.alpha,
        beta=args.beta,
        gamma=args.gamma,
        K=args.topk,
        tau=args.tau,
        lam=args.lam,
        lr=args.lr,
        weight_decay=args.weight_decay,
        epochs=args.epochs,
        seed=args.seed,
        use_tpg=not args.no_tpg,
        use_ft=not args.no_ft,
        use_wt=not args.no_wt,
    )


def cmd_train(args) -> int:
    _require(args, "data", "out")
    out = Path(args.out)
    _write_manifest(out, "train", args)
    ds, protos = _load_dataset(args.data)
    text_fused = store.load_embeddings(args.text_fused) if args.text_fused else protos
    text_plain = store.load_embeddings(args.text_plain) if args.text_plain else protos
    cfg = _train_config(args)
    params, metrics = trainer.train(ds, text_fused, text_plain, cfg)
    (out / "metrics.csv").write_text(metrics.to_csv(), encoding="utf-8")
    adapter.save_params(params, out / "params")
    return 0


def cmd_sweep(args) -> int:
    _require(args, "out")
    out = Path(args.out)
    _write_manifest(out, "sweep", args)
    deltas = [float(s) for s in args.deltas.split(",") if s.strip()]
    seeds = [int(s) for s in args.seeds.split(",") if s.strip()]
    toggle_sets = [
        tuple(p for p in group.split("+") if p and p != "none")
        for group in args.toggles.split(";")
        if group.strip()
    ]
    cfg = _train_config(args)

    def factory(seed):
        return store.generate_synthetic(
            args.classes, args.dims, args.shots, args.test_per_class, args.sigma, seed
        )

    csv = trainer.sweep(cfg, deltas, seeds, factory, toggle_sets, noise_kind=args.kind)
    (out / "sweep.csv").write_text(csv, encoding="utf-8")
    return 0


def cmd_weights(args) -> int:
    _require(args, "logits")
    if args.original is None:
        raise ConfigError("--original is required (flag or config file)")
    z = np.array([float(s) for s in args.logits.split(",") if s.strip()])
    names = (
        list(store.load_class_names(args.classes_file))
        if args.classes_file
        else [f"class_{i}" for i in range(len(z))]
    )
    if len(names) != len(z):
        raise ConfigError("class-name count must match logit count")
    rs = rank_original(z, args.original, args.topk)
    wv = normalize_weights(compute_weights(rs, args.alpha, args.beta, args.gamma), rs)
    scenario = 1 if rs.r == 1 else (2 if rs.r <= rs.K else 3)
    print(f"# r={rs.r} scenario={scenario} K={rs.K}")
    print("rank,class_index,class_name,logit,w,w_star")
    for pos in range(rs.K):
        idx = int(rs.order[pos])
        print(
            f"{pos + 1},{idx},{names[idx]},"
            f"{float(rs.logits[pos])!r},{float(wv.w[pos])!r},{float(wv.w_star[pos])!r}"
        )
    return 0


# ------------------------------------------------------------------ parser

def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="config file (key = value lines, # comments)")
    p.add_argument("--seed", type=int, default=0, help="RNG seed (default 0)")


def _add_synth_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--classes", type=int, default=20, help="number of classes (default 20)")
    p.add_argument("--dims", type=int, default=32, help="embedding dims (default 32)")
    p.add_argument("--shots", type=int, default=10, help="train samples per class (default 10)")
    p.add_argument(
        "--test-per-class", type=int, default=50, help="test samples per class (default 50)"
    )
    p.add_argument("--sigma", type=float, default=0.4, help="feature spread (default 0.4)")


def _add_train_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--alpha", type=float, default=0.8, help="original-label loyalty (default 0.8)")
    p.add_argument("--beta", type=float, default=0.8, help="top-1 confidence (default 0.8)")
    p.add_argument("--gamma", type=float, default=0.9, help="rank decay (default 0.9)")
    p.add_argument("--topk", type=int, default=3, help="candidate count K (default 3)")
    p.add_argument("--tau", type=float, default=0.01, help="softmax temperature (default 0.01)")
    p.add_argument("--lam", type=float, default=0.2, help="residual ratio (default 0.2)")
    p.add_argument("--lr", type=float, default=1e-3, help="base learning rate (default 1e-3)")
    p.add_argument(
        "--weight-decay", type=float, default=1e-2, help="AdamW decay (default 1e-2)"
    )
    p.add_argument("--epochs", type=int, default=50, help="training epochs (default 50)")
    p.add_argument("--no-tpg", action="store_true", help="use the plain text matrix")
    p.add_argument("--no-ft", action="store_true", help="skip fine-tuning (zero-shot only)")
    p.add_argument("--no-wt", action="store_true", help="plain CE on the noisy label")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="crof", description=__doc__)
    parser.add_argument("--version", action="version", version=f"crof {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-synth", help="generate a synthetic embedding dataset")
    _add_common(p)
    _add_synth_flags(p)
    p.add_argument("--out", help="output directory (required)")
    p.set_defaults(func=cmd_gen_synth, _parser=p)

    p = sub.add_parser("inject-noise", help="corrupt train labels in place")
    _add_common(p)
    p.add_argument("--data", help="gen-synth output directory (required)")
    p.add_argument(
        "--kind", choices=("symmetric", "asymmetric"), default="symmetric",
        help="noise model (default symmetric)",
    )
    p.add_argument("--delta", type=float, default=0.0, help="noise ratio in [0,1] (default 0)")
    p.set_defaults(func=cmd_inject_noise, _parser=p)

    p = sub.add_parser("fuse", help="fuse supplement and baseline text embeddings")
    _add_common(p)
    p.add_argument("--sup", help="supplement-description CROFEMB1 file (required)")
    p.add_argument("--cafo", help="baseline-description CROFEMB1 file (required)")
    p.add_argument("--out", help="output CROFEMB1 file (required)")
    p.set_defaults(func=cmd_fuse, _parser=p)

    p = sub.add_parser("prompt-request", help="emit the description-request text")
    _add_common(p)
    p.add_argument("--target", help="task target, e.g. flower (required)")
    p.add_argument("--classes", help="comma-separated class names")
    p.add_argument("--classes-file", help="file with one class name per line")
    p.add_argument("--out", help="write to file instead of stdout")
    p.set_defaults(func=cmd_prompt_request, _parser=p)

    p = sub.add_parser("train", help="fine-tune the adapter on a dataset directory")
    _add_common(p)
    _add_train_flags(p)
    p.add_argument("--data", help="gen-synth output directory (required)")
    p.add_argument("--text-fused", help="fused text CROFEMB1 (default: prototypes)")
    p.add_argument("--text-plain", help="plain text CROFEMB1 (default: prototypes)")
    p.add_argument("--out", help="output directory (required)")
    p.set_defaults(func=cmd_train, _parser=p)

    p = sub.add_parser("sweep", help="noise-ratio x toggles x seed grid on synthetic data")
    _add_common(p)
    _add_synth_flags(p)
    _add_train_flags(p)
    p.add_argument("--deltas", default="0,0.2,0.4,0.6,0.8", help="comma-separated noise ratios")
    p.add_argument("--seeds", default="0,1,2,3,4", help="comma-separated seeds")
    p.add_argument(
        "--toggles", default="ft;ft+wt",
        help="semicolon-separated toggle sets, e.g. 'none;ft;ft+wt;tpg+ft+wt'",
    )
    p.add_argument(
        "--kind", choices=("symmetric", "asymmetric"), default="symmetric",
        help="noise model (default symmetric)",
    )
    p.add_argument("--out", help="output directory (required)")
    p.set_defaults(func=cmd_sweep, _parser=p)

    p = sub.add_parser("weights", help="inspect the weight vector for one sample")
    _add_common(p)
    p.add_argument("--logits", help="comma-separated per-class logits (required)")
    p.add_argument("--original", type=int, help="original label index (required)")
    p.add_argument("--topk", type=int, default=3, help="candidate count K (default 3)")
    p.add_argument("--alpha", type=float, default=0.8, help="original-label loyalty (default 0.8)")
    p.add_argument("--beta", type=float, default=0.8, help="top-1 confidence (default 0.8)")
    p.add_argument("--gamma", type=float, default=0.9, help="rank decay (default 0.9)")
    p.add_argument("--classes-file", help="file with one class name per line")
    p.set_defaults(func=cmd_weights, _parser=p)

    return parser


def main(argv=None) -> int:
    if argv is None:
        argv = sys.argv[1:]
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if getattr(args, "config", None):
            _apply_config_defaults(args._parser, args.config)
            args = parser.parse_args(argv)
        return args.func(args)
    except CrofError as exc:
        print(f"crof: error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
