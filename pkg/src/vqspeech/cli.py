"""Command-line entry point.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
Env var VQLAB_SEED overrides --seed when set. An effective-config JSON dump
is written beside every primary output for provenance.
"""

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import adversarial, corpus, enhance, evaluate, gradsuite, scoring, train
from .dsp import StftConfig, write_wav
from .errors import DataError, NumericalError
from .model import config_to_dict, qe_preset, se_preset


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"error: {message}\n")
        sys.exit(1)


def _load_config_file(path):
    path = Path(path)
    text = path.read_text()
    if path.suffix == ".toml":
        import tomllib

        return tomllib.loads(text)
    return json.loads(text)


def _effective_seed(args):
    env = os.environ.get("VQLAB_SEED")
    if env is not None:
        return int(env)
    return args.seed


def _stft_cfg(args, file_cfg):
    d = dict(file_cfg.get("dsp", {}))
    return StftConfig(
        fft_size=args.fft or d.get("fft", 512),
        win_length=args.win or d.get("win", 512),
        hop=args.hop or d.get("hop", 256),
    )


def _dump_effective_config(out_path, payload):
    out_path = Path(out_path)
    target = out_path / "effective_config.json" if out_path.is_dir() else \
        out_path.with_suffix(out_path.suffix + ".config.json")
    target.parent.mkdir(parents=True, exist_ok=True)
    target.write_text(json.dumps(payload, indent=2, sort_keys=True, default=str))


def _add_common(p):
    p.add_argument("--config", help="TOML/JSON config file")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--fft", type=int, default=None)
    p.add_argument("--win", type=int, default=None)
    p.add_argument("--hop", type=int, default=None)
    p.add_argument("--jobs", type=int, default=1,
                   help="per-file parallelism (1 keeps byte determinism)")


def build_parser():
    parser = _Parser(prog="vqspeech")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate the synthetic corpus")
    _add_common(p)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--duration", type=float, default=2.0)
    p.add_argument("--snrs", default=None,
                   help="comma list of SNRs (dB); also emits a noisy set")
    p.add_argument("--kinds", default="white",
                   help="comma list of noise kinds (white,pink,babble)")

    for name, preset in (("train-qe", "qe"), ("train-se", "se")):
        p = sub.add_parser(name, help=f"step-1 training ({preset} preset)")
        _add_common(p)
        p.add_argument("--data", required=True, help="clean manifest JSONL")
        p.add_argument("--out", required=True, help="checkpoint path")
        p.add_argument("--val", default=None, help="labeled validation manifest")
        p.add_argument("--steps", type=int, default=500)
        p.add_argument("--batch", type=int, default=8)
        p.add_argument("--crop", type=int, default=128)
        p.add_argument("--lr", type=float, default=1e-4)
        p.add_argument("--v", type=int, default=None, help="codebook size override")
        p.add_argument("--d", type=int, default=None, help="code dim override")
        p.add_argument("--c1", type=int, default=None)
        p.add_argument("--c2", type=int, default=None)
        p.add_argument("--val-every", type=int, default=0)
        p.add_argument("--patience", type=int, default=0)
        p.add_argument("--log", default=None, help="JSONL train log path")

    p = sub.add_parser("distill", help="step-2 adversarial self-distillation")
    _add_common(p)
    p.add_argument("--teacher", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--attack-steps", type=int, default=3)
    p.add_argument("--eps", type=float, default=None,
                   help="L-inf budget; default 0.01 * mean max|X|")
    p.add_argument("--steps", type=int, default=200)
    p.add_argument("--batch", type=int, default=4)
    p.add_argument("--crop", type=int, default=64)
    p.add_argument("--lr", type=float, default=1e-4)
    p.add_argument("--lambda-dec", type=float, default=1.0)
    p.add_argument("--mode", choices=["adversarial", "gaussian"],
                   default="adversarial")
    p.add_argument("--log", default=None)

    p = sub.add_parser("score", help="VQScore reports for wav files")
    _add_common(p)
    p.add_argument("--model", required=True)
    p.add_argument("--in", dest="inp", required=True,
                   help="directory of wavs or manifest JSONL")
    p.add_argument("--out", required=True, help="scores JSONL")
    p.add_argument("--csv", default=None, help="optional CSV summary")

    p = sub.add_parser("enhance", help="enhance wav files")
    _add_common(p)
    p.add_argument("--model", required=True)
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--alpha", type=float, default=1.0,
                   help="dry/wet knob; output covers interior samples only")

    for name in ("eval-qe", "eval-se", "eval-frame"):
        p = sub.add_parser(name)
        _add_common(p)
        p.add_argument("--model", required=True)
        p.add_argument("--manifest", required=True)
        p.add_argument("--out", required=True, help="JSON report path")

    p = sub.add_parser("gradcheck", help="finite-difference gradient suite")
    _add_common(p)

    p = sub.add_parser("inspect-ckpt", help="print checkpoint metadata")
    _add_common(p)
    p.add_argument("path")
    return parser


def _wav_inputs(inp):
    inp = Path(inp)
    if inp.is_dir():
        return [(p.stem, str(p)) for p in sorted(inp.glob("*.wav"))]
    rows = corpus.load_manifest(inp)
    return [(r["id"], r.get("noisy_path") or r["clean_path"]) for r in rows]


def _model_overrides(args):
    out = {}
    for key in ("v", "d", "c1", "c2"):
        val = getattr(args, key, None)
        if val is not None:
            out[key] = val
    return out


def _cmd_synth(args, file_cfg, seed):
    rows = corpus.synth_clean(args.n, seed, args.out, duration_s=args.duration)
    made = {"clean": len(rows)}
    if args.snrs:
        snrs = [float(s) for s in args.snrs.split(",")]
        kinds = args.kinds.split(",")
        noisy = corpus.make_noisy_set(rows, snrs, kinds, seed, args.out)
        made["noisy"] = len(noisy)
    _dump_effective_config(Path(args.out), {"command": "synth", "n": args.n,
                                            "seed": seed, "snrs": args.snrs,
                                            "kinds": args.kinds})
    print(json.dumps(made))
    return 0


def _cmd_train(args, file_cfg, seed, preset_fn):
    stft_cfg = _stft_cfg(args, file_cfg)
    model_cfg = preset_fn(f_bins=stft_cfg.bins, **_model_overrides(args))
    train_cfg = train.TrainConfig(
        batch_size=args.batch, crop_frames=args.crop, max_steps=args.steps,
        lr=args.lr, seed=seed, val_every=args.val_every,
        early_stop_patience=args.patience,
    )
    rows = corpus.load_manifest(args.data)
    val_rows = corpus.load_manifest(args.val) if args.val else None
    model, log_rows = train.train_qe(rows, model_cfg, train_cfg,
                                     val_rows=val_rows, stft_cfg=stft_cfg,
                                     log_path=args.log)
    train.save_checkpoint(model, args.out)
    _dump_effective_config(Path(args.out), {
        "command": args.command, "seed": seed,
        "model": config_to_dict(model_cfg), "train": vars(args)})
    print(json.dumps({"steps": len(log_rows), "final": log_rows[-1],
                      "checkpoint": args.out}))
    return 0


def _cmd_distill(args, file_cfg, seed):
    stft_cfg = _stft_cfg(args, file_cfg)
    teacher = train.load_checkpoint(args.teacher)
    rows = corpus.load_manifest(args.data)
    specs = train.load_spectrograms(rows, stft_cfg)
    eps = args.eps if args.eps is not None else adversarial.default_epsilon(specs)
    attack_cfg = adversarial.AttackConfig(eps=eps, steps=args.attack_steps)
    train_cfg = train.TrainConfig(batch_size=args.batch, crop_frames=args.crop,
                                  max_steps=args.steps, lr=args.lr, seed=seed)
    state = adversarial.make_distill_state(teacher, lambda_dec=args.lambda_dec)
    student, log_rows = adversarial.run_step2(
        state, specs, attack_cfg, train_cfg, log_path=args.log, mode=args.mode)
    train.save_checkpoint(student, args.out)
    _dump_effective_config(Path(args.out), {
        "command": "distill", "seed": seed, "eps": eps,
        "attack_steps": args.attack_steps, "mode": args.mode})
    print(json.dumps({"steps": len(log_rows), "final": log_rows[-1],
                      "checkpoint": args.out}))
    return 0


def _cmd_score(args, file_cfg, seed):
    stft_cfg = _stft_cfg(args, file_cfg)
    model = train.load_checkpoint(args.model)
    reports = [scoring.score_wav(path, model, stft_cfg, utterance_id=uid)
               for uid, path in _wav_inputs(args.inp)]
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w") as f:
        for r in reports:
            f.write(json.dumps(r.to_dict()) + "\n")
    if args.csv:
        with open(args.csv, "w") as f:
            f.write("id,vqscore_cos_z,vqscore_cos_x,vqscore_l2_z,vqscore_l2_x\n")
            for r in reports:
                f.write(f"{r.utterance_id},{r.vqscore_cos_z},{r.vqscore_cos_x},"
                        f"{r.vqscore_l2_z},{r.vqscore_l2_x}\n")
    _dump_effective_config(out, {"command": "score", "model": args.model,
                                 "in": args.inp})
    print(json.dumps({"scored": len(reports), "out": str(out)}))
    return 0


def _cmd_enhance(args, file_cfg, seed):
    stft_cfg = _stft_cfg(args, file_cfg)
    model = train.load_checkpoint(args.model)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    count = 0
    for uid, path in _wav_inputs(args.inp):
        clip = enhance.enhance_wav(path, model, stft_cfg, alpha=args.alpha)
        write_wav(clip, out_dir / f"{uid}.wav")
        count += 1
    _dump_effective_config(out_dir, {"command": "enhance", "model": args.model,
                                     "alpha": args.alpha})
    print(json.dumps({"enhanced": count, "out": str(out_dir)}))
    return 0


def _cmd_eval(args, file_cfg, seed):
    stft_cfg = _stft_cfg(args, file_cfg)
    model = train.load_checkpoint(args.model)
    rows = corpus.load_manifest(args.manifest)
    if args.command == "eval-qe":
        report = evaluate.eval_qe(model, rows, stft_cfg)
    elif args.command == "eval-se":
        report = evaluate.eval_se(model, rows, stft_cfg)
    else:
        report = evaluate.eval_frame_quality(model, rows, stft_cfg)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(json.dumps(report, indent=2, default=float))
    _dump_effective_config(out, {"command": args.command, "model": args.model,
                                 "manifest": args.manifest})
    print(json.dumps({"out": str(out)}))
    return 0


def _cmd_gradcheck(args, file_cfg, seed):
    results = gradsuite.run_suite()
    all_ok = True
    for op, (err, tol, ok) in results.items():
        print(f"{op:26s} max_rel_err={err:.3e} tol={tol:g} "
              f"{'PASS' if ok else 'FAIL'}")
        all_ok &= ok
    return 0 if all_ok else 3


def _cmd_inspect(args, file_cfg, seed):
    version, meta, blobs = train.read_checkpoint_meta(args.path)
    print(f"version: {version}")
    print(f"config: {json.dumps(meta['config'], sort_keys=True)}")
    print(f"codebook: {json.dumps(meta['codebook'], sort_keys=True)}")
    print(f"{'name':28s} {'dtype':6s} {'shape':16s} {'offset':>10s} {'length':>10s}")
    for t in meta["tensors"]:
        print(f"{t['name']:28s} {t['dtype']:6s} {str(t['shape']):16s} "
              f"{t['offset']:>10d} {t['length']:>10d}")
    print(f"blob bytes: {len(blobs)}; CRC verified")
    return 0


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    file_cfg = _load_config_file(args.config) if args.config else {}
    seed = _effective_seed(args)
    np.seterr(all="ignore")
    handlers = {
        "synth": _cmd_synth,
        "train-qe": lambda a, c, s: _cmd_train(a, c, s, qe_preset),
        "train-se": lambda a, c, s: _cmd_train(a, c, s, se_preset),
        "distill": _cmd_distill,
        "score": _cmd_score,
        "enhance": _cmd_enhance,
        "eval-qe": _cmd_eval,
        "eval-se": _cmd_eval,
        "eval-frame": _cmd_eval,
        "gradcheck": _cmd_gradcheck,
        "inspect-ckpt": _cmd_inspect,
    }
    try:
        return handlers[args.command](args, file_cfg, seed)
    except NumericalError as e:
        sys.stderr.write(f"numerical failure: {e}\n")
        return 3
    except DataError as e:
        sys.stderr.write(f"data error: {e}\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
