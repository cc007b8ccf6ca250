"""Command line entry point: ``lanekit {encode,decode,loss,eval,synth,bench}``."""
from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import io
from .decoder import decode
from .encoder import encode
from .geometry import InvalidConfigError, InvalidCurveError
from .losses import LogitMaps, UndefinedLossError, total_loss
from .metrics import eval_culane, eval_tusimple, scaled_width
from .synth import InfeasibleSceneError, gen_scene, perturb, render_ideal

log = logging.getLogger("lanekit")


def fmt(v) -> str:
    return f"{v:.6g}" if isinstance(v, float) else str(v)


def _round(obj):
    if isinstance(obj, float):
        return float(f"{obj:.6g}")
    if isinstance(obj, dict):
        return {k: _round(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_round(v) for v in obj]
    return obj


def _config(args) -> io.RunConfig:
    cfg = io.load_config(args.config) if getattr(args, "config", None) else io.RunConfig()
    enc, dec, loss = cfg.encoder, cfg.decoder, cfg.loss
    if getattr(args, "dy", None) is not None:
        enc = dataclasses.replace(enc, dy=args.dy)
        dec = dataclasses.replace(dec, dy=args.dy)
        loss = dataclasses.replace(loss, dy=args.dy)
    if getattr(args, "sigma_h", None) is not None:
        enc = dataclasses.replace(enc, sigma_h=args.sigma_h)
    if getattr(args, "sigma_g", None) is not None:
        enc = dataclasses.replace(enc, sigma_g=args.sigma_g)
    if getattr(args, "theta_h", None) is not None:
        dec = dataclasses.replace(dec, theta_h=args.theta_h)
    return dataclasses.replace(cfg, encoder=enc, decoder=dec, loss=loss)


def _read_logits(path) -> LogitMaps:
    t = io.read_tensor(path)
    if t.ndim != 3 or t.shape[0] != 4:
        raise io.FormatError(f"{path}: expected a (4, H, W) logit tensor, got {t.shape}")
    return LogitMaps.from_stack(t.astype(np.float64))


def _emit(doc: dict, json_path):
    if json_path:
        Path(json_path).write_text(json.dumps(_round(doc), indent=1) + "\n")


def cmd_encode(args):
    cfg = _config(args)
    lf = io.read_lanes(args.lanes)
    gt = encode(lf.lanes, lf.image, cfg.encoder)
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    io.write_tensor(out / "targets.lkt", np.stack([gt.heat, gt.off_up, gt.off_mid, gt.off_down]))
    io.write_tensor(out / "mask.lkt", gt.mask)
    print(f"wrote {out / 'targets.lkt'} and {out / 'mask.lkt'}")


def cmd_decode(args):
    cfg = _config(args)
    logits = _read_logits(args.logits)
    lanes = decode(logits, cfg.decoder, args.decoder)
    h, w = logits.shape
    io.write_lanes(args.output, io.LaneFile(io.ImageSpec(w, h), io.lanes_from_decoded(lanes)))
    print(f"{len(lanes)} lane(s) -> {args.output}")


def cmd_loss(args):
    cfg = _config(args)
    logits = _read_logits(args.logits)
    lf = io.read_lanes(args.lanes)
    h, w = logits.shape
    if (lf.image.height, lf.image.width) != (h, w):
        raise io.FormatError(f"{args.lanes}: image size {lf.image.width}x{lf.image.height} != logits {w}x{h}")
    gt = encode(lf.lanes, lf.image, cfg.encoder)
    rep = total_loss(logits, gt, lf.lanes, cfg.loss)
    for k, v in rep.as_dict().items():
        print(f"{k:<10} {fmt(v)}")
    _emit(rep.as_dict(), args.json)


def cmd_eval(args):
    if len(args.pred) != len(args.gt):
        raise io.FormatError("--pred and --gt need the same number of files")
    preds = [io.read_lanes(p) for p in args.pred]
    gts = [io.read_lanes(g) for g in args.gt]
    if args.metric == "tusimple":
        rep = eval_tusimple([p.lanes for p in preds], [g.lanes for g in gts],
                            pt_thresh=args.pt_thresh, match_thresh=args.match_thresh)
        doc = rep.as_dict()
        for k in ("accuracy", "fp", "fn"):
            print(f"{k:<10} {fmt(doc[k])}")
    else:
        spec = gts[0].image
        width = args.width if args.width is not None else scaled_width(spec)
        rep = eval_culane([p.lanes for p in preds], [g.lanes for g in gts], spec,
                          iou_thresh=args.iou_thresh, width=width)
        doc = rep.as_dict()
        for k, v in doc.items():
            print(f"{k:<10} {fmt(v)}")
    _emit(doc, args.json)


def cmd_synth(args):
    cfg = io.consistent(_config(args))
    curves = gen_scene(cfg.scene)
    spec = cfg.scene.image
    ideal = render_ideal(curves, spec, cfg.encoder)
    noisy = perturb(ideal, cfg.noise, dy=cfg.encoder.dy, sigma_h=cfg.encoder.sigma_h,
                    theta_h=cfg.decoder.theta_h)
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    io.write_lanes(out / "lanes.json", io.LaneFile(spec, curves))
    io.write_tensor(out / "ideal.lkt", ideal.stack())
    io.write_tensor(out / "perturbed.lkt", noisy.stack())
    print(f"{len(curves)} lane(s) -> {out}")


def cmd_bench(args):
    from .bench import run_bench

    cfg = io.consistent(_config(args))
    if args.scenes is not None:
        cfg = dataclasses.replace(cfg, bench=dataclasses.replace(cfg.bench, n_scenes=args.scenes))
    res = run_bench(cfg)
    for name in ("greedy", "efficient"):
        r = res[name]
        print(f"{name:<10} median {fmt(r['median_ms'])} ms  p95 {fmt(r['p95_ms'])} ms")
    print(f"speedup    {fmt(res['speedup'])}")
    doc = _round(res)
    if args.json:
        Path(args.json).write_text(json.dumps(doc, indent=1) + "\n")
    else:
        print(json.dumps(doc))


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="lanekit", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, enc=True, dec=False):
        sp.add_argument("--config", help="YAML/JSON run config")
        sp.add_argument("--dy", type=int)
        if enc:
            sp.add_argument("--sigma-h", type=float)
            sp.add_argument("--sigma-g", type=float)
        if dec:
            sp.add_argument("--theta-h", type=float)

    sp = sub.add_parser("encode", help="lane file -> target tensors")
    sp.add_argument("lanes")
    sp.add_argument("-o", "--output", required=True, help="output directory")
    common(sp)
    sp.set_defaults(func=cmd_encode)

    sp = sub.add_parser("decode", help="logit tensor -> lane file")
    sp.add_argument("logits")
    sp.add_argument("-o", "--output", required=True)
    sp.add_argument("--decoder", choices=["greedy", "efficient"], default="greedy")
    common(sp, enc=False, dec=True)
    sp.set_defaults(func=cmd_decode)

    sp = sub.add_parser("loss", help="loss components of logits against lanes")
    sp.add_argument("logits")
    sp.add_argument("lanes")
    sp.add_argument("--json")
    common(sp)
    sp.set_defaults(func=cmd_loss)

    sp = sub.add_parser("eval", help="score predicted lanes against ground truth")
    sp.add_argument("--pred", nargs="+", required=True)
    sp.add_argument("--gt", nargs="+", required=True)
    sp.add_argument("--metric", choices=["tusimple", "culane"], default="tusimple")
    sp.add_argument("--pt-thresh", type=float, default=20.0)
    sp.add_argument("--match-thresh", type=float, default=0.85)
    sp.add_argument("--iou-thresh", type=float, default=0.5)
    sp.add_argument("--width", type=float, help="CULane mask width (default: 30 px scaled from 1640 wide)")
    sp.add_argument("--json")
    sp.set_defaults(func=cmd_eval)

    sp = sub.add_parser("synth", help="generate a scene with ideal and perturbed logits")
    sp.add_argument("config", nargs="?")
    sp.add_argument("-o", "--output", required=True)
    sp.set_defaults(func=cmd_synth)

    sp = sub.add_parser("bench", help="time greedy vs efficient decoding")
    sp.add_argument("config", nargs="?")
    sp.add_argument("--scenes", type=int)
    sp.add_argument("--json")
    sp.set_defaults(func=cmd_bench)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        args.func(args)
    except OSError as exc:
        print(f"lanekit: error: {exc.filename or ''}: {exc.strerror or exc}", file=sys.stderr)
        return 1
    except (io.FormatError, InvalidConfigError, InvalidCurveError, UndefinedLossError,
            InfeasibleSceneError, ValueError) as exc:
        print(f"lanekit: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
