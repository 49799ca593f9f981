"""Command-line entry point.

Subcommands: synth, train, infer, eval, guide-replay, transform, bench.
Set LYTNET_LOG=debug|info|warning to control verbosity.
"""

import argparse
import json
import logging
import os
import sys
import time

import numpy as np
from PIL import Image

from . import kernels
from .data import generate_dataset, image_to_array, load_frame, read_manifest
from .evaluation import EvalRecord, read_records, report
from .geometry import Homography, birdseye_angle
from .guidance import replay
from .lytw import load_weights
from .network import CLASS_NAMES, NetworkConfig, build_lytnet
from .tensor import no_grad, softmax
from .training import TrainConfig, train

log = logging.getLogger("lytnet")

TABLE_WIDTHS = (1.4, 1.25, 1.0, 0.9375, 0.875, 0.75, 0.5)


def _existing_file(path):
    if not os.path.isfile(path):
        raise argparse.ArgumentTypeError(f"file not found: {path}")
    return path


def _input_size(text):
    try:
        h, w = (int(v) for v in text.lower().split("x"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected HxW, got {text!r}") from None
    if h % 64 or w % 64:
        raise argparse.ArgumentTypeError(f"input dims must be divisible by 64, got {h}x{w}")
    return h, w


def _size_wh(text):
    try:
        w, h = (int(v) for v in text.lower().split("x"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected WxH, got {text!r}") from None
    return w, h


def _point(text):
    try:
        x, y = (float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected x,y got {text!r}") from None
    return x, y


def _widths(text):
    try:
        return tuple(float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated widths, got {text!r}") from None


def _homography_from(args) -> Homography:
    if getattr(args, "homography", None):
        return Homography.from_file(args.homography)
    return Homography.default()


def _open_out(path):
    return open(path, "w", encoding="utf-8") if path else sys.stdout


def _build_net(alpha, input_size, seed, weights=None):
    h, w = input_size
    net, _ = build_lytnet(NetworkConfig(width_multiplier=alpha, input_height=h,
                                        input_width=w), seed=seed)
    if weights:
        net.parameters.load_state(load_weights(weights))
    return net


def _infer_frames(net, image_paths, input_size):
    """Yield (path, probs, endpoints) per image, inference mode."""
    h, w = input_size
    with no_grad():
        for path in image_paths:
            img = Image.open(path)
            if img.size != (w, h):
                img = img.resize((w, h), Image.BILINEAR)
            x = image_to_array(img)[None]
            logits, endpoints = net.forward(x, training=False)
            probs = softmax(logits).data[0]
            yield path, [float(v) for v in probs], [float(v) for v in endpoints.data[0]]


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_synth(args):
    manifest = generate_dataset(
        args.out, args.count, args.seed,
        width=args.size[0], height=args.size[1],
        obstructed_prob=args.obstructed_prob,
        crossing_free_none_prob=args.no_crossing_prob,
    )
    print(manifest)
    return 0


def cmd_train(args):
    config = TrainConfig(
        omega=args.omega,
        weight_decay=args.weight_decay,
        batch_size=args.batch_size,
        epochs=args.epochs,
        seed=args.seed,
        width_multiplier=args.alpha,
        input_height=args.input_size[0],
        input_width=args.input_size[1],
        augment=not args.no_augment,
        checkpoint_interval=args.checkpoint_interval,
        stop_at_accuracy=args.early_stop_accuracy,
        stop_at_loss=args.early_stop_loss,
    )
    metrics_out = args.metrics_log or (args.out + ".metrics.jsonl")

    def progress(entry):
        log.info("epoch %d loss %.4f accuracy %.3f lr %g",
                 entry["epoch"], entry["loss"], entry["accuracy"], entry["lr"])

    _, metrics = train(args.manifest, config, weights_out=args.out,
                       metrics_out=metrics_out, progress=progress)
    final = metrics[-1]
    print(json.dumps({"epochs_run": len(metrics), "final_loss": final["loss"],
                      "final_accuracy": final["accuracy"], "weights": args.out,
                      "metrics_log": metrics_out}))
    return 0


def cmd_infer(args):
    net = _build_net(args.alpha, args.input_size, seed=0, weights=args.weights)
    out = _open_out(args.out)
    try:
        for path, probs, endpoints in _infer_frames(net, args.images, args.input_size):
            out.write(json.dumps({"path": path, "probs": probs,
                                  "endpoints": endpoints}) + "\n")
    finally:
        if out is not sys.stdout:
            out.close()
    return 0


def cmd_eval(args):
    if args.records:
        records = read_records(args.records)
    else:
        if not (args.manifest and args.weights):
            raise ValueError("eval needs --records, or --manifest together with --weights")
        manifest_records = read_manifest(args.manifest)
        base = os.path.dirname(os.path.abspath(args.manifest))
        net = _build_net(args.alpha, args.input_size, seed=0, weights=args.weights)
        paths = [os.path.join(base, r["path"]) if not os.path.isabs(r["path"]) else r["path"]
                 for r in manifest_records]
        records = []
        for rec, (_, probs, endpoints) in zip(manifest_records,
                                              _infer_frames(net, paths, args.input_size)):
            records.append(EvalRecord(
                pred_class=CLASS_NAMES[int(np.argmax(probs))],
                true_class=rec["class"],
                pred_endpoints=tuple(endpoints),
                true_endpoints=(rec["x1"], rec["y1"], rec["x2"], rec["y2"]),
                obstructed=rec["obstructed"],
            ))
    text = report(records, format=args.format)
    print(text)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as f:
            f.write(text + "\n")
    return 0


def cmd_guide_replay(args):
    hom = _homography_from(args)
    out = _open_out(args.out)
    try:
        with open(args.input, "r", encoding="utf-8") as f:
            for decision in replay(f, image_width=args.width, homography=hom):
                out.write(json.dumps(decision.to_json_dict()) + "\n")
    finally:
        if out is not sys.stdout:
            out.close()
    return 0


def cmd_transform(args):
    hom = _homography_from(args)
    mapped = [hom.apply(p) for p in args.points]
    if args.format == "json":
        payload = {"points": [[x, y] for x, y in mapped]}
        if len(args.points) == 2:
            (x1, y1), (x2, y2) = args.points
            payload["delta_theta"] = birdseye_angle((x1, y1, x2, y2), hom)
        print(json.dumps(payload))
        return 0
    for (x, y) in mapped:
        print(f"{x:.3f},{y:.3f}")
    if len(args.points) == 2:
        (x1, y1), (x2, y2) = args.points
        print(f"delta_theta: {birdseye_angle((x1, y1, x2, y2), hom):.3f}")
    return 0


def _measure_throughput(net, input_size, batch, repeats, rng):
    h, w = input_size
    x = rng.uniform(0.0, 1.0, size=(batch, 3, h, w)).astype(np.float32)
    with no_grad():
        net.forward(x, training=False)  # warmup
        best = float("inf")
        for _ in range(repeats):
            t0 = time.perf_counter()
            net.forward(x, training=False)
            best = min(best, time.perf_counter() - t0)
    return batch / best


def cmd_bench(args):
    if any(a <= 0 for a in args.widths):
        raise ValueError(f"width multipliers must be positive: {args.widths}")
    backends = ([kernels.backend_name()] if args.backends == "active"
                else kernels.available_backends() if args.backends == "both"
                else [args.backends])
    rng = np.random.default_rng(args.seed)
    rows = []
    for alpha in args.widths:
        net = _build_net(alpha, args.input_size, seed=args.seed)
        row = {"alpha": alpha, "flops": net.count_flops()}
        for name in backends:
            with kernels.use_backend(name):
                row[f"ips_{name}"] = _measure_throughput(
                    net, args.input_size, args.batch, args.repeats, rng)
        rows.append(row)

    if args.format == "json":
        print(json.dumps({"input_size": list(args.input_size), "batch": args.batch,
                          "backends": backends, "rows": rows}))
        return 0

    cols = [f"ips_{name}" for name in backends]
    header = f"{'alpha':>8} {'MACs':>14}" + "".join(f" {c:>14}" for c in cols)
    print(header)
    for row in rows:
        line = f"{row['alpha']:>8g} {row['flops']:>14d}"
        for c in cols:
            line += f" {row[c]:>14.2f}"
        print(line)
    by_flops = sorted(rows, key=lambda r: r["flops"])
    for c in cols:
        ips = [r[c] for r in by_flops]
        if any(b > a * 1.0 for a, b in zip(ips, ips[1:]) if b > a):
            inversions = sum(1 for a, b in zip(ips, ips[1:]) if b > a)
            print(f"note: {inversions} throughput inversion(s) vs FLOPs ordering for {c} "
                  f"(timing noise)")
    return 0


# ---------------------------------------------------------------------------

def build_parser():
    parser = argparse.ArgumentParser(
        prog="lytnet",
        description="Traffic-light + zebra-crossing guidance pipeline",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common_net(p):
        p.add_argument("--alpha", type=float, default=1.0, help="width multiplier")
        p.add_argument("--input-size", type=_input_size, default=(576, 768),
                       metavar="HxW", help="network input dims, divisible by 64")
        p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("synth", help="generate a labeled synthetic dataset")
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--size", type=_size_wh, default=(876, 657), metavar="WxH",
                   help="stored image size (pre-crop)")
    p.add_argument("--obstructed-prob", type=float, default=0.0)
    p.add_argument("--no-crossing-prob", type=float, default=0.0,
                   help="probability that a none-class frame has no crossing")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="train on a manifest, write LYTW weights")
    p.add_argument("--manifest", type=_existing_file, required=True)
    p.add_argument("--out", required=True, help="weights output path")
    p.add_argument("--metrics-log", default=None, help="JSONL metrics path")
    p.add_argument("--epochs", type=int, default=300)
    p.add_argument("--batch-size", type=int, default=8)
    p.add_argument("--omega", type=float, default=0.5)
    p.add_argument("--weight-decay", type=float, default=1e-5)
    p.add_argument("--no-augment", action="store_true",
                   help="disable random crop/flip (images must match input size)")
    p.add_argument("--checkpoint-interval", type=int, default=0)
    p.add_argument("--early-stop-accuracy", type=float, default=None)
    p.add_argument("--early-stop-loss", type=float, default=None)
    common_net(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("infer", help="run inference over images, emit JSONL")
    p.add_argument("--weights", type=_existing_file, required=True)
    p.add_argument("--out", default=None)
    p.add_argument("images", nargs="+", type=_existing_file)
    common_net(p)
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("eval", help="metric report from records or manifest+weights")
    p.add_argument("--records", type=_existing_file, default=None,
                   help="EvalRecord JSONL")
    p.add_argument("--manifest", type=_existing_file, default=None)
    p.add_argument("--weights", type=_existing_file, default=None)
    p.add_argument("--format", choices=("text", "json"), default="text")
    p.add_argument("--out", default=None)
    common_net(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("guide-replay", help="stream replay JSONL through the FSM")
    p.add_argument("--input", type=_existing_file, required=True)
    p.add_argument("--width", type=float, default=768.0, help="image width in pixels")
    p.add_argument("--homography", type=_existing_file, default=None,
                   help="9-number text file, row-major")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_guide_replay)

    p = sub.add_parser("transform", help="map pixel points to bird's-eye view")
    p.add_argument("points", nargs="+", type=_point, metavar="X,Y")
    p.add_argument("--homography", type=_existing_file, default=None)
    p.add_argument("--format", choices=("text", "json"), default="text")
    p.set_defaults(func=cmd_transform)

    p = sub.add_parser("bench", help="FLOPs + throughput across width multipliers")
    p.add_argument("--widths", type=_widths, default=TABLE_WIDTHS)
    p.add_argument("--batch", type=int, default=1)
    p.add_argument("--repeats", type=int, default=3)
    p.add_argument("--backends", default="active",
                   choices=("active", "both", "numpy", "cython"))
    p.add_argument("--format", choices=("text", "json"), default="text")
    common_net(p)
    p.set_defaults(func=cmd_bench)

    return parser


def main(argv=None) -> int:
    level = os.environ.get("LYTNET_LOG", "warning").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except BrokenPipeError:
        return 1
    except Exception as exc:  # surface module errors verbatim, nonzero exit
        print(f"error: {exc}", file=sys.stderr)
        log.debug("traceback", exc_info=True)
        return 1


if __name__ == "__main__":
    sys.exit(main())
