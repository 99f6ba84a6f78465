"""``rirkit`` command line.

Exit codes: 0 success, 2 usage error, 3 data or precondition error. Errors
are reported as one JSON line on stderr.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import acoustics, geomat, losses, rvq, simulator, store
from .io import (FormatError, read_blob, read_pgm16, read_wav, write_blob, write_png_rgb,
                 write_wav)
from .signal import AudioBuffer, convolve

EXIT_USAGE = 2
EXIT_DATA = 3


class UsageError(Exception):
    pass


class Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _clean(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    return obj


def emit(obj) -> None:
    """Print ``obj`` as JSON; non-finite floats become null."""
    print(json.dumps(_clean(obj), sort_keys=True))


def read_rir(path, boundary=None) -> acoustics.Rir:
    x = read_wav(path)
    return acoustics.Rir(x.samples, x.sample_rate,
                         None if boundary is None else min(boundary, len(x)))


def cmd_analyze(args):
    h = read_rir(args.rir, args.boundary)
    if args.gt is None:
        emit({"t60": acoustics.t60(h), "edt": acoustics.edt(h), "drr": acoustics.drr(h)})
        return
    gt = read_rir(args.gt, args.boundary)
    emit(acoustics.acoustic_error_report(h, gt).to_dict())


def cmd_reverb(args):
    y = convolve(read_wav(args.clean), read_wav(args.rir))
    if args.normalize:
        peak = np.max(np.abs(y.samples))
        if peak > 0:
            y = AudioBuffer(y.samples / peak, y.sample_rate)
    write_wav(args.out, y, pcm16=args.pcm16)
    emit({"samples": len(y), "out": str(args.out)})


def cmd_losses(args):
    scores = None
    if args.scores:
        raw = json.loads(Path(args.scores).read_text())
        scores = losses.DiscriminatorScores(tuple(raw["reverberant"]), tuple(raw["clean"]))
    report = losses.loss_report(
        read_wav(args.sr_hat), read_wav(args.sr), read_wav(args.sc_hat), read_wav(args.sc),
        read_rir(args.rir_hat), read_rir(args.rir), scores, args.vq1, args.vq2,
        metric_weights=losses.LossWeights(args.lambda1, args.lambda2),
        generator_weights=losses.LossWeights(args.gen_lambda1, args.gen_lambda2),
    )
    emit(vars(report))


def cmd_rvq_train(args):
    data = read_blob(args.vectors)
    cfg = rvq.RvqConfig(args.layers, args.codebook, data.shape[1], args.decay, args.beta, args.seed)
    rng = np.random.default_rng(args.seed)
    codec = rvq.new_codec(cfg, data)
    log = []
    for step in range(args.steps):
        if args.batch_size and args.batch_size < data.shape[0]:
            batch = data[rng.choice(data.shape[0], args.batch_size, replace=False)]
        else:
            batch = data
        vq_loss, commit = codec.train_step(batch)
        log.append({"step": step, "vq_loss": vq_loss, "commitment_loss": commit})
    codec.save(args.out)
    summary = {"steps": args.steps, "final_mse": codec.reconstruction_mse(data),
               "final_vq_loss": log[-1]["vq_loss"] if log else None, "checkpoint": str(args.out)}
    if args.log:
        with open(args.log, "w") as fh:
            for row in log:
                fh.write(json.dumps(row) + "\n")
            fh.write(json.dumps({"final_mse": summary["final_mse"]}) + "\n")
    emit(summary)


def cmd_rvq_encode(args):
    codec = rvq.RvqCodec.load(args.ckpt)
    enc = codec.encode(read_blob(args.vectors))
    write_blob(args.out, enc.codes.astype(np.int32))
    emit({"frames": int(enc.codes.shape[0]), "layers": int(enc.codes.shape[1])})


def cmd_rvq_decode(args):
    codec = rvq.RvqCodec.load(args.ckpt)
    codes = read_blob(args.codes)
    write_blob(args.out, codec.decode(codes))
    emit({"frames": int(codes.shape[0]), "dim": codec.config.dim})


def cmd_rvq_bitrate(args):
    cfg = rvq.RvqConfig(num_layers=args.layers, codebook_size=args.codebook, dim=1)
    emit({"bitrate_bps": round(rvq.bitrate(cfg, args.fps))})


def cmd_geomat_build(args):
    labels = read_pgm16(args.labels)
    seg = geomat.SegmentationMap(labels, geomat.load_label_names(args.names))
    depth = read_blob(args.depth)
    gm = geomat.build_geomat(seg, depth, geomat.load_db(args.db))
    write_png_rgb(args.out, gm.channels)
    sidecar = {"depth_scale": gm.depth_scale, "height": int(labels.shape[0]),
               "width": int(labels.shape[1])}
    Path(args.out).with_suffix(".json").write_text(json.dumps(sidecar, sort_keys=True))
    emit(sidecar)


def cmd_store_build(args):
    db = store.EmbeddingStore(args.dim)
    for id, emb_path, wav_path in args.entry or []:
        emb = read_blob(emb_path).reshape(-1)
        db.add_entry(id, emb, read_rir(wav_path))
    db.save(args.store)
    emit({"entries": len(db), "dim": db.dim, "store": str(args.store)})


def cmd_store_query(args):
    db = store.EmbeddingStore.load(args.store)
    matches = db.retrieve(read_blob(args.embedding).reshape(-1), args.k)
    emit({"matches": [{"id": m.id, "similarity": m.similarity} for m in matches]})


def cmd_store_splice(args):
    db = store.EmbeddingStore.load(args.store)
    est = read_rir(args.estimate)
    cfg = store.SpliceConfig(args.boundary, args.end)
    final, rid = store.assemble_estimate(est, db, read_blob(args.embedding).reshape(-1), cfg,
                                         additive=args.additive)
    write_wav(args.out, AudioBuffer(final.samples, final.sample_rate))
    emit({"retrieved_id": rid, "out": str(args.out)})


def cmd_simulate(args):
    room_cfg = json.loads(Path(args.room).read_text())
    absorption = room_cfg["absorptions"]
    if isinstance(absorption, (int, float)):
        absorption = [absorption] * 6
    room = simulator.ShoeboxRoom(tuple(room_cfg["dims"]), tuple(absorption),
                                 room_cfg.get("speed_of_sound", 343.0))
    params = simulator.SimParams(**room_cfg.get("params", {}))
    h = simulator.simulate_rir(room, room_cfg["source"], room_cfg["listener"], params)
    write_wav(args.out, AudioBuffer(h.samples, h.sample_rate))
    emit({"samples": len(h), "sabine_t60": simulator.sabine_t60(room), "out": str(args.out)})


def build_parser() -> Parser:
    p = Parser(prog="rirkit", description="Room impulse response toolkit")
    sub = p.add_subparsers(dest="command", required=True, parser_class=Parser)

    a = sub.add_parser("analyze", help="acoustic metrics of an RIR, or errors against --gt")
    a.add_argument("rir")
    a.add_argument("--gt")
    a.add_argument("--boundary", type=int, default=acoustics.DEFAULT_BOUNDARY)
    a.set_defaults(func=cmd_analyze)

    r = sub.add_parser("reverb", help="convolve clean speech with an RIR")
    r.add_argument("clean")
    r.add_argument("rir")
    r.add_argument("out")
    r.add_argument("--normalize", action="store_true")
    r.add_argument("--pcm16", action="store_true")
    r.set_defaults(func=cmd_reverb)

    lo = sub.add_parser("losses", help="evaluate the training objectives")
    for name in ("sr-hat", "sr", "sc-hat", "sc", "rir-hat", "rir"):
        lo.add_argument(f"--{name}", required=True)
    lo.add_argument("--scores", help="JSON with 'reverberant' and 'clean' score lists")
    lo.add_argument("--vq1", type=float, default=0.0)
    lo.add_argument("--vq2", type=float, default=0.0)
    lo.add_argument("--lambda1", type=float, default=1.0)
    lo.add_argument("--lambda2", type=float, default=1.0)
    lo.add_argument("--gen-lambda1", type=float, default=1.0)
    lo.add_argument("--gen-lambda2", type=float, default=1.0)
    lo.set_defaults(func=cmd_losses)

    q = sub.add_parser("rvq", help="residual vector quantizer")
    qs = q.add_subparsers(dest="rvq_command", required=True, parser_class=Parser)
    t = qs.add_parser("train")
    t.add_argument("vectors")
    t.add_argument("--out", required=True)
    t.add_argument("--seed", type=int, required=True)
    t.add_argument("--layers", type=int, default=8)
    t.add_argument("--codebook", type=int, default=256)
    t.add_argument("--steps", type=int, default=1000)
    t.add_argument("--batch-size", type=int)
    t.add_argument("--decay", type=float, default=0.99)
    t.add_argument("--beta", type=float, default=0.25)
    t.add_argument("--log")
    t.set_defaults(func=cmd_rvq_train)
    e = qs.add_parser("encode")
    e.add_argument("vectors")
    e.add_argument("--ckpt", required=True)
    e.add_argument("--out", required=True)
    e.set_defaults(func=cmd_rvq_encode)
    d = qs.add_parser("decode")
    d.add_argument("codes")
    d.add_argument("--ckpt", required=True)
    d.add_argument("--out", required=True)
    d.set_defaults(func=cmd_rvq_decode)
    b = qs.add_parser("bitrate")
    b.add_argument("--layers", type=int, default=64)
    b.add_argument("--codebook", type=int, default=8192)
    b.add_argument("--fps", type=float, required=True)
    b.set_defaults(func=cmd_rvq_bitrate)

    g = sub.add_parser("geomat", help="geometry/material feature maps")
    gs = g.add_subparsers(dest="geomat_command", required=True, parser_class=Parser)
    gb = gs.add_parser("build")
    gb.add_argument("--labels", required=True, help="16-bit PGM label map")
    gb.add_argument("--names", required=True, help="JSON label -> object name")
    gb.add_argument("--depth", required=True, help="float32 depth raster")
    gb.add_argument("--db", required=True, help="absorption database JSON")
    gb.add_argument("--out", required=True, help="output PNG")
    gb.set_defaults(func=cmd_geomat_build)

    s = sub.add_parser("store", help="RIR datastore")
    ss = s.add_subparsers(dest="store_command", required=True, parser_class=Parser)
    sb = ss.add_parser("build")
    sb.add_argument("store")
    sb.add_argument("--entry", nargs=3, action="append", metavar=("ID", "EMBEDDING", "WAV"))
    sb.add_argument("--dim", type=int, default=store.DEFAULT_DIM)
    sb.set_defaults(func=cmd_store_build)
    sq = ss.add_parser("query")
    sq.add_argument("store")
    sq.add_argument("--embedding", required=True)
    sq.add_argument("-k", type=int, default=1)
    sq.set_defaults(func=cmd_store_query)
    sp = ss.add_parser("splice")
    sp.add_argument("store")
    sp.add_argument("--estimate", required=True)
    sp.add_argument("--embedding", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--boundary", type=int, default=2000)
    sp.add_argument("--end", type=int, default=4000)
    sp.add_argument("--additive", action="store_true")
    sp.set_defaults(func=cmd_store_splice)

    sim = sub.add_parser("simulate", help="image-source shoebox RIR")
    sim.add_argument("room", help="room description JSON")
    sim.add_argument("--out", required=True)
    sim.set_defaults(func=cmd_simulate)
    return p


def _fail(kind: str, message: str, code: int) -> int:
    print(json.dumps({"error": kind, "message": message}), file=sys.stderr)
    return code


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        return _fail("usage", str(exc), EXIT_USAGE)
    try:
        args.func(args)
    except (FormatError, ValueError, LookupError, KeyError, OSError) as exc:
        return _fail(type(exc).__name__, str(exc), EXIT_DATA)
    return 0


if __name__ == "__main__":
    sys.exit(main())
