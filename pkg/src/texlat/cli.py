"""Command-line front end.

Commands: extract, train, encode, decode, synth, eval, info, bands.
Exit codes: 0 success, 1 usage, 2 data error, 3 numeric failure.
Set TEXLAT_LOG=debug|info|warning to control stderr verbosity.
"""

from __future__ import annotations

import argparse
import csv
import logging
import multiprocessing
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import archive as ar
from . import hppca, image, pss, pyramid, synthesis

log = logging.getLogger("texlat")


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse defaults to exit code 2; usage is 1
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _params(args) -> pss.PssParams:
    return pss.PssParams(args.scales, args.orients, args.neighbor)


def _preprocess(args) -> ar.Preprocess:
    return ar.Preprocess(args.size, args.norm_mean, args.norm_std)


def _prepare_image(path, pp: ar.Preprocess) -> np.ndarray:
    img = image.load_image(path)
    if pp.size and img.shape != (pp.size, pp.size):
        img = image.resize_box(img, pp.size, pp.size)
    return image.normalize(img, pp.mean, pp.std)


def _pmap(fn, items, jobs: int):
    if jobs <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with multiprocessing.Pool(jobs) as pool:
        return pool.map(fn, items)


# --------------------------------------------------------------------------
# extract

def _extract_one(task):
    label, ident, path, pp, params = task
    try:
        vec = pss.extract_pss(_prepare_image(path, pp), params)
        return label, ident, vec.values, None
    except Exception as exc:  # collected per-file, reported at the end
        return label, ident, None, f"{path}: {exc}"


def cmd_extract(args) -> int:
    params = _params(args)
    pp = _preprocess(args)
    manifest = ar.discover_dataset(args.dataset, args.manifest,
                                   pp, args.train_count, args.eval_count)
    tasks = []
    for label, cls in enumerate(manifest.classes):
        files = manifest.split(cls, args.split)
        if not files:
            raise ValueError(f"class '{cls}' has no images for split '{args.split}'")
        tasks += [(label, f"{cls}/{f.name}", f, pp, params) for f in files]
    log.info("extracting %d images from %d classes", len(tasks), len(manifest.classes))

    results = _pmap(_extract_one, tasks, args.jobs)
    failures = [err for *_, err in results if err]
    good = [(lab, ident, vals) for lab, ident, vals, err in results if not err]
    for err in failures:
        print(f"error: {err}", file=sys.stderr)
    if good:
        feats = np.stack([vals for *_, vals in good])
        arch = ar.FeatureArchive(params, list(manifest.classes),
                                 np.array([lab for lab, *_ in good], dtype=np.int32),
                                 [ident for _, ident, _ in good], feats)
        ar.save_archive(arch, args.output)
    print(f"extracted {len(good)}/{len(tasks)} images -> {args.output}",
          file=sys.stderr)
    return 2 if failures else 0


# --------------------------------------------------------------------------
# train

def cmd_train(args) -> int:
    arch = ar.load_archive(args.archive)
    model = hppca.fit_hierarchy(arch.features, args.ccr, args.dim,
                                layout=arch.layout)
    hppca.save_model(model, args.output)
    if args.spectrum_csv:
        rows = []
        for name, m in zip([f"C{i}" for i in range(1, 11)] + ["final"],
                           model.group_models + [model.final_model]):
            rows += [(name, i, _fmt(lam)) for i, lam in enumerate(m.eigenvalues)]
        _write_csv(args.spectrum_csv, ["stage", "index", "eigenvalue"], rows)
    print(f"samples: {arch.features.shape[0]}")
    print(f"statistic dimension: {model.pss_dim}")
    print(f"intermediate dimension: {model.intermediate_dim}")
    print(f"output dimension: {model.output_dim}")
    print(f"reduction rate: {100.0 * hppca.reduction_rate(model):.1f}%")
    return 0


# --------------------------------------------------------------------------
# encode / decode

def _load_codes(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0][:1] != ["id"]:
        raise ValueError(f"{path} is not a codes CSV (missing header)")
    ids = [r[0] for r in rows[1:]]
    codes = np.array([[float(x) for x in r[1:]] for r in rows[1:]])
    return ids, codes


def cmd_encode(args) -> int:
    model = hppca.load_model(args.model)
    if len(args.inputs) == 1 and args.inputs[0].endswith(".pssa"):
        arch = ar.load_archive(args.inputs[0])
        if arch.layout != model.layout:
            raise ValueError("archive parameters do not match the model")
        ids, feats = arch.ids, arch.features
    else:
        pp = _preprocess(args)
        ids = list(args.inputs)
        feats = np.stack([
            pss.extract_pss(_prepare_image(p, pp), model.params).values
            for p in args.inputs])
    codes = hppca.encode_batch(model, feats)
    header = ["id"] + [f"c{i}" for i in range(model.output_dim)]
    _write_csv(args.output, header,
               [[ident] + [_fmt(v) for v in row] for ident, row in zip(ids, codes)])
    print(f"encoded {len(ids)} inputs -> {args.output}", file=sys.stderr)
    return 0


def cmd_decode(args) -> int:
    model = hppca.load_model(args.model)
    ids, codes = _load_codes(args.codes)
    if codes.shape[1] != model.output_dim:
        raise ValueError(
            f"codes have {codes.shape[1]} columns, model outputs {model.output_dim}")
    decoded = hppca.decode_batch(model, codes)
    header = ["id"] + pss.column_names(model.layout)
    _write_csv(args.output, header,
               [[ident] + [_fmt(v) for v in row] for ident, row in zip(ids, decoded)])
    print(f"decoded {len(ids)} codes -> {args.output}", file=sys.stderr)
    return 0


# --------------------------------------------------------------------------
# synth

def cmd_synth(args) -> int:
    model = hppca.load_model(args.model)
    if (args.input is None) == (args.code is None):
        raise ValueError("exactly one of --input or --code is required")
    if args.input:
        img = _prepare_image(args.input, _preprocess(args))
        code = hppca.encode(model, pss.extract_pss(img, model.params))
        size = args.synth_size or img.shape[0]
    else:
        ids, codes = _load_codes(args.code)
        if not 0 <= args.row < len(ids):
            raise ValueError(f"--row {args.row} out of range for {len(ids)} codes")
        code = codes[args.row]
        size = args.synth_size or 128
    decoded = hppca.decode(model, code)
    cfg = synthesis.SynthesisConfig(iterations=args.iterations, seed=args.seed,
                                    size=size)
    out, trace = synthesis.synthesize(decoded, cfg)
    image.save_image(out, args.output)
    if args.trace:
        _write_csv(args.trace, ["iteration", "distance"],
                   [(i, _fmt(d)) for i, d in enumerate(trace)])
    print(f"synthesized {size}x{size} image -> {args.output} "
          f"(distance {trace[0]:.4g} -> {trace[-1]:.4g})", file=sys.stderr)
    return 0


# --------------------------------------------------------------------------
# eval

_EVAL_CTX = None  # (model, base config, patch size); inherited by forked workers


def _eval_one(task):
    index, image_id, img = task
    model, cfg, patch = _EVAL_CTX
    run_cfg = replace(cfg, seed=cfg.seed + index, size=img.shape[0])
    score, rel, count = synthesis.evaluate_image(model, img, run_cfg, patch)
    return synthesis.EvalRow(image_id, score, rel, count)


def _eval_rows(model, items, args):
    global _EVAL_CTX
    cfg = synthesis.SynthesisConfig(iterations=args.iterations, seed=args.seed)
    _EVAL_CTX = (model, cfg, args.patch_size)
    try:
        return _pmap(_eval_one,
                     [(i, ident, img) for i, (ident, img) in enumerate(items)],
                     args.jobs)
    finally:
        _EVAL_CTX = None


def cmd_eval(args) -> int:
    model = hppca.load_model(args.model)
    pp = _preprocess(args)
    manifest = ar.discover_dataset(args.dataset, args.manifest,
                                   pp, args.train_count, args.eval_count)
    items, classes = [], []
    for cls in manifest.classes:
        files = manifest.split(cls, args.split)
        if not files:
            raise ValueError(f"class '{cls}' has no images for split '{args.split}'")
        for f in files:
            items.append((f"{cls}/{f.name}", _prepare_image(f, pp)))
            classes.append(cls)
    log.info("evaluating %d images", len(items))

    sweeps: list[tuple[str, hppca.HppcaModel]] = []
    if args.sweep_dim or args.sweep_ccr:
        if not args.archive:
            raise ValueError("sweeps need --archive to refit the model")
        arch = ar.load_archive(args.archive)
        if arch.layout != model.layout:
            raise ValueError("archive parameters do not match the model")
        for d in args.sweep_dim or []:
            sweeps.append((str(d), hppca.fit_hierarchy(
                arch.features, model.intermediate_threshold, d, layout=arch.layout)))
        for r in args.sweep_ccr or []:
            sweeps.append((_fmt(r), hppca.fit_hierarchy(
                arch.features, r, model.output_dim, layout=arch.layout)))
    else:
        sweeps.append((str(model.output_dim), model))

    class_names = list(manifest.classes)
    header = (["value"] + [f"tss_{c}" for c in class_names]
              + ["tss_all", "pss_err_all"])
    out_rows = []
    for value, swept in sweeps:
        rows = _eval_rows(swept, items, args)
        by_class = {c: [] for c in class_names}
        for cls, row in zip(classes, rows):
            by_class[cls].append(row.tss)
        mean_all = float(np.mean([r.tss for r in rows]))
        err_all = float(np.mean([r.pss_rel_err for r in rows]))
        out_rows.append([value]
                        + [_fmt(float(np.mean(by_class[c]))) for c in class_names]
                        + [_fmt(mean_all), _fmt(err_all)])
        log.info("sweep %s: mean TSS %.4f", value, mean_all)
    _write_csv(args.output, header, out_rows)
    print(f"wrote {len(out_rows)} report rows -> {args.output}", file=sys.stderr)
    return 0


# --------------------------------------------------------------------------
# info / bands

def cmd_info(args) -> int:
    head = Path(args.path).read_bytes()[:4]
    if head == ar.ARCHIVE_MAGIC:
        arch = ar.load_archive(args.path)
        p = arch.params
        print(f"feature archive: {arch.features.shape[0]} records, "
              f"D={arch.features.shape[1]}")
        print(f"parameters: scales={p.n_scales} orients={p.n_orientations} "
              f"neighbor={p.neighborhood}")
        counts = {c: int((arch.labels == i).sum()) for i, c in enumerate(arch.classes)}
        print(f"classes: {counts}")
    elif head == hppca.MODEL_MAGIC:
        model = hppca.load_model(args.path)
        p = model.params
        print(f"model: D={model.pss_dim} intermediate={model.intermediate_dim} "
              f"output={model.output_dim}")
        print(f"parameters: scales={p.n_scales} orients={p.n_orientations} "
              f"neighbor={p.neighborhood}")
        print(f"ccr threshold: {model.intermediate_threshold!r}")
        print(f"group latents: {list(model.group_dims)}")
        print(f"reduction rate: {100.0 * hppca.reduction_rate(model):.1f}%")
    elif head == pss._VECTOR_MAGIC:
        vec = pss.load_vector(args.path)
        p = vec.params
        print(f"statistic vector: D={vec.values.size}")
        print(f"parameters: scales={p.n_scales} orients={p.n_orientations} "
              f"neighbor={p.neighborhood}")
    else:
        raise ValueError(f"{args.path}: unrecognized file magic {head!r}")
    return 0


def cmd_bands(args) -> int:
    img = image.load_image(args.input)
    pyr = pyramid.build_pyramid(img, pyramid.PyramidParams(args.scales, args.orients))
    outdir = Path(args.output)
    outdir.mkdir(parents=True, exist_ok=True)

    def dump(name, a):
        peak = np.abs(a).max()
        scaled = np.abs(a) * (255.0 / peak) if peak > 0 else np.zeros_like(a, float)
        image.save_image(scaled, outdir / f"{name}.pgm")

    for n, level in enumerate(pyr.bands, start=1):
        for k, band in enumerate(level):
            dump(f"band_s{n}_o{k}", band)
    dump("lowpass_residual", pyr.lowpass_residual)
    dump("highpass_residual", pyr.highpass_residual)
    print(f"wrote {sum(len(lv) for lv in pyr.bands) + 2} magnitude maps -> {outdir}",
          file=sys.stderr)
    return 0


# --------------------------------------------------------------------------
# wiring

def _add_params(p: argparse.ArgumentParser):
    p.add_argument("--scales", type=int, default=4, help="pyramid scales N")
    p.add_argument("--orients", type=int, default=4, help="orientations K")
    p.add_argument("--neighbor", type=int, default=7, help="autocorrelation window M")


def _add_preprocess(p: argparse.ArgumentParser):
    p.add_argument("--size", type=int, default=128,
                   help="resize target side, 0 keeps the source size")
    p.add_argument("--norm-mean", type=float, default=127.0)
    p.add_argument("--norm-std", type=float, default=40.0)


def _add_dataset(p: argparse.ArgumentParser):
    p.add_argument("dataset", help="class-folder dataset root")
    p.add_argument("--manifest", help="optional JSON manifest override")
    p.add_argument("--split", choices=("all", "train", "eval"), default="all")
    p.add_argument("--train-count", type=int, default=0)
    p.add_argument("--eval-count", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    root = _Parser(prog="texlat",
                   description="texture statistics, codes and synthesis")
    sub = root.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract", parents=[], help="dataset -> feature archive")
    _add_dataset(p)
    _add_params(p)
    _add_preprocess(p)
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("train", help="feature archive -> model")
    p.add_argument("archive")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--ccr", type=float, default=0.99999999,
                   help="group cumulative contribution threshold")
    p.add_argument("--dim", type=int, default=200, help="output code length")
    p.add_argument("--spectrum-csv", help="write per-stage eigenvalues")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("encode", help="images or archive -> codes CSV")
    p.add_argument("model")
    p.add_argument("inputs", nargs="+")
    p.add_argument("-o", "--output", required=True)
    _add_preprocess(p)
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("decode", help="codes CSV -> statistic CSV")
    p.add_argument("model")
    p.add_argument("codes")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("synth", help="image or code -> synthesized texture")
    p.add_argument("model")
    p.add_argument("--input", help="source image to compress and resynthesize")
    p.add_argument("--code", help="codes CSV produced by encode")
    p.add_argument("--row", type=int, default=0, help="row of --code to use")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--trace", help="write the distance trace CSV here")
    p.add_argument("--iterations", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--synth-size", type=int, default=0,
                   help="output side (default: input size, or 128 for codes)")
    _add_preprocess(p)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("eval", help="score reconstructions on a dataset")
    p.add_argument("model")
    _add_dataset(p)
    _add_preprocess(p)
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--archive", help="training features, needed for sweeps")
    p.add_argument("--sweep-dim", type=lambda s: [int(x) for x in s.split(",")],
                   help="comma-separated output dimensions to refit and score")
    p.add_argument("--sweep-ccr", type=lambda s: [float(x) for x in s.split(",")],
                   help="comma-separated ccr thresholds to refit and score")
    p.add_argument("--iterations", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--patch-size", type=int, default=19)
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("info", help="describe an archive, model or vector file")
    p.add_argument("path")
    p.set_defaults(func=cmd_info)

    p = sub.add_parser("bands", help="dump band magnitude maps as PGM")
    p.add_argument("input")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--scales", type=int, default=4)
    p.add_argument("--orients", type=int, default=4)
    p.set_defaults(func=cmd_bands)

    return root


def main(argv=None) -> int:
    level = os.environ.get("TEXLAT_LOG", "warning").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="[texlat] %(message)s", stream=sys.stderr)
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except pss.NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 3
    except (image.FormatError, OSError, ValueError, IndexError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
