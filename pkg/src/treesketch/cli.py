"""
``treesketch`` command line.

Exit codes: 0 success, 1 usage error, 2 invalid input (validation), 3 I/O error.
"""
import argparse
import json
import logging
import sys
from pathlib import Path

EXIT_OK, EXIT_USAGE, EXIT_INVALID, EXIT_IO = 0, 1, 2, 3


class UsageError(Exception):
    pass


class InvalidInput(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _csv(text):
    return tuple(t.strip() for t in text.split(",") if t.strip())


def _load_params_checked(path):
    from .params import load_params, validate
    try:
        p = load_params(path)
    except json.JSONDecodeError as e:
        raise InvalidInput(f"{path}: not valid JSON ({e})") from e
    problems = validate(p)
    if problems:
        raise InvalidInput(f"{path}: invalid parameters\n" + "\n".join(f"  {v}" for v in problems))
    return p


def _record(path):
    from .codec import NormalizationRecord
    return NormalizationRecord.load(path) if path else None


# -- subcommands --------------------------------------------------------------

def cmd_generate(a):
    from .dataset import DESK_COUNT, FULL_COUNT, GenerateConfig, generate
    count = a.count if a.count is not None else (FULL_COUNT if a.paper_scale else DESK_COUNT)
    cfg = GenerateConfig(species=a.species, count=count, views=a.views, resolution=a.resolution,
                         seed=a.seed, gt=not a.no_gt)
    try:
        cfg.check()
    except ValueError as e:
        raise UsageError(str(e)) from e
    m = generate(a.out, cfg, fail_fast=a.fail_fast, workers=a.workers, dry_run=a.dry_run)
    c = m["counts"]
    print(f"{c['total']} sketches ({c['train']} train / {c['val']} val), {len(m['failures'])} failed"
          + ("" if a.dry_run else f" -> {a.out}"))


def cmd_reconstruct(a):
    from .mesh import write_obj
    from .species import IdentificationError, identify, texture_for
    from .synthesis import grow_tree
    p = _load_params_checked(a.params)
    sk, fo = grow_tree(p)
    out = Path(a.out)
    out.mkdir(parents=True, exist_ok=True)
    write_obj(sk, out / "skeleton.obj")
    write_obj(fo, out / "foliage.obj")
    try:
        species = identify(p)
        bark, leaf = texture_for(species)
        meta = {"species": species, "texture": {"bark": bark, "leaf": leaf}}
    except IdentificationError as e:
        meta = {"species": None, "texture": None, "error": str(e)}
    meta.update(skeleton_triangles=sk.n_triangles, foliage_triangles=fo.n_triangles)
    (out / "meta.json").write_text(json.dumps(meta, indent=1) + "\n")
    print(f"{out}: species {meta['species']}, {sk.n_triangles} + {fo.n_triangles} triangles")


def cmd_sketch(a):
    from .mesh import Mesh, read_obj
    from .raster import save_png
    from .sketch import sketch_tree
    from .synthesis import grow_tree
    if bool(a.params) == bool(a.skeleton):
        raise UsageError("give either --params or --skeleton [--foliage]")
    if a.params:
        sk, fo = grow_tree(_load_params_checked(a.params))
    else:
        sk = read_obj(a.skeleton, "skeleton")
        fo = read_obj(a.foliage, "foliage") if a.foliage else Mesh.empty("foliage")
    save_png(sketch_tree(sk, fo, a.view, a.resolution, thinning=a.thinning), a.out)
    print(a.out)


def cmd_encode(a):
    from .codec import save_bundle, to_bundle
    save_bundle(to_bundle(_load_params_checked(a.params), _record(a.normalization)), a.out)
    print(a.out)


def cmd_decode(a):
    from .codec import decode, load_bundle
    from .params import save_params
    save_params(decode(load_bundle(a.bundle), _record(a.normalization)), a.out)
    print(a.out)


def cmd_identify(a):
    from .species import identify, texture_for
    species, t = identify(_load_params_checked(a.params) if a.strict else _load_loose(a.params), return_tally=True)
    if a.verbose:
        for s in t.ranking():
            print(f"{s:>8} {t.counters[s]}/{t.totals[s]} ({100 * t.percentage(s):.1f}%)")
    bark, leaf = texture_for(species)
    print(f"{species}\t{bark}\t{leaf}")


def _load_loose(path):
    from .params import load_params
    try:
        return load_params(path)
    except json.JSONDecodeError as e:
        raise InvalidInput(f"{path}: not valid JSON ({e})") from e


def cmd_evaluate(a):
    param_mode = bool(a.pred_params or a.gt_params)
    mesh_mode = bool(a.pred_mesh or a.gt_mesh)
    if param_mode == mesh_mode:
        raise UsageError("use either --pred-params/--gt-params or --pred-mesh/--gt-mesh")
    if param_mode:
        if not (a.pred_params and a.gt_params):
            raise UsageError("--pred-params and --gt-params go together")
        from .codec import load_bundle, to_bundle
        from .metrics import one_minus_rmse
        rec = _record(a.normalization)

        def bundle(path):
            if str(path).endswith(".bundle.json"):
                return load_bundle(path)
            return to_bundle(_load_params_checked(path), rec)
        rep = one_minus_rmse(bundle(a.pred_params), bundle(a.gt_params))
        doc, text = {"mode": "params", **rep.as_dict()}, rep.to_text()
    else:
        if not (a.pred_mesh and a.gt_mesh):
            raise UsageError("--pred-mesh and --gt-mesh go together")
        from .mesh import read_obj
        from .metrics import hausdorff
        d = hausdorff(read_obj(a.pred_mesh, "skeleton"), read_obj(a.gt_mesh, "skeleton"),
                      samples=a.samples, mode=a.mode, seed=a.seed, symmetric=not a.one_sided)
        doc, text = {"mode": "mesh", "hdd": d}, f"hdd {d:.6f}\n"
    sys.stdout.write(text)
    if a.out:
        Path(a.out).write_text(json.dumps(doc, indent=1) + "\n")


def cmd_sweep(a):
    from .metrics import plot_sweep, rotation_sweep, save_sweep, sweep_report_text
    p = _load_params_checked(a.params)
    if a.predictor == "identity":
        predictor = lambda img: p  # noqa: E731
    else:
        if not a.index:
            raise UsageError("--predictor nn needs --index")
        from .nn import SketchIndex
        predictor = SketchIndex.load(a.index)
    res = rotation_sweep(p, predictor, a.step, a.resolution, a.view, a.samples, a.seed)
    sys.stdout.write(sweep_report_text(res))
    if a.out:
        save_sweep(res, a.out)
    if a.plot:
        plot_sweep(res, a.plot)


def cmd_index(a):
    from .dataset import load_manifest
    from .nn import index_from_manifest
    m = load_manifest(a.dataset)
    root = Path(a.dataset) if Path(a.dataset).is_dir() else Path(a.dataset).parent
    idx = index_from_manifest(m, root, None if a.split == "all" else a.split, a.side)
    idx.save(a.out)
    print(f"{len(idx)} sketches indexed -> {a.out}")


def cmd_predict(a):
    from .nn import SketchIndex
    from .params import save_params
    from .raster import load_png
    idx = SketchIndex.load(a.index)
    k = idx.nearest(load_png(a.sketch))
    save_params(idx.params[k], a.out)
    print(f"{idx.keys[k]} -> {a.out}")


# -- parser ---------------------------------------------------------------------

def build_parser():
    from .dataset import SPECIES
    from .raster import VIEWS
    p = _Parser(prog="treesketch", description="Synthetic tree sketches, parameter codec and metrics.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", parser_class=_Parser, required=True)

    g = sub.add_parser("generate", help="build a synthetic sketch dataset")
    g.add_argument("--species", type=_csv, default=SPECIES, help="comma list (default: all five)")
    g.add_argument("--count", type=int, help="trees per species (default 5, or 250 with --paper-scale)")
    g.add_argument("--views", type=_csv, default=VIEWS, help="comma list of front,back,left,right")
    g.add_argument("--resolution", type=int, default=608)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)
    g.add_argument("--paper-scale", action="store_true", help="250 trees per species")
    g.add_argument("--workers", type=int, default=1)
    g.add_argument("--fail-fast", action="store_true")
    g.add_argument("--no-gt", action="store_true", help="skip the shaded ground-truth renders")
    g.add_argument("--dry-run", action="store_true", help="plan only, write nothing")
    g.set_defaults(func=cmd_generate)

    r = sub.add_parser("reconstruct", help="grow meshes from a parameter file")
    r.add_argument("params")
    r.add_argument("--out", required=True, help="output directory")
    r.set_defaults(func=cmd_reconstruct)

    s = sub.add_parser("sketch", help="render a synthetic sketch")
    s.add_argument("--params")
    s.add_argument("--skeleton")
    s.add_argument("--foliage")
    s.add_argument("--view", choices=VIEWS, default="front")
    s.add_argument("--resolution", type=int, default=608)
    s.add_argument("--thinning", type=float, default=0.8)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_sketch)

    e = sub.add_parser("encode", help="parameters -> target bundle")
    e.add_argument("params")
    e.add_argument("--normalization")
    e.add_argument("--out", required=True)
    e.set_defaults(func=cmd_encode)

    d = sub.add_parser("decode", help="target bundle -> parameters")
    d.add_argument("bundle")
    d.add_argument("--normalization", help="record to undo scaling with")
    d.add_argument("--out", required=True)
    d.set_defaults(func=cmd_decode)

    i = sub.add_parser("identify", help="detect the species of a parameter file")
    i.add_argument("params")
    i.add_argument("--strict", action="store_true", help="require a fully valid dictionary")
    i.set_defaults(func=cmd_identify)

    ev = sub.add_parser("evaluate", help="1-RMSE on parameters or HDD on meshes")
    ev.add_argument("--pred-params")
    ev.add_argument("--gt-params")
    ev.add_argument("--normalization")
    ev.add_argument("--pred-mesh")
    ev.add_argument("--gt-mesh")
    ev.add_argument("--samples", type=int, default=10_000)
    ev.add_argument("--mode", choices=("surface", "vertex"), default="surface")
    ev.add_argument("--one-sided", action="store_true")
    ev.add_argument("--seed", type=int, default=0)
    ev.add_argument("--out")
    ev.set_defaults(func=cmd_evaluate)

    sw = sub.add_parser("sweep", help="HDD over a full rotation of the input tree")
    sw.add_argument("params")
    sw.add_argument("--predictor", choices=("identity", "nn"), default="identity")
    sw.add_argument("--index")
    sw.add_argument("--step", type=int, default=5)
    sw.add_argument("--view", choices=VIEWS, default="front")
    sw.add_argument("--resolution", type=int, default=608)
    sw.add_argument("--samples", type=int, default=10_000)
    sw.add_argument("--seed", type=int, default=0)
    sw.add_argument("--out")
    sw.add_argument("--plot", help="write a line plot (needs matplotlib)")
    sw.set_defaults(func=cmd_sweep)

    ix = sub.add_parser("index", help="build a nearest-neighbour sketch index")
    ix.add_argument("dataset", help="dataset directory or manifest.json")
    ix.add_argument("--split", choices=("train", "val", "all"), default="train")
    ix.add_argument("--side", type=int, default=16)
    ix.add_argument("--out", required=True)
    ix.set_defaults(func=cmd_index)

    pr = sub.add_parser("predict", help="nearest-neighbour parameters for a sketch")
    pr.add_argument("sketch")
    pr.add_argument("--index", required=True)
    pr.add_argument("--out", required=True)
    pr.set_defaults(func=cmd_predict)
    return p


def main(argv=None):
    from .codec import CodecError
    from .params import ParamError
    from .species import IdentificationError
    from .synthesis import GrowthError
    parser = build_parser()
    a = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if a.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        a.func(a)
    except UsageError as e:
        parser.print_usage(sys.stderr)
        print(f"treesketch: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (InvalidInput, ParamError, CodecError, IdentificationError, GrowthError,
            json.JSONDecodeError, KeyError, ValueError) as e:
        print(f"treesketch: invalid input: {e}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as e:
        print(f"treesketch: I/O error: {e}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
