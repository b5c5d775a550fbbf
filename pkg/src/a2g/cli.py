"""``a2g`` command line: gen, campaign, fit-plos, synth, extract, validate, tables."""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path
from typing import Any

import numpy as np

from . import __version__
from .errors import A2GError
from .extract import extract_all, write_curves_csv
from .geomlos import (CampaignConfig, empirical_plos, read_dataset, run_campaign, write_dataset,
                      write_plos_curve, write_table_csv)
from .lsfmod import LOS_MODES, ChannelModel, LsfParams, builtin_model, synthesize
from .plosmod import SigmoidParams, builtin_sigmoid, fit_sigmoid
from .seeding import resolve_seed, substream
from .tables import GEOMETRIC_LAYOUTS, MODEL_TABLE, Env, LayoutKind
from .urbgen import Highway, generate, write_layout
from .validate import DEFAULT_BINS, REPORT_HEIGHTS, compare_report


class UsageError(A2GError):
    pass


def _dump(obj: Any, path: str | None) -> None:
    text = json.dumps(obj, indent=1) + "\n"
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def _load_json(path: str) -> Any:
    return json.loads(Path(path).read_text())


def _need_seed(args) -> int:
    seed = resolve_seed(args.seed)
    if seed is None:
        raise UsageError("no seed given: pass --seed or set A2G_SEED")
    return seed


# -- commands ---------------------------------------------------------------

def cmd_gen(args) -> int:
    seed = _need_seed(args)
    highways = None
    if args.highways:
        highways = [Highway(**h) for h in _load_json(args.highways)]
    kind = LayoutKind.parse(args.layout)
    if kind not in GEOMETRIC_LAYOUTS:
        raise UsageError(f"cannot generate a {kind.value!r} layout")
    layout = generate(kind, args.env, args.area, substream(seed, "urbgen", args.index), highways)
    layout.seed = seed
    config = {"layout": kind.value, "env": Env.parse(args.env).value, "area_m": args.area,
              "seed": seed, "index": args.index}
    write_layout(layout, args.output, {"config": config})
    return 0


def _campaign_config(args) -> CampaignConfig:
    raw = _load_json(args.config) if args.config else {}
    if args.seed is not None or "seed" not in raw:
        raw["seed"] = _need_seed(args)
    for key in ("env", "cities", "area_m", "pitch_m"):
        val = getattr(args, key, None)
        if val is not None:
            raw[key] = val
    if args.layout:
        raw["layouts"] = args.layout
    return CampaignConfig.from_dict(raw)


def cmd_campaign(args) -> int:
    cfg = _campaign_config(args)
    ds = run_campaign(cfg, threads=args.threads)
    write_dataset(ds, args.output)
    if args.plos:
        bw = math.radians(args.bin_deg)
        curve = empirical_plos(ds, bin_width=bw)
        write_plos_curve(curve, args.plos, {"kind": "plos_curve", "bin_width": bw, "config": cfg.to_dict()})
    return 0


def cmd_fit_plos(args) -> int:
    ds = read_dataset(args.links)
    bw = math.radians(args.bin_deg)
    curve = empirical_plos(ds, bin_width=bw, min_count=args.min_count)
    params, diag = fit_sigmoid(curve)
    cfg = ds.meta.get("config", {})
    out = {"layout": args.layout or _layout_label(cfg), "env": args.env or cfg.get("env"),
           **params.to_dict(), "diagnostics": diag.to_dict(),
           "config": {"links": str(args.links), "bin_width": bw, "min_count": args.min_count,
                      "seed": ds.meta.get("seed")}}
    _dump(out, args.output)
    if args.curve:
        write_plos_curve(curve, args.curve, {"kind": "plos_curve", "bin_width": bw})
    return 0


def _layout_label(cfg: dict) -> str | None:
    kinds = cfg.get("layouts") or []
    if len(kinds) == 1:
        return kinds[0]
    return "combined" if kinds else None


def _model_from_file(path: str, layout: str | None, env: str | None, sigmoid_path: str | None) -> ChannelModel:
    d = _load_json(path)
    if "lsf" in d and "sigmoid" in d:
        return ChannelModel.from_dict(d)
    lsf = LsfParams.from_dict(d)
    env = env or d.get("env")
    if sigmoid_path:
        sig = SigmoidParams.from_dict(_load_json(sigmoid_path))
    elif layout and env:
        sig = builtin_sigmoid(layout, env)
    else:
        raise UsageError("model file has no sigmoid: pass --sigmoid or --layout/--env")
    return ChannelModel(sig, lsf, layout, env)


def cmd_synth(args) -> int:
    seed = _need_seed(args)
    ds = read_dataset(args.links)
    if args.model:
        model = _model_from_file(args.model, args.layout, args.env, args.sigmoid)
    else:
        if not (args.layout and args.env):
            raise UsageError("synth needs --layout and --env (or --model)")
        model = builtin_model(args.layout, args.env, obstacle_offset_db=args.offset_db)
    out = synthesize(ds, model, substream(seed, "synth", 0), args.los_state)
    out.meta["synth"] = {"seed": seed, "los_mode": args.los_state, "links": str(args.links)}
    write_dataset(out, args.output)
    return 0


def cmd_extract(args) -> int:
    ds = read_dataset(args.links)
    res = extract_all(ds, env=args.env, breakpoint=args.breakpoint, fc=args.fc)
    d = res.to_dict()
    d["config"] = {"links": str(args.links), "breakpoint_m": args.breakpoint, "fc": args.fc,
                   "seed": ds.meta.get("seed")}
    _dump(d, args.output)
    if args.curves:
        write_curves_csv(res, args.curves)
    return 0


def cmd_validate(args) -> int:
    seed = _need_seed(args)
    ds = read_dataset(args.links)
    if args.model:
        model = _model_from_file(args.model, args.layout, args.env, args.sigmoid)
    else:
        if not (args.layout and args.env):
            raise UsageError("validate needs --model or --layout/--env")
        model = builtin_model(args.layout, args.env)
    heights = [float(h) for h in args.heights] if args.heights else list(REPORT_HEIGHTS)
    report = compare_report(ds, model, seed, heights, args.bins, args.los_mode)
    report["config"] = {"links": str(args.links), "model": args.model, "seed": seed}
    if args.cdf_dir:
        out_dir = Path(args.cdf_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        for entry in report["report_heights"]:
            grid = np.asarray(entry["pathloss_db"])
            tag = f"h{entry['requested_height_m']:g}"
            write_table_csv(out_dir / f"cdf_{tag}_data.csv",
                            {"pathloss_db": grid, "cdf": np.asarray(entry["cdf_data"])})
            write_table_csv(out_dir / f"cdf_{tag}_model.csv",
                            {"pathloss_db": grid, "cdf": np.asarray(entry["cdf_model"])})
    _dump(report, args.output)
    return 0


def _table_entries(layout: str | None, env: str | None) -> list[dict[str, Any]]:
    kinds = [LayoutKind.parse(layout)] if layout else list(LayoutKind)
    envs = [Env.parse(env)] if env else list(Env)
    out = []
    for k in kinds:
        for e in envs:
            row = MODEL_TABLE[k][e]
            model = builtin_model(k, e)
            out.append({
                "layout": k.value, "env": e.value,
                "sigmoid": model.sigmoid.to_dict(),
                "los": {"n": model.lsf.los.n, "sigma0": row["los_shadow"][0],
                        "sigma_inf": row["los_shadow"][1], "h0": row["los_shadow"][2]},
                "nlos_ple": [{"h_min": s.h_min, "h_max": s.h_max, "n0": s.n0, "n_inf": s.n_inf, "h0": s.h0}
                             for s in model.lsf.nlos.ple.segments],
                "nlos_shadow": {"sigma0": row["nlos_shadow"][0], "sigma_inf": row["nlos_shadow"][1],
                                "h0": row["nlos_shadow"][2]},
            })
    return out


def cmd_tables(args) -> int:
    entries = _table_entries(args.layout, args.env)
    if args.format == "json":
        _dump(entries, args.output)
        return 0
    lines = ["layout,env,block,h_min,h_max,p1,p2,p3,p4"]
    for e in entries:
        s = e["sigmoid"]
        lines.append(f"{e['layout']},{e['env']},sigmoid,,,{s['x1']!r},{s['x2']!r},{s['x3']!r},{s['x4']!r}")
        los = e["los"]
        lines.append(f"{e['layout']},{e['env']},los_shadow,,,{los['sigma0']!r},{los['sigma_inf']!r},{los['h0']!r},")
        for seg in e["nlos_ple"]:
            lines.append(f"{e['layout']},{e['env']},nlos_ple,{seg['h_min']!r},{seg['h_max']!r},"
                         f"{seg['n0']!r},{seg['n_inf']!r},{seg['h0']!r},")
        ns = e["nlos_shadow"]
        lines.append(f"{e['layout']},{e['env']},nlos_shadow,,,{ns['sigma0']!r},{ns['sigma_inf']!r},{ns['h0']!r},")
    text = "\n".join(lines) + "\n"
    if args.output in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(args.output).write_text(text)
    return 0


# -- parser -----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="a2g", description="Air-to-ground urban channel toolkit")
    p.add_argument("--version", action="version", version=f"a2g {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def seeded(sp):
        sp.add_argument("--seed", type=int, default=None, help="master seed (falls back to A2G_SEED)")

    g = sub.add_parser("gen", help="generate one city layout")
    g.add_argument("--layout", required=True)
    g.add_argument("--env", required=True)
    g.add_argument("--area", type=float, default=1000.0)
    g.add_argument("--index", type=int, default=0, help="realization index within the seed")
    g.add_argument("--highways", help="JSON list of highways (HEU only)")
    g.add_argument("-o", "--output", required=True)
    seeded(g)
    g.set_defaults(func=cmd_gen)

    c = sub.add_parser("campaign", help="Monte Carlo LoS campaign")
    c.add_argument("--config")
    c.add_argument("--env")
    c.add_argument("--layout", action="append", help="layout kind (repeatable, or 'combined')")
    c.add_argument("--cities", type=int)
    c.add_argument("--area", dest="area_m", type=float)
    c.add_argument("--pitch", dest="pitch_m", type=float)
    c.add_argument("--threads", type=int, default=1)
    c.add_argument("--plos", help="also write the empirical P_LoS curve CSV here")
    c.add_argument("--bin-deg", type=float, default=2.0)
    c.add_argument("-o", "--output", required=True)
    seeded(c)
    c.set_defaults(func=cmd_campaign)

    f = sub.add_parser("fit-plos", help="fit sigmoid LoS probability to a link dataset")
    f.add_argument("links")
    f.add_argument("--bin-deg", type=float, default=2.0)
    f.add_argument("--min-count", type=int, default=50)
    f.add_argument("--layout")
    f.add_argument("--env")
    f.add_argument("--curve", help="also write the binned curve CSV here")
    f.add_argument("-o", "--output")
    f.set_defaults(func=cmd_fit_plos)

    s = sub.add_parser("synth", help="sample model path loss onto a link dataset")
    s.add_argument("--links", required=True)
    s.add_argument("--layout")
    s.add_argument("--env")
    s.add_argument("--model", help="channel model or extracted LSF JSON")
    s.add_argument("--sigmoid", help="sigmoid JSON to pair with an LSF-only model")
    s.add_argument("--los-state", choices=LOS_MODES, default="geometry")
    s.add_argument("--offset-db", type=float, default=0.0, help="constant NLoS obstacle loss")
    s.add_argument("-o", "--output", required=True)
    seeded(s)
    s.set_defaults(func=cmd_synth)

    e = sub.add_parser("extract", help="re-derive LSF parameters from a dataset with path loss")
    e.add_argument("links")
    e.add_argument("--env")
    e.add_argument("--breakpoint", type=float, default=None)
    e.add_argument("--fc", type=float, default=26e9)
    e.add_argument("--curves", help="also write per-height estimates CSV here")
    e.add_argument("-o", "--output")
    e.set_defaults(func=cmd_extract)

    v = sub.add_parser("validate", help="compare dataset path loss against a model")
    v.add_argument("links")
    v.add_argument("--model")
    v.add_argument("--sigmoid")
    v.add_argument("--layout")
    v.add_argument("--env")
    v.add_argument("--bins", type=int, default=DEFAULT_BINS)
    v.add_argument("--heights", nargs="*")
    v.add_argument("--los-mode", choices=LOS_MODES, default="sigmoid")
    v.add_argument("--cdf-dir")
    v.add_argument("-o", "--output")
    seeded(v)
    v.set_defaults(func=cmd_validate)

    t = sub.add_parser("tables", help="dump the built-in coefficient tables")
    t.add_argument("--layout")
    t.add_argument("--env")
    t.add_argument("--format", choices=("json", "csv"), default="json")
    t.add_argument("-o", "--output")
    t.set_defaults(func=cmd_tables)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except OSError as exc:
        print(f"a2g: io-error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    except (A2GError, ValueError, KeyError, TypeError) as exc:
        msg = str(exc).replace("\n", " ")
        print(f"a2g: error: {type(exc).__name__}: {msg}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
