"""Command-line runner: ``wavshrink {gen,xval,tune,rate,decode}``.

Settings resolve as built-in defaults < TOML config file (``--config``) <
flags. Each run writes ``<command>.config.json`` (the resolved settings)
before computing anything, then its outputs, plus a timestamped
``<command>.log``. Payload files never contain timestamps, thread counts or
output paths, so reruns with the same seed are byte-identical.

Exit codes: 0 success, 1 usage/config error, 2 data error, 3 check failed.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import tomli

from . import data as data_mod
from .data import GeneratorSpec, PRESETS, make_prototypes
from .decoder import consistency_experiment
from .learn import PipelineConfig, cross_validate, grid_search
from .seqmodel import ESTIMATORS, BesovBody, rate_experiment

log = logging.getLogger("wavshrink")

OUT_ENV = "WAVSHRINK_OUT"

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_CHECK = 0, 1, 2, 3

# Keys that describe where/how a run executes rather than what it computes.
_RUNTIME_KEYS = {"out", "output", "threads", "config", "command"}

DEFAULTS = {
    "gen": {"preset": "paper-shape"},
    "xval": {
        "target": "direction", "features": "wavelet", "family": "haar", "T": 20, "J": 20, "lam": 0.0,
        "kind": "soft", "K": 20, "P": 200, "gamma": 1e-3, "priors": "empirical", "scheme": "loso",
        "folds": 5, "shuffle_labels": False,
    },
    "tune": {
        "target": "direction", "T_grid": "20", "J_grid": "20", "lam_grid": "0", "P_grid": "200",
        "family_grid": "haar", "gamma": 1e-3, "priors": "empirical", "scheme": "loso", "folds": 5,
    },
    "rate": {
        "alpha": 1.0, "p": 2.0, "q": 2.0, "C": 1.0, "eps": "0.1,0.05,0.025,0.0125", "estimator": "universal",
        "n_rep": 2000, "max_level": 12, "slope_tol": 0.25, "check": True,
    },
    "decode": {
        "style": "bumps", "amplitude": 1.0, "view": "direction", "sigma": 0.5, "grid": "64,256,1024",
        "trials": 200, "wavelet": "haar",
    },
}


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _floats(text):
    return [float(v) for v in str(text).split(",") if v.strip()]


def _ints(text):
    return [int(v) for v in str(text).split(",") if v.strip()]


def _strs(text):
    return [v.strip() for v in str(text).split(",") if v.strip()]


def build_parser() -> argparse.ArgumentParser:
    S = argparse.SUPPRESS
    common = _Parser(add_help=False, argument_default=S)
    common.add_argument("--seed", type=int, help="master seed (required, here or in the config file)")
    common.add_argument("--config", help="TOML file; a [<command>] table or top-level keys")
    common.add_argument("--out", help=f"output directory (default ${OUT_ENV} or .)")
    common.add_argument("--threads", type=int, help="worker threads; results do not depend on it")

    p = _Parser(prog="wavshrink", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("gen", parents=[common], argument_default=S, help="generate a synthetic corpus")
    g.add_argument("--preset", choices=sorted(PRESETS))
    g.add_argument("--style", choices=["bumps", "spikes", "mixed"])
    g.add_argument("--amplitude", type=float)
    g.add_argument("--sigma", type=float)
    g.add_argument("--sessions", dest="n_sessions", type=int)
    g.add_argument("--trials-per-class", dest="trials_per_class_per_session", type=int)
    g.add_argument("--channels", dest="n_channels", type=int)
    g.add_argument("--samples", dest="n_samples", type=int)
    g.add_argument("--session-effect", type=float)
    g.add_argument("--gain-spread", dest="channel_gain_spread", type=float)
    g.add_argument("-o", "--output", required=True, help="container file to write")

    for name, hlp in (("xval", "cross-validate the pipeline"), ("tune", "grid search over pipeline settings")):
        x = sub.add_parser(name, parents=[common], argument_default=S, help=hlp)
        x.add_argument("dataset")
        x.add_argument("--target", "--task", dest="target", choices=["direction", "type"])
        x.add_argument("--gamma", type=float)
        x.add_argument("--priors", choices=["empirical", "uniform"])
        x.add_argument("--scheme", choices=["loso", "kfold"])
        x.add_argument("--folds", type=int)
        if name == "xval":
            x.add_argument("--features", choices=["wavelet", "fourier"])
            x.add_argument("--family", choices=["haar", "daub4", "daub8"])
            x.add_argument("--T", type=int)
            x.add_argument("--J", type=int)
            x.add_argument("--lam", type=float)
            x.add_argument("--kind", choices=["soft", "hard"])
            x.add_argument("--K", type=int)
            x.add_argument("--P", type=int)
            x.add_argument("--shuffle-labels", action="store_true")
        else:
            for key in ("T", "J", "lam", "P", "family"):
                x.add_argument(f"--{key}-grid", dest=f"{key}_grid", help="comma-separated values")

    r = sub.add_parser("rate", parents=[common], argument_default=S, help="sup-risk vs noise level sweep")
    r.add_argument("--alpha", type=float)
    r.add_argument("--p", type=float)
    r.add_argument("--q", type=float)
    r.add_argument("--C", type=float)
    r.add_argument("--eps", help="comma-separated noise levels (at least 3)")
    r.add_argument("--estimator", choices=sorted(ESTIMATORS))
    r.add_argument("--n-rep", type=int)
    r.add_argument("--max-level", type=int)
    r.add_argument("--expect-slope", type=float, help="default: 2r for universal, 2 identity, 0 zero")
    r.add_argument("--slope-tol", type=float)
    r.add_argument("--no-check", dest="check", action="store_false")

    d = sub.add_parser("decode", parents=[common], argument_default=S, help="decoder consistency table")
    d.add_argument("--style", choices=["bumps", "spikes", "mixed"])
    d.add_argument("--amplitude", type=float)
    d.add_argument("--view", choices=["direction", "task", "joint"])
    d.add_argument("--sigma", type=float)
    d.add_argument("--grid", help="comma-separated dyadic lengths")
    d.add_argument("--trials", type=int)
    d.add_argument("--wavelet", choices=["haar", "daub4", "daub8"])
    return p


def resolve(ns: argparse.Namespace) -> dict:
    flags = vars(ns).copy()
    cmd = flags["command"]
    file_cfg = {}
    if "config" in flags:
        try:
            with open(flags["config"], "rb") as fh:
                raw = tomli.load(fh)
        except (OSError, tomli.TOMLDecodeError) as exc:
            raise UsageError(f"cannot read config file: {exc}") from exc
        file_cfg = {k: v for k, v in raw.items() if not isinstance(v, dict)}
        file_cfg.update(raw.get(cmd, {}))
    cfg = {**DEFAULTS[cmd], **file_cfg, **flags}
    if "seed" not in cfg:
        raise UsageError("--seed is required")
    cfg["out"] = cfg.get("out") or os.environ.get(OUT_ENV, ".")
    cfg["threads"] = int(cfg.get("threads", 1))
    if cfg["threads"] < 1:
        raise UsageError("--threads must be at least 1")
    return cfg


def _dump_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _echo(cfg: dict) -> dict:
    return {k: v for k, v in sorted(cfg.items()) if k not in _RUNTIME_KEYS}


def _setup_run(cfg: dict, out_dir: Path) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / f"{cfg['command']}.config.json").write_text(_dump_json(_echo(cfg)))
    handler = logging.FileHandler(out_dir / f"{cfg['command']}.log", mode="w")
    handler.setFormatter(logging.Formatter("%(asctime)s %(levelname)s %(message)s"))
    log.handlers[:] = [handler]
    log.setLevel(logging.INFO)
    log.info("command=%s threads=%d out=%s", cfg["command"], cfg["threads"], out_dir)


def _load_dataset(path):
    try:
        return data_mod.load(path)
    except FileNotFoundError as exc:
        raise DataError(f"dataset not found: {path}") from exc
    except data_mod.ContainerError as exc:
        raise DataError(f"{path}: {exc}") from exc


def cmd_gen(cfg) -> int:
    out_path = Path(cfg["output"])
    spec_keys = set(GeneratorSpec.__dataclass_fields__)
    overrides = {k: cfg[k] for k in spec_keys if k in cfg}
    try:
        spec = data_mod.preset(cfg["preset"], **overrides)
    except (ValueError, TypeError) as exc:
        raise UsageError(str(exc)) from exc
    cfg["resolved_spec"] = spec.to_dict()
    _setup_run(cfg, out_path.parent)
    ds = data_mod.generate(spec, cfg["seed"])
    data_mod.save(ds, out_path)
    sidecar = {"seed": cfg["seed"], "n_trials": len(ds), "generator": spec.to_dict(), "separation": {}}
    if spec.n_samples >= 64:
        for view in ("direction", "task"):
            sidecar["separation"][view] = make_prototypes(spec, spec.n_samples, view).separation
    Path(str(out_path) + ".json").write_text(_dump_json(sidecar))
    print(f"wrote {len(ds)} trials to {out_path}")
    return EXIT_OK


def _pipeline_config(cfg, **extra) -> PipelineConfig:
    keys = set(PipelineConfig.__dataclass_fields__)
    try:
        return PipelineConfig(**{k: cfg[k] for k in keys if k in cfg}, **extra)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def cmd_xval(cfg) -> int:
    out = Path(cfg["out"])
    pcfg = _pipeline_config(cfg)
    _setup_run(cfg, out)
    ds = _load_dataset(cfg["dataset"])
    try:
        rep = cross_validate(
            ds, pcfg, cfg["scheme"], cfg["seed"], n_folds=cfg["folds"],
            shuffle_labels=bool(cfg["shuffle_labels"]), n_workers=cfg["threads"],
        )
    except ValueError as exc:
        raise UsageError(f"infeasible configuration: {exc}") from exc
    (out / "report.json").write_text(rep.to_json())
    (out / "confusion.csv").write_text(rep.confusion_csv())
    print(f"accuracy {rep.accuracy:.4f} over {rep.n_evaluated} trials ({rep.scheme})")
    return EXIT_OK


def cmd_tune(cfg) -> int:
    out = Path(cfg["out"])
    try:
        grids = {
            "T": _ints(cfg["T_grid"]), "J": _ints(cfg["J_grid"]), "lam": _floats(cfg["lam_grid"]),
            "P": _ints(cfg["P_grid"]), "family": _strs(cfg["family_grid"]),
        }
    except ValueError as exc:
        raise UsageError(f"bad grid value: {exc}") from exc
    empty = [k for k, v in grids.items() if not v]
    if empty:
        raise UsageError(f"empty grid for {empty}")
    base = _pipeline_config(cfg, features="wavelet")
    _setup_run(cfg, out)
    ds = _load_dataset(cfg["dataset"])
    try:
        res = grid_search(ds, **grids, base=base, scheme=cfg["scheme"], seed=cfg["seed"],
                          n_folds=cfg["folds"], n_workers=cfg["threads"])
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    (out / "grid.csv").write_text(res.to_csv())
    best = {"config": res.best.to_dict(), "accuracy": res.best_accuracy, "seed": cfg["seed"], "skipped": res.skipped}
    (out / "best.json").write_text(_dump_json(best))
    print(f"best accuracy {res.best_accuracy:.4f}: T={res.best.T} J={res.best.J} lam={res.best.lam} "
          f"P={res.best.P} family={res.best.family} ({len(res.table)} combinations)")
    return EXIT_OK


def cmd_rate(cfg) -> int:
    out = Path(cfg["out"])
    eps = _floats(cfg["eps"])
    if len(eps) < 3:
        raise UsageError("need at least 3 noise levels to fit a slope")
    try:
        body = BesovBody(float(cfg["alpha"]), float(cfg["p"]), float(cfg["q"]), float(cfg["C"]))
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    name = cfg["estimator"]
    expect = cfg.get("expect_slope")
    if expect is None:
        expect = {"universal": 2 * body.rate_exponent, "identity": 2.0, "zero": 0.0}[name]
        cfg["expect_slope"] = expect
    _setup_run(cfg, out)
    res = rate_experiment(body, eps, ESTIMATORS[name], int(cfg["n_rep"]), seed=cfg["seed"],
                          max_level=int(cfg["max_level"]), n_workers=cfg["threads"])
    (out / "rate.csv").write_text(res.to_csv())
    passed = abs(res.slope - expect) <= float(cfg["slope_tol"])
    summary = {
        "epsilon": res.epsilons, "sup_risk": res.sup_risks, "slope": res.slope,
        "slope_ci95": list(res.slope_ci), "expected_slope": expect, "pass": passed, "seed": res.seed,
    }
    (out / "rate.json").write_text(_dump_json(summary))
    for e, r in zip(res.epsilons, res.sup_risks):
        print(f"eps={e:<8g} sup_risk={r:.6g}")
    print(f"slope {res.slope:.4f} (95% CI {res.slope_ci[0]:.4f} .. {res.slope_ci[1]:.4f}); expected {expect:.4f}")
    if cfg["check"]:
        print("PASS" if passed else "FAIL")
        return EXIT_OK if passed else EXIT_CHECK
    return EXIT_OK


def cmd_decode(cfg) -> int:
    out = Path(cfg["out"])
    try:
        grid = _ints(cfg["grid"])
        spec = GeneratorSpec(style=cfg["style"], amplitude=float(cfg["amplitude"]))
        res_args = dict(sigma=float(cfg["sigma"]), n_grid=grid, n_trials=int(cfg["trials"]))
        for n in grid:
            if n < 64 or n & (n - 1):
                raise ValueError(f"grid length {n} must be a power of two >= 64")
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    _setup_run(cfg, out)
    try:
        res = consistency_experiment(
            lambda n: make_prototypes(spec, n, cfg["view"]), seed=cfg["seed"], wavelet=cfg["wavelet"],
            n_workers=cfg["threads"], **res_args,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    (out / "decode.csv").write_text(res.to_csv())
    for r in res.rows:
        print(f"N={r.N:<6d} s={r.s:.4f} max_error={r.empirical_max_error:.4f} bound={r.theorem1_bound:.4f}")
    print(f"bound check: {'PASS' if res.bound_holds else 'FAIL'}")
    print(f"monotone decrease: {'PASS' if res.nonincreasing else 'FAIL'}")
    return EXIT_OK if res.bound_holds and res.nonincreasing else EXIT_CHECK


COMMANDS = {"gen": cmd_gen, "xval": cmd_xval, "tune": cmd_tune, "rate": cmd_rate, "decode": cmd_decode}


def main(argv=None) -> int:
    try:
        ns = build_parser().parse_args(argv)
        cfg = resolve(ns)
        return COMMANDS[cfg["command"]](cfg)
    except UsageError as exc:
        print(f"wavshrink: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"wavshrink: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    finally:
        for h in log.handlers:
            h.close()
        log.handlers[:] = []


if __name__ == "__main__":
    sys.exit(main())
