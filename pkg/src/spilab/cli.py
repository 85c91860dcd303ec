"""Command-line interface.

One binary with subcommands wiring the library end to end:

    spilab learn-dict    train a convolutional dictionary from a corpus
    spilab simulate      scene -> patterns -> bucket measurements (SPIM file)
    spilab reconstruct   SPIM file -> reconstructed image + JSON sidecar
    spilab sweep         run a benchmark sweep from a spec file
    spilab report        regenerate charts/summary from a records.csv

Every subcommand accepts ``--config FILE`` (a key = value overlay; unknown
keys are rejected) and ``--print-config`` (dump the effective configuration
and exit without doing work). Precedence: command line > config file >
defaults. All randomness flows from explicit seeds; omitting ``--seed``
uses the fixed default 1234, never entropy. ``--jobs`` falls back to the
SPI_LAB_JOBS environment variable.
"""

import argparse
import json
import os
import pathlib
import sys

import numpy as np

from . import __version__
from . import bench, forward, solver
from .dictionary import LearnConfig, learn, load_dictionary, save_dictionary
from .imageio import load_image, save_image
from .metrics import ALGORITHMS

DEFAULT_SEED = 1234

_ALGORITHM_TOKENS = {
    "ls": "LS", "tv": "TV", "dct": "DCT", "tv-csc": "TV_CSC",
    "dct-csc": "DCT_CSC",
}


def main(argv=None):
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        config = _effective_config(args)
    except CliError as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 2
    if config.pop("print_config"):
        for key in sorted(config):
            print("%s = %s" % (key, _config_repr(config[key])))
        return 0
    try:
        return args.handler(config)
    except CliError as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 1


class CliError(Exception):
    pass


# --------------------------------------------------------------------------
# subcommand handlers

def _cmd_learn_dict(cfg):
    corpus_dir = pathlib.Path(cfg["corpus"])
    if not corpus_dir.is_dir():
        raise CliError("corpus directory does not exist: %s" % corpus_dir)
    paths = sorted(p for p in corpus_dir.iterdir()
                   if p.suffix.lower() in (".pgm", ".png"))
    if not paths:
        raise CliError("no .pgm/.png images in corpus directory %s" % corpus_dir)
    out = pathlib.Path(cfg["out"])
    try:
        images = [load_image(p) for p in paths]
        learn_cfg = LearnConfig(beta=cfg["beta"], outer_iterations=cfg["iters"],
                                admm_rho=cfg["rho"], seed=cfg["seed"])
        dictionary = learn(images, cfg["kernels"], cfg["size"], learn_cfg,
                           corpus_ids=[p.stem for p in paths])
        save_dictionary(dictionary, out)
    except Exception as exc:
        if out.exists():
            out.unlink()
        raise CliError("dictionary training failed: %s" % exc) from exc
    hist = dictionary.training_meta["objective_history"]
    norms = np.linalg.norm(
        dictionary.kernels.reshape(dictionary.kernel_count, -1), axis=1)
    print("trained %d kernels (%dx%d) on %d images"
          % (dictionary.kernel_count, dictionary.kernel_size,
             dictionary.kernel_size, len(images)))
    print("objective %.6g -> %.6g over %d outer iterations"
          % (hist[0], hist[-1], len(hist)))
    print("kernel l2 norms: min %.6f max %.6f" % (norms.min(), norms.max()))
    print("wrote %s (id %s)" % (out, dictionary.dict_id()))
    return 0


def _cmd_simulate(cfg):
    scene = _load_or_fail(cfg["scene"], "scene image")
    h, w = scene.shape
    if cfg["patterns"] is not None:
        count = cfg["patterns"]
    elif cfg["cr"] is not None:
        count = forward.pattern_count_for_cr(cfg["cr"], h, w)
    else:
        raise CliError("one of --cr or --patterns is required")
    patterns = forward.gen_patterns(count, h, w, cfg["pattern_kind"],
                                    cfg["seed"])
    if cfg["snr"] is None:
        measurement = forward.measure(scene, patterns)
    elif cfg["samplings"] > 1:
        measurement = forward.average_samplings(scene, patterns, cfg["snr"],
                                                cfg["samplings"], cfg["seed"])
    else:
        measurement = forward.add_noise(forward.measure(scene, patterns),
                                        cfg["snr"], cfg["seed"])
    forward.save_measurement(measurement, cfg["out"])
    print("wrote %s: M=%d (%s, CR %.4g), %s"
          % (cfg["out"], count, cfg["pattern_kind"], count / (h * w),
             "noiseless" if cfg["snr"] is None else
             "snr %g dB x%d samplings" % (cfg["snr"], cfg["samplings"])))
    return 0


def _cmd_reconstruct(cfg):
    algorithm = _ALGORITHM_TOKENS[cfg["algorithm"]]
    measurement = _catch(lambda: forward.load_measurement(cfg["measurement"]),
                         "measurement file")
    patterns = forward.regenerate_patterns(measurement)
    dictionary = None
    if algorithm.endswith("_CSC"):
        if not cfg["dict"]:
            raise CliError("algorithm %s requires --dict" % cfg["algorithm"])
        dictionary = _catch(lambda: load_dictionary(cfg["dict"]),
                            "dictionary file")
    options = {}
    for key, name in (("lam", "lam"), ("mu", "mu"), ("rho", "rho"),
                      ("iterations", "max_iterations"),
                      ("tolerance", "tolerance")):
        if cfg[key] is not None:
            options[name] = cfg[key]

    out = pathlib.Path(cfg["out"])
    sidecar = out.with_suffix(out.suffix + ".json")
    try:
        result = bench.run_algorithm(algorithm, measurement, patterns,
                                     dictionary, options)
    except Exception as exc:
        _write_json(sidecar, {"algorithm": algorithm, "error": str(exc),
                              "measurement": str(cfg["measurement"])})
        raise CliError("reconstruction failed: %s (diagnostics in %s)"
                       % (exc, sidecar)) from exc
    save_image(result.image, out)
    _write_json(sidecar, {
        "algorithm": algorithm,
        "measurement": str(cfg["measurement"]),
        "iterations_used": int(result.iterations_used),
        "converged": bool(result.converged),
        "dc_estimate": result.dc_estimate,
        "objective_history": [float(x) for x in result.objective_history],
        "residual_history": [[float(a), float(b)]
                             for a, b in result.residual_history],
        "config": _echo_config(result, dictionary),
    })
    print("wrote %s (+ %s): %d iterations, converged=%s"
          % (out, sidecar.name, result.iterations_used, result.converged))
    return 0


def _cmd_sweep(cfg):
    spec = _load_sweep_spec(cfg["spec"])
    out = pathlib.Path(cfg["out"])
    kind = cfg["kind"]
    runner = bench.run_noise_sweep if kind == "noise" else bench.run_cr_sweep
    records = runner(spec, jobs=cfg["jobs"])
    bench.emit_report(records, out, spec=spec)
    failed = [r for r in records if r.dictionary_id.startswith("error:")]
    print("sweep complete: %d records (%d failed) -> %s"
          % (len(records), len(failed), out))
    if failed and cfg["strict"]:
        for r in failed:
            print("failed: %s %s cr=%g: %s"
                  % (r.image_id, r.algorithm_id, r.compression_ratio,
                     r.dictionary_id), file=sys.stderr)
        return 1
    if len(failed) == len(records):
        raise CliError("every sweep cell failed")
    return 0


def _cmd_report(cfg):
    records = _read_records_csv(cfg["records"])
    out = pathlib.Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    bench._emit_charts(records, out)
    try:
        table = bench.summarize_promotion(records)
    except ValueError as exc:
        print("promotion summary skipped: %s" % exc, file=sys.stderr)
        table = []
    if table:
        import csv as _csv
        with open(out / "promotion.csv", "w", newline="") as fh:
            writer = _csv.DictWriter(fh, fieldnames=list(table[0]))
            writer.writeheader()
            writer.writerows(table)
    print("report written to %s" % out)
    return 0


# --------------------------------------------------------------------------
# option plumbing

def _build_parser():
    parser = argparse.ArgumentParser(
        prog="spilab",
        description="single-pixel imaging simulation and reconstruction")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, handler, options):
        p = sub.add_parser(name)
        for flag, kwargs in options.items():
            p.add_argument(flag, **kwargs)
        p.add_argument("--config", default=None,
                       help="key = value overlay file")
        p.add_argument("--print-config", action="store_true",
                       help="print the effective configuration and exit")
        p.set_defaults(handler=handler)
        return p

    add("learn-dict", _cmd_learn_dict, {
        "--corpus": dict(default=None, help="directory of training images"),
        "--kernels": dict(type=int, default=None, help="kernel count K"),
        "--size": dict(type=int, default=None, help="kernel size m"),
        "--beta": dict(type=float, default=None, help="l1 weight (default 1.0)"),
        "--iters": dict(type=int, default=None,
                        help="outer iterations (default 20)"),
        "--rho": dict(type=float, default=None, help="ADMM penalty"),
        "--seed": dict(type=int, default=None),
        "--out": dict(default=None, help="output .cscd path"),
    })
    add("simulate", _cmd_simulate, {
        "--scene": dict(default=None, help="input scene image"),
        "--cr": dict(type=float, default=None, help="compression ratio"),
        "--patterns": dict(type=int, default=None, help="pattern count M"),
        "--pattern-kind": dict(default=None,
                               choices=sorted(forward.PATTERN_KINDS)),
        "--snr": dict(type=float, default=None,
                      help="measurement SNR in dB (omit for noiseless)"),
        "--samplings": dict(type=int, default=None,
                            help="average n noisy samplings"),
        "--seed": dict(type=int, default=None),
        "--out": dict(default=None, help="output .spim path"),
    })
    add("reconstruct", _cmd_reconstruct, {
        "--measurement": dict(default=None, help="input .spim path"),
        "--algorithm": dict(default=None, choices=sorted(_ALGORITHM_TOKENS)),
        "--dict": dict(default=None, help=".cscd path (CSC algorithms)"),
        "--lam": dict(type=float, default=None, help="CSC l1 weight"),
        "--mu": dict(type=float, default=None, help="data weight override"),
        "--rho": dict(type=float, default=None, help="ADMM penalty"),
        "--iterations": dict(type=int, default=None),
        "--tolerance": dict(type=float, default=None),
        "--seed": dict(type=int, default=None),
        "--out": dict(default=None, help="output image path"),
    })
    add("sweep", _cmd_sweep, {
        "--spec": dict(default=None, help="sweep spec file (key = value)"),
        "--kind": dict(default=None, choices=["cr", "noise"]),
        "--jobs": dict(type=int, default=None),
        "--strict": dict(action="store_true", default=None),
        "--seed": dict(type=int, default=None,
                       help="overrides base_seed from the spec file"),
        "--out": dict(default=None, help="output directory"),
    })
    add("report", _cmd_report, {
        "--records": dict(default=None, help="records.csv from a sweep"),
        "--seed": dict(type=int, default=None),
        "--out": dict(default=None, help="output directory"),
    })
    return parser


_REQUIRED = {
    "learn-dict": ("corpus", "kernels", "size", "out"),
    "simulate": ("scene", "out"),
    "reconstruct": ("measurement", "algorithm", "out"),
    "sweep": ("spec", "out"),
    "report": ("records", "out"),
}

_DEFAULTS = {
    "learn-dict": {"beta": 1.0, "iters": 20, "rho": 1.0, "seed": DEFAULT_SEED},
    "simulate": {"pattern_kind": "bernoulli01", "samplings": 1,
                 "seed": DEFAULT_SEED, "cr": None, "patterns": None,
                 "snr": None},
    "reconstruct": {"dict": None, "lam": None, "mu": None, "rho": None,
                    "iterations": None, "tolerance": None,
                    "seed": DEFAULT_SEED},
    "sweep": {"kind": "cr", "jobs": None, "strict": False,
              "seed": None},
    "report": {"seed": DEFAULT_SEED},
}


def _effective_config(args):
    command = args.command
    cli = {k: v for k, v in vars(args).items()
           if k not in ("handler", "command", "config")}
    print_config = cli.pop("print_config")
    effective = dict.fromkeys(cli)
    effective.update(_DEFAULTS.get(command, {}))
    if args.config:
        overlay = _parse_kv_file(args.config)
        unknown = set(overlay) - set(cli)
        if unknown:
            raise CliError("unknown config keys for %s: %s"
                           % (command, ", ".join(sorted(unknown))))
        for key, raw in overlay.items():
            effective[key] = _coerce_like(cli.get(key), key, raw)
    for key, value in cli.items():
        if value is not None:
            effective[key] = value
    if command == "sweep" and effective.get("jobs") is None:
        env_jobs = os.environ.get("SPI_LAB_JOBS")
        effective["jobs"] = int(env_jobs) if env_jobs else 1
    missing = [k for k in _REQUIRED.get(command, ()) if effective.get(k) is None]
    if missing:
        raise CliError("missing required options: %s"
                       % ", ".join("--" + m.replace("_", "-") for m in missing))
    effective["print_config"] = print_config
    return effective


def _parse_kv_file(path):
    if not pathlib.Path(path).is_file():
        raise CliError("config file not found: %s" % path)
    table = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise CliError("%s:%d: expected 'key = value'" % (path, lineno))
            key, value = (part.strip() for part in line.split("=", 1))
            table[key.replace("-", "_")] = value
    return table


def _coerce_like(_cli_value, key, raw):
    lowered = raw.lower()
    if lowered in ("true", "false"):
        return lowered == "true"
    if lowered in ("none", ""):
        return None
    for conv in (int, float):
        try:
            return conv(raw)
        except ValueError:
            continue
    return raw.strip("\"'")


def _config_repr(value):
    if isinstance(value, bool):
        return str(value).lower()
    if value is None:
        return "none"
    if isinstance(value, (list, tuple)):
        return ", ".join(str(v) for v in value)
    return str(value)


def _load_sweep_spec(path):
    table = _parse_kv_file(path)
    known = {"images", "crs", "snrs", "algorithms", "dictionary",
             "pattern_kind", "base_seed", "repetitions", "lam", "mu", "rho",
             "max_iterations", "tolerance"}
    unknown = set(table) - known
    if unknown:
        raise CliError("unknown sweep spec keys: %s" % ", ".join(sorted(unknown)))
    if "images" not in table or "crs" not in table:
        raise CliError("sweep spec needs 'images' and 'crs'")

    image_paths = []
    for token in _split(table["images"]):
        p = pathlib.Path(token)
        if p.is_dir():
            image_paths.extend(sorted(str(q) for q in p.iterdir()
                                      if q.suffix.lower() in (".pgm", ".png")))
        elif "*" in token:
            image_paths.extend(sorted(str(q) for q in
                                      pathlib.Path(".").glob(token)))
        else:
            image_paths.append(token)

    algorithms = [_ALGORITHM_TOKENS.get(t.lower(), t.upper())
                  for t in _split(table.get("algorithms", "tv,tv-csc"))]
    solver_options = {}
    for key, name in (("lam", "lam"), ("mu", "mu"), ("rho", "rho"),
                      ("max_iterations", "max_iterations"),
                      ("tolerance", "tolerance")):
        if key in table:
            value = _coerce_like(None, key, table[key])
            solver_options[name] = value
    try:
        return bench.SweepSpec(
            image_paths=image_paths,
            compression_ratios=[float(c) for c in _split(table["crs"])],
            snr_list=[float(s) for s in _split(table.get("snrs", ""))],
            algorithms=algorithms,
            dictionary_path=table.get("dictionary", ""),
            pattern_kind=table.get("pattern_kind", "bernoulli01"),
            base_seed=int(table.get("base_seed", DEFAULT_SEED)),
            repetitions=int(table.get("repetitions", 1)),
            solver_options=solver_options)
    except (ValueError, TypeError) as exc:
        raise CliError("invalid sweep spec: %s" % exc) from exc


def _split(raw):
    return [t.strip() for t in str(raw).split(",") if t.strip()]


def _read_records_csv(path):
    import csv as _csv

    from .metrics import MetricsRecord
    if not pathlib.Path(path).is_file():
        raise CliError("records file not found: %s" % path)
    records = []
    with open(path, newline="") as fh:
        for row in _csv.DictReader(fh):
            records.append(MetricsRecord(
                algorithm_id=row["algorithm"],
                compression_ratio=float(row["cr"]),
                snr_db=float(row["snr_db"]) if row["snr_db"] else None,
                psnr_db=float(row["psnr_db"]), rmse=float(row["rmse"]),
                image_id=row["image_id"], wall_time=0.0,
                seed=int(row["seed"]), rep=int(row["rep"]),
                iterations=int(row["iterations"]),
                converged=row["converged"] == "true",
                dictionary_id=row["dictionary_id"]))
    if not records:
        raise CliError("no data rows in %s" % path)
    return records


def _echo_config(result, dictionary):
    cfg = result.config_echo
    if cfg is None:
        return {"solver": "ls", "tolerance": 1e-10}
    return {
        "prior": cfg.prior, "use_csc": cfg.use_csc, "lam": cfg.lam,
        "mu": cfg.mu, "rho": cfg.rho, "max_iterations": cfg.max_iterations,
        "tolerance": cfg.tolerance, "cg_tolerance": cfg.cg_tolerance,
        "dictionary_id": dictionary.dict_id() if dictionary else None,
    }


def _load_or_fail(path, what):
    return _catch(lambda: load_image(path), what)


def _catch(fn, what):
    try:
        return fn()
    except Exception as exc:
        raise CliError("cannot load %s: %s" % (what, exc)) from exc


def _write_json(path, payload):
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


if __name__ == "__main__":
    sys.exit(main())
