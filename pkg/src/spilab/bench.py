"""Experiment harness: compression-ratio sweeps, noise sweeps, promotion
summaries, and report emission.

Determinism contract: every sweep cell derives its measurement seeds by
hashing (base_seed, image id, CR, SNR, repetition) with SHA-256, so matched
prior / prior+CSC pairs see identical patterns and noise (the algorithm is
deliberately not part of the hash) and any row can be reproduced in
isolation. records.csv contains only deterministic columns; wall-clock
times go to the timings.csv sidecar so a replayed sweep is byte-identical.
"""

import csv
import hashlib
import json
import pathlib
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, asdict

import numpy as np

from . import __version__
from . import forward, solver
from .dictionary import load_dictionary
from .imageio import load_image
from .metrics import ALGORITHMS, MetricsRecord, psnr, rmse

CSV_COLUMNS = ["image_id", "algorithm", "cr", "snr_db", "rep", "psnr_db",
               "rmse", "iterations", "converged", "seed", "dictionary_id"]


@dataclass
class SweepSpec:
    """Declarative description of a benchmark sweep."""

    image_paths: list
    compression_ratios: list
    snr_list: list = field(default_factory=list)  # dB values; empty: noiseless
    algorithms: list = field(default_factory=lambda: ["TV", "TV_CSC"])
    dictionary_path: str = ""
    pattern_kind: str = "bernoulli01"
    base_seed: int = 0
    repetitions: int = 1
    solver_options: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.image_paths:
            raise ValueError("sweep needs at least one image")
        if not self.algorithms:
            raise ValueError("sweep needs at least one algorithm")
        unknown = set(self.algorithms) - set(ALGORITHMS)
        if unknown:
            raise ValueError("unknown algorithms: %s" % sorted(unknown))
        if any(not 0.0 < cr <= 1.0 for cr in self.compression_ratios):
            raise ValueError("compression ratios must be in (0, 1]")
        needs_dict = any(a.endswith("_CSC") for a in self.algorithms)
        if needs_dict and not self.dictionary_path:
            raise ValueError("CSC algorithms require dictionary_path")


def cell_seed(base_seed, image_id, cr, snr_db, rep, purpose):
    """Stable 63-bit seed for one sweep cell; excludes the algorithm so
    paired algorithms share patterns and noise."""
    key = "%d|%s|%.10g|%s|%d|%s" % (
        base_seed, image_id, cr,
        "none" if snr_db is None else "%.10g" % snr_db, rep, purpose)
    digest = hashlib.sha256(key.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little") >> 1


def run_cr_sweep(spec, jobs=1):
    """Fig.-2-style sweep: every (image, CR, algorithm, repetition) cell at a
    single (optional) SNR. Record count is exactly the combinatorial product;
    per-cell failures become failed rows, never aborted sweeps."""
    if len(spec.snr_list) > 1:
        raise ValueError("run_cr_sweep uses a single SNR; got %r"
                         % (spec.snr_list,))
    snr = spec.snr_list[0] if spec.snr_list else None
    cells = [(path, cr, snr, alg, rep)
             for path in spec.image_paths
             for cr in spec.compression_ratios
             for alg in spec.algorithms
             for rep in range(spec.repetitions)]
    return _run_cells(spec, cells, jobs)


def run_noise_sweep(spec, jobs=1):
    """Fig.-4-style sweep over the SNR grid at one fixed CR (default 0.25)."""
    if len(spec.compression_ratios) != 1:
        raise ValueError("run_noise_sweep uses a single CR; got %r"
                         % (spec.compression_ratios,))
    if not spec.snr_list:
        raise ValueError("run_noise_sweep needs a non-empty snr_list")
    cr = spec.compression_ratios[0]
    cells = [(path, cr, snr, alg, rep)
             for path in spec.image_paths
             for snr in spec.snr_list
             for alg in spec.algorithms
             for rep in range(spec.repetitions)]
    return _run_cells(spec, cells, jobs)


def _run_cells(spec, cells, jobs):
    args = [(spec, cell) for cell in cells]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            records = list(pool.map(_run_cell_star, args))
    else:
        records = [_run_cell_star(a) for a in args]
    records.sort(key=_record_key)
    return records


def _record_key(rec):
    snr = -float("inf") if rec.snr_db is None else rec.snr_db
    return (rec.image_id, rec.algorithm_id, rec.compression_ratio, snr,
            rec.rep)


def _run_cell_star(args):
    return run_cell(*args)


def run_cell(spec, cell):
    """Execute one sweep cell and return its MetricsRecord."""
    path, cr, snr, algorithm, rep = cell
    image_id = pathlib.Path(path).stem
    seed = cell_seed(spec.base_seed, image_id, cr, snr, rep, "pattern")
    started = time.perf_counter()
    try:
        truth = load_image(path)
        count = forward.pattern_count_for_cr(cr, *truth.shape)
        patterns = forward.gen_patterns(count, truth.shape[0], truth.shape[1],
                                        spec.pattern_kind, seed)
        measurement = forward.measure(truth, patterns)
        if snr is not None:
            noise_seed = cell_seed(spec.base_seed, image_id, cr, snr, rep,
                                   "noise")
            measurement = forward.add_noise(measurement, snr, noise_seed)
        dictionary = (load_dictionary(spec.dictionary_path)
                      if algorithm.endswith("_CSC") else None)
        result = run_algorithm(algorithm, measurement, patterns, dictionary,
                               spec.solver_options)
        elapsed = time.perf_counter() - started
        # metrics are computed on the canonical exported raster (clamped and
        # quantized to the 16-bit grid), so recomputing them from a saved
        # reconstruction file reproduces the recorded values exactly
        exported = np.round(result.image * 65535.0) / 65535.0
        return MetricsRecord(
            algorithm_id=algorithm, compression_ratio=cr, snr_db=snr,
            psnr_db=psnr(truth, exported), rmse=rmse(truth, exported),
            image_id=image_id, wall_time=elapsed, seed=seed, rep=rep,
            iterations=result.iterations_used, converged=result.converged,
            dictionary_id=dictionary.dict_id() if dictionary else "")
    except Exception as exc:  # failed rows are recorded, never dropped
        elapsed = time.perf_counter() - started
        return MetricsRecord(
            algorithm_id=algorithm, compression_ratio=cr, snr_db=snr,
            psnr_db=-float("inf"), rmse=float("inf"), image_id=image_id,
            wall_time=elapsed, seed=seed, rep=rep, iterations=0,
            converged=False, dictionary_id="error:%s" % type(exc).__name__)


def run_algorithm(algorithm, measurement, patterns, dictionary=None,
                  solver_options=None):
    """Dispatch one reconstruction by algorithm id."""
    options = dict(solver_options or {})
    if algorithm == "LS":
        return solver.reconstruct_ls(measurement, patterns)
    if algorithm in ("TV", "DCT"):
        cfg = solver.SolverConfig(prior=algorithm, **options)
        return solver.reconstruct_global(measurement, patterns, cfg)
    if algorithm in ("TV_CSC", "DCT_CSC"):
        if dictionary is None:
            raise ValueError("algorithm %s requires a dictionary" % algorithm)
        cfg = solver.SolverConfig(prior=algorithm.split("_")[0], use_csc=True,
                                  dictionary=dictionary, **options)
        return solver.reconstruct_csc(measurement, patterns, cfg)
    raise ValueError("unknown algorithm %r" % (algorithm,))


# --------------------------------------------------------------------------
# promotion summary (Fig. 3)

_FAMILIES = (("TV", "TV_CSC"), ("DCT", "DCT_CSC"))


def summarize_promotion(records):
    """Per-CR mean/min/max of the paired CSC deltas, grouped by prior family.

    Pairs are matched on (image, CR, SNR, seed); unmatched rows raise with
    the orphan list.
    """
    table = []
    for base_alg, csc_alg in _FAMILIES:
        base = {_pair_key(r): r for r in records if r.algorithm_id == base_alg}
        cscs = {_pair_key(r): r for r in records if r.algorithm_id == csc_alg}
        if not base and not cscs:
            continue
        orphans = sorted(set(base) ^ set(cscs))
        if orphans:
            raise ValueError("unpaired %s/%s records: %s"
                             % (base_alg, csc_alg, orphans))
        by_cr = {}
        for key, b in base.items():
            c = cscs[key]
            by_cr.setdefault(b.compression_ratio, []).append(
                (c.psnr_db - b.psnr_db, c.rmse - b.rmse))
        for cr in sorted(by_cr):
            dpsnr = np.array([d[0] for d in by_cr[cr]])
            drmse = np.array([d[1] for d in by_cr[cr]])
            table.append({
                "family": base_alg, "cr": cr, "pairs": len(dpsnr),
                "dpsnr_mean": float(dpsnr.mean()),
                "dpsnr_min": float(dpsnr.min()),
                "dpsnr_max": float(dpsnr.max()),
                "drmse_mean": float(drmse.mean()),
                "drmse_min": float(drmse.min()),
                "drmse_max": float(drmse.max()),
            })
    return table


def _pair_key(rec):
    return (rec.image_id, rec.compression_ratio, rec.snr_db, rec.seed)


# --------------------------------------------------------------------------
# report emission and replay

def emit_report(records, out_dir, spec=None):
    """Write records.csv, timings.csv, manifest.json, and SVG charts.

    records.csv is fully deterministic (wall times live in timings.csv);
    manifest.json carries everything needed to replay the sweep.
    """
    if not records:
        raise ValueError("emit_report requires a non-empty record list")
    out = pathlib.Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    records = sorted(records, key=_record_key)

    with open(out / "records.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for rec in records:
            writer.writerow([
                rec.image_id, rec.algorithm_id, _fmt(rec.compression_ratio),
                "" if rec.snr_db is None else _fmt(rec.snr_db),
                rec.rep, _fmt(rec.psnr_db), _fmt(rec.rmse),
                rec.iterations, str(bool(rec.converged)).lower(), rec.seed,
                rec.dictionary_id])

    with open(out / "timings.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["image_id", "algorithm", "cr", "snr_db", "seed",
                         "wall_time_s"])
        for rec in records:
            writer.writerow([rec.image_id, rec.algorithm_id,
                             _fmt(rec.compression_ratio),
                             "" if rec.snr_db is None else _fmt(rec.snr_db),
                             rec.seed, "%.6f" % rec.wall_time])

    manifest = {"spilab_version": __version__, "rng": forward.RNG_NAME}
    if spec is not None:
        manifest["sweep_spec"] = asdict(spec)
    manifest["rows"] = [
        {"image_id": r.image_id, "algorithm": r.algorithm_id,
         "cr": r.compression_ratio, "snr_db": r.snr_db, "seed": r.seed,
         "dictionary_id": r.dictionary_id} for r in records]
    with open(out / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")

    _emit_charts(records, out)


def replay(manifest_path, out_dir, jobs=1):
    """Re-run a sweep from its manifest; produces byte-identical records.csv."""
    with open(manifest_path) as fh:
        manifest = json.load(fh)
    if "sweep_spec" not in manifest:
        raise ValueError("manifest lacks a sweep_spec; cannot replay")
    spec = SweepSpec(**manifest["sweep_spec"])
    if len(spec.compression_ratios) == 1 and len(spec.snr_list) > 1:
        records = run_noise_sweep(spec, jobs=jobs)
    else:
        records = run_cr_sweep(spec, jobs=jobs)
    emit_report(records, out_dir, spec=spec)
    return records


def _fmt(value):
    value = float(value)
    if value != value:
        return "nan"
    return repr(value)


def _emit_charts(records, out):
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    ok = [r for r in records if np.isfinite(r.psnr_db)]
    crs = sorted({r.compression_ratio for r in ok})
    snrs = sorted({r.snr_db for r in ok if r.snr_db is not None})
    algs = sorted({r.algorithm_id for r in ok})

    if len(crs) > 1:
        fig, ax = plt.subplots(figsize=(6, 4))
        for alg in algs:
            xs, ys = [], []
            for cr in crs:
                vals = [r.psnr_db for r in ok
                        if r.algorithm_id == alg and r.compression_ratio == cr]
                if vals:
                    xs.append(cr)
                    ys.append(np.mean(vals))
            ax.plot(xs, ys, marker="o", label=alg)
        ax.set_xlabel("compression ratio")
        ax.set_ylabel("PSNR (dB)")
        ax.legend()
        ax.grid(True, alpha=0.3)
        fig.savefig(out / "psnr_vs_cr.svg", bbox_inches="tight")
        plt.close(fig)

    if len(snrs) > 1:
        fig, ax = plt.subplots(figsize=(6, 4))
        for alg in algs:
            xs, ys = [], []
            for snr in snrs:
                vals = [r.rmse for r in ok
                        if r.algorithm_id == alg and r.snr_db == snr]
                if vals:
                    xs.append(snr)
                    ys.append(np.mean(vals))
            ax.plot(xs, ys, marker="o", label=alg)
        ax.set_xlabel("SNR (dB)")
        ax.set_ylabel("RMSE")
        ax.legend()
        ax.grid(True, alpha=0.3)
        fig.savefig(out / "rmse_vs_snr.svg", bbox_inches="tight")
        plt.close(fig)

    try:
        promotion = summarize_promotion(records)
    except ValueError:
        promotion = []
    for family in ("TV", "DCT"):
        rows = [p for p in promotion if p["family"] == family]
        if len(rows) < 1:
            continue
        fig, ax = plt.subplots(figsize=(6, 4))
        xs = [p["cr"] for p in rows]
        ax.plot(xs, [p["dpsnr_mean"] for p in rows], marker="o",
                label="mean")
        ax.fill_between(xs, [p["dpsnr_min"] for p in rows],
                        [p["dpsnr_max"] for p in rows], alpha=0.25,
                        label="min/max")
        ax.axhline(0.0, color="k", linewidth=0.8)
        ax.set_xlabel("compression ratio")
        ax.set_ylabel("PSNR gain from CSC (dB)")
        ax.set_title("%s family" % family)
        ax.legend()
        ax.grid(True, alpha=0.3)
        fig.savefig(out / ("promotion_%s.svg" % family.lower()),
                    bbox_inches="tight")
        plt.close(fig)
