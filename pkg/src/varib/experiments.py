"""Experiment configs, presets, and the artifact-producing runner.

A run is one (task, model) pair driven by a JSON config.  Outputs land in
one directory per run: model file, curve/report CSVs, filter and
reconstruction PGMs, and a manifest listing every file with a content
hash.  All randomness derives from the config seed, so reruns are
byte-identical (the manifest itself carries wall time and is the one file
excluded from that guarantee).
"""

import copy
import hashlib
import json
import time
from pathlib import Path

import numpy as np

from . import __version__, core, kernel, metrics
from .core import BottleneckConfig
from .dataset import dataset_from_pairs, make_occlusion_split, occlusion_columns, reassemble_occlusion
from .exceptions import ConfigError, NumericalError, VaribError
from .kernel import KernelConfig
from .matrixio import load_matrix, save_filter_grid, save_matrix, save_pgm
from .patches import NoiseSpec, PatchSpec, apply_noise, generate_bar_patches, render_bars
from .serialize import load_model, save_model

TASKS = ("denoise", "denoise_correlated", "occlusion_bars", "occlusion_digits")
MODELS = ("gaussian_ib", "sparse_ib", "gaussian_kib", "sparse_kib", "null")
KERNEL_MODELS = ("gaussian_kib", "sparse_kib")


# ---------------------------------------------------------------------------
# presets
# ---------------------------------------------------------------------------

def _bar_dataset(n_train, n_holdout=0, side=9):
    return {
        "n_train": n_train,
        "n_holdout": n_holdout,
        "side": side,
        "n_bars": 3,
        "bar_width": 1.2,
        "amplitude_std": 1.0,
    }


PRESETS = {
    # desk scale: minutes, used by the acceptance suite
    "denoise_desk": {
        "task": "denoise",
        "model": "sparse_ib",
        "seed": 2026,
        "dataset": dict(_bar_dataset(2000), noise={"kind": "white", "variance": 0.005}),
        "bottleneck": {
            "gamma": 0.3,
            "gamma_grid": [0.6, 0.45, 0.3, 0.18, 0.08],
            "n_units": 40,
            "max_iter": 120,
            "rel_tol": 3e-6,
        },
        "report": {"n_filters": 16, "n_recon": 6, "null_points": 24},
    },
    "denoise_correlated_desk": {
        "task": "denoise_correlated",
        "model": "sparse_ib",
        "seed": 2026,
        "dataset": dict(
            _bar_dataset(2000),
            noise={
                "kind": "correlated",
                "variance": 0.005,
                "envelope_std_v": 3.0,
                "envelope_std_h": 1.0,
            },
        ),
        # annealing down the gamma path sharpens the learned bar features
        "bottleneck": {
            "gamma": 0.3,
            "gamma_grid": [0.6, 0.45, 0.3],
            "n_units": 40,
            "max_iter": 120,
            "rel_tol": 3e-6,
        },
        "report": {"n_filters": 16, "n_recon": 6, "null_points": 24},
    },
    "occlusion_bars_desk": {
        "task": "occlusion_bars",
        "model": "sparse_kib",
        "seed": 2026,
        "dataset": dict(_bar_dataset(2000, n_holdout=500), left_cols=2, right_cols=2),
        "bottleneck": {
            "gamma": 0.15,
            "gamma_grid": [0.5, 0.3, 0.15],
            "n_units": 40,
            "max_iter": 80,
            "rel_tol": 3e-6,
        },
        "kernel": {"subset_size": 300},
        "report": {"n_filters": 16, "n_recon": 6, "null_points": 24},
    },
    # paper scale: the sizes used by the original experiments
    "denoise_paper": {
        "task": "denoise",
        "model": "sparse_ib",
        "seed": 2026,
        "dataset": dict(_bar_dataset(10000), noise={"kind": "white", "variance": 0.005}),
        "bottleneck": {
            "gamma": 0.3,
            "gamma_grid": [0.6, 0.45, 0.3, 0.18, 0.08],
            "n_units": 81,
            "max_iter": 500,
            "rel_tol": 1e-7,
        },
        "report": {"n_filters": 25, "n_recon": 6, "null_points": 24},
    },
    "denoise_correlated_paper": {
        "task": "denoise_correlated",
        "model": "sparse_ib",
        "seed": 2026,
        "dataset": dict(
            _bar_dataset(10000),
            noise={
                "kind": "correlated",
                "variance": 0.005,
                "envelope_std_v": 3.0,
                "envelope_std_h": 1.0,
            },
        ),
        "bottleneck": {"gamma": 0.3, "n_units": 81, "max_iter": 500, "rel_tol": 1e-7},
        "report": {"n_filters": 25, "n_recon": 6, "null_points": 24},
    },
    "occlusion_bars_paper": {
        "task": "occlusion_bars",
        "model": "sparse_kib",
        "seed": 2026,
        "dataset": dict(_bar_dataset(10000, n_holdout=10000), left_cols=2, right_cols=2),
        "bottleneck": {"gamma": 0.15, "n_units": 60, "max_iter": 300, "rel_tol": 1e-7},
        "kernel": {"subset_size": 1000},
        "report": {"n_filters": 25, "n_recon": 6, "null_points": 24},
    },
    # digit occlusion needs externally converted BMAT patch files
    "occlusion_digits": {
        "task": "occlusion_digits",
        "model": "sparse_kib",
        "seed": 2026,
        "dataset": {
            "train_file": "data/digits_train.bmat",
            "holdout_file": "data/digits_holdout.bmat",
            "side": 16,
            "left_cols": 8,
            "right_cols": 0,
        },
        "bottleneck": {"gamma": 0.15, "n_units": 40, "max_iter": 150, "rel_tol": 1e-6},
        "kernel": {"subset_size": 500},
        "report": {"n_filters": 16, "n_recon": 6, "null_points": 24},
    },
}


def preset_config(name):
    if name not in PRESETS:
        raise ConfigError(
            f"unknown preset {name!r}; available: {', '.join(sorted(PRESETS))}"
        )
    return copy.deepcopy(PRESETS[name])


def merge_config(base, override):
    """Deep-merge ``override`` into ``base`` (dicts merged, scalars replaced)."""
    out = copy.deepcopy(base)
    for key, val in override.items():
        if isinstance(val, dict) and isinstance(out.get(key), dict):
            out[key] = merge_config(out[key], val)
        else:
            out[key] = copy.deepcopy(val)
    return out


# ---------------------------------------------------------------------------
# config validation (explicit error paths)
# ---------------------------------------------------------------------------

def _req(cfg, key, types, path, pred=None, what=""):
    if key not in cfg:
        raise ConfigError(f"{path}.{key}: missing")
    val = cfg[key]
    if isinstance(val, bool) or not isinstance(val, types):
        raise ConfigError(f"{path}.{key}: expected {what or types}, got {val!r}")
    if pred is not None and not pred(val):
        raise ConfigError(f"{path}.{key}: invalid value {val!r} ({what})")
    return val


def validate_config(cfg):
    """Check an experiment config; returns it (with defaults filled)."""
    if not isinstance(cfg, dict):
        raise ConfigError("config: expected a JSON object")
    cfg = copy.deepcopy(cfg)
    task = _req(cfg, "task", str, "config", lambda t: t in TASKS,
                f"one of {TASKS}")
    model = _req(cfg, "model", str, "config", lambda m: m in MODELS,
                 f"one of {MODELS}")
    _req(cfg, "seed", int, "config", lambda s: 0 <= s < 2**64, "u64")

    ds = _req(cfg, "dataset", dict, "config")
    if task == "occlusion_digits":
        _req(ds, "train_file", str, "config.dataset")
        if model in KERNEL_MODELS:
            _req(ds, "holdout_file", str, "config.dataset")
        _req(ds, "side", int, "config.dataset", lambda s: s >= 3, ">= 3")
    else:
        _req(ds, "n_train", int, "config.dataset", lambda n: n >= 1, ">= 1")
        _req(ds, "side", int, "config.dataset", lambda s: s >= 3, ">= 3")
        _req(ds, "n_bars", int, "config.dataset", lambda n: n >= 0, ">= 0")
        _req(ds, "bar_width", (int, float), "config.dataset", lambda v: v > 0, "> 0")
        _req(ds, "amplitude_std", (int, float), "config.dataset", lambda v: v > 0, "> 0")
    if task in ("denoise", "denoise_correlated"):
        noise = _req(ds, "noise", dict, "config.dataset")
        kind = _req(noise, "kind", str, "config.dataset.noise",
                    lambda k: k in ("white", "correlated"), "white|correlated")
        _req(noise, "variance", (int, float), "config.dataset.noise",
             lambda v: v > 0, "> 0")
        if task == "denoise_correlated" and kind != "correlated":
            raise ConfigError(
                "config.dataset.noise.kind: denoise_correlated requires 'correlated'"
            )
        if kind == "correlated":
            _req(noise, "envelope_std_v", (int, float), "config.dataset.noise",
                 lambda v: v > 0, "> 0")
            _req(noise, "envelope_std_h", (int, float), "config.dataset.noise",
                 lambda v: v > 0, "> 0")
    if task in ("occlusion_bars", "occlusion_digits"):
        side = ds["side"]
        left = _req(ds, "left_cols", int, "config.dataset", lambda v: v >= 0, ">= 0")
        right = _req(ds, "right_cols", int, "config.dataset", lambda v: v >= 0, ">= 0")
        if left + right >= side or left + right == 0:
            raise ConfigError(
                "config.dataset.left_cols/right_cols: need 0 < left+right < side"
            )
    if model in KERNEL_MODELS and task == "occlusion_bars":
        _req(ds, "n_holdout", int, "config.dataset", lambda n: n >= 1, ">= 1")

    if model != "null":
        bn = _req(cfg, "bottleneck", dict, "config")
        _req(bn, "gamma", (int, float), "config.bottleneck",
             lambda g: 0 < g < 1, "in (0, 1)")
        _req(bn, "n_units", int, "config.bottleneck", lambda n: n >= 1, ">= 1")
        bn.setdefault("max_iter", 500)
        bn.setdefault("rel_tol", 1e-7)
        _req(bn, "max_iter", int, "config.bottleneck", lambda n: n >= 1, ">= 1")
        _req(bn, "rel_tol", (int, float), "config.bottleneck",
             lambda v: v > 0, "> 0")
        grid = bn.get("gamma_grid")
        if grid is not None:
            if not isinstance(grid, list) or not grid:
                raise ConfigError("config.bottleneck.gamma_grid: expected a non-empty list")
            for i, g in enumerate(grid):
                if isinstance(g, bool) or not isinstance(g, (int, float)) or not 0 < g < 1:
                    raise ConfigError(
                        f"config.bottleneck.gamma_grid[{i}]: values must lie in (0, 1)"
                    )
            if sorted(grid, reverse=True) != grid:
                raise ConfigError(
                    "config.bottleneck.gamma_grid: must be sorted descending"
                )
            if bn["gamma"] not in grid:
                raise ConfigError(
                    "config.bottleneck.gamma: must be a member of gamma_grid when a grid is given"
                )
    if model in KERNEL_MODELS:
        kn = _req(cfg, "kernel", dict, "config")
        kn.setdefault("kappa", None)
        kn.setdefault("lambda", None)
        kn.setdefault("kappa_grid", None)
        kn.setdefault("lambda_grid", None)
        _req(kn, "subset_size", int, "config.kernel", lambda n: n >= 1, ">= 1")
    elif "kernel" in cfg and cfg.get("kernel"):
        raise ConfigError("config.kernel: only kernel models take a kernel section")

    rep = cfg.setdefault("report", {})
    rep.setdefault("n_filters", 16)
    rep.setdefault("n_recon", 6)
    rep.setdefault("null_points", 24)
    return cfg


# ---------------------------------------------------------------------------
# dataset construction
# ---------------------------------------------------------------------------

def _child_seeds(seed, n):
    return [int(s.generate_state(1)[0]) for s in np.random.SeedSequence(seed).spawn(n)]


def build_datasets(cfg):
    """Construct (train, holdout_or_None, geometry) from a validated config.

    Depends only on the task/dataset sections and the seed, so every model
    fitted on the same config sees identical data.
    """
    task = cfg["task"]
    ds = cfg["dataset"]
    side = ds["side"]
    seed_patch, seed_noise = _child_seeds(cfg["seed"], 2)
    geometry = {"side": side}

    if task == "occlusion_digits":
        left, right = ds["left_cols"], ds["right_cols"]
        geometry.update(left_cols=left, right_cols=right)
        train_patches = load_matrix(ds["train_file"]).astype(float)
        if train_patches.shape[1] != side * side:
            raise ConfigError(
                f"config.dataset.train_file: expected {side * side} columns, "
                f"got {train_patches.shape[1]}"
            )
        train = make_occlusion_split(train_patches, side, left, right)
        holdout = None
        if ds.get("holdout_file"):
            hold_patches = load_matrix(ds["holdout_file"]).astype(float)
            holdout = make_occlusion_split(hold_patches, side, left, right)
        return train, holdout, geometry

    spec = PatchSpec(
        side=side,
        n_bars=ds["n_bars"],
        bar_width=float(ds["bar_width"]),
        amplitude_std=float(ds["amplitude_std"]),
        seed=seed_patch,
    )
    n_holdout = int(ds.get("n_holdout") or 0)
    patches = generate_bar_patches(spec, ds["n_train"] + n_holdout)

    if task in ("denoise", "denoise_correlated"):
        noise_cfg = ds["noise"]
        noise = NoiseSpec(
            kind=noise_cfg["kind"],
            variance=float(noise_cfg["variance"]),
            envelope_std_v=float(noise_cfg.get("envelope_std_v", 3.0)),
            envelope_std_h=float(noise_cfg.get("envelope_std_h", 1.0)),
        )
        X = apply_noise(patches, noise, seed=seed_noise)
        train = dataset_from_pairs(X[: ds["n_train"]], patches[: ds["n_train"]])
        holdout = None
        if n_holdout:
            holdout = dataset_from_pairs(X[ds["n_train"]:], patches[ds["n_train"]:])
        return train, holdout, geometry

    # occlusion_bars
    left, right = ds["left_cols"], ds["right_cols"]
    geometry.update(left_cols=left, right_cols=right)
    train = make_occlusion_split(patches[: ds["n_train"]], side, left, right)
    holdout = None
    if n_holdout:
        holdout = make_occlusion_split(patches[ds["n_train"]:], side, left, right)
    return train, holdout, geometry


# ---------------------------------------------------------------------------
# CSV / hashing helpers (byte-stable output)
# ---------------------------------------------------------------------------

def _fmt(value):
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return str(value)


def write_csv(path, header, rows):
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    Path(path).write_text("\n".join(lines) + "\n", encoding="ascii")


def _sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


# ---------------------------------------------------------------------------
# runner
# ---------------------------------------------------------------------------

def _bottleneck_config(cfg, gamma, seed):
    bn = cfg["bottleneck"]
    return BottleneckConfig(
        gamma=float(gamma),
        n_units=bn["n_units"],
        marginal="gaussian" if cfg["model"].startswith("gaussian") else "student",
        max_iter=bn["max_iter"],
        rel_tol=float(bn["rel_tol"]),
        seed=seed,
    )


def _kernel_stage(cfg, train, holdout):
    kn = cfg["kernel"]
    if kn.get("kappa") is not None and kn.get("lambda") is not None:
        kcfg = KernelConfig(kind="gaussian", kappa=float(kn["kappa"]),
                            lam=float(kn["lambda"]), subset_size=kn["subset_size"])
        return kcfg, None
    if holdout is None:
        raise ConfigError(
            "config.dataset: kernel models need a holdout split (n_holdout/"
            "holdout_file) unless kappa and lambda are both fixed"
        )
    kappa_grid = kn.get("kappa_grid")
    lambda_grid = kn.get("lambda_grid")
    search = kernel.fit_krr(train, holdout, kappa_grid, lambda_grid)
    kcfg = search.config
    kcfg.subset_size = kn["subset_size"]
    return kcfg, search.table


def _fit_at_gammas(cfg, train, holdout, fit_seed):
    """Fits over the gamma grid (or single gamma); returns (points, report_fit).

    ``report_fit`` is (encoder, decoder, marginal) at config.bottleneck.gamma.
    Curve points are warm-started descending in gamma.
    """
    model = cfg["model"]
    gamma_report = float(cfg["bottleneck"]["gamma"])
    grid = cfg["bottleneck"].get("gamma_grid") or [gamma_report]
    grid = [float(g) for g in grid]
    kernel_model = model in KERNEL_MODELS

    krr_table = None
    if kernel_model:
        kcfg, krr_table = _kernel_stage(cfg, train, holdout)

    points = []
    report_fit = None
    init = None
    for gamma in grid:
        bcfg = _bottleneck_config(cfg, gamma, fit_seed)
        if kernel_model:
            enc, dec, marg, trace = kernel.fit_kernel_ib(
                train, holdout, bcfg, kernel=kcfg,
                subset_size=cfg["kernel"]["subset_size"], init=init,
            )
        else:
            enc, dec, marg, trace = core.fit_sparse_ib(train, bcfg, init=init)
        init = (enc, marg)
        points.append(
            metrics.InfoPoint(
                gamma=gamma,
                compression=metrics.compression_bound(enc, train, marg),
                relevance=metrics.relevance_bound(train, dec),
                objective=trace.objectives[-1],
            )
        )
        if gamma == gamma_report:
            report_fit = (enc, dec, marg, trace)
    return points, report_fit, krr_table


def _embed_filters_x(filters, geometry):
    side = geometry["side"]
    if "left_cols" not in geometry:
        return filters, (side, side)
    left, right = geometry["left_cols"], geometry["right_cols"]
    return (
        reassemble_occlusion(filters, np.zeros((filters.shape[0], side * side - filters.shape[1])), side, left, right),
        (side, side),
    )


def _embed_filters_y(filters, geometry):
    side = geometry["side"]
    if "left_cols" not in geometry:
        return filters, (side, side)
    left, right = geometry["left_cols"], geometry["right_cols"]
    x_dim = side * (left + right)
    return (
        reassemble_occlusion(np.zeros((filters.shape[0], x_dim)), filters, side, left, right),
        (side, side),
    )


def run_experiment(config, out_dir):
    """Run one experiment; writes artifacts and the manifest into ``out_dir``.

    Returns the manifest dict.  On failure the manifest still lands on disk
    with the failed stage recorded, and the error re-raises.
    """
    t0 = time.time()
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    stage = "validate"
    manifest = {
        "format": "varib-run",
        "version": 1,
        "package_version": __version__,
        "status": "failed",
        "failure_stage": None,
        "files": {},
    }

    def finish(status, err=None):
        manifest["status"] = status
        manifest["failure_stage"] = stage if status == "failed" else None
        if err is not None:
            manifest["error"] = str(err)
        manifest["wall_time_s"] = time.time() - t0
        for f in sorted(out.iterdir()):
            if f.name != "manifest.json" and f.is_file():
                manifest["files"][f.name] = _sha256(f)
        (out / "manifest.json").write_text(
            json.dumps(manifest, indent=1, sort_keys=True) + "\n", encoding="ascii"
        )

    try:
        cfg = validate_config(config)
        manifest["config"] = cfg
        import scipy

        manifest["versions"] = {"numpy": np.__version__, "scipy": scipy.__version__}
        manifest["seed"] = cfg["seed"]
        model = cfg["model"]
        rep = cfg["report"]

        stage = "dataset"
        train, holdout, geometry = build_datasets(cfg)
        _, _, fit_seed = _child_seeds(cfg["seed"], 3)

        if model == "null":
            stage = "null_curve"
            points = metrics.null_model_curve(train, n_points=rep["null_points"])
            write_csv(
                out / "info_curve.csv",
                ["sigma2", "compression_nats", "relevance_nats"],
                [(p.sigma2, p.compression, p.relevance) for p in points],
            )
            stage = "finish"
            finish("success")
            return manifest

        stage = "fit"
        points, report_fit, krr_table = _fit_at_gammas(cfg, train, holdout, fit_seed)
        enc, dec, marg, trace = report_fit

        stage = "write_model"
        save_model(
            out / "model.json", enc, dec, marg.omega2, marg.nu,
            cfg["bottleneck"]["gamma"],
            "gaussian" if model.startswith("gaussian") else "student",
        )

        stage = "write_curve"
        if cfg["bottleneck"].get("gamma_grid"):
            write_csv(
                out / "info_curve.csv",
                ["gamma", "compression_nats", "relevance_nats", "objective"],
                [(p.gamma, p.compression, p.relevance, p.objective) for p in points],
            )
        if krr_table is not None:
            write_csv(
                out / "krr_grid.csv",
                ["kappa", "lambda", "holdout_mse"],
                krr_table,
            )

        stage = "unit_reports"
        responses = metrics.mean_responses(enc, train)
        reports = metrics.unit_reports(enc, train, responses)
        write_csv(
            out / "unit_reports.csv",
            ["unit", "variance", "signal_fraction", "excess_kurtosis"],
            [(r.unit, r.variance, r.signal_fraction, r.excess_kurtosis) for r in reports],
        )

        stage = "filters"
        n_show = min(rep["n_filters"], cfg["bottleneck"]["n_units"])
        top_units = [r.unit for r in reports[:n_show]]
        dec_filters, dec_shape = _embed_filters_y(dec.U.T[top_units], geometry)
        save_filter_grid(out / "filters_decoding.pgm", dec_filters, dec_shape)
        if isinstance(enc, core.LinearEncoder):
            enc_filters, enc_shape = _embed_filters_x(enc.W[top_units], geometry)
            save_filter_grid(out / "filters_encoding.pgm", enc_filters, enc_shape)

        stage = "orientation"
        if dec.U.shape[0] == geometry["side"] ** 2:
            variances = np.array([0.0] * cfg["bottleneck"]["n_units"])
            for r in reports:
                variances[r.unit] = r.variance
            hist, centers = metrics.orientation_distribution(
                dec, geometry["side"], weights=variances
            )
            write_csv(
                out / "orientation.csv",
                ["bin_center_deg", "weight"],
                [(np.degrees(centers[i]), hist[i]) for i in range(len(hist))],
            )

        stage = "reconstructions"
        n_recon = min(rep["n_recon"], train.n)
        stim = train.X[:n_recon]
        recon = metrics.reconstruct(dec, responses[:n_recon])
        side = geometry["side"]
        if "left_cols" in geometry:
            left, right = geometry["left_cols"], geometry["right_cols"]
            stim_img = reassemble_occlusion(
                stim, np.zeros((n_recon, train.d_y)), side, left, right
            )
            recon_img = reassemble_occlusion(stim, recon, side, left, right)
        else:
            stim_img, recon_img = stim, recon
        save_filter_grid(out / "recon_stimuli.pgm", stim_img, (side, side), n_cols=n_recon)
        save_filter_grid(out / "recon_outputs.pgm", recon_img, (side, side), n_cols=n_recon)

        stage = "finish"
        finish("success")
        return manifest
    except Exception as err:
        finish("failed", err)
        raise


# ---------------------------------------------------------------------------
# run comparison
# ---------------------------------------------------------------------------

def _load_run(run_dir):
    run = Path(run_dir)
    mpath = run / "manifest.json"
    if not mpath.exists():
        raise ConfigError(f"{run_dir}: no manifest.json (not a run directory)")
    manifest = json.loads(mpath.read_text())
    return run, manifest


def compare_runs(run_dirs, out_dir):
    """Merge info curves of runs sharing a task and data seed.

    Writes ``comparison_curves.csv`` (wide table keyed by gamma) and
    ``comparison_kurtosis.csv`` (per-model median excess kurtosis).
    Refuses runs with mismatched task/dataset/seed and null-model runs
    (their curves are not gamma-parameterized).
    """
    if not run_dirs:
        raise ConfigError("compare: need at least one run directory")
    loaded = [_load_run(d) for d in run_dirs]
    ref_cfg = loaded[0][1]["config"]
    names = []
    for run, manifest in loaded:
        cfg = manifest["config"]
        for key in ("task", "dataset", "seed"):
            if cfg.get(key) != ref_cfg.get(key):
                raise ConfigError(
                    f"compare: {run} does not share {key} with {loaded[0][0]}"
                )
        if cfg["model"] == "null":
            raise ConfigError(
                f"compare: {run} is a null-model run (no gamma-keyed curve)"
            )
        name = cfg["model"]
        while name in names:
            name += "_b"
        names.append(name)

    curves = []
    for run, manifest in loaded:
        path = run / "info_curve.csv"
        if not path.exists():
            raise ConfigError(f"compare: {run} has no info_curve.csv")
        rows = path.read_text().strip().split("\n")
        header = rows[0].split(",")
        if header[0] != "gamma":
            raise ConfigError(f"compare: {run} curve is not gamma-keyed")
        table = {}
        for line in rows[1:]:
            vals = line.split(",")
            table[vals[0]] = vals[1:]
        curves.append(table)

    shared = [g for g in curves[0] if all(g in c for c in curves)]
    header = ["gamma"]
    for name in names:
        header += [
            f"compression_nats_{name}",
            f"relevance_nats_{name}",
            f"objective_{name}",
        ]
    rows = []
    for g in shared:
        row = [g]
        for c in curves:
            row += c[g]
        rows.append(row)

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    curve_path = out / "comparison_curves.csv"
    curve_path.write_text(
        "\n".join([",".join(header)] + [",".join(r) for r in rows]) + "\n",
        encoding="ascii",
    )

    kurt_rows = []
    for (run, manifest), name in zip(loaded, names):
        upath = run / "unit_reports.csv"
        if not upath.exists():
            raise ConfigError(f"compare: {run} has no unit_reports.csv")
        lines = upath.read_text().strip().split("\n")[1:]
        kurts = [float(line.split(",")[3]) for line in lines]
        kurt_rows.append((name, float(np.median(kurts)), len(kurts)))
    write_csv(
        out / "comparison_kurtosis.csv",
        ["model", "median_excess_kurtosis", "n_units"],
        kurt_rows,
    )
    return curve_path


# ---------------------------------------------------------------------------
# bar-segment probes (filling-in)
# ---------------------------------------------------------------------------

def validate_probe_config(probe):
    probe = copy.deepcopy(probe or {})
    probe.setdefault("orientation_deg", 0.0)
    probe.setdefault("offset", 0.0)
    probe.setdefault("amplitude", 1.0)
    probe.setdefault("bar_width", 1.2)
    probe.setdefault("central_band", None)
    for key in ("side", "left_cols", "right_cols"):
        _req(probe, key, int, "probe")
    for key in ("orientation_deg", "offset", "amplitude", "bar_width"):
        _req(probe, key, (int, float), "probe")
    return probe


def _probe_stimuli(probe):
    """Full-patch bar and its X-region variants (left, right, both)."""
    side = probe["side"]
    left, right = probe["left_cols"], probe["right_cols"]
    theta = np.radians(float(probe["orientation_deg"]))
    bar = render_bars(
        side, [theta], [float(probe["offset"])], [float(probe["amplitude"])],
        float(probe["bar_width"]),
    )
    x_idx, y_idx = occlusion_columns(side, left, right)
    x_full = bar[x_idx]
    n_left = side * left
    x_left = x_full.copy()
    x_left[n_left:] = 0.0
    x_right = x_full.copy()
    x_right[:n_left] = 0.0
    return bar, {"left": x_left, "right": x_right, "both": x_full}


def _central_band_indices(side, left, right, band):
    """Flat indices (within the Y region) of the central column band."""
    n_center = side - left - right
    if band is None:
        band = max(1, n_center // 3)
    band = min(band, n_center)
    start = (n_center - band) // 2
    cols = range(start, start + band)
    idx = []
    for c in cols:
        idx.extend(range(c * side, (c + 1) * side))
    return np.asarray(idx, dtype=int)


def probe_reconstruction(model_path, probe, out_dir):
    """Render bar-segment probes, reconstruct, and report central energies.

    Writes a stimulus/reconstruction PGM pair per variant (left, right,
    both) plus ``probe_stats.json`` with the central-region energies, the
    combined-over-singles energy ratio, the additivity residual, and the
    responses of the two units responding strongest to the combined probe.
    """
    probe = validate_probe_config(probe)
    model = load_model(model_path)
    side = probe["side"]
    left, right = probe["left_cols"], probe["right_cols"]
    x_idx, _ = occlusion_columns(side, left, right)
    d_in_probe = len(x_idx)
    d_in_model = model.encoder.W.shape[1] if model.kind == "linear" else \
        model.encoder.subset_points.shape[1]
    if d_in_probe != d_in_model:
        raise ConfigError(
            f"probe geometry gives input dim {d_in_probe}, model expects {d_in_model}"
        )

    _, variants = _probe_stimuli(probe)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    def respond(x):
        if model.kind == "linear":
            return model.encoder.W @ x
        return kernel.dual_responses(model.encoder, x[None, :])[0]

    band = _central_band_indices(side, left, right, probe["central_band"])
    stats = {"central_band_pixels": int(band.size)}
    recons = {}
    responses = {}
    for name in ("left", "right", "both"):
        x = variants[name]
        r = respond(x)
        yhat = model.decoder.U @ r
        recons[name] = yhat
        responses[name] = r
        stats[f"energy_{name}"] = float(np.sum(yhat[band] ** 2))
        stim_img = reassemble_occlusion(x, np.zeros(yhat.shape[0]), side, left, right)
        recon_img = reassemble_occlusion(x, yhat, side, left, right)
        save_pgm(out / f"probe_{name}_stimulus.pgm", stim_img.reshape(side, side))
        save_pgm(out / f"probe_{name}_recon.pgm", recon_img.reshape(side, side))

    singles = stats["energy_left"] + stats["energy_right"]
    stats["energy_ratio"] = float(stats["energy_both"] / singles) if singles > 0 else float("inf")
    stats["additivity_residual"] = float(
        np.max(np.abs(recons["both"] - recons["left"] - recons["right"]))
    )
    top2 = np.argsort(-np.abs(responses["both"]))[:2]
    stats["top_units"] = [int(u) for u in top2]
    stats["top_unit_responses"] = {
        name: [float(responses[name][u]) for u in top2] for name in responses
    }
    (out / "probe_stats.json").write_text(
        json.dumps(stats, indent=1, sort_keys=True) + "\n", encoding="ascii"
    )
    return stats
