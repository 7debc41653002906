"""Seeded experiment runners behind the CLI subcommands.

Trial ``j`` at site dimension ``N`` uses seed ``derive_seed(master_seed, N, j)``;
pilot trials for calibrating ``C`` use ``derive_seed(master_seed, PILOT_STREAM, N, j)``,
a disjoint stream. Trials may run in worker processes; records are sorted by
``(N, trial)`` before anything is written, so outputs do not depend on
scheduling. Wall-clock times are kept in a separate timings document so the
result JSON is byte-reproducible.
"""

from __future__ import annotations

import csv
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .. import __version__
from ..errors import InvalidArgumentError, SizeLimitError
from ..free_probability import NCPolynomial, polynomial_moment, polynomial_norm_estimate, xfree_moment
from ..model import TensorGueModel, band_scale, gamma_param, sample_terms, sample_X_N, theta_param
from ..rng import derive_seed
from ..spectral import MAX_EIG_DIM, free_spectral_density, hermitian_spectrum, inclusion_excess
from .config import config_hash, models_by_N, polynomials

__all__ = [
    "PILOT_STREAM",
    "ExperimentOutput",
    "trial_seed",
    "pilot_seed",
    "run_thm1",
    "run_thm2",
    "run_weak",
    "run_free_spectrum",
    "write_outputs",
]

PILOT_STREAM = 0x70696C6F74  # "pilot"
SEED_DERIVATION = "SeedSequence(entropy=master_seed, spawn_key=(N, trial)); pilot: spawn_key=(0x70696c6f74, N, trial)"


def trial_seed(master_seed, N, trial):
    return derive_seed(master_seed, N, trial)


def pilot_seed(master_seed, N, trial):
    return derive_seed(master_seed, PILOT_STREAM, N, trial)


@dataclass
class ExperimentOutput:
    """Result document plus side files.

    ``tables`` maps a file suffix to ``(header, rows)`` written as CSV;
    ``documents`` maps a suffix to extra JSON documents.
    """

    name: str
    result: dict
    timings: dict
    tables: dict = field(default_factory=dict)
    documents: dict = field(default_factory=dict)


def _meta(experiment, config):
    return {
        "experiment": experiment,
        "version": __version__,
        "numpy": np.__version__,
        "config_hash": config_hash(config),
        "master_seed": config["master_seed"],
        "seed_derivation": SEED_DERIVATION,
        "solver": dict(config["solver"]),
    }


def _check_sizes(models):
    for N, model in models.items():
        if model.dim > MAX_EIG_DIM:
            raise SizeLimitError(f"N={N}: matrix size {model.dim} exceeds cap {MAX_EIG_DIM}")


def _map(fn, tasks, workers):
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, tasks, chunksize=1))
    return [fn(t) for t in tasks]


def _median(x):
    return float(np.median(x)) if len(x) else None


# --- free-limit reference -------------------------------------------------


def _density(coeffs, solver):
    return free_spectral_density(
        np.array(coeffs),
        grid_step=solver["grid_step"],
        smoothing=solver["smoothing"],
        support_threshold=solver["support_threshold"],
        tol=solver["tol"],
        max_iter=solver["max_iter"],
    )


def _coeff_key(model):
    return b"".join(B.tobytes() for B in model.coeffs)


def _references(config, models):
    """Support of ``X_free`` for each ``N``; one density solve per distinct coefficient set."""
    override = config.get("reference_support")
    refs, cache = {}, {}
    for N, model in models.items():
        if override is not None:
            refs[N] = {"source": "config", "support": [[float(a), float(b)] for a, b in override]}
            continue
        key = _coeff_key(model)
        if key not in cache:
            dens = _density(model.coeffs, config["solver"])
            cache[key] = {"source": "mde", "support": [list(iv) for iv in dens.support], "edge": dens.edge,
                          "density": dens.to_json()}
        refs[N] = cache[key]
    return refs


# --- spectrum inclusion -----------------------------------------------------------


def _thm1_trial(task):
    model, seed, support = task
    t0 = time.perf_counter()
    spec = hermitian_spectrum(sample_X_N(model, seed))
    return spec.norm, inclusion_excess(spec, support), time.perf_counter() - t0


def run_thm1(config: dict, workers: int = 1) -> ExperimentOutput:
    """Inclusion of ``sp(X_N)`` in the free support plus the band, across the ``N`` sweep.

    When ``C`` is ``"calibrate"``, ``Ĉ_N`` is the largest pilot ratio
    ``excess / (N^{-α/4} Γ^{1/4} Θ^{1/4} ln^{3/4}(d N^m))`` (the band at ``t = 0``)
    and the fresh trials are scored with ``C = max_N Ĉ_N``.
    """
    models = models_by_N(config)
    _check_sizes(models)
    refs = _references(config, models)
    n_trials, n_pilot = config["trials"], config["pilot_trials"]
    master = config["master_seed"]
    calibrate = config["C"] == "calibrate"

    timings = {"trials": [], "pilot": []}
    pilot_records, records = [], []
    for label, count, seeder, out in (
        ("pilot", n_pilot if calibrate else 0, pilot_seed, pilot_records),
        ("trials", n_trials, trial_seed, records),
    ):
        tasks, index = [], []
        for N, model in models.items():
            support = refs[N]["support"]
            for j in range(count):
                s = seeder(master, N, j)
                tasks.append((model, s, support))
                index.append((N, j, s))
        for (N, j, s), (norm, excess, secs) in zip(index, _map(_thm1_trial, tasks, workers)):
            out.append({"N": N, "trial": j, "seed": s, "norm": float(norm), "excess": float(excess)})
            timings[label].append({"N": N, "trial": j, "seconds": secs})
    pilot_records.sort(key=lambda r: (r["N"], r["trial"]))
    records.sort(key=lambda r: (r["N"], r["trial"]))

    scales = {}
    for N, model in models.items():
        g, th = gamma_param(model), theta_param(model)
        scales[N] = {"gamma": g, "theta": th, "alpha": model.alpha, "band_scale": band_scale(model, g, th),
                     "log_term": math.log(model.dim) ** 0.75}

    c_hat = {}
    if calibrate:
        for N in models:
            base = scales[N]["band_scale"] * scales[N]["log_term"]
            ratios = [r["excess"] / base for r in pilot_records if r["N"] == N] if base > 0 else [0.0]
            c_hat[N] = max(ratios)
        C = max(c_hat.values())
    else:
        C = float(config["C"])

    per_N = []
    for N, model in models.items():
        sc = scales[N]
        rows = [r for r in records if r["N"] == N]
        norms = [r["norm"] for r in rows]
        excess = [r["excess"] for r in rows]
        outliers = []
        for t in config["t_grid"]:
            band = C * sc["band_scale"] * (sc["log_term"] + t)
            frac = sum(e > band for e in excess) / len(rows)
            p = math.exp(-t * t)
            sigma = math.sqrt(p * (1 - p) / len(rows))
            outliers.append({"t": t, "band": band, "fraction": frac, "bound": p, "binomial_sigma": sigma,
                             "within_bound": frac <= p + 3 * sigma})
        per_N.append({
            "N": N, "dim": model.dim, **sc,
            "median_norm": _median(norms), "mean_norm": float(np.mean(norms)), "max_norm": max(norms),
            "min_excess": min(excess), "max_excess": max(excess),
            "C_hat": c_hat.get(N),
            "outliers": outliers,
        })

    result = {
        "meta": _meta("thm1", config),
        "reference": {str(N): refs[N] for N in models},
        "calibration": {"mode": "pilot" if calibrate else "fixed", "C": C, "pilot_trials": n_pilot if calibrate else 0},
        "per_N": per_N,
        "pilot": pilot_records,
        "trials": records,
    }
    header = ["N", "trial", "seed", "norm", "excess"]
    tables = {"trials": (header, [[r[h] for h in header] for r in records])}
    sweep = ["N", "median_norm", "max_norm", "max_excess", "C_hat"]
    tables["per_N"] = (sweep, [[row[h] for h in sweep] for row in per_N])
    return ExperimentOutput(config.get("name", "thm1"), result, timings, tables)


# --- polynomial experiments -------------------------------------------------


def _poly_norm(P: NCPolynomial, H):
    M = P.evaluate(H)
    if P.is_self_adjoint():
        return hermitian_spectrum((M + M.conj().T) / 2).norm
    return float(np.linalg.norm(M, 2))


def _thm2_trial(task):
    model, seed, polys = task
    t0 = time.perf_counter()
    H = sample_terms(model, seed)
    return [_poly_norm(P, H) for P in polys], time.perf_counter() - t0


def _best_estimate(P, r_max):
    for r in range(r_max, 1, -2):
        try:
            return polynomial_norm_estimate(P, r), r
        except SizeLimitError:
            continue
    raise SizeLimitError("polynomial too large for any norm estimate")


def _linear_reference(P, solver):
    """Norm of a real linear ``Σ c_i s_i + c_0`` from the support of its (scalar) free law."""
    if P.degree > 1 or not P.is_self_adjoint():
        return None
    c0, coeffs = 0.0, []
    for c, w in P.terms:
        if len(w) == 0:
            c0 = c.real
        else:
            coeffs.append([[c.real]])
    if not coeffs:
        return abs(c0)
    dens = _density(coeffs, solver)
    return max(max(abs(a + c0), abs(b + c0)) for a, b in dens.support)


def _poly_sweep(config, workers, trial_fn):
    models = models_by_N(config)
    for N, model in models.items():
        if model.N**model.m > MAX_EIG_DIM:
            raise SizeLimitError(f"N={N}: matrix size {model.N ** model.m} exceeds cap {MAX_EIG_DIM}")
    polys = polynomials(config)
    if not polys:
        raise InvalidArgumentError("config lists no polynomials")
    master = config["master_seed"]
    tasks, index = [], []
    for N, model in models.items():
        for j in range(config["trials"]):
            s = trial_seed(master, N, j)
            tasks.append((model, s, [P for _, P in polys]))
            index.append((N, j, s))
    raw = sorted(zip(index, _map(trial_fn, tasks, workers)), key=lambda x: x[0][:2])
    return models, polys, raw


def run_thm2(config: dict, workers: int = 1) -> ExperimentOutput:
    """Sampled ``‖P(X_{J_1} ⊗̃ I, …)‖`` against the free reference ``‖P(s_1, …)‖``.

    The reference is the moment lower bound ``τ((P*P)^{r/2})^{1/r}`` at the
    largest ``r ≤ norm_r`` within the expansion caps; for real linear ``P`` the
    exact value from the free density support is reported as well.
    """
    models, polys, raw = _poly_sweep(config, workers, _thm2_trial)
    names = [n for n, _ in polys]
    records, timings = [], {"trials": []}
    for (N, j, s), (norms, secs) in raw:
        records.append({"N": N, "trial": j, "seed": s, "norms": {n: float(v) for n, v in zip(names, norms)}})
        timings["trials"].append({"N": N, "trial": j, "seconds": secs})

    references = {}
    for name, P in polys:
        est, r = _best_estimate(P, config["norm_r"])
        references[name] = {"estimate": est, "r": r, "linear_exact": _linear_reference(P, config["solver"])}

    per_N = []
    for N in models:
        rows = [r for r in records if r["N"] == N]
        entry = {"N": N, "dim": models[N].N ** models[N].m, "polynomials": {}}
        for name in names:
            vals = [r["norms"][name] for r in rows]
            ref = references[name]
            med = _median(vals)
            stats = {
                "median_norm": med, "min_norm": min(vals), "max_norm": max(vals),
                "gap_to_estimate": med - ref["estimate"],
                "estimate_below_all": all(ref["estimate"] <= v + 1e-12 for v in vals),
            }
            if ref["linear_exact"] is not None:
                stats["gap_to_exact"] = med - ref["linear_exact"]
            entry["polynomials"][name] = stats
        per_N.append(entry)

    result = {
        "meta": _meta("thm2", config),
        "polynomials": {name: P.to_json() for name, P in polys},
        "reference": references,
        "per_N": per_N,
        "trials": records,
    }
    header = ["N", "trial", "seed"] + names
    tables = {"trials": (header, [[r["N"], r["trial"], r["seed"]] + [r["norms"][n] for n in names] for r in records])}
    gap_rows = [[e["N"]] + [e["polynomials"][n]["median_norm"] for n in names] for e in per_N]
    tables["gaps"] = (["N"] + [f"median_{n}" for n in names], gap_rows)
    return ExperimentOutput(config.get("name", "thm2"), result, timings, tables)


def _weak_trial(task):
    model, seed, polys = task
    t0 = time.perf_counter()
    H = sample_terms(model, seed)
    n = H[0].shape[0]
    return [complex(np.trace(P.evaluate(H)) / n) for P in polys], time.perf_counter() - t0


def run_weak(config: dict, workers: int = 1) -> ExperimentOutput:
    """Normalized traces ``tr̄ P(X_{J_1} ⊗̃ I, …)`` against ``τ(P(s_1, …))``."""
    models, polys, raw = _poly_sweep(config, workers, _weak_trial)
    names = [n for n, _ in polys]
    targets = {name: polynomial_moment(P) for name, P in polys}
    records, timings = [], {"trials": []}
    for (N, j, s), (vals, secs) in raw:
        records.append({
            "N": N, "trial": j, "seed": s,
            "values": {n: [v.real, v.imag] for n, v in zip(names, vals)},
            "deviation": {n: abs(v - targets[n]) for n, v in zip(names, vals)},
        })
        timings["trials"].append({"N": N, "trial": j, "seconds": secs})

    per_N = []
    for N in models:
        rows = [r for r in records if r["N"] == N]
        entry = {"N": N, "polynomials": {}}
        for name in names:
            dev = [r["deviation"][name] for r in rows]
            entry["polynomials"][name] = {"mean_abs_deviation": float(np.mean(dev)), "max_abs_deviation": max(dev)}
        per_N.append(entry)

    result = {
        "meta": _meta("weak", config),
        "polynomials": {name: P.to_json() for name, P in polys},
        "targets": {n: [t.real, t.imag] for n, t in targets.items()},
        "per_N": per_N,
        "trials": records,
    }
    header = ["N", "trial", "seed"] + [f"{n}_re" for n in names] + [f"{n}_dev" for n in names]
    rows = [[r["N"], r["trial"], r["seed"]] + [r["values"][n][0] for n in names] + [r["deviation"][n] for n in names]
            for r in records]
    return ExperimentOutput(config.get("name", "weak"), result, timings, {"trials": (header, rows)})


# --- free spectrum ----------------------------------------------------------


def run_free_spectrum(config: dict, workers: int = 1, max_moment: int = 6) -> ExperimentOutput:
    """Density, support and a density-vs-oracle moment table for each distinct coefficient set."""
    models = models_by_N(config)
    groups: dict[bytes, list[int]] = {}
    for N, model in models.items():
        groups.setdefault(_coeff_key(model), []).append(N)
    single = len(groups) == 1
    t0 = time.perf_counter()
    spectra, tables, documents = [], {}, {}
    for Ns in groups.values():
        model: TensorGueModel = models[Ns[0]]
        dens = _density(model.coeffs, config["solver"])
        table = []
        for p in range(1, max_moment + 1):
            grid_m, oracle = dens.moment(p), xfree_moment(np.array(model.coeffs), p)
            table.append({"p": p, "density": grid_m, "oracle": oracle, "abs_error": abs(grid_m - oracle),
                          "rel_error": abs(grid_m - oracle) / abs(oracle) if oracle != 0 else None})
        suffix = "" if single else f"_N{Ns[0]}"
        spectra.append({"N": Ns, **dens.to_json(), "edge": dens.edge, "moments": table})
        tables["density" + suffix] = (["x", "rho"], [[float(x), float(r)] for x, r in zip(dens.grid, dens.values)])
        tables["moments" + suffix] = (["p", "density", "oracle"], [[r["p"], r["density"], r["oracle"]] for r in table])
        documents["support" + suffix] = [list(iv) for iv in dens.support]
    result = {"meta": _meta("free-spectrum", config), "spectra": spectra}
    timings = {"total_seconds": time.perf_counter() - t0}
    return ExperimentOutput(config.get("name", "free-spectrum"), result, timings, tables, documents)


# --- output -----------------------------------------------------------------


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n"


def _cell(x):
    if isinstance(x, float):
        return repr(x)
    if x is None:
        return ""
    return str(x)


def write_outputs(output: ExperimentOutput, out_dir, fmt="both") -> list[Path]:
    """Write ``<name>.json``, ``<name>.timings.json``, CSV tables and side documents."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    if fmt in ("json", "both"):
        path = out / f"{output.name}.json"
        path.write_text(_dump(output.result))
        written.append(path)
        for suffix, doc in output.documents.items():
            path = out / f"{output.name}.{suffix}.json"
            path.write_text(_dump(doc))
            written.append(path)
    if fmt in ("csv", "both"):
        for suffix, (header, rows) in output.tables.items():
            path = out / f"{output.name}.{suffix}.csv"
            with open(path, "w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(header)
                w.writerows([[_cell(c) for c in row] for row in rows])
            written.append(path)
    path = out / f"{output.name}.timings.json"
    path.write_text(_dump(output.timings))
    written.append(path)
    return written
