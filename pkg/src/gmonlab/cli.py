"""Command-line entry point: ``gmonlab <command> [options]``.

Every output records the resolved configuration, a hash of it and the
package version.  Exit codes: 0 ok, 2 configuration error, 3 numerical
failure, 4 budget exceeded.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import __version__
from .bose_hubbard import InstanceConfig, StateVector, instance_from_json, sample_instance
from .errors import BudgetExceeded, ConfigError, NumericalError
from .fock_basis import (TABLE1_COLUMNS, MaxLevel, ResourceProfile, dimension,
                         dimension_estimate, enumerate_basis, half_filling, initial_pattern,
                         parse_scheme, resource_estimate, table1_row)

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_BUDGET = 0, 2, 3, 4


# ---------------------------------------------------------------------------
# plumbing
# ---------------------------------------------------------------------------

def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


def config_hash(config: dict) -> str:
    text = json.dumps(_jsonable(config), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()[:16]


def _resolved(args, extra: dict | None = None) -> dict:
    skip = {"func", "out", "format", "jobs"}
    cfg = {k: v for k, v in vars(args).items() if k not in skip}
    if extra:
        cfg.update(extra)
    return _jsonable(cfg)


def _meta(config: dict) -> dict:
    return {"version": __version__, "config_hash": config_hash(config), "config": config}


def _load_json(path: str) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"no such file: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path} is not valid JSON: {exc}") from exc


def _read_csv_columns(path: str) -> np.ndarray:
    try:
        data = np.loadtxt(path, delimiter=",", comments="#", ndmin=2)
    except FileNotFoundError as exc:
        raise ConfigError(f"no such file: {path}") from exc
    except ValueError:
        try:
            data = np.loadtxt(path, delimiter=",", comments="#", ndmin=2, skiprows=1)
        except ValueError as exc:
            raise ConfigError(f"cannot parse CSV {path}: {exc}") from exc
    return data


def _emit(args, name: str, payload: dict, config: dict, rows: list[dict] | None = None):
    """Write ``payload`` as JSON (or ``rows`` as CSV) to --out or stdout."""
    meta = _meta(config)
    if args.format == "csv" and rows is not None:
        buf = io.StringIO()
        buf.write(f"# gmonlab {meta['version']} config_hash={meta['config_hash']}\n")
        if rows:
            writer = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
            writer.writeheader()
            for r in rows:
                writer.writerow(_jsonable(r))
        text = buf.getvalue()
        ext = "csv"
    else:
        text = json.dumps(_jsonable({**payload, "meta": meta}), indent=2, sort_keys=True) + "\n"
        ext = "json"
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        with open(os.path.join(args.out, f"{name}.{ext}"), "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _write_file(out_dir: str, name: str, text: str):
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, name), "w") as fh:
        fh.write(text)


def parse_range(text: str, cast=int) -> list:
    """``"4..9"`` (inclusive), ``"4,6,8"`` or a single value."""
    text = text.strip()
    try:
        if ".." in text:
            lo, hi = text.split("..")
            if cast is int:
                return list(range(int(lo), int(hi) + 1))
            raise ConfigError("float ranges need an explicit list or --points")
        return [cast(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad range {text!r}") from exc


def _float_range(text: str, points: int) -> list[float]:
    text = text.strip()
    try:
        if ".." in text:
            lo, hi = (float(v.lower().replace("mhz", "")) for v in text.split(".."))
            return np.linspace(lo, hi, points).tolist()
        return [float(v.lower().replace("mhz", "")) for v in text.split(",")]
    except ValueError as exc:
        raise ConfigError(f"bad range {text!r}") from exc


def _scheme(text: str):
    try:
        return parse_scheme(text)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


# ---------------------------------------------------------------------------
# dims / resources
# ---------------------------------------------------------------------------

def cmd_dims(args) -> int:
    ns = parse_range(args.n)
    schemes = [_scheme(s) for s in args.scheme] if args.scheme else None
    rows = []
    for n in ns:
        if n < 1:
            raise ConfigError("N must be positive")
        if schemes is None:
            rows.append(table1_row(n))
            continue
        n_exc = half_filling(n)
        for s in schemes:
            row = {"N": n, "n_exc": n_exc, "scheme": str(s), "dimension": dimension(n, n_exc, s)}
            try:
                row["estimate"] = dimension_estimate(n, s)
            except ValueError:
                row["estimate"] = None
            rows.append(row)
    cfg = _resolved(args)
    _emit(args, "dims", {"columns": list(TABLE1_COLUMNS) if schemes is None else None,
                         "rows": rows}, cfg, rows)
    return EXIT_OK


def cmd_resources(args) -> int:
    prof = _load_json(args.profile) if args.profile else {}
    try:
        profile = ResourceProfile(**prof)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad resource profile: {exc}") from exc
    if args.dim is not None:
        dim = int(args.dim)
    elif args.log2_dim is not None:
        dim = 2 ** int(args.log2_dim)
    else:
        if args.n is None:
            raise ConfigError("give --dim, --log2-dim or --n")
        dim = dimension(args.n, half_filling(args.n), _scheme(args.scheme))
    memory, seconds = resource_estimate(dim, profile)
    payload = {"dimension": dim, "memory_bytes": memory, "time_seconds": seconds,
               "time_hours": seconds / 3600.0, "profile": vars(profile)}
    cfg = _resolved(args, {"profile": vars(profile)})
    _emit(args, "resources", payload, cfg, [payload | {"profile": json.dumps(vars(profile))}])
    return EXIT_OK


# ---------------------------------------------------------------------------
# run / sample
# ---------------------------------------------------------------------------

def _load_instance(args):
    doc = _load_json(args.config)
    params, n_exc, scheme = instance_from_json(doc)
    if getattr(args, "scheme", None):
        scheme = _scheme(args.scheme)
    try:
        basis = enumerate_basis(params.N, n_exc, scheme)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return doc, params, n_exc, scheme, basis


def _simulate(args):
    from .diagnostics import entanglement_entropy
    from .integrator import evolve_auto, evolve_initial, project_qubit_subspace

    doc, params, n_exc, scheme, basis = _load_instance(args)
    if args.steps:
        res = evolve_initial(params, basis, args.steps, keep_states=True)
    else:
        res = evolve_auto(params, basis, keep_states=True)
    proj = project_qubit_subspace(res.final_state)
    p = proj.normalized.p
    out = {"instance": doc, "labels": proj.normalized.labels, "probabilities": p,
           "leak": proj.leak, "norm_drift": res.norm_drift, "steps": res.steps_used,
           "n_exc": n_exc, "scheme": str(scheme)}
    if args.top_k:
        order = np.argsort(-p, kind="stable")[: args.top_k]
        out["top_k"] = [{"label": proj.normalized.labels[i], "p": p[i]} for i in order]
    if args.cycle_outputs:
        cyc = []
        for t, sv in res.checkpoints:
            q = project_qubit_subspace(sv).normalized.p
            cut = params.N // 2
            cyc.append({"time_ns": t * 1e9, "probabilities": q,
                        "entanglement": entanglement_entropy(sv, cut) if params.N > 1 else 0.0})
        out["cycles"] = cyc
    return out, params, n_exc


def cmd_run(args) -> int:
    out, _, _ = _simulate(args)
    rows = [{"label": lab, "p": p} for lab, p in zip(out["labels"], out["probabilities"])]
    _emit(args, "result", out, _resolved(args), rows)
    return EXIT_OK


def cmd_sample(args) -> int:
    from .diagnostics import ProbabilityDistribution
    from .integrator import MeasurementErrorModel, expected_rejection, sample_measurements

    out, params, n_exc = _simulate(args)
    try:
        model = MeasurementErrorModel(args.readout_error, args.loss)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    dist = ProbabilityDistribution(out["probabilities"], out["labels"])
    counts, rejected = sample_measurements(dist, args.shots, model, params.pulses.cycles,
                                           args.seed, n_exc)
    out["counts"] = counts
    out["rejected_fraction"] = rejected
    out["expected_rejected_fraction"] = expected_rejection(params.N, n_exc, model,
                                                           params.pulses.cycles)
    rows = [{"label": k, "count": v} for k, v in sorted(counts.items())]
    _emit(args, "samples", out, _resolved(args), rows)
    return EXIT_OK


# ---------------------------------------------------------------------------
# sweep
# ---------------------------------------------------------------------------

def _sweep_point(job):
    from .experiments import correlation_curve
    config, n_instances, seed, scheme = job
    return correlation_curve(config, n_instances, seed, scheme)


def cmd_sweep(args) -> int:
    base = _load_json(args.config) if args.config else {}
    try:
        base_cfg = InstanceConfig(**{"N": args.n, "cycles": args.cycles, **base})
    except TypeError as exc:
        raise ConfigError(f"bad sweep config: {exc}") from exc
    disorders = _float_range(args.disorder, args.points)
    scheme = _scheme(args.scheme)
    jobs = []
    for k, d in enumerate(disorders):
        cfg = InstanceConfig(**{**vars(base_cfg), "delta_MHz": float(d)})
        # one independent stream per disorder point
        seed = int(np.random.SeedSequence([args.seed, k]).generate_state(1)[0])
        jobs.append((cfg, args.instances, seed, scheme))
    if args.jobs > 1:
        with ProcessPoolExecutor(args.jobs) as pool:
            curves = list(pool.map(_sweep_point, jobs))
    else:
        curves = [_sweep_point(j) for j in jobs]
    matrix = np.array(curves)
    payload = {"disorder_MHz": disorders, "separations": list(range(1, base_cfg.N)),
               "correlations": matrix}
    rows = [{"disorder_MHz": d, **{f"d{s + 1}": v for s, v in enumerate(c)}}
            for d, c in zip(disorders, matrix)]
    _emit(args, "sweep", payload, _resolved(args, {"base": vars(base_cfg)}), rows)
    return EXIT_OK


# ---------------------------------------------------------------------------
# diagnose
# ---------------------------------------------------------------------------

def cmd_diagnose(args) -> int:
    from .diagnostics import (ProbabilityDistribution, correlation_length, entropy,
                              porter_thomas_entropy, pt_histogram, pt_kl_divergence,
                              time_cross_entropy, two_body_correlations, xeb_fidelity)

    results = [_load_json(p) for p in args.results]
    try:
        finals = [ProbabilityDistribution(r["probabilities"], r["labels"]) for r in results]
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"result files lack normalized probabilities: {exc}") from exc
    out_dir = args.out or "."
    cfg = _resolved(args)
    meta = _meta(cfg)
    header = f"# gmonlab {meta['version']} config_hash={meta['config_hash']}\n"

    hist = pt_histogram(finals, bins=args.bins, x_max=args.x_max)
    lines = ["bin_lo,bin_hi,frequency,porter_thomas"]
    freqs, ref = hist.frequencies, hist.reference()
    edges = list(hist.bin_edges) + [math.inf]
    for k in range(len(freqs)):
        lines.append(f"{edges[k]!r},{edges[k + 1]!r},{freqs[k]!r},{ref[k]!r}")
    _write_file(out_dir, "histogram.csv", header + "\n".join(lines) + "\n")

    d = finals[0].n_states
    kl = {"kl_divergence": pt_kl_divergence(hist),
          "mean_entropy": float(np.mean([entropy(f) for f in finals])),
          "porter_thomas_entropy": porter_thomas_entropy(d), "meta": meta}
    _write_file(out_dir, "kl.json", json.dumps(_jsonable(kl), indent=2, sort_keys=True) + "\n")

    reference = (ProbabilityDistribution(*(lambda r: (r["probabilities"], r["labels"]))(
        _load_json(args.reference))) if args.reference else finals[0])
    xeb = {"reference": args.reference or args.results[0],
           "fidelity": {p: xeb_fidelity(f, reference) for p, f in zip(args.results, finals)},
           "meta": meta}
    _write_file(out_dir, "xeb.json", json.dumps(_jsonable(xeb), indent=2, sort_keys=True) + "\n")

    tce_lines, ent_lines, corr_dists = ["file,cycle,time_cross_entropy"], ["file,time_ns,entropy"], []
    for path, r in zip(args.results, results):
        cyc = r.get("cycles")
        if not cyc:
            corr_dists.append(ProbabilityDistribution(r["probabilities"], r["labels"]))
            continue
        t0 = min(args.t0_cycle, len(cyc) - 1)
        p0 = np.asarray(cyc[t0]["probabilities"])
        for k in range(t0, len(cyc)):
            s = time_cross_entropy(p0, np.asarray(cyc[k]["probabilities"]))
            tce_lines.append(f"{path},{k},{s!r}")
        for c in cyc:
            ent_lines.append(f"{path},{c['time_ns']!r},{c['entanglement']!r}")
        corr_dists += [ProbabilityDistribution(c["probabilities"], r["labels"]) for c in cyc[1:]]
    _write_file(out_dir, "tce.csv", header + "\n".join(tce_lines) + "\n")
    _write_file(out_dir, "entanglement.csv", header + "\n".join(ent_lines) + "\n")
    curve = two_body_correlations(corr_dists)
    try:
        xi = correlation_length(curve)
    except ValueError:
        xi = None
    corr = ["separation,mean_abs_correlation"] + [f"{k + 1},{v!r}" for k, v in enumerate(curve)]
    _write_file(out_dir, "correlations.csv",
                header + f"# correlation_length={xi}\n" + "\n".join(corr) + "\n")
    sys.stdout.write(json.dumps(_jsonable({"out": out_dir, "kl_divergence": kl["kl_divergence"],
                                           "correlation_length": xi}), sort_keys=True) + "\n")
    return EXIT_OK


# ---------------------------------------------------------------------------
# oracle-check
# ---------------------------------------------------------------------------

def cmd_oracle_check(args) -> int:
    from .integrator import rk4_evolve
    from .oracles.free_fermion import fermion_propagator, free_fermion_probabilities
    from .oracles.path_sum import linearized_product_amplitude, path_sum_amplitude

    seeds = [int(s.generate_state(1)[0]) for s in np.random.SeedSequence(args.seed).spawn(args.instances)]
    fermion = {}
    for n in parse_range(args.n):
        worst = 0.0
        for s in seeds:
            inst = sample_instance(InstanceConfig(N=n, cycles=args.cycles, t_pulse_ns=(16, 25)), s)
            basis = enumerate_basis(n, half_filling(n), MaxLevel(1))
            psi0 = StateVector.fock(basis, initial_pattern(n))
            p_sim = np.abs(rk4_evolve(inst, basis, psi0, args.steps).final_state.amplitudes) ** 2
            V = fermion_propagator(inst, args.steps)
            p_ff = free_fermion_probabilities(V, initial_pattern(n), basis.states)
            worst = max(worst, float(np.max(np.abs(p_sim - p_ff))))
        fermion[str(n)] = worst
    path = 0.0
    for s in seeds:
        inst = sample_instance(InstanceConfig(N=3, cycles=1, t_pulse_ns=(16, 25)), s)
        basis = enumerate_basis(3, 1, MaxLevel(1))
        for out in basis.states:
            a = path_sum_amplitude(inst, (0, 1, 0), tuple(out), args.m)
            b = linearized_product_amplitude(inst, (0, 1, 0), tuple(out), args.m)
            path = max(path, abs(a - b))
    payload = {"free_fermion_max_deviation": fermion, "path_sum_max_deviation": path}
    _emit(args, "oracle_check", payload, _resolved(args),
          [{"check": f"free_fermion_N{k}", "max_deviation": v} for k, v in fermion.items()]
          + [{"check": "path_sum", "max_deviation": path}])
    return EXIT_OK


# ---------------------------------------------------------------------------
# gmon
# ---------------------------------------------------------------------------

def _gmon_params(path):
    from .gmon import GmonCircuitParams
    doc = _load_json(path) if path else {}
    try:
        return GmonCircuitParams(**doc)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad circuit parameters: {exc}") from exc


def cmd_gmon_spectrum(args) -> int:
    from .gmon import circuit_spectrum
    params = _gmon_params(args.params)
    fq = _float_range(args.flux_q, args.points)
    fc = _float_range(args.flux_c, 1)
    rows = []
    for c in fc:
        for q in fq:
            try:
                s = circuit_spectrum(params, q, c, n_levels=args.levels)
            except ValueError as exc:
                raise ConfigError(str(exc)) from exc
            rows.append({"flux_q": q, "flux_c": c, "f10_Hz": s.f10, "f21_Hz": s.f21})
    _emit(args, "spectrum", {"params": params.to_dict(), "spectrum": rows},
          _resolved(args, {"params": params.to_dict()}), rows)
    return EXIT_OK


def cmd_gmon_fit_poly(args) -> int:
    from .gmon import PRINTED_A, PRINTED_B, GridSpec, fit_polynomial_coefficients
    fit = fit_polynomial_coefficients(GridSpec(args.grid, args.grid, n_levels=args.levels))
    with np.errstate(divide="ignore", invalid="ignore"):
        rel_a = np.where(PRINTED_A != 0, fit.coeffs.A / PRINTED_A - 1.0, 0.0)
        rel_b = np.where(PRINTED_B != 0, fit.coeffs.B / PRINTED_B - 1.0, 0.0)
    payload = {"A": fit.coeffs.A, "B": fit.coeffs.B,
               "max_residual_over_w0": fit.max_residual, "rms_residual_over_w0": fit.rms_residual,
               "max_residual_Hz_at_5GHz": [r * 5e9 for r in fit.max_residual],
               "relative_change_vs_reference": {"A": rel_a, "B": rel_b}}
    rows = [{"matrix": name, "n": n, "m": m, "value": M[n, m]}
            for name, M in (("A", fit.coeffs.A), ("B", fit.coeffs.B))
            for n in range(M.shape[0]) for m in range(M.shape[1])]
    _emit(args, "polynomial", payload, _resolved(args), rows)
    return EXIT_OK


def cmd_gmon_fit(args) -> int:
    from .gmon import fit_spectrum
    data = _read_csv_columns(args.data)
    if data.shape[1] < 4:
        raise ConfigError("spectrum data needs columns flux_q, flux_c, f10_Hz, f21_Hz")
    initial = _gmon_params(args.params) if args.params else None
    fit = fit_spectrum(data[:, 0], data[:, 1], data[:, 2], data[:, 3], initial,
                       fit_fields=tuple(args.fields.split(",")))
    payload = {"params": fit.params.to_dict(), "rms_Hz": fit.rms, "residuals_Hz": fit.residuals,
               "nfev": fit.nfev}
    _emit(args, "spectrum_fit", payload, _resolved(args), [fit.params.to_dict()])
    return EXIT_OK


# ---------------------------------------------------------------------------
# cal
# ---------------------------------------------------------------------------

def _waveform(path):
    data = _read_csv_columns(path)
    if data.shape[1] < 2 or len(data) < 2:
        raise ConfigError(f"{path}: waveforms need (t, value) columns and two or more rows")
    t, v = data[:, 0], data[:, 1]
    dt = float(np.median(np.diff(t)))
    if not np.allclose(np.diff(t), dt, rtol=1e-6, atol=0):
        raise ConfigError(f"{path}: waveform must be uniformly sampled")
    return t, v, dt


def _tf(path):
    from .waveform import TransferFunction
    doc = _load_json(path)
    try:
        return TransferFunction(tuple((t["eps"], t["tau_s"]) for t in doc["terms"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad transfer function: {exc}") from exc


def _curve(text):
    try:
        coeffs = [float(c) for c in text.split(",")]
    except ValueError as exc:
        raise ConfigError("--curve takes comma-separated polynomial coefficients") from exc
    return lambda f: np.polyval(coeffs[::-1], f)


def _waveform_rows(t, v):
    return [{"t": a, "value": b} for a, b in zip(t, v)]


def cmd_cal_predistort(args) -> int:
    from .waveform import predistort
    t, v, dt = _waveform(args.waveform)
    tf = _tf(args.tf)
    try:
        out = predistort(tf, v, dt)
    except ValueError as exc:
        raise NumericalError(str(exc)) from exc
    _emit(args, "predistorted", {"t": t, "value": out}, _resolved(args), _waveform_rows(t, out))
    return EXIT_OK


def cmd_cal_tf_fit(args) -> int:
    from .waveform import fit_transfer_function
    t, phase, dt = _waveform(args.phase)
    _, pulse, _ = _waveform(args.pulse)
    if len(pulse) != len(phase):
        raise ConfigError("phase and pulse traces must have the same length")
    fit = fit_transfer_function(phase, pulse, dt, _curve(args.curve), args.terms)
    payload = {"terms": [{"eps": e, "tau_s": tau} for e, tau in fit.tf.terms],
               "residual_rms": fit.residual_rms}
    _emit(args, "transfer_function", payload, _resolved(args), payload["terms"])
    return EXIT_OK


def cmd_cal_xtalk(args) -> int:
    from .waveform import CrosstalkMatrix, compensate_crosstalk
    doc = _load_json(args.matrix)
    try:
        X = CrosstalkMatrix(np.asarray(doc["matrix"], dtype=float))
        desired = np.asarray(_load_json(args.desired)["fluxes"] if args.desired
                             else doc["desired"], dtype=float)
        control = compensate_crosstalk(X, desired)
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"bad crosstalk input: {exc}") from exc
    residual = float(np.max(np.abs(X.matrix @ control - desired)))
    payload = {"control": control, "residual": residual, "condition_number": X.condition_number()}
    _emit(args, "crosstalk", payload, _resolved(args),
          [{"channel": k, "control": c} for k, c in enumerate(control)])
    return EXIT_OK


def cmd_cal_timing(args) -> int:
    from .waveform import fit_timing_dip
    data = _read_csv_columns(args.data)
    try:
        fit = fit_timing_dip(data[:, 0], data[:, 1])
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    payload = vars(fit)
    _emit(args, "timing", payload, _resolved(args), [payload])
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def _common(p, seed_required=False):
    p.add_argument("--out", help="output directory (default: stdout)")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--jobs", type=int, default=1, help="worker processes")
    p.add_argument("--seed", type=int, required=seed_required, default=None if seed_required else 0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gmonlab", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"gmonlab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("dims", help="Hilbert-space dimensions")
    p.add_argument("--n", default="4..9", help="N range, e.g. 4..9 or 4,6,8")
    p.add_argument("--scheme", action="append",
                   help="truncation scheme (repeatable); default: the four table columns")
    _common(p)
    p.set_defaults(func=cmd_dims)

    p = sub.add_parser("resources", help="memory and communication-time estimate")
    p.add_argument("--profile", help="ResourceProfile JSON")
    p.add_argument("--dim", type=int)
    p.add_argument("--log2-dim", type=int)
    p.add_argument("--n", type=int)
    p.add_argument("--scheme", default="bands:1,0")
    _common(p)
    p.set_defaults(func=cmd_resources)

    for name, func, stochastic in (("run", cmd_run, False), ("sample", cmd_sample, True)):
        p = sub.add_parser(name, help=f"{name} one instance")
        p.add_argument("--config", required=True, help="instance JSON")
        p.add_argument("--scheme", help="override the instance's truncation scheme")
        p.add_argument("--steps", type=int, help="RK4 steps (default: from the spectral bound)")
        p.add_argument("--top-k", type=int, default=0)
        p.add_argument("--cycle-outputs", action="store_true",
                       help="also record distributions and entanglement after every cycle")
        if stochastic:
            p.add_argument("--shots", type=int, default=50000)
            p.add_argument("--readout-error", type=float, default=0.0)
            p.add_argument("--loss", type=float, default=0.0, help="loss per qubit per cycle")
        _common(p, seed_required=stochastic)
        p.set_defaults(func=func)

    p = sub.add_parser("sweep", help="disorder sweep of two-body correlations")
    p.add_argument("--config", help="InstanceConfig overrides (JSON)")
    p.add_argument("--n", type=int, default=9)
    p.add_argument("--cycles", type=int, default=10)
    p.add_argument("--disorder", default="5,30", help="MHz list or lo..hi with --points")
    p.add_argument("--points", type=int, default=7)
    p.add_argument("--instances", type=int, default=20)
    p.add_argument("--scheme", default="max:2")
    _common(p, seed_required=True)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("diagnose", help="chaos diagnostics from result files")
    p.add_argument("results", nargs="+", help="result JSON files from `run`")
    p.add_argument("--reference", help="result file used as the expected distribution")
    p.add_argument("--bins", type=int, default=32)
    p.add_argument("--x-max", type=float, default=8.0)
    p.add_argument("--t0-cycle", type=int, default=2)
    _common(p)
    p.set_defaults(func=cmd_diagnose)

    p = sub.add_parser("oracle-check", help="cross-check the simulator against the oracles")
    p.add_argument("--n", default="6,8")
    p.add_argument("--instances", type=int, default=2)
    p.add_argument("--cycles", type=int, default=2)
    p.add_argument("--steps", type=int, default=4000)
    p.add_argument("--m", type=int, default=4, help="half the number of Trotter slices")
    _common(p)
    p.set_defaults(func=cmd_oracle_check)

    g = sub.add_parser("gmon", help="gmon circuit model").add_subparsers(dest="action", required=True)
    p = g.add_parser("spectrum", help="transition frequencies versus flux")
    p.add_argument("--params", help="GmonCircuitParams JSON (default: first device qubit)")
    p.add_argument("--flux-q", default="0")
    p.add_argument("--flux-c", default="0")
    p.add_argument("--points", type=int, default=11)
    p.add_argument("--levels", type=int, default=20)
    _common(p)
    p.set_defaults(func=cmd_gmon_spectrum)
    p = g.add_parser("fit-poly", help="refit the perturbative polynomial")
    p.add_argument("--grid", type=int, default=100)
    p.add_argument("--levels", type=int, default=20)
    _common(p)
    p.set_defaults(func=cmd_gmon_fit_poly)
    p = g.add_parser("fit", help="fit circuit parameters to a measured spectrum")
    p.add_argument("--data", required=True, help="CSV: flux_q, flux_c, f10_Hz, f21_Hz")
    p.add_argument("--params", help="initial guess JSON")
    p.add_argument("--fields", default="C,L_j,L_g,g_r")
    _common(p)
    p.set_defaults(func=cmd_gmon_fit)

    c = sub.add_parser("cal", help="control-line calibration").add_subparsers(dest="action", required=True)
    p = c.add_parser("tf-fit", help="fit a transfer function to a phase trace")
    p.add_argument("--phase", required=True, help="CSV (t, phase)")
    p.add_argument("--pulse", required=True, help="CSV (t, flux)")
    p.add_argument("--curve", required=True, help="flux-to-frequency polynomial c0,c1,... in Hz")
    p.add_argument("--terms", type=int, default=1)
    _common(p)
    p.set_defaults(func=cmd_cal_tf_fit)
    p = c.add_parser("predistort", help="predistort a waveform")
    p.add_argument("--tf", required=True, help='JSON {"terms": [{"eps": .., "tau_s": ..}]}')
    p.add_argument("--waveform", required=True, help="CSV (t, value)")
    _common(p)
    p.set_defaults(func=cmd_cal_predistort)
    p = c.add_parser("xtalk", help="crosstalk compensation")
    p.add_argument("--matrix", required=True, help='JSON {"matrix": [[..]], "desired": [..]}')
    p.add_argument("--desired", help='JSON {"fluxes": [..]}')
    _common(p)
    p.set_defaults(func=cmd_cal_xtalk)
    p = c.add_parser("timing", help="timing offset from a dip")
    p.add_argument("--data", required=True, help="CSV (delay_s, probability)")
    _common(p)
    p.set_defaults(func=cmd_cal_timing)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except BudgetExceeded as exc:
        print(f"budget exceeded: {exc}", file=sys.stderr)
        return EXIT_BUDGET


if __name__ == "__main__":
    sys.exit(main())
