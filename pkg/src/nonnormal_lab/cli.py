"""Experiment runner: one subcommand per reproduction artifact.

Usage:
    nonnormal-lab <toy|pseudo|train|sweep> [--config FILE] [--preset NAME]
                  [--out DIR] [--seed N] [key=value ...]

Exit codes: 0 success, 2 configuration error, 3 numerical abort (partial
outputs are retained). Every output file embeds the resolved config; the
JSON sidecars carry the only timestamp, so re-running a command from an
emitted config reproduces all other bytes exactly.
"""

from __future__ import annotations

import argparse
import datetime
import json
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import _closed2x2, linalg, operators, pseudospec, train


class ConfigError(ValueError):
    """Bad or unknown configuration input."""


TOY_DEFAULTS = {"lam": 5.0, "eta": 0.18, "beta": 0.9, "t_max": 60}

PSEUDO_DEFAULTS = {
    "operator": "toy",
    "toy_lam": 5.0,
    "toy_eta": 0.18,
    "toy_beta": 0.9,
    "jordan_lam": 0.0,
    "jordan_n": 2,
    "matrix_file": None,
    "re_min": None,
    "re_max": None,
    "im_min": None,
    "im_max": None,
    "n_re": 121,
    "n_im": 121,
    "epsilons": [1e-1, 1e-2, 1e-3],
    "kreiss": True,
    "kreiss_radial": 48,
    "kreiss_angular": 96,
    "kreiss_refine": 12,
    "ep_probe": False,
    "ep_rays": 8,
    "ep_center_re": None,
    "ep_center_im": None,
    "ep_epsilons": [1e-3, 1e-4, 1e-5, 1e-6],
}

TRAIN_DEFAULTS = {
    "optimizer": "sgdm",
    "eta": 0.18,
    "beta": 0.9,
    "beta1": 0.9,
    "beta2": 0.999,
    "eps_adam": 1e-8,
    "steps": 600,
    "sample_stride": 5,
    "seed": 0,
    "data_seed": None,
    "n_data": 500,
    "noise_scale": 0.1,
    "warmup_steps": 0,
    "warmup_eta": 0.01,
    "kappa_multiplier": 5.0,
    "kappa_window": 20,
}

SWEEP_DEFAULTS = {k: v for k, v in TRAIN_DEFAULTS.items() if k != "seed"}
SWEEP_DEFAULTS["seeds"] = [0, 1, 2, 3, 4]

DEFAULTS = {
    "toy": TOY_DEFAULTS,
    "pseudo": PSEUDO_DEFAULTS,
    "train": TRAIN_DEFAULTS,
    "sweep": SWEEP_DEFAULTS,
}

PRESETS = {
    "sgdm-paper": {
        "experiment": "train",
        "optimizer": "sgdm",
        "eta": 0.18,
        "beta": 0.9,
        "steps": 600,
        "sample_stride": 5,
    },
    "sgdm-beta095": {
        "experiment": "train",
        "optimizer": "sgdm",
        "eta": 0.18,
        "beta": 0.95,
        "steps": 600,
        "sample_stride": 5,
    },
    "adam-paper": {
        "experiment": "train",
        "optimizer": "adam",
        "eta": 0.1,
        "beta1": 0.9,
        "beta2": 0.999,
        "eps_adam": 1e-8,
        "steps": 600,
        "sample_stride": 5,
    },
    "seeds-paper": {
        "experiment": "sweep",
        "optimizer": "sgdm",
        "eta": 0.18,
        "beta": 0.9,
        "steps": 300,
        "sample_stride": 5,
        "warmup_steps": 100,
        "warmup_eta": 0.01,
        "seeds": [0, 1, 2, 3, 4],
    },
}


def _merge(cfg: dict, updates: dict, allowed, source: str) -> None:
    for key, value in updates.items():
        if key == "experiment":
            continue
        if key not in allowed:
            raise ConfigError(f"unknown config key {key!r} from {source}")
        cfg[key] = value


def build_config(command: str, preset: str | None = None, config_file=None,
                 overrides=(), seed: int | None = None) -> dict:
    """Resolve the effective config: defaults < preset < file < overrides < --seed."""
    cfg = dict(DEFAULTS[command])
    allowed = set(cfg)
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigError(f"unknown preset {preset!r}; available: {sorted(PRESETS)}")
        pdata = PRESETS[preset]
        if pdata["experiment"] != command:
            raise ConfigError(f"preset {preset!r} belongs to the {pdata['experiment']!r} command")
        _merge(cfg, pdata, allowed, f"preset {preset!r}")
    if config_file is not None:
        try:
            with open(config_file) as fh:
                data = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config file: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file is not valid JSON: {exc}") from exc
        if isinstance(data, dict) and isinstance(data.get("config"), dict):
            data = data["config"]  # accept an emitted sidecar as-is
        if not isinstance(data, dict):
            raise ConfigError("config file must hold a JSON object")
        _merge(cfg, data, allowed, "config file")
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form key=value")
        key, raw = item.split("=", 1)
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        _merge(cfg, {key: value}, allowed, "command line")
    if seed is not None:
        if command == "sweep":
            cfg["seeds"] = [int(seed)]
        elif command == "train":
            cfg["seed"] = int(seed)
        else:
            raise ConfigError(f"--seed does not apply to the {command!r} command")
    return cfg


def train_config_from(cfg: dict) -> train.TrainConfig:
    try:
        return train.TrainConfig(**{k: v for k, v in cfg.items() if k != "seeds"})
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def preset_train_config(name: str, seed: int | None = None, **overrides) -> train.TrainConfig:
    """TrainConfig for a named preset; the hook the acceptance suite uses."""
    pdata = PRESETS[name]
    base = dict(TRAIN_DEFAULTS)
    _merge(base, pdata, set(base) | {"seeds"}, f"preset {name!r}")
    base.pop("seeds", None)
    if seed is not None:
        base["seed"] = int(seed)
    base.update(overrides)
    return train.TrainConfig(**base)


def _canonical_json(payload) -> str:
    return json.dumps(payload, sort_keys=True, separators=(",", ":"))


def _write_json(path, payload) -> None:
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _timestamp() -> str:
    return datetime.datetime.now(datetime.timezone.utc).isoformat()


def _complex_pair(z: complex) -> list[float]:
    return [float(np.real(z)), float(np.imag(z))]


# ---------------------------------------------------------------------------
# toy


def cmd_toy(cfg: dict, outdir: Path) -> int:
    """Closed-form benchmark operator, cross-checked against the kernel."""
    op = operators.build_scalar_toy(cfg["lam"], cfg["eta"], cfg["beta"])
    J = op.J
    ed = linalg.eig(J)
    norm2 = linalg.operator_norm_2(J)
    smin = linalg.sigma_min(J)
    t_max = int(cfg["t_max"])
    powers = linalg.matrix_power_norms(J, t_max)
    commutator = operators.normality_commutator(J)
    report = pseudospec.precursor_from_values(max(ed.kappa_V, 1.0), ed.spectral_radius)

    cf_z1, cf_z2 = _closed2x2.eigenvalues2(J)
    cf_smax, cf_smin = _closed2x2.singular_values2(J)
    cf_kappa = _closed2x2.kappa2(J)
    cf_rho = _closed2x2.spectral_radius2(J)

    measured = sorted(ed.eigenvalues, key=lambda z: -z.imag)
    checks = {
        "eigenvalues": max(abs(measured[0] - cf_z1), abs(measured[1] - cf_z2)),
        "spectral_radius": abs(ed.spectral_radius - cf_rho),
        "operator_norm_2": abs(norm2 - cf_smax),
        "sigma_min": abs(smin - cf_smin),
        "kappa_V": abs(ed.kappa_V - cf_kappa) if np.isfinite(cf_kappa) else 0.0,
    }
    tol = 1e-10
    crosscheck_ok = all(err <= tol * max(1.0, abs(ref)) for err, ref in (
        (checks["eigenvalues"], cf_rho),
        (checks["spectral_radius"], cf_rho),
        (checks["operator_norm_2"], cf_smax),
        (checks["sigma_min"], cf_smax),
        (checks["kappa_V"], cf_kappa if np.isfinite(cf_kappa) else 1.0),
    ))

    above = [t for t in range(1, t_max + 1) if powers[t] > 1.0]
    below = [t for t in range(1, t_max + 1) if powers[t] < 1.0]
    payload = {
        "config": cfg,
        "timestamp": _timestamp(),
        "J": [[float(v) for v in row] for row in J],
        "eigenvalues": [_complex_pair(z) for z in measured],
        "spectral_radius": ed.spectral_radius,
        "kappa_V": ed.kappa_V,
        "operator_norm_2": norm2,
        "sigma_min": smin,
        "power_norms": [float(v) for v in powers],
        "first_t_norm_below_1": below[0] if below else None,
        "last_t_norm_above_1": above[-1] if above else None,
        "commutator_diagonal": [float(commutator[0, 0].real), float(commutator[1, 1].real)],
        "is_normal": operators.is_normal(J),
        "reduced_map_normal": cfg["beta"] == 0.0,
        "precursor_t_c": report.t_c,
        "amplification_possible": report.amplification_possible,
        "closed_form": {
            "eigenvalues": [_complex_pair(cf_z1), _complex_pair(cf_z2)],
            "spectral_radius": cf_rho,
            "operator_norm_2": cf_smax,
            "sigma_min": cf_smin,
            "kappa_V": cf_kappa if np.isfinite(cf_kappa) else None,
        },
        "crosscheck": {"max_abs_errors": checks, "tolerance": tol, "ok": crosscheck_ok},
    }
    path = outdir / "toy_report.json"
    _write_json(path, payload)
    print(f"toy: eigenvalues {measured[0]:.6f}, {measured[1]:.6f}")
    print(f"toy: rho={ed.spectral_radius:.12f} kappa_V={ed.kappa_V:.6f} ||J||_2={norm2:.6f}")
    print(f"toy: first ||J^t||<1 at t={payload['first_t_norm_below_1']}, "
          f"last ||J^t||>1 at t={payload['last_t_norm_above_1']}, t_c={report.t_c}")
    print(f"toy: closed-form cross-check {'ok' if crosscheck_ok else 'FAILED'} -> {path}")
    if not crosscheck_ok:
        return 3
    return 0


# ---------------------------------------------------------------------------
# pseudo


def _operator_from_config(cfg: dict) -> tuple[np.ndarray, str]:
    kind = cfg["operator"]
    if kind == "toy":
        op = operators.build_scalar_toy(cfg["toy_lam"], cfg["toy_eta"], cfg["toy_beta"])
        return op.J, f"toy(lam={cfg['toy_lam']}, eta={cfg['toy_eta']}, beta={cfg['toy_beta']})"
    if kind == "jordan":
        n = int(cfg["jordan_n"])
        if n < 2:
            raise ConfigError("jordan_n must be >= 2")
        lam = float(cfg["jordan_lam"])
        J = lam * np.eye(n) + np.diag(np.ones(n - 1), 1)
        return J, f"jordan(lam={lam}, n={n})"
    if kind == "file":
        path = cfg["matrix_file"]
        if not path:
            raise ConfigError("operator 'file' needs matrix_file=PATH")
        try:
            rows = []
            with open(path) as fh:
                for line in fh:
                    line = line.strip()
                    if not line or line.startswith("#"):
                        continue
                    rows.append([complex(tok) for tok in line.split(",")])
            J = np.array(rows)
            if np.all(J.imag == 0):
                J = J.real
        except (OSError, ValueError) as exc:
            raise ConfigError(f"cannot load matrix from {path!r}: {exc}") from exc
        if J.ndim != 2 or J.shape[0] != J.shape[1] or J.size == 0:
            raise ConfigError(f"matrix file {path!r} must hold a square matrix")
        return J, f"file({path})"
    raise ConfigError(f"unknown operator kind {kind!r}")


def _auto_domain(J: np.ndarray, max_eps: float) -> tuple[float, float]:
    rho = float(np.abs(np.linalg.eigvals(J.astype(complex))).max())
    radius = rho + max(0.15 * (1.0 + rho), 2.0 * np.sqrt(max_eps))
    # grow until a coarse ring lies fully outside the largest sublevel set
    for _ in range(60):
        ring = radius * np.exp(2j * np.pi * np.arange(32) / 32)
        sig = [pseudospec.sigma_min_at(J, z) for z in ring]
        if min(sig) > 1.2 * max_eps:
            break
        radius *= 1.3
    return rho, radius


def cmd_pseudo(cfg: dict, outdir: Path) -> int:
    """Resolvent-field grid plus Kreiss and degeneracy-scaling summaries."""
    J, desc = _operator_from_config(cfg)
    ed = linalg.eig(J)
    epsilons = [float(e) for e in cfg["epsilons"]]
    if any(e <= 0 for e in epsilons):
        raise ConfigError("epsilons must be positive")
    bounds = (cfg["re_min"], cfg["re_max"], cfg["im_min"], cfg["im_max"])
    if any(b is None for b in bounds):
        if any(b is not None for b in bounds):
            raise ConfigError("give all four of re_min/re_max/im_min/im_max or none")
        _, radius = _auto_domain(J, max(epsilons))
        bounds = (-radius, radius, -radius, radius)
    spec = pseudospec.GridSpec(*[float(b) for b in bounds], int(cfg["n_re"]), int(cfg["n_im"]))
    grid = pseudospec.pseudospectrum(J, (spec.re_min, spec.re_max), (spec.im_min, spec.im_max),
                                     (spec.n_re, spec.n_im))
    config_line = f"config: {_canonical_json(cfg)}"
    grid_path = outdir / "pseudo_grid.csv"
    pseudospec.write_grid_csv(grid, grid_path, comments=[config_line])

    rho_eps = {}
    for eps in epsilons:
        try:
            rho_eps[repr(eps)] = pseudospec.pseudospectral_radius(J, eps, spec)
        except pseudospec.GridDomainError as exc:
            rho_eps[repr(eps)] = f"error: {exc}"

    summary = {
        "config": cfg,
        "timestamp": _timestamp(),
        "operator": desc,
        "n": int(J.shape[0]),
        "eigenvalues": [_complex_pair(z) for z in ed.eigenvalues],
        "spectral_radius": ed.spectral_radius,
        "kappa_V": None if not np.isfinite(ed.kappa_V) else ed.kappa_V,
        "diagonalizable": ed.diagonalizable,
        "operator_norm_2": linalg.operator_norm_2(J),
        "grid": asdict(spec),
        "grid_spacing": grid.spec.spacing(),
        "pseudospectral_radius": rho_eps,
    }

    if cfg["kreiss"]:
        try:
            est = pseudospec.kreiss_constant(
                J, int(cfg["kreiss_radial"]), int(cfg["kreiss_angular"]), int(cfg["kreiss_refine"])
            )
            summary["kreiss"] = {
                "value": est.value,
                "argmax_z": None if est.argmax_z is None else _complex_pair(est.argmax_z),
                "search": est.grid_spec,
            }
        except pseudospec.DivergingSupremumError as exc:
            summary["kreiss"] = {"error": str(exc)}

    if cfg["ep_probe"]:
        if cfg["ep_center_re"] is None:
            # probe at the eigenvalue with the smallest gap to its neighbors
            w = ed.eigenvalues
            if len(w) == 1:
                center = complex(w[0])
            else:
                gaps = [min(abs(z - y) for y in w if y is not z) for z in w]
                center = complex(w[int(np.argmin(gaps))])
        else:
            center = complex(float(cfg["ep_center_re"]), float(cfg["ep_center_im"] or 0.0))
        exponent = pseudospec.ep_scaling_probe(J, center, [float(e) for e in cfg["ep_epsilons"]],
                                               n_rays=int(cfg["ep_rays"]))
        summary["ep_probe"] = {
            "center": _complex_pair(center),
            "epsilons": [float(e) for e in cfg["ep_epsilons"]],
            "exponent": exponent,
        }

    path = outdir / "pseudo_summary.json"
    _write_json(path, summary)
    print(f"pseudo: {desc} rho={ed.spectral_radius:.6f} kappa_V={ed.kappa_V:.6g}")
    if "kreiss" in summary and "value" in summary.get("kreiss", {}):
        print(f"pseudo: kreiss lower bound {summary['kreiss']['value']:.6f}")
    if "ep_probe" in summary:
        print(f"pseudo: boundary-distance scaling exponent {summary['ep_probe']['exponent']:.4f}")
    print(f"pseudo: grid -> {grid_path}, summary -> {path}")
    return 0


# ---------------------------------------------------------------------------
# train


def _trace_sidecar(trace: train.TrainTrace, cfg: dict) -> dict:
    records = trace.records
    rho_values = [r.rho_J for r in records]
    summary = {
        "steps_run": len(trace.losses),
        "final_loss": trace.losses[-1] if trace.losses else None,
        "spike_count": len(trace.spike_steps),
        "rho_range": [min(rho_values), max(rho_values)] if rho_values else None,
        "kappa_range": [min(r.kappa_V for r in records), max(r.kappa_V for r in records)]
        if records
        else None,
        "aborted": trace.aborted,
    }
    lead = train.lead_time(trace)
    return {
        "config": cfg,
        "seed": cfg.get("seed"),
        "timestamp": _timestamp(),
        "spike_steps": trace.spike_steps,
        "instability_window": trace.instability_window,
        "stable_window": trace.stable_window,
        "lead_time": lead,
        "summary": summary,
    }


def _print_train_summary(trace: train.TrainTrace, lead: dict) -> None:
    records = trace.records
    print(f"train: {len(trace.losses)} steps, {len(trace.spike_steps)} spikes"
          + (" [ABORTED]" if trace.aborted else ""))
    if records:
        rho_lo = min(r.rho_J for r in records)
        rho_hi = max(r.rho_J for r in records)
        print(f"train: rho(J) in [{rho_lo:.4f}, {rho_hi:.4f}], "
              f"kappa separation ratio {lead['separation_ratio']}")
    if lead["spikes"]:
        print("train: spike  sharpness_lead  kappa_lead")
        for row in lead["spikes"]:
            print(f"train: {row['spike_step']:>5}  {row['sharpness_lead']!s:>14}  "
                  f"{row['kappa_lead']!s:>10}")


def cmd_train(cfg: dict, outdir: Path) -> int:
    trace = train.run_training(train_config_from(cfg))
    config_line = f"config: {_canonical_json(cfg)}"
    trace_path = outdir / "train_trace.csv"
    train.write_trace_csv(trace, trace_path, comments=[config_line])
    sidecar = _trace_sidecar(trace, cfg)
    json_path = outdir / "train_run.json"
    _write_json(json_path, sidecar)
    _print_train_summary(trace, sidecar["lead_time"])
    print(f"train: trace -> {trace_path}, sidecar -> {json_path}")
    return 3 if trace.aborted else 0


# ---------------------------------------------------------------------------
# sweep


def cmd_sweep(cfg: dict, outdir: Path) -> int:
    seeds = [int(s) for s in cfg["seeds"]]
    if not seeds:
        raise ConfigError("sweep needs at least one seed")
    config_line = f"config: {_canonical_json(cfg)}"
    traces = {}
    for seed in seeds:
        run_cfg = dict(cfg)
        run_cfg.pop("seeds")
        run_cfg["seed"] = seed
        trace = train.run_training(train_config_from(run_cfg))
        traces[seed] = trace
        train.write_trace_csv(trace, outdir / f"seed{seed}_trace.csv",
                              comments=[config_line, f"seed: {seed}"])
    aborted = [s for s, tr in traces.items() if tr.aborted]
    complete = {s: tr for s, tr in traces.items() if not tr.aborted}

    steps = None
    for tr in complete.values():
        s = [r.step for r in tr.records]
        steps = s if steps is None else [t for t in steps if t in set(s)]
    steps = steps or []

    agg_path = outdir / "sweep_aggregate.csv"
    with open(agg_path, "w", newline="") as fh:
        fh.write(f"# {config_line}\n")
        if aborted:
            fh.write(f"# incomplete: aborted seeds {aborted}\n")
        fh.write("step,kappa_mean,kappa_std,rho_mean,rho_std\n")
        for t in steps:
            kappas = [next(r.kappa_V for r in tr.records if r.step == t) for tr in complete.values()]
            rhos = [next(r.rho_J for r in tr.records if r.step == t) for tr in complete.values()]
            fh.write(
                f"{t},{np.mean(kappas)!r},{np.std(kappas)!r},{np.mean(rhos)!r},{np.std(rhos)!r}\n"
            )

    all_rho = [r.rho_J for tr in complete.values() for r in tr.records]
    all_kappa = [r.kappa_V for tr in complete.values() for r in tr.records]
    sidecar = {
        "config": cfg,
        "seeds": seeds,
        "timestamp": _timestamp(),
        "aborted_seeds": aborted,
        "complete": not aborted,
        "rho_range": [min(all_rho), max(all_rho)] if all_rho else None,
        "kappa_range": [min(all_kappa), max(all_kappa)] if all_kappa else None,
        "per_seed": {
            str(s): {
                "spike_count": len(tr.spike_steps),
                "final_loss": tr.losses[-1] if tr.losses else None,
                "aborted": tr.aborted,
            }
            for s, tr in traces.items()
        },
    }
    json_path = outdir / "sweep_run.json"
    _write_json(json_path, sidecar)
    if all_rho:
        print(f"sweep: {len(seeds)} seeds, rho in [{min(all_rho):.4f}, {max(all_rho):.4f}], "
              f"kappa in [{min(all_kappa):.2f}, {max(all_kappa):.2f}]")
    print(f"sweep: aggregate -> {agg_path}, sidecar -> {json_path}"
          + (f" [INCOMPLETE: aborted seeds {aborted}]" if aborted else ""))
    return 3 if aborted else 0


# ---------------------------------------------------------------------------


_COMMANDS = {"toy": cmd_toy, "pseudo": cmd_pseudo, "train": cmd_train, "sweep": cmd_sweep}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="nonnormal-lab",
        description="Stability diagnostics for optimizer update operators.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, helptext in (
        ("toy", "closed-form 2x2 benchmark operator"),
        ("pseudo", "resolvent-field grid, Kreiss bound, scaling probe"),
        ("train", "diagnostic training run"),
        ("sweep", "multi-seed training sweep with aggregation"),
    ):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--config", help="JSON config file (an emitted sidecar also works)")
        p.add_argument("--preset", help=f"one of {sorted(PRESETS)}")
        p.add_argument("--out", default="runs", help="output directory (default: runs)")
        p.add_argument("--seed", type=int, help="seed override")
        p.add_argument("overrides", nargs="*", metavar="key=value",
                       help="config overrides, values parsed as JSON")
    args = parser.parse_args(argv)
    try:
        cfg = build_config(args.command, args.preset, args.config, args.overrides, args.seed)
        outdir = Path(args.out)
        outdir.mkdir(parents=True, exist_ok=True)
        return _COMMANDS[args.command](cfg, outdir)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
