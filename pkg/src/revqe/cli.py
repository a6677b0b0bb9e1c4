"""Batch command-line front end.

Subcommands: train, correlations, gradvar, cluster-demo.  Configuration
is a TOML document validated against a closed schema (unknown keys are
rejected) before any compute or output happens.  Exit codes: 2 for
config/contract problems, 3 for capacity limits.

All outputs carry a format_version field; exact-mode runs with the same
config and seed produce byte-identical CSV/JSONL files.
"""

from __future__ import annotations

import csv
import hashlib
import json
import sys
from pathlib import Path

import click
import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import __version__
from .ansatz import Architecture, architecture_to_json, assemble_qmps, assemble_qpeps
from .cluster import SloccSpec, cluster_architecture, slocc_analytic, slocc_correlation
from .errors import CapacityError, ConfigError, ContractError
from .estimator import gradient_variance_study
from .model import (
    Hamiltonian,
    LatticeSpec,
    hamiltonian_to_json,
    heisenberg_j1j2,
    zigzag_ordering,
)
from .oracle import WIDE_CAP, correlation_matrix, exact_ground_state, wide_num_wires
from .simcore import run_schedule_batch
from .trainer import AdamState, TrainConfig, train_loop, runtime_estimate

OUTPUT_FORMAT_VERSION = 1

# closed config schema: section -> key -> (type, default); None default
# means the key is required when the section is used
_SCHEMA = {
    "lattice": {
        "Lx": (int, None),
        "Ly": (int, None),
        "J2": (float, 0.0),
    },
    "ansatz": {
        "kind": (str, None),  # general | u1 | su2 | qpeps
        "V": (int, 0),
        "d": (int, None),
    },
    "train": {
        "mode": (str, "exact"),
        "gradient_engine": (str, "shift"),
        "steps": (int, 500),
        "batch": (int, 1024),
        "lr": (float, 0.1),
        "seed": (int, 0),
        "record_fidelity": (bool, False),
        "fidelity_every": (int, 50),
        "fidelity_sector": (float, None),
    },
    "study": {
        "kind": (str, None),
        "sweep": (str, "N"),
        "values": (list, None),
        "N": (int, 16),
        "V": (int, 4),
        "d": (int, 5),
        "draws": (int, 200),
        "shots_per_basis": (int, 0),
        "reps": (int, 50),
        "seed": (int, 0),
        "pooled": (bool, False),
        "component": (int, None),
    },
}
_OPTIONAL_KEYS = {("train", "fidelity_sector"), ("study", "component")}


def load_config(path: str, sections) -> dict:
    """Parse and schema-validate a TOML config; closed-world keys."""
    try:
        with open(path, "rb") as fh:
            doc = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    except OSError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    out = {}
    for section in doc:
        if section not in _SCHEMA:
            raise ConfigError(f"{path}: unknown section [{section}]")
    for section in sections:
        table = doc.get(section, {})
        if not isinstance(table, dict):
            raise ConfigError(f"{path}: [{section}] must be a table")
        spec = _SCHEMA[section]
        for key in table:
            if key not in spec:
                raise ConfigError(f"{path}: unknown key {section}.{key}")
        values = {}
        for key, (typ, default) in spec.items():
            if key in table:
                val = table[key]
                if typ is float and isinstance(val, int) and not isinstance(val, bool):
                    val = float(val)
                if not isinstance(val, typ) or (typ is int and isinstance(val, bool)):
                    raise ConfigError(
                        f"{path}: {section}.{key} must be {typ.__name__}"
                    )
                values[key] = val
            elif default is None:
                if (section, key) in _OPTIONAL_KEYS:
                    values[key] = None
                else:
                    raise ConfigError(f"{path}: missing required key {section}.{key}")
            else:
                values[key] = default
        out[section] = values
    return out


def build_problem(cfg: dict) -> tuple[Architecture, Hamiltonian]:
    lat = cfg["lattice"]
    ans = cfg["ansatz"]
    lattice = LatticeSpec(lat["Lx"], lat["Ly"], lat["J2"])
    H = heisenberg_j1j2(lattice)
    N = lattice.num_sites
    kind = ans["kind"]
    if kind == "qpeps":
        arch = assemble_qpeps(lat["Lx"], lat["Ly"], ans["d"])
    elif kind in ("general", "u1", "su2"):
        ordering = zigzag_ordering(lat["Lx"], lat["Ly"]) if lat["Ly"] > 1 else None
        arch = assemble_qmps(N, ans["V"], kind, ans["d"], ordering=ordering)
    else:
        raise ConfigError(f"unknown ansatz kind {kind!r}")
    return arch, H


def _config_hash(path: str) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _write_metadata(out: Path, command: str, cfg_path: str, seed: int, extra=None):
    doc = {
        "format_version": OUTPUT_FORMAT_VERSION,
        "package_version": __version__,
        "command": command,
        "config_hash": _config_hash(cfg_path),
        "seed": seed,
    }
    if extra:
        doc.update(extra)
    (out / "metadata.json").write_text(json.dumps(doc, indent=2) + "\n")


def _write_params(out: Path, arch: Architecture, params, adam: AdamState | None):
    doc = {
        "format_version": OUTPUT_FORMAT_VERSION,
        "architecture": arch.name,
        "param_count": arch.param_count,
        "params": [float(x) for x in params],
    }
    if adam is not None:
        doc["adam"] = {
            "m": [float(x) for x in adam.m],
            "v": [float(x) for x in adam.v],
            "t": adam.t,
            "lr": adam.lr,
        }
    (out / "params.json").write_text(json.dumps(doc, indent=2) + "\n")


def load_params(path: str, arch: Architecture) -> np.ndarray:
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    params = np.asarray(doc.get("params", []), dtype=np.float64)
    if params.shape != (arch.param_count,):
        raise ConfigError(
            f"{path}: {params.shape[0]} parameters, architecture needs {arch.param_count}"
        )
    return params


def _run(func):
    """Map domain errors onto the documented exit codes."""
    try:
        func()
    except (ConfigError, ContractError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(2)
    except CapacityError as exc:
        click.echo(f"capacity error: {exc}", err=True)
        sys.exit(3)


@click.group()
@click.version_option(__version__)
def main():
    """Qubit-efficient VQE: train, measure, and study circuits."""


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path())
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--seed", type=int, default=None, help="Override train.seed.")
@click.option("--mode", type=click.Choice(["exact", "sampled"]), default=None)
@click.option("--workers", type=int, default=1)
@click.option("--params", "params_path", type=click.Path(), default=None,
              help="Resume from a dumped parameter snapshot.")
@click.option("--dump-circuit", is_flag=True)
@click.option("--dump-hamiltonian", is_flag=True)
def train(config_path, out_dir, seed, mode, workers, params_path, dump_circuit, dump_hamiltonian):
    """Run the Adam training loop; writes trace, summary, params, metadata."""

    def go():
        cfg = load_config(config_path, ("lattice", "ansatz", "train"))
        arch, H = build_problem(cfg)
        tr = cfg["train"]
        if seed is not None:
            tr["seed"] = seed
        if mode is not None:
            tr["mode"] = mode
        ground = None
        if tr["record_fidelity"]:
            if wide_num_wires(arch) > WIDE_CAP:
                tr["record_fidelity"] = False
            else:
                ground = exact_ground_state(H, sector=tr.get("fidelity_sector"))
        initial = load_params(params_path, arch) if params_path else None
        # validate everything (including the TrainConfig contract) before
        # touching the output directory
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        config = TrainConfig(
            arch=arch,
            hamiltonian=H,
            mode=tr["mode"],
            gradient_engine=tr["gradient_engine"],
            steps=tr["steps"],
            batch=tr["batch"],
            lr=tr["lr"],
            seed=tr["seed"],
            record_fidelity=tr["record_fidelity"],
            fidelity_every=tr["fidelity_every"],
            ground=ground,
            workers=workers,
            trace_path=str(out / "trace.jsonl"),
            initial_params=initial,
        )
        trace = train_loop(config)
        with open(out / "summary.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            # wall_time lives in trace.jsonl only, so this file is
            # byte-identical across reruns of the same config
            w.writerow(["step", "energy", "stderr", "grad_norm", "fidelity"])
            for r in trace.records:
                w.writerow([
                    r["step"], repr(r["energy"]), repr(r["stderr"]),
                    repr(r["grad_norm"]),
                    "" if r["fidelity"] is None else repr(r["fidelity"]),
                ])
        _write_params(out, arch, trace.final_params, trace.final_adam)
        _write_metadata(out, "train", config_path, tr["seed"], {
            "mode": tr["mode"],
            "steps": tr["steps"],
            "final_energy": trace.records[-1]["energy"],
            "energy_per_site": trace.records[-1]["energy"] / arch.num_sites,
            "device_time_estimate_s": runtime_estimate(
                tr["steps"], max(arch.param_count, 1), tr["batch"], 3, 25e-9
            ),
        })
        if dump_circuit:
            (out / "circuit.json").write_text(architecture_to_json(arch) + "\n")
        if dump_hamiltonian:
            (out / "hamiltonian.json").write_text(hamiltonian_to_json(H) + "\n")
        click.echo(f"final energy/site {trace.records[-1]['energy'] / arch.num_sites:.6f}")

    _run(go)


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path())
@click.option("--params", "params_path", required=True, type=click.Path())
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--axis", type=click.Choice(["x", "y", "z"]), default="z")
def correlations(config_path, params_path, out_path, axis):
    """All-pairs <sigma_i sigma_j> correlation matrix as CSV."""

    def go():
        cfg = load_config(config_path, ("lattice", "ansatz"))
        arch, _ = build_problem(cfg)
        params = load_params(params_path, arch)
        corr = correlation_matrix(arch, params, axis)
        n = arch.num_sites
        with open(out_path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["site"] + [str(j) for j in range(n)])
            for i in range(n):
                w.writerow([i] + [repr(float(corr[i, j])) for j in range(n)])
        click.echo(f"wrote {n}x{n} {axis}-correlation matrix to {out_path}")

    _run(go)


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path())
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--workers", type=int, default=1)
def gradvar(config_path, out_path, workers):
    """Gradient-spread study along an N or V sweep; CSV output."""

    def go():
        cfg = load_config(config_path, ("study",))
        st = cfg["study"]
        if st["draws"] < 2:
            raise ConfigError("study.draws must be >= 2 (variance undefined)")
        values = st["values"]
        if not values or not all(isinstance(v, int) for v in values):
            raise ConfigError("study.values must be a non-empty list of integers")
        stats = gradient_variance_study(
            st["kind"], st["sweep"], values, N=st["N"], V=st["V"], d=st["d"],
            draws=st["draws"], shots_per_basis=st["shots_per_basis"],
            reps=st["reps"], seed=st["seed"], workers=workers,
            pooled=st["pooled"], component=st["component"],
        )
        with open(out_path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow([
                "kind", "N", "V", "d", "component",
                "sigma_g", "sigma_g_sq", "sigma_s", "r_gs", "draws", "shots_per_basis",
            ])
            for s in stats:
                w.writerow([
                    s.kind, s.num_sites, s.virtual, s.depth, s.component,
                    repr(s.sigma_g), repr(s.sigma_g**2), repr(s.sigma_s),
                    repr(s.r_gs), s.draws, s.shots_per_basis,
                ])
        click.echo(f"wrote {len(stats)} rows to {out_path}")

    _run(go)


@main.command("cluster-demo")
@click.option("-n", "--sites", type=int, default=5, show_default=True)
@click.option("--site", type=int, default=2, show_default=True,
              help="0-based SLOCC site (needs both neighbors).")
@click.option("--theta", type=float, default=0.0, show_default=True)
@click.option("--gamma", type=float, default=np.pi / 2, show_default="pi/2")
@click.option("--shots", type=int, default=100000, show_default=True)
@click.option("--seed", type=int, default=0)
@click.option("--out", "out_path", type=click.Path(), default=None)
def cluster_demo(sites, site, theta, gamma, shots, seed, out_path):
    """Cluster-state demo: SLOCC correlation and wide-vs-efficient sampling."""

    def go():
        if sites < 3:
            raise ContractError("demo needs at least 3 sites")
        spec = SloccSpec(site, theta, gamma)
        exact, kept_exact = slocc_correlation(sites, spec)
        sampled, kept = slocc_correlation(sites, spec, shots=shots, seed=seed)
        n_kept = max(int(round(kept * shots)), 1)
        stderr = float(np.sqrt(max(1.0 - sampled**2, 0.0) / n_kept))
        analytic = slocc_analytic(spec)

        wide = cluster_architecture(sites, efficient=False)
        eff = cluster_architecture(sites, efficient=True)
        zero = np.zeros(0)
        bw = run_schedule_batch(wide, zero, "z", seed, shots)
        be = run_schedule_batch(eff, zero, "z", seed + 1, shots)
        scale = 1 << np.arange(sites)
        hw = np.bincount(bw @ scale, minlength=1 << sites) / shots
        he = np.bincount(be @ scale, minlength=1 << sites) / shots
        tv = 0.5 * float(np.abs(hw - he).sum())

        rows = [
            ("exact_slocc", exact),
            ("sampled_slocc", sampled),
            ("sampled_stderr", stderr),
            ("analytic", analytic),
            ("kept_fraction", kept),
            ("wide_vs_efficient_tv", tv),
        ]
        width = max(len(k) for k, _ in rows)
        for k, v in rows:
            click.echo(f"{k:<{width}}  {v:+.6f}")
        if out_path:
            with open(out_path, "w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(["format_version", OUTPUT_FORMAT_VERSION])
                w.writerow(["quantity", "value"])
                for k, v in rows:
                    w.writerow([k, repr(v)])

    _run(go)


if __name__ == "__main__":
    main()
