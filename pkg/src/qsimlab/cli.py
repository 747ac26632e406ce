"""Batch front end: JSON config in, CSV (or JSON) data plus a run manifest out.

Config layout::

    {"method": "lanczos",
     "params": {"n_sites": 14, "g": 1.0},
     "sweep": {"parameter": "g", "values": [0.1, 0.2]},
     "seed": 7,
     "name": "fig1"}

Only ``method`` is required. Unknown keys anywhere are rejected.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import sys
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

from . import __version__

EXIT_OK, EXIT_RUNTIME, EXIT_CONFIG = 0, 1, 2
MASK64 = (1 << 64) - 1
TOP_LEVEL_KEYS = {"method", "params", "sweep", "seed", "name"}


class ConfigError(ValueError):
    def __init__(self, key: str, message: str):
        super().__init__(message)
        self.key = key


# --- parameter schemas -----------------------------------------------------

def _int(lo=None, hi=None):
    def check(key, v):
        if isinstance(v, bool) or not isinstance(v, int):
            raise ConfigError(key, f"{key} must be an integer")
        if lo is not None and v < lo:
            raise ConfigError(key, f"{key} must be >= {lo}")
        if hi is not None and v > hi:
            raise ConfigError(key, f"{key} must be <= {hi}")
        return v
    return check


def _real(lo=None, hi=None, strict=False):
    def check(key, v):
        if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
            raise ConfigError(key, f"{key} must be a finite number")
        v = float(v)
        if lo is not None and (v <= lo if strict else v < lo):
            raise ConfigError(key, f"{key} must be {'>' if strict else '>='} {lo}")
        if hi is not None and v > hi:
            raise ConfigError(key, f"{key} must be <= {hi}")
        return v
    return check


def _choice(*options):
    def check(key, v):
        if v not in options:
            raise ConfigError(key, f"{key} must be one of {', '.join(map(str, options))}")
        return v
    return check


def _string(key, v):
    if not isinstance(v, str):
        raise ConfigError(key, f"{key} must be a string")
    return v


SCHEMAS = {
    "ed": {"n_sites": (_int(2, 12), 8), "g": (_real(), 1.0), "boundary": (_choice("open", "periodic"), "open")},
    "lanczos": {
        "n_sites": (_int(2, 24), 14), "g": (_real(), 1.0),
        "boundary": (_choice("open", "periodic"), "open"),
        "tolerance": (_real(0.0, strict=True), 1e-12), "max_iterations": (_int(2), 500),
    },
    "qmc": {
        "model": (_choice("tfim", "classical"), "tfim"),
        "n_x": (_int(2), 16), "n_y": (_int(2), 64), "g": (_real(0.0, strict=True), 1.0),
        "beta": (_real(0.0), 8.0), "sweeps": (_int(1), 20000), "thermalization": (_int(0), None),
        "boundary_x": (_choice("open", "periodic"), "open"),
    },
    "dmrg": {
        "n_sites": (_int(4), 16), "g": (_real(), 1.0), "d_max": (_int(2), 16),
        "sweep_count": (_int(0), 3), "energy_tolerance": (_real(0.0), 1e-10),
        "entropy_unit": (_choice("nats", "bits"), "nats"),
    },
    "circuit": {"initial": (_string, None), "circuit_file": (_string, None)},
    "coldatoms": {
        "calculation": (_choice("helium", "bose_hubbard", "mott_lobes", "band"), "helium"),
        "n_star": (_int(1), 1), "zJ_over_U": (_real(0.0), 0.0), "mu_over_U": (_real(), 0.0),
        "v0_over_er": (_real(0.0, strict=True), 10.0), "recoil_er": (_real(), 1.0),
        "k_l": (_real(), 1.0), "a_s": (_real(), 0.0),
    },
}


@dataclass
class ExperimentConfig:
    method: str
    params: dict
    sweep: tuple[str, list] | None = None
    seed: int = 0
    name: str | None = None

    @property
    def stem(self) -> str:
        return self.name or self.method

    def canonical(self) -> dict:
        doc = {"method": self.method, "params": self.params, "seed": self.seed}
        if self.sweep:
            doc["sweep"] = {"parameter": self.sweep[0], "values": self.sweep[1]}
        if self.name:
            doc["name"] = self.name
        return doc

    def digest(self) -> str:
        raw = json.dumps(self.canonical(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(raw.encode("utf-8")).hexdigest()


def parse_config(doc, seed_override: int | None = None) -> ExperimentConfig:
    if not isinstance(doc, dict):
        raise ConfigError("<root>", "config must be a JSON object")
    for key in doc:
        if key not in TOP_LEVEL_KEYS:
            raise ConfigError(key, f"unknown key {key!r}")
    if "method" not in doc:
        raise ConfigError("method", "method is required")
    method = doc["method"]
    if method not in SCHEMAS:
        raise ConfigError("method", f"method must be one of {', '.join(SCHEMAS)}")
    schema = SCHEMAS[method]
    raw = doc.get("params", {})
    if not isinstance(raw, dict):
        raise ConfigError("params", "params must be an object")
    params = {}
    for key, value in raw.items():
        if key not in schema:
            raise ConfigError(f"params.{key}", f"unknown parameter {key!r} for method {method}")
        params[key] = schema[key][0](f"params.{key}", value)
    for key, (_, default) in schema.items():
        params.setdefault(key, default)

    sweep = None
    if "sweep" in doc:
        s = doc["sweep"]
        if not isinstance(s, dict) or set(s) != {"parameter", "values"}:
            raise ConfigError("sweep", "sweep must be an object with exactly 'parameter' and 'values'")
        name, values = s["parameter"], s["values"]
        if name not in schema:
            raise ConfigError("sweep.parameter", f"cannot sweep unknown parameter {name!r}")
        if not isinstance(values, list) or not values:
            raise ConfigError("sweep.values", "sweep values must be a non-empty list")
        values = [schema[name][0](f"sweep.values[{i}]", v) for i, v in enumerate(values)]
        sweep = (name, values)

    seed = doc.get("seed", 0) if seed_override is None else seed_override
    if isinstance(seed, bool) or not isinstance(seed, int) or not 0 <= seed <= MASK64:
        raise ConfigError("seed", "seed must be an unsigned 64-bit integer")
    name = doc.get("name")
    if name is not None:
        _string("name", name)
        if not name or "/" in name or name.startswith("."):
            raise ConfigError("name", "name must be a plain file stem")
    return ExperimentConfig(method, params, sweep, seed, name)


def point_seed(seed: int, index: int) -> int:
    """``seed XOR splitmix64(index)``."""
    z = (index + 0x9E3779B97F4A7C15) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return seed ^ (z ^ (z >> 31))


# --- runners ---------------------------------------------------------------

def _run_ed(p, seed, ctx):
    from .eigensolve import dense_eigh
    from .spin import StateVector, TfimHamiltonian, dense_tfim, spontaneous_magnetization
    h = TfimHamiltonian(p["n_sites"], p["g"], p["boundary"])
    evals, evecs = dense_eigh(dense_tfim(h))
    m = spontaneous_magnetization(StateVector(evecs[:, 0]))
    return [{"g": p["g"], "energy": float(evals[0]), "gap": float(evals[1] - evals[0]), "magnetization": m}]


def _run_lanczos(p, seed, ctx):
    from .eigensolve import SolverConfig, tfim_ground_state
    from .spin import TfimHamiltonian, spontaneous_magnetization
    h = TfimHamiltonian(p["n_sites"], p["g"], p["boundary"])
    cfg = SolverConfig(tolerance=p["tolerance"], max_iterations=p["max_iterations"], seed=seed)
    res, _ = tfim_ground_state(h, cfg)
    return [{"g": p["g"], "energy": res.energy, "magnetization": spontaneous_magnetization(res.state()),
             "iterations": res.iterations}]


def _run_qmc(p, seed, ctx):
    from .qmc import ClassicalLattice2D, metropolis_run, tfim_qmc_magnetization
    if p["model"] == "tfim":
        st = tfim_qmc_magnetization(p["n_x"], p["g"], p["beta"], p["n_y"], p["sweeps"], seed,
                                    p["thermalization"], p["boundary_x"])
        lead = {"g": p["g"]}
    else:
        lattice = ClassicalLattice2D(p["n_x"], p["n_y"], boundary_x=p["boundary_x"])
        st = metropolis_run(lattice, p["beta"], p["sweeps"], p["thermalization"], seed)
        lead = {"beta": p["beta"]}
    return [{**lead, "abs_m": st.mean_abs_magnetization, "abs_m_err": st.stderr["abs_m"],
             "energy": st.mean_energy_per_site, "energy_err": st.stderr["energy"],
             "binder": st.binder_cumulant, "acceptance": st.acceptance_rate, "seed": seed}]


def _run_dmrg(p, seed, ctx):
    from .dmrg import DmrgConfig, finite_dmrg
    if p["n_sites"] % 2:
        raise ConfigError("params.n_sites", "params.n_sites must be even for DMRG")
    cfg = DmrgConfig(p["d_max"], p["n_sites"], p["g"], p["energy_tolerance"], p["sweep_count"], seed)
    r = finite_dmrg(cfg)
    entropy = r.entanglement_entropy_mid / (math.log(2.0) if p["entropy_unit"] == "bits" else 1.0)
    return [{"g": p["g"], "energy": r.energy, "energy_per_bond": r.energy_per_bond,
             "truncation_error": r.final_truncation.discarded_weight,
             "entropy_mid": entropy, "sweeps": len(r.sweep_energies) - 1}]


def _run_circuit(p, seed, ctx):
    from .circuit import QubitRegister, loads, run_circuit
    path = ctx.get("circuit") or p["circuit_file"]
    if not path:
        raise ConfigError("circuit_file", "circuit method needs --circuit or params.circuit_file")
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError("circuit_file", f"cannot read circuit: {exc}") from None
    try:
        circ = loads(text)
    except (ValueError, IndexError) as exc:
        raise ConfigError("circuit_file", str(exc)) from None
    label = p["initial"] or "0" * circ.n_qubits
    if len(label) != circ.n_qubits or set(label) - {"0", "1"}:
        raise ConfigError("params.initial", f"initial must be a {circ.n_qubits}-character 0/1 label")
    out = run_circuit(QubitRegister.from_label(label), circ)
    rows = []
    for k, amp in enumerate(out.state):
        bits = "".join(str((k >> q) & 1) for q in range(circ.n_qubits))
        rows.append({"index": k, "label": bits, "re": float(amp.real), "im": float(amp.imag),
                     "probability": float(abs(amp) ** 2)})
    return rows


def _run_coldatoms(p, seed, ctx):
    from . import coldatoms as ca
    calc = p["calculation"]
    if calc == "helium":
        z, e = ca.helium_minimize()
        return [{"z_star": z, "e_min": e}]
    if calc == "bose_hubbard":
        eps = ca.bh_optimal_epsilon(p["n_star"], p["zJ_over_U"])
        m = ca.BoseHubbardMF(p["n_star"], p["zJ_over_U"], eps, p["mu_over_U"])
        return [{"zJ_over_U": p["zJ_over_U"], "critical_U_over_zJ": ca.bh_critical_point(p["n_star"]),
                 "epsilon": eps, "energy": ca.bh_energy_per_site(m)}]
    if calc == "mott_lobes":
        lo, hi = ca.mott_lobes(p["n_star"], p["zJ_over_U"])
        return [{"zJ_over_U": p["zJ_over_U"], "mu_lower": lo, "mu_upper": hi, "closed": int(lo >= hi)}]
    bp = ca.band_parameters(ca.LatticeParams(p["v0_over_er"], p["recoil_er"], p["k_l"], p["a_s"]))
    return [{"v0_over_er": p["v0_over_er"], "w": bp.w, "j_hop": bp.j_hop, "a_osc": bp.a_osc,
             "u_onsite": bp.u_onsite, "deep_lattice": int(bp.deep_lattice)}]


RUNNERS = {"ed": _run_ed, "lanczos": _run_lanczos, "qmc": _run_qmc, "dmrg": _run_dmrg,
           "circuit": _run_circuit, "coldatoms": _run_coldatoms}


def run_experiment(cfg: ExperimentConfig, ctx: dict | None = None) -> list[dict]:
    ctx = ctx or {}
    runner = RUNNERS[cfg.method]
    if cfg.sweep is None:
        return runner(cfg.params, cfg.seed, ctx)
    name, values = cfg.sweep
    points = []
    for i, v in enumerate(values):
        rows = runner({**cfg.params, name: v}, point_seed(cfg.seed, i), ctx)
        points.append((v, i, rows))
    points.sort(key=lambda t: (t[0], t[1]))
    return [row for _, _, rows in points for row in rows]


# --- output ----------------------------------------------------------------

def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return str(v)


def to_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    header = list(rows[0])
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(row[k]) for k in header])
    return buf.getvalue()


def _emit_error(key: str, message: str, kind: str = "config"):
    sys.stderr.write(json.dumps({"error": kind, "key": key, "message": message}) + "\n")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="qsimlab", description="Run a quantum-simulation experiment from a JSON config.")
    ap.add_argument("--config", required=True, help="path to the JSON experiment config")
    ap.add_argument("--seed", type=int, default=None, help="unsigned 64-bit seed (overrides the config)")
    ap.add_argument("--out", default=".", help="output directory")
    ap.add_argument("--format", choices=("csv", "json"), default="csv")
    ap.add_argument("--circuit", default=None, help="circuit text file for the circuit method")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    started = datetime.now(timezone.utc).isoformat()
    try:
        text = Path(args.config).read_text(encoding="utf-8")
    except OSError as exc:
        _emit_error("--config", str(exc))
        return EXIT_CONFIG
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        _emit_error("<json>", f"malformed JSON at line {exc.lineno} column {exc.colno}: {exc.msg}")
        return EXIT_CONFIG
    try:
        cfg = parse_config(doc, args.seed)
        rows = run_experiment(cfg, {"circuit": args.circuit})
    except ConfigError as exc:
        _emit_error(exc.key, str(exc))
        return EXIT_CONFIG
    except (ValueError, RuntimeError, ArithmeticError) as exc:
        _emit_error(cfg.method, str(exc), kind="runtime")
        return EXIT_RUNTIME

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    data_path = out / f"{cfg.stem}.{args.format}"
    if args.format == "csv":
        data_path.write_text(to_csv(rows), encoding="utf-8", newline="")
    else:
        data_path.write_text(json.dumps(rows, indent=1) + "\n", encoding="utf-8")
    manifest = {
        "command": " ".join(["qsimlab", *(argv if argv is not None else sys.argv[1:])]),
        "method": cfg.method,
        "config_digest": cfg.digest(),
        "seed": cfg.seed,
        "started": started,
        "finished": datetime.now(timezone.utc).isoformat(),
        "outputs": [data_path.name],
        "toolkit_version": __version__,
    }
    (out / f"{cfg.stem}.manifest.json").write_text(json.dumps(manifest, indent=1) + "\n", encoding="utf-8")
    return EXIT_OK


if __name__ == "__main__":
    raise SystemExit(main())
