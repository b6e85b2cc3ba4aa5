"""Command-line interface.

Configuration files are JSON objects with the keys ``sites``, ``bonds``, ``fields``,
``h_parallel`` and ``options`` (plus an optional free-form ``meta``).  The field on
site ``i`` is ``fields[i] + h_parallel_i * n_i``.  Exit status: 0 success, 1 invalid
input, 2 numerical-consistency failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import sys
import warnings
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

from . import __version__
from .design import design_system
from .entanglement import SweepMode, sweep
from .exceptions import (
    LevelCrossing,
    NotFactorized,
    NumericalConsistencyError,
    SchemaError,
    SpinFactoryError,
    ValidationError,
)
from .geometry import Angles, random_directions, triad_from_angles
from .infer import BranchPolicy, enumerate_chain
from .quantum import Bond, SiteSpec, SystemSpec, build_hamiltonian, product_state, spectrum, theta_energy, verify_eigenstate
from .recipes import SpiralSpec, complexity_rating, spiral_system

__all__ = ["RunConfig", "parse_config", "main", "run"]

TOP_KEYS = {"sites", "bonds", "fields", "h_parallel", "options", "meta"}
SITE_KEYS = {"spin", "theta", "phi"}
OPTION_KEYS = {"j_norm", "tolerance", "seed"}
DEFAULT_SEED = 42
DEFAULT_TOL = 1e-10
SWEEP_COLUMNS = ["param", "i", "j", "concurrence", "gs_energy", "gap"]


@dataclass
class RunConfig:
    """Validated contents of a configuration file."""

    spins: list[float]
    angles: list[Angles | None]
    bonds: list[tuple[int, int, np.ndarray | None]]
    fields: np.ndarray
    h_parallel: np.ndarray
    j_norm: float = 1.0
    tolerance: float = DEFAULT_TOL
    seed: int = DEFAULT_SEED
    sha256: str = ""
    meta: dict = field(default_factory=dict)

    @property
    def n_sites(self) -> int:
        return len(self.spins)

    def resolved_angles(self) -> list[Angles]:
        """Site angles, with missing ones drawn from the seeded generator."""
        if all(a is not None for a in self.angles):
            return list(self.angles)
        drawn = random_directions(self.n_sites, np.random.default_rng(self.seed))
        return [a if a is not None else d for a, d in zip(self.angles, drawn)]

    def system(self, angles: Sequence[Angles] | None = None, h_parallel=None) -> SystemSpec:
        """System with every bond coupling set and total fields ``fields + h_par n``."""
        missing = [(i, j) for i, j, m in self.bonds if m is None]
        if missing:
            raise SchemaError(f"bond {missing[0]} has no coupling", field="bonds")
        angles = self.resolved_angles() if angles is None else angles
        h = self.h_parallel if h_parallel is None else np.broadcast_to(np.asarray(h_parallel, float), (self.n_sites,))
        n = np.array([a.direction() for a in angles])
        return SystemSpec(
            [SiteSpec(s) for s in self.spins],
            [Bond(i, j, m) for i, j, m in self.bonds],
            self.fields + h[:, None] * n,
        )


def _line_of(text: str, needle: str, occurrence: int = 0) -> int | None:
    pos = -1
    for _ in range(occurrence + 1):
        pos = text.find(needle, pos + 1)
        if pos < 0:
            return None
    return text.count("\n", 0, pos) + 1


def _number(value, where: str, line=None) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise SchemaError(f"expected a number, got {value!r}", field=where, line=line)
    if not np.isfinite(value):
        raise SchemaError("value must be finite", field=where, line=line)
    return float(value)


def _vector(value, where: str, line=None) -> np.ndarray:
    if not isinstance(value, list) or len(value) != 3:
        raise SchemaError("expected a list of 3 numbers", field=where, line=line)
    return np.array([_number(v, f"{where}[{k}]", line) for k, v in enumerate(value)])


def parse_config(text: str) -> RunConfig:
    """Parse and validate configuration text."""
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"malformed JSON: {exc.msg}", line=exc.lineno) from None
    if not isinstance(data, dict):
        raise SchemaError("top level must be an object", line=1)
    unknown = set(data) - TOP_KEYS
    if unknown:
        key = sorted(unknown)[0]
        raise SchemaError(f"unknown key (allowed: {', '.join(sorted(TOP_KEYS))})", field=key, line=_line_of(text, f'"{key}"'))
    if "sites" not in data:
        raise SchemaError("missing required key", field="sites")
    sites = data["sites"]
    if not isinstance(sites, list) or not sites:
        raise SchemaError("expected a non-empty list", field="sites", line=_line_of(text, '"sites"'))

    spins, angles = [], []
    for k, s in enumerate(sites):
        where = f"sites[{k}]"
        line = _line_of(text, '"spin"', k)
        if not isinstance(s, dict):
            raise SchemaError("expected an object", field=where, line=line)
        extra = set(s) - SITE_KEYS
        if extra:
            raise SchemaError(f"unknown key {sorted(extra)[0]!r}", field=where, line=line)
        if "spin" not in s:
            raise SchemaError("missing spin", field=where, line=line)
        spin = _number(s["spin"], f"{where}.spin", line)
        two_s = 2.0 * spin
        if spin <= 0 or abs(two_s - round(two_s)) > 1e-12:
            raise SchemaError(f"spin must be a positive multiple of 1/2, got {spin}", field=f"{where}.spin", line=line)
        spins.append(round(two_s) / 2.0)
        has_t, has_p = "theta" in s, "phi" in s
        if has_t != has_p:
            raise SchemaError("theta and phi must be given together", field=where, line=line)
        angles.append(Angles(_number(s["theta"], f"{where}.theta", line), _number(s["phi"], f"{where}.phi", line)) if has_t else None)
    n = len(spins)

    bonds = []
    raw_bonds = data.get("bonds", [])
    if not isinstance(raw_bonds, list):
        raise SchemaError("expected a list", field="bonds", line=_line_of(text, '"bonds"'))
    seen = set()
    for k, b in enumerate(raw_bonds):
        where = f"bonds[{k}]"
        line = _line_of(text, '"i"', k)
        if not isinstance(b, dict) or "i" not in b or "j" not in b:
            raise SchemaError("bond needs integer keys i and j", field=where, line=line)
        extra = set(b) - {"i", "j", "coupling", "matrix"}
        if extra:
            raise SchemaError(f"unknown key {sorted(extra)[0]!r}", field=where, line=line)
        i, j = b["i"], b["j"]
        if not all(isinstance(x, int) and not isinstance(x, bool) for x in (i, j)):
            raise SchemaError("i and j must be integers", field=where, line=line)
        if not (0 <= i < n and 0 <= j < n) or i == j:
            raise SchemaError(f"bond ({i},{j}) invalid for {n} sites", field=where, line=line)
        key = frozenset((i, j))
        if key in seen:
            raise SchemaError(f"duplicate bond ({i},{j})", field=where, line=line)
        seen.add(key)
        if "coupling" in b and "matrix" in b:
            raise SchemaError("give either coupling or matrix, not both", field=where, line=line)
        if "coupling" in b:
            m = np.diag(_vector(b["coupling"], f"{where}.coupling", line))
        elif "matrix" in b:
            rows = b["matrix"]
            if not isinstance(rows, list) or len(rows) != 3:
                raise SchemaError("matrix must be 3x3", field=f"{where}.matrix", line=line)
            m = np.array([_vector(r, f"{where}.matrix[{q}]", line) for q, r in enumerate(rows)])
        else:
            m = None
        bonds.append((i, j, m))

    fields = np.zeros((n, 3))
    if data.get("fields") is not None:
        raw = data["fields"]
        line = _line_of(text, '"fields"')
        if not isinstance(raw, list) or len(raw) != n:
            raise SchemaError(f"expected {n} field vectors", field="fields", line=line)
        fields = np.array([_vector(v, f"fields[{k}]", line) for k, v in enumerate(raw)])

    hp = data.get("h_parallel", 0.0)
    line = _line_of(text, '"h_parallel"')
    if isinstance(hp, list):
        if len(hp) != n:
            raise SchemaError(f"expected {n} values", field="h_parallel", line=line)
        h_parallel = np.array([_number(v, f"h_parallel[{k}]", line) for k, v in enumerate(hp)])
    else:
        h_parallel = np.full(n, _number(hp, "h_parallel", line))

    opts = data.get("options", {}) or {}
    line = _line_of(text, '"options"')
    if not isinstance(opts, dict):
        raise SchemaError("expected an object", field="options", line=line)
    extra = set(opts) - OPTION_KEYS
    if extra:
        raise SchemaError(f"unknown option {sorted(extra)[0]!r}", field="options", line=line)
    j_norm = _number(opts.get("j_norm", 1.0), "options.j_norm", line)
    tol = _number(opts.get("tolerance", DEFAULT_TOL), "options.tolerance", line)
    if tol <= 0:
        raise SchemaError("tolerance must be positive", field="options.tolerance", line=line)
    seed = opts.get("seed", DEFAULT_SEED)
    if isinstance(seed, bool) or not isinstance(seed, int) or not 0 <= seed < 2**64:
        raise SchemaError("seed must be a 64-bit unsigned integer", field="options.seed", line=line)
    meta = data.get("meta", {})
    return RunConfig(
        spins, angles, bonds, fields, h_parallel, j_norm, tol, seed,
        hashlib.sha256(text.encode()).hexdigest(), meta if isinstance(meta, dict) else {"value": meta},
    )


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    return format(float(x), ".17g")


def _write_csv(path: str | None, config_hash: str, header: list[str], rows) -> None:
    buf = io.StringIO()
    buf.write(f"# spinfactory {__version__} config_sha256={config_hash}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([v if isinstance(v, str) else _fmt(v) for v in r])
    _emit(path, buf.getvalue())


def _emit(path: str | None, text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


def _read(path: str) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ValidationError(f"cannot read {path}: {exc.strerror}") from None
    return parse_config(text)


def _parse_range(spec: str, name: str) -> np.ndarray:
    parts = spec.split(":")
    try:
        if len(parts) != 3:
            raise ValueError
        lo, hi, steps = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError:
        raise ValidationError(f"{name} must be <lo>:<hi>:<steps>, got {spec!r}") from None
    if steps < 1:
        raise ValidationError(f"{name} needs at least one step")
    return np.array([lo]) if steps == 1 else np.linspace(lo, hi, steps)


def _parse_pairs(spec: str):
    if spec == "all":
        return None
    pairs = []
    for chunk in spec.split(";"):
        chunk = chunk.strip()
        if not chunk:
            continue
        try:
            i, j = (int(x) for x in chunk.split(","))
        except ValueError:
            raise ValidationError(f"pairs must be 'all' or 'i,j;i,j;...', got {spec!r}") from None
        pairs.append((i, j))
    if not pairs:
        raise ValidationError("no pairs given")
    return pairs


def _config_json(system: SystemSpec, angles, h_perp, h_par, options: dict, source_hash: str) -> str:
    out: dict[str, Any] = {
        "sites": [{"spin": s.spin, "theta": a.theta, "phi": a.phi} for s, a in zip(system.sites, angles)],
        "bonds": [],
        "fields": [[float(x) for x in v] for v in h_perp],
        "h_parallel": [float(x) for x in h_par],
        "options": options,
        "meta": {"tool": f"spinfactory {__version__}", "source_sha256": source_hash},
    }
    for b in system.bonds:
        m = b.matrix
        if np.array_equal(m, np.diag(np.diag(m))):
            out["bonds"].append({"i": b.i, "j": b.j, "coupling": [float(x) for x in np.diag(m)]})
        else:
            out["bonds"].append({"i": b.i, "j": b.j, "matrix": [[float(x) for x in r] for r in m]})
    return json.dumps(out, indent=2) + "\n"


# --- commands -------------------------------------------------------------------------


def cmd_design(args) -> int:
    cfg = _read(args.state)
    angles = cfg.resolved_angles()
    j_norm = cfg.j_norm if args.j_norm is None else args.j_norm
    h_par = cfg.h_parallel if args.h_par is None else args.h_par
    overrides = {(i, j): np.diag(m) for i, j, m in cfg.bonds if m is not None}
    for (i, j), m in list(overrides.items()):
        full = next(mm for ii, jj, mm in cfg.bonds if (ii, jj) == (i, j))
        if not np.array_equal(full, np.diag(m)):
            raise ValidationError(f"bond ({i},{j}): designed couplings are diagonal; a full matrix cannot be imposed")
    rep = design_system(angles, [(i, j) for i, j, _ in cfg.bonds], [s for s in cfg.spins], j_norm, h_par, overrides=overrides)
    if rep.residual > cfg.tolerance:
        raise NotFactorized(f"designed couplings violate the pair conditions (residual {rep.residual:.3e})")
    options = {"j_norm": j_norm, "tolerance": cfg.tolerance, "seed": cfg.seed}
    _emit(args.out, _config_json(rep.system, rep.angles, rep.fields.h_perp, rep.fields.h_par, options, cfg.sha256))
    print(f"designed {cfg.n_sites} sites, {len(cfg.bonds)} bonds; residual {rep.residual:.3e}; E_Theta {rep.energy:.12g}", file=sys.stderr)
    return 0


def _chain_couplings(cfg: RunConfig) -> list[np.ndarray]:
    n = cfg.n_sites
    by_pair = {}
    for i, j, m in cfg.bonds:
        if m is None:
            raise SchemaError(f"bond ({i},{j}) has no coupling", field="bonds")
        if abs(i - j) != 1:
            raise ValidationError(f"infer needs an open nearest-neighbour chain; bond ({i},{j}) is not")
        by_pair[min(i, j)] = m if i < j else m.T
    if sorted(by_pair) != list(range(n - 1)):
        raise ValidationError("infer needs bonds (k, k+1) for every k = 0..N-2")
    return [by_pair[k] for k in range(n - 1)]


def cmd_infer(args) -> int:
    cfg = _read(args.system)
    couplings = _chain_couplings(cfg)
    if not 0 <= args.seed_site < cfg.n_sites:
        raise ValidationError(f"seed site {args.seed_site} outside 0..{cfg.n_sites - 1}")
    seed_angles = cfg.angles[args.seed_site]
    if seed_angles is None:
        raise SchemaError("seed site needs theta and phi", field=f"sites[{args.seed_site}]")
    if args.branches in ("all", "first"):
        policy, word = BranchPolicy(args.branches), None
    else:
        policy, word = BranchPolicy.WORD, args.branches
    configs = enumerate_chain(couplings, seed_angles, policy, word=word, seed_site=args.seed_site, check_tol=cfg.tolerance)
    rows = []
    for c, conf in enumerate(configs):
        for k, (n, a) in enumerate(zip(conf.directions, conf.angles)):
            rows.append([c, conf.branch_word, k, a.theta, a.phi, n[0], n[1], n[2], int(k in conf.free_sites)])
    _write_csv(args.out, cfg.sha256, ["config", "branch", "site", "theta", "phi", "nx", "ny", "nz", "free"], rows)
    return 0


def _require_angles(cfg: RunConfig) -> list[Angles]:
    for k, a in enumerate(cfg.angles):
        if a is None:
            raise SchemaError("site needs theta and phi", field=f"sites[{k}]")
    return list(cfg.angles)


def cmd_verify(args) -> int:
    cfg = _read(args.system)
    angles = _require_angles(cfg)
    tol = cfg.tolerance if args.tol is None else args.tol
    system = cfg.system(angles)
    H = build_hamiltonian(system)
    psi = product_state(angles, system.sites)
    e = theta_energy(system, [a.direction() for a in angles])
    res = verify_eigenstate(H, psi, e)
    print(f"residual {_fmt(res)}")
    print(f"energy {_fmt(e)}")
    if not res < tol:
        raise NotFactorized(f"residual {res:.3e} exceeds tolerance {tol:.3e}")
    return 0


def cmd_spectrum(args) -> int:
    cfg = _read(args.system)
    angles = _require_angles(cfg)
    hs = _parse_range(args.h_par, "--h-par")
    n = [a.direction() for a in angles]
    theta = product_state(angles, [SiteSpec(s) for s in cfg.spins])
    rows = []
    for h in hs:
        system = cfg.system(angles, h_parallel=h)
        rep = spectrum(system, theta)
        rows.append([h, rep.ground_energy, rep.gap, rep.ground_degeneracy, rep.overlap, theta_energy(system, n)])
    _write_csv(args.out, cfg.sha256, ["h_par", "gs_energy", "gap", "degeneracy", "theta_overlap", "theta_energy"], rows)
    return 0


def cmd_sweep(args) -> int:
    cfg = _read(args.system)
    angles = _require_angles(cfg)
    values = _parse_range(args.range, "--range")
    system = cfg.system(angles)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", LevelCrossing)
        rows = sweep(system, angles, SweepMode(args.mode), values, _parse_pairs(args.pairs))
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    _write_csv(args.out, cfg.sha256, SWEEP_COLUMNS, [[r.param, r.i, r.j, r.concurrence, r.gs_energy, r.gap] for r in rows])
    return 0


def cmd_spiral(args) -> int:
    cyclic = not args.open
    if cyclic:
        spec = SpiralSpec.cyclic_k(args.n, args.k, theta=args.theta, J=args.j, h_par=args.h_par)
    else:
        spec = SpiralSpec(args.n, args.theta, 2 * np.pi * args.k / args.n, False, args.j, args.h_par)
    rep = spiral_system(spec)
    res = verify_eigenstate(build_hamiltonian(rep.system), product_state(rep.angles, rep.system.sites), rep.energy)
    key = json.dumps({"command": "spiral", "n": args.n, "k": args.k, "theta": args.theta, "j": args.j, "h_par": args.h_par, "open": args.open}, sort_keys=True)
    rows = []
    for k, (a, hp) in enumerate(zip(rep.angles, rep.fields.h_perp)):
        rows.append([k, a.theta, a.phi, hp[0], hp[1], hp[2]])
    _write_csv(args.out, hashlib.sha256(key.encode()).hexdigest(), ["site", "theta", "phi", "hperp_x", "hperp_y", "hperp_z"], rows)
    J = rep.couplings[0]
    print(f"coupling {_fmt(J[0])} {_fmt(J[1])} {_fmt(J[2])}; energy {_fmt(rep.energy)}; residual {res:.3e}", file=sys.stderr)
    if res > DEFAULT_TOL:
        raise NotFactorized(f"spiral residual {res:.3e}")
    return 0


def cmd_complexity(args) -> int:
    r = complexity_rating(args.scenario, args.n)
    print(f"{r.scenario.value} N={args.n} m={r.m} k={r.k}")
    return 0


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage problems are input errors (exit 1)
        self.print_usage(sys.stderr)
        raise ValidationError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="spinfactory", description="Design and verify separable eigenstates of spin arrays.")
    p.add_argument("--version", action="version", version=f"spinfactory {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("design", help="couplings and fields for prescribed directions")
    s.add_argument("--state", required=True)
    s.add_argument("--j-norm", type=float, default=None)
    s.add_argument("--h-par", type=float, default=None)
    s.add_argument("--out", default=None)
    s.set_defaults(func=cmd_design)

    s = sub.add_parser("infer", help="separable configurations of a chain with fixed couplings")
    s.add_argument("--system", required=True)
    s.add_argument("--seed-site", type=int, default=0)
    s.add_argument("--branches", default="all")
    s.add_argument("--out", default=None)
    s.set_defaults(func=cmd_infer)

    s = sub.add_parser("verify", help="eigenstate residual of the configured product state")
    s.add_argument("--system", required=True)
    s.add_argument("--tol", type=float, default=None)
    s.set_defaults(func=cmd_verify)

    s = sub.add_parser("spectrum", help="ground level versus uniform parallel field")
    s.add_argument("--system", required=True)
    s.add_argument("--h-par", required=True)
    s.add_argument("--out", default=None)
    s.set_defaults(func=cmd_spectrum)

    s = sub.add_parser("sweep", help="pair concurrences along a perturbation")
    s.add_argument("--system", required=True)
    s.add_argument("--mode", required=True, choices=[m.value for m in SweepMode])
    s.add_argument("--range", required=True)
    s.add_argument("--pairs", default="all")
    s.add_argument("--out", default=None)
    s.set_defaults(func=cmd_sweep)

    s = sub.add_parser("spiral", help="spin spiral on an XXZ chain")
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--k", type=int, required=True)
    s.add_argument("--theta", type=float, default=np.pi / 2)
    s.add_argument("--j", type=float, default=1.0)
    s.add_argument("--h-par", type=float, default=0.0)
    s.add_argument("--open", action="store_true")
    s.add_argument("--out", default=None)
    s.set_defaults(func=cmd_spiral)

    s = sub.add_parser("complexity", help="tabulated control complexity")
    s.add_argument("--scenario", required=True)
    s.add_argument("--n", type=int, default=2)
    s.set_defaults(func=cmd_complexity)
    return p


_VALUE_FLAGS = {"--range", "--h-par", "--theta", "--j", "--j-norm", "--tol"}


def _join_negative_values(argv: list[str]) -> list[str]:
    # "--range -1:1:5" would otherwise be read as a flag
    out, k = [], 0
    while k < len(argv):
        a = argv[k]
        if a in _VALUE_FLAGS and k + 1 < len(argv) and argv[k + 1].startswith("-"):
            out.append(f"{a}={argv[k + 1]}")
            k += 2
        else:
            out.append(a)
            k += 1
    return out


def run(argv: Sequence[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = build_parser().parse_args(_join_negative_values(argv))
        return args.func(args)
    except NumericalConsistencyError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ValidationError, SpinFactoryError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main(argv: Sequence[str] | None = None) -> None:
    sys.exit(run(argv))
