"""Command-line front end: ``dellsys {verify,eigen,classical,theta}``.

Configs are flat JSON objects. Complex values are written as ``[re, im]``
(a bare real number is accepted as well); unknown keys are rejected.
Reports are deterministic for a fixed config and seed and are written
atomically (temporary file + rename).

Exit codes: 0 all checks pass, 1 a check failed, 2 config error,
3 a numerical guard was exhausted.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import tempfile
from dataclasses import dataclass, field
from typing import Callable, Iterable

import numpy as np

from . import BACKEND, __version__
from .classical import (
    FlowParams,
    flow_integrate,
    manakov_check,
    omega_zero_manakov_check,
    poisson_bracket,
    theta_gauge_check,
)
from .elliptic import (
    Modulus,
    SeriesControl,
    cauchy_determinant_check,
    fay_checks,
    gl2_fay_reduction_check,
    jacobi_theta,
    jacobi_theta_deriv,
    kronecker_phi,
    theta_char,
    theta_relation_check,
    theta_series,
    trig_limit_phi,
)
from .errors import (
    AliasingError,
    ConfigError,
    DerivativeUnstable,
    DomainError,
    GuardTripped,
    IllConditioned,
    NearSingular,
    SeriesInversionError,
    TruncationError,
)
from .intertwiner import Positions, XiVariant, elliptic_xi_zero_check, lattice_separation, xi_determinant_check
from .lax import (
    ModelParams,
    PhaseState,
    factorized_rs_lax,
    hasegawa_factorization_check,
    kronecker_manakov,
    kronecker_manakov_via_theta,
    omega_zero_collapse_check,
    quasi_periodicity_check,
    rs_lax_coeff_matrix,
    rs_lax_kronecker_form,
    sklyanin_gauge_check,
)
from ._linalg import rel_residual
from .quantumops import (
    dual_degeneration_check,
    verify_conjugation,
    verify_lax_determinant,
    verify_per_shift_cauchy,
    verify_rational_determinant,
    verify_spectral_determinant,
    verify_trig_determinant,
)
from .spectrum import (
    commutativity_check,
    eigenvalue_formula,
    eigenvalue_H1,
    gl2_first_hamiltonian_closed,
    hamiltonian_series,
    operator_coefficient_matrices,
    triangularity_defect,
)

EXIT_OK, EXIT_CHECK, EXIT_CONFIG, EXIT_GUARD = 0, 1, 2, 3

# Errors that mean a numerical guard gave up rather than a check failing.
GUARD_ERRORS = (
    GuardTripped,
    TruncationError,
    NearSingular,
    IllConditioned,
    DerivativeUnstable,
    AliasingError,
    SeriesInversionError,
    DomainError,
)


# ---------------------------------------------------------------------------
# Config parsing
# ---------------------------------------------------------------------------


def _as_complex(key, v) -> complex:
    if isinstance(v, bool):
        raise ConfigError(f"{key}: expected a number or [re, im], got a boolean")
    if isinstance(v, (int, float)):
        return complex(v)
    if isinstance(v, list) and len(v) == 2 and all(isinstance(a, (int, float)) and not isinstance(a, bool) for a in v):
        return complex(v[0], v[1])
    raise ConfigError(f"{key}: expected a number or [re, im], got {v!r}")


def _as_real(key, v) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{key}: expected a real number, got {v!r}")
    return float(v)


def _as_int(key, v) -> int:
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError(f"{key}: expected an integer, got {v!r}")
    return int(v)


def _list_of(conv):
    def parse(key, v):
        if not isinstance(v, list) or not v:
            raise ConfigError(f"{key}: expected a non-empty list")
        return [conv(f"{key}[{i}]", a) for i, a in enumerate(v)]
    return parse


def _as_str(key, v) -> str:
    if not isinstance(v, str):
        raise ConfigError(f"{key}: expected a string, got {v!r}")
    return v


MODEL_KEYS = {
    "eta": _as_complex,
    "hbar": _as_complex,
    "c": _as_complex,
    "tau": _as_complex,
    "omega": _as_complex,
    "lam": _as_complex,
    "shift_cap": _as_int,
    "average_tolerance": _as_real,
    "momentum_bound": _as_real,
    "tail_tolerance": _as_real,
    "max_index": _as_int,
}

COMMAND_KEYS = {
    "verify": {
        "sizes": _list_of(_as_int),
        "samples": _as_int,
        "shift_box": _as_int,
    },
    "eigen": {
        "N": _as_int,
        "partition": _list_of(_as_int),
        "u_grid": _list_of(_as_complex),
        "omega_order": _as_int,
    },
    "classical": {
        "k": _as_int,
        "horizon": _as_real,
        "dt": _as_real,
        "z0": _as_complex,
        "radius": _as_real,
        "fourier_samples": _as_int,
        "derivative_step": _as_real,
        "gradient": _as_str,
        "positions": _list_of(_as_complex),
        "momenta": _list_of(_as_complex),
        "probe_lambda": _as_complex,
        "record_every": _as_int,
    },
    "theta": {
        "kind": _as_str,
        "points": _list_of(_as_complex),
        "p": _as_complex,
        "a": _as_real,
        "b": _as_real,
    },
}

# settings used when the config does not override them
DEFAULTS = {
    "verify": {"sizes": [2, 3], "samples": 3, "shift_box": 2, "omega": 0.1},
    "eigen": {"N": 2, "partition": [1, 0], "u_grid": [0.3, 0.5, [0.2, 0.1]], "omega_order": 2,
              "omega": 0.1, "eta": 0.4, "hbar": -0.3},
    "classical": {"k": -1, "horizon": 1.0, "dt": 1e-3, "z0": [0.1, 0.45], "positions": [0.3, -0.3],
                  "momenta": [0.0, 0.0], "omega": 0.1, "radius": 1.0, "fourier_samples": 64,
                  "derivative_step": 1e-5, "gradient": "contour", "record_every": 50},
    "theta": {"kind": "nome", "points": [0.3, [0.5, 0.2], -1.7]},
}


def parse_config(command: str, raw) -> dict:
    """Validate a decoded JSON object against the keys of ``command``."""
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigError("config must be a flat JSON object")
    allowed = {**MODEL_KEYS, **COMMAND_KEYS[command]}
    if command == "eigen":
        # the eigenvalue tables are computed at p = 0
        allowed.pop("tau")
    cfg = {}
    merged = dict(DEFAULTS[command])
    for key in raw:
        if key not in allowed:
            raise ConfigError(f"unknown config key {key!r} for command {command!r}")
    merged.update(raw)
    for key, value in merged.items():
        cfg[key] = allowed[key](key, value)
    return cfg


def load_config(command: str, path: str | None) -> dict:
    raw = None
    if path is not None:
        try:
            with open(path, encoding="utf-8") as fh:
                raw = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config {path!r}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path!r} is not valid JSON: {exc}") from exc
    return parse_config(command, raw)


def model_params(cfg: dict) -> ModelParams:
    kw = {k: cfg[k] for k in ("eta", "hbar", "c", "omega", "lam", "shift_cap",
                              "average_tolerance", "momentum_bound") if k in cfg}
    ctl = SeriesControl(max_index=cfg.get("max_index"), tail_tolerance=cfg.get("tail_tolerance", 1e-15))
    kw["series"] = ctl
    try:
        if "tau" in cfg:
            kw["tau"] = Modulus(cfg["tau"])
        return ModelParams(**kw)
    except (DomainError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def parse_seed(text: str) -> int:
    try:
        seed = int(text, 0)
    except ValueError as exc:
        raise ConfigError(f"seed must be an unsigned 64-bit integer, got {text!r}") from exc
    if not 0 <= seed < 2 ** 64:
        raise ConfigError(f"seed {seed} is outside the unsigned 64-bit range")
    return seed


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------


@dataclass
class Record:
    name: str
    anchor: str
    residual: float | None
    tolerance: float
    passed: bool
    error: str | None = None

    def as_dict(self) -> dict:
        d = {"name": self.name, "anchor": self.anchor, "residual": self.residual,
             "tolerance": self.tolerance, "pass": self.passed}
        if self.error is not None:
            d["error"] = self.error
        return d


@dataclass
class Report:
    command: str
    records: list = field(default_factory=list)
    environment: dict = field(default_factory=dict)
    table: list | None = None
    guard_tripped: bool = False

    def check(self, name: str, anchor: str, tolerance: float, fn: Callable[[], float]) -> Record:
        """Run one check; guard exceptions become failing records."""
        try:
            r = float(fn())
            ok = bool(math.isfinite(r) and r <= tolerance)
            rec = Record(name, anchor, r if math.isfinite(r) else None, tolerance, ok)
        except GUARD_ERRORS as exc:
            self.guard_tripped = True
            rec = Record(name, anchor, None, tolerance, False, f"{type(exc).__name__}: {exc}")
        self.records.append(rec)
        return rec

    @property
    def summary(self) -> dict:
        passed = sum(r.passed for r in self.records)
        return {"total": len(self.records), "passed": passed, "failed": len(self.records) - passed}

    def exit_code(self) -> int:
        if self.guard_tripped:
            return EXIT_GUARD
        return EXIT_OK if all(r.passed for r in self.records) else EXIT_CHECK

    def as_dict(self) -> dict:
        d = {"command": self.command, "records": [r.as_dict() for r in self.records],
             "summary": self.summary, "environment": self.environment}
        if self.table is not None:
            d["table"] = self.table
        return d


def _json_safe(obj):
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    if isinstance(obj, dict):
        return {k: _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    if isinstance(obj, np.generic):
        return _json_safe(obj.item())
    return obj


def render_json(report: Report) -> str:
    return json.dumps(_json_safe(report.as_dict()), indent=2, sort_keys=False, allow_nan=False) + "\n"


def _csv_cell(v):
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    return v


def _csv(rows: list[dict], header: list[str]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=header, lineterminator="\n", extrasaction="ignore")
    w.writeheader()
    for row in rows:
        w.writerow({k: _csv_cell(row.get(k)) for k in header})
    return buf.getvalue()


def render_csv(report: Report) -> str:
    return _csv([r.as_dict() for r in report.records], ["name", "anchor", "residual", "tolerance", "pass"])


def render_table_csv(table: list[dict]) -> str:
    header = list(table[0].keys()) if table else []
    return _csv(table, header)


def atomic_write(path: str, text: str) -> None:
    """Write ``text`` to ``path`` through a temporary file in the same directory."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(prefix=".dellsys-", dir=directory)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def table_path(out: str) -> str:
    root, _ = os.path.splitext(out)
    return root + ".table.csv"


# ---------------------------------------------------------------------------
# Sampling helpers
# ---------------------------------------------------------------------------


def _positions(rng, N: int, tau, spread: float = 0.3) -> Positions:
    # generic points: separated by more than 0.05 on the torus, not just in C
    while True:
        q = spread * rng.standard_normal(N) + 0.05j * rng.standard_normal(N)
        try:
            pos = Positions(q)
        except NearSingular:
            continue
        if lattice_separation(q, tau) > 0.05:
            return pos


def _z(rng) -> complex:
    return complex(rng.uniform(0.1, 0.4), rng.uniform(0.05, 0.3))


def _state(rng, N: int, tau) -> PhaseState:
    return PhaseState(_positions(rng, N, tau), 0.3 * rng.standard_normal(N))


# ---------------------------------------------------------------------------
# verify suites
# ---------------------------------------------------------------------------


def _suite_theta(rep, cfg, params, rng):
    mod = params.tau
    for s in range(cfg["samples"]):
        x = complex(rng.uniform(0.4, 1.6) * np.exp(2j * np.pi * rng.uniform()))
        w = complex(rng.uniform(-0.5, 0.5), rng.uniform(-0.2, 0.2))
        p = mod.p

        def quasi(x=x, p=p):
            lhs = theta_series(p * x, mod)
            rhs = -theta_series(x, mod) / x
            return abs(lhs - rhs) / max(abs(lhs), abs(rhs))

        rep.check(f"theta quasi-periodicity #{s}", "theta_p(p x) = -x^{-1} theta_p(x)", 1e-10, quasi)
        rep.check(f"theta relation #{s}", "nome-series / odd Jacobi theta relation", 1e-10,
                  lambda w=w: theta_relation_check(w, mod))
    h = 1e-5
    fd = (jacobi_theta(h, mod) - jacobi_theta(-h, mod)) / (2 * h)
    d0 = jacobi_theta_deriv(0.0, mod)
    rep.check("theta derivative at zero", "central difference of the odd theta", 1e-8,
              lambda: abs(fd - d0) / abs(d0))


def _suite_cauchy(rep, cfg, params, rng):
    mod = params.tau
    for N in range(1, 5):
        for s in range(cfg["samples"]):
            z = _z(rng)
            u = _positions(rng, N, mod).q + 0.5
            w = _positions(rng, N, mod).q
            rep.check(f"cauchy determinant N={N} #{s}", "elliptic Cauchy determinant", 1e-10,
                      lambda z=z, u=u, w=w: cauchy_determinant_check(z, u, w, mod))


def _suite_fay(rep, cfg, params, rng):
    mod = params.tau
    labels = ("Fay trisecant identity", "degenerate Fay identity", "Eisenstein combination identity")
    for s in range(cfg["samples"]):
        z, w = _z(rng), _z(rng) * 0.7
        u1, u2 = complex(rng.uniform(0.1, 0.3), 0.1), complex(rng.uniform(-0.3, -0.1), 0.05)
        res = {}

        def get(i, z=z, w=w, u1=u1, u2=u2, res=res):
            if "r" not in res:
                res["r"] = fay_checks(z, w, u1, u2, mod)
            return res["r"][i]

        for i, lab in enumerate(labels):
            rep.check(f"fay {i + 1} #{s}", lab, 1e-10, lambda i=i, get=get: get(i))
        k1, k2 = 0, 0
        while k1 == 0 or k2 == 0 or k1 + k2 == 0:
            k1, k2 = (int(a) for a in rng.integers(-2, 3, size=2))
        q12 = complex(rng.uniform(0.1, 0.4), rng.uniform(-0.1, 0.1))
        rep.check(f"GL(2) fay reduction #{s}", "two-particle Fay reduction of the Lax determinant", 1e-11,
                  lambda z=z, q12=q12, k1=k1, k2=k2: gl2_fay_reduction_check(z, q12, k1, k2, params.eta, mod))


def _suite_trig_limit(rep, cfg, params, rng):
    deep = Modulus(8j)
    for s in range(cfg["samples"]):
        x = complex(rng.uniform(-2, 2), rng.uniform(-2, 2))
        rep.check(f"theta at p=0 #{s}", "trigonometric limit of theta_p", 1e-14,
                  lambda x=x: abs(theta_series(x, 0.0) - (1 - x)) / max(1.0, abs(1 - x)))
        z, u = _z(rng), complex(rng.uniform(0.1, 0.3), 0.07)
        rep.check(f"kronecker trig limit #{s}", "trigonometric limit of the Kronecker function", 1e-10,
                  lambda z=z, u=u: abs(kronecker_phi(z, u, deep) - trig_limit_phi(z, u)) / abs(trig_limit_phi(z, u)))


def _suite_xi(rep, cfg, params, rng):
    mod = params.tau
    for N in cfg["sizes"]:
        for s in range(cfg["samples"]):
            pos, z = _positions(rng, N, params.tau), _z(rng)
            for v in XiVariant:
                rep.check(f"xi determinant {v.value} N={N} #{s}", f"closed-form determinant of {v.value} Xi",
                          1e-10, lambda v=v, pos=pos, z=z: xi_determinant_check(v, z if v.spectral else None, pos, mod))
            rep.check(f"xi determinant TrigSpectral sinh N={N} #{s}", "hyperbolic form of the TrigSpectral determinant",
                      1e-10, lambda pos=pos, z=z: xi_determinant_check(XiVariant.TRIG_SPECTRAL, z, pos, form="sinh"))
            rep.check(f"elliptic xi zero N={N} #{s}", "vanishing of the elliptic Xi determinant at z = 0",
                      1e-9, lambda pos=pos, z=z: elliptic_xi_zero_check(pos, mod, z))


def _suite_factorization(rep, cfg, params, rng):
    mod = params.tau
    for N in cfg["sizes"]:
        for s in range(cfg["samples"]):
            pos, z = _positions(rng, N, params.tau), _z(rng)
            for v in XiVariant:
                zz = z if v.spectral else None
                rep.check(f"intertwiner factorization {v.value} N={N} #{s}",
                          "intertwining-matrix factorization of the RS coefficients", 1e-10,
                          lambda v=v, zz=zz, pos=pos: rel_residual(factorized_rs_lax(v, zz, pos, params.eta, mod),
                                                                   rs_lax_coeff_matrix(v, zz, pos, params.eta, mod)))
            rep.check(f"kronecker form N={N} #{s}", "Kronecker-function form of the elliptic RS coefficients", 1e-12,
                      lambda pos=pos, z=z: rel_residual(rs_lax_kronecker_form(z, pos, params.eta, mod),
                                                        rs_lax_coeff_matrix(XiVariant.ELLIPTIC, z, pos, params.eta, mod)))


def _suite_gauges(rep, cfg, params, rng):
    for N in cfg["sizes"]:
        for s in range(cfg["samples"]):
            st, z = _state(rng, N, params.tau), _z(rng)
            lam = complex(0.7 * np.exp(2j * np.pi * rng.uniform()))
            rep.check(f"hasegawa N={N} #{s}", "Hasegawa factorization", 1e-9,
                      lambda st=st, z=z: hasegawa_factorization_check(z, st, params))
            cache = {}

            def skl(i, st=st, z=z, cache=cache):
                if "r" not in cache:
                    cache["r"] = sklyanin_gauge_check(z, st, params)
                return cache["r"][i]

            rep.check(f"sklyanin gauge N={N} #{s}", "Sklyanin gauge transformation", 1e-9, lambda skl=skl: skl(0))
            rep.check(f"sklyanin trace N={N} #{s}", "trace invariance of the Sklyanin gauge", 1e-10, lambda skl=skl: skl(1))
            qp = {}

            def quasi(i, st=st, z=z, qp=qp):
                if "r" not in qp:
                    qp["r"] = quasi_periodicity_check(z, st, params)
                return qp["r"][i]

            rep.check(f"period 1 N={N} #{s}", "periodicity of the classical RS Lax matrix", 1e-12, lambda quasi=quasi: quasi(0))
            rep.check(f"period tau N={N} #{s}", "quasi-periodicity of the classical RS Lax matrix", 1e-10,
                      lambda quasi=quasi: quasi(1))
            if params.omega != 0:
                rep.check(f"theta operator gauge N={N} #{s}", "theta-operator form of the Manakov matrix", 1e-9,
                          lambda st=st, z=z, lam=lam: theta_gauge_check(z, lam, st, params))
                u = complex(rng.uniform(0.05, 0.2), rng.uniform(0.0, 0.05))
                rep.check(f"kronecker manakov N={N} #{s}", "Kronecker-normalised Manakov matrix", 1e-9,
                          lambda st=st, z=z, u=u: rel_residual(kronecker_manakov(z, u, st, params),
                                                               kronecker_manakov_via_theta(z, u, st, params)))


def _suite_omega_zero(rep, cfg, params, rng):
    for N in cfg["sizes"]:
        for s in range(cfg["samples"]):
            st, z = _state(rng, N, params.tau), _z(rng)
            lam = complex(0.8 * np.exp(2j * np.pi * rng.uniform()))
            rep.check(f"omega=0 average N={N} #{s}", "omega = 0 collapse of the averaged Lax matrix", 1e-12,
                      lambda st=st, z=z, lam=lam: omega_zero_collapse_check(z, lam, st, params))
            rep.check(f"omega=0 manakov N={N} #{s}", "omega = 0 form of the Manakov matrix", 1e-12,
                      lambda st=st, z=z, lam=lam: omega_zero_manakov_check(z, lam, st, params))


def _suite_determinants(rep, cfg, params, rng):
    M = cfg["shift_box"]
    for N in cfg["sizes"]:
        for s in range(cfg["samples"]):
            pos, z = _positions(rng, N, params.tau), _z(rng)
            for route in ("lu", "pairing", "conjugation"):
                rep.check(f"trig determinant ({route}) N={N} #{s}", "trigonometric determinant representation", 1e-10,
                          lambda pos=pos, route=route: verify_trig_determinant(pos, params, M, route=route))
            rep.check(f"rational determinant N={N} #{s}", "rational determinant representation", 1e-10,
                      lambda pos=pos: verify_rational_determinant(pos, params, M))
            for v in (XiVariant.RATIONAL_SPECTRAL, XiVariant.TRIG_SPECTRAL, XiVariant.ELLIPTIC):
                rep.check(f"spectral determinant {v.value} N={N} #{s}", "spectral determinant representation", 1e-10,
                          lambda v=v, pos=pos, z=z: verify_spectral_determinant(z, pos, params, v, M))
            rep.check(f"shifted spectral determinant N={N} #{s}", "centre-of-mass shift of the spectral representation",
                      1e-10, lambda pos=pos, z=z: verify_spectral_determinant(z, pos, params, XiVariant.ELLIPTIC, M,
                                                                              shifted=True))


def _suite_lax_determinant(rep, cfg, params, rng):
    M = cfg["shift_box"]
    for N in cfg["sizes"]:
        for s in range(cfg["samples"]):
            pos, z = _positions(rng, N, params.tau), _z(rng)
            for v in XiVariant:
                rep.check(f"normal-ordered determinant {v.value} N={N} #{s}",
                          "normal-ordered determinant of the averaged Lax operator", 1e-10,
                          lambda v=v, pos=pos, z=z: verify_lax_determinant(z, pos, params, v, M))
            rep.check(f"per-shift cauchy form N={N} #{s}", "Cauchy factorization of the column-mixed Lax determinant",
                      1e-10, lambda pos=pos, z=z: verify_per_shift_cauchy(z, pos, params, M))


def _suite_conjugation(rep, cfg, params, rng):
    M = cfg["shift_box"]
    for N in cfg["sizes"]:
        for s in range(cfg["samples"]):
            pos = _positions(rng, N, params.tau)
            rep.check(f"conjugation N={N} #{s}", "gauge conjugation between operator normalisations", 1e-10,
                      lambda pos=pos: verify_conjugation(pos, params, M))
            rep.check(f"dual degeneration N={N} #{s}", "large-z degeneration of the rational spectral family", 1e-5,
                      lambda pos=pos: dual_degeneration_check(pos, params, M))


def _suite_spectrum(rep, cfg, params, rng):
    for s in range(cfg["samples"]):
        q = complex(rng.uniform(0.2, 0.9) * np.exp(2j * np.pi * rng.uniform()))
        t = complex(rng.uniform(0.2, 0.9) * np.exp(2j * np.pi * rng.uniform()))

        def gl2(q=q, t=t):
            mats = operator_coefficient_matrices(2, 1, q, t, 1, seed=s)
            b = [tuple(p.padded(2)) for p in mats.basis].index((1, 0))
            H = hamiltonian_series(mats, 1)[:, b, b]
            ref = gl2_first_hamiltonian_closed(q, t)
            return float(np.max(np.abs(H - ref)) / np.max(np.abs(ref)))

        rep.check(f"GL(2) eigenvalue #{s}", "first GL(2) eigenvalue through order omega", 1e-10, gl2)
    for N in cfg["sizes"]:
        q, t = 0.55 * np.exp(0.4j), 0.7 * np.exp(-0.9j)
        for d in range(0, 3):
            cache = {}

            def mats(N=N, d=d, cache=cache):
                if "m" not in cache:
                    cache["m"] = operator_coefficient_matrices(N, d, q, t, 2)
                return cache["m"]

            u, om = 0.37 + 0.1j, 0.1

            def tri(mats=mats):
                m = mats()
                return triangularity_defect(m.basis, m.at(u, om))

            def diag(mats=mats, N=N):
                m = mats()
                A = m.at(u, om)
                worst = 0.0
                for i, lam in enumerate(m.basis):
                    e = eigenvalue_formula(u, lam, q, t, om, N, 2)
                    worst = max(worst, abs(A[i, i] - e) / abs(e))
                return worst

            rep.check(f"triangularity N={N} d={d}", "triangularity in the monomial basis", 1e-10, tri)
            rep.check(f"eigenvalues N={N} d={d}", "product formula for the eigenvalues", 1e-10, diag)
    rep.check("commutativity N=2 d=2", "commuting quantum Hamiltonians", 1e-10,
              lambda: commutativity_check(0.55 * np.exp(0.4j), 0.7 * np.exp(-0.9j), 2, 2, 2))


def _suite_classical(rep, cfg, params, rng):
    flow = FlowParams()
    p = params if params.omega != 0 else params.replace(omega=0.1)
    for N in cfg["sizes"]:
        st = _state(rng, N, params.tau)
        rep.check(f"involution N={N}", "Poisson involution of the Hamiltonians", 1e-6,
                  lambda st=st: abs(poisson_bracket(1, 2, flow.z0, st, p, flow, scaled=True)))
        cache = {}

        def man(field_, st=st, cache=cache):
            if "r" not in cache:
                cache["r"] = manakov_check(1, flow.z0, 0.6 + 0.3j, st, p, flow)
            return field_(cache["r"])

        rep.check(f"manakov equation N={N}", "Manakov L-A-B equation", 1e-6, lambda man=man: man(lambda r: r.residual_eq))
        rep.check(f"manakov trace N={N}", "tracelessness of B", 1e-6, lambda man=man: man(lambda r: abs(r.trace_B)))
        rep.check(f"manakov forms N={N}", "agreement of the three Manakov forms", 1e-10,
                  lambda man=man: man(lambda r: r.form_spread))


SUITES: dict[str, Callable] = {
    "theta": _suite_theta,
    "cauchy": _suite_cauchy,
    "fay": _suite_fay,
    "trig_limit": _suite_trig_limit,
    "xi": _suite_xi,
    "factorization": _suite_factorization,
    "gauges": _suite_gauges,
    "omega_zero": _suite_omega_zero,
    "determinants": _suite_determinants,
    "lax_determinant": _suite_lax_determinant,
    "conjugation": _suite_conjugation,
    "spectrum": _suite_spectrum,
    "classical": _suite_classical,
}


def parse_suites(text: str | None) -> list[str]:
    if text is None:
        return list(SUITES)
    names = [s.strip() for s in text.split(",") if s.strip()]
    if not names:
        raise ConfigError("--suite needs at least one name")
    bad = [n for n in names if n not in SUITES]
    if bad:
        raise ConfigError(f"unknown suite(s): {', '.join(bad)}; available: {', '.join(SUITES)}")
    # keep the canonical order so output does not depend on flag order
    return [n for n in SUITES if n in names]


def _environment(seed, params: ModelParams, extra: dict | None = None) -> dict:
    env = {
        "seed": seed,
        "backend": BACKEND,
        "version": __version__,
        "truncation": {
            "tail_tolerance": params.series.tail_tolerance,
            "max_index": params.series.max_index,
            "shift_cap": int(params.shift_cap),
            "average_tolerance": params.average_tolerance,
        },
    }
    if extra:
        env["truncation"].update(extra)
    return env


def run_verify(cfg: dict, seed: int, suites: list[str]) -> Report:
    params = model_params(cfg)
    for N in cfg["sizes"]:
        if N < 1:
            raise ConfigError("sizes must be positive")
    if cfg["samples"] < 1:
        raise ConfigError("samples must be positive")
    rep = Report("verify", environment=_environment(seed, params, {"shift_box": cfg["shift_box"]}))
    rep.environment["suites"] = suites
    root = np.random.SeedSequence(seed)
    children = root.spawn(len(SUITES))
    for i, name in enumerate(SUITES):
        # every suite gets its own stream, so filtering does not change the samples
        if name in suites:
            SUITES[name](rep, cfg, params, np.random.default_rng(children[i]))
    return rep


# ---------------------------------------------------------------------------
# eigen / classical / theta
# ---------------------------------------------------------------------------


def run_eigen(cfg: dict, seed: int) -> Report:
    params = model_params(cfg)
    N, K = cfg["N"], cfg["omega_order"]
    lam = cfg["partition"]
    if N < 1 or K < 0 or any(a < 0 for a in lam) or len(lam) > N or list(lam) != sorted(lam, reverse=True):
        raise ConfigError("need N >= 1, omega_order >= 0 and a partition with at most N weakly decreasing parts")
    q, t, om = params.q, params.t, params.omega
    d = sum(lam)
    rep = Report("eigen", environment=_environment(seed, params, {"omega_order": K}))
    mats = operator_coefficient_matrices(N, d, q, t, K, seed=seed % (2 ** 32))
    key = tuple(list(lam) + [0] * (N - len(lam)))
    b = [tuple(p.padded(N)) for p in mats.basis].index(key)
    table = []
    for i, u in enumerate(cfg["u_grid"]):
        A = mats.at(u, om)
        e = eigenvalue_formula(u, lam, q, t, om, N, K)
        e0 = eigenvalue_formula(u, lam, q, t, 0.0, N, K)
        prod0 = complex(np.prod([1 - u * t ** (N - 1 - j) * q ** key[j] for j in range(N)]))
        rep.check(f"eigenvalue u#{i}", "product formula for the eigenvalues", 1e-10,
                  lambda A=A, e=e: abs(A[b, b] - e) / abs(e))
        rep.check(f"omega=0 eigenvalue u#{i}", "trigonometric product formula", 1e-12,
                  lambda e0=e0, prod0=prod0: abs(e0 - prod0) / abs(prod0))
        rep.check(f"triangularity u#{i}", "triangularity in the monomial basis", 1e-10,
                  lambda A=A: triangularity_defect(mats.basis, A))
        table.append({"kind": "E(u)", "u_re": complex(u).real, "u_im": complex(u).imag, "order": None,
                      "value_re": complex(A[b, b]).real, "value_im": complex(A[b, b]).imag})
    H1 = eigenvalue_H1(lam, q, t, N, K)
    Hm = hamiltonian_series(mats, 1)[:, b, b] if mats.omega_series(0)[0][b, b] != 0 else None
    for m in range(K + 1):
        table.append({"kind": "H1", "u_re": None, "u_im": None, "order": m,
                      "value_re": complex(H1[m]).real, "value_im": complex(H1[m]).imag})
    if Hm is not None:
        rep.check("first Hamiltonian series", "diagonal of O_0^{-1} O_1 against the eigenvalue ratio", 1e-10,
                  lambda: float(np.max(np.abs(Hm - H1)) / max(float(np.max(np.abs(H1))), 1e-300)))
    if N == 2 and key == (1, 0) and K >= 1:
        ref = gl2_first_hamiltonian_closed(q, t)
        rep.check("GL(2) eigenvalue", "first GL(2) eigenvalue through order omega", 1e-10,
                  lambda: float(np.max(np.abs(H1[:2] - ref)) / np.max(np.abs(ref))))
    rep.table = table
    return rep


def run_classical(cfg: dict, seed: int) -> Report:
    params = model_params(cfg)
    qs, ps = cfg["positions"], cfg["momenta"]
    if len(qs) != len(ps):
        raise ConfigError("positions and momenta must have the same length")
    try:
        flow = FlowParams(k=cfg["k"], z0=cfg["z0"], radius=cfg["radius"], fourier_samples=cfg["fourier_samples"],
                          derivative_step=cfg["derivative_step"], gradient=cfg["gradient"], dt=cfg["dt"],
                          horizon=cfg["horizon"])
        state = PhaseState(Positions(qs), ps)
    except (DomainError, NearSingular, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    if cfg["record_every"] < 1:
        raise ConfigError("record_every must be positive")
    env = {"fourier_samples": flow.fourier_samples, "derivative_step": flow.derivative_step,
           "gradient": flow.gradient,
           "dt": flow.dt, "horizon": flow.horizon}
    rep = Report("classical", environment=_environment(seed, params, env))
    probe = cfg.get("probe_lambda")
    result = {}

    def drift():
        fr = flow_integrate(flow.k, flow.z0, state, params, flow, probe_lambda=probe,
                            record_every=cfg["record_every"])
        result["fr"] = fr
        return fr.max_drift

    rep.check("det L conservation", "conservation of det L along the flow", 1e-6, drift)
    if state.N > 1:
        lam = probe if probe is not None else flow.radius * np.exp(0.7j)
        cache = {}

        def man(f):
            if "r" not in cache:
                cache["r"] = manakov_check(flow.k, flow.z0, lam, state, params, flow)
            return f(cache["r"])

        rep.check("manakov equation", "Manakov L-A-B equation", 1e-6, lambda: man(lambda r: r.residual_eq))
        rep.check("manakov trace", "tracelessness of B", 1e-6, lambda: man(lambda r: abs(r.trace_B)))
        rep.check("manakov forms", "agreement of the three Manakov forms", 1e-10, lambda: man(lambda r: r.form_spread))
    fr = result.get("fr")
    if fr is not None:
        rows = []
        for i, tm in enumerate(fr.times):
            row = {"t": float(tm)}
            for j in range(state.N):
                row[f"q{j}_re"], row[f"q{j}_im"] = fr.q[i, j].real, fr.q[i, j].imag
            for j in range(state.N):
                row[f"p{j}_re"], row[f"p{j}_im"] = fr.p[i, j].real, fr.p[i, j].imag
            row["drift"] = float(fr.drift[i])
            rows.append(row)
        rep.table = rows
    return rep


def run_theta(cfg: dict, seed: int) -> Report:
    params = model_params(cfg)
    kind = cfg["kind"]
    kinds = ("nome", "jacobi", "jacobi_deriv", "char")
    if kind not in kinds:
        raise ConfigError(f"kind must be one of {', '.join(kinds)}")
    mod = params.tau
    ctl = params.series
    rep = Report("theta", environment=_environment(seed, params))
    table = []
    for i, x in enumerate(cfg["points"]):
        try:
            if kind == "nome":
                p = cfg.get("p", mod.p)
                v = theta_series(x, p, ctl)
                if p != 0:
                    rep.check(f"quasi-periodicity #{i}", "theta_p(p x) = -x^{-1} theta_p(x)", 1e-10,
                              lambda x=x, p=p, v=v: abs(theta_series(p * x, p, ctl) + v / x) / max(abs(v / x), 1e-300))
            elif kind == "jacobi":
                v = jacobi_theta(x, mod, ctl)
                rep.check(f"odd symmetry #{i}", "oddness of the Jacobi theta", 1e-12,
                          lambda x=x, v=v: abs(jacobi_theta(-x, mod, ctl) + v) / max(abs(v), 1e-300))
            elif kind == "jacobi_deriv":
                v = jacobi_theta_deriv(x, mod, ctl)
                h = 1e-5
                fd = (jacobi_theta(x + h, mod, ctl) - jacobi_theta(x - h, mod, ctl)) / (2 * h)
                rep.check(f"central difference #{i}", "central difference of the odd theta", 1e-8,
                          lambda v=v, fd=fd: abs(fd - v) / max(abs(v), 1e-300))
            else:
                v = theta_char(cfg.get("a", 0.5), cfg.get("b", 0.5), x, mod, ctl)
        except GUARD_ERRORS as exc:
            if isinstance(exc, DomainError) and not isinstance(exc, TruncationError):
                raise ConfigError(f"point #{i}: {exc}") from exc
            raise
        table.append({"x_re": x.real, "x_im": x.imag, "value_re": complex(v).real, "value_im": complex(v).imag})
    rep.table = table
    return rep


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="flat JSON config")
    common.add_argument("--seed", metavar="U64", default="42", help="unsigned 64-bit seed (default 42)")
    common.add_argument("--suite", metavar="NAME[,NAME...]", help="verify only: comma-separated suite names")
    common.add_argument("--out", metavar="PATH", help="report path (default: stdout)")
    common.add_argument("--format", choices=("json", "csv"), default="json")
    parser = argparse.ArgumentParser(prog="dellsys", description="Numerics for the double-elliptic system.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("verify", parents=[common], help="run identity verification suites")
    sub.add_parser("eigen", parents=[common], help="tabulate eigenvalues of the quantum operators")
    sub.add_parser("classical", parents=[common], help="integrate a classical Hamiltonian flow")
    sub.add_parser("theta", parents=[common], help="evaluate theta functions")
    return parser


def _emit(report: Report, out: str | None, fmt: str) -> None:
    text = render_json(report) if fmt == "json" else render_csv(report)
    if out is None:
        sys.stdout.write(text)
        if fmt == "csv" and report.table:
            sys.stdout.write("\n" + render_table_csv(report.table))
        return
    if fmt == "csv" and report.table:
        atomic_write(table_path(out), render_table_csv(report.table))
    atomic_write(out, text)


def main(argv: Iterable[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(None if argv is None else list(argv))
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code not in (0, None) else EXIT_OK
    try:
        seed = parse_seed(args.seed)
        cfg = load_config(args.command, args.config)
        if args.command != "verify" and args.suite is not None:
            raise ConfigError("--suite only applies to the verify command")
        if args.command == "verify":
            report = run_verify(cfg, seed, parse_suites(args.suite))
        elif args.command == "eigen":
            report = run_eigen(cfg, seed)
        elif args.command == "classical":
            report = run_classical(cfg, seed)
        else:
            report = run_theta(cfg, seed)
    except ConfigError as exc:
        print(f"dellsys: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except GUARD_ERRORS as exc:
        print(f"dellsys: numerical guard exhausted: {exc}", file=sys.stderr)
        return EXIT_GUARD
    _emit(report, args.out, args.format)
    code = report.exit_code()
    if code == EXIT_CHECK:
        print(f"dellsys: {report.summary['failed']} check(s) failed", file=sys.stderr)
    elif code == EXIT_GUARD:
        print("dellsys: a numerical guard was exhausted", file=sys.stderr)
    return code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
