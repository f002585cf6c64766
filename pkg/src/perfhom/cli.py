"""Command line runner: `perfhom run <config>` and `perfhom plot <csv> ...`.

Exit status: 0 all checks passed, 2 configuration or input error,
3 solver non-convergence, 4 a check failed."""
from __future__ import annotations

import argparse
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .csvio import fmt, read_csv, write_csv
from .errors import ConfigError, NonConvergenceError, PerfhomError, SolverError
from .kinetics import Heaviside, Linear, Power, UForm, parse_kinetics

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_CHECK = 0, 2, 3, 4

REQUIRED = object()

KINDS = ("strange-term", "exterior-oracle", "cell-sweep", "micro-converge", "compare-critical",
         "rearrange-suite", "steiner-compare", "shape-deriv", "dead-core", "spectral", "corrector-scaling",
         "beta0-shape")

# key -> (parser, default); REQUIRED marks keys without a default
_COMMON = {"kind": ("str", REQUIRED), "seed": ("int", 0), "out": ("str", "out"), "plot": ("bool", False)}

SCHEMAS = {
    "strange-term": {"kinetics": ("str", REQUIRED), "n": ("int", REQUIRED), "p": ("float", REQUIRED),
                     "C0": ("float", REQUIRED), "r_min": ("float", -2.0), "r_max": ("float", 5.0),
                     "r_step": ("float", 0.05)},
    "exterior-oracle": {"kinetics": ("str", REQUIRED), "n": ("int", REQUIRED), "C0": ("float", REQUIRED),
                        "u_values": ("floats", [-1.0, 0.3, 1.0, 5.0]), "R": ("float", 100.0),
                        "N": ("int", 400), "tol": ("float", 1e-4)},
    "cell-sweep": {"shape": ("str", "disk"), "radii": ("floats", [0.0, 0.05, 0.1, 0.15, 0.2, 0.25, 0.3]),
                   "n_theta": ("int", 32), "n_r": ("int", 8)},
    "micro-converge": {"n": ("int", 2), "p": ("float", 2.0), "C0": ("float", REQUIRED),
                       "alpha": ("float", REQUIRED), "gamma": ("float", None), "shape": ("str", "disk"),
                       "kinetics": ("str", "linear:1"), "f": ("float", 0.0), "g": ("float", 0.0),
                       "boundary": ("float", 1.0), "n_cells": ("ints", [2, 4, 8, 16]),
                       "n_theta": ("int", 32), "n_r": ("int", 8), "homog_resolution": ("int", 256),
                       "regime": ("str", None)},
    "compare-critical": {"kinetics": ("str", REQUIRED), "n": ("int", 3), "C0": ("float", 1.0),
                         "R": ("float", 1.0), "N": ("int", 801)},
    "rearrange-suite": {},
    "steiner-compare": {"mode": ("str", "dirichlet0"), "kinetics": ("str", "power:0.5:1"),
                        "source": ("str", "ramp:1"), "lam": ("float", 1.0), "width": ("float", 0.8),
                        "height": ("float", 1.0), "nx": ("int", 32), "ny": ("int", 40), "tol": ("float", 1e-6)},
    "shape-deriv": {"radius": ("float", 1.0), "resolution": ("int", 128), "kinetics": ("str", "linear:1"),
                    "lam": ("float", 4.0), "f": ("float", 0.0), "boundary": ("float", 1.0),
                    "theta": ("str", "radial"), "cx": ("float", 0.2), "cy": ("float", 0.1),
                    "k": ("float", 1.0), "omega": ("float", 1.0), "ex": ("float", 1.0), "ey": ("float", 0.0),
                    "taus": ("floats", [1e-2, 1e-3, 1e-4]), "gradient": ("str", "average")},
    "dead-core": {"kinetics": ("str", "power:0.5:100"), "n": ("int", 2), "R": ("float", 1.0),
                  "N": ("int", 20001), "ms": ("floats", [10.0, 1e2, 1e3, 1e4])},
    "spectral": {"domain": ("str", "interval"), "N": ("int", 199), "m_max": ("int", 20),
                 "n_random": ("int", 500), "n_psi": ("int", 100), "probe_m": ("int", 5)},
    "corrector-scaling": {"n": ("int", REQUIRED), "p": ("float", REQUIRED), "C0": ("float", 1.0),
                          "q": ("float", REQUIRED), "eps": ("floats", [2.0 ** -k for k in range(3, 8)]),
                          "tol": ("float", 0.05)},
    "beta0-shape": {"C0": ("float", 0.5), "alpha": ("float", 2.0), "half_width": ("float", 0.25),
                    "kinetics": ("str", "linear:1"), "resolution": ("int", 64)},
}


# ---------------------------------------------------------------- config


def _parse_value(key: str, kind: str, raw: str):
    try:
        if kind == "str":
            return raw
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
        if kind == "bool":
            low = raw.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if kind == "floats":
            return [float(x) for x in raw.split(",") if x.strip()]
        if kind == "ints":
            return [int(x) for x in raw.split(",") if x.strip()]
    except ValueError:
        raise ConfigError(f"key {key!r}: cannot parse {raw!r} as {kind}") from None
    raise ConfigError(f"key {key!r}: unknown type {kind}")  # pragma: no cover


@dataclass
class ExperimentConfig:
    kind: str
    values: dict
    seed: int = 0
    out: Path = Path("out")
    plot: bool = False

    def __getitem__(self, key):
        return self.values[key]


def parse_config_text(text: str, seed: int | None = None, out: str | None = None) -> ExperimentConfig:
    raw = {}
    for no, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {no}: expected 'key = value'")
        k, v = (s.strip() for s in line.split("=", 1))
        if not k:
            raise ConfigError(f"line {no}: empty key")
        if k in raw:
            raise ConfigError(f"key {k!r} given twice")
        raw[k] = v
    if "kind" not in raw:
        raise ConfigError("missing required key 'kind'")
    kind = raw["kind"]
    if kind not in SCHEMAS:
        raise ConfigError(f"key 'kind': unknown experiment {kind!r}")
    schema = {**_COMMON, **SCHEMAS[kind]}
    for k in raw:
        if k not in schema:
            raise ConfigError(f"unknown key {k!r} for experiment {kind!r}")
    vals = {}
    for k, (typ, default) in schema.items():
        if k in raw:
            vals[k] = _parse_value(k, typ, raw[k])
        elif default is REQUIRED:
            raise ConfigError(f"missing required key {k!r}")
        else:
            vals[k] = default
    if seed is not None:
        vals["seed"] = seed
    if out is not None:
        vals["out"] = out
    cfg = ExperimentConfig(kind, vals, int(vals["seed"]), Path(vals["out"]), bool(vals["plot"]))
    _validate(cfg)
    return cfg


def load_config(path, seed: int | None = None, out: str | None = None) -> ExperimentConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config_text(text, seed, out)


def _need(cfg, key, ok, what):
    if key in cfg.values and cfg.values[key] is not None and not ok(cfg.values[key]):
        raise ConfigError(f"key {key!r}: {what}")


def _validate(cfg: ExperimentConfig) -> None:
    _need(cfg, "seed", lambda v: v >= 0, "must be nonnegative")
    _need(cfg, "n", lambda v: v >= 2, "dimension must be at least 2")
    _need(cfg, "p", lambda v: v > 1, "must exceed 1")
    _need(cfg, "C0", lambda v: v > 0, "must be positive")
    _need(cfg, "alpha", lambda v: v >= 1, "must be at least 1")
    _need(cfg, "N", lambda v: v >= 3, "must be at least 3")
    _need(cfg, "kinetics", lambda v: _kin_ok(v), "unknown kinetics descriptor")
    for key in ("n_theta", "n_r", "resolution", "homog_resolution", "nx", "ny", "n_random", "n_psi",
                "m_max", "probe_m"):
        _need(cfg, key, lambda v: v >= 1, "must be positive")
    _need(cfg, "n_cells", lambda v: len(v) >= 2 and all(x >= 1 for x in v), "need at least two positive entries")
    _need(cfg, "taus", lambda v: len(v) >= 2 and all(x > 0 for x in v), "need at least two positive steps")
    _need(cfg, "eps", lambda v: len(v) >= 2 and all(0 < x < 1 for x in v), "need at least two values in (0,1)")
    _need(cfg, "radii", lambda v: len(v) >= 2 and all(0 <= x < 0.5 for x in v), "need values in [0, 0.5)")
    _need(cfg, "shape", lambda v: v in ("disk", "square"), "must be disk or square")
    _need(cfg, "mode", lambda v: v in ("dirichlet0", "boundary1"), "must be dirichlet0 or boundary1")
    _need(cfg, "theta", lambda v: v in ("radial", "translation", "rotation"),
          "must be radial, translation or rotation")
    _need(cfg, "gradient", lambda v: v in ("average", "flux"), "must be average or flux")
    _need(cfg, "regime", lambda v: v in ("big", "subcritical", "supercritical"),
          "must be big, subcritical or supercritical")
    _need(cfg, "domain", lambda v: v in ("interval", "square"), "must be interval or square")
    _need(cfg, "source", lambda v: _source_ok(v), "expected const:c, ramp:c or bump:c")


def _kin_ok(desc) -> bool:
    try:
        parse_kinetics(desc)
    except PerfhomError:
        return False
    return True


def _source_ok(desc) -> bool:
    parts = desc.split(":")
    if parts[0] not in ("const", "ramp", "bump") or len(parts) != 2:
        return False
    try:
        float(parts[1])
    except ValueError:
        return False
    return True


# ---------------------------------------------------------------- results


@dataclass
class Check:
    name: str
    passed: bool
    detail: str

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'} {self.name}: {self.detail}"


@dataclass
class RunResult:
    kind: str
    checks: list = field(default_factory=list)
    files: list = field(default_factory=list)

    def check(self, name, passed, detail) -> None:
        self.checks.append(Check(name, bool(passed), detail))

    def table(self, cfg, name, header, rows) -> Path:
        path = cfg.out / name
        write_csv(path, header, rows)
        self.files.append(path)
        return path

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)


def _g(x) -> str:
    return fmt(float(x))


# ---------------------------------------------------------------- experiments


def _strange_term(cfg, res):
    from .homog import strange_term
    k = parse_kinetics(cfg["kinetics"])
    H = strange_term(k, cfg["n"], cfg["p"], cfg["C0"])
    count = int(round((cfg["r_max"] - cfg["r_min"]) / cfg["r_step"]))
    r = np.round(cfg["r_min"] + cfg["r_step"] * np.arange(count + 1), 12)
    h = np.asarray(H(r))
    res.table(cfg, "strange_term.csv", ["r", "H"], zip(r, h))
    dh, dr = np.diff(h), np.diff(r)
    res.check("monotone", np.all(dh >= -1e-12), f"min increment {_g(dh.min())}")
    res.check("nonexpansive", np.all(dh <= dr * (1 + 1e-12)), f"max slope {_g(np.max(dh / dr))}")
    gap = float(np.max(H.inclusion_gap(r)))
    res.check("inclusion", gap <= 1e-10, f"max graph gap {_g(gap)}")
    if cfg["p"] == 2 and isinstance(k, Linear):
        err = float(np.max(np.abs(h - k.slope * r / (k.slope + H.B0))))
        res.check("closed_form_linear", err <= 1e-12, f"max error {_g(err)}")
    if cfg["p"] == 2 and isinstance(k, Heaviside):
        err = float(np.max(np.abs(h - np.clip(r, 0.0, 1.0 / H.B0))))
        res.check("closed_form_heaviside", err <= 1e-12, f"max error {_g(err)}")


def _exterior_oracle(cfg, res):
    from .homog import exterior_radial_H, strange_term
    k = parse_kinetics(cfg["kinetics"])
    H = strange_term(k, cfg["n"], 2.0, cfg["C0"])
    rows, worst = [], 0.0
    for u in cfg["u_values"]:
        hb = float(H(u))
        _, he = exterior_radial_H(k, cfg["n"], cfg["C0"], u, R=cfg["R"], N=cfg["N"])
        rows.append((u, hb, he, abs(hb - he)))
        worst = max(worst, abs(hb - he))
    res.table(cfg, "exterior_oracle.csv", ["u", "H_bisect", "H_exterior", "abs_diff"], rows)
    res.check("cross_oracle", worst <= cfg["tol"], f"max |H - H_ext| {_g(worst)}")


def _cell_sweep(cfg, res):
    from .homog import cell_effective_matrix
    from .mesh import StarShape, build_cell_mesh
    shape = StarShape.disk(1.0) if cfg["shape"] == "disk" else StarShape.square(1.0)
    rows, alphas, lams, holes = [], [], [], []
    for a in cfg["radii"]:
        cell = build_cell_mesh(shape, a, cfg["n_theta"], cfg["n_r"])
        s = cell_effective_matrix(cell)
        hole = 1.0 - s.free_area
        rows.append((a, s.q[0, 0], s.q[0, 1], s.q[1, 1], s.alpha, s.lam))
        sym = abs(s.q[0, 1] - s.q[1, 0])
        if sym > 1e-10:
            res.check(f"symmetric_a{fmt(a)}", False, f"|q12 - q21| {_g(sym)}")
        if a == 0:
            err = float(np.max(np.abs(s.q - np.eye(2))))
            res.check("empty_identity", err <= 1e-10, f"|q - I| {_g(err)}")
        else:
            alphas.append(s.alpha)
            lams.append(s.lam)
            holes.append(hole)
            if cfg["shape"] == "disk":
                d = max(abs(s.q[0, 1]), abs(s.q[1, 0]), abs(s.q[0, 0] - s.q[1, 1]))
                res.check(f"isotropy_a{fmt(a)}", d <= 1e-8, f"defect {_g(d)}")
    # case is the hole scale a
    res.table(cfg, "cell_sweep.csv", ["case", "q11", "q12", "q22", "alpha", "lambda"], rows)
    order = np.argsort(holes)
    al, la = np.asarray(alphas)[order], np.asarray(lams)[order]
    res.check("alpha_decreasing", np.all(np.diff(al) < 0), f"alpha {', '.join(_g(x) for x in al)}")
    res.check("lambda_monotone", np.all(np.diff(la) > 0), f"lambda {', '.join(_g(x) for x in la)}")


def _micro_converge(cfg, res):
    from .homog import ScalingLaw
    from .mesh import StarShape, Tag, integrate
    from .micro import PerforatedProblem, convergence_study, EffectivenessReport
    law = ScalingLaw(cfg["n"], cfg["p"], cfg["C0"], cfg["alpha"], gamma=cfg["gamma"])
    shape = StarShape.disk(1.0) if cfg["shape"] == "disk" else StarShape.square(1.0)
    k = parse_kinetics(cfg["kinetics"])
    prob = PerforatedProblem(law, shape, tuple(cfg["n_cells"]), k, cfg["f"], cfg["g"], cfg["boundary"],
                             cfg["n_theta"], cfg["n_r"], cfg["homog_resolution"])
    # in the plane with p = n the exponent law never classifies as supercritical;
    # the regime key selects the vanishing-reaction comparison explicitly
    regime = cfg["regime"] or law.regime
    reports, sols, _ = convergence_study(prob, regime, keep=True)
    res.table(cfg, "micro_converge.csv", EffectivenessReport.HEADER, [r.row() for r in reports])
    sig = UForm(k)
    ident = 0.0
    for rep, w in zip(reports, sols):
        m = w.mesh
        eta = integrate(m, sig(1.0 - w.values), Tag.PARTICLE) / rep.particle_measure
        ident = max(ident, abs(eta - (float(sig(1.0)) - rep.E_micro)))
    res.check("identity", ident <= 1e-12, f"max |eta - (sigma(1) - E)| {_g(ident)}")
    l2 = [r.l2_error for r in reports]
    res.check("l2_nonincreasing", all(b <= 1.05 * a for a, b in zip(l2, l2[1:])),
              f"L2 errors {', '.join(_g(x) for x in l2)}")
    if regime == "supercritical":
        br = [r.boundary_reaction for r in reports]
        res.check("reaction_decreasing", all(b < a for a, b in zip(br, br[1:])),
                  f"boundary reaction {', '.join(_g(x) for x in br)}")
        res.check("l2_shrinks", l2[-1] < l2[0], f"first {_g(l2[0])} last {_g(l2[-1])}")
    else:
        gaps = [r.gap for r in reports]
        res.check("gap_third", gaps[-1] < gaps[0] / 3.0, f"gaps {', '.join(_g(x) for x in gaps)}")


def _compare_critical(cfg, res):
    from .micro import compare_critical_noncritical
    k = parse_kinetics(cfg["kinetics"])
    rep = compare_critical_noncritical(k, cfg["C0"], cfg["n"], cfg["R"], cfg["N"])
    res.table(cfg, "compare_critical.csv", ["r", "w_crit", "w_noncrit"],
              zip(rep.crit.r, rep.crit.values, rep.noncrit.values))
    res.check("pointwise", rep.min_diff >= -1e-8, f"min(w_crit - w_noncrit) {_g(rep.min_diff)}")
    res.check("effectiveness", rep.E_crit >= rep.E_noncrit - 1e-8,
              f"E_crit {_g(rep.E_crit)} E_noncrit {_g(rep.E_noncrit)}")


def _rearrange_suite(cfg, res):
    from .rearrange import inequality_suite
    rep = inequality_suite(cfg.seed)
    path = cfg.out / "rearrange_suite.csv"
    rep.to_csv(path)
    res.files.append(path)
    for check in sorted({r[0] for r in rep.rows}):
        rows = [r for r in rep.rows if r[0] == check]
        bad = [r[1] for r in rows if not r[3]]
        res.check(check, not bad, f"{len(rows)} cases, worst margin {_g(rep.worst(check))}"
                  + (f", failing {', '.join(bad)}" if bad else ""))


def _source(desc: str, width: float, height: float):
    kind, c = desc.split(":")
    c = float(c)
    if kind == "const":
        return c
    if kind == "ramp":
        return lambda X: c * (0.25 + X[:, 0] / width) * (1.0 + X[:, 1] / height)
    return lambda X: c * np.exp(-20.0 * ((X[:, 0] - 0.25 * width) ** 2 + (X[:, 1] - 0.5 * height) ** 2))


def _steiner_compare(cfg, res):
    from .rearrange import steiner_comparison_experiment
    k = parse_kinetics(cfg["kinetics"])
    f = _source(cfg["source"], cfg["width"], cfg["height"])
    rep = steiner_comparison_experiment(cfg["mode"], k, f, cfg["width"], cfg["height"], cfg["nx"], cfg["ny"],
                                        cfg["lam"], cfg["tol"])
    path = cfg.out / f"steiner_{cfg['mode']}.csv"
    rep.to_csv(path)
    res.files.append(path)
    res.check("breakpoints", rep.worst_margin >= -cfg["tol"] * rep.scale,
              f"worst margin {_g(rep.worst_margin)} at y={_g(rep.worst_at[0])} s={_g(rep.worst_at[1])}")
    res.check("effectiveness_order", rep.passed, f"E_orig {_g(rep.E_orig)} E_sym {_g(rep.E_sym)}")


def _shape_deriv(cfg, res):
    from .mesh import DeformationField, build_plain_mesh
    from .pde import EllipticSpec
    from .shape import fd_validate, nodal_gradient
    mesh = build_plain_mesh(("disk", cfg["radius"]), cfg["resolution"])
    k = parse_kinetics(cfg["kinetics"])
    spec = EllipticSpec(mesh=mesh, volume_kinetics=k, volume_weight=cfg["lam"], f=cfg["f"],
                        dirichlet=cfg["boundary"])
    t = cfg["theta"]
    if t == "radial":
        th = DeformationField.radial_stretch(mesh, (cfg["cx"], cfg["cy"]), cfg["k"])
    elif t == "rotation":
        th = DeformationField.rotation(mesh, (0.0, 0.0), cfg["omega"])
    else:
        th = DeformationField.translation(mesh, (cfg["ex"], cfg["ey"]))
    sd, rows = fd_validate(spec, th, tuple(cfg["taus"]), gradient=cfg["gradient"])
    res.table(cfg, "shape_fd.csv", ["tau", "eta_fd", "eta_analytic", "abs_err", "u_dot_l2_err"],
              [r.row() for r in rows])
    for r in rows:
        if r.error:
            res.check(f"deform_tau{fmt(r.tau)}", False, r.error)
    ok = [r for r in rows if not r.error]
    if sd.clipped:
        print(f"note: potential clipped at {sd.clipped} nodes", file=sys.stderr)
    l2 = lambda v: math.sqrt(float(np.dot(mesh.lumped, v ** 2)))
    if t == "rotation":
        up = float(np.max(np.abs(sd.u_prime.values)))
        res.check("rotation_zero", up <= 1e-8 and abs(sd.eta_prime) <= 1e-8,
                  f"max |u'| {_g(up)}, eta' {_g(sd.eta_prime)}")
    elif t == "translation":
        e = np.array([cfg["ex"], cfg["ey"]])
        de = nodal_gradient(mesh, sd.base.values) @ e
        rel = l2(sd.u_prime.values + de) / l2(de)
        res.check("translation_identity", rel <= 1e-2, f"|u' + d_e u| / |d_e u| {_g(rel)}")
        worst = max(r.u_dot_l2_err for r in ok)
        res.check("u_dot", worst <= 1e-2, f"max relative u-dot error {_g(worst)}")
    else:
        by = {r.tau: r for r in ok}
        if 1e-3 in by:
            r = by[1e-3]
            rel = r.abs_err / abs(r.eta_fd)
            res.check("eta_fd_1e-3", rel <= 1e-2, f"relative error {_g(rel)}")
        if 1e-2 in by and 1e-3 in by:
            ratio = by[1e-2].abs_err / by[1e-3].abs_err
            res.check("fd_ratio", 3.0 <= ratio <= 30.0, f"error(1e-2)/error(1e-3) {_g(ratio)}")


def _dead_core(cfg, res):
    from .shape import dead_core_study
    k = parse_kinetics(cfg["kinetics"])
    if not isinstance(k, Power):
        raise ConfigError("key 'kinetics': dead-core study needs power:q:lam")
    rep = dead_core_study(k, cfg["n"], cfg["R"], cfg["N"], tuple(cfg["ms"]))
    res.table(cfg, "dead_core.csv", rep.HEADER, rep.rows())
    target = 2.0 / (1.0 - k.q)
    if not rep.has_core:
        print("no dead core formed", file=sys.stderr)
    res.check("dead_core", rep.has_core, f"core radius {_g(rep.core_radius)}")
    res.check("slope", rep.has_core and 0.85 * target <= rep.slope <= 1.15 * target,
              f"fitted {_g(rep.slope)} target {_g(target)}")
    c = rep.cauchy
    res.check("cauchy_nonincreasing", all(b <= a for a, b in zip(c, c[1:])),
              f"increments {', '.join(_g(x) for x in c)}")
    if rep.has_core:
        res.check("v_on_core", rep.core_sup[-1] <= 1e-6,
                  f"max |v_m| on N {_g(rep.core_sup[-1])}; at depth {_g(rep.core_margin)} "
                  f"{_g(rep.core_norm[-1])}")


def _spectral(cfg, res):
    from . import spectral as S
    rng = np.random.default_rng(cfg.seed)
    B = S.eigenbasis(cfg["domain"], cfg["N"])
    mm = min(cfg["m_max"], B.M - 1)
    gram = float(np.max(np.abs(B.gram() - np.eye(B.M))))
    res.check("orthonormal", gram <= 1e-10, f"Gram defect {_g(gram)}")
    ray = max(abs(B.grad2(B.vecs[i]) - B.lam[i]) / B.lam[i] for i in range(B.M))
    res.check("rayleigh", ray <= 1e-8, f"max relative defect {_g(ray)}")
    if cfg["domain"] == "interval":
        m = np.arange(1, 11)
        coarse = S.eigenbasis("interval", (cfg["N"] - 1) // 2, 10)
        e_f = np.abs(B.lam[:10] - (m * np.pi) ** 2)
        e_c = np.abs(coarse.lam - (m * np.pi) ** 2)
        ratio = float(np.min(e_c / e_f))
        res.check("second_order", ratio >= 3.0, f"min error ratio on halving h {_g(ratio)}")
    # m is the projection dimension; the bound uses lambda_{m+1} = lam[m]
    margins = np.full(mm + 1, np.inf)
    for _ in range(cfg["n_random"]):
        f = rng.standard_normal(B.dof)
        m = int(rng.integers(0, mm + 1))
        margins[m] = min(margins[m], S.projection_bound_check(B, f, m))
    rows = [(m, B.lam[m], margins[m] if np.isfinite(margins[m]) else math.nan) for m in range(mm + 1)]
    res.table(cfg, "spectral.csv", ["m", "lambda", "margin"], rows)
    worst = float(np.min(margins))
    res.check("projection_bound", worst >= -1e-10, f"min margin {_g(worst)} over {cfg['n_random']} draws")
    rho = math.inf
    for i in range(cfg["n_psi"]):
        m = 1 + i % 5
        q, _ = np.linalg.qr(rng.standard_normal((B.dof, m)))
        rho = min(rho, S.poincare_adversary(q.T / math.sqrt(B.w), B).rho)
    res.check("adversary", rho >= 1 - 1e-9, f"min rho {_g(rho)}")
    pm = min(cfg["probe_m"], B.M - 2)
    signs = np.where(np.arange(B.M) % 2 == 0, 1.0, -1.0)
    good = S.rigidity_probe(signs[:, None] * B.vecs, B, pm)
    res.check("probe_signed", good.passed and good.pattern_max <= 1e-10,
              f"pass {good.passed}, pattern defect {_g(good.pattern_max)}")
    order = [2, 0, 1] + list(range(3, B.M))
    bad = S.rigidity_probe(B.vecs[order], B, pm)
    wm = bad.witness[0] if bad.witness else 0
    res.check("probe_e3_witness", (not bad.passed) and wm == 1, f"first violation at m={wm}")
    res.table(cfg, "spectral_probe.csv", ["m", "violation", "|f_components|"],
              [r.row() for r in good.rows] + [r.row() for r in bad.rows])
    e0 = S.family_eps0(B, S.family_chi(B, seed=cfg.seed))
    res.check("family_eps0", e0.eps0 > 0, f"eps0 {_g(e0.eps0)}, |(e2,b1)| {_g(e0.e2_overlap)}")


def _corrector(cfg, res):
    from .homog import ScalingLaw, corrector_W, corrector_rate, critical_exponent
    n, p, q = cfg["n"], cfg["p"], cfg["q"]
    law = ScalingLaw(n, p, cfg["C0"], critical_exponent(n, p))
    eps = np.asarray(cfg["eps"])
    vals = np.array([corrector_W(law, e).seminorm_q(q) for e in eps])
    res.table(cfg, "corrector.csv", ["eps", "seminorm_q"], zip(eps, vals))
    slope = float(np.polyfit(np.log(eps), np.log(vals), 1)[0])
    target = n * (p - q) / (n - p)
    res.check("slope_target", abs(slope - target) <= cfg["tol"], f"slope {_g(slope)} target {_g(target)}")
    exact = corrector_rate(n, p, q)
    print(f"note: exact rate of the radial corrector is {_g(exact)}", file=sys.stderr)


def _beta0_shape(cfg, res):
    from .homog import ScalingLaw
    from .mesh import StarShape
    from .micro import shape_effectiveness
    law = ScalingLaw(2, 2.0, cfg["C0"], cfg["alpha"])
    sq = StarShape.square(cfg["half_width"])
    disk = StarShape.disk(2.0 * cfg["half_width"] / math.sqrt(math.pi))
    k = parse_kinetics(cfg["kinetics"])
    rep = shape_effectiveness(law, [disk, sq], k, resolution=cfg["resolution"])
    res.table(cfg, "beta0_shape.csv", ["shape", "area", "perimeter", "beta0", "E"],
              zip(rep.names, rep.areas, rep.perimeters, rep.beta0, rep.E))
    res.check("disk_beats_square", rep.E[0] >= rep.E[1] - 1e-8, f"E disk {_g(rep.E[0])} square {_g(rep.E[1])}")


RUNNERS = {"strange-term": _strange_term, "exterior-oracle": _exterior_oracle, "cell-sweep": _cell_sweep,
           "micro-converge": _micro_converge, "compare-critical": _compare_critical,
           "rearrange-suite": _rearrange_suite, "steiner-compare": _steiner_compare,
           "shape-deriv": _shape_deriv, "dead-core": _dead_core, "spectral": _spectral,
           "corrector-scaling": _corrector, "beta0-shape": _beta0_shape}

PLOTS = {"micro-converge": ("micro_converge.csv", "n_cells", ["gap", "l2_error"], True, True),
         "strange-term": ("strange_term.csv", "r", ["H"], False, False),
         "cell-sweep": ("cell_sweep.csv", "case", ["alpha", "lambda"], False, False),
         "compare-critical": ("compare_critical.csv", "r", ["w_crit", "w_noncrit"], False, False),
         "corrector-scaling": ("corrector.csv", "eps", ["seminorm_q"], True, True),
         "spectral": ("spectral.csv", "m", ["lambda"], False, True)}


def run_experiment(cfg: ExperimentConfig) -> RunResult:
    res = RunResult(cfg.kind)
    cfg.out.mkdir(parents=True, exist_ok=True)
    RUNNERS[cfg.kind](cfg, res)
    if cfg.plot and cfg.kind in PLOTS:
        name, x, ys, lx, ly = PLOTS[cfg.kind]
        svg = cfg.out / (Path(name).stem + ".svg")
        emit_plot(cfg.out / name, x, ys, svg, lx, ly)
        res.files.append(svg)
    return res


# ---------------------------------------------------------------- plotting


_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def _ticks(lo, hi, k=5):
    return [lo + (hi - lo) * i / (k - 1) for i in range(k)]


def emit_plot(csv_path, x: str, ys, svg_path, logx: bool = False, logy: bool = False,
              width: int = 640, height: int = 420) -> Path:
    """Minimal SVG line plot: axes, ticks, one polyline per y column, legend."""
    header, rows = read_csv(csv_path)
    cols = [x] + list(ys)
    for c in cols:
        if c not in header:
            raise ConfigError(f"unknown column {c!r} in {csv_path}")
    idx = [header.index(c) for c in cols]
    data = []
    for no, row in enumerate(rows, 1):
        try:
            vals = [float(row[i]) for i in idx]
        except (ValueError, IndexError):
            raise ConfigError(f"row {no}: non-numeric entry in plotted columns") from None
        for c, v, lg in zip(cols, vals, [logx] + [logy] * len(ys)):
            if lg and math.isfinite(v) and v <= 0:
                raise ConfigError(f"row {no}: column {c!r} value {fmt(v)} is not positive on a log axis")
        data.append(vals)
    A = np.array(data, float).reshape(len(data), len(cols))
    T = A.copy()
    with np.errstate(divide="ignore", invalid="ignore"):
        if logx:
            T[:, 0] = np.log10(T[:, 0])
        if logy:
            T[:, 1:] = np.log10(T[:, 1:])
    fin = np.isfinite(T)
    xs = T[fin[:, 0], 0]
    yv = T[:, 1:][fin[:, 1:] & fin[:, :1]]
    x0, x1 = (float(xs.min()), float(xs.max())) if xs.size else (0.0, 1.0)
    y0, y1 = (float(yv.min()), float(yv.max())) if yv.size else (0.0, 1.0)
    if x1 == x0:
        x0, x1 = x0 - 0.5, x1 + 0.5
    if y1 == y0:
        y0, y1 = y0 - 0.5, y1 + 0.5
    L, R, Tp, B = 70, 20, 20, 50
    px = lambda v: L + (v - x0) / (x1 - x0) * (width - L - R)
    py = lambda v: height - B - (v - y0) / (y1 - y0) * (height - Tp - B)
    lab = lambda v, lg: f"{10 ** v:.3g}" if lg else f"{v:.3g}"
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'viewBox="0 0 {width} {height}">',
           f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
           f'<line x1="{L}" y1="{height - B}" x2="{width - R}" y2="{height - B}" stroke="black"/>',
           f'<line x1="{L}" y1="{Tp}" x2="{L}" y2="{height - B}" stroke="black"/>']
    for v in _ticks(x0, x1):
        out.append(f'<text x="{px(v):.2f}" y="{height - B + 16}" font-size="11" text-anchor="middle">'
                   f'{lab(v, logx)}</text>')
    for v in _ticks(y0, y1):
        out.append(f'<text x="{L - 6}" y="{py(v) + 4:.2f}" font-size="11" text-anchor="end">{lab(v, logy)}</text>')
    out.append(f'<text x="{(L + width - R) / 2:.1f}" y="{height - 12}" font-size="12" '
               f'text-anchor="middle">{_esc(x)}</text>')
    for j, name in enumerate(ys):
        ok = fin[:, 0] & fin[:, j + 1]
        pts = " ".join(f"{px(a):.2f},{py(b):.2f}" for a, b in zip(T[ok, 0], T[ok, j + 1]))
        col = _COLORS[j % len(_COLORS)]
        out.append(f'<polyline fill="none" stroke="{col}" stroke-width="1.5" points="{pts}"/>')
        out.append(f'<text x="{width - R - 150}" y="{Tp + 16 * (j + 1)}" font-size="12" fill="{col}">'
                   f'{_esc(name)}</text>')
    out.append("</svg>")
    svg_path = Path(svg_path)
    svg_path.parent.mkdir(parents=True, exist_ok=True)
    svg_path.write_text("\n".join(out) + "\n", encoding="utf-8")
    return svg_path


def _esc(s: str) -> str:
    return s.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


# ---------------------------------------------------------------- entry point


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="perfhom")
    sub = ap.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run an experiment from a key = value config")
    r.add_argument("config")
    r.add_argument("--seed", type=int, default=None)
    r.add_argument("--out", default=None)
    p = sub.add_parser("plot", help="line plot of CSV columns as SVG")
    p.add_argument("csv")
    p.add_argument("--x", required=True)
    p.add_argument("--y", required=True, nargs="+", help="one or more columns (comma-separated allowed)")
    p.add_argument("--logx", action="store_true")
    p.add_argument("--logy", action="store_true")
    p.add_argument("-o", "--output", required=True)
    return ap


def main(argv=None) -> int:
    ap = _parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    try:
        if args.command == "plot":
            ys = [c for y in args.y for c in y.split(",") if c]
            emit_plot(args.csv, args.x, ys, args.output, args.logx, args.logy)
            return EXIT_OK
        cfg = load_config(args.config, args.seed, args.out)
        res = run_experiment(cfg)
    except (NonConvergenceError, SolverError) as exc:
        print(f"error: solver did not converge: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except (PerfhomError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    for c in res.checks:
        print(c.line())
    return EXIT_OK if res.passed else EXIT_CHECK


def main_entry() -> None:
    sys.exit(main())
