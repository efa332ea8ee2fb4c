"""Command-line experiment runner.

    epcore <subcommand> --config cfg.json [--out path] [--workers n] [--format csv|json]

One JSON document configures one experiment. Complex numbers may be given
as plain numbers, ``{"re": .., "im": ..}`` objects, ``[re, im]`` pairs or
strings such as ``"1-2j"``. Exit status: 0 success, 1 domain error,
2 configuration error.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, finder, linalg, models, monodromy, response, twolevel
from .errors import ConfigError, EpcoreError
from .family import MatrixFamily

# subcommand -> module operations it exercises (audited by the test-suite)
SUBCOMMAND_OPERATIONS = {
    "twolevel": ["twolevel.ep_locations", "twolevel.energies", "twolevel.ep_eigenvectors",
                 "twolevel.jordan_at_ep", "twolevel.greens_2x2",
                 "linalg.char_discriminant", "linalg.eig"],
    "census": ["finder.census", "finder.scan_grid", "finder.classify",
               "models.rpa_block", "models.pt_dimer", "models.ep3_family"],
    "encircle": ["monodromy.track_loop", "monodromy.verify_cycle", "finder.refine_ep"],
    "exponents": ["monodromy.exponent_fit", "finder.refine_ep", "finder.classify"],
    "response": ["response.greens", "response.pole_decomposition", "response.cross_section",
                 "response.lorentz_fit", "response.propagate", "linalg.nilpotent_part"],
    "lipkin": ["models.lipkin", "models.lipkin_census"],
    "metric": ["models.pt_dimer", "models.quasi_metric", "linalg.biorthogonalize"],
    "ep3": ["models.ep3_family", "finder.find_epn", "finder.census"],
}


# -- config parsing ---------------------------------------------------------------

def _complex(v, what="value") -> complex:
    try:
        if isinstance(v, dict):
            return complex(float(v.get("re", 0.0)), float(v.get("im", 0.0)))
        if isinstance(v, (list, tuple)) and len(v) == 2:
            return complex(float(v[0]), float(v[1]))
        if isinstance(v, str):
            return complex(v.replace(" ", ""))
        if isinstance(v, bool):
            raise TypeError
        return complex(v)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{what}: cannot read {v!r} as a complex number") from exc


def _matrix(v, what="matrix") -> np.ndarray:
    if not isinstance(v, list) or not v or not all(isinstance(r, list) for r in v):
        raise ConfigError(f"{what} must be a list of rows")
    m = np.array([[_complex(x, what) for x in row] for row in v])
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ConfigError(f"{what} must be square")
    return m


def _vector(v, what="vector") -> np.ndarray:
    if not isinstance(v, list) or not v:
        raise ConfigError(f"{what} must be a non-empty list")
    return np.array([_complex(x, what) for x in v])


def _positive(cfg, key, default=None, kind=float):
    val = cfg.get(key, default)
    if val is None:
        raise ConfigError(f"missing '{key}'")
    try:
        val = kind(val)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"'{key}' must be a number") from exc
    if not val > 0:
        raise ConfigError(f"'{key}' must be positive, got {val}")
    return val


def _params(cfg) -> twolevel.TwoLevelParams:
    if not isinstance(cfg, dict):
        raise ConfigError("'params' must be an object")
    names = ("w1", "w2", "e1", "e2", "d1", "d2")
    unknown = set(cfg) - set(names)
    if unknown:
        raise ConfigError(f"unknown two-level parameters {sorted(unknown)}")
    if "w1" not in cfg or "w2" not in cfg:
        raise ConfigError("two-level parameters need w1 and w2")
    return twolevel.TwoLevelParams(**{k: _complex(cfg[k], k) for k in names if k in cfg})


def family_from_config(spec) -> MatrixFamily:
    """Build a family from ``{"type": ...}``: matrix, twolevel or a named model."""
    if not isinstance(spec, dict) or "type" not in spec:
        raise ConfigError("'family' must be an object with a 'type'")
    kind = spec["type"]
    try:
        if kind == "matrix":
            H0 = _matrix(spec.get("H0"), "H0")
            gens = spec.get("generators", [spec.get("V")] if "V" in spec else None)
            if not gens:
                raise ConfigError("matrix family needs 'V' or 'generators'")
            gens = tuple(_matrix(g, "generator") for g in gens)
            if any(g.shape != H0.shape for g in gens):
                raise ConfigError("generator and H0 dimensions differ")
            return MatrixFamily(H0, gens, "matrix")
        if kind == "twolevel":
            return _params(spec.get("params", {})).family()
        if kind == "canonical_dimer":
            return twolevel.TwoLevelParams.canonical_dimer().family()
        if kind == "open_dimer":
            return response.open_dimer().family()
        if kind == "lipkin":
            model = models.lipkin(int(spec.get("N", 2)))
            block = spec.get("block")
            if block is None:
                return model.family
            if block not in model.blocks:
                raise ConfigError(f"unknown Lipkin block {block!r}")
            return model.blocks[block]
        if kind == "pt_dimer":
            return models.pt_dimer(_positive(spec, "kappa", 1.0))
        if kind == "rpa":
            return models.rpa_block(_positive(spec, "a", 1.0))
        if kind == "ep3":
            eps = float(spec.get("eps", 0.0))
            if eps < 0:
                raise ConfigError("'eps' must be non-negative")
            return models.ep3_family(eps)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    raise ConfigError(f"unknown family type {kind!r}")


def region_from_config(cfg) -> finder.SearchRegion:
    if not isinstance(cfg, dict):
        raise ConfigError("'region' must be an object")
    try:
        re_ = tuple(float(x) for x in cfg["re"])
        im_ = tuple(float(x) for x in cfg["im"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError("region needs 're' and 'im' intervals") from exc
    if len(re_) != 2 or len(im_) != 2:
        raise ConfigError("region intervals need two endpoints")
    kw = {k: _positive(cfg, k) for k in ("step", "tol", "dedup") if k in cfg}
    try:
        return finder.SearchRegion(re_, im_, **kw)
    except EpcoreError as exc:
        raise ConfigError(str(exc)) from exc


def _grid(cfg, what):
    if isinstance(cfg, list):
        return np.array([float(x) for x in cfg])
    if isinstance(cfg, dict):
        try:
            num = int(cfg["num"])
            start, stop = float(cfg["start"]), float(cfg["stop"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"{what} needs start, stop and num") from exc
        if num < 2 or not stop > start:
            raise ConfigError(f"{what} must have num >= 2 and stop > start")
        return np.linspace(start, stop, num)
    raise ConfigError(f"{what} must be a list or a start/stop/num object")


# -- records ------------------------------------------------------------------------

def _ep_record(ep: finder.ExceptionalPoint, **extra) -> dict:
    rec = dict(extra)
    rec.update(lam=ep.lam, E=complex(ep.energy), order=ep.order, kind=ep.kind,
               levels=";".join(str(i) for i in ep.level_indices),
               exponent=float(ep.exponent), defect_overlap=float(ep.defect_overlap),
               residual=float(ep.residual))
    if ep.block is not None:
        rec["block"] = ep.block
    return rec


def _run_twolevel(cfg, workers):
    p = _params(cfg.get("params", {"w1": 1.0, "w2": 0.0}))
    branch = int(cfg.get("branch", 1))
    if branch not in (1, -1):
        raise ConfigError("'branch' must be 1 or -1")
    eps = twolevel.ep_locations(p, branch)
    vecs = twolevel.ep_eigenvectors(p, branch)
    fam = p.family()
    records = []
    for which, lam, E in ((1, eps.lam1, eps.E1), (2, eps.lam2, eps.E2)):
        phi, phit = vecs[which - 1], vecs[which + 1]
        H = p.matrix(lam)
        e1, e2 = twolevel.energies(p, lam)
        rec = {"row": "ep", "which": which, "lam": lam, "E": E, "E_plus": e1, "E_minus": e2,
               "disc_abs": abs(linalg.char_discriminant(fam, lam)),
               "phi_0": phi[0], "phi_1": phi[1], "phit_0": phit[0], "phit_1": phit[1],
               "self_overlap": abs(phit @ phi),
               "eig_residual": float(np.abs(linalg.eig(H).eigenvalues - E).max())}
        try:
            S, _ = twolevel.jordan_at_ep(p, which, branch)
            J = np.array([[E, 1], [0, E]])
            rec["jordan_error"] = float(np.abs(S @ J @ np.linalg.inv(S) - H).max())
        except EpcoreError:
            rec["jordan_error"] = float("nan")
        Eprobe = E + 0.5
        G = twolevel.greens_2x2(p, lam, Eprobe)
        N = H - E * np.eye(2)
        rec["pole_error"] = float(np.abs(G - np.eye(2) / (Eprobe - E) - N / (Eprobe - E) ** 2).max())
        records.append(rec)
    for lam in cfg.get("lambdas", []):
        lam = _complex(lam, "lambdas")
        e1, e2 = twolevel.energies(p, lam)
        records.append({"row": "energy", "lam": lam, "E_plus": e1, "E_minus": e2})
    return {"branch": branch, "root": eps.root}, records


def _run_census(cfg, workers):
    fam = family_from_config(cfg.get("family"))
    region = region_from_config(cfg.get("region"))
    eps = finder.census(fam, region, workers=workers, deflate=bool(cfg.get("deflate", True)))
    return {"count": len(eps)}, [_ep_record(e) for e in eps]


def _ep_near(fam, center):
    return finder.refine_ep(fam, center, max_radius=0.5)


def _run_encircle(cfg, workers):
    fam = family_from_config(cfg.get("family"))
    center = _complex(cfg.get("center"), "center")
    radius = _positive(cfg, "radius")
    samples = int(cfg.get("samples", 64))
    loops = int(cfg.get("loops", 1))
    if loops < 1 or samples < 16:
        raise ConfigError("'loops' must be >= 1 and 'samples' >= 16")
    records = []
    meta = {}
    if cfg.get("verify", True):
        ep = _ep_near(fam, center)
        rep = monodromy.verify_cycle(fam, ep, radius, samples=samples)
        for orient, got, want in (("ccw", rep.ccw, rep.expected_ccw),
                                  ("cw", rep.cw, rep.expected_cw)):
            for k in range(min(loops, 4)):
                basis = monodromy.CCW_PATTERN[k][1] if orient == "ccw" else monodromy.CW_PATTERN[k][1]
                records.append({"orientation": orient, "turns": k + 1, "basis": basis,
                                "factor": got[k], "expected": want[k]})
        meta = {"ep": ep.lam, "levels": list(rep.levels), "cycle_error": rep.error,
                "frame_determinant": rep.frame_determinant}
    else:
        orient = cfg.get("orientation", "ccw")
        for k in range(1, loops + 1):
            res = monodromy.track_loop(
                fam, monodromy.LoopPath(center, radius, orient, samples, k))
            for lvl, (dest, f) in enumerate(zip(res.permutation, res.end_factors)):
                records.append({"orientation": orient, "turns": k, "level": res.levels[lvl],
                                "ends_on": dest, "factor": f, "samples": res.samples_used})
    return meta, records


def _run_exponents(cfg, workers):
    fam = family_from_config(cfg.get("family"))
    seeds = cfg.get("seeds") or [cfg.get("seed")]
    if seeds == [None]:
        raise ConfigError("exponents needs 'seed' or 'seeds'")
    records = []
    for s in seeds:
        ep = finder.refine_ep(fam, _complex(s, "seed"), max_radius=0.5)
        fit = monodromy.exponent_fit(fam, ep)
        records.append(_ep_record(ep, gap_exponent=fit.gap_exponent,
                                  component_exponent=fit.component_exponent))
    return {}, records


def _run_response(cfg, workers):
    mode = cfg.get("mode", "lineshape")
    spec = cfg.get("family", {"type": "open_dimer"})
    fam = family_from_config(spec)
    if "lam" in cfg:
        lam = _complex(cfg["lam"], "lam")
    elif spec.get("type") == "open_dimer":
        lam = response.open_dimer_ep()[0]
    else:
        raise ConfigError("'lam' is required")
    if mode == "lineshape":
        i_vec = _vector(cfg.get("i", [1, 0]), "i")
        f_vec = _vector(cfg.get("f", [1, 0]), "f")
        if len(i_vec) != fam.dim or len(f_vec) != fam.dim:
            raise ConfigError("channel vectors must match the family dimension")
        grid = _grid(cfg.get("E_grid", {"start": -3, "stop": 3, "num": 601}), "E_grid")
        shape = response.cross_section(fam, lam, i_vec, f_vec, grid)
        fit = response.lorentz_fit(shape)
        return ({"lam": lam, "lorentz_center": fit.center, "lorentz_width": fit.width,
                 "lorentz_amplitude": fit.amplitude, "lorentz_residual": fit.residual},
                [{"E": float(E), "sigma": float(v)} for E, v in zip(shape.E_grid, shape.values)])
    if mode == "propagate":
        psi0 = _vector(cfg.get("psi0", [1] + [0] * (fam.dim - 1)), "psi0")
        if len(psi0) != fam.dim:
            raise ConfigError("psi0 must match the family dimension")
        times = _grid(cfg.get("times", {"start": 0, "stop": 10, "num": 101}), "times")
        if np.any(times < 0):
            raise ConfigError("times must be non-negative")
        H = fam(lam)
        records = []
        for t in times:
            psi = response.propagate(H, psi0, float(t))
            rec = {"t": float(t), "norm": float(np.linalg.norm(psi))}
            rec.update({f"psi_{k}": complex(x) for k, x in enumerate(psi)})
            records.append(rec)
        return {"lam": lam}, records
    if mode == "poles":
        ep = finder.refine_ep(fam, lam, max_radius=0.5)
        dec = response.pole_decomposition(fam, ep)
        G = response.greens(fam, ep.lam, ep.energy + 1.0)
        err = float(np.abs(dec.reconstruct(ep.energy + 1.0) - G).max())
        records = [{"i": i, "j": j, "P": complex(dec.first_order[i, j]),
                    "N": complex(dec.second_order[i, j])}
                   for i in range(fam.dim) for j in range(fam.dim)]
        return {"lam": ep.lam, "E": complex(ep.energy), "reconstruction_error": err}, records
    raise ConfigError(f"unknown response mode {mode!r}")


def _run_lipkin(cfg, workers):
    Ns = cfg.get("N", [8])
    Ns = Ns if isinstance(Ns, list) else [Ns]
    region = region_from_config(cfg["region"]) if "region" in cfg else models.lipkin_region(
        _positive(cfg, "step", 0.01))
    records, meta = [], {}
    for N in Ns:
        try:
            models.lipkin(int(N))
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        eps = models.lipkin_census(int(N), region, workers=workers)
        pts = [e.lam for e in eps]
        meta[f"N{N}"] = {"count": len(eps),
                         "closure_defect": models.quartet_closure_defect(pts),
                         "min_distance_to_1": min((abs(p - 1) for p in pts), default=None)}
        records.extend(_ep_record(e, N=int(N)) for e in eps)
    return meta, records


def _run_metric(cfg, workers):
    kappa = _positive(cfg, "kappa", 1.0)
    fam = models.pt_dimer(kappa)
    gammas = cfg.get("gammas", [0.5, 0.9, 0.99, 0.999])
    records = []
    for g in gammas:
        g = float(g)
        rec = {"gamma": g}
        try:
            res = models.quasi_metric(fam(g))
            rec.update(status="ok", condition=res.condition,
                       intertwining=res.intertwining_residual,
                       hermiticity=res.hermiticity_residual)
        except EpcoreError as exc:
            rec.update(status=exc.code, condition=float(getattr(exc, "condition", np.nan)),
                       intertwining=float("nan"), hermiticity=float("nan"))
        records.append(rec)
    gamma_c, ep = models.symmetry_breaking_threshold(kappa)
    return {"kappa": kappa, "threshold": gamma_c, "threshold_kind": ep.kind,
            "threshold_order": ep.order}, records


def _run_ep3(cfg, workers):
    eps_list = [float(e) for e in cfg.get("eps", [1e-3, 1e-4, 1e-5])]
    if any(e <= 0 for e in eps_list):
        raise ConfigError("'eps' values must be positive")
    records = []
    for e in eps_list:
        found = models.ep3_sprouting(e)
        sep = abs(found[0].lam - found[1].lam) if len(found) == 2 else float("nan")
        records.extend(_ep_record(ep, eps=e, count=len(found), separation=sep) for ep in found)
    meta = {}
    if cfg.get("certify", True):
        ep3 = finder.find_epn(models.ep3_two_parameter(), (0.0, 0.0), 3)
        _, chain = finder.jordan_chain_length(models.ep3_family(0.0)(0.0))
        meta = {"ep3_order": ep3.order, "ep3_exponent": ep3.exponent, "ep3_chain": chain}
    return meta, records


RUNNERS = {
    "twolevel": _run_twolevel, "census": _run_census, "encircle": _run_encircle,
    "exponents": _run_exponents, "response": _run_response, "lipkin": _run_lipkin,
    "metric": _run_metric, "ep3": _run_ep3,
}


def run(subcommand: str, config: dict, workers: int = 1):
    """Execute one experiment; returns ``(metadata, records)``."""
    if subcommand not in RUNNERS:
        raise ConfigError(f"unknown subcommand {subcommand!r}")
    if not isinstance(config, dict):
        raise ConfigError("config must be a JSON object")
    return RUNNERS[subcommand](config, workers)


# -- serialization ------------------------------------------------------------------

def _flatten(rec: dict) -> dict:
    out = {}
    for k, v in rec.items():
        if isinstance(v, (complex, np.complexfloating)):
            out[f"{k}_re"] = float(v.real)
            out[f"{k}_im"] = float(v.imag)
        elif isinstance(v, np.floating):
            out[k] = float(v)
        elif isinstance(v, np.integer):
            out[k] = int(v)
        else:
            out[k] = v
    return out


def _jsonable(v):
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in _flatten(v).items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, (complex, np.complexfloating)):
        return {"re": float(v.real), "im": float(v.imag)}
    if isinstance(v, np.generic):
        return v.item()
    if isinstance(v, float) and not np.isfinite(v):
        return str(v)
    return v


def _fmt(v) -> str:
    if isinstance(v, float):
        return format(v, ".17g")
    return "" if v is None else str(v)


def to_csv(metadata: dict, records: list) -> str:
    rows = [_flatten(r) for r in records]
    header = []
    for r in rows:
        header.extend(k for k in r if k not in header)
    buf = io.StringIO()
    buf.write("# " + json.dumps(_jsonable(metadata), sort_keys=True) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(r.get(k)) for k in header])
    return buf.getvalue()


def to_json(metadata: dict, records: list) -> str:
    doc = {"metadata": _jsonable(metadata), "records": [_jsonable(r) for r in records]}
    return json.dumps(doc, indent=1, sort_keys=True) + "\n"


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="epcore", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="subcommand", required=True)
    for name in RUNNERS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="JSON experiment file")
        p.add_argument("--out", help="output path (default: stdout)")
        p.add_argument("--workers", type=int, default=1)
        p.add_argument("--format", choices=("csv", "json"), default="csv")
    return ap


def _fail(status: int, code: str, message: str) -> int:
    print(json.dumps({"error": code, "message": message}), file=sys.stderr)
    return status


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.workers < 1:
        return _fail(2, "config_error", "--workers must be at least 1")
    try:
        raw = Path(args.config).read_text()
    except OSError as exc:
        return _fail(2, "config_error", f"cannot read config: {exc}")
    try:
        config = json.loads(raw)
    except json.JSONDecodeError as exc:
        return _fail(2, "config_error", f"invalid JSON: {exc}")
    t0 = time.perf_counter()
    try:
        meta, records = run(args.subcommand, config, args.workers)
    except ConfigError as exc:
        return _fail(2, exc.code, str(exc))
    except EpcoreError as exc:
        return _fail(1, exc.code, str(exc))
    metadata = {"tool": "epcore", "version": __version__, "subcommand": args.subcommand,
                "config_sha256": hashlib.sha256(raw.encode()).hexdigest(),
                "wall_time": round(time.perf_counter() - t0, 6), "results": meta}
    text = to_csv(metadata, records) if args.format == "csv" else to_json(metadata, records)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
