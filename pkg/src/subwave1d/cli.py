"""Command-line entry point.

Every subcommand reads an optional JSON config (``--config``) whose keys are
the long option names with dashes replaced by underscores; flags given on the
command line override the file.  Complex numbers are written ``a+bi`` in flags
and ``[re, im]`` in files.  Exit codes: 0 success, 2 invalid input, 3 numerical
failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from .capacitance import approximate_mode_finite, band_structure
from .edge import (
    alpha_independent_eigenvalue,
    finite_spectrum,
    predict_edge_mode,
    stability_study,
)
from .errors import (
    ConsistencyError,
    ConvergenceError,
    DegenerateBandError,
    SingularDtnError,
    UnsupportedConfigurationError,
    ValidationError,
)
from .geometry import (
    FiniteChain,
    Materials,
    UnitCell,
    build_geometric_defect,
    build_material_defect,
    cell_from_descriptor,
    effective_sound_speed,
    parse_complex,
)
from .resonances import NonlinearSystem, find_resonances
from .topology import zak_hermitian, zak_nonhermitian, zak_path_integral

EXIT_OK, EXIT_INVALID, EXIT_NUMERICAL = 0, 2, 3

COMMANDS = ("bands", "zak", "exact", "finite-spectrum", "edge-predict", "stability", "mode",
            "effective-speed")


class CliError(Exception):
    def __init__(self, message, code=EXIT_INVALID):
        super().__init__(message)
        self.code = code


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CliError(f"{self.prog}: {message}")


def _complex_list(text) -> list[complex]:
    if isinstance(text, (list, tuple)):
        if len(text) == 2 and all(isinstance(x, (int, float)) for x in text):
            return [parse_complex(text)]
        return [parse_complex(x) for x in text]
    return [parse_complex(x) for x in str(text).split(",") if x.strip()]


def _float_list(text) -> list[float]:
    if isinstance(text, (list, tuple)):
        return [float(x) for x in text]
    return [float(x) for x in str(text).split(",") if x.strip()]


def _add_common(p):
    p.add_argument("--config", help="JSON config file; flags override its values")
    p.add_argument("--output", "-o", help="output file (default: stdout)")
    p.add_argument("--threads", type=int, help="worker cap (default: $SUBWAVE1D_THREADS or 1)")


def _add_cell(p):
    p.add_argument("--geometry", help="JSON geometry descriptor file")
    p.add_argument("--lengths", help="comma-separated resonator lengths")
    p.add_argument("--spacings", help="comma-separated spacings (last one closes the cell)")
    p.add_argument("--speeds", help="comma-separated complex speeds, e.g. 1+1.38i,1-1.42i")
    p.add_argument("--delta", type=float, help="contrast (overrides the descriptor)")


def _add_chain(p):
    p.add_argument("--chain", help="JSON finite chain: lengths, gaps, speeds, [delta]")
    p.add_argument("--defect", choices=("geometric", "material"))
    p.add_argument("--s1", type=float, help="spacing s_a (geometric) or s_1")
    p.add_argument("--s2", type=float, help="spacing s_b (geometric)")
    p.add_argument("--s", type=float, help="uniform spacing (material defect)")
    p.add_argument("--ell", type=float, help="resonator length")
    p.add_argument("--v1", help="speed v_1 (a+bi)")
    p.add_argument("--v2", help="speed v_2 (a+bi)")
    p.add_argument("--n-left", type=int, help="dimers left of the interface")
    p.add_argument("--n-right", type=int, help="dimers right of the interface")
    p.add_argument("--delta", type=float, help="contrast")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="subwave1d", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("bands", help="asymptotic band structure (CSV)")
    _add_common(p)
    _add_cell(p)
    p.add_argument("--grid", type=int, help="number of quasi-momenta (default 256)")

    p = sub.add_parser("zak", help="Zak phase of a band (JSON)")
    _add_common(p)
    _add_cell(p)
    p.add_argument("--method", choices=("wilson", "integral"))
    p.add_argument("--grid", type=int, help="Wilson grid / quadrature nodes")
    p.add_argument("--band", type=int, help="1-based band index (default 1)")
    p.add_argument("--s1", type=float)
    p.add_argument("--s2", type=float)
    p.add_argument("--v1")
    p.add_argument("--v2")
    p.add_argument("--ell", type=float)

    p = sub.add_parser("exact", help="exact resonances from the nonlinear problem (CSV)")
    _add_common(p)
    _add_cell(p)
    p.add_argument("--alpha", help="comma-separated quasi-momenta")
    p.add_argument("--grid", type=int, help="use this many Brillouin-zone samples instead")
    p.add_argument("--seeds", help="comma-separated complex seeds (default: capacitance)")

    p = sub.add_parser("finite-spectrum", help="finite-chain resonances and edge flags (CSV)")
    _add_common(p)
    _add_chain(p)

    p = sub.add_parser("edge-predict", help="closed-form interface mode (JSON)")
    _add_common(p)
    p.add_argument("--v1")
    p.add_argument("--v2")
    p.add_argument("--s1", type=float)
    p.add_argument("--ell", type=float)
    p.add_argument("--delta", type=float)

    p = sub.add_parser("stability", help="Monte-Carlo perturbation study (CSV)")
    _add_common(p)
    _add_chain(p)
    p.add_argument("--kind", choices=("geometric", "material"))
    p.add_argument("--sigma", type=float)
    p.add_argument("--samples", type=int)
    p.add_argument("--seed", type=int)

    p = sub.add_parser("mode", help="leading-order mode of a finite chain (CSV)")
    _add_common(p)
    _add_chain(p)
    p.add_argument("--index", type=int, help="mode index (default: the flagged edge mode)")
    p.add_argument("--points", type=int, help="samples per unit length (default 20)")

    p = sub.add_parser("effective-speed", help="homogenised sound speed (JSON)")
    _add_common(p)
    _add_cell(p)
    return parser


def _merge(parser, args) -> dict:
    """Config file values, overridden by flags that were given explicitly."""
    sub = parser._subparsers._group_actions[0].choices[args.command]
    dests = {a.dest for a in sub._actions if a.dest not in ("help",)}
    opts = {}
    if args.config:
        try:
            with open(args.config, encoding="utf-8") as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise CliError(f"cannot read config {args.config}: {exc}") from exc
        if not isinstance(data, dict):
            raise CliError("config must be a JSON object")
        cmd = data.pop("command", args.command)
        if cmd != args.command:
            raise CliError(f"config is for {cmd!r}, not {args.command!r}")
        unknown = sorted(set(data) - dests - {"config"})
        if unknown:
            raise CliError(f"unknown config keys for {args.command}: {unknown}")
        base = os.path.dirname(os.path.abspath(args.config))
        for key in ("geometry", "chain"):
            if isinstance(data.get(key), str) and not os.path.isabs(data[key]):
                data[key] = os.path.join(base, data[key])
        opts.update(data)
    for key, val in vars(args).items():
        if val is not None and key not in ("command", "config"):
            opts[key] = val
    return opts


def _threads(opts) -> int:
    raw = opts.get("threads")
    if raw is None:
        raw = os.environ.get("SUBWAVE1D_THREADS") or 1
    try:
        n = int(raw)
    except ValueError as exc:
        raise CliError(f"invalid thread count {raw!r}") from exc
    if n < 1:
        raise CliError("thread count must be at least 1")
    return n


def _load_json(value):
    if isinstance(value, dict):
        return value
    try:
        with open(value, encoding="utf-8") as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise CliError(f"cannot read {value}: {exc}") from exc


def _cell(opts) -> tuple[UnitCell, np.ndarray, float]:
    """``(cell, speeds, delta)`` from a descriptor or inline lists."""
    if opts.get("geometry") is not None:
        cell, mats = cell_from_descriptor(_load_json(opts["geometry"]))
        speeds, delta = mats.speeds, mats.delta
        if opts.get("delta") is not None:
            delta = float(opts["delta"])
        return cell, speeds, delta
    if opts.get("lengths") is None or opts.get("spacings") is None:
        raise CliError("give --geometry or both --lengths and --spacings")
    cell = UnitCell(_float_list(opts["lengths"]), _float_list(opts["spacings"]))
    speeds = np.array(_complex_list(opts["speeds"]) if opts.get("speeds") is not None
                      else [1.0] * cell.N, dtype=complex)
    if speeds.size != cell.N:
        raise CliError(f"{cell.N} resonators but {speeds.size} speeds")
    return cell, speeds, float(opts.get("delta", 1e-3))


def _chain(opts) -> FiniteChain:
    delta = float(opts.get("delta", 1e-3))
    if opts.get("chain") is not None:
        d = dict(_load_json(opts["chain"]))
        unknown = set(d) - {"lengths", "gaps", "speeds", "delta", "background_speed"}
        if unknown:
            raise CliError(f"unknown chain keys: {sorted(unknown)}")
        speeds = [parse_complex(v) for v in d["speeds"]]
        if opts.get("delta") is None:
            delta = float(d.get("delta", delta))
        return FiniteChain(d["lengths"], d["gaps"], speeds, delta, d.get("background_speed", 1.0))
    kind = opts.get("defect")
    nl, nr = opts.get("n_left"), opts.get("n_right")
    if kind is None or nl is None or nr is None:
        raise CliError("give --chain or --defect with --n-left and --n-right")
    ell = float(opts.get("ell", 1.0))
    if kind == "geometric":
        if opts.get("s1") is None or opts.get("s2") is None:
            raise CliError("geometric defect needs --s1 and --s2")
        speed = parse_complex(opts["v1"]) if opts.get("v1") is not None else 1.0
        return build_geometric_defect(float(opts["s1"]), float(opts["s2"]), ell, int(nl), int(nr),
                                      speed=speed, delta=delta)
    if opts.get("v1") is None or opts.get("v2") is None:
        raise CliError("material defect needs --v1 and --v2")
    s = float(opts.get("s", opts.get("s1", 1.0)))
    return build_material_defect(parse_complex(opts["v1"]), parse_complex(opts["v2"]), ell, s,
                                 int(nl), int(nr), delta=delta)


def _cmd_bands(opts):
    cell, speeds, delta = _cell(opts)
    bs = band_structure(cell, speeds, delta, cell.alpha_grid(int(opts.get("grid", 256))),
                        workers=_threads(opts))
    return bs.to_csv(), EXIT_OK


def _cmd_zak(opts):
    method = opts.get("method", "wilson")
    band = int(opts.get("band", 1))
    if method == "integral":
        for key in ("s1", "s2", "v1", "v2"):
            if opts.get(key) is None:
                raise CliError(f"--method integral needs --{key}")
        nodes = int(opts.get("grid", 4096))
        res = zak_path_integral(float(opts["s1"]), float(opts["s2"]), parse_complex(opts["v1"]),
                                parse_complex(opts["v2"]), j=band, nodes=nodes)
    else:
        if opts.get("geometry") is None and opts.get("lengths") is None:
            if opts.get("s1") is None or opts.get("s2") is None:
                raise CliError("give a geometry or --s1/--s2 for the dimer")
            ell = float(opts.get("ell", 1.0))
            opts = dict(opts, lengths=[ell, ell], spacings=[opts["s1"], opts["s2"]],
                        speeds=[parse_complex(opts.get("v1", 1.0)), parse_complex(opts.get("v2", 1.0))])
        cell, speeds, delta = _cell(opts)
        bs = band_structure(cell, speeds, delta, cell.alpha_grid(int(opts.get("grid", 512))))
        res = zak_hermitian(bs, band) if bs.hermitian else zak_nonhermitian(bs, band)
    return json.dumps(res.to_dict(), indent=2) + "\n", EXIT_OK


def _cmd_exact(opts):
    cell, speeds, delta = _cell(opts)
    mats = Materials.from_speeds(speeds, delta)
    if opts.get("alpha") is not None:
        alphas = _float_list(opts["alpha"])
    else:
        alphas = cell.alpha_grid(int(opts.get("grid", 8)))
    seeds = _complex_list(opts["seeds"]) if opts.get("seeds") is not None else None
    lines = ["alpha,seed_re,seed_im,omega_re,omega_im,residual,iters"]
    code = EXIT_OK
    for a in alphas:
        sys_ = NonlinearSystem.periodic(cell, mats, a)
        # explicit seeds are used as given; default seeds also try rotated copies
        for r in find_resonances(sys_, seeds, perturbed=seeds is None, workers=_threads(opts)):
            if not r.converged:
                code = EXIT_NUMERICAL
            lines.append(",".join([
                repr(float(a)), repr(float(r.seed.real)), repr(float(r.seed.imag)),
                repr(float(r.omega.real)), repr(float(r.omega.imag)), repr(float(r.residual)),
                str(r.iterations),
            ]))
    return "\n".join(lines) + "\n", code


def _cmd_finite(opts):
    return finite_spectrum(_chain(opts)).to_csv(), EXIT_OK


def _cmd_edge(opts):
    for key in ("v1", "v2"):
        if opts.get(key) is None:
            raise CliError(f"edge-predict needs --{key}")
    v1, v2 = parse_complex(opts["v1"]), parse_complex(opts["v2"])
    s1, ell, delta = float(opts.get("s1", 1.0)), float(opts.get("ell", 1.0)), float(opts.get("delta", 1e-3))
    pred = predict_edge_mode(v1, v2, s1, ell, delta)
    out = pred.to_dict()
    if pred.localised:
        L = 2 * (s1 + ell)
        alphas = -np.pi / L + 2 * np.pi / L * (np.arange(64) + 1) / 64
        _, spread = alpha_independent_eigenvalue(v1, v2, pred.selected_b, delta, alphas, s1, ell)
        out["alpha_spread"] = spread
    return json.dumps(out, indent=2) + "\n", EXIT_OK


def _cmd_stability(opts):
    chain = _chain(opts)
    kind = opts.get("kind") or opts.get("defect")
    if kind is None:
        raise CliError("stability needs --kind")
    table = stability_study(chain, kind, float(opts.get("sigma", 0.0)), int(opts.get("samples", 100)),
                            int(opts.get("seed", 0)), workers=_threads(opts))
    return table.to_csv(), EXIT_OK


def _cmd_mode(opts):
    chain = _chain(opts)
    rep = finite_spectrum(chain)
    if opts.get("index") is not None:
        k = int(opts["index"])
        if not 0 <= k < rep.M:
            raise CliError(f"mode index must be in 0..{rep.M - 1}")
    elif rep.flagged.size:
        k = int(rep.flagged[np.argmax(rep.scores[rep.flagged])])
    else:
        raise CliError("no flagged edge mode; pass --index")
    pts = int(opts.get("points", 20))
    x0, x1 = chain.x_left[0], chain.x_right[-1]
    x = np.linspace(x0, x1, max(2, int(np.ceil((x1 - x0) * pts)) + 1))
    u = approximate_mode_finite(chain, rep.vectors[:, k], x)
    lines = ["x,re_u,im_u,abs_u"]
    lines += [f"{xi!r},{ui.real!r},{ui.imag!r},{abs(ui)!r}" for xi, ui in zip(x.tolist(), u.tolist())]
    return "\n".join(lines) + "\n", EXIT_OK


def _cmd_speed(opts):
    if opts.get("geometry") is None:
        raise CliError("effective-speed needs --geometry")
    cell, mats = cell_from_descriptor(_load_json(opts["geometry"]))
    return json.dumps({"c": effective_sound_speed(cell, mats)}, indent=2) + "\n", EXIT_OK


HANDLERS = {
    "bands": _cmd_bands,
    "zak": _cmd_zak,
    "exact": _cmd_exact,
    "finite-spectrum": _cmd_finite,
    "edge-predict": _cmd_edge,
    "stability": _cmd_stability,
    "mode": _cmd_mode,
    "effective-speed": _cmd_speed,
}


def run(argv=None, stdout=None) -> int:
    """Parse ``argv``, run the command and return the exit code."""
    stdout = sys.stdout if stdout is None else stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        opts = _merge(parser, args)
        _threads(opts)  # validate for every command, even those that run serially
        text, code = HANDLERS[args.command](opts)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except (ValidationError, UnsupportedConfigurationError, SingularDtnError,
            DegenerateBandError, KeyError, TypeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (ConvergenceError, ConsistencyError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    out = opts.get("output")
    if out:
        with open(out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        try:
            stdout.write(text)
            stdout.flush()
        except BrokenPipeError:
            # reader went away (e.g. piped into head); silence the flush at exit
            os.dup2(os.open(os.devnull, os.O_WRONLY), sys.stdout.fileno())
    return code


def main(argv=None) -> None:
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
