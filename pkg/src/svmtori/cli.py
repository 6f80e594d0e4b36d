"""Command-line front end: reproducible CSV/OBJ/JSON artifacts.

Every artifact is either accompanied by a sidecar <out>.manifest.json (CSV,
OBJ) or embeds its manifest under the "manifest" key (JSON), capturing the
subcommand, the full parameter set, the seed, and the tool version.  Floats
are printed with 17 significant digits so reruns are byte-identical.

Exit codes: 0 ok, 2 usage/domain error, 3 numerical failure.  Logs go to
standard error; `--out -` streams the artifact to standard output.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict, dataclass

import numpy as np

from . import __version__, embedding, lattice_spectral, net_mc, pendulum, robin, svm_pde


def _fmt(v) -> str:
    return format(float(v), ".17g")


def parse_values(text: str) -> list[float]:
    """One float, a comma list, or an inclusive start:stop:step range."""
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ValueError(f"range must be start:stop:step, got {text!r}")
        start, stop, step = (float(p) for p in parts)
        if step <= 0.0 or stop < start:
            raise ValueError(f"range needs step > 0 and stop >= start, got {text!r}")
        n = int(np.floor((stop - start) / step + 1e-9)) + 1
        return [start + i * step for i in range(n)]
    if "," in text:
        return [float(p) for p in text.split(",")]
    return [float(text)]


def _parse_point(text: str, n: int | None = None) -> tuple[float, ...]:
    q = tuple(float(p) for p in text.split(","))
    if n is not None and len(q) != n:
        raise ValueError(f"expected {n} comma-separated coordinates, got {text!r}")
    return q


# ---------------------------------------------------------------------------
# manifests and artifact writing

@dataclass
class RunManifest:
    subcommand: str
    parameters: dict
    seed: int | None
    version: str
    outputs: list


def _manifest_for(args: argparse.Namespace, outputs: list) -> RunManifest:
    params = {
        k: v for k, v in sorted(vars(args).items())
        if k not in ("func", "subcommand") and not k.startswith("_")
    }
    return RunManifest(
        subcommand=args.subcommand,
        parameters=params,
        seed=params.get("seed"),
        version=__version__,
        outputs=outputs,
    )


def _emit(text: str, out: str | None, manifest: RunManifest) -> None:
    """Write an artifact; file targets get a .manifest.json sidecar."""
    if out is None or out == "-":
        sys.stdout.write(text)
        return
    with open(out, "w") as fh:
        fh.write(text)
    manifest.outputs = [out]
    with open(out + ".manifest.json", "w") as fh:
        fh.write(json.dumps(asdict(manifest), indent=2, sort_keys=True) + "\n")
    print(f"wrote {out}", file=sys.stderr)


def _emit_json(payload: dict, out: str | None, manifest: RunManifest) -> None:
    """JSON artifacts embed their manifest instead of using a sidecar."""
    target = None if out in (None, "-", "json") else out
    manifest.outputs = [target] if target else []
    payload = {**payload, "manifest": asdict(manifest)}
    text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    if target is None:
        sys.stdout.write(text)
    else:
        with open(target, "w") as fh:
            fh.write(text)
        print(f"wrote {target}", file=sys.stderr)


def _csv(header: str, rows) -> str:
    lines = [header]
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# subcommands

def cmd_period(args) -> int:
    rows = []
    for e in parse_values(args.E):
        if e <= 0.0:
            raise ValueError(f"period needs E > 0, got {e}")
        rows.append((e, pendulum.period(e), pendulum.action(e)))
    _emit(_csv("E,T,I", rows), args.out, _manifest_for(args, []))
    return 0


def cmd_orbit(args) -> int:
    orbit = pendulum.solve_orbit(args.a, args.n)
    rows = zip(orbit.x, orbit.f, orbit.p, orbit.ef)
    _emit(_csv("x,f,p,ef", rows), args.out, _manifest_for(args, []))
    return 0


def cmd_robin(args) -> int:
    picked = [k for k in ("flat", "rect", "sphere", "okikiolu") if getattr(args, k)]
    if len(picked) != 1:
        raise ValueError("choose exactly one of --flat/--rect/--sphere/--okikiolu")
    mode = picked[0]
    if mode == "flat":
        if args.a is None:
            raise ValueError("--flat needs --a")
        value = robin.robin_flat(args.a)
        label, prov = f"R0(flat2, a={args.a:g})", "dedekind-eta-q-series"
    elif mode == "rect":
        if args.sides is None:
            raise ValueError("--rect needs --sides L1,L2")
        l1, l2 = _parse_point(args.sides, 2)
        value = robin.robin_flat_rect(l1, l2)
        label, prov = f"R0(rect, {l1:g}x{l2:g})", "dedekind-eta-q-series+scaling"
    elif mode == "sphere":
        value = robin.robin_sphere()
        label, prov = "R_S(round sphere, area 1)", "closed-form -(1+log(pi))/(4*pi)"
    else:
        if args.a is None:
            raise ValueError("--okikiolu needs --a")
        value = robin.robin_okikiolu(args.a, args.n)
        label, prov = f"R1(okikiolu, a={args.a:g})", "eta-q-series+action-route-difference"
    _emit(f"{label} = {_fmt(value)}  method={prov}\n", args.out,
          _manifest_for(args, []))
    return 0


def cmd_figure2(args) -> int:
    grid = parse_values(args.a)
    reports = robin.figure2_table(grid, args.n)
    rows = [
        (r.a, r.E, r.T, r.I, r.R0, r.diff_quadrature, r.diff_energy,
         r.diff_action, r.R1)
        for r in reports
    ]
    _emit(_csv("a,E,T,I,R0,diff_quad,diff_energy,diff_action,R1", rows),
          args.out, _manifest_for(args, []))
    return 0


def cmd_embed(args) -> int:
    if args.k < 1:
        raise ValueError("--k must be a positive integer")
    orbit = pendulum.solve_orbit(args.a / args.k, args.samples)
    if args.k > 1:
        orbit = pendulum.tile_orbit(orbit, args.k)
    curve = embedding.generator_curve(orbit)
    fmt = args.format
    if fmt is None:
        fmt = "csv" if (args.out or "").endswith(".csv") else "obj"
    if fmt == "csv":
        rows = zip(curve.x, curve.X, curve.F)
        _emit(_csv("x,X,F", rows), args.out, _manifest_for(args, []))
        return 0
    m = embedding.mesh(curve, args.n_angular)
    lines = [f"v {_fmt(v[0])} {_fmt(v[1])} {_fmt(v[2])}" for v in m.vertices]
    lines += [f"f {t[0] + 1} {t[1] + 1} {t[2] + 1}" for t in m.faces]
    _emit("\n".join(lines) + "\n", args.out, _manifest_for(args, []))
    return 0


def cmd_spectral(args) -> int:
    sides = _parse_point(args.sides)
    torus = lattice_spectral.FlatTorus(sides)
    report = lattice_spectral.robin_report(torus)
    _emit_json(report, args.out, _manifest_for(args, []))
    return 0


def cmd_pde(args) -> int:
    field = svm_pde.solve_branch(args.a, nx=args.nx, ny=args.ny, tol=args.tol)
    # one polish solve from the converged field gives an honest iteration log
    trace: list = []
    field = svm_pde.solve(args.a, init=field, nx=args.nx, ny=args.ny,
                          tol=args.tol, trace=trace)
    for it, rnorm, step in trace:
        print(f"iter {it} residual {rnorm:.6e} step {step:g}", file=sys.stderr)
    x, y, vals = field.x, field.y, field.values
    lines = ["i,j,x,y,f"]
    for i in range(field.nx):
        for j in range(field.ny):
            lines.append(f"{i},{j},{_fmt(x[i])},{_fmt(y[j])},{_fmt(vals[i, j])}")
    _emit("\n".join(lines) + "\n", args.out, _manifest_for(args, []))
    return 0


def cmd_net(args) -> int:
    active = net_mc.apply_thread_cap()
    print(f"threads: {active}", file=sys.stderr)
    q = _parse_point(args.q)
    dt = args.dt if args.dt == "auto" else float(args.dt)
    cfg = net_mc.NetConfig(
        manifold=args.manifold, eps=args.eps, walkers=args.walkers,
        seed=args.seed, q=q, nu=args.nu, dt=dt, max_steps=args.max_steps,
    )
    res = net_mc.average_net(cfg)
    theory = net_mc.theory_average(cfg)
    z = (res.mean - theory) / res.stderr if res.stderr > 0 else float("nan")
    print(f"wall clock: {res.wall_clock_s:.1f} s", file=sys.stderr)
    payload = {
        "mean": res.mean,
        "stderr": res.stderr,
        "walkers": res.walkers,
        "censored": res.censored,
        "theory": theory,
        "z_score": z,
    }
    _emit_json(payload, args.out, _manifest_for(args, []))
    return 0


# ---------------------------------------------------------------------------
# parser

class _Parser(argparse.ArgumentParser):
    def error(self, message):  # single-line machine-parsable usage errors
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(2)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="svmtori",
                description="steady-vortex tori: periods, Robin functions, "
                            "embeddings, PDE branches, narrow-escape MC")
    sub = p.add_subparsers(dest="subcommand", required=True)

    q = sub.add_parser("period", help="period/action table over an energy range")
    q.add_argument("--E", required=True, help="energy: value, list, or start:stop:step")
    q.add_argument("--out", default=None)
    q.set_defaults(func=cmd_period)

    q = sub.add_parser("orbit", help="one steady-vortex conformal profile")
    q.add_argument("--a", type=float, required=True)
    q.add_argument("--n", type=int, default=4096)
    q.add_argument("--out", default=None)
    q.set_defaults(func=cmd_orbit)

    q = sub.add_parser("robin", help="Robin constants (flat, rectangle, sphere, okikiolu)")
    q.add_argument("--flat", action="store_true")
    q.add_argument("--rect", action="store_true")
    q.add_argument("--sphere", action="store_true")
    q.add_argument("--okikiolu", action="store_true")
    q.add_argument("--a", type=float, default=None)
    q.add_argument("--sides", default=None, help="L1,L2 for --rect")
    q.add_argument("--n", type=int, default=4096)
    q.add_argument("--out", default=None)
    q.set_defaults(func=cmd_robin)

    q = sub.add_parser("figure2", help="R1-R0 comparison table over aspect ratios")
    q.add_argument("--a", required=True, help="aspects: value, list, or start:stop:step")
    q.add_argument("--n", type=int, default=4096)
    q.add_argument("--out", default=None)
    q.set_defaults(func=cmd_figure2)

    q = sub.add_parser("embed", help="surface-of-revolution mesh (OBJ) or generator CSV")
    q.add_argument("--a", type=float, required=True)
    q.add_argument("--k", type=int, default=1, help="oscillations along the axis")
    q.add_argument("--samples", type=int, default=256)
    q.add_argument("--n-angular", type=int, default=64)
    q.add_argument("--format", choices=("obj", "csv"), default=None)
    q.add_argument("--out", default=None)
    q.set_defaults(func=cmd_embed)

    q = sub.add_parser("spectral", help="flat-torus Robin constant by three routes")
    q.add_argument("--sides", required=True, help="L1,L2 or L1,L2,L3")
    q.add_argument("--out", default=None)
    q.set_defaults(func=cmd_spectral)

    q = sub.add_parser("pde", help="nontrivial steady-vortex branch of the metric PDE")
    q.add_argument("--a", type=float, required=True)
    q.add_argument("--nx", type=int, default=128)
    q.add_argument("--ny", type=int, default=16)
    q.add_argument("--tol", type=float, default=1e-10)
    q.add_argument("--out", default=None)
    q.set_defaults(func=cmd_pde)

    q = sub.add_parser("net", help="narrow-escape Monte Carlo vs closed-form theory")
    q.add_argument("--manifold", required=True,
                   help="flat2:a=A | flat3:L1,L2,L3 | okikiolu:a=A")
    q.add_argument("--eps", type=float, required=True)
    q.add_argument("--walkers", type=int, required=True)
    q.add_argument("--seed", type=int, default=42)
    q.add_argument("--q", required=True, help="window center, comma-separated")
    q.add_argument("--nu", type=float, default=1.0)
    q.add_argument("--dt", default="auto")
    q.add_argument("--max-steps", type=int, default=None)
    q.add_argument("--out", default=None, help="json | - | path")
    q.set_defaults(func=cmd_net)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except SystemExit as e:
        return int(e.code or 0)
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except ArithmeticError as e:
        print(f"numerical failure: {e}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    raise SystemExit(main())
