"""Command-line front end: ``feynman-dirichlet <subcommand> --config FILE``.

Exit status is 0 when every check of the subcommand passes, 1 when a check
or a computation fails, and 2 for configuration errors.
"""

from __future__ import annotations

import argparse
import csv
import sys
from importlib import metadata
from pathlib import Path

import numpy as np

from .chernoff import IterationPlan, chernoff_run, convergence_table
from .config import ExperimentConfig
from .errors import ConfigError, FeynmanError, InvariantFailure
from .extension import build_extension
from .feynman import consistency_residual, grid_step, interior_probes
from .geometry import CutoffFamily, Interval, boundary_charts
from .operator import check_boundary_membership, validate
from .oracles import McConfig, analytic_heat, crank_nicolson, feynman_kac_estimate
from .sampled import Grid

SUBCOMMANDS = ("validate", "consistency", "converge", "extend-demo", "mc-compare")


def software_version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "0+unknown"


class Context:
    """Parsed config plus the objects every subcommand needs."""

    def __init__(self, cfg: ExperimentConfig, out: Path, seed: int, threads: int, harness_seed: int | None = None):
        self.cfg, self.out, self.seed, self.threads = cfg, out, seed, threads
        self.domain = cfg.build_domain()
        self.op = cfg.build_operator(self.domain)
        # --seed overrides initial.seed for harness data
        self.u0 = cfg.build_initial(self.op, self.domain, harness_seed)

    def extension(self):
        d = self.cfg.discretization
        return build_extension(self.op, self.domain, d.collar_cap, d.n_charts)

    def write_csv(self, name: str, header: list[str], rows) -> Path:
        self.out.mkdir(parents=True, exist_ok=True)
        path = self.out / name
        with path.open("w", newline="") as fh:
            fh.write(f"# config_sha256={self.cfg.digest()} seed={self.seed} version={software_version()}\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for row in rows:
                w.writerow([_fmt(v) for v in row])
        return path


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _scalar(v) -> float:
    return float(np.asarray(v).reshape(-1)[0])


def _beta_tag(beta: float) -> str:
    return f"{beta:g}".replace(".", "p")


def _analytic_reference(ctx: Context):
    """Closed-form solution when the problem is the sine-series heat equation."""
    dom, op, init = ctx.domain, ctx.op, ctx.cfg.initial
    if not isinstance(dom, Interval) or init.get("kind") not in ("sine", "zero"):
        return None
    A, b, c = op.coefficients(dom.interior_samples(dom.length / 200))
    if np.ptp(A) > 0 or np.abs(b).max() > 0 or np.ptp(c) > 0:
        return None
    coeffs = init.get("coefficients", [1.0]) if init.get("kind") == "sine" else [0.0]
    a0, c0 = float(A[0, 0, 0]), float(c[0])
    return lambda t, x: analytic_heat(dom, coeffs, t, x, a0, c0)


def _cn_reference(ctx: Context, t: float):
    if not isinstance(ctx.domain, Interval):
        return None
    cells = int(np.ceil(ctx.domain.length / 1e-3))
    steps = max(int(round(t / 1e-4)), 1)
    return crank_nicolson(ctx.op, ctx.domain, ctx.u0.value, t, steps, cells)


# ---------------------------------------------------------------------------
# subcommands


def cmd_validate(ctx: Context) -> int:
    dom, op = ctx.domain, ctx.op
    rows = []

    def check(name, fn):
        try:
            detail = fn()
        except (FeynmanError, ValueError) as exc:
            raise InvariantFailure(name, exc) from exc
        rows.append((name, True, detail))
        print(f"PASS {name}: {detail}")

    def operator_check():
        rep = validate(op, dom.interior_samples(dom.diameter / 200))
        return f"min_eig={rep.min_eig:.6g} symmetry_defect={rep.symmetry_defect:.3g} sup={rep.coefficient_sup:.6g}"

    def chart_check():
        rng = np.random.default_rng(ctx.seed)
        worst = 0.0
        for ch in boundary_charts(dom, ctx.cfg.discretization.n_charts):
            z = ch.sample_U(1000, rng, upper=True)
            worst = max(worst, float(np.abs(ch.psi_inverse(ch.psi(z)) - z).max()))
            inside = z[z[:, -1] > 1e-9]
            if np.any(np.asarray(dom.signed_distance(ch.psi(inside))) <= 0):
                raise ValueError("chart maps upper half space points outside the domain")
            flat = inside.copy()
            flat[:, -1] = 0.0
            if np.abs(dom.signed_distance(ch.psi(flat))).max() > 1e-10:
                raise ValueError("chart does not map the flat face onto the boundary")
            if np.abs(np.linalg.det(ch.jacobian(z))).min() < 1e-8:
                raise ValueError("chart Jacobian is singular")
            if worst > 1e-10:
                raise ValueError(f"chart round trip error {worst:.3g}")
        return f"round_trip_error={worst:.3g}"

    def cutoff_check():
        xb = dom.boundary_samples(64)
        for beta in ctx.cfg.cutoff_betas:
            fam = CutoffFamily(beta)
            for t in (1e-1, 1e-2, 1e-3):
                if np.abs(fam(dom, t, xb)).max() != 0.0:
                    raise ValueError(f"cutoff nonzero on the boundary (beta={beta}, t={t})")
        return f"betas={list(ctx.cfg.cutoff_betas)}"

    state = {}

    def extension_check():
        E = ctx.extension()
        state["E"] = E
        inner = dom.interior_samples(dom.diameter / 100)
        s = E.partition.weights(inner).sum(axis=1)
        if np.abs(s - 1).max() > 1e-12:
            raise ValueError("partition of unity does not sum to one inside the domain")
        lo, hi = dom.bounding_box(E.collar)
        outer = np.random.default_rng(ctx.seed).uniform(lo, hi, size=(2000, dom.dim))
        if E.partition.weights(outer).sum(axis=1).max() > 1 + 1e-12:
            raise ValueError("partition weights exceed one outside the domain")
        return f"collar={E.collar:.6g} charts={len(E.charts)}"

    def membership_check():
        res = check_boundary_membership(op, ctx.u0, dom.boundary_samples(256))
        return " ".join(f"{k}={v:.3g}" for k, v in res.items())

    def contraction_check():
        E = state["E"]
        d = ctx.cfg.discretization
        grid = Grid.for_domain(dom, d.h or d.h_max, E.collar)
        Eu = E.materialize(ctx.u0, grid, d.interp_order)
        inside = np.asarray(dom.signed_distance(grid.nodes)) >= 0
        box, inn = Eu.sup(), Eu.sup(inside)
        if box > inn + 1e-12:
            raise ValueError(f"extension sup {box:.12g} exceeds interior sup {inn:.12g}")
        return f"sup_box={box:.12g} sup_inside={inn:.12g}"

    for name, fn in (
        ("operator", operator_check),
        ("charts", chart_check),
        ("cutoff", cutoff_check),
        ("extension", extension_check),
        ("initial_in_domain_of_L", membership_check),
        ("contraction", contraction_check),
    ):
        check(name, fn)
    ctx.write_csv("validate.csv", ["check", "passed", "detail"], rows)
    return 0


def cmd_consistency(ctx: Context) -> int:
    E = ctx.extension()
    d = ctx.cfg.discretization
    ok = True
    for beta in ctx.cfg.cutoff_betas:
        fam = CutoffFamily(beta)
        rows = []
        for t in ctx.cfg.plan.t_ladder:
            h = d.h or grid_step(ctx.op, t, d.h_max)
            probes = interior_probes(ctx.domain, 2.0 * fam.width(t))
            if not len(probes):
                raise ConfigError(f"t={t} leaves no probes at distance 2 s(t) from the boundary", "plan.t_ladder")
            r = consistency_residual(
                ctx.op, ctx.domain, fam, E, ctx.u0, t, h=h, probes=probes,
                quadrature=d.quadrature, kernel_radius=d.kernel_radius, interp_order=d.interp_order,
            )
            rows.append((t, h, len(probes), r))
        res = [r[-1] for r in rows]
        decreasing = all(b < a or a == 0.0 for a, b in zip(res, res[1:]))
        ok &= decreasing
        path = ctx.write_csv(f"consistency_beta{_beta_tag(beta)}.csv", ["t", "h", "n_probes", "residual"], rows)
        print(f"{'PASS' if decreasing else 'FAIL'} consistency beta={beta}: residuals {res} -> {path}")
    return 0 if ok else 1


def cmd_converge(ctx: Context) -> int:
    E = ctx.extension()
    d = ctx.cfg.discretization
    T = ctx.cfg.plan.T
    oracle = ctx.cfg.oracle
    kwargs = dict(h=d.h, h_max=d.h_max, kernel_radius=d.kernel_radius, interp_order=d.interp_order)
    ok = True
    if oracle == "analytic":
        exact = _analytic_reference(ctx)
        if exact is None:
            raise ConfigError("analytic oracle needs an interval, sine data and constant a, c with b = 0", "oracle")
        reference = lambda x: exact(T, x)  # noqa: E731
    elif oracle == "crank-nicolson":
        cn = _cn_reference(ctx, T)
        if cn is None:
            raise ConfigError("Crank-Nicolson oracle needs an interval domain", "oracle")
        reference = cn
    else:
        reference = lambda x: np.zeros(len(x))  # noqa: E731
    for beta in ctx.cfg.cutoff_betas:
        fam = CutoffFamily(beta)
        if oracle == "monte-carlo":
            x = ctx.cfg.mc_point(ctx.domain)
            mc = McConfig(paths=ctx.cfg.mc.paths, dt=ctx.cfg.mc.dt, seed=ctx.seed, threads=ctx.threads)
            est, se = feynman_kac_estimate(ctx.op, ctx.domain, ctx.u0.value, T, x, mc)
            rows = []
            for n in ctx.cfg.plan.n_list:
                run = chernoff_run(ctx.op, ctx.domain, fam, E, ctx.u0, IterationPlan(T, n), **kwargs)
                val = _scalar(run.final(x))
                within = abs(val - est) <= 3 * se
                rows.append((n, run.h, val, est, se, within, run.bound_ok()))
                ok &= within and run.bound_ok()
            header = ["n", "h", "value_at_x", "mc_estimate", "mc_std_error", "within_3se", "bound_ok"]
        else:
            table = convergence_table(ctx.op, ctx.domain, fam, E, ctx.u0, T, ctx.cfg.plan.n_list, reference, **kwargs)
            rows = [(r.n, r.h, r.sup_error, r.bound_ok) for r in table]
            errs = [r.sup_error for r in table]
            ok &= all(r.bound_ok for r in table)
            if oracle != "none":
                ok &= all(b <= 1.1 * a for a, b in zip(errs, errs[1:]))
            header = ["n", "h", "sup_error" if oracle != "none" else "sup_value", "bound_ok"]
        path = ctx.write_csv(f"converge_beta{_beta_tag(beta)}.csv", header, rows)
        print(f"converge beta={beta}: {len(rows)} rows -> {path}")
    print("PASS converge" if ok else "FAIL converge")
    return 0 if ok else 1


def cmd_extend_demo(ctx: Context) -> int:
    E = ctx.extension()
    d = ctx.cfg.discretization
    grid = Grid.for_domain(ctx.domain, d.h or d.h_max, E.collar)
    Eu = E.materialize(ctx.u0, grid, d.interp_order)
    dist = np.asarray(ctx.domain.signed_distance(grid.nodes))
    region = np.where(dist >= 0, "inside", np.where(dist > -E.collar, "collar", "outside"))
    coords = ["x"] if ctx.domain.dim == 1 else ["x", "y"]
    rows = [(*p, v, r) for p, v, r in zip(grid.nodes, Eu.flat, region)]
    path = ctx.write_csv("extend_demo.csv", coords + ["value", "region"], rows)
    inside_sup = Eu.sup(region == "inside")
    outside_sup = Eu.sup(region != "inside")
    ok = outside_sup <= inside_sup + 1e-12
    print(f"{'PASS' if ok else 'FAIL'} extend-demo: sup inside {inside_sup:.12g}, outside {outside_sup:.12g} -> {path}")
    return 0 if ok else 1


def cmd_mc_compare(ctx: Context) -> int:
    t = ctx.cfg.mc.t
    x = ctx.cfg.mc_point(ctx.domain)
    mc = McConfig(paths=ctx.cfg.mc.paths, dt=ctx.cfg.mc.dt, seed=ctx.seed, threads=ctx.threads)
    est, se = feynman_kac_estimate(ctx.op, ctx.domain, ctx.u0.value, t, x, mc)
    values = [("monte-carlo", est, se)]
    exact = _analytic_reference(ctx)
    if exact is not None:
        values.append(("analytic", _scalar(exact(t, x)), 0.0))
    cn = _cn_reference(ctx, t)
    if cn is not None:
        values.append(("crank-nicolson", _scalar(cn(x)), 0.0))
    tol = max(1e-3, 3 * se)
    pairs = []
    for i in range(len(values)):
        for j in range(i + 1, len(values)):
            diff = abs(values[i][1] - values[j][1])
            pairs.append((f"{values[i][0]}/{values[j][0]}", diff, tol, diff <= tol))
    ctx.write_csv("mc_compare.csv", ["method", "value", "std_error"], values)
    path = ctx.write_csv("mc_pairs.csv", ["pair", "abs_diff", "tolerance", "agree"], pairs)
    ok = all(p[-1] for p in pairs)
    if not pairs:
        print("no closed-form or Crank-Nicolson reference for this problem; Monte Carlo value only")
    for p in pairs:
        print(f"{'PASS' if p[-1] else 'FAIL'} {p[0]}: |diff| {p[1]:.3g} <= {p[2]:.3g}")
    print(f"-> {path}")
    return 0 if ok else 1


COMMANDS = {
    "validate": cmd_validate,
    "consistency": cmd_consistency,
    "converge": cmd_converge,
    "extend-demo": cmd_extend_demo,
    "mc-compare": cmd_mc_compare,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="feynman-dirichlet", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=software_version())
    sub = parser.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, type=Path, help="experiment config (YAML)")
        p.add_argument("--out", type=Path, default=None, help="output directory (default: output_dir from config)")
        p.add_argument("--seed", type=int, default=None, help="seed for Monte Carlo and random harness data")
        p.add_argument("--threads", type=int, default=1, help="worker threads for Monte Carlo")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = ExperimentConfig.load(args.config)
        seed = cfg.mc.seed if args.seed is None else args.seed
        if not 0 <= seed < 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer", "--seed")
        if args.threads < 1:
            raise ConfigError("thread count must be positive", "--threads")
        ctx = Context(cfg, args.out or Path(cfg.output_dir), seed, args.threads, args.seed)
        return COMMANDS[args.command](ctx)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except InvariantFailure as exc:
        print(f"FAIL {exc}", file=sys.stderr)
        return 1
    except (FeynmanError, ValueError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
