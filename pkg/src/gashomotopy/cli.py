"""Command-line entry point.

    gashomotopy list
    gashomotopy run-example <name> [--s-steps K] [--config FILE] [--output-dir DIR]
    gashomotopy verify <name|all> [--s-steps K] [--config FILE]
    gashomotopy export-frames <name> --s-steps K [--output-dir DIR]

Exit codes: 0 every certificate passed, 2 some certificate failed,
3 any other error, 4 unknown example name.
"""
from __future__ import annotations

import argparse
import configparser
import logging
import os
import sys
from dataclasses import dataclass, field as dc_field, fields
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import registry
from .errors import GasHomotopyError, UnknownExample
from .integrate import DEFAULT_CONFIG, IntegratorConfig, Trajectory
from .lyapunov import Certificate, _fmt, format_report

log = logging.getLogger("gashomotopy")

EXIT_PASS, EXIT_FAIL, EXIT_ERROR, EXIT_UNKNOWN = 0, 2, 3, 4
OUTPUT_ENV = "GASHOMOTOPY_OUTPUT_DIR"
DEFAULT_OUTPUT = "gashomotopy_out"
COMMANDS = ("run-example", "verify", "export-frames", "list")


@dataclass
class RunSpec:
    command: str
    example_name: str = ""
    s_steps: int = 21
    output_dir: Path = Path(DEFAULT_OUTPUT)
    cfg: IntegratorConfig = DEFAULT_CONFIG
    samples: int = 1024
    signals: int = 8
    write_artifacts: bool = True


@dataclass
class RunResult:
    certificates: List[Tuple[str, Certificate]] = dc_field(default_factory=list)
    notes: List[Tuple[str, str]] = dc_field(default_factory=list)
    trajectories: List[Tuple[str, Callable[[Path], None]]] = dc_field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for _, c in self.certificates)


# ---- runners ---------------------------------------------------------------


def _s_grid(spec: RunSpec) -> np.ndarray:
    if spec.s_steps < 2:
        raise ValueError("--s-steps must be at least 2")
    return np.linspace(0.0, 1.0, spec.s_steps)


def _traj_writer(traj: Trajectory):
    return lambda path: traj.to_csv(path)


def _straight_line_path(name: str):
    from .homotopies import straight_line

    ex = registry.get(name)
    return straight_line(ex.field, ex.pair, labels=(name, "-gradV"))


def _run_straight(name: str, x0, t_end: float):
    def run(spec: RunSpec) -> RunResult:
        from .integrate import integrate
        from .lyapunov import check_path, check_traj_decrease

        ex = registry.get(name)
        res = RunResult()
        res.certificates.append(("path", check_path(_straight_line_path(name), s_grid=_s_grid(spec),
                                                    annulus=(1e-2, 10.0), N=spec.samples)))
        traj = integrate(ex.field, x0, t_end, spec.cfg)
        res.certificates.append(("trajectory", check_traj_decrease(traj, ex.pair.V)))
        res.trajectories.append(("trajectory.csv", _traj_writer(traj)))
        res.notes.append(("final_norm", _fmt(np.linalg.norm(traj.final))))
        return res

    return run


def run_ex1_1(spec: RunSpec) -> RunResult:
    from .homotopies import naive_linear_path, patched_linear_path
    from .index import hurwitz_check
    from .lyapunov import check_path, first_failing_s

    res = RunResult()
    grid = _s_grid(spec)
    res.certificates.append(("patched_path", check_path(patched_linear_path(), s_grid=grid,
                                                        annulus=(1e-2, 10.0), N=spec.samples)))
    naive = check_path(naive_linear_path(), s_grid=grid, annulus=(1e-2, 10.0), N=spec.samples)
    from .homotopies import naive_linear_matrix

    res.notes.append(("naive_path.verdict", naive.verdict))
    s_bad = first_failing_s(naive)
    res.notes.append(("naive_path.first_failing_s", "none" if s_bad is None else _fmt(s_bad)))
    res.notes.append(("naive_path.max_re_eig_at_half", _fmt(hurwitz_check(naive_linear_matrix(0.5))[0])))
    return res


def run_ex1_3(spec: RunSpec) -> RunResult:
    res = _run_straight("ex1_3_sign", [2.0], 5.0)(spec)
    return res


def run_ex1_4(spec: RunSpec) -> RunResult:
    from .core import sqrt_gauge
    from .integrate import EXTINCTION, extinction_time

    res = _run_straight("ex1_4_radial", [1.0, 0.0], 3.0)(spec)
    ex = registry.get("ex1_4_radial")
    from .integrate import integrate

    traj = integrate(ex.field, [1.0, 0.0], 3.0, spec.cfg)
    hits = [t for t, tag in traj.events if tag == EXTINCTION]
    res.notes.append(("extinction_time.simulated", _fmt(hits[0]) if hits else "none"))
    res.notes.append(("extinction_time.closed_form", _fmt(extinction_time(sqrt_gauge(), 1.0))))
    return res


def _ex3_3_path(spec: RunSpec):
    from .core import quadratic_pair
    from .homotopies import concatenate, gradient_interpolation, straight_line

    ex = registry.get("ex3_3")
    a = straight_line(ex.field, ex.pair, labels=("ex3_3", "-gradV1"))
    b = gradient_interpolation(ex.pair, quadratic_pair(n=2), 2, labels=("-gradV1", "canonical"))
    return concatenate([a, b])


def run_ex3_3(spec: RunSpec) -> RunResult:
    from .integrate import integrate
    from .lyapunov import check_path, check_traj_decrease

    res = RunResult()
    path = _ex3_3_path(spec)
    res.certificates.append(("path", check_path(path, s_grid=_s_grid(spec), annulus=(1e-2, 10.0),
                                                N=spec.samples)))
    ex = registry.get("ex3_3")
    for k, x0 in enumerate(([2.0, 1.0], [-3.0, 0.5], [0.5, -2.0])):
        traj = integrate(ex.field, x0, 20.0, spec.cfg)
        res.certificates.append((f"trajectory[{k}]", check_traj_decrease(traj, ex.pair.V)))
        res.trajectories.append((f"trajectory_{k}.csv", _traj_writer(traj)))
    return res


def run_ex3_4(spec: RunSpec) -> RunResult:
    from .homotopies import derivative_sign_changes, invex_path, potential_path
    from .lyapunov import check_path

    res = RunResult()
    grid = _s_grid(spec)
    res.certificates.append(("path", check_path(invex_path(), s_grid=grid, annulus=(1e-2, 10.0),
                                                N=spec.samples)))
    x = np.linspace(-10.0, 10.0, 4097)
    for s in grid:
        v = potential_path(float(s), x)
        res.notes.append((f"s={_fmt(s)}.argmin", _fmt(x[int(np.argmin(v))])))
        res.notes.append((f"s={_fmt(s)}.slope_sign_changes", str(derivative_sign_changes(v))))
    return res


def _sphere_runner(name: str):
    def run(spec: RunSpec) -> RunResult:
        from .lyapunov import check_traj_decrease
        from .sphere import SOUTH, chart_lyapunov, simulate_on_sphere, sphere_trajectory_to_csv

        res = _run_straight(name, [2.0, 1.0], 20.0)(spec)
        ex = registry.get(name)
        traj = simulate_on_sphere(ex.field, [1.0, 0.0, 0.0], 20.0, spec.cfg)
        res.certificates.append(("sphere_trajectory", check_traj_decrease(traj, chart_lyapunov)))
        res.trajectories.append(("sphere.csv", lambda p, tr=traj: sphere_trajectory_to_csv(tr, p)))
        res.notes.append(("south_pole_distance_t20", _fmt(np.linalg.norm(traj.final - SOUTH))))
        return res

    return run


def run_ex3_7(spec: RunSpec) -> RunResult:
    from .lyapunov import check_traj_decrease
    from .sphere import (SOUTH, chart_certificate, chart_lyapunov, simulate_on_sphere,
                         sphere_homotopy, sphere_trajectory_to_csv)

    res = RunResult()
    res.certificates.append(("chart", chart_certificate(sphere_homotopy(), s_grid=_s_grid(spec),
                                                        N=spec.samples)))
    for name in ("ex3_7_X", "ex3_7_Y"):
        traj = simulate_on_sphere(registry.get(name).field, [1.0, 0.0, 0.0], 20.0, spec.cfg)
        res.certificates.append((f"{name}.sphere_trajectory", check_traj_decrease(traj, chart_lyapunov)))
        res.trajectories.append((f"{name}_sphere.csv", lambda p, tr=traj: sphere_trajectory_to_csv(tr, p)))
        res.notes.append((f"{name}.south_pole_distance_t20", _fmt(np.linalg.norm(traj.final - SOUTH))))
    return res


def run_ex4_1(spec: RunSpec) -> RunResult:
    from .iss import check_l2_gain, example_no_canonical, random_hold_signal, simulate_disturbed
    from .normalize import orientation_sign

    res = RunResult()
    sys_ = example_no_canonical()
    R = np.diag([1.0, -1.0])
    res.notes.append(("R.orientation_sign", str(orientation_sign(lambda z: R @ z, np.array([0.3, 0.7])))))
    rng = np.random.default_rng(41)
    for k in range(spec.signals):
        sup = float(rng.uniform(0.0, 5.0))
        d = random_hold_signal(2, sup, 0.5, 10.0, seed=1000 + k)
        x0 = rng.uniform(-2.0, 2.0, size=2)
        traj = simulate_disturbed(sys_, x0, d, 10.0, spec.cfg)
        res.certificates.append((f"l2_gain[{k}]", check_l2_gain(traj, d)))
        res.trajectories.append((f"disturbed_{k}.csv", _traj_writer(traj)))
    return res


def run_ex5_1(spec: RunSpec) -> RunResult:
    from .homotopies import gaussian_ot_homotopy, gaussian_ot_map
    from .lyapunov import check_path

    res = RunResult()
    S0, S1 = registry.SIGMA0, np.eye(2)
    res.certificates.append(("path", check_path(gaussian_ot_homotopy(S0, S1), s_grid=_s_grid(spec),
                                                annulus=(1e-2, 10.0), N=spec.samples)))
    A = gaussian_ot_map(S0, S1)
    res.notes.append(("ot_map", " ".join(_fmt(v) for v in A.ravel())))
    return res


def run_rotation(spec: RunSpec) -> RunResult:
    from .homotopies import rotation_path
    from .index import winding_number
    from .lyapunov import check_path

    res = RunResult()
    path = rotation_path()
    grid = _s_grid(spec)
    res.certificates.append(("path", check_path(path, s_grid=grid, annulus=(1e-2, 10.0), N=spec.samples)))
    res.notes.append(("expected", "fail (negative control: the s = 1/2 field is a rotation)"))
    for s in grid:
        res.notes.append((f"s={_fmt(s)}.winding_number", str(winding_number(path.field_at(float(s))))))
    return res


RUNNERS: Dict[str, Callable[[RunSpec], RunResult]] = {
    "canonical": _run_straight("canonical", [2.0, 1.0], 10.0),
    "ex1_1": run_ex1_1,
    "ex1_3_sign": run_ex1_3,
    "ex1_4_radial": run_ex1_4,
    "ex3_3": run_ex3_3,
    "ex3_4_invex": run_ex3_4,
    "ex3_7_X": _sphere_runner("ex3_7_X"),
    "ex3_7_Y": _sphere_runner("ex3_7_Y"),
    "ex4_1": _run_straight("ex4_1", [2.0, 1.0], 10.0),
    "ex4_1_disturbed": run_ex4_1,
    "ex5_1_gaussian": run_ex5_1,
    "ex3_7": run_ex3_7,
    "rotation_family": run_rotation,
}

# Negative controls are excluded from ``verify all``.
NEGATIVE_CONTROLS = ("rotation_family",)


def example_names() -> List[str]:
    return list(RUNNERS)


def _path_for(name: str):
    from .homotopies import gaussian_ot_homotopy, invex_path, patched_linear_path, rotation_path
    from .sphere import sphere_homotopy

    special = {
        "ex1_1": patched_linear_path,
        "ex3_3": lambda: _ex3_3_path(None),
        "ex3_4_invex": invex_path,
        "ex3_7": sphere_homotopy,
        "ex5_1_gaussian": lambda: gaussian_ot_homotopy(registry.SIGMA0, np.eye(2)),
        "rotation_family": rotation_path,
        "ex4_1_disturbed": lambda: _straight_line_path("ex4_1"),
    }
    if name in special:
        return special[name]()
    return _straight_line_path(name)


# ---- reports ---------------------------------------------------------------


def format_run(name: str, res: RunResult) -> str:
    lines = [f"example: {name}", f"verdict: {'pass' if res.passed else 'fail'}",
             f"certificate_count: {len(res.certificates)}"]
    text = "\n".join(lines) + "\n"
    for label, cert in res.certificates:
        text += format_report(cert, prefix=f"{label}.")
    for key, value in res.notes:
        text += f"note.{key}: {value}\n"
    return text


def format_summary(results: Sequence[Tuple[str, RunResult]]) -> str:
    rows = [f"{'example':<18} {'certificate':<30} {'verdict':<7} {'worst_margin':>20} {'samples':>9}"]
    for name, res in results:
        for label, cert in res.certificates:
            rows.append(f"{name:<18} {label:<30} {cert.verdict:<7} {_fmt(cert.worst_margin):>20} "
                        f"{cert.sample_count:>9d}")
    return "\n".join(rows) + "\n"


def _check_name(name: str) -> None:
    if name not in RUNNERS:
        raise UnknownExample(f"unknown example {name!r}; run 'gashomotopy list'")


def run_example(spec: RunSpec) -> int:
    _check_name(spec.example_name)
    res = RUNNERS[spec.example_name](spec)
    report = format_run(spec.example_name, res)
    sys.stdout.write(report)
    if spec.write_artifacts:
        out = Path(spec.output_dir) / spec.example_name
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.txt").write_text(report)
        (out / "summary.txt").write_text(format_summary([(spec.example_name, res)]))
        for fname, writer in res.trajectories:
            writer(out / fname)
    return EXIT_PASS if res.passed else EXIT_FAIL


def verify(spec: RunSpec) -> int:
    if spec.example_name == "all":
        names = [n for n in RUNNERS if n not in NEGATIVE_CONTROLS]
    else:
        _check_name(spec.example_name)
        names = [spec.example_name]
    results = [(n, RUNNERS[n](spec)) for n in names]
    text = "".join(format_run(n, r) for n, r in results) + format_summary(results)
    sys.stdout.write(text)
    if spec.write_artifacts:
        Path(spec.output_dir).mkdir(parents=True, exist_ok=True)
        (Path(spec.output_dir) / f"verify_{spec.example_name}.txt").write_text(text)
    return EXIT_PASS if all(r.passed for _, r in results) else EXIT_FAIL


def export_frames(spec: RunSpec) -> List[Path]:
    from .homotopies import potential_path
    from .render import graph_svg, render_field, sphere_svg

    _check_name(spec.example_name)
    name = spec.example_name
    path = _path_for(name)
    out = Path(spec.output_dir) / name
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for i, s in enumerate(_s_grid(spec)):
        s = float(s)
        title = f"{name}  s = {s:.4f}"
        if name == "ex3_4_invex":
            svg = graph_svg(lambda x: potential_path(s, x), title, x_range=(-10.0, 10.0))
        elif name == "ex3_7":
            svg = sphere_svg(path.field_at(s), title)
        else:
            svg = render_field(path.field_at(s), title)
        target = out / f"frame_{i:03d}.svg"
        target.write_text(svg)
        written.append(target)
        sys.stdout.write(f"frame[{i}]: {target.name} s={_fmt(s)}\n")
    return written


# ---- argument handling -----------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(EXIT_ERROR)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="gashomotopy", description="Certified stability-preserving homotopies.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    common = _Parser(add_help=False)
    common.add_argument("--s-steps", type=int, default=None)
    common.add_argument("--config", type=Path, default=None)
    common.add_argument("--output-dir", type=Path, default=None)
    r = sub.add_parser("run-example", parents=[common], help="run one example and write artifacts")
    r.add_argument("name")
    v = sub.add_parser("verify", parents=[common], help="certify one example or 'all'")
    v.add_argument("name")
    e = sub.add_parser("export-frames", parents=[common], help="write one SVG per s-step")
    e.add_argument("name")
    sub.add_parser("list", help="print example names")
    return p


_CFG_KEYS = {f.name for f in fields(IntegratorConfig)}
_RUN_KEYS = {"s_steps": int, "samples": int, "signals": int}


def load_config(path: Optional[Path], example: str) -> Tuple[IntegratorConfig, dict]:
    """Read ``key = value`` lines; the example's own section overrides [DEFAULT]."""
    if path is None:
        return DEFAULT_CONFIG, {}
    cp = configparser.ConfigParser()
    if not cp.read(path):
        raise FileNotFoundError(f"config file {path} not found")
    section = cp[example] if cp.has_section(example) else cp.defaults()
    cfg_over, run_over = {}, {}
    for key, raw in section.items():
        if key in _CFG_KEYS:
            cfg_over[key] = float(raw)
        elif key in _RUN_KEYS:
            run_over[key] = _RUN_KEYS[key](raw)
        else:
            raise ValueError(f"unknown config key {key!r}")
    if "max_steps" in cfg_over:
        cfg_over["max_steps"] = int(cfg_over["max_steps"])
    return DEFAULT_CONFIG.replace(**cfg_over), run_over


def _output_dir(arg: Optional[Path]) -> Path:
    if arg is not None:
        return arg
    return Path(os.environ.get(OUTPUT_ENV, DEFAULT_OUTPUT))


def spec_from_args(args) -> RunSpec:
    name = getattr(args, "name", "")
    cfg, over = load_config(getattr(args, "config", None), name)
    spec = RunSpec(command=args.command, example_name=name, cfg=cfg,
                   output_dir=_output_dir(getattr(args, "output_dir", None)), **over)
    if getattr(args, "s_steps", None) is not None:
        spec.s_steps = args.s_steps
    return spec


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "list":
            sys.stdout.write("\n".join(example_names()) + "\n")
            return EXIT_PASS
        spec = spec_from_args(args)
        if args.command == "run-example":
            return run_example(spec)
        if args.command == "verify":
            return verify(spec)
        export_frames(spec)
        return EXIT_PASS
    except UnknownExample as exc:
        sys.stderr.write(f"error: {exc.args[0]}\n")
        return EXIT_UNKNOWN
    except (GasHomotopyError, ValueError, ArithmeticError, OSError) as exc:
        log.debug("run failed", exc_info=True)
        sys.stderr.write(f"error: {type(exc).__name__}: {exc}\n")
        return EXIT_ERROR


if __name__ == "__main__":
    raise SystemExit(main())
