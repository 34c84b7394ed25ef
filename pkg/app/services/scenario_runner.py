"""
Scenario Runner
=====================================
Runs the task list of a scenario and turns every result into a TaskReport.

How it works:
1. The [system] or [manifold] section is turned into domain objects once.
2. Tasks run sequentially in the listed order and share their results
   (the fundamental path, the shooting run, the B-integral, ...).
3. Each task yields a summary of integers and flags that is compared with
   the [expected] section, and a full result embedded in the report.
4. Requested traces are emitted from the shared results at the end.

Exit codes:
- 0: every task succeeded and matched its expected values
- 1: input error or a refused computation (endpoint focal, degenerate data, ...)
- 2: a verification mismatch
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from app.core.config import DIFF_STEP
from app.core.errors import SymplecticError
from app.db.report_store import ReportStore
from app.models.forms import Subspace, SymForm
from app.models.geometry import BaseCurve, ManifoldKind, ShootingResult
from app.models.reduction import Frame
from app.models.system import CoefficientPath, InitialData
from app.schemas.report import TaskReport, TaskStatus, normalized
from app.schemas.scenario import CheckKind, OptionsBlock, Scenario, ScenarioError, SystemBlock, SystemKind, TaskKind, load_scenario
from app.models.matrix_function import MatrixFunction
from app.services.expressions import ExpressionError, parse_function, parse_matrix
from app.services.geodesics import constraint_system_check, geodesic_system, killing_frame_data, shoot_geodesics, stationary_index_check
from app.services.godel import fiber_conservation_residual, godel_E0, godel_reconstruct_u, hessian_index_E0, lifted_action
from app.services.indexform import (
    kernel_dimension_check,
    reduced_form_carry,
    verify_additivity,
    verify_decomposition,
    verify_index_theorem,
    verify_old_index_theorem,
    verify_orthogonality,
)
from app.services.manifolds import Geometry, build_manifold
from app.services.maslov import find_focal_instants, maslov_index, perturbation_stability
from app.services.morse import morse_relations_check
from app.services.reduction import (
    b_integral,
    build_reduced,
    build_tilde_reduced,
    classify_frame,
    reduced_coefficients,
    reduced_maslov_shortcut,
)
from app.services.sds import integrate_fundamental, lagrangian_frame, lagrangian_residual, make_morse_sturm, make_system
from app.services.traces import TraceError, emit_trace

logger = logging.getLogger(__name__)

STABILITY_DELTA = 1e-6
BASE_PIECES = 64


@dataclass
class RunOutcome:
    scenario: str
    reports: List[TaskReport] = field(default_factory=list)
    traces: List[str] = field(default_factory=list)
    error: Optional[str] = None

    @property
    def exit_code(self) -> int:
        if self.error or any(r.status == TaskStatus.failed for r in self.reports):
            return 1
        if any(r.status == TaskStatus.mismatch for r in self.reports):
            return 2
        return 0

    def rows(self) -> List[list]:
        if self.error:
            return [[self.scenario, "-", "failed", self.error]]
        return [[self.scenario, r.task, r.status.value, _describe(r)] for r in self.reports]


def _describe(report: TaskReport) -> str:
    if report.error:
        return report.error
    if report.mismatches:
        return "; ".join(report.mismatches)
    return ", ".join(f"{k}={v}" for k, v in sorted(normalized(report.summary).items()) if not isinstance(v, (dict, list)))


# --------------------------------------------------
# scenario sections -> domain objects
# --------------------------------------------------

def _constant(text: str, shape: Tuple[int, int], what: str) -> np.ndarray:
    matrix = parse_matrix(text, shape)
    if matrix.free_symbols:
        raise ScenarioError(f"{what} must be constant, found {sorted(s.name for s in matrix.free_symbols)}", field=f"system.{what}")
    return np.array(matrix.evalf().tolist(), dtype=float).reshape(shape)


def build_system(block: SystemBlock, label: str = "") -> CoefficientPath:
    n, interval = block.n, block.interval
    try:
        if block.kind == SystemKind.morse_sturm:
            g = SymForm(_constant(block.g, (n, n), "g"))
            R = parse_function(block.R, (n, n), interval, label="R")
            return make_morse_sturm(g, R, interval, label=label)
        A = parse_function(block.A, (n, n), interval, label="A")
        B = parse_function(block.B, (n, n), interval, label="B")
        C = parse_function(block.C, (n, n), interval, label="C")
        return make_system(A, B, C, interval, label=label)
    except ExpressionError as e:
        raise ScenarioError(f"system: {e}", field="system")


def build_initial_data(block: SystemBlock) -> InitialData:
    n = block.n
    if not block.P.strip():
        if block.S.strip():
            raise ScenarioError("S given without P", field="system.S")
        return InitialData.lagrangian_zero(n)
    try:
        rows = parse_matrix(block.P)
        if rows.shape[1] != n:
            raise ScenarioError(f"P vectors need {n} entries, got {rows.shape[1]}", field="system.P")
        k = rows.shape[0]
        basis = _constant(block.P, (k, n), "P").T
        S = _constant(block.S or "0", (k, k), "S")
    except ExpressionError as e:
        raise ScenarioError(f"initial data: {e}", field="system.P")
    if np.linalg.matrix_rank(basis) < k:
        raise ScenarioError("P vectors are linearly dependent", field="system.P")
    return InitialData(Subspace(basis), SymForm(S))


def build_frame(block: SystemBlock, X: CoefficientPath) -> Frame:
    n = block.n
    if not block.frame.strip():
        return Frame.empty(n)
    try:
        matrix = parse_matrix(block.frame)
    except ExpressionError as e:
        raise ScenarioError(f"frame: {e}", field="system.frame")
    if matrix.shape[0] != n and matrix.shape == (1, n):
        matrix = matrix.T
    if matrix.shape[0] != n:
        raise ScenarioError(f"frame needs {n} rows, got {matrix.shape[0]}", field="system.frame")
    Y = MatrixFunction.symbolic(matrix, step=DIFF_STEP * X.length, label="Y")
    return classify_frame(X, Frame(Y))


# --------------------------------------------------
# run state
# --------------------------------------------------

class ScenarioRun:
    def __init__(self, scenario: Scenario, options: OptionsBlock):
        self.scenario = scenario
        self.options = options
        self.focal = options.focal_options()
        self.artifacts: Dict[str, object] = {}
        self._system = None
        self._geometry = None

    # system scenarios

    def system(self) -> Tuple[CoefficientPath, InitialData, Frame]:
        if self._system is None:
            block = self.scenario.system
            X = build_system(block, label=self.scenario.name)
            self._system = (X, build_initial_data(block), build_frame(block, X))
        return self._system

    def fundamental(self):
        if "fundamental" not in self.artifacts:
            X, _, _ = self.system()
            self.artifacts["fundamental"] = integrate_fundamental(X, self.options.steps)
        return self.artifacts["fundamental"]

    # manifold scenarios

    def geometry(self) -> Geometry:
        if self._geometry is None:
            block = self.scenario.manifold
            manifold = build_manifold(block.kind, block.parameters)
            if len(block.p) != manifold.dim:
                raise ScenarioError(f"p needs {manifold.dim} coordinates {manifold.names}", field="manifold.p")
            self._geometry = Geometry(manifold)
            self._geometry.check_metric([block.p, block.q])
        return self._geometry

    def shooting(self) -> ShootingResult:
        if "shooting" not in self.artifacts:
            block = self.scenario.manifold
            self.artifacts["shooting"] = shoot_geodesics(
                self.geometry(), block.p, block.q, block.interval, block.grid,
                block.velocity_bound, block.fields, self.focal,
            )
        return self.artifacts["shooting"]

    def fields(self) -> List[str]:
        fields = self.scenario.manifold.fields
        if not fields:
            raise ScenarioError("this task needs reduction fields", field="manifold.fields")
        return fields


TaskResult = Tuple[Dict[str, object], Dict[str, object], List[str]]


# --------------------------------------------------
# system tasks
# --------------------------------------------------

def _integrate(run: ScenarioRun) -> TaskResult:
    X, ell0, _ = run.system()
    path = run.fundamental()
    lpath = lagrangian_frame(path, ell0)
    lag = max(lagrangian_residual(frame) for frame in lpath.node_frames())
    result = {
        "steps": run.options.steps,
        "max_symplectic_residual": path.max_residual,
        "max_relative_symplectic_residual": path.max_relative_residual,
        "lagrangian_residual": lag,
        "corrections": path.corrections,
        "phi_b": path.values[-1],
    }
    return {"reprojections": len(path.corrections)}, result, []


def _focal(run: ScenarioRun) -> TaskResult:
    X, ell0, _ = run.system()
    instants = find_focal_instants(X, ell0, run.fundamental(), run.focal)
    endpoint = instants[-1].multiplicity if instants and instants[-1].t == X.b else 0
    summary = {
        "instants": len(instants),
        "focal_count": sum(i.multiplicity for i in instants),
        "endpoint_multiplicity": endpoint,
    }
    return summary, {"instants": [i.as_dict() for i in instants]}, []


def _maslov(run: ScenarioRun) -> TaskResult:
    X, ell0, _ = run.system()
    report = maslov_index(X, ell0, run.focal, run.fundamental())
    run.artifacts["maslov"] = report
    summary = {"maslov": report.total, "valid": report.valid}
    result = report.as_dict()
    if CheckKind.stability in run.options.checks and report.valid:
        stable = perturbation_stability(X, ell0, STABILITY_DELTA, opts=run.focal, seed=run.options.seed)
        summary["stable"] = result["stable"] = stable
    return summary, result, []


def _reduce_system(run: ScenarioRun) -> TaskResult:
    X, _, frame = run.system()
    if frame.rank == 0:
        return {"maslov_red": 0, "rank": 0}, {"rank": 0}, []
    reduced = reduced_coefficients(X, frame)
    X_red = build_reduced(X, frame, reduced)
    red = maslov_index(X_red, InitialData.lagrangian_zero(frame.rank), run.focal)
    bpath = b_integral(reduced, run.options.steps, run.options.kernel_tol)
    run.artifacts["bintegral"] = bpath

    summary = {
        "rank": frame.rank,
        "maslov_red": red.total,
        "b_degeneracies": sum(inst.multiplicity for inst in bpath.instants),
    }
    result = {
        "solution_frame": frame.is_solution_frame,
        "symmetric_frame": frame.is_symmetric_frame,
        "frame_index": reduced.index,
        "reduced_maslov": red.as_dict(),
        "b_integral": {
            "instants": [inst.as_dict() for inst in bpath.instants],
            "endpoint_degenerate": bpath.endpoint_degenerate,
            "value_b": bpath.values[-1],
        },
    }
    mismatches = []
    if frame.is_solution_frame and frame.is_symmetric_frame:
        X_tilde = build_tilde_reduced(X, frame, reduced)
        tilde = maslov_index(X_tilde, InitialData.lagrangian_zero(frame.rank), run.focal)
        shortcut = reduced_maslov_shortcut(reduced, bpath, run.options.kernel_tol, run.options.inertia_tol)
        summary["shortcut"] = shortcut
        summary["maslov_red_tilde"] = tilde.total
        result["tilde_maslov"] = tilde.as_dict()
        if tilde.valid and tilde.total != shortcut:
            mismatches.append(f"shortcut {shortcut} != Maslov index {tilde.total} of the normal form")
    return summary, result, mismatches


def _index_system(run: ScenarioRun) -> TaskResult:
    X, ell0, frame = run.system()
    opts, focal = run.options, run.focal
    summary, result, mismatches = {}, {}, []
    checks = opts.checks

    if CheckKind.theorem in checks:
        report = verify_index_theorem(X, ell0, frame, opts.meshes, focal, opts.quad_order)
        run.artifacts["index"] = report
        summary.update({"lhs": report.lhs, "rhs": report.rhs, "verdict": report.verdict})
        result["theorem"] = report.as_dict()
        if report.verdict != "holds":
            mismatches.append(f"index theorem {report.verdict}: lhs={report.lhs}, rhs={report.rhs}")
    if CheckKind.old in checks:
        old = verify_old_index_theorem(X, ell0, frame, opts.meshes, focal, opts.quad_order)
        summary["old_lhs"] = old.lhs
        result["old"] = old.as_dict()
        if old.verdict != "holds":
            mismatches.append(f"old index theorem {old.verdict}: lhs={old.lhs}, maslov={old.maslov}")
    if CheckKind.orthogonality in checks:
        result["orthogonality"] = verify_orthogonality(X, ell0, frame, opts.mesh, opts.rank_tol)
    if CheckKind.carry in checks:
        result["carry"] = reduced_form_carry(X, frame, opts.mesh, opts.quad_order)
    if CheckKind.decomposition in checks:
        dec = verify_decomposition(X, ell0, frame, opts.mesh, focal, opts.quad_order)
        summary["decomposes"] = dec.decomposes
        result["decomposition"] = dec.as_dict()
        if dec.decomposes == dec.reduced_conjugate:
            mismatches.append(f"decomposition {dec.decomposes} but reduced conjugate {dec.reduced_conjugate}")
    if CheckKind.kernel in checks:
        kernel = kernel_dimension_check(X, ell0, frame, opts.mesh, focal, opts.quad_order)
        summary.update({"degeneracy": kernel.degeneracy, "multiplicity": kernel.multiplicity})
        result["kernel"] = kernel.as_dict()
        if not kernel.matches:
            mismatches.append(f"kernel dimension {kernel.degeneracy} != focal multiplicity {kernel.multiplicity}")
    if CheckKind.additivity in checks:
        prefix = run.scenario.system.prefix
        if prefix is None:
            raise ScenarioError("the additivity check needs system.prefix", field="system.prefix")
        add = verify_additivity(X, ell0, frame, prefix, opts.mesh, opts.rank_tol, opts.inertia_tol)
        summary["additivity"] = add.holds
        result["additivity"] = add.as_dict()
        if not add.holds:
            mismatches.append(f"additivity fails: {add.k_delta} != {add.k_d} + {add.k_delta_red}")
    return summary, result, mismatches


# --------------------------------------------------
# manifold tasks
# --------------------------------------------------

def _geodesic_count(run: ScenarioRun) -> TaskResult:
    shooting = run.shooting()
    counts = shooting.counts()
    summary = {
        "geodesics": len(shooting.geodesics),
        "counts": {str(k): v for k, v in sorted(counts.items())},
        "maslov_red": sorted({g.maslov_red for g in shooting.geodesics}),
    }
    return summary, shooting.as_dict(), []


def _morse_check(run: ScenarioRun) -> TaskResult:
    block = run.scenario.manifold
    counts = run.shooting().counts()
    cap = block.degree_cap
    if cap is None:
        cap = max(list(counts) + list(block.poincare) + [0])
    verdict = morse_relations_check(counts, block.poincare, cap)
    return {"morse_holds": verdict.holds}, {"degree_cap": cap, **verdict.as_dict()}, []


def _reduce_manifold(run: ScenarioRun) -> TaskResult:
    geometry, fields = run.geometry(), run.fields()
    entries = []
    for record in run.shooting().geodesics:
        gsys = geodesic_system(geometry, record.curve)
        frame, reduced, bpath = killing_frame_data(geometry, gsys, fields, run.options.steps)
        run.artifacts.setdefault("bintegral", bpath)
        check = constraint_system_check(geometry, gsys, fields, frame, reduced, run.focal)
        entries.append({
            "initial_velocity": record.curve.initial_velocity,
            "b_degeneracies": sum(inst.multiplicity for inst in bpath.instants),
            **check,
        })
    summary = {"admissible": all(e["admissible"] for e in entries)}
    return summary, {"geodesics": entries}, []


def _godel_center(record, m: int) -> BaseCurve:
    curve = record.curve
    return BaseCurve(
        position=lambda t: np.asarray(curve.position(t))[:m],
        velocity=lambda t: np.asarray(curve.velocity(t))[:m],
        breakpoints=np.linspace(curve.a, curve.b, BASE_PIECES + 1),
    )


def _index_manifold(run: ScenarioRun) -> TaskResult:
    geometry = run.geometry()
    manifold = geometry.manifold
    block = run.scenario.manifold
    entries, mismatches = [], []
    for record in run.shooting().geodesics:
        entry = {"initial_velocity": record.curve.initial_velocity, "expected_index": record.index}
        if manifold.kind == ManifoldKind.godel:
            m = manifold.base_dim
            u0, u1 = block.p[m:], block.q[m:]
            center = _godel_center(record, m)
            elements = run.options.hessian_elements
            kwargs = {"elements": elements} if elements else {}
            n_minus, _, degeneracy = hessian_index_E0(manifold, center, u0, u1, tol=run.options.inertia_tol, **kwargs)
            fiber = godel_reconstruct_u(manifold, center, u0, u1)
            e0 = godel_E0(manifold, center, u0, u1)
            entry.update({
                "index": n_minus,
                "hessian_degeneracy": degeneracy,
                "fiber_residual": fiber_conservation_residual(manifold, center, fiber),
                "action_gap": abs(e0 - lifted_action(manifold, center, u0, u1)) / max(1.0, abs(e0)),
            })
            consistent = n_minus == record.index
        else:
            gsys = geodesic_system(geometry, record.curve)
            report, consistent = stationary_index_check(geometry, gsys, run.fields(), run.options.meshes, run.focal)
            entry.update({"index": report.lhs, "theorem": report.as_dict()})
            run.artifacts.setdefault("index", report)
        entry["consistent"] = consistent
        if not consistent:
            mismatches.append(f"index {entry['index']} != maslov - maslov_red = {record.index} "
                              f"for initial velocity {list(np.round(record.curve.initial_velocity, 6))}")
        entries.append(entry)
    summary = {
        "indices": sorted(e["index"] for e in entries if e["index"] is not None),
        "consistent": not mismatches,
    }
    return summary, {"geodesics": entries}, mismatches


SYSTEM_HANDLERS: Dict[TaskKind, Callable[[ScenarioRun], TaskResult]] = {
    TaskKind.integrate: _integrate,
    TaskKind.focal: _focal,
    TaskKind.maslov: _maslov,
    TaskKind.reduce: _reduce_system,
    TaskKind.index_verify: _index_system,
}

MANIFOLD_HANDLERS: Dict[TaskKind, Callable[[ScenarioRun], TaskResult]] = {
    TaskKind.reduce: _reduce_manifold,
    TaskKind.index_verify: _index_manifold,
    TaskKind.geodesic_count: _geodesic_count,
    TaskKind.morse_check: _morse_check,
}


# --------------------------------------------------
# driver
# --------------------------------------------------

def compare_expected(summary: Dict[str, object], expected: Dict[str, object]) -> List[str]:
    summary, expected = normalized(summary), normalized(expected)
    return [
        f"{key}: expected {expected[key]}, got {summary[key]}"
        for key in sorted(expected)
        if key in summary and summary[key] != expected[key]
    ]


def apply_overrides(options: OptionsBlock, mesh: Optional[int] = None, tol: Optional[float] = None,
                    traces: Sequence[str] = ()) -> OptionsBlock:
    update = {}
    if mesh is not None:
        update.update({"mesh": mesh, "meshes": [mesh, 2 * mesh, 4 * mesh]})
    if tol is not None:
        update.update({"inertia_tol": tol, "rank_tol": tol})
    if traces:
        update["traces"] = list(dict.fromkeys([*options.traces, *traces]))
    return options.model_copy(update=update) if update else options


def run_scenario(
    scenario: Scenario,
    output_dir: Optional[str] = None,
    mesh: Optional[int] = None,
    tol: Optional[float] = None,
    traces: Sequence[str] = (),
) -> RunOutcome:
    options = OptionsBlock.model_validate(apply_overrides(scenario.options, mesh, tol, traces).model_dump())
    store = ReportStore(output_dir)
    run = ScenarioRun(scenario, options)
    handlers = SYSTEM_HANDLERS if scenario.system is not None else MANIFOLD_HANDLERS
    outcome = RunOutcome(scenario.name)
    embedded = options.model_dump(mode="python")
    covered = set()

    for task in scenario.tasks:
        logger.info(f"[{scenario.name}] running {task.value}")
        report = TaskReport(scenario=scenario.name, task=task.value, status=TaskStatus.ok,
                            expected=scenario.expected, options=embedded)
        try:
            summary, result, mismatches = handlers[task](run)
            mismatches = mismatches + compare_expected(summary, scenario.expected)
            covered.update(k for k in scenario.expected if k in summary)
            report.summary, report.result, report.mismatches = summary, result, mismatches
            if mismatches:
                report.status = TaskStatus.mismatch
                logger.warning(f"[{scenario.name}] {task.value}: {'; '.join(mismatches)}")
        except SymplecticError as e:
            report.status, report.error, report.error_kind = TaskStatus.failed, str(e), type(e).__name__
            logger.error(f"[{scenario.name}] {task.value} failed: {e}")
        except (np.linalg.LinAlgError, KeyError, ValueError, ZeroDivisionError) as e:
            report.status, report.error, report.error_kind = TaskStatus.failed, f"{type(e).__name__}: {e}", type(e).__name__
            logger.error(f"[{scenario.name}] {task.value} failed: {type(e).__name__}: {e}")
        store.write_report(report)
        outcome.reports.append(report)

    missing = sorted(set(scenario.expected) - covered)
    if missing and outcome.reports and all(r.status != TaskStatus.failed for r in outcome.reports):
        last = outcome.reports[-1]
        last.mismatches.append(f"expected value(s) {missing} not produced by any task")
        last.status = TaskStatus.mismatch
        store.write_report(last)

    for kind in options.traces:
        kind = kind.value if hasattr(kind, "value") else kind
        try:
            header, rows = emit_trace(kind, run.artifacts, options.resolution)
        except TraceError as e:
            logger.error(f"[{scenario.name}] {e}")
            outcome.error = str(e)
            continue
        outcome.traces.append(str(store.write_trace(scenario.name, kind, header, rows)))
    return outcome


def run_scenario_file(
    path: str,
    output_dir: Optional[str] = None,
    mesh: Optional[int] = None,
    tol: Optional[float] = None,
    traces: Sequence[str] = (),
) -> RunOutcome:
    """Load and run one scenario file; input errors become an outcome with exit code 1."""
    try:
        scenario = load_scenario(path)
    except ScenarioError as e:
        logger.error(str(e))
        return RunOutcome(Path(path).stem, error=str(e))
    return run_scenario(scenario, output_dir, mesh, tol, traces)
