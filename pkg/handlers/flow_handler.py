import numpy as np

from common.errors import ToleranceFailure
from config import config
from core.flows import run as run_flow
from handlers.base import EXIT_OK, execute, output_path
from handlers.schema import FlowConfig, RunConfig
from logger import log, log_report
from presets import preset_registry
from storage.artifacts import write_csv, write_manifest


def structural_violations(trajectory, tol: float):
    """闭性、本原性（相对 |φ|）与正性监视量中超出容差的项。"""
    violations = []
    for t, d in zip(trajectory.times, trajectory.diagnostics):
        scale = max(1.0, float(np.sqrt(d["normSq"])))
        if d["dResid"] > tol * scale:
            violations.append(f"t = {t:.6g}: dφ = {d['dResid']:.3e}")
        if d["primResid"] > tol * scale:
            violations.append(f"t = {t:.6g}: ω∧φ = {d['primResid']:.3e}")
        if d["lambda"] >= 0:
            violations.append(f"t = {t:.6g}: λ = {d['lambda']:.3e}")
    return violations


def _body(run: RunConfig) -> int:
    cfg: FlowConfig = run.section
    preset = preset_registry.get(cfg.preset)
    family = preset.ansatz
    spec = cfg.spec()
    initial = cfg.initial(family.default)
    trajectory = run_flow(initial, spec, family)

    extra_names = list(preset.conserved_quantities(trajectory.params[0]))
    header = list(trajectory.header) + extra_names
    rows = [
        row + [preset.conserved_quantities(p)[name] for name in extra_names]
        for row, p in zip(trajectory.rows(), trajectory.params)
    ]
    csv_path = output_path(run, f"flow_{preset.name}_{spec.weight.value}.csv")
    write_csv(csv_path, header, rows)
    write_manifest(csv_path, run.command, run.effective(), {"samples": len(rows)})

    tol = config.section("tolerances").get("structural", 1e-10)
    violations = structural_violations(trajectory, tol)
    summary = {
        "preset": preset.name,
        "weight": spec.weight.value,
        "initial": list(map(float, initial)),
        "final": trajectory.final.tolist(),
        "t_final": trajectory.times[-1],
        "max_projection_residual": trajectory.max_projection_residual,
        "csv": csv_path,
        "violations": len(violations),
    }
    log_report("flow", summary)
    if violations:
        for item in violations[:10]:
            log.warning(f"[flow] 结构监视量越界 {item}")
        raise ToleranceFailure(f"{len(violations)} 个结构监视量超出容差 {tol:.1e}")
    return EXIT_OK


def handle(run: RunConfig) -> int:
    return execute("flow", _body, run)
