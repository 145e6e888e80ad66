import os

from common.errors import ToleranceFailure
from config import config
from handlers.base import EXIT_OK, execute, output_path
from handlers.schema import RunConfig, SemiflatConfig
from logger import log, log_report
from semiflat.forms import reconstruct_forms, require_algebraic_identities
from semiflat.verification import SERIES_COLUMNS, dump_fields, duality_series, refinement_study
from storage.artifacts import write_csv, write_json, write_manifest


def _body(run: RunConfig) -> int:
    cfg: SemiflatConfig = run.section
    setup = cfg.setup()
    tolerances = config.section("tolerances")

    initial = setup.build_field()
    require_algebraic_identities(reconstruct_forms(initial), tolerances.get("norm_identity", 1e-12))

    series = duality_series(setup)
    stem = f"semiflat_{setup.flow.value}_{setup.phase}_n{series.n}"
    csv_path = output_path(run, stem + ".csv")
    write_csv(csv_path, SERIES_COLUMNS, series.rows)
    write_manifest(csv_path, run.command, run.effective(), {"max_residual": series.max_residual})
    summary = {"flow": setup.flow.value, "phase": setup.phase, "n": series.n, "max_residual": series.max_residual}

    if cfg.dump_fields and series.final is not None:
        dump_path = dump_fields(series.final, output_path(run, stem + ".g.bin"), time=setup.steps * setup.dt)
        summary["dump"] = os.fspath(dump_path)

    failed = False
    if cfg.refinement_sizes:
        study = refinement_study(setup, cfg.refinement_sizes)
        study_path = output_path(run, f"semiflat_{setup.flow.value}_{setup.phase}_refinement.json")
        write_json(study_path, study.to_dict())
        write_manifest(study_path, run.command, run.effective())
        summary["refinement"] = study.to_dict()
        required = tolerances.get("semiflat_order", 1.8)
        if study.min_order < required:
            log.warning(f"[semiflat] 测得的收敛阶 {study.min_order:.3f} 低于要求的 {required}")
            failed = True

    log_report("semiflat", summary)
    if failed:
        raise ToleranceFailure("对偶残差的空间收敛阶不足")
    return EXIT_OK


def handle(run: RunConfig) -> int:
    return execute("semiflat", _body, run)
