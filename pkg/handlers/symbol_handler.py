from core.hitchin import TypeIIAStructure
from core.symbol import SymbolProblem, symbol_spectrum
from handlers.base import EXIT_OK, execute, output_path
from handlers.schema import RunConfig, SymbolConfig
from logger import log_report
from presets import preset_registry
from storage.artifacts import write_json, write_manifest


def build_problem(cfg: SymbolConfig) -> SymbolProblem:
    """没有指定预设时在适配标架的模型点上分析。"""
    spec = cfg.spec()
    if cfg.preset is None:
        return SymbolProblem.canonical(spec, cfg.xi)
    preset = preset_registry.get(cfg.preset)
    family = preset.ansatz
    params = cfg.init if cfg.init is not None else family.default
    structure = TypeIIAStructure.build(family.form(params), preset.frame)
    return SymbolProblem(structure, cfg.xi, spec)


def _body(run: RunConfig) -> int:
    cfg: SymbolConfig = run.section
    report = symbol_spectrum(build_problem(cfg)).to_dict()
    report["xi"] = list(cfg.xi)
    report["base"] = cfg.preset or "adapted"
    path = output_path(run, f"symbol_{report['weight']}.json")
    write_json(path, report)
    write_manifest(path, run.command, run.effective())
    log_report("symbol", report)
    return EXIT_OK


def handle(run: RunConfig) -> int:
    return execute("symbol", _body, run)
