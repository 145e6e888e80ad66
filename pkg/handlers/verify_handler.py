from common.errors import ConfigError, SymflowError
from config import config
from handlers.acceptance import AcceptanceSuite, CheckResult
from handlers.base import EXIT_OK, execute, output_path
from handlers.schema import RunConfig, VerifyConfig
from logger import log, print_table
from storage.artifacts import format_float, write_json, write_manifest

EXIT_GEOMETRIC = 3
EXIT_TOLERANCE = 4
VERDICT_STYLES = {"PASS": "green", "FAIL": "red", "ERROR": "bold red"}


def _body(run: RunConfig) -> int:
    cfg: VerifyConfig = run.section
    suite = AcceptanceSuite(config.section("tolerances"), seed=run.seed, quick=cfg.quick)
    available = suite.checks()
    selected = sorted(cfg.checks) if cfg.checks else sorted(available)
    unknown = [n for n in selected if n not in available]
    if unknown:
        raise ConfigError(f"未知的验收检查编号 {unknown}，可用 1..{len(available)}")

    verdicts = []
    errors = failures = 0
    for number in selected:
        log.info(f"[verify-all] 检查 {number} 开始")
        try:
            result: CheckResult = available[number]()
            verdict, details, name = result.verdict, result.details, result.name
            failures += not result.passed
        except SymflowError as e:
            log.error(f"[verify-all] 检查 {number} 出错: {type(e).__name__}: {e}", exc_info=True)
            verdict, details, name = "ERROR", {"error": f"{type(e).__name__}: {e}"}, available[number].__name__
            errors += 1
        verdicts.append({"check": number, "name": name, "verdict": verdict, "details": details})

    print_table(
        "Acceptance verdicts",
        ("#", "check", "verdict", "details"),
        [
            (v["check"], v["name"], v["verdict"], ", ".join(
                f"{k}={format_float(x) if isinstance(x, float) else x}" for k, x in v["details"].items()
            ))
            for v in verdicts
        ],
        VERDICT_STYLES,
    )
    path = output_path(run, "verdicts.json")
    write_json(path, {"verdicts": verdicts, "quick": cfg.quick})
    write_manifest(path, run.command, run.effective(), {"errors": errors, "failures": failures})

    if errors:
        return EXIT_GEOMETRIC
    if failures:
        return EXIT_TOLERANCE
    return EXIT_OK


def handle(run: RunConfig) -> int:
    return execute("verify-all", _body, run)
