"""
桌面规模的验收检查 1–10。

每个检查返回 CheckResult；几何失败（NotPositive 等）由调用方记为 ERROR。
较长的积分在同一个 AcceptanceSuite 内只跑一次。
"""

from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Dict, List

import numpy as np

from core.curvature import MetricLieFrame, curvature_tensors, nijenhuis
from core.exterior import Form
from core.flows import (
    FlowSpec,
    Trajectory,
    Weight,
    equivalence_check,
    limit_parameters,
    metric_flow_check,
    oracle,
    run,
    stationary_check,
)
from core.hitchin import ADAPTED_PHI, ADAPTED_PHI_HAT, STANDARD_OMEGA, TypeIIAStructure, lambda_invariant
from core.symbol import (
    MU1_PLUS,
    MU2_MINUS,
    SymbolProblem,
    finite_difference_dual,
    linearized_dual,
    point_frame,
    symbol_spectrum,
)
from logger import log
from presets import preset_registry
from presets.nilmanifold import nilmanifold_nijenhuis_sq, positivity_margin
from presets.solvmanifold import SOLV_LAMBDA
from semiflat.forms import norm_identity_residual, reconstruct_forms
from semiflat.verification import SemiflatSetup, refinement_study

STANDARD_J = np.kron(np.eye(3), np.array([[0.0, -1.0], [1.0, 0.0]]))


@dataclass
class CheckResult:
    number: int
    name: str
    passed: bool
    details: Dict[str, float] = field(default_factory=dict)

    @property
    def verdict(self) -> str:
        return "PASS" if self.passed else "FAIL"


def _rel(a: float, b: float) -> float:
    return abs(a - b) / max(abs(b), 1e-300)


class AcceptanceSuite:
    """
    Args:
        tolerances: config.json 的 tolerances 节
        seed: 随机性质检查的种子
        quick: 缩短积分区间与网格，用于冒烟测试（容差不变）
    """

    def __init__(self, tolerances: Dict[str, float], seed: int = 0, quick: bool = False):
        self.tol = tolerances
        self.seed = seed
        self.quick = quick

    def rng(self, offset: int) -> np.random.Generator:
        return np.random.default_rng(self.seed + offset)

    # ------------------------------------------------------------------ 共享的积分

    @cached_property
    def nil(self):
        return preset_registry.get("nilmanifold")

    @cached_property
    def solv(self):
        return preset_registry.get("solvmanifold")

    @cached_property
    def nil_run(self) -> Trajectory:
        horizon = 1.0 if self.quick else 10.0
        return run((0.0, 0.0), FlowSpec(dt=1e-3, horizon=horizon, record_stride=100), self.nil.ansatz)

    @cached_property
    def solv_initial(self):
        return (1.0, 2.0, 2.0, 1.0)

    @cached_property
    def solv_run(self) -> Trajectory:
        # 重标度时间 τ = 2λ²t 跑到 25（quick 模式到 5）
        tau = 5.0 if self.quick else 25.0
        spec = FlowSpec(dt=1e-3, horizon=tau / (2.0 * SOLV_LAMBDA ** 2), record_stride=100)
        return run(self.solv_initial, spec, self.solv.ansatz)

    # ------------------------------------------------------------------ 1–10

    def adapted_frame(self) -> CheckResult:
        structure = TypeIIAStructure.build(ADAPTED_PHI, point_frame(), check_closed=False)
        details = {
            "J": float(np.max(np.abs(structure.J - STANDARD_J))),
            "phi_hat": (structure.phi_hat - ADAPTED_PHI_HAT).norm(),
            "norm_sq": abs(structure.norm_sq - 1.0),
            "g": float(np.max(np.abs(structure.g - np.eye(6)))),
        }
        return CheckResult(1, "adapted frame", max(details.values()) <= self.tol["adapted"], details)

    def hitchin_equivalence(self) -> CheckResult:
        rng = self.rng(2)
        worst = 0.0
        count = 0
        while count < 20:
            a, b = rng.uniform(-0.5, 2.0), rng.uniform(-1.0, 1.0)
            if positivity_margin(a, b) <= 0.05:
                continue
            report = equivalence_check(self.nil.ansatz.form((a, b)), self.nil.frame)
            worst = max(worst, report["dd_dagger_vs_dLd"] / max(1.0, report["scale"]))
            count += 1
        return CheckResult(2, "dd†φ = dΛdφ̂", worst <= self.tol["equivalence"], {"max_residual": worst, "points": count})

    def nilmanifold_oracle(self) -> CheckResult:
        traj = self.nil_run
        times = traj.column("t")
        a, b = traj.column("a"), traj.column("b")
        profile = max(_rel((1.0 + ai) ** 1.5, 1.0 + 3.0 * t) for ai, t in zip(a, times))
        states = max(
            float(np.max(np.abs(p - oracle(traj.preset, t, (0.0, 0.0))) / np.maximum(1.0, np.abs(p))))
            for p, t in zip(traj.params, times)
        )
        nij = max(_rel(n, nilmanifold_nijenhuis_sq(t, (0.0, 0.0))) for n, t in zip(traj.column("nijSq"), times))
        drift = float(np.max(np.abs(b)))
        details = {"profile_rel": profile, "state_rel": states, "nijenhuis_rel": nij, "b_drift": drift}
        passed = max(profile, states, nij) <= self.tol["oracle_rel"] and drift < self.tol["drift"]
        return CheckResult(3, "nilmanifold closed form", passed, details)

    def solvmanifold_limit(self) -> CheckResult:
        traj = self.solv_run
        ratios = np.array([list(self.solv.conserved_quantities(p).values()) for p in traj.params])
        ratio_drift = float(np.max(np.abs(ratios / ratios[0] - 1.0)))
        final = traj.final
        normalized = final / np.sqrt(traj.column("normSq")[-1])
        limit = limit_parameters(traj.preset, self.solv_initial)
        distance = float(np.max(np.abs(normalized - limit)))
        eigen = stationary_check(self.solv.ansatz.form(limit), self.solv.frame)
        eigenvalue = 2.0 * SOLV_LAMBDA ** 2
        details = {
            "ratio_drift": ratio_drift,
            "limit_distance": distance,
            "eigenform_residual": eigen["residual"],
            "eigenvalue_error": abs(eigen["c"] - eigenvalue),
        }
        passed = (
            ratio_drift <= self.tol["ratio"]
            and (self.quick or distance < self.tol["limit_distance"])
            and eigen["residual"] < self.tol["eigenform"]
            and details["eigenvalue_error"] < self.tol["eigenform"]
        )
        return CheckResult(4, "solvmanifold limit", passed, details)

    def curvature_identities(self) -> CheckResult:
        rng = self.rng(5)
        worst_scalar = worst_split = 0.0
        for preset, sampler in (
            (self.nil, lambda: (rng.uniform(-0.5, 2.0), rng.uniform(-0.5, 0.5))),
            (self.solv, lambda: tuple(rng.uniform(0.5, 2.0, size=4))),
        ):
            for _ in range(20):
                params = sampler()
                if not preset.ansatz.is_positive(params):
                    continue
                structure = TypeIIAStructure.build(preset.ansatz.form(params), preset.frame)
                metric = MetricLieFrame.from_structure(structure)
                nij = nijenhuis(metric)
                scalar = curvature_tensors(metric).scalar
                scale = max(1.0, nij.norm_sq)
                worst_scalar = max(worst_scalar, abs(scalar + nij.norm_sq) / scale)
                split = nij.n_minus - (2.0 * nij.n_plus - 0.25 * nij.norm_sq * structure.g)
                worst_split = max(worst_split, float(np.max(np.abs(split))) / scale)
        calibration = 0.0
        for a, b in zip(np.linspace(-0.5, 2.0, 10), np.linspace(-0.4, 0.4, 10)):
            structure = TypeIIAStructure.build(self.nil.ansatz.form((a, b)), self.nil.frame)
            value = nijenhuis(MetricLieFrame.from_structure(structure)).norm_sq
            calibration = max(calibration, _rel(value, positivity_margin(a, b) ** -1.5))
        details = {"scalar": worst_scalar, "n_minus": worst_split, "calibration": calibration}
        return CheckResult(5, "curvature identities", max(details.values()) <= self.tol["curvature"], details)

    def metric_flow(self) -> CheckResult:
        details = {}
        for key, preset, initial, horizon in (
            ("nil", self.nil, (0.0, 0.0), 0.5),
            ("solv", self.solv, (1.0, 2.0, 2.0, 1.0), 0.2),
        ):
            spec = FlowSpec(dt=1e-3, horizon=horizon, record_stride=1)
            report = metric_flow_check(run(initial, spec, preset.ansatz), preset.ansatz)
            details[f"{key}_metric_rel"] = report["metric_rel"]
            details[f"{key}_u_rel"] = report["u_rel"]
        return CheckResult(6, "metric flow consistency", max(details.values()) < self.tol["metric_flow_rel"], details)

    def symbol_lemma(self) -> CheckResult:
        hitchin = symbol_spectrum(SymbolProblem.canonical())
        spectrum = float(np.max(np.abs(np.sort(hitchin.eigenvalues.real) - np.array([0.0, 0.0, 1.0, 1.0, 1.0]))))
        # 命名基下 Hitchin 符号是对角阵 diag(1, 0, 1, 1, 0)
        eigenvectors = float(np.max(np.abs(hitchin.matrix - np.diag([1.0, 0.0, 1.0, 1.0, 0.0]))))
        kernel_labels = [label for label, value in zip(hitchin.labels, np.diag(hitchin.matrix)) if abs(value) < 1e-10]
        type_iia = symbol_spectrum(SymbolProblem.canonical(FlowSpec(weight=Weight.TYPE_IIA)))
        details = {
            "spectrum": spectrum,
            "eigenvectors": eigenvectors,
            "hitchin_kernel": hitchin.kernel_dimension,
            "type_iia_kernel": type_iia.kernel_dimension,
        }
        passed = (
            spectrum <= self.tol["symbol"]
            and eigenvectors <= self.tol["symbol"]
            and kernel_labels == ["mu1+", "mu2-"]
            and type_iia.kernel_dimension == 1
        )
        log.debug(f"Acceptance: Hitchin 符号的核 {kernel_labels}（μ₁⁺ = {MU1_PLUS}, μ₂⁻ = {MU2_MINUS}）")
        return CheckResult(7, "symbol lemma", passed, details)

    def variation_formula(self) -> CheckResult:
        rng = self.rng(8)
        worst = 0.0
        bases = 0
        while bases < 5:
            phi = ADAPTED_PHI + 0.1 * Form.from_vector(3, rng.standard_normal(20))
            if lambda_invariant(phi, STANDARD_OMEGA) >= 0:
                continue
            bases += 1
            for _ in range(10):
                delta = Form.from_vector(3, rng.standard_normal(20))
                exact = linearized_dual(phi, delta)
                numeric = finite_difference_dual(phi, delta, 1e-5)
                worst = max(worst, (exact - numeric).norm() / max(exact.norm(), 1e-300))
        return CheckResult(8, "variation formula", worst <= self.tol["variation_rel"], {"max_rel": worst})

    def semiflat_duality(self) -> CheckResult:
        sizes = (16, 32) if self.quick else (16, 32, 64)
        steps = 2 if self.quick else 20
        details = {}
        passed = True
        for flow in ("iib", "kr"):
            setup = SemiflatSetup.single_mode(1e-2, dt=1e-5, steps=steps, flow=flow, residual_stride=10)
            study = refinement_study(setup, sizes)
            details[f"{flow}_order"] = study.min_order
            details[f"{flow}_residual"] = study.residuals[-1]
            passed = passed and study.min_order >= self.tol["semiflat_order"]
        identity = max(norm_identity_residual(reconstruct_forms(SemiflatSetup.single_mode(1e-2).build_field(n)))
                       for n in sizes)
        details["norm_identity"] = identity
        passed = passed and identity <= self.tol["norm_identity"]
        return CheckResult(9, "semi-flat duality", passed, details)

    def structural_invariants(self) -> CheckResult:
        tol = self.tol["structural"]
        worst = 0.0
        monotone = True
        trajectories: List[Trajectory] = [self.nil_run, self.solv_run]
        torus = preset_registry.get("torus")
        trajectories.append(run((0.0, 0.0), FlowSpec(dt=1e-3, horizon=1.0), torus.ansatz))
        for traj in trajectories:
            scale = np.maximum(1.0, np.sqrt(traj.column("normSq")))
            worst = max(worst, float(np.max(traj.column("dResid") / scale)), float(np.max(traj.column("primResid") / scale)))
            if np.any(traj.column("lambda") >= 0):
                worst = float("inf")
            density = traj.column("H")
            monotone = monotone and bool(np.all(np.diff(density) >= -1e-12 * np.abs(density[1:])))
        return CheckResult(10, "structural invariants", worst <= tol and monotone, {"max_monitor": worst, "monotone": float(monotone)})

    # ------------------------------------------------------------------ 入口

    def checks(self) -> Dict[int, Callable[[], CheckResult]]:
        return {
            1: self.adapted_frame,
            2: self.hitchin_equivalence,
            3: self.nilmanifold_oracle,
            4: self.solvmanifold_limit,
            5: self.curvature_identities,
            6: self.metric_flow,
            7: self.symbol_lemma,
            8: self.variation_formula,
            9: self.semiflat_duality,
            10: self.structural_invariants,
        }
