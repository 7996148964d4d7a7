import numpy as np

from nhmdp.algo.coefficients import compute_coefficients, sup_remainder
from nhmdp.algo.errors import AssumptionError
from nhmdp.algo.model import load_model_file
from nhmdp.algo.types import RunReport
from nhmdp.algo.utils import new_report
from nhmdp.log import get_logger


class CoefficientReport:
    """
    Per-stage Dobrushin coefficient Δ_n, ratio bound K_n, reward span and remainder R_n of a model,
    plus the risk contraction bound Δ_n^γ when --gamma is given.
    """
    default_format = "csv"

    def __init__(self, model_path: str, args=None):
        self.model = load_model_file(model_path)
        self.gamma = getattr(args, "gamma", None) or None  # 0 selects the average-reward problem

    def run(self) -> RunReport:
        get_logger().info("Computing stage coefficients...")
        model = self.model
        report = new_report("coeff", model)
        coefficients = compute_coefficients(model, gamma=self.gamma)

        rows = []
        for n in range(model.num_stages):
            row = {
                "stage": n,
                "section": "prefix" if n < model.q else "period",
                "delta": coefficients.delta[n],
                "ratio_K": coefficients.ratio_K[n],
                "reward_span": coefficients.reward_span[n],
                "remainder_R": coefficients.remainder_R[n],
            }
            if self.gamma is not None:
                row["risk_delta"] = coefficients.risk_delta[float(self.gamma)][n]
            rows.append(row)
        report.table = rows

        period_product = float(np.prod(coefficients.delta[model.q:]))
        report.outputs = {"period_delta_product": period_product, "num_stages": model.num_stages}
        try:
            report.outputs["sup_remainder"] = sup_remainder(model, self.gamma)
        except AssumptionError as e:
            report.outputs["sup_remainder"] = float("inf")
            report.warnings.append(str(e))
        if not np.all(np.isfinite(coefficients.ratio_K)):
            stages = [n for n in range(model.num_stages) if not np.isfinite(coefficients.ratio_K[n])]
            report.warnings.append(f"K_n infinite at stages {stages}: risk-sensitive solves are unavailable")
        return report
