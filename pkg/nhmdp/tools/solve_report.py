import numpy as np

from nhmdp.algo.model import load_model_file
from nhmdp.algo.policy import policy_table, serialize_policy
from nhmdp.algo.solver import solve_average, solve_risk
from nhmdp.algo.types import RiskSolution, RunReport, Solution
from nhmdp.algo.utils import new_report
from nhmdp.log import get_logger

BIAS_BOUND_SLACK = 1e-9


class SolveReport:
    """
    Solves the average-reward (or, with --gamma, the risk-sensitive) Bellman equations and reports
    gains, anchored biases, the greedy policy and the convergence certificate.
    """
    default_format = "json"

    def __init__(self, model_path: str, args=None):
        self.model = load_model_file(model_path)
        self.gamma = getattr(args, "gamma", None) or None  # 0 selects the average-reward problem
        self.tol = getattr(args, "tol", None)
        self.kmax = getattr(args, "kmax", None)
        self.policy_out = getattr(args, "policy_out", None)

    def _solve(self) -> Solution:
        if self.gamma is None:
            return solve_average(self.model, tol=self.tol, kmax=self.kmax)
        return solve_risk(self.model, self.gamma, tol=self.tol, kmax=self.kmax)

    def run(self) -> RunReport:
        get_logger().info("Solving Bellman equations...")
        model = self.model
        report = new_report("solve", model)
        solution = self._solve()

        spans = np.array([w.span for w in solution.w])
        within_bounds = bool(np.all(spans <= solution.bias_span_bounds + BIAS_BOUND_SLACK))
        report.outputs = {
            "gamma": solution.gamma,
            "long_run_gain": solution.long_run_gain,
            "lambdas": solution.lambdas,
            "w": {str(n): w.as_dict(model.states) for n, w in enumerate(solution.w)},
            "policy": policy_table(solution.policy, model),
            "iterations_used": solution.iterations_used,
            "increment": solution.increment,
            "apriori_bound": solution.apriori_bound,
            "residuals": solution.residuals,
            "max_residual": float(solution.residuals.max()),
            "bias_span_bounds": solution.bias_span_bounds,
            "bias_within_bounds": within_bounds,
        }
        if isinstance(solution, RiskSolution):
            report.outputs["certificate"] = solution.certificate
        if not within_bounds:
            report.warnings.append("a bias span exceeds its remainder bound R_n")

        report.table = [
            {"stage": n, "lambda": solution.lambdas[n], "bias_span": spans[n],
             "bias_span_bound": solution.bias_span_bounds[n], "residual": solution.residuals[n],
             **{f"w[{state}]": value for state, value in solution.w[n].as_dict(model.states).items()}}
            for n in range(model.num_stages)
        ]

        if self.policy_out:
            with open(self.policy_out, "w", encoding="utf-8") as f:
                f.write(serialize_policy(solution.policy, model))
            report.outputs["policy_file"] = self.policy_out
            get_logger().info(f"Greedy policy written to {self.policy_out}")
        return report
