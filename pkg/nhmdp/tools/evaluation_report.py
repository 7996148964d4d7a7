from nhmdp.algo.analysis import finite_horizon_average, finite_horizon_risk
from nhmdp.algo.errors import UsageError
from nhmdp.algo.model import load_model_file
from nhmdp.algo.policy import load_policy_file
from nhmdp.algo.simulation import simulate
from nhmdp.algo.solver import solve_policy_average, solve_policy_risk
from nhmdp.algo.types import RunReport
from nhmdp.algo.utils import new_report, resolve_simulate_paths
from nhmdp.config_loader import get_settings
from nhmdp.log import get_logger


class EvaluationReport:
    """
    Evaluates a fixed Markov policy: exact N-stage average (and risk value), the long-run policy gain
    from the Poisson equations and, with --simulate, a seeded Monte Carlo cross-check.
    """
    default_format = "json"

    def __init__(self, model_path: str, args=None):
        if not getattr(args, "policy", None):
            raise UsageError("eval requires --policy")
        self.model = load_model_file(model_path)
        self.policy = load_policy_file(args.policy, self.model)
        settings = get_settings()
        self.horizon = args.horizon if args.horizon is not None else int(settings.analysis.horizon)
        if self.horizon < 1:
            raise UsageError(f"--horizon must be at least 1, got {self.horizon}")
        self.gamma = args.gamma or None
        self.state = args.state if args.state is not None else self.model.anchor
        self.paths = resolve_simulate_paths(args.simulate)
        self.seed = args.seed if args.seed is not None else int(settings.analysis.seed)
        self.threads = args.threads
        self.tol = args.tol
        self.kmax = args.kmax

    def run(self) -> RunReport:
        get_logger().info("Evaluating policy...")
        model, policy = self.model, self.policy
        report = new_report("eval", model)
        outputs = {
            "state": self.state,
            "horizon": self.horizon,
            "gamma": self.gamma,
            "finite_horizon_average": finite_horizon_average(model, policy, self.horizon, self.state),
        }
        if self.gamma is None:
            solution = solve_policy_average(model, policy, tol=self.tol, kmax=self.kmax)
        else:
            outputs["finite_horizon_risk"] = finite_horizon_risk(model, policy, self.horizon, self.state,
                                                                 self.gamma)
            solution = solve_policy_risk(model, policy, self.gamma, tol=self.tol, kmax=self.kmax)
        outputs["policy_gain"] = solution.long_run_gain
        outputs["policy_lambdas"] = solution.lambdas

        if self.paths:
            result = simulate(model, policy, self.horizon, self.paths, self.seed, x=self.state,
                              gamma=self.gamma, threads=self.threads)
            outputs["simulation"] = {
                "average": result.average,
                "standard_error": result.standard_error,
                "risk_value": result.risk_value,
                "paths": result.paths,
                "seed": result.seed,
            }
            deviation = abs(result.average - outputs["finite_horizon_average"])
            if deviation > 3 * result.standard_error and result.standard_error > 0:
                report.warnings.append(f"simulated average deviates by {deviation:.3e} "
                                       f"(more than 3 standard errors)")
        report.outputs = outputs
        report.table = [{key: value for key, value in outputs.items()
                         if key not in ("policy_lambdas", "simulation")}]
        return report
