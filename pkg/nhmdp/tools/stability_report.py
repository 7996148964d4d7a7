from pathlib import Path

from nhmdp.algo.analysis import stability_trace
from nhmdp.algo.errors import UsageError
from nhmdp.algo.model import load_model_file
from nhmdp.algo.policy import load_policy_file
from nhmdp.algo.types import RunReport
from nhmdp.algo.utils import new_report
from nhmdp.log import get_logger

LIMIT_POLICY_FILE = "limit.json"


class StabilityReport:
    """
    Gains of a policy sequence u^m read from a directory of `<m>.json` files, and their deviations
    from the limit policy in `limit.json`.
    """
    default_format = "csv"

    def __init__(self, model_path: str, args=None):
        directory = getattr(args, "policies", None)
        if not directory:
            raise UsageError("stability requires --policies DIR")
        self.model = load_model_file(model_path)
        self.gamma = getattr(args, "gamma", None) or None  # 0 selects the average-reward problem
        self.tol = getattr(args, "tol", None)
        self.kmax = getattr(args, "kmax", None)
        self.indices, self.sequence, self.limit = self._load_sequence(Path(directory))

    def _load_sequence(self, directory: Path):
        if not directory.is_dir():
            raise UsageError(f"--policies must name a directory, got '{directory}'")
        limit_path = directory / LIMIT_POLICY_FILE
        if not limit_path.is_file():
            raise UsageError(f"missing {LIMIT_POLICY_FILE} in '{directory}'")
        numbered = []
        for path in directory.glob("*.json"):
            if path.name == LIMIT_POLICY_FILE:
                continue
            if not path.stem.isdigit():
                get_logger().warning(f"Skipping policy file with a non-integer name: {path.name}")
                continue
            numbered.append((int(path.stem), path))
        if not numbered:
            raise UsageError(f"no <m>.json policy files in '{directory}'")
        numbered.sort()
        indices = [m for m, _ in numbered]
        sequence = [load_policy_file(path, self.model) for _, path in numbered]
        return indices, sequence, load_policy_file(limit_path, self.model)

    def run(self) -> RunReport:
        get_logger().info(f"Tracing stability over {len(self.sequence)} policies...")
        report = new_report("stability", self.model)
        trace = stability_trace(self.model, self.sequence, self.limit, gamma=self.gamma, tol=self.tol,
                                kmax=self.kmax, indices=self.indices)
        report.table = [
            {"m": m, "deviation": trace.deviations[i], "gain_deviation": trace.gain_deviations[i],
             "bias_deviation": trace.bias_deviations[i]}
            for i, m in enumerate(trace.indices)
        ]
        report.outputs = {
            "gamma": self.gamma,
            "limit_gains": trace.limit_gains,
            "gains": {str(m): trace.gains[i] for i, m in enumerate(trace.indices)},
            "final_deviation": float(trace.deviations[-1]),
        }
        return report
