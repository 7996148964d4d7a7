from nhmdp.algo.analysis import gain_curve
from nhmdp.algo.model import load_model_file
from nhmdp.algo.types import RunReport
from nhmdp.algo.utils import new_report, parse_gamma_grid
from nhmdp.config_loader import get_settings
from nhmdp.log import get_logger


class GainCurveReport:
    default_format = "csv"

    def __init__(self, model_path: str, args=None):
        self.model = load_model_file(model_path)
        grid = getattr(args, "gammas", None) or get_settings().analysis.curve_gammas
        self.gammas = parse_gamma_grid(grid)
        self.tol = getattr(args, "tol", None)
        self.kmax = getattr(args, "kmax", None)

    def run(self) -> RunReport:
        get_logger().info(f"Computing gain curve on {len(self.gammas)} risk factors...")
        report = new_report("curve", self.model)
        curve = gain_curve(self.model, self.gammas, tol=self.tol, kmax=self.kmax)
        report.table = [{"gamma": point.gamma, "gain": point.gain, "max_span_gap": point.max_span_gap}
                        for point in curve.points]
        report.outputs = {
            "smallest_gamma_span_gap": curve.smallest_gamma_span_gap,
            "stage_gains": {repr(point.gamma): list(point.stage_gains) for point in curve.points},
        }
        if any(b < a for a, b in zip(curve.gains, curve.gains[1:])):
            report.warnings.append("gain curve is not non-decreasing in gamma")
        return report
