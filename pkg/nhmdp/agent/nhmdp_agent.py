import time
from typing import List, Optional

from nhmdp.algo.cli_args import CliArgs
from nhmdp.algo.errors import NhmdpError, UsageError
from nhmdp.algo.types import RunReport
from nhmdp.algo.utils import (format_csv, format_json, show_relevant_configurations, update_settings_from_args,
                              write_output)
from nhmdp.log import get_logger
from nhmdp.tools.coefficient_report import CoefficientReport
from nhmdp.tools.evaluation_report import EvaluationReport
from nhmdp.tools.gain_curve_report import GainCurveReport
from nhmdp.tools.property_check import PropertyCheck
from nhmdp.tools.solve_report import SolveReport
from nhmdp.tools.stability_report import StabilityReport

command2class = {
    "coeff": CoefficientReport,
    "solve": SolveReport,
    "eval": EvaluationReport,
    "curve": GainCurveReport,
    "stability": StabilityReport,
    "check": PropertyCheck,
}

commands = list(command2class.keys())

# settings section echoed in the debug log of each command
command2section = {
    "coeff": "coefficients",
    "solve": "solver",
    "eval": "analysis",
    "curve": "analysis",
    "stability": "solver",
    "check": "check",
}


class NhmdpAgent:
    def _emit(self, report: RunReport, tool_class, args) -> None:
        output_format = tool_class.default_format
        if getattr(args, "json", False):
            output_format = "json"
        elif getattr(args, "csv", False):
            output_format = "csv"

        if output_format == "csv" and report.table is not None:
            get_logger().info(f"{report.command}: model {report.model_digest[:12]}, version {report.version}, "
                              f"wall time {report.wall_time:.3f}s")
            for warning in report.warnings:
                get_logger().warning(warning)
            write_output(format_csv(report.table), getattr(args, "out", None))
        else:
            write_output(format_json(report.to_dict()), getattr(args, "out", None))

    def _handle_request(self, args, extra_args: Optional[List[str]] = None, argv: Optional[List[str]] = None) -> int:
        extra_args = extra_args or []

        # validate args
        is_valid, arg = CliArgs.validate_user_args(extra_args)
        if not is_valid:
            raise UsageError(f"CLI argument for param '{arg}' is forbidden. Use instead a configuration file.")

        # Update settings from args
        unknown = update_settings_from_args(extra_args)
        if unknown:
            raise UsageError(f"unrecognized arguments: {' '.join(unknown)}")

        action = args.command.lower()
        if action not in command2class:
            raise UsageError(f"Unknown command: {action}")
        with get_logger().contextualize(command=action):
            get_logger().debug("Relevant configuration", artifact=show_relevant_configurations(command2section[action]))
            started = time.perf_counter()
            tool_class = command2class[action]
            report = tool_class(args.model, args=args).run()
            report.command = " ".join(["nhmdp", *(argv or [action])])
            report.wall_time = time.perf_counter() - started
            self._emit(report, tool_class, args)
            if not report.passed:
                get_logger().error(f"{action}: some properties failed")
                return 2
            return 0

    def handle_request(self, args, extra_args: Optional[List[str]] = None, argv: Optional[List[str]] = None) -> int:
        """Run one command and return its exit code: 0 success, 2 model/assumption/check failure, 1 otherwise."""
        try:
            return self._handle_request(args, extra_args, argv)
        except NhmdpError as e:
            get_logger().error(str(e))
            return e.exit_code
        except OSError as e:
            get_logger().error(f"Cannot access file: {e}")
            return 1
        except Exception:
            get_logger().exception("Failed to process the command.")
            return 1
