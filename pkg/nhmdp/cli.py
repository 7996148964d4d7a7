import argparse
import os
import sys

from nhmdp.agent.nhmdp_agent import NhmdpAgent, commands
from nhmdp.algo.errors import UsageError
from nhmdp.algo.utils import SIMULATE_DEFAULT_PATHS, get_version
from nhmdp.config_loader import get_settings
from nhmdp.log import LoggingFormat, get_logger, setup_logger

log_level = os.environ.get("LOG_LEVEL", "INFO")
setup_logger(log_level, LoggingFormat(str(get_settings().config.get("log_format", "CONSOLE")).upper()))


# options whose values may start with '-' in a form argparse does not take for a negative number ('-2:2:0.25', '-1e-3')
SIGNED_VALUE_OPTIONS = ('--gamma', '--gammas')


def join_option_values(inargs):
    """['--gammas', '-2:2:0.25'] -> ['--gammas=-2:2:0.25']"""
    joined = []
    args = iter(inargs)
    for arg in args:
        if arg in SIGNED_VALUE_OPTIONS:
            value = next(args, None)
            joined.append(arg if value is None else f"{arg}={value}")
        else:
            joined.append(arg)
    return joined


class NhmdpArgumentParser(argparse.ArgumentParser):
    """Usage errors raise instead of exiting, so that the agent owns every exit code."""

    def error(self, message):
        raise UsageError(message)


def set_parser():
    parser = NhmdpArgumentParser(prog='nhmdp', allow_abbrev=False, description='Long-run control of nonhomogeneous finite MDPs', usage=
    """\
    nhmdp <command> --model FILE [<options>] [--<section>.<key>=<value> ...]
    For example:
    - nhmdp coeff --model model.json [--gamma G]
    - nhmdp solve --model model.json [--gamma G] [--tol T] [--kmax K] [--policy-out policy.json]
    - nhmdp eval --model model.json --policy policy.json --horizon N [--gamma G] [--simulate PATHS --seed S]
    - nhmdp curve --model model.json --gammas=-2:2:0.25 --out curve.csv
    - nhmdp stability --model model.json --policies DIR --out trace.csv
    - nhmdp check --model model.json

    Supported commands:
    - coeff - Per-stage Dobrushin coefficients, ratio bounds, reward spans and remainder bounds.

    - solve - Average-reward (or risk-sensitive) gains, anchored biases and an optimal policy.

    - eval - Exact finite-horizon evaluation and long-run gain of a given policy.

    - curve - Long-run risk-sensitive gain as a function of the risk factor gamma.

    - stability - Gain deviations of a policy sequence from its limit policy.

    - check - The full property suite; exit code 2 if any property fails.

    Configuration:
    To edit any configuration parameter from 'configuration.toml', just add --<section>.<key>=<value>.
    For example: 'nhmdp solve --model model.json --solver.tol=1e-12'
    """)
    parser.add_argument('--version', action='version', version=f'nhmdp {get_version()}')
    parser.add_argument('command', type=str, help='The command to run', choices=commands)
    parser.add_argument('--model', type=str, required=True, help='Model file (JSON)')
    parser.add_argument('--gamma', type=float, default=None, help='Risk factor; omitted or 0 for average reward')
    parser.add_argument('--tol', type=float, default=None, help='Solver tolerance (default solver.tol)')
    parser.add_argument('--kmax', type=int, default=None, help='Maximal stage applications (default solver.kmax)')
    parser.add_argument('--out', type=str, default=None, help='Write the report to this file instead of stdout')
    output_format = parser.add_mutually_exclusive_group()
    output_format.add_argument('--csv', action='store_true', help='Write the tabular report as CSV')
    output_format.add_argument('--json', action='store_true', help='Write the full report as JSON')
    parser.add_argument('--seed', type=int, default=None, help='Random seed for simulation and checks')
    parser.add_argument('--threads', type=int, default=None, help='Simulation workers (env NHMDP_THREADS)')
    parser.add_argument('--policy', type=str, default=None, help='Policy file (JSON) for eval')
    parser.add_argument('--policy-out', dest='policy_out', type=str, default=None,
                        help='Write the greedy policy of solve to this file')
    parser.add_argument('--horizon', type=int, default=None, help='Horizon N for eval (default analysis.horizon)')
    parser.add_argument('--state', type=str, default=None, help='Start state label for eval (default: the anchor)')
    parser.add_argument('--simulate', type=int, nargs='?', const=SIMULATE_DEFAULT_PATHS, default=None,
                        help='Number of simulated paths for eval (bare flag: analysis.simulate_paths)')
    parser.add_argument('--gammas', type=str, default=None, help="Gamma grid 'start:stop:step' or 'g1,g2,...'")
    parser.add_argument('--policies', type=str, default=None, help='Directory of <m>.json and limit.json policies')
    return parser


def run(inargs=None) -> int:
    if inargs is None:
        inargs = sys.argv[1:]
    parser = set_parser()
    try:
        args, rest = parser.parse_known_args(join_option_values(inargs))
    except UsageError as e:
        get_logger().error(f"{e}\n{parser.format_usage()}")
        return e.exit_code
    return NhmdpAgent().handle_request(args, rest, argv=list(inargs))


if __name__ == '__main__':
    sys.exit(run())
