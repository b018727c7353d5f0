"""The subcommands of the strip-pressure command line.
"""
import argparse
import logging
from abc import ABC, abstractmethod
from typing import List

import strip_pressure.core.utils as utils
from strip_pressure.core.lattice import build_column_system
from strip_pressure.core.model_file import load_model
from strip_pressure.core.pressure import (
    RunConfig,
    check_model,
    recode,
    render_run,
    run_entropy,
    run_pressure,
)
from strip_pressure.core.transfer import (
    SUMMATION_MODE,
    build_transfer,
    check_identity,
    dump_transfer,
    markov_chain,
    perron,
    power_sum_bounds,
)


class Command(ABC):
    """The abstract subcommand."""

    def __init__(self, args: argparse.Namespace = argparse.Namespace()):
        utils.load_env(getattr(args, "env_file", ""))
        self.args = args
        self.verbose = getattr(args, "verbose", False)
        utils.set_log_level(logging.DEBUG if self.verbose else logging.INFO)
        self.logger = utils.Logger(type(self).__name__, verbose=self.verbose)

    @classmethod
    def add_arguments_to_parser(cls, parser: argparse.ArgumentParser) -> None:
        parser.add_argument("-v", "--verbose", default=False, action="store_true")
        parser.add_argument(
            "--env-file", default="", type=str, help="The .env file to load settings from."
        )
        parser.add_argument(
            "model",
            type=str,
            help="A YAML model file, or a built-in such as hard_core:a=2.0 or ising:beta=0.02,h=0.",
        )
        cls._add_arguments_to_parser(parser)

    @classmethod
    @abstractmethod
    def _add_arguments_to_parser(cls, parser: argparse.ArgumentParser) -> None:
        """Add the arguments to the parser.

        Args:
            parser (argparse.ArgumentParser): The parser that accepts the arguments.
        """
        pass

    @classmethod
    def create_from_args(cls, args: argparse.Namespace) -> "Command":
        return cls(args)

    @abstractmethod
    def process(self, args: argparse.Namespace) -> str:
        raise NotImplementedError("process must be implemented.")


def _add_pc_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--pc",
        default=None,
        type=float,
        help="Lower bound on the site percolation threshold. Defaults to "
        + f"STRIP_PRESSURE_PC_BOUND or {utils.DEFAULT_PC_BOUND}.",
    )
    parser.add_argument(
        "--simulated-pc",
        default=False,
        action="store_true",
        help=f"Use the simulated threshold {utils.SIMULATED_PC}; results are non-rigorous.",
    )


def _pc_bound(args: argparse.Namespace) -> float:
    if args.simulated_pc:
        return utils.SIMULATED_PC
    if args.pc is not None:
        return args.pc
    return utils.env_float("STRIP_PRESSURE_PC_BOUND", utils.DEFAULT_PC_BOUND)


def _rel_tol(args: argparse.Namespace) -> float:
    if args.tol is not None:
        return args.tol
    return utils.env_float("STRIP_PRESSURE_REL_TOL", utils.DEFAULT_REL_TOL)


class CheckCommand(Command):
    """Evaluate the applicability gates of a model."""

    @classmethod
    def _add_arguments_to_parser(cls, parser: argparse.ArgumentParser) -> None:
        _add_pc_arguments(parser)

    def process(self, args: argparse.Namespace) -> str:
        model = load_model(args.model)
        report = check_model(model, _pc_bound(args))
        if self.verbose:
            self.logger.info(f"Checked {model.name}: passes={report.passes}.")
        return report.render()


class RunCommand(Command):
    """Sweep strip heights and estimate the pressure."""

    @classmethod
    def _add_arguments_to_parser(cls, parser: argparse.ArgumentParser) -> None:
        _add_pc_arguments(parser)
        parser.add_argument("--n-min", default=1, type=int, help="Smallest strip height.")
        parser.add_argument("--n-max", required=True, type=int, help="Largest strip height.")
        parser.add_argument(
            "--tol", default=None, type=float, help="Relative tolerance of the eigenvalue enclosure."
        )
        parser.add_argument(
            "--force",
            default=False,
            action="store_true",
            help="Run even when the applicability gate fails.",
        )
        parser.add_argument("--out", default=None, type=str, help="CSV output path.")
        parser.add_argument(
            "--power",
            default=None,
            type=int,
            help="Block length of the horizontal recoding; a multiple of the row period.",
        )
        parser.add_argument(
            "--checkpoint", default=None, type=str, help="JSON checkpoint to resume from."
        )
        parser.add_argument(
            "--workers", default=1, type=int, help="Processes evaluating heights in parallel."
        )

    def _config(self, args: argparse.Namespace) -> RunConfig:
        return RunConfig(
            model=load_model(args.model),
            n_min=args.n_min,
            n_max=args.n_max,
            rel_tol=_rel_tol(args),
            p_c_bound=_pc_bound(args),
            force=args.force,
            power=args.power,
            checkpoint_path=args.checkpoint,
            out_path=args.out,
            workers=args.workers,
        )

    def process(self, args: argparse.Namespace) -> str:
        return render_run(run_pressure(self._config(args)))


class EntropyCommand(RunCommand):
    """Estimate the topological entropy: the run with the zero interaction."""

    def process(self, args: argparse.Namespace) -> str:
        return render_run(run_entropy(self._config(args)))


class EigenReportCommand(Command):
    """Report the Perron data of a single strip."""

    @classmethod
    def _add_arguments_to_parser(cls, parser: argparse.ArgumentParser) -> None:
        parser.add_argument("--n", required=True, type=int, help="Strip height.")
        parser.add_argument(
            "--tol", default=None, type=float, help="Relative tolerance of the eigenvalue enclosure."
        )
        parser.add_argument(
            "--power", default=None, type=int, help="Block length of the horizontal recoding."
        )
        parser.add_argument(
            "--dump", default=None, type=str, help="Write the transfer matrix to this path."
        )
        parser.add_argument(
            "--power-bounds",
            default=None,
            type=int,
            metavar="M",
            help="Also report the matrix-power bounds from the entry sum of A^M.",
        )

    def process(self, args: argparse.Namespace) -> str:
        model = load_model(args.model)
        p = args.power or utils.lcm_all([model.t.period, model.b.period])
        sft, phi, t, b = recode(model, p)
        tol = _rel_tol(args)
        cs = build_column_system(sft, args.n, t, b)
        A = build_transfer(phi, cs)
        pd = perron(A, tol)
        chain = markov_chain(A, pd)
        check_identity(chain, tol)
        lines: List[str] = [
            f"model={model.name}",
            f"n={args.n}",
            f"p={p}",
            f"columns={cs.size}",
            f"essential_columns={A.size}",
            f"edges={A.cs.edge_count}",
            f"log_scale={utils.format_number(A.log_scale)}",
            f"lambda_lo={utils.format_number(pd.lambda_lo)}",
            f"lambda_hi={utils.format_number(pd.lambda_hi)}",
            f"log_lambda={utils.format_number(pd.log_lambda)}",
            f"log_lambda_lo={utils.format_number(pd.log_lambda_lo)}",
            f"log_lambda_hi={utils.format_number(pd.log_lambda_hi)}",
            f"iterations={pd.iterations}",
            f"residual={pd.residual:.3e}",
            f"identity_residual={chain.identity_residual:.3e}",
            f"entropy={utils.format_number(chain.entropy)}",
            f"expected_phi={utils.format_number(chain.expected_phi)}",
            f"chain_error_bar={chain.error_bar:.3e}",
            f"row_defect={chain.row_defect:.3e}",
            f"summation={SUMMATION_MODE}",
        ]
        if args.power_bounds is not None:
            lower, upper = power_sum_bounds(A, args.power_bounds)
            lines.append(f"power_bound_lower={utils.format_number(lower)}")
            lines.append(f"power_bound_upper={utils.format_number(upper)}")
        if args.dump:
            dump_transfer(A, args.dump)
            lines.append(f"dump={args.dump}")
        return "\n".join(lines)
