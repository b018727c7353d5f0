"""Run the strip-pressure commands in the command line.
"""
import sys
from typing import List, Optional

import strip_pressure.core.utils as utils
from strip_pressure.core.commands import (
    CheckCommand,
    EigenReportCommand,
    EntropyCommand,
    RunCommand,
)
from strip_pressure.core.errors import (
    ColumnBudgetError,
    ConvergenceError,
    DegenerateStripError,
    GateFailedError,
    IdentityViolationError,
    ModelFileError,
    NotMixingError,
    StripEmptyError,
)

COMMANDS = {
    "check": CheckCommand,
    "run": RunCommand,
    "entropy": EntropyCommand,
    "eigen-report": EigenReportCommand,
}

EXIT_GATE_FAILED = 2
EXIT_NUMERICAL = 3
EXIT_MODEL_FILE = 4
EXIT_INVALID_INPUT = 5

NUMERICAL_ERRORS = (
    ConvergenceError,
    IdentityViolationError,
    NotMixingError,
    StripEmptyError,
    DegenerateStripError,
    ColumnBudgetError,
)


def main(argv: Optional[List[str]] = None) -> int:
    parser = utils.init_parsers(COMMANDS)
    args = parser.parse_args(argv)
    logger = utils.Logger("cli")
    try:
        command = COMMANDS[args.command].create_from_args(args)
        response = command.process(args)
    except GateFailedError as e:
        logger.error(str(e))
        return EXIT_GATE_FAILED
    except ModelFileError as e:
        logger.error(str(e))
        return EXIT_MODEL_FILE
    except NUMERICAL_ERRORS as e:
        logger.error(str(e))
        return EXIT_NUMERICAL
    except ValueError as e:
        logger.error(f"Invalid input: {e}")
        return EXIT_INVALID_INPUT
    print(response)
    return 0


def run() -> None:
    sys.exit(main())


if __name__ == "__main__":
    run()
