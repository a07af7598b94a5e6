"""`rescale-check`: run the block-rescaling norm laws on random images."""
import logging
import tempfile
from pathlib import Path

from .command_base import CommandResult
from .config import RunConfig
from .rescale import check_rescale_laws, write_binary_grid

logger = logging.getLogger(__name__)


class RescaleCheckCommand:
    name = "rescale-check"
    help = "Check the upsample/downsample norm laws on random image pairs."
    options = {
        "b": "block factors (default 1,2,3,4)",
        "pairs": "random pairs per factor (default 10000)",
        "height": "image height (default 28)",
        "width": "image width (default 28)",
        "eps": "low-resolution radius for the transfer law (default 1)",
        "inject_fault": "scale one upsampled block by this factor (test hook)",
        "dump_dir": "directory receiving the first offending pair (default: a new temporary directory)",
    }

    def handle(self, config: RunConfig) -> CommandResult:
        seed = config.require_seed()
        factors = config.get_float_list("b", "1,2,3,4")
        pairs = config.get_int("pairs", 10_000, minimum=1)
        height = config.get_int("height", 28, minimum=1)
        width = config.get_int("width", 28, minimum=1)
        eps = config.get_float("eps", 1.0)
        fault = config.get_float("inject_fault", None)
        dump_dir = config.get_str("dump_dir", None)
        threads = config.get_int("threads", 1, minimum=1)

        report = check_rescale_laws(factors, pairs, seed, height, width, eps, fault, threads)
        rows = [[c.law, c.b, c.trials, c.violations, c.max_error] for c in report.checks]
        result = CommandResult(header=["law", "b", "trials", "violations", "max_error"], rows=rows, seed=seed)
        if report.passed:
            return result

        law, b, x, y = report.first_violation
        message = f"{law} violated for b={b}"
        out = Path(dump_dir) if dump_dir else Path(tempfile.mkdtemp(prefix="rescale-check-"))
        out.mkdir(parents=True, exist_ok=True)
        write_binary_grid(out / f"{law}_b{b}_x.bin", x)
        write_binary_grid(out / f"{law}_b{b}_y.bin", y)
        message += f"; offending pair written to {out}"
        logger.error(message)
        result.exit_code = 1
        result.message = message
        return result
