"""`curve`: train a small model on synthetic data and trace its susceptibility curve."""
import logging

from . import attack
from .bounds import NormOrder
from .command_base import CommandResult
from .config import RunConfig

logger = logging.getLogger(__name__)


class CurveCommand:
    name = "curve"
    help = "PGD susceptibility curve of a model trained on a synthetic dataset."
    options = {
        "n": "dimension",
        "m": "number of classes (default 2)",
        "spread": "per-class spread (default 0.05)",
        "count": "dataset size (default 400)",
        "test_fraction": "held-out fraction attacked (default 0.5)",
        "model": "linear or mlp",
        "hidden": "mlp hidden width (default 16)",
        "epochs": "training epochs (default 300)",
        "lr": "initial learning rate",
        "p": "attack norm: 0, 2 or inf",
        "eps": "strictly increasing radius grid",
        "steps": "PGD steps (default 100)",
        "step_size": "PGD step size (default 2.5*eps/steps)",
        "random_start": "start PGD from a random point of the ball",
    }

    def handle(self, config: RunConfig) -> CommandResult:
        seed = config.require_seed()
        n = config.get_int("n", minimum=1)
        m = config.get_int("m", 2, minimum=1)
        spread = config.get_float("spread", 0.05, n=n)
        count = config.get_int("count", 400, minimum=0)
        test_fraction = config.get_float("test_fraction", 0.5)
        kind = config.get_str("model", "linear", choices=("linear", "mlp"))
        epochs = config.get_int("epochs", 300, minimum=0)
        norm = NormOrder.parse(config.get_str("p", "2"))
        grid = config.get_float_list("eps", n=n)
        steps = config.get_int("steps", 100, minimum=1)
        step_size = config.get_float("step_size", None, n=n)
        random_start = config.get_bool("random_start", False)
        threads = config.get_int("threads", 1, minimum=1)

        data = attack.synth_dataset(n, m, spread, count, seed)
        train, test = data.split(test_fraction, seed)
        if kind == "linear":
            model = attack.train_linear(train, epochs, config.get_float("lr", 1.0), seed)
        else:
            hidden = config.get_int("hidden", 16, minimum=1)
            model = attack.train_mlp1(train, hidden, epochs, config.get_float("lr", 0.5), seed)
        logger.info(
            "trained %s model: train accuracy %.4f, test accuracy %.4f",
            kind, attack.accuracy(model, train), attack.accuracy(model, test),
        )

        curve = attack.susceptibility_curve(
            model, test, norm, grid, steps, step_size, seed, threads, random_start
        )
        return CommandResult(
            header=["eps", "fooled_fraction", "n_points"],
            rows=[[p.eps, p.fooled_fraction, p.n_points] for p in curve.points],
            seed=seed,
        )
