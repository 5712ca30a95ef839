from argparse import ArgumentParser, Namespace
from pathlib import Path
from typing import Callable

from rich.console import Console
from rich.table import Table

from ..dataset import read_contexts
from ..diagnostics import effective_dimension, ntk_matrix, regret_bound
from ..errors import ContractViolation

MAX_CONTEXTS = 500
TOP_EIGENVALUES = 5


def register_args(make_parser: Callable[..., ArgumentParser]):
    parser = make_parser("ntk", help="effective dimension of the NTK over a set of contexts")
    parser.set_defaults(entrypoint=main)
    parser.add_argument("csv", type=Path, help="CSV file with one context per row")
    parser.add_argument("--depth", type=int, default=2, help="Number of network layers L")
    parser.add_argument("--lambda", dest="lam", type=float, default=1.0, help="Regularization λ")
    parser.add_argument(
        "--bandits", type=int, help="Also report the regret bound of an assembled learner with this many bandits"
    )
    parser.add_argument("--c-bar", type=float, default=1.0, help="Lipschitz constant C̄ for the regret bound")
    parser.add_argument("--delta", type=float, default=0.1, help="Confidence level δ for the regret bound")
    parser.add_argument("--norm-bound", type=float, default=1.0, help="Parameter norm bound S for the regret bound")


def main(args: Namespace):
    contexts = read_contexts(args.csv)
    t = contexts.shape[0]
    if t > MAX_CONTEXTS:
        raise ContractViolation(
            f"{args.csv} holds {t} contexts, the NTK matrix is limited to {MAX_CONTEXTS}; subsample the file first"
        )

    result = ntk_matrix(contexts, args.depth)
    p_tilde = effective_dimension(result.matrix, t, args.lam)

    console = Console(highlight=False)
    console.print(f"T = {t}")
    console.print(f"effective dimension = {p_tilde!r}")

    table = Table("rank", "eigenvalue", title="largest NTK eigenvalues", title_justify="left")
    for rank, value in enumerate(result.eigenvalues()[:TOP_EIGENVALUES], start=1):
        table.add_row(str(rank), repr(float(value)))
    console.print(table)

    if args.bandits is not None:
        bound = regret_bound(t, p_tilde, args.bandits, args.lam, args.delta, args.norm_bound, args.c_bar)
        console.print(f"regret bound ({args.bandits} bandits) = {bound!r}")
