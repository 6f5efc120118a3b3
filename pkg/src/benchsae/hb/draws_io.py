"""Columnar text dumps of retained draws.

Format: comma-separated, one header line, one row per retained sweep::

    chain,iteration,beta[0],...,beta[p-1],u[0],...,u[m-1],sigma2_e,sigma2_u,theta[0],...,theta[N-1]

Values are written with 17 significant digits so they round-trip exactly.
"""

from __future__ import annotations

import csv
from typing import Sequence

import numpy as np

from .model import ChainDraws


def draws_header(chain: ChainDraws) -> list[str]:
    return ["chain", "iteration"] + chain.parameter_names()


def write_draws(path, chains: "ChainDraws | Sequence[ChainDraws]") -> None:
    chains = [chains] if isinstance(chains, ChainDraws) else list(chains)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(draws_header(chains[0]))
        for c in chains:
            body = np.column_stack([c.beta, c.u, c.sigma2_e, c.sigma2_u, c.theta])
            for it, row in zip(c.iteration, body):
                writer.writerow([c.chain, int(it), *(f"{v:.17g}" for v in row)])


def read_draws(path) -> list[ChainDraws]:
    """Inverse of :func:`write_draws`; chains come back in first-seen order."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [r for r in reader if r]
    n_beta = sum(h.startswith("beta[") for h in header)
    n_u = sum(h.startswith("u[") for h in header)
    data = np.array([[float(v) for v in r] for r in rows]) if rows else np.empty((0, len(header)))
    out = []
    for chain_id in dict.fromkeys(int(v) for v in data[:, 0]):
        block = data[data[:, 0] == chain_id]
        k = 2
        beta = block[:, k : k + n_beta]
        k += n_beta
        u = block[:, k : k + n_u]
        k += n_u
        out.append(
            ChainDraws(
                beta=beta, u=u, theta=block[:, k + 2 :], sigma2_e=block[:, k], sigma2_u=block[:, k + 1],
                iteration=block[:, 1].astype(np.int64), chain=chain_id,
            )
        )
    return out

