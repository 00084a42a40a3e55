from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np
import pandas as pd

from common.errors import TraceError

KERNEL_NAMES: tuple[str, ...] = ("block", "beta", "covariates")


@dataclass(eq=False)
class Trace:
    """
    Thinned samples of one chain (or a concatenation of chains) with per-kernel counters, the initial state,
    the seed and the config fingerprint.
    """

    gamma: np.ndarray
    tau: np.ndarray
    beta: np.ndarray
    kappa: np.ndarray
    log_posterior: np.ndarray
    labels: tuple[str, ...] = ()
    initial: dict[str, Any] = field(default_factory=dict)
    attempts: dict[str, int] = field(default_factory=lambda: dict.fromkeys(KERNEL_NAMES, 0))
    accepted: dict[str, int] = field(default_factory=lambda: dict.fromkeys(KERNEL_NAMES, 0))
    failures: dict[str, int] = field(default_factory=lambda: dict.fromkeys(KERNEL_NAMES, 0))
    iterations: int = 0
    thinning: int = 1
    seed: int | None = None
    fingerprint: str = ""
    chains: int = 1

    @classmethod
    def empty(cls, n_intervals: int, labels: Sequence[str] = ()) -> "Trace":
        return cls(
            gamma=np.zeros((0, n_intervals)),
            tau=np.zeros(0),
            beta=np.zeros((0, len(labels))),
            kappa=np.zeros(0),
            log_posterior=np.zeros(0),
            labels=tuple(labels),
        )

    @property
    def n_samples(self) -> int:
        return self.tau.size

    @property
    def n_intervals(self) -> int:
        return self.gamma.shape[1]

    @property
    def columns(self) -> list[str]:
        return (
            [f"state.gamma.{k}" for k in range(self.n_intervals)]
            + ["state.tau"]
            + [f"state.beta.{label}" for label in self.labels]
            + ["state.kappa", "log_posterior"]
        )

    def acceptance_rates(self) -> dict[str, float | None]:
        return {
            name: (self.accepted[name] / self.attempts[name] if self.attempts[name] else None)
            for name in self.attempts
        }

    def to_frame(self) -> pd.DataFrame:
        data = np.column_stack(
            [self.gamma, self.tau[:, None], self.beta, self.kappa[:, None], self.log_posterior[:, None]]
        )
        return pd.DataFrame(data, columns=self.columns)

    @classmethod
    def from_frame(cls, frame: pd.DataFrame, manifest: dict[str, Any] | None = None) -> "Trace":
        """Rebuild a trace from its CSV columns; counters and metadata come from the manifest if given."""
        columns = list(frame.columns)
        gamma_columns = [c for c in columns if c.startswith("state.gamma.")]
        beta_columns = [c for c in columns if c.startswith("state.beta.")]
        required = {"state.tau", "state.kappa", "log_posterior"}
        if not gamma_columns or not required.issubset(columns):
            raise TraceError(f"trace columns {columns} lack the state.gamma.*, state.tau, state.kappa or log_posterior fields")
        manifest = manifest or {}
        trace = cls(
            gamma=frame[gamma_columns].to_numpy(dtype=float),
            tau=frame["state.tau"].to_numpy(dtype=float),
            beta=frame[beta_columns].to_numpy(dtype=float),
            kappa=frame["state.kappa"].to_numpy(dtype=float),
            log_posterior=frame["log_posterior"].to_numpy(dtype=float),
            labels=tuple(c.removeprefix("state.beta.") for c in beta_columns),
            initial=manifest.get("initial", {}),
            iterations=int(manifest.get("iterations", 0)),
            thinning=int(manifest.get("thinning", 1)),
            seed=manifest.get("seed"),
            fingerprint=manifest.get("fingerprint", ""),
            chains=int(manifest.get("chains", 1)),
        )
        for name in ("attempts", "accepted", "failures"):
            getattr(trace, name).update(manifest.get(name, {}))
        if trace.columns != columns:
            raise TraceError(f"trace columns {columns} are out of order")
        return trace

    def manifest(self, **extra: Any) -> dict[str, Any]:
        return {
            "seed": self.seed,
            "fingerprint": self.fingerprint,
            "iterations": self.iterations,
            "thinning": self.thinning,
            "chains": self.chains,
            "n_samples": self.n_samples,
            "labels": list(self.labels),
            "attempts": dict(self.attempts),
            "accepted": dict(self.accepted),
            "failures": dict(self.failures),
            "acceptance_rates": self.acceptance_rates(),
            "initial": self.initial,
            **extra,
        }


def merge_traces(traces: Sequence[Trace]) -> Trace:
    """
    Concatenate the samples and add up the counters of traces that share a header.

    :param traces: one or more traces
    :return: the merged trace
    """
    if not traces:
        raise TraceError("at least one trace is needed")
    header = traces[0].columns
    for trace in traces[1:]:
        if trace.columns != header:
            raise TraceError(f"incompatible trace headers: {trace.columns} against {header}")
    first = traces[0]
    merged = Trace(
        gamma=np.vstack([t.gamma for t in traces]),
        tau=np.concatenate([t.tau for t in traces]),
        beta=np.vstack([t.beta for t in traces]),
        kappa=np.concatenate([t.kappa for t in traces]),
        log_posterior=np.concatenate([t.log_posterior for t in traces]),
        labels=first.labels,
        initial=first.initial,
        iterations=sum(t.iterations for t in traces),
        thinning=first.thinning,
        seed=first.seed,
        fingerprint=first.fingerprint,
        chains=sum(t.chains for t in traces),
    )
    for name in ("attempts", "accepted", "failures"):
        totals = getattr(merged, name)
        for trace in traces:
            for kernel, count in getattr(trace, name).items():
                totals[kernel] = totals.get(kernel, 0) + count
    return merged
