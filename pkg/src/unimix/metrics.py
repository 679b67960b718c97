"""Channel-recovery metrics and trajectory health checks.

Recovered channels are compared to the truth in Choi space, where the
non-uniqueness of mixed-unitary decompositions (component order, global
phases) drops out: two descriptions are the same map iff their Choi
matrices coincide. Trajectory audits count monotonicity violations
beyond the configured slack and track weight-sum drift, tying the
recorded runs back to the monotone-descent guarantee.
"""

import json
from dataclasses import dataclass, field

import numpy as np

from .channels import MixedUnitaryChannel, apply, choi, fidelity
from .solver import FlowConfig, RunResult, TrajectoryRecord


@dataclass
class RecoveryReport:
    """Quantitative summary of one solver run.

    ``choi_distance`` is None when no reference channel was supplied.
    ``wall_time`` is measured, not derived from inputs, and is therefore
    excluded from the serialized report (artifacts must be byte-stable
    across re-runs); it lives here for in-process consumers.
    """

    final_objective: float
    final_rank: int
    restarts: int
    monotone_violations: int
    choi_distance: float | None = None
    fidelity_per_pair: list = field(default_factory=list)
    wall_time: float = 0.0
    stop_reason: str = ""
    max_sum_p_deviation: float = 0.0
    max_unitarity_defect: float = 0.0


@dataclass(frozen=True)
class TrajectoryAudit:
    monotone_violations: int
    max_sum_p_deviation: float
    max_unitarity_defect: float
    restarts: int


@dataclass(frozen=True)
class BatchSummary:
    n_runs: int
    min: float
    median: float
    max: float
    bin_edges: np.ndarray
    counts: np.ndarray


def choi_distance(a: MixedUnitaryChannel, b: MixedUnitaryChannel) -> float:
    """Frobenius distance of the Choi matrices; zero iff equal as maps."""
    if a.dim != b.dim:
        raise ValueError(f"channel dims differ: {a.dim} vs {b.dim}")
    return float(np.linalg.norm(choi(a) - choi(b)))


def audit_trajectory(record: TrajectoryRecord, cfg: FlowConfig) -> TrajectoryAudit:
    """Health check of a recorded trajectory.

    Counts objective increases beyond ``descent_slack`` between
    consecutive samples, and reports the worst weight-sum deviation
    (before renormalization) and unitarity drift seen at any sample.
    """
    if not record.samples:
        raise ValueError("empty trajectory record")
    slack = cfg.descent_slack
    violations = 0
    prev_f = record.samples[0].f
    for s in record.samples[1:]:
        if s.f > prev_f + slack:
            violations += 1
        prev_f = s.f
    return TrajectoryAudit(
        monotone_violations=violations,
        max_sum_p_deviation=max(abs(s.sum_p - 1.0) for s in record.samples),
        max_unitarity_defect=max(s.unitarity for s in record.samples),
        restarts=len(record.events),
    )


def build_report(result: RunResult, inst=None, true_channel=None,
                 cfg: FlowConfig = None) -> RecoveryReport:
    """Assemble the full report for a finished run.

    Per-pair fidelities compare each observed output to the recovered
    channel's prediction; they are a diagnostic, not the optimized
    quantity.
    """
    cfg = cfg or FlowConfig()
    audit = audit_trajectory(result.record, cfg)
    fids = []
    if inst is not None:
        for j in range(inst.n_pairs):
            predicted = apply(result.channel, inst.rho[j])
            fids.append(fidelity(inst.sigma[j], predicted))
    dist = None
    if true_channel is not None:
        dist = choi_distance(true_channel, result.channel)
    return RecoveryReport(
        final_objective=result.final_objective,
        final_rank=result.state.n_active,
        restarts=audit.restarts,
        monotone_violations=audit.monotone_violations,
        choi_distance=dist,
        fidelity_per_pair=fids,
        wall_time=result.wall_time,
        stop_reason=result.stop_reason,
        max_sum_p_deviation=audit.max_sum_p_deviation,
        max_unitarity_defect=audit.max_unitarity_defect,
    )


DEFAULT_BIN_EDGES = np.logspace(-12, 2, 57)


def batch_statistics(values, bin_edges=None) -> BatchSummary:
    """Min/median/max and a fixed-bin log histogram of Choi distances.

    Accepts RecoveryReports (with choi_distance set) or raw numbers. Bins
    are log-spaced and fixed up front so summaries from different runs
    line up; values outside the edges land in the end bins.
    """
    dists = [v.choi_distance if isinstance(v, RecoveryReport) else float(v) for v in values]
    if not dists or any(d is None for d in dists):
        raise ValueError("need at least one report with a choi_distance")
    dists = np.asarray(dists, dtype=float)
    edges = DEFAULT_BIN_EDGES if bin_edges is None else np.asarray(bin_edges, dtype=float)
    clipped = np.clip(dists, edges[0], np.nextafter(edges[-1], 0))
    counts, _ = np.histogram(clipped, bins=edges)
    return BatchSummary(
        n_runs=len(dists),
        min=float(dists.min()),
        median=float(np.median(dists)),
        max=float(dists.max()),
        bin_edges=edges,
        counts=counts,
    )


def report_to_dict(report: RecoveryReport) -> dict:
    """Report fields for JSON output. Deliberately drops wall_time so
    identical re-runs serialize to identical bytes."""
    return {
        "final_objective": report.final_objective,
        "final_rank": report.final_rank,
        "restarts": report.restarts,
        "monotone_violations": report.monotone_violations,
        "choi_distance": report.choi_distance,
        "fidelity_per_pair": list(map(float, report.fidelity_per_pair)),
        "stop_reason": report.stop_reason,
        "max_sum_p_deviation": report.max_sum_p_deviation,
        "max_unitarity_defect": report.max_unitarity_defect,
    }


def write_report_json(report: RecoveryReport, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(report_to_dict(report), fh, indent=1, sort_keys=True)
        fh.write("\n")


def write_histogram_csv(summary: BatchSummary, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("bin_left,bin_right,count\n")
        for left, right, count in zip(summary.bin_edges[:-1], summary.bin_edges[1:],
                                      summary.counts):
            fh.write(f"{left!r},{right!r},{int(count)}\n")
