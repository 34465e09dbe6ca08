"""Command-line driver: encoder generation, tracing, compensation, mitigation.

Every output is CSV or JSON; ``--svg`` adds a bare line plot for curves.
All randomness comes from ``--seed`` (default 0).

Exit status: 0 on success, 1 on bad input, 2 when ``compensate --method
hcnot`` finds no location where an HCNOT acts trivially.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .circuit import (
    CircuitFormatError,
    builtin_topology,
    emit_circuit,
    enumerate_local_partitions,
    interaction_graph,
    load_circuit,
    load_topology,
)
from .compensator import CompensationPlan, NoTrivialLocation, insert, search_hcnot, search_rz
from .mitigation import MitigationError, apply_filter, calibration_matrix, counts_vector, ConfusionMatrix
from .simulator import Counts, NoiseError, NoiseSpec, bitstring, load_noise, outcome_probabilities, sample_counts
from .steane import (
    VARIANTS,
    fidelity_simple,
    fidelity_stabilizer,
    px_from_probabilities,
    pz_from_probabilities,
    steane_plus_encoder,
)
from .tracer import Curve, detect_valley, reference_curve, trace_curve

DEFAULT_SHOTS = 10_000
REPORT_COLUMNS = (
    "stage",
    "pz",
    "px",
    "fidelity_simple",
    "fidelity_stabilizer",
    "pz_mitigated",
    "px_mitigated",
    "fidelity_simple_mitigated",
    "fidelity_stabilizer_mitigated",
)


class UsageError(Exception):
    pass


def _write(path: str | None, text: str):
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def _sibling(path: str, suffix: str) -> Path:
    p = Path(path)
    return p.with_name(p.stem + suffix)


def _topology(spec: str | None):
    if spec is None:
        return None
    p = Path(spec)
    if p.exists():
        return load_topology(p)
    return builtin_topology(spec)


def _shots(args, ns: NoiseSpec) -> int | None:
    # exact distributions whenever the noise allows it, unless shots are asked for
    if args.shots is None and not ns.gate_noise_free:
        return DEFAULT_SHOTS
    return args.shots


# --------------------------------------------------------------------------
# svg


def curve_svg(curves: list[Curve], width: int = 480, height: int = 300) -> str:
    """Minimal SVG polyline plot of one or more curves on a fixed [0, 1] axis."""
    pad = 30
    xs = sorted({i for c in curves for i in c.indices})
    lo, hi = (xs[0], xs[-1]) if xs else (0, 1)
    span = max(hi - lo, 1)

    def pt(i, v):
        x = pad + (i - lo) / span * (width - 2 * pad)
        y = height - pad - v * (height - 2 * pad)
        return f"{x:.1f},{y:.1f}"

    colours = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e")
    lines = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
        f'<rect x="{pad}" y="{pad}" width="{width - 2 * pad}" height="{height - 2 * pad}" fill="none" stroke="#999"/>',
    ]
    for k, c in enumerate(curves):
        points = " ".join(pt(i, v) for i, v in zip(c.indices, c.values))
        lines.append(
            f'<polyline fill="none" stroke="{colours[k % len(colours)]}" stroke-width="2" points="{points}">'
            f"<title>{c.label}</title></polyline>"
        )
    lines.append("</svg>\n")
    return "\n".join(lines)


# --------------------------------------------------------------------------
# subcommands


def cmd_gen(args) -> int:
    variants = VARIANTS if args.variant == "all" else (args.variant,)
    topo = _topology(args.topology)
    if args.variant == "all" and args.map:
        raise UsageError("--map applies to a single variant")
    mapping = [int(x) for x in args.map.split(",")] if args.map else None
    if len(variants) == 1:
        _write(args.out, emit_circuit(steane_plus_encoder(variants[0], mapping, topo)))
        return 0
    if args.out is None:
        raise UsageError("gen all needs --out DIR")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for v in variants:
        (out / f"{v}.circ").write_text(emit_circuit(steane_plus_encoder(v, None, topo)))
    return 0


def cmd_partitions(args) -> int:
    topo = _topology(args.topology)
    pattern = interaction_graph(load_circuit(args.pattern)) if args.pattern else None
    parts = enumerate_local_partitions(topo, args.k, pattern)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["partition", "qubits", "edges"])
    for i, p in enumerate(parts):
        edges = sorted(tuple(sorted(e)) for e in p.induced_edges)
        w.writerow([i, " ".join(map(str, p.qubits)), " ".join(f"{a}-{b}" for a, b in edges)])
    _write(args.out, buf.getvalue())
    return 0


def cmd_trace(args) -> int:
    c, ns = load_circuit(args.circuit), load_noise(args.noise)
    shots = _shots(args, ns)
    obs = trace_curve(c, ns, shots, args.seed, label="observed")
    ref = reference_curve(c, ns, shots, args.seed)
    valley = detect_valley(obs, ref)
    _write(args.out, obs.to_csv())
    report = {"valley": None if valley is None else valley.to_dict(), "shots": shots, "seed": args.seed}
    text = json.dumps(report, indent=2) + "\n"
    if args.out and args.out != "-":
        _sibling(args.out, ".valley.json").write_text(text)
        _sibling(args.out, ".reference.csv").write_text(ref.to_csv())
    else:
        sys.stderr.write(text)
    if args.svg:
        Path(args.svg).write_text(curve_svg([ref, obs]))
    return 0


def _metrics(c, ns: NoiseSpec, shots: int | None, seed: int) -> dict:
    """pz, px and both fidelities, raw and readout-mitigated."""
    B = calibration_matrix(ns.readout_flip) if ns.has_readout_noise else None
    if shots is None:
        pz_probs, px_probs = outcome_probabilities(c, ns, "X"), outcome_probabilities(c, ns, "Z")
    else:
        pz_probs = counts_vector(sample_counts(c, ns, "X", shots, seed))
        px_probs = counts_vector(sample_counts(c, ns, "Z", shots, seed + 1))
    pz, px = pz_from_probabilities(pz_probs), px_from_probabilities(px_probs)
    if B is None:
        mpz, mpx = pz, px
    else:
        mpz = pz_from_probabilities(apply_filter(B, pz_probs).v)
        mpx = px_from_probabilities(apply_filter(B, px_probs).v)
    return {
        "pz": pz,
        "px": px,
        "fidelity_simple": fidelity_simple(pz, px),
        "fidelity_stabilizer": fidelity_stabilizer(c, ns, shots, seed),
        "pz_mitigated": mpz,
        "px_mitigated": mpx,
        "fidelity_simple_mitigated": fidelity_simple(mpz, mpx),
        "fidelity_stabilizer_mitigated": fidelity_stabilizer(c, ns, shots, seed, mitigate=True),
    }


def cmd_compensate(args) -> int:
    c, ns = load_circuit(args.circuit), load_noise(args.noise)
    shots = _shots(args, ns)
    topo = _topology(args.topology)
    if args.method == "rz":
        plan = search_rz(c, ns, max_insertions=args.max_insertions, shots=shots, seed=args.seed)
    else:
        plan = search_hcnot(c, ns, max_insertions=args.max_insertions, topology=topo, shots=shots, seed=args.seed)
    after = insert(c, plan)
    rows = {"before": _metrics(c, ns, shots, args.seed), "after": _metrics(after, ns, shots, args.seed)}
    _write(args.out, plan.to_json() + "\n")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(REPORT_COLUMNS)
    for stage, m in rows.items():
        w.writerow([stage] + [repr(m[k]) for k in REPORT_COLUMNS[1:]])
    if args.out and args.out != "-":
        _sibling(args.out, ".report.csv").write_text(buf.getvalue())
        _sibling(args.out, ".circ").write_text(emit_circuit(after))
    else:
        sys.stderr.write(buf.getvalue())
    return 0


def cmd_mitigate(args) -> int:
    counts = Counts.from_json(Path(args.counts).read_text())
    if args.matrix:
        B = ConfusionMatrix.from_csv(Path(args.matrix).read_text())
    else:
        ns = load_noise(args.noise) if args.noise else NoiseSpec()
        if not ns.readout_flip:
            raise UsageError("need --matrix or a noise file with readout_flip")
        B = calibration_matrix(ns.readout_flip)
    if B.n != counts.width:
        raise UsageError(f"matrix covers {B.n} qubits but counts have width {counts.width}")
    res = apply_filter(B, counts_vector(counts))
    out = {
        "basis": counts.basis,
        "shots": counts.shots,
        "condition_number": res.condition_number,
        "clipped_mass": res.clipped_mass,
        "distribution": {bitstring(i, B.n): float(p) for i, p in enumerate(res.v) if p > 0},
    }
    _write(args.out, json.dumps(out, indent=2) + "\n")
    return 0


def cmd_report(args) -> int:
    """Stack CSV files with a shared header into one, prefixed by a ``run`` column."""
    header = None
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    for path in args.inputs:
        rows = list(csv.reader(io.StringIO(Path(path).read_text())))
        if not rows:
            raise UsageError(f"{path} is empty")
        if header is None:
            header = rows[0]
            w.writerow(["run"] + header)
        elif rows[0] != header:
            raise UsageError(f"{path} has header {rows[0]}, expected {header}")
        for r in rows[1:]:
            w.writerow([Path(path).stem] + r)
    _write(args.out, buf.getvalue())
    if args.svg:
        curves = [Curve.from_csv(Path(p).read_text(), Path(p).stem) for p in args.inputs]
        Path(args.svg).write_text(curve_svg(curves))
    return 0


# --------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="zzcancel", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="emit a Steane |+> encoder variant")
    p.add_argument("variant", choices=(*VARIANTS, "all"))
    p.add_argument("--map", help="comma-separated physical qubit per virtual qubit")
    p.add_argument("--topology", help="topology file or built-in name to validate against")
    p.add_argument("--out", help="output file (directory for 'all'); stdout by default")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("partitions", help="enumerate connected k-qubit device regions")
    p.add_argument("topology", help="topology file or built-in name (melbourne, lagos)")
    p.add_argument("--k", type=int, default=7)
    p.add_argument("--pattern", help="circuit whose interaction graph each region must host")
    p.add_argument("--out")
    p.set_defaults(func=cmd_partitions)

    for name, func, helptext in (
        ("trace", cmd_trace, "trace the phase-fidelity curve"),
        ("compensate", cmd_compensate, "search a compensating insertion"),
    ):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("circuit")
        p.add_argument("noise")
        p.add_argument("--shots", type=int, help="sample instead of computing exact distributions")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out")
        p.set_defaults(func=func)
        if name == "trace":
            p.add_argument("--svg", help="also write a line plot of observed and reference curves")
        else:
            p.add_argument("--method", choices=("rz", "hcnot"), default="rz")
            p.add_argument("--max-insertions", type=int, default=1)
            p.add_argument("--topology", help="restrict HCNOT pairs to coupled qubits")

    p = sub.add_parser("mitigate", help="apply the linear readout filter to counts")
    p.add_argument("counts", help="counts JSON")
    p.add_argument("--noise", help="noise JSON providing readout_flip")
    p.add_argument("--matrix", help="confusion matrix CSV")
    p.add_argument("--out")
    p.set_defaults(func=cmd_mitigate)

    p = sub.add_parser("report", help="merge CSV outputs of several runs")
    p.add_argument("inputs", nargs="+")
    p.add_argument("--out")
    p.add_argument("--svg", help="plot the inputs as curves")
    p.set_defaults(func=cmd_report)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "shots", None) is not None and args.shots < 1:
        print("error: --shots must be positive", file=sys.stderr)
        return 1
    if getattr(args, "seed", 0) < 0:
        print("error: --seed must be non-negative", file=sys.stderr)
        return 1
    try:
        return args.func(args)
    except NoTrivialLocation as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (
        UsageError,
        CircuitFormatError,
        NoiseError,
        MitigationError,
        ValueError,
        KeyError,
        OSError,
        json.JSONDecodeError,
    ) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
