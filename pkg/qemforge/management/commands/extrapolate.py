import math

from qemforge.exceptions import ConfigError, ExtrapolationError, QemForgeError
from qemforge.experiments import ResultRow, ResultTable, read_result_table, version_metadata
from qemforge.extrapolation import richardson_coefficients

from ._base import QemForgeCommand, parse_floats


def extrapolate_tables(tables, nodes, exponent=1):
    """
    Combine per-node result tables row by row.

    Rows are matched by method and position; fidelities combine through the
    overlaps ``F^2`` and overheads through ``C = sum |beta_j| C_j``.
    """
    coefficients = richardson_coefficients([r**exponent for r in nodes])
    if len(tables) != len(nodes):
        msg = f"{len(tables)} input tables for {len(nodes)} nodes"
        raise ExtrapolationError(msg)
    reference = tables[0]
    widest = max(range(len(nodes)), key=lambda j: nodes[j])
    rows = []
    for method in reference.methods:
        per_node = [table.rows_for(method) for table in tables]
        if len({len(node_rows) for node_rows in per_node}) != 1:
            msg = f"Node tables disagree on the number of {method!r} rows"
            raise ExtrapolationError(msg)
        for k, row in enumerate(per_node[0]):
            node_rows = [node[k] for node in per_node]
            mean = coefficients.combine([r.mean for r in node_rows])
            stderr = math.sqrt(math.fsum((b * r.stderr) ** 2 for b, r in zip(coefficients.beta, node_rows)))
            overlap = coefficients.combine([r.fidelity**2 for r in node_rows])
            overhead = math.fsum(abs(b) * math.sqrt(r.cost_C2) for b, r in zip(coefficients.beta, node_rows))
            rows.append(
                ResultRow(
                    row.time_us,
                    method,
                    mean,
                    stderr,
                    math.sqrt(min(max(overlap, 0.0), 1.0)),
                    node_rows[widest].mean_jumps,
                    row.C1_total,
                    overhead**2,
                )
            )
    metadata = {"nodes": ",".join(repr(r) for r in nodes), "exponent": exponent, **version_metadata()}
    return ResultTable(rows, metadata)


class Command(QemForgeCommand):
    help = "Richardson-combine result tables produced at boosted noise levels."

    def add_arguments(self, parser):
        parser.add_argument("--nodes", required=True, help="Boost factors, e.g. 1,1.8 (first must be 1).")
        parser.add_argument("--inputs", required=True, help="Comma-separated CSV files, one per node.")
        parser.add_argument("--exponent", type=int, choices=(1, 2), default=1, help="2 for rates linear in time.")
        parser.add_argument("--out", help="Output CSV path; defaults to stdout.")

    def run(self, *args, **options):
        nodes = parse_floats(options["nodes"], "nodes")
        try:
            richardson_coefficients([r**options["exponent"] for r in nodes])
        except ExtrapolationError as e:
            raise ConfigError({"nodes": [str(e)]}) from e
        paths = [p.strip() for p in options["inputs"].split(",") if p.strip()]
        try:
            tables = [read_result_table(path) for path in paths]
        except QemForgeError:
            raise
        except (OSError, ValueError) as e:
            raise ConfigError({"inputs": [str(e)]}) from e
        table = extrapolate_tables(tables, nodes, options["exponent"])
        if options["out"]:
            table.write(options["out"])
            self.stdout.write(self.style.SUCCESS(f"Wrote {len(table.rows)} rows to {options['out']}"))
        else:
            self.stdout.write(table.to_csv(), ending="")
