import math

from qemforge.decomposition import cost_overhead, decompose_noise

from ._base import QemForgeCommand, build_noise, parse_rates


class Command(QemForgeCommand):
    help = "Mitigation overhead C, C^2 and the expected jump count for N qubits over time T."

    def add_arguments(self, parser):
        parser.add_argument("--qubits", type=int, required=True)
        parser.add_argument("--rates", required=True, help="Comma-separated name=value pairs.")
        parser.add_argument("--time", type=float, required=True, help="Evolution time (us).")
        parser.add_argument("--noise", default="relax_dephase")
        parser.add_argument("--method", choices=("minimal", "lp"), default="minimal")
        parser.add_argument("--samples", type=int, help="Also report the sampling error C / sqrt(N_s).")

    def run(self, *args, **options):
        noise = build_noise(options["noise"], options["rates"], options["qubits"])
        decomps = decompose_noise(noise, options["method"])
        # Lambda counts the per-qubit physical rates, e.g. lambda1 + lambda2.
        rate_sum = math.fsum(parse_rates(options["rates"]).values())
        report = cost_overhead(decomps, options["time"], options["qubits"], rate_sum)
        lines = [
            f"C1_total={report.c1_total!r}",
            f"C={report.C!r}",
            f"cost_C2={report.C2!r}",
            f"Lambda={report.Lambda!r}",
            f"mean_jumps={report.mean_jumps!r}",
        ]
        if options["samples"]:
            lines.append(f"epsilon={report.C / math.sqrt(options['samples'])!r}")
        for line in lines:
            self.stdout.write(line)
