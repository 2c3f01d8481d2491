import csv

from qemforge.decomposition import decompose_noise

from ._base import QemForgeCommand, build_noise


class Command(QemForgeCommand):
    help = "Decompose the recovery generator of a noise preset over the basis operations."

    def add_arguments(self, parser):
        parser.add_argument("--noise", required=True, help="Noise preset name, e.g. relax_dephase.")
        parser.add_argument("--rates", default="", help="Comma-separated name=value pairs, e.g. lambda1=0.04,lambda2=0.04.")
        parser.add_argument("--qubits", type=int, default=1)
        parser.add_argument("--method", choices=("minimal", "lp"), default="minimal")
        parser.add_argument("--convention", choices=("gksl", "doubled"), default="gksl")
        parser.add_argument("--all", action="store_true", help="Also list zero coefficients.")

    def run(self, *args, **options):
        noise = build_noise(options["noise"], options["rates"], options["qubits"])
        decomps = decompose_noise(noise, options["method"], lindblad_convention=options["convention"])
        writer = csv.writer(self.stdout, lineterminator="\n")
        writer.writerow(("support", "operation", "coefficient"))
        for decomp in decomps:
            support = " ".join(str(q) for q in decomp.support)
            for name, value in decomp.as_dict(include_zero=options["all"]).items():
                writer.writerow((support, name, repr(value)))
        for decomp in decomps:
            self.stdout.write(f"# support={decomp.support} C1={decomp.c1!r} Gamma={decomp.gamma!r}")
