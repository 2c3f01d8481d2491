from django.core.management.base import CommandError

from qemforge.experiments import FIGURES, SCALES, reproduce

from ._base import EXIT_ACCEPTANCE, QemForgeCommand


class Command(QemForgeCommand):
    help = "Reproduce a figure's tables from the bundled configs and evaluate its acceptance checks."

    def add_arguments(self, parser):
        parser.add_argument("figure", help=f"One of: {', '.join(FIGURES)}.")
        parser.add_argument("--scale", choices=SCALES, default="small")
        parser.add_argument("--out-dir", default=".", help="Directory receiving one CSV per panel.")
        parser.add_argument("--workers", type=int)

    def run(self, *args, **options):
        report = reproduce(options["figure"], options["scale"], options["workers"])
        for path in report.write(options["out_dir"]):
            self.stdout.write(f"wrote {path}")
        for line in report.summary_lines():
            self.stdout.write(line)
        if not report.passed:
            msg = f"{report.figure}: acceptance checks failed"
            raise CommandError(msg, returncode=EXIT_ACCEPTANCE)
