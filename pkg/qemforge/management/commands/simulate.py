from dataclasses import replace

from qemforge.config import config_from_dict, config_to_dict, load_config
from qemforge.experiments import run_experiment

from ._base import QemForgeCommand


class Command(QemForgeCommand):
    help = "Run an experiment config and write its result table as CSV."

    def add_arguments(self, parser):
        parser.add_argument("--config", required=True, help="Config file, or the name of a bundled config.")
        parser.add_argument("--seed", type=int, help="Override the master seed.")
        parser.add_argument("--out", help="Output CSV path; defaults to the config's output, else stdout.")
        parser.add_argument("--workers", type=int, help="Worker processes (capped by QEMFORGE_THREADS).")
        parser.add_argument("--rescale", type=float, help="Stretch every run by this factor (boosted node tables).")

    def run(self, *args, **options):
        cfg = load_config(options["config"])
        overrides = {}
        if options["seed"] is not None:
            overrides["seed"] = options["seed"]
        if options["rescale"] is not None:
            overrides["rescale"] = options["rescale"]
        if overrides:
            cfg = config_from_dict({**config_to_dict(cfg), **overrides})
        if options["out"]:
            cfg = replace(cfg, output=options["out"])
        table = run_experiment(cfg, workers=options["workers"])
        if cfg.output:
            self.stdout.write(self.style.SUCCESS(f"Wrote {len(table.rows)} rows to {cfg.output}"))
        else:
            self.stdout.write(table.to_csv(), ending="")
