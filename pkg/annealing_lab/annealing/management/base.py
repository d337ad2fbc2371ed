import logging
from pathlib import Path

from django.conf import settings
from django.core.management.base import BaseCommand, CommandError

from annealing.exceptions import LabError
from annealing.models import Run
from annealing.services.manifest import RunDirectory, load_manifest

logger = logging.getLogger(__name__)


def parse_grid(values):
    """Expand ``start:stop:num`` tokens (linspace) and plain numbers into a sorted list."""
    import numpy as np

    points = []
    for token in values:
        token = str(token)
        if token.count(':') == 2:
            start, stop, num = token.split(':')
            points.extend(float(v) for v in np.linspace(float(start), float(stop), int(num)))
        else:
            points.append(float(token))
    return sorted(set(points))


class LabCommand(BaseCommand):
    """
    Base for lab commands.

    Subclasses implement `run_lab(**options)` and list the options that make up
    their run parameters in `manifest_keys`. Every run writes a run directory
    (manifest.json, results.json, tables) and a Run row. `--replay` reloads the
    parameters of an earlier manifest.
    """
    command_name = None
    manifest_keys = ()

    def add_arguments(self, parser):
        parser.add_argument('--out', default=None, help="Output directory (default: LAB_OUTPUT_DIR).")
        parser.add_argument('--seed', type=int, default=0, help="Root seed.")
        parser.add_argument('--replay', default=None, help="Re-run the parameters of a manifest.json.")

    def handle(self, *args, **options):
        if options.get('replay'):
            try:
                manifest = load_manifest(options['replay'])
            except LabError as e:
                raise CommandError(str(e), returncode=e.exit_code)
            if manifest.command != self.command_name:
                raise CommandError(f"Manifest belongs to '{manifest.command}', not '{self.command_name}'.", returncode=2)
            options.update(manifest.parameters)
            if manifest.seed is not None:
                options['seed'] = manifest.seed

        self.run = None
        try:
            self.run_lab(**options)
        except LabError as e:
            if self.run is not None:
                self.run.mark_failed(str(e))
            raise CommandError(str(e), returncode=e.exit_code)

    # ------------------------------------------------------------------
    # Helpers
    # ------------------------------------------------------------------

    def output_dir(self, options):
        return Path(options.get('out') or settings.LAB_OUTPUT_DIR)

    def start_run(self, options, inputs=(), problem=None):
        parameters = {key: options.get(key) for key in self.manifest_keys}
        directory = RunDirectory.create(
            self.command_name, parameters, seed=options.get('seed'),
            inputs=inputs, base_dir=self.output_dir(options),
        )
        self.run = Run.objects.create(
            command=self.command_name,
            problem=problem,
            manifest=directory.manifest.to_json_dict(),
            output_dir=str(directory.path),
        )
        self.run.mark_running()
        return directory

    def finish_run(self, directory, results):
        directory.write_results(results)
        self.run.mark_complete(results if isinstance(results, dict) else {'results': results}, directory.path)
        self.stdout.write(self.style.SUCCESS(f"Results written to {directory.path}"))
