import json
from pathlib import Path

import pandas as pd

from annealing.exceptions import InvalidInputError
from annealing.management.base import LabCommand
from annealing.services.ising import energy_histogram, ground_states, map_2sat, rescale
from annealing.services.metrics import (
    counts_to_sampling,
    fes_points_from_reports,
    fit_beta,
    fit_beta_chain,
    fit_scaling_exponent,
    import_sample_counts,
    scaling_points,
)
from annealing.services.problem_io import load_ising, resolve_problem

RECORD_COLUMNS = {
    'beta': ['g0', 'g1', 'delta_e', 'p'],
    'chain': ['n_spins', 'delta_e', 'p'],
    'scaling': ['x', 'y'],
}


def _load_any(reference):
    """Ising JSON (has an 'n' key) or anything resolve_problem accepts."""
    path = Path(reference)
    if path.suffix == '.json' and path.is_file() and 'n' in json.loads(path.read_text(encoding='utf-8')):
        return load_ising(path)
    return map_2sat(resolve_problem(str(reference)))


def read_records(path, kind):
    if not Path(path).is_file():
        raise InvalidInputError(f"Records file {path} does not exist.")
    frame = pd.read_csv(path)
    missing = set(RECORD_COLUMNS[kind]) - set(frame.columns)
    if missing:
        raise InvalidInputError(f"{path} lacks columns {sorted(missing)} for a {kind} fit.")
    return [tuple(row) for row in frame[RECORD_COLUMNS[kind]].itertuples(index=False)]


class Command(LabCommand):
    help = "Fit inverse temperature (two-level or chain model) or scaling exponents."
    command_name = 'fit'
    manifest_keys = ('kind', 'records', 'counts', 'models', 'alpha', 'results', 'quantity', 'statistic', 'stats')

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument('--kind', choices=['beta', 'chain', 'scaling'], required=True)
        parser.add_argument('--records', default=None,
                            help="CSV of records: g0,g1,delta_e,p (beta), n_spins,delta_e,p (chain) or x,y (scaling).")
        parser.add_argument('--counts', nargs='*', default=[],
                            help="Sample-count CSV files from an external sampler.")
        parser.add_argument('--models', nargs='*', default=[],
                            help="Problem or Ising model per counts file (default: 'problem' in the sidecar).")
        parser.add_argument('--alpha', type=float, default=1.0, help="Rescaling applied to problem energies.")
        parser.add_argument('--results', nargs='*', default=[], help="anneal results.json files for scaling fits.")
        parser.add_argument('--stats', nargs='*', default=[],
                            help="gen_problems ensemble reports; fits the mean first-excited-level degeneracy.")
        parser.add_argument('--quantity', choices=['tts', 'inverse_p'], default='tts')
        parser.add_argument('--statistic', choices=['median', 'mean'], default='median')

    def run_lab(self, **options):
        kind = options['kind']
        inputs = [p for p in [options['records'], *options['counts'], *options['results'], *options['stats']] if p]
        directory = self.start_run(options, inputs=inputs)

        if kind == 'scaling':
            points = read_records(options['records'], kind) if options['records'] else []
            if options['results']:
                points += scaling_points(options['results'], options['quantity'], options['statistic'])
            if options['stats']:
                points += fes_points_from_reports(options['stats'])
            fit = fit_scaling_exponent(points, options['statistic'])
            self.stdout.write(f"exponent r={fit.exponent:.4f} (residual {fit.residual:.2e})")
        else:
            records = read_records(options['records'], kind) if options['records'] else []
            records += self._count_records(kind, options)
            fit = fit_beta(records) if kind == 'beta' else fit_beta_chain(records)
            self.stdout.write(f"beta={fit.beta:.4f} T={1e3 * fit.temperature_kelvin:.1f} mK")

        directory.write_table('fit.csv', fit.to_frame())
        self.finish_run(directory, fit.to_json_dict())

    def _count_records(self, kind, options):
        records = []
        models = options['models']
        if models and len(models) != len(options['counts']):
            raise InvalidInputError("--models must list one model per counts file.")
        for k, path in enumerate(options['counts']):
            counts = import_sample_counts(path)
            reference = models[k] if models else counts.metadata.get('problem')
            if not reference:
                raise InvalidInputError(f"No model for {path}; pass --models or set 'problem' in its sidecar.")
            model = _load_any(reference)
            if options['alpha'] != 1.0:
                model = rescale(model, options['alpha'])
            histogram = energy_histogram(model)
            p = counts_to_sampling(counts, ground_states(model)).total_success
            if kind == 'beta':
                records.append((histogram.g0, histogram.g1 or 0, histogram.delta_e or 0.0, p))
            else:
                records.append((model.n_spins, histogram.delta_e or 0.0, p))
        return records
