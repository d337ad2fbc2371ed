from itertools import product

import pandas as pd

from annealing.management.base import LabCommand
from annealing.models import Problem
from annealing.services.problem_io import resolve_problem
from annealing.utils.tasks import run_jobs


def sampling_rows(entries, extra_keys):
    rows = []
    for entry in entries:
        for target, probability in entry['sampling']['probabilities'].items():
            rows.append({
                'problem': entry['problem'],
                'n_vars': entry['n_vars'],
                **{key: entry['parameters'].get(key, entry.get(key)) for key in extra_keys},
                'target': target,
                'probability': probability,
                'total_success': entry['sampling']['total_success'],
                'tts': entry['tts']['tts'],
            })
    return pd.DataFrame(rows)


class Command(LabCommand):
    help = "Standard forward anneal from the uniform superposition; reports target probabilities and TTS99."
    command_name = 'anneal'
    manifest_keys = ('problem', 'ta', 'tau', 'schedule', 'targets', 'alpha', 'no_converge', 'p_target')

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument('--problem', nargs='+', required=True, help="Problem files or bundled labels (1, 3, 230).")
        parser.add_argument('--ta', type=float, nargs='+', required=True, help="Annealing times.")
        parser.add_argument('--tau', type=float, default=None, help="Initial Trotter step.")
        parser.add_argument('--schedule', default=None, help="CSV with columns s,A,B.")
        parser.add_argument('--targets', nargs='*', default=None, help="Target bitstrings (default: all solutions).")
        parser.add_argument('--alpha', type=float, nargs='+', default=[1.0], help="Problem Hamiltonian rescaling.")
        parser.add_argument('--no-converge', action='store_true', help="Skip the tau-halving convergence gate.")
        parser.add_argument('--p-target', type=float, default=0.99)

    def run_lab(self, **options):
        problems = [resolve_problem(ref) for ref in options['problem']]
        inputs = [ref for ref in options['problem'] + [options['schedule'] or ''] if ref]
        registered = Problem.objects.filter(label=problems[0].label).first() if len(problems) == 1 else None
        directory = self.start_run(options, inputs=inputs, problem=registered)

        params = [
            ({
                'problem': problem.to_json_dict(),
                'T_A': T_A,
                'tau': options['tau'],
                'schedule': options['schedule'],
                'targets': options['targets'],
                'alpha': alpha,
                'converge': not options['no_converge'],
                'p_target': options['p_target'],
            },)
            for problem, T_A, alpha in product(problems, options['ta'], options['alpha'])
        ]
        entries = run_jobs('annealing.services.jobs.anneal_job', params)

        directory.write_table('probabilities.csv', sampling_rows(entries, ('T_A', 'tau', 'alpha')))
        for entry in entries:
            self.stdout.write(
                f"{entry['problem']} T_A={entry['parameters']['T_A']:g} alpha={entry['alpha']:g}: "
                f"p={entry['sampling']['total_success']:.4f} TTS99={entry['tts']['tts']}"
            )
        self.finish_run(directory, entries)
