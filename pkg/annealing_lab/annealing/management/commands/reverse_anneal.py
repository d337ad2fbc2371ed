from itertools import product

from annealing.management.base import LabCommand
from annealing.management.commands.anneal import sampling_rows
from annealing.models import Problem
from annealing.services.jobs import default_targets
from annealing.services.problem_io import resolve_problem
from annealing.utils.tasks import run_jobs


class Command(LabCommand):
    help = "Reverse anneal: from a basis state back to s_r, optionally wait, then forward to s=1."
    command_name = 'reverse_anneal'
    manifest_keys = ('problem', 'init', 'sr', 'tw', 'ta', 'tau', 'schedule', 'targets', 'alpha', 'no_converge', 'p_target')

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument('--problem', required=True, help="Problem file or bundled label.")
        parser.add_argument('--init', nargs='+', required=True,
                            help="Initial bitstrings, or 'ground' for every target solution.")
        parser.add_argument('--sr', type=float, nargs='+', required=True, help="Reversal distances in (0, 1).")
        parser.add_argument('--tw', type=float, nargs='+', default=[0.0], help="Waiting times at s_r.")
        parser.add_argument('--ta', type=float, nargs='+', required=True, help="Duration of each ramp.")
        parser.add_argument('--tau', type=float, default=None)
        parser.add_argument('--schedule', default=None, help="CSV with columns s,A,B.")
        parser.add_argument('--targets', nargs='*', default=None, help="Target bitstrings (default: all solutions).")
        parser.add_argument('--alpha', type=float, nargs='+', default=[1.0])
        parser.add_argument('--no-converge', action='store_true')
        parser.add_argument('--p-target', type=float, default=0.99)

    def run_lab(self, **options):
        problem = resolve_problem(options['problem'])
        inits = options['init']
        if inits == ['ground']:
            inits = [str(s) for s in default_targets(problem)]

        inputs = [ref for ref in (options['problem'], options['schedule']) if ref]
        directory = self.start_run(options, inputs=inputs,
                                   problem=Problem.objects.filter(label=problem.label).first())

        params = [
            ({
                'problem': problem.to_json_dict(),
                'init': init,
                's_r': s_r,
                'T_W': T_W,
                'T_A': T_A,
                'tau': options['tau'],
                'schedule': options['schedule'],
                'targets': options['targets'],
                'alpha': alpha,
                'converge': not options['no_converge'],
                'p_target': options['p_target'],
            },)
            for init, s_r, T_W, T_A, alpha in product(inits, options['sr'], options['tw'], options['ta'], options['alpha'])
        ]
        entries = run_jobs('annealing.services.jobs.reverse_job', params)

        directory.write_table('probabilities.csv', sampling_rows(entries, ('initial', 's_r', 'T_W', 'T_A', 'alpha')))
        for entry in entries:
            p = entry['parameters']
            self.stdout.write(
                f"{p['initial']} s_r={p['s_r']:g} T_W={p['T_W']:g} T_A={p['T_A']:g}: "
                f"p={entry['sampling']['total_success']:.4f}"
            )
        self.finish_run(directory, entries)
