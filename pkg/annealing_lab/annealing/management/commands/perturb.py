import pandas as pd

from annealing.management.base import LabCommand
from annealing.management.commands.spectrum import load_model
from annealing.services.bitstrings import BasisState
from annealing.services.ising import ground_states
from annealing.services.jobs import default_targets
from annealing.services.perturb import build_perturbation_matrix, decompose_in_eigenbasis, predict_sampling
from annealing.services.problem_io import resolve_problem


class Command(LabCommand):
    help = "First-order perturbative prediction of long-time ground-state sampling probabilities."
    command_name = 'perturb'
    manifest_keys = ('problem', 'ising', 'targets')

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument('--problem', default=None, help="Problem file or bundled label.")
        parser.add_argument('--ising', default=None, help="Ising model JSON instead of a problem.")
        parser.add_argument('--targets', nargs='*', default=None,
                            help="Ground states in the order to report (default: all, bundled order when known).")

    def run_lab(self, **options):
        if options['targets']:
            states = [BasisState.from_string(t) for t in options['targets']]
        elif options['problem'] and not options['ising']:
            states = default_targets(resolve_problem(options['problem']))
        else:
            model, _ = load_model({**options, 'alpha': 1.0})
            states = ground_states(model)

        inputs = [ref for ref in (options['problem'], options['ising']) if ref]
        directory = self.start_run(options, inputs=inputs)

        prediction = predict_sampling(build_perturbation_matrix(states))
        rows = []
        for index, state in enumerate(states, start=1):
            coefficients = decompose_in_eigenbasis(prediction.matrix, index)
            rows.append({'state': str(state), **{f'nu_{m + 1}': c for m, c in enumerate(coefficients)}})
        directory.write_table('decomposition.csv', pd.DataFrame(rows))

        if prediction.degenerate_ground:
            self.stdout.write(self.style.WARNING("Lowest eigenvalue of V is degenerate; prediction is not unique."))
        for state, p in prediction.probabilities.items():
            self.stdout.write(f"{state}: {p:.4f}")
        self.finish_run(directory, prediction.to_json_dict())
