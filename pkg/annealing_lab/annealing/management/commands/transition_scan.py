import numpy as np

from annealing.management.base import LabCommand, parse_grid
from annealing.management.commands.spectrum import load_model
from annealing.services.bitstrings import BasisState
from annealing.services.evolve import Schedule
from annealing.services.ising import ground_states
from annealing.services.metrics import TauPolicy, transition_scan


class Command(LabCommand):
    help = "Scan 1-p over annealing times and fit the exponential and power-law regimes."
    command_name = 'transition_scan'
    manifest_keys = ('problem', 'ising', 'alpha', 'schedule', 'grid', 'ta_min', 'ta_max', 'points',
                     'tau', 'no_converge', 'targets')

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument('--problem', default=None, help="Problem file or bundled label.")
        parser.add_argument('--ising', default=None, help="Ising model JSON instead of a problem.")
        parser.add_argument('--alpha', type=float, default=1.0)
        parser.add_argument('--schedule', default=None, help="CSV with columns s,A,B.")
        parser.add_argument('--grid', nargs='+', default=None, help="Annealing times (overrides the log grid).")
        parser.add_argument('--ta-min', type=float, default=1.0)
        parser.add_argument('--ta-max', type=float, default=3000.0)
        parser.add_argument('--points', type=int, default=16, help="Log-spaced grid size.")
        parser.add_argument('--tau', type=float, default=None)
        parser.add_argument('--no-converge', action='store_true')
        parser.add_argument('--targets', nargs='*', default=None, help="Target bitstrings (default: ground states).")

    def run_lab(self, **options):
        model, label = load_model(options)
        schedule = Schedule.from_csv(options['schedule']) if options['schedule'] else Schedule.linear()
        if options['grid']:
            grid = parse_grid(options['grid'])
        else:
            grid = np.geomspace(options['ta_min'], options['ta_max'], options['points']).tolist()
        targets = [BasisState.from_string(t) for t in options['targets']] if options['targets'] else ground_states(model)

        inputs = [ref for ref in (options['problem'], options['ising'], options['schedule']) if ref]
        directory = self.start_run(options, inputs=inputs)

        policy = TauPolicy(converge=not options['no_converge'],
                           **({'tau': options['tau']} if options['tau'] else {}))
        scan = transition_scan(model, targets, schedule, grid, policy)
        directory.write_table('transition.csv', scan.to_frame())

        self.stdout.write(
            f"{label}: exponential rate {scan.rate:.4g} (R2={scan.rate_r2:.3f}), "
            f"power slope {scan.slope:.3f} (R2={scan.slope_r2:.3f})"
        )
        self.finish_run(directory, {'model': label, **scan.to_json_dict()})
