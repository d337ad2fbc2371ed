from annealing.exceptions import InvalidInputError
from annealing.management.base import LabCommand, parse_grid
from annealing.services.bitstrings import BasisState
from annealing.services.evolve import Schedule, make_anneal_spec, make_reverse_spec
from annealing.services.ising import map_2sat, rescale
from annealing.services.problem_io import load_ising, resolve_problem
from annealing.services.spectra import min_gap, overlap_trace, spectrum_scan, spectrum_table


def load_model(options):
    """Ising model from --ising, or the 2-SAT mapping of --problem; rescaled by --alpha."""
    if options.get('ising'):
        model, label = load_ising(options['ising']), options['ising']
    elif options.get('problem'):
        problem = resolve_problem(options['problem'])
        model, label = map_2sat(problem), problem.label
    else:
        raise InvalidInputError("Pass --problem or --ising.")
    if options.get('alpha', 1.0) != 1.0:
        model = rescale(model, options['alpha'])
    return model, label


class Command(LabCommand):
    help = "Instantaneous spectrum of H(s): level scans, minimum gaps and state overlaps along a protocol."
    command_name = 'spectrum'
    manifest_keys = ('problem', 'ising', 'alpha', 'schedule', 'mode', 'levels', 'grid', 'pair',
                     'refine_tol', 'ta', 'tau', 'sr', 'tw', 'init', 'samples')

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument('--problem', default=None, help="Problem file or bundled label.")
        parser.add_argument('--ising', default=None, help="Ising model JSON instead of a problem.")
        parser.add_argument('--alpha', type=float, default=1.0)
        parser.add_argument('--schedule', default=None, help="CSV with columns s,A,B.")
        parser.add_argument('--mode', choices=['scan', 'gap', 'overlap'], default='scan')
        parser.add_argument('--levels', type=int, default=5, help="Number of lowest levels.")
        parser.add_argument('--grid', nargs='+', default=None, help="s values or start:stop:num ranges.")
        parser.add_argument('--pair', type=int, nargs=2, default=[1, 2], help="Levels (1-based) for --mode gap.")
        parser.add_argument('--refine-tol', type=float, default=1e-6)
        parser.add_argument('--ta', type=float, default=None, help="Annealing time for --mode overlap.")
        parser.add_argument('--tau', type=float, default=None)
        parser.add_argument('--sr', type=float, default=None, help="Reversal distance (reverse protocol overlaps).")
        parser.add_argument('--tw', type=float, default=0.0)
        parser.add_argument('--init', default=None, help="Initial bitstring of a reverse protocol.")
        parser.add_argument('--samples', type=int, default=101)

    def run_lab(self, **options):
        model, label = load_model(options)
        schedule = Schedule.from_csv(options['schedule']) if options['schedule'] else Schedule.linear()
        inputs = [ref for ref in (options['problem'], options['ising'], options['schedule']) if ref]
        directory = self.start_run(options, inputs=inputs)
        mode = options['mode']

        if mode == 'scan':
            grid = parse_grid(options['grid'] or ['0:1:101'])
            slices = spectrum_scan(model, schedule, grid, options['levels'], seed=options['seed'])
            table = spectrum_table(slices)
            directory.write_table('spectrum.csv', table)
            results = {
                'model': label,
                'levels': options['levels'],
                'points': len(grid),
                'energies_include_offset': True,
                'max_residual': max(float(sl.residuals.max()) for sl in slices),
            }
        elif mode == 'gap':
            level_a, level_b = options['pair']
            grid = parse_grid(options['grid']) if options['grid'] else None
            gap = min_gap(model, schedule, level_a, level_b, grid, options['refine_tol'], seed=options['seed'])
            results = {'model': label, 'level_a': gap.level_a, 'level_b': gap.level_b,
                       's_star': gap.s_star, 'gap': gap.gap}
            self.stdout.write(f"min gap {level_a}-{level_b}: {gap.gap:.6g} at s={gap.s_star:.6f}")
        else:
            if options['ta'] is None:
                raise InvalidInputError("--mode overlap needs --ta.")
            tau = {'tau': min(options['tau'], options['ta'])} if options['tau'] else {}
            spec = make_anneal_spec(model=model, schedule=schedule, T_A=options['ta'], **tau)
            if options['sr'] is not None:
                if not options['init']:
                    raise InvalidInputError("A reverse overlap trace needs --init.")
                spec = make_reverse_spec(base=spec, s_r=options['sr'], T_W=options['tw'],
                                         initial=BasisState.from_string(options['init']))
            trace = overlap_trace(spec, options['levels'], options['samples'], seed=options['seed'])
            directory.write_table('overlaps.csv', trace.to_frame())
            results = {'model': label, 'protocol': spec.describe(), 'levels': options['levels'],
                       'samples': options['samples'],
                       'final_cluster_overlaps': trace.cluster_overlaps[-1].tolist(),
                       'truncated_samples': int(trace.truncated.sum())}

        self.finish_run(directory, results)
