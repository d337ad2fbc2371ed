import sys

from tqdm import tqdm

from annealing.management.base import LabCommand
from annealing.models import Problem
from annealing.services.ising import energy_histogram, ferro_chain, make_chain_spec, random_spin_reversal
from annealing.services.manifest import dump_json
from annealing.services.problem_io import write_problem
from annealing.services.sat2 import (
    degeneracy_stats,
    derive_rng,
    enumerate_solutions,
    generate_ensemble,
    make_config,
    sample_degeneracies,
)


class Command(LabCommand):
    help = "Generate 2-SAT ensembles bucketed by solution count, or ferromagnetic chain instances (--chain)."
    command_name = 'gen_problems'
    manifest_keys = ('n', 'c', 'degeneracies', 'count', 'chain', 'flips', 'coupling', 'sample_size', 'register')

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument('--n', type=int, required=True, help="Number of variables / spins.")
        parser.add_argument('--c', type=int, default=1, help="Clause offset: M = N + c.")
        parser.add_argument('--degeneracies', type=int, nargs='+', default=[1, 2, 4])
        parser.add_argument('--count', type=int, default=10, help="Problems per degeneracy bucket.")
        parser.add_argument('--chain', action='store_true', help="Build spin-reversed chains instead of 2-SAT.")
        parser.add_argument('--flips', type=int, default=2, help="Spins flipped per chain instance.")
        parser.add_argument('--coupling', type=float, default=0.5, help="Chain coupling magnitude.")
        parser.add_argument('--sample-size', type=int, default=0,
                            help="Also sample this many unfiltered problems for degeneracy statistics.")
        parser.add_argument('--register', action='store_true', help="Store generated problems in the database.")

    def run_lab(self, **options):
        if options['chain']:
            return self._chains(options)

        config = make_config(
            n_vars=options['n'],
            clause_offset_c=options['c'],
            target_degeneracies=frozenset(options['degeneracies']),
            seed=options['seed'],
        )
        directory = self.start_run(options)
        base = self.output_dir(options) / 'ensembles' / str(config.n_vars)

        with tqdm(total=len(config.target_degeneracies) * options['count'], file=sys.stderr,
                  disable=options['verbosity'] < 2, desc=f"N={config.n_vars}") as bar:
            ensemble = generate_ensemble(config, options['count'],
                                         progress=lambda attempts, fill: bar.update(1))

        written = []
        for degeneracy, problems in ensemble.buckets.items():
            for problem in problems:
                written.append(str(write_problem(problem, base / str(degeneracy) / f"{problem.label}.json")))
                if options['register']:
                    Problem.register(problem, Problem.Source.GENERATED, solution_count=degeneracy)

        stats = degeneracy_stats(ensemble.problems).to_json_dict()
        stats['attempts'] = ensemble.attempts
        stats['satisfiable_draws'] = ensemble.satisfiable
        report = {'config': config.model_dump(mode='json'), 'ensemble': stats, 'files': written}
        if options['sample_size']:
            report['unfiltered'] = sample_degeneracies(config, options['sample_size']).to_json_dict()
        (base / 'stats.json').write_text(dump_json(report), encoding='utf-8')

        self.stdout.write(f"{len(written)} problems in {ensemble.attempts} attempts; mean solutions {stats['mean_mu']:.3f}")
        self.finish_run(directory, report)

    def _chains(self, options):
        directory = self.start_run(options)
        base = self.output_dir(options) / 'chains' / str(options['n'])
        base.mkdir(parents=True, exist_ok=True)
        reference = ferro_chain(make_chain_spec(n_spins=options['n'], coupling_magnitude=options['coupling']))
        reference_histogram = energy_histogram(reference)

        written = []
        for k in range(options['count']):
            model, flipped = random_spin_reversal(reference, options['flips'], derive_rng(options['seed'], k))
            label = f"chain-N{options['n']}-s{options['seed']}-{k:04d}"
            path = base / f"{label}.json"
            path.write_text(dump_json({**model.to_json_dict(), 'flipped_spins': sorted(flipped)}), encoding='utf-8')
            written.append(str(path))

        report = {'histogram': reference_histogram.to_json_dict(), 'files': written}
        self.stdout.write(f"{len(written)} chain instances with ground degeneracy {reference_histogram.g0}")
        self.finish_run(directory, report)
