import json
import math
import tempfile
from pathlib import Path

import numpy as np
from django.test import SimpleTestCase, tag

from annealing.exceptions import InsufficientDataError, InvalidInputError, UnidentifiableFitError
from annealing.services.bitstrings import BasisState
from annealing.services.metrics import (
    SampleCounts,
    TauPolicy,
    TransitionRecord,
    aggregate_ensemble,
    chain_inverse_p0,
    counts_to_sampling,
    equilibrium_p0,
    fes_points,
    fes_points_from_reports,
    fit_beta,
    fit_beta_chain,
    fit_scaling_exponent,
    fit_transition_regimes,
    import_sample_counts,
    make_equilibrium_model,
    scaling_points,
    temperature_from_beta,
    transition_scan,
    tts,
    tts_result,
)
from annealing.services.evolve import Schedule, make_anneal_spec, sample
from annealing.services.ising import ferro_chain, make_chain_spec, map_2sat
from annealing.services.problem_io import fixture_ground_states
from annealing.services.sat2 import DegeneracyStats, enumerate_solutions, generate_ensemble, make_config


class TimeToSolutionTests(SimpleTestCase):
    def test_reference_value(self):
        self.assertAlmostEqual(tts(0.5, 10), 66.4386, places=3)

    def test_certain_success_costs_one_anneal(self):
        self.assertEqual(tts(1.0, 7.5), 7.5)

    def test_zero_probability_is_infinite(self):
        self.assertEqual(tts(0.0, 10), math.inf)
        self.assertIsNone(tts_result(0.0, 10).to_json_dict()['tts'])

    def test_decreasing_in_p(self):
        values = [tts(p, 10) for p in (0.1, 0.3, 0.6, 0.9)]
        self.assertEqual(values, sorted(values, reverse=True))

    def test_invalid_arguments(self):
        for args in ((1.2, 10), (0.5, 0), (0.5, 10, 1.0)):
            with self.subTest(args=args), self.assertRaises(InvalidInputError):
                tts(*args)


class EquilibriumTests(SimpleTestCase):
    def test_two_level_probability(self):
        model = make_equilibrium_model(g0=4, g1=8, delta_e=2, beta=1.42)
        self.assertAlmostEqual(equilibrium_p0(model), 0.8954, places=4)

    def test_zero_temperature_limit(self):
        self.assertAlmostEqual(equilibrium_p0(make_equilibrium_model(g0=4, g1=8, delta_e=2, beta=100)), 1.0)

    def test_invalid_model(self):
        with self.assertRaises(InvalidInputError):
            make_equilibrium_model(g0=0, g1=1, delta_e=1, beta=1)

    def test_temperature_conversion(self):
        self.assertAlmostEqual(temperature_from_beta(1.42), 0.145070, places=6)
        self.assertAlmostEqual(1e3 * temperature_from_beta(5.52), 37.3, places=1)

    def test_chain_sum_truncates_at_five_excitations(self):
        self.assertAlmostEqual(chain_inverse_p0(3, 0.0, 1.0), 4.0)
        self.assertAlmostEqual(chain_inverse_p0(10, 0.0, 1.0), sum(math.comb(9, n) for n in range(6)))


class BetaFitTests(SimpleTestCase):
    def test_recovers_beta_from_exact_two_level_data(self):
        records = []
        for g0, g1, de in ((4, 484, 1.0), (4, 440, 0.5), (2, 12, 2.0), (1, 30, 0.25)):
            p = equilibrium_p0(make_equilibrium_model(g0=g0, g1=g1, delta_e=de, beta=1.42))
            records.append((g0, g1, de, p))
        fit = fit_beta(records)
        self.assertAlmostEqual(fit.beta, 1.42, places=4)
        self.assertLess(fit.residual, 1e-6)
        self.assertEqual(len(fit.to_frame()), 4)

    def test_zero_gaps_are_unidentifiable(self):
        with self.assertRaises(UnidentifiableFitError):
            fit_beta([(4, 10, 0.0, 0.3), (2, 5, 0.0, 0.4)])

    def test_empty_records(self):
        with self.assertRaises(InsufficientDataError):
            fit_beta([])

    def test_probabilities_outside_the_open_interval(self):
        with self.assertRaises(InvalidInputError):
            fit_beta([(4, 10, 1.0, 1.0)])

    def test_recovers_beta_from_chain_data(self):
        records = [(n, 1.0, 1 / chain_inverse_p0(n, 5.52, 1.0)) for n in (4, 8, 16, 32)]
        fit = fit_beta_chain(records)
        self.assertAlmostEqual(fit.beta, 5.52, places=3)
        self.assertEqual(fit.kind, 'chain')


class ScalingTests(SimpleTestCase):
    def test_powers_of_two_give_ln2(self):
        fit = fit_scaling_exponent([(n, 2.0 ** n) for n in (6, 8, 10, 12)])
        self.assertAlmostEqual(fit.exponent, math.log(2))
        self.assertLess(fit.residual, 1e-9)

    def test_constant_values_give_zero(self):
        self.assertAlmostEqual(fit_scaling_exponent([(n, 3.0) for n in (4, 5, 6)]).exponent, 0.0)

    def test_rescaling_values_only_moves_the_intercept(self):
        points = [(4, 1.3), (5, 2.9), (6, 4.2), (7, 9.8)]
        base = fit_scaling_exponent(points)
        scaled = fit_scaling_exponent([(n, 10 * v) for n, v in points])
        self.assertAlmostEqual(scaled.exponent, base.exponent)
        self.assertAlmostEqual(scaled.intercept - base.intercept, math.log(10))

    def test_needs_three_points(self):
        with self.assertRaises(InsufficientDataError):
            fit_scaling_exponent([(4, 1.0), (5, 2.0)])

    def test_rejects_non_positive_values(self):
        with self.assertRaises(InvalidInputError):
            fit_scaling_exponent([(4, 1.0), (5, 0.0), (6, 2.0)])

    def test_median_takes_the_lower_middle_element(self):
        points = aggregate_ensemble({3: [3, 1, 2], 4: [4, 1, 3, 2]})
        self.assertEqual(points, [(3, 2.0), (4, 2.0)])

    def test_median_ignores_infinities_only_below_half(self):
        self.assertEqual(aggregate_ensemble({6: [1.0, math.inf, 3.0]}), [(6, 3.0)])
        with self.assertLogs('annealing.services.metrics', level='WARNING'):
            points = aggregate_ensemble({6: [1.0, math.inf], 8: [1.0, 2.0, math.inf, math.inf]})
        self.assertEqual(points, [(6, math.inf), (8, math.inf)])

    def test_first_excited_degeneracy_points(self):
        stats = {n: DegeneracyStats([4], 4.0, None, 1, fes_degeneracies=[2 ** n, 3 * 2 ** n]) for n in (6, 8)}
        self.assertEqual(fes_points(stats), [(6, 128.0), (8, 512.0)])

    def test_ensemble_reports_are_pooled_by_size(self):
        with tempfile.TemporaryDirectory() as tmp:
            first, second, run = Path(tmp) / 'a.json', Path(tmp) / 'b.json', Path(tmp) / 'results.json'
            first.write_text(json.dumps({'config': {'n_vars': 6}, 'ensemble': {'fes_degeneracies': [2, 4]}}))
            second.write_text(json.dumps({'config': {'n_vars': 6}, 'ensemble': {'fes_degeneracies': [6]}}))
            run.write_text(json.dumps({'results': {'config': {'n_vars': 8}, 'ensemble': {'fes_degeneracies': [10]}}}))
            self.assertEqual(fes_points_from_reports([first, second, run]), [(6, 4.0), (8, 10.0)])
            broken = Path(tmp) / 'broken.json'
            broken.write_text(json.dumps({'results': []}))
            with self.assertRaises(InvalidInputError):
                fes_points_from_reports([broken])
            with self.assertRaises(InvalidInputError):
                fes_points_from_reports([Path(tmp) / 'absent.json'])

    def test_mean_statistic(self):
        self.assertEqual(aggregate_ensemble({4: [1, 2, 3, 4]}, 'mean'), [(4, 2.5)])

    def test_empty_group(self):
        with self.assertRaises(InsufficientDataError):
            aggregate_ensemble({4: []})

    def test_points_from_result_files(self):
        entries = [{'n_vars': n, 'tts': {'tts': t}, 'sampling': {'total_success': p}}
                   for n, t, p in ((6, 10.0, 0.5), (6, 30.0, 0.25), (8, 40.0, 0.2), (10, 160.0, 0.1))]
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / 'results.json'
            path.write_text(json.dumps({'manifest': {}, 'results': entries}))
            self.assertEqual(scaling_points([path]), [(6, 10.0), (8, 40.0), (10, 160.0)])
            self.assertEqual(scaling_points([path], 'inverse_p'), [(6, 2.0), (8, 5.0), (10, 10.0)])


class TransitionTests(SimpleTestCase):
    def test_split_separates_exponential_and_power_law_segments(self):
        short = [(t, math.exp(-0.5 * t)) for t in (1, 2, 3, 4, 5)]
        long = [(t, 50 * t ** -2.0) for t in (10, 20, 40, 80, 160)]
        records = [TransitionRecord(t, 1 - q, 0.02) for t, q in short + long]
        scan = fit_transition_regimes(records)
        self.assertEqual(scan.split, 5)
        self.assertAlmostEqual(scan.rate, 0.5, places=6)
        self.assertAlmostEqual(scan.slope, -2.0, places=6)
        self.assertEqual(scan.to_json_dict()['split_T_A'], 10)
        self.assertEqual(list(scan.to_frame().columns), ['x', 'y', 'y_fit'])

    def test_needs_four_usable_points(self):
        records = [TransitionRecord(t, 0.5, 0.02) for t in (1, 2, 3)] + [TransitionRecord(4, 1.0, 0.02)]
        with self.assertRaises(InsufficientDataError):
            fit_transition_regimes(records)

    def test_scan_rejects_unsorted_and_short_grids(self):
        model = ferro_chain(make_chain_spec(n_spins=3))
        targets = [BasisState.from_string('000'), BasisState.from_string('111')]
        with self.assertRaises(InvalidInputError):
            transition_scan(model, targets, Schedule.linear(), [2, 1, 3, 4])
        with self.assertRaises(InsufficientDataError):
            transition_scan(model, targets, Schedule.linear(), [1, 2, 3])

    @tag('slow')
    def test_generated_instance_shows_both_regimes(self):
        config = make_config(n_vars=6, clause_offset_c=1, target_degeneracies=frozenset({1}), seed=3)
        problem = generate_ensemble(config, 1).problems[0]
        scan = transition_scan(map_2sat(problem), enumerate_solutions(problem), Schedule.linear(),
                               np.geomspace(1.0, 3000.0, 14), TauPolicy(tau=0.05, converge=False))
        self.assertAlmostEqual(scan.slope, -2.0, delta=0.3)
        self.assertGreater(scan.rate_r2, 0.99)


class EnsembleScalingTests(SimpleTestCase):
    @tag('slow')
    def test_tts_grows_with_size_and_long_anneals_catch_up(self):
        sizes = (6, 8, 10, 12)
        groups = {100.0: {}, 1000.0: {}}
        for n in sizes:
            config = make_config(n_vars=n, target_degeneracies=frozenset({4}), seed=n)
            for problem in generate_ensemble(config, 20).problems:
                model, targets = map_2sat(problem), enumerate_solutions(problem)
                for T_A, group in groups.items():
                    p = sample(make_anneal_spec(model=model, T_A=T_A, tau=0.05), targets).total_success
                    group.setdefault(n, []).append(tts(p, T_A))

        short, long = aggregate_ensemble(groups[100.0]), aggregate_ensemble(groups[1000.0])
        self.assertGreater(fit_scaling_exponent(short).exponent, 0)
        ratios = [b / a for (_, a), (_, b) in zip(short, long)]
        self.assertLess(ratios[-1], ratios[0])
        # medians of 20 instances: allow small upticks between neighbouring sizes
        for earlier, later in zip(ratios, ratios[1:]):
            self.assertLessEqual(later, 1.1 * earlier)


class SampleCountsTests(SimpleTestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)
        self.ground = fixture_ground_states('230')

    def write_counts(self, body, metadata=None):
        path = Path(self.tmp.name) / 'counts.csv'
        path.write_text(body)
        if metadata is not None:
            path.with_suffix('.json').write_text(json.dumps(metadata))
        return path

    def test_counts_become_probabilities(self):
        rows = [f"{s},{c}" for s, c in zip(self.ground, (1552, 2470, 2765, 3124))]
        path = self.write_counts("bitstring,count\n" + "\n".join(rows) + "\n00000000000000,89\n",
                                 {'annealer': 'external', 'num_reads': 10000, 'problem': '230'})
        counts = import_sample_counts(path)
        self.assertEqual(counts.total_reads, 10000)
        self.assertEqual(counts.metadata['problem'], '230')
        sampling = counts_to_sampling(counts, self.ground)
        self.assertEqual(list(sampling.probabilities.values()), [0.1552, 0.247, 0.2765, 0.3124])
        self.assertAlmostEqual(sampling.total_success, 0.9911)

    def test_leading_zeros_survive(self):
        counts = import_sample_counts(self.write_counts("bitstring,count\n0011,3\n0011,2\n"))
        self.assertEqual(counts.counts, {BasisState.from_string('0011'): 5})

    def test_missing_targets_count_as_zero(self):
        counts = SampleCounts({BasisState.from_string('01'): 4})
        sampling = counts_to_sampling(counts, [BasisState.from_string('10')])
        self.assertEqual(sampling.total_success, 0.0)

    def test_wrong_columns(self):
        with self.assertRaises(InvalidInputError):
            import_sample_counts(self.write_counts("state,n\n01,3\n"))

    def test_no_reads(self):
        with self.assertRaises(InvalidInputError):
            import_sample_counts(self.write_counts("bitstring,count\n01,0\n"))

    def test_invalid_sidecar(self):
        with self.assertRaises(InvalidInputError):
            import_sample_counts(self.write_counts("bitstring,count\n01,3\n", {'num_reads': 0}))

    def test_missing_file(self):
        with self.assertRaises(InvalidInputError):
            import_sample_counts(Path(self.tmp.name) / 'absent.csv')
