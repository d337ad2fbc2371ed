from unittest import mock

from django.test import SimpleTestCase, tag

from annealing.exceptions import GenerationError, InvalidInputError, ResourceLimitError
from annealing.services.bitstrings import BasisState
from annealing.services.metrics import fes_points, fit_scaling_exponent
from annealing.services.problem_io import fixture_ground_states, fixture_problem
from annealing.services.sat2 import (
    TwoSatProblem,
    count_violated,
    degeneracy_stats,
    derive_rng,
    enumerate_solutions,
    expected_degeneracy,
    generate_ensemble,
    generate_problem,
    hamming_distance,
    is_satisfiable_scc,
    make_config,
    read_dimacs,
    sample_degeneracies,
    write_dimacs,
)


class FixtureProblemTests(SimpleTestCase):
    def test_each_fixture_has_four_solutions(self):
        for label in ('1', '3', '230'):
            with self.subTest(label=label):
                self.assertEqual(len(enumerate_solutions(fixture_problem(label))), 4)

    def test_fixture_230_solutions_are_the_reference_kets(self):
        solutions = enumerate_solutions(fixture_problem('230'))
        self.assertEqual(set(solutions), set(fixture_ground_states('230')))

    def test_solutions_are_listed_in_ascending_index_order(self):
        solutions = enumerate_solutions(fixture_problem('3'))
        self.assertEqual(
            [str(s) for s in solutions],
            ['00000100000000', '00001100000000', '00100000000000', '00100100000000'],
        )

    def test_all_false_assignment_violates_the_all_positive_clauses(self):
        # fixture 1 has exactly two clauses without a negated literal
        problem = fixture_problem('1')
        self.assertEqual(count_violated(problem, BasisState.from_index(0, 14)), 2)

    def test_enumeration_cap_is_enforced(self):
        with self.assertRaises(ResourceLimitError):
            enumerate_solutions(fixture_problem('1'), cap=10)


class ProblemValidationTests(SimpleTestCase):
    def test_reversed_duplicate_clause_is_rejected(self):
        with self.assertRaises(InvalidInputError):
            TwoSatProblem.from_signed(2, [[1, 2], [2, 1]])

    def test_uncovered_variable_is_rejected(self):
        with self.assertRaises(InvalidInputError):
            TwoSatProblem.from_signed(3, [[1, 2], [-1, -2]])

    def test_clause_on_a_single_variable_is_rejected(self):
        with self.assertRaises(InvalidInputError):
            TwoSatProblem.from_signed(2, [[1, -1], [1, 2]])

    def test_out_of_range_literal_is_rejected(self):
        with self.assertRaises(InvalidInputError):
            TwoSatProblem.from_signed(2, [[1, 3]])

    def test_hamming_distance(self):
        a, b = BasisState.from_string('0110'), BasisState.from_string('1100')
        self.assertEqual(hamming_distance(a, b), 2)
        self.assertEqual(hamming_distance(a, a), 0)


class SatisfiabilityTests(SimpleTestCase):
    def test_contradictory_pair_is_unsatisfiable(self):
        problem = TwoSatProblem.from_signed(2, [[1, 2], [1, -2], [-1, 2], [-1, -2]])
        self.assertFalse(is_satisfiable_scc(problem))
        self.assertEqual(enumerate_solutions(problem), [])

    def test_scc_agrees_with_brute_force(self):
        rng = derive_rng(7)
        for c in (0, 4, 8, 12):
            config = make_config(n_vars=8, clause_offset_c=c)
            for _ in range(50):
                problem = generate_problem(config, rng)
                with self.subTest(c=c, clauses=[cl.signed for cl in problem.clauses]):
                    self.assertEqual(is_satisfiable_scc(problem), bool(enumerate_solutions(problem)))

    @tag('slow')
    def test_scc_agrees_with_brute_force_on_a_thousand_instances(self):
        rng = derive_rng(11)
        config = make_config(n_vars=8, clause_offset_c=6)
        for _ in range(1000):
            problem = generate_problem(config, rng)
            self.assertEqual(is_satisfiable_scc(problem), bool(enumerate_solutions(problem)))


class GenerationTests(SimpleTestCase):
    def test_generated_problem_has_n_plus_c_clauses(self):
        config = make_config(n_vars=6, clause_offset_c=1)
        problem = generate_problem(config, derive_rng(3))
        self.assertEqual(problem.n_clauses, 7)
        self.assertEqual(len(set(problem.clauses)), 7)

    def test_impossible_clause_count_raises(self):
        config = make_config(n_vars=2, clause_offset_c=10)
        with self.assertRaises(GenerationError):
            generate_problem(config, derive_rng(0))

    def test_uncoverable_variables_fail_before_any_draw(self):
        config = make_config(n_vars=10, clause_offset_c=-6)
        with mock.patch('annealing.services.sat2._draw_problem') as draw:
            with self.assertRaises(GenerationError):
                generate_problem(config, derive_rng(0))
            with self.assertRaises(GenerationError):
                generate_ensemble(config, 1)
        draw.assert_not_called()

    def test_invalid_config_is_reported_as_input_error(self):
        with self.assertRaises(InvalidInputError):
            make_config(n_vars=1)

    def test_ensemble_buckets_hold_the_requested_solution_counts(self):
        ensemble = generate_ensemble(make_config(n_vars=6, seed=5), 2)
        for degeneracy, problems in ensemble.buckets.items():
            self.assertEqual(len(problems), 2)
            for problem in problems:
                self.assertEqual(len(enumerate_solutions(problem)), degeneracy)

    def test_same_seed_gives_identical_ensembles(self):
        first = generate_ensemble(make_config(n_vars=6, seed=9), 2)
        second = generate_ensemble(make_config(n_vars=6, seed=9), 2)
        self.assertEqual(
            [p.to_json_dict() for p in first.problems],
            [p.to_json_dict() for p in second.problems],
        )

    def test_attempt_budget_exhaustion_raises(self):
        config = make_config(n_vars=6, target_degeneracies=frozenset({63}), max_attempts=50)
        with self.assertRaises(GenerationError):
            generate_ensemble(config, 1)


class DegeneracyStatisticsTests(SimpleTestCase):
    def test_expected_degeneracy(self):
        self.assertAlmostEqual(expected_degeneracy(2, 7, 6), 0.75 ** 7 * 64)

    def test_stats_over_fixtures(self):
        stats = degeneracy_stats([fixture_problem('1'), fixture_problem('3')])
        self.assertEqual(stats.solution_counts, [4, 4])
        self.assertEqual(stats.mean_mu, 4.0)
        self.assertEqual(stats.fes_degeneracies, [484, 440])

    def test_sampled_mean_tracks_the_expected_degeneracy(self):
        stats = sample_degeneracies(make_config(n_vars=8, clause_offset_c=1, seed=1), 300)
        # loose band: the generator constraints bias the count upwards
        self.assertGreater(stats.mean_mu, 0.5 * stats.expected_mu)
        self.assertLess(stats.mean_mu, 2.0 * stats.expected_mu)

    @tag('slow')
    def test_first_excited_degeneracy_grows_slowly_with_size(self):
        stats_by_n = {}
        for n in range(6, 13):
            config = make_config(n_vars=n, clause_offset_c=1, seed=n)
            stats_by_n[n] = degeneracy_stats(generate_ensemble(config, 30).problems)
        fit = fit_scaling_exponent(fes_points(stats_by_n), 'mean')
        self.assertAlmostEqual(fit.exponent, 0.311, delta=0.1)


class DimacsTests(SimpleTestCase):
    def test_write_then_read_preserves_the_problem(self):
        problem = fixture_problem('230')
        restored = read_dimacs(write_dimacs(problem), label='230')
        self.assertEqual(set(restored.clauses), set(problem.clauses))
        self.assertEqual(restored.n_vars, 14)

    def test_comment_lines_are_skipped(self):
        text = "c example\np cnf 2 2\n1 2 0\n-1 -2 0\n"
        self.assertEqual(read_dimacs(text).n_clauses, 2)

    def test_clause_count_mismatch_is_rejected(self):
        with self.assertRaises(InvalidInputError):
            read_dimacs("p cnf 2 3\n1 2 0\n-1 -2 0\n")

    def test_missing_header_is_rejected(self):
        with self.assertRaises(InvalidInputError):
            read_dimacs("1 2 0\n")
