from math import comb

import numpy as np
from django.test import SimpleTestCase

from annealing.exceptions import InvalidInputError, ResourceLimitError
from annealing.services.bitstrings import BasisState
from annealing.services.ising import (
    IsingModel,
    diagonal_energies,
    energy,
    energy_histogram,
    ferro_chain,
    ground_states,
    make_chain_spec,
    map_2sat,
    random_spin_reversal,
    rescale,
    spin_reversal,
)
from annealing.services.problem_io import fixture_problem, ising_from_json, ising_to_json
from annealing.services.sat2 import count_violated, derive_rng, enumerate_solutions

FIXTURE_1_VIOLATIONS = (4, 484, 2400, 4204, 4672, 3132, 1232, 244, 12)
FIXTURE_3_VIOLATIONS = (4, 440, 2364, 4708, 4484, 2644, 1268, 396, 72, 4)


def random_model(n, seed):
    rng = np.random.default_rng(seed)
    couplings = {(i, j): rng.uniform(-1, 1) for i in range(1, n + 1) for j in range(i + 1, n + 1)}
    return IsingModel(n, tuple(rng.uniform(-1, 1, n)), couplings, 0.3)


class IsingModelTests(SimpleTestCase):
    def test_couplings_are_canonicalized_and_merged(self):
        model = IsingModel(3, (0, 0, 0), {(2, 1): 0.5, (1, 2): 0.25, (2, 3): 0.0})
        self.assertEqual(model.couplings, {(1, 2): 0.75})

    def test_diagonal_coupling_is_rejected(self):
        with self.assertRaises(InvalidInputError):
            IsingModel(2, (0, 0), {(1, 1): 1.0})

    def test_field_length_must_match(self):
        with self.assertRaises(InvalidInputError):
            IsingModel(3, (0, 0))

    def test_json_round_trip(self):
        model = random_model(5, 1)
        restored = ising_from_json(ising_to_json(model))
        self.assertEqual(restored, model)

    def test_diagonal_matches_pointwise_energy(self):
        model = random_model(6, 2)
        table = diagonal_energies(model)
        for index in (0, 5, 17, 63):
            state = BasisState.from_index(index, 6)
            self.assertAlmostEqual(table[index], energy(model, state))

    def test_enumeration_cap(self):
        with self.assertRaises(ResourceLimitError):
            diagonal_energies(random_model(6, 3), cap=5)


class TwoSatMappingTests(SimpleTestCase):
    def test_energy_is_four_times_the_violated_clause_count(self):
        problem = fixture_problem('230')
        model = map_2sat(problem)
        rng = derive_rng(4)
        for index in rng.integers(0, 2 ** 14, size=200):
            state = BasisState.from_index(int(index), 14)
            self.assertAlmostEqual(energy(model, state), 4 * count_violated(problem, state))

    def test_ground_states_are_the_solutions(self):
        problem = fixture_problem('230')
        self.assertEqual(ground_states(map_2sat(problem)), enumerate_solutions(problem))

    def test_fixture_histograms(self):
        for label, expected in (('1', FIXTURE_1_VIOLATIONS), ('3', FIXTURE_3_VIOLATIONS)):
            with self.subTest(label=label):
                histogram = energy_histogram(map_2sat(fixture_problem(label)))
                self.assertEqual(histogram.degeneracies, expected)
                self.assertEqual(histogram.levels, tuple(4.0 * k for k in range(len(expected))))
                self.assertEqual(histogram.delta_e, 4.0)

    def test_rescale_scales_every_level(self):
        model = map_2sat(fixture_problem('1'))
        scaled = energy_histogram(rescale(model, 0.25))
        self.assertEqual(scaled.levels[:3], (0.0, 1.0, 2.0))
        self.assertEqual(scaled.degeneracies, energy_histogram(model).degeneracies)

    def test_rescale_rejects_non_positive_alpha(self):
        with self.assertRaises(InvalidInputError):
            rescale(map_2sat(fixture_problem('1')), 0.0)


class ChainTests(SimpleTestCase):
    def test_chain_levels_follow_broken_bond_counts(self):
        for n_spins in range(2, 15):
            with self.subTest(n_spins=n_spins):
                histogram = energy_histogram(ferro_chain(make_chain_spec(n_spins=n_spins)))
                self.assertEqual(histogram.degeneracies, tuple(2 * comb(n_spins - 1, n) for n in range(n_spins)))
                self.assertEqual(histogram.levels, tuple(-0.5 * (n_spins - 1) + n for n in range(n_spins)))

    def test_aligned_states_are_the_ground_states(self):
        states = ground_states(ferro_chain(make_chain_spec(n_spins=5)))
        self.assertEqual([str(s) for s in states], ['00000', '11111'])

    def test_flipped_chain_ground_states_are_reversed(self):
        states = ground_states(ferro_chain(make_chain_spec(n_spins=4, flipped_spins=frozenset({2}))))
        self.assertEqual([str(s) for s in states], ['0100', '1011'])

    def test_out_of_range_flip_is_rejected(self):
        with self.assertRaises(InvalidInputError):
            make_chain_spec(n_spins=4, flipped_spins=frozenset({5}))


class SpinReversalTests(SimpleTestCase):
    def test_random_gauges_preserve_the_spectrum(self):
        rng = derive_rng(8)
        for model in (ferro_chain(make_chain_spec(n_spins=8)), random_model(7, 5)):
            reference = energy_histogram(model)
            for _ in range(100):
                gauged, _ = random_spin_reversal(model, int(rng.integers(0, model.n_spins + 1)), rng)
                self.assertTrue(energy_histogram(gauged).matches(reference))

    def test_gauge_maps_ground_states_bitwise(self):
        model = map_2sat(fixture_problem('3'))
        subset = {1, 4, 9}
        expected = {s.flip(subset) for s in ground_states(model)}
        self.assertEqual(set(ground_states(spin_reversal(model, subset))), expected)

    def test_too_many_flips_is_rejected(self):
        with self.assertRaises(InvalidInputError):
            random_spin_reversal(random_model(3, 0), 4, derive_rng(0))
