import json
import tempfile
from pathlib import Path

from django.test import SimpleTestCase, override_settings

from annealing.exceptions import InvalidInputError
from annealing.services.manifest import RunDirectory, load_manifest, parameters_hash
from annealing.services.problem_io import (
    fixture_labels,
    load_ising,
    load_problem,
    problem_from_json,
    resolve_problem,
    write_problem,
)
from annealing.services.sat2 import TwoSatProblem


class ProblemFileTests(SimpleTestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)
        self.dir = Path(self.tmp.name)
        self.problem = TwoSatProblem.from_signed(3, [[1, -2], [2, 3], [-1, -3]], label='tiny')

    def test_json_and_dimacs_files(self):
        for name in ('tiny.json', 'tiny.cnf'):
            with self.subTest(name=name):
                restored = load_problem(write_problem(self.problem, self.dir / name))
                self.assertEqual(set(restored.clauses), set(self.problem.clauses))

    def test_resolve_accepts_paths_and_labels(self):
        path = write_problem(self.problem, self.dir / 'tiny.json')
        self.assertEqual(resolve_problem(str(path)).label, 'tiny')
        self.assertEqual(resolve_problem('230').n_vars, 14)
        with self.assertRaises(InvalidInputError):
            resolve_problem('no-such-problem')

    def test_schema_violations(self):
        with self.assertRaises(InvalidInputError):
            problem_from_json({'n_vars': 3, 'clauses': [[1, 2, 3]]})
        path = self.dir / 'model.json'
        path.write_text(json.dumps({'n': 2}))
        with self.assertRaises(InvalidInputError):
            load_ising(path)

    def test_unreadable_json(self):
        path = self.dir / 'broken.json'
        path.write_text('{"n_vars": ')
        with self.assertRaises(InvalidInputError):
            load_problem(path)

    def test_bundled_labels(self):
        self.assertEqual(fixture_labels(), ['1', '3', '230'])


class RunDirectoryTests(SimpleTestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)

    def test_manifest_round_trip(self):
        with override_settings(LAB_OUTPUT_DIR=self.tmp.name):
            directory = RunDirectory.create('perturb', {'problem': '230'}, seed=7)
        directory.write_results({'ok': True})
        self.assertTrue(str(directory.path).startswith(self.tmp.name))
        manifest = load_manifest(directory.path)
        self.assertEqual((manifest.command, manifest.parameters, manifest.seed), ('perturb', {'problem': '230'}, 7))
        self.assertEqual(load_manifest(directory.path / 'results.json').digest, manifest.digest)

    def test_inputs_are_hashed(self):
        source = Path(self.tmp.name) / 'input.txt'
        source.write_text('clauses')
        directory = RunDirectory.create('anneal', {}, inputs=[source], base_dir=self.tmp.name)
        self.assertEqual(len(directory.manifest.input_hashes[str(source)]), 64)

    def test_parameter_hash_ignores_key_order(self):
        self.assertEqual(parameters_hash('fit', {'a': 1, 'b': 2}), parameters_hash('fit', {'b': 2, 'a': 1}))

    def test_missing_manifest(self):
        with self.assertRaises(InvalidInputError):
            load_manifest(Path(self.tmp.name) / 'absent')
