import tempfile
from unittest.mock import patch

from django.contrib.auth import get_user_model
from django.core.management import call_command
from django.test import TestCase, override_settings
from io import StringIO

from annealing.models import Problem, Run
from annealing.services.sat2 import TwoSatProblem


class ProblemApiTests(TestCase):
    def setUp(self):
        call_command('load_fixtures', stdout=StringIO())

    def test_lists_registered_problems(self):
        response = self.client.get('/api/problems/')
        self.assertEqual(response.status_code, 200)
        labels = {row['label'] for row in response.json()}
        self.assertEqual(labels, {'1', '3', '230'})

    def test_problem_detail_round_trips_to_the_domain(self):
        row = Problem.objects.get(label='230')
        response = self.client.get(f'/api/problems/{row.id}/')
        self.assertEqual(response.json()['solution_count'], 4)
        self.assertEqual(row.to_domain().n_clauses, 15)


class AnnealApiTests(TestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)
        patcher = override_settings(LAB_OUTPUT_DIR=self.tmp.name)
        patcher.enable()
        self.addCleanup(patcher.disable)

        small = TwoSatProblem.from_signed(4, [[1, 2], [-2, 3], [3, 4], [-1, -4]], label='small')
        Problem.register(small, Problem.Source.IMPORTED)
        self.user = get_user_model().objects.create_user(username='researcher', password='annealing-pass')

    def test_requires_authentication(self):
        response = self.client.post('/api/runs/anneal/', {'problem': 'small', 'T_A': 1.0}, content_type='application/json')
        self.assertIn(response.status_code, (401, 403))
        self.assertEqual(Run.objects.count(), 0)

    def test_runs_inline_during_tests(self):
        """With the worker cluster disabled the anneal completes inside the request."""
        self.client.force_login(self.user)
        response = self.client.post(
            '/api/runs/anneal/',
            {'problem': 'small', 'T_A': 1.0, 'tau': 0.05, 'converge': False},
            content_type='application/json',
        )
        self.assertEqual(response.status_code, 202)
        run = Run.objects.get(pk=response.json()['run_id'])
        self.assertTrue(run.is_complete)
        self.assertEqual(run.problem.label, 'small')
        self.assertEqual(run.results['results'][0]['problem'], 'small')

        status_response = self.client.get(f'/api/runs/{run.id}/status/')
        self.assertEqual(status_response.json()['status'], Run.Status.COMPLETE)

    @override_settings(ASYNC_JOBS_ENABLED=True, TESTING=False)
    @patch('annealing.utils.tasks.async_task', return_value='task-1')
    def test_queues_when_workers_are_enabled(self, mock_async_task):
        self.client.force_login(self.user)
        response = self.client.post('/api/runs/anneal/', {'problem': 'small', 'T_A': 2.0}, content_type='application/json')
        self.assertEqual(response.status_code, 202)
        self.assertEqual(response.json()['task_id'], 'task-1')
        run = Run.objects.get(pk=response.json()['run_id'])
        self.assertEqual(run.status, Run.Status.PENDING)
        self.assertEqual(run.task_id, 'task-1')
        mock_async_task.assert_called_once_with('annealing.services.jobs.run_queued_anneal', str(run.id))

    def test_rejects_invalid_bodies(self):
        self.client.force_login(self.user)
        for body in ({'problem': 'small', 'T_A': 0}, {'problem': 'unknown', 'T_A': 1.0},
                     {'problem': 'small', 'T_A': 1.0, 'targets': ['01x1']}):
            with self.subTest(body=body):
                response = self.client.post('/api/runs/anneal/', body, content_type='application/json')
                self.assertEqual(response.status_code, 400)
        self.assertEqual(Run.objects.count(), 0)

    def test_failed_job_is_recorded(self):
        self.client.force_login(self.user)
        response = self.client.post(
            '/api/runs/anneal/',
            {'problem': 'small', 'T_A': 1.0, 'targets': ['01'], 'converge': False},
            content_type='application/json',
        )
        run = Run.objects.get(pk=response.json()['run_id'])
        self.assertTrue(run.has_failed)
        self.assertIn('does not match', run.error_message)
