from django.core.management.base import BaseCommand, CommandError

from annealing.exceptions import LabError
from annealing.models import Problem
from annealing.services.problem_io import fixture_labels, fixture_problem
from annealing.services.sat2 import enumerate_solutions


class Command(BaseCommand):
    help = "Register the bundled reference problems (labels 1, 3 and 230) in the database."

    def handle(self, *args, **options):
        try:
            for label in fixture_labels():
                problem = fixture_problem(label)
                row = Problem.register(problem, Problem.Source.FIXTURE,
                                       solution_count=len(enumerate_solutions(problem)))
                self.stdout.write(f"{row.label}: N={row.n_vars}, {row.solution_count} solutions")
        except LabError as e:
            raise CommandError(str(e), returncode=e.exit_code)
        self.stdout.write(self.style.SUCCESS(f"Registered {len(fixture_labels())} fixtures."))
