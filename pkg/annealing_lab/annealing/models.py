"""
Persistence for the lab.

Problems registered through `gen_problems` or `load_fixtures` and every command
run (with its manifest and results) are stored here, so the REST API can list
them and background anneals can report progress.

After changing a model:
1. python manage.py makemigrations annealing
2. python manage.py migrate
"""
import uuid

from django.db import models
from django.utils import timezone


class Problem(models.Model):

    class Source(models.TextChoices):
        FIXTURE   = 'fixture',   'Bundled fixture'
        GENERATED = 'generated', 'Generated'
        IMPORTED  = 'imported',  'Imported'

    id = models.UUIDField(primary_key=True, default=uuid.uuid4, editable=False)
    label = models.CharField(max_length=120, unique=True)
    n_vars = models.PositiveSmallIntegerField()
    clauses = models.JSONField(default=list, help_text="Signed DIMACS literal pairs.")
    solution_count = models.PositiveIntegerField(null=True, blank=True)
    source = models.CharField(max_length=20, choices=Source.choices, default=Source.IMPORTED)
    created_at = models.DateTimeField(auto_now_add=True)

    class Meta:
        ordering = ['n_vars', 'label']

    def __str__(self):
        return f"Problem({self.label}) N={self.n_vars}"

    def to_domain(self):
        from annealing.services.sat2 import TwoSatProblem
        return TwoSatProblem.from_signed(self.n_vars, self.clauses, label=self.label)

    @classmethod
    def register(cls, problem, source, solution_count=None):
        """Create or refresh the row for a domain problem."""
        row, _ = cls.objects.update_or_create(
            label=problem.label,
            defaults={
                'n_vars': problem.n_vars,
                'clauses': [c.signed for c in problem.clauses],
                'solution_count': solution_count,
                'source': source,
            },
        )
        return row


class Run(models.Model):
    """
    One execution of a lab command.

    Lifecycle:
        PENDING  → queued for a worker (REST anneals only)
        RUNNING  → computation in progress
        COMPLETE → results stored
        FAILED   → error_message holds the reason
    """

    class Status(models.TextChoices):
        PENDING  = 'PENDING',  'Pending'
        RUNNING  = 'RUNNING',  'Running'
        COMPLETE = 'COMPLETE', 'Complete'
        FAILED   = 'FAILED',   'Failed'

    id = models.UUIDField(primary_key=True, default=uuid.uuid4, editable=False)
    command = models.CharField(max_length=40, db_index=True)
    problem = models.ForeignKey(Problem, on_delete=models.SET_NULL, null=True, blank=True, related_name='runs')

    status = models.CharField(max_length=20, choices=Status.choices, default=Status.PENDING, db_index=True)
    error_message = models.TextField(blank=True, null=True)
    task_id = models.CharField(max_length=255, blank=True, null=True)

    manifest = models.JSONField(default=dict, blank=True)
    results = models.JSONField(default=dict, blank=True)
    output_dir = models.CharField(max_length=500, blank=True)

    created_at = models.DateTimeField(auto_now_add=True)
    started_at = models.DateTimeField(null=True, blank=True)
    completed_at = models.DateTimeField(null=True, blank=True)

    class Meta:
        ordering = ['-created_at']

    def __str__(self):
        return f"Run({self.id}) - {self.command} - {self.status}"

    def mark_running(self):
        self.status = self.Status.RUNNING
        self.started_at = timezone.now()
        self.save(update_fields=['status', 'started_at'])

    def mark_complete(self, results, output_dir=''):
        self.status = self.Status.COMPLETE
        self.results = results
        self.output_dir = str(output_dir)
        self.completed_at = timezone.now()
        self.save(update_fields=['status', 'results', 'output_dir', 'completed_at'])

    def mark_failed(self, message):
        self.status = self.Status.FAILED
        self.error_message = message
        self.completed_at = timezone.now()
        self.save(update_fields=['status', 'error_message', 'completed_at'])

    @property
    def is_complete(self):
        return self.status == self.Status.COMPLETE

    @property
    def has_failed(self):
        return self.status == self.Status.FAILED
