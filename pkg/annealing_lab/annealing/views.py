import logging

from rest_framework import status, viewsets
from rest_framework.decorators import action
from rest_framework.permissions import AllowAny, IsAuthenticated
from rest_framework.response import Response

from .models import Problem, Run
from .serializers import AnnealRequestSerializer, ProblemSerializer, RunSerializer
from .services.manifest import RunManifest
from .utils.tasks import queue_job

logger = logging.getLogger(__name__)


class ProblemViewSet(viewsets.ReadOnlyModelViewSet):
    """
    Registered 2-SAT problems (bundled fixtures, generated ensembles, imports).
    """
    queryset = Problem.objects.all()
    serializer_class = ProblemSerializer
    permission_classes = [AllowAny]


class RunViewSet(viewsets.ReadOnlyModelViewSet):
    """
    Command runs with their manifests and results.
    Anneals can be queued through the `anneal` action.
    """
    queryset = Run.objects.select_related('problem')
    serializer_class = RunSerializer

    def get_permissions(self):
        if self.action == 'anneal':
            return [IsAuthenticated()]
        return [AllowAny()]

    @action(detail=False, methods=['post'])
    def anneal(self, request):
        body = AnnealRequestSerializer(data=request.data)
        body.is_valid(raise_exception=True)
        data = dict(body.validated_data)
        problem = data.pop('problem')

        parameters = {
            'problem': problem.to_domain().to_json_dict(),
            **data,
        }
        manifest = RunManifest(command='anneal', parameters=parameters)
        run = Run.objects.create(
            command='anneal',
            problem=problem,
            status=Run.Status.PENDING,
            manifest=manifest.to_json_dict(),
        )

        task_id = queue_job('annealing.services.jobs.run_queued_anneal', str(run.id))
        if task_id:
            run.task_id = task_id
            run.save(update_fields=['task_id'])
        logger.info("Anneal run %s queued for %s (task %s).", run.id, problem.label, task_id)

        return Response({
            'run_id': str(run.id),
            'task_id': task_id,
            'status_url': request.build_absolute_uri(f'/api/runs/{run.id}/status/'),
        }, status=status.HTTP_202_ACCEPTED)

    @action(detail=True, methods=['get'], url_path='status')
    def run_status(self, request, pk=None):
        run = self.get_object()
        return Response({
            'run_id': str(run.id),
            'status': run.status,
            'error_message': run.error_message,
            'completed_at': run.completed_at,
        })
