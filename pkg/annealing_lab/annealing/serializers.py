from rest_framework import serializers

from .models import Problem, Run


class ProblemSerializer(serializers.ModelSerializer):
    class Meta:
        model = Problem
        fields = '__all__'
        read_only_fields = ('id', 'created_at')


class RunSerializer(serializers.ModelSerializer):
    """
    Serializer for Run rows.
    problem_label is shown next to the primary key for convenience.
    """
    problem_label = serializers.ReadOnlyField(source='problem.label')

    class Meta:
        model = Run
        fields = [
            'id', 'command', 'problem', 'problem_label', 'status', 'error_message', 'task_id',
            'manifest', 'results', 'output_dir', 'created_at', 'started_at', 'completed_at',
        ]
        read_only_fields = fields


class AnnealRequestSerializer(serializers.Serializer):
    """Body of POST /api/runs/anneal/."""
    problem = serializers.CharField(help_text="Label of a registered problem.")
    T_A = serializers.FloatField(min_value=0, help_text="Annealing time.")
    tau = serializers.FloatField(required=False, min_value=0)
    alpha = serializers.FloatField(required=False, default=1.0)
    targets = serializers.ListField(child=serializers.RegexField(r'^[01]+$'), required=False, default=list)
    converge = serializers.BooleanField(required=False, default=True)

    def validate_T_A(self, value):
        if value <= 0:
            raise serializers.ValidationError("T_A must be positive.")
        return value

    def validate_alpha(self, value):
        if value <= 0:
            raise serializers.ValidationError("alpha must be positive.")
        return value

    def validate_problem(self, value):
        try:
            return Problem.objects.get(label=value)
        except Problem.DoesNotExist:
            raise serializers.ValidationError(f"No problem labelled {value!r}.")
