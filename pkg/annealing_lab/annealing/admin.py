from django.contrib import admin

from .models import Problem, Run


@admin.register(Problem)
class ProblemAdmin(admin.ModelAdmin):
    list_display = ('label', 'n_vars', 'solution_count', 'source', 'created_at')
    list_filter = ('source', 'n_vars')
    search_fields = ('label',)


@admin.register(Run)
class RunAdmin(admin.ModelAdmin):
    list_display = ('id', 'command', 'problem', 'status', 'created_at', 'completed_at')
    list_filter = ('command', 'status')
    readonly_fields = ('manifest', 'results', 'output_dir', 'task_id')
